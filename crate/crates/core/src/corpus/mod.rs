//! Theorem database and proof log: domain types, line-oriented file formats,
//! training-example extraction, the synthetic corpus generator, and the two
//! proxy metrics.

pub mod metrics;
pub mod toygen;

use crate::sexpr::{self, SExpr};
use std::fmt;
use std::fs;
use std::path::Path;
use thiserror::Error;

pub use toygen::{generate, generate_toy_corpus, ToyCorpusConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThmKind {
    Definition,
    Theorem,
}

impl fmt::Display for ThmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThmKind::Definition => "def",
            ThmKind::Theorem => "thm",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TheoremRecord {
    pub index: usize,
    pub name: String,
    pub statement: SExpr,
    pub kind: ThmKind,
    pub split: Split,
}

/// Ordered theorem/definition database. A statement at index i may cite only
/// entries with indices strictly below i as premises.
#[derive(Debug, Clone, Default)]
pub struct TheoremDb {
    pub records: Vec<TheoremRecord>,
}

impl TheoremDb {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn statement(&self, index: usize) -> &SExpr {
        &self.records[index].statement
    }

    pub fn indices_in_split(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.split == split && r.kind == ThmKind::Theorem)
            .map(|r| r.index)
            .collect()
    }

    /// Every distinct token appearing in any statement, in first-seen order.
    pub fn all_tokens(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            collect_tokens(&r.statement, &mut seen, &mut out);
        }
        out
    }
}

fn collect_tokens(e: &SExpr, seen: &mut std::collections::HashSet<String>, out: &mut Vec<String>) {
    match e {
        SExpr::Atom(t) => {
            if seen.insert(t.clone()) {
                out.push(t.clone());
            }
        }
        SExpr::Node(children) => {
            for c in children {
                collect_tokens(c, seen, out);
            }
        }
    }
}

/// One recorded proof step: the goal as it stood, the tactic applied, and
/// the premises passed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofStep {
    pub thm_index: usize,
    pub tactic_id: usize,
    pub premises: Vec<usize>,
    pub goal: SExpr,
}

#[derive(Debug, Clone, Default)]
pub struct ProofLog {
    pub steps: Vec<ProofStep>,
}

impl ProofLog {
    pub fn steps_for(&self, thm_index: usize) -> impl Iterator<Item = &ProofStep> {
        self.steps.iter().filter(move |s| s.thm_index == thm_index)
    }
}

/// A (goal, tactic, premises) triple ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub goal: SExpr,
    pub tactic_id: usize,
    pub premises: Vec<usize>,
    pub thm_index: usize,
}

impl From<&ProofStep> for TrainingExample {
    fn from(s: &ProofStep) -> Self {
        TrainingExample {
            goal: s.goal.clone(),
            tactic_id: s.tactic_id,
            premises: s.premises.clone(),
            thm_index: s.thm_index,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: statement parse error: {err}")]
    Statement { line: usize, err: sexpr::ParseError },
    #[error("line {line}: premise {premise} is not eligible for theorem {thm} (must precede it)")]
    Eligibility { line: usize, premise: usize, thm: usize },
    #[error("line {line}: tactic id {id} out of range (< {max} required)")]
    TacticRange { line: usize, id: usize, max: usize },
    #[error("line {line}: theorem index {found}, expected dense index {expected}")]
    NonDense { line: usize, found: usize, expected: usize },
    #[error("line {line}: step references unknown theorem {thm}")]
    UnknownTheorem { line: usize, thm: usize },
}

fn malformed(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// `thm <index> <split> <kind> <name> <sexpr>` per line.
pub fn render_theorem_db(db: &TheoremDb) -> String {
    let mut out = String::new();
    for r in &db.records {
        out.push_str(&format!(
            "thm {} {} {} {} {}\n",
            r.index,
            r.split,
            r.kind,
            r.name,
            sexpr::serialize(&r.statement)
        ));
    }
    out
}

pub fn parse_theorem_db(text: &str) -> Result<TheoremDb, CorpusError> {
    let mut db = TheoremDb::default();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("thm ")
            .ok_or_else(|| malformed(lineno, "expected `thm` line"))?;
        let mut parts = rest.splitn(5, ' ');
        let index: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(lineno, "bad index"))?;
        let split = match parts.next() {
            Some("train") => Split::Train,
            Some("valid") => Split::Valid,
            Some("test") => Split::Test,
            other => return Err(malformed(lineno, format!("bad split {other:?}"))),
        };
        let kind = match parts.next() {
            Some("def") => ThmKind::Definition,
            Some("thm") => ThmKind::Theorem,
            other => return Err(malformed(lineno, format!("bad kind {other:?}"))),
        };
        let name = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed(lineno, "missing name"))?
            .to_string();
        let stmt_text = parts
            .next()
            .ok_or_else(|| malformed(lineno, "missing statement"))?;
        let statement = sexpr::parse(stmt_text)
            .map_err(|err| CorpusError::Statement { line: lineno, err })?;
        if index != db.records.len() {
            return Err(CorpusError::NonDense {
                line: lineno,
                found: index,
                expected: db.records.len(),
            });
        }
        db.records.push(TheoremRecord {
            index,
            name,
            statement,
            kind,
            split,
        });
    }
    Ok(db)
}

/// `step <thm-index> <tactic-id> <premises-or-NONE> <goal-sexpr>` per line;
/// premises are comma-separated database indices.
pub fn render_proof_log(log: &ProofLog) -> String {
    let mut out = String::new();
    for s in &log.steps {
        let prem = if s.premises.is_empty() {
            "NONE".to_string()
        } else {
            s.premises
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!(
            "step {} {} {} {}\n",
            s.thm_index,
            s.tactic_id,
            prem,
            sexpr::serialize(&s.goal)
        ));
    }
    out
}

pub fn parse_proof_log(
    text: &str,
    db: &TheoremDb,
    n_tactics: usize,
) -> Result<ProofLog, CorpusError> {
    let mut log = ProofLog::default();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        if line.is_empty() {
            continue;
        }
        let rest = line
            .strip_prefix("step ")
            .ok_or_else(|| malformed(lineno, "expected `step` line"))?;
        let mut parts = rest.splitn(4, ' ');
        let thm_index: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(lineno, "bad theorem index"))?;
        if thm_index >= db.len() {
            return Err(CorpusError::UnknownTheorem {
                line: lineno,
                thm: thm_index,
            });
        }
        let tactic_id: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(lineno, "bad tactic id"))?;
        if tactic_id >= n_tactics {
            return Err(CorpusError::TacticRange {
                line: lineno,
                id: tactic_id,
                max: n_tactics,
            });
        }
        let prem_field = parts
            .next()
            .ok_or_else(|| malformed(lineno, "missing premise list"))?;
        let premises: Vec<usize> = if prem_field == "NONE" {
            Vec::new()
        } else {
            prem_field
                .split(',')
                .map(|p| {
                    p.parse::<usize>()
                        .map_err(|_| malformed(lineno, format!("bad premise `{p}`")))
                })
                .collect::<Result<_, _>>()?
        };
        for &p in &premises {
            if p >= thm_index {
                return Err(CorpusError::Eligibility {
                    line: lineno,
                    premise: p,
                    thm: thm_index,
                });
            }
        }
        let goal_text = parts
            .next()
            .ok_or_else(|| malformed(lineno, "missing goal"))?;
        let goal = sexpr::parse(goal_text)
            .map_err(|err| CorpusError::Statement { line: lineno, err })?;
        log.steps.push(ProofStep {
            thm_index,
            tactic_id,
            premises,
            goal,
        });
    }
    Ok(log)
}

pub fn load_theorem_db(path: &Path) -> Result<TheoremDb, CorpusError> {
    parse_theorem_db(&fs::read_to_string(path)?)
}

pub fn load_proof_log(
    path: &Path,
    db: &TheoremDb,
    n_tactics: usize,
) -> Result<ProofLog, CorpusError> {
    parse_proof_log(&fs::read_to_string(path)?, db, n_tactics)
}

pub fn save_theorem_db(path: &Path, db: &TheoremDb) -> Result<(), CorpusError> {
    Ok(fs::write(path, render_theorem_db(db))?)
}

pub fn save_proof_log(path: &Path, log: &ProofLog) -> Result<(), CorpusError> {
    Ok(fs::write(path, render_proof_log(log))?)
}

/// Training examples for all theorems of a split.
pub fn extract_examples(db: &TheoremDb, log: &ProofLog, split: Split) -> Vec<TrainingExample> {
    log.steps
        .iter()
        .filter(|s| {
            let r = &db.records[s.thm_index];
            r.split == split && r.kind == ThmKind::Theorem
        })
        .map(TrainingExample::from)
        .collect()
}

/// The negative-sampling pool: premises used at least once as a positive
/// training example, ascending and deduplicated.
pub fn negative_pool(examples: &[TrainingExample]) -> Vec<usize> {
    let mut pool: Vec<usize> = examples
        .iter()
        .flat_map(|e| e.premises.iter().copied())
        .collect();
    pool.sort_unstable();
    pool.dedup();
    pool
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_database_round_trips() {
        let db = parse_theorem_db("").unwrap();
        assert!(db.is_empty());
        assert_eq!(render_theorem_db(&db), "");
    }

    #[test]
    fn db_and_log_round_trip() {
        let text = "thm 0 train def ax0 (a (a (c (fun N (fun N bool)) =) (c N c0)) (c N c1))\n\
                    thm 1 valid thm t1 (a (a (c (fun N (fun N bool)) =) (c N c0)) (c N c0))\n";
        let db = parse_theorem_db(text).unwrap();
        assert_eq!(db.len(), 2);
        assert_eq!(render_theorem_db(&db), text);

        let log_text = "step 1 1 0 (a (a (c (fun N (fun N bool)) =) (c N c0)) (c N c0))\n\
                        step 1 0 NONE (a (a (c (fun N (fun N bool)) =) (c N c0)) (c N c0))\n";
        let log = parse_proof_log(log_text, &db, 41).unwrap();
        assert_eq!(log.steps.len(), 2);
        assert_eq!(log.steps[0].premises, vec![0]);
        assert!(log.steps[1].premises.is_empty());
        assert_eq!(render_proof_log(&log), log_text);
    }

    #[test]
    fn eligibility_violation_reports_line() {
        let db = parse_theorem_db(
            "thm 0 train thm t0 (a (a (c (fun N (fun N bool)) =) (c N c0)) (c N c0))\n",
        )
        .unwrap();
        let err = parse_proof_log("step 0 1 0 (c N c0)\n", &db, 41).unwrap_err();
        match err {
            CorpusError::Eligibility { line, premise, thm } => {
                assert_eq!((line, premise, thm), (1, 0, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tactic_range_and_dense_indices_enforced() {
        let err = parse_theorem_db("thm 5 train thm t (c N c0)\n").unwrap_err();
        assert!(matches!(err, CorpusError::NonDense { found: 5, expected: 0, .. }));

        let db =
            parse_theorem_db("thm 0 train thm t0 (c N c0)\n").unwrap();
        let err = parse_proof_log("step 0 41 NONE (c N c0)\n", &db, 41).unwrap_err();
        assert!(matches!(err, CorpusError::TacticRange { id: 41, .. }));
    }

    #[test]
    fn negative_pool_is_sorted_and_deduped() {
        let ex = |premises: Vec<usize>| TrainingExample {
            goal: SExpr::atom("g"),
            tactic_id: 1,
            premises,
            thm_index: 10,
        };
        let pool = negative_pool(&[ex(vec![3, 1]), ex(vec![1, 7]), ex(vec![])]);
        assert_eq!(pool, vec![1, 3, 7]);
    }
}
