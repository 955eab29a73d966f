//! S-expressions for higher-order-logic terms.
//!
//! Terms arrive as parenthesized, whitespace-separated token strings such as
//! `(a (v (fun A B) f) (v A x))`. The parser is iterative (no recursion on
//! input depth), keeps byte offsets for error reporting, and round-trips
//! losslessly with [`serialize`].

use std::fmt;
use thiserror::Error;

/// A parsed term: either a bare token or an ordered list of subterms.
///
/// By convention the first child of a `Node` is the head token of the
/// construct it encodes (`a`, `v`, `l`, `c`, `fun`, ...), but nothing here
/// enforces that; arity and head-shape rules live in the graph builder.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SExpr {
    Atom(String),
    Node(Vec<SExpr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected closing parenthesis at byte {0}")]
    UnexpectedClose(usize),
    #[error("unbalanced input: {0} unclosed parenthesis(es) at end of input")]
    UnclosedParen(usize),
    #[error("empty list `()` at byte {0}")]
    EmptyList(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("trailing content after top-level expression at byte {0}")]
    TrailingContent(usize),
    #[error("nesting depth exceeds limit {limit} at byte {offset}")]
    TooDeep { limit: usize, offset: usize },
}

/// Default cap on nesting depth; parsing is iterative so this only guards
/// against pathological inputs, not the call stack.
pub const DEFAULT_MAX_DEPTH: usize = 10_000;

/// Parse a single S-expression with the default depth limit.
pub fn parse(text: &str) -> Result<SExpr, ParseError> {
    parse_with_depth(text, DEFAULT_MAX_DEPTH)
}

/// Parse a single S-expression, rejecting nesting deeper than `max_depth`.
pub fn parse_with_depth(text: &str, max_depth: usize) -> Result<SExpr, ParseError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(usize, Vec<SExpr>)> = Vec::new();
    let mut top: Option<SExpr> = None;
    let mut i = 0;

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                if top.is_some() {
                    return Err(ParseError::TrailingContent(i));
                }
                if stack.len() >= max_depth {
                    return Err(ParseError::TooDeep {
                        limit: max_depth,
                        offset: i,
                    });
                }
                stack.push((i, Vec::new()));
                i += 1;
            }
            b')' => {
                let (open_at, children) = stack.pop().ok_or(ParseError::UnexpectedClose(i))?;
                if children.is_empty() {
                    return Err(ParseError::EmptyList(open_at));
                }
                let node = SExpr::Node(children);
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(node),
                    None => top = Some(node),
                }
                i += 1;
            }
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b' ' | b'\t' | b'\n' | b'\r' | b'(' | b')') {
                    i += 1;
                }
                let atom = SExpr::Atom(text[start..i].to_string());
                match stack.last_mut() {
                    Some((_, parent)) => parent.push(atom),
                    None => {
                        if top.is_some() {
                            return Err(ParseError::TrailingContent(start));
                        }
                        top = Some(atom);
                    }
                }
            }
        }
    }

    if !stack.is_empty() {
        return Err(ParseError::UnclosedParen(stack.len()));
    }
    top.ok_or(ParseError::EmptyInput)
}

/// Canonical single-space-separated rendering; `parse(serialize(e)) == e`.
pub fn serialize(expr: &SExpr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &SExpr, out: &mut String) {
    // Iterative writer so deep terms cannot overflow the stack.
    enum Item<'a> {
        Expr(&'a SExpr),
        Close,
        Space,
    }
    let mut work = vec![Item::Expr(expr)];
    while let Some(item) = work.pop() {
        match item {
            Item::Expr(SExpr::Atom(tok)) => out.push_str(tok),
            Item::Expr(SExpr::Node(children)) => {
                out.push('(');
                work.push(Item::Close);
                for (k, child) in children.iter().enumerate().rev() {
                    work.push(Item::Expr(child));
                    if k > 0 {
                        work.push(Item::Space);
                    }
                }
            }
            Item::Close => out.push(')'),
            Item::Space => out.push(' '),
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl SExpr {
    pub fn atom(tok: impl Into<String>) -> Self {
        SExpr::Atom(tok.into())
    }

    pub fn node(children: Vec<SExpr>) -> Self {
        SExpr::Node(children)
    }

    /// Head token and non-head children, if this is a `Node` with an atom head.
    pub fn app(&self) -> Option<(&str, &[SExpr])> {
        match self {
            SExpr::Node(children) => match children.first() {
                Some(SExpr::Atom(head)) => Some((head, &children[1..])),
                _ => None,
            },
            SExpr::Atom(_) => None,
        }
    }

    /// Total number of atoms plus nodes in the tree.
    pub fn tree_size(&self) -> usize {
        let mut n = 0;
        let mut work = vec![self];
        while let Some(e) = work.pop() {
            n += 1;
            if let SExpr::Node(children) = e {
                work.extend(children.iter());
            }
        }
        n
    }
}

/// Deterministic random term generator for property tests and the toy corpus.
///
/// Produces well-formed HOL-style terms: every `Node` has an atom head and
/// one or two non-head children, so the graph builder accepts everything
/// this emits.
pub mod gen {
    use super::SExpr;
    use rand::Rng;

    const HEADS: &[&str] = &["a", "v", "c", "l", "fun"];
    const LEAVES: &[&str] = &["A", "B", "bool", "f", "g", "=", "!", "c0", "c1"];
    // Variable-name tokens are kept disjoint from other leaf tokens, as in
    // the source data where names, constants, and types rarely collide.
    const NAMES: &[&str] = &["x", "y", "z", "w"];

    /// Random well-formed term with depth at most `max_depth`.
    pub fn random_term(rng: &mut impl Rng, max_depth: usize) -> SExpr {
        if max_depth == 0 || rng.gen_bool(0.3) {
            return SExpr::Atom(LEAVES[rng.gen_range(0..LEAVES.len())].to_string());
        }
        let head = HEADS[rng.gen_range(0..HEADS.len())];
        if head == "v" {
            // (v <type> <name>): the name slot is always an atom.
            return SExpr::Node(vec![
                SExpr::Atom("v".to_string()),
                random_term(rng, max_depth - 1),
                SExpr::Atom(NAMES[rng.gen_range(0..NAMES.len())].to_string()),
            ]);
        }
        let arity = if rng.gen_bool(0.85) { 2 } else { 1 };
        let mut children = vec![SExpr::Atom(head.to_string())];
        for _ in 0..arity {
            children.push(random_term(rng, max_depth - 1));
        }
        SExpr::Node(children)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_application_term() {
        let e = parse("(a (v (fun A B) f) (v A x))").unwrap();
        let expected = SExpr::node(vec![
            SExpr::atom("a"),
            SExpr::node(vec![
                SExpr::atom("v"),
                SExpr::node(vec![SExpr::atom("fun"), SExpr::atom("A"), SExpr::atom("B")]),
                SExpr::atom("f"),
            ]),
            SExpr::node(vec![SExpr::atom("v"), SExpr::atom("A"), SExpr::atom("x")]),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_bare_atom() {
        assert_eq!(parse("x").unwrap(), SExpr::atom("x"));
        assert_eq!(parse("  x  ").unwrap(), SExpr::atom("x"));
    }

    #[test]
    fn fig1_term_has_27_tree_nodes() {
        // ∀x. x = x, written out as in the source format. 13 internal nodes
        // plus 14 non-head leaves = 27 graph nodes; tree_size also counts the
        // 13 head atoms.
        let e = parse(FIG1).unwrap();
        assert_eq!(e.tree_size(), 13 + 14 + 13);
    }

    pub(crate) const FIG1: &str =
        "(a (c (fun (fun A bool) bool) !) (l (v A x) (a (a (c (fun A (fun A bool)) =) (v A x)) (v A x))))";

    #[test]
    fn whitespace_is_normalized() {
        let e = parse("( v \n A\t x )").unwrap();
        assert_eq!(serialize(&e), "(v A x)");
    }

    #[test]
    fn serialize_single_node() {
        let e = SExpr::node(vec![SExpr::atom("v"), SExpr::atom("A"), SExpr::atom("x")]);
        assert_eq!(serialize(&e), "(v A x)");
        assert_eq!(serialize(&SExpr::atom("x")), "x");
    }

    #[test]
    fn error_offsets() {
        assert_eq!(parse("(a b))"), Err(ParseError::UnexpectedClose(5)));
        assert_eq!(parse("(a b) (c d)"), Err(ParseError::TrailingContent(6)));
        assert_eq!(parse("(a (b)"), Err(ParseError::UnclosedParen(1)));
        assert_eq!(parse("(a () b)"), Err(ParseError::EmptyList(3)));
        assert_eq!(parse(")"), Err(ParseError::UnexpectedClose(0)));
        assert_eq!(parse(""), Err(ParseError::EmptyInput));
        assert_eq!(parse("a b"), Err(ParseError::TrailingContent(2)));
    }

    #[test]
    fn depth_limit() {
        let deep = "(".repeat(40) + "x" + &")".repeat(40);
        assert!(parse_with_depth(&deep, 40).is_ok());
        assert_eq!(
            parse_with_depth(&deep, 39),
            Err(ParseError::TooDeep { limit: 39, offset: 39 })
        );
    }

    #[test]
    fn roundtrip_1000_random_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5e_c0de);
        for _ in 0..1000 {
            let e = gen::random_term(&mut rng, 6);
            let s = serialize(&e);
            assert_eq!(parse(&s).unwrap(), e, "roundtrip failed for `{s}`");
        }
    }
}
