//! Versioned text checkpoints: every named parameter, Adam moments, Polyak
//! shadows, and the step counter, with float payloads encoded as raw bit
//! patterns in hex so that load(save(x)) is bit-identical.

use super::matrix::{Dtype, Matrix, Scalar};
use super::optim::{AdamConfig, Optimizer};
use super::tape::ParamStore;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

const MAGIC: &str = "graphtactic-checkpoint v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("line {0}: {1}")]
    Malformed(usize, String),
    #[error("checkpoint dtype is {found}, expected {expected}")]
    DtypeMismatch { found: Dtype, expected: Dtype },
}

fn encode_row<T: Scalar>(row: &[T], out: &mut String) {
    for v in row {
        let bits = v.to_bits_u64();
        write!(out, "{bits:0width$x}", width = T::HEX_WIDTH).expect("infallible write");
    }
}

fn decode_row<T: Scalar>(hex: &str, cols: usize, lineno: usize) -> Result<Vec<T>, CheckpointError> {
    let w = T::HEX_WIDTH;
    if hex.len() != cols * w {
        return Err(CheckpointError::Malformed(
            lineno,
            format!("expected {} hex chars, got {}", cols * w, hex.len()),
        ));
    }
    let mut out = Vec::with_capacity(cols);
    for k in 0..cols {
        let bits = u64::from_str_radix(&hex[k * w..(k + 1) * w], 16)
            .map_err(|e| CheckpointError::Malformed(lineno, e.to_string()))?;
        out.push(T::from_bits_u64(bits));
    }
    Ok(out)
}

fn f64_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn parse_f64_hex(s: &str, lineno: usize) -> Result<f64, CheckpointError> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| CheckpointError::Malformed(lineno, e.to_string()))
}

/// Serialize parameters plus optimizer state to a string.
pub fn render_checkpoint<T: Scalar>(
    meta: &[(String, String)],
    store: &ParamStore<T>,
    opt: &Optimizer<T>,
) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    let _ = writeln!(out, "dtype {}", T::DTYPE);
    for (k, v) in meta {
        assert!(!k.contains(' ') && !k.contains('\n'), "bad meta key");
        assert!(!v.contains('\n'), "meta values must be single-line");
        let _ = writeln!(out, "meta {k} {v}");
    }
    let cfg = opt.cfg;
    let _ = writeln!(
        out,
        "adam lr {} decay {} period {} beta1 {} beta2 {} eps {} polyak {} step {}",
        f64_hex(cfg.learning_rate),
        f64_hex(cfg.decay_rate),
        cfg.decay_period,
        f64_hex(cfg.beta1),
        f64_hex(cfg.beta2),
        f64_hex(cfg.epsilon),
        f64_hex(cfg.polyak),
        opt.step()
    );
    let (m, v) = opt.moments();
    let shadow = opt.shadow();
    for (id, name, value) in store.iter() {
        let _ = writeln!(out, "param {} {} {}", name, value.rows(), value.cols());
        for (tag, mat) in [
            ("row", value),
            ("mrow", &m[id.0]),
            ("vrow", &v[id.0]),
            ("srow", &shadow[id.0]),
        ] {
            for r in 0..mat.rows() {
                out.push_str(tag);
                out.push(' ');
                encode_row(mat.row(r), &mut out);
                out.push('\n');
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    meta: &[(String, String)],
    store: &ParamStore<T>,
    opt: &Optimizer<T>,
) -> Result<(), CheckpointError> {
    let rendered = render_checkpoint(meta, store, opt);
    // Write-then-rename so a failed save never leaves a partial checkpoint.
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(rendered.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read only the dtype header, for callers that dispatch on precision.
pub fn peek_dtype(path: &Path) -> Result<Dtype, CheckpointError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(CheckpointError::BadMagic);
    }
    match lines.next() {
        Some("dtype f32") => Ok(Dtype::F32),
        Some("dtype f64") => Ok(Dtype::F64),
        other => Err(CheckpointError::Malformed(
            2,
            format!("bad dtype line: {other:?}"),
        )),
    }
}

/// Stable identity of a checkpoint file, used to tie premise caches to the
/// checkpoint they were computed from.
pub fn checkpoint_file_id(path: &Path) -> Result<u64, CheckpointError> {
    let bytes = fs::read(path)?;
    Ok(crate::graphrep::fnv1a(&bytes))
}

#[derive(Debug)]
pub struct LoadedCheckpoint<T> {
    pub meta: Vec<(String, String)>,
    pub store: ParamStore<T>,
    pub optimizer: Optimizer<T>,
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<LoadedCheckpoint<T>, CheckpointError> {
    let text = fs::read_to_string(path)?;
    parse_checkpoint(&text)
}

pub fn parse_checkpoint<T: Scalar>(text: &str) -> Result<LoadedCheckpoint<T>, CheckpointError> {
    let mut lines = text.lines().enumerate();
    let bad = |n: usize, msg: &str| CheckpointError::Malformed(n + 1, msg.to_string());

    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(CheckpointError::BadMagic),
    }
    match lines.next() {
        Some((n, line)) => {
            let found = match line.strip_prefix("dtype ") {
                Some("f32") => Dtype::F32,
                Some("f64") => Dtype::F64,
                _ => return Err(bad(n, "bad dtype line")),
            };
            if found != T::DTYPE {
                return Err(CheckpointError::DtypeMismatch {
                    found,
                    expected: T::DTYPE,
                });
            }
        }
        None => return Err(CheckpointError::BadMagic),
    }

    let mut meta = Vec::new();
    let mut store = ParamStore::new();
    let mut adam = AdamConfig::default();
    let mut step = 0u64;
    let mut m: Vec<Matrix<T>> = Vec::new();
    let mut v: Vec<Matrix<T>> = Vec::new();
    let mut shadow: Vec<Matrix<T>> = Vec::new();
    let mut saw_end = false;

    while let Some((n, line)) = lines.next() {
        if line == "end" {
            saw_end = true;
            break;
        }
        if let Some(rest) = line.strip_prefix("meta ") {
            let (k, val) = rest
                .split_once(' ')
                .ok_or_else(|| bad(n, "meta needs key and value"))?;
            meta.push((k.to_string(), val.to_string()));
        } else if let Some(rest) = line.strip_prefix("adam ") {
            let toks: Vec<&str> = rest.split(' ').collect();
            if toks.len() != 16 {
                return Err(bad(n, "bad adam line"));
            }
            adam = AdamConfig {
                learning_rate: parse_f64_hex(toks[1], n + 1)?,
                decay_rate: parse_f64_hex(toks[3], n + 1)?,
                decay_period: toks[5].parse().map_err(|_| bad(n, "bad period"))?,
                beta1: parse_f64_hex(toks[7], n + 1)?,
                beta2: parse_f64_hex(toks[9], n + 1)?,
                epsilon: parse_f64_hex(toks[11], n + 1)?,
                polyak: parse_f64_hex(toks[13], n + 1)?,
            };
            step = toks[15].parse().map_err(|_| bad(n, "bad step"))?;
        } else if let Some(rest) = line.strip_prefix("param ") {
            let toks: Vec<&str> = rest.split(' ').collect();
            if toks.len() != 3 {
                return Err(bad(n, "bad param line"));
            }
            let name = toks[0].to_string();
            let rows: usize = toks[1].parse().map_err(|_| bad(n, "bad rows"))?;
            let cols: usize = toks[2].parse().map_err(|_| bad(n, "bad cols"))?;
            let mut sections: Vec<Matrix<T>> = Vec::with_capacity(4);
            for tag in ["row", "mrow", "vrow", "srow"] {
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (rn, rline) = lines
                        .next()
                        .ok_or_else(|| bad(n, "truncated param block"))?;
                    let hex = rline
                        .strip_prefix(tag)
                        .and_then(|s| s.strip_prefix(' '))
                        .ok_or_else(|| bad(rn, &format!("expected `{tag}` line")))?;
                    data.extend(decode_row::<T>(hex, cols, rn + 1)?);
                }
                sections.push(Matrix::from_vec(rows, cols, data));
            }
            let sh = sections.pop().expect("shadow");
            let vv = sections.pop().expect("v");
            let mm = sections.pop().expect("m");
            let value = sections.pop().expect("value");
            store.add(name, value);
            m.push(mm);
            v.push(vv);
            shadow.push(sh);
        } else if !line.is_empty() {
            return Err(bad(n, "unrecognized line"));
        }
    }
    if !saw_end {
        return Err(CheckpointError::Malformed(0, "missing end marker".into()));
    }

    let optimizer = Optimizer::restore(adam, step, m, v, shadow);
    Ok(LoadedCheckpoint {
        meta,
        store,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tape::Grads;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_store(rng: &mut impl Rng) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        store.add(
            "alpha/w",
            Matrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0f64..1.0) as f32),
        );
        store.add(
            "beta/b",
            Matrix::from_fn(1, 5, |_, _| rng.gen_range(-1.0f64..1.0) as f32),
        );
        store
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut store = random_store(&mut rng);
        let mut opt = Optimizer::new(AdamConfig::default(), &store);
        // Take a couple of steps so moments and shadows are non-trivial.
        for _ in 0..3 {
            let mut grads = Grads::zeros_like(&store);
            for (id, _, p) in store.clone().iter() {
                grads.accumulate(
                    id,
                    &Matrix::from_fn(p.rows(), p.cols(), |_, _| rng.gen_range(-0.1f64..0.1) as f32),
                );
            }
            opt.apply(&mut store, &grads);
        }

        let meta = vec![
            ("model".to_string(), "test fixture".to_string()),
            ("hops".to_string(), "2".to_string()),
        ];
        let rendered = render_checkpoint(&meta, &store, &opt);
        let loaded = parse_checkpoint::<f32>(&rendered).unwrap();
        assert_eq!(loaded.meta, meta);
        assert_eq!(loaded.optimizer.step(), 3);
        for (id, name, p) in store.iter() {
            assert_eq!(loaded.store.name(id), name);
            assert_eq!(loaded.store.value(id), p, "param {name} not bit-identical");
        }
        let (m0, v0) = opt.moments();
        let (m1, v1) = loaded.optimizer.moments();
        assert_eq!(m0, m1);
        assert_eq!(v0, v1);
        assert_eq!(opt.shadow(), loaded.optimizer.shadow());

        // Render again: the serialized form itself must be stable.
        let rendered2 = render_checkpoint(&meta, &loaded.store, &loaded.optimizer);
        assert_eq!(rendered, rendered2);
    }

    #[test]
    fn dtype_mismatch_is_rejected() {
        let store = ParamStore::<f64>::new();
        let opt = Optimizer::new(AdamConfig::default(), &store);
        let rendered = render_checkpoint(&[], &store, &opt);
        let err = parse_checkpoint::<f32>(&rendered).unwrap_err();
        assert!(matches!(err, CheckpointError::DtypeMismatch { .. }));
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(matches!(
            parse_checkpoint::<f32>("not a checkpoint\n"),
            Err(CheckpointError::BadMagic)
        ));
    }
}
