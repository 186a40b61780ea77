//! The map φ from micro-graphs to 1-vector formulas, and batch evaluation
//! with an on-disk formula cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use sha2::{Digest, Sha256};

use crate::exactalg::{AlgError, DiffPolynomial, JetVariable, Monomial, Rational, RingSignature, VarId, MAX_DIM};
use crate::graphcore::{permutations, sort_with_parity};
use crate::micrograph::{sink_owner, MicroGraphEncoding};
use crate::superspace::{Superfunction, XiSet};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{encoding}: {source}")]
    Alg { encoding: String, source: AlgError },
    #[error("cache {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug)]
pub struct FormulaRecord {
    pub encoding: MicroGraphEncoding,
    pub formula: Superfunction,
    pub term_count: usize,
    pub eval_time: Duration,
    pub cache_hit: bool,
}

/// φ(Γ): the sum over one permutation of the coordinate indices per
/// ρ-vertex, signed by the three Levi-Civita symbols. The ground vertex holds
/// the Euler field Σ xᵢξᵢ, so one incoming derivative leaves a bare ξᵢ.
pub fn evaluate_micrograph(e: &MicroGraphEncoding) -> Result<Superfunction, AlgError> {
    let d = e.dim();
    let sig = RingSignature::standard(d);
    let n = e.n_vertices();
    let fibre: Vec<usize> = (0..n)
        .map(|v| match v {
            0 => usize::MAX,
            1..=3 => 0,
            _ => sink_owner(v as u8).unwrap().0,
        })
        .collect();
    let perms: Vec<(Vec<usize>, i64)> = permutations(d)
        .into_iter()
        .map(|p| {
            let mut q = p.clone();
            let odd = sort_with_parity(&mut q);
            (p, if odd { -1 } else { 1 })
        })
        .collect();
    let targets: Vec<Vec<usize>> = e
        .targets()
        .iter()
        .map(|t| t.iter().map(|&v| v as usize).collect())
        .collect();
    let euler: Vec<(XiSet, Monomial)> = (0..d)
        .map(|j| (XiSet::from_indices(&[j]), Monomial::var(j as VarId)))
        .collect();

    type Acc = FxHashMap<(XiSet, Monomial), i64>;
    let acc: Result<Acc, AlgError> = perms
        .par_iter()
        .map(|(p1, s1)| {
            let mut acc = Acc::default();
            let mut mu = vec![[0u8; MAX_DIM]; n];
            let mut factors: Vec<(VarId, u8)> = Vec::with_capacity(n);
            for (p2, s2) in &perms {
                for (p3, s3) in &perms {
                    for m in mu.iter_mut() {
                        *m = [0; MAX_DIM];
                    }
                    let mut ground_hits = 0;
                    let mut ground_index = 0;
                    for (t, p) in targets.iter().zip([p1, p2, p3]) {
                        for (&v, &i) in t.iter().zip(p) {
                            if v == 0 {
                                ground_hits += 1;
                                ground_index = i;
                            } else {
                                mu[v][i] += 1;
                            }
                        }
                    }
                    if ground_hits > 1 {
                        continue;
                    }
                    factors.clear();
                    for v in 1..n {
                        let id = sig.jet_id(&JetVariable {
                            fibre: fibre[v] as u8,
                            mu: mu[v],
                        })?;
                        factors.push((id, 1));
                    }
                    let body = Monomial::from_factors(factors.iter().copied());
                    let sign = s1 * s2 * s3;
                    if ground_hits == 1 {
                        *acc.entry((XiSet::from_indices(&[ground_index]), body)).or_insert(0) += sign;
                    } else {
                        for (k, x) in &euler {
                            *acc.entry((*k, body.mul(x))).or_insert(0) += sign;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .try_reduce(Acc::default, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            Ok(a)
        });
    let mut comps: FxHashMap<XiSet, Vec<(Monomial, Rational)>> = FxHashMap::default();
    for ((k, m), c) in acc? {
        if c != 0 {
            comps.entry(k).or_default().push((m, Rational::from_int(c)));
        }
    }
    let mut out = Superfunction::zero(&sig);
    for (k, terms) in comps {
        out.set(k, DiffPolynomial::from_terms(&sig, terms));
    }
    Ok(out)
}

/// Evaluates a list of encodings on `workers` threads. Isomorphic encodings
/// share one evaluation of their canonical form; with a cache directory,
/// canonical formulas are stored one file per encoding with a checksum.
pub fn evaluate_batch(
    es: &[MicroGraphEncoding],
    workers: usize,
    cache_dir: Option<&Path>,
) -> Result<Vec<FormulaRecord>, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(|source| EvalError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let canon: Vec<_> = es.iter().map(|e| e.canonicalize()).collect();
    let mut keys: Vec<&MicroGraphEncoding> = canon.iter().map(|c| &c.encoding).collect();
    keys.sort();
    keys.dedup();
    let evaluated: Vec<(Superfunction, Duration, bool)> = pool.install(|| {
        keys.par_iter()
            .map(|k| {
                let t0 = Instant::now();
                if let Some(dir) = cache_dir {
                    if let Some(f) = cache_load(dir, k) {
                        return Ok((f, t0.elapsed(), true));
                    }
                }
                let f = evaluate_micrograph(k).map_err(|source| EvalError::Alg {
                    encoding: k.to_string(),
                    source,
                })?;
                if let Some(dir) = cache_dir {
                    cache_store(dir, k, &f)?;
                }
                Ok((f, t0.elapsed(), false))
            })
            .collect::<Result<_, EvalError>>()
    })?;
    let index: FxHashMap<&MicroGraphEncoding, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    Ok(es
        .iter()
        .zip(&canon)
        .map(|(e, c)| {
            let (f, t, hit) = &evaluated[index[&c.encoding]];
            let formula = if c.sign == 1 { f.clone() } else { f.neg() };
            FormulaRecord {
                encoding: e.clone(),
                term_count: formula.n_terms(),
                formula,
                eval_time: *t,
                cache_hit: *hit,
            }
        })
        .collect())
}

fn cache_path(dir: &Path, key: &MicroGraphEncoding) -> PathBuf {
    dir.join(format!("{}.txt", key.file_stem()))
}

fn checksum(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

// A missing, unreadable or corrupted entry is a miss; it gets overwritten.
fn cache_load(dir: &Path, key: &MicroGraphEncoding) -> Option<Superfunction> {
    let payload = read_checked(&cache_path(dir, key), &key.to_string())?;
    Superfunction::parse(&RingSignature::standard(key.dim()), &payload).ok()
}

fn cache_store(dir: &Path, key: &MicroGraphEncoding, f: &Superfunction) -> Result<(), EvalError> {
    write_checked(&cache_path(dir, key), &key.to_string(), &f.render())
}

/// Reads a file written by [`write_checked`]; `None` unless the tag and the
/// payload checksum both match.
pub fn read_checked(path: &Path, tag: &str) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    let (head, payload) = text.split_once('\n')?;
    let (t, sum) = head.strip_prefix("# ")?.rsplit_once(" sha256=")?;
    (t == tag && sum == checksum(payload)).then(|| payload.to_string())
}

/// Writes `# <tag> sha256=<hex>` and the payload, replacing the file atomically.
pub fn write_checked(path: &Path, tag: &str, payload: &str) -> Result<(), EvalError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(
        ".{name}.{}.{:?}.tmp",
        std::process::id(),
        std::thread::current().id()
    ));
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(&tmp).map_err(io)?;
    write!(file, "# {tag} sha256={}\n{payload}", checksum(payload)).map_err(io)?;
    file.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micrograph::preset;

    fn enc(s: &str) -> MicroGraphEncoding {
        s.parse().unwrap()
    }

    #[test]
    fn zero_graphs_vanish() {
        for e in preset("vanishing3d").unwrap() {
            assert!(evaluate_micrograph(&e).unwrap().is_zero(), "{e}");
        }
    }

    #[test]
    fn sign_follows_canonical_form() {
        for e in preset("sunflower3d_full").unwrap().iter().step_by(5) {
            let c = e.canonicalize();
            let direct = evaluate_micrograph(e).unwrap();
            let via = evaluate_micrograph(&c.encoding)
                .unwrap()
                .scale(&Rational::from_int(c.sign));
            assert_eq!(direct, via, "{e}");
        }
    }

    #[test]
    fn antisymmetric_in_targets() {
        let e = enc("(0,1,4;1,3,5;1,2,6)");
        let t = e.targets().clone();
        let swapped =
            MicroGraphEncoding::unchecked(3, [t[0].clone(), vec![t[1][1], t[1][0], t[1][2]], t[2].clone()]).unwrap();
        assert_eq!(
            evaluate_micrograph(&e).unwrap(),
            evaluate_micrograph(&swapped).unwrap().neg()
        );
    }

    #[test]
    fn cache_roundtrip_and_corruption() {
        let dir = std::env::temp_dir().join(format!("nambu-cache-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let es = preset("sunflower2d").unwrap();
        let a = evaluate_batch(&es, 2, Some(&dir)).unwrap();
        let b = evaluate_batch(&es, 1, Some(&dir)).unwrap();
        assert!(b.iter().all(|r| r.cache_hit));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.formula, y.formula);
        }
        let key = es[0].canonicalize().encoding;
        let path = cache_path(&dir, &key);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace('+', "-")).unwrap();
        let c = evaluate_batch(&es[..1], 1, Some(&dir)).unwrap();
        assert!(!c[0].cache_hit);
        assert_eq!(c[0].formula, a[0].formula);
        assert!(evaluate_batch(&[], 1, None).unwrap().is_empty());
        fs::remove_dir_all(&dir).unwrap();
    }
}
