//! Nambu micro-graphs: three ρ-vertices of out-degree d over a ground vertex
//! and 3·(d−2) Casimir sinks, written as `(0,1,4;1,6,5;4,5,6)`.
//!
//! Vertex ids: 0 is the ground vertex, 1..=3 the ρ-vertices, and
//! `3 + 3(k−1) + g` the sink of Casimir a^k owned by ρ-vertex g.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::graphcore::{permutations, sort_with_parity};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MicroGraphError {
    #[error("malformed encoding {0:?}")]
    Malformed(String),
    #[error("target {target} out of range for d={d}")]
    OutOfRange { target: u8, d: usize },
    #[error("ρ-vertex {vertex} does not end in its Casimir sinks")]
    BadTail { vertex: usize },
    #[error("dimension {0} out of range")]
    Dimension(usize),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("preset {name} has {got} encodings, expected {expected}")]
    PresetCount { name: String, got: usize, expected: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MicroGraphEncoding {
    d: usize,
    targets: [Vec<u8>; 3],
}

/// An encoding together with the sign relating its formula to another's.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedEncoding {
    pub encoding: MicroGraphEncoding,
    pub sign: i64,
}

/// Vertex id of the sink of Casimir `k` (1-based) owned by ρ-vertex `g` (1-based).
pub fn casimir_sink(k: usize, g: usize) -> u8 {
    (3 + 3 * (k - 1) + g) as u8
}

/// `(k, g)` for a Casimir sink id, `None` for the ground and ρ-vertices.
pub fn sink_owner(v: u8) -> Option<(usize, usize)> {
    (v >= 4).then(|| (((v - 4) / 3 + 1) as usize, ((v - 4) % 3 + 1) as usize))
}

impl MicroGraphEncoding {
    /// Checked constructor: lengths, ranges and Casimir tails.
    pub fn new(d: usize, targets: [Vec<u8>; 3]) -> Result<Self, MicroGraphError> {
        let e = Self::unchecked(d, targets)?;
        for g in 1..=3 {
            let tail = &e.targets[g - 1][2..];
            if tail.iter().enumerate().any(|(j, &t)| t != casimir_sink(j + 1, g)) {
                return Err(MicroGraphError::BadTail { vertex: g });
            }
        }
        Ok(e)
    }

    /// Lengths and ranges only; canonical keys and Casimir-swapped images
    /// generally break the tail rule.
    pub fn unchecked(d: usize, targets: [Vec<u8>; 3]) -> Result<Self, MicroGraphError> {
        if !(2..=5).contains(&d) {
            return Err(MicroGraphError::Dimension(d));
        }
        let n = n_vertices(d) as u8;
        for t in &targets {
            if t.len() != d {
                return Err(MicroGraphError::Malformed(format!("{targets:?}")));
            }
            if let Some(&bad) = t.iter().find(|&&v| v >= n) {
                return Err(MicroGraphError::OutOfRange { target: bad, d });
            }
        }
        Ok(MicroGraphEncoding { d, targets })
    }

    pub fn parse(text: &str, d: usize) -> Result<Self, MicroGraphError> {
        let bad = || MicroGraphError::Malformed(text.to_string());
        let inner = text
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(bad)?;
        let lists: Vec<Vec<u8>> = inner
            .split(';')
            .map(|part| {
                part.split(',')
                    .map(|v| v.trim().parse::<u8>().map_err(|_| bad()))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let targets: [Vec<u8>; 3] = lists.try_into().map_err(|_| bad())?;
        Self::new(d, targets)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn targets(&self) -> &[Vec<u8>; 3] {
        &self.targets
    }

    pub fn n_vertices(&self) -> usize {
        n_vertices(self.d)
    }

    /// Edges `(source, target)` in evaluation order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..3)
            .flat_map(|g| self.targets[g].iter().map(move |&t| (g + 1, t as usize)))
            .collect()
    }

    /// Leibniz-rule expansion into dimension d+1, in itertools.product order.
    pub fn descendants(&self) -> Vec<MicroGraphEncoding> {
        let d = self.d;
        assert!(d < 5, "no descendants beyond 5D");
        let k_new = d - 1;
        let mut choices: Vec<Vec<u8>> = Vec::new();
        for g in 1..=3usize {
            for &t in &self.targets[g - 1][..2] {
                let alt = if d == 2 {
                    // the 2D ρ-vertices play the role of their future a¹ sinks
                    (t != 0 && t as usize != g).then(|| casimir_sink(1, t as usize))
                } else {
                    sink_owner(t).map(|(_, owner)| casimir_sink(k_new, owner))
                };
                choices.push(match alt {
                    Some(a) => vec![t, a],
                    None => vec![t],
                });
            }
        }
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for pick in cartesian(&choices) {
            let targets: [Vec<u8>; 3] = std::array::from_fn(|g| {
                let mut t = vec![pick[2 * g], pick[2 * g + 1]];
                t.extend_from_slice(&self.targets[g][2..]);
                t.push(casimir_sink(k_new, g + 1));
                t
            });
            let e = MicroGraphEncoding { d: d + 1, targets };
            if seen.insert(e.clone()) {
                out.push(e);
            }
        }
        out
    }

    /// Minimal form under relabeling the ρ-vertices and, independently, the
    /// three sinks of each Casimir, with every target list sorted. The sign
    /// is the parity of the sorts, since each ρ-vertex carries ε^{i₁…i_d}ρ.
    pub fn canonicalize(&self) -> SignedEncoding {
        let (key, signs) = self.canonical_orbit();
        SignedEncoding {
            encoding: key,
            sign: if signs.0 { 1 } else { -1 },
        }
    }

    /// True iff some relabeling maps the graph to itself with sign −1.
    pub fn is_zero_by_symmetry(&self) -> bool {
        let (_, (plus, minus)) = self.canonical_orbit();
        plus && minus
    }

    // Minimal key and which signs reach it: (reached with +1, reached with −1).
    fn canonical_orbit(&self) -> (MicroGraphEncoding, (bool, bool)) {
        let d = self.d;
        let perms = permutations(3);
        let n_casimirs = d - 2;
        let mut best: Option<(Vec<Vec<u8>>, bool, bool)> = None;
        let mut sink_choice = vec![0usize; n_casimirs];
        loop {
            for rho in &perms {
                let relabel = |v: u8| -> u8 {
                    match v {
                        0 => 0,
                        1..=3 => rho[v as usize - 1] as u8 + 1,
                        _ => {
                            let (k, g) = sink_owner(v).unwrap();
                            casimir_sink(k, perms[sink_choice[k - 1]][g - 1] + 1)
                        }
                    }
                };
                let mut lists = vec![Vec::new(); 3];
                let mut odd = false;
                for g in 0..3 {
                    let mut t: Vec<u8> = self.targets[g].iter().map(|&v| relabel(v)).collect();
                    odd ^= sort_with_parity(&mut t);
                    lists[rho[g]] = t;
                }
                match &mut best {
                    Some((b, plus, minus)) if *b == lists => {
                        if odd {
                            *minus = true;
                        } else {
                            *plus = true;
                        }
                    }
                    Some((b, _, _)) if *b < lists => {}
                    _ => best = Some((lists, !odd, odd)),
                }
            }
            // odometer over the per-Casimir sink relabelings
            let mut k = 0;
            while k < n_casimirs {
                sink_choice[k] += 1;
                if sink_choice[k] < perms.len() {
                    break;
                }
                sink_choice[k] = 0;
                k += 1;
            }
            if k == n_casimirs {
                break;
            }
        }
        let (lists, plus, minus) = best.unwrap();
        let targets: [Vec<u8>; 3] = lists.try_into().unwrap();
        (MicroGraphEncoding { d, targets }, (plus, minus))
    }

    /// Exchanges the roles of a¹ and a² in 4D (sinks 4↔7, 5↔8, 6↔9). The
    /// result keeps the swapped tails, so it lists a² before a¹.
    pub fn swap_casimirs(&self) -> MicroGraphEncoding {
        assert_eq!(self.d, 4, "swap_casimirs is defined for 4D graphs");
        let swap = |v: u8| match v {
            4..=6 => v + 3,
            7..=9 => v - 3,
            _ => v,
        };
        MicroGraphEncoding {
            d: 4,
            targets: std::array::from_fn(|g| self.targets[g].iter().map(|&v| swap(v)).collect()),
        }
    }

    /// Reorders every Casimir tail into ascending Casimir order; the sign
    /// is the parity of those reorderings.
    pub fn normalize_tails(&self) -> SignedEncoding {
        let mut odd = false;
        let targets = std::array::from_fn(|g| {
            let mut t = self.targets[g].clone();
            odd ^= sort_with_parity(&mut t[2..]);
            t
        });
        SignedEncoding {
            encoding: MicroGraphEncoding { d: self.d, targets },
            sign: if odd { -1 } else { 1 },
        }
    }

    /// Filename-safe form, e.g. `d3_0-1-4_1-6-5_4-5-6`.
    pub fn file_stem(&self) -> String {
        let lists: Vec<String> = self
            .targets
            .iter()
            .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-"))
            .collect();
        format!("d{}_{}", self.d, lists.join("_"))
    }
}

pub fn n_vertices(d: usize) -> usize {
    4 + 3 * (d - 2)
}

impl fmt::Display for MicroGraphEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lists: Vec<String> = self
            .targets
            .iter()
            .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "({})", lists.join(";"))
    }
}

/// Guesses the dimension from the list length.
impl FromStr for MicroGraphEncoding {
    type Err = MicroGraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let first = s.split(';').next().unwrap_or("");
        let d = first.split(',').count();
        Self::parse(s, d)
    }
}

fn cartesian(choices: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                c.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Descendants of a whole set, deduplicated by raw encoding, first occurrence kept.
pub fn descendants_of_set(es: &[MicroGraphEncoding]) -> Vec<MicroGraphEncoding> {
    let mut seen = HashSet::new();
    es.iter()
        .flat_map(|e| e.descendants())
        .filter(|e| seen.insert(e.clone()))
        .collect()
}

/// Canonical classes of a set, in first-occurrence order.
pub fn canonical_classes(es: &[MicroGraphEncoding]) -> Vec<MicroGraphEncoding> {
    let mut seen = HashSet::new();
    es.iter()
        .map(|e| e.canonicalize().encoding)
        .filter(|e| seen.insert(e.clone()))
        .collect()
}

/// The frog (with tadpole) and ballerina (without tadpole) families of 5D
/// sunflower descendants, frogs first, each in nested-loop order.
pub fn enumerate_5d_sunflower() -> Vec<MicroGraphEncoding> {
    let rho2 = [2u8, 5, 8, 11];
    let rho1 = [1u8, 4, 7, 10];
    let rho3 = [3u8, 6, 9, 12];
    let mk = |i1: u8, j1: u8, k: u8, j2: u8, i2: u8| MicroGraphEncoding {
        d: 5,
        targets: [vec![0, i1, 4, 7, 10], vec![j1, k, 5, 8, 11], vec![j2, i2, 6, 9, 12]],
    };
    let mut out = Vec::with_capacity(1280);
    for &i2 in &rho2 {
        for &j1 in &rho1 {
            for &j2 in &rho1 {
                for &k in &rho3 {
                    out.push(mk(1, j1, k, j2, i2));
                }
            }
        }
    }
    for &i1 in &rho2 {
        for &i2 in &rho2 {
            for &j1 in &rho1 {
                for &j2 in &rho1 {
                    for &k in &rho3 {
                        out.push(mk(i1, j1, k, j2, i2));
                    }
                }
            }
        }
    }
    out
}

pub const PRESET_NAMES: [&str; 17] = [
    "sunflower2d",
    "sunflower3d_full",
    "vanishing3d",
    "basis20_3d",
    "sol1_3d",
    "sol2_3d",
    "sol3_3d",
    "projected_3d",
    "seventeen_3d",
    "a1_set_4d",
    "a2_set_4d",
    "a3_set_4d",
    "a4_set_4d",
    "a5_set_4d",
    "a6_set_4d",
    "a7_set_4d",
    "a8_set_4d",
];

fn preset_text(name: &str) -> Option<(&'static str, usize, usize)> {
    macro_rules! data {
        ($f:literal, $d:expr, $n:expr) => {
            Some((include_str!(concat!("../../data/presets/", $f, ".txt")), $d, $n))
        };
    }
    match name {
        "vanishing3d" => data!("vanishing3d", 3, 13),
        "basis20_3d" => data!("basis20_3d", 3, 20),
        "sol1_3d" => data!("sol1_3d", 3, 9),
        "sol2_3d" => data!("sol2_3d", 3, 10),
        "sol3_3d" => data!("sol3_3d", 3, 12),
        "projected_3d" => data!("projected_3d", 3, 12),
        "seventeen_3d" => data!("seventeen_3d", 3, 17),
        "a1_set_4d" => data!("a1_set_4d", 4, 160),
        "a2_set_4d" => data!("a2_set_4d", 4, 164),
        "a3_set_4d" => data!("a3_set_4d", 4, 176),
        "a4_set_4d" => data!("a4_set_4d", 4, 176),
        "a5_set_4d" => data!("a5_set_4d", 4, 92),
        "a6_set_4d" => data!("a6_set_4d", 4, 110),
        "a7_set_4d" => data!("a7_set_4d", 4, 210),
        "a8_set_4d" => data!("a8_set_4d", 4, 118),
        _ => None,
    }
}

/// Parses a list of encodings, one per line; `#` starts a comment.
pub fn parse_list(text: &str, d: usize) -> Result<Vec<MicroGraphEncoding>, MicroGraphError> {
    text.lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .map(|l| MicroGraphEncoding::parse(l, d))
        .collect()
}

/// The named graph sets. The two sunflower sets are generated: the 2D set is
/// Γ₁, Γ₂, Γ₂ (the sunflower 1·Γ₁ + 2·Γ₂ with multiplicity) and the full 3D
/// set is its descendants.
pub fn preset(name: &str) -> Result<Vec<MicroGraphEncoding>, MicroGraphError> {
    match name {
        "sunflower2d" => {
            let g1 = MicroGraphEncoding::parse("(0,1;1,3;1,2)", 2)?;
            let g2 = MicroGraphEncoding::parse("(0,2;1,3;1,2)", 2)?;
            Ok(vec![g1, g2.clone(), g2])
        }
        "sunflower3d_full" => Ok(descendants_of_set(&preset("sunflower2d")?)),
        _ => {
            let (text, d, expected) =
                preset_text(name).ok_or_else(|| MicroGraphError::UnknownPreset(name.to_string()))?;
            let list = parse_list(text, d)?;
            if list.len() != expected {
                return Err(MicroGraphError::PresetCount {
                    name: name.to_string(),
                    got: list.len(),
                    expected,
                });
            }
            Ok(list)
        }
    }
}

/// Dimension of a preset's encodings.
pub fn preset_dim(name: &str) -> Option<usize> {
    match name {
        "sunflower2d" => Some(2),
        "sunflower3d_full" => Some(3),
        _ => preset_text(name).map(|(_, d, _)| d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(s: &str) -> MicroGraphEncoding {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        for s in ["(0,1,4;1,6,5;4,5,6)", "(0,1,4,7;1,6,5,8;4,8,6,9)", "(0,1;1,3;1,2)"] {
            assert_eq!(enc(s).to_string(), s);
        }
        assert!(matches!(
            MicroGraphEncoding::parse("(0,1,5;1,6,5;4,5,6)", 3),
            Err(MicroGraphError::BadTail { vertex: 1 })
        ));
        assert!(matches!(
            MicroGraphEncoding::parse("(0,9,4;1,6,5;4,5,6)", 3),
            Err(MicroGraphError::OutOfRange { .. })
        ));
        assert!(MicroGraphEncoding::parse("(0,1,4;1,6,5)", 3).is_err());
    }

    #[test]
    fn descendant_counts() {
        let s2 = preset("sunflower2d").unwrap();
        let s3 = descendants_of_set(&s2);
        assert_eq!(s3.len(), 48);
        assert_eq!(canonical_classes(&s3).len(), 41);
        assert_eq!(descendants_of_set(&s3).len(), 324);
        let e = enc("(0,1,4;1,6,5;4,5,6)");
        assert!(e.descendants().contains(&enc("(0,1,4,7;1,6,5,8;4,8,6,9)")));
    }

    #[test]
    fn five_d_families() {
        let all = enumerate_5d_sunflower();
        assert_eq!(all.len(), 1280);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 1280);
        for e in &all {
            assert_eq!(*e, MicroGraphEncoding::new(5, e.targets.clone()).unwrap());
        }
    }

    #[test]
    fn zero_by_symmetry() {
        assert!(enc("(0,5,4;4,3,5;4,5,6)").is_zero_by_symmetry());
        assert!(enc("(0,5,4;4,6,5;4,5,6)").is_zero_by_symmetry());
        assert!(!enc("(0,1,4;1,6,5;4,5,6)").is_zero_by_symmetry());
        let van = preset("vanishing3d").unwrap();
        let zeros: Vec<usize> = (0..13).filter(|&i| van[i].is_zero_by_symmetry()).collect();
        assert_eq!(zeros, vec![11, 12]);
    }

    #[test]
    fn isomorphic_pair() {
        let a = enc("(0,1,4;1,6,5;4,5,6)").canonicalize();
        let b = enc("(0,1,4;4,6,5;1,5,6)").canonicalize();
        assert_eq!(a.encoding, b.encoding);
    }

    #[test]
    fn swapping_targets_flips_sign() {
        let a = enc("(0,1,4;1,6,5;4,5,6)");
        let b = MicroGraphEncoding::unchecked(3, [vec![1, 0, 4], vec![1, 6, 5], vec![4, 5, 6]]).unwrap();
        let (ca, cb) = (a.canonicalize(), b.canonicalize());
        assert_eq!(ca.encoding, cb.encoding);
        assert_eq!(ca.sign, -cb.sign);
        assert_eq!(ca.encoding.canonicalize().encoding, ca.encoding);
    }

    #[test]
    fn casimir_swap() {
        let e = enc("(0,1,4,7;1,6,5,8;4,8,6,9)");
        let s = e.swap_casimirs();
        assert_eq!(s.to_string(), "(0,1,7,4;1,9,8,5;7,5,9,6)");
        assert_eq!(s.swap_casimirs(), e);
        let n = s.normalize_tails();
        assert_eq!(n.sign, -1);
        assert_eq!(n.encoding.to_string(), "(0,1,4,7;1,9,5,8;7,5,6,9)");
    }

    #[test]
    fn preset_sizes() {
        for name in PRESET_NAMES {
            let list = preset(name).unwrap();
            assert!(!list.is_empty(), "{name}");
            assert_eq!(list[0].dim(), preset_dim(name).unwrap());
        }
    }
}

#[cfg(test)]
mod table_tests {
    use super::*;

    fn set_desc(names: &[&str]) -> Vec<MicroGraphEncoding> {
        let mut all = Vec::new();
        for n in names {
            all.extend(preset(n).unwrap());
        }
        descendants_of_set(&all)
    }

    #[test]
    fn five_d_descendants_match_enumeration() {
        let s4 = descendants_of_set(&preset("sunflower3d_full").unwrap());
        let s5 = descendants_of_set(&s4);
        assert_eq!(s5.len(), 1280);
        let a: HashSet<_> = s5.into_iter().collect();
        let b: HashSet<_> = enumerate_5d_sunflower().into_iter().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn row_counts() {
        for (names, n) in [
            (&["sol1_3d"][..], 42),
            (&["sol2_3d"], 46),
            (&["sol3_3d"], 58),
            (&["vanishing3d"], 118),
            (&["sol1_3d", "vanishing3d"], 160),
            (&["sol2_3d", "vanishing3d"], 164),
            (&["sol3_3d", "vanishing3d"], 176),
            (&["projected_3d", "vanishing3d"], 176),
            (&["basis20_3d"], 92),
            (&["basis20_3d", "vanishing3d"], 210),
        ] {
            assert_eq!(set_desc(names).len(), n, "{names:?}");
        }
        let as_set = |v: Vec<MicroGraphEncoding>| v.into_iter().collect::<HashSet<_>>();
        assert_eq!(as_set(set_desc(&["vanishing3d"])), as_set(preset("a8_set_4d").unwrap()));
        assert_eq!(as_set(set_desc(&["basis20_3d"])), as_set(preset("a5_set_4d").unwrap()));
        assert_eq!(
            as_set(set_desc(&["basis20_3d", "vanishing3d"])),
            as_set(preset("a7_set_4d").unwrap())
        );
        assert_eq!(
            as_set(set_desc(&["sol1_3d", "vanishing3d"])),
            as_set(preset("a1_set_4d").unwrap())
        );
        let s17 = as_set(set_desc(&["seventeen_3d"]));
        assert!(as_set(preset("a6_set_4d").unwrap()).is_subset(&s17));
    }
}
