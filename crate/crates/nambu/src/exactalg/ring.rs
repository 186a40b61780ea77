use std::fmt;
use std::sync::{Arc, OnceLock};

use rustc_hash::FxHashMap;

use super::AlgError;

pub const BASE_NAMES: [&str; 5] = ["x", "y", "z", "w", "v"];
pub const MAX_DIM: usize = 5;

/// Variable id inside a ring: `0..d` are base coordinates, the rest are jets.
pub type VarId = u16;

/// A jet `f_μ` of a fibre variable; `mu[i]` counts derivatives in base var `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JetVariable {
    pub fibre: u8,
    pub mu: [u8; MAX_DIM],
}

impl JetVariable {
    pub fn order(&self) -> usize {
        self.mu.iter().map(|&m| m as usize).sum()
    }
}

/// Dimension, fibre variables (ρ, a¹, …, a^{d−2}) and truncation orders.
///
/// Jets are numbered once per signature so that monomials can use small
/// integer ids and total derivatives become table lookups.
pub struct RingSignature {
    dim: usize,
    max_orders: Vec<usize>,
    jets: Vec<JetVariable>,
    jet_ids: FxHashMap<JetVariable, VarId>,
    // deriv[(jet index)*dim + i] = id of D_i(jet), or u16::MAX past truncation
    deriv: Vec<VarId>,
}

impl RingSignature {
    /// The standard signature: ρ up to order 4, each Casimir up to `d+2`.
    pub fn standard(dim: usize) -> Arc<RingSignature> {
        static CACHE: OnceLock<Vec<Arc<RingSignature>>> = OnceLock::new();
        assert!((2..=MAX_DIM).contains(&dim), "dimension {dim} out of range 2..=5");
        let all = CACHE.get_or_init(|| {
            (2..=MAX_DIM)
                .map(|d| {
                    let mut orders = vec![4];
                    orders.extend(std::iter::repeat_n(d + 2, d - 2));
                    Arc::new(RingSignature::new(d, orders))
                })
                .collect()
        });
        all[dim - 2].clone()
    }

    pub fn new(dim: usize, max_orders: Vec<usize>) -> RingSignature {
        assert!((2..=MAX_DIM).contains(&dim));
        assert_eq!(max_orders.len(), dim - 1, "need ρ plus d−2 Casimirs");
        let mut jets = Vec::new();
        for (f, &maxo) in max_orders.iter().enumerate() {
            for ord in 0..=maxo {
                let mut level = Vec::new();
                multiindices(dim, ord, &mut [0; MAX_DIM], 0, &mut level);
                // graded-lex inside one order: more x's first, then y's, ...
                level.sort_by(|a, b| b.cmp(a));
                jets.extend(level.into_iter().map(|mu| JetVariable { fibre: f as u8, mu }));
            }
        }
        let jet_ids: FxHashMap<_, _> = jets.iter().enumerate().map(|(k, j)| (*j, (dim + k) as VarId)).collect();
        let mut deriv = vec![VarId::MAX; jets.len() * dim];
        for (k, j) in jets.iter().enumerate() {
            for i in 0..dim {
                let mut mu = j.mu;
                mu[i] += 1;
                let nj = JetVariable { fibre: j.fibre, mu };
                if let Some(&id) = jet_ids.get(&nj) {
                    deriv[k * dim + i] = id;
                }
            }
        }
        RingSignature {
            dim,
            max_orders,
            jets,
            jet_ids,
            deriv,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_fibres(&self) -> usize {
        self.max_orders.len()
    }

    pub fn max_order(&self, fibre: usize) -> usize {
        self.max_orders[fibre]
    }

    pub fn max_orders(&self) -> &[usize] {
        &self.max_orders
    }

    pub fn n_vars(&self) -> usize {
        self.dim + self.jets.len()
    }

    pub fn is_base(&self, v: VarId) -> bool {
        (v as usize) < self.dim
    }

    pub fn jet(&self, v: VarId) -> Option<&JetVariable> {
        (v as usize).checked_sub(self.dim).map(|k| &self.jets[k])
    }

    pub fn jet_id(&self, j: &JetVariable) -> Result<VarId, AlgError> {
        self.jet_ids
            .get(j)
            .copied()
            .ok_or_else(|| AlgError::MaxOrderExceeded { var: self.jet_name(j) })
    }

    /// Id of the undifferentiated fibre variable (0 = ρ, k = a^k).
    pub fn fibre_id(&self, fibre: usize) -> VarId {
        self.jet_id(&JetVariable {
            fibre: fibre as u8,
            mu: [0; MAX_DIM],
        })
        .expect("order 0 always present")
    }

    pub fn jet_from_indices(&self, fibre: usize, idx: &[usize]) -> Result<VarId, AlgError> {
        let mut mu = [0u8; MAX_DIM];
        for &i in idx {
            assert!(i < self.dim);
            mu[i] += 1;
        }
        self.jet_id(&JetVariable { fibre: fibre as u8, mu })
    }

    /// `D_i` of a jet id; `Err` past truncation.
    #[inline]
    pub fn derive_jet(&self, v: VarId, i: usize) -> Result<VarId, AlgError> {
        let k = v as usize - self.dim;
        let r = self.deriv[k * self.dim + i];
        if r == VarId::MAX {
            let mut mu = self.jets[k].mu;
            mu[i] += 1;
            return Err(AlgError::MaxOrderExceeded {
                var: self.jet_name(&JetVariable {
                    fibre: self.jets[k].fibre,
                    mu,
                }),
            });
        }
        Ok(r)
    }

    pub fn fibre_name(&self, f: usize) -> String {
        if f == 0 {
            "rho".to_string()
        } else {
            format!("a{f}")
        }
    }

    pub fn jet_name(&self, j: &JetVariable) -> String {
        let mut s = self.fibre_name(j.fibre as usize);
        if j.order() > 0 {
            s.push('_');
            for (i, &m) in j.mu.iter().enumerate() {
                for _ in 0..m {
                    s.push_str(BASE_NAMES[i]);
                }
            }
        }
        s
    }

    pub fn var_name(&self, v: VarId) -> String {
        match self.jet(v) {
            None => BASE_NAMES[v as usize].to_string(),
            Some(j) => self.jet_name(j),
        }
    }

    /// Inverse of [`var_name`](Self::var_name).
    pub fn parse_var(&self, s: &str) -> Option<VarId> {
        if let Some(i) = BASE_NAMES[..self.dim].iter().position(|&b| b == s) {
            return Some(i as VarId);
        }
        let (head, tail) = match s.split_once('_') {
            Some((h, t)) => (h, t),
            None => (s, ""),
        };
        let fibre = if head == "rho" {
            0
        } else {
            head.strip_prefix('a')?.parse::<usize>().ok()?
        };
        if fibre >= self.n_fibres() {
            return None;
        }
        let mut mu = [0u8; MAX_DIM];
        for c in tail.chars() {
            let i = BASE_NAMES[..self.dim].iter().position(|b| b.starts_with(c))?;
            mu[i] += 1;
        }
        self.jet_ids.get(&JetVariable { fibre: fibre as u8, mu }).copied()
    }

    pub fn same_as(&self, other: &RingSignature) -> bool {
        std::ptr::eq(self, other) || (self.dim == other.dim && self.max_orders == other.max_orders)
    }
}

fn multiindices(dim: usize, left: usize, cur: &mut [u8; MAX_DIM], pos: usize, out: &mut Vec<[u8; MAX_DIM]>) {
    if pos == dim - 1 {
        cur[pos] = left as u8;
        out.push(*cur);
        cur[pos] = 0;
        return;
    }
    for k in 0..=left {
        cur[pos] = k as u8;
        multiindices(dim, left - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

impl fmt::Debug for RingSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RingSignature(d={}, orders={:?})", self.dim, self.max_orders)
    }
}
