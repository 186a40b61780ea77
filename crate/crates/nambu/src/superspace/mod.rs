//! Superfunctions: polynomials in the odd generators ξ₀…ξ_{d−1} with
//! differential-polynomial coefficients. Multivectors live here, together
//! with the Schouten bracket and the Nambu–Poisson bi-vector.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::exactalg::{AlgError, DiffPolynomial, Rational, RingSignature};

/// Subset of odd generators as a bitmask. Ordered by cardinality, then
/// lexicographically on the increasing index list.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct XiSet(pub u8);

impl XiSet {
    pub const EMPTY: XiSet = XiSet(0);

    pub fn from_indices(idx: &[usize]) -> XiSet {
        let mut m = 0u8;
        for &i in idx {
            assert!(m & (1 << i) == 0, "repeated odd index");
            m |= 1 << i;
        }
        XiSet(m)
    }

    pub fn full(d: usize) -> XiSet {
        XiSet(((1u16 << d) - 1) as u8)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn indices(self) -> Vec<usize> {
        (0..8).filter(|&i| self.contains(i)).collect()
    }

    fn below(self, i: usize) -> u32 {
        (self.0 & ((1u16 << i) - 1) as u8).count_ones()
    }

    fn above(self, i: usize) -> u32 {
        (self.0 as u16 >> (i + 1)).count_ones()
    }
}

impl Ord for XiSet {
    fn cmp(&self, o: &Self) -> Ordering {
        self.len().cmp(&o.len()).then_with(|| self.indices().cmp(&o.indices()))
    }
}

impl PartialOrd for XiSet {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for XiSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", s.join(","))
    }
}

/// Sign of `ξ_A · ξ_B` after sorting, or `None` if they overlap.
fn product_sign(a: XiSet, b: XiSet) -> Option<bool> {
    if a.0 & b.0 != 0 {
        return None;
    }
    let mut inv = 0;
    for j in b.indices() {
        inv += a.above(j);
    }
    Some(inv % 2 == 1)
}

#[derive(Clone)]
pub struct Superfunction {
    sig: Arc<RingSignature>,
    comps: BTreeMap<XiSet, DiffPolynomial>,
}

impl PartialEq for Superfunction {
    fn eq(&self, o: &Self) -> bool {
        self.sig.same_as(&o.sig) && self.comps == o.comps
    }
}
impl Eq for Superfunction {}

impl Superfunction {
    pub fn zero(sig: &Arc<RingSignature>) -> Self {
        Superfunction {
            sig: sig.clone(),
            comps: BTreeMap::new(),
        }
    }

    pub fn function(p: DiffPolynomial) -> Self {
        Self::monomial(XiSet::EMPTY, p)
    }

    pub fn monomial(set: XiSet, p: DiffPolynomial) -> Self {
        let mut s = Self::zero(p.signature());
        s.set(set, p);
        s
    }

    /// The odd generator ξᵢ.
    pub fn xi(sig: &Arc<RingSignature>, i: usize) -> Self {
        Self::monomial(
            XiSet::from_indices(&[i]),
            DiffPolynomial::constant(sig, Rational::one()),
        )
    }

    /// ξ₀ξ₁…ξ_{d−1}.
    pub fn epsilon(sig: &Arc<RingSignature>) -> Self {
        Self::monomial(XiSet::full(sig.dim()), DiffPolynomial::constant(sig, Rational::one()))
    }

    pub fn signature(&self) -> &Arc<RingSignature> {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    pub fn set(&mut self, set: XiSet, p: DiffPolynomial) {
        assert!(self.sig.same_as(p.signature()), "signature mismatch");
        assert!((set.0 as u16) < (1 << self.dim()), "odd index out of range");
        if p.is_zero() {
            self.comps.remove(&set);
        } else {
            self.comps.insert(set, p);
        }
    }

    pub fn component(&self, set: XiSet) -> Option<&DiffPolynomial> {
        self.comps.get(&set)
    }

    /// Coefficient of `set`, zero if absent.
    pub fn coeff(&self, set: XiSet) -> DiffPolynomial {
        self.comps
            .get(&set)
            .cloned()
            .unwrap_or_else(|| DiffPolynomial::zero(&self.sig))
    }

    pub fn components(&self) -> impl Iterator<Item = (XiSet, &DiffPolynomial)> {
        self.comps.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.comps.values().map(|p| p.len()).sum()
    }

    /// Common ξ-degree of all components; `None` for zero or mixed degree.
    pub fn degree(&self) -> Option<usize> {
        let mut it = self.comps.keys().map(|k| k.len());
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    fn assert_sig(&self, o: &Superfunction) {
        assert!(self.sig.same_as(&o.sig), "signature mismatch");
    }

    pub fn add_scaled(&self, o: &Superfunction, c: &Rational) -> Superfunction {
        self.assert_sig(o);
        let mut out = self.clone();
        for (k, p) in &o.comps {
            let np = match out.comps.get(k) {
                Some(q) => q.add_scaled(p, c),
                None => p.scale(c),
            };
            out.set(*k, np);
        }
        out
    }

    pub fn add(&self, o: &Superfunction) -> Superfunction {
        self.add_scaled(o, &Rational::one())
    }

    pub fn sub(&self, o: &Superfunction) -> Superfunction {
        self.add_scaled(o, &-Rational::one())
    }

    pub fn neg(&self) -> Superfunction {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, c: &Rational) -> Superfunction {
        let mut out = Self::zero(&self.sig);
        for (k, p) in &self.comps {
            out.set(*k, p.scale(c));
        }
        out
    }

    /// Multiply every component by an even function.
    pub fn mul_function(&self, f: &DiffPolynomial) -> Superfunction {
        let mut out = Self::zero(&self.sig);
        for (k, p) in &self.comps {
            out.set(*k, p.mul(f));
        }
        out
    }

    /// Grassmann product with Koszul signs from sorting the odd indices.
    pub fn mul(&self, o: &Superfunction) -> Superfunction {
        self.assert_sig(o);
        let mut acc: BTreeMap<XiSet, DiffPolynomial> = BTreeMap::new();
        for (a, p) in &self.comps {
            for (b, q) in &o.comps {
                let Some(neg) = product_sign(*a, *b) else { continue };
                let mut pq = p.mul(q);
                if neg {
                    pq = pq.neg();
                }
                let key = XiSet(a.0 | b.0);
                let e = acc.entry(key).or_insert_with(|| DiffPolynomial::zero(&self.sig));
                *e = e.add(&pq);
            }
        }
        let mut out = Self::zero(&self.sig);
        for (k, p) in acc {
            out.set(k, p);
        }
        out
    }

    /// Left derivative ∂/∂ξᵢ.
    pub fn odd_derivative(&self, i: usize) -> Superfunction {
        self.odd_derivative_with(i, |s| s.below(i))
    }

    /// Right derivative: removes ξᵢ from the right end.
    pub fn right_odd_derivative(&self, i: usize) -> Superfunction {
        self.odd_derivative_with(i, |s| s.above(i))
    }

    fn odd_derivative_with(&self, i: usize, passes: impl Fn(XiSet) -> u32) -> Superfunction {
        assert!(i < self.dim());
        let mut out = Self::zero(&self.sig);
        for (k, p) in &self.comps {
            if !k.contains(i) {
                continue;
            }
            let np = if passes(*k) % 2 == 1 { p.neg() } else { p.clone() };
            out.set(XiSet(k.0 & !(1 << i)), np);
        }
        out
    }

    /// Componentwise total derivative in the base coordinate `i`.
    pub fn total_derivative(&self, i: usize) -> Result<Superfunction, AlgError> {
        let mut out = Self::zero(&self.sig);
        for (k, p) in &self.comps {
            out.set(*k, p.total_derivative(i)?);
        }
        Ok(out)
    }

    /// Schouten bracket
    /// `[[f,g]] = Σᵢ (f ∂⃖/∂ξᵢ)(∂g/∂xᵢ) − (∂f/∂xᵢ)(∂⃗/∂ξᵢ g)`.
    ///
    /// Satisfies `[[f,g]] = −(−1)^{(|f|−1)(|g|−1)} [[g,f]]` and the graded
    /// Jacobi identity for homogeneous arguments.
    pub fn schouten(&self, g: &Superfunction) -> Result<Superfunction, AlgError> {
        self.assert_sig(g);
        let mut out = Self::zero(&self.sig);
        for i in 0..self.dim() {
            let fr = self.right_odd_derivative(i);
            if !fr.is_zero() && !g.is_zero() {
                out = out.add(&fr.mul(&g.total_derivative(i)?));
            }
            let gl = g.odd_derivative(i);
            if !gl.is_zero() && !self.is_zero() {
                out = out.sub(&self.total_derivative(i)?.mul(&gl));
            }
        }
        Ok(out)
    }

    /// Apply a coefficient map to every component.
    pub fn map_coeffs(
        &self,
        sig: &Arc<RingSignature>,
        mut f: impl FnMut(&DiffPolynomial) -> Result<DiffPolynomial, AlgError>,
    ) -> Result<Superfunction, AlgError> {
        let mut out = Self::zero(sig);
        for (k, p) in &self.comps {
            out.set(*k, f(p)?);
        }
        Ok(out)
    }

    /// Restriction to d−1 dimensions: substitute the last Casimir by the last
    /// coordinate, drop every component containing the last ξ, and move the
    /// coefficients into the smaller ring.
    pub fn project(&self, lower: &Arc<RingSignature>) -> Result<Superfunction, AlgError> {
        let d = self.dim();
        assert!(d >= 3 && lower.dim() == d - 1);
        let casimir = d - 2;
        let mut out = Self::zero(lower);
        for (k, p) in &self.comps {
            if k.contains(d - 1) {
                continue;
            }
            let q = p
                .substitute_casimir_with_coordinate(casimir, d - 1)
                .restrict_to(lower)?;
            out.set(*k, q);
        }
        Ok(out)
    }

    /// One line per component: `[i,j]: <polynomial>`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, p) in &self.comps {
            s.push_str(&format!("{k}: {}\n", p.render()));
        }
        s
    }

    pub fn parse(sig: &Arc<RingSignature>, text: &str) -> Result<Superfunction, AlgError> {
        let mut out = Self::zero(sig);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (head, body) = line.split_once(": ").ok_or_else(|| AlgError::Parse(line.to_string()))?;
            let inner = head
                .trim()
                .strip_prefix('[')
                .and_then(|h| h.strip_suffix(']'))
                .ok_or_else(|| AlgError::Parse(head.to_string()))?;
            let idx: Vec<usize> = if inner.is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| AlgError::Parse(head.to_string()))?
            };
            if idx.iter().any(|&i| i >= sig.dim()) || idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(AlgError::Parse(head.to_string()));
            }
            let p = DiffPolynomial::parse(sig, body)?;
            let key = XiSet::from_indices(&idx);
            let merged = out.coeff(key).add(&p);
            out.set(key, merged);
        }
        Ok(out)
    }
}

impl fmt::Debug for Superfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        f.write_str(&self.render())
    }
}

/// Global sign of the Nambu bi-vector, fixed so that d = 2 gives `+ρ ξ₀ξ₁`
/// and each d-dimensional bracket restricts to the (d−1)-dimensional one.
pub fn nambu_sign(d: usize) -> i64 {
    match d {
        2 | 3 => 1,
        4 | 5 => -1,
        _ => panic!("dimension {d} out of range"),
    }
}

/// `σ_d · [[…[[ε, a¹]]…, a^{d−2}]]` without the ρ factor.
pub fn nambu_without_rho(sig: &Arc<RingSignature>) -> Result<Superfunction, AlgError> {
    nambu_build(sig, Superfunction::epsilon(sig), None)
}

/// The Nambu–Poisson bi-vector `P = σ_d [[…[[ρ·ε, a¹]]…, a^{d−2}]]`.
pub fn nambu_p(sig: &Arc<RingSignature>) -> Result<Superfunction, AlgError> {
    let rho = DiffPolynomial::fibre(sig, 0);
    nambu_build(sig, Superfunction::epsilon(sig).mul_function(&rho), None)
}

/// Nambu build with the k-th Casimir (1-based) replaced by `f`.
pub fn nambu_build(
    sig: &Arc<RingSignature>,
    start: Superfunction,
    replace: Option<(usize, &DiffPolynomial)>,
) -> Result<Superfunction, AlgError> {
    let d = sig.dim();
    let mut acc = start;
    for k in 1..=d - 2 {
        let a = match replace {
            Some((r, f)) if r == k => f.clone(),
            _ => DiffPolynomial::fibre(sig, k),
        };
        acc = acc.schouten(&Superfunction::function(a))?;
    }
    Ok(acc.scale(&Rational::from_int(nambu_sign(d))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(d: usize) -> Arc<RingSignature> {
        RingSignature::standard(d)
    }

    #[test]
    fn anticommutation_and_nilpotence() {
        let sig = s(3);
        let (x0, x1) = (Superfunction::xi(&sig, 0), Superfunction::xi(&sig, 1));
        let x01 = Superfunction::monomial(
            XiSet::from_indices(&[0, 1]),
            DiffPolynomial::constant(&sig, Rational::one()),
        );
        assert_eq!(x0.mul(&x1), x01);
        assert_eq!(x1.mul(&x0), x01.neg());
        assert!(x0.mul(&x0).is_zero());
    }

    #[test]
    fn odd_derivative_signs() {
        let sig = s(3);
        let one = DiffPolynomial::constant(&sig, Rational::one());
        let x01 = Superfunction::monomial(XiSet::from_indices(&[0, 1]), one.clone());
        assert_eq!(x01.odd_derivative(0), Superfunction::xi(&sig, 1));
        assert_eq!(x01.odd_derivative(1), Superfunction::xi(&sig, 0).neg());
        assert!(x01.odd_derivative(2).is_zero());
        assert_eq!(x01.right_odd_derivative(1), Superfunction::xi(&sig, 0));
    }

    #[test]
    fn canonical_pairing() {
        let sig = s(2);
        let x = Superfunction::function(DiffPolynomial::base(&sig, 0));
        let b = Superfunction::xi(&sig, 0).schouten(&x).unwrap();
        assert_eq!(
            b,
            Superfunction::function(DiffPolynomial::constant(&sig, Rational::one()))
        );
    }

    #[test]
    fn nambu_low_dimensions() {
        let sig = s(2);
        let p = nambu_p(&sig).unwrap();
        let rho = DiffPolynomial::fibre(&sig, 0);
        assert_eq!(p, Superfunction::epsilon(&sig).mul_function(&rho));
        let sig = s(3);
        let p = nambu_p(&sig).unwrap();
        let want = DiffPolynomial::parse(&sig, "1 * rho * a1_z").unwrap();
        assert_eq!(p.coeff(XiSet::from_indices(&[0, 1])), want);
    }

    #[test]
    fn nambu_projects_down() {
        for d in 3..=5 {
            let p = nambu_p(&s(d)).unwrap();
            assert_eq!(p.project(&s(d - 1)).unwrap(), nambu_p(&s(d - 1)).unwrap(), "d = {d}");
        }
    }

    #[test]
    fn render_parse_roundtrip() {
        let p = nambu_p(&s(4)).unwrap();
        assert_eq!(Superfunction::parse(&s(4), &p.render()).unwrap(), p);
    }
}
