use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::ring::{RingSignature, VarId};
use super::{AlgError, Rational};

/// Power product of ring variables. Factors are packed as `var << 8 | exp`
/// and kept sorted by variable id.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    deg: u16,
    f: SmallVec<[u32; 6]>,
}

#[inline]
fn pack(v: VarId, e: u8) -> u32 {
    (v as u32) << 8 | e as u32
}

#[inline]
fn unpack(p: u32) -> (VarId, u8) {
    ((p >> 8) as VarId, (p & 0xff) as u8)
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(v: VarId) -> Self {
        Self::var_pow(v, 1)
    }

    pub fn var_pow(v: VarId, e: u8) -> Self {
        if e == 0 {
            return Self::one();
        }
        let mut f = SmallVec::new();
        f.push(pack(v, e));
        Monomial { deg: e as u16, f }
    }

    /// Build from `(var, exp)` pairs in any order, merging repeats.
    pub fn from_factors(it: impl IntoIterator<Item = (VarId, u8)>) -> Self {
        let mut f: SmallVec<[u32; 6]> = it
            .into_iter()
            .filter(|&(_, e)| e > 0)
            .map(|(v, e)| pack(v, e))
            .collect();
        f.sort_unstable();
        let mut out: SmallVec<[u32; 6]> = SmallVec::new();
        for p in f {
            let (v, e) = unpack(p);
            match out.last_mut() {
                Some(last) if unpack(*last).0 == v => {
                    let (_, e0) = unpack(*last);
                    *last = pack(v, e0 + e);
                }
                _ => out.push(p),
            }
        }
        let deg = out.iter().map(|&p| unpack(p).1 as u16).sum();
        Monomial { deg, f: out }
    }

    pub fn degree(&self) -> u16 {
        self.deg
    }

    pub fn is_one(&self) -> bool {
        self.f.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (VarId, u8)> + '_ {
        self.f.iter().map(|&p| unpack(p))
    }

    pub fn exponent(&self, v: VarId) -> u8 {
        self.factors().find(|&(w, _)| w == v).map_or(0, |(_, e)| e)
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let mut f = SmallVec::with_capacity(self.f.len() + o.f.len());
        let (mut i, mut j) = (0, 0);
        while i < self.f.len() && j < o.f.len() {
            let (a, ea) = unpack(self.f[i]);
            let (b, eb) = unpack(o.f[j]);
            match a.cmp(&b) {
                Ordering::Less => {
                    f.push(self.f[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    f.push(o.f[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    f.push(pack(a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        f.extend_from_slice(&self.f[i..]);
        f.extend_from_slice(&o.f[j..]);
        Monomial {
            deg: self.deg + o.deg,
            f,
        }
    }

    /// `self / o` when `o` divides `self`.
    pub fn div(&self, o: &Monomial) -> Option<Monomial> {
        let mut f = SmallVec::new();
        let mut j = 0;
        for &p in &self.f {
            let (a, ea) = unpack(p);
            if j < o.f.len() {
                let (b, eb) = unpack(o.f[j]);
                if b < a {
                    return None;
                }
                if b == a {
                    j += 1;
                    match ea.cmp(&eb) {
                        Ordering::Less => return None,
                        Ordering::Equal => continue,
                        Ordering::Greater => {
                            f.push(pack(a, ea - eb));
                            continue;
                        }
                    }
                }
            }
            f.push(p);
        }
        if j < o.f.len() {
            return None;
        }
        Some(Monomial {
            deg: self.deg - o.deg,
            f,
        })
    }

    /// Remove one power of factor at position `k`, returning its exponent before removal.
    fn lower_at(&self, k: usize) -> (Monomial, u8) {
        let (v, e) = unpack(self.f[k]);
        let mut f = self.f.clone();
        if e == 1 {
            f.remove(k);
        } else {
            f[k] = pack(v, e - 1);
        }
        (Monomial { deg: self.deg - 1, f }, e)
    }

    pub fn render(&self, sig: &RingSignature) -> String {
        if self.is_one() {
            return "1".to_string();
        }
        let parts: Vec<String> = self
            .factors()
            .map(|(v, e)| {
                if e == 1 {
                    sig.var_name(v)
                } else {
                    format!("{}^{}", sig.var_name(v), e)
                }
            })
            .collect();
        parts.join(" * ")
    }
}

/// Graded lexicographic order: total degree first, then the exponent of the
/// earliest variable (base coordinates before jets) decides.
impl Ord for Monomial {
    fn cmp(&self, o: &Self) -> Ordering {
        self.deg.cmp(&o.deg).then_with(|| {
            for (&p, &q) in self.f.iter().zip(o.f.iter()) {
                let (a, ea) = unpack(p);
                let (b, eb) = unpack(q);
                if a != b {
                    // smaller id present in self only
                    return if a < b { Ordering::Greater } else { Ordering::Less };
                }
                if ea != eb {
                    return ea.cmp(&eb);
                }
            }
            self.f.len().cmp(&o.f.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.factors().collect::<Vec<_>>())
    }
}

/// Accumulator for building polynomials term by term.
pub type TermMap = FxHashMap<Monomial, Rational>;

pub fn accumulate(map: &mut TermMap, m: Monomial, c: Rational) {
    if c.is_zero() {
        return;
    }
    match map.entry(m) {
        std::collections::hash_map::Entry::Occupied(mut o) => {
            *o.get_mut() += &c;
            if o.get().is_zero() {
                o.remove();
            }
        }
        std::collections::hash_map::Entry::Vacant(v) => {
            v.insert(c);
        }
    }
}

/// Exact polynomial in base coordinates and jet variables.
///
/// Terms are stored sorted by decreasing monomial order with no zero
/// coefficients, so structural equality is mathematical equality.
#[derive(Clone)]
pub struct DiffPolynomial {
    sig: Arc<RingSignature>,
    terms: Vec<(Monomial, Rational)>,
}

impl PartialEq for DiffPolynomial {
    fn eq(&self, o: &Self) -> bool {
        self.sig.same_as(&o.sig) && self.terms == o.terms
    }
}
impl Eq for DiffPolynomial {}

impl DiffPolynomial {
    pub fn zero(sig: &Arc<RingSignature>) -> Self {
        DiffPolynomial {
            sig: sig.clone(),
            terms: Vec::new(),
        }
    }

    pub fn constant(sig: &Arc<RingSignature>, c: Rational) -> Self {
        Self::from_terms(sig, [(Monomial::one(), c)])
    }

    pub fn var(sig: &Arc<RingSignature>, v: VarId) -> Self {
        Self::from_terms(sig, [(Monomial::var(v), Rational::one())])
    }

    /// Base coordinate `i`.
    pub fn base(sig: &Arc<RingSignature>, i: usize) -> Self {
        assert!(i < sig.dim());
        Self::var(sig, i as VarId)
    }

    /// Undifferentiated fibre variable: 0 = ρ, k = a^k.
    pub fn fibre(sig: &Arc<RingSignature>, f: usize) -> Self {
        Self::var(sig, sig.fibre_id(f))
    }

    pub fn from_terms(sig: &Arc<RingSignature>, it: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut map = TermMap::default();
        for (m, c) in it {
            accumulate(&mut map, m, c);
        }
        Self::from_map(sig, map)
    }

    pub fn from_map(sig: &Arc<RingSignature>, map: TermMap) -> Self {
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        DiffPolynomial {
            sig: sig.clone(),
            terms,
        }
    }

    /// Terms must already be canonical: strictly decreasing, no zeros.
    fn from_sorted(sig: &Arc<RingSignature>, terms: Vec<(Monomial, Rational)>) -> Self {
        debug_assert!(terms.windows(2).all(|w| w[0].0 > w[1].0));
        debug_assert!(terms.iter().all(|t| !t.1.is_zero()));
        DiffPolynomial {
            sig: sig.clone(),
            terms,
        }
    }

    pub fn signature(&self) -> &Arc<RingSignature> {
        &self.sig
    }

    pub fn terms(&self) -> &[(Monomial, Rational)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(Monomial, Rational)> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading(&self) -> Option<&(Monomial, Rational)> {
        self.terms.first()
    }

    pub fn check_sig(&self, o: &DiffPolynomial) -> Result<(), AlgError> {
        if self.sig.same_as(&o.sig) {
            Ok(())
        } else {
            Err(AlgError::SignatureMismatch)
        }
    }

    pub fn try_add(&self, o: &DiffPolynomial) -> Result<DiffPolynomial, AlgError> {
        self.check_sig(o)?;
        Ok(self.add_scaled(o, &Rational::one()))
    }

    pub fn try_mul(&self, o: &DiffPolynomial) -> Result<DiffPolynomial, AlgError> {
        self.check_sig(o)?;
        Ok(self.mul(o))
    }

    /// `self + c·o` by merging the two sorted term lists.
    pub fn add_scaled(&self, o: &DiffPolynomial, c: &Rational) -> DiffPolynomial {
        assert!(self.sig.same_as(&o.sig), "signature mismatch");
        if c.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < o.terms.len() {
            let ord = match (self.terms.get(i), o.terms.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => Ordering::Greater,
                _ => Ordering::Less,
            };
            match ord {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    let (m, k) = &o.terms[j];
                    out.push((m.clone(), k * c));
                    j += 1;
                }
                Ordering::Equal => {
                    let s = &self.terms[i].1 + &(&o.terms[j].1 * c);
                    if !s.is_zero() {
                        out.push((self.terms[i].0.clone(), s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Self::from_sorted(&self.sig, out)
    }

    pub fn add(&self, o: &DiffPolynomial) -> DiffPolynomial {
        self.add_scaled(o, &Rational::one())
    }

    pub fn sub(&self, o: &DiffPolynomial) -> DiffPolynomial {
        self.add_scaled(o, &-Rational::one())
    }

    pub fn neg(&self) -> DiffPolynomial {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, c: &Rational) -> DiffPolynomial {
        if c.is_zero() {
            return Self::zero(&self.sig);
        }
        let terms = self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect();
        Self::from_sorted(&self.sig, terms)
    }

    pub fn mul(&self, o: &DiffPolynomial) -> DiffPolynomial {
        assert!(self.sig.same_as(&o.sig), "signature mismatch");
        if self.is_zero() || o.is_zero() {
            return Self::zero(&self.sig);
        }
        if o.terms.len() == 1 {
            return self.mul_term(&o.terms[0].0, &o.terms[0].1);
        }
        if self.terms.len() == 1 {
            return o.mul_term(&self.terms[0].0, &self.terms[0].1);
        }
        let mut map = TermMap::default();
        map.reserve(self.terms.len() * o.terms.len());
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                accumulate(&mut map, a.mul(b), ca * cb);
            }
        }
        Self::from_map(&self.sig, map)
    }

    /// Multiplication by a single term keeps the order, so no re-sort.
    pub fn mul_term(&self, m: &Monomial, c: &Rational) -> DiffPolynomial {
        if c.is_zero() {
            return Self::zero(&self.sig);
        }
        let terms = self.terms.iter().map(|(a, k)| (a.mul(m), k * c)).collect();
        Self::from_sorted(&self.sig, terms)
    }

    /// Total derivative `D_{x_i}`: Leibniz rule, `D_i x_j = δ_ij`, `D_i f_μ = f_{μ+i}`.
    pub fn total_derivative(&self, i: usize) -> Result<DiffPolynomial, AlgError> {
        let mut map = TermMap::default();
        self.total_derivative_into(i, &Rational::one(), &mut map)?;
        Ok(Self::from_map(&self.sig, map))
    }

    /// Adds `c · D_i(self)` into `map`.
    pub fn total_derivative_into(&self, i: usize, c: &Rational, map: &mut TermMap) -> Result<(), AlgError> {
        assert!(i < self.sig.dim());
        for (m, k) in &self.terms {
            for pos in 0..m.f.len() {
                let (v, _) = unpack(m.f[pos]);
                if self.sig.is_base(v) {
                    if v as usize != i {
                        continue;
                    }
                    let (rest, e) = m.lower_at(pos);
                    accumulate(map, rest, &(k * c) * &Rational::from_int(e as i64));
                } else {
                    let nv = self.sig.derive_jet(v, i)?;
                    let (rest, e) = m.lower_at(pos);
                    let nm = rest.mul(&Monomial::var(nv));
                    accumulate(map, nm, &(k * c) * &Rational::from_int(e as i64));
                }
            }
        }
        Ok(())
    }

    /// Replace the last Casimir by the last coordinate: `a ↦ v`, `a_v ↦ 1`,
    /// other jets of `a` and every jet of another fibre carrying a
    /// `v`-derivative ↦ 0. Base factors of `v` are kept.
    pub fn substitute_casimir_with_coordinate(&self, casimir: usize, coord: usize) -> DiffPolynomial {
        let sig = &self.sig;
        let mut map = TermMap::default();
        'term: for (m, k) in &self.terms {
            let mut fac: Vec<(VarId, u8)> = Vec::with_capacity(m.f.len());
            for (v, e) in m.factors() {
                match sig.jet(v) {
                    None => fac.push((v, e)),
                    Some(j) if j.fibre as usize == casimir => match j.order() {
                        0 => fac.push((coord as VarId, e)),
                        1 if j.mu[coord] == 1 => {}
                        _ => continue 'term,
                    },
                    Some(j) => {
                        if j.mu[coord] > 0 {
                            continue 'term;
                        }
                        fac.push((v, e));
                    }
                }
            }
            accumulate(&mut map, Monomial::from_factors(fac), k.clone());
        }
        Self::from_map(sig, map)
    }

    /// Re-express in a smaller signature, matching jets by (fibre, multiindex).
    /// Fails if a variable has no counterpart there.
    pub fn restrict_to(&self, target: &Arc<RingSignature>) -> Result<DiffPolynomial, AlgError> {
        let mut map = TermMap::default();
        for (m, k) in &self.terms {
            let mut fac = Vec::with_capacity(m.f.len());
            for (v, e) in m.factors() {
                let nv = match self.sig.jet(v) {
                    None if (v as usize) < target.dim() => v,
                    None => return Err(AlgError::NotRepresentable(self.sig.var_name(v))),
                    Some(j) => {
                        if j.fibre as usize >= target.n_fibres() || j.mu[target.dim()..].iter().any(|&x| x > 0) {
                            return Err(AlgError::NotRepresentable(self.sig.var_name(v)));
                        }
                        target.jet_id(j)?
                    }
                };
                fac.push((nv, e));
            }
            accumulate(&mut map, Monomial::from_factors(fac), k.clone());
        }
        Ok(Self::from_map(target, map))
    }

    /// Exact quotient `f / g` by multivariate division in the grlex order.
    /// The identity `f == q·g` is checked before returning.
    pub fn exact_divide(&self, g: &DiffPolynomial) -> Result<DiffPolynomial, AlgError> {
        self.check_sig(g)?;
        let (lm, lc) = g.leading().cloned().ok_or(AlgError::DivisionByZero)?;
        let lc_inv = lc.recip();
        let mut rem: BTreeMap<Monomial, Rational> = self.terms.iter().cloned().collect();
        let mut q = Vec::new();
        while let Some((m, c)) = rem.pop_last() {
            let Some(qm) = m.div(&lm) else {
                return Err(AlgError::NotDivisible);
            };
            let qc = &c * &lc_inv;
            for (gm, gc) in &g.terms[1..] {
                let t = qm.mul(gm);
                let delta = -(&qc * gc);
                match rem.entry(t) {
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        *o.get_mut() += &delta;
                        if o.get().is_zero() {
                            o.remove();
                        }
                    }
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(delta);
                    }
                }
            }
            q.push((qm, qc));
        }
        let q = Self::from_sorted(&self.sig, q);
        if &q.mul(g) != self {
            return Err(AlgError::NotDivisible);
        }
        Ok(q)
    }

    /// Variables appearing anywhere in the polynomial.
    pub fn variables(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.terms.iter().flat_map(|(m, _)| m.factors().map(|f| f.0)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Canonical text: `coeff * var^e * var` terms joined by ` + `.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (n, (m, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                s.push_str(" + ");
            }
            s.push_str(&c.to_string());
            if !m.is_one() {
                s.push_str(" * ");
                s.push_str(&m.render(&self.sig));
            }
        }
        s
    }

    /// Inverse of [`render`](Self::render).
    pub fn parse(sig: &Arc<RingSignature>, text: &str) -> Result<DiffPolynomial, AlgError> {
        let text = text.trim();
        if text == "0" {
            return Ok(Self::zero(sig));
        }
        let mut map = TermMap::default();
        for term in text.split(" + ") {
            let mut parts = term.split(" * ");
            let c: Rational = parts
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| AlgError::Parse(term.to_string()))?;
            let mut fac = Vec::new();
            for p in parts {
                let (name, e) = match p.trim().split_once('^') {
                    Some((n, e)) => (n, e.parse::<u8>().map_err(|_| AlgError::Parse(p.to_string()))?),
                    None => (p.trim(), 1),
                };
                let v = sig.parse_var(name).ok_or_else(|| AlgError::Parse(name.to_string()))?;
                fac.push((v, e));
            }
            accumulate(&mut map, Monomial::from_factors(fac), c);
        }
        Ok(Self::from_map(sig, map))
    }
}

impl fmt::Display for DiffPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for DiffPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
