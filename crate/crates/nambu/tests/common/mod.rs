//! Random instances shared by the property and acceptance targets.

#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use nambu::exactalg::{DiffPolynomial, Monomial, Rational, RingSignature, VarId};
use nambu::superspace::{Superfunction, XiSet};

pub const D: usize = 3;

pub fn sig() -> Arc<RingSignature> {
    RingSignature::standard(D)
}

/// Base coordinates and jets of order ≤ 1, so that nested brackets stay
/// well inside the truncation orders.
fn var_pool() -> Vec<VarId> {
    let s = sig();
    let mut out: Vec<VarId> = (0..D as VarId).collect();
    for f in 0..s.n_fibres() {
        out.push(s.jet_from_indices(f, &[]).unwrap());
        for i in 0..D {
            out.push(s.jet_from_indices(f, &[i]).unwrap());
        }
    }
    out
}

pub fn poly() -> impl Strategy<Value = DiffPolynomial> {
    let n = var_pool().len();
    prop::collection::vec((-3i64..=3, prop::collection::vec(0..n, 0..3)), 1..5).prop_map(|terms| {
        let pool = var_pool();
        DiffPolynomial::from_terms(
            &sig(),
            terms.into_iter().map(|(c, vs)| {
                let m = vs.iter().fold(Monomial::one(), |m, &v| m.mul(&Monomial::var(pool[v])));
                (m, Rational::from_int(c))
            }),
        )
    })
}

fn subsets(k: usize) -> Vec<XiSet> {
    (0u32..1 << D)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| XiSet::from_indices(&(0..D).filter(|i| s >> i & 1 == 1).collect::<Vec<_>>()))
        .collect()
}

/// Homogeneous superfunction of degree `k`.
pub fn superfn(k: usize) -> impl Strategy<Value = Superfunction> {
    let sets = subsets(k);
    prop::collection::vec(poly(), sets.len()).prop_map(move |ps| {
        let mut out = Superfunction::zero(&sig());
        for (s, p) in sets.iter().zip(ps) {
            out.set(*s, p);
        }
        out
    })
}

pub fn graded() -> impl Strategy<Value = (usize, Superfunction)> {
    (0..=D).prop_flat_map(|k| superfn(k).prop_map(move |f| (k, f)))
}

pub fn sign(e: usize) -> Rational {
    Rational::from_int(if e.is_multiple_of(2) { 1 } else { -1 })
}

/// Ring axioms, the derivation law, graded antisymmetry and graded Jacobi of
/// the Schouten bracket, and odd-derivative nilpotence on `cases` random
/// instances each.
pub fn algebra_laws(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(poly(), poly(), poly(), 0..D), |(a, b, c, i)| {
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            let lhs = a
                .mul(&b)
                .total_derivative(i)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let rhs = a
                .total_derivative(i)
                .unwrap()
                .mul(&b)
                .add(&a.mul(&b.total_derivative(i).unwrap()));
            prop_assert_eq!(lhs, rhs);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    runner
        .run(&(graded(), graded(), graded(), 0..D), |((p, f), (q, g), (_, h), i)| {
            let s = sign((p + 1) * (q + 1));
            prop_assert_eq!(f.schouten(&g).unwrap(), g.schouten(&f).unwrap().scale(&s).neg());
            let lhs = f.schouten(&g.schouten(&h).unwrap()).unwrap();
            let x = f.schouten(&g).unwrap().schouten(&h).unwrap();
            let y = g.schouten(&f.schouten(&h).unwrap()).unwrap().scale(&s);
            prop_assert_eq!(lhs, x.add(&y));
            prop_assert!(f.odd_derivative(i).odd_derivative(i).is_zero());
            Ok(())
        })
        .map_err(|e| e.to_string())
}
