//! Sparse exact linear algebra over ℚ for formula matrices and the
//! coboundary system.
//!
//! Systems here are tall and narrow: at most a few hundred columns against
//! up to a few hundred thousand monomial rows. Rank, pivots, kernels and
//! solutions are all read off the reduced row echelon form of the row
//! space, which is found from a small set of rows and then certified
//! against every row: the candidate kernel must annihilate the whole
//! matrix, and any row it fails on joins the echelon form. When the check
//! passes, the echelon rows span the full row space.

use std::io::{self, Write};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::exactalg::{DiffPolynomial, Monomial, Rational};
use crate::superspace::Superfunction;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinError {
    #[error("formulas have mixed degrees")]
    MixedDegrees,
    #[error("right-hand side has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
}

/// Row ids for (block, monomial) pairs. For superfunctions the block is the
/// ξ-component; for stacked systems it is the equation block.
#[derive(Clone, Debug, Default)]
pub struct MonomialIndex {
    ids: FxHashMap<(u32, Monomial), u32>,
    keys: Vec<(u32, Monomial)>,
}

impl MonomialIndex {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, block: u32, m: &Monomial) -> Option<usize> {
        self.ids.get(&(block, m.clone())).map(|&r| r as usize)
    }

    pub fn insert(&mut self, block: u32, m: &Monomial) -> usize {
        if let Some(&r) = self.ids.get(&(block, m.clone())) {
            return r as usize;
        }
        let r = self.keys.len() as u32;
        self.ids.insert((block, m.clone()), r);
        self.keys.push((block, m.clone()));
        r as usize
    }

    pub fn key(&self, row: usize) -> &(u32, Monomial) {
        &self.keys[row]
    }

    /// Number of rows per block, in block order.
    pub fn block_sizes(&self) -> Vec<(u32, usize)> {
        let mut counts: std::collections::BTreeMap<u32, usize> = Default::default();
        for (b, _) in &self.keys {
            *counts.entry(*b).or_default() += 1;
        }
        counts.into_iter().collect()
    }
}

/// Column-major sparse matrix; each column sorted by row, no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRationalMatrix {
    n_rows: usize,
    cols: Vec<Vec<(u32, Rational)>>,
}

impl SparseRationalMatrix {
    pub fn from_columns(n_rows: usize, mut cols: Vec<Vec<(u32, Rational)>>) -> Self {
        for c in &mut cols {
            c.retain(|(r, v)| {
                assert!((*r as usize) < n_rows, "row out of range");
                !v.is_zero()
            });
            c.sort_by_key(|e| e.0);
        }
        SparseRationalMatrix { n_rows, cols }
    }

    pub fn from_dense(rows: &[Vec<Rational>]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let cols = (0..n_cols)
            .map(|j| {
                rows.iter()
                    .enumerate()
                    .filter(|(_, r)| !r[j].is_zero())
                    .map(|(i, r)| (i as u32, r[j].clone()))
                    .collect()
            })
            .collect();
        SparseRationalMatrix {
            n_rows: rows.len(),
            cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_columns(n, (0..n).map(|i| vec![(i as u32, Rational::one())]).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn column(&self, j: usize) -> &[(u32, Rational)] {
        &self.cols[j]
    }

    /// The submatrix on the given columns, in the given order.
    pub fn select_columns(&self, js: &[usize]) -> Self {
        SparseRationalMatrix {
            n_rows: self.n_rows,
            cols: js.iter().map(|&j| self.cols[j].clone()).collect(),
        }
    }

    /// Appends a dense column.
    pub fn with_column(&self, b: &[Rational]) -> Self {
        let mut cols = self.cols.clone();
        cols.push(
            b.iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(i, v)| (i as u32, v.clone()))
                .collect(),
        );
        SparseRationalMatrix {
            n_rows: self.n_rows,
            cols,
        }
    }

    pub fn mul_vec(&self, x: &[Rational]) -> Vec<Rational> {
        assert_eq!(x.len(), self.n_cols());
        let mut y = vec![Rational::zero(); self.n_rows];
        for (c, xj) in self.cols.iter().zip(x) {
            if xj.is_zero() {
                continue;
            }
            for (r, v) in c {
                y[*r as usize].add_mul(v, xj);
            }
        }
        y
    }

    fn to_rows(&self) -> Vec<Vec<(u32, Rational)>> {
        let mut rows = vec![Vec::new(); self.n_rows];
        for (j, c) in self.cols.iter().enumerate() {
            for (r, v) in c {
                rows[*r as usize].push((j as u32, v.clone()));
            }
        }
        rows
    }

    /// Triplet export: a `%% rows cols nnz` header, then one
    /// `row col value` line per entry (0-based, values as `n` or `n/d`).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%% {} {} {}", self.n_rows, self.n_cols(), self.nnz())?;
        for (j, c) in self.cols.iter().enumerate() {
            for (r, v) in c {
                writeln!(w, "{r} {j} {v}")?;
            }
        }
        Ok(())
    }
}

/// One column per formula over the union monomial basis, rows grouped by
/// ξ-component in first-seen order.
pub fn build_matrix(formulas: &[Superfunction]) -> Result<(SparseRationalMatrix, MonomialIndex), LinError> {
    let degrees: Vec<usize> = formulas.iter().filter_map(|f| f.degree()).collect();
    if degrees.windows(2).any(|w| w[0] != w[1]) {
        return Err(LinError::MixedDegrees);
    }
    let columns: Vec<Vec<(u32, &DiffPolynomial)>> = formulas
        .iter()
        .map(|f| f.components().map(|(k, p)| (k.0 as u32, p)).collect())
        .collect();
    Ok(build_from_blocks(&columns))
}

/// Stacks several polynomial equations per column: `columns[j]` lists the
/// (block, polynomial) pieces of column j.
pub fn build_from_blocks(columns: &[Vec<(u32, &DiffPolynomial)>]) -> (SparseRationalMatrix, MonomialIndex) {
    let mut index = MonomialIndex::default();
    let mut cols = Vec::with_capacity(columns.len());
    for col in columns {
        let mut entries = Vec::new();
        for (block, p) in col {
            for (m, c) in p.terms() {
                entries.push((index.insert(*block, m) as u32, c.clone()));
            }
        }
        cols.push(entries);
    }
    let n = index.len();
    (SparseRationalMatrix::from_columns(n, cols), index)
}

/// Dense right-hand side over an existing index. Monomials missing from the
/// index are returned separately: any of them makes the system inconsistent.
pub fn rhs_vector(index: &MonomialIndex, pieces: &[(u32, &DiffPolynomial)]) -> (Vec<Rational>, usize) {
    let mut b = vec![Rational::zero(); index.len()];
    let mut missing = 0;
    for (block, p) in pieces {
        for (m, c) in p.terms() {
            match index.get(*block, m) {
                Some(r) => b[r] += c,
                None => missing += 1,
            }
        }
    }
    (b, missing)
}

/// Reduced row echelon form of a row space: rows sorted by pivot column,
/// each with a 1 at its pivot and zeros at every other pivot column.
#[derive(Clone, Debug)]
pub struct RowEchelon {
    n_cols: usize,
    rows: Vec<(usize, Vec<Rational>)>,
}

impl RowEchelon {
    fn new(n_cols: usize) -> Self {
        RowEchelon {
            n_cols,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.0).collect()
    }

    fn reduce(&self, row: &mut [Rational]) {
        for (p, r) in &self.rows {
            if row[*p].is_zero() {
                continue;
            }
            let f = -std::mem::take(&mut row[*p]);
            for (j, v) in r.iter().enumerate().skip(p + 1) {
                if !v.is_zero() {
                    row[j].add_mul(&f, v);
                }
            }
        }
    }

    /// Adds a row to the span; returns whether the rank grew.
    fn insert(&mut self, sparse: &[(u32, Rational)]) -> bool {
        let mut row = vec![Rational::zero(); self.n_cols];
        for (j, v) in sparse {
            row[*j as usize] = v.clone();
        }
        self.reduce(&mut row);
        let Some(p) = row.iter().position(|v| !v.is_zero()) else {
            return false;
        };
        let inv = row[p].recip();
        for v in row.iter_mut().skip(p) {
            if !v.is_zero() {
                *v = &*v * &inv;
            }
        }
        for (_, r) in &mut self.rows {
            if r[p].is_zero() {
                continue;
            }
            let f = -std::mem::take(&mut r[p]);
            for (j, v) in row.iter().enumerate().skip(p + 1) {
                if !v.is_zero() {
                    r[j].add_mul(&f, v);
                }
            }
        }
        let at = self.rows.partition_point(|(q, _)| *q < p);
        self.rows.insert(at, (p, row));
        true
    }

    /// Kernel basis: one vector per free column f, with a 1 at f.
    pub fn kernel(&self) -> Vec<Vec<Rational>> {
        self.kernel_within(self.n_cols)
    }

    // Kernel of the first `n` columns, valid when no pivot lies at or past `n`.
    fn kernel_within(&self, n: usize) -> Vec<Vec<Rational>> {
        let mut is_pivot = vec![false; n];
        for (p, _) in &self.rows {
            if *p < n {
                is_pivot[*p] = true;
            }
        }
        (0..n)
            .filter(|&f| !is_pivot[f])
            .map(|f| {
                let mut k = vec![Rational::zero(); n];
                k[f] = Rational::one();
                for (p, r) in &self.rows {
                    if *p < n {
                        k[*p] = -&r[f];
                    }
                }
                k
            })
            .collect()
    }
}

fn sparse_dot(row: &[(u32, Rational)], k: &[Rational]) -> Rational {
    let mut s = Rational::zero();
    for (j, v) in row {
        let kj = &k[*j as usize];
        if !kj.is_zero() {
            s.add_mul(v, kj);
        }
    }
    s
}

/// Certified reduced row echelon form of the row space of `m`.
pub fn row_echelon(m: &SparseRationalMatrix) -> RowEchelon {
    let n_cols = m.n_cols();
    let rows = m.to_rows();
    let mut ech = RowEchelon::new(n_cols);
    // Seed with the first few rows touching each column, then an even sample.
    let mut seed: Vec<usize> = Vec::new();
    for c in &m.cols {
        seed.extend(c.iter().take(3).map(|e| e.0 as usize));
    }
    let stride = (rows.len() / (2 * n_cols + 1)).max(1);
    seed.extend((0..rows.len()).step_by(stride));
    seed.sort_unstable();
    seed.dedup();
    for &r in &seed {
        if ech.rank() == n_cols {
            break;
        }
        ech.insert(&rows[r]);
    }
    while ech.rank() < n_cols {
        let kernel = ech.kernel();
        // Up to a few violated rows per kernel vector, in row order.
        const PER_VECTOR: usize = 4;
        let violated: Vec<Vec<usize>> = kernel
            .par_iter()
            .map(|k| {
                let mut hits = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    if !sparse_dot(row, k).is_zero() {
                        hits.push(i);
                        if hits.len() == PER_VECTOR {
                            break;
                        }
                    }
                }
                hits
            })
            .collect();
        let mut add: Vec<usize> = violated.into_iter().flatten().collect();
        if add.is_empty() {
            break;
        }
        add.sort_unstable();
        add.dedup();
        for r in add {
            ech.insert(&rows[r]);
        }
    }
    ech
}

/// Exact rank and the first maximal independent set of columns.
pub fn rank_and_pivots(m: &SparseRationalMatrix) -> (usize, Vec<usize>) {
    let e = row_echelon(m);
    (e.rank(), e.pivots())
}

/// Exact basis of the right null space.
pub fn kernel_basis(m: &SparseRationalMatrix) -> Vec<Vec<Rational>> {
    row_echelon(m).kernel()
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    /// A particular solution with zeros on free columns, or `None`.
    pub solution: Option<Vec<Rational>>,
    pub rank: usize,
    pub pivots: Vec<usize>,
    pub kernel: Vec<Vec<Rational>>,
}

/// Solves `m·x = b`, reporting rank, pivots and kernel of `m` alongside.
pub fn solve_system(m: &SparseRationalMatrix, b: &[Rational]) -> Result<LinearSolution, LinError> {
    if b.len() != m.n_rows() {
        return Err(LinError::Length {
            got: b.len(),
            expected: m.n_rows(),
        });
    }
    let n = m.n_cols();
    let aug = row_echelon(&m.with_column(b));
    let consistent = aug.rows.last().is_none_or(|(p, _)| *p < n);
    if !consistent {
        // Drop the row carrying the right-hand side to get the echelon form of m.
        let mut e = aug;
        e.rows.pop();
        return Ok(LinearSolution {
            solution: None,
            rank: e.rank(),
            pivots: e.pivots(),
            kernel: e.kernel_within(n),
        });
    }
    let mut x = vec![Rational::zero(); n];
    for (p, r) in &aug.rows {
        x[*p] = r[n].clone();
    }
    assert!(m.mul_vec(&x) == b, "solution failed exact re-check");
    Ok(LinearSolution {
        solution: Some(x),
        rank: aug.rank(),
        pivots: aug.pivots(),
        kernel: aug.kernel_within(n),
    })
}

/// Some exact solution of `m·x = b`, or `None`.
pub fn solve(m: &SparseRationalMatrix, b: &[Rational]) -> Result<Option<Vec<Rational>>, LinError> {
    Ok(solve_system(m, b)?.solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    fn dense(rows: &[&[i64]]) -> SparseRationalMatrix {
        SparseRationalMatrix::from_dense(
            &rows
                .iter()
                .map(|r| r.iter().map(|&v| q(v)).collect())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn identity_rank_and_solve() {
        let m = SparseRationalMatrix::identity(5);
        assert_eq!(rank_and_pivots(&m), (5, vec![0, 1, 2, 3, 4]));
        let b: Vec<Rational> = (1..=5).map(q).collect();
        assert_eq!(solve(&m, &b).unwrap(), Some(b));
    }

    #[test]
    fn zero_matrix_kernel() {
        let m = SparseRationalMatrix::from_columns(3, vec![vec![]; 3]);
        assert_eq!(rank_and_pivots(&m).0, 0);
        assert_eq!(kernel_basis(&m).len(), 3);
    }

    #[test]
    fn dependent_columns_and_inconsistency() {
        let m = dense(&[&[1, 2, 1], &[2, 4, 0], &[3, 6, 1]]);
        let (r, piv) = rank_and_pivots(&m);
        assert_eq!((r, piv), (2, vec![0, 2]));
        let k = kernel_basis(&m);
        assert_eq!(k, vec![vec![q(-2), q(1), q(0)]]);
        assert!(m.mul_vec(&k[0]).iter().all(|v| v.is_zero()));
        let bad = [q(1), q(0), q(0)];
        let s = solve_system(&m, &bad).unwrap();
        assert!(s.solution.is_none());
        assert_eq!(s.rank, 2);
        assert_eq!(s.kernel.len(), 1);
        let good = [q(2), q(2), q(4)];
        let x = solve(&m, &good).unwrap().unwrap();
        assert_eq!(m.mul_vec(&x), good.to_vec());
    }

    #[test]
    fn certification_finds_rare_rows() {
        // Column 2 is independent only through one deep row, missed by seeding
        // of column-leading rows except through its own entries.
        let mut rows: Vec<Vec<Rational>> = (0..500).map(|i| vec![q(1), q(i % 7), q(0)]).collect();
        rows[377][2] = q(5);
        let m = SparseRationalMatrix::from_dense(&rows);
        assert_eq!(rank_and_pivots(&m).0, 3);
    }

    #[test]
    fn triplet_export() {
        let m = dense(&[&[1, 0], &[0, 2]]);
        let mut out = Vec::new();
        m.write_triplets(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "%% 2 2 2\n0 0 1\n1 1 2\n");
    }

    #[test]
    fn duplicate_formulas_rank_one() {
        use crate::exactalg::RingSignature;
        let sig = RingSignature::standard(2);
        let f = Superfunction::function(DiffPolynomial::parse(&sig, "1 * x * rho + 2 * rho_y").unwrap());
        let (m, idx) = build_matrix(&[f.clone(), f]).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(rank_and_pivots(&m), (1, vec![0]));
    }
}
