//! Kontsevich graphs: the tetrahedron cocycle, its orientation into a sum
//! of directed graphs, and the multivector-valued graph operation Op(γ).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::exactalg::{accumulate, AlgError, DiffPolynomial, Monomial, Rational, RingSignature, TermMap};
use crate::superspace::{Superfunction, XiSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    pub n_vertices: usize,
    /// Edge order carries the orientation sign.
    pub edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }
}

/// Directed graph on `n_ground` ground vertices (`0..n_ground`) followed by
/// `n_aerial` aerial ones; only aerial vertices emit edges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedGraph {
    pub n_ground: usize,
    pub n_aerial: usize,
    pub edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n_ground: usize, n_aerial: usize, edges: Vec<(usize, usize)>) -> Self {
        let n = n_ground + n_aerial;
        for &(s, t) in &edges {
            assert!(s < n && t < n, "edge ({s},{t}) out of range");
            assert!(s >= n_ground, "ground vertex {s} emits an edge");
        }
        DirectedGraph {
            n_ground,
            n_aerial,
            edges,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_ground + self.n_aerial
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices()];
        for &(s, _) in &self.edges {
            deg[s] += 1;
        }
        deg
    }

    /// Relabel vertices by `perm`, sort the edge list, and report the parity
    /// of the sorting permutation.
    fn relabeled_sorted(&self, perm: &[usize]) -> (Vec<(usize, usize)>, bool) {
        let mut e: Vec<(usize, usize)> = self.edges.iter().map(|&(s, t)| (perm[s], perm[t])).collect();
        let odd = sort_with_parity(&mut e);
        (e, odd)
    }

    /// Minimal relabeling over permutations preserving ground/aerial, with
    /// the edge-permutation sign. `None` if an automorphism reverses sign.
    pub fn canonicalize(&self) -> Option<(DirectedGraph, i64)> {
        let mut best: Option<(Vec<(usize, usize)>, bool)> = None;
        let mut zero = false;
        for perm in partition_permutations(self.n_ground, self.n_aerial) {
            let (e, odd) = self.relabeled_sorted(&perm);
            match &best {
                Some((b, bodd)) if *b == e => {
                    if *bodd != odd {
                        zero = true;
                    }
                }
                Some((b, _)) if *b < e => {}
                _ => best = Some((e, odd)),
            }
        }
        if zero {
            return None;
        }
        let (edges, odd) = best.expect("at least the identity");
        Some((
            DirectedGraph {
                n_ground: self.n_ground,
                n_aerial: self.n_aerial,
                edges,
            },
            if odd { -1 } else { 1 },
        ))
    }
}

impl fmt::Display for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e: Vec<String> = self.edges.iter().map(|(s, t)| format!("({s},{t})")).collect();
        write!(f, "({}, {}; {})", self.n_ground, self.n_aerial, e.join(","))
    }
}

/// Insertion sort; returns true for an odd number of swaps.
pub fn sort_with_parity<T: Ord>(v: &mut [T]) -> bool {
    let mut odd = false;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            odd = !odd;
            j -= 1;
        }
    }
    odd
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

fn partition_permutations(ng: usize, na: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for pg in permutations(ng) {
        for pa in permutations(na) {
            let mut p = pg.clone();
            p.extend(pa.iter().map(|&a| a + ng));
            out.push(p);
        }
    }
    out
}

/// Rational combination of canonical directed graphs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DirectedGraphSum {
    terms: BTreeMap<DirectedGraph, Rational>,
}

impl DirectedGraphSum {
    /// Add `c·g`, canonicalizing `g` first; zero graphs are dropped.
    pub fn add_graph(&mut self, g: &DirectedGraph, c: &Rational) {
        let Some((cg, sign)) = g.canonicalize() else { return };
        let c = c * &Rational::from_int(sign);
        let e = self.terms.entry(cg.clone()).or_insert_with(Rational::zero);
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&cg);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&DirectedGraph, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: &Rational) -> DirectedGraphSum {
        if c.is_zero() {
            return DirectedGraphSum::default();
        }
        DirectedGraphSum {
            terms: self.terms.iter().map(|(g, v)| (g.clone(), v * c)).collect(),
        }
    }

    pub fn filter_max_out_degree(&self, max_out: usize) -> DirectedGraphSum {
        DirectedGraphSum {
            terms: self
                .terms
                .iter()
                .filter(|(g, _)| g.out_degrees().into_iter().all(|d| d <= max_out))
                .map(|(g, c)| (g.clone(), c.clone()))
                .collect(),
        }
    }
}

/// The tetrahedron γ₃ = K₄ with a fixed edge order and coefficient 1.
pub fn tetrahedron() -> (UndirectedGraph, Rational) {
    (
        UndirectedGraph {
            n_vertices: 4,
            edges: vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        },
        Rational::one(),
    )
}

/// Every edge-direction assignment of `g` (all vertices aerial), each with
/// coefficient `coeff`, canonicalized, merged, then filtered by out-degree.
pub fn orient(g: &UndirectedGraph, coeff: &Rational, max_out: usize) -> DirectedGraphSum {
    let mut sum = DirectedGraphSum::default();
    for mask in 0u32..(1 << g.edges.len()) {
        let edges = g
            .edges
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| if mask >> k & 1 == 0 { (a, b) } else { (b, a) })
            .collect();
        sum.add_graph(&DirectedGraph::new(0, g.n_vertices, edges), coeff);
    }
    sum.filter_max_out_degree(max_out)
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph has {expected} vertices but {got} arguments were given")]
    Arity { expected: usize, got: usize },
    #[error("arguments must be homogeneous superfunctions")]
    Inhomogeneous,
    #[error(transparent)]
    Alg(#[from] AlgError),
}

/// Term of a superfunction flattened for repeated products.
type Flat = Vec<(XiSet, Monomial, Rational)>;

fn flatten(s: &Superfunction) -> Flat {
    let mut out = Vec::with_capacity(s.n_terms());
    for (k, p) in s.components() {
        for (m, c) in p.terms() {
            out.push((k, m.clone(), c.clone()));
        }
    }
    out
}

/// Op(γ)(args): each edge (s,t) with coordinate index i applies ∂/∂ξᵢ to the
/// content of s and D_{xᵢ} to the content of t; edges act in list order with
/// Koszul signs, then contents are multiplied in vertex order. Summed over
/// all index maps and over the terms of the sum.
pub fn graph_operation(gs: &DirectedGraphSum, args: &[Superfunction]) -> Result<Superfunction, GraphError> {
    graph_operation_filtered(gs, args, None)
}

/// The coefficient of a single ξ-monomial of Op(γ)(args), computed without
/// materializing the other components.
pub fn graph_operation_component(
    gs: &DirectedGraphSum,
    args: &[Superfunction],
    target: XiSet,
) -> Result<DiffPolynomial, GraphError> {
    Ok(graph_operation_filtered(gs, args, Some(target))?.coeff(target))
}

fn graph_operation_filtered(
    gs: &DirectedGraphSum,
    args: &[Superfunction],
    target: Option<XiSet>,
) -> Result<Superfunction, GraphError> {
    let sig = args
        .first()
        .map(|a| a.signature().clone())
        .ok_or(GraphError::Arity { expected: 1, got: 0 })?;
    let mut total: BTreeMap<XiSet, TermMap> = BTreeMap::new();
    for (g, c) in gs.terms() {
        for (k, m, v) in contract(g, args, target)? {
            if target.is_some_and(|t| t != k) {
                continue;
            }
            accumulate(total.entry(k).or_default(), m, &v * c);
        }
    }
    Ok(assemble(&sig, total))
}

fn assemble(sig: &Arc<RingSignature>, maps: BTreeMap<XiSet, TermMap>) -> Superfunction {
    let mut out = Superfunction::zero(sig);
    for (k, map) in maps {
        out.set(k, DiffPolynomial::from_map(sig, map));
    }
    out
}

type Table = FxHashMap<Vec<u8>, BTreeMap<XiSet, TermMap>>;

fn merge_tables(mut a: Table, b: Table) -> Table {
    for (key, maps) in b {
        let slot = a.entry(key).or_default();
        for (k, map) in maps {
            let acc = slot.entry(k).or_default();
            for (m, c) in map {
                accumulate(acc, m, c);
            }
        }
    }
    a
}

/// Sum over index maps of one graph, contracted vertex by vertex: after
/// vertex v joins, every edge with both ends in 0..=v is summed out, so the
/// state is keyed only by the indices of edges still reaching later vertices.
/// The state before the last vertex is never stored whole: each of its
/// entries is built, multiplied by the last vertex and dropped.
fn contract(g: &DirectedGraph, args: &[Superfunction], target: Option<XiSet>) -> Result<Flat, GraphError> {
    let n = g.n_vertices();
    if args.len() != n {
        return Err(GraphError::Arity {
            expected: n,
            got: args.len(),
        });
    }
    let d = args[0].dim();
    let mut deg = Vec::with_capacity(n);
    for a in args {
        match (a.is_zero(), a.degree()) {
            (true, _) => return Ok(Vec::new()),
            (false, Some(k)) => deg.push(k),
            (false, None) => return Err(GraphError::Inhomogeneous),
        }
    }
    // The Koszul sign only depends on degrees, not on the chosen indices.
    let mut koszul = false;
    for &(s, _) in &g.edges {
        let before: usize = deg[..s].iter().sum();
        koszul ^= before % 2 == 1;
        if deg[s] == 0 {
            return Ok(Vec::new());
        }
        deg[s] -= 1;
    }

    let mut open: Vec<usize> = Vec::new();
    let mut state: Vec<(Vec<u8>, Flat)> = vec![(Vec::new(), vec![(XiSet::EMPTY, Monomial::one(), Rational::one())])];
    let mut v = 0;
    while v < n {
        let step = Step::new(
            g,
            &open,
            v,
            d,
            vertex_contents(&args[v], v, &g.edges, &Step::incident(g, v), d)?,
        );
        if v + 2 == n {
            let last = Step::new(
                g,
                &step.next_open,
                v + 1,
                d,
                vertex_contents(&args[v + 1], v + 1, &g.edges, &Step::incident(g, v + 1), d)?,
            );
            let out = step.fused_with_last(&state, &last, target);
            state = vec![(Vec::new(), out)];
            v += 2;
        } else {
            state = step.apply(&state, target);
            open = step.next_open;
            v += 1;
        }
    }
    let mut out = state.pop().map(|(_, f)| f).unwrap_or_default();
    if koszul {
        for t in &mut out {
            t.2 = -std::mem::take(&mut t.2);
        }
    }
    Ok(out)
}

/// One vertex joining the contraction.
struct Step<'a> {
    g: &'a DirectedGraph,
    d: usize,
    open: Vec<usize>,
    inc: Vec<usize>,
    fresh: Vec<usize>,
    next_open: Vec<usize>,
    contents: VertexContents,
}

impl<'a> Step<'a> {
    fn incident(g: &DirectedGraph, v: usize) -> Vec<usize> {
        (0..g.edges.len())
            .filter(|&k| g.edges[k].0 == v || g.edges[k].1 == v)
            .collect()
    }

    fn new(g: &'a DirectedGraph, open: &[usize], v: usize, d: usize, contents: VertexContents) -> Self {
        let inc = Self::incident(g, v);
        let fresh: Vec<usize> = inc.iter().copied().filter(|k| !open.contains(k)).collect();
        let next_open: Vec<usize> = open
            .iter()
            .chain(fresh.iter())
            .copied()
            .filter(|&k| g.edges[k].0 > v || g.edges[k].1 > v)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        Step {
            g,
            d,
            open: open.to_vec(),
            inc,
            fresh,
            next_open,
            contents,
        }
    }

    /// Every (fresh index code, new key, vertex content) reachable from `key`.
    fn expand(&self, key: &[u8], mut f: impl FnMut(Vec<u8>, &Flat)) {
        let d = self.d;
        let mut idx = vec![0u8; self.g.edges.len()];
        for (pos, &k) in self.open.iter().enumerate() {
            idx[k] = key[pos];
        }
        for code in 0..d.pow(self.fresh.len() as u32) {
            let mut r = code;
            for &k in self.fresh.iter().rev() {
                idx[k] = (r % d) as u8;
                r /= d;
            }
            let mut ccode = 0;
            for &k in &self.inc {
                ccode = ccode * d + idx[k] as usize;
            }
            let content = self.contents.get(ccode);
            if content.is_empty() {
                continue;
            }
            f(self.next_open.iter().map(|&k| idx[k]).collect(), content);
        }
    }

    fn apply(&self, state: &[(Vec<u8>, Flat)], target: Option<XiSet>) -> Vec<(Vec<u8>, Flat)> {
        let table: Table = state
            .par_iter()
            .fold(Table::default, |mut acc, (key, flat)| {
                self.expand(key, |new_key, content| {
                    mul_flat_into(flat, content, target, acc.entry(new_key).or_default());
                });
                acc
            })
            .reduce(Table::default, merge_tables);
        let mut next: Vec<(Vec<u8>, Flat)> = table
            .into_iter()
            .map(|(key, maps)| (key, unflatten(maps)))
            .filter(|(_, f)| !f.is_empty())
            .collect();
        next.sort_by(|a, b| a.0.cmp(&b.0));
        next
    }

    /// `last.apply(self.apply(state))` for a final vertex, one key of the
    /// intermediate state at a time.
    fn fused_with_last(&self, state: &[(Vec<u8>, Flat)], last: &Step, target: Option<XiSet>) -> Flat {
        let mut keys = std::collections::BTreeSet::new();
        for (key, _) in state {
            self.expand(key, |nk, _| {
                keys.insert(nk);
            });
        }
        let keys: Vec<Vec<u8>> = keys.into_iter().collect();
        let total = keys
            .par_iter()
            .fold(BTreeMap::<XiSet, TermMap>::new, |mut acc, key| {
                let mut slot = BTreeMap::new();
                for (skey, flat) in state {
                    self.expand(skey, |nk, content| {
                        if &nk == key {
                            mul_flat_into(flat, content, target, &mut slot);
                        }
                    });
                }
                let mid = unflatten(slot);
                if !mid.is_empty() {
                    last.expand(key, |_, content| mul_flat_into(&mid, content, target, &mut acc));
                }
                acc
            })
            .reduce(BTreeMap::new, |mut a, b| {
                for (k, map) in b {
                    let acc = a.entry(k).or_default();
                    for (m, c) in map {
                        accumulate(acc, m, c);
                    }
                }
                a
            });
        unflatten(total)
    }
}

fn unflatten(maps: BTreeMap<XiSet, TermMap>) -> Flat {
    maps.into_iter()
        .flat_map(|(k, map)| {
            map.into_iter()
                .filter(|(_, c)| !c.is_zero())
                .map(move |(m, c)| (k, m, c))
        })
        .collect()
}

/// Content of one vertex for every index assignment of its incident edges,
/// indexed by the base-d code of those indices in edge order.
struct VertexContents {
    slots: Vec<usize>,
    uniq: Vec<Flat>,
}

impl VertexContents {
    fn get(&self, code: usize) -> &Flat {
        &self.uniq[self.slots[code]]
    }
}

fn vertex_contents(
    arg: &Superfunction,
    v: usize,
    edges: &[(usize, usize)],
    inc: &[usize],
    d: usize,
) -> Result<VertexContents, AlgError> {
    let total = d.pow(inc.len() as u32);
    let mut memo: FxHashMap<(Vec<usize>, Vec<usize>), usize> = FxHashMap::default();
    let mut uniq: Vec<Flat> = Vec::new();
    let mut slots = Vec::with_capacity(total);
    for code in 0..total {
        let mut idx = vec![0usize; inc.len()];
        let mut r = code;
        for p in (0..inc.len()).rev() {
            idx[p] = r % d;
            r /= d;
        }
        let outs: Vec<usize> = inc
            .iter()
            .zip(&idx)
            .filter(|(&k, _)| edges[k].0 == v)
            .map(|(_, &i)| i)
            .collect();
        let mut ins: Vec<usize> = inc
            .iter()
            .zip(&idx)
            .filter(|(&k, _)| edges[k].1 == v)
            .map(|(_, &i)| i)
            .collect();
        ins.sort_unstable();
        let key = (outs, ins);
        let slot = match memo.get(&key) {
            Some(&s) => s,
            None => {
                let mut s = arg.clone();
                for &i in &key.0 {
                    s = s.odd_derivative(i);
                }
                for &i in &key.1 {
                    if s.is_zero() {
                        break;
                    }
                    s = s.total_derivative(i)?;
                }
                uniq.push(flatten(&s));
                memo.insert(key, uniq.len() - 1);
                uniq.len() - 1
            }
        };
        slots.push(slot);
    }
    Ok(VertexContents { slots, uniq })
}

fn mul_flat_into(a: &Flat, b: &Flat, target: Option<XiSet>, out: &mut BTreeMap<XiSet, TermMap>) {
    for (kb, mb, cb) in b {
        for (ka, ma, ca) in a {
            if ka.0 & kb.0 != 0 {
                continue;
            }
            let k = XiSet(ka.0 | kb.0);
            if target.is_some_and(|t| k.0 & !t.0 != 0) {
                continue;
            }
            let mut inv = 0;
            for j in kb.indices() {
                inv += (ka.0 as u16 >> (j + 1)).count_ones();
            }
            let c = ca * cb;
            accumulate(out.entry(k).or_default(), ma.mul(mb), if inv % 2 == 1 { -c } else { c });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superspace::nambu_p;

    #[test]
    fn tetrahedron_shape() {
        let (t, c) = tetrahedron();
        assert_eq!(t.n_vertices, 4);
        assert_eq!(t.edges.len(), 6);
        assert!(t.degrees().iter().all(|&d| d == 3));
        assert!(c.is_one());
    }

    #[test]
    fn out_degree_three_is_filtered() {
        let (t, c) = tetrahedron();
        let all = orient(&t, &c, 3);
        let filtered = orient(&t, &c, 2);
        assert!(filtered.terms().all(|(g, _)| g.out_degrees().iter().all(|&d| d <= 2)));
        assert!(all.len() > filtered.len());
    }

    #[test]
    fn canonical_keys_are_fixed_points() {
        let (t, c) = tetrahedron();
        for (g, _) in orient(&t, &c, 3).terms() {
            let (h, s) = g.canonicalize().unwrap();
            assert_eq!(&h, g);
            assert_eq!(s, 1);
        }
    }

    #[test]
    fn edge_swap_flips_sign() {
        let g = DirectedGraph::new(0, 3, vec![(0, 1), (1, 2)]);
        let h = DirectedGraph::new(0, 3, vec![(1, 2), (0, 1)]);
        let (cg, sg) = g.canonicalize().unwrap();
        let (ch, sh) = h.canonicalize().unwrap();
        assert_eq!(cg, ch);
        assert_eq!(sg, -sh);
    }

    #[test]
    fn empty_graph_multiplies() {
        let sig = RingSignature::standard(2);
        let f = Superfunction::function(DiffPolynomial::parse(&sig, "1 * rho_x").unwrap());
        let g = Superfunction::function(DiffPolynomial::parse(&sig, "1 * x + 2").unwrap());
        let mut gs = DirectedGraphSum::default();
        gs.add_graph(&DirectedGraph::new(0, 2, vec![]), &Rational::one());
        assert_eq!(graph_operation(&gs, &[f.clone(), g.clone()]).unwrap(), f.mul(&g));
    }

    #[test]
    fn single_edge_is_hamiltonian_field() {
        let sig = RingSignature::standard(2);
        let p = nambu_p(&sig).unwrap();
        let a = Superfunction::function(DiffPolynomial::parse(&sig, "1 * x^2 * y").unwrap());
        let mut gs = DirectedGraphSum::default();
        gs.add_graph(&DirectedGraph::new(0, 2, vec![(0, 1)]), &Rational::one());
        let got = graph_operation(&gs, &[p, a]).unwrap();
        // ρ(ξ₁·∂ₓa − ξ₀·∂ᵧa) with a = x²y
        let want = Superfunction::parse(&sig, "[0]: -1 * x^2 * rho\n[1]: 2 * x * y * rho\n").unwrap();
        assert_eq!(got, want);
    }

    fn q_of(d: usize) -> (Superfunction, Superfunction) {
        let sig = RingSignature::standard(d);
        let p = nambu_p(&sig).unwrap();
        let (t, c) = tetrahedron();
        let gs = orient(&t, &c, 2);
        let q = graph_operation(&gs, &[p.clone(), p.clone(), p.clone(), p.clone()]).unwrap();
        (p, q)
    }

    #[test]
    fn cocycle_in_two_and_three_dimensions() {
        for d in [2, 3] {
            let (p, q) = q_of(d);
            assert!(!q.is_zero());
            assert_eq!(q.degree(), Some(2));
            assert!(p.schouten(&q).unwrap().is_zero(), "[[P,Q]] != 0 in d = {d}");
        }
    }
}
