//! End-to-end: the tetrahedral flow Q = Op(γ₃)(P,P,P,P) on the Nambu class,
//! its decomposition into ρ̇ and ȧₖ, and the coboundary equation Q = [[P, X]]
//! over a chosen set of micro-graphs.

pub mod table2;

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::evaluator::{evaluate_batch, read_checked, write_checked, EvalError};
use crate::exactalg::{AlgError, DiffPolynomial, Rational, RingSignature};
use crate::exactlin::{build_from_blocks, build_matrix, rank_and_pivots, rhs_vector, solve_system, LinError};
use crate::graphcore::{graph_operation, graph_operation_component, orient, tetrahedron, DirectedGraphSum, GraphError};
use crate::micrograph::MicroGraphEncoding;
use crate::superspace::{nambu_build, nambu_p, nambu_without_rho, Superfunction, XiSet};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Alg(#[from] AlgError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lin(#[from] LinError),
    #[error("Q is not of the form ρ̇·P_withoutrho + Σ Pₖ")]
    NotNice,
    #[error("preset: {0}")]
    Preset(String),
    #[error("graphs must all be {expected}-dimensional")]
    Dimension { expected: usize },
}

/// The flow and its decomposition.
#[derive(Clone, Debug)]
pub struct FlowData {
    pub d: usize,
    pub p: Superfunction,
    pub q: Superfunction,
    pub adot: Vec<DiffPolynomial>,
    pub rhodot: DiffPolynomial,
    pub p_withoutrho: Superfunction,
}

impl FlowData {
    pub fn signature(&self) -> &Arc<RingSignature> {
        self.p.signature()
    }
}

/// The oriented tetrahedron, terms with an out-degree above 2 dropped.
/// The sum over all 64 orientations leaves the two surviving graphs with
/// coefficients 8 and −24; dividing by 8 gives the usual 1 and −3, for
/// which the 2D sunflower solves the equation with weights 1 and 2.
pub fn tetrahedron_flow_graphs() -> DirectedGraphSum {
    let (t, c) = tetrahedron();
    orient(&t, &c, 2).scale(&Rational::new(1, 8))
}

/// Q = Op(γ₃)(P,P,P,P), one ξ-component at a time to bound peak memory.
pub fn flow_bivector(gs: &DirectedGraphSum, p: &Superfunction) -> Result<Superfunction, GraphError> {
    let d = p.dim();
    let args = [p.clone(), p.clone(), p.clone(), p.clone()];
    let mut q = Superfunction::zero(p.signature());
    for i in 0..d {
        for j in i + 1..d {
            let k = XiSet::from_indices(&[i, j]);
            q.set(k, graph_operation_component(gs, &args, k)?);
        }
    }
    Ok(q)
}

/// Velocity of a Casimir: Op(γ₃) with the function in each vertex slot in
/// turn and P in the others. Only vertices of out-degree 0 contribute.
pub fn casimir_flow(
    gs: &DirectedGraphSum,
    p: &Superfunction,
    f: &DiffPolynomial,
) -> Result<DiffPolynomial, GraphError> {
    let sig = p.signature();
    let fs = Superfunction::function(f.clone());
    let mut total = DiffPolynomial::zero(sig);
    for pos in 0..4 {
        let mut args = vec![p.clone(); 4];
        args[pos] = fs.clone();
        total = total.add(&graph_operation(gs, &args)?.coeff(XiSet::EMPTY));
    }
    Ok(total)
}

/// Q, ȧₖ and ρ̇ with the decomposition Q = ρ̇·P_withoutrho + Σₖ Pₖ re-verified,
/// where Pₖ is the Nambu build with ȧₖ in place of aₖ.
pub fn compute_flow(d: usize) -> Result<FlowData, PipelineError> {
    let sig = RingSignature::standard(d);
    let p = nambu_p(&sig)?;
    let gs = tetrahedron_flow_graphs();
    let q = flow_bivector(&gs, &p)?;
    let adot = (1..=d - 2)
        .map(|k| casimir_flow(&gs, &p, &DiffPolynomial::fibre(&sig, k)))
        .collect::<Result<Vec<_>, _>>()?;
    decompose(d, p, q, adot)
}

fn decompose(
    d: usize,
    p: Superfunction,
    q: Superfunction,
    adot: Vec<DiffPolynomial>,
) -> Result<FlowData, PipelineError> {
    let sig = p.signature().clone();
    let rho_eps = Superfunction::epsilon(&sig).mul_function(&DiffPolynomial::fibre(&sig, 0));
    let mut rem = q.clone();
    for (k, ad) in adot.iter().enumerate() {
        rem = rem.sub(&nambu_build(&sig, rho_eps.clone(), Some((k + 1, ad)))?);
    }
    let p_withoutrho = nambu_without_rho(&sig)?;
    let k01 = XiSet::from_indices(&[0, 1]);
    let rhodot = rem
        .coeff(k01)
        .exact_divide(&p_withoutrho.coeff(k01))
        .map_err(|_| PipelineError::NotNice)?;
    if rem != p_withoutrho.mul_function(&rhodot) {
        return Err(PipelineError::NotNice);
    }
    Ok(FlowData {
        d,
        p,
        q,
        adot,
        rhodot,
        p_withoutrho,
    })
}

/// [`compute_flow`] backed by a checksummed file in `cache`.
pub fn compute_flow_cached(d: usize, cache: Option<&Path>) -> Result<FlowData, PipelineError> {
    let Some(dir) = cache else {
        return compute_flow(d);
    };
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(format!("flow_d{d}.txt"));
    let tag = format!("flow d={d}");
    let sig = RingSignature::standard(d);
    if let Some(text) = read_checked(&path, &tag) {
        if let Some(flow) = parse_flow(&sig, &text) {
            return Ok(flow);
        }
    }
    let flow = compute_flow(d)?;
    let mut text = String::from("@Q\n");
    text.push_str(&flow.q.render());
    for a in &flow.adot {
        text.push_str("@adot\n");
        text.push_str(&a.render());
        text.push('\n');
    }
    write_checked(&path, &tag, &text)?;
    Ok(flow)
}

fn parse_flow(sig: &Arc<RingSignature>, text: &str) -> Option<FlowData> {
    let mut sections = text.split('@').filter(|s| !s.is_empty());
    let q = Superfunction::parse(sig, sections.next()?.strip_prefix("Q\n")?).ok()?;
    let adot = sections
        .map(|s| DiffPolynomial::parse(sig, s.strip_prefix("adot\n")?.trim()).ok())
        .collect::<Option<Vec<_>>>()?;
    if adot.len() != sig.dim() - 2 {
        return None;
    }
    decompose(sig.dim(), nambu_p(sig).ok()?, q, adot).ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Solvable,
    NoSolution,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrivializationResult {
    pub d: usize,
    pub n_graphs: usize,
    /// Rank of the formula matrix of the input graphs.
    pub rank: usize,
    /// Graphs whose formulas span the rest, in input order.
    pub pivot_graphs: Vec<String>,
    pub system_rows: usize,
    pub system_rank: usize,
    pub verdict: Verdict,
    pub nullity: usize,
    /// Coefficients over `pivot_graphs`, as exact rationals.
    pub solution: Option<Vec<String>>,
    pub verified: bool,
    #[serde(skip)]
    pub solution_values: Option<Vec<Rational>>,
    #[serde(skip)]
    pub kernel: Vec<Vec<Rational>>,
    #[serde(skip)]
    pub x: Option<Superfunction>,
}

/// Rank and pivots of the formula matrix of a graph list.
pub fn formula_rank(
    graphs: &[MicroGraphEncoding],
    workers: usize,
    cache: Option<&Path>,
) -> Result<(usize, Vec<usize>, Vec<Superfunction>), PipelineError> {
    let recs = evaluate_batch(graphs, workers, cache)?;
    let formulas: Vec<Superfunction> = recs.into_iter().map(|r| r.formula).collect();
    let (m, _) = build_matrix(&formulas)?;
    let (rank, pivots) = rank_and_pivots(&m);
    Ok((rank, pivots, formulas))
}

/// Solves Q = [[P, X]] with X in the span of the graphs' formulas.
///
/// Since [[X, ·]] is a derivation of the Nambu build, the equation splits
/// into [[X, aₖ]] = −ȧₖ for each Casimir and the top component of
/// [[X, ρ·ε]] = −ρ̇. The system is assembled over the independent formulas
/// only, and any solution is re-verified against Q directly.
pub fn solve_trivialization(
    flow: &FlowData,
    graphs: &[MicroGraphEncoding],
    workers: usize,
    cache: Option<&Path>,
) -> Result<TrivializationResult, PipelineError> {
    let d = flow.d;
    if graphs.iter().any(|g| g.dim() != d) {
        return Err(PipelineError::Dimension { expected: d });
    }
    let t0 = Instant::now();
    let (rank, pivots, formulas) = formula_rank(graphs, workers, cache)?;
    log(&format!(
        "formulas: rank {rank} of {} in {:.1?}",
        graphs.len(),
        t0.elapsed()
    ));
    let independent: Vec<&Superfunction> = pivots.iter().map(|&j| &formulas[j]).collect();
    let sig = flow.signature().clone();
    let top = XiSet::full(d);
    let rho_eps = Superfunction::epsilon(&sig).mul_function(&DiffPolynomial::fibre(&sig, 0));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let t1 = Instant::now();
    let blocks: Vec<Vec<DiffPolynomial>> = pool.install(|| {
        independent
            .par_iter()
            .map(|x| {
                let mut col = vec![x.schouten(&rho_eps)?.coeff(top)];
                for k in 1..=d - 2 {
                    let a = Superfunction::function(DiffPolynomial::fibre(&sig, k));
                    col.push(x.schouten(&a)?.coeff(XiSet::EMPTY));
                }
                Ok(col)
            })
            .collect::<Result<_, AlgError>>()
    })?;
    let columns: Vec<Vec<(u32, &DiffPolynomial)>> = blocks
        .iter()
        .map(|c| c.iter().enumerate().map(|(b, p)| (b as u32, p)).collect())
        .collect();
    let (m, index) = build_from_blocks(&columns);
    let neg_rhodot = flow.rhodot.neg();
    let neg_adot: Vec<DiffPolynomial> = flow.adot.iter().map(|a| a.neg()).collect();
    let mut pieces = vec![(0u32, &neg_rhodot)];
    pieces.extend(neg_adot.iter().enumerate().map(|(k, a)| (k as u32 + 1, a)));
    let (b, missing) = rhs_vector(&index, &pieces);
    log(&format!(
        "system: {} rows x {} cols, {} nonzeros, assembled in {:.1?}",
        m.n_rows(),
        m.n_cols(),
        m.nnz(),
        t1.elapsed()
    ));
    let t2 = Instant::now();
    let sol = solve_system(&m, &b)?;
    log(&format!("solve: rank {} in {:.1?}", sol.rank, t2.elapsed()));
    let solution = if missing > 0 { None } else { sol.solution };
    let mut result = TrivializationResult {
        d,
        n_graphs: graphs.len(),
        rank,
        pivot_graphs: pivots.iter().map(|&j| graphs[j].to_string()).collect(),
        system_rows: m.n_rows(),
        system_rank: sol.rank,
        verdict: if solution.is_some() {
            Verdict::Solvable
        } else {
            Verdict::NoSolution
        },
        nullity: sol.kernel.len(),
        solution: solution.as_ref().map(|x| x.iter().map(|v| v.to_string()).collect()),
        verified: false,
        solution_values: None,
        kernel: sol.kernel,
        x: None,
    };
    if let Some(x) = solution {
        let field = combine(&sig, &independent, &x);
        let t3 = Instant::now();
        result.verified = verify_solution(flow, &field)?;
        log(&format!("verify: {} in {:.1?}", result.verified, t3.elapsed()));
        result.x = Some(field);
        result.solution_values = Some(x);
    }
    Ok(result)
}

fn log(msg: &str) {
    if std::env::var_os("NAMBU_QUIET").is_none() {
        eprintln!("[nambu] {msg}");
    }
}

/// Σ cⱼ·Xⱼ.
pub fn combine(sig: &Arc<RingSignature>, xs: &[&Superfunction], cs: &[Rational]) -> Superfunction {
    xs.iter()
        .zip(cs)
        .filter(|(_, c)| !c.is_zero())
        .fold(Superfunction::zero(sig), |acc, (x, c)| acc.add_scaled(x, c))
}

/// Exact check of [[P, X]] == Q, one ξ-component at a time.
pub fn verify_solution(flow: &FlowData, x: &Superfunction) -> Result<bool, AlgError> {
    if x.degree().is_some_and(|k| k != 1) {
        return Ok(false);
    }
    Ok(flow.p.schouten(x)? == flow.q)
}

/// Sets the last Casimir to the last coordinate and drops the last ξ; the
/// Nambu signs are normalized so that P_d projects to P_{d−1}.
pub fn project_solution(x: &Superfunction) -> Result<Superfunction, AlgError> {
    let d = x.dim();
    assert!(d >= 3, "nothing to project below 2D");
    x.project(&RingSignature::standard(d - 1))
}

/// A 4D graph, its a¹ ↔ a² swap, and ½(φ(Γ) − φ(swapped)).
pub type SkewPair = ((MicroGraphEncoding, MicroGraphEncoding), Superfunction);

/// ½(φ(Γ) − φ(Γ with a¹ and a² exchanged)) for each 4D graph.
pub fn skew_symmetrize_4d(
    graphs: &[MicroGraphEncoding],
    workers: usize,
    cache: Option<&Path>,
) -> Result<Vec<SkewPair>, PipelineError> {
    if graphs.iter().any(|g| g.dim() != 4) {
        return Err(PipelineError::Dimension { expected: 4 });
    }
    let swapped: Vec<MicroGraphEncoding> = graphs.iter().map(|g| g.swap_casimirs()).collect();
    let a = evaluate_batch(graphs, workers, cache)?;
    let b = evaluate_batch(&swapped, workers, cache)?;
    let half = Rational::new(1, 2);
    Ok(graphs
        .iter()
        .zip(swapped)
        .zip(a.into_iter().zip(b))
        .map(|((g, s), (fa, fb))| ((g.clone(), s), fa.formula.sub(&fb.formula).scale(&half)))
        .collect())
}

/// The two non-vanishing 3D sunflower graphs outside the 20-graph basis.
pub const NON_BASIS_3D: [&str; 2] = ["(0,5,4;1,6,5;1,2,6)", "(0,5,4;4,6,5;4,2,6)"];

#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    /// Each non-basis 3D formula is nonzero and in the span of the basis formulas.
    pub in_span_3d: Vec<bool>,
    pub n_descendants_4d: Vec<usize>,
    /// Per non-basis graph: how many of its 4D descendants have formulas
    /// outside the span of the basis descendants' formulas.
    pub outside_span_4d: Vec<usize>,
    /// Per non-basis graph: the sum of its descendants' formulas (the
    /// Leibniz lift of its 3D formula) is in that span.
    pub lift_in_span_4d: Vec<bool>,
}

impl TransportReport {
    pub fn holds(&self) -> bool {
        self.in_span_3d.iter().all(|&b| b) && self.outside_span_4d.iter().all(|&n| n == 0)
    }
}

/// Whether linear dependence among 3D formulas survives the step to 4D for
/// the two graphs of [`NON_BASIS_3D`].
pub fn linear_dependence_transport(workers: usize, cache: Option<&Path>) -> Result<TransportReport, PipelineError> {
    use crate::micrograph::{descendants_of_set, preset};
    let basis = preset("basis20_3d").map_err(|e| PipelineError::Preset(e.to_string()))?;
    let basis_4d = descendants_of_set(&basis);
    let formulas = |gs: &[MicroGraphEncoding]| -> Result<Vec<Superfunction>, PipelineError> {
        Ok(evaluate_batch(gs, workers, cache)?
            .into_iter()
            .map(|r| r.formula)
            .collect())
    };
    let b3 = formulas(&basis)?;
    let b4 = formulas(&basis_4d)?;
    let mut report = TransportReport {
        in_span_3d: Vec::new(),
        n_descendants_4d: Vec::new(),
        outside_span_4d: Vec::new(),
        lift_in_span_4d: Vec::new(),
    };
    for text in NON_BASIS_3D {
        let g: MicroGraphEncoding = text
            .parse()
            .map_err(|e: crate::micrograph::MicroGraphError| PipelineError::Preset(e.to_string()))?;
        let f = formulas(std::slice::from_ref(&g))?;
        report.in_span_3d.push(!f[0].is_zero() && span_contains(&b3, &f[0])?);
        let desc = formulas(&g.descendants())?;
        let mut outside = 0;
        for f in &desc {
            outside += usize::from(!span_contains(&b4, f)?);
        }
        let lift = desc
            .iter()
            .fold(Superfunction::zero(b4[0].signature()), |acc, f| acc.add(f));
        report.n_descendants_4d.push(desc.len());
        report.outside_span_4d.push(outside);
        report.lift_in_span_4d.push(span_contains(&b4, &lift)?);
    }
    Ok(report)
}

/// Whether `v` lies in the span of `basis` (all formulas of one degree).
pub fn span_contains(basis: &[Superfunction], v: &Superfunction) -> Result<bool, PipelineError> {
    span_contains_all(basis, std::slice::from_ref(v))
}

/// Whether every element of `vs` lies in the span of `basis`.
pub fn span_contains_all(basis: &[Superfunction], vs: &[Superfunction]) -> Result<bool, PipelineError> {
    let mut all = basis.to_vec();
    let (m, _) = build_matrix(&all)?;
    let r0 = rank_and_pivots(&m).0;
    all.extend_from_slice(vs);
    let (m, _) = build_matrix(&all)?;
    Ok(rank_and_pivots(&m).0 == r0)
}

/// Whether `v − w` lies in the span of `kernel` (plain vectors).
pub fn differs_by_kernel(v: &[Rational], w: &[Rational], kernel: &[Vec<Rational>]) -> bool {
    use crate::exactlin::SparseRationalMatrix;
    let diff: Vec<Rational> = v.iter().zip(w).map(|(a, b)| a - b).collect();
    let k = SparseRationalMatrix::from_dense(&transpose(kernel, v.len()));
    let r0 = rank_and_pivots(&k).0;
    rank_and_pivots(&k.with_column(&diff)).0 == r0
}

fn transpose(cols: &[Vec<Rational>], n: usize) -> Vec<Vec<Rational>> {
    (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micrograph::preset;

    #[test]
    fn flow_2d_is_nice_and_cocycle() {
        let f = compute_flow(2).unwrap();
        assert!(f.adot.is_empty());
        assert_eq!(f.q, f.p_withoutrho.mul_function(&f.rhodot));
        assert!(f.p.schouten(&f.q).unwrap().is_zero());
    }

    #[test]
    fn zero_field_does_not_verify() {
        let f = compute_flow(2).unwrap();
        assert!(!verify_solution(&f, &Superfunction::zero(f.signature())).unwrap());
    }

    #[test]
    fn sunflower_2d() {
        std::env::set_var("NAMBU_QUIET", "1");
        let f = compute_flow(2).unwrap();
        let r = solve_trivialization(&f, &preset("sunflower2d").unwrap(), 1, None).unwrap();
        assert_eq!(r.verdict, Verdict::Solvable);
        assert!(r.verified);
        assert_eq!(r.rank, 2);
        let x = r.solution_values.unwrap();
        let expected = [Rational::from_int(1), Rational::from_int(2)];
        assert!(
            differs_by_kernel(&x, &expected, &r.kernel),
            "solution {x:?} kernel {:?}",
            r.kernel
        );
    }
}
