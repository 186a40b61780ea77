//! The thirteen rows of the dimension-shift experiment: which sets of 3D
//! sunflower micro-graphs have 4D descendants that solve the 4D equation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{formula_rank, solve_trivialization, FlowData, PipelineError, Verdict};
use crate::micrograph::{descendants_of_set, preset, MicroGraphEncoding, MicroGraphError};

pub struct RowSpec {
    pub label: &'static str,
    pub presets_3d: &'static [&'static str],
    /// A shipped 4D list, if any; otherwise the raw descendants of the 3D set.
    pub set_4d: Option<&'static str>,
    /// No solve: the graphs lack enough derivatives of ρ to solve anything.
    pub not_applicable: bool,
}

pub const ROWS: [RowSpec; 13] = [
    row("full 3D sunflower", &["sunflower3d_full"], None, false),
    row("3D solution #1", &["sol1_3d"], None, false),
    row("3D solution #2", &["sol2_3d"], None, false),
    row("3D solution #3", &["sol3_3d"], None, false),
    row("3D vanishing", &["vanishing3d"], Some("a8_set_4d"), true),
    row(
        "3D solution #1 + 3D vanishing",
        &["sol1_3d", "vanishing3d"],
        Some("a1_set_4d"),
        false,
    ),
    row(
        "3D solution #2 + 3D vanishing",
        &["sol2_3d", "vanishing3d"],
        Some("a2_set_4d"),
        false,
    ),
    row(
        "3D solution #3 + 3D vanishing",
        &["sol3_3d", "vanishing3d"],
        Some("a3_set_4d"),
        false,
    ),
    row("3D solution projected from 4D", &["projected_3d"], None, false),
    row(
        "3D solution projected from 4D + 3D vanishing",
        &["projected_3d", "vanishing3d"],
        Some("a4_set_4d"),
        false,
    ),
    row(
        "3D with linearly independent formulas",
        &["basis20_3d"],
        Some("a5_set_4d"),
        false,
    ),
    row(
        "3D graphs giving the 4D solution",
        &["seventeen_3d"],
        Some("a6_set_4d"),
        false,
    ),
    row(
        "3D linearly independent + 3D vanishing",
        &["basis20_3d", "vanishing3d"],
        Some("a7_set_4d"),
        false,
    ),
];

const fn row(
    label: &'static str,
    presets_3d: &'static [&'static str],
    set_4d: Option<&'static str>,
    not_applicable: bool,
) -> RowSpec {
    RowSpec {
        label,
        presets_3d,
        set_4d,
        not_applicable,
    }
}

/// One table line. Unset fields were not computed (counts-only mode) or,
/// in the golden file, are not stated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2Row {
    pub label: String,
    pub graphs_3d: usize,
    pub descendants_4d: Option<usize>,
    pub rank: Option<usize>,
    /// "yes", "no" or "NA".
    pub verdict: Option<String>,
}

pub fn golden() -> Vec<Table2Row> {
    serde_json::from_str(include_str!("../../data/table2_golden.json")).expect("shipped golden file parses")
}

pub fn graphs_3d(spec: &RowSpec) -> Result<Vec<MicroGraphEncoding>, MicroGraphError> {
    let mut out = Vec::new();
    for p in spec.presets_3d {
        out.extend(preset(p)?);
    }
    Ok(out)
}

pub fn graphs_4d(spec: &RowSpec) -> Result<Vec<MicroGraphEncoding>, MicroGraphError> {
    match spec.set_4d {
        Some(p) => preset(p),
        None => Ok(descendants_of_set(&graphs_3d(spec)?)),
    }
}

/// Counts always; ranks and verdicts when a 4D flow is supplied.
pub fn compute_row(
    spec: &RowSpec,
    flow: Option<&FlowData>,
    workers: usize,
    cache: Option<&Path>,
) -> Result<Table2Row, PipelineError> {
    let g3 = graphs_3d(spec).map_err(|e| PipelineError::Preset(e.to_string()))?;
    let g4 = graphs_4d(spec).map_err(|e| PipelineError::Preset(e.to_string()))?;
    let mut out = Table2Row {
        label: spec.label.to_string(),
        graphs_3d: g3.len(),
        descendants_4d: Some(g4.len()),
        rank: None,
        verdict: None,
    };
    if let Some(flow) = flow {
        if spec.not_applicable {
            out.rank = Some(formula_rank(&g4, workers, cache)?.0);
            out.verdict = Some("NA".to_string());
        } else {
            let r = solve_trivialization(flow, &g4, workers, cache)?;
            out.rank = Some(r.rank);
            out.verdict = Some(
                match (r.verdict, r.verified) {
                    (Verdict::Solvable, true) => "yes",
                    (Verdict::Solvable, false) => "unverified",
                    (Verdict::NoSolution, _) => "no",
                }
                .to_string(),
            );
        }
    }
    Ok(out)
}

/// Fields where a computed row disagrees with a golden one; fields missing
/// on either side are not compared.
pub fn mismatches(computed: &Table2Row, golden: &Table2Row) -> Vec<String> {
    let mut out = Vec::new();
    let label = &golden.label;
    if computed.graphs_3d != golden.graphs_3d {
        out.push(format!(
            "{label}: graphs_3d {} != {}",
            computed.graphs_3d, golden.graphs_3d
        ));
    }
    macro_rules! cmp {
        ($f:ident) => {
            if let (Some(c), Some(g)) = (&computed.$f, &golden.$f) {
                if c != g {
                    out.push(format!("{label}: {} {c} != {g}", stringify!($f)));
                }
            }
        };
    }
    cmp!(descendants_4d);
    cmp!(rank);
    cmp!(verdict);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_golden() {
        let g = golden();
        assert_eq!(g.len(), ROWS.len());
        for (spec, gold) in ROWS.iter().zip(&g) {
            assert_eq!(spec.label, gold.label);
            let r = compute_row(spec, None, 1, None).unwrap();
            assert!(mismatches(&r, gold).is_empty(), "{:?}", mismatches(&r, gold));
        }
    }
}
