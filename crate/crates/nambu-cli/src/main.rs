use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use nambu::evaluator::evaluate_batch;
use nambu::micrograph::{
    canonical_classes, descendants_of_set, enumerate_5d_sunflower, parse_list, preset, preset_dim, MicroGraphEncoding,
    PRESET_NAMES,
};
use nambu::pipeline::table2::{self, ROWS};
use nambu::pipeline::{
    compute_flow_cached, formula_rank, project_solution, solve_trivialization, verify_solution, Verdict,
};

#[derive(Parser)]
#[command(name = "nambu", version, about = "Kontsevich graph flows on Nambu-Poisson brackets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lift a graph set one dimension up and count the result
    Descendants(Common),
    /// Rank of the formula matrix of a graph set
    Rank(Common),
    /// Solve the trivialization equation over a graph set
    Solve(Common),
    /// Recompute the dimension-shift table and compare with the shipped values
    Table2(Common),
    /// Enumerate the 5D sunflower descendants
    Enumerate5d(Common),
    /// Solve at --dim, project the solution one dimension down and verify it there
    Project(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Target dimension; presets of lower dimension are lifted by descendants
    #[arg(long)]
    dim: Option<usize>,
    /// Named graph set(s), comma-separated
    #[arg(long)]
    preset: Option<String>,
    /// File with one encoding per line
    #[arg(long)]
    encodings: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for cached formulas and flows
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow runs that take minutes (anything in 4D)
    #[arg(long)]
    allow_long: bool,
}

enum Failure {
    Usage(String),
    Mismatch(Value),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Res = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.cmd {
        Cmd::Descendants(c) => (c, descendants(c)),
        Cmd::Rank(c) => (c, rank(c)),
        Cmd::Solve(c) => (c, solve(c)),
        Cmd::Table2(c) => (c, run_table2(c)),
        Cmd::Enumerate5d(c) => (c, enumerate5d(c)),
        Cmd::Project(c) => (c, project(c)),
    };
    match result {
        Ok(v) => emit(common, &v).unwrap_or_else(|e| e),
        Err(Failure::Mismatch(v)) => {
            let code = emit(common, &v).unwrap_or_else(|e| e);
            if code == ExitCode::SUCCESS {
                ExitCode::from(1)
            } else {
                code
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn emit(c: &Common, v: &Value) -> Result<ExitCode, ExitCode> {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n";
    match &c.out {
        Some(p) => fs::write(p, text).map_err(|e| {
            eprintln!("error: {}: {e}", p.display());
            ExitCode::from(1)
        })?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// The graph set named by --preset or --encodings, lifted to --dim.
fn load_graphs(c: &Common) -> Result<Vec<MicroGraphEncoding>, Failure> {
    let (mut graphs, base) = match (&c.preset, &c.encodings) {
        (Some(_), Some(_)) => return Err(Failure::Usage("give --preset or --encodings, not both".into())),
        (None, None) => return Err(Failure::Usage("a graph set is needed: --preset or --encodings".into())),
        (None, Some(path)) => {
            let d = c.dim.ok_or_else(|| Failure::Usage("--encodings needs --dim".into()))?;
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let list = parse_list(&text, d).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            (list, d)
        }
        (Some(names), None) => {
            let mut out = Vec::new();
            let mut base = None;
            for name in names.split(',').map(str::trim) {
                let d = preset_dim(name).ok_or_else(|| {
                    Failure::Usage(format!("unknown preset {name}; known: {}", PRESET_NAMES.join(", ")))
                })?;
                if base.is_some_and(|b| b != d) {
                    return Err(Failure::Usage("presets of different dimensions".into()));
                }
                base = Some(d);
                out.extend(preset(name).map_err(|e| Failure::Runtime(e.to_string()))?);
            }
            (out, base.unwrap())
        }
    };
    let target = c.dim.unwrap_or(base);
    if target < base {
        return Err(Failure::Usage(format!("cannot lower a {base}D set to {target}D")));
    }
    for _ in base..target {
        graphs = descendants_of_set(&graphs);
    }
    Ok(graphs)
}

fn require_long(c: &Common, d: usize, what: &str) -> Result<(), Failure> {
    if d >= 4 && !c.allow_long {
        return Err(Failure::Usage(format!(
            "{what} in {d}D takes several minutes and a few GB of memory on one core; pass --allow-long"
        )));
    }
    Ok(())
}

fn descendants(c: &Common) -> Res {
    let input = load_graphs(c)?;
    let d = input
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Failure::Usage("empty graph set".into()))?;
    if d >= 5 {
        return Err(Failure::Usage("descendants are defined up to 5D".into()));
    }
    let out = descendants_of_set(&input);
    let canonical = canonical_classes(&out);
    let zero = canonical.iter().filter(|g| g.is_zero_by_symmetry()).count();
    Ok(json!({
        "dim": d + 1,
        "n_input": input.len(),
        "n_descendants": out.len(),
        "n_canonical": canonical.len(),
        "n_zero_by_symmetry": zero,
        "descendants": out.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
    }))
}

fn rank(c: &Common) -> Res {
    let graphs = load_graphs(c)?;
    let d = graphs.first().map(|g| g.dim()).unwrap_or(0);
    let recs = evaluate_batch(&graphs, c.workers, c.cache.as_deref())?;
    let zeros: Vec<usize> = recs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.formula.is_zero())
        .map(|(i, _)| i + 1)
        .collect();
    let (rank, pivots, _) = formula_rank(&graphs, c.workers, c.cache.as_deref())?;
    Ok(json!({
        "dim": d,
        "n_graphs": graphs.len(),
        "rank": rank,
        "n_zero_formulas": zeros.len(),
        "zero_formulas": zeros,
        "pivot_graphs": pivots.iter().map(|&j| graphs[j].to_string()).collect::<Vec<_>>(),
    }))
}

fn solve(c: &Common) -> Res {
    let graphs = load_graphs(c)?;
    let d = graphs
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Failure::Usage("empty graph set".into()))?;
    require_long(c, d, "solving")?;
    let flow = compute_flow_cached(d, c.cache.as_deref())?;
    let r = solve_trivialization(&flow, &graphs, c.workers, c.cache.as_deref())?;
    let v = serde_json::to_value(&r)?;
    if r.verdict == Verdict::Solvable && !r.verified {
        return Err(Failure::Mismatch(v));
    }
    Ok(v)
}

fn run_table2(c: &Common) -> Res {
    if c.preset.is_some() || c.encodings.is_some() || c.dim.is_some_and(|d| d != 4) {
        return Err(Failure::Usage("table2 takes no graph set; its rows are fixed".into()));
    }
    let flow = if c.allow_long {
        Some(compute_flow_cached(4, c.cache.as_deref())?)
    } else {
        None
    };
    let golden = table2::golden();
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for (spec, gold) in ROWS.iter().zip(&golden) {
        let row = table2::compute_row(spec, flow.as_ref(), c.workers, c.cache.as_deref())?;
        mismatches.extend(table2::mismatches(&row, gold));
        rows.push(row);
    }
    let v = json!({
        "mode": if c.allow_long { "full" } else { "counts" },
        "rows": rows,
        "mismatches": mismatches,
    });
    if mismatches.is_empty() {
        Ok(v)
    } else {
        Err(Failure::Mismatch(v))
    }
}

fn enumerate5d(c: &Common) -> Res {
    if c.preset.is_some() || c.encodings.is_some() || c.dim.is_some_and(|d| d != 5) {
        return Err(Failure::Usage("enumerate5d takes no graph set".into()));
    }
    let list = enumerate_5d_sunflower();
    let lifted = descendants_of_set(&descendants_of_set(
        &preset("sunflower3d_full").map_err(|e| Failure::Runtime(e.to_string()))?,
    ));
    let mut a: Vec<_> = list.iter().collect();
    let mut b: Vec<_> = lifted.iter().collect();
    a.sort();
    b.sort();
    let agrees = a == b;
    let v = json!({
        "dim": 5,
        "n_graphs": list.len(),
        "n_canonical": canonical_classes(&list).len(),
        "equals_descendants_of_4d": agrees,
        "graphs": list.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
    });
    if agrees && list.len() == 1280 {
        Ok(v)
    } else {
        Err(Failure::Mismatch(v))
    }
}

fn project(c: &Common) -> Res {
    let graphs = if c.preset.is_none() && c.encodings.is_none() {
        let mut g = preset("sunflower3d_full").map_err(|e| Failure::Runtime(e.to_string()))?;
        for _ in 3..c.dim.unwrap_or(3) {
            g = descendants_of_set(&g);
        }
        g
    } else {
        load_graphs(c)?
    };
    let d = graphs
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Failure::Usage("empty graph set".into()))?;
    if d < 3 {
        return Err(Failure::Usage("project needs --dim 3 or more".into()));
    }
    require_long(c, d, "projecting")?;
    let cache: Option<&Path> = c.cache.as_deref();
    let flow = compute_flow_cached(d, cache)?;
    let r = solve_trivialization(&flow, &graphs, c.workers, cache)?;
    let Some(x) = &r.x else {
        return Err(Failure::Mismatch(
            json!({ "dim": d, "verdict": r.verdict, "projected_verified": false }),
        ));
    };
    let down = project_solution(x)?;
    let lower = compute_flow_cached(d - 1, cache)?;
    let ok = verify_solution(&lower, &down)?;
    let v = json!({
        "dim": d,
        "verdict": r.verdict,
        "verified": r.verified,
        "nullity": r.nullity,
        "projected_dim": d - 1,
        "projected_terms": down.n_terms(),
        "projected_verified": ok,
    });
    if r.verified && ok {
        Ok(v)
    } else {
        Err(Failure::Mismatch(v))
    }
}
