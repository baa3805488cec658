//! Batch front end: load an instance, configure the solver, run it and write
//! a solution file, a bound trace and a one-line summary.

pub mod overrides;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use fwbnb::bnb::{solve, RunTrace, Settings, SolveResult, SolvingStage};
use fwbnb::error::SolveError;
use fwbnb::fw::Objective;
use fwbnb::lmo::SelfManagedLmo;
use fwbnb::polytopes::HypercubeLmo;
use fwbnb::problems::generators::{
    gaussian_matrix, random_geometric_network, random_regular_graph, random_relabeling, rng_from_seed,
    GeometricNetworkParams,
};
use fwbnb::problems::gip::{self, petersen, relabel, Verdict, PETERSEN_RELABELING};
use rand::Rng;

use schema::{
    CriterionSpec, CubeQuadraticFile, GraphIsomorphismFile, InstanceFile, NetworkDesignFile, OedpFile, Overrides,
};

pub const TRACE_HEADER: [&str; 4] = ["time_s", "nodes", "lb", "ub"];
pub const SOLUTION_FILE: &str = "solution.json";
pub const TRACE_FILE: &str = "trace.csv";

/// Exit codes: solved or certified, limit reached, error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_LIMIT: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// `key=value` overrides, applied after the instance file's own.
    pub set: Vec<String>,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
    pub seed: u64,
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub kind: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    pub objective: Option<f64>,
    pub lower_bound: f64,
    pub x: Option<Vec<f64>>,
    pub nodes: usize,
    pub lmo_calls: usize,
    pub fw_iterations: usize,
    pub time_s: f64,
    pub incumbent_found_at_node: Option<usize>,
    pub postprocessing_improved: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub exit_code: i32,
    pub summary: String,
    pub solution: SolutionFile,
    pub trace: RunTrace,
}

fn settings_for(inst: &InstanceFile, base: Settings, opts: &RunOptions) -> Result<Settings> {
    let mut s = base;
    apply_file_overrides(&mut s, inst.settings())?;
    overrides::apply_all(&mut s, opts.set.iter().map(String::as_str))?;
    if let Some(t) = opts.time_limit_s {
        s.tolerances.time_limit_s = Some(t);
    }
    if let Some(n) = opts.node_limit {
        s.tolerances.node_limit = Some(n);
    }
    s.heuristics.seed = opts.seed;
    s.branch_and_bound.verbose |= opts.verbose;
    Ok(s)
}

fn apply_file_overrides(s: &mut Settings, o: &Overrides) -> Result<()> {
    for (k, v) in o {
        overrides::apply(s, k, &overrides::json_to_text(v)).with_context(|| format!("instance setting `{k}`"))?;
    }
    Ok(())
}

/// `Ok(None)` when the root is infeasible.
fn solve_or_infeasible<O, L>(obj: &O, lmo: L, settings: Settings) -> Result<Option<(Option<Vec<f64>>, SolveResult)>>
where
    O: Objective + ?Sized,
    L: SelfManagedLmo,
{
    match solve(obj, lmo, settings) {
        Ok(out) => Ok(Some((out.x, out.result))),
        Err(SolveError::Infeasible) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn exit_code_for(status: SolvingStage, verdict: Option<Verdict>) -> i32 {
    match status {
        SolvingStage::OptimalReached | SolvingStage::Infeasible => EXIT_OK,
        SolvingStage::UserStop => match verdict {
            Some(Verdict::Isomorphic | Verdict::NonIsomorphic) => EXIT_OK,
            _ => EXIT_LIMIT,
        },
        SolvingStage::TimeLimit | SolvingStage::NodeLimit | SolvingStage::Solving => EXIT_LIMIT,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"))
}

/// Loads, solves and writes `solution.json` and `trace.csv` into the output
/// directory.
pub fn run(instance: &Path, opts: &RunOptions) -> Result<RunReport> {
    let inst = InstanceFile::load(instance)?;
    run_instance(&inst, opts)
}

pub fn run_instance(inst: &InstanceFile, opts: &RunOptions) -> Result<RunReport> {
    let outcome = match inst {
        InstanceFile::CubeQuadratic(f) => {
            let obj = f.objective()?;
            let lmo = HypercubeLmo::new(
                f.lower.iter().map(|&v| v as f64).collect(),
                f.upper.iter().map(|&v| v as f64).collect(),
            )
            .managed();
            solve_or_infeasible(&obj, lmo, settings_for(inst, Settings::default(), opts)?)?
        }
        InstanceFile::NetworkDesign(f) => {
            let nd = f.problem()?;
            let lmo = nd.lmo();
            solve_or_infeasible(&nd, lmo, settings_for(inst, Settings::default(), opts)?)?
        }
        InstanceFile::GraphIsomorphism(f) => {
            let g = f.problem()?;
            let lmo = g.lmo();
            solve_or_infeasible(&g, lmo, settings_for(inst, g.settings(), opts)?)?
        }
        InstanceFile::Oedp(f) => {
            let p = Arc::new(f.problem()?);
            let base = match p.settings() {
                Ok(s) => Some(s),
                // no domain-feasible point at the root
                Err(fwbnb::error::ProblemError::DomainViolation) => None,
                Err(e) => return Err(e.into()),
            };
            match base {
                Some(b) => solve_or_infeasible(p.as_ref(), p.lmo(), settings_for(inst, b, opts)?)?,
                None => None,
            }
        }
    };
    let kind = inst.kind().to_string();
    let (solution, trace, verdict, status) = match outcome {
        Some((x, r)) => {
            let verdict = matches!(inst, InstanceFile::GraphIsomorphism(_)).then(|| gip::verdict(&r));
            let sol = SolutionFile {
                kind: kind.clone(),
                status: r.status.as_str().to_string(),
                verdict: verdict.map(|v| v.as_str().to_string()),
                objective: r.primal,
                lower_bound: r.dual_bound,
                x,
                nodes: r.nodes,
                lmo_calls: r.lmo_calls,
                fw_iterations: r.fw_iterations,
                time_s: r.time_s,
                incumbent_found_at_node: r.incumbent_found_at_node,
                postprocessing_improved: r.postprocessing_improved,
            };
            (sol, r.trace, verdict, r.status)
        }
        None => (
            SolutionFile {
                kind: kind.clone(),
                status: SolvingStage::Infeasible.as_str().to_string(),
                verdict: None,
                objective: None,
                lower_bound: f64::INFINITY,
                x: None,
                nodes: 0,
                lmo_calls: 0,
                fw_iterations: 0,
                time_s: 0.0,
                incumbent_found_at_node: None,
                postprocessing_improved: false,
            },
            RunTrace::default(),
            None,
            SolvingStage::Infeasible,
        ),
    };
    let exit_code = exit_code_for(status, verdict);
    let label = verdict.map_or(status.as_str(), Verdict::as_str);
    let summary = format!(
        "{kind}: {label} objective={} lower_bound={} nodes={} time_s={:.3}",
        fmt_opt(solution.objective),
        fmt_opt(Some(solution.lower_bound)),
        solution.nodes,
        solution.time_s
    );
    fs::create_dir_all(&opts.out_dir).with_context(|| format!("creating {}", opts.out_dir.display()))?;
    write_solution(&opts.out_dir.join(SOLUTION_FILE), &solution)?;
    write_trace(&opts.out_dir.join(TRACE_FILE), &trace)?;
    Ok(RunReport {
        exit_code,
        summary,
        solution,
        trace,
    })
}

fn write_solution(path: &Path, sol: &SolutionFile) -> Result<()> {
    // serde_json has no representation for infinite bounds
    let mut value = serde_json::to_value(sol).context("serializing solution")?;
    if !sol.lower_bound.is_finite() {
        value["lower_bound"] = serde_json::Value::String(format!("{}", sol.lower_bound));
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(TRACE_HEADER)?;
    for row in &trace.rows {
        w.write_record([
            row.time_s.to_string(),
            row.nodes.to_string(),
            row.lb.to_string(),
            row.ub.map(|u| u.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<(f64, usize, f64, Option<f64>)>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != TRACE_HEADER {
        bail!("unexpected trace header in {}", path.display());
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let ub = match &rec[3] {
                "" => None,
                s => Some(s.parse()?),
            };
            Ok((rec[0].parse()?, rec[1].parse()?, rec[2].parse()?, ub))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GipPair {
    /// Random regular graph and a random relabeling of it.
    Isomorphic,
    /// Two independent random regular graphs.
    Independent,
    /// The Petersen graph and its fixed second drawing.
    Petersen,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerateSpec {
    CubeQuadratic { n: usize, width: i64 },
    NetworkDesign(GeometricNetworkParams),
    GraphIsomorphism { n: usize, degree: usize, pair: GipPair },
    Oedp { m: usize, n: usize, budget: usize, upper: usize, criterion: CriterionSpec },
}

pub fn generate(spec: &GenerateSpec, seed: u64) -> Result<InstanceFile> {
    let mut rng = rng_from_seed(seed);
    let inst = match *spec {
        GenerateSpec::CubeQuadratic { n, width } => {
            if n == 0 || width < 1 {
                bail!("cube_quadratic needs n >= 1 and width >= 1");
            }
            let m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let q = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
                        .collect()
                })
                .collect();
            InstanceFile::CubeQuadratic(CubeQuadraticFile {
                q,
                c: (0..n).map(|_| rng.gen_range(0.0..width as f64)).collect(),
                lower: vec![0; n],
                upper: vec![width; n],
                settings: Overrides::new(),
            })
        }
        GenerateSpec::NetworkDesign(params) => {
            if params.num_nodes < 2 || params.num_demands == 0 || params.radius < 0.0 {
                bail!("network_design needs at least 2 nodes, 1 demand and a nonnegative radius");
            }
            InstanceFile::NetworkDesign(NetworkDesignFile::from_instance(&random_geometric_network(&params, &mut rng)))
        }
        GenerateSpec::GraphIsomorphism { n, degree, pair } => {
            let (a, b) = match pair {
                GipPair::Petersen => {
                    let a = petersen();
                    let b = relabel(&a, &PETERSEN_RELABELING);
                    (a, b)
                }
                _ => {
                    if degree >= n || (n * degree) % 2 == 1 {
                        bail!("no {degree}-regular graph on {n} vertices");
                    }
                    let a = random_regular_graph(n, degree, &mut rng);
                    let b = match pair {
                        GipPair::Isomorphic => random_relabeling(&a, &mut rng).0,
                        _ => random_regular_graph(n, degree, &mut rng),
                    };
                    (a, b)
                }
            };
            InstanceFile::GraphIsomorphism(GraphIsomorphismFile {
                a,
                b,
                settings: Overrides::new(),
            })
        }
        GenerateSpec::Oedp {
            m,
            n,
            budget,
            upper,
            criterion,
        } => {
            if n == 0 || m < n || budget < n || m * upper < budget {
                bail!("oedp needs m >= n >= 1, budget >= n and m * upper >= budget");
            }
            let a = gaussian_matrix(m, n, &mut rng);
            InstanceFile::Oedp(OedpFile {
                a: (0..m).map(|i| a.row(i).iter().copied().collect()).collect(),
                budget,
                upper: vec![upper; m],
                criterion,
                settings: Overrides::new(),
            })
        }
    };
    inst.validate()?;
    Ok(inst)
}

pub fn generate_to(spec: &GenerateSpec, seed: u64, out: &Path) -> Result<()> {
    let inst = generate(spec, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, inst.to_json()).with_context(|| format!("writing {}", out.display()))
}
