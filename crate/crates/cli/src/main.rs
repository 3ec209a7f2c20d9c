//! `qmcompress` command-line front end. Every command prints a JSON report
//! (or CSV for surfaces) and exits with status 0 only when all of its
//! internal checks pass; errors exit with status 2, failed checks with 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qmcompress::codes::{dependence_witness, pairwise_independence_check, sample_ensemble, CodeEnsembleSpec};
use qmcompress::lab::{covering_scaling, pruning_inequality_experiment, qubit_covering_instance, PruningSampler, Sampler};
use qmcompress::problem::{P2pSpec, ProblemSpec, SurfaceGrid};
use qmcompress::protocol::{simulate_distributed, simulate_p2p, ProtocolParams};
use qmcompress::regions::{fourier_motzkin_eliminate, r3_region, summarize_surface, surface_csv, surface_scan, RateRegion};
use qmcompress::{Error, Result};

/// Tolerance for comparing computed quantities with the reference values
/// stored in problem files.
const REFERENCE_TOL: f64 = 5e-4;

#[derive(Parser)]
#[command(name = "qmcompress", version, about = "Structured-code measurement compression at desk scale")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for operator checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Rate region, baseline and gain for a distributed problem file.
    Rates {
        spec: PathBuf,
    },
    /// Run a bundled example (1, 2 or 3).
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        id: u8,
        /// CSV destination for the surface of example 3.
        #[arg(long, default_value = "example3_surface.csv")]
        csv: PathBuf,
    },
    /// Gain indicator over a θ grid, as CSV.
    Surface {
        spec: PathBuf,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
    },
    /// Build the approximating measurement and report its faithfulness.
    Simulate(SimulateArgs),
    /// Covering experiment on the bundled qubit ensemble.
    Covering {
        #[arg(long, value_enum, default_value_t = SamplerKind::Both)]
        sampler: SamplerKind,
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 16, 64, 256])]
        m: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Generator rows of the coset sampler.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Pruning inequalities on Wishart samples.
    Pruning {
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long, default_value_t = 0.3)]
        eta: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Sample coset codes, check pairwise independence, find dependence.
    Ucc {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long = "N", default_value_t = 1)]
        big_n: usize,
        #[arg(long)]
        check_pairwise: bool,
        #[arg(long)]
        witness: bool,
    },
    /// Fourier-Motzkin elimination on a region file.
    Fm {
        /// Region JSON; alternatively `--r3-from` builds one from a problem.
        #[arg(long, required_unless_present = "r3_from")]
        region: Option<PathBuf>,
        #[arg(long, conflicts_with = "region")]
        r3_from: Option<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        eliminate: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerKind {
    Ucc,
    Iid,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    P2p,
    Distributed,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Mode::P2p)]
    mode: Mode,
    /// Problem file; point-to-point or distributed according to `--mode`.
    /// Defaults to the bundled problem (example 1 when distributed).
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    l: usize,
    #[arg(long, default_value_t = 2)]
    l2: usize,
    #[arg(long = "N", default_value_t = 1)]
    big_n: usize,
    /// Pruning margin; defaults to `min(0.5, 2/√m)` with `m` the mean
    /// codeword multiplicity.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    delta: f64,
}

struct Outcome {
    report: String,
    pass: bool,
}

fn json_outcome(value: &impl serde::Serialize, pass: bool) -> Result<Outcome> {
    Ok(Outcome { report: serde_json::to_string_pretty(value)? + "\n", pass })
}

fn rates(spec: ProblemSpec, tol: f64) -> Result<(Value, bool)> {
    let problem = spec.materialize()?;
    let report = problem.rates_report(tol)?;
    let pass = report.comparison.values().all(|c| c.abs_diff <= REFERENCE_TOL);
    Ok((serde_json::to_value(&report)?, pass))
}

fn comparison_table(report: &Value) -> String {
    let mut lines = vec![format!("{:<16} {:>10} {:>10} {:>10}", "quantity", "expected", "computed", "|diff|")];
    if let Some(map) = report.get("comparison").and_then(Value::as_object) {
        for (k, v) in map {
            let get = |f: &str| v.get(f).and_then(Value::as_f64).unwrap_or(f64::NAN);
            lines.push(format!("{k:<16} {:>10.4} {:>10.4} {:>10.1e}", get("expected"), get("computed"), get("abs_diff")));
        }
    }
    lines.join("\n")
}

fn surface(spec: &ProblemSpec, grid: &SurfaceGrid, tol: f64) -> Result<(String, qmcompress::regions::SurfaceSummary)> {
    let problem = spec.materialize()?;
    problem.check(tol)?;
    let axis = grid.axis();
    let points = surface_scan(&problem.surface_setup(), &axis, tol)?;
    Ok((surface_csv(&points)?, summarize_surface(&points, axis.len())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn simulate(args: &SimulateArgs, shared: &Shared) -> Result<Outcome> {
    let mut params = ProtocolParams {
        n: args.n,
        k: args.k,
        l: args.l,
        l2: args.l2,
        p: 2,
        big_n: args.big_n,
        eta: 0.1,
        delta: args.delta,
        seed: shared.seed,
    };
    let finish = |params: &mut ProtocolParams, p: u64| {
        params.p = p;
        match args.eta {
            Some(eta) => params.eta = eta,
            None => *params = params.clone().with_multiplicity_eta(2.0, 0.5),
        }
    };
    let report = match args.mode {
        Mode::P2p => {
            let spec = match &args.problem {
                Some(path) => P2pSpec::load(path)?,
                None => P2pSpec::bundled()?,
            };
            let problem = spec.materialize()?;
            finish(&mut params, problem.p);
            simulate_p2p(&params, &problem.m, &problem.rho, &problem.p_zw)?
        }
        Mode::Distributed => {
            let spec = match &args.problem {
                Some(path) => ProblemSpec::load(path)?,
                None => ProblemSpec::bundled(1)?,
            };
            let problem = spec.materialize()?;
            problem.check(shared.tolerance)?;
            finish(&mut params, spec.p);
            simulate_distributed(
                &params,
                &problem.m_a,
                &problem.m_b,
                &problem.rho_ab,
                &spec.p_zst,
                spec.p,
                &spec.f_s,
                &spec.f_t,
                &spec.p_zw,
            )?
        }
    };
    let pass = report.subpovm_defect <= shared.tolerance;
    json_outcome(&report, pass)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let shared = &cli.shared;
    match &cli.command {
        Command::Rates { spec } => {
            let (value, pass) = rates(ProblemSpec::load(spec)?, shared.tolerance)?;
            json_outcome(&value, pass)
        }
        Command::Example { id, csv } => {
            let spec = ProblemSpec::bundled(*id as usize)?;
            if *id == 3 {
                let grid = spec.surface.clone().unwrap_or_default();
                let (text, summary) = surface(&spec, &grid, shared.tolerance)?;
                write_file(csv, &text)?;
                let pass = summary.sign_changes > 0 && summary.theta3_symmetry_defect <= shared.tolerance;
                let value = json!({ "name": spec.name, "csv": csv, "summary": summary });
                return json_outcome(&value, pass);
            }
            let (value, pass) = rates(spec, shared.tolerance)?;
            eprintln!("{}", comparison_table(&value));
            json_outcome(&value, pass)
        }
        Command::Surface { spec, points, lo, hi } => {
            let spec = ProblemSpec::load(spec)?;
            let mut grid = spec.surface.clone().unwrap_or_default();
            grid.points = points.unwrap_or(grid.points);
            grid.lo = lo.unwrap_or(grid.lo);
            grid.hi = hi.unwrap_or(grid.hi);
            let (text, summary) = surface(&spec, &grid, shared.tolerance)?;
            eprintln!("{}", serde_json::to_string(&summary)?);
            Ok(Outcome { report: text, pass: true })
        }
        Command::Simulate(args) => simulate(args, shared),
        Command::Covering { sampler, m, trials, eps, k } => {
            let inst = qubit_covering_instance(*eps)?;
            let samplers: Vec<Sampler> = match sampler {
                SamplerKind::Ucc => vec![Sampler::Ucc { p: 2, n: 2, k: *k }],
                SamplerKind::Iid => vec![Sampler::Iid],
                SamplerKind::Both => vec![Sampler::Ucc { p: 2, n: 2, k: *k }, Sampler::Iid],
            };
            let reports = samplers
                .into_iter()
                .map(|s| covering_scaling(&inst, s, m, *trials, shared.seed))
                .collect::<Result<Vec<_>>>()?;
            let pass = reports.iter().all(|r| r.pass);
            json_outcome(&json!({ "kappa": inst.kappa, "d": inst.d, "D": inst.big_d, "eps": inst.eps, "runs": reports }), pass)
        }
        Command::Pruning { dim, rank, eta, trials } => {
            let report = pruning_inequality_experiment(&PruningSampler::Wishart { dim: *dim, rank: *rank }, *trials, *eta, shared.seed)?;
            let pass = report.pass;
            json_outcome(&report, pass)
        }
        Command::Ucc { p, n, k, l, big_n, check_pairwise, witness } => {
            let codes = sample_ensemble(&CodeEnsembleSpec { p: *p, n: *n, k: *k, l: *l, big_n: *big_n, seed: shared.seed })?;
            let mut value = json!({ "codes": codes });
            let mut pass = true;
            if *check_pairwise {
                let report = pairwise_independence_check(*p, *n, *k, *l)?;
                pass &= report.pass;
                value["pairwise"] = serde_json::to_value(report)?;
            }
            if *witness {
                value["witness"] = serde_json::to_value(dependence_witness(*p, *n, *k, *l)?)?;
            }
            json_outcome(&value, pass)
        }
        Command::Fm { region, r3_from, eliminate } => {
            let mut current: RateRegion = match (region, r3_from) {
                (Some(path), _) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                (None, Some(path)) => r3_region(&ProblemSpec::load(path)?.materialize()?.quantities()?),
                (None, None) => return Err(Error::Argument("a region is required".into())),
            };
            current.validate()?;
            for var in eliminate {
                current = fourier_motzkin_eliminate(&current, var)?;
            }
            json_outcome(&current, true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let written = match &cli.shared.out {
                Some(path) => write_file(path, &outcome.report),
                None => {
                    print!("{}", outcome.report);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
