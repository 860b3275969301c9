//! `mk`: batch front-end for mk-core.
//!
//! Exit codes: 0 success, 1 computational or scenario failure, 2 usage error.

mod config;
mod emit;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mk_core::estimation::{analyze, qcrb_scalar, qfim_pure, saturation_check, LabeledMatrix, QcrbScalar};
use mk_core::montecarlo::{mom_estimate_multi, mom_estimate_single, EstimationRun};
use mk_core::operators::{algebra_by_name, with_quadratics, ObservableVector};
use mk_core::scenarios::{self, ParamValue, Params};
use mk_core::states::{make_state, StateSpec, StateVector};
use mk_core::Error;
use serde::{Deserialize, Serialize};

use config::{expand_grid, parse_grid, parse_param, split_labels, ConfigFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
pub struct UsageError(pub String);

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::CutoffInsufficient { .. }
            | Error::CutoffLimit { .. }
            | Error::UnknownScenario(_)
            | Error::BasisMismatch { .. }
            | Error::Unsupported(_)
            | Error::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "mk",
    version,
    about = "Multiparameter precision analysis on truncated Fock spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads, 0 for automatic.
    #[arg(long, global = true, env = "MK_THREADS")]
    threads: Option<usize>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// JSON run configuration; flags take precedence over its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct StateArgs {
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zeta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    tail_tol: Option<f64>,
    /// Extra parameter, repeatable: --param key=value
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, ParamValue)>,
}

impl StateArgs {
    fn numeric(&self) -> Vec<(&'static str, f64)> {
        [
            ("n", self.n),
            ("k", self.k),
            ("alpha", self.alpha),
            ("zeta", self.zeta),
            ("r", self.r),
            ("xi", self.xi),
            ("cutoff", self.cutoff),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    fn spec(&self, cfg: &ConfigFile) -> Result<StateSpec, UsageError> {
        let mut spec = cfg.state.clone().unwrap_or_else(|| StateSpec::new(""));
        if let Some(f) = &self.family {
            spec.family = f.clone();
        }
        if spec.family.is_empty() {
            return Err(UsageError("no state family given (--family or config `state`)".into()));
        }
        for (k, v) in self.numeric() {
            spec.params.insert(k.to_string(), v);
        }
        for (k, v) in &self.params {
            match v {
                ParamValue::Num(x) => {
                    spec.params.insert(k.clone(), *x);
                }
                ParamValue::Text(t) => {
                    return Err(UsageError(format!("state parameter `{k}` must be numeric, got `{t}`")))
                }
            }
        }
        if self.tail_tol.is_some() {
            spec.tail_tol = self.tail_tol;
        }
        Ok(spec)
    }

    fn scenario_params(&self, cfg: &ConfigFile) -> Params {
        let mut p = cfg.params.clone().unwrap_or_default();
        if let Some(f) = &self.family {
            p.insert("family".into(), ParamValue::Text(f.clone()));
        }
        for (k, v) in self.numeric() {
            p.insert(k.to_string(), ParamValue::Num(v));
        }
        if let Some(t) = self.tail_tol {
            p.insert("tail_tol".into(), ParamValue::Num(t));
        }
        for (k, v) in &self.params {
            p.insert(k.clone(), v.clone());
        }
        p
    }
}

#[derive(Args)]
struct ObservableArgs {
    /// su2, su11, su11_single, hw or gaussian_full.
    #[arg(long)]
    algebra: Option<String>,
    /// Generator labels, comma separated or repeated.
    #[arg(long)]
    target: Vec<String>,
}

impl ObservableArgs {
    fn algebra(&self, cfg: &ConfigFile) -> String {
        self.algebra
            .clone()
            .or_else(|| cfg.algebra.clone())
            .unwrap_or_else(|| "su2".into())
    }

    fn targets(&self, cfg: &ConfigFile) -> Option<Vec<String>> {
        if !self.target.is_empty() {
            Some(split_labels(&self.target))
        } else {
            cfg.target.clone()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information matrix of a pure probe.
    Qfim {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        obs: ObservableArgs,
        /// Parameter point, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
    },
    /// Method-of-moments precision report.
    Mom {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        obs: ObservableArgs,
        /// Measure the generators only, without their quadratic products.
        #[arg(long)]
        linear: bool,
    },
    /// Run one named scenario.
    Scenario {
        name: String,
        #[command(flatten)]
        state: StateArgs,
        /// Report runtime_ms as 0 so output is reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run a scenario over a parameter grid and fit the scaling exponent.
    Sweep {
        name: String,
        #[command(flatten)]
        state: StateArgs,
        /// Grid axis, repeatable: --grid n=4,8,16
        #[arg(long, value_parser = parse_grid)]
        grid: Vec<(String, Vec<ParamValue>)>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Monte-Carlo method-of-moments estimation.
    Mc {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        obs: ObservableArgs,
        /// Measured observables, one per target.
        #[arg(long)]
        measure: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Vec<f64>,
        /// Shots per batch and observable.
        #[arg(long)]
        nu: Option<u64>,
        #[arg(long)]
        batches: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Registered scenario names.
    List,
}

#[derive(Serialize)]
struct QfimOutput {
    family: String,
    nbar: f64,
    algebra: String,
    theta: Vec<f64>,
    qfim: LabeledMatrix,
    diag: Vec<f64>,
    qcrb: Option<QcrbScalar>,
    /// Largest |⟨[H̃_j, H̃_k]⟩|; zero when the bound is saturable.
    commutator_max: f64,
}

#[derive(Serialize)]
struct ListEntry<'a> {
    name: &'a str,
    summary: &'a str,
}

struct Output {
    bytes: Vec<u8>,
    ok: bool,
}

fn generators(state: &StateVector, algebra: &str, targets: Option<&[String]>) -> Result<ObservableVector, Failure> {
    let base = algebra_by_name(algebra, state.basis())?;
    Ok(match targets {
        Some(t) => base.select(&t.iter().map(String::as_str).collect::<Vec<_>>())?,
        None => base,
    })
}

fn theta_for(theta: Vec<f64>, cfg: &ConfigFile, count: usize) -> Result<Vec<f64>, Failure> {
    let theta = if theta.is_empty() {
        cfg.theta.clone().unwrap_or_default()
    } else {
        theta
    };
    if theta.is_empty() {
        return Ok(vec![0.0; count]);
    }
    if theta.len() != count {
        return Err(Failure::Usage(format!(
            "theta has {} entries for {count} targets",
            theta.len()
        )));
    }
    Ok(theta)
}

fn run(cli: Cli, cfg: &ConfigFile, format: Format) -> Result<Output, Failure> {
    let ok = |bytes| Ok(Output { bytes, ok: true });
    match cli.command {
        Command::List => {
            let items = scenarios::list();
            match format {
                Format::Json => {
                    let v: Vec<ListEntry> = items
                        .iter()
                        .map(|(name, summary)| ListEntry { name, summary })
                        .collect();
                    ok(emit::json(&v))
                }
                Format::Csv => ok(emit::list_csv(&items)),
            }
        }
        Command::Qfim { state, obs, theta } => {
            let s = make_state(&state.spec(cfg)?)?;
            let algebra = obs.algebra(cfg);
            let h = generators(&s, &algebra, obs.targets(cfg).as_deref())?;
            let theta = theta_for(theta, cfg, h.len())?;
            let f = qfim_pure(&s, &h, &theta)?;
            let comm = saturation_check(&s, &h, &theta)?;
            let qfim = LabeledMatrix::square(&h.labels(), &f);
            let out = QfimOutput {
                family: s.meta.family.clone(),
                nbar: s.meta.nbar,
                algebra,
                theta,
                diag: qfim.diagonal(),
                qcrb: qcrb_scalar(&f).ok(),
                commutator_max: comm.amax(),
                qfim,
            };
            match format {
                Format::Json => ok(emit::json(&out)),
                Format::Csv => ok(emit::matrix_csv(&out.qfim)),
            }
        }
        Command::Mom { state, obs, linear } => {
            let s = make_state(&state.spec(cfg)?)?;
            let base = algebra_by_name(&obs.algebra(cfg), s.basis())?;
            let targets = obs.targets(cfg).unwrap_or_else(|| base.labels());
            let a = if linear || base.len() != 3 {
                base
            } else {
                with_quadratics(&base)?
            };
            let t: Vec<&str> = targets.iter().map(String::as_str).collect();
            let rep = analyze(&s, &a, &t, None)?;
            match format {
                Format::Json => ok(emit::json(&rep)),
                Format::Csv => ok(emit::matrix_csv(&rep.precision_inv)),
            }
        }
        Command::Scenario { name, state, no_timing } => {
            let mut r = scenarios::run_scenario(&name, &state.scenario_params(cfg))?;
            if no_timing {
                r.runtime_ms = 0;
            }
            let bytes = match format {
                Format::Json => emit::json(&r),
                Format::Csv => emit::scenario_csv(std::slice::from_ref(&r), None),
            };
            Ok(Output { bytes, ok: r.passed })
        }
        Command::Sweep {
            name,
            state,
            grid,
            no_timing,
        } => {
            let mut axes: BTreeMap<String, Vec<ParamValue>> = cfg.grid.clone().unwrap_or_default();
            axes.extend(grid);
            if axes.is_empty() {
                return Err(Failure::Usage("sweep needs at least one --grid axis".into()));
            }
            let points = expand_grid(&state.scenario_params(cfg), &axes);
            let mut s = scenarios::sweep(&name, &points)?;
            if no_timing {
                s.points.iter_mut().for_each(|p| p.runtime_ms = 0);
            }
            let bytes = match format {
                Format::Json => emit::json(&s),
                Format::Csv => emit::scenario_csv(&s.points, s.slope),
            };
            Ok(Output { bytes, ok: s.passed })
        }
        Command::Mc {
            state,
            obs,
            measure,
            theta,
            nu,
            batches,
            seed,
        } => {
            let s = make_state(&state.spec(cfg)?)?;
            let algebra = obs.algebra(cfg);
            let targets = obs
                .targets(cfg)
                .ok_or_else(|| Failure::Usage("mc needs --target generators".into()))?;
            let measure = if measure.is_empty() {
                cfg.measure.clone().unwrap_or_default()
            } else {
                split_labels(&measure)
            };
            if measure.len() != targets.len() {
                return Err(Failure::Usage(format!(
                    "mc needs one measured observable per target ({} targets, {} observables)",
                    targets.len(),
                    measure.len()
                )));
            }
            let base = algebra_by_name(&algebra, s.basis())?;
            let pool = if base.len() == 3 {
                with_quadratics(&base)?
            } else {
                base.clone()
            };
            let h = base.select(&targets.iter().map(String::as_str).collect::<Vec<_>>())?;
            let m = pool.select(&measure.iter().map(String::as_str).collect::<Vec<_>>())?;
            let theta = theta_for(theta, cfg, h.len())?;
            let nu = nu.or(cfg.nu).unwrap_or(1000);
            let batches = batches.or(cfg.batches).unwrap_or(200);
            let seed = seed.or(cfg.seed).unwrap_or(0);
            if nu == 0 || batches < 2 {
                return Err(Failure::Usage("mc needs nu >= 1 and batches >= 2".into()));
            }
            let run: EstimationRun = if h.len() == 1 {
                mom_estimate_single(h.get(0), m.get(0), &s, theta[0], nu, batches, seed)?
            } else {
                mom_estimate_multi(&h, &m, &s, &theta, nu, batches, seed)?
            };
            match format {
                Format::Json => ok(emit::json(&run)),
                Format::Csv => ok(emit::estimates_csv(&h.labels(), &run.estimates)),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let cfg = match &cli.config {
        Some(p) => match ConfigFile::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("mk: {}", e.0);
                return ExitCode::from(2);
            }
        },
        None => ConfigFile::default(),
    };
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("mk: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let format = cli.format.or(cfg.format).unwrap_or(Format::Json);
    let out_path = cli.out.clone().or_else(|| cfg.out.clone());

    let output = match run(cli, &cfg, format) {
        Ok(o) => o,
        Err(Failure::Usage(msg)) => {
            eprintln!("mk: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("mk: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = match &out_path {
        Some(p) => std::fs::write(p, &output.bytes),
        None => std::io::stdout().write_all(&output.bytes),
    };
    if let Err(e) = written {
        eprintln!("mk: write failed: {e}");
        return ExitCode::from(1);
    }
    if output.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
