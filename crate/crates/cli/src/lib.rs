//! Command implementations for the `geodrat` binary.
//!
//! Exit codes: 0 for a definite result, 2 for an inconclusive verdict, 1 for errors.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use geodrat_core::criterion::{CriterionError, DeriveError};
use geodrat_core::expr::ExprError;
use geodrat_core::flow::{FlowError, PhaseState};
use geodrat_core::geometry::GeometryError;
use geodrat_core::killing::KillingError;
use serde::Serialize;

pub use commands::{
    cmd_analyze, cmd_derive, cmd_examples, cmd_geodesic, cmd_rkv, cmd_verify, AnalyzeOutput, DeriveOutput, GeodesicOutput, IntegralSpec, RkvMode, RkvOutput,
    RkvRequest, VerifyOutput,
};
pub use config::{parse_grid, parse_param, RunConfig};

pub const TOOL: &str = "geodrat";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "GEODRAT_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown example {0:?}; run `geodrat examples` for the list")]
    UnknownExample(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("derivation checksum mismatch:\n{0}")]
    Checksum(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Killing(#[from] KillingError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "geodrat", version, about = "Fractional-linear first integrals of geodesic flows on surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Metric selection and shared overrides.
#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// Built-in example, see `geodrat examples`.
    #[arg(long, conflicts_with = "metric")]
    pub example: Option<String>,
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub metric: Option<PathBuf>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
    /// Criterion grid size, at least 5 × 5.
    #[arg(long, value_name = "NX,NY")]
    pub grid: Option<String>,
    /// Median band for Φ = 0; the p95 band scales with it.
    #[arg(long)]
    pub tol_phi_accept: Option<f64>,
    /// Lower bound on min Φ for Φ ≠ 0.
    #[arg(long)]
    pub tol_phi_reject: Option<f64>,
    /// Seed of random start points and samples.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the shortcut for metrics of revolution.
    #[arg(long)]
    pub no_fast_path: bool,
    /// Directory receiving the report files.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Output format on stdout; JSON by default, CSV for `geodesic`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    pub fn example(name: &str) -> Common {
        Common { example: Some(name.to_string()), ..Common::default() }
    }

    /// The run configuration after command-line overrides.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.example, &self.metric) {
            (Some(name), None) => RunConfig::for_example(name),
            (None, Some(path)) => RunConfig::load(path)?,
            (None, None) => return Err(CliError::Config("give --example NAME or --metric FILE".into())),
            (Some(_), Some(_)) => return Err(CliError::Config("--example and --metric are exclusive".into())),
        };
        for p in &self.params {
            let (k, v) = parse_param(p)?;
            cfg.params.insert(k, v);
        }
        if let Some(g) = &self.grid {
            cfg.grid = parse_grid(g)?;
        }
        if let Some(t) = self.tol_phi_accept {
            // keep the p95 band at its ratio to the median band
            let ratio = cfg.tolerances.phi_accept_p95 / cfg.tolerances.phi_accept;
            cfg.tolerances.phi_accept = t;
            cfg.tolerances.phi_accept_p95 = t * ratio;
        }
        if let Some(t) = self.tol_phi_reject {
            cfg.tolerances.phi_reject = t;
        }
        if let Some(s) = self.seed {
            cfg.batch.seed = s;
        }
        if self.no_fast_path {
            cfg.fast_path = false;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `F = P/Q` with `P = u p + v q`, `Q = w p + r q`.
#[derive(Clone, Debug, Default, Args)]
pub struct IntegralArgs {
    /// Coefficient functions of `x`, `y`; a known pair for the example by default.
    #[arg(long, requires_all = ["v", "w", "r"])]
    pub u: Option<String>,
    #[arg(long, requires_all = ["u", "w", "r"])]
    pub v: Option<String>,
    #[arg(long, requires_all = ["u", "v", "r"])]
    pub w: Option<String>,
    #[arg(long, requires_all = ["u", "v", "w"])]
    pub r: Option<String>,
}

impl IntegralArgs {
    pub fn spec(&self) -> Option<IntegralSpec> {
        Some(IntegralSpec { u: self.u.clone()?, v: self.v.clone()?, w: self.w.clone()?, r: self.r.clone()? })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the criterion and report the verdict.
    Analyze(Common),
    /// Test conservation of a given integral on a batch of geodesics.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        integral: IntegralArgs,
        /// Number of random trajectories.
        #[arg(long)]
        count: Option<usize>,
        /// Integration time.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Derive the polynomial system and print its checksums.
    Derive {
        /// Directory receiving the full dump.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Solve the relative Killing system on the analysis rectangle.
    Rkv {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = RkvMode::GivenCofactor)]
        mode: RkvMode,
        /// Initial `u`, `v`, `f` on the bottom row for `ck`, as functions of `x`.
        #[arg(long, default_value = "1")]
        u0: String,
        #[arg(long, default_value = "0")]
        v0: String,
        #[arg(long, default_value = "0")]
        f0: String,
        /// Initial `w` on the bottom row for `characteristics`.
        #[arg(long, default_value = "0")]
        w0: String,
        /// Cofactor `(a, b)` for `given-cofactor`; the example's own when omitted.
        #[arg(long, requires = "b")]
        a: Option<String>,
        #[arg(long, requires = "a")]
        b: Option<String>,
        /// Values `U,V` of the solution at the grid centre.
        #[arg(long, value_name = "U,V", default_value = "1,0")]
        cauchy: String,
        /// Strip height of the marching modes.
        #[arg(long)]
        height: Option<f64>,
    },
    /// Integrate one geodesic and write it as CSV.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        integral: IntegralArgs,
        /// Initial state `X,Y,P,Q`; a seeded random unit-speed state otherwise.
        #[arg(long, value_name = "X,Y,P,Q")]
        state: Option<String>,
        /// Integration time.
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// List the built-in examples.
    Examples {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Every JSON report carries the tool version and the full configuration.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Option<&'a RunConfig>,
    pub result: &'a T,
}

pub fn to_json<T: Serialize>(command: &'static str, config: Option<&RunConfig>, result: &T) -> Result<String, CliError> {
    let env = Envelope { tool: TOOL, version: VERSION, command, config, result };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

/// What a command printed and the exit code it asks for.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub exit: i32,
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn floats<const N: usize>(text: &str, what: &str) -> Result<[f64; N], CliError> {
    let vals: Vec<f64> = text.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| CliError::Config(format!("{what}: cannot parse {text:?}")))?;
    vals.try_into().map_err(|_| CliError::Config(format!("{what}: expected {N} comma-separated numbers")))
}

/// `GEODRAT_THREADS`, when set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Caps the global worker pool at `GEODRAT_THREADS`.
pub fn init_threads() {
    if let Some(n) = threads_from_env() {
        // a pool that is already built keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Output text in the chosen format, also written to the `out` directory when given.
fn emit(out: Option<&Path>, stem: &str, format: Format, json: String, csv: Option<String>) -> Result<String, CliError> {
    if let Some(dir) = out {
        write_file(dir, &format!("{stem}.json"), &json)?;
        if let Some(c) = &csv {
            write_file(dir, &format!("{stem}.csv"), c)?;
        }
    }
    Ok(match (format, csv) {
        (Format::Csv, Some(c)) => c,
        _ => json,
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Analyze(common) => {
            let cfg = common.config()?;
            let res = cmd_analyze(&cfg)?;
            let json = to_json("analyze", Some(&cfg), &res)?;
            let stdout = emit(cfg.out.as_deref(), "analyze", Format::Json, json, None)?;
            Ok(Outcome { stdout, exit: res.exit_code() })
        }
        Command::Verify { common, integral, count, t_end } => {
            let mut cfg = common.config()?;
            if let Some(n) = count {
                cfg.batch.count = *n;
            }
            if let Some(t) = t_end {
                cfg.batch.t_end = *t;
            }
            let spec = match integral.spec() {
                Some(s) => s,
                None => IntegralSpec::known(&cfg.metric).ok_or_else(|| CliError::Config("give the integral with --u --v --w --r".into()))?,
            };
            let res = cmd_verify(&cfg, &spec, threads_from_env())?;
            let json = to_json("verify", Some(&cfg), &res)?;
            let stdout = emit(cfg.out.as_deref(), "verify", common.format.unwrap_or_default(), json, Some(res.to_csv()?))?;
            Ok(Outcome { stdout, exit: 0 })
        }
        Command::Derive { out, format } => {
            let res = cmd_derive()?;
            let block = res.checksum_block();
            if let Some(dir) = out {
                write_file(dir, "system.txt", &res.dump)?;
                write_file(dir, "checksums.txt", &block)?;
                write_file(dir, "derive.json", &to_json("derive", None, &res)?)?;
            }
            if !res.ok() {
                return Err(CliError::Checksum(block));
            }
            let stdout = match format {
                Format::Json => to_json("derive", None, &res)?,
                Format::Csv => block,
            };
            Ok(Outcome { stdout, exit: 0 })
        }
        Command::Rkv { common, mode, u0, v0, f0, w0, a, b, cauchy, height } => {
            let cfg = common.config()?;
            let [cu, cv] = floats::<2>(cauchy, "--cauchy")?;
            let req = RkvRequest {
                mode: *mode,
                u0: u0.clone(),
                v0: v0.clone(),
                f0: f0.clone(),
                w0: w0.clone(),
                a: a.clone(),
                b: b.clone(),
                cauchy: (cu, cv),
                height: *height,
            };
            let res = cmd_rkv(&cfg, &req)?;
            #[derive(Serialize)]
            struct WithRequest<'a> {
                request: &'a RkvRequest,
                output: &'a RkvOutput,
            }
            let json = to_json("rkv", Some(&cfg), &WithRequest { request: &req, output: &res })?;
            let stdout = emit(cfg.out.as_deref(), "rkv", common.format.unwrap_or_default(), json, Some(res.to_csv()?))?;
            Ok(Outcome { stdout, exit: 0 })
        }
        Command::Geodesic { common, integral, state, t_end } => {
            let mut cfg = common.config()?;
            if let Some(t) = t_end {
                cfg.batch.t_end = *t;
            }
            let start = match state {
                Some(s) => {
                    let [x, y, p, q] = floats::<4>(s, "--state")?;
                    Some(PhaseState::new(x, y, p, q))
                }
                None => None,
            };
            let spec = integral.spec().or_else(|| IntegralSpec::known(&cfg.metric));
            let res = cmd_geodesic(&cfg, start, spec.as_ref())?;
            let json = to_json("geodesic", Some(&cfg), &res)?;
            let stdout = emit(cfg.out.as_deref(), "geodesic", common.format.unwrap_or(Format::Csv), json, Some(res.csv.clone()))?;
            Ok(Outcome { stdout, exit: 0 })
        }
        Command::Examples { format } => {
            let stdout = match format {
                Format::Json => to_json("examples", None, &cmd_examples())?,
                Format::Csv => commands::examples_csv()?,
            };
            Ok(Outcome { stdout, exit: 0 })
        }
    }
}
