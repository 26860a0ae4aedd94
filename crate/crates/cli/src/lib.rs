//! Experiment runner behind the `sdd-dp` binary. Each command reads a JSON
//! config, dispatches into the solver crate, and writes its artifact
//! atomically (temp file + rename). Solve artifacts embed the spectral
//! certificate that authorized the solve, and every run logs that
//! certificate on stderr.

pub mod oracle;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sdd_dp_core::discounting::{
    build_discount_operator, radius_grid, spectral_radius, DiscountError, SpectralOptions,
    SpectralReport,
};
use sdd_dp_core::dp::{vfi, Solution, ValueArray};
use sdd_dp_core::markov::{rouwenhorst, Ar1Spec, FiniteMarkovChain};
use sdd_dp_core::models::{
    build_growth, build_tax, solve_ez, solve_homogeneous, solve_search, solve_truncated, EzParams,
    GrowthParams, HomogeneousParams, Production, SearchParams, TaxParams, TruncationLadder,
    Utility,
};
use sdd_dp_core::util::linspace;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("computation failed: {0}")]
    Computation(String),
}

impl CliError {
    /// Process exit status: 2 for config problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            _ => 1,
        }
    }

    pub fn error_kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid(_) => "ConfigInvalid",
            CliError::Io { .. } => "Io",
            CliError::Computation(_) => "Computation",
        }
    }

    /// Machine-readable error JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.error_kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

macro_rules! from_compute_error {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Computation(e.to_string())
            }
        }
    )*};
}
from_compute_error!(
    sdd_dp_core::models::ModelError,
    sdd_dp_core::dp::DpError,
    DiscountError,
    sdd_dp_core::markov::MarkovError
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum CommandName {
    Spectral,
    Rouwenhorst,
    FigureR,
    SolveGrowth,
    SolveSearch,
    SolveTax,
    SolveEz,
    SolveHomogeneous,
    SolveTruncated,
    OracleCheck,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CommandName::Spectral => "spectral",
            CommandName::Rouwenhorst => "rouwenhorst",
            CommandName::FigureR => "figure-r",
            CommandName::SolveGrowth => "solve-growth",
            CommandName::SolveSearch => "solve-search",
            CommandName::SolveTax => "solve-tax",
            CommandName::SolveEz => "solve-ez",
            CommandName::SolveHomogeneous => "solve-homogeneous",
            CommandName::SolveTruncated => "solve-truncated",
            CommandName::OracleCheck => "oracle-check",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[clap(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Option<OutputFormat>,
}

/// Full experiment file: command, per-command params, output destination,
/// and solver defaults. A bare params object (no `command` key) is also
/// accepted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<CommandName>,
    pub params: serde_json::Value,
    #[serde(default)]
    pub output: Option<OutputSpec>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: u64,
    #[serde(default = "default_spectral_tol")]
    pub spectral_tol: f64,
    #[serde(default = "default_n_max")]
    pub n_max: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> u64 {
    100_000
}
fn default_spectral_tol() -> f64 {
    1e-6
}
fn default_n_max() -> u64 {
    1 << 20
}

impl ExperimentConfig {
    /// Parses either the full experiment form or a bare params object.
    pub fn from_json(value: serde_json::Value) -> Result<Self, CliError> {
        let is_full = value
            .as_object()
            .map(|o| o.contains_key("command") || o.contains_key("params"))
            .unwrap_or(false);
        if is_full {
            serde_json::from_value(value).map_err(|e| CliError::ConfigInvalid(e.to_string()))
        } else {
            Ok(ExperimentConfig {
                command: None,
                params: value,
                output: None,
                tol: default_tol(),
                max_iter: default_max_iter(),
                spectral_tol: default_spectral_tol(),
                n_max: default_n_max(),
                seed: None,
                threads: None,
            })
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        Self::from_json(value)
    }

    pub fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            tol: self.spectral_tol,
            n_max: self.n_max,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Where the artifact went, when an output path was configured.
    pub path: Option<PathBuf>,
    pub payload: String,
    pub format: OutputFormat,
    /// One line per spectral certificate used by the run.
    pub certificates: Vec<String>,
}

/// Either an inline chain or an AR(1) spec to discretize.
#[derive(Debug, Clone, Deserialize)]
struct ChainSource {
    #[serde(default)]
    chain: Option<FiniteMarkovChain>,
    #[serde(default)]
    ar1: Option<Ar1Spec>,
}

impl ChainSource {
    fn resolve(&self) -> Result<FiniteMarkovChain, CliError> {
        match (&self.chain, &self.ar1) {
            (Some(chain), None) => Ok(chain.clone()),
            (None, Some(spec)) => Ok(rouwenhorst(spec)),
            (Some(_), Some(_)) => Err(CliError::ConfigInvalid(
                "give either \"chain\" or \"ar1\", not both".into(),
            )),
            (None, None) => Err(CliError::ConfigInvalid(
                "params need a \"chain\" or an \"ar1\" block".into(),
            )),
        }
    }
}

/// Grid given either as explicit points or as `{min, max, count}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GridSpec {
    Points(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

impl GridSpec {
    fn materialize(&self) -> Vec<f64> {
        match self {
            GridSpec::Points(p) => p.clone(),
            GridSpec::Range { min, max, count } => linspace(*min, *max, *count),
        }
    }
}

fn parse_params<T: serde::de::DeserializeOwned>(params: &serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(params.clone()).map_err(|e| CliError::ConfigInvalid(e.to_string()))
}

fn certificate_line(label: &str, report: &SpectralReport) -> String {
    format!(
        "certificate {label}: radius {} in [{}, {}], contraction index {}",
        report.radius,
        report.lower,
        report.upper,
        report
            .contraction_index
            .map(|n| n.to_string())
            .unwrap_or_else(|| "none".into()),
    )
}

/// Runs one command. `overrides` win over the config file; the artifact is
/// written atomically when an output path is present and returned either way.
pub fn run(
    command: CommandName,
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> Result<RunOutcome, CliError> {
    if let Some(declared) = config.command {
        if declared != command {
            return Err(CliError::ConfigInvalid(format!(
                "config declares command \"{declared}\" but \"{command}\" was requested"
            )));
        }
    }
    let threads = overrides.threads.or(config.threads);
    let execute = || dispatch(command, config, overrides);
    let mut outcome = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Computation(e.to_string()))?;
            pool.install(execute)?
        }
        None => execute()?,
    };

    let out_path = overrides
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| o.path.clone()));
    if let Some(path) = out_path {
        write_atomic(&path, outcome.payload.as_bytes())?;
        outcome.path = Some(path);
    }
    Ok(outcome)
}

fn dispatch(
    command: CommandName,
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> Result<RunOutcome, CliError> {
    let tol = overrides.tol.unwrap_or(config.tol);
    let format = overrides
        .format
        .or_else(|| config.output.as_ref().and_then(|o| o.format));
    let seed = overrides.seed.or(config.seed);

    match command {
        CommandName::Spectral => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                #[serde(default)]
                weights: Option<Vec<f64>>,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let weights = p.weights.unwrap_or_else(|| chain.states().to_vec());
            let op = build_discount_operator(&chain, &weights)?;
            let report = match spectral_radius(&op, config.spectral_options()) {
                Ok(report) => report,
                Err(DiscountError::NotConverged { report }) => report,
                Err(e) => return Err(e.into()),
            };
            let line = certificate_line("L", &report);
            finish(format, OutputFormat::Json, vec![line], || {
                Ok(to_json_pretty(&report))
            })
        }
        CommandName::Rouwenhorst => {
            #[derive(Deserialize)]
            struct Params {
                ar1: Ar1Spec,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = rouwenhorst(&p.ar1);
            finish(format, OutputFormat::Json, Vec::new(), || {
                Ok(to_json_pretty(&chain))
            })
        }
        CommandName::FigureR => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Params {
                mu: f64,
                rho_grid: GridSpec,
                sigma_grid: GridSpec,
                n_states: usize,
            }
            let p: Params = parse_params(&config.params)?;
            let grid = radius_grid(
                p.mu,
                &p.rho_grid.materialize(),
                &p.sigma_grid.materialize(),
                p.n_states,
                config.spectral_options(),
            );
            match format.unwrap_or(OutputFormat::Csv) {
                OutputFormat::Csv => Ok(RunOutcome {
                    path: None,
                    payload: grid.to_csv(),
                    format: OutputFormat::Csv,
                    certificates: Vec::new(),
                }),
                OutputFormat::Json => Ok(RunOutcome {
                    path: None,
                    payload: to_json_pretty(&grid),
                    format: OutputFormat::Json,
                    certificates: Vec::new(),
                }),
            }
        }
        CommandName::SolveGrowth => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                #[serde(default)]
                beta: Option<Vec<f64>>,
                utility: Utility,
                production: Production,
                k_grid: GridSpec,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = GrowthParams {
                utility: p.utility,
                production: p.production,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                k_grid: p.k_grid.materialize(),
                chain,
            };
            let dp = build_growth(&params)?;
            let solution = vfi(
                &dp,
                &ValueArray::zeros(dp.n_x(), dp.n_z()),
                tol,
                config.max_iter,
            )?;
            solution_outcome(format, solution, dp.x_grid(), dp.chain().states())
        }
        CommandName::SolveSearch => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                wages: Vec<f64>,
                compensation: f64,
                #[serde(default)]
                beta: Option<Vec<f64>>,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = SearchParams {
                wages: p.wages,
                compensation: p.compensation,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                chain,
            };
            let search = solve_search(&params, tol, config.max_iter)?;
            let line = certificate_line("L_beta", &search.solution.certified);
            match format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => Ok(RunOutcome {
                    path: None,
                    payload: to_json_pretty(&search),
                    format: OutputFormat::Json,
                    certificates: vec![line],
                }),
                OutputFormat::Csv => {
                    let mut csv = String::from("i_z,z,value,accept,k\n");
                    for (i, &z) in params.chain.states().iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{},{}\n",
                            i, z, search.value[i], search.accept[i], search.k[i]
                        ));
                    }
                    Ok(RunOutcome {
                        path: None,
                        payload: csv,
                        format: OutputFormat::Csv,
                        certificates: vec![line],
                    })
                }
            }
        }
        CommandName::SolveTax => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                gross_return: Vec<f64>,
                price: Vec<f64>,
                transfer: Vec<f64>,
                #[serde(default)]
                beta: Option<Vec<f64>>,
                b_grid: GridSpec,
                utility: Utility,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = TaxParams {
                gross_return: p.gross_return,
                price: p.price,
                transfer: p.transfer,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                b_grid: p.b_grid.materialize(),
                utility: p.utility,
                chain,
            };
            let dp = build_tax(&params)?;
            let solution = vfi(
                &dp,
                &ValueArray::zeros(dp.n_x(), dp.n_z()),
                tol,
                config.max_iter,
            )?;
            solution_outcome(format, solution, dp.x_grid(), dp.chain().states())
        }
        CommandName::SolveEz => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                rho_pref: f64,
                gamma: f64,
                dividend: Vec<f64>,
                price: Vec<f64>,
                #[serde(default)]
                beta: Option<Vec<f64>>,
                x_grid: GridSpec,
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = EzParams {
                rho_pref: p.rho_pref,
                gamma: p.gamma,
                dividend: p.dividend,
                price: p.price,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                x_grid: p.x_grid.materialize(),
                chain,
            };
            let ez = solve_ez(&params, tol, config.max_iter)?;
            let line = certificate_line("L_theta", &ez.transformed.certified);
            match format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => Ok(RunOutcome {
                    path: None,
                    payload: to_json_pretty(&ez),
                    format: OutputFormat::Json,
                    certificates: vec![line],
                }),
                OutputFormat::Csv => Ok(RunOutcome {
                    path: None,
                    payload: ez.transformed.to_csv(&params.x_grid, params.chain.states()),
                    format: OutputFormat::Csv,
                    certificates: vec![line],
                }),
            }
        }
        CommandName::SolveHomogeneous => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                gamma: f64,
                returns: Vec<f64>,
                #[serde(default)]
                beta: Option<Vec<f64>>,
                #[serde(default = "default_savings_points")]
                savings_points: usize,
            }
            fn default_savings_points() -> usize {
                1001
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = HomogeneousParams {
                gamma: p.gamma,
                returns: p.returns,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                savings_points: p.savings_points,
                chain,
            };
            let sol = solve_homogeneous(&params, tol, config.max_iter)?;
            let line = certificate_line("L_R", &sol.certified);
            match format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => Ok(RunOutcome {
                    path: None,
                    payload: to_json_pretty(&sol),
                    format: OutputFormat::Json,
                    certificates: vec![line],
                }),
                OutputFormat::Csv => {
                    let mut csv = String::from("i_z,z,profile,savings\n");
                    for (i, &z) in params.chain.states().iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            i, z, sol.profile[i], sol.savings[i]
                        ));
                    }
                    Ok(RunOutcome {
                        path: None,
                        payload: csv,
                        format: OutputFormat::Csv,
                        certificates: vec![line],
                    })
                }
            }
        }
        CommandName::SolveTruncated => {
            #[derive(Deserialize)]
            struct Params {
                #[serde(flatten)]
                chain: ChainSource,
                #[serde(default)]
                beta: Option<Vec<f64>>,
                utility: Utility,
                production: Production,
                ladder: TruncationLadder,
                #[serde(default = "default_stab_tol")]
                stabilization_tol: f64,
            }
            fn default_stab_tol() -> f64 {
                1e-6
            }
            let p: Params = parse_params(&config.params)?;
            let chain = p.chain.resolve()?;
            let params = GrowthParams {
                utility: p.utility,
                production: p.production,
                beta: p.beta.unwrap_or_else(|| chain.states().to_vec()),
                k_grid: Vec::new(),
                chain,
            };
            let outcome = solve_truncated(
                &params,
                &p.ladder,
                tol,
                p.stabilization_tol,
                config.max_iter,
            )?;
            let line = certificate_line("L_beta", &outcome.solution.certified);
            #[derive(Serialize)]
            struct Artifact<'a> {
                levels: &'a [sdd_dp_core::models::LadderLevel],
                stabilized: bool,
                solution: &'a Solution,
            }
            match format.unwrap_or(OutputFormat::Json) {
                OutputFormat::Json => Ok(RunOutcome {
                    path: None,
                    payload: to_json_pretty(&Artifact {
                        levels: &outcome.levels,
                        stabilized: outcome.stabilized,
                        solution: &outcome.solution,
                    }),
                    format: OutputFormat::Json,
                    certificates: vec![line],
                }),
                OutputFormat::Csv => {
                    let mut csv = String::from("level,bound,n_points,diff_on_base\n");
                    for (i, level) in outcome.levels.iter().enumerate() {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            i + 1,
                            level.bound,
                            level.n_points,
                            level
                                .diff_on_base
                                .map(|d| d.to_string())
                                .unwrap_or_default()
                        ));
                    }
                    Ok(RunOutcome {
                        path: None,
                        payload: csv,
                        format: OutputFormat::Csv,
                        certificates: vec![line],
                    })
                }
            }
        }
        CommandName::OracleCheck => {
            let mut p: oracle::OracleCheckConfig = parse_params(&config.params)?;
            if let Some(seed) = seed {
                p.seed = seed;
            }
            let report = oracle::oracle_check(&p);
            finish(format, OutputFormat::Json, Vec::new(), || {
                Ok(to_json_pretty(&report))
            })
        }
    }
}

fn finish(
    requested: Option<OutputFormat>,
    natural: OutputFormat,
    certificates: Vec<String>,
    payload: impl FnOnce() -> Result<String, CliError>,
) -> Result<RunOutcome, CliError> {
    let format = requested.unwrap_or(natural);
    if format != natural {
        return Err(CliError::ConfigInvalid(format!(
            "this command only emits {natural:?}"
        )));
    }
    Ok(RunOutcome {
        path: None,
        payload: payload()?,
        format,
        certificates,
    })
}

fn solution_outcome(
    format: Option<OutputFormat>,
    solution: Solution,
    x_grid: &[f64],
    z_grid: &[f64],
) -> Result<RunOutcome, CliError> {
    let line = certificate_line("L_beta", &solution.certified);
    match format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => Ok(RunOutcome {
            path: None,
            payload: to_json_pretty(&solution),
            format: OutputFormat::Json,
            certificates: vec![line],
        }),
        OutputFormat::Csv => Ok(RunOutcome {
            path: None,
            payload: solution.to_csv(x_grid, z_grid),
            format: OutputFormat::Csv,
            certificates: vec![line],
        }),
    }
}

fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    text
}

/// Writes through a temp file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(dir) => dir.join(format!(
            ".{}.tmp-{}",
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "artifact".into()),
            std::process::id()
        )),
        None => PathBuf::from(format!(".artifact.tmp-{}", std::process::id())),
    };
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(bytes).map_err(io_err)?;
    file.sync_all().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err)
}
