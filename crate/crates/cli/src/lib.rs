//! Command-line front end: argument and config handling, and one runner per
//! study. Each runner writes its artifacts and returns the checks it embeds.

mod studies;

use clap::{Args, Parser, Subcommand};
use peridyn::analysis::{AnalysisError, DeltaSeries};
use peridyn::fields::{FieldError, ManufacturedName, MaterialSpec};
use peridyn::operators::OperatorError;
use peridyn::quadrature::{QuadratureError, DEFAULT_ANGULAR_ORDER, DEFAULT_RADIAL_ORDER};
use peridyn::solver::{BodyForce, BoxBounds, SolverError};
use peridyn::tensor::Vec3;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub use studies::Check;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const THREADS_ENV: &str = "PERIDYN_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Parser)]
#[command(name = "peridyn", version, about = "Nonlocal two-phase elasticity studies")]
pub struct Cli {
    #[command(subcommand)]
    pub study: StudyKind,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Fourth, third and second moments of the ball
    Moments,
    /// δ·K_δ against its closed form
    Kdelta,
    /// L against the Navier operator over a sample grid
    Converge,
    /// Growth of L at the interface
    Blowup,
    /// δ·L at the interface against the natural-condition limit
    Natural,
    /// δ·L* at the interface against (45/32)⟦σ⟧n, or L* away from it
    Star,
    /// Collocation solve of the interface system
    Solve,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::Moments => "moments",
            StudyKind::Kdelta => "kdelta",
            StudyKind::Converge => "converge",
            StudyKind::Blowup => "blowup",
            StudyKind::Natural => "natural",
            StudyKind::Star => "star",
            StudyKind::Solve => "solve",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// JSON study config; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Horizons, largest first
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta_series: Option<Vec<f64>>,
    /// Five halvings ending at this horizon
    #[arg(long, global = true)]
    pub delta_min: Option<f64>,
    /// Radial and angular orders, `R,A`
    #[arg(long, global = true, value_delimiter = ',')]
    pub quad: Option<Vec<usize>>,
    /// `two-phase:λ+,μ+,λ-,μ-`, `homogeneous:λ,μ` or `smooth-trig`
    #[arg(long, global = true)]
    pub material: Option<MaterialSpec>,
    /// Manufactured field
    #[arg(long, global = true)]
    pub field: Option<ManufacturedName>,
    /// Interface normal `x,y,z`
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub normal: Option<Vec<f64>>,
    /// Exponent of the discrete error norm
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Worker threads (falls back to PERIDYN_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// With `star`: compare L* with L and Navier away from the interface
    #[arg(long, global = true)]
    pub offinterface: bool,
}

/// Cell-centred `n³` sample points of `[lo, hi]³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleGrid {
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: Option<StudyKind>,
    pub material: Option<MaterialSpec>,
    pub field: Option<ManufacturedName>,
    pub delta_series: Option<Vec<f64>>,
    pub delta_min: Option<f64>,
    pub sample_grid: Option<SampleGrid>,
    pub quad: Option<[usize; 2]>,
    pub out: Option<PathBuf>,
    pub p: Option<f64>,
    pub normal: Option<Vec3>,
    pub threads: Option<usize>,
    /// Evaluation point of the interface studies.
    pub point: Option<Vec3>,
    pub offinterface: Option<bool>,
    #[serde(rename = "box")]
    pub bounds: Option<BoxBounds>,
    pub h: Option<f64>,
    pub ratio: Option<f64>,
    pub b: Option<BodyForce>,
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved inputs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub study: StudyKind,
    pub material: Option<MaterialSpec>,
    pub field: ManufacturedName,
    pub series: Option<DeltaSeries>,
    pub sample_grid: Option<SampleGrid>,
    pub quad: (usize, usize),
    pub out: PathBuf,
    pub p: f64,
    pub normal: Vec3,
    pub threads: Option<usize>,
    pub point: Vec3,
    pub offinterface: bool,
    pub bounds: Option<BoxBounds>,
    pub h: Option<f64>,
    pub ratio: Option<f64>,
    pub b: BodyForce,
}

impl Settings {
    /// The δ-series, or the default one.
    pub fn series(&self) -> DeltaSeries {
        self.series.clone().unwrap_or_else(DeltaSeries::default_series)
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn default_field(study: StudyKind) -> ManufacturedName {
    match study {
        StudyKind::Converge => ManufacturedName::SmoothMaterialTrig,
        _ => ManufacturedName::PatchJumpZeroTraction,
    }
}

/// Merges flags over the config file; `env_threads` is the last fallback.
pub fn resolve(study: StudyKind, opts: &Options, file: StudyConfig, env_threads: Option<&str>) -> Result<Settings, CliError> {
    if let Some(s) = file.study {
        if s != study {
            return Err(config_err(format!("config is for `{}`, not `{}`", s.as_str(), study.as_str())));
        }
    }
    let both = "give either a δ-series or a minimum δ, not both";
    if opts.delta_series.is_some() && opts.delta_min.is_some() {
        return Err(config_err(both));
    }
    let series = if let Some(list) = &opts.delta_series {
        Some(DeltaSeries::new(list.clone())?)
    } else if let Some(min) = opts.delta_min {
        Some(DeltaSeries::ending_at(min)?)
    } else {
        match (file.delta_series, file.delta_min) {
            (Some(_), Some(_)) => return Err(config_err(both)),
            (Some(list), None) => Some(DeltaSeries::new(list)?),
            (None, Some(min)) => Some(DeltaSeries::ending_at(min)?),
            (None, None) => None,
        }
    };
    let quad = match (&opts.quad, file.quad) {
        (Some(q), _) => match q.as_slice() {
            [r, a] => (*r, *a),
            _ => return Err(config_err("--quad takes two orders, R,A")),
        },
        (None, Some([r, a])) => (r, a),
        (None, None) => (DEFAULT_RADIAL_ORDER, DEFAULT_ANGULAR_ORDER),
    };
    let normal = match &opts.normal {
        Some(v) => match v.as_slice() {
            [x, y, z] => Vec3::new(*x, *y, *z),
            _ => return Err(config_err("--normal takes three components")),
        },
        None => file.normal.unwrap_or(Vec3::basis(2)),
    };
    let threads = match opts.threads.or(file.threads) {
        Some(n) => Some(n),
        None => match env_threads.map(str::trim).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse().map_err(|_| config_err(format!("{THREADS_ENV}={s} is not a count")))?),
            None => None,
        },
    };
    if threads == Some(0) {
        return Err(config_err("thread count must be positive"));
    }
    let p = opts.p.or(file.p).unwrap_or(2.0);
    if !(p >= 1.0) {
        return Err(config_err(format!("norm exponent must be at least 1 (got {p})")));
    }
    if let Some(g) = file.sample_grid {
        if g.n == 0 || !(g.hi > g.lo) {
            return Err(config_err("sample_grid needs n > 0 and hi > lo"));
        }
    }
    let offinterface = opts.offinterface || file.offinterface.unwrap_or(false);
    if offinterface && study != StudyKind::Star {
        return Err(config_err("--offinterface applies to `star` only"));
    }
    Ok(Settings {
        study,
        material: opts.material.or(file.material),
        field: opts.field.or(file.field).unwrap_or(default_field(study)),
        series,
        sample_grid: file.sample_grid,
        quad,
        out: opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("peridyn-out")),
        p,
        normal,
        threads,
        point: file.point.unwrap_or(Vec3::ZERO),
        offinterface,
        bounds: file.bounds,
        h: file.h,
        ratio: file.ratio,
        b: file.b.unwrap_or_default(),
    })
}

/// Parses `argv`, runs the study and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(checks) => {
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("peridyn: {e}");
            EXIT_CONFIG
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<Check>, CliError> {
    let file = match &cli.opts.config {
        Some(path) => StudyConfig::load(path)?,
        None => StudyConfig::default(),
    };
    let env = std::env::var(THREADS_ENV).ok();
    let settings = resolve(cli.study, &cli.opts, file, env.as_deref())?;
    match settings.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(format!("thread pool: {e}")))?
            .install(|| studies::run_study(&settings)),
        None => studies::run_study(&settings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("peridyn").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_parse() {
        let cli = parse(&["star", "--field", "gradient_jump", "--delta-min", "1e-3", "--normal", "-1,0,0", "--quad", "4,6"]);
        assert_eq!(cli.study, StudyKind::Star);
        assert_eq!(cli.opts.field, Some(ManufacturedName::GradientJump));
        assert_eq!(cli.opts.normal, Some(vec![-1.0, 0.0, 0.0]));
        let s = resolve(cli.study, &cli.opts, StudyConfig::default(), None).unwrap();
        assert_eq!(s.series().min(), 1e-3);
        assert_eq!(s.quad, (4, 6));
        assert_eq!(s.normal, Vec3::new(-1.0, 0.0, 0.0));
        let cli = parse(&["converge", "--material", "two-phase:3,1,2,2", "--delta-series", "0.1,0.05,0.025"]);
        assert_eq!(cli.opts.material, Some(MaterialSpec::TwoPhase([3.0, 1.0, 2.0, 2.0])));
        assert_eq!(cli.opts.delta_series, Some(vec![0.1, 0.05, 0.025]));
    }

    #[test]
    fn bad_flags_are_rejected() {
        for args in [
            vec!["peridyn", "bogus"],
            vec!["peridyn", "star", "--field", "nope"],
            vec!["peridyn", "star", "--material", "two-phase:1,2"],
            vec!["peridyn", "star", "--threads", "x"],
        ] {
            assert!(Cli::try_parse_from(args).is_err());
        }
    }

    #[test]
    fn flags_override_file_and_env_is_fallback() {
        let file: StudyConfig = serde_json::from_str(
            r#"{"study": "star", "field": "gradient_jump", "p": 1.5, "quad": [4, 6], "threads": 3, "delta_series": [0.2, 0.1, 0.05]}"#,
        )
        .unwrap();
        let cli = parse(&["star", "--p", "3", "--delta-min", "0.01"]);
        let s = resolve(cli.study, &cli.opts, file.clone(), Some("7")).unwrap();
        assert_eq!(s.p, 3.0);
        assert_eq!(s.field, ManufacturedName::GradientJump);
        assert_eq!(s.quad, (4, 6));
        assert_eq!(s.threads, Some(3));
        assert_eq!(s.series().deltas(), &[0.16, 0.08, 0.04, 0.02, 0.01]);
        let bare = StudyConfig { threads: None, ..file };
        assert_eq!(resolve(cli.study, &cli.opts, bare.clone(), Some("7")).unwrap().threads, Some(7));
        assert!(resolve(cli.study, &cli.opts, bare, Some("seven")).is_err());
    }

    #[test]
    fn config_errors() {
        assert!(serde_json::from_str::<StudyConfig>(r#"{"fieldd": "linear"}"#).is_err());
        assert!(serde_json::from_str::<StudyConfig>(r#"{"material": "steel"}"#).is_err());
        let cli = parse(&["converge"]);
        let wrong = StudyConfig { study: Some(StudyKind::Star), ..Default::default() };
        assert!(resolve(cli.study, &cli.opts, wrong, None).is_err());
        let both = parse(&["converge", "--delta-min", "0.01", "--delta-series", "0.1,0.05"]);
        assert!(resolve(both.study, &both.opts, StudyConfig::default(), None).is_err());
        let rising = parse(&["converge", "--delta-series", "0.05,0.1"]);
        assert!(resolve(rising.study, &rising.opts, StudyConfig::default(), None).is_err());
        let off = parse(&["converge", "--offinterface"]);
        assert!(resolve(off.study, &off.opts, StudyConfig::default(), None).is_err());
        let zero = parse(&["converge", "--threads", "0"]);
        assert!(resolve(zero.study, &zero.opts, StudyConfig::default(), None).is_err());
    }

    #[test]
    fn default_fields() {
        let s = resolve(StudyKind::Converge, &Options::default(), StudyConfig::default(), None).unwrap();
        assert_eq!(s.field, ManufacturedName::SmoothMaterialTrig);
        assert_eq!(s.series(), DeltaSeries::default_series());
        let s = resolve(StudyKind::Natural, &Options::default(), StudyConfig::default(), None).unwrap();
        assert_eq!(s.field, ManufacturedName::PatchJumpZeroTraction);
        assert_eq!(s.out, PathBuf::from("peridyn-out"));
    }
}
