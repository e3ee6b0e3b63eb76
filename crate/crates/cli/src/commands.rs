//! Argument parsing and the subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use heatlab::geometry::{
    alpha_perimeter, default_rho_grid, diameter, perimeter, perimeter_via_directional, radial_profile, AngularConfig,
    SphereConfig,
};
use heatlab::heat_content::{
    asymptotic_sweep_with_profile, bound_check_part_i_with_profile, bound_check_part_ii_with_profile, default_profile,
};
use heatlab::kernel::{eval_p1, eval_pt, l1_norm, moment_d, moment_d_closed_form, KernelFamily, KernelSpec};
use heatlab::oracle::mc_alpha_perimeter;
use heatlab::quadrature::Tolerance;
use heatlab::report::{csv_table, csv_table_with_metadata};
use heatlab::verify::{run_verify, VerifyConfig};

use crate::config::{Family, Format, RunConfig, ShapeKind};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "heatlab",
    version,
    about = "Heat content of bounded sets under radial heat kernels"
)]
pub struct Cli {
    #[command(flatten)]
    pub options: Options,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the configuration file.
#[derive(Debug, Args, Default)]
pub struct Options {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub family: Option<Family>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Space dimension.
    #[arg(long, global = true)]
    pub d: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub shape: Option<ShapeKind>,
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Box sides, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sides: Option<Vec<f64>>,
    /// Decreasing times, comma separated.
    #[arg(long = "t-grid", global = true, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "abs-tol", global = true)]
    pub abs_tol: Option<f64>,
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Smaller Monte Carlo runs.
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel tables.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Radial covariance profiles.
    Cov {
        #[command(subcommand)]
        action: CovAction,
    },
    /// Perimeter from the closed form and from directional variations.
    Perimeter,
    /// The α-perimeter by radial quadrature and by Monte Carlo.
    AlphaPerimeter,
    /// Heat content sweeps.
    Heat {
        #[command(subcommand)]
        action: HeatAction,
    },
    /// Non-asymptotic bounds at every grid time.
    Bounds {
        #[arg(long, value_enum, default_value = "i")]
        part: BoundPart,
    },
    /// The built-in verification battery.
    Verify,
    /// Prints the resolved configuration as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
pub enum KernelAction {
    /// `p_1(r)`, `p_t(r)` on the time grid, the L1 norm and the first moment.
    Eval {
        /// Radii, comma separated.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        /// Require the first radial moment (an error when it diverges).
        #[arg(long)]
        moment: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum CovAction {
    /// `ĝ(ρ)` on a radial grid.
    Eval {
        /// Radii, comma separated; a graded grid over the support by default.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
}

#[derive(Debug, Subcommand)]
pub enum HeatAction {
    /// `deficit(t)/s(t)` against the limit constant.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundPart {
    /// The first-moment bound for kernels with finite first moment.
    I,
    /// The logarithmic bound for the algebraic family.
    Ii,
}

/// Applies the configuration file and flag overrides.
pub fn resolve_config(options: &Options) -> Result<RunConfig, CliError> {
    let mut cfg = match &options.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(f) = options.family {
        cfg.kernel.family = f;
    }
    if let Some(a) = options.alpha {
        cfg.kernel.alpha = Some(a);
    }
    if let Some(d) = options.d {
        cfg.kernel.dimension = d;
    }
    if let Some(s) = options.shape {
        cfg.shape.kind = s;
    }
    if let Some(r) = options.radius {
        cfg.shape.radius = r;
    }
    if let Some(sides) = &options.sides {
        cfg.shape.sides = sides.clone();
        if options.d.is_none() {
            cfg.kernel.dimension = sides.len();
        }
    }
    if let Some(t) = &options.t_grid {
        cfg.t_grid = t.clone();
    }
    if let Some(n) = options.samples {
        cfg.monte_carlo.samples = n;
    }
    if let Some(s) = options.seed {
        cfg.monte_carlo.seed = s;
    }
    if let Some(v) = options.abs_tol {
        cfg.quadrature.abs_tol = v;
    }
    if let Some(v) = options.rel_tol {
        cfg.quadrature.rel_tol = v;
    }
    if let Some(p) = &options.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = options.format {
        cfg.output.format = f;
    }
    Ok(cfg)
}

/// Caps the global thread pool from `HEATLAB_THREADS`.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("HEATLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HEATLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.options)?;
    match &cli.command {
        Command::Config => emit(&cfg.output.path, &cfg.to_toml()?),
        Command::Verify => cmd_verify(&cfg, cli.options.quick),
        Command::Kernel {
            action: KernelAction::Eval { r, moment },
        } => cmd_kernel_eval(&cfg, r.as_deref(), *moment),
        Command::Cov {
            action: CovAction::Eval { rho },
        } => cmd_cov_eval(&cfg, rho.as_deref()),
        Command::Perimeter => cmd_perimeter(&cfg),
        Command::AlphaPerimeter => cmd_alpha_perimeter(&cfg, cli.options.quick),
        Command::Heat {
            action: HeatAction::Sweep,
        } => cmd_heat_sweep(&cfg),
        Command::Bounds { part } => cmd_bounds(&cfg, *part),
    }
}

/// Writes to the output path, or standard output.
fn emit(path: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Numerical(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Numerical(e.to_string()))
}

#[derive(Serialize)]
struct KernelRow {
    quantity: String,
    t: f64,
    r: f64,
    value: f64,
    closed_form: Option<f64>,
}

fn kernel_rows_to_csv(rows: &[KernelRow]) -> Result<String, CliError> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.quantity.clone(),
                r.t.to_string(),
                r.r.to_string(),
                r.value.to_string(),
                r.closed_form.map(|v| v.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    Ok(csv_table(&["quantity", "t", "r", "value", "closed_form"], &table)?)
}

/// The closed-form comparison for `p_1`: the kernel itself where it has a
/// closed form, the Poisson kernel for the stable family at `α = 1`.
fn closed_form_reference(spec: &KernelSpec) -> Option<KernelSpec> {
    match spec.family {
        KernelFamily::Stable { alpha: 1.0 } => KernelSpec::poisson(spec.dimension).ok(),
        KernelFamily::Stable { .. } => None,
        _ => Some(*spec),
    }
}

pub fn cmd_kernel_eval(cfg: &RunConfig, radii: Option<&[f64]>, require_moment: bool) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let q = cfg.quadrature_config()?;
    let radii = radii.unwrap_or(&cfg.r_grid);
    let reference = closed_form_reference(&spec);
    let mut rows = Vec::new();
    for &r in radii {
        let closed = match &reference {
            Some(s) => Some(eval_p1(s, r, &q)?),
            None => None,
        };
        rows.push(KernelRow {
            quantity: "p_1".into(),
            t: 1.0,
            r,
            value: eval_p1(&spec, r, &q)?,
            closed_form: closed,
        });
    }
    for &t in &cfg.t_grid {
        for &r in radii {
            rows.push(KernelRow {
                quantity: "p_t".into(),
                t,
                r,
                value: eval_pt(&spec, t, r, &q)?,
                closed_form: None,
            });
        }
    }
    rows.push(KernelRow {
        quantity: "l1_norm".into(),
        t: 1.0,
        r: f64::NAN,
        value: l1_norm(&spec, &q)?,
        closed_form: Some(spec.l1_norm_closed_form()),
    });
    match moment_d(&spec, &q) {
        Ok(m) => rows.push(KernelRow {
            quantity: "moment_d".into(),
            t: 1.0,
            r: f64::NAN,
            value: m,
            closed_form: moment_d_closed_form(&spec).ok(),
        }),
        Err(e) if require_moment || !e.is_regime() => return Err(e.into()),
        Err(_) => {}
    }
    let text = match cfg.output.format {
        Format::Csv => kernel_rows_to_csv(&rows)?,
        Format::Json => to_json(&rows)?,
    };
    emit(&cfg.output.path, &text)
}

pub fn cmd_cov_eval(cfg: &RunConfig, rho: Option<&[f64]>) -> Result<(), CliError> {
    let shape = cfg.shape()?;
    let grid = match rho {
        Some(r) => r.to_vec(),
        None => default_rho_grid(diameter(&shape), 33),
    };
    let angular = AngularConfig {
        seed: cfg.monte_carlo.seed,
        ..AngularConfig::default()
    };
    let profile = radial_profile(&shape, &grid, &angular)?;
    let text = match cfg.output.format {
        Format::Csv => profile.to_csv()?,
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                rho: f64,
                ghat: f64,
                method: &'static str,
            }
            let rows: Vec<Row> = profile
                .rho_grid
                .iter()
                .zip(&profile.ghat_values)
                .map(|(&rho, &ghat)| Row {
                    rho,
                    ghat,
                    method: profile.angular_method.tag(),
                })
                .collect();
            to_json(&rows)?
        }
    };
    emit(&cfg.output.path, &text)
}

#[derive(Serialize)]
struct EstimateRow {
    method: &'static str,
    value: f64,
    stderr: Option<f64>,
    samples: Option<u64>,
    seed: Option<u64>,
}

fn estimate_output(cfg: &RunConfig, rows: &[EstimateRow]) -> Result<String, CliError> {
    match cfg.output.format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.method.to_string(),
                        r.value.to_string(),
                        opt(r.stderr.map(|v| v.to_string())),
                        opt(r.samples.map(|v| v.to_string())),
                        opt(r.seed.map(|v| v.to_string())),
                    ]
                })
                .collect();
            let meta: Vec<(&str, String)> = rows
                .iter()
                .filter_map(|r| r.seed)
                .take(1)
                .map(|s| ("seed", s.to_string()))
                .collect();
            Ok(csv_table_with_metadata(
                &["method", "value", "stderr", "samples", "seed"],
                &table,
                &meta,
            )?)
        }
    }
}

pub fn cmd_perimeter(cfg: &RunConfig) -> Result<(), CliError> {
    let shape = cfg.shape()?;
    let rows = vec![
        EstimateRow {
            method: "closed_form",
            value: perimeter(&shape)?,
            stderr: None,
            samples: None,
            seed: None,
        },
        EstimateRow {
            method: "directional",
            value: perimeter_via_directional(&shape, &SphereConfig::default())?,
            stderr: None,
            samples: None,
            seed: None,
        },
    ];
    emit(&cfg.output.path, &estimate_output(cfg, &rows)?)
}

fn mc_samples(cfg: &RunConfig, quick: bool) -> u64 {
    if quick {
        cfg.monte_carlo.samples.min(100_000)
    } else {
        cfg.monte_carlo.samples
    }
}

pub fn cmd_alpha_perimeter(cfg: &RunConfig, quick: bool) -> Result<(), CliError> {
    let shape = cfg.shape()?;
    let alpha = cfg
        .kernel
        .alpha
        .ok_or_else(|| CliError::Config("the alpha-perimeter needs --alpha".into()))?;
    let profile = default_profile(&shape)?;
    let quad = alpha_perimeter(&shape, alpha, &profile, Tolerance::new(1e-12, 1e-11))?;
    let est = mc_alpha_perimeter(&shape, alpha, mc_samples(cfg, quick), cfg.monte_carlo.seed)?;
    let rows = vec![
        EstimateRow {
            method: "radial_quadrature",
            value: quad,
            stderr: None,
            samples: None,
            seed: None,
        },
        EstimateRow {
            method: "monte_carlo",
            value: est.value,
            stderr: Some(est.stderr),
            samples: Some(est.samples),
            seed: Some(est.seed),
        },
    ];
    emit(&cfg.output.path, &estimate_output(cfg, &rows)?)
}

fn summary_path(path: &Path) -> PathBuf {
    let mut p = path.to_path_buf();
    let stem = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    p.set_file_name(format!("{stem}.summary.json"));
    p
}

pub fn cmd_heat_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let shape = cfg.shape()?;
    let q = cfg.quadrature_config()?;
    let profile = default_profile(&shape)?;
    let report = asymptotic_sweep_with_profile(&spec, &shape, &profile, &cfg.t_grid, &q)?;
    match cfg.output.format {
        Format::Json => emit(&cfg.output.path, &(report.to_json()? + "\n")),
        Format::Csv => {
            emit(&cfg.output.path, &report.to_csv()?)?;
            match &cfg.output.path {
                Some(p) => emit(&Some(summary_path(p)), &(report.to_json()? + "\n")),
                None => {
                    eprint!("{}", report.to_text());
                    Ok(())
                }
            }
        }
    }
}

pub fn cmd_bounds(cfg: &RunConfig, part: BoundPart) -> Result<(), CliError> {
    let spec = cfg.kernel_spec()?;
    let shape = cfg.shape()?;
    let q = cfg.quadrature_config()?;
    let profile = default_profile(&shape)?;
    let report = match part {
        BoundPart::I => bound_check_part_i_with_profile(&spec, &shape, &profile, &cfg.t_grid, &q)?,
        BoundPart::Ii => bound_check_part_ii_with_profile(&spec, &shape, &profile, &cfg.t_grid, &q)?,
    };
    let text = match cfg.output.format {
        Format::Json => report.to_json()? + "\n",
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .entries
                .iter()
                .map(|e| {
                    vec![
                        e.t.to_string(),
                        e.lhs.to_string(),
                        e.rhs.to_string(),
                        e.slack.to_string(),
                        e.passed.to_string(),
                    ]
                })
                .collect();
            csv_table(&["t", "lhs", "rhs", "slack", "passed"], &rows)?
        }
    };
    emit(&cfg.output.path, &text)?;
    eprint!("{}", report.to_text());
    if report.all_passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "bound violated at t = {:?}",
            report.failures
        )))
    }
}

pub fn cmd_verify(cfg: &RunConfig, quick: bool) -> Result<(), CliError> {
    let vcfg = VerifyConfig {
        quick,
        seed: cfg.monte_carlo.seed,
        quadrature: cfg.quadrature_config()?,
    };
    let report = run_verify(&vcfg)?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    let text = match cfg.output.format {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json()? + "\n",
    };
    emit(&cfg.output.path, &text)?;
    if report.all_passed {
        Ok(())
    } else {
        Err(CliError::Verification(format!("criteria {:?} failed", report.failures)))
    }
}
