//! Run configuration: a TOML file plus command-line overrides.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use heatlab::geometry::Shape;
use heatlab::kernel::KernelSpec;
use heatlab::quadrature::QuadratureConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Poisson,
    Stable,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ball,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: Family,
    pub dimension: usize,
    pub alpha: Option<f64>,
    /// Parameters of the algebraic family `κ/(1 + r^n)^m`.
    pub kappa: Option<f64>,
    pub n: Option<f64>,
    pub m: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: Family::Stable,
            dimension: 2,
            alpha: Some(1.5),
            kappa: None,
            n: None,
            m: None,
            beta: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    pub kind: ShapeKind,
    pub radius: f64,
    /// Box side lengths; their count sets the dimension.
    pub sides: Vec<f64>,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            kind: ShapeKind::Ball,
            radius: 1.0,
            sides: vec![1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail_split_radius: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            max_subdivisions: q.max_subdivisions,
            tail_split_radius: q.tail_split_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub samples: u64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub t_grid: Vec<f64>,
    /// Radii for kernel tables.
    pub r_grid: Vec<f64>,
    pub kernel: KernelConfig,
    pub shape: ShapeConfig,
    pub quadrature: QuadratureSection,
    pub monte_carlo: MonteCarloConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_grid: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            r_grid: vec![0.0, 0.5, 1.0, 2.0, 5.0],
            kernel: KernelConfig::default(),
            shape: ShapeConfig::default(),
            quadrature: QuadratureSection::default(),
            monte_carlo: MonteCarloConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn quadrature_config(&self) -> Result<QuadratureConfig, CliError> {
        let q = QuadratureConfig {
            abs_tol: self.quadrature.abs_tol,
            rel_tol: self.quadrature.rel_tol,
            max_subdivisions: self.quadrature.max_subdivisions,
            tail_split_radius: self.quadrature.tail_split_radius,
            ..QuadratureConfig::default()
        };
        q.validate()?;
        Ok(q)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        let k = &self.kernel;
        let d = k.dimension;
        let spec = match k.family {
            Family::Gaussian => KernelSpec::gaussian(d)?,
            Family::Poisson => KernelSpec::poisson(d)?,
            Family::Stable => {
                let alpha = k
                    .alpha
                    .ok_or_else(|| CliError::Config("the stable family needs --alpha".into()))?;
                KernelSpec::stable(alpha, d)?
            }
            Family::Poly => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| {
                        CliError::Config(format!("the poly family needs kernel.{name} in the configuration"))
                    })
                };
                KernelSpec::poly_family(
                    d,
                    need(k.kappa, "kappa")?,
                    need(k.n, "n")?,
                    need(k.m, "m")?,
                    need(k.beta, "beta")?,
                    need(k.gamma, "gamma")?,
                )?
            }
        };
        Ok(spec)
    }

    pub fn shape(&self) -> Result<Shape, CliError> {
        let s = &self.shape;
        let shape = match s.kind {
            ShapeKind::Ball => Shape::ball(self.kernel.dimension, s.radius)?,
            ShapeKind::Box => {
                if s.sides.len() != self.kernel.dimension {
                    return Err(CliError::Config(format!(
                        "box has {} sides but the dimension is {}",
                        s.sides.len(),
                        self.kernel.dimension
                    )));
                }
                Shape::cuboid(&s.sides)?
            }
        };
        Ok(shape)
    }

    /// Checks everything that can be checked before dispatch.
    pub fn validate(&self) -> Result<(), CliError> {
        self.quadrature_config()?;
        self.kernel_spec()?;
        self.shape()?;
        if self.monte_carlo.samples == 0 {
            return Err(CliError::Config("Monte Carlo needs at least one sample".into()));
        }
        Ok(())
    }
}
