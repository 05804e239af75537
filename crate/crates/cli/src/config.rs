//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Eksm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Eksm => "eksm",
        }
    }
}

/// Flags shared by every command that reads a model.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Convergence tolerance on the transfer-function change.
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Relative Hankel-singular-value tail used to pick the ROM order.
    #[arg(long, allow_hyphen_values = true)]
    pub target_error: Option<f64>,
    /// Lowest frequency of the evaluation grid, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub fmin: Option<f64>,
    /// Highest frequency of the evaluation grid, Hz.
    #[arg(long, allow_hyphen_values = true)]
    pub fmax: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub maxiter: Option<usize>,
    /// Per-side cap on Krylov basis columns.
    #[arg(long)]
    pub basis_cap: Option<usize>,
    /// Reference impedance for S-parameters, ohms.
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// TOML file with any of the keys above (flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Add a small capacitance to nodes without one.
    #[arg(long)]
    pub regularize: bool,
    /// Capacitance used by --regularize, farads.
    #[arg(long, allow_hyphen_values = true)]
    pub c_min: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    tol: Option<f64>,
    target_error: Option<f64>,
    fmin: Option<f64>,
    fmax: Option<f64>,
    points: Option<usize>,
    maxiter: Option<usize>,
    basis_cap: Option<usize>,
    z0: Option<f64>,
    method: Option<Method>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    regularize: Option<bool>,
    c_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tol: f64,
    pub target_error: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub maxiter: usize,
    pub basis_cap: Option<usize>,
    pub z0: f64,
    pub method: Method,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub c_min: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eksm = rlck_mor::EksmConfig::default();
        Self {
            tol: eksm.tol,
            target_error: eksm.target_error,
            f_min: eksm.f_min,
            f_max: eksm.f_max,
            points: eksm.points,
            maxiter: eksm.maxiter,
            basis_cap: None,
            z0: rlck_mor::freq::DEFAULT_Z0,
            method: Method::Eksm,
            seed: 0,
            out_dir: PathBuf::from("mor-out"),
            c_min: None,
        }
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let d = RunConfig::default();
        let regularize = flags.regularize || file.regularize.unwrap_or(false);
        let c_min = flags.c_min.or(file.c_min);
        let cfg = RunConfig {
            tol: flags.tol.or(file.tol).unwrap_or(d.tol),
            target_error: flags.target_error.or(file.target_error).unwrap_or(d.target_error),
            f_min: flags.fmin.or(file.fmin).unwrap_or(d.f_min),
            f_max: flags.fmax.or(file.fmax).unwrap_or(d.f_max),
            points: flags.points.or(file.points).unwrap_or(d.points),
            maxiter: flags.maxiter.or(file.maxiter).unwrap_or(d.maxiter),
            basis_cap: flags.basis_cap.or(file.basis_cap),
            z0: flags.z0.or(file.z0).unwrap_or(d.z0),
            method: flags.method.or(file.method).unwrap_or(d.method),
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            out_dir: flags.out_dir.clone().or(file.out_dir).unwrap_or(d.out_dir),
            c_min: if regularize || c_min.is_some() {
                Some(c_min.unwrap_or(rlck_mor::netlist::DEFAULT_C_MIN))
            } else {
                None
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(CliError::usage(format!("--tol must be > 0, got {}", self.tol)));
        }
        if !(self.z0 > 0.0) || !self.z0.is_finite() {
            return Err(CliError::usage(format!("--z0 must be > 0, got {}", self.z0)));
        }
        if let Some(c) = self.c_min {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(CliError::usage(format!("--c-min must be >= 0, got {c}")));
            }
        }
        self.eksm().validate()?;
        Ok(())
    }

    pub fn eksm(&self) -> rlck_mor::EksmConfig {
        rlck_mor::EksmConfig {
            tol: self.tol,
            target_error: self.target_error,
            f_min: self.f_min,
            f_max: self.f_max,
            points: self.points,
            maxiter: self.maxiter,
            basis_cap: self.basis_cap,
        }
    }

    pub fn grid(&self) -> Result<rlck_mor::FrequencyGrid, CliError> {
        Ok(rlck_mor::FrequencyGrid::linear(self.f_min, self.f_max, self.points)?)
    }
}
