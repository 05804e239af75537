//! Frequency-domain evaluation `H(s) = L (sC - G)^{-1} B` on `s = j 2π f`,
//! accuracy metrics, impedance-to-scattering conversion, and sweep export.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::linalg::LU;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{MorError, Result};
use crate::linalg::{spectral_norm, PIVOT_TOL};
use crate::system::LinearModel;

/// Point count used when none is configured.
pub const DEFAULT_POINTS: usize = 20;
/// Reference impedance used when none is configured.
pub const DEFAULT_Z0: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Logarithmic,
    /// Points read back from a file.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub spacing: Spacing,
    points: Vec<f64>,
}

impl FrequencyGrid {
    /// `l` points spanning `[f_min, f_max]`, endpoints included.
    pub fn new(f_min: f64, f_max: f64, l: usize, spacing: Spacing) -> Result<Self> {
        if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) {
            return Err(MorError::validation(format!(
                "frequency range needs 0 < f_min < f_max, got [{f_min}, {f_max}]"
            )));
        }
        if l < 2 {
            return Err(MorError::validation(format!("grid needs at least 2 points, got {l}")));
        }
        let last = (l - 1) as f64;
        let mut points: Vec<f64> = match spacing {
            Spacing::Linear | Spacing::Explicit => (0..l)
                .map(|i| f_min + (f_max - f_min) * i as f64 / last)
                .collect(),
            Spacing::Logarithmic => {
                let (a, b) = (f_min.ln(), f_max.ln());
                (0..l).map(|i| (a + (b - a) * i as f64 / last).exp()).collect()
            }
        };
        points[0] = f_min;
        points[l - 1] = f_max;
        let spacing = if spacing == Spacing::Explicit {
            Spacing::Linear
        } else {
            spacing
        };
        Ok(Self {
            f_min,
            f_max,
            spacing,
            points,
        })
    }

    pub fn linear(f_min: f64, f_max: f64, l: usize) -> Result<Self> {
        Self::new(f_min, f_max, l, Spacing::Linear)
    }

    /// Grid from explicit, strictly increasing positive points.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(MorError::validation("empty frequency list"));
        }
        if points[0] <= 0.0 || points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MorError::validation(
                "frequencies must be positive and strictly increasing",
            ));
        }
        Ok(Self {
            f_min: points[0],
            f_max: *points.last().unwrap(),
            spacing: Spacing::Explicit,
            points,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepKind {
    Impedance,
    Scattering { z0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep {
    pub grid: FrequencyGrid,
    pub samples: Vec<DMatrix<Complex64>>,
    pub kind: SweepKind,
}

impl FrequencySweep {
    pub fn shape(&self) -> (usize, usize) {
        self.samples.first().map(|s| s.shape()).unwrap_or((0, 0))
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Transfer function at one (possibly negative) frequency in hertz.
pub fn evaluate_at<M: LinearModel + ?Sized>(model: &M, f: f64) -> Result<DMatrix<Complex64>> {
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let pencil: DMatrix<Complex64> =
        DMatrix::from_fn(model.order(), model.order(), |i, j| {
            s * model.c()[(i, j)] - model.g()[(i, j)]
        });
    let scale = pencil.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    let lu = LU::new(pencil);
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
    if scale == 0.0 || min_pivot <= PIVOT_TOL * scale {
        return Err(MorError::SingularPencil { frequency: f });
    }
    let x = lu
        .solve(&to_complex(model.b()))
        .ok_or(MorError::SingularPencil { frequency: f })?;
    Ok(to_complex(model.l()) * x)
}

/// Samples the transfer function on every grid point.
pub fn evaluate_tf<M: LinearModel + Sync + ?Sized>(
    model: &M,
    grid: &FrequencyGrid,
) -> Result<FrequencySweep> {
    let samples = grid
        .points()
        .par_iter()
        .map(|&f| evaluate_at(model, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencySweep {
        grid: grid.clone(),
        samples,
        kind: SweepKind::Impedance,
    })
}

fn same_grid(a: &FrequencySweep, b: &FrequencySweep) -> bool {
    a.grid.len() == b.grid.len()
        && a.samples.len() == b.samples.len()
        && a.grid
            .points()
            .iter()
            .zip(b.grid.points())
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
        && a.samples
            .iter()
            .zip(&b.samples)
            .all(|(x, y)| x.shape() == y.shape())
}

/// Per-point `‖a_i − b_i‖₂ / ‖a_i‖₂`; `+∞` where `a_i` vanishes.
pub fn relative_errors(a: &FrequencySweep, b: &FrequencySweep) -> Result<Vec<f64>> {
    if !same_grid(a, b) {
        return Err(MorError::GridMismatch);
    }
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            let denom = spectral_norm(x);
            if denom == 0.0 {
                f64::INFINITY
            } else {
                spectral_norm(&(x - y)) / denom
            }
        })
        .collect())
}

/// Maximum over the grid of `‖a_i − b_i‖₂ / ‖a_i‖₂`.
pub fn max_relative_error(a: &FrequencySweep, b: &FrequencySweep) -> Result<f64> {
    Ok(relative_errors(a, b)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Converts impedance samples to scattering parameters,
/// `S = (Z − z0 I)(Z + z0 I)^{-1}`.
pub fn h_to_s(sweep: &FrequencySweep, z0: f64) -> Result<FrequencySweep> {
    if sweep.kind != SweepKind::Impedance {
        return Err(MorError::Format("sweep is already scattering".into()));
    }
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(MorError::validation(format!("z0 must be positive, got {z0}")));
    }
    let (q, p) = sweep.shape();
    if q != p {
        return Err(MorError::Format(format!("S-parameters need a square H, got {q}x{p}")));
    }
    let eye = DMatrix::<Complex64>::identity(p, p) * Complex64::new(z0, 0.0);
    let samples = sweep
        .samples
        .iter()
        .zip(sweep.grid.points())
        .map(|(z, &f)| {
            let den = z + &eye;
            let num = z - &eye;
            // S = num · den⁻¹  ⇔  denᵀ Sᵀ = numᵀ
            let lu = LU::new(den.transpose());
            let scale = den.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
            let min_pivot = lu
                .u()
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |acc, v| acc.min(v.norm()));
            if min_pivot <= PIVOT_TOL * scale {
                return Err(MorError::SingularPencil { frequency: f });
            }
            let st = lu
                .solve(&num.transpose())
                .ok_or(MorError::SingularPencil { frequency: f })?;
            Ok(st.transpose())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencySweep {
        grid: sweep.grid.clone(),
        samples,
        kind: SweepKind::Scattering { z0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Touchstone,
}

/// Serializes a sweep. Values are written in shortest round-trip form.
pub fn export_sweep(sweep: &FrequencySweep, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Csv => Ok(to_csv(sweep)),
        ExportFormat::Touchstone => to_touchstone(sweep),
    }
}

fn param_letter(kind: SweepKind) -> char {
    match kind {
        SweepKind::Impedance => 'H',
        SweepKind::Scattering { .. } => 'S',
    }
}

fn to_csv(sweep: &FrequencySweep) -> String {
    let (q, p) = sweep.shape();
    let letter = param_letter(sweep.kind);
    let mut out = String::from("f_hz");
    for i in 1..=q {
        for j in 1..=p {
            let _ = write!(out, ",{letter}_{i}_{j}_re,{letter}_{i}_{j}_im");
        }
    }
    if let SweepKind::Scattering { z0 } = sweep.kind {
        let _ = write!(out, ",z0={z0:e}");
    }
    out.push('\n');
    for (f, s) in sweep.grid.points().iter().zip(&sweep.samples) {
        let _ = write!(out, "{f:e}");
        for i in 0..q {
            for j in 0..p {
                let z = s[(i, j)];
                let _ = write!(out, ",{:e},{:e}", z.re, z.im);
            }
        }
        out.push('\n');
    }
    out
}

fn format_err(msg: impl Into<String>) -> MorError {
    MorError::Format(msg.into())
}

/// Parses CSV written by [`export_sweep`].
pub fn parse_csv(text: &str) -> Result<FrequencySweep> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err("empty CSV"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"f_hz") {
        return Err(format_err("CSV header must start with f_hz"));
    }
    let mut kind = SweepKind::Impedance;
    let mut entries = Vec::new();
    for c in &cols[1..] {
        if let Some(z0) = c.strip_prefix("z0=") {
            let z0 = z0.parse().map_err(|_| format_err("bad z0 in header"))?;
            kind = SweepKind::Scattering { z0 };
            continue;
        }
        if let Some(stem) = c.strip_suffix("_re") {
            let parts: Vec<&str> = stem.split('_').collect();
            let [_, i, j] = parts[..] else {
                return Err(format_err(format!("bad column '{c}'")));
            };
            let i: usize = i.parse().map_err(|_| format_err("bad row index"))?;
            let j: usize = j.parse().map_err(|_| format_err("bad column index"))?;
            entries.push((i, j));
        }
    }
    let q = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let p = entries.iter().map(|e| e.1).max().unwrap_or(0);
    if q * p != entries.len() || q == 0 {
        return Err(format_err("CSV columns do not form a full matrix"));
    }
    let mut freqs = Vec::new();
    let mut samples = Vec::new();
    for line in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format_err(format!("bad number '{t}'"))))
            .collect::<Result<_>>()?;
        if vals.len() != 1 + 2 * q * p {
            return Err(format_err("CSV row has wrong column count"));
        }
        freqs.push(vals[0]);
        let mut m = DMatrix::zeros(q, p);
        for (k, &(i, j)) in entries.iter().enumerate() {
            m[(i - 1, j - 1)] = Complex64::new(vals[1 + 2 * k], vals[2 + 2 * k]);
        }
        samples.push(m);
    }
    Ok(FrequencySweep {
        grid: FrequencyGrid::from_points(freqs)?,
        samples,
        kind,
    })
}

/// Order of (row, col) entries on a Touchstone v1 data record.
fn touchstone_order(p: usize) -> Vec<(usize, usize)> {
    if p == 2 {
        vec![(0, 0), (1, 0), (0, 1), (1, 1)]
    } else {
        (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).collect()
    }
}

fn to_touchstone(sweep: &FrequencySweep) -> Result<String> {
    let SweepKind::Scattering { z0 } = sweep.kind else {
        return Err(format_err("Touchstone export needs scattering parameters"));
    };
    let (q, p) = sweep.shape();
    if q != p || p == 0 {
        return Err(format_err(format!("Touchstone needs a square matrix, got {q}x{p}")));
    }
    let mut out = format!("# Hz S RI R {z0}\n");
    let pair = |z: Complex64| format!("{:e} {:e}", z.re, z.im);
    for (f, s) in sweep.grid.points().iter().zip(&sweep.samples) {
        // One record line for 1- and 2-ports; otherwise one matrix row per
        // line, wrapped after four pairs.
        let lines: Vec<String> = if p <= 2 {
            vec![touchstone_order(p)
                .into_iter()
                .map(|(i, j)| pair(s[(i, j)]))
                .collect::<Vec<_>>()
                .join(" ")]
        } else {
            (0..p)
                .flat_map(|i| {
                    (0..p)
                        .collect::<Vec<_>>()
                        .chunks(4)
                        .map(|chunk| chunk.iter().map(|&j| pair(s[(i, j)])).collect::<Vec<_>>().join(" "))
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        let _ = writeln!(out, "{f:e} {}", lines[0]);
        for line in &lines[1..] {
            let _ = writeln!(out, "{line}");
        }
    }
    Ok(out)
}

/// Parses a Touchstone v1 file with `ports` ports.
pub fn parse_touchstone(text: &str, ports: usize) -> Result<FrequencySweep> {
    if ports == 0 {
        return Err(format_err("port count must be positive"));
    }
    let mut unit = 1e9;
    let mut fmt = "ma".to_string();
    let mut z0 = 50.0;
    let mut seen_option = false;
    let mut numbers = Vec::new();
    for line in text.lines() {
        let line = line.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_option {
                continue;
            }
            seen_option = true;
            let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
            let mut k = 0;
            while k < toks.len() {
                match toks[k].as_str() {
                    "hz" => unit = 1.0,
                    "khz" => unit = 1e3,
                    "mhz" => unit = 1e6,
                    "ghz" => unit = 1e9,
                    "s" => {}
                    "y" | "z" | "h" | "g" => {
                        return Err(format_err("only S-parameter Touchstone files are supported"))
                    }
                    "ri" | "ma" | "db" => fmt = toks[k].clone(),
                    "r" => {
                        k += 1;
                        z0 = toks
                            .get(k)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| format_err("bad reference impedance"))?;
                    }
                    other => return Err(format_err(format!("unknown option '{other}'"))),
                }
                k += 1;
            }
            continue;
        }
        for tok in line.split_whitespace() {
            numbers.push(
                tok.parse::<f64>()
                    .map_err(|_| format_err(format!("bad number '{tok}'")))?,
            );
        }
    }
    let per_point = 1 + 2 * ports * ports;
    if numbers.is_empty() || numbers.len() % per_point != 0 {
        return Err(format_err(format!(
            "{} values do not divide into records of {per_point}",
            numbers.len()
        )));
    }
    let order = touchstone_order(ports);
    let mut freqs = Vec::new();
    let mut samples = Vec::new();
    for rec in numbers.chunks(per_point) {
        freqs.push(rec[0] * unit);
        let mut m = DMatrix::zeros(ports, ports);
        for (k, &(i, j)) in order.iter().enumerate() {
            let (a, b) = (rec[1 + 2 * k], rec[2 + 2 * k]);
            m[(i, j)] = match fmt.as_str() {
                "ri" => Complex64::new(a, b),
                "ma" => Complex64::from_polar(a, b.to_radians()),
                _ => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
            };
        }
        samples.push(m);
    }
    Ok(FrequencySweep {
        grid: FrequencyGrid::from_points(freqs)?,
        samples,
        kind: SweepKind::Scattering { z0 },
    })
}

/// Plot-ready long format: `f_hz,i,j,magnitude_db,phase_deg`.
pub fn to_long_csv(sweep: &FrequencySweep) -> String {
    let mut out = String::from("f_hz,i,j,magnitude_db,phase_deg\n");
    for (f, s) in sweep.grid.points().iter().zip(&sweep.samples) {
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                let z = s[(i, j)];
                let _ = writeln!(
                    out,
                    "{f:e},{},{},{:e},{:e}",
                    i + 1,
                    j + 1,
                    20.0 * z.norm().log10(),
                    z.arg().to_degrees()
                );
            }
        }
    }
    out
}
