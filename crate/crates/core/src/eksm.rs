//! Low-rank balanced truncation on extended Krylov subspaces.
//!
//! Each side grows an orthonormal basis of
//! `span{B_C, G_C⁻¹B_C, G_C B_C, G_C⁻²B_C, ...}` with `G_C = C⁻¹G`
//! (controllability) or of the same sequence for `G_Cᵀ` started from `Lᵀ`
//! (observability). Products with `G_C` and its inverse are linear solves
//! against factorizations of `C`, `G`, `Cᵀ` and `Gᵀ`.
//!
//! Both sides advance in lockstep. After every pass the projected Lyapunov
//! equations are solved, a reduced model is balanced from the current
//! low-rank factors, and its transfer function is sampled on a frequency
//! grid. Iteration stops once the sampled transfer function changes by less
//! than `tol` (relative, spectral norm) on three consecutive passes.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bt::{choose_order, Balancer, OrderRequest, Provenance, Rom};
use crate::error::{MorError, Result};
use crate::freq::{evaluate_tf, FrequencyGrid};
use crate::linalg::{
    orth, psd_factor, solve_lyapunov_dense, spectral_norm, try_orth_against, Factorization,
    Operator,
};
use crate::system::DescriptorSystem;

/// Consecutive sub-tolerance criterion values required to stop.
pub const CONSECUTIVE_BELOW_TOL: usize = 3;
pub const DEFAULT_MAXITER: usize = 50;
pub const DEFAULT_BASIS_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Controllability,
    Observability,
}

/// Factorizations shared by both sides of a reduction.
#[derive(Debug)]
pub struct Operators {
    g: DMatrix<f64>,
    c: DMatrix<f64>,
    c_fact: Factorization,
    g_fact: Factorization,
    ct_fact: Factorization,
    gt_fact: Factorization,
    b_c: DMatrix<f64>,
    l_t: DMatrix<f64>,
}

impl Operators {
    pub fn new(sys: &DescriptorSystem) -> Result<Self> {
        let c_fact = Factorization::new(Operator::C, &sys.c)?;
        let g_fact = Factorization::new(Operator::G, &sys.g)?;
        let ct_fact = Factorization::new(Operator::CT, &sys.c.transpose())?;
        let gt_fact = Factorization::new(Operator::GT, &sys.g.transpose())?;
        let b_c = c_fact.solve(&sys.b);
        Ok(Self {
            g: sys.g.clone(),
            c: sys.c.clone(),
            c_fact,
            g_fact,
            ct_fact,
            gt_fact,
            b_c,
            l_t: sys.l.transpose(),
        })
    }

    pub fn order(&self) -> usize {
        self.g.nrows()
    }

    pub fn c_factorization(&self) -> &Factorization {
        &self.c_fact
    }

    /// `G_C K` (controllability) or `G_Cᵀ K` (observability).
    pub fn apply(&self, side: Side, k: &DMatrix<f64>) -> DMatrix<f64> {
        match side {
            Side::Controllability => self.c_fact.solve(&(&self.g * k)),
            Side::Observability => self.g.tr_mul(&self.ct_fact.solve(k)),
        }
    }

    /// `G_C⁻¹ K` (controllability) or `G_C⁻ᵀ K` (observability).
    pub fn apply_inverse(&self, side: Side, k: &DMatrix<f64>) -> DMatrix<f64> {
        match side {
            Side::Controllability => self.g_fact.solve(&(&self.c * k)),
            Side::Observability => self.c.tr_mul(&self.gt_fact.solve(k)),
        }
    }

    /// `B_C` or `Lᵀ`.
    pub fn start_block(&self, side: Side) -> &DMatrix<f64> {
        match side {
            Side::Controllability => &self.b_c,
            Side::Observability => &self.l_t,
        }
    }
}

/// Extended Krylov basis for one side.
#[derive(Debug, Clone)]
pub struct EksState {
    ops: Arc<Operators>,
    side: Side,
    basis: DMatrix<f64>,
    /// `G_C` applied to every basis column, kept in step with `basis`.
    applied: DMatrix<f64>,
    /// Newest columns derived from positive powers.
    forward: Range<usize>,
    /// Newest columns derived from negative powers.
    inverse: Range<usize>,
    iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    Grew(usize),
    Stagnated,
    Capped,
}

impl EksState {
    /// Orthonormal basis of `[B_C, G_C⁻¹ B_C]` (or its observability analogue).
    pub fn init(ops: Arc<Operators>, side: Side) -> Result<Self> {
        let start = ops.start_block(side);
        let fwd = orth(start)?;
        let inv = try_orth_against(&ops.apply_inverse(side, start), &fwd);
        let (wf, wi) = (fwd.ncols(), inv.ncols());
        let mut basis = DMatrix::zeros(ops.order(), wf + wi);
        basis.columns_mut(0, wf).copy_from(&fwd);
        basis.columns_mut(wf, wi).copy_from(&inv);
        let applied = ops.apply(side, &basis);
        Ok(Self {
            ops,
            side,
            basis,
            applied,
            forward: 0..wf,
            inverse: wf..wf + wi,
            iteration: 1,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn width(&self) -> usize {
        self.basis.ncols()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    /// Widths of the newest forward and inverse blocks.
    pub fn newest_widths(&self) -> (usize, usize) {
        (self.forward.len(), self.inverse.len())
    }

    /// Appends `G_C` applied to the newest forward block and `G_C⁻¹` applied
    /// to the newest inverse block, orthonormalized against the basis.
    pub fn expand(&mut self, cap: usize) -> Expansion {
        let width = self.width();
        if width >= cap {
            return Expansion::Capped;
        }
        let fwd_new = self.applied.columns_range(self.forward.clone()).into_owned();
        let inv_src = self.basis.columns_range(self.inverse.clone()).into_owned();
        let inv_new = if inv_src.ncols() > 0 {
            self.ops.apply_inverse(self.side, &inv_src)
        } else {
            DMatrix::zeros(self.basis.nrows(), 0)
        };

        let k_fwd = try_orth_against(&fwd_new, &self.basis);
        let mut grown = self.basis.clone().resize_horizontally(width + k_fwd.ncols(), 0.0);
        grown.columns_mut(width, k_fwd.ncols()).copy_from(&k_fwd);
        let k_inv = try_orth_against(&inv_new, &grown);

        let room = cap - width;
        let wf = k_fwd.ncols().min(room);
        let wi = k_inv.ncols().min(room - wf);
        if wf + wi == 0 {
            return Expansion::Stagnated;
        }
        let mut new_cols = DMatrix::zeros(self.basis.nrows(), wf + wi);
        new_cols.columns_mut(0, wf).copy_from(&k_fwd.columns(0, wf));
        new_cols.columns_mut(wf, wi).copy_from(&k_inv.columns(0, wi));
        let new_applied = self.ops.apply(self.side, &new_cols);

        self.basis = self.basis.clone().resize_horizontally(width + wf + wi, 0.0);
        self.basis.columns_mut(width, wf + wi).copy_from(&new_cols);
        self.applied = self.applied.clone().resize_horizontally(width + wf + wi, 0.0);
        self.applied.columns_mut(width, wf + wi).copy_from(&new_applied);
        self.forward = width..width + wf;
        self.inverse = width + wf..width + wf + wi;
        self.iteration += 1;
        Expansion::Grew(wf + wi)
    }
}

/// Builds the controllability or observability basis for `sys`.
pub fn eks_init(sys: &DescriptorSystem, side: Side) -> Result<EksState> {
    EksState::init(Arc::new(Operators::new(sys)?), side)
}

/// Solution of the projected Lyapunov equation `A X + X Aᵀ = −R Rᵀ`.
#[derive(Debug, Clone)]
pub struct Projected {
    pub a: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl Projected {
    /// Low-rank Gramian factor `Z = K U Σ^{1/2}` with `X = U Σ Uᵀ`.
    pub fn factor(&self, state: &EksState) -> DMatrix<f64> {
        state.basis() * psd_factor(&self.x)
    }
}

/// Projects the side's Lyapunov equation onto its basis and solves it.
pub fn project_and_solve(state: &EksState) -> Result<Projected> {
    let k = state.basis();
    let a = k.tr_mul(&state.applied);
    let r = k.tr_mul(state.ops.start_block(state.side));
    let x = solve_lyapunov_dense(&a, &(&r * r.transpose()))?;
    Ok(Projected { a, r, x })
}

/// `max_i ‖cur_i − prev_i‖₂ / ‖cur_i‖₂` over the grid.
pub fn transfer_change(current: &[DMatrix<Complex64>], previous: &[DMatrix<Complex64>]) -> f64 {
    current
        .iter()
        .zip(previous)
        .map(|(c, p)| {
            let diff = spectral_norm(&(c - p));
            if diff == 0.0 {
                0.0
            } else {
                diff / spectral_norm(c)
            }
        })
        .fold(0.0, f64::max)
}

/// Reduced model built from the current bases, with its grid samples.
#[derive(Debug, Clone)]
pub struct Probe {
    pub rom: Rom,
    pub samples: Vec<DMatrix<Complex64>>,
    /// Change relative to the previous probe; `+∞` for the first one.
    pub criterion: f64,
}

/// Balances a reduced model from both current low-rank factors and measures
/// how far its transfer function moved since `previous`.
#[allow(clippy::too_many_arguments)]
pub fn probe_rom(
    sys: &DescriptorSystem,
    p_state: &EksState,
    p_sol: &Projected,
    q_state: &EksState,
    q_sol: &Projected,
    grid: &FrequencyGrid,
    target_error: f64,
    previous: Option<&[DMatrix<Complex64>]>,
) -> Result<Probe> {
    let zp = p_sol.factor(p_state);
    let zq = q_sol.factor(q_state);
    if zp.ncols() == 0 || zq.ncols() == 0 {
        return Err(MorError::EmptyBasis);
    }
    let balancer = Balancer::new(&zp, &zq)?;
    let r = choose_order(balancer.hsv(), OrderRequest::TargetError(target_error))?
        .min(balancer.max_order().max(1));
    let rom = balancer.truncate(
        sys,
        p_state.ops.c_factorization(),
        r,
        Provenance::Eksm {
            iterations: p_state.iteration().max(q_state.iteration()),
        },
    )?;
    let samples = evaluate_tf(&rom, grid)?.samples;
    let criterion = previous.map_or(f64::INFINITY, |prev| transfer_change(&samples, prev));
    Ok(Probe {
        rom,
        samples,
        criterion,
    })
}

/// Tracks the "below `tol` on consecutive passes" stopping rule.
#[derive(Debug, Clone)]
pub struct StopRule {
    tol: f64,
    run: usize,
}

impl StopRule {
    pub fn new(tol: f64) -> Self {
        Self { tol, run: 0 }
    }

    /// Records one criterion value; returns true when iteration should stop.
    pub fn observe(&mut self, criterion: f64) -> bool {
        if criterion < self.tol {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.run >= CONSECUTIVE_BELOW_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ThreeBelowTol,
    Maxiter,
    BasisCap,
    /// Neither basis could grow: both subspaces are invariant.
    Stagnation,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ThreeBelowTol => "three_below_tol",
            StopReason::Maxiter => "maxiter",
            StopReason::BasisCap => "basis_cap",
            StopReason::Stagnation => "stagnation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub j: usize,
    pub basis_p: usize,
    pub basis_q: usize,
    pub criterion: f64,
    pub probe_r: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    pub stop_reason: StopReason,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,basis_p,basis_q,criterion,probe_r\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{}",
                r.j, r.basis_p, r.basis_q, r.criterion, r.probe_r
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EksmConfig {
    pub tol: f64,
    pub target_error: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub maxiter: usize,
    /// Per-side column cap; `None` means `min(N, 2000)`.
    pub basis_cap: Option<usize>,
}

impl Default for EksmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-2,
            target_error: 1e-2,
            f_min: 1e8,
            f_max: 1e10,
            points: crate::freq::DEFAULT_POINTS,
            maxiter: DEFAULT_MAXITER,
            basis_cap: None,
        }
    }
}

impl EksmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(MorError::validation(format!("tol must be >= 0, got {}", self.tol)));
        }
        if !(self.target_error > 0.0) || !self.target_error.is_finite() {
            return Err(MorError::validation(format!(
                "target_error must be > 0, got {}",
                self.target_error
            )));
        }
        if self.maxiter == 0 {
            return Err(MorError::validation("maxiter must be at least 1"));
        }
        if self.basis_cap == Some(0) {
            return Err(MorError::validation("basis cap must be at least 1"));
        }
        FrequencyGrid::linear(self.f_min, self.f_max, self.points).map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct EksmReduction {
    pub rom: Rom,
    pub trace: ConvergenceTrace,
    /// Controllability factor, `P ≈ Z_P Z_Pᵀ`.
    pub zp: DMatrix<f64>,
    /// Observability factor, `Q ≈ Z_Q Z_Qᵀ`.
    pub zq: DMatrix<f64>,
}

/// Runs the dual extended Krylov iteration to convergence.
pub fn reduce_eksm(sys: &DescriptorSystem, config: &EksmConfig) -> Result<EksmReduction> {
    config.validate()?;
    let grid = FrequencyGrid::linear(config.f_min, config.f_max, config.points)?;
    let n = sys.g.nrows();
    let cap = config.basis_cap.unwrap_or(DEFAULT_BASIS_CAP.min(n)).min(n);

    let ops = Arc::new(Operators::new(sys)?);
    let (p_state, q_state) = rayon::join(
        || EksState::init(ops.clone(), Side::Controllability),
        || EksState::init(ops.clone(), Side::Observability),
    );
    let (mut p_state, mut q_state) = (p_state?, q_state?);

    let mut rule = StopRule::new(config.tol);
    let mut records = Vec::new();
    let mut previous: Option<Vec<DMatrix<Complex64>>> = None;
    let mut j = 1;
    loop {
        let (p_sol, q_sol) = rayon::join(|| project_and_solve(&p_state), || project_and_solve(&q_state));
        let (p_sol, q_sol) = (p_sol?, q_sol?);
        let probe = probe_rom(
            sys,
            &p_state,
            &p_sol,
            &q_state,
            &q_sol,
            &grid,
            config.target_error,
            previous.as_deref(),
        )?;
        records.push(TraceRecord {
            j,
            basis_p: p_state.width(),
            basis_q: q_state.width(),
            criterion: probe.criterion,
            probe_r: probe.rom.order(),
        });

        let stop = if rule.observe(probe.criterion) {
            Some(StopReason::ThreeBelowTol)
        } else if j >= config.maxiter {
            Some(StopReason::Maxiter)
        } else {
            let (ep, eq) = rayon::join(|| p_state.expand(cap), || q_state.expand(cap));
            let grew = |e: Expansion| matches!(e, Expansion::Grew(_));
            if grew(ep) || grew(eq) {
                None
            } else if ep == Expansion::Capped || eq == Expansion::Capped {
                Some(StopReason::BasisCap)
            } else {
                Some(StopReason::Stagnation)
            }
        };

        if let Some(stop_reason) = stop {
            let mut rom = probe.rom;
            rom.provenance = Provenance::Eksm { iterations: j };
            let unstable: Vec<(f64, f64)> = rom
                .poles()?
                .into_iter()
                .filter(|(re, _)| *re >= 0.0)
                .collect();
            if !unstable.is_empty() {
                return Err(MorError::Unstable { eigenvalues: unstable });
            }
            return Ok(EksmReduction {
                rom,
                trace: ConvergenceTrace {
                    records,
                    stop_reason,
                },
                zp: p_sol.factor(&p_state),
                zq: q_sol.factor(&q_state),
            });
        }
        previous = Some(probe.samples);
        j += 1;
    }
}
