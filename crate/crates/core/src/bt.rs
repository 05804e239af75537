//! Dense balanced truncation: full Gramians, Hankel singular values,
//! square-root balancing and the a-priori error bound.
//!
//! The Gramians are those of the standard-form system `A = C⁻¹G`,
//! `B_C = C⁻¹B`:
//!
//! ```text
//! A P + P Aᵀ = −B_C B_Cᵀ        Aᵀ Q + Q A = −Lᵀ L
//! ```
//!
//! Truncation projects the standard-form system, so reduced models always
//! carry `C̃ = I`.

use nalgebra::DMatrix;

use crate::error::{MorError, Result};
use crate::linalg::{psd_factor, solve_lyapunov_dense, svd, Factorization, Operator, RealSchur, Svd};
use crate::system::{DescriptorSystem, LinearModel};

/// Singular values below this fraction of σ₁ are treated as numerical zeros.
pub const RANK_TOL: f64 = 1e-12;

/// Eigenvalues with real part above `-STABILITY_TOL · ‖A‖_F` are rejected.
pub const STABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GramianPair {
    /// Controllability Gramian.
    pub p: DMatrix<f64>,
    /// Observability Gramian.
    pub q: DMatrix<f64>,
}

/// Hankel singular values in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvSpectrum(Vec<f64>);

impl HsvSpectrum {
    pub fn new(mut sigmas: Vec<f64>) -> Self {
        for s in &mut sigmas {
            *s = s.max(0.0);
        }
        sigmas.sort_by(|a, b| b.total_cmp(a));
        Self(sigmas)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of values above `RANK_TOL · σ₁`.
    pub fn numerical_rank(&self) -> usize {
        match self.0.first() {
            Some(&s1) if s1 > 0.0 => self.0.iter().take_while(|&&s| s > RANK_TOL * s1).count(),
            _ => 0,
        }
    }

    /// `Σ_{i>r} σ_i`.
    pub fn tail(&self, r: usize) -> f64 {
        self.0.iter().skip(r).fold(0.0, |acc, s| acc + s)
    }

    /// A-priori bound `2 Σ_{i>r} σ_i`.
    pub fn bound(&self, r: usize) -> f64 {
        2.0 * self.tail(r)
    }

    pub fn prefix(&self, r: usize) -> HsvSpectrum {
        HsvSpectrum(self.0[..r.min(self.0.len())].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderRequest {
    Fixed(usize),
    /// Relative HSV tail `Σ_{i>r} σ_i / Σ_i σ_i` not exceeding the value.
    TargetError(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Dense,
    Eksm { iterations: usize },
}

/// Reduced-order model `(G̃, C̃, B̃, L̃)`.
#[derive(Debug, Clone)]
pub struct Rom {
    pub g: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub retained_hsvs: HsvSpectrum,
    pub apriori_bound: f64,
    pub provenance: Provenance,
    pub port_names: Vec<String>,
}

impl Rom {
    pub fn order(&self) -> usize {
        self.g.nrows()
    }

    /// Generalized eigenvalues of `(G̃, C̃)`.
    pub fn poles(&self) -> Result<Vec<(f64, f64)>> {
        let cf = Factorization::new(Operator::C, &self.c)?;
        Ok(RealSchur::new(&cf.solve(&self.g))?.eigenvalues())
    }
}

impl LinearModel for Rom {
    fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
    fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    fn l(&self) -> &DMatrix<f64> {
        &self.l
    }
}

/// Standard-form operators `A = C⁻¹G` and `B_C = C⁻¹B` together with the
/// factorization of `C`.
pub fn standard_form(sys: &DescriptorSystem) -> Result<(Factorization, DMatrix<f64>, DMatrix<f64>)> {
    let cf = Factorization::new(Operator::C, &sys.c)?;
    let a = cf.solve(&sys.g);
    let bc = cf.solve(&sys.b);
    Ok((cf, a, bc))
}

/// Rejects matrices with eigenvalues that are not strictly in the left
/// half-plane.
pub fn check_stability(a: &DMatrix<f64>) -> Result<()> {
    let eigs = RealSchur::new(a)?.eigenvalues();
    let limit = -STABILITY_TOL * a.norm();
    let bad: Vec<(f64, f64)> = eigs.into_iter().filter(|(re, _)| *re >= limit).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(MorError::Unstable { eigenvalues: bad })
    }
}

/// Solves both Gramian equations densely.
pub fn solve_gramians_dense(sys: &DescriptorSystem) -> Result<GramianPair> {
    let (_, a, bc) = standard_form(sys)?;
    check_stability(&a)?;
    let p = solve_lyapunov_dense(&a, &(&bc * bc.transpose()))?;
    let q = solve_lyapunov_dense(&a.transpose(), &(sys.l.transpose() * &sys.l))?;
    Ok(GramianPair { p, q })
}

/// Square-root factors of both Gramians.
pub fn gramian_factors(gram: &GramianPair) -> (DMatrix<f64>, DMatrix<f64>) {
    (psd_factor(&gram.p), psd_factor(&gram.q))
}

/// HSVs as singular values of `Z_Qᵀ Z_P`.
pub fn hankel_singular_values(gram: &GramianPair) -> Result<HsvSpectrum> {
    let (zp, zq) = gramian_factors(gram);
    Ok(Balancer::new(&zp, &zq)?.hsv().clone())
}

/// Picks the reduced order for a request.
pub fn choose_order(hsv: &HsvSpectrum, request: OrderRequest) -> Result<usize> {
    if hsv.is_empty() {
        return Err(MorError::validation("empty Hankel singular value spectrum"));
    }
    match request {
        OrderRequest::Fixed(0) => Err(MorError::validation("reduced order must be at least 1")),
        OrderRequest::Fixed(r) => Ok(r.min(hsv.len())),
        OrderRequest::TargetError(eps) => {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(MorError::validation(format!("target error must be > 0, got {eps}")));
            }
            let total: f64 = hsv.sigmas().iter().sum();
            if total == 0.0 {
                return Ok(1);
            }
            let mut tail = total;
            for (r, s) in hsv.sigmas().iter().enumerate() {
                if r >= 1 && tail / total <= eps {
                    return Ok(r);
                }
                tail -= s;
            }
            Ok(hsv.len())
        }
    }
}

/// Square-root balancing from Gramian factors `P ≈ Z_P Z_Pᵀ`, `Q ≈ Z_Q Z_Qᵀ`.
#[derive(Debug, Clone)]
pub struct Balancer<'a> {
    zp: &'a DMatrix<f64>,
    zq: &'a DMatrix<f64>,
    svd: Svd,
    hsv: HsvSpectrum,
}

impl<'a> Balancer<'a> {
    pub fn new(zp: &'a DMatrix<f64>, zq: &'a DMatrix<f64>) -> Result<Self> {
        if zp.nrows() != zq.nrows() {
            return Err(MorError::validation("Gramian factors have different row counts"));
        }
        let svd = svd(&zq.tr_mul(zp))?;
        let hsv = HsvSpectrum::new(svd.sigma.iter().copied().collect());
        Ok(Self { zp, zq, svd, hsv })
    }

    pub fn hsv(&self) -> &HsvSpectrum {
        &self.hsv
    }

    /// Largest order admitted by the rank guard.
    pub fn max_order(&self) -> usize {
        self.hsv.numerical_rank()
    }

    /// `T = Σ_r^{-1/2} U_rᵀ Z_Qᵀ` (r×N) and `T⁻¹ = Z_P V_r Σ_r^{-1/2}` (N×r).
    pub fn transform(&self, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let max = self.max_order();
        if r == 0 || r > max {
            return Err(MorError::Rank { requested: r, max });
        }
        let inv_sqrt: Vec<f64> = self.svd.sigma.iter().take(r).map(|s| 1.0 / s.sqrt()).collect();
        let mut ur = self.svd.u.columns(0, r).into_owned();
        let mut vr = self.svd.v_t.rows(0, r).transpose();
        for (k, w) in inv_sqrt.iter().enumerate() {
            ur.column_mut(k).scale_mut(*w);
            vr.column_mut(k).scale_mut(*w);
        }
        let t = ur.tr_mul(&self.zq.transpose());
        let t_inv = self.zp * vr;
        Ok((t, t_inv))
    }

    /// Projects the standard form of `sys` onto the leading `r` balanced
    /// states.
    pub fn truncate(
        &self,
        sys: &DescriptorSystem,
        cf: &Factorization,
        r: usize,
        provenance: Provenance,
    ) -> Result<Rom> {
        let (t, t_inv) = self.transform(r)?;
        let a_tinv = cf.solve(&(&sys.g * &t_inv));
        let bc = cf.solve(&sys.b);
        Ok(Rom {
            g: &t * a_tinv,
            c: DMatrix::identity(r, r),
            b: &t * bc,
            l: &sys.l * &t_inv,
            retained_hsvs: self.hsv.prefix(r),
            apriori_bound: self.hsv.bound(r),
            provenance,
            port_names: sys.port_names.clone(),
        })
    }
}

/// Balances and truncates `sys` to order `r` from Gramian factors.
pub fn balance_truncate(
    sys: &DescriptorSystem,
    zp: &DMatrix<f64>,
    zq: &DMatrix<f64>,
    r: usize,
    provenance: Provenance,
) -> Result<Rom> {
    let cf = Factorization::new(Operator::C, &sys.c)?;
    Balancer::new(zp, zq)?.truncate(sys, &cf, r, provenance)
}

/// Dense balanced truncation end to end.
pub fn reduce_dense(sys: &DescriptorSystem, request: OrderRequest) -> Result<Rom> {
    let gram = solve_gramians_dense(sys)?;
    let (zp, zq) = gramian_factors(&gram);
    let balancer = Balancer::new(&zp, &zq)?;
    let r = match request {
        OrderRequest::TargetError(_) => {
            choose_order(balancer.hsv(), request)?.min(balancer.max_order().max(1))
        }
        OrderRequest::Fixed(_) => choose_order(balancer.hsv(), request)?,
    };
    let cf = Factorization::new(Operator::C, &sys.c)?;
    balancer.truncate(sys, &cf, r, Provenance::Dense)
}
