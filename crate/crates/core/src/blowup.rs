//! Futaki invariants of one-point blowups `Bl_p M` in the class
//! `pi^*[omega] - eps^2 [E]`, their closed-form expansions in `eps`, the
//! inner product of lifted fields, the gluing obstruction and the verdict
//! engine.
//!
//! Integrals here use the measure `omega^m` (not `omega^m / m!`).  The
//! Laplacian entering the expansions is `kappa * Delta` with `Delta` the
//! complex Laplacian of the model and `kappa` fixed by [`calibrate`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{factorial, AlgebraElement, MomentVector};
use crate::burns_simanca::{BlowupChart, GluedPotential, LiftedHamiltonian, RadialProfile};
use crate::error::{KstabError, Result};
use crate::models::builders::diagonal_torus;
use crate::models::{ModelSpec, OrbitPoint};
use crate::quadrature::{halton, inverse_normal_cdf};
use crate::stability::{
    alldelta_check, flow_limit, sample_directions, working_basis, AllDeltaReport, ClassifyOptions, Subgroup,
};

/// Laplacian scale used before calibration has been run.
pub const DEFAULT_LAPLACIAN_FACTOR: f64 = 1.0 / (2.0 * PI);

/// Tolerance for "the field vanishes at p".
pub const VANISHING_TOL: f64 = 1e-8;

/// One candidate normalization of the Laplacian and how well it reproduces
/// the lifted-Hamiltonian deficit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateFit {
    pub label: String,
    pub factor: f64,
    pub relative_error: f64,
}

/// Result of checking the closed-form blowup identities against radial
/// quadrature of the glued metric on `P^m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub m: usize,
    pub eps: f64,
    /// Selected `kappa`.
    pub laplacian_factor: f64,
    /// Relative error of the volume identity `eps^{2m}`.
    pub volume_error: f64,
    /// Relative error of the total scalar curvature identity.
    pub scalar_error: f64,
    pub candidates: Vec<CandidateFit>,
}

/// Convention state carried by every blowup report.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum PiConvention {
    Uncalibrated { laplacian_factor: f64 },
    Calibrated(Calibration),
}

impl PiConvention {
    pub fn laplacian_factor(&self) -> f64 {
        match self {
            PiConvention::Uncalibrated { laplacian_factor } => *laplacian_factor,
            PiConvention::Calibrated(c) => c.laplacian_factor,
        }
    }

    pub fn is_calibrated(&self) -> bool {
        matches!(self, PiConvention::Calibrated(_))
    }
}

const CAL_TOL: f64 = 1e-4;

/// Calibrates the Laplacian normalization on `P^m` (unit scale, `p = [1:0:...:0]`)
/// at `eps = 0.1`: the volume and total scalar curvature identities must hold,
/// and the lifted-Hamiltonian deficit selects `kappa` among the candidates
/// `1`, `1/(2 pi)` and `2 pi`.
pub fn calibrate(profile: &RadialProfile) -> Result<Calibration> {
    let m = profile.m;
    let eps: f64 = 0.1;
    let model = diagonal_torus(vec![crate::algebra::Factor { dim: m, scale: 1.0 }])?;
    let mut e0 = vec![0.0; m + 1];
    e0[0] = 1.0;
    let p = OrbitPoint::real(&[&e0])?;
    let chart = BlowupChart::new(&model, &p)?;
    let glued = GluedPotential::new(chart.clone(), eps, &profile.solution)?;
    let e2m = eps.powi(2 * m as i32);
    let volume_error = (glued.volume_deficit()? / e2m - 1.0).abs();
    let scalar_target = 2.0 * PI * (m * (m - 1)) as f64 * eps.powi(2 * m as i32 - 2);
    let scalar_error = (glued.scalar_deficit()? / scalar_target - 1.0).abs();
    // h = a (|z_0|^2/|z|^2 - 1/(m+1)), fixed by the torus
    let mut d = vec![0.0; m + 1];
    d[0] = 1.0;
    let block = crate::algebra::CMat::from_diagonal(&DVector::from_iterator(
        m + 1,
        d.iter().map(|x| num_complex::Complex64::new(*x, 0.0)),
    ));
    let h = chart.hamiltonian(std::slice::from_ref(&block));
    let lift = LiftedHamiltonian::torus_only(&h);
    let numeric = glued.lift_deficit(&lift)?;
    let lap = model.laplacian_blocks(&[block], &p);
    let candidates: Vec<CandidateFit> =
        [("complex", 1.0), ("complex/2pi", 1.0 / (2.0 * PI)), ("2pi*complex", 2.0 * PI)]
            .iter()
            .map(|&(label, k)| {
                let pred = e2m * h.at_p + eps * eps * e2m * k * lap / (m as f64 + 1.0);
                CandidateFit { label: label.into(), factor: k, relative_error: (numeric / pred - 1.0).abs() }
            })
            .collect();
    let best =
        candidates.iter().min_by(|a, b| a.relative_error.total_cmp(&b.relative_error)).expect("three candidates");
    if volume_error > CAL_TOL || scalar_error > CAL_TOL || best.relative_error > CAL_TOL {
        return Err(KstabError::Calibration(format!(
            "blowup identities not reproduced: volume error {volume_error:.2e}, scalar error {scalar_error:.2e}, best Laplacian fit {:.2e}",
            best.relative_error
        )));
    }
    Ok(Calibration {
        m,
        eps,
        laplacian_factor: best.factor,
        volume_error,
        scalar_error,
        candidates: candidates.clone(),
    })
}

/// A model, a point and a blowup parameter.
#[derive(Clone, Debug)]
pub struct BlowupContext {
    pub model: ModelSpec,
    pub p: OrbitPoint,
    pub eps: f64,
    pub m: usize,
    /// `V = int omega^m / m!`.
    pub volume: f64,
    /// `V_eps = V - eps^{2m} / m!`.
    pub volume_eps: f64,
    pub s_bar: f64,
    pub s_bar_eps: f64,
    pub convention: PiConvention,
}

impl BlowupContext {
    pub fn new(model: &ModelSpec, p: &OrbitPoint, eps: f64) -> Result<Self> {
        model.require_blowup_dimension()?;
        model.check_point(p)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(KstabError::Validation(format!("eps = {eps} must be positive")));
        }
        let m = model.total_dim();
        let mf = factorial(m);
        let volume = model.volume();
        let e2m = eps.powi(2 * m as i32);
        let volume_eps = volume - e2m / mf;
        if !(volume_eps > 0.0) {
            return Err(KstabError::Validation(format!("eps = {eps} leaves no volume on the blowup")));
        }
        let s_bar = model.scalar_curvature();
        let s_bar_eps =
            (s_bar * mf * volume - 2.0 * PI * (m * (m - 1)) as f64 * eps.powi(2 * m as i32 - 2)) / (mf * volume - e2m);
        Ok(BlowupContext {
            model: model.clone(),
            p: p.clone(),
            eps,
            m,
            volume,
            volume_eps,
            s_bar,
            s_bar_eps,
            convention: PiConvention::Uncalibrated { laplacian_factor: DEFAULT_LAPLACIAN_FACTOR },
        })
    }

    pub fn with_calibration(mut self, cal: &Calibration) -> Self {
        self.convention = PiConvention::Calibrated(cal.clone());
        self
    }

    /// Same model, point and convention at another `eps`.
    pub fn at_eps(&self, eps: f64) -> Result<Self> {
        let mut ctx = BlowupContext::new(&self.model, &self.p, eps)?;
        ctx.convention = self.convention.clone();
        Ok(ctx)
    }

    /// Same model, `eps` and convention at another point.
    pub fn at_point(&self, q: &OrbitPoint) -> Result<Self> {
        let mut ctx = BlowupContext::new(&self.model, q, self.eps)?;
        ctx.convention = self.convention.clone();
        Ok(ctx)
    }

    /// `h_xi(p)`.
    pub fn h_at_p(&self, xi: &AlgebraElement) -> f64 {
        self.model.hamiltonian(xi, &self.p)
    }

    /// `kappa Delta h_xi(p)`.
    pub fn laplacian_at_p(&self, xi: &AlgebraElement) -> f64 {
        self.convention.laplacian_factor() * self.model.laplacian_blocks(&self.model.algebra.blocks_of(xi), &self.p)
    }

    /// Errors unless the field of `xi` vanishes at `p`.
    pub fn require_vanishing(&self, xi: &AlgebraElement) -> Result<()> {
        check_dim(&self.model, xi)?;
        let v = self.model.infinitesimal_action(&self.p) * &xi.0;
        if v.norm() > VANISHING_TOL * (1.0 + xi.0.norm()) {
            return Err(KstabError::Validation(format!(
                "the vector field does not vanish at p (|v(p)| = {:.3e}); only fields fixing p lift to the blowup",
                v.norm()
            )));
        }
        Ok(())
    }
}

fn check_dim(model: &ModelSpec, xi: &AlgebraElement) -> Result<()> {
    if xi.0.len() != model.algebra.dim() {
        return Err(KstabError::Validation(format!(
            "element has {} coefficients but the algebra has dimension {}",
            xi.0.len(),
            model.algebra.dim()
        )));
    }
    Ok(())
}

/// Quasi-Monte-Carlo average over `M` for the Fubini-Study volume form:
/// uniform points on the unit spheres push forward to normalized `omega^m`.
pub fn model_average<F>(model: &ModelSpec, f: F, samples: usize) -> Result<f64>
where
    F: Fn(&OrbitPoint) -> f64 + Sync,
{
    let dims: usize = model.factors().iter().map(|f| 2 * (f.dim + 1)).sum();
    if dims > 24 {
        return Err(KstabError::Validation("model too large for the quasi-Monte-Carlo integrator".into()));
    }
    let total: f64 = (1..=samples as u64)
        .into_par_iter()
        .map(|i| {
            let u = halton(i, dims);
            let mut k = 0;
            let coords = model
                .factors()
                .iter()
                .map(|fac| {
                    let v = DVector::from_fn(fac.dim + 1, |_, _| {
                        let z = num_complex::Complex64::new(inverse_normal_cdf(u[k]), inverse_normal_cdf(u[k + 1]));
                        k += 2;
                        z
                    });
                    v
                })
                .collect();
            f(&OrbitPoint::new(coords).expect("nonzero gaussian sample"))
        })
        .sum();
    Ok(total / samples as f64)
}

/// Scalar curvature override for tests with non-constant curvature.
pub type ScalarFn<'a> = &'a (dyn Fn(&OrbitPoint) -> f64 + Sync);

/// Default sample count for quadrature over `M`.
pub const QMC_SAMPLES: usize = 1 << 16;

/// `int h_xi (s_bar - s) omega^m`.  With no override the model is cscK and
/// the integrand vanishes identically.
pub fn futaki_base(model: &ModelSpec, xi: &AlgebraElement, scalar: Option<ScalarFn<'_>>) -> Result<f64> {
    check_dim(model, xi)?;
    let total = factorial(model.total_dim()) * model.volume();
    match scalar {
        None => {
            // constant curvature: s_bar is the curvature itself
            let s_bar = model.scalar_curvature();
            let s = |_: &OrbitPoint| model.scalar_curvature();
            model_average(model, |q| model.hamiltonian(xi, q) * (s_bar - s(q)), QMC_SAMPLES).map(|a| a * total)
        }
        Some(sf) => {
            let s_bar = model_average(model, sf, QMC_SAMPLES)?;
            let avg = model_average(model, |q| model.hamiltonian(xi, q) * (s_bar - sf(q)), QMC_SAMPLES)?;
            Ok(avg * total)
        }
    }
}

/// Projection of the scalar curvature onto `span{1, h_k}` by least squares
/// on the quasi-Monte-Carlo sample; the coefficient vector of the extremal
/// field.
pub fn extremal_field(model: &ModelSpec, scalar: Option<ScalarFn<'_>>, samples: usize) -> Result<MomentVector> {
    let d = model.algebra.dim();
    let Some(scalar) = scalar else {
        // constant curvature projects to zero under the zero-mean convention
        return Ok(MomentVector::zeros(d));
    };
    let dims: usize = model.factors().iter().map(|f| 2 * (f.dim + 1)).sum();
    if dims > 24 {
        return Err(KstabError::Validation("model too large for the quasi-Monte-Carlo integrator".into()));
    }
    let mut a = DMatrix::zeros(samples, d + 1);
    let mut b = DVector::zeros(samples);
    for i in 0..samples {
        let u = halton(i as u64 + 1, dims);
        let mut k = 0;
        let coords = model
            .factors()
            .iter()
            .map(|fac| {
                DVector::from_fn(fac.dim + 1, |_, _| {
                    let z = num_complex::Complex64::new(inverse_normal_cdf(u[k]), inverse_normal_cdf(u[k + 1]));
                    k += 2;
                    z
                })
            })
            .collect();
        let q = OrbitPoint::new(coords)?;
        a[(i, 0)] = 1.0;
        let mu = model.moment_value(&q);
        for j in 0..d {
            a[(i, j + 1)] = mu.coeffs[j];
        }
        b[i] = scalar(&q);
    }
    let c = a.svd(true, true).solve(&b, 1e-12).map_err(|e| KstabError::Convergence(e.to_string()))?;
    Ok(MomentVector::new(DVector::from_fn(d, |j, _| c[j + 1])))
}

/// `int h_v (h_ext - s) omega^m`.  The `h_v h_ext` term uses the closed-form
/// Gram matrix, the curvature term [`futaki_base`].
pub fn modified_futaki(
    model: &ModelSpec,
    v: &AlgebraElement,
    v_ext: &AlgebraElement,
    scalar: Option<ScalarFn<'_>>,
) -> Result<f64> {
    check_dim(model, v_ext)?;
    let cross = factorial(model.total_dim()) * model.algebra.inner(v, v_ext);
    // int h_v (-s) = int h_v (s_bar - s) for zero-mean h_v
    Ok(cross + futaki_base(model, v, scalar)?)
}

/// The four closed-form differences `int_M - int_{Bl_p M}` of
/// `omega^m`, `h omega^m`, `s omega^m`, `h s omega^m`.
pub fn blowup_integral_deltas(ctx: &BlowupContext, xi: &AlgebraElement) -> Result<[f64; 4]> {
    ctx.require_vanishing(xi)?;
    let m = ctx.m as i32;
    let mf = ctx.m as f64;
    let e = ctx.eps;
    let h = ctx.h_at_p(xi);
    let lap = ctx.laplacian_at_p(xi);
    let e2m = e.powi(2 * m);
    Ok([
        e2m,
        e2m * h + e.powi(2 * m + 2) * lap / (mf + 1.0),
        2.0 * PI * mf * (mf - 1.0) * e.powi(2 * m - 2),
        2.0 * PI * mf * (mf - 1.0) * e.powi(2 * m - 2) * h + 2.0 * PI * (mf - 2.0) * e2m * lap,
    ])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderTerms {
    /// Coefficient of `eps^{2m-2}` in the truncation.
    pub eps_2m_minus_2: f64,
    /// Coefficient of `eps^{2m}` in the truncation.
    pub eps_2m: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FutakiExpansion {
    pub eps: f64,
    pub fut_base: f64,
    pub a_eps: f64,
    pub b_eps: f64,
    pub h_p: f64,
    pub laplacian_p: f64,
    pub s_bar_eps: f64,
    /// `fut_base + A_eps h(p) + B_eps Delta h(p)`.
    pub fut_blowup: f64,
    /// Truncation through `eps^{2m}`, valid when `fut_base = 0`.
    pub truncation: f64,
    pub order_terms: OrderTerms,
    pub pi_convention: PiConvention,
}

/// Futaki invariant of the lifted field on `Bl_p M`.
pub fn futaki_blowup(
    ctx: &BlowupContext,
    xi: &AlgebraElement,
    scalar: Option<ScalarFn<'_>>,
) -> Result<FutakiExpansion> {
    ctx.require_vanishing(xi)?;
    let fut_base = futaki_base(&ctx.model, xi, scalar)?;
    Ok(expansion(ctx, fut_base, ctx.h_at_p(xi), ctx.laplacian_at_p(xi)))
}

/// Closed-form arithmetic of the expansion for given `fut_base`, `h(p)` and
/// `kappa Delta h(p)`.
pub fn expansion(ctx: &BlowupContext, fut_base: f64, h_p: f64, laplacian_p: f64) -> FutakiExpansion {
    let m = ctx.m as i32;
    let mf = ctx.m as f64;
    let e = ctx.eps;
    let e2m = e.powi(2 * m);
    let a_eps = 2.0 * PI * mf * (mf - 1.0) * e.powi(2 * m - 2) - e2m * ctx.s_bar_eps;
    let b_eps = 2.0 * PI * (mf - 2.0) * e2m - e.powi(2 * m + 2) * ctx.s_bar_eps / (mf + 1.0);
    let c2 = 2.0 * PI * mf * (mf - 1.0) * h_p;
    let c0 = 2.0 * PI * (mf - 2.0) * laplacian_p - ctx.s_bar * h_p;
    FutakiExpansion {
        eps: e,
        fut_base,
        a_eps,
        b_eps,
        h_p,
        laplacian_p,
        s_bar_eps: ctx.s_bar_eps,
        fut_blowup: fut_base + a_eps * h_p + b_eps * laplacian_p,
        truncation: c2 * e.powi(2 * m - 2) + c0 * e2m,
        order_terms: OrderTerms { eps_2m_minus_2: c2, eps_2m: c0 },
        pi_convention: ctx.convention.clone(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerProductReport {
    pub eps: f64,
    pub value: f64,
    /// `int_M h_v h_w omega^m`.
    pub base: f64,
    /// `int h_v h_w omega^m - int l(h_v) l(h_w) omega_eps^m` over the gluing ball.
    pub product_deficit: f64,
    /// `int l(h_v) omega_eps^m` and the same for `w`.
    pub means: [f64; 2],
    /// `int omega_eps^m`.
    pub volume_eps: f64,
    pub quadrature_rel_tol: f64,
}

/// `<v^, w^> = int l(h_v) l(h_w) omega_eps^m - V_eps^{-1} int l(h_v) omega_eps^m int l(h_w) omega_eps^m`.
/// Outside the gluing ball both the lifts and the metric agree with the base,
/// so only the ball is integrated numerically.
pub fn inner_product_blowup(
    ctx: &BlowupContext,
    profile: &RadialProfile,
    v: &AlgebraElement,
    w: &AlgebraElement,
) -> Result<InnerProductReport> {
    ctx.require_vanishing(v)?;
    ctx.require_vanishing(w)?;
    if profile.m != ctx.m {
        return Err(KstabError::Validation("profile dimension differs from the model dimension".into()));
    }
    let chart = BlowupChart::new(&ctx.model, &ctx.p)?;
    let glued = GluedPotential::new(chart.clone(), ctx.eps, &profile.solution)?;
    let lv = crate::burns_simanca::lift_hamiltonian(&ctx.model, &ctx.p, &chart, v, 0.0)?;
    let lw = crate::burns_simanca::lift_hamiltonian(&ctx.model, &ctx.p, &chart, w, 0.0)?;
    let mf = factorial(ctx.m);
    let base = mf * ctx.model.algebra.inner(v, w);
    let product_deficit = glued.product_deficit(&lv, &lw)?;
    let mv = -glued.lift_deficit(&lv)?;
    let mw = -glued.lift_deficit(&lw)?;
    let volume_eps = mf * ctx.volume - glued.volume_deficit()?;
    let value = base - product_deficit - mv * mw / volume_eps;
    Ok(InnerProductReport {
        eps: ctx.eps,
        value,
        base,
        product_deficit,
        means: [mv, mw],
        volume_eps,
        quadrature_rel_tol: 1e-10,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionExpansion {
    pub eps: f64,
    /// Constant part `s_bar` (the undetermined constant `C` is not included).
    pub constant: f64,
    pub mu_coeff: f64,
    pub lap_coeff: f64,
    pub c1: f64,
    pub c2: f64,
    /// `mu_coeff mu(p) + lap_coeff kappa Delta mu(p)`.
    pub predicted_f: MomentVector,
    pub pi_convention: PiConvention,
    pub note: String,
}

/// Constants of the gluing obstruction: `c1 = 2 pi / (m-2)!`,
/// `c2 = d1 2 pi^m / (m-2)!`.
pub fn obstruction_constants(m: usize, d1: f64) -> (f64, f64) {
    let f = factorial(m - 2);
    (2.0 * PI / f, d1 * 2.0 * PI.powi(m as i32) / f)
}

/// Truncated expansion of the obstruction to solving the extremal equation
/// on the blowup.
pub fn gluing_obstruction(ctx: &BlowupContext, d1: f64) -> Result<ObstructionExpansion> {
    if !ctx.convention.is_calibrated() {
        return Err(KstabError::Calibration(
            "the Laplacian convention is uncalibrated: run calibrate() on a solved profile and attach it with with_calibration()".into(),
        ));
    }
    if !(d1 > 0.0) {
        return Err(KstabError::Validation(format!("d1 = {d1} must be positive")));
    }
    let m = ctx.m;
    let e = ctx.eps;
    let (c1, c2) = obstruction_constants(m, d1);
    let mu_coeff = -e.powi(2 * m as i32 - 2) * (c1 - e * e * ctx.s_bar / factorial(m));
    let lap_coeff = -e.powi(2 * m as i32) * c2;
    let kappa = ctx.convention.laplacian_factor();
    let mu = ctx.model.moment_value(&ctx.p);
    let lap = ctx.model.laplacian_moment(&ctx.p);
    let predicted_f = MomentVector::new(mu.coeffs * mu_coeff + lap.coeffs * (lap_coeff * kappa));
    Ok(ObstructionExpansion {
        eps: e,
        constant: ctx.s_bar,
        mu_coeff,
        lap_coeff,
        c1,
        c2,
        predicted_f,
        pi_convention: ctx.convention.clone(),
        note: "c1 uses the 2 pi / (m-2)! normalization; the alternative pi^m normalization of the same constant differs, see README".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateCase {
    /// Negative `mu`-weight: `Fut < -c0 eps^{2m-2}`.
    NegativeMoment,
    /// Zero `mu`-weight, negative `Delta mu`-weight: `Fut < -c0 eps^{2m}`.
    NegativeLaplacian,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FutakiSample {
    pub eps: f64,
    pub fut: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub case: CertificateCase,
    pub xi: Vec<f64>,
    /// Flow limit of `p` along `xi`; the field fixes it.
    pub q: OrbitPoint,
    pub w_mu: f64,
    pub w_nu: f64,
    /// `h_xi(q)` recomputed at the limit.
    pub h_q: f64,
    pub futaki: Vec<FutakiSample>,
    /// `-Fut / eps^k` at the smallest swept `eps` (`k = 2m-2` or `2m`).
    pub c0: f64,
    pub verified: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DestabilizerReport {
    pub certificate: Option<Certificate>,
    pub torus_dim: usize,
    pub directions_sampled: usize,
    pub min_w_mu: f64,
    pub heuristic: bool,
    pub note: String,
}

/// Searches `g_{T-perp}` for a direction whose flow limit destabilizes the blowup.
pub fn destabilizer_search(ctx: &BlowupContext, directions: usize) -> Result<DestabilizerReport> {
    let model = &ctx.model;
    let p = &ctx.p;
    let torus = crate::stability::stabilizer_torus(model, p)?;
    let basis = working_basis(model, p, &Subgroup::TPerp)?;
    let dirs = sample_directions(model, &basis, directions);
    let scale = 1.0 + model.moment_value(p).coeffs.amax();
    let tol = 1e-9 * scale;
    let weights: Vec<(f64, f64, AlgebraElement, OrbitPoint)> = dirs
        .into_par_iter()
        .map(|xi| {
            let q = flow_limit(model, p, &xi);
            (model.moment_value(&q).pair(&xi), model.laplacian_moment(&q).pair(&xi), xi, q)
        })
        .collect();
    let n = weights.len();
    let min_w_mu = weights.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
    let case_i = weights.iter().filter(|w| w.0 < -tol).min_by(|a, b| a.0.total_cmp(&b.0));
    let case_ii = weights.iter().filter(|w| w.0.abs() <= tol && w.1 < -tol).min_by(|a, b| a.1.total_cmp(&b.1));
    let (case, pick) = match (case_i, case_ii) {
        (Some(w), _) => (CertificateCase::NegativeMoment, w),
        (None, Some(w)) => (CertificateCase::NegativeLaplacian, w),
        (None, None) => {
            return Ok(DestabilizerReport {
                certificate: None,
                torus_dim: torus.ncols(),
                directions_sampled: n,
                min_w_mu: if n == 0 { 0.0 } else { min_w_mu },
                heuristic: true,
                note: "no sampled direction has negative weight; boundary orbits are not enumerated".into(),
            })
        }
    };
    let (w_mu, w_nu, xi, q) = pick.clone();
    let cq = ctx.at_point(&q)?;
    let h_q = model.hamiltonian(&xi, &q);
    let sweep = [ctx.eps, ctx.eps / 2.0, ctx.eps / 4.0];
    let futaki = sweep
        .iter()
        .map(|&e| Ok(FutakiSample { eps: e, fut: futaki_blowup(&cq.at_eps(e)?, &xi, None)?.fut_blowup }))
        .collect::<Result<Vec<_>>>()?;
    let k = match case {
        CertificateCase::NegativeMoment => 2 * ctx.m as i32 - 2,
        CertificateCase::NegativeLaplacian => 2 * ctx.m as i32,
    };
    let last = futaki.last().expect("three samples");
    let c0 = -last.fut / last.eps.powi(k);
    let verified = futaki.iter().all(|f| f.fut < 0.0)
        && match case {
            CertificateCase::NegativeMoment => h_q < 0.0,
            CertificateCase::NegativeLaplacian => h_q.abs() <= tol,
        };
    Ok(DestabilizerReport {
        certificate: Some(Certificate {
            case,
            xi: xi.0.iter().copied().collect(),
            q,
            w_mu,
            w_nu,
            h_q,
            futaki,
            c0,
            verified,
        }),
        torus_dim: torus.ncols(),
        directions_sampled: n,
        min_w_mu,
        heuristic: false,
        note: String::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Yes,
    No,
    Undetermined,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub orbit_zero: AllDeltaReport,
    pub certificates: Vec<Certificate>,
    pub destabilizer: Option<DestabilizerReport>,
    /// K-polystability and cscK existence are reported as equivalent to the orbit-zero criterion; neither is computed.
    pub implied_criteria: String,
    pub pi_convention: PiConvention,
    pub reason: String,
}

/// Default `delta0` bounding the grid for the orbit-zero criterion.
pub const DEFAULT_DELTA0: f64 = 0.25;

/// Decides whether `Bl_p M` is predicted to carry a cscK metric in the
/// classes `pi^*[omega] - eps^2 [E]` for small `eps`.
pub fn verdict(ctx: &BlowupContext, delta_grid: &[f64], opts: &ClassifyOptions) -> Result<VerdictReport> {
    let orbit_zero = alldelta_check(&ctx.model, &ctx.p, delta_grid, DEFAULT_DELTA0, opts)?;
    let implied =
        "criteria (1) K-polystability and (2) cscK existence are reported as equivalent to (3); only (3) is computed"
            .to_string();
    if !orbit_zero.constant {
        return Ok(VerdictReport {
            verdict: Verdict::Undetermined,
            orbit_zero,
            certificates: vec![],
            destabilizer: None,
            implied_criteria: implied,
            pi_convention: ctx.convention.clone(),
            reason: "solvability of mu + delta Delta mu = 0 changes across the delta grid".into(),
        });
    }
    if orbit_zero.results[0].solvable {
        return Ok(VerdictReport {
            verdict: Verdict::Yes,
            orbit_zero,
            certificates: vec![],
            destabilizer: None,
            implied_criteria: implied,
            pi_convention: ctx.convention.clone(),
            reason: "a zero of mu + delta Delta mu exists on the orbit for every delta in the grid".into(),
        });
    }
    let destab = destabilizer_search(ctx, opts.directions)?;
    let certificates: Vec<Certificate> = destab.certificate.iter().cloned().collect();
    let reason = if certificates.is_empty() {
        "no zero on the orbit for any delta; no destabilizing direction located among sampled directions".into()
    } else {
        "no zero on the orbit for any delta; destabilizing degeneration found".into()
    };
    Ok(VerdictReport {
        verdict: Verdict::No,
        orbit_zero,
        certificates,
        destabilizer: Some(destab),
        implied_criteria: implied,
        pi_convention: ctx.convention.clone(),
        reason,
    })
}
