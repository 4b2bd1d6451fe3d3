//! The scalar-flat `U(m)`-invariant metric on the blowup of `C^m` at the
//! origin, its far-field expansion, the cutoff-glued potential on a one-point
//! blowup and the lift of Hamiltonians.
//!
//! The metric is `i dd^c (|w|^2/2 + psi(|w|^2))`.  In the momentum variable
//! `tau = s Phi'(s)` (with `s = |w|^2`, `t = log s`) a radial potential is
//! encoded by `phi(tau) = Phi_tt`, and scalar curvature reads
//! `-tau^{1-m} [(tau^{m-1} phi)'' - m(m-1) tau^{m-2}]`.  Scalar-flatness is a
//! linear ODE in `tau`; with smooth closing at the exceptional divisor
//! (`phi(tau0) = 0`, `phi'(tau0) = 1`) its solution is
//! `phi = tau - (m-1) tau0^{m-1} tau^{2-m} + (m-2) tau0^m tau^{1-m}`.
//! The divisor has volume `(2 pi tau0)^{m-1} / (m-1)!`, fixing `tau0 = 1/(2 pi)`.
//! What remains is the coordinate change `t(tau)`, integrated numerically.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{factorial, AlgebraElement, CMat};
use crate::curvature::{scalar_curvature_numeric, FubiniStudy, RadialFunction, RadialPotential};
use crate::error::{KstabError, Result};
use crate::jet::Jet;
use crate::models::{ModelSpec, OrbitPoint};
use crate::quadrature::{geomspace, integrate, loglog_slope};

/// Momentum of the exceptional divisor.
pub const TAU0: f64 = 1.0 / (2.0 * std::f64::consts::PI);

const V_MIN: f64 = -60.0;
const X_MAX: f64 = 1e8;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Scaled momentum profile `f(x) = phi(tau0 x) / tau0` and its derivatives,
/// written in `y = x - 1` to avoid cancellation near the divisor.
#[derive(Clone, Debug)]
struct Momentum {
    m: usize,
}

impl Momentum {
    /// `Q(y)` with `x^m - (m-1) x + (m-2) = y Q(y)`.
    fn q(&self, y: f64) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for k in (2..=m).rev() {
            acc = acc * y + binom(m, k);
        }
        1.0 + y * acc
    }

    /// `(f, f', f'')` at `x = 1 + y`.
    fn f(&self, y: f64) -> (f64, f64, f64) {
        let m = self.m as f64;
        let x = 1.0 + y;
        let f = x.powf(1.0 - m) * y * self.q(y);
        let c = (m - 1.0) * (m - 2.0);
        let f1 = 1.0 + c * y * x.powf(-m);
        let f2 = c * x.powf(-m - 1.0) * (1.0 - (m - 1.0) * y);
        (f, f1, f2)
    }

    /// `dD/dv` with `D = t - log(2 tau0 x)` and `v = log(x - 1)`.
    fn d_rate(&self, v: f64) -> f64 {
        let y = v.exp();
        let x = 1.0 + y;
        // x^{m-1}/Q - y/x without cancellation, using x^m - y Q = 1 + (m-1) y
        (1.0 + (self.m as f64 - 1.0) * y) / (x * self.q(y))
    }

    /// `dpsi/dv` given `D`.
    fn psi_rate(&self, v: f64, d: f64) -> f64 {
        let y = v.exp();
        let x = 1.0 + y;
        -TAU0 * x.powi(self.m as i32) * d.exp_m1() / self.q(y)
    }

    /// Far-field series of `D` and `psi` at `x`.
    fn tail(&self, x: f64) -> (f64, f64) {
        let m = self.m as f64;
        let d = -x.powf(1.0 - m) + (m - 2.0) / m * x.powf(-m) - 0.5 * (m - 1.0) * x.powf(2.0 - 2.0 * m);
        let psi = -TAU0 * x.powf(2.0 - m) / (m - 2.0);
        (d, psi)
    }
}

/// Tabulated coordinate change: `D(v)` and `psi(v)` on a uniform grid in `v`.
#[derive(Clone, Debug)]
pub struct BurnsSimanca {
    m: usize,
    mom: Momentum,
    v: Vec<f64>,
    d: Vec<f64>,
    psi: Vec<f64>,
}

const TOL_ABS: f64 = 1e-300;
const TOL_REL: f64 = 1e-14;

impl BurnsSimanca {
    /// Integrates the coordinate change from the far field inward.
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(KstabError::Validation(format!("the scalar-flat blowup profile needs m >= 3 (got m = {m})")));
        }
        let mom = Momentum { m };
        let v_max = (X_MAX - 1.0).ln();
        let n = 2400;
        let v: Vec<f64> = (0..=n).map(|i| V_MIN + (v_max - V_MIN) * i as f64 / n as f64).collect();
        let mut d = vec![0.0; n + 1];
        let mut psi = vec![0.0; n + 1];
        let (dt, pt) = mom.tail(X_MAX);
        d[n] = dt;
        psi[n] = pt;
        for i in (0..n).rev() {
            let seg = integrate(|s| mom.d_rate(s), v[i], v[i + 1], TOL_ABS, TOL_REL)?;
            d[i] = d[i + 1] - seg;
        }
        let mut bs = BurnsSimanca { m, mom, v, d, psi };
        for i in (0..n).rev() {
            let (lo, hi) = (bs.v[i], bs.v[i + 1]);
            let seg = integrate(|s| bs.mom.psi_rate(s, bs.d_at(s)), lo, hi, TOL_ABS, TOL_REL)?;
            bs.psi[i] = bs.psi[i + 1] - seg;
        }
        Ok(bs)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    fn index(&self, v: f64) -> usize {
        let h = self.v[1] - self.v[0];
        (((v - self.v[0]) / h).round().max(0.0) as usize).min(self.v.len() - 1)
    }

    /// `D(v)`, by quadrature from the nearest node.
    pub fn d_at(&self, v: f64) -> f64 {
        let v_max = *self.v.last().expect("grid");
        if v > v_max {
            return self.mom.tail(1.0 + v.exp()).0;
        }
        if v < self.v[0] {
            // D' -> 1 with exponentially small corrections
            return self.d[0] + (v - self.v[0]);
        }
        let i = self.index(v);
        if v == self.v[i] {
            return self.d[i];
        }
        self.d[i] + integrate(|s| self.mom.d_rate(s), self.v[i], v, TOL_ABS, TOL_REL).expect("smooth integrand")
    }

    /// `psi(v)`.
    pub fn psi_at(&self, v: f64) -> f64 {
        let v_max = *self.v.last().expect("grid");
        if v > v_max {
            return self.mom.tail(1.0 + v.exp()).1;
        }
        if v < self.v[0] {
            // near the divisor psi = Phi - s/2 with Phi ~ tau0 t + const
            let dv = v - self.v[0];
            return self.psi[0] + TAU0 * dv;
        }
        let i = self.index(v);
        if v == self.v[i] {
            return self.psi[i];
        }
        self.psi[i]
            + integrate(|s| self.mom.psi_rate(s, self.d_at(s)), self.v[i], v, TOL_ABS, TOL_REL)
                .expect("smooth integrand")
    }

    /// `t = log s` as a function of `v`.
    fn t_of_v(&self, v: f64) -> f64 {
        (2.0 * TAU0).ln() + v.exp().ln_1p() + self.d_at(v)
    }

    /// Solves `t(v) = log s` by safeguarded Newton iteration.
    pub fn v_of_s(&self, s: f64) -> f64 {
        let target = s.ln();
        let (mut lo, mut hi) = (V_MIN - 200.0, 60.0);
        // initial guess: v ~ t - const near the divisor, v ~ t - log(2 tau0) far out
        let mut v = if target > (2.0 * TAU0).ln() {
            target - (2.0 * TAU0).ln()
        } else {
            target - (self.t_of_v(self.v[0]) - self.v[0])
        };
        v = v.clamp(lo, hi);
        for _ in 0..100 {
            let g = self.t_of_v(v) - target;
            if g > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let y = v.exp();
            let (f, _, _) = self.mom.f(y);
            let dg = y / f;
            let mut next = v - g / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-15 * (1.0 + v.abs()) {
                return next;
            }
            v = next;
        }
        v
    }

    /// Jet in `s` of the full potential `s/2 + psi(s)`.
    pub fn potential_jet(&self, s: f64) -> Jet {
        self.psi_jet(s) + Jet::variable(s) * 0.5
    }

    /// Jet in `s` of `psi`, assembled from its `t`-derivatives.  Each
    /// derivative is written as a sum of small terms so nothing cancels in
    /// the far field.
    pub fn psi_jet(&self, s: f64) -> Jet {
        let v = self.v_of_s(s);
        let y = v.exp();
        let x = 1.0 + y;
        let m = self.m as f64;
        let tau = TAU0 * x;
        let (f, _, f2) = self.mom.f(y);
        let phi = TAU0 * f;
        // phi = tau + delta
        let delta = -TAU0 * x.powf(1.0 - m) * (1.0 + (m - 1.0) * y);
        let ddelta = (m - 1.0) * (m - 2.0) * y * x.powf(-m);
        let d2phi = f2 / TAU0;
        // tau - s/2 = s expm1(-D) / 2
        let lead = 0.5 * s * (-self.d_at(v)).exp_m1();
        let a = 2.0 * ddelta + ddelta * ddelta + phi * d2phi;
        let derivs =
            [self.psi_at(v), lead, delta + lead, tau * ddelta + delta * (1.0 + ddelta) + lead, delta + phi * a + lead];
        Jet::variable(s).ln().apply(derivs)
    }

    /// Momentum `tau = s Phi'(s)` at `s`.
    pub fn tau(&self, s: f64) -> f64 {
        TAU0 * (1.0 + self.v_of_s(s).exp())
    }
}

/// Scalar curvature of a radial metric from its momentum profile.
pub fn momentum_scalar_curvature(m: usize, tau: f64, phi: f64, dphi: f64, d2phi: f64) -> f64 {
    let mf = m as f64;
    // (tau^{m-1} phi)'' = (m-1)(m-2) tau^{m-3} phi + 2(m-1) tau^{m-2} phi' + tau^{m-1} phi''
    let second = (mf - 1.0) * (mf - 2.0) * tau.powf(mf - 3.0) * phi
        + 2.0 * (mf - 1.0) * tau.powf(mf - 2.0) * dphi
        + tau.powf(mf - 1.0) * d2phi;
    -tau.powf(1.0 - mf) * (second - mf * (mf - 1.0) * tau.powf(mf - 2.0))
}

/// One sample of the profile: `psi` and its first two derivatives in `r = |w|`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ProfileSample {
    pub r: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub d2psi: f64,
}

/// Far-field coefficients of `psi = d0 r^{4-2m} + d1 r^{2-2m} + d2 r^{6-4m} + ...`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Asymptotics {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    /// Weighted RMS residual of the fit.
    pub fit_residual: f64,
    /// Largest weighted residual consistent with the omitted tail.
    pub tail_scale: f64,
    /// Residual inconsistent with the tail order.
    pub flagged: bool,
}

/// Header of a serialized profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub m: usize,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub fit_residual: f64,
    pub flagged: bool,
    pub volume_norm: f64,
    pub max_scalar_residual: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub samples: usize,
}

/// Sampled profile plus the tabulated solution used for evaluation.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub m: usize,
    pub samples: Vec<ProfileSample>,
    pub asymptotics: Asymptotics,
    /// Exceptional-divisor volume `(2 pi tau_min)^{m-1} / (m-1)!`.
    pub volume_norm: f64,
    /// Largest `|s|` of the metric over the samples, from the complex-Hessian evaluator.
    pub max_scalar_residual: f64,
    pub solution: BurnsSimanca,
}

/// Sampling grid for [`solve_profile`].
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub r_min: f64,
    pub samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { r_min: 0.05, samples: 400 }
    }
}

/// Solves the profile and samples it on a geometric grid in `r`.
pub fn solve_profile(m: usize, r_max: f64, grid: GridSpec) -> Result<RadialProfile> {
    if !(r_max > grid.r_min) || grid.samples < 2 {
        return Err(KstabError::Validation("profile grid needs r_max > r_min and at least 2 samples".into()));
    }
    let solution = BurnsSimanca::new(m)?;
    let rs = geomspace(grid.r_min, r_max, grid.samples);
    let chart = RadialPotential { dim: m, profile: |s: f64| solution.potential_jet(s) };
    let mut samples = Vec::with_capacity(rs.len());
    let mut max_res: f64 = 0.0;
    for &r in &rs {
        let s = r * r;
        let j = solution.psi_jet(s);
        let d = j.derivatives();
        // d/dr = 2r d/ds
        samples.push(ProfileSample { r, psi: d[0], dpsi: 2.0 * r * d[1], d2psi: 2.0 * d[1] + 4.0 * s * d[2] });
        let mut z = vec![num_complex::Complex64::new(0.0, 0.0); m];
        z[0] = num_complex::Complex64::new(r, 0.0);
        max_res = max_res.max(scalar_curvature_numeric(&chart, &z)?.abs());
    }
    let tau_min = solution.tau(1e-300);
    let volume_norm = (2.0 * std::f64::consts::PI * tau_min).powi(m as i32 - 1) / crate::algebra::factorial(m - 1);
    let mut profile = RadialProfile {
        m,
        samples,
        asymptotics: Asymptotics { d0: 0.0, d1: 0.0, d2: 0.0, fit_residual: 0.0, tail_scale: 0.0, flagged: false },
        volume_norm,
        max_scalar_residual: max_res,
        solution,
    };
    profile.asymptotics = extract_asymptotics(&profile)?;
    Ok(profile)
}

/// Weighted least-squares fit of `psi` on `[r_max/10, r_max]`.
pub fn extract_asymptotics(profile: &RadialProfile) -> Result<Asymptotics> {
    let r_max = profile.samples.last().map(|s| s.r).unwrap_or(0.0);
    if r_max < 100.0 {
        return Err(KstabError::Validation("far-field fit needs the profile out to r_max >= 100".into()));
    }
    let pts: Vec<(f64, f64)> =
        profile.samples.iter().filter(|s| s.r >= r_max / 10.0 * (1.0 - 1e-12)).map(|s| (s.r, s.psi)).collect();
    fit_far_field(profile.m, &pts)
}

/// Fits `psi(r)` against `{r^{4-2m}, r^{2-2m}, r^{6-4m}}` with weights
/// `r^{4m-4}` on squared residuals.
pub fn fit_far_field(m: usize, pts: &[(f64, f64)]) -> Result<Asymptotics> {
    if pts.len() < 4 {
        return Err(KstabError::Validation("far-field fit needs at least 4 samples".into()));
    }
    let mf = m as f64;
    let exps = [4.0 - 2.0 * mf, 2.0 - 2.0 * mf, 6.0 - 4.0 * mf];
    let n = pts.len();
    // Columns rescaled by their value at the outer radius to keep the
    // normal equations well conditioned.
    let r_ref = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let a = nalgebra::DMatrix::from_fn(n, 3, |i, j| {
        let (r, _) = pts[i];
        let w = r.powf(2.0 * mf - 2.0);
        w * (r / r_ref).powf(exps[j])
    });
    let b = nalgebra::DVector::from_fn(n, |i, _| {
        let (r, psi) = pts[i];
        r.powf(2.0 * mf - 2.0) * psi
    });
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-300).map_err(|e| KstabError::Convergence(e.to_string()))?;
    let coef: Vec<f64> = (0..3).map(|j| c[j] / r_ref.powf(exps[j])).collect();
    let resid = (&a * &c - &b).norm() / (n as f64).sqrt();
    // The omitted r^{4-4m} term is relatively smaller than the leading one by
    // r^{-2m}; beyond that only rounding remains.
    let value_scale = pts.iter().map(|p| p.0.powf(2.0 * mf - 2.0) * p.1.abs()).fold(0.0, f64::max);
    let r_lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tail_scale = value_scale * (r_lo.powf(-2.0 * mf) + 1e-9);
    let flagged = resid > tail_scale;
    Ok(Asymptotics { d0: coef[0], d1: coef[1], d2: coef[2], fit_residual: resid, tail_scale, flagged })
}

impl RadialProfile {
    pub fn header(&self) -> ProfileHeader {
        ProfileHeader {
            m: self.m,
            d0: self.asymptotics.d0,
            d1: self.asymptotics.d1,
            d2: self.asymptotics.d2,
            fit_residual: self.asymptotics.fit_residual,
            flagged: self.asymptotics.flagged,
            volume_norm: self.volume_norm,
            max_scalar_residual: self.max_scalar_residual,
            r_min: self.samples.first().map_or(0.0, |s| s.r),
            r_max: self.samples.last().map_or(0.0, |s| s.r),
            samples: self.samples.len(),
        }
    }

    /// CSV with columns `r,psi,dpsi,d2psi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,psi,dpsi,d2psi\n");
        for s in &self.samples {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", s.r, s.psi, s.dpsi, s.d2psi));
        }
        out
    }
}

/// Cutoff `gamma(x)`: 0 for `x <= 1`, 1 for `x >= 2`, a degree-9 smoothstep
/// in between (C^4 at both ends).
pub fn cutoff(x: Jet) -> Jet {
    let y = x + (-1.0);
    if y.value() <= 0.0 {
        return Jet::constant(0.0);
    }
    if y.value() >= 1.0 {
        return Jet::constant(1.0);
    }
    let y2 = y * y;
    let y5 = y2 * y2 * y;
    let poly = Jet::constant(126.0) + y * (-420.0) + y2 * 540.0 + y2 * y * (-315.0) + y2 * y2 * 70.0;
    y5 * poly
}

/// One projective factor of the chart at `p`: `z = U (1, u / sqrt(2a))` with
/// `U` unitary and `U e_0` proportional to the factor of `p`.  In `u` the base
/// potential is `a log(1 + |u|^2 / 2a)`, so the metric at the origin is `delta / 2`.
#[derive(Clone, Debug)]
pub struct ChartBlock {
    pub dim: usize,
    pub scale: f64,
    pub frame: CMat,
}

impl ChartBlock {
    fn new(dim: usize, scale: f64, z: &DVector<Complex64>) -> Self {
        let n = dim + 1;
        let j = (0..n).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap_or(0);
        let e = CMat::identity(n, n);
        let mut cols = e.clone();
        cols.set_column(0, z);
        if j != 0 {
            cols.set_column(j, &e.column(0).into_owned());
        }
        let mut frame = cols.qr().q();
        // fix the phase so that the first column is exactly the point
        let phase = frame.column(0).dotc(z);
        let first = frame.column(0) * (phase / phase.norm());
        frame.set_column(0, &first);
        ChartBlock { dim, scale, frame }
    }

    /// `phi_i(s) = a log(1 + s/2a) - s/2` with two derivatives.
    fn phi(&self, s: f64) -> [f64; 3] {
        let a = self.scale;
        let b = 2.0 * a + s;
        [a * (s / (2.0 * a)).ln_1p() - 0.5 * s, a / b - 0.5, -a / (b * b)]
    }

    /// `Phi_base'` on this block.
    pub fn slope(&self, s: f64) -> f64 {
        self.scale / (2.0 * self.scale + s)
    }
}

/// Chart of `M` centred at `p`, one block per projective factor.  The base
/// potential is the sum of the block potentials, invariant under
/// `U(n_1) x ... x U(n_k)`.
#[derive(Clone, Debug)]
pub struct BlowupChart {
    pub m: usize,
    pub blocks: Vec<ChartBlock>,
}

/// Hamiltonian near `p` in chart form
/// `h(p) + sum_i R_i(s_i) (u_i^* lambda_i u_i + Re(beta_i^* u_i))` with `R_i`
/// the base block slopes.
#[derive(Clone, Debug)]
pub struct ChartHamiltonian {
    pub at_p: f64,
    pub lambda: Vec<CMat>,
    pub beta: Vec<DVector<Complex64>>,
}

impl BlowupChart {
    pub fn new(model: &ModelSpec, p: &OrbitPoint) -> Result<Self> {
        model.check_point(p)?;
        model.require_blowup_dimension()?;
        let blocks: Vec<ChartBlock> =
            model.factors().iter().zip(&p.coords).map(|(f, z)| ChartBlock::new(f.dim, f.scale, z)).collect();
        Ok(BlowupChart { m: model.total_dim(), blocks })
    }

    pub fn is_radial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Largest `|u|` for which the chart ball stays inside every block chart.
    pub fn radius(&self) -> f64 {
        self.blocks.iter().map(|b| (2.0 * b.scale).sqrt()).fold(f64::INFINITY, f64::min)
    }

    /// Homogeneous coordinates of the chart point `u` (blocks concatenated).
    pub fn point(&self, u: &[Complex64]) -> OrbitPoint {
        let mut off = 0;
        let coords = self
            .blocks
            .iter()
            .map(|b| {
                let c = 1.0 / (2.0 * b.scale).sqrt();
                let mut w = DVector::from_element(b.dim + 1, Complex64::new(1.0, 0.0));
                for k in 0..b.dim {
                    w[k + 1] = u[off + k] * c;
                }
                off += b.dim;
                &b.frame * w
            })
            .collect();
        OrbitPoint::new(coords).expect("nonzero")
    }

    /// Chart form of the zero-mean Hamiltonian of per-factor blocks.
    pub fn hamiltonian(&self, blocks: &[CMat]) -> ChartHamiltonian {
        let mut out = ChartHamiltonian { at_p: 0.0, lambda: vec![], beta: vec![] };
        for (cb, a) in self.blocks.iter().zip(blocks) {
            let b = cb.frame.adjoint() * a * &cb.frame;
            let n = cb.dim;
            let b00 = b[(0, 0)].re;
            out.at_p += cb.scale * (b00 - a.trace().re / (n + 1) as f64);
            out.lambda.push(CMat::from_fn(n, n, |i, j| {
                b[(i + 1, j + 1)] - if i == j { Complex64::new(b00, 0.0) } else { Complex64::new(0.0, 0.0) }
            }));
            out.beta.push(DVector::from_fn(n, |i, _| b[(i + 1, 0)] * (2.0 * (2.0 * cb.scale).sqrt())));
        }
        out
    }

    fn split<'u>(&self, u: &'u [Complex64]) -> Vec<&'u [Complex64]> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|b| {
                let part = &u[off..off + b.dim];
                off += b.dim;
                part
            })
            .collect()
    }
}

fn quad_form(a: &CMat, u: &[Complex64]) -> f64 {
    crate::algebra::quadratic(a, u)
}

/// Radial data of a block-invariant metric at `(s_1, ..., s_k)`.
#[derive(Clone, Debug)]
pub struct BlockState {
    pub s: Vec<f64>,
    /// `F_i = dF / ds_i`, the slopes lifting torus Hamiltonians.
    pub torus_slope: Vec<f64>,
    /// `gamma_1 Phi_base,i'`, the slopes of the cut-off complement.
    pub cut_slope: Vec<f64>,
}

/// The lift `l(f)` of a Hamiltonian to the blowup chart:
/// `constant + sum_i F_i u_i^* torus_i u_i + gamma_1 sum_i Phi_base,i' (u_i^* quad_i u_i + Re(beta_i^* u_i))`.
/// The first sum is the Hamiltonian of the lifted torus field; the second is
/// the cut-off complement, which vanishes at `p`.
#[derive(Clone, Debug)]
pub struct LiftedHamiltonian {
    pub constant: f64,
    pub torus: Vec<CMat>,
    pub quad: Vec<CMat>,
    pub beta: Vec<DVector<Complex64>>,
}

impl LiftedHamiltonian {
    pub fn constant(chart: &BlowupChart, c: f64) -> Self {
        LiftedHamiltonian {
            constant: c,
            torus: chart.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect(),
            quad: chart.blocks.iter().map(|b| CMat::zeros(b.dim, b.dim)).collect(),
            beta: chart.blocks.iter().map(|b| DVector::zeros(b.dim)).collect(),
        }
    }

    /// Pure torus lift of a chart Hamiltonian.
    pub fn torus_only(h: &ChartHamiltonian) -> Self {
        LiftedHamiltonian {
            constant: h.at_p,
            torus: h.lambda.clone(),
            quad: h.lambda.iter().map(|l| CMat::zeros(l.nrows(), l.nrows())).collect(),
            beta: h.beta.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    fn value(&self, st: &BlockState, parts: &[&[Complex64]]) -> f64 {
        let mut v = self.constant;
        for (i, u) in parts.iter().enumerate() {
            let lin: f64 = self.beta[i].iter().zip(u.iter()).map(|(b, x)| (b.conj() * x).re).sum();
            v += st.torus_slope[i] * quad_form(&self.torus[i], u)
                + st.cut_slope[i] * (quad_form(&self.quad[i], u) + lin);
        }
        v
    }

    /// Mean of the block-`i` part over the sphere `|u_i|^2 = s_i`.
    fn block_mean(&self, st: &BlockState, i: usize) -> f64 {
        let n = self.torus[i].nrows() as f64;
        st.s[i] / n * (st.torus_slope[i] * self.torus[i].trace().re + st.cut_slope[i] * self.quad[i].trace().re)
    }

    /// Mean over the product of spheres `|u_i|^2 = s_i`.
    fn mean(&self, st: &BlockState) -> f64 {
        self.constant + (0..st.s.len()).map(|i| self.block_mean(st, i)).sum::<f64>()
    }

    /// Mean of the product of two lifts over the product of spheres.
    fn product_mean(&self, other: &Self, st: &BlockState) -> f64 {
        let k = st.s.len();
        let ma: Vec<f64> = (0..k).map(|i| self.block_mean(st, i)).collect();
        let mb: Vec<f64> = (0..k).map(|i| other.block_mean(st, i)).collect();
        let mut acc = self.constant * other.constant
            + self.constant * mb.iter().sum::<f64>()
            + other.constant * ma.iter().sum::<f64>();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    acc += ma[i] * mb[j];
                }
            }
            let n = self.torus[i].nrows() as f64;
            let s = st.s[i];
            let pa = [(&self.torus[i], st.torus_slope[i]), (&self.quad[i], st.cut_slope[i])];
            let pb = [(&other.torus[i], st.torus_slope[i]), (&other.quad[i], st.cut_slope[i])];
            for (x, rx) in pa {
                for (y, ry) in pb {
                    let tr = x.trace().re * y.trace().re + (x * y).trace().re;
                    acc += rx * ry * s * s * tr / (n * (n + 1.0));
                }
            }
            acc += st.cut_slope[i] * st.cut_slope[i] * s * self.beta[i].dotc(&other.beta[i]).re / (2.0 * n);
        }
        acc
    }
}

/// Splits `xi` into its component in the stabilizer algebra of `p` (gram
/// projection) and the complement, and builds the lift of `constant + h_xi`.
pub fn lift_hamiltonian(
    model: &ModelSpec,
    p: &OrbitPoint,
    chart: &BlowupChart,
    xi: &AlgebraElement,
    constant: f64,
) -> Result<LiftedHamiltonian> {
    let alg = &model.algebra;
    if xi.0.len() != alg.dim() {
        return Err(KstabError::Validation(format!(
            "element has {} coefficients but the algebra has dimension {}",
            xi.0.len(),
            alg.dim()
        )));
    }
    let stab = model.stabilizer(p);
    let xi_s = if stab.ncols() == 0 {
        DVector::zeros(alg.dim())
    } else {
        let g = alg.gram();
        let normal = stab.transpose() * g * &stab;
        let rhs = stab.transpose() * g * &xi.0;
        let c = normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| KstabError::Validation("gram matrix is singular on the stabilizer".into()))?;
        &stab * c
    };
    let xi_c = &xi.0 - &xi_s;
    let hs = chart.hamiltonian(&alg.blocks_of(&AlgebraElement(xi_s)));
    let hc = chart.hamiltonian(&alg.blocks_of(&AlgebraElement(xi_c)));
    Ok(LiftedHamiltonian { constant: constant + hs.at_p + hc.at_p, torus: hs.lambda, quad: hc.lambda, beta: hc.beta })
}

/// Gauss-Legendre order for the block-fraction directions.
const FRACTION_NODES: usize = 16;

/// The cutoff-glued potential
/// `|u|^2/2 + gamma_1 phi_base(u) + (1 - gamma_1) eps^2 psi(|u|^2 / eps^2)` with
/// `gamma_1 = gamma(|u| / r_eps)`, `r_eps = eps^alpha`, `alpha = (2m - 1)/(2m + 1)`.
/// On a single factor it is radial; on products it is invariant under the
/// product of block unitary groups.
#[derive(Clone, Debug)]
pub struct GluedPotential<'a> {
    pub chart: BlowupChart,
    pub eps: f64,
    pub r_eps: f64,
    pub profile: &'a BurnsSimanca,
    /// Nodes and weights on the simplex of block fractions.
    fractions: Vec<(Vec<f64>, f64)>,
}

impl<'a> GluedPotential<'a> {
    pub fn new(chart: BlowupChart, eps: f64, profile: &'a BurnsSimanca) -> Result<Self> {
        let m = chart.m;
        if profile.dim() != m {
            return Err(KstabError::Validation(format!(
                "profile has dimension {} but the chart has dimension {m}",
                profile.dim()
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(KstabError::Validation(format!("eps = {eps} must lie in (0, 1)")));
        }
        let alpha = (2.0 * m as f64 - 1.0) / (2.0 * m as f64 + 1.0);
        let r_eps = eps.powf(alpha);
        if 3.0 * r_eps >= chart.radius() {
            return Err(KstabError::Domain(format!("gluing radius 3 r_eps = {} leaves the chart", 3.0 * r_eps)));
        }
        let fractions = simplex_rule(&chart.blocks.iter().map(|b| b.dim).collect::<Vec<_>>());
        let glued = GluedPotential { chart, eps, r_eps, profile, fractions };
        glued.check_positive()?;
        Ok(glued)
    }

    fn check_positive(&self) -> Result<()> {
        let k = self.chart.blocks.len();
        let mut dirs: Vec<Vec<f64>> =
            (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        dirs.push(vec![1.0 / k as f64; k]);
        for s in geomspace(1e-6 * self.eps * self.eps, 9.0 * self.r_eps * self.r_eps, 300) {
            for d in &dirs {
                let parts: Vec<f64> = d.iter().map(|t| t * s).collect();
                let (_, w) = self.metric(&parts, true);
                if !w.is_finite() {
                    return Err(KstabError::Domain(format!(
                        "glued metric is not positive at r = {:.4e} (eps = {} too large)",
                        s.sqrt(),
                        self.eps
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.chart.m
    }

    /// `gamma_1` as a jet in `S = |u|^2`.
    pub fn gamma(&self, s: f64) -> Jet {
        cutoff(Jet::variable(s).sqrt() * (1.0 / self.r_eps))
    }

    /// `eps^2 psi(S / eps^2)` as a jet in `S`.
    pub fn bs_part(&self, s: f64) -> Jet {
        let e2 = self.eps * self.eps;
        let mut c = self.profile.psi_jet(s / e2).0;
        let mut f = e2;
        for ck in c.iter_mut() {
            *ck *= f;
            f /= e2;
        }
        Jet(c)
    }

    /// Slopes and `omega^m` density factor `prod F_i^{n_i - 1} det N` at block
    /// radii `s`, for the glued (`glued = true`) or base metric.  `N` is the
    /// metric on the span of the block position vectors.
    fn metric(&self, s: &[f64], glued: bool) -> (BlockState, f64) {
        let k = s.len();
        let total: f64 = s.iter().sum();
        let phis: Vec<[f64; 3]> = self.chart.blocks.iter().zip(s).map(|(b, &si)| b.phi(si)).collect();
        let (g, c) = if glued { (self.gamma(total), Some(self.bs_part(total))) } else { (Jet::constant(1.0), None) };
        let inside = glued && g.value() <= 0.0 && g.0.iter().skip(1).all(|x| *x == 0.0);
        let outside = !glued || (g.value() >= 1.0 && g.0.iter().skip(1).all(|x| *x == 0.0));
        let phi_sum: f64 = phis.iter().map(|p| p[0]).sum();
        let (g1, g2) = (g.derivative(1), g.derivative(2));
        let cut = c.map(|c| (Jet::constant(1.0) - g) * c);
        let (c1, c2) = cut.map_or((0.0, 0.0), |c| (c.derivative(1), c.derivative(2)));
        let mut slope = vec![0.0; k];
        let mut hess = DMatrix::zeros(k, k);
        for i in 0..k {
            slope[i] = if outside {
                0.5 + phis[i][1]
            } else if inside {
                0.5 + c1
            } else {
                0.5 + g1 * phi_sum + g.value() * phis[i][1] + c1
            };
            for j in 0..k {
                hess[(i, j)] = if outside {
                    if i == j {
                        phis[i][2]
                    } else {
                        0.0
                    }
                } else if inside {
                    c2
                } else {
                    g2 * phi_sum
                        + g1 * (phis[i][1] + phis[j][1])
                        + if i == j { g.value() * phis[i][2] } else { 0.0 }
                        + c2
                };
            }
        }
        let n =
            DMatrix::from_fn(k, k, |i, j| (if i == j { slope[i] } else { 0.0 }) + (s[i] * s[j]).sqrt() * hess[(i, j)]);
        let positive = slope.iter().all(|x| *x > 0.0) && n.clone().cholesky().is_some();
        let mut w = if positive { n.determinant() } else { f64::NAN };
        for (i, b) in self.chart.blocks.iter().enumerate() {
            // s_i^{n_i - 1} F_i^{n_i - 1} kept together: both factors can be extreme near E
            w *= (s[i] * slope[i]).powi(b.dim as i32 - 1);
        }
        let gamma = if glued { g.value() } else { 1.0 };
        let cut_slope = self.chart.blocks.iter().zip(s).map(|(b, &si)| gamma * b.slope(si)).collect();
        (BlockState { s: s.to_vec(), torus_slope: slope, cut_slope }, w)
    }

    /// Block slopes at the chart point `u`.
    pub fn state_at(&self, u: &[Complex64]) -> BlockState {
        let s: Vec<f64> = self.chart.split(u).iter().map(|p| p.iter().map(|x| x.norm_sqr()).sum()).collect();
        self.metric(&s, true).0
    }

    /// Lifted Hamiltonian at the chart point `u`.
    pub fn lift_value(&self, lift: &LiftedHamiltonian, u: &[Complex64]) -> f64 {
        let st = self.state_at(u);
        lift.value(&st, &self.chart.split(u))
    }

    /// Region boundaries in `S`: inner ball, annulus, outer sphere.
    fn breaks(&self) -> [f64; 3] {
        let r2 = self.r_eps * self.r_eps;
        [r2, 4.0 * r2, 9.0 * r2]
    }

    fn tolerance(&self) -> f64 {
        1e-10 * self.eps.powi(2 * self.dim() as i32 + 2)
    }

    /// `int_{B_R} (F_base omega^m - F_eps omega_eps^m)` with `R = 3 r_eps`
    /// for block-invariant integrands (sphere means) `F(state)`.
    pub fn deficit<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&BlockState) -> f64,
    {
        let m = self.dim();
        let mut c = factorial(m) * 2f64.powi(m as i32);
        for b in &self.chart.blocks {
            c *= std::f64::consts::PI.powi(b.dim as i32) / factorial(b.dim - 1);
        }
        let integrand = |total: f64| {
            let mut acc = 0.0;
            for (theta, wt) in &self.fractions {
                let s: Vec<f64> = theta.iter().map(|t| t * total).collect();
                let (sb, wb) = self.metric(&s, false);
                let (se, we) = self.metric(&s, true);
                // s_i^{n_i-1} already sits in the weights; divide by total^{m-k}
                acc += wt * (f(&sb) * wb - f(&se) * we);
            }
            let k = self.chart.blocks.len() as i32;
            c * acc * total.powi(k - 1)
        };
        let [b1, b2, b3] = self.breaks();
        let tol = self.tolerance();
        let mut total = 0.0;
        for (lo, hi) in [(0.0, b1), (b1, b2), (b2, b3)] {
            total += integrate(&integrand, lo, hi, tol, 1e-10)?;
        }
        if !total.is_finite() {
            return Err(KstabError::Domain("metric degenerate inside the gluing ball".into()));
        }
        Ok(total)
    }

    /// `int omega^m - int omega_eps^m`.
    pub fn volume_deficit(&self) -> Result<f64> {
        self.deficit(|_| 1.0)
    }

    /// `int h omega^m - int l(h) omega_eps^m` for the lift and its base Hamiltonian.
    pub fn lift_deficit(&self, lift: &LiftedHamiltonian) -> Result<f64> {
        self.deficit(|st| lift.mean(st))
    }

    /// `int h_v h_w omega^m - int l(h_v) l(h_w) omega_eps^m`.
    pub fn product_deficit(&self, a: &LiftedHamiltonian, b: &LiftedHamiltonian) -> Result<f64> {
        self.deficit(|st| a.product_mean(b, st))
    }

    fn require_radial(&self) -> Result<()> {
        if !self.chart.is_radial() {
            return Err(KstabError::Validation(
                "scalar curvature sampling needs a single projective factor (radial glued potential)".into(),
            ));
        }
        Ok(())
    }

    /// `int s(omega) omega^m - int s(omega_eps) omega_eps^m` (single factor).
    pub fn scalar_deficit(&self) -> Result<f64> {
        self.require_radial()?;
        let m = self.dim();
        let base = RadialPotential { dim: m, profile: self.chart.blocks[0].base() };
        let glued = RadialPotential { dim: m, profile: |s: f64| self.jet(s) };
        let b = self.chart.blocks[0].base();
        let at = |s: f64| {
            let mut z = vec![Complex64::new(0.0, 0.0); m];
            z[0] = Complex64::new(s.sqrt(), 0.0);
            z
        };
        let integrand = |s: f64| {
            let jb = b.jet(s);
            let je = self.jet(s);
            let sb = scalar_curvature_numeric(&base, &at(s)).unwrap_or(f64::NAN);
            let se = scalar_curvature_numeric(&glued, &at(s)).unwrap_or(f64::NAN);
            sb * radial_weight(m, s, &jb) - se * radial_weight(m, s, &je)
        };
        let [b1, b2, b3] = self.breaks();
        let tol = self.tolerance();
        let mut total = 0.0;
        for (lo, hi) in [(0.0, b1), (b1, b2), (b2, b3)] {
            total += integrate(&integrand, lo, hi, tol, 1e-10)?;
        }
        if !total.is_finite() {
            return Err(KstabError::Domain("scalar curvature evaluation failed inside the gluing ball".into()));
        }
        Ok(total)
    }
}

impl ChartBlock {
    /// `a log(1 + s / 2a)`.
    pub fn base(&self) -> FubiniStudy {
        FubiniStudy { scale: self.scale, b: 2.0 * self.scale }
    }
}

impl RadialFunction for GluedPotential<'_> {
    /// Radial jet of the glued potential; meaningful for a single factor.
    fn jet(&self, s: f64) -> Jet {
        let base = self.chart.blocks[0].base();
        let g = self.gamma(s);
        let flat = Jet::variable(s) * 0.5;
        if g.value() >= 1.0 && g.0.iter().skip(1).all(|c| *c == 0.0) {
            return base.jet(s);
        }
        if g.value() <= 0.0 && g.0.iter().skip(1).all(|c| *c == 0.0) {
            return flat + self.bs_part(s);
        }
        flat + g * (base.jet(s) - flat) + (Jet::constant(1.0) - g) * self.bs_part(s)
    }
}

/// Product Gauss-Legendre rule on the simplex of block fractions
/// `theta_1 + ... + theta_k = 1`, including the density `prod theta_i^{n_i - 1}`
/// up to the constant absorbed by the block weights.  Stick-breaking
/// coordinates `theta_1 = y_1`, `theta_2 = (1 - y_1) y_2`, ...
fn simplex_rule(dims: &[usize]) -> Vec<(Vec<f64>, f64)> {
    let k = dims.len();
    if k == 1 {
        return vec![(vec![1.0], 1.0)];
    }
    let (x, w) = crate::quadrature::gauss_legendre(FRACTION_NODES);
    let nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut out = vec![(Vec::new(), 1.0, 1.0)];
    for _ in 0..k - 1 {
        let mut next = Vec::new();
        for (theta, wt, rest) in &out {
            for &(y, wy) in &nodes {
                let mut t = theta.clone();
                t.push(rest * y);
                next.push((t, wt * wy * rest, rest * (1.0 - y)));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(mut t, w, rest)| {
            t.push(rest);
            (t, w)
        })
        .collect()
}

/// Density of `omega^m` in `s` for a radial potential:
/// `m (2 pi)^m (s Phi')^{m-1} (Phi' + s Phi'')`.
pub fn radial_weight(m: usize, s: f64, jet: &Jet) -> f64 {
    let d1 = jet.derivative(1);
    let d2 = jet.derivative(2);
    m as f64 * (2.0 * std::f64::consts::PI).powi(m as i32) * (s * d1).powi(m as i32 - 1) * (d1 + s * d2)
}

/// Scalar-curvature control of the glued metric at one `eps`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecaySample {
    pub eps: f64,
    pub r_eps: f64,
    /// `sup r^2 |s(omega_eps) - s(omega)|` over the annulus `r_eps <= r <= 2 r_eps`.
    pub annulus_sup: f64,
    /// `sup |s(omega_eps)|` over `eps/2 <= r <= r_eps/2` (pure Burns-Simanca region).
    pub inner_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: Vec<DecaySample>,
    /// Fitted slope of `log annulus_sup` against `log eps`.
    pub slope: f64,
    pub monotone: bool,
    pub flagged: bool,
}

/// Samples the scalar curvature of the glued metric.
pub fn decay_sample(glued: &GluedPotential<'_>) -> Result<DecaySample> {
    glued.require_radial()?;
    let m = glued.dim();
    let base = RadialPotential { dim: m, profile: glued.chart.blocks[0].base() };
    let at = |r: f64| {
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        z[0] = Complex64::new(r, 0.0);
        z
    };
    let chart = RadialPotential { dim: m, profile: |s: f64| glued.jet(s) };
    let mut annulus_sup: f64 = 0.0;
    for i in 0..=200 {
        let r = glued.r_eps * (1.0 + i as f64 / 200.0);
        let se = scalar_curvature_numeric(&chart, &at(r))?;
        let sb = scalar_curvature_numeric(&base, &at(r))?;
        annulus_sup = annulus_sup.max(r * r * (se - sb).abs());
    }
    let mut inner: f64 = 0.0;
    for r in geomspace(0.5 * glued.eps, 0.5 * glued.r_eps, 60) {
        inner = inner.max(scalar_curvature_numeric(&chart, &at(r))?.abs());
    }
    Ok(DecaySample { eps: glued.eps, r_eps: glued.r_eps, annulus_sup, inner_residual: inner })
}

/// Fits the decay of the annulus curvature error over an `eps` sweep.
pub fn curvature_decay(
    model: &ModelSpec,
    p: &OrbitPoint,
    eps_list: &[f64],
    profile: &RadialProfile,
) -> Result<DecayReport> {
    let (lo, hi) = eps_list.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    if eps_list.len() < 2 || hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(KstabError::Validation("curvature decay needs an eps list spanning at least one decade".into()));
    }
    let chart = BlowupChart::new(model, p)?;
    let mut samples = eps_list
        .par_iter()
        .map(|&e| decay_sample(&GluedPotential::new(chart.clone(), e, &profile.solution)?))
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let xs: Vec<f64> = samples.iter().map(|s| s.eps).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.annulus_sup).collect();
    let slope = loglog_slope(&xs, &ys);
    let monotone = ys.windows(2).all(|w| w[0] <= w[1]);
    Ok(DecayReport { samples, slope, monotone, flagged: !monotone || !(slope > 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn momentum_profile_closes_smoothly() {
        for m in 3..6 {
            let mom = Momentum { m };
            let (f, f1, _) = mom.f(0.0);
            assert_eq!(f, 0.0);
            assert!((f1 - 1.0).abs() < 1e-15);
            // closed form away from the divisor
            let x: f64 = 2.5;
            let mf = m as f64;
            let direct = x - (mf - 1.0) * x.powf(2.0 - mf) + (mf - 2.0) * x.powf(1.0 - mf);
            assert!((mom.f(x - 1.0).0 - direct).abs() < 1e-14);
            let tau = TAU0 * x;
            let (f, f1, f2) = mom.f(x - 1.0);
            let s = momentum_scalar_curvature(m, tau, TAU0 * f, f1, f2 / TAU0);
            assert!(s.abs() < 1e-10, "m={m} s={s}");
        }
    }

    #[test]
    fn flat_profile_is_scalar_flat() {
        // phi = tau is the flat metric: zero divisor, zero psi
        for m in 3..6 {
            assert!(momentum_scalar_curvature(m, 0.8, 0.8, 1.0, 0.0).abs() < 1e-14);
        }
    }

    #[test]
    fn coordinate_change_inverts() {
        let bs = BurnsSimanca::new(3).unwrap();
        for &s in &[1e-20, 1e-6, 0.3, 5.0, 1e4, 1e9] {
            let v = bs.v_of_s(s);
            assert!((bs.t_of_v(v) - s.ln()).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn leading_coefficient_m3() {
        let p = solve_profile(3, 1e3, GridSpec::default()).unwrap();
        let d0 = -1.0 / (2.0 * PI * PI);
        let d1 = 1.0 / (12.0 * PI.powi(3));
        assert!((p.asymptotics.d0 - d0).abs() < 1e-6 * d0.abs(), "{:?}", p.asymptotics);
        assert!((p.asymptotics.d1 - d1).abs() < 1e-2 * d1, "{:?}", p.asymptotics);
        assert!(!p.asymptotics.flagged);
        assert!((p.volume_norm - 0.5).abs() < 1e-12);
        assert!(p.max_scalar_residual < 1e-7, "{}", p.max_scalar_residual);
    }

    #[test]
    fn leading_coefficient_higher_dimensions() {
        for m in 4..6 {
            let p = solve_profile(m, 1e3, GridSpec::default()).unwrap();
            let mf = m as f64;
            let d0 = -1.0 / (2.0 * PI.powf(mf - 1.0) * (mf - 2.0));
            let d1 = (mf - 2.0) * 2f64.powf(mf - 1.0) / (mf * (mf - 1.0) * (2.0 * PI).powf(mf));
            assert!((p.asymptotics.d0 / d0 - 1.0).abs() < 1e-6);
            assert!((p.asymptotics.d1 / d1 - 1.0).abs() < 1e-2);
            assert!((p.volume_norm - 1.0 / crate::algebra::factorial(m - 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensions_rejected() {
        assert!(matches!(BurnsSimanca::new(2), Err(KstabError::Validation(_))));
    }

    use crate::algebra::Factor;
    use crate::models::builders::{diagonal_torus, full_unitary};

    fn p3() -> (ModelSpec, OrbitPoint) {
        let model = full_unitary(vec![Factor { dim: 3, scale: 1.0 }]).unwrap();
        let p = OrbitPoint::real(&[&[1.0, 0.0, 0.0, 0.0]]).unwrap();
        (model, p)
    }

    #[test]
    fn cutoff_is_flat_at_both_ends() {
        assert_eq!(cutoff(Jet::variable(0.9)).value(), 0.0);
        assert_eq!(cutoff(Jet::variable(2.1)).value(), 1.0);
        for x in [1.0 + 1e-8, 2.0 - 1e-8] {
            let d = cutoff(Jet::variable(x)).derivatives();
            for k in 1..=4 {
                assert!(d[k].abs() < 1e-3, "x={x} k={k} {}", d[k]);
            }
        }
        let mid = cutoff(Jet::variable(1.5)).value();
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn glued_potential_matches_pieces() {
        let (model, p) = p3();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let g = GluedPotential::new(chart.clone(), 0.1, &bs).unwrap();
        let s_out = (3.0 * g.r_eps).powi(2);
        assert_eq!(g.jet(s_out), chart.blocks[0].base().jet(s_out));
        let s_in = (0.5 * g.r_eps).powi(2);
        let e2 = 0.01;
        let inner = g.jet(s_in);
        let direct = bs.potential_jet(s_in / e2);
        assert!((inner.value() - e2 * direct.value()).abs() < 1e-15);
        assert!((inner.derivative(2) - direct.derivative(2) / e2).abs() < 1e-9 * direct.derivative(2).abs());
    }

    #[test]
    fn positivity_failure_is_reported() {
        let (model, p) = p3();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        assert!(GluedPotential::new(chart, 0.9, &bs).is_err());
    }

    #[test]
    fn chart_reproduces_model_hamiltonians() {
        let (model, _) = p3();
        let p = OrbitPoint::real(&[&[0.3, 1.0, -0.5, 0.2]]).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let u = [Complex64::new(0.2, -0.1), Complex64::new(0.05, 0.3), Complex64::new(-0.4, 0.0)];
        let s: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        let q = chart.point(&u);
        for g in model.algebra.generators() {
            let h = chart.hamiltonian(&g.blocks);
            let r = chart.blocks[0].slope(s);
            let lin: f64 = h.beta[0].iter().zip(&u).map(|(b, x)| (b.conj() * x).re).sum();
            let local = h.at_p + r * (quad_form(&h.lambda[0], &u) + lin);
            assert!((local - model.hamiltonian_blocks(&g.blocks, &q)).abs() < 1e-12);
        }
    }

    fn p1xp2() -> (ModelSpec, OrbitPoint) {
        let model = diagonal_torus(vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }]).unwrap();
        let p = OrbitPoint::real(&[&[1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        (model, p)
    }

    #[test]
    fn product_chart_reproduces_model_hamiltonians() {
        let (model, _) = p1xp2();
        let p = OrbitPoint::real(&[&[0.3, 1.2], &[1.0, 0.4, -2.0]]).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let u = [Complex64::new(0.2, -0.1), Complex64::new(0.05, 0.3), Complex64::new(-0.4, 0.1)];
        let q = chart.point(&u);
        let parts = chart.split(&u);
        for g in model.algebra.generators() {
            let h = chart.hamiltonian(&g.blocks);
            let mut local = h.at_p;
            for (i, part) in parts.iter().enumerate() {
                let si: f64 = part.iter().map(|x| x.norm_sqr()).sum();
                let lin: f64 = h.beta[i].iter().zip(part.iter()).map(|(b, x)| (b.conj() * x).re).sum();
                local += chart.blocks[i].slope(si) * (quad_form(&h.lambda[i], part) + lin);
            }
            assert!((local - model.hamiltonian_blocks(&g.blocks, &q)).abs() < 1e-12);
        }
    }

    #[test]
    fn product_volume_deficit_is_eps_to_the_2m() {
        let (model, p) = p1xp2();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let g = GluedPotential::new(chart, 0.05, &bs).unwrap();
        let d = g.volume_deficit().unwrap();
        assert!((d / 0.05f64.powi(6) - 1.0).abs() < 1e-6, "{d}");
        assert!(g.scalar_deficit().is_err());
    }

    #[test]
    fn lifts_agree_with_hamiltonians_outside_the_ball() {
        let (model, p) = p3();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let g = GluedPotential::new(chart.clone(), 0.05, &bs).unwrap();
        let xi = AlgebraElement(DVector::from_fn(model.algebra.dim(), |i, _| ((i * 7 % 5) as f64 - 2.0) * 0.3));
        let lift = lift_hamiltonian(&model, &p, &chart, &xi, 0.0).unwrap();
        let r = 2.5 * g.r_eps;
        let u = [Complex64::new(0.6 * r, 0.0), Complex64::new(0.0, 0.8 * r), Complex64::new(0.0, 0.0)];
        let exact = model.hamiltonian(&xi, &chart.point(&u));
        assert!((g.lift_value(&lift, &u) - exact).abs() < 1e-12);
        // the complement part vanishes inside the gluing radius
        let stab = model.stabilizer(&p);
        let inside = [Complex64::new(0.3 * g.r_eps, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let constant = LiftedHamiltonian::constant(&chart, 2.5);
        assert_eq!(g.lift_value(&constant, &inside), 2.5);
        assert!(stab.ncols() > 0);
    }

    #[test]
    fn volume_deficit_is_eps_to_the_2m() {
        let (model, p) = p3();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        for eps in [0.05, 0.1] {
            let g = GluedPotential::new(chart.clone(), eps, &bs).unwrap();
            let d = g.volume_deficit().unwrap();
            assert!((d / eps.powi(6) - 1.0).abs() < 1e-6, "eps={eps} d={d}");
        }
    }

    #[test]
    fn inner_region_is_scalar_flat() {
        let (model, p) = p3();
        let bs = BurnsSimanca::new(3).unwrap();
        let chart = BlowupChart::new(&model, &p).unwrap();
        let g = GluedPotential::new(chart, 0.02, &bs).unwrap();
        let d = decay_sample(&g).unwrap();
        assert!(d.inner_residual < 1e-7, "{d:?}");
    }
}
