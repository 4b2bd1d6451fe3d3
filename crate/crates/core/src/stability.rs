//! Hilbert-Mumford weights, orbit zero-finding for `mu + delta Delta mu`,
//! stability classification and continuation of orbit zeros.
//!
//! Flow convention: `xi` acts on homogeneous coordinates by `exp(-t A_xi)` and
//! weights are limits as `t -> -infinity`, so the flow concentrates on the top
//! eigenspace of `A_xi` and stable points have positive weights.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, MomentVector};
use crate::error::{KstabError, Result};
use crate::models::{ModelSpec, OrbitPoint};
use crate::quadrature::{halton, inverse_normal_cdf};

/// Residual required of an orbit zero (gram norm).
pub const ZERO_TOL: f64 = 1e-9;
/// Threshold on singular values of the infinitesimal action.
pub const STABILIZER_TOL: f64 = 1e-8;
/// Components of a point below this size are treated as absent when
/// computing flow limits.
const SUPPORT_TOL: f64 = 1e-12;
/// Default time used to verify weights by integrating the flow.
pub const FLOW_T_FINAL: f64 = -40.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightReport {
    /// Direction, unit gram norm, in algebra coordinates.
    pub xi: Vec<f64>,
    pub limit_point: OrbitPoint,
    pub w_mu: f64,
    /// Weight of the perturbing map `Delta mu`.
    pub w_nu: f64,
    /// `<mu(exp(-t_final xi) p), xi>` from the numeric flow.
    pub flow_value: f64,
    /// Whether the numeric flow matches `w_mu` to 1e-6.
    pub converged: bool,
    pub t_final: f64,
}

/// Limit of the flow of `xi` as `t -> -infinity`: per factor, the component of
/// `p` in the top eigenspace of `A_xi` among the eigenvalues that `p` charges.
pub fn flow_limit(model: &ModelSpec, p: &OrbitPoint, xi: &AlgebraElement) -> OrbitPoint {
    let blocks = model.algebra.blocks_of(xi);
    let coords = blocks
        .iter()
        .zip(&p.coords)
        .map(|(a, z)| {
            let eig = a.clone().symmetric_eigen();
            let c = eig.eigenvectors.adjoint() * z;
            let top = eig
                .eigenvalues
                .iter()
                .zip(c.iter())
                .filter(|(_, ci)| ci.norm() > SUPPORT_TOL)
                .map(|(l, _)| *l)
                .fold(f64::NEG_INFINITY, f64::max);
            let kept = DVector::from_iterator(
                c.len(),
                eig.eigenvalues.iter().zip(c.iter()).map(|(l, ci)| {
                    if ci.norm() > SUPPORT_TOL && (l - top).abs() <= 1e-9 * (1.0 + top.abs()) {
                        *ci
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }),
            );
            &eig.eigenvectors * kept
        })
        .collect();
    OrbitPoint::new(coords).expect("limit keeps at least one component per factor")
}

/// Normalizes `xi` to unit gram norm.
pub fn normalize(model: &ModelSpec, xi: &AlgebraElement) -> Result<AlgebraElement> {
    let n = model.algebra.norm(xi);
    if !(n > 0.0) {
        return Err(KstabError::Validation("direction has zero gram norm".into()));
    }
    Ok(AlgebraElement(&xi.0 / n))
}

/// Hilbert-Mumford weights of `mu` and `Delta mu` along `xi` (normalized first).
pub fn weight(model: &ModelSpec, p: &OrbitPoint, xi: &AlgebraElement) -> Result<WeightReport> {
    model.check_point(p)?;
    let xi = normalize(model, xi)?;
    let limit = flow_limit(model, p, &xi);
    let w_mu = model.moment_value(&limit).pair(&xi);
    let w_nu = model.laplacian_moment(&limit).pair(&xi);
    // Time rescaled by the smallest charged eigenvalue gap so that the
    // flow has the same relative convergence for every direction.
    let gap = charged_gap(model, p, &xi).max(1e-3);
    let t_final = FLOW_T_FINAL / gap;
    let flowed = model.group_flow(p, &xi, t_final);
    let flow_value = model.moment_value(&flowed).pair(&xi);
    Ok(WeightReport {
        xi: xi.0.iter().copied().collect(),
        limit_point: limit,
        w_mu,
        w_nu,
        flow_value,
        converged: (flow_value - w_mu).abs() <= 1e-6,
        t_final,
    })
}

/// Smallest gap between the top charged eigenvalue of `A_xi` and the next
/// charged one, over factors (infinite when every factor is already fixed).
fn charged_gap(model: &ModelSpec, p: &OrbitPoint, xi: &AlgebraElement) -> f64 {
    let mut gap = f64::INFINITY;
    for (a, z) in model.algebra.blocks_of(xi).iter().zip(&p.coords) {
        let eig = a.clone().symmetric_eigen();
        let c = eig.eigenvectors.adjoint() * z;
        let mut charged: Vec<f64> =
            eig.eigenvalues.iter().zip(c.iter()).filter(|(_, ci)| ci.norm() > SUPPORT_TOL).map(|(l, _)| *l).collect();
        charged.sort_by(|x, y| y.total_cmp(x));
        if let Some(next) = charged.iter().find(|l| charged[0] - **l > 1e-9 * (1.0 + charged[0].abs())) {
            gap = gap.min(charged[0] - next);
        }
    }
    gap
}

/// Weight of `mu + delta Delta mu` without the flow verification.
pub fn weight_exact(model: &ModelSpec, p: &OrbitPoint, xi: &AlgebraElement, delta: f64) -> (f64, f64) {
    let limit = flow_limit(model, p, xi);
    let w_mu = model.moment_value(&limit).pair(xi);
    let w_nu = model.laplacian_moment(&limit).pair(xi);
    (w_mu + delta * w_nu, w_nu)
}

/// Deterministic low-discrepancy unit directions in the span of `basis`,
/// followed by `+-` each basis column.
pub fn sample_directions(model: &ModelSpec, basis: &DMatrix<f64>, count: usize) -> Vec<AlgebraElement> {
    let k = basis.ncols();
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let push = |out: &mut Vec<AlgebraElement>, c: DVector<f64>| {
        let xi = AlgebraElement(basis * c);
        if let Ok(u) = normalize(model, &xi) {
            out.push(u);
        }
    };
    for j in 0..k {
        for sign in [1.0, -1.0] {
            push(&mut out, DVector::from_fn(k, |i, _| if i == j { sign } else { 0.0 }));
        }
    }
    if k == 1 {
        return out;
    }
    if k == 2 {
        for i in 0..count {
            let th = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / count as f64;
            push(&mut out, DVector::from_vec(vec![th.cos(), th.sin()]));
        }
        return out;
    }
    let dims = k.min(24);
    for i in 0..count as u64 {
        let u = halton(i, dims);
        let mut c = DVector::zeros(k);
        for j in 0..dims {
            c[j] = inverse_normal_cdf(u[j]);
        }
        push(&mut out, c);
    }
    out
}

/// Subalgebra within which orbit zeros are sought.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subgroup {
    Full,
    TPerp,
}

/// An orbit zero `q = exp(-A_xi) p`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitZero {
    pub q: OrbitPoint,
    pub xi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// 0 for the origin, `k` for the k-th random start.
    pub start: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroSearch {
    pub solution: Option<OrbitZero>,
    /// Smallest residual met over all starts.
    pub best_residual: f64,
    /// A failed search is evidence, not proof, of non-existence.
    pub heuristic: bool,
    pub starts: usize,
}

/// Options for [`find_orbit_zero`].
#[derive(Clone, Debug)]
pub struct ZeroOptions {
    pub seed: u64,
    pub random_starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        ZeroOptions { seed: 0, random_starts: 8, max_iter: 200, tol: ZERO_TOL, fd_step: 1e-6 }
    }
}

/// Projected map in whitened coordinates, so its Euclidean norm is the gram
/// norm of the projection of the moment vector onto the subalgebra.
struct Projector {
    basis: DMatrix<f64>,
    l_inv: DMatrix<f64>,
}

impl Projector {
    fn new(model: &ModelSpec, basis: &DMatrix<f64>) -> Result<Self> {
        let m = basis.transpose() * model.algebra.gram() * basis;
        let chol = m
            .cholesky()
            .ok_or_else(|| KstabError::Validation("working subalgebra is degenerate for the Gram pairing".into()))?;
        let l_inv =
            chol.l().try_inverse().ok_or_else(|| KstabError::Validation("working subalgebra is degenerate".into()))?;
        Ok(Projector { basis: basis.clone(), l_inv })
    }

    fn apply(&self, mu: &MomentVector) -> DVector<f64> {
        &self.l_inv * (self.basis.transpose() * &mu.coeffs)
    }

    fn point(&self, model: &ModelSpec, p: &OrbitPoint, c: &DVector<f64>) -> OrbitPoint {
        model.group_flow(p, &AlgebraElement(&self.basis * c), 1.0)
    }
}

/// Result of a damped Newton solve.
struct NewtonOutcome {
    c: DVector<f64>,
    residual: f64,
    iterations: usize,
}

/// Damped Newton with Armijo backtracking on `|F|^2`, central-difference
/// Jacobian and SVD solves; falls back to a steepest-descent step when the
/// Newton direction gives no decrease.
fn damped_newton<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: F,
    c0: DVector<f64>,
    tol: f64,
    max_iter: usize,
    fd_step: f64,
) -> NewtonOutcome {
    let k = c0.len();
    let mut c = c0;
    let mut fc = f(&c);
    let mut res = fc.norm();
    for it in 0..max_iter {
        if res <= tol {
            return NewtonOutcome { c, residual: res, iterations: it };
        }
        let mut jac = DMatrix::zeros(fc.len(), k);
        for j in 0..k {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[j] += fd_step;
            cm[j] -= fd_step;
            jac.set_column(j, &((f(&cp) - f(&cm)) / (2.0 * fd_step)));
        }
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let newton = svd.solve(&(-&fc), 1e-12 * smax.max(1e-300)).unwrap_or_else(|_| DVector::zeros(k));
        let gradient = -(jac.transpose() * &fc);
        let mut accepted = false;
        for mut dir in [newton, gradient] {
            if dir.amax() == 0.0 || !dir.iter().all(|x| x.is_finite()) {
                continue;
            }
            // keep trial points in a region where flows stay well conditioned
            if dir.amax() > 5.0 {
                dir *= 5.0 / dir.amax();
            }
            let mut lambda = 1.0;
            for _ in 0..40 {
                let trial = &c + &dir * lambda;
                let ft = f(&trial);
                let rt = ft.norm();
                if rt * rt <= (1.0 - 2e-4 * lambda) * res * res {
                    c = trial;
                    fc = ft;
                    res = rt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted || c.amax() > 60.0 {
            return NewtonOutcome { c, residual: res, iterations: it + 1 };
        }
    }
    NewtonOutcome { c, residual: res, iterations: max_iter }
}

/// Searches the orbit of `p` under the complexification of the subalgebra
/// spanned by `basis` for a zero of the projection of `mu + delta Delta mu`.
pub fn find_orbit_zero_in(
    model: &ModelSpec,
    p: &OrbitPoint,
    delta: f64,
    basis: &DMatrix<f64>,
    opts: &ZeroOptions,
) -> Result<ZeroSearch> {
    model.check_point(p)?;
    if !(delta >= 0.0) {
        return Err(KstabError::Validation("delta must be non-negative".into()));
    }
    let k = basis.ncols();
    if k == 0 {
        let q = p.clone();
        return Ok(ZeroSearch {
            solution: Some(OrbitZero { q, xi: vec![0.0; model.algebra.dim()], residual: 0.0, iterations: 0, start: 0 }),
            best_residual: 0.0,
            heuristic: false,
            starts: 0,
        });
    }
    let proj = Projector::new(model, basis)?;
    let f = |c: &DVector<f64>| proj.apply(&model.perturbed_moment(&proj.point(model, p, c), delta));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = f64::INFINITY;
    for start in 0..=opts.random_starts {
        let c0 = if start == 0 {
            DVector::zeros(k)
        } else {
            DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal))
        };
        let out = damped_newton(&f, c0, opts.tol, opts.max_iter, opts.fd_step);
        best = best.min(out.residual);
        if out.residual <= opts.tol {
            let q = proj.point(model, p, &out.c);
            return Ok(ZeroSearch {
                solution: Some(OrbitZero {
                    q,
                    xi: (basis * &out.c).iter().copied().collect(),
                    residual: out.residual,
                    iterations: out.iterations,
                    start,
                }),
                best_residual: best,
                heuristic: false,
                starts: start + 1,
            });
        }
    }
    Ok(ZeroSearch { solution: None, best_residual: best, heuristic: true, starts: opts.random_starts + 1 })
}

/// Zero search over the whole algebra or over the `T-perp` subalgebra of a
/// maximal torus of the stabilizer of `p`.
pub fn find_orbit_zero(
    model: &ModelSpec,
    p: &OrbitPoint,
    delta: f64,
    subgroup: Subgroup,
    opts: &ZeroOptions,
) -> Result<ZeroSearch> {
    let basis = working_basis(model, p, &subgroup)?;
    find_orbit_zero_in(model, p, delta, &basis, opts)
}

/// Basis of the working subalgebra.
pub fn working_basis(model: &ModelSpec, p: &OrbitPoint, subgroup: &Subgroup) -> Result<DMatrix<f64>> {
    let d = model.algebra.dim();
    match subgroup {
        Subgroup::Full => Ok(DMatrix::identity(d, d)),
        Subgroup::TPerp => {
            let torus = stabilizer_torus(model, p)?;
            model.algebra.t_perp_of(&torus)
        }
    }
}

/// A maximal torus of the stabilizer algebra of `p`: the centralizer, inside
/// the stabilizer, of a fixed generic combination of its basis.
pub fn stabilizer_torus(model: &ModelSpec, p: &OrbitPoint) -> Result<DMatrix<f64>> {
    let stab = model.stabilizer(p);
    let k = stab.ncols();
    let d = model.algebra.dim();
    if k == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let weights = DVector::from_fn(k, |i, _| (1.0 + i as f64).sqrt().fract() + 0.5);
    let generic = AlgebraElement(&stab * weights);
    // [generic, stab c] = 0 for coefficient vectors c
    let mut m = DMatrix::zeros(d, k);
    for j in 0..k {
        let col = AlgebraElement(stab.column(j).into_owned());
        m.set_column(j, &model.algebra.bracket(&generic, &col).0);
    }
    let rows: Vec<Vec<f64>> = (0..d).map(|r| m.row(r).iter().copied().collect()).collect();
    let kernel = crate::algebra::nullspace(&rows, k);
    Ok(&stab * kernel)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    SemistableStrict,
    RelativelyStable,
    Unstable,
    Undetermined,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub q: OrbitPoint,
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub class: StabilityClass,
    pub witness: Option<Witness>,
    /// True when the class rests on direction sampling or a failed search.
    pub heuristic: bool,
    pub stabilizer_dim: usize,
    pub working_dim: usize,
    pub directions_sampled: usize,
    pub min_weight: Option<f64>,
    pub delta_range: [f64; 2],
    pub reason: String,
}

/// Options for [`classify`].
#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub directions: usize,
    pub zero: ZeroOptions,
    pub weight_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { directions: 200, zero: ZeroOptions::default(), weight_tol: 1e-9 }
    }
}

/// Minimum weight of `mu + delta Delta mu` over sampled unit directions in the
/// span of `basis`, with the minimizing direction.
pub fn min_weight(
    model: &ModelSpec,
    p: &OrbitPoint,
    basis: &DMatrix<f64>,
    delta: f64,
    count: usize,
) -> Option<(f64, AlgebraElement, usize)> {
    let dirs = sample_directions(model, basis, count);
    let n = dirs.len();
    dirs.into_par_iter()
        .map(|xi| (weight_exact(model, p, &xi, delta).0, xi))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(w, xi)| (w, xi, n))
}

/// Classifies `p` for the moment map `mu`.
///
/// Order of checks: a zero of `mu` on the orbit with trivial stabilizer gives
/// `stable`; `mu(q)` in the stabilizer of `q` (at `p` directly or through the
/// `T-perp` zero search) gives `relatively_stable`; otherwise sampled weights
/// decide between `unstable` (a negative weight, with the direction as
/// witness) and `semistable_strict` (minimum weight zero).  Anything else is
/// `undetermined`.
pub fn classify(model: &ModelSpec, p: &OrbitPoint, opts: &ClassifyOptions) -> Result<StabilityVerdict> {
    model.check_point(p)?;
    let alg = &model.algebra;
    let d = alg.dim();
    let full = DMatrix::identity(d, d);
    let stab = model.stabilizer(p);
    let trivial = model.action_min_singular(p, &full) > STABILIZER_TOL;
    let mu = model.moment_value(p);
    let mut verdict = StabilityVerdict {
        class: StabilityClass::Undetermined,
        witness: None,
        heuristic: false,
        stabilizer_dim: stab.ncols(),
        working_dim: d,
        directions_sampled: 0,
        min_weight: None,
        delta_range: [0.0, 0.0],
        reason: String::new(),
    };
    let scale = 1.0 + mu.coeffs.amax();

    let working = if trivial {
        full
    } else {
        // mu(p) in g_p: projection onto the stabilizer is mu itself
        let on_stab = alg.project(&mu, &stab)?;
        if alg.moment_norm(&(&on_stab.axpy(-1.0, &mu)))? <= 1e-9 * scale {
            verdict.class = StabilityClass::RelativelyStable;
            verdict.witness = Some(Witness { q: p.clone(), xi: vec![0.0; d] });
            verdict.reason = "mu(p) lies in the stabilizer algebra of p".into();
            return Ok(verdict);
        }
        working_basis(model, p, &Subgroup::TPerp)?
    };
    verdict.working_dim = working.ncols();

    let search = find_orbit_zero_in(model, p, 0.0, &working, &opts.zero)?;
    if let Some(z) = search.solution {
        if trivial {
            verdict.class = StabilityClass::Stable;
            verdict.reason = "zero of mu found on the orbit and the stabilizer is trivial".into();
        } else {
            verdict.class = StabilityClass::RelativelyStable;
            verdict.reason = "zero of the T-perp projection of mu found on the T-perp orbit".into();
        }
        verdict.witness = Some(Witness { q: z.q, xi: z.xi });
        return Ok(verdict);
    }

    verdict.heuristic = true;
    if let Some((w, xi, n)) = min_weight(model, p, &working, 0.0, opts.directions) {
        verdict.directions_sampled = n;
        verdict.min_weight = Some(w);
        if w < -opts.weight_tol * scale {
            verdict.class = StabilityClass::Unstable;
            verdict.witness = Some(Witness { q: flow_limit(model, p, &xi), xi: xi.0.iter().copied().collect() });
            verdict.reason = "negative Hilbert-Mumford weight along a sampled direction".into();
        } else if w.abs() <= opts.weight_tol * scale {
            verdict.class = StabilityClass::SemistableStrict;
            verdict.reason = "no zero on the orbit; minimum sampled weight is zero".into();
        } else {
            verdict.reason = "zero search failed although all sampled weights are positive".into();
        }
    }
    Ok(verdict)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub solvable: bool,
    pub residual: f64,
    pub xi_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AllDeltaReport {
    pub delta0: f64,
    pub subgroup: Subgroup,
    pub results: Vec<DeltaResult>,
    /// Solvability is the same at every grid value.
    pub constant: bool,
    /// Condition: `W_mu >= 0` on sampled directions and `W_nu > 0` wherever `W_mu = 0`.
    pub weight_condition: bool,
    pub min_w_mu: f64,
    pub directions_sampled: usize,
    /// Whether the weight condition agrees with the grid solvability.
    pub consistent: bool,
    pub warnings: Vec<String>,
}

/// Runs the zero search at every `delta` in the grid and compares with the
/// weight condition.
pub fn alldelta_check(
    model: &ModelSpec,
    p: &OrbitPoint,
    grid: &[f64],
    delta0: f64,
    opts: &ClassifyOptions,
) -> Result<AllDeltaReport> {
    model.check_point(p)?;
    if grid.is_empty() {
        return Err(KstabError::Validation("delta grid is empty".into()));
    }
    for &dl in grid {
        if !(dl > 0.0 && dl < delta0) {
            return Err(KstabError::Validation(format!("delta {dl} is outside (0, {delta0})")));
        }
    }
    let d = model.algebra.dim();
    let full = DMatrix::identity(d, d);
    let subgroup = if model.action_min_singular(p, &full) > STABILIZER_TOL { Subgroup::Full } else { Subgroup::TPerp };
    let basis = working_basis(model, p, &subgroup)?;
    let results: Vec<DeltaResult> = grid
        .par_iter()
        .map(|&dl| {
            let s = find_orbit_zero_in(model, p, dl, &basis, &opts.zero)?;
            Ok(DeltaResult {
                delta: dl,
                solvable: s.solution.is_some(),
                residual: s.solution.as_ref().map_or(s.best_residual, |z| z.residual),
                xi_norm: s.solution.as_ref().map(|z| z.xi.iter().map(|x| x * x).sum::<f64>().sqrt()),
            })
        })
        .collect::<Result<_>>()?;
    let constant = results.iter().all(|r| r.solvable == results[0].solvable);

    let dirs = sample_directions(model, &basis, opts.directions);
    let scale = 1.0 + model.moment_value(p).coeffs.amax();
    let tol = opts.weight_tol * scale;
    let mut min_w_mu = f64::INFINITY;
    let mut condition = true;
    for xi in &dirs {
        let limit = flow_limit(model, p, xi);
        let w_mu = model.moment_value(&limit).pair(xi);
        let w_nu = model.laplacian_moment(&limit).pair(xi);
        min_w_mu = min_w_mu.min(w_mu);
        if w_mu < -tol || (w_mu.abs() <= tol && w_nu <= tol) {
            condition = false;
        }
    }
    if dirs.is_empty() {
        min_w_mu = 0.0;
    }
    let consistent = constant && results[0].solvable == condition;
    let mut warnings = Vec::new();
    if !constant {
        warnings.push("solvability changes across the delta grid: delta0 may be too large or the solver failed".into());
    } else if !consistent {
        warnings.push("grid solvability disagrees with the sampled weight condition".into());
    }
    Ok(AllDeltaReport {
        delta0,
        subgroup,
        results,
        constant,
        weight_condition: condition,
        min_w_mu,
        directions_sampled: dirs.len(),
        consistent,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuationResult {
    pub q: Option<OrbitPoint>,
    pub xi: Vec<f64>,
    pub residual: f64,
    /// Homotopy parameter reached (1 on success).
    pub s_reached: f64,
    pub steps: usize,
}

/// Continues a zero of `mu + eps Delta mu` on the working orbit to a zero of
/// `family`, following `(1 - s)(mu + eps Delta mu) + s family` from `s = 0`
/// to `s = 1` with Newton correction at every step.
pub fn continuation_zero<F>(
    model: &ModelSpec,
    p: &OrbitPoint,
    family: F,
    eps: f64,
    basis: &DMatrix<f64>,
    start: &OrbitZero,
    tol: f64,
) -> Result<ContinuationResult>
where
    F: Fn(&OrbitPoint) -> MomentVector,
{
    let proj = Projector::new(model, basis)?;
    // coordinates of the start in the basis
    let xi0 = DVector::from_vec(start.xi.clone());
    let svd = basis.clone().svd(true, true);
    let mut c = svd.solve(&xi0, 1e-12).map_err(|e| KstabError::Validation(e.to_string()))?;
    let homotopy = |s: f64, c: &DVector<f64>| {
        let q = proj.point(model, p, c);
        let base = model.perturbed_moment(&q, eps);
        let target = family(&q);
        proj.apply(&MomentVector::new(base.coeffs * (1.0 - s) + target.coeffs * s))
    };
    let mut s: f64 = 0.0;
    let mut ds: f64 = 0.125;
    let mut steps = 0;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        let out = damped_newton(|x| homotopy(next, x), c.clone(), tol * 0.1, 50, 1e-6);
        steps += 1;
        if out.residual <= tol * 0.1 || (next < 1.0 && out.residual <= 1e-6) {
            c = out.c;
            s = next;
            ds = (ds * 2.0).min(0.25);
        } else {
            ds *= 0.5;
            if ds < 1e-6 {
                return Ok(ContinuationResult {
                    q: None,
                    xi: (basis * &c).iter().copied().collect(),
                    residual: out.residual,
                    s_reached: s,
                    steps,
                });
            }
        }
    }
    let q = proj.point(model, p, &c);
    let residual = model.algebra.moment_norm(&model.algebra.project(&family(&q), basis)?)?;
    Ok(ContinuationResult {
        q: if residual <= tol { Some(q) } else { None },
        xi: (basis * &c).iter().copied().collect(),
        residual,
        s_reached: 1.0,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Factor, Generator};
    use crate::models::builders::*;
    use rand::{Rng, SeedableRng};

    fn p1xp2() -> ModelSpec {
        full_unitary(vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }]).unwrap()
    }

    fn three_points(scales: [f64; 3]) -> ModelSpec {
        diagonal_unitary(scales.iter().map(|&a| Factor { dim: 1, scale: a }).collect()).unwrap()
    }

    fn cpoint(coords: &[&[(f64, f64)]]) -> OrbitPoint {
        OrbitPoint::new(
            coords
                .iter()
                .map(|c| DVector::from_iterator(c.len(), c.iter().map(|(re, im)| Complex64::new(*re, *im))))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn weight_at_fixed_point_is_pairing() {
        let model = diagonal_torus(vec![Factor { dim: 2, scale: 1.0 }]).unwrap();
        let p = OrbitPoint::real(&[&[0.0, 1.0, 0.0]]).unwrap();
        let xi = normalize(&model, &AlgebraElement(DVector::from_vec(vec![0.3, -0.8]))).unwrap();
        let w = weight(&model, &p, &xi).unwrap();
        assert!((w.w_mu - model.moment_value(&p).pair(&xi)).abs() < 1e-14);
        assert!(w.converged);
    }

    #[test]
    fn eigenspace_weight_matches_numeric_flow() {
        let model = p1xp2();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = OrbitPoint::random(model.factors(), &mut rng);
            let xi = AlgebraElement(DVector::from_fn(11, |_, _| rng.gen_range(-1.0..1.0)));
            let w = weight(&model, &p, &xi).unwrap();
            assert!(w.converged, "flow {} vs exact {}", w.flow_value, w.w_mu);
            let xi = AlgebraElement(DVector::from_vec(w.xi.clone()));
            let wm = weight(&model, &p, &AlgebraElement(-&xi.0)).unwrap();
            assert!(wm.converged);
        }
    }

    #[test]
    fn weight_is_linear_in_the_perturbation() {
        let model = p1xp2();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = OrbitPoint::random(model.factors(), &mut rng);
        let xi = normalize(&model, &AlgebraElement(DVector::from_fn(11, |_, _| rng.gen_range(-1.0..1.0)))).unwrap();
        let w = weight(&model, &p, &xi).unwrap();
        for eps in [0.01, 0.1] {
            // recompute the perturbed Hamiltonians directly at the limit point
            let limit = flow_limit(&model, &p, &xi);
            let blocks = model.algebra.blocks_of(&xi);
            let direct = model.hamiltonian_blocks(&blocks, &limit) + eps * model.laplacian_blocks(&blocks, &limit);
            assert!((direct - (w.w_mu + eps * w.w_nu)).abs() < 1e-12);
            assert!((weight_exact(&model, &p, &xi, eps).0 - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_is_lower_semicontinuous_on_sampled_sequences() {
        let model = three_points([1.0, 1.0, 1.0]);
        let p = cpoint(&[&[(1.0, 0.0), (0.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)]]);
        let xi = normalize(&model, &AlgebraElement(DVector::from_vec(vec![0.0, 0.0, 1.0]))).unwrap();
        let base = weight_exact(&model, &p, &xi, 0.0).0;
        for k in 1..30 {
            let h = 10f64.powi(-(k as i32) / 3);
            let pert = AlgebraElement(&xi.0 + DVector::from_vec(vec![h, -0.5 * h, 0.0]));
            let xn = normalize(&model, &pert).unwrap();
            assert!(weight_exact(&model, &p, &xn, 0.0).0 >= base - 1e-6);
        }
    }

    #[test]
    fn coordinate_point_under_su3_is_relatively_stable() {
        let model = full_unitary(vec![Factor { dim: 2, scale: 1.0 }]).unwrap();
        let p = OrbitPoint::real(&[&[1.0, 0.0, 0.0]]).unwrap();
        let v = classify(&model, &p, &ClassifyOptions::default()).unwrap();
        assert_eq!(v.class, StabilityClass::RelativelyStable);
        assert!(!v.heuristic);
    }

    #[test]
    fn barycentric_point_is_stable_with_zero_xi() {
        let model = diagonal_torus(vec![Factor { dim: 2, scale: 1.0 }]).unwrap();
        let p = OrbitPoint::real(&[&[1.0, 1.0, 1.0]]).unwrap();
        let v = classify(&model, &p, &ClassifyOptions::default()).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        let w = v.witness.unwrap();
        assert!(w.xi.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn edge_point_matches_dense_weight_sweep() {
        let model = diagonal_torus(vec![Factor { dim: 2, scale: 1.0 }]).unwrap();
        let p = OrbitPoint::real(&[&[1.0, 1.0, 0.0]]).unwrap();
        let v = classify(&model, &p, &ClassifyOptions::default()).unwrap();
        assert_eq!(v.class, StabilityClass::RelativelyStable);
        // Oracle: on the T-perp directions all weights are positive, while on
        // the whole algebra some weight is negative (so p itself is not semistable).
        let tperp = working_basis(&model, &p, &Subgroup::TPerp).unwrap();
        assert_eq!(tperp.ncols(), 1);
        let mut min_perp = f64::INFINITY;
        let mut min_all = f64::INFINITY;
        for i in 0..2000 {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 2000.0;
            let xi = normalize(&model, &AlgebraElement(DVector::from_vec(vec![th.cos(), th.sin()]))).unwrap();
            min_all = min_all.min(weight_exact(&model, &p, &xi, 0.0).0);
        }
        for sign in [1.0, -1.0] {
            let xi = normalize(&model, &AlgebraElement(tperp.column(0) * sign)).unwrap();
            min_perp = min_perp.min(weight_exact(&model, &p, &xi, 0.0).0);
        }
        assert!(min_perp > 0.0);
        assert!(min_all < 0.0);
    }

    #[test]
    fn heavy_point_is_unstable() {
        let model = three_points([1.0, 1.0, 3.0]);
        let p = cpoint(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (1.0, 0.0)]]);
        let opts =
            ClassifyOptions { zero: ZeroOptions { random_starts: 2, ..Default::default() }, ..Default::default() };
        let v = classify(&model, &p, &opts).unwrap();
        assert_eq!(v.class, StabilityClass::Unstable);
        assert!(v.min_weight.unwrap() < 0.0);
    }

    #[test]
    fn orbit_zero_residual_is_recomputed() {
        let model = diagonal_torus(vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }]).unwrap();
        let p = OrbitPoint::real(&[&[0.3, 1.2], &[1.0, 0.4, 2.0]]).unwrap();
        let s = find_orbit_zero(&model, &p, 0.05, Subgroup::Full, &ZeroOptions::default()).unwrap();
        let z = s.solution.expect("generic point is stable");
        let m = model.perturbed_moment(&z.q, 0.05);
        assert!(model.algebra.moment_norm(&m).unwrap() <= 1e-9);
        // q is the flow of xi from p
        let q = model.group_flow(&p, &AlgebraElement(DVector::from_vec(z.xi.clone())), 1.0);
        assert!(q.distance(&z.q) < 1e-14);
    }

    #[test]
    fn zero_already_at_p() {
        let model = three_points([1.0, 1.0, 1.0]);
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let p = cpoint(&[&[(1.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (w.re, w.im)], &[(1.0, 0.0), (w.re, -w.im)]]);
        assert!(model.moment_value(&p).coeffs.amax() < 1e-14);
        let s = find_orbit_zero(&model, &p, 0.1, Subgroup::Full, &ZeroOptions::default()).unwrap();
        let z = s.solution.unwrap();
        assert_eq!(z.iterations, 0);
        assert!(z.xi.iter().all(|x| *x == 0.0));
        let r = alldelta_check(&model, &p, &[0.01, 0.02, 0.05, 0.09], 0.1, &ClassifyOptions::default()).unwrap();
        assert!(r.constant && r.results.iter().all(|x| x.solvable));
    }

    #[test]
    fn unstable_point_unsolvable_for_small_delta() {
        let model = three_points([1.0, 1.0, 3.0]);
        let p = cpoint(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (1.0, 0.0)]]);
        let opts =
            ClassifyOptions { zero: ZeroOptions { random_starts: 2, ..Default::default() }, ..Default::default() };
        let r = alldelta_check(&model, &p, &[0.01, 0.05], 0.1, &opts).unwrap();
        assert!(r.constant && r.results.iter().all(|x| !x.solvable));
        assert!(!r.weight_condition && r.consistent);
    }

    #[test]
    fn continuation_is_identity_for_the_unperturbed_family() {
        let model = diagonal_torus(vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }]).unwrap();
        let p = OrbitPoint::real(&[&[0.3, 1.2], &[1.0, 0.4, 2.0]]).unwrap();
        let eps = 0.05;
        let basis = DMatrix::identity(3, 3);
        let z = find_orbit_zero(&model, &p, eps, Subgroup::Full, &ZeroOptions::default()).unwrap().solution.unwrap();
        let out = continuation_zero(&model, &p, |q| model.perturbed_moment(q, eps), eps, &basis, &z, 1e-8).unwrap();
        assert!(out.q.unwrap().distance(&z.q) < 1e-9);
    }

    #[test]
    fn generator_outside_torus_is_not_abelian() {
        let f = vec![Factor { dim: 1, scale: 1.0 }];
        let gens = crate::algebra::su_basis(2).into_iter().map(|b| Generator::on_factor(&f, 0, b)).collect();
        let model = ModelSpec::new(f, gens, vec![2]).unwrap();
        let torus = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(model.algebra.t_perp_of(&torus).is_err());
    }
}
