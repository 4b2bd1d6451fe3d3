//! Local Kähler potentials and a scalar-curvature evaluator built from the
//! complex Hessian of the potential.
//!
//! Conventions: `omega = i dd^c Phi` with `g_{a b} = d_a d_{\bar b} Phi` and the
//! complex Laplacian `Delta = g^{j \bar k} d_j d_{\bar k}`, so that
//! `s = -Delta log det g`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::CMat;
use crate::error::{KstabError, Result};
use crate::jet::Jet;

/// Metric and its first two derivatives at a point of a chart.
#[derive(Clone, Debug)]
pub struct MetricJet {
    /// `g[a][b] = g_{a \bar b}`.
    pub g: CMat,
    /// `dg[c] = d_c g`.
    pub dg: Vec<CMat>,
    /// `ddg[c][d] = d_c d_{\bar d} g`.
    pub ddg: Vec<Vec<CMat>>,
}

/// A Kähler potential on a domain of `C^m`.
pub trait ChartPotential: Sync {
    fn dim(&self) -> usize;
    fn metric_jet(&self, z: &[Complex64]) -> MetricJet;
}

/// A function of `s = |z|^2` with derivatives up to order four.
pub trait RadialFunction: Sync {
    /// Taylor jet of the function in `s`.
    fn jet(&self, s: f64) -> Jet;
}

impl<F: Fn(f64) -> Jet + Sync> RadialFunction for F {
    fn jet(&self, s: f64) -> Jet {
        self(s)
    }
}

/// `a log(1 + s / b)`: the scaled Fubini-Study potential.  With `b = 1` the
/// form is `a omega_FS`; with `b = 2a` the metric is the identity at the origin.
#[derive(Clone, Copy, Debug)]
pub struct FubiniStudy {
    pub scale: f64,
    pub b: f64,
}

impl RadialFunction for FubiniStudy {
    fn jet(&self, s: f64) -> Jet {
        (Jet::variable(s) * (1.0 / self.b)).ln_1p() * self.scale
    }
}

/// `s / 2`.
#[derive(Clone, Copy, Debug)]
pub struct Flat;

impl RadialFunction for Flat {
    fn jet(&self, s: f64) -> Jet {
        Jet::variable(s) * 0.5
    }
}

/// Radial metric block at `z` from derivatives of `Phi(s)`.
pub fn radial_metric_jet(d: [f64; 5], z: &[Complex64]) -> MetricJet {
    let m = z.len();
    let (d1, d2, d3, d4) = (d[1], d[2], d[3], d[4]);
    let zb: Vec<Complex64> = z.iter().map(|w| w.conj()).collect();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let g = CMat::from_fn(m, m, |a, b| zb[a] * z[b] * d2 + delta(a, b) * d1);
    let dg = (0..m)
        .map(|c| {
            CMat::from_fn(m, m, |a, b| (zb[c] * delta(a, b) + zb[a] * delta(b, c)) * d2 + zb[c] * zb[a] * z[b] * d3)
        })
        .collect();
    let ddg = (0..m)
        .map(|c| {
            (0..m)
                .map(|dd| {
                    CMat::from_fn(m, m, |a, b| {
                        z[dd] * (zb[c] * delta(a, b) + zb[a] * delta(b, c)) * d3
                            + Complex64::new(d2 * (delta(c, dd) * delta(a, b) + delta(a, dd) * delta(b, c)), 0.0)
                            + z[dd] * zb[c] * zb[a] * z[b] * d4
                            + (zb[a] * z[b] * delta(c, dd) + zb[c] * z[b] * delta(a, dd)) * d3
                    })
                })
                .collect()
        })
        .collect();
    MetricJet { g, dg, ddg }
}

/// A `U(m)`-invariant potential `Phi(|z|^2)`.
pub struct RadialPotential<F: RadialFunction> {
    pub dim: usize,
    pub profile: F,
}

impl<F: RadialFunction> ChartPotential for RadialPotential<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_jet(&self, z: &[Complex64]) -> MetricJet {
        let s = z.iter().map(|w| w.norm_sqr()).sum();
        radial_metric_jet(self.profile.jet(s).derivatives(), z)
    }
}

/// Sum of radial potentials in separate groups of variables.
pub struct BlockPotential {
    pub blocks: Vec<(usize, Box<dyn RadialFunction>)>,
}

impl ChartPotential for BlockPotential {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    fn metric_jet(&self, z: &[Complex64]) -> MetricJet {
        let m = self.dim();
        let mut out = MetricJet {
            g: CMat::zeros(m, m),
            dg: vec![CMat::zeros(m, m); m],
            ddg: vec![vec![CMat::zeros(m, m); m]; m],
        };
        let mut off = 0;
        for (n, f) in &self.blocks {
            let zz = &z[off..off + n];
            let s = zz.iter().map(|w| w.norm_sqr()).sum();
            let j = radial_metric_jet(f.jet(s).derivatives(), zz);
            out.g.view_mut((off, off), (*n, *n)).copy_from(&j.g);
            for c in 0..*n {
                out.dg[off + c].view_mut((off, off), (*n, *n)).copy_from(&j.dg[c]);
                for d in 0..*n {
                    out.ddg[off + c][off + d].view_mut((off, off), (*n, *n)).copy_from(&j.ddg[c][d]);
                }
            }
            off += n;
        }
        out
    }
}

/// A general potential differentiated by Richardson-extrapolated central
/// differences.  Accuracy is limited (nested differences), so it serves as a
/// cross-check rather than a production evaluator.
pub struct FdPotential<F: Fn(&[Complex64]) -> f64 + Sync> {
    pub dim: usize,
    pub potential: F,
    pub step: f64,
}

impl<F: Fn(&[Complex64]) -> f64 + Sync> FdPotential<F> {
    fn hessian(&self, z: &[Complex64], h: f64) -> CMat {
        // d_a d_{\bar b} = (1/4)(d_{x_a} - i d_{y_a})(d_{x_b} + i d_{y_b})
        let m = self.dim;
        let dir = |k: usize| -> Vec<Complex64> {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[k / 2] = if k % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            e
        };
        let eval = |u: &[Complex64], su: f64, v: &[Complex64], sv: f64| {
            let p: Vec<Complex64> = (0..m).map(|i| z[i] + u[i] * su + v[i] * sv).collect();
            (self.potential)(&p)
        };
        let second = |i: usize, j: usize, h: f64| -> f64 {
            let (u, v) = (dir(i), dir(j));
            (eval(&u, h, &v, h) - eval(&u, h, &v, -h) - eval(&u, -h, &v, h) + eval(&u, -h, &v, -h)) / (4.0 * h * h)
        };
        let rich = |i: usize, j: usize| (4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0;
        let mut real = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for i in 0..2 * m {
            for j in i..2 * m {
                let v = rich(i, j);
                real[(i, j)] = v;
                real[(j, i)] = v;
            }
        }
        CMat::from_fn(m, m, |a, b| {
            let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
            Complex64::new(0.25 * (real[(xa, xb)] + real[(ya, yb)]), 0.25 * (real[(xa, yb)] - real[(ya, xb)]))
        })
    }

    /// Scalar curvature by differencing `log det g` with the metric itself
    /// obtained by differencing the potential.
    pub fn scalar_curvature(&self, z: &[Complex64]) -> Result<f64> {
        let m = self.dim;
        let h_in = self.step;
        let h_out = self.step * 20.0;
        let g = self.hessian(z, h_in);
        let inv = hermitian_inverse(&g)?;
        let logdet = |p: &[Complex64]| -> f64 {
            let gg = self.hessian(p, h_in);
            gg.determinant().re.ln()
        };
        let shifted = |k: usize, sk: f64, l: usize, sl: f64| -> f64 {
            let mut p = z.to_vec();
            let e = |k: usize| if k % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            p[k / 2] += e(k) * sk;
            p[l / 2] += e(l) * sl;
            logdet(&p)
        };
        let second = |i: usize, j: usize, h: f64| {
            (shifted(i, h, j, h) - shifted(i, h, j, -h) - shifted(i, -h, j, h) + shifted(i, -h, j, -h)) / (4.0 * h * h)
        };
        let mut real = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for i in 0..2 * m {
            for j in i..2 * m {
                let v = (4.0 * second(i, j, h_out / 2.0) - second(i, j, h_out)) / 3.0;
                real[(i, j)] = v;
                real[(j, i)] = v;
            }
        }
        let l = CMat::from_fn(m, m, |a, b| {
            let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
            Complex64::new(0.25 * (real[(xa, xb)] + real[(ya, yb)]), 0.25 * (real[(xa, yb)] - real[(ya, xb)]))
        });
        Ok(-(inv * l).trace().re)
    }
}

fn hermitian_inverse(g: &CMat) -> Result<CMat> {
    let lmin = g.clone().symmetric_eigenvalues().min();
    if !(lmin > 0.0) {
        return Err(KstabError::Domain(format!(
            "metric is not positive definite at the evaluation point (smallest eigenvalue {lmin:.3e})"
        )));
    }
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| KstabError::Domain("metric is not positive definite at the evaluation point".into()))?;
    Ok(chol.inverse())
}

/// Scalar curvature `-g^{c \bar d} d_c d_{\bar d} log det g` at `z`.
pub fn scalar_curvature_numeric(chart: &dyn ChartPotential, z: &[Complex64]) -> Result<f64> {
    let jet = chart.metric_jet(z);
    scalar_curvature_from_jet(&jet)
}

pub fn scalar_curvature_from_jet(jet: &MetricJet) -> Result<f64> {
    let h = hermitian_inverse(&jet.g)?;
    let m = jet.g.nrows();
    let hdg: Vec<CMat> = jet.dg.iter().map(|d| &h * d).collect();
    let mut s = Complex64::new(0.0, 0.0);
    for c in 0..m {
        for d in 0..m {
            // d_c d_{\bar d} log det g
            let first = (&h * &jet.ddg[c][d]).trace();
            let second = (&h * jet.dg[d].adjoint() * &hdg[c]).trace();
            s -= h[(d, c)] * (first - second);
        }
    }
    Ok(s.re)
}

/// Determinant of the metric (real and positive on the domain).
pub fn metric_determinant(chart: &dyn ChartPotential, z: &[Complex64]) -> f64 {
    chart.metric_jet(z).g.determinant().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn point(v: &[f64]) -> Vec<Complex64> {
        v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
    }

    #[test]
    fn flat_space_is_scalar_flat() {
        let chart = RadialPotential { dim: 3, profile: Flat };
        let s = scalar_curvature_numeric(&chart, &point(&[0.3, -0.2, 1.0, 0.5, -0.7, 0.1])).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn fubini_study_curvature_is_constant() {
        // Ric(omega_FS) = (n + 1) omega_FS, trace with the complex metric gives n(n + 1).
        let chart = RadialPotential { dim: 3, profile: FubiniStudy { scale: 1.0, b: 1.0 } };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = scalar_curvature_numeric(&chart, &point(&z)).unwrap();
            assert!((s - 12.0).abs() < 1e-9, "s = {s}");
        }
    }

    #[test]
    fn product_curvature_is_additive() {
        let chart = BlockPotential {
            blocks: vec![
                (1, Box::new(FubiniStudy { scale: 1.0, b: 1.0 })),
                (2, Box::new(FubiniStudy { scale: 2.5, b: 1.0 })),
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let z: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let s = scalar_curvature_numeric(&chart, &point(&z)).unwrap();
            assert!((s - (2.0 + 6.0 / 2.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_difference_evaluator_agrees() {
        let fd = FdPotential {
            dim: 2,
            potential: |z: &[Complex64]| (1.0 + z.iter().map(|w| w.norm_sqr()).sum::<f64>()).ln(),
            step: 1e-3,
        };
        let s = fd.scalar_curvature(&point(&[0.2, 0.1, -0.3, 0.4])).unwrap();
        assert!((s - 6.0).abs() < 1e-3, "s = {s}");
    }

    #[test]
    fn negative_metric_is_a_domain_error() {
        let chart = RadialPotential { dim: 2, profile: |s: f64| Jet::variable(s) * -1.0 };
        let err = scalar_curvature_numeric(&chart, &point(&[0.1, 0.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err.code(), "E_DOMAIN");
    }
}
