//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use kstab::algebra::{factorial, AlgebraElement, CMat};
use kstab::models::{ModelSpec, OrbitPoint};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn demo(name: &str) -> (ModelSpec, OrbitPoint) {
    let model = ModelSpec::load(&data(name)).expect("shipped demo loads");
    let p = model.point.clone().expect("demo ships a point");
    (model, p)
}

/// Affine function `c + g . x` on `R^m`.
#[derive(Clone, Debug)]
pub struct Affine {
    pub c: f64,
    pub g: Vec<f64>,
}

impl Affine {
    pub fn at(&self, x: &[f64]) -> f64 {
        self.c + self.g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Integral of an affine function over a simplex given its measure and
/// vertices (the centroid rule is exact for affine integrands).
fn simplex_integral(measure: f64, vertices: &[Vec<f64>], f: &Affine) -> f64 {
    let m = vertices[0].len();
    let k = vertices.len() as f64;
    let centroid: Vec<f64> = (0..m).map(|i| vertices.iter().map(|v| v[i]).sum::<f64>() / k).collect();
    measure * f.at(&centroid)
}

fn corner(b: f64, m: usize, skip: Option<usize>) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if skip.is_some() {
        out.push(vec![0.0; m]);
    }
    for j in 0..m {
        if Some(j) == skip {
            continue;
        }
        let mut v = vec![0.0; m];
        v[j] = b;
        out.push(v);
    }
    out
}

/// `(int_P f dx, int_{dP} f dsigma)` for `P = {x >= 0, sum x <= a}` with the
/// corner `{sum x < c}` removed; `dsigma` is the boundary measure for
/// primitive integral normals.
pub fn cut_simplex_integrals(m: usize, a: f64, c: f64, f: &Affine) -> (f64, f64) {
    let full = |b: f64| {
        let mut v = corner(b, m, None);
        v.push(vec![0.0; m]);
        simplex_integral(b.powi(m as i32) / factorial(m), &v, f)
    };
    let interior = full(a) - if c > 0.0 { full(c) } else { 0.0 };
    let facet = b_facet(m);
    let mut boundary = 0.0;
    for j in 0..m {
        // coordinate facet x_j = 0, minus its corner piece
        boundary += simplex_integral(facet(a), &corner(a, m, Some(j)), f);
        if c > 0.0 {
            boundary -= simplex_integral(facet(c), &corner(c, m, Some(j)), f);
        }
    }
    boundary += simplex_integral(facet(a), &corner(a, m, None), f);
    if c > 0.0 {
        boundary += simplex_integral(facet(c), &corner(c, m, None), f);
    }
    (interior, boundary)
}

fn b_facet(m: usize) -> impl Fn(f64) -> f64 {
    move |b: f64| b.powi(m as i32 - 1) / factorial(m - 1)
}

/// Hamiltonian of `diag(d)` on `P^m` with scale `a` in moment coordinates
/// `x_j = a |z_j|^2 / |z|^2` (`j >= 1`).
pub fn toric_hamiltonian(a: f64, d: &[f64]) -> Affine {
    let m = d.len() - 1;
    let tr: f64 = d.iter().sum();
    Affine { c: a * d[0] - a * tr / (m as f64 + 1.0), g: (1..=m).map(|j| d[j] - d[0]).collect() }
}

/// Futaki invariant `int h (s_bar - s) omega^m` of the diagonal field on the
/// blowup of `P^m` at `[1:0:...:0]` with exceptional class `eps^2`, computed
/// on the moment polytope; also returns the mean scalar curvature.
pub fn toric_futaki(m: usize, a: f64, d: &[f64], eps: f64) -> (f64, f64) {
    let c = eps * eps / (2.0 * std::f64::consts::PI);
    let one = Affine { c: 1.0, g: vec![0.0; m] };
    let (vol, area) = cut_simplex_integrals(m, a, c, &one);
    let s_bar = area / vol;
    let h = toric_hamiltonian(a, d);
    let (ih, bh) = cut_simplex_integrals(m, a, c, &h);
    let norm = factorial(m) * (2.0 * std::f64::consts::PI).powi(m as i32);
    (norm * (s_bar * ih - bh), s_bar)
}

/// Complex Laplacian `g^{j k} d_j d_{\bar k} h` of a Hamiltonian by central
/// differences in affine charts, factor by factor, against the metric of the
/// potential `a log(1 + |w|^2)`.
pub fn fd_laplacian(model: &ModelSpec, xi: &AlgebraElement, p: &OrbitPoint) -> f64 {
    let step = 1e-4;
    let mut total = 0.0;
    for (fi, f) in model.factors().iter().enumerate() {
        let z = &p.coords[fi];
        let j0 = (0..z.len()).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap();
        let w0: Vec<Complex64> = (0..z.len()).filter(|&k| k != j0).map(|k| z[k] / z[j0]).collect();
        let n = w0.len();
        let eval = |w: &[Complex64]| {
            let mut coords = p.coords.clone();
            let mut full = Vec::with_capacity(n + 1);
            let mut it = w.iter();
            for k in 0..=n {
                full.push(if k == j0 { Complex64::new(1.0, 0.0) } else { *it.next().unwrap() });
            }
            coords[fi] = nalgebra::DVector::from_vec(full);
            model.hamiltonian(xi, &OrbitPoint::new(coords).unwrap())
        };
        let shift = |i: usize, si: f64, j: usize, sj: f64| {
            let mut w = w0.clone();
            let e = |k: usize| if k % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            w[i / 2] += e(i) * si;
            w[j / 2] += e(j) * sj;
            eval(&w)
        };
        let mut real = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..2 * n {
            for j in 0..2 * n {
                real[(i, j)] = (shift(i, step, j, step) - shift(i, step, j, -step) - shift(i, -step, j, step)
                    + shift(i, -step, j, -step))
                    / (4.0 * step * step);
            }
        }
        let hess = CMat::from_fn(n, n, |a, b| {
            Complex64::new(
                0.25 * (real[(2 * a, 2 * b)] + real[(2 * a + 1, 2 * b + 1)]),
                0.25 * (real[(2 * a, 2 * b + 1)] - real[(2 * a + 1, 2 * b)]),
            )
        });
        let s: f64 = w0.iter().map(|w| w.norm_sqr()).sum();
        let g = CMat::from_fn(n, n, |a, b| {
            let delta = if a == b { 1.0 + s } else { 0.0 };
            (Complex64::new(delta, 0.0) - w0[a].conj() * w0[b]) * (f.scale / ((1.0 + s) * (1.0 + s)))
        });
        let inv = g.try_inverse().expect("metric invertible");
        total += (inv * hess).trace().re;
    }
    total
}

/// Fitted slope of `log|y|` against `log x`, by ordinary least squares.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Prints the acceptance line and returns whether it passed.
pub fn report(id: usize, name: &str, pass: bool, detail: String) -> bool {
    println!("{} criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
