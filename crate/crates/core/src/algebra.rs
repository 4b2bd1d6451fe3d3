//! Finite-dimensional algebra of Hamiltonian isometries of a product of
//! projective spaces.
//!
//! A generator is a list of Hermitian blocks, one per factor.  Its Hamiltonian on
//! the factor `P^n` with scale `a` is `a (z^* A z / |z|^2 - tr A / (n + 1))`, so the
//! identity part of a block never contributes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KstabError, Result};

pub type CMat = DMatrix<Complex64>;

/// Linear-algebra tolerance used for ranks, Hermitian checks and closure tests.
pub const LINALG_TOL: f64 = 1e-10;

/// One projective-space factor `(P^dim, scale * omega_FS)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub dim: usize,
    pub scale: f64,
}

impl Factor {
    /// Volume of the factor for the measure `omega^n / n!`.
    pub fn volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.scale).powi(self.dim as i32) / factorial(self.dim)
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A generator: one Hermitian block of size `dim + 1` per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub blocks: Vec<CMat>,
}

impl Generator {
    /// Generator acting on a single factor by `block`, trivially on the others.
    pub fn on_factor(factors: &[Factor], index: usize, block: CMat) -> Self {
        let blocks = factors
            .iter()
            .enumerate()
            .map(|(i, f)| if i == index { block.clone() } else { CMat::zeros(f.dim + 1, f.dim + 1) })
            .collect();
        Generator { blocks }
    }

    /// Real diagonal block on one factor.
    pub fn diagonal(factors: &[Factor], index: usize, diag: &[f64]) -> Self {
        let n = diag.len();
        let block =
            CMat::from_fn(n, n, |r, c| if r == c { Complex64::new(diag[r], 0.0) } else { Complex64::new(0.0, 0.0) });
        Self::on_factor(factors, index, block)
    }

    /// Blocks with the trace part removed.
    pub fn traceless(&self) -> Vec<CMat> {
        self.blocks.iter().map(traceless).collect()
    }
}

pub fn traceless(a: &CMat) -> CMat {
    let n = a.nrows();
    let t = a.trace() / n as f64;
    let mut out = a.clone();
    for i in 0..n {
        out[(i, i)] -= t;
    }
    out
}

fn flatten(blocks: &[CMat]) -> Vec<f64> {
    let mut out = Vec::new();
    for b in blocks {
        for z in b.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

/// Hermitian basis of `su(n)`: off-diagonal symmetric and antisymmetric
/// pairs followed by the diagonal `E_kk - E_{k+1,k+1}`.
pub fn su_basis(n: usize) -> Vec<CMat> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = Vec::new();
    for r in 0..n {
        for c in (r + 1)..n {
            let mut s = CMat::from_element(n, n, zero);
            s[(r, c)] = Complex64::new(1.0, 0.0);
            s[(c, r)] = Complex64::new(1.0, 0.0);
            out.push(s);
            let mut a = CMat::from_element(n, n, zero);
            a[(r, c)] = Complex64::new(0.0, -1.0);
            a[(c, r)] = Complex64::new(0.0, 1.0);
            out.push(a);
        }
    }
    for k in 0..n.saturating_sub(1) {
        let mut d = CMat::from_element(n, n, zero);
        d[(k, k)] = Complex64::new(1.0, 0.0);
        d[(k + 1, k + 1)] = Complex64::new(-1.0, 0.0);
        out.push(d);
    }
    out
}

/// Coordinates of an element of the algebra in the generator basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement(pub DVector<f64>);

/// Dual coordinates: `coeffs[k]` is the pairing with generator `k`, for a
/// moment value the Hamiltonian `h_k` at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub coeffs: DVector<f64>,
}

impl MomentVector {
    pub fn new(coeffs: DVector<f64>) -> Self {
        MomentVector { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        MomentVector { coeffs: DVector::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Pairing with an algebra element, `<mu, xi>`.
    pub fn pair(&self, xi: &AlgebraElement) -> f64 {
        self.coeffs.dot(&xi.0)
    }

    pub fn axpy(&self, t: f64, other: &MomentVector) -> MomentVector {
        MomentVector::new(&self.coeffs + &other.coeffs * t)
    }
}

/// How the Gram matrix is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GramMethod {
    /// Exact second moments of the unitary-invariant measure.
    ClosedForm,
    /// Sphere sampling with the given sample count and seed; fails when the
    /// estimated standard error exceeds `tolerance` times the largest entry.
    MonteCarlo { samples: usize, seed: u64, tolerance: f64 },
}

/// Algebra of Hamiltonian generators with L^2 Gram matrix, structure
/// constants and a marked torus.
#[derive(Clone, Debug)]
pub struct ActionAlgebra {
    factors: Vec<Factor>,
    generators: Vec<Generator>,
    gram: DMatrix<f64>,
    /// `structure[k][l]` holds the coordinates of `[X_k, X_l]`.
    structure: Vec<Vec<DVector<f64>>>,
    bracket_residual: f64,
    torus: Vec<usize>,
}

impl ActionAlgebra {
    /// Builds the algebra, evaluating the Gram matrix in closed form and
    /// expanding brackets in the basis.  Fails on shape mismatches,
    /// non-Hermitian blocks, a span not closed under brackets, or a
    /// non-abelian torus.
    pub fn new(factors: Vec<Factor>, generators: Vec<Generator>, torus: Vec<usize>) -> Result<Self> {
        for (gi, g) in generators.iter().enumerate() {
            if g.blocks.len() != factors.len() {
                return Err(KstabError::Validation(format!(
                    "generator {gi} has {} blocks but the model has {} factors",
                    g.blocks.len(),
                    factors.len()
                )));
            }
            for (fi, (b, f)) in g.blocks.iter().zip(&factors).enumerate() {
                if b.nrows() != f.dim + 1 || b.ncols() != f.dim + 1 {
                    return Err(KstabError::Validation(format!(
                        "generator {gi}, factor {fi}: expected a {0}x{0} block",
                        f.dim + 1
                    )));
                }
                if hermitian_defect(b) > LINALG_TOL {
                    return Err(KstabError::Validation(format!("generator {gi}, factor {fi}: block is not Hermitian")));
                }
            }
        }
        for &t in &torus {
            if t >= generators.len() {
                return Err(KstabError::Validation(format!("torus index {t} out of range")));
            }
        }
        let gram = gram_matrix(&factors, &generators, GramMethod::ClosedForm)?;
        let (structure, bracket_residual) = expand_brackets(&generators);
        if bracket_residual > 1e-8 {
            return Err(KstabError::Validation(format!(
                "generators are not closed under the bracket (residual {bracket_residual:.3e})"
            )));
        }
        let alg = ActionAlgebra { factors, generators, gram, structure, bracket_residual, torus };
        alg.check_abelian(&alg.torus)?;
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn torus(&self) -> &[usize] {
        &self.torus
    }

    /// Largest residual met when expanding brackets in the basis.
    pub fn bracket_residual(&self) -> f64 {
        self.bracket_residual
    }

    /// Structure constant `c_{kl}^n` with `[X_k, X_l] = sum_n c_{kl}^n X_n`.
    pub fn structure_constant(&self, k: usize, l: usize, n: usize) -> f64 {
        self.structure[k][l][n]
    }

    /// Largest violation of antisymmetry and the Jacobi identity.
    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let anti = &self.structure[a][b] + &self.structure[b][a];
                worst = worst.max(anti.amax());
                for c in 0..d {
                    let mut sum = DVector::zeros(d);
                    for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                        // [[x, y], z]
                        for e in 0..d {
                            let w = self.structure[x][y][e];
                            if w != 0.0 {
                                sum += &self.structure[e][z] * w;
                            }
                        }
                    }
                    worst = worst.max(sum.amax());
                }
            }
        }
        worst
    }

    /// Bracket of two algebra elements.
    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for k in 0..d {
            if x.0[k] == 0.0 {
                continue;
            }
            for l in 0..d {
                if y.0[l] != 0.0 {
                    out += &self.structure[k][l] * (x.0[k] * y.0[l]);
                }
            }
        }
        AlgebraElement(out)
    }

    /// Per-factor Hermitian matrices `sum_k xi_k A_k`.
    pub fn blocks_of(&self, xi: &AlgebraElement) -> Vec<CMat> {
        self.factors
            .iter()
            .enumerate()
            .map(|(f, fac)| {
                let mut m = CMat::zeros(fac.dim + 1, fac.dim + 1);
                for (k, g) in self.generators.iter().enumerate() {
                    if xi.0[k] != 0.0 {
                        m += &g.blocks[f] * Complex64::new(xi.0[k], 0.0);
                    }
                }
                m
            })
            .collect()
    }

    /// Fails unless the given basis indices pairwise commute.
    pub fn check_abelian(&self, indices: &[usize]) -> Result<()> {
        for &a in indices {
            for &b in indices {
                if self.structure[a][b].amax() > LINALG_TOL {
                    return Err(KstabError::Validation(format!("torus generators {a} and {b} do not commute")));
                }
            }
        }
        Ok(())
    }

    /// `<x, y>` for algebra elements.
    pub fn inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> f64 {
        (x.0.transpose() * &self.gram * &y.0)[(0, 0)]
    }

    pub fn norm(&self, x: &AlgebraElement) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Dual coordinates of an algebra element.
    pub fn lower(&self, x: &AlgebraElement) -> MomentVector {
        MomentVector::new(&self.gram * &x.0)
    }

    /// Algebra element identified with a dual vector through the Gram matrix.
    pub fn raise(&self, mu: &MomentVector) -> Result<AlgebraElement> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| KstabError::Validation("Gram matrix is not positive definite".into()))?;
        Ok(AlgebraElement(chol.solve(&mu.coeffs)))
    }

    /// Gram norm of a dual vector.
    pub fn moment_norm(&self, mu: &MomentVector) -> Result<f64> {
        let x = self.raise(mu)?;
        Ok(mu.pair(&x).max(0.0).sqrt())
    }

    /// Basis (columns) of the subalgebra of elements commuting with, and
    /// orthogonal to, every torus generator.
    pub fn t_perp_subalgebra(&self, torus: &[usize]) -> Result<DMatrix<f64>> {
        self.check_abelian(torus)?;
        let d = self.dim();
        let cols: Vec<DVector<f64>> =
            torus.iter().map(|&t| DVector::from_fn(d, |i, _| if i == t { 1.0 } else { 0.0 })).collect();
        let basis = if cols.is_empty() { DMatrix::zeros(d, 0) } else { DMatrix::from_columns(&cols) };
        self.t_perp_of(&basis)
    }

    /// As [`Self::t_perp_subalgebra`] for a torus given by basis columns.
    pub fn t_perp_of(&self, torus: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let cols: Vec<AlgebraElement> = torus.column_iter().map(|c| AlgebraElement(c.into_owned())).collect();
        for a in &cols {
            for b in &cols {
                if self.bracket(a, b).0.amax() > LINALG_TOL {
                    return Err(KstabError::Validation("torus elements do not commute".into()));
                }
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for t in &cols {
            // [xi, t] is linear in xi: column k is [e_k, t]
            let mut m = DMatrix::zeros(d, d);
            for k in 0..d {
                let mut e = DVector::zeros(d);
                e[k] = 1.0;
                m.set_column(k, &self.bracket(&AlgebraElement(e), t).0);
            }
            for n in 0..d {
                rows.push(m.row(n).iter().copied().collect());
            }
            rows.push((&self.gram * &t.0).iter().copied().collect());
        }
        Ok(nullspace(&rows, d))
    }

    /// Gram-orthogonal projection of a dual vector onto the subalgebra spanned
    /// by the columns of `basis`.
    pub fn project(&self, mu: &MomentVector, basis: &DMatrix<f64>) -> Result<MomentVector> {
        if basis.ncols() == 0 {
            return Ok(MomentVector::zeros(self.dim()));
        }
        let gb = &self.gram * basis;
        let m = basis.transpose() * &gb;
        let chol = m
            .cholesky()
            .ok_or_else(|| KstabError::Validation("subalgebra basis is degenerate for the Gram pairing".into()))?;
        let coef = chol.solve(&(basis.transpose() * &mu.coeffs));
        Ok(MomentVector::new(gb * coef))
    }

    /// Expresses `g^{-1} A_k g` in the basis, for each generator `k`.
    fn conjugation_matrix(&self, g: &[CMat]) -> Result<DMatrix<f64>> {
        if g.len() != self.factors.len() {
            return Err(KstabError::Validation("group element has the wrong number of blocks".into()));
        }
        let mut inv = Vec::with_capacity(g.len());
        for (i, (b, f)) in g.iter().zip(&self.factors).enumerate() {
            if b.nrows() != f.dim + 1 || b.ncols() != f.dim + 1 {
                return Err(KstabError::Validation(format!("group block {i} has the wrong size")));
            }
            let det = b.determinant().norm();
            let scale = b.norm().powi(b.nrows() as i32).max(f64::MIN_POSITIVE);
            let bi = b.clone().try_inverse();
            match bi {
                Some(bi) if det > 1e-12 * scale => inv.push(bi),
                _ => {
                    return Err(KstabError::Validation(format!("group block {i} is singular")));
                }
            }
        }
        let d = self.dim();
        let basis = basis_matrix(&self.generators);
        let svd = basis.clone().svd(true, true);
        let mut t = DMatrix::zeros(d, d);
        for k in 0..d {
            let conj: Vec<CMat> =
                self.generators[k].blocks.iter().zip(g.iter().zip(&inv)).map(|(a, (gb, gi))| gi * a * gb).collect();
            for c in &conj {
                if hermitian_defect(&traceless(c)) > 1e-8 * (1.0 + c.norm()) {
                    return Err(KstabError::Validation(
                        "group element does not preserve the compact form; adjoint image is not Hermitian".into(),
                    ));
                }
            }
            let target = DVector::from_vec(flatten(&conj.iter().map(traceless).collect::<Vec<_>>()));
            let coef = svd.solve(&target, LINALG_TOL).expect("svd with vectors");
            let resid = (&basis * &coef - &target).amax();
            if resid > 1e-8 * (1.0 + target.amax()) {
                return Err(KstabError::Validation("algebra is not invariant under the group element".into()));
            }
            t.set_row(k, &coef.transpose());
        }
        Ok(t)
    }

    /// Transports a moment value along the coordinate action of `g`:
    /// the result is the moment value at `g . p` when `mu` is the value at `p`.
    pub fn adjoint_transport(&self, g: &[CMat], mu: &MomentVector) -> Result<MomentVector> {
        let t = self.conjugation_matrix(g)?;
        Ok(MomentVector::new(t * &mu.coeffs))
    }
}

pub fn hermitian_defect(b: &CMat) -> f64 {
    (b - b.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Real matrix whose columns are flattened traceless generators.
fn basis_matrix(gens: &[Generator]) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = gens.iter().map(|g| DVector::from_vec(flatten(&g.traceless()))).collect();
    if cols.is_empty() {
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_columns(&cols)
}

fn expand_brackets(gens: &[Generator]) -> (Vec<Vec<DVector<f64>>>, f64) {
    let d = gens.len();
    let mut structure = vec![vec![DVector::zeros(d); d]; d];
    if d == 0 {
        return (structure, 0.0);
    }
    let basis = basis_matrix(gens);
    let svd = basis.clone().svd(true, true);
    let tl: Vec<Vec<CMat>> = gens.iter().map(|g| g.traceless()).collect();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut worst: f64 = 0.0;
    for k in 0..d {
        for l in (k + 1)..d {
            let br: Vec<CMat> = tl[k].iter().zip(&tl[l]).map(|(a, b)| (a * b - b * a) * minus_i).collect();
            let target = DVector::from_vec(flatten(&br));
            if target.amax() == 0.0 {
                continue;
            }
            let coef = svd.solve(&target, LINALG_TOL).expect("svd with vectors");
            worst = worst.max((&basis * &coef - &target).amax());
            structure[l][k] = -&coef;
            structure[k][l] = coef;
        }
    }
    (structure, worst)
}

/// Orthonormal basis (columns) of the null space of the stacked rows.
pub fn nullspace(rows: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    if rows.is_empty() {
        return DMatrix::identity(d, d);
    }
    let a = DMatrix::from_fn(rows.len().max(d), d, |r, c| if r < rows.len() { rows[r][c] } else { 0.0 });
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.max().max(1.0);
    let mut cols = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= LINALG_TOL * smax {
            cols.push(v_t.row(i).transpose());
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// `Gram[i][j] = integral of h_i h_j omega^m / m!`.
pub fn gram_matrix(factors: &[Factor], gens: &[Generator], method: GramMethod) -> Result<DMatrix<f64>> {
    let d = gens.len();
    let vol: f64 = factors.iter().map(Factor::volume).product();
    match method {
        GramMethod::ClosedForm => {
            let tl: Vec<Vec<CMat>> = gens.iter().map(|g| g.traceless()).collect();
            Ok(DMatrix::from_fn(d, d, |i, j| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(f, fac)| {
                        let n = fac.dim as f64;
                        let tr = (&tl[i][f] * &tl[j][f]).trace().re;
                        fac.scale * fac.scale * vol * tr / ((n + 1.0) * (n + 2.0))
                    })
                    .sum()
            }))
        }
        GramMethod::MonteCarlo { samples, seed, tolerance } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sum = DMatrix::<f64>::zeros(d, d);
            let mut sum_sq = DMatrix::<f64>::zeros(d, d);
            let mut h = vec![0.0; d];
            for _ in 0..samples {
                let pts: Vec<Vec<Complex64>> = factors.iter().map(|f| sphere_sample(&mut rng, f.dim + 1)).collect();
                for (k, g) in gens.iter().enumerate() {
                    h[k] = factors
                        .iter()
                        .zip(&g.blocks)
                        .zip(&pts)
                        .map(|((f, b), z)| f.scale * (quadratic(b, z) - b.trace().re / (f.dim as f64 + 1.0)))
                        .sum();
                }
                for i in 0..d {
                    for j in 0..d {
                        let v = h[i] * h[j];
                        sum[(i, j)] += v;
                        sum_sq[(i, j)] += v * v;
                    }
                }
            }
            let n = samples as f64;
            let mean = &sum / n;
            let mut worst_se: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let var = (sum_sq[(i, j)] / n - mean[(i, j)].powi(2)).max(0.0);
                    worst_se = worst_se.max((var / n).sqrt());
                }
            }
            let gram = mean * vol;
            let se = worst_se * vol;
            let tol = tolerance * gram.amax().max(f64::MIN_POSITIVE);
            if se > tol && gram.amax() > 0.0 {
                return Err(KstabError::Quadrature { estimate: se, tolerance: tol });
            }
            Ok(gram)
        }
    }
}

/// `z^* A z` for a unit vector `z`.
pub fn quadratic(a: &CMat, z: &[Complex64]) -> f64 {
    let n = z.len();
    let mut s = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            s += z[r].conj() * a[(r, c)] * z[c];
        }
    }
    s.re
}

fn sphere_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn su3_model() -> ActionAlgebra {
        let factors = vec![Factor { dim: 2, scale: 1.0 }];
        let gens = su_basis(3).into_iter().map(|b| Generator::on_factor(&factors, 0, b)).collect();
        ActionAlgebra::new(factors, gens, vec![6, 7]).unwrap()
    }

    fn unitary_from(h: &CMat, t: f64) -> CMat {
        let eig = h.clone().symmetric_eigen();
        let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, l * t)));
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    #[test]
    fn zero_generator_has_zero_gram() {
        let factors = vec![Factor { dim: 2, scale: 1.0 }];
        let gen = Generator::on_factor(&factors, 0, CMat::identity(3, 3));
        let g = gram_matrix(&factors, &[gen], GramMethod::ClosedForm).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 0.0);
    }

    #[test]
    fn gram_matches_sphere_sampling() {
        let factors = vec![Factor { dim: 2, scale: 1.0 }];
        let a = Generator::diagonal(&factors, 0, &[1.0, -1.0, 0.0]);
        let b = Generator::diagonal(&factors, 0, &[0.0, 1.0, -1.0]);
        let exact = gram_matrix(&factors, &[a.clone(), b.clone()], GramMethod::ClosedForm).unwrap();
        assert!((exact[(0, 1)] + std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        let mc = gram_matrix(&factors, &[a, b], GramMethod::MonteCarlo { samples: 200_000, seed: 3, tolerance: 0.02 })
            .unwrap();
        assert!((mc[(0, 1)] - exact[(0, 1)]).abs() < 0.02 * exact[(0, 1)].abs());
    }

    #[test]
    fn generators_on_different_factors_are_orthogonal() {
        let factors = vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }];
        let a = Generator::diagonal(&factors, 0, &[1.0, -1.0]);
        let b = Generator::diagonal(&factors, 1, &[1.0, 0.0, -1.0]);
        let g = gram_matrix(&factors, &[a, b], GramMethod::ClosedForm).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        assert!(g[(0, 0)] > 0.0 && g[(1, 1)] > 0.0);
    }

    #[test]
    fn su3_structure_constants_satisfy_jacobi() {
        let alg = su3_model();
        assert!(alg.bracket_residual() < 1e-12);
        assert!(alg.jacobi_residual() < 1e-10);
    }

    #[test]
    fn non_abelian_torus_rejected() {
        let factors = vec![Factor { dim: 2, scale: 1.0 }];
        let gens = su_basis(3).into_iter().map(|b| Generator::on_factor(&factors, 0, b)).collect();
        let err = ActionAlgebra::new(factors, gens, vec![0, 1]).unwrap_err();
        assert_eq!(err.code(), "E_VALIDATION");
    }

    #[test]
    fn t_perp_trivial_cases() {
        let alg = su3_model();
        assert_eq!(alg.t_perp_subalgebra(&[]).unwrap().ncols(), 8);
        // The Cartan subalgebra is maximal abelian and orthogonal only to 0.
        assert_eq!(alg.t_perp_subalgebra(&[6, 7]).unwrap().ncols(), 0);
    }

    #[test]
    fn t_perp_dimension_matches_direct_rank() {
        // u(3): su(3) plus the identity.
        let factors = vec![Factor { dim: 2, scale: 1.0 }];
        let mut blocks = su_basis(3);
        blocks.push(CMat::identity(3, 3));
        let gens: Vec<Generator> = blocks.iter().map(|b| Generator::on_factor(&factors, 0, b.clone())).collect();
        let alg = ActionAlgebra::new(factors.clone(), gens, vec![6]).unwrap();
        let got = alg.t_perp_subalgebra(&[6]).unwrap().ncols();

        // Constraints written directly from matrix commutators and traces.
        let t = &blocks[6];
        let mut rows = Vec::new();
        for r in 0..3 {
            for col in 0..3 {
                let comm = |b: &CMat| (b * t - t * b)[(r, col)];
                rows.push(blocks.iter().map(|b| comm(b).re).collect::<Vec<_>>());
                rows.push(blocks.iter().map(|b| comm(b).im).collect::<Vec<_>>());
            }
        }
        rows.push(blocks.iter().map(|b| (traceless(b) * traceless(t)).trace().re).collect());
        let m = DMatrix::from_fn(rows.len(), 9, |r, col| rows[r][col]);
        let rank = m.rank(1e-9);
        assert_eq!(got, 9 - rank);
        assert_eq!(got, 2);
    }

    #[test]
    fn projection_trivial_cases() {
        let alg = su3_model();
        let mu = MomentVector::new(DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin()));
        let full = DMatrix::identity(8, 8);
        let p = alg.project(&mu, &full).unwrap();
        assert!((p.coeffs - &mu.coeffs).amax() < 1e-12);
        // complement of mu: all x with <x, mu> = 0 in the Gram pairing,
        // i.e. x . mu.coeffs = 0 in algebra coordinates
        let rows = vec![mu.coeffs.iter().copied().collect::<Vec<_>>()];
        let comp = nullspace(&rows, 8);
        assert_eq!(comp.ncols(), 7);
        assert!(alg.project(&mu, &comp).unwrap().coeffs.amax() < 1e-12);
    }

    #[test]
    fn projection_matches_weighted_least_squares() {
        let alg = su3_model();
        let mu = MomentVector::new(DVector::from_fn(8, |i, _| 1.0 + (i as f64).cos()));
        let basis = DMatrix::from_fn(8, 2, |r, c| ((r * 3 + c * 5) as f64).sin());
        // Least squares in the Cholesky-weighted norm, solved by QR.
        let l = alg.gram().clone().cholesky().unwrap().l();
        let x = alg.gram().clone().lu().solve(&mu.coeffs).unwrap();
        let a = l.transpose() * &basis;
        let b = l.transpose() * &x;
        let qr = a.clone().qr();
        let coef = qr.r().solve_upper_triangular(&(qr.q().transpose() * b)).unwrap();
        let expected = alg.gram() * (&basis * coef);
        let got = alg.project(&mu, &basis).unwrap();
        assert!((got.coeffs - expected).amax() < 1e-10);
    }

    #[test]
    fn transport_by_identity_and_torus() {
        let alg = su3_model();
        let mu = MomentVector::new(DVector::from_fn(8, |i, _| (i as f64).sin()));
        let id = vec![CMat::identity(3, 3)];
        assert!((alg.adjoint_transport(&id, &mu).unwrap().coeffs - &mu.coeffs).amax() < 1e-12);
        let torus_mu = MomentVector::new(DVector::from_fn(8, |i, _| if i >= 6 { 1.0 + i as f64 } else { 0.0 }));
        let g = vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(1.0, -1.1),
            c(1.0),
        ]))];
        let out = alg.adjoint_transport(&g, &torus_mu).unwrap();
        assert!((out.coeffs - torus_mu.coeffs).amax() < 1e-12);
    }

    #[test]
    fn singular_group_element_rejected() {
        let alg = su3_model();
        let mu = MomentVector::zeros(8);
        let g = vec![CMat::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0), c(1.0)]))];
        assert_eq!(alg.adjoint_transport(&g, &mu).unwrap_err().code(), "E_VALIDATION");
    }

    proptest! {
        #[test]
        fn unitary_transport_is_isometry(seed in proptest::collection::vec(-1.0f64..1.0, 8), t in -2.0f64..2.0,
                                         mu in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let alg = su3_model();
            let h = alg.blocks_of(&AlgebraElement(DVector::from_vec(seed)))[0].clone();
            let g = vec![unitary_from(&h, t)];
            let mu = MomentVector::new(DVector::from_vec(mu));
            let out = alg.adjoint_transport(&g, &mu).unwrap();
            let n0 = alg.moment_norm(&mu).unwrap();
            let n1 = alg.moment_norm(&out).unwrap();
            prop_assert!((n0 - n1).abs() < 1e-9 * (1.0 + n0));
        }

        #[test]
        fn projection_idempotent_and_self_adjoint(x in proptest::collection::vec(-1.0f64..1.0, 8),
                                                  y in proptest::collection::vec(-1.0f64..1.0, 8),
                                                  b in proptest::collection::vec(-1.0f64..1.0, 24)) {
            let alg = su3_model();
            let basis = DMatrix::from_vec(8, 3, b);
            prop_assume!(basis.rank(1e-3) == 3);
            let x = MomentVector::new(DVector::from_vec(x));
            let y = MomentVector::new(DVector::from_vec(y));
            let px = alg.project(&x, &basis).unwrap();
            let ppx = alg.project(&px, &basis).unwrap();
            prop_assert!((&ppx.coeffs - &px.coeffs).amax() < 1e-9);
            let py = alg.project(&y, &basis).unwrap();
            let lhs = px.pair(&alg.raise(&y).unwrap());
            let rhs = x.pair(&alg.raise(&py).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
