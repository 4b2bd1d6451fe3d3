//! Scaled products of projective spaces with Fubini-Study factors.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{nullspace, quadratic, ActionAlgebra, AlgebraElement, CMat, Factor, Generator, MomentVector};
use crate::error::{KstabError, Result};

/// A point of the product: one unit vector of homogeneous coordinates per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPoint {
    pub coords: Vec<DVector<Complex64>>,
}

impl OrbitPoint {
    /// Normalizes every factor; zero factors are rejected.
    pub fn new(coords: Vec<DVector<Complex64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(coords.len());
        for (i, v) in coords.into_iter().enumerate() {
            let n = v.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Err(KstabError::Validation(format!("point factor {i} is zero or not finite")));
            }
            out.push(v / Complex64::new(n, 0.0));
        }
        Ok(OrbitPoint { coords: out })
    }

    /// From real homogeneous coordinates.
    pub fn real(coords: &[&[f64]]) -> Result<Self> {
        Self::new(
            coords.iter().map(|c| DVector::from_iterator(c.len(), c.iter().map(|x| Complex64::new(*x, 0.0)))).collect(),
        )
    }

    /// Haar-random point (uniform on each sphere).
    pub fn random<R: Rng>(factors: &[Factor], rng: &mut R) -> Self {
        let coords = factors
            .iter()
            .map(|f| {
                DVector::from_fn(f.dim + 1, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
            })
            .collect();
        Self::new(coords).expect("gaussian vector is nonzero")
    }

    /// Distance that ignores per-factor phases: max over factors of `1 - |<u, v>|`.
    pub fn distance(&self, other: &OrbitPoint) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(u, v)| (1.0 - u.dotc(v).norm()).max(0.0)).fold(0.0, f64::max)
    }

    /// Applies per-factor matrices and renormalizes.
    pub fn transform(&self, g: &[CMat]) -> Result<OrbitPoint> {
        OrbitPoint::new(self.coords.iter().zip(g).map(|(v, m)| m * v).collect())
    }

    /// Coordinates as nested `[re, im]` pairs.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        self.coords.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect()
    }

    pub fn from_pairs(pairs: &[Vec<[f64; 2]>]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|f| DVector::from_iterator(f.len(), f.iter().map(|p| Complex64::new(p[0], p[1]))))
                .collect(),
        )
    }
}

impl Serialize for OrbitPoint {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OrbitPoint {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        OrbitPoint::from_pairs(&pairs).map_err(serde::de::Error::custom)
    }
}

/// A scaled product of projective spaces together with its action algebra.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: Option<String>,
    pub algebra: ActionAlgebra,
    /// Optional reference point shipped with demo models.
    pub point: Option<OrbitPoint>,
}

/// Serialized form of a model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub factors: Vec<Factor>,
    /// generators[k][f] is the Hermitian block of generator k on factor f.
    pub generators: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default)]
    pub torus: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<Vec<[f64; 2]>>>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| KstabError::Schema(e.to_string()))
    }

    /// Converts nested pairs into matrices, checking only rectangular shape.
    pub fn generator_blocks(&self) -> Result<Vec<Generator>> {
        self.generators
            .iter()
            .enumerate()
            .map(|(k, blocks)| {
                let blocks = blocks
                    .iter()
                    .enumerate()
                    .map(|(f, rows)| {
                        let n = rows.len();
                        if rows.iter().any(|r| r.len() != n) {
                            return Err(KstabError::Schema(format!("generator {k}, factor {f}: matrix is not square")));
                        }
                        Ok(CMat::from_fn(n, n, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Generator { blocks })
            })
            .collect()
    }
}

impl ModelSpec {
    pub fn new(factors: Vec<Factor>, generators: Vec<Generator>, torus: Vec<usize>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 || !(f.scale > 0.0) || !f.scale.is_finite() {
                return Err(KstabError::Validation(format!("factor {i}: dimension must be >= 1 and scale > 0")));
            }
        }
        Ok(ModelSpec { name: None, algebra: ActionAlgebra::new(factors, generators, torus)?, point: None })
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let mut model = ModelSpec::new(doc.factors.clone(), doc.generator_blocks()?, doc.torus.clone())?;
        model.name = doc.name.clone();
        if let Some(p) = &doc.point {
            let p = OrbitPoint::from_pairs(p)?;
            model.check_point(&p)?;
            model.point = Some(p);
        }
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&ModelDocument::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            name: self.name.clone(),
            factors: self.factors().to_vec(),
            generators: self
                .algebra
                .generators()
                .iter()
                .map(|g| {
                    g.blocks
                        .iter()
                        .map(|b| {
                            (0..b.nrows())
                                .map(|r| (0..b.ncols()).map(|c| [b[(r, c)].re, b[(r, c)].im]).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            torus: self.algebra.torus().to_vec(),
            point: self.point.as_ref().map(OrbitPoint::to_pairs),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        self.algebra.factors()
    }

    /// Total complex dimension.
    pub fn total_dim(&self) -> usize {
        self.factors().iter().map(|f| f.dim).sum()
    }

    /// Volume for `omega^m / m!`.
    pub fn volume(&self) -> f64 {
        self.factors().iter().map(Factor::volume).product()
    }

    /// Constant scalar curvature `sum n_i (n_i + 1) / a_i`.
    pub fn scalar_curvature(&self) -> f64 {
        self.factors().iter().map(|f| (f.dim * (f.dim + 1)) as f64 / f.scale).sum()
    }

    pub fn check_point(&self, p: &OrbitPoint) -> Result<()> {
        if p.coords.len() != self.factors().len()
            || p.coords.iter().zip(self.factors()).any(|(v, f)| v.len() != f.dim + 1)
        {
            return Err(KstabError::Validation("point does not match the model's factor dimensions".into()));
        }
        Ok(())
    }

    /// Blowups need total dimension at least 3.
    pub fn require_blowup_dimension(&self) -> Result<()> {
        let m = self.total_dim();
        if m <= 2 {
            return Err(KstabError::Validation(format!(
                "blowup computations need complex dimension m > 2 (model has m = {m})"
            )));
        }
        Ok(())
    }

    /// Zero-mean Hamiltonian of arbitrary per-factor blocks at `p`.
    pub fn hamiltonian_blocks(&self, blocks: &[CMat], p: &OrbitPoint) -> f64 {
        self.factors()
            .iter()
            .zip(blocks)
            .zip(&p.coords)
            .map(|((f, b), z)| f.scale * (quadratic(b, z.as_slice()) - b.trace().re / (f.dim as f64 + 1.0)))
            .sum()
    }

    /// Complex Laplacian of the Hamiltonian of `blocks` at `p`.
    pub fn laplacian_blocks(&self, blocks: &[CMat], p: &OrbitPoint) -> f64 {
        self.factors()
            .iter()
            .zip(blocks)
            .zip(&p.coords)
            .map(|((f, b), z)| {
                let h = f.scale * (quadratic(b, z.as_slice()) - b.trace().re / (f.dim as f64 + 1.0));
                -(f.dim as f64 + 1.0) / f.scale * h
            })
            .sum()
    }

    /// Hamiltonian of the algebra element `xi` at `p`.
    pub fn hamiltonian(&self, xi: &AlgebraElement, p: &OrbitPoint) -> f64 {
        self.hamiltonian_blocks(&self.algebra.blocks_of(xi), p)
    }

    /// `mu(p)`: `coeffs[k] = h_k(p)`.
    pub fn moment_value(&self, p: &OrbitPoint) -> MomentVector {
        MomentVector::new(DVector::from_iterator(
            self.algebra.dim(),
            self.algebra.generators().iter().map(|g| self.hamiltonian_blocks(&g.blocks, p)),
        ))
    }

    /// `Delta mu(p)` with the complex Laplacian.
    pub fn laplacian_moment(&self, p: &OrbitPoint) -> MomentVector {
        MomentVector::new(DVector::from_iterator(
            self.algebra.dim(),
            self.algebra.generators().iter().map(|g| self.laplacian_blocks(&g.blocks, p)),
        ))
    }

    /// `mu(p) + delta * Delta mu(p)`.
    pub fn perturbed_moment(&self, p: &OrbitPoint, delta: f64) -> MomentVector {
        self.moment_value(p).axpy(delta, &self.laplacian_moment(p))
    }

    /// Applies `exp(-t A_xi)` per factor.  The exponentials are shifted per
    /// factor so the largest weight is 1, so no `t` overflows.
    pub fn group_flow(&self, p: &OrbitPoint, xi: &AlgebraElement, t: f64) -> OrbitPoint {
        let blocks = self.algebra.blocks_of(xi);
        let coords = blocks
            .iter()
            .zip(&p.coords)
            .map(|(a, z)| {
                let eig = a.clone().symmetric_eigen();
                let c = eig.eigenvectors.adjoint() * z;
                let exps: Vec<f64> = eig.eigenvalues.iter().map(|l| -t * l).collect();
                let shift = exps
                    .iter()
                    .zip(c.iter())
                    .filter(|(_, ci)| ci.norm() > 0.0)
                    .map(|(e, _)| *e)
                    .fold(f64::NEG_INFINITY, f64::max);
                let scaled = DVector::from_iterator(c.len(), c.iter().zip(&exps).map(|(ci, e)| ci * (e - shift).exp()));
                &eig.eigenvectors * scaled
            })
            .collect();
        OrbitPoint::new(coords).expect("flow preserves nonzero coordinates")
    }

    /// Real matrix whose column `k` is the tangent vector of generator `k` at `p`.
    pub fn infinitesimal_action(&self, p: &OrbitPoint) -> DMatrix<f64> {
        let gens = self.algebra.generators();
        let rows: usize = self.factors().iter().map(|f| 2 * (f.dim + 1)).sum();
        let mut out = DMatrix::zeros(rows, gens.len());
        for (k, g) in gens.iter().enumerate() {
            let mut r = 0;
            for (b, z) in g.blocks.iter().zip(&p.coords) {
                let az = b * z;
                let lam = z.dotc(&az);
                let tangent = az - z * lam;
                for w in tangent.iter() {
                    out[(r, k)] = w.re;
                    out[(r + 1, k)] = w.im;
                    r += 2;
                }
            }
        }
        out
    }

    /// Basis (columns) of the stabilizer subalgebra of `p`.
    pub fn stabilizer(&self, p: &OrbitPoint) -> DMatrix<f64> {
        let a = self.infinitesimal_action(p);
        let rows: Vec<Vec<f64>> = (0..a.nrows()).map(|r| a.row(r).iter().copied().collect()).collect();
        nullspace(&rows, self.algebra.dim())
    }

    /// Smallest singular value of the infinitesimal action restricted to the
    /// columns of `basis`; zero means a nontrivial stabilizer there.
    pub fn action_min_singular(&self, p: &OrbitPoint, basis: &DMatrix<f64>) -> f64 {
        if basis.ncols() == 0 {
            return f64::INFINITY;
        }
        let a = self.infinitesimal_action(p) * basis;
        a.svd(false, false).singular_values.min()
    }
}

/// Products of projective spaces with a diagonal torus on each factor and the
/// full `su(n+1)` on chosen factors.
pub mod builders {
    use super::*;
    use crate::algebra::su_basis;

    /// Diagonal (maximal torus) generators `E_kk - E_{k+1,k+1}` on every factor;
    /// the whole algebra is the torus.
    pub fn diagonal_torus(factors: Vec<Factor>) -> Result<ModelSpec> {
        let mut gens = Vec::new();
        for (i, f) in factors.iter().enumerate() {
            for k in 0..f.dim {
                let mut d = vec![0.0; f.dim + 1];
                d[k] = 1.0;
                d[k + 1] = -1.0;
                gens.push(Generator::diagonal(&factors, i, &d));
            }
        }
        let torus = (0..gens.len()).collect();
        ModelSpec::new(factors, gens, torus)
    }

    /// `su(n+1)` acting simultaneously on equal-dimensional factors; the torus
    /// marks the diagonal generators.
    pub fn diagonal_unitary(factors: Vec<Factor>) -> Result<ModelSpec> {
        let n = factors.first().map(|f| f.dim + 1).unwrap_or(0);
        if factors.iter().any(|f| f.dim + 1 != n) {
            return Err(KstabError::Validation("diagonal action needs factors of equal dimension".into()));
        }
        let mut gens = Vec::new();
        let mut torus = Vec::new();
        for (j, b) in su_basis(n).into_iter().enumerate() {
            if j >= n * (n - 1) {
                torus.push(gens.len());
            }
            gens.push(Generator { blocks: vec![b; factors.len()] });
        }
        ModelSpec::new(factors, gens, torus)
    }

    /// Full `su(n+1)` on every factor; the torus marks the diagonal generators.
    pub fn full_unitary(factors: Vec<Factor>) -> Result<ModelSpec> {
        let mut gens = Vec::new();
        let mut torus = Vec::new();
        for (i, f) in factors.iter().enumerate() {
            let n = f.dim + 1;
            for (j, b) in su_basis(n).into_iter().enumerate() {
                if j >= n * (n - 1) {
                    torus.push(gens.len());
                }
                gens.push(Generator::on_factor(&factors, i, b));
            }
        }
        ModelSpec::new(factors, gens, torus)
    }
}
