//! Dimension-generic vector kernel: sphere rays, Gram matrices, orthogonal
//! fitting, and a non-negative least-squares solver used for cone membership.
//!
//! Points and directions are plain `DVector<f64>`; the dimension is a
//! runtime value in `2..=8`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or direction in Euclidean d-space.
pub type Vector = DVector<f64>;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Numerical policy shared by every predicate in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub residual_max: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            residual_max: 1e-7,
        }
    }
}

impl Tolerance {
    pub fn new(eps_abs: f64, eps_rel: f64, residual_max: f64) -> Result<Self> {
        if !(eps_abs > 0.0 && eps_rel > 0.0 && residual_max > 0.0) {
            return Err(Error::InvalidInput(
                "tolerances must be strictly positive".into(),
            ));
        }
        Ok(Tolerance {
            eps_abs,
            eps_rel,
            residual_max,
        })
    }

    /// Absolute threshold for a quantity of magnitude `scale`.
    pub fn scaled(&self, scale: f64) -> f64 {
        self.eps_abs.max(self.eps_rel * scale.abs())
    }
}

pub fn check_dim(d: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d))
    }
}

pub fn vector(coords: &[f64]) -> Vector {
    DVector::from_column_slice(coords)
}

/// An element of O(d), reflections included.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoMap {
    matrix: DMatrix<f64>,
}

impl OrthoMap {
    pub fn identity(d: usize) -> Self {
        OrthoMap {
            matrix: DMatrix::identity(d, d),
        }
    }

    /// Wraps `matrix` after checking `MᵀM = I` to within `tol`.
    pub fn new(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("orthogonal map must be square".into()));
        }
        let map = OrthoMap { matrix };
        if map.orthogonality_defect() > tol {
            return Err(Error::InvalidInput("matrix is not orthogonal".into()));
        }
        Ok(map)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    pub fn inverse(&self) -> OrthoMap {
        OrthoMap {
            matrix: self.matrix.transpose(),
        }
    }

    pub fn compose(&self, other: &OrthoMap) -> OrthoMap {
        OrthoMap {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    /// `max |MᵀM − I|` over all entries.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(d, d)).amax()
    }
}

/// Second intersection of the ray `z + t·u`, `t > 0`, with the sphere of
/// radius `r` centred at the origin. `z` is expected on that sphere.
pub fn ray_second_intersection(z: &Vector, u: &Vector, r: f64, tol: &Tolerance) -> Result<Vector> {
    if z.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: u.len(),
        });
    }
    let norm = u.norm();
    if norm < tol.eps_abs {
        return Err(Error::DegenerateDirection { norm });
    }
    let dir = u / norm;
    let b = z.dot(&dir);
    if b >= 0.0 {
        return Err(Error::NoSecondHit { dot: b });
    }
    // |z + t·dir|² = r² with |dir| = 1: t² + 2bt + (|z|² − r²) = 0.
    let c = z.norm_squared() - r * r;
    let disc = (b * b - c).max(0.0);
    let t = -b + disc.sqrt();
    if t <= 0.0 {
        return Err(Error::NoSecondHit { dot: b });
    }
    Ok(z + dir * t)
}

/// Orthogonal matrix minimising `Σ |M·u_i − w_i|²` over O(d), together with
/// the root-mean-square residual. The polar factor of the cross-covariance
/// is used as is, so reflections are admitted.
pub fn orthogonal_fit(pairs: &[(Vector, Vector)]) -> (OrthoMap, f64) {
    assert!(!pairs.is_empty(), "orthogonal_fit needs at least one pair");
    let d = pairs[0].0.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    for (u, w) in pairs {
        h += w * u.transpose();
    }
    let svd = h.svd(true, true);
    let m = svd.u.expect("left singular vectors") * svd.v_t.expect("right singular vectors");
    let map = OrthoMap { matrix: m };
    let sq: f64 = pairs
        .iter()
        .map(|(u, w)| (map.apply(u) - w).norm_squared())
        .sum();
    let rms = (sq / pairs.len() as f64).sqrt();
    (map, rms)
}

/// Matrix of pairwise dot products.
pub fn gram_matrix(vectors: &[Vector]) -> DMatrix<f64> {
    let k = vectors.len();
    DMatrix::from_fn(k, k, |i, j| vectors[i].dot(&vectors[j]))
}

/// A vector orthogonal to the `d − 1` given vectors in d-space, by cofactor
/// expansion. Returns `None` when the vectors are linearly dependent.
pub fn orthogonal_complement(rows: &[Vector], tol: f64) -> Option<Vector> {
    let d = rows.first()?.len();
    if rows.len() + 1 != d {
        return None;
    }
    let m = DMatrix::from_fn(d - 1, d, |i, j| rows[i][j]);
    let mut normal = DVector::zeros(d);
    for k in 0..d {
        let minor = m.clone().remove_column(k);
        let det = if d == 1 { 1.0 } else { minor.determinant() };
        normal[k] = if k % 2 == 0 { det } else { -det };
    }
    let norm = normal.norm();
    // Scale-aware threshold: the cofactor vector has the magnitude of a
    // (d-1)-volume, so compare against the product of the row lengths.
    let scale: f64 = rows.iter().map(|r| r.norm().max(f64::MIN_POSITIVE)).product();
    if norm <= tol * scale.max(tol) {
        None
    } else {
        Some(normal / norm)
    }
}

/// Numerical rank of the matrix whose columns are `vectors`.
pub fn rank(vectors: &[&Vector], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let d = vectors[0].len();
    let m = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    m.svd(false, false)
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count()
}

/// Lawson–Hanson non-negative least squares: `min |A·x − b|` subject to
/// `x ≥ 0`. Returns the solution and the residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &Vector) -> (Vector, f64) {
    let n = a.ncols();
    let mut x = DVector::<f64>::zeros(n);
    if n == 0 {
        return (x, b.norm());
    }
    let mut passive = vec![false; n];
    let tol = 1e-13 * a.amax().max(1.0) * b.norm().max(1.0) * (n as f64);
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let t = match candidate {
            Some(t) if w[t] > tol => t,
            _ => break,
        };
        passive[t] = true;

        for _ in 0..max_outer {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
            let s_sub = match sub.svd(true, true).solve(b, 1e-14) {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut s = DVector::<f64>::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                s[j] = s_sub[k];
            }
            if idx.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &idx {
                if s[j] <= 0.0 {
                    let denom = x[j] - s[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + (&s - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Whether `u` lies in the conical hull of `generators` (residual of the
/// non-negative fit at most `tol`).
pub fn in_conic_hull(u: &Vector, generators: &[&Vector], tol: f64) -> bool {
    if generators.is_empty() {
        return u.norm() <= tol;
    }
    let d = u.len();
    let a = DMatrix::from_fn(d, generators.len(), |i, j| generators[j][i]);
    nnls(&a, u).1 <= tol
}

/// Haar-distributed random orthogonal matrix; `proper` forces det = +1.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize, proper: bool) -> OrthoMap {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if proper && q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    OrthoMap { matrix: q }
}

/// Uniformly distributed unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    loop {
        let v = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}
