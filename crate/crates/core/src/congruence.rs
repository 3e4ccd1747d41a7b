//! Congruence under O(d) of support cones (shared apex) and of spherical
//! projections (origin-centred), plus shape classification of quadratic
//! cones.
//!
//! Both deciders run the same pipeline: count check, permutations that match
//! the Gram matrices, an orthogonal fit per permutation, then the residual
//! and the boundary structure (2-face adjacency or arc circles). The first
//! permutation in search order that passes wins.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{gram_matrix, orthogonal_fit, OrthoMap, Tolerance, Vector};
use crate::sightcone::SupportCone;
use crate::sphproj::SphericalPolytope;

/// Maximum number of partial assignments explored by the permutation search.
pub const SEARCH_BUDGET: usize = 100_000;

/// A realised congruence: `map · a[i] ≈ b[permutation[i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceWitness {
    pub permutation: Vec<usize>,
    pub map: OrthoMap,
    pub residual: f64,
}

impl CongruenceWitness {
    /// The witness for the reverse direction.
    pub fn inverse(&self) -> CongruenceWitness {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        CongruenceWitness {
            permutation: inv,
            map: self.map.inverse(),
            residual: self.residual,
        }
    }
}

/// Depth-first enumeration of Gram-compatible permutations. `visit` returns
/// `true` to stop the search.
fn gram_search<F>(d1: &[Vector], d2: &[Vector], eps: f64, budget: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize]) -> bool,
{
    let k = d1.len();
    if k != d2.len() {
        return Ok(());
    }
    if k == 0 {
        visit(&[]);
        return Ok(());
    }
    let g1 = gram_matrix(d1);
    let g2 = gram_matrix(d2);
    let sorted_rows = |g: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| {
                let mut row: Vec<f64> = g.row(i).iter().copied().collect();
                row.sort_by(f64::total_cmp);
                row
            })
            .collect()
    };
    let (r1, r2) = (sorted_rows(&g1), sorted_rows(&g2));
    let compat: Vec<Vec<bool>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| r1[i].iter().zip(&r2[j]).all(|(a, b)| (a - b).abs() <= eps))
                .collect()
        })
        .collect();

    let mut perm = vec![usize::MAX; k];
    let mut used = vec![false; k];
    let mut nodes = 0usize;

    #[allow(clippy::too_many_arguments)]
    fn descend<F: FnMut(&[usize]) -> bool>(
        i: usize,
        k: usize,
        g1: &DMatrix<f64>,
        g2: &DMatrix<f64>,
        compat: &[Vec<bool>],
        eps: f64,
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        nodes: &mut usize,
        budget: usize,
        visit: &mut F,
    ) -> Result<bool> {
        if i == k {
            return Ok(visit(perm));
        }
        for j in 0..k {
            if used[j] || !compat[i][j] {
                continue;
            }
            *nodes += 1;
            if *nodes > budget {
                return Err(Error::SearchBudgetExceeded(budget));
            }
            if (0..i).all(|p| (g1[(i, p)] - g2[(j, perm[p])]).abs() <= eps) {
                perm[i] = j;
                used[j] = true;
                let stop = descend(i + 1, k, g1, g2, compat, eps, perm, used, nodes, budget, visit)?;
                used[j] = false;
                perm[i] = usize::MAX;
                if stop {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    descend(0, k, &g1, &g2, &compat, eps, &mut perm, &mut used, &mut nodes, budget, &mut visit)?;
    Ok(())
}

/// All permutations `σ` with `G(D1)[i][j] ≈ G(D2)[σ(i)][σ(j)]`.
pub fn match_by_gram(d1: &[Vector], d2: &[Vector], tol: &Tolerance) -> Result<Vec<Vec<usize>>> {
    let mut found = Vec::new();
    gram_search(d1, d2, tol.eps_abs, SEARCH_BUDGET, |p| {
        found.push(p.to_vec());
        false
    })?;
    Ok(found)
}

/// Congruence of two cones with a common apex. `Ok(None)` means no
/// orthogonal map carries one direction set and its 2-face structure onto
/// the other; a budget overrun is an error, reported separately.
pub fn cone_congruent(a: &SupportCone, b: &SupportCone, tol: &Tolerance) -> Result<Option<CongruenceWitness>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if (a.apex() - b.apex()).norm() > tol.scaled(a.apex().norm()) {
        return Err(Error::ApexMismatch);
    }
    if a.len() != b.len() || a.faces2().len() != b.faces2().len() {
        return Ok(None);
    }
    let mut witness = None;
    gram_search(a.directions(), b.directions(), tol.eps_abs, SEARCH_BUDGET, |perm| {
        if !a.faces2().iter().all(|&(x, y)| b.has_face2(perm[x], perm[y])) {
            return false;
        }
        let pairs: Vec<(Vector, Vector)> = a
            .directions()
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), b.directions()[perm[i]].clone()))
            .collect();
        let (map, residual) = orthogonal_fit(&pairs);
        if residual <= tol.residual_max {
            witness = Some(CongruenceWitness {
                permutation: perm.to_vec(),
                map,
                residual,
            });
            true
        } else {
            false
        }
    })?;
    Ok(witness)
}

/// Congruence of two spherical polytopes under an origin-centred orthogonal
/// map: vertices onto vertices, each arc onto an arc with matched endpoints
/// and the same circle. The light source need not be fixed.
pub fn spherical_congruent(
    s1: &SphericalPolytope,
    s2: &SphericalPolytope,
    tol: &Tolerance,
) -> Result<Option<CongruenceWitness>> {
    let r = s1.r();
    if (r - s2.r()).abs() > tol.scaled(r) {
        return Err(Error::RadiusMismatch(r, s2.r()));
    }
    if s1.vertices().len() != s2.vertices().len() || s1.arcs().len() != s2.arcs().len() {
        return Ok(None);
    }
    let u1: Vec<Vector> = s1.vertices().iter().map(|v| v / r).collect();
    let u2: Vec<Vector> = s2.vertices().iter().map(|v| v / r).collect();
    let circle_eps = tol.residual_max * r;
    let mut witness = None;
    gram_search(&u1, &u2, tol.eps_abs, SEARCH_BUDGET, |perm| {
        let mut matched = Vec::with_capacity(s1.arcs().len());
        for arc in s1.arcs() {
            match s2.arc_between(perm[arc.i], perm[arc.j]) {
                Some(other) if (other.circle_radius - arc.circle_radius).abs() <= circle_eps => {
                    matched.push((arc, other))
                }
                _ => return false,
            }
        }
        let pairs: Vec<(Vector, Vector)> = u1
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), u2[perm[i]].clone()))
            .collect();
        let (map, fit) = orthogonal_fit(&pairs);
        let center_err = matched
            .iter()
            .map(|(a, b)| (map.apply(&a.circle_center) - &b.circle_center).norm() / r)
            .fold(0.0, f64::max);
        let residual = fit.max(center_err);
        if residual <= tol.residual_max {
            witness = Some(CongruenceWitness {
                permutation: perm.to_vec(),
                map,
                residual,
            });
            true
        } else {
            false
        }
    })?;
    Ok(witness)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Circular,
    Elliptical,
    Other,
}

/// Cross-section shape of a quadratic cone in 3-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeShape {
    pub kind: ShapeKind,
    /// `sqrt(λ_max / λ_min)` over the two same-sign eigenvalues of the cone's
    /// quadratic form; infinite for degenerate forms.
    pub axis_ratio: f64,
    /// Unit eigenvector of the odd-sign eigenvalue.
    #[serde(skip)]
    pub axis: Option<Vector>,
}

/// Relative threshold on the smallest singular value of the design matrix
/// for samples to count as lying on one quadratic cone.
const CONE_FIT_TOL: f64 = 1e-9;

/// Fits the quadratic form `xᵀQx = 0` through the sample points (taken
/// relative to `apex`) and classifies its cross-sections.
pub fn cone_shape_classify(samples: &[Vector], apex: &Vector, tol: &Tolerance) -> Result<ConeShape> {
    if apex.len() != 3 {
        return Err(Error::FitFailed("shape classification is implemented for d = 3".into()));
    }
    if samples.len() < 6 {
        return Err(Error::FitFailed(format!("need at least 6 samples, got {}", samples.len())));
    }
    let rows: Vec<[f64; 6]> = samples
        .iter()
        .map(|p| {
            let u = (p - apex).normalize();
            let (x, y, z) = (u[0], u[1], u[2]);
            [x * x, y * y, z * z, 2.0 * x * y, 2.0 * x * z, 2.0 * y * z]
        })
        .collect();
    let design = DMatrix::from_fn(rows.len(), 6, |i, j| rows[i][j]);
    let svd = design.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (smallest, second) = (sv[order[0]], sv[order[1]]);
    let largest = sv[order[sv.len() - 1]];
    if smallest > CONE_FIT_TOL * largest {
        return Err(Error::FitFailed("samples do not lie on a quadratic cone".into()));
    }
    if second <= CONE_FIT_TOL.sqrt() * largest {
        return Err(Error::FitFailed("samples do not determine a unique cone".into()));
    }
    let c = v_t.row(order[0]);
    let q = Matrix3::new(c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2]);
    let eig = SymmetricEigen::new(q);
    let scale = eig.eigenvalues.amax();
    let positive = eig.eigenvalues.iter().filter(|&&l| l > 1e-9 * scale).count();
    let negative = eig.eigenvalues.iter().filter(|&&l| l < -1e-9 * scale).count();
    let flip = match (positive, negative) {
        (2, 1) => 1.0,
        (1, 2) => -1.0,
        _ => {
            return Ok(ConeShape {
                kind: ShapeKind::Other,
                axis_ratio: f64::INFINITY,
                axis: None,
            })
        }
    };
    let mut same: Vec<f64> = Vec::new();
    let mut axis = None;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let l = l * flip;
        if l > 0.0 {
            same.push(l);
        } else {
            axis = Some(Vector::from_iterator(3, eig.eigenvectors.column(i).iter().copied()));
        }
    }
    let (hi, lo) = (same[0].max(same[1]), same[0].min(same[1]));
    let axis_ratio = (hi / lo).sqrt();
    let kind = if axis_ratio - 1.0 <= tol.residual_max {
        ShapeKind::Circular
    } else {
        ShapeKind::Elliptical
    };
    Ok(ConeShape { kind, axis_ratio, axis })
}
