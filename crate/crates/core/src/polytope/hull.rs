//! Incremental (beneath-beyond) convex hull in dimensions 2..=8.
//!
//! Points are inserted one at a time into a simplicial hull; a point is
//! beyond a facet only when its signed distance exceeds the tolerance, so
//! coplanar points never split a facet. Coplanar simplicial pieces are merged
//! into true facets at the end, and extreme points are read off the merged
//! facet incidences.

use std::collections::HashMap;

use super::{Facet, Hyperplane, Polytope};
use crate::error::{Error, Result};
use crate::geom::{check_dim, orthogonal_complement, rank, Tolerance, Vector};

/// Coplanar simplicial facets are merged when their normals differ by less
/// than this angle (radians).
pub const FACET_MERGE_ANGLE: f64 = 1e-8;

struct Simplex {
    verts: Vec<usize>,
    plane: Hyperplane,
    alive: bool,
}

fn plane_through(points: &[Vector], ids: &[usize], interior: &Vector, tol: f64) -> Option<Hyperplane> {
    let base = &points[ids[0]];
    let diffs: Vec<Vector> = ids[1..].iter().map(|&i| &points[i] - base).collect();
    let mut normal = orthogonal_complement(&diffs, tol)?;
    let mut offset = normal.dot(base);
    if normal.dot(interior) > offset {
        normal = -normal;
        offset = -offset;
    }
    if offset - normal.dot(interior) <= tol {
        return None;
    }
    Some(Hyperplane { normal, offset })
}

/// Greedy choice of d+1 affinely independent points, each maximising its
/// distance to the affine hull of those already chosen.
fn initial_simplex(points: &[Vector], d: usize, eps: f64) -> Result<Vec<usize>> {
    let first = (0..points.len())
        .min_by(|&a, &b| lex_cmp(&points[a], &points[b]))
        .expect("non-empty point set");
    let mut chosen = vec![first];
    let mut basis: Vec<Vector> = Vec::new();
    while chosen.len() < d + 1 {
        let origin = &points[first];
        let mut best = None;
        let mut best_dist = eps;
        for (i, p) in points.iter().enumerate() {
            let mut v = p - origin;
            for b in &basis {
                let c = v.dot(b);
                v -= b * c;
            }
            let dist = v.norm();
            if dist > best_dist {
                best_dist = dist;
                best = Some((i, v / dist));
            }
        }
        let (i, dir) = best.ok_or(Error::Degenerate { dim: d })?;
        chosen.push(i);
        basis.push(dir);
    }
    Ok(chosen)
}

pub(crate) fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Convex hull of `points` in dimension `d`.
pub fn convex_hull(points: &[Vector], d: usize, tol: &Tolerance) -> Result<Polytope> {
    check_dim(d)?;
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
    }
    if points.len() < d + 1 {
        return Err(Error::Degenerate { dim: d });
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1.0);
    let eps = tol.scaled(scale);

    let simplex = initial_simplex(points, d, eps)?;
    let interior = simplex
        .iter()
        .fold(Vector::zeros(d), |acc, &i| acc + &points[i])
        / (d + 1) as f64;

    let mut facets: Vec<Simplex> = Vec::new();
    for skip in 0..=d {
        let mut verts: Vec<usize> = simplex
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &i)| i)
            .collect();
        verts.sort_unstable();
        let plane = plane_through(points, &verts, &interior, eps).ok_or(Error::Degenerate { dim: d })?;
        facets.push(Simplex {
            verts,
            plane,
            alive: true,
        });
    }

    for (pi, p) in points.iter().enumerate() {
        if simplex.contains(&pi) {
            continue;
        }
        let visible: Vec<usize> = facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && f.plane.signed_distance(p) > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        // Ridges seen once among the visible facets form the horizon.
        let mut ridge_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for &fi in &visible {
            let verts = &facets[fi].verts;
            for skip in 0..verts.len() {
                let ridge: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                *ridge_count.entry(ridge).or_insert(0) += 1;
            }
        }
        let mut new_facets = Vec::new();
        let mut ok = true;
        let mut horizon: Vec<Vec<usize>> = ridge_count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(r, _)| r)
            .collect();
        horizon.sort();
        for ridge in horizon {
            let mut verts = ridge;
            verts.push(pi);
            verts.sort_unstable();
            match plane_through(points, &verts, &interior, eps) {
                Some(plane) => new_facets.push(Simplex {
                    verts,
                    plane,
                    alive: true,
                }),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            // The point sits within tolerance of the current boundary.
            continue;
        }
        for fi in visible {
            facets[fi].alive = false;
        }
        facets.extend(new_facets);
    }

    let alive: Vec<&Simplex> = facets.iter().filter(|f| f.alive).collect();
    let mut candidates: Vec<usize> = alive.iter().flat_map(|f| f.verts.iter().copied()).collect();
    candidates.sort_unstable();
    candidates.dedup();

    // Merge coplanar simplicial pieces.
    let mut planes: Vec<Hyperplane> = Vec::new();
    for f in &alive {
        // For unit normals the chord length approximates the angle and stays
        // accurate near zero, unlike acos.
        let duplicate = planes.iter().any(|q| {
            (&q.normal - &f.plane.normal).norm() < FACET_MERGE_ANGLE
                && (q.offset - f.plane.offset).abs() <= eps
        });
        if !duplicate {
            planes.push(f.plane.clone());
        }
    }

    let on_plane = |plane: &Hyperplane, i: usize| plane.signed_distance(&points[i]).abs() <= eps;
    let incidences: Vec<Vec<usize>> = candidates
        .iter()
        .map(|&i| (0..planes.len()).filter(|&fi| on_plane(&planes[fi], i)).collect())
        .collect();
    let mut extreme: Vec<usize> = candidates
        .iter()
        .zip(&incidences)
        .filter(|(_, inc)| {
            let normals: Vec<&Vector> = inc.iter().map(|&fi| &planes[fi].normal).collect();
            rank(&normals, 1e-9) == d
        })
        .map(|(&i, _)| i)
        .collect();
    extreme.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));

    let vertices: Vec<Vector> = extreme.iter().map(|&i| points[i].clone()).collect();
    let facet_list: Vec<Facet> = planes
        .into_iter()
        .map(|plane| {
            let ids: Vec<usize> = (0..vertices.len())
                .filter(|&v| plane.signed_distance(&vertices[v]).abs() <= eps)
                .collect();
            Facet { plane, vertex_ids: ids }
        })
        .filter(|f| f.vertex_ids.len() >= d)
        .collect();
    // Pieces whose normals drifted past the merge angle still share their
    // vertex set; keep one plane per set.
    let mut facet_list: Vec<Facet> = facet_list;
    let mut seen = std::collections::HashSet::new();
    facet_list.retain(|f| seen.insert(f.vertex_ids.clone()));

    Polytope::from_parts(d, vertices, facet_list)
}
