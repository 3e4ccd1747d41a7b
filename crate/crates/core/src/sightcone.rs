//! Support (sight) cones of polytopes from an exterior light source.
//!
//! The spanning directions are found from facet visibility: a vertex lies on
//! the shadow boundary when it touches both a visible and an invisible facet.
//! A non-negative least-squares extremeness test then drops flat silhouette
//! vertices whose directions lie inside a 2-face of the cone.

use crate::error::{Error, Result};
use crate::geom::{in_conic_hull, orthogonal_complement, rank, Tolerance, Vector};
use crate::polytope::{visible_facets, Polytope};

/// Polyhedral cone with apex `z` spanned by unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCone {
    apex: Vector,
    directions: Vec<Vector>,
    boundary_vertex_ids: Vec<usize>,
    faces2: Vec<(usize, usize)>,
}

impl SupportCone {
    /// Builds a cone from explicit spanning directions and 2-face adjacency.
    /// Directions are normalised; `faces2` is taken as given.
    pub fn from_directions(apex: Vector, directions: Vec<Vector>, faces2: Vec<(usize, usize)>) -> Result<Self> {
        let d = apex.len();
        let mut units = Vec::with_capacity(directions.len());
        for u in directions {
            if u.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: u.len(),
                });
            }
            let n = u.norm();
            if n < 1e-12 {
                return Err(Error::DegenerateDirection { norm: n });
            }
            units.push(u / n);
        }
        let k = units.len();
        if faces2.iter().any(|&(a, b)| a >= k || b >= k || a == b) {
            return Err(Error::InvalidInput("face index out of range".into()));
        }
        Ok(SupportCone {
            apex,
            boundary_vertex_ids: (0..k).collect(),
            directions: units,
            faces2: normalize_pairs(faces2),
        })
    }

    pub fn apex(&self) -> &Vector {
        &self.apex
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }

    /// Polytope vertex ids aligned with `directions`.
    pub fn boundary_vertex_ids(&self) -> &[usize] {
        &self.boundary_vertex_ids
    }

    /// Direction-index pairs spanning 2-faces, each stored as `(min, max)`,
    /// sorted.
    pub fn faces2(&self) -> &[(usize, usize)] {
        &self.faces2
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    pub fn has_face2(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.faces2.binary_search(&key).is_ok()
    }
}

fn normalize_pairs(pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = pairs
        .into_iter()
        .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn unit_direction(z: &Vector, v: &Vector) -> Vector {
    (v - z).normalize()
}

fn visibility(z: &Vector, p: &Polytope, tol: &Tolerance) -> Result<Vec<bool>> {
    let visible = visible_facets(z, p, tol).map_err(|e| match e {
        Error::OnBoundaryPlane { facet, .. } => Error::RegionBoundary { facet },
        other => other,
    })?;
    let mut flags = vec![false; p.facets().len()];
    for f in visible {
        flags[f] = true;
    }
    Ok(flags)
}

/// Keeps the ids whose directions are not in the conical hull of the other
/// directions of the set.
fn extreme_subset(z: &Vector, p: &Polytope, ids: &[usize], tol: &Tolerance) -> Vec<usize> {
    let dirs: Vec<Vector> = ids.iter().map(|&v| unit_direction(z, &p.vertices()[v])).collect();
    ids.iter()
        .enumerate()
        .filter(|&(i, _)| {
            let others: Vec<&Vector> = dirs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, u)| u)
                .collect();
            !in_conic_hull(&dirs[i], &others, tol.eps_abs)
        })
        .map(|(_, &v)| v)
        .collect()
}

/// Shadow-boundary vertex ids (ascending) whose directions are extreme rays
/// of the support cone.
pub fn shadow_boundary(z: &Vector, p: &Polytope, tol: &Tolerance) -> Result<Vec<usize>> {
    let flags = visibility(z, p, tol)?;
    let candidates: Vec<usize> = (0..p.vertices().len())
        .filter(|&v| {
            let inc = p.vertex_facets(v);
            inc.iter().any(|&f| flags[f]) && inc.iter().any(|&f| !flags[f])
        })
        .collect();
    Ok(extreme_subset(z, p, &candidates, tol))
}

/// Extreme rays computed without visibility: every vertex direction is
/// tested against the conical hull of all the others. Independent check on
/// [`shadow_boundary`].
pub fn extreme_directions_lp(z: &Vector, p: &Polytope, tol: &Tolerance) -> Result<Vec<usize>> {
    visibility(z, p, tol)?;
    let all: Vec<usize> = (0..p.vertices().len()).collect();
    Ok(extreme_subset(z, p, &all, tol))
}

/// Support cone `C(z, P)`.
pub fn support_cone(z: &Vector, p: &Polytope, tol: &Tolerance) -> Result<SupportCone> {
    let ids = shadow_boundary(z, p, tol)?;
    let dirs: Vec<Vector> = ids.iter().map(|&v| unit_direction(z, &p.vertices()[v])).collect();
    let d = p.dim();
    let (order, faces2) = match d {
        2 => ((0..ids.len()).collect::<Vec<_>>(), vec![(0, 1)]),
        3 => {
            let order = silhouette_cycle(&dirs);
            let k = order.len();
            let faces = (0..k).map(|i| (i, (i + 1) % k)).collect();
            (order, faces)
        }
        _ => {
            let order: Vec<usize> = (0..ids.len()).collect();
            let faces = cone_faces2(&dirs, tol.eps_abs);
            (order, faces)
        }
    };
    Ok(SupportCone {
        apex: z.clone(),
        directions: order.iter().map(|&i| dirs[i].clone()).collect(),
        boundary_vertex_ids: order.iter().map(|&i| ids[i]).collect(),
        faces2: normalize_pairs(faces2),
    })
}

/// Counterclockwise order of the silhouette as seen from the apex, looking
/// along the mean direction, starting at index 0.
fn silhouette_cycle(dirs: &[Vector]) -> Vec<usize> {
    let w = dirs.iter().fold(Vector::zeros(3), |acc, u| acc + u).normalize();
    let start = &dirs[0];
    let e1 = (start - &w * start.dot(&w)).normalize();
    let e2 = e1.cross(&w);
    let mut keyed: Vec<(f64, usize)> = dirs
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let a = u.dot(&e2).atan2(u.dot(&e1));
            let a = if i == 0 {
                0.0
            } else if a < 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            };
            (a, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Pairs of extreme rays spanning a 2-face of a pointed cone in d ≥ 4: the
/// facets containing both have normals of rank d − 2.
fn cone_faces2(dirs: &[Vector], eps: f64) -> Vec<(usize, usize)> {
    let k = dirs.len();
    let d = dirs[0].len();
    let mut facets: Vec<(Vector, Vec<usize>)> = Vec::new();
    let mut subset: Vec<usize> = (0..d - 1).collect();
    if k >= d - 1 {
        loop {
            let rows: Vec<Vector> = subset.iter().map(|&i| dirs[i].clone()).collect();
            if let Some(n) = orthogonal_complement(&rows, 1e-12) {
                let s: Vec<f64> = dirs.iter().map(|u| n.dot(u)).collect();
                let normal = if s.iter().all(|&x| x <= eps) {
                    Some(n)
                } else if s.iter().all(|&x| x >= -eps) {
                    Some(-n)
                } else {
                    None
                };
                if let Some(normal) = normal {
                    let on: Vec<usize> = (0..k).filter(|&j| s[j].abs() <= eps).collect();
                    if !facets.iter().any(|(_, ids)| *ids == on) {
                        facets.push((normal, on));
                    }
                }
            }
            if !next_combination(&mut subset, k) {
                break;
            }
        }
    }
    let mut faces = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let normals: Vec<&Vector> = facets
                .iter()
                .filter(|(_, ids)| ids.contains(&a) && ids.contains(&b))
                .map(|(n, _)| n)
                .collect();
            if normals.len() + 2 >= d && rank(&normals, 1e-9) == d - 2 {
                faces.push((a, b));
            }
        }
    }
    faces
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
