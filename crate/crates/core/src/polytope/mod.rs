//! Full-dimensional convex polytopes: vertex/facet/edge representation,
//! facet planes, visibility from an exterior point, and seeded generation.

mod hull;
mod scene;

pub use hull::{convex_hull, FACET_MERGE_ANGLE};
pub use scene::{Ball, BallSpec, PolytopeSpec, Scene, SceneFile, INTERIOR_MARGIN};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{check_dim, nnls, random_unit, rank, OrthoMap, Tolerance, Vector};

/// The affine hyperplane `{x : n·x = c}` with unit normal `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vector,
    pub offset: f64,
}

impl Hyperplane {
    pub fn signed_distance(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Outward plane: `n·x ≤ c` on the polytope.
    pub plane: Hyperplane,
    /// Vertices lying on the facet, ascending.
    pub vertex_ids: Vec<usize>,
}

/// A full-dimensional convex polytope. Vertices are extreme points stored in
/// lexicographic order; facets carry outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vector>,
    facets: Vec<Facet>,
    edges: Vec<(usize, usize)>,
    vertex_facets: Vec<Vec<usize>>,
}

impl Polytope {
    pub(crate) fn from_parts(dim: usize, vertices: Vec<Vector>, facets: Vec<Facet>) -> Result<Self> {
        if vertices.len() < dim + 1 || facets.len() < dim + 1 {
            return Err(Error::Degenerate { dim });
        }
        let mut vertex_facets = vec![Vec::new(); vertices.len()];
        for (fi, f) in facets.iter().enumerate() {
            for &v in &f.vertex_ids {
                vertex_facets[v].push(fi);
            }
        }
        let mut edges = Vec::new();
        for i in 0..vertices.len() {
            for j in (i + 1)..vertices.len() {
                let shared: Vec<&Vector> = vertex_facets[i]
                    .iter()
                    .filter(|fi| vertex_facets[j].contains(fi))
                    .map(|&fi| &facets[fi].plane.normal)
                    .collect();
                if shared.len() + 1 >= dim && rank(&shared, 1e-9) == dim - 1 {
                    edges.push((i, j));
                }
            }
        }
        Ok(Polytope {
            dim,
            vertices,
            facets,
            edges,
            vertex_facets,
        })
    }

    /// Hull of the given points (convenience wrapper around [`convex_hull`]).
    pub fn from_points(points: &[Vector], tol: &Tolerance) -> Result<Self> {
        let d = points.first().map(|p| p.len()).ok_or(Error::Degenerate { dim: 0 })?;
        convex_hull(points, d, tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Facets incident to vertex `v`.
    pub fn vertex_facets(&self, v: usize) -> &[usize] {
        &self.vertex_facets[v]
    }

    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn centroid(&self) -> Vector {
        self.vertices.iter().fold(Vector::zeros(self.dim), |acc, v| acc + v) / self.vertices.len() as f64
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Whether `x` satisfies every facet inequality (within `eps`).
    pub fn contains(&self, x: &Vector, eps: f64) -> bool {
        self.facets.iter().all(|f| f.plane.signed_distance(x) <= eps)
    }

    pub fn translated(&self, t: &Vector, tol: &Tolerance) -> Result<Polytope> {
        let pts: Vec<Vector> = self.vertices.iter().map(|v| v + t).collect();
        convex_hull(&pts, self.dim, tol)
    }

    pub fn transformed(&self, map: &OrthoMap, tol: &Tolerance) -> Result<Polytope> {
        let pts: Vec<Vector> = self.vertices.iter().map(|v| map.apply(v)).collect();
        convex_hull(&pts, self.dim, tol)
    }

    /// Whether both polytopes have the same vertex set (index-aligned after
    /// canonical ordering) to within `eps`.
    pub fn same_vertices(&self, other: &Polytope, eps: f64) -> bool {
        self.vertices.len() == other.vertices.len()
            && self
                .vertices
                .iter()
                .zip(&other.vertices)
                .all(|(a, b)| (a - b).amax() <= eps)
    }

    /// Checks the representation invariants.
    pub fn validate(&self, tol: &Tolerance) -> Result<()> {
        let d = self.dim;
        let eps = tol.scaled(self.max_norm().max(1.0));
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        // Full-dimensional.
        let base = &self.vertices[0];
        let diffs: Vec<Vector> = self.vertices[1..].iter().map(|v| v - base).collect();
        let refs: Vec<&Vector> = diffs.iter().collect();
        if rank(&refs, eps) != d {
            return fail("polytope is not full-dimensional".into());
        }
        for (fi, f) in self.facets.iter().enumerate() {
            if (f.plane.normal.norm() - 1.0).abs() > eps {
                return fail(format!("facet {fi} normal is not unit"));
            }
            for (vi, v) in self.vertices.iter().enumerate() {
                let s = f.plane.signed_distance(v);
                if s > eps {
                    return fail(format!("vertex {vi} violates facet {fi}"));
                }
                let listed = f.vertex_ids.contains(&vi);
                if listed != (s.abs() <= eps) {
                    return fail(format!("facet {fi} incidence wrong at vertex {vi}"));
                }
            }
        }
        // Extremeness: v is not a convex combination of the others.
        let n = self.vertices.len();
        for i in 0..n {
            let a = DMatrix::from_fn(d + 1, n - 1, |row, col| {
                let j = if col < i { col } else { col + 1 };
                if row < d {
                    self.vertices[j][row]
                } else {
                    1.0
                }
            });
            let mut b = Vector::from_element(d + 1, 1.0);
            b.rows_mut(0, d).copy_from(&self.vertices[i]);
            if nnls(&a, &b).1 <= eps {
                return fail(format!("vertex {i} is not extreme"));
            }
        }
        for w in self.vertices.windows(2) {
            if hull::lex_cmp(&w[0], &w[1]) != std::cmp::Ordering::Less {
                return fail("vertices are not in lexicographic order".into());
            }
        }
        for &(a, b) in &self.edges {
            let shared = self.vertex_facets[a]
                .iter()
                .filter(|f| self.vertex_facets[b].contains(f))
                .count();
            if shared + 1 < d {
                return fail(format!("edge ({a},{b}) is not supported by facet incidence"));
            }
        }
        Ok(())
    }
}

/// One hyperplane per facet, outward normal.
pub fn facet_planes(p: &Polytope) -> Vec<Hyperplane> {
    p.facets.iter().map(|f| f.plane.clone()).collect()
}

/// Facets whose outer side strictly contains `z`.
pub fn visible_facets(z: &Vector, p: &Polytope, tol: &Tolerance) -> Result<Vec<usize>> {
    if z.len() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            found: z.len(),
        });
    }
    let eps = tol.eps_abs;
    let mut visible = Vec::new();
    for (fi, f) in p.facets.iter().enumerate() {
        let s = f.plane.signed_distance(z);
        if s.abs() <= eps {
            return Err(Error::OnBoundaryPlane {
                facet: fi,
                distance: s,
            });
        }
        if s > 0.0 {
            visible.push(fi);
        }
    }
    if visible.is_empty() {
        return Err(Error::Inside);
    }
    Ok(visible)
}

/// Hull of `n_points` seeded-uniform points in the ball of radius
/// `radius_cap`. Degenerate draws are discarded and redrawn.
pub fn random_polytope(seed: u64, d: usize, n_points: usize, radius_cap: f64, tol: &Tolerance) -> Result<Polytope> {
    check_dim(d)?;
    if n_points < d + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} points in dimension {d}",
            d + 1
        )));
    }
    if radius_cap.is_nan() || radius_cap <= 0.0 {
        return Err(Error::InvalidInput("radius_cap must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let pts: Vec<Vector> = (0..n_points)
            .map(|_| {
                let u: f64 = rng.random();
                random_unit(&mut rng, d) * (radius_cap * u.powf(1.0 / d as f64))
            })
            .collect();
        match convex_hull(&pts, d, tol) {
            Ok(p) => return Ok(p),
            Err(Error::Degenerate { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::vector;

    pub(crate) fn cube(h: f64) -> Polytope {
        let mut pts = Vec::new();
        for &x in &[-h, h] {
            for &y in &[-h, h] {
                for &z in &[-h, h] {
                    pts.push(vector(&[x, y, z]));
                }
            }
        }
        Polytope::from_points(&pts, &Tolerance::default()).unwrap()
    }

    fn facet_with_normal(p: &Polytope, n: &[f64]) -> usize {
        let n = vector(n);
        p.facets()
            .iter()
            .position(|f| (&f.plane.normal - &n).norm() < 1e-12)
            .unwrap()
    }

    #[test]
    fn tetrahedron_combinatorics() {
        let pts = vec![
            vector(&[0.3, 0., 0.]),
            vector(&[0., 0.3, 0.]),
            vector(&[0., 0., 0.3]),
            vector(&[-0.1, -0.1, -0.1]),
        ];
        let p = Polytope::from_points(&pts, &Tolerance::default()).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p.facets().len(), 4);
        assert_eq!(p.edges().len(), 6);
        p.validate(&Tolerance::default()).unwrap();
        // Each plane contains exactly its three facet vertices; the fourth
        // lies strictly inside.
        for (f, plane) in p.facets().iter().zip(facet_planes(&p)) {
            assert_eq!(f.vertex_ids.len(), 3);
            for (vi, v) in p.vertices().iter().enumerate() {
                let s = plane.signed_distance(v);
                if f.vertex_ids.contains(&vi) {
                    assert!(s.abs() < 1e-12);
                } else {
                    assert!(s < -1e-9);
                }
            }
        }
    }

    #[test]
    fn cube_with_interior_point() {
        let mut pts: Vec<Vector> = cube(0.25).vertices().to_vec();
        pts.push(vector(&[0., 0., 0.]));
        let p = Polytope::from_points(&pts, &Tolerance::default()).unwrap();
        assert_eq!(p.vertices().len(), 8);
        assert_eq!(p.facets().len(), 6);
        assert_eq!(p.edges().len(), 12);
        assert!(p.vertices().iter().all(|v| v.norm() > 0.4));
    }

    #[test]
    fn octahedron_combinatorics() {
        let mut pts = Vec::new();
        for i in 0..3 {
            for s in [-0.3, 0.3] {
                let mut v = Vector::zeros(3);
                v[i] = s;
                pts.push(v);
            }
        }
        let p = Polytope::from_points(&pts, &Tolerance::default()).unwrap();
        assert_eq!(p.vertices().len(), 6);
        assert_eq!(p.facets().len(), 8);
        assert_eq!(p.edges().len(), 12);
    }

    #[test]
    fn cube_planes() {
        let c = cube(0.25);
        let planes = facet_planes(&c);
        assert_eq!(planes.len(), 6);
        for pl in &planes {
            assert!((pl.offset - 0.25).abs() < 1e-15);
            assert_eq!(pl.normal.iter().filter(|x| x.abs() > 0.5).count(), 1);
            assert!((pl.normal.amax() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cube_visibility() {
        let c = cube(0.25);
        let tol = Tolerance::default();
        let top = facet_with_normal(&c, &[0., 0., 1.]);
        let right = facet_with_normal(&c, &[1., 0., 0.]);
        assert_eq!(visible_facets(&vector(&[0., 0., 1.]), &c, &tol).unwrap(), vec![top]);
        let mut two = vec![top, right];
        two.sort();
        assert_eq!(visible_facets(&vector(&[0.8, 0., 0.6]), &c, &tol).unwrap(), two);
        assert_eq!(visible_facets(&vector(&[0.1, 0., 0.]), &c, &tol), Err(Error::Inside));
        assert!(matches!(
            visible_facets(&vector(&[0.25, 0., 0.9]), &c, &tol),
            Err(Error::OnBoundaryPlane { .. })
        ));
    }

    #[test]
    fn visibility_flips_under_antipode() {
        let c = cube(0.25);
        let tol = Tolerance::default();
        let z = vector(&[0.6, -0.48, 0.64]);
        let antipodal = |fi: usize| facet_with_normal(&c, (-&c.facets()[fi].plane.normal).as_slice());
        let mut flipped: Vec<usize> = visible_facets(&z, &c, &tol).unwrap().into_iter().map(antipodal).collect();
        flipped.sort();
        assert_eq!(visible_facets(&(-z), &c, &tol).unwrap(), flipped);
    }

    #[test]
    fn random_polytopes_are_valid_and_deterministic() {
        let tol = Tolerance::default();
        for seed in 0..100 {
            let d = 3 + (seed as usize % 2);
            let p = random_polytope(seed, d, 12, 0.7, &tol).unwrap();
            p.validate(&tol).unwrap();
            assert!(p.vertices().iter().all(|v| v.norm() <= 0.7));
            let q = random_polytope(seed, d, 12, 0.7, &tol).unwrap();
            assert_eq!(p.vertices(), q.vertices());
        }
    }

    #[test]
    fn euler_relation_in_three_dimensions() {
        let tol = Tolerance::default();
        for seed in 0..50 {
            let p = random_polytope(seed, 3, 5 + seed as usize % 20, 0.8, &tol).unwrap();
            let (v, e, f) = (p.vertices().len() as i64, p.edges().len() as i64, p.facets().len() as i64);
            assert_eq!(v - e + f, 2, "seed {seed}");
        }
    }

    #[test]
    fn hull_is_idempotent() {
        let tol = Tolerance::default();
        for seed in 0..30 {
            let p = random_polytope(seed, 3 + seed as usize % 3, 15, 0.8, &tol).unwrap();
            let again = convex_hull(p.vertices(), p.dim(), &tol).unwrap();
            assert_eq!(p.vertices(), again.vertices());
        }
    }

    #[test]
    fn higher_dimensional_cube() {
        let d = 5;
        let pts: Vec<Vector> = (0..(1 << d))
            .map(|m: usize| Vector::from_fn(d, |i, _| if m >> i & 1 == 1 { 0.2 } else { -0.2 }))
            .collect();
        let p = convex_hull(&pts, d, &Tolerance::default()).unwrap();
        assert_eq!(p.vertices().len(), 32);
        assert_eq!(p.facets().len(), 10);
        assert_eq!(p.edges().len(), 80);
    }
}
