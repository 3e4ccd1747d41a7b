//! Spherical projections: second intersections of sight rays with the
//! enclosing sphere, boundary arcs with their circles, the angle a segment
//! subtends at a light source, and projections of balls.

use crate::error::{Error, Result};
use crate::geom::{ray_second_intersection, OrthoMap, Tolerance, Vector};
use crate::polytope::{Ball, Polytope};
use crate::sightcone::{support_cone, SupportCone};

/// A boundary arc between projection vertices `i` and `j`, lying on the
/// circle cut from the sphere by the plane through the light source and the
/// two polytope vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub i: usize,
    pub j: usize,
    pub circle_center: Vector,
    pub circle_radius: f64,
}

/// Projection region on the sphere, represented by its boundary graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalPolytope {
    r: f64,
    vertices: Vec<Vector>,
    arcs: Vec<Arc>,
    source_apex: Vector,
}

impl SphericalPolytope {
    pub fn from_parts(r: f64, vertices: Vec<Vector>, arcs: Vec<Arc>, source_apex: Vector) -> Result<Self> {
        let k = vertices.len();
        if arcs.iter().any(|a| a.i >= k || a.j >= k || a.i == a.j) {
            return Err(Error::InvalidInput("arc endpoint out of range".into()));
        }
        Ok(SphericalPolytope {
            r,
            vertices,
            arcs,
            source_apex,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn source_apex(&self) -> &Vector {
        &self.source_apex
    }

    /// The arc joining `a` and `b`, in either orientation.
    pub fn arc_between(&self, a: usize, b: usize) -> Option<&Arc> {
        self.arcs
            .iter()
            .find(|arc| (arc.i == a && arc.j == b) || (arc.i == b && arc.j == a))
    }

    /// Image under an origin-centred orthogonal map.
    pub fn transformed(&self, map: &OrthoMap) -> SphericalPolytope {
        SphericalPolytope {
            r: self.r,
            vertices: self.vertices.iter().map(|v| map.apply(v)).collect(),
            arcs: self
                .arcs
                .iter()
                .map(|a| Arc {
                    i: a.i,
                    j: a.j,
                    circle_center: map.apply(&a.circle_center),
                    circle_radius: a.circle_radius,
                })
                .collect(),
            source_apex: map.apply(&self.source_apex),
        }
    }

    /// Checks that vertices lie on the sphere and arcs on their circles.
    pub fn validate(&self, eps: f64) -> Result<()> {
        for v in &self.vertices {
            if (v.norm() - self.r).abs() > eps {
                return Err(Error::InvalidInput("projection vertex off the sphere".into()));
            }
        }
        for a in &self.arcs {
            if !(a.circle_radius > 0.0 && a.circle_radius <= self.r + eps) {
                return Err(Error::InvalidInput("arc circle radius out of range".into()));
            }
            for &v in &[a.i, a.j] {
                if ((&self.vertices[v] - &a.circle_center).norm() - a.circle_radius).abs() > eps {
                    return Err(Error::InvalidInput("arc endpoint off its circle".into()));
                }
            }
        }
        Ok(())
    }
}

fn check_on_sphere(z: &Vector, r: f64, tol: &Tolerance) -> Result<()> {
    if (z.norm() - r).abs() > tol.scaled(r) * 10.0 {
        return Err(Error::InvalidInput(format!(
            "light source is not on the sphere of radius {r} (|z| = {})",
            z.norm()
        )));
    }
    Ok(())
}

/// Spherical projection `P_z` of a polytope from a point on the sphere.
pub fn spherical_projection(z: &Vector, p: &Polytope, r: f64, tol: &Tolerance) -> Result<SphericalPolytope> {
    check_on_sphere(z, r, tol)?;
    let cone = support_cone(z, p, tol)?;
    projection_of_cone(&cone, p, r, tol)
}

/// Spherical projection built from an already computed support cone of `p`;
/// vertex `i` is the image of cone direction `i`.
pub fn projection_of_cone(cone: &SupportCone, p: &Polytope, r: f64, tol: &Tolerance) -> Result<SphericalPolytope> {
    let z = cone.apex();
    let vertices = cone
        .directions()
        .iter()
        .map(|u| ray_second_intersection(z, u, r, tol))
        .collect::<Result<Vec<_>>>()?;
    let ids = cone.boundary_vertex_ids();
    let mut arcs = Vec::with_capacity(cone.faces2().len());
    for &(i, j) in cone.faces2() {
        let (center, radius) = arc_circle(z, &p.vertices()[ids[i]], &p.vertices()[ids[j]], r, tol)?;
        arcs.push(Arc {
            i,
            j,
            circle_center: center,
            circle_radius: radius,
        });
    }
    Ok(SphericalPolytope {
        r,
        vertices,
        arcs,
        source_apex: z.clone(),
    })
}

/// Circle cut from the sphere of radius `r` by the 2-plane through `z`, `x`,
/// `y`: its centre (foot of the perpendicular from the origin) and radius.
pub fn arc_circle(z: &Vector, x: &Vector, y: &Vector, r: f64, tol: &Tolerance) -> Result<(Vector, f64)> {
    let a = x - z;
    let b = y - z;
    let scale = a.norm().max(b.norm());
    if a.norm() <= tol.eps_abs || b.norm() <= tol.eps_abs {
        return Err(Error::Collinear);
    }
    let e1 = a.normalize();
    let b_perp = &b - &e1 * b.dot(&e1);
    if b_perp.norm() <= tol.scaled(scale) {
        return Err(Error::Collinear);
    }
    let e2 = b_perp.normalize();
    let foot = z - &e1 * z.dot(&e1) - &e2 * z.dot(&e2);
    let radius = (r * r - foot.norm_squared()).max(0.0).sqrt();
    Ok((foot, radius))
}

/// The angle `∠xzy` in `[0, π)`, via the cosine formula. Zero when `z` is on
/// the line through `x` and `y` outside the segment.
pub fn angle(z: &Vector, x: &Vector, y: &Vector, tol: &Tolerance) -> Result<f64> {
    let a = x - z;
    let b = y - z;
    let (na, nb) = (a.norm(), b.norm());
    if na <= tol.eps_abs || nb <= tol.eps_abs {
        return Err(Error::DegenerateVertex);
    }
    let cos = a.dot(&b) / (na * nb);
    if cos < -1.0 + 1e-14 {
        return Err(Error::InteriorPoint);
    }
    let cos = if cos > 1.0 - 1e-14 { 1.0 } else { cos };
    Ok(cos.acos())
}

/// A spherical cap: points of the sphere within `angular_radius` (central
/// angle) of `center_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCap {
    pub center_dir: Vector,
    pub angular_radius: f64,
}

impl SphericalCap {
    pub fn contains(&self, p: &Vector) -> bool {
        let c = (p.dot(&self.center_dir) / p.norm()).clamp(-1.0, 1.0);
        c.acos() <= self.angular_radius
    }
}

/// Exact description of the projection of a ball from `z`: the sphere points
/// whose sight ray makes an angle at most `half_angle` with `axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallShadow {
    pub apex: Vector,
    pub axis: Vector,
    pub half_angle: f64,
    pub r: f64,
}

impl BallShadow {
    pub fn contains(&self, p: &Vector) -> bool {
        let u = p - &self.apex;
        let n = u.norm();
        if n == 0.0 {
            return false;
        }
        (u.dot(&self.axis) / n).clamp(-1.0, 1.0).acos() <= self.half_angle
    }

    /// Second intersection of the cone axis with the sphere.
    pub fn axis_hit(&self, tol: &Tolerance) -> Result<Vector> {
        ray_second_intersection(&self.apex, &self.axis, self.r, tol)
    }
}

/// Sight cone of a ball from `z` as a [`BallShadow`].
pub fn ball_shadow(z: &Vector, ball: &Ball, r: f64, tol: &Tolerance) -> Result<BallShadow> {
    check_on_sphere(z, r, tol)?;
    if !ball.is_interior(r) {
        return Err(Error::InvalidScene("ball is not strictly inside the sphere".into()));
    }
    let to_center = &ball.center - z;
    let dist = to_center.norm();
    if dist <= ball.radius {
        return Err(Error::Inside);
    }
    Ok(BallShadow {
        apex: z.clone(),
        axis: to_center / dist,
        half_angle: (ball.radius / dist).asin(),
        r,
    })
}

/// Projection of a ball as a spherical cap. The projection is a cap exactly
/// when the ball centre lies on the diameter through `z`; otherwise the
/// boundary is not a circle and [`Error::NotACap`] is returned.
pub fn ball_cap(z: &Vector, ball: &Ball, r: f64, tol: &Tolerance) -> Result<SphericalCap> {
    let shadow = ball_shadow(z, ball, r, tol)?;
    let zhat = z / r;
    let offset = &ball.center - &zhat * ball.center.dot(&zhat);
    if offset.norm() > tol.scaled(r) * 10.0 {
        return Err(Error::NotACap);
    }
    let hit = shadow.axis_hit(tol)?;
    let center_dir = hit / r;
    // Any boundary ray: tilt the axis by the half-angle inside a plane that
    // contains it.
    let d = z.len();
    let mut helper = Vector::zeros(d);
    let k = (0..d)
        .min_by(|&a, &b| shadow.axis[a].abs().total_cmp(&shadow.axis[b].abs()))
        .unwrap_or(0);
    helper[k] = 1.0;
    let perp = (&helper - &shadow.axis * helper.dot(&shadow.axis)).normalize();
    let edge = &shadow.axis * shadow.half_angle.cos() + perp * shadow.half_angle.sin();
    let boundary = ray_second_intersection(z, &edge, r, tol)?;
    let angular_radius = (boundary.dot(&center_dir) / r).clamp(-1.0, 1.0).acos();
    Ok(SphericalCap {
        center_dir,
        angular_radius,
    })
}
