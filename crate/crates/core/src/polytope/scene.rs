use serde::{Deserialize, Serialize};

use super::{convex_hull, Polytope};
use crate::error::{Error, Result};
use crate::geom::{check_dim, Tolerance, Vector};

/// Bodies must satisfy `max |x| ≤ r·(1 − INTERIOR_MARGIN)`.
pub const INTERIOR_MARGIN: f64 = 1e-6;

/// A Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 || center.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("ball needs a finite center and positive radius".into()));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Whether the ball lies strictly inside the sphere of radius `r`.
    pub fn is_interior(&self, r: f64) -> bool {
        self.center.norm() + self.radius <= r * (1.0 - INTERIOR_MARGIN)
    }
}

/// Enclosing sphere radius plus the bodies strictly inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub r: f64,
    pub polytopes: Vec<Polytope>,
    pub balls: Vec<Ball>,
}

impl Scene {
    pub fn new(r: f64, polytopes: Vec<Polytope>, balls: Vec<Ball>) -> Result<Self> {
        if !r.is_finite() || r <= 0.0 {
            return Err(Error::InvalidScene("sphere radius must be positive".into()));
        }
        let dims: Vec<usize> = polytopes
            .iter()
            .map(|p| p.dim())
            .chain(balls.iter().map(|b| b.dim()))
            .collect();
        if let Some(&d) = dims.first() {
            check_dim(d)?;
            if let Some(&other) = dims.iter().find(|&&x| x != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: other,
                });
            }
        }
        let bound = r * (1.0 - INTERIOR_MARGIN);
        for (i, p) in polytopes.iter().enumerate() {
            if p.max_norm() > bound {
                return Err(Error::InvalidScene(format!(
                    "polytope {i} reaches radius {} beyond the interior bound {bound}",
                    p.max_norm()
                )));
            }
        }
        for (i, b) in balls.iter().enumerate() {
            if !b.is_interior(r) {
                return Err(Error::InvalidScene(format!("ball {i} is not strictly inside the sphere")));
            }
        }
        Ok(Scene { r, polytopes, balls })
    }

    pub fn dim(&self) -> Option<usize> {
        self.polytopes
            .first()
            .map(|p| p.dim())
            .or_else(|| self.balls.first().map(|b| b.dim()))
    }

    /// Parses the scene JSON format; hulls are recomputed from the listed
    /// vertices.
    pub fn from_json(text: &str, tol: &Tolerance) -> Result<Self> {
        let file: SceneFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidScene(format!("malformed scene JSON: {e}")))?;
        file.into_scene(tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneFile::from(self)).expect("scene serialises")
    }
}

/// On-disk scene layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub r: f64,
    #[serde(default)]
    pub polytopes: Vec<PolytopeSpec>,
    #[serde(default)]
    pub balls: Vec<BallSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeSpec {
    pub vertices: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl SceneFile {
    pub fn into_scene(self, tol: &Tolerance) -> Result<Scene> {
        let mut polytopes = Vec::new();
        for (i, spec) in self.polytopes.into_iter().enumerate() {
            let d = spec
                .vertices
                .first()
                .map(|v| v.len())
                .ok_or_else(|| Error::InvalidScene(format!("polytope {i} has no vertices")))?;
            let pts: Vec<Vector> = spec.vertices.iter().map(|v| Vector::from_column_slice(v)).collect();
            polytopes.push(convex_hull(&pts, d, tol)?);
        }
        let balls = self
            .balls
            .into_iter()
            .map(|b| Ball::new(Vector::from_vec(b.center), b.radius))
            .collect::<Result<Vec<_>>>()?;
        Scene::new(self.r, polytopes, balls)
    }
}

impl From<&Scene> for SceneFile {
    fn from(scene: &Scene) -> Self {
        SceneFile {
            r: scene.r,
            polytopes: scene
                .polytopes
                .iter()
                .map(|p| PolytopeSpec {
                    vertices: p.vertices().iter().map(|v| v.iter().copied().collect()).collect(),
                })
                .collect(),
            balls: scene
                .balls
                .iter()
                .map(|b| BallSpec {
                    center: b.center.iter().copied().collect(),
                    radius: b.radius,
                })
                .collect(),
        }
    }
}
