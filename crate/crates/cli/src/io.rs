//! JSON and CSV shapes read and written by the command-line tool.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use polycone::sightcone::SupportCone;
use polycone::sphproj::{Arc, SphericalPolytope};
use polycone::verifier::AngleSample;
use polycone::{Tolerance, Vector};

pub fn coords(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Parses `x,y,z` (any length).
pub fn parse_point(text: &str) -> Result<Vector> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad coordinate `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
        bail!("point `{text}` needs finite coordinates");
    }
    Ok(Vector::from_vec(values))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConeFile {
    pub apex: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub boundary_vertex_ids: Vec<usize>,
    pub faces2: Vec<(usize, usize)>,
}

impl From<&SupportCone> for ConeFile {
    fn from(c: &SupportCone) -> Self {
        ConeFile {
            apex: coords(c.apex()),
            directions: c.directions().iter().map(coords).collect(),
            boundary_vertex_ids: c.boundary_vertex_ids().to_vec(),
            faces2: c.faces2().to_vec(),
        }
    }
}

impl ConeFile {
    pub fn into_cone(self) -> Result<SupportCone> {
        Ok(SupportCone::from_directions(
            Vector::from_vec(self.apex),
            self.directions.into_iter().map(Vector::from_vec).collect(),
            self.faces2,
        )?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ArcFile {
    pub i: usize,
    pub j: usize,
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub r: f64,
    pub source: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
    pub arcs: Vec<ArcFile>,
}

impl From<&SphericalPolytope> for ProjectionFile {
    fn from(s: &SphericalPolytope) -> Self {
        ProjectionFile {
            r: s.r(),
            source: coords(s.source_apex()),
            vertices: s.vertices().iter().map(coords).collect(),
            arcs: s
                .arcs()
                .iter()
                .map(|a| ArcFile {
                    i: a.i,
                    j: a.j,
                    center: coords(&a.circle_center),
                    radius: a.circle_radius,
                })
                .collect(),
        }
    }
}

impl ProjectionFile {
    pub fn into_projection(self) -> Result<SphericalPolytope> {
        let arcs = self
            .arcs
            .into_iter()
            .map(|a| Arc {
                i: a.i,
                j: a.j,
                circle_center: Vector::from_vec(a.center),
                circle_radius: a.radius,
            })
            .collect();
        Ok(SphericalPolytope::from_parts(
            self.r,
            self.vertices.into_iter().map(Vector::from_vec).collect(),
            arcs,
            Vector::from_vec(self.source),
        )?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

pub fn read_scene(path: &Path, tol: &Tolerance) -> Result<polycone::polytope::Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(polycone::polytope::Scene::from_json(&text, tol)?)
}

#[derive(Debug, Deserialize)]
struct AngleRow {
    zx: f64,
    zy: f64,
    alpha: f64,
}

/// Reads a `zx,zy,alpha` CSV of light sources in the plane and angles in
/// radians.
pub fn read_angles(path: &Path) -> Result<Vec<AngleSample>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["zx", "zy", "alpha"] {
        bail!("angle CSV must have the header `zx,zy,alpha`");
    }
    reader
        .deserialize::<AngleRow>()
        .map(|row| {
            let row = row?;
            Ok(AngleSample {
                z: Vector::from_vec(vec![row.zx, row.zy]),
                alpha: row.alpha,
            })
        })
        .collect()
}
