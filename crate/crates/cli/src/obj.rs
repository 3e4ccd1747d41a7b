//! Wavefront OBJ export: polytope facets as faces, and optionally the cone
//! wireframe and projection arcs from one light source as polylines.

use std::fmt::Write;

use anyhow::{bail, Result};

use polycone::geom::ray_second_intersection;
use polycone::polytope::Polytope;
use polycone::sightcone::support_cone;
use polycone::{Tolerance, Vector};

/// Segments per projected arc.
pub const ARC_SEGMENTS: usize = 64;

#[derive(Default)]
struct Obj {
    text: String,
    count: usize,
}

impl Obj {
    fn vertex(&mut self, v: &Vector) -> usize {
        writeln!(self.text, "v {} {} {}", v[0], v[1], v[2]).unwrap();
        self.count += 1;
        self.count
    }

    fn polyline(&mut self, ids: &[usize]) {
        let joined: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        writeln!(self.text, "l {}", joined.join(" ")).unwrap();
    }
}

/// Facet vertices of a 3-polytope in counterclockwise order about the
/// outward normal.
fn facet_cycle(p: &Polytope, facet: usize) -> Vec<usize> {
    let f = &p.facets()[facet];
    let pts: Vec<&Vector> = f.vertex_ids.iter().map(|&i| &p.vertices()[i]).collect();
    let centroid = pts.iter().fold(Vector::zeros(3), |acc, v| acc + *v) / pts.len() as f64;
    let n = &f.plane.normal;
    let e1 = (pts[0] - &centroid).normalize();
    let e2 = n.cross(&e1);
    let mut ids: Vec<(f64, usize)> = f
        .vertex_ids
        .iter()
        .map(|&i| {
            let d = &p.vertices()[i] - &centroid;
            (d.dot(&e2).atan2(d.dot(&e1)), i)
        })
        .collect();
    ids.sort_by(|a, b| a.0.total_cmp(&b.0));
    ids.into_iter().map(|(_, i)| i).collect()
}

pub fn export(polytopes: &[Polytope], r: f64, z: Option<&Vector>, tol: &Tolerance) -> Result<String> {
    let mut obj = Obj::default();
    if polytopes.iter().any(|p| p.dim() != 3) {
        bail!("OBJ export needs three-dimensional polytopes");
    }
    for (k, p) in polytopes.iter().enumerate() {
        writeln!(obj.text, "o polytope_{k}").unwrap();
        let base = obj.count;
        for v in p.vertices() {
            obj.vertex(v);
        }
        for facet in 0..p.facets().len() {
            let cycle: Vec<String> = facet_cycle(p, facet).iter().map(|i| (base + i + 1).to_string()).collect();
            writeln!(obj.text, "f {}", cycle.join(" ")).unwrap();
        }
    }
    let Some(z) = z else {
        return Ok(obj.text);
    };
    for (k, p) in polytopes.iter().enumerate() {
        let cone = support_cone(z, p, tol)?;
        writeln!(obj.text, "o cone_{k}").unwrap();
        let apex = obj.vertex(z);
        let ids = cone.boundary_vertex_ids();
        for u in cone.directions() {
            let hit = ray_second_intersection(z, u, r, tol)?;
            let end = obj.vertex(&hit);
            obj.polyline(&[apex, end]);
        }
        writeln!(obj.text, "o projection_{k}").unwrap();
        for &(i, j) in cone.faces2() {
            let (a, b) = (&p.vertices()[ids[i]], &p.vertices()[ids[j]]);
            let mut line = Vec::with_capacity(ARC_SEGMENTS + 1);
            for s in 0..=ARC_SEGMENTS {
                let t = s as f64 / ARC_SEGMENTS as f64;
                let through = a * (1.0 - t) + b * t;
                let hit = ray_second_intersection(z, &(through - z), r, tol)?;
                line.push(obj.vertex(&hit));
            }
            obj.polyline(&line);
        }
    }
    Ok(obj.text)
}
