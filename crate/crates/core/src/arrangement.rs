//! Facet-plane arrangement on the sphere: sign vectors, region sampling,
//! probes inside a region, and the hyperspherical parametrisation.
//!
//! Regions are sign classes over all facet planes. Facet visibility, and so
//! the shadow boundary, is constant on a class, which is all the verifier
//! needs; a class may be a union of several connected components.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{check_dim, random_unit, Vector};
use crate::polytope::{facet_planes, Hyperplane, Scene};

/// Samples closer than `REGION_GUARD · r` to a facet plane are discarded.
pub const REGION_GUARD: f64 = 1e-7;

/// Members kept per region for later probing.
const KEPT_MEMBERS: usize = 32;

/// Point of the sphere of radius `r` with hyperspherical angles
/// `φ_1, …, φ_{d−1}`: the first `d − 2` in `[0, π]`, the last in `[0, 2π]`.
pub fn hyperspherical_point(angles: &[f64], r: f64) -> Result<Vector> {
    let d = angles.len() + 1;
    check_dim(d)?;
    for (index, &value) in angles.iter().enumerate() {
        let hi = if index + 1 == angles.len() { TAU } else { PI };
        if !(0.0..=hi).contains(&value) {
            return Err(Error::AngleOutOfRange { index, value });
        }
    }
    let mut x = Vector::zeros(d);
    let mut prod = r;
    for (i, &phi) in angles.iter().enumerate() {
        x[i] = prod * phi.cos();
        prod *= phi.sin();
    }
    x[d - 1] = prod;
    Ok(x)
}

/// Side of each plane: `true` where `n·z − c > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector(pub Vec<bool>);

impl SignVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn any_positive(&self) -> bool {
        self.0.iter().any(|&s| s)
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s { "+" } else { "-" })?;
        }
        Ok(())
    }
}

pub fn sign_vector(z: &Vector, planes: &[Hyperplane], eps: f64) -> Result<SignVector> {
    planes
        .iter()
        .enumerate()
        .map(|(plane, h)| {
            let s = h.signed_distance(z);
            if s.abs() <= eps {
                Err(Error::OnPlane { plane })
            } else {
                Ok(s > 0.0)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(SignVector)
}

fn min_plane_distance(z: &Vector, planes: &[Hyperplane]) -> f64 {
    planes
        .iter()
        .map(|h| h.signed_distance(z).abs())
        .fold(f64::INFINITY, f64::min)
}

/// One sign class found by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub sign_vector: SignVector,
    /// First sample (lowest index) in the class.
    pub representative: Vector,
    pub sample_count: usize,
    /// Vertex correspondence accepted across the class, filled in by the
    /// verifier.
    pub stable_permutation: Option<Vec<(usize, usize)>>,
    /// Up to a few dozen further samples of the class, in sample order.
    pub members: Vec<Vector>,
}

/// First `n` points of a seeded sequence on the sphere of radius `r`.
/// Prefixes are stable: the first `m` points do not depend on `n ≥ m`.
///
/// In d = 3 this is a Kronecker (generalised golden ratio) sequence mapped
/// by the equal-area cylinder projection, shifted by a seeded offset; in
/// other dimensions it is seeded uniform sampling.
pub fn sphere_samples(d: usize, r: f64, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if d == 3 {
        // Plastic-number steps give the lowest-discrepancy 2D Kronecker
        // lattice.
        let g = 1.324_717_957_244_746_f64;
        let (a1, a2) = (1.0 / g, 1.0 / (g * g));
        let (s1, s2): (f64, f64) = (rng.random(), rng.random());
        (0..n)
            .map(|i| {
                let u = (s1 + a1 * i as f64).fract();
                let v = (s2 + a2 * i as f64).fract();
                let h = 1.0 - 2.0 * u;
                let rho = (1.0 - h * h).max(0.0).sqrt();
                let t = TAU * v;
                Vector::from_vec(vec![r * rho * t.cos(), r * rho * t.sin(), r * h])
            })
            .collect()
    } else {
        (0..n).map(|_| random_unit(&mut rng, d) * r).collect()
    }
}

/// Sign classes met by `n_samples` seeded sphere points. Reports are in order
/// of first appearance.
pub fn sample_regions_for_planes(
    planes: &[Hyperplane],
    d: usize,
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Vec<RegionReport> {
    classify_points(planes, &sphere_samples(d, r, n_samples, seed), r)
}

/// Groups points by sign vector, dropping those within the boundary guard.
pub fn classify_points(planes: &[Hyperplane], points: &[Vector], r: f64) -> Vec<RegionReport> {
    let eps = REGION_GUARD * r;
    let signs: Vec<Option<SignVector>> = points
        .par_iter()
        .map(|z| sign_vector(z, planes, eps).ok())
        .collect();
    let mut index: BTreeMap<SignVector, usize> = BTreeMap::new();
    let mut reports: Vec<RegionReport> = Vec::new();
    for (z, s) in points.iter().zip(signs) {
        let Some(s) = s else { continue };
        match index.get(&s) {
            Some(&k) => {
                let rep = &mut reports[k];
                rep.sample_count += 1;
                if rep.members.len() < KEPT_MEMBERS {
                    rep.members.push(z.clone());
                }
            }
            None => {
                index.insert(s.clone(), reports.len());
                reports.push(RegionReport {
                    sign_vector: s,
                    representative: z.clone(),
                    sample_count: 1,
                    stable_permutation: None,
                    members: Vec::new(),
                });
            }
        }
    }
    reports
}

/// All facet planes of the scene's polytopes, in polytope order.
pub fn scene_planes(scene: &Scene) -> Vec<Hyperplane> {
    scene.polytopes.iter().flat_map(facet_planes).collect()
}

/// Sign classes of the scene's facet-plane arrangement.
pub fn sample_regions(scene: &Scene, n_samples: usize, seed: u64) -> Vec<RegionReport> {
    let Some(d) = scene.dim() else {
        return Vec::new();
    };
    sample_regions_for_planes(&scene_planes(scene), d, scene.r, n_samples, seed)
}

/// `n` points of the region: the representative, the kept members, then
/// seeded points in a cap around the representative small enough that no
/// plane is crossed.
pub fn region_probes(region: &RegionReport, planes: &[Hyperplane], r: f64, n: usize, seed: u64) -> Vec<Vector> {
    let mut out: Vec<Vector> = std::iter::once(&region.representative)
        .chain(&region.members)
        .take(n)
        .cloned()
        .collect();
    let eps = REGION_GUARD * r;
    let center = &region.representative;
    let margin = min_plane_distance(center, planes);
    let chord_max = 0.5 * margin.min(r);
    let d = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while out.len() < n && attempts < 50 * n {
        attempts += 1;
        let mut t = random_unit(&mut rng, d);
        let zhat = center / r;
        t -= &zhat * t.dot(&zhat);
        if t.norm() < 1e-12 {
            continue;
        }
        t.normalize_mut();
        let chord = chord_max * rng.random_range(0.05..1.0f64);
        let theta = 2.0 * (chord / (2.0 * r)).min(1.0).asin();
        let z = (&zhat * theta.cos() + t * theta.sin()) * r;
        if sign_vector(&z, planes, eps).as_ref() == Ok(&region.sign_vector) {
            out.push(z);
        }
    }
    out
}
