//! Verification harness: decides whether two bodies coincide by comparing
//! their support cones (or spherical projections) from light sources on the
//! enclosing sphere.
//!
//! A `Distinct` verdict carries a light source at which the two cones are
//! not congruent; it can be re-checked with [`check_at`]. An `Equal` verdict
//! means every sampled light source passed and the vertex correspondence
//! read off the congruences matched the two vertex sets edge by edge. No
//! finite sample proves equality; `Equal` is evidence at the sampled points.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arrangement::{classify_points, region_probes, sample_regions_for_planes, RegionReport, REGION_GUARD};
use crate::congruence::{cone_congruent, cone_shape_classify, spherical_congruent, ConeShape, CongruenceWitness};
use crate::error::{Error, Result};
use crate::geom::{random_unit, Tolerance, Vector};
use crate::polytope::{facet_planes, Ball, Hyperplane, Polytope};
use crate::sightcone::{support_cone, SupportCone};
use crate::sphproj::{ball_shadow, projection_of_cone};

/// Sample count used when the first round finds no witness but equality is
/// not confirmed.
pub const ESCALATED_SAMPLES: usize = 5000;

/// Probes per region when reading off a stable vertex correspondence.
pub const DEFAULT_PROBES: usize = 20;

/// Vertex coordinates must agree to `EQUALITY_TOL · r`.
pub const EQUALITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cones,
    Projections,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cones" => Ok(Mode::Cones),
            "projections" => Ok(Mode::Projections),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Equal,
    Distinct,
    Inconclusive,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Equal => "equal",
            VerdictKind::Distinct => "distinct",
            VerdictKind::Inconclusive => "inconclusive",
        })
    }
}

/// Per-region line of a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub signs: String,
    /// `(P vertex id, Q vertex id)` pairs.
    pub permutation: Option<Vec<(usize, usize)>>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub witness: Option<Vector>,
    pub regions: Vec<RegionSummary>,
    pub max_residual: f64,
    pub samples_checked: usize,
    pub detail: String,
}

impl Verdict {
    fn new(kind: VerdictKind, detail: impl Into<String>) -> Self {
        Verdict {
            kind,
            witness: None,
            regions: Vec::new(),
            max_residual: 0.0,
            samples_checked: 0,
            detail: detail.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.kind.to_string(),
            "witness": self.witness.as_ref().map(|w| w.iter().copied().collect::<Vec<f64>>()),
            "regions": self.regions,
            "max_residual": self.max_residual,
            "samples_checked": self.samples_checked,
            "detail": self.detail,
        })
    }
}

/// Outcome of comparing the two bodies from one light source.
#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// Congruent, with the vertex correspondence `(P id, Q id)` sorted by P
    /// id and the fit residual.
    Congruent { pairs: Vec<(usize, usize)>, residual: f64 },
    NotCongruent,
    /// The permutation search ran out of budget.
    Budget,
    /// The light source is unusable (on a facet plane, or similar).
    Skipped(Error),
}

fn correspondence(a: &SupportCone, b: &SupportCone, w: &CongruenceWitness) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = w
        .permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| (a.boundary_vertex_ids()[i], b.boundary_vertex_ids()[j]))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Compares the support cones (or projections) of `p` and `q` from `z`.
pub fn check_at(z: &Vector, p: &Polytope, q: &Polytope, r: f64, mode: Mode, tol: &Tolerance) -> Check {
    let cones = support_cone(z, p, tol).and_then(|a| support_cone(z, q, tol).map(|b| (a, b)));
    let (a, b) = match cones {
        Ok(pair) => pair,
        Err(e) => return Check::Skipped(e),
    };
    let outcome = match mode {
        Mode::Cones => cone_congruent(&a, &b, tol),
        Mode::Projections => {
            let sp = projection_of_cone(&a, p, r, tol).and_then(|sa| projection_of_cone(&b, q, r, tol).map(|sb| (sa, sb)));
            match sp {
                Ok((sa, sb)) => spherical_congruent(&sa, &sb, tol),
                Err(e) => return Check::Skipped(e),
            }
        }
    };
    match outcome {
        Ok(Some(w)) => Check::Congruent {
            pairs: correspondence(&a, &b, &w),
            residual: w.residual,
        },
        Ok(None) => Check::NotCongruent,
        Err(Error::SearchBudgetExceeded(_)) => Check::Budget,
        Err(e) => Check::Skipped(e),
    }
}

fn joint_planes(p: &Polytope, q: &Polytope) -> Vec<Hyperplane> {
    facet_planes(p).into_iter().chain(facet_planes(q)).collect()
}

/// Seeded uniform light sources away from all planes.
fn random_sources(planes: &[Hyperplane], d: usize, r: f64, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa11_5a3c);
    let eps = REGION_GUARD * r;
    (0..n)
        .map(|_| random_unit(&mut rng, d) * r)
        .filter(|z| planes.iter().all(|h| h.signed_distance(z).abs() > eps))
        .collect()
}

/// Stable vertex correspondence inside a region, or a light source where
/// congruence fails.
#[derive(Debug, Clone, PartialEq)]
pub enum Correspondence {
    Stable(Vec<(usize, usize)>),
    Broken { witness: Vector },
}

/// Reads the vertex correspondence off the accepted congruences at
/// `n_probe` points of `region`. Differing correspondences give
/// [`Error::UnstableRegion`].
#[allow(clippy::too_many_arguments)]
pub fn edge_correspondence(
    p: &Polytope,
    q: &Polytope,
    region: &RegionReport,
    r: f64,
    mode: Mode,
    n_probe: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<Correspondence> {
    let planes = joint_planes(p, q);
    let probes = region_probes(region, &planes, r, n_probe, seed);
    let checks: Vec<Check> = probes.par_iter().map(|z| check_at(z, p, q, r, mode, tol)).collect();
    let mut stable: Option<Vec<(usize, usize)>> = None;
    for (z, c) in probes.iter().zip(checks) {
        match c {
            Check::Congruent { pairs, .. } => match &stable {
                None => stable = Some(pairs),
                Some(s) if *s == pairs => {}
                Some(_) => return Err(Error::UnstableRegion),
            },
            Check::NotCongruent => return Ok(Correspondence::Broken { witness: z.clone() }),
            Check::Budget => return Err(Error::SearchBudgetExceeded(crate::congruence::SEARCH_BUDGET)),
            Check::Skipped(_) => {}
        }
    }
    stable.map(Correspondence::Stable).ok_or(Error::UnstableRegion)
}

/// Result of the vertex-level equality check.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EqualityReport {
    pub equal: bool,
    /// `((P edge), (Q edge))` pairs identified by some region.
    pub matched_edges: Vec<((usize, usize), (usize, usize))>,
    pub uncovered_edges: Vec<(usize, usize)>,
    pub max_deviation: f64,
    /// Light source where congruence failed while probing, if any.
    pub witness: Option<Vector>,
}

/// Light sources from which edge `(a, b)` of `p` spans a 2-face of the
/// support cone: points of the sphere on a supporting hyperplane that
/// touches `p` exactly along the edge.
fn edge_sources(p: &Polytope, a: usize, b: usize, r: f64, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vector> {
    let va = &p.vertices()[a];
    let vb = &p.vertices()[b];
    let e = (vb - va).normalize();
    let m = (va + vb) * 0.5;
    let normals: Vec<&Vector> = p
        .facets()
        .iter()
        .filter(|f| f.vertex_ids.binary_search(&a).is_ok() && f.vertex_ids.binary_search(&b).is_ok())
        .map(|f| &f.plane.normal)
        .collect();
    let d = p.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..4 * count {
        if out.len() == count {
            break;
        }
        let mut nu = Vector::zeros(d);
        for n in &normals {
            nu += *n * rng.random_range(0.2..1.0f64);
        }
        if nu.norm() < 1e-12 {
            continue;
        }
        nu.normalize_mut();
        let mut w = random_unit(rng, d);
        w -= &nu * w.dot(&nu);
        w -= &e * w.dot(&e);
        if w.norm() < 1e-9 {
            continue;
        }
        w.normalize_mut();
        let b_ = m.dot(&w);
        let t = -b_ + (b_ * b_ - m.norm_squared() + r * r).sqrt();
        out.push(&m + w * t);
    }
    out
}

/// Decides `P = Q` from the congruence data: each region's stable vertex
/// correspondence must pair every shadow-boundary vertex with a coinciding
/// vertex of `Q`, and every edge of `P` must be identified with an edge of
/// `Q` in some region. Edges not seen from the sampled regions get targeted
/// light sources. Fills `stable_permutation` on the regions it used.
pub fn decide_equality(
    p: &Polytope,
    q: &Polytope,
    r: f64,
    mode: Mode,
    regions: &mut [RegionReport],
    seed: u64,
    tol: &Tolerance,
) -> Result<EqualityReport> {
    let mut report = EqualityReport::default();
    if p.dim() != q.dim() || p.vertices().len() != q.vertices().len() || p.edges().len() != q.edges().len() {
        report.uncovered_edges = p.edges().to_vec();
        return Ok(report);
    }
    let threshold = EQUALITY_TOL * r;
    let mut covered: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut consistent = true;

    let mut absorb = |pairs: &[(usize, usize)], report: &mut EqualityReport, covered: &mut BTreeSet<(usize, usize)>| {
        let map: std::collections::BTreeMap<usize, usize> = pairs.iter().copied().collect();
        for &(a, b) in pairs {
            let dev = (&p.vertices()[a] - &q.vertices()[b]).norm();
            report.max_deviation = report.max_deviation.max(dev);
            if dev > threshold {
                consistent = false;
            }
        }
        for &(a, b) in p.edges() {
            if let (Some(&qa), Some(&qb)) = (map.get(&a), map.get(&b)) {
                if !q.has_edge(qa, qb) {
                    consistent = false;
                    continue;
                }
                if covered.insert((a, b)) {
                    report.matched_edges.push(((a, b), (qa.min(qb), qa.max(qb))));
                }
            }
        }
    };

    let outcomes: Vec<Result<Correspondence>> = regions
        .par_iter()
        .enumerate()
        .map(|(i, region)| edge_correspondence(p, q, region, r, mode, DEFAULT_PROBES, seed.wrapping_add(i as u64), tol))
        .collect();
    for (region, outcome) in regions.iter_mut().zip(outcomes) {
        match outcome? {
            Correspondence::Stable(pairs) => {
                absorb(&pairs, &mut report, &mut covered);
                region.stable_permutation = Some(pairs);
            }
            Correspondence::Broken { witness } => {
                report.witness = Some(witness);
                return Ok(report);
            }
        }
    }

    let planes = joint_planes(p, q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xed9e_5ca7);
    for &(a, b) in p.edges() {
        if covered.contains(&(a, b)) {
            continue;
        }
        for z in edge_sources(p, a, b, r, 8, &mut rng) {
            let Some(region) = classify_points(&planes, std::slice::from_ref(&z), r).pop() else {
                continue;
            };
            match edge_correspondence(p, q, &region, r, mode, DEFAULT_PROBES, rng.random(), tol)? {
                Correspondence::Stable(pairs) => absorb(&pairs, &mut report, &mut covered),
                Correspondence::Broken { witness } => {
                    report.witness = Some(witness);
                    return Ok(report);
                }
            }
            if covered.contains(&(a, b)) {
                break;
            }
        }
    }
    report.uncovered_edges = p.edges().iter().copied().filter(|e| !covered.contains(e)).collect();
    report.equal = consistent && report.uncovered_edges.is_empty();
    Ok(report)
}

fn summaries(regions: &[RegionReport], residuals: &[Option<f64>]) -> Vec<RegionSummary> {
    regions
        .iter()
        .zip(residuals)
        .map(|(region, &residual)| RegionSummary {
            signs: region.sign_vector.to_string(),
            permutation: region.stable_permutation.clone(),
            residual,
        })
        .collect()
}

/// Verdict on `P = Q`: region representatives and seeded random light
/// sources are checked first; if all are congruent the vertex-level
/// equality check runs. Without a confirmation the search is repeated with
/// [`ESCALATED_SAMPLES`] samples before giving up as inconclusive.
pub fn verify_pair(
    p: &Polytope,
    q: &Polytope,
    r: f64,
    mode: Mode,
    n_samples: usize,
    seed: u64,
    tol: &Tolerance,
) -> Verdict {
    if p.dim() != q.dim() {
        return Verdict::new(VerdictKind::Inconclusive, "polytopes have different dimensions");
    }
    let d = p.dim();
    let planes = joint_planes(p, q);
    let mut rounds = vec![n_samples.max(1)];
    if n_samples < ESCALATED_SAMPLES {
        rounds.push(ESCALATED_SAMPLES);
    }
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    let mut budget_hit = false;
    let mut last_detail = String::new();
    let mut last_regions = Vec::new();

    for &n in &rounds {
        let mut regions = sample_regions_for_planes(&planes, d, r, n, seed);
        let extra = random_sources(&planes, d, r, (n / 10).max(1), seed.wrapping_add(n as u64));
        let points: Vec<Vector> = regions.iter().map(|g| g.representative.clone()).chain(extra).collect();
        let checks: Vec<Check> = points.par_iter().map(|z| check_at(z, p, q, r, mode, tol)).collect();
        let mut residuals = vec![None; regions.len()];
        for (i, (z, c)) in points.iter().zip(&checks).enumerate() {
            checked += 1;
            match c {
                Check::Congruent { residual, .. } => {
                    max_residual = max_residual.max(*residual);
                    if i < regions.len() {
                        residuals[i] = Some(*residual);
                    }
                }
                Check::NotCongruent => {
                    let mut v = Verdict::new(VerdictKind::Distinct, "support data not congruent at the witness");
                    v.witness = Some(z.clone());
                    v.max_residual = max_residual;
                    v.samples_checked = checked;
                    v.regions = summaries(&regions, &residuals);
                    return v;
                }
                Check::Budget => budget_hit = true,
                Check::Skipped(_) => {}
            }
        }
        match decide_equality(p, q, r, mode, &mut regions, seed, tol) {
            Ok(report) => {
                if let Some(w) = report.witness {
                    let mut v = Verdict::new(VerdictKind::Distinct, "support data not congruent inside a region");
                    v.witness = Some(w);
                    v.max_residual = max_residual;
                    v.samples_checked = checked;
                    v.regions = summaries(&regions, &residuals);
                    return v;
                }
                if report.equal && !budget_hit {
                    let mut v = Verdict::new(
                        VerdictKind::Equal,
                        format!(
                            "congruent at all {checked} sampled light sources; {} edges matched, max vertex deviation {:e}",
                            report.matched_edges.len(),
                            report.max_deviation
                        ),
                    );
                    v.max_residual = max_residual;
                    v.samples_checked = checked;
                    v.regions = summaries(&regions, &residuals);
                    return v;
                }
                last_detail = format!(
                    "no witness found; equality not confirmed ({} uncovered edges, max vertex deviation {:e})",
                    report.uncovered_edges.len(),
                    report.max_deviation
                );
            }
            Err(e) => last_detail = format!("no witness found; equality check failed: {e}"),
        }
        if budget_hit {
            last_detail.push_str("; permutation search budget exceeded");
        }
        last_regions = summaries(&regions, &residuals);
    }
    let mut v = Verdict::new(VerdictKind::Inconclusive, last_detail);
    v.max_residual = max_residual;
    v.samples_checked = checked;
    v.regions = last_regions;
    v
}

/// Where the line through `c` with unit direction `u` meets the sphere.
fn line_poles(c: &Vector, u: &Vector, r: f64) -> (Vector, Vector) {
    let b = c.dot(u);
    let s = (b * b - c.norm_squared() + r * r).max(0.0).sqrt();
    (c + u * (-b + s), c + u * (-b - s))
}

/// Ball procedure: the sight cones of two balls from either pole of the line
/// through their centres share an axis, so they are congruent exactly when
/// their half-angles agree. The balls coincide iff the half-angles agree at
/// both poles; otherwise the first differing pole is the witness.
pub fn verify_balls(k: &Ball, l: &Ball, r: f64, tol: &Tolerance) -> Verdict {
    if !k.is_interior(r) || !l.is_interior(r) {
        return Verdict::new(VerdictKind::Inconclusive, "balls must lie strictly inside the sphere");
    }
    let d = k.dim();
    let delta = &l.center - &k.center;
    let u = if delta.norm() > tol.scaled(r) {
        delta.normalize()
    } else if k.center.norm() > tol.scaled(r) {
        k.center.normalize()
    } else {
        let mut e = Vector::zeros(d);
        e[0] = 1.0;
        e
    };
    let (z1, z2) = line_poles(&k.center, &u, r);
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    for z in [z1, z2] {
        checked += 1;
        let (a, b) = match (ball_shadow(&z, k, r, tol), ball_shadow(&z, l, r, tol)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Verdict::new(VerdictKind::Inconclusive, e.to_string()),
        };
        let diff = (a.half_angle - b.half_angle).abs();
        if diff > tol.residual_max {
            let mut v = Verdict::new(
                VerdictKind::Distinct,
                format!("sight-cone half-angles {} and {} differ at a pole", a.half_angle, b.half_angle),
            );
            v.witness = Some(z);
            v.max_residual = max_residual;
            v.samples_checked = checked;
            return v;
        }
        max_residual = max_residual.max(diff);
    }
    let mut v = Verdict::new(VerdictKind::Equal, "sight-cone half-angles agree at both poles");
    v.max_residual = max_residual;
    v.samples_checked = checked;
    v
}

/// An angle observation: light source `z` and the angle `alpha` in `[0, π)`
/// the unknown segment subtends there.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSample {
    pub z: Vector,
    pub alpha: f64,
}

/// A circle of radius `r` about the origin in the 2-plane spanned by the
/// orthonormal pair `u`, `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct CirclePlane {
    pub u: Vector,
    pub v: Vector,
    pub r: f64,
}

impl CirclePlane {
    /// The circle of radius `r` in the coordinate plane of `R²`.
    pub fn standard(r: f64) -> Self {
        CirclePlane {
            u: Vector::from_vec(vec![1.0, 0.0]),
            v: Vector::from_vec(vec![0.0, 1.0]),
            r,
        }
    }

    pub fn point(&self, t: f64) -> Vector {
        (&self.u * t.cos() + &self.v * t.sin()) * self.r
    }

    pub fn coords(&self, x: &Vector) -> [f64; 2] {
        [x.dot(&self.u), x.dot(&self.v)]
    }

    pub fn lift(&self, c: [f64; 2]) -> Vector {
        &self.u * c[0] + &self.v * c[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFit {
    /// Endpoints in lexicographic order of their plane coordinates.
    pub x: Vector,
    pub y: Vector,
    /// Root-mean-square angle residual.
    pub residual: f64,
}

/// Signed angle from `x − z` to `y − z` in plane coordinates.
fn signed_angle(p: &[f64; 4], z: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
    let a = [p[0] - z[0], p[1] - z[1]];
    let b = [p[2] - z[0], p[3] - z[1]];
    let theta = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    (theta, a, b)
}

/// Residuals `|θ_j| − α_j` and their Jacobian with respect to
/// `(x₁, x₂, y₁, y₂)`.
fn residuals_and_jacobian(p: &[f64; 4], samples: &[([f64; 2], f64)]) -> (Vec<f64>, Vec<[f64; 4]>) {
    let mut res = Vec::with_capacity(samples.len());
    let mut jac = Vec::with_capacity(samples.len());
    for &(z, alpha) in samples {
        let (theta, a, b) = signed_angle(p, z);
        let s = if theta < 0.0 { -1.0 } else { 1.0 };
        let na = a[0] * a[0] + a[1] * a[1];
        let nb = b[0] * b[0] + b[1] * b[1];
        res.push(theta.abs() - alpha);
        jac.push([s * a[1] / na, -s * a[0] / na, -s * b[1] / nb, s * b[0] / nb]);
    }
    (res, jac)
}

/// Smooth surrogate residuals `cos ∠x z_j y − cos α_j` and Jacobian. Free
/// of the kink `|θ|` has where a light source is collinear with the
/// segment, so descent from far away does not stall there.
fn cosine_residuals(p: &[f64; 4], samples: &[([f64; 2], f64)]) -> (Vec<f64>, Vec<[f64; 4]>) {
    let mut res = Vec::with_capacity(samples.len());
    let mut jac = Vec::with_capacity(samples.len());
    for &(z, alpha) in samples {
        let a = [p[0] - z[0], p[1] - z[1]];
        let b = [p[2] - z[0], p[3] - z[1]];
        let na = a[0].hypot(a[1]);
        let nb = b[0].hypot(b[1]);
        let c = (a[0] * b[0] + a[1] * b[1]) / (na * nb);
        res.push(c - alpha.cos());
        let da = [b[0] / (na * nb) - c * a[0] / (na * na), b[1] / (na * nb) - c * a[1] / (na * na)];
        let db = [a[0] / (na * nb) - c * b[0] / (nb * nb), a[1] / (na * nb) - c * b[1] / (nb * nb)];
        jac.push([da[0], da[1], db[0], db[1]]);
    }
    (res, jac)
}

/// Least-squares objective `½ Σ (|∠x z_j y| − α_j)²` in plane coordinates.
pub fn segment_objective(p: [f64; 4], samples: &[([f64; 2], f64)]) -> f64 {
    0.5 * residuals_and_jacobian(&p, samples).0.iter().map(|r| r * r).sum::<f64>()
}

/// Analytic gradient of [`segment_objective`].
pub fn segment_gradient(p: [f64; 4], samples: &[([f64; 2], f64)]) -> [f64; 4] {
    let (res, jac) = residuals_and_jacobian(&p, samples);
    let mut g = [0.0; 4];
    for (r, row) in res.iter().zip(&jac) {
        for k in 0..4 {
            g[k] += r * row[k];
        }
    }
    g
}

const LM_MAX_ITER: usize = 200;
const LM_STEP_TOL: f64 = 1e-12;
const MULTISTARTS: usize = 8;

/// Levenberg–Marquardt from `start`; `None` when it fails to converge.
fn levenberg_marquardt<F>(start: [f64; 4], samples: &[([f64; 2], f64)], model: F) -> Option<([f64; 4], f64)>
where
    F: Fn(&[f64; 4], &[([f64; 2], f64)]) -> (Vec<f64>, Vec<[f64; 4]>),
{
    let objective = |p: [f64; 4]| 0.5 * model(&p, samples).0.iter().map(|r| r * r).sum::<f64>();
    let mut p = start;
    let mut cost = objective(p);
    let mut lambda = 1e-3;
    for _ in 0..LM_MAX_ITER {
        let (res, jac) = model(&p, samples);
        let mut a = Matrix4::<f64>::zeros();
        let mut g = Vector4::<f64>::zeros();
        for (r, row) in res.iter().zip(&jac) {
            let j = Vector4::from_column_slice(row);
            a += j * j.transpose();
            g += j * *r;
        }
        loop {
            let mut damped = a;
            for k in 0..4 {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e12 {
                    return cost.is_finite().then_some((p, cost));
                }
                continue;
            };
            let step = chol.solve(&(-g));
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let trial_cost = objective(trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                if step.norm() < LM_STEP_TOL {
                    return Some((p, cost));
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                // No descent left: a stationary point.
                return cost.is_finite().then_some((p, cost));
            }
        }
    }
    None
}

/// Recovers the unordered endpoints `{x, y}` of a segment inside the circle
/// from the angles it subtends at points of the circle, by multistart
/// damped least squares. Each start descends on the cosine residuals first
/// and is then polished on the angle residuals themselves.
pub fn recover_segment(samples: &[AngleSample], circle: &CirclePlane, seed: u64) -> Result<SegmentFit> {
    if samples.len() < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 angle samples, got {}", samples.len())));
    }
    for s in samples {
        if !s.alpha.is_finite() || !(0.0..std::f64::consts::PI).contains(&s.alpha) {
            return Err(Error::InvalidInput(format!("angle {} is outside [0, π)", s.alpha)));
        }
    }
    if samples.iter().all(|s| s.alpha <= 1e-12) {
        return Err(Error::DegenerateSegment);
    }
    let r = circle.r;
    let planar: Vec<([f64; 2], f64)> = samples.iter().map(|s| (circle.coords(&s.z), s.alpha)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disk = || {
        let rho = r * rng.random::<f64>().sqrt();
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        [rho * t.cos(), rho * t.sin()]
    };
    let starts: Vec<[f64; 4]> = (0..MULTISTARTS)
        .map(|_| {
            let (x, y) = (disk(), disk());
            [x[0], x[1], y[0], y[1]]
        })
        .collect();
    let best = starts
        .par_iter()
        .map(|&s| {
            let (coarse, _) = levenberg_marquardt(s, &planar, cosine_residuals)?;
            levenberg_marquardt(coarse, &planar, residuals_and_jacobian)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::NoConvergence)?;
    let (p, cost) = best;
    let (mut x, mut y) = ([p[0], p[1]], [p[2], p[3]]);
    if ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt() < 1e-6 * r {
        return Err(Error::DegenerateSegment);
    }
    if (y[0], y[1]) < (x[0], x[1]) {
        std::mem::swap(&mut x, &mut y);
    }
    Ok(SegmentFit {
        x: circle.lift(x),
        y: circle.lift(y),
        residual: (2.0 * cost / samples.len() as f64).sqrt(),
    })
}

/// The cone fixture: a sphere through the origin, a circle of it cut by a
/// horizontal plane and another cut by a tilted plane through its centre,
/// and the cones over both from the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub sphere_center: Vec<f64>,
    pub sphere_radius: f64,
    pub s1_radius: f64,
    pub s2_radius: f64,
    pub circles_congruent: bool,
    pub c1_shape: ConeShape,
    pub c2_shape: ConeShape,
    /// Largest |x² + y² + 2xz − z²| over the sampled points of the second
    /// circle (unit directions).
    pub c2_form_residual: f64,
    pub cones_congruent: bool,
}

/// Samples of the two circles of the fixture: `z = −1` and `z = x − 1` on
/// the sphere `x² + y² + (z + 1)² = 1`.
pub fn counterexample_circles(n: usize) -> (Vec<Vector>, Vec<Vector>) {
    let c = Vector::from_vec(vec![0.0, 0.0, -1.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let flat = (Vector::from_vec(vec![1.0, 0.0, 0.0]), Vector::from_vec(vec![0.0, 1.0, 0.0]));
    let tilted = (Vector::from_vec(vec![s, 0.0, s]), Vector::from_vec(vec![0.0, 1.0, 0.0]));
    let circle = |(u, v): &(Vector, Vector)| -> Vec<Vector> {
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64 + 0.1;
                &c + u * t.cos() + v * t.sin()
            })
            .collect()
    };
    (circle(&flat), circle(&tilted))
}

fn cycle(k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|i| (i, (i + 1) % k)).collect()
}

/// Radius of the circle cut from a sphere by the plane `n·x = offset`.
fn section_radius(center: &Vector, radius: f64, normal: &Vector, offset: f64) -> f64 {
    let n = normal.normalize();
    let dist = (n.dot(center) - offset / normal.norm()).abs();
    (radius * radius - dist * dist).max(0.0).sqrt()
}

pub fn counterexample_report(tol: &Tolerance) -> Result<CounterexampleReport> {
    let center = Vector::from_vec(vec![0.0, 0.0, -1.0]);
    let s1_radius = section_radius(&center, 1.0, &Vector::from_vec(vec![0.0, 0.0, 1.0]), -1.0);
    let s2_radius = section_radius(&center, 1.0, &Vector::from_vec(vec![1.0, 0.0, -1.0]), 1.0);
    let (s1, s2) = counterexample_circles(24);
    let apex = Vector::zeros(3);
    let c1_shape = cone_shape_classify(&s1, &apex, tol)?;
    let c2_shape = cone_shape_classify(&s2, &apex, tol)?;
    let c2_form_residual = s2
        .iter()
        .map(|p| {
            let u = p.normalize();
            (u[0] * u[0] + u[1] * u[1] + 2.0 * u[0] * u[2] - u[2] * u[2]).abs()
        })
        .fold(0.0, f64::max);
    let c1 = SupportCone::from_directions(apex.clone(), s1, cycle(24))?;
    let c2 = SupportCone::from_directions(apex, s2, cycle(24))?;
    let cones_congruent = cone_congruent(&c1, &c2, tol)?.is_some();
    Ok(CounterexampleReport {
        sphere_center: center.iter().copied().collect(),
        sphere_radius: 1.0,
        s1_radius,
        s2_radius,
        circles_congruent: (s1_radius - s2_radius).abs() <= tol.scaled(1.0),
        c1_shape,
        c2_shape,
        c2_form_residual,
        cones_congruent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::ShapeKind;
    use crate::geom::{random_orthogonal, vector, OrthoMap};
    use crate::polytope::random_polytope;
    use crate::sphproj::angle;
    use nalgebra::DMatrix;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn cube(h: f64, shift: &Vector) -> Polytope {
        let mut pts = Vec::new();
        for &x in &[-h, h] {
            for &y in &[-h, h] {
                for &z in &[-h, h] {
                    pts.push(vector(&[x, y, z]) + shift);
                }
            }
        }
        Polytope::from_points(&pts, &tol()).unwrap()
    }

    #[test]
    fn identical_random_polytopes_are_equal() {
        for seed in 0..10 {
            let p = random_polytope(seed, 3, 12, 0.6, &tol()).unwrap();
            for mode in [Mode::Cones, Mode::Projections] {
                let v = verify_pair(&p, &p, 1.0, mode, 500, seed, &tol());
                assert_eq!(v.kind, VerdictKind::Equal, "{}", v.detail);
                assert!(v.max_residual <= 1e-9);
            }
        }
    }

    #[test]
    fn shifted_cube_is_distinct_with_rechecked_witness() {
        let a = cube(0.25, &Vector::zeros(3));
        let b = cube(0.25, &vector(&[0.1, 0., 0.]));
        for mode in [Mode::Cones, Mode::Projections] {
            let v = verify_pair(&a, &b, 1.0, mode, 500, 1, &tol());
            assert_eq!(v.kind, VerdictKind::Distinct);
            let w = v.witness.unwrap();
            assert!((w.norm() - 1.0).abs() < 1e-12);
            assert_eq!(check_at(&w, &a, &b, 1.0, mode, &tol()), Check::NotCongruent);
        }
    }

    #[test]
    fn rotated_cube_is_the_same_cube() {
        let a = cube(0.25, &Vector::zeros(3));
        let quarter = OrthoMap::new(
            DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 1.]),
            1e-12,
        )
        .unwrap();
        let b = a.transformed(&quarter, &tol()).unwrap();
        let v = verify_pair(&a, &b, 1.0, Mode::Cones, 500, 2, &tol());
        assert_eq!(v.kind, VerdictKind::Equal, "{}", v.detail);
    }

    #[test]
    fn cube_vs_octahedron_fails_equality() {
        let c = cube(0.25, &Vector::zeros(3));
        let mut pts = Vec::new();
        for i in 0..3 {
            for s in [-0.4, 0.4] {
                let mut v = Vector::zeros(3);
                v[i] = s;
                pts.push(v);
            }
        }
        let o = Polytope::from_points(&pts, &tol()).unwrap();
        let report = decide_equality(&c, &o, 1.0, Mode::Cones, &mut [], 0, &tol()).unwrap();
        assert!(!report.equal);
        let v = verify_pair(&c, &o, 1.0, Mode::Cones, 500, 0, &tol());
        assert_eq!(v.kind, VerdictKind::Distinct);
    }

    #[test]
    fn decide_equality_rejects_translates_directly() {
        let p = random_polytope(3, 3, 12, 0.5, &tol()).unwrap();
        let q = p.translated(&vector(&[0.1, 0., 0.]), &tol()).unwrap();
        let planes = joint_planes(&p, &q);
        let mut regions = sample_regions_for_planes(&planes, 3, 1.0, 200, 3);
        let report = decide_equality(&p, &q, 1.0, Mode::Cones, &mut regions, 3, &tol()).unwrap();
        assert!(!report.equal);

        let planes = joint_planes(&p, &p);
        let mut regions = sample_regions_for_planes(&planes, 3, 1.0, 500, 3);
        let report = decide_equality(&p, &p, 1.0, Mode::Cones, &mut regions, 3, &tol()).unwrap();
        assert!(report.equal);
        assert!(report.uncovered_edges.is_empty());
        assert_eq!(report.matched_edges.len(), p.edges().len());
        assert!(report.max_deviation < 1e-15);
    }

    #[test]
    fn edge_correspondence_identity_and_stability() {
        let p = random_polytope(8, 3, 12, 0.6, &tol()).unwrap();
        let planes = joint_planes(&p, &p);
        let regions = sample_regions_for_planes(&planes, 3, 1.0, 1000, 8);
        for region in regions.iter().take(20) {
            let a = edge_correspondence(&p, &p, region, 1.0, Mode::Cones, 20, 1, &tol()).unwrap();
            let b = edge_correspondence(&p, &p, region, 1.0, Mode::Cones, 20, 2, &tol()).unwrap();
            assert_eq!(a, b);
            let Correspondence::Stable(pairs) = a else { panic!("broken") };
            assert!(pairs.iter().all(|(i, j)| i == j));
        }
    }

    #[test]
    fn cube_symmetry_gives_coordinate_identity() {
        // Vertices are stored in canonical order, so the cube and its image
        // under a symmetry are the same list and the induced correspondence
        // pairs each vertex with itself.
        let a = cube(0.25, &Vector::zeros(3));
        let quarter = OrthoMap::new(
            DMatrix::from_row_slice(3, 3, &[0., -1., 0., 1., 0., 0., 0., 0., 1.]),
            1e-12,
        )
        .unwrap();
        let b = a.transformed(&quarter, &tol()).unwrap();
        let planes = joint_planes(&a, &b);
        for region in sample_regions_for_planes(&planes, 3, 1.0, 2000, 4) {
            let Correspondence::Stable(pairs) =
                edge_correspondence(&a, &b, &region, 1.0, Mode::Cones, 20, 5, &tol()).unwrap()
            else {
                panic!("broken")
            };
            for (i, j) in pairs {
                assert!((&a.vertices()[i] - &b.vertices()[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_examples() {
        let t = tol();
        let origin = Vector::zeros(3);
        let k = Ball::new(origin.clone(), 0.3).unwrap();
        assert_eq!(verify_balls(&k, &k, 1.0, &t).kind, VerdictKind::Equal);

        let l = Ball::new(origin, 0.4).unwrap();
        let v = verify_balls(&k, &l, 1.0, &t);
        assert_eq!(v.kind, VerdictKind::Distinct);
        let w = v.witness.unwrap();
        assert!((w[0].abs() - 1.0).abs() < 1e-12);

        let k = Ball::new(vector(&[0.1, 0., 0.]), 0.3).unwrap();
        let l = Ball::new(vector(&[-0.1, 0., 0.]), 0.3).unwrap();
        let v = verify_balls(&k, &l, 1.0, &t);
        assert_eq!(v.kind, VerdictKind::Distinct);
        let w = v.witness.unwrap();
        assert!((w.clone() - vector(&[-1., 0., 0.])).norm() < 1e-12 || (w - vector(&[1., 0., 0.])).norm() < 1e-12);
    }

    #[test]
    fn ball_verdicts_match_brute_force() {
        let t = tol();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in 0..50 {
            let ball = |rng: &mut ChaCha8Rng| {
                let c = random_unit(rng, 3) * rng.random_range(0.0..0.3);
                Ball::new(c, rng.random_range(0.05..0.3)).unwrap()
            };
            let k = ball(&mut rng);
            let l = if i % 5 == 0 { k.clone() } else { ball(&mut rng) };
            let verdict = verify_balls(&k, &l, 1.0, &t).kind;
            let brute_distinct = (0..100).any(|_| {
                let z = random_unit(&mut rng, 3);
                let a = ball_shadow(&z, &k, 1.0, &t).unwrap();
                let b = ball_shadow(&z, &l, 1.0, &t).unwrap();
                (a.half_angle - b.half_angle).abs() > 1e-9
            });
            assert_eq!(verdict == VerdictKind::Distinct, brute_distinct);
        }
    }

    fn segment_samples(x: &Vector, y: &Vector, n: usize, seed: u64) -> Vec<AngleSample> {
        let circle = CirclePlane::standard(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z = circle.point(rng.random_range(0.0..std::f64::consts::TAU));
                let alpha = angle(&z, x, y, &tol()).unwrap();
                AngleSample { z, alpha }
            })
            .collect()
    }

    #[test]
    fn recovers_the_example_segment() {
        let x = vector(&[0.2, 0.0]);
        let y = vector(&[-0.3, 0.1]);
        let fit = recover_segment(&segment_samples(&x, &y, 100, 4), &CirclePlane::standard(1.0), 4).unwrap();
        assert!((&fit.x - &y).norm() <= 1e-6 && (&fit.y - &x).norm() <= 1e-6);
        assert!(fit.residual <= 1e-10);
        let swapped = recover_segment(&segment_samples(&y, &x, 100, 4), &CirclePlane::standard(1.0), 4).unwrap();
        assert!((&swapped.x - &fit.x).norm() < 1e-9 && (&swapped.y - &fit.y).norm() < 1e-9);
    }

    #[test]
    fn recovery_in_an_embedded_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rot = random_orthogonal(&mut rng, 4, true);
        let e = |i: usize| Vector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 });
        let circle = CirclePlane {
            u: rot.apply(&e(0)),
            v: rot.apply(&e(1)),
            r: 2.0,
        };
        let x = circle.lift([0.5, -0.2]);
        let y = circle.lift([-0.4, 0.7]);
        let samples: Vec<AngleSample> = (0..20)
            .map(|i| {
                let z = circle.point(0.31 * i as f64);
                AngleSample {
                    alpha: angle(&z, &x, &y, &tol()).unwrap(),
                    z,
                }
            })
            .collect();
        let fit = recover_segment(&samples, &circle, 1).unwrap();
        let err = ((&fit.x - &x).norm().max((&fit.y - &y).norm())).min((&fit.x - &y).norm().max((&fit.y - &x).norm()));
        assert!(err < 1e-6);
    }

    #[test]
    fn zero_angles_are_degenerate() {
        let samples: Vec<AngleSample> = (0..10)
            .map(|i| AngleSample {
                z: CirclePlane::standard(1.0).point(i as f64),
                alpha: 0.0,
            })
            .collect();
        assert_eq!(
            recover_segment(&samples, &CirclePlane::standard(1.0), 0),
            Err(Error::DegenerateSegment)
        );
        assert!(matches!(
            recover_segment(&samples[..5], &CirclePlane::standard(1.0), 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = vector(&[0.1, 0.3]);
        let y = vector(&[-0.4, -0.2]);
        let planar: Vec<([f64; 2], f64)> = segment_samples(&x, &y, 30, 3)
            .iter()
            .map(|s| ([s.z[0], s.z[1]], s.alpha))
            .collect();
        for _ in 0..100 {
            let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(-0.7..0.7));
            let g = segment_gradient(p, &planar);
            for k in 0..4 {
                let h = 1e-6;
                let (mut hi, mut lo) = (p, p);
                hi[k] += h;
                lo[k] -= h;
                let fd = (segment_objective(hi, &planar) - segment_objective(lo, &planar)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0), "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn counterexample_fixture() {
        let report = counterexample_report(&tol()).unwrap();
        assert!((report.s1_radius - 1.0).abs() <= 1e-9);
        assert!((report.s2_radius - 1.0).abs() <= 1e-9);
        assert!(report.circles_congruent);
        assert!(report.c2_form_residual < 1e-14);
        assert_eq!(report.c1_shape.kind, ShapeKind::Circular);
        assert_eq!(report.c2_shape.kind, ShapeKind::Elliptical);
        // Eigenvalues of [[1,0,1],[0,1,0],[1,0,-1]]: the characteristic
        // polynomial factors as (1 − λ)(λ² − 2).
        let expected = (2f64.sqrt() / 1.0).sqrt();
        assert!((report.c2_shape.axis_ratio - expected).abs() <= 1e-9);
        assert!(!report.cones_congruent);
    }

    #[test]
    fn verdict_json_shape() {
        let p = random_polytope(1, 3, 10, 0.6, &tol()).unwrap();
        let v = verify_pair(&p, &p, 1.0, Mode::Cones, 200, 1, &tol());
        let j = v.to_json();
        assert_eq!(j["verdict"], "equal");
        assert!(j["witness"].is_null());
        assert!(j["regions"].as_array().unwrap().iter().all(|r| r["signs"].is_string()));
        assert!(j["max_residual"].is_number());
    }
}
