//! Seeded fracture of a convex solid into convex fragments.

use crate::geometry::{ConvexPolyhedron, HalfSpace, Vec3, SLIVER_VOLUME};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractureError {
    #[error("solid is empty or degenerate")]
    EmptySolid,
    #[error("invalid fracture pattern: {0}")]
    InvalidPattern(String),
    #[error("could only place {placed} of {wanted} Voronoi sites inside the solid")]
    SiteSampling { placed: usize, wanted: usize },
    #[error("pattern produced no fragments above the sliver volume")]
    NoFragments,
}

/// Control points of a Voronoi fracture.
#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiSites {
    pub sites: Vec<Vec3>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FracturePattern {
    UniformVoronoi {
        site_count: usize,
        #[serde(default)]
        seed: u64,
    },
    Planar {
        planes: Vec<HalfSpace>,
        #[serde(default)]
        jitter_amplitude: f64,
        #[serde(default)]
        seed: u64,
    },
    Brick {
        brick_dims: Vec3,
        /// Shift of every other course along the brick length; half a brick when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        row_offset: Option<f64>,
    },
}

impl FracturePattern {
    pub fn validate(&self) -> Result<(), FractureError> {
        match self {
            FracturePattern::UniformVoronoi { site_count, .. } => {
                if *site_count == 0 {
                    return Err(FractureError::InvalidPattern("site_count must be >= 1".into()));
                }
            }
            FracturePattern::Planar { planes, jitter_amplitude, .. } => {
                if !(jitter_amplitude.is_finite() && *jitter_amplitude >= 0.0) {
                    return Err(FractureError::InvalidPattern("jitter_amplitude must be >= 0".into()));
                }
                if planes.iter().any(|p| !p.is_normalized() || !p.offset.is_finite()) {
                    return Err(FractureError::InvalidPattern("plane normals must be unit length".into()));
                }
            }
            FracturePattern::Brick { brick_dims, row_offset } => {
                let d = brick_dims;
                if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0 && d.is_finite()) {
                    return Err(FractureError::InvalidPattern("brick_dims must be positive".into()));
                }
                if row_offset.is_some_and(|o| !o.is_finite()) {
                    return Err(FractureError::InvalidPattern("row_offset must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// Same pattern with its random stream replaced.
    pub fn with_seed(&self, new_seed: u64) -> FracturePattern {
        let mut p = self.clone();
        match &mut p {
            FracturePattern::UniformVoronoi { seed, .. } | FracturePattern::Planar { seed, .. } => {
                *seed = new_seed
            }
            FracturePattern::Brick { .. } => {}
        }
        p
    }

    pub fn seed(&self) -> u64 {
        match self {
            FracturePattern::UniformVoronoi { seed, .. } | FracturePattern::Planar { seed, .. } => *seed,
            FracturePattern::Brick { .. } => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FractureResult {
    pub fragments: Vec<ConvexPolyhedron>,
    pub source_solid_id: usize,
    pub source_volume: f64,
}

impl FractureResult {
    pub fn total_volume(&self) -> f64 {
        self.fragments.iter().map(ConvexPolyhedron::volume).sum()
    }
}

/// `V_i ∩ bounds`: the part of `bounds` at least as close to site `i` as to any
/// other site. `None` when the cell is empty or a sliver.
///
/// Coincident sites are resolved in favor of the lower index.
pub fn voronoi_cell(i: usize, sites: &VoronoiSites, bounds: &ConvexPolyhedron) -> Option<ConvexPolyhedron> {
    let pi = sites.sites[i];
    let mut others: Vec<(f64, usize)> = sites
        .sites
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &pj)| ((pj - pi).norm(), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut cell = bounds.clone();
    let mut radius = cell.vertices.iter().map(|v| v.distance(pi)).fold(0.0, f64::max);
    for (d, j) in others {
        if d < 1e-12 {
            if j < i {
                return None;
            }
            continue;
        }
        // Bisector farther than every vertex cannot cut the cell.
        if d * 0.5 > radius {
            break;
        }
        let pj = sites.sites[j];
        let hs = HalfSpace::through_point(pj - pi, (pi + pj) * 0.5)?;
        cell = cell.clip(&hs)?;
        radius = cell.vertices.iter().map(|v| v.distance(pi)).fold(0.0, f64::max);
    }
    Some(cell)
}

/// Seeded uniform sites inside `solid`, sampled in its bounding box and
/// rejection-filtered.
pub fn sample_sites(solid: &ConvexPolyhedron, count: usize, seed: u64) -> Result<VoronoiSites, FractureError> {
    let bb = solid.aabb();
    let planes = solid.planes();
    let mut rng = SplitMix64::new(seed);
    let mut sites = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(1000).max(1000);
    let mut attempts = 0;
    while sites.len() < count && attempts < max_attempts {
        attempts += 1;
        let p = Vec3::new(
            rng.range(bb.min.x, bb.max.x),
            rng.range(bb.min.y, bb.max.y),
            rng.range(bb.min.z, bb.max.z),
        );
        if planes.iter().all(|h| h.signed_distance(p) <= 0.0) {
            sites.push(p);
        }
    }
    if sites.len() < count {
        return Err(FractureError::SiteSampling { placed: sites.len(), wanted: count });
    }
    Ok(VoronoiSites { sites, seed })
}

/// Breaks `solid` into fragments according to `pattern`. Deterministic in the
/// inputs, including the pattern seed.
pub fn fracture_solid(solid: &ConvexPolyhedron, pattern: &FracturePattern) -> Result<FractureResult, FractureError> {
    fracture_solid_with_id(solid, pattern, 0)
}

pub fn fracture_solid_with_id(
    solid: &ConvexPolyhedron,
    pattern: &FracturePattern,
    source_solid_id: usize,
) -> Result<FractureResult, FractureError> {
    let source_volume = solid.volume();
    if solid.is_empty() || source_volume < SLIVER_VOLUME {
        return Err(FractureError::EmptySolid);
    }
    pattern.validate()?;
    let fragments = match pattern {
        FracturePattern::UniformVoronoi { site_count, seed } => {
            let sites = sample_sites(solid, *site_count, *seed)?;
            (0..sites.sites.len()).filter_map(|i| voronoi_cell(i, &sites, solid)).collect()
        }
        FracturePattern::Planar { planes, jitter_amplitude, seed } => {
            planar_split(solid, planes, *jitter_amplitude, *seed)
        }
        FracturePattern::Brick { brick_dims, row_offset } => {
            brick_grid(solid, *brick_dims, row_offset.unwrap_or(brick_dims.x * 0.5))
        }
    };
    if fragments.is_empty() {
        return Err(FractureError::NoFragments);
    }
    Ok(FractureResult { fragments, source_solid_id, source_volume })
}

fn planar_split(solid: &ConvexPolyhedron, planes: &[HalfSpace], jitter: f64, seed: u64) -> Vec<ConvexPolyhedron> {
    let mut rng = SplitMix64::new(seed);
    let mut pieces = vec![solid.clone()];
    for plane in planes {
        // Perturb the offset only; normals stay as given.
        let delta = if jitter > 0.0 { jitter * (2.0 * rng.next_f64() - 1.0) } else { 0.0 };
        let cut = HalfSpace { normal: plane.normal, offset: plane.offset + delta };
        pieces = pieces
            .iter()
            .flat_map(|p| {
                let (a, b) = p.split(&cut);
                a.into_iter().chain(b)
            })
            .collect();
    }
    pieces
}

/// Running-bond grid. Brick length runs along the longer horizontal extent of
/// the solid, height along +Y, depth along the remaining axis.
fn brick_grid(solid: &ConvexPolyhedron, dims: Vec3, row_offset: f64) -> Vec<ConvexPolyhedron> {
    let bb = solid.aabb();
    let ext = bb.extent();
    let (long_axis, depth_axis) = if ext.z > ext.x { (2, 0) } else { (0, 2) };
    let axis_min = |a: usize| bb.min.component(a);
    let axis_max = |a: usize| bb.max.component(a);
    let cells_from = |start: f64, end: f64, step: f64| -> usize {
        (((end - start) / step) - 1e-9).ceil().max(0.0) as usize
    };

    let rows = cells_from(bb.min.y, bb.max.y, dims.y);
    let layers = cells_from(axis_min(depth_axis), axis_max(depth_axis), dims.z);
    let mut out = Vec::new();
    for row in 0..rows {
        let y0 = bb.min.y + row as f64 * dims.y;
        let shift = if row % 2 == 1 { row_offset.rem_euclid(dims.x) } else { 0.0 };
        let first = axis_min(long_axis) + shift - if shift > 0.0 { dims.x } else { 0.0 };
        let count = cells_from(first, axis_max(long_axis), dims.x);
        for k in 0..count {
            let l0 = first + k as f64 * dims.x;
            for layer in 0..layers {
                let d0 = axis_min(depth_axis) + layer as f64 * dims.z;
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                lo[1] = y0;
                hi[1] = y0 + dims.y;
                lo[long_axis] = l0;
                hi[long_axis] = l0 + dims.x;
                lo[depth_axis] = d0;
                hi[depth_axis] = d0 + dims.z;
                let planes = box_planes(lo.into(), hi.into());
                if let Some(piece) = solid.clip_all(&planes) {
                    out.push(piece);
                }
            }
        }
    }
    out
}

fn box_planes(lo: Vec3, hi: Vec3) -> [HalfSpace; 6] {
    [
        HalfSpace { normal: Vec3::X, offset: hi.x },
        HalfSpace { normal: -Vec3::X, offset: -lo.x },
        HalfSpace { normal: Vec3::Y, offset: hi.y },
        HalfSpace { normal: -Vec3::Y, offset: -lo.y },
        HalfSpace { normal: Vec3::Z, offset: hi.z },
        HalfSpace { normal: -Vec3::Z, offset: -lo.z },
    ]
}
