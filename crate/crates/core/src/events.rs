//! Destruction events: strain-field generators, explosion impulses and the
//! orchestration that turns them into released rubble.

use crate::collection::{GeometryCollection, StrainField};
use crate::geometry::Vec3;
use crate::physics::{FragmentRef, PhysicsError, SettleOutcome, WorldState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp on the joint-to-center distance for explosion strain (m).
pub const MIN_EXPLOSION_DISTANCE: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Falloff {
    Linear,
    #[default]
    Squared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn contains(&self, p: Vec3) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

/// The same strain on every joint of every collection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalStrain {
    pub magnitude: f64,
}

/// Distance-attenuated strain inside a culling radius plus an outward impulse
/// on the rubble it releases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Explosion {
    pub center: Vec3,
    pub strain_magnitude: f64,
    /// Impulse magnitude per released fragment (N·s).
    pub force_magnitude: f64,
    pub radius: f64,
    #[serde(default)]
    pub falloff: Falloff,
}

/// Constant per-step strain inside a region, applied over `duration` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrainBuildup {
    pub region: Sphere,
    pub per_step_magnitude: f64,
    pub duration: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DestructionEvent {
    UniversalStrain(UniversalStrain),
    Explosion(Explosion),
    StrainBuildup(StrainBuildup),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("invalid event: {0}")]
    Invalid(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

impl DestructionEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            DestructionEvent::UniversalStrain(_) => "universal_strain",
            DestructionEvent::Explosion(_) => "explosion",
            DestructionEvent::StrainBuildup(_) => "strain_buildup",
        }
    }

    pub fn validate(&self) -> Result<(), EventError> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(EventError::Invalid(format!("{name} must be a finite value >= 0, got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(EventError::Invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        let finite = |name: &str, v: Vec3| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(EventError::Invalid(format!("{name} must be finite")))
            }
        };
        match self {
            DestructionEvent::UniversalStrain(e) => nonneg("magnitude", e.magnitude),
            DestructionEvent::Explosion(e) => {
                finite("center", e.center)?;
                nonneg("strain_magnitude", e.strain_magnitude)?;
                nonneg("force_magnitude", e.force_magnitude)?;
                positive("radius", e.radius)
            }
            DestructionEvent::StrainBuildup(e) => {
                finite("region.center", e.region.center)?;
                positive("region.radius", e.region.radius)?;
                nonneg("per_step_magnitude", e.per_step_magnitude)?;
                if e.duration == 0 {
                    return Err(EventError::Invalid("duration must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

pub fn strain_field_universal(e: &UniversalStrain, gc: &GeometryCollection) -> StrainField {
    StrainField::constant(gc.joints.len(), e.magnitude)
}

/// Strain at distance `d` from an explosion center, before culling.
pub fn explosion_strain(strain_magnitude: f64, d: f64, falloff: Falloff) -> f64 {
    let d = d.max(MIN_EXPLOSION_DISTANCE);
    match falloff {
        Falloff::Linear => strain_magnitude / d,
        Falloff::Squared => strain_magnitude / (d * d),
    }
}

pub fn strain_field_explosion(e: &Explosion, gc: &GeometryCollection) -> StrainField {
    StrainField(
        gc.joints
            .iter()
            .map(|j| {
                let d = (j.position - e.center).norm();
                if d <= e.radius {
                    explosion_strain(e.strain_magnitude, d, e.falloff)
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Outward impulse on a released fragment whose centroid is `position`.
/// Zero (with a warning) when the centroid coincides with the center.
pub fn explosion_impulse(e: &Explosion, position: Vec3) -> Vec3 {
    let offset = position - e.center;
    let dist = offset.norm();
    if dist < 1e-9 {
        log::warn!("explosion impulse direction undefined at the center; skipping");
        return Vec3::ZERO;
    }
    offset / dist * e.force_magnitude
}

/// Strain increment for step `t` (0-based) of a buildup: every joint inside the
/// region receives the per-step magnitude.
pub fn strain_buildup_step(e: &StrainBuildup, gc: &GeometryCollection, t: u32) -> StrainField {
    debug_assert!(t < e.duration, "step {t} outside duration {}", e.duration);
    StrainField(
        gc.joints
            .iter()
            .map(|j| if e.region.contains(j.position) { e.per_step_magnitude } else { 0.0 })
            .collect(),
    )
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event: String,
    pub released: Vec<FragmentRef>,
    pub released_count: usize,
    pub broken_joints: usize,
    pub impulses_applied: usize,
    pub settle: Option<SettleOutcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Runs one destruction event to completion: strain, release, impulses,
/// structural collapse and physics settling.
pub fn apply_event(world: &mut WorldState, event: &DestructionEvent) -> Result<EventReport, EventError> {
    event.validate()?;
    let mut report = EventReport { event: event.kind().to_string(), ..Default::default() };

    let region = match event {
        DestructionEvent::UniversalStrain(_) => None,
        DestructionEvent::Explosion(e) => Some(Sphere { center: e.center, radius: e.radius }),
        DestructionEvent::StrainBuildup(e) => Some(e.region),
    };
    let bounds = world.bounds();
    if let Some(s) = region {
        if bounds.is_empty() || bounds.distance_squared(s.center) > s.radius * s.radius {
            let msg = format!("{} region lies entirely outside the world; nothing to do", event.kind());
            log::warn!("{msg}");
            report.warnings.push(msg);
            return Ok(report);
        }
    }

    for gc in &mut world.collections {
        gc.reset_strain();
    }
    let broken_before: usize = world.collections.iter().map(|c| c.broken_joint_count()).sum();
    let mut released = Vec::new();

    match event {
        DestructionEvent::UniversalStrain(e) => {
            released.extend(strain_pass(world, |gc| strain_field_universal(e, gc)));
            released.extend(support_pass(world));
        }
        DestructionEvent::Explosion(e) => {
            let by_strain = strain_pass(world, |gc| strain_field_explosion(e, gc));
            for &id in &by_strain {
                let centroid = world.body(id).map(|b| b.center()).unwrap_or(Vec3::ZERO);
                if (centroid - e.center).norm() <= e.radius {
                    let impulse = explosion_impulse(e, centroid);
                    if impulse != Vec3::ZERO {
                        world.apply_impulse(id, impulse);
                        report.impulses_applied += 1;
                    }
                }
            }
            released.extend(by_strain);
            released.extend(support_pass(world));
        }
        DestructionEvent::StrainBuildup(e) => {
            let dt = world.config.dt;
            for t in 0..e.duration {
                released.extend(strain_pass(world, |gc| strain_buildup_step(e, gc, t)));
                released.extend(support_pass(world));
                for _ in 0..world.config.buildup_substeps {
                    world.step(dt)?;
                }
            }
        }
    }

    report.settle = Some(world.settle_default()?);
    released.sort_unstable();
    report.released_count = released.len();
    report.released = released;
    let broken_after: usize = world.collections.iter().map(|c| c.broken_joint_count()).sum();
    report.broken_joints = broken_after - broken_before;
    Ok(report)
}

fn strain_pass(world: &mut WorldState, field: impl Fn(&GeometryCollection) -> StrainField) -> Vec<FragmentRef> {
    let mut out = Vec::new();
    for (ci, gc) in world.collections.iter_mut().enumerate() {
        let f = field(gc);
        out.extend(gc.apply_strain(&f).into_iter().map(|fragment| FragmentRef { collection: ci, fragment }));
    }
    for &id in &out {
        world.spawn_body(id);
    }
    out
}

fn support_pass(world: &mut WorldState) -> Vec<FragmentRef> {
    let mut out = Vec::new();
    for (ci, gc) in world.collections.iter_mut().enumerate() {
        out.extend(gc.structural_support_pass().into_iter().map(|fragment| FragmentRef { collection: ci, fragment }));
    }
    for &id in &out {
        world.spawn_body(id);
    }
    out
}
