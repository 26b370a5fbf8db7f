//! Deterministic rigid-body settling of released fragments.
//!
//! Semi-implicit Euler with a fixed visiting order (by fragment id). Ground
//! contact is exact against the fragment hull; body–body contact uses bounding
//! spheres and velocity-level impulses only, since neighboring fragments start
//! out with heavily overlapping spheres.

use crate::collection::GeometryCollection;
use crate::geometry::{Aabb, ConvexPolyhedron, Quat, Transform, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Identifies a fragment across the whole world.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FragmentRef {
    pub collection: usize,
    pub fragment: usize,
}

impl fmt::Display for FragmentRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.collection, self.fragment)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("non-finite state in body {0}")]
    NonFinite(FragmentRef),
    #[error("time step {0} outside (0, 0.05]")]
    InvalidStep(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsConfig {
    pub gravity: Vec3,
    pub dt: f64,
    /// Per-step velocity multipliers.
    pub linear_damping: f64,
    pub angular_damping: f64,
    pub restitution: f64,
    /// Coulomb coefficient for ground contact.
    pub friction: f64,
    /// Approach speeds below this are treated as resting contact (no bounce).
    pub resting_speed: f64,
    pub energy_eps: f64,
    pub max_settle_steps: usize,
    /// Physics steps run after each strain-buildup increment.
    pub buildup_substeps: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            gravity: Vec3::new(0.0, -9.81, 0.0),
            dt: 1.0 / 120.0,
            linear_damping: 0.999,
            angular_damping: 0.995,
            restitution: 0.1,
            friction: 0.6,
            resting_speed: 0.2,
            energy_eps: 1e-4,
            max_settle_steps: 20_000,
            buildup_substeps: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidBody {
    pub id: FragmentRef,
    /// Maps the fragment's rest geometry (relative to `rest_centroid`) to world.
    pub pose: Transform,
    pub rest_centroid: Vec3,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub mass: f64,
    pub bounding_radius: f64,
    local_vertices: Vec<Vec3>,
}

impl RigidBody {
    pub fn from_polyhedron(id: FragmentRef, poly: &ConvexPolyhedron, density: f64) -> RigidBody {
        let c = poly.centroid();
        let local_vertices: Vec<Vec3> = poly.vertices.iter().map(|&v| v - c).collect();
        let bounding_radius = local_vertices.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-6);
        RigidBody {
            id,
            pose: Transform::from_translation(c),
            rest_centroid: c,
            linear_velocity: Vec3::ZERO,
            angular_velocity: Vec3::ZERO,
            mass: (poly.volume() * density).max(1e-9),
            bounding_radius,
            local_vertices,
        }
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn world_vertices(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.local_vertices.iter().map(|&v| self.pose.apply(v))
    }

    pub fn min_y(&self) -> f64 {
        self.world_vertices().map(|v| v.y).fold(f64::INFINITY, f64::min)
    }

    pub fn kinetic_energy(&self) -> f64 {
        let inertia = 0.4 * self.mass * self.bounding_radius * self.bounding_radius;
        0.5 * self.mass * self.linear_velocity.norm_squared() + 0.5 * inertia * self.angular_velocity.norm_squared()
    }

    /// Fragment geometry at the current pose.
    pub fn world_polyhedron(&self, rest: &ConvexPolyhedron) -> ConvexPolyhedron {
        ConvexPolyhedron { vertices: self.world_vertices().collect(), faces: rest.faces.clone() }
    }

    fn is_finite(&self) -> bool {
        self.pose.translation.is_finite()
            && self.pose.rotation.is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
    }
}

/// Equal and opposite impulse pair exchanged by one body–body contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactImpulse {
    pub a: FragmentRef,
    pub b: FragmentRef,
    pub on_a: Vec3,
    pub on_b: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettleOutcome {
    pub settled: bool,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub collections: Vec<GeometryCollection>,
    /// Sorted by id.
    pub bodies: Vec<RigidBody>,
    pub config: PhysicsConfig,
    pub seed: u64,
    pub step_count: u64,
    /// Body–body impulses exchanged during the last step.
    pub last_contacts: Vec<ContactImpulse>,
}

impl WorldState {
    pub fn new(collections: Vec<GeometryCollection>, seed: u64) -> WorldState {
        WorldState {
            collections,
            bodies: Vec::new(),
            config: PhysicsConfig::default(),
            seed,
            step_count: 0,
            last_contacts: Vec::new(),
        }
    }

    pub fn empty() -> WorldState {
        WorldState::new(Vec::new(), 0)
    }

    pub fn fragment_count(&self) -> usize {
        self.collections.iter().map(|c| c.fragments.len()).sum()
    }

    pub fn joint_count(&self) -> usize {
        self.collections.iter().map(|c| c.joints.len()).sum()
    }

    pub fn released_count(&self) -> usize {
        self.collections.iter().map(|c| c.released_count()).sum()
    }

    pub fn body(&self, id: FragmentRef) -> Option<&RigidBody> {
        self.bodies.binary_search_by(|b| b.id.cmp(&id)).ok().map(|i| &self.bodies[i])
    }

    pub fn body_mut(&mut self, id: FragmentRef) -> Option<&mut RigidBody> {
        self.bodies.binary_search_by(|b| b.id.cmp(&id)).ok().map(move |i| &mut self.bodies[i])
    }

    /// Creates the rigid body of a released fragment (no-op if it already exists).
    pub fn spawn_body(&mut self, id: FragmentRef) {
        let pos = match self.bodies.binary_search_by(|b| b.id.cmp(&id)) {
            Ok(_) => return,
            Err(pos) => pos,
        };
        let gc = &self.collections[id.collection];
        let body = RigidBody::from_polyhedron(id, &gc.fragments[id.fragment].polyhedron, gc.material.density);
        self.bodies.insert(pos, body);
    }

    /// Instantaneous impulse (N·s) on a body's center of mass.
    pub fn apply_impulse(&mut self, id: FragmentRef, impulse: Vec3) -> bool {
        match self.body_mut(id) {
            Some(b) => {
                b.linear_velocity += impulse / b.mass;
                true
            }
            None => false,
        }
    }

    /// Current geometry of a fragment (moved by its body if released).
    pub fn fragment_polyhedron(&self, id: FragmentRef) -> ConvexPolyhedron {
        let rest = &self.collections[id.collection].fragments[id.fragment].polyhedron;
        match self.body(id) {
            Some(b) => b.world_polyhedron(rest),
            None => rest.clone(),
        }
    }

    pub fn fragment_ids(&self) -> impl Iterator<Item = FragmentRef> + '_ {
        self.collections
            .iter()
            .enumerate()
            .flat_map(|(c, gc)| (0..gc.fragments.len()).map(move |f| FragmentRef { collection: c, fragment: f }))
    }

    /// Bounds of all fragments at their current poses.
    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::EMPTY;
        for gc in &self.collections {
            for f in &gc.fragments {
                bb = bb.union(f.polyhedron.aabb());
            }
        }
        for b in &self.bodies {
            bb = bb.union(Aabb::from_points(&b.world_vertices().collect::<Vec<_>>()));
        }
        bb
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.bodies.iter().map(RigidBody::kinetic_energy).sum()
    }

    /// One semi-implicit Euler step of length `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), PhysicsError> {
        if !(dt > 0.0 && dt <= 0.05) {
            return Err(PhysicsError::InvalidStep(dt));
        }
        self.last_contacts.clear();
        self.step_count += 1;
        if self.bodies.is_empty() {
            return Ok(());
        }
        let cfg = self.config.clone();

        for b in &mut self.bodies {
            b.linear_velocity = (b.linear_velocity + cfg.gravity * dt) * cfg.linear_damping;
            b.angular_velocity = b.angular_velocity * cfg.angular_damping;
        }

        self.resolve_body_contacts(&cfg);

        for b in &mut self.bodies {
            b.pose.translation += b.linear_velocity * dt;
            let w = b.angular_velocity;
            if w != Vec3::ZERO {
                let spin = Quat { w: 0.0, x: w.x, y: w.y, z: w.z } * b.pose.rotation;
                let q = b.pose.rotation;
                b.pose.rotation = Quat {
                    w: q.w + 0.5 * dt * spin.w,
                    x: q.x + 0.5 * dt * spin.x,
                    y: q.y + 0.5 * dt * spin.y,
                    z: q.z + 0.5 * dt * spin.z,
                }
                .normalized();
            }
            resolve_ground(b, &cfg);
        }

        for b in &self.bodies {
            if !b.is_finite() {
                return Err(PhysicsError::NonFinite(b.id));
            }
        }
        Ok(())
    }

    fn resolve_body_contacts(&mut self, cfg: &PhysicsConfig) {
        // Sweep over bounding-sphere x intervals.
        let mut order: Vec<usize> = (0..self.bodies.len()).collect();
        let lo = |b: &RigidBody| b.center().x - b.bounding_radius;
        order.sort_by(|&i, &j| lo(&self.bodies[i]).total_cmp(&lo(&self.bodies[j])).then(i.cmp(&j)));
        let mut pairs = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let bi = &self.bodies[i];
            let hi = bi.center().x + bi.bounding_radius;
            for &j in &order[k + 1..] {
                let bj = &self.bodies[j];
                if lo(bj) > hi {
                    break;
                }
                pairs.push((i.min(j), i.max(j)));
            }
        }
        pairs.sort_unstable();

        for (i, j) in pairs {
            let (left, right) = self.bodies.split_at_mut(j);
            let (a, b) = (&mut left[i], &mut right[0]);
            let delta = b.center() - a.center();
            let dist = delta.norm();
            if dist >= a.bounding_radius + b.bounding_radius || dist < 1e-12 {
                continue;
            }
            let n = delta / dist;
            let approach = (b.linear_velocity - a.linear_velocity).dot(n);
            if approach >= 0.0 {
                continue;
            }
            let e = if -approach > cfg.resting_speed { cfg.restitution } else { 0.0 };
            let j_mag = -(1.0 + e) * approach / (1.0 / a.mass + 1.0 / b.mass);
            let impulse = n * j_mag;
            a.linear_velocity -= impulse / a.mass;
            b.linear_velocity += impulse / b.mass;
            self.last_contacts.push(ContactImpulse { a: a.id, b: b.id, on_a: -impulse, on_b: impulse });
        }
    }

    /// Steps until kinetic energy stays below `energy_eps` for 10 consecutive
    /// steps, or `max_steps` is reached.
    pub fn settle(&mut self, max_steps: usize, energy_eps: f64) -> Result<SettleOutcome, PhysicsError> {
        let dt = self.config.dt;
        let mut calm = 0;
        for step in 1..=max_steps.max(1) {
            self.step(dt)?;
            if self.kinetic_energy() < energy_eps {
                calm += 1;
                if calm >= 10 {
                    return Ok(SettleOutcome { settled: true, steps: step });
                }
            } else {
                calm = 0;
            }
        }
        Ok(SettleOutcome { settled: false, steps: max_steps.max(1) })
    }

    /// `settle` with the configured defaults.
    pub fn settle_default(&mut self) -> Result<SettleOutcome, PhysicsError> {
        let (n, eps) = (self.config.max_settle_steps, self.config.energy_eps);
        self.settle(n, eps)
    }
}

/// Projects a body out of the ground plane and applies restitution plus
/// Coulomb friction bounded by the normal impulse.
fn resolve_ground(b: &mut RigidBody, cfg: &PhysicsConfig) {
    let min_y = b.min_y();
    if min_y >= 0.0 {
        return;
    }
    b.pose.translation.y -= min_y;
    let vn = b.linear_velocity.y;
    if vn >= 0.0 {
        return;
    }
    let new_vn = if -vn > cfg.resting_speed { -cfg.restitution * vn } else { 0.0 };
    let dvn = new_vn - vn;
    b.linear_velocity.y = new_vn;
    let vt = Vec3::new(b.linear_velocity.x, 0.0, b.linear_velocity.z);
    let speed = vt.norm();
    if speed > 0.0 {
        let reduced = (speed - cfg.friction * dvn).max(0.0);
        let scale = reduced / speed;
        b.linear_velocity.x *= scale;
        b.linear_velocity.z *= scale;
    }
    b.angular_velocity = b.angular_velocity * 0.5;
}
