mod common;

use common::loose_world;
use proptest::prelude::*;
use rubble_forge::collection::MaterialKind;
use rubble_forge::geometry::{ConvexPolyhedron, Quat, Transform, Vec3};
use rubble_forge::physics::{PhysicsError, WorldState};

fn min_vertex_y(w: &WorldState) -> f64 {
    w.bodies.iter().map(|b| b.min_y()).fold(f64::INFINITY, f64::min)
}

fn potential_energy(w: &WorldState) -> f64 {
    let g = -w.config.gravity.y;
    w.bodies.iter().map(|b| b.mass * g * b.center().y).sum()
}

/// Runs `steps` steps and returns the kinetic energy after each one, checking
/// the ground is never penetrated by more than 1 cm.
fn trace(w: &mut WorldState, steps: usize) -> Vec<f64> {
    let dt = w.config.dt;
    (0..steps)
        .map(|_| {
            w.step(dt).unwrap();
            assert!(min_vertex_y(w) >= -0.01, "vertex below ground at step {}", w.step_count);
            w.kinetic_energy()
        })
        .collect()
}

fn first_contact(w: &mut WorldState, limit: usize) -> usize {
    let dt = w.config.dt;
    for k in 0..limit {
        w.step(dt).unwrap();
        if min_vertex_y(w) <= 1e-9 {
            return k;
        }
    }
    panic!("no ground contact within {limit} steps");
}

#[test]
fn flat_drop_loses_mechanical_energy_every_step() {
    let cube = ConvexPolyhedron::cuboid(Vec3::new(-0.2, 2.0, -0.2), Vec3::new(0.2, 2.4, 0.2));
    let mut w = loose_world(vec![cube], MaterialKind::Concrete);
    let dt = w.config.dt;
    let mut e = w.kinetic_energy() + potential_energy(&w);
    for _ in 0..600 {
        w.step(dt).unwrap();
        let now = w.kinetic_energy() + potential_energy(&w);
        assert!(now <= e + 1e-9, "energy rose from {e} to {now} at step {}", w.step_count);
        e = now;
    }
    assert!(min_vertex_y(&w).abs() < 1e-3);
}

#[test]
fn sliding_body_slows_monotonically() {
    let cube = ConvexPolyhedron::cuboid(Vec3::new(-0.25, 0.0, -0.25), Vec3::new(0.25, 0.5, 0.25));
    let mut w = loose_world(vec![cube.translated(Vec3::new(0.0, 0.001, 0.0))], MaterialKind::Wood);
    let id = w.bodies[0].id;
    w.body_mut(id).unwrap().linear_velocity = Vec3::new(3.0, 0.0, 0.0);
    let ke = trace(&mut w, 400);
    for k in 1..ke.len() {
        assert!(ke[k] <= ke[k - 1] + 1e-12, "step {k}: {} > {}", ke[k], ke[k - 1]);
    }
    assert!(ke.last().unwrap() < &1e-6);
}

#[test]
fn rubble_pile_settles_above_ground() {
    let wall = ConvexPolyhedron::cuboid(Vec3::new(0.0, 0.5, 0.0), Vec3::new(2.0, 2.5, 0.3));
    let r = rubble_forge::fracture::fracture_solid(
        &wall,
        &rubble_forge::fracture::FracturePattern::UniformVoronoi { site_count: 12, seed: 3 },
    )
    .unwrap();
    let mut w = loose_world(r.fragments, MaterialKind::Brick);
    assert_eq!(w.bodies.len(), 12);
    trace(&mut w, 3000);
    let out = w.settle_default().unwrap();
    assert!(out.settled);
    assert!(min_vertex_y(&w) >= -0.01);
}

#[test]
fn non_finite_state_is_reported() {
    let mut w = loose_world(vec![ConvexPolyhedron::unit_cube().translated(Vec3::new(0.0, 3.0, 0.0))], MaterialKind::Wood);
    let id = w.bodies[0].id;
    w.body_mut(id).unwrap().linear_velocity = Vec3::new(f64::NAN, 0.0, 0.0);
    assert_eq!(w.step(w.config.dt), Err(PhysicsError::NonFinite(id)));
    assert_eq!(w.step(0.0), Err(PhysicsError::InvalidStep(0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dropped_fragment_settles_on_ground(
        size in (0.1f64..0.8, 0.1f64..0.8, 0.1f64..0.8),
        height in 0.2f64..4.0,
        axis in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        angle in 0.0f64..3.1,
    ) {
        let half = Vec3::new(size.0, size.1, size.2) * 0.5;
        let rot = Vec3::new(axis.0, axis.1, axis.2).try_normalize().map_or(Quat::IDENTITY, |a| Quat::from_axis_angle(a, angle));
        let frag = ConvexPolyhedron::cuboid(-half, half).transformed(&Transform::new(Vec3::ZERO, rot));
        let lift = height - frag.aabb().min.y;
        let mut w = loose_world(vec![frag.translated(Vec3::new(0.0, lift, 0.0))], MaterialKind::Concrete);

        let contact = first_contact(&mut w, 2000);
        let ke = trace(&mut w, 3000);
        prop_assert!(contact < 2000);
        // Once on the ground, energy only leaves the body over any 50-step window.
        for k in 0..ke.len() - 50 {
            prop_assert!(ke[k + 50] <= ke[k] + 1e-9, "window at {}: {} -> {}", k, ke[k], ke[k + 50]);
        }
        let out = w.settle_default().unwrap();
        prop_assert!(out.settled);
        prop_assert!(min_vertex_y(&w).abs() <= 1e-3, "rest height {}", min_vertex_y(&w));
    }

    #[test]
    fn simulation_is_reproducible(seed in 0u64..1000) {
        let wall = ConvexPolyhedron::cuboid(Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.5, 2.0, 0.3));
        let r = rubble_forge::fracture::fracture_solid(
            &wall,
            &rubble_forge::fracture::FracturePattern::UniformVoronoi { site_count: 6, seed },
        ).unwrap();
        let run = || {
            let mut w = loose_world(r.fragments.clone(), MaterialKind::Brick);
            trace(&mut w, 300);
            w
        };
        prop_assert_eq!(run(), run());
    }
}
