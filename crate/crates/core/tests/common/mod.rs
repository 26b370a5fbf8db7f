#![allow(dead_code)]

pub mod breakage;
pub mod bridge;
pub mod raycast;

use rubble_forge::collection::{GeometryCollection, Material, MaterialKind, MIN_JOINT_AREA};
use rubble_forge::geometry::ConvexPolyhedron;
use rubble_forge::physics::{FragmentRef, WorldState};
use rubble_forge::scene::{parse_scene, Scene};
use std::path::PathBuf;

pub fn sample_scene_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes").join("sample.json")
}

pub fn sample_scene() -> Scene {
    parse_scene(&std::fs::read(sample_scene_path()).unwrap()).unwrap()
}

/// World holding `polys` as one collection with every unsupported fragment
/// already released into a rigid body.
pub fn loose_world(polys: Vec<ConvexPolyhedron>, kind: MaterialKind) -> WorldState {
    let gc = GeometryCollection::from_fragments(
        polys.into_iter().map(|p| (0, p)).collect(),
        Material::preset(kind),
        0,
        MIN_JOINT_AREA,
    );
    let mut world = WorldState::new(vec![gc], 0);
    let loose = world.collections[0].structural_support_pass();
    for f in loose {
        world.spawn_body(FragmentRef { collection: 0, fragment: f });
    }
    world
}
