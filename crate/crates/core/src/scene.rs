//! Room archetypes, grid placement, scene files and world instantiation.

use crate::collection::{build_collection, Material, MaterialKind};
use crate::events::{DestructionEvent, EventError};
use crate::fracture::{fracture_solid_with_id, FractureError, FracturePattern};
use crate::geometry::{ConvexPolyhedron, Vec3};
use crate::physics::WorldState;
use crate::rng::derive_seed;
use crate::sensors::Camera;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Smallest grid cell that keeps neighboring built-in rooms from overlapping (m).
pub const MIN_GRID_CELL: f64 = 4.5;

const WALL: f64 = 0.2;
const FLOOR_TOP: f64 = 0.2;
const WALL_TOP: f64 = 2.8;
const ROOF_TOP: f64 = 3.0;
const DOOR_WIDTH: f64 = 1.0;
const DOOR_TOP: f64 = FLOOR_TOP + 2.2;
const WINDOW_WIDTH: f64 = 1.0;
const SILL: f64 = FLOOR_TOP + 1.0;
const WINDOW_TOP: f64 = SILL + 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    SimpleDoor,
    LShapedWindow,
    PillarRoom,
    BeamRoom,
}

fn cuboid(x0: f64, x1: f64, y0: f64, y1: f64, z0: f64, z1: f64) -> ConvexPolyhedron {
    ConvexPolyhedron::cuboid(Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1))
}

/// Wall running along x at `z0..z1` with a doorway centered on `door_x`.
fn wall_x_with_door(x0: f64, x1: f64, z0: f64, z1: f64, door_x: f64) -> Vec<ConvexPolyhedron> {
    let (d0, d1) = (door_x - DOOR_WIDTH / 2.0, door_x + DOOR_WIDTH / 2.0);
    vec![
        cuboid(x0, d0, FLOOR_TOP, WALL_TOP, z0, z1),
        cuboid(d1, x1, FLOOR_TOP, WALL_TOP, z0, z1),
        cuboid(d0, d1, DOOR_TOP, WALL_TOP, z0, z1),
    ]
}

/// Wall running along z at `x0..x1` with a window centered on `window_z`.
fn wall_z_with_window(x0: f64, x1: f64, z0: f64, z1: f64, window_z: f64) -> Vec<ConvexPolyhedron> {
    let (w0, w1) = (window_z - WINDOW_WIDTH / 2.0, window_z + WINDOW_WIDTH / 2.0);
    vec![
        cuboid(x0, x1, FLOOR_TOP, WALL_TOP, z0, w0),
        cuboid(x0, x1, FLOOR_TOP, WALL_TOP, w1, z1),
        cuboid(x0, x1, FLOOR_TOP, SILL, w0, w1),
        cuboid(x0, x1, WINDOW_TOP, WALL_TOP, w0, w1),
    ]
}

impl Archetype {
    pub const ALL: [Archetype; 4] =
        [Archetype::SimpleDoor, Archetype::LShapedWindow, Archetype::PillarRoom, Archetype::BeamRoom];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::SimpleDoor => "simple_door",
            Archetype::LShapedWindow => "l_shaped_window",
            Archetype::PillarRoom => "pillar_room",
            Archetype::BeamRoom => "beam_room",
        }
    }

    /// Grid cells occupied at 0° rotation, relative to the anchor cell.
    /// Cell `i` runs along +X, `j` along +Z.
    pub fn footprint(self) -> &'static [(i32, i32)] {
        match self {
            Archetype::BeamRoom => &[(0, 0), (1, 0)],
            _ => &[(0, 0)],
        }
    }

    /// Axis-aligned slabs in the room's local frame. The anchor cell is centered
    /// on the origin, the ground is y = 0, and a single cell holds a 4 × 4 m room
    /// with 0.2 m walls, 3 m tall overall.
    pub fn solids(self) -> Vec<ConvexPolyhedron> {
        let h = 2.0;
        let inner = h - WALL;
        match self {
            Archetype::SimpleDoor | Archetype::PillarRoom => {
                let mut s = vec![
                    cuboid(-h, h, 0.0, FLOOR_TOP, -h, h),
                    cuboid(-h, h, WALL_TOP, ROOF_TOP, -h, h),
                    cuboid(-h, h, FLOOR_TOP, WALL_TOP, inner, h),
                    cuboid(-h, -inner, FLOOR_TOP, WALL_TOP, -inner, inner),
                    cuboid(inner, h, FLOOR_TOP, WALL_TOP, -inner, inner),
                ];
                s.extend(wall_x_with_door(-h, h, -h, -inner, 0.0));
                if self == Archetype::PillarRoom {
                    s.push(cuboid(-0.95, -0.65, FLOOR_TOP, WALL_TOP, -0.15, 0.15));
                    s.push(cuboid(0.65, 0.95, FLOOR_TOP, WALL_TOP, -0.15, 0.15));
                }
                s
            }
            Archetype::LShapedWindow => {
                // L outline: the 4 × 4 square minus its +x/+z quadrant.
                let mut s = vec![
                    cuboid(-h, h, 0.0, FLOOR_TOP, -h, 0.0),
                    cuboid(-h, 0.0, 0.0, FLOOR_TOP, 0.0, h),
                    cuboid(-h, h, WALL_TOP, ROOF_TOP, -h, 0.0),
                    cuboid(-h, 0.0, WALL_TOP, ROOF_TOP, 0.0, h),
                    cuboid(inner, h, FLOOR_TOP, WALL_TOP, -inner, -WALL),
                    cuboid(0.0, h, FLOOR_TOP, WALL_TOP, -WALL, 0.0),
                    cuboid(-WALL, 0.0, FLOOR_TOP, WALL_TOP, -WALL, inner),
                    cuboid(-h, 0.0, FLOOR_TOP, WALL_TOP, inner, h),
                ];
                s.extend(wall_x_with_door(-h, h, -h, -inner, 0.5));
                s.extend(wall_z_with_window(-h, -inner, -inner, inner, 0.0));
                s
            }
            Archetype::BeamRoom => {
                // Two cells along +x: x in [-2, 7] with the default 5 m grid.
                let x1 = 7.0;
                let mid = 2.5;
                let mut s = vec![
                    cuboid(-h, x1, 0.0, FLOOR_TOP, -h, h),
                    cuboid(-h, x1, WALL_TOP, ROOF_TOP, -h, h),
                    cuboid(-h, x1, FLOOR_TOP, WALL_TOP, inner, h),
                    cuboid(-h, -inner, FLOOR_TOP, WALL_TOP, -inner, inner),
                    cuboid(x1 - WALL, x1, FLOOR_TOP, WALL_TOP, -inner, inner),
                    // Wall supports and the beam they carry.
                    cuboid(mid - 0.2, mid + 0.2, FLOOR_TOP, DOOR_TOP, -inner, -inner + 0.3),
                    cuboid(mid - 0.2, mid + 0.2, FLOOR_TOP, DOOR_TOP, inner - 0.3, inner),
                    cuboid(mid - 0.2, mid + 0.2, DOOR_TOP, WALL_TOP, -inner, inner),
                ];
                s.extend(wall_x_with_door(-h, x1, -h, -inner, 0.0));
                s
            }
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rotation about +Y in quarter turns; stored in files as degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl TryFrom<i64> for Rotation {
    type Error = String;
    fn try_from(deg: i64) -> Result<Self, String> {
        match deg {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            other => Err(format!("rotation must be 0, 90, 180 or 270 degrees, got {other}")),
        }
    }
}

impl From<Rotation> for i64 {
    fn from(r: Rotation) -> i64 {
        r.degrees() as i64
    }
}

impl Rotation {
    pub fn degrees(self) -> u32 {
        self.quarter_turns() * 90
    }

    pub fn quarter_turns(self) -> u32 {
        self as u32
    }

    /// Exact rotation of a point (swaps and negations only).
    pub fn apply(self, p: Vec3) -> Vec3 {
        (0..self.quarter_turns()).fold(p, |p, _| Vec3::new(p.z, p.y, -p.x))
    }

    /// Rotation of a grid offset `(i, j)` matching [`Rotation::apply`].
    pub fn apply_cell(self, c: (i32, i32)) -> (i32, i32) {
        (0..self.quarter_turns()).fold(c, |(i, j), _| (j, -i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomInstance {
    pub archetype: Archetype,
    pub position: [i32; 2],
    #[serde(default)]
    pub rotation: Rotation,
    pub material: MaterialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<FracturePattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RoomInstance {
    /// Absolute grid cells covered by this room.
    pub fn cells(&self) -> Vec<(i32, i32)> {
        self.archetype
            .footprint()
            .iter()
            .map(|&c| {
                let (di, dj) = self.rotation.apply_cell(c);
                (self.position[0] + di, self.position[1] + dj)
            })
            .collect()
    }

    /// Seed used for this room's fractures: explicit, or derived from the
    /// scene seed, grid position and rotation.
    pub fn effective_seed(&self, scene_seed: u64) -> u64 {
        self.seed.unwrap_or_else(|| {
            derive_seed(
                scene_seed,
                &[self.position[0] as i64 as u64, self.position[1] as i64 as u64, self.rotation.degrees() as u64],
            )
        })
    }

    fn describe(&self, index: usize) -> String {
        format!("room #{index} ({} at [{}, {}])", self.archetype, self.position[0], self.position[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weather {
    /// Exponential extinction per meter.
    Fog { density: f64 },
    /// 0..1; darkens the color image.
    Rain { intensity: f64 },
    Sunshine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default = "default_weather")]
    pub weather: Weather,
    /// Hours in [0, 24).
    #[serde(default = "default_time")]
    pub time_of_day: f64,
}

fn default_weather() -> Weather {
    Weather::Sunshine
}

fn default_time() -> f64 {
    12.0
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig { weather: default_weather(), time_of_day: default_time() }
    }
}

fn default_cell() -> f64 {
    5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default = "default_cell")]
    pub grid_cell_size: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub rooms: Vec<RoomInstance>,
    #[serde(default)]
    pub events: Vec<DestructionEvent>,
    #[serde(default)]
    pub cameras: Vec<Camera>,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            grid_cell_size: default_cell(),
            seed: 0,
            environment: EnvironmentConfig::default(),
            rooms: Vec::new(),
            events: Vec::new(),
            cameras: Vec::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown key `{key}` at {path} (line {line}, column {column})")]
    UnknownKey { path: String, key: String, line: usize, column: usize },
    #[error("unknown archetype `{name}` at {path}")]
    UnknownArchetype { path: String, name: String },
    #[error("unknown material `{name}` at {path}")]
    UnknownMaterial { path: String, name: String },
    #[error("invalid value at {path} (line {line}, column {column}): {message}")]
    Schema { path: String, message: String, line: usize, column: usize },
    #[error("value out of range at {path}: {message}")]
    OutOfRange { path: String, message: String },
    #[error("{first_desc} and {second_desc} both occupy grid cell [{}, {}]", cell.0, cell.1)]
    Overlap { first: usize, second: usize, cell: (i32, i32), first_desc: String, second_desc: String },
}

impl SceneError {
    /// Stable identifier of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            SceneError::Syntax { .. } => "syntax",
            SceneError::UnknownKey { .. } => "unknown_key",
            SceneError::UnknownArchetype { .. } => "unknown_archetype",
            SceneError::UnknownMaterial { .. } => "unknown_material",
            SceneError::Schema { .. } => "schema",
            SceneError::OutOfRange { .. } => "out_of_range",
            SceneError::Overlap { .. } => "overlap",
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self, SceneError::Syntax { .. })
    }
}

fn backtick_word(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("").to_string()
}

/// Parses and validates a scene document. Defaults are filled in; unknown keys
/// are rejected.
pub fn parse_scene(document: &[u8]) -> Result<Scene, SceneError> {
    let text = std::str::from_utf8(document).map_err(|e| {
        let prefix = &document[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = prefix.len() - prefix.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
        SceneError::Syntax { line, column, message: "document is not valid UTF-8".into() }
    })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let scene: Scene = match serde_path_to_error::deserialize(&mut de) {
        Ok(s) => s,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            let (line, column) = (inner.line(), inner.column());
            let message = inner.to_string();
            let bare = message.split(" at line ").next().unwrap_or(&message).to_string();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => {
                    if bare.starts_with("unknown field") {
                        SceneError::UnknownKey { path, key: backtick_word(&bare), line, column }
                    } else if bare.starts_with("unknown variant") && path.ends_with("archetype") {
                        SceneError::UnknownArchetype { path, name: backtick_word(&bare) }
                    } else if bare.starts_with("unknown variant") && path.ends_with("material") {
                        SceneError::UnknownMaterial { path, name: backtick_word(&bare) }
                    } else if path.ends_with("rotation") && bare.starts_with("rotation must be") {
                        SceneError::OutOfRange { path, message: bare }
                    } else {
                        SceneError::Schema { path, message: bare, line, column }
                    }
                }
                _ => SceneError::Syntax { line, column, message: bare },
            });
        }
    };
    de.end().map_err(|e| SceneError::Syntax {
        line: e.line(),
        column: e.column(),
        message: "trailing characters after the scene document".into(),
    })?;
    validate_scene(&scene)?;
    Ok(scene)
}

/// Range and placement checks on an already-typed scene.
pub fn validate_scene(scene: &Scene) -> Result<(), SceneError> {
    let range = |path: String, message: String| SceneError::OutOfRange { path, message };
    if !(scene.grid_cell_size.is_finite() && scene.grid_cell_size >= MIN_GRID_CELL) {
        return Err(range("grid_cell_size".into(), format!("must be at least {MIN_GRID_CELL} m")));
    }
    let env = &scene.environment;
    if !(env.time_of_day >= 0.0 && env.time_of_day < 24.0) {
        return Err(range("environment.time_of_day".into(), "must lie in [0, 24)".into()));
    }
    match env.weather {
        Weather::Fog { density } if !(density.is_finite() && density >= 0.0) => {
            return Err(range("environment.weather.density".into(), "must be >= 0".into()));
        }
        Weather::Rain { intensity } if !(0.0..=1.0).contains(&intensity) => {
            return Err(range("environment.weather.intensity".into(), "must lie in [0, 1]".into()));
        }
        _ => {}
    }
    for (i, room) in scene.rooms.iter().enumerate() {
        if let Some(p) = &room.pattern {
            p.validate().map_err(|e| range(format!("rooms[{i}].pattern"), e.to_string()))?;
        }
    }
    for (i, e) in scene.events.iter().enumerate() {
        e.validate().map_err(|e| match e {
            EventError::Invalid(m) => range(format!("events[{i}]"), m),
            other => range(format!("events[{i}]"), other.to_string()),
        })?;
    }
    for (i, c) in scene.cameras.iter().enumerate() {
        c.intrinsics.validate().map_err(|m| range(format!("cameras[{i}].intrinsics"), m))?;
        if !c.pose.rotation.is_unit() {
            return Err(range(format!("cameras[{i}].pose.rotation"), "quaternion must have unit norm".into()));
        }
        if !c.pose.translation.is_finite() {
            return Err(range(format!("cameras[{i}].pose.translation"), "must be finite".into()));
        }
    }
    let mut occupied: BTreeMap<(i32, i32), usize> = BTreeMap::new();
    for (i, room) in scene.rooms.iter().enumerate() {
        for cell in room.cells() {
            if let Some(&first) = occupied.get(&cell) {
                return Err(SceneError::Overlap {
                    first,
                    second: i,
                    cell,
                    first_desc: scene.rooms[first].describe(first),
                    second_desc: room.describe(i),
                });
            }
            occupied.insert(cell, i);
        }
    }
    Ok(())
}

/// Canonical pretty-printed JSON form of a scene, with all defaults explicit.
pub fn serialize_scene(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serializes")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstantiateError {
    #[error("room #{room}, solid #{solid}: {source}")]
    Fracture {
        room: usize,
        solid: usize,
        #[source]
        source: FractureError,
    },
    #[error(transparent)]
    Invalid(#[from] SceneError),
}

/// Builds the pre-fractured world: every room fractured in its local frame,
/// rotated and moved to its grid cell, and assembled into one collection.
pub fn instantiate(scene: &Scene) -> Result<WorldState, InstantiateError> {
    validate_scene(scene)?;
    let collections = scene
        .rooms
        .par_iter()
        .enumerate()
        .map(|(room_index, room)| {
            let material = Material::preset(room.material);
            let pattern = room.pattern.clone().unwrap_or_else(|| material.default_pattern.clone());
            let room_seed = room.effective_seed(scene.seed);
            let offset = Vec3::new(
                room.position[0] as f64 * scene.grid_cell_size,
                0.0,
                room.position[1] as f64 * scene.grid_cell_size,
            );
            let mut results = Vec::new();
            for (k, solid) in room.archetype.solids().iter().enumerate() {
                let seed = derive_seed(room_seed, &[k as u64, pattern.seed()]);
                let mut r = fracture_solid_with_id(solid, &pattern.with_seed(seed), k)
                    .map_err(|source| InstantiateError::Fracture { room: room_index, solid: k, source })?;
                for frag in &mut r.fragments {
                    for v in &mut frag.vertices {
                        *v = room.rotation.apply(*v) + offset;
                    }
                }
                results.push(r);
            }
            let mut gc = build_collection(&results, &material, room_index);
            gc.archetype = Some(room.archetype);
            Ok(gc)
        })
        .collect::<Result<Vec<_>, InstantiateError>>()?;
    Ok(WorldState::new(collections, scene.seed))
}
