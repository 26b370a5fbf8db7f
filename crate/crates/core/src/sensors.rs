//! Ray-cast camera producing color, depth and semantic segmentation rasters,
//! and their export as portable pixmaps.

use crate::collection::MaterialKind;
use crate::geometry::{Aabb, ConvexPolyhedron, HalfSpace, Transform, Vec3};
use crate::physics::WorldState;
use crate::scene::{Archetype, EnvironmentConfig, Weather};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// In-memory depth value for pixels that hit nothing within `[near, far]`.
pub const DEPTH_MISS: f32 = f32::INFINITY;
/// Quantized depth value reserved for misses.
pub const DEPTH_SENTINEL: u16 = 65535;
/// Highest quantization level used for real depths (maps to `far`).
pub const DEPTH_MAX_LEVEL: u16 = 65534;

const AMBIENT: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed image: {reason}")]
    Format { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SensorError + '_ {
    move |source| SensorError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Radians.
    pub horizontal_fov: f64,
    pub near: f64,
    pub far: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("width and height must be >= 1".into());
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err("need 0 < near < far".into());
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < std::f64::consts::PI) {
            return Err("horizontal_fov must lie in (0, pi)".into());
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame unit ray through the center of pixel (`u`, `v`); the camera
    /// looks along −Z with +Y up, rows top to bottom.
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vec3 {
        let tan_h = (self.horizontal_fov * 0.5).tan();
        let tan_v = tan_h * self.height as f64 / self.width as f64;
        let x = (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0) * tan_h;
        let y = (1.0 - 2.0 * (v as f64 + 0.5) / self.height as f64) * tan_v;
        Vec3::new(x, y, -1.0).try_normalize().expect("finite ray")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub pose: Transform,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub color: Vec<u8>,
    /// Meters along the optical axis; [`DEPTH_MISS`] for misses.
    pub depth: Vec<f32>,
    pub segmentation: Vec<u16>,
    pub pose: Transform,
    pub intrinsics: CameraIntrinsics,
    pub step: u64,
}

impl SensorFrame {
    pub fn depth_bytes(&self) -> Vec<u8> {
        self.depth.iter().flat_map(|d| d.to_le_bytes()).collect()
    }

    pub fn segmentation_bytes(&self) -> Vec<u8> {
        self.segmentation.iter().flat_map(|d| d.to_le_bytes()).collect()
    }
}

// Semantic classes -----------------------------------------------------------

const ARCHETYPE_SLOTS: usize = 5;

fn archetype_slot(a: Option<Archetype>) -> usize {
    match a {
        Some(a) => a as usize,
        None => ARCHETYPE_SLOTS - 1,
    }
}

/// Semantic label of a fragment: `1 + 2·(3·archetype + material) + released`.
/// Label 0 is background.
pub fn class_label(archetype: Option<Archetype>, material: MaterialKind, released: bool) -> u16 {
    (1 + 2 * (3 * archetype_slot(archetype) + material.index()) + released as usize) as u16
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub label: u16,
    pub name: String,
}

/// Every semantic class, in label order.
pub fn class_table() -> Vec<ClassEntry> {
    let mut out = vec![ClassEntry { label: 0, name: "background".into() }];
    let archetypes = Archetype::ALL.iter().map(|&a| (Some(a), a.name())).chain([(None, "unassigned")]);
    for (a, aname) in archetypes {
        for m in MaterialKind::ALL {
            for released in [false, true] {
                let state = if released { "released" } else { "intact" };
                out.push(ClassEntry {
                    label: class_label(a, m, released),
                    name: format!("{aname}/{}/{state}", m.name()),
                });
            }
        }
    }
    out.sort_by_key(|c| c.label);
    out
}

fn albedo(m: MaterialKind) -> Vec3 {
    match m {
        MaterialKind::Brick => Vec3::new(0.62, 0.28, 0.21),
        MaterialKind::Concrete => Vec3::new(0.62, 0.62, 0.60),
        MaterialKind::Wood => Vec3::new(0.55, 0.42, 0.24),
    }
}

// Lighting -------------------------------------------------------------------

/// Direction towards the sun and its intensity in `[0, 1]`.
///
/// Azimuth advances 15° per hour starting due east (+X) at 06:00, swinging
/// through −Z at noon; elevation follows a sinusoid peaking at 60° at 12:00.
/// Intensity is `max(0, sin(elevation))`, so nights are lit by ambient only.
pub fn sun(time_of_day: f64) -> (Vec3, f64) {
    let h = time_of_day - 6.0;
    let az = (15.0 * h).to_radians();
    let el = 60f64.to_radians() * (std::f64::consts::PI * h / 12.0).sin();
    let dir = Vec3::new(el.cos() * az.cos(), el.sin(), -el.cos() * az.sin());
    (dir, el.sin().max(0.0))
}

fn rain_multiplier(env: &EnvironmentConfig) -> f64 {
    match env.weather {
        Weather::Rain { intensity } => 1.0 - 0.4 * intensity.clamp(0.0, 1.0),
        _ => 1.0,
    }
}

// Acceleration structure -----------------------------------------------------

struct Item {
    planes: Vec<HalfSpace>,
    aabb: Aabb,
    label: u16,
    albedo: Vec3,
}

enum Node {
    Leaf { aabb: Aabb, start: usize, end: usize },
    Inner { aabb: Aabb, left: usize, right: usize },
}

impl Node {
    fn aabb(&self) -> &Aabb {
        match self {
            Node::Leaf { aabb, .. } | Node::Inner { aabb, .. } => aabb,
        }
    }
}

/// Immutable render snapshot of a world: fragment hulls in a BVH.
pub struct RenderScene {
    items: Vec<Item>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
struct Hit {
    t: f64,
    normal: Vec3,
    item: usize,
}

impl RenderScene {
    pub fn from_world(world: &WorldState) -> RenderScene {
        let items = world
            .fragment_ids()
            .map(|id| {
                let gc = &world.collections[id.collection];
                let frag = &gc.fragments[id.fragment];
                let poly = world.fragment_polyhedron(id);
                Item {
                    planes: poly.planes(),
                    aabb: poly.aabb(),
                    label: class_label(gc.archetype, gc.material.kind, frag.released),
                    albedo: albedo(gc.material.kind),
                }
            })
            .collect();
        RenderScene::build(items)
    }

    /// Snapshot from bare polyhedra, all with the same label and material.
    pub fn from_polyhedra(polys: &[ConvexPolyhedron], label: u16, material: MaterialKind) -> RenderScene {
        let items = polys
            .iter()
            .map(|p| Item { planes: p.planes(), aabb: p.aabb(), label, albedo: albedo(material) })
            .collect();
        RenderScene::build(items)
    }

    fn build(mut items: Vec<Item>) -> RenderScene {
        let mut nodes = Vec::new();
        if !items.is_empty() {
            let n = items.len();
            build_node(&mut items, 0, n, &mut nodes);
        }
        RenderScene { items, nodes }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn closest_hit(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            match node.aabb().ray_interval(origin, inv) {
                Some((t0, t1)) if t1 >= t_min && t0 <= limit => {}
                _ => continue,
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for idx in start..end {
                        if let Some((t, normal)) = ray_convex(&self.items[idx].planes, origin, dir, t_min) {
                            // Ties go to the lower item index so results are order independent.
                            let better = match best {
                                None => t <= limit,
                                Some(b) => t < b.t || (t == b.t && idx < b.item),
                            };
                            if better {
                                best = Some(Hit { t, normal, item: idx });
                                limit = t;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    fn occluded(&self, origin: Vec3, dir: Vec3) -> bool {
        self.closest_hit(origin, dir, 0.0, f64::INFINITY).is_some()
    }
}

fn build_node(items: &mut [Item], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let aabb = items[start..end].iter().fold(Aabb::EMPTY, |b, it| b.union(it.aabb));
    let idx = nodes.len();
    if end - start <= 4 {
        nodes.push(Node::Leaf { aabb, start, end });
        return idx;
    }
    let centers = items[start..end].iter().fold(Aabb::EMPTY, |b, it| b.grow(it.aabb.center()));
    let ext = centers.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    items[start..end].sort_by(|a, b| a.aabb.center().component(axis).total_cmp(&b.aabb.center().component(axis)));
    let mid = start + (end - start) / 2;
    nodes.push(Node::Leaf { aabb, start, end });
    let left = build_node(items, start, mid, nodes);
    let right = build_node(items, mid, end, nodes);
    nodes[idx] = Node::Inner { aabb, left, right };
    idx
}

/// Entry distance and entry-face normal of a ray into a convex hull given by
/// its face planes. Rays starting inside (entry before `t_min`) report no hit.
fn ray_convex(planes: &[HalfSpace], origin: Vec3, dir: Vec3, t_min: f64) -> Option<(f64, Vec3)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut normal = Vec3::ZERO;
    for p in planes {
        let denom = p.normal.dot(dir);
        let gap = p.offset - p.normal.dot(origin);
        if denom.abs() < 1e-15 {
            if gap < 0.0 {
                return None;
            }
            continue;
        }
        let t = gap / denom;
        if denom < 0.0 {
            if t > t_enter {
                t_enter = t;
                normal = p.normal;
            }
        } else if t < t_exit {
            t_exit = t;
        }
        if t_enter > t_exit {
            return None;
        }
    }
    (t_enter >= t_min && t_enter.is_finite()).then_some((t_enter, normal))
}

// Rendering ------------------------------------------------------------------

/// Renders the color/depth/segmentation triple of `world` seen from `camera`.
pub fn render(world: &WorldState, camera: &Camera, env: &EnvironmentConfig) -> SensorFrame {
    let scene = RenderScene::from_world(world);
    render_scene(&scene, camera, env, world.step_count)
}

pub fn render_scene(scene: &RenderScene, camera: &Camera, env: &EnvironmentConfig, step: u64) -> SensorFrame {
    let k = camera.intrinsics;
    let (w, h) = (k.width as usize, k.height as usize);
    let (sun_dir, sun_intensity) = sun(env.time_of_day);
    let daylight = (sun_intensity / 60f64.to_radians().sin()).min(1.0);
    let rain = rain_multiplier(env);
    let sky = Vec3::new(0.05, 0.06, 0.10).lerp(Vec3::new(0.53, 0.70, 0.92), daylight) * rain;
    let horizon = Vec3::new(0.70, 0.70, 0.72) * (0.3 + 0.7 * daylight);
    let fog_density = match env.weather {
        Weather::Fog { density } => density,
        _ => 0.0,
    };
    let origin = camera.pose.translation;

    let rows: Vec<(Vec<u8>, Vec<f32>, Vec<u16>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut color = Vec::with_capacity(w * 3);
            let mut depth = Vec::with_capacity(w);
            let mut seg = Vec::with_capacity(w);
            for u in 0..w {
                let local = k.pixel_ray(u as u32, v as u32);
                let axial = -local.z;
                let dir = camera.pose.apply_vector(local);
                let hit = scene.closest_hit(origin, dir, k.near / axial, k.far / axial);
                let (rgb, d, label) = match hit {
                    Some(hit) => {
                        let item = &scene.items[hit.item];
                        let d = hit.t * axial;
                        let mut light = AMBIENT;
                        let lambert = hit.normal.dot(sun_dir).max(0.0);
                        if sun_intensity > 0.0 && lambert > 0.0 {
                            let p = origin + dir * hit.t + hit.normal * 1e-4;
                            if !scene.occluded(p, sun_dir) {
                                light += (1.0 - AMBIENT) * sun_intensity * lambert;
                            }
                        }
                        let mut c = item.albedo * (light * rain);
                        if fog_density > 0.0 {
                            let f = (-fog_density * d).exp();
                            c = c * f + horizon * (1.0 - f);
                        }
                        (c, d as f32, item.label)
                    }
                    None => {
                        let c = if fog_density > 0.0 { horizon } else { sky };
                        (c, DEPTH_MISS, 0)
                    }
                };
                color.extend([to_byte(rgb.x), to_byte(rgb.y), to_byte(rgb.z)]);
                depth.push(d);
                seg.push(label);
            }
            (color, depth, seg)
        })
        .collect();

    let mut frame = SensorFrame {
        width: k.width,
        height: k.height,
        color: Vec::with_capacity(w * h * 3),
        depth: Vec::with_capacity(w * h),
        segmentation: Vec::with_capacity(w * h),
        pose: camera.pose,
        intrinsics: k,
        step,
    };
    for (c, d, s) in rows {
        frame.color.extend(c);
        frame.depth.extend(d);
        frame.segmentation.extend(s);
    }
    frame
}

fn to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

// Export ---------------------------------------------------------------------

pub fn quantize_depth(d: f32, near: f64, far: f64) -> u16 {
    if !d.is_finite() {
        return DEPTH_SENTINEL;
    }
    let t = ((d as f64 - near) / (far - near)).clamp(0.0, 1.0);
    (t * DEPTH_MAX_LEVEL as f64).round() as u16
}

pub fn dequantize_depth(q: u16, near: f64, far: f64) -> f32 {
    if q == DEPTH_SENTINEL {
        return DEPTH_MISS;
    }
    (near + (far - near) * q as f64 / DEPTH_MAX_LEVEL as f64) as f32
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameFiles {
    pub color: String,
    pub depth: String,
    pub segmentation: String,
    pub metadata: String,
}

impl FrameFiles {
    pub fn for_index(index: usize) -> FrameFiles {
        FrameFiles {
            color: format!("color_{index:06}.ppm"),
            depth: format!("depth_{index:06}.pgm"),
            segmentation: format!("seg_{index:06}.pgm"),
            metadata: format!("frame_{index:06}.json"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthEncoding {
    pub near: f64,
    pub far: f64,
    pub max_level: u16,
    pub sentinel: u16,
}

/// Sidecar describing one exported frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetadata {
    pub index: usize,
    pub step: u64,
    pub pose: Transform,
    pub intrinsics: CameraIntrinsics,
    pub depth_encoding: DepthEncoding,
    pub files: FrameFiles,
}

/// Writes the color (P6), depth (16-bit P5) and segmentation (16-bit P5) images
/// plus a JSON sidecar into `dir`.
pub fn export_frame(frame: &SensorFrame, dir: &Path, index: usize) -> Result<FrameMetadata, SensorError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = FrameFiles::for_index(index);
    let (w, h) = (frame.width, frame.height);
    let (near, far) = (frame.intrinsics.near, frame.intrinsics.far);

    let mut ppm = format!("P6\n{w} {h}\n255\n").into_bytes();
    ppm.extend_from_slice(&frame.color);
    write_file(&dir.join(&files.color), &ppm)?;

    let depth: Vec<u16> = frame.depth.iter().map(|&d| quantize_depth(d, near, far)).collect();
    write_file(&dir.join(&files.depth), &pgm16(w, h, &depth))?;
    write_file(&dir.join(&files.segmentation), &pgm16(w, h, &frame.segmentation))?;

    let meta = FrameMetadata {
        index,
        step: frame.step,
        pose: frame.pose,
        intrinsics: frame.intrinsics,
        depth_encoding: DepthEncoding { near, far, max_level: DEPTH_MAX_LEVEL, sentinel: DEPTH_SENTINEL },
        files,
    };
    let json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    write_file(&dir.join(&meta.files.metadata), &json)?;
    Ok(meta)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SensorError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn pgm16(w: u32, h: u32, data: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for v in data {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

fn read_header(path: &Path, bytes: &[u8], magic: &str) -> Result<(u32, u32, u32, usize), SensorError> {
    let bad = |reason: &str| SensorError::Format { path: path.to_path_buf(), reason: reason.into() };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
    }
    if fields[0] != magic {
        return Err(bad(&format!("expected {magic}, found {}", fields[0])));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
    // Exactly one whitespace byte separates the header from the raster.
    Ok((num(fields[1])?, num(fields[2])?, num(fields[3])?, pos + 1))
}

fn read_all(path: &Path) -> Result<Vec<u8>, SensorError> {
    let mut buf = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(io_err(path))?;
    Ok(buf)
}

/// Reads a binary 8-bit P6 image: (width, height, RGB bytes).
pub fn read_ppm(path: &Path) -> Result<(u32, u32, Vec<u8>), SensorError> {
    let bytes = read_all(path)?;
    let (w, h, max, off) = read_header(path, &bytes, "P6")?;
    let n = w as usize * h as usize * 3;
    if max != 255 || bytes.len() < off + n {
        return Err(SensorError::Format { path: path.to_path_buf(), reason: "short or non-8-bit raster".into() });
    }
    Ok((w, h, bytes[off..off + n].to_vec()))
}

/// Reads a binary 16-bit P5 image: (width, height, samples).
pub fn read_pgm16(path: &Path) -> Result<(u32, u32, Vec<u16>), SensorError> {
    let bytes = read_all(path)?;
    let (w, h, max, off) = read_header(path, &bytes, "P5")?;
    let n = w as usize * h as usize;
    if max != 65535 || bytes.len() < off + 2 * n {
        return Err(SensorError::Format { path: path.to_path_buf(), reason: "short or non-16-bit raster".into() });
    }
    let data = bytes[off..off + 2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, data))
}
