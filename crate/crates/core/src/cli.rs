//! Batch driver: validation, dataset generation, the bridge server and
//! fracture statistics.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | syntax error or unreadable scene |
//! | 2    | semantic error (overlap, unknown name, out-of-range value) |
//! | 3    | bridge could not bind its port |
//! | 4    | runtime failure (fracture, physics, output I/O) |
//! | 64   | bad command line |
//! | 130  | interrupted |

use crate::bridge::{self, SimSession, DEFAULT_PORT};
use crate::events::{apply_event, EventReport};
use crate::physics::WorldState;
use crate::scene::{instantiate, parse_scene, serialize_scene, Archetype, Scene, SceneError};
use crate::sensors::{class_table, export_frame, render, ClassEntry, DepthEncoding, FrameFiles};
use crate::collection::MaterialKind;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

pub mod exit {
    pub const OK: i32 = 0;
    pub const SYNTAX: i32 = 1;
    pub const SEMANTIC: i32 = 2;
    pub const BIND: i32 = 3;
    pub const RUNTIME: i32 = 4;
    pub const USAGE: i32 = 64;
    pub const INTERRUPTED: i32 = 130;
}

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "RUBBLE_FORGE_THREADS";

/// Physics steps between consecutive frames of one camera.
pub const STEPS_BETWEEN_FRAMES: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "rubble-forge", version, about = "Destructible urban scenes and synthetic sensor datasets")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a scene file.
    Validate {
        #[arg(long, required_unless_present = "stdin", conflicts_with = "stdin")]
        scene: Option<PathBuf>,
        /// Read the scene from standard input.
        #[arg(long)]
        stdin: bool,
        #[arg(long)]
        json: bool,
    },
    /// Instantiate, run events, settle, render every camera and export frames.
    Generate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scene's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Frames per camera.
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long)]
        json: bool,
    },
    /// Serve the instantiated scene over the bridge protocol until interrupted.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print per-room fragment, joint and volume statistics.
    FractureStats {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(code: i32, kind: &str, message: impl Into<String>) -> CliError {
        CliError { code, kind: kind.into(), message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> CliError {
        CliError::new(exit::RUNTIME, "runtime", message)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> CliError {
        let code = if e.is_syntax() { exit::SYNTAX } else { exit::SEMANTIC };
        CliError::new(code, e.kind(), e.to_string())
    }
}

/// Reads and validates a scene; `None` reads standard input.
pub fn load_scene(path: Option<&Path>) -> Result<Scene, CliError> {
    let bytes = match path {
        Some(p) => std::fs::read(p).map_err(|e| CliError::new(exit::SYNTAX, "io", format!("{}: {e}", p.display())))?,
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(|e| CliError::new(exit::SYNTAX, "io", format!("stdin: {e}")))?;
            buf
        }
    };
    parse_scene(&bytes).map_err(|e| {
        let mut err = CliError::from(e);
        if let Some(p) = path {
            err.message = format!("{}: {}", p.display(), err.message);
        }
        err
    })
}

/// SHA-256 of the canonical serialization.
pub fn scene_hash(scene: &Scene) -> String {
    hex::encode(Sha256::digest(serialize_scene(scene).as_bytes()))
}

fn scene_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scene".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: usize,
    pub camera: usize,
    pub step: u64,
    pub files: FrameFiles,
    pub depth_encoding: DepthEncoding,
}

/// Index of one generated dataset; contains no wall-clock data so repeated
/// runs are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scene_name: String,
    pub scene_hash: String,
    pub seed: u64,
    pub fragment_count: usize,
    pub joint_count: usize,
    pub released_count: usize,
    pub events: Vec<EventReport>,
    pub frames: Vec<ManifestFrame>,
    pub classes: Vec<ClassEntry>,
    pub interrupted: bool,
}

/// Runs the full generation pipeline and writes `<out>/<name>/`.
pub fn generate(scene: &Scene, name: &str, out: &Path, frames: usize, cancel: &AtomicBool) -> Result<Manifest, CliError> {
    let dir = out.join(name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    let mut world = instantiate(scene).map_err(|e| CliError::runtime(e.to_string()))?;
    let mut manifest = Manifest {
        scene_name: name.to_string(),
        scene_hash: scene_hash(scene),
        seed: scene.seed,
        fragment_count: world.fragment_count(),
        joint_count: world.joint_count(),
        released_count: 0,
        events: Vec::new(),
        frames: Vec::new(),
        classes: class_table(),
        interrupted: false,
    };

    for (i, ev) in scene.events.iter().enumerate() {
        if cancel.load(Ordering::SeqCst) {
            manifest.interrupted = true;
            break;
        }
        let report = apply_event(&mut world, ev).map_err(|e| CliError::runtime(format!("event #{i}: {e}")))?;
        log::info!("event #{i} {}: released {}", report.event, report.released_count);
        manifest.events.push(report);
    }
    if !manifest.interrupted {
        world.settle_default().map_err(|e| CliError::runtime(e.to_string()))?;
        'frames: for f in 0..frames {
            if f > 0 {
                step_n(&mut world, STEPS_BETWEEN_FRAMES)?;
            }
            for (c, cam) in scene.cameras.iter().enumerate() {
                if cancel.load(Ordering::SeqCst) {
                    manifest.interrupted = true;
                    break 'frames;
                }
                let index = f * scene.cameras.len() + c;
                let frame = render(&world, cam, &scene.environment);
                let meta = export_frame(&frame, &dir, index).map_err(|e| CliError::runtime(e.to_string()))?;
                manifest.frames.push(ManifestFrame {
                    index,
                    camera: c,
                    step: meta.step,
                    files: meta.files,
                    depth_encoding: meta.depth_encoding,
                });
            }
        }
    }
    manifest.released_count = world.released_count();
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    json.push(b'\n');
    std::fs::write(&path, json).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

fn step_n(world: &mut WorldState, n: usize) -> Result<(), CliError> {
    let dt = world.config.dt;
    for _ in 0..n {
        world.step(dt).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomStats {
    pub room: usize,
    pub archetype: Archetype,
    pub material: MaterialKind,
    pub fragments: usize,
    pub joints: usize,
    pub solid_volume: f64,
    pub fragment_volume: f64,
    pub volume_error: f64,
}

pub fn fracture_stats(scene: &Scene) -> Result<Vec<RoomStats>, CliError> {
    let world = instantiate(scene).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(world
        .collections
        .iter()
        .zip(&scene.rooms)
        .enumerate()
        .map(|(i, (gc, room))| {
            let solid_volume: f64 = room.archetype.solids().iter().map(|s| s.volume()).sum();
            let fragment_volume = gc.volume();
            RoomStats {
                room: i,
                archetype: room.archetype,
                material: room.material,
                fragments: gc.fragments.len(),
                joints: gc.joints.len(),
                solid_volume,
                fragment_volume,
                volume_error: (fragment_volume - solid_volume).abs() / solid_volume,
            }
        })
        .collect())
}

fn with_seed(mut scene: Scene, seed: Option<u64>) -> Scene {
    if let Some(s) = seed {
        scene.seed = s;
    }
    scene
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("serializes"));
}

fn report_error(out: &mut dyn Write, json: bool, e: &CliError) -> i32 {
    if json {
        print_json(out, &serde_json::json!({ "ok": false, "error": { "kind": e.kind, "message": e.message } }));
    }
    eprintln!("error: {}", e.message);
    e.code
}

/// Executes a parsed command line, writing reports to `out`. `cancel` stops
/// long-running work.
pub fn run(cli: Cli, out: &mut dyn Write, cancel: Arc<AtomicBool>) -> i32 {
    match cli.command {
        Command::Validate { scene, stdin, json } => {
            let loaded = if stdin { load_scene(None) } else { load_scene(scene.as_deref()) };
            match loaded {
                Ok(s) => {
                    if json {
                        print_json(out, &serde_json::json!({ "ok": true, "rooms": s.rooms.len(), "events": s.events.len(), "cameras": s.cameras.len() }));
                    } else {
                        let _ = writeln!(out, "valid: {} rooms, {} events, {} cameras", s.rooms.len(), s.events.len(), s.cameras.len());
                    }
                    exit::OK
                }
                Err(e) => report_error(out, json, &e),
            }
        }
        Command::Generate { scene, out: dir, seed, frames, json } => {
            let loaded = match load_scene(Some(&scene)) {
                Ok(s) => with_seed(s, seed),
                Err(e) => return report_error(out, json, &e),
            };
            let name = scene_name(&scene);
            match generate(&loaded, &name, &dir, frames, &cancel) {
                Ok(m) => {
                    if json {
                        print_json(out, &m);
                    } else {
                        let _ = writeln!(out, "scene {} ({} fragments, {} joints)", m.scene_name, m.fragment_count, m.joint_count);
                        for (i, r) in m.events.iter().enumerate() {
                            let settle = r.settle.map(|s| s.steps).unwrap_or(0);
                            let _ = writeln!(
                                out,
                                "  event #{i} {}: released {}, broken joints {}, impulses {}, settle steps {settle}",
                                r.event, r.released_count, r.broken_joints, r.impulses_applied
                            );
                        }
                        let _ = writeln!(out, "released {} fragments; wrote {} frames to {}", m.released_count, m.frames.len(), dir.join(&name).display());
                    }
                    if m.interrupted {
                        eprintln!("interrupted; partial output written");
                        exit::INTERRUPTED
                    } else {
                        exit::OK
                    }
                }
                Err(e) => report_error(out, json, &e),
            }
        }
        Command::Serve { scene, port, host, seed } => {
            let loaded = match load_scene(Some(&scene)) {
                Ok(s) => with_seed(s, seed),
                Err(e) => return report_error(out, false, &e),
            };
            let session = match SimSession::new(loaded) {
                Ok(s) => s,
                Err(e) => return report_error(out, false, &CliError::runtime(e.to_string())),
            };
            let handle = match bridge::serve(session, format!("{host}:{port}")) {
                Ok(h) => h,
                Err(e) => return report_error(out, false, &CliError::new(exit::BIND, "bind", e.to_string())),
            };
            let _ = writeln!(out, "listening on {}", handle.local_addr());
            let _ = out.flush();
            while !cancel.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(50));
            }
            handle.shutdown();
            let _ = writeln!(out, "shut down");
            exit::OK
        }
        Command::FractureStats { scene, seed, json } => {
            let loaded = match load_scene(Some(&scene)) {
                Ok(s) => with_seed(s, seed),
                Err(e) => return report_error(out, json, &e),
            };
            match fracture_stats(&loaded) {
                Ok(stats) => {
                    if json {
                        print_json(out, &stats);
                    } else {
                        let _ = writeln!(out, "{:>4} {:<16} {:<9} {:>9} {:>7} {:>10} {:>10} {:>9}", "room", "archetype", "material", "fragments", "joints", "solid m3", "frag m3", "error");
                        for s in &stats {
                            let _ = writeln!(
                                out,
                                "{:>4} {:<16} {:<9} {:>9} {:>7} {:>10.4} {:>10.4} {:>8.4}%",
                                s.room,
                                s.archetype.name(),
                                s.material.name(),
                                s.fragments,
                                s.joints,
                                s.solid_volume,
                                s.fragment_volume,
                                s.volume_error * 100.0
                            );
                        }
                    }
                    exit::OK
                }
                Err(e) => report_error(out, json, &e),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs; clap usage errors map
/// to [`exit::USAGE`].
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, cancel: Arc<AtomicBool>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, cancel),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            }
        }
    }
}

/// Caps the global rayon pool from [`THREADS_ENV`] when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }
}
