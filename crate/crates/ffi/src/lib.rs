//! C ABI over `rubble-forge`.
//!
//! Worlds and frames are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`RfStatus`]; on failure the
//! message is available from [`rf_last_error_message`] on the same thread.
//! Panics never cross the boundary; they surface as `RF_STATUS_PANIC`.

use rubble_forge::events::{apply_event, DestructionEvent, EventError};
use rubble_forge::geometry::{Quat, Transform, Vec3};
use rubble_forge::physics::WorldState;
use rubble_forge::scene::{instantiate, parse_scene, InstantiateError, Scene};
use rubble_forge::sensors::{export_frame, render, Camera, CameraIntrinsics, SensorFrame};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON.
    Parse = 3,
    /// Well-formed but invalid input (unknown names, overlaps, bad values).
    Semantic = 4,
    Fracture = 5,
    Physics = 6,
    OutOfRange = 7,
    Io = 8,
    Panic = 9,
}

/// Camera pose and intrinsics. `rotation` is a unit quaternion `[w, x, y, z]`;
/// the camera looks along its local −Z with +Y up.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct RfCamera {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
    pub width: u32,
    pub height: u32,
    pub horizontal_fov: f64,
    pub near: f64,
    pub far: f64,
}

/// Opaque world handle.
pub struct RfWorld {
    scene: Scene,
    world: WorldState,
}

/// Opaque rendered frame handle.
pub struct RfFrame {
    frame: SensorFrame,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn fail(status: RfStatus, msg: impl Into<String>) -> RfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RfStatus) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == RfStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RfStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, RfStatus> {
    if s.is_null() {
        return Err(fail(RfStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(RfStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// Message describing the last failure on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a scene document and instantiates its world (events are not run).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_world_from_scene_json(json: *const c_char, out: *mut *mut RfWorld) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let scene = match parse_scene(text.as_bytes()) {
            Ok(s) => s,
            Err(e) if e.is_syntax() => return fail(RfStatus::Parse, e.to_string()),
            Err(e) => return fail(RfStatus::Semantic, e.to_string()),
        };
        let world = match instantiate(&scene) {
            Ok(w) => w,
            Err(e @ InstantiateError::Fracture { .. }) => return fail(RfStatus::Fracture, e.to_string()),
            Err(e) => return fail(RfStatus::Semantic, e.to_string()),
        };
        *out = Box::into_raw(Box::new(RfWorld { scene, world }));
        RfStatus::Ok
    })
}

/// # Safety
/// `world` must come from [`rf_world_from_scene_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rf_world_free(world: *mut RfWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_fragment_count(world: *const RfWorld) -> usize {
    world.as_ref().map_or(0, |w| w.world.fragment_count())
}

/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_joint_count(world: *const RfWorld) -> usize {
    world.as_ref().map_or(0, |w| w.world.joint_count())
}

/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_released_count(world: *const RfWorld) -> usize {
    world.as_ref().map_or(0, |w| w.world.released_count())
}

/// Number of cameras declared by the world's scene.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_camera_count(world: *const RfWorld) -> usize {
    world.as_ref().map_or(0, |w| w.scene.cameras.len())
}

/// Runs one destruction event (JSON object with a `type` tag) to completion.
/// `out_released` may be null; otherwise it receives the number of fragments
/// the event released.
///
/// # Safety
/// `world` must be a live handle, `json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rf_world_apply_event_json(
    world: *mut RfWorld,
    json: *const c_char,
    out_released: *mut usize,
) -> RfStatus {
    guard(|| {
        let Some(w) = world.as_mut() else { return fail(RfStatus::NullPointer, "null world") };
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let event: DestructionEvent = match serde_json::from_str(text) {
            Ok(e) => e,
            Err(e) if e.is_data() => return fail(RfStatus::Semantic, e.to_string()),
            Err(e) => return fail(RfStatus::Parse, e.to_string()),
        };
        match apply_event(&mut w.world, &event) {
            Ok(report) => {
                if let Some(r) = out_released.as_mut() {
                    *r = report.released_count;
                }
                RfStatus::Ok
            }
            Err(EventError::Invalid(m)) => fail(RfStatus::OutOfRange, m),
            Err(e) => fail(RfStatus::Physics, e.to_string()),
        }
    })
}

/// Advances physics by `n` fixed steps.
///
/// # Safety
/// `world` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_step(world: *mut RfWorld, n: u64) -> RfStatus {
    guard(|| {
        let Some(w) = world.as_mut() else { return fail(RfStatus::NullPointer, "null world") };
        let dt = w.world.config.dt;
        for _ in 0..n {
            if let Err(e) = w.world.step(dt) {
                return fail(RfStatus::Physics, e.to_string());
            }
        }
        RfStatus::Ok
    })
}

/// Steps until the rubble comes to rest. `out_steps` may be null.
///
/// # Safety
/// `world` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_world_settle(world: *mut RfWorld, out_steps: *mut usize) -> RfStatus {
    guard(|| {
        let Some(w) = world.as_mut() else { return fail(RfStatus::NullPointer, "null world") };
        match w.world.settle_default() {
            Ok(o) => {
                if let Some(s) = out_steps.as_mut() {
                    *s = o.steps;
                }
                RfStatus::Ok
            }
            Err(e) => fail(RfStatus::Physics, e.to_string()),
        }
    })
}

unsafe fn render_into(w: &RfWorld, camera: Camera, out: *mut *mut RfFrame) -> RfStatus {
    if let Err(m) = camera.intrinsics.validate() {
        return fail(RfStatus::OutOfRange, m);
    }
    let frame = render(&w.world, &camera, &w.scene.environment);
    *out = Box::into_raw(Box::new(RfFrame { frame }));
    RfStatus::Ok
}

/// Renders scene camera `camera_index`.
///
/// # Safety
/// `world` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_world_render(world: *const RfWorld, camera_index: usize, out: *mut *mut RfFrame) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(w) = world.as_ref() else { return fail(RfStatus::NullPointer, "null world") };
        let Some(&camera) = w.scene.cameras.get(camera_index) else {
            return fail(RfStatus::OutOfRange, format!("camera index {camera_index} out of range"));
        };
        render_into(w, camera, out)
    })
}

/// Renders from an arbitrary camera.
///
/// # Safety
/// `world`, `camera` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rf_world_render_camera(
    world: *const RfWorld,
    camera: *const RfCamera,
    out: *mut *mut RfFrame,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let (Some(w), Some(c)) = (world.as_ref(), camera.as_ref()) else {
            return fail(RfStatus::NullPointer, "null world or camera");
        };
        let [qw, qx, qy, qz] = c.rotation;
        let pose = Transform {
            translation: Vec3::new(c.translation[0], c.translation[1], c.translation[2]),
            rotation: Quat { w: qw, x: qx, y: qy, z: qz },
        };
        if !pose.rotation.is_unit() {
            return fail(RfStatus::OutOfRange, "camera rotation must be a unit quaternion");
        }
        let intrinsics =
            CameraIntrinsics { width: c.width, height: c.height, horizontal_fov: c.horizontal_fov, near: c.near, far: c.far };
        render_into(w, Camera { pose, intrinsics }, out)
    })
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_width(frame: *const RfFrame) -> u32 {
    frame.as_ref().map_or(0, |f| f.frame.width)
}

/// # Safety
/// `frame` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_height(frame: *const RfFrame) -> u32 {
    frame.as_ref().map_or(0, |f| f.frame.height)
}

/// Row-major RGB bytes (`3·width·height`). Borrowed from the frame.
///
/// # Safety
/// `frame` must be null or a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_color(frame: *const RfFrame, len: *mut usize) -> *const u8 {
    slice_out(frame.as_ref().map(|f| f.frame.color.as_slice()), len)
}

/// Depth in meters along the optical axis; `+inf` where nothing was hit.
///
/// # Safety
/// `frame` must be null or a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_depth(frame: *const RfFrame, len: *mut usize) -> *const f32 {
    slice_out(frame.as_ref().map(|f| f.frame.depth.as_slice()), len)
}

/// Semantic labels; 0 is background.
///
/// # Safety
/// `frame` must be null or a live handle; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_segmentation(frame: *const RfFrame, len: *mut usize) -> *const u16 {
    slice_out(frame.as_ref().map(|f| f.frame.segmentation.as_slice()), len)
}

unsafe fn slice_out<T>(s: Option<&[T]>, len: *mut usize) -> *const T {
    if let Some(l) = len.as_mut() {
        *l = s.map_or(0, <[T]>::len);
    }
    s.map_or(ptr::null(), <[T]>::as_ptr)
}

/// Writes the frame's image triple and sidecar into `directory`.
///
/// # Safety
/// `frame` must be a live handle, `directory` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_export(frame: *const RfFrame, directory: *const c_char, index: usize) -> RfStatus {
    guard(|| {
        let Some(f) = frame.as_ref() else { return fail(RfStatus::NullPointer, "null frame") };
        let dir = match read_str(directory) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match export_frame(&f.frame, Path::new(dir), index) {
            Ok(_) => RfStatus::Ok,
            Err(e) => fail(RfStatus::Io, e.to_string()),
        }
    })
}

/// # Safety
/// `frame` must come from a render call and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rf_frame_free(frame: *mut RfFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}
