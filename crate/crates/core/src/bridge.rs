//! Rosbridge-style message endpoint: newline-delimited JSON over TCP.
//!
//! Protocol handling lives in [`Hub`], a pure state machine mapping one client
//! line to the outgoing messages it causes. [`serve`] wraps it with one
//! world-owning thread that consumes a command queue plus a reader and a writer
//! thread per client.

use crate::events::{apply_event, DestructionEvent};
use crate::geometry::{Transform, Vec3};
use crate::physics::WorldState;
use crate::scene::{instantiate, parse_scene, EnvironmentConfig, Scene};
use crate::sensors::{render, Camera, CameraIntrinsics, SensorFrame};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 9090;

pub const TOPIC_COLOR: &str = "/camera/color";
pub const TOPIC_DEPTH: &str = "/camera/depth";
pub const TOPIC_SEG: &str = "/camera/seg";
pub const TOPIC_POSE: &str = "/robot/pose";
pub const TOPIC_RELEASED: &str = "/sim/released_count";

/// Topics clients may subscribe to, in publish order.
pub const TOPICS: [&str; 5] = [TOPIC_COLOR, TOPIC_DEPTH, TOPIC_SEG, TOPIC_POSE, TOPIC_RELEASED];

pub const SERVICE_STEP: &str = "/sim/step";
pub const SERVICE_EVENT: &str = "/sim/apply_event";
pub const SERVICE_SET_POSE: &str = "/robot/set_pose";
pub const SERVICE_RESET: &str = "/sim/reset";

pub const SERVICES: [&str; 4] = [SERVICE_STEP, SERVICE_EVENT, SERVICE_SET_POSE, SERVICE_RESET];

/// Upper bound on `/sim/step` `n` per call.
pub const MAX_STEPS_PER_CALL: u64 = 100_000;

const MAX_LINE_BYTES: usize = 64 << 20;
const POLL: Duration = Duration::from_millis(50);

pub type ClientId = u64;

/// Kinematic robot carrying one camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotBody {
    pub pose: Transform,
    pub intrinsics: CameraIntrinsics,
    /// Camera pose relative to the robot.
    pub mount: Transform,
}

impl RobotBody {
    pub fn default_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics { width: 160, height: 120, horizontal_fov: std::f64::consts::FRAC_PI_2, near: 0.05, far: 100.0 }
    }

    /// The robot starts at the scene's first camera, or at a default viewpoint
    /// looking at the origin.
    pub fn for_scene(scene: &Scene) -> RobotBody {
        match scene.cameras.first() {
            Some(c) => RobotBody { pose: c.pose, intrinsics: c.intrinsics, mount: Transform::IDENTITY },
            None => RobotBody {
                pose: Transform::look_at(Vec3::new(0.0, 1.5, 8.0), Vec3::new(0.0, 1.5, 0.0), Vec3::Y),
                intrinsics: RobotBody::default_intrinsics(),
                mount: Transform::IDENTITY,
            },
        }
    }

    pub fn camera(&self) -> Camera {
        Camera { pose: self.pose.compose(&self.mount), intrinsics: self.intrinsics }
    }
}

/// The simulation behind the bridge: the scene, its world and the robot.
#[derive(Clone, Debug)]
pub struct SimSession {
    scene: Option<Scene>,
    world: Option<WorldState>,
    pub robot: RobotBody,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("world not initialized; call /sim/reset with a scene")]
    Uninitialized,
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("{0}")]
    Failed(String),
}

impl SimSession {
    pub fn new(scene: Scene) -> Result<SimSession, crate::scene::InstantiateError> {
        let world = instantiate(&scene)?;
        Ok(SimSession { robot: RobotBody::for_scene(&scene), scene: Some(scene), world: Some(world) })
    }

    pub fn uninitialized() -> SimSession {
        SimSession { scene: None, world: None, robot: RobotBody::for_scene(&Scene::default()) }
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn environment(&self) -> EnvironmentConfig {
        self.scene.as_ref().map(|s| s.environment).unwrap_or_default()
    }

    /// Renders the robot camera's view of the current snapshot.
    pub fn render_robot(&self) -> Option<SensorFrame> {
        self.world.as_ref().map(|w| render(w, &self.robot.camera(), &self.environment()))
    }

    fn world_mut(&mut self) -> Result<&mut WorldState, ServiceError> {
        self.world.as_mut().ok_or(ServiceError::Uninitialized)
    }

    /// Runs one service call and returns its response values.
    pub fn call(&mut self, service: &str, args: &Value) -> Result<Value, ServiceError> {
        match service {
            SERVICE_STEP => {
                let n = match args.get("n") {
                    None => 1,
                    Some(v) => v.as_u64().ok_or_else(|| ServiceError::BadArgs("`n` must be a non-negative integer".into()))?,
                };
                if n > MAX_STEPS_PER_CALL {
                    return Err(ServiceError::BadArgs(format!("`n` must be at most {MAX_STEPS_PER_CALL}")));
                }
                let world = self.world_mut()?;
                let dt = world.config.dt;
                for _ in 0..n {
                    world.step(dt).map_err(|e| ServiceError::Failed(e.to_string()))?;
                }
                Ok(json!({ "step": world.step_count, "released_count": world.released_count() }))
            }
            SERVICE_EVENT => {
                let ev = args.get("event").ok_or_else(|| ServiceError::BadArgs("missing `event`".into()))?;
                let ev: DestructionEvent =
                    serde_json::from_value(ev.clone()).map_err(|e| ServiceError::BadArgs(e.to_string()))?;
                let world = self.world_mut()?;
                let report = apply_event(world, &ev).map_err(|e| ServiceError::Failed(e.to_string()))?;
                Ok(serde_json::to_value(report).expect("report serializes"))
            }
            SERVICE_SET_POSE => {
                let pose = args.get("pose").ok_or_else(|| ServiceError::BadArgs("missing `pose`".into()))?;
                let pose: Transform =
                    serde_json::from_value(pose.clone()).map_err(|e| ServiceError::BadArgs(e.to_string()))?;
                if !pose.translation.is_finite() || !pose.rotation.is_unit() {
                    return Err(ServiceError::BadArgs("pose needs a finite translation and a unit quaternion".into()));
                }
                self.world_mut()?;
                self.robot.pose = pose;
                Ok(json!({ "pose": pose }))
            }
            SERVICE_RESET => {
                let scene = match args.get("scene") {
                    Some(doc) => {
                        let bytes = serde_json::to_vec(doc).expect("value serializes");
                        parse_scene(&bytes).map_err(|e| ServiceError::BadArgs(e.to_string()))?
                    }
                    None => self.scene.clone().ok_or(ServiceError::Uninitialized)?,
                };
                *self = SimSession::new(scene).map_err(|e| ServiceError::Failed(e.to_string()))?;
                let w = self.world.as_ref().expect("just instantiated");
                Ok(json!({ "fragment_count": w.fragment_count(), "joint_count": w.joint_count() }))
            }
            other => Err(ServiceError::UnknownService(other.to_string())),
        }
    }
}

/// Base64 image payload in the shape of a ROS `sensor_msgs/Image`.
pub fn image_message(frame: &SensorFrame, topic: &str) -> Value {
    let (encoding, bytes_per_px, data) = match topic {
        TOPIC_COLOR => ("rgb8", 3, frame.color.clone()),
        TOPIC_DEPTH => ("32FC1", 4, frame.depth_bytes()),
        TOPIC_SEG => ("mono16", 2, frame.segmentation_bytes()),
        _ => unreachable!("not an image topic: {topic}"),
    };
    json!({
        "header": { "seq": frame.step, "frame_id": "robot_camera" },
        "width": frame.width,
        "height": frame.height,
        "encoding": encoding,
        "is_bigendian": 0,
        "step": frame.width * bytes_per_px,
        "data": BASE64.encode(data),
    })
}

/// Decodes the `data` field of an image message.
pub fn decode_image_data(msg: &Value) -> Option<Vec<u8>> {
    BASE64.decode(msg.get("data")?.as_str()?).ok()
}

pub fn status_error(msg: impl Into<String>, id: Option<&Value>) -> Value {
    let mut m = json!({ "op": "status", "level": "error", "msg": msg.into() });
    if let Some(id) = id {
        m["id"] = id.clone();
    }
    m
}

/// Protocol state shared by all clients: the session plus subscriptions and
/// advertisements.
#[derive(Debug)]
pub struct Hub {
    pub session: SimSession,
    subscriptions: BTreeMap<ClientId, BTreeSet<String>>,
    advertised: BTreeMap<ClientId, BTreeSet<String>>,
}

impl Hub {
    pub fn new(session: SimSession) -> Hub {
        Hub { session, subscriptions: BTreeMap::new(), advertised: BTreeMap::new() }
    }

    pub fn connect(&mut self, client: ClientId) {
        self.subscriptions.entry(client).or_default();
        self.advertised.entry(client).or_default();
    }

    pub fn disconnect(&mut self, client: ClientId) {
        self.subscriptions.remove(&client);
        self.advertised.remove(&client);
    }

    pub fn subscribers(&self, topic: &str) -> Vec<ClientId> {
        self.subscriptions.iter().filter(|(_, t)| t.contains(topic)).map(|(&c, _)| c).collect()
    }

    /// Handles one raw line from `client`; returns `(recipient, message)` pairs
    /// in send order.
    pub fn handle_line(&mut self, client: ClientId, line: &[u8]) -> Vec<(ClientId, Value)> {
        self.connect(client);
        let text = match std::str::from_utf8(line) {
            Ok(t) => t.trim(),
            Err(_) => return vec![(client, status_error("message is not valid UTF-8", None))],
        };
        if text.is_empty() {
            return Vec::new();
        }
        let msg: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return vec![(client, status_error(format!("malformed JSON: {e}"), None))],
        };
        let Some(obj) = msg.as_object() else {
            return vec![(client, status_error("message must be a JSON object", None))];
        };
        let id = obj.get("id");
        let Some(op) = obj.get("op").and_then(Value::as_str) else {
            return vec![(client, status_error("missing `op`", id))];
        };
        match op {
            "subscribe" | "unsubscribe" | "advertise" | "publish" => {
                let Some(topic) = obj.get("topic").and_then(Value::as_str) else {
                    return vec![(client, status_error(format!("`{op}` needs a `topic`"), id))];
                };
                self.topic_op(client, op, topic, obj, id)
            }
            "call_service" => {
                let Some(service) = obj.get("service").and_then(Value::as_str) else {
                    return vec![(client, status_error("`call_service` needs a `service`", id))];
                };
                let args = obj.get("args").cloned().unwrap_or(Value::Object(Map::new()));
                self.service_op(client, service, &args, id)
            }
            "status" | "service_response" => {
                vec![(client, status_error(format!("op `{op}` is only sent by the server"), id))]
            }
            other => vec![(client, status_error(format!("unsupported op `{other}`"), id))],
        }
    }

    fn topic_op(
        &mut self,
        client: ClientId,
        op: &str,
        topic: &str,
        obj: &Map<String, Value>,
        id: Option<&Value>,
    ) -> Vec<(ClientId, Value)> {
        match op {
            "subscribe" => {
                if !TOPICS.contains(&topic) {
                    return vec![(client, status_error(format!("unknown topic `{topic}`"), id))];
                }
                self.subscriptions.entry(client).or_default().insert(topic.to_string());
                Vec::new()
            }
            "unsubscribe" => {
                self.subscriptions.entry(client).or_default().remove(topic);
                Vec::new()
            }
            "advertise" => {
                if topic != TOPIC_POSE {
                    return vec![(client, status_error(format!("clients may only advertise `{TOPIC_POSE}`"), id))];
                }
                self.advertised.entry(client).or_default().insert(topic.to_string());
                Vec::new()
            }
            _ => {
                if !self.advertised.get(&client).is_some_and(|a| a.contains(topic)) {
                    return vec![(client, status_error(format!("topic `{topic}` was not advertised"), id))];
                }
                let args = json!({ "pose": obj.get("msg").cloned().unwrap_or(Value::Null) });
                match self.session.call(SERVICE_SET_POSE, &args) {
                    Ok(_) => self.publish_pose(),
                    Err(e) => vec![(client, status_error(e.to_string(), id))],
                }
            }
        }
    }

    fn service_op(&mut self, client: ClientId, service: &str, args: &Value, id: Option<&Value>) -> Vec<(ClientId, Value)> {
        let mut response = json!({ "op": "service_response", "service": service });
        if let Some(id) = id {
            response["id"] = id.clone();
        }
        match self.session.call(service, args) {
            Ok(values) => {
                response["result"] = json!(true);
                response["values"] = values;
            }
            Err(e) => {
                response["result"] = json!(false);
                response["values"] = json!({ "error": e.to_string() });
                return vec![(client, response)];
            }
        }
        let mut out = vec![(client, response)];
        match service {
            SERVICE_STEP => {
                out.extend(self.publish_sensors());
                out.extend(self.publish_pose());
                out.extend(self.publish_released());
            }
            SERVICE_EVENT => out.extend(self.publish_released()),
            SERVICE_SET_POSE => out.extend(self.publish_pose()),
            SERVICE_RESET => {
                out.extend(self.publish_pose());
                out.extend(self.publish_released());
            }
            _ => {}
        }
        out
    }

    fn publish(&self, topic: &str, msg: Value) -> Vec<(ClientId, Value)> {
        let m = json!({ "op": "publish", "topic": topic, "msg": msg });
        self.subscribers(topic).into_iter().map(|c| (c, m.clone())).collect()
    }

    fn publish_sensors(&self) -> Vec<(ClientId, Value)> {
        let wanted: Vec<&str> =
            [TOPIC_COLOR, TOPIC_DEPTH, TOPIC_SEG].into_iter().filter(|t| !self.subscribers(t).is_empty()).collect();
        if wanted.is_empty() {
            return Vec::new();
        }
        let Some(frame) = self.session.render_robot() else { return Vec::new() };
        wanted.into_iter().flat_map(|t| self.publish(t, image_message(&frame, t))).collect()
    }

    fn publish_pose(&self) -> Vec<(ClientId, Value)> {
        self.publish(TOPIC_POSE, serde_json::to_value(self.session.robot.pose).expect("pose serializes"))
    }

    fn publish_released(&self) -> Vec<(ClientId, Value)> {
        match self.session.world() {
            Some(w) => self.publish(TOPIC_RELEASED, json!({ "data": w.released_count() })),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
}

enum Command {
    Connect(ClientId, Sender<String>),
    Line(ClientId, Vec<u8>),
    Disconnect(ClientId),
}

/// A running server. Dropping the handle does not stop it; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
    world: Option<JoinHandle<Hub>>,
    clients: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Flag that stops the server when set.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    /// Blocks until the stop flag is set and every thread has exited; returns
    /// the final hub state.
    pub fn join(mut self) -> Hub {
        if let Some(a) = self.accept.take() {
            let _ = a.join();
        }
        let hub = self.world.take().expect("world thread").join().expect("world thread panicked");
        let clients = std::mem::take(&mut *self.clients.lock().expect("client list"));
        for c in clients {
            let _ = c.join();
        }
        hub
    }

    pub fn shutdown(self) -> Hub {
        self.stop.store(true, Ordering::SeqCst);
        self.join()
    }
}

/// Binds `addr` and starts serving `session`.
pub fn serve(session: SimSession, addr: impl ToSocketAddrs + std::fmt::Display) -> Result<ServerHandle, BridgeError> {
    let shown = addr.to_string();
    let bind_err = |source| BridgeError::Bind { addr: shown.clone(), source };
    let listener = TcpListener::bind(&addr).map_err(bind_err)?;
    listener.set_nonblocking(true).map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;
    log::info!("bridge listening on {local}");

    let stop = Arc::new(AtomicBool::new(false));
    let clients = Arc::new(Mutex::new(Vec::new()));
    let (tx, rx) = mpsc::channel::<Command>();

    let world = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("bridge-world".into())
            .spawn(move || world_loop(Hub::new(session), rx, stop))
            .expect("spawn world thread")
    };
    let accept = {
        let stop = stop.clone();
        let clients = clients.clone();
        thread::Builder::new()
            .name("bridge-accept".into())
            .spawn(move || accept_loop(listener, tx, stop, clients))
            .expect("spawn accept thread")
    };
    Ok(ServerHandle { addr: local, stop, accept: Some(accept), world: Some(world), clients })
}

fn world_loop(mut hub: Hub, rx: Receiver<Command>, stop: Arc<AtomicBool>) -> Hub {
    let mut outboxes: BTreeMap<ClientId, Sender<String>> = BTreeMap::new();
    while !stop.load(Ordering::SeqCst) {
        let cmd = match rx.recv_timeout(POLL) {
            Ok(c) => c,
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => break,
        };
        match cmd {
            Command::Connect(id, out) => {
                hub.connect(id);
                outboxes.insert(id, out);
            }
            Command::Disconnect(id) => {
                hub.disconnect(id);
                outboxes.remove(&id);
            }
            Command::Line(id, line) => {
                for (to, msg) in hub.handle_line(id, &line) {
                    if let Some(out) = outboxes.get(&to) {
                        let _ = out.send(msg.to_string());
                    }
                }
            }
        }
    }
    hub
}

fn accept_loop(listener: TcpListener, tx: Sender<Command>, stop: Arc<AtomicBool>, clients: Arc<Mutex<Vec<JoinHandle<()>>>>) {
    let mut next_id: ClientId = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                log::info!("client {next_id} connected from {peer}");
                if let Err(e) = start_client(next_id, stream, &tx, &stop, &clients) {
                    log::warn!("client {next_id}: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL / 5),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn start_client(
    id: ClientId,
    stream: TcpStream,
    tx: &Sender<Command>,
    stop: &Arc<AtomicBool>,
    clients: &Arc<Mutex<Vec<JoinHandle<()>>>>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    let _ = stream.set_nodelay(true);
    let mut write_half = stream.try_clone()?;
    let (out_tx, out_rx) = mpsc::channel::<String>();
    let _ = tx.send(Command::Connect(id, out_tx));

    let writer = thread::Builder::new().name(format!("bridge-w{id}")).spawn(move || {
        for line in out_rx {
            if write_half.write_all(line.as_bytes()).and_then(|_| write_half.write_all(b"\n")).and_then(|_| write_half.flush()).is_err() {
                break;
            }
        }
        let _ = write_half.shutdown(std::net::Shutdown::Write);
    })?;

    let tx = tx.clone();
    let stop = stop.clone();
    let reader = thread::Builder::new().name(format!("bridge-r{id}")).spawn(move || {
        let mut reader = BufReader::new(stream);
        let mut buf = Vec::new();
        while !stop.load(Ordering::SeqCst) {
            match reader.read_until(b'\n', &mut buf) {
                Ok(0) => break,
                Ok(_) if buf.ends_with(b"\n") => {
                    if tx.send(Command::Line(id, std::mem::take(&mut buf))).is_err() {
                        break;
                    }
                }
                Ok(_) => {}
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
                Err(_) => break,
            }
            if buf.len() > MAX_LINE_BYTES {
                log::warn!("client {id}: line exceeds {MAX_LINE_BYTES} bytes; closing");
                break;
            }
        }
        if !buf.is_empty() && !stop.load(Ordering::SeqCst) {
            let _ = tx.send(Command::Line(id, buf));
        }
        let _ = tx.send(Command::Disconnect(id));
        log::info!("client {id} disconnected");
    })?;

    let mut list = clients.lock().expect("client list");
    list.push(writer);
    list.push(reader);
    Ok(())
}
