use rubble_forge::bridge::ServerHandle;
use rubble_forge::scene::{parse_scene, Scene};
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::Duration;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn scene() -> Scene {
    parse_scene(&std::fs::read(golden_dir().join("bridge_scene.json")).unwrap()).unwrap()
}

pub const NEW_POSE: &str = r#"{"translation":[0.25,1.25,-5.5],"rotation":[0.0,0.0,1.0,0.0]}"#;

/// The scripted client session: subscribe to depth and pose, step, move the
/// robot, apply a below-threshold event, then a few protocol errors and one
/// more step.
pub fn script() -> Vec<String> {
    vec![
        r#"{"op":"subscribe","topic":"/camera/depth"}"#.into(),
        r#"{"op":"subscribe","topic":"/robot/pose"}"#.into(),
        r#"{"op":"call_service","service":"/sim/step","args":{"n":2},"id":"step-1"}"#.into(),
        format!(r#"{{"op":"call_service","service":"/robot/set_pose","args":{{"pose":{NEW_POSE}}},"id":"pose-1"}}"#),
        r#"{"op":"call_service","service":"/sim/apply_event","args":{"event":{"type":"universal_strain","magnitude":1.5}},"id":"event-1"}"#.into(),
        r#"{"op":"call_service","service":"/sim/step","args":{"n":0},"id":"step-0"}"#.into(),
        r#"{not json"#.into(),
        r#"{"op":"teleport","id":"bad-op"}"#.into(),
        r#"{"op":"subscribe","topic":"/camera/thermal"}"#.into(),
        r#"{"op":"call_service","service":"/sim/explode","id":"bad-service"}"#.into(),
        r#"{"op":"unsubscribe","topic":"/robot/pose"}"#.into(),
        r#"{"op":"call_service","service":"/sim/step","args":{"n":1},"id":"step-2"}"#.into(),
    ]
}

pub fn transcript_lines(pairs: &[(String, Vec<Value>)]) -> String {
    let mut out = String::new();
    for (sent, received) in pairs {
        out.push_str(&json!({ "send": sent }).to_string());
        out.push('\n');
        for r in received {
            out.push_str(&json!({ "recv": r }).to_string());
            out.push('\n');
        }
    }
    out
}

pub fn check_golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("RUBBLE_FORGE_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("{} missing; rerun with RUBBLE_FORGE_BLESS=1", path.display()));
    assert!(expected == actual, "transcript differs from {}", path.display());
}

pub struct Client {
    pub reader: BufReader<TcpStream>,
    pub writer: TcpStream,
    marks: usize,
}

impl Client {
    pub fn connect(h: &ServerHandle) -> Client {
        let s = TcpStream::connect(h.local_addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
        Client { writer: s.try_clone().unwrap(), reader: BufReader::new(s), marks: 0 }
    }

    pub fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    pub fn recv(&mut self) -> Value {
        let mut line = String::new();
        assert!(self.reader.read_line(&mut line).unwrap() > 0, "connection closed");
        serde_json::from_str(&line).unwrap()
    }

    /// Sends `line` and collects every reply up to a marker. The marker is a
    /// server-only op, answered with an error status carrying its id; the
    /// server handles messages in order, so everything before it belongs to
    /// `line`.
    pub fn exchange(&mut self, line: &str) -> Vec<Value> {
        self.send(line);
        self.marks += 1;
        let mark = format!("mark-{}", self.marks);
        self.send(&json!({ "op": "status", "id": mark }).to_string());
        let mut out = Vec::new();
        loop {
            let m = self.recv();
            if m["id"] == mark.as_str() {
                return out;
            }
            out.push(m);
        }
    }
}
