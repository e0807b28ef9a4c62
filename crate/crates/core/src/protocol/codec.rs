use serde_json::{Map, Number, Value};

use super::{Message, ProtocolError, CATALOG, PROTOCOL_VERSION};
use crate::geom::{AnchorPair, Pose, UnitQuat, Vec3};
use crate::session::{Pin, PinId, Snapshot, UserId};

// ---- encoding ----

fn unencodable(field: &str, reason: &str) -> ProtocolError {
    ProtocolError::UnencodableMessage { field: field.to_owned(), reason: reason.to_owned() }
}

fn num(field: &str, x: f64) -> Result<Value, ProtocolError> {
    Number::from_f64(x).map(Value::Number).ok_or_else(|| unencodable(field, "non-finite number"))
}

fn nums(field: &str, xs: &[f64]) -> Result<Value, ProtocolError> {
    xs.iter().map(|&x| num(field, x)).collect::<Result<Vec<_>, _>>().map(Value::Array)
}

fn vec3(field: &str, v: Vec3) -> Result<Value, ProtocolError> {
    nums(field, &v.to_array())
}

fn pose(field: &str, p: &Pose) -> Result<Value, ProtocolError> {
    let mut m = Map::new();
    m.insert("p".into(), vec3(&format!("{field}.p"), p.position)?);
    m.insert("q".into(), nums(&format!("{field}.q"), &p.orientation.to_array())?);
    Ok(Value::Object(m))
}

fn pin(p: &Pin) -> Result<Value, ProtocolError> {
    let mut m = Map::new();
    m.insert("id".into(), p.id.0.into());
    m.insert("owner".into(), p.owner.0.into());
    m.insert("position".into(), vec3("pin.position", p.canonical_position)?);
    m.insert("color".into(), p.color.into());
    Ok(Value::Object(m))
}

fn snapshot_is_finite(s: &Snapshot) -> bool {
    s.clock.is_finite()
        && s.pivot.is_finite()
        && s.pins.iter().all(|p| p.canonical_position.is_finite())
        && s.users.iter().all(|u| {
            u.head.is_finite()
                && u.left_hand.is_finite()
                && u.right_hand.is_finite()
                && u.rho.radians().is_finite()
                && u.animation.is_none_or(|a| [a.rho_start, a.delta, a.started_at, a.duration].iter().all(|x| x.is_finite()))
        })
}

/// Serializes a message to its canonical one-line frame.
pub fn encode(msg: &Message) -> Result<String, ProtocolError> {
    let mut m = Map::new();
    m.insert("type".into(), msg.type_name().into());
    m.insert("version".into(), PROTOCOL_VERSION.into());
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_owned(), v);
    };
    match msg {
        Message::Hello { name } => put("name", name.as_str().into()),
        Message::CalibrateRequest { pairs } => {
            let mut arr = Vec::with_capacity(pairs.len());
            for (i, p) in pairs.iter().enumerate() {
                let mut o = Map::new();
                o.insert("local".into(), vec3(&format!("pairs[{i}].local"), p.local)?);
                o.insert("shared".into(), vec3(&format!("pairs[{i}].shared"), p.shared)?);
                arr.push(Value::Object(o));
            }
            put("pairs", Value::Array(arr));
        }
        Message::Pose { head, lh, rh, seq } => {
            put("head", pose("head", head)?);
            put("lh", pose("lh", lh)?);
            put("rh", pose("rh", rh)?);
            put("seq", (*seq).into());
        }
        Message::AlignRequest { ray_origin, ray_dir } => {
            put("ray_origin", vec3("ray_origin", *ray_origin)?);
            put("ray_dir", vec3("ray_dir", *ray_dir)?);
        }
        Message::PinPlace { world } => put("world", vec3("world", *world)?),
        Message::Leave => {}
        Message::Welcome { user_id, color, snapshot } => {
            if !snapshot_is_finite(snapshot) {
                return Err(unencodable("snapshot", "non-finite number"));
            }
            put("user_id", user_id.0.into());
            put("color", (*color).into());
            put("snapshot", snapshot.to_value());
        }
        Message::CalibrateResult { yaw, translation, rms } => {
            put("yaw", num("yaw", *yaw)?);
            put("translation", vec3("translation", *translation)?);
            put("rms", num("rms", *rms)?);
        }
        Message::UserJoined { id, name, color } => {
            put("id", id.0.into());
            put("name", name.as_str().into());
            put("color", (*color).into());
        }
        Message::UserLeft { id } => put("id", id.0.into()),
        Message::PoseUpdate { id, head, lh, rh, rho, seq } => {
            put("id", id.0.into());
            put("head", pose("head", head)?);
            put("lh", pose("lh", lh)?);
            put("rh", pose("rh", rh)?);
            put("rho", num("rho", *rho)?);
            put("seq", (*seq).into());
        }
        Message::AlignStarted { follower, leader, rho_start, delta, duration, t0 } => {
            put("follower", follower.0.into());
            put("leader", leader.0.into());
            put("rho_start", num("rho_start", *rho_start)?);
            put("delta", num("delta", *delta)?);
            put("duration", num("duration", *duration)?);
            put("t0", num("t0", *t0)?);
        }
        Message::AlignCompleted { follower, rho } => {
            put("follower", follower.0.into());
            put("rho", num("rho", *rho)?);
        }
        Message::PinAdded { pin: p } => put("pin", pin(p)?),
        Message::Error { code, detail } => {
            put("code", code.as_str().into());
            put("detail", detail.as_str().into());
        }
    }
    Ok(Value::Object(m).to_string())
}

// ---- decoding ----

fn violation(field: &str, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::SchemaViolation { field: field.to_owned(), reason: reason.into() }
}

/// Walks one JSON object, tracking which keys were consumed so leftovers can
/// be reported.
struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
    used: Vec<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(value: &'a Value, prefix: &str) -> Result<Self, ProtocolError> {
        let map = value.as_object().ok_or_else(|| violation(prefix, "expected an object"))?;
        Ok(Self { map, prefix: prefix.to_owned(), used: Vec::new() })
    }

    fn path(&self, key: &str) -> String {
        if self.prefix.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{key}", self.prefix)
        }
    }

    fn get(&mut self, key: &'a str) -> Result<&'a Value, ProtocolError> {
        self.used.push(key);
        self.map.get(key).ok_or_else(|| violation(&self.path(key), "missing field"))
    }

    fn f64(&mut self, key: &'a str) -> Result<f64, ProtocolError> {
        let path = self.path(key);
        number(self.get(key)?, &path)
    }

    fn u64(&mut self, key: &'a str) -> Result<u64, ProtocolError> {
        let path = self.path(key);
        self.get(key)?.as_u64().ok_or_else(|| violation(&path, "expected a non-negative integer"))
    }

    fn u32(&mut self, key: &'a str) -> Result<u32, ProtocolError> {
        let path = self.path(key);
        let v = self.u64(key)?;
        u32::try_from(v).map_err(|_| violation(&path, "integer out of range"))
    }

    fn string(&mut self, key: &'a str) -> Result<String, ProtocolError> {
        let path = self.path(key);
        self.get(key)?.as_str().map(str::to_owned).ok_or_else(|| violation(&path, "expected a string"))
    }

    fn vec3(&mut self, key: &'a str) -> Result<Vec3, ProtocolError> {
        let path = self.path(key);
        let [x, y, z] = fixed::<3>(self.get(key)?, &path)?;
        Ok(Vec3::new(x, y, z))
    }

    fn pose(&mut self, key: &'a str) -> Result<Pose, ProtocolError> {
        let path = self.path(key);
        pose_value(self.get(key)?, &path)
    }

    fn finish(self) -> Result<(), ProtocolError> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(extra) => Err(violation(&self.path(extra), "unknown field")),
            None => Ok(()),
        }
    }
}

fn number(v: &Value, path: &str) -> Result<f64, ProtocolError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(violation(path, "expected a finite number")),
    }
}

fn fixed<const N: usize>(v: &Value, path: &str) -> Result<[f64; N], ProtocolError> {
    let arr = v.as_array().ok_or_else(|| violation(path, format!("expected an array of {N} numbers")))?;
    if arr.len() != N {
        return Err(violation(path, format!("expected {N} elements, got {}", arr.len())));
    }
    let mut out = [0.0; N];
    for (i, (slot, x)) in out.iter_mut().zip(arr).enumerate() {
        *slot = number(x, &format!("{path}[{i}]"))?;
    }
    Ok(out)
}

fn pose_value(v: &Value, path: &str) -> Result<Pose, ProtocolError> {
    let mut f = Fields::new(v, path)?;
    let position = f.vec3("p")?;
    let qpath = f.path("q");
    let [w, x, y, z] = fixed::<4>(f.get("q")?, &qpath)?;
    let orientation = UnitQuat::new(w, x, y, z).map_err(|e| violation(&qpath, e.to_string()))?;
    f.finish()?;
    Ok(Pose::new(position, orientation))
}

/// Parses and validates one frame.
pub fn decode(frame: &str) -> Result<Message, ProtocolError> {
    let value: Value = serde_json::from_str(frame).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    if !value.is_object() {
        return Err(ProtocolError::MalformedFrame("top level is not an object".to_owned()));
    }
    let mut f = Fields::new(&value, "")?;
    let ty = f.string("type")?;
    let version = f.get("version")?;
    if version.as_u64() != Some(PROTOCOL_VERSION) {
        return Err(ProtocolError::VersionMismatch(version.to_string()));
    }
    if !CATALOG.contains(&ty.as_str()) {
        return Err(ProtocolError::UnknownType(ty));
    }
    let msg = match ty.as_str() {
        "hello" => Message::Hello { name: f.string("name")? },
        "calibrate_request" => {
            let arr = f.get("pairs")?.as_array().ok_or_else(|| violation("pairs", "expected an array"))?;
            let mut pairs = Vec::with_capacity(arr.len());
            for (i, item) in arr.iter().enumerate() {
                let mut p = Fields::new(item, &format!("pairs[{i}]"))?;
                let pair = AnchorPair::new(p.vec3("local")?, p.vec3("shared")?);
                p.finish()?;
                pairs.push(pair);
            }
            Message::CalibrateRequest { pairs }
        }
        "pose" => Message::Pose { head: f.pose("head")?, lh: f.pose("lh")?, rh: f.pose("rh")?, seq: f.u64("seq")? },
        "align_request" => Message::AlignRequest { ray_origin: f.vec3("ray_origin")?, ray_dir: f.vec3("ray_dir")? },
        "pin_place" => Message::PinPlace { world: f.vec3("world")? },
        "leave" => Message::Leave,
        "welcome" => {
            let user_id = UserId(f.u32("user_id")?);
            let color = f.u32("color")?;
            let snapshot: Snapshot =
                serde_json::from_value(f.get("snapshot")?.clone()).map_err(|e| violation("snapshot", e.to_string()))?;
            Message::Welcome { user_id, color, snapshot }
        }
        "calibrate_result" => {
            Message::CalibrateResult { yaw: f.f64("yaw")?, translation: f.vec3("translation")?, rms: f.f64("rms")? }
        }
        "user_joined" => Message::UserJoined { id: UserId(f.u32("id")?), name: f.string("name")?, color: f.u32("color")? },
        "user_left" => Message::UserLeft { id: UserId(f.u32("id")?) },
        "pose_update" => Message::PoseUpdate {
            id: UserId(f.u32("id")?),
            head: f.pose("head")?,
            lh: f.pose("lh")?,
            rh: f.pose("rh")?,
            rho: f.f64("rho")?,
            seq: f.u64("seq")?,
        },
        "align_started" => Message::AlignStarted {
            follower: UserId(f.u32("follower")?),
            leader: UserId(f.u32("leader")?),
            rho_start: f.f64("rho_start")?,
            delta: f.f64("delta")?,
            duration: f.f64("duration")?,
            t0: f.f64("t0")?,
        },
        "align_completed" => Message::AlignCompleted { follower: UserId(f.u32("follower")?), rho: f.f64("rho")? },
        "pin_added" => {
            let mut p = Fields::new(f.get("pin")?, "pin")?;
            let pin = Pin {
                id: PinId(p.u32("id")?),
                owner: UserId(p.u32("owner")?),
                canonical_position: p.vec3("position")?,
                color: p.u32("color")?,
            };
            p.finish()?;
            Message::PinAdded { pin }
        }
        "error" => Message::Error { code: f.string("code")?, detail: f.string("detail")? },
        _ => unreachable!("catalog checked above"),
    };
    f.finish()?;
    Ok(msg)
}

/// As [`decode`], for raw transport bytes.
pub fn decode_bytes(frame: &[u8]) -> Result<Message, ProtocolError> {
    let text = std::str::from_utf8(frame).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    decode(text)
}
