//! Session messages and their two wire encodings.
//!
//! Control messages are JSON objects tagged by `kind`. Image frames travel
//! as separate binary blobs (a big-endian `u32` blob id followed by raw RGB
//! bytes) sent before the `obs` message that references them, or inline as
//! base64 when the client asked for it in `hello`.
//!
//! Over plain TCP every unit is framed as a big-endian `u32` length, a type
//! byte ([`FRAME_JSON`] or [`FRAME_BLOB`]) and the body; the length counts
//! the type byte and the body. Over WebSocket, JSON goes in text messages
//! and blobs in binary messages.

use std::io::{self, Read, Write};

use base64::Engine as _;
use panonav_core::engine::ObsValue;
use panonav_core::{Info, Observation};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_NAME: &str = "panonav";
pub const PROTOCOL_VERSION: u32 = 1;

pub const FRAME_JSON: u8 = 1;
pub const FRAME_BLOB: u8 = 2;
/// Upper bound on one framed unit; larger lengths are treated as corrupt.
pub const MAX_FRAME_BYTES: u32 = 64 << 20;

/// Machine-readable error codes carried by `error` messages.
pub mod codes {
    pub const MALFORMED: &str = "malformed";
    pub const NO_HELLO: &str = "no-hello";
    pub const UNSUPPORTED_VERSION: &str = "unsupported-version";
    pub const BAD_ID: &str = "bad-id";
    pub const BAD_CONFIG: &str = "bad-config";
    pub const NOT_RESET: &str = "not-reset";
    pub const EPISODE_OVER: &str = "episode-over";
    pub const INVALID_ACTION: &str = "invalid-action";
    pub const ENV_ERROR: &str = "env-error";
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    /// Frames as separate binary blobs.
    #[default]
    Binary,
    /// Frames inlined as base64 in the `obs` message.
    Base64,
}

/// Session settings a client may change; absent fields keep their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fov: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_length: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auto_reset: Option<bool>,
    /// Adds or removes the top-down map channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_image: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_image_size: Option<u32>,
    /// Full channel list by name; overrides `graph_image` when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observations: Option<Vec<String>>,
}

/// Where an image channel's pixels are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub channel: String,
    /// Position within multi-image channels such as thumbnails.
    pub index: usize,
    pub width: u32,
    pub height: u32,
    /// Blob id in binary mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<u32>,
    /// Base64 RGB bytes in base64 mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Hello {
        protocol: String,
        version: u32,
        #[serde(default)]
        frames: FrameMode,
        /// Server-filled: available games.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        games: Vec<String>,
        /// Server-filled: session number.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<u64>,
    },
    Configure {
        #[serde(flatten)]
        settings: SessionSettings,
    },
    Reset {},
    Step {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<[f64; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        discrete: Option<usize>,
    },
    Obs {
        reward: f64,
        done: bool,
        info: Info,
        frames: Vec<FrameRef>,
        /// Non-image channels by name.
        observation: serde_json::Map<String, serde_json::Value>,
    },
    Error {
        code: String,
        message: String,
    },
    Bye {},
}

impl Payload {
    pub fn hello(frames: FrameMode) -> Self {
        Payload::Hello {
            protocol: PROTOCOL_NAME.into(),
            version: PROTOCOL_VERSION,
            frames,
            games: Vec::new(),
            session: None,
        }
    }

    pub fn discrete(index: usize) -> Self {
        Payload::Step {
            action: None,
            discrete: Some(index),
        }
    }

    pub fn action(values: [f64; 4]) -> Self {
        Payload::Step {
            action: Some(values),
            discrete: None,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Payload::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Hello { .. } => "hello",
            Payload::Configure { .. } => "configure",
            Payload::Reset {} => "reset",
            Payload::Step { .. } => "step",
            Payload::Obs { .. } => "obs",
            Payload::Error { .. } => "error",
            Payload::Bye {} => "bye",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<u64>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Message {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// One unit of server output, in send order.
#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    Message(Message),
    Blob { id: u32, rgb: Vec<u8> },
}

/// A blob body: big-endian id then pixels.
pub fn encode_blob(id: u32, rgb: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + rgb.len());
    out.extend_from_slice(&id.to_be_bytes());
    out.extend_from_slice(rgb);
    out
}

pub fn decode_blob(body: &[u8]) -> io::Result<(u32, &[u8])> {
    if body.len() < 4 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "blob shorter than its id"));
    }
    let id = u32::from_be_bytes(body[..4].try_into().expect("4 bytes"));
    Ok((id, &body[4..]))
}

pub fn write_frame(w: &mut impl Write, kind: u8, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len() + 1)
        .ok()
        .filter(|&l| l <= MAX_FRAME_BYTES)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(&[kind])?;
    w.write_all(body)?;
    w.flush()
}

/// Reads one framed unit; `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> io::Result<Option<(u8, Vec<u8>)>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len == 0 || len > MAX_FRAME_BYTES {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("bad frame length {len}")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    let kind = buf.remove(0);
    Ok(Some((kind, buf)))
}

pub fn write_outgoing(w: &mut impl Write, out: &Outgoing) -> io::Result<()> {
    match out {
        Outgoing::Message(m) => write_frame(w, FRAME_JSON, m.to_json().as_bytes()),
        Outgoing::Blob { id, rgb } => write_frame(w, FRAME_BLOB, &encode_blob(*id, rgb)),
    }
}

/// JSON form of a non-image observation channel; `None` for images.
pub fn channel_json(value: &ObsValue) -> Option<serde_json::Value> {
    use serde_json::json;
    Some(match value {
        ObsValue::Image(_) | ObsValue::Images(_) => return None,
        ObsValue::Scalar(v) => json!(v),
        ObsValue::Label(v) => json!(v),
        ObsValue::LatLng(p) => json!({ "lat": p.lat, "lng": p.lng }),
        ObsValue::Pano(rec) => serde_json::to_value(rec.as_ref()).expect("records serialize"),
        ObsValue::Texts(t) => json!(t),
        ObsValue::Bins(b) => json!(b),
        ObsValue::Missing => serde_json::Value::Null,
    })
}

/// Splits an observation into frame references, blobs and JSON channels.
/// `next_blob` supplies monotonically increasing blob ids.
pub fn encode_observation(
    obs: &Observation,
    mode: FrameMode,
    next_blob: &mut u32,
) -> (Vec<FrameRef>, Vec<Outgoing>, serde_json::Map<String, serde_json::Value>) {
    let mut frames = Vec::new();
    let mut blobs = Vec::new();
    let mut values = serde_json::Map::new();
    for (kind, value) in &obs.channels {
        let images: Vec<_> = match value {
            ObsValue::Image(img) => vec![img],
            ObsValue::Images(imgs) => imgs.iter().collect(),
            other => {
                values.insert(kind.name().to_string(), channel_json(other).expect("non-image channel"));
                continue;
            }
        };
        for (index, img) in images.into_iter().enumerate() {
            let mut frame = FrameRef {
                channel: kind.name().to_string(),
                index,
                width: img.width(),
                height: img.height(),
                blob: None,
                data: None,
            };
            match mode {
                FrameMode::Binary => {
                    *next_blob += 1;
                    frame.blob = Some(*next_blob);
                    blobs.push(Outgoing::Blob {
                        id: *next_blob,
                        rgb: img.as_raw().clone(),
                    });
                }
                FrameMode::Base64 => {
                    frame.data = Some(base64::engine::general_purpose::STANDARD.encode(img.as_raw()));
                }
            }
            frames.push(frame);
        }
    }
    (frames, blobs, values)
}

/// Decodes base64 frame data.
pub fn decode_base64(data: &str) -> Result<Vec<u8>, base64::DecodeError> {
    base64::engine::general_purpose::STANDARD.decode(data)
}
