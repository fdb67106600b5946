//! Blocking framed-TCP client, for agents in other processes and for tests.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};

use crate::protocol::{
    decode_base64, decode_blob, read_frame, write_frame, FrameMode, FrameRef, Message, Payload, FRAME_BLOB, FRAME_JSON,
};

/// A server message with its image frames resolved to RGB bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub message: Message,
    pub frames: Vec<(FrameRef, Vec<u8>)>,
}

impl Reply {
    pub fn payload(&self) -> &Payload {
        &self.message.payload
    }

    /// Pixels of the first frame of `channel`.
    pub fn frame(&self, channel: &str) -> Option<&(FrameRef, Vec<u8>)> {
        self.frames.iter().find(|(f, _)| f.channel == channel)
    }

    /// `(code, message)` when the reply is an error.
    pub fn error(&self) -> Option<(&str, &str)> {
        match &self.message.payload {
            Payload::Error { code, message } => Some((code, message)),
            _ => None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    next_id: u64,
    blobs: HashMap<u32, Vec<u8>>,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            next_id: 0,
            blobs: HashMap::new(),
        })
    }

    /// Connects and completes the hello exchange.
    pub fn handshake(addr: impl ToSocketAddrs, frames: FrameMode) -> io::Result<(Self, Reply)> {
        let mut client = Self::connect(addr)?;
        let hello = client.request(Payload::hello(frames))?;
        if let Some((code, message)) = hello.error() {
            return Err(invalid(format!("hello refused: {code}: {message}")));
        }
        Ok((client, hello))
    }

    /// Sends a payload and returns the id it was given.
    pub fn send(&mut self, payload: Payload) -> io::Result<u64> {
        self.next_id += 1;
        let msg = Message {
            id: self.next_id,
            reply_to: None,
            payload,
        };
        self.send_raw(msg.to_json().as_bytes())?;
        Ok(self.next_id)
    }

    /// Sends arbitrary bytes as a JSON frame, valid or not.
    pub fn send_raw(&mut self, json: &[u8]) -> io::Result<()> {
        write_frame(&mut self.writer, FRAME_JSON, json)
    }

    /// Reads up to and including the next message, resolving its frames.
    pub fn recv(&mut self) -> io::Result<Reply> {
        loop {
            let (kind, body) = read_frame(&mut self.reader)?.ok_or_else(|| invalid("server closed the connection"))?;
            match kind {
                FRAME_BLOB => {
                    let (id, rgb) = decode_blob(&body)?;
                    self.blobs.insert(id, rgb.to_vec());
                }
                FRAME_JSON => {
                    let text = std::str::from_utf8(&body).map_err(|e| invalid(e.to_string()))?;
                    let message = Message::from_json(text).map_err(|e| invalid(e.to_string()))?;
                    let frames = match &message.payload {
                        Payload::Obs { frames, .. } => self.resolve(frames)?,
                        _ => Vec::new(),
                    };
                    return Ok(Reply { message, frames });
                }
                other => return Err(invalid(format!("unexpected frame type {other}"))),
            }
        }
    }

    /// Sends and waits for the reply, checking it answers this request.
    pub fn request(&mut self, payload: Payload) -> io::Result<Reply> {
        let id = self.send(payload)?;
        let reply = self.recv()?;
        if reply.message.reply_to != Some(id) {
            return Err(invalid(format!(
                "reply to {:?} while waiting for {id}",
                reply.message.reply_to
            )));
        }
        Ok(reply)
    }

    fn resolve(&mut self, frames: &[FrameRef]) -> io::Result<Vec<(FrameRef, Vec<u8>)>> {
        frames
            .iter()
            .map(|f| {
                let rgb = match (&f.blob, &f.data) {
                    (Some(id), _) => self.blobs.remove(id).ok_or_else(|| invalid(format!("missing blob {id}")))?,
                    (None, Some(data)) => decode_base64(data).map_err(|e| invalid(e.to_string()))?,
                    (None, None) => return Err(invalid(format!("frame {} has no pixels", f.channel))),
                };
                let expected = f.width as usize * f.height as usize * 3;
                if rgb.len() != expected {
                    return Err(invalid(format!("frame {} has {} bytes, expected {expected}", f.channel, rgb.len())));
                }
                Ok((f.clone(), rgb))
            })
            .collect()
    }
}
