//! Play server: one thread and one environment per connection.
//!
//! A single port serves both transports. Connections whose first bytes are
//! an HTTP `GET` are upgraded to WebSocket; anything else is read as framed
//! TCP, whose first byte is the high byte of a length and so never `G`.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use tungstenite::Message as WsMessage;

use crate::protocol::{codes, encode_blob, read_frame, write_outgoing, Outgoing, FRAME_JSON};
use crate::session::{Session, World};

pub struct PlayServer {
    listener: TcpListener,
    world: World,
    sessions: Arc<AtomicU64>,
}

impl PlayServer {
    pub fn bind(addr: impl ToSocketAddrs, world: World) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            world,
            sessions: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("accept failed: {e}");
                    continue;
                }
            };
            let number = self.sessions.fetch_add(1, Ordering::Relaxed) + 1;
            let session = Session::new(self.world.clone(), number);
            thread::Builder::new()
                .name(format!("session-{number}"))
                .spawn(move || {
                    if let Err(e) = serve_connection(stream, session) {
                        eprintln!("session {number} ended: {e}");
                    }
                })?;
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> io::Result<SocketAddr> {
        let addr = self.local_addr()?;
        thread::Builder::new().name("accept".into()).spawn(move || self.run())?;
        Ok(addr)
    }
}

fn serve_connection(stream: TcpStream, session: Session) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut head = [0u8; 4];
    let n = stream.peek(&mut head)?;
    if n >= 3 && &head[..3] == b"GET" {
        serve_websocket(stream, session)
    } else {
        serve_framed(stream, session)
    }
}

fn serve_framed(stream: TcpStream, mut session: Session) -> io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    while let Some((kind, body)) = read_frame(&mut reader)? {
        let replies = if kind == FRAME_JSON {
            match std::str::from_utf8(&body) {
                Ok(text) => session.handle_text(text),
                Err(e) => session.reject(codes::MALFORMED, e.to_string()),
            }
        } else {
            session.reject(codes::MALFORMED, format!("unexpected frame type {kind}"))
        };
        for out in &replies {
            write_outgoing(&mut writer, out)?;
        }
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

fn serve_websocket(stream: TcpStream, mut session: Session) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let ws_err = |e: tungstenite::Error| io::Error::other(e.to_string());
    loop {
        let replies = match ws.read() {
            Ok(WsMessage::Text(text)) => session.handle_text(&text),
            Ok(WsMessage::Binary(_)) => session.reject(codes::MALFORMED, "clients send JSON text only"),
            Ok(WsMessage::Close(_)) => break,
            Ok(_) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => return Err(ws_err(e)),
        };
        for out in replies {
            let msg = match out {
                Outgoing::Message(m) => WsMessage::Text(m.to_json()),
                Outgoing::Blob { id, rgb } => WsMessage::Binary(encode_blob(id, &rgb)),
            };
            ws.write(msg).map_err(ws_err)?;
        }
        ws.flush().map_err(ws_err)?;
        if session.is_closed() {
            let _ = ws.close(None);
            let _ = ws.flush();
            break;
        }
    }
    Ok(())
}
