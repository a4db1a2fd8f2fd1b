//! Newline-delimited JSON over TCP, one thread per connection.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;

use super::{Store, StoreError};

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
enum Request {
    Put { content: String, token: String },
    Get { post_id: String, token: String },
    Delete { post_id: String, token: String },
}

fn error(code: &str) -> String {
    format!(r#"{{"status":"error","code":"{code}"}}"#)
}

fn quoted<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("strings serialize")
}

/// Response line (without the trailing newline) for one request line.
pub fn handle_line(store: &Store, line: &str) -> String {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(_) => return error("bad_request"),
    };
    match req {
        Request::Put { content, token } => match store.put(&content, &token) {
            Ok(id) => format!(r#"{{"status":"ok","post_id":{}}}"#, quoted(&id)),
            Err(StoreError::Empty(_)) => error("bad_request"),
            Err(_) => error("unavailable"),
        },
        Request::Get { post_id, token } => {
            format!(
                r#"{{"status":"ok","content":{}}}"#,
                quoted(&store.get(&post_id, &token))
            )
        }
        Request::Delete { post_id, token } => match store.delete(&post_id, &token) {
            Ok(()) => r#"{"status":"ok"}"#.to_string(),
            Err(StoreError::Unauthorized) => error("unauthorized"),
            Err(_) => error("unavailable"),
        },
    }
}

fn connection(store: &Store, stream: TcpStream) -> std::io::Result<()> {
    // one small response per request; do not wait to coalesce
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut out = BufWriter::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.write_all(handle_line(store, &line).as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}

/// Accepts connections until the listener fails.
pub fn serve(listener: TcpListener, store: Arc<Store>) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let store = Arc::clone(&store);
        std::thread::spawn(move || {
            let _ = connection(&store, stream);
        });
    }
    Ok(())
}

/// A server running on a background thread.
pub struct Server {
    addr: SocketAddr,
    _thread: JoinHandle<std::io::Result<()>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, store: Arc<Store>) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let thread = std::thread::spawn(move || serve(listener, store));
        Ok(Server {
            addr,
            _thread: thread,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}
