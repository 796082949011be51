//! Client for the newline-delimited logits protocol.
//!
//! One JSON object per line in each direction. The client opens with
//! `{"type":"hello","proto":1}` and the server answers with its vocabulary
//! size and special ids. Afterwards every request carries an `id` that the
//! reply must echo; one request is in flight at a time per connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use entcal_core::vocab::SpecialIds;
use entcal_core::{
    ConditionalDistribution, Error as CoreError, Fnv64, ModelProvider, Result as CoreResult,
    TokenId, TokenSequence, VocabInfo,
};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u64 = 1;
pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `tcp://host:port`
    Tcp(String),
    /// `exec:<command line>`: a child process speaking on stdin/stdout.
    Exec(String),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Endpoint> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(Error::Config("empty tcp address".into()));
            }
            Ok(Endpoint::Tcp(addr.to_string()))
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(Error::Config("empty exec command".into()));
            }
            Ok(Endpoint::Exec(cmd.to_string()))
        } else {
            Err(Error::Config(format!(
                "endpoint `{s}` is neither tcp://host:port nor exec:command"
            )))
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            Endpoint::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

/// Handshake fields advertised by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerInfo {
    pub vocab_size: usize,
    pub specials: SpecialIds,
    pub model: Option<String>,
    /// The raw hello line as received.
    pub hello: String,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> CoreError {
    CoreError::ProviderIo(e.to_string())
}

fn protocol(msg: impl Into<String>) -> CoreError {
    CoreError::Protocol(msg.into())
}

impl Connection {
    fn open(endpoint: &Endpoint) -> CoreResult<Connection> {
        let (reader, writer, child): (Box<dyn Read + Send>, Box<dyn Write + Send>, _) =
            match endpoint {
                Endpoint::Tcp(addr) => {
                    let stream = TcpStream::connect(addr).map_err(io_err)?;
                    let _ = stream.set_nodelay(true);
                    let reader = stream.try_clone().map_err(io_err)?;
                    (Box::new(reader), Box::new(stream), None)
                }
                Endpoint::Exec(cmd) => {
                    let mut parts = cmd.split_whitespace();
                    let program = parts.next().ok_or_else(|| io_err("empty command"))?;
                    let mut child = Command::new(program)
                        .args(parts)
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .spawn()
                        .map_err(io_err)?;
                    let stdin = child.stdin.take().expect("piped stdin");
                    let stdout = child.stdout.take().expect("piped stdout");
                    (Box::new(stdout), Box::new(stdin), Some(child))
                }
            };
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Connection {
            writer,
            replies: rx,
            next_id: 0,
            child,
        })
    }

    fn send(&mut self, msg: &Value) -> CoreResult<()> {
        let mut line = msg.to_string();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(io_err)?;
        self.writer.flush().map_err(io_err)
    }

    fn recv(&mut self, timeout: Duration) -> CoreResult<String> {
        match self.replies.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(io_err(e)),
            Err(RecvTimeoutError::Timeout) => Err(io_err("timed out waiting for reply")),
            Err(RecvTimeoutError::Disconnected) => Err(io_err("connection closed")),
        }
    }
}

fn parse_line(line: &str) -> CoreResult<Value> {
    let v: Value = serde_json::from_str(line).map_err(|e| protocol(format!("bad json: {e}")))?;
    if !v.is_object() {
        return Err(protocol("reply is not an object"));
    }
    Ok(v)
}

fn get_u64(v: &Value, key: &str) -> CoreResult<u64> {
    v.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| protocol(format!("missing integer `{key}`")))
}

fn get_id(v: &Value, key: &str, vocab_size: usize) -> CoreResult<TokenId> {
    let id = get_u64(v, key)?;
    if id >= vocab_size as u64 {
        return Err(protocol(format!(
            "`{key}` {id} outside vocabulary of {vocab_size}"
        )));
    }
    Ok(id as TokenId)
}

fn parse_hello(line: &str) -> CoreResult<ServerInfo> {
    let v = parse_line(line)?;
    if v.get("type").and_then(Value::as_str) != Some("hello") {
        return Err(protocol("expected hello reply"));
    }
    let proto = get_u64(&v, "proto")?;
    if proto != PROTOCOL_VERSION {
        return Err(protocol(format!(
            "server speaks protocol {proto}, client {PROTOCOL_VERSION}"
        )));
    }
    let vocab_size = get_u64(&v, "vocab_size")? as usize;
    if vocab_size == 0 {
        return Err(protocol("vocab_size is zero"));
    }
    let unk = get_id(&v, "unk", vocab_size)?;
    let specials = SpecialIds {
        unk,
        bos: get_id(&v, "bos", vocab_size)?,
        eos: get_id(&v, "eos", vocab_size)?,
        pad: if v.get("pad").is_some() {
            get_id(&v, "pad", vocab_size)?
        } else {
            unk
        },
    };
    let model = v.get("model").and_then(Value::as_str).map(String::from);
    Ok(ServerInfo {
        vocab_size,
        specials,
        model,
        hello: line.to_string(),
    })
}

/// A model served by another process.
pub struct RemoteProvider {
    endpoint: Endpoint,
    conn: Mutex<Connection>,
    info: ServerInfo,
    fingerprint: u64,
    timeout: Duration,
}

impl RemoteProvider {
    pub fn connect(endpoint: &Endpoint) -> CoreResult<RemoteProvider> {
        Self::connect_with(endpoint, HANDSHAKE_TIMEOUT, REQUEST_TIMEOUT)
    }

    pub fn connect_with(
        endpoint: &Endpoint,
        handshake_timeout: Duration,
        timeout: Duration,
    ) -> CoreResult<RemoteProvider> {
        let mut conn = Connection::open(endpoint)?;
        conn.send(&json!({"type": "hello", "proto": PROTOCOL_VERSION}))?;
        let info = parse_hello(&conn.recv(handshake_timeout)?)?;
        let mut h = Fnv64::new();
        h.write(b"remote");
        h.write_u64(info.vocab_size as u64);
        for id in [
            info.specials.unk,
            info.specials.bos,
            info.specials.eos,
            info.specials.pad,
        ] {
            h.write_u64(u64::from(id));
        }
        if let Some(m) = &info.model {
            h.write(m.as_bytes());
        }
        Ok(RemoteProvider {
            endpoint: endpoint.clone(),
            conn: Mutex::new(conn),
            info,
            fingerprint: h.finish(),
            timeout,
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn server_info(&self) -> &ServerInfo {
        &self.info
    }

    /// Sends one request and returns the matching reply object. Replies of
    /// type `error` become protocol errors carrying the server message.
    fn request(&self, mut msg: Value, expect: &str) -> CoreResult<Value> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| io_err("connection poisoned"))?;
        let id = conn.next_id;
        conn.next_id += 1;
        msg["id"] = json!(id);
        conn.send(&msg)?;
        let reply = parse_line(&conn.recv(self.timeout)?)?;
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(protocol(format!("reply id does not match request {id}")));
        }
        match reply.get("type").and_then(Value::as_str) {
            Some(t) if t == expect => Ok(reply),
            Some("error") => {
                let m = reply.get("message").and_then(Value::as_str).unwrap_or("");
                Err(protocol(format!("server error: {m}")))
            }
            other => Err(protocol(format!(
                "expected `{expect}` reply, got {other:?}"
            ))),
        }
    }

    /// The log-probability vector exactly as the server sent it.
    pub fn raw_logprobs(&self, context: &[TokenId]) -> CoreResult<Vec<f64>> {
        let reply = self.request(
            json!({"type": "next_logprobs", "context": context}),
            "logprobs",
        )?;
        let values = reply
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| protocol("logprobs reply without `values`"))?;
        if values.len() != self.info.vocab_size {
            return Err(protocol(format!(
                "expected {} log-probabilities, got {}",
                self.info.vocab_size,
                values.len()
            )));
        }
        values
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| protocol("non-numeric log-probability"))
            })
            .collect()
    }
}

impl ModelProvider for RemoteProvider {
    fn vocab_info(&self) -> VocabInfo {
        VocabInfo {
            size: self.info.vocab_size,
            specials: self.info.specials,
        }
    }

    fn next_distribution(&self, context: &[TokenId]) -> CoreResult<ConditionalDistribution> {
        if let Some(&id) = context
            .iter()
            .find(|&&id| id as usize >= self.info.vocab_size)
        {
            return Err(CoreError::InvalidId {
                id,
                vocab_size: self.info.vocab_size,
            });
        }
        ConditionalDistribution::from_remote_logprobs(context.len(), self.raw_logprobs(context)?)
    }

    fn encode(&self, text: &str) -> CoreResult<TokenSequence> {
        let reply = self.request(json!({"type": "encode", "text": text}), "ids")?;
        let ids = reply
            .get("values")
            .and_then(Value::as_array)
            .ok_or_else(|| protocol("ids reply without `values`"))?
            .iter()
            .map(|x| {
                x.as_u64()
                    .filter(|&id| id < self.info.vocab_size as u64)
                    .map(|id| id as TokenId)
                    .ok_or_else(|| protocol("invalid token id in ids reply"))
            })
            .collect::<CoreResult<Vec<_>>>()?;
        Ok(TokenSequence::target(ids))
    }

    fn decode(&self, ids: &[TokenId]) -> CoreResult<String> {
        let reply = self.request(json!({"type": "decode", "ids": ids}), "text")?;
        reply
            .get("value")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| protocol("text reply without `value`"))
    }

    fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Decimal form that parses back to the same double (17 significant
/// digits), as required for floats on the wire.
pub fn format_wire_f64(x: f64) -> String {
    format!("{x:.16e}")
}
