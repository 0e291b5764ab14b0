//! Newline-delimited JSON transport to an external model process.
//!
//! The engine opens with `{"protocol":1}` and expects the same line back.
//! Requests are `{"id":k,"x":[..]}`; replies `{"id":k,"y":<number|string>}`
//! may arrive in any order.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Prediction, PredictError};

pub const PROTOCOL_VERSION: u64 = 1;
/// Requests written between flushes and reads.
pub const MAX_BATCH: usize = 10_000;
const STDERR_KEEP: usize = 16 * 1024;

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Reply {
    id: u64,
    y: Value,
}

#[derive(Serialize, Deserialize)]
struct Handshake {
    protocol: u64,
}

pub struct SubprocessModel {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
    stderr: Arc<Mutex<String>>,
    stderr_thread: Option<JoinHandle<()>>,
    next_id: u64,
    line: String,
}

impl SubprocessModel {
    pub fn spawn(command: &str, args: &[String]) -> Result<Self, PredictError> {
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| PredictError::Spawn(format!("{command}: {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let stderr_thread = thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(k) = err_pipe.read(&mut buf) {
                if k == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|e| e.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..k]));
                if s.len() > STDERR_KEEP {
                    let mut cut = s.len() - STDERR_KEEP;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });
        let mut m = Self {
            child,
            stdin: Some(stdin),
            stdout,
            stderr,
            stderr_thread: Some(stderr_thread),
            next_id: 0,
            line: String::new(),
        };
        m.handshake()?;
        Ok(m)
    }

    fn handshake(&mut self) -> Result<(), PredictError> {
        let hello = serde_json::to_string(&Handshake {
            protocol: PROTOCOL_VERSION,
        })
        .expect("handshake serializes");
        let w = self.stdin.as_mut().expect("stdin open");
        let sent = writeln!(w, "{hello}").and_then(|_| w.flush());
        if let Err(e) = sent {
            return Err(self.transport(format!("writing handshake: {e}")));
        }
        self.read_line()?;
        match serde_json::from_str::<Handshake>(self.line.trim()) {
            Ok(h) if h.protocol == PROTOCOL_VERSION => Ok(()),
            Ok(h) => Err(self.transport(format!("child speaks protocol {}", h.protocol))),
            Err(_) => Err(self.transport(format!("bad handshake reply {:?}", self.line.trim()))),
        }
    }

    fn read_line(&mut self) -> Result<(), PredictError> {
        self.line.clear();
        match self.stdout.read_line(&mut self.line) {
            Ok(0) => Err(self.transport("child closed its output".into())),
            Ok(_) => Ok(()),
            Err(e) => Err(self.transport(format!("reading reply: {e}"))),
        }
    }

    /// Error carrying what the child wrote to stderr so far.
    fn transport(&mut self, message: String) -> PredictError {
        // give the stderr reader a moment if the child already exited
        if let Ok(Some(_)) = self.child.try_wait() {
            if let Some(h) = self.stderr_thread.take() {
                let _ = h.join();
            }
        }
        let stderr = self.stderr.lock().unwrap_or_else(|e| e.into_inner()).clone();
        PredictError::Transport { message, stderr }
    }

    pub fn predict_batch(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>, PredictError> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(MAX_BATCH) {
            out.extend(self.predict_chunk(chunk)?);
        }
        Ok(out)
    }

    fn predict_chunk(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>, PredictError> {
        let base = self.next_id;
        self.next_id += xs.len() as u64;
        let mut writer = self.stdin.take().expect("stdin open");
        // write and read concurrently so neither pipe can fill up and stall
        let (written, read) = thread::scope(|s| {
            let w = s.spawn(|| -> std::io::Result<()> {
                for (k, x) in xs.iter().enumerate() {
                    let line = serde_json::to_string(&Request {
                        id: base + k as u64,
                        x,
                    })
                    .map_err(std::io::Error::other)?;
                    writer.write_all(line.as_bytes())?;
                    writer.write_all(b"\n")?;
                }
                writer.flush()
            });
            let read = self.read_replies(base, xs.len());
            (w.join().expect("writer thread"), read)
        });
        self.stdin = Some(writer);
        let got = read?;
        if let Err(e) = written {
            return Err(self.transport(format!("writing requests: {e}")));
        }
        Ok(got)
    }

    fn read_replies(&mut self, base: u64, n: usize) -> Result<Vec<Prediction>, PredictError> {
        let mut slots: Vec<Option<Prediction>> = vec![None; n];
        for _ in 0..n {
            self.read_line()?;
            let reply: Reply = match serde_json::from_str(self.line.trim()) {
                Ok(r) => r,
                Err(e) => {
                    let msg = format!("malformed reply {:?}: {e}", self.line.trim());
                    return Err(self.transport(msg));
                }
            };
            let k = reply.id.wrapping_sub(base) as usize;
            if reply.id < base || k >= n || slots[k].is_some() {
                return Err(self.transport(format!("unexpected reply id {}", reply.id)));
            }
            slots[k] = Some(match reply.y {
                Value::Number(v) => match v.as_f64() {
                    Some(f) => Prediction::Score(f),
                    None => return Err(self.transport(format!("unrepresentable score {v}"))),
                },
                Value::String(s) => Prediction::Label(s),
                other => return Err(self.transport(format!("reply y must be number or string, got {other}"))),
            });
        }
        Ok(slots.into_iter().map(|p| p.expect("all slots filled")).collect())
    }
}

impl Drop for SubprocessModel {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
        if let Some(h) = self.stderr_thread.take() {
            let _ = h.join();
        }
    }
}
