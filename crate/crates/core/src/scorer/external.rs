//! Client side of the external-scorer wire protocol.
//!
//! Newline-delimited JSON, one object per line. Each request is
//! `{"id": <int>, "text": <string>}`; the scorer answers every id with
//! `{"id": <int>, "score": <float>}`, in any order. The transport is either
//! the stdio of a spawned subprocess (requests on its stdin, responses on
//! its stdout, stdin closed after the batch) or a TCP connection whose write
//! half is shut down after the batch.
//!
//! A batch fails as a whole on timeout, a malformed response line, an
//! unknown or duplicated id, or end-of-stream with ids still unanswered;
//! the error names the offending id where there is one.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default per-batch timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    id: u64,
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    #[serde(default)]
    id: Option<u64>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    error: Option<String>,
}

#[derive(Debug, Clone)]
enum Transport {
    /// argv of the scorer process; requests go to its stdin.
    Subprocess(Vec<String>),
    /// `host:port` of a listening scorer.
    Tcp(String),
}

/// Handle to an external scorer process or socket.
#[derive(Debug, Clone)]
pub struct ExternalScorer {
    transport: Transport,
    timeout: Duration,
}

impl ExternalScorer {
    /// Scorer spawned per batch from `argv` (program plus arguments).
    pub fn subprocess(argv: Vec<String>) -> Result<Self> {
        if argv.is_empty() || argv[0].trim().is_empty() {
            return Err(Error::Invalid("scorer command is empty".into()));
        }
        Ok(ExternalScorer {
            transport: Transport::Subprocess(argv),
            timeout: DEFAULT_TIMEOUT,
        })
    }

    /// Scorer reachable at `host:port`.
    pub fn tcp(addr: impl Into<String>) -> Self {
        ExternalScorer {
            transport: Transport::Tcp(addr.into()),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Score a batch of texts, one score per text, order-aligned by id.
    ///
    /// An empty batch returns immediately without contacting the scorer.
    pub fn score_batch(&self, texts: &[String]) -> Result<Vec<f64>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let deadline = Instant::now() + self.timeout;
        match &self.transport {
            Transport::Subprocess(argv) => self.score_subprocess(argv, texts, deadline),
            Transport::Tcp(addr) => self.score_tcp(addr, texts, deadline),
        }
    }

    fn score_subprocess(
        &self,
        argv: &[String],
        texts: &[String],
        deadline: Instant,
    ) -> Result<Vec<f64>> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Protocol(format!("spawn {:?}: {e}", argv[0])))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");

        let result = exchange(stdin, stdout, texts, deadline);
        // the scorer exits on stdin EOF; reap it either way
        let _ = child.kill();
        let _ = child.wait();
        result
    }

    fn score_tcp(&self, addr: &str, texts: &[String], deadline: Instant) -> Result<Vec<f64>> {
        let resolved = addr
            .to_socket_addrs()
            .map_err(|e| Error::Protocol(format!("resolve {addr:?}: {e}")))?
            .next()
            .ok_or_else(|| Error::Protocol(format!("no address for {addr:?}")))?;
        let stream = TcpStream::connect_timeout(&resolved, remaining(deadline)?)
            .map_err(|e| Error::Protocol(format!("connect {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::Protocol(format!("clone stream: {e}")))?;
        let rx = spawn_reader(reader);
        write_requests(&stream, texts)?;
        // dropping a clone does not close the connection; signal end-of-batch
        stream
            .shutdown(Shutdown::Write)
            .map_err(|e| Error::Protocol(format!("shutdown write half: {e}")))?;
        collect_responses(&rx, texts.len(), deadline)
    }
}

fn remaining(deadline: Instant) -> Result<Duration> {
    deadline
        .checked_duration_since(Instant::now())
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Error::Protocol("batch timed out".into()))
}

/// Write all requests, signal end-of-batch by dropping the writer, then
/// collect responses.
fn exchange(
    writer: impl Write,
    reader: impl Read + Send + 'static,
    texts: &[String],
    deadline: Instant,
) -> Result<Vec<f64>> {
    let rx = spawn_reader(reader);
    write_requests(writer, texts)?;
    collect_responses(&rx, texts.len(), deadline)
}

fn write_requests(mut writer: impl Write, texts: &[String]) -> Result<()> {
    for (id, text) in texts.iter().enumerate() {
        let request = ScoreRequest {
            id: id as u64,
            text,
        };
        let line = serde_json::to_string(&request)
            .map_err(|e| Error::Protocol(format!("encode request {id}: {e}")))?;
        writeln!(writer, "{line}")
            .map_err(|e| Error::Protocol(format!("write request {id}: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Protocol(format!("flush requests: {e}")))
}

fn spawn_reader(reader: impl Read + Send + 'static) -> mpsc::Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let buf = BufReader::new(reader);
        for line in buf.lines() {
            let failed = line.is_err();
            if tx.send(line).is_err() || failed {
                return;
            }
        }
    });
    rx
}

fn collect_responses(
    rx: &mpsc::Receiver<std::io::Result<String>>,
    expected: usize,
    deadline: Instant,
) -> Result<Vec<f64>> {
    let mut scores: Vec<Option<f64>> = vec![None; expected];
    let mut received = 0usize;
    while received < expected {
        let wait = deadline
            .checked_duration_since(Instant::now())
            .unwrap_or(Duration::ZERO);
        let line = match rx.recv_timeout(wait) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Protocol(format!("read responses: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!(
                    "timed out with {} of {expected} responses outstanding (first missing id {})",
                    expected - received,
                    first_missing(&scores)
                )));
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(Error::Protocol(format!(
                    "scorer closed the stream with {} of {expected} responses outstanding \
                     (first missing id {})",
                    expected - received,
                    first_missing(&scores)
                )));
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let response: ScoreResponse = serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("malformed response line {line:?}: {e}")))?;
        if let Some(message) = response.error {
            return Err(Error::Protocol(format!(
                "scorer reported an error for id {:?}: {message}",
                response.id
            )));
        }
        let id = response
            .id
            .ok_or_else(|| Error::Protocol(format!("response without id: {line:?}")))?;
        let score = response
            .score
            .ok_or_else(|| Error::Protocol(format!("response for id {id} has no score")))?;
        if !score.is_finite() {
            return Err(Error::Protocol(format!("non-finite score for id {id}")));
        }
        let slot = scores
            .get_mut(id as usize)
            .ok_or_else(|| Error::Protocol(format!("response for unknown id {id}")))?;
        if slot.replace(score).is_some() {
            return Err(Error::Protocol(format!("duplicate response for id {id}")));
        }
        received += 1;
    }
    Ok(scores.into_iter().map(|s| s.expect("all ids received")).collect())
}

fn first_missing(scores: &[Option<f64>]) -> u64 {
    scores
        .iter()
        .position(Option::is_none)
        .map(|i| i as u64)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape_is_exact() {
        let line = serde_json::to_string(&ScoreRequest { id: 3, text: "Hi." }).unwrap();
        assert_eq!(line, r#"{"id":3,"text":"Hi."}"#);
    }

    #[test]
    fn response_accepts_out_of_order_fields() {
        let r: ScoreResponse = serde_json::from_str(r#"{"score": 1.5, "id": 2}"#).unwrap();
        assert_eq!(r.id, Some(2));
        assert_eq!(r.score, Some(1.5));
        assert!(r.error.is_none());
    }

    #[test]
    fn sidecar_error_responses_parse() {
        let r: ScoreResponse =
            serde_json::from_str(r#"{"id": null, "error": "bad request"}"#).unwrap();
        assert_eq!(r.id, None);
        assert_eq!(r.error.as_deref(), Some("bad request"));
    }

    #[test]
    fn empty_command_rejected() {
        assert!(ExternalScorer::subprocess(vec![]).is_err());
        assert!(ExternalScorer::subprocess(vec!["  ".into()]).is_err());
    }
}
