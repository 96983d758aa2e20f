use std::io::{BufReader, BufWriter, ErrorKind};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{self, ProtocolError, Tensor};
use super::{check_window, stack_channels, MaskPrediction, SegmentError, Segmenter};
use crate::renderer::Image;

/// A child process speaking the segmenter protocol, started with `sh -c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalParams {
    pub command: String,
    /// Bound on the handshake and on each response, ms.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Restarts allowed over the segmenter's lifetime.
    #[serde(default = "default_max_restarts")]
    pub max_restarts: u32,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_restarts() -> u32 {
    2
}

impl ExternalParams {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), timeout_ms: default_timeout_ms(), max_restarts: default_max_restarts() }
    }

    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.command.trim().is_empty() {
            return Err(SegmentError::InvalidParams("external segmenter command is empty".into()));
        }
        if self.timeout_ms == 0 {
            return Err(SegmentError::InvalidParams("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

enum Incoming {
    Hello,
    Mask(Tensor),
}

struct Running {
    child: Child,
    requests: Option<Sender<Vec<u8>>>,
    responses: Receiver<Result<Incoming, ProtocolError>>,
}

impl Running {
    fn spawn(params: &ExternalParams) -> Result<Self, ProtocolError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&params.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
        thread::spawn(move || {
            let mut out = BufWriter::new(stdin);
            if protocol::write_hello(&mut out).is_err() {
                return;
            }
            for bytes in req_rx {
                if std::io::Write::write_all(&mut out, &bytes).and_then(|()| std::io::Write::flush(&mut out)).is_err() {
                    return;
                }
            }
        });

        let (resp_tx, resp_rx) = mpsc::channel();
        thread::spawn(move || {
            let mut input = BufReader::new(stdout);
            if resp_tx.send(protocol::read_hello(&mut input).map(|_| Incoming::Hello)).is_err() {
                return;
            }
            loop {
                let msg = protocol::read_response_any(&mut input).map(Incoming::Mask);
                let failed = msg.is_err();
                if resp_tx.send(msg).is_err() || failed {
                    return;
                }
            }
        });

        let mut running = Self { child, requests: Some(req_tx), responses: resp_rx };
        match running.receive(params.timeout())? {
            Incoming::Hello => Ok(running),
            Incoming::Mask(_) => Err(ProtocolError::BadMagic { expected: protocol::HELLO_MAGIC, found: protocol::RESPONSE_MAGIC }),
        }
    }

    fn receive(&mut self, timeout: Duration) -> Result<Incoming, ProtocolError> {
        match self.responses.recv_timeout(timeout) {
            Ok(Ok(msg)) => Ok(msg),
            Ok(Err(ProtocolError::Io(e))) if e.kind() == ErrorKind::UnexpectedEof => Err(self.exit_error()),
            Ok(Err(e)) => Err(e),
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(self.exit_error()),
        }
    }

    fn exit_error(&mut self) -> ProtocolError {
        // the reader sees EOF slightly before the process is reaped
        for _ in 0..50 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return ProtocolError::Exited(status.to_string());
            }
            thread::sleep(Duration::from_millis(10));
        }
        ProtocolError::Exited("stdout closed".into())
    }

    fn request(&mut self, bytes: Vec<u8>, height: u32, width: u32, timeout: Duration) -> Result<Vec<f32>, ProtocolError> {
        let sent = self.requests.as_ref().is_some_and(|tx| tx.send(bytes).is_ok());
        if !sent {
            return Err(self.exit_error());
        }
        match self.receive(timeout)? {
            Incoming::Mask(t) => {
                protocol::check_response(&t, height, width)?;
                Ok(t.data)
            }
            Incoming::Hello => Err(ProtocolError::BadMagic { expected: protocol::RESPONSE_MAGIC, found: protocol::HELLO_MAGIC }),
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.requests.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Client for an external segmenter process; one request in flight at a time.
pub struct ExternalSegmenter {
    params: ExternalParams,
    running: Option<Running>,
    restarts: u32,
}

impl ExternalSegmenter {
    /// Starts the process and completes the handshake.
    pub fn spawn(params: ExternalParams) -> Result<Self, ProtocolError> {
        let running = Running::spawn(&params)?;
        Ok(Self { params, running: Some(running), restarts: 0 })
    }

    pub fn restarts(&self) -> u32 {
        self.restarts
    }

    fn attempt(&mut self, bytes: &[u8], height: u32, width: u32) -> Result<Vec<f32>, ProtocolError> {
        let running = match &mut self.running {
            Some(r) => r,
            None => self.running.insert(Running::spawn(&self.params)?),
        };
        running.request(bytes.to_vec(), height, width, self.params.timeout())
    }
}

impl Segmenter for ExternalSegmenter {
    fn segment(&mut self, frames: &[Image], frame_index: usize) -> Result<MaskPrediction, SegmentError> {
        let (w, h) = check_window(frames)?;
        let bytes = protocol::encode_request(h, w, &stack_channels(frames)?)
            .map_err(|source| SegmentError::External { frame: frame_index, source })?;
        loop {
            match self.attempt(&bytes, h, w) {
                Ok(data) => {
                    let prob = Image::from_vec(w, h, 1, data).expect("validated response shape");
                    return Ok(MaskPrediction { prob, frame_index });
                }
                Err(source) => {
                    self.running = None;
                    if self.restarts >= self.params.max_restarts {
                        return Err(SegmentError::External { frame: frame_index, source });
                    }
                    self.restarts += 1;
                }
            }
        }
    }
}
