//! Scripted segmenter process for exercising the external protocol.
//!
//! ```text
//! fmo-stub-segmenter const <value>
//! fmo-stub-segmenter echo-gt <dataset-dir>
//! fmo-stub-segmenter bad-magic | wrong-size | crash | silent
//! fmo-stub-segmenter crash-once <marker-file> <value>
//! ```

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use fmo_core::dataset::read_dataset;
use fmo_core::segment::protocol::{self, ProtocolError};
use sha2::{Digest, Sha256};

enum Mode {
    Const(f32),
    EchoGt(HashMap<[u8; 32], Vec<f32>>),
    BadMagic,
    WrongSize,
    Crash,
    Silent,
}

fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn parse(args: &[String]) -> Result<Mode, String> {
    let value = |s: Option<&String>| -> Result<f32, String> {
        s.ok_or("missing value")?.parse::<f32>().map_err(|e| e.to_string())
    };
    match args.first().map(String::as_str) {
        Some("const") => Ok(Mode::Const(value(args.get(1))?)),
        Some("echo-gt") => {
            let root = args.get(1).ok_or("missing dataset dir")?;
            let (samples, _) = read_dataset(Path::new(root)).map_err(|e| e.to_string())?;
            let mut table = HashMap::new();
            for s in samples {
                let (w, h) = (s.gt.mask.width(), s.gt.mask.height());
                let request = protocol::encode_request(h, w, &s.stacked()).map_err(|e| e.to_string())?;
                table.insert(digest(&request), s.gt.mask.data().to_vec());
            }
            Ok(Mode::EchoGt(table))
        }
        Some("bad-magic") => Ok(Mode::BadMagic),
        Some("wrong-size") => Ok(Mode::WrongSize),
        Some("crash") => Ok(Mode::Crash),
        Some("silent") => Ok(Mode::Silent),
        Some("crash-once") => {
            let marker = Path::new(args.get(1).ok_or("missing marker file")?);
            if marker.exists() {
                Ok(Mode::Const(value(args.get(2))?))
            } else {
                std::fs::write(marker, b"").map_err(|e| e.to_string())?;
                Ok(Mode::Crash)
            }
        }
        _ => Err("usage: fmo-stub-segmenter <const|echo-gt|bad-magic|wrong-size|crash|silent|crash-once> [args]".into()),
    }
}

fn serve(mode: &Mode) -> Result<(), ProtocolError> {
    let mut input = BufReader::new(io::stdin().lock());
    let mut out = BufWriter::new(io::stdout().lock());
    protocol::read_hello(&mut input)?;
    protocol::write_hello(&mut out)?;
    loop {
        let request = match protocol::read_request(&mut input) {
            Ok(r) => r,
            Err(ProtocolError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let (h, w) = (request.height, request.width);
        let n = (h * w) as usize;
        let bytes = match mode {
            Mode::Const(v) => protocol::encode_response(h, w, &vec![*v; n])?,
            Mode::EchoGt(table) => {
                let key = digest(&protocol::encode_request(h, w, &request.data)?);
                let mask = table.get(&key).cloned().unwrap_or_else(|| vec![0.0; n]);
                protocol::encode_response(h, w, &mask)?
            }
            Mode::BadMagic => {
                let mut b = protocol::encode_response(h, w, &vec![0.0; n])?;
                b[..4].copy_from_slice(b"XXXX");
                b
            }
            Mode::WrongSize => protocol::encode_response(h + 1, w, &vec![0.0; n + w as usize])?,
            Mode::Crash => std::process::exit(101),
            Mode::Silent => continue,
        };
        out.write_all(&bytes)?;
        out.flush()?;
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = match parse(&args) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match serve(&mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stub segmenter: {e}");
            ExitCode::from(3)
        }
    }
}
