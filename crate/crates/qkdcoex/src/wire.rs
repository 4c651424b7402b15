//! Switch-configuration message codec and the append-only record log that
//! stands in for the monitoring database.
//!
//! Wire format, one message per line, fixed field order and precision
//! (wavelength 3 decimals, filter width 1 decimal):
//!
//! ```text
//! SSS1 id=9 ts=1700000000000 in=A out=4 lambda=1554.134 width=38.0
//! ```

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{C_BAND_MAX_NM, C_BAND_MIN_NM};

pub const WIRE_MAGIC: &str = "SSS1";

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("message is not valid UTF-8")]
    NotUtf8,
    #[error("bad magic: expected `{WIRE_MAGIC}`")]
    BadMagic,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unknown or out-of-order field `{0}`")]
    UnknownField(String),
    #[error("trailing data after last field")]
    TrailingData,
    #[error("malformed number in field `{field}`: `{value}`")]
    MalformedNumber { field: &'static str, value: String },
    #[error("wavelength {0} nm outside C-band")]
    WavelengthOutOfRange(f64),
    #[error("filter width must be positive, got {0} GHz")]
    NonPositiveFilterWidth(f64),
    #[error("port label `{0}` is empty or contains reserved characters")]
    BadPort(String),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("log corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("sequence gap at line {line}: expected {expected}, found {found}")]
    SequenceGap {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("record payload must not contain newlines or tabs")]
    BadPayload,
}

fn valid_port(port: &str) -> bool {
    !port.is_empty()
        && port
            .chars()
            .all(|c| !c.is_whitespace() && c != '=' && c != '\t')
}

/// Reconfiguration order for one spectrum-selective-switch passband.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SssConfigMessage {
    pub message_id: u64,
    pub timestamp_ms: u64,
    pub in_port: String,
    pub out_port: String,
    /// Carried with 3-decimal precision on the wire.
    pub center_wavelength_nm: f64,
    /// Carried with 1-decimal precision on the wire.
    pub filter_width_ghz: f64,
}

impl SssConfigMessage {
    /// Builds a validated message, quantizing the optical fields to their
    /// wire precision.
    pub fn new(
        message_id: u64,
        timestamp_ms: u64,
        in_port: &str,
        out_port: &str,
        center_wavelength_nm: f64,
        filter_width_ghz: f64,
    ) -> Result<Self, WireError> {
        let msg = Self {
            message_id,
            timestamp_ms,
            in_port: in_port.to_string(),
            out_port: out_port.to_string(),
            center_wavelength_nm: (center_wavelength_nm * 1000.0).round() / 1000.0,
            filter_width_ghz: (filter_width_ghz * 10.0).round() / 10.0,
        };
        msg.validate()?;
        Ok(msg)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if !valid_port(&self.in_port) {
            return Err(WireError::BadPort(self.in_port.clone()));
        }
        if !valid_port(&self.out_port) {
            return Err(WireError::BadPort(self.out_port.clone()));
        }
        if !(self.center_wavelength_nm >= C_BAND_MIN_NM
            && self.center_wavelength_nm <= C_BAND_MAX_NM)
        {
            return Err(WireError::WavelengthOutOfRange(self.center_wavelength_nm));
        }
        if !(self.filter_width_ghz > 0.0) {
            return Err(WireError::NonPositiveFilterWidth(self.filter_width_ghz));
        }
        Ok(())
    }

    /// Canonical byte encoding; `decode` of the result is the identity.
    pub fn encode(&self) -> Vec<u8> {
        self.to_string().into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(bytes).map_err(|_| WireError::NotUtf8)?;
        let mut tokens = text.trim_end_matches('\n').split(' ');
        if tokens.next() != Some(WIRE_MAGIC) {
            return Err(WireError::BadMagic);
        }
        let mut take = |field: &'static str| -> Result<&str, WireError> {
            let token = tokens.next().ok_or(WireError::MissingField(field))?;
            token
                .strip_prefix(field)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| WireError::UnknownField(token.to_string()))
        };
        let message_id: u64 = take("id").and_then(|v| {
            v.parse().map_err(|_| WireError::MalformedNumber {
                field: "id",
                value: v.to_string(),
            })
        })?;
        let timestamp_ms: u64 = take("ts").and_then(|v| {
            v.parse().map_err(|_| WireError::MalformedNumber {
                field: "ts",
                value: v.to_string(),
            })
        })?;
        let in_port = take("in")?.to_string();
        let out_port = take("out")?.to_string();
        let lambda_text = take("lambda")?;
        let center_wavelength_nm: f64 =
            lambda_text.parse().map_err(|_| WireError::MalformedNumber {
                field: "lambda",
                value: lambda_text.to_string(),
            })?;
        let width_text = take("width")?;
        let filter_width_ghz: f64 =
            width_text.parse().map_err(|_| WireError::MalformedNumber {
                field: "width",
                value: width_text.to_string(),
            })?;
        if tokens.next().is_some() {
            return Err(WireError::TrailingData);
        }
        let msg = Self {
            message_id,
            timestamp_ms,
            in_port,
            out_port,
            center_wavelength_nm,
            filter_width_ghz,
        };
        msg.validate()?;
        Ok(msg)
    }
}

impl fmt::Display for SssConfigMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{WIRE_MAGIC} id={} ts={} in={} out={} lambda={:.3} width={:.1}",
            self.message_id, self.timestamp_ms, self.in_port, self.out_port,
            self.center_wavelength_nm, self.filter_width_ghz
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Snapshot,
    Prediction,
    Action,
    Message,
}

impl RecordKind {
    fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Snapshot => "snapshot",
            RecordKind::Prediction => "prediction",
            RecordKind::Action => "action",
            RecordKind::Message => "message",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "snapshot" => RecordKind::Snapshot,
            "prediction" => RecordKind::Prediction,
            "action" => RecordKind::Action,
            "message" => RecordKind::Message,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sequence: u64,
    pub kind: RecordKind,
    pub payload: String,
}

/// Single-writer append-only log, one record per line:
/// `<sequence>\t<kind>\t<payload>`.
pub struct RecordLog {
    path: PathBuf,
    file: File,
    next_sequence: u64,
}

impl RecordLog {
    /// Opens (or creates) a log for appending; resumes numbering after the
    /// last intact record.
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let existing = if path.exists() {
            replay(path)?.records
        } else {
            Vec::new()
        };
        let next_sequence = existing.last().map_or(1, |r| r.sequence + 1);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LogError::Io {
                path: path.display().to_string(),
                source,
            })?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            next_sequence,
        })
    }

    pub fn append(&mut self, kind: RecordKind, payload: &str) -> Result<Record, LogError> {
        if payload.contains('\n') || payload.contains('\t') {
            return Err(LogError::BadPayload);
        }
        let record = Record {
            sequence: self.next_sequence,
            kind,
            payload: payload.to_string(),
        };
        let line = format!("{}\t{}\t{}\n", record.sequence, kind.as_str(), payload);
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.flush())
            .map_err(|source| LogError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        self.next_sequence += 1;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub records: Vec<Record>,
    /// Set when a partial trailing write was detected and dropped.
    pub truncated_tail: Option<String>,
}

/// Replays a log from any reader. A damaged or unterminated final line is
/// reported, never silently dropped; damage anywhere earlier is an error.
pub fn replay_reader<R: Read>(reader: R) -> Result<Replay, LogError> {
    let mut buf = BufReader::new(reader);
    let mut raw = Vec::new();
    buf.read_to_end(&mut raw).map_err(|source| LogError::Io {
        path: "<reader>".to_string(),
        source,
    })?;
    let text = String::from_utf8_lossy(&raw);
    let terminated = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    let mut truncated_tail = None;
    for (idx, line) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let last = idx + 1 == lines.len();
        let parsed = parse_record_line(line);
        match parsed {
            Ok(record) => {
                let expected = records.last().map_or(1, |r: &Record| r.sequence + 1);
                if record.sequence != expected {
                    return Err(LogError::SequenceGap {
                        line: line_no,
                        expected,
                        found: record.sequence,
                    });
                }
                if last && !terminated {
                    truncated_tail =
                        Some(format!("line {line_no}: unterminated trailing record dropped"));
                } else {
                    records.push(record);
                }
            }
            Err(message) if last => {
                truncated_tail = Some(format!("line {line_no}: {message}"));
            }
            Err(message) => return Err(LogError::Corrupt { line: line_no, message }),
        }
    }
    Ok(Replay {
        records,
        truncated_tail,
    })
}

/// Replays a log file in append order.
pub fn replay(path: &Path) -> Result<Replay, LogError> {
    let file = File::open(path).map_err(|source| LogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    replay_reader(file)
}

fn parse_record_line(line: &str) -> Result<Record, String> {
    let mut parts = line.splitn(3, '\t');
    let seq_text = parts.next().unwrap_or("");
    let sequence: u64 = seq_text
        .parse()
        .map_err(|_| format!("bad sequence `{seq_text}`"))?;
    let kind_text = parts.next().ok_or("missing record kind")?;
    let kind = RecordKind::parse(kind_text)
        .ok_or_else(|| format!("unknown record kind `{kind_text}`"))?;
    let payload = parts.next().ok_or("missing payload")?.to_string();
    Ok(Record {
        sequence,
        kind,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig_message() -> SssConfigMessage {
        SssConfigMessage::new(9, 1_700_000_000_000, "A", "4", 1554.134, 38.0).unwrap()
    }

    #[test]
    fn reference_vector_round_trips_bit_exact() {
        let msg = fig_message();
        let bytes = msg.encode();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "SSS1 id=9 ts=1700000000000 in=A out=4 lambda=1554.134 width=38.0"
        );
        let decoded = SssConfigMessage::decode(&bytes).unwrap();
        assert_eq!(decoded, msg);
        assert_eq!(decoded.encode(), bytes);
    }

    #[test]
    fn decode_errors_are_distinct() {
        assert_eq!(
            SssConfigMessage::decode(b"NOPE id=1"),
            Err(WireError::BadMagic)
        );
        assert_eq!(
            SssConfigMessage::decode(b"SSS1 id=1 ts=2 in=A out=4 lambda=1554.134"),
            Err(WireError::MissingField("width"))
        );
        assert_eq!(
            SssConfigMessage::decode(b"SSS1 id=1 ts=2 in=A out=4 lambda=x width=38.0"),
            Err(WireError::MalformedNumber {
                field: "lambda",
                value: "x".into()
            })
        );
        assert_eq!(
            SssConfigMessage::decode(b"SSS1 id=1 ts=2 in=A out=4 lambda=900.0 width=38.0"),
            Err(WireError::WavelengthOutOfRange(900.0))
        );
        assert_eq!(
            SssConfigMessage::decode(
                b"SSS1 id=1 ts=2 in=A out=4 lambda=1554.134 width=38.0 extra=1"
            ),
            Err(WireError::TrailingData)
        );
        assert_eq!(
            SssConfigMessage::decode(b"SSS1 bogus=1 ts=2 in=A out=4 lambda=1554.134 width=38.0"),
            Err(WireError::UnknownField("bogus=1".into()))
        );
    }

    #[test]
    fn zero_filter_width_rejected() {
        assert_eq!(
            SssConfigMessage::new(1, 0, "A", "4", 1554.134, 0.0),
            Err(WireError::NonPositiveFilterWidth(0.0))
        );
    }

    #[test]
    fn bad_ports_rejected() {
        assert!(SssConfigMessage::new(1, 0, "", "4", 1554.134, 38.0).is_err());
        assert!(SssConfigMessage::new(1, 0, "A B", "4", 1554.134, 38.0).is_err());
        assert!(SssConfigMessage::new(1, 0, "A", "a=b", 1554.134, 38.0).is_err());
    }

    proptest! {
        #[test]
        fn random_messages_round_trip(
            id in any::<u64>(),
            ts in any::<u64>(),
            in_port in "[A-Za-z0-9_-]{1,8}",
            out_port in "[A-Za-z0-9_-]{1,8}",
            lambda in 1530.0f64..1565.0,
            width in 0.1f64..200.0,
        ) {
            let msg = SssConfigMessage::new(id, ts, &in_port, &out_port, lambda, width).unwrap();
            let decoded = SssConfigMessage::decode(&msg.encode()).unwrap();
            prop_assert_eq!(&decoded, &msg);
            prop_assert_eq!(decoded.encode(), msg.encode());
        }
    }

    #[test]
    fn log_append_then_replay_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.log");
        let mut log = RecordLog::open(&path).unwrap();
        log.append(RecordKind::Snapshot, "{\"a\":1}").unwrap();
        log.append(RecordKind::Prediction, "{\"b\":2}").unwrap();
        log.append(RecordKind::Action, "{\"c\":3}").unwrap();
        let replayed = replay(&path).unwrap();
        assert!(replayed.truncated_tail.is_none());
        assert_eq!(replayed.records.len(), 3);
        assert_eq!(
            replayed.records.iter().map(|r| r.sequence).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert_eq!(replayed.records[2].payload, "{\"c\":3}");
    }

    #[test]
    fn truncated_final_line_reported_not_lost() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.log");
        let mut log = RecordLog::open(&path).unwrap();
        log.append(RecordKind::Snapshot, "one").unwrap();
        log.append(RecordKind::Snapshot, "two").unwrap();
        drop(log);
        // simulate a partial trailing write
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        file.write_all(b"3\tsnapshot\tthr").unwrap();
        drop(file);
        let replayed = replay(&path).unwrap();
        assert_eq!(replayed.records.len(), 2);
        assert!(replayed.truncated_tail.is_some());
    }

    #[test]
    fn interior_corruption_is_an_error() {
        let data = b"1\tsnapshot\tok\ngarbage\n3\tsnapshot\tok\n";
        assert!(matches!(
            replay_reader(&data[..]),
            Err(LogError::Corrupt { line: 2, .. })
        ));
        let gap = b"1\tsnapshot\tok\n3\tsnapshot\tok\n";
        assert!(matches!(
            replay_reader(&gap[..]),
            Err(LogError::SequenceGap {
                line: 2,
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn empty_log_replays_empty() {
        let replayed = replay_reader(&b""[..]).unwrap();
        assert!(replayed.records.is_empty());
        assert!(replayed.truncated_tail.is_none());
    }

    #[test]
    fn reopened_log_continues_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.log");
        {
            let mut log = RecordLog::open(&path).unwrap();
            log.append(RecordKind::Snapshot, "one").unwrap();
        }
        let mut log = RecordLog::open(&path).unwrap();
        let rec = log.append(RecordKind::Snapshot, "two").unwrap();
        assert_eq!(rec.sequence, 2);
    }
}
