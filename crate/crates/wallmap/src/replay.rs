//! Line-oriented replay files.
//!
//! One frame per line:
//!
//! ```text
//! t pose_x pose_y pose_theta | s1x s1y s2x s2y ...
//! ```
//!
//! Invalid samples are written as the literal pair `nan nan`. Blank lines and
//! lines starting with `#` are ignored. Every line must carry the same number
//! of samples and timestamps must not decrease.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use wallmap_core::sim::SimFrame;
use wallmap_core::{Pose2D, ScanRow, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub t: f64,
    pub pose: Pose2D,
    pub scan: ScanRow,
}

impl From<SimFrame> for ReplayRecord {
    fn from(f: SimFrame) -> Self {
        Self {
            t: f.t,
            pose: f.pose,
            scan: f.row,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {source}")]
    Read { line: usize, source: io::Error },
    #[error("line {line}: scan width {found}, expected {expected}")]
    WidthMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: timestamp {t} is before the previous {prev}")]
    NonMonotone { line: usize, prev: f64, t: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl ReplayError {
    /// 1-based line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            ReplayError::Io { .. } => None,
            ReplayError::Read { line, .. }
            | ReplayError::WidthMismatch { line, .. }
            | ReplayError::NonMonotone { line, .. }
            | ReplayError::Parse { line, .. } => Some(*line),
        }
    }
}

/// Streaming reader; stops after the first error.
pub struct ReplayReader<R> {
    lines: io::Lines<R>,
    line: usize,
    width: Option<usize>,
    last_t: Option<f64>,
    failed: bool,
}

impl<R: BufRead> ReplayReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            width: None,
            last_t: None,
            failed: false,
        }
    }

    fn record(&mut self, text: &str) -> Result<ReplayRecord, ReplayError> {
        let line = self.line;
        let parse_err = |message: String| ReplayError::Parse { line, message };
        let (head, tail) = text
            .split_once('|')
            .ok_or_else(|| parse_err("missing `|` between pose and scan".into()))?;

        let head: Vec<&str> = head.split_whitespace().collect();
        if head.len() != 4 {
            return Err(parse_err(format!("expected `t x y theta`, found {} fields", head.len())));
        }
        let mut values = [0.0; 4];
        for (k, (tok, name)) in head.iter().zip(["t", "pose_x", "pose_y", "pose_theta"]).enumerate() {
            values[k] = finite(tok).ok_or_else(|| parse_err(format!("bad {name} `{tok}`")))?;
        }
        let [t, x, y, theta] = values;
        let pose = Pose2D::new(x, y, theta).map_err(|e| parse_err(e.to_string()))?;

        let tokens: Vec<&str> = tail.split_whitespace().collect();
        if tokens.len() % 2 != 0 {
            return Err(parse_err(format!("odd number of scan coordinates ({})", tokens.len())));
        }
        let mut samples = Vec::with_capacity(tokens.len() / 2);
        for (k, pair) in tokens.chunks_exact(2).enumerate() {
            samples.push(match (pair[0], pair[1]) {
                ("nan", "nan") => None,
                (a, b) => match (finite(a), finite(b)) {
                    (Some(a), Some(b)) => Some(Vec2::new(a, b)),
                    _ => return Err(parse_err(format!("bad sample {} `{a} {b}`", k + 1))),
                },
            });
        }
        let scan = ScanRow::new(samples).map_err(|e| parse_err(e.to_string()))?;

        match self.width {
            Some(expected) if expected != scan.width() => {
                return Err(ReplayError::WidthMismatch {
                    line,
                    expected,
                    found: scan.width(),
                })
            }
            _ => self.width = Some(scan.width()),
        }
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(ReplayError::NonMonotone { line, prev, t });
            }
        }
        self.last_t = Some(t);
        Ok(ReplayRecord { t, pose, scan })
    }
}

fn finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl<R: BufRead> Iterator for ReplayReader<R> {
    type Item = Result<ReplayRecord, ReplayError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = self.lines.next()?;
            self.line += 1;
            let out = match text {
                Err(source) => Err(ReplayError::Read { line: self.line, source }),
                Ok(text) => {
                    let text = text.trim();
                    if text.is_empty() || text.starts_with('#') {
                        continue;
                    }
                    self.record(text)
                }
            };
            self.failed = out.is_err();
            return Some(out);
        }
    }
}

pub fn open_replay(path: &Path) -> Result<ReplayReader<BufReader<File>>, ReplayError> {
    let file = File::open(path).map_err(|source| ReplayError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(ReplayReader::new(BufReader::new(file)))
}

/// Reads a whole replay file.
pub fn read_replay(path: &Path) -> Result<Vec<ReplayRecord>, ReplayError> {
    open_replay(path)?.collect()
}

/// Writes one record as a replay line.
pub fn write_record(w: &mut impl Write, r: &ReplayRecord) -> io::Result<()> {
    write!(w, "{:?} {:?} {:?} {:?} |", r.t, r.pose.x(), r.pose.y(), r.pose.theta())?;
    for s in r.scan.samples() {
        match s {
            Some(p) => write!(w, " {:?} {:?}", p.x, p.y)?,
            None => w.write_all(b" nan nan")?,
        }
    }
    w.write_all(b"\n")
}

pub fn write_replay_to<'a>(w: &mut impl Write, records: impl IntoIterator<Item = &'a ReplayRecord>) -> io::Result<()> {
    for r in records {
        write_record(w, r)?;
    }
    Ok(())
}

pub fn write_replay<'a>(path: &Path, records: impl IntoIterator<Item = &'a ReplayRecord>) -> Result<(), ReplayError> {
    let io_err = |source| ReplayError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_replay_to(&mut w, records).map_err(io_err)?;
    w.flush().map_err(io_err)
}
