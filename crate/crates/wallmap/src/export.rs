//! CSV and SVG exports. All outputs are byte-stable for identical inputs.
//!
//! | file | columns |
//! |---|---|
//! | map | `id,u,v,s_uu,s_uv,s_vv,hits` (world frame, m and m²) |
//! | ground truth | `id,u,v,ax,ay,bx,by` (wall and its segment endpoints) |
//! | metrics | `frame,t_detect_s,t_assoc_s,t_update_s,n_obs,n_landmarks` |

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use wallmap_core::mapper::WallMap;
use wallmap_core::pipeline::FrameMetrics;
use wallmap_core::sim::{Environment, Segment};
use wallmap_core::{Cov2, Landmark, Pose2D, Vec2, WallParam};

pub const MAP_HEADER: &str = "id,u,v,s_uu,s_uv,s_vv,hits";
pub const TRUTH_HEADER: &str = "id,u,v,ax,ay,bx,by";
pub const METRICS_HEADER: &str = "frame,t_detect_s,t_assoc_s,t_update_s,n_obs,n_landmarks";

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
}

fn create(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CsvError> {
    let io_err = |source| CsvError::Io {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn write_map_csv(w: &mut impl Write, map: &WallMap) -> io::Result<()> {
    writeln!(w, "{MAP_HEADER}")?;
    for l in map.landmarks() {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{}",
            l.id,
            l.mean.u(),
            l.mean.v(),
            l.cov.uu(),
            l.cov.uv(),
            l.cov.vv(),
            l.hits
        )?;
    }
    Ok(())
}

pub fn export_map_csv(path: &Path, map: &WallMap) -> Result<(), CsvError> {
    create(path, |w| write_map_csv(w, map))
}

/// Ground-truth walls of `env`, numbered from 1 in segment order.
pub fn write_truth_csv(w: &mut impl Write, env: &Environment) -> io::Result<()> {
    writeln!(w, "{TRUTH_HEADER}")?;
    for (k, (s, g)) in env.segments().iter().zip(env.ground_truth()).enumerate() {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            k + 1,
            g.u(),
            g.v(),
            s.a.x,
            s.a.y,
            s.b.x,
            s.b.y
        )?;
    }
    Ok(())
}

pub fn export_truth_csv(path: &Path, env: &Environment) -> Result<(), CsvError> {
    create(path, |w| write_truth_csv(w, env))
}

pub fn write_metrics_csv<'a>(w: &mut impl Write, metrics: impl IntoIterator<Item = &'a FrameMetrics>) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(
            w,
            "{},{:?},{:?},{:?},{},{}",
            m.frame, m.t_detect, m.t_associate, m.t_update, m.n_observations, m.n_landmarks
        )?;
    }
    Ok(())
}

pub fn export_metrics_csv<'a>(path: &Path, metrics: impl IntoIterator<Item = &'a FrameMetrics>) -> Result<(), CsvError> {
    create(path, |w| write_metrics_csv(w, metrics))
}

/// Data rows of a CSV file whose header starts with `want`, split on commas.
fn read_rows(path: &Path, want: &[&str]) -> Result<Vec<(usize, Vec<String>)>, CsvError> {
    let text = fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.to_owned(),
        source,
    })?;
    let parse = |line, message| CsvError::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header: Vec<&str> = lines.next().map(|(_, h)| h.split(',').collect()).unwrap_or_default();
    if header.len() < want.len() || header[..want.len()] != *want {
        return Err(parse(1, format!("header must start with `{}`", want.join(","))));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_owned()).collect();
        if fields.len() != header.len() {
            return Err(parse(n, format!("expected {} fields, found {}", header.len(), fields.len())));
        }
        rows.push((n, fields));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, text: &str) -> Result<T, CsvError> {
    text.parse().map_err(|_| CsvError::Parse {
        path: path.to_owned(),
        line,
        message: format!("bad {name} `{text}`"),
    })
}

/// `(id, wall)` pairs from a map or ground-truth CSV.
pub fn read_walls(path: &Path) -> Result<Vec<(u64, WallParam)>, CsvError> {
    read_rows(path, &["id", "u", "v"])?
        .into_iter()
        .map(|(n, f)| {
            let id = field(path, n, "id", &f[0])?;
            let wall = WallParam::new(field(path, n, "u", &f[1])?, field(path, n, "v", &f[2])?).map_err(|e| CsvError::Parse {
                path: path.to_owned(),
                line: n,
                message: e.to_string(),
            })?;
            Ok((id, wall))
        })
        .collect()
}

pub fn read_map_csv(path: &Path) -> Result<WallMap, CsvError> {
    let cols: Vec<&str> = MAP_HEADER.split(',').collect();
    let bad = |line, e: wallmap_core::Error| CsvError::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    };
    let mut landmarks = Vec::new();
    for (n, f) in read_rows(path, &cols)? {
        let num = |k: usize| field::<f64>(path, n, cols[k], &f[k]);
        landmarks.push(Landmark {
            id: field(path, n, "id", &f[0])?,
            mean: WallParam::new(num(1)?, num(2)?).map_err(|e| bad(n, e))?,
            cov: Cov2::from_entries(num(3)?, num(4)?, num(5)?).map_err(|e| bad(n, e))?,
            hits: field(path, n, "hits", &f[6])?,
            first_seen: 0,
            last_seen: 0,
        });
    }
    WallMap::from_landmarks(landmarks).map_err(|e| bad(1, e))
}

/// Segment endpoints from a ground-truth CSV.
pub fn read_truth_segments(path: &Path) -> Result<Vec<Segment>, CsvError> {
    let cols: Vec<&str> = TRUTH_HEADER.split(',').collect();
    read_rows(path, &cols)?
        .into_iter()
        .map(|(n, f)| {
            let num = |k: usize| field::<f64>(path, n, cols[k], &f[k]);
            Ok(Segment::new(num(3)?, num(4)?, num(5)?, num(6)?))
        })
        .collect()
}

/// Axis-aligned view rectangle in world coordinates.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: Vec2,
    hi: Vec2,
}

impl Bounds {
    fn around(points: impl Iterator<Item = Vec2>, margin: f64) -> Self {
        let mut b: Option<Bounds> = None;
        for p in points {
            b = Some(match b {
                None => Bounds { lo: p, hi: p },
                Some(b) => Bounds {
                    lo: Vec2::new(b.lo.x.min(p.x), b.lo.y.min(p.y)),
                    hi: Vec2::new(b.hi.x.max(p.x), b.hi.y.max(p.y)),
                },
            });
        }
        let b = b.unwrap_or(Bounds {
            lo: Vec2::ZERO,
            hi: Vec2::ZERO,
        });
        let m = Vec2::new(margin, margin);
        Bounds { lo: b.lo - m, hi: b.hi + m }
    }

    /// Portion of the infinite line through `p` along `d` inside the box.
    fn clip(&self, p: Vec2, d: Vec2) -> Option<(Vec2, Vec2)> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (o, dir, lo, hi) in [(p.x, d.x, self.lo.x, self.hi.x), (p.y, d.y, self.lo.y, self.hi.y)] {
            if dir.abs() < 1e-15 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let (a, b) = ((lo - o) / dir, (hi - o) / dir);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1).then(|| (p + d * t0, p + d * t1))
    }
}

/// Plot of the map: one `<line class="landmark">` per landmark, clipped to
/// the view, one `<polyline class="trajectory">`, and, when given, the true
/// segments as `<path class="truth">`. World y points up.
pub fn write_map_svg(w: &mut impl Write, map: &WallMap, trajectory: &[Pose2D], truth: &[Segment]) -> io::Result<()> {
    let points = trajectory
        .iter()
        .map(Pose2D::position)
        .chain(map.landmarks().iter().map(|l| l.mean.as_vec()))
        .chain(truth.iter().flat_map(|s| [s.a, s.b]));
    let b = Bounds::around(points, 1.0);
    let size = b.hi - b.lo;
    let stroke = 0.004 * size.x.max(size.y);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.4} {:.4} {:.4} {:.4}" width="800" height="{:.0}">"#,
        b.lo.x,
        -b.hi.y,
        size.x,
        size.y,
        800.0 * size.y / size.x
    );
    let _ = writeln!(s, r#"<g transform="scale(1,-1)" fill="none" stroke-width="{stroke:.4}">"#);
    for seg in truth {
        let _ = writeln!(
            s,
            r##"<path class="truth" stroke="#bbbbbb" d="M {:.4} {:.4} L {:.4} {:.4}"/>"##,
            seg.a.x, seg.a.y, seg.b.x, seg.b.y
        );
    }
    for l in map.landmarks() {
        let cp = l.mean.as_vec();
        if let Some((a, e)) = b.clip(cp, l.mean.normal().perp()) {
            let _ = writeln!(
                s,
                r##"<line class="landmark" data-id="{}" stroke="#d62728" x1="{:.4}" y1="{:.4}" x2="{:.4}" y2="{:.4}"/>"##,
                l.id, a.x, a.y, e.x, e.y
            );
        }
    }
    let path: Vec<String> = trajectory.iter().map(|p| format!("{:.4},{:.4}", p.x(), p.y())).collect();
    let _ = writeln!(
        s,
        r##"<polyline class="trajectory" stroke="#1f77b4" points="{}"/>"##,
        path.join(" ")
    );
    s.push_str("</g>\n</svg>\n");
    w.write_all(s.as_bytes())
}

pub fn export_map_svg(path: &Path, map: &WallMap, trajectory: &[Pose2D], truth: &[Segment]) -> Result<(), CsvError> {
    create(path, |w| write_map_svg(w, map, trajectory, truth))
}
