//! Wall extraction from a single scan row.
//!
//! The row is split into clusters at invalid samples, each cluster is
//! explained by up to `max_lines_per_cluster` lines found by sequential
//! RANSAC, and every line is reported by its closest point to the sensor.
//!
//! Lines are handled in Hessian normal form `n·p = d` throughout; slope and
//! intercept cannot represent walls parallel to the sensor's forward axis.
//!
//! Beyond plain fit-and-remove, two refinements run on the sequential output:
//! points of a cluster are reassigned to the nearest of that cluster's lines
//! before a total-least-squares refit (a line fitted first otherwise keeps the
//! neighbouring wall's samples near a corner), and lines of the whole row that
//! describe the same wall are merged.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::types::{LineMC, Observation, ScanRow, WallParam};

/// Refit/reassign rounds before giving up on a fixed point.
const MAX_REFINE_ROUNDS: usize = 10;

/// Fraction of two fits' joint inliers one line must keep for a merge.
const MERGE_SUPPORT: f64 = 0.95;

/// Fraction of each fit's own inliers the merged line must keep, so a short
/// wall next to a long one is not absorbed.
const MERGE_SHARE: f64 = 0.5;

/// Share of an extent at either end where crossing lines may still be
/// distinct walls.
const CROSSING_MARGIN: f64 = 0.1;

/// Gauss-Newton limits for range-scaled line fits.
const GAUSS_NEWTON_ITERATIONS: usize = 20;
const GAUSS_NEWTON_TOLERANCE: f64 = 1e-12;

/// Smallest cosine between the ray and the normal used for range residuals.
const MIN_INCIDENCE: f64 = 0.1;

/// Lower clamp of the robust trim radius, relative to the inlier threshold.
const MIN_TRIM_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub ransac_iterations: u32,
    /// Point-to-line distance in meters.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub min_cluster_size: usize,
    pub max_lines_per_cluster: usize,
    pub rng_seed: u64,
    /// Lines whose normals differ by at most this angle (radians) ...
    pub merge_angle: f64,
    /// ... and whose extents lie within this distance (meters) of each other
    /// are reported as one wall. Zero disables merging.
    pub merge_distance: f64,
    /// Measure residuals as range errors along each ray, divided by
    /// `max(1, r²)` with `r` the range (meters) at which the ray meets the
    /// line, so tolerances grow with range like depth noise does. Lines are
    /// then fitted by Gauss-Newton on these residuals, and rays meeting a
    /// line at grazing incidence never support it.
    pub range_scaled: bool,
    /// Lines whose closest point has a standard error above this (meters)
    /// are not reported. Infinity disables the check.
    pub max_standard_error: f64,
    /// Lines whose inliers fill less than this share of the sample range
    /// they span are treated as interleaving with another line and dropped.
    pub min_density: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            ransac_iterations: 200,
            inlier_threshold: 0.03,
            min_inliers: 15,
            min_cluster_size: 15,
            max_lines_per_cluster: 4,
            rng_seed: 0,
            merge_angle: 0.1,
            merge_distance: 0.1,
            range_scaled: false,
            max_standard_error: f64::INFINITY,
            min_density: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason| Err(Error::InvalidConfig { field, reason });
        if self.ransac_iterations < 1 {
            return bad("detector.ransac_iterations", "must be at least 1");
        }
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return bad("detector.inlier_threshold", "must be positive and finite");
        }
        if self.min_inliers < 2 {
            return bad("detector.min_inliers", "must be at least 2");
        }
        if self.min_cluster_size < self.min_inliers {
            return bad("detector.min_cluster_size", "must be at least min_inliers");
        }
        if self.max_lines_per_cluster < 1 {
            return bad("detector.max_lines_per_cluster", "must be at least 1");
        }
        if !(self.merge_angle >= 0.0 && self.merge_angle.is_finite()) {
            return bad("detector.merge_angle", "must be non-negative and finite");
        }
        if !(self.merge_distance >= 0.0 && self.merge_distance.is_finite()) {
            return bad("detector.merge_distance", "must be non-negative and finite");
        }
        if !(0.0..=1.0).contains(&self.min_density) {
            return bad("detector.min_density", "must lie in [0, 1]");
        }
        if !(self.max_standard_error > 0.0) {
            return bad("detector.max_standard_error", "must be positive");
        }
        Ok(())
    }
}

/// A maximal run of valid samples. Point `k` is row sample `start + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub start: usize,
    pub points: Vec<Vec2>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Line `normal·p = offset` with unit normal and `offset >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLine {
    pub normal: Vec2,
    pub offset: f64,
}

impl NormalLine {
    /// Builds a line from any non-zero normal, flipping it so the offset is non-negative.
    pub fn new(normal: Vec2, point: Vec2) -> Option<Self> {
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return None;
        }
        let mut n = normal * (1.0 / len);
        let mut d = n.dot(point);
        if d < 0.0 {
            n = -n;
            d = -d;
        }
        Some(Self {
            normal: n,
            offset: d,
        })
    }

    pub fn through(a: Vec2, b: Vec2) -> Option<Self> {
        Self::new((b - a).perp(), a)
    }

    /// Total-least-squares fit: the line through the centroid along the
    /// principal axis of the scatter matrix.
    pub fn fit<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Vec2>,
        I::IntoIter: Clone,
    {
        Self::fit_weighted(points.into_iter().map(|p| (*p, 1.0)))
    }

    /// Weighted total least squares over `(point, weight)` pairs with
    /// positive weights.
    pub fn fit_weighted<I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = (Vec2, f64)>,
        I::IntoIter: Clone,
    {
        let iter = points.into_iter();
        let mut count = 0usize;
        let mut total = 0.0;
        let mut sum = Vec2::ZERO;
        for (p, w) in iter.clone() {
            sum += p * w;
            total += w;
            count += 1;
        }
        if count < 2 || !(total > 0.0) {
            return None;
        }
        let centroid = sum * (1.0 / total);
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (p, w) in iter {
            let d = p - centroid;
            sxx += w * d.x * d.x;
            sxy += w * d.x * d.y;
            syy += w * d.y * d.y;
        }
        let mean = 0.5 * (sxx + syy);
        let radius = libm::hypot(0.5 * (sxx - syy), sxy);
        if !(radius > 0.0) {
            // Isotropic or coincident scatter: no preferred direction.
            return None;
        }
        let lambda_min = mean - radius;
        let a = Vec2::new(sxy, lambda_min - sxx);
        let b = Vec2::new(lambda_min - syy, sxy);
        let normal = if a.norm_sq() >= b.norm_sq() { a } else { b };
        Self::new(normal, centroid)
    }

    #[inline]
    pub fn distance(&self, p: Vec2) -> f64 {
        libm::fabs(self.normal.dot(p) - self.offset)
    }

    #[inline]
    pub fn closest_point(&self) -> Vec2 {
        self.normal * self.offset
    }

    #[inline]
    pub fn direction(&self) -> Vec2 {
        self.normal.perp()
    }

    pub fn project(&self, p: Vec2) -> Vec2 {
        p - self.normal * (self.normal.dot(p) - self.offset)
    }

    /// Slope-intercept form; `None` for lines parallel to the v axis.
    pub fn to_mc(&self) -> Option<LineMC> {
        if libm::fabs(self.normal.y) < 1e-12 {
            return None;
        }
        LineMC::new(-self.normal.x / self.normal.y, self.offset / self.normal.y).ok()
    }
}

/// A fitted line with the indices of its inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub line: NormalLine,
    /// Ascending. Local to the fitted slice for [`ransac_fit_line`], row
    /// indices for [`seq_line_fitting`].
    pub inliers: Vec<usize>,
}

/// Splits a row into maximal runs of valid samples, dropping runs shorter
/// than `min_cluster_size`.
pub fn cluster_by_invalid(row: &ScanRow, min_cluster_size: usize) -> Vec<Cluster> {
    let mut clusters = Vec::new();
    let mut current: Option<Cluster> = None;
    for (i, sample) in row.samples().iter().enumerate() {
        match (sample, current.as_mut()) {
            (Some(p), Some(c)) => c.points.push(*p),
            (Some(p), None) => {
                current = Some(Cluster {
                    start: i,
                    points: alloc::vec![*p],
                })
            }
            (None, _) => {
                if let Some(c) = current.take() {
                    clusters.push(c);
                }
            }
        }
    }
    clusters.extend(current);
    clusters.retain(|c| c.len() >= min_cluster_size.max(1));
    clusters
}

/// Residual model of a sample against a line.
///
/// Plain residuals are point-to-line distances. Range-scaled residuals are
/// range errors along the ray, divided by the squared range at which the
/// ray meets the line, matching depth noise that grows with range².
#[derive(Debug, Clone, Copy)]
struct Tolerance {
    threshold: f64,
    range_scaled: bool,
}

/// Residual of one sample with its derivatives with respect to the line
/// offset and normal angle, and its weight (inverse variance up to a
/// constant).
struct Linearized {
    e: f64,
    d_offset: f64,
    d_angle: f64,
    weight: f64,
    /// The ray meets the line below `MIN_INCIDENCE`, or not at all.
    grazing: bool,
}

impl Tolerance {
    fn new(threshold: f64, cfg: &DetectorConfig) -> Self {
        Self {
            threshold,
            range_scaled: cfg.range_scaled,
        }
    }

    fn linearize(&self, line: &NormalLine, p: Vec2) -> Linearized {
        let r = p.norm();
        if !self.range_scaled || !(r > 0.0) {
            return Linearized {
                e: line.normal.dot(p) - line.offset,
                d_offset: -1.0,
                d_angle: line.direction().dot(p),
                weight: 1.0,
                grazing: false,
            };
        }
        let u = p * (1.0 / r);
        let incidence = line.normal.dot(u);
        let c = incidence.max(MIN_INCIDENCE);
        let s = line.normal.cross(u);
        let hit = line.offset / c;
        let scale = (hit * hit).max(1.0);
        Linearized {
            e: r - hit,
            d_offset: -1.0 / c,
            d_angle: line.offset * s / (c * c),
            weight: 1.0 / (scale * scale),
            grazing: !(incidence >= MIN_INCIDENCE),
        }
    }

    fn residual(&self, line: &NormalLine, p: Vec2) -> f64 {
        let l = self.linearize(line, p);
        if l.grazing {
            // The range along a grazing ray says nothing about the line.
            return f64::INFINITY;
        }
        libm::fabs(l.e) * libm::sqrt(l.weight)
    }

    fn accepts(&self, line: &NormalLine, p: Vec2) -> bool {
        self.residual(line, p) <= self.threshold
    }

    /// Weighted normal equations over `subset`: `(A, Jᵀ·W·e, Σ w·e²)` with
    /// parameters ordered (offset, angle).
    fn normal_equations(&self, line: &NormalLine, points: &[Vec2], subset: &[usize]) -> (Mat2, Vec2, f64) {
        let mut a = Mat2::ZERO;
        let mut b = Vec2::ZERO;
        let mut cost = 0.0;
        for &i in subset {
            let l = self.linearize(line, points[i]);
            let j = Vec2::new(l.d_offset, l.d_angle);
            a = a + Mat2::outer(j, j).scale(l.weight);
            b += j * (l.weight * l.e);
            cost += l.weight * l.e * l.e;
        }
        (a, b, cost)
    }

    /// Least-squares line through `subset`, starting from `line`. Plain
    /// residuals have the closed-form total-least-squares solution; range
    /// residuals are minimised by Gauss-Newton from a weighted one.
    fn fit(&self, line: &NormalLine, points: &[Vec2], subset: &[usize]) -> Option<NormalLine> {
        let start = NormalLine::fit_weighted(subset.iter().map(|&i| (points[i], self.linearize(line, points[i]).weight)))?;
        if !self.range_scaled {
            return Some(start);
        }
        Some(self.gauss_newton(start, points, subset).unwrap_or(start))
    }

    fn gauss_newton(&self, mut line: NormalLine, points: &[Vec2], subset: &[usize]) -> Option<NormalLine> {
        for _ in 0..GAUSS_NEWTON_ITERATIONS {
            let (a, b, _) = self.normal_equations(&line, points, subset);
            let step = -(a.inverse()? * b);
            if !step.is_finite() {
                return None;
            }
            let normal = Mat2::rotation(step.y) * line.normal;
            let next = NormalLine::new(normal, normal * (line.offset + step.x))?;
            if next.normal.dot(normal) < 0.0 {
                // The offset changed sign: the step left the basin.
                return None;
            }
            line = next;
            if libm::fabs(step.x) <= GAUSS_NEWTON_TOLERANCE && libm::fabs(step.y) <= GAUSS_NEWTON_TOLERANCE {
                break;
            }
        }
        Some(line)
    }

    /// First-order standard error (meters) of the closest point of `line`
    /// fitted to `subset`, with the noise level estimated from the residuals.
    fn standard_error(&self, line: &NormalLine, points: &[Vec2], subset: &[usize]) -> f64 {
        if subset.len() < 3 {
            return f64::INFINITY;
        }
        let (a, _, cost) = self.normal_equations(line, points, subset);
        let Some(inv) = a.inverse() else {
            return f64::INFINITY;
        };
        let var_unit = cost / (subset.len() - 2) as f64;
        // The closest point is offset·n(angle): its offset and angle
        // derivatives are orthogonal, of length 1 and offset.
        let var = var_unit * (inv.m[0][0] + line.offset * line.offset * inv.m[1][1]);
        if var >= 0.0 {
            libm::sqrt(var)
        } else {
            f64::INFINITY
        }
    }
}

/// Points of `pool` supporting `line`: those within the threshold, trimmed at
/// three robust standard deviations (1.4826·MAD) of their residuals. The trim
/// radius is clamped to `[threshold·MIN_TRIM_FRACTION, threshold]`.
fn support(line: &NormalLine, points: &[Vec2], pool: &[usize], tol: Tolerance) -> Vec<usize> {
    let threshold = tol.threshold;
    let mut band: Vec<(usize, f64)> = pool
        .iter()
        .map(|&i| (i, tol.residual(line, points[i])))
        .filter(|&(_, d)| d <= threshold)
        .collect();
    if band.is_empty() {
        return Vec::new();
    }
    let mut residuals: Vec<f64> = band.iter().map(|&(_, d)| d).collect();
    let mid = residuals.len() / 2;
    let (_, median, _) = residuals.select_nth_unstable_by(mid, f64::total_cmp);
    let cutoff = (3.0 * 1.4826 * *median).clamp(threshold * MIN_TRIM_FRACTION, threshold);
    band.retain(|&(_, d)| d <= cutoff);
    band.into_iter().map(|(i, _)| i).collect()
}

/// Alternates total-least-squares refits on the robust support of `pool`
/// until the support is stable. The returned support is always measured
/// against the returned line and lies within the threshold of it.
fn refine(mut line: NormalLine, points: &[Vec2], pool: &[usize], tol: Tolerance) -> (NormalLine, Vec<usize>) {
    let mut current = support(&line, points, pool, tol);
    for _ in 0..MAX_REFINE_ROUNDS {
        let Some(fitted) = tol.fit(&line, points, &current) else {
            break;
        };
        let next = support(&fitted, points, pool, tol);
        if next.len() < 2 {
            break;
        }
        line = fitted;
        if next == current {
            return (line, current);
        }
        current = next;
    }
    let current = support(&line, points, pool, tol);
    (line, current)
}

/// RANSAC over two-point hypotheses followed by total-least-squares refinement.
///
/// Coincident sample pairs consume an iteration. Returns `None` when fewer
/// than two points are given or the best line has fewer than
/// `cfg.min_inliers` inliers.
pub fn ransac_fit_line<R: Rng>(points: &[Vec2], cfg: &DetectorConfig, rng: &mut R) -> Option<LineFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let tol = Tolerance::new(cfg.inlier_threshold, cfg);
    let mut best: Option<(NormalLine, usize)> = None;
    for _ in 0..cfg.ransac_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(hypothesis) = NormalLine::through(points[i], points[j]) else {
            continue;
        };
        let count = points.iter().filter(|p| tol.accepts(&hypothesis, **p)).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((hypothesis, count));
            if count == n {
                break;
            }
        }
    }
    let (hypothesis, count) = best?;
    if count < cfg.min_inliers {
        return None;
    }
    let pool: Vec<usize> = (0..n).collect();
    let (line, inliers) = refine(hypothesis, points, &pool, tol);
    (inliers.len() >= cfg.min_inliers).then_some(LineFit { line, inliers })
}

fn cluster_rng(cfg: &DetectorConfig, cluster: &Cluster) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(cluster.start as u64);
    rng
}

/// Sequential RANSAC within one cluster; inliers are local to the cluster.
fn fit_cluster(cluster: &Cluster, cfg: &DetectorConfig) -> Vec<LineFit> {
    let mut rng = cluster_rng(cfg, cluster);
    let mut remaining: Vec<usize> = (0..cluster.len()).collect();
    let mut lines: Vec<NormalLine> = Vec::new();
    // Points of lines rejected as too uncertain: they belong to a wall we
    // cannot report, so no other line may absorb them.
    let mut reserved = alloc::vec![false; cluster.len()];
    let mut subset: Vec<Vec2> = Vec::with_capacity(cluster.len());
    let tol = Tolerance::new(cfg.inlier_threshold, cfg);
    let mut attempts = 0;
    while remaining.len() >= cfg.min_cluster_size && attempts < cfg.max_lines_per_cluster {
        attempts += 1;
        subset.clear();
        subset.extend(remaining.iter().map(|&i| cluster.points[i]));
        let Some(fit) = ransac_fit_line(&subset, cfg, &mut rng) else {
            break;
        };
        if tol.standard_error(&fit.line, &subset, &fit.inliers) <= cfg.max_standard_error {
            lines.push(fit.line);
        } else {
            fit.inliers.iter().for_each(|&k| reserved[remaining[k]] = true);
        }
        let mut taken = fit.inliers.into_iter().peekable();
        let mut k = 0;
        remaining.retain(|_| {
            let keep = taken.peek() != Some(&k);
            if !keep {
                taken.next();
            }
            k += 1;
            keep
        });
    }
    loop {
        let fits = reassign(lines, &cluster.points, &reserved, cfg);
        // A sparse line interleaves with another one and gives its points
        // back; an uncertain line keeps them reserved.
        let sparsest = fits
            .iter()
            .enumerate()
            .map(|(k, f)| (k, density(&f.inliers)))
            .filter(|&(_, d)| d < cfg.min_density)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let uncertain = || {
            fits.iter()
                .enumerate()
                .map(|(k, f)| (k, tol.standard_error(&f.line, &cluster.points, &f.inliers)))
                .filter(|&(_, e)| !(e <= cfg.max_standard_error))
                .max_by(|a, b| a.1.total_cmp(&b.1))
        };
        lines = fits.iter().map(|f| f.line).collect();
        if let Some((k, _)) = sparsest {
            lines.remove(k);
        } else if let Some((k, _)) = uncertain() {
            fits[k].inliers.iter().for_each(|&i| reserved[i] = true);
            lines.remove(k);
        } else {
            return fits;
        }
    }
}

/// Assigns every point to the nearest line within the threshold and refines
/// each line on its own points, repeating until the assignment is stable.
/// Lines left with fewer than `min_inliers` supporting points are dropped.
fn reassign(mut lines: Vec<NormalLine>, points: &[Vec2], reserved: &[bool], cfg: &DetectorConfig) -> Vec<LineFit> {
    let tol = Tolerance::new(cfg.inlier_threshold, cfg);
    let assign = |lines: &[NormalLine]| -> Vec<Vec<usize>> {
        let mut sets = alloc::vec![Vec::new(); lines.len()];
        for (i, p) in points.iter().enumerate().filter(|&(i, _)| !reserved[i]) {
            let nearest = lines
                .iter()
                .enumerate()
                .map(|(k, l)| (k, tol.residual(l, *p)))
                .filter(|&(_, d)| d <= tol.threshold)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((k, _)) = nearest {
                sets[k].push(i);
            }
        }
        sets
    };
    let mut fits: Vec<LineFit> = Vec::new();
    for _ in 0..MAX_REFINE_ROUNDS {
        let pools = assign(&lines);
        let next: Vec<LineFit> = lines
            .iter()
            .zip(&pools)
            .map(|(line, pool)| {
                let (line, inliers) = refine(*line, points, pool, tol);
                LineFit { line, inliers }
            })
            .filter(|f| f.inliers.len() >= cfg.min_inliers)
            .collect();
        let stable = next.len() == fits.len() && next.iter().zip(&fits).all(|(a, b)| a.inliers == b.inliers);
        lines = next.iter().map(|f| f.line).collect();
        fits = next;
        if stable {
            break;
        }
    }
    fits.sort_by_key(|f| f.inliers[0]);
    fits
}

/// Extracts lines from each cluster by repeated fit-and-remove.
///
/// Per cluster the loop stops when fewer than `min_cluster_size` points
/// remain, RANSAC finds no line, or `max_lines_per_cluster` lines have been
/// taken. Inlier sets within a cluster are disjoint and every returned line
/// carries at least `min_inliers` points. Inliers are row indices.
pub fn seq_line_fitting(clusters: &[Cluster], cfg: &DetectorConfig) -> Vec<LineFit> {
    let mut out = Vec::new();
    for cluster in clusters {
        for mut fit in fit_cluster(cluster, cfg) {
            fit.inliers.iter_mut().for_each(|i| *i += cluster.start);
            out.push(fit);
        }
    }
    out
}

/// Whether two fits describe the same wall: normals within `merge_angle` and
/// each extent within `merge_distance` of the other line, or lines crossing
/// inside both extents (surfaces seen from one viewpoint meet only at their
/// ends).
fn same_wall(a: &LineFit, b: &LineFit, points: &[Vec2], cfg: &DetectorConfig) -> bool {
    if cfg.merge_distance <= 0.0 {
        return false;
    }
    let tol = Tolerance::new(cfg.merge_distance, cfg);
    let ends = |f: &LineFit| [points[f.inliers[0]], points[*f.inliers.last().unwrap()]];
    let parallel = a.line.normal.dot(b.line.normal) >= libm::cos(cfg.merge_angle)
        && ends(a).iter().all(|p| tol.accepts(&b.line, *p))
        && ends(b).iter().all(|p| tol.accepts(&a.line, *p));
    parallel || crosses_inside(a, b, points)
}

/// Whether the two lines intersect within the inner part of both extents,
/// leaving `CROSSING_MARGIN` of each extent free at either end.
fn crosses_inside(a: &LineFit, b: &LineFit, points: &[Vec2]) -> bool {
    let det = a.line.normal.cross(b.line.normal);
    if det == 0.0 {
        return false;
    }
    let (na, nb) = (a.line.normal, b.line.normal);
    let x = Vec2::new(a.line.offset * nb.y - b.line.offset * na.y, na.x * b.line.offset - nb.x * a.line.offset) * (1.0 / det);
    let inside = |f: &LineFit| {
        let dir = f.line.direction();
        let (lo, hi) = f.inliers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let t = dir.dot(points[i]);
            (lo.min(t), hi.max(t))
        });
        let margin = CROSSING_MARGIN * (hi - lo);
        let t = dir.dot(x);
        t > lo + margin && t < hi - margin
    };
    inside(a) && inside(b)
}

/// Merges fits of the same wall across the row. `points[i]` is row sample `i`
/// (invalid samples never appear in inlier sets).
///
/// A pair is merged when it passes [`same_wall`], or when one line refitted
/// on the union of both inlier sets keeps at least `MERGE_SUPPORT` of it and
/// `MERGE_SHARE` of each part.
fn merge_duplicates(mut fits: Vec<LineFit>, points: &[Vec2], cfg: &DetectorConfig) -> Vec<LineFit> {
    if cfg.merge_distance <= 0.0 {
        return fits;
    }
    let tol = Tolerance::new(cfg.inlier_threshold, cfg);
    'outer: loop {
        for i in 0..fits.len() {
            for j in i + 1..fits.len() {
                let mut union: Vec<usize> = fits[i].inliers.iter().chain(&fits[j].inliers).copied().collect();
                union.sort_unstable();
                union.dedup();
                let start = if fits[i].inliers.len() >= fits[j].inliers.len() {
                    fits[i].line
                } else {
                    fits[j].line
                };
                let (line, inliers) = refine(start, points, &union, tol);
                let keeps = |f: &LineFit| {
                    let kept = f.inliers.iter().filter(|k| inliers.binary_search(k).is_ok()).count();
                    kept as f64 >= MERGE_SHARE * f.inliers.len() as f64
                };
                let explains = inliers.len() as f64 >= MERGE_SUPPORT * union.len() as f64
                    && keeps(&fits[i])
                    && keeps(&fits[j]);
                if !explains && !same_wall(&fits[i], &fits[j], points, cfg) {
                    continue;
                }
                fits.remove(j);
                if inliers.len() >= cfg.min_inliers {
                    fits[i] = LineFit { line, inliers };
                } else {
                    fits.remove(i);
                }
                continue 'outer;
            }
        }
        break;
    }
    fits.sort_by_key(|f| f.inliers[0]);
    fits
}

/// Share of the index span between the first and last inlier taken by
/// inliers; a wall seen from one viewpoint covers a contiguous run.
fn density(inliers: &[usize]) -> f64 {
    match (inliers.first(), inliers.last()) {
        (Some(&a), Some(&b)) => inliers.len() as f64 / (b - a + 1) as f64,
        _ => 0.0,
    }
}

/// Full detector: clustering, sequential fitting, merging and conversion to
/// sensor-frame wall parameters. Lines through the sensor origin are dropped.
pub fn detect_walls(row: &ScanRow, cfg: &DetectorConfig) -> Vec<Observation> {
    let clusters = cluster_by_invalid(row, cfg.min_cluster_size);
    if clusters.is_empty() {
        return Vec::new();
    }
    let fits = seq_line_fitting(&clusters, cfg);
    // Invalid samples are never referenced by an inlier set.
    let points: Vec<Vec2> = row.samples().iter().map(|s| s.unwrap_or(Vec2::ZERO)).collect();
    let fits = merge_duplicates(fits, &points, cfg);
    let tol = Tolerance::new(cfg.inlier_threshold, cfg);
    fits.iter()
        .filter(|fit| tol.standard_error(&fit.line, &points, &fit.inliers) <= cfg.max_standard_error)
        .filter_map(|fit| {
            let wall = WallParam::from_vec(fit.line.closest_point()).ok()?;
            let dir = fit.line.direction();
            let (lo, hi) = fit.inliers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let s = dir.dot(points[i]);
                (lo.min(s), hi.max(s))
            });
            let base = fit.line.closest_point();
            Some(Observation {
                wall,
                inliers: fit.inliers.len(),
                extent: Some((base + dir * lo, base + dir * hi)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_model::mc_to_uv;

    fn p(x: f64, y: f64) -> Option<Vec2> {
        Some(Vec2::new(x, y))
    }

    fn line_points(n: usize, f: impl Fn(f64) -> Vec2) -> Vec<Vec2> {
        (0..n).map(|i| f(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn clusters_split_at_invalid() {
        let row = ScanRow::new(alloc::vec![p(1.0, 0.0), p(1.0, 1.0), None, p(2.0, 0.0)]).unwrap();
        let c = cluster_by_invalid(&row, 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].points, alloc::vec![Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)]);
        assert_eq!((c[1].start, c[1].points.clone()), (3, alloc::vec![Vec2::new(2.0, 0.0)]));
    }

    #[test]
    fn all_invalid_row_has_no_clusters() {
        let row = ScanRow::invalid(10).unwrap();
        assert!(cluster_by_invalid(&row, 1).is_empty());
        assert!(detect_walls(&row, &DetectorConfig::default()).is_empty());
    }

    #[test]
    fn short_clusters_dropped() {
        let row = ScanRow::new(alloc::vec![
            None,
            p(1.0, 0.0),
            p(1.0, 1.0),
            p(1.0, 2.0),
            None,
            None,
            p(4.0, 0.0)
        ])
        .unwrap();
        let c = cluster_by_invalid(&row, 2);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].start, 1);
        assert_eq!(c[0].len(), 3);
    }

    #[test]
    fn ransac_noiseless_horizontal_line() {
        let pts = line_points(50, |s| Vec2::new(-2.0 + 4.0 * s, 2.0));
        let cfg = DetectorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fit = ransac_fit_line(&pts, &cfg, &mut rng).unwrap();
        assert_eq!(fit.inliers.len(), 50);
        let mc = fit.line.to_mc().unwrap();
        assert!(mc.m().abs() < 1e-12 && (mc.c() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ransac_below_inlier_floor() {
        let pts = [Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 1.0)];
        let cfg = DetectorConfig {
            min_inliers: 10,
            min_cluster_size: 10,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ransac_fit_line(&pts, &cfg, &mut rng).is_none());
        assert!(ransac_fit_line(&pts[..1], &cfg, &mut rng).is_none());
    }

    #[test]
    fn ransac_survives_coincident_points() {
        let pts = [Vec2::new(1.0, 1.0); 20];
        let cfg = DetectorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ransac_fit_line(&pts, &cfg, &mut rng).is_none());
    }

    #[test]
    fn tls_fit_vertical_line() {
        let pts = line_points(10, |s| Vec2::new(3.0, -1.0 + 2.0 * s));
        let line = NormalLine::fit(&pts).unwrap();
        assert!((line.closest_point() - Vec2::new(3.0, 0.0)).norm() < 1e-12);
        assert!(line.to_mc().is_none());
    }

    #[test]
    fn normal_form_agrees_with_mc_conversion() {
        let a = Vec2::new(-1.0, 3.0);
        let b = Vec2::new(2.0, 1.5);
        let line = NormalLine::through(a, b).unwrap();
        let uv = mc_to_uv(&line.to_mc().unwrap()).unwrap();
        assert!((uv.as_vec() - line.closest_point()).norm() < 1e-12);
    }

    #[test]
    fn collinear_cluster_gives_one_line() {
        let pts = line_points(60, |s| Vec2::new(2.0, -1.5 + 3.0 * s));
        let clusters = [Cluster { start: 0, points: pts }];
        let fits = seq_line_fitting(&clusters, &DetectorConfig::default());
        assert_eq!(fits.len(), 1);
        assert_eq!(fits[0].inliers.len(), 60);
    }

    #[test]
    fn scattered_cluster_gives_no_line() {
        let pts = alloc::vec![
            Vec2::new(0.0, 1.0),
            Vec2::new(3.0, 0.2),
            Vec2::new(-1.0, 2.5),
            Vec2::new(0.7, -2.0),
            Vec2::new(4.0, 4.0)
        ];
        let cfg = DetectorConfig {
            min_inliers: 10,
            min_cluster_size: 10,
            ..Default::default()
        };
        assert!(seq_line_fitting(&[Cluster { start: 0, points: pts.clone() }], &cfg).is_empty());
        let cfg = DetectorConfig {
            min_inliers: 2,
            min_cluster_size: 2,
            ..Default::default()
        };
        // Two-point lines are legal with a floor of 2, but the guard caps them.
        assert!(seq_line_fitting(&[Cluster { start: 0, points: pts }], &cfg).len() <= cfg.max_lines_per_cluster);
    }

    #[test]
    fn validate_rejects_bad_config() {
        let cfg = DetectorConfig {
            min_cluster_size: 3,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig {
                field: "detector.min_cluster_size",
                ..
            })
        ));
        assert!(DetectorConfig {
            inlier_threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(DetectorConfig::default().validate().is_ok());
    }

    fn scaled() -> DetectorConfig {
        DetectorConfig {
            range_scaled: true,
            ..Default::default()
        }
    }

    fn fit_of(points: &[Vec2], cfg: &DetectorConfig) -> LineFit {
        let pool: Vec<usize> = (0..points.len()).collect();
        let start = NormalLine::through(points[0], points[points.len() - 1]).unwrap();
        let (line, inliers) = refine(start, points, &pool, Tolerance::new(cfg.inlier_threshold, cfg));
        LineFit { line, inliers }
    }

    #[test]
    fn range_fit_exact_on_noiseless_wall() {
        let pts = line_points(40, |s| Vec2::new(3.0 - s, -2.0 + 4.0 * s));
        let truth = NormalLine::through(pts[0], pts[39]).unwrap();
        let cfg = scaled();
        let tol = Tolerance::new(cfg.inlier_threshold, &cfg);
        let start = NormalLine::new(Mat2::rotation(0.05) * truth.normal, truth.closest_point() * 1.03).unwrap();
        let subset: Vec<usize> = (0..40).collect();
        let line = tol.fit(&start, &pts, &subset).unwrap();
        assert!((line.closest_point() - truth.closest_point()).norm() < 1e-10);
        assert!(tol.standard_error(&line, &pts, &subset) < 1e-10);
    }

    #[test]
    fn grazing_rays_never_support() {
        let line = NormalLine::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        let cfg = scaled();
        let tol = Tolerance::new(cfg.inlier_threshold, &cfg);
        assert!(tol.accepts(&line, Vec2::new(1.0, 2.0)));
        // Incidence 1/sqrt(1 + 20²) is below the floor although the point is on the line.
        assert_eq!(tol.residual(&line, Vec2::new(1.0, 20.0)), f64::INFINITY);
        assert!(Tolerance::new(cfg.inlier_threshold, &DetectorConfig::default()).accepts(&line, Vec2::new(1.0, 20.0)));
    }

    #[test]
    fn range_residual_grows_with_range() {
        let line = NormalLine::new(Vec2::new(1.0, 0.0), Vec2::new(4.0, 0.0)).unwrap();
        let cfg = scaled();
        let tol = Tolerance::new(cfg.inlier_threshold, &cfg);
        // A 0.1 m range error at 4 m counts as 0.1/16.
        assert!((tol.residual(&line, Vec2::new(4.1, 0.0)) - 0.1 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn density_of_runs() {
        assert_eq!(density(&[3, 4, 5, 6]), 1.0);
        assert_eq!(density(&[0, 2, 4, 6, 8]), 5.0 / 9.0);
        assert_eq!(density(&[]), 0.0);
    }

    #[test]
    fn crossing_inside_both_extents() {
        let a = line_points(20, |s| Vec2::new(2.0, -1.0 + 2.0 * s));
        let b = line_points(20, |s| Vec2::new(1.0 + 2.0 * s, -0.5 + s));
        let c = line_points(20, |s| Vec2::new(2.0 + s, 1.0 + s));
        let pts: Vec<Vec2> = a.iter().chain(&b).chain(&c).copied().collect();
        let fit = |k: usize| LineFit {
            line: NormalLine::fit(&pts[20 * k..20 * k + 20]).unwrap(),
            inliers: (20 * k..20 * k + 20).collect(),
        };
        assert!(crosses_inside(&fit(0), &fit(1), &pts));
        // A corner: the lines meet at the end of the first extent.
        assert!(!crosses_inside(&fit(0), &fit(2), &pts));
    }

    #[test]
    fn split_wall_merges() {
        let mut pts = line_points(60, |s| Vec2::new(2.0, -1.5 + 3.0 * s));
        pts[30] = Vec2::new(9.0, 9.0);
        let cfg = DetectorConfig::default();
        let halves = alloc::vec![fit_of(&pts[..30], &cfg), {
            let f = fit_of(&pts[31..], &cfg);
            LineFit {
                line: f.line,
                inliers: f.inliers.iter().map(|i| i + 31).collect(),
            }
        }];
        let merged = merge_duplicates(halves, &pts, &cfg);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].inliers.len(), 59);
    }

    #[test]
    fn short_wall_beside_long_one_survives_merge() {
        let long = line_points(600, |s| Vec2::new(2.0, -3.0 + 5.0 * s));
        let short = line_points(20, |s| Vec2::new(2.0 - 0.3 * s, 2.0 + 0.01 * s));
        let pts: Vec<Vec2> = long.iter().chain(&short).copied().collect();
        let cfg = DetectorConfig::default();
        let fits = alloc::vec![
            LineFit {
                line: NormalLine::fit(&long).unwrap(),
                inliers: (0..600).collect()
            },
            LineFit {
                line: NormalLine::fit(&short).unwrap(),
                inliers: (600..620).collect()
            },
        ];
        assert_eq!(merge_duplicates(fits, &pts, &cfg).len(), 2);
    }

    #[test]
    fn uncertain_lines_are_dropped() {
        // Alternating offsets: a line well inside the threshold but with a
        // large standard error relative to a tight bound.
        let pts: Vec<Vec2> = (0..40)
            .map(|i| Vec2::new(2.0 + if i % 2 == 0 { 0.01 } else { -0.01 }, -1.0 + 2.0 * i as f64 / 39.0))
            .collect();
        let row = ScanRow::new(pts.iter().map(|&q| Some(q)).collect()).unwrap();
        let loose = DetectorConfig::default();
        assert_eq!(detect_walls(&row, &loose).len(), 1);
        let strict = DetectorConfig {
            max_standard_error: 1e-4,
            ..loose
        };
        assert!(detect_walls(&row, &strict).is_empty());
    }

    #[test]
    fn validate_new_bounds() {
        for cfg in [
            DetectorConfig {
                min_density: 1.5,
                ..Default::default()
            },
            DetectorConfig {
                max_standard_error: 0.0,
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
