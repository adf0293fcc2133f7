//! Map accuracy against ground truth.

use std::fmt;

use wallmap_core::WallParam;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallMatch {
    pub truth_id: u64,
    pub map_id: u64,
    /// Distance between the closest points, meters.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub gate: f64,
    pub n_map: usize,
    pub n_truth: usize,
    /// Sorted by truth id.
    pub matches: Vec<WallMatch>,
    pub unmatched_map: Vec<u64>,
    pub unmatched_truth: Vec<u64>,
}

impl EvalReport {
    /// Matched share of the map; 1 for an empty map.
    pub fn precision(&self) -> f64 {
        ratio(self.matches.len(), self.n_map)
    }

    /// Matched share of the ground truth; 1 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio(self.matches.len(), self.n_truth)
    }

    /// Root mean square matched error; `None` without matches.
    pub fn rmse(&self) -> Option<f64> {
        let n = self.matches.len();
        (n > 0).then(|| (self.matches.iter().map(|m| m.error * m.error).sum::<f64>() / n as f64).sqrt())
    }

    pub fn mean_error(&self) -> Option<f64> {
        let n = self.matches.len();
        (n > 0).then(|| self.matches.iter().map(|m| m.error).sum::<f64>() / n as f64)
    }

    pub fn max_error(&self) -> Option<f64> {
        self.matches.iter().map(|m| m.error).reduce(f64::max)
    }
}

fn ratio(k: usize, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        k as f64 / n as f64
    }
}

/// One-to-one matching of map walls to true walls within `gate` meters,
/// closest pairs first. Ties go to the lower truth id, then map id.
pub fn evaluate(map: &[(u64, WallParam)], truth: &[(u64, WallParam)], gate: f64) -> EvalReport {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, (_, t)) in truth.iter().enumerate() {
        for (mi, (_, m)) in map.iter().enumerate() {
            let e = (t.as_vec() - m.as_vec()).norm();
            if e <= gate {
                pairs.push((e, ti, mi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(truth[a.1].0.cmp(&truth[b.1].0)).then(map[a.2].0.cmp(&map[b.2].0)));

    let mut truth_used = vec![false; truth.len()];
    let mut map_used = vec![false; map.len()];
    let mut matches = Vec::new();
    for (error, ti, mi) in pairs {
        if truth_used[ti] || map_used[mi] {
            continue;
        }
        truth_used[ti] = true;
        map_used[mi] = true;
        matches.push(WallMatch {
            truth_id: truth[ti].0,
            map_id: map[mi].0,
            error,
        });
    }
    matches.sort_by_key(|m| m.truth_id);
    let unused = |items: &[(u64, WallParam)], used: &[bool]| -> Vec<u64> {
        items.iter().zip(used).filter(|(_, &u)| !u).map(|((id, _), _)| *id).collect()
    };
    EvalReport {
        gate,
        n_map: map.len(),
        n_truth: truth.len(),
        unmatched_map: unused(map, &map_used),
        unmatched_truth: unused(truth, &truth_used),
        matches,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |v| format!("{v:.6}"))
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gate_m {}", self.gate)?;
        writeln!(f, "landmarks {}", self.n_map)?;
        writeln!(f, "truth {}", self.n_truth)?;
        writeln!(f, "matched {}", self.matches.len())?;
        writeln!(f, "precision {:.6}", self.precision())?;
        writeln!(f, "recall {:.6}", self.recall())?;
        writeln!(f, "rmse_m {}", opt(self.rmse()))?;
        writeln!(f, "mean_error_m {}", opt(self.mean_error()))?;
        writeln!(f, "max_error_m {}", opt(self.max_error()))?;
        writeln!(f, "truth_id,map_id,error_m")?;
        for m in &self.matches {
            writeln!(f, "{},{},{:.6}", m.truth_id, m.map_id, m.error)?;
        }
        for id in &self.unmatched_truth {
            writeln!(f, "{id},,")?;
        }
        for id in &self.unmatched_map {
            writeln!(f, ",{id},")?;
        }
        Ok(())
    }
}
