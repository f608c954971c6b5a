//! Keypoint localization accuracy over a sweep of pixel thresholds, and
//! strict per-endpoint Percentage of Correct Parts.
//!
//! Ground-truth joints marked absent are left out of every count. A
//! predicted joint that is absent counts as a miss.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{Pose, SkeletonTopology};

/// Thresholds used when none are given, in pixels.
pub const DEFAULT_THRESHOLDS: [f64; 8] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];
pub const DEFAULT_PCP_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{what}: predicted has {predicted}, ground truth has {truth}")]
    LengthMismatch {
        what: &'static str,
        predicted: usize,
        truth: usize,
    },
    #[error("no ground-truth joint is annotated in any frame")]
    NoEvaluableFrames,
    #[error("limb `{limb}` references part index {part} outside the topology")]
    UnknownLimbEndpoint { limb: String, part: usize },
    #[error("no thresholds given")]
    NoThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartAccuracy {
    pub name: String,
    /// Frames in which the ground-truth joint is annotated.
    pub evaluated: usize,
    /// Frames with error strictly below each threshold.
    pub correct: Vec<usize>,
    /// `100 · correct / evaluated` per threshold; `None` with no evaluated frames.
    pub percent: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub thresholds: Vec<f64>,
    /// One row per joint in topology order.
    pub parts: Vec<PartAccuracy>,
    /// Left/right joints pooled under their shared name (e.g. `elbow`).
    pub groups: Vec<PartAccuracy>,
    /// Mean of the per-joint percentages, per threshold.
    pub mean: Vec<f64>,
}

/// Strips a left/right marker from a part name, so `left_elbow` and
/// `r_elbow` both map to `elbow`.
pub fn side_free_name(name: &str) -> &str {
    const PREFIXES: [&str; 6] = ["left_", "right_", "left-", "right-", "l_", "r_"];
    const SUFFIXES: [&str; 4] = ["_left", "_right", "_l", "_r"];
    for p in PREFIXES {
        if let Some(rest) = name.strip_prefix(p) {
            if !rest.is_empty() {
                return rest;
            }
        }
    }
    for s in SUFFIXES {
        if let Some(rest) = name.strip_suffix(s) {
            if !rest.is_empty() {
                return rest;
            }
        }
    }
    name
}

fn check_alignment(predicted: &[Pose], truth: &[Pose], parts: usize) -> Result<(), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            what: "frame count",
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    for (p, g) in predicted.iter().zip(truth) {
        if p.len() != parts || g.len() != parts {
            return Err(EvalError::LengthMismatch {
                what: "part count",
                predicted: p.len(),
                truth: g.len(),
            });
        }
    }
    Ok(())
}

fn percentages(correct: &[usize], evaluated: usize) -> Vec<Option<f64>> {
    correct
        .iter()
        .map(|&c| (evaluated > 0).then(|| 100.0 * c as f64 / evaluated as f64))
        .collect()
}

pub fn localization_accuracy(
    predicted: &[Pose],
    truth: &[Pose],
    topology: &SkeletonTopology,
    thresholds: &[f64],
) -> Result<AccuracyReport, EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    let n = topology.len();
    check_alignment(predicted, truth, n)?;

    let mut evaluated = vec![0usize; n];
    let mut correct = vec![vec![0usize; thresholds.len()]; n];
    for (p, g) in predicted.iter().zip(truth) {
        for part in 0..n {
            let Some(gt) = g.get(part) else { continue };
            evaluated[part] += 1;
            let Some(pred) = p.get(part) else { continue };
            let err = pred.distance(gt);
            for (k, &omega) in thresholds.iter().enumerate() {
                if err < omega {
                    correct[part][k] += 1;
                }
            }
        }
    }
    if evaluated.iter().all(|&e| e == 0) {
        return Err(EvalError::NoEvaluableFrames);
    }

    let parts: Vec<PartAccuracy> = (0..n)
        .map(|i| PartAccuracy {
            name: topology.name(i).to_string(),
            evaluated: evaluated[i],
            percent: percentages(&correct[i], evaluated[i]),
            correct: correct[i].clone(),
        })
        .collect();

    let mut groups: Vec<PartAccuracy> = Vec::new();
    for row in &parts {
        let name = side_free_name(&row.name);
        match groups.iter_mut().find(|g| g.name == name) {
            Some(g) => {
                g.evaluated += row.evaluated;
                for (a, b) in g.correct.iter_mut().zip(&row.correct) {
                    *a += b;
                }
            }
            None => groups.push(PartAccuracy {
                name: name.to_string(),
                evaluated: row.evaluated,
                correct: row.correct.clone(),
                percent: Vec::new(),
            }),
        }
    }
    for g in &mut groups {
        g.percent = percentages(&g.correct, g.evaluated);
    }

    let mean = (0..thresholds.len())
        .map(|k| {
            let vals: Vec<f64> = parts.iter().filter_map(|p| p.percent[k]).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();

    Ok(AccuracyReport {
        thresholds: thresholds.to_vec(),
        parts,
        groups,
        mean,
    })
}

/// A limb is the segment between two joints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limb {
    pub name: String,
    pub a: usize,
    pub b: usize,
}

/// Every parent/child edge of the topology as a limb named `parent-child`.
pub fn limbs_from_topology(topology: &SkeletonTopology) -> Vec<Limb> {
    topology
        .edges()
        .map(|(p, c)| Limb {
            name: format!("{}-{}", topology.name(p), topology.name(c)),
            a: p,
            b: c,
        })
        .collect()
}

/// Conventional limb category (upper arm, lower leg, …) for a pair of
/// joint names, falling back to `a-b` with sides removed.
pub fn limb_category(a: &str, b: &str) -> String {
    let (a, b) = (side_free_name(a), side_free_name(b));
    let has = |x: &str| a == x || b == x;
    let category = if has("shoulder") && has("elbow") {
        Some("upper arm")
    } else if has("elbow") && has("wrist") {
        Some("lower arm")
    } else if has("hip") && has("knee") {
        Some("upper leg")
    } else if has("knee") && (has("foot") || has("ankle")) {
        Some("lower leg")
    } else {
        None
    };
    category.map_or_else(|| format!("{a}-{b}"), str::to_string)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimbScore {
    pub name: String,
    pub evaluated: usize,
    pub correct: usize,
    /// Frames skipped because the ground-truth limb has zero length.
    pub zero_length: usize,
    /// `correct / evaluated`; `None` with no evaluated frames.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpReport {
    pub ratio: f64,
    pub limbs: Vec<LimbScore>,
    /// Limbs pooled by category, in first-appearance order.
    pub categories: Vec<LimbScore>,
    /// Mean of the per-limb scores that are defined.
    pub average: Option<f64>,
}

/// Strict PCP: a limb is correct when both predicted endpoints lie within
/// `ratio ·` ground-truth limb length of their true positions.
pub fn pcp(
    predicted: &[Pose],
    truth: &[Pose],
    topology: &SkeletonTopology,
    limbs: &[Limb],
    ratio: f64,
) -> Result<PcpReport, EvalError> {
    let n = topology.len();
    check_alignment(predicted, truth, n)?;
    for limb in limbs {
        for part in [limb.a, limb.b] {
            if part >= n {
                return Err(EvalError::UnknownLimbEndpoint {
                    limb: limb.name.clone(),
                    part,
                });
            }
        }
    }

    let mut scores: Vec<LimbScore> = limbs
        .iter()
        .map(|l| LimbScore {
            name: l.name.clone(),
            evaluated: 0,
            correct: 0,
            zero_length: 0,
            score: None,
        })
        .collect();
    for (p, g) in predicted.iter().zip(truth) {
        for (limb, s) in limbs.iter().zip(scores.iter_mut()) {
            let (Some(ga), Some(gb)) = (g.get(limb.a), g.get(limb.b)) else {
                continue;
            };
            let length = ga.distance(gb);
            if length == 0.0 {
                s.zero_length += 1;
                continue;
            }
            s.evaluated += 1;
            let tol = ratio * length;
            let hit = |pred: Option<crate::skeleton::Point>, gt| pred.is_some_and(|x| x.distance(gt) <= tol);
            if hit(p.get(limb.a), ga) && hit(p.get(limb.b), gb) {
                s.correct += 1;
            }
        }
    }
    let finish = |s: &mut LimbScore| {
        s.score = (s.evaluated > 0).then(|| s.correct as f64 / s.evaluated as f64);
    };
    scores.iter_mut().for_each(finish);

    let mut categories: Vec<LimbScore> = Vec::new();
    for (limb, s) in limbs.iter().zip(&scores) {
        let name = limb_category(topology.name(limb.a), topology.name(limb.b));
        match categories.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.evaluated += s.evaluated;
                c.correct += s.correct;
                c.zero_length += s.zero_length;
            }
            None => categories.push(LimbScore {
                name,
                score: None,
                ..s.clone()
            }),
        }
    }
    categories.iter_mut().for_each(finish);

    let defined: Vec<f64> = scores.iter().filter_map(|s| s.score).collect();
    let average = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(PcpReport {
        ratio,
        limbs: scores,
        categories,
        average,
    })
}

fn fmt_opt(x: Option<f64>, scale: f64) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.2}", v * scale))
}

impl AccuracyReport {
    /// Aligned table: one row per joint, then pooled groups and the mean.
    pub fn to_text(&self) -> String {
        let width = self
            .parts
            .iter()
            .chain(&self.groups)
            .map(|p| p.name.len())
            .max()
            .unwrap_or(4)
            .max(8);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "part");
        for t in &self.thresholds {
            let _ = write!(out, " {:>7}", format!("Ω={t}"));
        }
        out.push('\n');
        let mut row = |name: &str, vals: &mut dyn Iterator<Item = String>| {
            let _ = write!(out, "{name:<width$}");
            for v in vals {
                let _ = write!(out, " {v:>7}");
            }
            out.push('\n');
        };
        for p in &self.parts {
            row(&p.name, &mut p.percent.iter().map(|x| fmt_opt(*x, 1.0)));
        }
        for g in &self.groups {
            row(&format!("[{}]", g.name), &mut g.percent.iter().map(|x| fmt_opt(*x, 1.0)));
        }
        row("mean", &mut self.mean.iter().map(|x| format!("{x:.2}")));
        out
    }

    /// CSV with header `part,kind,evaluated,<thresholds…>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("part,kind,evaluated");
        for t in &self.thresholds {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        let mut emit = |name: &str, kind: &str, evaluated: String, vals: Vec<String>| {
            let _ = writeln!(out, "{name},{kind},{evaluated},{}", vals.join(","));
        };
        let cell = |x: &Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.parts {
            emit(&p.name, "joint", p.evaluated.to_string(), p.percent.iter().map(cell).collect());
        }
        for g in &self.groups {
            emit(&g.name, "group", g.evaluated.to_string(), g.percent.iter().map(cell).collect());
        }
        emit("mean", "mean", String::new(), self.mean.iter().map(f64::to_string).collect());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl PcpReport {
    pub fn to_text(&self) -> String {
        let width = self
            .limbs
            .iter()
            .chain(&self.categories)
            .map(|l| l.name.len())
            .max()
            .unwrap_or(4)
            .max(8);
        let mut out = format!("{:<width$} {:>6} {:>9}\n", "limb", "PCP", "evaluated");
        for l in &self.limbs {
            let _ = writeln!(out, "{:<width$} {:>6} {:>9}", l.name, fmt_opt(l.score, 1.0), l.evaluated);
        }
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<width$} {:>6} {:>9}",
                format!("[{}]", c.name),
                fmt_opt(c.score, 1.0),
                c.evaluated
            );
        }
        let _ = writeln!(out, "{:<width$} {:>6}", "average", fmt_opt(self.average, 1.0));
        out
    }

    /// CSV with header `limb,kind,evaluated,correct,zero_length,pcp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("limb,kind,evaluated,correct,zero_length,pcp\n");
        for (kind, rows) in [("limb", &self.limbs), ("category", &self.categories)] {
            for l in rows {
                let _ = writeln!(
                    out,
                    "{},{kind},{},{},{},{}",
                    l.name,
                    l.evaluated,
                    l.correct,
                    l.zero_length,
                    l.score.map(|v| v.to_string()).unwrap_or_default()
                );
            }
        }
        let _ = writeln!(
            out,
            "average,average,,,,{}",
            self.average.map(|v| v.to_string()).unwrap_or_default()
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
