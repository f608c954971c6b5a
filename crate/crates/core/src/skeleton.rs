//! Part trees and poses.
//!
//! A [`SkeletonTopology`] is an ordered list of named parts with parent links.
//! The tracker visits parts parent-first, so the only structural requirement
//! is that the links form a single rooted tree.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("skeleton has no parts")]
    Empty,
    #[error("part {index} has an empty name")]
    EmptyName { index: usize },
    #[error("duplicate part name `{name}`")]
    DuplicateName { name: String },
    #[error("part `{part}` references unknown parent `{parent}`")]
    UnknownParent { part: String, parent: String },
    #[error("no root part: every part has a parent")]
    NoRoot,
    #[error("multiple root parts: {}", .parts.join(", "))]
    MultipleRoots { parts: Vec<String> },
    #[error("parent links form a cycle through: {}", .parts.join(" -> "))]
    CycleDetected { parts: Vec<String> },
    #[error("parent and part lists differ in length ({parents} vs {parts})")]
    LengthMismatch { parts: usize, parents: usize },
}

/// Validated part tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTopology {
    parts: Vec<String>,
    parent: Vec<Option<usize>>,
    root: usize,
}

/// Serialized form of one part: its name and the name of its parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl SkeletonTopology {
    /// Builds a topology from part names and per-part parent indices.
    pub fn new(parts: Vec<String>, parent: Vec<Option<usize>>) -> Result<Self, SkeletonError> {
        let root = validate(&parts, &parent)?;
        Ok(Self {
            parts,
            parent,
            root,
        })
    }

    /// Builds a topology from `(name, parent name)` pairs.
    pub fn from_specs(specs: &[PartSpec]) -> Result<Self, SkeletonError> {
        let parts: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        let mut parent = Vec::with_capacity(specs.len());
        for spec in specs {
            let link = match &spec.parent {
                None => None,
                Some(p) => Some(parts.iter().position(|n| n == p).ok_or_else(|| {
                    SkeletonError::UnknownParent {
                        part: spec.name.clone(),
                        parent: p.clone(),
                    }
                })?),
            };
            parent.push(link);
        }
        Self::new(parts, parent)
    }

    pub fn to_specs(&self) -> Vec<PartSpec> {
        self.parts
            .iter()
            .zip(&self.parent)
            .map(|(name, p)| PartSpec {
                name: name.clone(),
                parent: p.map(|i| self.parts[i].clone()),
            })
            .collect()
    }

    /// The 14-joint full-body tree rooted at the head.
    pub fn full_body() -> Self {
        let specs: &[(&str, Option<&str>)] = &[
            ("head", None),
            ("neck", Some("head")),
            ("left_shoulder", Some("neck")),
            ("right_shoulder", Some("neck")),
            ("left_elbow", Some("left_shoulder")),
            ("right_elbow", Some("right_shoulder")),
            ("left_wrist", Some("left_elbow")),
            ("right_wrist", Some("right_elbow")),
            ("left_hip", Some("neck")),
            ("right_hip", Some("neck")),
            ("left_knee", Some("left_hip")),
            ("right_knee", Some("right_hip")),
            ("left_foot", Some("left_knee")),
            ("right_foot", Some("right_knee")),
        ];
        let specs: Vec<PartSpec> = specs
            .iter()
            .map(|(n, p)| PartSpec {
                name: n.to_string(),
                parent: p.map(str::to_string),
            })
            .collect();
        Self::from_specs(&specs).expect("built-in full-body tree is valid")
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[String] {
        &self.parts
    }

    pub fn name(&self, part: usize) -> &str {
        &self.parts[part]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|n| n == name)
    }

    pub fn parent(&self, part: usize) -> Option<usize> {
        self.parent[part]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn children(&self, part: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(move |(_, p)| **p == Some(part))
            .map(|(i, _)| i)
    }

    /// `(parent, child)` pairs in child declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (p, i)))
    }

    /// Parent-before-child visiting order: depth-first preorder from the
    /// root, children taken in declaration order.
    pub fn traversal_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(part) = stack.pop() {
            order.push(part);
            let children: Vec<usize> = self.children(part).collect();
            stack.extend(children.into_iter().rev());
        }
        order
    }
}

/// Checks the tree invariants and returns the root index.
pub fn validate(parts: &[String], parent: &[Option<usize>]) -> Result<usize, SkeletonError> {
    if parts.len() != parent.len() {
        return Err(SkeletonError::LengthMismatch {
            parts: parts.len(),
            parents: parent.len(),
        });
    }
    if parts.is_empty() {
        return Err(SkeletonError::Empty);
    }
    let mut seen = HashSet::new();
    for (index, name) in parts.iter().enumerate() {
        if name.is_empty() {
            return Err(SkeletonError::EmptyName { index });
        }
        if !seen.insert(name.as_str()) {
            return Err(SkeletonError::DuplicateName { name: name.clone() });
        }
    }
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            if p >= parts.len() {
                return Err(SkeletonError::UnknownParent {
                    part: parts[i].clone(),
                    parent: format!("#{p}"),
                });
            }
        }
    }

    let roots: Vec<usize> = (0..parts.len()).filter(|&i| parent[i].is_none()).collect();
    // A self-loop or longer cycle must be reported even when the root count is
    // also wrong, so look for cycles first.
    if let Some(cycle) = find_cycle(parent) {
        return Err(SkeletonError::CycleDetected {
            parts: cycle.into_iter().map(|i| parts[i].clone()).collect(),
        });
    }
    match roots.as_slice() {
        [] => Err(SkeletonError::NoRoot),
        [root] => Ok(*root),
        many => Err(SkeletonError::MultipleRoots {
            parts: many.iter().map(|&i| parts[i].clone()).collect(),
        }),
    }
}

/// Follows parent links from every part; returns the first cycle found.
fn find_cycle(parent: &[Option<usize>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on current path, 2 = known to reach a root
    let mut state = vec![0u8; parent.len()];
    for start in 0..parent.len() {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    let from = path.iter().position(|&p| p == i).unwrap_or(0);
                    let mut cycle = path[from..].to_vec();
                    cycle.push(i);
                    return Some(cycle);
                }
                _ => {
                    state[i] = 1;
                    path.push(i);
                    cur = parent[i];
                }
            }
        }
        for i in path {
            state[i] = 2;
        }
    }
    None
}

/// Image coordinates of a joint: `u` is the column, `v` the row, both in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn sub(self, other: Point) -> [f64; 2] {
        [self.u - other.u, self.v - other.v]
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([u, v]: [f64; 2]) -> Self {
        Self { u, v }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.u, p.v]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// Joint positions for one frame, aligned with a topology's part order.
/// `None` marks a joint that is unannotated (ground truth only).
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub frame_index: usize,
    pub positions: Vec<Option<Point>>,
}

impl Pose {
    pub fn new(frame_index: usize, positions: Vec<Option<Point>>) -> Self {
        Self {
            frame_index,
            positions,
        }
    }

    pub fn complete(frame_index: usize, points: impl IntoIterator<Item = Point>) -> Self {
        Self {
            frame_index,
            positions: points.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, part: usize) -> Option<Point> {
        self.positions.get(part).copied().flatten()
    }

    pub fn is_complete(&self) -> bool {
        self.positions.iter().all(|p| p.is_some_and(Point::is_finite))
    }

    /// All positions, or `None` if any joint is absent.
    pub fn points(&self) -> Option<Vec<Point>> {
        self.positions.iter().copied().collect()
    }
}
