//! Curriculum ordering of single- and mixed-degradation datasets.
//!
//! A task's level is the length of the longest parent chain above it, so a
//! mixed task is always scheduled after every task it is composed from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: String,
    #[serde(default)]
    pub parents: BTreeSet<String>,
    pub size: u64,
}

impl TaskNode {
    pub fn new(id: &str, parents: &[&str], size: u64) -> Self {
        Self {
            id: id.to_string(),
            parents: parents.iter().map(|p| p.to_string()).collect(),
            size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub level: usize,
    pub id: String,
    pub size: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
}

impl Schedule {
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Fixed-width table: position, level, id, size.
    pub fn to_table(&self) -> String {
        let wid = self.entries.iter().map(|e| e.id.len()).max().unwrap_or(0).max(4);
        let mut out = format!("{:>4}  {:>5}  {:<wid$}  {:>10}\n", "#", "level", "task", "size");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{:>4}  {:>5}  {:<wid$}  {:>10}", i + 1, e.level, e.id, e.size);
        }
        out
    }
}

/// Parses a JSON array of `{id, parents, size}` records.
pub fn nodes_from_json(text: &str) -> Result<Vec<TaskNode>> {
    serde_json::from_str(text).map_err(|e| Error::config(format!("task graph: {e}")))
}

fn index_nodes(nodes: &[TaskNode]) -> Result<BTreeMap<&str, &TaskNode>> {
    let mut by_id = BTreeMap::new();
    for n in nodes {
        if by_id.insert(n.id.as_str(), n).is_some() {
            return Err(Error::Graph(format!("duplicate task id `{}`", n.id)));
        }
    }
    for n in nodes {
        if n.parents.contains(&n.id) {
            return Err(Error::Graph(format!("task `{}` lists itself as a parent", n.id)));
        }
        if let Some(p) = n.parents.iter().find(|p| !by_id.contains_key(p.as_str())) {
            return Err(Error::Graph(format!("task `{}` has unknown parent `{p}`", n.id)));
        }
    }
    Ok(by_id)
}

/// Longest-path depth of every node; a cycle is reported with one member.
fn levels<'a>(by_id: &BTreeMap<&'a str, &'a TaskNode>) -> Result<BTreeMap<&'a str, usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: BTreeMap<&str, Mark> = BTreeMap::new();
    let mut level: BTreeMap<&str, usize> = BTreeMap::new();
    for &root in by_id.keys() {
        if mark.contains_key(root) {
            continue;
        }
        // explicit stack: (node, parents already pushed)
        let mut stack: Vec<(&str, bool)> = vec![(root, false)];
        while let Some((id, expanded)) = stack.pop() {
            let node = by_id[id];
            if expanded {
                let lv = node.parents.iter().map(|p| level[p.as_str()] + 1).max().unwrap_or(0);
                level.insert(id, lv);
                mark.insert(id, Mark::Done);
                continue;
            }
            match mark.get(id) {
                Some(Mark::Done) => continue,
                Some(Mark::Open) => return Err(Error::Graph(format!("cycle through task `{id}`"))),
                None => {}
            }
            mark.insert(id, Mark::Open);
            stack.push((id, true));
            for p in &node.parents {
                match mark.get(p.as_str()) {
                    Some(Mark::Done) => {}
                    Some(Mark::Open) => return Err(Error::Graph(format!("cycle through task `{p}`"))),
                    None => stack.push((p.as_str(), false)),
                }
            }
        }
    }
    Ok(level)
}

/// Levels ascending; within a level, size descending then id ascending.
pub fn build_schedule(nodes: &[TaskNode]) -> Result<Schedule> {
    let by_id = index_nodes(nodes)?;
    let level = levels(&by_id)?;
    let mut entries: Vec<ScheduleEntry> = by_id
        .values()
        .map(|n| ScheduleEntry {
            level: level[n.id.as_str()],
            id: n.id.clone(),
            size: n.size,
        })
        .collect();
    entries.sort_by(|a, b| {
        a.level
            .cmp(&b.level)
            .then(b.size.cmp(&a.size))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(Schedule { entries })
}

/// `Ok(true)` iff parents precede children, levels never decrease and
/// sizes never increase within a level. A schedule that does not list
/// every node exactly once is a validation error.
pub fn validate_schedule(nodes: &[TaskNode], schedule: &Schedule) -> Result<bool> {
    let by_id = index_nodes(nodes)?;
    let mut pos: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, e) in schedule.entries.iter().enumerate() {
        if !by_id.contains_key(e.id.as_str()) {
            return Err(Error::Validation(format!("schedule lists unknown task `{}`", e.id)));
        }
        if pos.insert(e.id.as_str(), i).is_some() {
            return Err(Error::Validation(format!("task `{}` scheduled twice", e.id)));
        }
    }
    if let Some(missing) = by_id.keys().find(|id| !pos.contains_key(*id)) {
        return Err(Error::Validation(format!("task `{missing}` is not scheduled")));
    }
    for n in nodes {
        if n.parents.iter().any(|p| pos[p.as_str()] > pos[n.id.as_str()]) {
            return Ok(false);
        }
    }
    for pair in schedule.entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.level < a.level {
            return Ok(false);
        }
        if a.level == b.level && by_id[b.id.as_str()].size > by_id[a.id.as_str()].size {
            return Ok(false);
        }
    }
    Ok(true)
}
