//! Pose-subset selection from index files listing one sample identifier per
//! line (the published >30° / >45° subsets).

use std::collections::HashSet;
use std::io::BufRead;

use super::Sample;
use crate::error::Result;

pub struct PoseSubset {
    pub samples: Vec<Sample>,
    /// Identifiers from the index file not found among the samples.
    pub missing: Vec<String>,
}

/// Reads an index file: one identifier per line, blank lines and `#` comments
/// ignored.
pub fn read_index<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        ids.push(t.to_string());
    }
    Ok(ids)
}

/// Keeps only the listed samples (in their original order). Ids that match
/// nothing are reported, not fatal.
pub fn pose_subset(samples: &[Sample], index: &[String]) -> PoseSubset {
    let wanted: HashSet<&str> = index.iter().map(String::as_str).collect();
    let found: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let subset: Vec<Sample> = samples.iter().filter(|s| wanted.contains(s.id.as_str())).cloned().collect();
    let missing: Vec<String> = index.iter().filter(|id| !found.contains(id.as_str())).cloned().collect();
    PoseSubset { samples: subset, missing }
}
