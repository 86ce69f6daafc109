//! Sensitive/insensitive partitions of the arms.
//!
//! Arms sharing the same `(p0, p1)` pair are exchangeable, so two assignments
//! that differ only by permuting such arms describe the same scenario. Each
//! equivalence class is represented by its lexicographically largest boolean
//! vector (`false < true`), which puts the sensitive members of every group of
//! exchangeable arms at the front of that group, the order in which trial
//! scenarios are conventionally written (e.g. `(S, S, N, S)`).

use std::collections::BTreeMap;
use std::fmt;

use crate::model::TrialSpec;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    /// `true` marks an arm in the sensitive set.
    pub sensitive: Vec<bool>,
}

impl Partition {
    pub fn new(sensitive: Vec<bool>) -> Self {
        Self { sensitive }
    }

    pub fn global_null(j: usize) -> Self {
        Self::new(vec![false; j])
    }

    pub fn global_alternative(j: usize) -> Self {
        Self::new(vec![true; j])
    }

    /// Builds a partition from zero-based sensitive arm indices.
    pub fn from_indices(j: usize, indices: &[usize]) -> Self {
        let mut sensitive = vec![false; j];
        for &i in indices {
            sensitive[i] = true;
        }
        Self::new(sensitive)
    }

    pub fn n_arms(&self) -> usize {
        self.sensitive.len()
    }

    pub fn n_sensitive(&self) -> usize {
        self.sensitive.iter().filter(|&&s| s).count()
    }

    pub fn sensitive_arms(&self) -> Vec<usize> {
        (0..self.n_arms()).filter(|&j| self.sensitive[j]).collect()
    }

    pub fn insensitive_arms(&self) -> Vec<usize> {
        (0..self.n_arms()).filter(|&j| !self.sensitive[j]).collect()
    }

    /// Counts of sensitive arms within each group of exchangeable arms; equal
    /// signatures mean equivalent partitions.
    pub fn signature(&self, spec: &TrialSpec) -> Vec<usize> {
        let groups = exchangeable_groups(spec);
        groups
            .iter()
            .map(|g| g.iter().filter(|&&j| self.sensitive[j]).count())
            .collect()
    }

    /// Every concrete assignment equivalent to this one (including itself).
    pub fn members(&self, spec: &TrialSpec) -> Vec<Partition> {
        let target = self.signature(spec);
        all_assignments(self.n_arms())
            .filter(|p| p.signature(spec) == target)
            .collect()
    }
}

/// Renders as one-based sensitive arm indices, e.g. `{1,4}` or `{}`.
impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = self
            .sensitive_arms()
            .iter()
            .map(|j| (j + 1).to_string())
            .collect();
        write!(f, "{{{}}}", ids.join(","))
    }
}

/// Arms grouped by identical `(p0, p1)`, groups ordered by first member.
pub(crate) fn exchangeable_groups(spec: &TrialSpec) -> Vec<Vec<usize>> {
    let mut by_key: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (j, arm) in spec.arms.iter().enumerate() {
        let slot = *by_key.entry(arm.rate_key()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(j);
    }
    groups
}

fn all_assignments(j: usize) -> impl Iterator<Item = Partition> {
    (0..1u64 << j).map(move |mask| Partition::new((0..j).map(|i| mask >> i & 1 == 1).collect()))
}

/// One canonical partition per equivalence class, ordered by the number of
/// sensitive arms and then lexicographically.
pub fn enumerate_partitions(spec: &TrialSpec) -> Vec<Partition> {
    let j = spec.n_arms();
    let mut canonical: BTreeMap<Vec<usize>, Partition> = BTreeMap::new();
    for part in all_assignments(j) {
        let sig = part.signature(spec);
        match canonical.get_mut(&sig) {
            Some(best) if part > *best => *best = part,
            Some(_) => {}
            None => {
                canonical.insert(sig, part);
            }
        }
    }
    let mut out: Vec<Partition> = canonical.into_values().collect();
    out.sort_by(|a, b| a.n_sensitive().cmp(&b.n_sensitive()).then_with(|| a.cmp(b)));
    out
}
