//! Contribution of a single node to the spread, measured by how much the
//! guaranteed time grows when the node is removed.
//!
//! Nodes within a group are exchangeable, so the contribution depends only on
//! the group of the removed node. Both guaranteed times are taken for the same
//! absolute target `ceil(alpha (N - 1))`: the reduced network at penetration
//! `alpha`, and the full network at the matching count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::SpreadDistribution;
use crate::error::{Result, SpreadError};
use crate::model::{target_count, NetworkSpec, RateMatrix};

/// Which kind of node leaves the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    /// A node that does not hold the information at the start.
    #[default]
    NonSeed,
    /// A seed; its seed mass leaves with it.
    Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub group: usize,
    pub removal: Removal,
    /// Absolute infected count targeted by both terms.
    pub target: usize,
    /// Guaranteed time without the node.
    pub without: f64,
    /// Guaranteed time of the full network.
    pub with: f64,
    /// `without / with`; above 1 when the node speeds up the spread.
    pub ratio: f64,
}

/// The spec with one node of `group` removed. A group left empty is dropped.
pub fn remove_node(spec: &NetworkSpec, group: usize, removal: Removal) -> Result<NetworkSpec> {
    spec.ensure_valid()?;
    let k = spec.num_groups();
    if group >= k {
        return Err(SpreadError::InvalidParameter(format!(
            "group {group} out of range 0..{k}"
        )));
    }
    if spec.population() < 3 {
        return Err(SpreadError::InvalidParameter(
            "removing a node must leave at least 2 nodes".into(),
        ));
    }
    let mut groups = spec.groups.clone();
    let g = &mut groups[group];
    match removal {
        Removal::NonSeed if g.seeds == g.size => {
            return Err(SpreadError::InvalidParameter(format!(
                "group {group} has no non-seed node"
            )));
        }
        Removal::Seed if g.seeds == 0 => {
            return Err(SpreadError::InvalidParameter(format!(
                "group {group} has no seed"
            )));
        }
        Removal::Seed => g.seeds -= 1,
        Removal::NonSeed => {}
    }
    g.size -= 1;
    if g.size > 0 {
        return NetworkSpec::new(groups, spec.rates.clone());
    }
    groups.remove(group);
    let rows = (0..k)
        .filter(|&a| a != group)
        .map(|a| {
            (0..k)
                .filter(|&b| b != group)
                .map(|b| spec.rates.get(a, b))
                .collect()
        })
        .collect();
    NetworkSpec::new(groups, RateMatrix::new(rows)?)
}

/// Contribution of a node of `group`.
pub fn node_contribution(
    spec: &NetworkSpec,
    group: usize,
    alpha: f64,
    beta: f64,
    removal: Removal,
) -> Result<Contribution> {
    let reduced = remove_node(spec, group, removal)?;
    let target = target_count(alpha, reduced.population())?;
    let terms = [&reduced, spec].map(|s| -> Result<f64> {
        let dist = SpreadDistribution::for_target(s, target)?;
        if dist.is_trivial() {
            return Err(SpreadError::TrivialCompletion {
                seeds: s.total_seeds(),
                target,
            });
        }
        dist.guaranteed_time(beta)
    });
    let [without, with] = terms;
    let (without, with) = (without?, with?);
    Ok(Contribution {
        group,
        removal,
        target,
        without,
        with,
        ratio: without / with,
    })
}

/// Contribution of every group that has a removable node of the given kind.
pub fn contribution_table(
    spec: &NetworkSpec,
    alpha: f64,
    beta: f64,
    removal: Removal,
) -> Result<Vec<Contribution>> {
    (0..spec.num_groups())
        .into_par_iter()
        .filter(|&k| match removal {
            Removal::NonSeed => spec.groups[k].seeds < spec.groups[k].size,
            Removal::Seed => spec.groups[k].seeds > 0,
        })
        .map(|k| node_contribution(spec, k, alpha, beta, removal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GroupProfile;

    #[test]
    fn homogeneous_groups_are_equal() {
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(4, 1), GroupProfile::new(4, 0)],
            RateMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let a = node_contribution(&spec, 0, 1.0, 0.9, Removal::NonSeed).unwrap();
        let b = node_contribution(&spec, 1, 1.0, 0.9, Removal::NonSeed).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-9 * a.ratio);
        assert_eq!(a.target, 7);
    }

    #[test]
    fn three_to_two_nodes() {
        // reduced: 2 nodes, one seed, time Exp(1); full: 3 nodes to 2 infected, Exp(2)
        let spec = NetworkSpec::homogeneous(3, 1, 1.0).unwrap();
        let c = node_contribution(&spec, 0, 1.0, 0.99, Removal::NonSeed).unwrap();
        let ln100 = 100f64.ln();
        assert!((c.without - ln100).abs() < 1e-9 * ln100);
        assert!((c.with - ln100 / 2.0).abs() < 1e-9 * ln100);
        assert!((c.ratio - 2.0).abs() < 1e-9);
    }

    #[test]
    fn faster_group_contributes_more() {
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(5, 1), GroupProfile::new(5, 0)],
            RateMatrix::new(vec![vec![3.0, 1.0], vec![1.0, 0.3]]).unwrap(),
        )
        .unwrap();
        let t = contribution_table(&spec, 0.9, 0.99, Removal::NonSeed).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t[0].ratio > t[1].ratio, "{t:?}");
    }

    #[test]
    fn removal_errors() {
        let spec = NetworkSpec::homogeneous(4, 1, 1.0).unwrap();
        assert!(node_contribution(&spec, 1, 1.0, 0.9, Removal::NonSeed).is_err());
        assert!(node_contribution(&spec, 0, 1.0, 0.9, Removal::Seed).is_err());
        let all_seeds = NetworkSpec::new(
            vec![GroupProfile::new(2, 2), GroupProfile::new(3, 0)],
            RateMatrix::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert!(node_contribution(&all_seeds, 0, 1.0, 0.9, Removal::NonSeed).is_err());
        assert!(matches!(
            node_contribution(&all_seeds, 1, 0.2, 0.9, Removal::NonSeed),
            Err(SpreadError::TrivialCompletion { .. })
        ));
    }

    #[test]
    fn emptied_group_is_dropped() {
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(3, 1), GroupProfile::new(1, 0)],
            RateMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let r = remove_node(&spec, 1, Removal::NonSeed).unwrap();
        assert_eq!(r.num_groups(), 1);
        assert_eq!(r.rates.get(0, 0), 1.0);
    }
}
