//! State space and subgenerator of the truncated spread chain.
//!
//! The chain counts infected nodes per group. Counts never decrease, so once
//! states are ordered by total count every transition points to a larger
//! ordinal and the subgenerator is upper triangular.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Result, SpreadError};
use crate::model::{target_count, NetworkSpec};

/// Infected count per group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<usize>);

impl StateVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }
}

/// Transient and absorbing states of the truncated chain.
#[derive(Debug, Clone)]
pub struct StateSpace {
    transient: Vec<StateVector>,
    absorbing: Vec<StateVector>,
    index: HashMap<StateVector, usize>,
    alpha_count: usize,
}

impl StateSpace {
    fn from_parts(
        transient: Vec<StateVector>,
        absorbing: Vec<StateVector>,
        alpha_count: usize,
    ) -> Self {
        let index = transient
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        StateSpace {
            transient,
            absorbing,
            index,
            alpha_count,
        }
    }

    pub fn transient(&self) -> &[StateVector] {
        &self.transient
    }

    pub fn absorbing(&self) -> &[StateVector] {
        &self.absorbing
    }

    /// Ordinal of a transient state.
    pub fn ordinal(&self, state: &StateVector) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Target infected count `ceil(alpha N)`.
    pub fn alpha_count(&self) -> usize {
        self.alpha_count
    }

    pub fn len(&self) -> usize {
        self.transient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transient.is_empty()
    }
}

/// Upper-triangular subgenerator over the transient states, stored as one
/// diagonal entry plus at most K successors per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgenerator {
    diagonal: Vec<f64>,
    row_start: Vec<usize>,
    successors: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl Subgenerator {
    fn with_capacity(n: usize) -> Self {
        Subgenerator {
            diagonal: Vec::with_capacity(n),
            row_start: vec![0],
            successors: Vec::new(),
            rates: Vec::new(),
            exit: Vec::with_capacity(n),
        }
    }

    /// Appends a row; the diagonal is set to minus the total outflow.
    fn push_row(&mut self, off: &[(usize, f64)], exit: f64) {
        let mut out = 0.0;
        for &(j, r) in off {
            self.successors.push(j);
            self.rates.push(r);
            out += r;
        }
        out += exit;
        self.diagonal.push(-out);
        self.exit.push(exit);
        self.row_start.push(self.successors.len());
    }

    pub(crate) fn empty() -> Self {
        Subgenerator::with_capacity(0)
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Rate into the absorbing set from each transient state.
    pub fn exit(&self) -> &[f64] {
        &self.exit
    }

    /// `(successor ordinal, rate)` pairs of row `i`.
    pub fn off_diagonal(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.successors[r.clone()]
            .iter()
            .copied()
            .zip(self.rates[r].iter().copied())
    }

    /// Largest total outflow over all rows.
    pub fn max_outflow(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// Smallest total outflow over all rows; the tail decay rate.
    pub fn min_outflow(&self) -> f64 {
        self.diagonal.iter().fold(f64::INFINITY, |m, d| m.min(-d))
    }

    /// Solves `(-F) x = b` by back substitution.
    pub fn solve_negated(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        assert_eq!(b.len(), n);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = b[i];
            for (j, r) in self.off_diagonal(i) {
                acc += r * x[j];
            }
            x[i] = acc / -self.diagonal[i];
        }
        x
    }

    /// Row-vector product `v P` with `P = I + F / rate`, written into `out`.
    pub(crate) fn uniformized_step(&self, v: &[f64], rate: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            out[i] += vi * (1.0 + self.diagonal[i] / rate);
            let w = vi / rate;
            for (j, r) in self.off_diagonal(i) {
                out[j] += w * r;
            }
        }
    }

    /// Plain-text `row col rate` triplets of the full subgenerator,
    /// diagonal included.
    pub fn to_triplets(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dimension() {
            writeln!(s, "{i} {i} {:e}", self.diagonal[i]).unwrap();
            for (j, r) in self.off_diagonal(i) {
                writeln!(s, "{i} {j} {r:e}").unwrap();
            }
        }
        s
    }
}

/// Probability vector over transient ordinals at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    pub weights: Vec<f64>,
}

/// Truncated chain ready for analysis.
#[derive(Debug, Clone)]
pub struct SpreadChain {
    pub space: StateSpace,
    pub subgen: Subgenerator,
    pub initial: InitialDistribution,
}

#[derive(Serialize)]
struct ExportHeader<'a> {
    dimension: usize,
    alpha_count: usize,
    states: &'a [StateVector],
    absorbing: &'a [StateVector],
    exit: &'a [f64],
}

impl SpreadChain {
    /// JSON header describing the triplet export.
    pub fn export_header(&self) -> String {
        serde_json::to_string_pretty(&ExportHeader {
            dimension: self.subgen.dimension(),
            alpha_count: self.space.alpha_count,
            states: &self.space.transient,
            absorbing: &self.space.absorbing,
            exit: &self.subgen.exit,
        })
        .expect("header serializes")
    }
}

/// All count vectors with the given total, `floor <= e <= ceil` per group,
/// in lexicographic order.
fn states_with_total(floor: &[usize], ceil: &[usize], total: usize, out: &mut Vec<StateVector>) {
    fn rec(
        k: usize,
        floor: &[usize],
        ceil: &[usize],
        remaining: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<StateVector>,
    ) {
        if k == floor.len() {
            if remaining == 0 {
                out.push(StateVector(cur.clone()));
            }
            return;
        }
        let rest_min: usize = floor[k + 1..].iter().sum();
        let rest_max: usize = ceil[k + 1..].iter().sum();
        let lo = floor[k].max(remaining.saturating_sub(rest_max));
        let hi = ceil[k].min(remaining.saturating_sub(rest_min));
        if remaining < rest_min || lo > hi {
            return;
        }
        for v in lo..=hi {
            cur.push(v);
            rec(k + 1, floor, ceil, remaining - v, cur, out);
            cur.pop();
        }
    }
    rec(
        0,
        floor,
        ceil,
        total,
        &mut Vec::with_capacity(floor.len()),
        out,
    );
}

fn check_seeds(sizes: &[usize], seeds: &[usize]) -> Result<()> {
    if sizes.len() != seeds.len() || sizes.is_empty() {
        return Err(SpreadError::InvalidParameter(format!(
            "{} sizes but {} seed counts",
            sizes.len(),
            seeds.len()
        )));
    }
    if let Some(k) = (0..sizes.len()).find(|&k| seeds[k] > sizes[k]) {
        return Err(SpreadError::InvalidParameter(format!(
            "group {k} has {} seeds but only {} nodes",
            seeds[k], sizes[k]
        )));
    }
    Ok(())
}

/// Enumerates the truncated state space for an absolute target count.
pub fn enumerate_states_for_target(
    sizes: &[usize],
    seeds: &[usize],
    target: usize,
) -> Result<StateSpace> {
    check_seeds(sizes, seeds)?;
    let n: usize = sizes.iter().sum();
    let s: usize = seeds.iter().sum();
    if target == 0 || target > n {
        return Err(SpreadError::InvalidParameter(format!(
            "target count {target} outside 1..={n}"
        )));
    }
    if s >= target {
        return Err(SpreadError::TrivialCompletion { seeds: s, target });
    }
    let mut transient = Vec::new();
    for total in s..target {
        states_with_total(seeds, sizes, total, &mut transient);
    }
    let mut absorbing = Vec::new();
    states_with_total(seeds, sizes, target, &mut absorbing);
    Ok(StateSpace::from_parts(transient, absorbing, target))
}

/// Enumerates transient states (`sum(seeds) <= |e| < ceil(alpha N)`,
/// `e >= seeds` componentwise) and absorbing states (`|e| = ceil(alpha N)`).
pub fn enumerate_states(sizes: &[usize], seeds: &[usize], alpha: f64) -> Result<StateSpace> {
    let n: usize = sizes.iter().sum();
    enumerate_states_for_target(sizes, seeds, target_count(alpha, n)?)
}

/// Effective rate of infecting one more node of group `to_group`:
/// `(N_l - i_l) * sum_k i_k * rate(k, l) * infectivity_k * susceptibility_l`.
pub fn transition_rate(from: &StateVector, to_group: usize, spec: &NetworkSpec) -> Result<f64> {
    let k = spec.num_groups();
    if from.0.len() != k || to_group >= k {
        return Err(SpreadError::InvalidParameter(format!(
            "state {:?} / group {to_group} do not match a {k}-group spec",
            from.0
        )));
    }
    let size = spec.groups[to_group].size;
    let infected = from.0[to_group];
    if infected >= size {
        return Err(SpreadError::InvalidParameter(format!(
            "group {to_group} has no susceptible nodes in state {:?}",
            from.0
        )));
    }
    Ok(raw_rate(from.counts(), to_group, spec))
}

fn raw_rate(counts: &[usize], l: usize, spec: &NetworkSpec) -> f64 {
    let psi = spec.groups[l].susceptibility;
    let mut pressure = 0.0;
    for (k, &ik) in counts.iter().enumerate() {
        if ik > 0 {
            pressure += ik as f64 * (spec.rates.get(k, l) * spec.groups[k].infectivity * psi);
        }
    }
    (spec.groups[l].size - counts[l]) as f64 * pressure
}

/// Builds the truncated chain for `ceil(alpha N)` penetration.
pub fn build_subgenerator(spec: &NetworkSpec, alpha: f64) -> Result<SpreadChain> {
    build_for_target(spec, target_count(alpha, spec.population())?)
}

/// Builds the truncated chain that absorbs when `target` nodes are infected.
///
/// States that cannot be reached from the seed state through positive rates
/// are dropped.
pub fn build_for_target(spec: &NetworkSpec, target: usize) -> Result<SpreadChain> {
    spec.ensure_valid()?;
    let sizes = spec.sizes();
    let seeds = spec.seeds();
    let full = enumerate_states_for_target(&sizes, &seeds, target)?;
    let k = sizes.len();

    // Rates in the full enumeration: successors are either transient ordinals
    // or the absorbing set.
    let n_all = full.len();
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::with_capacity(n_all);
    let mut next = full.transient[0].clone();
    for state in &full.transient {
        let mut off = Vec::with_capacity(k);
        let mut exit = 0.0;
        for (l, &size) in sizes.iter().enumerate() {
            if state.0[l] >= size {
                continue;
            }
            let r = raw_rate(&state.0, l, spec);
            if r <= 0.0 {
                continue;
            }
            if state.total() + 1 == target {
                exit += r;
            } else {
                next.0.clone_from(&state.0);
                next.0[l] += 1;
                off.push((full.index[&next], r));
            }
        }
        rows.push((off, exit));
    }

    // Forward reachability from the seed state (ordinal 0).
    let mut reachable = vec![false; n_all];
    reachable[0] = true;
    for i in 0..n_all {
        if reachable[i] {
            for &(j, _) in &rows[i].0 {
                reachable[j] = true;
            }
        }
    }
    let mut remap = vec![usize::MAX; n_all];
    let mut transient = Vec::new();
    for i in 0..n_all {
        if reachable[i] {
            remap[i] = transient.len();
            transient.push(full.transient[i].clone());
        }
    }

    let mut subgen = Subgenerator::with_capacity(transient.len());
    let mut hits_absorbing = vec![false; full.absorbing.len()];
    let absorbing_index: HashMap<&StateVector, usize> = full
        .absorbing
        .iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    for i in 0..n_all {
        if !reachable[i] {
            continue;
        }
        let (off, exit) = &rows[i];
        if off.is_empty() && *exit == 0.0 {
            return Err(SpreadError::DegenerateReachability {
                state: full.transient[i].0.clone(),
            });
        }
        if *exit > 0.0 {
            let state = &full.transient[i];
            for l in 0..k {
                if state.0[l] < sizes[l] && raw_rate(&state.0, l, spec) > 0.0 {
                    let mut a = state.0.clone();
                    a[l] += 1;
                    hits_absorbing[absorbing_index[&StateVector(a)]] = true;
                }
            }
        }
        let mapped: Vec<(usize, f64)> = off.iter().map(|&(j, r)| (remap[j], r)).collect();
        subgen.push_row(&mapped, *exit);
    }
    let absorbing = full
        .absorbing
        .into_iter()
        .zip(hits_absorbing)
        .filter_map(|(s, hit)| hit.then_some(s))
        .collect();

    let mut weights = vec![0.0; transient.len()];
    weights[0] = 1.0;
    Ok(SpreadChain {
        space: StateSpace::from_parts(transient, absorbing, target),
        subgen,
        initial: InitialDistribution { weights },
    })
}

/// Birth-chain subgenerator of a single homogeneous group, built directly
/// from the rates `i (N - i) lambda`.
pub fn explicit_subgenerator_k1(
    n: usize,
    seeds: usize,
    lambda: f64,
    alpha: f64,
) -> Result<Subgenerator> {
    if seeds == 0 || seeds > n || n < 2 {
        return Err(SpreadError::InvalidParameter(format!(
            "need 1 <= seeds <= N and N >= 2, got seeds={seeds}, N={n}"
        )));
    }
    let target = target_count(alpha, n)?;
    if seeds >= target {
        return Err(SpreadError::TrivialCompletion { seeds, target });
    }
    let mut sg = Subgenerator::with_capacity(target - seeds);
    for i in seeds..target {
        let r = (n - i) as f64 * (0.0 + i as f64 * lambda);
        if i + 1 == target {
            sg.push_row(&[], r);
        } else {
            sg.push_row(&[(i + 1 - seeds, r)], 0.0);
        }
    }
    Ok(sg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GroupProfile, RateMatrix};

    fn sv(v: &[usize]) -> StateVector {
        StateVector(v.to_vec())
    }

    #[test]
    fn four_node_birth_chain() {
        let space = enumerate_states(&[4], &[1], 1.0).unwrap();
        assert_eq!(space.transient(), &[sv(&[1]), sv(&[2]), sv(&[3])]);
        assert_eq!(space.absorbing(), &[sv(&[4])]);

        let spec = NetworkSpec::homogeneous(4, 1, 1.0).unwrap();
        let chain = build_subgenerator(&spec, 1.0).unwrap();
        assert_eq!(chain.subgen.diagonal(), &[-3.0, -4.0, -3.0]);
        assert_eq!(
            chain.subgen.off_diagonal(0).collect::<Vec<_>>(),
            vec![(1, 3.0)]
        );
        assert_eq!(
            chain.subgen.off_diagonal(1).collect::<Vec<_>>(),
            vec![(2, 4.0)]
        );
        assert_eq!(chain.subgen.exit(), &[0.0, 0.0, 3.0]);
        assert_eq!(chain.initial.weights, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_group_absorbing_diagonal() {
        // sizes (3,5), target 4 and seed (1,0)
        let space = enumerate_states_for_target(&[3, 5], &[1, 0], 4).unwrap();
        let want: Vec<_> = (1..=3).map(|i| sv(&[i, 4 - i])).collect();
        assert_eq!(space.absorbing(), want.as_slice());
        for w in space.transient().windows(2) {
            assert!(w[0].total() < w[1].total() || (w[0].total() == w[1].total() && w[0] < w[1]));
        }
        assert!(space.transient().iter().all(|s| s.0[0] >= 1));
    }

    #[test]
    fn trivial_completion() {
        assert!(matches!(
            enumerate_states(&[10], &[5], 0.3),
            Err(SpreadError::TrivialCompletion {
                seeds: 5,
                target: 3
            })
        ));
    }

    #[test]
    fn transition_rates() {
        let spec = NetworkSpec::homogeneous(3, 1, 1.0).unwrap();
        assert_eq!(transition_rate(&sv(&[1]), 0, &spec).unwrap(), 2.0);
        assert!(transition_rate(&sv(&[3]), 0, &spec).is_err());

        let spec = NetworkSpec::new(
            vec![GroupProfile::new(2, 1), GroupProfile::new(2, 0)],
            RateMatrix::new(vec![vec![0.3, 0.7], vec![0.7, 0.2]]).unwrap(),
        )
        .unwrap();
        assert_eq!(transition_rate(&sv(&[1, 0]), 1, &spec).unwrap(), 2.0 * 0.7);
    }

    #[test]
    fn k2_block_pattern() {
        // Rows follow x_{i,j} = i (N2 - j) l12 + j (N2 - j) l22 for group-2
        // infections and the symmetric expression for group 1.
        let (l11, l12, l21, l22) = (0.5, 0.25, 0.125, 2.0);
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(3, 1), GroupProfile::new(4, 0)],
            RateMatrix::new(vec![vec![l11, l12], vec![l21, l22]]).unwrap(),
        )
        .unwrap();
        let chain = build_subgenerator(&spec, 1.0).unwrap();
        for (idx, st) in chain.space.transient().iter().enumerate() {
            let (i, j) = (st.0[0] as f64, st.0[1] as f64);
            let to2 = i * (4.0 - j) * l12 + j * (4.0 - j) * l22;
            let to1 = (3.0 - i) * (i * l11 + j * l21);
            let diag = chain.subgen.diagonal()[idx];
            assert!((diag + to1 + to2).abs() < 1e-12, "{st:?}");
        }
        // every (i1, i2) with i1 >= 1 except the absorbing (N1, N2)
        assert_eq!(chain.space.len(), 3 * 5 - 1);
    }

    #[test]
    fn homogeneous_state_count() {
        for (n, s, alpha) in [(10, 1, 1.0), (100, 3, 0.9), (17, 2, 0.5)] {
            let spec = NetworkSpec::homogeneous(n, s, 0.1).unwrap();
            let chain = build_subgenerator(&spec, alpha).unwrap();
            assert_eq!(chain.space.len(), target_count(alpha, n).unwrap() - s);
        }
    }

    #[test]
    fn explicit_k1_matches() {
        let sg = explicit_subgenerator_k1(4, 1, 1.0, 1.0).unwrap();
        assert_eq!(sg.diagonal(), &[-3.0, -4.0, -3.0]);
        let sg = explicit_subgenerator_k1(100, 1, 4.14e-4, 0.9).unwrap();
        assert_eq!(sg.dimension(), 89);
    }

    #[test]
    fn unreachable_states_pruned() {
        // group 2 is fully seeded and group 1 only feeds itself
        let spec = NetworkSpec::new(
            vec![GroupProfile::new(3, 1), GroupProfile::new(2, 2)],
            RateMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let chain = build_subgenerator(&spec, 1.0).unwrap();
        assert_eq!(chain.space.len(), 2);
        assert_eq!(chain.space.absorbing(), &[sv(&[3, 2])]);
    }

    #[test]
    fn degenerate_state_rejected() {
        // groups 1 and 2 only infect each other, so nothing leaves the
        // state where group 0 is fully infected
        let spec = NetworkSpec::new(
            vec![
                GroupProfile::new(2, 1),
                GroupProfile::new(2, 0),
                GroupProfile::new(2, 0),
            ],
            RateMatrix::new(vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(
            build_subgenerator(&spec, 1.0),
            Err(SpreadError::DegenerateReachability { state }) if state == vec![2, 0, 0]
        ));
        assert!(build_for_target(&spec, 2).is_ok());
    }

    #[test]
    fn triplet_export() {
        let spec = NetworkSpec::homogeneous(3, 1, 1.0).unwrap();
        let chain = build_subgenerator(&spec, 1.0).unwrap();
        let t = chain.subgen.to_triplets();
        assert_eq!(t.lines().count(), 3);
        assert!(t.starts_with("0 0 -2e0\n0 1 2e0\n"));
        let h: serde_json::Value = serde_json::from_str(&chain.export_header()).unwrap();
        assert_eq!(h["dimension"], 2);
        assert_eq!(h["alpha_count"], 3);
        assert_eq!(h["states"], serde_json::json!([[1], [2]]));
    }
}
