//! Network specification: groups, meeting rates, and the effective-rate
//! transform.
//!
//! Rates are events per hour and times are hours throughout the crate. A
//! [`NetworkSpec`] is plain data so that invalid documents can still be loaded
//! and reported on by [`NetworkSpec::validate`]; every computation entry point
//! calls [`NetworkSpec::ensure_valid`] first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpreadError};

pub const RATE_UNITS: &str = "per_hour";

/// One population group: size, transmission probabilities and seed count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub size: usize,
    pub infectivity: f64,
    pub susceptibility: f64,
    pub seeds: usize,
}

impl GroupProfile {
    pub fn new(size: usize, seeds: usize) -> Self {
        GroupProfile {
            size,
            infectivity: 1.0,
            susceptibility: 1.0,
            seeds,
        }
    }

    pub fn with_probabilities(mut self, infectivity: f64, susceptibility: f64) -> Self {
        self.infectivity = infectivity;
        self.susceptibility = susceptibility;
        self
    }
}

/// Square matrix of pairwise meeting (or infection) rates between groups.
///
/// Entry `(k, l)` is the rate at which a given node of group `k` meets a given
/// node of group `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateMatrix {
    rows: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = RateMatrix { rows };
        let problems = m.violations();
        if problems.is_empty() {
            Ok(m)
        } else {
            Err(SpreadError::InvalidSpec(problems))
        }
    }

    /// Single-group matrix `[[rate]]`.
    pub fn homogeneous(rate: f64) -> Result<Self> {
        RateMatrix::new(vec![vec![rate]])
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rows[k][l]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateMatrix {
        RateMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let k = self.rows.len();
        if k == 0 {
            out.push(Violation::EmptyRateMatrix);
            return out;
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != k {
                out.push(Violation::NonSquareRow {
                    row: i,
                    len: row.len(),
                    dim: k,
                });
                continue;
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    out.push(Violation::BadRate {
                        row: i,
                        col: j,
                        value: x,
                    });
                }
            }
        }
        if out.is_empty() && self.rows.iter().flatten().all(|&x| x == 0.0) {
            out.push(Violation::AllRatesZero);
        }
        out
    }
}

/// A single invariant violation found by [`NetworkSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyRateMatrix,
    NonSquareRow {
        row: usize,
        len: usize,
        dim: usize,
    },
    BadRate {
        row: usize,
        col: usize,
        value: f64,
    },
    AllRatesZero,
    DimensionMismatch {
        groups: usize,
        rates: usize,
    },
    ZeroSize {
        group: usize,
    },
    InfectivityOutOfRange {
        group: usize,
        value: f64,
    },
    SusceptibilityOutOfRange {
        group: usize,
        value: f64,
    },
    SeedsExceedSize {
        group: usize,
        seeds: usize,
        size: usize,
    },
    PopulationTooSmall {
        total: usize,
    },
    NoSeeds,
    UnsupportedUnits {
        units: String,
    },
    /// A group with susceptible members has zero incoming rate from every
    /// group, so it can never be infected.
    DegenerateReachability {
        group: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyRateMatrix => write!(f, "rate matrix is empty"),
            NonSquareRow { row, len, dim } => {
                write!(f, "rate matrix row {row} has {len} entries, expected {dim}")
            }
            BadRate { row, col, value } => {
                write!(
                    f,
                    "rate ({row},{col}) = {value} is not a finite non-negative number"
                )
            }
            AllRatesZero => write!(f, "all rates are zero"),
            DimensionMismatch { groups, rates } => {
                write!(f, "{groups} groups but a {rates}x{rates} rate matrix")
            }
            ZeroSize { group } => write!(f, "group {group} has size 0"),
            InfectivityOutOfRange { group, value } => {
                write!(f, "group {group} infectivity {value} not in (0,1]")
            }
            SusceptibilityOutOfRange { group, value } => {
                write!(f, "group {group} susceptibility {value} not in (0,1]")
            }
            SeedsExceedSize { group, seeds, size } => {
                write!(f, "group {group} has {seeds} seeds but only {size} nodes")
            }
            PopulationTooSmall { total } => write!(f, "total population {total} < 2"),
            NoSeeds => write!(f, "no seeds in any group"),
            UnsupportedUnits { units } => write!(f, "unsupported rate units {units:?}"),
            DegenerateReachability { group } => {
                write!(f, "group {group} has zero incoming rate from every group")
            }
        }
    }
}

/// Outcome of [`NetworkSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn default_units() -> String {
    RATE_UNITS.to_string()
}

/// Full input model of the spread process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub groups: Vec<GroupProfile>,
    pub rates: RateMatrix,
    #[serde(default = "default_units")]
    pub rate_units: String,
}

impl NetworkSpec {
    /// Builds and validates a spec.
    pub fn new(groups: Vec<GroupProfile>, rates: RateMatrix) -> Result<Self> {
        let spec = NetworkSpec {
            groups,
            rates,
            rate_units: default_units(),
        };
        spec.ensure_valid()?;
        Ok(spec)
    }

    /// One group of `size` nodes meeting pairwise at `rate`, with `seeds` seeds.
    pub fn homogeneous(size: usize, seeds: usize, rate: f64) -> Result<Self> {
        NetworkSpec::new(
            vec![GroupProfile::new(size, seeds)],
            RateMatrix::homogeneous(rate)?,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.size).collect()
    }

    pub fn seeds(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.seeds).collect()
    }

    pub fn population(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    pub fn total_seeds(&self) -> usize {
        self.groups.iter().map(|g| g.seeds).sum()
    }

    /// Same spec with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> NetworkSpec {
        NetworkSpec {
            rates: self.rates.scaled(factor),
            ..self.clone()
        }
    }

    /// Same spec with seed counts replaced.
    pub fn with_seeds(&self, seeds: &[usize]) -> NetworkSpec {
        let mut out = self.clone();
        for (g, &s) in out.groups.iter_mut().zip(seeds) {
            g.seeds = s;
        }
        out
    }

    /// Reports every invariant violation; never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut v = self.rates.violations();
        if self.rate_units != RATE_UNITS {
            v.push(Violation::UnsupportedUnits {
                units: self.rate_units.clone(),
            });
        }
        let k = self.groups.len();
        if self.rates.dim() != k {
            v.push(Violation::DimensionMismatch {
                groups: k,
                rates: self.rates.dim(),
            });
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.size == 0 {
                v.push(Violation::ZeroSize { group: i });
            }
            if !(g.infectivity > 0.0 && g.infectivity <= 1.0) {
                v.push(Violation::InfectivityOutOfRange {
                    group: i,
                    value: g.infectivity,
                });
            }
            if !(g.susceptibility > 0.0 && g.susceptibility <= 1.0) {
                v.push(Violation::SusceptibilityOutOfRange {
                    group: i,
                    value: g.susceptibility,
                });
            }
            if g.seeds > g.size {
                v.push(Violation::SeedsExceedSize {
                    group: i,
                    seeds: g.seeds,
                    size: g.size,
                });
            }
        }
        let total = self.population();
        if total < 2 {
            v.push(Violation::PopulationTooSmall { total });
        }
        if self.total_seeds() == 0 {
            v.push(Violation::NoSeeds);
        }
        let shape_ok = self.rates.dim() == k && self.rates.rows().iter().all(|r| r.len() == k);
        if shape_ok {
            for (l, g) in self.groups.iter().enumerate() {
                let incoming: f64 = (0..k).map(|src| self.rates.get(src, l)).sum();
                if g.size > 0 && g.seeds < g.size && incoming == 0.0 {
                    v.push(Violation::DegenerateReachability { group: l });
                }
            }
        }
        ValidationReport { violations: v }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(SpreadError::InvalidSpec(report.violations))
        }
    }
}

/// Infection rate from an infected node to a susceptible one:
/// `meeting_rate * infectivity * susceptibility`.
pub fn effective_rate(meeting_rate: f64, infectivity: f64, susceptibility: f64) -> Result<f64> {
    if !(meeting_rate.is_finite() && meeting_rate >= 0.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "meeting rate {meeting_rate} must be finite and non-negative"
        )));
    }
    for (name, p) in [
        ("infectivity", infectivity),
        ("susceptibility", susceptibility),
    ] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(SpreadError::InvalidParameter(format!(
                "{name} {p} not in (0,1]"
            )));
        }
    }
    Ok(meeting_rate * infectivity * susceptibility)
}

/// Applies [`effective_rate`] entrywise: entry `(k, l)` becomes
/// `rate(k, l) * infectivity_k * susceptibility_l`.
///
/// The returned spec has every probability reset to 1 so that applying the
/// transform twice is a no-op.
pub fn effective_rates(spec: &NetworkSpec) -> Result<NetworkSpec> {
    spec.ensure_valid()?;
    let k = spec.num_groups();
    let mut rows = vec![vec![0.0; k]; k];
    for (a, row) in rows.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = effective_rate(
                spec.rates.get(a, b),
                spec.groups[a].infectivity,
                spec.groups[b].susceptibility,
            )?;
        }
    }
    let groups = spec
        .groups
        .iter()
        .map(|g| GroupProfile {
            infectivity: 1.0,
            susceptibility: 1.0,
            ..g.clone()
        })
        .collect();
    NetworkSpec::new(groups, RateMatrix::new(rows)?)
}

/// Population-averaged pairwise rate
/// `sum_a sum_{b != a} rate(g(a), g(b)) / (N (N - 1))`.
pub fn average_rate(rates: &RateMatrix, sizes: &[usize]) -> Result<f64> {
    if rates.dim() != sizes.len() {
        return Err(SpreadError::InvalidParameter(format!(
            "{} sizes for a {}-group rate matrix",
            sizes.len(),
            rates.dim()
        )));
    }
    let n: usize = sizes.iter().sum();
    if n < 2 {
        return Err(SpreadError::InvalidParameter(format!("population {n} < 2")));
    }
    let mut total = 0.0;
    for (k, &nk) in sizes.iter().enumerate() {
        for (l, &nl) in sizes.iter().enumerate() {
            let pairs = if k == l {
                nk * nk.saturating_sub(1)
            } else {
                nk * nl
            };
            total += pairs as f64 * rates.get(k, l);
        }
    }
    Ok(total / (n as f64 * (n as f64 - 1.0)))
}

/// Two-group symmetric rate matrix with intra/inter ratios `gamma1`,
/// `gamma2` whose population average equals `mean_rate`.
pub fn fair_rate_matrix(
    mean_rate: f64,
    sizes: (usize, usize),
    gamma1: f64,
    gamma2: f64,
) -> Result<RateMatrix> {
    if !(mean_rate > 0.0 && mean_rate.is_finite()) {
        return Err(SpreadError::InvalidParameter(format!(
            "mean rate {mean_rate} must be positive"
        )));
    }
    if !(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
        return Err(SpreadError::InvalidParameter(format!(
            "ratios ({gamma1}, {gamma2}) must be finite and non-negative"
        )));
    }
    let (n1, n2) = (sizes.0 as f64, sizes.1 as f64);
    let n = n1 + n2;
    let denom =
        n1 * (n1 - 1.0).max(0.0) * gamma1 + n2 * (n2 - 1.0).max(0.0) * gamma2 + 2.0 * n1 * n2;
    if n < 2.0 || denom <= 0.0 {
        return Err(SpreadError::InvalidParameter(format!(
            "no inter-group rate satisfies the average constraint for sizes {sizes:?} and ratios ({gamma1}, {gamma2})"
        )));
    }
    let cross = n * (n - 1.0) * mean_rate / denom;
    RateMatrix::new(vec![
        vec![gamma1 * cross, cross],
        vec![cross, gamma2 * cross],
    ])
}

/// Two-group rates parameterized by the intra-group ratio `gamma >= 1`
/// with the inter-group rate at the mean of the intra-group rates.
pub fn special_case_rates(mean_rate: f64, gamma: f64) -> Result<RateMatrix> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(SpreadError::InvalidParameter(format!(
            "gamma {gamma} must be >= 1"
        )));
    }
    if !(mean_rate > 0.0 && mean_rate.is_finite()) {
        return Err(SpreadError::InvalidParameter(format!(
            "mean rate {mean_rate} must be positive"
        )));
    }
    let high = 2.0 * gamma * mean_rate / (gamma + 1.0);
    let low = 2.0 * mean_rate / (gamma + 1.0);
    RateMatrix::new(vec![vec![high, mean_rate], vec![mean_rate, low]])
}

/// Number of infected nodes that constitutes `alpha` penetration of `n`
/// nodes, `ceil(alpha * n)`.
///
/// Products within `1e-9` of an integer snap to it so that e.g.
/// `0.975 * 40` gives 39 rather than 40.
pub fn target_count(alpha: f64, n: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "alpha {alpha} not in (0,1]"
        )));
    }
    let x = alpha * n as f64;
    let r = x.round();
    let c = if (x - r).abs() <= 1e-9 * (n as f64).max(1.0) {
        r
    } else {
        x.ceil()
    };
    Ok((c as usize).clamp(1, n))
}
