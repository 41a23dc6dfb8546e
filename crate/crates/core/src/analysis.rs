//! Distribution of the completion time: CDF, quantiles, moments, tail decay,
//! mean-infected curve and the inverse planning queries.
//!
//! Transient probabilities are propagated with uniformization. With
//! `Λ >= max |F_ii|` the matrix `P = I + F/Λ` is sub-stochastic and
//! `h exp(F t) = Σ_k Pois(k; Λt) h P^k`, so every term is non-negative and the
//! truncation error is bounded by the Poisson tail. Long horizons are split
//! into steps with `Λ Δt <= MAX_STEP_MASS` so the Poisson weights never
//! underflow.

use crate::chain::{build_for_target, SpreadChain, Subgenerator};
use crate::error::{Result, SpreadError};
use crate::model::{target_count, NetworkSpec};

/// Default truncation bound for the uniformization series.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Relative width at which quantile bisection stops.
pub const QUANTILE_REL_TOL: f64 = 1e-12;

const MAX_STEP_MASS: f64 = 64.0;
const MAX_DOUBLINGS: usize = 2000;

/// Completion-time distribution of one truncated chain.
#[derive(Debug, Clone)]
pub struct SpreadDistribution {
    initial: Vec<f64>,
    subgen: Subgenerator,
    uniformization_rate: f64,
    tolerance: f64,
    alpha_count: usize,
}

impl SpreadDistribution {
    /// Distribution of `T_alpha` for `spec`. Seeds that already reach
    /// `ceil(alpha N)` give the degenerate distribution at zero.
    pub fn new(spec: &NetworkSpec, alpha: f64) -> Result<Self> {
        spec.ensure_valid()?;
        Self::for_target(spec, target_count(alpha, spec.population())?)
    }

    /// Distribution of the time until `target` nodes are infected.
    pub fn for_target(spec: &NetworkSpec, target: usize) -> Result<Self> {
        match build_for_target(spec, target) {
            Ok(chain) => Ok(Self::from_chain(chain)),
            Err(SpreadError::TrivialCompletion { .. }) => Ok(SpreadDistribution {
                initial: Vec::new(),
                subgen: Subgenerator::empty(),
                uniformization_rate: 0.0,
                tolerance: DEFAULT_TOLERANCE,
                alpha_count: target,
            }),
            Err(e) => Err(e),
        }
    }

    pub fn from_chain(chain: SpreadChain) -> Self {
        let rate = chain.subgen.max_outflow();
        SpreadDistribution {
            initial: chain.initial.weights,
            uniformization_rate: rate,
            tolerance: DEFAULT_TOLERANCE,
            alpha_count: chain.space.alpha_count(),
            subgen: chain.subgen,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// True when the seeds already meet the target (`T_alpha = 0`).
    pub fn is_trivial(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn alpha_count(&self) -> usize {
        self.alpha_count
    }

    pub fn uniformization_rate(&self) -> f64 {
        self.uniformization_rate
    }

    pub fn subgenerator(&self) -> &Subgenerator {
        &self.subgen
    }

    /// Transient probability vector after evolving `v` for `dt` hours.
    pub(crate) fn advance(&self, v: &[f64], dt: f64) -> Vec<f64> {
        if dt == 0.0 || v.is_empty() {
            return v.to_vec();
        }
        let lam = self.uniformization_rate;
        let steps = ((lam * dt) / MAX_STEP_MASS).ceil().max(1.0) as usize;
        let h = dt / steps as f64;
        let x = lam * h;
        let mut cur = v.to_vec();
        let mut term = vec![0.0; v.len()];
        let mut scratch = vec![0.0; v.len()];
        let mut acc = vec![0.0; v.len()];
        for _ in 0..steps {
            term.copy_from_slice(&cur);
            let mut w = (-x).exp();
            let mut cum = w;
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a = w * t);
            let mut k = 0usize;
            while 1.0 - cum > self.tolerance || (k as f64) < x {
                k += 1;
                self.subgen.uniformized_step(&term, lam, &mut scratch);
                std::mem::swap(&mut term, &mut scratch);
                w *= x / k as f64;
                cum += w;
                acc.iter_mut().zip(&term).for_each(|(a, t)| *a += w * t);
                if k > 10_000 + 10 * x as usize {
                    break;
                }
            }
            std::mem::swap(&mut cur, &mut acc);
        }
        cur
    }

    fn mass(v: &[f64]) -> f64 {
        v.iter().sum::<f64>()
    }

    fn check_time(t: f64) -> Result<()> {
        if t.is_finite() && t >= 0.0 {
            Ok(())
        } else {
            Err(SpreadError::InvalidParameter(format!(
                "time {t} must be finite and >= 0"
            )))
        }
    }

    /// `Pr{T_alpha > t}`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        if self.is_trivial() {
            return Ok(0.0);
        }
        Ok(Self::mass(&self.advance(&self.initial, t)).clamp(0.0, 1.0))
    }

    /// `Pr{T_alpha <= t} = 1 - h exp(F t) 1`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.survival(t)?)
    }

    /// CDF at every time of `ts`, propagating incrementally through the
    /// sorted times. Output order matches input order.
    pub fn cdf_many(&self, ts: &[f64]) -> Result<Vec<f64>> {
        for &t in ts {
            Self::check_time(t)?;
        }
        if self.is_trivial() {
            return Ok(vec![1.0; ts.len()]);
        }
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
        let mut out = vec![0.0; ts.len()];
        let mut v = self.initial.clone();
        let mut now = 0.0;
        for i in order {
            v = self.advance(&v, ts[i] - now);
            now = ts[i];
            out[i] = 1.0 - Self::mass(&v).clamp(0.0, 1.0);
        }
        Ok(out)
    }

    /// `E[T^n] = n! h (-F)^{-n} 1` through `n` back substitutions.
    pub fn moment(&self, n: u32) -> Result<f64> {
        if n < 1 {
            return Err(SpreadError::InvalidParameter(
                "moment order must be >= 1".into(),
            ));
        }
        if self.is_trivial() {
            return Ok(0.0);
        }
        let mut x = vec![1.0; self.initial.len()];
        let mut factorial = 1.0;
        for k in 1..=n {
            x = self.subgen.solve_negated(&x);
            factorial *= k as f64;
        }
        let dot: f64 = self.initial.iter().zip(&x).map(|(h, x)| h * x).sum();
        Ok(factorial * dot)
    }

    pub fn mean(&self) -> Result<f64> {
        self.moment(1)
    }

    pub fn variance(&self) -> Result<f64> {
        let m1 = self.moment(1)?;
        Ok(self.moment(2)? - m1 * m1)
    }

    /// Guaranteed time `G = H^{-1}(beta)`: the smallest `t` with
    /// `Pr{T_alpha <= t} >= beta`.
    ///
    /// Brackets by doubling (or halving) from the mean, then bisects. The
    /// transient vector at the lower bracket is kept so each evaluation only
    /// propagates across the remaining interval.
    pub fn guaranteed_time(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(SpreadError::InvalidParameter(format!(
                "beta {beta} not in (0,1)"
            )));
        }
        if self.is_trivial() {
            return Ok(0.0);
        }
        let target_mass = 1.0 - beta;
        let mean = self.mean()?;
        let v_mean = self.advance(&self.initial, mean);

        let (mut lo, mut v_lo, mut hi);
        if Self::mass(&v_mean) > target_mass {
            lo = mean;
            v_lo = v_mean;
            let mut doublings = 0;
            loop {
                let v = self.advance(&v_lo, lo);
                if Self::mass(&v) <= target_mass {
                    hi = 2.0 * lo;
                    break;
                }
                lo *= 2.0;
                v_lo = v;
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(SpreadError::Numerical(format!(
                        "could not bracket the {beta} quantile"
                    )));
                }
            }
        } else {
            hi = mean;
            loop {
                let t = hi / 2.0;
                if t < f64::MIN_POSITIVE {
                    return Ok(0.0);
                }
                let v = self.advance(&self.initial, t);
                if Self::mass(&v) > target_mass {
                    lo = t;
                    v_lo = v;
                    break;
                }
                hi = t;
            }
        }

        while hi - lo > QUANTILE_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.advance(&v_lo, mid - lo);
            if Self::mass(&v) > target_mass {
                lo = mid;
                v_lo = v;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `R = G / E[T]`; 1 by convention when completion is trivial.
    pub fn ratio(&self, beta: f64) -> Result<f64> {
        let g = self.guaranteed_time(beta)?;
        if self.is_trivial() {
            return Ok(1.0);
        }
        Ok(g / self.mean()?)
    }

    /// Exponential tail rate `-lim log Pr{T > t} / t`, the smallest
    /// outflow over transient states. Infinite for trivial completion.
    pub fn decay_rate(&self) -> f64 {
        if self.is_trivial() {
            f64::INFINITY
        } else {
            self.subgen.min_outflow()
        }
    }

    /// Scale factor for all rates that makes the `beta` guaranteed time
    /// exactly `t_bound`. Rate scaling by `γ` divides every time by `γ`.
    pub fn rate_scale_for_bound(&self, beta: f64, t_bound: f64) -> Result<f64> {
        if !(t_bound > 0.0 && t_bound.is_finite()) {
            return Err(SpreadError::InvalidParameter(format!(
                "t_bound {t_bound} must be > 0"
            )));
        }
        Ok(self.guaranteed_time(beta)? / t_bound)
    }
}

/// Expected number of infected nodes at time `t`.
///
/// Equals `Σ_{i=1..N} Pr{T_{i/N} <= t}`; evaluated in one pass on the
/// untruncated chain as `E|I(t)|`.
pub fn mean_infected(spec: &NetworkSpec, t: f64) -> Result<f64> {
    Ok(mean_infected_many(spec, &[t])?[0])
}

/// [`mean_infected`] over a grid of times.
pub fn mean_infected_many(spec: &NetworkSpec, ts: &[f64]) -> Result<Vec<f64>> {
    spec.ensure_valid()?;
    for &t in ts {
        SpreadDistribution::check_time(t)?;
    }
    let n = spec.population();
    let chain = match build_for_target(spec, n) {
        Ok(c) => c,
        Err(SpreadError::TrivialCompletion { .. }) => return Ok(vec![n as f64; ts.len()]),
        Err(e) => return Err(e),
    };
    let totals: Vec<f64> = chain
        .space
        .transient()
        .iter()
        .map(|s| s.total() as f64)
        .collect();
    let dist = SpreadDistribution::from_chain(chain);
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let mut out = vec![0.0; ts.len()];
    let mut v = dist.initial.clone();
    let mut now = 0.0;
    for i in order {
        v = dist.advance(&v, ts[i] - now);
        now = ts[i];
        let transient_mass: f64 = v.iter().sum();
        let weighted: f64 = v.iter().zip(&totals).map(|(p, k)| p * k).sum();
        out[i] = weighted + n as f64 * (1.0 - transient_mass);
    }
    Ok(out)
}

/// Spread speed `dM/dt` by central difference with step `1e-4 max(t, 1)`.
///
/// Truncation error is `O(h^2)`; near `t = 0` a forward difference is used.
pub fn spread_speed(spec: &NetworkSpec, t: f64) -> Result<f64> {
    SpreadDistribution::check_time(t)?;
    let h = 1e-4 * t.max(1.0);
    if t >= h {
        let m = mean_infected_many(spec, &[t - h, t + h])?;
        Ok((m[1] - m[0]) / (2.0 * h))
    } else {
        let m = mean_infected_many(spec, &[t, t + h, t + 2.0 * h])?;
        Ok((-3.0 * m[0] + 4.0 * m[1] - m[2]) / (2.0 * h))
    }
}

/// Seed vector with `total` seeds filled into groups in `priority` order.
fn place_seeds(spec: &NetworkSpec, priority: &[usize], total: usize) -> Vec<usize> {
    let mut seeds = vec![0; spec.num_groups()];
    let mut left = total;
    for &g in priority {
        let take = left.min(spec.groups[g].size);
        seeds[g] = take;
        left -= take;
    }
    seeds
}

/// Smallest total seed count whose `(alpha, beta)` guaranteed time is at
/// most `t_bound`, with seeds placed into groups following `priority`.
///
/// Returns the per-group seed vector. Uses binary search over the total,
/// relying on the guaranteed time being non-increasing in the seed count;
/// the two neighbours of the answer are re-checked.
pub fn min_seeds_for_bound(
    spec: &NetworkSpec,
    priority: &[usize],
    alpha: f64,
    beta: f64,
    t_bound: f64,
) -> Result<Vec<usize>> {
    if !(t_bound > 0.0 && t_bound.is_finite()) {
        return Err(SpreadError::InvalidParameter(format!(
            "t_bound {t_bound} must be > 0"
        )));
    }
    let k = spec.num_groups();
    let mut seen = vec![false; k];
    if priority.len() != k
        || priority
            .iter()
            .any(|&g| g >= k || std::mem::replace(&mut seen[g], true))
    {
        return Err(SpreadError::InvalidParameter(format!(
            "priority {priority:?} must be a permutation of 0..{k}"
        )));
    }
    let target = target_count(alpha, spec.population())?;
    let g_of = |s: usize| -> Result<f64> {
        let seeded = spec.with_seeds(&place_seeds(spec, priority, s));
        SpreadDistribution::for_target(&seeded, target)?.guaranteed_time(beta)
    };
    let max_s = target - 1;
    if max_s == 0 {
        return Err(SpreadError::Infeasible(
            "target count is 1; no seed count below it".into(),
        ));
    }
    if g_of(max_s)? > t_bound {
        return Err(SpreadError::Infeasible(format!(
            "even {max_s} seeds need more than {t_bound} h"
        )));
    }
    let (mut lo, mut hi) = (0usize, max_s); // g(lo) > bound (or lo = 0), g(hi) <= bound
    if g_of(1)? <= t_bound {
        hi = 1;
    } else {
        lo = 1;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if g_of(mid)? <= t_bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi > 1 && g_of(hi - 1)? <= t_bound {
        return Err(SpreadError::Numerical(
            "guaranteed time is not monotone in the seed count".into(),
        ));
    }
    Ok(place_seeds(spec, priority, hi))
}
