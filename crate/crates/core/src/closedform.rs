//! Closed-form results for a single homogeneous group and for the
//! non-cooperative baseline. These are independent of the matrix machinery
//! in [`crate::analysis`] and serve as oracles for it.
//!
//! In the homogeneous cooperative model the sojourn in state `i` is
//! `Exp(i (N - i) λ)`, so the completion time is a sum of independent
//! exponentials. In the non-cooperative model only the seed transmits, and
//! the sojourn in state `i` is `Exp((N - i) λ)`.

use crate::error::{Result, SpreadError};
use crate::model::target_count;

/// Stage count above which the alternating binomial sum is replaced by its
/// product form.
pub const ALTERNATING_SUM_MAX_STAGES: u32 = 30;

/// Minimum pairwise relative gap between rates for the generalized Erlang
/// coefficients.
pub const ERLANG_DISTINCT_GAP: f64 = 1e-9;

fn check_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(SpreadError::InvalidParameter(format!(
            "rate {lambda} must be positive"
        )))
    }
}

/// Stage range `s..ceil(alpha N)` of the homogeneous birth chain.
fn stages(n: usize, s: usize, alpha: f64) -> Result<std::ops::Range<usize>> {
    if n < 2 || s == 0 || s > n {
        return Err(SpreadError::InvalidParameter(format!(
            "need N >= 2 and 1 <= s <= N, got N={n}, s={s}"
        )));
    }
    let target = target_count(alpha, n)?;
    if s >= target {
        return Ok(0..0);
    }
    Ok(s..target)
}

/// `E[T_alpha] = (1/λ) Σ_{i=s}^{ceil(αN)-1} 1 / (i (N - i))`; zero when the
/// seeds already meet the target.
pub fn homog_mean_completion(n: usize, s: usize, lambda: f64, alpha: f64) -> Result<f64> {
    check_rate(lambda)?;
    let nf = n as f64;
    let sum: f64 = stages(n, s, alpha)?
        .map(|i| {
            let i = i as f64;
            1.0 / (i * (nf - i))
        })
        .sum();
    Ok(sum / lambda)
}

/// `Var[T_alpha] = (1/λ²) Σ_{i=s}^{ceil(αN)-1} 1 / (i (N - i))²`.
pub fn homog_variance(n: usize, s: usize, lambda: f64, alpha: f64) -> Result<f64> {
    check_rate(lambda)?;
    let nf = n as f64;
    let sum: f64 = stages(n, s, alpha)?
        .map(|i| {
            let i = i as f64;
            let r = i * (nf - i);
            1.0 / (r * r)
        })
        .sum();
    Ok(sum / (lambda * lambda))
}

/// Per-stage rates `i (N - i) λ` of the homogeneous birth chain.
pub fn homog_stage_rates(n: usize, s: usize, lambda: f64, alpha: f64) -> Result<Vec<f64>> {
    check_rate(lambda)?;
    Ok(stages(n, s, alpha)?
        .map(|i| (n - i) as f64 * (i as f64 * lambda))
        .collect())
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Survival of the sum of independent `Exp(η i)`, `i = 1..n`:
/// `Σ_{i=1}^{n} (-1)^{i-1} C(n,i) e^{-η i z}`.
///
/// That sum is the maximum of `n` iid `Exp(η)`, so for `n` above
/// [`ALTERNATING_SUM_MAX_STAGES`] the exact product form
/// `1 - (1 - e^{-ηz})^n` is used instead.
pub fn hypoexp_ccdf(n: u32, eta: f64, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(SpreadError::InvalidParameter(
            "stage count must be >= 1".into(),
        ));
    }
    check_rate(eta)?;
    if !(z >= 0.0) {
        return Err(SpreadError::InvalidParameter(format!("z {z} must be >= 0")));
    }
    let v = if n > ALTERNATING_SUM_MAX_STAGES {
        // 1 - (1 - e^{-x})^n with both pieces evaluated stably
        let p = -(-eta * z).exp_m1();
        -(n as f64 * p.ln()).exp_m1()
    } else {
        let mut sum = 0.0;
        for i in 1..=n {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * binomial(n, i) * (-eta * i as f64 * z).exp();
        }
        sum
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Survival of a sum of independent exponentials with distinct rates:
/// `Σ_i (Π_{j≠i} r_j / (r_j - r_i)) e^{-r_i z}`.
///
/// Fails with [`SpreadError::NearDegenerateRates`] when two rates are within
/// a relative gap of [`ERLANG_DISTINCT_GAP`]; use the matrix method there.
pub fn generalized_erlang_ccdf(rates: &[f64], z: f64) -> Result<f64> {
    if rates.is_empty() {
        return Err(SpreadError::InvalidParameter("no rates".into()));
    }
    for &r in rates {
        check_rate(r)?;
    }
    if !(z >= 0.0) {
        return Err(SpreadError::InvalidParameter(format!("z {z} must be >= 0")));
    }
    for (i, &a) in rates.iter().enumerate() {
        for &b in &rates[i + 1..] {
            if (a - b).abs() <= ERLANG_DISTINCT_GAP * a.max(b) {
                return Err(SpreadError::NearDegenerateRates(a, b));
            }
        }
    }
    let mut sum = 0.0;
    for (i, &ri) in rates.iter().enumerate() {
        let mut coef = 1.0;
        for (j, &rj) in rates.iter().enumerate() {
            if j != i {
                coef *= rj / (rj - ri);
            }
        }
        sum += coef * (-ri * z).exp();
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Asymptotic bracket `(t_lower, t_upper)` on the guaranteed time of the
/// homogeneous model with one seed and full penetration:
/// `t_upper = 4 (log(N-1) - log log(1/β)) / (λ N)`, `t_lower = t_upper / 4`.
///
/// The bracket holds only for `N` beyond some threshold, not for every `N`.
pub fn guaranteed_time_bounds(n: usize, lambda: f64, beta: f64) -> Result<(f64, f64)> {
    check_rate(lambda)?;
    if n < 2 {
        return Err(SpreadError::InvalidParameter(format!("N {n} must be >= 2")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SpreadError::InvalidParameter(format!(
            "beta {beta} not in (0,1)"
        )));
    }
    let nf = n as f64;
    let upper = 4.0 / (lambda * nf) * ((nf - 1.0).ln() - (1.0 / beta).ln().ln());
    Ok((upper / 4.0, upper))
}

fn check_noncoop(n: usize, lambda: f64) -> Result<()> {
    check_rate(lambda)?;
    if n < 2 {
        return Err(SpreadError::InvalidParameter(format!("N {n} must be >= 2")));
    }
    Ok(())
}

/// Mean completion time of the non-cooperative model:
/// `(1/λ) Σ_{i=1}^{N-1} 1/i`.
pub fn noncoop_mean(n: usize, lambda: f64) -> Result<f64> {
    check_noncoop(n, lambda)?;
    Ok((1..n).map(|i| 1.0 / i as f64).sum::<f64>() / lambda)
}

/// Survival of the non-cooperative completion time,
/// `1 - (1 - e^{-λt})^{N-1}`.
pub fn noncoop_ccdf(n: usize, lambda: f64, t: f64) -> Result<f64> {
    check_noncoop(n, lambda)?;
    hypoexp_ccdf((n - 1) as u32, lambda, t)
}

/// Variance of the non-cooperative completion time,
/// `(1/λ²) Σ_{i=1}^{N-1} 1/i²`. Increases with `N` towards `ζ(2)/λ²`.
pub fn noncoop_variance(n: usize, lambda: f64) -> Result<f64> {
    check_noncoop(n, lambda)?;
    let s: f64 = (1..n).map(|i| 1.0 / (i as f64 * i as f64)).sum();
    Ok(s / (lambda * lambda))
}

/// Moments of order `n >= 2` of the limit non-cooperative model diverge;
/// this always refuses them. The first moment is [`noncoop_mean`].
pub fn noncoop_moment(n_nodes: usize, lambda: f64, order: u32) -> Result<f64> {
    match order {
        0 => Err(SpreadError::InvalidParameter(
            "moment order must be >= 1".into(),
        )),
        1 => noncoop_mean(n_nodes, lambda),
        k => Err(SpreadError::InfiniteMoment(k)),
    }
}
