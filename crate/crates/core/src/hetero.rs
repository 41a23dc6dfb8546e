//! Two-community heterogeneity: equal-size groups, symmetric inter-group
//! rate, one seed in group 1.
//!
//! [`gamma_region`] sweeps the intra/inter ratios `(γ1, γ2)` under the
//! fair-average constraint and marks where the guaranteed time beats the
//! homogeneous network. The remaining functions give the tail decay rate in
//! closed form for the special-case family where the inter-group rate is
//! the mean of the two intra-group rates.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::SpreadDistribution;
use crate::error::{Result, SpreadError};
use crate::model::{
    fair_rate_matrix, special_case_rates, target_count, GroupProfile, NetworkSpec, RateMatrix,
};

/// Relative margin by which the heterogeneous guaranteed time must undercut
/// the homogeneous one to count as accelerated.
pub const MEMBERSHIP_REL_TOL: f64 = 1e-9;

fn check_even(n: usize) -> Result<usize> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(SpreadError::InvalidParameter(format!(
            "N {n} must be even and >= 4"
        )));
    }
    Ok(n / 2)
}

/// Two groups of `N/2` nodes with one seed in group 1.
pub fn dual_community_spec(n: usize, rates: RateMatrix) -> Result<NetworkSpec> {
    let half = check_even(n)?;
    NetworkSpec::new(
        vec![GroupProfile::new(half, 1), GroupProfile::new(half, 0)],
        rates,
    )
}

/// [`dual_community_spec`] with rates from [`fair_rate_matrix`].
pub fn fair_spec(n: usize, mean_rate: f64, gamma1: f64, gamma2: f64) -> Result<NetworkSpec> {
    let half = check_even(n)?;
    dual_community_spec(
        n,
        fair_rate_matrix(mean_rate, (half, half), gamma1, gamma2)?,
    )
}

/// [`dual_community_spec`] with rates from [`special_case_rates`].
pub fn special_case_spec(n: usize, mean_rate: f64, gamma: f64) -> Result<NetworkSpec> {
    dual_community_spec(n, special_case_rates(mean_rate, gamma)?)
}

/// Axes of a `(γ1, γ2)` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
}

impl GridSpec {
    /// `points` evenly spaced values on `[lo, hi]` for both axes.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Self {
        let axis: Vec<f64> = if points <= 1 {
            vec![lo]
        } else {
            (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .collect()
        };
        GridSpec {
            gamma1: axis.clone(),
            gamma2: axis,
        }
    }
}

impl Default for GridSpec {
    /// 41 x 41 over `[0, 20]^2`.
    fn default() -> Self {
        GridSpec::uniform(0.0, 20.0, 41)
    }
}

/// Result of a `(γ1, γ2)` sweep. Row index follows `gamma1`, column index
/// follows `gamma2`.
#[derive(Debug, Clone, Serialize)]
pub struct GammaGrid {
    pub gamma1_values: Vec<f64>,
    pub gamma2_values: Vec<f64>,
    pub homogeneous_time: f64,
    /// Heterogeneous minus homogeneous guaranteed time.
    pub delta_g: Vec<Vec<f64>>,
    pub membership: Vec<Vec<bool>>,
}

impl GammaGrid {
    /// CSV rows `gamma1,gamma2,delta_G,member`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma1,gamma2,delta_G,member\n");
        for (i, g1) in self.gamma1_values.iter().enumerate() {
            for (j, g2) in self.gamma2_values.iter().enumerate() {
                s.push_str(&format!(
                    "{g1},{g2},{:e},{}\n",
                    self.delta_g[i][j],
                    u8::from(self.membership[i][j])
                ));
            }
        }
        s
    }

    pub fn member_count(&self) -> usize {
        self.membership.iter().flatten().filter(|&&m| m).count()
    }
}

/// Marks every `(γ1, γ2)` of `grid` at which the heterogeneous network has a
/// strictly smaller `(alpha, beta)` guaranteed time than the homogeneous one
/// with the same average rate. Cells are evaluated in parallel.
pub fn gamma_region(
    mean_rate: f64,
    n: usize,
    alpha: f64,
    beta: f64,
    grid: &GridSpec,
) -> Result<GammaGrid> {
    let target = target_count(alpha, n)?;
    let homogeneous = fair_spec(n, mean_rate, 1.0, 1.0)?;
    let g_hom = SpreadDistribution::for_target(&homogeneous, target)?.guaranteed_time(beta)?;

    let cells: Vec<(usize, usize)> = (0..grid.gamma1.len())
        .flat_map(|i| (0..grid.gamma2.len()).map(move |j| (i, j)))
        .collect();
    let times: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let spec = fair_spec(n, mean_rate, grid.gamma1[i], grid.gamma2[j])?;
            SpreadDistribution::for_target(&spec, target)?.guaranteed_time(beta)
        })
        .collect::<Result<_>>()?;

    let mut delta_g = vec![vec![0.0; grid.gamma2.len()]; grid.gamma1.len()];
    let mut membership = vec![vec![false; grid.gamma2.len()]; grid.gamma1.len()];
    for (&(i, j), g) in cells.iter().zip(times) {
        delta_g[i][j] = g - g_hom;
        membership[i][j] = g < g_hom * (1.0 - MEMBERSHIP_REL_TOL);
    }
    Ok(GammaGrid {
        gamma1_values: grid.gamma1.clone(),
        gamma2_values: grid.gamma2.clone(),
        homogeneous_time: g_hom,
        delta_g,
        membership,
    })
}

/// Heterogeneity ratio above which full-but-one penetration decays more
/// slowly as heterogeneity grows: `(5N - 16) / (N - 4)`.
pub fn threshold_gamma(n: usize) -> Result<f64> {
    if n <= 4 {
        return Err(SpreadError::InvalidParameter(format!("N {n} must be > 4")));
    }
    let n = n as f64;
    Ok((5.0 * n - 16.0) / (n - 4.0))
}

/// Diagonal entries of the special-case chain at its two candidate maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexRho {
    /// `ρ(1, 0) = -(N-2) γ λ / (γ+1) - N λ / 2`.
    pub corner: f64,
    /// `ρ(N/2, c-1-N/2)` with `c = ceil(αN)`; absent when `c - 1 < N/2`.
    pub edge: Option<f64>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 1.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(SpreadError::InvalidParameter(format!(
            "gamma {gamma} must be >= 1"
        )))
    }
}

pub fn vertex_rho(n: usize, mean_rate: f64, gamma: f64, alpha: f64) -> Result<VertexRho> {
    let half = check_even(n)?;
    check_gamma(gamma)?;
    let c = target_count(alpha, n)?;
    let (nf, lam) = (n as f64, mean_rate);
    let corner = -(nf - 2.0) * gamma * lam / (gamma + 1.0) - nf * lam / 2.0;
    let edge = (c > half).then(|| {
        let i2 = (c - 1 - half) as f64;
        -((n - c + 1) as f64) * (nf * lam / 2.0 + i2 * 2.0 * lam / (gamma + 1.0))
    });
    Ok(VertexRho { corner, edge })
}

/// Total outflow `-ρ(i1, i2)` of a dual-community state with group size
/// `half` under rate matrix `rates`.
fn outflow(half: usize, rates: &RateMatrix, i: [usize; 2]) -> f64 {
    let mut total = 0.0;
    for l in 0..2 {
        let pressure: f64 = (0..2).map(|k| i[k] as f64 * rates.get(k, l)).sum();
        total += (half - i[l]) as f64 * pressure;
    }
    total
}

/// Vertices of `{1 <= i1 <= n, 0 <= i2 <= n, i1 + i2 <= c - 1}`.
fn domain_vertices(half: usize, c: usize) -> Vec<[usize; 2]> {
    let top = c - 1;
    let mut v = Vec::new();
    for i1 in [1, half] {
        for i2 in [0, half] {
            if i1 + i2 <= top {
                v.push([i1, i2]);
            }
        }
    }
    // intersections of i1 + i2 = top with the box edges
    for i1 in [1, half] {
        if top >= i1 && top - i1 <= half {
            v.push([i1, top - i1]);
        }
    }
    for i2 in [0, half] {
        if top >= i2 && (1..=half).contains(&(top - i2)) {
            v.push([top - i2, i2]);
        }
    }
    v.sort_unstable();
    v.dedup();
    v
}

/// Tail decay rate `D_α(γ)` of the special-case dual community, as the
/// smallest outflow over the vertices of the transient domain.
///
/// Along the domain's edges the outflow is concave or linear, so its minimum
/// is attained at a vertex.
pub fn decay_rate_theorem3(n: usize, mean_rate: f64, gamma: f64, alpha: f64) -> Result<f64> {
    let half = check_even(n)?;
    check_gamma(gamma)?;
    let c = target_count(alpha, n)?;
    if c <= 1 {
        return Err(SpreadError::TrivialCompletion {
            seeds: 1,
            target: c,
        });
    }
    let rates = special_case_rates(mean_rate, gamma)?;
    Ok(domain_vertices(half, c)
        .into_iter()
        .map(|v| outflow(half, &rates, v))
        .fold(f64::INFINITY, f64::min))
}

/// Decay rate read off the closed-form case analysis, keyed on the target
/// count `c = ceil(αN)`: `c <= N-2` gives the seed corner, `c = N` the far
/// edge, and `c = N-1` switches at [`threshold_gamma`].
pub fn decay_rate_case_table(n: usize, mean_rate: f64, gamma: f64, alpha: f64) -> Result<f64> {
    let rho = vertex_rho(n, mean_rate, gamma, alpha)?;
    let c = target_count(alpha, n)?;
    let edge = || {
        rho.edge
            .ok_or_else(|| SpreadError::InvalidParameter("edge vertex absent".into()))
    };
    let max_rho = if c + 2 <= n {
        rho.corner
    } else if c == n {
        edge()?
    } else if n > 4 && gamma < threshold_gamma(n)? {
        rho.corner
    } else {
        edge()?
    };
    Ok(-max_rho)
}
