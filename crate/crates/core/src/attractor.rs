//! Sufficient conditions for bounded attracting trajectories: dissipativity from
//! a one-sided Lipschitz rate, exponential envelopes, pullback estimates and
//! the row-dominance check of the coupled comparison matrix
//! `C(t) = diag(l_i(t)) + 2 A(t)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::fmt;

use thiserror::Error;

use crate::integrator::{solve, IntegrationError, SolverConfig};
use crate::matrix::Matrix;
use crate::model::{ModelError, NetworkSystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttractorError {
    #[error("epsilon must lie in (0, gamma/2) = (0, {}), got {eps}", gamma / 2.0)]
    InvalidEpsilon { eps: f64, gamma: f64 },
    #[error("decay rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("envelope constant K must be at least 1, got {0}")]
    InvalidK(f64),
    #[error("heterogeneity level must be nonnegative, got {0}")]
    InvalidMu(f64),
    #[error("negative weight a[{}][{}] = {value} at t = {t}", i + 1, j + 1)]
    NegativeWeight { i: usize, j: usize, t: f64, value: f64 },
    #[error("{found} rate functions given for {expected} nodes")]
    RateCount { expected: usize, found: usize },
    #[error("grid must contain at least two increasing finite times")]
    InvalidGrid,
    #[error("pullback depth must be positive, got {0}")]
    InvalidDepth(f64),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Output of the dissipativity transform: `alpha(t) = 2 eps + l(t)`,
/// `beta(t) = (2/eps) |f(t,0)|^2`, envelope rate `gamma_bar = gamma - 2 eps`.
#[derive(Clone)]
pub struct Dissipativity {
    l: Arc<ScalarFn>,
    f0_sq: Arc<ScalarFn>,
    pub epsilon: f64,
    pub gamma: f64,
    pub gamma_bar: f64,
}

impl Dissipativity {
    pub fn alpha(&self, t: f64) -> f64 {
        2.0 * self.epsilon + (self.l)(t)
    }

    pub fn beta(&self, t: f64) -> f64 {
        2.0 / self.epsilon * (self.f0_sq)(t)
    }
}

impl fmt::Debug for Dissipativity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dissipativity")
            .field("epsilon", &self.epsilon)
            .field("gamma", &self.gamma)
            .field("gamma_bar", &self.gamma_bar)
            .finish_non_exhaustive()
    }
}

/// `l` is the one-sided rate with `2<x-y, f(x)-f(y)> <= l(t)|x-y|^2`, `f0_sq`
/// is `t -> |f(t,0)|^2` and `gamma` the decay rate of the envelope of `l`.
pub fn dissipativity_from_onesided(
    l: impl Fn(f64) -> f64 + Send + Sync + 'static,
    f0_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    gamma: f64,
    eps: f64,
) -> Result<Dissipativity, AttractorError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(AttractorError::InvalidRate(gamma));
    }
    if !(eps > 0.0 && eps < gamma / 2.0) {
        return Err(AttractorError::InvalidEpsilon { eps, gamma });
    }
    Ok(Dissipativity {
        l: Arc::new(l),
        f0_sq: Arc::new(f0_sq),
        epsilon: eps,
        gamma,
        gamma_bar: gamma - 2.0 * eps,
    })
}

/// Exponential envelope `exp(int_s^t l) <= K exp(-gamma (t - s))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sl2Envelope {
    pub k: f64,
    pub gamma: f64,
    /// The envelope holds for every pair `s <= t` of grid points.
    pub certified: bool,
    /// Smallest `K` that would make the fitted `gamma` hold on the grid.
    pub required_k: f64,
}

/// Least-squares fit of `int_{t0}^t l` against `ln K - gamma (t - t0)`, with
/// `K` inflated by 1% and then checked over all grid pairs.
pub fn fit_sl2_envelope(l: impl Fn(f64) -> f64, grid: &[f64]) -> Result<Sl2Envelope, AttractorError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || !grid[0].is_finite() {
        return Err(AttractorError::InvalidGrid);
    }
    let t0 = grid[0];
    let mut cum = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = l(t0);
    cum.push(0.0);
    for w in grid.windows(2) {
        let cur = l(w[1]);
        acc += 0.5 * (prev + cur) * (w[1] - w[0]);
        prev = cur;
        cum.push(acc);
    }
    let n = grid.len() as f64;
    let mean_t = grid.iter().map(|t| t - t0).sum::<f64>() / n;
    let mean_y = cum.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in grid.iter().zip(&cum) {
        let dx = t - t0 - mean_t;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let gamma = -slope;
    if !(gamma > 0.0) {
        return Err(AttractorError::InvalidRate(gamma));
    }
    let intercept = mean_y - slope * mean_t;
    let k = (intercept.exp() * 1.01).max(1.0);
    // largest rise of int l + gamma (t - t0) over ordered grid pairs
    let mut run_min = f64::INFINITY;
    let mut rise: f64 = 0.0;
    for (t, y) in grid.iter().zip(&cum) {
        let g = y + gamma * (t - t0);
        run_min = run_min.min(g);
        rise = rise.max(g - run_min);
    }
    let required_k = rise.exp();
    Ok(Sl2Envelope {
        k,
        gamma,
        certified: required_k <= k,
        required_k,
    })
}

/// Uniform ultimate bound `K mu / (1 - exp(-gamma_bar))`.
pub fn ultimate_bound(k: f64, gamma_bar: f64, mu: f64) -> Result<f64, AttractorError> {
    if !(k >= 1.0) {
        return Err(AttractorError::InvalidK(k));
    }
    if !(gamma_bar > 0.0) {
        return Err(AttractorError::InvalidRate(gamma_bar));
    }
    if !(mu >= 0.0) {
        return Err(AttractorError::InvalidMu(mu));
    }
    Ok(k * mu / (1.0 - (-gamma_bar).exp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackEstimate {
    pub state: Vec<f64>,
    /// Difference between the last two depths.
    pub gap: f64,
    pub depth: f64,
    pub converged: bool,
}

pub const PULLBACK_TOL: f64 = 1e-8;

/// Estimates the pullback limit at time `t` by integrating from `x0` at
/// `t - s` for `s = 1, 2, 4, ...` until successive estimates agree to
/// [`PULLBACK_TOL`] or `s` reaches `s_max`.
pub fn pullback_trajectory<F>(
    mut rhs: F,
    t: f64,
    s_max: f64,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<PullbackEstimate, AttractorError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(AttractorError::InvalidDepth(s_max));
    }
    let mut run = |s: f64| -> Result<Vec<f64>, AttractorError> {
        let sol = solve(
            |tt, x, out| {
                rhs(tt, x, out);
                Ok(())
            },
            t - s,
            x0,
            t,
            &[],
            cfg,
        )?;
        Ok(sol.last().map(|(_, x)| x.to_vec()).unwrap_or_default())
    };
    let mut s = s_max.min(1.0);
    let mut prev = run(s)?;
    let mut gap = f64::INFINITY;
    while s < s_max {
        s = (2.0 * s).min(s_max);
        let cur = run(s)?;
        gap = cur
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        prev = cur;
        if gap < PULLBACK_TOL {
            break;
        }
    }
    Ok(PullbackEstimate {
        state: prev,
        gap,
        depth: s,
        converged: gap < PULLBACK_TOL,
    })
}

/// Result of the row-dominance check of `C(t) = diag(l_i(t)) + 2 c A(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledComparison {
    /// Grid infimum of `|l_i(t)| - 2 sum_k c a_ik(t)`.
    pub gamma: f64,
    /// Node and time attaining `gamma`.
    pub argmin: (usize, f64),
    /// Grid supremum of the rates `l_i(t)`.
    pub sup_l: f64,
    pub verdict: bool,
    pub n_nodes: usize,
    pub grid_len: usize,
}

/// `C(t) = diag(l_i(t)) + 2 c A(t)`.
pub fn coupled_comparison_matrix(
    system: &NetworkSystem,
    rates: &[&dyn Fn(f64) -> f64],
    t: f64,
) -> Result<Matrix, AttractorError> {
    let n = system.n_nodes();
    if rates.len() != n {
        return Err(AttractorError::RateCount {
            expected: n,
            found: rates.len(),
        });
    }
    let mut c = system.effective_adjacency(t)?;
    c.scale(2.0);
    for (i, l) in rates.iter().enumerate() {
        c[(i, i)] = l(t);
    }
    Ok(c)
}

/// Checks the hypotheses of the coupled attractor result on `grid`: nonnegative
/// weights, `sup l_i < 0` and a positive row-dominance margin of `C(t)`.
pub fn coupled_comparison_check(
    system: &NetworkSystem,
    rates: &[&dyn Fn(f64) -> f64],
    grid: &[f64],
) -> Result<CoupledComparison, AttractorError> {
    let n = system.n_nodes();
    if rates.len() != n {
        return Err(AttractorError::RateCount {
            expected: n,
            found: rates.len(),
        });
    }
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(AttractorError::InvalidGrid);
    }
    let c = system.coupling();
    let mut scratch = Matrix::square(n);
    let mut gamma = f64::INFINITY;
    let mut argmin = (0, grid[0]);
    let mut sup_l = f64::NEG_INFINITY;
    let mut row = vec![0.0; n];
    for &t in grid {
        let a = system.schedule().sample_ref(t, &mut scratch)?;
        for i in 0..n {
            let mut s = 0.0;
            for k in (0..n).filter(|&k| k != i) {
                let w = a[(i, k)];
                if w < 0.0 {
                    return Err(AttractorError::NegativeWeight { i, j: k, t, value: w });
                }
                s += c * w;
            }
            row[i] = s;
        }
        for (i, l) in rates.iter().enumerate() {
            let li = l(t);
            sup_l = sup_l.max(li);
            let m = li.abs() - 2.0 * row[i];
            if m < gamma {
                gamma = m;
                argmin = (i, t);
            }
        }
    }
    Ok(CoupledComparison {
        gamma,
        argmin,
        sup_l,
        verdict: sup_l < 0.0 && gamma > 0.0,
        n_nodes: n,
        grid_len: grid.len(),
    })
}
