//! Row-dominance synchronization certificates for the whole network and for
//! clusters, the refined bounds under global coupling, persistence margins and
//! the coupling threshold of static networks.
//!
//! Every "for almost every t" hypothesis is checked on a finite grid: the
//! uniform grid of the [`WindowGrid`] plus every schedule breakpoint inside it.
//! Verdicts are therefore grid verdicts. A verdict that passes only within
//! `margin` of a boundary is reported as [`Verdict::GridVerifiedOnly`].

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::comparison::{ComparisonSample, ComparisonSystem};
use crate::matrix::Matrix;
use crate::model::{pairs, ClusterSpec, ModelError, NetworkSystem, PairBoundSet};
use crate::window::{compute_mu1_on, compute_mu2, WindowGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error("bound M = {bound_m} must exceed the heterogeneity level {mu}")]
    BoundTooSmall { bound_m: f64, mu: f64 },
    #[error("certificate grid is empty or shorter than one time unit")]
    InvalidGrid,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("margin must be nonnegative, got {0}")]
    InvalidMargin(f64),
    #[error("global coupling must be at least 1, got {0}")]
    CouplingBelowOne(f64),
    #[error("operation needs a certificate whose verdict holds")]
    NotCertified,
    #[error("operation needs a sharp certificate (mu1 = 0)")]
    NotSharp,
    #[error("static hypothesis fails for pair ({}, {}): {value} <= 0", pair.0 + 1, pair.1 + 1)]
    Infeasible { pair: (usize, usize), value: f64 },
    #[error("adjacency must be a square finite matrix with at least two nodes")]
    InvalidMatrix,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `delta_ij(t) < 0` violated.
    Delta,
    /// `gamma_bar > -ln(1 - mu / M)` violated.
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Holds,
    /// First violated condition, offending pair (zero based) and grid time.
    Fails {
        condition: Condition,
        pair: (usize, usize),
        t: f64,
    },
    /// All inequalities hold on the grid, but some only within the safety margin.
    GridVerifiedOnly,
}

impl Verdict {
    /// `Holds` or `GridVerifiedOnly`.
    pub fn passes(&self) -> bool {
        !matches!(self, Verdict::Fails { .. })
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertParams {
    pub grid: WindowGrid,
    pub bound_m: f64,
    pub epsilon: f64,
    pub margin: f64,
}

impl CertParams {
    pub fn new(grid: WindowGrid, bound_m: f64, epsilon: f64) -> Self {
        Self {
            grid,
            bound_m,
            epsilon,
            margin: 1e-9,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    fn validate(&self) -> Result<(), CertError> {
        if !self.grid.is_valid() {
            return Err(CertError::InvalidGrid);
        }
        if !(self.epsilon > 0.0) {
            return Err(CertError::InvalidEpsilon(self.epsilon));
        }
        if !(self.margin >= 0.0) {
            return Err(CertError::InvalidMargin(self.margin));
        }
        Ok(())
    }
}

/// Full-network certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncCertificate {
    pub grid: WindowGrid,
    /// Number of grid points actually evaluated (uniform grid plus breakpoints).
    pub n_grid_points: usize,
    pub pairs: Vec<(usize, usize)>,
    pub delta_min: Vec<f64>,
    pub delta_max: Vec<f64>,
    pub gamma_min: Vec<f64>,
    pub gamma_bar: f64,
    /// Pair and time attaining `gamma_bar`.
    pub gamma_argmin: ((usize, usize), f64),
    pub mu1: f64,
    /// Grid supremum of `|beta(t)|`, an estimate of the essential sup.
    pub beta_sup: f64,
    pub rho: f64,
    pub bound_m: f64,
    pub epsilon: f64,
    pub margin: f64,
    /// `-ln(1 - mu1 / M)`.
    pub log_threshold: f64,
    pub verdict: Verdict,
    /// `epsilon + M` when the verdict passes.
    pub asymptotic_bound: Option<f64>,
    /// `T(epsilon) = ln(4 rho^2 / epsilon) / gamma_bar` when the verdict passes.
    pub settle_time: Option<f64>,
}

/// Cluster certificate; `core` holds the pair checks restricted to the cluster
/// with `mu1` replaced by the combined heterogeneity level.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCertificate {
    pub cluster: ClusterSpec,
    pub mu1: f64,
    pub mu2: f64,
    /// `mu1 + mu2 (N - n) sqrt(2 n (n - 1))`.
    pub combined_mu: f64,
    pub gamma_bar_j: f64,
    pub verdict: Verdict,
    pub asymptotic_bound: Option<f64>,
    pub settle_time: Option<f64>,
    pub core: SyncCertificate,
}

/// Times at which the hypotheses are sampled.
pub fn certificate_grid(system: &NetworkSystem, grid: &WindowGrid) -> Vec<f64> {
    let mut times = grid.coarse_times();
    times.extend(system.schedule().breakpoints_between(grid.t0, grid.t1));
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Shared implementation of the full and cluster certificates.
fn certify_pairs(
    cs: &ComparisonSystem,
    params: &CertParams,
    mu1: f64,
    mu: f64,
) -> Result<SyncCertificate, CertError> {
    params.validate()?;
    if !(params.bound_m > mu) {
        return Err(CertError::BoundTooSmall {
            bound_m: params.bound_m,
            mu,
        });
    }
    let times = certificate_grid(cs.system(), &params.grid);
    let dim = cs.dim();
    let mut delta_min = vec![f64::INFINITY; dim];
    let mut delta_max = vec![f64::NEG_INFINITY; dim];
    let mut gamma_min = vec![f64::INFINITY; dim];
    let mut gamma_bar = f64::INFINITY;
    let mut gamma_arg = (cs.pairs()[0], times[0]);
    let mut delta_fail: Option<((usize, usize), f64)> = None;
    let mut delta_near = false;
    let mut beta_sup: f64 = 0.0;

    let mut scratch = Matrix::square(cs.system().n_nodes());
    let mut s = ComparisonSample {
        e: Matrix::square(dim),
        delta: vec![0.0; dim],
        gamma: vec![0.0; dim],
        beta: vec![0.0; dim],
    };
    for &t in &times {
        cs.sample_into(t, &mut scratch, &mut s)?;
        beta_sup = beta_sup.max(s.beta.iter().map(|b| b * b).sum::<f64>().sqrt());
        for p in 0..dim {
            let (d, g) = (s.delta[p], s.gamma[p]);
            delta_min[p] = delta_min[p].min(d);
            delta_max[p] = delta_max[p].max(d);
            gamma_min[p] = gamma_min[p].min(g);
            if g < gamma_bar {
                gamma_bar = g;
                gamma_arg = (cs.pairs()[p], t);
            }
            if !(d < 0.0) {
                if delta_fail.is_none() {
                    delta_fail = Some((cs.pairs()[p], t));
                }
            } else if d > -params.margin {
                delta_near = true;
            }
        }
    }

    let log_threshold = -(1.0 - mu / params.bound_m).ln();
    let verdict = if let Some((pair, t)) = delta_fail {
        Verdict::Fails {
            condition: Condition::Delta,
            pair,
            t,
        }
    } else if !(gamma_bar > log_threshold) || !(gamma_bar > 0.0) {
        Verdict::Fails {
            condition: Condition::Gamma,
            pair: gamma_arg.0,
            t: gamma_arg.1,
        }
    } else if delta_near || gamma_bar < log_threshold + params.margin || gamma_bar < params.margin {
        Verdict::GridVerifiedOnly
    } else {
        Verdict::Holds
    };
    let rho = cs.bounds().rho();
    let (asymptotic_bound, settle_time) = if verdict.passes() {
        (
            Some(params.epsilon + params.bound_m),
            Some((4.0 * rho * rho / params.epsilon).ln() / gamma_bar),
        )
    } else {
        (None, None)
    };
    Ok(SyncCertificate {
        grid: params.grid,
        n_grid_points: times.len(),
        pairs: cs.pairs().to_vec(),
        delta_min,
        delta_max,
        gamma_min,
        gamma_bar,
        gamma_argmin: gamma_arg,
        mu1,
        beta_sup,
        rho,
        bound_m: params.bound_m,
        epsilon: params.epsilon,
        margin: params.margin,
        log_threshold,
        verdict,
        asymptotic_bound,
        settle_time,
    })
}

/// Certificate of synchronization up to a constant for the whole network.
pub fn check_full_sync(
    system: &NetworkSystem,
    bounds: &PairBoundSet,
    params: &CertParams,
) -> Result<SyncCertificate, CertError> {
    params.validate()?;
    let cs = ComparisonSystem::new(system, bounds)?;
    let mu1 = compute_mu1_on(bounds, cs.pairs(), &params.grid).ok_or(CertError::InvalidGrid)?;
    certify_pairs(&cs, params, mu1, mu1)
}

/// Certificate of synchronization up to a constant for the nodes of `cluster`.
pub fn check_cluster_sync(
    system: &NetworkSystem,
    bounds: &PairBoundSet,
    cluster: &ClusterSpec,
    params: &CertParams,
) -> Result<ClusterCertificate, CertError> {
    params.validate()?;
    let cs = ComparisonSystem::for_cluster(system, bounds, cluster)?;
    let mu1 = compute_mu1_on(bounds, cs.pairs(), &params.grid).ok_or(CertError::InvalidGrid)?;
    let mu2 = compute_mu2(system, cluster, bounds.rho(), &params.grid).ok_or(CertError::InvalidGrid)?;
    let combined_mu = combined_mu(mu1, mu2, system.n_nodes(), cluster.len());
    let core = certify_pairs(&cs, params, mu1, combined_mu)?;
    Ok(ClusterCertificate {
        cluster: cluster.clone(),
        mu1,
        mu2,
        combined_mu,
        gamma_bar_j: core.gamma_bar,
        verdict: core.verdict,
        asymptotic_bound: core.asymptotic_bound,
        settle_time: core.settle_time,
        core,
    })
}

/// `mu1 + mu2 (N - n) sqrt(2 n (n - 1))`.
pub fn combined_mu(mu1: f64, mu2: f64, n_nodes: usize, n_cluster: usize) -> f64 {
    let (nn, n) = (n_nodes as f64, n_cluster as f64);
    if n_nodes == n_cluster {
        return mu1;
    }
    mu1 + mu2 * (nn - n) * (2.0 * n * (n - 1.0)).sqrt()
}

/// Refined asymptotic bounds for a certified network rescaled by a global
/// coupling `c >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedBounds {
    pub epsilon: f64,
    /// `M / c`.
    pub m_over_c: f64,
    /// `|beta|_inf / (c gamma_bar)` when the sup norm was supplied.
    pub linf_term: Option<f64>,
    /// Identical nodes with vanishing heterogeneity: sharp synchronization.
    pub sharp: bool,
}

impl RefinedBounds {
    pub fn m_bound(&self) -> f64 {
        self.epsilon + self.m_over_c
    }

    pub fn linf_bound(&self) -> Option<f64> {
        self.linf_term.map(|v| self.epsilon + v)
    }

    /// The smaller of the two available bounds.
    pub fn best(&self) -> f64 {
        self.linf_bound().map_or(self.m_bound(), |b| b.min(self.m_bound()))
    }
}

pub fn refined_bounds(
    cert: &SyncCertificate,
    c: f64,
    beta_inf: Option<f64>,
) -> Result<RefinedBounds, CertError> {
    if !cert.verdict.passes() {
        return Err(CertError::NotCertified);
    }
    if !(c >= 1.0) || !c.is_finite() {
        return Err(CertError::CouplingBelowOne(c));
    }
    Ok(RefinedBounds {
        epsilon: cert.epsilon,
        m_over_c: cert.bound_m / c,
        linf_term: beta_inf.map(|b| b / (c * cert.gamma_bar)),
        sharp: beta_inf == Some(0.0) && cert.mu1 == 0.0,
    })
}

/// Robustness of a sharp certificate under node and adjacency perturbations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceMargins {
    pub gamma_bar: f64,
    pub rho: f64,
    pub n_nodes: usize,
    /// Perturbations `B(t)` with `sup |B(t)| < gamma_bar / 4` keep sharp synchronization.
    pub adjacency_margin: f64,
}

impl PersistenceMargins {
    /// Sync level `4 rho delta sqrt(N(N-1)/2) / gamma_bar` reached under
    /// vector-field perturbations of size `delta`.
    pub fn heterogeneity_bound(&self, delta: f64) -> f64 {
        let n = self.n_nodes as f64;
        4.0 * self.rho * delta * (n * (n - 1.0) / 2.0).sqrt() / self.gamma_bar
    }
}

pub fn persistence_margins(
    cert: &SyncCertificate,
    rho: f64,
    n_nodes: usize,
) -> Result<PersistenceMargins, CertError> {
    if !cert.verdict.passes() {
        return Err(CertError::NotCertified);
    }
    if cert.mu1 != 0.0 {
        return Err(CertError::NotSharp);
    }
    Ok(margins_from(cert.gamma_bar, rho, n_nodes))
}

/// Margins for a given `gamma_bar`, without a certificate.
pub fn margins_from(gamma_bar: f64, rho: f64, n_nodes: usize) -> PersistenceMargins {
    PersistenceMargins {
        gamma_bar,
        rho,
        n_nodes,
        adjacency_margin: gamma_bar / 4.0,
    }
}

/// Value of `2(a_ij + a_ji) + sum_k (a_jk + a_ik - |a_jk - a_ik|)` for every pair.
pub fn static_hypothesis(a: &Matrix) -> Vec<((usize, usize), f64)> {
    let n = a.rows();
    pairs(n)
        .map(|(i, j)| {
            let mut h = 2.0 * (a[(i, j)] + a[(j, i)]);
            for k in (0..n).filter(|&k| k != i && k != j) {
                h += a[(j, k)] + a[(i, k)] - (a[(j, k)] - a[(i, k)]).abs();
            }
            ((i, j), h)
        })
        .collect()
}

/// Do `delta_ij < 0` and `gamma_ij > 0` hold for every pair of the static
/// network `c A` with identical nodes of one-sided rate `l`?
fn static_conditions_hold(a: &Matrix, l: f64, c: f64) -> bool {
    let n = a.rows();
    pairs(n).all(|(i, j)| {
        let mut s = a[(i, j)] + a[(j, i)];
        let mut d = 0.0;
        for k in (0..n).filter(|&k| k != i && k != j) {
            s += 0.5 * (a[(j, k)] + a[(i, k)]);
            d += (a[(j, k)] - a[(i, k)]).abs();
        }
        let delta = l - c * s;
        delta < 0.0 && 2.0 * delta.abs() - c * d > 0.0
    })
}

/// Smallest coupling `c_bar` such that the certificate inequalities hold for
/// every `c > c_bar`, found by bisection to `1e-9`.
pub fn static_threshold(a: &Matrix, l_rho: f64) -> Result<f64, CertError> {
    if !a.is_square() || a.rows() < 2 || !a.is_finite() || !l_rho.is_finite() {
        return Err(CertError::InvalidMatrix);
    }
    let mut a = a.clone();
    a.zero_diagonal();
    if let Some(&(pair, value)) = static_hypothesis(&a).iter().find(|(_, h)| !(*h > 0.0)) {
        return Err(CertError::Infeasible { pair, value });
    }
    if l_rho <= 0.0 {
        // every positive coupling works
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !static_conditions_hold(&a, l_rho, hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(CertError::InvalidMatrix);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if static_conditions_hold(&a, l_rho, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Heuristic `M`: twice `mu1`, raised if needed so that the log condition
/// leaves half of `gamma_bar` as slack. Falls back to a small positive value
/// when `mu1 = 0`.
pub fn suggest_bound_m(mu1: f64, gamma_bar: f64) -> f64 {
    if mu1 <= 0.0 {
        return 1e-6;
    }
    let mut m = 2.0 * mu1;
    if gamma_bar > 0.0 {
        m = m.max(mu1 / (1.0 - (-0.5 * gamma_bar).exp()));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pair_bounds_for_identical_nodes, AdjacencySchedule, NodeDynamics};

    fn complete3(c: f64) -> NetworkSystem {
        let ones = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        NetworkSystem::homogeneous(
            NodeDynamics::new(1, |_, x, o| o[0] = x[0]),
            AdjacencySchedule::constant(ones).unwrap(),
            c,
        )
        .unwrap()
    }

    fn params() -> CertParams {
        CertParams::new(WindowGrid::new(0.0, 5.0, 0.1), 0.5, 1e-3)
    }

    #[test]
    fn complete_graph_holds_with_bound_epsilon_plus_m() {
        let b = pair_bounds_for_identical_nodes(3, 2.0, |_, _| 1.0).unwrap();
        let cert = check_full_sync(&complete3(1.0), &b, &params()).unwrap();
        assert_eq!(cert.verdict, Verdict::Holds);
        assert_eq!(cert.mu1, 0.0);
        assert_eq!(cert.gamma_bar, 4.0);
        assert_eq!(cert.log_threshold, 0.0);
        assert_eq!(cert.asymptotic_bound, Some(1e-3 + 0.5));
        let t = cert.settle_time.unwrap();
        assert!((t - (16.0f64 / 1e-3).ln() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn delta_failure_is_reported_first() {
        let b = pair_bounds_for_identical_nodes(3, 2.0, |_, _| 5.0).unwrap();
        let cert = check_full_sync(&complete3(1.0), &b, &params()).unwrap();
        assert_eq!(
            cert.verdict,
            Verdict::Fails {
                condition: Condition::Delta,
                pair: (0, 1),
                t: 0.0
            }
        );
        assert!(cert.asymptotic_bound.is_none());
    }

    #[test]
    fn margin_band_gives_grid_verified_only() {
        // delta = 1 - 3c is -1e-12 at c = (1 + 1e-12)/3
        let b = pair_bounds_for_identical_nodes(3, 2.0, |_, _| 1.0).unwrap();
        let sys = complete3((1.0 + 3e-12) / 3.0);
        let cert = check_full_sync(&sys, &b, &params()).unwrap();
        assert_eq!(cert.verdict, Verdict::GridVerifiedOnly);
        let strict = check_full_sync(&sys, &b, &params().with_margin(0.0)).unwrap();
        assert_eq!(strict.verdict, Verdict::Holds);
    }

    #[test]
    fn bound_below_mu_is_rejected() {
        let b = PairBoundSet::new(3, 1.0, |_, _, _| -10.0, |_, _, _| 1.0, false).unwrap();
        let p = CertParams::new(WindowGrid::new(0.0, 5.0, 0.1), 1.0, 1e-3);
        assert!(matches!(
            check_full_sync(&complete3(1.0), &b, &p),
            Err(CertError::BoundTooSmall { .. })
        ));
    }

    #[test]
    fn full_cluster_is_full_certificate() {
        let b = PairBoundSet::new(3, 1.0, |_, _, _| 0.5, |i, j, t| 0.01 * (i + j) as f64 * t.cos().abs(), false)
            .unwrap();
        let p = CertParams::new(WindowGrid::new(0.0, 5.0, 0.1), 1.0, 1e-3);
        let sys = complete3(1.0);
        let full = check_full_sync(&sys, &b, &p).unwrap();
        let cl = check_cluster_sync(&sys, &b, &ClusterSpec::full(3), &p).unwrap();
        assert_eq!(cl.core, full);
        assert_eq!(cl.mu2, 0.0);
        assert_eq!(cl.combined_mu, full.mu1);
    }

    #[test]
    fn refined_examples() {
        let b = pair_bounds_for_identical_nodes(3, 2.0, |_, _| 1.0).unwrap();
        let mut p = params();
        p.bound_m = 1.0;
        let cert = check_full_sync(&complete3(1.0), &b, &p).unwrap();
        let r = refined_bounds(&cert, 10.0, Some(0.0)).unwrap();
        assert!((r.m_over_c - 0.1).abs() < 1e-15);
        assert_eq!(r.linf_bound(), Some(cert.epsilon));
        assert!(r.sharp);
        // gamma_bar = 4: beta_inf 2 gives 0.5
        let r2 = refined_bounds(&cert, 1.0, Some(2.0)).unwrap();
        assert_eq!(r2.linf_term, Some(0.5));
        assert!(matches!(refined_bounds(&cert, 0.5, None), Err(CertError::CouplingBelowOne(_))));
    }

    #[test]
    fn persistence_examples() {
        let m = margins_from(2.0, 1.0, 5);
        assert_eq!(m.adjacency_margin, 0.5);
        assert_eq!(m.heterogeneity_bound(0.0), 0.0);
        assert!((m.heterogeneity_bound(0.1) - 0.4 * 10f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((m.heterogeneity_bound(0.1) - 0.6325).abs() < 1e-4);
    }

    #[test]
    fn threshold_of_complete_graph() {
        let ones = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let c = static_threshold(&ones, 1.0).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(static_threshold(&ones, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn star_threshold_cases() {
        // hub 0 listens to leaves with weight b, leaves listen to the hub with weight a
        let star = |a: f64, b: f64, n: usize| {
            Matrix::from_fn(n, n, |i, j| match (i, j) {
                (0, 0) => 0.0,
                (0, _) => b,
                (_, 0) => a,
                _ => 0.0,
            })
        };
        assert!(static_threshold(&star(5.0, -1.0, 5), 1.0).unwrap().is_finite());
        assert!(matches!(
            static_threshold(&star(3.0, -1.0, 5), 1.0),
            Err(CertError::Infeasible { pair: (0, _), .. })
        ));
    }

    #[test]
    fn suggested_bound_exceeds_mu() {
        assert!(suggest_bound_m(0.3, 1.0) > 0.3);
        let m = suggest_bound_m(0.3, 0.1);
        assert!(0.1 > -(1.0 - 0.3 / m).ln());
    }
}
