//! Sliding unit-window integrals `sup_tau int_tau^{tau+1} |g(s)| ds`.
//!
//! Integrands are sampled on a grid `refine` times finer than the grid step and
//! integrated with the trapezoidal rule. Window starts run over every fine
//! sample, so only O(samples-per-window) values per series are held at once.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{pair_count, pairs, ClusterSpec, NetworkSystem, PairBoundSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGrid {
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub refine: usize,
}

impl WindowGrid {
    pub fn new(t0: f64, t1: f64, step: f64) -> Self {
        Self {
            t0,
            t1,
            step,
            refine: 10,
        }
    }

    pub fn with_refine(mut self, refine: usize) -> Self {
        self.refine = refine;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.t0.is_finite()
            && self.t1.is_finite()
            && self.step > 0.0
            && self.step <= 1.0
            && self.refine > 0
            && self.t1 - self.t0 >= 1.0
    }

    /// Number of fine samples per unit window.
    pub fn samples_per_window(&self) -> usize {
        ((self.refine as f64) / self.step).round().max(1.0) as usize
    }

    /// Uniform coarse grid `t0, t0 + step, ...` with `t1` appended.
    pub fn coarse_times(&self) -> Vec<f64> {
        let n = ((self.t1 - self.t0) / self.step + 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=n).map(|k| self.t0 + k as f64 * self.step).collect();
        if out.last().is_some_and(|&t| self.t1 - t > 1e-12) {
            out.push(self.t1);
        }
        out
    }
}

impl Default for WindowGrid {
    fn default() -> Self {
        Self::new(0.0, 10.0, 0.01)
    }
}

/// Sup over window starts of the unit-window integral of each of `n_series`
/// integrands. `f(t, out)` writes the integrand values at time `t`; they are
/// taken in absolute value. Returns `None` for an invalid grid (including a
/// horizon shorter than one window).
pub fn sliding_window_sup(
    grid: &WindowGrid,
    n_series: usize,
    mut f: impl FnMut(f64, &mut [f64]),
) -> Option<Vec<f64>> {
    if !grid.is_valid() {
        return None;
    }
    let w = grid.samples_per_window();
    let h = 1.0 / w as f64;
    let total = ((grid.t1 - grid.t0) * w as f64 + 1e-9).floor() as usize;
    let mut best = vec![0.0; n_series];
    if n_series == 0 {
        return Some(best);
    }
    // ring buffer of the last w + 1 samples, series-major per slot
    let slots = w + 1;
    let mut ring = vec![0.0; slots * n_series];
    let mut sums = vec![0.0; n_series];
    let mut vals = vec![0.0; n_series];
    for k in 0..=total {
        f(grid.t0 + k as f64 * h, &mut vals);
        let slot = k % slots;
        for s in 0..n_series {
            let v = vals[s].abs();
            if k >= slots {
                sums[s] -= ring[slot * n_series + s];
            }
            ring[slot * n_series + s] = v;
            sums[s] += v;
        }
        if k >= w {
            let first = (k - w) % slots;
            if k % w == 0 {
                // refresh the running sums to stop drift
                for s in 0..n_series {
                    sums[s] = (0..slots).map(|q| ring[q * n_series + s]).sum();
                }
            }
            for s in 0..n_series {
                let ends = ring[first * n_series + s] + ring[slot * n_series + s];
                let integral = h * (sums[s] - 0.5 * ends);
                if integral > best[s] {
                    best[s] = integral;
                }
            }
        }
    }
    Some(best)
}

/// `mu1 = sup_tau int |beta(s)| ds` with `beta = (2 beta_ij)` stacked over all pairs.
pub fn compute_mu1(bounds: &PairBoundSet, grid: &WindowGrid) -> Option<f64> {
    let all: Vec<(usize, usize)> = pairs(bounds.n_nodes()).collect();
    compute_mu1_on(bounds, &all, grid)
}

/// `mu1` restricted to the given pairs (the heterogeneity inside a cluster).
pub fn compute_mu1_on(
    bounds: &PairBoundSet,
    pair_list: &[(usize, usize)],
    grid: &WindowGrid,
) -> Option<f64> {
    let sup = sliding_window_sup(grid, 1, |t, out| {
        out[0] = pair_list
            .iter()
            .map(|&(i, j)| {
                let b = 2.0 * bounds.beta(i, j, t);
                b * b
            })
            .sum::<f64>()
            .sqrt();
    })?;
    Some(sup[0])
}

/// `mu2 = 2 rho^2 max_{i,j in J, k not in J} sup_tau int |c a_jk - c a_ik|`.
pub fn compute_mu2(
    system: &NetworkSystem,
    cluster: &ClusterSpec,
    rho: f64,
    grid: &WindowGrid,
) -> Option<f64> {
    let n = system.n_nodes();
    let inside = cluster.indices();
    let outside: Vec<usize> = (0..n).filter(|k| !cluster.contains(*k)).collect();
    if outside.is_empty() {
        return Some(0.0);
    }
    let cl_pairs: Vec<(usize, usize)> = pairs(inside.len())
        .map(|(a, b)| (inside[a], inside[b]))
        .collect();
    debug_assert_eq!(cl_pairs.len(), pair_count(inside.len()));
    let c = system.coupling();
    let mut scratch = crate::matrix::Matrix::square(n);
    let sched = system.schedule();
    let mut failed = false;
    let sups = sliding_window_sup(grid, cl_pairs.len() * outside.len(), |t, out| {
        match sched.sample_ref(t, &mut scratch) {
            Ok(a) => {
                for (p, &(i, j)) in cl_pairs.iter().enumerate() {
                    for (q, &k) in outside.iter().enumerate() {
                        out[p * outside.len() + q] = c * (a[(j, k)] - a[(i, k)]);
                    }
                }
            }
            Err(_) => {
                failed = true;
                out.fill(0.0);
            }
        }
    })?;
    if failed {
        return None;
    }
    Some(2.0 * rho * rho * sups.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::model::{AdjacencySchedule, NodeDynamics};
    use alloc::vec;
    use proptest::prelude::*;

    // independent oracle: midpoint rule on a very fine grid, windows started on
    // a coarse grid and refined around the best start
    fn oracle(g: impl Fn(f64) -> f64, t0: f64, t1: f64) -> f64 {
        let window = |tau: f64| {
            let m = 20_000;
            let h = 1.0 / m as f64;
            (0..m).map(|k| g(tau + (k as f64 + 0.5) * h).abs()).sum::<f64>() * h
        };
        let mut best = (f64::NEG_INFINITY, t0);
        let mut tau = t0;
        while tau <= t1 - 1.0 {
            let v = window(tau);
            if v > best.0 {
                best = (v, tau);
            }
            tau += 0.05;
        }
        let (mut lo, mut hi) = ((best.1 - 0.05).max(t0), (best.1 + 0.05).min(t1 - 1.0));
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if window(m1) < window(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        window(0.5 * (lo + hi)).max(best.0)
    }

    #[test]
    fn abs_sine_matches_oracle() {
        let grid = WindowGrid::new(0.0, 10.0, 0.01);
        let got = sliding_window_sup(&grid, 1, |t, o| o[0] = t.sin()).unwrap()[0];
        let want = oracle(f64::sin, 0.0, 10.0);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        // closed form: the best window is centred on a crest
        assert!((want - 2.0 * 0.5f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn constant_integrand() {
        let grid = WindowGrid::new(0.0, 3.0, 0.01);
        let got = sliding_window_sup(&grid, 2, |_, o| {
            o[0] = -2.5;
            o[1] = 0.0;
        })
        .unwrap();
        assert!((got[0] - 2.5).abs() < 1e-12);
        assert_eq!(got[1], 0.0);
    }

    #[test]
    fn short_horizon_rejected() {
        assert!(sliding_window_sup(&WindowGrid::new(0.0, 0.5, 0.01), 1, |_, o| o[0] = 1.0).is_none());
    }

    #[test]
    fn mu1_of_constant_beta_is_its_norm() {
        let b = PairBoundSet::new(3, 1.0, |_, _, _| 0.0, |_, _, _| 0.5, true).unwrap();
        let mu = compute_mu1(&b, &WindowGrid::new(0.0, 2.0, 0.01)).unwrap();
        // |(1, 1, 1)| = sqrt 3
        assert!((mu - 3f64.sqrt()).abs() < 1e-12);
        let zero = PairBoundSet::new(3, 1.0, |_, _, _| 0.0, |_, _, _| 0.0, true).unwrap();
        assert_eq!(compute_mu1(&zero, &WindowGrid::new(0.0, 2.0, 0.01)), Some(0.0));
    }

    fn system(a: Matrix) -> NetworkSystem {
        NetworkSystem::homogeneous(
            NodeDynamics::new(1, |_, _, o| o[0] = 0.0),
            AdjacencySchedule::constant(a).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn mu2_cases() {
        let grid = WindowGrid::new(0.0, 2.0, 0.01);
        let cl = ClusterSpec::new(vec![0, 1], 3).unwrap();
        // equal external columns
        let eq = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(compute_mu2(&system(eq), &cl, 1.5, &grid), Some(0.0));
        // difference d = 0.75 on the single external node
        let d = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.25], vec![1.0, 1.0, 0.0]])
            .unwrap();
        let mu2 = compute_mu2(&system(d), &cl, 1.5, &grid).unwrap();
        assert!((mu2 - 2.0 * 2.25 * 0.75).abs() < 1e-12);
        // no external edges at all
        let none = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        assert_eq!(compute_mu2(&system(none), &cl, 1.5, &grid), Some(0.0));
    }

    proptest! {
        #[test]
        fn sup_is_monotone(amp in 0.0f64..3.0, bump in 0.0f64..2.0, freq in 0.1f64..4.0) {
            let grid = WindowGrid::new(0.0, 4.0, 0.05);
            let lo = sliding_window_sup(&grid, 1, |t, o| o[0] = amp * (freq * t).sin()).unwrap()[0];
            let hi = sliding_window_sup(&grid, 1, |t, o| {
                o[0] = amp * (freq * t).sin().abs() + bump * (t * 0.3).cos().abs()
            }).unwrap()[0];
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
