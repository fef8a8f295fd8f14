//! The linear comparison system `u' = E(t) u + beta(t)` that dominates the
//! vector of squared pairwise errors, and its row-dominance decay check.
//!
//! Row `(i, j)` of `E(t)` carries `2 delta_ij(t)` on the diagonal and, for every
//! third node `k`, the positive parts `eta(c(a_jk - a_ik))` in column `(i, k)` and
//! `eta(c(a_ik - a_jk))` in column `(j, k)`. The coupling strength `c` is folded
//! into the weights everywhere.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::integrator::{solve, IntegrationError, NumericError, Solution, SolverConfig};
use crate::matrix::Matrix;
use crate::model::{pair_count, pair_index, pairs, ClusterSpec, ModelError, NetworkSystem, PairBoundSet};

#[inline]
pub fn eta(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `E(t)`, `delta(t)`, `gamma(t)` and the forcing `beta(t) = (2 beta_ij(t))`,
/// all indexed by the (cluster-local) lexicographic pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSample {
    pub e: Matrix,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ComparisonSample {
    fn zeros(dim: usize) -> Self {
        Self {
            e: Matrix::square(dim),
            delta: vec![0.0; dim],
            gamma: vec![0.0; dim],
            beta: vec![0.0; dim],
        }
    }

    /// Row-dominance margin `-E_pp - sum_{q != p} |E_pq|` of row `p`.
    pub fn row_margin(&self, p: usize) -> f64 {
        let row = self.e.row(p);
        let off: f64 = row
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != p)
            .map(|(_, v)| v.abs())
            .sum();
        -row[p] - off
    }
}

/// Comparison system of a network, optionally restricted to a cluster `J`.
///
/// For a cluster, rows run over pairs inside `J`; `delta_ij` keeps the full sum
/// over third nodes while the off-diagonal couplings (and hence `gamma_ij`)
/// only involve `k` in `J`. The contribution of the external nodes is bounded
/// separately through `mu2`.
#[derive(Debug, Clone)]
pub struct ComparisonSystem {
    system: NetworkSystem,
    bounds: PairBoundSet,
    members: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl ComparisonSystem {
    pub fn new(system: &NetworkSystem, bounds: &PairBoundSet) -> Result<Self, ModelError> {
        Self::for_cluster(system, bounds, &ClusterSpec::full(system.n_nodes()))
    }

    pub fn for_cluster(
        system: &NetworkSystem,
        bounds: &PairBoundSet,
        cluster: &ClusterSpec,
    ) -> Result<Self, ModelError> {
        if bounds.n_nodes() != system.n_nodes() {
            return Err(ModelError::NodeCount {
                nodes: bounds.n_nodes(),
                schedule: system.n_nodes(),
            });
        }
        if cluster.indices().iter().any(|&i| i >= system.n_nodes()) {
            return Err(ModelError::InvalidCluster("index out of range"));
        }
        let members = cluster.indices().to_vec();
        let pairs = pairs(members.len())
            .map(|(a, b)| (members[a], members[b]))
            .collect();
        Ok(Self {
            system: system.clone(),
            bounds: bounds.clone(),
            members,
            pairs,
        })
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Node pairs `(i, j)` (global indices) in row order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn system(&self) -> &NetworkSystem {
        &self.system
    }

    pub fn bounds(&self) -> &PairBoundSet {
        &self.bounds
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.system.n_nodes()
    }

    pub fn breakpoints_between(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.system.schedule().breakpoints_between(t0, t1)
    }

    pub fn sample(&self, t: f64) -> Result<ComparisonSample, ModelError> {
        let mut out = ComparisonSample::zeros(self.dim());
        let mut scratch = Matrix::square(self.system.n_nodes());
        self.sample_into(t, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Same as [`sample`](Self::sample) without allocating.
    pub fn sample_into(
        &self,
        t: f64,
        scratch: &mut Matrix,
        out: &mut ComparisonSample,
    ) -> Result<(), ModelError> {
        let n = self.system.n_nodes();
        let m = self.members.len();
        let c = self.system.coupling();
        let a = self.system.schedule().sample_ref(t, scratch)?;
        out.e.fill(0.0);
        // position of a global node inside the cluster
        let local = |g: usize| self.members.binary_search(&g).ok();
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let mut s = a[(i, j)] + a[(j, i)];
            for k in 0..n {
                if k != i && k != j {
                    s += 0.5 * (a[(j, k)] + a[(i, k)]);
                }
            }
            let delta = self.bounds.alpha(i, j, t) - c * s;
            let (li, lj) = (local(i).unwrap(), local(j).unwrap());
            let mut cross = 0.0;
            for (lk, &k) in self.members.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let d = c * (a[(j, k)] - a[(i, k)]);
                cross += d.abs();
                out.e[(p, pair_index(li.min(lk), li.max(lk), m))] += eta(d);
                out.e[(p, pair_index(lj.min(lk), lj.max(lk), m))] += eta(-d);
            }
            out.e[(p, p)] = 2.0 * delta;
            out.delta[p] = delta;
            out.gamma[p] = 2.0 * delta.abs() - cross;
            out.beta[p] = 2.0 * self.bounds.beta(i, j, t);
        }
        Ok(())
    }
}

/// One-shot evaluation of `(E(t), delta(t), gamma(t))` for the whole network.
pub fn evaluate_comparison(
    system: &NetworkSystem,
    bounds: &PairBoundSet,
    t: f64,
) -> Result<ComparisonSample, ModelError> {
    ComparisonSystem::new(system, bounds)?.sample(t)
}

/// Integrates `u' = E(t) u + beta(t)` from `u(t0) = xi0`.
pub fn comparison_solve(
    cs: &ComparisonSystem,
    t0: f64,
    xi0: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Solution, IntegrationError> {
    if xi0.len() != cs.dim() || xi0.iter().any(|&v| !(v >= 0.0)) {
        return Err(IntegrationError::InvalidInitialState {
            expected: cs.dim(),
            found: xi0.len(),
        });
    }
    let mut scratch = Matrix::square(cs.system.n_nodes());
    let mut sample = ComparisonSample::zeros(cs.dim());
    let breaks = cs.breakpoints_between(t0, t_end);
    solve(
        |t, u, du| {
            cs.sample_into(t, &mut scratch, &mut sample)?;
            sample.e.mul_vec(u, du);
            for (d, b) in du.iter_mut().zip(&sample.beta) {
                *d += b;
            }
            if du.iter().any(|v| !v.is_finite()) {
                return Err(NumericError::NonFinite { t, node: None });
            }
            Ok(())
        },
        t0,
        xi0,
        t_end,
        &breaks,
        cfg,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheck {
    /// Grid infimum over pairs of `gamma_ij(t)`.
    pub gamma_bar: f64,
    pub verified: bool,
    /// Largest observed `|U(t,s)|_inf / exp(-gamma_bar (t - s))`; `None` when
    /// no propagation was attempted.
    pub worst_ratio: Option<f64>,
    pub checked_pairs: usize,
}

pub const DECAY_TOL: f64 = 1e-6;

/// Grid infimum of the row-dominance margins and, when positive, a numerical
/// check of `|U(t,s)|_inf <= exp(-gamma_bar (t - s))` for the principal matrix
/// solution started from up to `n_starts` grid times.
pub fn dominance_decay_check(
    cs: &ComparisonSystem,
    grid: &[f64],
    n_starts: usize,
    cfg: &SolverConfig,
) -> Result<DecayCheck, ModelError> {
    let mut gamma_bar = f64::INFINITY;
    let mut scratch = Matrix::square(cs.system.n_nodes());
    let mut sample = ComparisonSample::zeros(cs.dim());
    for &t in grid {
        cs.sample_into(t, &mut scratch, &mut sample)?;
        for p in 0..cs.dim() {
            // gamma equals the row margin exactly when delta < 0; otherwise the
            // row is not dominant and the margin is what counts
            gamma_bar = gamma_bar.min(sample.gamma[p].min(sample.row_margin(p)));
        }
    }
    let mut out = DecayCheck {
        gamma_bar,
        verified: false,
        worst_ratio: None,
        checked_pairs: 0,
    };
    if grid.len() < 2 || !(gamma_bar > 0.0) || gamma_bar == f64::INFINITY {
        return Ok(out);
    }
    let dim = cs.dim();
    let t_last = grid[grid.len() - 1];
    let starts = n_starts.max(1).min(grid.len() - 1);
    let mut worst: f64 = 0.0;
    for q in 0..starts {
        let s = grid[q * (grid.len() - 1) / starts];
        if s >= t_last {
            continue;
        }
        let mut u0 = vec![0.0; dim * dim];
        for p in 0..dim {
            u0[p * dim + p] = 1.0;
        }
        let breaks = cs.breakpoints_between(s, t_last);
        let sol = solve(
            |t, u, du| {
                cs.sample_into(t, &mut scratch, &mut sample)?;
                // dU/dt = E U, U stored row-major
                for r in 0..dim {
                    let erow = sample.e.row(r);
                    let out_row = &mut du[r * dim..(r + 1) * dim];
                    out_row.fill(0.0);
                    for (k, &ek) in erow.iter().enumerate() {
                        if ek != 0.0 {
                            for (o, x) in out_row.iter_mut().zip(&u[k * dim..(k + 1) * dim]) {
                                *o += ek * x;
                            }
                        }
                    }
                }
                Ok(())
            },
            s,
            &u0,
            t_last,
            &breaks,
            cfg,
        );
        let sol = match sol {
            Ok(sol) => sol,
            Err(_) => return Ok(out),
        };
        for (t, u) in sol.iter() {
            let norm = (0..dim)
                .map(|r| u[r * dim..(r + 1) * dim].iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            let ratio = norm / (-gamma_bar * (t - s)).exp();
            worst = worst.max(ratio);
            out.checked_pairs += 1;
        }
    }
    out.worst_ratio = Some(worst);
    out.verified = worst <= 1.0 + DECAY_TOL;
    Ok(out)
}

/// Dimension of the comparison system of an `n`-node network.
pub fn comparison_dim(n: usize) -> usize {
    pair_count(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pair_bounds_for_identical_nodes, AdjacencySchedule, NodeDynamics};
    use alloc::vec;

    fn net(rows: &[Vec<f64>], c: f64) -> NetworkSystem {
        NetworkSystem::homogeneous(
            NodeDynamics::new(1, |_, _, o| o[0] = 0.0),
            AdjacencySchedule::constant(Matrix::from_rows(rows).unwrap()).unwrap(),
            c,
        )
        .unwrap()
    }

    #[test]
    fn two_nodes() {
        let sys = net(&[vec![0.0, 0.7], vec![1.3, 0.0]], 1.0);
        let b = pair_bounds_for_identical_nodes(2, 1.0, |_, _| 0.5).unwrap();
        let s = evaluate_comparison(&sys, &b, 0.0).unwrap();
        assert_eq!(s.delta, vec![0.5 - 2.0]);
        assert_eq!(s.gamma, vec![3.0]);
        assert_eq!(s.e.as_slice(), &[-3.0]);
    }

    #[test]
    fn complete_graph_three() {
        let ones = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let b = pair_bounds_for_identical_nodes(3, 1.0, |_, _| 1.0).unwrap();
        let s = evaluate_comparison(&net(&ones, 1.0), &b, 0.0).unwrap();
        assert_eq!(s.delta, vec![-2.0; 3]);
        assert_eq!(s.gamma, vec![4.0; 3]);
        for p in 0..3 {
            for q in 0..3 {
                assert_eq!(s.e[(p, q)], if p == q { -4.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn entries_by_hand() {
        // a_02 = 2, a_12 = 0.5: row (0,1) gets eta(0.5-2)=0 at (0,2) and eta(1.5) at (1,2)
        let rows = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.5], vec![0.0, -1.0, 0.0]];
        let b = pair_bounds_for_identical_nodes(3, 1.0, |_, _| 0.0).unwrap();
        let s = evaluate_comparison(&net(&rows, 2.0), &b, 0.0).unwrap();
        // delta_01 = -2 (1 + 1 + (2 + 0.5)/2)
        assert_eq!(s.delta[0], -6.5);
        assert_eq!(s.e[(0, 1)], 0.0);
        assert_eq!(s.e[(0, 2)], 3.0);
        assert_eq!(s.gamma[0], 13.0 - 3.0);
        // row (0,2), third node 1: d = 2 (a_21 - a_01) = -4 -> column (1,2) gets 4
        assert_eq!(s.e[(1, 0)], 0.0);
        assert_eq!(s.e[(1, 2)], 4.0);
        for p in 0..3 {
            for q in 0..3 {
                if p != q {
                    assert!(s.e[(p, q)] >= 0.0);
                }
            }
            if s.delta[p] < 0.0 {
                assert!((s.row_margin(p) - s.gamma[p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_closed_form() {
        let sys = net(&[vec![0.0, 1.0], vec![0.0, 0.0]], 1.0);
        let b = pair_bounds_for_identical_nodes(2, 1.0, |_, _| 0.0).unwrap();
        let cs = ComparisonSystem::new(&sys, &b).unwrap();
        let sol = comparison_solve(&cs, 0.0, &[1.0], 2.0, &SolverConfig::rk4(1e-3)).unwrap();
        for (t, u) in sol.iter() {
            assert!((u[0] - (-2.0 * t).exp()).abs() < 1e-12);
        }
        let zero = comparison_solve(&cs, 0.0, &[0.0], 2.0, &SolverConfig::rk4(1e-2)).unwrap();
        assert!(zero.iter().all(|(_, u)| u[0] == 0.0));
    }

    #[test]
    fn scalar_decay_is_exact() {
        // delta = -1/2: gamma_bar = 1 and |U(t,s)| = exp(-(t-s))
        let sys = net(&[vec![0.0, 0.25], vec![0.25, 0.0]], 1.0);
        let b = pair_bounds_for_identical_nodes(2, 1.0, |_, _| 0.0).unwrap();
        let cs = ComparisonSystem::new(&sys, &b).unwrap();
        let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let d = dominance_decay_check(&cs, &grid, 3, &SolverConfig::rk4(1e-3)).unwrap();
        assert_eq!(d.gamma_bar, 1.0);
        assert!(d.verified);
        assert!((d.worst_ratio.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_dominant_is_not_verified() {
        // delta_01 = -0.5 but the cross term 4 exceeds 2|delta|
        let rows = vec![vec![0.0, 0.0, -2.0], vec![0.0, 0.0, 2.0], vec![0.0, 0.0, 0.0]];
        let b = pair_bounds_for_identical_nodes(3, 1.0, |_, _| -0.5).unwrap();
        let cs = ComparisonSystem::new(&net(&rows, 1.0), &b).unwrap();
        let d = dominance_decay_check(&cs, &[0.0, 1.0], 2, &SolverConfig::rk4(1e-2)).unwrap();
        assert!(d.gamma_bar < 0.0);
        assert!(!d.verified);
    }

    #[test]
    fn cluster_keeps_full_delta() {
        let rows = vec![
            vec![0.0, 1.0, 1.0, 4.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ];
        let sys = net(&rows, 1.0);
        let b = pair_bounds_for_identical_nodes(4, 1.0, |_, _| 0.0).unwrap();
        let full = ComparisonSystem::new(&sys, &b).unwrap().sample(0.0).unwrap();
        let cl = ClusterSpec::new(vec![0, 1, 2], 4).unwrap();
        let part = ComparisonSystem::for_cluster(&sys, &b, &cl).unwrap().sample(0.0).unwrap();
        assert_eq!(part.delta.len(), 3);
        // pairs (0,1), (0,2), (1,2) keep their deltas
        assert_eq!(part.delta, vec![full.delta[0], full.delta[1], full.delta[3]]);
        // the external column difference a_03 - a_13 = 4 no longer enters gamma
        assert!(part.gamma[0] > full.gamma[0]);
    }
}
