//! Star networks: the feasibility algebra of the static coupling threshold and
//! the Lorenz star run.
//!
//! The hub is node 1 (index 0). Leaves listen to the hub with weight `a`, the
//! hub listens to every leaf with weight `b`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tempsync_core::{
    build_switching_schedule, static_threshold, AdjacencySchedule, Extension, Matrix, NetworkSystem,
    NodeDynamics, Piece,
};

use super::{cluster_spread, estimate_rho, mean, simulate, Metrics, Predicate, RunReport, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarCase {
    /// `b < 0` and `a > -b (N - 1)`.
    FeasibleA,
    /// `b >= 0` and `a > -b`.
    FeasibleB,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarFeasibility {
    pub case: StarCase,
    /// `2(b + a) + (N - 2)(b - |b|)`, the hub-leaf value of the static hypothesis.
    pub hub_leaf: f64,
    /// Leaf-leaf value `2a`.
    pub leaf_leaf: f64,
}

impl StarFeasibility {
    pub fn feasible(&self) -> bool {
        self.case != StarCase::Infeasible
    }
}

pub fn star_adjacency(n: usize, a: f64, b: f64) -> Matrix {
    Matrix::from_fn(n, n, |i, j| match (i, j) {
        (0, 0) => 0.0,
        (0, _) => b,
        (_, 0) => a,
        _ => 0.0,
    })
}

/// Case analysis of the static hypothesis for a star of `n` nodes.
pub fn star_feasibility(a: f64, b: f64, n: usize) -> StarFeasibility {
    let nn = n as f64;
    let hub_leaf = 2.0 * (b + a) + (nn - 2.0) * (b - b.abs());
    let leaf_leaf = 2.0 * a;
    let case = if !(a > 0.0) {
        StarCase::Infeasible
    } else if b < 0.0 {
        if a > -b * (nn - 1.0) {
            StarCase::FeasibleA
        } else {
            StarCase::Infeasible
        }
    } else if a > -b {
        StarCase::FeasibleB
    } else {
        StarCase::Infeasible
    };
    StarFeasibility {
        case,
        hub_leaf,
        leaf_leaf,
    }
}

pub const LORENZ: (f64, f64, f64) = (10.0, 28.0, 8.0 / 3.0);

pub fn lorenz_node(sigma: f64, rho: f64, beta: f64) -> NodeDynamics {
    NodeDynamics::new(3, move |_, x, o| {
        o[0] = sigma * (x[1] - x[0]);
        o[1] = x[0] * (rho - x[2]) - x[1];
        o[2] = x[0] * x[1] - beta * x[2];
    })
}

/// One-sided Lipschitz rate of the Lorenz field on the ball of radius `r`:
/// Gershgorin bound on the symmetric part of the Jacobian.
pub fn lorenz_onesided_rate(sigma: f64, rho: f64, beta: f64, r: f64) -> f64 {
    let s = (sigma + rho).abs();
    let row1 = -sigma + 0.5 * (s + r) + 0.5 * r;
    let row2 = -1.0 + 0.5 * (s + r);
    let row3 = -beta + 0.5 * r;
    row1.max(row2).max(row3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarWeights {
    /// Leaves listen to the hub with the constant weight `a`.
    Constant,
    /// `a(t) = 4 + 3 tanh((t - 10) / 5)`.
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LorenzStarParams {
    pub n_nodes: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Coupling is off before this time.
    pub switch_on: f64,
    pub weights: StarWeights,
    /// Relative amplitude of the `sin(w_ij t)` perturbation of every weight.
    pub perturb: f64,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: f64,
    pub tail_fraction: f64,
    /// Initial states are uniform in `[-ic_scale, ic_scale]^3`.
    pub ic_scale: f64,
    /// Required drop of the mean `e_hat` from the uncoupled phase to the second half.
    pub drop_factor: f64,
}

impl Default for LorenzStarParams {
    fn default() -> Self {
        Self {
            n_nodes: 5,
            a: 5.0,
            b: -1.0,
            c: 2.0,
            switch_on: 10.0,
            weights: StarWeights::Constant,
            perturb: 0.0,
            seed: 0,
            horizon: 60.0,
            dt: 1e-3,
            record_every: 0.01,
            tail_fraction: 0.25,
            ic_scale: 1.0,
            drop_factor: 1e-2,
        }
    }
}

fn star_schedule(p: &LorenzStarParams, rng: &mut ChaCha8Rng) -> Result<AdjacencySchedule, ScenarioError> {
    let n = p.n_nodes;
    let omegas = Matrix::from_fn(n, n, |_, _| rng.gen_range(PI..2.0 * PI));
    let (a, b, eps, kind) = (p.a, p.b, p.perturb, p.weights);
    let piece = Piece::function(move |t, m| {
        let hub = match kind {
            StarWeights::Constant => a,
            StarWeights::Tanh => 4.0 + 3.0 * ((t - 10.0) / 5.0).tanh(),
        };
        for k in 1..n {
            m[(k, 0)] = hub * (1.0 + eps * (omegas[(k, 0)] * t).sin());
            m[(0, k)] = b * (1.0 + eps * (omegas[(0, k)] * t).sin());
        }
    });
    if p.switch_on > 0.0 {
        let off = build_switching_schedule(n, vec![(0.0, Matrix::square(n))], Extension::Constant)?;
        let mut pieces = off.pieces().to_vec();
        pieces.push(piece);
        Ok(AdjacencySchedule::new(n, vec![0.0, p.switch_on], pieces, Extension::Constant)?)
    } else {
        Ok(AdjacencySchedule::new(n, vec![0.0], vec![piece], Extension::Constant)?)
    }
}

/// Star of identical Lorenz nodes, coupled from `switch_on` on.
pub fn run_lorenz_star(p: &LorenzStarParams) -> Result<RunReport, ScenarioError> {
    if p.n_nodes < 3 {
        return Err(ScenarioError::Invalid(format!("star needs at least 3 nodes, got {}", p.n_nodes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let schedule = star_schedule(p, &mut rng)?;
    let (s, r, b) = LORENZ;
    let system = NetworkSystem::homogeneous(lorenz_node(s, r, b), schedule, p.c)?;
    let x0: Vec<f64> = (0..3 * p.n_nodes).map(|_| rng.gen_range(-p.ic_scale..p.ic_scale)).collect();
    let (traj, errors) = simulate(&system, &x0, p.horizon, p.dt, p.record_every)?;
    let metrics = Metrics::from_errors(&errors, p.tail_fraction, 1e-6);

    let early_end = if p.switch_on > 0.0 { p.switch_on } else { 10.0f64.min(p.horizon / 2.0) };
    let late_start = p.horizon / 2.0;
    let window_mean = |lo: f64, hi: f64| {
        mean((0..errors.len()).filter(|&k| errors.times[k] >= lo && errors.times[k] <= hi).map(|k| errors.e_hat[k]))
    };
    let early = window_mean(0.0, early_end);
    let late = window_mean(late_start, p.horizon);
    let leaves: Vec<usize> = (1..p.n_nodes).collect();
    let leaf_late = mean(
        (0..traj.len())
            .filter(|&k| traj.times()[k] >= late_start)
            .map(|k| cluster_spread(&traj, k, &leaves)),
    );

    let rho = estimate_rho(&traj);
    let l = lorenz_onesided_rate(s, r, b, rho);
    let feas = star_feasibility(p.a, p.b, p.n_nodes);
    let threshold = static_threshold(&star_adjacency(p.n_nodes, p.a, p.b), l).ok();

    Ok(RunReport {
        scenario: "lorenz-star".into(),
        seed: p.seed,
        params: serde_json::to_value(p).unwrap(),
        metrics,
        predicate: Predicate {
            name: format!("mean e_hat on [{late_start}, {}] <= {} x mean e_hat on [0, {early_end}]", p.horizon, p.drop_factor),
            passed: late <= p.drop_factor * early,
        },
        details: json!({
            "early_mean_e_hat": early,
            "late_mean_e_hat": late,
            "late_mean_leaf_spread": leaf_late,
            "rho_estimate": rho,
            "onesided_rate": l,
            "feasibility": feas,
            "static_threshold": threshold,
        }),
        certificate: None,
        paths: Default::default(),
        trajectory: traj,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempsync_core::static_hypothesis;

    #[test]
    fn feasibility_cases() {
        assert_eq!(star_feasibility(5.0, -1.0, 5).case, StarCase::FeasibleA);
        assert_eq!(star_feasibility(3.0, -1.0, 5).case, StarCase::Infeasible);
        assert_eq!(star_feasibility(4.0, -1.0, 5).case, StarCase::Infeasible);
        assert_eq!(star_feasibility(0.5, 0.0, 5).case, StarCase::FeasibleB);
        assert_eq!(star_feasibility(0.0, 2.0, 5).case, StarCase::Infeasible);
        // hub-leaf value at the boundary a = -b (N - 1)
        assert_eq!(star_feasibility(4.0, -1.0, 5).hub_leaf, 0.0);
    }

    #[test]
    fn hub_leaf_value_matches_hypothesis() {
        for (a, b) in [(5.0, -1.0), (0.3, 2.0), (1.0, -0.1)] {
            let h = static_hypothesis(&star_adjacency(6, a, b));
            let f = star_feasibility(a, b, 6);
            assert!((h[0].1 - f.hub_leaf).abs() < 1e-12);
            // pair (2, 3) is leaf-leaf
            assert!((h[5].1 - f.leaf_leaf).abs() < 1e-12);
        }
    }

    #[test]
    fn lorenz_rate_bounds_the_jacobian() {
        // the symmetric Jacobian part at a few points of the ball never exceeds the rate
        let (s, r, b) = LORENZ;
        let rad = 30.0;
        let l = lorenz_onesided_rate(s, r, b, rad);
        for p in [[0.0, 0.0, 0.0], [rad, 0.0, 0.0], [0.0, 0.0, -rad], [0.0, rad, 0.0], [17.0, -17.0, 17.0]] {
            let (x, y, z) = (p[0], p[1], p[2]);
            let j = [[-s, s, 0.0], [r - z, -1.0, -x], [y, x, -b]];
            // largest eigenvalue of the symmetric Jacobian part, by sphere search
            let mut best = f64::NEG_INFINITY;
            for th in 0..60 {
                for ph in 0..120 {
                    let (t, f) = (th as f64 * PI / 59.0, ph as f64 * 2.0 * PI / 120.0);
                    let v = [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()];
                    let mut q = 0.0;
                    for i in 0..3 {
                        for k in 0..3 {
                            q += v[i] * j[i][k] * v[k];
                        }
                    }
                    best = best.max(q);
                }
            }
            assert!(best <= l, "{best} > {l}");
        }
    }
}
