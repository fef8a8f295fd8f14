//! Consensus on a 2-nearest-neighbour ring with one contrarian node.
//!
//! Node 1 (index 0) pushes its four neighbours away with weight `-a` (or the
//! oscillating `-1/2 + 1/2 sin(w_i t)`), listens only to node 2 with the
//! compensation weight `a12`, and every other ring edge has weight 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tempsync_core::{
    check_full_sync, pair_bounds_for_identical_nodes, AdjacencySchedule, CertParams, Extension, Matrix,
    NetworkSystem, NodeDynamics, Piece, WindowGrid,
};

use super::{simulate, Metrics, Predicate, RunReport, ScenarioError};
use crate::io::certificate_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RingParams {
    pub n_nodes: usize,
    /// Contrarian magnitude (constant weights only).
    pub a: f64,
    pub a12: f64,
    pub time_varying: bool,
    pub omega_min: f64,
    pub omega_max: f64,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: f64,
    pub tail_fraction: f64,
    /// Consensus threshold on the tail max of `|x_i - x_j|`.
    pub sync_tol: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        Self {
            n_nodes: 10,
            a: 0.5,
            a12: 1.0,
            time_varying: true,
            omega_min: 0.5,
            omega_max: 1.5,
            seed: 0,
            horizon: 40.0,
            dt: 1e-3,
            record_every: 0.01,
            tail_fraction: 0.25,
            sync_tol: 1e-6,
        }
    }
}

fn contrarians(n: usize) -> [usize; 4] {
    [1, 2, n - 2, n - 1]
}

fn base_matrix(n: usize, a12: f64) -> Matrix {
    let mut m = Matrix::square(n);
    for i in 1..n {
        for s in [1, 2] {
            m[(i, (i + s) % n)] = 1.0;
            m[(i, (i + n - s) % n)] = 1.0;
        }
    }
    m[(0, 1)] = a12;
    m
}

/// The ring as a network of scalar consensus nodes (`f = 0`, `c = 1`). With
/// `omegas` the contrarian weight of node `contrarians[k]` is
/// `-1/2 + 1/2 sin(omegas[k] t)`, otherwise it is `-a`.
pub fn ring_network(n: usize, a: f64, a12: f64, omegas: Option<[f64; 4]>) -> Result<NetworkSystem, ScenarioError> {
    if n < 5 {
        return Err(ScenarioError::Invalid(format!("ring needs at least 5 nodes, got {n}")));
    }
    let mut base = base_matrix(n, a12);
    let cons = contrarians(n);
    let schedule = match omegas {
        None => {
            for i in cons {
                base[(i, 0)] = -a;
            }
            AdjacencySchedule::constant(base)?
        }
        Some(w) => {
            let piece = Piece::function(move |t, m| {
                m.as_mut_slice().copy_from_slice(base.as_slice());
                for (k, &i) in cons.iter().enumerate() {
                    m[(i, 0)] = -0.5 + 0.5 * (w[k] * t).sin();
                }
            });
            AdjacencySchedule::new(n, vec![0.0], vec![piece], Extension::Constant)?
        }
    };
    Ok(NetworkSystem::homogeneous(NodeDynamics::new(1, |_, _, o| o[0] = 0.0), schedule, 1.0)?)
}

/// Closed-form entries of the constant-weight ring, 1-based pair labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingTable {
    pub delta12: f64,
    pub delta13: f64,
    pub delta23: f64,
    pub gamma12: f64,
    pub gamma13: f64,
    pub gamma23: f64,
}

/// The table as printed with the example.
pub fn ring_symbolic_certificate(a: f64, a12: f64, _n: usize) -> RingTable {
    RingTable {
        delta12: -(a12 + 1.5 - a),
        delta13: -(a12 / 2.0 + 1.5 - a),
        delta23: -(2.5 - a),
        gamma12: 2.0 * (a12 + 1.5 - a).abs() - 3.0,
        gamma13: 2.0 * (a12 / 2.0 + 1.5 - a).abs() - (1.0 - a12).abs() - 2.0,
        gamma23: 2.0 * (2.5 - a).abs() - 2.0,
    }
}

/// The same entries worked out from the ring topology itself. Nodes 2 and 3
/// are joined both ways and each has two further conformist neighbours, so
/// pair (2,3) picks up `1 + 1 + (2 - a)` instead of `5/2 - a`.
pub fn ring_derived_table(a: f64, a12: f64) -> RingTable {
    RingTable {
        delta23: -(4.0 - a),
        gamma23: 2.0 * (4.0 - a).abs() - 2.0,
        ..ring_symbolic_certificate(a, a12, 0)
    }
}

/// Simulates the ring and certifies it on `[0, horizon]`.
pub fn run_ring_contrarian(p: &RingParams) -> Result<RunReport, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let omegas = p.time_varying.then(|| {
        let mut w = [0.0; 4];
        for v in &mut w {
            *v = rng.gen_range(p.omega_min..p.omega_max);
        }
        w
    });
    let system = ring_network(p.n_nodes, p.a, p.a12, omegas)?;
    let x0: Vec<f64> = (0..p.n_nodes).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (traj, errors) = simulate(&system, &x0, p.horizon, p.dt, p.record_every)?;
    let metrics = Metrics::from_errors(&errors, p.tail_fraction, p.sync_tol);
    // scalar nodes: e_hat is the largest |x_i - x_j|
    let passed = metrics.tail_max_e_hat < p.sync_tol;

    let bounds = pair_bounds_for_identical_nodes(p.n_nodes, 1.0, |_, _| 0.0)?;
    let grid = WindowGrid::new(0.0, p.horizon.max(1.0), 0.01);
    let cert = check_full_sync(&system, &bounds, &CertParams::new(grid, 1e-6, 1e-6))?;

    Ok(RunReport {
        scenario: "ring".into(),
        seed: p.seed,
        params: serde_json::to_value(p).unwrap(),
        metrics,
        predicate: Predicate {
            name: format!("tail max |x_i - x_j| < {}", p.sync_tol),
            passed,
        },
        details: json!({
            "omegas": omegas,
            "symbolic": ring_symbolic_certificate(p.a, p.a12, p.n_nodes),
        }),
        certificate: Some(certificate_json(&cert)),
        paths: Default::default(),
        trajectory: traj,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempsync_core::{evaluate_comparison, pair_index};

    #[test]
    fn topology() {
        let s = ring_network(7, 0.3, 2.0, None).unwrap();
        let a = s.schedule().sample(0.0).unwrap();
        assert_eq!(a.row(0), &[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.row(1), &[-0.3, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(a.row(3), &[0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(a[(6, 0)], -0.3);
        assert_eq!(a[(5, 0)], -0.3);
    }

    #[test]
    fn oscillating_weights_follow_formula() {
        let w = [0.7, 1.1, 1.3, 0.9];
        let s = ring_network(10, 0.0, 1.0, Some(w)).unwrap();
        for t in [0.0, 0.37, 5.2] {
            let a = s.schedule().sample(t).unwrap();
            for (k, i) in [1, 2, 8, 9].into_iter().enumerate() {
                assert_eq!(a[(i, 0)], -0.5 + 0.5 * (w[k] * t).sin());
            }
            assert_eq!(a[(4, 5)], 1.0);
        }
    }

    #[test]
    fn derived_table_matches_numerics() {
        // independent of the printed table: the comparison entries on the built ring
        for (a, a12) in [(0.5, 1.0), (0.2, 3.0), (1.7, 0.1)] {
            let sys = ring_network(10, a, a12, None).unwrap();
            let b = pair_bounds_for_identical_nodes(10, 1.0, |_, _| 0.0).unwrap();
            let s = evaluate_comparison(&sys, &b, 0.0).unwrap();
            let d = ring_derived_table(a, a12);
            let at = |i: usize, j: usize| pair_index(i - 1, j - 1, 10);
            assert!((s.delta[at(1, 2)] - d.delta12).abs() < 1e-12);
            assert!((s.delta[at(1, 3)] - d.delta13).abs() < 1e-12);
            assert!((s.delta[at(2, 3)] - d.delta23).abs() < 1e-12);
            assert!((s.gamma[at(1, 2)] - d.gamma12).abs() < 1e-12);
            assert!((s.gamma[at(1, 3)] - d.gamma13).abs() < 1e-12);
            assert!((s.gamma[at(2, 3)] - d.gamma23).abs() < 1e-12);
            // pair (1, N-1) does not see node 2, so it loses a12 in gamma
            let g = 2.0 * (a12 / 2.0 + 1.5 - a).abs() - 3.0 - a12;
            assert!((s.gamma[at(1, 9)] - g).abs() < 1e-12);
        }
    }
}
