//! The four example networks as reproducible runs, plus the closed-form ring
//! table and the star feasibility algebra.

mod fhn;
mod ring;
mod star;
mod vdp;

pub use fhn::{fhn_bounds, run_fhn_clusters, FhnParams};
pub use ring::{
    ring_derived_table, ring_network, ring_symbolic_certificate, run_ring_contrarian, RingParams,
    RingTable,
};
pub use star::{
    lorenz_node, lorenz_onesided_rate, run_lorenz_star, star_adjacency, star_feasibility, LorenzStarParams,
    StarCase, StarFeasibility, StarWeights,
};
pub use vdp::{run_vdp, vdp_bounds, VdpParams};

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::Serialize;
use serde_json::Value;
use tempsync_core::{
    integrate, pairwise_errors, CertError, ErrorSeries, IntegrationError, Matrix, ModelError,
    NetworkSystem, SolverConfig, Trajectory,
};
use thiserror::Error;

use crate::io::{self, IoError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Summary statistics recomputable from the exported error CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Start of the tail window.
    pub tail_start: f64,
    pub tail_max_e_hat: f64,
    pub tail_mean_e_hat: f64,
    pub tail_max_xi: f64,
    /// First recorded time after which `e_hat` stays below `settle_tol`.
    pub settle_time: Option<f64>,
    pub settle_tol: f64,
}

impl Metrics {
    pub fn from_errors(err: &ErrorSeries, tail_fraction: f64, settle_tol: f64) -> Self {
        let (t0, t1) = (err.times[0], err.times[err.len() - 1]);
        let tail_start = t1 - tail_fraction * (t1 - t0);
        let mut max_e: f64 = 0.0;
        let mut sum_e = 0.0;
        let mut cnt = 0usize;
        let mut max_xi: f64 = 0.0;
        for k in (0..err.len()).filter(|&k| err.times[k] >= tail_start) {
            max_e = max_e.max(err.e_hat[k]);
            sum_e += err.e_hat[k];
            cnt += 1;
            max_xi = max_xi.max(err.max_xi(k));
        }
        let settle_time = match (0..err.len()).rev().find(|&k| !(err.e_hat[k] <= settle_tol)) {
            None => Some(err.times[0]),
            Some(k) if k + 1 < err.len() => Some(err.times[k + 1]),
            Some(_) => None,
        };
        Self {
            tail_start,
            tail_max_e_hat: max_e,
            tail_mean_e_hat: sum_e / cnt.max(1) as f64,
            tail_max_xi: max_xi,
            settle_time,
            settle_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub name: String,
    pub passed: bool,
}

/// Outcome of one scenario run. The trajectory and error series travel with
/// the report but are only written by [`RunReport::write_outputs`].
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub params: Value,
    pub metrics: Metrics,
    pub predicate: Predicate,
    pub details: Value,
    pub certificate: Option<Value>,
    pub paths: BTreeMap<String, String>,
    #[serde(skip)]
    pub trajectory: Trajectory,
    #[serde(skip)]
    pub errors: ErrorSeries,
}

impl RunReport {
    /// Writes `trajectory.csv`, `errors.csv`, `certificate.json` (when present)
    /// and `report.json` into `dir`. Paths in the report are relative to `dir`.
    pub fn write_outputs(&mut self, dir: &Path) -> Result<(), IoError> {
        std::fs::create_dir_all(dir).map_err(|err| IoError::File {
            path: dir.to_path_buf(),
            err,
        })?;
        io::write_trajectory_csv(&dir.join("trajectory.csv"), &self.trajectory)?;
        io::write_error_csv(&dir.join("errors.csv"), &self.errors)?;
        self.paths.insert("trajectory".into(), "trajectory.csv".into());
        self.paths.insert("errors".into(), "errors.csv".into());
        if let Some(c) = &self.certificate {
            io::write_json(&dir.join("certificate.json"), c)?;
            self.paths.insert("certificate".into(), "certificate.json".into());
        }
        self.paths.insert("report".into(), "report.json".into());
        io::write_json(&dir.join("report.json"), self)
    }
}

/// Integrates with RK4 at step `dt`, recording roughly every `record_every`.
pub(crate) fn simulate(
    system: &NetworkSystem,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    record_every: f64,
) -> Result<(Trajectory, ErrorSeries), ScenarioError> {
    if !(dt > 0.0 && record_every >= dt && t_end > 0.0) {
        return Err(ScenarioError::Invalid(format!(
            "need 0 < dt <= record_every and t_end > 0 (dt={dt}, record_every={record_every}, t_end={t_end})"
        )));
    }
    let stride = (record_every / dt).round().max(1.0) as usize;
    let cfg = SolverConfig::rk4(dt).with_stride(stride);
    let traj = integrate(system, 0.0, x0, t_end, &cfg)?;
    let err = pairwise_errors(&traj);
    Ok((traj, err))
}

/// `1.5` times the largest node norm seen along the trajectory.
pub fn estimate_rho(traj: &Trajectory) -> f64 {
    let mut r: f64 = 0.0;
    for k in 0..traj.len() {
        for i in 0..traj.n_nodes() {
            r = r.max(traj.node_state(k, i).iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    1.5 * r.max(1e-12)
}

/// Random directed 0/1 graph whose underlying undirected graph is connected.
pub(crate) fn random_connected_digraph(rng: &mut impl Rng, n: usize, density: f64) -> Matrix {
    loop {
        let a = Matrix::from_fn(n, n, |i, j| if i != j && rng.gen_bool(density) { 1.0 } else { 0.0 });
        if weakly_connected(&a) {
            return a;
        }
    }
}

pub(crate) fn weakly_connected(a: &Matrix) -> bool {
    let n = a.rows();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Spread `sqrt(sum_components (max - min)^2)` over the given nodes at sample `k`.
pub fn cluster_spread(traj: &Trajectory, k: usize, nodes: &[usize]) -> f64 {
    let m = traj.state_dim();
    let mut s = 0.0;
    for d in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in nodes {
            let v = traj.node_state(k, i)[d];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        s += (hi - lo) * (hi - lo);
    }
    s.sqrt()
}

pub(crate) fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn connectivity() {
        let path = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(weakly_connected(&path));
        let split = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(!weakly_connected(&split));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_connected_digraph(&mut rng, 6, 0.2);
            assert!(weakly_connected(&a));
            assert!((0..6).all(|i| a[(i, i)] == 0.0));
        }
    }
}
