//! One-step integrators for the coupled network and for auxiliary linear
//! systems, plus extraction of pairwise synchronization errors.
//!
//! Weights are only locally integrable in time, so the integration grid is split
//! exactly at every schedule breakpoint: no step ever straddles a switch of
//! `A(t)`, and each segment restarts the one-step method.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{pair_count, pairs, ModelError, NetworkSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with (at most) step `dt`.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with embedded error control.
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Keep every `record_stride`-th accepted step (the final state is always kept).
    pub record_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::rk4(1e-3)
    }
}

impl SolverConfig {
    pub fn rk4(dt: f64) -> Self {
        Self {
            method: Method::Rk4 { dt },
            record_stride: 1,
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45 { rtol, atol },
            record_stride: 1,
        }
    }

    pub fn adaptive() -> Self {
        Self::rk45(1e-6, 1e-9)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrationError> {
        if self.record_stride == 0 {
            return Err(IntegrationError::InvalidConfig("record_stride must be positive"));
        }
        match self.method {
            Method::Rk4 { dt } if !(dt.is_finite() && dt > 0.0) => {
                Err(IntegrationError::InvalidConfig("dt must be positive"))
            }
            Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                Err(IntegrationError::InvalidConfig("rtol and atol must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// FNV-1a digest of the configuration, recorded as trajectory provenance.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        match self.method {
            Method::Rk4 { dt } => {
                feed(b"rk4");
                feed(&dt.to_bits().to_le_bytes());
            }
            Method::Rk45 { rtol, atol } => {
                feed(b"rk45");
                feed(&rtol.to_bits().to_le_bytes());
                feed(&atol.to_bits().to_le_bytes());
            }
        }
        feed(&(self.record_stride as u64).to_le_bytes());
        h
    }
}

/// Failure reported by a right-hand side evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("non-finite vector field output at t = {t} (node {node:?})")]
    NonFinite { t: f64, node: Option<usize> },
    #[error(transparent)]
    Schedule(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("integration span [{t0}, {t_end}] is empty or not finite")]
    InvalidSpan { t0: f64, t_end: f64 },
    #[error("initial state has {found} entries, expected {expected}, or is not finite")]
    InvalidInitialState { expected: usize, found: usize },
    #[error("{source} (last valid time {last_valid_time})")]
    Numeric {
        source: NumericError,
        last_valid_time: f64,
    },
    #[error("step size underflow at t = {t} (last valid time {last_valid_time})")]
    StepUnderflow { t: f64, last_valid_time: f64 },
}

/// Sampled solution of a generic first-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl Solution {
    pub fn new(dim: usize) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn push(&mut self, t: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.times.push(t);
        self.values.extend_from_slice(x);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let k = self.len().checked_sub(1)?;
        Some((self.times[k], self.value(k)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.values.chunks_exact(self.dim.max(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub config_digest: u64,
}

/// Sampled states of all nodes; row `k` holds `x_1(t_k), ..., x_N(t_k)` stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    solution: Solution,
    n_nodes: usize,
    state_dim: usize,
    provenance: Provenance,
}

impl Trajectory {
    pub fn from_solution(
        solution: Solution,
        n_nodes: usize,
        state_dim: usize,
        provenance: Provenance,
    ) -> Self {
        assert_eq!(solution.dim(), n_nodes * state_dim);
        Self {
            solution,
            n_nodes,
            state_dim,
            provenance,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.solution.times
    }

    pub fn len(&self) -> usize {
        self.solution.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        self.solution.value(k)
    }

    pub fn node_state(&self, k: usize, i: usize) -> &[f64] {
        &self.state(k)[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }
}

/// Integrates `x' = rhs(t, x)` from `t0` to `t_end`, restarting at every
/// `breakpoints` entry inside the span.
pub fn solve<F>(
    mut rhs: F,
    t0: f64,
    x0: &[f64],
    t_end: f64,
    breakpoints: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution, IntegrationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), NumericError>,
{
    cfg.validate()?;
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(IntegrationError::InvalidSpan { t0, t_end });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(IntegrationError::InvalidInitialState {
            expected: x0.len(),
            found: x0.len(),
        });
    }
    let mut nodes: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    nodes.push(t0);
    nodes.extend(breakpoints.iter().copied().filter(|&b| b > t0 && b < t_end));
    nodes.push(t_end);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let dim = x0.len();
    let mut out = Solution::new(dim);
    out.push(t0, x0);
    let mut stepper = Stepper::new(dim);
    let mut x = x0.to_vec();
    let mut step_count: usize = 0;
    let mut last_valid = t0;

    let record = |out: &mut Solution, t: f64, x: &[f64], step_count: usize, force: bool| {
        if force || step_count % cfg.record_stride == 0 {
            if out.times.last() != Some(&t) {
                out.push(t, x);
            }
        }
    };

    for seg in nodes.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        match cfg.method {
            Method::Rk4 { dt } => {
                let steps = ((b - a) / dt - 1e-9).ceil().max(1.0) as usize;
                let h = (b - a) / steps as f64;
                for s in 0..steps {
                    let t = a + s as f64 * h;
                    let t_next = if s + 1 == steps { b } else { a + (s + 1) as f64 * h };
                    stepper
                        .rk4(&mut rhs, t, &mut x, t_next - t)
                        .map_err(|e| numeric(e, last_valid))?;
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(numeric(
                            NumericError::NonFinite { t: t_next, node: None },
                            last_valid,
                        ));
                    }
                    last_valid = t_next;
                    step_count += 1;
                    record(&mut out, t_next, &x, step_count, false);
                }
            }
            Method::Rk45 { rtol, atol } => {
                let mut t = a;
                let mut h = ((b - a) * 1e-3).min(1e-2);
                while t < b {
                    let h_min = 1e-13 * t.abs().max(1.0);
                    if h < h_min {
                        return Err(IntegrationError::StepUnderflow {
                            t,
                            last_valid_time: last_valid,
                        });
                    }
                    let last_step = t + h >= b;
                    let hh = if last_step { b - t } else { h };
                    let err = stepper
                        .dopri(&mut rhs, t, &x, hh, rtol, atol)
                        .map_err(|e| numeric(e, last_valid))?;
                    if err <= 1.0 && err.is_finite() {
                        t = if last_step { b } else { t + hh };
                        x.copy_from_slice(&stepper.y_new);
                        if x.iter().any(|v| !v.is_finite()) {
                            return Err(numeric(NumericError::NonFinite { t, node: None }, last_valid));
                        }
                        last_valid = t;
                        step_count += 1;
                        record(&mut out, t, &x, step_count, false);
                        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                        h = hh * fac;
                    } else {
                        let fac = if err.is_finite() { (0.9 * err.powf(-0.25)).clamp(0.1, 0.5) } else { 0.1 };
                        h = hh * fac;
                    }
                }
            }
        }
    }
    record(&mut out, t_end, &x, step_count, true);
    Ok(out)
}

fn numeric(source: NumericError, last_valid_time: f64) -> IntegrationError {
    IntegrationError::Numeric {
        source,
        last_valid_time,
    }
}

struct Stepper {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Stepper {
    fn new(dim: usize) -> Self {
        Self {
            k: core::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }

    fn rk4<F>(&mut self, rhs: &mut F, t: f64, x: &mut [f64], h: f64) -> Result<(), NumericError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), NumericError>,
    {
        let [k1, k2, k3, k4, ..] = &mut self.k;
        let tmp = &mut self.tmp;
        rhs(t, x, k1)?;
        for ((y, xi), k) in tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *y = xi + 0.5 * h * k;
        }
        rhs(t + 0.5 * h, tmp, k2)?;
        for ((y, xi), k) in tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *y = xi + 0.5 * h * k;
        }
        rhs(t + 0.5 * h, tmp, k3)?;
        for ((y, xi), k) in tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *y = xi + h * k;
        }
        rhs(t + h, tmp, k4)?;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    /// One Dormand-Prince trial step; leaves the 5th order result in `y_new`
    /// and returns the scaled RMS error estimate.
    fn dopri<F>(
        &mut self,
        rhs: &mut F,
        t: f64,
        x: &[f64],
        h: f64,
        rtol: f64,
        atol: f64,
    ) -> Result<f64, NumericError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), NumericError>,
    {
        let dim = x.len();
        rhs(t, x, &mut self.k[0])?;
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = x[i];
                for (r, a) in DP_A[s].iter().enumerate().take(s) {
                    acc += h * a * self.k[r][i];
                }
                self.tmp[i] = acc;
            }
            let (done, rest) = self.k.split_at_mut(s);
            let _ = done;
            rhs(t + DP_C[s] * h, &self.tmp, &mut rest[0])?;
        }
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut y = x[i];
            let mut e = 0.0;
            for s in 0..7 {
                y += h * DP_B[s] * self.k[s][i];
                e += h * DP_E[s] * self.k[s][i];
            }
            self.y_new[i] = y;
            let scale = atol + rtol * x[i].abs().max(y.abs());
            err_sq += (e / scale) * (e / scale);
        }
        Ok((err_sq / dim.max(1) as f64).sqrt())
    }
}

/// Right-hand side of the coupled network with a reusable adjacency buffer.
pub struct CoupledRhs<'a> {
    system: &'a NetworkSystem,
    scratch: Matrix,
}

impl<'a> CoupledRhs<'a> {
    pub fn new(system: &'a NetworkSystem) -> Self {
        Self {
            system,
            scratch: Matrix::square(system.n_nodes()),
        }
    }

    pub fn eval(&mut self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), NumericError> {
        let sys = self.system;
        let (n, m, c) = (sys.n_nodes(), sys.state_dim(), sys.coupling());
        let a = sys.schedule().sample_ref(t, &mut self.scratch)?;
        for (i, node) in sys.nodes().iter().enumerate() {
            let xi = &x[i * m..(i + 1) * m];
            let oi = &mut out[i * m..(i + 1) * m];
            node.eval(t, xi, oi);
            if oi.iter().any(|v| !v.is_finite()) {
                return Err(NumericError::NonFinite { t, node: Some(i) });
            }
            if c == 0.0 {
                continue;
            }
            for (k, &w) in a.row(i).iter().enumerate().take(n) {
                if w == 0.0 || k == i {
                    continue;
                }
                let xk = &x[k * m..(k + 1) * m];
                for d in 0..m {
                    oi[d] += c * w * (xk[d] - xi[d]);
                }
            }
        }
        Ok(())
    }
}

/// Evaluates block `i` as `f_i(t, x_i) + c * sum_k a_ik(t) (x_k - x_i)`.
pub fn coupled_rhs(system: &NetworkSystem, t: f64, x: &[f64]) -> Result<Vec<f64>, NumericError> {
    let mut out = vec![0.0; system.dim()];
    CoupledRhs::new(system).eval(t, x, &mut out)?;
    Ok(out)
}

/// Integrates the network from the stacked initial state `x0`.
pub fn integrate(
    system: &NetworkSystem,
    t0: f64,
    x0: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, IntegrationError> {
    if x0.len() != system.dim() {
        return Err(IntegrationError::InvalidInitialState {
            expected: system.dim(),
            found: x0.len(),
        });
    }
    let breaks = system.schedule().breakpoints_between(t0, t_end);
    let mut rhs = CoupledRhs::new(system);
    let sol = solve(|t, x, out| rhs.eval(t, x, out), t0, x0, t_end, &breaks, cfg)?;
    Ok(Trajectory::from_solution(
        sol,
        system.n_nodes(),
        system.state_dim(),
        Provenance {
            t0,
            x0: x0.to_vec(),
            config_digest: cfg.digest(),
        },
    ))
}

/// Squared pairwise errors `xi_ij = |x_i - x_j|^2` and the max-pairwise error
/// `e_hat = sqrt(sum_z (max_ij |z_i - z_j|)^2)` over state components `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    n_nodes: usize,
    xi: Vec<f64>,
    pub e_hat: Vec<f64>,
}

impl ErrorSeries {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_pairs(&self) -> usize {
        pair_count(self.n_nodes)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// All pair errors at sample `k`, lexicographic in `(i, j)`.
    pub fn xi(&self, k: usize) -> &[f64] {
        let p = self.n_pairs();
        &self.xi[k * p..(k + 1) * p]
    }

    pub fn max_xi(&self, k: usize) -> f64 {
        self.xi(k).iter().copied().fold(0.0, f64::max)
    }
}

pub fn pairwise_errors(traj: &Trajectory) -> ErrorSeries {
    let (n, m) = (traj.n_nodes(), traj.state_dim());
    let p = pair_count(n);
    let mut xi = Vec::with_capacity(traj.len() * p);
    let mut e_hat = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        for (i, j) in pairs(n) {
            let d: f64 = traj
                .node_state(k, i)
                .iter()
                .zip(traj.node_state(k, j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            xi.push(d);
        }
        let state = traj.state(k);
        let mut acc = 0.0;
        for d in 0..m {
            let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = state[i * m + d];
                (lo.min(v), hi.max(v))
            });
            acc += (hi - lo) * (hi - lo);
        }
        e_hat.push(acc.sqrt());
    }
    ErrorSeries {
        times: traj.times().to_vec(),
        n_nodes: n,
        xi,
        e_hat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_switching_schedule, AdjacencySchedule, Extension, NodeDynamics};

    fn consensus_pair(c: f64) -> NetworkSystem {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        NetworkSystem::homogeneous(
            NodeDynamics::new(1, |_, _, out| out[0] = 0.0),
            AdjacencySchedule::constant(a).unwrap(),
            c,
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluated_consensus_rhs() {
        let sys = consensus_pair(1.0);
        assert_eq!(coupled_rhs(&sys, 0.0, &[1.0, 3.0]).unwrap(), vec![2.0, -2.0]);
    }

    #[test]
    fn decoupled_and_consensus_states() {
        let f = |t: f64, x: &[f64], out: &mut [f64]| out[0] = t.sin() - x[0] * x[0];
        let a = Matrix::from_rows(&[vec![0.0, 2.0, -1.0], vec![0.5, 0.0, 1.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        let sched = AdjacencySchedule::constant(a).unwrap();
        let sys = NetworkSystem::homogeneous(NodeDynamics::new(1, f), sched.clone(), 1.0).unwrap();
        let v = 0.7;
        let out = coupled_rhs(&sys, 0.4, &[v, v, v]).unwrap();
        let mut expect = [0.0];
        f(0.4, &[v], &mut expect);
        assert!(out.iter().all(|&o| o == expect[0]));

        let zero = NetworkSystem::homogeneous(
            NodeDynamics::new(1, f),
            AdjacencySchedule::constant(Matrix::square(3)).unwrap(),
            1.0,
        )
        .unwrap();
        let x = [0.1, -0.2, 0.3];
        let out = coupled_rhs(&zero, 1.1, &x).unwrap();
        for i in 0..3 {
            let mut e = [0.0];
            f(1.1, &x[i..=i], &mut e);
            assert_eq!(out[i], e[0]);
        }
    }

    #[test]
    fn nonfinite_rhs_reports_node() {
        let sys = NetworkSystem::homogeneous(
            NodeDynamics::new(1, |_, x, out| out[0] = 1.0 / x[0]),
            AdjacencySchedule::constant(Matrix::square(2)).unwrap(),
            1.0,
        )
        .unwrap();
        let err = coupled_rhs(&sys, 0.0, &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, NumericError::NonFinite { t: 0.0, node: Some(1) });
    }

    #[test]
    fn constant_field_is_preserved() {
        let sys = NetworkSystem::homogeneous(
            NodeDynamics::new(2, |_, _, out| out.fill(0.0)),
            AdjacencySchedule::constant(Matrix::square(3)).unwrap(),
            1.0,
        )
        .unwrap();
        let x0 = [1.0, -2.0, 0.5, 3.0, 7.0, 0.25];
        let tr = integrate(&sys, 0.0, &x0, 2.0, &SolverConfig::rk4(0.01)).unwrap();
        assert_eq!(tr.final_state(), &x0);
    }

    #[test]
    fn consensus_error_decays_exponentially() {
        let sys = consensus_pair(1.0);
        let tr = integrate(&sys, 0.0, &[1.0, 3.0], 3.0, &SolverConfig::rk4(1e-3)).unwrap();
        for (k, &t) in tr.times().iter().enumerate() {
            let e = tr.state(k)[1] - tr.state(k)[0];
            let exact = 2.0 * (-2.0 * t).exp();
            assert!(((e - exact) / exact).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let sys = consensus_pair(1.0);
        let err = |dt: f64| {
            let tr = integrate(&sys, 0.0, &[1.0, 3.0], 1.0, &SolverConfig::rk4(dt)).unwrap();
            let s = tr.final_state();
            ((s[1] - s[0]) - 2.0 * (-2.0f64).exp()).abs()
        };
        let ratio = err(0.05) / err(0.025);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn grid_contains_breakpoint() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let sched = build_switching_schedule(
            2,
            vec![(0.0, a.clone()), (50.0, Matrix::square(2))],
            Extension::Constant,
        )
        .unwrap();
        let sys =
            NetworkSystem::homogeneous(NodeDynamics::new(1, |_, _, o| o[0] = 0.0), sched, 1.0).unwrap();
        let tr = integrate(&sys, 49.0, &[0.0, 1.0], 51.0, &SolverConfig::rk4(0.3)).unwrap();
        assert!(tr.times().contains(&50.0));
        // after the switch the network is decoupled, so the state freezes exactly
        let k50 = tr.times().iter().position(|&t| t == 50.0).unwrap();
        assert_eq!(tr.state(k50), tr.final_state());
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let sys = consensus_pair(1.0);
        let tr = integrate(&sys, 0.0, &[1.0, 3.0], 2.0, &SolverConfig::rk45(1e-10, 1e-12)).unwrap();
        let s = tr.final_state();
        assert!(((s[1] - s[0]) - 2.0 * (-4.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn error_series_definitions() {
        let sol = {
            let mut s = Solution::new(3);
            s.push(0.0, &[0.0, 1.0, 3.0]);
            s
        };
        let tr = Trajectory::from_solution(
            sol,
            3,
            1,
            Provenance {
                t0: 0.0,
                x0: vec![],
                config_digest: 0,
            },
        );
        let es = pairwise_errors(&tr);
        assert_eq!(es.xi(0), &[1.0, 9.0, 4.0]);
        assert_eq!(es.e_hat[0], 3.0);

        let mut s2 = Solution::new(2);
        s2.push(0.0, &[1.0, 3.0]);
        let tr2 = Trajectory::from_solution(
            s2,
            2,
            1,
            Provenance {
                t0: 0.0,
                x0: vec![],
                config_digest: 0,
            },
        );
        let es2 = pairwise_errors(&tr2);
        assert_eq!(es2.xi(0), &[4.0]);
        assert_eq!(es2.e_hat[0], 2.0);
    }

    #[test]
    fn invalid_inputs() {
        let sys = consensus_pair(1.0);
        assert!(matches!(
            integrate(&sys, 1.0, &[0.0, 1.0], 1.0, &SolverConfig::default()),
            Err(IntegrationError::InvalidSpan { .. })
        ));
        assert!(integrate(&sys, 0.0, &[0.0], 1.0, &SolverConfig::default()).is_err());
        assert!(integrate(&sys, 0.0, &[0.0, 1.0], 1.0, &SolverConfig::rk4(0.0)).is_err());
    }
}
