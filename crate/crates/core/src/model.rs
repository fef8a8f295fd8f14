//! Temporal network data model: node vector fields, signed time-varying adjacency
//! schedules, the global coupling strength, node clusters and the pairwise
//! one-sided bounds `<x - y, f_i(t,x) - f_j(t,y)> <= alpha_ij(t)|x-y|^2 + beta_ij(t)`
//! consumed by the synchronization certificates.
//!
//! Node indices are zero based throughout the crate. Unordered pairs `(i, j)`,
//! `i < j`, are enumerated lexicographically, see [`pair_index`].

use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::fmt;

use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("schedule needs at least one segment")]
    EmptySegments,
    #[error("matrix of segment {segment} is {rows}x{cols}, expected {n}x{n}")]
    DimensionMismatch {
        segment: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("segment start times must be strictly increasing (segment {segment})")]
    NonMonotoneBreakpoints { segment: usize },
    #[error("breakpoint {segment} is not finite")]
    NonFiniteBreakpoint { segment: usize },
    #[error("periodic extension needs a period longer than the last segment start ({period})")]
    InvalidPeriod { period: f64 },
    #[error("time {t} is outside the schedule domain")]
    OutOfDomain { t: f64 },
    #[error("{nodes} node vector fields given for a schedule on {schedule} nodes")]
    NodeCount { nodes: usize, schedule: usize },
    #[error("node {node} has state dimension {found}, expected {expected}")]
    StateDim {
        node: usize,
        found: usize,
        expected: usize,
    },
    #[error("global coupling must be finite and nonnegative, got {0}")]
    InvalidCoupling(f64),
    #[error("bound radius must be finite and positive, got {0}")]
    InvalidRadius(f64),
    #[error("invalid cluster: {0}")]
    InvalidCluster(&'static str),
    #[error("network needs at least two nodes")]
    TooFewNodes,
}

/// Number of unordered pairs among `n` nodes.
pub const fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Lexicographic position of the pair `(i, j)`, `i < j < n`.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j < n` in lexicographic order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type LipschitzFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
pub type PieceFn = dyn Fn(f64, &mut Matrix) + Send + Sync;
pub type PairFn = dyn Fn(usize, usize, f64) -> f64 + Send + Sync;

/// Vector field `f_i(t, x)` of a single node.
///
/// The right-hand side writes into an output slice of length `state_dim`; it
/// need not be continuous in `t`.
#[derive(Clone)]
pub struct NodeDynamics {
    state_dim: usize,
    rhs: Arc<RhsFn>,
    lipschitz: Option<Arc<LipschitzFn>>,
}

impl NodeDynamics {
    pub fn new(
        state_dim: usize,
        rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        assert!(state_dim > 0, "state dimension must be positive");
        Self {
            state_dim,
            rhs: Arc::new(rhs),
            lipschitz: None,
        }
    }

    /// Attaches a local Lipschitz bound `l(t, r)` valid on the ball of radius `r`.
    pub fn with_lipschitz(mut self, l: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.lipschitz = Some(Arc::new(l));
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.rhs)(t, x, out)
    }

    pub fn lipschitz(&self, t: f64, r: f64) -> Option<f64> {
        self.lipschitz.as_ref().map(|l| l(t, r))
    }
}

impl fmt::Debug for NodeDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeDynamics")
            .field("state_dim", &self.state_dim)
            .field("lipschitz", &self.lipschitz.is_some())
            .finish_non_exhaustive()
    }
}

/// One interval of an adjacency schedule.
#[derive(Clone)]
pub enum Piece {
    Constant(Matrix),
    /// Fills a zeroed `n x n` matrix with `a_ij(t)`.
    Function(Arc<PieceFn>),
}

impl Piece {
    pub fn function(f: impl Fn(f64, &mut Matrix) + Send + Sync + 'static) -> Self {
        Piece::Function(Arc::new(f))
    }
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Piece::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Behaviour of a schedule outside `[first breakpoint, ...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extension {
    /// First piece before the first breakpoint, last piece forever after.
    Constant,
    /// The pattern on `[t_first, t_first + period)` repeats in both directions.
    Periodic { period: f64 },
    /// Defined on `[t_first, end)` only (`end = None` means unbounded to the right).
    None { end: Option<f64> },
}

/// Piecewise-defined, right-continuous adjacency matrix `A(t)`.
///
/// Diagonal entries are forced to zero on every sample.
#[derive(Debug, Clone)]
pub struct AdjacencySchedule {
    n: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    extension: Extension,
}

impl AdjacencySchedule {
    pub fn new(
        n: usize,
        breakpoints: Vec<f64>,
        pieces: Vec<Piece>,
        extension: Extension,
    ) -> Result<Self, ModelError> {
        if pieces.is_empty() || breakpoints.len() != pieces.len() {
            return Err(ModelError::EmptySegments);
        }
        for (k, b) in breakpoints.iter().enumerate() {
            if !b.is_finite() {
                return Err(ModelError::NonFiniteBreakpoint { segment: k });
            }
            if k > 0 && *b <= breakpoints[k - 1] {
                return Err(ModelError::NonMonotoneBreakpoints { segment: k });
            }
        }
        let mut pieces = pieces;
        for (k, piece) in pieces.iter_mut().enumerate() {
            if let Piece::Constant(m) = piece {
                if m.rows() != n || m.cols() != n {
                    return Err(ModelError::DimensionMismatch {
                        segment: k,
                        rows: m.rows(),
                        cols: m.cols(),
                        n,
                    });
                }
                m.zero_diagonal();
            }
        }
        let last = *breakpoints.last().unwrap();
        match extension {
            Extension::Periodic { period } => {
                if !(period.is_finite() && breakpoints[0] + period > last) {
                    return Err(ModelError::InvalidPeriod { period });
                }
            }
            Extension::None { end: Some(end) } if !(end > last) => {
                return Err(ModelError::InvalidPeriod { period: end - breakpoints[0] });
            }
            _ => {}
        }
        Ok(Self {
            n,
            breakpoints,
            pieces,
            extension,
        })
    }

    /// Time-invariant schedule.
    pub fn constant(matrix: Matrix) -> Result<Self, ModelError> {
        let n = matrix.rows();
        Self::new(n, alloc::vec![0.0], alloc::vec![Piece::Constant(matrix)], Extension::Constant)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// True when every piece is a constant matrix.
    pub fn is_piecewise_constant(&self) -> bool {
        self.pieces.iter().all(|p| matches!(p, Piece::Constant(_)))
    }

    fn locate(&self, t: f64) -> Result<(usize, f64), ModelError> {
        if !t.is_finite() {
            return Err(ModelError::OutOfDomain { t });
        }
        let first = self.breakpoints[0];
        let local = match self.extension {
            Extension::Constant => t,
            Extension::Periodic { period } => {
                let mut r = (t - first) - period * ((t - first) / period).floor();
                if r >= period {
                    r -= period;
                }
                if r < 0.0 {
                    r += period;
                }
                first + r
            }
            Extension::None { end } => {
                if t < first || end.is_some_and(|e| t >= e) {
                    return Err(ModelError::OutOfDomain { t });
                }
                t
            }
        };
        let idx = self.breakpoints.partition_point(|&b| b <= local);
        Ok((idx.saturating_sub(1), local))
    }

    /// Borrowing sample: constant pieces are returned directly, functional pieces
    /// are evaluated into `scratch`.
    pub fn sample_ref<'a>(&'a self, t: f64, scratch: &'a mut Matrix) -> Result<&'a Matrix, ModelError> {
        let (idx, local) = self.locate(t)?;
        match &self.pieces[idx] {
            Piece::Constant(m) => Ok(m),
            Piece::Function(f) => {
                if scratch.rows() != self.n || scratch.cols() != self.n {
                    *scratch = Matrix::square(self.n);
                } else {
                    scratch.fill(0.0);
                }
                f(local, scratch);
                scratch.zero_diagonal();
                Ok(scratch)
            }
        }
    }

    pub fn sample(&self, t: f64) -> Result<Matrix, ModelError> {
        let mut scratch = Matrix::square(self.n);
        self.sample_ref(t, &mut scratch).cloned()
    }

    /// Discontinuity candidates strictly inside `(t0, t1)`, ascending.
    pub fn breakpoints_between(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.extension {
            Extension::Periodic { period } => {
                let first = self.breakpoints[0];
                let mut k = ((t0 - first) / period).floor() - 1.0;
                loop {
                    let base = first + k * period;
                    if base >= t1 {
                        break;
                    }
                    for b in &self.breakpoints {
                        let s = base + (b - first);
                        if s > t0 && s < t1 {
                            out.push(s);
                        }
                    }
                    k += 1.0;
                }
                out.sort_by(f64::total_cmp);
                out.dedup();
            }
            Extension::Constant | Extension::None { .. } => {
                out.extend(self.breakpoints.iter().copied().filter(|&b| b > t0 && b < t1));
            }
        }
        out
    }
}

/// Builds a piecewise-constant schedule from `(start, matrix)` segments.
pub fn build_switching_schedule(
    n_nodes: usize,
    segments: Vec<(f64, Matrix)>,
    extension: Extension,
) -> Result<AdjacencySchedule, ModelError> {
    if segments.is_empty() {
        return Err(ModelError::EmptySegments);
    }
    let (starts, mats): (Vec<_>, Vec<_>) = segments.into_iter().unzip();
    AdjacencySchedule::new(
        n_nodes,
        starts,
        mats.into_iter().map(Piece::Constant).collect(),
        extension,
    )
}

pub fn sample_adjacency(schedule: &AdjacencySchedule, t: f64) -> Result<Matrix, ModelError> {
    schedule.sample(t)
}

/// `x_i' = f_i(t, x_i) + c * sum_k a_ik(t) (x_k - x_i)`.
#[derive(Debug, Clone)]
pub struct NetworkSystem {
    nodes: Vec<NodeDynamics>,
    schedule: AdjacencySchedule,
    coupling: f64,
}

impl NetworkSystem {
    pub fn new(
        nodes: Vec<NodeDynamics>,
        schedule: AdjacencySchedule,
        coupling: f64,
    ) -> Result<Self, ModelError> {
        if nodes.len() != schedule.n_nodes() {
            return Err(ModelError::NodeCount {
                nodes: nodes.len(),
                schedule: schedule.n_nodes(),
            });
        }
        if nodes.len() < 2 {
            return Err(ModelError::TooFewNodes);
        }
        let m = nodes[0].state_dim();
        if let Some((node, d)) = nodes.iter().enumerate().find(|(_, d)| d.state_dim() != m) {
            return Err(ModelError::StateDim {
                node,
                found: d.state_dim(),
                expected: m,
            });
        }
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(ModelError::InvalidCoupling(coupling));
        }
        Ok(Self {
            nodes,
            schedule,
            coupling,
        })
    }

    /// Same network with identical vector fields at every node.
    pub fn homogeneous(
        node: NodeDynamics,
        schedule: AdjacencySchedule,
        coupling: f64,
    ) -> Result<Self, ModelError> {
        let n = schedule.n_nodes();
        Self::new(alloc::vec![node; n], schedule, coupling)
    }

    pub fn with_coupling(&self, coupling: f64) -> Result<Self, ModelError> {
        Self::new(self.nodes.clone(), self.schedule.clone(), coupling)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.nodes[0].state_dim()
    }

    /// Length of the stacked state vector.
    pub fn dim(&self) -> usize {
        self.n_nodes() * self.state_dim()
    }

    pub fn nodes(&self) -> &[NodeDynamics] {
        &self.nodes
    }

    pub fn schedule(&self) -> &AdjacencySchedule {
        &self.schedule
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// `c * A(t)`, the weights that actually enter the dynamics.
    pub fn effective_adjacency(&self, t: f64) -> Result<Matrix, ModelError> {
        let mut a = self.schedule.sample(t)?;
        a.scale(self.coupling);
        Ok(a)
    }
}

/// Pairwise one-sided bounds on a ball of radius `rho`.
///
/// Accessors are symmetric: `alpha(i, j, t) == alpha(j, i, t)`; the wrapped
/// functions are always called with the smaller index first.
#[derive(Clone)]
pub struct PairBoundSet {
    n: usize,
    rho: f64,
    alpha: Arc<PairFn>,
    beta: Arc<PairFn>,
    global: bool,
}

impl PairBoundSet {
    pub fn new(
        n: usize,
        rho: f64,
        alpha: impl Fn(usize, usize, f64) -> f64 + Send + Sync + 'static,
        beta: impl Fn(usize, usize, f64) -> f64 + Send + Sync + 'static,
        global: bool,
    ) -> Result<Self, ModelError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ModelError::InvalidRadius(rho));
        }
        if n < 2 {
            return Err(ModelError::TooFewNodes);
        }
        Ok(Self {
            n,
            rho,
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
            global,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Bounds hold for every radius (the `rho`-independent case).
    pub fn is_global(&self) -> bool {
        self.global
    }

    #[inline]
    pub fn alpha(&self, i: usize, j: usize, t: f64) -> f64 {
        (self.alpha)(i.min(j), i.max(j), t)
    }

    #[inline]
    pub fn beta(&self, i: usize, j: usize, t: f64) -> f64 {
        (self.beta)(i.min(j), i.max(j), t)
    }

    /// Same bounds recorded for a different radius.
    pub fn with_rho(&self, rho: f64) -> Result<Self, ModelError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ModelError::InvalidRadius(rho));
        }
        Ok(Self { rho, ..self.clone() })
    }
}

impl fmt::Debug for PairBoundSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairBoundSet")
            .field("n", &self.n)
            .field("rho", &self.rho)
            .field("global", &self.global)
            .finish_non_exhaustive()
    }
}

/// Identical nodes: `alpha_ij(t) = l(t, rho)` and `beta_ij = 0` for every pair.
pub fn pair_bounds_for_identical_nodes(
    n: usize,
    rho: f64,
    l: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> Result<PairBoundSet, ModelError> {
    PairBoundSet::new(n, rho, move |_, _, t| l(t, rho), |_, _, _| 0.0, false)
}

/// Ordered subset of node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSpec {
    indices: Vec<usize>,
}

impl ClusterSpec {
    pub fn new(indices: Vec<usize>, n_nodes: usize) -> Result<Self, ModelError> {
        if indices.len() < 2 {
            return Err(ModelError::InvalidCluster("a cluster needs at least two nodes"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidCluster("indices must be strictly increasing"));
        }
        if indices.iter().any(|&i| i >= n_nodes) {
            return Err(ModelError::InvalidCluster("index out of range"));
        }
        Ok(Self { indices })
    }

    pub fn full(n_nodes: usize) -> Self {
        Self {
            indices: (0..n_nodes).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let n = 5;
        for (k, (i, j)) in pairs(n).enumerate() {
            assert_eq!(pair_index(i, j, n), k);
        }
        assert_eq!(pair_count(n), 10);
    }

    #[test]
    fn single_segment_forces_zero_diagonal() {
        let s = build_switching_schedule(3, vec![(0.0, Matrix::identity(3))], Extension::Constant)
            .unwrap();
        for t in [0.0, 1.5, 1e6] {
            assert_eq!(s.sample(t).unwrap(), Matrix::square(3));
        }
    }

    #[test]
    fn cadlag_at_breakpoint() {
        let a1 = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let a2 = mat(&[&[0.0, 2.0], &[3.0, 0.0]]);
        let s = build_switching_schedule(
            2,
            vec![(0.0, a1.clone()), (50.0, a2.clone())],
            Extension::Constant,
        )
        .unwrap();
        assert_eq!(s.sample(49.999).unwrap(), a1);
        assert_eq!(s.sample(50.0).unwrap(), a2);
        assert_eq!(s.breakpoints_between(0.0, 100.0), vec![50.0]);
    }

    #[test]
    fn construction_errors() {
        let a = Matrix::square(2);
        assert_eq!(
            build_switching_schedule(2, vec![], Extension::Constant).unwrap_err(),
            ModelError::EmptySegments
        );
        assert!(matches!(
            build_switching_schedule(3, vec![(0.0, a.clone())], Extension::Constant),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            build_switching_schedule(2, vec![(1.0, a.clone()), (1.0, a)], Extension::Constant),
            Err(ModelError::NonMonotoneBreakpoints { segment: 1 })
        ));
    }

    #[test]
    fn functional_piece_matches_formula() {
        let omega = 1.7;
        let s = AdjacencySchedule::new(
            2,
            vec![0.0],
            vec![Piece::function(move |t, m| {
                m[(0, 1)] = -0.5 + 0.5 * (omega * t).sin();
                m[(1, 1)] = 9.0;
            })],
            Extension::Constant,
        )
        .unwrap();
        for t in [0.0, 0.3, 2.0, 11.1] {
            let m = s.sample(t).unwrap();
            assert_eq!(m[(0, 1)], -0.5 + 0.5 * (omega * t).sin());
            assert_eq!(m[(1, 1)], 0.0);
        }
    }

    #[test]
    fn periodic_extension_repeats() {
        let a1 = mat(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let a2 = mat(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let s = build_switching_schedule(
            2,
            vec![(0.0, a1), (1.0, a2)],
            Extension::Periodic { period: 2.0 },
        )
        .unwrap();
        for t in [0.25, 1.25, 3.5, -0.75, 7.9] {
            assert_eq!(s.sample(t).unwrap(), s.sample(t - 2.0).unwrap());
        }
        assert_eq!(s.breakpoints_between(0.0, 4.0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn bounded_domain_rejects_outside() {
        let s = build_switching_schedule(
            2,
            vec![(0.0, Matrix::square(2))],
            Extension::None { end: Some(5.0) },
        )
        .unwrap();
        assert!(s.sample(-0.1).is_err());
        assert!(s.sample(5.0).is_err());
        assert!(s.sample(4.9).is_ok());
    }

    #[test]
    fn identical_node_bounds() {
        let b = pair_bounds_for_identical_nodes(4, 2.0, |_, r| r * 0.5).unwrap();
        for (i, j) in pairs(4) {
            assert_eq!(b.alpha(i, j, 0.3), 1.0);
            assert_eq!(b.alpha(j, i, 0.3), 1.0);
            assert_eq!(b.beta(i, j, 0.3), 0.0);
        }
        let consensus = pair_bounds_for_identical_nodes(3, 1.0, |_, _| 0.0).unwrap();
        assert_eq!(consensus.alpha(0, 2, 5.0), 0.0);
    }

    #[test]
    fn cluster_validation() {
        assert!(ClusterSpec::new(vec![0, 2, 3], 4).is_ok());
        assert!(ClusterSpec::new(vec![2], 4).is_err());
        assert!(ClusterSpec::new(vec![2, 1], 4).is_err());
        assert!(ClusterSpec::new(vec![1, 4], 4).is_err());
    }

    #[test]
    fn system_validation() {
        let node = NodeDynamics::new(1, |_, _, out| out[0] = 0.0);
        let sched = AdjacencySchedule::constant(Matrix::square(3)).unwrap();
        assert!(NetworkSystem::new(vec![node.clone(); 2], sched.clone(), 1.0).is_err());
        assert!(NetworkSystem::homogeneous(node.clone(), sched.clone(), -1.0).is_err());
        let other = NodeDynamics::new(2, |_, _, out| out.fill(0.0));
        assert!(matches!(
            NetworkSystem::new(vec![node.clone(), node.clone(), other], sched, 1.0),
            Err(ModelError::StateDim { node: 2, .. })
        ));
    }
}
