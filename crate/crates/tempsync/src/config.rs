//! JSON run configurations for the command-line tool.
//!
//! ```json
//! {
//!   "network": { "kind": "generic", "node": { "type": "linear", "l": -1.0 },
//!                "schedule": { "n": 3, "segments": [{ "t": 0, "A": [[0,1,1],[1,0,1],[1,1,0]] }] } },
//!   "c": 1.0, "t_end": 20.0
//! }
//! ```

use serde::{Deserialize, Serialize};
use tempsync_core::{
    pair_bounds_for_identical_nodes, AdjacencySchedule, Matrix, ModelError, NetworkSystem, NodeDynamics,
    PairBoundSet,
};

use crate::io::ScheduleDoc;
use crate::scenarios::{lorenz_node, lorenz_onesided_rate, ring_network, star_adjacency, ScenarioError};

fn one() -> usize {
    1
}

/// Identical node dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeDoc {
    /// `f = 0`.
    Consensus {
        #[serde(default = "one")]
        dim: usize,
    },
    /// `f = l x + forcing sin(t)` componentwise.
    Linear {
        l: f64,
        #[serde(default = "one")]
        dim: usize,
        #[serde(default)]
        forcing: f64,
    },
    /// `f = l x - x^3 + forcing sin(t)` componentwise.
    Cubic {
        l: f64,
        #[serde(default = "one")]
        dim: usize,
        #[serde(default)]
        forcing: f64,
    },
    Lorenz {
        #[serde(default = "sigma")]
        sigma: f64,
        #[serde(default = "rho")]
        rho: f64,
        #[serde(default = "beta")]
        beta: f64,
    },
}

fn sigma() -> f64 {
    10.0
}
fn rho() -> f64 {
    28.0
}
fn beta() -> f64 {
    8.0 / 3.0
}

impl NodeDoc {
    pub fn dim(&self) -> usize {
        match *self {
            NodeDoc::Consensus { dim } | NodeDoc::Linear { dim, .. } | NodeDoc::Cubic { dim, .. } => dim,
            NodeDoc::Lorenz { .. } => 3,
        }
    }

    pub fn dynamics(&self) -> NodeDynamics {
        match *self {
            NodeDoc::Consensus { dim } => NodeDynamics::new(dim, |_, _, o| o.fill(0.0)),
            NodeDoc::Linear { l, dim, forcing } => NodeDynamics::new(dim, move |t, x, o| {
                for (o, x) in o.iter_mut().zip(x) {
                    *o = l * x + forcing * t.sin();
                }
            }),
            NodeDoc::Cubic { l, dim, forcing } => NodeDynamics::new(dim, move |t, x, o| {
                for (o, x) in o.iter_mut().zip(x) {
                    *o = l * x - x * x * x + forcing * t.sin();
                }
            }),
            NodeDoc::Lorenz { sigma, rho, beta } => lorenz_node(sigma, rho, beta),
        }
    }

    /// One-sided Lipschitz rate on the ball of radius `r`.
    pub fn rate(&self, r: f64) -> f64 {
        match *self {
            NodeDoc::Consensus { .. } => 0.0,
            NodeDoc::Linear { l, .. } | NodeDoc::Cubic { l, .. } => l,
            NodeDoc::Lorenz { sigma, rho, beta } => lorenz_onesided_rate(sigma, rho, beta, r),
        }
    }
}

fn lorenz_default() -> NodeDoc {
    NodeDoc::Lorenz {
        sigma: sigma(),
        rho: rho(),
        beta: beta(),
    }
}

fn consensus_default() -> NodeDoc {
    NodeDoc::Consensus { dim: 1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NetworkDoc {
    /// Contrarian ring of scalar consensus nodes; `omegas` switches the four
    /// contrarian weights to `-1/2 + 1/2 sin(w t)`.
    Ring {
        n: usize,
        a: f64,
        a12: f64,
        #[serde(default)]
        omegas: Option<[f64; 4]>,
    },
    Star {
        n: usize,
        a: f64,
        b: f64,
        #[serde(default = "lorenz_default")]
        node: NodeDoc,
    },
    Generic {
        #[serde(default = "consensus_default")]
        node: NodeDoc,
        schedule: ScheduleDoc,
    },
}

impl NetworkDoc {
    pub fn node(&self) -> NodeDoc {
        match self {
            NetworkDoc::Ring { .. } => consensus_default(),
            NetworkDoc::Star { node, .. } | NetworkDoc::Generic { node, .. } => node.clone(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            NetworkDoc::Ring { n, .. } | NetworkDoc::Star { n, .. } => *n,
            NetworkDoc::Generic { schedule, .. } => schedule.n,
        }
    }

    /// The network at coupling `c`.
    pub fn build(&self, c: f64) -> Result<NetworkSystem, ScenarioError> {
        match self {
            NetworkDoc::Ring { n, a, a12, omegas } => Ok(ring_network(*n, *a, *a12, *omegas)?.with_coupling(c)?),
            NetworkDoc::Star { n, a, b, node } => Ok(NetworkSystem::homogeneous(
                node.dynamics(),
                AdjacencySchedule::constant(star_adjacency(*n, *a, *b))?,
                c,
            )?),
            NetworkDoc::Generic { node, schedule } => {
                let s = schedule.to_schedule().map_err(ScenarioError::Invalid)?;
                Ok(NetworkSystem::homogeneous(node.dynamics(), s, c)?)
            }
        }
    }

    /// Bounds for identical nodes on the ball of radius `rho`.
    pub fn bounds(&self, rho: f64) -> Result<PairBoundSet, ModelError> {
        let node = self.node();
        pair_bounds_for_identical_nodes(self.n_nodes(), rho, move |_, r| node.rate(r))
    }
}

fn default_c() -> f64 {
    1.0
}
fn default_t_end() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_record() -> f64 {
    0.01
}
fn default_epsilon() -> f64 {
    1e-3
}
fn default_step() -> f64 {
    0.01
}
fn default_scale() -> f64 {
    1.0
}
fn default_tail() -> f64 {
    0.25
}
fn default_s_max() -> f64 {
    64.0
}

/// Configuration shared by `simulate`, `certify`, `cluster-certify` and
/// `pullback-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: NetworkDoc,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_record")]
    pub record_every: f64,
    /// Stacked initial state; random in `[-x0_scale, x0_scale]` when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_scale")]
    pub x0_scale: f64,
    /// Radius of the bounds; estimated from a simulation when absent.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, rename = "bound_M")]
    pub bound_m: Option<f64>,
    #[serde(default = "default_step")]
    pub grid_step: f64,
    /// 1-based node indices of the cluster.
    #[serde(default)]
    pub cluster: Option<Vec<usize>>,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    /// Time of the pullback estimate (defaults to `t_end`).
    #[serde(default)]
    pub pullback_time: Option<f64>,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
}

/// Input of the `threshold` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub l_rho: f64,
}

impl ThresholdConfig {
    pub fn matrix(&self) -> Option<Matrix> {
        Matrix::from_rows(&self.a)
    }
}
