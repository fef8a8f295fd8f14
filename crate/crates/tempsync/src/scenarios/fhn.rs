//! Clusters forming around two leader neurons in a FitzHugh-Nagumo network.
//!
//! `x' = c_i x - x^3 - y + I_i`, `y' = eps (x + a_i - b_i y)`. All edges of a
//! random directed graph carry the background weight; the out-edges of leader
//! `l` (the nodes listening to `l`) switch to `a_bar` while `sin(w_l t) >= 0`,
//! and likewise for leader `k`. Nothing is coupled before `off_until`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tempsync_core::{
    build_switching_schedule, check_cluster_sync, suggest_bound_m, CertParams, ClusterSpec, Extension,
    Matrix, ModelError, NetworkSystem, NodeDynamics, PairBoundSet, WindowGrid,
};

use super::{
    cluster_spread, estimate_rho, mean, random_connected_digraph, simulate, Metrics, Predicate, RunReport,
    ScenarioError,
};
use crate::io::cluster_certificate_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FhnParams {
    pub n_nodes: usize,
    pub a_bar: f64,
    pub background: f64,
    pub omega_l: f64,
    pub omega_k: f64,
    pub eps: f64,
    pub density: f64,
    pub off_until: f64,
    pub seed: u64,
    pub horizon: f64,
    pub dt: f64,
    pub record_every: f64,
    pub tail_fraction: f64,
    /// Samples closer than this to a switch are left out of the window statistics.
    pub settle: f64,
    /// Required ratio of in-window to out-of-window cluster error.
    pub ratio_tol: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            n_nodes: 15,
            a_bar: 3.0,
            background: 0.01,
            omega_l: 0.05,
            omega_k: 0.05 * 0.618_033_988_749_895,
            eps: 0.05,
            density: 0.3,
            off_until: 50.0,
            seed: 0,
            horizon: 1000.0,
            dt: 0.01,
            record_every: 0.1,
            tail_fraction: 0.25,
            settle: 15.0,
            ratio_tol: 0.1,
        }
    }
}

/// Node parameters `(c, I, a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neuron {
    pub c: f64,
    pub i: f64,
    pub a: f64,
    pub b: f64,
}

fn neuron_node(p: Neuron, eps: f64) -> NodeDynamics {
    NodeDynamics::new(2, move |_, s, o| {
        let (x, y) = (s[0], s[1]);
        o[0] = p.c * x - x * x * x - y + p.i;
        o[1] = eps * (x + p.a - p.b * y);
    })
}

/// Pair bounds on the ball of radius `rho`. Each neuron has one-sided rate
/// `max(c_i, -eps b_i) + |1 - eps| / 2`; the mismatch of two neurons at a
/// common point of the ball is at most `h_ij` and enters as `beta_ij = h_ij^2 / 2`.
pub fn fhn_bounds(neurons: &[Neuron], eps: f64, rho: f64) -> Result<PairBoundSet, ModelError> {
    let ns: Arc<Vec<Neuron>> = Arc::new(neurons.to_vec());
    let n2 = ns.clone();
    let rate = move |p: &Neuron| p.c.max(-eps * p.b) + 0.5 * (1.0 - eps).abs();
    PairBoundSet::new(
        neurons.len(),
        rho,
        move |i, j, _| rate(&ns[i]).max(rate(&ns[j])) + 0.5,
        move |i, j, _| {
            let (p, q) = (n2[i], n2[j]);
            let hx = (p.c - q.c).abs() * rho + (p.i - q.i).abs();
            let hy = eps * ((p.a - q.a).abs() + (p.b - q.b).abs() * rho);
            0.5 * (hx * hx + hy * hy)
        },
        false,
    )
}

struct Layout {
    graph: Matrix,
    l: usize,
    k: usize,
}

fn layout(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Layout {
    loop {
        let graph = random_connected_digraph(rng, n, density);
        let out_deg = |j: usize| (0..n).filter(|&i| graph[(i, j)] != 0.0).count();
        let ok: Vec<usize> = (0..n).filter(|&j| out_deg(j) >= 2).collect();
        if ok.len() < 2 {
            continue;
        }
        let l = ok[rng.gen_range(0..ok.len())];
        let rest: Vec<usize> = ok.into_iter().filter(|&j| j != l).collect();
        let k = rest[rng.gen_range(0..rest.len())];
        return Layout { graph, l, k };
    }
}

/// Times in `(from, to)` where `sin(w t)` changes sign.
fn sign_changes(w: f64, from: f64, to: f64) -> Vec<f64> {
    let step = PI / w;
    let mut m = (from / step).floor() + 1.0;
    let mut out = Vec::new();
    while m * step < to {
        out.push(m * step);
        m += 1.0;
    }
    out
}

fn is_on(w: f64, t: f64) -> bool {
    (w * t).sin() >= 0.0
}

pub fn run_fhn_clusters(p: &FhnParams) -> Result<RunReport, ScenarioError> {
    let n = p.n_nodes;
    if n < 4 || !(p.omega_l > 0.0 && p.omega_k > 0.0) || !(p.density > 0.0 && p.density <= 1.0) {
        return Err(ScenarioError::Invalid("fhn needs n_nodes >= 4, positive omegas, density in (0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let Layout { graph, l, k } = layout(&mut rng, n, p.density);
    let neurons: Vec<Neuron> = (0..n)
        .map(|i| {
            if i == l {
                Neuron { c: 0.5, i: 0.1, a: 0.3, b: 1.4 }
            } else if i == k {
                Neuron { c: 0.75, i: 0.15, a: 0.3, b: 1.4 }
            } else {
                Neuron {
                    c: rng.gen_range(0.75..1.0),
                    i: rng.gen_range(0.0..0.01),
                    a: rng.gen_range(-0.3..0.3),
                    b: rng.gen_range(0.1..2.0),
                }
            }
        })
        .collect();

    // piecewise-constant schedule with a breakpoint at every leader switch
    let mut switches = vec![p.off_until.max(0.0)];
    switches.extend(sign_changes(p.omega_l, p.off_until, p.horizon));
    switches.extend(sign_changes(p.omega_k, p.off_until, p.horizon));
    switches.sort_by(f64::total_cmp);
    switches.dedup();
    let weights = |on_l: bool, on_k: bool| {
        Matrix::from_fn(n, n, |i, j| {
            if graph[(i, j)] == 0.0 {
                0.0
            } else if (j == l && on_l) || (j == k && on_k) {
                p.a_bar
            } else {
                p.background
            }
        })
    };
    let mut segs = Vec::new();
    if p.off_until > 0.0 {
        segs.push((0.0, Matrix::square(n)));
    }
    for (q, &s) in switches.iter().enumerate() {
        let e = switches.get(q + 1).copied().unwrap_or(s + 1.0);
        let mid = 0.5 * (s + e);
        segs.push((s, weights(is_on(p.omega_l, mid), is_on(p.omega_k, mid))));
    }
    let schedule = build_switching_schedule(n, segs, Extension::Constant)?;
    let nodes = neurons.iter().map(|&q| neuron_node(q, p.eps)).collect();
    let system = NetworkSystem::new(nodes, schedule, 1.0)?;
    let x0: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (traj, errors) = simulate(&system, &x0, p.horizon, p.dt, p.record_every)?;
    let metrics = Metrics::from_errors(&errors, p.tail_fraction, 1e-3);

    let members = |lead: usize| {
        let mut v: Vec<usize> = (0..n).filter(|&i| i == lead || graph[(i, lead)] != 0.0).collect();
        v.sort();
        v
    };
    let last_switch = |t: f64| switches.iter().copied().filter(|&s| s <= t).fold(f64::NEG_INFINITY, f64::max);
    let window_stats = |lead: usize, w_lead: f64, w_other: f64| {
        let j = members(lead);
        let settled = |t: f64| t >= p.off_until && t - last_switch(t) >= p.settle;
        let times = traj.times();
        let inside = mean(
            (0..traj.len())
                .filter(|&q| settled(times[q]) && is_on(w_lead, times[q]) && !is_on(w_other, times[q]))
                .map(|q| cluster_spread(&traj, q, &j)),
        );
        let outside = mean(
            (0..traj.len())
                .filter(|&q| settled(times[q]) && !is_on(w_lead, times[q]))
                .map(|q| cluster_spread(&traj, q, &j)),
        );
        (j, inside, outside)
    };
    let (jl, in_l, out_l) = window_stats(l, p.omega_l, p.omega_k);
    let (jk, in_k, out_k) = window_stats(k, p.omega_k, p.omega_l);
    let (ratio_l, ratio_k) = (in_l / out_l, in_k / out_k);
    let passed = ratio_l <= p.ratio_tol && ratio_k <= p.ratio_tol;

    // cluster certificate over the first stretch where only l is active
    let rho = estimate_rho(&traj);
    let bounds = fhn_bounds(&neurons, p.eps, rho)?;
    let cluster = ClusterSpec::new(jl.clone(), n)?;
    let mut window = None;
    for (q, &s) in switches.iter().enumerate() {
        let e = switches.get(q + 1).copied().unwrap_or(p.horizon);
        let mid = 0.5 * (s + e);
        if e - s >= 2.0 && is_on(p.omega_l, mid) && !is_on(p.omega_k, mid) {
            window = Some((s, e));
            break;
        }
    }
    let certificate = match window {
        Some((s, e)) => {
            // stay strictly inside the segment so the grid never sees a neighbour
            let grid = WindowGrid::new(s + 1e-9, e - 1e-9, 0.05);
            let probe = check_cluster_sync(&system, &bounds, &cluster, &CertParams::new(grid, f64::MAX, 1e-3))?;
            let m = suggest_bound_m(probe.combined_mu, probe.gamma_bar_j.max(1e-9));
            let cert = check_cluster_sync(&system, &bounds, &cluster, &CertParams::new(grid, m, 1e-3))?;
            Some(cluster_certificate_json(&cert))
        }
        None => None,
    };

    let shared: Vec<usize> = jl.iter().copied().filter(|i| jk.contains(i) && *i != l && *i != k).collect();
    let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    Ok(RunReport {
        scenario: "fhn".into(),
        seed: p.seed,
        params: serde_json::to_value(p).unwrap(),
        metrics,
        predicate: Predicate {
            name: format!("in-window cluster error <= {} x out-of-window error for both leaders", p.ratio_tol),
            passed,
        },
        details: json!({
            "leader_l": l + 1,
            "leader_k": k + 1,
            "cluster_l": one_based(&jl),
            "cluster_k": one_based(&jk),
            "shared_neighbours": one_based(&shared),
            "in_window_error_l": in_l,
            "out_window_error_l": out_l,
            "ratio_l": ratio_l,
            "in_window_error_k": in_k,
            "out_window_error_k": out_k,
            "ratio_k": ratio_k,
            "certificate_window": window,
            "rho_estimate": rho,
            "neurons": neurons,
        }),
        certificate,
        paths: Default::default(),
        trajectory: traj,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switches_at_half_periods() {
        let s = sign_changes(0.5, 0.0, 20.0);
        assert_eq!(s.len(), 3);
        for (m, t) in s.iter().enumerate() {
            assert!((t - (m + 1) as f64 * 2.0 * PI).abs() < 1e-12);
        }
        assert!(is_on(0.5, 1.0) && !is_on(0.5, 7.0));
    }

    #[test]
    fn bounds_vanish_for_identical_neurons() {
        let q = Neuron { c: 0.8, i: 0.0, a: 0.1, b: 1.0 };
        let b = fhn_bounds(&[q, q, q], 0.05, 3.0).unwrap();
        assert_eq!(b.beta(0, 2, 0.0), 0.0);
        assert!((b.alpha(0, 1, 0.0) - (0.8 + 0.475 + 0.5)).abs() < 1e-12);
    }
}
