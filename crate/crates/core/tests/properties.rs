use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempsync_core::certificate::certificate_grid;
use tempsync_core::comparison::DECAY_TOL;
use tempsync_core::*;

struct Instance {
    system: NetworkSystem,
    bounds: PairBoundSet,
    x0: Vec<f64>,
}

/// Random switching signed network of identical (or offset) nodes with exact
/// one-sided bounds.
fn instance(seed: u64, heterogeneous: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(1..=2);
    let l: f64 = rng.gen_range(-1.0..0.5);
    let cubic = rng.gen_bool(0.5);
    let mut segs = Vec::new();
    let mut t = 0.0;
    while t < 4.0 {
        let a = Matrix::from_fn(n, n, |i, j| {
            if i == j || rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(-0.6..1.5)
            }
        });
        segs.push((t, a));
        t += rng.gen_range(0.3..1.5);
    }
    let sched = build_switching_schedule(n, segs, Extension::Constant).unwrap();
    let offsets: Vec<f64> = (0..n)
        .map(|_| if heterogeneous { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let nodes = offsets
        .iter()
        .map(|&b| {
            NodeDynamics::new(m, move |t, x, o| {
                for d in 0..m {
                    let cube = if cubic { x[d] * x[d] * x[d] } else { 0.0 };
                    o[d] = l * x[d] - cube + (t + d as f64).sin() + b;
                }
            })
        })
        .collect();
    let system = NetworkSystem::new(nodes, sched, 1.0).unwrap();
    // <d, f_i(x) - f_j(y)> <= l |d|^2 + <d, b_i - b_j> <= (l + 1/2)|d|^2 + |b_i - b_j|^2 m / 2
    let offs = offsets.clone();
    let bounds = if heterogeneous {
        PairBoundSet::new(
            n,
            10.0,
            move |_, _, _| l + 0.5,
            move |i, j, _| 0.5 * m as f64 * (offs[i] - offs[j]).powi(2),
            true,
        )
        .unwrap()
    } else {
        pair_bounds_for_identical_nodes(n, 10.0, move |_, _| l).unwrap()
    };
    let x0 = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Instance { system, bounds, x0 }
}

fn check_soundness(inst: &Instance) -> Result<(), String> {
    let cfg = SolverConfig::rk4(1e-3);
    let traj = integrate(&inst.system, 0.0, &inst.x0, 4.0, &cfg).map_err(|e| e.to_string())?;
    let err = pairwise_errors(&traj);
    let cs = ComparisonSystem::new(&inst.system, &inst.bounds).unwrap();
    let u = comparison_solve(&cs, 0.0, err.xi(0), 4.0, &cfg).map_err(|e| e.to_string())?;
    assert_eq!(u.times, err.times);
    for k in 0..err.len() {
        for (p, (&x, &v)) in err.xi(k).iter().zip(u.value(k)).enumerate() {
            if x < 0.0 {
                return Err(format!("negative xi at sample {k}"));
            }
            if x > v + 1e-6 * v.abs().max(1.0) {
                return Err(format!("t={} pair {p}: xi {x} > u {v}", err.times[k]));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn comparison_dominates_identical_nodes(seed in any::<u64>()) {
        let r = check_soundness(&instance(seed, false));
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn comparison_dominates_offset_nodes(seed in any::<u64>()) {
        let r = check_soundness(&instance(seed, true));
        prop_assert!(r.is_ok(), "{:?}", r);
    }

    #[test]
    fn off_diagonal_entries_are_nonnegative(seed in any::<u64>(), t in 0.0f64..4.0) {
        let inst = instance(seed, true);
        let s = evaluate_comparison(&inst.system, &inst.bounds, t).unwrap();
        for p in 0..s.delta.len() {
            prop_assert_eq!(s.e[(p, p)], 2.0 * s.delta[p]);
            for q in 0..s.delta.len() {
                if p != q {
                    prop_assert!(s.e[(p, q)] >= 0.0);
                }
            }
            if s.delta[p] < 0.0 {
                prop_assert!((s.row_margin(p) - s.gamma[p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_cluster_equals_full_certificate(seed in any::<u64>()) {
        let inst = instance(seed, true);
        let n = inst.system.n_nodes();
        let params = CertParams::new(WindowGrid::new(0.0, 4.0, 0.05), 50.0, 1e-2);
        let full = check_full_sync(&inst.system, &inst.bounds, &params).unwrap();
        let cl = check_cluster_sync(&inst.system, &inst.bounds, &ClusterSpec::full(n), &params).unwrap();
        prop_assert_eq!(&cl.core, &full);
        prop_assert_eq!(cl.verdict, full.verdict);
    }

    #[test]
    fn mu2_is_monotone(d in 0.0f64..2.0, extra in 0.0f64..1.0, rho in 0.1f64..3.0) {
        let build = |d: f64| {
            let a = Matrix::from_rows(&[
                vec![0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0 + d],
                vec![0.5, 0.5, 0.0],
            ]).unwrap();
            NetworkSystem::homogeneous(
                NodeDynamics::new(1, |_, _, o| o[0] = 0.0),
                AdjacencySchedule::constant(a).unwrap(),
                1.0,
            ).unwrap()
        };
        let cl = ClusterSpec::new(vec![0, 1], 3).unwrap();
        let g = WindowGrid::new(0.0, 2.0, 0.05);
        let lo = compute_mu2(&build(d), &cl, rho, &g).unwrap();
        let hi = compute_mu2(&build(d + extra), &cl, rho, &g).unwrap();
        prop_assert!(hi >= lo);
        prop_assert!((lo - 2.0 * rho * rho * d).abs() < 1e-9);
    }

    #[test]
    fn mu1_is_monotone(scale in 0.0f64..2.0, extra in 0.0f64..1.0) {
        let mk = |s: f64| PairBoundSet::new(3, 1.0, |_, _, _| 0.0, move |i, j, t| s * ((i + j) as f64 + t.sin().abs()), true).unwrap();
        let g = WindowGrid::new(0.0, 3.0, 0.05);
        prop_assert!(compute_mu1(&mk(scale + extra), &g).unwrap() >= compute_mu1(&mk(scale), &g).unwrap());
    }
}

#[test]
fn decay_bound_holds_whenever_verified() {
    let mut verified = 0;
    for seed in 0..60u64 {
        let inst = instance(seed, false);
        let cs = ComparisonSystem::new(&inst.system, &inst.bounds).unwrap();
        let grid = certificate_grid(&inst.system, &WindowGrid::new(0.0, 4.0, 0.05));
        let d = dominance_decay_check(&cs, &grid, 4, &SolverConfig::rk4(1e-3)).unwrap();
        if d.verified {
            verified += 1;
            assert!(d.gamma_bar > 0.0);
            assert!(d.worst_ratio.unwrap() <= 1.0 + DECAY_TOL);
        } else if d.gamma_bar > 0.0 {
            panic!("seed {seed}: dominant system failed the decay check: {d:?}");
        }
    }
    assert!(verified > 0, "no dominant instance generated");
}

#[test]
fn consensus_manifold_is_invariant() {
    for seed in 0..10u64 {
        let mut inst = instance(seed, false);
        let m = inst.system.state_dim();
        let v: Vec<f64> = inst.x0[..m].to_vec();
        inst.x0 = v.iter().cycle().take(inst.x0.len()).copied().collect();
        let traj = integrate(&inst.system, 0.0, &inst.x0, 4.0, &SolverConfig::rk4(1e-3)).unwrap();
        let err = pairwise_errors(&traj);
        for k in 0..err.len() {
            assert!(err.max_xi(k) <= 1e-20);
        }
    }
}
