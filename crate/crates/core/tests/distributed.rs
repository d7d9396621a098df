use nalgebra::{DMatrix, DVector};
use platoon_mpc::assembly::MpcProblem;
use platoon_mpc::closed_loop::{build_closed_loop, tracking_vector};
use platoon_mpc::distributed::agent::local_indices;
use platoon_mpc::distributed::*;
use platoon_mpc::kernel::{box_prox, qcqp_solve, ConsensusLayout, ConvexQcqp, QuadForm};
use platoon_mpc::platoon::{random_feasible_state, PlatoonConfig, PlatoonState};
use platoon_mpc::presets::{platoon_preset, weight_preset, PlatoonPreset};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

fn drag_free(preset: PlatoonPreset) -> PlatoonConfig {
    let mut cfg = platoon_preset(preset);
    for v in &mut cfg.vehicles {
        v.c2 = 0.0;
        v.c3 = 0.0;
    }
    cfg
}

fn perturbed(cfg: &PlatoonConfig, u0: f64) -> PlatoonState {
    let mut st = PlatoonState::cruise(cfg, 25.0);
    st.u0 = u0;
    st.x[2] += 0.3;
    st.v[5] -= 0.4;
    st
}

fn layout_of(prob: &MpcProblem) -> ConsensusLayout {
    ConsensusLayout::new(prob.p, |i| prob.config.neighbors(i), prob.n())
}

fn first_rel_err(prob: &MpcProblem, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let p = prob.p;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..prob.n() {
        num += (a[i * p] - b[i * p]).powi(2);
        den += b[i * p].powi(2);
    }
    (num / den).sqrt()
}

#[test]
fn one_step_matches_centralized() {
    for preset in PlatoonPreset::ALL {
        let (cfg, w) = preset_weights(preset, 1);
        let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -2.0)).unwrap();
        let sol = solve_mpc(&prob, &SolverConfig::for_horizon(1), None).unwrap();
        let c = solve_convex_centralized(&prob).unwrap();
        let rel = (&sol.plan - &c).norm() / c.norm();
        assert!(rel <= 5e-3, "{preset}: {rel:e}");
        assert_eq!(sol.diagnostics.locality_violations, 0);
    }
}

#[test]
fn drag_free_longer_horizons_match_centralized_first_controls() {
    let cfg = drag_free(PlatoonPreset::Small);
    for p in 2..=5 {
        let w = weight_preset(PlatoonPreset::Small, p);
        let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -1.0)).unwrap();
        let sol = solve_mpc(&prob, &SolverConfig::for_horizon(p), None).unwrap();
        let c = solve_convex_centralized(&prob).unwrap();
        assert!(first_rel_err(&prob, &sol.plan, &c) <= 5e-3, "p={p}");
        let gap = prob.objective(&sol.plan) - prob.objective(&c);
        assert!(gap <= 1e-3 * (1.0 + prob.objective(&c)), "p={p}: objective gap {gap:e}");
        assert!(sol.diagnostics.outer_iterations <= 2, "p={p}: {:?}", sol.diagnostics.outer_steps);
    }
}

#[test]
fn unconstrained_one_step_matches_closed_form() {
    let cfg = drag_free(PlatoonPreset::Medium);
    let w = weight_preset(PlatoonPreset::Medium, 1);
    let st = perturbed(&cfg, 0.5);
    let prob = MpcProblem::new(&cfg, &w, &st).unwrap();
    let mut sc = SolverConfig::for_horizon(1);
    sc.tol_outer = 1e-10;
    sc.max_inner = 5000;
    let sol = solve_mpc(&prob, &sc, None).unwrap();
    let cl = build_closed_loop(&cfg, &w).unwrap();
    let expect = cl.controls(&tracking_vector(&prob.tracking), st.u0);
    let got = DVector::from_vec(sol.first.clone());
    assert!((got - expect).amax() <= 1e-6);
}

#[test]
fn fixed_point_start_stops_immediately() {
    let (cfg, w) = preset_weights(PlatoonPreset::Large, 1);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -1.0)).unwrap();
    let layout = layout_of(&prob);
    let problems = one_step_problems(&prob, &layout);
    let c = qcqp_solve(&centralized_problem(&problems, &layout), None).unwrap().x;
    let rho = 0.1;
    // z = x − ρ∇f_i(x) is a fixed point when every constraint is inactive at x
    let z0: Vec<DVector<f64>> = layout
        .scatter(&c)
        .into_iter()
        .zip(&problems)
        .map(|(x, ap)| &x - ap.qcqp.objective.gradient(&x) * rho)
        .collect();
    let mut net = Network::new(&layout);
    let settings = DrSettings { alpha: 0.9, rho, tol: 2.5e-3, max_rounds: 500, box_only: false };
    let out = run_dr(&problems, &layout, &mut net, z0, &settings).unwrap();
    assert!(out.converged);
    assert!(out.rounds <= 2, "{} rounds", out.rounds);
    assert!(out.residuals.iter().all(|&r| r <= 1e-8), "{:?}", out.residuals);
}

#[test]
fn decoupled_agents_reach_box_solution() {
    let layout = ConsensusLayout::new(2, |_| Vec::new(), 2);
    let targets = [DVector::from_vec(vec![3.0, -0.5]), DVector::from_vec(vec![-9.0, 0.7])];
    let lower = DVector::from_element(2, -8.0);
    let upper = DVector::from_element(2, 1.4);
    let problems: Vec<AgentProblem> = targets
        .iter()
        .enumerate()
        .map(|(k, t)| AgentProblem {
            agent: k + 1,
            qcqp: ConvexQcqp {
                objective: QuadForm { p: DMatrix::identity(2, 2), q: -t, r: 0.0 },
                lower: lower.clone(),
                upper: upper.clone(),
                constraints: Vec::new(),
            },
            fixed: None,
        })
        .collect();
    let mut net = Network::new(&layout);
    let settings = DrSettings { alpha: 0.9, rho: 0.1, tol: 1e-12, max_rounds: 2000, box_only: false };
    let out = run_dr(&problems, &layout, &mut net, vec![DVector::zeros(2); 2], &settings).unwrap();
    for (k, t) in targets.iter().enumerate() {
        let expect = DVector::from_fn(2, |r, _| box_prox(0.5, -t[r], lower[r], upper[r]));
        assert!((&out.agents[k].w - expect).amax() <= 1e-9);
    }
    assert_eq!(net.messages, 0);
}

#[test]
fn messages_stay_on_graph_edges() {
    for p in [1, 3] {
        let (cfg, w) = preset_weights(PlatoonPreset::Medium, p);
        let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -2.0)).unwrap();
        let sol = solve_mpc(&prob, &SolverConfig::for_horizon(p), None).unwrap();
        assert!(sol.diagnostics.messages > 0);
        assert_eq!(sol.diagnostics.locality_violations, 0);
    }
}

#[test]
fn network_counts_non_edge_messages() {
    let layout = ConsensusLayout::new(1, |i| if i == 1 { vec![2] } else { vec![1] }, 3);
    let mut net = Network::new(&layout);
    assert!(net.send(1, 2));
    assert!(!net.send(1, 3));
    assert_eq!((net.messages, net.locality_violations), (2, 1));
}

#[test]
fn solves_are_deterministic() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 2);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -2.0)).unwrap();
    let sc = SolverConfig::for_horizon(2);
    let a = solve_mpc(&prob, &sc, None).unwrap();
    let b = solve_mpc(&prob, &sc, None).unwrap();
    assert_eq!(a.plan, b.plan);
    assert_eq!(a.diagnostics.inner_rounds, b.diagnostics.inner_rounds);
}

#[test]
fn round_result_ignores_agent_order() {
    let (cfg, w) = preset_weights(PlatoonPreset::Medium, 2);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -2.0)).unwrap();
    let layout = layout_of(&prob);
    let problems = linear_stage_problems(&prob, &layout);
    let settings = DrSettings { alpha: 0.9, rho: 0.1, tol: 0.0, max_rounds: 1, box_only: false };
    let z0 = layout.scatter(&prob.cruise_plan());
    let run = |order: &[usize]| {
        let mut net = Network::new(&layout);
        let mut agents = init_agents(&layout, &mut net, z0.clone());
        for _ in 0..20 {
            dr_round_ordered(&problems, &mut agents, &layout, &mut net, &settings, order).unwrap();
        }
        agents.into_iter().map(|a| a.z).collect::<Vec<_>>()
    };
    let forward: Vec<usize> = (0..10).collect();
    let mut shuffled = forward.clone();
    shuffled.reverse();
    shuffled.swap(2, 7);
    assert_eq!(run(&forward), run(&shuffled));
}

#[test]
fn scp_iterates_stay_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..6 {
        let preset = PlatoonPreset::ALL[k % 3];
        let p = 2 + k % 4;
        let cfg = sub_platoon(4, preset);
        let w = weight_preset(preset, p).truncated(4);
        let st = random_feasible_state(&cfg, &mut rng);
        let prob = MpcProblem::new(&cfg, &w, &st).unwrap();
        let sol = solve_mpc(&prob, &SolverConfig::for_horizon(p), None).unwrap();
        assert!(sol.diagnostics.max_violation <= 1e-6, "{:?}", sol.diagnostics);
        assert!(prob.violation(&sol.plan) <= 1e-6);
        if sol.diagnostics.converged {
            assert!(*sol.diagnostics.outer_steps.last().unwrap() <= SolverConfig::for_horizon(p).tol_outer * 2.0_f64.max(sol.plan.amax()));
        }
    }
}

#[test]
fn consensus_holds_at_convergence() {
    let (cfg, w) = preset_weights(PlatoonPreset::Large, 3);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -2.0)).unwrap();
    let layout = layout_of(&prob);
    let problems = linear_stage_problems(&prob, &layout);
    let sc = SolverConfig::for_horizon(3);
    let settings = DrSettings { alpha: sc.alpha, rho: sc.rho, tol: sc.tol_inner, max_rounds: 500, box_only: false };
    let mut net = Network::new(&layout);
    let (out, _) = run_dr_warm(&problems, &layout, &mut net, layout.scatter(&prob.cruise_plan()), &settings, 1e-7).unwrap();
    let ys: Vec<DVector<f64>> = out.agents.iter().map(|a| a.y.clone()).collect();
    assert!(layout.consensus_gap(&ys) <= 10.0 * sc.tol_inner);
}

#[test]
fn warm_start_shift_repeats_last_entry() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 3);
    let prob = MpcProblem::new(&cfg, &w, &PlatoonState::cruise(&cfg, 25.0)).unwrap();
    let prev = DVector::from_fn(30, |k, _| -(k as f64) * 0.1);
    let s = shift_plan(&prob, &prev);
    assert_eq!(s[0], prev[1]);
    assert_eq!(s[1], prev[2]);
    assert_eq!(s[2], prev[2]);
    assert_eq!(s[27], prev[28]);
    assert_eq!(s[29], prev[29]);
}

#[test]
fn solver_config_defaults() {
    let c2 = SolverConfig::for_horizon(2);
    assert_eq!((c2.tol_outer, c2.tol_inner, c2.nu, c2.stop_mode), (6.5e-3, 4e-3, 0.8, StopMode::MinAbsRel));
    let c5 = SolverConfig::for_horizon(5);
    assert_eq!((c5.tol_outer, c5.tol_inner, c5.nu, c5.stop_mode), (1.25e-2, 1e-2, 0.9, StopMode::Absolute));
    assert_eq!(SolverConfig::for_horizon(1).tol_outer, 2.5e-3);
    let mut bad = c2.clone();
    bad.alpha = 1.0;
    assert!(bad.validate().is_err());
}

#[test]
fn diagnostics_serialize() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 1);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -1.0)).unwrap();
    let sol = solve_mpc(&prob, &SolverConfig::for_horizon(1), None).unwrap();
    let js = serde_json::to_value(&sol.diagnostics).unwrap();
    assert_eq!(js["horizon"], 1);
    assert!(js["agent_seconds"].as_array().unwrap().len() == 10);
}

#[test]
fn lipschitz_values_follow_hessian_norms() {
    let (cfg, w) = preset_weights(PlatoonPreset::Medium, 3);
    let prob = MpcProblem::new(&cfg, &w, &perturbed(&cfg, -1.0)).unwrap();
    let layout = layout_of(&prob);
    let u = layout.scatter(&prob.cruise_plan());
    let unit = lipschitz_estimates(&prob, &layout, &u, Curvature { objective: 1.0, constraint: 1.0 });
    let scaled = lipschitz_estimates(&prob, &layout, &u, SolverConfig::for_horizon(3).curvature());
    for (a, b) in unit.iter().zip(&scaled) {
        assert!((b.objective - 0.8 * a.objective).abs() <= 1e-9 * a.objective);
        for (x, y) in a.safety.iter().zip(&b.safety) {
            assert!((y - 0.9 * x).abs() <= 1e-12 * (1.0 + x));
        }
        assert!(a.objective > 0.0);
    }
}

/// Evaluates the SCP constraint models of agent i at a local point and the
/// corresponding approximate constraint values.
fn model_and_truth(prob: &MpcProblem, layout: &ConsensusLayout, ap: &AgentProblem, y: &DVector<f64>) -> Vec<(f64, f64)> {
    let i = ap.agent;
    let p = prob.p;
    let own = DVector::from_fn(p, |k, _| y[local_indices(layout, i, &[i])[k]]);
    let pred = (i > 1).then(|| DVector::from_fn(p, |k, _| y[local_indices(layout, i, &[i - 1])[k]]));
    let mut truth = Vec::new();
    for j in 1..=p {
        let (q, _) = prob.speed(i, &own, j);
        truth.push(prob.config.v_min - q);
        truth.push(q - prob.config.v_max);
    }
    for j in 1..=p {
        truth.push(prob.safety(i, pred.as_ref(), &own, j).value);
    }
    ap.qcqp.constraints.iter().map(|c| c.value(y)).zip(truth).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scp_models_majorize_constraints(seed in 0u64..5_000, p in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_problem(&mut rng, p);
        let layout = layout_of(&prob);
        let u: DVector<f64> = DVector::from_fn(prob.dim(), |_, _| rng.random_range(-5.0..1.0));
        let local = layout.scatter(&u);
        let scales = Curvature { objective: 1.0, constraint: 1.5 };
        let (aps, _) = scp_subproblems(&prob, &layout, &local, scales, &vec![false; prob.n()]);
        for ap in &aps {
            let c = &local[ap.agent - 1];
            for (m, t) in model_and_truth(&prob, &layout, ap, c) {
                prop_assert!((m - t).abs() <= 1e-9 * (1.0 + t.abs()));
            }
            for _ in 0..10 {
                let d = DVector::from_fn(c.len(), |_, _| rng.random_range(-0.3..0.3));
                for (m, t) in model_and_truth(&prob, &layout, ap, &(c + d)) {
                    prop_assert!(m >= t - 1e-9, "model {m} below {t}");
                }
            }
        }
    }

    #[test]
    fn objective_model_is_tight_at_center(seed in 0u64..5_000, p in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_problem(&mut rng, p);
        let layout = layout_of(&prob);
        let u: DVector<f64> = DVector::from_fn(prob.dim(), |_, _| rng.random_range(-5.0..1.0));
        let local = layout.scatter(&u);
        let (aps, _) = scp_subproblems(&prob, &layout, &local, SolverConfig::for_horizon(p).curvature(), &vec![false; prob.n()]);
        let total: f64 = aps.iter().map(|ap| ap.qcqp.objective.value(&local[ap.agent - 1])).sum();
        prop_assert!((total - prob.objective(&u)).abs() <= 1e-8 * (1.0 + prob.objective(&u).abs()));
    }
}
