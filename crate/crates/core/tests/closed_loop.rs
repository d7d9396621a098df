use nalgebra::DVector;
use platoon_mpc::closed_loop::*;
use platoon_mpc::distributed::SolverConfig;
use platoon_mpc::platoon::{PlatoonConfig, PlatoonState, TrackingState};
use platoon_mpc::presets::{platoon_preset, weight_preset, PlatoonPreset, WeightSchedule};
use proptest::prelude::*;

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

#[test]
fn one_step_constructions_agree() {
    for preset in PlatoonPreset::ALL {
        let (cfg, w) = preset_weights(preset, 1);
        let cl = build_closed_loop(&cfg, &w).unwrap();
        let direct = one_step_closed_loop(&cfg, &w).unwrap();
        assert!((&cl.a_c - direct).amax() <= 1e-10, "{preset}");
        assert!((&cl.a_c - (&cl.a + &cl.b * &cl.k)).amax() == 0.0);
    }
}

#[test]
fn controller_is_invariant_to_weight_scaling() {
    let (cfg, w) = preset_weights(PlatoonPreset::Medium, 3);
    let a = build_closed_loop(&cfg, &w).unwrap();
    let b = build_closed_loop(&cfg, &w.scaled(7.5)).unwrap();
    assert!((&a.k - &b.k).amax() <= 1e-9);
    assert!((&a.d - &b.d).amax() <= 1e-9);
    assert!((&a.a_c - &b.a_c).amax() <= 1e-9);
}

#[test]
fn hessian_is_symmetric_positive_definite() {
    let (cfg, w) = preset_weights(PlatoonPreset::Large, 4);
    let cl = build_closed_loop(&cfg, &w).unwrap();
    assert!((&cl.h - cl.h.transpose()).amax() <= 1e-9);
    assert!(cl.h.clone().symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn closed_loops_are_schur_stable() {
    for preset in PlatoonPreset::ALL {
        for p in 1..=5 {
            let (cfg, w) = preset_weights(preset, p);
            let s = schur_check(&build_closed_loop(&cfg, &w).unwrap().a_c);
            assert!(s.stable, "{preset} p={p}: radius {}", s.radius);
        }
    }
}

#[test]
fn zero_gain_is_not_stable() {
    let (a, _) = platoon_mpc::closed_loop::matrices::tracking_dynamics(4, 1.0);
    let s = schur_check(&a);
    assert!((s.radius - 1.0).abs() < 1e-12);
    assert!(!s.stable);
}

#[test]
fn equilibrium_inputs() {
    let small = platoon_preset(PlatoonPreset::Small);
    let we = equilibrium_we(&small, 25.0);
    assert!((we[0] + 0.21505).abs() < 1e-12);
    assert!(we.rows(1, 9).iter().all(|&x| x == 0.0));
    assert!(equilibrium_we(&drag_free(PlatoonPreset::Medium), 25.0).iter().all(|&x| x == 0.0));
}

#[test]
fn closed_form_steady_state_errors() {
    for (preset, expect) in [(PlatoonPreset::Small, 0.0571), (PlatoonPreset::Medium, 0.0941), (PlatoonPreset::Large, 0.1138)] {
        let (cfg, w) = preset_weights(preset, 1);
        let z = steady_state_closed_form(&cfg, &w, 25.0);
        assert!((z.amax() - expect).abs() <= 2e-3, "{preset}: {}", z.amax());
    }
}

#[test]
fn steady_state_scales_with_weight_ratio() {
    let (cfg, w) = preset_weights(PlatoonPreset::Medium, 1);
    let mut w2 = w.clone();
    for z in &mut w2.zeta[0] {
        *z *= 2.0;
    }
    let a = steady_state_closed_form(&cfg, &w, 25.0);
    let b = steady_state_closed_form(&cfg, &w2, 25.0);
    assert!((b - a * 2.0).amax() <= 1e-15);
}

#[test]
fn drag_mismatch_splits_into_linear_and_quadratic_parts() {
    let cfg = platoon_preset(PlatoonPreset::Medium);
    let zp = DVector::from_fn(10, |k, _| ((k as f64) * 0.7).sin());
    let v0 = 23.0;
    let h = drag_mismatch(&cfg, &zp, v0);
    let split = drag_matrix(&cfg) * &zp * v0 + h_tilde(&cfg, &zp);
    assert!((h - split).amax() <= 1e-12);
    assert!(h_tilde(&cfg, &DVector::zeros(10)).iter().all(|&x| x == 0.0));
    assert!(drag_mismatch(&cfg, &DVector::zeros(10), v0).iter().all(|&x| x == 0.0));
}

#[test]
fn drag_mismatch_matches_speed_definition() {
    let cfg = platoon_preset(PlatoonPreset::Large);
    let mut st = PlatoonState::cruise(&cfg, 22.0);
    for i in 1..=10 {
        st.v[i] = 22.0 + 0.3 * (i as f64).cos();
    }
    let t = TrackingState::from_state(&st, cfg.delta);
    let h = drag_mismatch(&cfg, &DVector::from_vec(t.zp.clone()), st.v[0]);
    for i in 1..=10 {
        let own = cfg.c2(i) * (st.v[i].powi(2) - st.v[0].powi(2));
        let pred = cfg.c2(i - 1) * (st.v[i - 1].powi(2) - st.v[0].powi(2));
        assert!((h[i - 1] - (own - pred)).abs() <= 1e-12);
    }
}

#[test]
fn drag_perturbation_shape() {
    let cfg = platoon_preset(PlatoonPreset::Small);
    let d = drag_perturbation(&cfg, 25.0);
    assert!(d.columns(0, 10).iter().all(|&x| x == 0.0));
    let dm = drag_matrix(&cfg) * 25.0;
    assert!((d.view((10, 10), (10, 10)) - &dm).amax() <= 1e-15);
}

#[test]
fn cruise_without_drag_stays_at_equilibrium() {
    let cfg = drag_free(PlatoonPreset::Medium);
    let w = weight_preset(PlatoonPreset::Medium, 1);
    let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::Cruise, &SimOptions::new(30)).unwrap();
    for s in tr.states() {
        let t = TrackingState::from_state(s, cfg.delta);
        assert!(t.max_diff(&TrackingState::zeros(10)) <= 1e-9);
    }
}

#[test]
fn drag_free_pipeline_follows_linear_closed_loop() {
    let cfg = drag_free(PlatoonPreset::Small);
    let w = weight_preset(PlatoonPreset::Small, 1);
    let mut sc = SolverConfig::for_horizon(1);
    sc.tol_outer = 1e-10;
    sc.max_inner = 5000;
    let scenario = Scenario::brake_recover();
    let tr = simulate(&cfg, &w, &sc, &scenario, &SimOptions::new(130)).unwrap();
    let lin = simulate_linear_reference(&cfg, &w, &scenario, 130).unwrap();
    for (s, x) in tr.states().zip(&lin) {
        let got = tracking_vector(&TrackingState::from_state(s, cfg.delta));
        assert!((got - x).amax() <= 1e-5);
    }
}

#[test]
fn tracking_identity_holds_along_trajectories() {
    let (cfg, w) = preset_weights(PlatoonPreset::Large, 1);
    let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::brake_recover(), &SimOptions::new(120)).unwrap();
    assert!(tr.tracking_mismatch <= 1e-9);
}

#[test]
fn oscillating_leader_keeps_spacing_bounded() {
    for preset in PlatoonPreset::ALL {
        let (cfg, w) = preset_weights(preset, 1);
        let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::Oscillating, &SimOptions::new(150)).unwrap();
        let worst = (1..=10).map(|i| tr.max_spacing_deviation(i)).fold(0.0, f64::max);
        assert!(worst <= 1.0, "{preset}: {worst}");
    }
}

#[test]
fn homogeneous_steady_state_lives_on_first_vehicle() {
    for preset in [PlatoonPreset::Small, PlatoonPreset::Large] {
        let (cfg, w) = preset_weights(preset, 1);
        let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::Cruise, &SimOptions::new(60)).unwrap();
        let z = tr.final_tracking().z;
        let expect = steady_state_closed_form(&cfg, &w, 25.0);
        assert!((z[0] - expect[0]).abs() <= 1e-3);
        assert!(z[1..].iter().all(|x| x.abs() <= 1e-4), "{preset}: {z:?}");
    }
}

#[test]
fn longer_horizon_steady_state_is_simulated() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 2);
    let ss = steady_state_error(&cfg, &w, &SolverConfig::for_horizon(2), 25.0).unwrap();
    assert!(!ss.closed_form);
    assert!(ss.z_ss[0] > 0.0 && ss.z_ss.amax() < 0.5);
    let (cfg1, w1) = preset_weights(PlatoonPreset::Small, 1);
    assert!(steady_state_error(&cfg1, &w1, &SolverConfig::for_horizon(1), 25.0).unwrap().closed_form);
}

#[test]
fn scenario_profiles() {
    let s1 = Scenario::brake_recover();
    assert_eq!(s1.events(150), vec![(51, 54), (101, 108)]);
    let total: f64 = (0..150).map(|k| s1.leader_input(k)).sum();
    assert_eq!(total, 0.0);
    let s3 = Scenario::BrakeRecover { decel_steps: 3 };
    assert_eq!(s3.events(150), vec![(51, 53), (101, 106)]);
    let s2 = Scenario::Oscillating;
    let inputs: Vec<f64> = (51..55).map(|k| s2.leader_input(k)).collect();
    assert_eq!(inputs, vec![1.0, 1.0, -1.0, -1.0]);
    assert_eq!((0..150).map(|k| s2.leader_input(k)).sum::<f64>(), 0.0);
    assert_eq!(s2.leader_input(99), 0.0);
}

#[test]
fn leader_trace_round_trip_and_clipping() {
    let dir = std::env::temp_dir().join(format!("platoon-trace-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("leader.csv");
    let trace = LeaderTrace::from_speeds(vec![20.0, 21.0, 24.0, 14.0, 14.5], 1.0).unwrap();
    assert_eq!(trace.inputs, vec![1.0, 1.8, -8.0, 0.5]);
    assert_eq!(trace.clipped, 2);
    trace.save(&path).unwrap();
    let back = LeaderTrace::load(&path).unwrap();
    assert_eq!(back, trace);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shipped_trace_matches_generator() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/leader_synthetic.csv");
    let shipped = LeaderTrace::load(&path).unwrap();
    let fresh = synthetic_leader_trace(shipped.speeds.len() - 1, shipped.tau);
    assert_eq!(shipped.speeds, fresh.speeds);
    assert_eq!(shipped.clipped, 0);
}

#[test]
fn recorded_scenario_runs_feasibly() {
    let (cfg, w) = preset_weights(PlatoonPreset::Medium, 1);
    let sc = Scenario::Recorded(synthetic_leader_trace(300, 1.0));
    let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &sc, &SimOptions::new(200)).unwrap();
    assert_eq!(tr.records.len(), 200);
    assert!((1..=10).all(|i| tr.max_spacing_deviation(i) < 5.0));
}

#[test]
fn trajectory_csv_layout() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 1);
    let tr = simulate(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::Cruise, &SimOptions::new(3)).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 4 + 30);
    assert_eq!(&header[..5], &["k", "t", "v0", "u0", "S_0_1"]);
    assert_eq!(lines.count(), 3);
}

#[test]
fn infeasible_start_is_reported_with_step() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 1);
    let mut st = PlatoonState::cruise(&cfg, 25.0);
    st.x[3] = st.x[2] - 5.0;
    let err = simulate_from(&cfg, &w, &SolverConfig::for_horizon(1), &Scenario::Cruise, &SimOptions::new(5), st).unwrap_err();
    assert!(err.to_string().starts_with("step 0"), "{err}");
}

fn weights_from(alpha: Vec<f64>, beta: Vec<f64>, zeta: Vec<f64>) -> WeightSchedule {
    WeightSchedule { p: 1, alpha: vec![alpha], beta: vec![beta], zeta: vec![zeta] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_step_agreement_for_random_weights(
        a in prop::collection::vec(1.0f64..400.0, 4),
        b in prop::collection::vec(0.0f64..200.0, 4),
        z in prop::collection::vec(0.5f64..300.0, 4),
    ) {
        let cfg = sub_platoon(4, PlatoonPreset::Medium);
        let w = weights_from(a, b, z);
        let cl = build_closed_loop(&cfg, &w).unwrap();
        let direct = one_step_closed_loop(&cfg, &w).unwrap();
        prop_assert!((&cl.a_c - direct).amax() <= 1e-9);
    }

    #[test]
    fn h_tilde_is_second_order(scale in 1e-3f64..1.0, seed in 0u64..1000) {
        let cfg = platoon_preset(PlatoonPreset::Medium);
        let zp = DVector::from_fn(10, |k, _| ((k as f64 + seed as f64) * 1.3).sin()) * scale;
        let ht = h_tilde(&cfg, &zp);
        let c2max = cfg.vehicles.iter().map(|v| v.c2).fold(0.0, f64::max);
        let bound = 2.0 * c2max * (10.0 * zp.amax()).powi(2);
        prop_assert!(ht.amax() <= bound);
    }
}

#[test]
fn linear_reference_starts_at_origin() {
    let (cfg, w) = preset_weights(PlatoonPreset::Small, 2);
    let lin = simulate_linear_reference(&cfg, &w, &Scenario::Cruise, 5).unwrap();
    assert!(lin.iter().all(|x| x.amax() == 0.0));
}
