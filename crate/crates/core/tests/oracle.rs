mod common;

use linengine::config::OracleSettings;
use linengine::oracle::*;

fn small(cfg: &linengine::model::EngineConfig, modes: usize) -> OracleModel {
    let settings = OracleSettings { n_modes: modes, ..Default::default() };
    build_model(cfg, &settings).unwrap().0
}

#[test]
fn lab_flow_is_symplectic() {
    let cfg = common::two_bath(0.2);
    let model = small(&cfg, 5);
    let phi = fundamental_matrix(&model, 0.0, model.period(), 2000);
    let j = model.symplectic_form();
    let err = (&phi * &j * phi.transpose() - &j).amax();
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn interaction_picture_matches_dense_lab_propagation() {
    let cfg = common::two_bath(0.2);
    let model = small(&cfg, 6);
    let state0 = initial_covariance(&model, &cfg, 0.0).unwrap();
    let steps = 400;
    let t1 = 2.0 * model.period();
    let dt = t1 / steps as f64;
    let mut state = state0.clone();
    evolve(&model, &mut state, dt, steps).unwrap();
    let f = model.to_lab(state.time);
    let lab_ip = &f * &state.sigma * f.transpose();
    let phi = fundamental_matrix(&model, 0.0, t1, 4 * steps);
    let lab = &phi * &state0.sigma * phi.transpose();
    let err = (&lab_ip - &lab).amax() / lab.amax();
    assert!(err < 1e-7, "{err:e}");
}

#[test]
fn uncoupled_baths_keep_their_energy() {
    let mut cfg = common::two_bath(0.2);
    for r in &mut cfg.reservoirs {
        r.density.profile = linengine::model::SpectralProfile::OhmicExponential { gamma: 0.0, cutoff: 1.0 };
    }
    let model = small(&cfg, 20);
    let mut state = initial_covariance(&model, &cfg, 0.0).unwrap();
    let traj = evolve(&model, &mut state, model.period() / 64.0, 256).unwrap();
    for series in &traj.bath_energy {
        let e0 = series[0];
        assert!(series.iter().all(|e| (e - e0).abs() <= 1e-12 * e0));
    }
    assert!(traj.interaction_energy.iter().all(|&e| e == 0.0));
}

#[test]
fn energy_balance_and_physicality_along_a_run() {
    let cfg = common::two_bath(0.2);
    let model = small(&cfg, 40);
    let mut state = initial_covariance(&model, &cfg, 0.7).unwrap();
    assert!(state.physicality(&model) > -1e-12);
    let dt = model.period() / 128.0;
    let traj = evolve(&model, &mut state, dt, 128 * 6).unwrap();
    let n = traj.times.len();
    let work: f64 = (0..n - 1).map(|i| 0.5 * (traj.power[i] + traj.power[i + 1]) * dt).sum();
    let de = traj.total_energy(n - 1) - traj.total_energy(0);
    let scale = traj.power.iter().fold(0.0f64, |a, p| a.max(p.abs())) * dt * n as f64;
    assert!((de - work).abs() < 1e-4 * scale, "dE = {de:e}, W = {work:e}");
    let p = state.physicality(&model);
    assert!(p > -1e-10 * state.sigma.amax(), "{p:e}");
}

#[test]
fn horizon_and_step_guards() {
    let cfg = common::two_bath(0.2);
    let model = small(&cfg, 10);
    let mut state = initial_covariance(&model, &cfg, 0.0).unwrap();
    let too_long = (model.horizon / 0.05).ceil() as usize + 1;
    assert!(matches!(evolve(&model, &mut state, 0.05, too_long), Err(linengine::Error::StaleWindow(_))));
    assert!(matches!(evolve(&model, &mut state, 1.0, 1), Err(linengine::Error::Domain(_))));
}

#[test]
fn fit_recovers_a_linear_slope() {
    let spp = 8;
    let periods = 20;
    let mut traj = Trajectory { labels: vec!["a".into()], dt: 0.1, ..Default::default() };
    let mut series = Vec::new();
    for i in 0..spp * periods {
        let t = 0.1 * i as f64;
        traj.times.push(t);
        series.push(3.0 - 0.25 * t + 0.01 * (2.0 * std::f64::consts::PI * t / 0.8).sin());
        traj.system_energy.push(0.0);
        traj.interaction_energy.push(0.0);
        traj.power.push(1.0);
    }
    traj.bath_energy.push(series);
    let fit = fit_currents(&traj, spp, 5, 15, STALE_TOL).unwrap();
    assert!((fit.bath_currents[0] + 0.25).abs() < 1e-10);
    assert_eq!(fit.power, 1.0);
}

fn settings(n_modes: usize, periods: usize) -> OracleSettings {
    OracleSettings { n_modes, periods, ..Default::default() }
}

#[test]
fn equal_temperatures_carry_no_net_heat() {
    let mut cfg = common::two_bath(0.0);
    cfg.reservoirs[1].occupation = cfg.reservoirs[0].occupation.clone();
    let run = run_oracle(&cfg, &settings(150, 40)).unwrap();
    // reference scale: the hot/cold static current is about 3.7e-2
    for c in &run.fit.bath_currents {
        assert!(c.abs() < 1e-3, "{:?}", run.fit.bath_currents);
    }
}

#[test]
fn driven_single_bath_absorbs_work() {
    let cfg = common::single(0.2, 1.0);
    let run = run_oracle(&cfg, &settings(300, 30)).unwrap();
    assert!(run.fit.power > 0.0);
    assert!(run.fit.bath_currents[0] > 0.0);
    assert!(run.fit.system_drift.abs() < 0.05 * run.fit.power, "{:?}", run.fit);
}
