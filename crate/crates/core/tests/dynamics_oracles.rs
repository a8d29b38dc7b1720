//! Cross-checks of the Newton-Euler dynamics against the independent
//! closed-form planar Euler-Lagrange oracle and brute-force payload search.

use nalgebra::Vector6;
use paydiff_core::dynamics::{inverse_dynamics, max_supported_payload, MaxPayload};
use paydiff_core::model::{pendulum, planar2, planar3, FrictionParams, RobotModel};
use paydiff_core::trajectory::Trajectory;
use paydiff_oracles::payload_grid::grid_max_payload;
use paydiff_oracles::planar::{planar_energy, planar_params_from_model, planar_tau};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_state(model: &RobotModel, rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let q = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
    let qd = model.limits.iter().map(|l| rng.random_range(-l.v_max..l.v_max)).collect();
    let qdd = model.limits.iter().map(|l| rng.random_range(-l.a_max..l.a_max)).collect();
    (q, qd, qdd)
}

#[test]
fn rnea_matches_planar_lagrangian_oracle() {
    for model in [planar2(), planar3()] {
        let params = planar_params_from_model(&model).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..500 {
            let (q, qd, qdd) = random_state(&model, &mut rng);
            let tau = inverse_dynamics(&model, &q, &qd, &qdd, &Vector6::zeros()).unwrap();
            let mut expected = planar_tau(&params, &q, &qd, &qdd);
            for (j, fr) in model.friction.iter().enumerate() {
                expected[j] += fr.torque(qd[j]);
            }
            for j in 0..model.n_dof() {
                let scale = expected[j].abs().max(1.0);
                assert!(
                    (tau[j] - expected[j]).abs() / scale <= 1e-8,
                    "{}: joint {j}: rnea {} vs oracle {}",
                    model.name,
                    tau[j],
                    expected[j]
                );
            }
        }
    }
}

#[test]
fn energy_balance_without_friction() {
    // With zero friction and no external wrench, power tau . qd equals
    // d/dt (kinetic + potential) along a smooth analytic motion.
    let mut model = planar3();
    for fr in &mut model.friction {
        *fr = FrictionParams::zero();
    }
    let params = planar_params_from_model(&model).unwrap();
    let motion = |t: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let q = vec![0.9 + 0.4 * (1.3 * t).sin(), -0.6 + 0.5 * (0.9 * t).cos(), 0.3 * (1.7 * t).sin()];
        let qd = vec![0.4 * 1.3 * (1.3 * t).cos(), -0.5 * 0.9 * (0.9 * t).sin(), 0.3 * 1.7 * (1.7 * t).cos()];
        let qdd = vec![
            -0.4 * 1.3 * 1.3 * (1.3 * t).sin(),
            -0.5 * 0.9 * 0.9 * (0.9 * t).cos(),
            -0.3 * 1.7 * 1.7 * (1.7 * t).sin(),
        ];
        (q, qd, qdd)
    };
    let h = 1e-5;
    for &t in &[0.0, 0.4, 1.1, 2.3] {
        let (q, qd, qdd) = motion(t);
        let tau = inverse_dynamics(&model, &q, &qd, &qdd, &Vector6::zeros()).unwrap();
        let power: f64 = tau.iter().zip(&qd).map(|(a, b)| a * b).sum();
        let (qp, qdp, _) = motion(t + h);
        let (qm, qdm, _) = motion(t - h);
        let de_dt = (planar_energy(&params, &qp, &qdp) - planar_energy(&params, &qm, &qdm)) / (2.0 * h);
        assert!((power - de_dt).abs() <= 1e-6 * de_dt.abs().max(1.0), "t={t}: {power} vs {de_dt}");
    }
}

#[test]
fn pendulum_max_payload_matches_grid() {
    let model = pendulum(0.0, 1.0, 50.0);
    let static_traj = Trajectory::new(0.1, 1, vec![0.0; 6]).unwrap();
    let closed = max_supported_payload(&model, &static_traj).unwrap().mass().unwrap();
    let grid = grid_max_payload(&model, &static_traj, 1e-4).unwrap();
    assert!((closed - grid).abs() <= 1e-3, "closed {closed} vs grid {grid}");
}

#[test]
fn closed_form_max_payload_matches_grid_on_random_motions() {
    let model = planar3();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 40 {
        let q0: Vec<f64> = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
        let q1: Vec<f64> = model.limits.iter().map(|l| rng.random_range(l.q_min..l.q_max)).collect();
        let horizon = 40;
        let positions: Vec<Vec<f64>> = (0..horizon)
            .map(|t| {
                let s = t as f64 / (horizon - 1) as f64;
                let blend = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
                q0.iter().zip(&q1).map(|(a, b)| a + (b - a) * blend).collect()
            })
            .collect();
        let traj = Trajectory::from_positions(0.12, 3, &positions).unwrap();
        match max_supported_payload(&model, &traj).unwrap() {
            MaxPayload::Supported(m) => {
                checked += 1;
                let grid = grid_max_payload(&model, &traj, 1e-4).unwrap();
                assert!((m - grid).abs() <= 1e-3, "closed form {m} vs grid {grid}");
            }
            MaxPayload::InfeasibleAtZero => continue,
        }
    }
}
