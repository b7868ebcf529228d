use tsd_core::lmi::Method;
use tsd_core::model::example22;
use tsd_core::sim::{self, SimOptions, Trajectory};
use tsd_core::synth::{self, SynthOptions, SynthesisReport};

fn fixture() -> (tsd_core::model::NetworkModel, SynthesisReport) {
    let net = example22();
    let report = synth::synthesize(&net, &SynthOptions::with_method(Method::Corollary1)).unwrap();
    assert!(report.all_feasible());
    (net, report)
}

fn x0() -> Vec<Vec<f64>> {
    vec![vec![1.0, -1.0], vec![-1.0, 0.5]]
}

fn run(dt: f64, t_end: f64) -> Trajectory {
    let (net, report) = fixture();
    sim::simulate(
        &net,
        &report,
        &x0(),
        &SimOptions {
            dt,
            t_end,
            open_loop: false,
        },
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn step_halving_changes_the_final_state_negligibly() {
    let coarse = run(1e-3, 10.0);
    let fine = run(5e-4, 10.0);
    let (a, b) = (coarse.final_state(), fine.final_state());
    let diff: f64 = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = fine.state_norm(fine.t.len() - 1);
    assert!(diff / norm < 1e-6, "relative change {:e}", diff / norm);
}

#[test]
fn energies_match_a_finer_integration() {
    let coarse = run(1e-3, 10.0);
    let fine = run(1e-4, 10.0);
    for (c, f) in coarse.subsystems.iter().zip(&fine.subsystems) {
        let (cs, fs) = (c.state_energy.last().unwrap(), f.state_energy.last().unwrap());
        let (cp, fp) = (c.phi_energy.last().unwrap(), f.phi_energy.last().unwrap());
        assert!(rel(*cs, *fs) < 1e-4, "{}: state {cs} vs {fs}", c.name);
        assert!(rel(*cp, *fp) < 1e-4, "{}: phi {cp} vs {fp}", c.name);
    }
}

#[test]
fn dissipation_rate_is_nonpositive_along_the_trajectory() {
    let (_, report) = fixture();
    let traj = run(1e-3, 10.0);
    let worst = sim::max_dissipation_rate(&traj, &report.rhos());
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn lyapunov_values_are_positive_and_decay() {
    let traj = run(1e-3, 10.0);
    for s in &traj.subsystems {
        assert!(s.lyapunov.iter().all(|&v| v >= 0.0));
        assert!(s.lyapunov.last().unwrap() < &(1e-6 * s.lyapunov[0]));
    }
}

#[test]
fn trajectory_csv_is_bytewise_deterministic() {
    let a = run(1e-3, 2.0);
    let b = run(1e-3, 2.0);
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    sim::write_csv(&a, &mut ba).unwrap();
    sim::write_csv(&b, &mut bb).unwrap();
    assert_eq!(ba, bb);
    assert_eq!(String::from_utf8(ba).unwrap().lines().count(), a.t.len() + 1);
}
