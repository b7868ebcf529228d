use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tsd_core::lmi::{AssemblyOptions, Method, SubsystemLmis};
use tsd_core::model::{example22, NetworkModel};
use tsd_core::synth::{self, SubsystemResult, SynthOptions};

fn cor1() -> SynthOptions {
    SynthOptions::with_method(Method::Corollary1)
}

/// Uniform point on the probability simplex.
fn simplex_point(rng: &mut StdRng, parts: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..parts).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.max()
}

#[test]
fn no_control_authority_with_unstable_vertex_is_infeasible() {
    let mut net = example22();
    for sub in &mut net.subsystems {
        for b in &mut sub.b {
            b.fill(0.0);
        }
    }
    net.subsystems[0].a[0] = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    for method in [Method::Theorem1, Method::Corollary1] {
        let report = synth::synthesize(&net, &SynthOptions::with_method(method)).unwrap();
        assert!(!report.subsystems[0].feasible, "{method}");
        assert!(!report.all_feasible());
    }
}

fn same_certificate(a: &SubsystemResult, b: &SubsystemResult) {
    assert_eq!(a.name, b.name);
    assert_eq!(a.feasible, b.feasible);
    assert_eq!(a.rho.to_bits(), b.rho.to_bits());
    assert_eq!(a.rho_min.to_bits(), b.rho_min.to_bits());
    assert_eq!(a.x1, b.x1);
    assert_eq!(a.x3, b.x3);
    assert_eq!(a.x4, b.x4);
    assert_eq!(a.k, b.k);
    assert_eq!(a.solver, b.solver);
}

#[test]
fn permuting_subsystems_permutes_results_bitwise() {
    let net = example22();
    let mut subs = net.subsystems.clone();
    subs.reverse();
    let swapped = NetworkModel::new(subs).unwrap();
    for method in [Method::Theorem1, Method::Corollary1] {
        let opts = SynthOptions::with_method(method);
        let a = synth::synthesize(&net, &opts).unwrap();
        let b = synth::synthesize(&swapped, &opts).unwrap();
        for res in &a.subsystems {
            same_certificate(res, b.get(&res.name).unwrap());
        }
    }
}

#[test]
fn stronger_coupling_does_not_lower_optimal_rho() {
    let net = example22();
    let mut strong = net.clone();
    for sub in &mut strong.subsystems {
        for fs in sub.f.values_mut() {
            for f in fs {
                *f *= 2.0;
            }
        }
    }
    let base = synth::synthesize(&net, &cor1()).unwrap();
    let doubled = synth::synthesize(&strong, &cor1()).unwrap();
    assert!(base.all_feasible());
    // Slack covers the solver's reduced-accuracy acceptance on μ.
    for (a, b) in base.subsystems.iter().zip(&doubled.subsystems) {
        if b.feasible {
            assert!(b.rho_min >= a.rho_min * (1.0 - 1e-5), "{}: {} -> {}", a.name, a.rho_min, b.rho_min);
        }
    }
}

#[test]
fn relaxed_certificate_covers_random_blends() {
    let net = example22();
    let report = synth::synthesize(&net, &cor1()).unwrap();
    assert!(report.all_feasible());
    let mut rng = StdRng::seed_from_u64(7);
    for (i, res) in report.subsystems.iter().enumerate() {
        let sub = &net.subsystems[i];
        let ctx = SubsystemLmis::new(&net, i, Method::Corollary1, &AssemblyOptions::default()).unwrap();
        let y = res.decision_vector(sub).unwrap();
        let (l, r) = (sub.left_rule_count(), sub.right_rule_count());
        for alpha in ctx.peers() {
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..250 {
                let v = simplex_point(&mut rng, l);
                let h = simplex_point(&mut rng, r);
                let mut acc: Option<DMatrix<f64>> = None;
                for j in 0..l {
                    for k in 0..r {
                        for s in 0..r {
                            let m = ctx.vertex(alpha, j, k, s).unwrap().eval(&y) * (v[j] * h[k] * h[s]);
                            acc = Some(match acc {
                                Some(a) => a + m,
                                None => m,
                            });
                        }
                    }
                }
                worst = worst.max(max_eig(&acc.unwrap()));
            }
            assert!(worst <= 1e-9, "{} towards peer {alpha}: {worst:e}", res.name);
        }
    }
}

#[test]
fn lattice_check_with_many_samples_passes() {
    let net = example22();
    let report = synth::synthesize(&net, &cor1()).unwrap();
    for v in synth::verify_blended(&net, &report, 14, 1e-6).unwrap() {
        assert!(v.samples >= 200);
        assert!(v.pass, "{v:?}");
    }
}

#[test]
fn result_file_round_trip_preserves_the_check() {
    let net = example22();
    let report = synth::synthesize(&net, &cor1()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("result.json");
    report.save(&path).unwrap();
    let back = synth::SynthesisReport::load(&path).unwrap();
    assert_eq!(back, report);
    let checks = synth::verify_blended(&net, &back, 5, 1e-6).unwrap();
    for (v, res) in checks.iter().zip(&report.subsystems) {
        assert_eq!(v, &res.verification);
    }
}
