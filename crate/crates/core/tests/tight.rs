use num_complex::Complex64;
use proptest::prelude::*;

use tightbound::states::photocount_dist;
use tightbound::tight::{max_violation, verify_statement2, TightFamily};
use tightbound::{DetectorModel, StateSpec};

fn family(pnr: bool, n: usize) -> TightFamily {
    let det = if pnr { DetectorModel::pnr(n) } else { DetectorModel::click(n) }.unwrap();
    TightFamily::new(&det).unwrap()
}

#[test]
fn pnr_node_near_zero_keeps_its_direction() {
    // N t^(N-1) and e^(-u) underflow here; the normal must still be exact
    let fam = family(true, 5);
    for t1 in [1e-3, 1e-20, 1e-120, 1e-300] {
        for tau in [0.0, 1.0] {
            let tf = fam.lambda(&[t1, 0.6], tau).unwrap();
            let (l, rhs) = tf.unit();
            assert!((l.norm() - 1.0).abs() < 1e-12);
            let at = |t: f64| l.dot(&fam.detector.point_at(t)) - rhs;
            assert!(at(0.6).abs() < 1e-12 && at(tau).abs() < 1e-12, "t1 = {t1:e}, tau = {tau}: {} {} {:?}", at(0.6), at(tau), tf);
        }
    }
}

#[test]
fn small_node_limit_is_continuous() {
    let fam = family(true, 5);
    let s = StateSpec::phase_squeezed(Complex64::new(0.2, 0.0), 0.57, 0.7).unwrap();
    let p = photocount_dist(&s, &fam.detector).unwrap();
    let q = p.independent();
    let m: Vec<f64> = [1e-4, 1e-8, 1e-16, 1e-64]
        .iter()
        .map(|&t| fam.lambda(&[t, 0.727], 1.0).unwrap().unit_margin(q))
        .collect();
    assert!(m.iter().all(|&x| x > 0.0), "{m:?}");
    // the row directions approach their limit like 1/u with u = -N ln t
    assert!(m.windows(2).all(|w| w[1] > w[0]), "{m:?}");
    assert!(m[3] - m[2] < m[2] - m[1] && m[3] - m[0] < 1e-3, "{m:?}");
}

#[test]
fn phase_squeezed_vacuum_violates_for_both_detectors() {
    for pnr in [true, false] {
        let det = family(pnr, 5).detector;
        let s = StateSpec::phase_squeezed(Complex64::new(0.0, 0.0), 0.57, 0.7).unwrap();
        let p = photocount_dist(&s, &det).unwrap();
        let r = max_violation(&p, &det, 2, 3, 9).unwrap();
        assert!(r.margin > 1e-3, "{det}: {}", r.margin);
        assert!((r.lambda.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn coherent_states_never_violate() {
    for pnr in [true, false] {
        let det = family(pnr, 5).detector;
        for a in [0.0, 0.4, 1.1, 2.3] {
            let p = photocount_dist(&StateSpec::coherent(Complex64::new(a, 0.3), 1.0).unwrap(), &det).unwrap();
            let r = max_violation(&p, &det, 2, 2, 1).unwrap();
            assert!(r.margin <= 1e-9, "{det} alpha = {a}: {}", r.margin);
        }
    }
}

#[test]
fn closely_spaced_nodes_at_n7() {
    // nearly dependent constraint rows; the normal comes from the null space
    for pnr in [true, false] {
        let fam = family(pnr, 7);
        let tf = fam.lambda(&[0.0708, 0.0871, 0.1286], 0.0).unwrap();
        assert!(tf.orthogonality_residual() < 1e-9);
        let r = verify_statement2(&tf).unwrap();
        assert!(r.global_max_at_nodes, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equal_values_at_nodes_and_endpoint(
        a in 0.02f64..0.45, b in 0.55f64..0.98, tau1 in any::<bool>(), pnr in any::<bool>(),
    ) {
        let fam = family(pnr, 5);
        let tau = if tau1 { 1.0 } else { 0.0 };
        let tf = fam.lambda(&[a, b], tau).unwrap();
        let (l, rhs) = tf.unit();
        for t in [a, b, tau] {
            prop_assert!((l.dot(&fam.detector.point_at(t)) - rhs).abs() < 1e-9);
        }
        let r = verify_statement2(&tf).unwrap();
        prop_assert!(r.max_excess <= 1e-9);
    }
}

#[test]
fn n2_optimum_agrees_with_the_envelope() {
    use tightbound::tight::{nonlinear_n2, optimal_violation};
    for pnr in [true, false] {
        let det = if pnr { DetectorModel::pnr(2) } else { DetectorModel::click(2) }.unwrap();
        for (n, eta) in [(1, 0.7), (2, 0.3), (0, 1.0)] {
            let p = photocount_dist(&StateSpec::fock(n, eta).unwrap(), &det).unwrap();
            let r = optimal_violation(&p, &det, 1, 0).unwrap();
            let env = nonlinear_n2(&p, &det).unwrap().value;
            assert_eq!(r.margin > 1e-9, env > 1e-9, "{det} n={n}: {} vs {env}", r.margin);
            assert!(r.tau.is_none());
        }
    }
    assert!(optimal_violation(
        &photocount_dist(&StateSpec::vacuum(), &DetectorModel::click(4).unwrap()).unwrap(),
        &DetectorModel::click(4).unwrap(),
        1,
        0
    )
    .is_err());
}
