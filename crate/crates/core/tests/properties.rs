//! Property suite: the mathematical invariants the modules promise, checked
//! against independent oracles where one exists.

mod common;

use common::{jacobi_eigenvalues, random_strongly_connected, seeded, singular_values_oracle};
use nalgebra::{DMatrix, DVector};
use ppfsync_core::engine::run_scenario;
use ppfsync_core::graph::{gain_check, lemma1_pq, max_singular_value, min_singular_value};
use ppfsync_core::ppf::{
    self, r_coeff, smooth_s, transform_erf, transform_sign, PerformanceFunction, TransformConfig,
    TransformVariant,
};
use ppfsync_core::scenario::{load_scenario, Overrides};
use proptest::prelude::*;
use rand::Rng;

fn shape_pair() -> impl Strategy<Value = (f64, f64)> {
    // delta_under < delta_bar, the wider-upper branch
    (0.2f64..4.0, 0.3f64..8.0).prop_map(|(du, gap)| (du + gap, du))
}

proptest! {
    #[test]
    fn smooth_s_is_strictly_increasing_and_bounded((db, du) in shape_pair(), seed in 0u64..1000) {
        let tc = TransformConfig::new(db, du, 20.0, TransformVariant::SignExact).unwrap();
        let mut rng = seeded(seed);
        // strictness is checked where f64 can still resolve the approach to
        // the asymptotes, and only between points far enough apart for the
        // slope there to produce a representable difference
        let mut grid: Vec<f64> = (0..200).map(|_| rng.random_range(-12.0..12.0)).collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|b, a| *b - *a < 1e-4);
        let mut prev = f64::NEG_INFINITY;
        for &eps in &grid {
            let s = smooth_s(eps, &tc);
            prop_assert!(s > -du && s < db, "S out of range: {s}");
            prop_assert!(s > prev, "not increasing at eps={eps}");
            prev = s;
        }
        for eps in [-1e6, -400.0, -30.0, 30.0, 400.0, 1e6] {
            let s = smooth_s(eps, &tc);
            prop_assert!((-du..=db).contains(&s));
        }
    }

    #[test]
    fn transform_roundtrip_reproduces_the_ratio((db, du) in shape_pair(), mag in 0f64..1f64, positive in any::<bool>()) {
        let tc = TransformConfig::new(db, du, 20.0, TransformVariant::SignExact).unwrap();
        let rho = 2.3;
        let ratio = mag * db * (1.0 - 2.0 * tc.clamp_margin) * if positive { 1.0 } else { -1.0 };
        let (eps, clamped) = transform_sign(ratio * rho, rho, &tc).unwrap();
        prop_assert!(!clamped);
        // the inverse map S follows the sign branch of the forward transform
        let back = if ratio >= 0.0 { smooth_s(eps, &tc) } else { -smooth_s(-eps, &tc) };
        prop_assert!((back - ratio).abs() < 1e-9, "ratio {ratio} came back as {back}");
    }

    #[test]
    fn r_coefficient_is_positive((db, du) in shape_pair(), e in -50f64..50.0, rho in 0.01f64..20.0) {
        let tc = TransformConfig::new(db, du, 20.0, TransformVariant::SignExact).unwrap();
        let r = r_coeff(e, rho, &tc).unwrap();
        prop_assert!(r > 0.0 && r.is_finite());
    }

    #[test]
    fn funnel_decreases_to_its_floor(rho0 in 0.1f64..10.0, gap in 1e-3f64..10.0, ell in 0.05f64..20.0) {
        let pf = PerformanceFunction::new(rho0 + gap, rho0, ell).unwrap();
        // strict decrease while the decay is still resolvable in f64
        let t_max = 20.0 / ell;
        let mut prev = f64::INFINITY;
        for k in 0..=400 {
            let t = t_max * k as f64 / 400.0;
            let rho = pf.rho(t).unwrap();
            prop_assert!(rho > pf.rho_inf());
            prop_assert!(rho < prev || k == 0);
            prev = rho;
        }
        // and the floor is approached but never undercut far beyond that
        prop_assert!(pf.rho(1e9).unwrap() >= pf.rho_inf());
    }
}

#[test]
fn erf_evaluation_meets_the_quadrature_oracle() {
    // the transform requires erf to 1e-12 absolute accuracy
    for k in 0..=120 {
        let x = -6.0 + k as f64 * 0.1;
        let diff = (libm::erf(x) - common::erf_quadrature(x)).abs();
        assert!(diff < 1e-12, "erf({x}) off by {diff:.3e}");
    }
}

#[test]
fn erf_transform_tracks_scaled_sign_transform_at_high_sharpness() {
    // as the gate saturates the two variants differ exactly by 1/sqrt(pi)
    let xi = 1e4;
    let tc = TransformConfig::new(7.0, 1.0, xi, TransformVariant::ErfSmooth).unwrap();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    for &mag in &[0.01, 0.05, 0.3, 1.0, 3.0, 6.5] {
        for sign in [-1.0, 1.0] {
            let e = sign * mag;
            let (erf_eps, _) = transform_erf(e, 1.0, &tc).unwrap();
            let (sign_eps, _) = transform_sign(e, 1.0, &tc).unwrap();
            assert!(
                (erf_eps - inv_sqrt_pi * sign_eps).abs() < 1e-12,
                "e={e}: {erf_eps} vs {}",
                inv_sqrt_pi * sign_eps
            );
        }
    }
}

#[test]
fn lemma_quantities_hold_on_random_digraphs() {
    let mut rng = seeded(11);
    for case in 0..60 {
        let n = rng.random_range(1..=10);
        let g = random_strongly_connected(&mut rng, n);
        assert!(g.is_strongly_connected());
        let r = DVector::from_fn(n, |_, _| rng.random_range(0.05..10.0));
        let lemma = lemma1_pq(&g, Some(&r)).unwrap();
        let residual = g.coupling() * &lemma.q - DVector::from_element(n, 1.0);
        assert!(residual.amax() < 1e-10, "case {case}: residual {}", residual.amax());
        assert!(lemma.q.iter().all(|&v| v > 0.0));
        assert!(lemma.min_eig_q > 0.0, "case {case}: min eig {}", lemma.min_eig_q);
        let oracle = jacobi_eigenvalues(&lemma.q_sym)[0];
        assert!((oracle - lemma.min_eig_q).abs() < 1e-9 * (1.0 + oracle.abs()));
    }
}

#[test]
fn laplacian_identities() {
    let mut rng = seeded(12);
    for _ in 0..40 {
        let n = rng.random_range(2..=8);
        let g = random_strongly_connected(&mut rng, n);
        let l = g.laplacian();
        for i in 0..n {
            assert!(l.row(i).sum().abs() < 1e-12);
        }
        // D + B - (L + B) = A
        let mut d_plus_b = DMatrix::from_diagonal(&g.in_degrees());
        for i in 0..n {
            d_plus_b[(i, i)] += g.pinning()[i];
        }
        let reconstructed = d_plus_b - g.coupling();
        assert!((reconstructed - g.adjacency()).amax() < 1e-12);
    }
}

#[test]
fn singular_values_match_brute_force_oracle() {
    let mut rng = seeded(13);
    for _ in 0..30 {
        let m = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-3.0..3.0));
        let (lo, hi) = singular_values_oracle(&m);
        assert!((min_singular_value(&m).unwrap() - lo).abs() < 1e-9);
        assert!((max_singular_value(&m).unwrap() - hi).abs() < 1e-9);
    }
}

#[test]
fn gain_report_identity_holds() {
    let mut rng = seeded(14);
    for _ in 0..20 {
        let n = rng.random_range(1..=8);
        let g = random_strongly_connected(&mut rng, n);
        let c = rng.random_range(0.5..200.0);
        let rep = gain_check(&g, c, 1.0, 1.7, None, None).unwrap();
        assert!((rep.k_required * 2.0 * rep.sigma_min_q - c).abs() < 1e-12 * c.max(1.0));
    }
}

#[test]
fn logged_run_respects_runtime_invariants() {
    // r > 0, rho >= rho_inf and the leader-distance bound on every logged row
    let cfg = load_scenario(
        "example1",
        &Overrides { horizon: Some(0.3), decimate: Some(20), ..Default::default() },
    )
    .unwrap();
    let log = run_scenario(&cfg).unwrap();
    assert!(!log.summary.aborted);
    assert_eq!(log.summary.eq8_violations, 0);
    let sigma_min_lb = min_singular_value(&cfg.graph.coupling()).unwrap();
    for row in &log.rows {
        let mut e_sq = 0.0;
        for c in 0..log.channels() {
            let tc = &cfg.transforms[c][0]; // scalar plant: one channel per agent
            assert!(row.rho[c] >= 0.05 - 1e-12);
            let r = r_coeff(row.errors[c], row.rho[c], tc).unwrap();
            assert!(r > 0.0);
            e_sq += row.errors[c] * row.errors[c];
        }
        let (x0, _) = cfg.leader.state(row.t);
        let dist_sq: f64 = row
            .states
            .iter()
            .map(|&x| (x - x0[0]) * (x - x0[0]))
            .sum();
        assert!(
            dist_sq.sqrt() <= e_sq.sqrt() / sigma_min_lb + 1e-9,
            "leader-distance bound failed at t = {}",
            row.t
        );
    }
}

#[test]
fn perturbing_a_non_neighbor_leaves_the_control_unchanged() {
    // agent 1 hears only agent 2 and is unpinned; agent 4's initial state is
    // invisible to it at t = 0
    let ov = Overrides { horizon: Some(0.001), decimate: Some(1), ..Default::default() };
    let base = load_scenario("example1", &ov).unwrap();
    let mut perturbed = base.clone();
    perturbed.initial[3][0] += 0.5;
    let log_a = run_scenario(&base).unwrap();
    let log_b = run_scenario(&perturbed).unwrap();
    assert_eq!(log_a.rows[0].controls[0], log_b.rows[0].controls[0]);
    assert_eq!(log_a.rows[0].errors[0], log_b.rows[0].errors[0]);
    // while its actual neighbor's perturbation is visible
    let mut neighbor = base.clone();
    neighbor.initial[1][0] += 0.5;
    let log_c = run_scenario(&neighbor).unwrap();
    assert_ne!(log_a.rows[0].controls[0], log_c.rows[0].controls[0]);
}

#[test]
fn erf_gate_cuts_chattering_on_the_mimo_benchmark() {
    // both variants complete this benchmark, so the total-variation contrast
    // is meaningful end to end
    let run = |variant| {
        let cfg = load_scenario(
            "example2",
            &Overrides {
                transform: Some(variant),
                horizon: Some(1.0),
                decimate: Some(100),
                ..Default::default()
            },
        )
        .unwrap();
        run_scenario(&cfg).unwrap()
    };
    let sign = run(TransformVariant::SignExact);
    let erf = run(TransformVariant::ErfSmooth);
    assert!(!sign.summary.aborted && !erf.summary.aborted);
    for c in 0..sign.channels() {
        assert!(
            erf.summary.control_total_variation[c] < sign.summary.control_total_variation[c],
            "channel {c}: erf TV {} !< sign TV {}",
            erf.summary.control_total_variation[c],
            sign.summary.control_total_variation[c]
        );
    }
}

#[test]
fn envelope_status_flags_agree_with_transform_clamping() {
    let tc = TransformConfig::new(7.0, 1.0, 20.0, TransformVariant::SignExact).unwrap();
    let mut rng = seeded(15);
    for _ in 0..500 {
        let rho = rng.random_range(0.05..8.0);
        let e = rng.random_range(-60.0..60.0);
        let status = ppf::check_envelope(e, rho, &tc).unwrap();
        let (_, clamped) = transform_sign(e, rho, &tc).unwrap();
        assert_eq!(status.clamped, clamped);
        assert_eq!(status.inside, status.margin > 0.0);
    }
}
