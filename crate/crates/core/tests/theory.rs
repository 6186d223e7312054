use fedminimax::algorithms::HyperParams;
use fedminimax::algorithms::Variant;
use fedminimax::linalg::Vector;
use fedminimax::problems::Provenance;
use fedminimax::theory::*;
use proptest::prelude::*;

fn synth_constants() -> ConstantSet {
    ConstantSet::analytic(10.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0).unwrap()
}

/// Satisfies every constraint except `tau_upper` for the constants above.
fn nine_of_ten() -> HyperParams {
    HyperParams {
        variant: Variant::AdaFgdaAdam,
        gamma: 1e-4,
        lambda: 0.2,
        eta_n: 1.0,
        eta_m: Some(1e10),
        c1: 460.0,
        c2: 5.0,
        q: 20,
        rho: 1.0,
        rho_u: 1.0,
        ..HyperParams::default()
    }
}

#[test]
fn report_has_ten_named_constraints() {
    let r = validate_theorem1(&HyperParams::default(), &synth_constants(), 10);
    let names: Vec<&str> = r.constraints.iter().map(|c| c.name).collect();
    assert_eq!(names, CONSTRAINT_NAMES);
    assert_eq!(r.overall(), r.constraints.iter().all(|c| c.satisfied));
}

#[test]
fn nine_of_ten_only_misses_tau() {
    let r = validate_theorem1(&nine_of_ten(), &synth_constants(), 10);
    assert_eq!(r.violated(), vec!["tau_upper"], "{}", r.render_text());
}

#[test]
fn gamma_blowup_flags_gamma_only_among_upper_bounds() {
    let hp = nine_of_ten();
    let c = synth_constants();
    let bound = validate_theorem1(&hp, &c, 10).get("gamma_upper").unwrap().rhs;
    let r = validate_theorem1(
        &HyperParams {
            gamma: 10.0 * bound,
            ..hp
        },
        &c,
        10,
    );
    assert!(!r.get("gamma_upper").unwrap().satisfied);
    assert!(r.get("lambda_upper").unwrap().satisfied);
    assert!(r.get("m_lower").unwrap().satisfied);
}

#[test]
fn rho_u_boundary_is_inclusive() {
    let c = synth_constants().with_matrix_bounds(1.0, 135.0 / 64.0);
    let r = validate_theorem1(&nine_of_ten(), &c, 10);
    assert!(r.get("rho_u_range").unwrap().satisfied);
    let c = synth_constants().with_matrix_bounds(1.0, 135.0 / 64.0 * (1.0 + 1e-12));
    assert!(
        !validate_theorem1(&nine_of_ten(), &c, 10)
            .get("rho_u_range")
            .unwrap()
            .satisfied
    );
    // below the lower spectral bound
    let c = synth_constants().with_matrix_bounds(0.5, 0.25);
    assert!(
        !validate_theorem1(&nine_of_ten(), &c, 10)
            .get("rho_u_range")
            .unwrap()
            .satisfied
    );
}

#[test]
fn theorem2_matches_theorem1_at_unit_bounds() {
    let hp = nine_of_ten();
    let c = synth_constants();
    assert_eq!(validate_theorem1(&hp, &c, 10), validate_theorem2(&hp, &c, 10));
    let lam_cap = 3.0 * 50f64.sqrt() / (32.0 * 2f64.sqrt() * 1.0);
    let r = validate_theorem2(
        &HyperParams {
            lambda: 1.01 * lam_cap,
            ..hp
        },
        &c,
        10,
    );
    assert!(!r.get("lambda_upper").unwrap().satisfied);
}

#[test]
fn renderings() {
    let r = validate_theorem1(&nine_of_ten(), &synth_constants(), 10);
    let kv = r.render_kv();
    assert_eq!(kv.lines().count(), 11);
    assert!(kv.lines().any(|l| l.starts_with("tau_upper=false|")));
    assert!(kv.lines().any(|l| l.starts_with("gamma_upper=true|")));
    assert!(r.render_text().contains("overall: violated"));
}

#[test]
fn estimated_constants_get_margin() {
    let mut c = synth_constants();
    c.provenance.l_f = Provenance::Estimated;
    c.provenance.mu = Provenance::Estimated;
    let v = c.for_validator();
    assert!((v.l_f - 11.0).abs() < 1e-12);
    assert!((v.mu - 1.0 / 1.1).abs() < 1e-12);
    assert_eq!(synth_constants().for_validator(), synth_constants());
}

#[test]
fn informational_g_is_finite_and_positive() {
    let c = ConstantSet::analytic(10.0, 1.0, 0.1, 0.5, 0.5, 1.0, 1.0).unwrap();
    let g = informational_g(&nine_of_ten(), &c, 10, 1.0, 1.0);
    assert!(g.is_finite() && g > 0.0);
}

proptest! {
    // τ <= 1 means λ <= γ, while the fourth γ bound gives
    // γ <= (2/27)(ρ/ρ_u)(μ/L_f)² λ < λ.
    #[test]
    fn tau_and_gamma_bounds_never_hold_together(
        gamma in 1e-8..10.0f64,
        lambda in 1e-8..10.0f64,
        n in 0.01..10.0f64,
        m in 2.0..1e12f64,
        c1 in 0.01..1e4f64,
        c2 in 0.01..1e4f64,
        q in 1u64..100,
        k in 1usize..100,
        mu in 1e-3..10.0f64,
        kappa in 1.0..1e3f64,
        rho in 1e-3..=1.0f64,
        rho_u_factor in 1.0..3.0f64,
    ) {
        let hp = HyperParams { gamma, lambda, eta_n: n, eta_m: Some(m), c1, c2, q, ..HyperParams::default() };
        let c = ConstantSet::analytic(mu * kappa, mu, 0.0, 0.0, 0.0, rho, rho * rho_u_factor).unwrap();
        let r = validate_theorem1(&hp, &c, k);
        prop_assert!(!(r.get("tau_upper").unwrap().satisfied && r.get("gamma_upper").unwrap().satisfied));
    }

    #[test]
    fn shrinking_steps_keeps_upper_bounds(scale in 0.01..1.0f64, gamma in 1e-6..1.0f64, tau in 0.1..100.0f64) {
        let hp = HyperParams { gamma, lambda: tau * gamma, eta_m: Some(1e6), ..HyperParams::default() };
        let c = synth_constants();
        let before = validate_theorem1(&hp, &c, 10);
        let after = validate_theorem1(&HyperParams { gamma: gamma * scale, lambda: tau * gamma * scale, ..hp }, &c, 10);
        for name in ["gamma_upper", "lambda_upper"] {
            if before.get(name).unwrap().satisfied {
                prop_assert!(after.get(name).unwrap().satisfied);
            }
        }
    }
}

#[test]
fn probes_on_synthetic() {
    let p = fedminimax::problems::make_synthetic(10, 20, 1.0, 10.0, 42).unwrap();
    assert!(probe_pl(&p, 1000, 1).unwrap() >= -1e-9);
    assert!(probe_pl_with_mu(&p, 2.0, 200, 1).unwrap() < 0.0);
    let x = Vector::filled(20, 0.3);
    let star = p.best_response(&x).unwrap();
    assert!(pl_slack(&p, 1.0, &x, &star).unwrap().abs() <= 1e-9);
    let lr = probe_lipschitz(&p, 1000, 2).unwrap();
    assert!(lr.passed());
    let s = p.as_synthetic().unwrap();
    assert!((lr.best_response_ratio - s.t_mean()).abs() < 1e-12);
    assert!(lr.grad_ratio <= 10.0 + s.t_mean().powi(2) + 1e-9);
    assert!(grad_check_random(&p, 100, 1e-5, 3).unwrap() < 1e-7);
    let c = estimate_constants(&p, 5, 4).unwrap();
    assert_eq!(c.mu, 1.0);
    assert!(c.sigma < 1e-12);
    assert_eq!(c.provenance.l_f, Provenance::Analytic);
}

#[test]
fn probes_on_auc_and_robust() {
    let a = fedminimax::problems::make_auc(3, 5, 40, 0.05, 2).unwrap();
    assert!(probe_pl(&a, 300, 1).unwrap() >= -1e-9);
    assert!(probe_lipschitz(&a, 300, 1).unwrap().passed());
    assert!(grad_check_random(&a, 100, 1e-6, 1).unwrap() < 1e-5);
    let c = estimate_constants(&a, 3, 1).unwrap();
    assert!((c.mu - 0.095).abs() < 1e-15);
    assert_eq!(c.provenance.sigma, Provenance::Estimated);

    let r = fedminimax::problems::make_robust(3, 4, 30, 5).unwrap();
    assert!(probe_pl(&r, 10, 1).is_err());
    assert!(probe_lipschitz(&r, 10, 1).is_err());
    assert!(grad_check_random(&r, 100, 1e-6, 1).unwrap() < 1e-5);
    assert!(probe_unbiased(&r, 3, 1).unwrap() < 1e-10);
    let c = estimate_constants(&r, 5, 1).unwrap();
    assert_eq!(c.provenance.l_f, Provenance::Estimated);
    assert_eq!(c.provenance.mu, Provenance::Nominal);
}

#[test]
fn grad_check_step_range() {
    let p = fedminimax::problems::make_synthetic(2, 2, 1.0, 10.0, 0).unwrap();
    let z = Vector::zeros(2);
    assert!(grad_check(&p, 0, &z, &z, 1e-2).is_err());
    assert!(grad_check(&p, 0, &z, &z, 1e-9).is_err());
}
