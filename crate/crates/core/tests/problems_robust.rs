use fedminimax::linalg::{sigmoid_neg, softplus_neg, Vector};
use fedminimax::problems::*;
use fedminimax::rng;

fn small() -> ProblemInstance {
    RobustSpec {
        clients: 3,
        dim: 5,
        n_per_client: 20,
        test_size: 40,
        seed: 9,
        ..RobustSpec::default()
    }
    .build()
    .unwrap()
}

#[test]
fn stable_logistic_helpers() {
    assert!((softplus_neg(0.0) - 2f64.ln()).abs() < 1e-15);
    assert!((softplus_neg(800.0)).abs() < 1e-300);
    assert!((softplus_neg(-800.0) - 800.0).abs() < 1e-12);
    assert_eq!(sigmoid_neg(0.0), 0.5);
    assert!(sigmoid_neg(800.0) >= 0.0 && sigmoid_neg(-800.0) == 1.0);
}

#[test]
fn zero_perturbation_gives_plain_logistic_gradient() {
    let p = small();
    let r = p.as_robust().unwrap();
    let mut g = rng::seeded(1);
    let w = rng::normal_vector(&mut g, 5, 0.5);
    let zero = Vector::zeros(5);
    let got = p.grad_full(0, &w, &zero).unwrap();
    let data = r.client_data(0);
    let mut expect = Vector::zeros(5);
    for pt in data {
        let z = pt.label * w.dot(&pt.features);
        let coef = -pt.label / (1.0 + z.exp()) / data.len() as f64;
        expect.axpy(coef, &pt.features);
    }
    assert!(got.gx.dist(&expect) < 1e-14);
}

#[test]
fn perturbation_gradient_is_parallel_to_weights() {
    let p = small();
    let mut g = rng::seeded(2);
    let w = rng::normal_vector(&mut g, 5, 1.0);
    let rho = rng::normal_vector(&mut g, 5, 0.3);
    let gy = p.grad_full(1, &w, &rho).unwrap().gy;
    let c = gy.dot(&w) / w.norm_sq();
    assert!(gy.dist(&w.scaled(c)) < 1e-14);
}

#[test]
fn gradients_match_finite_differences() {
    let p = small();
    let mut g = rng::seeded(3);
    let h = 1e-6;
    for k in 0..3 {
        let w = rng::normal_vector(&mut g, 5, 1.0);
        let rho = rng::normal_vector(&mut g, 5, 0.3);
        let grad = p.grad_full(k, &w, &rho).unwrap();
        for i in 0..5 {
            let e = Vector::basis(5, i).scaled(h);
            let fx = (p.value(k, &w.add(&e), &rho).unwrap() - p.value(k, &w.sub(&e), &rho).unwrap()) / (2.0 * h);
            let fy = (p.value(k, &w, &rho.add(&e)).unwrap() - p.value(k, &w, &rho.sub(&e)).unwrap()) / (2.0 * h);
            assert!((fx - grad.gx[i]).abs() < 1e-7, "{fx} {}", grad.gx[i]);
            assert!((fy - grad.gy[i]).abs() < 1e-7, "{fy} {}", grad.gy[i]);
        }
    }
}

#[test]
fn boundary_point_stays_feasible() {
    let p = small();
    let y = Vector::basis(5, 2);
    assert_eq!(p.project_y(&y), y);
    assert_eq!(p.y_constraint(), YConstraint::EuclideanBall(1.0));
}

#[test]
fn unbiased_over_client_dataset() {
    let p = small();
    let mut g = rng::seeded(4);
    let w = rng::normal_vector(&mut g, 5, 1.0);
    let rho = rng::normal_vector(&mut g, 5, 0.3);
    for k in 0..3 {
        let n = p.client_len(k);
        let mut m = GradPair::zeros(5, 5);
        for item in 0..n {
            let s = p.grad_stoch(k, &w, &rho, SampleRef { client: k, item }).unwrap();
            m.gx.axpy(1.0 / n as f64, &s.gx);
            m.gy.axpy(1.0 / n as f64, &s.gy);
        }
        let full = p.grad_full(k, &w, &rho).unwrap();
        assert!(m.gx.dist(&full.gx) < 1e-12 && m.gy.dist(&full.gy) < 1e-12);
    }
}

#[test]
fn attack_lowers_accuracy_and_stays_in_ball() {
    let p = small();
    let r = p.as_robust().unwrap();
    let w = Vector::basis(5, 1).scaled(10.0);
    let clean = r.test_accuracy(&w, &Vector::zeros(5));
    assert!(clean > 0.95);
    let rho = r.attack(&w, 50);
    assert!(rho.norm() <= 1.0 + 1e-12);
    assert!(r.test_accuracy(&w, &rho) < clean);
}

#[test]
fn rejects_bad_dimensions() {
    assert!(make_robust(2, 1, 10, 0).is_err());
    assert!(make_robust(0, 4, 10, 0).is_err());
}
