use fedminimax::linalg::Vector;
use fedminimax::problems::*;
use fedminimax::rng;

fn small() -> ProblemInstance {
    AucSpec {
        clients: 3,
        dim: 4,
        n_per_client: 30,
        pos_ratio: 0.2,
        test_size: 50,
        seed: 4,
        ..AucSpec::default()
    }
    .build()
    .unwrap()
}

#[test]
fn mu_from_positive_ratio() {
    let p = make_auc(2, 3, 40, 0.05, 1).unwrap();
    assert!((p.known_constants().mu.value - 0.095).abs() < 1e-15);
    let p = make_auc(2, 3, 40, 0.5, 1).unwrap();
    assert_eq!(p.known_constants().mu.value, 0.5);
    assert!(p.known_constants().l_f.unwrap() >= 0.5);
}

#[test]
fn invalid_ratio_rejected() {
    assert!(make_auc(2, 3, 10, 0.0, 1).is_err());
    assert!(make_auc(2, 3, 10, 1.0, 1).is_err());
    assert!(make_auc(2, 3, 10, -0.3, 1).is_err());
}

#[test]
fn class_ratio_and_shapes() {
    let p = make_auc(10, 20, 200, 0.05, 7).unwrap();
    let a = p.as_auc().unwrap();
    let total: usize = (0..10).map(|k| a.client_data(k).len()).sum();
    assert_eq!(total, 2000);
    let pos: usize = (0..10)
        .flat_map(|k| a.client_data(k).iter())
        .filter(|pt| pt.label > 0.0)
        .count();
    assert_eq!(pos, 100);
    assert_eq!(p.dim_x(), 22);
    assert_eq!(p.dim_y(), 1);
    assert!((0..10).all(|k| p.client_len(k) >= 1));
}

#[test]
fn per_sample_gradient_at_origin() {
    // w = 0, a = b = α = 0: h = 0
    let p = small();
    let a = p.as_auc().unwrap();
    let pr = a.pos_ratio();
    let x = Vector::zeros(6);
    let y = Vector::zeros(1);
    for (item, pt) in a.client_data(0).iter().enumerate() {
        let g = p.grad_stoch(0, &x, &y, SampleRef { client: 0, item }).unwrap();
        let (cw, ga, gb) = if pt.label > 0.0 {
            (-2.0 * (1.0 - pr), 0.0, 0.0)
        } else {
            (2.0 * pr, 0.0, 0.0)
        };
        for i in 0..4 {
            assert!((g.gx[i] - cw * pt.features[i]).abs() < 1e-15);
        }
        assert_eq!((g.gx[4], g.gx[5], g.gy[0]), (ga, gb, 0.0));
    }
}

/// Square-loss surrogate for one labeled point, written out independently.
fn surrogate(p: f64, features: &[f64], label: f64, x: &Vector, alpha: f64) -> f64 {
    let d = features.len();
    let h: f64 = features.iter().zip(x.as_slice()).map(|(f, w)| f * w).sum();
    let (a, b) = (x[d], x[d + 1]);
    let pos = if label > 0.0 { 1.0 } else { 0.0 };
    (1.0 - p) * (h - a).powi(2) * pos
        + p * (h - b).powi(2) * (1.0 - pos)
        + 2.0 * (1.0 + alpha) * (p * h * (1.0 - pos) - (1.0 - p) * h * pos)
        - p * (1.0 - p) * alpha * alpha
}

#[test]
fn per_sample_gradient_matches_finite_differences() {
    let p = small();
    let a = p.as_auc().unwrap();
    let ratio = a.pos_ratio();
    let mut r = rng::seeded(3);
    let x = rng::normal_vector(&mut r, 6, 1.0);
    let alpha = 0.7;
    let y = Vector::new(vec![alpha]);
    for (item, pt) in a.client_data(1).iter().enumerate().take(5) {
        let f = |x: &Vector, al: f64| surrogate(ratio, pt.features.as_slice(), pt.label, x, al);
        let g = p.grad_stoch(1, &x, &y, SampleRef { client: 1, item }).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp, alpha) - f(&xm, alpha)) / (2.0 * h);
            assert!((fd - g.gx[i]).abs() <= 1e-5 * fd.abs().max(g.gx[i].abs()).max(1e-3));
        }
        let fd = (f(&x, alpha + h) - f(&x, alpha - h)) / (2.0 * h);
        assert!((fd - g.gy[0]).abs() <= 1e-5 * fd.abs().max(1e-3));
    }
}

#[test]
fn best_response_maximizes_single_client_quadratic() {
    let p = AucSpec {
        clients: 1,
        n_per_client: 12,
        test_size: 4,
        ..AucSpec::default()
    }
    .build()
    .unwrap();
    let mut r = rng::seeded(2);
    let x = rng::normal_vector(&mut r, p.dim_x(), 1.0);
    let star = p.best_response(&x).unwrap();
    let g = p.grad_global(&x, &star).unwrap();
    assert!(g.gy[0].abs() < 1e-12);
    let fstar = p.value_global(&x, &star).unwrap();
    for da in [-1.0, -0.1, 0.1, 1.0] {
        let other = Vector::new(vec![star[0] + da]);
        assert!(p.value_global(&x, &other).unwrap() < fstar);
    }
}

#[test]
fn unbiased_over_client_dataset() {
    let p = small();
    let mut r = rng::seeded(5);
    let x = rng::normal_vector(&mut r, 6, 1.0);
    let y = Vector::new(vec![0.3]);
    for k in 0..3 {
        let n = p.client_len(k);
        let mut m = GradPair::zeros(6, 1);
        for item in 0..n {
            let g = p.grad_stoch(k, &x, &y, SampleRef { client: k, item }).unwrap();
            m.gx.axpy(1.0 / n as f64, &g.gx);
            m.gy.axpy(1.0 / n as f64, &g.gy);
        }
        let full = p.grad_full(k, &x, &y).unwrap();
        assert!(m.gx.dist(&full.gx) < 1e-12);
        assert!(m.gy.dist(&full.gy) < 1e-12);
    }
}
