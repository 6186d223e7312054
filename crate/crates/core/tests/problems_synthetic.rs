use fedminimax::linalg::Vector;
use fedminimax::problems::*;
use fedminimax::rng;

fn fd_grad(p: &ProblemInstance, k: usize, x: &Vector, y: &Vector, h: f64) -> (Vector, Vector) {
    let mut gx = Vector::zeros(x.dim());
    for i in 0..x.dim() {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[i] += h;
        xm[i] -= h;
        gx[i] = (p.value(k, &xp, y).unwrap() - p.value(k, &xm, y).unwrap()) / (2.0 * h);
    }
    let mut gy = Vector::zeros(y.dim());
    for i in 0..y.dim() {
        let (mut yp, mut ym) = (y.clone(), y.clone());
        yp[i] += h;
        ym[i] -= h;
        gy[i] = (p.value(k, x, &yp).unwrap() - p.value(k, x, &ym).unwrap()) / (2.0 * h);
    }
    (gx, gy)
}

#[test]
fn centered_linear_terms_sum_to_zero_exactly() {
    let p = make_synthetic(10, 20, 1.0, 10.0, 42).unwrap();
    let s = p.as_synthetic().unwrap();
    let mut sum = Vector::zeros(20);
    for b in s.b() {
        sum.axpy(1.0, b);
    }
    assert!(sum.iter().all(|&c| c == 0.0), "{sum:?}");
    assert!(s.b_mean().iter().all(|&c| c == 0.0));
    assert!(s.t().iter().all(|&t| (0.0..0.1).contains(&t)));
}

#[test]
fn single_client_has_zero_linear_term() {
    let p = make_synthetic(1, 5, 3.0, 10.0, 1).unwrap();
    let s = p.as_synthetic().unwrap();
    assert!(s.b()[0].iter().all(|&c| c == 0.0));
    // heterogeneity vanishes with one client
    let (x, y) = (Vector::filled(5, 0.3), Vector::filled(5, -0.2));
    let g = p.grad_full(0, &x, &y).unwrap();
    let gg = p.grad_global(&x, &y).unwrap();
    assert_eq!(g, gg);
}

#[test]
fn larger_s_gives_larger_linear_terms() {
    let small = make_synthetic(10, 20, 1.0, 10.0, 42).unwrap();
    let large = make_synthetic(10, 20, 10.0, 10.0, 42).unwrap();
    let spread = |p: &ProblemInstance| {
        p.as_synthetic()
            .unwrap()
            .b()
            .iter()
            .map(|b| b.norm())
            .fold(0.0, f64::max)
    };
    assert!(spread(&large) > spread(&small));
}

#[test]
fn gradient_signs_match_finite_differences() {
    let p = make_synthetic(4, 6, 1.0, 10.0, 3).unwrap();
    let mut r = rng::seeded(9);
    for k in 0..4 {
        let x = rng::normal_vector(&mut r, 6, 1.0);
        let y = rng::normal_vector(&mut r, 6, 1.0);
        let g = p.grad_full(k, &x, &y).unwrap();
        let (fx, fy) = fd_grad(&p, k, &x, &y, 1e-5);
        assert!(g.gx.dist(&fx) < 1e-7 * (1.0 + g.gx.norm()));
        assert!(g.gy.dist(&fy) < 1e-7 * (1.0 + g.gy.norm()));
    }
}

#[test]
fn saddle_is_origin_when_centered() {
    let p = make_synthetic(10, 20, 1.0, 10.0, 42).unwrap();
    let (x, y) = p.saddle_point().unwrap();
    assert!(x.iter().chain(y.iter()).all(|&c| c == 0.0));
    let g = p.grad_global(&x, &y).unwrap();
    assert_eq!(g.gx.norm(), 0.0);
    assert_eq!(g.gy.norm(), 0.0);
}

#[test]
fn saddle_brute_force_grid() {
    // minimize ||∇F|| over a grid in 1-d; the minimizer must be the closed form
    let p = SyntheticSpec {
        clients: 3,
        dim: 1,
        recenter: false,
        seed: 5,
        ..Default::default()
    }
    .build()
    .unwrap();
    let s = p.as_synthetic().unwrap();
    let (xs, _) = p.saddle_point().unwrap();
    let mut best = (f64::INFINITY, 0.0);
    let n = 200_001;
    for i in 0..n {
        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let g = s.primal_grad(&Vector::new(vec![x])).norm();
        if g < best.0 {
            best = (g, x);
        }
    }
    assert!(
        (best.1 - xs[0]).abs() <= 1e-5,
        "grid {} vs closed form {}",
        best.1,
        xs[0]
    );
}

#[test]
fn uncentered_saddle_is_stationary() {
    let p = SyntheticSpec {
        recenter: false,
        seed: 8,
        ..Default::default()
    }
    .build()
    .unwrap();
    let s = p.as_synthetic().unwrap();
    assert!(s.b_mean().norm() > 0.0);
    let (x, y) = p.saddle_point().unwrap();
    let g = p.grad_global(&x, &y).unwrap();
    assert!(g.gy.norm() < 1e-10);
    assert!(g.gx.norm() < 1e-10);
    let expect: Vector = s
        .b_mean()
        .iter()
        .zip(x.iter())
        .map(|(b, x)| b - s.t_mean() * x)
        .collect();
    assert!(y.dist(&expect) < 1e-15);
}

#[test]
fn inner_max_is_stationary_under_ascent() {
    let p = make_synthetic(5, 4, 1.0, 10.0, 2).unwrap();
    let s = p.as_synthetic().unwrap();
    let x = Vector::new(vec![0.5, -1.0, 2.0, 0.1]);
    let y = s.best_response(&x);
    let g = p.grad_global(&x, &y).unwrap();
    let stepped = y.add(&g.gy.scaled(0.5));
    assert!(stepped.dist(&y) < 1e-15);
}

#[test]
fn stochastic_oracle_unbiased_and_exact_without_noise() {
    let p = SyntheticSpec {
        noise_sigma: 0.3,
        samples_per_client: 50,
        ..Default::default()
    }
    .build()
    .unwrap();
    let mut r = rng::seeded(1);
    let x = rng::normal_vector(&mut r, 20, 1.0);
    let y = rng::normal_vector(&mut r, 20, 1.0);
    for k in 0..10 {
        let full = p.grad_full(k, &x, &y).unwrap();
        let mut mx = Vector::zeros(20);
        let mut my = Vector::zeros(20);
        for item in 0..50 {
            let g = p.grad_stoch(k, &x, &y, SampleRef { client: k, item }).unwrap();
            mx.axpy(1.0 / 50.0, &g.gx);
            my.axpy(1.0 / 50.0, &g.gy);
        }
        assert!(mx.dist(&full.gx) < 1e-12);
        assert!(my.dist(&full.gy) < 1e-12);
    }
    let quiet = make_synthetic(3, 4, 1.0, 10.0, 0).unwrap();
    let (x, y) = (Vector::filled(4, 1.0), Vector::filled(4, 2.0));
    let g = quiet.grad_stoch(1, &x, &y, SampleRef { client: 1, item: 17 }).unwrap();
    assert_eq!(g, quiet.grad_full(1, &x, &y).unwrap());
}

#[test]
fn out_of_range_sample_is_error() {
    let p = make_synthetic(2, 3, 1.0, 10.0, 0).unwrap();
    let (x, y) = (Vector::zeros(3), Vector::zeros(3));
    assert!(p.grad_stoch(0, &x, &y, SampleRef { client: 0, item: 100 }).is_err());
    assert!(p.grad_stoch(0, &x, &y, SampleRef { client: 1, item: 0 }).is_err());
    assert!(p.grad_full(2, &x, &y).is_err());
}
