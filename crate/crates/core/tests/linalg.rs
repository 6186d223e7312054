use fedminimax::linalg::*;
use fedminimax::Error;
use proptest::prelude::*;

#[test]
fn mean_of_two() {
    let m = vec_mean(&[Vector::new(vec![1.0, 3.0]), Vector::new(vec![3.0, 5.0])]).unwrap();
    assert_eq!(m.as_slice(), &[2.0, 4.0]);
}

#[test]
fn mean_single_is_identity() {
    let v = Vector::new(vec![0.1, -7.25, 3.0]);
    assert_eq!(vec_mean(std::slice::from_ref(&v)).unwrap(), v);
}

#[test]
fn mean_of_copies() {
    let v = Vector::new(vec![0.5, -2.0]);
    for k in [2, 3, 7, 8, 10] {
        let vs = vec![v.clone(); k];
        assert_eq!(vec_mean(&vs).unwrap(), v);
    }
    let odd = Vector::new(vec![0.1, 1.0 / 3.0]);
    assert_eq!(vec_mean(&vec![odd.clone(); 10]).unwrap(), odd);
}

#[test]
fn mean_errors() {
    assert_eq!(vec_mean(&[]), Err(Error::Empty("vec_mean of zero vectors")));
    let r = vec_mean(&[Vector::zeros(2), Vector::zeros(3)]);
    assert!(matches!(r, Err(Error::DimensionMismatch { expected: 2, found: 3 })));
}

#[test]
fn precondition_identity_and_scaling() {
    let g = Vector::new(vec![5.0, -2.0]);
    assert_eq!(precondition(&DiagMatrix::identity(2), &g).unwrap(), g);
    let a = DiagMatrix::new(Vector::new(vec![2.0, 4.0])).unwrap();
    assert_eq!(
        precondition(&a, &Vector::new(vec![2.0, 4.0])).unwrap().as_slice(),
        &[1.0, 1.0]
    );
}

#[test]
fn precondition_at_floor() {
    let rho = 0.01;
    let a = DiagMatrix::new(Vector::filled(2, rho)).unwrap();
    let g = Vector::new(vec![3.0, -4.0]);
    let out = precondition(&a, &g).unwrap();
    assert_eq!(out.as_slice(), &[3.0 / rho, -4.0 / rho]);
    assert!(out.norm() <= g.norm() / rho * (1.0 + 1e-15));
}

#[test]
fn nonpositive_diagonal_rejected() {
    assert!(DiagMatrix::new(Vector::new(vec![1.0, 0.0])).is_err());
    assert!(DiagMatrix::new(Vector::new(vec![1.0, f64::NAN])).is_err());
    assert!(DiagMatrix::new(Vector::new(vec![-1.0])).is_err());
}

#[test]
fn interpolate_with_unit_eta_matches_formula() {
    let y = Vector::new(vec![0.3, -1.7]);
    let t = Vector::new(vec![2.0, 5.5]);
    let out = y.interpolate(&t, 1.0);
    for i in 0..2 {
        assert_eq!(out[i], y[i] + (t[i] - y[i]));
    }
}

proptest! {
    #[test]
    fn precondition_bounded_by_floor(
        diag in proptest::collection::vec(0.01f64..100.0, 1..16),
        seed in proptest::collection::vec(-1e3f64..1e3, 16),
    ) {
        let rho = diag.iter().copied().fold(f64::INFINITY, f64::min);
        let g: Vector = seed[..diag.len()].iter().copied().collect();
        let a = DiagMatrix::new(Vector::new(diag)).unwrap();
        let out = precondition(&a, &g).unwrap();
        prop_assert!(out.norm() <= g.norm() / rho * (1.0 + 1e-12));
    }

    #[test]
    fn mean_is_deterministic_and_dimension_preserving(
        rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 5), 1..12)
    ) {
        let vs: Vec<Vector> = rows.into_iter().map(Vector::new).collect();
        let a = vec_mean(&vs).unwrap();
        let b = vec_mean(&vs).unwrap();
        prop_assert_eq!(a.dim(), 5);
        prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert!(a.is_finite());
    }
}
