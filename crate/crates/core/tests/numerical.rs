mod numerics;

#[test]
fn pd_of_exact_linear_fit() {
    let (slope, pair) = numerics::pd_slope_and_pair_effect().unwrap();
    assert!((slope - 3.0).abs() < 1e-6, "{slope}");
    assert!(pair < 1e-6, "{pair}");
}

#[test]
fn pd_derivative_is_constant() {
    let spread = numerics::pd_derivative_spread().unwrap();
    assert!(spread < 1e-8, "{spread}");
}

#[test]
fn irls_reaches_a_stationary_point() {
    let (grad, fd_gap) = numerics::irls_gradient().unwrap();
    assert!(grad < 1e-6, "{grad}");
    assert!(fd_gap < 1e-4, "{fd_gap}");
}

#[test]
fn lloyd_objective_never_increases() {
    assert_eq!(numerics::kmeans_monotone(100).unwrap(), 0);
}
