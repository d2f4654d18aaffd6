use parallel_thinking_web::{pass_at_k_data, reward_curve_data, simulate_scaling_data};

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

#[test]
fn reward_curve_uniform_shape() {
    let curve = reward_curve_data("uniform:60000:90000", 120_000.0, 121).unwrap();
    assert_eq!(curve.lengths.len(), 121);
    assert_eq!(curve.hard_limit, 75_000.0);
    for (&l, &r) in curve.lengths.iter().zip(&curve.rc) {
        let expected = ((90_000.0 - l) / 30_000.0).clamp(0.0, 1.0);
        assert!((r - expected).abs() < 1e-12, "length {l}");
    }
    assert!(curve.rc.windows(2).all(|w| w[1] <= w[0]));
    assert!(reward_curve_data("uniform:9:1", 10.0, 5).is_err());
    assert!(reward_curve_data("uniform:1:9", 10.0, 1).is_err());
}

#[test]
fn truncexp_hard_limit_is_the_median() {
    let curve = reward_curve_data("truncexp:0.0001:20000", 20_000.0, 3).unwrap();
    let (rate, upper, m) = (1e-4_f64, 20_000.0_f64, curve.hard_limit);
    let cdf = (1.0 - (-rate * m).exp()) / (1.0 - (-rate * upper).exp());
    assert!((cdf - 0.5).abs() < 1e-12);
}

#[test]
fn pass_at_k_curve_matches_combinatorics() {
    let curve = pass_at_k_data(10, 3).unwrap();
    assert_eq!(curve.ks, (1..=10).collect::<Vec<_>>());
    for (&k, &v) in curve.ks.iter().zip(&curve.values) {
        let exact = 1.0 - binomial(7, k) / binomial(10, k);
        assert!((v - exact).abs() < 1e-12, "k={k}");
    }
    assert!(pass_at_k_data(3, 4).is_err());
}

#[test]
fn simulated_scaling_with_perfect_verifier() {
    let params = r#"{"p_first_correct": 0.4, "verifier_tpr": 1.0, "verifier_tnr": 1.0}"#;
    let curve = simulate_scaling_data(params, &[1, 2, 4], &[1], &[1], 400, 11).unwrap();
    assert_eq!(curve.len(), 3);
    for point in &curve {
        assert_eq!(point.accuracy, point.oracle);
        let exact = 1.0 - 0.6f64.powi(point.threads as i32);
        let se = (exact * (1.0 - exact) / 400.0).sqrt();
        assert!((point.accuracy - exact).abs() < 4.0 * se, "{point:?}");
    }
    let again = simulate_scaling_data(params, &[1, 2, 4], &[1], &[1], 400, 11).unwrap();
    assert_eq!(format!("{again:?}"), format!("{curve:?}"));
}

#[test]
fn simulated_scaling_rejects_bad_input() {
    assert!(simulate_scaling_data("{\"p_first_correct\": 2}", &[1], &[1], &[1], 1, 0).is_err());
    assert!(simulate_scaling_data("{\"bogus\": 1}", &[1], &[1], &[1], 1, 0).is_err());
    assert!(simulate_scaling_data("", &[], &[1], &[1], 1, 0).is_err());
    assert!(simulate_scaling_data("", &[64], &[16], &[8], 1_000_000, 0).is_err());
}
