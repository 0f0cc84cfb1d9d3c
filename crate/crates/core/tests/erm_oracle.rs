mod support;

use repgap_core::learners::erm_linear_01;

#[test]
fn exact_erm_matches_dichotomy_enumeration() {
    for seed in 0..200 {
        let data = support::random_instance(seed);
        let (h, risk) = erm_linear_01(&data).unwrap();
        let brute = support::brute_force_min_errors(&data);
        let m = data.len() as f64;
        assert_eq!(risk, brute as f64 / m, "seed {seed}: {data:?}");
        assert_eq!(h.errors(&data), brute, "seed {seed}: returned classifier disagrees with its risk");
    }
}

#[test]
fn oracle_sanity() {
    use repgap_core::learners::Example;
    let xor = [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1)]
        .map(|(x, y)| Example { x: x.to_vec(), y });
    assert_eq!(support::brute_force_min_errors(&xor), 1);
    let line = [0.1, 0.2, 0.3, 0.4].map(|v| Example { x: vec![v, v], y: u8::from(v > 0.15 && v < 0.35) });
    assert_eq!(support::brute_force_min_errors(&line), 1);
}
