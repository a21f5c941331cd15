//! Statistics between the nine presets against a 50-digit evaluation of
//! the closed forms (tests/oracle/statistics_oracle.py).

mod common;

use common::{oracle, oracle_error, oracle_value, preset_statistic, wishart_estimate, ORACLE_ZERO};
use polsar::linalg::{det, inverse, matmul, trace};
use polsar::{preset, WishartModel};

#[test]
fn all_ordered_preset_pairs() {
    let o = oracle();
    assert_eq!(o.pairs.len(), 81);
    let mut worst = 0.0f64;
    for p in &o.pairs {
        for &(kind, want) in &p.values {
            let got = preset_statistic(kind, &p.a, &p.b, o.m, o.n, o.looks).unwrap();
            let err = oracle_error(got, want);
            let bound = if want.abs() < ORACLE_ZERO { 1e-9 } else { 1e-8 };
            assert!(err <= bound, "{kind} {} / {}: {got} vs {want} ({err:e})", p.a, p.b);
            if want.abs() >= ORACLE_ZERO {
                worst = worst.max(err);
            }
        }
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn named_examples() {
    let o = oracle();
    let find = |a: &str, b: &str| o.pairs.iter().find(|p| p.a == a && p.b == b).unwrap();
    for (a, b, idx) in [
        ("River", "Caatinga", 0),
        ("River", "Prepared Soil", 1),
        ("Soybean 1", "Soybean 2", 2),
        ("Corn 1", "Corn 2", 3),
        ("Tillage", "Prepared Soil", 4),
    ] {
        let (kind, want) = find(a, b).values[idx];
        let got = preset_statistic(kind, a, b, 900, 900, 4.0).unwrap();
        assert!(oracle_error(got, want) < 1e-8, "{kind} {a}/{b}");
    }
}

#[test]
fn determinant_trace_and_density_references() {
    let o = oracle();
    let river = preset("River").unwrap().sigma;
    let caatinga = preset("Caatinga").unwrap().sigma;
    let d = det(river.as_matrix());
    assert!(oracle_error(d.re, oracle_value(&o.raw, "det_river")) < 1e-12);
    let t = trace(&matmul(inverse(&river).unwrap().as_matrix(), caatinga.as_matrix()).unwrap());
    assert!(oracle_error(t.re, oracle_value(&o.raw, "trace_river_inv_caatinga")) < 1e-12);
    let model = WishartModel::new(river.clone(), 4.0).unwrap();
    let lf = model.log_density(&river).unwrap();
    assert!(oracle_error(lf, oracle_value(&o.raw, "log_density_river_at_river_L4")) < 1e-12);
    // same estimate on both sides is exactly zero for the symmetric forms
    let r = wishart_estimate("River", 900, 4.0);
    assert_eq!(polsar::stat_kl(&r, &r).unwrap().statistic, 0.0);
}
