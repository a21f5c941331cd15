#![allow(dead_code)]

use polsar::linalg::HermitianMatrix;
use polsar::{preset, CovarianceEstimate, GaussianEstimate, StatisticKind};
use serde_json::Value;

pub struct OraclePair {
    pub a: String,
    pub b: String,
    /// (kind, 50-digit reference) in the order kl, bhattacharyya,
    /// hellinger, renyi, chi2, gauss-bhattacharyya.
    pub values: Vec<(StatisticKind, f64)>,
}

pub struct Oracle {
    pub m: usize,
    pub n: usize,
    pub looks: f64,
    pub beta: f64,
    pub raw: Value,
    pub pairs: Vec<OraclePair>,
}

fn num(v: &Value) -> f64 {
    v.as_str().expect("decimal string").parse().expect("decimal")
}

pub fn oracle() -> Oracle {
    let raw: Value = serde_json::from_str(include_str!("../data/oracle_statistics.json")).unwrap();
    let beta = raw["beta"].as_f64().unwrap();
    let keys = [
        ("kl", StatisticKind::KullbackLeibler),
        ("bhattacharyya", StatisticKind::Bhattacharyya),
        ("hellinger", StatisticKind::Hellinger),
        ("renyi_0.9", StatisticKind::Renyi { beta }),
        ("chi2", StatisticKind::ChiSquare),
        ("gauss_bhattacharyya", StatisticKind::GaussianBhattacharyya),
    ];
    let pairs = raw["pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| OraclePair {
            a: p["a"].as_str().unwrap().to_string(),
            b: p["b"].as_str().unwrap().to_string(),
            values: keys.iter().map(|(k, kind)| (*kind, num(&p[*k]))).collect(),
        })
        .collect();
    Oracle {
        m: raw["m"].as_u64().unwrap() as usize,
        n: raw["n"].as_u64().unwrap() as usize,
        looks: raw["looks"].as_f64().unwrap(),
        beta,
        raw,
        pairs,
    }
}

pub fn oracle_value(raw: &Value, key: &str) -> f64 {
    num(&raw[key])
}

pub fn wishart_estimate(name: &str, n: usize, looks: f64) -> CovarianceEstimate {
    CovarianceEstimate::new(preset(name).unwrap().sigma, n, looks).unwrap()
}

/// Gaussian stand-in used by the oracle: mean √diag(Σ), covariance Re(Σ).
pub fn gaussian_surrogate(name: &str, n: usize) -> GaussianEstimate {
    let s: HermitianMatrix = preset(name).unwrap().sigma;
    let q = s.q();
    let mean = s.diagonal().iter().map(|d| d.sqrt()).collect();
    let cov = (0..q * q).map(|k| s[(k / q, k % q)].re).collect();
    GaussianEstimate::new(mean, cov, n).unwrap()
}

/// Computes one statistic between two presets the way the oracle defines it.
pub fn preset_statistic(kind: StatisticKind, a: &str, b: &str, m: usize, n: usize, looks: f64) -> polsar::Result<f64> {
    let r = match kind {
        StatisticKind::GaussianBhattacharyya => {
            polsar::stat_gaussian_bhattacharyya(&gaussian_surrogate(a, m), &gaussian_surrogate(b, n))?
        }
        _ => polsar::distances::statistic(kind, &wishart_estimate(a, m, looks), &wishart_estimate(b, n, looks))?,
    };
    Ok(r.statistic)
}

/// References below this are zero up to the oracle's own 50-digit round-off.
pub const ORACLE_ZERO: f64 = 1e-30;

/// Relative error, or the absolute value when the reference is zero.
pub fn oracle_error(got: f64, want: f64) -> f64 {
    if want.abs() < ORACLE_ZERO {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
