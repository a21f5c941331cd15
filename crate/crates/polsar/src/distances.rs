//! Test statistics built from stochastic distances.
//!
//! For two maximum likelihood estimates from samples of sizes `m` and `n`,
//! a symmetrized `(h, φ)`-distance `d` becomes the statistic
//!
//! ```text
//! S = 2mn/(m+n) · d / (h'(0) φ''(1)),
//! ```
//!
//! asymptotically `χ²_ν` under equal parameters, with `ν = q²` for the
//! complex Wishart law and `ν = q(q+3)/2` for the real `q`-variate Gaussian.
//!
//! With `A = Σ̂₁`, `B = Σ̂₂`, `h = mn/(m+n)` and a common number of looks `L`:
//!
//! | kind | statistic |
//! |------|-----------|
//! | Kullback–Leibler | `2hL [tr(A⁻¹B + B⁻¹A)/2 − q]` |
//! | Bhattacharyya | `8hL [(log|A| + log|B|)/2 + log|(A⁻¹+B⁻¹)/2|]` |
//! | Hellinger | `8h {1 − [|((A⁻¹+B⁻¹)/2)⁻¹| / √(|A||B|)]^L}` |
//! | Rényi (β) | `2h/β {log 2/(1−β) + log(t₁ + t₂)/(β−1)}`, `t₁ = [|A|^{−β}|B|^{β−1}|(βA⁻¹+(1−β)B⁻¹)⁻¹|]^L`, `t₂` swapped |
//! | χ² | `h/2 [(|A|/|B|² · abs|(2B⁻¹−A⁻¹)⁻¹|)^L + (|B|/|A|² · abs|(2A⁻¹−B⁻¹)⁻¹|)^L − 2]` |
//! | Gaussian Bhattacharyya | `h [(μ₁−μ₂)ᵀ P⁻¹ (μ₁−μ₂) + 4 log(|P| / √(|Σ₁||Σ₂|))]`, `P = (Σ₁+Σ₂)/2` |
//!
//! All of these are evaluated in log-determinant form; `expm1`/`ln_1p` keep
//! the Hellinger, Rényi and χ² brackets accurate when the two estimates are
//! close.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_hpd, inverse, lu, CMatrix, Complex, HermitianMatrix};
use crate::special::{chi2_log10_sf, chi2_sf};
use crate::tolerance;
use crate::wishart::CovarianceEstimate;

pub const DEFAULT_RENYI_BETA: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StatisticKind {
    KullbackLeibler,
    Bhattacharyya,
    Hellinger,
    Renyi { beta: f64 },
    ChiSquare,
    GaussianBhattacharyya,
}

impl StatisticKind {
    pub fn renyi(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta < 1.0 {
            Ok(StatisticKind::Renyi { beta })
        } else {
            Err(Error::BetaOutOfRange(beta))
        }
    }

    /// The five statistics between Wishart laws.
    pub fn wishart_kinds(beta: f64) -> Vec<StatisticKind> {
        vec![
            StatisticKind::KullbackLeibler,
            StatisticKind::Bhattacharyya,
            StatisticKind::Hellinger,
            StatisticKind::Renyi { beta },
            StatisticKind::ChiSquare,
        ]
    }

    /// All six kinds, Gaussian last.
    pub fn all(beta: f64) -> Vec<StatisticKind> {
        let mut kinds = Self::wishart_kinds(beta);
        kinds.push(StatisticKind::GaussianBhattacharyya);
        kinds
    }

    pub fn is_wishart(&self) -> bool {
        !matches!(self, StatisticKind::GaussianBhattacharyya)
    }

    /// Short name used on the command line and in files.
    pub fn name(&self) -> &'static str {
        match self {
            StatisticKind::KullbackLeibler => "kl",
            StatisticKind::Bhattacharyya => "bhattacharyya",
            StatisticKind::Hellinger => "hellinger",
            StatisticKind::Renyi { .. } => "renyi",
            StatisticKind::ChiSquare => "chi2",
            StatisticKind::GaussianBhattacharyya => "gauss-bhattacharyya",
        }
    }

    /// Parses a short name; `beta` is used for `renyi`.
    pub fn parse(name: &str, beta: f64) -> Result<Self> {
        match name {
            "kl" => Ok(StatisticKind::KullbackLeibler),
            "bhattacharyya" => Ok(StatisticKind::Bhattacharyya),
            "hellinger" => Ok(StatisticKind::Hellinger),
            "renyi" => Self::renyi(beta),
            "chi2" => Ok(StatisticKind::ChiSquare),
            "gauss-bhattacharyya" => Ok(StatisticKind::GaussianBhattacharyya),
            other => Err(Error::InvalidArgument(format!("unknown statistic {other:?}"))),
        }
    }

    /// Degrees of freedom of the limiting χ² law for dimension `q`.
    pub fn dof(&self, q: usize) -> u32 {
        let q = q as u32;
        if self.is_wishart() {
            q * q
        } else {
            q * (q + 3) / 2
        }
    }

    /// `h'(0)·φ''(1)` for the generating pair `(h, φ)`:
    ///
    /// * KL: `h(y) = y`, `φ(x) = x log x` → 1
    /// * Bhattacharyya: `h(y) = −log(1−y)`, `φ(x) = −√x + (x+1)/2` → 1·¼
    /// * Hellinger: `h(y) = y/2`, `φ(x) = (√x − 1)²` → ½·½
    /// * Rényi: `h(y) = log((β−1)y + 1)/(β−1)`, `φ(x) = (x^β − β(x−1) − 1)/(β−1)` → 1·β
    /// * χ²: `h(y) = y/4`, `φ(x) = (x−1)²(x+1)/x` → ¼·4
    pub fn scale_constant(&self) -> f64 {
        match self {
            StatisticKind::KullbackLeibler | StatisticKind::ChiSquare => 1.0,
            StatisticKind::Bhattacharyya | StatisticKind::Hellinger | StatisticKind::GaussianBhattacharyya => 0.25,
            StatisticKind::Renyi { beta } => *beta,
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, DEFAULT_RENYI_BETA)
    }
}

/// Outcome of one two-sample test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub kind: StatisticKind,
    pub statistic: f64,
    /// `Pr(χ²_ν ≥ statistic)`; may underflow to zero, see `log10_p`.
    pub p_value: f64,
    pub log10_p: f64,
    pub dof: u32,
    pub m: usize,
    pub n: usize,
}

impl TestResult {
    fn new(kind: StatisticKind, raw: f64, dof: u32, m: usize, n: usize) -> Result<Self> {
        if raw.is_nan() {
            return Err(Error::NumericalError(format!("{kind} statistic is NaN")));
        }
        if raw < -tolerance::NEGATIVE_CLAMP {
            return Err(Error::NumericalError(format!("{kind} statistic is negative: {raw:e}")));
        }
        let statistic = raw.max(0.0);
        Ok(TestResult {
            kind,
            statistic,
            p_value: chi2_sf(statistic, dof),
            log10_p: chi2_log10_sf(statistic, dof),
            dof,
            m,
            n,
        })
    }

    pub fn rejected(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Recovers the symmetrized distance `d` from a statistic by inverting
/// `S = 2mn/(m+n) · d / (h'(0)φ''(1))`.
pub fn distance_from_statistic(result: &TestResult) -> f64 {
    let (m, n) = (result.m as f64, result.n as f64);
    result.statistic * (m + n) / (2.0 * m * n) * result.kind.scale_constant()
}

/// An estimate with its inverse and log-determinant computed once, for
/// repeated comparisons against many prototypes.
#[derive(Clone, Debug)]
pub struct PreparedEstimate {
    sigma: HermitianMatrix,
    inverse: HermitianMatrix,
    log_det: f64,
    sample_size: usize,
    looks: f64,
}

impl PreparedEstimate {
    pub fn new(est: &CovarianceEstimate) -> Result<Self> {
        let log_det = cholesky_hpd(&est.sigma_hat)
            .map_err(|_| Error::SingularMatrix { rcond: 0.0 })?
            .log_det();
        Ok(PreparedEstimate {
            sigma: est.sigma_hat.clone(),
            inverse: inverse(&est.sigma_hat)?,
            log_det,
            sample_size: est.sample_size,
            looks: est.looks,
        })
    }

    pub fn q(&self) -> usize {
        self.sigma.q()
    }
}

fn harmonic(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    m * n / (m + n)
}

/// `Re tr(X·Y)` without forming the product.
fn trace_of_product(x: &CMatrix, y: &CMatrix) -> f64 {
    let q = x.dim();
    let mut acc = 0.0;
    for i in 0..q {
        for j in 0..q {
            acc += (x[(i, j)] * y[(j, i)]).re;
        }
    }
    acc
}

fn log_det_hpd(m: CMatrix) -> Result<f64> {
    let h = HermitianMatrix::symmetrize(m);
    Ok(cholesky_hpd(&h)
        .map_err(|_| Error::SingularMatrix { rcond: 0.0 })?
        .log_det())
}

/// `log |det m|` for a possibly indefinite matrix `m` formed as a
/// combination of operands with total 1-norm `scale`; refused when `m` is
/// singular within the condition floor relative to that scale.
fn log_abs_det_checked(m: &CMatrix, scale: f64) -> Result<f64> {
    let f = lu(m)?;
    let inv = f.inverse();
    let k = scale.max(m.norm1()) * inv.norm1();
    let rcond = if k.is_finite() && k > 0.0 { 1.0 / k } else { 0.0 };
    if !(rcond >= tolerance::RCOND_FLOOR) {
        return Err(Error::SingularMatrix { rcond });
    }
    Ok(f.det().norm().ln())
}

/// `ln((e^a + e^b)/2)` for `a, b ≤ 0`, accurate near zero.
fn ln_mean_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi > -1.0 {
        (0.5 * (a.exp_m1() + b.exp_m1())).ln_1p()
    } else {
        hi + (-(a - b).abs()).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// One of the five Wishart statistics between two prepared estimates.
pub fn wishart_statistic(kind: StatisticKind, a: &PreparedEstimate, b: &PreparedEstimate) -> Result<TestResult> {
    if a.q() != b.q() {
        return Err(Error::DimensionMismatch {
            expected: a.q(),
            found: b.q(),
        });
    }
    if a.looks != b.looks {
        return Err(Error::LooksMismatch(a.looks, b.looks));
    }
    let q = a.q();
    let looks = a.looks;
    let h = harmonic(a.sample_size, b.sample_size);
    let (ai, bi) = (a.inverse.as_matrix(), b.inverse.as_matrix());
    let raw = match kind {
        // equal parameters: every divergence vanishes; skip the round-off
        _ if kind.is_wishart() && a.sigma == b.sigma => 0.0,
        StatisticKind::KullbackLeibler => {
            let t = trace_of_product(ai, b.sigma.as_matrix()) + trace_of_product(bi, a.sigma.as_matrix());
            2.0 * h * looks * (t / 2.0 - q as f64)
        }
        StatisticKind::Bhattacharyya => 8.0 * h * looks * bhattacharyya_bracket(a, b)?,
        StatisticKind::Hellinger => -8.0 * h * (-looks * bhattacharyya_bracket(a, b)?).exp_m1(),
        StatisticKind::Renyi { beta } => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::BetaOutOfRange(beta));
            }
            let l1 = looks
                * (-beta * a.log_det + (beta - 1.0) * b.log_det
                    - log_det_hpd(a.inverse.combine(beta, &b.inverse, 1.0 - beta)?)?);
            let l2 = looks
                * ((beta - 1.0) * a.log_det
                    - beta * b.log_det
                    - log_det_hpd(b.inverse.combine(beta, &a.inverse, 1.0 - beta)?)?);
            -2.0 * h / (beta * (1.0 - beta)) * ln_mean_exp(l1, l2)
        }
        StatisticKind::ChiSquare => {
            let (na, nb) = (ai.norm1(), bi.norm1());
            let d1 = log_abs_det_checked(&b.inverse.combine(2.0, &a.inverse, -1.0)?, 2.0 * nb + na)?;
            let d2 = log_abs_det_checked(&a.inverse.combine(2.0, &b.inverse, -1.0)?, 2.0 * na + nb)?;
            let l1 = looks * (a.log_det - 2.0 * b.log_det - d1);
            let l2 = looks * (b.log_det - 2.0 * a.log_det - d2);
            h / 2.0 * (l1.exp_m1() + l2.exp_m1())
        }
        StatisticKind::GaussianBhattacharyya => {
            return Err(Error::InvalidArgument(
                "the Gaussian Bhattacharyya statistic takes Gaussian estimates".into(),
            ))
        }
    };
    TestResult::new(kind, raw, kind.dof(q), a.sample_size, b.sample_size)
}

/// `(log|A| + log|B|)/2 + log|(A⁻¹ + B⁻¹)/2|`, the Bhattacharyya distance per look.
fn bhattacharyya_bracket(a: &PreparedEstimate, b: &PreparedEstimate) -> Result<f64> {
    let mid = log_det_hpd(a.inverse.combine(0.5, &b.inverse, 0.5)?)?;
    Ok((a.log_det + b.log_det) / 2.0 + mid)
}

/// Wishart statistic of `kind` between two estimates.
pub fn statistic(kind: StatisticKind, a: &CovarianceEstimate, b: &CovarianceEstimate) -> Result<TestResult> {
    if a.looks != b.looks {
        return Err(Error::LooksMismatch(a.looks, b.looks));
    }
    wishart_statistic(kind, &PreparedEstimate::new(a)?, &PreparedEstimate::new(b)?)
}

pub fn stat_kl(a: &CovarianceEstimate, b: &CovarianceEstimate) -> Result<TestResult> {
    statistic(StatisticKind::KullbackLeibler, a, b)
}

pub fn stat_bhattacharyya(a: &CovarianceEstimate, b: &CovarianceEstimate) -> Result<TestResult> {
    statistic(StatisticKind::Bhattacharyya, a, b)
}

pub fn stat_hellinger(a: &CovarianceEstimate, b: &CovarianceEstimate) -> Result<TestResult> {
    statistic(StatisticKind::Hellinger, a, b)
}

pub fn stat_renyi(a: &CovarianceEstimate, b: &CovarianceEstimate, beta: f64) -> Result<TestResult> {
    statistic(StatisticKind::renyi(beta)?, a, b)
}

pub fn stat_chisquare(a: &CovarianceEstimate, b: &CovarianceEstimate) -> Result<TestResult> {
    statistic(StatisticKind::ChiSquare, a, b)
}

/// Maximum likelihood mean and covariance (divisor `N`) of real `q`-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianEstimate {
    mean: Vec<f64>,
    covariance: Vec<f64>,
    sample_size: usize,
}

impl GaussianEstimate {
    /// `covariance` is `q × q`, row-major, and must be symmetric.
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>, sample_size: usize) -> Result<Self> {
        let q = mean.len();
        if covariance.len() != q * q {
            return Err(Error::DimensionMismatch {
                expected: q * q,
                found: covariance.len(),
            });
        }
        if sample_size == 0 {
            return Err(Error::EmptySample);
        }
        if !mean.iter().chain(&covariance).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Gaussian estimate"));
        }
        for i in 0..q {
            if covariance[i * q + i] < 0.0 {
                return Err(Error::NegativeDiagonal {
                    index: i,
                    value: covariance[i * q + i],
                });
            }
            for j in 0..i {
                let asymmetry = (covariance[i * q + j] - covariance[j * q + i]).abs();
                if asymmetry > 0.0 {
                    return Err(Error::NotHermitian { asymmetry });
                }
            }
        }
        Ok(GaussianEstimate {
            mean,
            covariance,
            sample_size,
        })
    }

    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptySample)?;
        let q = first.len();
        let mut acc = GaussianAccumulator::new(q);
        for s in samples {
            if s.len() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: s.len(),
                });
            }
            acc.push(s);
        }
        acc.finish()
    }

    pub fn q(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    fn covariance_matrix(&self) -> HermitianMatrix {
        let q = self.q();
        HermitianMatrix::symmetrize(CMatrix::from_fn(q, |i, j| {
            Complex::new(self.covariance[i * q + j], 0.0)
        }))
    }
}

/// Running sums for a [`GaussianEstimate`].
#[derive(Clone, Debug)]
pub(crate) struct GaussianAccumulator {
    q: usize,
    count: usize,
    sum: Vec<f64>,
    cross: Vec<f64>,
}

impl GaussianAccumulator {
    pub(crate) fn new(q: usize) -> Self {
        GaussianAccumulator {
            q,
            count: 0,
            sum: vec![0.0; q],
            cross: vec![0.0; q * q],
        }
    }

    pub(crate) fn push(&mut self, x: &[f64]) {
        self.count += 1;
        for i in 0..self.q {
            self.sum[i] += x[i];
            for j in 0..self.q {
                self.cross[i * self.q + j] += x[i] * x[j];
            }
        }
    }

    pub(crate) fn finish(self) -> Result<GaussianEstimate> {
        if self.count == 0 {
            return Err(Error::EmptySample);
        }
        let n = self.count as f64;
        let q = self.q;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let mut cov = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..=i {
                let v = self.cross[i * q + j] / n - mean[i] * mean[j];
                cov[i * q + j] = v;
                cov[j * q + i] = v;
            }
            cov[i * q + i] = cov[i * q + i].max(0.0);
        }
        GaussianEstimate::new(mean, cov, self.count)
    }
}

/// Bhattacharyya statistic between two `q`-variate Gaussian estimates,
/// `ν = q(q+3)/2`.
///
/// The bracket `(μ₁−μ₂)ᵀP⁻¹(μ₁−μ₂) + 4 log(|P|/√(|Σ₁||Σ₂|))` equals eight
/// times the Bhattacharyya distance, so the prefactor is `mn/(m+n)`.
pub fn stat_gaussian_bhattacharyya(a: &GaussianEstimate, b: &GaussianEstimate) -> Result<TestResult> {
    if a.q() != b.q() {
        return Err(Error::DimensionMismatch {
            expected: a.q(),
            found: b.q(),
        });
    }
    let q = a.q();
    let kind = StatisticKind::GaussianBhattacharyya;
    let (m, n) = (a.sample_size, b.sample_size);
    if a.mean == b.mean && a.covariance == b.covariance {
        return TestResult::new(kind, 0.0, kind.dof(q), m, n);
    }
    let singular = |_| Error::SingularMatrix { rcond: 0.0 };
    let ld1 = cholesky_hpd(&a.covariance_matrix()).map_err(singular)?.log_det();
    let ld2 = cholesky_hpd(&b.covariance_matrix()).map_err(singular)?.log_det();
    let pooled = a.covariance_matrix().combine(0.5, &b.covariance_matrix(), 0.5)?;
    let pooled = cholesky_hpd(&HermitianMatrix::symmetrize(pooled)).map_err(singular)?;
    let diff: Vec<Complex> = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| Complex::new(x - y, 0.0))
        .collect();
    let solved = pooled.solve(&diff);
    let mahalanobis: f64 = diff.iter().zip(&solved).map(|(d, s)| (d * s).re).sum();
    let log_term = 4.0 * (pooled.log_det() - (ld1 + ld2) / 2.0);
    let raw = harmonic(m, n) * (mahalanobis + log_term);
    TestResult::new(kind, raw, kind.dof(q), m, n)
}
