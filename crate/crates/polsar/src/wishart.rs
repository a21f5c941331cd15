//! The scaled complex Wishart law `W(Σ, L)` of an `L`-look covariance matrix.
//!
//! Its density is
//!
//! ```text
//! f(Z; Σ, L) = L^{qL} |Z|^{L−q} / (|Σ|^L Γ_q(L)) · exp(−L tr(Σ⁻¹ Z)),
//! Γ_q(L)     = π^{q(q−1)/2} ∏_{i=0}^{q−1} Γ(L − i),
//! ```
//!
//! with `E(Z) = Σ`. The maximum likelihood estimator of `Σ` from `N`
//! independent observations is their sample mean.
//!
//! Simulation draws single-look vectors `y ~ CN_q(0, Σ)` through the real
//! `2q`-variate embedding of the circular complex Gaussian and averages `L`
//! outer products `y y*`.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_hpd, CMatrix, Cholesky, Complex, HermitianMatrix, RealMatrix};
use crate::rng::fill_standard_normal;

/// `ln Γ_q(L)`, the log of the complex multivariate gamma function.
pub fn ln_multivariate_gamma(q: usize, looks: f64) -> f64 {
    let qf = q as f64;
    qf * (qf - 1.0) / 2.0 * std::f64::consts::PI.ln() + (0..q).map(|i| ln_gamma_of(looks - i as f64)).sum::<f64>()
}

/// `ln Γ(a)`, through `ln((a−1)!)` for integer `a` (looks are usually whole).
fn ln_gamma_of(a: f64) -> f64 {
    if a.fract() == 0.0 && (1.0..=171.0).contains(&a) {
        (1..a as u32).map(f64::from).product::<f64>().ln()
    } else {
        ln_gamma(a)
    }
}

/// `W(Σ, L)` with `Σ` Hermitian positive definite and `L ≥ q`.
#[derive(Clone, Debug)]
pub struct WishartModel {
    sigma: HermitianMatrix,
    looks: f64,
    chol: Cholesky,
}

impl WishartModel {
    pub fn new(sigma: HermitianMatrix, looks: f64) -> Result<Self> {
        if !looks.is_finite() || looks <= 0.0 {
            return Err(Error::InvalidArgument(format!("looks must be positive, got {looks}")));
        }
        if looks < sigma.q() as f64 {
            return Err(Error::LooksBelowDimension { looks, q: sigma.q() });
        }
        let chol = cholesky_hpd(&sigma)?;
        Ok(WishartModel { sigma, looks, chol })
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn looks(&self) -> f64 {
        self.looks
    }

    pub fn q(&self) -> usize {
        self.sigma.q()
    }

    /// The number of looks as an integer, as simulation requires.
    pub fn integer_looks(&self) -> Result<u32> {
        if self.looks.fract() != 0.0 || self.looks > f64::from(u32::MAX) {
            return Err(Error::NonIntegerLooks(self.looks));
        }
        Ok(self.looks as u32)
    }

    pub fn log_density(&self, z: &HermitianMatrix) -> Result<f64> {
        if z.q() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                found: z.q(),
            });
        }
        let log_det_z = cholesky_hpd(z)
            .map_err(|_| Error::DomainError("|Z| must be positive".into()))?
            .log_det();
        let q = self.q() as f64;
        let l = self.looks;
        // tr(Σ⁻¹Z) = Σ_j (Σ⁻¹ z_j)_j over the columns z_j of Z.
        let zm = z.as_matrix();
        let mut tr = 0.0;
        for j in 0..self.q() {
            let col: Vec<Complex> = (0..self.q()).map(|i| zm[(i, j)]).collect();
            let solved = self.chol.solve(&col);
            tr += solved[j].re;
        }
        Ok(
            q * l * l.ln() + (l - q) * log_det_z
                - l * self.chol.log_det()
                - ln_multivariate_gamma(self.q(), l)
                - l * tr,
        )
    }
}

/// Maximum likelihood estimate `Σ̂` with the number of observations it
/// averages and the (assumed known) number of looks.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma_hat: HermitianMatrix,
    pub sample_size: usize,
    pub looks: f64,
}

impl CovarianceEstimate {
    pub fn new(sigma_hat: HermitianMatrix, sample_size: usize, looks: f64) -> Result<Self> {
        if sample_size == 0 {
            return Err(Error::EmptySample);
        }
        if !looks.is_finite() || looks <= 0.0 {
            return Err(Error::InvalidArgument(format!("looks must be positive, got {looks}")));
        }
        Ok(CovarianceEstimate {
            sigma_hat,
            sample_size,
            looks,
        })
    }

    pub fn q(&self) -> usize {
        self.sigma_hat.q()
    }
}

/// Sample mean of the pixel matrices.
pub fn estimate_covariance(pixels: &[HermitianMatrix], looks: f64) -> Result<CovarianceEstimate> {
    let first = pixels.first().ok_or(Error::EmptySample)?;
    let q = first.q();
    if let Some(p) = pixels.iter().find(|p| p.q() != q) {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: p.q(),
        });
    }
    mean_of_pixels(q, pixels.iter().map(|p| p.as_matrix().as_slice()), looks)
}

/// Mean of row-major pixel matrices, accumulated as offsets from the first
/// pixel so that identical pixels average back to that pixel exactly.
pub(crate) fn mean_of_pixels<'a>(
    q: usize,
    mut pixels: impl Iterator<Item = &'a [Complex]>,
    looks: f64,
) -> Result<CovarianceEstimate> {
    let first = pixels.next().ok_or(Error::EmptySample)?;
    let mut offset = vec![Complex::new(0.0, 0.0); q * q];
    let mut count = 1usize;
    for px in pixels {
        for ((o, z), f) in offset.iter_mut().zip(px).zip(first) {
            *o += z - f;
        }
        count += 1;
    }
    let n = count as f64;
    let mean = first.iter().zip(offset).map(|(f, o)| f + o / n).collect();
    CovarianceEstimate::new(
        HermitianMatrix::symmetrize(CMatrix::from_row_major(q, mean)?),
        count,
        looks,
    )
}

/// Turns an accumulated sum of `count` pixel matrices into an estimate.
pub(crate) fn mean_estimate(q: usize, sum: Vec<Complex>, count: usize, looks: f64) -> Result<CovarianceEstimate> {
    if count == 0 {
        return Err(Error::EmptySample);
    }
    let inv = 1.0 / count as f64;
    let mean = CMatrix::from_row_major(q, sum.into_iter().map(|z| z * inv).collect())?;
    CovarianceEstimate::new(HermitianMatrix::symmetrize(mean), count, looks)
}

/// `Σ*_{2q} = ½ [[Re Σ, −Im Σ], [Im Σ, Re Σ]]`, the covariance of the
/// stacked real and imaginary parts of `y ~ CN_q(0, Σ)`.
pub fn embed_real(sigma: &HermitianMatrix) -> Result<RealMatrix> {
    cholesky_hpd(sigma)?;
    let q = sigma.q();
    let mut out = RealMatrix::zeros(2 * q);
    for i in 0..q {
        for j in 0..q {
            let z = sigma[(i, j)];
            out[(i, j)] = 0.5 * z.re;
            out[(i, j + q)] = -0.5 * z.im;
            out[(i + q, j)] = 0.5 * z.im;
            out[(i + q, j + q)] = 0.5 * z.re;
        }
    }
    Ok(out)
}

/// Draws single-look scattering vectors `y ~ CN_q(0, Σ)`.
#[derive(Clone, Debug)]
pub struct PixelSampler {
    q: usize,
    factor: RealMatrix,
}

impl PixelSampler {
    pub fn new(sigma: &HermitianMatrix) -> Result<Self> {
        let factor = embed_real(sigma)?.cholesky()?;
        Ok(PixelSampler { q: sigma.q(), factor })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Maps `2q` standard normals `g` to `y`: `x = L·g`, where `L` is the
    /// Cholesky factor of the real embedding; the first `q` components of
    /// `x` are the real parts of `y`, the last `q` the imaginary parts.
    pub fn pixel_from_normals(&self, g: &[f64]) -> Result<Vec<Complex>> {
        if g.len() != 2 * self.q {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.q,
                found: g.len(),
            });
        }
        let x = self.factor.mul_vec(g);
        Ok((0..self.q).map(|k| Complex::new(x[k], x[k + self.q])).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex> {
        let mut g = vec![0.0; 2 * self.q];
        fill_standard_normal(rng, &mut g);
        self.pixel_from_normals(&g).expect("buffer sized to 2q")
    }
}

/// One draw of `y ~ CN_q(0, Σ)`.
pub fn sample_gaussian_pixel<R: Rng + ?Sized>(sigma: &HermitianMatrix, rng: &mut R) -> Result<Vec<Complex>> {
    Ok(PixelSampler::new(sigma)?.sample(rng))
}

/// Draws `L`-look covariance matrices `Z = L⁻¹ Σ y_i y_i*`.
#[derive(Clone, Debug)]
pub struct MultilookSampler {
    pixel: PixelSampler,
    looks: u32,
}

impl MultilookSampler {
    pub fn new(model: &WishartModel) -> Result<Self> {
        let looks = model.integer_looks()?;
        Ok(MultilookSampler {
            pixel: PixelSampler::new(model.sigma())?,
            looks,
        })
    }

    pub fn q(&self) -> usize {
        self.pixel.q
    }

    /// Writes the `q²` entries of one draw, row-major, into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [Complex]) {
        let q = self.q();
        debug_assert_eq!(out.len(), q * q);
        out.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        for _ in 0..self.looks {
            let y = self.pixel.sample(rng);
            accumulate_outer(&y, out);
        }
        let inv = 1.0 / f64::from(self.looks);
        for i in 0..q {
            out[i * q + i].im = 0.0;
            for j in 0..q {
                out[i * q + j] *= inv;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HermitianMatrix {
        let q = self.q();
        let mut buf = vec![Complex::new(0.0, 0.0); q * q];
        self.sample_into(rng, &mut buf);
        HermitianMatrix::symmetrize(CMatrix::from_row_major(q, buf).expect("q² entries"))
    }
}

/// `out += y y*`, keeping the lower triangle the exact conjugate of the upper.
fn accumulate_outer(y: &[Complex], out: &mut [Complex]) {
    let q = y.len();
    for i in 0..q {
        out[i * q + i] += Complex::new(y[i].norm_sqr(), 0.0);
        for j in (i + 1)..q {
            let v = y[i] * y[j].conj();
            out[i * q + j] += v;
            out[j * q + i] += v.conj();
        }
    }
}

/// One `L`-look covariance matrix drawn from `model`.
pub fn sample_multilook<R: Rng + ?Sized>(model: &WishartModel, rng: &mut R) -> Result<HermitianMatrix> {
    Ok(MultilookSampler::new(model)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::det;
    use crate::rng::{stream, Domain};
    use crate::scenes::preset;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn scalar(x: f64) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[x]).unwrap()
    }

    #[test]
    fn log_density_scalar_cases() {
        let m = WishartModel::new(scalar(1.0), 1.0).unwrap();
        assert!((m.log_density(&scalar(1.0)).unwrap() + 1.0).abs() < 1e-15);
        let m4 = WishartModel::new(scalar(1.0), 4.0).unwrap();
        let expected = 4.0 * 4f64.ln() - 4.0 - 6f64.ln();
        assert!((m4.log_density(&scalar(1.0)).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn log_density_river_matches_oracle() {
        // Reference from tests/oracle/statistics_oracle.py.
        let river = preset("River").unwrap().sigma;
        let m = WishartModel::new(river.clone(), 4.0).unwrap();
        let got = m.log_density(&river).unwrap();
        assert!((got - 54.758_737_574_292_61).abs() < 1e-10 * 54.76, "{got}");
    }

    #[test]
    fn log_density_domain_errors() {
        let m = WishartModel::new(HermitianMatrix::identity(2), 2.0).unwrap();
        let singular = HermitianMatrix::from_upper(2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(m.log_density(&singular), Err(Error::DomainError(_))));
        assert!(matches!(
            WishartModel::new(HermitianMatrix::identity(3), 2.0),
            Err(Error::LooksBelowDimension { .. })
        ));
    }

    #[test]
    fn scalar_density_integrates_to_one() {
        for looks in [1.0, 4.0] {
            let m = WishartModel::new(scalar(1.0), looks).unwrap();
            // z = t/(1−t) maps (0, 1) onto (0, ∞); midpoint rule in t.
            let n = 200_000;
            let mut total = 0.0;
            for i in 0..n {
                let t = (i as f64 + 0.5) / n as f64;
                let z = t / (1.0 - t);
                let jac = 1.0 / ((1.0 - t) * (1.0 - t));
                total += m.log_density(&scalar(z)).unwrap().exp() * jac;
            }
            total /= n as f64;
            assert!((total - 1.0).abs() < 1e-6, "L = {looks}: {total}");
        }
    }

    #[test]
    fn estimate_covariance_cases() {
        let i = HermitianMatrix::identity(3);
        let e = estimate_covariance(&[i.clone(), i.clone(), i.clone()], 4.0).unwrap();
        assert_eq!(e.sigma_hat, i);
        assert_eq!(e.sample_size, 3);
        let a = preset("Tillage").unwrap().sigma;
        let e = estimate_covariance(std::slice::from_ref(&a), 4.0).unwrap();
        assert_eq!(e.sigma_hat, a);
        assert_eq!(e.sample_size, 1);
        assert!(matches!(estimate_covariance(&[], 4.0), Err(Error::EmptySample)));
    }

    #[test]
    fn estimate_from_900_draws_is_close() {
        let sigma = preset("Corn 1").unwrap().sigma;
        let sampler = MultilookSampler::new(&WishartModel::new(sigma.clone(), 4.0).unwrap()).unwrap();
        let mut failures = 0;
        for seed in 0..100 {
            let mut rng = stream(seed, Domain::Experiment, 1);
            let draws: Vec<_> = (0..900).map(|_| sampler.sample(&mut rng)).collect();
            let est = estimate_covariance(&draws, 4.0).unwrap();
            assert_eq!(est.sigma_hat.as_matrix().hermitian_asymmetry(), 0.0);
            assert!(cholesky_hpd(&est.sigma_hat).is_ok());
            let rel = est
                .sigma_hat
                .as_matrix()
                .sub(sigma.as_matrix())
                .unwrap()
                .frobenius_norm()
                / sigma.as_matrix().frobenius_norm();
            if rel >= 0.05 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 100 seeds above 5%");
    }

    #[test]
    fn embed_real_cases() {
        let e = embed_real(&scalar(2.0)).unwrap();
        assert_eq!(e.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let e = embed_real(&HermitianMatrix::from_real_diagonal(&[3.0, 5.0]).unwrap()).unwrap();
        let expected = RealMatrix::from_row_major(
            4,
            vec![
                1.5, 0.0, 0.0, 0.0, 0.0, 2.5, 0.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 2.5,
            ],
        )
        .unwrap();
        assert_eq!(e, expected);
        let s = embed_real(&preset("Soybean 1").unwrap().sigma).unwrap();
        assert!(s.is_symmetric());
        assert!(s.cholesky().is_ok());
        let singular = HermitianMatrix::from_upper(2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(embed_real(&singular), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn embedding_spectrum_doubles_that_of_half_sigma() {
        // det(E − λI) = det(Σ/2 − λI)² as polynomials in λ: checked at
        // more points than the degree 2q.
        let sigma = preset("Soybean 3").unwrap().sigma;
        let e = embed_real(&sigma).unwrap();
        let n = e.dim();
        for k in 0..12 {
            let lambda = -0.02 + 0.01 * k as f64;
            let shifted = CMatrix::from_fn(n, |i, j| c(e[(i, j)] - if i == j { lambda } else { 0.0 }, 0.0));
            let half = CMatrix::from_fn(3, |i, j| {
                sigma[(i, j)] * 0.5 - if i == j { c(lambda, 0.0) } else { c(0.0, 0.0) }
            });
            let lhs = det(&shifted).re;
            let rhs = det(&half).norm_sqr();
            assert!(
                (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-30),
                "λ={lambda}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn fixed_normals_map_to_hand_checked_pixel() {
        let s = PixelSampler::new(&scalar(2.0)).unwrap();
        assert_eq!(s.pixel_from_normals(&[1.0, 1.0]).unwrap(), vec![c(1.0, 1.0)]);
    }

    #[test]
    fn pixel_moments_match_sigma() {
        let sigma = preset("River").unwrap().sigma;
        let s = PixelSampler::new(&sigma).unwrap();
        let mut rng = stream(11, Domain::Experiment, 2);
        let n = 100_000;
        let q = 3;
        let mut sum = vec![c(0.0, 0.0); q * q];
        let mut sum_sq = vec![(0.0, 0.0); q * q];
        let mut mean = vec![c(0.0, 0.0); q];
        let mut mean_sq = vec![(0.0, 0.0); q];
        for _ in 0..n {
            let y = s.sample(&mut rng);
            for i in 0..q {
                mean[i] += y[i];
                mean_sq[i].0 += y[i].re * y[i].re;
                mean_sq[i].1 += y[i].im * y[i].im;
                for j in 0..q {
                    let v = y[i] * y[j].conj();
                    sum[i * q + j] += v;
                    sum_sq[i * q + j].0 += v.re * v.re;
                    sum_sq[i * q + j].1 += v.im * v.im;
                }
            }
        }
        let nf = n as f64;
        for i in 0..q {
            let m = mean[i] / nf;
            let se_re = (mean_sq[i].0 / nf - m.re * m.re).sqrt() / nf.sqrt();
            let se_im = (mean_sq[i].1 / nf - m.im * m.im).sqrt() / nf.sqrt();
            assert!(m.re.abs() < 3.0 * se_re && m.im.abs() < 3.0 * se_im, "mean {i}: {m}");
            for j in 0..q {
                let k = i * q + j;
                let m = sum[k] / nf;
                let se_re = (sum_sq[k].0 / nf - m.re * m.re).sqrt() / nf.sqrt();
                let se_im = (sum_sq[k].1 / nf - m.im * m.im).sqrt() / nf.sqrt();
                let target = sigma[(i, j)];
                assert!((m.re - target.re).abs() < 3.0 * se_re, "re({i},{j}): {m} vs {target}");
                if i != j {
                    assert!((m.im - target.im).abs() < 3.0 * se_im, "im({i},{j}): {m} vs {target}");
                }
            }
        }
    }

    #[test]
    fn single_look_is_the_outer_product() {
        let model = WishartModel::new(scalar(2.0), 1.0).unwrap();
        let sampler = MultilookSampler::new(&model).unwrap();
        let mut a = stream(5, Domain::Experiment, 3);
        let mut b = stream(5, Domain::Experiment, 3);
        let z = sampler.sample(&mut a);
        let y = sampler.pixel.sample(&mut b);
        assert_eq!(z[(0, 0)].re, y[0].norm_sqr());
    }

    #[test]
    fn multilook_mean_is_sigma() {
        let sigma = preset("Soybean 2").unwrap().sigma;
        let model = WishartModel::new(sigma.clone(), 4.0).unwrap();
        let sampler = MultilookSampler::new(&model).unwrap();
        let mut rng = stream(12, Domain::Experiment, 4);
        let n = 10_000;
        let draws: Vec<_> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        for i in 0..3 {
            for j in 0..3 {
                let vals: Vec<Complex> = draws.iter().map(|z| z[(i, j)]).collect();
                let m = vals.iter().sum::<Complex>() / n as f64;
                let sd_re = (vals.iter().map(|v| (v.re - m.re).powi(2)).sum::<f64>() / n as f64).sqrt();
                assert!((m.re - sigma[(i, j)].re).abs() < 3.0 * sd_re / (n as f64).sqrt());
                if i != j {
                    let sd_im = (vals.iter().map(|v| (v.im - m.im).powi(2)).sum::<f64>() / n as f64).sqrt();
                    assert!((m.im - sigma[(i, j)].im).abs() < 3.0 * sd_im / (n as f64).sqrt());
                }
            }
        }
    }

    #[test]
    fn single_channel_intensity_is_gamma() {
        // q = 1, Σ = 1, L = 4: Z ~ Gamma(shape 4, mean 1), whose CDF is
        // 1 − e^{−4z} Σ_{k<4} (4z)^k / k!.
        let model = WishartModel::new(scalar(1.0), 4.0).unwrap();
        let sampler = MultilookSampler::new(&model).unwrap();
        let mut rng = stream(3, Domain::Experiment, 5);
        let n = 10_000;
        let mut z: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)[(0, 0)].re).collect();
        z.sort_by(f64::total_cmp);
        let cdf = |x: f64| {
            let t = 4.0 * x;
            1.0 - (-t).exp() * (1.0 + t + t * t / 2.0 + t * t * t / 6.0)
        };
        let d = z
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn non_integer_looks_rejected_for_simulation() {
        let model = WishartModel::new(HermitianMatrix::identity(3), 2.97 + 1.0).unwrap();
        assert!(matches!(MultilookSampler::new(&model), Err(Error::NonIntegerLooks(_))));
        let mut rng = stream(0, Domain::Experiment, 0);
        assert!(sample_multilook(&model, &mut rng).is_err());
        assert!(model.log_density(&HermitianMatrix::identity(3)).is_ok());
    }
}
