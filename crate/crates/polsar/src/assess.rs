//! Accuracy assessment: confusion matrices, kappa and its variance, kappa
//! comparison and the share of segments whose assignment is not rejected.
//!
//! With `n` assessed pixels, `n_ij` the count predicted `i` with truth `j`,
//! `n_i+` row and `n_+j` column totals:
//!
//! ```text
//! θ₁ = Σ n_ii / n
//! θ₂ = Σ n_i+ n_+i / n²
//! θ₃ = Σ n_ii (n_i+ + n_+i) / n²
//! θ₄ = Σ_ij n_ij (n_j+ + n_+i)² / n³
//!
//! κ̂      = (θ₁ − θ₂) / (1 − θ₂)
//! var(κ̂) = 1/n · [ θ₁(1−θ₁)/(1−θ₂)²
//!                 + 2(1−θ₁)(2θ₁θ₂ − θ₃)/(1−θ₂)³
//!                 + (1−θ₁)²(θ₄ − 4θ₂²)/(1−θ₂)⁴ ]
//! ```
//!
//! (the delta-method estimator of Congalton and Green).

use serde::{Deserialize, Serialize};

use crate::classifier::SegmentAssignment;
use crate::error::{Error, Result};
use crate::raster::LabelRaster;
use crate::special::normal_two_sided_p;

/// `counts[i][j]` = pixels of true class `j` predicted as class `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                found: counts.len(),
            });
        }
        if counts.iter().sum::<u64>() == 0 {
            return Err(Error::InvalidArgument("confusion matrix is empty".into()));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, predicted: usize, truth: usize) -> u64 {
        self.counts[predicted * self.k + truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_totals(&self) -> Vec<u64> {
        self.counts.chunks(self.k).map(|r| r.iter().sum()).collect()
    }

    pub fn column_totals(&self) -> Vec<u64> {
        (0..self.k).map(|j| (0..self.k).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn diagonal(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        self.diagonal() as f64 / self.total() as f64
    }
}

/// Counts pixels where both rasters carry a label and `mask` (if given) is
/// non-negative. Pixels predicted `-1` (unclassified) are left out.
pub fn confusion(
    predicted: &LabelRaster,
    truth: &LabelRaster,
    mask: Option<&LabelRaster>,
    classes: usize,
) -> Result<ConfusionMatrix> {
    for other in std::iter::once(truth).chain(mask) {
        if (other.width, other.height) != (predicted.width, predicted.height) {
            return Err(Error::DimensionMismatch {
                expected: predicted.labels.len(),
                found: other.labels.len(),
            });
        }
    }
    let mut counts = vec![0u64; classes * classes];
    for p in 0..predicted.labels.len() {
        if mask.is_some_and(|m| m.labels[p] < 0) {
            continue;
        }
        let (i, j) = (predicted.labels[p], truth.labels[p]);
        if i < 0 || j < 0 {
            continue;
        }
        let (i, j) = (i as usize, j as usize);
        if i >= classes || j >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {} outside 0..{classes} at pixel {p}",
                i.max(j)
            )));
        }
        counts[i * classes + j] += 1;
    }
    ConfusionMatrix::from_counts(classes, counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub overall_accuracy: f64,
    pub kappa: f64,
    pub variance: f64,
    pub total: u64,
}

pub fn kappa(cm: &ConfusionMatrix) -> Result<KappaReport> {
    let n = cm.total() as f64;
    let rows = cm.row_totals();
    let cols = cm.column_totals();
    let k = cm.classes();
    let t1 = cm.diagonal() as f64 / n;
    let t2 = (0..k).map(|i| rows[i] as f64 * cols[i] as f64).sum::<f64>() / (n * n);
    if 1.0 - t2 <= 0.0 {
        return Err(Error::DegenerateMarginals);
    }
    let t3 = (0..k)
        .map(|i| cm.get(i, i) as f64 * (rows[i] + cols[i]) as f64)
        .sum::<f64>()
        / (n * n);
    let mut t4 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let c = cm.get(i, j);
            if c > 0 {
                t4 += c as f64 * ((rows[j] + cols[i]) as f64).powi(2);
            }
        }
    }
    let t4 = t4 / (n * n * n);
    let d = 1.0 - t2;
    let variance = (t1 * (1.0 - t1) / (d * d)
        + 2.0 * (1.0 - t1) * (2.0 * t1 * t2 - t3) / (d * d * d)
        + (1.0 - t1).powi(2) * (t4 - 4.0 * t2 * t2) / (d * d * d * d))
        / n;
    Ok(KappaReport {
        overall_accuracy: t1,
        kappa: (t1 - t2) / d,
        variance: variance.max(0.0),
        total: cm.total(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaComparison {
    pub z: f64,
    pub p_value: f64,
}

/// `z = (κ̂₁ − κ̂₂)/√(v₁ + v₂)` with a two-sided normal p-value.
pub fn kappa_equality_test(a: &KappaReport, b: &KappaReport) -> Result<KappaComparison> {
    if !(a.variance > 0.0 && b.variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let z = (a.kappa - b.kappa) / (a.variance + b.variance).sqrt();
    Ok(KappaComparison {
        z,
        p_value: normal_two_sided_p(z),
    })
}

/// Share of classified segments whose winning p-value is at least `alpha`.
/// Zero when nothing was classified.
pub fn non_rejection_rate(assignments: &[SegmentAssignment], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let winners: Vec<f64> = assignments
        .iter()
        .filter_map(|a| a.winning())
        .map(|w| w.p_value)
        .collect();
    if winners.is_empty() {
        return Ok(0.0);
    }
    Ok(winners.iter().filter(|&&p| p >= alpha).count() as f64 / winners.len() as f64)
}
