//! Minimum-statistic classification of image segments against prototypes.
//!
//! Each segment `C_i` is summarized by its ML estimate (sample size `m` =
//! its pixel count) and compared with every prototype (sample size `n`);
//! the segment takes the class whose statistic is smallest, and the
//! p-value of that statistic says how plausible the assignment is.

use rayon::prelude::*;

use crate::distances::{
    stat_gaussian_bhattacharyya, wishart_statistic, GaussianAccumulator, GaussianEstimate, PreparedEstimate,
    StatisticKind, TestResult,
};
use crate::error::{Error, Result};
use crate::raster::{CovRaster, LabelRaster, SegmentMap};
use crate::wishart::{mean_of_pixels, CovarianceEstimate};

/// A named class with its training estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Prototype {
    pub name: String,
    pub wishart: CovarianceEstimate,
    /// Amplitude mean and covariance, needed only by the Gaussian statistic.
    pub gaussian: Option<GaussianEstimate>,
}

/// Prototypes with unique names sharing `q` and the number of looks.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeSet {
    entries: Vec<Prototype>,
}

impl PrototypeSet {
    pub fn new(entries: Vec<Prototype>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidArgument("prototype set is empty".into()))?;
        let (q, looks) = (first.wishart.q(), first.wishart.looks);
        for (i, p) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.name == p.name) {
                return Err(Error::DuplicateClass(p.name.clone()));
            }
            if p.wishart.q() != q {
                return Err(Error::DimensionMismatch {
                    expected: q,
                    found: p.wishart.q(),
                });
            }
            if p.wishart.looks != looks {
                return Err(Error::LooksMismatch(looks, p.wishart.looks));
            }
            if let Some(g) = &p.gaussian {
                if g.q() != q {
                    return Err(Error::DimensionMismatch {
                        expected: q,
                        found: g.q(),
                    });
                }
            }
        }
        Ok(PrototypeSet { entries })
    }

    pub fn entries(&self) -> &[Prototype] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|p| p.name == name)
    }

    pub fn q(&self) -> usize {
        self.entries[0].wishart.q()
    }

    pub fn looks(&self) -> f64 {
        self.entries[0].wishart.looks
    }

    /// The same prototypes with every estimate relabelled to `looks`.
    pub fn with_looks(mut self, looks: f64) -> Result<Self> {
        if !looks.is_finite() || looks <= 0.0 {
            return Err(Error::InvalidArgument(format!("looks must be positive, got {looks}")));
        }
        for p in &mut self.entries {
            p.wishart.looks = looks;
        }
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Assigned {
        class_index: usize,
        winning: TestResult,
        /// One result per prototype, in prototype order.
        all_stats: Vec<TestResult>,
    },
    /// Estimation or a comparison failed; `reason` is a short code.
    Unclassified { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentAssignment {
    pub segment_id: usize,
    pub kind: StatisticKind,
    pub pixel_count: usize,
    pub outcome: Outcome,
}

impl SegmentAssignment {
    pub fn class_index(&self) -> Option<usize> {
        match &self.outcome {
            Outcome::Assigned { class_index, .. } => Some(*class_index),
            Outcome::Unclassified { .. } => None,
        }
    }

    pub fn winning(&self) -> Option<&TestResult> {
        match &self.outcome {
            Outcome::Assigned { winning, .. } => Some(winning),
            Outcome::Unclassified { .. } => None,
        }
    }

    pub fn all_stats(&self) -> Option<&[TestResult]> {
        match &self.outcome {
            Outcome::Assigned { all_stats, .. } => Some(all_stats),
            Outcome::Unclassified { .. } => None,
        }
    }
}

fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::SingularMatrix { .. } | Error::NotPositiveDefinite { .. } => "singular-estimate",
        Error::NumericalError(_) => "numerical-error",
        Error::EmptySample => "empty-segment",
        _ => "estimation-failed",
    }
}

/// Index of the smallest statistic, lowest index on ties.
fn argmin(stats: &[TestResult]) -> usize {
    let mut best = 0;
    for (i, s) in stats.iter().enumerate().skip(1) {
        if s.statistic < stats[best].statistic {
            best = i;
        }
    }
    best
}

fn decide(results: Result<Vec<TestResult>>) -> Outcome {
    match results {
        Ok(all_stats) => {
            let class_index = argmin(&all_stats);
            Outcome::Assigned {
                class_index,
                winning: all_stats[class_index],
                all_stats,
            }
        }
        Err(e) => Outcome::Unclassified {
            reason: reason_code(&e).to_string(),
        },
    }
}

/// Classifies every segment with `kind`; output is ordered by segment id.
///
/// The Gaussian kind works on amplitudes (square roots of the diagonal of
/// each pixel) and needs Gaussian estimates on every prototype.
pub fn classify_segments(
    raster: &CovRaster,
    segmap: &SegmentMap,
    protos: &PrototypeSet,
    kind: StatisticKind,
) -> Result<Vec<SegmentAssignment>> {
    if raster.width() != segmap.width() || raster.height() != segmap.height() {
        return Err(Error::DimensionMismatch {
            expected: raster.len(),
            found: segmap.width() * segmap.height(),
        });
    }
    if raster.q() != protos.q() {
        return Err(Error::DimensionMismatch {
            expected: protos.q(),
            found: raster.q(),
        });
    }
    let q = raster.q();
    let ids: Vec<usize> = (0..segmap.segment_count()).collect();
    let assign = |id: usize, outcome: Outcome| SegmentAssignment {
        segment_id: id,
        kind,
        pixel_count: segmap.pixels(id).len(),
        outcome,
    };

    if kind.is_wishart() {
        if raster.looks() != protos.looks() {
            return Err(Error::LooksMismatch(raster.looks(), protos.looks()));
        }
        let prepared: Vec<Result<PreparedEstimate>> = protos
            .entries()
            .iter()
            .map(|p| PreparedEstimate::new(&p.wishart))
            .collect();
        if let Some(Err(e)) = prepared.iter().find(|p| p.is_err()) {
            return Err(Error::InvalidArgument(format!("prototype is unusable: {e}")));
        }
        let prepared: Vec<PreparedEstimate> = prepared.into_iter().map(|p| p.unwrap()).collect();
        Ok(ids
            .par_iter()
            .map(|&id| {
                let results = segment_estimate(raster, segmap.pixels(id))
                    .and_then(|e| PreparedEstimate::new(&e))
                    .and_then(|seg| prepared.iter().map(|p| wishart_statistic(kind, &seg, p)).collect());
                assign(id, decide(results))
            })
            .collect())
    } else {
        let gaussians: Vec<&GaussianEstimate> = protos
            .entries()
            .iter()
            .map(|p| {
                p.gaussian
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument(format!("prototype {:?} has no Gaussian estimate", p.name)))
            })
            .collect::<Result<_>>()?;
        Ok(ids
            .par_iter()
            .map(|&id| {
                let mut acc = GaussianAccumulator::new(q);
                let mut amp = vec![0.0; q];
                for &p in segmap.pixels(id) {
                    let px = raster.pixel(p);
                    for k in 0..q {
                        amp[k] = px[k * q + k].re.sqrt();
                    }
                    acc.push(&amp);
                }
                let results = acc
                    .finish()
                    .and_then(|seg| gaussians.iter().map(|g| stat_gaussian_bhattacharyya(&seg, g)).collect());
                assign(id, decide(results))
            })
            .collect())
    }
}

/// ML estimate over the given pixels of the raster.
pub fn segment_estimate(raster: &CovRaster, pixels: &[usize]) -> Result<CovarianceEstimate> {
    mean_of_pixels(raster.q(), pixels.iter().map(|&p| raster.pixel(p)), raster.looks())
}

/// A real `q`-band image.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeImage {
    pub width: usize,
    pub height: usize,
    pub q: usize,
    /// Pixel-major: `q` values per pixel.
    pub data: Vec<f64>,
}

/// Square roots of the intensities (diagonal entries) of every pixel.
pub fn amplitudes(raster: &CovRaster) -> Result<AmplitudeImage> {
    let q = raster.q();
    let mut data = Vec::with_capacity(raster.len() * q);
    for p in 0..raster.len() {
        let px = raster.pixel(p);
        for k in 0..q {
            let v = px[k * q + k].re;
            if v < 0.0 {
                return Err(Error::NegativeIntensity { pixel: p, value: v });
            }
            data.push(v.sqrt());
        }
    }
    Ok(AmplitudeImage {
        width: raster.width(),
        height: raster.height(),
        q,
        data,
    })
}

/// Per-pixel class labels from segment assignments; `-1` for masked pixels
/// and unclassified segments.
pub fn predicted_labels(assignments: &[SegmentAssignment], segmap: &SegmentMap) -> LabelRaster {
    let mut out = LabelRaster::filled(segmap.width(), segmap.height(), -1);
    for a in assignments {
        if let Some(c) = a.class_index() {
            for &p in segmap.pixels(a.segment_id) {
                out.labels[p] = c as i32;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedAssignment {
    pub segment_id: usize,
    /// Class chosen by each run, in run order.
    pub votes: Vec<(StatisticKind, Option<usize>)>,
    pub winner: Option<usize>,
}

/// Majority vote across runs of different statistics. Ties go to the
/// Bhattacharyya choice when it is among the tied classes, otherwise to the
/// lowest class index. Unclassified votes are ignored.
pub fn fuse_majority(runs: &[Vec<SegmentAssignment>]) -> Result<Vec<FusedAssignment>> {
    let first = runs.first().ok_or(Error::MismatchedSegments)?;
    for run in runs {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.segment_id != b.segment_id) {
            return Err(Error::MismatchedSegments);
        }
    }
    let classes = runs
        .iter()
        .flatten()
        .filter_map(SegmentAssignment::class_index)
        .max()
        .map_or(0, |c| c + 1);
    let mut out = Vec::with_capacity(first.len());
    for (s, seg) in first.iter().enumerate() {
        let votes: Vec<(StatisticKind, Option<usize>)> = runs.iter().map(|r| (r[s].kind, r[s].class_index())).collect();
        let mut counts = vec![0usize; classes];
        for c in votes.iter().filter_map(|v| v.1) {
            counts[c] += 1;
        }
        let top = counts.iter().copied().max().unwrap_or(0);
        let winner = if top == 0 {
            None
        } else {
            let bhattacharyya = votes
                .iter()
                .find(|(k, _)| *k == StatisticKind::Bhattacharyya)
                .and_then(|v| v.1)
                .filter(|&c| counts[c] == top);
            bhattacharyya.or_else(|| counts.iter().position(|&c| c == top))
        };
        out.push(FusedAssignment {
            segment_id: seg.segment_id,
            votes,
            winner,
        });
    }
    Ok(out)
}

/// Every class whose p-value is at least `threshold`; may be empty.
pub fn fuzzy_assign(stats: &[TestResult], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(stats
        .iter()
        .enumerate()
        .filter(|(_, r)| r.p_value >= threshold)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Complex, HermitianMatrix};
    use crate::raster::grid_segment;
    use crate::scenes::{exact_prototypes, preset};
    use crate::special::chi2_sf;

    fn constant_raster(sigmas: &[HermitianMatrix], width: usize, tile: usize) -> CovRaster {
        // one tile-wide column strip per matrix
        let height = tile;
        let mut data = Vec::new();
        for _y in 0..height {
            for x in 0..width {
                data.extend_from_slice(sigmas[x / tile].as_matrix().as_slice());
            }
        }
        CovRaster::new(width, height, 3, 4.0, data).unwrap()
    }

    #[test]
    fn segment_equal_to_a_prototype_gets_zero() {
        let protos = exact_prototypes(900, 4.0).unwrap();
        let sig = [preset("Tillage").unwrap().sigma, preset("River").unwrap().sigma];
        let raster = constant_raster(&sig, 4, 2);
        let segs = grid_segment(4, 2, 2).unwrap();
        for kind in StatisticKind::wishart_kinds(0.9) {
            let out = classify_segments(&raster, &segs, &protos, kind).unwrap();
            assert_eq!(out[0].class_index(), protos.index_of("Tillage"));
            assert_eq!(out[1].class_index(), protos.index_of("River"));
            for a in &out {
                let w = a.winning().unwrap();
                assert!(w.statistic <= 1e-9, "{kind} {}", w.statistic);
                assert!(w.p_value >= 1.0 - 1e-9);
                assert_eq!(w.p_value, chi2_sf(w.statistic, 9));
                assert_eq!(w.m, 4);
                assert_eq!(w.n, 900);
            }
        }
    }

    #[test]
    fn singular_segment_is_unclassified() {
        let protos = exact_prototypes(900, 4.0).unwrap();
        let mut one = vec![Complex::new(0.0, 0.0); 9];
        one[0] = Complex::new(1.0, 0.0);
        let raster = CovRaster::new(1, 1, 3, 4.0, one).unwrap();
        let segs = grid_segment(1, 1, 1).unwrap();
        let out = classify_segments(&raster, &segs, &protos, StatisticKind::KullbackLeibler).unwrap();
        assert_eq!(
            out[0].outcome,
            Outcome::Unclassified {
                reason: "singular-estimate".into()
            }
        );
    }

    #[test]
    fn looks_must_agree() {
        let protos = exact_prototypes(900, 3.0).unwrap();
        let raster = constant_raster(&[preset("River").unwrap().sigma], 1, 1);
        let segs = grid_segment(1, 1, 1).unwrap();
        let r = classify_segments(&raster, &segs, &protos, StatisticKind::Hellinger);
        assert!(matches!(r, Err(Error::LooksMismatch(..))));
        assert!(classify_segments(
            &raster,
            &segs,
            &protos.with_looks(4.0).unwrap(),
            StatisticKind::Hellinger
        )
        .is_ok());
    }

    #[test]
    fn gaussian_needs_gaussian_prototypes() {
        let protos = exact_prototypes(900, 4.0).unwrap();
        let raster = constant_raster(&[preset("River").unwrap().sigma], 1, 1);
        let segs = grid_segment(1, 1, 1).unwrap();
        assert!(classify_segments(&raster, &segs, &protos, StatisticKind::GaussianBhattacharyya).is_err());
    }

    #[test]
    fn amplitudes_are_square_roots() {
        let id = HermitianMatrix::identity(3);
        let d = HermitianMatrix::from_real_diagonal(&[4.0, 9.0, 16.0]).unwrap();
        let mut data = id.as_matrix().as_slice().to_vec();
        data.extend_from_slice(d.as_matrix().as_slice());
        let r = CovRaster::new(2, 1, 3, 4.0, data).unwrap();
        assert_eq!(amplitudes(&r).unwrap().data, vec![1.0, 1.0, 1.0, 2.0, 3.0, 4.0]);
    }

    fn fake(segment_id: usize, kind: StatisticKind, class: Option<usize>) -> SegmentAssignment {
        let r = TestResult {
            kind,
            statistic: 0.0,
            p_value: 1.0,
            log10_p: 0.0,
            dof: 9,
            m: 1,
            n: 1,
        };
        SegmentAssignment {
            segment_id,
            kind,
            pixel_count: 1,
            outcome: match class {
                Some(c) => Outcome::Assigned {
                    class_index: c,
                    winning: r,
                    all_stats: vec![r],
                },
                None => Outcome::Unclassified { reason: "x".into() },
            },
        }
    }

    #[test]
    fn majority_vote() {
        let kinds = StatisticKind::all(0.9);
        let runs = |classes: [Option<usize>; 6]| -> Vec<Vec<SegmentAssignment>> {
            kinds.iter().zip(classes).map(|(&k, c)| vec![fake(0, k, c)]).collect()
        };
        let all = fuse_majority(&runs([Some(2); 6])).unwrap();
        assert_eq!(all[0].winner, Some(2));
        let three_two_one = fuse_majority(&runs([Some(0), Some(1), Some(0), Some(1), Some(0), Some(2)])).unwrap();
        assert_eq!(three_two_one[0].winner, Some(0));
        // kl, bhattacharyya, hellinger, renyi, chi2, gauss
        let tie = fuse_majority(&runs([Some(0), Some(3), Some(3), Some(0), Some(5), None])).unwrap();
        assert_eq!(tie[0].winner, Some(3));
        let tie_without_b = fuse_majority(&runs([Some(4), Some(1), Some(2), Some(4), Some(2), None])).unwrap();
        assert_eq!(tie_without_b[0].winner, Some(2));
        let none = fuse_majority(&runs([None; 6])).unwrap();
        assert_eq!(none[0].winner, None);
        let mut bad = runs([Some(0); 6]);
        bad[2][0].segment_id = 7;
        assert!(matches!(fuse_majority(&bad), Err(Error::MismatchedSegments)));
    }

    #[test]
    fn fuzzy_sets() {
        let mk = |p: f64| TestResult {
            kind: StatisticKind::KullbackLeibler,
            statistic: 0.0,
            p_value: p,
            log10_p: p.log10(),
            dof: 9,
            m: 1,
            n: 1,
        };
        let stats = [mk(0.2), mk(1.0), mk(0.01), mk(0.05)];
        assert_eq!(fuzzy_assign(&stats, 0.05).unwrap(), vec![0, 1, 3]);
        assert!(fuzzy_assign(&[mk(0.3), mk(0.9)], 1.0 - 1e-12).unwrap().is_empty());
        assert!(fuzzy_assign(&stats, 0.0).is_err());
    }

    #[test]
    fn predicted_labels_cover_segments() {
        let segs = grid_segment(4, 2, 2).unwrap();
        let runs = vec![
            fake(0, StatisticKind::ChiSquare, Some(5)),
            fake(1, StatisticKind::ChiSquare, None),
        ];
        let lab = predicted_labels(&runs, &segs);
        assert_eq!(lab.labels, vec![5, 5, -1, -1, 5, 5, -1, -1]);
    }
}
