//! In-memory images: covariance rasters, integer label rasters and segment maps.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Complex, HermitianMatrix};
use crate::tolerance;

/// A `width × height` image of `q × q` covariance matrices, row-major by
/// pixel, each pixel stored as its full matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CovRaster {
    width: usize,
    height: usize,
    q: usize,
    looks: f64,
    data: Vec<Complex>,
}

impl CovRaster {
    /// Checks sizes, finiteness, Hermitian symmetry (relative to the largest
    /// entry of each pixel) and non-negative intensities.
    pub fn new(width: usize, height: usize, q: usize, looks: f64, data: Vec<Complex>) -> Result<Self> {
        let expected = width * height * q * q;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        if !looks.is_finite() || looks <= 0.0 {
            return Err(Error::InvalidArgument(format!("looks must be positive, got {looks}")));
        }
        for (p, px) in data.chunks_exact(q * q).enumerate() {
            check_pixel(p, q, px)?;
        }
        Ok(CovRaster {
            width,
            height,
            q,
            looks,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn looks(&self) -> f64 {
        self.looks
    }

    /// Replaces the number of looks recorded with the data.
    pub fn with_looks(mut self, looks: f64) -> Result<Self> {
        if !looks.is_finite() || looks <= 0.0 {
            return Err(Error::InvalidArgument(format!("looks must be positive, got {looks}")));
        }
        self.looks = looks;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    /// Row-major entries of pixel `index`.
    pub fn pixel(&self, index: usize) -> &[Complex] {
        let s = self.q * self.q;
        &self.data[index * s..(index + 1) * s]
    }

    pub fn pixel_matrix(&self, index: usize) -> HermitianMatrix {
        let m = CMatrix::from_row_major(self.q, self.pixel(index).to_vec()).expect("q² entries");
        HermitianMatrix::symmetrize(m)
    }
}

fn check_pixel(p: usize, q: usize, px: &[Complex]) -> Result<()> {
    let mut scale = 0.0f64;
    for z in px {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("covariance raster"));
        }
        scale = scale.max(z.norm());
    }
    for i in 0..q {
        let d = px[i * q + i];
        if d.re < 0.0 {
            return Err(Error::NegativeIntensity { pixel: p, value: d.re });
        }
        for j in i..q {
            let asymmetry = (px[i * q + j] - px[j * q + i].conj()).norm();
            if asymmetry > tolerance::RASTER_HERMITIAN * scale {
                return Err(Error::NotHermitian { asymmetry });
            }
        }
    }
    Ok(())
}

/// Integer labels per pixel; `-1` marks a masked or unlabeled pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRaster {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<i32>,
}

impl LabelRaster {
    pub fn new(width: usize, height: usize, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l < -1) {
            return Err(Error::InvalidArgument(format!("label {bad} below -1")));
        }
        Ok(LabelRaster { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, value: i32) -> Self {
        LabelRaster {
            width,
            height,
            labels: vec![value; width * height],
        }
    }
}

/// A partition of the unmasked pixels into segments `0..r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentMap {
    labels: LabelRaster,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl SegmentMap {
    /// Ids must form the contiguous range `0..r` with every segment non-empty.
    pub fn new(labels: LabelRaster) -> Result<Self> {
        let r = labels.labels.iter().copied().max().unwrap_or(-1) + 1;
        let r = r as usize;
        let mut counts = vec![0usize; r];
        for &l in &labels.labels {
            if l >= 0 {
                counts[l as usize] += 1;
            }
        }
        if let Some(id) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidSegmentMap(format!("segment {id} is empty")));
        }
        let mut offsets = Vec::with_capacity(r + 1);
        offsets.push(0);
        for c in &counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        let mut fill = offsets[..r].to_vec();
        let mut members = vec![0usize; offsets[r]];
        for (p, &l) in labels.labels.iter().enumerate() {
            if l >= 0 {
                members[fill[l as usize]] = p;
                fill[l as usize] += 1;
            }
        }
        Ok(SegmentMap {
            labels,
            offsets,
            members,
        })
    }

    pub fn width(&self) -> usize {
        self.labels.width
    }

    pub fn height(&self) -> usize {
        self.labels.height
    }

    pub fn segment_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Pixel indices of segment `id`, ascending.
    pub fn pixels(&self, id: usize) -> &[usize] {
        &self.members[self.offsets[id]..self.offsets[id + 1]]
    }

    pub fn labels(&self) -> &LabelRaster {
        &self.labels
    }
}

/// Regular `tile × tile` grid, ids in row-major tile order; edge tiles are
/// truncated when the image is not a multiple of `tile`.
pub fn grid_segment(width: usize, height: usize, tile: usize) -> Result<SegmentMap> {
    if tile == 0 {
        return Err(Error::InvalidArgument("tile must be at least 1".into()));
    }
    let across = width.div_ceil(tile);
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            labels.push(((y / tile) * across + x / tile) as i32);
        }
    }
    SegmentMap::new(LabelRaster::new(width, height, labels)?)
}
