//! The nine class covariance presets (channels HH, HV, VV) and a simulator
//! for mosaics of Wishart tiles and independent training prototypes.

use rayon::prelude::*;

use crate::classifier::{Prototype, PrototypeSet};
use crate::distances::GaussianAccumulator;
use crate::error::{Error, Result};
use crate::linalg::{Complex, HermitianMatrix};
use crate::raster::{CovRaster, LabelRaster};
use crate::rng::{stream, Domain};
use crate::wishart::{mean_estimate, MultilookSampler, WishartModel};

/// Upper triangles as printed: `Σ₁₁, Σ₁₂, Σ₁₃, Σ₂₂, Σ₂₃, Σ₃₃`, with
/// off-diagonal entries as `(re, im)`.
type UpperTriangle = [(&'static str, &'static str); 6];

const DIAG: &str = "0";

pub(crate) const PRESET_TABLE: [(&str, UpperTriangle); 9] = [
    (
        "River",
        [
            ("2.98e-3", DIAG),
            ("5.31e-6", "8.11e-5"),
            ("3.47e-3", "3.42e-4"),
            ("3.40e-4", DIAG),
            ("4.47e-6", "1.39e-4"),
            ("1.19e-2", DIAG),
        ],
    ),
    (
        "Caatinga",
        [
            ("1.11e-1", DIAG),
            ("-3.10e-3", "-1.58e-3"),
            ("1.98e-2", "1.65e-3"),
            ("3.40e-2", DIAG),
            ("-1.41e-3", "1.87e-3"),
            ("9.47e-2", DIAG),
        ],
    ),
    (
        "Prepared Soil",
        [
            ("1.05e-2", DIAG),
            ("-5.39e-6", "-2.37e-4"),
            ("7.53e-3", "1.75e-3"),
            ("8.46e-4", DIAG),
            ("-3.38e-5", "1.32e-4"),
            ("1.14e-2", DIAG),
        ],
    ),
    (
        "Soybean 1",
        [
            ("3.40e-2", DIAG),
            ("-1.79e-3", "-1.86e-3"),
            ("-3.6e-4", "-7.58e-3"),
            ("5.16e-3", DIAG),
            ("4.38e-4", "4.28e-4"),
            ("5.38e-2", DIAG),
        ],
    ),
    // printed with a decimal comma: "− ȷ1,73·10⁻³"
    (
        "Soybean 2",
        [
            ("4.31e-2", DIAG),
            ("-1.76e-3", "-1.32e-3"),
            ("-1.78e-4", "-1.73e-3"),
            ("9.26e-3", DIAG),
            ("6.55e-4", "1.27e-3"),
            ("4.35e-2", DIAG),
        ],
    ),
    (
        "Soybean 3",
        [
            ("7.53e-2", DIAG),
            ("-4.25e-3", "-7.66e-3"),
            ("5.87e-4", "-1.36e-3"),
            ("1.47e-2", DIAG),
            ("-2.18e-4", "1.21e-3"),
            ("3.70e-2", DIAG),
        ],
    ),
    (
        "Tillage",
        [
            ("3.53e-2", DIAG),
            ("1.20e-3", "1.02e-4"),
            ("1.64e-2", "-2.65e-3"),
            ("3.05e-3", DIAG),
            ("4.48e-4", "1.88e-4"),
            ("3.29e-2", DIAG),
        ],
    ),
    (
        "Corn 1",
        [
            ("1.15e-1", DIAG),
            ("-3.95e-3", "-3.57e-3"),
            ("9.13e-3", "-4.86e-3"),
            ("1.33e-2", DIAG),
            ("3.34e-3", "2.83e-3"),
            ("1.47e-1", DIAG),
        ],
    ),
    (
        "Corn 2",
        [
            ("4.19e-2", DIAG),
            ("1.08e-3", "-1.01e-3"),
            ("9.24e-3", "-3.68e-3"),
            ("1.02e-2", DIAG),
            ("2.43e-4", "3.31e-4"),
            ("5.71e-2", DIAG),
        ],
    ),
];

/// Class names in the default mosaic order.
pub const PRESET_NAMES: [&str; 9] = [
    "River",
    "Caatinga",
    "Prepared Soil",
    "Soybean 1",
    "Soybean 2",
    "Soybean 3",
    "Tillage",
    "Corn 1",
    "Corn 2",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ClassPreset {
    pub name: &'static str,
    pub sigma: HermitianMatrix,
}

fn parse(s: &str) -> f64 {
    s.parse().expect("preset table holds valid literals")
}

fn build(name: &'static str, upper: &UpperTriangle) -> ClassPreset {
    let entries: Vec<Complex> = upper
        .iter()
        .map(|(re, im)| Complex::new(parse(re), parse(im)))
        .collect();
    let sigma = HermitianMatrix::from_upper(3, &entries).expect("preset is Hermitian");
    ClassPreset { name, sigma }
}

/// Looks up a preset by name, ignoring case and surrounding whitespace.
pub fn preset(name: &str) -> Result<ClassPreset> {
    let key = name.trim();
    PRESET_TABLE
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(key))
        .map(|(n, upper)| build(n, upper))
        .ok_or_else(|| Error::UnknownClass(name.to_string()))
}

pub fn presets() -> Vec<ClassPreset> {
    PRESET_TABLE.iter().map(|(n, upper)| build(n, upper)).collect()
}

fn preset_index(name: &str) -> Result<usize> {
    let key = name.trim();
    PRESET_TABLE
        .iter()
        .position(|(n, _)| n.eq_ignore_ascii_case(key))
        .ok_or_else(|| Error::UnknownClass(name.to_string()))
}

/// Layout and sampling parameters of a simulated mosaic.
#[derive(Clone, Debug, PartialEq)]
pub struct MosaicSpec {
    /// Rows of class names, top to bottom.
    pub layout: Vec<Vec<String>>,
    pub tile_size: usize,
    pub looks: u32,
    pub seed: u64,
}

impl MosaicSpec {
    /// Nine classes in a 3×3 grid of 150-pixel tiles, four looks.
    pub fn paper(seed: u64) -> Self {
        MosaicSpec {
            layout: PRESET_NAMES
                .chunks(3)
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
            tile_size: 150,
            looks: 4,
            seed,
        }
    }

    /// Parses `"A,B;C,D"`: rows separated by `;`, classes by `,`.
    pub fn parse_layout(text: &str) -> Result<Vec<Vec<String>>> {
        let rows: Vec<Vec<String>> = text
            .split(';')
            .map(|r| r.split(',').map(|c| c.trim().to_string()).collect())
            .collect();
        for name in rows.iter().flatten() {
            preset_index(name)?;
        }
        Ok(rows)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(Error::InvalidArgument("tile size must be at least 1".into()));
        }
        let cols = self.layout.first().map_or(0, Vec::len);
        if cols == 0 || self.layout.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument(
                "layout must be a non-empty rectangular grid".into(),
            ));
        }
        if self.looks < 3 {
            return Err(Error::LooksBelowDimension {
                looks: f64::from(self.looks),
                q: 3,
            });
        }
        for name in self.layout.iter().flatten() {
            preset_index(name)?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.layout.first().map_or(0, Vec::len) * self.tile_size
    }

    pub fn height(&self) -> usize {
        self.layout.len() * self.tile_size
    }
}

/// A simulated image with the generating class of every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Mosaic {
    pub raster: CovRaster,
    pub truth: LabelRaster,
    /// Class names in order of first appearance in the layout; truth labels
    /// index into this list.
    pub classes: Vec<String>,
}

/// Draws every tile from its own stream `(seed, tile index)`, tiles
/// numbered row-major, so the output does not depend on thread count.
pub fn simulate_mosaic(spec: &MosaicSpec) -> Result<Mosaic> {
    spec.validate()?;
    let mut classes: Vec<String> = Vec::new();
    let mut tile_class = Vec::new();
    for name in spec.layout.iter().flatten() {
        let canonical = PRESET_TABLE[preset_index(name)?].0.to_string();
        let idx = match classes.iter().position(|c| *c == canonical) {
            Some(i) => i,
            None => {
                classes.push(canonical);
                classes.len() - 1
            }
        };
        tile_class.push(idx);
    }
    let samplers = classes
        .iter()
        .map(|c| MultilookSampler::new(&WishartModel::new(preset(c)?.sigma, f64::from(spec.looks))?))
        .collect::<Result<Vec<_>>>()?;

    let t = spec.tile_size;
    let q = 3;
    let tiles: Vec<Vec<Complex>> = tile_class
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut rng = stream(spec.seed, Domain::Mosaic, i as u32);
            let mut buf = vec![Complex::new(0.0, 0.0); t * t * q * q];
            for px in buf.chunks_exact_mut(q * q) {
                samplers[c].sample_into(&mut rng, px);
            }
            buf
        })
        .collect();

    let (width, height) = (spec.width(), spec.height());
    let cols = width / t;
    let mut data = vec![Complex::new(0.0, 0.0); width * height * q * q];
    let mut labels = vec![0i32; width * height];
    for (i, tile) in tiles.iter().enumerate() {
        let (ty, tx) = (i / cols, i % cols);
        for row in 0..t {
            let y = ty * t + row;
            let dst = (y * width + tx * t) * q * q;
            data[dst..dst + t * q * q].copy_from_slice(&tile[row * t * q * q..(row + 1) * t * q * q]);
            labels[y * width + tx * t..y * width + (tx + 1) * t].fill(tile_class[i] as i32);
        }
    }
    Ok(Mosaic {
        raster: CovRaster::new(width, height, q, f64::from(spec.looks), data)?,
        truth: LabelRaster::new(width, height, labels)?,
        classes,
    })
}

/// Independent training prototypes: `pixels_per_class` fresh draws per
/// class, each class on the prototype stream of its preset index, so they
/// never share draws with a mosaic. Each prototype carries the Wishart
/// estimate and the Gaussian estimate of the amplitudes of the same draws.
pub fn simulate_prototypes(names: &[&str], pixels_per_class: usize, looks: u32, seed: u64) -> Result<PrototypeSet> {
    if pixels_per_class == 0 {
        return Err(Error::EmptySample);
    }
    let q = 3;
    let entries = names
        .par_iter()
        .map(|name| {
            let idx = preset_index(name)?;
            let p = build(PRESET_TABLE[idx].0, &PRESET_TABLE[idx].1);
            let sampler = MultilookSampler::new(&WishartModel::new(p.sigma, f64::from(looks))?)?;
            let mut rng = stream(seed, Domain::Prototype, idx as u32);
            let mut sum = vec![Complex::new(0.0, 0.0); q * q];
            let mut buf = vec![Complex::new(0.0, 0.0); q * q];
            let mut gauss = GaussianAccumulator::new(q);
            let mut amp = vec![0.0; q];
            for _ in 0..pixels_per_class {
                sampler.sample_into(&mut rng, &mut buf);
                for (s, z) in sum.iter_mut().zip(&buf) {
                    *s += z;
                }
                for k in 0..q {
                    amp[k] = buf[k * q + k].re.sqrt();
                }
                gauss.push(&amp);
            }
            Ok(Prototype {
                name: p.name.to_string(),
                wishart: mean_estimate(q, sum, pixels_per_class, f64::from(looks))?,
                gaussian: Some(gauss.finish()?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(entries)
}

/// Prototypes built directly from the presets, no sampling: each estimate
/// equals its preset matrix and carries `sample_size` as its nominal size.
pub fn exact_prototypes(sample_size: usize, looks: f64) -> Result<PrototypeSet> {
    let entries = presets()
        .into_iter()
        .map(|p| {
            Ok(Prototype {
                name: p.name.to_string(),
                wishart: crate::wishart::CovarianceEstimate::new(p.sigma, sample_size, looks)?,
                gaussian: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PrototypeSet::new(entries)
}
