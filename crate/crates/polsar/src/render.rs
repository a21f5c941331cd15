//! Class maps as binary PPM, p-value maps as binary PGM.

use serde::{Deserialize, Serialize};

use crate::classifier::SegmentAssignment;
use crate::error::{Error, Result};
use crate::raster::SegmentMap;

pub const UNCLASSIFIED: &str = "Unclassified";

/// Colours per class name, plus one for unclassified segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub entries: Vec<PaletteEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub name: String,
    pub rgb: [u8; 3],
}

const BASE: [[u8; 3]; 9] = [
    [31, 119, 180],
    [140, 86, 75],
    [255, 127, 14],
    [44, 160, 44],
    [152, 223, 138],
    [188, 189, 34],
    [214, 39, 40],
    [255, 215, 0],
    [148, 103, 189],
];

impl Palette {
    /// A fixed colour per position, cycling with darkening past nine.
    pub fn for_classes<S: AsRef<str>>(names: &[S]) -> Self {
        let mut entries: Vec<PaletteEntry> = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let shade = 1u8 << (i / BASE.len()).min(7);
                let c = BASE[i % BASE.len()];
                PaletteEntry {
                    name: n.as_ref().to_string(),
                    rgb: [c[0] / shade, c[1] / shade, c[2] / shade],
                }
            })
            .collect();
        entries.push(PaletteEntry {
            name: UNCLASSIFIED.into(),
            rgb: [0, 0, 0],
        });
        Palette { entries }
    }

    pub fn color(&self, name: &str) -> Result<[u8; 3]> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.rgb)
            .ok_or_else(|| Error::PaletteMissingClass(name.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// Colours each pixel by the class of its segment; masked pixels take the
/// unclassified colour.
pub fn render_class_map<S: AsRef<str>>(
    assignments: &[SegmentAssignment],
    segmap: &SegmentMap,
    class_names: &[S],
    palette: &Palette,
) -> Result<RgbImage> {
    let unclassified = palette.color(UNCLASSIFIED)?;
    let colors = class_names
        .iter()
        .map(|n| palette.color(n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut data = unclassified.repeat(segmap.width() * segmap.height());
    for a in assignments {
        let rgb = match a.class_index() {
            Some(c) => *colors
                .get(c)
                .ok_or_else(|| Error::PaletteMissingClass(format!("class #{c}")))?,
            None => unclassified,
        };
        for &p in segmap.pixels(a.segment_id) {
            data[3 * p..3 * p + 3].copy_from_slice(&rgb);
        }
    }
    Ok(RgbImage {
        width: segmap.width(),
        height: segmap.height(),
        data,
    })
}

/// White (255) where the winning p-value is at least `alpha`, black elsewhere.
pub fn render_pvalue_map(assignments: &[SegmentAssignment], segmap: &SegmentMap, alpha: f64) -> Result<GrayImage> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut data = vec![0u8; segmap.width() * segmap.height()];
    for a in assignments {
        if a.winning().is_some_and(|w| w.p_value >= alpha) {
            for &p in segmap.pixels(a.segment_id) {
                data[p] = 255;
            }
        }
    }
    Ok(GrayImage {
        width: segmap.width(),
        height: segmap.height(),
        data,
    })
}
