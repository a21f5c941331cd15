//! File formats.
//!
//! Rasters start with one line of JSON describing the payload, then raw
//! little-endian data:
//!
//! * covariance: `{"magic":"polsar-cov","version":1,"width":W,"height":H,"q":Q,"looks":L}`,
//!   then per pixel the full `Q×Q` matrix row-major, each entry as `f64` re, im;
//! * labels: `{"magic":"labels","version":1,"width":W,"height":H}`, then
//!   `W·H` `i32` values, `-1` for masked pixels. An optional `"classes"`
//!   array names the label values.
//!
//! Either header may carry a `"provenance"` object. Prototypes are a JSON
//! document; assignment tables are CSV. Every write goes to a temporary
//! file in the target directory that is then renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{Outcome, Prototype, PrototypeSet, SegmentAssignment};
use crate::distances::GaussianEstimate;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Complex, HermitianMatrix};
use crate::raster::{CovRaster, LabelRaster};
use crate::wishart::CovarianceEstimate;

pub const COV_MAGIC: &str = "polsar-cov";
pub const LABEL_MAGIC: &str = "labels";
pub const PROTOTYPE_MAGIC: &str = "polsar-prototypes";
pub const FORMAT_VERSION: u32 = 1;

/// Where an output came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical run configuration, hex.
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CovHeader {
    magic: String,
    version: u32,
    width: usize,
    height: usize,
    q: usize,
    looks: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct LabelHeader {
    magic: String,
    version: u32,
    width: usize,
    height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

fn split_header<'a>(what: &'static str, bytes: &'a [u8]) -> Result<(&'a [u8], &'a [u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(what, "line 1", "missing header line"))?;
    Ok((&bytes[..end], &bytes[end + 1..]))
}

fn parse_header<T: for<'de> Deserialize<'de>>(what: &'static str, line: &[u8]) -> Result<T> {
    serde_json::from_slice(line)
        .map_err(|e| Error::format(what, format!("line 1, column {}", e.column()), e.to_string()))
}

fn check_magic(what: &'static str, magic: &str, expected: &str, version: u32) -> Result<()> {
    if magic != expected {
        return Err(Error::format(
            what,
            "line 1",
            format!("magic {magic:?}, expected {expected:?}"),
        ));
    }
    if version != FORMAT_VERSION {
        return Err(Error::format(what, "line 1", format!("unsupported version {version}")));
    }
    Ok(())
}

fn payload_len(what: &'static str, payload: &[u8], header_len: usize, expected: usize) -> Result<()> {
    if payload.len() != expected {
        return Err(Error::format(
            what,
            format!("byte offset {}", header_len + 1 + payload.len().min(expected)),
            format!("payload has {} bytes, expected {expected}", payload.len()),
        ));
    }
    Ok(())
}

pub fn encode_cov_raster(raster: &CovRaster, provenance: Option<&Provenance>) -> Result<Vec<u8>> {
    let header = CovHeader {
        magic: COV_MAGIC.into(),
        version: FORMAT_VERSION,
        width: raster.width(),
        height: raster.height(),
        q: raster.q(),
        looks: raster.looks(),
        provenance: provenance.cloned(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(raster.as_slice().len() * 16);
    for z in raster.as_slice() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cov_raster(bytes: &[u8]) -> Result<(CovRaster, Option<Provenance>)> {
    const WHAT: &str = "covariance raster";
    let (line, payload) = split_header(WHAT, bytes)?;
    let h: CovHeader = parse_header(WHAT, line)?;
    check_magic(WHAT, &h.magic, COV_MAGIC, h.version)?;
    let count = h.width * h.height * h.q * h.q;
    payload_len(WHAT, payload, line.len(), count * 16)?;
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let raster = CovRaster::new(h.width, h.height, h.q, h.looks, data).map_err(|e| match e {
        Error::NotHermitian { .. } | Error::NegativeIntensity { .. } | Error::NonFinite(_) => {
            Error::format(WHAT, "payload", e.to_string())
        }
        other => other,
    })?;
    Ok((raster, h.provenance))
}

pub fn write_cov_raster(path: &Path, raster: &CovRaster, provenance: Option<&Provenance>) -> Result<()> {
    write_atomic(path, &encode_cov_raster(raster, provenance)?)
}

pub fn read_cov_raster(path: &Path) -> Result<(CovRaster, Option<Provenance>)> {
    decode_cov_raster(&fs::read(path)?)
}

/// A label raster with its optional class names.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelFile {
    pub raster: LabelRaster,
    pub classes: Option<Vec<String>>,
    pub provenance: Option<Provenance>,
}

pub fn encode_labels(file: &LabelFile) -> Result<Vec<u8>> {
    let header = LabelHeader {
        magic: LABEL_MAGIC.into(),
        version: FORMAT_VERSION,
        width: file.raster.width,
        height: file.raster.height,
        classes: file.classes.clone(),
        provenance: file.provenance.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    for l in &file.raster.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelFile> {
    const WHAT: &str = "label raster";
    let (line, payload) = split_header(WHAT, bytes)?;
    let h: LabelHeader = parse_header(WHAT, line)?;
    check_magic(WHAT, &h.magic, LABEL_MAGIC, h.version)?;
    payload_len(WHAT, payload, line.len(), h.width * h.height * 4)?;
    let labels: Vec<i32> = payload
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(classes) = &h.classes {
        if let Some(p) = labels.iter().position(|&l| l >= classes.len() as i32) {
            return Err(Error::format(
                WHAT,
                format!("byte offset {}", line.len() + 1 + 4 * p),
                format!("label {} has no class name", labels[p]),
            ));
        }
    }
    let raster =
        LabelRaster::new(h.width, h.height, labels).map_err(|e| Error::format(WHAT, "payload", e.to_string()))?;
    Ok(LabelFile {
        raster,
        classes: h.classes,
        provenance: h.provenance,
    })
}

pub fn write_labels(path: &Path, file: &LabelFile) -> Result<()> {
    write_atomic(path, &encode_labels(file)?)
}

pub fn read_labels(path: &Path) -> Result<LabelFile> {
    decode_labels(&fs::read(path)?)
}

#[derive(Serialize, Deserialize)]
struct PrototypeDoc {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    classes: Vec<ClassDoc>,
}

#[derive(Serialize, Deserialize)]
struct ClassDoc {
    name: String,
    looks: f64,
    sample_size: usize,
    /// `q × q` array of `[re, im]`.
    sigma: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaussian: Option<GaussianDoc>,
}

#[derive(Serialize, Deserialize)]
struct GaussianDoc {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    sample_size: usize,
}

pub fn encode_prototypes(set: &PrototypeSet, provenance: Option<&Provenance>) -> Result<Vec<u8>> {
    let classes = set
        .entries()
        .iter()
        .map(|p| {
            let q = p.wishart.q();
            let s = &p.wishart.sigma_hat;
            ClassDoc {
                name: p.name.clone(),
                looks: p.wishart.looks,
                sample_size: p.wishart.sample_size,
                sigma: (0..q)
                    .map(|i| (0..q).map(|j| [s[(i, j)].re, s[(i, j)].im]).collect())
                    .collect(),
                gaussian: p.gaussian.as_ref().map(|g| GaussianDoc {
                    mean: g.mean().to_vec(),
                    covariance: g.covariance().chunks(g.q()).map(<[f64]>::to_vec).collect(),
                    sample_size: g.sample_size(),
                }),
            }
        })
        .collect();
    let doc = PrototypeDoc {
        format: PROTOTYPE_MAGIC.into(),
        version: FORMAT_VERSION,
        provenance: provenance.cloned(),
        classes,
    };
    let mut out = serde_json::to_vec_pretty(&doc)?;
    out.push(b'\n');
    Ok(out)
}

pub fn decode_prototypes(bytes: &[u8]) -> Result<(PrototypeSet, Option<Provenance>)> {
    const WHAT: &str = "prototype set";
    let doc: PrototypeDoc = serde_json::from_slice(bytes)
        .map_err(|e| Error::format(WHAT, format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    check_magic(WHAT, &doc.format, PROTOTYPE_MAGIC, doc.version)?;
    let at = |name: &str, e: Error| Error::format(WHAT, format!("class {name:?}"), e.to_string());
    let entries = doc
        .classes
        .into_iter()
        .map(|c| {
            let q = c.sigma.len();
            if c.sigma.iter().any(|r| r.len() != q) {
                return Err(Error::format(
                    WHAT,
                    format!("class {:?}", c.name),
                    "sigma is not square",
                ));
            }
            let data = c
                .sigma
                .iter()
                .flatten()
                .map(|[re, im]| Complex::new(*re, *im))
                .collect();
            let sigma = CMatrix::from_row_major(q, data)
                .and_then(HermitianMatrix::new)
                .map_err(|e| at(&c.name, e))?;
            let wishart = CovarianceEstimate::new(sigma, c.sample_size, c.looks).map_err(|e| at(&c.name, e))?;
            let gaussian = c
                .gaussian
                .map(|g| GaussianEstimate::new(g.mean, g.covariance.concat(), g.sample_size))
                .transpose()
                .map_err(|e| at(&c.name, e))?;
            Ok(Prototype {
                name: c.name,
                wishart,
                gaussian,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((PrototypeSet::new(entries)?, doc.provenance))
}

pub fn write_prototypes(path: &Path, set: &PrototypeSet, provenance: Option<&Provenance>) -> Result<()> {
    write_atomic(path, &encode_prototypes(set, provenance)?)
}

pub fn read_prototypes(path: &Path) -> Result<(PrototypeSet, Option<Provenance>)> {
    decode_prototypes(&fs::read(path)?)
}

pub const ASSIGNMENT_HEADER: [&str; 7] = [
    "segment_id",
    "class",
    "statistic",
    "p_value",
    "log10_p",
    "kind",
    "reason",
];

/// One line of an assignment table; unclassified rows have no class or
/// numbers but a reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub segment_id: usize,
    pub class: Option<String>,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub log10_p: Option<f64>,
    pub kind: String,
    pub reason: Option<String>,
}

impl AssignmentRow {
    pub fn from_assignment<S: AsRef<str>>(a: &SegmentAssignment, class_names: &[S]) -> Self {
        match &a.outcome {
            Outcome::Assigned {
                class_index, winning, ..
            } => AssignmentRow {
                segment_id: a.segment_id,
                class: Some(class_names[*class_index].as_ref().to_string()),
                statistic: Some(winning.statistic),
                p_value: Some(winning.p_value),
                log10_p: Some(winning.log10_p),
                kind: a.kind.name().into(),
                reason: None,
            },
            Outcome::Unclassified { reason } => AssignmentRow {
                segment_id: a.segment_id,
                class: None,
                statistic: None,
                p_value: None,
                log10_p: None,
                kind: a.kind.name().into(),
                reason: Some(reason.clone()),
            },
        }
    }
}

/// CSV with an optional leading `# provenance` comment line.
pub fn encode_assignments(rows: &[AssignmentRow], provenance: Option<&Provenance>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    if let Some(p) = provenance {
        out.extend_from_slice(b"# ");
        out.extend_from_slice(&serde_json::to_vec(p)?);
        out.push(b'\n');
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ASSIGNMENT_HEADER)?;
    let num = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.segment_id.to_string(),
            r.class.clone().unwrap_or_default(),
            num(r.statistic),
            num(r.p_value),
            num(r.log10_p),
            r.kind.clone(),
            r.reason.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn decode_assignments(bytes: &[u8]) -> Result<(Vec<AssignmentRow>, Option<Provenance>)> {
    const WHAT: &str = "assignment table";
    let mut provenance = None;
    let mut body = bytes;
    if let Some(rest) = bytes.strip_prefix(b"# ") {
        let (line, tail) = split_header(WHAT, rest)?;
        provenance = Some(parse_header(WHAT, line)?);
        body = tail;
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(body);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ASSIGNMENT_HEADER {
        return Err(Error::format(WHAT, "header", format!("unexpected columns {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + u64::from(provenance.is_some());
        let loc = |col: &str| format!("line {line}, column {col}");
        let opt_str = |i: usize| Some(rec[i].to_string()).filter(|s| !s.is_empty());
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                return Ok(None);
            }
            rec[i]
                .parse()
                .map(Some)
                .map_err(|_| Error::format(WHAT, loc(ASSIGNMENT_HEADER[i]), format!("not a number: {:?}", &rec[i])))
        };
        rows.push(AssignmentRow {
            segment_id: rec[0]
                .parse()
                .map_err(|_| Error::format(WHAT, loc("segment_id"), format!("not an id: {:?}", &rec[0])))?,
            class: opt_str(1),
            statistic: opt_num(2)?,
            p_value: opt_num(3)?,
            log10_p: opt_num(4)?,
            kind: rec[5].to_string(),
            reason: opt_str(6),
        });
    }
    Ok((rows, provenance))
}

pub fn write_assignments(path: &Path, rows: &[AssignmentRow], provenance: Option<&Provenance>) -> Result<()> {
    write_atomic(path, &encode_assignments(rows, provenance)?)
}

pub fn read_assignments(path: &Path) -> Result<(Vec<AssignmentRow>, Option<Provenance>)> {
    decode_assignments(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::{simulate_mosaic, simulate_prototypes, MosaicSpec};

    fn prov() -> Provenance {
        Provenance {
            tool: "polsar".into(),
            version: "0.1.0".into(),
            config_sha256: "ab".repeat(32),
            seed: Some(7),
        }
    }

    #[test]
    fn covariance_round_trip() {
        let mut spec = MosaicSpec::paper(2);
        spec.tile_size = 3;
        let m = simulate_mosaic(&spec).unwrap();
        let bytes = encode_cov_raster(&m.raster, Some(&prov())).unwrap();
        let (back, p) = decode_cov_raster(&bytes).unwrap();
        assert_eq!(back, m.raster);
        assert_eq!(p, Some(prov()));
        let first_line = bytes.split(|&b| b == b'\n').next().unwrap();
        let v: serde_json::Value = serde_json::from_slice(first_line).unwrap();
        assert_eq!(v["magic"], "polsar-cov");
        assert_eq!(v["q"], 3);
        assert_eq!(bytes.len(), first_line.len() + 1 + 81 * 9 * 16);
    }

    #[test]
    fn covariance_diagnostics() {
        let r = CovRaster::new(1, 1, 1, 4.0, vec![Complex::new(1.0, 0.0)]).unwrap();
        let mut bytes = encode_cov_raster(&r, None).unwrap();
        bytes.pop();
        let e = decode_cov_raster(&bytes).unwrap_err();
        assert!(e.to_string().contains("byte offset"), "{e}");
        let e =
            decode_cov_raster(b"{\"magic\":\"labels\",\"version\":1,\"width\":0,\"height\":0,\"q\":1,\"looks\":1}\n")
                .unwrap_err();
        assert!(matches!(e, Error::Format { .. }));
        let e = decode_cov_raster(b"{\"magic\": 3\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn labels_round_trip() {
        let f = LabelFile {
            raster: LabelRaster::new(3, 1, vec![-1, 0, 1]).unwrap(),
            classes: Some(vec!["A".into(), "B".into()]),
            provenance: None,
        };
        assert_eq!(decode_labels(&encode_labels(&f).unwrap()).unwrap(), f);
        let bad = LabelFile {
            raster: LabelRaster::new(1, 1, vec![4]).unwrap(),
            ..f
        };
        assert!(decode_labels(&encode_labels(&bad).unwrap()).is_err());
    }

    #[test]
    fn prototypes_round_trip() {
        let set = simulate_prototypes(&["River", "Corn 2"], 30, 4, 1).unwrap();
        let (back, p) = decode_prototypes(&encode_prototypes(&set, Some(&prov())).unwrap()).unwrap();
        assert_eq!(back, set);
        assert_eq!(p, Some(prov()));
    }

    #[test]
    fn assignments_round_trip() {
        let rows = vec![
            AssignmentRow {
                segment_id: 0,
                class: Some("Corn, late".into()),
                statistic: Some(0.1 + 0.2),
                p_value: Some(1e-300),
                log10_p: Some(-300.0),
                kind: "kl".into(),
                reason: None,
            },
            AssignmentRow {
                segment_id: 1,
                class: None,
                statistic: None,
                p_value: None,
                log10_p: None,
                kind: "kl".into(),
                reason: Some("singular-estimate".into()),
            },
        ];
        let bytes = encode_assignments(&rows, Some(&prov())).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap() == "segment_id,class,statistic,p_value,log10_p,kind,reason");
        let (back, p) = decode_assignments(&bytes).unwrap();
        assert_eq!(back, rows);
        assert_eq!(p, Some(prov()));
        let broken = text.replace("1e-300", "one");
        let e = decode_assignments(broken.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
