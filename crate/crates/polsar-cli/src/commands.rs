use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use polsar::classifier::Outcome;
use polsar::io::{
    read_assignments, read_cov_raster, read_labels, read_prototypes, write_assignments, write_atomic, write_cov_raster,
    write_labels, write_prototypes, AssignmentRow, LabelFile, Provenance,
};
use polsar::render::{render_class_map, render_pvalue_map, Palette};
use polsar::scenes::exact_prototypes;
use polsar::{
    classify_segments, confusion, fuse_majority, fuzzy_assign, grid_segment, kappa, kappa_equality_test,
    predicted_labels, simulate_mosaic, simulate_prototypes, Error, KappaReport, LabelRaster, MosaicSpec,
    SegmentAssignment, SegmentMap, StatisticKind,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{AssessArgs, ClassifyArgs, Command, ExportArgs, SimulateArgs};

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, cmd),
        Command::Classify(a) => classify(a, cmd),
        Command::Assess(a) => assess(a, cmd),
        Command::ExportPresets(a) => export(a, cmd),
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

fn provenance(cmd: &Command, seed: Option<u64>) -> Result<Provenance> {
    let json = serde_json::to_vec(cmd)?;
    let digest = Sha256::digest(&json);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(Provenance {
        tool: "polsar".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: hex,
        seed,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(a: &SimulateArgs, cmd: &Command) -> Result<()> {
    let layout = match (&a.preset, &a.layout) {
        (Some(p), None) if p.eq_ignore_ascii_case("paper") => MosaicSpec::paper(a.seed).layout,
        (Some(p), None) => return Err(invalid(format!("unknown preset layout `{p}`"))),
        (None, Some(l)) => MosaicSpec::parse_layout(l)?,
        (None, None) => MosaicSpec::paper(a.seed).layout,
        (Some(_), Some(_)) => unreachable!("clap rejects both"),
    };
    let spec = MosaicSpec {
        layout,
        tile_size: a.tile,
        looks: a.looks,
        seed: a.seed,
    };
    let mosaic = simulate_mosaic(&spec)?;
    let prov = provenance(cmd, Some(a.seed))?;
    create_dir(&a.out)?;
    write_cov_raster(&a.out.join("mosaic.cov"), &mosaic.raster, Some(&prov))?;
    write_labels(
        &a.out.join("truth.labels"),
        &LabelFile {
            raster: mosaic.truth.clone(),
            classes: Some(mosaic.classes.clone()),
            provenance: Some(prov.clone()),
        },
    )?;
    if a.prototypes > 0 {
        let names: Vec<&str> = mosaic.classes.iter().map(String::as_str).collect();
        let protos = simulate_prototypes(&names, a.prototypes, a.looks, a.seed)?;
        write_prototypes(&a.out.join("prototypes.json"), &protos, Some(&prov))?;
    }
    println!(
        "simulated {}x{} pixels, {} classes, {} looks, seed {}",
        mosaic.raster.width(),
        mosaic.raster.height(),
        mosaic.classes.len(),
        a.looks,
        a.seed
    );
    Ok(())
}

fn parse_kinds(stats: &[String], beta: f64) -> Result<Vec<StatisticKind>> {
    let mut kinds: Vec<StatisticKind> = Vec::new();
    for s in stats {
        let add = if s.eq_ignore_ascii_case("all") {
            StatisticKind::all(beta)
        } else {
            vec![StatisticKind::parse(s, beta)?]
        };
        for k in add {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
    }
    Ok(kinds)
}

fn label_file(raster: LabelRaster, classes: &[&str], prov: &Provenance) -> LabelFile {
    LabelFile {
        raster,
        classes: Some(classes.iter().map(|s| s.to_string()).collect()),
        provenance: Some(prov.clone()),
    }
}

fn classify(a: &ClassifyArgs, cmd: &Command) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(invalid(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if let Some(t) = a.fuzzy_threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(invalid(format!("--fuzzy-threshold must lie in (0, 1), got {t}")));
        }
    }
    if !(a.beta > 0.0 && a.beta < 1.0) {
        return Err(Error::BetaOutOfRange(a.beta).into());
    }
    let kinds = parse_kinds(&a.stats, a.beta)?;
    let (mut raster, _) = read_cov_raster(&a.raster)?;
    let (mut protos, _) = read_prototypes(&a.prototypes)?;
    if let Some(l) = a.looks {
        raster = raster.with_looks(l)?;
        protos = protos.with_looks(l)?;
    }
    let segmap = match (a.grid, &a.segments) {
        (Some(t), None) => grid_segment(raster.width(), raster.height(), t)?,
        (None, Some(p)) => SegmentMap::new(read_labels(p)?.raster)?,
        _ => unreachable!("clap requires exactly one"),
    };
    let prov = provenance(cmd, None)?;
    let names = protos.names();
    let palette = Palette::for_classes(&names);
    create_dir(&a.out)?;
    let palette_json = serde_json::json!({
        "classes": palette.entries.iter().map(|e| serde_json::json!({"name": e.name, "rgb": e.rgb})).collect::<Vec<_>>()
    });
    write_atomic(&a.out.join("palette.json"), &serde_json::to_vec_pretty(&palette_json)?)?;

    let mut runs: Vec<Vec<SegmentAssignment>> = Vec::new();
    for &kind in &kinds {
        let assignments = classify_segments(&raster, &segmap, &protos, kind)?;
        let dir = a.out.join(kind.name());
        create_dir(&dir)?;
        let rows: Vec<AssignmentRow> = assignments
            .iter()
            .map(|x| AssignmentRow::from_assignment(x, &names))
            .collect();
        write_assignments(&dir.join("assignments.csv"), &rows, Some(&prov))?;
        let map = render_class_map(&assignments, &segmap, &names, &palette)?;
        write_atomic(&dir.join("class_map.ppm"), &map.to_ppm())?;
        let pmap = render_pvalue_map(&assignments, &segmap, a.alpha)?;
        write_atomic(&dir.join("pvalue_map.pgm"), &pmap.to_pgm())?;
        write_labels(
            &dir.join("predicted.labels"),
            &label_file(predicted_labels(&assignments, &segmap), &names, &prov),
        )?;

        let unclassified = assignments.iter().filter(|x| x.class_index().is_none()).count();
        let kept = assignments
            .iter()
            .filter(|x| x.winning().is_some_and(|w| !w.rejected(a.alpha)))
            .count();
        let mut line = format!(
            "{:<20} segments {:>6}  unclassified {:>4}  not rejected {:>6.2}%",
            kind.name(),
            assignments.len(),
            unclassified,
            100.0 * kept as f64 / (assignments.len() - unclassified).max(1) as f64
        );
        if let Some(t) = a.fuzzy_threshold {
            let mut out = String::from("segment_id,classes\n");
            let mut total = 0usize;
            for x in &assignments {
                let set = match x.all_stats() {
                    Some(stats) => fuzzy_assign(stats, t)?,
                    None => Vec::new(),
                };
                total += set.len();
                let joined: Vec<&str> = set.iter().map(|&i| names[i]).collect();
                out.push_str(&format!("{},{}\n", x.segment_id, joined.join(";")));
            }
            write_atomic(&dir.join("fuzzy.csv"), out.as_bytes())?;
            line.push_str(&format!(
                "  mean fuzzy set {:.3}",
                total as f64 / assignments.len().max(1) as f64
            ));
        }
        println!("{line}");
        runs.push(assignments);
    }

    if a.fuse {
        if runs.len() < 2 {
            return Err(invalid("--fuse needs at least two statistics"));
        }
        let fused = fuse_majority(&runs)?;
        let dir = a.out.join("fused");
        create_dir(&dir)?;
        let mut csv = String::from("segment_id,class");
        for (kind, _) in &fused[0].votes {
            csv.push(',');
            csv.push_str(kind.name());
        }
        csv.push('\n');
        for f in &fused {
            let name = |c: Option<usize>| c.map_or("", |i| names[i]);
            csv.push_str(&format!("{},{}", f.segment_id, name(f.winner)));
            for (_, v) in &f.votes {
                csv.push(',');
                csv.push_str(name(*v));
            }
            csv.push('\n');
        }
        write_atomic(&dir.join("votes.csv"), csv.as_bytes())?;

        // reuse the first run's records so the map renderer sees the fused class
        let mut as_assignments = runs[0].clone();
        for (x, f) in as_assignments.iter_mut().zip(&fused) {
            x.outcome = match (f.winner, &x.outcome) {
                (Some(c), Outcome::Assigned { winning, all_stats, .. }) => Outcome::Assigned {
                    class_index: c,
                    winning: *winning,
                    all_stats: all_stats.clone(),
                },
                (Some(c), _) => {
                    let stats = runs
                        .iter()
                        .find_map(|r| r[f.segment_id].all_stats().map(<[_]>::to_vec))
                        .expect("a winner implies some run assigned the segment");
                    Outcome::Assigned {
                        class_index: c,
                        winning: stats[c],
                        all_stats: stats,
                    }
                }
                (None, _) => Outcome::Unclassified {
                    reason: "no-votes".into(),
                },
            };
        }
        let map = render_class_map(&as_assignments, &segmap, &names, &palette)?;
        write_atomic(&dir.join("class_map.ppm"), &map.to_ppm())?;
        write_labels(
            &dir.join("predicted.labels"),
            &label_file(predicted_labels(&as_assignments, &segmap), &names, &prov),
        )?;
        println!("{:<20} segments {:>6}", "fused", fused.len());
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AssessReport {
    classes: Vec<String>,
    /// Row = predicted class, column = truth class.
    confusion: Vec<Vec<u64>>,
    #[serde(flatten)]
    kappa: KappaReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    non_rejection_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize)]
struct CompareReport {
    kappa_a: f64,
    kappa_b: f64,
    z: f64,
    p_value: f64,
}

/// Rewrites `file`'s labels as indices into `union`, adding names it lacks.
fn remap(file: &LabelFile, union: &mut Vec<String>) -> Result<LabelRaster> {
    let Some(classes) = &file.classes else {
        return Ok(file.raster.clone());
    };
    let map: Vec<i32> = classes
        .iter()
        .map(|c| {
            let i = union.iter().position(|u| u == c).unwrap_or_else(|| {
                union.push(c.clone());
                union.len() - 1
            });
            i as i32
        })
        .collect();
    let labels = file
        .raster
        .labels
        .iter()
        .map(|&l| match l {
            l if l < 0 => Ok(-1),
            l => map
                .get(l as usize)
                .copied()
                .ok_or_else(|| invalid(format!("label {l} has no class name"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelRaster::new(file.raster.width, file.raster.height, labels)?)
}

fn assess(a: &AssessArgs, cmd: &Command) -> Result<()> {
    if let Some(pair) = &a.compare {
        let read = |p: &Path| -> Result<AssessReport> {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::from(e).into())
        };
        let (ra, rb) = (read(&pair[0])?, read(&pair[1])?);
        let t = kappa_equality_test(&ra.kappa, &rb.kappa)?;
        let report = CompareReport {
            kappa_a: ra.kappa.kappa,
            kappa_b: rb.kappa.kappa,
            z: t.z,
            p_value: t.p_value,
        };
        println!(
            "kappa {:.4} vs {:.4}  z {:.4}  p {:.4e}",
            report.kappa_a, report.kappa_b, t.z, t.p_value
        );
        if let Some(out) = &a.out {
            write_atomic(out, &serde_json::to_vec_pretty(&report)?)?;
        }
        return Ok(());
    }

    let (Some(pred_path), Some(truth_path)) = (&a.predicted, &a.truth) else {
        unreachable!("clap requires both without --compare");
    };
    let pred = read_labels(pred_path)?;
    let truth = read_labels(truth_path)?;
    let mask = a.mask.as_deref().map(read_labels).transpose()?.map(|f| f.raster);
    let (pred_raster, truth_raster, classes) = match (&pred.classes, &truth.classes) {
        (Some(_), Some(_)) => {
            let mut union = Vec::new();
            let t = remap(&truth, &mut union)?;
            let p = remap(&pred, &mut union)?;
            (p, t, union)
        }
        (None, None) => {
            let max = pred
                .raster
                .labels
                .iter()
                .chain(&truth.raster.labels)
                .copied()
                .max()
                .unwrap_or(-1);
            let classes = (0..=max).map(|i| i.to_string()).collect();
            (pred.raster, truth.raster, classes)
        }
        _ => return Err(invalid("both label files must carry class names, or neither")),
    };
    let cm = confusion(&pred_raster, &truth_raster, mask.as_ref(), classes.len())?;
    let report = kappa(&cm)?;
    let rate = match &a.assignments {
        Some(p) => {
            if !(a.alpha > 0.0 && a.alpha < 1.0) {
                return Err(invalid(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
            }
            let (rows, _) = read_assignments(p)?;
            let assigned: Vec<_> = rows.iter().filter_map(|r| r.p_value).collect();
            if assigned.is_empty() {
                None
            } else {
                Some(assigned.iter().filter(|&&p| p >= a.alpha).count() as f64 / assigned.len() as f64)
            }
        }
        None => None,
    };
    let k = classes.len();
    let out = AssessReport {
        confusion: (0..k).map(|i| (0..k).map(|j| cm.get(i, j)).collect()).collect(),
        classes,
        kappa: report,
        non_rejection_rate: rate,
        provenance: Some(provenance(cmd, None)?),
    };
    print!(
        "overall accuracy {:.4}%  kappa {:.4}  variance {:.4e}  pixels {}",
        100.0 * report.overall_accuracy,
        report.kappa,
        report.variance,
        report.total
    );
    match rate {
        Some(r) => println!("  not rejected {:.2}%", 100.0 * r),
        None => println!(),
    }
    if let Some(p) = &a.out {
        write_atomic(p, &serde_json::to_vec_pretty(&out)?)?;
    }
    Ok(())
}

fn export(a: &ExportArgs, cmd: &Command) -> Result<()> {
    let set = exact_prototypes(a.sample_size, a.looks)?;
    write_prototypes(&a.out, &set, Some(&provenance(cmd, None)?))?;
    println!("wrote {} classes to {}", set.len(), a.out.display());
    Ok(())
}
