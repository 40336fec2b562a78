//! On-disk formats.
//!
//! Dataset (JSONL): a header line
//! `{"format":"eqsmooth-linz","version":1,"dim":M,"epsilon":E}` followed by
//! one record per line, `{"f":F,"grad":[..],"label":±1,"x":[..]}` where
//! `label` and `x` are optional.
//!
//! Attack vectors (JSONL): a header `{"format":"eqsmooth-attack","version":1,...}`
//! and lines `{"a":[..]}` index-aligned with a dataset file.
//!
//! Defense (JSON): `{"v":[..],"phi_n":P,"satisfied":[..],"n":N}`.
//!
//! Floats are written by serde_json in shortest round-trip form, so a reload
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use eqsmooth_core::{Budget, Dataset, LinearizationRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DATASET_FORMAT: &str = "eqsmooth-linz";
pub const ATTACK_FORMAT: &str = "eqsmooth-attack";
pub const FORMAT_VERSION: u32 = 1;

/// Attack vectors up to this far (relative) outside the ball are accepted
/// and pulled back onto the sphere; external exporters round in float32.
pub const ATTACK_NORM_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub f: f64,
    pub grad: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackHeader {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackLine {
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseFile {
    pub v: Vec<f64>,
    pub phi_n: f64,
    pub satisfied: Vec<usize>,
    pub n: usize,
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn parse_line<T: for<'de> Deserialize<'de>>(
    path: &Path,
    lineno: usize,
    text: &str,
) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, lineno, e.to_string()))
}

/// Non-blank lines with their 1-based line numbers.
fn lines(path: &Path) -> CliResult<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn record_line(r: &LinearizationRecord) -> RecordLine {
    RecordLine {
        f: r.f_value,
        grad: r.gradient.clone(),
        label: r.label,
        x: r.point.clone(),
    }
}

pub fn write_dataset<W: Write>(out: &mut W, dataset: &Dataset) -> CliResult<()> {
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        dim: dataset.dim(),
        epsilon: dataset.budget().epsilon(),
    };
    write_json_line(out, &header)?;
    for r in dataset.records() {
        write_json_line(out, &record_line(r))?;
    }
    Ok(())
}

pub fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| CliError::Output(e.to_string()))?;
    out.write_all(b"\n")
        .map_err(|e| CliError::Output(e.to_string()))
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let lines = lines(path)?;
    let Some(((hl, htext), rest)) = lines.split_first() else {
        return Err(CliError::parse(
            path,
            1,
            "empty file, expected a header line",
        ));
    };
    let header: DatasetHeader = parse_line(path, *hl, htext)?;
    if header.format != DATASET_FORMAT || header.version != FORMAT_VERSION {
        return Err(CliError::parse(
            path,
            *hl,
            format!(
                "unsupported header {}/{}, expected {DATASET_FORMAT}/{FORMAT_VERSION}",
                header.format, header.version
            ),
        ));
    }
    let budget = Budget::new(header.epsilon, header.dim)
        .map_err(|e| CliError::parse(path, *hl, e.to_string()))?;
    let mut records = Vec::with_capacity(rest.len());
    for (lineno, text) in rest {
        let line: RecordLine = parse_line(path, *lineno, text)?;
        let mut r = LinearizationRecord::new(line.f, line.grad);
        r.label = line.label;
        r.point = line.x;
        r.validate(header.dim)
            .map_err(|e| CliError::parse(path, *lineno, e.to_string()))?;
        records.push(r);
    }
    Ok(Dataset::new(records, budget)?)
}

pub fn write_attacks<W: Write>(
    out: &mut W,
    vectors: &[Vec<f64>],
    extra: serde_json::Map<String, serde_json::Value>,
) -> CliResult<()> {
    let header = AttackHeader {
        format: ATTACK_FORMAT.into(),
        version: FORMAT_VERSION,
        extra,
    };
    write_json_line(out, &header)?;
    for a in vectors {
        write_json_line(out, &AttackLine { a: a.clone() })?;
    }
    Ok(())
}

/// Reads per-point attack vectors for `dataset`, checking count, dimension
/// and norm. Vectors within `ATTACK_NORM_SLACK` of the sphere are rescaled
/// onto it.
pub fn read_attacks(path: &Path, dataset: &Dataset) -> CliResult<Vec<Vec<f64>>> {
    let lines = lines(path)?;
    let Some(((hl, htext), rest)) = lines.split_first() else {
        return Err(CliError::parse(
            path,
            1,
            "empty file, expected a header line",
        ));
    };
    let header: AttackHeader = parse_line(path, *hl, htext)?;
    if header.format != ATTACK_FORMAT || header.version != FORMAT_VERSION {
        return Err(CliError::parse(
            path,
            *hl,
            format!(
                "unsupported header {}/{}, expected {ATTACK_FORMAT}/{FORMAT_VERSION}",
                header.format, header.version
            ),
        ));
    }
    if rest.len() != dataset.len() {
        return Err(CliError::Usage(format!(
            "{} has {} attack vectors but the dataset has {} records",
            path.display(),
            rest.len(),
            dataset.len()
        )));
    }
    let eps = dataset.budget().epsilon();
    rest.iter()
        .map(|(lineno, text)| {
            let AttackLine { a } = parse_line(path, *lineno, text)?;
            if a.len() != dataset.dim() || a.iter().any(|x| !x.is_finite()) {
                return Err(CliError::parse(
                    path,
                    *lineno,
                    format!("attack vector must have {} finite entries", dataset.dim()),
                ));
            }
            let len = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > eps * (1.0 + ATTACK_NORM_SLACK) {
                return Err(CliError::parse(
                    path,
                    *lineno,
                    format!("attack vector norm {len} exceeds epsilon {eps}"),
                ));
            }
            Ok(eqsmooth_core::geometry::project_to_ball(
                &a,
                dataset.budget(),
            ))
        })
        .collect()
}

pub fn read_defense(path: &Path) -> CliResult<DefenseFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, 1, e.to_string()))
}
