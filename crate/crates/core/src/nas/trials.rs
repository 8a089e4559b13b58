//! Distillation trial plans and their measured accuracies.

use super::ranges::{body_samplers, PerturbationRanges};
use super::NasError;
use crate::rng::seeded_rng;
use crate::structure::{BlockType, NetworkStructure};

/// Exact header of trial CSV files.
pub const TRIAL_HEADER: &str = "superblock_index,block_type,depth,width,kernel,ratio,accuracy";

/// One perturbation of one super-block. `accuracy` is `None` in plans.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub superblock_index: usize,
    pub block_type: BlockType,
    pub depth: u32,
    pub width: u32,
    pub kernel: u32,
    pub ratio: f64,
    pub accuracy: Option<f64>,
}

/// `samples_per_superblock` random replacements for every body
/// super-block, in index order. Deterministic in `seed`.
pub fn plan_trials(master: &NetworkStructure, ranges: &PerturbationRanges, seed: u64) -> Result<Vec<TrialRecord>, NasError> {
    let samplers = body_samplers(master, ranges)?;
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(samplers.len() * ranges.samples_per_superblock);
    for sampler in &samplers {
        for _ in 0..ranges.samples_per_superblock {
            let b = sampler.sample(&mut rng);
            out.push(TrialRecord {
                superblock_index: sampler.index(),
                block_type: b.block_type,
                depth: b.depth,
                width: b.width,
                kernel: b.kernel,
                ratio: b.ratio,
                accuracy: None,
            });
        }
    }
    Ok(out)
}

pub fn write_trials(records: &[TrialRecord]) -> String {
    let mut out = String::from(TRIAL_HEADER);
    out.push('\n');
    for r in records {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.superblock_index, r.block_type, r.depth, r.width, r.kernel, r.ratio, acc
        ));
    }
    out
}

/// Parses a trial CSV. With `require_accuracy` every row must carry an
/// accuracy in [0, 1]; otherwise empty accuracy cells are allowed.
pub fn read_trials(csv_text: &str, require_accuracy: bool) -> Result<Vec<TrialRecord>, NasError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| NasError::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().map(str::trim).collect::<Vec<_>>().join(",") != TRIAL_HEADER {
        return Err(NasError::MalformedRow {
            line: 1,
            message: format!("expected header `{TRIAL_HEADER}`"),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| NasError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 7 {
            return Err(NasError::MalformedRow {
                line,
                message: format!("expected 7 fields, got {}", record.len()),
            });
        }
        let bad = |what: &str| NasError::MalformedRow {
            line,
            message: format!("bad `{what}` value {:?}", record.get(field_index(what)).unwrap_or("")),
        };
        let field = |i: usize| record[i].trim();
        let accuracy = match field(6) {
            "" if require_accuracy => return Err(bad("accuracy")),
            "" => None,
            s => {
                let a: f64 = s.parse().map_err(|_| bad("accuracy"))?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(NasError::OutOfRangeAccuracy { line, value: a });
                }
                Some(a)
            }
        };
        out.push(TrialRecord {
            superblock_index: field(0).parse().map_err(|_| bad("superblock_index"))?,
            block_type: field(1).parse().map_err(|_| bad("block_type"))?,
            depth: field(2).parse().map_err(|_| bad("depth"))?,
            width: field(3).parse().map_err(|_| bad("width"))?,
            kernel: field(4).parse().map_err(|_| bad("kernel"))?,
            ratio: field(5)
                .parse()
                .ok()
                .filter(|r: &f64| r.is_finite() && *r > 0.0)
                .ok_or_else(|| bad("ratio"))?,
            accuracy,
        });
    }
    Ok(out)
}

fn field_index(name: &str) -> usize {
    TRIAL_HEADER.split(',').position(|h| h == name).unwrap_or(0)
}

/// Trial records with measured accuracies.
pub fn ingest_trials(csv_text: &str) -> Result<Vec<TrialRecord>, NasError> {
    read_trials(csv_text, true)
}
