//! Pseudo-gradient regression and accuracy prediction.
//!
//! For every (super-block index, block type) group of trials the model
//!
//! ```text
//! g1 * (depth - master_depth) + g2 * (width - master_width) ≈ accuracy - master_accuracy
//! ```
//!
//! is fitted by least squares without intercept, taking the minimum-norm
//! solution when the design is rank deficient. Kernel size and ratio act
//! as finer block types: a (index, type, kernel, ratio) group gets its own
//! entry once it has at least [`FINE_GROUP_MIN_TRIALS`] trials and a
//! full-rank design, and prediction falls back to the coarse
//! (index, type) entry otherwise.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::trials::TrialRecord;
use super::NasError;
use crate::linalg::{lstsq_min_norm, Matrix};
use crate::structure::{BlockType, NetworkStructure, SuperBlock};

pub const FINE_GROUP_MIN_TRIALS: usize = 3;

/// Fitted coefficients for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub index: usize,
    #[serde(rename = "type")]
    pub block_type: BlockType,
    /// Accuracy change per extra basic block.
    pub g1: f64,
    /// Accuracy change per extra channel.
    pub g2: f64,
    pub n: usize,
    pub rms: f64,
    pub singular: bool,
    /// Present only on kernel/ratio-specific entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

impl GradientEntry {
    fn is_fine(&self) -> bool {
        self.kernel.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoGradientTable {
    pub master_accuracy: f64,
    pub entries: Vec<GradientEntry>,
}

impl PseudoGradientTable {
    pub fn coarse(&self, index: usize, block_type: BlockType) -> Option<&GradientEntry> {
        self.entries
            .iter()
            .find(|e| e.index == index && e.block_type == block_type && !e.is_fine())
    }

    /// The most specific entry for a block at `index`.
    pub fn entry_for(&self, index: usize, block: &SuperBlock) -> Option<&GradientEntry> {
        self.entries
            .iter()
            .find(|e| {
                e.index == index
                    && e.block_type == block.block_type
                    && e.kernel == Some(block.kernel)
                    && e.ratio == Some(block.ratio)
            })
            .or_else(|| self.coarse(index, block.block_type))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table always serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, NasError> {
        let table: PseudoGradientTable =
            serde_json::from_str(text).map_err(|e| NasError::MalformedDocument(e.to_string()))?;
        if !table.master_accuracy.is_finite() || table.entries.iter().any(|e| !(e.g1.is_finite() && e.g2.is_finite())) {
            return Err(NasError::MalformedDocument("non-finite value in pseudo-gradient table".into()));
        }
        Ok(table)
    }
}

struct Fit {
    g: [f64; 2],
    rank: usize,
    rms: f64,
}

fn fit_group(master_block: &SuperBlock, master_accuracy: f64, trials: &[&TrialRecord]) -> Fit {
    let design = Matrix::from_fn(trials.len(), 2, |i, j| {
        let t = trials[i];
        if j == 0 {
            f64::from(t.depth) - f64::from(master_block.depth)
        } else {
            f64::from(t.width) - f64::from(master_block.width)
        }
    });
    let target: Vec<f64> = trials
        .iter()
        .map(|t| t.accuracy.unwrap_or(master_accuracy) - master_accuracy)
        .collect();
    let (g, rank) = lstsq_min_norm(&design, &target).expect("trial values are finite");
    let sse: f64 = (0..trials.len())
        .map(|i| {
            let r = target[i] - design.get(i, 0) * g[0] - design.get(i, 1) * g[1];
            r * r
        })
        .sum();
    Fit {
        g: [g[0], g[1]],
        rank,
        rms: (sse / trials.len() as f64).sqrt(),
    }
}

type FineKey = (usize, BlockType, u32, OrderedFloat<f64>);

/// Fits pseudo-gradients for every (index, type) group present in
/// `trials`. Every body super-block must have trials of its master type.
pub fn fit_pseudo_gradients(
    master: &NetworkStructure,
    master_accuracy: f64,
    trials: &[TrialRecord],
) -> Result<PseudoGradientTable, NasError> {
    if !master_accuracy.is_finite() {
        return Err(NasError::InvalidConfig("master accuracy must be finite".into()));
    }
    let mut coarse: BTreeMap<(usize, BlockType), Vec<&TrialRecord>> = BTreeMap::new();
    let mut fine: BTreeMap<FineKey, Vec<&TrialRecord>> = BTreeMap::new();
    for (row, t) in trials.iter().enumerate() {
        if t.superblock_index >= master.superblocks.len() {
            return Err(NasError::InvalidTrial {
                row,
                message: format!(
                    "super-block index {} outside a {}-block master",
                    t.superblock_index,
                    master.superblocks.len()
                ),
            });
        }
        if t.accuracy.is_none() {
            return Err(NasError::InvalidTrial {
                row,
                message: "trial has no accuracy".into(),
            });
        }
        coarse.entry((t.superblock_index, t.block_type)).or_default().push(t);
        fine.entry((t.superblock_index, t.block_type, t.kernel, OrderedFloat(t.ratio)))
            .or_default()
            .push(t);
    }

    for i in master.body_indices() {
        let block_type = master.superblocks[i].block_type;
        if !coarse.contains_key(&(i, block_type)) {
            return Err(NasError::NoTrials { index: i, block_type });
        }
    }

    let mut entries = Vec::new();
    for (&(index, block_type), group) in &coarse {
        let fit = fit_group(&master.superblocks[index], master_accuracy, group);
        entries.push(GradientEntry {
            index,
            block_type,
            g1: fit.g[0],
            g2: fit.g[1],
            n: group.len(),
            rms: fit.rms,
            singular: fit.rank == 0,
            kernel: None,
            ratio: None,
        });
        for (&(_, _, kernel, ratio), fine_group) in fine.range((index, block_type, 0, OrderedFloat(f64::NEG_INFINITY))..) {
            if fine_group[0].superblock_index != index || fine_group[0].block_type != block_type {
                break;
            }
            if fine_group.len() < FINE_GROUP_MIN_TRIALS {
                continue;
            }
            let fit = fit_group(&master.superblocks[index], master_accuracy, fine_group);
            if fit.rank < 2 {
                continue;
            }
            entries.push(GradientEntry {
                index,
                block_type,
                g1: fit.g[0],
                g2: fit.g[1],
                n: fine_group.len(),
                rms: fit.rms,
                singular: false,
                kernel: Some(kernel),
                ratio: Some(ratio.0),
            });
        }
    }

    Ok(PseudoGradientTable {
        master_accuracy,
        entries,
    })
}

fn check_shape(master: &NetworkStructure, candidate: &NetworkStructure) -> Result<(), NasError> {
    if master.superblocks.len() != candidate.superblocks.len() {
        return Err(NasError::ShapeMismatch(format!(
            "candidate has {} super-blocks, master has {}",
            candidate.superblocks.len(),
            master.superblocks.len()
        )));
    }
    for (i, (m, c)) in master.superblocks.iter().zip(&candidate.superblocks).enumerate() {
        if m.stride != c.stride {
            return Err(NasError::ShapeMismatch(format!(
                "stride of super-block {i} is {}, master has {}",
                c.stride, m.stride
            )));
        }
    }
    Ok(())
}

/// Per-super-block accuracy deltas of `candidate` relative to `master`.
/// Stem and head contribute zero and must match the master.
pub fn accuracy_contributions(
    table: &PseudoGradientTable,
    master: &NetworkStructure,
    candidate: &NetworkStructure,
) -> Result<Vec<f64>, NasError> {
    check_shape(master, candidate)?;
    let body = master.body_indices();
    master
        .superblocks
        .iter()
        .zip(&candidate.superblocks)
        .enumerate()
        .map(|(i, (m, c))| {
            if !body.contains(&i) {
                return if m == c {
                    Ok(0.0)
                } else {
                    Err(NasError::UnfittedType {
                        index: i,
                        block_type: c.block_type,
                    })
                };
            }
            let e = table.entry_for(i, c).ok_or(NasError::UnfittedType {
                index: i,
                block_type: c.block_type,
            })?;
            let dd = f64::from(c.depth) - f64::from(m.depth);
            let dc = f64::from(c.width) - f64::from(m.width);
            Ok(e.g1 * dd + e.g2 * dc)
        })
        .collect()
}

/// `A* + Σ g1·Δdepth + g2·Δwidth` over the body super-blocks.
pub fn predict_accuracy(
    table: &PseudoGradientTable,
    master: &NetworkStructure,
    candidate: &NetworkStructure,
) -> Result<f64, NasError> {
    let parts = accuracy_contributions(table, master, candidate)?;
    Ok(table.master_accuracy + parts.iter().sum::<f64>())
}
