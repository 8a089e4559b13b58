//! Perturbation ranges and the per-super-block sampler.

use std::collections::BTreeSet;

use rand::Rng;

use super::NasError;
use crate::structure::{BlockType, NetworkStructure, SuperBlock};

/// Sampled widths are multiples of this many channels.
pub const WIDTH_QUANTUM: u32 = 8;

/// How far a body super-block may move away from the master.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRanges {
    pub kernel_choices: BTreeSet<u32>,
    /// Closed interval of multipliers on the master width.
    pub width_factor: (f64, f64),
    /// Closed interval of offsets on the master depth.
    pub depth_delta: (i32, i32),
    pub bl_ratios: Vec<f64>,
    pub dw_ratios: Vec<f64>,
    pub samples_per_superblock: usize,
    /// Draw block types from {XX, BL, DW} instead of keeping the master's.
    pub allow_type_switch: bool,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        PerturbationRanges {
            kernel_choices: [3, 5].into_iter().collect(),
            width_factor: (0.5, 2.0),
            depth_delta: (-2, 2),
            bl_ratios: vec![0.25, 0.5],
            dw_ratios: vec![3.0, 6.0, 9.0],
            samples_per_superblock: 9,
            allow_type_switch: false,
        }
    }
}

impl PerturbationRanges {
    /// Degenerate ranges under which every body super-block of `master`
    /// can only be redrawn as itself (assuming body blocks of one type share
    /// kernel and ratio).
    pub fn singleton_for(master: &NetworkStructure) -> Self {
        let body = &master.superblocks[master.body_indices()];
        let ratios = |t: BlockType| -> Vec<f64> {
            let mut r: Vec<f64> = body.iter().filter(|b| b.block_type == t).map(|b| b.ratio).collect();
            r.dedup();
            if r.is_empty() {
                r.push(1.0);
            }
            r
        };
        PerturbationRanges {
            kernel_choices: body.iter().map(|b| b.kernel).collect(),
            width_factor: (1.0, 1.0),
            depth_delta: (0, 0),
            bl_ratios: ratios(BlockType::BL),
            dw_ratios: ratios(BlockType::DW),
            samples_per_superblock: 1,
            allow_type_switch: false,
        }
    }

    pub fn validate(&self) -> Result<(), NasError> {
        let bad = |m: &str| Err(NasError::InvalidConfig(m.to_string()));
        if self.kernel_choices.is_empty() {
            return bad("kernel_choices is empty");
        }
        if self.bl_ratios.is_empty() || self.dw_ratios.is_empty() {
            return bad("ratio sets must be non-empty");
        }
        let (lo, hi) = self.width_factor;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad("width_factor must be an ordered positive interval");
        }
        if self.depth_delta.0 > self.depth_delta.1 {
            return bad("depth_delta must be an ordered interval");
        }
        if self.samples_per_superblock == 0 {
            return bad("samples_per_superblock must be at least 1");
        }
        Ok(())
    }

    fn ratios_for(&self, t: BlockType) -> Vec<f64> {
        let source: &[f64] = match t {
            BlockType::Conv | BlockType::XX => &[1.0],
            BlockType::BL => &self.bl_ratios,
            BlockType::DW => &self.dw_ratios,
        };
        let mut out: Vec<f64> = source.iter().copied().filter(|&r| t.accepts_ratio(r)).collect();
        out.dedup();
        out
    }
}

/// Admissible (width, ratios) pairs for one block type.
#[derive(Debug, Clone)]
struct TypeChoices {
    block_type: BlockType,
    widths: Vec<(u32, Vec<f64>)>,
}

/// Everything a body super-block may be replaced with.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    index: usize,
    stride: u32,
    types: Vec<TypeChoices>,
    depths: Vec<u32>,
    kernels: Vec<u32>,
}

fn empty(index: usize, field: &'static str) -> NasError {
    NasError::EmptyRange { index, field }
}

impl BlockSampler {
    pub fn new(index: usize, base: &SuperBlock, ranges: &PerturbationRanges) -> Result<Self, NasError> {
        let depths: Vec<u32> = (ranges.depth_delta.0..=ranges.depth_delta.1)
            .map(|d| i64::from(base.depth) + i64::from(d))
            .filter(|&d| d >= 1 && d <= i64::from(u32::MAX))
            .map(|d| d as u32)
            .collect();
        if depths.is_empty() {
            return Err(empty(index, "depth"));
        }

        let kernels: Vec<u32> = ranges
            .kernel_choices
            .iter()
            .copied()
            .filter(|k| k % 2 == 1)
            .collect();
        if kernels.is_empty() {
            return Err(empty(index, "kernel"));
        }

        let q = f64::from(WIDTH_QUANTUM);
        let lo = (ranges.width_factor.0 * f64::from(base.width) / q - 1e-9).ceil().max(1.0) as u32;
        let hi = (ranges.width_factor.1 * f64::from(base.width) / q + 1e-9).floor() as u32;
        let widths: Vec<u32> = (lo..=hi).map(|m| m * WIDTH_QUANTUM).collect();
        if widths.is_empty() {
            return Err(empty(index, "width"));
        }

        let candidate_types = if ranges.allow_type_switch && base.block_type != BlockType::Conv {
            vec![BlockType::XX, BlockType::BL, BlockType::DW]
        } else {
            vec![base.block_type]
        };
        let mut types = Vec::new();
        let mut saw_ratio = false;
        for t in candidate_types {
            let ratios = ranges.ratios_for(t);
            saw_ratio |= !ratios.is_empty();
            let pairs: Vec<(u32, Vec<f64>)> = widths
                .iter()
                .filter_map(|&w| {
                    let ok: Vec<f64> = ratios
                        .iter()
                        .copied()
                        .filter(|&r| SuperBlock::new(t, 1, w, 1, 1, r).inner_width().is_some())
                        .collect();
                    (!ok.is_empty()).then_some((w, ok))
                })
                .collect();
            if !pairs.is_empty() {
                types.push(TypeChoices { block_type: t, widths: pairs });
            }
        }
        if types.is_empty() {
            return Err(empty(index, if saw_ratio { "width" } else { "ratio" }));
        }

        Ok(BlockSampler {
            index,
            stride: base.stride,
            types,
            depths,
            kernels,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Draws type, depth, width, ratio and kernel, in that order, each
    /// uniformly over its admissible set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SuperBlock {
        let t = &self.types[rng.random_range(0..self.types.len())];
        let depth = self.depths[rng.random_range(0..self.depths.len())];
        let (width, ratios) = &t.widths[rng.random_range(0..t.widths.len())];
        let ratio = ratios[rng.random_range(0..ratios.len())];
        let kernel = self.kernels[rng.random_range(0..self.kernels.len())];
        SuperBlock::new(t.block_type, depth, *width, self.stride, kernel, ratio)
    }
}

/// One sampler per body super-block of `master`, in index order.
pub fn body_samplers(master: &NetworkStructure, ranges: &PerturbationRanges) -> Result<Vec<BlockSampler>, NasError> {
    ranges.validate()?;
    master
        .body_indices()
        .map(|i| BlockSampler::new(i, &master.superblocks[i], ranges))
        .collect()
}

/// Knobs for the selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub latency_budget_ms: f64,
    pub resolutions: BTreeSet<u32>,
    pub num_candidates: usize,
    pub seed: u64,
    pub ranges: PerturbationRanges,
    pub batch: u32,
}

impl SearchConfig {
    pub fn new(latency_budget_ms: f64, seed: u64) -> Self {
        SearchConfig {
            latency_budget_ms,
            resolutions: [192, 224, 256].into_iter().collect(),
            num_candidates: 1000,
            seed,
            ranges: PerturbationRanges::default(),
            batch: 64,
        }
    }

    pub fn validate(&self) -> Result<(), NasError> {
        if !(self.latency_budget_ms.is_finite() && self.latency_budget_ms > 0.0) {
            return Err(NasError::InvalidConfig("latency budget must be positive".into()));
        }
        if self.num_candidates == 0 {
            return Err(NasError::InvalidConfig("num_candidates must be at least 1".into()));
        }
        if self.resolutions.is_empty() {
            return Err(NasError::InvalidConfig("at least one resolution is required".into()));
        }
        if self.batch == 0 {
            return Err(NasError::InvalidConfig("batch must be positive".into()));
        }
        self.ranges.validate()
    }
}
