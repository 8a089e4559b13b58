//! FLOPs/parameter accounting and table-driven latency estimation.

mod accounting;
mod latency;
mod reference;

use thiserror::Error;

pub use accounting::{compute_flops, compute_params, cost_report, superblock_cost, BlockCost, CostReport};
pub use latency::{
    aggregate_latency, aggregate_raw_samples, estimate_latency, ingest_benchmark, LatencyEstimate, LatencyKey,
    LatencyRow, LatencyTable, Lookup, BENCHMARK_HEADER,
};
pub use reference::{parse_network_latency, NetworkLatency, NETWORK_LATENCY_HEADER};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CostError {
    #[error("DIVISIBILITY: resolution {resolution} is not divisible by stride product {stride_product}")]
    Divisibility { resolution: u32, stride_product: u64 },
    #[error("EMPTY_INPUT: no latency samples")]
    EmptyInput,
    #[error("MALFORMED_ROW: line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("DUPLICATE_KEY: line {line}: {key}")]
    DuplicateKey { line: u64, key: String },
    #[error("MISSING_KEY: no latency rows for super-block(s) {indices:?}: {detail}")]
    MissingKey { indices: Vec<usize>, detail: String },
}

impl CostError {
    pub fn code(&self) -> &'static str {
        match self {
            CostError::Divisibility { .. } => "DIVISIBILITY",
            CostError::EmptyInput => "EMPTY_INPUT",
            CostError::MalformedRow { .. } => "MALFORMED_ROW",
            CostError::DuplicateKey { .. } => "DUPLICATE_KEY",
            CostError::MissingKey { .. } => "MISSING_KEY",
        }
    }
}
