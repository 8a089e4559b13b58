//! Intrinsic-rank analysis of convolution kernels.
//!
//! A kernel of shape `(c_out, c_in, k, k)` is reshaped to a
//! `c_out × (c_in·k²)` matrix whose normalized singular values show how
//! quickly its rank decays.

mod kt01;

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{singular_values, LinalgError, Matrix};

pub use kt01::{decode_kernel, encode_kernel, load_kernel, write_kernel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankError {
    #[error("BAD_MAGIC: not a KT01 file")]
    BadMagic,
    #[error("TRUNCATED: file ends before the declared payload")]
    Truncated,
    #[error("DIM_OVERFLOW: element count does not fit in memory")]
    DimOverflow,
    #[error("BAD_SHAPE: {0}")]
    BadShape(String),
    #[error("TRAILING_BYTES: {0} bytes after payload")]
    TrailingBytes(usize),
    #[error("ZERO_KERNEL: `{0}` is all zeros")]
    ZeroKernel(String),
    #[error("NONFINITE_INPUT: `{0}` contains NaN or infinity")]
    NonFinite(String),
    #[error("IO: {0}")]
    Io(String),
}

impl RankError {
    pub fn code(&self) -> &'static str {
        match self {
            RankError::BadMagic => "BAD_MAGIC",
            RankError::Truncated => "TRUNCATED",
            RankError::DimOverflow => "DIM_OVERFLOW",
            RankError::BadShape(_) => "BAD_SHAPE",
            RankError::TrailingBytes(_) => "TRAILING_BYTES",
            RankError::ZeroKernel(_) => "ZERO_KERNEL",
            RankError::NonFinite(_) => "NONFINITE_INPUT",
            RankError::Io(_) => "IO",
        }
    }
}

/// A 4-D convolution kernel `(c_out, c_in, k, k)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTensor {
    pub layer_name: String,
    pub dims: [u32; 4],
    pub data: Vec<f32>,
}

impl KernelTensor {
    pub fn new(layer_name: String, dims: [u32; 4], data: Vec<f32>) -> Result<Self, RankError> {
        if dims.contains(&0) {
            return Err(RankError::BadShape(format!("dims must be positive, got {dims:?}")));
        }
        if dims[2] != dims[3] {
            return Err(RankError::BadShape(format!("kernel must be square, got {}x{}", dims[2], dims[3])));
        }
        if layer_name.len() > usize::from(u16::MAX) {
            return Err(RankError::BadShape("layer name longer than 65535 bytes".into()));
        }
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or(RankError::DimOverflow)?;
        if expected != data.len() {
            return Err(RankError::BadShape(format!(
                "payload has {} values, dims {dims:?} need {expected}",
                data.len()
            )));
        }
        Ok(KernelTensor { layer_name, dims, data })
    }

    pub fn c_out(&self) -> usize {
        self.dims[0] as usize
    }

    pub fn c_in(&self) -> usize {
        self.dims[1] as usize
    }

    pub fn kernel_size(&self) -> usize {
        self.dims[2] as usize
    }
}

/// Row `i` is the flattened `(c_in, k, k)` filter of output channel `i`.
pub fn reshape_kernel(t: &KernelTensor) -> Matrix {
    let cols = t.c_in() * t.kernel_size() * t.kernel_size();
    Matrix::new(t.c_out(), cols, t.data.iter().map(|&v| f64::from(v)).collect())
        .expect("tensor invariants guarantee the payload length")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPoint {
    /// `i / c_out`, with `i` counted from 1.
    pub x: f64,
    /// Singular value divided by the largest one.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub layer_name: String,
    pub points: Vec<SpectrumPoint>,
    /// Mean normalized singular value; 1 for a perfectly flat spectrum.
    pub decay_area: f64,
}

/// Normalized singular-value spectrum of one kernel.
pub fn spectrum(t: &KernelTensor) -> Result<SpectrumReport, RankError> {
    let values = singular_values(&reshape_kernel(t)).map_err(|e| match e {
        LinalgError::NonFinite => RankError::NonFinite(t.layer_name.clone()),
        other => RankError::BadShape(other.to_string()),
    })?;
    let largest = values.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Err(RankError::ZeroKernel(t.layer_name.clone()));
    }
    let c_out = t.c_out() as f64;
    let points: Vec<SpectrumPoint> = values
        .iter()
        .enumerate()
        .map(|(i, s)| SpectrumPoint {
            x: (i + 1) as f64 / c_out,
            lambda: s / largest,
        })
        .collect();
    let decay_area = points.iter().map(|p| p.lambda).sum::<f64>() / points.len() as f64;
    Ok(SpectrumReport {
        layer_name: t.layer_name.clone(),
        points,
        decay_area,
    })
}

/// CSV of `layer_name,x,lambda` points for every kernel, then a blank line
/// and a `layer_name,decay_area` summary, both in input order.
pub fn stage_report(kernels: &[KernelTensor]) -> Result<String, RankError> {
    let reports = kernels.par_iter().map(spectrum).collect::<Result<Vec<_>, _>>()?;
    Ok(format_stage_report(&reports))
}

pub fn format_stage_report(reports: &[SpectrumReport]) -> String {
    let mut points = csv::Writer::from_writer(Vec::new());
    points.write_record(["layer_name", "x", "lambda"]).unwrap();
    for r in reports {
        for p in &r.points {
            points
                .write_record([r.layer_name.as_str(), &p.x.to_string(), &p.lambda.to_string()])
                .unwrap();
        }
    }
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["layer_name", "decay_area"]).unwrap();
    for r in reports {
        summary
            .write_record([r.layer_name.as_str(), &r.decay_area.to_string()])
            .unwrap();
    }
    let mut out = String::from_utf8(points.into_inner().unwrap()).unwrap();
    out.push('\n');
    out.push_str(&String::from_utf8(summary.into_inner().unwrap()).unwrap());
    out
}
