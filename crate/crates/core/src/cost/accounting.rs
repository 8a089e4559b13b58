//! Analytic cost accounting.
//!
//! One multiply-accumulate counts as one FLOP. Every convolution is
//! followed by a batch norm contributing `2 * out_channels` parameters and
//! no FLOPs; convolutions carry no bias. The classifier contributes
//! `head_width * classes` weights plus `classes` biases, and
//! `head_width * classes` FLOPs. Average pooling is free.

use serde::Serialize;

use super::{estimate_latency, CostError, LatencyTable};
use crate::structure::layers::enumerate_layers_at;
use crate::structure::{LayerSpec, NetworkStructure, SuperBlock};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub flops: u64,
    pub params: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms_per_image: Option<f64>,
    /// Super-blocks whose latency was clamped at a table edge.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extrapolated: Vec<usize>,
    pub resolution: u32,
    pub batch: u32,
}

fn layer_params(layer: &LayerSpec) -> u64 {
    layer.weight_count() + 2 * u64::from(layer.out_channels)
}

fn classifier_params(net: &NetworkStructure) -> u64 {
    let classes = u64::from(net.num_classes);
    u64::from(net.head_width()) * classes + classes
}

/// Total trainable parameters, independent of resolution.
pub fn compute_params(net: &NetworkStructure) -> u64 {
    // resolution does not matter for parameter counts; any value works
    let layers = enumerate_layers_at(net, net.resolution.max(1));
    layers.iter().map(layer_params).sum::<u64>() + classifier_params(net)
}

/// Multiply-accumulates for one image at `resolution`.
pub fn compute_flops(net: &NetworkStructure, resolution: u32) -> Result<u64, CostError> {
    let product = net.stride_product();
    if resolution == 0 || product == 0 || u64::from(resolution) % product != 0 {
        return Err(CostError::Divisibility {
            resolution,
            stride_product: product,
        });
    }
    let body: u64 = enumerate_layers_at(net, resolution).iter().map(LayerSpec::macs).sum();
    Ok(body + u64::from(net.head_width()) * u64::from(net.num_classes))
}

/// Cost of one super-block in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlockCost {
    pub flops: u64,
    pub params: u64,
}

/// Cost of `block` fed with `in_channels` channels at `input_resolution`.
pub fn superblock_cost(block: &SuperBlock, in_channels: u32, input_resolution: u32) -> BlockCost {
    // a throw-away net whose stem supplies the requested input shape
    let stem = SuperBlock::new(crate::structure::BlockType::Conv, 1, in_channels, 1, 1, 1.0);
    let net = NetworkStructure {
        name: String::new(),
        resolution: input_resolution,
        num_classes: 0,
        superblocks: vec![stem, block.clone()],
    };
    enumerate_layers_at(&net, input_resolution)
        .iter()
        .filter(|l| l.superblock == 1)
        .fold(BlockCost::default(), |acc, l| BlockCost {
            flops: acc.flops + l.macs(),
            params: acc.params + layer_params(l),
        })
}

/// FLOPs, parameters and (with a table) estimated latency.
pub fn cost_report(
    net: &NetworkStructure,
    resolution: u32,
    latency: Option<(&LatencyTable, u32)>,
) -> Result<CostReport, CostError> {
    let flops = compute_flops(net, resolution)?;
    let params = compute_params(net);
    let (latency_ms_per_image, extrapolated, batch) = match latency {
        Some((table, batch)) => {
            let est = estimate_latency(&net.with_resolution(resolution), table, batch)?;
            (Some(est.total_ms), est.extrapolated, batch)
        }
        None => (None, Vec::new(), 1),
    };
    Ok(CostReport {
        flops,
        params,
        latency_ms_per_image,
        extrapolated,
        resolution,
        batch,
    })
}
