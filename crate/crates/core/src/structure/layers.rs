use super::{BlockType, NetworkStructure, SuperBlock};

/// Position of a convolution inside its basic block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerRole {
    /// Plain CONV super-block layer.
    Plain,
    /// First or second k×k convolution of an XX block.
    Full,
    /// 1×1 channel reduction of a BL block.
    Reduce,
    /// 1×1 channel expansion (BL output or DW input side).
    Expand,
    /// k×k depth-wise convolution of a DW block.
    Depthwise,
    /// 1×1 projection back to block width (DW output side).
    Project,
    /// 1×1 convolution on the residual path when shapes mismatch.
    Shortcut,
}

/// One convolution of the expanded network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub superblock: usize,
    /// Index of the basic block inside its super-block.
    pub block: usize,
    pub role: LayerRole,
    pub in_channels: u32,
    pub out_channels: u32,
    pub kernel: u32,
    pub stride: u32,
    pub groups: u32,
    pub input_resolution: u32,
}

impl LayerSpec {
    pub fn output_resolution(&self) -> u32 {
        self.input_resolution / self.stride
    }

    /// Convolution weights, no bias.
    pub fn weight_count(&self) -> u64 {
        let k = u64::from(self.kernel);
        u64::from(self.in_channels / self.groups) * u64::from(self.out_channels) * k * k
    }

    /// Multiply-accumulates for one image.
    pub fn macs(&self) -> u64 {
        let h = u64::from(self.output_resolution());
        self.weight_count() * h * h
    }
}

/// Convolution shapes `(in, out, kernel, groups)` along the main path of one basic block.
fn main_path(block: &SuperBlock, in_channels: u32) -> Vec<(LayerRole, u32, u32, u32, u32)> {
    let c = block.width;
    let k = block.kernel;
    match block.block_type {
        BlockType::Conv => vec![(LayerRole::Plain, in_channels, c, k, 1)],
        BlockType::XX => vec![(LayerRole::Full, in_channels, c, k, 1), (LayerRole::Full, c, c, k, 1)],
        BlockType::BL => {
            let m = block.inner_width().unwrap_or(c);
            vec![
                (LayerRole::Reduce, in_channels, m, 1, 1),
                (LayerRole::Full, m, m, k, 1),
                (LayerRole::Expand, m, c, 1, 1),
            ]
        }
        BlockType::DW => {
            let m = block.inner_width().unwrap_or(c);
            vec![
                (LayerRole::Expand, in_channels, m, 1, 1),
                (LayerRole::Depthwise, m, m, k, m),
                (LayerRole::Project, m, c, 1, 1),
            ]
        }
    }
}

/// Expands every super-block into its convolutions, tracking feature-map
/// resolution from `net.resolution`.
///
/// Within a residual basic block the main-path layers come first, followed
/// by the shortcut projection when the block changes shape. Down-sampling
/// happens at the first main-path layer with kernel > 1, or at the first
/// layer when every kernel is 1×1.
pub fn enumerate_layers(net: &NetworkStructure) -> Vec<LayerSpec> {
    enumerate_layers_at(net, net.resolution)
}

pub(crate) fn enumerate_layers_at(net: &NetworkStructure, resolution: u32) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut channels = 3u32;
    let mut h = resolution;

    for (sb, block) in net.superblocks.iter().enumerate() {
        for b in 0..block.depth as usize {
            let stride = if b == 0 { block.stride.max(1) } else { 1 };
            let block_input = h;
            let block_channels = channels;
            let path = main_path(block, channels);
            let stride_at = path.iter().position(|l| l.3 > 1).unwrap_or(0);

            for (pos, (role, cin, cout, k, groups)) in path.into_iter().enumerate() {
                let s = if pos == stride_at { stride } else { 1 };
                layers.push(LayerSpec {
                    superblock: sb,
                    block: b,
                    role,
                    in_channels: cin,
                    out_channels: cout,
                    kernel: k,
                    stride: s,
                    groups,
                    input_resolution: h,
                });
                h /= s;
            }

            if block.block_type.is_residual() && (block_channels != block.width || stride != 1) {
                layers.push(LayerSpec {
                    superblock: sb,
                    block: b,
                    role: LayerRole::Shortcut,
                    in_channels: block_channels,
                    out_channels: block.width,
                    kernel: 1,
                    stride,
                    groups: 1,
                    input_resolution: block_input,
                });
            }
            channels = block.width;
        }
    }
    layers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::SuperBlock;

    fn net(blocks: Vec<SuperBlock>, resolution: u32) -> NetworkStructure {
        NetworkStructure {
            name: "t".into(),
            resolution,
            num_classes: 10,
            superblocks: blocks,
        }
    }

    #[test]
    fn minimal_two_layers() {
        let n = net(
            vec![
                SuperBlock::new(BlockType::Conv, 1, 8, 2, 3, 1.0),
                SuperBlock::new(BlockType::Conv, 1, 16, 1, 1, 1.0),
            ],
            32,
        );
        let layers = enumerate_layers(&n);
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].input_resolution, 32);
        assert_eq!(layers[1].input_resolution, 16);
        assert_eq!(layers[1].in_channels, 8);
    }

    #[test]
    fn xx_depth_three_with_stride_and_width_change() {
        let n = net(
            vec![
                SuperBlock::new(BlockType::Conv, 1, 16, 2, 3, 1.0),
                SuperBlock::new(BlockType::XX, 3, 32, 2, 3, 1.0),
                SuperBlock::new(BlockType::Conv, 1, 64, 1, 1, 1.0),
            ],
            64,
        );
        let layers: Vec<_> = enumerate_layers(&n).into_iter().filter(|l| l.superblock == 1).collect();
        let convs = layers.iter().filter(|l| l.role == LayerRole::Full).count();
        let shortcuts: Vec<_> = layers.iter().filter(|l| l.role == LayerRole::Shortcut).collect();
        assert_eq!(convs, 6);
        assert_eq!(shortcuts.len(), 1);
        assert_eq!(shortcuts[0].block, 0);
        assert_eq!(shortcuts[0].stride, 2);
        assert_eq!(shortcuts[0].input_resolution, 32);
        assert_eq!((shortcuts[0].in_channels, shortcuts[0].out_channels), (16, 32));
    }

    #[test]
    fn downsampling_at_first_spatial_layer() {
        let n = net(
            vec![
                SuperBlock::new(BlockType::Conv, 1, 16, 2, 3, 1.0),
                SuperBlock::new(BlockType::DW, 1, 32, 2, 3, 6.0),
                SuperBlock::new(BlockType::Conv, 1, 64, 1, 1, 1.0),
            ],
            64,
        );
        let layers = enumerate_layers(&n);
        let dw: Vec<_> = layers.iter().filter(|l| l.superblock == 1).collect();
        assert_eq!(dw[0].role, LayerRole::Expand);
        assert_eq!(dw[0].stride, 1);
        assert_eq!(dw[1].role, LayerRole::Depthwise);
        assert_eq!(dw[1].stride, 2);
        assert_eq!(dw[1].groups, 192);
        assert_eq!(dw[1].in_channels, 192);
        assert_eq!(dw[2].input_resolution, 16);
    }

    #[test]
    fn one_by_one_blocks_downsample_first_layer() {
        let n = net(
            vec![
                SuperBlock::new(BlockType::Conv, 1, 16, 2, 3, 1.0),
                SuperBlock::new(BlockType::BL, 1, 32, 2, 1, 0.5),
                SuperBlock::new(BlockType::Conv, 1, 64, 1, 1, 1.0),
            ],
            64,
        );
        let layers = enumerate_layers(&n);
        let bl: Vec<_> = layers.iter().filter(|l| l.superblock == 1).collect();
        assert_eq!(bl[0].stride, 2);
        assert_eq!(bl[1].stride, 1);
    }

    #[test]
    fn identity_shortcut_has_no_projection() {
        let n = net(
            vec![
                SuperBlock::new(BlockType::Conv, 1, 32, 2, 3, 1.0),
                SuperBlock::new(BlockType::XX, 2, 32, 1, 3, 1.0),
                SuperBlock::new(BlockType::Conv, 1, 64, 1, 1, 1.0),
            ],
            32,
        );
        assert!(enumerate_layers(&n).iter().all(|l| l.role != LayerRole::Shortcut));
    }
}
