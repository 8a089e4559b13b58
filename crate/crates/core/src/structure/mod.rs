//! The regularized MasterNet structural space.
//!
//! A network is a stem convolution, a chain of super-blocks and a 1×1
//! convolution head, followed by global average pooling and a
//! fully-connected classifier. Every super-block stacks `depth` identical
//! basic blocks of one [`BlockType`]; only the first basic block may
//! down-sample.

pub(crate) mod document;
pub(crate) mod layers;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use document::{parse_document, parse_structure, serialize_structure, StructureError};
pub use layers::{enumerate_layers, LayerRole, LayerSpec};

/// Kind of basic block a super-block is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockType {
    /// A single full convolution (stem, head, or plain layer).
    #[serde(rename = "CONV")]
    Conv,
    /// Two stacked full k×k convolutions inside a residual wrap.
    #[serde(rename = "XX")]
    XX,
    /// 1×1 reduce, k×k full, 1×1 expand; ratio ≤ 1.
    #[serde(rename = "BL")]
    BL,
    /// 1×1 expand, k×k depth-wise, 1×1 project; ratio ≥ 1.
    #[serde(rename = "DW")]
    DW,
}

impl BlockType {
    pub const ALL: [BlockType; 4] = [BlockType::Conv, BlockType::XX, BlockType::BL, BlockType::DW];

    pub fn as_str(self) -> &'static str {
        match self {
            BlockType::Conv => "CONV",
            BlockType::XX => "XX",
            BlockType::BL => "BL",
            BlockType::DW => "DW",
        }
    }

    /// Whether `ratio` is admissible for this block type.
    pub fn accepts_ratio(self, ratio: f64) -> bool {
        if !ratio.is_finite() {
            return false;
        }
        match self {
            BlockType::Conv | BlockType::XX => ratio == 1.0,
            BlockType::BL => ratio > 0.0 && ratio <= 1.0,
            BlockType::DW => ratio >= 1.0,
        }
    }

    /// True for the residual-wrapped block types.
    pub fn is_residual(self) -> bool {
        !matches!(self, BlockType::Conv)
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownBlockType(pub String);

impl fmt::Display for UnknownBlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown block type `{}`", self.0)
    }
}

impl std::error::Error for UnknownBlockType {}

impl FromStr for BlockType {
    type Err = UnknownBlockType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CONV" => Ok(BlockType::Conv),
            "XX" => Ok(BlockType::XX),
            "BL" => Ok(BlockType::BL),
            "DW" => Ok(BlockType::DW),
            other => Err(UnknownBlockType(other.to_string())),
        }
    }
}

/// A stack of `depth` identical basic blocks.
///
/// For BL and DW blocks `width` is the block output width and the inner
/// (bottleneck or depth-wise) layers have `width * ratio` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperBlock {
    pub block_type: BlockType,
    pub depth: u32,
    pub width: u32,
    pub stride: u32,
    pub kernel: u32,
    pub ratio: f64,
}

impl SuperBlock {
    pub fn new(block_type: BlockType, depth: u32, width: u32, stride: u32, kernel: u32, ratio: f64) -> Self {
        SuperBlock {
            block_type,
            depth,
            width,
            stride,
            kernel,
            ratio,
        }
    }

    /// Channel count of the inner layers, if `width * ratio` is a positive integer.
    pub fn inner_width(&self) -> Option<u32> {
        let inner = f64::from(self.width) * self.ratio;
        if inner.is_finite() && inner >= 1.0 && inner.fract() == 0.0 && inner <= f64::from(u32::MAX) {
            Some(inner as u32)
        } else {
            None
        }
    }
}

/// Re-expresses a DW block in the depth-wise-width convention: returns the
/// depth-wise channel count and the inverted ratio `1 / r`.
pub fn dw_to_depthwise_convention(block: &SuperBlock) -> Option<(u32, f64)> {
    if block.block_type != BlockType::DW {
        return None;
    }
    Some((block.inner_width()?, 1.0 / block.ratio))
}

/// Inverse of [`dw_to_depthwise_convention`]: from depth-wise width and
/// `r_new` back to output width and expansion ratio.
pub fn dw_from_depthwise_convention(dw_width: u32, r_new: f64) -> Option<(u32, f64)> {
    if !(r_new > 0.0 && r_new <= 1.0) {
        return None;
    }
    let width = f64::from(dw_width) * r_new;
    let rounded = width.round();
    if (width - rounded).abs() > 1e-9 || rounded < 1.0 {
        return None;
    }
    let width = rounded as u32;
    Some((width, f64::from(dw_width) / f64::from(width)))
}

/// A MasterNet-style network: stem, body super-blocks, head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStructure {
    pub name: String,
    pub resolution: u32,
    pub num_classes: u32,
    pub superblocks: Vec<SuperBlock>,
}

impl NetworkStructure {
    /// Product of all super-block strides.
    pub fn stride_product(&self) -> u64 {
        self.superblocks
            .iter()
            .map(|b| u64::from(b.stride))
            .product()
    }

    /// Indices of the body super-blocks (stem and head excluded).
    pub fn body_indices(&self) -> std::ops::Range<usize> {
        if self.superblocks.len() < 2 {
            0..0
        } else {
            1..self.superblocks.len() - 1
        }
    }

    /// Output width of the last super-block, fed to the classifier.
    pub fn head_width(&self) -> u32 {
        self.superblocks.last().map(|b| b.width).unwrap_or(0)
    }

    /// Input feature-map resolution of each super-block at `resolution`.
    pub fn superblock_input_resolutions(&self, resolution: u32) -> Vec<u32> {
        let mut h = resolution;
        self.superblocks
            .iter()
            .map(|b| {
                let r = h;
                h /= b.stride.max(1);
                r
            })
            .collect()
    }

    pub fn with_resolution(&self, resolution: u32) -> NetworkStructure {
        NetworkStructure {
            resolution,
            ..self.clone()
        }
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Fewer than two super-blocks (stem + head).
    TooFewBlocks,
    /// First super-block is not a stride-2 CONV.
    StemRule,
    /// Last super-block is not a CONV.
    HeadRule,
    /// Resolution not divisible by the stride product.
    Divisibility,
    Depth,
    Width,
    Stride,
    Kernel,
    Ratio,
    /// `width * ratio` is not a positive integer.
    InnerWidth,
    Resolution,
    NumClasses,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::TooFewBlocks => "TOO_FEW_BLOCKS",
            Rule::StemRule => "STEM_RULE",
            Rule::HeadRule => "HEAD_RULE",
            Rule::Divisibility => "DIVISIBILITY",
            Rule::Depth => "DEPTH",
            Rule::Width => "WIDTH",
            Rule::Stride => "STRIDE",
            Rule::Kernel => "KERNEL",
            Rule::Ratio => "RATIO",
            Rule::InnerWidth => "INNER_WIDTH",
            Rule::Resolution => "RESOLUTION",
            Rule::NumClasses => "NUM_CLASSES",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One broken invariant. `index` is `None` for network-level rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: Option<usize>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "{} at super-block {}: {}", self.rule, i, self.message),
            None => write!(f, "{}: {}", self.rule, self.message),
        }
    }
}

/// Checks every structural invariant and returns all violations found.
pub fn validate_structure(net: &NetworkStructure) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |index: Option<usize>, rule: Rule, message: String| {
        out.push(Violation { index, rule, message });
    };

    if net.resolution == 0 {
        push(None, Rule::Resolution, "resolution must be positive".into());
    }
    if net.num_classes == 0 {
        push(None, Rule::NumClasses, "num_classes must be positive".into());
    }
    if net.superblocks.len() < 2 {
        push(
            None,
            Rule::TooFewBlocks,
            format!("need at least stem and head, got {} super-blocks", net.superblocks.len()),
        );
    }

    if let Some(stem) = net.superblocks.first() {
        if stem.block_type != BlockType::Conv || stem.stride != 2 {
            push(
                Some(0),
                Rule::StemRule,
                format!("stem must be CONV with stride 2, got {} stride {}", stem.block_type, stem.stride),
            );
        }
    }
    if net.superblocks.len() >= 2 {
        let last = net.superblocks.len() - 1;
        let head = &net.superblocks[last];
        if head.block_type != BlockType::Conv {
            push(
                Some(last),
                Rule::HeadRule,
                format!("head must be CONV, got {}", head.block_type),
            );
        }
    }

    for (i, b) in net.superblocks.iter().enumerate() {
        if b.depth == 0 {
            push(Some(i), Rule::Depth, "depth must be at least 1".into());
        }
        if b.width == 0 {
            push(Some(i), Rule::Width, "width must be positive".into());
        }
        if b.stride != 1 && b.stride != 2 {
            push(Some(i), Rule::Stride, format!("stride must be 1 or 2, got {}", b.stride));
        }
        if b.kernel == 0 || b.kernel % 2 == 0 {
            push(Some(i), Rule::Kernel, format!("kernel must be odd and positive, got {}", b.kernel));
        }
        if !b.block_type.accepts_ratio(b.ratio) {
            push(
                Some(i),
                Rule::Ratio,
                format!("ratio {} not allowed for {} blocks", b.ratio, b.block_type),
            );
        } else if matches!(b.block_type, BlockType::BL | BlockType::DW)
            && b.width > 0
            && b.inner_width().is_none()
        {
            push(
                Some(i),
                Rule::InnerWidth,
                format!("width {} × ratio {} is not a positive integer", b.width, b.ratio),
            );
        }
    }

    let product = net.stride_product();
    if net.resolution > 0 && product > 0 && u64::from(net.resolution) % product != 0 {
        push(
            None,
            Rule::Divisibility,
            format!("resolution {} not divisible by stride product {}", net.resolution, product),
        );
    }

    out
}
