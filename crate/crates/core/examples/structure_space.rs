//! Build a network in the structural space, validate it, look at its
//! layer expansion and write it as a canonical JSON document.
//!
//! cargo run -p genet --example structure_space

use genet::structure::{
    enumerate_layers, parse_structure, serialize_structure, validate_structure, BlockType, LayerRole,
    NetworkStructure, SuperBlock,
};

fn main() {
    let net = NetworkStructure {
        name: "tiny-genet".into(),
        resolution: 224,
        num_classes: 1000,
        superblocks: vec![
            SuperBlock::new(BlockType::Conv, 1, 32, 2, 3, 1.0),
            SuperBlock::new(BlockType::XX, 1, 64, 2, 3, 1.0),
            SuperBlock::new(BlockType::XX, 2, 96, 2, 3, 1.0),
            SuperBlock::new(BlockType::BL, 3, 384, 2, 3, 0.25),
            SuperBlock::new(BlockType::DW, 2, 256, 2, 3, 3.0),
            SuperBlock::new(BlockType::Conv, 1, 1280, 1, 1, 1.0),
        ],
    };
    assert!(validate_structure(&net).is_empty());

    println!("{:>3} {:>9} {:>5} {:>5} {:>2} {:>2} {:>5} {:>4}", "sb", "role", "in", "out", "k", "s", "groups", "res");
    for l in enumerate_layers(&net) {
        println!(
            "{:>3} {:>9} {:>5} {:>5} {:>2} {:>2} {:>5} {:>4}",
            l.superblock,
            format!("{:?}", l.role),
            l.in_channels,
            l.out_channels,
            l.kernel,
            l.stride,
            l.groups,
            l.input_resolution
        );
    }
    let shortcuts = enumerate_layers(&net).iter().filter(|l| l.role == LayerRole::Shortcut).count();
    println!("{shortcuts} projection shortcuts\n");

    let text = serialize_structure(&net);
    assert_eq!(serialize_structure(&parse_structure(&text).unwrap()), text);
    print!("{text}");

    let mut broken = net.clone();
    broken.superblocks[4].ratio = 0.5;
    broken.resolution = 100;
    for v in validate_structure(&broken) {
        println!("violation: {v}");
    }
}
