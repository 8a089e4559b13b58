//! Singular-value spectra of convolution kernels: a full-rank kernel,
//! a planted low-rank one and a round trip through KT01 files.
//!
//! cargo run -p genet --example kernel_spectrum

use genet::rank::{load_kernel, spectrum, stage_report, write_kernel, KernelTensor};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn random_kernel(rng: &mut impl Rng, name: &str, dims: [u32; 4], rank: Option<usize>) -> KernelTensor {
    let rows = dims[0] as usize;
    let cols = (dims[1] * dims[2] * dims[3]) as usize;
    let data = match rank {
        None => (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        Some(r) => {
            let u: Vec<f32> = (0..rows * r).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let v: Vec<f32> = (0..r * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            (0..rows * cols)
                .map(|idx| {
                    let (i, j) = (idx / cols, idx % cols);
                    (0..r).map(|t| u[i * r + t] * v[t * cols + j] / (t + 1) as f32).sum()
                })
                .collect()
        }
    };
    KernelTensor::new(name.into(), dims, data).unwrap()
}

fn main() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let kernels = vec![
        random_kernel(&mut rng, "stage1", [16, 16, 3, 3], None),
        random_kernel(&mut rng, "stage2", [32, 32, 3, 3], Some(12)),
        random_kernel(&mut rng, "stage3", [64, 32, 3, 3], Some(6)),
    ];

    for k in &kernels {
        let s = spectrum(k).unwrap();
        let above = s.points.iter().filter(|p| p.lambda > 1e-4).count();
        println!(
            "{:<7} {:>3}x{:<4} decay_area {:.4}  {above} values above 1e-4",
            s.layer_name,
            k.c_out(),
            k.c_in() * k.kernel_size() * k.kernel_size(),
            s.decay_area
        );
    }

    let dir = std::env::temp_dir().join(format!("genet-kernels-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut loaded = Vec::new();
    for k in &kernels {
        let path = dir.join(format!("{}.kt01", k.layer_name));
        write_kernel(&path, k).unwrap();
        loaded.push(load_kernel(&path).unwrap());
    }
    assert_eq!(loaded, kernels);
    println!("\nwrote and reloaded {} KT01 files in {}", loaded.len(), dir.display());
    println!("try: cargo run -p genet -- spectrum {}", dir.display());

    let csv = stage_report(&loaded).unwrap();
    let summary = csv.split("\n\n").nth(1).unwrap();
    print!("\n{summary}");
}
