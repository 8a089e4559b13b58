//! FLOPs and parameters of the shipped GENets, then a latency estimate
//! from a benchmark table built by aggregating raw timing samples.
//!
//! cargo run -p genet --example cost_model

use std::path::Path;

use genet::cost::{
    aggregate_latency, aggregate_raw_samples, compute_flops, compute_params, cost_report, estimate_latency,
    ingest_benchmark,
};
use genet::structure::parse_structure;

fn fixture(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn main() {
    for name in ["genet-light", "genet-normal", "genet-large"] {
        let net = parse_structure(&fixture(&format!("structures/{name}.json"))).unwrap();
        let flops = compute_flops(&net, net.resolution).unwrap();
        println!(
            "{name:<13} @{}  {:>6.3} GFLOPs  {:>6.2} M params",
            net.resolution,
            flops as f64 / 1e9,
            compute_params(&net) as f64 / 1e6
        );
    }

    let samples: Vec<f64> = (1..=30).map(f64::from).collect();
    println!("\ntrimmed mean of 1..=30: {}", aggregate_latency(&samples).unwrap());
    print!("{}", aggregate_raw_samples(&fixture("bench/raw-samples.csv")).unwrap());

    let table = ingest_benchmark(&fixture("search/latency.csv")).unwrap();
    let net = parse_structure(&fixture("search/master.json")).unwrap();
    println!("\n{} rows from device `{}`", table.len(), table.device);
    for res in [192, 224, 256] {
        let est = estimate_latency(&net.with_resolution(res), &table, 64).unwrap();
        let parts: Vec<String> = est.per_superblock.iter().map(|v| format!("{v:.4}")).collect();
        println!("{} @{res}: {:.4} ms/image  [{}]", net.name, est.total_ms, parts.join(" "));
    }
    let report = cost_report(&net, 224, Some((&table, 64))).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
