//! The whole search loop on a master network: plan perturbation trials,
//! attach accuracies (here from a planted linear model instead of
//! fine-tuning), fit pseudo-gradients and pick the best candidate under
//! each latency budget.
//!
//! cargo run -p genet --example llr_search

use std::path::Path;

use genet::cost::ingest_benchmark;
use genet::nas::{
    fit_pseudo_gradients, plan_trials, predict_accuracy, run_search, PerturbationRanges, SearchConfig,
};
use genet::structure::parse_structure;

fn fixture(rel: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn main() {
    let master = parse_structure(&fixture("search/master.json")).unwrap();
    let latency = ingest_benchmark(&fixture("search/latency.csv")).unwrap();
    let a_star = 0.776;

    let mut trials = plan_trials(&master, &PerturbationRanges::default(), 2020).unwrap();
    for t in &mut trials {
        let m = &master.superblocks[t.superblock_index];
        let dd = f64::from(t.depth) - f64::from(m.depth);
        let dc = f64::from(t.width) - f64::from(m.width);
        t.accuracy = Some(a_star + 0.004 * dd + 0.00002 * dc);
    }
    println!("{} trials over {} body super-blocks", trials.len(), master.body_indices().len());

    let table = fit_pseudo_gradients(&master, a_star, &trials).unwrap();
    for e in table.entries.iter().filter(|e| e.kernel.is_none()) {
        println!("  sb{} {:<2}  g1 {:+.6}  g2 {:+.8}  rms {:.1e}", e.index, e.block_type, e.g1, e.g2, e.rms);
    }

    let mut deeper = master.clone();
    deeper.superblocks[3].depth += 2;
    println!("\nmaster predicted {:.4}", predict_accuracy(&table, &master, &master).unwrap());
    println!("sb3 two blocks deeper {:.4}", predict_accuracy(&table, &master, &deeper).unwrap());

    for budget in [0.34, 0.20, 0.10] {
        let config = SearchConfig::new(budget, 2020);
        println!("\nbudget {budget} ms/image");
        for o in run_search(&master, &table, &latency, &config).unwrap() {
            match o.result {
                Ok(w) => println!(
                    "  @{}: {} predicted {:.4} at {:.4} ms ({} of {} feasible)",
                    o.resolution, w.structure.name, w.predicted_accuracy, w.estimated_latency_ms, w.feasible_count,
                    config.num_candidates
                ),
                Err(e) => println!("  @{}: {}", o.resolution, e.code()),
            }
        }
    }
}
