//! Candidate generation and budget-constrained selection.

use rayon::prelude::*;
use serde_json::{Map, Value};

use super::ranges::{body_samplers, PerturbationRanges, SearchConfig};
use super::regression::{predict_accuracy, PseudoGradientTable};
use super::NasError;
use crate::cost::{estimate_latency, LatencyTable};
use crate::rng::seeded_rng;
use crate::structure::document::structure_to_value;
use crate::structure::NetworkStructure;

/// `n` random structures around `master`. Stem, head, strides and
/// resolution are kept; every body super-block is redrawn independently.
pub fn generate_candidates(
    master: &NetworkStructure,
    ranges: &PerturbationRanges,
    n: usize,
    seed: u64,
) -> Result<Vec<NetworkStructure>, NasError> {
    let samplers = body_samplers(master, ranges)?;
    let mut rng = seeded_rng(seed);
    let width = n.saturating_sub(1).to_string().len();
    Ok((0..n)
        .map(|c| {
            let mut net = master.clone();
            net.name = format!("{}-cand{:0width$}", master.name, c);
            for s in &samplers {
                net.superblocks[s.index()] = s.sample(&mut rng);
            }
            net
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Winner {
    pub candidate_index: usize,
    /// The winning structure at the resolution it was selected for.
    pub structure: NetworkStructure,
    pub predicted_accuracy: f64,
    pub estimated_latency_ms: f64,
    pub feasible_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionOutcome {
    pub resolution: u32,
    /// `Err(NoFeasibleCandidate)` when nothing fits the budget.
    pub result: Result<Winner, NasError>,
}

/// For each configured resolution independently: keep candidates whose
/// estimated latency is within budget and return the one with the highest
/// predicted accuracy, the lowest index winning ties.
///
/// Latency estimation runs in parallel; the reduction is sequential in
/// candidate order, so the outcome never depends on scheduling.
pub fn select_best(
    candidates: &[NetworkStructure],
    table: &PseudoGradientTable,
    master: &NetworkStructure,
    latency_table: &LatencyTable,
    config: &SearchConfig,
) -> Result<Vec<ResolutionOutcome>, NasError> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(NasError::InvalidConfig("no candidates to select from".into()));
    }
    let predicted = candidates
        .par_iter()
        .map(|c| predict_accuracy(table, master, c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut outcomes = Vec::with_capacity(config.resolutions.len());
    for &resolution in &config.resolutions {
        let sized: Vec<NetworkStructure> = candidates.iter().map(|c| c.with_resolution(resolution)).collect();
        let latencies = sized
            .par_iter()
            .map(|c| estimate_latency(c, latency_table, config.batch).map(|e| e.total_ms))
            .collect::<Result<Vec<_>, _>>()?;

        let mut best: Option<usize> = None;
        let mut feasible_count = 0;
        for (i, &lat) in latencies.iter().enumerate() {
            if lat > config.latency_budget_ms {
                continue;
            }
            feasible_count += 1;
            if best.is_none_or(|b| predicted[i] > predicted[b]) {
                best = Some(i);
            }
        }

        let result = match best {
            Some(i) => Ok(Winner {
                candidate_index: i,
                structure: sized[i].clone(),
                predicted_accuracy: predicted[i],
                estimated_latency_ms: latencies[i],
                feasible_count,
            }),
            None => Err(NasError::NoFeasibleCandidate { resolution }),
        };
        outcomes.push(ResolutionOutcome { resolution, result });
    }
    Ok(outcomes)
}

/// Generates candidates from `config` and selects per resolution.
pub fn run_search(
    master: &NetworkStructure,
    table: &PseudoGradientTable,
    latency_table: &LatencyTable,
    config: &SearchConfig,
) -> Result<Vec<ResolutionOutcome>, NasError> {
    config.validate()?;
    let candidates = generate_candidates(master, &config.ranges, config.num_candidates, config.seed)?;
    select_best(&candidates, table, master, latency_table, config)
}

const REPORT_NOTE: &str =
    "one winner per resolution; choosing among resolutions requires training each winner";

/// Canonical JSON winner report (sorted keys, trailing newline).
pub fn winner_report_json(outcomes: &[ResolutionOutcome], config: &SearchConfig) -> String {
    let entries: Vec<Value> = outcomes
        .iter()
        .map(|o| {
            let mut m = Map::new();
            match &o.result {
                Ok(w) => {
                    m.insert("candidate_index".into(), Value::from(w.candidate_index));
                    m.insert("estimated_latency_ms".into(), Value::from(w.estimated_latency_ms));
                    m.insert("feasible_count".into(), Value::from(w.feasible_count));
                    m.insert("predicted_accuracy".into(), Value::from(w.predicted_accuracy));
                    m.insert("resolution".into(), Value::from(o.resolution));
                    m.insert("status".into(), Value::from("OK"));
                    m.insert("structure".into(), structure_to_value(&w.structure));
                }
                Err(e) => {
                    m.insert("feasible_count".into(), Value::from(0));
                    m.insert("resolution".into(), Value::from(o.resolution));
                    m.insert("status".into(), Value::from(e.code()));
                }
            }
            Value::Object(m)
        })
        .collect();

    let mut root = Map::new();
    root.insert("batch".into(), Value::from(config.batch));
    root.insert("latency_budget_ms".into(), Value::from(config.latency_budget_ms));
    root.insert("note".into(), Value::from(REPORT_NOTE));
    root.insert("num_candidates".into(), Value::from(config.num_candidates));
    root.insert("resolutions".into(), Value::Array(entries));
    root.insert("seed".into(), Value::from(config.seed));
    let mut s = serde_json::to_string_pretty(&Value::Object(root)).expect("JSON values always serialize");
    s.push('\n');
    s
}
