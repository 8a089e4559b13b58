#![allow(dead_code)]

use std::path::PathBuf;

use genet::cost::{LatencyRow, LatencyTable};
use genet::linalg::Matrix;
use genet::nas::{GradientEntry, PseudoGradientTable, TrialRecord};
use genet::structure::{parse_structure, BlockType, NetworkStructure, SuperBlock};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn load_net(name: &str) -> NetworkStructure {
    parse_structure(&read_fixture(&format!("structures/{name}.json"))).unwrap()
}

/// The 24 shipped structure documents, sorted by file name.
pub fn structure_fixtures() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixture("structures"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Orthogonal matrix from modified Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
    loop {
        let a = random_matrix(rng, n, n);
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| a.get(i, j)).collect()).collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let d: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..n {
                    cols[j][i] -= d * cols[k][i];
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            return Matrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}

/// Eigenvalues of a symmetric matrix by the classical cyclic Jacobi
/// rotation method, sorted descending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// Singular values via the eigenvalues of m·mᵀ (or mᵀ·m, whichever is
/// smaller), descending, length min(rows, cols).
pub fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    let gram = if m.rows() <= m.cols() {
        m.matmul(&m.transpose())
    } else {
        m.transpose().matmul(m)
    };
    symmetric_eigenvalues(&gram).into_iter().map(|l| l.max(0.0).sqrt()).collect()
}

/// A small valid master: stem, `body` super-blocks, head.
pub fn small_master(body: &[(BlockType, u32, u32, f64)]) -> NetworkStructure {
    let mut sbs = vec![SuperBlock::new(BlockType::Conv, 1, 16, 2, 3, 1.0)];
    for &(t, d, c, r) in body {
        sbs.push(SuperBlock::new(t, d, c, 2, 3, r));
    }
    sbs.push(SuperBlock::new(BlockType::Conv, 1, 256, 1, 1, 1.0));
    NetworkStructure {
        name: "master".into(),
        resolution: 32 << body.len(),
        num_classes: 10,
        superblocks: sbs,
    }
}

/// Noiseless planted accuracies: A* + g1·Δd + g2·Δc per trial.
pub fn plant(master: &NetworkStructure, a_star: f64, g: &[(f64, f64)], trials: &mut [TrialRecord]) {
    for t in trials {
        let m = &master.superblocks[t.superblock_index];
        let (g1, g2) = g[t.superblock_index];
        t.accuracy = Some(
            a_star
                + g1 * (f64::from(t.depth) - f64::from(m.depth))
                + g2 * (f64::from(t.width) - f64::from(m.width)),
        );
    }
}

/// Coarse-only table with the given gradients for every (index, type).
pub fn planted_table(master: &NetworkStructure, a_star: f64, g: &[(f64, f64)]) -> PseudoGradientTable {
    let mut entries = Vec::new();
    for i in master.body_indices() {
        for t in [BlockType::XX, BlockType::BL, BlockType::DW] {
            entries.push(GradientEntry {
                index: i,
                block_type: t,
                g1: g[i].0,
                g2: g[i].1,
                n: 1,
                rms: 0.0,
                singular: false,
                kernel: None,
                ratio: None,
            });
        }
    }
    PseudoGradientTable {
        master_accuracy: a_star,
        entries,
    }
}

/// Latency table covering every key a candidate of `master` can produce
/// under `kernels`/`ratios`, at `resolutions`, batch `batch`. Latency is a
/// smooth positive function of width; `jitter` perturbs each row.
pub fn synthetic_latency_table(
    master: &NetworkStructure,
    resolutions: &[u32],
    batch: u32,
    rng: &mut impl Rng,
    jitter: f64,
) -> LatencyTable {
    let mut table = LatencyTable::new("synthetic", "FP32");
    let mut seen = std::collections::BTreeSet::new();
    let last = master.superblocks.len() - 1;
    for &res in resolutions {
        let inputs = master.superblock_input_resolutions(res);
        for (i, b) in master.superblocks.iter().enumerate() {
            let body = i != 0 && i != last;
            let types: Vec<BlockType> = if body {
                vec![BlockType::XX, BlockType::BL, BlockType::DW]
            } else {
                vec![b.block_type]
            };
            for t in types {
                let ratios: Vec<f64> = match (body, t) {
                    (false, _) => vec![b.ratio],
                    (true, BlockType::BL) => vec![0.25, 0.5],
                    (true, BlockType::DW) => vec![3.0, 6.0, 9.0],
                    _ => vec![1.0],
                };
                let kernels: Vec<u32> = if body { vec![3, 5] } else { vec![b.kernel] };
                for &r in &ratios {
                    for &k in &kernels {
                        for w in [8, 64, 256, 1024, 4096] {
                            if !seen.insert((t, w, r.to_bits(), k, b.stride, inputs[i])) {
                                continue;
                            }
                            let area = f64::from(inputs[i] * inputs[i]);
                            let base = 1e-9 * area * f64::from(w) * f64::from(k) * (1.0 + r);
                            let noise = 1.0 + jitter * rng.random_range(-1.0..1.0);
                            table
                                .insert(LatencyRow {
                                    block_type: t,
                                    width: w,
                                    ratio: r,
                                    kernel: k,
                                    stride: b.stride,
                                    resolution: inputs[i],
                                    batch,
                                    latency_ms: base * noise,
                                })
                                .unwrap();
                        }
                    }
                }
            }
        }
    }
    table
}

/// What a correct selector must return at one resolution:
/// `Some((index, predicted, latency, feasible_count))` or `None`.
pub type OracleWinner = Option<(usize, f64, f64, usize)>;

/// Exhaustive filter-then-argmax, lowest index winning ties. `predicted`
/// and `latency` are precomputed per candidate.
pub fn brute_force_select(predicted: &[f64], latency: &[f64], budget: f64) -> OracleWinner {
    let feasible: Vec<usize> = (0..predicted.len()).filter(|&i| latency[i] <= budget).collect();
    let best = feasible
        .iter()
        .copied()
        .fold(None::<usize>, |best, i| match best {
            Some(b) if predicted[b] >= predicted[i] => Some(b),
            _ => Some(i),
        })?;
    Some((best, predicted[best], latency[best], feasible.len()))
}

/// Latency by direct summation over the table, independent of
/// `estimate_latency`'s bookkeeping: depth × interpolated row latency.
pub fn oracle_latency(net: &NetworkStructure, table: &LatencyTable, batch: u32) -> f64 {
    let inputs = net.superblock_input_resolutions(net.resolution);
    let rows: Vec<LatencyRow> = table.rows().collect();
    net.superblocks
        .iter()
        .zip(&inputs)
        .map(|(b, &res)| {
            let mut pts: Vec<(u32, f64)> = rows
                .iter()
                .filter(|r| {
                    r.block_type == b.block_type
                        && r.ratio == b.ratio
                        && r.kernel == b.kernel
                        && r.stride == b.stride
                        && r.resolution == res
                        && r.batch == batch
                })
                .map(|r| (r.width, r.latency_ms))
                .collect();
            pts.sort_by_key(|p| p.0);
            assert!(!pts.is_empty(), "no rows for {b:?} at {res}");
            let w = b.width;
            let per_block = if w <= pts[0].0 {
                pts[0].1
            } else if w >= pts[pts.len() - 1].0 {
                pts[pts.len() - 1].1
            } else {
                let j = pts.iter().position(|p| p.0 >= w).unwrap();
                let (w0, l0) = pts[j - 1];
                let (w1, l1) = pts[j];
                l0 + (f64::from(w - w0) / f64::from(w1 - w0)) * (l1 - l0)
            };
            f64::from(b.depth) * per_block
        })
        .sum()
}

/// Dyadic planted gradients so every prediction is exact in f64.
pub fn dyadic_gradients(rng: &mut impl Rng, blocks: usize) -> Vec<(f64, f64)> {
    (0..blocks)
        .map(|_| {
            (
                f64::from(rng.random_range(-8i32..=8)) / 256.0,
                f64::from(rng.random_range(-64i32..=64)) / 65536.0,
            )
        })
        .collect()
}

/// Prediction under a planted coarse model, written without the library.
pub fn planted_prediction(master: &NetworkStructure, a_star: f64, g: &[(f64, f64)], cand: &NetworkStructure) -> f64 {
    let mut acc = a_star;
    for i in master.body_indices() {
        let (m, c) = (&master.superblocks[i], &cand.superblocks[i]);
        acc += g[i].0 * (f64::from(c.depth) - f64::from(m.depth)) + g[i].1 * (f64::from(c.width) - f64::from(m.width));
    }
    acc
}

/// One random selection instance checked against [`brute_force_select`].
/// Returns a description of the first disagreement.
pub fn selection_instance(seed: u64) -> Result<(), String> {
    use genet::nas::{generate_candidates, select_best, PerturbationRanges, SearchConfig};

    let mut r = rng(seed);
    let types = [BlockType::XX, BlockType::BL, BlockType::DW];
    let n_body = r.random_range(1..=4);
    let body: Vec<(BlockType, u32, u32, f64)> = (0..n_body)
        .map(|_| {
            let t = types[r.random_range(0..3)];
            let ratio = match t {
                BlockType::BL => 0.25,
                BlockType::DW => 6.0,
                _ => 1.0,
            };
            (t, r.random_range(1..=4), 8 * r.random_range(2..=16), ratio)
        })
        .collect();
    let master = small_master(&body);
    let g = dyadic_gradients(&mut r, master.superblocks.len());
    let table = planted_table(&master, 0.5, &g);

    let unit = master.stride_product() as u32;
    let resolutions: Vec<u32> = (1..=3).filter(|_| r.random_bool(0.7)).map(|k| k * unit).collect();
    let resolutions = if resolutions.is_empty() { vec![unit] } else { resolutions };
    let batch = 16;
    let lat_table = synthetic_latency_table(&master, &resolutions, batch, &mut r, 0.3);

    let ranges = PerturbationRanges {
        allow_type_switch: r.random_bool(0.5),
        depth_delta: (-1, 1),
        ..PerturbationRanges::default()
    };
    let n = r.random_range(1..=64usize);
    let mut candidates = generate_candidates(&master, &ranges, n, r.random()).map_err(|e| e.to_string())?;
    // force exact ties now and then
    if n > 2 && r.random_bool(0.5) {
        let j = r.random_range(0..n);
        let k = r.random_range(0..n);
        candidates[k] = candidates[j].clone();
    }

    let predicted: Vec<f64> = candidates.iter().map(|c| planted_prediction(&master, 0.5, &g, c)).collect();
    let mut all_lat = Vec::new();
    for &res in &resolutions {
        for c in &candidates {
            all_lat.push(oracle_latency(&c.with_resolution(res), &lat_table, batch));
        }
    }
    all_lat.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let budget = match r.random_range(0..4) {
        0 => all_lat[0] * 0.5,
        1 => all_lat[all_lat.len() - 1] * 2.0,
        _ => all_lat[r.random_range(0..all_lat.len())],
    };

    let mut config = SearchConfig::new(budget, seed);
    config.resolutions = resolutions.iter().copied().collect();
    config.batch = batch;
    let outcomes = select_best(&candidates, &table, &master, &lat_table, &config).map_err(|e| e.to_string())?;

    for (o, &res) in outcomes.iter().zip(&resolutions) {
        if o.resolution != res {
            return Err(format!("seed {seed}: resolution order {} vs {res}", o.resolution));
        }
        let latency: Vec<f64> = candidates
            .iter()
            .map(|c| oracle_latency(&c.with_resolution(res), &lat_table, batch))
            .collect();
        let expected = brute_force_select(&predicted, &latency, budget);
        let got = o
            .result
            .as_ref()
            .ok()
            .map(|w| (w.candidate_index, w.predicted_accuracy, w.estimated_latency_ms, w.feasible_count));
        if got != expected {
            return Err(format!("seed {seed} @{res}: got {got:?}, oracle {expected:?}"));
        }
        if got.is_none() && o.result.as_ref().unwrap_err().code() != "NO_FEASIBLE_CANDIDATE" {
            return Err(format!("seed {seed} @{res}: wrong error {:?}", o.result));
        }
    }
    Ok(())
}
