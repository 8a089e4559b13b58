//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any fails. Run with `cargo test -p genet --test acceptance`.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{
    fixture, load_net, oracle_singular_values, plant, random_matrix, random_orthogonal, read_fixture, rng,
    selection_instance, small_master, structure_fixtures,
};
use genet::cost::{aggregate_latency, compute_flops, compute_params};
use genet::linalg::singular_values;
use genet::nas::{fit_pseudo_gradients, plan_trials, PerturbationRanges};
use genet::structure::{parse_structure, serialize_structure, validate_structure, BlockType};
use rand::seq::SliceRandom;
use rand::Rng;

const PARAMS_TOL: f64 = 0.03;
const FLOPS_TOL: f64 = 0.05;
const SVD_TOL: f64 = 1e-8;
const RECOVERY_TOL: f64 = 1e-9;
const ORTHOGONALITY_TOL: f64 = 1e-8;

type Check = Result<String, String>;

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let out = f()?;
    let took = start.elapsed();
    match limit {
        Some(l) if took > l => Err(format!("{out}; took {took:?}, limit {l:?}")),
        _ => Ok(format!("{out}; {took:.2?}")),
    }
}

fn rel(actual: u64, target: f64) -> f64 {
    actual as f64 / target - 1.0
}

fn params_calibration() -> Check {
    let mut parts = Vec::new();
    for (name, target) in [("genet-light", 8.17e6), ("genet-normal", 21e6), ("genet-large", 31e6)] {
        let p = compute_params(&load_net(name));
        let e = rel(p, target);
        parts.push(format!("{name} {p} ({:+.2}%)", 100.0 * e));
        if e.abs() > PARAMS_TOL {
            return Err(parts.join(", "));
        }
    }
    Ok(parts.join(", "))
}

fn flops_calibration() -> Check {
    let mut parts = Vec::new();
    for (name, res, target) in [
        ("genet-light", 192, 552e6),
        ("genet-normal", 192, 2.2e9),
        ("genet-large", 256, 4.6e9),
    ] {
        let f = compute_flops(&load_net(name), res).map_err(|e| e.to_string())?;
        let e = rel(f, target);
        parts.push(format!("{name}@{res} {f} ({:+.2}%)", 100.0 * e));
        if e.abs() > FLOPS_TOL {
            return Err(parts.join(", "));
        }
    }
    Ok(parts.join(", "))
}

fn trimmed_mean() -> Check {
    let one_to_thirty: Vec<f64> = (1..=30).map(f64::from).collect();
    let m = aggregate_latency(&one_to_thirty).map_err(|e| e.to_string())?;
    if m != 15.5 {
        return Err(format!("1..30 gave {m}"));
    }
    let mut r = rng(30);
    for case in 0..1000 {
        let n = r.random_range(1..=100);
        let mut s: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let a = aggregate_latency(&s).map_err(|e| e.to_string())?;
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if a < lo || a > hi {
            return Err(format!("case {case}: {a} outside [{lo}, {hi}]"));
        }
        s.shuffle(&mut r);
        let b = aggregate_latency(&s).map_err(|e| e.to_string())?;
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(format!("case {case}: {a} vs {b} after shuffle"));
        }
    }
    Ok("1..30 -> 15.5, 1000 random sets".into())
}

fn svd_oracle() -> Check {
    let mut r = rng(40);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let (m, n) = (r.random_range(1..=8), r.random_range(1..=8));
        let a = random_matrix(&mut r, m, n);
        let s = singular_values(&a).map_err(|e| e.to_string())?;
        let o = oracle_singular_values(&a);
        if s.len() != o.len() {
            return Err(format!("case {case}: {} vs {} values", s.len(), o.len()));
        }
        for (x, y) in s.iter().zip(&o) {
            worst = worst.max((x - y).abs());
        }
        if worst > SVD_TOL {
            return Err(format!("case {case}: deviation {worst:.2e}"));
        }
    }
    for case in 0..100 {
        let (m, n) = (r.random_range(1..=8), r.random_range(1..=8));
        let a = random_matrix(&mut r, m, n);
        let q = random_orthogonal(&mut r, m);
        let s = singular_values(&a).map_err(|e| e.to_string())?;
        let sq = singular_values(&q.matmul(&a)).map_err(|e| e.to_string())?;
        if s.iter().zip(&sq).any(|(x, y)| (x - y).abs() > SVD_TOL) {
            return Err(format!("orthogonal invariance case {case}"));
        }
        let fro: f64 = s.iter().map(|x| x * x).sum();
        if (fro - a.frobenius_norm_sq()).abs() > SVD_TOL {
            return Err(format!("Frobenius case {case}"));
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn planted_recovery() -> Check {
    let master = small_master(&[
        (BlockType::XX, 2, 32, 1.0),
        (BlockType::XX, 3, 48, 1.0),
        (BlockType::BL, 4, 128, 0.25),
        (BlockType::DW, 3, 96, 6.0),
        (BlockType::DW, 2, 160, 3.0),
    ]);
    let g = [
        (0.0, 0.0),
        (0.004, 0.00002),
        (0.003, 0.00004),
        (0.005, 0.00001),
        (0.002, 0.00003),
        (0.0045, 0.000015),
        (0.0, 0.0),
    ];
    let ranges = PerturbationRanges::default();
    let mut trials = plan_trials(&master, &ranges, 2020).map_err(|e| e.to_string())?;
    if trials.len() != 45 {
        return Err(format!("{} trials", trials.len()));
    }
    plant(&master, 0.776, &g, &mut trials);
    let table = fit_pseudo_gradients(&master, 0.776, &trials).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 1..=5 {
        let e = table
            .coarse(i, master.superblocks[i].block_type)
            .ok_or(format!("no entry for {i}"))?;
        worst = worst.max((e.g1 - g[i].0).abs()).max((e.g2 - g[i].1).abs());
    }
    if worst > RECOVERY_TOL {
        return Err(format!("recovery error {worst:.2e}"));
    }

    let mut r = rng(7);
    for t in &mut trials {
        t.accuracy = Some(t.accuracy.unwrap() + r.random_range(-0.01..0.01));
    }
    let noisy = fit_pseudo_gradients(&master, 0.776, &trials).map_err(|e| e.to_string())?;
    let mut ortho: f64 = 0.0;
    for i in 1..=5 {
        let m = &master.superblocks[i];
        let e = noisy.coarse(i, m.block_type).ok_or(format!("no entry for {i}"))?;
        let (mut xd, mut xc) = (0.0f64, 0.0f64);
        for t in trials.iter().filter(|t| t.superblock_index == i) {
            let dd = f64::from(t.depth) - f64::from(m.depth);
            let dc = f64::from(t.width) - f64::from(m.width);
            let res = t.accuracy.unwrap() - 0.776 - e.g1 * dd - e.g2 * dc;
            xd += dd * res;
            xc += dc * res;
        }
        ortho = ortho.max(xd.abs()).max(xc.abs());
    }
    if ortho > ORTHOGONALITY_TOL {
        return Err(format!("residual not orthogonal: {ortho:.2e}"));
    }
    Ok(format!("max |g - g*| {worst:.1e}, max |Xᵀr| {ortho:.1e}"))
}

fn selection_oracle() -> Check {
    for seed in 0..100 {
        selection_instance(1000 + seed)?;
    }
    Ok("100 instances agree".into())
}

fn genet_cli(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_genet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |f: &str| fixture(&format!("search/{f}")).to_string_lossy().into_owned();
    let gradients = dir.path().join("gradients.json");
    let g = gradients.to_string_lossy().into_owned();

    let fit = genet_cli(&["fit", &path("master.json"), &path("trials.csv"), "--master-accuracy", "0.776", "--out", &g])?;
    if !fit.status.success() {
        return Err(format!("fit failed: {}", String::from_utf8_lossy(&fit.stderr)));
    }
    if std::fs::read(&gradients).map_err(|e| e.to_string())? != read_fixture("search/gradients.json").into_bytes() {
        return Err("fitted gradients differ from the committed table".into());
    }

    for budget in ["0.34", "0.20", "0.10"] {
        let out = dir.path().join(format!("winners-{budget}.json"));
        let o = out.to_string_lossy().into_owned();
        let run = genet_cli(&[
            "search",
            &path("master.json"),
            &g,
            &path("latency.csv"),
            "--budget",
            budget,
            "--seed",
            "2020",
            "--resolutions",
            "192,224,256",
            "--out",
            &o,
        ])?;
        if run.status.code() != Some(0) {
            return Err(format!("search {budget} exited {:?}", run.status.code()));
        }
        let expected = read_fixture(&format!("search/winners-{budget}.json"));
        if std::fs::read_to_string(&out).map_err(|e| e.to_string())? != expected {
            return Err(format!("winner report for {budget} ms differs"));
        }
    }
    Ok("gradients and 3 winner reports byte-identical".into())
}

fn round_trip() -> Check {
    let fixtures = structure_fixtures();
    if fixtures.len() != 24 {
        return Err(format!("{} structure fixtures", fixtures.len()));
    }
    for (file, text) in &fixtures {
        let net = parse_structure(text).map_err(|e| format!("{file}: {e}"))?;
        if !validate_structure(&net).is_empty() {
            return Err(format!("{file}: violations"));
        }
        if serialize_structure(&net) != *text {
            return Err(format!("{file}: not byte-identical"));
        }
    }
    Ok("24 fixtures".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Option<Duration>, fn() -> Check); 8] = [
        ("params calibration", Some(Duration::from_secs(1)), params_calibration),
        ("FLOPs calibration", Some(Duration::from_secs(1)), flops_calibration),
        ("trimmed mean", None, trimmed_mean),
        ("SVD oracle equivalence", Some(Duration::from_secs(10)), svd_oracle),
        ("planted-gradient recovery", None, planted_recovery),
        ("selection oracle", None, selection_oracle),
        ("end-to-end seeded run", None, end_to_end),
        ("round-trip and validation", None, round_trip),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        match timed(limit, check) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
