//! Benchmark tables and the block-sum latency model.
//!
//! A network's latency is the sum over super-blocks of `depth` times the
//! per-basic-block latency looked up for the super-block's type, ratio,
//! kernel, stride, input resolution and batch. Width is interpolated
//! linearly between the two bracketing table widths and clamped (and
//! flagged) outside the measured range.

use std::collections::BTreeMap;
use std::fmt;

use ordered_float::OrderedFloat;

use super::CostError;
use crate::structure::{BlockType, NetworkStructure};

/// Exact header of benchmark CSV files.
pub const BENCHMARK_HEADER: &str = "block_type,width,ratio,kernel,stride,resolution,batch,latency_ms";

/// Trimmed mean: sorts, drops `floor(n / 10)` samples at each end and
/// averages the rest.
pub fn aggregate_latency(samples: &[f64]) -> Result<f64, CostError> {
    if samples.is_empty() {
        return Err(CostError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let drop = sorted.len() / 10;
    let kept = &sorted[drop..sorted.len() - drop];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Every table field except width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatencyKey {
    pub block_type: BlockType,
    pub ratio: OrderedFloat<f64>,
    pub kernel: u32,
    pub stride: u32,
    pub resolution: u32,
    pub batch: u32,
}

impl fmt::Display for LatencyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "type={} ratio={} kernel={} stride={} resolution={} batch={}",
            self.block_type, self.ratio.0, self.kernel, self.stride, self.resolution, self.batch
        )
    }
}

/// One benchmark operating point; latency is milliseconds per image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRow {
    pub block_type: BlockType,
    pub width: u32,
    pub ratio: f64,
    pub kernel: u32,
    pub stride: u32,
    pub resolution: u32,
    pub batch: u32,
    pub latency_ms: f64,
}

impl LatencyRow {
    pub fn key(&self) -> LatencyKey {
        LatencyKey {
            block_type: self.block_type,
            ratio: OrderedFloat(self.ratio),
            kernel: self.kernel,
            stride: self.stride,
            resolution: self.resolution,
            batch: self.batch,
        }
    }

    fn describe(&self) -> String {
        format!("{} width={}", self.key(), self.width)
    }
}

/// Result of a single table lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub latency_ms: f64,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyTable {
    pub device: String,
    pub precision: String,
    // widths sorted ascending within each key
    groups: BTreeMap<LatencyKey, Vec<(u32, f64)>>,
}

impl LatencyTable {
    pub fn new(device: impl Into<String>, precision: impl Into<String>) -> Self {
        LatencyTable {
            device: device.into(),
            precision: precision.into(),
            groups: BTreeMap::new(),
        }
    }

    /// Adds a row. Fails if the exact key (including width) already exists
    /// or the latency is not a positive finite number.
    pub fn insert(&mut self, row: LatencyRow) -> Result<(), String> {
        if !(row.latency_ms.is_finite() && row.latency_ms > 0.0) {
            return Err(format!("latency must be positive, got {}", row.latency_ms));
        }
        let widths = self.groups.entry(row.key()).or_default();
        match widths.binary_search_by_key(&row.width, |w| w.0) {
            Ok(_) => Err(row.describe()),
            Err(pos) => {
                widths.insert(pos, (row.width, row.latency_ms));
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Rows in key order, widths ascending.
    pub fn rows(&self) -> impl Iterator<Item = LatencyRow> + '_ {
        self.groups.iter().flat_map(|(k, widths)| {
            widths.iter().map(move |&(width, latency_ms)| LatencyRow {
                block_type: k.block_type,
                width,
                ratio: k.ratio.0,
                kernel: k.kernel,
                stride: k.stride,
                resolution: k.resolution,
                batch: k.batch,
                latency_ms,
            })
        })
    }

    /// Per-basic-block latency at `width`, or `None` if no row shares `key`.
    pub fn lookup(&self, key: &LatencyKey, width: u32) -> Option<Lookup> {
        let widths = self.groups.get(key)?;
        let (first, last) = (widths.first()?, widths.last()?);
        if width < first.0 {
            return Some(Lookup {
                latency_ms: first.1,
                extrapolated: true,
            });
        }
        if width > last.0 {
            return Some(Lookup {
                latency_ms: last.1,
                extrapolated: true,
            });
        }
        let latency_ms = match widths.binary_search_by_key(&width, |w| w.0) {
            Ok(i) => widths[i].1,
            Err(i) => {
                let (w0, l0) = widths[i - 1];
                let (w1, l1) = widths[i];
                let t = f64::from(width - w0) / f64::from(w1 - w0);
                l0 + t * (l1 - l0)
            }
        };
        Some(Lookup {
            latency_ms,
            extrapolated: false,
        })
    }

    /// Benchmark CSV text with the canonical header, rows in key order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if !self.device.is_empty() || !self.precision.is_empty() {
            out.push_str(&format!("# device={} precision={}\n", self.device, self.precision));
        }
        out.push_str(BENCHMARK_HEADER);
        out.push('\n');
        for r in self.rows() {
            out.push_str(&format_row(&r));
        }
        out
    }
}

fn format_row(r: &LatencyRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        r.block_type, r.width, r.ratio, r.kernel, r.stride, r.resolution, r.batch, r.latency_ms
    )
}

/// `# key=value key=value` metadata lines ahead of the header.
fn read_metadata(csv: &str) -> (String, String) {
    let mut device = String::new();
    let mut precision = String::new();
    for line in csv.lines().take_while(|l| l.trim_start().starts_with('#')) {
        for pair in line.trim_start().trim_start_matches('#').split_whitespace() {
            match pair.split_once('=') {
                Some(("device", v)) => device = v.to_string(),
                Some(("precision", v)) => precision = v.to_string(),
                _ => {}
            }
        }
    }
    (device, precision)
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T, CostError> {
    record
        .get(i)
        .map(str::trim)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CostError::MalformedRow {
            line,
            message: format!("bad `{name}` value {:?}", record.get(i).unwrap_or("")),
        })
}

/// Parses every data row of a benchmark-format CSV (header checked).
pub(crate) fn read_rows(csv_text: &str) -> Result<Vec<(u64, LatencyRow)>, CostError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(CostError::MalformedRow {
                line: 1,
                message: e.to_string(),
            })
        }
        None => {
            return Err(CostError::MalformedRow {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let joined: Vec<&str> = header.iter().map(str::trim).collect();
    if joined.join(",") != BENCHMARK_HEADER {
        return Err(CostError::MalformedRow {
            line: header.position().map_or(1, |p| p.line()),
            message: format!("expected header `{BENCHMARK_HEADER}`"),
        });
    }

    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| CostError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 8 {
            return Err(CostError::MalformedRow {
                line,
                message: format!("expected 8 fields, got {}", record.len()),
            });
        }
        let block_type: BlockType = parse_field(&record, 0, "block_type", line)?;
        let row = LatencyRow {
            block_type,
            width: parse_field(&record, 1, "width", line)?,
            ratio: parse_field(&record, 2, "ratio", line)?,
            kernel: parse_field(&record, 3, "kernel", line)?,
            stride: parse_field(&record, 4, "stride", line)?,
            resolution: parse_field(&record, 5, "resolution", line)?,
            batch: parse_field(&record, 6, "batch", line)?,
            latency_ms: parse_field(&record, 7, "latency_ms", line)?,
        };
        if !(row.latency_ms.is_finite() && row.latency_ms > 0.0) {
            return Err(CostError::MalformedRow {
                line,
                message: format!("latency must be positive, got {}", row.latency_ms),
            });
        }
        if !row.ratio.is_finite() || row.ratio <= 0.0 {
            return Err(CostError::MalformedRow {
                line,
                message: format!("ratio must be positive, got {}", row.ratio),
            });
        }
        rows.push((line, row));
    }
    Ok(rows)
}

/// Loads a benchmark CSV into a table; duplicate keys are rejected.
pub fn ingest_benchmark(csv_text: &str) -> Result<LatencyTable, CostError> {
    let (device, precision) = read_metadata(csv_text);
    let mut table = LatencyTable::new(device, precision);
    for (line, row) in read_rows(csv_text)? {
        table
            .insert(row)
            .map_err(|key| CostError::DuplicateKey { line, key })?;
    }
    Ok(table)
}

/// Groups raw timing samples (benchmark format, one sample per row) by
/// key and reduces each group with [`aggregate_latency`]. Output rows keep
/// the order in which each key first appears.
pub fn aggregate_raw_samples(csv_text: &str) -> Result<String, CostError> {
    let mut order: Vec<(LatencyKey, u32)> = Vec::new();
    let mut samples: BTreeMap<(LatencyKey, u32), Vec<f64>> = BTreeMap::new();
    let mut template: BTreeMap<(LatencyKey, u32), LatencyRow> = BTreeMap::new();
    for (_, row) in read_rows(csv_text)? {
        let k = (row.key(), row.width);
        samples
            .entry(k)
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(row.latency_ms);
        template.entry(k).or_insert(row);
    }

    let (device, precision) = read_metadata(csv_text);
    let mut out = String::new();
    if !device.is_empty() || !precision.is_empty() {
        out.push_str(&format!("# device={device} precision={precision}\n"));
    }
    out.push_str(BENCHMARK_HEADER);
    out.push('\n');
    for k in order {
        let mut row = template[&k];
        row.latency_ms = aggregate_latency(&samples[&k])?;
        out.push_str(&format_row(&row));
    }
    Ok(out)
}

/// Per-super-block breakdown of an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyEstimate {
    pub total_ms: f64,
    /// `depth * per-block latency` for each super-block.
    pub per_superblock: Vec<f64>,
    /// Super-blocks whose width fell outside the table range.
    pub extrapolated: Vec<usize>,
}

/// Estimated latency (ms per image) of `net` at its own resolution.
pub fn estimate_latency(net: &NetworkStructure, table: &LatencyTable, batch: u32) -> Result<LatencyEstimate, CostError> {
    let inputs = net.superblock_input_resolutions(net.resolution);
    let mut per_superblock = Vec::with_capacity(net.superblocks.len());
    let mut extrapolated = Vec::new();
    let mut missing = Vec::new();
    let mut first_missing = None;

    for (i, (block, &resolution)) in net.superblocks.iter().zip(&inputs).enumerate() {
        let key = LatencyKey {
            block_type: block.block_type,
            ratio: OrderedFloat(block.ratio),
            kernel: block.kernel,
            stride: block.stride,
            resolution,
            batch,
        };
        match table.lookup(&key, block.width) {
            Some(hit) => {
                per_superblock.push(hit.latency_ms * f64::from(block.depth));
                if hit.extrapolated {
                    extrapolated.push(i);
                }
            }
            None => {
                first_missing.get_or_insert(key);
                missing.push(i);
                per_superblock.push(0.0);
            }
        }
    }

    if let Some(key) = first_missing {
        return Err(CostError::MissingKey {
            indices: missing,
            detail: key.to_string(),
        });
    }
    Ok(LatencyEstimate {
        total_ms: per_superblock.iter().sum(),
        per_superblock,
        extrapolated,
    })
}
