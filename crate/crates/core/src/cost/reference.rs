//! Whole-network reference latencies (`model,acc,batch,latency_ms`).

use super::CostError;

pub const NETWORK_LATENCY_HEADER: &str = "model,acc,batch,latency_ms";

/// A measured whole-network latency; `acc` is top-1 as a fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLatency {
    pub model: String,
    pub acc: f64,
    pub batch: u32,
    pub latency_ms: f64,
}

pub fn parse_network_latency(csv_text: &str) -> Result<Vec<NetworkLatency>, CostError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| CostError::MalformedRow {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>().join(",") != NETWORK_LATENCY_HEADER {
        return Err(CostError::MalformedRow {
            line: 1,
            message: format!("expected header `{NETWORK_LATENCY_HEADER}`"),
        });
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CostError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str| CostError::MalformedRow {
            line,
            message: format!("bad `{what}`"),
        };
        out.push(NetworkLatency {
            model: record[0].to_string(),
            acc: record[1].parse().map_err(|_| bad("acc"))?,
            batch: record[2].parse().map_err(|_| bad("batch"))?,
            latency_ms: record[3].parse().map_err(|_| bad("latency_ms"))?,
        });
    }
    Ok(out)
}
