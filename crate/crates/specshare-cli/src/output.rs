//! Result serialization: locale-independent CSV and codebook JSON files.
//!
//! CSV is stable-ordered and byte-reproducible for a fixed config — every
//! column except the trailing `wall_ms` is a pure function of the config
//! file.  Numeric columns use six significant digits with a `.` decimal
//! point regardless of locale.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Method;

/// Six-significant-digit rendering: plain decimal in a comfortable exponent
/// range, scientific notation outside it.  Deterministic and
/// locale-independent (Rust never localizes the decimal separator).
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000000".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-3..=5).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// Metrics of one completed run; every field is in linear units and nats.
pub struct RowMetrics {
    pub capacity: f64,
    pub capacity_se: f64,
    pub atp: f64,
    pub aip: Vec<f64>,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub iterations: usize,
}

/// One emitted CSV row: the operating point, either metrics or a failure
/// status, and the wall-clock time it took.
pub struct Row {
    pub p_avg_db: f64,
    pub method: Method,
    pub bits_label: String,
    pub q_f: f64,
    pub outcome: Result<RowMetrics, String>,
    pub wall_ms: u128,
}

pub fn csv_header(m: usize, bits_capacity: bool) -> String {
    let cap = if bits_capacity { "capacity_bits,capacity_se_bits" } else { "capacity_nats,capacity_se" };
    let mut cols = vec![format!("P_avg_dB,method,B,q_f,{cap},ATP")];
    cols.extend((1..=m).map(|i| format!("AIP_{i}")));
    cols.push("lambda".into());
    cols.extend((1..=m).map(|i| format!("mu_{i}")));
    cols.push("iterations,status,wall_ms".into());
    cols.join(",")
}

pub fn csv_row(row: &Row, m: usize, bits_capacity: bool) -> String {
    let scale = if bits_capacity { 1.0 / std::f64::consts::LN_2 } else { 1.0 };
    let mut cols = vec![
        sig6(row.p_avg_db),
        row.method.name().into(),
        row.bits_label.clone(),
        sig6(row.q_f),
    ];
    match &row.outcome {
        Ok(mx) => {
            cols.push(sig6(mx.capacity * scale));
            cols.push(sig6(mx.capacity_se * scale));
            cols.push(sig6(mx.atp));
            cols.extend(mx.aip.iter().map(|&x| sig6(x)));
            cols.push(sig6(mx.lambda));
            cols.extend(mx.mu.iter().map(|&x| sig6(x)));
            cols.push(mx.iterations.to_string());
            cols.push("ok".into());
        }
        Err(status) => {
            // Blank metric columns keep the schema aligned; the status column
            // carries the solver diagnostic.
            cols.extend(std::iter::repeat(String::new()).take(3 + m + 1 + m + 1));
            cols.push(status.replace([',', '\n'], ";"));
        }
    }
    cols.push(row.wall_ms.to_string());
    cols.join(",")
}

/// On-disk codebook: linear-unit levels per band, the converged prices, the
/// capacity measured on the evaluation set, and the config that produced it.
#[derive(Serialize, Deserialize)]
pub struct CodebookFile {
    pub method: Method,
    pub bits: Option<u32>,
    pub levels: usize,
    pub q_f: f64,
    #[serde(rename = "P_avg_dB")]
    pub p_avg_db: f64,
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// `codebooks[band][index]` in linear power units; for feedback-error
    /// designs the index is the binary codeword, otherwise levels descend.
    pub codebooks: Vec<Vec<f64>>,
    pub capacity_nats: f64,
    pub seed: u64,
    pub config: Value,
}

impl CodebookFile {
    pub fn file_name(&self) -> String {
        let size = match self.bits {
            Some(b) => format!("B{b}"),
            None => format!("L{}", self.levels),
        };
        format!("codebook_{}_{}_P{}.json", self.method.name(), size, self.p_avg_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(21.285321), "21.2853");
        assert_eq!(sig6(1.690212), "1.69021");
        assert_eq!(sig6(-10.0), "-10.0000");
        assert_eq!(sig6(0.00123456789), "0.00123457");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.0), "0.000000");
        assert_eq!(sig6(1e-4), "1.00000e-4");
        assert_eq!(sig6(9.87654321e7), "9.87654e7");
    }

    #[test]
    fn header_matches_row_width() {
        let m = 3;
        let header = csv_header(m, false);
        let row = Row {
            p_avg_db: 10.0,
            method: Method::Gla,
            bits_label: "2".into(),
            q_f: 0.0,
            outcome: Ok(RowMetrics {
                capacity: 1.0,
                capacity_se: 0.01,
                atp: 5.0,
                aip: vec![0.1; m],
                lambda: 0.0,
                mu: vec![1.0; m],
                iterations: 7,
            }),
            wall_ms: 3,
        };
        assert_eq!(header.split(',').count(), csv_row(&row, m, false).split(',').count());
        let failed = Row { outcome: Err("solver, gave up".into()), ..row };
        let line = csv_row(&failed, m, false);
        assert_eq!(header.split(',').count(), line.split(',').count());
        assert!(line.contains("solver; gave up"));
    }
}
