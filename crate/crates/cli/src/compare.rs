use std::collections::BTreeMap;

use lot_core::exact_lot::predict;

use crate::error::CliError;
use crate::report::{ModelReport, TruthRecord};

pub const COMPARISON_HEADER: [&str; 7] = ["circuit", "n_gates", "truth", "prediction_a", "prediction_b", "error_a", "error_b"];
pub const BUCKET_HEADER: [&str; 10] = [
    "n_gates_from",
    "n_gates_to",
    "circuits",
    "mean_truth",
    "mean_prediction_a",
    "mean_prediction_b",
    "max_error_a",
    "max_error_b",
    "mean_error_a",
    "mean_error_b",
];

pub struct Comparison {
    pub rows: Vec<Vec<String>>,
    pub buckets: Vec<Vec<String>>,
}

/// Buckets group gate counts `[k·w, (k+1)·w)` for bucket width `w`.
pub fn compare(a: &ModelReport, b: &ModelReport, circuits: &[TruthRecord], bucket_width: usize) -> Result<Comparison, CliError> {
    if bucket_width == 0 {
        return Err(CliError::Validation("bucket width must be positive".into()));
    }
    if a.model.dim() != a.d || b.model.dim() != b.d {
        return Err(CliError::Validation("report dimension does not match its model".into()));
    }
    for (i, r) in circuits.iter().enumerate() {
        for g in &r.circuit.gates {
            for (name, m) in [("a", a), ("b", b)] {
                if !m.model.gates.contains_key(g) {
                    return Err(CliError::Validation(format!("circuit {i} ({}) uses gate {g}, which model {name} lacks", r.circuit)));
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(circuits.len());
    // bucket -> (count, truth, pred a, pred b, max err a, max err b, sum err a, sum err b)
    let mut buckets: BTreeMap<usize, [f64; 8]> = BTreeMap::new();
    for r in circuits {
        let pa = predict(&a.model, &r.circuit)?;
        let pb = predict(&b.model, &r.circuit)?;
        let (ea, eb) = ((pa - r.truth).abs(), (pb - r.truth).abs());
        let n = r.circuit.len();
        rows.push(vec![r.circuit.to_string(), n.to_string(), num(r.truth), num(pa), num(pb), num(ea), num(eb)]);
        let e = buckets.entry(n / bucket_width).or_insert([0.0; 8]);
        e[0] += 1.0;
        e[1] += r.truth;
        e[2] += pa;
        e[3] += pb;
        e[4] = e[4].max(ea);
        e[5] = e[5].max(eb);
        e[6] += ea;
        e[7] += eb;
    }
    let buckets = buckets
        .into_iter()
        .map(|(k, e)| {
            vec![
                (k * bucket_width).to_string(),
                ((k + 1) * bucket_width - 1).to_string(),
                (e[0] as usize).to_string(),
                num(e[1] / e[0]),
                num(e[2] / e[0]),
                num(e[3] / e[0]),
                num(e[4]),
                num(e[5]),
                num(e[6] / e[0]),
                num(e[7] / e[0]),
            ]
        })
        .collect();
    Ok(Comparison { rows, buckets })
}

/// Shortest representation that round-trips.
fn num(x: f64) -> String {
    format!("{x:?}")
}
