//! Pointwise posterior summaries of rate samples and scalar traces.

use epinp::chain::FunctionTrace;
use epinp::stats::{effective_sample_size, mean, quantile_sorted};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub day: f64,
    pub median: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// Samples available at this time point.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorSummary {
    pub rows: Vec<SummaryRow>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    pub ess: f64,
}

fn row(day: f64, mut values: Vec<f64>, level: f64) -> SummaryRow {
    let m = mean(&values);
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    SummaryRow {
        day,
        median: quantile_sorted(&values, 0.5),
        mean: m,
        lo: quantile_sorted(&values, tail),
        hi: quantile_sorted(&values, 1.0 - tail),
        count: values.len(),
    }
}

/// Central `level` credible band, median and mean at every grid point.
/// Missing samples are excluded per point; points with none are dropped.
pub fn summarize_trace(trace: &FunctionTrace, level: f64) -> PosteriorSummary {
    let mut out = PosteriorSummary::default();
    for (k, &day) in trace.grid.iter().enumerate() {
        let col = trace.column(k);
        if col.is_empty() {
            out.notes.push(format!("no samples at {day}; omitted"));
            continue;
        }
        out.rows.push(row(day, col, level));
    }
    out
}

/// Same as [`summarize_trace`] for long-format `(iteration, day, beta)` rows.
pub fn summarize_samples(samples: &[(usize, f64, f64)], level: f64) -> PosteriorSummary {
    let mut sorted: Vec<(f64, f64)> = samples.iter().map(|s| (s.1, s.2)).collect();
    // stable, so iteration order is kept within a day
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = PosteriorSummary::default();
    for chunk in sorted.chunk_by(|a, b| a.0 == b.0) {
        out.rows.push(row(chunk[0].0, chunk.iter().map(|c| c.1).collect(), level));
    }
    out
}

pub fn summarize_scalar(x: &[f64], level: f64) -> ScalarSummary {
    let r = row(0.0, x.to_vec(), level);
    ScalarSummary {
        mean: r.mean,
        median: r.median,
        lo: r.lo,
        hi: r.hi,
        ess: effective_sample_size(x),
    }
}
