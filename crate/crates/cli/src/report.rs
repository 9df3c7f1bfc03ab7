//! Plain-text tables. Every table is a pure function of its inputs.

use std::fmt::Write as _;

use xchain_core::orchestrator::{minutes, OverheadReport, ScenarioTrace, SweepCell};

/// Rows of labelled cells, rendered as aligned columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportTable {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn render(&self) -> String {
        let columns = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = format!("{}\n", self.title);
        for row in std::iter::once(&self.header).chain(&self.rows) {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate().take(columns) {
                if i == 0 {
                    let _ = write!(line, "{cell:<width$}", width = widths[0]);
                } else {
                    let _ = write!(line, "  {cell:>width$}", width = widths[i]);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

/// Minutes without trailing zeros: `41`, `7.5`.
pub fn format_minutes(blocks: u64, seconds_per_block: u64) -> String {
    let m = minutes(blocks, seconds_per_block);
    if m.is_integer() {
        m.to_integer().to_string()
    } else {
        let value = *m.numer() as f64 / *m.denom() as f64;
        format!("{value:.1}")
    }
}

fn blocks_and_minutes(blocks: u64, seconds_per_block: u64) -> String {
    format!("{blocks} ({} min)", format_minutes(blocks, seconds_per_block))
}

pub fn invocation_table(trace: &ScenarioTrace) -> ReportTable {
    let header = ["invocation", "depth", "method", "outcome", "span", "value"];
    let rows = trace
        .invocations
        .iter()
        .map(|s| {
            vec![
                format!("{}/{}", s.chain, s.invocation_id),
                s.depth.to_string(),
                s.method.clone(),
                format!("{:?}", s.outcome),
                s.block_span.map_or("-".into(), |b| b.to_string()),
                s.value.as_ref().map_or("-".into(), |v| v.render()),
            ]
        })
        .collect();
    ReportTable {
        title: format!("invocations (stopped: {:?})", trace.end.stop_reason),
        header: header.map(String::from).to_vec(),
        rows,
    }
}

pub fn gas_table(report: &OverheadReport) -> ReportTable {
    let header = ["operation", "count", "mean", "min", "max"];
    let rows: Vec<Vec<String>> = report
        .gas
        .iter()
        .map(|r| {
            vec![
                r.kind.label().to_string(),
                r.count.to_string(),
                r.mean().to_string(),
                r.min.to_string(),
                r.max.to_string(),
            ]
        })
        .collect();
    ReportTable {
        title: "gas units per operation".into(),
        header: header.map(String::from).to_vec(),
        rows,
    }
}

pub fn overhead_lines(report: &OverheadReport, seconds_per_block: u64) -> String {
    format!(
        "latency: {} vs manual {} (factor {})\ngas: {} for the whole cross-chain call vs {} manual\n",
        blocks_and_minutes(report.block_span, seconds_per_block),
        blocks_and_minutes(report.manual_blocks, seconds_per_block),
        report.latency_factor,
        report.cross_chain_gas,
        report.manual_gas
    )
}

/// One row per phase length and a column pair (blocks, minutes) per
/// waiting-block setting. Cells read `optimal/simulated`; the last row is
/// the manual baseline.
pub fn latency_matrix(cells: &[SweepCell], seconds_per_block: u64) -> ReportTable {
    let mut waiting: Vec<u64> = cells.iter().map(|c| c.waiting_blocks).collect();
    let mut phase: Vec<u64> = cells.iter().map(|c| c.blocks_per_phase).collect();
    waiting.sort_unstable();
    waiting.dedup();
    phase.sort_unstable();
    phase.dedup();
    let cell = |w: u64, b: u64| {
        cells
            .iter()
            .find(|c| c.waiting_blocks == w && c.blocks_per_phase == b)
            .expect("sweep covers the full grid")
    };

    let mut header = vec!["b \\ w".to_string()];
    for w in &waiting {
        header.push(format!("{w} blocks"));
        header.push(format!("{w} min"));
    }
    let mut rows = Vec::new();
    for &b in &phase {
        let mut row = vec![b.to_string()];
        for &w in &waiting {
            let c = cell(w, b);
            let opt_min = format_minutes(c.optimal, seconds_per_block);
            match c.block_span {
                Some(s) => {
                    row.push(format!("{}/{s}", c.optimal));
                    row.push(format!("{opt_min}/{}", format_minutes(s, seconds_per_block)));
                }
                None => {
                    row.push(format!("{}/-", c.optimal));
                    row.push(format!("{opt_min}/-"));
                }
            }
        }
        rows.push(row);
    }
    let mut manual = vec!["m".to_string()];
    for &w in &waiting {
        let m = cell(w, phase[0]).manual;
        manual.push(m.to_string());
        manual.push(format_minutes(m, seconds_per_block));
    }
    rows.push(manual);
    ReportTable {
        title: format!("optimal/simulated latency in blocks and minutes ({seconds_per_block} s per block)"),
        header,
        rows,
    }
}
