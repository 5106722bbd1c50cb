//! Rendering cost reports and analysis summaries as tables, CSV and JSON.

use std::fmt::Write as _;

use anyhow::Result;
use serde_json::json;

use coconv_core::cost::{CostMode, CostReport};
use coconv_core::network::ReceptiveSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

pub fn render_cost(report: &CostReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Table => Ok(render_cost_table(report)),
        ReportFormat::Csv => Ok(render_cost_csv(report)),
        ReportFormat::Json => render_cost_json(report),
    }
}

fn thousands(v: u64) -> String {
    let digits = v.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn render_cost_table(report: &CostReport) -> String {
    let mut out = String::new();
    let mode = match report.mode {
        CostMode::Clip => "clip",
        CostMode::Continual => "continual",
    };
    let _ = writeln!(out, "mode: {mode}   clip size: {}", report.clip_size);
    let _ = writeln!(
        out,
        "receptive field: {}   aggregate padding: {}   transient: {}   total delay: {}",
        report.summary.receptive_field,
        report.summary.aggregate_padding,
        report.summary.transient_len,
        report.summary.total_delay
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<8} {:<22} {:<12} {:>26} {:>14} {:>16} {:>6}",
        "stage", "layer", "kind", "state expression", "state", "flops", "delay"
    );
    for row in &report.rows {
        let flops = match report.mode {
            CostMode::Clip => row.macs_clip,
            CostMode::Continual => row.macs_frame,
        };
        if row.state_floats == 0 && flops == 0 {
            continue;
        }
        let _ = writeln!(
            out,
            "{:<8} {:<22} {:<12} {:>26} {:>14} {:>16} {:>6}",
            row.stage,
            row.name,
            row.kind.label(),
            if row.state_floats > 0 {
                row.state_expression.clone()
            } else {
                String::new()
            },
            if row.state_floats > 0 {
                thousands(row.state_floats)
            } else {
                "-".into()
            },
            thousands(flops),
            row.delay_frames
        );
    }
    let _ = writeln!(out);
    match report.mode {
        CostMode::Continual => {
            let _ = writeln!(
                out,
                "state total:        {:>14} floats",
                thousands(report.state_total)
            );
            let _ = writeln!(
                out,
                "largest transient:  {:>14} floats",
                thousands(report.max_transient_continual)
            );
            let _ = writeln!(
                out,
                "worst case:         {:>14} floats",
                thousands(report.worst_case_continual())
            );
            let _ = writeln!(
                out,
                "flops/frame (mac):  {:>14}",
                thousands(report.macs_frame)
            );
            let _ = writeln!(
                out,
                "flops/frame (all):  {:>14}",
                thousands(report.macs_frame + report.elementwise_frame + report.pool_ops_frame)
            );
            let _ = writeln!(
                out,
                "residual state:     {:>14.1}% of state",
                report.residual_fraction() * 100.0
            );
            let _ = writeln!(
                out,
                "pooling state:      {:>14.2}% of state",
                report.pool_fraction() * 100.0
            );
        }
        CostMode::Clip => {
            let _ = writeln!(
                out,
                "frame cache:        {:>14} floats",
                thousands(report.frame_cache_floats)
            );
            let _ = writeln!(
                out,
                "largest transient:  {:>14} floats",
                thousands(report.max_transient_clip)
            );
            let _ = writeln!(
                out,
                "worst case:         {:>14} floats",
                thousands(report.worst_case_clip())
            );
            let _ = writeln!(
                out,
                "flops/clip (mac):   {:>14}",
                thousands(report.macs_clip)
            );
            let _ = writeln!(
                out,
                "flops/clip (all):   {:>14}",
                thousands(report.macs_clip + report.elementwise_clip + report.pool_ops_clip)
            );
        }
    }
    out
}

fn render_cost_csv(report: &CostReport) -> String {
    let mut out = String::from(
        "name,stage,kind,state_floats,state_expression,transient_frame_floats,\
         transient_clip_floats,delay_frames,macs_clip,macs_frame,elementwise_clip,\
         elementwise_frame,pool_ops_clip,pool_ops_frame,temporal_out\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.stage,
            r.kind.label(),
            r.state_floats,
            r.state_expression.replace(',', ";"),
            r.transient_frame_floats,
            r.transient_clip_floats,
            r.delay_frames,
            r.macs_clip,
            r.macs_frame,
            r.elementwise_clip,
            r.elementwise_frame,
            r.pool_ops_clip,
            r.pool_ops_frame,
            r.temporal_out,
        );
    }
    out
}

fn render_cost_json(report: &CostReport) -> Result<String> {
    let rows: Vec<_> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "stage": r.stage,
                "kind": r.kind.label(),
                "state_floats": r.state_floats,
                "state_expression": r.state_expression,
                "transient_frame_floats": r.transient_frame_floats,
                "transient_clip_floats": r.transient_clip_floats,
                "delay_frames": r.delay_frames,
                "macs_clip": r.macs_clip,
                "macs_frame": r.macs_frame,
                "elementwise_clip": r.elementwise_clip,
                "elementwise_frame": r.elementwise_frame,
                "pool_ops_clip": r.pool_ops_clip,
                "pool_ops_frame": r.pool_ops_frame,
                "temporal_out": r.temporal_out,
            })
        })
        .collect();
    let value = json!({
        "mode": match report.mode { CostMode::Clip => "clip", CostMode::Continual => "continual" },
        "clip_size": report.clip_size,
        "receptive_field": report.summary.receptive_field,
        "aggregate_padding": report.summary.aggregate_padding,
        "transient_len": report.summary.transient_len,
        "total_delay": report.summary.total_delay,
        "frame_cache_floats": report.frame_cache_floats,
        "state_total_floats": report.state_total,
        "max_transient_continual": report.max_transient_continual,
        "max_transient_clip": report.max_transient_clip,
        "worst_case_continual": report.worst_case_continual(),
        "worst_case_clip": report.worst_case_clip(),
        "worst_case_floats": report.worst_case_floats(),
        "macs_clip": report.macs_clip,
        "macs_frame": report.macs_frame,
        "elementwise_clip": report.elementwise_clip,
        "elementwise_frame": report.elementwise_frame,
        "pool_ops_clip": report.pool_ops_clip,
        "pool_ops_frame": report.pool_ops_frame,
        "residual_state_fraction": report.residual_fraction(),
        "pool_state_fraction": report.pool_fraction(),
        "rows": rows,
    });
    Ok(serde_json::to_string_pretty(&value)?)
}

pub fn render_summary(summary: &ReceptiveSummary, as_json: bool) -> Result<String> {
    if as_json {
        Ok(serde_json::to_string_pretty(&json!({
            "receptive_field": summary.receptive_field,
            "aggregate_padding": summary.aggregate_padding,
            "transient_len": summary.transient_len,
            "total_delay": summary.total_delay,
        }))?)
    } else {
        Ok(format!(
            "receptive field (r_T):   {}\naggregate padding (p_T): {}\ntransient length:        {}\ntotal delay:             {}\n",
            summary.receptive_field,
            summary.aggregate_padding,
            summary.transient_len,
            summary.total_delay
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands_grouping() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(4_771_632), "4,771,632");
        assert_eq!(thousands(1_000), "1,000");
    }
}
