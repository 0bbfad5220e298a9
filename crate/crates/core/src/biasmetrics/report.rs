//! Flat CSV export of per-task metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{heatmap_rows, task_metric, ComponentSelector, MetricError, MetricKind};
use crate::corpus::TaskRecord;

/// One CSV line. Scalar metrics leave `bin_index` empty and have `count` 1;
/// pairwise metrics produce one row per populated similarity bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task_id: String,
    pub version: u32,
    pub metric: String,
    pub unit: String,
    pub component: String,
    pub bin_index: Option<usize>,
    pub value: f64,
    pub count: usize,
}

pub fn metric_report(
    tasks: &[&TaskRecord],
    metrics: &[MetricKind],
    sel: &ComponentSelector,
) -> Result<Vec<ReportRow>, MetricError> {
    let mut rows = Vec::new();
    for task in tasks {
        for metric in metrics {
            let base = ReportRow {
                task_id: task.task_id.clone(),
                version: task.version,
                metric: metric.name().to_string(),
                unit: metric.unit_label(),
                component: sel.to_string(),
                bin_index: None,
                value: 0.0,
                count: 1,
            };
            match metric.pairwise() {
                None => rows.push(ReportRow {
                    value: task_metric(task, *metric, sel)?.value,
                    ..base
                }),
                Some(pair) => {
                    let heat = heatmap_rows(&[*task], pair, sel)?.remove(0);
                    for (i, (mean, count)) in heat.bins.iter().zip(&heat.counts).enumerate() {
                        if let Some(mean) = mean {
                            rows.push(ReportRow {
                                bin_index: Some(i),
                                value: *mean,
                                count: *count,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    if rows.is_empty() {
        writer.write_record([
            "task_id", "version", "metric", "unit", "component", "bin_index", "value", "count",
        ])?;
    }
    writer.flush()?;
    Ok(())
}
