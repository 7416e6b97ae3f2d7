//! Report files: two step-by-model tables, a provenance sidecar and optional
//! SVG line plots of both tables.

use std::fmt::Write as _;
use std::path::Path;

use super::sweep::EvalReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    /// Pooled RMSLE per step.
    Pooled,
    /// Std of per-series RMSLE per step.
    Stability,
}

impl Table {
    fn values<'a>(&self, m: &'a super::sweep::ModelReport) -> (&'a [f64], f64) {
        match self {
            Table::Pooled => (&m.pooled, m.pooled_mean),
            Table::Stability => (&m.stability, m.stability_mean),
        }
    }

    fn title(&self) -> &'static str {
        match self {
            Table::Pooled => "Pooled RMSLE by prediction step",
            Table::Stability => "Std of per-series RMSLE by prediction step",
        }
    }
}

/// `step,<model>...` rows for each step, then a `mean` row.
pub fn table_csv(report: &EvalReport, table: Table) -> String {
    let mut out = String::from("step");
    for m in &report.models {
        out.push(',');
        out.push_str(&m.name);
    }
    out.push('\n');
    for (k, step) in report.steps.iter().enumerate() {
        write!(out, "{step}").unwrap();
        for m in &report.models {
            write!(out, ",{}", table.values(m).0[k]).unwrap();
        }
        out.push('\n');
    }
    out.push_str("mean");
    for m in &report.models {
        write!(out, ",{}", table.values(m).1).unwrap();
    }
    out.push('\n');
    out
}

/// `series_id,model,step,rmsle` for every series, model and step.
pub fn per_series_csv(report: &EvalReport) -> String {
    let mut out = String::from("series_id,model,step,rmsle\n");
    for m in &report.models {
        for (id, row) in report.series_ids.iter().zip(&m.per_series) {
            for (step, v) in report.steps.iter().zip(row) {
                writeln!(out, "{id},{},{step},{v}", m.name).unwrap();
            }
        }
    }
    out
}

pub fn provenance_json(report: &EvalReport) -> String {
    let mut value = serde_json::Map::new();
    value.insert(
        "provenance".into(),
        serde_json::to_value(&report.provenance).expect("serializable"),
    );
    value.insert(
        "failures".into(),
        serde_json::to_value(&report.failures).expect("serializable"),
    );
    let mut s = serde_json::to_string_pretty(&value).expect("serializable");
    s.push('\n');
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Line plot of one table: x = step, one polyline per model.
pub fn table_svg(report: &EvalReport, table: Table) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (60.0, 170.0, 40.0, 50.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;

    let all: Vec<f64> = report
        .models
        .iter()
        .flat_map(|m| table.values(m).0.iter().copied())
        .collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let first = *report.steps.first().unwrap_or(&0) as f64;
    let last = *report.steps.last().unwrap_or(&1) as f64;
    let span = (last - first).max(1.0);
    let x = |s: f64| left + (s - first) / span * plot_w;
    let y = |v: f64| top + (1.0 - (v - lo) / (hi - lo)) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        table.title()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        top + plot_h,
        left + plot_w
    )
    .unwrap();
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.4}</text>"#,
            left - 6.0,
            y(v) + 4.0
        )
        .unwrap();
    }
    for &s in &report.steps {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{s}</text>"#,
            x(s as f64),
            top + plot_h + 18.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">step</text>"#,
        left + plot_w / 2.0,
        h - 10.0
    )
    .unwrap();
    for (k, m) in report.models.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = report
            .steps
            .iter()
            .zip(table.values(m).0)
            .map(|(s, v)| format!("{:.2},{:.2}", x(*s as f64), y(*v)))
            .collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = top + 16.0 * k as f64;
        writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            left + plot_w + 12.0,
            left + plot_w + 32.0,
            left + plot_w + 38.0,
            ly + 4.0,
            m.name
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// File names written by [`write_report`] inside its output directory.
pub const POOLED_CSV: &str = "rmsle_by_step.csv";
pub const STABILITY_CSV: &str = "stability_by_step.csv";
pub const PER_SERIES_CSV: &str = "rmsle_per_series.csv";
pub const PROVENANCE_JSON: &str = "provenance.json";
pub const POOLED_SVG: &str = "rmsle_by_step.svg";
pub const STABILITY_SVG: &str = "stability_by_step.svg";

pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>, plots: bool) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(POOLED_CSV), &table_csv(report, Table::Pooled))?;
    write(
        &dir.join(STABILITY_CSV),
        &table_csv(report, Table::Stability),
    )?;
    write(&dir.join(PER_SERIES_CSV), &per_series_csv(report))?;
    write(&dir.join(PROVENANCE_JSON), &provenance_json(report))?;
    if plots {
        write(&dir.join(POOLED_SVG), &table_svg(report, Table::Pooled))?;
        write(
            &dir.join(STABILITY_SVG),
            &table_svg(report, Table::Stability),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::sweep::ModelReport;
    use std::collections::BTreeMap;

    fn report() -> EvalReport {
        let model = |name: &str, base: f64| ModelReport {
            name: name.into(),
            pooled: vec![base, base + 0.5],
            pooled_mean: base + 0.25,
            stability: vec![0.1, 0.2],
            stability_mean: 0.15000000000000002,
            per_series: vec![vec![base, base], vec![base, base + 1.0]],
        };
        EvalReport {
            steps: vec![15, 16],
            series_ids: vec!["a".into(), "b".into()],
            models: vec![model("deepar", 1.0), model("lma_deepar", 0.5)],
            failures: vec![],
            provenance: BTreeMap::from([("seed".to_string(), serde_json::json!(3))]),
        }
    }

    #[test]
    fn table_layout() {
        let csv = table_csv(&report(), Table::Pooled);
        assert_eq!(
            csv,
            "step,deepar,lma_deepar\n15,1,0.5\n16,1.5,1\nmean,1.25,0.75\n"
        );
        let csv = table_csv(&report(), Table::Stability);
        assert!(csv.ends_with("mean,0.15000000000000002,0.15000000000000002\n"));
    }

    #[test]
    fn per_series_rows() {
        let csv = per_series_csv(&report());
        assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
        assert!(csv.contains("b,deepar,16,2\n"));
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        write_report(&report(), dir.path(), true).unwrap();
        for f in [
            POOLED_CSV,
            STABILITY_CSV,
            PER_SERIES_CSV,
            PROVENANCE_JSON,
            POOLED_SVG,
            STABILITY_SVG,
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let svg = std::fs::read_to_string(dir.path().join(POOLED_SVG)).unwrap();
        assert!(svg.starts_with("<svg") && svg.matches("<polyline").count() == 2);
        let prov = std::fs::read_to_string(dir.path().join(PROVENANCE_JSON)).unwrap();
        assert!(prov.contains("\"seed\": 3"));
    }
}
