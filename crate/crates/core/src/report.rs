//! Report output: CSV, plain-text table and SVG charts.
//!
//! Floats are printed with fixed precision so that a given set of reports
//! always renders to the same bytes.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scenario::MetricsReport;

pub const CSV_COLUMNS: [&str; 22] = [
    "profile",
    "mode",
    "bi",
    "algo",
    "gamma",
    "seed",
    "file_bytes",
    "completed",
    "goodput_mbps",
    "completion_time_s",
    "link_tx_events",
    "app_sent",
    "p_sent",
    "c_rcv",
    "data_pkts",
    "rtx",
    "timeouts",
    "suppressed_at_link",
    "duplicate_data",
    "frames_dropped",
    "stale_bundles",
    "channel_utilisation",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no reports to emit")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
    Text,
}

fn row(r: &MetricsReport) -> Vec<String> {
    vec![
        r.profile.to_string(),
        r.mode.to_string(),
        r.bi.to_string(),
        r.algo.to_string(),
        format!("{:.2}", r.gamma),
        r.seed.to_string(),
        r.file_bytes.to_string(),
        r.completed.to_string(),
        format!("{:.4}", r.goodput_mbps),
        format!("{:.6}", r.completion_time_s),
        r.link_tx_events.to_string(),
        r.app_sent.to_string(),
        r.p_sent.to_string(),
        r.c_rcv.to_string(),
        r.data_pkts.to_string(),
        r.rtx.to_string(),
        r.timeouts.to_string(),
        r.suppressed_at_link.to_string(),
        r.duplicate_data.to_string(),
        r.frames_dropped.to_string(),
        r.stale_bundles.to_string(),
        format!("{:.4}", r.channel_utilisation),
    ]
}

pub fn to_csv(reports: &[MetricsReport]) -> Result<String, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.write_record(row(r))?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}

pub fn to_text_table(reports: &[MetricsReport]) -> Result<String, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    let headers = [
        "profile", "mode", "bi", "algo", "gamma", "goodput", "time_s", "tx_ev", "App_sent", "P_sent", "C_rcv",
        "Data_pkts", "RTx", "done",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.profile.to_string(),
                r.mode.to_string(),
                r.bi.to_string(),
                r.algo.to_string(),
                format!("{:.1}", r.gamma),
                format!("{:.3}", r.goodput_mbps),
                format!("{:.3}", r.completion_time_s),
                r.link_tx_events.to_string(),
                r.app_sent.to_string(),
                r.p_sent.to_string(),
                r.c_rcv.to_string(),
                r.data_pkts.to_string(),
                r.rtx.to_string(),
                if r.completed { "yes" } else { "NO" }.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..headers.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([headers[i].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}", w = *w))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&headers.map(String::from), &mut out);
    for r in &rows {
        line(r, &mut out);
    }
    Ok(out)
}

fn row_label(r: &MetricsReport) -> String {
    match r.mode {
        crate::scenario::Mode::Blend => format!("{} {} bi={} g={}", r.profile, r.algo, r.bi, r.gamma),
        m => format!("{} {} {} g={}", r.profile, r.algo, m, r.gamma),
    }
}

/// Horizontal bar chart of one metric per report.
pub fn bar_chart_svg(title: &str, unit: &str, reports: &[MetricsReport], value: impl Fn(&MetricsReport) -> f64) -> Result<String, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    let values: Vec<f64> = reports.iter().map(&value).collect();
    let max = values.iter().cloned().fold(0.0_f64, f64::max).max(1e-9);
    let (left, bar_h, gap, plot_w) = (260.0, 22.0, 8.0, 420.0);
    let height = 50.0 + reports.len() as f64 * (bar_h + gap) + 20.0;
    let width = left + plot_w + 120.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="10" y="24" font-size="15">{}</text>"#, escape(title)).unwrap();
    for (i, (r, v)) in reports.iter().zip(&values).enumerate() {
        let y = 40.0 + i as f64 * (bar_h + gap);
        let w = v / max * plot_w;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + bar_h * 0.7,
            escape(&row_label(r))
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect x="{left:.1}" y="{y:.1}" width="{w:.1}" height="{bar_h:.1}" fill="#4a7ab0"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{v:.3} {}</text>"#,
            left + w + 6.0,
            y + bar_h * 0.7,
            escape(unit)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

type Metric = fn(&MetricsReport) -> f64;

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `metrics.csv`, `metrics.txt` or the charts into `dir` and returns the paths written.
pub fn emit_report(reports: &[MetricsReport], format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let p = dir.join("metrics.csv");
            write_file(&p, &to_csv(reports)?)?;
            written.push(p);
        }
        ReportFormat::Text => {
            let p = dir.join("metrics.txt");
            write_file(&p, &to_text_table(reports)?)?;
            written.push(p);
        }
        ReportFormat::Svg => {
            let charts: [(&str, &str, &str, Metric); 3] = [
                ("goodput.svg", "Goodput", "Mbps", |r| r.goodput_mbps),
                ("tx_events.svg", "Consumer link Interest frames", "frames", |r| r.link_tx_events as f64),
                ("rtx.svg", "Retransmissions", "RTx", |r| r.rtx as f64),
            ];
            for (file, title, unit, f) in charts {
                let p = dir.join(file);
                write_file(&p, &bar_chart_svg(title, unit, reports, f)?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ProfileId;
    use crate::scenario::Mode;
    use crate::transport::CcAlgo;

    fn sample() -> MetricsReport {
        MetricsReport {
            profile: ProfileId::Ieee80211b,
            mode: Mode::Blend,
            bi: 15,
            algo: CcAlgo::Aimd,
            gamma: 4.0,
            seed: 1,
            file_bytes: 14600,
            completed: true,
            goodput_mbps: 5.123456,
            completion_time_s: 0.0228,
            link_tx_events: 2,
            app_sent: 10,
            p_sent: 10,
            c_rcv: 10,
            data_pkts: 10,
            rtx: 0,
            timeouts: 0,
            suppressed_at_link: 8,
            duplicate_data: 0,
            frames_dropped: 0,
            stale_bundles: 0,
            channel_utilisation: 0.97,
        }
    }

    #[test]
    fn csv_header_matches_schema() {
        let csv = to_csv(&[sample()]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "80211b,blend,15,aimd,4.00,1,14600,true,5.1235,0.022800,2,10,10,10,10,0,0,8,0,0,0,0.9700"
        );
        assert!(lines.next().is_none());
    }

    #[test]
    fn empty_reports_rejected() {
        assert!(matches!(to_csv(&[]), Err(ReportError::Empty)));
        assert!(matches!(to_text_table(&[]), Err(ReportError::Empty)));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], ReportFormat::Svg, dir.path()), Err(ReportError::Empty)));
    }

    #[test]
    fn writes_all_formats() {
        let dir = tempfile::tempdir().unwrap();
        for f in [ReportFormat::Csv, ReportFormat::Text, ReportFormat::Svg] {
            for p in emit_report(&[sample(), sample()], f, dir.path()).unwrap() {
                assert!(std::fs::metadata(&p).unwrap().len() > 0);
            }
        }
        let svg = std::fs::read_to_string(dir.path().join("goodput.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        let err = emit_report(&[sample()], ReportFormat::Csv, &file.join("sub")).unwrap_err();
        assert!(matches!(err, ReportError::Io { .. }));
    }
}
