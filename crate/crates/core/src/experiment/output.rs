//! results.csv, summary.csv, summary.json and chart.svg.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bootstrap_median, bootstrap_seed, BootstrapSummary, ExperimentError, ExperimentOutcome, TrialFailure, TrialResult};
use crate::harness::CognitiveConfig;

const RESULTS_HEADER: [&str; 9] = [
    "cell_id",
    "config",
    "policy",
    "trial",
    "seed",
    "final_score",
    "verified_turn_fraction",
    "invalid_actions",
    "transcript_path",
];
const SUMMARY_HEADER: [&str; 7] = ["cell_id", "config", "policy", "n", "median", "ci_low", "ci_high"];

/// Contents of summary.json; also the input for regenerating a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub master_seed: u64,
    pub trials_per_cell: usize,
    pub resamples: usize,
    pub confidence: f64,
    pub summaries: Vec<BootstrapSummary>,
    pub failures: Vec<TrialFailure>,
    pub warnings: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

fn write_results(path: &Path, results: &[TrialResult]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(RESULTS_HEADER).map_err(csv_err(path))?;
    for r in results {
        // scores keep full precision so a report can be regenerated exactly
        w.write_record([
            r.cell_id.clone(),
            r.config.clone(),
            r.policy.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.final_score.to_string(),
            r.verified_turn_fraction.to_string(),
            r.invalid_actions.to_string(),
            r.transcript_path.clone(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_summary_csv(path: &Path, summaries: &[BootstrapSummary]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for s in summaries {
        w.write_record([
            s.cell_id.clone(),
            s.config.clone(),
            s.policy.clone(),
            s.n.to_string(),
            format!("{:.2}", s.median),
            format!("{:.2}", s.ci_low),
            format!("{:.2}", s.ci_high),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_results(path: &Path) -> Result<Vec<TrialResult>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<Vec<TrialResult>, _>>().map_err(csv_err(path))
}

fn write_all(out_dir: &Path, summary: &SummaryFile) -> Result<(), ExperimentError> {
    let json_path = out_dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    std::fs::write(&json_path, json).map_err(io_err(&json_path))?;
    write_summary_csv(&out_dir.join("summary.csv"), &summary.summaries)?;
    let chart_path = out_dir.join("chart.svg");
    std::fs::write(&chart_path, render_chart(&summary.summaries)).map_err(io_err(&chart_path))
}

pub fn emit_outputs(
    outcome: &ExperimentOutcome,
    master_seed: u64,
    trials_per_cell: usize,
    resamples: usize,
    confidence: f64,
    out_dir: &Path,
) -> Result<SummaryFile, ExperimentError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_results(&out_dir.join("results.csv"), &outcome.results)?;
    let summary = SummaryFile {
        master_seed,
        trials_per_cell,
        resamples,
        confidence,
        summaries: outcome.summaries.clone(),
        failures: outcome.failures.clone(),
        warnings: outcome.warnings.clone(),
    };
    write_all(out_dir, &summary)?;
    Ok(summary)
}

/// Recomputes the summaries from results.csv and the bootstrap settings in
/// summary.json, then rewrites summary.csv, summary.json and chart.svg.
pub fn regenerate_report(dir: &Path) -> Result<SummaryFile, ExperimentError> {
    let results = load_results(&dir.join("results.csv"))?;
    let json_path = dir.join("summary.json");
    let text = std::fs::read_to_string(&json_path).map_err(io_err(&json_path))?;
    let mut summary: SummaryFile = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Io { path: json_path.clone(), source: std::io::Error::other(e.to_string()) })?;

    // cells in order of first appearance; cells with only failures keep their slot via the old summaries
    let mut cells: Vec<(String, String, String)> = Vec::new();
    for r in &results {
        if !cells.iter().any(|c| c.0 == r.cell_id) {
            cells.push((r.cell_id.clone(), r.config.clone(), r.policy.clone()));
        }
    }
    let mut summaries = Vec::new();
    for (cell_id, config, policy) in cells {
        let scores: Vec<f64> = results.iter().filter(|r| r.cell_id == cell_id).map(|r| r.final_score).collect();
        let est = bootstrap_median(&scores, summary.resamples, summary.confidence, bootstrap_seed(summary.master_seed, &cell_id))?;
        let failed = summary.failures.iter().filter(|f| f.cell_id == cell_id).count();
        summaries.push(BootstrapSummary {
            cell_id,
            config,
            policy,
            n: est.n,
            median: est.median,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            resamples: est.resamples,
            failed,
        });
    }
    summary.summaries = summaries;
    write_all(dir, &summary)?;
    Ok(summary)
}

fn config_color(label: &str) -> &'static str {
    match label {
        "base" => "#4c72b0",
        "tom" => "#dd8452",
        "ib" => "#55a868",
        "tom_ib" => "#c44e52",
        _ => "#8c8c8c",
    }
}

fn config_name(label: &str) -> String {
    label.parse::<CognitiveConfig>().map(|c| c.display_name().to_string()).unwrap_or_else(|_| label.to_string())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart: one group per policy, one bar per configuration, bar
/// height = median, error bars from ci_low to ci_high, on a 0..100 axis.
pub fn render_chart(summaries: &[BootstrapSummary]) -> String {
    let mut policies: Vec<&str> = Vec::new();
    let mut configs: Vec<&str> = Vec::new();
    for s in summaries {
        if !policies.contains(&s.policy.as_str()) {
            policies.push(&s.policy);
        }
        if !configs.contains(&s.config.as_str()) {
            configs.push(&s.config);
        }
    }
    configs.sort_by_key(|c| c.parse::<CognitiveConfig>().map(|c| CognitiveConfig::ALL.iter().position(|x| *x == c)).ok().flatten().unwrap_or(usize::MAX));

    let bar_w = 36.0;
    let gap = 28.0;
    let group_w = (configs.len().max(1) as f64) * bar_w;
    let left = 60.0;
    let top = 50.0;
    let plot_h = 300.0;
    let plot_w = (policies.len().max(1) as f64) * (group_w + gap) + gap;
    let legend_w = 130.0;
    let width = left + plot_w + legend_w;
    let height = top + plot_h + 60.0;
    let y = |v: f64| top + plot_h - v.clamp(0.0, 100.0) / 100.0 * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" style="font-family:sans-serif;font-size:12px">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" style="fill:#ffffff"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" style="font-size:15px;text-anchor:middle">Bootstrapped median final health (error bars: CI bounds)</text>"#,
        width / 2.0
    );
    for tick in (0..=100).step_by(20) {
        let ty = y(tick as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{left:.1}" y1="{ty:.1}" x2="{:.1}" y2="{ty:.1}" style="stroke:#dddddd;stroke-width:1"/>"#,
            left + plot_w
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" style="text-anchor:end">{tick}</text>"#, left - 6.0, ty + 4.0);
    }
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" style="text-anchor:middle">Final health</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" style="stroke:#333333;stroke-width:1"/>"#,
        y(0.0),
        left + plot_w,
        y(0.0)
    );

    for (gi, policy) in policies.iter().enumerate() {
        let gx = left + gap + gi as f64 * (group_w + gap);
        for (ci, config) in configs.iter().enumerate() {
            let Some(s) = summaries.iter().find(|s| s.policy == *policy && s.config == *config) else { continue };
            let x = gx + ci as f64 * bar_w;
            let by = y(s.median);
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{by:.1}" width="{:.1}" height="{:.1}" style="fill:{}"><title>{} {}: {:.2} [{:.2}, {:.2}], n={}</title></rect>"#,
                x + 2.0,
                bar_w - 4.0,
                y(0.0) - by,
                config_color(config),
                xml_escape(policy),
                xml_escape(&config_name(config)),
                s.median,
                s.ci_low,
                s.ci_high,
                s.n
            );
            let cx = x + bar_w / 2.0;
            let (lo, hi) = (y(s.ci_low), y(s.ci_high));
            let err = "stroke:#000000;stroke-width:1.5";
            let _ = writeln!(svg, r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{hi:.1}" style="{err}"/>"#);
            let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{lo:.1}" x2="{:.1}" y2="{lo:.1}" style="{err}"/>"#, cx - 6.0, cx + 6.0);
            let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{hi:.1}" x2="{:.1}" y2="{hi:.1}" style="{err}"/>"#, cx - 6.0, cx + 6.0);
            let _ = writeln!(
                svg,
                r#"<text x="{cx:.1}" y="{:.1}" style="font-size:10px;text-anchor:middle">{:.2}</text>"#,
                hi.min(by) - 4.0,
                s.median
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" style="text-anchor:middle">{}</text>"#,
            gx + group_w / 2.0,
            y(0.0) + 20.0,
            xml_escape(policy)
        );
    }

    let lx = left + plot_w + 16.0;
    for (i, config) in configs.iter().enumerate() {
        let ly = top + 10.0 + i as f64 * 20.0;
        let _ = writeln!(svg, r#"<rect x="{lx:.1}" y="{ly:.1}" width="12" height="12" style="fill:{}"/>"#, config_color(config));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 18.0, ly + 10.0, xml_escape(&config_name(config)));
    }
    svg.push_str("</svg>\n");
    svg
}
