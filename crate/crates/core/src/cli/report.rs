//! Text and SVG renderings of probe results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::pretrain::ProbeRecord;
use crate::probe::{Metric, ScoreTable, TaskGroup, TaskSpec};
use crate::synthgen::Provenance;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

fn group_title(g: TaskGroup) -> &'static str {
    match g {
        TaskGroup::Demographics => "Demographics",
        TaskGroup::Risk => "Risk",
        TaskGroup::Banking => "Banking",
        TaskGroup::Geolocation => "Geolocation",
    }
}

/// One markdown table per task group with normalized scores, methods as rows.
pub fn render_tables(table: &ScoreTable, tasks: &[TaskSpec], prov: &Provenance) -> String {
    let mut s = format!("<!-- config_hash={} seed={} -->\n", prov.config_hash, prov.seed);
    let methods = table.methods();
    for group in [TaskGroup::Demographics, TaskGroup::Risk, TaskGroup::Banking, TaskGroup::Geolocation] {
        let cols: Vec<(&str, Metric)> = tasks
            .iter()
            .filter(|t| t.group == group)
            .flat_map(|t| t.metrics.iter().map(move |m| (t.id(), *m)))
            .collect();
        let _ = writeln!(s, "\n## {} (normalized)\n", group_title(group));
        s.push_str("| method |");
        for (t, _) in &cols {
            let _ = write!(s, " {t} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---|".repeat(cols.len()));
        s.push_str("\n| |");
        for (_, m) in &cols {
            let _ = write!(s, " {} |", m.short());
        }
        s.push('\n');
        for method in &methods {
            let _ = write!(s, "| {method} |");
            for (t, m) in &cols {
                match table.get(method, t, *m) {
                    Some(e) => {
                        let _ = write!(s, " {:.2} |", e.normalized);
                    }
                    None => s.push_str(" - |"),
                }
            }
            s.push('\n');
        }
    }
    s
}

pub fn rank_csv(hist: &BTreeMap<String, Vec<usize>>, prov: &Provenance) -> String {
    let mut s = format!("# config_hash={} seed={}\nmethod,rank,count\n", prov.config_hash, prov.seed);
    for (m, h) in hist {
        for (r, c) in h.iter().enumerate() {
            let _ = writeln!(s, "{m},{},{c}", r + 1);
        }
    }
    s
}

fn svg_open(w: f64, h: f64, prov: &Provenance) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <!-- config_hash={} seed={} -->\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
        prov.config_hash, prov.seed
    )
}

/// Grouped bars: one group per method, one bar per rank position.
pub fn rank_histogram_svg(hist: &BTreeMap<String, Vec<usize>>, prov: &Provenance) -> String {
    let n_ranks = hist.values().map(Vec::len).max().unwrap_or(0).max(1);
    let max_count = hist.values().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let (left, top, plot_h, bar_w, gap) = (50.0, 30.0, 220.0, 16.0, 24.0);
    let group_w = n_ranks as f64 * bar_w + gap;
    let width = left + hist.len() as f64 * group_w + 120.0;
    let height = top + plot_h + 50.0;
    let mut s = svg_open(width, height, prov);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"18\">rank distribution over (task, metric) pairs</text>");
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h,
        width - 110.0,
        top + plot_h
    );
    let _ = writeln!(s, "<text x=\"5\" y=\"{}\">{}</text>", top + 10.0, max_count as usize);
    for (gi, (method, counts)) in hist.iter().enumerate() {
        let x0 = left + gi as f64 * group_w + gap / 2.0;
        for (r, &c) in counts.iter().enumerate() {
            let h = plot_h * c as f64 / max_count;
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{bar_w}\" height=\"{h:.1}\" fill=\"{}\"><title>{method} rank {}: {c}</title></rect>",
                x0 + r as f64 * bar_w,
                top + plot_h - h,
                PALETTE[r % PALETTE.len()],
                r + 1
            );
        }
        let _ = writeln!(s, "<text x=\"{x0:.1}\" y=\"{}\">{method}</text>", top + plot_h + 18.0);
    }
    for r in 0..n_ranks {
        let y = top + 14.0 * r as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{y}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">rank {}</text>",
            width - 100.0,
            PALETTE[r % PALETTE.len()],
            width - 85.0,
            y + 9.0,
            r + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Probe score against step, one polyline per (variant, task, metric).
/// Scores are min-max normalized per (task, metric) across all variants.
pub fn learning_curve_svg(curves: &[(String, Vec<ProbeRecord>)], prov: &Provenance) -> String {
    let mut ranges: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    let mut max_step = 1u64;
    for (_, recs) in curves {
        for r in recs {
            let e = ranges.entry((r.task.clone(), r.metric.clone())).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(r.score);
            e.1 = e.1.max(r.score);
            max_step = max_step.max(r.step);
        }
    }
    let (left, top, plot_w, plot_h) = (50.0, 30.0, 480.0, 260.0);
    let width = left + plot_w + 220.0;
    let height = top + plot_h + 50.0;
    let mut s = svg_open(width, height, prov);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"18\">probe score during pretraining (normalized)</text>");
    let _ = writeln!(
        s,
        "<polyline points=\"{left},{top} {left},{b} {r},{b}\" fill=\"none\" stroke=\"black\"/>",
        b = top + plot_h,
        r = left + plot_w
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">step {max_step}</text>", left + plot_w - 60.0, top + plot_h + 18.0);
    let mut series = 0usize;
    for (variant, recs) in curves {
        let mut by_key: BTreeMap<(String, String), Vec<&ProbeRecord>> = BTreeMap::new();
        for r in recs {
            by_key.entry((r.task.clone(), r.metric.clone())).or_default().push(r);
        }
        for (key, mut pts) in by_key {
            pts.sort_by_key(|r| r.step);
            let (lo, hi) = ranges[&key];
            let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
            let points: Vec<String> = pts
                .iter()
                .map(|r| {
                    format!(
                        "{:.1},{:.1}",
                        left + plot_w * r.step as f64 / max_step as f64,
                        top + plot_h * (1.0 - norm(r.score))
                    )
                })
                .collect();
            let color = PALETTE[series % PALETTE.len()];
            let dash = if variant == "distilbert" { " stroke-dasharray=\"5,3\"" } else { "" };
            let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\"{dash}/>", points.join(" "));
            let y = top + 16.0 * series as f64;
            let _ = writeln!(
                s,
                "<line x1=\"{x}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\"{dash}/><text x=\"{tx}\" y=\"{ty}\">{variant} {} ({})</text>",
                key.0,
                key.1,
                x = left + plot_w + 10.0,
                x2 = left + plot_w + 30.0,
                tx = left + plot_w + 35.0,
                ty = y + 4.0
            );
            series += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}
