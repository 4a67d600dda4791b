//! Figure data: the `u` histogram by group and the per-group top effects,
//! as CSV, plus optional static SVG renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hazlingam_core::grouping::{Group, GroupAssignment};
use hazlingam_core::lingam::CausalModel;

use crate::error::BoxError;

pub const HISTOGRAM_BINS: usize = 20;

/// Feature name, effect and optional CI.
pub type EffectRow = (String, f64, Option<(f64, f64)>);

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub group: Group,
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Shared equal-width bins over all `u` values, counted per group.
pub fn u_histogram(assignments: &[GroupAssignment], bins: usize) -> Vec<HistogramBin> {
    if assignments.is_empty() || bins == 0 {
        return Vec::new();
    }
    let (lo, hi) =
        assignments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a.u_mean), hi.max(a.u_mean)));
    let bins = if hi > lo { bins } else { 1 };
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out = Vec::new();
    for group in [Group::Positive, Group::Negative] {
        let mut counts = vec![0usize; bins];
        for a in assignments.iter().filter(|a| a.group == group) {
            let k = (((a.u_mean - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        for (k, count) in counts.into_iter().enumerate() {
            let low = lo + k as f64 * width;
            let high = if k + 1 == bins && hi > lo { hi } else { low + width };
            out.push(HistogramBin { group, low, high, count });
        }
    }
    out
}

pub fn write_figures(
    dir: &Path,
    assignments: &[GroupAssignment],
    models: &[(Group, CausalModel)],
    top_k: usize,
    svg: bool,
) -> Result<(), BoxError> {
    fs::create_dir_all(dir)?;
    let hist = u_histogram(assignments, HISTOGRAM_BINS);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "bin_low", "bin_high", "count"])?;
    for b in &hist {
        w.write_record([b.group.label().to_string(), b.low.to_string(), b.high.to_string(), b.count.to_string()])?;
    }
    fs::write(dir.join("u_histogram.csv"), w.into_inner()?)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "group",
        "rank",
        "feature",
        "effect",
        "ci_low",
        "ci_high",
        "effect_raw",
        "ci_low_raw",
        "ci_high_raw",
    ])?;
    for (group, m) in models {
        for (rank, e) in m.effects_to_target().iter().take(top_k).enumerate() {
            w.write_record([
                group.label().to_string(),
                (rank + 1).to_string(),
                e.feature.clone(),
                e.effect.to_string(),
                opt(e.ci_low),
                opt(e.ci_high),
                e.effect_raw.to_string(),
                opt(e.ci_low_raw),
                opt(e.ci_high_raw),
            ])?;
        }
    }
    fs::write(dir.join("top_effects.csv"), w.into_inner()?)?;

    if svg {
        fs::write(dir.join("u_histogram.svg"), histogram_svg(&hist))?;
        for (group, m) in models {
            let rows: Vec<EffectRow> = m
                .effects_to_target()
                .into_iter()
                .take(top_k)
                .map(|e| (e.feature, e.effect, e.ci_low.zip(e.ci_high)))
                .collect();
            fs::write(dir.join(format!("top_effects_{}.svg", group.label())), dot_plot_svg(*group, &rows))?;
        }
    }
    Ok(())
}

fn colour(g: Group) -> &'static str {
    match g {
        Group::Positive => "#c0392b",
        Group::Negative => "#2471a3",
    }
}

/// Overlaid bars, one colour per group.
pub fn histogram_svg(bins: &[HistogramBin]) -> String {
    let (w, h, pad) = (640.0, 360.0, 40.0);
    let max = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let lo = bins.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
    let hi = bins.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |v: f64| pad + (v - lo) / span * (w - 2.0 * pad);
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(s, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    for b in bins.iter().filter(|b| b.count > 0) {
        let bh = b.count as f64 / max * (h - 2.0 * pad);
        let _ = write!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.6"/>"#,
            x(b.low),
            h - pad - bh,
            (x(b.high) - x(b.low)).max(1.0),
            bh,
            colour(b.group)
        );
    }
    let _ = write!(s, r#"<text x="{pad}" y="{}">{lo:.3}</text>"#, h - pad + 15.0);
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#, w - pad, h - pad + 15.0);
    let _ = write!(s, r#"<text x="{pad}" y="20">u by group: positive (red), negative (blue)</text>"#);
    s.push_str("</svg>\n");
    s
}

/// Point estimates with CI whiskers, one row per feature.
pub fn dot_plot_svg(group: Group, rows: &[EffectRow]) -> String {
    let (w, left, right, row_h, top) = (640.0, 170.0, 30.0, 24.0, 40.0);
    let h = top + row_h * rows.len() as f64 + 30.0;
    let extent = rows
        .iter()
        .flat_map(|(_, e, ci)| [Some(*e), ci.map(|c| c.0), ci.map(|c| c.1)])
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let x = |v: f64| left + (v + extent) / (2.0 * extent) * (w - left - right);
    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(s, r#"<text x="10" y="20">{} group: direct effects on u (standardized)</text>"#, group.label());
    let _ = write!(
        s,
        r#"<line x1="{0:.2}" y1="{top}" x2="{0:.2}" y2="{1}" stroke="grey" stroke-dasharray="3"/>"#,
        x(0.0),
        h - 30.0
    );
    for (k, (name, effect, ci)) in rows.iter().enumerate() {
        let y = top + row_h * (k as f64 + 0.5);
        let _ = write!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{name}</text>"#, left - 8.0, y + 4.0);
        if let Some((a, b)) = ci {
            let _ = write!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#, x(*a), x(*b));
        }
        let _ = write!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="4" fill="{}"/>"#, x(*effect), colour(group));
    }
    let _ = write!(s, r#"<text x="{left}" y="{}">{:.3}</text>"#, h - 10.0, -extent);
    let _ = write!(s, r#"<text x="{}" y="{}" text-anchor="end">{extent:.3}</text>"#, w - right, h - 10.0);
    s.push_str("</svg>\n");
    s
}
