//! Standalone SVG 1.1 figures. Output depends only on the inputs.

use std::fmt::Write as _;

use multirep_core::stats::RankingReport;

use crate::report::TradeoffPoint;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
        escape(body)
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, extra: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="black" {extra}/>"#
    );
}

/// Critical-difference diagram: rank axis over `[1, k]`, one labelled
/// marker per model, and a bar under every clique.
pub fn cd_diagram(report: &RankingReport, title: &str) -> String {
    let k = report.models.len();
    let order = report.order();
    let (left, right, width) = (140.0, 460.0, 600.0);
    let axis_y = 70.0;
    let span = (k.max(2) - 1) as f64;
    let x = |rank: f64| left + (rank - 1.0) / span * (right - left);
    let bars_top = axis_y + 14.0;
    let labels_top = bars_top + 10.0 * report.cliques.len() as f64 + 16.0;
    let half = k.div_ceil(2);
    let rows = half.max(k - half);
    let height = labels_top + 18.0 * rows as f64 + 20.0;

    let mut out = String::new();
    open(&mut out, width, height);
    text(&mut out, width / 2.0, 18.0, "middle", title);

    // CD bracket from rank 1
    let cd_end = x(1.0 + report.cd.min(span));
    line(&mut out, x(1.0), 36.0, cd_end, 36.0, r#"stroke-width="2""#);
    line(&mut out, x(1.0), 32.0, x(1.0), 40.0, "");
    line(&mut out, cd_end, 32.0, cd_end, 40.0, "");
    text(&mut out, (x(1.0) + cd_end) / 2.0, 30.0, "middle", &format!("CD = {:.4}", report.cd));

    line(&mut out, x(1.0), axis_y, x(k as f64), axis_y, r#"stroke-width="1.5""#);
    for r in 1..=k {
        let xr = x(r as f64);
        line(&mut out, xr, axis_y - 6.0, xr, axis_y, "");
        text(&mut out, xr, axis_y - 9.0, "middle", &r.to_string());
    }

    for (j, clique) in report.cliques.iter().enumerate() {
        let lo = clique.iter().map(|&i| report.average_ranks[i]).fold(f64::INFINITY, f64::min);
        let hi = clique.iter().map(|&i| report.average_ranks[i]).fold(f64::NEG_INFINITY, f64::max);
        let y = bars_top + 10.0 * j as f64;
        line(&mut out, x(lo) - 4.0, y, x(hi) + 4.0, y, r#"stroke-width="4" stroke-linecap="round""#);
    }

    for (pos, &i) in order.iter().enumerate() {
        let rank = report.average_ranks[i];
        let xr = x(rank);
        let (row, to_left) = if pos < half { (pos, true) } else { (k - 1 - pos, false) };
        let y = labels_top + 18.0 * row as f64;
        let _ = writeln!(out, r#"<circle cx="{xr:.2}" cy="{axis_y:.2}" r="3" fill="black"/>"#);
        let edge = if to_left { left - 10.0 } else { right + 10.0 };
        let _ = writeln!(
            out,
            r#"<polyline points="{xr:.2},{axis_y:.2} {xr:.2},{y:.2} {edge:.2},{y:.2}" fill="none" stroke="black"/>"#
        );
        let label = format!("{} ({rank:.3})", report.models[i]);
        if to_left {
            text(&mut out, edge - 4.0, y + 4.0, "end", &label);
        } else {
            text(&mut out, edge + 4.0, y + 4.0, "start", &label);
        }
    }
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    lo_x: f64,
    hi_x: f64,
    lo_y: f64,
    hi_y: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: &[f64], width: f64, height: f64) -> Self {
        let range = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = if hi > lo { (hi - lo) * 0.1 } else { lo.abs().max(1.0) * 0.1 };
            (lo - pad, hi + pad)
        };
        let (lo_x, hi_x) = range(xs);
        let (lo_y, hi_y) = range(ys);
        Self {
            x0: 70.0,
            x1: width - 30.0,
            y0: height - 50.0,
            y1: 40.0,
            lo_x,
            hi_x,
            lo_y,
            hi_y,
        }
    }

    fn px(&self, v: f64) -> f64 {
        self.x0 + (v - self.lo_x) / (self.hi_x - self.lo_x) * (self.x1 - self.x0)
    }

    fn py(&self, v: f64) -> f64 {
        self.y0 + (v - self.lo_y) / (self.hi_y - self.lo_y) * (self.y1 - self.y0)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        line(out, self.x0, self.y0, self.x1, self.y0, "");
        line(out, self.x0, self.y0, self.x0, self.y1, "");
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let vx = self.lo_x + f * (self.hi_x - self.lo_x);
            let vy = self.lo_y + f * (self.hi_y - self.lo_y);
            let (px, py) = (self.px(vx), self.py(vy));
            line(out, px, self.y0, px, self.y0 + 5.0, "");
            text(out, px, self.y0 + 18.0, "middle", &format!("{vx:.3}"));
            line(out, self.x0 - 5.0, py, self.x0, py, "");
            text(out, self.x0 - 8.0, py + 4.0, "end", &format!("{vy:.3}"));
        }
        text(out, (self.x0 + self.x1) / 2.0, self.y0 + 38.0, "middle", x_label);
        let cy = (self.y0 + self.y1) / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="16" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 16 {cy:.2})">{}</text>"#,
            escape(y_label)
        );
    }
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// Cost / score scatter: marker size encodes AUC, colour encodes NLL
/// (blue low, red high), dashed line through the frontier.
pub fn pareto_plot(points: &[TradeoffPoint], on_frontier: &[usize], cost_label: &str, score_label: &str) -> String {
    let (width, height) = (640.0, 420.0);
    let xs: Vec<f64> = points.iter().map(|p| p.cost).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.score).collect();
    let frame = Frame::new(&xs, &ys, width, height);
    let aucs: Vec<f64> = points.iter().filter_map(|p| p.auc).collect();
    let (auc_lo, auc_hi) = (
        aucs.iter().copied().fold(f64::INFINITY, f64::min),
        aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let nll_lo = points.iter().map(|p| p.nll).fold(f64::INFINITY, f64::min);
    let nll_hi = points.iter().map(|p| p.nll).fold(f64::NEG_INFINITY, f64::max);

    let mut out = String::new();
    open(&mut out, width, height);
    text(&mut out, width / 2.0, 20.0, "middle", &format!("{score_label} vs {cost_label}"));
    frame.axes(&mut out, cost_label, score_label);

    let path: Vec<String> = on_frontier
        .iter()
        .map(|&i| format!("{:.2},{:.2}", frame.px(points[i].cost), frame.py(points[i].score)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="gray" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
        path.join(" ")
    );
    for p in points {
        let r = 5.0 + 10.0 * p.auc.map_or(0.0, |a| scale(a, auc_lo, auc_hi));
        let t = scale(p.nll, nll_lo, nll_hi);
        let (red, blue) = ((40.0 + 200.0 * t).round(), (240.0 - 200.0 * t).round());
        let (cx, cy) = (frame.px(p.cost), frame.py(p.score));
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="rgb({red},60,{blue})" fill-opacity="0.8" stroke="black"/>"#
        );
        text(&mut out, cx + r + 4.0, cy - 4.0, "start", &p.model);
    }
    out.push_str("</svg>\n");
    out
}

/// Accuracy against NLL, one labelled point per model.
pub fn calibration_plot(points: &[TradeoffPoint]) -> String {
    let (width, height) = (640.0, 420.0);
    let xs: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.nll).collect();
    let frame = Frame::new(&xs, &ys, width, height);
    let mut out = String::new();
    open(&mut out, width, height);
    text(&mut out, width / 2.0, 20.0, "middle", "accuracy vs NLL");
    frame.axes(&mut out, "accuracy", "nll");
    for p in points {
        let (cx, cy) = (frame.px(p.accuracy), frame.py(p.nll));
        let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="steelblue" stroke="black"/>"#);
        text(&mut out, cx + 9.0, cy - 4.0, "start", &p.model);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(ranks: Vec<f64>, cliques: Vec<Vec<usize>>) -> RankingReport {
        let k = ranks.len();
        RankingReport {
            models: (0..k).map(|i| format!("m<{i}>")).collect(),
            n_datasets: 5,
            higher_is_better: true,
            average_ranks: ranks,
            chi2: 1.0,
            p_value: 0.5,
            iman_davenport: None,
            alpha: 0.05,
            cd: 0.6,
            cliques,
        }
    }

    #[test]
    fn cd_bars_follow_cliques() {
        let none = cd_diagram(&report(vec![1.0, 2.0, 3.0], vec![]), "t");
        assert_eq!(none.matches("stroke-width=\"4\"").count(), 0);
        let two = cd_diagram(&report(vec![1.5, 1.8, 3.1, 3.6], vec![vec![0, 1], vec![2, 3]]), "t");
        assert_eq!(two.matches("stroke-width=\"4\"").count(), 2);
        assert!(two.contains("m&lt;0&gt;"));
        assert_eq!(two, cd_diagram(&report(vec![1.5, 1.8, 3.1, 3.6], vec![vec![0, 1], vec![2, 3]]), "t"));
    }

    #[test]
    fn pareto_single_point() {
        let p = vec![TradeoffPoint {
            model: "a".into(),
            cost: 1.0,
            score: 0.9,
            auc: None,
            nll: 0.3,
            accuracy: 0.9,
        }];
        let s = pareto_plot(&p, &[0], "train_s", "acc");
        assert!(s.contains("stroke-dasharray"));
        assert!(s.ends_with("</svg>\n"));
        assert!(calibration_plot(&p).contains(">a</text>"));
    }
}
