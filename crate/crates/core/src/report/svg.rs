//! Minimal hand-written SVG charts. The CSV files are the data contract;
//! these are for eyeballing.

use std::fmt::Write as _;

use super::{format_pct, FigurePoint};
use crate::metrics::CorrelationReport;

const W: f64 = 900.0;
const H: f64 = 360.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
}

fn y_axis(s: &mut String, max: f64, unit: &str) {
    let plot_h = H - TOP - BOTTOM;
    for i in 0..=5 {
        let v = max * f64::from(i) / 5.0;
        let y = TOP + plot_h * (1.0 - f64::from(i) / 5.0);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}{unit}</text>"##,
            W - RIGHT,
            LEFT - 4.0,
            y + 4.0
        );
    }
}

/// Grouped bars of average accuracy and F1 per serial.
pub fn averages_chart(points: &[FigurePoint]) -> String {
    let mut s = String::new();
    header(&mut s, "Average accuracy % and F1 % per feature combination");
    y_axis(&mut s, 100.0, "");
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let slot = plot_w / points.len().max(1) as f64;
    let bar = slot * 0.38;
    for (i, p) in points.iter().enumerate() {
        let x0 = LEFT + slot * i as f64 + slot * 0.12;
        for (j, (v, color)) in [(p.avg_accuracy, "#4472c4"), (p.avg_weighted_f1, "#ed7d31")].iter().enumerate() {
            if let Some(v) = v {
                let h = plot_h * v.clamp(0.0, 1.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{bar:.1}" height="{h:.1}" fill="{color}"><title>{} {}</title></rect>"#,
                    x0 + bar * j as f64,
                    TOP + plot_h - h,
                    p.serial,
                    format_pct(*v)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x0 + bar,
            H - BOTTOM + 14.0,
            p.serial
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{:.1}" width="10" height="10" fill="#4472c4"/><text x="{:.1}" y="{:.1}">Accuracy</text><rect x="{:.1}" y="{:.1}" width="10" height="10" fill="#ed7d31"/><text x="{:.1}" y="{:.1}">Weighted F1</text>"##,
        H - 14.0,
        LEFT + 14.0,
        H - 5.0,
        LEFT + 90.0,
        H - 14.0,
        LEFT + 104.0,
        H - 5.0
    );
    s.push_str("</svg>\n");
    s
}

/// Bar chart of |r| in rank order.
pub fn ranking_chart(cr: &CorrelationReport) -> String {
    let mut s = String::new();
    header(&mut s, "Feature ranking by |Pearson r| against SF");
    y_axis(&mut s, 1.0, "");
    let ranked = cr.ranked();
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let slot = plot_w / ranked.len().max(1) as f64;
    for (i, f) in ranked.iter().enumerate() {
        let h = plot_h * f.abs_r.clamp(0.0, 1.0);
        let x = LEFT + slot * i as f64 + slot * 0.2;
        let _ = writeln!(
            s,
            r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#4472c4"><title>{} r={:.4}</title></rect>"##,
            TOP + plot_h - h,
            slot * 0.6,
            f.feature.label(),
            f.r
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{} ({:.3})</text>"#,
            x + slot * 0.3,
            H - BOTTOM + 14.0,
            f.feature.label(),
            f.abs_r
        );
    }
    s.push_str("</svg>\n");
    s
}
