use std::fmt::Write as _;

use crate::continuation::{BifFlag, BranchRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#000000", "#c0392b", "#1f77b4", "#2ca02c"];

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Deterministic SVG of one or more branches: active parameter against the
/// L² norm, with circles at BP rows and squares at FP rows.
pub fn branch_svg(branches: &[&[BranchRecord]]) -> String {
    let all = || branches.iter().flat_map(|b| b.iter());
    let (x0, x1) = range(all().map(|r| r.param_value));
    let (y0, y1) = range(all().map(|r| r.l2_norm));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let xname = all().next().map_or("parameter".to_string(), |r| r.param_name.clone());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g id="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let (px, py) = (sx(fx), sy(fy));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{fx:.4}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{fy:.4}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xname}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">L2 norm</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (bi, branch) in branches.iter().enumerate() {
        let color = COLORS[bi % COLORS.len()];
        if branch.len() >= 2 {
            let pts: Vec<String> = branch.iter().map(|r| format!("{:.2},{:.2}", sx(r.param_value), sy(r.l2_norm))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        for r in branch.iter() {
            let (px, py) = (sx(r.param_value), sy(r.l2_norm));
            match r.flag {
                BifFlag::Bp => {
                    let _ = writeln!(s, r##"<circle class="bp" cx="{px:.2}" cy="{py:.2}" r="4" fill="none" stroke="#d62728" stroke-width="1.5"/>"##);
                }
                BifFlag::Fp => {
                    let _ = writeln!(
                        s,
                        r##"<rect class="fp" x="{:.2}" y="{:.2}" width="7" height="7" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
                        px - 3.5,
                        py - 3.5
                    );
                }
                _ => {}
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
