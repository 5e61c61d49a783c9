//! Loss-curve plot as a standalone SVG document.

use std::fmt::Write as _;

use ugaar_core::eval::DIRECTIONS;
use ugaar_core::trainer::EpochRecord;

use crate::error::{AppError, AppResult};

const WIDTH: f64 = 760.0;
const PANEL_HEIGHT: f64 = 240.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const GAP: f64 = 70.0;

const LOSS_SERIES: [(&str, &str); 3] = [("D loss", "#1f77b4"), ("G loss", "#d62728"), ("KL loss", "#2ca02c")];
const MEDR_COLORS: [&str; 6] = ["#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        let pad = if hi > lo {
            0.05 * (hi - lo)
        } else {
            0.5f64.max(0.05 * lo.abs())
        };
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Panel {
    top: f64,
    x: Axis,
    y: Axis,
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        LEFT + self.x.frac(x) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - self.y.frac(y)) * PANEL_HEIGHT
    }

    fn frame(&self, out: &mut String, title: &str, y_label: &str) {
        let w = WIDTH - LEFT - RIGHT;
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT}" y="{:.1}" width="{w:.1}" height="{PANEL_HEIGHT}" fill="none" stroke="#333"/>"##,
            self.top
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{:.1}" font-size="14">{title}</text>"#,
            self.top - 10.0
        );
        for t in 0..=4 {
            let v = self.y.lo + (self.y.hi - self.y.lo) * t as f64 / 4.0;
            let y = self.py(v);
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 3.0,
                tick(v)
            );
        }
        for t in 0..=4 {
            let v = self.x.lo + (self.x.hi - self.x.lo) * t as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.px(v),
                self.top + PANEL_HEIGHT + 14.0,
                tick(v)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="11" transform="rotate(-90 14 {:.1})" text-anchor="middle">{y_label}</text>"#,
            self.top + PANEL_HEIGHT / 2.0,
            self.top + PANEL_HEIGHT / 2.0
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, top: f64, entries: &[(String, &str)]) {
    let x = WIDTH - RIGHT + 12.0;
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = top + 12.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11">{name}</text>"#,
            y - 9.0,
            x + 14.0,
            y
        );
    }
}

/// Renders D, G and KL losses per epoch and, in a second panel, the
/// validation median rank of each direction where it was measured.
pub fn render_svg(records: &[EpochRecord]) -> AppResult<String> {
    if records.is_empty() {
        return Err(AppError::Input("history is empty; nothing to plot".into()));
    }
    let epochs = || records.iter().map(|r| r.epoch as f64);
    let losses = |r: &EpochRecord| [r.d_loss, r.g_loss, r.kl_loss];
    let loss_panel = Panel {
        top: TOP,
        x: Axis::fit(epochs()),
        y: Axis::fit(records.iter().flat_map(losses)),
    };
    let medr: Vec<(f64, &[f64])> = records
        .iter()
        .filter_map(|r| r.validation_medr.as_deref().map(|m| (r.epoch as f64, m)))
        .collect();
    let medr_panel = Panel {
        top: TOP + PANEL_HEIGHT + GAP,
        x: Axis::fit(epochs()),
        y: Axis::fit(medr.iter().flat_map(|(_, m)| m.iter().copied())),
    };
    let height = medr_panel.top + PANEL_HEIGHT + 40.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    loss_panel.frame(&mut out, "Training losses", "loss");
    for (k, (_, color)) in LOSS_SERIES.iter().enumerate() {
        let points: Vec<String> = records
            .iter()
            .map(|r| {
                format!(
                    "{:.2},{:.2}",
                    loss_panel.px(r.epoch as f64),
                    loss_panel.py(losses(r)[k])
                )
            })
            .collect();
        if points.len() == 1 {
            let (x, y) = (
                loss_panel.px(records[0].epoch as f64),
                loss_panel.py(losses(&records[0])[k]),
            );
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        } else {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
        }
    }
    let names: Vec<(String, &str)> = LOSS_SERIES.iter().map(|(n, c)| (n.to_string(), *c)).collect();
    legend(&mut out, TOP, &names);

    medr_panel.frame(&mut out, "Validation median rank", "MedR");
    for (epoch, values) in &medr {
        for (v, color) in values.iter().zip(MEDR_COLORS) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#,
                medr_panel.px(*epoch),
                medr_panel.py(*v)
            );
        }
    }
    let names: Vec<(String, &str)> = DIRECTIONS.iter().map(|d| d.label()).zip(MEDR_COLORS).collect();
    legend(&mut out, medr_panel.top, &names);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">epoch</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        height - 8.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}
