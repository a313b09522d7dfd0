//! Minimal hand-written SVG charts. Coordinates are printed with two decimals
//! so output is byte-stable.

use std::fmt::Write as _;

use ecgstress_core::dsp::{bands, PsdEstimate};
use ecgstress_eval::ConfusionMatrix;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps data coordinates into a pixel rectangle; y grows upward in data space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    pub fn x(&self, v: f64) -> f64 {
        self.left + (v - self.x_min) / (self.x_max - self.x_min) * self.width
    }

    pub fn y(&self, v: f64) -> f64 {
        self.top + self.height - (v - self.y_min) / (self.y_max - self.y_min) * self.height
    }
}

struct Doc {
    out: String,
}

impl Doc {
    fn new(w: f64, h: f64) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
        Doc { out }
    }

    fn rect(&mut self, attrs: &str, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect {attrs}x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="black"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// One PSD curve of a [`psd_plot`].
pub struct PsdSeries<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub psd: &'a PsdEstimate,
}

/// Upper frequency shown on PSD plots, Hz.
pub const PSD_PLOT_MAX_HZ: f64 = 0.5;

/// Overlays tachogram PSDs with the LF band shaded gray and the HF band
/// shaded yellow. Returns the document and its axis frame.
pub fn psd_plot(series: &[PsdSeries<'_>]) -> (String, Frame) {
    let y_max = series
        .iter()
        .flat_map(|s| s.psd.freqs.iter().zip(&s.psd.power))
        .filter(|(f, _)| **f <= PSD_PLOT_MAX_HZ)
        .map(|(_, p)| *p)
        .fold(0.0, f64::max);
    let frame = Frame {
        left: 70.0,
        top: 30.0,
        width: 560.0,
        height: 320.0,
        x_min: 0.0,
        x_max: PSD_PLOT_MAX_HZ,
        y_min: 0.0,
        y_max: if y_max > 0.0 { y_max * 1.05 } else { 1.0 },
    };
    let mut doc = Doc::new(680.0, 420.0);
    for (id, (lo, hi), fill) in [("band-lf", bands::LF, "#b0b0b0"), ("band-hf", bands::HF, "#ffe34d")] {
        let (x0, x1) = (frame.x(lo), frame.x(hi));
        doc.rect(
            &format!(r#"id="{id}" fill-opacity="0.5" "#),
            x0,
            frame.top,
            x1 - x0,
            frame.height,
            fill,
        );
    }
    for s in series {
        let mut d = String::new();
        for (i, (f, p)) in s
            .psd
            .freqs
            .iter()
            .zip(&s.psd.power)
            .filter(|(f, _)| **f <= PSD_PLOT_MAX_HZ)
            .enumerate()
        {
            let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, frame.x(*f), frame.y(*p));
        }
        let _ = writeln!(
            doc.out,
            r#"<path class="psd" d="{}" fill="none" stroke="{}" stroke-width="1.5"><title>{}</title></path>"#,
            d.trim_end(),
            s.color,
            esc(s.name)
        );
    }
    let (x0, y0) = (frame.left, frame.top + frame.height);
    doc.line(x0, y0, x0 + frame.width, y0);
    doc.line(x0, frame.top, x0, y0);
    for k in 0..=5 {
        let f = k as f64 * 0.1;
        doc.line(frame.x(f), y0, frame.x(f), y0 + 5.0);
        doc.text(frame.x(f), y0 + 18.0, "middle", &format!("{f:.1}"));
    }
    doc.text(frame.left + frame.width / 2.0, y0 + 36.0, "middle", "Frequency (Hz)");
    doc.text(frame.left - 10.0, frame.top + 4.0, "end", &format!("{:.3e}", frame.y_max));
    doc.text(frame.left - 10.0, y0, "end", "0");
    doc.text(20.0, frame.top + frame.height / 2.0, "middle", "PSD (s²/Hz)");
    for (i, s) in series.iter().enumerate() {
        let y = frame.top + 14.0 + 16.0 * i as f64;
        let x = frame.left + frame.width - 150.0;
        doc.rect("", x, y - 8.0, 12.0, 4.0, s.color);
        doc.text(x + 18.0, y, "start", s.name);
    }
    (doc.finish(), frame)
}

/// Vertical bars of test accuracy per classifier.
pub fn accuracy_chart(rows: &[(&str, f64)]) -> String {
    let n = rows.len().max(1) as f64;
    let frame = Frame {
        left: 60.0,
        top: 30.0,
        width: 64.0 * n,
        height: 300.0,
        x_min: 0.0,
        x_max: n,
        y_min: 0.0,
        y_max: 1.0,
    };
    let mut doc = Doc::new(frame.width + 100.0, 400.0);
    let base = frame.top + frame.height;
    for (i, (name, acc)) in rows.iter().enumerate() {
        let x = frame.x(i as f64 + 0.15);
        let w = frame.x(i as f64 + 0.85) - x;
        let y = frame.y(*acc);
        doc.rect(r#"class="bar" "#, x, y, w, base - y, "#4a78b5");
        doc.text(x + w / 2.0, y - 4.0, "middle", &format!("{acc:.3}"));
        doc.text(x + w / 2.0, base + 16.0, "middle", name);
    }
    doc.line(frame.left, base, frame.left + frame.width, base);
    doc.line(frame.left, frame.top, frame.left, base);
    for k in 0..=4 {
        let v = k as f64 * 0.25;
        doc.text(frame.left - 6.0, frame.y(v) + 4.0, "end", &format!("{v:.2}"));
    }
    doc.text(frame.left + frame.width / 2.0, base + 40.0, "middle", "Test accuracy");
    doc.finish()
}

/// 2×2 confusion matrix: rows are true classes, columns predictions,
/// stressed first.
pub fn confusion_chart(title: &str, cm: &ConfusionMatrix) -> String {
    let cells = [[cm.tp, cm.fn_], [cm.fp, cm.tn]];
    let max = cells.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let (left, top, size) = (130.0, 50.0, 110.0);
    let mut doc = Doc::new(400.0, 340.0);
    doc.text(left + size, 24.0, "middle", title);
    let names = ["Stressed", "Non-stressed"];
    for (r, row) in cells.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            let shade = 255 - (count as f64 / max * 180.0).round() as u8;
            let fill = format!("rgb({shade},{shade},255)");
            let (x, y) = (left + c as f64 * size, top + r as f64 * size);
            doc.rect(r#"class="cell" stroke="black" "#, x, y, size, size, &fill);
            doc.text(x + size / 2.0, y + size / 2.0 + 5.0, "middle", &count.to_string());
        }
        doc.text(left - 8.0, top + r as f64 * size + size / 2.0 + 4.0, "end", names[r]);
        doc.text(left + r as f64 * size + size / 2.0, top + 2.0 * size + 18.0, "middle", names[r]);
    }
    doc.text(left + size, top + 2.0 * size + 40.0, "middle", "Predicted");
    doc.text(30.0, top + size, "middle", "True");
    doc.finish()
}
