//! Minimal SVG drawing: heatmaps and bar charts with integer geometry so
//! output bytes never depend on float formatting.

use std::fmt::Write;

use crate::simkit::SimilarityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
        Rgb(mix(self.0, other.0), mix(self.1, other.1), mix(self.2, other.2))
    }
}

const CELL: usize = 16;
const LABEL_W: usize = 40;
const HEADER_H: usize = 20;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Returns the document and whether the value range was degenerate.
pub fn heatmap(matrix: &SimilarityMatrix, low: Rgb, high: Rgb) -> (String, bool) {
    let rows = matrix.values.len();
    let cols = matrix.num_layers();
    let values = matrix.values.iter().flatten();
    let min = values.clone().copied().fold(f64::INFINITY, f64::min);
    let max = values.copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(max > min);
    let width = LABEL_W + cols * CELL;
    let height = HEADER_H + rows * CELL;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        s,
        "<metadata>pair={} target_group={} range={}</metadata>",
        escape(&matrix.pair_id),
        u8::from(matrix.target_label),
        if degenerate { "degenerate" } else { "min-max" }
    );
    let _ = writeln!(
        s,
        r#"<title>similarity of pair {} answers to group {}</title>"#,
        escape(&matrix.pair_id),
        u8::from(matrix.target_label)
    );
    for l in 0..cols {
        let x = LABEL_W + l * CELL + CELL / 2;
        let _ = writeln!(
            s,
            r#"<text class="layer-label" x="{x}" y="{}" font-size="8" text-anchor="middle">{}</text>"#,
            HEADER_H - 6,
            l + 1
        );
    }
    for (r, (row, vals)) in matrix.rows.iter().zip(&matrix.values).enumerate() {
        let y = HEADER_H + r * CELL;
        let _ = writeln!(
            s,
            r#"<text class="row-label" x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"#,
            LABEL_W - 6,
            y + CELL - 4,
            u8::from(row.label)
        );
        for (l, &v) in vals.iter().enumerate() {
            let t = if degenerate { 0.5 } else { (v - min) / (max - min) };
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                LABEL_W + l * CELL,
                low.lerp(high, t).hex()
            );
        }
    }
    s.push_str("</svg>\n");
    (s, degenerate)
}

/// One bar panel: `bars` are `(label, value)`; heights scale to the panel max.
pub struct Panel<'a> {
    pub title: String,
    pub bars: &'a [(String, f64)],
}

const BAR_W: usize = 12;
const PANEL_H: usize = 160;
const PANEL_GAP: usize = 40;

pub fn bar_chart(title: &str, panels: &[Panel<'_>], color: Rgb) -> String {
    let widest = panels.iter().map(|p| p.bars.len()).max().unwrap_or(0);
    let width = LABEL_W + widest.max(1) * BAR_W + 20;
    let height = panels.len() * (PANEL_H + PANEL_GAP) + HEADER_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    for (i, panel) in panels.iter().enumerate() {
        let top = HEADER_H + i * (PANEL_H + PANEL_GAP);
        let base = top + PANEL_H;
        let _ = writeln!(
            s,
            r#"<text class="panel-title" x="{LABEL_W}" y="{}" font-size="11">{}</text>"#,
            top - 4,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LABEL_W}" y1="{base}" x2="{}" y2="{base}" stroke="#000000"/>"##,
            LABEL_W + panel.bars.len() * BAR_W
        );
        let max = panel.bars.iter().map(|b| b.1.abs()).fold(0.0, f64::max);
        for (j, (label, v)) in panel.bars.iter().enumerate() {
            let h = if max > 0.0 {
                ((v.abs() / max) * (PANEL_H - 10) as f64).round() as usize
            } else {
                0
            };
            let x = LABEL_W + j * BAR_W;
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{}" y="{}" width="{}" height="{h}" fill="{}"><title>{}</title></rect>"#,
                x + 1,
                base - h,
                BAR_W - 2,
                color.hex(),
                escape(label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
