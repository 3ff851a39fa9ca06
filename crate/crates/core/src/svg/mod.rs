//! Minimal standalone SVG heatmap rendering.
//!
//! Figures embed the numeric value in every cell so they can be audited
//! without a colour legend; the palette is a fixed 9-step sequential ramp.

use std::io::{self, Write};

/// Light-to-dark sequential blues (9 steps).
const PALETTE: [&str; 9] = [
    "#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c",
    "#08306b",
];

const CELL: f64 = 64.0;
const MARGIN_LEFT: f64 = 110.0;
const MARGIN_TOP: f64 = 56.0;

/// Renders `values[row][col]` with row/column labels and a title.
pub fn render_heatmap<W: Write>(
    values: &[Vec<f64>],
    row_labels: &[String],
    col_labels: &[String],
    title: &str,
    out: &mut W,
) -> io::Result<()> {
    let rows = values.len();
    let cols = values.first().map_or(0, |r| r.len());
    let width = MARGIN_LEFT + cols as f64 * CELL + 20.0;
    let height = MARGIN_TOP + rows as f64 * CELL + 20.0;
    let max = values
        .iter()
        .flatten()
        .fold(0.0_f64, |a, &v| a.max(v));

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{:.0}" y="22" font-family="sans-serif" font-size="15" font-weight="bold">{}</text>"#,
        MARGIN_LEFT,
        escape(title)
    )?;
    for (c, label) in col_labels.iter().enumerate().take(cols) {
        let x = MARGIN_LEFT + (c as f64 + 0.5) * CELL;
        writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            MARGIN_TOP - 8.0,
            escape(label)
        )?;
    }
    for (r, row) in values.iter().enumerate() {
        let y = MARGIN_TOP + r as f64 * CELL;
        if let Some(label) = row_labels.get(r) {
            writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 8.0,
                y + CELL / 2.0 + 4.0,
                escape(label)
            )?;
        }
        for (c, &v) in row.iter().enumerate() {
            let x = MARGIN_LEFT + c as f64 * CELL;
            let shade = palette_step(v, max);
            writeln!(
                out,
                r##"<rect x="{x:.1}" y="{y:.1}" width="{CELL:.0}" height="{CELL:.0}" fill="{shade}" stroke="#999"/>"##
            )?;
            // Flip text colour on the dark end of the ramp.
            let text_fill = if v > max * 0.55 && max > 0.0 { "white" } else { "black" };
            writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" fill="{text_fill}">{}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 4.0,
                format_value(v)
            )?;
        }
    }
    writeln!(out, "</svg>")
}

fn palette_step(v: f64, max: f64) -> &'static str {
    if max <= 0.0 {
        return PALETTE[0];
    }
    let t = (v / max).clamp(0.0, 1.0);
    let idx = (t * (PALETTE.len() - 1) as f64).round() as usize;
    PALETTE[idx.min(PALETTE.len() - 1)]
}

fn format_value(v: f64) -> String {
    if v == v.trunc() {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_values_and_labels() {
        let mut buf = Vec::new();
        render_heatmap(
            &[vec![0.0, 17.0], vec![20.0, 0.0]],
            &["cote".into(), "t_and_o".into()],
            &["h0".into(), "h1".into()],
            "beds",
            &mut buf,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains(">17<"));
        assert!(text.contains(">cote<"));
        assert!(text.contains("beds"));
        // 4 cells + background rect.
        assert_eq!(text.matches("<rect").count(), 5);
    }

    #[test]
    fn zero_matrix_uses_the_light_end() {
        let mut buf = Vec::new();
        render_heatmap(&[vec![0.0]], &["a".into()], &["b".into()], "t", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(PALETTE[0]));
    }

    #[test]
    fn escapes_markup_in_labels() {
        let mut buf = Vec::new();
        render_heatmap(&[vec![1.0]], &["a<b".into()], &["c&d".into()], "t", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("a&lt;b"));
        assert!(text.contains("c&amp;d"));
    }
}
