//! SVG heat maps and grid plots, with CSV / plain-text companions.
//!
//! Output is plain text built from integer coordinates so the same inputs
//! always produce the same bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num::Zero;

use crate::error::{Error, Result};
use crate::potential::{CombinationReport, PairwiseMatrix};
use crate::ratio::{fraction_f64, fraction_string};

const LOW: (u8, u8, u8) = (0xf7, 0xfb, 0xff);
const HIGH: (u8, u8, u8) = (0x08, 0x30, 0x6b);
const CELL: usize = 56;
const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

/// Linear blend between the low and high colors, `t` clamped to `[0, 1]`.
pub fn scale_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LOW.0, HIGH.0),
        mix(LOW.1, HIGH.1),
        mix(LOW.2, HIGH.2)
    )
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn label_width(labels: &[String]) -> usize {
    labels.iter().map(|l| l.chars().count()).max().unwrap_or(0) * 8 + 16
}

fn svg_open(out: &mut String, width: usize, height: usize) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>");
}

pub fn heatmap_svg(matrix: &PairwiseMatrix) -> String {
    let n = matrix.len();
    let left = label_width(&matrix.study_ids);
    let top = left;
    let legend = 40;
    let width = left + n * CELL + 16;
    let height = top + n * CELL + legend + 16;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    for (i, id) in matrix.study_ids.iter().enumerate() {
        let y = top + i * CELL + CELL / 2 + 4;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6,
            escape(id)
        );
        let x = left + i * CELL + CELL / 2;
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"start\" transform=\"rotate(-90 {x} {})\" {FONT}>{}</text>",
            top - 6,
            top - 6,
            escape(id)
        );
    }
    for i in 0..n {
        for j in 0..n {
            let x = left + j * CELL;
            let y = top + i * CELL;
            if i == j {
                let _ = writeln!(
                    out,
                    "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"#d9d9d9\" stroke=\"#ffffff\"/>"
                );
                continue;
            }
            let v = matrix.get(i, j);
            let t = fraction_f64(&v);
            let ink = if t > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                out,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{}\" stroke=\"#ffffff\"><title>{} / {}: {}</title></rect>",
                scale_color(t),
                escape(&matrix.study_ids[i]),
                escape(&matrix.study_ids[j]),
                fraction_string(&v)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{ink}\" {FONT}>{}</text>",
                x + CELL / 2,
                y + CELL / 2 + 4,
                fraction_string(&v)
            );
        }
    }
    // Legend: eleven swatches from 0 to 1.
    let ly = top + n * CELL + 16;
    for s in 0..=10 {
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{}\"/>",
            left + s * 12,
            scale_color(s as f64 / 10.0)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>0</text>",
        left - 4,
        ly + 11
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" {FONT}>1</text>",
        left + 11 * 12 + 4,
        ly + 11
    );
    out.push_str("</svg>\n");
    out
}

/// One row per unordered pair: `study_i,study_j,num,den`.
pub fn heatmap_csv(matrix: &PairwiseMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["study_i", "study_j", "num", "den"]).expect("in-memory write");
    for i in 0..matrix.len() {
        for j in i + 1..matrix.len() {
            let v = matrix.get(i, j);
            w.write_record([
                matrix.study_ids[i].as_str(),
                matrix.study_ids[j].as_str(),
                &v.numer().to_string(),
                &v.denom().to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Columns a grid plot shows: non-zero potentials, capped at `top_k`.
/// Returns the columns and whether anything was cut.
pub fn grid_columns(reports: &[CombinationReport], top_k: Option<usize>) -> (Vec<&CombinationReport>, bool) {
    let nonzero: Vec<&CombinationReport> =
        reports.iter().filter(|r| !r.overall.is_zero()).collect();
    match top_k {
        Some(k) if nonzero.len() > k => (nonzero[..k].to_vec(), true),
        _ => (nonzero, false),
    }
}

/// Grid plot: one column per combination (in the given order), one row per
/// study, filled cells for members and the potential above each column.
/// `truncated` adds a marker even when the cap was applied upstream.
pub fn gridplot_svg(
    study_ids: &[String],
    reports: &[CombinationReport],
    top_k: Option<usize>,
    truncated: bool,
) -> String {
    let (columns, cut) = grid_columns(reports, top_k);
    let truncated = truncated || cut;
    let col = 40;
    let row = 24;
    let left = label_width(study_ids);
    let top = 40;
    let mut out = String::new();
    if columns.is_empty() {
        svg_open(&mut out, 360, 60);
        let _ = writeln!(
            out,
            "<text x=\"180\" y=\"34\" text-anchor=\"middle\" {FONT}>No combination has a non-zero overlap potential.</text>"
        );
        out.push_str("</svg>\n");
        return out;
    }
    let marker = if truncated { col } else { 0 };
    let width = left + columns.len() * col + marker + 16;
    let height = top + study_ids.len() * row + 16;
    svg_open(&mut out, width, height);
    for (i, id) in study_ids.iter().enumerate() {
        let y = top + i * row;
        if i % 2 == 1 {
            let _ = writeln!(
                out,
                "<rect x=\"{left}\" y=\"{y}\" width=\"{}\" height=\"{row}\" fill=\"#f0f0f0\"/>",
                columns.len() * col
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6,
            y + row / 2 + 4,
            escape(id)
        );
    }
    for (c, report) in columns.iter().enumerate() {
        let cx = left + c * col + col / 2;
        let _ = writeln!(
            out,
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{}</text>",
            top - 10,
            fraction_string(&report.overall)
        );
        let members: Vec<usize> = report.subset.iter().collect();
        if let (Some(&first), Some(&last)) = (members.first(), members.last()) {
            let _ = writeln!(
                out,
                "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"#333333\" stroke-width=\"2\"/>",
                top + first * row + row / 2,
                top + last * row + row / 2
            );
        }
        for i in 0..study_ids.len() {
            let fill = if report.subset.contains(i) { "#333333" } else { "#d9d9d9" };
            let _ = writeln!(
                out,
                "<circle cx=\"{cx}\" cy=\"{}\" r=\"7\" fill=\"{fill}\"/>",
                top + i * row + row / 2
            );
        }
    }
    if truncated {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>…</text>",
            left + columns.len() * col + col / 2,
            top + study_ids.len() * row / 2 + 4
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Plain-text rendering of the grid plot.
pub fn gridplot_text(
    study_ids: &[String],
    reports: &[CombinationReport],
    top_k: Option<usize>,
    truncated: bool,
) -> String {
    let (columns, cut) = grid_columns(reports, top_k);
    if columns.is_empty() {
        return "No combination has a non-zero overlap potential.\n".to_string();
    }
    let labels: Vec<String> = columns.iter().map(|r| fraction_string(&r.overall)).collect();
    let w = labels.iter().map(String::len).max().unwrap_or(1).max(1) + 1;
    let left = study_ids
        .iter()
        .map(|s| s.chars().count())
        .max()
        .unwrap_or(0)
        .max("potential".len());
    let mut out = String::new();
    let _ = write!(out, "{:<left$}", "potential");
    for l in &labels {
        let _ = write!(out, "{l:>w$}");
    }
    out.push('\n');
    for (i, id) in study_ids.iter().enumerate() {
        let _ = write!(out, "{id:<left$}");
        for r in &columns {
            let mark = if r.subset.contains(i) { "x" } else { "." };
            let _ = write!(out, "{mark:>w$}");
        }
        out.push('\n');
    }
    if truncated || cut {
        out.push_str("(more combinations not shown)\n");
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `path` (SVG) and the CSV sidecar next to it. Returns the sidecar path.
pub fn emit_heatmap(matrix: &PairwiseMatrix, path: &Path) -> Result<PathBuf> {
    write(path, &heatmap_svg(matrix))?;
    let sidecar = path.with_extension("csv");
    write(&sidecar, &heatmap_csv(matrix))?;
    Ok(sidecar)
}

/// Writes `path` (SVG) and a `.txt` fallback next to it. Returns the text path.
pub fn emit_gridplot(
    study_ids: &[String],
    reports: &[CombinationReport],
    top_k: Option<usize>,
    truncated: bool,
    path: &Path,
) -> Result<PathBuf> {
    write(path, &gridplot_svg(study_ids, reports, top_k, truncated))?;
    let text = path.with_extension("txt");
    write(&text, &gridplot_text(study_ids, reports, top_k, truncated))?;
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::Budget;
    use crate::enumerate::{enumerate_potentials, EnumerationConfig};
    use crate::model::tests::toy4;
    use crate::model::{encode_synthesis, PartitionScheme};
    use crate::potential::pairwise_matrix;
    use crate::ratio::Fraction;

    fn toy_matrix() -> PairwiseMatrix {
        let (_, e) = encode_synthesis(&toy4(), &PartitionScheme::Singleton).unwrap();
        pairwise_matrix(&e)
    }

    #[test]
    fn color_endpoints() {
        assert_eq!(scale_color(0.0), "#f7fbff");
        assert_eq!(scale_color(1.0), "#08306b");
        assert_eq!(scale_color(7.0), "#08306b");
    }

    #[test]
    fn heatmap_shows_exact_values() {
        let svg = heatmap_svg(&toy_matrix());
        assert!(svg.contains(">1/3</text>"));
        assert!(svg.contains(">2/3</text>"));
        assert!(svg.contains(">1/4</text>"));
        assert_eq!(svg, heatmap_svg(&toy_matrix()));
    }

    #[test]
    fn heatmap_sidecar() {
        let csv = heatmap_csv(&toy_matrix());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "study_i,study_j,num,den");
        assert_eq!(lines[1], "S1,S2,1,3");
        assert_eq!(lines[2], "S1,S3,1,3");
        assert_eq!(lines[3], "S1,S4,0,1");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn zero_matrix_is_uniform() {
        let m = PairwiseMatrix {
            study_ids: vec!["A".into(), "B".into(), "C".into()],
            values: vec![vec![Fraction::zero(); 3]; 3],
        };
        let svg = heatmap_svg(&m);
        let cells = svg.matches("fill=\"#f7fbff\" stroke").count();
        assert_eq!(cells, 6);
    }

    #[test]
    fn toy_grid_has_seven_columns() {
        let (_, e) = encode_synthesis(&toy4(), &PartitionScheme::Singleton).unwrap();
        let en = enumerate_potentials(&e, &EnumerationConfig::default(), &Budget::unlimited()).unwrap();
        let (cols, cut) = grid_columns(&en.reports, None);
        assert_eq!(cols.len(), 7);
        assert!(!cut);
        let text = gridplot_text(&e.study_ids, &en.reports, None, false);
        assert!(text.starts_with("potential"));
        assert_eq!(text.lines().count(), 5);
        let (cols, cut) = grid_columns(&en.reports, Some(3));
        assert_eq!(cols.len(), 3);
        assert!(cut);
        assert!(gridplot_svg(&e.study_ids, &en.reports, Some(3), false).contains('…'));
    }

    #[test]
    fn empty_grid_placeholder() {
        let svg = gridplot_svg(&["A".into()], &[], None, false);
        assert!(svg.contains("No combination has a non-zero overlap potential."));
    }

    #[test]
    fn labels_are_escaped() {
        let m = PairwiseMatrix {
            study_ids: vec!["a<b".into(), "c&d".into()],
            values: vec![vec![Fraction::zero(); 2]; 2],
        };
        let svg = heatmap_svg(&m);
        assert!(svg.contains("a&lt;b") && svg.contains("c&amp;d"));
        assert!(!svg.contains("a<b"));
    }
}
