//! Static HTML and ANSI views of category-annotated traces: a one-cell-per-token
//! ribbon plus zoom windows of flowing text.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Trace;
use crate::error::{Error, Result};
use crate::supertokenizer::Segmentation;
use crate::taxonomy::{Category, CategoryMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

pub struct Palette;

impl Palette {
    pub const NEUTRAL: Rgb = Rgb(224, 224, 224);

    pub fn color(category: Category) -> Rgb {
        match category {
            Category::Backtracking => Rgb(231, 76, 60),
            Category::Hedging => Rgb(243, 156, 18),
            Category::Verification => Rgb(46, 204, 113),
            Category::Counterargument => Rgb(230, 126, 34),
            Category::StrategyShift => Rgb(155, 89, 182),
            Category::ProblemRef => Rgb(52, 152, 219),
            Category::Sequencing => Rgb(26, 188, 156),
            Category::Reasoning => Rgb(149, 165, 166),
            Category::Computation => Rgb(189, 195, 199),
        }
    }

    pub fn color_of(category: Option<Category>) -> Rgb {
        category.map_or(Self::NEUTRAL, Self::color)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    #[default]
    Html,
    Ansi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderPlan {
    pub trace_id: String,
    /// Half-open output-token ranges.
    pub windows: Vec<(usize, usize)>,
    pub format: RenderFormat,
}

/// Default zoom-window width in output tokens.
pub const DEFAULT_WINDOW: usize = 40;

struct Cell<'a> {
    text: &'a str,
    category: Option<Category>,
    merged: bool,
}

fn cells<'a>(trace: &'a Trace, seg: &Segmentation, cmap: &CategoryMap) -> Result<Vec<Cell<'a>>> {
    if seg.base_len() != trace.tokens.len() || seg.trace_id != trace.id {
        return Err(Error::DimensionMismatch {
            expected: format!("segmentation of trace {:?} over {} tokens", trace.id, trace.tokens.len()),
            found: format!("segmentation of {:?} over {} tokens", seg.trace_id, seg.base_len()),
        });
    }
    seg.token_ids
        .iter()
        .zip(&seg.spans)
        .map(|(&id, &(s, e))| {
            let start = trace.tokens[s].start;
            let end = trace.tokens[e - 1].end;
            Ok(Cell {
                text: &trace.text[start..end],
                category: cmap.lookup(id)?,
                merged: id >= cmap.base_vocab_size,
            })
        })
        .collect()
}

fn check_windows(windows: &[(usize, usize)], len: usize) -> Result<()> {
    for &(start, end) in windows {
        if start >= end || end > len {
            return Err(Error::WindowOutOfRange { start, end, len });
        }
    }
    Ok(())
}

fn escape_html(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
}

fn class_name(c: Option<Category>) -> &'static str {
    c.map_or("none", Category::name)
}

fn html(trace: &Trace, cells: &[Cell<'_>], windows: &[(usize, usize)]) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>");
    escape_html(&trace.id, &mut out);
    out.push_str("</title>\n<style>\n");
    out.push_str("body{font-family:sans-serif;margin:1.5em}\n");
    out.push_str(".ribbon{display:flex;flex-wrap:wrap;gap:0}\n");
    out.push_str(".ribbon span{display:inline-block;width:4px;height:18px}\n");
    out.push_str("pre.win{white-space:pre-wrap;font-family:monospace;border:1px solid #ccc;padding:.6em}\n");
    out.push_str(".legend span{display:inline-block;padding:0 .4em;margin-right:.3em}\n");
    let _ = writeln!(out, ".k-none{{background:{}}}", Palette::NEUTRAL.hex());
    for c in Category::ALL {
        let _ = writeln!(out, ".k-{}{{background:{}}}", c.name(), Palette::color(c).hex());
    }
    out.push_str("pre.win .k-none{background:transparent}\n</style></head>\n<body>\n<h1>");
    escape_html(&trace.id, &mut out);
    let _ = writeln!(out, "</h1>\n<p>{} output tokens</p>", cells.len());
    out.push_str("<div class=\"legend\">");
    for c in Category::ALL {
        let _ = write!(out, "<span class=\"k-{0}\">{0}</span>", c.name());
    }
    out.push_str("<span class=\"k-none\">non-merged</span></div>\n<div class=\"ribbon\">");
    for cell in cells {
        let _ = write!(out, "<span class=\"k-{}\"></span>", class_name(cell.category));
    }
    out.push_str("</div>\n");
    for &(s, e) in windows {
        let _ = write!(out, "<h2>tokens {s}..{e}</h2>\n<pre class=\"win\">");
        for cell in &cells[s..e] {
            if cell.merged {
                let _ = write!(out, "<span class=\"k-{}\">", class_name(cell.category));
                escape_html(cell.text, &mut out);
                out.push_str("</span>");
            } else {
                escape_html(cell.text, &mut out);
            }
        }
        out.push_str("</pre>\n");
    }
    out.push_str("</body></html>\n");
    out
}

const ANSI_RESET: &str = "\x1b[0m";
const RIBBON_WIDTH: usize = 80;

fn ansi_bg(c: Rgb) -> String {
    format!("\x1b[48;2;{};{};{}m", c.0, c.1, c.2)
}

fn ansi(trace: &Trace, cells: &[Cell<'_>], windows: &[(usize, usize)]) -> String {
    let mut out = format!("{} ({} output tokens)\n", trace.id, cells.len());
    for row in cells.chunks(RIBBON_WIDTH) {
        for cell in row {
            out.push_str(&ansi_bg(Palette::color_of(cell.category)));
            out.push(' ');
        }
        out.push_str(ANSI_RESET);
        out.push('\n');
    }
    for &(s, e) in windows {
        let _ = writeln!(out, "\n-- tokens {s}..{e} --");
        for cell in &cells[s..e] {
            if cell.merged {
                out.push_str(&ansi_bg(Palette::color_of(cell.category)));
                out.push_str(cell.text);
                out.push_str(ANSI_RESET);
            } else {
                out.push_str(cell.text);
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_trace(trace: &Trace, seg: &Segmentation, cmap: &CategoryMap, plan: &RenderPlan) -> Result<Vec<u8>> {
    let cells = cells(trace, seg, cmap)?;
    check_windows(&plan.windows, cells.len())?;
    let doc = match plan.format {
        RenderFormat::Html => html(trace, &cells, &plan.windows),
        RenderFormat::Ansi => ansi(trace, &cells, &plan.windows),
    };
    Ok(doc.into_bytes())
}

/// Up to `k` non-overlapping windows of `width` output tokens covering the
/// densest runs of signpost categories. Ties prefer windows centred on their
/// signposts, then the earliest start. Unmapped ids count as non-signposts.
pub fn auto_windows(seg: &Segmentation, cmap: &CategoryMap, k: usize, width: usize) -> Vec<(usize, usize)> {
    let n = seg.len();
    if n == 0 || k == 0 || width == 0 {
        return Vec::new();
    }
    let w = width.min(n);
    let marks: Vec<bool> = seg
        .token_ids
        .iter()
        .map(|&id| matches!(cmap.lookup(id), Ok(Some(c)) if c.is_signpost()))
        .collect();
    // prefix sums of counts and positions
    let mut cnt = vec![0i64; n + 1];
    let mut pos = vec![0i64; n + 1];
    for (i, &m) in marks.iter().enumerate() {
        cnt[i + 1] = cnt[i] + m as i64;
        pos[i + 1] = pos[i] + if m { i as i64 } else { 0 };
    }
    let mut candidates: Vec<(i64, i64, usize)> = (0..=n - w)
        .filter_map(|s| {
            let d = cnt[s + w] - cnt[s];
            if d == 0 {
                return None;
            }
            let sum = pos[s + w] - pos[s];
            // d * |mean - centre| scaled by 2
            let off = (2 * sum - d * (2 * s as i64 + w as i64 - 1)).abs();
            Some((-d, off, s))
        })
        .collect();
    candidates.sort_unstable();
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for (_, _, s) in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&(a, b)| s + w <= a || s >= b) {
            chosen.push((s, s + w));
        }
    }
    chosen.sort_unstable();
    chosen
}
