//! Confusion matrices with pathological as the positive class, their derived
//! metrics and rendered tables.

use std::fmt::Write;

use crate::error::{Error, Result};

/// Counts for class 0 = normal (negative) and 1 = pathological (positive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    /// From `(predicted, true)` class pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::default();
        for (p, y) in pairs {
            match (p, y) {
                (0, 0) => m.tn += 1,
                (1, 0) => m.fp += 1,
                (0, 1) => m.fn_ += 1,
                (1, 1) => m.tp += 1,
                _ => return Err(Error::Label { label: p.max(y), classes: 2 }),
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }

    pub fn merged(&self, other: &Self) -> Self {
        Self { tn: self.tn + other.tn, fp: self.fp + other.fp, fn_: self.fn_ + other.fn_, tp: self.tp + other.tp }
    }
}

/// Ratios with a zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision_pathological: Option<f64>,
    pub precision_normal: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(m: &ConfusionMatrix) -> Result<Metrics> {
    if m.total() == 0 {
        return Err(Error::EmptyInput("confusion matrix has no entries"));
    }
    Ok(Metrics {
        accuracy: (m.tp + m.tn) as f64 / m.total() as f64,
        sensitivity: ratio(m.tp, m.positives()),
        specificity: ratio(m.tn, m.negatives()),
        precision_pathological: ratio(m.tp, m.tp + m.fp),
        precision_normal: ratio(m.tn, m.tn + m.fn_),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"))
}

/// `name<TAB>value` lines with four decimals, `absent` for undefined ratios.
/// `extra` lines precede the matrix-derived ones.
pub fn metrics_file(extra: &[(&str, f64)], m: &ConfusionMatrix) -> Result<String> {
    let x = metrics(m)?;
    let mut s = String::new();
    for (name, v) in extra {
        let _ = writeln!(s, "{name}\t{v:.4}");
    }
    let _ = writeln!(s, "accuracy\t{:.4}", x.accuracy);
    let _ = writeln!(s, "sensitivity\t{}", fmt_opt(x.sensitivity));
    let _ = writeln!(s, "specificity\t{}", fmt_opt(x.specificity));
    let _ = writeln!(s, "precision_pathological\t{}", fmt_opt(x.precision_pathological));
    let _ = writeln!(s, "precision_normal\t{}", fmt_opt(x.precision_normal));
    let _ = writeln!(s, "tp\t{}\nfn\t{}\nfp\t{}\ntn\t{}", m.tp, m.fn_, m.fp, m.tn);
    Ok(s)
}

/// Rows are true classes and columns predicted classes, pathological first.
/// Bottom row: sensitivity, specificity, overall accuracy. Right column:
/// precision of the row's class.
fn layout(m: &ConfusionMatrix) -> Result<[[String; 3]; 3]> {
    let x = metrics(m)?;
    let total = m.total() as f64;
    let cell = |n: u64| format!("{n} ({:.1}%)", 100.0 * n as f64 / total);
    let pct = |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |v| format!("{:.1}%", 100.0 * v));
    Ok([
        [cell(m.tp), cell(m.fn_), pct(x.precision_pathological)],
        [cell(m.fp), cell(m.tn), pct(x.precision_normal)],
        [pct(x.sensitivity), pct(x.specificity), pct(Some(x.accuracy))],
    ])
}

const ROW_NAMES: [&str; 3] = ["pathological", "normal", ""];
const COL_NAMES: [&str; 3] = ["pathological", "normal", "precision"];

pub fn render_confusion_text(m: &ConfusionMatrix) -> Result<String> {
    let cells = layout(m)?;
    let mut s = String::new();
    let _ = writeln!(s, "{:<14}{:>16}{:>16}{:>12}", "target\\pred", COL_NAMES[0], COL_NAMES[1], COL_NAMES[2]);
    for (name, row) in ROW_NAMES.iter().zip(&cells) {
        let name = if name.is_empty() { "recall" } else { name };
        let _ = writeln!(s, "{name:<14}{:>16}{:>16}{:>12}", row[0], row[1], row[2]);
    }
    Ok(s)
}

pub fn render_confusion_svg(m: &ConfusionMatrix) -> Result<String> {
    let cells = layout(m)?;
    let total = m.total() as f64;
    let counts = [[m.tp, m.fn_], [m.fp, m.tn]];
    let (x0, y0, w, h) = (100.0, 40.0, 110.0, 44.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="440" height="200" viewBox="0 0 440 200">"#);
    let _ = writeln!(s, r#"<rect width="440" height="200" fill="white"/>"#);
    for (c, name) in COL_NAMES.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{name}</text>"#,
            x0 + (c as f64 + 0.5) * w,
            y0 - 10.0
        );
    }
    for (r, row) in cells.iter().enumerate() {
        let label = if ROW_NAMES[r].is_empty() { "recall" } else { ROW_NAMES[r] };
        let cy = y0 + (r as f64 + 0.5) * h;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#,
            x0 - 8.0,
            cy + 4.0
        );
        for (c, text) in row.iter().enumerate() {
            let fill = if r < 2 && c < 2 {
                let shade = 255.0 - 140.0 * counts[r][c] as f64 / total;
                format!("#{0:02x}{0:02x}ff", shade.round() as u8)
            } else {
                "#eeeeee".to_string()
            };
            let weight = if r == c && r < 2 { "bold" } else { "normal" };
            let (x, y) = (x0 + c as f64 * w, y0 + r as f64 * h);
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="{fill}" stroke="black"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" font-weight="{weight}" text-anchor="middle">{text}</text>"#,
                x + w / 2.0,
                y + h / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
