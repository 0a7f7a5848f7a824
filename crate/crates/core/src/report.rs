//! File artifacts: record and curve CSVs, word-class tables, SVG line charts
//! and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AggregateCurve, OmissionRecord, SensitivityRecord, WordClassTable};
use crate::error::Result;
use crate::synthworld::WordClass;

#[derive(Serialize, Deserialize)]
struct SensitivityRow {
    caption_id: u64,
    position: usize,
    grad_image: f64,
    grad_prevword: f64,
}

#[derive(Serialize, Deserialize)]
struct OmissionRow {
    caption_id: u64,
    position: usize,
    cos_multimodal: f64,
    cos_softmax: f64,
    jsd_softmax: f64,
    cos_logits: f64,
    frac_neg_orig: f64,
    frac_neg_foil: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn write_sensitivity_csv(path: impl AsRef<Path>, records: &[SensitivityRecord]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    for r in records {
        w.serialize(SensitivityRow {
            caption_id: r.caption_id,
            position: r.position,
            grad_image: r.mean_abs_grad_image,
            grad_prevword: r.mean_abs_grad_prevword,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_omission_csv(path: impl AsRef<Path>, records: &[OmissionRecord]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    for r in records {
        w.serialize(OmissionRow {
            caption_id: r.caption_id,
            position: r.position,
            cos_multimodal: r.cos_dist_multimodal,
            cos_softmax: r.cos_dist_softmax,
            jsd_softmax: r.jsd_softmax,
            cos_logits: r.cos_dist_logits,
            frac_neg_orig: r.frac_neg_logits_orig,
            frac_neg_foil: r.frac_neg_logits_foil,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Caption length of each caption id, taken as its largest position.
fn lengths<'a>(rows: impl Iterator<Item = (u64, usize)> + 'a) -> BTreeMap<u64, usize> {
    let mut out = BTreeMap::new();
    for (id, pos) in rows {
        let e = out.entry(id).or_insert(0);
        *e = (*e).max(pos);
    }
    out
}

pub fn read_sensitivity_csv(path: impl AsRef<Path>) -> Result<Vec<SensitivityRecord>> {
    let rows: Vec<SensitivityRow> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    let lens = lengths(rows.iter().map(|r| (r.caption_id, r.position)));
    Ok(rows
        .into_iter()
        .map(|r| SensitivityRecord {
            caption_id: r.caption_id,
            caption_len: lens[&r.caption_id],
            position: r.position,
            mean_abs_grad_image: r.grad_image,
            mean_abs_grad_prevword: r.grad_prevword,
        })
        .collect())
}

pub fn read_omission_csv(path: impl AsRef<Path>) -> Result<Vec<OmissionRecord>> {
    let rows: Vec<OmissionRow> = csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()?;
    let lens = lengths(rows.iter().map(|r| (r.caption_id, r.position)));
    Ok(rows
        .into_iter()
        .map(|r| OmissionRecord {
            caption_id: r.caption_id,
            caption_len: lens[&r.caption_id],
            position: r.position,
            cos_dist_multimodal: r.cos_multimodal,
            cos_dist_softmax: r.cos_softmax,
            jsd_softmax: r.jsd_softmax,
            cos_dist_logits: r.cos_logits,
            frac_neg_logits_orig: r.frac_neg_orig,
            frac_neg_logits_foil: r.frac_neg_foil,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub metric: String,
    pub position: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn write_curves_csv(path: impl AsRef<Path>, curves: &[AggregateCurve]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    for c in curves {
        for p in &c.points {
            w.serialize(CurveRow {
                metric: c.metric.name().to_string(),
                position: p.position,
                mean: p.mean,
                std: p.std,
                count: p.count,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves_csv(path: impl AsRef<Path>) -> Result<Vec<CurveRow>> {
    Ok(csv::Reader::from_path(path)?
        .deserialize()
        .collect::<Result<_, _>>()?)
}

const TABLE_CLASSES: [WordClass; 12] = [
    WordClass::Det,
    WordClass::Adj,
    WordClass::Noun,
    WordClass::Adp,
    WordClass::Verb,
    WordClass::Num,
    WordClass::Conj,
    WordClass::Pron,
    WordClass::Prt,
    WordClass::Adv,
    WordClass::End,
    WordClass::Unk,
];

/// One row per (caption length, position); class columns are percentages.
pub fn write_classes_csv(path: impl AsRef<Path>, tables: &[(usize, WordClassTable)]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let mut header = vec!["length".to_string(), "position".into(), "total".into()];
    header.extend(TABLE_CLASSES.iter().map(|c| c.name().to_string()));
    w.write_record(&header)?;
    for (len, table) in tables {
        for pos in 0..table.rows.len() {
            let mut row = vec![len.to_string(), pos.to_string(), table.total(pos).to_string()];
            row.extend(TABLE_CLASSES.iter().map(|&c| table.percent(pos, c).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A named series of `(x, y)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal standalone SVG line chart.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, 0.0f64, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        top + ph,
        left + pw,
        top + ph
    );
    let _ = writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{}" stroke="black"/>"#, top + ph);
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(y) + 4.0,
            format_tick(y)
        );
    }
    let mut x = x0.ceil();
    while x <= x1 {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            sx(x),
            top + ph + 16.0,
            x
        );
        x += 1.0;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            w - right + 12.0,
            w - right + 32.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">{}</text>"#,
            w - right + 38.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// What was run and with which settings; enough to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: "gprb".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
