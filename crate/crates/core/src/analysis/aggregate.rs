use std::collections::BTreeMap;

use super::{Metric, PositionRecord};
use crate::error::{Error, Result};
use crate::synthworld::WordClass;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub position: usize,
    pub mean: f64,
    pub count: usize,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean of one metric per position over the captions of exactly one length.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateCurve {
    pub length: usize,
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

pub fn aggregate<R: PositionRecord>(records: &[R], length: usize, metric: Metric) -> Result<AggregateCurve> {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); length + 1];
    let mut seen = false;
    for r in records.iter().filter(|r| r.caption_len() == length) {
        let Some(v) = r.metric(metric) else { continue };
        if r.position() > length {
            return Err(Error::Config(format!(
                "caption {} has position {} beyond its length {length}",
                r.caption_id(),
                r.position()
            )));
        }
        let slot = &mut sums[r.position()];
        slot.0 += v;
        slot.1 += v * v;
        slot.2 += 1;
        seen = true;
    }
    if !seen {
        return Err(Error::NoCaptionsOfLength(length));
    }
    let mut points = Vec::with_capacity(length + 1);
    for (position, &(sum, _, count)) in sums.iter().enumerate() {
        let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        // second pass for the variance keeps it non-negative and accurate
        let var = if count > 0 {
            records
                .iter()
                .filter(|r| r.caption_len() == length && r.position() == position)
                .filter_map(|r| r.metric(metric))
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / count as f64
        } else {
            f64::NAN
        };
        points.push(CurvePoint {
            position,
            mean,
            count,
            std: var.sqrt(),
        });
    }
    Ok(AggregateCurve { length, metric, points })
}

/// Share of each word class at each caption position.
#[derive(Clone, Debug, PartialEq)]
pub struct WordClassTable {
    /// `rows[position][class]` is a count.
    pub rows: Vec<BTreeMap<WordClass, usize>>,
    /// Tokens outside the grammar, tallied as [`WordClass::Unk`].
    pub unknown_tokens: usize,
}

impl WordClassTable {
    pub fn total(&self, position: usize) -> usize {
        self.rows[position].values().sum()
    }

    /// Percentage of `class` at `position`.
    pub fn percent(&self, position: usize, class: WordClass) -> f64 {
        let total = self.total(position);
        if total == 0 {
            return 0.0;
        }
        100.0 * *self.rows[position].get(&class).unwrap_or(&0) as f64 / total as f64
    }
}

/// Tabulates word classes by position. A leading START tag is skipped so that
/// position 0 is the first generated word.
pub fn word_class_table(sequences: &[Vec<WordClass>]) -> Result<WordClassTable> {
    if sequences.is_empty() {
        return Err(Error::Empty("word class table input"));
    }
    let mut rows: Vec<BTreeMap<WordClass, usize>> = Vec::new();
    let mut unknown_tokens = 0;
    for seq in sequences {
        let body = match seq.first() {
            Some(WordClass::Start) => &seq[1..],
            _ => &seq[..],
        };
        for (pos, &class) in body.iter().enumerate() {
            if rows.len() <= pos {
                rows.resize_with(pos + 1, BTreeMap::new);
            }
            if class == WordClass::Unk {
                unknown_tokens += 1;
            }
            *rows[pos].entry(class).or_default() += 1;
        }
    }
    Ok(WordClassTable { rows, unknown_tokens })
}
