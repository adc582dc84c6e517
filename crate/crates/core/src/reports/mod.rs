//! Unigram frequency ratios between reports of incorrectly and correctly
//! predicted recordings.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};

/// Lowercased runs of alphabetic characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordStats {
    pub word: String,
    pub count_incorrect: u64,
    pub count_correct: u64,
    pub f_minus: f64,
    pub f_plus: f64,
    /// `f_minus / f_plus`; `None` when the word never occurs in the correct
    /// corpus.
    pub ratio: Option<f64>,
    /// The ratio as a reduced fraction `(numerator, denominator)`; the
    /// denominator is 0 for infinite ratios.
    pub ratio_exact: (u128, u128),
}

impl WordStats {
    pub fn is_infinite(&self) -> bool {
        self.ratio.is_none()
    }
}

fn count(reports: &[&str]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for r in reports {
        for w in tokenize(r) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Infinite ratios first (by word), then finite ratios descending, ties by
/// word.
fn order(a: &WordStats, b: &WordStats) -> Ordering {
    match (a.ratio, b.ratio) {
        (None, None) => a.word.cmp(&b.word),
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.word.cmp(&b.word)),
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Frequencies over the union vocabulary. The ratio is formed exactly as
/// `count⁻ · total⁺ / (count⁺ · total⁻)` and rounded once to a double.
pub fn word_ratios(incorrect: &[&str], correct: &[&str]) -> Result<Vec<WordStats>> {
    let minus = count(incorrect);
    let plus = count(correct);
    let n_minus: u64 = minus.values().sum();
    let n_plus: u64 = plus.values().sum();
    if n_minus == 0 {
        return Err(Error::EmptyCorpus("incorrectly predicted reports contain no words"));
    }
    if n_plus == 0 {
        return Err(Error::EmptyCorpus("correctly predicted reports contain no words"));
    }
    let mut vocab: Vec<&String> = minus.keys().chain(plus.keys()).collect();
    vocab.sort();
    vocab.dedup();
    let mut out: Vec<WordStats> = vocab
        .into_iter()
        .map(|w| {
            let cm = minus.get(w).copied().unwrap_or(0);
            let cp = plus.get(w).copied().unwrap_or(0);
            let f_minus = cm as f64 / n_minus as f64;
            let f_plus = cp as f64 / n_plus as f64;
            let (num, den) = (cm as u128 * n_plus as u128, cp as u128 * n_minus as u128);
            let g = gcd(num, den).max(1);
            WordStats {
                word: w.clone(),
                count_incorrect: cm,
                count_correct: cp,
                f_minus,
                f_plus,
                ratio: (cp > 0).then(|| num as f64 / den as f64),
                ratio_exact: (num / g, den / g),
            }
        })
        .collect();
    out.sort_by(order);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopWords {
    pub infinite: Vec<WordStats>,
    pub largest: Vec<WordStats>,
    pub smallest: Vec<WordStats>,
}

pub const DEFAULT_MIN_COUNT: u64 = 2;

/// Words with at least `min_count` occurrences over both corpora: every
/// infinite-ratio word, the `k` largest finite ratios and the `k` smallest
/// (ascending).
pub fn top_words(stats: &[WordStats], k: usize, min_count: u64) -> TopWords {
    let mut kept: Vec<WordStats> =
        stats.iter().filter(|s| s.count_incorrect + s.count_correct >= min_count).cloned().collect();
    kept.sort_by(order);
    let (infinite, finite): (Vec<_>, Vec<_>) = kept.into_iter().partition(WordStats::is_infinite);
    let largest = finite.iter().take(k).cloned().collect();
    let mut ascending = finite;
    ascending.sort_by(|a, b| a.ratio.unwrap().total_cmp(&b.ratio.unwrap()).then_with(|| a.word.cmp(&b.word)));
    let smallest = ascending.into_iter().take(k).collect();
    TopWords { infinite, largest, smallest }
}

/// `word  count-  count+  r` rows; infinite ratios print as `inf`.
pub fn word_stats_tsv(stats: &[WordStats]) -> String {
    let mut s = String::from("word\tcount_incorrect\tcount_correct\tratio\n");
    for w in stats {
        let r = w.ratio.map_or_else(|| "inf".to_string(), |r| format!("{r:.6}"));
        let _ = writeln!(s, "{}\t{}\t{}\t{r}", w.word, w.count_incorrect, w.count_correct);
    }
    s
}
