//! Scoring predicted spectra: PSNR, threshold accuracy, per-sample reports
//! and the FEM-vs-GCN timing harness.

mod timing;

use std::io::{BufRead, Write};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::EvalError;
use crate::nn::{loss_l1, loss_l2, loss_rpd, RPD_EPS};

pub use timing::{bench_timing, RunStats, TimingReport, TimingRow};

/// Thresholds reported in every aggregate.
pub const ACCURACY_THRESHOLDS: [f64; 2] = [40.0, 45.0];

/// `10 log10(range(y)^2 / mse(y, pred))` in decibels; `+inf` when the prediction is exact.
pub fn psnr(y: &[f64], pred: &[f64]) -> Result<f64, EvalError> {
    if y.len() != pred.len() {
        return Err(EvalError::Length(y.len(), pred.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(EvalError::ConstantTarget);
    }
    let mse = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / mse).log10())
}

/// Scores of one prediction. `psnr_db` is `None` for a constant target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    #[serde(with = "db")]
    pub psnr_db: Option<f64>,
    pub rpd: f64,
    pub l1: f64,
    pub l2: f64,
}

impl SampleScore {
    pub fn new(id: impl Into<String>, y: &[f64], pred: &[f64]) -> Result<Self, EvalError> {
        let psnr_db = match psnr(y, pred) {
            Ok(v) => Some(v),
            Err(EvalError::ConstantTarget) => None,
            Err(e) => return Err(e),
        };
        Ok(SampleScore { id: id.into(), psnr_db, rpd: loss_rpd(y, pred, RPD_EPS), l1: loss_l1(y, pred), l2: loss_l2(y, pred) })
    }

    pub fn flagged(&self) -> bool {
        self.psnr_db.is_none()
    }
}

/// Fraction of unflagged samples with PSNR strictly above `threshold`.
pub fn accuracy_at(scores: &[SampleScore], threshold: f64) -> Result<f64, EvalError> {
    let valid: Vec<f64> = scores.iter().filter_map(|s| s.psnr_db).collect();
    if valid.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(valid.iter().filter(|&&p| p > threshold).count() as f64 / valid.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub threshold_db: f64,
    pub fraction: f64,
}

/// Summary over the unflagged samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub samples: usize,
    /// Constant targets, left out of everything below.
    pub flagged: usize,
    /// Predictions with zero error.
    pub exact: usize,
    pub accuracy: Vec<Accuracy>,
    #[serde(with = "db")]
    pub median_psnr_db: Option<f64>,
    pub mean_rpd: f64,
    pub mean_l1: f64,
    pub mean_l2: f64,
}

impl Aggregate {
    pub fn from_scores(scores: &[SampleScore]) -> Result<Self, EvalError> {
        let valid: Vec<&SampleScore> = scores.iter().filter(|s| !s.flagged()).collect();
        if valid.is_empty() {
            return Err(EvalError::Empty);
        }
        let n = valid.len() as f64;
        let mut db: Vec<f64> = valid.iter().filter_map(|s| s.psnr_db).collect();
        db.sort_by(f64::total_cmp);
        let mid = db.len() / 2;
        let median = if db.len() % 2 == 1 { db[mid] } else { (db[mid - 1] + db[mid]) / 2.0 };
        let accuracy = ACCURACY_THRESHOLDS
            .iter()
            .map(|&t| Ok(Accuracy { threshold_db: t, fraction: accuracy_at(scores, t)? }))
            .collect::<Result<_, EvalError>>()?;
        Ok(Aggregate {
            samples: scores.len(),
            flagged: scores.len() - valid.len(),
            exact: db.iter().filter(|v| v.is_infinite()).count(),
            accuracy,
            median_psnr_db: Some(median).filter(|m| !m.is_nan()),
            mean_rpd: valid.iter().map(|s| s.rpd).sum::<f64>() / n,
            mean_l1: valid.iter().map(|s| s.l1).sum::<f64>() / n,
            mean_l2: valid.iter().map(|s| s.l2).sum::<f64>() / n,
        })
    }

    pub fn fraction_above(&self, threshold: f64) -> Option<f64> {
        self.accuracy.iter().find(|a| a.threshold_db == threshold).map(|a| a.fraction)
    }
}

/// Per-sample scores, their aggregate and optional timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleScore>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<TimingReport>,
}

impl EvalReport {
    /// Scores `(id, target, prediction)` triples.
    pub fn build<'a>(rows: impl IntoIterator<Item = (&'a str, &'a [f64], &'a [f64])>) -> Result<Self, EvalError> {
        let samples = rows.into_iter().map(|(id, y, p)| SampleScore::new(id, y, p)).collect::<Result<Vec<_>, _>>()?;
        let aggregate = Aggregate::from_scores(&samples)?;
        Ok(EvalReport { samples, aggregate, timing: None })
    }

    pub fn write_samples_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_scores_csv(&self.samples, out)
    }

    /// Aggregate (and timing, if present) as pretty JSON.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            aggregate: &'a Aggregate,
            #[serde(skip_serializing_if = "Option::is_none")]
            timing: Option<&'a TimingReport>,
        }
        serde_json::to_string_pretty(&Summary { aggregate: &self.aggregate, timing: self.timing.as_ref() })
            .expect("report serializes")
    }
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) => format!("{x}"),
    }
}

fn parse_db(s: &str) -> Result<Option<f64>, String> {
    match s.trim() {
        "" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        t => t.parse().map(Some).map_err(|e| format!("bad PSNR '{t}': {e}")),
    }
}

/// Header `id,psnr_db,rpd,l1,l2`; exact predictions print `inf`, flagged ones leave PSNR empty.
pub fn write_scores_csv<W: Write>(scores: &[SampleScore], mut out: W) -> std::io::Result<()> {
    writeln!(out, "id,psnr_db,rpd,l1,l2")?;
    for s in scores {
        writeln!(out, "{},{},{},{},{}", s.id, fmt_db(s.psnr_db), s.rpd, s.l1, s.l2)?;
    }
    Ok(())
}

pub fn read_scores_csv<R: BufRead>(input: R) -> Result<Vec<SampleScore>, String> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "id,psnr_db,rpd,l1,l2" => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(format!("line {}: expected 5 fields", i + 2));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 2));
        out.push(SampleScore { id: f[0].to_string(), psnr_db: parse_db(f[1])?, rpd: num(f[2])?, l1: num(f[3])?, l2: num(f[4])? });
    }
    Ok(out)
}

/// One histogram bin `[lo, hi)`; exact predictions land in a final bin with `lo = hi = inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// PSNR distribution in `width`-dB bins aligned to multiples of `width`.
pub fn psnr_histogram(scores: &[SampleScore], width: f64) -> Vec<HistogramBin> {
    assert!(width > 0.0, "bin width must be positive");
    let finite: Vec<f64> = scores.iter().filter_map(|s| s.psnr_db).filter(|v| v.is_finite()).collect();
    let exact = scores.iter().filter(|s| s.psnr_db == Some(f64::INFINITY)).count();
    let mut bins = Vec::new();
    if !finite.is_empty() {
        let first = (finite.iter().cloned().fold(f64::INFINITY, f64::min) / width).floor() as i64;
        let last = (finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / width).floor() as i64;
        let mut counts = vec![0usize; (last - first + 1) as usize];
        for v in &finite {
            counts[((v / width).floor() as i64 - first) as usize] += 1;
        }
        for (i, count) in counts.into_iter().enumerate() {
            let lo = (first + i as i64) as f64 * width;
            bins.push(HistogramBin { lo, hi: lo + width, count });
        }
    }
    if exact > 0 {
        bins.push(HistogramBin { lo: f64::INFINITY, hi: f64::INFINITY, count: exact });
    }
    bins
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut out: W) -> std::io::Result<()> {
    writeln!(out, "lo_db,hi_db,count")?;
    for b in bins {
        writeln!(out, "{},{},{}", fmt_db(Some(b.lo)), fmt_db(Some(b.hi)), b.count)?;
    }
    Ok(())
}

/// Serde for optional decibel values: `+inf` as the string "inf", flagged as null.
mod db {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_infinite() => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Option::<Raw>::deserialize(d)? {
            None => Ok(None),
            Some(Raw::Num(x)) => Ok(Some(x)),
            Some(Raw::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!("bad decibel value '{t}'"))),
        }
    }
}
