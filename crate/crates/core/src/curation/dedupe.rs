use serde::{Deserialize, Serialize};

use crate::error::CurationError;

/// How the dedupe threshold is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupeMode {
    /// `max_i |a_i - b_i| < tau`.
    #[default]
    Absolute,
    /// `max_i |a_i - b_i| < tau * max_i max(|a_i|, |b_i|)`.
    Relative,
}

impl std::str::FromStr for DedupeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" | "abs" => Ok(DedupeMode::Absolute),
            "relative" | "rel" => Ok(DedupeMode::Relative),
            _ => Err(format!("unknown dedupe mode '{s}' (expected absolute or relative)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    /// Smallest id in the group.
    pub representative: String,
    /// All ids, sorted, representative included.
    pub members: Vec<String>,
}

fn same(a: &[f64], b: &[f64], tau: f64, mode: DedupeMode) -> bool {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    match mode {
        DedupeMode::Absolute => diff < tau,
        DedupeMode::Relative => {
            let scale = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
            diff < tau * scale
        }
    }
}

/// Groups of two or more spectra related by the threshold, closed under transitivity.
/// Groups are ordered by representative.
pub fn dedupe(spectra: &[(String, Vec<f64>)], tau: f64, mode: DedupeMode) -> Result<Vec<DuplicateGroup>, CurationError> {
    if !(tau > 0.0) {
        return Err(CurationError::InvalidParameter(format!("dedupe threshold {tau} must be positive")));
    }
    let Some(first) = spectra.first() else { return Ok(Vec::new()) };
    let k = first.1.len();
    if let Some((_, s)) = spectra.iter().find(|(_, s)| s.len() != k) {
        return Err(CurationError::MixedK(k, s.len()));
    }
    let n = spectra.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if same(&spectra[i].1, &spectra[j].1, tau, mode) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(spectra[i].0.clone());
    }
    let mut out: Vec<DuplicateGroup> = groups
        .into_values()
        .filter(|m| m.len() > 1)
        .map(|mut members| {
            members.sort();
            DuplicateGroup { representative: members[0].clone(), members }
        })
        .collect();
    out.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(out)
}
