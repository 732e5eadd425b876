use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError};
use crate::features::assemble_features;
use crate::fem::lb_spectrum;
use crate::mesh::TriMesh;
use crate::nn::Predictor;

/// Wall-clock statistics of repeated runs, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub median_ms: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub runs: usize,
}

impl RunStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        let mut v = ms.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        RunStats {
            median_ms: if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 },
            mean_ms: mean,
            std_ms: var.sqrt(),
            min_ms: v[0],
            max_ms: v[n - 1],
            runs: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub id: String,
    pub vertices: usize,
    /// Feature extraction alone.
    pub features: RunStats,
    /// GCN forward pass on already extracted features.
    pub gcn: RunStats,
    /// Feature extraction plus forward pass, timed as one block.
    pub gcn_with_features: RunStats,
    /// Operator assembly plus eigensolve.
    pub fem: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub k: usize,
    pub repeats: usize,
    pub warmup_runs: usize,
    pub threads: usize,
    pub note: String,
    pub rows: Vec<TimingRow>,
    /// Medians over meshes of the per-mesh medians.
    pub median_fem_ms: f64,
    pub median_gcn_ms: f64,
    pub median_gcn_with_features_ms: f64,
    /// `median_fem_ms / median_gcn_ms`.
    pub speedup_excluding_features: f64,
    /// `median_fem_ms / median_gcn_with_features_ms`.
    pub speedup_including_features: f64,
}

fn time<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let out = f();
    (start.elapsed().as_secs_f64() * 1e3, out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

/// Times feature extraction, GCN inference and the FEM solve for `k`
/// eigenvalues on every mesh: one warm-up run, then `repeats` timed runs,
/// all on a single thread.
pub fn bench_timing(meshes: &[(String, TriMesh)], predictor: &Predictor, k: usize, repeats: usize) -> Result<TimingReport, Error> {
    if meshes.is_empty() || repeats == 0 {
        return Err(EvalError::Empty.into());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("single-thread pool");
    pool.install(|| {
        let mut rows = Vec::with_capacity(meshes.len());
        for (id, mesh) in meshes {
            let mut feat = Vec::with_capacity(repeats);
            let mut gcn = Vec::with_capacity(repeats);
            let mut both = Vec::with_capacity(repeats);
            let mut fem = Vec::with_capacity(repeats);
            for run in 0..=repeats {
                let (tf, features) = time(|| assemble_features(mesh));
                let features = features?;
                let graph = predictor.prepare(&features);
                let (tg, pred) = time(|| predictor.predict_prepared(&[&graph]));
                pred?;
                let (tb, pred) = time(|| -> Result<_, Error> {
                    let f = assemble_features(mesh)?;
                    Ok(predictor.predict(&[&f])?)
                });
                pred?;
                let (te, spec) = time(|| lb_spectrum(mesh, k));
                spec?;
                if run > 0 {
                    feat.push(tf);
                    gcn.push(tg);
                    both.push(tb);
                    fem.push(te);
                }
            }
            log::debug!("timed {id}: fem {:.2} ms, gcn {:.2} ms", median(&mut fem.clone()), median(&mut gcn.clone()));
            rows.push(TimingRow {
                id: id.clone(),
                vertices: mesh.vertex_count(),
                features: RunStats::from_samples(&feat),
                gcn: RunStats::from_samples(&gcn),
                gcn_with_features: RunStats::from_samples(&both),
                fem: RunStats::from_samples(&fem),
            });
        }
        let col = |f: fn(&TimingRow) -> f64| median(&mut rows.iter().map(f).collect::<Vec<_>>());
        let median_fem_ms = col(|r| r.fem.median_ms);
        let median_gcn_ms = col(|r| r.gcn.median_ms);
        let median_gcn_with_features_ms = col(|r| r.gcn_with_features.median_ms);
        Ok(TimingReport {
            k,
            repeats,
            warmup_runs: 1,
            threads: 1,
            note: "gcn excludes feature extraction; gcn_with_features includes it".into(),
            median_fem_ms,
            median_gcn_ms,
            median_gcn_with_features_ms,
            speedup_excluding_features: median_fem_ms / median_gcn_ms,
            speedup_including_features: median_fem_ms / median_gcn_with_features_ms,
            rows,
        })
    })
}
