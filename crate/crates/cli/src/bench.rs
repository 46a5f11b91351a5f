//! Benchmarks of the deconvolution estimator against sorting the responses
//! and against isotonic regression on the coupled data.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uir_core::deconv::{estimate, EstimatorConfig};
use uir_core::isotonic::{empirical_lp, naive_sorted, pava, IsotonicFn};

use crate::config::ExperimentConfig;
use crate::data::generate_dataset;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Deconv,
    NaiveSorted,
    PavaCoupled,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Deconv, Method::NaiveSorted, Method::PavaCoupled];

    pub fn name(self) -> &'static str {
        match self {
            Method::Deconv => "deconv",
            Method::NaiveSorted => "naive_sorted",
            Method::PavaCoupled => "pava_coupled",
        }
    }
}

/// One (size, replication, method, p) measurement. `error` is empty when
/// the method failed on that replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub method: Method,
    pub p: f64,
    pub rep: usize,
    pub error: Option<f64>,
    pub seconds: f64,
    pub seed: u64,
}

/// Runs every method on every `(n, replication)` dataset. Replication `r`
/// uses seed `seed + r`; rows come back sorted by size, replication,
/// method and `p` regardless of scheduling.
pub fn run_benchmark(config: &ExperimentConfig) -> CliResult<Vec<BenchmarkRow>> {
    config.validate()?;
    let noise = config.noise.build()?;
    let estimator = EstimatorConfig::from(config.estimator);
    let jobs: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(si, _)| (0..config.replications).map(move |r| (si, r)))
        .collect();

    let results: Vec<CliResult<Vec<(usize, BenchmarkRow)>>> = jobs
        .par_iter()
        .map(|&(si, rep)| {
            let n = config.sizes[si];
            let seed = config.seed.wrapping_add(rep as u64);
            let data = generate_dataset(&config.regression, config.v, n, &noise, seed)?;
            let mut rows = Vec::new();
            for method in Method::ALL {
                let start = Instant::now();
                let fit: Result<IsotonicFn, String> = match method {
                    Method::Deconv => estimate(&data.x, &data.y, &noise, config.v, &estimator)
                        .map(|r| r.g_hat)
                        .map_err(|e| e.to_string()),
                    Method::NaiveSorted => naive_sorted(&data.x, &data.y).map_err(|e| e.to_string()),
                    Method::PavaCoupled => {
                        pava(&data.x, &data.coupled_y, Some(config.v)).map_err(|e| e.to_string())
                    }
                };
                let seconds = start.elapsed().as_secs_f64();
                if let Err(msg) = &fit {
                    log::warn!("{} failed at n = {n}, replication {rep}: {msg}", method.name());
                }
                for &p in &config.p_list {
                    let error = fit
                        .as_ref()
                        .ok()
                        .and_then(|g| empirical_lp(g, &data.truth, p).ok());
                    rows.push((
                        si,
                        BenchmarkRow {
                            n,
                            method,
                            p,
                            rep,
                            error,
                            seconds,
                            seed,
                        },
                    ));
                }
            }
            log::info!("n = {n}, replication {rep} done");
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    rows.sort_by(|(sa, a), (sb, b)| {
        sa.cmp(sb)
            .then(a.rep.cmp(&b.rep))
            .then(a.method.cmp(&b.method))
            .then(a.p.total_cmp(&b.p))
    });
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

/// Median error per `(method, n)` at exponent `p`, ignoring failed rows,
/// with sizes increasing.
pub fn median_errors(rows: &[BenchmarkRow], method: Method, p: f64) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = rows.iter().filter(|r| r.method == method).map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .filter_map(|n| {
            let errors: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.n == n && r.p == p)
                .filter_map(|r| r.error)
                .collect();
            median(errors).map(|m| (n, m))
        })
        .collect()
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 0 {
        0.5 * (values[m - 1] + values[m])
    } else {
        values[m]
    })
}
