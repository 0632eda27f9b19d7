//! Acceptance bundles from the command line.

use std::time::Instant;

use hamlab::acceptance::run_criteria;
use hamlab::stats_harness::Verdict;
use serde::Serialize;

use crate::config::VerifyConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub bundle: String,
    pub seed: u64,
    pub verdicts: Vec<Verdict>,
    pub total_seconds: f64,
}

pub fn verify(cfg: &VerifyConfig) -> hamlab::Result<VerifyReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| hamlab::Error::InvalidArgument(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let verdicts = pool.install(|| run_criteria(cfg.criteria, &cfg.tolerances, cfg.seed))?;
    Ok(VerifyReport {
        bundle: cfg.bundle.clone(),
        seed: cfg.seed,
        verdicts,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}
