//! Replica-parallel scenario runs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use hamlab::acceptance::Tolerances;
use hamlab::fluctuation_lab::{corr_theoretical, limit_cdf, xi_n, zeta_n, Bump, SpaceTest};
use hamlab::hammersley_sim::{
    covering_field, evolve_variational, init_bdj_step, init_deterministic, init_local_equilibrium_with,
    label_of, EvolveOptions, ParticleState, WindowSpec, ZeroMeanPolicy,
};
use hamlab::rng::{stream_seed, Purpose};
use hamlab::stats_harness::{ks_one_sample, median, scaling_exponent, summarize, SampleSummary, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{InitialKind, ScenarioConfig, TestKind};

/// Everything one replica produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOut {
    pub zeta: Vec<f64>,
    pub argmins: Vec<Option<f64>>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub n: u64,
    pub x: f64,
    pub t: f64,
    pub zeta: SampleSummary,
    /// Mean of `i_n(x,t)/n` when argmins were computed.
    pub argmin_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiSummary {
    pub n: u64,
    pub center: f64,
    pub half_width: f64,
    pub t: f64,
    pub xi: SampleSummary,
    /// Variance of the limiting `ξ(t,φ)`.
    pub limit_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRecord {
    pub n: u64,
    /// Root of the per-replica streams at this `n`.
    pub stream_root: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_n_seconds: Vec<(u64, f64)>,
}

/// The deterministic part of a run's report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBody {
    pub scenario: String,
    pub seed: u64,
    pub replicas: usize,
    pub n_list: Vec<u64>,
    pub grid: Vec<(f64, f64)>,
    pub summaries: Vec<PointSummary>,
    pub xi_summaries: Vec<XiSummary>,
    pub verdicts: Vec<Verdict>,
    pub seeds: Vec<SeedRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub body: ReportBody,
    pub timing: Timing,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.body.verdicts.iter().all(|v| v.pass)
    }
}

pub const CSV_HEADER: &str = "scenario,n,replica,x,t,zeta_n,argmin_over_n";

/// Twelve significant digits.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.11e}")
    }
}

fn bump(tri: &[f64; 3]) -> Bump {
    Bump {
        center: tri[0],
        half_width: tri[1],
        height: 1.0,
    }
}

/// Macroscopic height function of the scenario; step data has
/// `u(x,t) = x²/(4t)` for `x >= 0`.
fn height(cfg: &ScenarioConfig, x: f64, t: f64) -> hamlab::Result<f64> {
    match &cfg.solution {
        Some(sol) => sol.u_value(x, t),
        None => Ok(if x > 0.0 { x * x / (4.0 * t) } else { 0.0 }),
    }
}

/// Window covering the grid labels and every `ξ_n` support at scale `n`.
pub fn window_for(cfg: &ScenarioConfig, n: u64) -> hamlab::Result<WindowSpec> {
    let mut queries = cfg.grid.clone();
    for tri in &cfg.xi_tests {
        let (lo, hi) = bump(tri).support();
        queries.push((lo - 2.0 / n as f64, tri[2]));
        queries.push((hi + 1.0 / n as f64, tri[2]));
    }
    match &cfg.solution {
        Some(sol) => WindowSpec::for_queries(sol, n, &queries, cfg.guard, cfg.margin),
        None => {
            let k_max = queries.iter().map(|&(x, _)| label_of(n, x)).max().unwrap();
            WindowSpec::new(n, -cfg.guard - 1, k_max.max(1), cfg.guard)
        }
    }
}

fn initial_state(cfg: &ScenarioConfig, window: WindowSpec, seed: u64) -> hamlab::Result<ParticleState> {
    match (&cfg.solution, cfg.initial) {
        (None, _) => init_bdj_step(window),
        (Some(sol), InitialKind::Deterministic) => init_deterministic(sol, window),
        (Some(sol), InitialKind::LocalEquilibrium) => {
            init_local_equilibrium_with(sol, window, seed, ZeroMeanPolicy::PointMass)
        }
    }
}

/// Root of the replica streams at scale `n`.
pub fn stream_root(seed: u64, n: u64) -> u64 {
    stream_seed(seed, n, Purpose::Auxiliary)
}

/// Simulates one replica at scale `n`: one evolution per distinct time.
pub fn simulate(cfg: &ScenarioConfig, window: WindowSpec, replica: u64) -> hamlab::Result<ReplicaOut> {
    let n = window.n;
    let nf = n as f64;
    let root = stream_root(cfg.seed, n);
    let st0 = initial_state(cfg, window, stream_seed(root, replica, Purpose::InitialSticks))?;
    let mut out = ReplicaOut {
        zeta: vec![0.0; cfg.grid.len()],
        argmins: vec![None; cfg.grid.len()],
        xi: vec![0.0; cfg.xi_tests.len()],
    };
    // labels and ξ tests per distinct time
    let mut times: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (j, &(_, t)) in cfg.grid.iter().enumerate() {
        times.entry(t.to_bits()).or_default().0.push(j);
    }
    for (j, tri) in cfg.xi_tests.iter().enumerate() {
        times.entry(tri[2].to_bits()).or_default().1.push(j);
    }
    let reach = match cfg.solution {
        Some(_) => 0.0,
        None => {
            let top = cfg.grid.iter().map(|&(x, t)| height(cfg, x, t).unwrap_or(0.0)).fold(0.0, f64::max);
            2.0 * nf * top + nf
        }
    };
    // one field for every time keeps the slices on a single trajectory
    let t_max = times.keys().map(|&b| f64::from_bits(b)).fold(0.0, f64::max);
    let field = if t_max > 0.0 {
        Some(covering_field(&st0, t_max, reach, stream_seed(root, replica, Purpose::Field))?)
    } else {
        None
    };
    for (bits, (points, xis)) in times {
        let t = f64::from_bits(bits);
        let state = if t == 0.0 {
            st0.clone()
        } else {
            let mut targets: Vec<i64> = points.iter().map(|&j| label_of(n, cfg.grid[j].0)).collect();
            for &j in &xis {
                let (lo, hi) = bump(&cfg.xi_tests[j]).support();
                targets.push((nf * lo).floor() as i64 - 1);
                targets.push((nf * hi).ceil() as i64);
            }
            let mut opts = EvolveOptions::targets(targets);
            opts.argmins = cfg.argmins;
            evolve_variational(&st0, field.as_ref().unwrap(), t, &opts)?
        };
        for &j in &points {
            let (x, t) = cfg.grid[j];
            out.zeta[j] = match &cfg.solution {
                Some(sol) => zeta_n(&state, sol, x, t)?,
                None => {
                    let z = state.position(label_of(n, x)).expect("label inside the window");
                    (z - nf * height(cfg, x, t)?) / nf.sqrt()
                }
            };
            if cfg.argmins {
                out.argmins[j] = if t == 0.0 {
                    Some(label_of(n, x) as f64 / nf)
                } else {
                    state.argmin(label_of(n, x)).map(|i| i as f64 / nf)
                };
            }
        }
        for &j in &xis {
            let sol = cfg.solution.as_ref().expect("ξ tests need a profile");
            out.xi[j] = xi_n(&state, sol, t, &bump(&cfg.xi_tests[j]))?;
        }
    }
    Ok(out)
}

/// Runs every `(n, replica)` pair on `cfg.workers` threads. Results are
/// keyed by replica index, so the output does not depend on scheduling.
pub fn run(cfg: &ScenarioConfig) -> hamlab::Result<(RunReport, Vec<Vec<ReplicaOut>>)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| hamlab::Error::InvalidArgument(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut per_n = Vec::new();
    let mut all = Vec::new();
    for &n in &cfg.n_list {
        let t0 = Instant::now();
        let window = window_for(cfg, n)?;
        let outs: Vec<ReplicaOut> = pool.install(|| {
            (0..cfg.replicas as u64)
                .into_par_iter()
                .map(|r| simulate(cfg, window, r))
                .collect::<hamlab::Result<_>>()
        })?;
        per_n.push((n, t0.elapsed().as_secs_f64()));
        all.push(outs);
    }
    let body = report_body(cfg, &all)?;
    let report = RunReport {
        body,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            per_n_seconds: per_n,
        },
    };
    Ok((report, all))
}

fn column(outs: &[ReplicaOut], j: usize) -> Vec<f64> {
    outs.iter().map(|o| o.zeta[j]).collect()
}

fn report_body(cfg: &ScenarioConfig, all: &[Vec<ReplicaOut>]) -> hamlab::Result<ReportBody> {
    let mut summaries = Vec::new();
    let mut xi_summaries = Vec::new();
    for (&n, outs) in cfg.n_list.iter().zip(all) {
        for (j, &(x, t)) in cfg.grid.iter().enumerate() {
            let mins: Vec<f64> = outs.iter().filter_map(|o| o.argmins[j]).collect();
            summaries.push(PointSummary {
                n,
                x,
                t,
                zeta: summarize(&column(outs, j))?,
                argmin_mean: (!mins.is_empty()).then(|| mins.iter().sum::<f64>() / mins.len() as f64),
            });
        }
        for (j, tri) in cfg.xi_tests.iter().enumerate() {
            let sol = cfg.solution.as_ref().expect("ξ tests need a profile");
            let phi = bump(tri);
            let xi: Vec<f64> = outs.iter().map(|o| o.xi[j]).collect();
            xi_summaries.push(XiSummary {
                n,
                center: tri[0],
                half_width: tri[1],
                t: tri[2],
                xi: summarize(&xi)?,
                limit_variance: corr_theoretical(sol, tri[2], tri[2], &phi, &phi)?,
            });
        }
    }
    let verdicts = cfg
        .tests
        .iter()
        .map(|&k| evaluate(cfg, k, all, &cfg.tolerances))
        .collect::<hamlab::Result<_>>()?;
    Ok(ReportBody {
        scenario: cfg.scenario.name().to_string(),
        seed: cfg.seed,
        replicas: cfg.replicas,
        n_list: cfg.n_list.clone(),
        grid: cfg.grid.clone(),
        summaries,
        xi_summaries,
        verdicts,
        seeds: cfg
            .n_list
            .iter()
            .map(|&n| SeedRecord {
                n,
                stream_root: stream_root(cfg.seed, n),
            })
            .collect(),
    })
}

fn evaluate(cfg: &ScenarioConfig, kind: TestKind, all: &[Vec<ReplicaOut>], tol: &Tolerances) -> hamlab::Result<Verdict> {
    let last = all.last().unwrap();
    let n_last = *cfg.n_list.last().unwrap();
    let mut detail = Vec::new();
    let (statistic, threshold, pass) = match kind {
        TestKind::LimitLaw => {
            let sol = cfg.solution.as_ref().unwrap();
            let mut p_min = f64::INFINITY;
            for (j, &(x, t)) in cfg.grid.iter().enumerate() {
                if let Ok(cdf) = limit_cdf(sol, x, t) {
                    let ks = ks_one_sample(&column(last, j), cdf)?;
                    p_min = p_min.min(ks.p_value);
                    detail.push(format!("({x}, {t}): p={:.4}", ks.p_value));
                }
            }
            (p_min, tol.alpha, p_min >= tol.alpha)
        }
        TestKind::Variance => {
            let sol = cfg.solution.as_ref().unwrap();
            let mut worst: f64 = 0.0;
            for (j, &(x, t)) in cfg.grid.iter().enumerate() {
                let set = sol.minimizers(x, t)?;
                if set.members.len() != 1 {
                    continue;
                }
                let want = sol.profile.clock(set.members[0]).abs();
                if want == 0.0 {
                    continue;
                }
                let var = summarize(&column(last, j))?.variance;
                worst = worst.max((var / want - 1.0).abs());
                detail.push(format!("({x}, {t}): {var:.4} vs {want:.4}"));
            }
            (worst, tol.variance_rel, worst <= tol.variance_rel)
        }
        TestKind::ScalingExponent => {
            let spreads: Vec<f64> = cfg
                .n_list
                .iter()
                .zip(all)
                .map(|(&n, outs)| Ok(summarize(&column(outs, 0))?.variance.sqrt() * (n as f64).sqrt()))
                .collect::<hamlab::Result<_>>()?;
            let (slope, se) = scaling_exponent(&cfg.n_list, &spreads)?;
            let [lo, hi] = tol.bdj_exponent_range;
            detail.push(format!("slope {slope:.4} ± {se:.4} in [{lo}, {hi}]"));
            (slope, hi, (lo..=hi).contains(&slope))
        }
        TestKind::SpreadDecrease => {
            let medians: Vec<f64> = all
                .iter()
                .map(|outs| {
                    let spreads: Vec<f64> = outs
                        .iter()
                        .map(|o| {
                            let hi = o.zeta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                            let lo = o.zeta.iter().copied().fold(f64::INFINITY, f64::min);
                            hi - lo
                        })
                        .collect();
                    median(&spreads)
                })
                .collect::<hamlab::Result<_>>()?;
            let worst = medians.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            detail.push(format!("median spreads {medians:.4?}"));
            (worst, 1.0, worst < 1.0)
        }
    };
    Ok(Verdict {
        name: kind.name().to_string(),
        statistic,
        threshold,
        pass,
        retried: false,
        detail: format!("{}; n={n_last}", detail.join(", ")),
    })
}

pub fn write_csv<W: Write>(mut w: W, cfg: &ScenarioConfig, all: &[Vec<ReplicaOut>]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (&n, outs) in cfg.n_list.iter().zip(all) {
        for (r, o) in outs.iter().enumerate() {
            for (j, &(x, t)) in cfg.grid.iter().enumerate() {
                let argmin = o.argmins[j].map(fmt12).unwrap_or_default();
                writeln!(
                    w,
                    "{},{n},{r},{},{},{},{argmin}",
                    cfg.scenario.name(),
                    fmt12(x),
                    fmt12(t),
                    fmt12(o.zeta[j])
                )?;
            }
        }
    }
    Ok(())
}

/// Writes `samples.csv` and `report.json` into the output directory.
pub fn write_outputs(cfg: &ScenarioConfig, report: &RunReport, all: &[Vec<ReplicaOut>]) -> std::io::Result<()> {
    std::fs::create_dir_all(&cfg.output_path)?;
    let mut csv = BufWriter::new(File::create(cfg.output_path.join("samples.csv"))?);
    write_csv(&mut csv, cfg, all)?;
    csv.flush()?;
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    std::fs::write(cfg.output_path.join("report.json"), json + "\n")
}

pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut s = String::new();
    for v in verdicts {
        s.push_str(&hamlab::acceptance::verdict_line(v));
        s.push('\n');
    }
    s
}
