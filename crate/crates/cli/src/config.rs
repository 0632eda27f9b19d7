//! Scenario and verification configs: TOML files whose values can be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use hamlab::acceptance::{bundle, Criterion, Tolerances, DEFAULT_SEED};
use hamlab::fluctuation_lab::limit_cdf;
use hamlab::macro_solver::{InitialProfile, MacroSolution};
use serde::{Deserialize, Serialize};

/// A config problem; the message names the offending field or file position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Equilibrium,
    Shock,
    Rarefaction,
    BdjStep,
    Tagged,
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Equilibrium => "equilibrium",
            Scenario::Shock => "shock",
            Scenario::Rarefaction => "rarefaction",
            Scenario::BdjStep => "bdj_step",
            Scenario::Tagged => "tagged",
            Scenario::Custom => "custom",
        }
    }

    /// Breakpoints and densities used when the config gives none.
    fn default_profile(self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            Scenario::Equilibrium | Scenario::Tagged => Some((vec![], vec![1.0])),
            Scenario::Shock => Some((vec![0.0], vec![1.0, 0.0])),
            Scenario::Rarefaction => Some((vec![0.0], vec![0.0, 1.0])),
            Scenario::BdjStep | Scenario::Custom => None,
        }
    }

    fn default_xs(self) -> &'static [f64] {
        match self {
            Scenario::Equilibrium => &[-0.5, 0.0, 0.5, 1.0],
            Scenario::Shock => &[-0.5, 0.0, 0.5, 1.0, 1.5],
            Scenario::Rarefaction => &[0.4, 0.7, 1.0, 1.3, 1.6],
            Scenario::BdjStep => &[1.0],
            Scenario::Tagged => &[0.0],
            Scenario::Custom => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Independent exponential sticks; zero densities stack particles.
    LocalEquilibrium,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// KS of `ζ_n` against the closed-form limit law, largest `n`.
    LimitLaw,
    /// `Var ζ_n` against `|σ(y)|` at single-minimizer points, largest `n`.
    Variance,
    /// Fitted exponent of `std(z - n u)` in `n` at the first grid point.
    ScalingExponent,
    /// Median spread of `ζ_n` across the grid decreases in `n`.
    SpreadDecrease,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::LimitLaw => "limit_law",
            TestKind::Variance => "variance",
            TestKind::ScalingExponent => "scaling_exponent",
            TestKind::SpreadDecrease => "spread_decrease",
        }
    }
}

/// A scenario file as written.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: Option<Scenario>,
    pub breakpoints: Option<Vec<f64>>,
    pub densities: Option<Vec<f64>>,
    pub n_list: Option<Vec<u64>>,
    pub replicas: Option<usize>,
    pub grid: Option<Vec<[f64; 2]>>,
    pub t_horizon: Option<f64>,
    pub t_steps: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub initial: Option<InitialKind>,
    pub argmins: Option<bool>,
    pub guard: Option<i64>,
    pub margin: Option<f64>,
    pub tests: Option<Vec<TestKind>>,
    /// `[center, half_width, t]` bump test functions for `ξ_n`.
    pub xi_tests: Option<Vec<[f64; 3]>>,
    pub tolerances: Option<Tolerances>,
}

/// A verification file as written.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub bundle: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub tolerances: Option<Tolerances>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Value of `HAMLAB_SEED`, used when neither flag nor file sets a seed.
    pub env_seed: Option<String>,
}

impl Overrides {
    fn seed(&self, file: Option<u64>) -> Result<u64, ConfigError> {
        if let Some(s) = self.seed.or(file) {
            return Ok(s);
        }
        match &self.env_seed {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("HAMLAB_SEED is not an unsigned integer: {v:?}"))),
            None => Ok(DEFAULT_SEED),
        }
    }

    fn workers(&self, file: Option<usize>) -> Result<usize, ConfigError> {
        let w = self.workers.or(file).unwrap_or(1);
        if w == 0 {
            return err("workers: must be at least 1");
        }
        Ok(w)
    }
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

pub fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
}

/// A validated scenario with every default filled in.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// `None` for step data, which has no finite initial profile.
    pub solution: Option<MacroSolution>,
    pub n_list: Vec<u64>,
    pub replicas: usize,
    pub grid: Vec<(f64, f64)>,
    pub seed: u64,
    pub workers: usize,
    pub output_path: PathBuf,
    pub initial: InitialKind,
    pub argmins: bool,
    pub guard: i64,
    pub margin: f64,
    pub tests: Vec<TestKind>,
    pub xi_tests: Vec<[f64; 3]>,
    pub tolerances: Tolerances,
}

fn positive_finite(name: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v > 0.0) {
        return err(format!("{name}: must be positive and finite, got {v}"));
    }
    Ok(())
}

impl ScenarioFile {
    pub fn resolve(self, o: &Overrides) -> Result<ScenarioConfig, ConfigError> {
        let Some(scenario) = self.scenario else {
            return err("scenario: missing (one of equilibrium, shock, rarefaction, bdj_step, tagged, custom)");
        };
        let bdj = scenario == Scenario::BdjStep;
        let solution = match (self.breakpoints, self.densities, scenario.default_profile()) {
            (Some(b), Some(d), _) if !bdj => Some(
                InitialProfile::new(b, d)
                    .map(MacroSolution::new)
                    .map_err(|e| ConfigError(format!("breakpoints/densities: {e}")))?,
            ),
            (None, None, Some((b, d))) => Some(MacroSolution::new(InitialProfile::new(b, d).unwrap())),
            (None, None, None) if bdj => None,
            (None, None, None) => return err("breakpoints/densities: required for the custom scenario"),
            _ if bdj => return err("breakpoints/densities: bdj_step uses fixed step data"),
            _ => return err("breakpoints/densities: give both or neither"),
        };
        let n_list = self
            .n_list
            .unwrap_or_else(|| vec![if scenario == Scenario::Shock { 2000 } else { 1000 }]);
        if n_list.is_empty() || n_list.contains(&0) {
            return err(format!("n_list: needs positive entries, got {n_list:?}"));
        }
        let replicas = self
            .replicas
            .unwrap_or(if scenario == Scenario::Shock { 2000 } else { 100 });
        if replicas == 0 {
            return err("replicas: must be at least 1");
        }
        let t_horizon = self.t_horizon.unwrap_or(1.0);
        positive_finite("t_horizon", t_horizon)?;
        let grid: Vec<(f64, f64)> = match self.grid {
            Some(g) => g.into_iter().map(|[x, t]| (x, t)).collect(),
            None if scenario == Scenario::Tagged => {
                let steps = self.t_steps.unwrap_or(10);
                if steps == 0 {
                    return err("t_steps: must be at least 1");
                }
                let times = (1..=steps).map(|j| t_horizon * j as f64 / steps as f64);
                scenario
                    .default_xs()
                    .iter()
                    .flat_map(|&x| times.clone().map(move |t| (x, t)))
                    .collect()
            }
            None => scenario.default_xs().iter().map(|&x| (x, t_horizon)).collect(),
        };
        if grid.is_empty() {
            return err("grid: at least one (x, t) point is required");
        }
        for (j, &(x, t)) in grid.iter().enumerate() {
            if !x.is_finite() || !(t.is_finite() && t >= 0.0) {
                return err(format!("grid[{j}]: need finite x and t >= 0, got ({x}, {t})"));
            }
            if bdj && t == 0.0 {
                return err(format!("grid[{j}]: bdj_step needs t > 0"));
            }
        }
        let xi_tests = self.xi_tests.unwrap_or_default();
        if bdj && !xi_tests.is_empty() {
            return err("xi_tests: not available for bdj_step");
        }
        for (j, &[c, w, t]) in xi_tests.iter().enumerate() {
            if !c.is_finite() || !(w.is_finite() && w > 0.0) || !(t.is_finite() && t >= 0.0) {
                return err(format!("xi_tests[{j}]: need [center, half_width > 0, t >= 0], got {:?}", [c, w, t]));
            }
        }
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances
            .validate()
            .map_err(|e| ConfigError(format!("tolerances: {e}")))?;
        let guard = self.guard.unwrap_or(tolerances.guard);
        if guard < 0 {
            return err(format!("guard: must be nonnegative, got {guard}"));
        }
        let margin = self.margin.unwrap_or(tolerances.margin);
        if !(margin.is_finite() && margin >= 0.0) {
            return err(format!("margin: must be nonnegative, got {margin}"));
        }
        let tests = self.tests.unwrap_or_else(|| match scenario {
            Scenario::Shock => vec![TestKind::LimitLaw],
            _ => vec![],
        });
        for (j, t) in tests.iter().enumerate() {
            if tests[..j].contains(t) {
                return err(format!("tests: {} listed twice", t.name()));
            }
        }
        if let Some(sol) = &solution {
            for &(x, t) in &grid {
                sol.u_value(x, t)
                    .map_err(|e| ConfigError(format!("grid: ({x}, {t}) outside the solvable region: {e}")))?;
            }
        }
        for t in &tests {
            match t {
                TestKind::LimitLaw | TestKind::Variance => {
                    let Some(sol) = &solution else {
                        return err(format!("tests: {} needs a finite initial profile", t.name()));
                    };
                    if !grid.iter().any(|&(x, t)| limit_cdf(sol, x, t).is_ok()) {
                        return err(format!("tests: {} has no grid point with a closed-form law", t.name()));
                    }
                }
                TestKind::ScalingExponent if n_list.len() < 3 => {
                    return err("tests: scaling_exponent needs at least three entries in n_list");
                }
                TestKind::SpreadDecrease if n_list.len() < 2 || grid.len() < 2 => {
                    return err("tests: spread_decrease needs two n values and two grid points");
                }
                _ => {}
            }
            if replicas < 2 {
                return err(format!("tests: {} needs at least two replicas", t.name()));
            }
        }
        Ok(ScenarioConfig {
            scenario,
            solution,
            n_list,
            replicas,
            grid,
            seed: o.seed(self.seed)?,
            workers: o.workers(self.workers)?,
            output_path: o
                .out
                .clone()
                .or(self.output_path)
                .unwrap_or_else(|| PathBuf::from("hamlab-out")),
            initial: self.initial.unwrap_or(InitialKind::LocalEquilibrium),
            argmins: self.argmins.unwrap_or(scenario == Scenario::Tagged),
            guard,
            margin,
            tests,
            xi_tests,
            tolerances,
        })
    }
}

/// A validated verification request.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub bundle: String,
    pub criteria: &'static [Criterion],
    pub seed: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
    pub tolerances: Tolerances,
}

impl VerifyFile {
    pub fn resolve(self, bundle_flag: Option<String>, o: &Overrides) -> Result<VerifyConfig, ConfigError> {
        let Some(name) = bundle_flag.or(self.bundle) else {
            return err("bundle: missing");
        };
        let Some(criteria) = bundle(&name) else {
            let known: Vec<&str> = hamlab::acceptance::BUNDLES.iter().map(|b| b.0).collect();
            return err(format!("bundle: unknown name {name:?}; known: {}", known.join(", ")));
        };
        let tolerances = self.tolerances.unwrap_or_default();
        tolerances
            .validate()
            .map_err(|e| ConfigError(format!("tolerances: {e}")))?;
        Ok(VerifyConfig {
            bundle: name,
            criteria,
            seed: o.seed(self.seed)?,
            workers: o.workers(self.workers)?,
            output_path: o.out.clone().or(self.output_path),
            tolerances,
        })
    }
}
