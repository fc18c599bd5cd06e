use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use flowroutes::datagen::ScenarioConfig;
use flowroutes::eval::DEFAULT_TOP_N;
use flowroutes::reconstruct::DEFAULT_TOL;

pub const MANIFEST_FILE: &str = "manifest.json";

pub const METHODS: [&str; 6] = ["fr", "efr", "wfr", "wefr", "mcmcf", "gmcf"];

/// Run parameters as given by a config file and/or flags. Every field is
/// optional here; [`Params::resolve`] fills defaults per subcommand.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,

    /// Scenario bundle directory (input of reconstruct/evaluate)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PathBuf>,
    /// Evaluate this reconstruction file instead of running a method
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<PathBuf>,
    /// Road network JSON to generate on instead of a grid
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    /// Grid spacing in meters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Number of ground-truth routes
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routes: Option<usize>,
    /// Upper bound of the uniform edge-weight perturbation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    /// One of fr, efr, wfr, wefr, mcmcf, gmcf
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Frechet distance threshold in meters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Edges per trajectory for efr/wefr
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Trajectory sampling rate in (0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Solver tolerance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Routes considered by realism and coverage
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel_trials: Option<bool>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        Params { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Params {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Params) -> Params {
        overlay!(
            self, base, command, version, bundle, reconstruction, network, rows, cols, spacing, routes, gamma,
            method, epsilon, iterations, k, alpha, seed, tol, top_n, out, trials, parallel_trials
        )
    }

    /// Fills defaults for `command` and checks ranges. Errors are usage errors.
    pub fn resolve(self, command: &str) -> anyhow::Result<Params> {
        if let Some(c) = &self.command {
            if c != command {
                bail!("config was written by `{c}`, not `{command}`");
            }
        }
        let scenario = ScenarioConfig::default();
        let mut p = Params {
            command: Some(command.to_owned()),
            version: Some(env!("CARGO_PKG_VERSION").to_owned()),
            ..Params::default()
        };
        let Some(out) = self.out.clone() else { bail!("--out is required") };
        p.out = Some(out);
        p.seed = Some(self.seed.unwrap_or(scenario.seed));
        match command {
            "generate" => {
                if self.network.is_some() {
                    p.network = self.network.clone();
                } else {
                    p.rows = Some(self.rows.unwrap_or(20));
                    p.cols = Some(self.cols.unwrap_or(20));
                    p.spacing = Some(self.spacing.unwrap_or(100.0));
                }
                p.routes = Some(self.routes.unwrap_or(scenario.n_routes));
                p.gamma = Some(self.gamma.unwrap_or(scenario.gamma));
                p.alpha = Some(self.alpha.unwrap_or(scenario.alpha));
                p.scenario().validate()?;
                if p.rows == Some(0) || p.cols == Some(0) || p.spacing.is_some_and(|s| !s.is_finite() || s <= 0.0) {
                    bail!("grid needs positive rows, cols and spacing");
                }
            }
            "reconstruct" | "evaluate" => {
                let Some(bundle) = self.bundle.clone() else { bail!("--bundle is required") };
                if self.out.as_deref() == Some(bundle.as_path()) {
                    bail!("--out must differ from --bundle");
                }
                p.bundle = Some(bundle);
                p.top_n = Some(self.top_n.unwrap_or(DEFAULT_TOP_N));
                if command == "evaluate" {
                    p.trials = Some(self.trials.unwrap_or(1));
                    p.alpha = Some(self.alpha.unwrap_or(1.0));
                    p.parallel_trials = Some(self.parallel_trials.unwrap_or(false));
                    if p.trials == Some(0) {
                        bail!("--trials must be at least 1");
                    }
                    if !p.alpha.is_some_and(|a| a > 0.0 && a <= 1.0) {
                        bail!("--alpha must lie in (0, 1]");
                    }
                    if let Some(r) = &self.reconstruction {
                        p.reconstruction = Some(r.clone());
                        return Ok(p);
                    }
                }
                let method = self.method.clone().unwrap_or_else(|| "wefr".into()).to_ascii_lowercase();
                if !METHODS.contains(&method.as_str()) {
                    bail!("unknown method {method:?}, expected one of {}", METHODS.join(", "));
                }
                let frechet = !matches!(method.as_str(), "mcmcf" | "gmcf");
                if self.k.is_some() && !matches!(method.as_str(), "efr" | "wefr") {
                    log::warn!("--k is ignored by method {method}");
                }
                if self.iterations.is_some() && !frechet {
                    log::warn!("--iterations is ignored by method {method}");
                }
                p.epsilon = Some(self.epsilon.unwrap_or(100.0));
                p.tol = Some(self.tol.unwrap_or(DEFAULT_TOL));
                if frechet {
                    p.iterations = Some(self.iterations.unwrap_or(8));
                }
                if matches!(method.as_str(), "efr" | "wefr") {
                    p.k = Some(self.k.unwrap_or(2));
                }
                p.method = Some(method);
                if !p.epsilon.is_some_and(|e| e > 0.0 && e.is_finite()) {
                    bail!("--epsilon must be positive");
                }
                if !p.tol.is_some_and(|t| t > 0.0) {
                    bail!("--tol must be positive");
                }
                if p.iterations == Some(0) {
                    bail!("--iterations must be at least 1");
                }
            }
            _ => unreachable!("unknown subcommand"),
        }
        Ok(p)
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            n_routes: self.routes.unwrap_or_default(),
            gamma: self.gamma.unwrap_or_default(),
            alpha: self.alpha.unwrap_or(1.0),
            seed: self.seed.unwrap_or_default(),
        }
    }

    pub fn out(&self) -> &Path {
        self.out.as_deref().expect("resolved")
    }

    pub fn bundle(&self) -> &Path {
        self.bundle.as_deref().expect("resolved")
    }

    pub fn write_manifest(&self) -> anyhow::Result<()> {
        let path = self.out().join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Params { epsilon: Some(50.0), k: Some(10), ..Default::default() };
        let flags = Params { epsilon: Some(70.0), ..Default::default() };
        let p = flags.over(file);
        assert_eq!(p.epsilon, Some(70.0));
        assert_eq!(p.k, Some(10));
    }

    #[test]
    fn resolved_manifest_round_trips() {
        let p = Params {
            out: Some("o".into()),
            bundle: Some("b".into()),
            ..Default::default()
        }
        .resolve("reconstruct")
        .unwrap();
        let back: Params = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back.clone().resolve("reconstruct").unwrap(), p);
        assert_eq!(p.method.as_deref(), Some("wefr"));
        assert!(back.resolve("generate").is_err());
    }

    #[test]
    fn bad_values_rejected() {
        let base = || Params { out: Some("o".into()), bundle: Some("b".into()), ..Default::default() };
        assert!(Params { method: Some("xyz".into()), ..base() }.resolve("reconstruct").is_err());
        assert!(Params { epsilon: Some(-1.0), ..base() }.resolve("reconstruct").is_err());
        assert!(Params { alpha: Some(0.0), ..base() }.resolve("evaluate").is_err());
        assert!(Params { out: None, ..base() }.resolve("evaluate").is_err());
    }
}
