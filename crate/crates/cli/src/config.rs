use std::fs;
use std::path::{Path, PathBuf};

use kdsta::analysis::log_grid;
use kdsta::oscillator::{DEFAULT_FINGERPRINT_DIM, DEFAULT_FOCK_DIM};
use kdsta::quantum_core::DEFAULT_STEPS;
use kdsta::qubit::{DEFAULT_PHASE_POINTS, DEFAULT_U_MAX, DEFAULT_U_POINTS};
use kdsta::{ErrorKind, ProtocolSpec, System};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;

/// Shot-noise settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotsConfig {
    /// Shots per branch in the Monte Carlo validation.
    pub n_br: u64,
    pub repetitions: usize,
    /// Target signal-to-noise ratios of the budget table.
    pub r_values: Vec<f64>,
}

impl Default for ShotsConfig {
    fn default() -> Self {
        Self {
            n_br: 100_000,
            repetitions: 200,
            r_values: vec![1.0, 3.0],
        }
    }
}

/// Fully resolved parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub oscillator: ProtocolSpec,
    pub qubit: ProtocolSpec,
    /// Error model swept by every command.
    pub error_kind: ErrorKind,
    pub epsilons: Vec<f64>,
    /// Amplitude used for fingerprints, oracle checks and the Monte Carlo run.
    pub fingerprint_epsilon: f64,
    pub phase_points: usize,
    pub u_points: usize,
    pub u_max: f64,
    pub steps: usize,
    /// Fock truncation of the propagation oracle.
    pub dim: usize,
    pub fingerprint_dim: usize,
    /// Dephasing exponents `Γτ` for the robustness and budget tables.
    pub gamma_tau_values: Vec<f64>,
    pub seed: u64,
    pub shots: ShotsConfig,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            oscillator: ProtocolSpec::benchmark_oscillator(),
            qubit: ProtocolSpec::benchmark_qubit(),
            error_kind: ErrorKind::MissingCd,
            epsilons: log_grid(0.01, 0.1, 10).expect("valid default grid"),
            fingerprint_epsilon: 0.05,
            phase_points: DEFAULT_PHASE_POINTS,
            u_points: DEFAULT_U_POINTS,
            u_max: DEFAULT_U_MAX,
            steps: DEFAULT_STEPS,
            dim: DEFAULT_FOCK_DIM,
            fingerprint_dim: DEFAULT_FINGERPRINT_DIM,
            gamma_tau_values: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            seed: DEFAULT_SEED,
            shots: ShotsConfig::default(),
            svg: false,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub dim: Option<usize>,
    pub svg: bool,
}

impl RunConfig {
    /// Defaults, then the file at `path` (a config or a previous manifest),
    /// then flags.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(steps) = overrides.steps {
            cfg.steps = steps;
        }
        if let Some(dim) = overrides.dim {
            cfg.dim = dim;
        }
        cfg.svg |= overrides.svg;
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid JSON in {}: {e}", path.display())))?;
        // A manifest embeds the resolved config under "config".
        if let Some(inner) = value.get_mut("config").filter(|_| value_is_manifest(&text)) {
            value = inner.take();
        }
        serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !matches!(self.oscillator.system, System::Oscillator { .. }) {
            return usage("`oscillator` must describe an oscillator protocol".into());
        }
        if !matches!(self.qubit.system, System::Qubit { .. }) {
            return usage("`qubit` must describe a qubit protocol".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
            return usage("`epsilons` must be a nonempty list of finite, nonnegative amplitudes".into());
        }
        if self.epsilons.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("`epsilons` must be strictly increasing".into());
        }
        if !(self.fingerprint_epsilon >= 0.0) {
            return usage("`fingerprint_epsilon` must be nonnegative".into());
        }
        if self.phase_points < 3 || self.u_points < 2 || !(self.u_max > 0.0) {
            return usage("need at least 3 phase points, 2 u points and u_max > 0".into());
        }
        if self.steps == 0 {
            return usage("`steps` must be positive".into());
        }
        if self.dim < 4 || self.fingerprint_dim < 4 {
            return usage("Fock truncations must keep at least 4 levels".into());
        }
        if self.gamma_tau_values.iter().any(|&g| !(g >= 0.0)) {
            return usage("`gamma_tau_values` must be nonnegative".into());
        }
        if self.shots.n_br == 0 || self.shots.repetitions < 2 {
            return usage("shots need n_br >= 1 and at least 2 repetitions".into());
        }
        if self.shots.r_values.iter().any(|&r| !(r > 0.0)) {
            return usage("`shots.r_values` must be positive".into());
        }
        // Every swept protocol must be constructible.
        for &e in self.epsilons.iter().chain([&self.fingerprint_epsilon]) {
            self.oscillator.with_error(self.error_kind, e)?;
            self.qubit.with_error(self.error_kind, e)?;
        }
        Ok(())
    }

    /// Positive amplitudes, which are the ones entering fits.
    pub fn positive_epsilons(&self) -> Vec<f64> {
        self.epsilons.iter().copied().filter(|&e| e > 0.0).collect()
    }
}

fn value_is_manifest(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("tool").and_then(|t| t.as_str().map(|s| s == crate::TOOL_NAME)))
        .unwrap_or(false)
}
