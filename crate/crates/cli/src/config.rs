//! Run configuration: one JSON document drives every subcommand.

use serde::{Deserialize, Serialize};

use ptf_core::adversary::CorruptionSpec;
use ptf_core::learner::LearnerConfig;
use ptf_core::poly::HermitePoly;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub truth: TruthConfig,
    pub data: DataConfig,
    pub corruption: CorruptionSpec,
    pub learner: LearnerSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub bench: BenchSection,
    pub output_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub n: usize,
    pub d: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub m_train: usize,
    pub m_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub k_exponent: Option<u32>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub depth_budget: Option<u32>,
    #[serde(default)]
    pub guess_grid_factor: Option<f64>,
    #[serde(default)]
    pub guess_grid_len: Option<usize>,
    #[serde(default)]
    pub validation_scale: Option<f64>,
    #[serde(default)]
    pub region_sample_floor: Option<usize>,
    #[serde(default)]
    pub region_mass_floor: Option<f64>,
    #[serde(default)]
    pub oracle_budget: Option<usize>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub max_cells: Option<usize>,
    #[serde(default)]
    pub partition_n_mc: Option<usize>,
    #[serde(default)]
    pub max_rewrites: Option<usize>,
}

impl LearnerSection {
    pub fn build(&self) -> LearnerConfig {
        let mut c = LearnerConfig::new(self.eps, self.seed);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            k_exponent,
            eta,
            depth_budget,
            guess_grid_factor,
            guess_grid_len,
            validation_scale,
            region_sample_floor,
            region_mass_floor,
            oracle_budget,
            max_iters,
            max_cells,
            partition_n_mc,
            max_rewrites
        );
        c
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default)]
    pub anticoncentration: Vec<AnticoncentrationProbeConfig>,
    #[serde(default)]
    pub jacobian: Option<JacobianProbeConfig>,
    #[serde(default)]
    pub figure1: Option<Figure1Config>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnticoncentrationProbeConfig {
    pub name: String,
    pub poly: HermitePoly,
    pub ts: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
    /// `true` probes the small-ball side, `false` the tail side.
    #[serde(default = "default_true")]
    pub small_ball: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobianProbeConfig {
    pub polys: Vec<HermitePoly>,
    pub delta: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Config {
    pub eps: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default)]
    pub opts: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig, crate::CliError> {
        let text = std::fs::read_to_string(path).map_err(|_| crate::CliError::FileMissing {
            path: path.display().to_string(),
        })?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| crate::CliError::ConfigInvalid {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        config.validate(path)?;
        Ok(config)
    }

    pub fn validate(&self, path: &std::path::Path) -> Result<(), crate::CliError> {
        let bad = |detail: &str| {
            Err(crate::CliError::ConfigInvalid {
                path: path.display().to_string(),
                detail: detail.to_string(),
            })
        };
        if self.truth.n == 0 || self.truth.d == 0 {
            return bad("truth.n and truth.d must be positive");
        }
        if self.data.m_train == 0 {
            return bad("data.m_train must be positive");
        }
        if !(0.0..0.5).contains(&self.corruption.opt) {
            return bad("corruption.opt must lie in [0, 1/2)");
        }
        if !(0.0..1.0).contains(&self.learner.eps) || self.learner.eps == 0.0 {
            return bad("learner.eps must lie in (0, 1)");
        }
        if let Some(eta) = self.learner.eta {
            if !(0.0..1.0).contains(&eta) || eta == 0.0 {
                return bad("learner.eta must lie in (0, 1)");
            }
        }
        for opt in &self.bench.opts {
            if !(0.0..0.5).contains(opt) {
                return bad("bench.opts entries must lie in [0, 1/2)");
            }
        }
        Ok(())
    }
}
