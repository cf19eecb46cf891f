use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use vfhand::demogen::{CollectConfig, DomainTag};
use vfhand::dpol::CoTrainConfig;
use vfhand::eval::{ExperimentConfig, RunManifest};
use vfhand::rl::TrainConfig;
use vfhand::task::{DomainKind, DomainParams, TaskConfig};

/// Everything a command may need. Every field has a default, so a config
/// file only lists what it changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub shape: String,
    /// Hand, reward, episode and goal-region settings. Its `domain` is
    /// replaced by `sim_domain` or `real_domain` as each command requires.
    pub task: TaskConfig,
    pub sim_domain: DomainParams,
    pub real_domain: DomainParams,
    pub rl: TrainConfig,
    pub collect: CollectConfig,
    pub cotrain: CoTrainConfig,
    pub eval: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shape: "cube".into(),
            task: TaskConfig::default(),
            sim_domain: DomainParams::new(DomainKind::RandomizedSim),
            real_domain: DomainParams::new(DomainKind::SurrogateReal),
            rl: TrainConfig::desk(),
            collect: CollectConfig::default(),
            cotrain: CoTrainConfig::desk(),
            eval: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, or the resolved config of a run manifest when
    /// the file is JSON.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
            return serde_json::from_value(m.config).context("manifest config");
        }
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.sim_domain.kind != DomainKind::RandomizedSim {
            bail!("sim_domain must be of kind randomized_sim");
        }
        if self.real_domain.kind != DomainKind::SurrogateReal {
            bail!("real_domain must be of kind surrogate_real");
        }
        self.rl.validate()?;
        self.cotrain.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn domain(&self, kind: DomainKind) -> DomainParams {
        match kind {
            DomainKind::RandomizedSim => self.sim_domain.clone(),
            DomainKind::SurrogateReal => self.real_domain.clone(),
            DomainKind::NominalSim => DomainParams::new(DomainKind::NominalSim),
        }
    }

    pub fn task_in(&self, kind: DomainKind) -> TaskConfig {
        TaskConfig { domain: self.domain(kind), ..self.task.clone() }
    }

    pub fn task_for(&self, tag: DomainTag) -> TaskConfig {
        self.task_in(tag.required_domain())
    }

    /// Base task for evaluation in the configured domain.
    pub fn eval_task(&self) -> TaskConfig {
        self.task_in(self.eval.domain)
    }
}
