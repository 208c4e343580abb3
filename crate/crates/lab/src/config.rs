//! Experiment configuration in TOML.
//!
//! Every field has a default, so an empty file (or none at all) is a valid
//! config. The resolved config, with every default filled in, is written to
//! each run directory as `config.toml`.

use std::path::Path;

use kgstitch_core::align::AatConfig;
use kgstitch_core::kg::RelationSet;
use kgstitch_core::prune::PruneConfig;
use kgstitch_core::train::{Activation, SweepAxis, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Generate,
    Train,
    Sweep,
    Align,
    Certify,
    Prune,
    Figures,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::Align => "align",
            Command::Certify => "certify",
            Command::Prune => "prune",
            Command::Figures => "figures",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub command: Command,
    /// Base seed. Training seed `k` of a batch is `seed + k`.
    pub seed: u64,
    /// Parent directory of run directories.
    pub out: String,
    /// Run files or directories the command reads.
    pub inputs: Vec<String>,
    pub tree: TreeSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub align: AlignSection,
    pub certify: CertifySection,
    pub prune: PruneSection,
    pub figures: FiguresSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            command: Command::Train,
            seed: 0,
            out: "runs".into(),
            inputs: Vec::new(),
            tree: TreeSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            align: AlignSection::default(),
            certify: CertifySection::default(),
            prune: PruneSection::default(),
            figures: FiguresSection::default(),
        }
    }
}

/// Where the family tree comes from and which relations are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeSection {
    /// `synthetic`, a named tree (`kennedy`, `nehru_gandhi`, `rothschild`)
    /// or a path to a facts document.
    pub source: String,
    /// `descendant_only` or `full_18`.
    pub relations: String,
    pub generations: usize,
    pub max_children: usize,
    pub spouse_probability: f64,
    /// First synthetic seed tried; later ones are tried until the size fits.
    pub tree_seed: u64,
    pub min_persons: usize,
    pub max_persons: usize,
}

impl Default for TreeSection {
    fn default() -> Self {
        TreeSection {
            source: "synthetic".into(),
            relations: "descendant_only".into(),
            generations: 4,
            max_children: 3,
            spouse_probability: 0.5,
            tree_seed: 0,
            min_persons: 28,
            max_persons: 32,
        }
    }
}

impl TreeSection {
    pub fn relation_set(&self) -> LabResult<RelationSet> {
        Ok(self.relations.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub d: usize,
    /// Hidden layers.
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub steps: usize,
    pub split_seed: u64,
    pub train_fraction: f64,
    /// `tanh` or `relu`.
    pub activation: String,
    pub init_sd: f64,
    /// Number of seeds trained by `train`.
    pub seeds: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection::from_config(&TrainConfig::default())
    }
}

impl TrainSection {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        TrainSection {
            d: cfg.d,
            depth: cfg.depth,
            width: cfg.width,
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            steps: cfg.steps,
            split_seed: cfg.split_seed,
            train_fraction: cfg.train_fraction,
            activation: cfg.activation.as_str().into(),
            init_sd: cfg.init_sd,
            seeds: 1,
        }
    }

    pub fn to_config(&self, seed: u64) -> LabResult<TrainConfig> {
        let cfg = TrainConfig {
            d: self.d,
            depth: self.depth,
            width: self.width,
            lr: self.lr,
            weight_decay: self.weight_decay,
            steps: self.steps,
            seed,
            split_seed: self.split_seed,
            train_fraction: self.train_fraction,
            activation: self.activation.parse::<Activation>()?,
            init_sd: self.init_sd,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `width`, `depth` or `weight_decay`.
    pub axis: String,
    pub grid: Vec<f64>,
    pub repeats: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: "width".into(),
            grid: vec![2.0, 8.0, 50.0, 400.0, 3200.0],
            repeats: 10,
        }
    }
}

impl SweepSection {
    pub fn axis(&self) -> LabResult<SweepAxis> {
        Ok(self.axis.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    /// `matrix` (pairwise ES and CKA over all inputs) or `baseline` (ES of
    /// the second input through the first against random representations).
    pub mode: String,
    pub epsilon: f64,
    pub steps: usize,
    pub lr: f64,
    pub restarts: usize,
    pub baseline_trials: usize,
    /// `all` (every triple of the graph) or `test` (the first input's
    /// held-out split).
    pub triples: String,
}

impl Default for AlignSection {
    fn default() -> Self {
        let aat = AatConfig::default();
        AlignSection {
            mode: "matrix".into(),
            epsilon: 0.0,
            steps: aat.steps,
            lr: aat.lr,
            restarts: aat.restarts,
            baseline_trials: 50,
            triples: "all".into(),
        }
    }
}

impl AlignSection {
    pub fn aat(&self, seed: u64) -> LabResult<AatConfig> {
        let cfg = AatConfig {
            steps: self.steps,
            lr: self.lr,
            restarts: self.restarts,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    /// Relation reproduced by the cone reference.
    pub relation: String,
    pub epsilon: f64,
    /// Reference accuracy counted as a pass in the summary table.
    pub pass_accuracy: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        CertifySection {
            relation: "descendant".into(),
            epsilon: kgstitch_core::align::DEFAULT_REFERENCE_EPSILON,
            pass_accuracy: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneSection {
    /// Root object id; empty means the first object.
    pub root: String,
    pub threshold: f64,
    pub positive_only: bool,
    /// Relations the traversal follows; empty means all.
    pub traversal: Vec<String>,
    /// `exact`, `noisy` or `script`.
    pub oracle: String,
    /// Flip probability of the noisy oracle.
    pub flip_probability: f64,
    /// Answer-table document for the scripted oracle.
    pub script: String,
}

impl Default for PruneSection {
    fn default() -> Self {
        let core = PruneConfig::default();
        PruneSection {
            root: String::new(),
            threshold: core.threshold,
            positive_only: core.positive_only,
            traversal: core.traversal,
            oracle: "exact".into(),
            flip_probability: 0.0,
            script: String::new(),
        }
    }
}

impl PruneSection {
    pub fn to_config(&self) -> PruneConfig {
        PruneConfig {
            threshold: self.threshold,
            positive_only: self.positive_only,
            traversal: self.traversal.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiguresSection {
    /// `scatter` (embeddings with parent links) or `pca` (first two
    /// principal components colored by an attribute).
    pub kind: String,
    /// Reduce to two dimensions with PCA before drawing a scatter.
    pub pca: bool,
    /// `gender` or `generation`.
    pub color: String,
}

impl Default for FiguresSection {
    fn default() -> Self {
        FiguresSection {
            kind: "scatter".into(),
            pca: false,
            color: "generation".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(LabError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The resolved config with every field spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.train.to_config(0).unwrap(), TrainConfig::default());
    }

    #[test]
    fn resolved_config_round_trips_and_is_total() {
        let mut cfg = ExperimentConfig {
            command: Command::Sweep,
            ..ExperimentConfig::default()
        };
        cfg.sweep.grid = vec![1.0, 2.5];
        let text = cfg.to_toml();
        for key in [
            "version",
            "seed",
            "[tree]",
            "[train]",
            "[sweep]",
            "[align]",
            "[prune]",
            "width",
            "threshold",
        ] {
            assert!(text.contains(key), "{key} missing from\n{text}");
        }
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_version_and_unknown_keys() {
        assert!(matches!(
            ExperimentConfig::from_toml("version = 7"),
            Err(LabError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[train]\nwidht = 3"),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut t = TrainSection {
            activation: "gelu".into(),
            ..TrainSection::default()
        };
        assert!(matches!(t.to_config(0), Err(LabError::Config(_))));
        t.activation = "tanh".into();
        t.train_fraction = 1.5;
        assert!(matches!(t.to_config(0), Err(LabError::Config(_))));
    }
}
