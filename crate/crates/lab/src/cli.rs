//! Command-line front end. Flags override the config file, which overrides
//! the built-in defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::runner::{execute, Outcome};

#[derive(Debug, Parser)]
#[command(
    name = "kgstitch",
    version,
    about = "Train, stitch and certify knowledge-graph representations"
)]
pub struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run directories.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Replace an existing run directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build a family tree and its knowledge graph.
    Generate(TreeArgs),
    /// Train one model per seed.
    Train {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Number of seeds, starting at --seed.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Train over a grid of one hyperparameter.
    Sweep {
        #[command(flatten)]
        tree: TreeArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// `width`, `depth` or `weight_decay`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Equivalence scores between runs.
    Align {
        /// Run directories or run.json files.
        runs: Vec<String>,
        /// Pairwise ES and CKA over all runs (default).
        #[arg(long, conflicts_with = "baseline")]
        matrix: bool,
        /// ES of the second run through the first against random representations.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Optimizer steps per AAT fit.
        #[arg(long)]
        aat_steps: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Score only the first run's held-out triples.
        #[arg(long)]
        test_only: bool,
    },
    /// Stitch runs into the cone reference and certify the result.
    Certify {
        /// Run directories, run.json files, or directories of run directories.
        runs: Vec<String>,
        #[arg(long)]
        relation: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        aat_steps: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Breadth-first pruning against a relation oracle.
    Prune {
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        /// `exact`, `noisy` or `script`.
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        flip_probability: Option<f64>,
        /// Answer-table document for `--oracle script`.
        #[arg(long)]
        script: Option<String>,
        #[arg(long)]
        positive_only: bool,
    },
    /// Draw a run's embeddings.
    Figures {
        run: String,
        /// `scatter` or `pca`.
        #[arg(long)]
        kind: Option<String>,
        /// Reduce to 2-D with PCA before drawing a scatter.
        #[arg(long)]
        pca: bool,
        /// `gender` or `generation`.
        #[arg(long)]
        color: Option<String>,
    },
}

#[derive(Debug, Args, Default)]
pub struct TreeArgs {
    /// `synthetic`, `kennedy`, `nehru_gandhi`, `rothschild` or a facts file.
    #[arg(long)]
    pub tree: Option<String>,
    /// `descendant_only` or `full_18`.
    #[arg(long)]
    pub relations: Option<String>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub max_children: Option<usize>,
    #[arg(long)]
    pub spouse_probability: Option<f64>,
    #[arg(long)]
    pub tree_seed: Option<u64>,
    #[arg(long)]
    pub min_persons: Option<usize>,
    #[arg(long)]
    pub max_persons: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub activation: Option<String>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TreeArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        let t = &mut cfg.tree;
        set(&mut t.source, self.tree);
        set(&mut t.relations, self.relations);
        set(&mut t.generations, self.generations);
        set(&mut t.max_children, self.max_children);
        set(&mut t.spouse_probability, self.spouse_probability);
        set(&mut t.tree_seed, self.tree_seed);
        set(&mut t.min_persons, self.min_persons);
        set(&mut t.max_persons, self.max_persons);
    }
}

impl TrainArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        let t = &mut cfg.train;
        set(&mut t.d, self.d);
        set(&mut t.depth, self.depth);
        set(&mut t.width, self.width);
        set(&mut t.lr, self.lr);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.steps, self.steps);
        set(&mut t.train_fraction, self.train_fraction);
        set(&mut t.activation, self.activation);
    }
}

impl Cli {
    /// Merges defaults, the config file and the flags.
    pub fn resolve(self) -> LabResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out, self.out);
        match self.command {
            Cmd::Generate(tree) => {
                cfg.command = Command::Generate;
                tree.apply(&mut cfg);
            }
            Cmd::Train { tree, train, seeds } => {
                cfg.command = Command::Train;
                tree.apply(&mut cfg);
                train.apply(&mut cfg);
                set(&mut cfg.train.seeds, seeds);
            }
            Cmd::Sweep {
                tree,
                train,
                axis,
                grid,
                repeats,
            } => {
                cfg.command = Command::Sweep;
                tree.apply(&mut cfg);
                train.apply(&mut cfg);
                set(&mut cfg.sweep.axis, axis);
                set(&mut cfg.sweep.grid, grid);
                set(&mut cfg.sweep.repeats, repeats);
            }
            Cmd::Align {
                runs,
                matrix,
                baseline,
                epsilon,
                trials,
                aat_steps,
                restarts,
                test_only,
            } => {
                cfg.command = Command::Align;
                if !runs.is_empty() {
                    cfg.inputs = runs;
                }
                if matrix {
                    cfg.align.mode = "matrix".into();
                }
                if baseline {
                    cfg.align.mode = "baseline".into();
                }
                set(&mut cfg.align.epsilon, epsilon);
                set(&mut cfg.align.baseline_trials, trials);
                if test_only {
                    cfg.align.triples = "test".into();
                }
                set(&mut cfg.align.steps, aat_steps);
                set(&mut cfg.align.restarts, restarts);
            }
            Cmd::Certify {
                runs,
                relation,
                epsilon,
                aat_steps,
                restarts,
            } => {
                cfg.command = Command::Certify;
                if !runs.is_empty() {
                    cfg.inputs = runs;
                }
                set(&mut cfg.certify.relation, relation);
                set(&mut cfg.certify.epsilon, epsilon);
                set(&mut cfg.align.steps, aat_steps);
                set(&mut cfg.align.restarts, restarts);
            }
            Cmd::Prune {
                tree,
                root,
                threshold,
                oracle,
                flip_probability,
                script,
                positive_only,
            } => {
                cfg.command = Command::Prune;
                tree.apply(&mut cfg);
                set(&mut cfg.prune.root, root);
                set(&mut cfg.prune.threshold, threshold);
                set(&mut cfg.prune.oracle, oracle);
                set(&mut cfg.prune.flip_probability, flip_probability);
                set(&mut cfg.prune.script, script);
                cfg.prune.positive_only |= positive_only;
            }
            Cmd::Figures {
                run,
                kind,
                pca,
                color,
            } => {
                cfg.command = Command::Figures;
                cfg.inputs = vec![run];
                set(&mut cfg.figures.kind, kind);
                cfg.figures.pca |= pca;
                set(&mut cfg.figures.color, color);
            }
        }
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// output lines or the error.
pub fn run<I, S>(args: I) -> LabResult<Outcome>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| LabError::Config(e.to_string()))?;
    let (force, threads) = (cli.force, cli.threads);
    let cfg = cli.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(LabError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| LabError::Run(e.to_string()))?;
    pool.install(|| execute(&cfg, force))
}
