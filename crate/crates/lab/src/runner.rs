//! The seven commands. Each one resolves its inputs, computes (in parallel
//! where runs are independent) and then writes into its own run directory.

use std::fs;
use std::path::{Path, PathBuf};

use kgstitch_core::align::{
    cka, es_cell, feature_alignment, pca_project, random_baseline_es, Attribute, EsMatrix,
    TargetDecoder,
};
use kgstitch_core::cone::{certify_optimality, fit_to_reference, HardDecoder};
use kgstitch_core::derive_seed;
use kgstitch_core::kg::{
    check_property, derive_kg, split_triples, BaseFacts, KnowledgeGraph, PropertyKind, PropertySpec,
};
use kgstitch_core::prune::{prune, ExactOracle, FlipModel, NoisyOracle, PruneResult};
use kgstitch_core::train::{
    run_sweep_job, sweep_jobs, train, Representation, RunRecord, SweepAxis, SweepTable,
};
use rayon::prelude::*;

use crate::config::{Command, ExperimentConfig, TreeSection};
use crate::csv_io::{
    es_matrix_rows, histogram_rows, to_csv_string, BinCsvRow, CertifyCsvRow, CkaCsvRow,
    SweepCsvRow, SweepSummaryCsvRow,
};
use crate::error::{LabError, LabResult};
use crate::format::{
    read_json, to_json, FactsDoc, KgDoc, OracleScriptDoc, PruneDoc, ReportDoc, RunDoc,
};
use crate::rundir::RunDir;
use crate::svg;
use crate::trees::resolve_tree;

/// Directories written and one-line summaries for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub dirs: Vec<PathBuf>,
    pub lines: Vec<String>,
}

pub fn execute(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    match cfg.command {
        Command::Generate => generate(cfg, force),
        Command::Train => train_runs(cfg, force),
        Command::Sweep => sweep(cfg, force),
        Command::Align => align(cfg, force),
        Command::Certify => certify(cfg, force),
        Command::Prune => prune_tree(cfg, force),
        Command::Figures => figures(cfg, force),
    }
}

pub fn build_graph(tree: &TreeSection) -> LabResult<(BaseFacts, KnowledgeGraph, Option<u64>)> {
    let (facts, seed) = resolve_tree(tree)?;
    let kg = derive_kg(&facts, tree.relation_set()?);
    Ok((facts, kg, seed))
}

/// Kinship laws that every derived graph must satisfy, for the relations it
/// has. Returns a description of each broken law.
pub fn kinship_violations(kg: &KnowledgeGraph) -> LabResult<Vec<String>> {
    let has = |r: &str| kg.relation_index(r).is_ok();
    let mut specs = Vec::new();
    for r in ["ancestor", "descendant"] {
        if has(r) {
            specs.push(PropertySpec::transitive(r));
            specs.push(PropertySpec::antisymmetric(r));
        }
    }
    if ["father", "mother", "grandfather", "grandmother"]
        .iter()
        .all(|r| has(r))
    {
        specs.push(PropertySpec::meta_transitive(
            "father|mother",
            "father|mother",
            "grandfather|grandmother",
        ));
    }
    let mut broken = Vec::new();
    for spec in &specs {
        let v = check_property(kg, spec)?;
        if !v.is_empty() {
            broken.push(format!("{spec}: {} violations", v.len()));
        }
    }
    for (a, b) in [("descendant", "ancestor"), ("husband", "wife")] {
        if has(a) && has(b) {
            let (ka, kb) = (kg.relation_index(a)?, kg.relation_index(b)?);
            if !kg.edges(ka).iter().all(|&(i, j)| kg.holds(kb, j, i))
                || kg.edges(ka).len() != kg.edges(kb).len()
            {
                broken.push(format!("{a} is not the converse of {b}"));
            }
        }
    }
    Ok(broken)
}

fn generate(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let (facts, kg, seed) = build_graph(&cfg.tree)?;
    let broken = kinship_violations(&kg)?;
    let dir = RunDir::create(cfg, force)?;
    dir.write("facts.json", &to_json(&FactsDoc::from_facts(&facts)))?;
    dir.write("kg.json", &to_json(&KgDoc::from_kg(&kg)))?;
    if !broken.is_empty() {
        return Err(LabError::Invariant(broken.join("; ")));
    }
    let seed = seed.map_or(String::new(), |s| format!(" (tree seed {s})"));
    Ok(Outcome {
        dirs: vec![dir.path().to_path_buf()],
        lines: vec![format!(
            "{} persons, {} relations{seed} -> {}",
            kg.n(),
            kg.m(),
            dir.path().display()
        )],
    })
}

fn train_runs(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    if cfg.train.seeds == 0 {
        return Err(LabError::Config("train.seeds must be at least 1".into()));
    }
    cfg.train.to_config(cfg.seed)?;
    let (facts, kg, _) = build_graph(&cfg.tree)?;
    let results: Vec<LabResult<(PathBuf, String)>> = (0..cfg.train.seeds as u64)
        .into_par_iter()
        .map(|k| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed + k;
            run_cfg.train.seeds = 1;
            train_one(&run_cfg, &facts, &kg, force)
        })
        .collect();
    let mut out = Outcome::default();
    for r in results {
        let (dir, line) = r?;
        out.dirs.push(dir);
        out.lines.push(line);
    }
    Ok(out)
}

fn train_one(
    cfg: &ExperimentConfig,
    facts: &BaseFacts,
    kg: &KnowledgeGraph,
    force: bool,
) -> LabResult<(PathBuf, String)> {
    let tc = cfg.train.to_config(cfg.seed)?;
    let dir = RunDir::create(cfg, force)?;
    let split = split_triples(kg, tc.train_fraction, tc.split_seed)?;
    let record = train(kg, &split, &tc)?;
    dir.write("facts.json", &to_json(&FactsDoc::from_facts(facts)))?;
    dir.write("kg.json", &to_json(&KgDoc::from_kg(kg)))?;
    dir.write("run.json", &to_json(&RunDoc::from_record(&record, kg)))?;
    let line =
        format!(
        "seed {}: train_acc {:.4} test_acc {:.4} train_loss {:.4e} converged_at {} status {} -> {}",
        cfg.seed,
        record.train_accuracy,
        record.test_accuracy,
        record.train_loss,
        record.converged_at.map_or("never".into(), |s| s.to_string()),
        if record.failed() { "diverged" } else { "completed" },
        dir.path().display()
    );
    dir.write("summary.txt", &format!("{line}\n"))?;
    Ok((dir.path().to_path_buf(), line))
}

fn sweep(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let axis = cfg.sweep.axis()?;
    let base = cfg.train.to_config(cfg.seed)?;
    let jobs = sweep_jobs(axis, &cfg.sweep.grid, cfg.sweep.repeats, &base)?;
    let (_, kg, _) = build_graph(&cfg.tree)?;
    let dir = RunDir::create(cfg, force)?;
    let runs = jobs
        .par_iter()
        .map(|job| run_sweep_job(&kg, job).map(|(run, _)| run))
        .collect::<Result<Vec<_>, _>>()?;
    let table = SweepTable::summarize(axis, runs);
    let rows: Vec<SweepCsvRow> = table.runs.iter().map(SweepCsvRow::from).collect();
    dir.write("sweep.csv", &to_csv_string(&rows)?)?;
    let summary: Vec<SweepSummaryCsvRow> =
        table.rows.iter().map(SweepSummaryCsvRow::from).collect();
    dir.write("sweep_summary.csv", &to_csv_string(&summary)?)?;
    dir.write("sweep.svg", &sweep_chart(&table))?;
    let mut lines: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} = {}: train {:.4} ± {:.4}, test {:.4} ± {:.4} ({} failed)",
                axis.as_str(),
                r.axis_value,
                r.train_mean,
                r.train_sd,
                r.test_mean,
                r.test_sd,
                r.failed
            )
        })
        .collect();
    lines.push(format!("-> {}", dir.path().display()));
    Ok(Outcome {
        dirs: vec![dir.path().to_path_buf()],
        lines,
    })
}

/// Train and test accuracy against the swept value.
pub fn sweep_chart(table: &SweepTable) -> String {
    let xs: Vec<f64> = table.rows.iter().map(|r| r.axis_value).collect();
    let log_x = table.axis != SweepAxis::Depth && xs.iter().all(|&x| x > 0.0);
    let series = vec![
        (
            "train".to_string(),
            table.rows.iter().map(|r| r.train_mean).collect(),
        ),
        (
            "test".to_string(),
            table.rows.iter().map(|r| r.test_mean).collect(),
        ),
    ];
    svg::line_chart(
        &format!("accuracy vs {}", table.axis.as_str()),
        table.axis.as_str(),
        "accuracy",
        &xs,
        &series,
        log_x,
    )
}

/// A trained run with the graph it was trained on.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub id: String,
    pub record: RunRecord,
    pub kg: KnowledgeGraph,
    pub facts: Option<BaseFacts>,
}

/// Reads `run.json`, `kg.json` and (if present) `facts.json` from a run
/// directory, or from the directory of a given `run.json`.
pub fn load_run(path: &Path) -> LabResult<LoadedRun> {
    let (dir, file) = if path.is_dir() {
        (path.to_path_buf(), path.join("run.json"))
    } else {
        (
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            path.to_path_buf(),
        )
    };
    let doc: RunDoc = read_json(&file)?;
    let kg = read_json::<KgDoc>(&dir.join("kg.json"))?.to_kg()?;
    if doc.objects != kg.objects() || doc.relations != kg.relations() {
        return Err(LabError::Config(format!(
            "{} does not match the graph next to it",
            file.display()
        )));
    }
    let facts_path = dir.join("facts.json");
    let facts = if facts_path.exists() {
        Some(read_json::<FactsDoc>(&facts_path)?.to_facts()?)
    } else {
        None
    };
    let id = dir
        .file_name()
        .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(LoadedRun {
        id,
        record: doc.to_record()?,
        kg,
        facts,
    })
}

/// Expands directories that hold run directories (but no `run.json`) into
/// their sorted children, then loads everything.
pub fn load_inputs(inputs: &[String]) -> LabResult<Vec<LoadedRun>> {
    let mut paths = Vec::new();
    for input in inputs {
        let p = PathBuf::from(input);
        if p.is_dir() && !p.join("run.json").exists() {
            let mut children: Vec<PathBuf> = fs::read_dir(&p)
                .map_err(|e| LabError::Config(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|c| c.join("run.json").exists())
                .collect();
            children.sort();
            paths.extend(children);
        } else {
            paths.push(p);
        }
    }
    let mut runs = paths
        .iter()
        .map(|p| load_run(p))
        .collect::<LabResult<Vec<_>>>()?;
    let ids: Vec<String> = runs.iter().map(|r| r.id.clone()).collect();
    for (i, run) in runs.iter_mut().enumerate() {
        if ids.iter().filter(|&x| *x == run.id).count() > 1 {
            run.id = format!("{}#{i}", run.id);
        }
    }
    Ok(runs)
}

fn same_graph(runs: &[LoadedRun]) -> LabResult<&KnowledgeGraph> {
    let first = &runs
        .first()
        .ok_or_else(|| LabError::Config("no input runs".into()))?
        .kg;
    if let Some(other) = runs.iter().find(|r| r.kg != *first) {
        return Err(LabError::Config(format!(
            "run {} was trained on a different graph",
            other.id
        )));
    }
    Ok(first)
}

fn align(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let runs = load_inputs(&cfg.inputs)?;
    let kg = same_graph(&runs)?;
    let triples = match cfg.align.triples.as_str() {
        "all" => kg.all_triples(),
        "test" => {
            let tc = &runs[0].record.config;
            split_triples(kg, tc.train_fraction, tc.split_seed)?.test
        }
        other => {
            return Err(LabError::Config(format!(
                "align.triples must be `all` or `test`, got `{other}`"
            )))
        }
    };
    let eps = cfg.align.epsilon;
    cfg.align.aat(cfg.seed)?;
    match cfg.align.mode.as_str() {
        "matrix" => {
            let k = runs.len();
            if k < 2 {
                return Err(LabError::Config(
                    "align --matrix needs at least two runs".into(),
                ));
            }
            let cells: Vec<(usize, usize)> = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .collect();
            let computed: Vec<(usize, usize, Option<f64>)> = cells
                .par_iter()
                .map(|&(i, j)| {
                    let aat = cfg.align.aat(derive_seed(cfg.seed, (i * k + j) as u64))?;
                    let es = es_cell(&runs[i].record, &runs[j].record, &triples, eps, &aat).ok();
                    Ok((i, j, es))
                })
                .collect::<LabResult<_>>()?;
            let mut scores = vec![vec![None; k]; k];
            for (i, j, es) in computed {
                scores[i][j] = es;
            }
            let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();
            let ids: Vec<String> = runs.iter().map(|r| r.id.clone()).collect();
            let matrix = EsMatrix::assemble(ids.clone(), &records, &triples, scores)?;
            let cka_rows: Vec<CkaCsvRow> = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| CkaCsvRow {
                    source: ids[i].clone(),
                    target: ids[j].clone(),
                    cka: cka(
                        runs[i].record.representation.matrix(),
                        runs[j].record.representation.matrix(),
                    )
                    .ok(),
                })
                .collect();
            let dir = RunDir::create(cfg, force)?;
            dir.write("es_matrix.csv", &to_csv_string(&es_matrix_rows(&matrix))?)?;
            dir.write("cka_matrix.csv", &to_csv_string(&cka_rows)?)?;
            dir.write(
                "es_matrix.svg",
                &svg::heatmap("AAT equivalence score", &ids, &matrix.scores),
            )?;
            Ok(Outcome {
                dirs: vec![dir.path().to_path_buf()],
                lines: vec![
                    format!(
                        "mean off-diagonal ES {:.4} (chance {:.4}, {} of {k} runs flagged)",
                        matrix.mean_off_diagonal(),
                        matrix.chance,
                        matrix.flagged.iter().filter(|&&f| f).count()
                    ),
                    format!("-> {}", dir.path().display()),
                ],
            })
        }
        "baseline" => {
            let [target, source] = runs.as_slice() else {
                return Err(LabError::Config(
                    "align --baseline takes exactly two runs: target, then source".into(),
                ));
            };
            let aat = cfg.align.aat(cfg.seed)?;
            let es = es_cell(&source.record, &target.record, &triples, eps, &aat)?;
            let hist = random_baseline_es(
                TargetDecoder::Mlp(&target.record.decoder),
                Some(&target.record.representation),
                &triples,
                kg.n(),
                source.record.representation.d(),
                cfg.align.baseline_trials,
                eps,
                derive_seed(cfg.seed, 1),
                &aat,
            )?;
            let p95 = hist.quantile(0.95);
            let bins: Vec<BinCsvRow> = hist
                .bins(0.0, 1.0, 20)
                .into_iter()
                .map(|(left, count)| BinCsvRow {
                    bin_left: left,
                    bin_right: left + 0.05,
                    count,
                })
                .collect();
            let dir = RunDir::create(cfg, force)?;
            dir.write("baseline_es.csv", &to_csv_string(&histogram_rows(&hist))?)?;
            dir.write("baseline_bins.csv", &to_csv_string(&bins)?)?;
            let bars: Vec<(f64, f64, usize)> = bins
                .iter()
                .map(|b| (b.bin_left, b.bin_right, b.count))
                .collect();
            dir.write(
                "baseline.svg",
                &svg::histogram(
                    "ES of random representations",
                    "ES",
                    &bars,
                    Some((es, &source.id)),
                ),
            )?;
            let line = format!(
                "ES {es:.4} of {} through {} vs random 95th percentile {p95:.4}: {}",
                source.id,
                target.id,
                if es > p95 {
                    "exceeds"
                } else {
                    "does not exceed"
                }
            );
            dir.write("summary.txt", &format!("{line}\n"))?;
            Ok(Outcome {
                dirs: vec![dir.path().to_path_buf()],
                lines: vec![line, format!("-> {}", dir.path().display())],
            })
        }
        other => Err(LabError::Config(format!("unknown align mode `{other}`"))),
    }
}

/// Direct parent links as index pairs into `objects`.
fn parent_links(facts: Option<&BaseFacts>, objects: &[String]) -> Vec<(usize, usize)> {
    let Some(facts) = facts else {
        return Vec::new();
    };
    let pos = |id: &str| objects.iter().position(|o| o == id);
    facts
        .parent_pairs()
        .iter()
        .filter_map(|&(p, c)| Some((pos(&facts.persons()[p].id)?, pos(&facts.persons()[c].id)?)))
        .collect()
}

struct Certified {
    report: ReportDoc,
    seed: u64,
    figure: String,
}

fn certify(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let runs = load_inputs(&cfg.inputs)?;
    if runs.is_empty() {
        return Err(LabError::Config("certify needs at least one run".into()));
    }
    let relation = cfg.certify.relation.as_str();
    let results: Vec<Certified> = runs
        .par_iter()
        .enumerate()
        .map(|(i, run)| {
            let aat = cfg.align.aat(derive_seed(cfg.seed, i as u64))?;
            let fit = fit_to_reference(
                &run.record.representation,
                &run.kg,
                relation,
                cfg.certify.epsilon,
                &aat,
            )?;
            let stitched = fit.fit.params.apply(&run.record.representation)?;
            let report = certify_optimality(
                &stitched,
                &HardDecoder::Cone,
                &[PropertyKind::Antisymmetric, PropertyKind::Transitive],
            )?;
            let links = parent_links(run.facts.as_ref(), run.kg.objects());
            let figure = embedding_scatter(
                &format!("{} through the cone reference", run.id),
                &stitched,
                run.kg.objects(),
                &links,
                false,
            )?;
            Ok(Certified {
                report: ReportDoc::new(
                    &run.id,
                    relation,
                    &run.record,
                    &fit,
                    &report,
                    run.kg.objects(),
                ),
                seed: run.record.config.seed,
                figure,
            })
        })
        .collect::<LabResult<_>>()?;
    let dir = RunDir::create(cfg, force)?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for c in &results {
        let r = &c.report;
        dir.write(&format!("report-{}.json", r.run), &to_json(r))?;
        dir.write(&format!("reference-{}.svg", r.run), &c.figure)?;
        let pass = r
            .reference_accuracy
            .is_some_and(|a| a >= cfg.certify.pass_accuracy);
        rows.push(CertifyCsvRow {
            run: r.run.clone(),
            seed: c.seed,
            converged: r.converged,
            train_acc: r.train_accuracy,
            reference_acc: r.reference_accuracy,
            reference_pass: pass,
            violations: r.checks.iter().map(|c| c.violations).sum(),
        });
        lines.push(format!(
            "{}: converged {} reference_acc {} violations {}",
            r.run,
            r.converged,
            r.reference_accuracy
                .map_or("n/a".into(), |a| format!("{a:.4}")),
            rows.last().map_or(0, |row| row.violations)
        ));
    }
    dir.write("certify_summary.csv", &to_csv_string(&rows)?)?;
    let converged = rows.iter().filter(|r| r.converged).count();
    let passed = rows
        .iter()
        .filter(|r| r.converged && r.reference_pass)
        .count();
    lines.push(format!(
        "{} runs, {converged} reached 100% training accuracy, {passed} of those reached {} through the cone reference",
        rows.len(),
        cfg.certify.pass_accuracy
    ));
    lines.push(format!("-> {}", dir.path().display()));
    let broken: Vec<&str> = results
        .iter()
        .filter(|c| !c.report.optimal)
        .map(|c| c.report.run.as_str())
        .collect();
    if !broken.is_empty() {
        return Err(LabError::Invariant(format!(
            "hard cone violated antisymmetry or transitivity for {}",
            broken.join(", ")
        )));
    }
    Ok(Outcome {
        dirs: vec![dir.path().to_path_buf()],
        lines,
    })
}

fn prune_tree(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let (_, kg, _) = build_graph(&cfg.tree)?;
    let root = if cfg.prune.root.is_empty() {
        kg.objects()
            .first()
            .cloned()
            .ok_or_else(|| LabError::Config("cannot prune an empty graph".into()))?
    } else {
        cfg.prune.root.clone()
    };
    let pc = cfg.prune.to_config();
    let (result, oracle): (PruneResult, String) = match cfg.prune.oracle.as_str() {
        "exact" => (
            prune(&kg, &root, &mut ExactOracle::new(&kg), &pc)?,
            "exact".into(),
        ),
        "noisy" => {
            let p = cfg.prune.flip_probability;
            let mut o = NoisyOracle::new(&kg, FlipModel::Global(p), cfg.seed)?;
            (
                prune(&kg, &root, &mut o, &pc)?,
                format!("noisy p={p} seed={}", cfg.seed),
            )
        }
        "script" => {
            let doc: OracleScriptDoc = read_json(Path::new(&cfg.prune.script))?;
            let mut o = doc.to_oracle(&kg)?;
            (
                prune(&kg, &root, &mut o, &pc)?,
                format!("script {}", cfg.prune.script),
            )
        }
        other => return Err(LabError::Config(format!("unknown oracle `{other}`"))),
    };
    let dir = RunDir::create(cfg, force)?;
    dir.write(
        "prune.json",
        &to_json(&PruneDoc::new(&result, &kg, pc.threshold, &oracle)),
    )?;
    Ok(Outcome {
        dirs: vec![dir.path().to_path_buf()],
        lines: vec![
            format!(
                "accepted {} of {} visited nodes from {root} ({oracle})",
                result.accepted.len(),
                result.tallies.len()
            ),
            format!("-> {}", dir.path().display()),
        ],
    })
}

/// Scatter of 2-D embeddings (or of their first two principal components
/// when `pca` is set) with one segment per link.
pub fn embedding_scatter(
    title: &str,
    rep: &Representation,
    labels: &[String],
    links: &[(usize, usize)],
    pca: bool,
) -> LabResult<String> {
    if rep.n() == 0 {
        return Err(LabError::Config(
            "nothing to draw for an empty graph".into(),
        ));
    }
    let points: Vec<(f64, f64)> = match rep.d() {
        2 => (0..rep.n())
            .map(|i| (rep.row(i)[0], rep.row(i)[1]))
            .collect(),
        d if d > 2 && pca => {
            let p = pca_project(rep.matrix(), 2)?;
            (0..rep.n())
                .map(|i| (p.components.get(i, 0), p.components.get(i, 1)))
                .collect()
        }
        d => {
            return Err(LabError::Config(format!(
                "cannot draw {d}-dimensional embeddings in 2-D{}",
                if d > 2 { " without --pca" } else { "" }
            )))
        }
    };
    Ok(svg::scatter(title, &points, labels, links, None))
}

fn figures(cfg: &ExperimentConfig, force: bool) -> LabResult<Outcome> {
    let runs = load_inputs(&cfg.inputs)?;
    let [run] = runs.as_slice() else {
        return Err(LabError::Config("figures takes exactly one run".into()));
    };
    let rep = &run.record.representation;
    let objects = run.kg.objects();
    let (name, body, mut lines) = match cfg.figures.kind.as_str() {
        "scatter" => {
            let links = parent_links(run.facts.as_ref(), objects);
            let body = embedding_scatter(&run.id, rep, objects, &links, cfg.figures.pca)?;
            let line = format!("{} points, {} parent links", rep.n(), links.len());
            ("scatter.svg", body, vec![line])
        }
        "pca" => {
            let facts = run.facts.as_ref().ok_or_else(|| {
                LabError::Config("pca coloring needs facts.json next to the run".into())
            })?;
            if rep.d() < 2 || rep.n() < 2 {
                return Err(LabError::Config(format!(
                    "cannot project {} x {} embeddings onto two components",
                    rep.n(),
                    rep.d()
                )));
            }
            let k = rep.d().min(rep.n()).min(10);
            let p = pca_project(rep.matrix(), k)?;
            let by_id = |id: &String| facts.index_of(id);
            let idx: Vec<usize> = objects
                .iter()
                .map(|o| {
                    by_id(o).ok_or_else(|| LabError::Config(format!("`{o}` missing from facts")))
                })
                .collect::<LabResult<_>>()?;
            let genders: Vec<_> = idx.iter().map(|&i| facts.persons()[i].gender).collect();
            let gens_all = facts.generations();
            let gens: Vec<usize> = idx.iter().map(|&i| gens_all[i]).collect();
            let colors: Vec<usize> = match cfg.figures.color.as_str() {
                "gender" => genders.iter().map(|g| *g as usize).collect(),
                "generation" => gens.clone(),
                other => return Err(LabError::Config(format!("unknown coloring `{other}`"))),
            };
            let points: Vec<(f64, f64)> = (0..rep.n())
                .map(|i| (p.components.get(i, 0), p.components.get(i, 1)))
                .collect();
            let body = svg::scatter(
                &format!(
                    "{}: first two principal components by {}",
                    run.id, cfg.figures.color
                ),
                &points,
                objects,
                &[],
                Some(&colors),
            );
            let score = |a: Attribute| {
                feature_alignment(&p.components, &a)
                    .map_or("n/a".to_string(), |v| format!("{v:.4}"))
            };
            let ratios: Vec<String> = p
                .explained_ratio
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect();
            let lines = vec![
                format!("explained variance ratios [{}]", ratios.join(", ")),
                format!(
                    "best single-component alignment: gender {}, generation {}",
                    score(Attribute::Gender(genders)),
                    score(Attribute::Generation(gens))
                ),
            ];
            ("pca.svg", body, lines)
        }
        other => return Err(LabError::Config(format!("unknown figure kind `{other}`"))),
    };
    let dir = RunDir::create(cfg, force)?;
    dir.write(name, &body)?;
    dir.write("summary.txt", &(lines.join("\n") + "\n"))?;
    lines.push(format!("-> {}", dir.path().join(name).display()));
    Ok(Outcome {
        dirs: vec![dir.path().to_path_buf()],
        lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgstitch_core::diff::Tensor;

    #[test]
    fn chain_scatter_has_three_points_two_segments() {
        let rep = Representation::new(
            Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap(),
        )
        .unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let s = embedding_scatter("chain", &rep, &labels, &[(0, 1), (1, 2)], false).unwrap();
        assert_eq!(s.matches("<circle").count(), 3);
        assert_eq!(s.matches("stroke=\"#999999\"").count(), 2);
    }

    #[test]
    fn scatter_rejects_unreducible_dimensions() {
        let one_d =
            Representation::new(Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap()).unwrap();
        assert!(matches!(
            embedding_scatter("x", &one_d, &[], &[], true),
            Err(LabError::Config(_))
        ));
        let three = Representation::new(
            Tensor::from_rows(&[
                vec![0.0, 1.0, 2.0],
                vec![1.0, 0.0, 0.5],
                vec![2.0, 2.0, 1.0],
            ])
            .unwrap(),
        )
        .unwrap();
        assert!(embedding_scatter("x", &three, &[], &[], false).is_err());
        assert!(embedding_scatter("x", &three, &[], &[], true).is_ok());
    }

    #[test]
    fn derived_graphs_pass_kinship_checks() {
        let tree = TreeSection {
            relations: "full_18".into(),
            ..TreeSection::default()
        };
        let (_, kg, _) = build_graph(&tree).unwrap();
        assert!(kinship_violations(&kg).unwrap().is_empty());
    }

    #[test]
    fn kinship_check_catches_a_broken_converse() {
        let kg = KnowledgeGraph::new(
            vec!["a".into(), "b".into()],
            vec!["ancestor".into(), "descendant".into()],
            vec![vec![(0, 1)], vec![(0, 1)]],
        )
        .unwrap();
        let broken = kinship_violations(&kg).unwrap();
        assert_eq!(broken.len(), 1);
        assert!(broken[0].contains("converse"));
    }
}
