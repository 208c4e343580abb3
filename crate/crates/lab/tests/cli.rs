use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgstitch::csv_io::{read_rows, CertifyCsvRow, EsCsvRow, SweepCsvRow};
use kgstitch::format::{read_json, PruneDoc, ReportDoc, RunDoc, ORACLE_SCHEMA};

fn kgstitch(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgstitch"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = kgstitch(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn dirs_with(out: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    v.sort();
    v
}

const SMALL_TREE: [&str; 6] = [
    "--generations",
    "3",
    "--min-persons",
    "10",
    "--max-persons",
    "16",
];
const SMALL_TRAIN: [&str; 10] = [
    "--steps",
    "60",
    "--width",
    "8",
    "--generations",
    "3",
    "--min-persons",
    "10",
    "--max-persons",
    "16",
];

#[test]
fn generate_writes_documents_and_refuses_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(tmp.path(), &["generate", "--relations", "full_18"]);
    assert!(stdout.contains("18 relations"));
    let dir = &dirs_with(tmp.path(), "generate-")[0];
    for f in ["config.toml", "facts.json", "kg.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let again = kgstitch(tmp.path(), &["generate", "--relations", "full_18"]);
    assert_eq!(again.status.code(), Some(2));
    ok(
        tmp.path(),
        &["--force", "generate", "--relations", "full_18"],
    );
}

#[test]
fn train_writes_one_directory_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["--seed", "3", "train", "--seeds", "2"];
    args.extend(SMALL_TRAIN);
    let stdout = ok(tmp.path(), &args);
    assert_eq!(
        stdout.lines().filter(|l| l.contains("train_acc")).count(),
        2
    );
    let dirs = dirs_with(tmp.path(), "train-");
    assert_eq!(dirs.len(), 2);
    let seeds: Vec<u64> = dirs
        .iter()
        .map(|d| read_json::<RunDoc>(&d.join("run.json")).unwrap().seed)
        .collect();
    let mut sorted = seeds.clone();
    sorted.sort();
    assert_eq!(sorted, vec![3, 4]);
    let doc: RunDoc = read_json(&dirs[0].join("run.json")).unwrap();
    assert_eq!(doc.train_loss_curve.len(), 60);
    doc.to_record().unwrap();
}

#[test]
fn sweep_emits_csv_and_chart() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--axis",
        "width",
        "--grid",
        "2,8",
        "--repeats",
        "2",
        "--steps",
        "30",
    ];
    args.extend(SMALL_TREE);
    ok(tmp.path(), &args);
    let dir = &dirs_with(tmp.path(), "sweep-")[0];
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(text.starts_with("axis_value,repeat,seed,train_acc,test_acc,train_loss,test_loss"));
    let rows: Vec<SweepCsvRow> = read_rows(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    let svg = fs::read_to_string(dir.join("sweep.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 2);
}

#[test]
fn align_certify_and_figures_on_trained_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    let mut args = vec!["train", "--seeds", "3"];
    args.extend(SMALL_TRAIN);
    ok(&runs, &args);
    let dirs = dirs_with(&runs, "train-");
    let d: Vec<&str> = dirs.iter().map(|p| p.to_str().unwrap()).collect();

    let out = tmp.path().join("out");
    let fast = ["--aat-steps", "40", "--restarts", "1"];
    let mut matrix = vec!["align", "--matrix"];
    matrix.extend(&d);
    matrix.extend(fast);
    let stdout = ok(&out, &matrix);
    assert!(stdout.contains("mean off-diagonal ES"));
    let adir = &dirs_with(&out, "align-")[0];
    let cells: Vec<EsCsvRow> =
        read_rows(fs::File::open(adir.join("es_matrix.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 9);
    assert!(adir.join("es_matrix.svg").exists());
    assert!(adir.join("cka_matrix.csv").exists());

    let mut baseline = vec!["align", "--baseline", d[0], d[1], "--trials", "3"];
    baseline.extend(fast);
    let stdout = ok(&out, &baseline);
    assert!(stdout.contains("95th percentile"));

    let mut test_only = matrix.clone();
    test_only.push("--test-only");
    ok(&out, &test_only);
    assert_eq!(dirs_with(&out, "align-").len(), 3);

    let stdout = ok(
        &out,
        &[
            "certify",
            runs.to_str().unwrap(),
            "--aat-steps",
            "40",
            "--restarts",
            "1",
        ],
    );
    assert!(stdout.contains("3 runs"));
    let cdir = &dirs_with(&out, "certify-")[0];
    let rows: Vec<CertifyCsvRow> =
        read_rows(fs::File::open(cdir.join("certify_summary.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.violations == 0));
    let report: ReportDoc = read_json(&cdir.join(format!("report-{}.json", rows[0].run))).unwrap();
    assert!(report.optimal);

    let stdout = ok(&out, &["figures", d[0]]);
    assert!(stdout.contains("parent links"));
    ok(
        &out,
        &["figures", d[0], "--kind", "pca", "--color", "gender"],
    );
    let figs = dirs_with(&out, "figures-");
    assert_eq!(figs.len(), 2);
}

#[test]
fn prune_with_exact_and_scripted_oracles() {
    let tmp = tempfile::tempdir().unwrap();
    let tree = ["--tree", "kennedy", "--relations", "full_18"];
    let mut exact = vec!["prune"];
    exact.extend(tree);
    ok(tmp.path(), &exact);
    let dir = &dirs_with(tmp.path(), "prune-")[0];
    let doc: PruneDoc = read_json(&dir.join("prune.json")).unwrap();
    assert_eq!(doc.accepted.len(), 34);

    // Wrong on every question involving one person.
    let facts = kgstitch::trees::named_tree("kennedy").unwrap();
    let kg = kgstitch_core::kg::derive_kg(&facts, kgstitch_core::kg::RelationSet::Full18);
    let x = kg.object_index("maria_shriver").unwrap();
    let mut answers = Vec::new();
    for r in 0..kg.m() {
        for o in 0..kg.n() {
            for (s, t) in [(x, o), (o, x)] {
                answers.push(serde_json::json!({
                    "subject": kg.objects()[s],
                    "relation": kg.relations()[r],
                    "object": kg.objects()[t],
                    "answer": !kg.holds(r, s, t),
                }));
            }
        }
    }
    let script = tmp.path().join("oracle.json");
    let doc = serde_json::json!({"schema": ORACLE_SCHEMA, "fallback": "exact", "answers": answers});
    fs::write(&script, doc.to_string()).unwrap();
    let out = tmp.path().join("scripted");
    let mut args = vec![
        "prune",
        "--oracle",
        "script",
        "--script",
        script.to_str().unwrap(),
    ];
    args.extend(tree);
    ok(&out, &args);
    let dir = &dirs_with(&out, "prune-")[0];
    let doc: PruneDoc = read_json(&dir.join("prune.json")).unwrap();
    assert_eq!(doc.accepted.len(), 33);
    assert!(!doc.accepted.contains(&"maria_shriver".to_string()));
    let rejected: Vec<&str> = doc
        .visits
        .iter()
        .filter(|v| !v.accepted)
        .map(|v| v.node.as_str())
        .collect();
    assert_eq!(rejected, vec!["maria_shriver"]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "version = 99\n").unwrap();
    let o = kgstitch(tmp.path(), &["--config", cfg.to_str().unwrap(), "generate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kgstitch(tmp.path(), &["figures", "/nonexistent/run"]);
    assert_eq!(o.status.code(), Some(2));
    let o = kgstitch(tmp.path(), &["prune", "--root", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(fs::read_dir(tmp.path()).unwrap().all(|e| {
        let name = e.unwrap().file_name();
        name == "bad.toml"
    }));
}

#[test]
fn config_file_drives_a_run_and_is_copied_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        "version = 1\nseed = 11\n[tree]\ngenerations = 3\nmin_persons = 10\nmax_persons = 16\n[train]\nsteps = 25\nwidth = 6\n",
    )
    .unwrap();
    ok(tmp.path(), &["--config", cfg.to_str().unwrap(), "train"]);
    let dir = &dirs_with(tmp.path(), "train-")[0];
    let resolved = kgstitch::config::ExperimentConfig::load(&dir.join("config.toml")).unwrap();
    assert_eq!(resolved.seed, 11);
    assert_eq!(resolved.train.steps, 25);
    assert_eq!(resolved.train.lr, 0.01);
    assert_eq!(resolved.out, tmp.path().to_str().unwrap());
}
