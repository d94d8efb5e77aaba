use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cogspeech(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogspeech"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let o = cogspeech(tmp.path(), &["synth", "--out", corpus.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for cmd in ["denoise", "features", "run", "ensemble"] {
        let o = cogspeech(&corpus, &[cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let results = corpus.join("results");
    for f in ["folds.csv", "ensembles.csv", "selected.csv", "frequency.csv", "report/ensembles_scatter.svg", "report/summary.md"] {
        assert!(results.join(f).is_file(), "missing {f}");
    }
    let before = fs::read(results.join("report/summary.md")).unwrap();
    fs::remove_dir_all(results.join("report")).unwrap();
    assert_eq!(code(&cogspeech(&corpus, &["report"])), 0);
    assert_eq!(fs::read(results.join("report/summary.md")).unwrap(), before);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("experiment.toml"), "folds = \"five\"\n").unwrap();
    let o = cogspeech(tmp.path(), &["run"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.toml"));

    assert_eq!(code(&cogspeech(tmp.path(), &["--no-such-flag"])), 2);
    assert_eq!(code(&cogspeech(tmp.path(), &["run", "--config", "missing.toml"])), 2);

    let one = "[[system]]\nid = \"a\"\nfeatures = [\"pauses\"]\ntask = \"CTD\"\nclassifier = { type = \"tree\" }\n";
    fs::write(tmp.path().join("one.toml"), one).unwrap();
    let o = cogspeech(tmp.path(), &["ensemble", "--config", "one.toml"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn defaults_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cogspeech(tmp.path(), &["--dump-defaults"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[[system]]"));
    let cfg = cogspeech::config::ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, cogspeech::config::ExperimentConfig::default());
}

#[test]
fn wer_reports_per_task_and_unpaired_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (r, h) = (tmp.path().join("ref"), tmp.path().join("hyp"));
    fs::create_dir_all(&r).unwrap();
    fs::create_dir_all(&h).unwrap();
    fs::write(r.join("S001_CTD.txt"), "the boy is on the stool").unwrap();
    fs::write(h.join("S001_CTD.txt"), "the boy is on a stool").unwrap();
    fs::write(r.join("S001_SFT.txt"), "um cat dog").unwrap();
    fs::write(h.join("S001_SFT.txt"), "uh cat dog").unwrap();
    let o = cogspeech(tmp.path(), &["wer", "--ref", "ref", "--hyp", "hyp"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    // One substitution over 6 + 3 reference words; the filler spellings match after normalization.
    assert!((row[0] - 1.0 / 9.0).abs() < 1e-12);
    assert!((row[1] - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(row[3], 0.0);

    fs::write(r.join("S002_PFT.txt"), "pig pot").unwrap();
    let o = cogspeech(tmp.path(), &["wer", "--ref", "ref", "--hyp", "hyp"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("S002_PFT.txt"));
}
