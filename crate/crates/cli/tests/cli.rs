use std::path::Path;
use std::process::{Command, Output};

use retint_cli::{EXIT_CONFIG, EXIT_DATA, EXIT_INSUFFICIENT, EXIT_OK};
use serde_json::Value;

fn retint(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_retint"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

const SMALL_IID: [&str; 6] = [
    "--synth-kind",
    "iid",
    "--synth-n-stocks",
    "8",
    "--synth-length",
    "1500",
];

#[test]
fn intervals_writes_three_pdfs_per_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let mut args = vec!["intervals"];
    args.extend(SMALL_IID);
    args.extend(["--thresholds", "2,3", "--dump-intervals"]);
    let o = retint(&args, &out);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(&out),
        [
            "intervals.tsv",
            "pdf_q2.0.tsv",
            "pdf_q3.0.tsv",
            "pdf_scaled_q2.0.tsv",
            "pdf_scaled_q3.0.tsv",
            "pdf_shuffled_q2.0.tsv",
            "pdf_shuffled_q3.0.tsv",
            "report.json",
        ]
    );
    let head = std::fs::read_to_string(out.join("pdf_scaled_q2.0.tsv")).unwrap();
    assert!(head.starts_with("bin_center\tdensity\tcount\n"));
    let r = report(&out);
    assert_eq!(r["command"], "intervals");
    let power = &r["thresholds"][0]["fits"]["power"];
    for key in ["gamma", "stderr", "r2", "x_min", "n_tail"] {
        assert!(
            power.get(key).is_some() || power.get("error").is_some(),
            "missing {key}"
        );
    }
    assert!(
        r["thresholds"][0]["shuffled_control"]["ks_vs_unshuffled"]
            .as_f64()
            .unwrap()
            < 0.1
    );
}

#[test]
fn empty_threshold_is_flagged_and_all_empty_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("partial");
    let mut args = vec!["intervals"];
    args.extend(SMALL_IID);
    args.extend(["--thresholds", "2,40"]);
    assert_eq!(code(&retint(&args, &out)), EXIT_OK);
    let r = report(&out);
    assert_eq!(r["thresholds"][1]["empty"], true);
    assert!(!out.join("pdf_q40.0.tsv").exists());

    let none = tmp.path().join("none");
    let mut args = vec!["intervals"];
    args.extend(SMALL_IID);
    args.extend(["--thresholds", "40"]);
    assert_eq!(code(&retint(&args, &none)), EXIT_INSUFFICIENT);
    assert!(!none.exists() || listing(&none).is_empty());
}

#[test]
fn conditional_emits_all_octiles_even_when_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let mut args = vec!["conditional"];
    args.extend(SMALL_IID);
    args.extend(["--thresholds", "2"]);
    assert_eq!(code(&retint(&args, &out)), EXIT_OK);
    for i in 1..=8 {
        assert!(out.join(format!("cond_q2.0_Q{i}.tsv")).exists());
    }
    let r = report(&out);
    let octiles = r["thresholds"][0]["octiles"].as_array().unwrap();
    assert_eq!(octiles.len(), 8);
    // Geometric octile Q8 starts at 12.8 mean intervals; iid data never gets there.
    assert_eq!(octiles[7]["pairs"], 0);
    assert!(r["thresholds"][0]["memory_summary"].is_object());
}

#[test]
fn synth_corpus_round_trips_through_data_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = retint(
        &[
            "synth",
            "--kind",
            "fgn",
            "--n-stocks",
            "5",
            "--length",
            "1200",
            "--seed",
            "3",
        ],
        &data,
    );
    assert_eq!(code(&o), EXIT_OK);
    let files = listing(&data);
    assert!(files.contains(&"planted.json".to_string()));
    assert_eq!(files.iter().filter(|f| f.ends_with(".csv")).count(), 5);

    let from_files = tmp.path().join("files");
    let o = retint(&["dfa", "--data-dir", data.to_str().unwrap()], &from_files);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let from_memory = tmp.path().join("memory");
    let args = [
        "dfa",
        "--synth-kind",
        "fgn",
        "--synth-n-stocks",
        "5",
        "--synth-length",
        "1200",
        "--seed",
        "3",
    ];
    assert_eq!(code(&retint(&args, &from_memory)), EXIT_OK);
    for f in listing(&from_memory).iter().filter(|f| f.ends_with(".tsv")) {
        assert_eq!(
            std::fs::read(from_files.join(f)).unwrap(),
            std::fs::read(from_memory.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn single_stock_corpus_gives_single_bin_tables() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in ["dfa", "factors"] {
        let out = tmp.path().join(cmd);
        let args = [
            cmd,
            "--synth-kind",
            "fgn",
            "--synth-n-stocks",
            "1",
            "--synth-length",
            "3000",
        ];
        let o = retint(&args, &out);
        assert_eq!(
            code(&o),
            EXIT_OK,
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let prefix = if cmd == "dfa" {
            "dfa_alpha_by_lifetime.tsv"
        } else {
            "gamma_by_lifetime.tsv"
        };
        let table = std::fs::read_to_string(out.join(prefix)).unwrap();
        let rows = table.lines().count() - 1;
        assert_eq!(rows, if cmd == "dfa" { 2 } else { 1 }, "{table}");
    }
}

#[test]
fn factors_writes_bins_scatters_and_correlations() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let args = [
        "factors",
        "--synth-kind",
        "fgn",
        "--synth-n-stocks",
        "30",
        "--synth-lifetime-range",
        "600,2000",
        "--lifetime-sweep",
    ];
    assert_eq!(code(&retint(&args, &out)), EXIT_OK);
    let files = listing(&out);
    for f in [
        "gamma_by_lifetime.tsv",
        "gamma_by_volume.tsv",
        "scatter_volume_vs_trading_value.tsv",
    ] {
        assert!(files.iter().any(|x| x == f), "{f}");
    }
    assert_eq!(
        files.iter().filter(|f| f.starts_with("scatter_")).count(),
        6
    );
    let r = report(&out);
    assert_eq!(r["fit_window"]["x_max"], 10.0);
    assert_eq!(
        r["gamma_by_factor"]["lifetime"]["binning"]["edges"][0],
        508.0
    );
    assert!(r["correlations"]["log_space"].is_array());
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cases: [&[&str]; 5] = [
        &["intervals"],
        &["intervals", "--synth-kind", "iid", "--data-dir", "x"],
        &["intervals", "--synth-kind", "iid", "--thresholds", "0"],
        &[
            "intervals",
            "--synth-kind",
            "iid",
            "--x-min",
            "2",
            "--x-max",
            "1",
        ],
        &["synth", "--kind", "iid", "--n-stocks", "0"],
    ];
    for args in cases {
        assert_eq!(code(&retint(args, &out)), EXIT_CONFIG, "{args:?}");
    }
}

#[test]
fn unreadable_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    std::fs::write(data.join("BAD.csv"), "when,how_much\n1,2\n").unwrap();
    let o = retint(
        &[
            "intervals",
            "--data-dir",
            data.to_str().unwrap(),
            "--strict",
        ],
        &tmp.path().join("o"),
    );
    assert_eq!(code(&o), EXIT_DATA);
    let missing = tmp.path().join("missing");
    let o = retint(
        &["intervals", "--data-dir", missing.to_str().unwrap()],
        &tmp.path().join("o2"),
    );
    assert_eq!(code(&o), EXIT_DATA);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["conditional"];
    args.extend(SMALL_IID);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&retint(&args, &a)), EXIT_OK);
    args.extend(["--jobs", "3"]);
    assert_eq!(code(&retint(&args, &b)), EXIT_OK);
    let files = listing(&a);
    assert_eq!(files, listing(&b));
    for f in files {
        assert_eq!(
            std::fs::read(a.join(&f)).unwrap(),
            std::fs::read(b.join(&f)).unwrap(),
            "{f}"
        );
    }
}
