mod support;

use std::time::Instant;

use support::*;

#[test]
fn gen_data_is_deterministic_and_rejects_zero_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a.bin", "b.bin"] {
        ok(
            d,
            &[
                "gen-data", "--out", out, "--count", "20", "--dim", "64", "--r-min", "0", "--r-max", "20", "--seed",
                "5",
            ],
        );
    }
    assert_eq!(
        std::fs::read(d.join("a.bin")).unwrap(),
        std::fs::read(d.join("b.bin")).unwrap()
    );
    let cfg = std::fs::read_to_string(d.join("a.bin.config")).unwrap();
    assert!(cfg.contains("seed=5\n") && cfg.contains("command=gen-data\n"));

    let zero = icad(d, &["gen-data", "--out", "c.bin", "--count", "0", "--dim", "64"]);
    assert_eq!(zero.status.code(), Some(1));
    let bad_dim = icad(d, &["gen-data", "--out", "c.bin", "--count", "3", "--dim", "65"]);
    assert_eq!(bad_dim.status.code(), Some(1));
}

#[test]
fn one_epoch_training_saves_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "gen-data", "--out", "t.bin", "--count", "50", "--dim", "16", "--seed", "1",
        ],
    );
    for run in ["1", "2"] {
        let vae = format!("vae{run}.bin");
        let svdd = format!("svdd{run}.bin");
        ok(
            d,
            &[
                "train-vae",
                "--data",
                "t.bin",
                "--out",
                &vae,
                "--epochs",
                "1",
                "--fine-tune-epochs",
                "0",
                "--seed",
                "4",
            ],
        );
        ok(
            d,
            &[
                "train-svdd",
                "--data",
                "t.bin",
                "--out",
                &svdd,
                "--epochs",
                "1",
                "--fine-tune-epochs",
                "0",
                "--seed",
                "4",
            ],
        );
    }
    for stem in ["vae", "svdd"] {
        let read = |run: &str, ext: &str| std::fs::read(d.join(format!("{stem}{run}.bin{ext}"))).unwrap();
        assert_eq!(read("1", ""), read("2", ""));
        assert_eq!(read("1", ".loss.csv"), read("2", ".loss.csv"));
    }
}

#[test]
fn detect_exit_codes() {
    let fx = Fixture::new();
    let d = fx.path();
    let run = |method: &str, input: &str, extra: &[&str]| {
        let model = format!("{method}.bin");
        let cal = format!("{method}.cal");
        let args = [
            &[
                "detect", "--method", method, "--model", &model, "--cal", &cal, "--input", input, "--out", "d.csv",
            ][..],
            extra,
        ]
        .concat();
        icad(d, &args).status.code()
    };
    assert_eq!(run("svdd", "ind.bin", &["--N", "10"]), Some(0));
    assert_eq!(run("vae", "ind.bin", &["--N", "10"]), Some(0));
    for method in ["svdd", "vae"] {
        assert_eq!(run(method, "ood.bin", &["--N", "10"]), Some(2));
        let csv = String::from_utf8(fx.read("d.csv")).unwrap();
        assert!(csv.lines().skip(1).any(|l| l.ends_with(",1")));
        let side = String::from_utf8(fx.read("d.csv.config")).unwrap();
        assert!(!side.contains("alarm_step=none"));
    }
    assert_eq!(run("svdd", "ind.bin", &["--N", "0"]), Some(1));
    // calibration of the other model
    let wrong = icad(
        d,
        &[
            "detect", "--method", "vae", "--model", "vae.bin", "--cal", "svdd.cal", "--input", "ind.bin", "--out",
            "x.csv",
        ],
    );
    assert_eq!(wrong.status.code(), Some(1));
}

#[test]
fn simulate_smoke_run_is_fast() {
    let fx = Fixture::new();
    let start = Instant::now();
    ok(
        fx.path(),
        &[
            "simulate",
            "--method",
            "svdd",
            "--model",
            "svdd.bin",
            "--cal",
            "svdd.cal",
            "--episodes",
            "1",
            "--out",
            "sim",
        ],
    );
    assert!(start.elapsed().as_secs_f64() < 10.0);
    let metrics = String::from_utf8(fx.read("sim/metrics.csv")).unwrap();
    assert!(metrics.starts_with("parameters,false_positive,false_negative,average_delay\n"));
    assert!(fx.file("sim/episode_000.csv").exists());
    assert!(fx.file("sim/run.config").exists());
}

#[test]
fn simulate_reads_config_file() {
    let fx = Fixture::new();
    std::fs::write(
        fx.file("run.cfg"),
        "method = vae\nmodel = vae.bin\ncal = vae.cal\nN = 4\ntau = 25\nepisodes = 2\n",
    )
    .unwrap();
    ok(fx.path(), &["simulate", "--config", "run.cfg", "--out", "sim"]);
    let side = String::from_utf8(fx.read("sim/run.config")).unwrap();
    assert!(side.contains("N=4\n") && side.contains("tau=25\n") && side.contains("method=vae\n"));
    let metrics = String::from_utf8(fx.read("sim/metrics.csv")).unwrap();
    assert!(metrics.contains("N=4 delta=6 tau=25"));
}

#[test]
fn bench_has_five_quartile_columns() {
    let fx = Fixture::new();
    ok(
        fx.path(),
        &[
            "bench", "--method", "vae", "--model", "vae.bin", "--cal", "vae.cal", "--N-list", "2,4", "--steps", "30",
            "--out", "b.csv",
        ],
    );
    let csv = String::from_utf8(fx.read("b.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,N,min,Q1,Q2,Q3,max"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn tune_selects_zero_fp_minimum_delay() {
    let fx = Fixture::new();
    ok(
        fx.path(),
        &[
            "tune",
            "--method",
            "svdd",
            "--model",
            "svdd.bin",
            "--cal",
            "svdd.cal",
            "--episodes",
            "6",
            "--grid",
            "tau=0:60:13",
            "--out",
            "t.csv",
        ],
    );
    let csv = String::from_utf8(fx.read("t.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let zero_fp: Vec<&Vec<&str>> = rows.iter().filter(|r| r[2].starts_with("0/")).collect();
    let selected: Vec<&Vec<&str>> = rows.iter().filter(|r| r[5] == "1").collect();
    assert_eq!(selected.len(), 1);
    if !zero_fp.is_empty() {
        assert!(selected[0][2].starts_with("0/"));
        let delay = |r: &Vec<&str>| r[4].parse::<f64>().unwrap_or(f64::INFINITY);
        let fn_count = |r: &Vec<&str>| r[3].split('/').next().unwrap().parse::<usize>().unwrap();
        for r in &zero_fp {
            assert!((fn_count(selected[0]), delay(selected[0])) <= (fn_count(r), delay(r)));
        }
    }
    let side = String::from_utf8(fx.read("t.csv.config")).unwrap();
    assert!(side.contains("tau="));
}

#[test]
fn detect_and_simulate_rerun_byte_identical() {
    let fx = Fixture::new();
    assert!(reruns_are_identical(&fx));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(icad(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(icad(dir.path(), &["frobnicate"]).status.code(), Some(1));
}
