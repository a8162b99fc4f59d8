#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn icad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icad"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn icad")
}

pub fn ok(dir: &Path, args: &[&str]) {
    let out = icad(dir, args);
    assert!(
        out.status.success(),
        "icad {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small 8x8 datasets, models and calibration files in a temporary directory.
pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        ok(
            d,
            &[
                "gen-data",
                "--out",
                "train.bin",
                "--count",
                "400",
                "--dim",
                "64",
                "--seed",
                "1",
            ],
        );
        ok(
            d,
            &[
                "gen-data", "--out", "cal.bin", "--count", "400", "--dim", "64", "--seed", "2",
            ],
        );
        ok(
            d,
            &[
                "gen-data", "--out", "ind.bin", "--count", "60", "--dim", "64", "--seed", "3",
            ],
        );
        ok(
            d,
            &[
                "gen-data", "--out", "ood.bin", "--count", "60", "--dim", "64", "--r-min", "30", "--r-max", "40",
                "--seed", "4",
            ],
        );
        let train = [
            "--data",
            "train.bin",
            "--epochs",
            "10",
            "--fine-tune-epochs",
            "2",
            "--hidden",
            "16",
        ];
        ok(
            d,
            &[&["train-vae", "--out", "vae.bin", "--latent", "4"][..], &train[..]].concat(),
        );
        ok(
            d,
            &[
                &["train-svdd", "--out", "svdd.bin", "--rep", "8", "--pretrain"][..],
                &train[..],
            ]
            .concat(),
        );
        ok(
            d,
            &[
                "calibrate",
                "--model",
                "vae.bin",
                "--scorer",
                "vae",
                "--cal-data",
                "cal.bin",
                "--out",
                "vae.cal",
                "--cal-samples",
                "10",
            ],
        );
        ok(
            d,
            &[
                "calibrate",
                "--model",
                "svdd.bin",
                "--scorer",
                "svdd",
                "--cal-data",
                "cal.bin",
                "--out",
                "svdd.cal",
            ],
        );
        Self { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.file(name)).unwrap()
    }
}

/// Runs `detect` and `simulate` twice with fixed seeds; true when both
/// produce byte-identical CSV output.
pub fn reruns_are_identical(fx: &Fixture) -> bool {
    let d = fx.path();
    let mut same = true;
    for method in ["vae", "svdd"] {
        let model = format!("{method}.bin");
        let cal = format!("{method}.cal");
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = format!("detect_{method}_{run}.csv");
            icad(
                d,
                &[
                    "detect", "--method", method, "--model", &model, "--cal", &cal, "--input", "ood.bin", "--N", "5",
                    "--seed", "7", "--out", &out,
                ],
            );
            let sim = format!("sim_{method}_{run}");
            ok(
                d,
                &[
                    "simulate",
                    "--method",
                    method,
                    "--model",
                    &model,
                    "--cal",
                    &cal,
                    "--episodes",
                    "4",
                    "--N",
                    "5",
                    "--seed",
                    "3",
                    "--out",
                    &sim,
                ],
            );
            let mut files: Vec<_> = std::fs::read_dir(fx.file(&sim))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            let mut bytes = fx.read(&out);
            for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")) {
                bytes.extend(std::fs::read(f).unwrap());
            }
            outputs.push(bytes);
        }
        same &= outputs[0] == outputs[1] && !outputs[0].is_empty();
    }
    same
}
