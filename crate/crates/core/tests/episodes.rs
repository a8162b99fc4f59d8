mod common;

use common::*;
use icad::conformal::DetectorConfig;
use icad::episodes::*;

fn cfg(tau: f64) -> DetectorConfig {
    DetectorConfig {
        n: 5,
        delta: 2.0,
        tau,
        seed: 9,
    }
}

#[test]
fn suites_are_deterministic() {
    let (gen, vae, svdd) = small_pipelines();
    let suite = SuiteConfig {
        in_dist: 3,
        ood: 3,
        max_steps: 120,
        seed: 5,
    };
    for p in [&vae, &svdd] {
        let a = run_suite(&gen, p, &cfg(20.0), &suite).unwrap();
        let b = run_suite(&gen, p, &cfg(20.0), &suite).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        let csv_a: Vec<String> = a.outcomes.iter().map(|o| episode_csv(&o.rows)).collect();
        let csv_b: Vec<String> = b.outcomes.iter().map(|o| episode_csv(&o.rows)).collect();
        assert_eq!(csv_a, csv_b);
    }
}

#[test]
fn infinite_threshold_misses_every_ood_episode() {
    let (gen, vae, svdd) = small_pipelines();
    let suite = SuiteConfig {
        in_dist: 2,
        ood: 4,
        max_steps: 120,
        seed: 6,
    };
    for p in [&vae, &svdd] {
        let m = run_suite(&gen, p, &cfg(f64::INFINITY), &suite).unwrap().metrics;
        assert_eq!(m.false_positives, 0);
        assert_eq!(m.false_negatives, 4);
        assert_eq!(m.mean_delay, None);
        assert_eq!(m.delay_cell(), "n/a");
    }
}

#[test]
fn suite_without_ood_episodes_reports_na() {
    let (gen, _, svdd) = small_pipelines();
    let suite = SuiteConfig {
        in_dist: 2,
        ood: 0,
        max_steps: 50,
        seed: 7,
    };
    let m = run_suite(&gen, &svdd, &cfg(f64::INFINITY), &suite).unwrap().metrics;
    assert_eq!(m.false_negative_cell(), "n/a");
    assert_eq!(m.false_positive_cell(), "0/2");
}

#[test]
fn episode_stops_at_first_alarm() {
    let (gen, vae, svdd) = small_pipelines();
    let schedule = DriftSchedule::new(5.0, 10, 100, 0.5).unwrap();
    for p in [&vae, &svdd] {
        // tau = -inf alarms on the first step where the detector can fire
        let out = run_episode(&gen, &schedule, p, &cfg(-1e9), 150, 1).unwrap();
        let alarm = out.result.alarm_step.expect("alarm");
        assert_eq!(out.rows.len() as u64, alarm + 1);
        assert!(out.rows.last().unwrap().record.alarm);
        assert_eq!(out.result.verdict, Verdict::FalsePositive);
    }
}

#[test]
fn replayed_traces_match_live_runs() {
    let (gen, vae, svdd) = small_pipelines();
    let schedule = DriftSchedule::new(8.0, 20, 95, 0.4).unwrap();
    for p in [&vae, &svdd] {
        let trace = episode_trace(&gen, &schedule, p, 5, 140, 3).unwrap();
        let live = run_episode(&gen, &schedule, p, &DetectorConfig { seed: 0, ..cfg(30.0) }, 140, 3).unwrap();
        let replay = first_alarm(p.method(), &trace, 2.0, 30.0);
        assert_eq!(live.result.alarm_step, replay);
    }
}

#[test]
fn tune_selects_zero_fp_minimum_delay() {
    let (gen, vae, _) = small_pipelines();
    let suite = SuiteConfig {
        in_dist: 3,
        ood: 3,
        max_steps: 120,
        seed: 8,
    };
    let grid = TuneGrid {
        deltas: TuneGrid::linspace(0.0, 20.0, 5),
        taus: TuneGrid::linspace(0.0, 100.0, 11),
    };
    let report = tune(&gen, &vae, 5, &suite, &grid).unwrap();
    let best = report.best();
    let key = |p: &TunePoint| {
        (
            p.metrics.false_positives,
            p.metrics.false_negatives,
            p.metrics.mean_delay.unwrap_or(f64::INFINITY),
        )
    };
    for p in &report.points {
        assert!(key(best) <= key(p));
    }
    // the chosen point reproduces on a live run
    let live = run_suite(&gen, &vae, &report.best_config(5, 0), &suite)
        .unwrap()
        .metrics;
    assert_eq!(live.false_positives, best.metrics.false_positives);
    assert_eq!(live.false_negatives, best.metrics.false_negatives);
}

#[test]
fn timing_rows_have_five_ordered_quartiles() {
    let (gen, vae, svdd) = small_pipelines();
    for p in [&vae, &svdd] {
        let rows = benchmark_timing(&gen, p, 50, &[2, 4], 1).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.millis.windows(2).all(|w| w[0] <= w[1]));
        }
        let csv = timing_csv(&rows);
        assert!(csv.starts_with("method,N,min,Q1,Q2,Q3,max\n"));
    }
}
