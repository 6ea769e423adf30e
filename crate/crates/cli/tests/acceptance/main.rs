//! Acceptance suite: every release criterion runs here at its stated
//! tolerance and prints one pass/fail line (visible with
//! `cargo test --test acceptance -- --nocapture`).

mod oracles;

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use profile_sampler::cox_current::{icm_solve, IcmOptions};
use profile_sampler::cox_right::generate_right_censored;
use profile_sampler::inference::{info_directional, info_matrix};
use profile_sampler::isotonic::pava;
use profile_sampler::partly_linear::{generate_partly_linear, sieve_fit, SieveObjective};
use profile_sampler::prior::Prior;
use profile_sampler::sampler::{chain_diagnostics, metropolis_run, tune_proposal};
use profile_sampler::seed::rng_from;
use profile_sampler::spline::{SieveOptions, SplineBasis};
use profile_sampler::types::{CoxObservation, Dataset, ModelKind, ParameterPoint};
use profile_sampler_cli::config::StudyConfig;
use profile_sampler_cli::study::{mask_runtime_column, run_study, StudyOutput};

use oracles::*;

fn pass(criterion: &str, detail: String) {
    println!("[PASS] {criterion}: {detail}");
}

#[test]
fn criterion_01_pava_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng_from(1001);
    let mut worst: f64 = 0.0;
    for _ in 0..4000 {
        let n = 1 + (rng.random::<u64>() % 8) as usize;
        let values: Vec<f64> = (0..n).map(|_| 10.0 * rng.random::<f64>() - 5.0).collect();
        let weights: Vec<f64> = (0..n).map(|_| 0.1 + 2.9 * rng.random::<f64>()).collect();
        let fast = pava(&values, &weights).unwrap();
        let exact = pava_partition_oracle(&values, &weights);
        for (a, b) in fast.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
        assert!(
            fast.iter().zip(&exact).all(|(a, b)| (a - b).abs() <= 1e-10),
            "pava mismatch: {values:?} w={weights:?}\n fast {fast:?}\n exact {exact:?}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "runtime {elapsed:.1}s exceeds 10s");
    pass(
        "criterion 1 (PAVA oracle equivalence)",
        format!("4000 instances, max deviation {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_breslow_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng_from(2002);
    let mut worst: f64 = 0.0;
    let theta_grid: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    for _case in 0..100 {
        let n = 2 + (rng.random::<u64>() % 7) as usize;
        let mut rows: Vec<(f64, bool, f64)> = (0..n)
            .map(|_| {
                (
                    3.0 * rng.random::<f64>(),
                    rng.random::<f64>() < 0.7,
                    2.0 * rng.random::<f64>() - 1.0,
                )
            })
            .collect();
        // cap the event count at 6
        let mut events = rows.iter().filter(|r| r.1).count();
        for row in rows.iter_mut() {
            if events <= 6 {
                break;
            }
            if row.1 {
                row.1 = false;
                events -= 1;
            }
        }
        let data = cox_dataset(&rows);
        for &theta in &theta_grid {
            let closed = profile_sampler::cox_right::breslow_profile(&scalar(theta), &data)
                .unwrap()
                .log_pl;
            let oracle = breslow_grid_oracle(&data, theta);
            let diff = (closed - oracle).abs();
            worst = worst.max(diff);
            assert!(diff <= 1e-6, "breslow mismatch {diff:.2e} at theta {theta}: {rows:?}");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime {elapsed:.1}s exceeds 30s");
    pass(
        "criterion 2 (Breslow oracle equivalence)",
        format!("100 datasets x 9 thetas, max |diff| {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_03_icm_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rng_from(3003);
    let opts = IcmOptions::default();
    let mut worst: f64 = 0.0;
    for _case in 0..50 {
        let n = 1 + (rng.random::<u64>() % 4) as usize;
        let rows: Vec<(f64, bool, f64)> = (0..n)
            .map(|_| {
                (
                    3.0 * rng.random::<f64>(),
                    rng.random::<f64>() < 0.5,
                    2.0 * rng.random::<f64>() - 1.0,
                )
            })
            .collect();
        let data = cox_dataset(&rows);
        let theta = 2.0 * rng.random::<f64>() - 1.0;
        let fit = icm_solve(&scalar(theta), &data, &opts).unwrap();
        // feasibility is exact
        assert!(fit.solution.x.windows(2).all(|w| w[0] <= w[1]));
        assert!(fit
            .solution
            .x
            .iter()
            .all(|v| (0.0..=opts.lambda_max).contains(v)));
        let oracle = icm_monotone_grid_oracle(&data, theta, opts.lambda_max);
        let diff = (fit.log_pl - oracle).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-5, "icm mismatch {diff:.2e}: {rows:?} theta {theta}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "runtime {elapsed:.1}s exceeds 2min");
    pass(
        "criterion 3 (ICM oracle equivalence)",
        format!("50 instances, max |diff| {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_04_quadratic_exactness() {
    let n = 400usize;
    let nf = n as f64;
    let steps = [nf.powf(-1.0 / 3.0), nf.powf(-0.5), 0.1];

    // one-dimensional curvature 4
    let f1 = |p: &ParameterPoint| Ok(-(nf / 2.0) * 4.0 * (p.coord(0) - 0.2).powi(2));
    let hat1 = scalar(0.2);
    let mut worst: f64 = 0.0;
    for &s in &steps {
        let dir = info_directional(f1, &hat1, &[1.0], s, n).unwrap();
        worst = worst.max((dir - 4.0).abs() / 4.0);
        let mat = info_matrix(f1, &hat1, s, n).unwrap();
        worst = worst.max((mat.matrix[(0, 0)] - 4.0).abs() / 4.0);
    }

    // two-dimensional curvature [[1, 0.5], [0.5, 2]]
    let a = [[1.0, 0.5], [0.5, 2.0]];
    let f2 = |p: &ParameterPoint| {
        let x = [p.coord(0) - 0.6, p.coord(1) + 0.1];
        let mut q = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                q += x[i] * a[i][j] * x[j];
            }
        }
        Ok(-(nf / 2.0) * q)
    };
    let hat2 = ParameterPoint::new(vec![0.6, -0.1]).unwrap();
    let unit = [0.6, 0.8]; // arbitrary unit direction
    for &s in &steps {
        let mat = info_matrix(f2, &hat2, s, n).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((mat.matrix[(i, j)] - a[i][j]).abs() / a[i][j].abs());
            }
        }
        let dir = info_directional(f2, &hat2, &unit, s, n).unwrap();
        let expect = 0.6 * 0.6 * a[0][0] + 2.0 * 0.6 * 0.8 * a[0][1] + 0.8 * 0.8 * a[1][1];
        worst = worst.max((dir - expect).abs() / expect);
    }
    assert!(worst <= 1e-10, "relative error {worst:.2e} exceeds 1e-10");
    pass(
        "criterion 4 (quadratic exactness of discretized information)",
        format!("max relative error {worst:.2e} over steps {steps:?}"),
    );
}

#[test]
fn criterion_05_sampler_correctness() {
    let flat = Prior::Flat;
    let origin = scalar(0.0);

    // tuned acceptance lands in [0.2, 0.4] for three target scales
    let mut tuned_sds = Vec::new();
    for (k, sigma) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let tuned = tune_proposal(
            |p: &ParameterPoint| Ok(-0.5 * (p.coord(0) / sigma).powi(2)),
            &flat,
            &origin,
            5000 + k as u64,
        )
        .unwrap();
        assert!(tuned.converged, "tuning failed for sigma {sigma}");
        assert!(
            (0.2..=0.4).contains(&tuned.acceptance),
            "acceptance {} outside [0.2, 0.4] for sigma {sigma}",
            tuned.acceptance
        );
        tuned_sds.push((sigma, tuned.sd[0], tuned.acceptance));
    }

    // standard-normal moments at the tuned scale
    let tuned = tune_proposal(
        |p: &ParameterPoint| Ok(-0.5 * p.coord(0).powi(2)),
        &flat,
        &origin,
        5107,
    )
    .unwrap();
    let chain = metropolis_run(
        |p: &ParameterPoint| Ok(-0.5 * p.coord(0).powi(2)),
        &flat,
        &origin,
        &tuned.sd,
        100_000,
        0,
        515,
    )
    .unwrap();
    let diag = chain_diagnostics(&chain).unwrap();
    let mean = diag.mean[0];
    let var = diag.sd[0] * diag.sd[0];
    assert!(mean.abs() <= 0.02, "mean {mean} outside ±0.02");
    assert!((0.95..=1.05).contains(&var), "variance {var} outside [0.95, 1.05]");
    pass(
        "criterion 5 (sampler correctness)",
        format!(
            "mean {mean:.4}, variance {var:.4}; tuned acceptances {:?}",
            tuned_sds
                .iter()
                .map(|(s, _, a)| format!("sigma {s}: {a:.3}"))
                .collect::<Vec<_>>()
        ),
    );
}

struct SharedStudy {
    output: StudyOutput,
    elapsed_s: f64,
}

fn right_censored_desk_study() -> &'static SharedStudy {
    static STUDY: OnceLock<SharedStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let config = StudyConfig {
            threads: 1,
            ..StudyConfig::desk_default(ModelKind::CoxRight)
        };
        let start = Instant::now();
        let output = run_study(&config).expect("desk-scale study must run");
        SharedStudy {
            output,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_06_table1_desk_scale() {
    let study = right_censored_desk_study();
    assert!(
        study.elapsed_s < 600.0,
        "runtime {:.1}s exceeds 10 min",
        study.elapsed_s
    );
    let rows = &study.output.rows;
    assert_eq!(rows.len(), 2);
    let columns = |r: &profile_sampler_cli::study::StudyRow| [r.scaled_mle_cm, r.scaled_se, r.scaled_l, r.scaled_u];
    let at50 = columns(&rows[0]);
    let at100 = columns(&rows[1]);
    for k in 0..4 {
        let ratio = at100[k] / at50[k];
        assert!(
            (1.0 / 3.0..=3.0).contains(&ratio),
            "column {k} ratio {ratio:.3} outside [1/3, 3] (n=50 {:.4}, n=100 {:.4})",
            at50[k],
            at100[k]
        );
        for v in [at50[k], at100[k]] {
            assert!(v > 0.0 && v < 10.0, "column {k} mean {v:.4} outside (0, 10)");
        }
    }
    assert_eq!(rows[0].failures + rows[1].failures, 0, "unexpected replicate failures");
    pass(
        "criterion 6 (Table 1 desk scale)",
        format!(
            "n=50 {:?}, n=100 {:?}, coverage ({:.2}, {:.2}), {:.1}s",
            at50.map(|v| (v * 1e4).round() / 1e4),
            at100.map(|v| (v * 1e4).round() / 1e4),
            rows[0].coverage,
            rows[1].coverage,
            study.elapsed_s
        ),
    );
}

#[test]
fn criterion_07_table2_desk_scale() {
    let config = StudyConfig {
        reps: 25,
        threads: 1,
        ..StudyConfig::desk_default(ModelKind::CoxCurrent)
    };
    let start = Instant::now();
    let output = run_study(&config).expect("current-status study must run");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1800.0, "runtime {elapsed:.1}s exceeds 30 min");

    let rows = &output.rows;
    let columns = |r: &profile_sampler_cli::study::StudyRow| [r.scaled_mle_cm, r.scaled_se, r.scaled_l, r.scaled_u];
    let at50 = columns(&rows[0]);
    let at100 = columns(&rows[1]);
    for k in 0..4 {
        let ratio = at100[k] / at50[k];
        assert!(
            (1.0 / 3.0..=3.0).contains(&ratio),
            "column {k} ratio {ratio:.3} outside [1/3, 3] (n=50 {:.4}, n=100 {:.4})",
            at50[k],
            at100[k]
        );
        for v in [at50[k], at100[k]] {
            assert!(v > 0.0 && v < 20.0, "column {k} mean {v:.4} outside (0, 20)");
        }
    }
    pass(
        "criterion 7 (Table 2 desk scale)",
        format!(
            "n=50 {:?}, n=100 {:?}, failures {}, {:.1}s",
            at50.map(|v| (v * 1e4).round() / 1e4),
            at100.map(|v| (v * 1e4).round() / 1e4),
            rows[0].failures + rows[1].failures,
            elapsed
        ),
    );
}

#[test]
fn criterion_08_plr_threshold_matches_chi_square() {
    // frozen right-censored dataset, full-scale chain
    use profile_sampler::inference::{build_report, ReportConfig};
    let theta0 = scalar(1.0);
    let data = generate_right_censored(200, &theta0, 4.394_531_25, 80_808).unwrap();
    let config = ReportConfig {
        chain_total: 20_000,
        chain_burn_in: 5000,
        ..ReportConfig::for_model(ModelKind::CoxRight, 80_808)
    };
    let report = build_report(ModelKind::CoxRight, &data, &config).unwrap();
    let target = 3.841_458_820_694_124;
    assert!(
        (report.chi_b - target).abs() <= 0.5,
        "chi_b {} outside {target} ± 0.5",
        report.chi_b
    );
    pass(
        "criterion 8 (posterior PLR threshold vs chi-square)",
        format!("chi_b {:.4} vs chi2(1, 0.95) {target:.4}", report.chi_b),
    );
}

#[test]
fn criterion_09_coverage_sanity() {
    let config = StudyConfig {
        sizes: vec![200],
        reps: 100,
        threads: 1,
        master_seed: 909_090,
        ..StudyConfig::desk_default(ModelKind::CoxRight)
    };
    let output = run_study(&config).unwrap();
    let coverage = output.rows[0].coverage;
    assert!(
        (0.90..=0.99).contains(&coverage),
        "coverage {coverage} outside [0.90, 0.99]"
    );
    pass(
        "criterion 9 (quantile credible interval coverage)",
        format!(
            "coverage {coverage:.3} over 100 replicates at n = 200 ({} failures)",
            output.rows[0].failures
        ),
    );
}

#[test]
fn criterion_10_se_ratio_agreement() {
    let study = right_censored_desk_study();
    let ratios: Vec<f64> = study
        .output
        .replicates
        .iter()
        .filter(|r| r.n == 100 && r.succeeded())
        .map(|r| r.se_m / r.se_n)
        .collect();
    assert!(!ratios.is_empty());
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (0.8..=1.25).contains(&mean),
        "mean SE_M/SE_N ratio {mean:.4} outside [0.8, 1.25]"
    );
    pass(
        "criterion 10 (chain vs numeric standard errors)",
        format!("mean SE_M/SE_N {mean:.4} over {} replicates at n = 100", ratios.len()),
    );
}

#[test]
fn criterion_11_sieve_gradient_and_monotone_newton() {
    let theta = scalar(1.0);
    let sine = |z: f64| (2.0 * std::f64::consts::PI * z).sin();
    let opts = SieveOptions::default();
    let mut checked_points = 0usize;
    let mut worst: f64 = 0.0;

    for seed in 0..20u64 {
        let data = generate_partly_linear(100, &theta, &sine, -2.0, 4.0, 7000 + seed).unwrap();

        // analytic gradient vs central finite differences
        let zs: Vec<f64> = data.partly_linear().unwrap().iter().map(|o| o.z).collect();
        let basis = SplineBasis::build(&zs, &opts).unwrap();
        let objective = SieveObjective::new(&theta, &data, &basis).unwrap();
        let p = objective.n_coefficients();
        let mut rng = rng_from(9000 + seed);
        let points = if seed == 0 { 10 } else { 1 };
        for _ in 0..points {
            let beta: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
            let lambda = rng.random::<f64>();
            let grad = objective.grad_penalized(&beta, lambda);
            let h = 1e-5;
            for j in 0..p {
                let mut up = beta.clone();
                up[j] += h;
                let mut down = beta.clone();
                down[j] -= h;
                let fd = (objective.penalized(&up, lambda) - objective.penalized(&down, lambda)) / (2.0 * h);
                let rel = (fd - grad[j]).abs() / grad[j].abs().max(1e-3);
                worst = worst.max(rel);
                assert!(rel <= 1e-5, "gradient mismatch {rel:.2e} (seed {seed}, coord {j})");
            }
            checked_points += 1;
        }

        // penalized Newton objective is monotone over accepted iterations
        let fit = sieve_fit(&theta, &data, &opts).unwrap();
        for w in fit.newton_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()),
                "newton trace decreased on seed {seed}: {} -> {}",
                w[0],
                w[1]
            );
        }
        assert!(fit.j2 + fit.sup_norm <= opts.m + 1e-12);
    }
    pass(
        "criterion 11 (sieve gradient and monotone Newton)",
        format!("{checked_points} random coefficient points, max relative gradient error {worst:.2e}"),
    );
}

#[test]
fn criterion_12_study_determinism_across_threads() {
    let dir = std::env::temp_dir().join(format!("ps_acceptance_det_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("study.cfg");
    std::fs::write(
        &config_path,
        "model = cox_right\nsizes = 30\nreps = 4\nchain_total = 600\nchain_burn_in = 200\nmaster_seed = 99\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for threads in [1usize, 2, 8] {
        let out_dir = dir.join(format!("t{threads}"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_profile-sampler"))
            .args([
                "study",
                "--config",
                config_path.to_str().unwrap(),
                "--threads",
                &threads.to_string(),
                "--out-dir",
                out_dir.to_str().unwrap(),
            ])
            .env_remove("PROFILE_SAMPLER_THREADS")
            .output()
            .expect("study run");
        assert!(
            status.status.success(),
            "study at {threads} threads failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
        let csv = std::fs::read_to_string(out_dir.join("replicates.csv")).unwrap();
        // wall time is the one legitimately nondeterministic column
        outputs.push(mask_runtime_column(&csv));
    }
    assert_eq!(outputs[0], outputs[1], "1-thread vs 2-thread replicate CSV differs");
    assert_eq!(outputs[0], outputs[2], "1-thread vs 8-thread replicate CSV differs");
    std::fs::remove_dir_all(&dir).ok();
    pass(
        "criterion 12 (study determinism across threads)",
        "per-replicate CSV byte-identical at 1, 2 and 8 threads (runtime column masked)".to_string(),
    );
}

// keep one non-criterion guard: the degenerate all-censored dataset flows
// through the report pipeline without panicking
#[test]
fn report_survives_all_censored_data() {
    use profile_sampler::inference::{build_report, ReportConfig};
    let rows: Vec<CoxObservation> = (0..30)
        .map(|i| CoxObservation::new(0.1 + i as f64 * 0.05, false, vec![0.5]).unwrap())
        .collect();
    let data = Dataset::from_cox(rows).unwrap();
    let config = ReportConfig {
        chain_total: 300,
        chain_burn_in: 100,
        ..ReportConfig::for_model(ModelKind::CoxRight, 3)
    };
    let report = build_report(ModelKind::CoxRight, &data, &config).unwrap();
    assert!(!report.warnings.is_empty());
}
