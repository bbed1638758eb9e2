//! Acceptance suite: one test per reproduction target, each printing a
//! single PASS/FAIL line to stderr (visible without `--nocapture`).
//!
//! Runs at full trial counts; expect several minutes on one core.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sucr_core::channel::{snr_db_to_beta, SystemParams, UserTerminal};
use sucr_core::estimators::{log_f1, EstimatorKind, Lambdas, LikelihoodKernel};
use sucr_core::harness::{
    emit_results, run_experiment_with_threads, run_two_user_comparison, run_two_user_sweep,
    scan_access_probability, CellSetup, EstimatorComparison, ExperimentConfig, ExperimentResult,
    OutputFormat, PaScan, Preset, ResultRow,
};
use sucr_core::protocol::{
    dl_receive_with_noise, draw_dl_noise, split_observation, ls_estimate, precode, ul_receive,
    ContentionSet,
};
use sucr_core::resolution::BiasPolicy;

use common::{convolution_density, correlation, integrate, mean_var, z_support};

const TRIALS: u64 = 10_000;

fn report(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{tag}] {name}: {detail}");
}

fn info(name: &str, detail: &str) {
    let _ = writeln!(std::io::stderr(), "[INFO] {name}: {detail}");
}

fn row_at(rows: &[ResultRow], x: f64) -> &ResultRow {
    rows.iter()
        .find(|r| r.sweep_value == x)
        .unwrap_or_else(|| panic!("no row at {x}"))
}

// ---------------------------------------------------------------- two users

struct TwoUserRuns {
    m100: EstimatorComparison,
    m300: EstimatorComparison,
}

fn two_user_runs() -> &'static TwoUserRuns {
    static RUNS: OnceLock<TwoUserRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let run = |m| {
            let mut cfg = ExperimentConfig::preset_default(Preset::TwoUserSweep);
            cfg.params.antennas = m;
            cfg.trials = TRIALS;
            run_two_user_comparison(&cfg).expect("two-user sweep")
        };
        TwoUserRuns {
            m100: run(100),
            m300: run(300),
        }
    })
}

#[test]
fn two_user_sweep_landmarks() {
    let runs = two_user_runs();
    let ml100 = &runs.m100.ml.rows;
    let ml300 = &runs.m300.ml.rows;
    let p7 = row_at(ml100, 7.0).p_resolved;
    let p13 = row_at(ml100, 13.0).p_resolved;
    let p10 = row_at(ml100, 10.0).p_resolved;
    let apart = p7 > 0.90 && p13 > 0.90;
    let equal = p10 > 0.50 && p10 < 0.70;
    let worse: Vec<String> = ml100
        .iter()
        .zip(ml300)
        .filter(|(a, _)| (a.sweep_value - 10.0).abs() >= 1.0)
        .filter(|(a, b)| b.p_resolved < a.p_resolved)
        .map(|(a, b)| format!("{} dB: {:.4} < {:.4}", a.sweep_value, b.p_resolved, a.p_resolved))
        .collect();
    let more_antennas = worse.is_empty();
    report(
        "two-user, 3 dB apart",
        apart,
        &format!("M=100 ML p(7 dB)={p7:.4}, p(13 dB)={p13:.4}, need > 0.90"),
    );
    report(
        "two-user, equal gains",
        equal,
        &format!("M=100 ML p(10 dB)={p10:.4}, need in (0.50, 0.70)"),
    );
    report(
        "two-user, M=300 >= M=100 off the diagonal",
        more_antennas,
        &if more_antennas {
            "holds at every |Δ| >= 1 dB".to_string()
        } else {
            worse.join("; ")
        },
    );
    assert!(apart && equal && more_antennas);
}

#[test]
fn ml_and_approx_agree() {
    let runs = two_user_runs();
    let g100 = runs.m100.max_gap();
    let g300 = runs.m300.max_gap();
    let pass = g100 <= 0.02 && g300 <= 0.02;
    report(
        "ML/approx agreement",
        pass,
        &format!("max |ΔP| = {g100:.4} at M=100, {g300:.4} at M=300, need <= 0.02"),
    );
    assert!(pass);
}

#[test]
fn oracle_resolves_distinct_pairs() {
    let mut cfg = ExperimentConfig::preset_default(Preset::TwoUserSweep);
    cfg.estimator = EstimatorKind::Oracle;
    cfg.trials = TRIALS;
    cfg.sweep_grid.retain(|&s| s != cfg.reference_snr_db);
    let result = run_two_user_sweep(&cfg).expect("oracle sweep");
    let misses: Vec<String> = result
        .rows
        .iter()
        .filter(|r| r.p_resolved != 1.0 || r.trials_effective != TRIALS)
        .map(|r| format!("{} dB: {}", r.sweep_value, r.p_resolved))
        .collect();
    let pass = misses.is_empty();
    report(
        "oracle baseline",
        pass,
        &if pass {
            format!("{} SNR pairs x {TRIALS} trials all resolved", result.rows.len())
        } else {
            misses.join("; ")
        },
    );
    assert!(pass);
}

// --------------------------------------------------------------- cell runs

#[test]
fn antennas_sweep_landmarks() {
    let mut cfg = ExperimentConfig::preset_default(Preset::AntennasSweep);
    cfg.trials = TRIALS;
    let result = run_experiment_with_threads(&cfg, None).expect("antennas sweep");
    let rows = &result.rows;
    let p1 = row_at(rows, 1.0).p_resolved;
    let p50 = row_at(rows, 50.0).p_resolved;
    let at_one = (p1 - 0.50).abs() <= 0.05;
    let at_fifty = (p50 - 0.85).abs() <= 0.05;
    let drops: Vec<String> = rows
        .windows(2)
        .filter(|w| w[1].p_resolved < w[0].p_resolved - (w[0].ci_halfwidth + w[1].ci_halfwidth))
        .map(|w| format!("M={} -> M={}", w[0].sweep_value, w[1].sweep_value))
        .collect();
    let monotone = drops.is_empty();
    let pa: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sweep_value >= 50.0)
        .map(|r| (r.sweep_value, r.pa_used.expect("cell rows carry P_a")))
        .collect();
    let pa_ok = pa.iter().all(|&(_, p)| (p - 0.62).abs() <= 0.05 + 1e-12);
    let curve: Vec<String> = rows
        .iter()
        .map(|r| format!("M={}: {:.4}@{}", r.sweep_value, r.p_resolved, r.pa_used.unwrap()))
        .collect();
    info("antennas sweep", &curve.join(", "));
    report(
        "antennas sweep, M=1",
        at_one,
        &format!("p={p1:.4}, need 0.50 ± 0.05"),
    );
    report(
        "antennas sweep, M=50",
        at_fifty,
        &format!("p={p50:.4}, need 0.85 ± 0.05"),
    );
    report(
        "antennas sweep, nondecreasing within CI",
        monotone,
        &if monotone {
            "no significant drop".to_string()
        } else {
            drops.join("; ")
        },
    );
    report(
        "antennas sweep, optimal P_a for M >= 50",
        pa_ok,
        &format!(
            "{}, need 0.62 ± 0.05",
            pa.iter()
                .map(|(m, p)| format!("M={m}: {p}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    assert!(at_one && at_fifty && monotone && pa_ok);
}

fn bias_scan(delta: f64, pa_grid: &[f64]) -> PaScan {
    let cfg = ExperimentConfig::preset_default(Preset::BiasSweep);
    let setup = CellSetup {
        params: cfg.params,
        cell: cfg.cell_or_default(),
        estimator: cfg.estimator,
        bias: BiasPolicy::new(delta).unwrap(),
        pa_grid,
        trials: TRIALS,
        seed: cfg.seed,
    };
    scan_access_probability(&setup).expect("bias scan")
}

#[test]
fn bias_sweep_landmarks() {
    let grid = ExperimentConfig::preset_default(Preset::BiasSweep).pa_grid;
    let fmt = |scan: &PaScan, delta: f64| {
        let (pa, row) = scan.best_row(delta);
        let all = scan.tallies[scan.best_index()].resolved_fraction_of_all();
        (row, pa, all)
    };
    let s0 = bias_scan(0.0, &grid);
    let s2 = bias_scan(2.0, &grid);
    let (r0, pa0, all0) = fmt(&s0, 0.0);
    let (r2, pa2, all2) = fmt(&s2, 2.0);
    let neutral = (r0.p_resolved - 0.90).abs() <= 0.05
        && (r0.p_false_positive - 0.05).abs() <= 0.05
        && (r0.p_false_negative - 0.05).abs() <= 0.05;
    let cautious_fp = r2.p_false_positive < 0.01;
    let cautious_res = (r2.p_resolved - 0.75).abs() <= 0.05;
    report(
        "bias δ=0",
        neutral,
        &format!(
            "(resolved, FP, FN) = ({:.4}, {:.4}, {:.4}) at P_a={pa0}, need (0.90, 0.05, 0.05) ± 0.05",
            r0.p_resolved, r0.p_false_positive, r0.p_false_negative
        ),
    );
    report(
        "bias δ=+2, false positives",
        cautious_fp,
        &format!("FP={:.4} at P_a={pa2}, need < 0.01", r2.p_false_positive),
    );
    report(
        "bias δ=+2, resolved",
        cautious_res,
        &format!("resolved={:.4} at P_a={pa2}, need 0.75 ± 0.05", r2.p_resolved),
    );
    info(
        "bias sweep",
        &format!(
            "resolved share of all pilots incl. idle: δ=0 {all0:.4}, δ=+2 {all2:.4}"
        ),
    );
    assert!(neutral && cautious_fp && cautious_res);
}

// ---------------------------------------------------------- f1 and the observation split

fn params(m: usize) -> SystemParams {
    SystemParams::default().with_antennas(m)
}

#[test]
fn f1_normalizes() {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (m, beta, alpha) in [(10, 1.0, 2.0), (50, 2.0, 5.0), (100, 10.0, 20.0)] {
        let p = params(m);
        let lam = Lambdas::new(beta, alpha, &p);
        let (lo, hi) = z_support(m, lam.lambda1, lam.lambda2);
        let mass = integrate(
            |z| log_f1(z, alpha, beta, &p).unwrap().exp(),
            lo,
            hi,
            64,
            1e-14,
        );
        worst = worst.max((mass - 1.0).abs());
        parts.push(format!("M={m}: {mass:.12}"));
    }
    let pass = worst <= 1e-6;
    report(
        "f1 integrates to one",
        pass,
        &format!("{} (max err {worst:.2e}, need <= 1e-6)", parts.join(", ")),
    );
    assert!(pass);
}

#[test]
fn f1_matches_convolution() {
    let (m, beta, alpha) = (10, 2.0, 5.0);
    let p = params(m);
    let lam = Lambdas::new(beta, alpha, &p);
    let (lo, hi) = z_support(m, lam.lambda1, lam.lambda2);
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for i in 0..=400 {
        let z = lo + (hi - lo) * i as f64 / 400.0;
        let series = log_f1(z, alpha, beta, &p).unwrap().exp();
        let conv = convolution_density(z, m, lam.lambda1, lam.lambda2);
        if (series - conv).abs() > worst {
            worst = (series - conv).abs();
            at = z;
        }
    }
    let pass = worst <= 1e-8;
    report(
        "f1 vs convolution, M=10",
        pass,
        &format!("max abs err {worst:.2e} at z={at:.3} over 401 points, need <= 1e-8"),
    );
    assert!(pass);
}

/// One realisation of the protocol for UE 0 of `betas`: `(z, g, ν)`.
fn observe(m: usize, betas: &[f64], rng: &mut ChaCha8Rng) -> (Complex64, f64, Complex64) {
    let p = params(m);
    let users = betas.iter().map(|&b| UserTerminal::with_beta(b)).collect();
    let set = ContentionSet::draw(users, m, rng);
    let y = ul_receive(&set, &p, rng);
    let w = precode(&ls_estimate(&y, &p), &p).unwrap();
    let eta = draw_dl_noise(&p, rng);
    let dl = dl_receive_with_noise(&set.channels()[0], &w, betas[0], &p, eta);
    let (g, nu) = split_observation(&set, 0, &y, &p, eta).unwrap();
    (dl.z, g, nu)
}

#[test]
fn f1_fits_simulated_observations() {
    const N: usize = 100_000;
    let m = 20;
    let betas = [snr_db_to_beta(10.0), snr_db_to_beta(7.0)];
    let alpha = betas.iter().sum::<f64>();
    let p = params(m);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut zs: Vec<f64> = (0..N).map(|_| observe(m, &betas, &mut rng).0.re).collect();
    zs.sort_by(f64::total_cmp);

    // CDF on a fine grid by cumulative quadrature of the fast kernel.
    let lam = Lambdas::new(betas[0], alpha, &p);
    let (lo, hi) = z_support(m, lam.lambda1, lam.lambda2);
    let nodes = 8000;
    let h = (hi - lo) / nodes as f64;
    let kernel = std::cell::RefCell::new(LikelihoodKernel::new(m));
    let mut cdf = Vec::with_capacity(nodes + 1);
    cdf.push(0.0);
    for i in 0..nodes {
        let a = lo + i as f64 * h;
        let piece = quadrature::integrate(
            |z| kernel.borrow_mut().log_f1(z, alpha, betas[0], &p).unwrap().exp(),
            a,
            a + h,
            1e-13,
        )
        .integral;
        cdf.push(cdf[i] + piece);
    }
    let cdf_at = |z: f64| {
        let t = ((z - lo) / h).clamp(0.0, nodes as f64);
        let i = (t.floor() as usize).min(nodes - 1);
        cdf[i] + (t - i as f64) * (cdf[i + 1] - cdf[i])
    };
    let n = N as f64;
    let d = zs
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = cdf_at(z);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at the 1% level
    let critical = (-(0.005f64).ln() / 2.0).sqrt() / n.sqrt();
    let pass = d < critical;
    report(
        "f1 KS test, M=20",
        pass,
        &format!("D={d:.5}, 1% critical {critical:.5}, n={N}, grid mass {:.10}", cdf[nodes]),
    );
    assert!(pass);
}

#[test]
fn observation_split_statistics() {
    const N: usize = 100_000;
    let m = 20;
    let betas = [snr_db_to_beta(10.0), snr_db_to_beta(7.0)];
    let alpha = betas.iter().sum::<f64>();
    let p = params(m);
    let lam = Lambdas::new(betas[0], alpha, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut chi = Vec::with_capacity(N);
    let mut gs = Vec::with_capacity(N);
    let mut re = Vec::with_capacity(N);
    let mut im = Vec::with_capacity(N);
    let mut max_split_err: f64 = 0.0;
    for _ in 0..N {
        let (z, g, nu) = observe(m, &betas, &mut rng);
        max_split_err = max_split_err.max((g + nu - z).norm());
        chi.push(g * g / (lam.lambda1 / 2.0));
        gs.push(g);
        re.push(nu.re);
        im.push(nu.im);
    }
    let (chi_mean, _) = mean_var(&chi);
    let (_, var_re) = mean_var(&re);
    let (_, var_im) = mean_var(&im);
    let var_nu = var_re + var_im;
    let se = 1.0 / (N as f64).sqrt();
    let c_re = correlation(&gs, &re);
    let c_im = correlation(&gs, &im);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut identity_err: f64 = 0.0;
    for _ in 0..1000 {
        use rand::Rng;
        let q = SystemParams {
            ul_pilot_power: 10f64.powf(rng.random_range(-2.0..2.0)),
            dl_pilot_power: 10f64.powf(rng.random_range(-2.0..2.0)),
            noise_power: 10f64.powf(rng.random_range(-2.0..2.0)),
            ..params(rng.random_range(1..400))
        };
        let beta = 10f64.powf(rng.random_range(-3.0..3.0));
        let alpha = beta * 10f64.powf(rng.random_range(0.0..3.0));
        let l = Lambdas::new(beta, alpha, &q);
        let target = q.noise_power + q.dl_pilot_power * beta;
        identity_err = identity_err.max(((l.lambda1 + l.lambda2) - target).abs() / target);
    }

    let mean_ok = (chi_mean / (2.0 * m as f64) - 1.0).abs() <= 0.01;
    let var_ok = (var_nu / lam.lambda2 - 1.0).abs() <= 0.02;
    let corr_ok = c_re.abs() < 3.0 * se && c_im.abs() < 3.0 * se;
    let identity_ok = identity_err <= 1e-12;
    let split_ok = max_split_err < 1e-9;
    report(
        "observation split, chi mean",
        mean_ok,
        &format!("mean g²/(λ1/2) = {chi_mean:.4}, 2M = {}, need within 1%", 2 * m),
    );
    report(
        "observation split, Gaussian variance",
        var_ok,
        &format!("Var ν = {var_nu:.5}, λ2 = {:.5}, need within 2%", lam.lambda2),
    );
    report(
        "observation split, uncorrelated parts",
        corr_ok,
        &format!("corr(g, Re ν) = {c_re:.5}, corr(g, Im ν) = {c_im:.5}, 3 SE = {:.5}", 3.0 * se),
    );
    report(
        "observation split, λ1 + λ2 identity",
        identity_ok,
        &format!("max rel err {identity_err:.2e} over 1000 random draws, need <= 1e-12"),
    );
    info("observation split", &format!("max |g + ν - z| = {max_split_err:.2e}"));
    assert!(mean_ok && var_ok && corr_ok && identity_ok && split_ok);
}

// ------------------------------------------------------------- determinism

fn csv_bytes(cfg: &ExperimentConfig, threads: usize, dir: &std::path::Path) -> Vec<u8> {
    let result: ExperimentResult =
        run_experiment_with_threads(cfg, Some(threads)).expect("determinism run");
    let path = dir.join(format!("{}-{threads}.csv", cfg.preset));
    emit_results(&result, cfg, &path, OutputFormat::Csv).unwrap();
    std::fs::read(&path).unwrap()
}

#[test]
fn csv_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut two = ExperimentConfig::preset_default(Preset::TwoUserSweep);
    two.trials = 300;
    let mut cell = ExperimentConfig::preset_default(Preset::Custom);
    cell.estimator = EstimatorKind::Ml;
    cell.trials = 300;
    cell.sweep_grid = vec![1.0, 50.0];
    cell.pa_grid = vec![0.2, 0.6, 1.0];
    let mut bias = ExperimentConfig::preset_default(Preset::BiasSweep);
    bias.trials = 500;
    let mut diffs = Vec::new();
    for cfg in [&two, &cell, &bias] {
        if csv_bytes(cfg, 1, dir.path()) != csv_bytes(cfg, 8, dir.path()) {
            diffs.push(cfg.preset.to_string());
        }
    }
    let pass = diffs.is_empty();
    report(
        "determinism, 1 vs 8 threads",
        pass,
        &if pass {
            "CSV bytes identical for two-user, custom (ML) and bias runs".to_string()
        } else {
            format!("differs for {}", diffs.join(", "))
        },
    );
    assert!(pass);
}
