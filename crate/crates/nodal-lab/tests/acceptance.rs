//! Acceptance gate: the eight primary criteria, one test and one printed
//! pass/fail line each. Run with `--nocapture` to see the statistics.
//!
//! The expensive certification ladder (criterion 4) is computed once and
//! shared with the Nehari-scale criterion; everything else is
//! recomputed from scratch at the stated tolerances.

use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nodal_lab::ansatz::{
    bound_check, c0_limit, default_defect_constants, default_r_ladder, AnsatzState, BoundReport,
};
use nodal_lab::model::{ModelParams, Nonlinearity};
use nodal_lab::quadrature::McOpts;
use nodal_lab::radial_ode::{
    auto_bracket, energy_c0, pohozaev_nehari_residuals, shoot_ground_state, RadialProfile,
    ShootOpts,
};
use nodal_lab::symmetry::threshold_row;
use nodal_lab::verify::{
    acp2_grid_sup, check_lemma_acp2, check_lemma_cm, check_lemma_cmp, check_lemma_f,
    check_tail_monotonicity, cmp_ratio, lemma_acp2_ratio, lemma_f_ratio, random_cm_config,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ground() -> &'static (RadialProfile, Nonlinearity, Duration) {
    static GROUND: OnceLock<(RadialProfile, Nonlinearity, Duration)> = OnceLock::new();
    GROUND.get_or_init(|| {
        let t0 = Instant::now();
        let params = ModelParams::new(5, 3.0, 4.0).unwrap();
        let nl = Nonlinearity::new(params).unwrap();
        let opts = ShootOpts::for_params(&params);
        let bracket = auto_bracket(&nl, params, &opts).unwrap();
        let mut profile = shoot_ground_state(&nl, params, bracket, &opts).unwrap();
        energy_c0(&mut profile, &nl).unwrap();
        (profile, nl, t0.elapsed())
    })
}

/// The full-scale certification ladder: m = 6, default R ladder, 10^6
/// Monte Carlo samples per defect estimate.
fn certification() -> &'static (BoundReport, Duration) {
    static BOUND: OnceLock<(BoundReport, Duration)> = OnceLock::new();
    BOUND.get_or_init(|| {
        let (profile, nl, _) = ground();
        let constants = default_defect_constants(profile, nl, 12).unwrap();
        let mc = McOpts {
            n_samples: 1_000_000,
            seed: 2026,
        };
        let t0 = Instant::now();
        let report = bound_check(
            profile,
            nl,
            6,
            &default_r_ladder(5),
            &mc,
            1e-10,
            &constants,
        )
        .unwrap();
        (report, t0.elapsed())
    })
}

#[test]
fn criterion_1_ground_state_validity() {
    let (profile, nl, elapsed) = ground();
    let (nehari, pohozaev) = pohozaev_nehari_residuals(profile, nl).unwrap();
    let slope = profile.grid_tail_slope();
    let tail = check_tail_monotonicity(profile);
    let ok = nehari.abs() < 1e-4
        && pohozaev.abs() < 1e-4
        && (slope + 3.0).abs() <= 0.02 * 3.0
        && tail.pass
        && *elapsed < Duration::from_secs(60);
    println!(
        "criterion 1 (ground-state validity): {} [residuals {:.3e}/{:.3e}, tail slope {:.4}, monotone {}, {:.2?}]",
        if ok { "PASS" } else { "FAIL" },
        nehari,
        pohozaev,
        slope,
        tail.pass,
        elapsed
    );
    assert!(ok);
}

#[test]
fn criterion_2_decay_constant_consistency() {
    let (profile, nl, _) = ground();
    let t0 = Instant::now();
    let fit = c0_limit(profile, nl).unwrap();
    let elapsed = t0.elapsed();
    let gap = (fit.c0 - fit.c0_check).abs() / fit.c0_check;
    let ok = gap <= 0.01 && elapsed < Duration::from_secs(120);
    println!(
        "criterion 2 (decay-constant consistency): {} [ladder fit {:.8}, tail identity {:.8}, gap {:.4}%, {:.2?}]",
        if ok { "PASS" } else { "FAIL" },
        fit.c0,
        fit.c0_check,
        100.0 * gap,
        elapsed
    );
    assert!(ok);
}

#[test]
fn criterion_3_threshold_table() {
    let t0 = Instant::now();
    let rows: Vec<_> = (5..=7).map(|n| threshold_row(n).unwrap()).collect();
    let elapsed = t0.elapsed();
    let ok = rows[0].m_min == 6
        && rows[1].m_min == 6
        && rows[2].m_min == 5
        && rows[0].theorem_constant == 12
        && rows[2].theorem_constant == 10
        && rows[0].ceil_psi == 7
        && rows[0].discrepancy
        && rows[2].ceil_psi == 6
        && rows[2].discrepancy
        && elapsed < Duration::from_secs(1);
    println!(
        "criterion 3 (threshold table): {} [m_min(5..7) = {:?}, ceil psi(5) = {}, ceil psi(7) = {}, {:.2?}]",
        if ok { "PASS" } else { "FAIL" },
        rows.iter().map(|r| r.m_min).collect::<Vec<_>>(),
        rows[0].ceil_psi,
        rows[2].ceil_psi,
        elapsed
    );
    assert!(ok);
}

#[test]
fn criterion_4_energy_bound_certification() {
    let (report, elapsed) = certification();
    assert_eq!(report.rows.len(), 4);

    let agree = report.rows.iter().all(|row| {
        (row.j_decomposed - row.j_direct).abs()
            <= 3.0 * (row.j_decomposed_err + row.j_direct_err)
    });
    let chain = report
        .rows
        .iter()
        .any(|row| row.margin > 0.0 && row.lower_ok);

    // Log-log slope of the leading interaction, Richardson-extrapolated
    // to remove the 1/R correction from the kernel shift.
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .map(|row| (row.r.ln(), row.leading_interaction.ln()))
        .collect();
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let k = pts.len();
    let exponent = 2.0 * slope(pts[k - 2], pts[k - 1]) - slope(pts[k - 3], pts[k - 2]);
    let exponent_ok = (exponent + 3.0).abs() <= 0.05 * 3.0;

    let ok = agree && chain && exponent_ok && *elapsed < Duration::from_secs(1800);
    println!(
        "criterion 4 (energy bound certification): {} [3-sigma agreement {}, chain point {}, interaction exponent {:.4}, {:.2?}]",
        if ok { "PASS" } else { "FAIL" },
        agree,
        chain,
        exponent,
        elapsed
    );
    for row in &report.rows {
        println!(
            "  R = {:>3}: J = {:.6} +- {:.2e} (direct), {:.6} +- {:.2e} (decomposed), margin {:.4}",
            row.r, row.j_direct, row.j_direct_err, row.j_decomposed, row.j_decomposed_err, row.margin
        );
    }
    assert!(ok);
}

#[test]
fn criterion_5_nehari_scale() {
    let (report, _) = certification();
    let gaps: Vec<f64> = report.rows.iter().map(|row| (row.t_r - 1.0).abs()).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);

    let (profile, nl, _) = ground();
    let mut single = AnsatzState::single_bump(profile, nl);
    let mc = McOpts {
        n_samples: 20_000,
        seed: 2026,
    };
    let solve = single.nehari_scale(&mc, 1e-12).unwrap();
    let single_ok = (solve.t_r - 1.0).abs() <= 1e-6;

    let ok = decreasing && single_ok;
    println!(
        "criterion 5 (Nehari scale): {} [|t_R - 1| = {:?} strictly decreasing {}, single-bump t = {:.9}]",
        if ok { "PASS" } else { "FAIL" },
        gaps,
        decreasing,
        solve.t_r
    );
    assert!(ok);
}

#[test]
fn criterion_6_interaction_scaling_suite() {
    let t0 = Instant::now();
    let ladder = [8.0, 16.0, 32.0, 64.0];
    let mut all_ok = true;
    let mut printed = Vec::new();
    for arity in [2usize, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(90 + arity as u64);
        for case in 0..5 {
            let (points, thetas) = random_cm_config(arity, 5, &mut rng);
            let report =
                check_lemma_cm(&points, &thetas, &ladder, 5, 1000 + case).unwrap();
            let ok = (report.fitted_exponent + report.mu).abs() <= 0.05 * report.mu;
            all_ok &= ok && report.pass;
            printed.push(format!(
                "n={arity} case {case}: fitted {:.4} vs -mu {:.4} ({})",
                report.fitted_exponent,
                -report.mu,
                if ok { "ok" } else { "OFF" }
            ));
        }
    }
    let elapsed = t0.elapsed();
    let ok = all_ok && elapsed < Duration::from_secs(300);
    println!(
        "criterion 6 (interaction scaling suite): {} [{} configs, {:.2?}]",
        if ok { "PASS" } else { "FAIL" },
        printed.len(),
        elapsed
    );
    for line in printed {
        println!("  {line}");
    }
    assert!(ok);
}

#[test]
fn criterion_7_inequality_suites() {
    let (profile, nl, _) = ground();
    let params = profile.params;
    let u_bar = 2.0 * profile.a_star;
    let alpha = params.alpha;

    let cmp = check_lemma_cmp(nl, &params, 100_000, 11).unwrap();
    let f = check_lemma_f(nl, 12, u_bar, alpha, 100_000, 12).unwrap();
    let acp2 = check_lemma_acp2(nl, 12, u_bar, alpha, 100_000, 13).unwrap();
    let stabilized = cmp.pass && f.pass && acp2.pass;

    // Trivial zeros are exact, not merely small: t = 0 kills both scaling
    // terms, an odd pair cancels the additivity defect, and single-support
    // tuples are excluded rather than reported as spurious values.
    let ex = params.critical_exponent() - 1.0;
    let zeros = cmp_ratio(nl, ex, 0.0, 3.0) == Some(0.0)
        && lemma_f_ratio(nl, &[1.3, -1.3], alpha) == Some(0.0)
        && lemma_f_ratio(nl, &[0.7, 0.0], alpha).is_none()
        && lemma_acp2_ratio(nl, &[0.9, 0.0], alpha).is_none();

    // Independent deterministic grid bound for the two-copy splitting sup.
    let pair = check_lemma_acp2(nl, 2, u_bar, alpha, 100_000, 14).unwrap();
    let grid = acp2_grid_sup(nl, u_bar, alpha, 400);
    let grid_gap = (pair.statistic - grid).abs() / grid;
    let grid_ok = grid_gap <= 0.10;

    let ok = stabilized && zeros && grid_ok;
    println!(
        "criterion 7 (inequality suites): {} [growth {:.4}%/{:.4}%/{:.4}%, exact zeros {}, grid gap {:.2}%]",
        if ok { "PASS" } else { "FAIL" },
        100.0 * cmp.rel_growth,
        100.0 * f.rel_growth,
        100.0 * acp2.rel_growth,
        zeros,
        100.0 * grid_gap
    );
    assert!(ok);
}

#[test]
fn criterion_8_worker_count_determinism() {
    let bin = env!("CARGO_BIN_EXE_nodal-lab");
    let base = tempfile::tempdir().unwrap();
    let config_path = base.path().join("run.conf");
    std::fs::write(&config_path, "R_ladder = 8\nmc_samples = 20000\nseed = 5\n").unwrap();

    let commands: [&[&str]; 3] = [
        &["threshold"],
        &["verify", "cmp"],
        &["energy-curve"],
    ];
    let files = [
        "threshold.csv",
        "threshold.json",
        "verify_cmp.json",
        "energy_curve.csv",
        "energy_curve.json",
    ];

    let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for workers in ["1", "2", "8"] {
        let out = base.path().join(format!("w{workers}"));
        for args in commands {
            let status = Command::new(bin)
                .args(args)
                .arg("--config")
                .arg(&config_path)
                .arg("--out")
                .arg(&out)
                .env("NODAL_LAB_THREADS", workers)
                .status()
                .unwrap();
            assert!(status.success(), "{args:?} failed at {workers} workers");
        }
        let snapshot: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|name| ((*name).to_string(), std::fs::read(out.join(name)).unwrap()))
            .collect();
        outputs.push(snapshot);
    }

    let mut identical = true;
    for snapshot in &outputs[1..] {
        for ((name, bytes), (_, reference)) in snapshot.iter().zip(&outputs[0]) {
            if bytes != reference {
                identical = false;
                println!("  mismatch in {name}");
            }
        }
    }
    println!(
        "criterion 8 (worker-count determinism): {} [{} files x 3 worker counts]",
        if identical { "PASS" } else { "FAIL" },
        files.len()
    );
    assert!(identical);
}
