//! Command-line entry point: subcommands over the library with
//! deterministic file outputs and a stable exit-code contract.
//!
//! Exit codes: 0 all checks passed, 1 usage/config error, 2 verification
//! failure, 3 inconclusive. Every command writes its primary outputs
//! (CSV/JSON) atomically under the configured output directory; reruns
//! with the same config and seed are byte-identical regardless of the
//! worker count, so golden-file diffs are meaningful.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ansatz::{bound_check, c0_limit, default_defect_constants, LadderRow, Verdict};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::Nonlinearity;
use crate::quadrature::McOpts;
use crate::radial_ode::{
    auto_bracket, energy_c0, pohozaev_nehari_residuals, read_profile_csv, shoot_ground_state,
    write_profile_csv, RadialProfile,
};
use crate::symmetry::{
    orbit_points, psi_threshold, sign_condition_bound, sign_condition_exact, threshold_row,
    ThresholdRow,
};
use crate::util::{fnv1a64, splitmix64, write_atomic};
use crate::verify::{
    self, acp2_grid_sup, check_lemma_acp2, check_lemma_cm, check_lemma_cmp, check_lemma_f,
    random_cm_config, DecayBounds, SupReport, TailReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "nodal-lab",
    version,
    about = "Numerical laboratory for sign-changing multi-bump states of a zero-mass scalar field equation"
)]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Prints the full JSON report on stdout instead of a summary line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solves the radial ground state; writes profile CSV and summary JSON.
    GroundState,
    /// Emits the signed orbit points, distance matrix, and sign-condition values.
    Orbit {
        /// Copies per block; defaults to the exact threshold for N.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Tabulates copy thresholds and bound constants over a dimension range.
    Threshold {
        #[arg(long, default_value_t = 5)]
        n_min: u32,
        #[arg(long, default_value_t = 12)]
        n_max: u32,
    },
    /// Fits the far-field interaction constant two independent ways.
    Interaction,
    /// Certifies the energy bound chain along the separation ladder.
    EnergyCurve {
        /// Copies per block; defaults to the exact threshold for N.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Runs one inequality/scaling suite: cm, cmp, f, acp2, decay, tail, all.
    Verify {
        suite: String,
        /// Profile CSV to check instead of the computed ground state
        /// (tail suite only).
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Aggregates ground state, thresholds, interaction, and all verify suites.
    Report,
}

/// Runs the CLI and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on usage errors; 2 is reserved for verification
            // failures here, so remap.
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_PASS
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. }
        | Error::Config(_)
        | Error::Domain { .. }
        | Error::Io { .. } => EXIT_USAGE,
        Error::ConvergenceWarning { .. } => EXIT_INCONCLUSIVE,
        _ => EXIT_FAIL,
    }
}

/// Caps the worker pool from NODAL_LAB_THREADS. Outputs never depend on
/// the worker count; this only bounds resource use.
fn init_workers() {
    if let Ok(raw) = std::env::var("NODAL_LAB_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(k) if k >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("warning: ignoring unparsable NODAL_LAB_THREADS={raw:?}"),
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    init_workers();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(cfg.output_dir.clone(), &e))?;
    match &cli.command {
        Command::GroundState => cmd_ground_state(&cfg, cli.json),
        Command::Orbit { m } => cmd_orbit(&cfg, *m, cli.json),
        Command::Threshold { n_min, n_max } => cmd_threshold(&cfg, *n_min, *n_max, cli.json),
        Command::Interaction => cmd_interaction(&cfg, cli.json),
        Command::EnergyCurve { m } => cmd_energy_curve(&cfg, *m, cli.json),
        Command::Verify { suite, profile } => {
            cmd_verify(&cfg, suite, profile.as_deref(), cli.json)
        }
        Command::Report => cmd_report(&cfg, cli.json),
    }
}

fn out_dir(cfg: &RunConfig) -> &Path {
    Path::new(&cfg.output_dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(text)
}

fn emit(json: bool, json_text: &str, human: &str) {
    if json {
        print!("{json_text}");
    } else {
        println!("{human}");
    }
}

/// Cache key for the most expensive reusable artifact: everything the
/// shoot depends on, none of what it does not (seed, ladder, m).
fn profile_cache_path(cfg: &RunConfig) -> PathBuf {
    let key = format!(
        "N={},p={},q={},r_max={},ppd={},ode_rtol={}",
        cfg.n, cfg.p, cfg.q, cfg.r_max, cfg.points_per_decade, cfg.ode_rtol
    );
    out_dir(cfg)
        .join("cache")
        .join(format!("profile_{:016x}.csv", fnv1a64(key.as_bytes())))
}

fn load_or_shoot(cfg: &RunConfig) -> Result<(RadialProfile, Nonlinearity)> {
    let params = cfg.model_params()?;
    let nl = Nonlinearity::new(params)?;
    let cache = profile_cache_path(cfg);
    if cache.exists() {
        let profile = read_profile_csv(&cache)?;
        // A stale or colliding entry is recomputed, never trusted.
        if profile.params == params && profile.c0 > 0.0 {
            return Ok((profile, nl));
        }
    }
    let opts = cfg.shoot_opts();
    let bracket = auto_bracket(&nl, params, &opts)?;
    let mut profile = shoot_ground_state(&nl, params, bracket, &opts)?;
    energy_c0(&mut profile, &nl)?;
    if let Some(dir) = cache.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), &e))?;
    }
    write_profile_csv(&profile, &cache)?;
    Ok((profile, nl))
}

#[derive(Serialize)]
struct GroundStateSummary {
    n: u32,
    p: f64,
    q: f64,
    a_star: f64,
    c0: f64,
    kappa_inf: f64,
    nehari_residual: f64,
    pohozaev_residual: f64,
    tail_slope: f64,
    tail_monotone: bool,
    grid_len: usize,
    profile_file: String,
    pass: bool,
}

fn cmd_ground_state(cfg: &RunConfig, json: bool) -> Result<i32> {
    let (profile, nl) = load_or_shoot(cfg)?;
    let (nehari, pohozaev) = pohozaev_nehari_residuals(&profile, &nl)?;
    let tail = verify::check_tail_monotonicity(&profile);
    let expected_slope = -(cfg.n as f64 - 2.0);
    let slope = profile.grid_tail_slope();
    let pass = nehari.abs() < 1e-4
        && pohozaev.abs() < 1e-4
        && tail.pass
        && (slope - expected_slope).abs() <= 0.02 * expected_slope.abs();

    let profile_path = out_dir(cfg).join("ground_state_profile.csv");
    write_profile_csv(&profile, &profile_path)?;
    let summary = GroundStateSummary {
        n: cfg.n,
        p: cfg.p,
        q: cfg.q,
        a_star: profile.a_star,
        c0: profile.c0,
        kappa_inf: profile.kappa_inf,
        nehari_residual: nehari,
        pohozaev_residual: pohozaev,
        tail_slope: slope,
        tail_monotone: tail.pass,
        grid_len: profile.grid.len(),
        profile_file: "ground_state_profile.csv".into(),
        pass,
    };
    let text = write_json(&out_dir(cfg).join("ground_state_summary.json"), &summary)?;
    emit(
        json,
        &text,
        &format!(
            "ground state (N={}, p={}, q={}): a* = {:.12}, c0 = {:.12}, kappa_inf = {:.12}, \
             residuals nehari {:.3e} / pohozaev {:.3e}, tail slope {:.4} ({})",
            cfg.n,
            cfg.p,
            cfg.q,
            profile.a_star,
            profile.c0,
            profile.kappa_inf,
            nehari,
            pohozaev,
            slope,
            if pass { "pass" } else { "FAIL" }
        ),
    );
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct OrbitSummary {
    m: u32,
    n: u32,
    points: Vec<Vec<f64>>,
    signs: Vec<f64>,
    sign_condition_value: f64,
    sign_condition_holds: bool,
    neighbor_bound_value: f64,
    neighbor_bound_holds: bool,
    psi: f64,
}

fn cmd_orbit(cfg: &RunConfig, m_override: Option<u32>, json: bool) -> Result<i32> {
    let m = match m_override {
        Some(m) => m,
        None => cfg.effective_m()?,
    };
    let orbit = orbit_points(m, cfg.n)?;
    let exact = sign_condition_exact(m, cfg.n);
    let bound = sign_condition_bound(m, cfg.n);
    let psi = psi_threshold(cfg.n)?;

    let matrix = orbit.distance_matrix();
    let k = orbit.points.len();
    let mut csv = String::from("i\\j");
    for j in 0..k {
        csv.push_str(&format!(",{j}"));
    }
    csv.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        csv.push_str(&i.to_string());
        for value in row {
            csv.push_str(&format!(",{value}"));
        }
        csv.push('\n');
    }
    write_atomic(&out_dir(cfg).join("orbit_distances.csv"), csv.as_bytes())?;

    let summary = OrbitSummary {
        m,
        n: cfg.n,
        points: orbit.points.clone(),
        signs: orbit.signs.clone(),
        sign_condition_value: exact.value,
        sign_condition_holds: exact.holds,
        neighbor_bound_value: bound.neighbor_value,
        neighbor_bound_holds: bound.neighbor_holds,
        psi,
    };
    let text = write_json(&out_dir(cfg).join("orbit_summary.json"), &summary)?;
    emit(
        json,
        &text,
        &format!(
            "orbit (m={m}, N={}): 2m = {} points, S = {:.6} ({}), psi = {:.4}",
            cfg.n,
            k,
            exact.value,
            if exact.holds { "holds" } else { "fails" },
            psi
        ),
    );
    Ok(EXIT_PASS)
}

fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut out = String::from("N,psi,ceil_psi,m_min_exact,theorem_constant,discrepancy\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.n, row.psi, row.ceil_psi, row.m_min, row.theorem_constant, row.discrepancy
        ));
    }
    out
}

fn cmd_threshold(cfg: &RunConfig, n_min: u32, n_max: u32, json: bool) -> Result<i32> {
    if !(5..=20).contains(&n_min) || !(5..=20).contains(&n_max) || n_min > n_max {
        return Err(Error::invalid(
            "n_range",
            format!("[{n_min}, {n_max}]"),
            "need 5 <= n_min <= n_max <= 20",
        ));
    }
    let rows: Result<Vec<ThresholdRow>> = (n_min..=n_max).map(threshold_row).collect();
    let rows = rows?;
    write_atomic(&out_dir(cfg).join("threshold.csv"), threshold_csv(&rows).as_bytes())?;
    let text = write_json(&out_dir(cfg).join("threshold.json"), &rows)?;
    let flagged: Vec<u32> = rows.iter().filter(|r| r.discrepancy).map(|r| r.n).collect();
    emit(
        json,
        &text,
        &format!(
            "thresholds N in [{n_min}, {n_max}]: m_min {:?}, closed-form ceil psi flagged at N = {:?}",
            rows.iter().map(|r| (r.n, r.m_min)).collect::<Vec<_>>(),
            flagged
        ),
    );
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct InteractionReport {
    c0: f64,
    c0_check: f64,
    c0_hat: f64,
    c0_rel_residual: f64,
    c0_hat_rel_residual: f64,
    relative_gap: f64,
    ladder: Vec<(f64, f64)>,
    pass: bool,
}

fn cmd_interaction(cfg: &RunConfig, json: bool) -> Result<i32> {
    let (profile, nl) = load_or_shoot(cfg)?;
    let fit = c0_limit(&profile, &nl)?;
    let gap = (fit.c0 - fit.c0_check).abs() / fit.c0_check;
    let pass = gap <= 0.01;

    let mut csv = String::from("s,weighted_integral\n");
    for &(s, v) in &fit.ladder {
        csv.push_str(&format!("{s},{v}\n"));
    }
    write_atomic(&out_dir(cfg).join("interaction_ladder.csv"), csv.as_bytes())?;

    let report = InteractionReport {
        c0: fit.c0,
        c0_check: fit.c0_check,
        c0_hat: fit.c0_hat,
        c0_rel_residual: fit.c0_rel_residual,
        c0_hat_rel_residual: fit.c0_hat_rel_residual,
        relative_gap: gap,
        ladder: fit.ladder.clone(),
        pass,
    };
    let text = write_json(&out_dir(cfg).join("interaction.json"), &report)?;
    emit(
        json,
        &text,
        &format!(
            "interaction constant: ladder fit {:.10} vs tail identity {:.10} ({:.4}% apart, {}), critical-kernel fit {:.10}",
            fit.c0,
            fit.c0_check,
            100.0 * gap,
            if pass { "pass" } else { "FAIL" },
            fit.c0_hat
        ),
    );
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

/// Richardson-extrapolated log-log slope of the leading interaction
/// against R; needs three ladder points and positive interactions.
fn interaction_exponent(rows: &[LadderRow]) -> Option<f64> {
    if rows.len() < 3 || rows.iter().any(|r| !(r.leading_interaction > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.r.ln(), r.leading_interaction.ln()))
        .collect();
    let k = pts.len();
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let s_last = slope(pts[k - 2], pts[k - 1]);
    let s_prev = slope(pts[k - 3], pts[k - 2]);
    Some(2.0 * s_last - s_prev)
}

#[derive(Serialize)]
struct EnergyCurveReport {
    n: u32,
    m: u32,
    c0: f64,
    bound_2mc0: f64,
    sign_condition: f64,
    defect_scaling: f64,
    defect_additivity: f64,
    mc_samples: u64,
    seed: u64,
    rows: Vec<LadderRow>,
    interaction_exponent: Option<f64>,
    expected_exponent: f64,
    verdict: Verdict,
}

fn cmd_energy_curve(cfg: &RunConfig, m_override: Option<u32>, json: bool) -> Result<i32> {
    let m = match m_override {
        Some(m) => m,
        None => cfg.effective_m()?,
    };
    let (profile, nl) = load_or_shoot(cfg)?;
    let constants = default_defect_constants(&profile, &nl, 2 * m as usize)?;
    let mc = McOpts {
        n_samples: cfg.mc_samples,
        seed: cfg.seed,
    };
    let report = bound_check(&profile, &nl, m, &cfg.r_ladder, &mc, cfg.root_tol, &constants)?;
    let exponent = interaction_exponent(&report.rows);

    write_atomic(&out_dir(cfg).join("energy_curve.csv"), report.csv().as_bytes())?;
    let full = EnergyCurveReport {
        n: report.n,
        m: report.m,
        c0: report.c0,
        bound_2mc0: report.bound_2mc0,
        sign_condition: report.sign_condition,
        defect_scaling: constants.scaling,
        defect_additivity: constants.additivity,
        mc_samples: cfg.mc_samples,
        seed: cfg.seed,
        rows: report.rows.clone(),
        interaction_exponent: exponent,
        expected_exponent: -(cfg.n as f64 - 2.0),
        verdict: report.verdict.clone(),
    };
    let text = write_json(&out_dir(cfg).join("energy_curve.json"), &full)?;
    let (verdict_line, code) = match &report.verdict {
        Verdict::Certified { least_r } => {
            (format!("Certified from R = {least_r}"), EXIT_PASS)
        }
        Verdict::Inconclusive => ("Inconclusive".to_string(), EXIT_INCONCLUSIVE),
    };
    emit(
        json,
        &text,
        &format!(
            "energy curve (N={}, m={m}): 2m c0 = {:.10}, {} over ladder {:?}, interaction exponent {:?}",
            cfg.n, report.bound_2mc0, verdict_line, cfg.r_ladder, exponent
        ),
    );
    Ok(code)
}

#[derive(Serialize)]
struct CmCase {
    arity: usize,
    thetas: Vec<f64>,
    mu: f64,
    fitted_exponent: f64,
    ratio_spread: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CmSuiteReport {
    seed: u64,
    cases: Vec<CmCase>,
    pass: bool,
}

const CM_LADDER: [f64; 4] = [8.0, 16.0, 32.0, 64.0];

fn run_cm_suite(cfg: &RunConfig) -> Result<CmSuiteReport> {
    let mut cases = Vec::new();
    if let Some(thetas) = &cfg.cm_thetas {
        // Explicit exponents: centers on a well-separated axis layout.
        let points: Vec<Vec<f64>> = (0..thetas.len())
            .map(|i| {
                let mut p = vec![0.0; cfg.n as usize];
                p[0] = 2.0 * i as f64;
                p
            })
            .collect();
        let report = check_lemma_cm(&points, thetas, &CM_LADDER, cfg.n, cfg.seed)?;
        let pass = report.pass && (report.fitted_exponent + report.mu).abs() <= 0.05 * report.mu;
        cases.push(CmCase {
            arity: thetas.len(),
            thetas: thetas.clone(),
            mu: report.mu,
            fitted_exponent: report.fitted_exponent,
            ratio_spread: report.ratio_spread,
            pass,
        });
    } else {
        for arity in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ arity as u64));
            for case in 0..5 {
                let (points, thetas) = random_cm_config(arity, cfg.n, &mut rng);
                let seed = splitmix64(cfg.seed ^ ((arity as u64) << 8) ^ case);
                let report = check_lemma_cm(&points, &thetas, &CM_LADDER, cfg.n, seed)?;
                let pass =
                    report.pass && (report.fitted_exponent + report.mu).abs() <= 0.05 * report.mu;
                cases.push(CmCase {
                    arity,
                    thetas,
                    mu: report.mu,
                    fitted_exponent: report.fitted_exponent,
                    ratio_spread: report.ratio_spread,
                    pass,
                });
            }
        }
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(CmSuiteReport {
        seed: cfg.seed,
        cases,
        pass,
    })
}

#[derive(Serialize)]
struct Acp2SuiteReport {
    sup: SupReport,
    pair_sup: SupReport,
    grid_sup: f64,
    grid_gap: f64,
    grid_ok: bool,
    pass: bool,
}

fn run_acp2_suite(cfg: &RunConfig, profile: &RadialProfile, nl: &Nonlinearity) -> Result<Acp2SuiteReport> {
    let m = cfg.effective_m()?;
    let k = (2 * m as usize).clamp(2, 12);
    let u_bar = 2.0 * profile.a_star;
    let alpha = profile.params.alpha;
    let samples = cfg.mc_samples.max(100_000);
    let sup = check_lemma_acp2(nl, k, u_bar, alpha, samples, cfg.seed)?;
    // The grid cross-check lives on the two-copy slice.
    let pair_sup = check_lemma_acp2(nl, 2, u_bar, alpha, samples, splitmix64(cfg.seed ^ 2))?;
    let grid = acp2_grid_sup(nl, u_bar, alpha, 400);
    let grid_gap = (pair_sup.statistic - grid).abs() / grid;
    let grid_ok = grid_gap <= 0.10;
    let pass = sup.pass && pair_sup.pass && grid_ok;
    Ok(Acp2SuiteReport {
        sup,
        pair_sup,
        grid_sup: grid,
        grid_gap,
        grid_ok,
        pass,
    })
}

#[derive(Serialize)]
struct AllSuitesReport {
    cm: CmSuiteReport,
    cmp: SupReport,
    f: SupReport,
    acp2: Acp2SuiteReport,
    decay: DecayBounds,
    tail: TailReport,
    pass: bool,
}

fn run_all_suites(cfg: &RunConfig) -> Result<AllSuitesReport> {
    let (profile, nl) = load_or_shoot(cfg)?;
    let m = cfg.effective_m()?;
    let samples = cfg.mc_samples.max(100_000);
    let cm = run_cm_suite(cfg)?;
    let cmp = check_lemma_cmp(&nl, &profile.params, samples, cfg.seed)?;
    let f = check_lemma_f(
        &nl,
        (2 * m as usize).clamp(2, 12),
        2.0 * profile.a_star,
        profile.params.alpha,
        samples,
        cfg.seed,
    )?;
    let acp2 = run_acp2_suite(cfg, &profile, &nl)?;
    let decay = verify::check_decay_bounds(&profile);
    let tail = verify::check_tail_monotonicity(&profile);
    let pass = cm.pass && cmp.pass && f.pass && acp2.pass && decay.pass && tail.pass;
    Ok(AllSuitesReport {
        cm,
        cmp,
        f,
        acp2,
        decay,
        tail,
        pass,
    })
}

/// Parses just the (r, omega) columns of a profile CSV, skipping comment
/// and header lines, without any of the constructor's validation: the
/// point is to let the tail check judge tables the constructor would
/// refuse to build.
fn read_raw_profile_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), &e))?;
    let mut grid = Vec::new();
    let mut omega = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('r') {
            continue;
        }
        let mut cols = line.split(',');
        let bad = |what: &str| Error::Io {
            path: path.display().to_string(),
            message: format!("line {}: {what}", idx + 1),
        };
        let r: f64 = cols
            .next()
            .ok_or_else(|| bad("missing r column"))?
            .trim()
            .parse()
            .map_err(|e| bad(&format!("r column: {e}")))?;
        let w: f64 = cols
            .next()
            .ok_or_else(|| bad("missing omega column"))?
            .trim()
            .parse()
            .map_err(|e| bad(&format!("omega column: {e}")))?;
        grid.push(r);
        omega.push(w);
    }
    if grid.len() < 4 {
        return Err(Error::Io {
            path: path.display().to_string(),
            message: format!("only {} data rows; need at least 4", grid.len()),
        });
    }
    Ok((grid, omega))
}

fn cmd_verify(cfg: &RunConfig, suite: &str, profile_path: Option<&Path>, json: bool) -> Result<i32> {
    let out = out_dir(cfg);
    let samples = cfg.mc_samples.max(100_000);
    let (text, pass, label) = match suite {
        "cm" => {
            let report = run_cm_suite(cfg)?;
            let pass = report.pass;
            let label = format!(
                "cm: {} configurations, all slopes within 5% of mu: {}",
                report.cases.len(),
                pass
            );
            (write_json(&out.join("verify_cm.json"), &report)?, pass, label)
        }
        "cmp" => {
            let (profile, nl) = load_or_shoot(cfg)?;
            let _ = &profile;
            let report = check_lemma_cmp(&nl, &profile.params, samples, cfg.seed)?;
            let pass = report.pass;
            let label = format!(
                "cmp: sup = {:.6}, growth over final half {:.4}%: {}",
                report.statistic,
                100.0 * report.rel_growth,
                pass
            );
            (write_json(&out.join("verify_cmp.json"), &report)?, pass, label)
        }
        "f" => {
            let (profile, nl) = load_or_shoot(cfg)?;
            let m = cfg.effective_m()?;
            let report = check_lemma_f(
                &nl,
                (2 * m as usize).clamp(2, 12),
                2.0 * profile.a_star,
                profile.params.alpha,
                samples,
                cfg.seed,
            )?;
            let pass = report.pass;
            let label = format!(
                "f: sup = {:.6}, growth over final half {:.4}%: {}",
                report.statistic,
                100.0 * report.rel_growth,
                pass
            );
            (write_json(&out.join("verify_f.json"), &report)?, pass, label)
        }
        "acp2" => {
            let (profile, nl) = load_or_shoot(cfg)?;
            let report = run_acp2_suite(cfg, &profile, &nl)?;
            let pass = report.pass;
            let label = format!(
                "acp2: sampled sup = {:.6}, pair grid gap {:.2}%: {}",
                report.sup.statistic,
                100.0 * report.grid_gap,
                pass
            );
            (write_json(&out.join("verify_acp2.json"), &report)?, pass, label)
        }
        "decay" => {
            let (profile, _) = load_or_shoot(cfg)?;
            let report = verify::check_decay_bounds(&profile);
            let pass = report.pass;
            let label = format!(
                "decay: b1 = {:.6}, b2 = {:.6}, b3 = {:.6}: {}",
                report.b1, report.b2, report.b3, pass
            );
            (write_json(&out.join("verify_decay.json"), &report)?, pass, label)
        }
        "tail" => {
            let report = match profile_path {
                Some(path) => {
                    let (grid, omega) = read_raw_profile_table(path)?;
                    verify::check_tail_monotonicity_raw(&grid, &omega, cfg.n, 1e-8)
                }
                None => {
                    let (profile, _) = load_or_shoot(cfg)?;
                    verify::check_tail_monotonicity(&profile)
                }
            };
            let pass = report.pass;
            let label = format!(
                "tail: monotone = {}, first violation = {:?}",
                pass, report.first_violation
            );
            (write_json(&out.join("verify_tail.json"), &report)?, pass, label)
        }
        "all" => {
            let report = run_all_suites(cfg)?;
            let pass = report.pass;
            let label = format!(
                "all: cm {} cmp {} f {} acp2 {} decay {} tail {}",
                report.cm.pass,
                report.cmp.pass,
                report.f.pass,
                report.acp2.pass,
                report.decay.pass,
                report.tail.pass
            );
            (write_json(&out.join("verify_all.json"), &report)?, pass, label)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown verify suite '{other}' (expected cm, cmp, f, acp2, decay, tail, all)"
            )));
        }
    };
    emit(json, &text, &format!("verify {label}"));
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct FullReport {
    ground_state: GroundStateSummary,
    thresholds: Vec<ThresholdRow>,
    interaction: InteractionReport,
    suites: AllSuitesReport,
    pass: bool,
}

fn cmd_report(cfg: &RunConfig, json: bool) -> Result<i32> {
    let (profile, nl) = load_or_shoot(cfg)?;
    let (nehari, pohozaev) = pohozaev_nehari_residuals(&profile, &nl)?;
    let tail = verify::check_tail_monotonicity(&profile);
    let slope = profile.grid_tail_slope();
    let expected_slope = -(cfg.n as f64 - 2.0);
    let gs_pass = nehari.abs() < 1e-4
        && pohozaev.abs() < 1e-4
        && tail.pass
        && (slope - expected_slope).abs() <= 0.02 * expected_slope.abs();
    let ground_state = GroundStateSummary {
        n: cfg.n,
        p: cfg.p,
        q: cfg.q,
        a_star: profile.a_star,
        c0: profile.c0,
        kappa_inf: profile.kappa_inf,
        nehari_residual: nehari,
        pohozaev_residual: pohozaev,
        tail_slope: slope,
        tail_monotone: tail.pass,
        grid_len: profile.grid.len(),
        profile_file: "cache".into(),
        pass: gs_pass,
    };

    let thresholds: Result<Vec<ThresholdRow>> = (5..=7).map(threshold_row).collect();
    let thresholds = thresholds?;

    let fit = c0_limit(&profile, &nl)?;
    let gap = (fit.c0 - fit.c0_check).abs() / fit.c0_check;
    let interaction = InteractionReport {
        c0: fit.c0,
        c0_check: fit.c0_check,
        c0_hat: fit.c0_hat,
        c0_rel_residual: fit.c0_rel_residual,
        c0_hat_rel_residual: fit.c0_hat_rel_residual,
        relative_gap: gap,
        ladder: fit.ladder.clone(),
        pass: gap <= 0.01,
    };

    let suites = run_all_suites(cfg)?;
    let pass = ground_state.pass && interaction.pass && suites.pass;
    let report = FullReport {
        ground_state,
        thresholds,
        interaction,
        suites,
        pass,
    };
    let text = write_json(&out_dir(cfg).join("report.json"), &report)?;
    emit(
        json,
        &text,
        &format!(
            "report: ground state {}, interaction {}, suites {} -> {}",
            report.ground_state.pass,
            report.interaction.pass,
            report.suites.pass,
            if pass { "pass" } else { "FAIL" }
        ),
    );
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_cover_the_error_taxonomy() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code_for(&Error::invalid("k", 0, "bad")),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code_for(&Error::Domain {
                operation: "t",
                message: "d".into()
            }),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code_for(&Error::ConvergenceWarning {
                operation: "t",
                message: "w".into()
            }),
            EXIT_INCONCLUSIVE
        );
        assert_eq!(
            exit_code_for(&Error::SearchFailure {
                operation: "t",
                message: "s".into()
            }),
            EXIT_FAIL
        );
        assert_eq!(
            exit_code_for(&Error::BracketError {
                operation: "t",
                lo: 0.0,
                hi: 1.0
            }),
            EXIT_FAIL
        );
    }

    #[test]
    fn cli_parses_global_flags_in_any_position() {
        let cli = Cli::try_parse_from([
            "nodal-lab",
            "energy-curve",
            "--m",
            "6",
            "--seed",
            "9",
            "--json",
            "--out",
            "scratch",
        ])
        .unwrap();
        assert!(cli.json);
        assert_eq!(cli.seed, Some(9));
        match cli.command {
            Command::EnergyCurve { m } => assert_eq!(m, Some(6)),
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn verify_suite_names_are_validated() {
        let cfg = RunConfig {
            output_dir: std::env::temp_dir()
                .join("nodal-lab-cli-test")
                .display()
                .to_string(),
            ..RunConfig::default()
        };
        std::fs::create_dir_all(&cfg.output_dir).unwrap();
        let err = cmd_verify(&cfg, "bogus", None, false).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(exit_code_for(&err), EXIT_USAGE);
    }

    #[test]
    fn raw_profile_reader_skips_headers_and_validates() {
        let dir = std::env::temp_dir().join("nodal-lab-raw-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("stub.csv");
        std::fs::write(
            &path,
            "# nodal-energy-lab profile v1, N=5\nr,omega,omega_prime\n1,0.5,0\n2,0.25,0\n3,0.125,0\n4,0.08,0\n",
        )
        .unwrap();
        let (grid, omega) = read_raw_profile_table(&path).unwrap();
        assert_eq!(grid, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(omega[1], 0.25);
        std::fs::write(&path, "r,omega\n1,1\n").unwrap();
        assert!(read_raw_profile_table(&path).is_err());
    }

    #[test]
    fn cache_key_tracks_every_shoot_input() {
        let base = RunConfig::default();
        let a = profile_cache_path(&base);
        for mutate in [
            |c: &mut RunConfig| c.p = 2.9,
            |c: &mut RunConfig| c.r_max = 50.0,
            |c: &mut RunConfig| c.points_per_decade = 128,
            |c: &mut RunConfig| c.ode_rtol = 1e-9,
        ] {
            let mut other = base.clone();
            mutate(&mut other);
            assert_ne!(a, profile_cache_path(&other));
        }
        // Seed and ladder do not touch the shoot.
        let mut same = base.clone();
        same.seed = 999;
        same.r_ladder = vec![5.0, 10.0];
        assert_eq!(a, profile_cache_path(&same));
    }
}
