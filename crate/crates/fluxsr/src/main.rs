//! Command-line front end. Every subcommand reads one flat JSON config,
//! writes CSV files plus a manifest into the output directory, and prints a
//! one-line summary per artifact. Exit codes: 0 success, 2 config error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fluxsr::circuit::{diagonalize, extract_qubit_params, FluxBias};
use fluxsr::config::{load_config, ConfigError, RunConfig, DEFAULT_DECAY_WINDOW_SR};
use fluxsr::dynamics::model::{intensity, superradiant_rate};
use fluxsr::experiments::io::{sigma_tag, write_csv, write_manifest, IntegratorRecord};
use fluxsr::experiments::{
    decay_step, intensity_channel, run_broadening_suite, run_discrete_m, run_driven,
    validate_elimination, DriveSweepConfig, SweepConfig,
};

/// Aggressive drive-phase subdivision: the pulse integration is a handful of
/// 2x2 problems, so accuracy is nearly free.
const DRIVE_DIVISOR: f64 = 400.0;

#[derive(Parser)]
#[command(
    name = "fluxsr",
    version,
    about = "Flux-qubit ensemble statistics and cavity superradiance sweeps"
)]
struct Cli {
    /// JSON config file; omitted fields take documented defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and FLUXSR_OUT)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels of one device against flux, plus its two-level summary
    Spectrum,
    /// Broadening suite: spectral densities, scatter, spread against flux
    Ensemble,
    /// Locate the flux minimizing the ensemble frequency spread
    OptimizeFlux,
    /// Decay of M initially excited qubits, swept over M
    SuperradianceDiscrete,
    /// Drive-pulse preparation swept over amplitude, then decay
    SuperradianceDriven,
    /// Full qubit-cavity model against the eliminated one (N <= 3)
    ValidateElimination,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(AppError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum AppError {
    Config(ConfigError),
    Run(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

macro_rules! runtime_error {
    ($($from:ty),+) => {$(
        impl From<$from> for AppError {
            fn from(e: $from) -> Self {
                AppError::Run(e.to_string())
            }
        }
    )+};
}
runtime_error!(
    fluxsr::experiments::ExperimentError,
    fluxsr::dynamics::DynamicsError,
    fluxsr::ensemble::EnsembleError,
    fluxsr::circuit::CircuitError,
    std::io::Error
);

fn run(cli: &Cli) -> Result<(), AppError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(threads) = cli.threads.or(config.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AppError::Run(format!("thread pool: {e}")))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("FLUXSR_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(config.out_dir()));

    match cli.command {
        Command::Spectrum => spectrum(&config, &out),
        Command::Ensemble => ensemble(&config, &out),
        Command::OptimizeFlux => optimize_flux(&config, &out),
        Command::SuperradianceDiscrete => superradiance(&config, &out, false),
        Command::SuperradianceDriven => superradiance(&config, &out, true),
        Command::ValidateElimination => elimination(&config, &out),
    }
}

fn finish(
    config: &RunConfig,
    out: &Path,
    integrator: IntegratorRecord,
    files: Vec<String>,
) -> Result<(), AppError> {
    let manifest = write_manifest(out, &config.resolved(), config.seed(), integrator, &files)?;
    for f in &files {
        println!("wrote {}", out.join(f).display());
    }
    println!("wrote {}", manifest.display());
    Ok(())
}

fn no_integrator() -> IntegratorRecord {
    IntegratorRecord { method: "none", step_divisor: 0.0, time_samples: 0 }
}

fn spectrum(config: &RunConfig, out: &Path) -> Result<(), AppError> {
    let junctions = config.junctions()?;
    let cutoff = config.basis_cutoff();
    let nev = config.n_levels().max(2);
    let ((lo, hi), grid) = config.flux_scan()?;

    let params = extract_qubit_params(&junctions, cutoff)?;
    println!(
        "delta = {:.6} GHz, slope = {:.4} GHz/Phi0, Ip = {:.4e} A, fit rms = {:.3e} GHz",
        params.delta_ghz,
        params.ip_slope_ghz,
        params.ip_amperes(),
        params.fit_rms_ghz
    );

    let mut rows = Vec::with_capacity(grid);
    for i in 0..grid {
        let f = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let spectrum = diagonalize(&junctions, FluxBias(f), cutoff, nev)?;
        let mut row = vec![f, spectrum.gap_ghz()];
        row.extend(&spectrum.levels_ghz);
        rows.push(row);
    }
    let mut header = vec!["flux".to_string(), "gap_ghz".to_string()];
    header.extend((0..nev).map(|k| format!("e{k}_ghz")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("spectrum.csv"), &header_refs, &rows)?;
    finish(config, out, no_integrator(), vec!["spectrum.csv".into()])
}

fn ensemble(config: &RunConfig, out: &Path) -> Result<(), AppError> {
    let sigmas = config.sigma_suite()?;
    let configs = sigmas
        .iter()
        .map(|&s| config.sampling_for(s))
        .collect::<Result<Vec<_>, _>>()?;
    let (f_range, grid) = config.flux_scan()?;
    let curves =
        run_broadening_suite(&configs, config.basis_cutoff(), config.kde()?, f_range, grid)?;

    let mut files = Vec::new();
    for curve in &curves {
        let tag = sigma_tag(curve.sigma);
        let kde_rows: Vec<Vec<f64>> = curve
            .kde_grid
            .iter()
            .zip(&curve.kde_values)
            .map(|(&x, &y)| vec![x, y])
            .collect();
        let name = format!("fig3_kde_{tag}.csv");
        write_csv(&out.join(&name), &["delta_ghz", "density"], &kde_rows)?;
        files.push(name);

        let scatter_rows: Vec<Vec<f64>> = curve
            .deltas
            .iter()
            .zip(&curve.ips)
            .map(|(&d, &ip)| vec![d, ip])
            .collect();
        let name = format!("fig4_scatter_{tag}.csv");
        write_csv(&out.join(&name), &["delta_ghz", "ip_amperes"], &scatter_rows)?;
        files.push(name);

        let std_rows: Vec<Vec<f64>> = curve
            .flux_grid
            .iter()
            .zip(&curve.std_vs_flux)
            .map(|(&f, &s)| vec![f, s])
            .collect();
        let name = format!("fig5_std_vs_flux_{tag}.csv");
        write_csv(&out.join(&name), &["flux", "std_ghz"], &std_rows)?;
        files.push(name);

        println!(
            "sigma {:.3}%: fwhm {} GHz, pearson(delta, ip) = {:.3}, optimal flux {:.6} \
             (std {:.4e} GHz vs {:.4e} at the symmetry point)",
            curve.sigma * 100.0,
            curve.kde_fwhm.map_or("n/a".into(), |w| format!("{w:.4}")),
            curve.pearson_delta_ip,
            curve.optimal_flux,
            curve.std_at_optimal,
            curve.std_at_center,
        );
    }
    finish(config, out, no_integrator(), files)
}

fn optimize_flux(config: &RunConfig, out: &Path) -> Result<(), AppError> {
    let sigma = config
        .sigma_suite()?
        .last()
        .copied()
        .expect("sigma_suite guarantees at least one entry");
    let configs = [config.sampling_for(sigma)?];
    let (f_range, grid) = config.flux_scan()?;
    let curves =
        run_broadening_suite(&configs, config.basis_cutoff(), config.kde()?, f_range, grid)?;
    let curve = &curves[0];

    let tag = sigma_tag(sigma);
    let std_rows: Vec<Vec<f64>> = curve
        .flux_grid
        .iter()
        .zip(&curve.std_vs_flux)
        .map(|(&f, &s)| vec![f, s])
        .collect();
    let name = format!("fig5_std_vs_flux_{tag}.csv");
    write_csv(&out.join(&name), &["flux", "std_ghz"], &std_rows)?;
    println!(
        "optimal flux {:.8}: std {:.6e} GHz ({}x below the symmetry point)",
        curve.optimal_flux,
        curve.std_at_optimal,
        (curve.std_at_center / curve.std_at_optimal).round()
    );
    finish(config, out, no_integrator(), vec![name])
}

fn superradiance(config: &RunConfig, out: &Path, driven: bool) -> Result<(), AppError> {
    let context = if driven { "superradiance-driven" } else { "superradiance-discrete" };
    let template = config.spin_template(context)?;
    let steps = config.step_policy()?;
    let realizations = config.realizations()?;
    let seed = config.seed();
    let m_values = config.m_values(template.n)?;

    let discrete = run_discrete_m(&SweepConfig {
        template: template.clone(),
        m_values,
        realizations,
        seed,
        steps,
        window_sr: DEFAULT_DECAY_WINDOW_SR,
    })?;
    let model = &discrete.reference_model;

    let mut scaling_rows: Vec<Vec<f64>> = discrete
        .scaling
        .points
        .iter()
        .map(|p| {
            vec![
                p.m,
                p.mean_max_jpjm,
                p.std_max_jpjm,
                p.stderr_max_jpjm,
                intensity(model, p.mean_max_jpjm),
                0.0,
            ]
        })
        .collect();

    let mut files = Vec::new();
    for (m, series) in &discrete.representative {
        let jpjm = series.channel("jpjm").expect("recorded");
        let intensities = intensity_channel(model, jpjm);
        let excited = series.channel("excited_count").expect("recorded");
        let rows: Vec<Vec<f64>> = series
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| vec![t, jpjm[i], intensities[i], excited[i]])
            .collect();
        let name = format!("fig7de_timeseries_{m}.csv");
        write_csv(&out.join(&name), &["t_ns", "jpjm", "intensity", "excited_count"], &rows)?;
        files.push(name);
    }

    if driven {
        let drives = config.drive_sweep(&template)?;
        let sweep = run_driven(&DriveSweepConfig {
            template: template.clone(),
            drives,
            realizations,
            seed,
            steps,
            window_sr: DEFAULT_DECAY_WINDOW_SR,
            drive_divisor: DRIVE_DIVISOR,
        })?;
        let lambda_rows: Vec<Vec<f64>> = sweep
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.lambda_max / fluxsr::config::MHZ_TO_RAD_NS,
                    r.mean_m,
                    r.std_m,
                    r.mean_m_eff,
                ]
            })
            .collect();
        write_csv(
            &out.join("fig7c_lambda_to_m.csv"),
            &["lambda_max_mhz", "mean_m", "std_m", "mean_m_eff"],
            &lambda_rows,
        )?;
        files.push("fig7c_lambda_to_m.csv".into());
        scaling_rows.extend(sweep.rows.iter().map(|r| {
            vec![
                r.mean_m,
                r.mean_max_jpjm,
                r.std_max_jpjm,
                r.stderr_max_jpjm,
                intensity(model, r.mean_max_jpjm),
                1.0,
            ]
        }));
        println!(
            "drive sweep: mean M spans {:.3}..{:.3}, monotone defect {:.3}",
            sweep.rows.first().map_or(f64::NAN, |r| r.mean_m),
            sweep.rows.last().map_or(f64::NAN, |r| r.mean_m),
            sweep.monotone_defect
        );
    }

    write_csv(
        &out.join("fig7a_scaling.csv"),
        &["m", "mean_max_jpjm", "std_max_jpjm", "stderr_max_jpjm", "peak_intensity", "is_driven"],
        &scaling_rows,
    )?;
    files.push("fig7a_scaling.csv".into());

    if let (Some(lo), Some(hi)) =
        (discrete.scaling.log_log_slope(1.0, 3.0), discrete.scaling.log_log_slope(5.0, 10.0))
    {
        println!("discrete slopes: {lo:.3} (M in 1..3), {hi:.3} (M in 5..10)");
    }
    println!(
        "collective rate 2 gamma = {:.4e} rad/ns, peak step {:.4} ns",
        2.0 * superradiant_rate(model),
        decay_step(model, steps.divisor)
    );
    let integrator = IntegratorRecord {
        method: "rk4",
        step_divisor: steps.divisor,
        time_samples: steps.time_samples,
    };
    finish(config, out, integrator, files)
}

fn elimination(config: &RunConfig, out: &Path) -> Result<(), AppError> {
    let mut template = config.spin_template("validate-elimination")?;
    if config.n_qubits.is_none() {
        template.n = 2;
    }
    if template.n > 3 {
        return Err(AppError::Config(ConfigError::Invalid {
            field: "n_qubits",
            value: template.n as f64,
            requirement: "at most 3 for the full-cavity cross-check",
        }));
    }
    let steps = config.step_policy()?;
    let report = validate_elimination(
        &template,
        config.seed(),
        config.photon_cutoff(),
        steps.divisor,
        steps.time_samples.min(2001),
    )?;
    let rows: Vec<Vec<f64>> = report
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| vec![t, report.full[i], report.eliminated[i]])
        .collect();
    write_csv(&out.join("elimination.csv"), &["t_ns", "full_jpjm", "eliminated_jpjm"], &rows)?;
    println!("max relative deviation: {:.4e}", report.max_rel_deviation);
    let integrator = IntegratorRecord {
        method: "rk4",
        step_divisor: steps.divisor,
        time_samples: steps.time_samples.min(2001),
    };
    finish(config, out, integrator, vec!["elimination.csv".into()])
}
