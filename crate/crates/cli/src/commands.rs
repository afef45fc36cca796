use crate::acceptance::{self, DEFAULT_SEED};
use crate::config::{ConfigError, ExperimentConfig};
use crate::constants::{self, FittedConstants};
use clap::{Parser, Subcommand};
use displab::born::{born_kernel, partial_fractions, sine_telescope, BornConfig, BornPart};
use displab::mc;
use displab::norms::{kato_global, y_norm, NormConfig, RollnikMethod};
use displab::oscillatory::{run_sweep, OscConfig, SweepFamily, SWEEP_CSV_HEADER};
use displab::propagator::{evolve_with, log_log_slope, save_snapshot, stein_tomas_check, EvolveOptions, Grid3, WaveField};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] displab::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Incomplete(String),
    #[error("{0} acceptance criteria failed")]
    SuiteFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "displab", version, about = "Dispersive estimates for Schrödinger operators with time-dependent potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rollnik, Kato, L^{3/2} and composite norms of the configured potential.
    Norms {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Monte-Carlo samples for the Rollnik norm; quadrature when omitted.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded sweep of oscillatory integrals against their bounds.
    Oscsweep {
        /// lambda, u or statphase (default: `sweep.family`, else lambda).
        #[arg(long)]
        family: Option<String>,
        /// Number of cases (default: `sweep.count`, else 1000).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// First case index (sweeps with disjoint index ranges are independent).
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized sine-telescope and partial-fraction identities.
    Identities {
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Order-m Born kernel pieces at the configured points.
    BornVerify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 4.0)]
        t: f64,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split-step evolution with snapshots and a norm trace.
    Evolve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "snap-every")]
        snap_every: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolvent L^{4/3} → L^4 ratios across spectral parameters.
    SteinTomas {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance suite, or recalibration of the fitted constants.
    Accept {
        /// `all`, a criterion name, or comma-separated ids.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        calibrate: bool,
        #[arg(long)]
        constants: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes to `out` (creating parent directories) or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn preamble(command: &str, cfg: &ExperimentConfig, seed: Option<u64>) -> String {
    log::info!("{command}: config sha256 {}", cfg.hash);
    match seed {
        Some(s) => format!("# displab {command} config_sha256={} seed={s}\n", cfg.hash),
        None => format!("# displab {command} config_sha256={}\n", cfg.hash),
    }
}

fn seed_of(flag: Option<u64>, cfg: &ExperimentConfig) -> u64 {
    flag.or(cfg.seed).unwrap_or(DEFAULT_SEED)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Norms { config, samples, seed, out } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let seed = seed_of(seed, &cfg);
            let mut nc = NormConfig { c0: cfg.c0, ..NormConfig::default() };
            if let Some(samples) = samples {
                nc.rollnik = RollnikMethod::MonteCarlo { samples, seed };
            }
            let r = y_norm(&cfg.potential, &nc)?;
            let mut s = preamble("norms", &cfg, samples.map(|_| seed));
            s.push_str("rollnik,rollnik_se,kato,l32,ynorm,rollnik_small,kato_small,y_small\n");
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
                r.rollnik, r.rollnik_se, r.kato_global, r.l32, r.y_norm, r.flags.rollnik_small, r.flags.kato_small, r.flags.y_small
            );
            emit(out.as_deref(), &s)
        }
        Command::Oscsweep { family, n, seed, start, config, out } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let family_name = family.or(cfg.sweep_family.clone()).unwrap_or_else(|| "lambda".into());
            let n = n.unwrap_or(cfg.sweep_count);
            let fam = SweepFamily::parse(&family_name).ok_or_else(|| CliError::Usage(format!("unknown family `{family_name}`")))?;
            let seed = seed_of(seed, &cfg);
            let rows = run_sweep(fam, seed, start, n, &OscConfig::default());
            let mut s = preamble("oscsweep", &cfg, Some(seed));
            s.push_str(SWEEP_CSV_HEADER);
            s.push('\n');
            let mut failures = 0;
            for (idx, case, r) in rows {
                let params = case.csv_fields().join(",");
                match r {
                    Ok(o) => {
                        let _ = writeln!(
                            s,
                            "{idx},{},{},{params},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e}",
                            fam.name(),
                            case.bound_key(),
                            o.value.re,
                            o.value.im,
                            o.quad_error,
                            o.bound,
                            o.ratio
                        );
                    }
                    Err(e) => {
                        failures += 1;
                        log::warn!("case {idx}: {e}");
                        let _ = writeln!(s, "{idx},{},{},{params},NaN,NaN,NaN,NaN,NaN", fam.name(), case.bound_key());
                    }
                }
            }
            emit(out.as_deref(), &s)?;
            if failures > 0 {
                return Err(CliError::Incomplete(format!("{failures} sweep cases did not converge")));
            }
            Ok(())
        }
        Command::Identities { n, seed, out } => {
            let cfg = ExperimentConfig::load(None)?;
            let seed = seed_of(seed, &cfg);
            let (sine, pf) = identity_sweep(n, seed)?;
            let mut s = preamble("identities", &cfg, Some(seed));
            s.push_str("identity,cases,max_abs_error,max_rel_error\n");
            let _ = writeln!(s, "sine_telescope,{n},{:.6e},{:.6e}", sine.0, sine.1);
            let _ = writeln!(s, "partial_fractions,{n},{:.6e},{:.6e}", pf.0, pf.1);
            emit(out.as_deref(), &s)
        }
        Command::BornVerify { config, m, t, s, samples, seed, out } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            if m > 2 {
                return Err(CliError::Usage("born-verify supports m ≤ 2".into()));
            }
            let seed = seed_of(seed, &cfg);
            let text = born_verify(&cfg, m, t, s, samples, seed)?;
            emit(out.as_deref(), &text)
        }
        Command::Evolve { config, t, dt, snap_every, out } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            run_evolve(&cfg, t, dt, snap_every, &out)
        }
        Command::SteinTomas { config, out } => {
            let cfg = ExperimentConfig::load(config.as_deref())?;
            let w = cfg.st_width;
            let f = move |r: f64| (-(r / w) * (r / w)).exp();
            let mut s = preamble("stein-tomas", &cfg, None);
            s.push_str("lambda,resolvent_l4,data_l43,ratio,ratio_times_lambda_quarter\n");
            let mut pts = Vec::new();
            for &lambda in &cfg.st_lambdas {
                let st = stein_tomas_check(lambda, &f, cfg.st_support * w)?;
                pts.push((lambda, st.ratio));
                let _ = writeln!(s, "{lambda:.6e},{:.12e},{:.12e},{:.12e},{:.12e}", st.resolvent_l4, st.data_l43, st.ratio, st.ratio * lambda.powf(0.25));
            }
            if pts.len() >= 2 {
                let _ = writeln!(s, "# log-log slope {:.6}", log_log_slope(&pts));
            }
            emit(out.as_deref(), &s)
        }
        Command::Accept { suite, calibrate, constants, seed, out } => run_accept(&suite, calibrate, constants.as_deref(), seed.unwrap_or(DEFAULT_SEED), out.as_deref()),
    }
}

type Worst = (f64, f64);

fn identity_sweep(n: u64, seed: u64) -> Result<(Worst, Worst)> {
    let rows = displab::parallel::map_range(n as usize, |i| -> displab::Result<(f64, f64, f64, f64)> {
        let mut rng = mc::stream(seed, i as u64);
        let k = rng.random_range(2..=10);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(-PI..PI)).collect();
        let (l, r) = sine_telescope(&a)?;
        let sine_abs = (l - r).norm();
        let sine_rel = sine_abs / r.abs().max(f64::MIN_POSITIVE);
        let k = rng.random_range(1..=8);
        let mut z: Vec<Complex64> = Vec::with_capacity(k);
        while z.len() < k {
            let w = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(-PI..PI));
            if z.iter().all(|&u| (u - w).norm() > 0.1) {
                z.push(w);
            }
        }
        let (l, r) = partial_fractions(&z)?;
        Ok((sine_abs, sine_rel, (l - r).norm(), (l - r).norm() / r.norm()))
    });
    let mut sine = (0.0f64, 0.0f64);
    let mut pf = (0.0f64, 0.0f64);
    for row in rows {
        let (a, b, c, d) = row?;
        sine = (sine.0.max(a), sine.1.max(b));
        pf = (pf.0.max(c), pf.1.max(d));
    }
    Ok((sine, pf))
}

fn born_verify(cfg: &ExperimentConfig, m: usize, t: f64, s: f64, samples: u64, seed: u64) -> Result<String> {
    let v = &cfg.potential;
    let (x, y) = (cfg.born_x, cfg.born_y);
    let bcfg = BornConfig::default();
    let mut parts = vec![BornPart::All];
    parts.extend((0..=m).map(BornPart::L));
    for d in 2..=m + 1 {
        parts.extend((1..d).map(|c| BornPart::M { d, c }));
        parts.extend((d..=m + 1).map(|a| BornPart::MTilde { d, a }));
    }
    let elapsed = t - s;
    let kato = kato_global(v.space(), &Default::default())?;
    // Free-kernel modulus times the iterated-Kato factor (m+1)(mass·‖V₀‖_K/4π)^m.
    let reference = (4.0 * PI * elapsed).powf(-1.5) * (m as f64 + 1.0) * (v.fourier_mass() * kato / (4.0 * PI)).powi(m as i32);
    let mut out = preamble("born-verify", cfg, Some(seed));
    out.push_str("part,re,im,std_error,reference_bound,scaled_magnitude\n");
    for part in parts {
        let e = born_kernel(v, m, t, s, part, x, y, samples, seed, &bcfg)?;
        let label = match part {
            BornPart::All => "all".to_string(),
            BornPart::L(l) => format!("L{l}"),
            BornPart::M { d, c } => format!("M{d}_{c}"),
            BornPart::MTilde { d, a } => format!("Mt{d}_{a}"),
        };
        let _ = writeln!(
            out,
            "{label},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e}",
            e.mean.re,
            e.mean.im,
            e.std_error,
            reference,
            e.mean.norm() * elapsed.abs().powf(1.5)
        );
    }
    Ok(out)
}

fn run_evolve(cfg: &ExperimentConfig, t: Option<f64>, dt: Option<f64>, snap_every: Option<usize>, out: &Path) -> Result<()> {
    let dt = dt.unwrap_or(cfg.solver.dt);
    let snap_every = snap_every.unwrap_or(cfg.solver.snap_every);
    if !(dt > 0.0) || snap_every == 0 {
        return Err(CliError::Usage("--dt must be positive and --snap-every at least 1".into()));
    }
    let s0 = cfg.solver.s;
    let t_final = t.unwrap_or(cfg.solver.t_final);
    let grid = Grid3::new(cfg.grid.n, cfg.grid.half_width)?;
    let psi = WaveField::gaussian(grid, cfg.initial_a, cfg.initial_center);
    std::fs::create_dir_all(out)?;
    save_snapshot(&out.join("snap_00000.wf3d"), &psi)?;
    let mut k = 0usize;
    let opts = EvolveOptions { dt, sample_every: snap_every, keep_fields: false };
    let traj = evolve_with(&psi, &cfg.potential, s0, t_final, opts, |_, field| {
        k += 1;
        save_snapshot(&out.join(format!("snap_{k:05}.wf3d")), field).map_err(|e| displab::Error::Domain(format!("snapshot: {e}")))
    })?;
    let mut s = preamble("evolve", cfg, None);
    s.push_str("t,l2,l6,linf,linf_scaled\n");
    for r in &traj.records {
        let _ = writeln!(s, "{:.9e},{:.12e},{:.12e},{:.12e},{:.12e}", r.t, r.l2, r.l6, r.linf, r.linf_scaled);
    }
    emit(Some(&out.join("norms.csv")), &s)
}

fn run_accept(suite: &str, calibrate: bool, constants_path: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<()> {
    if calibrate {
        let fitted = acceptance::calibrate(seed)?;
        let path = constants_path.map(Path::to_path_buf).unwrap_or_else(constants::default_path);
        let header = format!(
            "Fitted constants. Regenerate with `displab accept --calibrate`.\nosc.c0, osc.statphase: ratio maxima over sweep indices [0, {}) of seed {seed}, times {}.\nborn.c1: per-order Duhamel ratio over y_norm at the calibration amplitude, same factor.",
            acceptance::SWEEP_CASES,
            acceptance::HEADROOM
        );
        emit(Some(&path), &fitted.render(&header))?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let ids = acceptance::select(suite).ok_or_else(|| CliError::Usage(format!("unknown suite `{suite}`")))?;
    let fitted = FittedConstants::load(constants_path).map_err(CliError::Usage)?;
    let mut report = String::new();
    let mut failed = 0;
    for id in ids {
        let o = acceptance::run(id, seed, &fitted);
        println!("{}", o.line());
        report.push_str(&o.line());
        report.push('\n');
        failed += usize::from(!o.pass);
    }
    if let Some(dir) = out {
        emit(Some(&dir.join("acceptance.txt")), &report)?;
    }
    if failed > 0 {
        return Err(CliError::SuiteFailed(failed));
    }
    Ok(())
}
