//! `qnl`: run, iterate, filter and analyze quasineutral-limit experiments.
//!
//! Every subcommand reads one TOML config and writes one output directory.
//! Exit codes: 0 success, 2 config error, 3 blow-up, 4 constraint violation.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use quasineutral::config::{build_initial, RunConfig};
use quasineutral::diagnostics::{convergence_sweep, measure_dispersion, mode_signal, FieldPart};
use quasineutral::emhd::{emhd_simulate, limit_initial_data};
use quasineutral::error::Error as QnError;
use quasineutral::evolution::{simulate, RunParams, Trajectory};
use quasineutral::export::{
    manifest_for, trajectory_to_dto, write_csv, write_json, Manifest,
};
use quasineutral::filtering::{extract_limit_correctors, filter_h, ExtractOptions};
use quasineutral::picard::{picard_iterate, PicardOptions};
use quasineutral::resonance::{resonance_set, ResonanceKind};

#[derive(Parser)]
#[command(name = "qnl", about = "pseudo-spectral Euler-Maxwell quasineutral-limit toolkit")]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's output.dir, or "out")
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweep members (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved for test-data generation; the physics ignores it
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output format for tabular artifacts
    #[arg(long, global = true, value_parser = ["json", "csv"])]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Advance the coupled system and export the trajectory
    Simulate,
    /// Run the contraction-mapping construction on [0, η]
    Iterate,
    /// Simulate, then split E and build the corrector fields
    Filter,
    /// Simulate, then extract the limit correctors
    Extract,
    /// March the limit (electron-MHD) system from the limit initial data
    Emhd,
    /// Enumerate lattice resonance sets up to the configured cutoff
    Resonance,
    /// Measure oscillation frequencies of a linearized run
    Dispersion,
    /// Run the ε-sweep convergence study
    Sweep,
    /// Simulate and write every export artifact (trajectory, tables, manifest)
    Export,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    if let Some(qn) = err.downcast_ref::<QnError>() {
        match qn {
            QnError::Config(_) | QnError::Serde(_) => 2,
            QnError::BlowUp { .. } => 3,
            QnError::ConstraintViolation { .. } | QnError::InconsistentData { .. } => 4,
            _ => 1,
        }
    } else {
        1
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match run(&cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

struct Ctx {
    config: RunConfig,
    config_text: String,
    out: PathBuf,
    manifest: Manifest,
    format: String,
}

fn load(cli: &Cli) -> anyhow::Result<Ctx> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| QnError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| QnError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config = RunConfig::from_toml(&text)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    let manifest = manifest_for(&text);
    let format = cli
        .format
        .clone()
        .or_else(|| config.output.format.clone())
        .unwrap_or_else(|| "json".into());
    Ok(Ctx {
        config,
        config_text: text,
        out,
        manifest,
        format,
    })
}

fn run_trajectory(ctx: &Ctx) -> anyhow::Result<Trajectory> {
    let eps = ctx.config.epsilon()?;
    let data = build_initial(&ctx.config, eps)?;
    let params = RunParams {
        eps,
        dt: ctx.config.time.dt_value(),
        t_end: ctx.config.time.t_end,
        extra_horizon: None,
        stride: ctx.config.stride_steps(),
    };
    Ok(simulate(data.layers, &data.e0, &data.b0, &params)?)
}

fn diag_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.gauss_history
        .iter()
        .map(|(t, g)| vec![*t, g.l2, g.relative, g.max_mode])
        .collect()
}

fn write_manifest(ctx: &Ctx) -> anyhow::Result<()> {
    write_json(&ctx.out.join("manifest.json"), &ctx.manifest)?;
    std::fs::write(ctx.out.join("config.toml"), &ctx.config_text)?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let ctx = load(cli)?;
    write_manifest(&ctx)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Iterate => cmd_iterate(&ctx),
        Command::Filter => cmd_filter(&ctx),
        Command::Extract => cmd_extract(&ctx),
        Command::Emhd => cmd_emhd(&ctx),
        Command::Resonance => cmd_resonance(&ctx),
        Command::Dispersion => cmd_dispersion(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Export => cmd_export(&ctx),
    }
}

fn cmd_simulate(ctx: &Ctx) -> anyhow::Result<()> {
    let traj = run_trajectory(ctx)?;
    let dto = trajectory_to_dto(&traj, Some(ctx.manifest.clone()));
    write_json(&ctx.out.join("trajectory.json"), &dto)?;
    write_csv(
        &ctx.out.join("constraints.csv"),
        &["t", "gauss_l2", "gauss_relative", "gauss_max_mode"],
        &diag_rows(&traj),
    )?;
    println!(
        "simulate: {} stored states over [0, {:.4}], worst Gauss rel {:.3e}, div B {:.3e}",
        traj.states.len(),
        traj.final_time(),
        traj.worst_gauss_relative(),
        traj.div_b_max
    );
    Ok(())
}

fn cmd_iterate(ctx: &Ctx) -> anyhow::Result<()> {
    let eps = ctx.config.epsilon()?;
    let data = build_initial(&ctx.config, eps)?;
    let pc = ctx
        .config
        .picard
        .clone()
        .ok_or_else(|| QnError::Config("iterate needs a [picard] section".into()))?;
    let opts = PicardOptions {
        eta: pc.eta,
        dt: ctx.config.time.dt_value(),
        n_max: pc.n_max.unwrap_or(25),
        tol: pc.tol.unwrap_or(1e-10),
        norm: ctx.config.norms.params(pc.eta),
        auto_bisect: pc.auto_bisect.unwrap_or(true),
        max_bisections: 4,
        linearize: false,
    };
    let out = picard_iterate(&data.layers, &data.e0, &data.b0, eps, &opts)?;
    let rows: Vec<Vec<f64>> = out
        .report
        .iterations
        .iter()
        .enumerate()
        .map(|(n, s)| {
            vec![
                (n + 1) as f64,
                s.norm_rho,
                s.norm_w,
                s.norm_g,
                s.norm_eps_e,
                s.norm_b,
                s.difference,
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("iterations.csv"),
        &["n", "rho", "w", "g", "eps_e", "b", "difference"],
        &rows,
    )?;
    #[derive(serde::Serialize)]
    struct ReportDto {
        converged: bool,
        eta_final: f64,
        etas_tried: Vec<f64>,
        differences: Vec<f64>,
        ratios: Vec<f64>,
    }
    write_json(
        &ctx.out.join("iterate.json"),
        &ReportDto {
            converged: out.report.converged,
            eta_final: out.report.eta_final,
            etas_tried: out.report.etas_tried.clone(),
            differences: out.report.iterations.iter().map(|s| s.difference).collect(),
            ratios: out.report.difference_ratios(),
        },
    )?;
    println!(
        "iterate: converged = {}, η = {}, {} iterations",
        out.report.converged,
        out.report.eta_final,
        out.report.iterations.len()
    );
    Ok(())
}

fn cmd_filter(ctx: &Ctx) -> anyhow::Result<()> {
    let traj = run_trajectory(ctx)?;
    let f = filter_h(&traj)?;
    let s = 1.0;
    let rows: Vec<Vec<f64>> = f
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (irr2, sol2, _) = &f.e2[i];
            vec![
                t,
                f.e1[i].sobolev_norm(s),
                irr2.add(sol2).sobolev_norm(s),
                f.w[i].sobolev_norm(s),
                f.b[i].sobolev_norm(s),
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("filtered.csv"),
        &["t", "e1_h1", "e2_h1", "w_h1", "b_h1"],
        &rows,
    )?;
    println!(
        "filter: {} nodes, W(0) closed-form norm {:.4e}",
        f.times.len(),
        f.w0.sobolev_norm(0.0)
    );
    Ok(())
}

fn cmd_extract(ctx: &Ctx) -> anyhow::Result<()> {
    let traj = run_trajectory(ctx)?;
    let eps = traj.eps.get();
    let t_max = ctx.config.time.t_end;
    // cap the averaging window so the probes fit the horizon
    let fitting = 0.35 * t_max / (std::f64::consts::TAU * eps);
    let opts = ExtractOptions {
        window_periods: ctx
            .config
            .extract_window_periods
            .unwrap_or(10.0)
            .min(fitting)
            .max(0.5),
    };
    let window = opts.window_periods * std::f64::consts::TAU * eps;
    let times: Vec<f64> = (0..8)
        .map(|i| 0.5 * window + (t_max - window).max(0.0) * i as f64 / 7.0)
        .filter(|&t| t <= t_max)
        .collect();
    let states = extract_limit_correctors(&traj, &times, &opts)?;
    #[derive(serde::Serialize)]
    struct CorrectorDto {
        t: f64,
        d0: Vec<[f64; 2]>,
        d1: Vec<[f64; 2]>,
        d2: Vec<[f64; 2]>,
    }
    let dto: Vec<CorrectorDto> = states
        .iter()
        .map(|st| CorrectorDto {
            t: st.t,
            d0: st.d0.iter().map(|c| [c.re, c.im]).collect(),
            d1: st.d1.coefficients().iter().map(|c: &Complex64| [c.re, c.im]).collect(),
            d2: st.d2.coefficients().iter().map(|c: &Complex64| [c.re, c.im]).collect(),
        })
        .collect();
    write_json(&ctx.out.join("correctors.json"), &dto)?;
    println!("extract: {} corrector snapshots", states.len());
    Ok(())
}

fn cmd_emhd(ctx: &Ctx) -> anyhow::Result<()> {
    let eps = ctx.config.epsilon()?;
    let data = build_initial(&ctx.config, eps)?;
    let init = limit_initial_data(&data.limit_layers, &data.b0)?;
    let dt = ctx.config.time.t_end / 400.0;
    let traj = emhd_simulate(init, ctx.config.time.t_end, dt, 1e-3)?;
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, st)| {
            let c = st.constraints().unwrap();
            vec![t, c.quasineutrality, c.ampere]
        })
        .collect();
    write_csv(
        &ctx.out.join("emhd_constraints.csv"),
        &["t", "quasineutrality", "ampere"],
        &rows,
    )?;
    println!(
        "emhd: {} states, worst quasineutrality {:.3e}, worst Ampère {:.3e}",
        traj.states.len(),
        traj.worst.quasineutrality,
        traj.worst.ampere
    );
    Ok(())
}

fn cmd_resonance(ctx: &Ctx) -> anyhow::Result<()> {
    let lat = ctx.config.lattice()?;
    let cutoff = lat.cutoff();
    let dim = lat.dim();
    let radius = 20i64.max(2 * cutoff);
    let mut sets = Vec::new();
    let range = |ax: usize| -> std::ops::RangeInclusive<i64> {
        if ax < dim {
            -cutoff..=cutoff
        } else {
            0..=0
        }
    };
    for kind in [ResonanceKind::One, ResonanceKind::Two] {
        for signs in [(1i8, 1i8), (1, -1), (-1, 1), (-1, -1)] {
            for k0 in range(0) {
                for k1 in range(1) {
                    for k2 in range(2) {
                        let set = resonance_set(kind, signs, [k0, k1, k2], dim, radius);
                        if !set.members.is_empty() {
                            sets.push(set);
                        }
                    }
                }
            }
        }
    }
    write_json(&ctx.out.join("resonance_sets.json"), &sets)?;
    println!("resonance: {} non-empty sets (radius {radius})", sets.len());
    Ok(())
}

fn cmd_dispersion(ctx: &Ctx) -> anyhow::Result<()> {
    let traj = run_trajectory(ctx)?;
    let eps = traj.eps.get();
    let dcfg = ctx.config.dispersion.clone().unwrap_or_default();
    let mut mode = [0i64; 3];
    for (ax, &v) in dcfg.mode.iter().enumerate().take(3) {
        mode[ax] = v;
    }
    if mode == [0, 0, 0] {
        mode[0] = 1;
    }
    let ksq = (mode[0] * mode[0] + mode[1] * mode[1] + mode[2] * mode[2]) as f64;
    let parts: Vec<(FieldPart, &str, f64)> = match dcfg.component.as_deref() {
        Some("sol") => vec![(FieldPart::Solenoidal, "sol", (1.0 + ksq).sqrt() / eps)],
        Some("mean") => vec![(FieldPart::Mean, "mean", 1.0 / eps)],
        Some("irr") => vec![(FieldPart::Irrotational, "irr", 1.0 / eps)],
        _ => vec![
            (FieldPart::Irrotational, "irr", 1.0 / eps),
            (FieldPart::Solenoidal, "sol", (1.0 + ksq).sqrt() / eps),
            (FieldPart::Mean, "mean", 1.0 / eps),
        ],
    };
    let mut rows = Vec::new();
    for (part, name, expect) in parts {
        let comp = if part == FieldPart::Solenoidal && traj.lattice.dim() >= 2 {
            1
        } else {
            0
        };
        let (times, sig) = mode_signal(&traj, part, mode, comp)?;
        let excitation = sig
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        if excitation < 1e-12 {
            println!("dispersion {name}: part not excited by this data, skipping");
            continue;
        }
        match measure_dispersion(&times, &sig, expect, 8.0) {
            Ok(freq) => {
                println!(
                    "dispersion {name} k={mode:?}: measured {freq:.5}, expected {expect:.5}, rel {:.2e}",
                    (freq - expect).abs() / expect
                );
                rows.push(vec![expect, freq, (freq - expect).abs() / expect]);
            }
            Err(e) => println!("dispersion {name}: {e}"),
        }
    }
    write_csv(
        &ctx.out.join("dispersion.csv"),
        &["expected", "measured", "relative_error"],
        &rows,
    )?;
    Ok(())
}

fn cmd_sweep(ctx: &Ctx) -> anyhow::Result<()> {
    let report = convergence_sweep(&ctx.config)?;
    write_json(&ctx.out.join("sweep.json"), &report)?;
    let rows: Vec<Vec<f64>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.epsilon,
                e.err_rho,
                e.err_w,
                e.err_b,
                e.err_eps_e,
                e.err_correctors,
                e.gauss_relative,
                e.w_weak_pairing,
                e.e2_plateau,
                e.eps_e_plateau,
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("sweep.csv"),
        &[
            "epsilon",
            "err_rho",
            "err_w",
            "err_b",
            "err_eps_e",
            "err_correctors",
            "gauss_relative",
            "w_weak_pairing",
            "e2_plateau",
            "eps_e_plateau",
        ],
        &rows,
    )?;
    for e in &report.entries {
        println!(
            "ε = {:<6}: ρ {:.3e}  w {:.3e}  b {:.3e}  εE {:.3e}  correctors {:.3e}",
            e.epsilon, e.err_rho, e.err_w, e.err_b, e.err_eps_e, e.err_correctors
        );
    }
    println!(
        "monotone: ρ {:?}, w {:?}, b {:?}, εE {:?}, correctors {:?}",
        report.monotone_rho,
        report.monotone_w,
        report.monotone_b,
        report.monotone_eps_e,
        report.monotone_correctors
    );
    Ok(())
}

fn cmd_export(ctx: &Ctx) -> anyhow::Result<()> {
    let traj = run_trajectory(ctx)?;
    let dto = trajectory_to_dto(&traj, Some(ctx.manifest.clone()));
    match ctx.format.as_str() {
        "json" => write_json(&ctx.out.join("trajectory.json"), &dto)?,
        _ => {
            // CSV: one row per stored node with summary norms, plus the
            // constraint table; the full coefficient dump stays JSON-only
            let rows: Vec<Vec<f64>> = traj
                .states
                .iter()
                .map(|st| {
                    vec![
                        st.t,
                        st.em.total_e().sobolev_norm(1.0),
                        st.em.b.sobolev_norm(1.0),
                        st.g_total().sobolev_norm(1.0),
                    ]
                })
                .collect();
            write_csv(
                &ctx.out.join("trajectory_norms.csv"),
                &["t", "e_h1", "b_h1", "g_h1"],
                &rows,
            )?;
        }
    }
    write_csv(
        &ctx.out.join("constraints.csv"),
        &["t", "gauss_l2", "gauss_relative", "gauss_max_mode"],
        &diag_rows(&traj),
    )?;
    println!("export: wrote {} artifacts to {}", 3, ctx.out.display());
    Ok(())
}

