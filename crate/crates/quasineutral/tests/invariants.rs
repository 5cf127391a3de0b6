//! Cross-module invariants: conservation along runs, agreement between the
//! two solvers, exactness of the filtering split, slow variation of the
//! demodulated envelopes, and pipeline idempotence through export.

use num_complex::Complex64;
use quasineutral::config::{build_initial, RunConfig};
use quasineutral::evolution::{simulate, RunParams};
use quasineutral::export::{trajectory_from_dto, trajectory_to_dto};
use quasineutral::field::{Rank, SpectralField};
use quasineutral::filtering::{corrector_eps_e, demodulated_signals, extract_limit_correctors, filter_h, ExtractOptions};
use quasineutral::layers::{velocity_remainder_jacobian, Epsilon, FluidLayer};
use quasineutral::lattice::Lattice;
use quasineutral::norms::AnalyticNormParams;
use quasineutral::picard::{picard_iterate, PicardOptions};

fn small_run(eps_val: f64, t_end: f64) -> quasineutral::evolution::Trajectory {
    let toml = format!(
        r#"
[lattice]
dim = 2
cutoff = 3

[time]
epsilon = {eps_val}
t_end = {t_end}

[init]
preset = "two-stream-sheets"
amplitude = 0.08
drift = 0.15
b_amplitude = 0.08
"#
    );
    let cfg = RunConfig::from_toml(&toml).unwrap();
    let eps = cfg.epsilon().unwrap();
    let data = build_initial(&cfg, eps).unwrap();
    let dt = eps.get() / 50.0;
    let stride = cfg.stride_steps();
    let params = RunParams {
        eps,
        dt,
        t_end,
        extra_horizon: None,
        stride,
    };
    simulate(data.layers, &data.e0, &data.b0, &params).unwrap()
}

#[test]
fn mass_per_layer_is_conserved() {
    let traj = small_run(0.1, 0.3);
    let z = traj.lattice.zero_mode();
    for l in 0..traj.num_layers() {
        let m0 = traj.states[0].layers[l].rho.coeff(0, z).re;
        for st in &traj.states {
            let m = st.layers[l].rho.coeff(0, z).re;
            assert!((m - m0).abs() < 1e-10 * m0.abs(), "layer {l}: {m} vs {m0}");
        }
    }
}

#[test]
fn density_stays_positive_on_valid_runs() {
    let traj = small_run(0.1, 0.3);
    assert!(traj.min_density > 0.5);
}

#[test]
fn filtering_split_is_exact_and_w_raw_starts_at_zero() {
    let traj = small_run(0.1, 0.3);
    let f = filter_h(&traj).unwrap();
    for (i, e1) in f.e1.iter().enumerate() {
        let (irr2, sol2, mean2) = &f.e2[i];
        let mut e2_tot = irr2.add(sol2);
        let z = traj.lattice.zero_mode();
        for c in 0..traj.lattice.vcomp() {
            let v = e2_tot.coeff(c, z);
            e2_tot.set_coeff(
                c,
                z,
                v + Complex64::new(mean2[c] * traj.lattice.volume(), 0.0),
            );
        }
        // E₁ is defined as the exact difference: recomputing it reproduces
        // the stored field bit-wise, and the sum reconstructs E to rounding
        let expect = traj.states[i].em.total_e();
        let diff = expect.sub(&e2_tot);
        let total = e1.add(&e2_tot);
        let scale = expect.max_coeff().max(1.0);
        for c in 0..traj.lattice.vcomp() {
            for m in 0..traj.lattice.num_modes() {
                assert_eq!(e1.coeff(c, m), diff.coeff(c, m));
                assert!((total.coeff(c, m) - expect.coeff(c, m)).norm() <= 1e-15 * scale);
            }
        }
    }
    assert!(f.w_raw[0].max_coeff() == 0.0);
    // the offset corrector starts at the closed-form initial value
    assert!(f.w[0].sub(&f.w0).max_coeff() < 1e-15);
}

#[test]
fn corrector_prediction_is_a_real_field() {
    // the "-" branch is the conjugate mirror of "+": the assembled εE
    // prediction must be Hermitian (a real field)
    let traj = small_run(0.1, 0.3);
    let opts = ExtractOptions {
        window_periods: 2.0,
    };
    let probe = [0.15];
    let states = extract_limit_correctors(&traj, &probe, &opts).unwrap();
    let eps = traj.eps;
    let pred = corrector_eps_e(&states[0], 0.15, eps);
    assert!(pred.hermitian_error() < 1e-12);
}

#[test]
fn demodulated_envelopes_vary_slowly() {
    // numerical time derivative of the demodulated d-estimates is much
    // smaller than that of the raw εE mode signals (ratio > 5 at ε = 0.05)
    let traj = small_run(0.05, 0.25);
    let signals = demodulated_signals(&traj).unwrap();
    let lat = traj.lattice.clone();
    let i1 = lat.mode_index(&[1, 0, 0]).unwrap();
    let eps = traj.eps.get();
    // raw signal: εÊ_sol component on the source grid is not stored; use the
    // stored stride states for the raw derivative and the demodulated (dense)
    // for the envelope derivative
    let mut raw_deriv = 0.0f64;
    for w in traj.states.windows(2) {
        let dt = w[1].t - w[0].t;
        let d = (w[1].em.e_sol.coeff(1, i1) - w[0].em.e_sol.coeff(1, i1)).norm() * eps / dt;
        raw_deriv = raw_deriv.max(d);
    }
    let mut env_deriv = 0.0f64;
    for w in signals.windows(8) {
        let dt = w[7].t - w[0].t;
        let d = (w[7].d2.coeff(1, i1) - w[0].d2.coeff(1, i1)).norm() / dt;
        env_deriv = env_deriv.max(d);
    }
    assert!(
        raw_deriv > 5.0 * env_deriv,
        "raw {raw_deriv:.3e} vs envelope {env_deriv:.3e}"
    );
}

#[test]
fn weak_pairing_of_w_decreases_with_eps() {
    // |⟨W, χ⟩| against a fixed smooth time window shrinks along the sweep
    // ε small enough that the averaging window 2πε fits the horizon; the
    // pairing is only meaningful in that regime
    let mut pairings = Vec::new();
    for eps_val in [0.08, 0.05, 0.03] {
        let t_end = 0.6;
        let traj = small_run(eps_val, t_end);
        let f = filter_h(&traj).unwrap();
        let mut acc = SpectralField::zeros(&traj.lattice, Rank::Vector);
        let mut wsum = 0.0;
        for (i, &t) in f.times.iter().enumerate() {
            if t > t_end {
                break;
            }
            let chi = (std::f64::consts::PI * t / t_end).sin().powi(2);
            let h = if i + 1 < f.times.len() {
                f.times[i + 1] - t
            } else {
                0.0
            };
            acc.axpy(chi * h, &f.w_raw[i]);
            wsum += chi * h;
        }
        pairings.push(acc.sobolev_norm(0.0) / wsum);
    }
    assert!(
        pairings[0] > pairings[1] && pairings[1] > pairings[2],
        "pairings {pairings:?}"
    );
}

#[test]
fn picard_agrees_with_direct_simulation() {
    // both solvers on the same small-η problem agree within the larger of
    // their tolerances (sup over [0, η] of the mode coefficients)
    let eps = Epsilon::new(0.2).unwrap();
    let lat = Lattice::minimal(1, 2).unwrap();
    let mut layers = vec![FluidLayer::quiescent(&lat, 1.0)];
    layers[0]
        .xi
        .set_mode_pair(0, &[1, 0, 0], Complex64::new(0.06, 0.02))
        .unwrap();
    let mut e0 = SpectralField::zeros(&lat, Rank::Vector);
    e0.set_mode_pair(0, &[1, 0, 0], Complex64::new(0.0, 0.25 / eps.get()))
        .unwrap();
    let mut corr = e0.divergence();
    corr.scale(eps.get() * eps.get());
    layers[0].rho.add_assign(&corr);
    let b0 = SpectralField::zeros(&lat, Rank::Axial);

    let eta = 0.05;
    let dt = eps.get() / 100.0;
    let opts = PicardOptions {
        eta,
        dt,
        n_max: 30,
        tol: 1e-12,
        norm: AnalyticNormParams {
            delta0: 1.3,
            beta: 0.5,
            eta,
            delta_grid: 24,
        },
        auto_bisect: false,
        max_bisections: 0,
        linearize: false,
    };
    let picard = picard_iterate(&layers, &e0, &b0, eps, &opts).unwrap();
    assert!(picard.report.converged);

    let params = RunParams {
        eps,
        dt,
        t_end: eta,
        extra_horizon: Some(0.0),
        stride: 1,
    };
    let direct = simulate(layers, &e0, &b0, &params).unwrap();

    // compare ξ = w + G and ρ on the common grid
    let mut worst = 0.0f64;
    for (node, &t) in picard.iterate.times.iter().enumerate() {
        let di = direct
            .times
            .iter()
            .position(|&s| (s - t).abs() < 1e-12)
            .unwrap_or_else(|| panic!("no matching node at {t}"));
        let xi_p = picard.iterate.xi(node, 0);
        let xi_d = &direct.states[di].layers[0].xi;
        worst = worst.max(xi_p.sub(xi_d).max_coeff());
        let rho_p = &picard.iterate.rho[node][0];
        let rho_d = &direct.states[di].layers[0].rho;
        worst = worst.max(rho_p.sub(rho_d).max_coeff());
    }
    // both schemes resolve the oscillation; the gap is set by their common
    // source-sampling resolution, a few × (dt/ε)² relative
    assert!(worst < 5e-4, "solver disagreement {worst:.3e}");
}

#[test]
fn eps_e_and_e2_plateau_across_the_sweep() {
    // uniform boundedness surrogates: the sup norms stay within a fixed
    // factor across ε ∈ {0.2, 0.1, 0.05}
    let mut eps_e = Vec::new();
    let mut e2 = Vec::new();
    for eps_val in [0.2, 0.1, 0.05] {
        let traj = small_run(eps_val, 0.25);
        let plateau = traj
            .states
            .iter()
            .map(|s| s.em.total_e().scaled(eps_val).sobolev_norm(1.0))
            .fold(0.0f64, f64::max);
        eps_e.push(plateau);
        let f = filter_h(&traj).unwrap();
        let mut worst = 0.0f64;
        for (irr2, sol2, _) in &f.e2 {
            worst = worst.max(irr2.add(sol2).sobolev_norm(1.0));
        }
        e2.push(worst);
    }
    let ratio = |v: &[f64]| {
        let max = v.iter().cloned().fold(0.0f64, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min.max(1e-300)
    };
    assert!(ratio(&eps_e) < 3.0, "εE plateaus {eps_e:?}");
    assert!(ratio(&e2) < 5.0, "E₂ plateaus {e2:?}");
}

#[test]
fn velocity_jacobian_ratio_stays_bounded_as_eps_shrinks() {
    // ‖λ(ξ)‖ / (ε²‖ξ‖²) over random points stays below one constant
    let mut rng_state = 0xabcdefu64;
    let mut next = move || {
        rng_state = rng_state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((rng_state >> 33) as f64 / 2f64.powi(31)) - 1.0
    };
    let mut worst = 0.0f64;
    for eps_val in [0.4, 0.2, 0.1] {
        let eps = Epsilon::new(eps_val).unwrap();
        for _ in 0..200 {
            let xi = [next() * 1.5, next() * 1.5, next() * 1.5];
            let nsq: f64 = xi.iter().map(|v| v * v).sum();
            if nsq < 1e-6 {
                continue;
            }
            let lam = velocity_remainder_jacobian(&xi, eps);
            let fro: f64 = lam.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(fro / (eps_val * eps_val * nsq));
        }
    }
    assert!(worst < 2.0, "ratio {worst}");
}

#[test]
fn export_reingest_refilter_is_identical() {
    let traj = small_run(0.1, 0.2);
    let f1 = filter_h(&traj).unwrap();
    let dto = trajectory_to_dto(&traj, None);
    let json = serde_json::to_string(&dto).unwrap();
    let dto2: quasineutral::export::TrajectoryDto = serde_json::from_str(&json).unwrap();
    let traj2 = trajectory_from_dto(&dto2).unwrap();
    let f2 = filter_h(&traj2).unwrap();
    assert_eq!(f1.times, f2.times);
    for (a, b) in f1.w.iter().zip(&f2.w) {
        for c in 0..traj.lattice.vcomp() {
            for m in 0..traj.lattice.num_modes() {
                assert_eq!(a.coeff(c, m), b.coeff(c, m));
            }
        }
    }
    for (a, b) in f1.b.iter().zip(&f2.b) {
        for m in 0..traj.lattice.num_modes() {
            assert_eq!(a.coeff(0, m), b.coeff(0, m));
        }
    }
}

#[test]
fn three_dimensional_run_smoke() {
    // the full pipeline also runs in 3D (desk scale: small cutoff)
    let toml = r#"
[lattice]
dim = 3
cutoff = 2

[time]
epsilon = 0.2
t_end = 0.05

[init]
preset = "two-stream-sheets"
amplitude = 0.05
drift = 0.1
b_amplitude = 0.05
"#;
    let cfg = RunConfig::from_toml(toml).unwrap();
    let eps = cfg.epsilon().unwrap();
    let data = build_initial(&cfg, eps).unwrap();
    let params = RunParams {
        eps,
        dt: eps.get() / 25.0,
        t_end: 0.05,
        extra_horizon: None,
        stride: 4,
    };
    let traj = simulate(data.layers, &data.e0, &data.b0, &params).unwrap();
    assert!(traj.worst_gauss_relative() < 1e-5);
    assert!(traj.div_b_max < 1e-10);
    let f = filter_h(&traj).unwrap();
    assert!(!f.times.is_empty());
}

#[test]
fn single_epsilon_sweep_has_no_verdict_and_repeats_are_identical() {
    let toml = r#"
[lattice]
dim = 2
cutoff = 2

[time]
epsilon = 0.2
t_end = 0.1

[init]
preset = "two-stream-sheets"
amplitude = 0.05
drift = 0.1
b_amplitude = 0.05

[sweep]
epsilons = [0.2]
"#;
    let cfg = RunConfig::from_toml(toml).unwrap();
    let report = quasineutral::diagnostics::convergence_sweep(&cfg).unwrap();
    assert_eq!(report.entries.len(), 1);
    assert!(report.monotone_rho.is_none());
    assert!(report.ratios_rho.is_empty());

    // identical ε twice: bit-identical metrics (determinism)
    let toml2 = toml.replace("epsilons = [0.2]", "epsilons = [0.2, 0.2]");
    let cfg2 = RunConfig::from_toml(&toml2).unwrap();
    let rep2 = quasineutral::diagnostics::convergence_sweep(&cfg2).unwrap();
    assert_eq!(rep2.entries[0].err_rho, rep2.entries[1].err_rho);
    assert_eq!(rep2.entries[0].err_w, rep2.entries[1].err_w);
    assert_eq!(rep2.entries[0].err_eps_e, rep2.entries[1].err_eps_e);
    assert_eq!(rep2.entries[0].gauss_relative, rep2.entries[1].gauss_relative);
}
