//! Dispersion measurement, ε-sweep convergence studies, and their reports.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{build_initial, RunConfig};
use crate::emhd::{emhd_simulate, limit_initial_data, EmhdState, EmhdTrajectory};
use crate::error::{Error, Result};
use crate::evolution::{simulate, RunParams, Trajectory};
use crate::field::{Rank, SpectralField};
use crate::filtering::{
    corrector_eps_e, extract_limit_correctors, filter_h, CorrectorState, ExtractOptions,
};
use crate::layers::Epsilon;

/// Which part of the electric field a dispersion probe reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldPart {
    Irrotational,
    Solenoidal,
    Mean,
}

/// Dominant angular frequency of a sampled complex signal: demean, scan a
/// periodogram over both rotation senses, refine the peak by quadratic
/// interpolation. Needs at least `min_periods` of the expected frequency.
pub fn measure_dispersion(
    times: &[f64],
    signal: &[Complex64],
    expected_freq_hint: f64,
    min_periods: f64,
) -> Result<f64> {
    if times.len() != signal.len() || times.len() < 8 {
        return Err(Error::SizeMismatch {
            want: times.len().max(8),
            got: signal.len(),
        });
    }
    let t_span = times[times.len() - 1] - times[0];
    let need = min_periods * std::f64::consts::TAU / expected_freq_hint;
    if t_span < need {
        return Err(Error::SignalTooShort {
            need,
            have: t_span,
        });
    }
    let mean = signal.iter().sum::<Complex64>() / signal.len() as f64;
    // Hann window against spectral leakage from the non-periodic record
    let t0 = times[0];
    let windowed: Vec<Complex64> = times
        .iter()
        .zip(signal)
        .map(|(&t, s)| {
            let x = (t - t0) / t_span;
            let w = 0.5 - 0.5 * (std::f64::consts::TAU * x).cos();
            (s - mean) * w
        })
        .collect();
    // Nyquist ceiling from the typical spacing (the median guards against a
    // single short trailing interval doubling the scan range into aliases)
    let mut spacings: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    spacings.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dt_med = spacings[spacings.len() / 2];
    let omega_max = std::f64::consts::PI / dt_med;
    let power = |omega: f64| -> f64 {
        let mut plus = Complex64::new(0.0, 0.0);
        let mut minus = Complex64::new(0.0, 0.0);
        for (t, s) in times.iter().zip(&windowed) {
            let ph = Complex64::new(0.0, -omega * (t - t0)).exp();
            plus += s * ph;
            minus += s * ph.conj();
        }
        plus.norm_sqr() + minus.norm_sqr()
    };
    // coarse scan at a quarter of the Rayleigh resolution, then a fine scan
    // around the peak with quadratic interpolation
    let coarse = 0.25 * std::f64::consts::TAU / t_span;
    let n_scan = (omega_max / coarse) as usize;
    let mut best = (0usize, 0.0f64);
    for i in 1..=n_scan {
        let p = power(i as f64 * coarse);
        if p > best.1 {
            best = (i, p);
        }
    }
    if best.0 == 0 {
        return Err(Error::SignalTooShort {
            need,
            have: t_span,
        });
    }
    let mut center = best.0 as f64 * coarse;
    let mut step = coarse;
    for _ in 0..6 {
        step *= 0.2;
        let mut local = (center, power(center));
        for j in -5i32..=5 {
            let om = center + j as f64 * step;
            if om <= 0.0 {
                continue;
            }
            let p = power(om);
            if p > local.1 {
                local = (om, p);
            }
        }
        center = local.0;
    }
    // final parabolic touch-up
    let (pm, p0, pp) = (power(center - step), power(center), power(center + step));
    let denom = pm - 2.0 * p0 + pp;
    if denom.abs() > 0.0 {
        center += step * (0.5 * (pm - pp) / denom).clamp(-0.5, 0.5);
    }
    Ok(center)
}

/// Complex signal of one spectral component along the stored trajectory.
pub fn mode_signal(
    traj: &Trajectory,
    part: FieldPart,
    mode: [i64; 3],
    comp: usize,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let lat = &traj.lattice;
    let times = traj.times.clone();
    let signal: Vec<Complex64> = match part {
        FieldPart::Mean => traj
            .states
            .iter()
            .map(|s| Complex64::new(s.em.e_mean[comp], 0.0))
            .collect(),
        _ => {
            let idx = lat
                .mode_index(&mode)
                .ok_or_else(|| Error::Config(format!("mode {mode:?} outside cutoff")))?;
            traj.states
                .iter()
                .map(|s| match part {
                    FieldPart::Irrotational => s.em.e_irr.coeff(comp, idx),
                    FieldPart::Solenoidal => s.em.e_sol.coeff(comp, idx),
                    FieldPart::Mean => unreachable!(),
                })
                .collect()
        }
    };
    Ok((times, signal))
}

/// Per-ε metrics of the quasineutral-limit study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    /// sup over time/layers of ‖ρ_Θ^ε - ρ_Θ‖_{H^s}
    pub err_rho: f64,
    /// sup over time/layers of ‖(ξ_Θ - W) - w_Θ‖_{H^s}
    pub err_w: f64,
    /// sup over time of ‖(B + ∇×W) - B_limit‖_{H^s}
    pub err_b: f64,
    /// sup over time of ‖εE - corrector prediction‖_{H^s}
    pub err_eps_e: f64,
    /// sup over time of the extracted-vs-evolved corrector discrepancy
    pub err_correctors: f64,
    /// worst relative Gauss residual along the run
    pub gauss_relative: f64,
    /// |⟨W, χ⟩| against a fixed smooth time window (weak smallness probe)
    pub w_weak_pairing: f64,
    /// sup-in-time Sobolev norm of E₂ (boundedness plateau)
    pub e2_plateau: f64,
    /// uniform analytic norm proxy of εE (boundedness plateau)
    pub eps_e_plateau: f64,
    /// measured solenoidal frequency of mode (1,0,..) and its expectation
    /// √(1+|k|²)/ε, when the run is long enough to resolve it
    pub freq_sol_measured: Option<f64>,
    pub freq_sol_expected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    pub sobolev_index: f64,
    /// strict decrease verdicts with consecutive ratios, per metric
    pub monotone_rho: Option<bool>,
    pub monotone_w: Option<bool>,
    pub monotone_b: Option<bool>,
    pub monotone_eps_e: Option<bool>,
    pub monotone_correctors: Option<bool>,
    pub ratios_rho: Vec<f64>,
    pub ratios_w: Vec<f64>,
    pub ratios_b: Vec<f64>,
    pub ratios_eps_e: Vec<f64>,
}

fn ratios(entries: &[f64]) -> Vec<f64> {
    entries
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::NAN })
        .collect()
}

fn monotone(entries: &[f64]) -> Option<bool> {
    if entries.len() < 2 {
        return None;
    }
    Some(entries.windows(2).all(|w| w[1] < w[0]))
}

/// Interpolate an e-MHD trajectory state at time t (linear in coefficients).
fn emhd_state_at(traj: &EmhdTrajectory, t: f64) -> EmhdState {
    let n = traj.times.len();
    if n == 1 || t <= traj.times[0] {
        return traj.states[0].clone();
    }
    if t >= traj.times[n - 1] {
        return traj.states[n - 1].clone();
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if traj.times[mid] <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = (t - traj.times[lo]) / (traj.times[lo + 1] - traj.times[lo]);
    let a = &traj.states[lo];
    let b = &traj.states[lo + 1];
    let mut layers = a.layers.clone();
    for (i, l) in layers.iter_mut().enumerate() {
        l.rho.scale(1.0 - lam);
        l.rho.axpy(lam, &b.layers[i].rho);
        l.xi.scale(1.0 - lam);
        l.xi.axpy(lam, &b.layers[i].xi);
    }
    let mut bb = a.b.scaled(1.0 - lam);
    bb.axpy(lam, &b.b);
    EmhdState {
        t,
        layers,
        b: bb,
    }
}

/// Run one sweep member and compute its metrics against the shared limit
/// reference.
pub fn sweep_member(
    config: &RunConfig,
    epsilon: f64,
    reference: &EmhdTrajectory,
    correctors_ref: &[CorrectorState],
    sobolev_index: f64,
) -> Result<SweepEntry> {
    let eps = Epsilon::new(epsilon)?;
    let data = build_initial(config, eps)?;
    let dt = epsilon / (config.time.epsilon / config.time.dt_value()).round();
    let stride = {
        let spw = config.time.samples_per_window.unwrap_or(64).max(2);
        let window = std::f64::consts::TAU * epsilon;
        ((window / (spw as f64 * dt)).floor() as usize).max(1)
    };
    let params = RunParams {
        eps,
        dt,
        t_end: config.time.t_end,
        extra_horizon: None,
        stride,
    };
    let traj = simulate(data.layers.clone(), &data.e0, &data.b0, &params)?;
    let filtered = filter_h(&traj)?;

    let s = sobolev_index;
    let mut err_rho = 0.0f64;
    let mut err_w = 0.0f64;
    let mut err_b = 0.0f64;
    let mut e2_plateau = 0.0f64;
    for (i, &t) in filtered.times.iter().enumerate() {
        if t > config.time.t_end + 1e-12 {
            break;
        }
        let reference_state = emhd_state_at(reference, t);
        for (l, lw) in filtered.layer_w[i].iter().enumerate() {
            let dr = traj.states[i].layers[l].rho.sub(&reference_state.layers[l].rho);
            err_rho = err_rho.max(dr.sobolev_norm(s));
            let dw = lw.sub(&reference_state.layers[l].xi);
            err_w = err_w.max(dw.sobolev_norm(s));
        }
        let db = filtered.b[i].sub(&reference_state.b);
        err_b = err_b.max(db.sobolev_norm(s));
        let (i2, s2, m2) = &filtered.e2[i];
        let mut e2_tot = i2.add(s2);
        let z = traj.lattice.zero_mode();
        for c in 0..traj.lattice.vcomp() {
            let v = e2_tot.coeff(c, z);
            e2_tot.set_coeff(c, z, v + Complex64::new(m2[c] * traj.lattice.volume(), 0.0));
        }
        e2_plateau = e2_plateau.max(e2_tot.sobolev_norm(s));
    }

    // corrector comparison at a few interior times; cap the averaging
    // window so it fits the horizon at the largest ε
    let t_max = config.time.t_end;
    let default_periods = config.extract_window_periods.unwrap_or(10.0);
    let fitting = 0.35 * t_max / (std::f64::consts::TAU * epsilon);
    let window = ExtractOptions {
        window_periods: default_periods.min(fitting).max(0.5),
    };
    let probe_times: Vec<f64> = (0..5)
        .map(|i| t_max * (0.1 + 0.8 * i as f64 / 4.0))
        .collect();
    let extracted = extract_limit_correctors(&traj, &probe_times, &window)?;
    let mut err_correctors = 0.0f64;
    let mut err_eps_e = 0.0f64;
    for ext in &extracted {
        // nearest evolved corrector state
        let ode_state = correctors_ref
            .iter()
            .min_by(|a, b| {
                (a.t - ext.t)
                    .abs()
                    .partial_cmp(&(b.t - ext.t).abs())
                    .unwrap()
            })
            .ok_or_else(|| Error::Config("empty corrector reference".into()))?;
        let mut d = ext.d1.sub(&ode_state.d1).sobolev_norm(s);
        d = d.max(ext.d2.sub(&ode_state.d2).sobolev_norm(s));
        let d0err: f64 = ext
            .d0
            .iter()
            .zip(&ode_state.d0)
            .map(|(a, b)| (a - b).norm())
            .sum();
        err_correctors = err_correctors.max(d + d0err);
    }
    // εE residual against the evolved correctors, on stored nodes
    for (i, &t) in filtered.times.iter().enumerate() {
        if t > t_max + 1e-12 {
            break;
        }
        let ode_state = correctors_ref
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap())
            .unwrap();
        let prediction = corrector_eps_e(ode_state, t, eps);
        let eps_e = traj.states[i].em.total_e().scaled(epsilon);
        err_eps_e = err_eps_e.max(eps_e.sub(&prediction).sobolev_norm(s));
    }

    // weak pairing of the raw corrector against a fixed smooth bump in time
    let mut pairing = SpectralField::zeros(&traj.lattice, Rank::Vector);
    let mut weight_sum = 0.0;
    for (i, &t) in filtered.times.iter().enumerate() {
        if t > t_max {
            break;
        }
        let x = t / t_max;
        let chi = (std::f64::consts::PI * x).sin().powi(2);
        let h = if i + 1 < filtered.times.len() {
            filtered.times[i + 1] - t
        } else {
            0.0
        };
        pairing.axpy(chi * h, &filtered.w_raw[i]);
        weight_sum += chi * h;
    }
    let w_weak_pairing = if weight_sum > 0.0 {
        pairing.sobolev_norm(0.0) / weight_sum
    } else {
        0.0
    };

    let eps_e_plateau = traj
        .states
        .iter()
        .map(|st| st.em.total_e().scaled(epsilon).sobolev_norm(s))
        .fold(0.0, f64::max);

    // dominant solenoidal frequency of the first excited mode, when the
    // horizon is long enough for a stable estimate
    let mut probe_mode = [0i64; 3];
    probe_mode[0] = 1;
    let freq_sol_expected = 2.0f64.sqrt() / epsilon;
    let freq_sol_measured = if traj.lattice.dim() >= 2 {
        mode_signal(&traj, FieldPart::Solenoidal, probe_mode, 1)
            .ok()
            .and_then(|(times, sig)| measure_dispersion(&times, &sig, freq_sol_expected, 3.0).ok())
    } else {
        None
    };

    Ok(SweepEntry {
        epsilon,
        err_rho,
        err_w,
        err_b,
        err_eps_e,
        err_correctors,
        gauss_relative: traj.worst_gauss_relative(),
        w_weak_pairing,
        e2_plateau,
        eps_e_plateau,
        freq_sol_measured,
        freq_sol_expected,
    })
}

/// The ε-sweep study: runs every member against one e-MHD reference built
/// from the shared ε-free data and assembles monotonicity verdicts.
pub fn convergence_sweep(config: &RunConfig) -> Result<SweepReport> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("no [sweep] section".into()))?;
    if sweep.epsilons.is_empty() {
        return Err(Error::Config("sweep needs at least one epsilon".into()));
    }
    let s = sweep.sobolev_index.unwrap_or(1.0);

    // limit reference from the ε-free data (built at the smallest ε for the
    // preset plumbing; the limit layers and fixed e-field do not depend on ε)
    let eps_ref = Epsilon::new(*sweep.epsilons.last().unwrap())?;
    let data = build_initial(config, eps_ref)?;
    let limit0 = limit_initial_data(&data.limit_layers, &data.b0)?;
    let emhd_dt = sweep.emhd_dt.unwrap_or(config.time.t_end / 400.0);
    let reference = emhd_simulate(limit0, config.time.t_end, emhd_dt, 1e-3)?;

    // corrector reference: d(0) from the fixed oscillation data, evolved
    // against the limit background
    let (irr_e, sol_e, mean_e) = crate::decomposition::helmholtz_decompose(&data.fixed_e);
    let lat = config.lattice()?;
    let mut d_init = CorrectorState::zeros(&lat);
    for c in 0..lat.vcomp() {
        d_init.d0[c] = Complex64::new(0.5 * mean_e[c], 0.0);
    }
    let mut d1 = irr_e.scaled(0.5);
    d1.real = false;
    let mut d2 = sol_e.scaled(0.5);
    d2.real = false;
    d_init.d1 = d1;
    d_init.d2 = d2;
    let correctors_ref = crate::correctors::corrector_evolve(
        d_init,
        &reference,
        config.time.t_end,
        emhd_dt.max(config.time.t_end / 400.0),
    )?;

    // member runs are independent given the shared reference
    use rayon::prelude::*;
    let entries: Vec<SweepEntry> = sweep
        .epsilons
        .par_iter()
        .map(|&epsilon| sweep_member(config, epsilon, &reference, &correctors_ref, s))
        .collect::<Result<_>>()?;

    let rho: Vec<f64> = entries.iter().map(|e| e.err_rho).collect();
    let w: Vec<f64> = entries.iter().map(|e| e.err_w).collect();
    let b: Vec<f64> = entries.iter().map(|e| e.err_b).collect();
    let ee: Vec<f64> = entries.iter().map(|e| e.err_eps_e).collect();
    let cc: Vec<f64> = entries.iter().map(|e| e.err_correctors).collect();
    Ok(SweepReport {
        sobolev_index: s,
        monotone_rho: monotone(&rho),
        monotone_w: monotone(&w),
        monotone_b: monotone(&b),
        monotone_eps_e: monotone(&ee),
        monotone_correctors: monotone(&cc),
        ratios_rho: ratios(&rho),
        ratios_w: ratios(&w),
        ratios_b: ratios(&b),
        ratios_eps_e: ratios(&ee),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_cosine_frequency_recovered() {
        let omega = 17.3;
        let n = 4000;
        let t_end = 8.0 * std::f64::consts::TAU / omega * 1.3;
        let times: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
        let signal: Vec<Complex64> = times
            .iter()
            .map(|&t| Complex64::new((omega * t).cos() + 0.3, 0.0))
            .collect();
        let got = measure_dispersion(&times, &signal, omega, 8.0).unwrap();
        assert!(
            (got - omega).abs() / omega < 1e-3,
            "measured {got}, expected {omega}"
        );
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let omega = 5.0;
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let signal: Vec<Complex64> = times
            .iter()
            .map(|&t| Complex64::new((omega * t).cos(), 0.0))
            .collect();
        assert!(matches!(
            measure_dispersion(&times, &signal, omega, 8.0),
            Err(Error::SignalTooShort { .. })
        ));
    }
}
