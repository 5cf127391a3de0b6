//! The electron-MHD limit system: the formal ε = 0 reduction where the
//! density locks to the ion background and Ampère's law loses its
//! displacement current.
//!
//! ```text
//!   ∂t ρ_Θ + ∇·(ρ_Θ w_Θ) = 0
//!   ∂t w_Θ + (w_Θ·∇) w_Θ = E + w_Θ ∧ B
//!   Σ μ_Θ ρ_Θ = 1,   ∇·B = 0,   ∇×E = -∂t B,   ∇×B = j
//! ```
//!
//! The system is constrained: E is not prognostic. Differentiating
//! ∇×B = j in time and eliminating ∂t j through the momentum equation
//! (with Σ μ ρ = 1) gives, per mode,
//!
//! ```text
//!   Ê_∥(k) = -Ŝ_∥(k),   Ê_⊥(k) = -Ŝ_⊥(k)/(1+|k|²),   Ê(0) = -Ŝ(0),
//! ```
//!
//! where S = Σ μ[-∇·(ρw)w - ρ(w·∇)w] + j∧B. This closure keeps
//! d/dt(∇×B - j) = 0 up to the quasineutrality drift.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{GridField, Rank, SpectralField};
use crate::filtering::corrector_initial;
use crate::layers::FluidLayer;
use crate::lattice::Lattice;
use std::sync::Arc;

/// State of the limit system: layers carry (ρ_Θ, w_Θ); B is axial.
#[derive(Debug, Clone)]
pub struct EmhdState {
    pub t: f64,
    pub layers: Vec<FluidLayer>,
    pub b: SpectralField,
}

/// Residuals of the e-MHD constraints.
#[derive(Debug, Clone, Copy)]
pub struct EmhdConstraints {
    /// ‖Σ μ ρ - 1‖ (L²)
    pub quasineutrality: f64,
    /// ‖∇×B - j‖ (L²)
    pub ampere: f64,
}

impl EmhdState {
    pub fn lattice(&self) -> Arc<Lattice> {
        self.layers[0].lattice().clone()
    }

    /// Current j = Σ μ_Θ ρ_Θ w_Θ, de-aliased.
    pub fn current(&self) -> Result<SpectralField> {
        let lat = self.lattice();
        let d = lat.vcomp();
        let npts = lat.num_pad_points();
        let mut cur = GridField::zeros(&lat, lat.pad_grid(), d);
        for layer in &self.layers {
            let rv = layer.rho.pad_values()?;
            let wv = layer.xi.pad_values()?;
            for c in 0..d {
                let dst = cur.component_mut(c);
                for p in 0..npts {
                    dst[p] += layer.weight * rv.value(0, p) * wv.value(c, p);
                }
            }
        }
        cur.to_spectral(Rank::Vector)
    }

    pub fn constraints(&self) -> Result<EmhdConstraints> {
        let lat = self.lattice();
        let mut rho_tot = SpectralField::zeros(&lat, Rank::Scalar);
        for layer in &self.layers {
            rho_tot.axpy(layer.weight, &layer.rho);
        }
        let z = lat.zero_mode();
        let v = rho_tot.coeff(0, z);
        rho_tot.set_coeff(0, z, v - Complex64::new(lat.volume(), 0.0));
        let j = self.current()?;
        let resid = self.b.curl_axial().sub(&j);
        Ok(EmhdConstraints {
            quasineutrality: rho_tot.l2_norm(),
            ampere: resid.l2_norm(),
        })
    }
}

/// Diagnose the electric field from the current state (see module docs).
pub fn diagnose_e(state: &EmhdState) -> Result<SpectralField> {
    let lat = state.lattice();
    let d = lat.vcomp();
    let n = lat.num_modes();
    let npts = lat.num_pad_points();

    // S = Σ μ [ -∇·(ρw) w - ρ (w·∇) w ] + j ∧ B, assembled on the pad grid
    let mut s_grid = GridField::zeros(&lat, lat.pad_grid(), d);
    let bv = state.b.pad_values()?;
    let mut j_grid = GridField::zeros(&lat, lat.pad_grid(), d);
    for layer in &state.layers {
        let rv = layer.rho.pad_values()?;
        let wv = layer.xi.pad_values()?;
        // flux divergence ∇·(ρw) evaluated spectrally from the de-aliased flux
        let mut flux = GridField::zeros(&lat, lat.pad_grid(), d);
        for c in 0..d {
            let dst = flux.component_mut(c);
            for p in 0..npts {
                dst[p] = rv.value(0, p) * wv.value(c, p);
            }
        }
        let div_flux = flux.to_spectral(Rank::Vector)?.divergence();
        let div_vals = div_flux.pad_values()?;
        // ∂ax w_c on the pad grid
        let mut dw_vals = Vec::with_capacity(d * d);
        for c in 0..d {
            for ax in 0..d {
                let mut comp = SpectralField::zeros(&lat, Rank::Scalar);
                comp.component_mut(0)
                    .copy_from_slice(layer.xi.derivative(ax).component(c));
                dw_vals.push(comp.pad_values()?);
            }
        }
        for p in 0..npts {
            for c in 0..d {
                let mut adv = 0.0;
                for ax in 0..d {
                    adv += wv.value(ax, p) * dw_vals[c * d + ax].value(0, p);
                }
                s_grid.component_mut(c)[p] += layer.weight
                    * (-div_vals.value(0, p) * wv.value(c, p) - rv.value(0, p) * adv);
                j_grid.component_mut(c)[p] += layer.weight * rv.value(0, p) * wv.value(c, p);
            }
        }
    }
    // + j ∧ B
    match lat.dim() {
        1 => {}
        2 => {
            for p in 0..npts {
                let b = bv.value(0, p);
                let j0 = j_grid.value(0, p);
                let j1 = j_grid.value(1, p);
                s_grid.component_mut(0)[p] += j1 * b;
                s_grid.component_mut(1)[p] -= j0 * b;
            }
        }
        3 => {
            for p in 0..npts {
                let j = [j_grid.value(0, p), j_grid.value(1, p), j_grid.value(2, p)];
                let b = [bv.value(0, p), bv.value(1, p), bv.value(2, p)];
                s_grid.component_mut(0)[p] += j[1] * b[2] - j[2] * b[1];
                s_grid.component_mut(1)[p] += j[2] * b[0] - j[0] * b[2];
                s_grid.component_mut(2)[p] += j[0] * b[1] - j[1] * b[0];
            }
        }
        _ => unreachable!(),
    }
    let s = s_grid.to_spectral(Rank::Vector)?;

    // invert (Δ - ∇∇· - 1) per mode
    let mut e = SpectralField::zeros(&lat, Rank::Vector);
    let z = lat.zero_mode();
    for i in 0..n {
        if i == z {
            for c in 0..d {
                e.set_coeff(c, i, -s.coeff(c, i));
            }
            continue;
        }
        let k = lat.mode(i);
        let ksq = lat.mode_norm_sq(i);
        let mut kdot = Complex64::new(0.0, 0.0);
        for c in 0..d {
            kdot += Complex64::new(k[c] as f64, 0.0) * s.coeff(c, i);
        }
        for c in 0..d {
            let s_par = kdot * (k[c] as f64 / ksq);
            let s_perp = s.coeff(c, i) - s_par;
            e.set_coeff(c, i, -s_par - s_perp / (1.0 + ksq));
        }
    }
    Ok(e)
}

/// Time derivatives of (ρ_Θ, w_Θ, B) with E diagnosed internally.
pub fn emhd_rhs(
    state: &EmhdState,
) -> Result<(Vec<(SpectralField, SpectralField)>, SpectralField)> {
    let lat = state.lattice();
    let d = lat.vcomp();
    let npts = lat.num_pad_points();
    let e = diagnose_e(state)?;
    let bv = state.b.pad_values()?;
    let mut out = Vec::with_capacity(state.layers.len());
    for layer in &state.layers {
        let rv = layer.rho.pad_values()?;
        let wv = layer.xi.pad_values()?;
        let mut flux = GridField::zeros(&lat, lat.pad_grid(), d);
        let mut mom = GridField::zeros(&lat, lat.pad_grid(), d);
        let mut dw_vals = Vec::with_capacity(d * d);
        for c in 0..d {
            for ax in 0..d {
                let mut comp = SpectralField::zeros(&lat, Rank::Scalar);
                comp.component_mut(0)
                    .copy_from_slice(layer.xi.derivative(ax).component(c));
                dw_vals.push(comp.pad_values()?);
            }
        }
        for p in 0..npts {
            for c in 0..d {
                flux.component_mut(c)[p] = rv.value(0, p) * wv.value(c, p);
                let mut adv = 0.0;
                for ax in 0..d {
                    adv += wv.value(ax, p) * dw_vals[c * d + ax].value(0, p);
                }
                mom.component_mut(c)[p] = -adv;
            }
            match lat.dim() {
                1 => {}
                2 => {
                    let b = bv.value(0, p);
                    mom.component_mut(0)[p] += wv.value(1, p) * b;
                    mom.component_mut(1)[p] -= wv.value(0, p) * b;
                }
                3 => {
                    let w3 = [wv.value(0, p), wv.value(1, p), wv.value(2, p)];
                    let b3 = [bv.value(0, p), bv.value(1, p), bv.value(2, p)];
                    mom.component_mut(0)[p] += w3[1] * b3[2] - w3[2] * b3[1];
                    mom.component_mut(1)[p] += w3[2] * b3[0] - w3[0] * b3[2];
                    mom.component_mut(2)[p] += w3[0] * b3[1] - w3[1] * b3[0];
                }
                _ => unreachable!(),
            }
        }
        let drho = flux.to_spectral(Rank::Vector)?.divergence().scaled(-1.0);
        let mut dw = mom.to_spectral(Rank::Vector)?;
        dw.add_assign(&e);
        out.push((drho, dw));
    }
    let db = e.curl().scaled(-1.0);
    Ok((out, db))
}

fn rk4_step(state: &EmhdState, h: f64) -> Result<EmhdState> {
    let apply = |s: &EmhdState, k: &(Vec<(SpectralField, SpectralField)>, SpectralField), c: f64| {
        let mut layers = s.layers.clone();
        for (l, (dr, dw)) in layers.iter_mut().zip(&k.0) {
            l.rho.axpy(c, dr);
            l.xi.axpy(c, dw);
        }
        let mut b = s.b.clone();
        b.axpy(c, &k.1);
        EmhdState {
            t: s.t + c,
            layers,
            b,
        }
    };
    let k1 = emhd_rhs(state)?;
    let y2 = apply(state, &k1, 0.5 * h);
    let k2 = emhd_rhs(&y2)?;
    let y3 = apply(state, &k2, 0.5 * h);
    let k3 = emhd_rhs(&y3)?;
    let y4 = apply(state, &k3, h);
    let k4 = emhd_rhs(&y4)?;
    let mut layers = state.layers.clone();
    for (i, l) in layers.iter_mut().enumerate() {
        l.rho.axpy(h / 6.0, &k1.0[i].0);
        l.rho.axpy(h / 3.0, &k2.0[i].0);
        l.rho.axpy(h / 3.0, &k3.0[i].0);
        l.rho.axpy(h / 6.0, &k4.0[i].0);
        l.xi.axpy(h / 6.0, &k1.0[i].1);
        l.xi.axpy(h / 3.0, &k2.0[i].1);
        l.xi.axpy(h / 3.0, &k3.0[i].1);
        l.xi.axpy(h / 6.0, &k4.0[i].1);
    }
    let mut b = state.b.clone();
    b.axpy(h / 6.0, &k1.1);
    b.axpy(h / 3.0, &k2.1);
    b.axpy(h / 3.0, &k3.1);
    b.axpy(h / 6.0, &k4.1);
    Ok(EmhdState {
        t: state.t + h,
        layers,
        b,
    })
}

/// A stored limit-system run.
#[derive(Debug)]
pub struct EmhdTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<EmhdState>,
    pub worst: EmhdConstraints,
}

impl EmhdTrajectory {
    /// Linear interpolation of (moment field Σμρw, B) at time t, for use as
    /// corrector-equation background.
    pub fn background_at(&self, t: f64) -> Result<(SpectralField, SpectralField)> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return Ok((self.states[0].current()?, self.states[0].b.clone()));
        }
        if t >= self.times[n - 1] {
            let s = &self.states[n - 1];
            return Ok((s.current()?, s.b.clone()));
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.times[mid] <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = (t - self.times[lo]) / (self.times[lo + 1] - self.times[lo]);
        let j0 = self.states[lo].current()?;
        let j1 = self.states[lo + 1].current()?;
        let mut j = j0.scaled(1.0 - lam);
        j.axpy(lam, &j1);
        let mut b = self.states[lo].b.scaled(1.0 - lam);
        b.axpy(lam, &self.states[lo + 1].b);
        Ok((j, b))
    }
}

/// Default relative tolerance for constraint drift before a run aborts.
pub const CONSTRAINT_DRIFT_TOL: f64 = 1e-4;

/// March the limit system with classical RK4, monitoring the constraints.
pub fn emhd_simulate(
    initial: EmhdState,
    t_end: f64,
    dt: f64,
    drift_tol: f64,
) -> Result<EmhdTrajectory> {
    let c0 = initial.constraints()?;
    let scale = initial
        .current()?
        .l2_norm()
        .max(initial.b.l2_norm())
        .max(1.0);
    if c0.quasineutrality > drift_tol * scale || c0.ampere > drift_tol * scale {
        return Err(Error::ConstraintViolation {
            t: 0.0,
            what: "e-MHD constraints at t = 0",
            value: c0.quasineutrality.max(c0.ampere),
            tol: drift_tol * scale,
        });
    }
    let n_steps = if t_end == 0.0 {
        0
    } else {
        (t_end.abs() / dt.abs()).ceil() as usize
    };
    let h = if n_steps == 0 { dt } else { t_end / n_steps as f64 };
    let mut times = vec![initial.t];
    let mut states = vec![initial];
    let mut worst = c0;
    for _ in 0..n_steps {
        let next = rk4_step(states.last().unwrap(), h)?;
        let c = next.constraints()?;
        worst.quasineutrality = worst.quasineutrality.max(c.quasineutrality);
        worst.ampere = worst.ampere.max(c.ampere);
        if c.quasineutrality > drift_tol * scale || c.ampere > drift_tol * scale {
            return Err(Error::ConstraintViolation {
                t: next.t,
                what: "e-MHD constraint drift",
                value: c.quasineutrality.max(c.ampere),
                tol: drift_tol * scale,
            });
        }
        times.push(next.t);
        states.push(next);
    }
    Ok(EmhdTrajectory {
        times,
        states,
        worst,
    })
}

/// Build the limit initial data from ε → 0 data per the limit statement:
/// w_Θ(0) = ξ_Θ(0) - W(0), B(0) = B₀ + ∇×W(0), with W(0) the closed-form
/// initial corrector of (j₀, B₀) and j₀ = Σ μ ρ_Θ(0) ξ_Θ(0).
pub fn limit_initial_data(layers0: &[FluidLayer], b0: &SpectralField) -> Result<EmhdState> {
    let lat = layers0[0].lattice().clone();
    let d = lat.vcomp();
    let npts = lat.num_pad_points();
    // non-relativistic current (the ε → 0 limit of the moments)
    let mut cur = GridField::zeros(&lat, lat.pad_grid(), d);
    for layer in layers0 {
        let rv = layer.rho.pad_values()?;
        let xv = layer.xi.pad_values()?;
        for c in 0..d {
            let dst = cur.component_mut(c);
            for p in 0..npts {
                dst[p] += layer.weight * rv.value(0, p) * xv.value(c, p);
            }
        }
    }
    let j0 = cur.to_spectral(Rank::Vector)?;
    let w0 = corrector_initial(&j0, b0);
    let layers = layers0
        .iter()
        .map(|l| FluidLayer {
            weight: l.weight,
            rho: l.rho.clone(),
            xi: l.xi.sub(&w0),
        })
        .collect();
    let mut b = b0.clone();
    b.add_assign(&w0.curl());
    Ok(EmhdState { t: 0.0, layers, b })
}

/// The limit statement's initial electric field
/// E(0) = -(W₀·∇)W₀ - W₀ ∧ (∇×W₀) (diagnostic only; the marching scheme
/// diagnoses E from the closure).
pub fn theorem_initial_e(w0: &SpectralField) -> Result<SpectralField> {
    let lat = w0.lattice().clone();
    let d = lat.vcomp();
    let npts = lat.num_pad_points();
    let wv = w0.pad_values()?;
    let curl_w = w0.curl();
    let cv = curl_w.pad_values()?;
    let mut dw_vals = Vec::with_capacity(d * d);
    for c in 0..d {
        for ax in 0..d {
            let mut comp = SpectralField::zeros(&lat, Rank::Scalar);
            comp.component_mut(0).copy_from_slice(w0.derivative(ax).component(c));
            dw_vals.push(comp.pad_values()?);
        }
    }
    let mut out = GridField::zeros(&lat, lat.pad_grid(), d);
    for p in 0..npts {
        for c in 0..d {
            let mut adv = 0.0;
            for ax in 0..d {
                adv += wv.value(ax, p) * dw_vals[c * d + ax].value(0, p);
            }
            out.component_mut(c)[p] = -adv;
        }
        match lat.dim() {
            1 => {}
            2 => {
                let cz = cv.value(0, p);
                out.component_mut(0)[p] -= wv.value(1, p) * cz;
                out.component_mut(1)[p] += wv.value(0, p) * cz;
            }
            3 => {
                let w3 = [wv.value(0, p), wv.value(1, p), wv.value(2, p)];
                let c3 = [cv.value(0, p), cv.value(1, p), cv.value(2, p)];
                out.component_mut(0)[p] -= w3[1] * c3[2] - w3[2] * c3[1];
                out.component_mut(1)[p] -= w3[2] * c3[0] - w3[0] * c3[2];
                out.component_mut(2)[p] -= w3[0] * c3[1] - w3[1] * c3[0];
            }
            _ => unreachable!(),
        }
    }
    out.to_spectral(Rank::Vector)
}
