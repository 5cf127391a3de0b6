//! Time advancement of the coupled multifluid–Maxwell system.
//!
//! The electromagnetic fields advance by the exact per-mode Duhamel
//! propagators driven by the sampled sources; because the Maxwell side is
//! solved globally from t = 0 (running Filon accumulators), the fields at
//! node times carry no accumulated phase error. The fluid layers advance by
//! classical RK4 whose stages read the propagator fields at the stage times
//! (an earlier frozen-field Strang variant left an O((dt/ε)²) phase error in
//! the fluid response to the resolved 1/ε oscillation, which dominated the
//! Gauss residual; stage-accurate fields push the coupling error to the
//! source-sampling level).
//!
//! The source node at t_{n+1} is obtained by predictor/corrector passes:
//! the fields are advanced with the previous node held constant, the fluid
//! is completed, the source is re-evaluated there, and the pass repeats with
//! the corrected endpoint. The committed history is exactly what the
//! propagators consumed, so a stored trajectory reproduces the run.

use std::sync::Arc;

use crate::decomposition::{complete_initial_data, gauss_residual, EMState, GaussResidual, PropagatorSeeds};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::layers::{fluid_rhs, Epsilon, FluidLayer};
use crate::lattice::Lattice;
use crate::oscillatory::{compute_sources, MaxwellPropagator, Sources};

/// Coefficient magnitude beyond which a run is declared blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// A full system state at one instant.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub t: f64,
    pub layers: Vec<FluidLayer>,
    pub em: EMState,
}

/// One stored trajectory node: full state plus the accumulated G = ∫₀ᵗ E.
#[derive(Debug, Clone)]
pub struct StoredState {
    pub t: f64,
    pub layers: Vec<FluidLayer>,
    pub em: EMState,
    pub g_irr: SpectralField,
    pub g_sol: SpectralField,
    pub g_mean: [f64; 3],
}

impl StoredState {
    /// G as a single vector field (mean folded into k = 0).
    pub fn g_total(&self) -> SpectralField {
        let lat = self.g_irr.lattice().clone();
        let mut g = self.g_irr.add(&self.g_sol);
        let z = lat.zero_mode();
        for c in 0..lat.vcomp() {
            let v = g.coeff(c, z);
            g.set_coeff(
                c,
                z,
                v + num_complex::Complex64::new(self.g_mean[c] * lat.volume(), 0.0),
            );
        }
        g
    }

    /// Shifted momentum w_Θ = ξ_Θ - G of one layer.
    pub fn w_layer(&self, theta: usize) -> SpectralField {
        self.layers[theta].xi.sub(&self.g_total())
    }
}

/// Time-indexed run output: stride-sampled states, the per-node source
/// history, seeds, and constraint diagnostics.
#[derive(Debug)]
pub struct Trajectory {
    pub lattice: Arc<Lattice>,
    pub eps: Epsilon,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<StoredState>,
    pub source_times: Vec<f64>,
    pub g_hist: Vec<SpectralField>,
    pub h_hist: Vec<SpectralField>,
    pub q_hist: Vec<[f64; 3]>,
    pub seeds: PropagatorSeeds,
    pub gauss_history: Vec<(f64, GaussResidual)>,
    pub div_b_max: f64,
    /// Smallest layer density seen at stored nodes (positivity monitor).
    pub min_density: f64,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn num_layers(&self) -> usize {
        self.states.first().map_or(0, |s| s.layers.len())
    }

    /// Worst relative Gauss residual over stored nodes.
    pub fn worst_gauss_relative(&self) -> f64 {
        self.gauss_history
            .iter()
            .map(|(_, g)| g.relative)
            .fold(0.0, f64::max)
    }

    /// Per-mode scalar time series of ĝ(·,k), as (t, value) pairs.
    pub fn g_mode_samples(&self, mode: usize) -> Vec<(f64, num_complex::Complex64)> {
        self.source_times
            .iter()
            .zip(&self.g_hist)
            .map(|(&t, f)| (t, f.coeff(0, mode)))
            .collect()
    }
}

fn check_finite(state: &SystemState) -> Result<()> {
    let bad = |f: &SpectralField| !f.is_finite() || f.max_coeff() > BLOWUP_THRESHOLD;
    for layer in &state.layers {
        if bad(&layer.rho) || bad(&layer.xi) {
            return Err(Error::BlowUp {
                t: state.t,
                what: "fluid layer coefficients",
            });
        }
    }
    if bad(&state.em.e_irr) || bad(&state.em.e_sol) || bad(&state.em.b) {
        return Err(Error::BlowUp {
            t: state.t,
            what: "electromagnetic coefficients",
        });
    }
    Ok(())
}

/// The stepping engine: owns the current state and the Maxwell propagator.
pub struct Simulator {
    pub lattice: Arc<Lattice>,
    pub eps: Epsilon,
    pub dt: f64,
    state: SystemState,
    prop: MaxwellPropagator,
}

impl Simulator {
    /// Build from consistent initial data (checked by `complete_initial_data`).
    pub fn new(
        layers0: Vec<FluidLayer>,
        e0: &SpectralField,
        b0: &SpectralField,
        eps: Epsilon,
        dt: f64,
    ) -> Result<Simulator> {
        if dt <= 0.0 {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        let lattice = layers0
            .first()
            .ok_or_else(|| Error::Config("need at least one layer".into()))?
            .lattice()
            .clone();
        crate::layers::check_weights(&layers0, 1e-12)?;
        let (em, seeds) = complete_initial_data(&layers0, e0, b0, eps)?;
        let first = compute_sources(&layers0, &em, eps)?;
        let prop = MaxwellPropagator::new(&lattice, eps, seeds, first);
        Ok(Simulator {
            lattice,
            eps,
            dt,
            state: SystemState {
                t: 0.0,
                layers: layers0,
                em,
            },
            prop,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn seeds(&self) -> &PropagatorSeeds {
        &self.prop.seeds
    }

    pub fn last_sources(&self) -> &Sources {
        self.prop.last_sources()
    }

    /// Accumulated G(t) parts at the current time.
    pub fn g_parts(&self) -> (SpectralField, SpectralField, [f64; 3]) {
        self.prop.eval_g()
    }

    /// One RK4 pass over [t0, t1] with the electromagnetic fields read from
    /// the propagator at the stage times (pending endpoint source at t1).
    fn fluid_pass(&self, t0: f64, t1: f64, pending: &Sources) -> Result<Vec<FluidLayer>> {
        let h = t1 - t0;
        let em_0 = self.state.em.clone();
        let em_h = self.prop.eval_stage(t0 + 0.5 * h, t1, pending);
        let em_1 = self.prop.eval_stage(t1, t1, pending);
        let e_0 = em_0.total_e();
        let e_h = em_h.total_e();
        let e_1 = em_1.total_e();

        let layers = &self.state.layers;
        let stage = |base: &[FluidLayer],
                     k: &[(SpectralField, SpectralField)],
                     c: f64|
         -> Vec<FluidLayer> {
            base.iter()
                .zip(k)
                .map(|(l, (dr, dx))| {
                    let mut rho = l.rho.clone();
                    rho.axpy(c, dr);
                    let mut xi = l.xi.clone();
                    xi.axpy(c, dx);
                    FluidLayer {
                        weight: l.weight,
                        rho,
                        xi,
                    }
                })
                .collect()
        };
        let eval = |ls: &[FluidLayer], e: &SpectralField, b: &SpectralField| {
            ls.iter()
                .map(|l| fluid_rhs(l, e, b, self.eps))
                .collect::<Result<Vec<_>>>()
        };
        let k1 = eval(layers, &e_0, &em_0.b)?;
        let y2 = stage(layers, &k1, 0.5 * h);
        let k2 = eval(&y2, &e_h, &em_h.b)?;
        let y3 = stage(layers, &k2, 0.5 * h);
        let k3 = eval(&y3, &e_h, &em_h.b)?;
        let y4 = stage(layers, &k3, h);
        let k4 = eval(&y4, &e_1, &em_1.b)?;
        Ok(layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut rho = l.rho.clone();
                let mut xi = l.xi.clone();
                rho.axpy(h / 6.0, &k1[i].0);
                rho.axpy(h / 3.0, &k2[i].0);
                rho.axpy(h / 3.0, &k3[i].0);
                rho.axpy(h / 6.0, &k4[i].0);
                xi.axpy(h / 6.0, &k1[i].1);
                xi.axpy(h / 3.0, &k2[i].1);
                xi.axpy(h / 3.0, &k3[i].1);
                xi.axpy(h / 6.0, &k4[i].1);
                FluidLayer {
                    weight: l.weight,
                    rho,
                    xi,
                }
            })
            .collect())
    }

    /// Advance by one step of `self.dt`.
    pub fn step(&mut self) -> Result<()> {
        let t0 = self.state.t;
        let t1 = t0 + self.dt;

        // predictor: hold the source constant over the new interval, then
        // correct the endpoint twice
        let mut pending = self.prop.last_sources().clone();
        for _ in 0..2 {
            let layers_pass = self.fluid_pass(t0, t1, &pending)?;
            let em_pass = self.prop.eval_with_pending(t1, &pending);
            pending = compute_sources(&layers_pass, &em_pass, self.eps)?;
        }
        let em1 = self.prop.eval_with_pending(t1, &pending);
        let layers1 = self.fluid_pass(t0, t1, &pending)?;

        self.prop.commit(t1, pending);
        self.state = SystemState {
            t: t1,
            layers: layers1,
            em: em1,
        };
        check_finite(&self.state)
    }
}

/// Run configuration for `simulate` (the physics subset; I/O lives in
/// `config`).
#[derive(Debug, Clone)]
pub struct RunParams {
    pub eps: Epsilon,
    pub dt: f64,
    /// Requested horizon T. The run is extended to T + 2πε so the forward
    /// filtering windows exist.
    pub t_end: f64,
    /// Extra horizon beyond t_end; `None` selects the 2πε filter margin.
    pub extra_horizon: Option<f64>,
    /// Store every `stride` steps.
    pub stride: usize,
}

impl RunParams {
    pub fn margin(&self) -> f64 {
        self.extra_horizon
            .unwrap_or(std::f64::consts::TAU * self.eps.get())
    }
}

/// Advance the system over [0, T + margin], recording states every `stride`
/// steps and the sources at every step.
pub fn simulate(
    layers0: Vec<FluidLayer>,
    e0: &SpectralField,
    b0: &SpectralField,
    params: &RunParams,
) -> Result<Trajectory> {
    let mut sim = Simulator::new(layers0, e0, b0, params.eps, params.dt)?;
    let total = params.t_end + params.margin();
    let n_steps = (total / params.dt).ceil() as usize;
    let stride = params.stride.max(1).min(n_steps.max(1));
    // round the step count up to a stride multiple so the stored grid stays
    // uniform (filters and spectral estimators rely on even sampling)
    let n_steps = n_steps.div_ceil(stride) * stride;

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut source_times = vec![0.0];
    let mut g_hist = vec![sim.prop.last_sources().g.clone()];
    let mut h_hist = vec![sim.prop.last_sources().h.clone()];
    let mut q_hist = vec![sim.prop.last_sources().q];
    let mut gauss_history = Vec::new();
    let mut div_b_max = 0.0f64;
    let mut min_density = f64::INFINITY;

    let record = |sim: &Simulator,
                      times: &mut Vec<f64>,
                      states: &mut Vec<StoredState>,
                      gauss_history: &mut Vec<(f64, GaussResidual)>,
                      div_b_max: &mut f64,
                      min_density: &mut f64|
     -> Result<()> {
        let st = sim.state();
        let (g_irr, g_sol, g_mean) = sim.g_parts();
        times.push(st.t);
        let gauss = gauss_residual(&st.em.total_e(), &st.layers, sim.eps)?;
        gauss_history.push((st.t, gauss));
        *div_b_max = div_b_max.max(st.em.div_b_max());
        for layer in &st.layers {
            *min_density = min_density.min(layer.min_density()?);
        }
        states.push(StoredState {
            t: st.t,
            layers: st.layers.clone(),
            em: st.em.clone(),
            g_irr,
            g_sol,
            g_mean,
        });
        Ok(())
    };

    record(
        &sim,
        &mut times,
        &mut states,
        &mut gauss_history,
        &mut div_b_max,
        &mut min_density,
    )?;
    for n in 1..=n_steps {
        sim.step()?;
        source_times.push(sim.state().t);
        g_hist.push(sim.prop.last_sources().g.clone());
        h_hist.push(sim.prop.last_sources().h.clone());
        q_hist.push(sim.prop.last_sources().q);
        if n % stride == 0 || n == n_steps {
            record(
                &sim,
                &mut times,
                &mut states,
                &mut gauss_history,
                &mut div_b_max,
                &mut min_density,
            )?;
        }
    }

    Ok(Trajectory {
        lattice: sim.lattice.clone(),
        eps: sim.eps,
        dt: params.dt,
        times,
        states,
        source_times,
        g_hist,
        h_hist,
        q_hist,
        seeds: sim.prop.seeds.clone(),
        gauss_history,
        div_b_max,
        min_density,
    })
}
