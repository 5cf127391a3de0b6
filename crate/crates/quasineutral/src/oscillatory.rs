//! Exact per-mode solution of the three stiff wave equations.
//!
//! In the quasineutral scaling the parts of the electric field obey forced
//! oscillators per Fourier mode:
//!
//! ```text
//!   (ε²∂tt + 1)        ik·Ê_irr(t,k) = ĝ(t,k)        (k ≠ 0, Langmuir)
//!   (ε²∂tt + 1+|k|²)   ik∧Ê_sol(t,k) = ĥ(t,k)        (k ≠ 0, Klein-Gordon)
//!   (ε²∂tt + 1)        E_mean(t)     = q(t)           (k = 0)
//! ```
//!
//! Their Duhamel solutions are evaluated exactly against a piecewise-linear
//! reconstruction of the sampled sources (Filon quadrature: sin/cos moments
//! integrated in closed form per sub-interval). A naive rule would need
//! dt ≪ ε² because the kernels oscillate at Ω = ω(k)/ε; the Filon rule only
//! needs the sources resolved.

use num_complex::Complex64;

use crate::decomposition::{EMState, PropagatorSeeds};
use crate::error::{Error, Result};
use crate::field::{GridField, Rank, SpectralField};
use crate::layers::{relativistic_velocity, velocity_remainder_jacobian, Epsilon, FluidLayer};
use crate::lattice::Lattice;
use std::sync::Arc;

/// Natural frequency ω(k) of a mode: 1 for the irrotational/mean oscillators,
/// √(1+|k|²) for the solenoidal one. The stiff frequency is ω(k)/ε.
#[derive(Debug, Clone, Copy)]
pub struct ModeOscillator {
    pub omega: f64,
    pub eps: f64,
}

impl ModeOscillator {
    pub fn irrotational(eps: Epsilon) -> ModeOscillator {
        ModeOscillator {
            omega: 1.0,
            eps: eps.get(),
        }
    }

    pub fn solenoidal(ksq: f64, eps: Epsilon) -> ModeOscillator {
        ModeOscillator {
            omega: (1.0 + ksq).sqrt(),
            eps: eps.get(),
        }
    }

    pub fn stiff_freq(&self) -> f64 {
        self.omega / self.eps
    }

    /// ε²|u'|² + ω²|u|², conserved exactly by the homogeneous propagator.
    pub fn homogeneous_energy(&self, u: Complex64, du: Complex64) -> f64 {
        self.eps * self.eps * du.norm_sqr() + self.omega * self.omega * u.norm_sqr()
    }
}

/// Running Filon moments of a piecewise-linear complex signal f:
///   C = ∫ cos(Ωs) f(s) ds,  S = ∫ sin(Ωs) f(s) ds,  P = ∫ f(s) ds
/// accumulated over committed intervals.
#[derive(Debug, Clone)]
pub struct FilonAccumulator {
    pub omega_stiff: f64,
    pub t: f64,
    c: Complex64,
    s: Complex64,
    p: Complex64,
}

impl FilonAccumulator {
    pub fn new(omega_stiff: f64) -> FilonAccumulator {
        FilonAccumulator {
            omega_stiff,
            t: 0.0,
            c: Complex64::new(0.0, 0.0),
            s: Complex64::new(0.0, 0.0),
            p: Complex64::new(0.0, 0.0),
        }
    }

    /// Append the interval [t0, t1] with endpoint values f0, f1 (linear in
    /// between). Moments of the linear interpolant are integrated exactly.
    pub fn extend(&mut self, t0: f64, f0: Complex64, t1: f64, f1: Complex64) {
        debug_assert!((t0 - self.t).abs() < 1e-12 * t1.abs().max(1.0));
        let h = t1 - t0;
        if h <= 0.0 {
            return;
        }
        let om = self.omega_stiff;
        let (s0, c0) = (om * t0).sin_cos();
        let (s1, c1) = (om * t1).sin_cos();
        // ∫ cos(Ωs) ds and ∫ sin(Ωs) ds over [t0, t1]
        let a0c = (s1 - s0) / om;
        let a0s = (c0 - c1) / om;
        // ∫ (s-t0) cos(Ωs) ds and ∫ (s-t0) sin(Ωs) ds
        let a1c = h * s1 / om - a0s / om;
        let a1s = -h * c1 / om + a0c / om;
        let slope = (f1 - f0) / h;
        self.c += f0 * a0c + slope * a1c;
        self.s += f0 * a0s + slope * a1s;
        self.p += (f0 + f1) * (0.5 * h);
        self.t = t1;
    }

    /// ∫₀ᵗ sin(Ω(t-s)) f(s) ds at the committed time t.
    pub fn sin_kernel(&self) -> Complex64 {
        let (st, ct) = (self.omega_stiff * self.t).sin_cos();
        self.c * st - self.s * ct
    }

    /// ∫₀ᵗ cos(Ω(t-s)) f(s) ds.
    pub fn cos_kernel(&self) -> Complex64 {
        let (st, ct) = (self.omega_stiff * self.t).sin_cos();
        self.c * ct + self.s * st
    }

    /// ∫₀ᵗ (1 - cos(Ω(t-s))) f(s) ds.
    pub fn one_minus_cos_kernel(&self) -> Complex64 {
        self.p - self.cos_kernel()
    }

    /// Plain ∫₀ᵗ f(s) ds of the linear reconstruction.
    pub fn plain(&self) -> Complex64 {
        self.p
    }
}

/// Running Filon moments against e^{-iΩs} (used by corrector extraction):
/// E = ∫ e^{-iΩs} f(s) ds for piecewise-linear f. Negative Ω is allowed.
#[derive(Debug, Clone)]
pub struct ExpAccumulator {
    pub omega_stiff: f64,
    pub t: f64,
    e: Complex64,
}

impl ExpAccumulator {
    pub fn new(omega_stiff: f64) -> ExpAccumulator {
        ExpAccumulator {
            omega_stiff,
            t: 0.0,
            e: Complex64::new(0.0, 0.0),
        }
    }

    pub fn extend(&mut self, t0: f64, f0: Complex64, t1: f64, f1: Complex64) {
        let h = t1 - t0;
        if h <= 0.0 {
            return;
        }
        let om = self.omega_stiff;
        let phase = |t: f64| Complex64::new(0.0, -om * t).exp();
        if om.abs() * h < 1e-8 {
            // near-degenerate kernel: trapezoid is exact enough here
            self.e += (f0 * phase(t0) + f1 * phase(t1)) * (0.5 * h);
        } else {
            let iom = Complex64::new(0.0, -om);
            // ∫ e^{-iΩs} ds and ∫ (s-t0) e^{-iΩs} ds in closed form
            let m0 = (phase(t1) - phase(t0)) / iom;
            let m1 = (h * phase(t1)) / iom - m0 / iom;
            let slope = (f1 - f0) / h;
            self.e += f0 * m0 + slope * m1;
        }
        self.t = t1;
    }

    pub fn value(&self) -> Complex64 {
        self.e
    }
}

/// A sampled scalar source history for one mode.
pub type ModeSamples<'a> = &'a [(f64, Complex64)];

fn accumulate_to(osc: &ModeOscillator, samples: ModeSamples, t: f64) -> Result<FilonAccumulator> {
    if samples.is_empty() || samples[0].0 > 0.0 {
        return Err(Error::OutsideHistory {
            t,
            t0: samples.first().map_or(0.0, |s| s.0),
            t1: samples.last().map_or(0.0, |s| s.0),
        });
    }
    let t_last = samples.last().unwrap().0;
    if t > t_last + 1e-12 {
        return Err(Error::OutsideHistory {
            t,
            t0: samples[0].0,
            t1: t_last,
        });
    }
    let mut acc = FilonAccumulator::new(osc.stiff_freq());
    for w in samples.windows(2) {
        let (t0, f0) = w[0];
        let (t1, f1) = w[1];
        if t1 <= t {
            acc.extend(t0, f0, t1, f1);
        } else {
            if t > t0 {
                // clip the last interval at t with linear interpolation
                let lam = (t - t0) / (t1 - t0);
                let ft = f0 + (f1 - f0) * lam;
                acc.extend(t0, f0, t, ft);
            }
            break;
        }
    }
    Ok(acc)
}

/// Langmuir propagator for one irrotational mode k ≠ 0:
/// Ê_irr(t,k) = -(ik/(ε|k|²)) ∫₀ᵗ sin((t-s)/ε) ĝ(s,k) ds
///              + Ê_irr(0,k) cos(t/ε) + ε ∂tÊ_irr(0,k) sin(t/ε).
pub fn propagate_irr(
    k: [i64; 3],
    eps: Epsilon,
    g_samples: ModeSamples,
    e0: [Complex64; 3],
    dte0: [Complex64; 3],
    t: f64,
) -> Result<[Complex64; 3]> {
    let ksq = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    assert!(ksq > 0.0, "irrotational propagator needs k != 0");
    let osc = ModeOscillator::irrotational(eps);
    let acc = accumulate_to(&osc, g_samples, t)?;
    let duh = acc.sin_kernel();
    let e = eps.get();
    let (st, ct) = (t / e).sin_cos();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for c in 0..3 {
        let ikc = Complex64::new(0.0, k[c] as f64);
        out[c] = -ikc / (e * ksq) * duh + e0[c] * ct + dte0[c] * (e * st);
    }
    Ok(out)
}

/// Klein–Gordon propagator for one solenoidal mode k ≠ 0; `h_samples` holds
/// the axial source components of ĥ(·,k).
pub fn propagate_sol(
    k: [i64; 3],
    dim: usize,
    eps: Epsilon,
    h_samples: &[Vec<(f64, Complex64)>],
    e0: [Complex64; 3],
    dte0: [Complex64; 3],
    t: f64,
) -> Result<[Complex64; 3]> {
    let ksq = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    assert!(ksq > 0.0, "solenoidal propagator needs k != 0");
    let osc = ModeOscillator::solenoidal(ksq, eps);
    let om = osc.omega;
    let e = eps.get();
    let mut duh = [Complex64::new(0.0, 0.0); 3];
    for (c, samples) in h_samples.iter().enumerate() {
        let acc = accumulate_to(&osc, samples, t)?;
        duh[c] = acc.sin_kernel();
    }
    let ikxh = wedge_k_axial(k, dim, &duh);
    let (st, ct) = (om * t / e).sin_cos();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for c in 0..3 {
        out[c] = ikxh[c] * Complex64::new(0.0, 1.0) / (e * ksq * om) + e0[c] * ct + dte0[c] * (e / om * st);
    }
    Ok(out)
}

/// Mean-field oscillator: E_mean(t) = (1/ε)∫ sin((t-s)/ε) q(s) ds + hom.
pub fn propagate_mean(
    eps: Epsilon,
    q_samples: &[Vec<(f64, Complex64)>],
    e0: [f64; 3],
    dte0: [f64; 3],
    t: f64,
) -> Result<[f64; 3]> {
    let osc = ModeOscillator::irrotational(eps);
    let e = eps.get();
    let (st, ct) = (t / e).sin_cos();
    let mut out = [0.0; 3];
    for (c, samples) in q_samples.iter().enumerate() {
        let acc = accumulate_to(&osc, samples, t)?;
        out[c] = acc.sin_kernel().re / e + e0[c] * ct + dte0[c] * e * st;
    }
    Ok(out)
}

/// k ∧ a for an axial value a, producing a vector (canonical embedding).
pub(crate) fn wedge_k_axial(k: [i64; 3], dim: usize, a: &[Complex64; 3]) -> [Complex64; 3] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    match dim {
        1 => [Complex64::new(0.0, 0.0); 3],
        2 => [kf[1] * a[0], -(kf[0] * a[0]), Complex64::new(0.0, 0.0)],
        3 => [
            kf[1] * a[2] - kf[2] * a[1],
            kf[2] * a[0] - kf[0] * a[2],
            kf[0] * a[1] - kf[1] * a[0],
        ],
        _ => unreachable!(),
    }
}

/// The wave-equation sources at one time instant.
#[derive(Debug, Clone)]
pub struct Sources {
    /// ĝ: scalar source of the Langmuir equation.
    pub g: SpectralField,
    /// ĥ: axial source of the Klein–Gordon equation.
    pub h: SpectralField,
    /// q: d-vector source of the mean-field oscillator.
    pub q: [f64; 3],
}

/// The relativistic remainder Rᵋ = Σ μ_Θ ρ_Θ λ(ξ_Θ)(E + v(ξ_Θ) ∧ B),
/// evaluated pointwise on the padded grid and truncated.
pub fn remainder_r(
    layers: &[FluidLayer],
    em: &EMState,
    eps: Epsilon,
) -> Result<SpectralField> {
    let e_tot = em.total_e();
    let ev = e_tot.pad_values()?;
    let bv = em.b.pad_values()?;
    remainder_r_from_values(layers, &ev, &bv, eps)?.to_spectral(Rank::Vector)
}

fn remainder_r_from_values(
    layers: &[FluidLayer],
    ev: &GridField,
    bv: &GridField,
    eps: Epsilon,
) -> Result<GridField> {
    let lat = layers[0].lattice().clone();
    let d = lat.vcomp();
    let npts = lat.num_pad_points();
    let mut out = GridField::zeros(&lat, lat.pad_grid(), d);
    for layer in layers {
        let rv = layer.rho.pad_values()?;
        let xv = layer.xi.pad_values()?;
        let vel = relativistic_velocity(&xv, eps);
        for p in 0..npts {
            let mut xi_p = [0.0f64; 3];
            let mut force = [0.0f64; 3];
            for c in 0..d {
                xi_p[c] = xv.value(c, p);
                force[c] = ev.value(c, p);
            }
            // v ∧ B with the canonical embedding
            match lat.dim() {
                1 => {}
                2 => {
                    let b = bv.value(0, p);
                    force[0] += vel.value(1, p) * b;
                    force[1] -= vel.value(0, p) * b;
                }
                3 => {
                    let v = [vel.value(0, p), vel.value(1, p), vel.value(2, p)];
                    let b = [bv.value(0, p), bv.value(1, p), bv.value(2, p)];
                    force[0] += v[1] * b[2] - v[2] * b[1];
                    force[1] += v[2] * b[0] - v[0] * b[2];
                    force[2] += v[0] * b[1] - v[1] * b[0];
                }
                _ => unreachable!(),
            }
            let lam = velocity_remainder_jacobian(&xi_p[..d], eps);
            let w = layer.weight * rv.value(0, p);
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += lam[i * d + j] * force[j];
                }
                out.component_mut(i)[p] += w * acc;
            }
        }
    }
    Ok(out)
}

/// All three sources (and shared intermediates) for one full system state.
pub fn compute_sources(layers: &[FluidLayer], em: &EMState, eps: Epsilon) -> Result<Sources> {
    let lat = layers[0].lattice().clone();
    let d = lat.vcomp();
    let npts = lat.num_pad_points();
    let vol = lat.volume();

    // moment tensor P_ij = Σ μ ρ v_i v_j on the padded grid
    let mut pten = vec![0.0f64; d * d * npts];
    let mut cur = GridField::zeros(&lat, lat.pad_grid(), d);
    for layer in layers {
        let rv = layer.rho.pad_values()?;
        let xv = layer.xi.pad_values()?;
        let vel = relativistic_velocity(&xv, eps);
        for p in 0..npts {
            let w = layer.weight * rv.value(0, p);
            for i in 0..d {
                let vi = vel.value(i, p);
                cur.component_mut(i)[p] += w * vi;
                for j in i..d {
                    pten[(i * d + j) * npts + p] += w * vi * vel.value(j, p);
                }
            }
        }
    }
    // mirror the symmetric lower triangle
    for i in 0..d {
        for j in 0..i {
            let (src, dst) = ((j * d + i) * npts, (i * d + j) * npts);
            for p in 0..npts {
                pten[dst + p] = pten[src + p];
            }
        }
    }

    // term 1: ∂i∂j P_ij (scalar) and curl(∂i P_i·) (axial)
    let mut t1g = SpectralField::zeros(&lat, Rank::Scalar);
    let mut u = SpectralField::zeros(&lat, Rank::Vector); // u_j = ∂i P_ij
    for i in 0..d {
        for j in 0..d {
            let gf = GridField {
                lattice: lat.clone(),
                grid: lat.pad_grid(),
                ncomp: 1,
                data: pten[(i * d + j) * npts..(i * d + j + 1) * npts].to_vec(),
            };
            let pij = gf.to_spectral(Rank::Scalar)?;
            let dpij = pij.derivative(i);
            t1g.add_assign(&dpij.derivative(j));
            for (a, b) in u.component_mut(j).iter_mut().zip(dpij.component(0)) {
                *a += b;
            }
        }
    }
    let t1h = u.curl();

    // term 2: E ∇·E_irr
    let e_tot = em.total_e();
    let ev = e_tot.pad_values()?;
    let div_irr = em.e_irr.divergence();
    let sv = div_irr.pad_values()?;
    let mut f1 = GridField::zeros(&lat, lat.pad_grid(), d);
    for c in 0..d {
        let dst = f1.component_mut(c);
        for p in 0..npts {
            dst[p] = ev.value(c, p) * sv.value(0, p);
        }
    }
    let f1s = f1.to_spectral(Rank::Vector)?;

    // term 3: j ∧ B
    let bv = em.b.pad_values()?;
    let mut f2 = GridField::zeros(&lat, lat.pad_grid(), d);
    match lat.dim() {
        1 => {}
        2 => {
            for p in 0..npts {
                let b = bv.value(0, p);
                f2.component_mut(0)[p] = cur.value(1, p) * b;
                f2.component_mut(1)[p] = -cur.value(0, p) * b;
            }
        }
        3 => {
            for p in 0..npts {
                let jv = [cur.value(0, p), cur.value(1, p), cur.value(2, p)];
                let b = [bv.value(0, p), bv.value(1, p), bv.value(2, p)];
                f2.component_mut(0)[p] = jv[1] * b[2] - jv[2] * b[1];
                f2.component_mut(1)[p] = jv[2] * b[0] - jv[0] * b[2];
                f2.component_mut(2)[p] = jv[0] * b[1] - jv[1] * b[0];
            }
        }
        _ => unreachable!(),
    }
    let f2s = f2.to_spectral(Rank::Vector)?;

    // term 4: relativistic remainder
    let f3s = remainder_r_from_values(layers, &ev, &bv, eps)?.to_spectral(Rank::Vector)?;

    let e2 = eps.get() * eps.get();
    let mut g = t1g;
    g.axpy(-e2, &f1s.divergence());
    g.axpy(-1.0, &f2s.divergence());
    g.axpy(-1.0, &f3s.divergence());

    let mut h = t1h;
    h.axpy(-e2, &f1s.curl());
    h.axpy(-1.0, &f2s.curl());
    h.axpy(-1.0, &f3s.curl());

    let z = lat.zero_mode();
    let mut q = [0.0; 3];
    for c in 0..d {
        q[c] = (e2 * f1s.coeff(c, z).re - f2s.coeff(c, z).re - f3s.coeff(c, z).re) / vol;
    }

    Ok(Sources { g, h, q })
}

/// ĝ alone (see `compute_sources` for the shared-path version).
pub fn source_g(layers: &[FluidLayer], em: &EMState, eps: Epsilon) -> Result<SpectralField> {
    Ok(compute_sources(layers, em, eps)?.g)
}

/// ĥ alone.
pub fn source_h(layers: &[FluidLayer], em: &EMState, eps: Epsilon) -> Result<SpectralField> {
    Ok(compute_sources(layers, em, eps)?.h)
}

/// q alone.
pub fn source_q(layers: &[FluidLayer], em: &EMState, eps: Epsilon) -> Result<[f64; 3]> {
    Ok(compute_sources(layers, em, eps)?.q)
}

/// Global exact-in-time Maxwell solver: per-mode Filon accumulators over the
/// committed source history, seeded at t = 0. `eval_*` reconstructs the full
/// electromagnetic state, including B via the Faraday integral.
pub struct MaxwellPropagator {
    lattice: Arc<Lattice>,
    eps: Epsilon,
    pub seeds: PropagatorSeeds,
    t: f64,
    /// committed node values, the left endpoint of the next interval
    last: Sources,
    irr_acc: Vec<FilonAccumulator>,
    sol_acc: Vec<FilonAccumulator>,
    mean_acc: Vec<FilonAccumulator>,
}

impl MaxwellPropagator {
    /// `first` must be the sources evaluated on the initial state.
    pub fn new(
        lattice: &Arc<Lattice>,
        eps: Epsilon,
        seeds: PropagatorSeeds,
        first: Sources,
    ) -> MaxwellPropagator {
        let n = lattice.num_modes();
        let ac = lattice.acomp();
        let mut irr_acc = Vec::with_capacity(n);
        let mut sol_acc = Vec::with_capacity(n * ac);
        for i in 0..n {
            let ksq = lattice.mode_norm_sq(i);
            irr_acc.push(FilonAccumulator::new(1.0 / eps.get()));
            let om = (1.0 + ksq).sqrt() / eps.get();
            for _ in 0..ac {
                sol_acc.push(FilonAccumulator::new(om));
            }
        }
        let mean_acc = vec![FilonAccumulator::new(1.0 / eps.get()); lattice.vcomp()];
        MaxwellPropagator {
            lattice: lattice.clone(),
            eps,
            seeds,
            t: 0.0,
            last: first,
            irr_acc,
            sol_acc,
            mean_acc,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn last_sources(&self) -> &Sources {
        &self.last
    }

    /// Commit the source node at `t1`, extending every accumulator.
    pub fn commit(&mut self, t1: f64, next: Sources) {
        let n = self.lattice.num_modes();
        let ac = self.lattice.acomp();
        for i in 0..n {
            self.irr_acc[i].extend(self.t, self.last.g.coeff(0, i), t1, next.g.coeff(0, i));
            for c in 0..ac {
                self.sol_acc[i * ac + c].extend(
                    self.t,
                    self.last.h.coeff(c, i),
                    t1,
                    next.h.coeff(c, i),
                );
            }
        }
        for c in 0..self.lattice.vcomp() {
            self.mean_acc[c].extend(
                self.t,
                Complex64::new(self.last.q[c], 0.0),
                t1,
                Complex64::new(next.q[c], 0.0),
            );
        }
        self.t = t1;
        self.last = next;
    }

    /// State at the committed time.
    pub fn eval(&self) -> EMState {
        self.eval_inner(self.t, None)
    }

    /// State at `t1 > t` with a provisional endpoint source (not committed).
    pub fn eval_with_pending(&self, t1: f64, pending: &Sources) -> EMState {
        self.eval_inner(t1, Some(pending))
    }

    /// State at an intermediate time t ∈ (committed, t1], with the pending
    /// endpoint source at t1; the source is interpolated linearly on the
    /// pending interval, consistent with the rule `commit` will apply.
    pub fn eval_stage(&self, t: f64, t1: f64, pending: &Sources) -> EMState {
        if t <= self.t + 1e-15 {
            return self.eval();
        }
        if (t - t1).abs() < 1e-15 {
            return self.eval_inner(t1, Some(pending));
        }
        let lam = (t - self.t) / (t1 - self.t);
        let mut g = self.last.g.scaled(1.0 - lam);
        g.axpy(lam, &pending.g);
        let mut h = self.last.h.scaled(1.0 - lam);
        h.axpy(lam, &pending.h);
        let mut q = [0.0; 3];
        for c in 0..3 {
            q[c] = (1.0 - lam) * self.last.q[c] + lam * pending.q[c];
        }
        self.eval_inner(t, Some(&Sources { g, h, q }))
    }

    /// Accumulated G(t) = ∫₀ᵗ E, per part (irr, sol, mean-as-vector-value).
    pub fn eval_g(&self) -> (SpectralField, SpectralField, [f64; 3]) {
        self.eval_g_inner(self.t, None)
    }

    pub fn eval_g_with_pending(
        &self,
        t1: f64,
        pending: &Sources,
    ) -> (SpectralField, SpectralField, [f64; 3]) {
        self.eval_g_inner(t1, Some(pending))
    }

    fn make_acc(
        &self,
        base: &FilonAccumulator,
        f_last: Complex64,
        t1: f64,
        f_pending: Complex64,
    ) -> FilonAccumulator {
        let mut acc = base.clone();
        acc.extend(self.t, f_last, t1, f_pending);
        acc
    }

    fn eval_inner(&self, t1: f64, pending: Option<&Sources>) -> EMState {
        let lat = &self.lattice;
        let n = lat.num_modes();
        let d = lat.vcomp();
        let ac = lat.acomp();
        let e = self.eps.get();
        let z = lat.zero_mode();
        let mut em = EMState::zeros(lat);
        em.b = self.seeds.b0.clone();
        let (st1, ct1) = (t1 / e).sin_cos();
        for i in 0..n {
            if i == z {
                continue;
            }
            let k = lat.mode(i);
            let ksq = lat.mode_norm_sq(i);
            // irrotational part
            let duh = match pending {
                Some(p) => self
                    .make_acc(&self.irr_acc[i], self.last.g.coeff(0, i), t1, p.g.coeff(0, i))
                    .sin_kernel(),
                None => self.irr_acc[i].sin_kernel(),
            };
            for c in 0..d {
                let ikc = Complex64::new(0.0, k[c] as f64);
                let v = -ikc / (e * ksq) * duh
                    + self.seeds.e_irr0.coeff(c, i) * ct1
                    + self.seeds.dt_e_irr0.coeff(c, i) * (e * st1);
                em.e_irr.set_coeff(c, i, v);
            }
            // solenoidal part and the Faraday integral for B
            let om = (1.0 + ksq).sqrt();
            let (sto, cto) = (om * t1 / e).sin_cos();
            let mut duh_h = [Complex64::new(0.0, 0.0); 3];
            let mut duh_b = [Complex64::new(0.0, 0.0); 3];
            for c in 0..ac {
                let (sk, omck) = match pending {
                    Some(p) => {
                        let acc = self.make_acc(
                            &self.sol_acc[i * ac + c],
                            self.last.h.coeff(c, i),
                            t1,
                            p.h.coeff(c, i),
                        );
                        (acc.sin_kernel(), acc.one_minus_cos_kernel())
                    }
                    None => {
                        let acc = &self.sol_acc[i * ac + c];
                        (acc.sin_kernel(), acc.one_minus_cos_kernel())
                    }
                };
                duh_h[c] = sk;
                duh_b[c] = omck;
            }
            let ikxh = wedge_k_axial(k, lat.dim(), &duh_h);
            for c in 0..d {
                let v = ikxh[c] * Complex64::new(0.0, 1.0) / (e * ksq * om)
                    + self.seeds.e_sol0.coeff(c, i) * cto
                    + self.seeds.dt_e_sol0.coeff(c, i) * (e / om * sto);
                em.e_sol.set_coeff(c, i, v);
            }
            // B(t,k) = B0(k) - ∫ (1-cos(ω(t-s)/ε)) ĥ/(1+|k|²) ds - ik ∧ G_sol_hom
            let mut gsol0 = [Complex64::new(0.0, 0.0); 3];
            for c in 0..d {
                gsol0[c] = self.seeds.e_sol0.coeff(c, i) * (e / om * sto)
                    + self.seeds.dt_e_sol0.coeff(c, i) * (e * e / (om * om) * (1.0 - cto));
            }
            let ikxg = wedge_kvec_vector(k, lat.dim(), &gsol0);
            for c in 0..ac {
                let v = em.b.coeff(c, i) - duh_b[c] / (1.0 + ksq)
                    - Complex64::new(0.0, 1.0) * ikxg[c];
                em.b.set_coeff(c, i, v);
            }
        }
        // mean part
        for c in 0..d {
            let duh = match pending {
                Some(p) => self
                    .make_acc(
                        &self.mean_acc[c],
                        Complex64::new(self.last.q[c], 0.0),
                        t1,
                        Complex64::new(p.q[c], 0.0),
                    )
                    .sin_kernel(),
                None => self.mean_acc[c].sin_kernel(),
            };
            em.e_mean[c] =
                duh.re / e + self.seeds.e_mean0[c] * ct1 + self.seeds.dt_e_mean0[c] * e * st1;
        }
        em
    }

    fn eval_g_inner(
        &self,
        t1: f64,
        pending: Option<&Sources>,
    ) -> (SpectralField, SpectralField, [f64; 3]) {
        let lat = &self.lattice;
        let n = lat.num_modes();
        let d = lat.vcomp();
        let ac = lat.acomp();
        let e = self.eps.get();
        let z = lat.zero_mode();
        let mut g_irr = SpectralField::zeros(lat, Rank::Vector);
        let mut g_sol = SpectralField::zeros(lat, Rank::Vector);
        let mut g_mean = [0.0; 3];
        let (st1, ct1) = (t1 / e).sin_cos();
        for i in 0..n {
            if i == z {
                continue;
            }
            let k = lat.mode(i);
            let ksq = lat.mode_norm_sq(i);
            let duh = match pending {
                Some(p) => self
                    .make_acc(&self.irr_acc[i], self.last.g.coeff(0, i), t1, p.g.coeff(0, i))
                    .one_minus_cos_kernel(),
                None => self.irr_acc[i].one_minus_cos_kernel(),
            };
            for c in 0..d {
                let ikc = Complex64::new(0.0, k[c] as f64);
                let v = -ikc / ksq * duh
                    + self.seeds.e_irr0.coeff(c, i) * (e * st1)
                    + self.seeds.dt_e_irr0.coeff(c, i) * (e * e * (1.0 - ct1));
                g_irr.set_coeff(c, i, v);
            }
            let om = (1.0 + ksq).sqrt();
            let (sto, cto) = (om * t1 / e).sin_cos();
            let mut duh_h = [Complex64::new(0.0, 0.0); 3];
            for c in 0..ac {
                duh_h[c] = match pending {
                    Some(p) => self
                        .make_acc(
                            &self.sol_acc[i * ac + c],
                            self.last.h.coeff(c, i),
                            t1,
                            p.h.coeff(c, i),
                        )
                        .one_minus_cos_kernel(),
                    None => self.sol_acc[i * ac + c].one_minus_cos_kernel(),
                };
            }
            let ikxh = wedge_k_axial(k, lat.dim(), &duh_h);
            for c in 0..d {
                let v = ikxh[c] * Complex64::new(0.0, 1.0) / (ksq * (1.0 + ksq))
                    + self.seeds.e_sol0.coeff(c, i) * (e / om * sto)
                    + self.seeds.dt_e_sol0.coeff(c, i) * (e * e / (om * om) * (1.0 - cto));
                g_sol.set_coeff(c, i, v);
            }
        }
        for c in 0..d {
            let duh = match pending {
                Some(p) => self
                    .make_acc(
                        &self.mean_acc[c],
                        Complex64::new(self.last.q[c], 0.0),
                        t1,
                        Complex64::new(p.q[c], 0.0),
                    )
                    .one_minus_cos_kernel(),
                None => self.mean_acc[c].one_minus_cos_kernel(),
            };
            g_mean[c] =
                duh.re + self.seeds.e_mean0[c] * e * st1 + self.seeds.dt_e_mean0[c] * e * e * (1.0 - ct1);
        }
        (g_irr, g_sol, g_mean)
    }
}

/// k ∧ v for a vector value v, producing an axial value.
pub(crate) fn wedge_kvec_vector(k: [i64; 3], dim: usize, v: &[Complex64; 3]) -> [Complex64; 3] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    match dim {
        1 => [Complex64::new(0.0, 0.0); 3],
        2 => [
            kf[0] * v[1] - kf[1] * v[0],
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        3 => [
            kf[1] * v[2] - kf[2] * v[1],
            kf[2] * v[0] - kf[0] * v[2],
            kf[0] * v[1] - kf[1] * v[0],
        ],
        _ => unreachable!(),
    }
}
