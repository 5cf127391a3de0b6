//! Time-window filtering, the momentum corrector W, modulation operators,
//! and extraction of the limit correctors from a stored run.
//!
//! The electric field splits as E = E₁ + E₂ where E₂ averages each part of
//! E over one period of its own fast oscillation (the forward window
//! [t, t + 2πε] for the irrotational and mean parts, [t, t + 2πε/√(1+|k|²)]
//! per solenoidal mode) and E₁ is the complement. The corrector
//! W(t) = ∫₀ᵗ E₁ removes the O(1)-amplitude, O(1/ε)-frequency oscillation
//! from the momenta: w_Θ = ξ_Θ - W and b = B + ∇×W converge strongly where
//! ξ_Θ and B alone do not.
//!
//! All filtering is post-processing over stored trajectories; the solver
//! never sees it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::Trajectory;
use crate::field::{Rank, SpectralField};
use crate::layers::{moments, Epsilon};
use crate::oscillatory::ExpAccumulator;

/// Which fast phase a modulation operator unwinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// frequency 1/ε (irrotational / mean parts)
    One,
    /// frequency √(1+|k|²)/ε per mode (solenoidal part)
    Two,
}

/// Sign of the modulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// The modulation operator T^ε_{j,±}: per-mode phase e^{∓iω_j(k) t/ε}.
/// Isometric on every Sobolev norm; T_{j,-} T_{j,+} = Id.
pub fn apply_t(field: &SpectralField, branch: Branch, sign: Sign, t: f64, eps: Epsilon) -> SpectralField {
    let lat = field.lattice().clone();
    let n = lat.num_modes();
    let mut out = field.clone();
    out.real = false;
    for i in 0..n {
        let omega = match branch {
            Branch::One => 1.0,
            Branch::Two => (1.0 + lat.mode_norm_sq(i)).sqrt(),
        };
        let phase = Complex64::new(0.0, -sign.factor() * omega * t / eps.get()).exp();
        for c in 0..field.ncomp() {
            let v = out.coeff(c, i);
            out.set_coeff(c, i, v * phase);
        }
    }
    out
}

/// Antiderivative of a sampled complex signal, built on the piecewise-cubic
/// (Catmull–Rom) reconstruction. Window endpoints generally fall between
/// samples; a linear reconstruction leaves O(h³ f'') end-interval residue,
/// which a 64-sample window cannot push below 1e-6 for the fastest modes.
/// The cubic gains two orders there at the same sample count.
pub(crate) struct SampledAntiderivative {
    times: Vec<f64>,
    values: Vec<Complex64>,
    /// one-sided/centered slope estimates at the nodes
    slopes: Vec<Complex64>,
    cumulative: Vec<Complex64>,
}

impl SampledAntiderivative {
    pub(crate) fn new(times: &[f64], values: Vec<Complex64>) -> SampledAntiderivative {
        let n = times.len();
        let mut slopes = vec![Complex64::new(0.0, 0.0); n];
        if n >= 2 {
            for i in 1..n - 1 {
                slopes[i] = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]);
            }
            // third-order one-sided estimates at the record ends; a first-order
            // fallback would leave an O(h³ f'') defect in every window that
            // touches the boundary
            if n >= 4 {
                let h0 = times[1] - times[0];
                slopes[0] = (-11.0 * values[0] + 18.0 * values[1] - 9.0 * values[2]
                    + 2.0 * values[3])
                    / (6.0 * h0);
                let h1 = times[n - 1] - times[n - 2];
                slopes[n - 1] = (11.0 * values[n - 1] - 18.0 * values[n - 2]
                    + 9.0 * values[n - 3]
                    - 2.0 * values[n - 4])
                    / (6.0 * h1);
            } else {
                slopes[0] = (values[1] - values[0]) / (times[1] - times[0]);
                slopes[n - 1] = (values[n - 1] - values[n - 2]) / (times[n - 1] - times[n - 2]);
            }
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = Complex64::new(0.0, 0.0);
        cumulative.push(acc);
        for i in 1..n {
            let h = times[i] - times[i - 1];
            // exact integral of the Hermite cubic over the interval
            acc += (values[i - 1] + values[i]) * (0.5 * h)
                + (slopes[i - 1] - slopes[i]) * (h * h / 12.0);
            cumulative.push(acc);
        }
        SampledAntiderivative {
            times: times.to_vec(),
            values,
            slopes,
            cumulative,
        }
    }

    /// ∫_{t0}^{t} of the reconstruction.
    pub(crate) fn eval(&self, t: f64) -> Complex64 {
        let times = &self.times;
        let n = times.len();
        let clamped = t.clamp(times[0], times[n - 1]);
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if times[mid] <= clamped {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = times[lo + 1] - times[lo];
        let u = (clamped - times[lo]) / h;
        // integrals of the Hermite basis on [0, u]
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u3 * u;
        let i00 = 0.5 * u4 - u3 + u;
        let i10 = 0.25 * u4 - 2.0 * u3 / 3.0 + 0.5 * u2;
        let i01 = -0.5 * u4 + u3;
        let i11 = 0.25 * u4 - u3 / 3.0;
        self.cumulative[lo]
            + h * (self.values[lo] * i00
                + self.slopes[lo] * (h * i10)
                + self.values[lo + 1] * i01
                + self.slopes[lo + 1] * (h * i11))
    }
}

/// The filtered split of a trajectory's electric field, the corrector, and
/// the corrected magnetic field and momenta.
pub struct FilteredFields {
    pub times: Vec<f64>,
    /// E₂ = ℋE per stored node (irr, sol, mean parts).
    pub e2: Vec<(SpectralField, SpectralField, [f64; 3])>,
    /// E₁ = E - E₂ as a single vector field per node.
    pub e1: Vec<SpectralField>,
    /// Raw corrector ∫₀ᵗ E₁ (zero at t = 0).
    pub w_raw: Vec<SpectralField>,
    /// W(t) = W(0) + ∫₀ᵗ E₁ with the closed-form initial value, the object
    /// whose subtraction yields the convergent momenta.
    pub w: Vec<SpectralField>,
    /// b = B + ∇×W per node.
    pub b: Vec<SpectralField>,
    /// w_Θ = ξ_Θ - W per node per layer.
    pub layer_w: Vec<Vec<SpectralField>>,
    pub w0: SpectralField,
}

/// Closed-form initial corrector value
/// W(0) = ∇Δ⁻¹(∇·j₀) - (1-Δ)⁻¹[∇×B₀ + ∇×Δ⁻¹(∇×j₀)] - (2π)⁻ᵈ∫j₀.
pub fn corrector_initial(j0: &SpectralField, b0: &SpectralField) -> SpectralField {
    let lat = j0.lattice().clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let z = lat.zero_mode();
    let (irr_j, sol_j, mean_j) = crate::decomposition::helmholtz_decompose(j0);
    let curl_b = b0.curl_axial();
    let mut out = SpectralField::zeros(&lat, Rank::Vector);
    for i in 0..n {
        if i == z {
            continue;
        }
        let ksq = lat.mode_norm_sq(i);
        for c in 0..d {
            // ∇×Δ⁻¹(∇×j₀) = -P_sol j₀ mode-wise
            let bracket = curl_b.coeff(c, i) - sol_j.coeff(c, i);
            let v = irr_j.coeff(c, i) - bracket / (1.0 + ksq);
            out.set_coeff(c, i, v);
        }
    }
    for c in 0..d {
        out.set_coeff(c, z, Complex64::new(-mean_j[c] * lat.volume(), 0.0));
    }
    out
}

fn window_average(
    anti: &SampledAntiderivative,
    t: f64,
    window: f64,
) -> Complex64 {
    (anti.eval(t + window) - anti.eval(t)) / window
}

/// Apply the part-wise averaging ℋ to the stored E parts, producing
/// (E₁, E₂) on every stored node with t + 2πε inside the horizon.
pub fn filter_h(traj: &Trajectory) -> Result<FilteredFields> {
    let lat = traj.lattice.clone();
    let eps = traj.eps;
    let window1 = std::f64::consts::TAU * eps.get();
    let t_last = *traj.times.last().ok_or(Error::Horizon {
        need: window1,
        have: 0.0,
    })?;
    let times: Vec<f64> = traj
        .times
        .iter()
        .copied()
        .filter(|&t| t + window1 <= t_last + 1e-12)
        .collect();
    if times.is_empty() {
        return Err(Error::Horizon {
            need: window1,
            have: t_last,
        });
    }
    let n_keep = times.len();
    let n = lat.num_modes();
    let d = lat.vcomp();

    // per-mode antiderivatives of the stored E-part signals
    let all_times = &traj.times;
    let mut irr_anti = Vec::with_capacity(d * n);
    let mut sol_anti = Vec::with_capacity(d * n);
    for c in 0..d {
        for i in 0..n {
            let sig_irr: Vec<Complex64> =
                traj.states.iter().map(|s| s.em.e_irr.coeff(c, i)).collect();
            let sig_sol: Vec<Complex64> =
                traj.states.iter().map(|s| s.em.e_sol.coeff(c, i)).collect();
            irr_anti.push(SampledAntiderivative::new(all_times, sig_irr));
            sol_anti.push(SampledAntiderivative::new(all_times, sig_sol));
        }
    }
    let mean_anti: Vec<SampledAntiderivative> = (0..d)
        .map(|c| {
            SampledAntiderivative::new(
                all_times,
                traj.states
                    .iter()
                    .map(|s| Complex64::new(s.em.e_mean[c], 0.0))
                    .collect(),
            )
        })
        .collect();

    let mut e2 = Vec::with_capacity(n_keep);
    let mut e1 = Vec::with_capacity(n_keep);
    for (out_idx, &t) in times.iter().enumerate() {
        let mut irr2 = SpectralField::zeros(&lat, Rank::Vector);
        let mut sol2 = SpectralField::zeros(&lat, Rank::Vector);
        let mut mean2 = [0.0; 3];
        for c in 0..d {
            for i in 0..n {
                let a1 = window_average(&irr_anti[c * n + i], t, window1);
                irr2.set_coeff(c, i, a1);
                let wk = window1 / (1.0 + lat.mode_norm_sq(i)).sqrt();
                let a2 = window_average(&sol_anti[c * n + i], t, wk);
                sol2.set_coeff(c, i, a2);
            }
            mean2[c] = window_average(&mean_anti[c], t, window1).re;
        }
        // E₁ is the exact complement at the stored node
        let st = &traj.states[out_idx];
        let mut e2_total = irr2.add(&sol2);
        let z = lat.zero_mode();
        for c in 0..d {
            let v = e2_total.coeff(c, z);
            e2_total.set_coeff(c, z, v + Complex64::new(mean2[c] * lat.volume(), 0.0));
        }
        let e_total = st.em.total_e();
        e1.push(e_total.sub(&e2_total));
        e2.push((irr2, sol2, mean2));
    }

    // raw corrector: cumulative integral of E₁ on the kept grid (same
    // reconstruction as the windows)
    let w_raw = corrector_w(&times, &e1);

    // closed-form initial value from the initial current and magnetic field
    let first = &traj.states[0];
    let (_, j0) = moments(&first.layers, eps)?;
    let w0 = corrector_initial(&j0, &first.em.b);

    let mut w = Vec::with_capacity(n_keep);
    let mut b = Vec::with_capacity(n_keep);
    let mut layer_w = Vec::with_capacity(n_keep);
    for (i, wr) in w_raw.iter().enumerate() {
        let wi = wr.add(&w0);
        let mut bi = traj.states[i].em.b.clone();
        bi.add_assign(&wi.curl());
        let lw: Vec<SpectralField> = traj.states[i]
            .layers
            .iter()
            .map(|l| l.xi.sub(&wi))
            .collect();
        w.push(wi);
        b.push(bi);
        layer_w.push(lw);
    }

    Ok(FilteredFields {
        times,
        e2,
        e1,
        w_raw,
        w,
        b,
        layer_w,
        w0,
    })
}

/// Cumulative time integral of a sampled field history (the raw corrector
/// of an arbitrary E₁ history; zero at the first node).
pub fn corrector_w(times: &[f64], e1: &[SpectralField]) -> Vec<SpectralField> {
    let mut out = Vec::with_capacity(times.len());
    if e1.is_empty() {
        return out;
    }
    let lat = e1[0].lattice().clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    for _ in times {
        out.push(SpectralField::zeros(&lat, Rank::Vector));
    }
    for c in 0..d {
        for i in 0..n {
            let sig: Vec<Complex64> = e1.iter().map(|f| f.coeff(c, i)).collect();
            let anti = SampledAntiderivative::new(times, sig);
            for (j, w) in out.iter_mut().enumerate() {
                w.set_coeff(c, i, anti.cumulative[j]);
            }
        }
    }
    out
}

/// The six limit correctors at one instant ("+" branch stored; the "-"
/// branch follows from the reality of E by conjugation under k → -k).
#[derive(Debug, Clone)]
pub struct CorrectorState {
    pub t: f64,
    /// spatially independent d₀,₊
    pub d0: [Complex64; 3],
    /// irrotational d₁,₊ (k-parallel modes, complex)
    pub d1: SpectralField,
    /// solenoidal d₂,₊ (k-orthogonal modes, complex)
    pub d2: SpectralField,
}

impl CorrectorState {
    pub fn zeros(lat: &std::sync::Arc<crate::lattice::Lattice>) -> CorrectorState {
        let mut d1 = SpectralField::zeros(lat, Rank::Vector);
        let mut d2 = SpectralField::zeros(lat, Rank::Vector);
        d1.real = false;
        d2.real = false;
        CorrectorState {
            t: 0.0,
            d0: [Complex64::new(0.0, 0.0); 3],
            d1,
            d2,
        }
    }

    pub fn d0_minus(&self) -> [Complex64; 3] {
        [self.d0[0].conj(), self.d0[1].conj(), self.d0[2].conj()]
    }

    /// d_{j,-}(k) = conj d_{j,+}(-k).
    pub fn minus_field(plus: &SpectralField) -> SpectralField {
        let lat = plus.lattice().clone();
        let n = lat.num_modes();
        let mut out = plus.clone();
        for c in 0..plus.ncomp() {
            for i in 0..n {
                let j = lat.conj_mode(i);
                out.set_coeff(c, i, plus.coeff(c, j).conj());
            }
        }
        out
    }

    /// Structure error: how far d₁ is from k-parallel and d₂ from
    /// k-orthogonal (max over modes).
    pub fn structure_error(&self) -> f64 {
        let lat = self.d1.lattice().clone();
        let n = lat.num_modes();
        let d = lat.vcomp();
        let z = lat.zero_mode();
        let mut worst = 0.0f64;
        for i in 0..n {
            if i == z {
                for c in 0..d {
                    worst = worst.max(self.d1.coeff(c, i).norm());
                    worst = worst.max(self.d2.coeff(c, i).norm());
                }
                continue;
            }
            let k = lat.mode(i);
            let ksq = lat.mode_norm_sq(i);
            // transverse part of d1
            let mut kdot1 = Complex64::new(0.0, 0.0);
            let mut kdot2 = Complex64::new(0.0, 0.0);
            for c in 0..d {
                kdot1 += Complex64::new(k[c] as f64, 0.0) * self.d1.coeff(c, i);
                kdot2 += Complex64::new(k[c] as f64, 0.0) * self.d2.coeff(c, i);
            }
            for c in 0..d {
                let par = kdot1 * (k[c] as f64 / ksq);
                worst = worst.max((self.d1.coeff(c, i) - par).norm());
            }
            worst = worst.max(kdot2.norm() / ksq.sqrt());
        }
        worst
    }
}

/// Options for corrector extraction from a finite-ε run.
#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Averaging window in fast periods 2πε (default 10).
    pub window_periods: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            window_periods: 10.0,
        }
    }
}

/// Demodulated corrector estimates at every source node (before window
/// averaging): the closed-form Duhamel splits of εE with the fast phase
/// removed by T^ε_{j,+}.
pub fn demodulated_signals(traj: &Trajectory) -> Result<Vec<CorrectorState>> {
    let lat = traj.lattice.clone();
    let eps = traj.eps.get();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let ac = lat.acomp();
    let z = lat.zero_mode();
    let seeds = &traj.seeds;
    let times = &traj.source_times;
    let half_i = Complex64::new(0.0, -0.5); // 1/(2i)

    // exponential accumulators: mean (Ω = 1/ε), irr (Ω = 1/ε) per mode,
    // sol (Ω = ω(k)/ε) per mode per axial component
    let mut acc_mean: Vec<ExpAccumulator> = (0..d).map(|_| ExpAccumulator::new(1.0 / eps)).collect();
    let mut acc_g: Vec<ExpAccumulator> = (0..n).map(|_| ExpAccumulator::new(1.0 / eps)).collect();
    let mut acc_h: Vec<ExpAccumulator> = (0..n * ac)
        .map(|idx| {
            let i = idx / ac;
            ExpAccumulator::new((1.0 + lat.mode_norm_sq(i)).sqrt() / eps)
        })
        .collect();

    let mut out = Vec::with_capacity(times.len());
    for (node, &t) in times.iter().enumerate() {
        if node > 0 {
            let t0 = times[node - 1];
            for c in 0..d {
                acc_mean[c].extend(
                    t0,
                    Complex64::new(traj.q_hist[node - 1][c], 0.0),
                    t,
                    Complex64::new(traj.q_hist[node][c], 0.0),
                );
            }
            for i in 0..n {
                acc_g[i].extend(
                    t0,
                    traj.g_hist[node - 1].coeff(0, i),
                    t,
                    traj.g_hist[node].coeff(0, i),
                );
                for c in 0..ac {
                    acc_h[i * ac + c].extend(
                        t0,
                        traj.h_hist[node - 1].coeff(c, i),
                        t,
                        traj.h_hist[node].coeff(c, i),
                    );
                }
            }
        }
        let mut st = CorrectorState::zeros(&lat);
        st.t = t;
        // d₀ estimate: ε[½ E_mean(0) + (ε/2i) ∂tE_mean(0) + (1/2iε) ∫ q e^{-is/ε}]
        for c in 0..d {
            st.d0[c] = eps
                * (0.5 * seeds.e_mean0[c]
                    + half_i * (eps * seeds.dt_e_mean0[c])
                    + half_i / eps * acc_mean[c].value());
        }
        for i in 0..n {
            if i == z {
                continue;
            }
            let k = lat.mode(i);
            let ksq = lat.mode_norm_sq(i);
            let om = (1.0 + ksq).sqrt();
            // d₁ estimate: ε[½ Ê_irr(0,k) + (ε/2i) ∂tÊ_irr(0,k) - k ĝ-int/(2|k|²ε)]
            let gi = acc_g[i].value();
            for c in 0..d {
                let v = eps
                    * (0.5 * seeds.e_irr0.coeff(c, i)
                        + half_i * eps * seeds.dt_e_irr0.coeff(c, i)
                        - (k[c] as f64) / (2.0 * ksq * eps) * gi);
                st.d1.set_coeff(c, i, v);
            }
            // d₂ estimate: ε[½ Ê_sol(0,k) + ε ∂tÊ_sol(0,k)/(2iω) + (k∧ĥ-int)/(2|k|²ωε)]
            let mut hint = [Complex64::new(0.0, 0.0); 3];
            for c in 0..ac {
                hint[c] = acc_h[i * ac + c].value();
            }
            let kxh = crate::oscillatory::wedge_k_axial(k, lat.dim(), &hint);
            for c in 0..d {
                let v = eps
                    * (0.5 * seeds.e_sol0.coeff(c, i)
                        + half_i / om * eps * seeds.dt_e_sol0.coeff(c, i)
                        + kxh[c] / (2.0 * ksq * om * eps));
                st.d2.set_coeff(c, i, v);
            }
        }
        out.push(st);
    }
    Ok(out)
}

/// Window-averaged corrector estimates at the requested output times.
pub fn extract_limit_correctors(
    traj: &Trajectory,
    times_out: &[f64],
    opts: &ExtractOptions,
) -> Result<Vec<CorrectorState>> {
    let signals = demodulated_signals(traj)?;
    let eps = traj.eps.get();
    let window = opts.window_periods * std::f64::consts::TAU * eps;
    let t_last = *traj.source_times.last().unwrap();
    let lat = traj.lattice.clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let mut out = Vec::with_capacity(times_out.len());
    for &t in times_out {
        if t + 0.5 * window > t_last + 1e-12 {
            return Err(Error::Horizon {
                need: t + 0.5 * window,
                have: t_last,
            });
        }
        let lo = (t - 0.5 * window).max(0.0);
        let hi = t + 0.5 * window;
        let mut st = CorrectorState::zeros(&lat);
        st.t = t;
        let mut count = 0usize;
        for s in &signals {
            if s.t + 1e-12 < lo || s.t > hi + 1e-12 {
                continue;
            }
            count += 1;
            for c in 0..d {
                st.d0[c] += s.d0[c];
                for i in 0..n {
                    let v1 = st.d1.coeff(c, i) + s.d1.coeff(c, i);
                    st.d1.set_coeff(c, i, v1);
                    let v2 = st.d2.coeff(c, i) + s.d2.coeff(c, i);
                    st.d2.set_coeff(c, i, v2);
                }
            }
        }
        if count == 0 {
            return Err(Error::Horizon {
                need: hi,
                have: t_last,
            });
        }
        let inv = 1.0 / count as f64;
        for c in 0..d {
            st.d0[c] *= inv;
        }
        st.d1.scale(inv);
        st.d2.scale(inv);
        out.push(st);
    }
    Ok(out)
}

/// Reassemble the oscillatory εE prediction from corrector values at time t:
/// Σ_σ e^{σit/ε}[d̂₁σ + 1_{k=0} d₀σ] + Σ_σ e^{σiω_k t/ε} d̂₂σ.
pub fn corrector_eps_e(st: &CorrectorState, t: f64, eps: Epsilon) -> SpectralField {
    let lat = st.d1.lattice().clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let z = lat.zero_mode();
    let e = eps.get();
    let mut out = SpectralField::zeros(&lat, Rank::Vector);
    out.real = false;
    let d1m = CorrectorState::minus_field(&st.d1);
    let d2m = CorrectorState::minus_field(&st.d2);
    let d0m = st.d0_minus();
    let ph1p = Complex64::new(0.0, t / e).exp();
    let ph1m = ph1p.conj();
    for i in 0..n {
        let om = (1.0 + lat.mode_norm_sq(i)).sqrt();
        let ph2p = Complex64::new(0.0, om * t / e).exp();
        let ph2m = ph2p.conj();
        for c in 0..d {
            let mut v = ph1p * st.d1.coeff(c, i) + ph1m * d1m.coeff(c, i);
            if i == z {
                v += ph1p * st.d0[c] * lat.volume() + ph1m * d0m[c] * lat.volume();
            }
            v += ph2p * st.d2.coeff(c, i) + ph2m * d2m.coeff(c, i);
            out.set_coeff(c, i, v);
        }
    }
    out
}

/// The momentum-corrector prediction at time t (the combination subtracted
/// from ξ in the limit statement):
/// Σ_σ (-σi) e^{σit/ε} (d₀σ + d̂₁σ) + Σ_σ (-σi) e^{σiω t/ε} d̂₂σ/ω.
pub fn corrector_momentum(st: &CorrectorState, t: f64, eps: Epsilon) -> SpectralField {
    let lat = st.d1.lattice().clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let z = lat.zero_mode();
    let e = eps.get();
    let mut out = SpectralField::zeros(&lat, Rank::Vector);
    out.real = false;
    let d1m = CorrectorState::minus_field(&st.d1);
    let d2m = CorrectorState::minus_field(&st.d2);
    let d0m = st.d0_minus();
    let mi = Complex64::new(0.0, -1.0);
    let pi = Complex64::new(0.0, 1.0);
    let ph1p = Complex64::new(0.0, t / e).exp();
    let ph1m = ph1p.conj();
    for i in 0..n {
        let om = (1.0 + lat.mode_norm_sq(i)).sqrt();
        let ph2p = Complex64::new(0.0, om * t / e).exp();
        let ph2m = ph2p.conj();
        for c in 0..d {
            let mut v = mi * ph1p * st.d1.coeff(c, i) + pi * ph1m * d1m.coeff(c, i);
            if i == z {
                v += (mi * ph1p * st.d0[c] + pi * ph1m * d0m[c]) * lat.volume();
            }
            v += (mi * ph2p * st.d2.coeff(c, i) + pi * ph2m * d2m.coeff(c, i)) / om;
            out.set_coeff(c, i, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use std::sync::Arc;

    fn test_lattice() -> Arc<Lattice> {
        Lattice::minimal(2, 3).unwrap()
    }

    #[test]
    fn t_operator_is_identity_at_t0_and_inverts() {
        let lat = test_lattice();
        let mut f = SpectralField::zeros(&lat, Rank::Scalar);
        f.set_mode_pair(0, &[1, 2, 0], Complex64::new(0.3, -0.8)).unwrap();
        let eps = Epsilon::new(0.1).unwrap();
        for branch in [Branch::One, Branch::Two] {
            let id = apply_t(&f, branch, Sign::Plus, 0.0, eps);
            assert!(id.sub(&f).max_coeff() < 1e-15);
            let t = 0.377;
            let fwd = apply_t(&f, branch, Sign::Plus, t, eps);
            let back = apply_t(&fwd, branch, Sign::Minus, t, eps);
            assert!(back.sub(&f).max_coeff() < 1e-13);
        }
    }

    #[test]
    fn t_operator_is_a_sobolev_isometry() {
        let lat = test_lattice();
        let mut f = SpectralField::zeros(&lat, Rank::Vector);
        f.set_mode_pair(0, &[1, 0, 0], Complex64::new(0.5, 0.1)).unwrap();
        f.set_mode_pair(1, &[2, -1, 0], Complex64::new(-0.2, 0.9)).unwrap();
        let eps = Epsilon::new(0.05).unwrap();
        for s in [0.0, 1.0, 2.5] {
            let before = f.sobolev_norm(s);
            let after = apply_t(&f, Branch::Two, Sign::Plus, 1.234, eps).sobolev_norm(s);
            assert!((before - after).abs() <= 1e-13 * before.max(1.0));
        }
    }

    #[test]
    fn corrector_initial_of_zero_data_is_zero() {
        let lat = test_lattice();
        let j0 = SpectralField::zeros(&lat, Rank::Vector);
        let b0 = SpectralField::zeros(&lat, Rank::Axial);
        assert!(corrector_initial(&j0, &b0).max_coeff() < 1e-15);
    }

    #[test]
    fn corrector_initial_of_constant_current_is_minus_j() {
        let lat = test_lattice();
        let mut j0 = SpectralField::zeros(&lat, Rank::Vector);
        let z = lat.zero_mode();
        j0.set_coeff(0, z, Complex64::new(0.7 * lat.volume(), 0.0));
        j0.set_coeff(1, z, Complex64::new(-0.2 * lat.volume(), 0.0));
        let b0 = SpectralField::zeros(&lat, Rank::Axial);
        let w0 = corrector_initial(&j0, &b0);
        assert!((w0.coeff(0, z).re + 0.7 * lat.volume()).abs() < 1e-12);
        assert!((w0.coeff(1, z).re - 0.2 * lat.volume()).abs() < 1e-12);
        for i in 0..lat.num_modes() {
            if i != z {
                assert!(w0.coeff(0, i).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn corrector_initial_matches_seed_identities() {
        // irr part must equal -ε²∂tE_irr(0) and sol part -(1-Δ)⁻¹ ε²∂tE_sol(0)
        use crate::decomposition::helmholtz_decompose;
        let lat = test_lattice();
        let mut rng_seed: u64 = 0x5eed;
        let mut j0 = SpectralField::zeros(&lat, Rank::Vector);
        let mut b0v = SpectralField::zeros(&lat, Rank::Vector);
        let mut next = move || {
            rng_seed = rng_seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((rng_seed >> 33) as f64 / 2f64.powi(31)) - 1.0
        };
        for c in 0..2 {
            for i in 0..lat.num_modes() {
                if lat.mode(i) == [0, 0, 0] {
                    continue;
                }
                let re = next();
                let im = next();
                let v = Complex64::new(re, im);
                j0.set_coeff(c, i, j0.coeff(c, i) + v);
                j0.set_coeff(c, lat.conj_mode(i), j0.coeff(c, lat.conj_mode(i)) + v.conj());
                b0v.set_coeff(c, i, b0v.coeff(c, i) + v * 0.5);
                b0v.set_coeff(
                    c,
                    lat.conj_mode(i),
                    b0v.coeff(c, lat.conj_mode(i)) + v.conj() * 0.5,
                );
            }
        }
        let b0 = b0v.curl();
        let w0 = corrector_initial(&j0, &b0);
        // seeds: ε²∂tE(0) = ∇×B₀ - j₀ (ε-free combination)
        let mut e2dte = b0.curl_axial();
        e2dte.axpy(-1.0, &j0);
        let (dt_irr, dt_sol, _) = helmholtz_decompose(&e2dte);
        let (w_irr, w_sol, _) = helmholtz_decompose(&w0);
        // irr: Ŵ₀ = -ε²∂tÊ_irr(0)
        assert!(w_irr.add(&dt_irr).max_coeff() < 1e-12);
        // sol: Ŵ₀ = -(1+|k|²)⁻¹ ε²∂tÊ_sol(0)
        let mut expect = SpectralField::zeros(&lat, Rank::Vector);
        for c in 0..2 {
            for i in 0..lat.num_modes() {
                let v = -dt_sol.coeff(c, i) / (1.0 + lat.mode_norm_sq(i));
                expect.set_coeff(c, i, v);
            }
        }
        assert!(w_sol.sub(&expect).max_coeff() < 1e-12);
    }
}
