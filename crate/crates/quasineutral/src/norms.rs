//! Analytic norms used by the Cauchy–Kovalevskaya construction.
//!
//! The single-time norm with weight δ > 1 is
//!
//! ```text
//!   |g(t)|_δ = Σ_k δ^{|k|} |ĝ(t,k)|,
//! ```
//!
//! where |k| is the Euclidean norm of the wavevector (the mode cube is
//! indexed in Z^d; either the Euclidean or the ℓ¹ convention satisfies the
//! algebra property; this crate fixes Euclidean throughout). The
//! uniform-in-time norm over a horizon η is the supremum of
//!
//! ```text
//!   |g(t)|_δ + (δ0 - δ - t/η)^β |∇g(t)|_δ
//! ```
//!
//! over the admissible wedge {(t,δ) : 1 < δ ≤ δ0, δ0 - δ - t/η ≥ 0},
//! discretized on a configurable δ-grid and the stored time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;

/// Parameters of the uniform-in-time analytic norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticNormParams {
    /// Outer analyticity radius δ0 > 1.
    pub delta0: f64,
    /// Gradient weight exponent β ∈ (0,1).
    pub beta: f64,
    /// Time horizon η > 0.
    pub eta: f64,
    /// Number of δ samples in (1, δ0].
    pub delta_grid: usize,
}

impl Default for AnalyticNormParams {
    fn default() -> Self {
        AnalyticNormParams {
            delta0: 1.5,
            beta: 0.5,
            eta: 0.1,
            delta_grid: 64,
        }
    }
}

impl AnalyticNormParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta0 <= 1.0 {
            return Err(Error::Config(format!("delta0 must exceed 1, got {}", self.delta0)));
        }
        if !(0.0 < self.beta && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if self.eta <= 0.0 {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.delta_grid < 2 {
            return Err(Error::Config("delta_grid must have at least 2 points".into()));
        }
        Ok(())
    }

    /// The δ samples spanning (1, δ0].
    pub fn delta_samples(&self) -> Vec<f64> {
        let n = self.delta_grid;
        (1..=n)
            .map(|i| 1.0 + (self.delta0 - 1.0) * i as f64 / n as f64)
            .collect()
    }
}

/// Σ_k δ^{|k|} |ĝ(k)| with |k| Euclidean; vector fields sum component moduli.
pub fn analytic_norm(field: &SpectralField, delta: f64) -> Result<f64> {
    if delta <= 1.0 {
        return Err(Error::Config(format!("analytic norm needs delta > 1, got {delta}")));
    }
    let lat = field.lattice();
    let n = lat.num_modes();
    let mut acc = 0.0f64;
    for i in 0..n {
        let w = delta.powf(lat.mode_norm_sq(i).sqrt());
        let mut mag = 0.0;
        for c in 0..field.ncomp() {
            mag += field.coeff(c, i).norm();
        }
        acc += w * mag;
    }
    if !acc.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(acc)
}

/// A time-indexed sequence of fields (one tensor rank).
pub struct FieldHistory<'a> {
    pub times: &'a [f64],
    pub fields: &'a [SpectralField],
}

/// The uniform-in-time analytic norm, discretized on the stored time grid
/// and the params' δ-grid.
pub fn uniform_analytic_norm(history: &FieldHistory, params: &AnalyticNormParams) -> Result<f64> {
    params.validate()?;
    if history.times.len() != history.fields.len() || history.times.is_empty() {
        return Err(Error::SizeMismatch {
            want: history.times.len(),
            got: history.fields.len(),
        });
    }
    let deltas = params.delta_samples();
    let mut sup = f64::NEG_INFINITY;
    let mut admissible = false;
    for (t, field) in history.times.iter().zip(history.fields) {
        let lat = field.lattice();
        let n = lat.num_modes();
        // Precompute per-mode magnitudes of the field and its gradient
        // (gradient magnitude per component: |k| |ĝ_c(k)| summed over the
        // d partial derivatives gives Σ_ax |k_ax| |ĝ(k)|).
        let mut mag = vec![0.0f64; n];
        let mut grad_mag = vec![0.0f64; n];
        for i in 0..n {
            let k = lat.mode(i);
            let k1: f64 = (0..lat.dim()).map(|ax| k[ax].abs() as f64).sum();
            let mut m = 0.0;
            for c in 0..field.ncomp() {
                m += field.coeff(c, i).norm();
            }
            mag[i] = m;
            grad_mag[i] = k1 * m;
        }
        for &delta in &deltas {
            let slack = params.delta0 - delta - t / params.eta;
            if slack < 0.0 {
                continue;
            }
            admissible = true;
            let mut a = 0.0;
            let mut g = 0.0;
            for i in 0..n {
                let w = delta.powf(lat.mode_norm_sq(i).sqrt());
                a += w * mag[i];
                g += w * grad_mag[i];
            }
            let val = a + slack.powf(params.beta) * g;
            if !val.is_finite() {
                return Err(Error::Overflow);
            }
            sup = sup.max(val);
        }
    }
    if !admissible {
        return Err(Error::EmptyAdmissibleSet);
    }
    Ok(sup)
}

/// Initial-data norm: the t = 0 degenerate case of the uniform norm.
pub fn initial_analytic_norm(field: &SpectralField, params: &AnalyticNormParams) -> Result<f64> {
    let times = [0.0];
    let fields = [field.clone()];
    uniform_analytic_norm(
        &FieldHistory {
            times: &times,
            fields: &fields,
        },
        params,
    )
}
