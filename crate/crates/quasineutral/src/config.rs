//! Run configuration: a single TOML document describing the lattice, the
//! physics parameters, the initial data (sparse mode lists or named
//! presets), and the output options.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField};
use crate::layers::{Epsilon, FluidLayer};
use crate::lattice::Lattice;
use crate::norms::AnalyticNormParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub dim: usize,
    pub cutoff: usize,
    /// Grid points per axis; default 2*cutoff + 1.
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeConfig {
    pub epsilon: f64,
    /// Fluid step; default ε/50.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Stored samples per fast filtering window 2πε (≥ 64 recommended).
    pub samples_per_window: Option<usize>,
}

impl TimeConfig {
    pub fn dt_value(&self) -> f64 {
        self.dt.unwrap_or(self.epsilon / 50.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct NormConfig {
    pub delta0: Option<f64>,
    pub beta: Option<f64>,
    pub delta_grid: Option<usize>,
}

impl NormConfig {
    pub fn params(&self, eta: f64) -> AnalyticNormParams {
        let d = AnalyticNormParams::default();
        AnalyticNormParams {
            delta0: self.delta0.unwrap_or(d.delta0),
            beta: self.beta.unwrap_or(d.beta),
            eta,
            delta_grid: self.delta_grid.unwrap_or(d.delta_grid),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardConfig {
    pub eta: f64,
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
    pub auto_bisect: Option<bool>,
}

/// One sparse spectral coefficient: the raw Fourier coefficient at
/// wavevector k under this crate's convention (a constant field c has
/// coefficient c·(2π)^d at k = 0); the Hermitian partner at -k is set
/// automatically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeEntry {
    pub k: Vec<i64>,
    /// component index for vector/axial fields; ignored for scalars
    #[serde(default)]
    pub comp: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerConfig {
    pub weight: f64,
    /// Uniform background density (default 1).
    #[serde(default = "one")]
    pub rho_background: f64,
    #[serde(default)]
    pub rho_modes: Vec<ModeEntry>,
    /// Uniform drift momentum (d components).
    #[serde(default)]
    pub xi_uniform: Vec<f64>,
    #[serde(default)]
    pub xi_modes: Vec<ModeEntry>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct InitConfig {
    /// "quiescent", "single-mode-irr", "two-stream-sheets", or empty for
    /// fully explicit data.
    #[serde(default)]
    pub preset: Option<String>,
    /// Preset strength (amplitude of the O(1/ε) electric seed).
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Preset drift speed for two-stream data.
    #[serde(default)]
    pub drift: Option<f64>,
    /// Preset magnetic amplitude.
    #[serde(default)]
    pub b_amplitude: Option<f64>,
    #[serde(default)]
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub e0_modes: Vec<ModeEntry>,
    #[serde(default)]
    pub b0_modes: Vec<ModeEntry>,
    /// Scale the configured E0 modes by 1/ε (O(1/ε) oscillatory seed data).
    #[serde(default)]
    pub e0_scale_inv_eps: bool,
    /// Add ε²∇·E0 to every layer density so Gauss holds exactly (default on).
    #[serde(default = "default_true")]
    pub enforce_gauss: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
    /// "json" or "csv"
    #[serde(default)]
    pub format: Option<String>,
    /// Store every n-th step when filtering does not dictate the stride.
    #[serde(default)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Sobolev index of the error norms (default 1).
    pub sobolev_index: Option<f64>,
    /// e-MHD reference step (default T/400).
    pub emhd_dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DispersionConfig {
    /// mode to probe, e.g. [1, 0]
    #[serde(default)]
    pub mode: Vec<i64>,
    /// "irr", "sol" or "mean"
    #[serde(default)]
    pub component: Option<String>,
    /// density perturbation amplitude of the linearized run
    #[serde(default)]
    pub perturbation: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub norms: NormConfig,
    #[serde(default)]
    pub picard: Option<PicardConfig>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub dispersion: Option<DispersionConfig>,
    /// Corrector-extraction window in fast periods (default 10).
    #[serde(default)]
    pub extract_window_periods: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn lattice(&self) -> Result<Arc<Lattice>> {
        let grid = self
            .lattice
            .grid
            .unwrap_or(2 * self.lattice.cutoff + 1);
        Lattice::new(self.lattice.dim, self.lattice.cutoff, grid)
    }

    pub fn epsilon(&self) -> Result<Epsilon> {
        Epsilon::new(self.time.epsilon)
    }

    /// Stored-state stride in steps so that one fast window holds at least
    /// `samples_per_window` samples.
    pub fn stride_steps(&self) -> usize {
        let spw = self.time.samples_per_window.unwrap_or(64).max(2);
        let window = std::f64::consts::TAU * self.time.epsilon;
        let dt = self.time.dt_value();
        ((window / (spw as f64 * dt)).floor() as usize).max(1)
    }
}

fn apply_modes(field: &mut SpectralField, modes: &[ModeEntry], scale: f64) -> Result<()> {
    let lat = field.lattice().clone();
    for m in modes {
        let mut k = [0i64; 3];
        if m.k.len() != lat.dim() {
            return Err(Error::Config(format!(
                "mode {:?} has {} indices, lattice dim is {}",
                m.k,
                m.k.len(),
                lat.dim()
            )));
        }
        for (ax, &v) in m.k.iter().enumerate() {
            k[ax] = v;
        }
        if m.comp >= field.ncomp() {
            return Err(Error::Config(format!(
                "component {} out of range for this field",
                m.comp
            )));
        }
        let idx = lat
            .mode_index(&k)
            .ok_or_else(|| Error::Config(format!("mode {k:?} outside cutoff")))?;
        let cur = field.coeff(m.comp, idx);
        let v = cur + Complex64::new(m.re, m.im) * scale;
        field.set_mode_pair(m.comp, &k, v)?;
    }
    Ok(())
}

/// Fully assembled initial data for one ε.
pub struct InitialData {
    pub layers: Vec<FluidLayer>,
    pub e0: SpectralField,
    pub b0: SpectralField,
    /// The ε-free limit data (ρ without the Gauss correction, momenta as
    /// configured, and the fixed field e = lim ε E0).
    pub limit_layers: Vec<FluidLayer>,
    pub fixed_e: SpectralField,
}

/// Build initial data from the config at the given ε. Presets:
/// - "quiescent": one layer at rest, no fields;
/// - "single-mode-irr": one layer, irrotational E0 on the first configured
///   mode (default k = (1,0,..));
/// - "two-stream-sheets": two counter-streaming layers plus a small
///   oscillatory electric seed and (in d ≥ 2) a magnetic mode.
pub fn build_initial(config: &RunConfig, eps: Epsilon) -> Result<InitialData> {
    let lat = config.lattice()?;
    let d = lat.dim();
    let vol = lat.volume();
    let amp = config.init.amplitude.unwrap_or(0.05);
    let drift = config.init.drift.unwrap_or(0.2);
    let b_amp = config.init.b_amplitude.unwrap_or(amp);

    let mut layer_cfgs: Vec<LayerConfig> = Vec::new();
    let mut e0_modes: Vec<ModeEntry> = config.init.e0_modes.clone();
    let mut b0_modes: Vec<ModeEntry> = config.init.b0_modes.clone();
    let mut scale_inv = config.init.e0_scale_inv_eps;

    match config.init.preset.as_deref() {
        None | Some("") => {
            layer_cfgs = config.init.layers.clone();
            if layer_cfgs.is_empty() {
                return Err(Error::Config("no layers configured and no preset".into()));
            }
        }
        Some("quiescent") => {
            layer_cfgs.push(LayerConfig {
                weight: 1.0,
                rho_background: 1.0,
                rho_modes: vec![],
                xi_uniform: vec![],
                xi_modes: vec![],
            });
        }
        Some("single-mode-irr") => {
            layer_cfgs.push(LayerConfig {
                weight: 1.0,
                rho_background: 1.0,
                rho_modes: vec![],
                xi_uniform: vec![],
                xi_modes: vec![],
            });
            if e0_modes.is_empty() {
                // irrotational: Ê ∥ k on k = e₁
                let mut k = vec![0i64; d];
                k[0] = 1;
                e0_modes.push(ModeEntry {
                    k,
                    comp: 0,
                    re: 0.0,
                    im: amp,
                });
            }
            scale_inv = true;
        }
        Some("two-stream-sheets") => {
            let mut u = vec![0.0; d];
            u[0] = drift;
            let mut xi_pert = Vec::new();
            if d >= 2 {
                // small shear perturbation so the sheets are not exactly uniform
                let mut k = vec![0i64; d];
                k[1] = 1;
                xi_pert.push(ModeEntry {
                    k,
                    comp: 0,
                    re: 0.1 * drift,
                    im: 0.0,
                });
            }
            layer_cfgs.push(LayerConfig {
                weight: 0.5,
                rho_background: 1.0,
                rho_modes: vec![],
                xi_uniform: u.clone(),
                xi_modes: xi_pert.clone(),
            });
            let mirrored: Vec<ModeEntry> = xi_pert
                .iter()
                .map(|m| ModeEntry {
                    re: -m.re,
                    im: -m.im,
                    ..m.clone()
                })
                .collect();
            layer_cfgs.push(LayerConfig {
                weight: 0.5,
                rho_background: 1.0,
                rho_modes: vec![],
                xi_uniform: u.iter().map(|v| -v).collect(),
                xi_modes: mirrored,
            });
            if e0_modes.is_empty() {
                let mut k1 = vec![0i64; d];
                k1[0] = 1;
                // irrotational part along k
                e0_modes.push(ModeEntry {
                    k: k1.clone(),
                    comp: 0,
                    re: 0.0,
                    im: amp,
                });
                if d >= 2 {
                    // solenoidal part orthogonal to k
                    e0_modes.push(ModeEntry {
                        k: k1,
                        comp: 1,
                        re: amp,
                        im: 0.0,
                    });
                }
            }
            if b0_modes.is_empty() && d >= 2 {
                // uniform magnetic field: curl-free, so the solenoidal
                // oscillation amplitude stays O(ε)-uniform (a curl-carrying
                // B0 with no matching current j0 would put an O(1/ε)
                // Klein-Gordon quadrature into εE that no ε-free corrector
                // set can represent)
                b0_modes.push(ModeEntry {
                    k: vec![0i64; d],
                    comp: 0,
                    re: b_amp,
                    im: 0.0,
                });
            }
            scale_inv = true;
        }
        Some(other) => {
            return Err(Error::Config(format!("unknown preset {other:?}")));
        }
    }

    // fields
    let mut e_fixed = SpectralField::zeros(&lat, Rank::Vector);
    apply_modes(&mut e_fixed, &e0_modes, 1.0)?;
    let e0 = if scale_inv {
        e_fixed.scaled(1.0 / eps.get())
    } else {
        e_fixed.clone()
    };
    let mut b0 = SpectralField::zeros(&lat, Rank::Axial);
    apply_modes(&mut b0, &b0_modes, 1.0)?;
    if lat.dim() == 3 {
        // project onto divergence-free part so the data is admissible
        let (irr, sol, _mean) = crate::decomposition::helmholtz_decompose(&{
            let mut v = SpectralField::zeros(&lat, Rank::Vector);
            v.data.copy_from_slice(&b0.data);
            v
        });
        let _ = irr;
        b0.data.copy_from_slice(&sol.data);
    }

    // Gauss correction: ρ gets ε²∇·E0 so the constraint holds exactly
    let gauss_term = if config.init.enforce_gauss {
        let mut g = e0.divergence();
        g.scale(eps.get() * eps.get());
        Some(g)
    } else {
        None
    };

    let mut layers = Vec::new();
    let mut limit_layers = Vec::new();
    for lc in &layer_cfgs {
        let mut rho = SpectralField::zeros(&lat, Rank::Scalar);
        rho.set_coeff(0, lat.zero_mode(), Complex64::new(lc.rho_background * vol, 0.0));
        apply_modes(&mut rho, &lc.rho_modes, 1.0)?;
        let mut xi = SpectralField::zeros(&lat, Rank::Vector);
        for (c, &u) in lc.xi_uniform.iter().enumerate() {
            if c >= lat.vcomp() {
                return Err(Error::Config("xi_uniform has too many components".into()));
            }
            xi.set_coeff(c, lat.zero_mode(), Complex64::new(u * vol, 0.0));
        }
        apply_modes(&mut xi, &lc.xi_modes, 1.0)?;
        limit_layers.push(FluidLayer::new(lc.weight, rho.clone(), xi.clone())?);
        if let Some(g) = &gauss_term {
            rho.add_assign(g);
        }
        layers.push(FluidLayer::new(lc.weight, rho, xi)?);
    }

    Ok(InitialData {
        layers,
        e0,
        b0,
        limit_layers,
        fixed_e: if scale_inv {
            e_fixed
        } else {
            // εE0 → 0: the limit oscillation data vanishes
            SpectralField::zeros(&lat, Rank::Vector)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::gauss_residual;

    const EXAMPLE: &str = r#"
[lattice]
dim = 2
cutoff = 4

[time]
epsilon = 0.1
t_end = 0.5

[init]
preset = "two-stream-sheets"
amplitude = 0.04
drift = 0.2
"#;

    #[test]
    fn config_round_trips_losslessly() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        let text = cfg.to_toml().unwrap();
        let cfg2 = RunConfig::from_toml(&text).unwrap();
        let text2 = cfg2.to_toml().unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn preset_data_satisfies_gauss_exactly() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        let eps = cfg.epsilon().unwrap();
        let data = build_initial(&cfg, eps).unwrap();
        let g = gauss_residual(&data.e0, &data.layers, eps).unwrap();
        assert!(g.relative < 1e-12, "gauss {g:?}");
    }

    #[test]
    fn quiescent_preset_is_truly_quiescent() {
        let toml = r#"
[lattice]
dim = 1
cutoff = 2

[time]
epsilon = 0.2
t_end = 0.1

[init]
preset = "quiescent"
"#;
        let cfg = RunConfig::from_toml(toml).unwrap();
        let data = build_initial(&cfg, cfg.epsilon().unwrap()).unwrap();
        assert_eq!(data.layers.len(), 1);
        assert!(data.e0.max_coeff() == 0.0);
        assert!(data.layers[0].xi.max_coeff() == 0.0);
    }

    #[test]
    fn unknown_preset_rejected() {
        let toml = r#"
[lattice]
dim = 2
cutoff = 2

[time]
epsilon = 0.1
t_end = 0.1

[init]
preset = "warp-drive"
"#;
        let cfg = RunConfig::from_toml(toml).unwrap();
        assert!(build_initial(&cfg, cfg.epsilon().unwrap()).is_err());
    }

    #[test]
    fn stride_respects_samples_per_window() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        let stride = cfg.stride_steps();
        let dt = cfg.time.dt_value();
        let window = std::f64::consts::TAU * cfg.time.epsilon;
        assert!(window / (stride as f64 * dt) >= 64.0);
    }
}
