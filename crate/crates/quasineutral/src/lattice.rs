//! Mode bookkeeping and discrete Fourier transforms on the torus (R/2πZ)^d.
//!
//! The transform pair follows the convention
//!
//! ```text
//!   Fg(k) = ∫ g(x) e^{-ik·x} dx            (trapezoidal quadrature on N^d points)
//!   g(x)  = (2π)^{-d} Σ_k Fg(k) e^{ik·x}
//! ```
//!
//! so a constant c has Fg(0) = c (2π)^d. The represented mode set is the full
//! cube {k ∈ Z^d : max_i |k_i| ≤ K}; with N ≥ 2K+1 equispaced points per axis
//! the quadrature is exact on that band. Quadratic products of band-limited
//! fields are evaluated on a padded grid with M ≥ 3K+1 points per axis, which
//! removes aliasing in the truncated result (the 3/2 rule).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;

/// Per-axis DFT matrices for one physical grid size.
#[derive(Debug, Clone)]
struct AxisPlan {
    grid: usize,
    /// forward[m * grid + j] = (2π/M) e^{-i k_m x_j}
    forward: Vec<Complex64>,
    /// inverse[j * nmodes + m] = (1/2π) e^{+i k_m x_j}
    inverse: Vec<Complex64>,
}

impl AxisPlan {
    fn build(cutoff: i64, grid: usize) -> AxisPlan {
        let nm = (2 * cutoff + 1) as usize;
        let m = grid;
        let mut forward = vec![Complex64::new(0.0, 0.0); nm * m];
        let mut inverse = vec![Complex64::new(0.0, 0.0); m * nm];
        let fscale = TAU / m as f64;
        let iscale = 1.0 / TAU;
        // Build rows for k >= 0 and mirror k -> -k by conjugation so that
        // Hermitian symmetry of transforms of real data is bitwise exact.
        for k in 0..=cutoff {
            let row_p = (k + cutoff) as usize;
            let row_n = (cutoff - k) as usize;
            for j in 0..m {
                let angle = TAU * ((k as i128 * j as i128).rem_euclid(m as i128) as f64) / m as f64;
                let (s, c) = angle.sin_cos();
                // e^{-i k x_j} = c - i s
                let f = Complex64::new(c, -s) * fscale;
                let b = Complex64::new(c, s) * iscale;
                forward[row_p * m + j] = f;
                forward[row_n * m + j] = f.conj();
                inverse[j * nm + row_p] = b;
                inverse[j * nm + row_n] = b.conj();
            }
        }
        AxisPlan { grid, forward, inverse }
    }
}

/// The truncated Fourier lattice: dimension, mode cutoff, physical grid.
#[derive(Debug)]
pub struct Lattice {
    dim: usize,
    cutoff: i64,
    grid: usize,
    pad: usize,
    modes: Vec<[i64; 3]>,
    conj_index: Vec<usize>,
    plan_grid: AxisPlan,
    plan_pad: AxisPlan,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.cutoff == other.cutoff && self.grid == other.grid
    }
}

impl Lattice {
    /// Build a lattice with `dim` ∈ {1,2,3}, mode cutoff `cutoff` and `grid`
    /// points per axis. Requires `grid ≥ 2*cutoff + 1` so no represented mode
    /// is aliased at rest.
    pub fn new(dim: usize, cutoff: usize, grid: usize) -> Result<Arc<Lattice>> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        let k = cutoff as i64;
        if grid < 2 * cutoff + 1 {
            return Err(Error::Config(format!(
                "grid {grid} too small for cutoff {cutoff} (need ≥ {})",
                2 * cutoff + 1
            )));
        }
        let per_axis = (2 * cutoff + 1) as usize;
        let nmodes = per_axis.pow(dim as u32);
        let mut modes = Vec::with_capacity(nmodes);
        for idx in 0..nmodes {
            let mut rem = idx;
            let mut kv = [0i64; 3];
            for ax in (0..dim).rev() {
                kv[ax] = (rem % per_axis) as i64 - k;
                rem /= per_axis;
            }
            modes.push(kv);
        }
        let pad = (3 * cutoff + 1).max(3);
        let lat = Lattice {
            dim,
            cutoff: k,
            grid,
            pad,
            conj_index: Vec::new(),
            modes,
            plan_grid: AxisPlan::build(k, grid),
            plan_pad: AxisPlan::build(k, pad),
        };
        let mut conj_index = Vec::with_capacity(nmodes);
        for i in 0..nmodes {
            let kv = lat.modes[i];
            let neg = [-kv[0], -kv[1], -kv[2]];
            conj_index.push(lat.mode_index(&neg).expect("mode cube is symmetric"));
        }
        let mut lat = lat;
        lat.conj_index = conj_index;
        Ok(Arc::new(lat))
    }

    /// Lattice with the minimal alias-free grid N = 2K+1.
    pub fn minimal(dim: usize, cutoff: usize) -> Result<Arc<Lattice>> {
        Lattice::new(dim, cutoff, 2 * cutoff + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    /// Physical grid points per axis.
    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Padded (de-aliasing) grid points per axis.
    pub fn pad_grid(&self) -> usize {
        self.pad
    }

    pub fn modes_per_axis(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn num_points(&self) -> usize {
        self.grid.pow(self.dim as u32)
    }

    pub fn num_pad_points(&self) -> usize {
        self.pad.pow(self.dim as u32)
    }

    /// Vector components carried by a velocity/field vector.
    pub fn vcomp(&self) -> usize {
        self.dim
    }

    /// Components of an axial (curl-type) field: 3 in 3D, 1 (out-of-plane)
    /// in 2D, 1 identically-zero slot in 1D.
    pub fn acomp(&self) -> usize {
        if self.dim == 3 {
            3
        } else {
            1
        }
    }

    /// Mode wavevector for a flat mode index (unused axes are zero).
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        self.modes[idx]
    }

    pub fn modes(&self) -> &[[i64; 3]] {
        &self.modes
    }

    /// Flat index of a wavevector, if it is inside the cutoff cube.
    pub fn mode_index(&self, k: &[i64; 3]) -> Option<usize> {
        let per_axis = self.modes_per_axis();
        let mut idx = 0usize;
        for ax in 0..self.dim {
            if k[ax].abs() > self.cutoff {
                return None;
            }
            idx = idx * per_axis + (k[ax] + self.cutoff) as usize;
        }
        for ax in self.dim..3 {
            if k[ax] != 0 {
                return None;
            }
        }
        Some(idx)
    }

    /// Index of -k for mode index `idx`.
    pub fn conj_mode(&self, idx: usize) -> usize {
        self.conj_index[idx]
    }

    pub fn mode_norm_sq(&self, idx: usize) -> f64 {
        let k = self.modes[idx];
        (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
    }

    /// Index of the k = 0 mode.
    pub fn zero_mode(&self) -> usize {
        self.mode_index(&[0, 0, 0]).unwrap()
    }

    /// (2π)^d, the volume of the torus.
    pub fn volume(&self) -> f64 {
        TAU.powi(self.dim as i32)
    }

    /// Physical grid coordinates of flat grid index on an `m`-point grid.
    pub fn point(&self, mut idx: usize, m: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for ax in (0..self.dim).rev() {
            x[ax] = TAU * (idx % m) as f64 / m as f64;
            idx /= m;
        }
        x
    }

    fn plan(&self, m: usize) -> Option<&AxisPlan> {
        if m == self.plan_grid.grid {
            Some(&self.plan_grid)
        } else if m == self.plan_pad.grid {
            Some(&self.plan_pad)
        } else {
            None
        }
    }

    /// Separable application of `mat` (rows_out × rows_in) along `axis`.
    fn apply_axis(
        data: &[Complex64],
        shape: &mut [usize],
        axis: usize,
        mat: &[Complex64],
        rows_out: usize,
    ) -> Vec<Complex64> {
        let rows_in = shape[axis];
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); outer * rows_out * inner];
        for o in 0..outer {
            for r in 0..rows_out {
                let mrow = &mat[r * rows_in..(r + 1) * rows_in];
                let dst = &mut out[(o * rows_out + r) * inner..(o * rows_out + r + 1) * inner];
                for (m, w) in mrow.iter().enumerate() {
                    if w.re == 0.0 && w.im == 0.0 {
                        continue;
                    }
                    let src = &data[(o * rows_in + m) * inner..(o * rows_in + m + 1) * inner];
                    for i in 0..inner {
                        dst[i] += w * src[i];
                    }
                }
            }
        }
        shape[axis] = rows_out;
        out
    }

    /// Forward transform of one real component sampled on the m-point grid.
    pub(crate) fn values_to_coeffs(&self, values: &[f64], m: usize) -> Result<Vec<Complex64>> {
        let plan = self
            .plan(m)
            .ok_or_else(|| Error::Config(format!("no transform plan for grid {m}")))?;
        let npts = m.pow(self.dim as u32);
        if values.len() != npts {
            return Err(Error::SizeMismatch {
                want: npts,
                got: values.len(),
            });
        }
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut shape = vec![m; self.dim];
        for ax in 0..self.dim {
            data = Self::apply_axis(&data, &mut shape, ax, &plan.forward, self.modes_per_axis());
        }
        Ok(data)
    }

    /// Inverse transform of one component to the m-point grid (complex output).
    pub(crate) fn coeffs_to_values(&self, coeffs: &[Complex64], m: usize) -> Result<Vec<Complex64>> {
        let plan = self
            .plan(m)
            .ok_or_else(|| Error::Config(format!("no transform plan for grid {m}")))?;
        if coeffs.len() != self.num_modes() {
            return Err(Error::SizeMismatch {
                want: self.num_modes(),
                got: coeffs.len(),
            });
        }
        let mut data = coeffs.to_vec();
        let mut shape = vec![self.modes_per_axis(); self.dim];
        for ax in 0..self.dim {
            data = Self::apply_axis(&data, &mut shape, ax, &plan.inverse, m);
        }
        Ok(data)
    }
}
