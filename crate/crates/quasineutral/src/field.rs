//! Spectral and grid representations of scalar, vector and axial fields.
//!
//! A `SpectralField` stores the complex coefficients ĝ(k) on the lattice's
//! mode cube, one block per tensor component. Vector fields carry `dim`
//! components. Axial fields are curl-type objects: three components in 3D,
//! a single out-of-plane component in 2D, and a single identically-zero slot
//! in 1D (where every wedge product vanishes).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Tensor character of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Axial,
}

/// Fourier coefficients of a field on the mode cube.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub(crate) lattice: Arc<Lattice>,
    pub(crate) rank: Rank,
    /// Component-major: data[c * nmodes + mode]
    pub(crate) data: Vec<Complex64>,
    /// Claims Hermitian symmetry ĝ(-k) = conj ĝ(k) (real physical field).
    pub(crate) real: bool,
}

/// Point values of a real field on an m-point grid (used for products).
#[derive(Debug, Clone)]
pub struct GridField {
    pub(crate) lattice: Arc<Lattice>,
    pub(crate) grid: usize,
    pub(crate) ncomp: usize,
    /// Component-major: data[c * npts + point]
    pub(crate) data: Vec<f64>,
}

pub(crate) fn rank_comp(lattice: &Lattice, rank: Rank) -> usize {
    match rank {
        Rank::Scalar => 1,
        Rank::Vector => lattice.vcomp(),
        Rank::Axial => lattice.acomp(),
    }
}

impl SpectralField {
    pub fn zeros(lattice: &Arc<Lattice>, rank: Rank) -> SpectralField {
        let ncomp = rank_comp(lattice, rank);
        SpectralField {
            lattice: lattice.clone(),
            rank,
            data: vec![Complex64::new(0.0, 0.0); ncomp * lattice.num_modes()],
            real: true,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn ncomp(&self) -> usize {
        rank_comp(&self.lattice, self.rank)
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeff(&self, comp: usize, mode: usize) -> Complex64 {
        self.data[comp * self.lattice.num_modes() + mode]
    }

    pub fn set_coeff(&mut self, comp: usize, mode: usize, v: Complex64) {
        self.data[comp * self.lattice.num_modes() + mode] = v;
    }

    /// Set the coefficient at wavevector k together with its Hermitian
    /// partner at -k, keeping the field real.
    pub fn set_mode_pair(&mut self, comp: usize, k: &[i64; 3], v: Complex64) -> Result<()> {
        let idx = self
            .lattice
            .mode_index(k)
            .ok_or_else(|| Error::Config(format!("mode {k:?} outside cutoff")))?;
        let jdx = self.lattice.conj_mode(idx);
        self.set_coeff(comp, idx, v);
        if jdx != idx {
            self.set_coeff(comp, jdx, v.conj());
        } else if v.im != 0.0 {
            return Err(Error::Config("k = 0 coefficient of a real field must be real".into()));
        }
        Ok(())
    }

    pub fn component(&self, comp: usize) -> &[Complex64] {
        let n = self.lattice.num_modes();
        &self.data[comp * n..(comp + 1) * n]
    }

    /// All coefficients, component-major.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.data
    }

    pub fn component_mut(&mut self, comp: usize) -> &mut [Complex64] {
        let n = self.lattice.num_modes();
        &mut self.data[comp * n..(comp + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of Hermitian symmetry over all modes and components.
    pub fn hermitian_error(&self) -> f64 {
        let n = self.lattice.num_modes();
        let mut worst = 0.0f64;
        for c in 0..self.ncomp() {
            for i in 0..n {
                let j = self.lattice.conj_mode(i);
                let d = self.data[c * n + i] - self.data[c * n + j].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn add_assign(&mut self, other: &SpectralField) {
        debug_assert_eq!(self.rank, other.rank);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.real &= other.real;
    }

    /// self += s * other
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        debug_assert_eq!(self.rank, other.rank);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        self.real &= other.real;
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out.real &= other.real;
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    /// Max modulus over modes/components (useful as a blow-up monitor).
    pub fn max_coeff(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// L² norm of the physical field via Parseval under this crate's
    /// transform convention: ‖g‖²_{L²} = (2π)^{-d} Σ_k |ĝ(k)|².
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        (s / self.lattice.volume()).sqrt()
    }

    /// Sobolev H^s norm (Σ_k (1+|k|²)^s |ĝ(k)|²)^{1/2}, all components summed.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let n = self.lattice.num_modes();
        let mut acc = 0.0;
        for c in 0..self.ncomp() {
            for i in 0..n {
                let w = (1.0 + self.lattice.mode_norm_sq(i)).powf(s);
                acc += w * self.data[c * n + i].norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Differentiate along `axis`: multiplication by i k_axis.
    pub fn derivative(&self, axis: usize) -> SpectralField {
        assert!(axis < self.lattice.dim());
        let n = self.lattice.num_modes();
        let mut out = self.clone();
        for c in 0..self.ncomp() {
            for i in 0..n {
                let k = self.lattice.mode(i)[axis] as f64;
                let v = out.data[c * n + i];
                out.data[c * n + i] = Complex64::new(-k * v.im, k * v.re);
            }
        }
        out
    }

    /// Gradient of a scalar field.
    pub fn gradient(&self) -> SpectralField {
        assert_eq!(self.rank, Rank::Scalar);
        let mut out = SpectralField::zeros(&self.lattice, Rank::Vector);
        out.real = self.real;
        let n = self.lattice.num_modes();
        for ax in 0..self.lattice.dim() {
            let d = self.derivative(ax);
            out.data[ax * n..(ax + 1) * n].copy_from_slice(&d.data[..n]);
        }
        out
    }

    /// Divergence of a vector field.
    pub fn divergence(&self) -> SpectralField {
        assert_eq!(self.rank, Rank::Vector);
        let n = self.lattice.num_modes();
        let mut out = SpectralField::zeros(&self.lattice, Rank::Scalar);
        out.real = self.real;
        for ax in 0..self.lattice.dim() {
            for i in 0..n {
                let k = self.lattice.mode(i)[ax] as f64;
                let v = self.data[ax * n + i];
                out.data[i] += Complex64::new(-k * v.im, k * v.re);
            }
        }
        out
    }

    /// Curl of a vector field, producing an axial field.
    pub fn curl(&self) -> SpectralField {
        assert_eq!(self.rank, Rank::Vector);
        let lat = &self.lattice;
        let n = lat.num_modes();
        let mut out = SpectralField::zeros(lat, Rank::Axial);
        out.real = self.real;
        match lat.dim() {
            1 => {}
            2 => {
                // (∇×v)_z = ∂x v_y - ∂y v_x
                for i in 0..n {
                    let k = lat.mode(i);
                    let ik0 = Complex64::new(0.0, k[0] as f64);
                    let ik1 = Complex64::new(0.0, k[1] as f64);
                    out.data[i] = ik0 * self.data[n + i] - ik1 * self.data[i];
                }
            }
            3 => {
                for i in 0..n {
                    let k = lat.mode(i);
                    let ik = [
                        Complex64::new(0.0, k[0] as f64),
                        Complex64::new(0.0, k[1] as f64),
                        Complex64::new(0.0, k[2] as f64),
                    ];
                    let v = [self.data[i], self.data[n + i], self.data[2 * n + i]];
                    out.data[i] = ik[1] * v[2] - ik[2] * v[1];
                    out.data[n + i] = ik[2] * v[0] - ik[0] * v[2];
                    out.data[2 * n + i] = ik[0] * v[1] - ik[1] * v[0];
                }
            }
            _ => unreachable!(),
        }
        out
    }

    /// Curl of an axial field, producing a vector field. In 2D this is the
    /// canonical embedding ∇×(0,0,b) = (∂y b, -∂x b); in 1D it vanishes.
    pub fn curl_axial(&self) -> SpectralField {
        assert_eq!(self.rank, Rank::Axial);
        let lat = &self.lattice;
        let n = lat.num_modes();
        let mut out = SpectralField::zeros(lat, Rank::Vector);
        out.real = self.real;
        match lat.dim() {
            1 => {}
            2 => {
                for i in 0..n {
                    let k = lat.mode(i);
                    let ik0 = Complex64::new(0.0, k[0] as f64);
                    let ik1 = Complex64::new(0.0, k[1] as f64);
                    out.data[i] = ik1 * self.data[i];
                    out.data[n + i] = -(ik0 * self.data[i]);
                }
            }
            3 => {
                for i in 0..n {
                    let k = lat.mode(i);
                    let ik = [
                        Complex64::new(0.0, k[0] as f64),
                        Complex64::new(0.0, k[1] as f64),
                        Complex64::new(0.0, k[2] as f64),
                    ];
                    let b = [self.data[i], self.data[n + i], self.data[2 * n + i]];
                    out.data[i] = ik[1] * b[2] - ik[2] * b[1];
                    out.data[n + i] = ik[2] * b[0] - ik[0] * b[2];
                    out.data[2 * n + i] = ik[0] * b[1] - ik[1] * b[0];
                }
            }
            _ => unreachable!(),
        }
        out
    }

    /// Point values on the physical N-grid (real part; the imaginary part of
    /// a Hermitian field vanishes identically).
    pub fn values(&self) -> Result<GridField> {
        self.values_on(self.lattice.grid())
    }

    /// Point values on the padded de-aliasing grid.
    pub fn pad_values(&self) -> Result<GridField> {
        self.values_on(self.lattice.pad_grid())
    }

    fn values_on(&self, m: usize) -> Result<GridField> {
        if !self.is_finite() {
            return Err(Error::NonFinite("inverse transform input"));
        }
        let npts = m.pow(self.lattice.dim() as u32);
        let ncomp = self.ncomp();
        let mut data = vec![0.0; ncomp * npts];
        for c in 0..ncomp {
            let vals = self.lattice.coeffs_to_values(self.component(c), m)?;
            for (o, v) in data[c * npts..(c + 1) * npts].iter_mut().zip(vals) {
                *o = v.re;
            }
        }
        Ok(GridField {
            lattice: self.lattice.clone(),
            grid: m,
            ncomp,
            data,
        })
    }

    /// Complex point values on the physical grid (for non-real fields, e.g.
    /// after modulation by T operators).
    pub fn complex_values(&self) -> Result<Vec<Complex64>> {
        let m = self.lattice.grid();
        let npts = m.pow(self.lattice.dim() as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); self.ncomp() * npts];
        for c in 0..self.ncomp() {
            let vals = self.lattice.coeffs_to_values(self.component(c), m)?;
            out[c * npts..(c + 1) * npts].copy_from_slice(&vals);
        }
        Ok(out)
    }
}

impl GridField {
    pub fn zeros(lattice: &Arc<Lattice>, grid: usize, ncomp: usize) -> GridField {
        let npts = grid.pow(lattice.dim() as u32);
        GridField {
            lattice: lattice.clone(),
            grid,
            ncomp,
            data: vec![0.0; ncomp * npts],
        }
    }

    pub fn from_samples(lattice: &Arc<Lattice>, ncomp: usize, data: Vec<f64>) -> Result<GridField> {
        let npts = lattice.num_points();
        if data.len() != ncomp * npts {
            return Err(Error::SizeMismatch {
                want: ncomp * npts,
                got: data.len(),
            });
        }
        Ok(GridField {
            lattice: lattice.clone(),
            grid: lattice.grid(),
            ncomp,
            data,
        })
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn npts(&self) -> usize {
        self.grid.pow(self.lattice.dim() as u32)
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.npts();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.npts();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn value(&self, c: usize, p: usize) -> f64 {
        self.data[c * self.npts() + p]
    }

    /// Forward transform with truncation to the mode cube.
    pub fn to_spectral(&self, rank: Rank) -> Result<SpectralField> {
        let want = rank_comp(&self.lattice, rank);
        if want != self.ncomp {
            return Err(Error::ComponentMismatch {
                want,
                got: self.ncomp,
            });
        }
        let n = self.lattice.num_modes();
        let mut out = SpectralField::zeros(&self.lattice, rank);
        for c in 0..self.ncomp {
            let coeffs = self.lattice.values_to_coeffs(self.component(c), self.grid)?;
            out.data[c * n..(c + 1) * n].copy_from_slice(&coeffs);
        }
        Ok(out)
    }
}

/// Forward transform of real samples on the physical N^d grid.
pub fn forward_transform(
    lattice: &Arc<Lattice>,
    samples: &[f64],
    rank: Rank,
) -> Result<SpectralField> {
    let ncomp = rank_comp(lattice, rank);
    let gf = GridField::from_samples(lattice, ncomp, samples.to_vec())?;
    gf.to_spectral(rank)
}

/// Inverse transform to real samples on the physical N^d grid.
pub fn inverse_transform(field: &SpectralField) -> Result<GridField> {
    field.values()
}

/// De-aliased pointwise product of two scalar fields (3/2-rule padding).
pub fn dealiased_product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    if a.lattice != b.lattice {
        return Err(Error::LatticeMismatch);
    }
    let av = a.pad_values()?;
    let bv = b.pad_values()?;
    let mut out = GridField::zeros(&a.lattice, a.lattice.pad_grid(), 1);
    for p in 0..out.npts() {
        out.data[p] = av.data[p] * bv.data[p];
    }
    out.to_spectral(Rank::Scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TAU;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_real_field(lat: &Arc<Lattice>, rank: Rank, seed: u64) -> SpectralField {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(lat, rank);
        for c in 0..f.ncomp() {
            for i in 0..lat.num_modes() {
                let k = lat.mode(i);
                if k == [0, 0, 0] {
                    f.set_coeff(c, i, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
                } else {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let j = lat.conj_mode(i);
                    f.set_coeff(c, i, v);
                    f.set_coeff(c, j, v.conj());
                }
            }
        }
        f
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        for dim in 1..=3usize {
            let lat = Lattice::new(dim, 2, 5).unwrap();
            let c = 0.7;
            let samples = vec![c; lat.num_points()];
            let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
            let zero = lat.zero_mode();
            let expect = c * lat.volume();
            assert!((f.coeff(0, zero).re - expect).abs() < 1e-12 * expect.abs());
            for i in 0..lat.num_modes() {
                if i != zero {
                    assert!(f.coeff(0, i).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cosine_has_expected_coefficients() {
        // g(x) = cos(x1) in d = 1: ĝ(±1) = π.
        let lat = Lattice::new(1, 3, 8).unwrap();
        let samples: Vec<f64> = (0..lat.num_points())
            .map(|j| lat.point(j, lat.grid())[0].cos())
            .collect();
        let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
        let ip = lat.mode_index(&[1, 0, 0]).unwrap();
        let im = lat.mode_index(&[-1, 0, 0]).unwrap();
        assert!((f.coeff(0, ip).re - std::f64::consts::PI).abs() < 1e-12);
        assert!((f.coeff(0, im).re - std::f64::consts::PI).abs() < 1e-12);
        assert!(f.coeff(0, ip).im.abs() < 1e-12);
    }

    #[test]
    fn round_trip_is_identity_for_random_fields() {
        for (dim, cutoff, grid) in [(1usize, 6usize, 16usize), (2, 3, 8), (3, 2, 6)] {
            let lat = Lattice::new(dim, cutoff, grid).unwrap();
            let f = random_real_field(&lat, Rank::Scalar, 42 + dim as u64);
            let vals = f.values().unwrap();
            let back = vals.to_spectral(Rank::Scalar).unwrap();
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..lat.num_modes() {
                worst = worst.max((back.coeff(0, i) - f.coeff(0, i)).norm());
                scale = scale.max(f.coeff(0, i).norm());
            }
            assert!(worst <= 1e-12 * scale.max(1.0), "round trip error {worst}");
        }
    }

    #[test]
    fn hermitian_symmetry_exact_for_real_input() {
        let lat = Lattice::new(2, 4, 9).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let samples: Vec<f64> = (0..lat.num_points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
        assert_eq!(f.hermitian_error(), 0.0);
    }

    #[test]
    fn zero_field_inverts_to_zero() {
        let lat = Lattice::new(2, 2, 5).unwrap();
        let f = SpectralField::zeros(&lat, Rank::Vector);
        let v = f.values().unwrap();
        assert!(v.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_mode_pair_gives_cosine_profile() {
        // ĝ(k0) = a with Hermitian partner -> g(x) = 2 (2π)^{-d} Re(a e^{ik0·x})
        let lat = Lattice::new(2, 3, 7).unwrap();
        let mut f = SpectralField::zeros(&lat, Rank::Scalar);
        let a = Complex64::new(0.3, -1.1);
        f.set_mode_pair(0, &[2, -1, 0], a).unwrap();
        let vals = f.values().unwrap();
        for p in 0..lat.num_points() {
            let x = lat.point(p, lat.grid());
            let phase = 2.0 * x[0] - x[1];
            let expect = 2.0 / lat.volume() * (a * Complex64::new(0.0, phase).exp()).re;
            assert!((vals.value(0, p) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_cosine_is_minus_sine() {
        let lat = Lattice::new(1, 4, 12).unwrap();
        let samples: Vec<f64> = (0..lat.num_points())
            .map(|j| lat.point(j, lat.grid())[0].cos())
            .collect();
        let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
        let d = f.derivative(0);
        let vals = d.values().unwrap();
        for p in 0..lat.num_points() {
            let x = lat.point(p, lat.grid())[0];
            assert!((vals.value(0, p) + x.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let lat = Lattice::new(3, 1, 3).unwrap();
        let samples = vec![2.5; lat.num_points()];
        let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
        let d = f.derivative(2);
        assert!(d.max_coeff() < 1e-13);
    }

    #[test]
    fn dealiased_product_matches_analytic_convolution() {
        // cos(x)·cos(x) = 1/2 + cos(2x)/2; with K ≥ 2 the truncation keeps both.
        let lat = Lattice::new(1, 2, 5).unwrap();
        let samples: Vec<f64> = (0..lat.num_points())
            .map(|j| lat.point(j, lat.grid())[0].cos())
            .collect();
        let f = forward_transform(&lat, &samples, Rank::Scalar).unwrap();
        let p = dealiased_product(&f, &f).unwrap();
        let zero = lat.zero_mode();
        let two = lat.mode_index(&[2, 0, 0]).unwrap();
        let one = lat.mode_index(&[1, 0, 0]).unwrap();
        assert!((p.coeff(0, zero).re - 0.5 * lat.volume()).abs() < 1e-12);
        assert!((p.coeff(0, two).re - 0.25 * lat.volume()).abs() < 1e-12);
        assert!(p.coeff(0, one).norm() < 1e-12);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        for dim in 2..=3usize {
            let lat = Lattice::new(dim, 3, 7).unwrap();
            let phi = random_real_field(&lat, Rank::Scalar, 11);
            let g = phi.gradient();
            let c = g.curl();
            assert!(c.max_coeff() < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn divergence_of_curl_axial_vanishes() {
        for dim in 1..=3usize {
            let lat = Lattice::new(dim, 3, 7).unwrap();
            let b = random_real_field(&lat, Rank::Axial, 13);
            let v = b.curl_axial();
            let d = v.divergence();
            assert!(d.max_coeff() < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn grid_metadata_consistency() {
        let lat = Lattice::new(2, 4, 16).unwrap();
        let x = lat.point(17, lat.grid());
        // point 17 on a 16-grid: row 1, col 1
        assert!((x[0] - TAU / 16.0).abs() < 1e-15);
        assert!((x[1] - TAU / 16.0).abs() < 1e-15);
    }

    mod properties {
        use super::*;
        use crate::decomposition::helmholtz_decompose;
        use proptest::prelude::*;

        fn field_from_samples(dim: usize, cutoff: usize, samples: &[f64]) -> SpectralField {
            let grid = 2 * cutoff + 2;
            let lat = Lattice::new(dim, cutoff, grid).unwrap();
            let npts = lat.num_points();
            let data: Vec<f64> = (0..npts).map(|i| samples[i % samples.len()]).collect();
            forward_transform(&lat, &data, Rank::Scalar).unwrap()
        }

        proptest! {
            #[test]
            fn transform_round_trip_and_hermitian_symmetry(
                dim in 1usize..=2,
                samples in proptest::collection::vec(-10.0f64..10.0, 30..50),
            ) {
                let f = field_from_samples(dim, 3, &samples);
                // real input gives exactly Hermitian coefficients
                prop_assert_eq!(f.hermitian_error(), 0.0);
                // the grid values reproduce after a round trip
                let vals = f.values().unwrap();
                let back = vals.to_spectral(Rank::Scalar).unwrap();
                let scale = f.max_coeff().max(1.0);
                prop_assert!(back.sub(&f).max_coeff() <= 1e-12 * scale);
            }

            #[test]
            fn helmholtz_parts_reconstruct_any_field(
                samples in proptest::collection::vec(-5.0f64..5.0, 60..80),
            ) {
                let lat = Lattice::new(2, 3, 8).unwrap();
                let npts = lat.num_points();
                let mut data = vec![0.0; 2 * npts];
                for (i, v) in data.iter_mut().enumerate() {
                    *v = samples[i % samples.len()];
                }
                let gf = GridField::from_samples(&lat, 2, data).unwrap();
                let e = gf.to_spectral(Rank::Vector).unwrap();
                let (irr, sol, mean) = helmholtz_decompose(&e);
                let mut sum = irr.add(&sol);
                let z = lat.zero_mode();
                for c in 0..2 {
                    let v = sum.coeff(c, z);
                    sum.set_coeff(c, z, v + Complex64::new(mean[c] * lat.volume(), 0.0));
                }
                let scale = e.max_coeff().max(1.0);
                prop_assert!(sum.sub(&e).max_coeff() <= 1e-12 * scale);
            }
        }
    }
}
