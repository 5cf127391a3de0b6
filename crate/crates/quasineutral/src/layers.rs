//! The multifluid representation: monokinetic layers, relativistic
//! kinematics, and velocity moments.
//!
//! A layer Θ carries a weight μ_Θ, a density ρ_Θ and a momentum field ξ_Θ.
//! The kinetic distribution is the superposition Σ μ_Θ ρ_Θ δ(ξ - ξ_Θ); its
//! moments are ρ = Σ μ_Θ ρ_Θ and j = Σ μ_Θ ρ_Θ v(ξ_Θ) with the relativistic
//! velocity map v(ξ) = ξ / √(1 + ε²|ξ|²).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{GridField, Rank, SpectralField};
use crate::lattice::Lattice;

/// The quasineutrality parameter ε ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(eps: f64) -> Result<Epsilon> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0,1], got {eps}")));
        }
        Ok(Epsilon(eps))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// One monokinetic fluid sheet.
#[derive(Debug, Clone)]
pub struct FluidLayer {
    /// Probability mass μ_Θ of this layer.
    pub weight: f64,
    /// Scalar density ρ_Θ.
    pub rho: SpectralField,
    /// Momentum field ξ_Θ (d-vector).
    pub xi: SpectralField,
}

impl FluidLayer {
    pub fn new(weight: f64, rho: SpectralField, xi: SpectralField) -> Result<FluidLayer> {
        if rho.rank() != Rank::Scalar || xi.rank() != Rank::Vector {
            return Err(Error::ComponentMismatch {
                want: rho.lattice().vcomp(),
                got: xi.ncomp(),
            });
        }
        if rho.lattice() != xi.lattice() {
            return Err(Error::LatticeMismatch);
        }
        Ok(FluidLayer { weight, rho, xi })
    }

    /// Quiescent layer: ρ ≡ 1, ξ ≡ 0.
    pub fn quiescent(lattice: &Arc<Lattice>, weight: f64) -> FluidLayer {
        let mut rho = SpectralField::zeros(lattice, Rank::Scalar);
        rho.set_coeff(0, lattice.zero_mode(), num_complex::Complex64::new(lattice.volume(), 0.0));
        FluidLayer {
            weight,
            rho,
            xi: SpectralField::zeros(lattice, Rank::Vector),
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        self.rho.lattice()
    }

    /// Minimum of ρ_Θ on the physical grid (positivity monitor).
    pub fn min_density(&self) -> Result<f64> {
        let vals = self.rho.values()?;
        Ok(vals.component(0).iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Checks that layer weights sum to one (the measure μ is a probability).
pub fn check_weights(layers: &[FluidLayer], tol: f64) -> Result<()> {
    let s: f64 = layers.iter().map(|l| l.weight).sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::Config(format!("layer weights sum to {s}, expected 1")));
    }
    Ok(())
}

/// Relativistic velocity v = ξ / √(1 + ε²|ξ|²), pointwise on a value grid.
pub fn relativistic_velocity(xi: &GridField, eps: Epsilon) -> GridField {
    let e2 = eps.get() * eps.get();
    let npts = xi.npts();
    let d = xi.ncomp();
    let mut out = xi.clone();
    for p in 0..npts {
        let mut q = 0.0;
        for c in 0..d {
            let v = xi.value(c, p);
            q += v * v;
        }
        let inv = 1.0 / (1.0 + e2 * q).sqrt();
        for c in 0..d {
            out.component_mut(c)[p] = xi.value(c, p) * inv;
        }
    }
    out
}

/// λ(ξ) = ∇_ξ(v(ξ) - ξ) at a single point:
/// Id ((1+ε²|ξ|²)^{-1/2} - 1) - ε² (ξ⊗ξ)(1+ε²|ξ|²)^{-3/2}.
pub fn velocity_remainder_jacobian(xi: &[f64], eps: Epsilon) -> Vec<f64> {
    let d = xi.len();
    let e2 = eps.get() * eps.get();
    let q: f64 = xi.iter().map(|v| v * v).sum();
    let g = 1.0 / (1.0 + e2 * q).sqrt();
    let g3 = g * g * g;
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut v = -e2 * xi[i] * xi[j] * g3;
            if i == j {
                v += g - 1.0;
            }
            m[i * d + j] = v;
        }
    }
    m
}

/// Velocity moments (ρ, j) of a layer family. Both outputs are truncated to
/// the mode cube; the cubic ρ v(ξ) product is evaluated pointwise on the
/// padded grid.
pub fn moments(layers: &[FluidLayer], eps: Epsilon) -> Result<(SpectralField, SpectralField)> {
    let lat = layers
        .first()
        .ok_or_else(|| Error::Config("no layers".into()))?
        .lattice()
        .clone();
    let mut rho = SpectralField::zeros(&lat, Rank::Scalar);
    let mut cur = GridField::zeros(&lat, lat.pad_grid(), lat.vcomp());
    for layer in layers {
        if layer.lattice() != &lat {
            return Err(Error::LatticeMismatch);
        }
        rho.axpy(layer.weight, &layer.rho);
        let rho_v = layer.rho.pad_values()?;
        let xi_v = layer.xi.pad_values()?;
        let vel = relativistic_velocity(&xi_v, eps);
        for c in 0..lat.vcomp() {
            let dst = cur.component_mut(c);
            for p in 0..dst.len() {
                dst[p] += layer.weight * rho_v.value(0, p) * vel.value(c, p);
            }
        }
    }
    let j = cur.to_spectral(Rank::Vector)?;
    Ok((rho, j))
}

/// Right-hand sides of one layer's continuity and momentum equations with
/// frozen electromagnetic fields:
///
/// ```text
///   ∂t ρ = -∇·(ρ v(ξ)),      ∂t ξ = -(v(ξ)·∇)ξ + E + v(ξ) ∧ B.
/// ```
///
/// E is a d-vector field, B an axial field; all products are evaluated on
/// the padded grid and truncated.
pub fn fluid_rhs(
    layer: &FluidLayer,
    e_field: &SpectralField,
    b_field: &SpectralField,
    eps: Epsilon,
) -> Result<(SpectralField, SpectralField)> {
    let lat = layer.lattice().clone();
    if e_field.lattice() != &lat || b_field.lattice() != &lat {
        return Err(Error::LatticeMismatch);
    }
    if e_field.rank() != Rank::Vector || b_field.rank() != Rank::Axial {
        return Err(Error::ComponentMismatch {
            want: lat.vcomp(),
            got: e_field.ncomp(),
        });
    }
    let d = lat.vcomp();
    let npad = lat.num_pad_points();

    let rho_v = layer.rho.pad_values()?;
    let xi_v = layer.xi.pad_values()?;
    let vel = relativistic_velocity(&xi_v, eps);
    let b_v = b_field.pad_values()?;

    // continuity: flux ρ v, divergence taken spectrally after truncation
    let mut flux = GridField::zeros(&lat, lat.pad_grid(), d);
    for c in 0..d {
        let dst = flux.component_mut(c);
        for p in 0..npad {
            dst[p] = rho_v.value(0, p) * vel.value(c, p);
        }
    }
    let drho = flux.to_spectral(Rank::Vector)?.divergence().scaled(-1.0);

    // momentum: -(v·∇)ξ + E + v ∧ B
    let mut adv = GridField::zeros(&lat, lat.pad_grid(), d);
    for c in 0..d {
        for ax in 0..d {
            let dxi = layer.xi.derivative(ax);
            let mut comp = SpectralField::zeros(&lat, Rank::Scalar);
            comp.component_mut(0).copy_from_slice(dxi.component(c));
            let dvals = comp.pad_values()?;
            let dst = adv.component_mut(c);
            for p in 0..npad {
                dst[p] -= vel.value(ax, p) * dvals.value(0, p);
            }
        }
    }
    // wedge v ∧ B with the canonical low-dimension embedding
    match lat.dim() {
        1 => {}
        2 => {
            let b = b_v.component(0);
            for p in 0..npad {
                let vx = vel.value(0, p);
                let vy = vel.value(1, p);
                adv.component_mut(0)[p] += vy * b[p];
                adv.component_mut(1)[p] -= vx * b[p];
            }
        }
        3 => {
            for p in 0..npad {
                let v = [vel.value(0, p), vel.value(1, p), vel.value(2, p)];
                let b = [b_v.value(0, p), b_v.value(1, p), b_v.value(2, p)];
                adv.component_mut(0)[p] += v[1] * b[2] - v[2] * b[1];
                adv.component_mut(1)[p] += v[2] * b[0] - v[0] * b[2];
                adv.component_mut(2)[p] += v[0] * b[1] - v[1] * b[0];
            }
        }
        _ => unreachable!(),
    }
    let mut dxi = adv.to_spectral(Rank::Vector)?;
    dxi.add_assign(e_field);
    Ok((drho, dxi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rand_field(lat: &Arc<Lattice>, rank: Rank, amp: f64, seed: u64) -> SpectralField {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(lat, rank);
        for c in 0..f.ncomp() {
            for i in 0..lat.num_modes() {
                let k = lat.mode(i);
                if k == [0, 0, 0] {
                    f.set_coeff(c, i, Complex64::new(amp * rng.gen_range(-1.0..1.0), 0.0));
                } else {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
                    f.set_coeff(c, i, v);
                    f.set_coeff(c, lat.conj_mode(i), v.conj());
                }
            }
        }
        f
    }

    #[test]
    fn velocity_of_zero_is_zero() {
        let lat = Lattice::new(2, 2, 5).unwrap();
        let xi = GridField::zeros(&lat, lat.grid(), 2);
        let v = relativistic_velocity(&xi, Epsilon::new(0.5).unwrap());
        assert!(v.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_momentum_at_eps_one_gives_inverse_sqrt2() {
        let lat = Lattice::new(1, 1, 3).unwrap();
        let mut xi = GridField::zeros(&lat, lat.grid(), 1);
        for p in 0..xi.npts() {
            xi.component_mut(0)[p] = 1.0;
        }
        let v = relativistic_velocity(&xi, Epsilon::new(1.0).unwrap());
        for p in 0..v.npts() {
            assert!((v.value(0, p) - 1.0 / 2.0f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_is_zero_at_origin_and_symmetric() {
        let eps = Epsilon::new(0.3).unwrap();
        let m0 = velocity_remainder_jacobian(&[0.0, 0.0, 0.0], eps);
        assert!(m0.iter().all(|&x| x == 0.0));
        let m = velocity_remainder_jacobian(&[0.4, -1.2, 0.7], eps);
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i * 3 + j] - m[j * 3 + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        // central differences of v(ξ) - ξ at a random point, ε = 0.3, h = 1e-5
        let eps = Epsilon::new(0.3).unwrap();
        let xi = [0.8, -0.35, 1.4];
        let h = 1e-5;
        let lam = velocity_remainder_jacobian(&xi, eps);
        let vfun = |y: &[f64; 3]| -> [f64; 3] {
            let q: f64 = y.iter().map(|v| v * v).sum();
            let g = 1.0 / (1.0 + eps.get() * eps.get() * q).sqrt();
            [y[0] * g - y[0], y[1] * g - y[1], y[2] * g - y[2]]
        };
        for j in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p[j] += h;
            m[j] -= h;
            let fp = vfun(&p);
            let fm = vfun(&m);
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!(
                    (lam[i * 3 + j] - fd).abs() < 1e-6,
                    "entry ({i},{j}): {} vs {}",
                    lam[i * 3 + j],
                    fd
                );
            }
        }
    }

    #[test]
    fn quiescent_moments() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let layers = [FluidLayer::quiescent(&lat, 1.0)];
        let (rho, j) = moments(&layers, Epsilon::new(0.1).unwrap()).unwrap();
        let zero = lat.zero_mode();
        assert!((rho.coeff(0, zero).re - lat.volume()).abs() < 1e-12);
        assert!(j.max_coeff() < 1e-12);
    }

    #[test]
    fn counterstreaming_sheets_carry_no_net_current_at_eps0_limit() {
        // two equal-weight monokinetic sheets ξ = ±u with ρ ≡ 1: j ≡ 0 at
        // ε = 0 exactly; the relativistic map is odd, so this holds for any ε.
        let lat = Lattice::new(2, 2, 5).unwrap();
        let mut up = FluidLayer::quiescent(&lat, 0.5);
        let mut dn = FluidLayer::quiescent(&lat, 0.5);
        let u = [0.3, -0.2];
        for (c, &uc) in u.iter().enumerate() {
            up.xi
                .set_coeff(c, lat.zero_mode(), Complex64::new(uc * lat.volume(), 0.0));
            dn.xi
                .set_coeff(c, lat.zero_mode(), Complex64::new(-uc * lat.volume(), 0.0));
        }
        let (_, j) = moments(&[up, dn], Epsilon::new(0.2).unwrap()).unwrap();
        assert!(j.max_coeff() < 1e-12);
    }

    #[test]
    fn moments_match_pointwise_quadrature_oracle() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let eps = Epsilon::new(0.25).unwrap();
        let mut layers = Vec::new();
        for s in 0..2u64 {
            let rho = {
                let mut f = rand_field(&lat, Rank::Scalar, 0.1, 100 + s);
                let z = lat.zero_mode();
                let v = f.coeff(0, z);
                f.set_coeff(0, z, v + Complex64::new(lat.volume(), 0.0));
                f
            };
            let xi = rand_field(&lat, Rank::Vector, 0.2, 200 + s);
            layers.push(FluidLayer::new(0.5, rho, xi).unwrap());
        }
        let (rho, j) = moments(&layers, eps).unwrap();

        // oracle: raw loops on the padded grid, independent accumulation
        let m = lat.pad_grid();
        let npts = lat.num_pad_points();
        let mut cur = vec![0.0f64; 2 * npts];
        for layer in &layers {
            let rv = layer.rho.pad_values().unwrap();
            let xv = layer.xi.pad_values().unwrap();
            for p in 0..npts {
                let x0 = xv.value(0, p);
                let x1 = xv.value(1, p);
                let g = 1.0 / (1.0 + eps.get() * eps.get() * (x0 * x0 + x1 * x1)).sqrt();
                cur[p] += layer.weight * rv.value(0, p) * x0 * g;
                cur[npts + p] += layer.weight * rv.value(0, p) * x1 * g;
            }
        }
        let oracle = GridField {
            lattice: lat.clone(),
            grid: m,
            ncomp: 2,
            data: cur,
        }
        .to_spectral(Rank::Vector)
        .unwrap();
        let scale = oracle.max_coeff().max(1.0);
        for c in 0..2 {
            for i in 0..lat.num_modes() {
                assert!((oracle.coeff(c, i) - j.coeff(c, i)).norm() < 1e-12 * scale);
            }
        }
        // density moment is linear: Σ weights · ρ_Θ
        let mut expect = SpectralField::zeros(&lat, Rank::Scalar);
        for layer in &layers {
            expect.axpy(layer.weight, &layer.rho);
        }
        assert!(expect.sub(&rho).max_coeff() < 1e-13);
    }

    #[test]
    fn equilibrium_rhs_vanishes() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let layer = FluidLayer::quiescent(&lat, 1.0);
        let e = SpectralField::zeros(&lat, Rank::Vector);
        let b = rand_field(&lat, Rank::Axial, 0.4, 77);
        let (drho, dxi) = fluid_rhs(&layer, &e, &b, Epsilon::new(0.2).unwrap()).unwrap();
        assert!(drho.max_coeff() < 1e-12);
        assert!(dxi.max_coeff() < 1e-12);
    }

    #[test]
    fn constant_velocity_transport() {
        // ξ ≡ u constant, E = B = 0: dρ/dt = -v(u)·∇ρ.
        let lat = Lattice::new(2, 3, 7).unwrap();
        let eps = Epsilon::new(0.3).unwrap();
        let u = [0.5, -0.25];
        let mut rho = SpectralField::zeros(&lat, Rank::Scalar);
        rho.set_coeff(0, lat.zero_mode(), Complex64::new(lat.volume(), 0.0));
        rho.set_mode_pair(0, &[1, 2, 0], Complex64::new(0.05, -0.02)).unwrap();
        let mut xi = SpectralField::zeros(&lat, Rank::Vector);
        for (c, &uc) in u.iter().enumerate() {
            xi.set_coeff(c, lat.zero_mode(), Complex64::new(uc * lat.volume(), 0.0));
        }
        let layer = FluidLayer::new(1.0, rho.clone(), xi).unwrap();
        let e = SpectralField::zeros(&lat, Rank::Vector);
        let b = SpectralField::zeros(&lat, Rank::Axial);
        let (drho, dxi) = fluid_rhs(&layer, &e, &b, eps).unwrap();
        assert!(dxi.max_coeff() < 1e-11);
        let g = 1.0 / (1.0 + eps.get() * eps.get() * (u[0] * u[0] + u[1] * u[1])).sqrt();
        let mut expect = SpectralField::zeros(&lat, Rank::Scalar);
        for ax in 0..2 {
            expect.axpy(-u[ax] * g, &rho.derivative(ax));
        }
        assert!(expect.sub(&drho).max_coeff() < 1e-11);
    }

    #[test]
    fn fluid_rhs_matches_pointwise_oracle() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let eps = Epsilon::new(0.2).unwrap();
        let rho = {
            let mut f = rand_field(&lat, Rank::Scalar, 0.05, 31);
            let z = lat.zero_mode();
            let v = f.coeff(0, z);
            f.set_coeff(0, z, v + Complex64::new(lat.volume(), 0.0));
            f
        };
        let xi = rand_field(&lat, Rank::Vector, 0.15, 32);
        let e = rand_field(&lat, Rank::Vector, 0.3, 33);
        let b = rand_field(&lat, Rank::Axial, 0.4, 34);
        let layer = FluidLayer::new(1.0, rho.clone(), xi.clone()).unwrap();
        let (drho, dxi) = fluid_rhs(&layer, &e, &b, eps).unwrap();

        // independent evaluation: raw physical-space loops on the padded grid
        let npts = lat.num_pad_points();
        let rv = rho.pad_values().unwrap();
        let xv = xi.pad_values().unwrap();
        let bv = b.pad_values().unwrap();
        let e2 = eps.get() * eps.get();
        let mut flux = vec![0.0; 2 * npts];
        let mut mom = vec![0.0; 2 * npts];
        // spatial derivatives of ξ components, evaluated on the pad grid
        let mut dxi_vals = Vec::new();
        for c in 0..2 {
            for ax in 0..2 {
                let mut comp = SpectralField::zeros(&lat, Rank::Scalar);
                comp.component_mut(0)
                    .copy_from_slice(xi.derivative(ax).component(c));
                dxi_vals.push(comp.pad_values().unwrap());
            }
        }
        for p in 0..npts {
            let x0 = xv.value(0, p);
            let x1 = xv.value(1, p);
            let g = 1.0 / (1.0 + e2 * (x0 * x0 + x1 * x1)).sqrt();
            let v = [x0 * g, x1 * g];
            flux[p] = rv.value(0, p) * v[0];
            flux[npts + p] = rv.value(0, p) * v[1];
            for c in 0..2 {
                let adv = v[0] * dxi_vals[c * 2].value(0, p) + v[1] * dxi_vals[c * 2 + 1].value(0, p);
                mom[c * npts + p] = -adv;
            }
            let bz = bv.value(0, p);
            mom[p] += v[1] * bz;
            mom[npts + p] -= v[0] * bz;
        }
        let flux_s = GridField {
            lattice: lat.clone(),
            grid: lat.pad_grid(),
            ncomp: 2,
            data: flux,
        }
        .to_spectral(Rank::Vector)
        .unwrap();
        let drho_o = flux_s.divergence().scaled(-1.0);
        let mut dxi_o = GridField {
            lattice: lat.clone(),
            grid: lat.pad_grid(),
            ncomp: 2,
            data: mom,
        }
        .to_spectral(Rank::Vector)
        .unwrap();
        dxi_o.add_assign(&e);

        assert!(drho_o.sub(&drho).max_coeff() < 1e-11);
        assert!(dxi_o.sub(&dxi).max_coeff() < 1e-11);
    }
}
