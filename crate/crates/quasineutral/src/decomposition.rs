//! Helmholtz–Hodge splitting of the electric field, Maxwell constraint
//! residuals, and completion of initial data.
//!
//! On the torus a vector field splits as E = E_irr + E_sol + E_mean with
//! Ê_irr(k) ∥ k, k·Ê_sol(k) = 0 (both vanishing at k = 0) and E_mean the
//! spatial mean. The mean is kept as a plain d-vector value, not a k = 0
//! coefficient.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField};
use crate::layers::{moments, Epsilon, FluidLayer};

/// Electromagnetic state: the three-way split of E plus the magnetic field.
#[derive(Debug, Clone)]
pub struct EMState {
    pub e_irr: SpectralField,
    pub e_sol: SpectralField,
    pub e_mean: [f64; 3],
    pub b: SpectralField,
}

/// Initial values and time-derivative seeds consumed by the oscillatory
/// propagators: E parts and ∂t E parts at t = 0.
#[derive(Debug, Clone)]
pub struct PropagatorSeeds {
    pub e_irr0: SpectralField,
    pub dt_e_irr0: SpectralField,
    pub e_sol0: SpectralField,
    pub dt_e_sol0: SpectralField,
    pub e_mean0: [f64; 3],
    pub dt_e_mean0: [f64; 3],
    pub b0: SpectralField,
    pub dt_b0: SpectralField,
}

impl EMState {
    pub fn zeros(lattice: &std::sync::Arc<crate::lattice::Lattice>) -> EMState {
        EMState {
            e_irr: SpectralField::zeros(lattice, Rank::Vector),
            e_sol: SpectralField::zeros(lattice, Rank::Vector),
            e_mean: [0.0; 3],
            b: SpectralField::zeros(lattice, Rank::Axial),
        }
    }

    /// Total electric field with the mean folded back into the k = 0 mode.
    pub fn total_e(&self) -> SpectralField {
        let lat = self.e_irr.lattice().clone();
        let mut e = self.e_irr.add(&self.e_sol);
        let z = lat.zero_mode();
        for c in 0..lat.vcomp() {
            let v = e.coeff(c, z);
            e.set_coeff(c, z, v + Complex64::new(self.e_mean[c] * lat.volume(), 0.0));
        }
        e
    }

    /// Largest |k·B̂(k)| over modes: the ∇·B = 0 monitor. Axial fields in
    /// d < 3 are divergence-free by construction, so this returns 0 there.
    pub fn div_b_max(&self) -> f64 {
        let lat = self.b.lattice();
        if lat.dim() < 3 {
            return 0.0;
        }
        let n = lat.num_modes();
        let mut worst = 0.0f64;
        for i in 0..n {
            let k = lat.mode(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..3 {
                acc += Complex64::new(k[c] as f64, 0.0) * self.b.coeff(c, i);
            }
            worst = worst.max(acc.norm());
        }
        worst
    }
}

/// Split a vector field into (irrotational, solenoidal, mean) parts.
pub fn helmholtz_decompose(e: &SpectralField) -> (SpectralField, SpectralField, [f64; 3]) {
    assert_eq!(e.rank(), Rank::Vector);
    let lat = e.lattice().clone();
    let n = lat.num_modes();
    let d = lat.vcomp();
    let mut irr = SpectralField::zeros(&lat, Rank::Vector);
    let mut sol = SpectralField::zeros(&lat, Rank::Vector);
    irr.real = e.real;
    sol.real = e.real;
    let mut mean = [0.0; 3];
    let z = lat.zero_mode();
    for c in 0..d {
        mean[c] = e.coeff(c, z).re / lat.volume();
    }
    for i in 0..n {
        if i == z {
            continue;
        }
        let k = lat.mode(i);
        let ksq = lat.mode_norm_sq(i);
        let mut kdot = Complex64::new(0.0, 0.0);
        for c in 0..d {
            kdot += Complex64::new(k[c] as f64, 0.0) * e.coeff(c, i);
        }
        for c in 0..d {
            let p = kdot * (k[c] as f64 / ksq);
            irr.set_coeff(c, i, p);
            sol.set_coeff(c, i, e.coeff(c, i) - p);
        }
    }
    (irr, sol, mean)
}

/// How far a vector field is from Gauss's law ε²∇·E = ρ - 1.
#[derive(Debug, Clone, Copy)]
pub struct GaussResidual {
    /// L² norm of ε²∇·E - (ρ-1).
    pub l2: f64,
    /// Largest single-mode violation.
    pub max_mode: f64,
    /// l2 divided by max(‖ρ-1‖, ‖ε²∇·E‖) in L², with a small absolute floor.
    pub relative: f64,
}

/// Residual of Gauss's law for a total electric field and a layer family.
pub fn gauss_residual(
    e_total: &SpectralField,
    layers: &[FluidLayer],
    eps: Epsilon,
) -> Result<GaussResidual> {
    let lat = e_total.lattice().clone();
    let (rho, _) = moments(layers, eps)?;
    let mut lhs = e_total.divergence();
    lhs.scale(eps.get() * eps.get());
    let mut rhs = rho;
    let z = lat.zero_mode();
    let v = rhs.coeff(0, z);
    rhs.set_coeff(0, z, v - Complex64::new(lat.volume(), 0.0));
    let resid = lhs.sub(&rhs);
    let scale = rhs.l2_norm().max(lhs.l2_norm()).max(1e-300);
    Ok(GaussResidual {
        l2: resid.l2_norm(),
        max_mode: resid.max_coeff(),
        relative: resid.l2_norm() / scale.max(1e-30),
    })
}

/// Relative tolerance for accepting initial data; spectral constraints are
/// exact up to rounding, so this is kept tight.
pub const INITIAL_DATA_TOL: f64 = 1e-8;

/// Complete initial data per the Maxwell laws: checks Gauss and ∇·B = 0,
/// then derives ∂t B(0) = -∇×E0 and ε² ∂t E(0) = ∇×B0 - j(0), splitting
/// everything into per-part propagator seeds.
pub fn complete_initial_data(
    layers: &[FluidLayer],
    e0: &SpectralField,
    b0: &SpectralField,
    eps: Epsilon,
) -> Result<(EMState, PropagatorSeeds)> {
    let lat = e0.lattice().clone();
    if b0.lattice() != &lat {
        return Err(Error::LatticeMismatch);
    }
    let g = gauss_residual(e0, layers, eps)?;
    if g.relative > INITIAL_DATA_TOL {
        return Err(Error::InconsistentData {
            law: "Gauss (eps^2 div E = rho - 1)",
            residual: g.relative,
            tol: INITIAL_DATA_TOL,
        });
    }
    let state0 = EMState {
        e_irr: SpectralField::zeros(&lat, Rank::Vector),
        e_sol: SpectralField::zeros(&lat, Rank::Vector),
        e_mean: [0.0; 3],
        b: b0.clone(),
    };
    let div_b = state0.div_b_max();
    if div_b > INITIAL_DATA_TOL * b0.max_coeff().max(1.0) {
        return Err(Error::InconsistentData {
            law: "solenoidality (div B = 0)",
            residual: div_b,
            tol: INITIAL_DATA_TOL,
        });
    }

    let (e_irr, e_sol, e_mean) = helmholtz_decompose(e0);
    let dt_b0 = e0.curl().scaled(-1.0);

    let (_, j0) = moments(layers, eps)?;
    let mut dt_e = b0.curl_axial();
    dt_e.axpy(-1.0, &j0);
    dt_e.scale(1.0 / (eps.get() * eps.get()));
    let (dt_e_irr0, dt_e_sol0, dt_e_mean0) = helmholtz_decompose(&dt_e);

    let em = EMState {
        e_irr: e_irr.clone(),
        e_sol: e_sol.clone(),
        e_mean,
        b: b0.clone(),
    };
    let seeds = PropagatorSeeds {
        e_irr0: e_irr,
        dt_e_irr0,
        e_sol0: e_sol,
        dt_e_sol0,
        e_mean0: e_mean,
        dt_e_mean0,
        b0: b0.clone(),
        dt_b0,
    };
    Ok((em, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn rand_vector(lat: &Arc<Lattice>, amp: f64, seed: u64) -> SpectralField {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(lat, Rank::Vector);
        for c in 0..f.ncomp() {
            for i in 0..lat.num_modes() {
                if lat.mode(i) == [0, 0, 0] {
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
    fn constant_field_is_pure_mean() {
        let lat = Lattice::new(3, 2, 5).unwrap();
        let mut e = SpectralField::zeros(&lat, Rank::Vector);
        let z = lat.zero_mode();
        e.set_coeff(0, z, Complex64::new(2.0 * lat.volume(), 0.0));
        e.set_coeff(2, z, Complex64::new(-0.5 * lat.volume(), 0.0));
        let (irr, sol, mean) = helmholtz_decompose(&e);
        assert!(irr.max_coeff() < 1e-14);
        assert!(sol.max_coeff() < 1e-14);
        assert!((mean[0] - 2.0).abs() < 1e-14);
        assert!((mean[2] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_field_has_no_solenoidal_part() {
        let lat = Lattice::new(3, 3, 7).unwrap();
        let mut rng = StdRng::seed_from_u64(8);
        let mut phi = SpectralField::zeros(&lat, Rank::Scalar);
        for i in 0..lat.num_modes() {
            if lat.mode(i) == [0, 0, 0] {
                continue;
            }
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            phi.set_coeff(0, i, v);
            phi.set_coeff(0, lat.conj_mode(i), v.conj());
        }
        let e = phi.gradient();
        let (irr, sol, mean) = helmholtz_decompose(&e);
        assert!(sol.max_coeff() < 1e-13);
        assert!(mean.iter().all(|&m| m.abs() < 1e-13));
        assert!(irr.sub(&e).max_coeff() < 1e-13);
    }

    #[test]
    fn parts_reconstruct_and_satisfy_projector_identities() {
        for dim in 2..=3usize {
            let lat = Lattice::new(dim, 3, 7).unwrap();
            let e = rand_vector(&lat, 1.0, 99 + dim as u64);
            let (irr, sol, mean) = helmholtz_decompose(&e);
            // sum reconstructs
            let mut sum = irr.add(&sol);
            let z = lat.zero_mode();
            for c in 0..lat.vcomp() {
                let v = sum.coeff(c, z);
                sum.set_coeff(c, z, v + Complex64::new(mean[c] * lat.volume(), 0.0));
            }
            assert!(sum.sub(&e).max_coeff() < 1e-13);
            // curl of irrotational part vanishes, divergence of solenoidal part vanishes
            assert!(irr.curl().max_coeff() < 1e-13);
            assert!(sol.divergence().max_coeff() < 1e-13);
            // idempotence
            let (i2, s2, m2) = helmholtz_decompose(&irr);
            assert!(i2.sub(&irr).max_coeff() < 1e-13);
            assert!(s2.max_coeff() < 1e-13);
            assert!(m2.iter().all(|&m| m.abs() < 1e-14));
            let (i3, s3, _) = helmholtz_decompose(&sol);
            assert!(i3.max_coeff() < 1e-13);
            assert!(s3.sub(&sol).max_coeff() < 1e-13);
            // exact orthogonality of the spectral projectors
            let mut dot = Complex64::new(0.0, 0.0);
            for c in 0..lat.vcomp() {
                for i in 0..lat.num_modes() {
                    dot += irr.coeff(c, i) * sol.coeff(c, i).conj();
                }
            }
            assert!(dot.norm() < 1e-12);
        }
    }

    #[test]
    fn quiescent_initial_data_has_zero_seeds() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let layers = [crate::layers::FluidLayer::quiescent(&lat, 1.0)];
        let e0 = SpectralField::zeros(&lat, Rank::Vector);
        let b0 = SpectralField::zeros(&lat, Rank::Axial);
        let (em, seeds) = complete_initial_data(&layers, &e0, &b0, Epsilon::new(0.1).unwrap()).unwrap();
        assert!(em.e_irr.max_coeff() < 1e-14);
        assert!(seeds.dt_e_irr0.max_coeff() < 1e-14);
        assert!(seeds.dt_e_sol0.max_coeff() < 1e-14);
        assert!(seeds.dt_b0.max_coeff() < 1e-14);
        assert!(seeds.dt_e_mean0.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn inconsistent_gauss_data_rejected_with_residual() {
        let lat = Lattice::new(2, 3, 7).unwrap();
        let layers = [crate::layers::FluidLayer::quiescent(&lat, 1.0)];
        let mut e0 = SpectralField::zeros(&lat, Rank::Vector);
        // an irrotational mode makes eps^2 div E nonzero while rho - 1 = 0
        e0.set_mode_pair(0, &[1, 0, 0], Complex64::new(0.0, 1.0)).unwrap();
        let b0 = SpectralField::zeros(&lat, Rank::Axial);
        let err = complete_initial_data(&layers, &e0, &b0, Epsilon::new(0.1).unwrap());
        assert!(matches!(err, Err(Error::InconsistentData { .. })));
    }

    #[test]
    fn solenoidal_perturbation_leaves_gauss_residual_unchanged() {
        let lat = Lattice::new(3, 2, 5).unwrap();
        let eps = Epsilon::new(0.2).unwrap();
        let layers = [crate::layers::FluidLayer::quiescent(&lat, 1.0)];
        let e = rand_vector(&lat, 0.3, 5);
        let r1 = gauss_residual(&e, &layers, eps).unwrap();
        let (_, sol, _) = helmholtz_decompose(&rand_vector(&lat, 1.7, 6));
        let e2 = e.add(&sol);
        let r2 = gauss_residual(&e2, &layers, eps).unwrap();
        assert!((r1.l2 - r2.l2).abs() < 1e-12 * r1.l2.max(1.0));
    }

    #[test]
    fn consistent_random_data_recheck_below_tolerance() {
        // build E0 irrotational from a random charge density, then check that
        // completion re-verifies the Maxwell laws to near machine precision
        let lat = Lattice::new(2, 3, 7).unwrap();
        let eps = Epsilon::new(0.15).unwrap();
        let mut rng = StdRng::seed_from_u64(21);
        let mut e0 = SpectralField::zeros(&lat, Rank::Vector);
        let mut rho = SpectralField::zeros(&lat, Rank::Scalar);
        rho.set_coeff(0, lat.zero_mode(), Complex64::new(lat.volume(), 0.0));
        for i in 0..lat.num_modes() {
            let k = lat.mode(i);
            if k == [0, 0, 0] {
                continue;
            }
            let a = Complex64::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
            // rho - 1 coefficient a at mode k  ->  Ê_irr = -i k a / (ε²|k|²)
            rho.set_coeff(0, i, rho.coeff(0, i) + a);
            rho.set_coeff(0, lat.conj_mode(i), rho.coeff(0, lat.conj_mode(i)) + a.conj());
            let ksq = lat.mode_norm_sq(i);
            for c in 0..2 {
                let coef = Complex64::new(0.0, -(k[c] as f64) / (eps.get() * eps.get()) / ksq) * a;
                e0.set_coeff(c, i, e0.coeff(c, i) + coef);
                e0.set_coeff(c, lat.conj_mode(i), e0.coeff(c, lat.conj_mode(i)) + coef.conj());
            }
        }
        let xi = rand_vector(&lat, 0.2, 23);
        let layer = crate::layers::FluidLayer::new(1.0, rho, xi).unwrap();
        let b0 = {
            let v = rand_vector(&lat, 0.4, 24);
            v.curl()
        };
        let (em, seeds) = complete_initial_data(&[layer.clone()], &e0, &b0, eps).unwrap();
        let g = gauss_residual(&em.total_e(), &[layer], eps).unwrap();
        assert!(g.relative < 1e-10);
        assert!(em.div_b_max() < 1e-10);
        // Faraday seed: ∂t B(0) = -∇×E0
        assert!(seeds.dt_b0.add(&e0.curl()).max_coeff() < 1e-12);
    }
}
