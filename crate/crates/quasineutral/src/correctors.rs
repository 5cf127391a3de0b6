//! The limit corrector ODEs: slow evolution of the oscillation envelopes
//! d₀,₊, d̂₁,₊(k), d̂₂,₊(k) driven by the e-MHD background and by the
//! finitely many lattice resonances between oscillatory branches.
//!
//! The "+" branch is evolved; the "-" branch follows from the reality of
//! the electric field by d_{j,-}(k) = conj d_{j,+}(-k). Every bilinear term
//! of the three equations carries an explicit index so a single term can be
//! activated in isolation and checked against a direct convolution sum.
//!
//! Closures: the d₁ equation prescribes only k·∂t d̂₁,₊, which fixes the
//! k-parallel component, the only one an irrotational field has. The d₂
//! equation prescribes k∧∂t d̂₂,₊; inverting the wedge on the solenoidal
//! complement is unique. The convolution cutoff equals the lattice cutoff.

use num_complex::Complex64;

use crate::emhd::EmhdTrajectory;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::filtering::CorrectorState;
use crate::lattice::Lattice;
use std::sync::Arc;

type Cv = [Complex64; 3];

const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Term indices for masked evaluation (bit i activates term i).
pub mod term {
    pub const EQ0_RES_DIV: u32 = 1 << 0;
    pub const EQ0_B_COUPLING: u32 = 1 << 1;
    pub const EQ0_RES_WEDGE: u32 = 1 << 2;
    pub const EQ1_MOMENT_D0: u32 = 1 << 3;
    pub const EQ1_MOMENT_D1: u32 = 1 << 4;
    pub const EQ1_D0_D2: u32 = 1 << 5;
    pub const EQ1_D1_D2: u32 = 1 << 6;
    pub const EQ1_D2_D2: u32 = 1 << 7;
    pub const EQ1_DIV_D2D1: u32 = 1 << 8;
    pub const EQ1_B_WEDGE: u32 = 1 << 9;
    pub const EQ1_D0_WEDGE: u32 = 1 << 10;
    pub const EQ1_D1_WEDGE: u32 = 1 << 11;
    pub const EQ1_D2_WEDGE: u32 = 1 << 12;
    pub const EQ2_MOMENT_DOT: u32 = 1 << 13;
    pub const EQ2_MOMENT_VEC: u32 = 1 << 14;
    pub const EQ2_D0_D1: u32 = 1 << 15;
    pub const EQ2_D1_D1: u32 = 1 << 16;
    pub const EQ2_RES_MIX: u32 = 1 << 17;
    pub const EQ2_D0_DIV: u32 = 1 << 18;
    pub const EQ2_D1_DIV: u32 = 1 << 19;
    pub const EQ2_RES_DIV: u32 = 1 << 20;
    pub const EQ2_B_WEDGE: u32 = 1 << 21;
    pub const EQ2_MOMENT_WEDGE: u32 = 1 << 22;
    pub const EQ2_RES_WEDGE: u32 = 1 << 23;
    pub const ALL: u32 = (1 << 24) - 1;
}

fn kvec(k: [i64; 3]) -> [f64; 3] {
    [k[0] as f64, k[1] as f64, k[2] as f64]
}

fn cdot(k: [f64; 3], v: &Cv) -> Complex64 {
    k[0] * v[0] + k[1] * v[1] + k[2] * v[2]
}

/// a ∧ b for complex vectors with the canonical embedding: axial output.
fn cwedge_vv(dim: usize, a: &Cv, b: &Cv) -> Cv {
    match dim {
        1 => [CZERO; 3],
        2 => [a[0] * b[1] - a[1] * b[0], CZERO, CZERO],
        3 => [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ],
        _ => unreachable!(),
    }
}

/// v ∧ a for vector v and axial a: vector output.
fn cwedge_va(dim: usize, v: &Cv, a: &Cv) -> Cv {
    match dim {
        1 => [CZERO; 3],
        2 => [v[1] * a[0], -(v[0] * a[0]), CZERO],
        3 => [
            v[1] * a[2] - v[2] * a[1],
            v[2] * a[0] - v[0] * a[2],
            v[0] * a[1] - v[1] * a[0],
        ],
        _ => unreachable!(),
    }
}

fn kwedge_v(dim: usize, k: [f64; 3], v: &Cv) -> Cv {
    cwedge_vv(dim, &[k[0].into(), k[1].into(), k[2].into()], v)
}

fn field_at(f: &SpectralField, i: usize) -> Cv {
    let mut out = [CZERO; 3];
    for c in 0..f.ncomp() {
        out[c] = f.coeff(c, i);
    }
    out
}

/// Precomputed mode pairings for the convolution sums.
pub struct CorrectorOde {
    pub lattice: Arc<Lattice>,
    /// modes ℓ with |ℓ|² = 3 (the set 𝟏)
    bold1: Vec<usize>,
    /// per k: all ℓ with k-ℓ inside the cutoff cube, as (ℓ, k-ℓ)
    pairs_all: Vec<Vec<(usize, usize)>>,
    /// per k: ℓ ∈ 𝟏 with k-ℓ inside, as (ℓ, k-ℓ)
    pairs_bold1: Vec<Vec<(usize, usize)>>,
    /// per k: |ℓ| = |k| with k-ℓ inside
    pairs_shell: Vec<Vec<(usize, usize)>>,
    /// per k: ℓ ∈ Ω¹_{+,-}(k) (and mirror) with k-ℓ inside
    pairs_om1_pm: Vec<Vec<(usize, usize)>>,
    pairs_om1_mp: Vec<Vec<(usize, usize)>>,
    /// per k: ℓ ∈ Ω²_{+,-}(k) (and mirror) with k-ℓ inside
    pairs_om2_pm: Vec<Vec<(usize, usize)>>,
    pairs_om2_mp: Vec<Vec<(usize, usize)>>,
}

fn is_square_pair(a: i64, b: i64) -> bool {
    // √b = 1 + √a in exact arithmetic
    let sq = |n: i64| -> Option<i64> {
        let r = (n as f64).sqrt().round() as i64;
        (r - 1..=r + 1).find(|&c| c >= 0 && c * c == n)
    };
    matches!((sq(a), sq(b)), (Some(ra), Some(rb)) if rb == ra + 1)
}

impl CorrectorOde {
    pub fn new(lattice: &Arc<Lattice>) -> CorrectorOde {
        let n = lattice.num_modes();
        let mut bold1 = Vec::new();
        for i in 0..n {
            if lattice.mode_norm_sq(i) == 3.0 {
                bold1.push(i);
            }
        }
        let mut pairs_all = vec![Vec::new(); n];
        let mut pairs_bold1 = vec![Vec::new(); n];
        let mut pairs_shell = vec![Vec::new(); n];
        let mut pairs_om1_pm = vec![Vec::new(); n];
        let mut pairs_om1_mp = vec![Vec::new(); n];
        let mut pairs_om2_pm = vec![Vec::new(); n];
        let mut pairs_om2_mp = vec![Vec::new(); n];
        for ki in 0..n {
            let k = lattice.mode(ki);
            let a_k = 1 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            for li in 0..n {
                let l = lattice.mode(li);
                let kl = [k[0] - l[0], k[1] - l[1], k[2] - l[2]];
                let Some(kli) = lattice.mode_index(&kl) else {
                    continue;
                };
                pairs_all[ki].push((li, kli));
                let b_l = 1 + (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
                if b_l == 4 && l.iter().map(|c| c * c).sum::<i64>() == 3 {
                    pairs_bold1[ki].push((li, kli));
                }
                if lattice.mode_norm_sq(li) == lattice.mode_norm_sq(ki) {
                    pairs_shell[ki].push((li, kli));
                }
                let a_kl = 1 + (kl[0] * kl[0] + kl[1] * kl[1] + kl[2] * kl[2]);
                // Ω¹_{+,-}: 1 + √(1+|k-ℓ|²) - √(1+|ℓ|²) = 0 ⇔ √b_l = 1 + √a_kl
                if is_square_pair(a_kl, b_l) {
                    pairs_om1_pm[ki].push((li, kli));
                }
                // Ω¹_{-,+}: √a_kl = 1 + √b_l
                if is_square_pair(b_l, a_kl) {
                    pairs_om1_mp[ki].push((li, kli));
                }
                // Ω²_{+,-}: √b_l = 1 + √a_k
                if is_square_pair(a_k, b_l) {
                    pairs_om2_pm[ki].push((li, kli));
                }
                // Ω²_{-,+}: √a_k = 1 + √b_l
                if is_square_pair(b_l, a_k) {
                    pairs_om2_mp[ki].push((li, kli));
                }
            }
        }
        CorrectorOde {
            lattice: lattice.clone(),
            bold1,
            pairs_all,
            pairs_bold1,
            pairs_shell,
            pairs_om1_pm,
            pairs_om1_mp,
            pairs_om2_pm,
            pairs_om2_mp,
        }
    }

    fn in_bold1(&self, ki: usize) -> bool {
        self.lattice.mode_norm_sq(ki) == 3.0
    }
}

/// Time derivative of the "+"-branch correctors against a background
/// (moment field M = Σ μ ρ w and magnetic field B of the limit system).
pub struct CorrectorDeriv {
    pub d0: Cv,
    pub d1: SpectralField,
    pub d2: SpectralField,
}

/// Evaluate the corrector right-hand sides with a term mask (use
/// `term::ALL` for the full equations).
pub fn corrector_rhs_masked(
    ode: &CorrectorOde,
    state: &CorrectorState,
    moment: &SpectralField,
    b_field: &SpectralField,
    mask: u32,
) -> Result<CorrectorDeriv> {
    let lat = &ode.lattice;
    let dim = lat.dim();
    let n = lat.num_modes();
    let z = lat.zero_mode();
    let vol = lat.volume();
    let vol2 = vol * vol;

    if state.structure_error() > 1e-9 {
        return Err(Error::Config(
            "corrector state violates its irrotational/solenoidal structure".into(),
        ));
    }

    // "-" branch by conjugation under k → -k
    let d1m = CorrectorState::minus_field(&state.d1);
    let d2m = CorrectorState::minus_field(&state.d2);
    let d0p = state.d0;
    let d0m = state.d0_minus();

    let on = |bit: u32| mask & bit != 0;
    let w = |i: usize| -> f64 { (1.0 + lat.mode_norm_sq(i)).sqrt() };

    // mean of B (constant along the limit flow)
    let b_mean = {
        let mut m = [CZERO; 3];
        for c in 0..b_field.ncomp() {
            m[c] = b_field.coeff(c, z) / vol;
        }
        m
    };

    // ---- equation for d₀,₊ --------------------------------------------
    let mut d0dot = [CZERO; 3];
    {
        let mut rhs = [CZERO; 3];
        if on(term::EQ0_RES_DIV) {
            // (1/V²) Σ_{ℓ∈𝟏} d̂₂₊(-ℓ) (ℓ·d̂₁₋(ℓ))
            for &li in &ode.bold1 {
                let l = kvec(lat.mode(li));
                let mi = lat.conj_mode(li);
                let s = cdot(l, &field_at(&d1m, li));
                let v = field_at(&state.d2, mi);
                for c in 0..3 {
                    rhs[c] += v[c] * s / vol2;
                }
            }
        }
        if on(term::EQ0_B_COUPLING) {
            // d₀₊ ∧ B̄ + (1/V²) Σ_ℓ d̂₁₊(ℓ) ∧ B̂(-ℓ)
            let v = cwedge_va(dim, &d0p, &b_mean);
            for c in 0..3 {
                rhs[c] += v[c];
            }
            for li in 0..n {
                let mi = lat.conj_mode(li);
                let v = cwedge_va(dim, &field_at(&state.d1, li), &field_at(b_field, mi));
                for c in 0..3 {
                    rhs[c] += v[c] / vol2;
                }
            }
        }
        if on(term::EQ0_RES_WEDGE) {
            // (1/V²) Σ_{ℓ∈𝟏} d̂₁₋(-ℓ) ∧ [ℓ ∧ d̂₂₊(ℓ)] (1+|ℓ|²)^{-1/2}
            for &li in &ode.bold1 {
                let l = kvec(lat.mode(li));
                let mi = lat.conj_mode(li);
                let inner = kwedge_v(dim, l, &field_at(&state.d2, li));
                let v = cwedge_va(dim, &field_at(&d1m, mi), &inner);
                for c in 0..3 {
                    rhs[c] += v[c] / (w(li) * vol2);
                }
            }
        }
        // 2i ∂t d₀ = i rhs  =>  ∂t d₀ = rhs / 2
        for c in 0..3 {
            d0dot[c] = rhs[c] * 0.5;
        }
    }

    // ---- equation for d̂₁,₊ ---------------------------------------------
    let mut d1dot = SpectralField::zeros(lat, crate::field::Rank::Vector);
    d1dot.real = false;
    for ki in 0..n {
        if ki == z {
            continue;
        }
        let k = kvec(lat.mode(ki));
        let ksq = lat.mode_norm_sq(ki);
        let mut rhs = CZERO; // accumulates -2 k·∂t d̂₁₊
        if on(term::EQ1_MOMENT_D0) {
            rhs += -2.0 * cdot(k, &field_at(moment, ki)) * cdot(k, &d0p);
        }
        if on(term::EQ1_MOMENT_D1) {
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_all[ki] {
                s += cdot(k, &field_at(moment, kli)) * cdot(k, &field_at(&state.d1, li));
            }
            rhs += Complex64::new(0.0, 2.0) * s / vol;
        }
        if on(term::EQ1_D0_D2) && ode.in_bold1(ki) {
            rhs += -2.0 * cdot(k, &d0m) * cdot(k, &field_at(&state.d2, ki)) / w(ki);
        }
        if on(term::EQ1_D1_D2) {
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_bold1[ki] {
                s += cdot(k, &field_at(&d1m, kli)) * cdot(k, &field_at(&state.d2, li)) / w(li);
            }
            rhs += -2.0 * s / vol;
        }
        if on(term::EQ1_D2_D2) {
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_om1_pm[ki] {
                s += cdot(k, &field_at(&d2m, kli)) * cdot(k, &field_at(&state.d2, li))
                    / (w(kli) * w(li));
            }
            rhs += -2.0 * s / vol;
        }
        if on(term::EQ1_DIV_D2D1) {
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_bold1[ki] {
                let kl = kvec(lat.mode(kli));
                s += cdot(k, &field_at(&state.d2, li)) * cdot(kl, &field_at(&d1m, kli));
            }
            rhs += s / vol;
        }
        if on(term::EQ1_B_WEDGE) {
            rhs += -cdot(k, &cwedge_va(dim, &d0p, &field_at(b_field, ki)));
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_all[ki] {
                s += cdot(
                    k,
                    &cwedge_va(dim, &field_at(&state.d1, li), &field_at(b_field, kli)),
                );
            }
            rhs += -s / vol;
        }
        if on(term::EQ1_D0_WEDGE) && ode.in_bold1(ki) {
            let inner = kwedge_v(dim, k, &field_at(&state.d2, ki));
            rhs += -cdot(k, &cwedge_va(dim, &d0m, &inner)) / w(ki);
        }
        if on(term::EQ1_D1_WEDGE) {
            let mut s = CZERO;
            for &(li, kli) in &ode.pairs_bold1[ki] {
                let l = kvec(lat.mode(li));
                let inner = kwedge_v(dim, l, &field_at(&state.d2, li));
                s += cdot(k, &cwedge_va(dim, &field_at(&d1m, kli), &inner)) / w(li);
            }
            rhs += -s / vol;
        }
        if on(term::EQ1_D2_WEDGE) {
            let mut s = CZERO;
            for (pairs, dp, dq) in [
                (&ode.pairs_om1_pm[ki], &d2m, &state.d2),
                (&ode.pairs_om1_mp[ki], &state.d2, &d2m),
            ] {
                for &(li, kli) in pairs {
                    let l = kvec(lat.mode(li));
                    let inner = kwedge_v(dim, l, &field_at(dq, li));
                    s += cdot(k, &cwedge_va(dim, &field_at(dp, kli), &inner)) / (w(kli) * w(li));
                }
            }
            rhs += -s / vol;
        }
        // k·∂t d̂₁ = rhs / (-2); d̂₁ is k-parallel
        let scal = rhs / Complex64::new(-2.0 * ksq, 0.0);
        for c in 0..lat.vcomp() {
            d1dot.set_coeff(c, ki, scal * k[c]);
        }
    }

    // ---- equation for d̂₂,₊ ---------------------------------------------
    let mut d2dot = SpectralField::zeros(lat, crate::field::Rank::Vector);
    d2dot.real = false;
    for ki in 0..n {
        if ki == z {
            continue;
        }
        let k = kvec(lat.mode(ki));
        let ksq = lat.mode_norm_sq(ki);
        let mut rhs = [CZERO; 3]; // accumulates -2√(1+|k|²) (k ∧ ∂t d̂₂₊), axial
        let add = |rhs: &mut [Complex64; 3], v: Cv, scale: Complex64| {
            for c in 0..3 {
                rhs[c] += v[c] * scale;
            }
        };
        if on(term::EQ2_MOMENT_DOT) {
            for &(li, kli) in &ode.pairs_shell[ki] {
                let s = cdot(k, &field_at(moment, kli)) / w(li);
                let v = kwedge_v(dim, k, &field_at(&state.d2, li));
                add(&mut rhs, v, Complex64::new(0.0, 1.0) * s / vol);
            }
        }
        if on(term::EQ2_MOMENT_VEC) {
            for &(li, kli) in &ode.pairs_shell[ki] {
                let s = cdot(k, &field_at(&state.d2, li)) / w(li);
                let v = kwedge_v(dim, k, &field_at(moment, kli));
                add(&mut rhs, v, Complex64::new(0.0, 1.0) * s / vol);
            }
        }
        if on(term::EQ2_D0_D1) && ode.in_bold1(ki) {
            let d1k = field_at(&state.d1, ki);
            let mut inner = [CZERO; 3];
            let s1 = cdot(k, &d0p);
            let s2 = cdot(k, &d1k);
            for c in 0..3 {
                inner[c] = s1 * d1k[c] + s2 * d0p[c];
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), 1.0.into());
        }
        if on(term::EQ2_D1_D1) && ode.in_bold1(ki) {
            let mut inner = [CZERO; 3];
            for &(li, kli) in &ode.pairs_all[ki] {
                let s = cdot(k, &field_at(&state.d1, kli));
                let v = field_at(&state.d1, li);
                for c in 0..3 {
                    inner[c] += s * v[c];
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(1.0 / vol, 0.0));
        }
        if on(term::EQ2_RES_MIX) {
            let mut inner = [CZERO; 3];
            for (sigma, pairs, dminus) in [
                (1.0, &ode.pairs_om2_pm[ki], &d1m),
                (-1.0, &ode.pairs_om2_mp[ki], &state.d1),
            ] {
                for &(li, kli) in pairs {
                    let d2l = field_at(&state.d2, li);
                    let d1kl = field_at(dminus, kli);
                    let s1 = cdot(k, &d2l);
                    let s2 = cdot(k, &d1kl);
                    for c in 0..3 {
                        inner[c] += sigma / w(li) * (s1 * d1kl[c] + s2 * d2l[c]);
                    }
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(-1.0 / vol, 0.0));
        }
        if on(term::EQ2_D0_DIV) && ode.in_bold1(ki) {
            let s = cdot(k, &field_at(&state.d1, ki));
            let mut inner = [CZERO; 3];
            for c in 0..3 {
                inner[c] = d0p[c] * s;
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), 1.0.into());
        }
        if on(term::EQ2_D1_DIV) && ode.in_bold1(ki) {
            let mut inner = [CZERO; 3];
            for &(li, kli) in &ode.pairs_all[ki] {
                let l = kvec(lat.mode(li));
                let s = cdot(l, &field_at(&state.d1, li));
                let v = field_at(&state.d1, kli);
                for c in 0..3 {
                    inner[c] += v[c] * s;
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(1.0 / vol, 0.0));
        }
        if on(term::EQ2_RES_DIV) {
            let mut inner = [CZERO; 3];
            for (pairs, dminus) in [
                (&ode.pairs_om2_pm[ki], &d1m),
                (&ode.pairs_om2_mp[ki], &state.d1),
            ] {
                for &(li, kli) in pairs {
                    let kl = kvec(lat.mode(kli));
                    let s = cdot(kl, &field_at(dminus, kli));
                    let v = field_at(&state.d2, li);
                    for c in 0..3 {
                        inner[c] += v[c] * s;
                    }
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(1.0 / vol, 0.0));
        }
        if on(term::EQ2_B_WEDGE) {
            // d̂₂₊(ℓ)(1+|ℓ|²)^{-1/2} ∧ B̂(k-ℓ): vector ∧ axial
            let mut inner = [CZERO; 3];
            for &(li, kli) in &ode.pairs_shell[ki] {
                let ww = cwedge_va(dim, &field_at(&state.d2, li), &field_at(b_field, kli));
                for c in 0..3 {
                    inner[c] += ww[c] / w(li);
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(-1.0 / vol, 0.0));
        }
        if on(term::EQ2_MOMENT_WEDGE) {
            let mut inner = [CZERO; 3];
            for &(li, kli) in &ode.pairs_shell[ki] {
                let l = kvec(lat.mode(li));
                let ax = kwedge_v(dim, l, &field_at(&state.d2, li));
                let v = cwedge_va(dim, &field_at(moment, kli), &ax);
                for c in 0..3 {
                    inner[c] += v[c] / w(li);
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(0.0, 1.0 / vol));
        }
        if on(term::EQ2_RES_WEDGE) {
            let mut inner = [CZERO; 3];
            for (sigma, pairs, dminus) in [
                (1.0, &ode.pairs_om2_pm[ki], &d1m),
                (-1.0, &ode.pairs_om2_mp[ki], &state.d1),
            ] {
                for &(li, kli) in pairs {
                    let l = kvec(lat.mode(li));
                    let ax = kwedge_v(dim, l, &field_at(&state.d2, li));
                    let v = cwedge_va(dim, &field_at(dminus, kli), &ax);
                    for c in 0..3 {
                        inner[c] += sigma / w(li) * v[c];
                    }
                }
            }
            add(&mut rhs, kwedge_v(dim, k, &inner), Complex64::new(-1.0 / vol, 0.0));
        }
        // -2ω (k ∧ ∂t d̂₂) = rhs  =>  k ∧ ∂t d̂₂ = rhs/(-2ω); invert on the
        // solenoidal complement: ∂t d̂₂ = -(k ∧ u)/|k|².
        let om = w(ki);
        let mut u = [CZERO; 3];
        for c in 0..3 {
            u[c] = rhs[c] / (-2.0 * om);
        }
        let kxu = crate::oscillatory::wedge_k_axial(lat.mode(ki), dim, &u);
        for c in 0..lat.vcomp() {
            d2dot.set_coeff(c, ki, -kxu[c] / ksq);
        }
    }

    Ok(CorrectorDeriv {
        d0: d0dot,
        d1: d1dot,
        d2: d2dot,
    })
}

/// The full right-hand side (all terms active).
pub fn corrector_rhs(
    ode: &CorrectorOde,
    state: &CorrectorState,
    moment: &SpectralField,
    b_field: &SpectralField,
) -> Result<CorrectorDeriv> {
    corrector_rhs_masked(ode, state, moment, b_field, term::ALL)
}

fn add_scaled(state: &CorrectorState, d: &CorrectorDeriv, c: f64, t: f64) -> CorrectorState {
    let mut out = state.clone();
    out.t = t;
    for i in 0..3 {
        out.d0[i] += c * d.d0[i];
    }
    out.d1.axpy(c, &d.d1);
    out.d2.axpy(c, &d.d2);
    out
}

/// March the corrector system with classical RK4 against an e-MHD
/// background trajectory.
pub fn corrector_evolve(
    initial: CorrectorState,
    background: &EmhdTrajectory,
    t_end: f64,
    dt: f64,
) -> Result<Vec<CorrectorState>> {
    let lat = initial.d1.lattice().clone();
    let ode = CorrectorOde::new(&lat);
    let n_steps = (t_end / dt).ceil().max(0.0) as usize;
    let h = if n_steps == 0 { dt } else { t_end / n_steps as f64 };
    let mut out = vec![initial];
    for _ in 0..n_steps {
        let cur = out.last().unwrap().clone();
        let t = cur.t;
        let (m1, b1) = background.background_at(t)?;
        let k1 = corrector_rhs(&ode, &cur, &m1, &b1)?;
        let (mh, bh) = background.background_at(t + 0.5 * h)?;
        let y2 = add_scaled(&cur, &k1, 0.5 * h, t + 0.5 * h);
        let k2 = corrector_rhs(&ode, &y2, &mh, &bh)?;
        let y3 = add_scaled(&cur, &k2, 0.5 * h, t + 0.5 * h);
        let k3 = corrector_rhs(&ode, &y3, &mh, &bh)?;
        let (m4, b4) = background.background_at(t + h)?;
        let y4 = add_scaled(&cur, &k3, h, t + h);
        let k4 = corrector_rhs(&ode, &y4, &m4, &b4)?;
        let mut next = cur.clone();
        next.t = t + h;
        for i in 0..3 {
            next.d0[i] += h / 6.0 * (k1.d0[i] + 2.0 * k2.d0[i] + 2.0 * k3.d0[i] + k4.d0[i]);
        }
        next.d1.axpy(h / 6.0, &k1.d1);
        next.d1.axpy(h / 3.0, &k2.d1);
        next.d1.axpy(h / 3.0, &k3.d1);
        next.d1.axpy(h / 6.0, &k4.d1);
        next.d2.axpy(h / 6.0, &k1.d2);
        next.d2.axpy(h / 3.0, &k2.d2);
        next.d2.axpy(h / 3.0, &k3.d2);
        next.d2.axpy(h / 6.0, &k4.d2);
        out.push(next);
    }
    Ok(out)
}
