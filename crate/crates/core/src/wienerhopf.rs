//! Wiener-Hopf solution of the infinite-window filtering problem for the
//! adiabatic model, and the closed forms it reduces to for a free mass.
//!
//! Conventions follow [`crate::rational`]: the optimal filters act on the past
//! record, so their transforms have upper-half-plane poles only ("minus"
//! type); `ψ₊` and `1/ψ₊` are analytic in the upper half-plane.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::model::{derive_scales, PhysicalParams, HBAR};
use crate::poly::C64;
use crate::rational::{CausalSplit, Factored, Pole, Rational, Side};
use crate::statespace::{Spectra, Transfers, TRANSFER_INPUTS};
use crate::{Error, Result};

/// Numerator roots closer than this (relative) to the real axis are rejected.
const REAL_ROOT_TOL: f64 = 1e-9;

/// `S(ω) = ψ₊(ω) ψ₋(ω)` with `ψ₋ = ψ₊^♯`.
#[derive(Debug, Clone)]
pub struct Factorization {
    /// Zeros and poles in the lower half-plane.
    pub psi_plus: Factored,
    /// Zeros and poles in the upper half-plane.
    pub psi_minus: Factored,
    /// Numerator roots in the upper half-plane, by increasing imaginary part.
    pub upper_roots: Vec<C64>,
    /// Denominator roots.
    pub denominator_roots: Vec<C64>,
}

impl Factorization {
    /// `min Im ω_j` over the upper-half-plane numerator roots.
    pub fn slowest_rate(&self) -> Option<f64> {
        self.upper_roots.first().map(|r| r.im)
    }
}

pub fn factorize(spectrum: &Rational) -> Result<Factorization> {
    let s = spectrum.cancelled();
    if s.is_zero() {
        return Err(Error::InvalidArgument {
            name: "spectrum",
            reason: "cannot factorize the zero spectrum".into(),
        });
    }
    let roots = s.numerator().roots()?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for r in roots {
        if r.im.abs() <= REAL_ROOT_TOL * r.norm().max(1.0) {
            return Err(Error::RealAxisRoot { at: format!("{r}") });
        }
        if r.im < 0.0 {
            lower.push(r);
        } else {
            upper.push(r);
        }
    }
    let lower_poles: Vec<Pole> = s.poles().iter().filter(|p| p.side == Side::Lower).copied().collect();
    let upper_count = s.poles().len() - lower_poles.len();
    if lower.len() != upper.len() || lower_poles.len() != upper_count {
        return Err(Error::InvalidArgument {
            name: "spectrum",
            reason: "zeros and poles are not placed symmetrically about the real axis".into(),
        });
    }
    let mut unit = Factored {
        gain: C64::new(1.0, 0.0),
        zeros: lower.iter().map(|&z| Pole::tagged(z, Side::Lower)).collect(),
        poles: lower_poles,
    };
    // fix |gain| at a generic real frequency
    let probe = 1.234_567;
    let target = s.eval_real(probe);
    let base = unit.eval(C64::new(probe, 0.0)).norm_sqr();
    if !(target.re > 0.0) || target.im.abs() > 1e-8 * target.re {
        return Err(Error::InvalidArgument {
            name: "spectrum",
            reason: format!("spectrum is not real and positive on the real axis (value {target})"),
        });
    }
    unit.gain = C64::new((target.re / base).sqrt(), 0.0);
    upper.sort_by(|a, b| a.im.total_cmp(&b.im));
    Ok(Factorization {
        psi_minus: unit.sharp(),
        psi_plus: unit,
        upper_roots: upper,
        denominator_roots: s.poles().iter().map(|p| p.at).collect(),
    })
}

/// Causal/anticausal decomposition; see [`Rational::split`].
pub fn split(f: &Rational) -> Result<CausalSplit> {
    f.split()
}

/// `B̃₂₂ - B̃₂₁ B̃₁₂ / B̃₁₁`, the phase-quadrature spectrum left after
/// optimally subtracting the amplitude-quadrature record.
pub fn conditional_spectrum(s: &Spectra) -> Result<Rational> {
    let phi = factorize(&s.b[0][0])?;
    let cross = s.b[1][0]
        .mul(&s.b[0][1])
        .mul_factored(&phi.psi_plus.inverse())
        .mul_factored(&phi.psi_minus.inverse());
    Ok(s.b[1][1].sub(&cross))
}

/// Filter transforms `K̃_kj`: output `k` (y₁, y₂) to state component `j`
/// (x, p). Each has upper-half-plane poles only.
#[derive(Debug, Clone)]
pub struct Filters {
    pub k: [[Rational; 2]; 2],
    pub phi: Factorization,
    pub psi: Factorization,
}

pub fn solve_filters(s: &Spectra) -> Result<Filters> {
    let phi = factorize(&s.b[0][0])?;
    let psi = factorize(&conditional_spectrum(s)?)?;
    let phi_p_inv = phi.psi_plus.inverse();
    let phi_m_inv = phi.psi_minus.inverse();
    let psi_p_inv = psi.psi_plus.inverse();
    let psi_m_inv = psi.psi_minus.inverse();

    let b21_phi = s.b[1][0].mul_factored(&phi_m_inv);
    let g = s.b[0][1].mul_factored(&phi_p_inv);
    // causal poles of B̃₁₂/φ₊ make [B̃₁₂ K̃₂/φ₊]₊ depend on K̃₂ at those poles
    let pf = g.partial_fractions()?;
    let mut feedback = Vec::new();
    for t in pf.terms.iter().filter(|t| t.pole.side == Side::Lower) {
        if t.coeffs.len() != 1 {
            return Err(Error::SingularFilterSystem);
        }
        feedback.push((t.pole, t.coeffs[0]));
    }
    let k2_of = |r: &Rational| -> Result<Rational> {
        Ok(r.mul_factored(&psi_p_inv).minus_part()?.mul_factored(&psi_m_inv))
    };

    let mut cols: Vec<[Rational; 2]> = Vec::with_capacity(2);
    for j in 0..2 {
        let c1 = &s.c[0][j];
        let c2 = &s.c[1][j];
        let t1 = c1.mul_factored(&phi_p_inv).minus_part()?;
        let r0 = c2.sub(&b21_phi.mul(&t1));
        let mut k2 = k2_of(&r0)?;
        if !feedback.is_empty() {
            let basis: Vec<Rational> = feedback
                .iter()
                .map(|(p, res)| {
                    let unit = Rational::new(
                        crate::poly::Poly::constant(-*res),
                        vec![*p],
                    );
                    k2_of(&b21_phi.mul(&unit))
                })
                .collect::<Result<_>>()?;
            let m = feedback.len();
            let mat = DMatrix::from_fn(m, m, |a, b| {
                let d = if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                d - basis[b].eval(feedback[a].0.at)
            });
            let rhs = DVector::from_fn(m, |a, _| k2.eval(feedback[a].0.at));
            let u = mat.lu().solve(&rhs).ok_or(Error::SingularFilterSystem)?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularFilterSystem);
            }
            for (b, kb) in basis.iter().enumerate() {
                k2 = k2.add(&kb.scale(u[b]));
            }
        }
        let k1 = c1
            .sub(&s.b[0][1].mul(&k2))
            .mul_factored(&phi_p_inv)
            .minus_part()?
            .mul_factored(&phi_m_inv);
        cols.push([k1, k2]);
    }
    let [x, p]: [[Rational; 2]; 2] = cols.try_into().expect("two columns");
    Ok(Filters {
        k: [[x[0].clone(), p[0].clone()], [x[1].clone(), p[1].clone()]],
        phi,
        psi,
    })
}

/// `V_s` from the estimation-error spectra: the error of component `j` has
/// response `T_jn(ω) = Y_jn(ω) - Σ_k K̃_kj(-ω) Y_kn(ω)` to input `n`, and
/// `V_ij = Σ_n σ_n ∫ T_in T_jn^♯ dω/2π`.
///
/// This route needs no stationary prior, so it also covers the free mass.
#[allow(clippy::needless_range_loop)]
pub fn assemble_vs_analytic(t: &Transfers, f: &Filters) -> Result<Matrix2<f64>> {
    let reflected: [[Rational; 2]; 2] =
        std::array::from_fn(|k| std::array::from_fn(|j| f.k[k][j].reflect()));
    let err: [Vec<Rational>; 2] = std::array::from_fn(|j| {
        (0..TRANSFER_INPUTS)
            .map(|n| {
                let mut e = t.state[j][n].clone();
                for k in 0..2 {
                    if !t.outputs[k][n].is_zero() {
                        e = e.sub(&reflected[k][j].mul(&t.outputs[k][n]));
                    }
                }
                e
            })
            .collect()
    });
    let mut v = Matrix2::zeros();
    for i in 0..2 {
        for j in i..2 {
            let mut acc = 0.0;
            for n in 0..TRANSFER_INPUTS {
                if t.levels[n] == 0.0 || err[i][n].is_zero() || err[j][n].is_zero() {
                    continue;
                }
                let integrand = err[i][n].mul(&err[j][n].sharp());
                acc += t.levels[n] * integrand.integrate_real_line()?.re;
            }
            v[(i, j)] = acc;
            v[(j, i)] = acc;
        }
    }
    Ok(v)
}

/// `V_s = A - Σ_k ∫ C_ki(t) K_kj(t) dt`, evaluated as
/// `A_ij - Σ_k ∫ (C̃_ki(ω)/2) K̃_kj(-ω) dω/2π` with `A` the stationary
/// oscillator covariance. Requires mechanical damping.
pub fn contraction_vs(t: &Transfers, s: &Spectra, f: &Filters) -> Result<Matrix2<f64>> {
    let mut v = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let a = t.cross(&t.state[i], &t.state[j]).scale_real(0.5).integrate_real_line()?.re;
            let mut corr = 0.0;
            for k in 0..2 {
                let c = &s.c[k][i];
                if c.is_zero() || f.k[k][j].is_zero() {
                    continue;
                }
                corr += c.mul(&f.k[k][j].reflect()).scale_real(0.5).integrate_real_line()?.re;
            }
            v[(i, j)] = a - corr;
        }
    }
    Ok((v + v.transpose()) * 0.5)
}

/// Infinite-window `V_s` of the adiabatic model through the full
/// spectral-factorization pipeline.
pub fn vs_analytic(model: &crate::statespace::LinearModel) -> Result<Matrix2<f64>> {
    if model.params.coupling == 0.0 || model.params.efficiency == 0.0 {
        // the record carries no information and the stationary state is
        // whatever the prior was
        return Err(Error::InvalidArgument {
            name: "model",
            reason: "no measurement coupling; the infinite-window state is undefined".into(),
        });
    }
    let t = crate::statespace::transfers(model)?;
    let s = crate::statespace::spectra(model)?;
    let f = solve_filters(&s)?;
    assemble_vs_analytic(&t, &f)
}

fn closed_form_parts(p: &PhysicalParams) -> Result<(f64, f64, f64)> {
    if !p.is_free_mass() {
        return Err(Error::InvalidArgument {
            name: "params",
            reason: "closed forms hold for a free mass (ω_m = κ_m = 0)".into(),
        });
    }
    if !(p.efficiency > 0.0) {
        return Err(Error::InvalidArgument {
            name: "efficiency",
            reason: "closed forms need η > 0".into(),
        });
    }
    if !(p.coupling != 0.0) {
        return Err(Error::InvalidArgument {
            name: "coupling",
            reason: "closed forms need α ≠ 0".into(),
        });
    }
    let z = derive_scales(p).zeta_f;
    let q = HBAR * z / (std::f64::consts::SQRT_2 * p.efficiency);
    let a2 = p.coupling * p.coupling;
    // m Ω_q = √(m α² / ħ) carries the units of momentum over position
    let xx = q * 2f64.powf(0.25) * (HBAR / (z * p.mass * a2)).sqrt();
    let pp = q * 2f64.powf(0.75) * (z * p.mass * a2 / HBAR).sqrt();
    if z == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    Ok((xx, q, pp))
}

/// Infinite-window free-mass `V_s`.
pub fn vs_closed_form(p: &PhysicalParams) -> Result<Matrix2<f64>> {
    let (xx, xp, pp) = closed_form_parts(p)?;
    Ok(Matrix2::new(xx, xp, xp, pp))
}

/// Infinite-window free-mass tomography error: `V_s` with the correlation negated.
pub fn vv_closed_form(p: &PhysicalParams) -> Result<Matrix2<f64>> {
    let (xx, xp, pp) = closed_form_parts(p)?;
    Ok(Matrix2::new(xx, -xp, -xp, pp))
}

/// `ħ² ζ_F² / (2η²)`.
pub fn det_vs_closed_form(p: &PhysicalParams) -> f64 {
    let z = derive_scales(p).zeta_f;
    HBAR * HBAR * z * z / (2.0 * p.efficiency * p.efficiency)
}

/// `-ln(√2 ζ_F / η)`.
pub fn steerability_closed_form(p: &PhysicalParams) -> f64 {
    let z = derive_scales(p).zeta_f;
    -(std::f64::consts::SQRT_2 * z / p.efficiency).ln()
}

/// `-ln(4 ζ_F / η)`, the value of `-ln(2√det(V_s + V_v)/ħ)` for the closed forms.
pub fn verifiable_closed_form(p: &PhysicalParams) -> f64 {
    let z = derive_scales(p).zeta_f;
    -(4.0 * z / p.efficiency).ln()
}

/// Window long enough for the record to forget the initial state:
/// `12 / min Im ω_j`, falling back to `12 / (2^{1/4} √ζ_F Ω_q)` when the
/// factorization is unavailable and to the configured window when neither
/// rate is finite.
pub fn default_window(model: &crate::statespace::LinearModel) -> f64 {
    let p = &model.params;
    let from_roots = crate::statespace::spectra(model)
        .and_then(|s| conditional_spectrum(&s))
        .and_then(|d| factorize(&d))
        .ok()
        .and_then(|f| f.slowest_rate());
    let rate = from_roots.unwrap_or_else(|| {
        let s = derive_scales(p);
        2f64.powf(0.25) * s.zeta_f.sqrt() * s.omega_q
    });
    if rate > 0.0 && rate.is_finite() {
        12.0 / rate
    } else {
        p.window
    }
}
