//! Linear state-space models of the monitored oscillator and their spectra.
//!
//! White-noise inputs are ordered `(a₁, a₂, F_th)`, detection noises
//! `(n₁, n₂)`. All carry symmetrized delta-correlated levels: `1/2` for the
//! optical and detection noises, `S_F^th/2` for the thermal force.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::model::{ensure_valid, PhysicalParams, HBAR};
use crate::poly::{Poly, C64};
use crate::rational::{Pole, Rational, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// Cavity adiabatically eliminated; state `(x, p)`.
    Adiabatic,
    /// Explicit cavity mode; state `(x, p, c₁, c₂)`.
    FullCavity,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Adiabatic => "adiabatic",
            Flavor::FullCavity => "cavity",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adiabatic" => Ok(Flavor::Adiabatic),
            "cavity" | "full" | "fullcavity" | "full-cavity" => Ok(Flavor::FullCavity),
            other => Err(Error::InvalidArgument {
                name: "flavor",
                reason: format!("unknown flavor `{other}` (expected adiabatic or cavity)"),
            }),
        }
    }
}

pub const INPUTS: usize = 3;
pub const OUTPUTS: usize = 2;

/// `ẋ = F x + G u`, `y = Cs x + Du u + Dn n`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub flavor: Flavor,
    pub params: PhysicalParams,
    pub drift: DMatrix<f64>,
    pub input: DMatrix<f64>,
    pub output_state: DMatrix<f64>,
    pub output_input: DMatrix<f64>,
    pub output_noise: DMatrix<f64>,
    /// Symmetrized levels of `(a₁, a₂, F_th)`.
    pub input_levels: [f64; INPUTS],
    /// Symmetrized levels of `(n₁, n₂)`.
    pub noise_levels: [f64; OUTPUTS],
    /// Non-fatal remarks about the parameter regime.
    pub warnings: Vec<String>,
}

pub fn build_model(params: &PhysicalParams, flavor: Flavor) -> Result<LinearModel> {
    ensure_valid(params)?;
    let p = *params;
    let m = p.mass;
    let se = p.efficiency.sqrt();
    let sl = (1.0 - p.efficiency).sqrt();
    let mut warnings = Vec::new();
    if p.thermal_force < p.thermal_floor() {
        warnings.push(format!(
            "thermal force {} is below the zero-temperature floor {} set by the damping; \
             conditional states may be unphysical",
            p.thermal_force,
            p.thermal_floor()
        ));
    }
    if p.mech_damping > 0.05 * p.mech_freq {
        warnings.push(format!(
            "mechanical quality factor {:.3} is below 20; viscous damping is then only \
             approximately physical and conditional states may violate the uncertainty bound",
            p.mech_freq / p.mech_damping
        ));
    }
    let (drift, input, output_state, output_input) = match flavor {
        Flavor::Adiabatic => {
            let slowest = p.mech_freq.max(p.mech_damping).max(p.reference_frequency());
            if p.cavity_bandwidth < 10.0 * slowest {
                warnings.push(format!(
                    "cavity bandwidth {} is not large compared with the mechanical scale {}; \
                     the adiabatic model may be inaccurate",
                    p.cavity_bandwidth, slowest
                ));
            }
            let drift = DMatrix::from_row_slice(
                2,
                2,
                &[0.0, 1.0 / m, -m * p.mech_freq.powi(2), -p.mech_damping],
            );
            let input = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, -p.coupling, 0.0, 1.0]);
            let cs = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, se * p.coupling / HBAR, 0.0]);
            let du = DMatrix::from_row_slice(2, 3, &[se, 0.0, 0.0, 0.0, se, 0.0]);
            (drift, input, cs, du)
        }
        Flavor::FullCavity => {
            let k = p.cavity_bandwidth;
            let g = crate::model::raw_from_coupling(p.coupling, k);
            let s2 = std::f64::consts::SQRT_2;
            let d = p.detuning;
            #[rustfmt::skip]
            let drift = DMatrix::from_row_slice(4, 4, &[
                0.0, 1.0 / m, 0.0, 0.0,
                -m * p.mech_freq.powi(2), -p.mech_damping, -s2 * HBAR * g, 0.0,
                0.0, 0.0, -k / 2.0, d,
                -s2 * g, 0.0, -d, -k / 2.0,
            ]);
            #[rustfmt::skip]
            let input = DMatrix::from_row_slice(4, 3, &[
                0.0, 0.0, 0.0,
                0.0, 0.0, 1.0,
                k.sqrt(), 0.0, 0.0,
                0.0, -k.sqrt(), 0.0,
            ]);
            #[rustfmt::skip]
            let cs = DMatrix::from_row_slice(2, 4, &[
                0.0, 0.0, se * k.sqrt(), 0.0,
                0.0, 0.0, 0.0, -se * k.sqrt(),
            ]);
            let du = DMatrix::from_row_slice(2, 3, &[-se, 0.0, 0.0, 0.0, -se, 0.0]);
            (drift, input, cs, du)
        }
    };
    Ok(LinearModel {
        flavor,
        params: p,
        drift,
        input,
        output_state,
        output_input,
        output_noise: DMatrix::from_diagonal_element(2, 2, sl),
        input_levels: [0.5, 0.5, p.thermal_force / 2.0],
        noise_levels: [0.5, 0.5],
        warnings,
    })
}

impl LinearModel {
    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn input_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.input_levels))
    }

    pub fn noise_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.noise_levels))
    }

    /// State covariance at the start of the window: thermal oscillator at
    /// occupation `n₀` (zero-point scales at the reference frequency) and the
    /// cavity in vacuum.
    pub fn prior_covariance(&self, occupation: f64) -> DMatrix<f64> {
        let (dx, dp) = self.params.zero_point();
        let f = 2.0 * occupation + 1.0;
        let mut p = DMatrix::zeros(self.state_dim(), self.state_dim());
        p[(0, 0)] = f * dx * dx;
        p[(1, 1)] = f * dp * dp;
        for i in 2..self.state_dim() {
            p[(i, i)] = 0.5;
        }
        p
    }

    /// State response at time `t ≥ 0` to a unit impulse on input `which`.
    pub fn impulse_response(&self, which: usize, t: f64) -> DVector<f64> {
        (&self.drift * t).exp() * self.input.column(which)
    }

    /// Steady-state covariance solving `F P + P Fᵀ + G Q Gᵀ = 0`; fails for a
    /// drift without strictly stable modes (a free mass).
    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.state_dim();
        let eye = DMatrix::<f64>::identity(n, n);
        let op = eye.kronecker(&self.drift) + self.drift.kronecker(&eye);
        let w = &self.input * self.input_covariance() * self.input.transpose();
        let rhs = DVector::from_iterator(n * n, w.iter().map(|v| -v));
        let stable = self
            .drift
            .complex_eigenvalues()
            .iter()
            .all(|e| e.re < -1e-12);
        if !stable {
            return Err(Error::InvalidArgument {
                name: "model",
                reason: "drift has no stationary state (undamped modes)".into(),
            });
        }
        let sol = op.lu().solve(&rhs).ok_or(Error::InvalidArgument {
            name: "model",
            reason: "singular Lyapunov operator".into(),
        })?;
        let p = DMatrix::from_column_slice(n, n, sol.as_slice());
        Ok((&p + p.transpose()) * 0.5)
    }
}

/// Mechanical Green's function in the high-quality-factor form
/// `e^{-κ_m t/2} sin(ω_m t) / (m ω_m)`, or `t/m` for a free mass.
pub fn green_x(params: &PhysicalParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument {
            name: "t",
            reason: format!("time must be non-negative, got {t}"),
        });
    }
    let m = params.mass;
    let decay = (-params.mech_damping * t / 2.0).exp();
    if params.mech_freq == 0.0 {
        return Ok(decay * t / m);
    }
    let w = params.mech_freq;
    Ok(decay * (w * t).sin() / (m * w))
}

/// `2ħ / (m Ω²)`.
pub fn sql_spectrum(omega: f64, mass: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument {
            name: "omega",
            reason: format!("frequency must be positive, got {omega}"),
        });
    }
    Ok(2.0 * HBAR / (mass * omega * omega))
}

/// Displacement-referred noise curves at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCurves {
    pub sql: f64,
    pub thermal: f64,
    pub backaction: f64,
    pub sensing: f64,
}

/// Force noises fall as `ω⁻⁴` and sensing noise is flat; each is normalized
/// so that it meets the SQL at its characteristic frequency.
pub fn noise_curves(params: &PhysicalParams, omega: f64) -> Result<NoiseCurves> {
    let s = crate::model::derive_scales(params);
    let m = params.mass;
    let sql = sql_spectrum(omega, m)?;
    let w4 = omega.powi(4);
    Ok(NoiseCurves {
        sql,
        thermal: 2.0 * HBAR * s.omega_f.powi(2) / (m * w4),
        backaction: 2.0 * HBAR * s.omega_q.powi(2) / (m * w4),
        sensing: 2.0 * HBAR / (m * s.omega_x.powi(2)),
    })
}

/// `G̃_x(ω) = -1 / (m(ω² - ω_m² + iκ_m ω))` with causal (lower) poles.
pub fn green_x_spectrum(params: &PhysicalParams) -> Rational {
    let (w, k) = (params.mech_freq, params.mech_damping);
    let disc = C64::new(4.0 * w * w - k * k, 0.0).sqrt();
    let half_damp = C64::new(0.0, -k / 2.0);
    let poles = [half_damp + disc / 2.0, half_damp - disc / 2.0]
        .into_iter()
        .map(|at| Pole::located(at).unwrap_or(Pole::tagged(C64::new(at.re, 0.0), Side::Lower)))
        .collect();
    Rational::new(Poly::constant(C64::new(-1.0 / params.mass, 0.0)), poles)
}

pub const TRANSFER_INPUTS: usize = 5;

/// Frequency responses of `(y₁, y₂)` and `(x, p)` to the inputs
/// `(a₁, a₂, F_th, n₁, n₂)`.
#[derive(Debug, Clone)]
pub struct Transfers {
    pub outputs: [[Rational; TRANSFER_INPUTS]; 2],
    pub state: [[Rational; TRANSFER_INPUTS]; 2],
    pub levels: [f64; TRANSFER_INPUTS],
}

pub fn transfers(model: &LinearModel) -> Result<Transfers> {
    if model.flavor != Flavor::Adiabatic {
        return Err(Error::WrongFlavor {
            expected: "adiabatic",
        });
    }
    let p = &model.params;
    let g = green_x_spectrum(p);
    let se = p.efficiency.sqrt();
    let sl = (1.0 - p.efficiency).sqrt();
    let a = p.coupling;
    let r = Rational::real;
    let z = Rational::zero;
    let x = [g.scale_real(-a), z(), g.clone(), z(), z()];
    let iwm = Rational::from_poly(Poly::new(vec![C64::new(0.0, 0.0), C64::new(0.0, -p.mass)]));
    let mom = x.clone().map(|t| iwm.mul(&t));
    let y2 = [
        g.scale_real(-se * a * a / HBAR),
        r(se),
        g.scale_real(se * a / HBAR),
        z(),
        r(sl),
    ];
    let y1 = [r(se), z(), z(), r(sl), z()];
    let [q1, q2, q3] = model.input_levels;
    let [n1, n2] = model.noise_levels;
    Ok(Transfers {
        outputs: [y1, y2],
        state: [x, mom],
        levels: [q1, q2, q3, n1, n2],
    })
}

impl Transfers {
    /// `2 Σ_n U_n σ_n V_n^♯`: twice the symmetrized cross-spectrum.
    pub fn cross(&self, u: &[Rational; TRANSFER_INPUTS], v: &[Rational; TRANSFER_INPUTS]) -> Rational {
        let mut acc = Rational::zero();
        for n in 0..TRANSFER_INPUTS {
            if self.levels[n] == 0.0 || u[n].is_zero() || v[n].is_zero() {
                continue;
            }
            acc = acc.add(&u[n].mul(&v[n].sharp()).scale_real(2.0 * self.levels[n]));
        }
        acc
    }
}

/// Doubled symmetrized spectra: `B̃_kl` between outputs, `C̃_kj` between
/// output `k` and state component `j` (x then p), and `S̃_xx`.
#[derive(Debug, Clone)]
pub struct Spectra {
    pub b: [[Rational; 2]; 2],
    pub c: [[Rational; 2]; 2],
    pub sxx: Rational,
}

pub fn spectra(model: &LinearModel) -> Result<Spectra> {
    let t = transfers(model)?;
    let [y1, y2] = &t.outputs;
    let [x, p] = &t.state;
    Ok(Spectra {
        b: [[t.cross(y1, y1), t.cross(y1, y2)], [t.cross(y2, y1), t.cross(y2, y2)]],
        c: [[t.cross(y1, x), t.cross(y1, p)], [t.cross(y2, x), t.cross(y2, p)]],
        sxx: t.cross(x, x),
    })
}

impl Spectra {
    pub fn named(&self) -> Vec<(&'static str, &Rational)> {
        vec![
            ("B11", &self.b[0][0]),
            ("B12", &self.b[0][1]),
            ("B21", &self.b[1][0]),
            ("B22", &self.b[1][1]),
            ("C11", &self.c[0][0]),
            ("C12", &self.c[0][1]),
            ("C21", &self.c[1][0]),
            ("C22", &self.c[1][1]),
            ("Sxx", &self.sxx),
        ]
    }

    pub fn b_matrix(&self, omega: f64) -> nalgebra::Matrix2<C64> {
        nalgebra::Matrix2::new(
            self.b[0][0].eval_real(omega),
            self.b[0][1].eval_real(omega),
            self.b[1][0].eval_real(omega),
            self.b[1][1].eval_real(omega),
        )
    }
}
