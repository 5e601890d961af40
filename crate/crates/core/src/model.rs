//! Physical parameters of a continuously monitored optomechanical oscillator.
//!
//! All quantities are stored in an internal unit system where the reduced
//! Planck constant is one. [`UnitSystem`] converts laboratory values into it
//! by fixing the mass and a reference frequency to one as well; the scale
//! factors are kept so that results can be reported back in laboratory units.

use std::fmt;

/// Reduced Planck constant in internal units.
pub const HBAR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Oscillator mass `m`.
    pub mass: f64,
    /// Mechanical resonance `ω_m` (rad/s). Zero together with zero damping
    /// selects the free-mass limit.
    pub mech_freq: f64,
    /// Mechanical damping rate `κ_m` (rad/s).
    pub mech_damping: f64,
    /// Single-sided thermal force spectrum `S_F^th = 4 m κ_m k_B T`.
    pub thermal_force: f64,
    /// Effective coupling `α` (force per unit amplitude quadrature).
    pub coupling: f64,
    /// Cavity bandwidth `κ` (rad/s).
    pub cavity_bandwidth: f64,
    /// Cavity detuning `Δ` (rad/s).
    pub detuning: f64,
    /// Photodetection efficiency `η`.
    pub efficiency: f64,
    /// Measurement window `τ` (s); the record covers `[-τ, 0]`.
    pub window: f64,
    /// Thermal occupation `n₀` of the oscillator prior at the window start.
    pub initial_occupation: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            mech_freq: 0.0,
            mech_damping: 0.0,
            thermal_force: 0.0,
            coupling: 1.0,
            cavity_bandwidth: 100.0,
            detuning: 0.0,
            efficiency: 1.0,
            window: 30.0,
            initial_occupation: 0.0,
        }
    }
}

impl PhysicalParams {
    /// Free mass with unit mass, the given coupling and efficiency, and no
    /// thermal force.
    pub fn free_mass(coupling: f64, efficiency: f64) -> Self {
        Self {
            coupling,
            efficiency,
            ..Self::default()
        }
    }

    pub fn with_thermal_force(mut self, thermal_force: f64) -> Self {
        self.thermal_force = thermal_force;
        self
    }

    pub fn with_oscillator(mut self, mech_freq: f64, mech_damping: f64) -> Self {
        self.mech_freq = mech_freq;
        self.mech_damping = mech_damping;
        self
    }

    pub fn with_window(mut self, window: f64) -> Self {
        self.window = window;
        self
    }

    /// `ω_m = 0` and `κ_m = 0` exactly.
    pub fn is_free_mass(&self) -> bool {
        self.mech_freq == 0.0 && self.mech_damping == 0.0
    }

    /// Reference frequency for zero-point scales and the thermal prior:
    /// `ω_m`, or `Ω_q` for a free mass (the internal unit when both vanish).
    pub fn reference_frequency(&self) -> f64 {
        let w = if self.mech_freq > 0.0 {
            self.mech_freq
        } else {
            quantum_frequency(self)
        };
        if w > 0.0 {
            w
        } else {
            1.0
        }
    }

    /// Zero-point position and momentum uncertainties `(Δx_q, Δp_q)` at the
    /// reference frequency.
    pub fn zero_point(&self) -> (f64, f64) {
        let w = self.reference_frequency();
        (
            (HBAR / (2.0 * self.mass * w)).sqrt(),
            (HBAR * self.mass * w / 2.0).sqrt(),
        )
    }

    /// Smallest force-noise level compatible with the damping at zero
    /// temperature, `2 m κ_m ħ ω_m`. Below it conditional states can violate
    /// the uncertainty relation.
    pub fn thermal_floor(&self) -> f64 {
        2.0 * self.mass * self.mech_damping * HBAR * self.mech_freq
    }

    /// `S_F^th / α²`, zero when there is no thermal force.
    pub fn thermal_ratio(&self) -> f64 {
        if self.thermal_force == 0.0 {
            0.0
        } else {
            self.thermal_force / (self.coupling * self.coupling)
        }
    }
}

/// `α = √(8/κ) ħ g` from a raw optomechanical coupling `g`.
pub fn coupling_from_raw(raw: f64, cavity_bandwidth: f64) -> f64 {
    (8.0 / cavity_bandwidth).sqrt() * HBAR * raw
}

/// Inverse of [`coupling_from_raw`].
pub fn raw_from_coupling(coupling: f64, cavity_bandwidth: f64) -> f64 {
    coupling / ((8.0 / cavity_bandwidth).sqrt() * HBAR)
}

fn quantum_frequency(p: &PhysicalParams) -> f64 {
    (p.coupling * p.coupling / (HBAR * p.mass)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    pub zeta_f: f64,
    /// Thermal-force frequency `√(S_F^th / (2ħm))`.
    pub omega_f: f64,
    /// Back-action frequency `√(α² / (ħm))`.
    pub omega_q: f64,
    /// Sensing frequency `Ω_q √(2η/(1-η))`; `f64::INFINITY` at `η = 1`.
    pub omega_x: f64,
    /// Single-sided radiation-pressure force spectrum `α²`.
    pub force_rp: f64,
}

pub fn derive_scales(p: &PhysicalParams) -> DerivedScales {
    let eta = p.efficiency;
    let zeta_f = (eta / 2.0 * ((1.0 - eta) + p.thermal_ratio())).sqrt();
    let omega_q = quantum_frequency(p);
    let omega_f = (p.thermal_force / (2.0 * HBAR * p.mass)).sqrt();
    let omega_x = if eta >= 1.0 {
        f64::INFINITY
    } else {
        omega_q * (2.0 * eta / (1.0 - eta)).sqrt()
    };
    DerivedScales {
        zeta_f,
        omega_f,
        omega_q,
        omega_x,
        force_rp: p.coupling * p.coupling,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub fn validate(p: &PhysicalParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, message: &str| {
        if !ok {
            out.push(Violation {
                field,
                message: message.to_string(),
            });
        }
    };
    let fields = [
        ("mass", p.mass),
        ("mech_freq", p.mech_freq),
        ("mech_damping", p.mech_damping),
        ("thermal_force", p.thermal_force),
        ("coupling", p.coupling),
        ("cavity_bandwidth", p.cavity_bandwidth),
        ("detuning", p.detuning),
        ("efficiency", p.efficiency),
        ("window", p.window),
        ("initial_occupation", p.initial_occupation),
    ];
    for (name, v) in fields {
        check(v.is_finite(), name, "must be finite");
    }
    check(!(p.mass <= 0.0), "mass", "mass must be positive");
    check(!(p.mech_freq < 0.0), "mech_freq", "mechanical frequency must be non-negative");
    check(!(p.mech_damping < 0.0), "mech_damping", "mechanical damping must be non-negative");
    check(
        !(p.cavity_bandwidth <= 0.0),
        "cavity_bandwidth",
        "cavity bandwidth must be positive",
    );
    check(
        (0.0..=1.0).contains(&p.efficiency) || p.efficiency.is_nan(),
        "efficiency",
        "efficiency out of [0,1]",
    );
    check(!(p.window <= 0.0), "window", "window must be positive");
    check(
        !(p.thermal_force < 0.0),
        "thermal_force",
        "thermal force spectrum must be non-negative",
    );
    check(
        !(p.initial_occupation < 0.0),
        "initial_occupation",
        "initial occupation must be non-negative",
    );
    out
}

pub fn ensure_valid(p: &PhysicalParams) -> crate::Result<()> {
    let v = validate(p);
    if v.is_empty() {
        Ok(())
    } else {
        Err(crate::Error::InvalidParams(v))
    }
}

/// Conversion between laboratory values and internal units (`ħ = m = Ω_ref = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    pub omega_ref: f64,
}

impl UnitSystem {
    /// Unit system with `Ω_ref = Ω_q` of the given laboratory parameters.
    pub fn quantum_reference(hbar: f64, lab: &PhysicalParams) -> Self {
        let omega_ref = (lab.coupling * lab.coupling / (hbar * lab.mass)).sqrt();
        Self {
            hbar,
            mass: lab.mass,
            omega_ref,
        }
    }

    pub fn identity() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            omega_ref: 1.0,
        }
    }

    pub fn time_unit(&self) -> f64 {
        1.0 / self.omega_ref
    }

    pub fn position_unit(&self) -> f64 {
        (self.hbar / (self.mass * self.omega_ref)).sqrt()
    }

    pub fn momentum_unit(&self) -> f64 {
        (self.hbar * self.mass * self.omega_ref).sqrt()
    }

    /// Unit of force spectra (`α²`, `S_F^th`).
    pub fn force_spectrum_unit(&self) -> f64 {
        self.hbar * self.mass * self.omega_ref * self.omega_ref
    }

    pub fn to_internal(&self, lab: &PhysicalParams) -> PhysicalParams {
        let w = self.omega_ref;
        let f = self.force_spectrum_unit();
        PhysicalParams {
            mass: lab.mass / self.mass,
            mech_freq: lab.mech_freq / w,
            mech_damping: lab.mech_damping / w,
            thermal_force: lab.thermal_force / f,
            coupling: lab.coupling / f.sqrt(),
            cavity_bandwidth: lab.cavity_bandwidth / w,
            detuning: lab.detuning / w,
            efficiency: lab.efficiency,
            window: lab.window * w,
            initial_occupation: lab.initial_occupation,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "hbar=1 mass=1 omega_ref=1; time_unit={:.9e} s position_unit={:.9e} momentum_unit={:.9e}",
            self.time_unit(),
            self.position_unit(),
            self.momentum_unit()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zeta_at_half_efficiency() {
        let s = derive_scales(&PhysicalParams::free_mass(1.0, 0.5));
        assert_relative_eq!(s.zeta_f, 0.125f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.zeta_f, 0.3535534, max_relative = 1e-7);
    }

    #[test]
    fn zeta_vanishes_for_perfect_detection() {
        let s = derive_scales(&PhysicalParams::free_mass(1.0, 1.0));
        assert_eq!(s.zeta_f, 0.0);
        assert!(s.omega_x.is_infinite());
    }

    #[test]
    fn zeta_with_thermal_force() {
        // η = 0.8, S_F^th/α² = 0.1: (0.4)(0.2 + 0.1) = 0.12
        let p = PhysicalParams::free_mass(2.0, 0.8).with_thermal_force(0.4);
        let s = derive_scales(&p);
        assert_relative_eq!(s.zeta_f, 0.12f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s.zeta_f, 0.3464102, epsilon = 1e-7);
    }

    #[test]
    fn characteristic_frequencies() {
        let p = PhysicalParams::free_mass(2.0, 0.5).with_thermal_force(8.0);
        let s = derive_scales(&p);
        assert_relative_eq!(s.omega_q, 2.0, max_relative = 1e-15);
        assert_relative_eq!(s.omega_f, 2.0, max_relative = 1e-15);
        assert_relative_eq!(s.omega_x, 2.0 * 2.0f64.sqrt(), max_relative = 1e-15);
        assert_eq!(s.force_rp, 4.0);
    }

    #[test]
    fn validation_messages() {
        let mut p = PhysicalParams::default();
        assert!(validate(&p).is_empty());
        p.efficiency = 1.2;
        let v = validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "efficiency");
        assert_eq!(v[0].message, "efficiency out of [0,1]");

        let p = PhysicalParams {
            mass: 0.0,
            ..PhysicalParams::default()
        };
        let v = validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "mass must be positive");
    }

    #[test]
    fn nan_is_reported() {
        let p = PhysicalParams {
            window: f64::NAN,
            ..PhysicalParams::default()
        };
        assert!(validate(&p).iter().any(|v| v.field == "window"));
    }

    #[test]
    fn raw_coupling_round_trip() {
        let a = coupling_from_raw(3.0, 50.0);
        assert_relative_eq!(a, (8.0f64 / 50.0).sqrt() * 3.0);
        assert_relative_eq!(raw_from_coupling(a, 50.0), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_system_preserves_dimensionless_combinations() {
        let hbar = 1.054_571_817e-34;
        let lab = PhysicalParams {
            mass: 1e-9,
            mech_freq: 2.0 * std::f64::consts::PI * 1e3,
            mech_damping: 0.5,
            thermal_force: 3e-30,
            coupling: 2e-20,
            cavity_bandwidth: 1e7,
            detuning: 0.0,
            efficiency: 0.8,
            window: 1e-3,
            initial_occupation: 5.0,
        };
        let units = UnitSystem::quantum_reference(hbar, &lab);
        let p = units.to_internal(&lab);
        assert_relative_eq!(p.mass, 1.0);
        assert_relative_eq!(derive_scales(&p).omega_q, 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.thermal_ratio(), lab.thermal_force / lab.coupling.powi(2), max_relative = 1e-12);
        assert_relative_eq!(p.window * p.mech_freq, lab.window * lab.mech_freq, max_relative = 1e-12);
    }

    #[test]
    fn zeta_maximized_at_half() {
        let best = derive_scales(&PhysicalParams::free_mass(1.0, 0.5)).zeta_f;
        for i in 0..=100 {
            let eta = i as f64 / 100.0;
            let z = derive_scales(&PhysicalParams::free_mass(1.0, eta)).zeta_f;
            assert!(z <= best + 1e-15);
        }
        assert_relative_eq!(best, (1.0f64 / 8.0).sqrt());
    }

    proptest! {
        #[test]
        fn scale_covariance(
            eta in 0.05f64..0.95,
            alpha in 0.1f64..10.0,
            ratio in 0.0f64..2.0,
            lambda in 0.1f64..10.0,
        ) {
            let p = PhysicalParams::free_mass(alpha, eta)
                .with_thermal_force(ratio * alpha * alpha)
                .with_oscillator(0.3, 0.01);
            let l2 = lambda * lambda;
            let q = PhysicalParams {
                mech_freq: p.mech_freq * l2,
                mech_damping: p.mech_damping * l2,
                cavity_bandwidth: p.cavity_bandwidth * l2,
                detuning: p.detuning * l2,
                coupling: p.coupling * lambda,
                thermal_force: p.thermal_force * l2,
                window: p.window / lambda,
                ..p
            };
            let a = derive_scales(&p);
            let b = derive_scales(&q);
            prop_assert!((b.zeta_f - a.zeta_f).abs() <= 1e-12 * a.zeta_f.max(1e-300));
            prop_assert!((b.omega_q - lambda * a.omega_q).abs() <= 1e-12 * b.omega_q);
            prop_assert!((b.omega_f - lambda * a.omega_f).abs() <= 1e-12 * b.omega_f.max(1e-300));
            prop_assert!((b.omega_x - lambda * a.omega_x).abs() <= 1e-12 * b.omega_x);
        }

        #[test]
        fn zeta_monotone_in_thermal_force(eta in 0.0f64..=1.0, s1 in 0.0f64..5.0, ds in 0.0f64..5.0) {
            let a = derive_scales(&PhysicalParams::free_mass(1.0, eta).with_thermal_force(s1)).zeta_f;
            let b = derive_scales(&PhysicalParams::free_mass(1.0, eta).with_thermal_force(s1 + ds)).zeta_f;
            prop_assert!(b >= a);
        }
    }
}
