//! Gaussian conditioning on measurement records: conditional states, optimal
//! homodyne schedules, steerability and retrodictive tomography error.

use faer::Mat;
use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::gram::{discretize, record_blocks, CovarianceBlocks, QuadratureSchedule, TimeGrid};
use crate::linalg::SpdFactor;
use crate::model::{derive_scales, PhysicalParams};
use crate::statespace::LinearModel;
use crate::{Error, Result};

/// Oscillator state conditioned on a single-quadrature record.
#[derive(Debug, Clone)]
pub struct ConditionalState {
    /// `V_m^θ`, covariance of `(x(0), p(0))` given the record.
    pub covariance: Matrix2<f64>,
    /// `B_θ⁻¹ C_θ`: column 0 estimates `x(0)`, column 1 `p(0)` from `y_θ`.
    pub gains: Mat<f64>,
    pub schedule: QuadratureSchedule,
    /// Conditional mean, present when a record was supplied.
    pub mean: Option<Vector2<f64>>,
}

impl ConditionalState {
    /// `(x̄, p̄)` for an outcome string `y_θ`.
    pub fn estimate(&self, outcomes: &[f64]) -> Result<Vector2<f64>> {
        let n = self.gains.nrows();
        if outcomes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: outcomes.len(),
            });
        }
        let mut m = Vector2::zeros();
        for (k, y) in outcomes.iter().enumerate() {
            m[0] += self.gains[(k, 0)] * y;
            m[1] += self.gains[(k, 1)] * y;
        }
        Ok(m)
    }

    /// Gains spread over the stacked `(y₁, y₂)` layout, `2N × 2`.
    pub fn expanded_gains(&self) -> Mat<f64> {
        let n = self.gains.nrows();
        Mat::from_fn(2 * n, 2, |r, i| {
            let k = r % n;
            let (s, c) = self.schedule.weights(k);
            self.gains[(k, i)] * if r < n { s } else { c }
        })
    }
}

pub fn condition_single(
    blocks: &CovarianceBlocks,
    schedule: &QuadratureSchedule,
    record: Option<&[f64]>,
) -> Result<ConditionalState> {
    let proj = blocks.project_theta(schedule)?;
    let factor = SpdFactor::new(proj.b, "B_theta")?;
    let z = factor.whiten(proj.c.as_ref());
    let covariance = blocks.a - small_gram(&z);
    let gains = factor.solve(proj.c.as_ref());
    let mut state = ConditionalState {
        covariance,
        gains,
        schedule: schedule.clone(),
        mean: None,
    };
    if let Some(y) = record {
        state.mean = Some(state.estimate(y)?);
    }
    Ok(state)
}

/// `Zᵀ Z` for an `n × 2` matrix, symmetrized.
fn small_gram(z: &Mat<f64>) -> Matrix2<f64> {
    let g = z.transpose() * z;
    let m = Matrix2::new(g[(0, 0)], g[(0, 1)], g[(1, 0)], g[(1, 1)]);
    (m + m.transpose()) * 0.5
}

/// `V_s = A - Cᵀ B⁻¹ C`, conditioning jointly on both output quadratures.
pub fn condition_joint(blocks: &CovarianceBlocks) -> Matrix2<f64> {
    let z = blocks.factor().whiten(blocks.c.as_ref());
    blocks.a - small_gram(&z)
}

/// `B⁻¹ C`, the joint filters over the stacked record.
pub fn joint_gains(blocks: &CovarianceBlocks) -> Mat<f64> {
    blocks.factor().solve(blocks.c.as_ref())
}

/// `v_φ = (sin φ / Δx_q, cos φ / Δp_q)`.
pub fn quadrature_vector(phi: f64, dx: f64, dp: f64) -> Result<Vector2<f64>> {
    if !(dx > 0.0 && dp > 0.0) {
        return Err(Error::InvalidArgument {
            name: "zero-point reference",
            reason: format!("Δx_q and Δp_q must be positive, got {dx} and {dp}"),
        });
    }
    Ok(Vector2::new(phi.sin() / dx, phi.cos() / dp))
}

/// Smallest variance of the normalized quadrature `φ` reachable by any
/// single-quadrature schedule: `v_φ V_s v_φᵀ`.
pub fn min_variance(blocks: &CovarianceBlocks, phi: f64, dx: f64, dp: f64) -> Result<f64> {
    let v = quadrature_vector(phi, dx, dp)?;
    Ok(v.dot(&(condition_joint(blocks) * v)))
}

/// `v_φ V v_φᵀ` for any covariance.
pub fn quadrature_variance(cov: &Matrix2<f64>, phi: f64, dx: f64, dp: f64) -> Result<f64> {
    let v = quadrature_vector(phi, dx, dp)?;
    Ok(v.dot(&(cov * v)))
}

/// Homodyne angles whose single-quadrature record carries the joint optimal
/// estimator of quadrature `φ`: `θ_k = atan2(k_k, k_{N+k})` with
/// `k = v_φ Cᵀ B⁻¹`. Samples where both components vanish get angle 0 and
/// are flagged.
pub fn optimal_schedule(blocks: &CovarianceBlocks, phi: f64, dx: f64, dp: f64) -> Result<QuadratureSchedule> {
    let v = quadrature_vector(phi, dx, dp)?;
    let g = joint_gains(blocks);
    let n = blocks.samples();
    let mut angles = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    for k in 0..n {
        let a = v[0] * g[(k, 0)] + v[1] * g[(k, 1)];
        let b = v[0] * g[(n + k, 0)] + v[1] * g[(n + k, 1)];
        if a.hypot(b) <= f64::MIN_POSITIVE {
            degenerate.push(k);
            angles.push(0.0);
        } else {
            angles.push(a.atan2(b));
        }
    }
    QuadratureSchedule::flagged(angles, degenerate)
}

/// `4 det V / ħ²`, the quantity both steering tests compare with 1.
pub fn heisenberg_ratio(v: &Matrix2<f64>, hbar: f64) -> f64 {
    4.0 * v.determinant() / (hbar * hbar)
}

/// `S = -ln(2 √det V_s / ħ)`.
pub fn steerability(vs: &Matrix2<f64>, hbar: f64) -> Result<f64> {
    let r = heisenberg_ratio(vs, hbar);
    if !(r > 0.0) {
        return Err(Error::NonPositiveDeterminant {
            det: vs.determinant(),
        });
    }
    Ok(-0.5 * r.ln())
}

/// Gaussian steering test: `true` when `V_s` is Heisenberg limited, i.e. the
/// state is NOT steerable.
pub fn wiseman_not_steerable(vs: &Matrix2<f64>, hbar: f64) -> bool {
    heisenberg_ratio(vs, hbar) >= 1.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringReport {
    pub vs: Matrix2<f64>,
    pub s: f64,
    pub steerable: bool,
    pub wiseman_not_steerable: bool,
    /// The two predicates agree.
    pub wiseman_consistent: bool,
}

pub fn steering_report(vs: &Matrix2<f64>, hbar: f64) -> Result<SteeringReport> {
    let s = steerability(vs, hbar)?;
    let not_steerable = wiseman_not_steerable(vs, hbar);
    Ok(SteeringReport {
        vs: *vs,
        s,
        steerable: s > 0.0,
        wiseman_not_steerable: not_steerable,
        wiseman_consistent: (s > 0.0) != not_steerable,
    })
}

/// Covariance of `(x(0), p(0))` estimated from data taken after `t = 0`.
///
/// The record spans `samples` bins of the grid step following `t = 0`. The
/// mechanical prior at `t = 0` is the thermal reference covariance scaled by
/// `prior_scale`; any cavity mode keeps its vacuum prior. The result is
/// accepted only if increasing the scale tenfold changes it by less than
/// `1e-3` (relative).
pub fn retrodict_vv(model: &LinearModel, grid: &TimeGrid, prior_scale: f64) -> Result<Matrix2<f64>> {
    if !(prior_scale > 0.0 && prior_scale.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "prior_scale",
            reason: format!("must be positive and finite, got {prior_scale}"),
        });
    }
    let d = discretize(model, grid.step());
    let n = grid.samples();
    let dim = model.state_dim();
    let zero = DMatrix::<f64>::zeros(dim, dim);
    let noise = SpdFactor::new(record_blocks(&d, &zero, n).0, "B_noise")?;

    // response of the record to the state at t = 0: rows Hs Φ^k
    let mut h = Mat::<f64>::zeros(2 * n, dim);
    let mut pow = DMatrix::<f64>::identity(dim, dim);
    for k in 0..n {
        let r = &d.hs * &pow;
        for s in 0..2 {
            for j in 0..dim {
                h[(s * n + k, j)] = r[(s, j)];
            }
        }
        pow = &d.phi * pow;
    }
    let z = noise.whiten(h.as_ref());
    let zz = z.transpose() * &z;
    let info = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (zz[(i, j)] + zz[(j, i)]));
    let reference = model.prior_covariance(0.0);
    let at = |scale: f64| -> Result<Matrix2<f64>> {
        let mut prior = reference.clone();
        for i in 0..2 {
            for j in 0..2 {
                prior[(i, j)] *= scale;
            }
        }
        let post = (prior
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { what: "prior", pivot: 0 })?
            + &info)
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { what: "posterior information", pivot: 0 })?;
        let m = Matrix2::new(post[(0, 0)], post[(0, 1)], post[(1, 0)], post[(1, 1)]);
        Ok((m + m.transpose()) * 0.5)
    };
    let v = at(prior_scale)?;
    let wider = at(10.0 * prior_scale)?;
    let change = (wider - v).norm() / wider.norm();
    if !(change < 1e-3) {
        return Err(Error::NonConvergence { change });
    }
    Ok(wider)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifiableSteering {
    /// `-ln(2 √det(V_s + V_v) / ħ)`.
    pub s_v: f64,
    /// `-ln(2ζ_F/η)`, the scalar expression quoted alongside the matrix
    /// formula, when parameters are supplied.
    pub comparator: Option<f64>,
}

pub fn verifiable_steering(
    vs: &Matrix2<f64>,
    vv: &Matrix2<f64>,
    hbar: f64,
    params: Option<&PhysicalParams>,
) -> Result<VerifiableSteering> {
    let s_v = steerability(&(vs + vv), hbar)?;
    let comparator = params.map(|p| {
        let z = derive_scales(p).zeta_f;
        -(2.0 * z / p.efficiency).ln()
    });
    Ok(VerifiableSteering { s_v, comparator })
}
