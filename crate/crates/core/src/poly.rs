//! Dense polynomials in one complex variable with complex coefficients.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Coefficients below this fraction of the largest one are dropped from the
/// leading end.
pub const TRIM_RELATIVE: f64 = 1e-12;

/// Polynomial stored with ascending coefficients; the zero polynomial has no
/// coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// `∏ (ω - r)`.
    pub fn from_roots<'a>(roots: impl IntoIterator<Item = &'a C64>) -> Self {
        let mut p = Self::constant(C64::new(1.0, 0.0));
        for r in roots {
            p = p.mul(&Self::new(vec![-r, C64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |c_k| r^k`, the natural scale of `|p(z)|` on `|z| = r`.
    pub fn magnitude_at(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or_default()
                        + other.coeffs.get(k).copied().unwrap_or_default()
                })
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// `p(-ω)`.
    pub fn reflect(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
                .collect(),
        )
    }

    /// `conj(p(conj ω))`: equals the complex conjugate of `p` on the real axis.
    pub fn sharp(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// Drop leading coefficients that are negligible relative to the largest.
    pub fn trimmed(&self, relative: f64) -> Self {
        self.trimmed_below(relative * self.max_abs())
    }

    /// Drop leading coefficients with modulus at most `cutoff`.
    pub fn trimmed_below(&self, cutoff: f64) -> Self {
        let mut c = self.coeffs.clone();
        while c.last().is_some_and(|x| x.norm() <= cutoff) {
            c.pop();
        }
        Self::new(c)
    }

    /// Synthetic division by `(ω - r)`: returns quotient and remainder `p(r)`.
    pub fn deflate(&self, r: C64) -> (Self, C64) {
        let n = self.coeffs.len();
        if n == 0 {
            return (Self::zero(), C64::new(0.0, 0.0));
        }
        let mut q = vec![C64::new(0.0, 0.0); n - 1];
        let mut acc = C64::new(0.0, 0.0);
        for k in (0..n).rev() {
            acc = acc * r + self.coeffs[k];
            if k > 0 {
                q[k - 1] = acc;
            }
        }
        (Self::new(q), acc)
    }

    /// Taylor coefficients of `p` about `r`, `p(r + h) = Σ t_k h^k`, up to
    /// `order` terms.
    pub fn taylor(&self, r: C64, order: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(order);
        let mut cur = self.clone();
        for _ in 0..order {
            let (q, rem) = cur.deflate(r);
            out.push(rem);
            cur = q;
        }
        out
    }

    /// Polynomial long division; panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![C64::new(0.0, 0.0); rem.len() - dd];
        for k in (0..quot.len()).rev() {
            let c = rem[k + dd] / lead;
            quot[k] = c;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= c * d;
            }
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    /// All roots, from the eigenvalues of the companion matrix followed by one
    /// Newton step on the original polynomial.
    ///
    /// Highly symmetric polynomials such as `ω⁴ + c` can stall the shifted QR
    /// iteration; those are retried on a slightly translated variable.
    pub fn roots(&self) -> Result<Vec<C64>> {
        let p = self.trimmed(TRIM_RELATIVE);
        let n = match p.degree() {
            None | Some(0) => return Ok(Vec::new()),
            Some(n) => n,
        };
        let scale = root_radius(&p);
        let offsets = [
            C64::new(0.0, 0.0),
            C64::new(0.0123, 0.0311) * scale,
            C64::new(-0.0271, 0.0173) * scale,
        ];
        let eig = offsets
            .iter()
            .find_map(|&s| {
                let q = Self::new(p.taylor(s, n + 1));
                companion_eigenvalues(&q).map(|e| e.into_iter().map(|z| z + s).collect::<Vec<_>>())
            })
            .ok_or(Error::RootFinding { degree: n })?;
        let dp = p.derivative();
        Ok(eig
            .into_iter()
            .map(|z| {
                let d = dp.eval(z);
                if d.norm() > 0.0 {
                    let polished = z - p.eval(z) / d;
                    if polished.is_finite() && p.eval(polished).norm() <= p.eval(z).norm() {
                        return polished;
                    }
                }
                z
            })
            .collect())
    }
}

/// Cauchy-type bound on the root moduli, used only to set offsets.
fn root_radius(p: &Poly) -> f64 {
    let lead = p.leading().norm();
    let n = p.coeffs.len() - 1;
    p.coeffs[..n]
        .iter()
        .enumerate()
        .map(|(k, c)| (c.norm() / lead).powf(1.0 / (n - k) as f64))
        .fold(0.0, f64::max)
        .max(1e-3)
}

fn companion_eigenvalues(p: &Poly) -> Option<Vec<C64>> {
    let n = p.degree()?;
    let lead = p.leading();
    let mut companion = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        companion[(i, n - 1)] = -p.coeffs[i] / lead;
    }
    let eig = Schur::try_new(companion, f64::EPSILON, 10_000)?.eigenvalues()?;
    eig.iter().all(|z| z.is_finite()).then(|| eig.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_and_roots_of_quadratic() {
        // (ω - i)(ω + 2) = ω² + (2 - i)ω - 2i
        let p = Poly::from_roots(&[c(0.0, 1.0), c(-2.0, 0.0)]);
        assert!((p.eval(c(0.0, 1.0))).norm() < 1e-15);
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-13);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn quartic_roots_on_circle() {
        // ω⁴ + 2 ζ² with ζ² = 1/8: |ω| = 2^{1/4} √ζ
        let z2 = 0.125;
        let p = Poly::from_real(&[2.0 * z2, 0.0, 0.0, 0.0, 1.0]);
        let radius = 2f64.powf(0.25) * z2.sqrt().sqrt();
        for r in p.roots().unwrap() {
            assert!((r.norm() - radius).abs() < 1e-12);
            let angle = r.arg().abs();
            let ok = (angle - std::f64::consts::FRAC_PI_4).abs() < 1e-10
                || (angle - 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-10;
            assert!(ok, "angle {angle}");
        }
    }

    #[test]
    fn deflate_and_taylor() {
        let p = Poly::from_real(&[1.0, 2.0, 3.0]);
        let (q, r) = p.deflate(c(1.0, 0.0));
        assert_eq!(r, c(6.0, 0.0));
        assert_eq!(q, Poly::from_real(&[5.0, 3.0]));
        // p(1 + h) = 6 + 8h + 3h²
        assert_eq!(p.taylor(c(1.0, 0.0), 3), vec![c(6.0, 0.0), c(8.0, 0.0), c(3.0, 0.0)]);
    }

    #[test]
    fn long_division() {
        let a = Poly::from_real(&[1.0, 0.0, 0.0, 1.0]);
        let b = Poly::from_real(&[1.0, 1.0]);
        let (q, r) = a.div_rem(&b);
        assert_eq!(q, Poly::from_real(&[1.0, -1.0, 1.0]));
        assert!(r.is_zero());
    }

    #[test]
    fn reflect_and_sharp() {
        let p = Poly::new(vec![c(1.0, 1.0), c(2.0, -1.0)]);
        let w = c(0.3, 0.0);
        assert!((p.reflect().eval(w) - p.eval(-w)).norm() < 1e-15);
        assert!((p.sharp().eval(w) - p.eval(w).conj()).norm() < 1e-15);
    }
}
