//! Rational functions of frequency with explicit, half-plane-tagged poles.
//!
//! Frequency-domain quantities use `f̃(ω) = ∫ e^{iωt} f(t) dt`. A function
//! whose poles all lie in the lower half-plane is supported on `t > 0`
//! (causal); poles in the upper half-plane give support on `t < 0`.
//!
//! Every pole carries a [`Side`]. Off the real axis it is just the sign of the
//! imaginary part. On the real axis (free-mass double poles at `ω = 0`) it
//! records which half-plane the pole approaches as damping goes to zero, so
//! that causal splitting stays well defined without a numerical regulator.

use std::fmt;

use crate::poly::{Poly, C64, TRIM_RELATIVE};
use crate::{Error, Result};

/// Two poles closer than this (relative) are treated as the same pole.
const MATCH_TOL: f64 = 1e-9;
/// Poles with `|Im p|` below this (relative) are on the real axis.
const REAL_AXIS_TOL: f64 = 1e-12;
/// Numerator zero test used when cancelling common factors.
const CANCEL_TOL: f64 = 1e-9;

/// Half-plane a pole belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Pole of an anticausal function (support `t < 0`).
    Upper,
    /// Pole of a causal function (support `t > 0`).
    Lower,
}

impl Side {
    pub fn flipped(self) -> Self {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub at: C64,
    pub side: Side,
}

impl Pole {
    pub fn tagged(at: C64, side: Side) -> Self {
        Self { at, side }
    }

    /// Pole whose side follows from its location; real-axis points are rejected.
    pub fn located(at: C64) -> Result<Self> {
        if is_real_axis(at) {
            return Err(Error::RealAxisPole {
                at: format!("{at}"),
            });
        }
        let side = if at.im > 0.0 { Side::Upper } else { Side::Lower };
        Ok(Self { at, side })
    }

    pub fn on_real_axis(&self) -> bool {
        is_real_axis(self.at)
    }

    fn coincides(&self, other: &Pole) -> bool {
        (self.at - other.at).norm() <= MATCH_TOL * self.at.norm().max(1.0)
    }

    fn same_as(&self, other: &Pole) -> bool {
        self.side == other.side && self.coincides(other)
    }

    /// Pole of `f(-ω)`.
    pub fn reflect(&self) -> Self {
        Self {
            at: -self.at,
            side: self.side.flipped(),
        }
    }

    /// Pole of `conj(f(conj ω))`.
    pub fn sharp(&self) -> Self {
        Self {
            at: self.at.conj(),
            side: self.side.flipped(),
        }
    }
}

fn is_real_axis(at: C64) -> bool {
    at.im.abs() <= REAL_AXIS_TOL * at.norm().max(1.0)
}

/// Group poles into `(pole, multiplicity)`, matching location and side.
fn group(poles: &[Pole]) -> Vec<(Pole, usize)> {
    let mut out: Vec<(Pole, usize)> = Vec::new();
    for p in poles {
        match out.iter_mut().find(|(q, _)| q.same_as(p)) {
            Some((_, m)) => *m += 1,
            None => out.push((*p, 1)),
        }
    }
    out
}

/// `num(ω) / ∏ (ω - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rational {
    num: Poly,
    poles: Vec<Pole>,
}

impl Rational {
    pub fn new(num: Poly, poles: Vec<Pole>) -> Self {
        Self { num, poles }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(Poly::constant(c), Vec::new())
    }

    pub fn real(c: f64) -> Self {
        Self::constant(C64::new(c, 0.0))
    }

    pub fn zero() -> Self {
        Self::new(Poly::zero(), Vec::new())
    }

    pub fn from_poly(num: Poly) -> Self {
        Self::new(num, Vec::new())
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Denominator degree minus numerator degree.
    pub fn relative_degree(&self) -> isize {
        match self.num.degree() {
            None => isize::MAX,
            Some(d) => self.poles.len() as isize - d as isize,
        }
    }

    pub fn denominator(&self) -> Poly {
        Poly::from_roots(self.poles.iter().map(|p| &p.at))
    }

    pub fn eval(&self, w: C64) -> C64 {
        let den = self
            .poles
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, p| acc * (w - p.at));
        self.num.eval(w) / den
    }

    pub fn eval_real(&self, w: f64) -> C64 {
        self.eval(C64::new(w, 0.0))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.num.scale(s), self.poles.clone())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn neg(&self) -> Self {
        self.scale_real(-1.0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut poles = self.poles.clone();
        poles.extend_from_slice(&other.poles);
        Self::new(self.num.mul(&other.num), poles).cancelled()
    }

    /// Multiply by `∏ (ω - z)` for tagged zeros, removing matching poles
    /// (same location and side) before touching the numerator.
    pub fn mul_zeros(&self, zeros: &[Pole]) -> Self {
        let mut poles = self.poles.clone();
        let mut extra = Vec::new();
        for z in zeros {
            match poles.iter().position(|p| p.same_as(z)) {
                Some(i) => {
                    poles.remove(i);
                }
                None => extra.push(z.at),
            }
        }
        let num = self.num.mul(&Poly::from_roots(extra.iter()));
        Self::new(num, poles)
    }

    pub fn mul_factored(&self, f: &Factored) -> Self {
        let mut out = self.mul_zeros(&f.zeros);
        out.poles.extend_from_slice(&f.poles);
        out.num = out.num.scale(f.gain);
        out.cancelled()
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let ga = group(&self.poles);
        let gb = group(&other.poles);
        let mut lcm: Vec<(Pole, usize)> = ga.clone();
        for (p, m) in &gb {
            match lcm.iter_mut().find(|(q, _)| q.same_as(p)) {
                Some((_, ml)) => *ml = (*ml).max(*m),
                None => lcm.push((*p, *m)),
            }
        }
        let missing = |own: &[(Pole, usize)]| -> Vec<C64> {
            let mut out = Vec::new();
            for (p, m) in &lcm {
                let have = own
                    .iter()
                    .find(|(q, _)| q.same_as(p))
                    .map_or(0, |(_, k)| *k);
                out.extend(std::iter::repeat_n(p.at, m - have));
            }
            out
        };
        let na = self.num.mul(&Poly::from_roots(missing(&ga).iter()));
        let nb = other.num.mul(&Poly::from_roots(missing(&gb).iter()));
        let poles = lcm
            .iter()
            .flat_map(|(p, m)| std::iter::repeat_n(*p, *m))
            .collect();
        // coefficients at rounding level of the operands are cancellation noise
        let cutoff = TRIM_RELATIVE * na.max_abs().max(nb.max_abs());
        Self::new(na.add(&nb).trimmed_below(cutoff), poles).cancelled()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// `f(-ω)`.
    pub fn reflect(&self) -> Self {
        let sign = if self.poles.len() % 2 == 1 { -1.0 } else { 1.0 };
        Self::new(
            self.num.reflect().scale(C64::new(sign, 0.0)),
            self.poles.iter().map(Pole::reflect).collect(),
        )
    }

    /// `conj(f(conj ω))`, the complex conjugate of `f` on the real axis.
    pub fn sharp(&self) -> Self {
        Self::new(
            self.num.sharp(),
            self.poles.iter().map(Pole::sharp).collect(),
        )
    }

    /// Remove factors shared by numerator and denominator.
    ///
    /// A real-axis location holding poles of both sides is only cleared when
    /// the numerator vanishes to the full combined order, since a partial
    /// cancellation there cannot tell which side to keep.
    pub fn cancelled(&self) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        let mut num = self.num.clone();
        let mut poles = self.poles.clone();
        let mut visited: Vec<C64> = Vec::new();
        let mut i = 0;
        while i < poles.len() {
            let p = poles[i];
            if visited
                .iter()
                .any(|v| (v - p.at).norm() <= MATCH_TOL * p.at.norm().max(1.0))
            {
                i += 1;
                continue;
            }
            visited.push(p.at);
            let here: Vec<usize> = poles
                .iter()
                .enumerate()
                .filter(|(_, q)| q.coincides(&p))
                .map(|(k, _)| k)
                .collect();
            let mixed = here.iter().any(|&k| poles[k].side != p.side);
            let r = p.at.norm().max(1.0);
            let mut trial = num.clone();
            let mut order = 0;
            while order < here.len() {
                let (q, rem) = trial.deflate(p.at);
                if q.is_zero() || rem.norm() > CANCEL_TOL * trial.magnitude_at(r) {
                    break;
                }
                trial = q;
                order += 1;
            }
            let remove = if mixed && p.on_real_axis() && order < here.len() {
                0
            } else {
                order
            };
            if remove > 0 {
                let mut t = num.clone();
                for _ in 0..remove {
                    t = t.deflate(p.at).0;
                }
                num = t;
                let mut drop: Vec<usize> = here.into_iter().take(remove).collect();
                drop.sort_unstable_by(|a, b| b.cmp(a));
                for k in drop {
                    poles.remove(k);
                }
                i = 0;
                visited.clear();
                continue;
            }
            i += 1;
        }
        Self::new(num, poles)
    }

    pub fn partial_fractions(&self) -> Result<PartialFractions> {
        let groups = group(&self.poles);
        for (a, (p, _)) in groups.iter().enumerate() {
            if groups[a + 1..].iter().any(|(q, _)| q.coincides(p)) {
                return Err(Error::RealAxisPole {
                    at: format!("{} (poles from both half-planes)", p.at),
                });
            }
        }
        let (quot, rem) = if self.poles.is_empty() {
            (self.num.clone(), Poly::zero())
        } else {
            self.num.div_rem(&self.denominator())
        };
        let mut terms = Vec::with_capacity(groups.len());
        for (gi, (p, m)) in groups.iter().enumerate() {
            let m = *m;
            let mut series = rem.taylor(p.at, m);
            for (gj, (q, mq)) in groups.iter().enumerate() {
                if gi == gj {
                    continue;
                }
                let d = p.at - q.at;
                // (d + h)^{-mq} = Σ_j (-1)^j C(mq+j-1, j) d^{-mq-j} h^j
                let mut factor = Vec::with_capacity(m);
                let mut binom = 1.0;
                for j in 0..m {
                    if j > 0 {
                        binom *= (*mq + j - 1) as f64 / j as f64;
                    }
                    let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                    factor.push(d.powi(-((*mq + j) as i32)) * (sign * binom));
                }
                series = truncated_product(&series, &factor, m);
            }
            // coefficient of 1/(ω-p)^{m-j} is series[j]
            let coeffs = (0..m).map(|k| series[m - 1 - k]).collect();
            terms.push(PoleTerm { pole: *p, coeffs });
        }
        Ok(PartialFractions { poly: quot, terms })
    }

    /// Split into causal (`plus`, poles in the lower half-plane plus any
    /// polynomial part) and anticausal (`minus`, poles in the upper half-plane)
    /// parts.
    pub fn split(&self) -> Result<CausalSplit> {
        let pf = self.partial_fractions()?;
        let mut plus = Rational::from_poly(pf.poly.clone());
        let mut minus = Rational::zero();
        for t in &pf.terms {
            let r = t.to_rational();
            match t.pole.side {
                Side::Lower => plus = plus.add(&r),
                Side::Upper => minus = minus.add(&r),
            }
        }
        Ok(CausalSplit { plus, minus })
    }

    pub fn plus_part(&self) -> Result<Self> {
        Ok(self.split()?.plus)
    }

    pub fn minus_part(&self) -> Result<Self> {
        Ok(self.split()?.minus)
    }

    /// `(1/2π) ∫ f(ω) dω` over the real line, by residues in the upper half-plane.
    pub fn integrate_real_line(&self) -> Result<C64> {
        if self.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        if let Some(p) = self.poles.iter().find(|p| p.on_real_axis()) {
            return Err(Error::RealAxisPole {
                at: format!("{}", p.at),
            });
        }
        let rd = self.relative_degree();
        if rd < 2 {
            return Err(Error::DivergentIntegral {
                relative_degree: rd,
            });
        }
        let pf = self.partial_fractions()?;
        let sum: C64 = pf
            .terms
            .iter()
            .filter(|t| t.pole.at.im > 0.0)
            .map(|t| t.coeffs[0])
            .sum();
        Ok(C64::new(0.0, 1.0) * sum)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.num.coeffs().iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})w^{k}")?;
        }
        write!(f, ") / (")?;
        for p in &self.poles {
            write!(f, "(w - {})", p.at)?;
        }
        write!(f, ")")
    }
}

fn truncated_product(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, x) in a.iter().enumerate().take(n) {
        for (j, y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: Pole,
    /// `coeffs[k]` multiplies `1/(ω - p)^{k+1}`; `coeffs[0]` is the residue.
    pub coeffs: Vec<C64>,
}

impl PoleTerm {
    pub fn to_rational(&self) -> Rational {
        let m = self.coeffs.len();
        let shift = Poly::new(vec![-self.pole.at, C64::new(1.0, 0.0)]);
        let mut num = Poly::zero();
        let mut power = Poly::constant(C64::new(1.0, 0.0));
        // Σ_k c_k (ω-p)^{m-1-k}
        for k in (0..m).rev() {
            num = num.add(&power.scale(self.coeffs[k]));
            power = power.mul(&shift);
        }
        Rational::new(num, vec![self.pole; m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    pub poly: Poly,
    pub terms: Vec<PoleTerm>,
}

impl PartialFractions {
    pub fn eval(&self, w: C64) -> C64 {
        let mut v = self.poly.eval(w);
        for t in &self.terms {
            let inv = 1.0 / (w - t.pole.at);
            let mut pw = inv;
            for c in &t.coeffs {
                v += c * pw;
                pw *= inv;
            }
        }
        v
    }
}

/// Causal (`plus`) and anticausal (`minus`) parts that sum to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSplit {
    pub plus: Rational,
    pub minus: Rational,
}

/// `gain · ∏ (ω - z) / ∏ (ω - p)` with tagged zeros and poles.
#[derive(Debug, Clone, PartialEq)]
pub struct Factored {
    pub gain: C64,
    pub zeros: Vec<Pole>,
    pub poles: Vec<Pole>,
}

impl Factored {
    pub fn one() -> Self {
        Self {
            gain: C64::new(1.0, 0.0),
            zeros: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn eval(&self, w: C64) -> C64 {
        let n = self
            .zeros
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, z| acc * (w - z.at));
        let d = self
            .poles
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, p| acc * (w - p.at));
        self.gain * n / d
    }

    pub fn inverse(&self) -> Self {
        Self {
            gain: 1.0 / self.gain,
            zeros: self.poles.clone(),
            poles: self.zeros.clone(),
        }
    }

    pub fn sharp(&self) -> Self {
        Self {
            gain: self.gain.conj(),
            zeros: self.zeros.iter().map(Pole::sharp).collect(),
            poles: self.poles.iter().map(Pole::sharp).collect(),
        }
    }

    pub fn to_rational(&self) -> Rational {
        Rational::constant(self.gain).mul_factored(&Factored {
            gain: C64::new(1.0, 0.0),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn simple(at: C64) -> Rational {
        Rational::new(Poly::constant(c(1.0, 0.0)), vec![Pole::located(at).unwrap()])
    }

    #[test]
    fn upper_pole_is_anticausal() {
        let f = simple(c(0.0, 1.0));
        let s = f.split().unwrap();
        assert!(s.plus.is_zero());
        assert!((s.minus.eval_real(0.7) - f.eval_real(0.7)).norm() < 1e-15);
    }

    #[test]
    fn lower_pole_is_causal() {
        let f = simple(c(0.0, -1.0));
        let s = f.split().unwrap();
        assert!(s.minus.is_zero());
        assert!((s.plus.eval_real(-0.4) - f.eval_real(-0.4)).norm() < 1e-15);
    }

    #[test]
    fn split_of_two_sided_function() {
        // 2iω/(ω²+1) = 1/(ω-i) + 1/(ω+i)... residues: at i → 2i·i/(2i) = i, at -i → 2i(-i)/(-2i) = i
        let f = Rational::new(
            Poly::new(vec![c(0.0, 0.0), c(0.0, 2.0)]),
            vec![Pole::located(c(0.0, 1.0)).unwrap(), Pole::located(c(0.0, -1.0)).unwrap()],
        );
        let s = f.split().unwrap();
        let w = c(0.37, 0.0);
        let plus_expected = c(0.0, 1.0) / (w + c(0.0, 1.0));
        let minus_expected = c(0.0, 1.0) / (w - c(0.0, 1.0));
        assert!((s.plus.eval(w) - plus_expected).norm() < 1e-14);
        assert!((s.minus.eval(w) - minus_expected).norm() < 1e-14);
        for k in 0..50 {
            let w = c(-5.0 + 0.2 * k as f64, 0.0);
            assert!((s.plus.eval(w) + s.minus.eval(w) - f.eval(w)).norm() < 1e-12);
        }
    }

    #[test]
    fn double_poles_partial_fractions() {
        // 1/((ω - i)² (ω + 2i))
        let up = Pole::located(c(0.0, 1.0)).unwrap();
        let dn = Pole::located(c(0.0, -2.0)).unwrap();
        let f = Rational::new(Poly::constant(c(1.0, 0.0)), vec![up, up, dn]);
        let pf = f.partial_fractions().unwrap();
        for k in 0..20 {
            let w = c(-3.0 + 0.3 * k as f64, 0.1);
            assert!((pf.eval(w) - f.eval(w)).norm() < 1e-13);
        }
    }

    #[test]
    fn improper_function_keeps_polynomial_in_plus() {
        // (ω² + 1)/(ω - i) = ω + i + 0 ... exact: ω² + 1 = (ω - i)(ω + i)
        let f = Rational::new(Poly::from_real(&[1.0, 0.0, 1.0]), vec![Pole::located(c(0.0, 1.0)).unwrap()]);
        let f = f.cancelled();
        assert!(f.poles().is_empty());
        let s = f.split().unwrap();
        assert!(s.minus.is_zero());
        assert!((s.plus.eval_real(2.0) - c(2.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn real_line_integral_lorentzian() {
        // (1/2π)∫ dω / (ω² + 1) = 1/2
        let f = Rational::new(
            Poly::constant(c(1.0, 0.0)),
            vec![Pole::located(c(0.0, 1.0)).unwrap(), Pole::located(c(0.0, -1.0)).unwrap()],
        );
        let v = f.integrate_real_line().unwrap();
        assert!((v - c(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(
            simple(c(0.0, 1.0)).integrate_real_line(),
            Err(Error::DivergentIntegral { .. })
        ));
    }

    #[test]
    fn tagged_real_axis_poles_split_by_tag() {
        let z_up = Pole::tagged(c(0.0, 0.0), Side::Upper);
        let f = Rational::new(Poly::constant(c(1.0, 0.0)), vec![z_up, z_up]);
        let s = f.split().unwrap();
        assert!(s.plus.is_zero());
        assert_eq!(s.minus.poles().len(), 2);
        let z_dn = Pole::tagged(c(0.0, 0.0), Side::Lower);
        let mixed = Rational::new(Poly::constant(c(1.0, 0.0)), vec![z_up, z_dn]);
        assert!(mixed.split().is_err());
    }

    #[test]
    fn structural_cancellation_respects_tags() {
        let z_up = Pole::tagged(c(0.0, 0.0), Side::Upper);
        let z_dn = Pole::tagged(c(0.0, 0.0), Side::Lower);
        let f = Rational::new(Poly::constant(c(1.0, 0.0)), vec![z_up, z_dn]);
        let g = f.mul_zeros(&[z_dn]);
        assert_eq!(g.poles(), &[z_up]);
        // numeric cancellation of a single zero at a mixed location is refused
        let h = Rational::new(Poly::from_real(&[0.0, 1.0]), vec![z_up, z_dn]).cancelled();
        assert_eq!(h.poles().len(), 2);
        // ... but a full-order zero clears both
        let k = Rational::new(Poly::from_real(&[0.0, 0.0, 3.0]), vec![z_up, z_dn]).cancelled();
        assert!(k.poles().is_empty());
        assert!((k.eval_real(1.0) - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reflect_and_sharp_match_pointwise() {
        let f = Rational::new(
            Poly::new(vec![c(1.0, 0.5), c(-0.3, 2.0)]),
            vec![Pole::located(c(0.4, 1.0)).unwrap(), Pole::located(c(-1.0, -0.5)).unwrap()],
        );
        for k in 0..10 {
            let w = -2.0 + 0.45 * k as f64;
            assert!((f.reflect().eval_real(w) - f.eval_real(-w)).norm() < 1e-14);
            assert!((f.sharp().eval_real(w) - f.eval_real(w).conj()).norm() < 1e-14);
        }
    }

    fn arb_pole() -> impl Strategy<Value = C64> {
        (-3.0f64..3.0, 0.2f64..3.0, any::<bool>())
            .prop_map(|(re, im, up)| c(re, if up { im } else { -im }))
    }

    proptest! {
        #[test]
        fn split_recombines(
            poles in proptest::collection::vec(arb_pole(), 1..5),
            num in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..5),
        ) {
            let f = Rational::new(
                Poly::new(num.iter().map(|&(a, b)| c(a, b)).collect()),
                poles.iter().map(|&p| Pole::located(p).unwrap()).collect(),
            );
            let s = f.split().unwrap();
            for p in s.plus.poles() { prop_assert!(p.at.im < 0.0); }
            for p in s.minus.poles() { prop_assert!(p.at.im > 0.0); }
            for k in 0..20 {
                let w = c(-4.0 + 0.4 * k as f64, 0.0);
                let lhs = s.plus.eval(w) + s.minus.eval(w);
                let rhs = f.eval(w);
                prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
            }
        }
    }
}
