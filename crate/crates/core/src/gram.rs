//! Discrete-time joint covariance of the measurement record and the final
//! oscillator state.
//!
//! Sample `k` is the average of the outputs over the bin `(t_k - Δt, t_k]`.
//! The white inputs are integrated exactly across each bin, so the discrete
//! record has exactly the statistics of the bin-averaged continuous one. The
//! prior sits at the start of the first bin, `-τ - Δt`.

use std::io::{Read, Write};

use faer::Mat;
use nalgebra::{DMatrix, Matrix2};

use crate::linalg::SpdFactor;
use crate::statespace::LinearModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    window: f64,
    samples: usize,
}

impl TimeGrid {
    pub fn new(window: f64, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidArgument {
                name: "samples",
                reason: format!("need at least 2 samples, got {samples}"),
            });
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "window",
                reason: format!("window must be positive and finite, got {window}"),
            });
        }
        Ok(Self { window, samples })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn step(&self) -> f64 {
        self.window / (self.samples - 1) as f64
    }

    /// `t_k = -τ + kΔt`; the last sample is at 0.
    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.samples {
            0.0
        } else {
            -self.window + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|k| self.time(k)).collect()
    }
}

/// Homodyne angle per sample; the measured output is `sin θ y₁ + cos θ y₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSchedule {
    angles: Vec<f64>,
    degenerate: Vec<usize>,
}

impl QuadratureSchedule {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        Self::flagged(angles, Vec::new())
    }

    /// Schedule whose angles at `degenerate` indices were set arbitrarily.
    pub fn flagged(angles: Vec<f64>, degenerate: Vec<usize>) -> Result<Self> {
        if let Some(k) = angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument {
                name: "schedule",
                reason: format!("angle at index {k} is not finite"),
            });
        }
        Ok(Self { angles, degenerate })
    }

    pub fn constant(samples: usize, angle: f64) -> Self {
        Self {
            angles: vec![angle; samples],
            degenerate: Vec::new(),
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Indices where the angle was not determined by the data.
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate.is_empty()
    }

    /// Row `k` of `u_θ`: weights `(sin θ_k, cos θ_k)` on `(y₁, y₂)`.
    pub fn weights(&self, k: usize) -> (f64, f64) {
        self.angles[k].sin_cos()
    }
}

/// Exact one-bin discretization of a [`LinearModel`] with step `h`.
///
/// Over one bin the state moves as `x' = Φ x + w` and the bin-averaged output
/// reads `ȳ = Hs x + v`, where `(w, v)` is Gaussian with the joint covariance
/// obtained by integrating the white inputs exactly across the bin.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub step: f64,
    /// `e^{F h}`.
    pub phi: DMatrix<f64>,
    /// Bin-averaged output response to the state at the bin start.
    pub hs: DMatrix<f64>,
    /// Covariance of `(w, v)`, `(n + 2) × (n + 2)`.
    pub noise: DMatrix<f64>,
}

pub fn discretize(model: &LinearModel, h: f64) -> Discretization {
    let n = model.state_dim();
    let ni = model.input.ncols();
    let no = model.output_state.nrows();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&(&model.drift * h));
    for i in 0..n {
        m[(i, n + i)] = h;
    }
    let e = m.exp();
    let phi = e.view((0, 0), (n, n)).into_owned();
    // Ψ1 = ∫₀ʰ e^{Fs} ds
    let psi1 = e.view((0, n), (n, n)).into_owned();
    let hs = &model.output_state * &psi1 / h;

    // Z(t) = (e^{Ft} G, Ψ1(t) G, I) solves Ż = Ā Z; w and v are linear in
    // ∫ Z(t) u(h - t) dt
    let na = 2 * n + ni;
    let mut abar = DMatrix::<f64>::zeros(na, na);
    abar.view_mut((0, 0), (n, n)).copy_from(&model.drift);
    for i in 0..n {
        abar[(n + i, i)] = 1.0;
    }
    let mut z0 = DMatrix::<f64>::zeros(na, ni);
    z0.view_mut((0, 0), (n, ni)).copy_from(&model.input);
    for i in 0..ni {
        z0[(2 * n + i, i)] = 1.0;
    }
    let w = &z0 * model.input_covariance() * z0.transpose();
    let mut vl = DMatrix::<f64>::zeros(2 * na, 2 * na);
    vl.view_mut((0, 0), (na, na)).copy_from(&(-&abar * h));
    vl.view_mut((0, na), (na, na)).copy_from(&(&w * h));
    vl.view_mut((na, na), (na, na)).copy_from(&(abar.transpose() * h));
    let ve = vl.exp();
    let gram = ve.view((na, na), (na, na)).transpose() * ve.view((0, na), (na, na));

    let mut l = DMatrix::<f64>::zeros(n + no, na);
    for i in 0..n {
        l[(i, i)] = 1.0;
    }
    l.view_mut((n, n), (no, n)).copy_from(&(&model.output_state / h));
    l.view_mut((n, 2 * n), (no, ni)).copy_from(&(&model.output_input / h));
    let mut noise = &l * gram * l.transpose();
    let det = &model.output_noise * model.noise_covariance() * model.output_noise.transpose() / h;
    let mut vv = noise.view_mut((n, n), (no, no));
    vv += det;
    let noise = (&noise + noise.transpose()) * 0.5;
    Discretization { step: h, phi, hs, noise }
}

impl Discretization {
    fn dim(&self) -> usize {
        self.phi.nrows()
    }

    /// Covariance of the state increment `w`.
    pub fn qww(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.noise.view((0, 0), (n, n)).into_owned()
    }

    /// `Cov(w, v)`.
    pub fn qwv(&self) -> DMatrix<f64> {
        let n = self.dim();
        self.noise.view((0, n), (n, self.noise.ncols() - n)).into_owned()
    }

    /// Covariance of the output noise `v`.
    pub fn qvv(&self) -> DMatrix<f64> {
        let n = self.dim();
        let k = self.noise.ncols() - n;
        self.noise.view((n, n), (k, k)).into_owned()
    }

    /// `S` with `S Sᵀ` equal to the joint noise covariance; the noise may be
    /// rank deficient, so this is the symmetric square root.
    pub fn noise_root(&self) -> DMatrix<f64> {
        let eig = self.noise.clone().symmetric_eigen();
        let mut s = eig.eigenvectors;
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let r = lambda.max(0.0).sqrt();
            s.column_mut(j).scale_mut(r);
        }
        s
    }

    /// Covariance of one bin's output sample given the state covariance at
    /// the bin start.
    pub fn output_covariance(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.hs * p * self.hs.transpose() + self.qvv()
    }

    /// `Cov(x_{k+1}, y_k)` given `P_k`.
    pub fn state_output_covariance(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.phi * p * self.hs.transpose() + self.qwv()
    }

    pub fn propagate(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.phi * p * self.phi.transpose() + self.qww()
    }
}

/// `A`, `B`, `C` for one model and grid, with `B` factored once.
#[derive(Debug, Clone)]
pub struct CovarianceBlocks {
    pub grid: TimeGrid,
    pub occupation: f64,
    /// Covariance of `(x(0), p(0))`.
    pub a: Matrix2<f64>,
    /// Covariance of the stacked record `(y₁, y₂)`, `2N × 2N`.
    pub b: Mat<f64>,
    /// Cross-covariance of the record with `(x(0), p(0))`, `2N × 2`.
    pub c: Mat<f64>,
    /// Planck constant of the unit system the blocks are expressed in.
    pub hbar: f64,
    factor: SpdFactor,
}

pub fn assemble(model: &LinearModel, grid: &TimeGrid, occupation: f64) -> Result<CovarianceBlocks> {
    if !(occupation >= 0.0 && occupation.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "occupation",
            reason: format!("must be finite and non-negative, got {occupation}"),
        });
    }
    let n = grid.samples();
    let d = discretize(model, grid.step());
    let dim = model.state_dim();
    let (b, cross, p) = record_blocks(&d, &model.prior_covariance(occupation), n);

    // Cov((x,p)(0), y_k) = [Φ^{N-1-k} X_k] restricted to the mechanical rows
    let mut c = Mat::<f64>::zeros(2 * n, 2);
    let mut pow = DMatrix::<f64>::identity(dim, dim);
    for k in (0..n).rev() {
        let blk = &pow * &cross[k];
        for s in 0..2 {
            for j in 0..2 {
                c[(s * n + k, j)] = blk[(j, s)];
            }
        }
        pow = &pow * &d.phi;
    }

    let a = Matrix2::new(p[(0, 0)], p[(0, 1)], p[(1, 0)], p[(1, 1)]);
    let a = (a + a.transpose()) * 0.5;
    let factor = SpdFactor::of(b.as_ref(), "B")?;
    Ok(CovarianceBlocks {
        grid: *grid,
        occupation,
        a,
        b,
        c,
        hbar: crate::model::HBAR,
        factor,
    })
}

/// Stacked `(y₁, y₂)` covariance for `n` bins starting from state covariance
/// `p0`, together with `Cov(x_{k+1}, y_k)` per bin and the final state
/// covariance.
pub(crate) fn record_blocks(
    d: &Discretization,
    p0: &DMatrix<f64>,
    n: usize,
) -> (Mat<f64>, Vec<DMatrix<f64>>, DMatrix<f64>) {
    let mut p = p0.clone();
    let mut cross = Vec::with_capacity(n);
    let mut b = Mat::<f64>::zeros(2 * n, 2 * n);
    for k in 0..n {
        let yy = d.output_covariance(&p);
        for r in 0..2 {
            for s in 0..2 {
                b[(r * n + k, s * n + k)] = yy[(r, s)];
            }
        }
        cross.push(d.state_output_covariance(&p));
        p = d.propagate(&p);
    }

    // Cov(y_j, y_k) = Hs Φ^{j-k-1} X_k for j > k
    let mut hs_pow = Vec::with_capacity(n);
    let mut cur = d.hs.clone();
    for _ in 0..n {
        hs_pow.push(cur.clone());
        cur = &cur * &d.phi;
    }
    for (k, xk) in cross.iter().enumerate() {
        for j in k + 1..n {
            let blk = &hs_pow[j - k - 1] * xk;
            for r in 0..2 {
                for s in 0..2 {
                    let v = blk[(r, s)];
                    b[(r * n + j, s * n + k)] = v;
                    b[(s * n + k, r * n + j)] = v;
                }
            }
        }
    }
    (b, cross, p)
}

/// `B_θ = u_θ B u_θᵀ` and `C_θ = u_θ C`.
#[derive(Debug, Clone)]
pub struct Projected {
    pub b: Mat<f64>,
    pub c: Mat<f64>,
}

impl CovarianceBlocks {
    pub fn samples(&self) -> usize {
        self.grid.samples()
    }

    /// Cholesky factor of `B`, computed once at assembly.
    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn project_theta(&self, schedule: &QuadratureSchedule) -> Result<Projected> {
        project_theta(self, schedule)
    }

    /// Little-endian dump: for each of `A`, `B`, `C` a header of two `u64`
    /// (rows, cols) followed by the entries in row-major order as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        write_matrix(&mut w, 2, 2, |i, j| self.a[(i, j)])?;
        write_matrix(&mut w, self.b.nrows(), self.b.ncols(), |i, j| self.b[(i, j)])?;
        write_matrix(&mut w, self.c.nrows(), self.c.ncols(), |i, j| self.c[(i, j)])?;
        Ok(())
    }
}

fn write_matrix<W: Write>(
    w: &mut W,
    rows: usize,
    cols: usize,
    f: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for i in 0..rows {
        for j in 0..cols {
            w.write_all(&f(i, j).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read one matrix written by [`CovarianceBlocks::write_binary`].
pub fn read_matrix<R: Read>(r: &mut R) -> Result<Mat<f64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut word)?;
            m[(i, j)] = f64::from_le_bytes(word);
        }
    }
    Ok(m)
}

pub fn project_theta(blocks: &CovarianceBlocks, schedule: &QuadratureSchedule) -> Result<Projected> {
    let n = blocks.samples();
    if schedule.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: schedule.len(),
        });
    }
    let w: Vec<(f64, f64)> = (0..n).map(|k| schedule.weights(k)).collect();
    let b = &blocks.b;
    let bt = Mat::from_fn(n, n, |j, k| {
        let (sj, cj) = w[j];
        let (sk, ck) = w[k];
        sj * sk * b[(j, k)] + sj * ck * b[(j, n + k)] + cj * sk * b[(n + j, k)] + cj * ck * b[(n + j, n + k)]
    });
    let c = &blocks.c;
    let ct = Mat::from_fn(n, 2, |k, i| w[k].0 * c[(k, i)] + w[k].1 * c[(n + k, i)]);
    Ok(Projected { b: bt, c: ct })
}
