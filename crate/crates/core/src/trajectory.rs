//! Monte Carlo measurement records drawn from the same bin-wise model the
//! covariance blocks are built from, and ensemble checks of the conditional
//! covariance.
//!
//! Trajectory `i` of a run with seed `s` draws from ChaCha8 stream `i` keyed
//! by `s`, so any subset of trajectories can be regenerated independently and
//! results do not depend on how work is split across threads.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::conditioning::{condition_single, ConditionalState};
use crate::gram::{assemble, discretize, Discretization, QuadratureSchedule, TimeGrid};
use crate::statespace::LinearModel;
use crate::{Error, Result};

/// Trajectories per work unit. Fixed so the reduction tree is independent of
/// the thread count.
const CHUNK: usize = 64;

/// One simulated homodyne record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub grid: TimeGrid,
    pub schedule: QuadratureSchedule,
    /// `y_θ(t_k)`, bin averages.
    pub outcomes: Vec<f64>,
    /// `(x(0), p(0))` of the simulated oscillator. Simulation only, never
    /// an observable.
    pub truth: Vector2<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl Record {
    /// CSV with columns `t,theta,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,theta,y")?;
        for (k, y) in self.outcomes.iter().enumerate() {
            writeln!(
                w,
                "{:.8e},{:.8e},{:.8e}",
                self.grid.time(k),
                self.schedule.angles()[k],
                y
            )?;
        }
        Ok(())
    }
}

/// Row-major copies of the discretization, sized for the hot loop.
struct Stepper {
    n: usize,
    phi: Vec<f64>,
    hs: Vec<f64>,
    /// Square root of the joint `(w, v)` covariance, `(n + 2) × (n + 2)`.
    root: Vec<f64>,
    prior_sd: Vec<f64>,
}

fn flat(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            v.push(m[(r, c)]);
        }
    }
    v
}

fn diagonal_sd(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, i)].max(0.0).sqrt()).collect()
}

impl Stepper {
    fn new(model: &LinearModel, d: &Discretization, occupation: f64) -> Self {
        Self {
            n: model.state_dim(),
            phi: flat(&d.phi),
            hs: flat(&d.hs),
            root: flat(&d.noise_root()),
            prior_sd: diagonal_sd(&model.prior_covariance(occupation)),
        }
    }

    /// Draws one record. Draw order: prior, then per bin `n + 2` standard
    /// normals mapped to `(w, v)`.
    fn run(&self, schedule: &QuadratureSchedule, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Vector2<f64> {
        let n = self.n;
        let m = n + 2;
        let mut x: Vec<f64> = self.prior_sd.iter().map(|s| s * normal(rng)).collect();
        let mut xi = vec![0.0; m];
        let mut wv = vec![0.0; m];
        let mut next = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            for z in xi.iter_mut() {
                *z = normal(rng);
            }
            for (r, o) in wv.iter_mut().enumerate() {
                *o = self.root[r * m..(r + 1) * m].iter().zip(&xi).map(|(a, b)| a * b).sum();
            }
            let mut y = [0.0; 2];
            for (r, yr) in y.iter_mut().enumerate() {
                let hx: f64 = self.hs[r * n..(r + 1) * n].iter().zip(&x).map(|(a, b)| a * b).sum();
                *yr = hx + wv[n + r];
            }
            let (s, c) = schedule.weights(k);
            *slot = s * y[0] + c * y[1];
            for (r, nr) in next.iter_mut().enumerate() {
                *nr = self.phi[r * n..(r + 1) * n].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + wv[r];
            }
            std::mem::swap(&mut x, &mut next);
        }
        Vector2::new(x[0], x[1])
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_schedule(grid: &TimeGrid, schedule: &QuadratureSchedule) -> Result<()> {
    if schedule.len() != grid.samples() {
        return Err(Error::DimensionMismatch {
            expected: grid.samples(),
            actual: schedule.len(),
        });
    }
    Ok(())
}

/// Simulates one record on stream 0 of `seed`.
pub fn simulate(model: &LinearModel, grid: &TimeGrid, schedule: &QuadratureSchedule, seed: u64) -> Result<Record> {
    simulate_stream(model, grid, schedule, seed, 0)
}

/// Simulates the record of trajectory `stream` of a seeded ensemble.
pub fn simulate_stream(
    model: &LinearModel,
    grid: &TimeGrid,
    schedule: &QuadratureSchedule,
    seed: u64,
    stream: u64,
) -> Result<Record> {
    check_schedule(grid, schedule)?;
    let d = discretize(model, grid.step());
    let stepper = Stepper::new(model, &d, model.params.initial_occupation);
    let mut outcomes = vec![0.0; grid.samples()];
    let truth = stepper.run(schedule, &mut stream_rng(seed, stream), &mut outcomes);
    Ok(Record {
        grid: *grid,
        schedule: schedule.clone(),
        outcomes,
        truth,
        seed,
        stream,
    })
}

/// Conditional mean `(x̄, p̄)` of a record under a conditional state computed
/// for the same schedule.
pub fn filter_record(record: &Record, state: &ConditionalState) -> Result<Vector2<f64>> {
    if state.schedule.len() != record.schedule.len() {
        return Err(Error::DimensionMismatch {
            expected: state.schedule.len(),
            actual: record.schedule.len(),
        });
    }
    if state.schedule.angles() != record.schedule.angles() {
        return Err(Error::InvalidArgument {
            name: "state",
            reason: "conditional state was computed for a different schedule".into(),
        });
    }
    state.estimate(&record.outcomes)
}

/// Ensemble statistics of filter residuals `(x(0) - x̄, p(0) - p̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub count: usize,
    pub seed: u64,
    /// Sample covariance of the residuals.
    pub empirical: Matrix2<f64>,
    /// `V_m^θ` from the covariance blocks.
    pub conditional: Matrix2<f64>,
    /// Residual sample mean.
    pub mean: Vector2<f64>,
    /// `max_ij |empirical - conditional| / √det V_m^θ`.
    pub max_deviation: f64,
    /// Largest absolute sample correlation between a residual component and
    /// any outcome bin.
    pub max_correlation: f64,
}

impl EnsembleReport {
    /// Orthogonality tolerance `4/√count`.
    pub fn correlation_bound(&self) -> f64 {
        4.0 / (self.count as f64).sqrt()
    }
}

#[derive(Clone)]
struct Sums {
    r: [f64; 2],
    rr: [f64; 3],
    y: Vec<f64>,
    yy: Vec<f64>,
    ry: [Vec<f64>; 2],
}

impl Sums {
    fn new(n: usize) -> Self {
        Self {
            r: [0.0; 2],
            rr: [0.0; 3],
            y: vec![0.0; n],
            yy: vec![0.0; n],
            ry: [vec![0.0; n], vec![0.0; n]],
        }
    }

    fn push(&mut self, res: &Vector2<f64>, y: &[f64]) {
        self.r[0] += res[0];
        self.r[1] += res[1];
        self.rr[0] += res[0] * res[0];
        self.rr[1] += res[0] * res[1];
        self.rr[2] += res[1] * res[1];
        for (k, v) in y.iter().enumerate() {
            self.y[k] += v;
            self.yy[k] += v * v;
            self.ry[0][k] += res[0] * v;
            self.ry[1][k] += res[1] * v;
        }
    }

    fn merge(mut self, o: &Sums) -> Self {
        for i in 0..2 {
            self.r[i] += o.r[i];
        }
        for i in 0..3 {
            self.rr[i] += o.rr[i];
        }
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.y, &o.y);
        add(&mut self.yy, &o.yy);
        add(&mut self.ry[0], &o.ry[0]);
        add(&mut self.ry[1], &o.ry[1]);
        self
    }
}

/// Simulates `count` trajectories, filters each with the optimal linear
/// estimator for `schedule`, and compares residual statistics with `V_m^θ`.
pub fn verify_ensemble(
    model: &LinearModel,
    grid: &TimeGrid,
    schedule: &QuadratureSchedule,
    count: usize,
    seed: u64,
) -> Result<EnsembleReport> {
    if count < 100 {
        return Err(Error::InvalidArgument {
            name: "count",
            reason: format!("need at least 100 trajectories, got {count}"),
        });
    }
    check_schedule(grid, schedule)?;
    let blocks = assemble(model, grid, model.params.initial_occupation)?;
    let state = condition_single(&blocks, schedule, None)?;
    verify_state(model, grid, &state, count, seed)
}

/// [`verify_ensemble`] for a conditional state that is already available.
/// `state` must come from blocks assembled for `model` and `grid` at the
/// model's initial occupation.
pub fn verify_state(
    model: &LinearModel,
    grid: &TimeGrid,
    state: &ConditionalState,
    count: usize,
    seed: u64,
) -> Result<EnsembleReport> {
    if count < 100 {
        return Err(Error::InvalidArgument {
            name: "count",
            reason: format!("need at least 100 trajectories, got {count}"),
        });
    }
    let schedule = &state.schedule;
    check_schedule(grid, schedule)?;
    let d = discretize(model, grid.step());
    let stepper = Stepper::new(model, &d, model.params.initial_occupation);
    let n = grid.samples();

    let chunks = count.div_ceil(CHUNK);
    let partial: Vec<Sums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sums = Sums::new(n);
            let mut y = vec![0.0; n];
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                let truth = stepper.run(schedule, &mut stream_rng(seed, i as u64), &mut y);
                let est = state.estimate(&y).expect("record length matches gains");
                sums.push(&(truth - est), &y);
            }
            sums
        })
        .collect();
    let total = pairwise(&partial);

    let m = count as f64;
    let mean = Vector2::new(total.r[0] / m, total.r[1] / m);
    let cov = |s: f64, a: f64, b: f64| (s - m * a * b) / (m - 1.0);
    let c01 = cov(total.rr[1], mean[0], mean[1]);
    let empirical = Matrix2::new(
        cov(total.rr[0], mean[0], mean[0]),
        c01,
        c01,
        cov(total.rr[2], mean[1], mean[1]),
    );
    let conditional = state.covariance;
    let scale = conditional.determinant().max(f64::MIN_POSITIVE).sqrt();
    let max_deviation = (empirical - conditional).abs().max() / scale;

    let mut max_correlation: f64 = 0.0;
    let var_r = [empirical[(0, 0)], empirical[(1, 1)]];
    for k in 0..n {
        let my = total.y[k] / m;
        let var_y = (total.yy[k] - m * my * my) / (m - 1.0);
        for i in 0..2 {
            let denom = (var_r[i] * var_y).sqrt();
            if denom > 0.0 {
                let c = cov(total.ry[i][k], mean[i], my) / denom;
                max_correlation = max_correlation.max(c.abs());
            }
        }
    }

    Ok(EnsembleReport {
        count,
        seed,
        empirical,
        conditional,
        mean,
        max_deviation,
        max_correlation,
    })
}

fn pairwise(parts: &[Sums]) -> Sums {
    match parts.len() {
        1 => parts[0].clone(),
        len => {
            let (a, b) = parts.split_at(len / 2);
            pairwise(a).merge(&pairwise(b))
        }
    }
}
