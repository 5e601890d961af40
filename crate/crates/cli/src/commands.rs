use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use optosteer::conditioning::{
    condition_joint, condition_single, min_variance, optimal_schedule, quadrature_variance,
    retrodict_vv, steering_report, verifiable_steering,
};
use optosteer::gram::{assemble, CovarianceBlocks, TimeGrid};
use optosteer::model::{PhysicalParams, HBAR};
use optosteer::statespace::{build_model, noise_curves, Flavor, LinearModel};
use optosteer::trajectory::{simulate as simulate_record, verify_state};
use optosteer::wienerhopf::{default_window, steerability_closed_form, verifiable_closed_form, vs_analytic};
use optosteer::Matrix2;
use rayon::prelude::*;

use crate::paramfile::{self, ParamFile};
use crate::{sci, CliError, GridOpts, ModelOpts, Output, Spacing};

struct Setup {
    model: LinearModel,
    grid: TimeGrid,
}

fn load(opts: &ModelOpts) -> Result<(ParamFile, LinearModel), CliError> {
    let mut pf = paramfile::read(&opts.paramfile)?;
    if let Some(eta) = opts.eta {
        pf.params.efficiency = eta;
    }
    let model = build_model(&pf.params, opts.flavor)?;
    Ok((pf, model))
}

fn setup(opts: &ModelOpts, grid: &GridOpts) -> Result<Setup, CliError> {
    let (pf, model) = load(opts)?;
    let window = match grid.tau {
        Some(t) => t,
        None if pf.window_set => pf.params.window,
        None => default_window(&model),
    };
    let grid = TimeGrid::new(window, grid.samples)?;
    Ok(Setup { model, grid })
}

fn blocks(s: &Setup) -> Result<CovarianceBlocks, CliError> {
    Ok(assemble(&s.model, &s.grid, s.model.params.initial_occupation)?)
}

fn header(s: &Setup) -> String {
    format!(
        "flavor {}\nwindow {}\nsamples {}\n",
        s.model.flavor,
        sci(s.grid.window()),
        s.grid.samples()
    )
}

fn matrix_line(name: &str, m: &Matrix2<f64>) -> String {
    format!("{name} xx {} xp {} pp {}\n", sci(m[(0, 0)]), sci(m[(0, 1)]), sci(m[(1, 1)]))
}

/// `max_ij |a - b| / max_ij |b|`.
fn relative_deviation(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

pub fn steer(opts: &ModelOpts, grid: &GridOpts) -> Result<Output, CliError> {
    let s = setup(opts, grid)?;
    let vs = condition_joint(&blocks(&s)?);
    let rep = steering_report(&vs, HBAR)?;
    let mut out = Output {
        warnings: s.model.warnings.clone(),
        ..Output::default()
    };
    let mut r = header(&s);
    r += &matrix_line("V_s", &vs);
    writeln!(r, "S {}", sci(rep.s)).unwrap();
    writeln!(r, "steerable {}", rep.steerable).unwrap();
    writeln!(r, "wiseman_consistent {}", rep.wiseman_consistent).unwrap();
    let deviation = if s.model.flavor == Flavor::Adiabatic {
        match vs_analytic(&s.model) {
            Ok(va) => {
                let d = relative_deviation(&vs, &va);
                r += &matrix_line("V_s_analytic", &va);
                writeln!(r, "analytic_deviation {}", sci(d)).unwrap();
                d
            }
            Err(e) => {
                writeln!(r, "analytic_deviation unavailable ({e})").unwrap();
                f64::NAN
            }
        }
    } else {
        f64::NAN
    };
    if !rep.wiseman_consistent {
        out.failed_checks
            .push("steerability sign disagrees with the Wiseman criterion".into());
    }
    out.report = r;
    out.csv = format!(
        "vxx,vxp,vpp,s,steerable,wiseman_consistent,analytic_deviation\n{},{},{},{},{},{},{}\n",
        sci(vs[(0, 0)]),
        sci(vs[(0, 1)]),
        sci(vs[(1, 1)]),
        sci(rep.s),
        rep.steerable,
        rep.wiseman_consistent,
        sci(deviation)
    );
    Ok(out)
}

fn sample_points(from: f64, to: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, CliError> {
    if points < 2 {
        return Err(CliError::Usage("need at least 2 points".into()));
    }
    if !(from.is_finite() && to.is_finite() && to > from) {
        return Err(CliError::Usage(format!("range [{from}, {to}] is empty or not finite")));
    }
    if spacing == Spacing::Log && from <= 0.0 {
        return Err(CliError::Usage("logarithmic spacing needs a positive range".into()));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let u = i as f64 / last;
            match spacing {
                Spacing::Lin => from + (to - from) * u,
                Spacing::Log => (from.ln() + (to.ln() - from.ln()) * u).exp(),
            }
        })
        .collect())
}

struct SweepRow {
    ratio: f64,
    eta: f64,
    thermal_force: f64,
    s: f64,
    s_v: f64,
    comparator: f64,
    status: String,
}

/// At fixed `Ω_q = √(Ω_x Ω_F)` the ratio `r = Ω_x/Ω_F` fixes
/// `η = r/(2+r)` and `S_F^th = 2ħmΩ_q²/r`.
fn sweep_row(base: &PhysicalParams, ratio: f64) -> SweepRow {
    let nan = f64::NAN;
    let mut row = SweepRow {
        ratio,
        eta: nan,
        thermal_force: nan,
        s: nan,
        s_v: nan,
        comparator: nan,
        status: "ok".into(),
    };
    if !(ratio > 0.0 && ratio.is_finite()) {
        row.status = "infeasible: ratio must be positive and finite".into();
        return row;
    }
    let omega_q2 = base.coupling * base.coupling / (HBAR * base.mass);
    let p = PhysicalParams {
        mech_freq: 0.0,
        mech_damping: 0.0,
        efficiency: ratio / (2.0 + ratio),
        thermal_force: 2.0 * HBAR * base.mass * omega_q2 / ratio,
        ..*base
    };
    if let Err(e) = optosteer::model::ensure_valid(&p) {
        row.status = format!("infeasible: {e}");
        return row;
    }
    row.eta = p.efficiency;
    row.thermal_force = p.thermal_force;
    row.s = steerability_closed_form(&p);
    row.s_v = verifiable_closed_form(&p);
    row.comparator = row.s_v + 2f64.ln();
    row
}

pub fn sweep(path: &Path, from: f64, to: f64, points: usize, spacing: Spacing) -> Result<Output, CliError> {
    let pf = paramfile::read(path)?;
    if !(pf.params.coupling != 0.0) {
        return Err(CliError::Usage("sweep needs a nonzero coupling to fix Ω_q".into()));
    }
    let ratios = sample_points(from, to, points, spacing)?;
    let rows: Vec<SweepRow> = ratios.par_iter().map(|&r| sweep_row(&pf.params, r)).collect();

    let mut csv = String::from("ratio,eta,thermal_force,s,s_v,s_v_comparator,status\n");
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            sci(row.ratio),
            sci(row.eta),
            sci(row.thermal_force),
            sci(row.s),
            sci(row.s_v),
            sci(row.comparator),
            row.status
        )
        .unwrap();
    }
    let mut report = format!("points {}\n", rows.len());
    let mut crossings = 0;
    for w in rows.windows(2) {
        if w[0].s_v.is_finite() && w[1].s_v.is_finite() && (w[0].s_v > 0.0) != (w[1].s_v > 0.0) {
            crossings += 1;
            writeln!(report, "s_v sign change between ratio {} and {}", sci(w[0].ratio), sci(w[1].ratio)).unwrap();
        }
    }
    if crossings == 0 {
        report += "s_v sign change none in range\n";
    }
    let bad = rows.iter().filter(|r| r.status != "ok").count();
    let mut out = Output {
        report,
        csv,
        table: true,
        ..Output::default()
    };
    if bad > 0 {
        out.failed_checks.push(format!("{bad} infeasible rows"));
    }
    Ok(out)
}

pub fn spectra(opts: &ModelOpts, from: f64, to: f64, points: usize) -> Result<Output, CliError> {
    if from <= 0.0 {
        return Err(CliError::Usage(format!("frequencies must be positive, got {from}")));
    }
    let (pf, _) = load(opts)?;
    let omegas = sample_points(from, to, points, Spacing::Log)?;
    let mut csv = String::from("omega,sql,thermal,backaction,sensing\n");
    for w in omegas {
        let c = noise_curves(&pf.params, w)?;
        writeln!(
            csv,
            "{},{},{},{},{}",
            sci(w),
            sci(c.sql),
            sci(c.thermal),
            sci(c.backaction),
            sci(c.sensing)
        )
        .unwrap();
    }
    let s = optosteer::model::derive_scales(&pf.params);
    let report = format!(
        "omega_f {}\nomega_q {}\nomega_x {}\nzeta_f {}\n",
        sci(s.omega_f),
        sci(s.omega_q),
        sci(s.omega_x),
        sci(s.zeta_f)
    );
    Ok(Output {
        report,
        csv,
        table: true,
        ..Output::default()
    })
}

pub fn schedule(opts: &ModelOpts, grid: &GridOpts, phi: f64) -> Result<Output, CliError> {
    let s = setup(opts, grid)?;
    let b = blocks(&s)?;
    let (dx, dp) = s.model.params.zero_point();
    let sched = optimal_schedule(&b, phi, dx, dp)?;
    let state = condition_single(&b, &sched, None)?;
    let achieved = quadrature_variance(&state.covariance, phi, dx, dp)?;
    let bound = min_variance(&b, phi, dx, dp)?;

    let mut csv = String::from("t,theta,degenerate\n");
    let degenerate = sched.degenerate();
    for (k, theta) in sched.angles().iter().enumerate() {
        let flag = u8::from(degenerate.binary_search(&k).is_ok());
        writeln!(csv, "{},{},{}", sci(s.grid.time(k)), sci(*theta), flag).unwrap();
    }
    let mut report = header(&s);
    writeln!(report, "phi {}", sci(phi)).unwrap();
    writeln!(report, "variance {}", sci(achieved)).unwrap();
    writeln!(report, "joint_bound {}", sci(bound)).unwrap();
    writeln!(report, "degenerate_samples {}", degenerate.len()).unwrap();
    Ok(Output {
        report,
        csv,
        table: true,
        warnings: s.model.warnings.clone(),
        ..Output::default()
    })
}

pub struct SimulateOpts {
    pub phi: f64,
    pub count: usize,
    pub seed: u64,
    pub check: bool,
    pub tolerance: f64,
    pub record: Option<PathBuf>,
}

pub fn simulate(opts: &ModelOpts, grid: &GridOpts, sim: &SimulateOpts) -> Result<Output, CliError> {
    let s = setup(opts, grid)?;
    let b = blocks(&s)?;
    let (dx, dp) = s.model.params.zero_point();
    let sched = optimal_schedule(&b, sim.phi, dx, dp)?;
    let state = condition_single(&b, &sched, None)?;
    let rep = verify_state(&s.model, &s.grid, &state, sim.count, sim.seed)?;

    if let Some(path) = &sim.record {
        let record = simulate_record(&s.model, &s.grid, &sched, sim.seed)?;
        let file = std::fs::File::create(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        record
            .write_csv(std::io::BufWriter::new(file))
            .map_err(CliError::Core)?;
    }

    let e = &rep.empirical;
    let v = &rep.conditional;
    let mut csv = String::from(
        "count,seed,emp_xx,emp_xp,emp_pp,cond_xx,cond_xp,cond_pp,mean_x,mean_p,max_deviation,max_correlation,correlation_bound\n",
    );
    let fields = [
        e[(0, 0)],
        e[(0, 1)],
        e[(1, 1)],
        v[(0, 0)],
        v[(0, 1)],
        v[(1, 1)],
        rep.mean[0],
        rep.mean[1],
        rep.max_deviation,
        rep.max_correlation,
        rep.correlation_bound(),
    ];
    let joined: Vec<String> = fields.iter().map(|x| sci(*x)).collect();
    writeln!(csv, "{},{},{}", rep.count, rep.seed, joined.join(",")).unwrap();

    let mut report = header(&s);
    writeln!(report, "phi {}\ncount {}\nseed {}", sci(sim.phi), rep.count, rep.seed).unwrap();
    report += &matrix_line("empirical", e);
    report += &matrix_line("V_m", v);
    writeln!(report, "max_deviation {}", sci(rep.max_deviation)).unwrap();
    writeln!(
        report,
        "max_correlation {} bound {}",
        sci(rep.max_correlation),
        sci(rep.correlation_bound())
    )
    .unwrap();

    let mut out = Output {
        report,
        csv,
        warnings: s.model.warnings.clone(),
        ..Output::default()
    };
    if sim.check {
        if !(rep.max_deviation < sim.tolerance) {
            out.failed_checks.push(format!(
                "covariance deviation {} exceeds {}",
                sci(rep.max_deviation),
                sci(sim.tolerance)
            ));
        }
        if !(rep.max_correlation < rep.correlation_bound()) {
            out.failed_checks.push(format!(
                "residual/outcome correlation {} exceeds {}",
                sci(rep.max_correlation),
                sci(rep.correlation_bound())
            ));
        }
    }
    Ok(out)
}

pub fn tomo(opts: &ModelOpts, grid: &GridOpts, scale: f64) -> Result<Output, CliError> {
    let s = setup(opts, grid)?;
    let vs = condition_joint(&blocks(&s)?);
    let vv = retrodict_vv(&s.model, &s.grid, scale)?;
    let mirrored = Matrix2::new(vs[(0, 0)], -vs[(0, 1)], -vs[(1, 0)], vs[(1, 1)]);
    let duality = relative_deviation(&vv, &mirrored);
    let params = (s.model.flavor == Flavor::Adiabatic).then_some(&s.model.params);
    let ver = verifiable_steering(&vs, &vv, HBAR, params)?;
    let st = steering_report(&vs, HBAR)?;

    let mut report = header(&s);
    report += &matrix_line("V_s", &vs);
    report += &matrix_line("V_v", &vv);
    writeln!(report, "duality_deviation {}", sci(duality)).unwrap();
    writeln!(report, "S {}", sci(st.s)).unwrap();
    writeln!(report, "S_v {}", sci(ver.s_v)).unwrap();
    let comparator = ver.comparator.unwrap_or(f64::NAN);
    if ver.comparator.is_some() {
        writeln!(report, "S_v_comparator {}", sci(comparator)).unwrap();
    }
    let mut out = Output {
        report,
        csv: format!(
            "vs_xx,vs_xp,vs_pp,vv_xx,vv_xp,vv_pp,duality_deviation,s,s_v,s_v_comparator\n{},{},{},{},{},{},{},{},{},{}\n",
            sci(vs[(0, 0)]),
            sci(vs[(0, 1)]),
            sci(vs[(1, 1)]),
            sci(vv[(0, 0)]),
            sci(vv[(0, 1)]),
            sci(vv[(1, 1)]),
            sci(duality),
            sci(st.s),
            sci(ver.s_v),
            sci(comparator)
        ),
        warnings: s.model.warnings.clone(),
        ..Output::default()
    };
    if ver.s_v > st.s + 1e-9 {
        out.failed_checks
            .push("verifiable steering exceeds steering".into());
    }
    Ok(out)
}
