use std::f64::consts::PI;
use std::fs;

use sta_core::functionals::{
    fringe_peaks, fringe_scan, mean_peak_spacing, noise_functional_w, perturbative_overlap, prefactor, visibility_loss,
};
use sta_core::noise::{mc_ensemble, McSettings};
use sta_core::optimizer::{fit_quartic, monotonicity_violations, optimal_bound, sweep_delta, Spacing};
use sta_core::report::{csv_string, Provenance, Table};
use sta_core::trajectory::{compensating_force, TrajectoryFamily};
use sta_core::units::{HBAR, LATTICE_LAMBDA_UM};
use sta_core::validation::{Validator, CHECK_AMPLITUDE, CRITERIA};
use sta_core::{Error, PhysicalConfig, Trajectory};

use crate::{BoundArgs, Context, Failure, FringeArgs, McArgs, OptimizeArgs, Output, SweepArgs, TrajArgs, ValidateArgs};

type CmdResult = Result<Output, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if points < 2 {
        return Err(invalid("--points must be >= 2"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(invalid(format!("empty range [{lo}, {hi}]")));
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / last).collect())
}

pub fn traj(ctx: &Context, a: &TrajArgs) -> CmdResult {
    let (family, t_f, amps) = if a.figure1 {
        let l = LATTICE_LAMBDA_UM;
        (TrajectoryFamily::SixthOrder, 0.7, vec![l / 8.0, l / 4.0, 3.0 * l / 8.0, l / 2.0])
    } else {
        (a.family, a.tf.unwrap_or(ctx.cfg.t_f), a.amplitudes.clone())
    };
    if amps.is_empty() {
        return Err(invalid("give at least one --amplitude or use --figure1"));
    }
    if a.samples == 0 {
        return Err(invalid("--samples must be >= 1"));
    }
    let mut tables = Vec::new();
    for (i, &m) in amps.iter().enumerate() {
        let tr = Trajectory::polynomial(family, m, t_f)?;
        let mut t = Table::new(
            format!("trajectory {} M={m} um t_f={t_f} us ({} of {})", family.name(), i + 1, amps.len()),
            &["t_us", "alpha_um", "alpha_dot_um_per_us", "alpha_ddot_um_per_us2", "force_zN"],
        );
        for k in 0..=a.samples {
            let time = if k == a.samples { t_f } else { t_f * k as f64 / a.samples as f64 };
            let [x, v, acc] = tr.eval3(time)?;
            let f = compensating_force(&tr, ctx.cfg.m, time)?;
            t.push(vec![time.into(), x.into(), v.into(), acc.into(), f.into()]);
        }
        tables.push(t);
    }
    Ok(Output::tables(tables))
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> CmdResult {
    if a.c_zn.is_empty() {
        return Err(invalid("--c-zN needs at least one force"));
    }
    let amps = linspace(a.m_min, a.m_max, a.points)?;
    let rows = fringe_scan(a.family, &amps, &a.c_zn, &ctx.cfg)?;
    let mut cols = vec!["S_per_zN".to_string()];
    cols.extend((1..=a.c_zn.len()).map(|i| format!("P_up_c{i}")));
    cols.push("modulus".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(format!("sweep {}", a.family.name()), &col_refs);
    for r in &rows {
        let mut row = vec![r.s.into()];
        row.extend(r.p_up.iter().map(|&p| p.into()));
        row.push(r.modulus.into());
        t.push(row);
    }
    for (i, c) in a.c_zn.iter().enumerate() {
        t.summarize(format!("c{}_zN", i + 1), *c);
    }
    Ok(Output::tables(vec![t]))
}

pub fn fringes(ctx: &Context, a: &FringeArgs) -> CmdResult {
    if a.c_zn.is_empty() {
        return Err(invalid("--c-zN needs at least one force"));
    }
    let lsg = if a.noise { a.lambda_sq_gamma.unwrap_or(ctx.cfg.lambda_sq_gamma) } else { 0.0 };
    let cfg = PhysicalConfig { t_f: ctx.cfg.t_f, ..ctx.cfg }.with_lambda_sq_gamma(lsg);
    cfg.validate()?;
    let amps = linspace(0.0, a.m_max, a.points)?;
    let rows = fringe_scan(a.family, &amps, &a.c_zn, &cfg)?;
    let mut cols = vec!["M_um".to_string(), "S_star_um_us".into(), "S_per_zN".into()];
    cols.extend(a.c_zn.iter().map(|c| format!("P_up_c{c}")));
    cols.extend(["modulus".to_string(), "regime_violated".into()]);
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(format!("fringes {} t_f={} us lambda_sq_gamma={lsg} us", a.family.name(), cfg.t_f), &col_refs);
    for r in &rows {
        let mut row = vec![r.amplitude.into(), r.s_star.into(), r.s.into()];
        row.extend(r.p_up.iter().map(|&p| p.into()));
        row.push(r.modulus.into());
        row.push(r.regime_violated.into());
        t.push(row);
    }
    let x: Vec<f64> = rows.iter().map(|r| r.s_star).collect();
    for (j, c) in a.c_zn.iter().enumerate() {
        let p: Vec<f64> = rows.iter().map(|r| r.p_up[j]).collect();
        let spacing = mean_peak_spacing(&fringe_peaks(&x, &p)).unwrap_or(f64::NAN);
        t.summarize(format!("period_S_star_c{c}"), spacing);
        t.summarize(format!("expected_pi_hbar_over_c{c}"), PI * HBAR / c);
    }
    Ok(Output::tables(vec![t]))
}

pub fn mc(ctx: &Context, a: &McArgs) -> CmdResult {
    let amp = a.amplitude.unwrap_or(CHECK_AMPLITUDE);
    let traj = Trajectory::polynomial(a.family, amp, ctx.cfg.t_f)?;
    let lsg = match (a.loss, a.lambda_sq_gamma) {
        (Some(d), _) => {
            if !(d >= 0.0) {
                return Err(invalid("--loss must be >= 0"));
            }
            d / visibility_loss(&traj, &ctx.cfg.with_lambda_sq_gamma(1.0))?.total
        }
        (None, Some(g)) => g,
        (None, None) => ctx.cfg.lambda_sq_gamma,
    };
    let cfg = ctx.cfg.with_lambda_sq_gamma(lsg);
    cfg.validate()?;
    let mut settings = McSettings::new(cfg.t_f, 1.0, lsg, ctx.seed);
    settings.realizations = a.realizations;
    if let Some(dt) = a.dt {
        settings.dt = dt;
    }
    let ens = mc_ensemble(&cfg, &traj, &settings)?;
    let r = ens.summarize();
    let pert = perturbative_overlap(&traj, &cfg)?;
    let d = visibility_loss(&traj, &cfg)?.total;
    let mut t = Table::new(
        format!("mc {} M={amp} um", a.family.name()),
        &["lambda_sq_gamma_us", "realizations", "dt_us", "modulus", "modulus_stderr", "phase_rad", "phase_stderr", "D", "one_minus_D", "exp_minus_D", "phase_cS_rad"],
    );
    t.push(vec![
        lsg.into(),
        settings.realizations.into(),
        settings.dt.into(),
        r.modulus.into(),
        r.stderr_modulus.unwrap_or(f64::NAN).into(),
        r.unwrapped_phase().into(),
        r.stderr_phase.unwrap_or(f64::NAN).into(),
        d.into(),
        (1.0 - d).into(),
        (-d).exp().into(),
        pert.unwrapped_phase().into(),
    ]);
    if let Some(path) = &a.samples_out {
        let mut s = Table::new("mc realizations", &["index", "re", "im", "modulus", "phase_rad"]);
        for (i, z) in ens.samples.iter().enumerate() {
            s.push(vec![i.into(), z.re.into(), z.im.into(), z.norm().into(), z.arg().into()]);
        }
        let prov = Provenance::new("mc", vec![ctx.seed], "");
        fs::write(path, csv_string(&prov, &s, 17))?;
    }
    let mut out = Output::tables(vec![t]);
    out.seeds = vec![ctx.seed];
    Ok(out)
}

pub fn optimize(_ctx: &Context, a: &OptimizeArgs) -> CmdResult {
    let spacing: Spacing = a.spacing.parse()?;
    let rows = sweep_delta(a.delta_min, a.delta_max, a.points, spacing, a.grid_n)?;
    let mut t = Table::new(format!("optimize grid_n={}", a.grid_n), &["delta", "S_tilde", "W_tilde", "ratio", "converged"]);
    for r in &rows {
        t.push(vec![r.delta.into(), r.s_tilde.into(), r.w_tilde.into(), r.ratio().into(), r.converged.into()]);
    }
    t.summarize("monotonicity_violations", monotonicity_violations(&rows).len());
    t.summarize("unconverged_rows", rows.iter().filter(|r| !r.converged).count());
    // The sweep itself is still worth printing when the fit is rejected.
    let failure = match fit_quartic(&rows, a.fit_smin) {
        Ok(fit) => {
            t.summarize("k", fit.k);
            t.summarize("fit_rows", fit.rows_used);
            t.summarize("ratio_min", fit.ratio_min);
            t.summarize("ratio_max", fit.ratio_max);
            t.summarize("k_upper_half", fit.k_upper_half);
            None
        }
        Err(e) => Some(Failure::Numerical(format!("quartic fit failed: {e}"))),
    };
    let mut out = Output::tables(vec![t]);
    out.failure = failure;
    Ok(out)
}

pub fn bound(_ctx: &Context, a: &BoundArgs) -> CmdResult {
    let k = match a.k {
        Some(k) => k,
        None => {
            let rows = sweep_delta(1.0, 1e7, 40, Spacing::Log, a.grid_n)?;
            fit_quartic(&rows, sta_core::optimizer::DEFAULT_FIT_SMIN)?.k
        }
    };
    let p6 = prefactor(TrajectoryFamily::SixthOrder, 1.0, 1.0)?;
    let p4 = prefactor(TrajectoryFamily::FourthOrder, 1.0, 1.0)?;
    let s = linspace(0.0, a.s_max, a.points)?;
    let mut t = Table::new(
        format!("bound t_f={} us", a.tf),
        &["S_star_um_us", "W_sixth", "W_fourth", "W_174", "W_numerical"],
    );
    let tf7 = a.tf.powi(7);
    for &x in &s {
        let x4 = x.powi(4);
        // Cross-check the sixth-order curve against a quadrature of the
        // actual trajectory with that sensitivity.
        if x > 0.0 {
            let w = noise_functional_w(&Trajectory::polynomial(TrajectoryFamily::SixthOrder, x * 35.0 / 16.0, a.tf)?)?;
            if ((w - p6 * x4 / tf7) / w).abs() > 1e-9 {
                return Err(Failure::Numerical(format!("sixth-order curve mismatch at S* = {x}")));
            }
        }
        t.push(vec![
            x.into(),
            (p6 * x4 / tf7).into(),
            (p4 * x4 / tf7).into(),
            optimal_bound(x, a.tf, 174.0)?.into(),
            optimal_bound(x, a.tf, k)?.into(),
        ]);
    }
    t.summarize("prefactor_sixth", p6);
    t.summarize("prefactor_fourth", p4);
    t.summarize("k", k);
    Ok(Output::tables(vec![t]))
}

pub fn validate(ctx: &Context, a: &ValidateArgs) -> CmdResult {
    for id in &a.only {
        if !CRITERIA.iter().any(|(c, _)| c == id) {
            return Err(Failure::Config(Error::InvalidArgument(format!("no acceptance criterion {id}")).to_string()));
        }
    }
    let v = Validator::new(ctx.seed);
    let results: Vec<_> = CRITERIA
        .iter()
        .filter(|(id, _)| a.only.is_empty() || a.only.contains(id))
        .map(|(id, _)| {
            let r = v.run(*id);
            eprintln!("{r}");
            r
        })
        .collect();
    let mut t = Table::new(
        "validate",
        &["criterion", "name", "criterion_passed", "measurement", "value", "target", "ok", "elapsed_s", "budget_s"],
    );
    for r in &results {
        if let Some(e) = &r.error {
            t.push(vec![(r.id as usize).into(), r.name.clone().into(), false.into(), "error".into(), f64::NAN.into(), e.clone().into(), false.into(), r.elapsed_s.into(), r.budget_s.into()]);
        }
        for m in &r.measurements {
            t.push(vec![
                (r.id as usize).into(),
                r.name.clone().into(),
                r.passed.into(),
                m.name.clone().into(),
                m.value.into(),
                m.target.clone().into(),
                m.ok.into(),
                r.elapsed_s.into(),
                r.budget_s.into(),
            ]);
        }
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    t.summarize("passed", results.len() - failed.len());
    t.summarize("failed", failed.len());
    let mut out = Output::tables(vec![t]);
    out.seeds = vec![ctx.seed];
    out.json = Some(serde_json::json!({ "criteria": results, "all_passed": failed.is_empty() }));
    if !failed.is_empty() {
        out.failure = Some(Failure::Acceptance(format!("acceptance criteria failed: {failed:?}")));
    }
    Ok(out)
}
