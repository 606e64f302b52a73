//! The subcommands. Each returns `Ok(true)` when every check passed,
//! `Ok(false)` when some check failed and `Err` on internal errors.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use frachardy_core::report::{write_trace_csv, Report};
use frachardy_core::spectral::{self, EigenSolution};
use frachardy_core::analysis::CheckResult;
use frachardy_core::{riesz, specfun, SpectralConstants};
use serde_json::json;

use crate::checks::{self, Lab, CHECKS, GRID_FREE};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    let path = dir.join(file);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Write `file` through `body`, then checksum it into the manifest.
fn emit<F>(m: &mut RunManifest, dir: &Path, file: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(dir, file)?;
    body(&mut w)?;
    w.flush()?;
    drop(w);
    m.record(dir, file)
}

fn emit_report(m: &mut RunManifest, dir: &Path, report: &Report) -> Result<()> {
    emit(m, dir, "report.json", |w| Ok(report.write_json(w)?))
}

fn emit_traces(m: &mut RunManifest, dir: &Path, lab: &Lab) -> Result<()> {
    for t in &lab.traces {
        emit(m, dir, &format!("traces/{}.csv", t.name), |w| Ok(write_trace_csv(w, &t.header, &t.rows)?))?;
    }
    Ok(())
}

fn print_summary(report: &Report) {
    for c in &report.checks {
        let verdict = if c.pass { "pass" } else { "FAIL" };
        println!("{verdict:4}  {:<26} value {:<12.6e} tolerance {:.3e}", c.name, c.value, c.tolerance);
    }
}

fn run_checks(lab: &mut Lab, names: &[String], report: &mut Report) -> Result<()> {
    for name in names {
        for r in lab.run(name).with_context(|| format!("check '{name}'"))? {
            report.push(r);
        }
    }
    Ok(())
}

pub fn constants(cfg: &ExperimentConfig) -> Result<bool> {
    let d = cfg.free_dim();
    let p = cfg.params_in(d)?;
    let alpha = p.alpha;
    let k = SpectralConstants::new(d, alpha)?;
    let alt = specfun::riesz_constant_alt(d, alpha)?;
    let squared = specfun::squared_critical_beta(d, alpha)?;
    let f_bc = specfun::coupling_f(d, alpha, k.beta_c)?;
    let root = specfun::critical_point_check(d, alpha)?;

    println!("d = {d}, alpha = {alpha}");
    println!("form_const        {:.10}", k.form_const);
    println!("riesz_const_std   {:.10}", k.riesz_const_std);
    println!("riesz_const_alt   {alt:.10}  (= 2^(d/2) * riesz_const_std, not used)");
    println!("c_star            {:.10}  (Gamma form)", k.c_star);
    println!("F(beta_c)         {f_bc:.10}");
    println!("beta_c            {:.10}", k.beta_c);
    let verdict = if (squared - k.c_star).abs() <= 1e-12 * k.c_star { "equals" } else { "differs from" };
    println!("audit: ((d-alpha)/2)^2 = {squared:.10} {verdict} c_star = {:.10}", k.c_star);

    let mut obj = json!({
        "d": d,
        "alpha": alpha,
        "form_const": k.form_const,
        "riesz_const_std": k.riesz_const_std,
        "riesz_const_alt": alt,
        "c_star": k.c_star,
        "f_beta_c": f_bc,
        "beta_c": k.beta_c,
        "critical_point": root,
        "squared_beta_c": squared,
    });
    if let Some(b) = cfg.beta {
        let f = specfun::coupling_f(d, alpha, b)?;
        println!("F({b})            {f:.10}");
        obj["beta"] = json!(b);
        obj["f_beta"] = json!(f);
    }
    if cfg.c.is_some() || cfg.c_frac.is_some() {
        println!("c                 {:.10}", p.c);
        println!("beta(c)           {:.10}", p.beta());
        obj["c"] = json!(p.c);
        obj["beta_of_c"] = json!(p.beta());
    }
    println!("{}", serde_json::to_string_pretty(&obj)?);
    Ok((k.c_star - f_bc).abs() <= 1e-12 * k.c_star)
}

fn truncated(eig: &EigenSolution, k: usize) -> EigenSolution {
    let k = k.min(eig.k());
    EigenSolution {
        params: eig.params,
        grid: eig.grid.clone(),
        eigenvalues: eig.eigenvalues[..k].to_vec(),
        eigenvectors: eig.eigenvectors.subcols(0, k).to_owned(),
    }
}

pub fn solve(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let out = &cfg.out_dir;
    let mut m = RunManifest::start("solve", cfg, threads);
    let params = cfg.params()?;
    let mut lab_cfg = cfg.clone();
    lab_cfg.refinements = 0;
    let mut lab = Lab::new(lab_cfg, params);
    let eig = lab.eig_v(0)?;
    m.stage("assemble_and_solve");

    let shown = truncated(&eig, cfg.eigenpairs);
    emit(&mut m, out, "groundstate.csv", |w| Ok(spectral::write_ground_state_csv(&shown, w)?))?;
    emit(&mut m, out, "spectrum.csv", |w| Ok(spectral::write_spectrum_csv(&shown, w)?))?;

    let names: Vec<String> = if cfg.checks.is_empty() {
        vec!["boundary_exponent".into(), "singularity_exponent".into()]
    } else {
        cfg.checks.clone()
    };
    let mut report = Report::new(params, Some(&eig.grid));
    report.push(
        CheckResult::holds("lambda0", eig.lambda0(), 0.0, eig.lambda0() > 0.0).with("gap", eig.gap()),
    );
    run_checks(&mut lab, &names, &mut report)?;
    m.stage("checks");

    emit_traces(&mut m, out, &lab)?;
    emit_report(&mut m, out, &report)?;
    print_summary(&report);
    m.finish(out)?;
    Ok(report.all_pass())
}

pub fn verify_all(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let out = &cfg.out_dir;
    let mut m = RunManifest::start("verify-all", cfg, threads);
    let names: Vec<String> = if cfg.checks.is_empty() {
        CHECKS.iter().map(|s| s.to_string()).collect()
    } else {
        cfg.checks.clone()
    };
    let grid_free = names.iter().all(|n| GRID_FREE.contains(&n.as_str()));
    let params = if grid_free { cfg.params_in(cfg.free_dim())? } else { cfg.params()? };
    let mut lab = Lab::new(cfg.clone(), params);
    let mut checks = Vec::new();
    for name in &names {
        let results = lab.run(name).with_context(|| format!("check '{name}'"))?;
        checks.extend(results);
        m.stage(name);
    }
    let grid = if grid_free { None } else { Some(lab.grid(lab.finest())?) };
    let mut report = Report::new(params, grid.as_deref());
    for c in checks {
        report.push(c);
    }
    emit_traces(&mut m, out, &lab)?;
    emit_report(&mut m, out, &report)?;
    print_summary(&report);
    m.finish(out)?;
    Ok(report.all_pass())
}

pub fn heat(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let out = &cfg.out_dir;
    let mut m = RunManifest::start("heat", cfg, threads);
    let params = cfg.params()?;
    let mut lab = Lab::new(cfg.clone(), params);
    let eig = lab.eig_v(0)?;
    m.stage("assemble_and_solve");

    let mut rows = Vec::new();
    let mut worst_trace: f64 = 0.0;
    for t in lab.t_ladder(&eig) {
        let hk = spectral::heat_kernel(&eig, t)?;
        let trace = hk.trace();
        let expected: f64 = eig.eigenvalues.iter().map(|l| (-l * t).exp()).sum();
        worst_trace = worst_trace.max((trace / expected - 1.0).abs());
        let dev = frachardy_core::analysis::iuc_ratio(&hk, &eig)?;
        rows.push(vec![t, t * eig.gap(), trace, expected, dev]);
    }
    m.stage("heat_kernels");
    emit(&mut m, out, "heat.csv", |w| {
        Ok(write_trace_csv(w, &["t", "gap_t", "trace", "trace_spectral", "iuc_deviation"], &rows)?)
    })?;

    let mut report = Report::new(params, Some(&eig.grid));
    report.push(CheckResult::at_most("heat_trace", worst_trace, cfg.tolerance("heat_trace", 1e-10)));
    for r in lab.run("iuc")? {
        report.push(r);
    }
    lab.traces.clear();
    emit_report(&mut m, out, &report)?;
    print_summary(&report);
    m.finish(out)?;
    Ok(report.all_pass())
}

pub fn riesz_check(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let out = &cfg.out_dir;
    let mut m = RunManifest::start("riesz-check", cfg, threads);
    let (d, alpha, beta) = checks::riesz_case(cfg)?;
    let chk = riesz::verify_harmonic_identity(d, alpha, beta, &cfg.radii)?;
    m.stage("quadrature");
    let rows: Vec<Vec<f64>> = (0..chk.radii.len())
        .map(|k| vec![chk.radii[k], chk.lhs[k], chk.rhs[k], chk.lhs[k] / chk.rhs[k] - 1.0])
        .collect();
    emit(&mut m, out, "riesz.csv", |w| Ok(write_trace_csv(w, &["r", "lhs", "rhs", "rel_error"], &rows)?))?;

    let mut report = Report::new(cfg.params_in(d)?, None);
    report.push(
        CheckResult::at_most("riesz", chk.max_rel_error, cfg.tolerance("riesz", chk.tolerance))
            .with("d", d)
            .with("alpha", alpha)
            .with("beta", beta),
    );
    emit_report(&mut m, out, &report)?;
    print_summary(&report);
    m.finish(out)?;
    Ok(report.all_pass())
}

pub fn sweep(cfg: &ExperimentConfig, threads: usize) -> Result<bool> {
    let out = &cfg.out_dir;
    let mut m = RunManifest::start("sweep", cfg, threads);
    let params = cfg.params()?;
    let mut fractions = cfg.sweep.clone();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    anyhow::ensure!(
        fractions.len() >= 2 && fractions.iter().all(|f| (0.0..=1.0).contains(f)),
        "sweep needs at least two fractions in [0, 1]"
    );
    let c_star = params.c_star();
    let couplings: Vec<f64> = fractions.iter().map(|f| if *f == 1.0 { c_star } else { f * c_star }).collect();
    let mut lab = Lab::new(cfg.clone(), params);
    let l0 = lab.free_op(0)?;
    let grid = l0.grid.clone();
    let points = spectral::coupling_sweep(l0, &couplings)?;
    m.stage("sweep");

    let rows: Vec<Vec<f64>> = points
        .iter()
        .zip(&fractions)
        .map(|(p, f)| {
            let beta = if p.c == 0.0 { 0.0 } else { specfun::beta_of_c(params.d, params.alpha, p.c).unwrap_or(f64::NAN) };
            vec![*f, p.c, beta, p.lambda0, p.step_distance.unwrap_or(0.0)]
        })
        .collect();
    emit(&mut m, out, "sweep.csv", |w| {
        Ok(write_trace_csv(w, &["c_frac", "c", "beta", "lambda0", "step_distance"], &rows)?)
    })?;
    emit(&mut m, out, "sweep_profiles.csv", |w| {
        let mut header = vec!["abs_x".to_string(), "delta".to_string()];
        header.extend(fractions.iter().map(|f| format!("phi_{f}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..grid.len() {
            write!(w, "{:e},{:e}", grid.dist_origin[i], grid.dist_boundary[i])?;
            for p in &points {
                write!(w, ",{:e}", p.ground_state[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;

    let decreasing = points.windows(2).all(|w| w[1].lambda0 < w[0].lambda0);
    let mut report = Report::new(params, Some(&grid));
    report.push(
        CheckResult::holds("sweep_monotone", if decreasing { 1.0 } else { 0.0 }, 0.0, decreasing)
            .with("lambda0", points.iter().map(|p| p.lambda0).collect::<Vec<_>>()),
    );
    emit_report(&mut m, out, &report)?;
    print_summary(&report);
    m.finish(out)?;
    Ok(report.all_pass())
}
