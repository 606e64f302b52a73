//! Named checks and the lazily built refinement ladder they share.
//!
//! Level `k` of the ladder is the domain at `n · 2^k` cells per axis,
//! `k = 0..=refinements`. Single-grid checks run on the finest level, except
//! the dense heat-kernel and non-symmetric eigenvalue checks, which run on
//! level 0.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, ensure, Result};
use frachardy_core::analysis::{self, CheckResult};
use frachardy_core::fracop::{self, OperatorMatrix};
use frachardy_core::spectral::{self, EigenSolution};
use frachardy_core::{doob, riesz, specfun, Grid, ModelParams};

use crate::config::ExperimentConfig;

/// Check names in execution order.
pub const CHECKS: &[&str] = &[
    "constants",
    "coupling_map",
    "riesz",
    "boundary_exponent",
    "singularity_exponent",
    "comparability",
    "representation",
    "doob",
    "hardy_sharpness",
    "iuc",
    "green_bound",
    "blowup",
    "intrinsic_hardy",
    "doob_ground",
];

/// Checks that never touch a grid.
pub const GRID_FREE: &[&str] = &["constants", "coupling_map", "riesz"];

/// Default heat-kernel times in units of `1/gap`.
const GAP_TIMES: [f64; 4] = [2.5, 5.0, 7.5, 10.0];

pub fn validate_names(names: &[String]) -> Result<()> {
    for n in names {
        if !CHECKS.contains(&n.as_str()) {
            bail!("unknown check '{n}'; known checks: {}", CHECKS.join(", "));
        }
    }
    Ok(())
}

/// Rows of a CSV written next to the report.
#[derive(Debug, Clone)]
pub struct Trace {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

pub struct Lab {
    pub cfg: ExperimentConfig,
    pub params: ModelParams,
    pub traces: Vec<Trace>,
    grids: BTreeMap<usize, Arc<Grid>>,
    free: BTreeMap<usize, OperatorMatrix>,
    schrodinger: BTreeMap<usize, OperatorMatrix>,
    eig_free: BTreeMap<usize, Arc<EigenSolution>>,
    eig_v: BTreeMap<usize, Arc<EigenSolution>>,
}

impl Lab {
    /// Context for grid checks; `params` carries the grid dimension.
    pub fn new(cfg: ExperimentConfig, params: ModelParams) -> Self {
        Self {
            cfg,
            params,
            traces: Vec::new(),
            grids: BTreeMap::new(),
            free: BTreeMap::new(),
            schrodinger: BTreeMap::new(),
            eig_free: BTreeMap::new(),
            eig_v: BTreeMap::new(),
        }
    }

    pub fn finest(&self) -> usize {
        self.cfg.refinements
    }

    pub fn n_at(&self, level: usize) -> usize {
        self.cfg.n << level
    }

    pub fn grid(&mut self, level: usize) -> Result<Arc<Grid>> {
        if let Some(g) = self.grids.get(&level) {
            return Ok(g.clone());
        }
        let g = Arc::new(Grid::build(self.cfg.domain, self.n_at(level))?);
        self.grids.insert(level, g.clone());
        Ok(g)
    }

    pub fn free_op(&mut self, level: usize) -> Result<&OperatorMatrix> {
        if !self.free.contains_key(&level) {
            let g = self.grid(level)?;
            let l0 = fracop::assemble_free(g, self.params.alpha)?;
            self.free.insert(level, l0);
        }
        Ok(&self.free[&level])
    }

    /// `L_V`, or `L₀` when `c = 0`.
    pub fn op_v(&mut self, level: usize) -> Result<&OperatorMatrix> {
        if self.params.c == 0.0 {
            return self.free_op(level);
        }
        if !self.schrodinger.contains_key(&level) {
            let c = self.params.c;
            let lv = fracop::assemble_hardy(self.free_op(level)?, c)?;
            self.schrodinger.insert(level, lv);
        }
        Ok(&self.schrodinger[&level])
    }

    /// Full spectrum of `L₀`.
    pub fn eig_free(&mut self, level: usize) -> Result<Arc<EigenSolution>> {
        if let Some(e) = self.eig_free.get(&level) {
            return Ok(e.clone());
        }
        let op = self.free_op(level)?;
        let e = Arc::new(spectral::eigensolve(op, op.n())?);
        self.eig_free.insert(level, e.clone());
        Ok(e)
    }

    /// Full spectrum of `L_V`.
    pub fn eig_v(&mut self, level: usize) -> Result<Arc<EigenSolution>> {
        if self.params.c == 0.0 {
            return self.eig_free(level);
        }
        if let Some(e) = self.eig_v.get(&level) {
            return Ok(e.clone());
        }
        let op = self.op_v(level)?;
        let e = Arc::new(spectral::eigensolve(op, op.n())?);
        self.eig_v.insert(level, e.clone());
        Ok(e)
    }

    /// Heat-kernel times: the configured ladder, or `gap·t ∈ {2.5, 5, 7.5, 10}`.
    pub fn t_ladder(&self, eig: &EigenSolution) -> Vec<f64> {
        if self.cfg.t_ladder.is_empty() {
            GAP_TIMES.iter().map(|g| g / eig.gap()).collect()
        } else {
            self.cfg.t_ladder.clone()
        }
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.cfg.tolerance(name, default)
    }

    fn exponent_tol(&self) -> f64 {
        if self.params.d == 1 {
            0.05
        } else {
            0.08
        }
    }

    fn need_refinements(&self, check: &str, k: usize) -> Result<()> {
        ensure!(
            self.cfg.refinements >= k,
            "check '{check}' needs refinements ≥ {k}, have {}",
            self.cfg.refinements
        );
        Ok(())
    }

    fn trace(&mut self, name: &str, header: &[&'static str], rows: Vec<Vec<f64>>) {
        self.traces.push(Trace { name: name.into(), header: header.to_vec(), rows });
    }

    pub fn run(&mut self, name: &str) -> Result<Vec<CheckResult>> {
        match name {
            "constants" => self.constants(),
            "coupling_map" => self.coupling_map(),
            "riesz" => self.riesz(),
            "boundary_exponent" => self.boundary_exponent(),
            "singularity_exponent" => self.singularity_exponent(),
            "comparability" => self.comparability(),
            "representation" => self.representation(),
            "doob" => self.doob(),
            "hardy_sharpness" => self.hardy_sharpness(),
            "iuc" => self.iuc(),
            "green_bound" => self.green_bound(),
            "blowup" => self.blowup(),
            "intrinsic_hardy" => self.intrinsic_hardy(),
            "doob_ground" => self.doob_ground(),
            other => bail!("unknown check '{other}'"),
        }
    }

    fn constants(&mut self) -> Result<Vec<CheckResult>> {
        let ModelParams { d, alpha, .. } = self.params;
        let c_star = specfun::hardy_best_constant(d, alpha)?;
        let f_bc = specfun::coupling_f(d, alpha, specfun::critical_beta(d, alpha)?)?;
        let squared = specfun::squared_critical_beta(d, alpha)?;
        Ok(vec![CheckResult::at_most("constants", (c_star - f_bc).abs() / c_star, self.tol("constants", 1e-12))
            .with("c_star", c_star)
            .with("f_beta_c", f_bc)
            .with("squared_beta_c", squared)
            .with("squared_minus_c_star", squared - c_star)])
    }

    fn coupling_map(&mut self) -> Result<Vec<CheckResult>> {
        let ModelParams { d, alpha, .. } = self.params;
        let top = d as f64 - alpha;
        let bc = 0.5 * top;
        let samples = 1000;
        let mut sym: f64 = 0.0;
        let mut prev = 0.0;
        let mut monotone = true;
        for k in 1..=samples {
            let b = top * k as f64 / (samples + 1) as f64;
            let f = specfun::coupling_f(d, alpha, b)?;
            let g = specfun::coupling_f(d, alpha, top - b)?;
            sym = sym.max((f - g).abs() / f.abs().max(g.abs()));
            if b < bc {
                monotone &= f > prev;
                prev = f;
            }
        }
        let root = specfun::critical_point_check(d, alpha)?;
        let anchor = specfun::coupling_f(3, 1.0, 0.5)?;
        Ok(vec![
            CheckResult::at_most("coupling_symmetry", sym, self.tol("coupling_symmetry", 1e-12))
                .with("samples", samples),
            CheckResult::holds("coupling_monotone", if monotone { 1.0 } else { 0.0 }, 0.0, monotone),
            CheckResult::within("critical_point", root, bc, self.tol("critical_point", 1e-8)),
            CheckResult::within("coupling_anchor", anchor, 0.5, self.tol("coupling_anchor", 1e-12))
                .with("case", "d=3, alpha=1, beta=0.5"),
        ])
    }

    fn riesz(&mut self) -> Result<Vec<CheckResult>> {
        let mut cases = vec![(3, 1.0, 1.0), (3, 1.0, 0.5), (2, 1.0, 0.5), (1, 0.5, 0.25)];
        let own = riesz_case(&self.cfg)?;
        if !cases.contains(&own) {
            cases.push(own);
        }
        let radii = if self.cfg.radii.is_empty() { vec![1.0] } else { self.cfg.radii.clone() };
        let mut out = Vec::new();
        let mut rows = Vec::new();
        for (d, a, b) in cases {
            let chk = riesz::verify_harmonic_identity(d, a, b, &radii)?;
            for k in 0..radii.len() {
                rows.push(vec![d as f64, a, b, radii[k], chk.lhs[k], chk.rhs[k]]);
            }
            out.push(
                CheckResult::at_most("riesz", chk.max_rel_error, self.tol("riesz", chk.tolerance))
                    .with("d", d)
                    .with("alpha", a)
                    .with("beta", b),
            );
        }
        let anchor = riesz::riesz_potential_radial(3, 1.0, 2.0, 1.0)?;
        out.push(CheckResult::within(
            "riesz_anchor",
            anchor,
            std::f64::consts::FRAC_PI_2,
            self.tol("riesz_anchor", 1e-9),
        ));
        self.trace("riesz", &["d", "alpha", "beta", "r", "lhs", "rhs"], rows);
        Ok(out)
    }

    fn boundary_exponent(&mut self) -> Result<Vec<CheckResult>> {
        let level = self.finest();
        let eig = self.eig_v(level)?;
        let fit = analysis::boundary_exponent(&eig)?;
        let target = 0.5 * self.params.alpha;
        let tol = self.tol("boundary_exponent", self.exponent_tol());
        self.trace_fit("boundary_exponent", &fit);
        Ok(vec![fit_result("boundary_exponent", &fit, target, tol, eig.grid.n_per_axis)])
    }

    fn singularity_exponent(&mut self) -> Result<Vec<CheckResult>> {
        let level = self.finest();
        let eig = self.eig_v(level)?;
        let fit = analysis::singularity_exponent(&eig)?;
        let target = -self.params.beta();
        let tol = self.tol("singularity_exponent", self.exponent_tol());
        self.trace_fit("singularity_exponent", &fit);
        Ok(vec![fit_result("singularity_exponent", &fit, target, tol, eig.grid.n_per_axis)])
    }

    fn trace_fit(&mut self, name: &str, fit: &analysis::ExponentFit) {
        let corr = fit.correction.map(|c| c.coefficient).unwrap_or(0.0);
        self.trace(
            name,
            &["window_lo", "window_hi", "exponent", "intercept", "correction", "r_squared", "points"],
            vec![vec![
                fit.window.0,
                fit.window.1,
                fit.exponent,
                fit.intercept,
                corr,
                fit.r_squared,
                fit.n_points as f64,
            ]],
        );
    }

    fn comparability(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("comparability", 1)?;
        let top = self.finest();
        let beta = self.params.beta();
        let mut rows = Vec::new();
        for level in [top - 1, top] {
            let eig = self.eig_v(level)?;
            let g = &eig.grid;
            let model = analysis::comparison_profile(g, self.params.alpha, beta);
            let mask = vec![true; g.len()];
            let (sup, inf) = analysis::comparability_ratio(&eig.ground_state(), &model, &mask, &g.cell_measure)?;
            rows.push(vec![g.n_per_axis as f64, sup, inf, sup / inf]);
        }
        let (coarse, fine) = (rows[0][3], rows[1][3]);
        let drift = (fine / coarse - 1.0).abs();
        self.trace("comparability", &["n", "sup", "inf", "sup_over_inf"], rows);
        Ok(vec![
            CheckResult::at_most("comparability", fine, self.tol("comparability", 4.0)),
            CheckResult::at_most("comparability_stability", drift, self.tol("comparability_stability", 0.1))
                .with("coarse", coarse)
                .with("fine", fine),
        ])
    }

    fn representation(&mut self) -> Result<Vec<CheckResult>> {
        let level = self.finest();
        let eig = self.eig_v(level)?;
        let g = eig.grid.clone();
        let k = fracop::green_matrix(self.free_op(level)?)?;
        let v = if self.params.c == 0.0 {
            vec![0.0; g.len()]
        } else {
            fracop::hardy_diagonal(&g, self.params.alpha, self.params.c)?
        };
        let res = analysis::ground_state_representation_residual(&eig.ground_state(), eig.lambda0(), &k, &v)?;
        let default = if self.params.is_critical() { 1e-6 } else { 1e-8 };
        Ok(vec![CheckResult::at_most("representation", res, self.tol("representation", default))
            .with("n", g.n_per_axis)])
    }

    fn doob(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("doob", 2)?;
        let base = self.op_v(0)?.clone();
        let form = doob::weighted_form(&base)?;
        let gap = doob::similarity_gap(&form.h, &base)?;
        let mut out = vec![CheckResult::at_most("doob_spectrum", gap, self.tol("doob_spectrum", 1e-9))
            .with("n", base.grid.n_per_axis)];

        let top = self.finest();
        let mut rows = Vec::new();
        for level in top - 2..=top {
            let lv = self.op_v(level)?.clone();
            let form = doob::weighted_form(&lv)?;
            let r = form.identity_residual(&lv.grid, doob::residual_radius(&lv.grid));
            rows.push(vec![lv.grid.n_per_axis as f64, r]);
        }
        let shrink: Vec<f64> = rows.windows(2).map(|w| w[0][1] / w[1][1]).collect();
        let worst = shrink.iter().copied().fold(f64::INFINITY, f64::min);
        self.trace("doob_residual", &["n", "residual"], rows.clone());
        if form.beta == 0.0 {
            // w = 1: H and Q coincide up to rounding on every grid
            let largest = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
            out.push(CheckResult::at_most("doob_residual_exact", largest, self.tol("doob_residual_exact", 1e-12)));
            return Ok(out);
        }
        out.push(
            CheckResult::at_least("doob_residual_shrink", worst, self.tol("doob_residual_shrink", 1.4))
                .with("factors", shrink)
                .with("finest_residual", rows[2][1])
                .with("beta", form.beta),
        );
        Ok(out)
    }

    fn hardy_sharpness(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("hardy_sharpness", 1)?;
        let c_star = self.params.c_star();
        let mut rows = Vec::new();
        for level in 0..=self.finest() {
            let q = analysis::hardy_rayleigh_min(self.free_op(level)?)?;
            rows.push(vec![self.n_at(level) as f64, q, q / c_star]);
        }
        let min_ratio = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
        let decreasing = rows.windows(2).all(|w| w[1][1] < w[0][1]);
        let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        self.trace("hardy_sharpness", &["n", "quotient", "quotient_over_c_star"], rows);
        Ok(vec![
            CheckResult::at_least("hardy_sharpness", min_ratio, self.tol("hardy_sharpness", 0.95))
                .with("c_star", c_star)
                .with("quotients", values),
            CheckResult::holds("hardy_decreasing", if decreasing { 1.0 } else { 0.0 }, 0.0, decreasing),
        ])
    }

    fn iuc(&mut self) -> Result<Vec<CheckResult>> {
        let eig = self.eig_v(0)?;
        let ladder = self.t_ladder(&eig);
        let mut rows = Vec::new();
        for &t in &ladder {
            let heat = spectral::heat_kernel(&eig, t)?;
            rows.push(vec![t, t * eig.gap(), analysis::iuc_ratio(&heat, &eig)?]);
        }
        let nonincreasing = rows.windows(2).all(|w| w[1][2] <= w[0][2]);
        let last = rows.last().map(|r| r[2]).unwrap_or(f64::NAN);
        let last_gt = rows.last().map(|r| r[1]).unwrap_or(f64::NAN);
        self.trace("iuc", &["t", "gap_t", "deviation"], rows);
        Ok(vec![
            CheckResult::at_most("iuc", last, self.tol("iuc", 1e-3)).with("gap_t", last_gt),
            CheckResult::holds("iuc_monotone", if nonincreasing { 1.0 } else { 0.0 }, 0.0, nonincreasing),
        ])
    }

    fn green_bound(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("green_bound", 1)?;
        let top = self.finest();
        let beta = self.params.beta();
        let mut rows = Vec::new();
        for level in [top - 1, top] {
            let k = fracop::green_matrix(self.op_v(level)?)?;
            let b = analysis::green_lower_bound(&k, beta)?;
            rows.push(vec![self.n_at(level) as f64, b.min_ratio]);
        }
        let (coarse, fine) = (rows[0][1], rows[1][1]);
        self.trace("green_bound", &["n", "min_ratio"], rows);
        Ok(vec![
            CheckResult::holds("green_bound", fine, 0.0, fine > 0.0),
            stability("green_bound_stability", coarse, fine, self.tol("green_bound_stability", 2.0)),
        ])
    }

    fn blowup(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("blowup", 2)?;
        let top = self.finest();
        let grids: Vec<Arc<Grid>> = (top - 2..=top).map(|l| self.grid(l)).collect::<Result<_>>()?;
        let alpha = self.params.alpha;
        let mut out = Vec::new();
        let mut rows: Vec<Vec<f64>> = grids.iter().map(|g| vec![g.n_per_axis as f64]).collect();
        let mut couplings = vec![self.params.c];
        if self.params.is_critical() {
            couplings.push(0.5 * self.params.c_star());
        }
        for c in couplings {
            let diag = analysis::critical_blowup_diagnostic(&grids, alpha, c)?;
            for (row, v) in rows.iter_mut().zip(&diag.values) {
                row.push(*v);
            }
            let ctx = |r: CheckResult| {
                r.with("c", c)
                    .with("values", diag.values.clone())
                    .with("increment_ratio", diag.increment_ratio())
                    .with("last_ratio", diag.last_ratio())
            };
            if c >= self.params.c_star() {
                let inc = diag.strictly_increasing();
                out.push(ctx(CheckResult::holds(
                    "blowup_increasing",
                    diag.last_relative_change(),
                    0.0,
                    inc,
                )));
            } else {
                out.push(ctx(CheckResult::at_most(
                    "blowup_cauchy",
                    diag.last_relative_change(),
                    self.tol("blowup_cauchy", 0.05),
                )));
            }
        }
        let header: &[&'static str] = if rows[0].len() == 3 { &["n", "i_c", "i_half"] } else { &["n", "i_c"] };
        self.trace("blowup", header, rows);
        Ok(out)
    }

    fn intrinsic_hardy(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("intrinsic_hardy", 1)?;
        let top = self.finest();
        let mut rows = Vec::new();
        for level in [top - 1, top] {
            let eig = self.eig_free(level)?;
            let ih = analysis::intrinsic_hardy_check(self.free_op(level)?, &eig)?;
            rows.push(vec![self.n_at(level) as f64, ih.c_h, ih.mu, ih.trial_bound]);
        }
        let (coarse, fine) = (rows[0][1], rows[1][1]);
        let trial_ok = rows.iter().all(|r| r[2] <= r[3] * (1.0 + 1e-9));
        self.trace("intrinsic_hardy", &["n", "c_h", "mu", "trial_bound"], rows);
        Ok(vec![
            CheckResult::holds("intrinsic_hardy", fine, 0.0, fine.is_finite() && fine > 0.0 && trial_ok),
            stability("intrinsic_hardy_stability", coarse, fine, self.tol("intrinsic_hardy_stability", 2.0)),
        ])
    }

    fn doob_ground(&mut self) -> Result<Vec<CheckResult>> {
        self.need_refinements("doob_ground", 1)?;
        let top = self.finest();
        let mut rows = Vec::new();
        for level in [top - 1, top] {
            let (ev, e0) = (self.eig_v(level)?, self.eig_free(level)?);
            let r = analysis::doob_ground_lower_bound(&ev, &e0)?;
            rows.push(vec![self.n_at(level) as f64, r.min_ratio, r.argmin_abs_x, r.argmin_delta]);
        }
        let (coarse, fine) = (rows[0][1], rows[1][1]);
        let (ax, dl) = (rows[1][2], rows[1][3]);
        self.trace("doob_ground", &["n", "min_ratio", "argmin_abs_x", "argmin_delta"], rows);
        Ok(vec![
            CheckResult::holds("doob_ground", fine, 0.0, fine > 0.0)
                .with("argmin_abs_x", ax)
                .with("argmin_delta", dl),
            stability("doob_ground_stability", coarse, fine, self.tol("doob_ground_stability", 2.0)),
        ])
    }
}

/// `(d, α, β)` for the configuration's own Riesz case: `--beta`, else `β(c)`,
/// else `β_c / 2`.
pub fn riesz_case(cfg: &ExperimentConfig) -> Result<(usize, f64, f64)> {
    let d = cfg.free_dim();
    let p = cfg.params_in(d)?;
    let beta = match cfg.beta {
        Some(b) => b,
        None if p.c > 0.0 && !p.is_critical() => p.beta(),
        None => 0.5 * specfun::critical_beta(d, p.alpha)?,
    };
    Ok((d, p.alpha, beta))
}

fn fit_result(name: &str, fit: &analysis::ExponentFit, target: f64, tol: f64, n: usize) -> CheckResult {
    CheckResult::within(name, fit.exponent, target, tol)
        .with("n", n)
        .with("r_squared", fit.r_squared)
        .with("points", fit.n_points)
        .with("window", vec![fit.window.0, fit.window.1])
}

/// `max(a/b, b/a) ≤ factor`.
fn stability(name: &str, coarse: f64, fine: f64, factor: f64) -> CheckResult {
    let q = (fine / coarse).max(coarse / fine);
    CheckResult::at_most(name, q, factor).with("coarse", coarse).with("fine", fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use frachardy_core::DomainSpec;

    fn lab(n: usize, refinements: usize, frac: f64) -> Lab {
        let cfg = ExperimentConfig { n, refinements, c_frac: Some(frac), ..Default::default() };
        let p = cfg.params().unwrap();
        Lab::new(cfg, p)
    }

    #[test]
    fn grid_free_checks_pass() {
        let mut l = lab(8, 0, 0.5);
        for name in GRID_FREE {
            for r in l.run(name).unwrap() {
                assert!(r.pass, "{name}: {r:?}");
            }
        }
        assert!(l.grids.is_empty());
    }

    #[test]
    fn refinement_checks_need_ladder() {
        let mut l = lab(16, 0, 0.5);
        assert!(l.run("blowup").is_err());
        assert!(l.run("doob").is_err());
    }

    #[test]
    fn cached_levels() {
        let mut l = lab(16, 1, 0.0);
        let a = l.eig_v(1).unwrap();
        let b = l.eig_free(1).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(l.grid(1).unwrap().n_per_axis, 32);
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(validate_names(&["riesz".into()]).is_ok());
        assert!(validate_names(&["reisz".into()]).is_err());
    }

    #[test]
    fn riesz_case_defaults() {
        let cfg = ExperimentConfig { d: Some(3), alpha: 1.0, domain: DomainSpec::disk(1.0).unwrap(), ..Default::default() };
        assert_eq!(riesz_case(&cfg).unwrap(), (3, 1.0, 0.5));
    }
}
