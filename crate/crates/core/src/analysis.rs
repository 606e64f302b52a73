//! Estimate checks on computed ground states, heat kernels and Green
//! matrices: power-law fits near the origin and the boundary, comparability
//! ratios, generalized Rayleigh minima and the critical blow-up diagnostic.
//!
//! Fit windows skip the two innermost grid shells and stay `diam/4` away from
//! the other feature (boundary fits avoid the origin and vice versa).

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::Serialize;
use serde_json::Value;

use crate::fracop::{self, OperatorKind, OperatorMatrix};
use crate::geometry::Grid;
use crate::spectral::{eigensolve, EigenSolution, HeatKernel};
use crate::{Error, Result};

/// Leading correction of a corrected fit: `ln y = a + b ln x + c x^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correction {
    pub power: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub correction: Option<Correction>,
}

fn select(x: &[f64], y: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} abscissae vs {} ordinates", x.len(), y.len())));
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (&a, &b) in x.iter().zip(y) {
        if a >= window.0 && a <= window.1 {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::domain(format!("log–log fit needs positive data, got ({a}, {b})")));
            }
            lx.push(a);
            ly.push(b);
        }
    }
    if lx.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: lx.len() });
    }
    Ok((lx, ly))
}

fn least_squares(columns: &[Vec<f64>], target: &[f64]) -> (Vec<f64>, f64) {
    let m = target.len();
    let k = columns.len();
    let a = Mat::from_fn(m, k, |i, j| columns[j][i]);
    let mut b = Mat::from_fn(m, 1, |i, _| target[i]);
    a.qr().solve_lstsq_in_place(&mut b);
    let coef: Vec<f64> = (0..k).map(|j| b[(j, 0)]).collect();
    let mean = target.iter().sum::<f64>() / m as f64;
    let sst: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ssr: f64 = (0..m)
        .map(|i| {
            let fit: f64 = (0..k).map(|j| coef[j] * columns[j][i]).sum();
            (target[i] - fit) * (target[i] - fit)
        })
        .sum();
    let r2 = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 1.0 };
    (coef, r2)
}

/// Least-squares slope of `ln y` against `ln x` over `x ∈ window`.
pub fn fit_power_law(x: &[f64], y: &[f64], window: (f64, f64)) -> Result<ExponentFit> {
    let (sx, sy) = select(x, y, window)?;
    let lx: Vec<f64> = sx.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = sy.iter().map(|v| v.ln()).collect();
    let (coef, r_squared) = least_squares(&[vec![1.0; lx.len()], lx], &ly);
    Ok(ExponentFit {
        exponent: coef[1],
        intercept: coef[0],
        r_squared,
        window,
        n_points: sx.len(),
        correction: None,
    })
}

/// Fit of `ln y = a + b ln x + c x^power`, reporting `b` as the exponent.
pub fn fit_power_law_corrected(x: &[f64], y: &[f64], window: (f64, f64), power: f64) -> Result<ExponentFit> {
    let (sx, sy) = select(x, y, window)?;
    let lx: Vec<f64> = sx.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = sy.iter().map(|v| v.ln()).collect();
    let px: Vec<f64> = sx.iter().map(|v| v.powf(power)).collect();
    let (coef, r_squared) = least_squares(&[vec![1.0; lx.len()], lx, px], &ly);
    Ok(ExponentFit {
        exponent: coef[1],
        intercept: coef[0],
        r_squared,
        window,
        n_points: sx.len(),
        correction: Some(Correction { power, coefficient: coef[2] }),
    })
}

/// Window `[2h, diam/8]` shared by the origin and boundary fits.
pub fn fit_window(grid: &Grid) -> (f64, f64) {
    (2.0 * grid.h, grid.spec.diameter() / 8.0)
}

/// Exponent of `φ₀ ∼ |x|^{−β}` near the origin, from nodes with
/// `δ ≥ diam/4`. Expected `−β(c)`.
pub fn singularity_exponent(eig: &EigenSolution) -> Result<ExponentFit> {
    let g = &eig.grid;
    let far = g.spec.diameter() / 4.0;
    let phi = eig.ground_state();
    let (x, y): (Vec<f64>, Vec<f64>) = (0..g.len())
        .filter(|&i| g.dist_boundary[i] >= far)
        .map(|i| (g.dist_origin[i], phi[i]))
        .unzip();
    fit_power_law(&x, &y, fit_window(g))
}

/// Exponent of `φ₀ ∼ δ^{α/2}` near the boundary, from nodes with
/// `|x| ≥ diam/4`, with a `δ^α` correction term.
pub fn boundary_exponent(eig: &EigenSolution) -> Result<ExponentFit> {
    let g = &eig.grid;
    let far = g.spec.diameter() / 4.0;
    let phi = eig.ground_state();
    let (x, y): (Vec<f64>, Vec<f64>) = (0..g.len())
        .filter(|&i| g.dist_origin[i] >= far)
        .map(|i| (g.dist_boundary[i], phi[i]))
        .unzip();
    fit_power_law_corrected(&x, &y, fit_window(g), eig.params.alpha)
}

/// `|x|^{−β} δ^{α/2}` at every node.
pub fn comparison_profile(grid: &Grid, alpha: f64, beta: f64) -> Vec<f64> {
    grid.dist_origin
        .iter()
        .zip(&grid.dist_boundary)
        .map(|(r, d)| r.powf(-beta) * d.powf(0.5 * alpha))
        .collect()
}

/// `(sup, inf)` of `φ/model` over masked nodes after scaling both to unit
/// `L²(measure)` norm on the mask.
pub fn comparability_ratio(phi: &[f64], model: &[f64], mask: &[bool], measure: &[f64]) -> Result<(f64, f64)> {
    let n = phi.len();
    if model.len() != n || mask.len() != n || measure.len() != n {
        return Err(Error::shape("comparability inputs differ in length"));
    }
    let idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if idx.iter().any(|&i| !(model[i] > 0.0)) {
        return Err(Error::domain("comparison model must be positive on the mask"));
    }
    let norm = |v: &[f64]| idx.iter().map(|&i| v[i] * v[i] * measure[i]).sum::<f64>().sqrt();
    let scale = norm(model) / norm(phi);
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for &i in &idx {
        let q = phi[i] * scale / model[i];
        sup = sup.max(q);
        inf = inf.min(q);
    }
    Ok((sup, inf))
}

/// `‖φ − K(Vφ) − λ₀ Kφ‖ / ‖φ‖` in `L²(measure)`, with `K` the Green matrix
/// of `L₀` on the same grid.
pub fn ground_state_representation_residual(phi: &[f64], lambda0: f64, k: &OperatorMatrix, v: &[f64]) -> Result<f64> {
    if k.kind != OperatorKind::Green {
        return Err(Error::shape("representation residual needs the Green matrix of L₀"));
    }
    let n = k.n();
    if phi.len() != n || v.len() != n {
        return Err(Error::shape(format!("grid of {n} nodes vs vectors of {} and {}", phi.len(), v.len())));
    }
    let source: Vec<f64> = phi.iter().zip(v).map(|(p, v)| (v + lambda0) * p).collect();
    let image = k.apply(&source);
    let m = &k.grid.cell_measure;
    let num: f64 = (0..n).map(|i| (phi[i] - image[i]).powi(2) * m[i]).sum();
    let den: f64 = (0..n).map(|i| phi[i] * phi[i] * m[i]).sum();
    Ok((num / den).sqrt())
}

/// Smallest eigenvalue of `D S D`, i.e. the generalized problem
/// `S u = μ D^{−2} u` in half-density form.
fn scaled_min_eigenvalue(op: &OperatorMatrix, scale: &[f64]) -> Result<f64> {
    let n = op.n();
    let a = Mat::from_fn(n, n, |i, j| scale[i] * op.entries[(i, j)] * scale[j]);
    let ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    Ok(ev[0])
}

/// `min_f E[f] / ∫ |x|^{−α} f²` over grid functions.
pub fn hardy_rayleigh_min(l0: &OperatorMatrix) -> Result<f64> {
    if l0.kind != OperatorKind::Free {
        return Err(Error::shape("Hardy quotient needs the free operator"));
    }
    let half = 0.5 * l0.params.alpha;
    let scale: Vec<f64> = l0.grid.dist_origin.iter().map(|r| r.powf(half)).collect();
    scaled_min_eigenvalue(l0, &scale)
}

/// `sup_{i,j} |p_t(x_i, x_j) e^{λ₀t} / (φ₀(x_i) φ₀(x_j)) − 1|`.
pub fn iuc_ratio(heat: &HeatKernel, eig: &EigenSolution) -> Result<f64> {
    let n = heat.matrix.nrows();
    if eig.grid.len() != n {
        return Err(Error::shape("heat kernel and eigen-solution live on different grids"));
    }
    let phi = eig.ground_state();
    let growth = (eig.lambda0() * heat.t).exp();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            dev = dev.max((heat.matrix[(i, j)] * growth / (phi[i] * phi[j]) - 1.0).abs());
        }
    }
    Ok(dev)
}

/// Minimum of `G(x, y) / (δ^{α/2}(x) δ^{α/2}(y) w(x) w(y))` with
/// `w = |x|^{−β}`, and the pair where it is attained.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenBound {
    pub min_ratio: f64,
    pub argmin: (usize, usize),
}

pub fn green_lower_bound(k: &OperatorMatrix, beta: f64) -> Result<GreenBound> {
    if !k.kind.is_green() {
        return Err(Error::shape("Green lower bound needs a Green matrix"));
    }
    let g = &k.grid;
    let n = k.n();
    let alpha = k.params.alpha;
    let profile = comparison_profile(g, alpha, beta);
    let mut best = GreenBound { min_ratio: f64::INFINITY, argmin: (0, 0) };
    let mut most_negative: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = k.entries[(i, j)];
            if v <= 0.0 {
                most_negative = most_negative.min(v);
                continue;
            }
            let q = v / (profile[i] * profile[j]);
            if q < best.min_ratio {
                best = GreenBound { min_ratio: q, argmin: (i, j) };
            }
        }
    }
    if most_negative < 0.0 || best.min_ratio == f64::INFINITY {
        let max = k.entries.col_iter().flat_map(|c| c.iter().copied()).fold(0.0f64, f64::max);
        return Err(Error::Irreducibility { min_relative: most_negative / max.max(f64::MIN_POSITIVE) });
    }
    Ok(best)
}

/// The sequence `I_n = Σ |x_i|^{−α} φ(x_i)² m_i` over a sequence of grids.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupDiagnostic {
    pub n: Vec<usize>,
    pub values: Vec<f64>,
}

impl BlowupDiagnostic {
    pub fn strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// `I_last / I_prev`.
    pub fn last_ratio(&self) -> f64 {
        let k = self.values.len();
        self.values[k - 1] / self.values[k - 2]
    }

    /// `|I_last − I_prev| / I_last`.
    pub fn last_relative_change(&self) -> f64 {
        let k = self.values.len();
        (self.values[k - 1] - self.values[k - 2]).abs() / self.values[k - 1]
    }

    /// `(I_last − I_prev) / (I_prev − I_prev2)`: near 1 for logarithmic
    /// growth, below 1 when the sequence converges geometrically.
    pub fn increment_ratio(&self) -> f64 {
        let k = self.values.len();
        (self.values[k - 1] - self.values[k - 2]) / (self.values[k - 2] - self.values[k - 3])
    }
}

pub fn critical_blowup_diagnostic(grids: &[Arc<Grid>], alpha: f64, c: f64) -> Result<BlowupDiagnostic> {
    if grids.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: grids.len() });
    }
    let mut values = Vec::with_capacity(grids.len());
    for g in grids {
        let l0 = fracop::assemble_free(g.clone(), alpha)?;
        let op = if c == 0.0 { l0 } else { fracop::assemble_hardy(&l0, c)? };
        let phi = eigensolve(&op, 1)?.ground_state();
        let v: f64 = (0..g.len())
            .map(|i| g.dist_origin[i].powf(-alpha) * phi[i] * phi[i] * g.cell_measure[i])
            .sum();
        values.push(v);
    }
    Ok(BlowupDiagnostic { n: grids.iter().map(|g| g.n_per_axis).collect(), values })
}

/// `μ = min_f E[f] / ∫ f²/φ₀²`, the reciprocal of the intrinsic Hardy
/// constant `C_H`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IntrinsicHardy {
    pub mu: f64,
    pub c_h: f64,
    pub lambda0: f64,
    /// `λ₀ / |Ω|`, the quotient of the trial function `φ₀`.
    pub trial_bound: f64,
}

pub fn intrinsic_hardy_check(l0: &OperatorMatrix, eig_free: &EigenSolution) -> Result<IntrinsicHardy> {
    if l0.kind != OperatorKind::Free {
        return Err(Error::shape("intrinsic Hardy check needs the free operator"));
    }
    if eig_free.grid.len() != l0.n() {
        return Err(Error::shape("ground state and operator live on different grids"));
    }
    let phi = eig_free.ground_state();
    let mu = scaled_min_eigenvalue(l0, &phi)?;
    let lambda0 = eig_free.lambda0();
    Ok(IntrinsicHardy { mu, c_h: 1.0 / mu, lambda0, trial_bound: lambda0 / l0.grid.total_measure() })
}

/// `min φ₀^V / φ₀` over nodes, both measure-normalised.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GroundRatio {
    pub min_ratio: f64,
    pub argmin: usize,
    pub argmin_abs_x: f64,
    pub argmin_delta: f64,
}

pub fn doob_ground_lower_bound(eig_v: &EigenSolution, eig_free: &EigenSolution) -> Result<GroundRatio> {
    let g = &eig_v.grid;
    if eig_free.grid.len() != g.len() {
        return Err(Error::shape("ground states live on different grids"));
    }
    let (pv, p0) = (eig_v.ground_state(), eig_free.ground_state());
    let mut best = (f64::INFINITY, 0);
    for i in 0..g.len() {
        let q = pv[i] / p0[i];
        if q < best.0 {
            best = (q, i);
        }
    }
    Ok(GroundRatio {
        min_ratio: best.0,
        argmin: best.1,
        argmin_abs_x: g.dist_origin[best.1],
        argmin_delta: g.dist_boundary[best.1],
    })
}

/// Outcome of one named check, as written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub context: BTreeMap<String, Value>,
}

impl CheckResult {
    /// Passes iff `|value − target| ≤ tolerance`.
    pub fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        let mut c = Self::new(name, value, tolerance, (value - target).abs() <= tolerance);
        c.context.insert("target".into(), target.into());
        c
    }

    /// Passes iff `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, value <= tolerance)
    }

    /// Passes iff `value ≥ bound` (the bound is stored as the tolerance).
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value, bound, value >= bound)
    }

    /// Passes iff `cond`; `value` is reported as-is.
    pub fn holds(name: &str, value: f64, tolerance: f64, cond: bool) -> Self {
        Self::new(name, value, tolerance, cond)
    }

    fn new(name: &str, value: f64, tolerance: f64, pass: bool) -> Self {
        Self { name: name.into(), value, tolerance, pass: pass && value.is_finite(), context: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.into(), value.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracop::{assemble_free, assemble_hardy, green_matrix, hardy_diagonal};
    use crate::specfun::hardy_best_constant;
    use crate::spectral::heat_kernel;
    use crate::DomainSpec;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), n).unwrap())
    }

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..=5).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powf(0.25)).collect();
        let f = fit_power_law(&x, &y, (0.1, 0.5)).unwrap();
        assert!((f.exponent - 0.25).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let c = fit_power_law(&x, &[3.0; 5], (0.0, 1.0)).unwrap();
        assert!(c.exponent.abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let x: Vec<f64> = (0..200).map(|k| 0.1 + 0.4 * k as f64 / 199.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powf(0.25) * (1.0 + 0.01 * (1.0 / v).sin())).collect();
        let f = fit_power_law(&x, &y, (0.1, 0.5)).unwrap();
        assert!((f.exponent - 0.25).abs() < 0.02);
    }

    #[test]
    fn corrected_fit_recovers_exponent() {
        let x: Vec<f64> = (1..100).map(|k| 0.01 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powf(0.5) * (0.7 * v).exp()).collect();
        let f = fit_power_law_corrected(&x, &y, (0.0, 1.0), 1.0).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-10);
        assert!((f.correction.unwrap().coefficient - 0.7).abs() < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let x = [0.1, 0.2, 0.3];
        assert!(matches!(
            fit_power_law(&x, &x, (0.0, 1.0)),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn self_comparability() {
        let phi = [1.0, 2.0, 3.0];
        let (s, i) = comparability_ratio(&phi, &phi, &[true; 3], &[1.0; 3]).unwrap();
        assert!((s - 1.0).abs() < 1e-15 && (i - 1.0).abs() < 1e-15);
        assert!(comparability_ratio(&phi, &phi, &[false; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn representation_identity() {
        let g = interval(128);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let k = green_matrix(&l0).unwrap();
        let c = 0.5 * hardy_best_constant(1, 0.5).unwrap();
        let lv = assemble_hardy(&l0, c).unwrap();
        let eig = eigensolve(&lv, 1).unwrap();
        let v = hardy_diagonal(&g, 0.5, c).unwrap();
        let r = ground_state_representation_residual(&eig.ground_state(), eig.lambda0(), &k, &v).unwrap();
        assert!(r < 1e-8, "{r}");
        let e0 = eigensolve(&l0, 1).unwrap();
        let r0 = ground_state_representation_residual(&e0.ground_state(), e0.lambda0(), &k, &[0.0; 128]).unwrap();
        assert!(r0 < 1e-9, "{r0}");
    }

    #[test]
    fn hardy_quotient_above_sharp_constant() {
        let l0 = assemble_free(interval(128), 0.5).unwrap();
        let v = hardy_rayleigh_min(&l0).unwrap();
        assert!(v > 0.0 && v >= 0.95 * hardy_best_constant(1, 0.5).unwrap());
    }

    #[test]
    fn iuc_decays() {
        let g = interval(64);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let eig = eigensolve(&l0, g.len()).unwrap();
        let mut prev = f64::INFINITY;
        for s in [2.0, 4.0, 6.0, 10.0] {
            let t = s / eig.gap();
            let dev = iuc_ratio(&heat_kernel(&eig, t).unwrap(), &eig).unwrap();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn green_bound_positive() {
        let l0 = assemble_free(interval(64), 0.5).unwrap();
        let k = green_matrix(&l0).unwrap();
        assert!(green_lower_bound(&k, 0.0).unwrap().min_ratio > 0.0);
        assert!(green_lower_bound(&l0, 0.0).is_err());
    }

    #[test]
    fn intrinsic_hardy_trial_bound() {
        let g = interval(64);
        let l0 = assemble_free(g, 0.5).unwrap();
        let eig = eigensolve(&l0, 1).unwrap();
        let h = intrinsic_hardy_check(&l0, &eig).unwrap();
        assert!(h.mu > 0.0);
        assert!(h.mu <= h.trial_bound * (1.0 + 1e-10));
        assert!(h.mu <= h.lambda0);
    }

    #[test]
    fn blowup_needs_three_grids() {
        assert!(critical_blowup_diagnostic(&[interval(8), interval(16)], 0.5, 0.0).is_err());
    }
}
