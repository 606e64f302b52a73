//! The ground-state transform `f ↦ w f` with `w = |x|^{−β}`.
//!
//! Conjugating `L_V` by `w` gives `H = w^{−1} L_V w`, the operator of the
//! weighted jump form
//!
//! `Q[g] = 𝒜/2 ∬_{Ω×Ω} (g(x) − g(y))² k(x − y) w(x) w(y) + 𝒜 ∫_Ω g² w(x) ∫_{Ω^c} w(y) k(x − y)`
//!
//! on `L²(Ω, w² dx)` whenever `w` is harmonic for the coupling `F(β)`. The
//! discrete matrices agree off the diagonal by construction; the diagonal
//! difference `((L_V w)_i − 𝒜 k^w_i) / w_i` measures how far `w` is from
//! being discretely harmonic and vanishes only in the refinement limit.

use faer::Mat;

use crate::fracop::{self, JumpKernel, OperatorKind, OperatorMatrix};
use crate::geometry::Grid;
use crate::quad::GaussLegendre;
use crate::specfun::{beta_of_c, form_constant, validate_dims};
use crate::{quad, DomainSpec, Error, Execution, Result};

/// `w_i = |x_i|^{−β}`.
pub fn weight_vector(grid: &Grid, beta: f64) -> Vec<f64> {
    grid.dist_origin.iter().map(|&r| r.powf(-beta)).collect()
}

/// `H_ij = w_i^{−1} (L_V)_ij w_j` in nodal form, `L_V = M^{−1/2} S_V M^{1/2}`.
pub fn conjugate(lv: &OperatorMatrix, w: &[f64]) -> Result<Mat<f64>> {
    if lv.kind.is_green() {
        return Err(Error::shape("conjugate expects an operator, not a Green kernel"));
    }
    let n = lv.n();
    if w.len() != n {
        return Err(Error::shape(format!("weight has length {}, operator is {n}×{n}", w.len())));
    }
    let m = &lv.grid.cell_measure;
    Ok(Mat::from_fn(n, n, |i, j| {
        let scale = if m[i] == m[j] { 1.0 } else { (m[j] / m[i]).sqrt() };
        lv.entries[(i, j)] * scale * w[j] / w[i]
    }))
}

/// `𝒜 ∫_{Ω^c} |y|^{−β} |x_i − y|^{−d−α} dy` per node.
pub fn weighted_killing(grid: &Grid, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    weighted_killing_with(grid, alpha, beta, Execution::default())
}

pub fn weighted_killing_with(grid: &Grid, alpha: f64, beta: f64, exec: Execution) -> Result<Vec<f64>> {
    validate_dims(grid.dim(), alpha)?;
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::domain(format!("weight exponent β = {beta} must be nonnegative")));
    }
    let a = form_constant(grid.dim(), alpha)?;
    let gl = GaussLegendre::new(16);
    // substituting |x − y| = ρ/s leaves s^{α+β−1} (|s x + ρ e|)^{−β} on (0, 1]
    let shells = (45.0 / (alpha + beta)).ceil() as usize;
    let radial = |x: [f64; 2], e: [f64; 2], rho: f64| {
        rho.powf(-alpha)
            * gl.graded_from_left(0.0, 1.0, shells, |s| {
                let y = [s * x[0] + rho * e[0], s * x[1] + rho * e[1]];
                s.powf(alpha + beta - 1.0) * y[0].hypot(y[1]).powf(-beta)
            })
    };
    let spec = grid.spec;
    Ok(exec.map(grid.len(), |i| {
        let x = grid.nodes[i];
        match spec {
            DomainSpec::Interval { a: lo, b: hi } => {
                a * (radial(x, [1.0, 0.0], hi - x[0]) + radial(x, [-1.0, 0.0], x[0] - lo))
            }
            _ => {
                let breaks = fracop::angular_breaks(grid, x);
                a * quad::adaptive_with_breaks(
                    |t| radial(x, [t.cos(), t.sin()], spec.exit_distance(x, t)),
                    &breaks,
                    0.0,
                    1e-11,
                )
            }
        }
    }))
}

/// The weighted jump form of the transform, assembled directly.
#[derive(Debug, Clone)]
pub struct WeightedForm {
    pub beta: f64,
    pub w: Vec<f64>,
    /// `H = w^{−1} L_V w`.
    pub h: Mat<f64>,
    /// Form matrix: `Q[g] = gᵀ Q g`.
    pub q: Mat<f64>,
    /// `m_i w_i²`.
    pub weighted_mass: Vec<f64>,
}

impl WeightedForm {
    /// `M_w^{−1} Q`, the operator of `Q` in `L²(w² dx)`.
    pub fn q_operator(&self) -> Mat<f64> {
        let n = self.q.nrows();
        Mat::from_fn(n, n, |i, j| self.q[(i, j)] / self.weighted_mass[i])
    }

    /// `‖(H − M_w^{−1} Q) 1‖ / ‖1‖` in `L²(w² dx)` restricted to nodes with
    /// `|x| ≥ r_min`.
    pub fn identity_residual(&self, grid: &Grid, r_min: f64) -> f64 {
        let keep: Vec<usize> = (0..grid.len()).filter(|&i| grid.dist_origin[i] >= r_min).collect();
        let (mut num, mut den) = (0.0, 0.0);
        for &i in &keep {
            let d: f64 = keep
                .iter()
                .map(|&j| self.h[(i, j)] - self.q[(i, j)] / self.weighted_mass[i])
                .sum();
            num += self.weighted_mass[i] * d * d;
            den += self.weighted_mass[i];
        }
        (num / den).sqrt()
    }

    /// `Q · 1` per node (weighted killing survives).
    pub fn q_on_constants(&self) -> Vec<f64> {
        let n = self.q.nrows();
        (0..n).map(|i| (0..n).map(|j| self.q[(i, j)]).sum()).collect()
    }
}

/// Directly assembled `Q` for weight exponent `β` on `grid`: the pair weights
/// of [`fracop::assemble_free`] times `w_i w_j`, and the exterior mass of `w`.
pub fn assemble_q_direct(grid: &Grid, alpha: f64, beta: f64) -> Result<Mat<f64>> {
    assemble_q_direct_with(grid, alpha, beta, Execution::default())
}

pub fn assemble_q_direct_with(grid: &Grid, alpha: f64, beta: f64, exec: Execution) -> Result<Mat<f64>> {
    let a = form_constant(grid.dim(), alpha)?;
    let w = weight_vector(grid, beta);
    let kw = weighted_killing_with(grid, alpha, beta, exec)?;
    let kernel = JumpKernel::new(grid, alpha, exec);
    let pairs = fracop::pair_weights(grid, &kernel, |i, j| w[i] * w[j], exec);
    let fragments: Vec<f64> = exec.map(grid.len(), |i| {
        kernel.fragment_mass_weighted(i, |p| p[0].hypot(p[1]).powf(-beta))
    });
    let n = grid.len();
    let m = &grid.cell_measure;
    Ok(Mat::from_fn(n, n, |i, j| {
        if i == j {
            let row: f64 = pairs[i * n..(i + 1) * n].iter().sum();
            a * row + m[i] * w[i] * (kw[i] + a * fragments[i])
        } else {
            -a * pairs[i * n + j]
        }
    }))
}

/// Transform of `L_V` with `β = β(c)`, both ways.
pub fn weighted_form(lv: &OperatorMatrix) -> Result<WeightedForm> {
    if lv.kind != OperatorKind::Schrodinger && lv.kind != OperatorKind::Free {
        return Err(Error::shape("weighted_form expects L₀ or L_V"));
    }
    let p = lv.params;
    let beta = if p.c == 0.0 { 0.0 } else { beta_of_c(p.d, p.alpha, p.c)? };
    let grid = &lv.grid;
    let w = weight_vector(grid, beta);
    let h = conjugate(lv, &w)?;
    let q = assemble_q_direct(grid, p.alpha, beta)?;
    let weighted_mass = grid.cell_measure.iter().zip(&w).map(|(m, w)| m * w * w).collect();
    Ok(WeightedForm { beta, w, h, q, weighted_mass })
}

/// Eigenvalues of a general real matrix, ascending by real part, with the
/// largest imaginary part seen.
pub fn general_eigenvalues(a: &Mat<f64>) -> Result<(Vec<f64>, f64)> {
    let ev = a.eigenvalues().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let max_imag = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(f64::total_cmp);
    Ok((re, max_imag))
}

/// Largest relative gap `|μ_k − λ_k| / |λ_k|` between the spectrum of `H` and
/// that of the symmetric operator it conjugates.
pub fn similarity_gap(h: &Mat<f64>, lv: &OperatorMatrix) -> Result<f64> {
    let (mu, max_imag) = general_eigenvalues(h)?;
    let lambda = lv
        .entries
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let scale = lambda.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let gap = mu
        .iter()
        .zip(&lambda)
        .map(|(m, l)| (m - l).abs() / l.abs())
        .fold(0.0, f64::max);
    Ok(gap.max(max_imag / scale))
}

/// Radius excluded around the origin when comparing `H` and `Q`.
pub fn residual_radius(grid: &Grid) -> f64 {
    grid.spec.diameter() / 4.0
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fracop::{assemble_free, assemble_hardy};
    use crate::specfun::hardy_best_constant;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), n).unwrap())
    }

    #[test]
    fn weights() {
        let g = interval(8);
        let w = weight_vector(&g, 0.0);
        assert!(w.iter().all(|&v| v == 1.0));
        let w = weight_vector(&g, 0.5);
        // node at 0.125 → 0.125^{−1/2}
        let i = g.nodes.iter().position(|x| (x[0] - 0.125).abs() < 1e-15).unwrap();
        assert!((w[i] - 8f64.sqrt()).abs() < 1e-14);
        assert!((0.25f64.powf(-0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_is_identity() {
        let g = interval(32);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let h = conjugate(&l0, &weight_vector(&g, 0.0)).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(h[(i, j)].to_bits(), l0.entries[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let g = interval(128);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let lv = assemble_hardy(&l0, 0.5 * hardy_best_constant(1, 0.5).unwrap()).unwrap();
        let form = weighted_form(&lv).unwrap();
        assert!(similarity_gap(&form.h, &lv).unwrap() < 1e-9);
    }

    #[test]
    fn weighted_killing_reduces_to_killing() {
        let g = interval(16);
        let kw = weighted_killing(&g, 0.5, 0.0).unwrap();
        let k = fracop::killing_term(&g, 0.5).unwrap();
        for (a, b) in kw.iter().zip(&k) {
            assert!((a - b).abs() < 1e-10 * b, "{a} {b}");
        }
    }

    #[test]
    fn weighted_killing_interval_oracle() {
        // ∫_1^∞ y^{−β}(y − x)^{−1−α} dy by adaptive quadrature after y = 1 + t/(1 − t)
        let (alpha, beta) = (0.5, 0.25);
        let g = interval(8);
        let kw = weighted_killing(&g, alpha, beta).unwrap();
        let a = form_constant(1, alpha).unwrap();
        let side = |x: f64| {
            quad::adaptive(
                |t: f64| {
                    let y = 1.0 + t / (1.0 - t);
                    y.powf(-beta) * (y - x).powf(-1.0 - alpha) / ((1.0 - t) * (1.0 - t))
                },
                0.0,
                1.0,
                0.0,
                1e-13,
                40,
            )
            .0
        };
        for (i, x) in g.nodes.iter().enumerate() {
            let oracle = a * (side(x[0]) + side(-x[0]));
            assert!((kw[i] - oracle).abs() < 1e-8 * oracle, "{} {}", kw[i], oracle);
        }
    }

    #[test]
    fn q_matches_h_off_diagonal() {
        let g = interval(64);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let lv = assemble_hardy(&l0, 0.5 * hardy_best_constant(1, 0.5).unwrap()).unwrap();
        let form = weighted_form(&lv).unwrap();
        let qo = form.q_operator();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    let scale = form.h[(i, j)].abs().max(1e-300);
                    assert!((form.h[(i, j)] - qo[(i, j)]).abs() <= 1e-12 * scale);
                }
            }
        }
        assert!(form.q_on_constants().iter().all(|&v| v > 0.0));
    }
}
