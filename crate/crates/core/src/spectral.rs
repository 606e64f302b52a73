//! Eigen-solves of the discrete operators and heat kernels by eigen-expansion.

use std::sync::Arc;

use faer::Mat;

use crate::fracop::{OperatorKind, OperatorMatrix};
use crate::geometry::Grid;
use crate::specfun::ModelParams;
use crate::{fracop, Error, Result};

/// Lowest `k` eigenpairs of an operator in the `cell_measure` inner product.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `n × k`, column `j` is the grid function of eigenvalue `j`, normalised
    /// so that `Σ_i v_i² m_i = 1`.
    pub eigenvectors: Mat<f64>,
}

impl EigenSolution {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn gap(&self) -> f64 {
        self.eigenvalues[1] - self.eigenvalues[0]
    }

    /// Positive, measure-normalised ground state.
    pub fn ground_state(&self) -> Vec<f64> {
        self.eigenvector(0)
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.col(j).iter().copied().collect()
    }

    /// `⟨v_i, v_j⟩_m`.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let m = &self.grid.cell_measure;
        self.eigenvectors
            .col(i)
            .iter()
            .zip(self.eigenvectors.col(j).iter())
            .zip(m)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}

/// Lowest `k` eigenpairs of `op` (full dense decomposition, truncated).
///
/// Dense linear algebra follows the global thread setting
/// ([`configure_threads`](crate::par::configure_threads)).
pub fn eigensolve(op: &OperatorMatrix, k: usize) -> Result<EigenSolution> {
    if op.kind.is_green() {
        return Err(Error::shape("eigensolve expects an operator, not a Green kernel"));
    }
    let n = op.n();
    if k == 0 || k > n {
        return Err(Error::shape(format!("requested {k} eigenpairs of a {n}×{n} operator")));
    }
    let eig = op
        .entries
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    let values: Vec<f64> = eig.S().column_vector().iter().take(k).copied().collect();
    let u = eig.U();
    let inv_sqrt_m: Vec<f64> = op.grid.cell_measure.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut vectors = Mat::from_fn(n, k, |i, j| u[(i, j)] * inv_sqrt_m[i]);

    // orient every eigenvector so that its measure-weighted mean is ≥ 0
    let m = &op.grid.cell_measure;
    for j in 0..k {
        let mean: f64 = vectors.col(j).iter().zip(m).map(|(v, w)| v * w).sum();
        if mean < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    let ground = vectors.col(0);
    let max = ground.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = ground.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min < -1e-10 * max {
        return Err(Error::Irreducibility { min_relative: min / max });
    }
    if min <= 0.0 {
        return Err(Error::Irreducibility { min_relative: min / max });
    }
    Ok(EigenSolution { params: op.params, grid: op.grid.clone(), eigenvalues: values, eigenvectors: vectors })
}

/// Heat kernel `p_t(x_i, x_j) = Σ_k e^{−λ_k t} v_k(x_i) v_k(x_j)`, so that
/// `(T_t f)_i = Σ_j p_t(x_i, x_j) f_j m_j`.
#[derive(Debug, Clone)]
pub struct HeatKernel {
    pub t: f64,
    pub matrix: Mat<f64>,
    pub grid: Arc<Grid>,
}

impl HeatKernel {
    /// `Σ_i p_t(x_i, x_i) m_i`.
    pub fn trace(&self) -> f64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)] * self.grid.cell_measure[i]).sum()
    }

    /// `(T_t f)_i`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        let m = &self.grid.cell_measure;
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * f[j] * m[j]).sum())
            .collect()
    }

    /// Kernel of `T_t ∘ T_s`.
    pub fn compose(&self, other: &HeatKernel) -> Mat<f64> {
        let n = self.matrix.nrows();
        let m = &self.grid.cell_measure;
        let scaled = Mat::from_fn(n, n, |i, j| other.matrix[(i, j)] * m[i]);
        &self.matrix * &scaled
    }
}

pub fn heat_kernel(eig: &EigenSolution, t: f64) -> Result<HeatKernel> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::domain(format!("heat kernel time t = {t} must be positive")));
    }
    let n = eig.grid.len();
    if eig.k() != n {
        return Err(Error::shape(format!("heat kernel needs the full spectrum ({n}), have {}", eig.k())));
    }
    let exponent = eig.lambda0() * t;
    if exponent > 700.0 {
        return Err(Error::Underflow { t, exponent, t_max: 700.0 / eig.lambda0() });
    }
    let scaled = Mat::from_fn(n, n, |i, k| eig.eigenvectors[(i, k)] * (-eig.eigenvalues[k] * t).exp());
    let mut matrix = &scaled * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
            matrix[(i, j)] = s;
            matrix[(j, i)] = s;
        }
    }
    Ok(HeatKernel { t, matrix, grid: eig.grid.clone() })
}

/// One entry of a coupling sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub c: f64,
    pub lambda0: f64,
    pub ground_state: Vec<f64>,
    /// `‖φ(c_k) − φ(c_{k−1})‖_{L²}`; `None` for the first entry.
    pub step_distance: Option<f64>,
}

/// Eigensolves along an ascending list of couplings in `[0, c*]`.
pub fn coupling_sweep(l0: &OperatorMatrix, c_list: &[f64]) -> Result<Vec<SweepPoint>> {
    if l0.kind != OperatorKind::Free {
        return Err(Error::shape("coupling_sweep expects the free operator"));
    }
    if c_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("coupling list must be ascending"));
    }
    let m = &l0.grid.cell_measure;
    let mut out: Vec<SweepPoint> = Vec::with_capacity(c_list.len());
    for &c in c_list {
        let eig = if c == 0.0 {
            eigensolve(l0, 1)?
        } else {
            eigensolve(&fracop::assemble_hardy(l0, c)?, 1)?
        };
        let phi = eig.ground_state();
        let step_distance = out.last().map(|prev| {
            prev.ground_state
                .iter()
                .zip(&phi)
                .zip(m)
                .map(|((a, b), w)| (a - b) * (a - b) * w)
                .sum::<f64>()
                .sqrt()
        });
        out.push(SweepPoint { c, lambda0: eig.lambda0(), ground_state: phi, step_distance });
    }
    Ok(out)
}

/// `φ` on the grid with its coordinates, for the ground-state CSV:
/// `x1[,x2],abs_x,delta,phi`.
pub fn write_ground_state_csv<W: std::io::Write>(eig: &EigenSolution, mut out: W) -> Result<()> {
    let g = &eig.grid;
    let phi = eig.ground_state();
    if g.dim() == 1 {
        writeln!(out, "x1,abs_x,delta,phi")?;
    } else {
        writeln!(out, "x1,x2,abs_x,delta,phi")?;
    }
    for i in 0..g.len() {
        let x = g.nodes[i];
        if g.dim() == 1 {
            write!(out, "{:e}", x[0])?;
        } else {
            write!(out, "{:e},{:e}", x[0], x[1])?;
        }
        writeln!(out, ",{:e},{:e},{:e}", g.dist_origin[i], g.dist_boundary[i], phi[i])?;
    }
    Ok(())
}

/// Spectrum CSV: `index,eigenvalue`.
pub fn write_spectrum_csv<W: std::io::Write>(eig: &EigenSolution, mut out: W) -> Result<()> {
    writeln!(out, "index,eigenvalue")?;
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        writeln!(out, "{k},{l:e}")?;
    }
    Ok(())
}
