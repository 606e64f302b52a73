//! Dense discretisation of the restricted fractional Laplacian
//! `L₀ = (−Δ)^{α/2}|_Ω`, its Hardy perturbation `L_V = L₀ − c|x|^{−α}` and the
//! Green matrices `K = L₀^{−1}`, `K_V = L_V^{−1}`.
//!
//! The jump part `𝒜 ∫_Ω (f(x) − f(y)) |x − y|^{−d−α} dy` is discretised with
//! piecewise-constant cell values: cell `j` contributes
//! `𝒜 (f_i − f_j) ∫_{cell j} |x_i − y|^{−d−α} dy`. The kernel is integrated
//! exactly over cells near the diagonal (closed form in 1D, a precomputed
//! offset table in 2D) and by the midpoint rule further out. On a uniform
//! grid the cells at `±j` around a node pair up and cancel the odd part of
//! the principal value; the self cell contributes the even remainder
//! `−c_h Δf`, realised as an extra nearest-neighbour coupling. The zero
//! exterior condition enters only through the killing term
//! `κ(x) = 𝒜 ∫_{Ω^c} |x − y|^{−d−α} dy`.
//!
//! Operators are stored in the symmetric half-density form
//! `S = M^{1/2} L M^{−1/2}` with `M = diag(cell_measure)`, so `S` is symmetric
//! and has the spectrum of `L`. On uniform grids `S = L` entry by entry.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::sync::Arc;

use faer::Mat;

use crate::geometry::Grid;
use crate::specfun::{form_constant, validate_dims, ModelParams};
use crate::{quad, Error, Execution, Result};

/// Chebyshev lattice radius inside which 2D cell integrals are exact.
pub const NEAR_RADIUS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `L₀`
    Free,
    /// `L_V = L₀ − V`
    Schrodinger,
    /// kernel of `L₀^{−1}`
    Green,
    /// kernel of `L_V^{−1}`
    GreenSchrodinger,
}

impl OperatorKind {
    pub fn is_green(self) -> bool {
        matches!(self, OperatorKind::Green | OperatorKind::GreenSchrodinger)
    }
}

/// A dense symmetric matrix attached to a grid.
///
/// For `Free` and `Schrodinger` the entries are the half-density operator
/// `S`; for the Green kinds they are kernel values `G(x_i, x_j)` so that
/// `(K f)_i = Σ_j G_ij f_j m_j`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    pub entries: Mat<f64>,
}

impl OperatorMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Apply the operator (or the integral operator of a Green kernel) to a
    /// grid function.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n();
        assert_eq!(f.len(), n);
        let m = &self.grid.cell_measure;
        let input: Vec<f64> = if self.kind.is_green() {
            f.iter().zip(m).map(|(v, w)| v * w).collect()
        } else {
            f.iter().zip(m).map(|(v, w)| v * w.sqrt()).collect()
        };
        let mut out = vec![0.0; n];
        for j in 0..n {
            let x = input[j];
            if x == 0.0 {
                continue;
            }
            let col = self.entries.col(j);
            for (o, a) in out.iter_mut().zip(col.iter()) {
                *o += a * x;
            }
        }
        if !self.kind.is_green() {
            out.iter_mut().zip(m).for_each(|(o, w)| *o /= w.sqrt());
        }
        out
    }

    /// `‖A − Aᵀ‖_max / ‖A‖_max`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                num = num.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
                den = den.max(self.entries[(i, j)].abs());
            }
        }
        num / den
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Binary dump: 32-byte little-endian header
    /// (`b"FHLM"`, `d: u32`, `n: u64`, `α: f64`, `c: f64`) followed by the
    /// entries in row-major order as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n();
        let mut header = Vec::with_capacity(32);
        header.extend_from_slice(b"FHLM");
        header.extend_from_slice(&(self.params.d as u32).to_le_bytes());
        header.extend_from_slice(&(n as u64).to_le_bytes());
        header.extend_from_slice(&self.params.alpha.to_le_bytes());
        header.extend_from_slice(&self.params.c.to_le_bytes());
        out.write_all(&header)?;
        let mut row = Vec::with_capacity(8 * n);
        for i in 0..n {
            row.clear();
            for j in 0..n {
                row.extend_from_slice(&self.entries[(i, j)].to_le_bytes());
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

/// Header and payload of a binary matrix dump.
#[derive(Debug, Clone)]
pub struct MatrixDump {
    pub d: u32,
    pub alpha: f64,
    pub c: f64,
    pub entries: Mat<f64>,
}

pub fn read_binary<R: Read>(mut input: R) -> Result<MatrixDump> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..4] != b"FHLM" {
        return Err(Error::Io("bad magic, expected FHLM".into()));
    }
    let d = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let alpha = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let c = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let mut buf = vec![0u8; 8 * n * n];
    input.read_exact(&mut buf)?;
    let entries = Mat::from_fn(n, n, |i, j| {
        let k = 8 * (i * n + j);
        f64::from_le_bytes(buf[k..k + 8].try_into().unwrap())
    });
    Ok(MatrixDump { d, alpha, c, entries })
}

/// `κ(x_i) = 𝒜 ∫_{Ω^c} |x_i − y|^{−d−α} dy` at every node.
pub fn killing_term(grid: &Grid, alpha: f64) -> Result<Vec<f64>> {
    killing_term_with(grid, alpha, Execution::default())
}

pub fn killing_term_with(grid: &Grid, alpha: f64, exec: Execution) -> Result<Vec<f64>> {
    validate_dims(grid.dim(), alpha)?;
    let a = form_constant(grid.dim(), alpha)?;
    if grid.dist_boundary.iter().any(|&d| d <= 0.0) {
        return Err(Error::domain("grid node on or outside the boundary"));
    }
    let spec = grid.spec;
    Ok(exec.map(grid.len(), |i| {
        let x = grid.nodes[i];
        match spec {
            crate::DomainSpec::Interval { a: lo, b: hi } => {
                a / alpha * ((x[0] - lo).powf(-alpha) + (hi - x[0]).powf(-alpha))
            }
            _ => {
                // polar coordinates about x: ∫_ρ(θ)^∞ r^{−1−α} dr = ρ(θ)^{−α}/α
                let breaks = angular_breaks(grid, x);
                a / alpha
                    * quad::adaptive_with_breaks(
                        |t| spec.exit_distance(x, t).powf(-alpha),
                        &breaks,
                        0.0,
                        1e-12,
                    )
            }
        }
    }))
}

/// Breakpoints on `[θ₀, θ₀ + 2π]` for angular integrals about `x`: kinks of
/// the exit distance and, on disks, a geometric cluster around the normal
/// direction.
pub(crate) fn angular_breaks(grid: &Grid, x: [f64; 2]) -> Vec<f64> {
    let mut b: Vec<f64> = match grid.spec {
        crate::DomainSpec::Disk { r } => {
            let t0 = x[1].atan2(x[0]);
            let delta = (r - x[0].hypot(x[1])).max(1e-300) / r;
            let mut v = vec![t0, t0 + PI, t0 + TAU];
            let mut s = delta;
            while s < 1.0 {
                v.push(t0 + s);
                v.push(t0 + TAU - s);
                s *= 4.0;
            }
            v
        }
        _ => {
            let k = grid.spec.exit_kinks(x);
            let mut v = vec![0.0, TAU];
            v.extend(k);
            v
        }
    };
    b.sort_by(f64::total_cmp);
    b.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
    b
}

/// Hardy potential `V_i = c |x_i|^{−α}`.
pub fn hardy_diagonal(grid: &Grid, alpha: f64, c: f64) -> Result<Vec<f64>> {
    validate_dims(grid.dim(), alpha)?;
    if !c.is_finite() || c < 0.0 {
        return Err(Error::domain(format!("coupling c = {c} must be nonnegative")));
    }
    Ok(grid.dist_origin.iter().map(|&r| c * r.powf(-alpha)).collect())
}

/// Cell integrals `∫_{cell j} |x_i − y|^{−d−α} dy` for the pair structure of a
/// grid, together with the self-cell coupling constant.
pub(crate) struct JumpKernel<'g> {
    grid: &'g Grid,
    alpha: f64,
    /// 2D: `∫` over the unit cell at lattice offset, indexed by
    /// `(|di|, |dj|)`, scaled by `h^{−α}`.
    near_table: Vec<f64>,
    /// Sample points of cut cells, keyed by node index.
    cut_samples: Vec<Option<Vec<[f64; 2]>>>,
    /// Sample points of rim fragments.
    fragment_samples: Vec<Vec<[f64; 2]>>,
    /// Extra nearest-neighbour coupling replacing the self-cell principal value.
    pub self_coupling: f64,
}

impl<'g> JumpKernel<'g> {
    pub fn new(grid: &'g Grid, alpha: f64, exec: Execution) -> Self {
        let h = grid.h;
        let d = grid.dim();
        let (near_table, self_coupling) = if d == 1 {
            (Vec::new(), (0.5 * h).powf(2.0 - alpha) / ((2.0 - alpha) * h * h))
        } else {
            let side = (NEAR_RADIUS + 1) as usize;
            let table = exec.map(side * side, |k| {
                let (di, dj) = ((k / side) as f64, (k % side) as f64);
                if di == 0.0 && dj == 0.0 {
                    0.0
                } else {
                    unit_cell_kernel_integral(di, dj, alpha) * h.powf(-alpha)
                }
            });
            // ∫_{[−1,1]²} |s|^{−α} ds = 8/(2−α) ∫_0^{π/4} cos^{α−2}θ dθ
            let i_alpha = 8.0 / (2.0 - alpha)
                * quad::adaptive(|t: f64| t.cos().powf(alpha - 2.0), 0.0, PI / 4.0, 0.0, 1e-14, 30).0;
            (table, (0.5 * h).powf(2.0 - alpha) * i_alpha / (4.0 * h * h))
        };
        let cut_samples = (0..grid.len())
            .map(|i| (!grid.full_cell[i]).then(|| grid.cell_samples(grid.lattice[i])))
            .collect();
        let fragment_samples = grid
            .rim_fragments
            .iter()
            .map(|f| grid.cell_samples(f.lattice))
            .collect();
        Self { grid, alpha, near_table, cut_samples, fragment_samples, self_coupling }
    }

    fn kernel(&self, dx: f64, dy: f64) -> f64 {
        (dx * dx + dy * dy).powf(-0.5 * (2.0 + self.alpha))
    }

    fn samples_integral(&self, x: [f64; 2], samples: &[[f64; 2]]) -> f64 {
        let hs = self.grid.h / crate::geometry::CUT_CELL_SUBSAMPLES as f64;
        samples.iter().map(|p| self.kernel(p[0] - x[0], p[1] - x[1])).sum::<f64>() * hs * hs
    }

    /// `∫_{cell j} |x_i − y|^{−d−α} dy` for `i ≠ j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let g = self.grid;
        let h = g.h;
        if g.dim() == 1 {
            let dist = (g.nodes[j][0] - g.nodes[i][0]).abs();
            let a = self.alpha;
            return ((dist - 0.5 * h).powf(-a) - (dist + 0.5 * h).powf(-a)) / a;
        }
        let di = (g.lattice[j][0] - g.lattice[i][0]).abs();
        let dj = (g.lattice[j][1] - g.lattice[i][1]).abs();
        let near = di.max(dj) <= NEAR_RADIUS;
        match (&self.cut_samples[j], near) {
            (None, true) => self.near_table[(di * (NEAR_RADIUS + 1) + dj) as usize],
            (Some(samples), true) => self.samples_integral(g.nodes[i], samples),
            (_, false) => {
                let (xi, xj) = (g.nodes[i], g.nodes[j]);
                g.cell_measure[j] * self.kernel(xj[0] - xi[0], xj[1] - xi[1])
            }
        }
    }

    /// Kernel mass of all rim fragments seen from node `i`.
    pub fn fragment_mass(&self, i: usize) -> f64 {
        self.fragment_mass_weighted(i, |_| 1.0)
    }

    /// `Σ_fragments ∫ u(y) |x_i − y|^{−d−α} dy`.
    pub fn fragment_mass_weighted(&self, i: usize, u: impl Fn([f64; 2]) -> f64) -> f64 {
        let g = self.grid;
        let x = g.nodes[i];
        let hs = g.h / crate::geometry::CUT_CELL_SUBSAMPLES as f64;
        g.rim_fragments
            .iter()
            .zip(&self.fragment_samples)
            .map(|(f, samples)| {
                let di = (f.lattice[0] - g.lattice[i][0]).abs();
                let dj = (f.lattice[1] - g.lattice[i][1]).abs();
                if di.max(dj) <= NEAR_RADIUS {
                    samples
                        .iter()
                        .map(|p| u(*p) * self.kernel(p[0] - x[0], p[1] - x[1]))
                        .sum::<f64>()
                        * hs
                        * hs
                } else {
                    f.area * u(f.centroid) * self.kernel(f.centroid[0] - x[0], f.centroid[1] - x[1])
                }
            })
            .sum()
    }

    /// Whether `i` and `j` are lattice nearest neighbours.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let g = self.grid;
        let di = (g.lattice[j][0] - g.lattice[i][0]).abs();
        let dj = (g.lattice[j][1] - g.lattice[i][1]).abs();
        di + dj == 1
    }
}

/// `∫_{[di−½, di+½]×[dj−½, dj+½]} |y|^{−2−α} dy` for a lattice offset ≠ 0.
fn unit_cell_kernel_integral(di: f64, dj: f64, alpha: f64) -> f64 {
    let p = -0.5 * (2.0 + alpha);
    quad::adaptive(
        |x| quad::adaptive(|y| (x * x + y * y).powf(p), dj - 0.5, dj + 0.5, 0.0, 1e-14, 30).0,
        di - 0.5,
        di + 0.5,
        0.0,
        1e-13,
        30,
    )
    .0
}

/// Symmetric pair weights `J_ij` (stiffness scaling: `m_i ∫_{cell j} k`,
/// symmetrised) and per-node exterior-like mass from rim fragments. The
/// returned vector is row-major `n × n` with zero diagonal.
pub(crate) fn pair_weights(
    grid: &Grid,
    kernel: &JumpKernel<'_>,
    weight_of: impl Fn(usize, usize) -> f64 + Sync + Send,
    exec: Execution,
) -> Vec<f64> {
    let n = grid.len();
    let mut pairs = vec![0.0; n * n];
    let m = &grid.cell_measure;
    exec.for_each_chunk(&mut pairs, n, |i, row| {
        for (j, slot) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let mut w = kernel.weight(i, j);
            if kernel.adjacent(i, j) {
                w += kernel.self_coupling;
            }
            *slot = m[i] * w * weight_of(i, j);
        }
    });
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (pairs[i * n + j] + pairs[j * n + i]);
            pairs[i * n + j] = s;
            pairs[j * n + i] = s;
        }
    }
    pairs
}

/// Assemble `L₀` on `grid`.
pub fn assemble_free(grid: Arc<Grid>, alpha: f64) -> Result<OperatorMatrix> {
    assemble_free_with(grid, alpha, Execution::default())
}

pub fn assemble_free_with(grid: Arc<Grid>, alpha: f64, exec: Execution) -> Result<OperatorMatrix> {
    let params = ModelParams::new(grid.dim(), alpha, 0.0)?;
    let a = form_constant(grid.dim(), alpha)?;
    let kappa = killing_term_with(&grid, alpha, exec)?;
    let kernel = JumpKernel::new(&grid, alpha, exec);
    let pairs = pair_weights(&grid, &kernel, |_, _| 1.0, exec);
    let fragments: Vec<f64> = exec.map(grid.len(), |i| kernel.fragment_mass(i));
    let n = grid.len();
    let m = &grid.cell_measure;
    // A = 𝒜·(graph Laplacian of J) + diag(m κ̃); S = M^{−1/2} A M^{−1/2}
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let row: f64 = pairs[i * n..(i + 1) * n].iter().sum();
            (a * row) / m[i] + kappa[i] + a * fragments[i]
        })
        .collect();
    let sqrt_m: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else {
            -a * pairs[i * n + j] / (sqrt_m[i] * sqrt_m[j])
        }
    });
    let op = OperatorMatrix { kind: OperatorKind::Free, params, grid, entries };
    certify_positive_definite(&op)?;
    Ok(op)
}

/// Diagonal dominance certificate in the stiffness scaling; falls back to a
/// Cholesky attempt and, on failure, reports the smallest eigenvalue.
pub(crate) fn certify_positive_definite(op: &OperatorMatrix) -> Result<()> {
    let n = op.n();
    let sqrt_m: Vec<f64> = op.grid.cell_measure.iter().map(|v| v.sqrt()).collect();
    let dominant = (0..n).all(|i| {
        let col = op.entries.col(i);
        let mut off = 0.0;
        for (j, &v) in col.iter().enumerate() {
            if j != i {
                if v > 0.0 {
                    return false;
                }
                off -= v * sqrt_m[j];
            }
        }
        col[i] * sqrt_m[i] > off
    });
    if dominant {
        return Ok(());
    }
    if op.entries.llt(faer::Side::Lower).is_ok() {
        return Ok(());
    }
    let smallest = op
        .entries
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?[0];
    Err(Error::Assembly { smallest })
}

/// `L_V = L₀ − diag(V)`.
pub fn assemble_schrodinger(l0: &OperatorMatrix, v: &[f64]) -> Result<OperatorMatrix> {
    if l0.kind != OperatorKind::Free {
        return Err(Error::shape("assemble_schrodinger expects the free operator"));
    }
    if v.len() != l0.n() {
        return Err(Error::shape(format!("potential has {} entries, operator is {}×{}", v.len(), l0.n(), l0.n())));
    }
    let mut entries = l0.entries.clone();
    for (i, &vi) in v.iter().enumerate() {
        entries[(i, i)] -= vi;
    }
    let c = v
        .iter()
        .zip(&l0.grid.dist_origin)
        .map(|(vi, r)| vi * r.powf(l0.params.alpha))
        .fold(0.0, f64::max);
    let params = ModelParams { c, ..l0.params };
    Ok(OperatorMatrix { kind: OperatorKind::Schrodinger, params, grid: l0.grid.clone(), entries })
}

/// `L_V` for the Hardy potential with coupling `params.c`.
pub fn assemble_hardy(l0: &OperatorMatrix, c: f64) -> Result<OperatorMatrix> {
    let params = ModelParams::new(l0.params.d, l0.params.alpha, c)?;
    let v = hardy_diagonal(&l0.grid, params.alpha, params.c)?;
    let mut op = assemble_schrodinger(l0, &v)?;
    op.params = params;
    Ok(op)
}

/// Largest condition number accepted by [`green_matrix`].
pub const MAX_CONDITION: f64 = 1e13;

/// Green kernel `G = M^{−1/2} S^{−1} M^{−1/2}` of a positive definite operator.
pub fn green_matrix(l: &OperatorMatrix) -> Result<OperatorMatrix> {
    let kind = match l.kind {
        OperatorKind::Free => OperatorKind::Green,
        OperatorKind::Schrodinger => OperatorKind::GreenSchrodinger,
        _ => return Err(Error::shape("green_matrix expects an operator, not a Green kernel")),
    };
    let n = l.n();
    let norm1 = |m: &Mat<f64>| {
        (0..n)
            .map(|j| m.col(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let llt = match l.entries.llt(faer::Side::Lower) {
        Ok(llt) => llt,
        Err(_) => {
            let eig = l
                .entries
                .self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            let condition = if eig[0] <= 0.0 { f64::INFINITY } else { eig[n - 1] / eig[0] };
            return Err(Error::Conditioning { condition });
        }
    };
    use faer::linalg::solvers::DenseSolveCore;
    let inv = llt.inverse();
    let condition = norm1(&l.entries) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Conditioning { condition });
    }
    let isq: Vec<f64> = l.grid.cell_measure.iter().map(|v| 1.0 / v.sqrt()).collect();
    let entries = Mat::from_fn(n, n, |i, j| {
        0.5 * (inv[(i, j)] + inv[(j, i)]) * isq[i] * isq[j]
    });
    Ok(OperatorMatrix { kind, params: l.params, grid: l.grid.clone(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::specfun::hardy_best_constant;

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), n).unwrap())
    }

    #[test]
    fn killing_closed_form_1d() {
        let g = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 4).unwrap();
        let k = killing_term(&g, 0.5).unwrap();
        let a = form_constant(1, 0.5).unwrap();
        let want = |x: f64| a / 0.5 * ((x + 1.0).powf(-0.5) + (1.0 - x).powf(-0.5));
        for (x, v) in g.nodes.iter().zip(&k) {
            assert!((v - want(x[0])).abs() < 1e-14);
        }
        // value at the centre of (−1, 1)
        assert!((a / 0.5 * 2.0 - 0.797_884_560_802_865_4).abs() < 1e-12);
        // blows up like dist^{−α} at the boundary
        let fine = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 1024).unwrap();
        let kf = killing_term(&fine, 0.5).unwrap();
        let ratio = kf[0] * fine.dist_boundary[0].powf(0.5);
        assert!((ratio - a / 0.5).abs() / (a / 0.5) < 0.05);
    }

    #[test]
    fn killing_disk_centre_is_one() {
        // κ(0) on the unit disk, α = 1: (1/2π)·2π·∫_1^∞ r^{−2} dr = 1. Use a
        // node-free check through the polar integral itself.
        let g = Grid::build(DomainSpec::disk(1.0).unwrap(), 16).unwrap();
        let a = form_constant(2, 1.0).unwrap();
        let x = [0.0, 0.0];
        let v = a / 1.0
            * quad::adaptive_with_breaks(|t| g.spec.exit_distance(x, t).powf(-1.0), &[0.0, TAU], 0.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-12);
        // nodes nearest the centre sit at |x| = h/√2; κ is smooth there
        let k = killing_term(&g, 1.0).unwrap();
        let i = (0..g.len()).min_by(|&p, &q| g.dist_origin[p].total_cmp(&g.dist_origin[q])).unwrap();
        let r = g.dist_origin[i];
        // ρ(θ)ρ(θ+π) = 1 − r² on the unit circle, so for α = 1
        // κ = (1/2π)∫ρ dθ/(1 − r²) = 4E(r)/(2π(1 − r²)), E the complete
        // elliptic integral of the second kind (power series in r²).
        let mut e = 0.0;
        let mut coef: f64 = 1.0;
        for k in 0..40 {
            let kf = k as f64;
            if k > 0 {
                coef *= (2.0 * kf - 1.0) / (2.0 * kf);
            }
            e += coef * coef * r.powi(2 * k) / (1.0 - 2.0 * kf);
        }
        e *= PI / 2.0;
        let want = 4.0 * e / (TAU * (1.0 - r * r));
        assert!((k[i] - want).abs() < 1e-10, "{} vs {}", k[i], want);
    }

    #[test]
    fn killing_decreases_with_domain() {
        let small = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 16).unwrap();
        let big = Grid::build(DomainSpec::interval(-2.0, 2.0).unwrap(), 32).unwrap();
        let ks = killing_term(&small, 0.5).unwrap();
        let kb = killing_term(&big, 0.5).unwrap();
        // node x lives in both grids: big grid nodes 8..24 are the small grid nodes
        for i in 0..16 {
            assert!((big.nodes[i + 8][0] - small.nodes[i][0]).abs() < 1e-14);
            assert!(kb[i + 8] < ks[i]);
        }
    }

    #[test]
    fn free_operator_on_constants_is_killing() {
        let g = interval(256);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let k = killing_term(&g, 0.5).unwrap();
        let y = l0.apply(&vec![1.0; g.len()]);
        for (a, b) in y.iter().zip(&k) {
            assert!((a - b).abs() < 1e-8 * b.max(1.0), "{a} vs {b}");
        }
        assert!(l0.asymmetry() <= 1e-12);
        // off-diagonals are nonpositive
        for j in 0..g.len() {
            for i in 0..g.len() {
                if i != j {
                    assert!(l0.entries[(i, j)] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn schrodinger_is_free_minus_diagonal() {
        let g = interval(64);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let zero = assemble_schrodinger(&l0, &vec![0.0; 64]).unwrap();
        assert_eq!(zero.entries, l0.entries);
        let v = hardy_diagonal(&g, 0.5, 0.07).unwrap();
        let lv = assemble_schrodinger(&l0, &v).unwrap();
        for i in 0..64 {
            assert_eq!(lv.entries[(i, i)], l0.entries[(i, i)] - v[i]);
        }
        assert!(assemble_schrodinger(&l0, &[1.0; 3]).is_err());
    }

    #[test]
    fn hardy_diagonal_values() {
        let g = interval(8);
        assert!(hardy_diagonal(&g, 0.5, 0.0).unwrap().iter().all(|&v| v == 0.0));
        let g2 = Grid::build(DomainSpec::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap(), 8).unwrap();
        let v = hardy_diagonal(&g2, 1.0, 0.2).unwrap();
        for (vi, r) in v.iter().zip(&g2.dist_origin) {
            assert!((vi - 0.2 / r).abs() < 1e-15);
        }
        let cs = hardy_best_constant(2, 1.0).unwrap();
        assert!((cs * 0.25f64.powf(-1.0) - 0.913_893_162_088_927_3).abs() < 1e-9);
    }

    #[test]
    fn green_inverts_and_is_positive() {
        let g = interval(256);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let k = green_matrix(&l0).unwrap();
        let n = g.len();
        // K·L₀ = I on grid functions: check on unit vectors
        let mut worst: f64 = 0.0;
        for j in (0..n).step_by(17) {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let back = k.apply(&l0.apply(&e));
            for (i, v) in back.iter().enumerate() {
                worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
        let min = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| k.entries[(i, j)]).fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);

        let lv = assemble_hardy(&l0, 0.5 * hardy_best_constant(1, 0.5).unwrap()).unwrap();
        let kv = green_matrix(&lv).unwrap();
        for j in 0..n {
            for i in 0..n {
                assert!(kv.entries[(i, j)] >= k.entries[(i, j)]);
            }
        }
    }

    #[test]
    fn green_rejects_indefinite() {
        let g = interval(32);
        let l0 = assemble_free(g.clone(), 0.5).unwrap();
        let v = vec![1e3; 32];
        let bad = assemble_schrodinger(&l0, &v).unwrap();
        assert!(matches!(green_matrix(&bad), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn binary_dump_round_trip() {
        let g = interval(16);
        let l0 = assemble_free(g, 0.5).unwrap();
        let mut buf = Vec::new();
        l0.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 8 * 16 * 16);
        assert_eq!(&buf[..4], b"FHLM");
        let back = read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.d, 1);
        assert_eq!(back.alpha, 0.5);
        assert_eq!(back.entries, l0.entries);
    }

    #[test]
    fn parallel_and_sequential_assembly_agree_bitwise() {
        for spec in [DomainSpec::interval(-1.0, 1.0).unwrap(), DomainSpec::disk(1.0).unwrap()] {
            let g = Arc::new(Grid::build(spec, 16).unwrap());
            let a = assemble_free_with(g.clone(), 0.75, Execution::Sequential).unwrap();
            let b = assemble_free_with(g, 0.75, Execution::Parallel).unwrap();
            assert_eq!(a.entries, b.entries);
        }
    }

    #[test]
    fn two_dimensional_assembly_is_symmetric_and_dominant() {
        for spec in [DomainSpec::rectangle(-1.0, 1.0, -1.0, 1.0).unwrap(), DomainSpec::disk(1.0).unwrap()] {
            let g = Arc::new(Grid::build(spec, 16).unwrap());
            let l0 = assemble_free(g.clone(), 1.0).unwrap();
            assert!(l0.asymmetry() <= 1e-12);
            let k = killing_term(&g, 1.0).unwrap();
            let y = l0.apply(&vec![1.0; g.len()]);
            for (a, b) in y.iter().zip(&k) {
                assert!(*a >= b - 1e-9 * b.abs());
            }
        }
    }
}
