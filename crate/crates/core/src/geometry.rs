//! Bounded domains containing the origin and their cell-centred grids.
//!
//! Grids are uniform with the origin on a cell edge (or corner), so no node
//! ever sits on the origin and `|x_i| ≥ h/2` on intervals and rectangles.
//! Disks are cut out of a square lattice: a cell becomes a node when its
//! centre lies inside the disk and carries the area of its intersection
//! with the disk; rim cells whose centre falls outside are kept aside as
//! [`RimFragment`]s, which the assembly treats as exterior.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Execution, Result};

/// Sub-cell resolution used to measure cut cells.
pub const CUT_CELL_SUBSAMPLES: usize = 32;

/// Default ceiling on the memory of one dense `n × n` operator.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
    Disk { r: f64 },
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::Interval { a, b }.validated()
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64) -> Result<Self> {
        Self::Rectangle { ax, bx, ay, by }.validated()
    }

    pub fn disk(r: f64) -> Result<Self> {
        Self::Disk { r }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = match self {
            DomainSpec::Interval { a, b } => a.is_finite() && b.is_finite() && a < 0.0 && 0.0 < b,
            DomainSpec::Rectangle { ax, bx, ay, by } => {
                [ax, bx, ay, by].iter().all(|v| v.is_finite())
                    && ax < 0.0
                    && 0.0 < bx
                    && ay < 0.0
                    && 0.0 < by
            }
            DomainSpec::Disk { r } => r.is_finite() && r > 0.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::domain(format!("{self} does not contain the origin in its interior")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Rectangle { ax, bx, ay, by } => (bx - ax) * (by - ay),
            DomainSpec::Disk { r } => std::f64::consts::PI * r * r,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => b - a,
            DomainSpec::Rectangle { ax, bx, ay, by } => (bx - ax).hypot(by - ay),
            DomainSpec::Disk { r } => 2.0 * r,
        }
    }

    /// Open-set membership.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match *self {
            DomainSpec::Interval { a, b } => a < x[0] && x[0] < b,
            DomainSpec::Rectangle { ax, bx, ay, by } => ax < x[0] && x[0] < bx && ay < x[1] && x[1] < by,
            DomainSpec::Disk { r } => x[0].hypot(x[1]) < r,
        }
    }

    /// Euclidean distance to the boundary for a point inside the domain.
    pub fn dist_boundary(&self, x: [f64; 2]) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => (x[0] - a).min(b - x[0]),
            DomainSpec::Rectangle { ax, bx, ay, by } => {
                (x[0] - ax).min(bx - x[0]).min(x[1] - ay).min(by - x[1])
            }
            DomainSpec::Disk { r } => r - x[0].hypot(x[1]),
        }
    }

    /// Distance from `x` to the boundary along the unit direction `(cos θ, sin θ)`.
    pub fn exit_distance(&self, x: [f64; 2], theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        match *self {
            DomainSpec::Interval { a, b } => {
                if c > 0.0 {
                    b - x[0]
                } else {
                    x[0] - a
                }
            }
            DomainSpec::Rectangle { ax, bx, ay, by } => {
                let tx = if c > 0.0 {
                    (bx - x[0]) / c
                } else if c < 0.0 {
                    (ax - x[0]) / c
                } else {
                    f64::INFINITY
                };
                let ty = if s > 0.0 {
                    (by - x[1]) / s
                } else if s < 0.0 {
                    (ay - x[1]) / s
                } else {
                    f64::INFINITY
                };
                tx.min(ty)
            }
            DomainSpec::Disk { r } => {
                let p = x[0] * c + x[1] * s;
                let q = r * r - x[0] * x[0] - x[1] * x[1];
                let disc = (p * p + q).sqrt();
                // ρ = −p + √(p² + q), written to avoid cancellation
                if p > 0.0 {
                    q / (p + disc)
                } else {
                    disc - p
                }
            }
        }
    }

    /// Directions (in `[0, 2π)`) at which `exit_distance` has a kink.
    pub fn exit_kinks(&self, x: [f64; 2]) -> Vec<f64> {
        match *self {
            DomainSpec::Rectangle { ax, bx, ay, by } => {
                let mut v: Vec<f64> = [(bx, by), (ax, by), (ax, ay), (bx, ay)]
                    .iter()
                    .map(|&(cx, cy)| (cy - x[1]).atan2(cx - x[0]).rem_euclid(std::f64::consts::TAU))
                    .collect();
                v.sort_by(f64::total_cmp);
                v
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DomainSpec::Interval { a, b } => write!(f, "interval:{a},{b}"),
            DomainSpec::Rectangle { ax, bx, ay, by } => write!(f, "rect:{ax},{bx},{ay},{by}"),
            DomainSpec::Disk { r } => write!(f, "disk:{r}"),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    /// Parses `interval:a,b`, `rect:ax,bx,ay,by` or `disk:R`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("malformed domain '{s}'")))?;
        let vals: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::domain(format!("malformed domain '{s}': {e}")))?;
        match (kind.trim(), vals.as_slice()) {
            ("interval", &[a, b]) => Self::interval(a, b),
            ("rect" | "rectangle", &[ax, bx, ay, by]) => Self::rectangle(ax, bx, ay, by),
            ("disk", &[r]) => Self::disk(r),
            _ => Err(Error::domain(format!("malformed domain '{s}'"))),
        }
    }
}

/// A rim cell of a disk grid whose centre lies outside the disk but which
/// still overlaps it.
#[derive(Debug, Clone, PartialEq)]
pub struct RimFragment {
    pub lattice: [i64; 2],
    pub area: f64,
    pub centroid: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: DomainSpec,
    pub n_per_axis: usize,
    pub h: f64,
    pub nodes: Vec<[f64; 2]>,
    /// Integer lattice coordinates of each node; node `i` sits at
    /// `origin_cell + (lattice + ½) h` per axis.
    pub lattice: Vec<[i64; 2]>,
    pub cell_measure: Vec<f64>,
    pub dist_boundary: Vec<f64>,
    pub dist_origin: Vec<f64>,
    /// `true` for cells entirely inside the domain.
    pub full_cell: Vec<bool>,
    pub rim_fragments: Vec<RimFragment>,
    lattice_origin: [f64; 2],
}

fn integral_count(len: f64, h: f64, what: &str) -> Result<i64> {
    let k = len / h;
    let r = k.round();
    if (k - r).abs() > 1e-9 * k.abs().max(1.0) {
        return Err(Error::domain(format!(
            "{what} = {len} is not a whole number of cells of width {h}; \
             the origin must fall on a cell edge"
        )));
    }
    Ok(r as i64)
}

impl Grid {
    /// Uniform cell-centred grid with `n_per_axis` cells across the first axis.
    pub fn build(spec: DomainSpec, n_per_axis: usize) -> Result<Self> {
        Self::build_with(spec, n_per_axis, Execution::default())
    }

    pub fn build_with(spec: DomainSpec, n_per_axis: usize, exec: Execution) -> Result<Self> {
        let spec = spec.validated()?;
        if n_per_axis < 4 {
            return Err(Error::domain(format!("n_per_axis = {n_per_axis} < 4")));
        }
        match spec {
            DomainSpec::Interval { a, b } => {
                let h = (b - a) / n_per_axis as f64;
                integral_count(-a, h, "left extent")?;
                let nodes: Vec<[f64; 2]> =
                    (0..n_per_axis).map(|i| [a + (i as f64 + 0.5) * h, 0.0]).collect();
                let lattice = (0..n_per_axis as i64).map(|i| [i, 0]).collect();
                Ok(Self::finish(spec, n_per_axis, h, nodes, lattice, vec![h; n_per_axis], [a, 0.0], vec![]))
            }
            DomainSpec::Rectangle { ax, bx, ay, by } => {
                let h = (bx - ax) / n_per_axis as f64;
                integral_count(-ax, h, "left extent")?;
                integral_count(-ay, h, "lower extent")?;
                let ny = integral_count(by - ay, h, "height")? as usize;
                let mut nodes = Vec::with_capacity(n_per_axis * ny);
                let mut lattice = Vec::with_capacity(n_per_axis * ny);
                for j in 0..ny {
                    for i in 0..n_per_axis {
                        nodes.push([ax + (i as f64 + 0.5) * h, ay + (j as f64 + 0.5) * h]);
                        lattice.push([i as i64, j as i64]);
                    }
                }
                let m = vec![h * h; nodes.len()];
                Ok(Self::finish(spec, n_per_axis, h, nodes, lattice, m, [ax, ay], vec![]))
            }
            DomainSpec::Disk { r } => {
                if !n_per_axis.is_multiple_of(2) {
                    return Err(Error::domain("disk grids need an even n_per_axis"));
                }
                let h = 2.0 * r / n_per_axis as f64;
                let n = n_per_axis as i64;
                let cells: Vec<(i64, i64)> =
                    (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
                let measured = exec.map(cells.len(), |k| {
                    let (i, j) = cells[k];
                    let c = [-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h];
                    let (area, centroid, full) = measure_disk_cell(r, c, h);
                    (c, area, centroid, full)
                });
                let mut nodes = Vec::new();
                let mut lattice = Vec::new();
                let mut measure = Vec::new();
                let mut fragments = Vec::new();
                for (&(i, j), &(c, area, centroid, _)) in cells.iter().zip(&measured) {
                    if area <= 0.0 {
                        continue;
                    }
                    if c[0].hypot(c[1]) < r {
                        nodes.push(c);
                        lattice.push([i, j]);
                        measure.push(area);
                    } else {
                        fragments.push(RimFragment { lattice: [i, j], area, centroid });
                    }
                }
                Ok(Self::finish(spec, n_per_axis, h, nodes, lattice, measure, [-r, -r], fragments))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        spec: DomainSpec,
        n_per_axis: usize,
        h: f64,
        nodes: Vec<[f64; 2]>,
        lattice: Vec<[i64; 2]>,
        cell_measure: Vec<f64>,
        lattice_origin: [f64; 2],
        rim_fragments: Vec<RimFragment>,
    ) -> Self {
        let full_cell = match spec.dim() {
            1 => vec![true; nodes.len()],
            _ => cell_measure.iter().map(|&m| m == h * h).collect(),
        };
        Self {
            dist_boundary: nodes.iter().map(|&x| spec.dist_boundary(x)).collect(),
            dist_origin: nodes.iter().map(|x| x[0].hypot(x[1])).collect(),
            spec,
            n_per_axis,
            h,
            nodes,
            lattice,
            cell_measure,
            full_cell,
            rim_fragments,
            lattice_origin,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn total_measure(&self) -> f64 {
        self.cell_measure.iter().sum()
    }

    /// Lower-left corner of lattice cell `(i, j)`.
    pub fn cell_corner(&self, lattice: [i64; 2]) -> [f64; 2] {
        [
            self.lattice_origin[0] + lattice[0] as f64 * self.h,
            self.lattice_origin[1] + lattice[1] as f64 * self.h,
        ]
    }

    /// Sub-cell midpoints of lattice cell `lattice` lying inside the domain,
    /// each carrying weight `(h/CUT_CELL_SUBSAMPLES)^2`.
    pub fn cell_samples(&self, lattice: [i64; 2]) -> Vec<[f64; 2]> {
        let corner = self.cell_corner(lattice);
        let s = CUT_CELL_SUBSAMPLES;
        let hs = self.h / s as f64;
        let mut out = Vec::new();
        for b in 0..s {
            for a in 0..s {
                let p = [corner[0] + (a as f64 + 0.5) * hs, corner[1] + (b as f64 + 0.5) * hs];
                if self.spec.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Same domain at twice the resolution.
    pub fn refine(&self) -> Result<Self> {
        self.refine_within(DEFAULT_MEMORY_BUDGET)
    }

    /// Refine, refusing when a dense operator on the child grid would need
    /// more than `budget_bytes`.
    pub fn refine_within(&self, budget_bytes: usize) -> Result<Self> {
        let n = 2 * self.n_per_axis;
        let estimate = match self.dim() {
            1 => n,
            _ => ((self.len() as f64) * 4.0).ceil() as usize,
        };
        let bytes = estimate.saturating_mul(estimate).saturating_mul(8);
        if bytes > budget_bytes {
            return Err(Error::Resource(format!(
                "refining to n_per_axis = {n} needs ~{bytes} bytes per dense operator (budget {budget_bytes})"
            )));
        }
        Self::build(self.spec, n)
    }

    /// CSV dump: `x1[,x2],cell_measure,dist_boundary,dist_origin`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.dim() == 1 {
            writeln!(out, "x1,cell_measure,dist_boundary,dist_origin")?;
        } else {
            writeln!(out, "x1,x2,cell_measure,dist_boundary,dist_origin")?;
        }
        for i in 0..self.len() {
            let x = self.nodes[i];
            if self.dim() == 1 {
                write!(out, "{:e}", x[0])?;
            } else {
                write!(out, "{:e},{:e}", x[0], x[1])?;
            }
            writeln!(
                out,
                ",{:e},{:e},{:e}",
                self.cell_measure[i], self.dist_boundary[i], self.dist_origin[i]
            )?;
        }
        Ok(())
    }
}

fn measure_disk_cell(r: f64, c: [f64; 2], h: f64) -> (f64, [f64; 2], bool) {
    let half = 0.5 * h;
    let far = (c[0].abs() + half).hypot(c[1].abs() + half);
    if far < r {
        return (h * h, c, true);
    }
    let near_x = (c[0].abs() - half).max(0.0);
    let near_y = (c[1].abs() - half).max(0.0);
    if near_x.hypot(near_y) >= r {
        return (0.0, c, false);
    }
    let s = CUT_CELL_SUBSAMPLES;
    let hs = h / s as f64;
    let mut count = 0usize;
    let mut sum = [0.0, 0.0];
    for b in 0..s {
        for a in 0..s {
            let p = [c[0] - half + (a as f64 + 0.5) * hs, c[1] - half + (b as f64 + 0.5) * hs];
            if p[0].hypot(p[1]) < r {
                count += 1;
                sum[0] += p[0];
                sum[1] += p[1];
            }
        }
    }
    if count == 0 {
        return (0.0, c, false);
    }
    let k = count as f64;
    (k * hs * hs, [sum[0] / k, sum[1] / k], count == s * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_nodes() {
        let g = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 4).unwrap();
        let xs: Vec<f64> = g.nodes.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.cell_measure, vec![0.5; 4]);
        assert_eq!(g.dist_boundary, vec![0.25, 0.75, 0.75, 0.25]);
    }

    #[test]
    fn refine_interval() {
        let g = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 4).unwrap();
        let f = g.refine().unwrap();
        assert_eq!(f.n_per_axis, 8);
        assert_eq!(f.h, 0.5 * g.h);
        for x in &f.nodes {
            let k = x[0] / 0.125;
            assert!((k - k.round()).abs() < 1e-12 && (k.round() as i64) % 2 != 0);
        }
        assert!((f.total_measure() - g.total_measure()).abs() < 1e-10);
    }

    #[test]
    fn refine_respects_budget() {
        let g = Grid::build(DomainSpec::interval(-1.0, 1.0).unwrap(), 64).unwrap();
        assert!(matches!(g.refine_within(1000), Err(Error::Resource(_))));
        assert_eq!(g.refine_within(1 << 20).unwrap().n_per_axis, 128);
    }

    #[test]
    fn disk_area() {
        let g = Grid::build(DomainSpec::disk(1.0).unwrap(), 16).unwrap();
        assert!((g.total_measure() - std::f64::consts::PI).abs() < 0.05);
        assert!(g.dist_boundary.iter().all(|&d| d > 0.0));
        assert!(g.dist_origin.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn rectangle_grid() {
        let spec = DomainSpec::rectangle(-1.0, 1.0, -0.5, 1.5).unwrap();
        let g = Grid::build(spec, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.total_measure() - 4.0).abs() < 1e-12);
        let min_r = g.dist_origin.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_r >= 0.5 * g.h * 0.999_999);
        assert!(Grid::build(DomainSpec::rectangle(-1.0, 1.0, -0.3, 1.0).unwrap(), 8).is_err());
    }

    #[test]
    fn origin_must_be_on_a_cell_edge() {
        assert!(Grid::build(DomainSpec::interval(-1.0, 2.0).unwrap(), 8).is_err());
        assert!(Grid::build(DomainSpec::interval(-1.0, 2.0).unwrap(), 9).is_ok());
        assert!(DomainSpec::interval(0.5, 2.0).is_err());
        assert!(Grid::build(DomainSpec::disk(1.0).unwrap(), 15).is_err());
    }

    #[test]
    fn distance_matches_brute_force() {
        for spec in [DomainSpec::disk(1.0).unwrap(), DomainSpec::rectangle(-1.0, 2.0, -1.0, 1.0).unwrap()] {
            let g = Grid::build(spec, 12).unwrap();
            let boundary: Vec<[f64; 2]> = match spec {
                DomainSpec::Disk { r } => (0..200_000)
                    .map(|k| {
                        let t = k as f64 / 200_000.0 * std::f64::consts::TAU;
                        [r * t.cos(), r * t.sin()]
                    })
                    .collect(),
                DomainSpec::Rectangle { ax, bx, ay, by } => (0..=50_000)
                    .flat_map(|k| {
                        let s = k as f64 / 50_000.0;
                        let x = ax + s * (bx - ax);
                        let y = ay + s * (by - ay);
                        [[x, ay], [x, by], [ax, y], [bx, y]]
                    })
                    .collect(),
                _ => unreachable!(),
            };
            for (x, &d) in g.nodes.iter().zip(&g.dist_boundary) {
                let brute = boundary
                    .iter()
                    .map(|p| (p[0] - x[0]).hypot(p[1] - x[1]))
                    .fold(f64::INFINITY, f64::min);
                assert!((brute - d).abs() < 1e-8, "{x:?}: {brute} vs {d}");
            }
        }
    }

    #[test]
    fn exit_distance_hits_boundary() {
        for spec in [
            DomainSpec::disk(1.0).unwrap(),
            DomainSpec::rectangle(-1.0, 2.0, -1.0, 1.0).unwrap(),
        ] {
            let x = [0.3, -0.2];
            for k in 0..64 {
                let t = k as f64 * 0.1 + 0.05;
                let rho = spec.exit_distance(x, t);
                let p = [x[0] + rho * t.cos(), x[1] + rho * t.sin()];
                let inside = [x[0] + 0.999 * rho * t.cos(), x[1] + 0.999 * rho * t.sin()];
                let outside = [x[0] + 1.001 * rho * t.cos(), x[1] + 1.001 * rho * t.sin()];
                assert!(spec.contains(inside) && !spec.contains(outside), "{p:?}");
            }
        }
    }

    #[test]
    fn parse_domain() {
        assert_eq!("interval:-1,1".parse::<DomainSpec>().unwrap(), DomainSpec::Interval { a: -1.0, b: 1.0 });
        assert_eq!("disk:2".parse::<DomainSpec>().unwrap(), DomainSpec::Disk { r: 2.0 });
        assert!("rect:-1,1,-1".parse::<DomainSpec>().is_err());
        assert!("interval:1,2".parse::<DomainSpec>().is_err());
    }
}
