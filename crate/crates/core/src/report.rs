//! `report.json` and per-check CSV traces.

use std::io::Write;

use serde::Serialize;

use crate::analysis::CheckResult;
use crate::geometry::{DomainSpec, Grid};
use crate::specfun::ModelParams;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub domain: DomainSpec,
    pub n_per_axis: usize,
    pub nodes: usize,
    pub h: f64,
    pub total_measure: f64,
}

impl From<&Grid> for GridSummary {
    fn from(g: &Grid) -> Self {
        Self {
            domain: g.spec,
            n_per_axis: g.n_per_axis,
            nodes: g.len(),
            h: g.h,
            total_measure: g.total_measure(),
        }
    }
}

/// `{params, grid, checks}`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub params: ModelParams,
    pub grid: Option<GridSummary>,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(params: ModelParams, grid: Option<&Grid>) -> Self {
        Self { params, grid: grid.map(GridSummary::from), checks: Vec::new() }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| crate::Error::Io(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}

/// Comma-separated table with a header row; numbers in `{:e}` form.
pub fn write_trace_csv<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
