//! Uniform space-time lattice at unit CFL and its light-cone geometry.
//!
//! Nodes sit at `x_i = xmin + i*dx`, levels at `t_k = k*dt` with `dt == dx`,
//! so the characteristics `x +- t` through a node land on nodes again one
//! level later. A backward cone with apex `(i, k)` covers the node interval
//! `[i - (k - l), i + (k - l)]` at level `l`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking that lengths are integer multiples of `dx`.
const COMMENSURATE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Nothing enters through the window edges; what leaves is lost.
    #[default]
    ZeroInflow,
    /// Node `nx - 1` neighbours node `0`; the period is `nx * dx`.
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-inflow" | "zero_inflow" => Ok(Boundary::ZeroInflow),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::param("boundary", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::ZeroInflow => f.write_str("zero-inflow"),
            Boundary::Periodic => f.write_str("periodic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub nt: usize,
    pub horizon: f64,
    pub boundary: Boundary,
}

fn whole_steps(length: f64, dx: f64, what: &str) -> Result<usize> {
    let ratio = length / dx;
    let steps = ratio.round();
    if (ratio - steps).abs() > COMMENSURATE_RTOL * ratio.abs().max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "{what} {length} is not an integer multiple of dx = {dx}"
        )));
    }
    Ok(steps as usize)
}

/// Build a unit-CFL grid covering `[xmin, xmax] x [0, horizon]`.
pub fn make_grid(xmin: f64, xmax: f64, dx: f64, horizon: f64, boundary: Boundary) -> Result<GridSpec> {
    if !(dx > 0.0) || !dx.is_finite() {
        return Err(Error::InvalidGrid(format!("dx must be positive, got {dx}")));
    }
    if !(xmax > xmin) || !xmin.is_finite() || !xmax.is_finite() {
        return Err(Error::InvalidGrid(format!("need xmax > xmin, got [{xmin}, {xmax}]")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidGrid(format!("horizon must be >= 0, got {horizon}")));
    }
    let cells = whole_steps(xmax - xmin, dx, "domain length")?;
    let nt = whole_steps(horizon, dx, "horizon")?;
    let nx = cells + 1;
    if nx < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {nx}")));
    }
    Ok(GridSpec {
        xmin,
        xmax: xmin + cells as f64 * dx,
        nx,
        dx,
        dt: dx,
        nt,
        horizon: nt as f64 * dx,
        boundary,
    })
}

impl GridSpec {
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.dx
    }

    #[inline]
    pub fn t(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Index of the node at `x`, if `x` is (within rounding) a node of the window.
    pub fn node_at(&self, x: f64) -> Option<usize> {
        let s = (x - self.xmin) / self.dx;
        let r = s.round();
        if (s - r).abs() > COMMENSURATE_RTOL * s.abs().max(1.0) || r < 0.0 || r > (self.nx - 1) as f64 {
            return None;
        }
        Some(r as usize)
    }

    /// Same window and spacing, different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<GridSpec> {
        make_grid(self.xmin, self.xmax, self.dx, horizon, self.boundary)
    }

    /// Left neighbour of node `i`, honouring the boundary mode.
    #[inline]
    pub fn left(&self, i: usize) -> Option<usize> {
        match (i, self.boundary) {
            (0, Boundary::Periodic) => Some(self.nx - 1),
            (0, Boundary::ZeroInflow) => None,
            _ => Some(i - 1),
        }
    }

    /// Right neighbour of node `i`, honouring the boundary mode.
    #[inline]
    pub fn right(&self, i: usize) -> Option<usize> {
        if i + 1 < self.nx {
            Some(i + 1)
        } else {
            match self.boundary {
                Boundary::Periodic => Some(0),
                Boundary::ZeroInflow => None,
            }
        }
    }

    /// Node `i` shifted by `offset` places, wrapped in periodic mode and
    /// `None` when it leaves a zero-inflow window.
    pub fn shifted(&self, i: usize, offset: isize) -> Option<usize> {
        let j = i as isize + offset;
        let n = self.nx as isize;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::ZeroInflow => (0..n).contains(&j).then_some(j as usize),
        }
    }
}

/// Backward light cone `Δ(x0, t0)` with its apex on a lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeRegion {
    pub apex_index: usize,
    pub apex_level: usize,
}

impl ConeRegion {
    /// Fails when the base `[x0 - t0, x0 + t0]` sticks out of the window.
    pub fn new(grid: &GridSpec, apex_index: usize, apex_level: usize) -> Result<Self> {
        if apex_index >= grid.nx {
            return Err(Error::Geometry(format!(
                "apex index {apex_index} outside grid of {} nodes",
                grid.nx
            )));
        }
        if apex_level > apex_index || apex_index + apex_level > grid.nx - 1 {
            return Err(Error::Geometry(format!(
                "cone base of apex ({apex_index}, {apex_level}) leaves the window"
            )));
        }
        Ok(Self {
            apex_index,
            apex_level,
        })
    }

    pub fn apex_x(&self, grid: &GridSpec) -> f64 {
        grid.x(self.apex_index)
    }

    pub fn apex_t(&self, grid: &GridSpec) -> f64 {
        grid.t(self.apex_level)
    }

    /// Base endpoints as node indices.
    pub fn base(&self) -> (usize, usize) {
        (
            self.apex_index - self.apex_level,
            self.apex_index + self.apex_level,
        )
    }
}

/// Spatial node interval of the cone at `level`.
pub fn cone_slice(grid: &GridSpec, cone: &ConeRegion, level: usize) -> Result<RangeInclusive<usize>> {
    if level > cone.apex_level {
        return Err(Error::Geometry(format!(
            "level {level} above cone apex level {}",
            cone.apex_level
        )));
    }
    // Construction already guarantees the base fits; re-check in case the
    // cone was built against another grid.
    let half = cone.apex_level - level;
    if cone.apex_index < half || cone.apex_index + half >= grid.nx {
        return Err(Error::Geometry("cone does not fit this grid".into()));
    }
    Ok((cone.apex_index - half)..=(cone.apex_index + half))
}

/// Area of the triangle `Δ` with base `[left, right]` on the line `t = 0`.
#[inline]
pub(crate) fn triangle_area(left: f64, right: f64) -> f64 {
    let h = 0.5 * (right - left);
    if h > 0.0 {
        h * h
    } else {
        0.0
    }
}

/// Lebesgue measure of the symmetric difference of two backward cones.
///
/// The intersection of two backward cones is again a backward cone whose base
/// is the intersection of the two bases, so the measure follows from three
/// triangle areas.
pub fn symmetric_difference_measure(cone_a: &ConeRegion, cone_b: &ConeRegion, grid: &GridSpec) -> f64 {
    let base = |c: &ConeRegion| {
        let x = c.apex_x(grid);
        let t = c.apex_t(grid);
        (x - t, x + t)
    };
    let (la, ra) = base(cone_a);
    let (lb, rb) = base(cone_b);
    let overlap = triangle_area(la.max(lb), ra.min(rb));
    let m = triangle_area(la, ra) + triangle_area(lb, rb) - 2.0 * overlap;
    m.max(0.0)
}
