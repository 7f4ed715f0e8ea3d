//! Lattice versions of the a-priori estimates, reported as signed margins
//! (`lhs - rhs`, so `<= 0` means the inequality holds on the lattice).
//!
//! All integrals are trapezoid sums: spatial slices weight their end nodes by
//! 1/2, and integrals over a backward cone integrate the slice integrals in
//! time with the trapezoid rule, closing at the apex where the slice is empty.
//! Both are exact for integrands linear in `x` and `t`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{discrete_charge, SpinorField};
use crate::grid::{cone_slice, symmetric_difference_measure, Boundary, ConeRegion, GridSpec};
use crate::initial_data::{DataBounds, InitialData};

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeLevel {
    pub aplus: Vec<f64>,
    pub aminus: Vec<f64>,
}

/// Every level `0..=nt` of a run.
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub grid: GridSpec,
    pub spinors: Vec<SpinorField>,
    pub gauges: Vec<GaugeLevel>,
    pub data: InitialData,
    pub bounds: DataBounds,
    pub mass: f64,
}

impl RunHistory {
    pub fn levels(&self) -> usize {
        self.spinors.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.grid.nt + 1;
        if self.spinors.len() != n || self.gauges.len() != n {
            return Err(Error::Precondition(format!(
                "history holds {} spinor and {} gauge levels, expected {n}",
                self.spinors.len(),
                self.gauges.len()
            )));
        }
        Ok(())
    }
}

/// `q(t) = e^{m t} m (m t + 1)`.
pub fn growth_factor(m: f64, t: f64) -> f64 {
    (m * t).exp() * m * (m * t + 1.0)
}

pub fn total_charge(spinor: &SpinorField, grid: &GridSpec) -> f64 {
    discrete_charge(&spinor.u, &spinor.v, grid.dx)
}

/// Trapezoid sum of `f` over nodes `lo..=hi`; zero for a single node.
fn trapezoid(f: &[f64], lo: usize, hi: usize, dx: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut acc = 0.5 * (f[lo] + f[hi]);
    for x in &f[lo + 1..hi] {
        acc += x;
    }
    acc * dx
}

/// Running trapezoid integral: `p[j] - p[i]` integrates nodes `i..=j`.
fn prefix_trapezoid(f: &[f64], dx: f64) -> Vec<f64> {
    let mut p = vec![0.0; f.len()];
    for j in 1..f.len() {
        p[j] = p[j - 1] + 0.5 * (f[j - 1] + f[j]) * dx;
    }
    p
}

/// Trapezoid integral of `f(level, node)` over the backward triangle whose
/// base is the node interval `[left, right]` on level 0. The apex may fall
/// half way between levels when `right - left` is odd.
fn triangle_integral(f: impl Fn(usize, usize) -> f64, left: usize, right: usize, grid: &GridSpec) -> f64 {
    if right <= left {
        return 0.0;
    }
    let width = right - left;
    let top = width / 2;
    let slice = |k: usize| -> f64 {
        let (lo, hi) = (left + k, right - k);
        if hi <= lo {
            return 0.0;
        }
        let mut acc = 0.5 * (f(k, lo) + f(k, hi));
        for j in lo + 1..hi {
            acc += f(k, j);
        }
        acc * grid.dx
    };
    let slices: Vec<f64> = (0..=top).map(slice).collect();
    let mut acc = 0.0;
    for k in 0..top {
        acc += 0.5 * (slices[k] + slices[k + 1]);
    }
    // remaining half level up to the apex when the width is odd
    let tail = 0.5 * width as f64 - top as f64;
    acc += tail * 0.5 * slices[top];
    acc * grid.dt
}

/// Charge inside the cone at each level `0..=apex_level`.
pub fn cone_charge_series(history: &RunHistory, cone: &ConeRegion) -> Result<Vec<f64>> {
    history.check()?;
    if cone.apex_level > history.grid.nt {
        return Err(Error::Geometry(format!(
            "cone apex level {} beyond history of {} steps",
            cone.apex_level, history.grid.nt
        )));
    }
    let grid = &history.grid;
    (0..=cone.apex_level)
        .map(|k| {
            let s = cone_slice(grid, cone, k)?;
            let rho = history.spinors[k].density();
            Ok(trapezoid(&rho, *s.start(), *s.end(), grid.dx))
        })
        .collect()
}

/// Largest level-to-level increase of the cone charge over every cone with
/// apex on level `apex_level`. Non-positive when the charge is monotone.
pub fn cone_monotonicity_violation(history: &RunHistory, apex_level: usize) -> Result<f64> {
    history.check()?;
    let grid = &history.grid;
    if apex_level > grid.nt || 2 * apex_level > grid.nx - 1 {
        return Err(Error::Geometry(format!("no cone of height {apex_level} fits")));
    }
    let prefixes: Vec<Vec<f64>> = history.spinors[..=apex_level]
        .iter()
        .map(|s| prefix_trapezoid(&s.density(), grid.dx))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for apex in apex_level..grid.nx - apex_level {
        let mut last = f64::NAN;
        for (k, p) in prefixes.iter().enumerate() {
            let half = apex_level - k;
            let q = p[apex + half] - p[apex - half];
            if k > 0 {
                worst = worst.max(q - last);
            }
            last = q;
        }
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseReport {
    pub margin: f64,
    /// Nodes whose cone base leaves the window.
    pub skipped: usize,
}

/// `max |u(x0,t0)|^2 - q(t0) * int_{x0-t0}^{x0+t0} rho0 - e^{m t0} |u0(x0-t0)|^2`
/// over all nodes, and the same for `v` with `v0(x0+t0)`.
pub fn pointwise_bound_report(history: &RunHistory) -> Result<PointwiseReport> {
    history.check()?;
    let grid = &history.grid;
    let m = history.mass;
    let rho0: Vec<f64> = history.data.u0.iter().zip(&history.data.v0).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let base = prefix_trapezoid(&rho0, grid.dx);
    let mut margin = f64::NEG_INFINITY;
    let mut skipped = 0;
    for (k, s) in history.spinors.iter().enumerate() {
        let t = grid.t(k);
        let q = growth_factor(m, t);
        let e = (m * t).exp();
        for i in 0..grid.nx {
            if i < k || i + k >= grid.nx {
                skipped += 1;
                continue;
            }
            let cone = q * (base[i + k] - base[i - k]);
            let mu = s.u[i].norm_sqr() - cone - e * history.data.u0[i - k].norm_sqr();
            let mv = s.v[i].norm_sqr() - cone - e * history.data.v0[i + k].norm_sqr();
            margin = margin.max(mu).max(mv);
        }
    }
    Ok(PointwiseReport {
        margin: if margin.is_finite() { margin } else { 0.0 },
        skipped,
    })
}

/// Sample of `f` at node `i + offset`: wrapped in periodic mode, zero outside
/// a zero-inflow window.
fn shifted_sample(f: &[f64], grid: &GridSpec, i: usize, offset: isize) -> f64 {
    grid.shifted(i, offset).map_or(0.0, |j| f[j])
}

/// Trapezoid integral of `f` over `{ |x| >= radius }` within the window.
fn tail_integral(f: &[f64], radius: f64, grid: &GridSpec) -> f64 {
    let tol = 1e-9 * grid.dx;
    let mut acc = 0.0;
    // left piece: nodes with x <= -radius
    if let Some(last) = (0..grid.nx).rev().find(|&i| grid.x(i) <= -radius + tol) {
        acc += trapezoid(f, 0, last, grid.dx);
    }
    if let Some(first) = (0..grid.nx).find(|&i| grid.x(i) >= radius - tol) {
        acc += trapezoid(f, first, grid.nx - 1, grid.dx);
    }
    acc
}

/// Margins of the two tail inequalities at time `tau = tau_level * dt`,
/// `int_{|y|>=M} |u(y,tau)|^2 <= 2 tau q(tau) int_{|x|>=M-tau} rho0
///                               + e^{m tau} int_{|y|>=M} |u0(y-tau)|^2`
/// and the `v` analogue with `v0(y+tau)`. Returns the larger margin.
pub fn tail_report(history: &RunHistory, radius: f64, tau_level: usize) -> Result<f64> {
    history.check()?;
    let grid = &history.grid;
    if tau_level > grid.nt {
        return Err(Error::Geometry(format!("tau level {tau_level} beyond horizon")));
    }
    let tau = grid.t(tau_level);
    if !(radius - tau > 0.0) {
        return Err(Error::Geometry(format!("need M - tau > 0, got M = {radius}, tau = {tau}")));
    }
    if !(-radius > grid.xmin && radius < grid.xmax) {
        return Err(Error::Geometry(format!("|x| = {radius} is not inside the window")));
    }
    let m = history.mass;
    let data = &history.data;
    let rho0: Vec<f64> = data.u0.iter().zip(&data.v0).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let u0sq: Vec<f64> = data.u0.iter().map(|z| z.norm_sqr()).collect();
    let v0sq: Vec<f64> = data.v0.iter().map(|z| z.norm_sqr()).collect();
    let shift = tau_level as isize;
    let u0_shift: Vec<f64> = (0..grid.nx).map(|i| shifted_sample(&u0sq, grid, i, -shift)).collect();
    let v0_shift: Vec<f64> = (0..grid.nx).map(|i| shifted_sample(&v0sq, grid, i, shift)).collect();

    let s = &history.spinors[tau_level];
    let usq: Vec<f64> = s.u.iter().map(|z| z.norm_sqr()).collect();
    let vsq: Vec<f64> = s.v.iter().map(|z| z.norm_sqr()).collect();

    let common = 2.0 * tau * growth_factor(m, tau) * tail_integral(&rho0, radius - tau, grid);
    let e = (m * tau).exp();
    let mu = tail_integral(&usq, radius, grid) - common - e * tail_integral(&u0_shift, radius, grid);
    let mv = tail_integral(&vsq, radius, grid) - common - e * tail_integral(&v0_shift, radius, grid);
    Ok(mu.max(mv))
}

/// `max |A+-| - (C1 (T + 1) + C0 T)` over the whole history.
pub fn gauge_sup_report(history: &RunHistory) -> f64 {
    let sup = history
        .gauges
        .iter()
        .flat_map(|g| g.aplus.iter().chain(&g.aminus))
        .fold(0.0f64, |m, a| m.max(a.abs()));
    let t = history.grid.t(history.gauges.len().saturating_sub(1));
    sup - (history.bounds.c1 * (t + 1.0) + history.bounds.c0 * t)
}

/// Spatial nodes at `level` whose centered residual is evaluated. In a
/// zero-inflow window only nodes whose domain of dependence (through level
/// `level + 1`) stays clear of the edge nodes are used.
fn residual_nodes(grid: &GridSpec, level: usize) -> std::ops::Range<usize> {
    match grid.boundary {
        Boundary::Periodic => 0..grid.nx,
        Boundary::ZeroInflow => {
            let lo = level + 1;
            let hi = grid.nx.saturating_sub(level + 1);
            lo..hi.max(lo)
        }
    }
}

fn centered_x(f: &[f64], grid: &GridSpec, i: usize) -> f64 {
    let l = grid.left(i).expect("residual node has a left neighbour");
    let r = grid.right(i).expect("residual node has a right neighbour");
    (f[r] - f[l]) / (2.0 * grid.dx)
}

fn need_levels(history: &RunHistory) -> Result<()> {
    history.check()?;
    if history.grid.nt < 2 {
        return Err(Error::Precondition("residuals need at least two time steps".into()));
    }
    Ok(())
}

/// Per level `1..nt`: `max |D_t A0 - D_x A1|` with centered differences,
/// `A0 = (A+ + A-)/2`, `A1 = (A+ - A-)/2`.
pub fn lorentz_residual_series(history: &RunHistory) -> Result<Vec<f64>> {
    need_levels(history)?;
    let grid = &history.grid;
    let a0: Vec<Vec<f64>> = history
        .gauges
        .iter()
        .map(|g| g.aplus.iter().zip(&g.aminus).map(|(p, m)| 0.5 * (p + m)).collect())
        .collect();
    let a1: Vec<Vec<f64>> = history
        .gauges
        .iter()
        .map(|g| g.aplus.iter().zip(&g.aminus).map(|(p, m)| 0.5 * (p - m)).collect())
        .collect();
    Ok((1..grid.nt)
        .map(|k| {
            residual_nodes(grid, k).fold(0.0f64, |worst, i| {
                let dt = (a0[k + 1][i] - a0[k - 1][i]) / (2.0 * grid.dt);
                worst.max((dt - centered_x(&a1[k], grid, i)).abs())
            })
        })
        .collect())
}

pub fn lorentz_residual(history: &RunHistory) -> Result<f64> {
    Ok(lorentz_residual_series(history)?.into_iter().fold(0.0, f64::max))
}

/// Per level `1..nt`: `max |D_t (|u|^2 + |v|^2) + D_x (|u|^2 - |v|^2)|`.
pub fn local_conservation_series(history: &RunHistory) -> Result<Vec<f64>> {
    need_levels(history)?;
    let grid = &history.grid;
    let rho: Vec<Vec<f64>> = history.spinors.iter().map(|s| s.density()).collect();
    let flux: Vec<Vec<f64>> = history.spinors.iter().map(|s| s.flux()).collect();
    let nodes = match grid.boundary {
        Boundary::Periodic => 0..grid.nx,
        Boundary::ZeroInflow => 1..grid.nx - 1,
    };
    Ok((1..grid.nt)
        .map(|k| {
            nodes.clone().fold(0.0f64, |worst, i| {
                let dt = (rho[k + 1][i] - rho[k - 1][i]) / (2.0 * grid.dt);
                worst.max((dt + centered_x(&flux[k], grid, i)).abs())
            })
        })
        .collect())
}

pub fn local_conservation_residual(history: &RunHistory) -> Result<f64> {
    Ok(local_conservation_series(history)?.into_iter().fold(0.0, f64::max))
}

/// Modulus of continuity of the cone integrals of `|u|^2` and `|v|^2`:
/// `|iint_{Δa} |v|^2 - iint_{Δb} |v|^2|` against
/// `C0 q(T) meas(Ω) + e^{mT} iint_Ω |v0(y+τ)|^2`, with Ω the symmetric
/// difference and `T` the larger apex time. Returns the larger of the `u`
/// and `v` margins.
pub fn equicontinuity_margin(history: &RunHistory, cone_a: &ConeRegion, cone_b: &ConeRegion) -> Result<f64> {
    history.check()?;
    let grid = &history.grid;
    for c in [cone_a, cone_b] {
        // re-validate against this grid
        ConeRegion::new(grid, c.apex_index, c.apex_level)?;
        if c.apex_level > grid.nt {
            return Err(Error::Geometry(format!(
                "cone apex level {} beyond history of {} steps",
                c.apex_level, grid.nt
            )));
        }
    }
    let m = history.mass;
    let horizon = grid.t(cone_a.apex_level.max(cone_b.apex_level));
    let usq: Vec<Vec<f64>> = history.spinors.iter().map(|s| s.u.iter().map(|z| z.norm_sqr()).collect()).collect();
    let vsq: Vec<Vec<f64>> = history.spinors.iter().map(|s| s.v.iter().map(|z| z.norm_sqr()).collect()).collect();
    let u0sq: Vec<f64> = history.data.u0.iter().map(|z| z.norm_sqr()).collect();
    let v0sq: Vec<f64> = history.data.v0.iter().map(|z| z.norm_sqr()).collect();

    let (la, ra) = cone_a.base();
    let (lb, rb) = cone_b.base();
    let (li, ri) = (la.max(lb), ra.min(rb));
    let over_omega = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        let whole = triangle_integral(f, la, ra, grid) + triangle_integral(f, lb, rb, grid);
        let both = if ri > li { triangle_integral(f, li, ri, grid) } else { 0.0 };
        (whole - 2.0 * both).max(0.0)
    };
    let measure = symmetric_difference_measure(cone_a, cone_b, grid);
    let common = history.bounds.c0 * growth_factor(m, horizon) * measure;
    let e = (m * horizon).exp();

    let lhs_u = (triangle_integral(|k, j| usq[k][j], la, ra, grid) - triangle_integral(|k, j| usq[k][j], lb, rb, grid)).abs();
    let lhs_v = (triangle_integral(|k, j| vsq[k][j], la, ra, grid) - triangle_integral(|k, j| vsq[k][j], lb, rb, grid)).abs();
    let rhs_u = common + e * over_omega(&|k, j| shifted_sample(&u0sq, grid, j, -(k as isize)));
    let rhs_v = common + e * over_omega(&|k, j| shifted_sample(&v0sq, grid, j, k as isize));
    Ok((lhs_u - rhs_u).max(lhs_v - rhs_v))
}

/// `iint_{Δ} f` over a lattice cone, `f` given per level.
pub fn cone_integral(levels: &[Vec<f64>], cone: &ConeRegion, grid: &GridSpec) -> Result<f64> {
    if cone.apex_level >= levels.len() {
        return Err(Error::Geometry("cone higher than the supplied levels".into()));
    }
    let (l, r) = cone.base();
    if r >= grid.nx {
        return Err(Error::Geometry("cone base leaves the window".into()));
    }
    Ok(triangle_integral(|k, j| levels[k][j], l, r, grid))
}

// ---------------------------------------------------------------------------
// Aggregate report

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// `(M, tau_level)` for the tail check; skipped when absent.
    pub tail: Option<(f64, usize)>,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub charge_series: Vec<f64>,
    pub max_charge_drift: f64,
    pub cone_violations: f64,
    /// Cone charge of the tallest centered cone, per level.
    pub cone_charge_series: Vec<f64>,
    pub pointwise_margin: f64,
    pub pointwise_skipped: usize,
    pub tail_margin: Option<f64>,
    pub gauge_sup_margin: f64,
    pub lorentz_residual: Option<f64>,
    pub local_conservation_residual: Option<f64>,
    pub lorentz_series: Vec<f64>,
    pub local_conservation_series: Vec<f64>,
    pub equicontinuity_margins: Vec<f64>,
}

/// Relative drift `max_k |Q_k - Q_0| / Q_0`, absolute when `Q_0 == 0`.
pub fn charge_drift(series: &[f64]) -> f64 {
    let Some(&q0) = series.first() else { return 0.0 };
    let worst = series.iter().fold(0.0f64, |m, q| m.max((q - q0).abs()));
    if q0 > 0.0 {
        worst / q0
    } else {
        worst
    }
}

pub fn diagnose(history: &RunHistory, opts: &ReportOptions) -> Result<DiagnosticsReport> {
    history.check()?;
    let grid = &history.grid;
    let charge_series: Vec<f64> = history.spinors.iter().map(|s| total_charge(s, grid)).collect();
    let max_charge_drift = charge_drift(&charge_series);

    let height = grid.nt.min((grid.nx - 1) / 2);
    let mut cone_violations = f64::NEG_INFINITY;
    for h in [height, height / 2] {
        if h > 0 {
            cone_violations = cone_violations.max(cone_monotonicity_violation(history, h)?);
        }
    }
    if !cone_violations.is_finite() {
        cone_violations = 0.0;
    }
    let center = ConeRegion::new(grid, (grid.nx - 1) / 2, height)?;
    let cone_series = cone_charge_series(history, &center)?;

    let pw = pointwise_bound_report(history)?;
    let tail_margin = match opts.tail {
        Some((radius, tau)) => Some(tail_report(history, radius, tau)?),
        None => None,
    };

    let (lorentz_series, local_series) = if grid.nt >= 2 {
        (lorentz_residual_series(history)?, local_conservation_series(history)?)
    } else {
        (vec![], vec![])
    };
    let max_of = |s: &[f64]| (!s.is_empty()).then(|| s.iter().fold(0.0f64, |m, x| m.max(*x)));

    let mut equicontinuity_margins = vec![];
    if height >= 1 {
        let c = center.apex_index;
        let k = height;
        let neighbours = [(c + 1, k - 1), (c - 1, k - 1), (c, k - 1), (c + 1, k.saturating_sub(2))];
        let reference = ConeRegion::new(grid, c, k - 1).ok();
        if let Some(a) = reference {
            for (i, l) in neighbours {
                if let Ok(b) = ConeRegion::new(grid, i, l) {
                    equicontinuity_margins.push(equicontinuity_margin(history, &a, &b)?);
                }
            }
        }
    }

    Ok(DiagnosticsReport {
        max_charge_drift,
        charge_series,
        cone_violations,
        cone_charge_series: cone_series,
        pointwise_margin: pw.margin,
        pointwise_skipped: pw.skipped,
        tail_margin,
        gauge_sup_margin: gauge_sup_report(history),
        lorentz_residual: max_of(&lorentz_series),
        local_conservation_residual: max_of(&local_series),
        lorentz_series,
        local_conservation_series: local_series,
        equicontinuity_margins,
    })
}

impl DiagnosticsReport {
    /// Flat `key = value` listing.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:e}"));
        let mut kv = vec![
            ("levels".to_string(), self.charge_series.len().to_string()),
            ("initial_charge".to_string(), format!("{:e}", self.charge_series.first().copied().unwrap_or(0.0))),
            ("max_charge_drift".to_string(), format!("{:e}", self.max_charge_drift)),
            ("cone_violations".to_string(), format!("{:e}", self.cone_violations)),
            ("pointwise_margin".to_string(), format!("{:e}", self.pointwise_margin)),
            ("pointwise_skipped".to_string(), self.pointwise_skipped.to_string()),
            ("tail_margin".to_string(), opt(self.tail_margin)),
            ("gauge_sup_margin".to_string(), format!("{:e}", self.gauge_sup_margin)),
            ("lorentz_residual".to_string(), opt(self.lorentz_residual)),
            ("local_conservation_residual".to_string(), opt(self.local_conservation_residual)),
        ];
        let eq = self.equicontinuity_margins.iter().map(|m| format!("{m:e}")).collect::<Vec<_>>().join(", ");
        kv.push(("equicontinuity_margins".to_string(), format!("[{eq}]")));
        kv
    }

    pub fn write_key_values(&self, path: &Path, comment: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# {comment}")?;
        for (k, v) in self.to_key_values() {
            writeln!(f, "{k} = {v}")?;
        }
        f.flush()?;
        Ok(())
    }

    /// Per-level CSV: `level, t, charge, cone_charge, lorentz_residual,
    /// local_conservation_residual`. Missing values are left empty.
    pub fn write_series_csv(&self, path: &Path, grid: &GridSpec, comment: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# {comment}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["level", "t", "charge", "cone_charge", "lorentz_residual", "local_conservation_residual"])?;
        let cell = |s: &[f64], k: usize| -> String {
            // residual series start at level 1
            if k >= 1 && k - 1 < s.len() {
                format!("{:e}", s[k - 1])
            } else {
                String::new()
            }
        };
        for (k, q) in self.charge_series.iter().enumerate() {
            let cone = self.cone_charge_series.get(k).map_or(String::new(), |c| format!("{c:e}"));
            w.write_record([
                k.to_string(),
                format!("{:e}", grid.t(k)),
                format!("{q:e}"),
                cone,
                cell(&self.lorentz_series, k),
                cell(&self.local_conservation_series, k),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn triangle_quadrature_exact_on_linear() {
        let g = make_grid(0.0, 4.0, 0.25, 2.0, Boundary::ZeroInflow).unwrap();
        // constant: area h^2 for both integer and half-integer apex heights
        for (l, r) in [(2usize, 10usize), (2, 11), (5, 6), (3, 3)] {
            let h = 0.5 * (r - l) as f64 * g.dx;
            let got = triangle_integral(|_, _| 1.0, l, r, &g);
            assert!((got - h * h).abs() < 1e-14, "({l},{r}): {got} vs {}", h * h);
        }
        // f = x + 3: each slice integral is linear in t, so exact
        let (l, r) = (4usize, 12usize);
        let (a, b) = (g.x(l), g.x(r));
        let h = 0.5 * (b - a);
        let exact = h * h * (0.5 * (a + b) + 3.0);
        let got = triangle_integral(|_, j| g.x(j) + 3.0, l, r, &g);
        assert!((got - exact).abs() < 1e-13, "{got} vs {exact}");
        // f = t: slices are quadratic in t, second order error
        let exact_t = h * h * h / 3.0;
        let got_t = triangle_integral(|k, _| g.t(k), l, r, &g);
        assert!((got_t - exact_t).abs() < g.dx * g.dx, "{got_t} vs {exact_t}");
    }

    #[test]
    fn growth_factor_vanishes_without_mass() {
        assert_eq!(growth_factor(0.0, 3.0), 0.0);
        assert!((growth_factor(1.0, 1.0) - std::f64::consts::E * 2.0).abs() < 1e-14);
    }

    #[test]
    fn drift_helper() {
        assert_eq!(charge_drift(&[]), 0.0);
        assert_eq!(charge_drift(&[0.0, 0.0]), 0.0);
        assert!((charge_drift(&[2.0, 2.0, 2.002]) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn tail_integral_pieces() {
        let g = make_grid(-2.0, 2.0, 0.5, 0.0, Boundary::ZeroInflow).unwrap();
        let ones = vec![1.0; g.nx];
        // [-2, -1] and [1, 2]
        assert!((tail_integral(&ones, 1.0, &g) - 2.0).abs() < 1e-15);
    }
}
