//! Full runs, mesh-refinement and mollification studies, and the stability
//! functional for pairs of runs.

use rayon::prelude::*;

use crate::diagnostics::{GaugeLevel, RunHistory};
use crate::dirac_step::{step_spinor, SpinorStepConfig};
use crate::error::{Error, Result};
use crate::field::{GaugeField, SpinorField};
use crate::grid::{make_grid, Boundary, GridSpec};
use crate::initial_data::{compute_bounds, mollify, preset, InitialData, PresetKind, PresetParams};
use crate::wave_step::{advance_gauge, initial_gauge};

/// Spinor density below this fraction of its peak counts as outside the support.
const SUPPORT_RTOL: f64 = 1e-24;

/// Zero-inflow runs need the spinor data to stay clear of the edges for the
/// whole horizon: nothing may reach an edge node and then be transported out.
pub fn check_window(data: &InitialData, grid: &GridSpec) -> Result<()> {
    data.validate(grid)?;
    if grid.boundary == Boundary::Periodic {
        return Ok(());
    }
    let rho: Vec<f64> = data.u0.iter().zip(&data.v0).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let peak = rho.iter().fold(0.0f64, |m, r| m.max(*r));
    if peak == 0.0 {
        return Ok(());
    }
    let floor = SUPPORT_RTOL * peak;
    let first = rho.iter().position(|&r| r > floor).unwrap_or(0);
    let last = rho.iter().rposition(|&r| r > floor).unwrap_or(0);
    if first < grid.nt || last + grid.nt > grid.nx - 1 {
        return Err(Error::Precondition(format!(
            "window too small: spinor support [{}, {}] plus horizon {} leaves [{}, {}]",
            grid.x(first),
            grid.x(last),
            grid.horizon,
            grid.xmin,
            grid.xmax
        )));
    }
    Ok(())
}

/// A run advanced one level at a time, holding only the current state.
#[derive(Debug, Clone)]
pub struct Simulation {
    grid: GridSpec,
    cfg: SpinorStepConfig,
    spinor: SpinorField,
    /// `prev` at the spinor's level, `curr` one level ahead.
    gauge: GaugeField,
}

impl Simulation {
    pub fn new(data: &InitialData, grid: &GridSpec, cfg: SpinorStepConfig) -> Result<Self> {
        check_window(data, grid)?;
        let gauge = initial_gauge(data, grid)?;
        let sim = Self {
            grid: grid.clone(),
            cfg,
            spinor: data.spinor(),
            gauge,
        };
        if !sim.gauge.is_finite() {
            return Err(Error::NonFinite { level: 1 });
        }
        Ok(sim)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn level(&self) -> usize {
        self.spinor.level
    }

    pub fn spinor(&self) -> &SpinorField {
        &self.spinor
    }

    pub fn aplus(&self) -> &[f64] {
        &self.gauge.aplus_prev
    }

    pub fn aminus(&self) -> &[f64] {
        &self.gauge.aminus_prev
    }

    pub fn advance(&mut self) -> Result<()> {
        let next = step_spinor(&self.spinor, &self.gauge, &self.grid, &self.cfg)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { level: next.level });
        }
        let gauge = advance_gauge(&self.gauge, &next, &self.grid)?;
        if !gauge.is_finite() {
            return Err(Error::NonFinite { level: gauge.level });
        }
        self.spinor = next;
        self.gauge = gauge;
        Ok(())
    }
}

pub fn run_simulation(data: &InitialData, grid: &GridSpec, m: f64) -> Result<RunHistory> {
    run_simulation_with(data, grid, SpinorStepConfig::new(m)?)
}

pub fn run_simulation_with(data: &InitialData, grid: &GridSpec, cfg: SpinorStepConfig) -> Result<RunHistory> {
    let mut sim = Simulation::new(data, grid, cfg)?;
    let mut spinors = Vec::with_capacity(grid.nt + 1);
    let mut gauges = Vec::with_capacity(grid.nt + 1);
    loop {
        spinors.push(sim.spinor().clone());
        gauges.push(GaugeLevel {
            aplus: sim.aplus().to_vec(),
            aminus: sim.aminus().to_vec(),
        });
        if sim.level() == grid.nt {
            break;
        }
        sim.advance()?;
    }
    Ok(RunHistory {
        grid: grid.clone(),
        spinors,
        gauges,
        data: data.clone(),
        bounds: compute_bounds(data, grid),
        mass: cfg.mass,
    })
}

// ---------------------------------------------------------------------------
// Convergence tables

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    /// `dx` of the coarser run, or the smaller mollification index.
    pub parameter: f64,
    pub distance_uv: f64,
    pub distance_gauge: f64,
    /// `log2` of the previous row's distance over this one.
    pub order_uv: Option<f64>,
    pub order_gauge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub parameter_name: &'static str,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    fn from_distances(parameter_name: &'static str, params: &[f64], d: &[(f64, f64)]) -> Self {
        let order = |a: f64, b: f64| (a > 0.0 && b > 0.0).then(|| (a / b).log2());
        let rows = d
            .iter()
            .enumerate()
            .map(|(k, &(uv, ga))| ConvergenceRow {
                parameter: params[k],
                distance_uv: uv,
                distance_gauge: ga,
                order_uv: (k > 0).then(|| order(d[k - 1].0, uv)).flatten(),
                order_gauge: (k > 0).then(|| order(d[k - 1].1, ga)).flatten(),
            })
            .collect();
        Self { parameter_name, rows }
    }

    pub fn min_order_uv(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order_uv).reduce(f64::min)
    }

    pub fn min_order_gauge(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.order_gauge).reduce(f64::min)
    }

    /// True when both distance columns strictly decrease down the table.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].distance_uv < w[0].distance_uv)
    }
}

/// `sqrt(sum (|du|^2 + |dv|^2) dx)` over nodes `coarse_i <-> fine_{stride * i}`.
fn l2_gap(coarse: &SpinorField, fine: &SpinorField, stride: usize, dx: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..coarse.len() {
        let j = i * stride;
        acc += (coarse.u[i] - fine.u[j]).norm_sqr() + (coarse.v[i] - fine.v[j]).norm_sqr();
    }
    (acc * dx).sqrt()
}

fn sup_gap(coarse: &Simulation, fine: &Simulation, stride: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..coarse.aplus().len() {
        let j = i * stride;
        worst = worst
            .max((coarse.aplus()[i] - fine.aplus()[j]).abs())
            .max((coarse.aminus()[i] - fine.aminus()[j]).abs());
    }
    worst
}

/// Data of a study: a preset resampled on each grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSpec {
    pub kind: PresetKind,
    pub params: PresetParams,
}

impl DataSpec {
    pub fn sample(&self, grid: &GridSpec) -> Result<InitialData> {
        preset(self.kind, &self.params, grid)
    }
}

/// Study window and horizon shared by the runs of a refinement chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub horizon: f64,
    pub boundary: Boundary,
}

/// Pairwise distances along a halving chain of grids, each pair compared at
/// every level of its coarser member on the coarser member's nodes.
pub fn convergence_study(data: &DataSpec, window: &Window, dx_list: &[f64], m: f64) -> Result<ConvergenceTable> {
    convergence_study_with(|g| data.sample(g), window, dx_list, m)
}

pub fn convergence_study_with(
    sample: impl Fn(&GridSpec) -> Result<InitialData>,
    window: &Window,
    dx_list: &[f64],
    m: f64,
) -> Result<ConvergenceTable> {
    if dx_list.len() < 2 {
        return Err(Error::param("dx_list", "need at least two resolutions"));
    }
    for w in dx_list.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::param("dx_list", format!("{} -> {} is not a halving", w[0], w[1])));
        }
    }
    let cfg = SpinorStepConfig::new(m)?;
    let mut runs = dx_list
        .iter()
        .map(|&dx| {
            let g = make_grid(window.xmin, window.xmax, dx, window.horizon, window.boundary)?;
            Simulation::new(&sample(&g)?, &g, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len();
    let fine_steps = runs[n - 1].grid.nt;
    let stride_of = |j: usize| 1usize << (n - 1 - j);
    let mut dist = vec![(0.0f64, 0.0f64); n - 1];
    let record = |runs: &[Simulation], s: usize, dist: &mut Vec<(f64, f64)>| {
        for j in 0..n - 1 {
            if s.is_multiple_of(stride_of(j)) {
                let (c, f) = (&runs[j], &runs[j + 1]);
                let uv = l2_gap(c.spinor(), f.spinor(), 2, c.grid.dx);
                let ga = sup_gap(c, f, 2);
                dist[j].0 = dist[j].0.max(uv);
                dist[j].1 = dist[j].1.max(ga);
            }
        }
    };
    record(&runs, 0, &mut dist);
    for s in 1..=fine_steps {
        runs.par_iter_mut()
            .enumerate()
            .filter(|(j, _)| s % stride_of(*j) == 0)
            .try_for_each(|(_, r)| r.advance())?;
        record(&runs, s, &mut dist);
    }
    Ok(ConvergenceTable::from_distances("dx", &dx_list[..n - 1], &dist))
}

/// Distances in `C([0,T]; L^2)` (spinor) and sup norm (gauge) between the runs
/// started from `mollify(data, n)` for consecutive `n` in `n_list`.
pub fn mollification_study(rough: &InitialData, n_list: &[usize], grid: &GridSpec, m: f64) -> Result<ConvergenceTable> {
    if n_list.len() < 2 {
        return Err(Error::param("n_list", "need at least two indices"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("n_list", "must be strictly increasing"));
    }
    let cfg = SpinorStepConfig::new(m)?;
    let mut runs = n_list
        .iter()
        .map(|&n| Simulation::new(&mollify(rough, n, grid)?, grid, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut dist = vec![(0.0f64, 0.0f64); runs.len() - 1];
    let record = |runs: &[Simulation], dist: &mut Vec<(f64, f64)>| {
        for (j, d) in dist.iter_mut().enumerate() {
            let uv = l2_gap(runs[j].spinor(), runs[j + 1].spinor(), 1, grid.dx);
            let ga = sup_gap(&runs[j], &runs[j + 1], 1);
            d.0 = d.0.max(uv);
            d.1 = d.1.max(ga);
        }
    };
    record(&runs, &mut dist);
    for _ in 0..grid.nt {
        runs.par_iter_mut().try_for_each(|r| r.advance())?;
        record(&runs, &mut dist);
    }
    let params: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    Ok(ConvergenceTable::from_distances("n", &params[..params.len() - 1], &dist))
}

// ---------------------------------------------------------------------------
// Stability functional

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTrace {
    pub times: Vec<f64>,
    /// `I(t, T) = int_{-T+t}^{T-t} (|u1 - u2|^2 + |v1 - v2|^2) dx`.
    pub functional: Vec<f64>,
    /// Gauge-data mismatch `g(T)`.
    pub gauge_mismatch: f64,
    pub fitted_c: f64,
    /// Offset `K` of the envelope `(I(0) + K) e^{C t}`; zero unless `I(0) = 0`.
    pub fitted_offset: f64,
    /// `max_t I(t) - (I(0) + K) e^{C t}`.
    pub envelope_margin: f64,
    /// Same maximum restricted to `t > T/2`.
    pub holdout_margin: f64,
}

impl StabilityTrace {
    pub fn sup(&self) -> f64 {
        self.functional.iter().fold(0.0, |m, x| m.max(*x))
    }

    pub fn envelope(&self, t: f64) -> f64 {
        (self.functional[0] + self.fitted_offset) * (self.fitted_c * t).exp()
    }
}

/// `g(T) = |g0+|^2 + T^2 |g1+|^2 + |g0-|^2 + T^2 |g1-|^2`, sup norms over `[-T, T]`.
pub fn gauge_mismatch(a: &InitialData, b: &InitialData, grid: &GridSpec) -> f64 {
    let t = grid.horizon;
    let nodes: Vec<usize> = (0..grid.nx).filter(|&i| grid.x(i).abs() <= t + 1e-9 * grid.dx).collect();
    let sup = |p: &[f64], q: &[f64]| nodes.iter().fold(0.0f64, |m, &i| m.max((p[i] - q[i]).abs()));
    let g0p = sup(&a.aplus0, &b.aplus0);
    let g1p = sup(&a.aplus1, &b.aplus1);
    let g0m = sup(&a.aminus0, &b.aminus0);
    let g1m = sup(&a.aminus1, &b.aminus1);
    g0p * g0p + t * t * g1p * g1p + g0m * g0m + t * t * g1m * g1m
}

/// Fit the envelope on levels with `t <= T/2` and report how far the trace
/// rises above it.
///
/// With `I(0) > 0` the rate is the smallest `C >= 0` for which
/// `I(t) <= I(0) e^{Ct}` holds on the fitting window. With `I(0) = 0` (gauge-only perturbations) the
/// rate is the mean log-growth over the window and the offset is the smallest
/// one making the envelope hold there.
fn fit_envelope(times: &[f64], values: &[f64]) -> (f64, f64) {
    let horizon = *times.last().unwrap_or(&0.0);
    let fit: Vec<usize> = (1..times.len()).filter(|&k| times[k] <= 0.5 * horizon + 1e-12).collect();
    let i0 = values[0];
    if i0 > 0.0 {
        let c = fit
            .iter()
            .filter(|&&k| values[k] > 0.0)
            .map(|&k| (values[k] / i0).ln() / times[k])
            .fold(f64::NEG_INFINITY, f64::max);
        // a decaying trace still gets a non-negative Gronwall rate
        let c = if c.is_finite() { c.max(0.0) } else { 0.0 };
        return (c, 0.0);
    }
    let positive: Vec<usize> = fit.iter().copied().filter(|&k| values[k] > 0.0).collect();
    let c = match (positive.first(), positive.last()) {
        (Some(&a), Some(&b)) if b > a => ((values[b] / values[a]).ln() / (times[b] - times[a])).max(0.0),
        _ => 0.0,
    };
    let offset = fit.iter().fold(0.0f64, |m, &k| m.max(values[k] * (-c * times[k]).exp()));
    (c, offset)
}

/// Run `data` and `data + delta * direction` side by side and trace the
/// difference functional over the shrinking interval `[-T + t, T - t]`.
pub fn stability_study(data: &InitialData, delta: f64, direction: &InitialData, grid: &GridSpec, m: f64) -> Result<StabilityTrace> {
    if !(delta >= 0.0) {
        return Err(Error::param("delta", format!("must be >= 0, got {delta}")));
    }
    let t_end = grid.horizon;
    let (Some(left), Some(right)) = (grid.node_at(-t_end), grid.node_at(t_end)) else {
        return Err(Error::Geometry(format!("[-T, T] = [-{t_end}, {t_end}] must lie on window nodes")));
    };
    let perturbed = data.perturbed(direction, delta)?;
    let cfg = SpinorStepConfig::new(m)?;
    let mut base = Simulation::new(data, grid, cfg)?;
    let mut other = Simulation::new(&perturbed, grid, cfg)?;

    let functional_at = |a: &Simulation, b: &Simulation, k: usize| -> f64 {
        let (lo, hi) = (left + k, right - k);
        if hi <= lo {
            return 0.0;
        }
        let (sa, sb) = (a.spinor(), b.spinor());
        let w = |i: usize| (sa.u[i] - sb.u[i]).norm_sqr() + (sa.v[i] - sb.v[i]).norm_sqr();
        let mut acc = 0.5 * (w(lo) + w(hi));
        for i in lo + 1..hi {
            acc += w(i);
        }
        acc * grid.dx
    };

    let mut times = vec![0.0];
    let mut functional = vec![functional_at(&base, &other, 0)];
    for k in 1..=grid.nt {
        base.advance()?;
        other.advance()?;
        times.push(grid.t(k));
        functional.push(functional_at(&base, &other, k));
    }
    let (fitted_c, fitted_offset) = fit_envelope(&times, &functional);
    let env = |t: f64| (functional[0] + fitted_offset) * (fitted_c * t).exp();
    let margin_over = |pred: &dyn Fn(f64) -> bool| {
        times
            .iter()
            .zip(&functional)
            .filter(|(t, _)| pred(**t))
            .map(|(&t, &i)| i - env(t))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let envelope_margin = margin_over(&|_| true);
    let holdout_margin = margin_over(&|t| t > 0.5 * t_end + 1e-12);
    Ok(StabilityTrace {
        times,
        functional,
        gauge_mismatch: gauge_mismatch(data, &perturbed, grid),
        fitted_c,
        fitted_offset,
        envelope_margin,
        holdout_margin: if holdout_margin.is_finite() { holdout_margin } else { 0.0 },
    })
}
