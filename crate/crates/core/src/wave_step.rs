//! `A+'' - A+_xx = |v|^2`, `A-'' - A-_xx = |u|^2` by the unit-CFL leapfrog,
//! plus a direct d'Alembert evaluation used as an independent check.

use crate::error::{check_len, Error, Result};
use crate::field::{GaugeField, SpinorField};
use crate::grid::{Boundary, GridSpec};
use crate::initial_data::InitialData;

/// Level 1 from a second-order Taylor start:
/// `A = a0 + dt*a1 + dt^2/2 * (a0_xx + source0)`.
///
/// Zero-inflow edges drop the `a0_xx` term (linear extrapolation past the
/// window).
pub fn first_step(a0: &[f64], a1: &[f64], source0: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    check_len(grid.nx, a0.len())?;
    check_len(grid.nx, a1.len())?;
    check_len(grid.nx, source0.len())?;
    let h = grid.dt;
    let out = (0..grid.nx)
        .map(|i| {
            let curvature = match (grid.left(i), grid.right(i)) {
                // h^2/2 * Dxx a0
                (Some(l), Some(r)) => 0.5 * (a0[l] + a0[r]) - a0[i],
                _ => 0.0,
            };
            a0[i] + h * a1[i] + curvature + 0.5 * h * h * source0[i]
        })
        .collect();
    Ok(out)
}

/// `next[i] = curr[i+1] + curr[i-1] - prev[i] + dt^2 * source[i]`.
///
/// Zero-inflow edges copy the inward neighbour (`next[0] = curr[1]`), which
/// lets left-moving waves leave through the left edge and brings nothing in.
pub fn leapfrog_wave(prev: &[f64], curr: &[f64], source: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    check_len(grid.nx, prev.len())?;
    check_len(grid.nx, curr.len())?;
    check_len(grid.nx, source.len())?;
    let n = grid.nx;
    let h2 = grid.dt * grid.dt;
    let mut next = vec![0.0; n];
    for i in 1..n - 1 {
        next[i] = curr[i + 1] + curr[i - 1] - prev[i] + h2 * source[i];
    }
    match grid.boundary {
        Boundary::Periodic => {
            next[0] = curr[1] + curr[n - 1] - prev[0] + h2 * source[0];
            next[n - 1] = curr[0] + curr[n - 2] - prev[n - 1] + h2 * source[n - 1];
        }
        Boundary::ZeroInflow => {
            next[0] = curr[1];
            next[n - 1] = curr[n - 2];
        }
    }
    Ok(next)
}

/// `|v|^2` drives `A+`, `|u|^2` drives `A-`.
pub fn sources(spinor: &SpinorField) -> (Vec<f64>, Vec<f64>) {
    let plus = spinor.v.iter().map(|z| z.norm_sqr()).collect();
    let minus = spinor.u.iter().map(|z| z.norm_sqr()).collect();
    (plus, minus)
}

/// Gauge state at levels 0 and 1.
pub fn initial_gauge(data: &InitialData, grid: &GridSpec) -> Result<GaugeField> {
    data.validate(grid)?;
    let (src_plus, src_minus) = sources(&data.spinor());
    let plus1 = first_step(&data.aplus0, &data.aplus1, &src_plus, grid)?;
    let minus1 = first_step(&data.aminus0, &data.aminus1, &src_minus, grid)?;
    GaugeField::new(data.aplus0.clone(), data.aminus0.clone(), plus1, minus1, 1)
}

/// Shift the two-level state up by one, using the spinor at the current level
/// as the source.
pub fn advance_gauge(gauge: &GaugeField, spinor: &SpinorField, grid: &GridSpec) -> Result<GaugeField> {
    if spinor.level != gauge.level {
        return Err(Error::LevelMismatch {
            expected: gauge.level,
            found: spinor.level,
        });
    }
    let (src_plus, src_minus) = sources(spinor);
    let plus = leapfrog_wave(&gauge.aplus_prev, &gauge.aplus_curr, &src_plus, grid)?;
    let minus = leapfrog_wave(&gauge.aminus_prev, &gauge.aminus_curr, &src_minus, grid)?;
    Ok(GaugeField {
        aplus_prev: gauge.aplus_curr.clone(),
        aminus_prev: gauge.aminus_curr.clone(),
        aplus_curr: plus,
        aminus_curr: minus,
        level: gauge.level + 1,
    })
}

/// Quadrature used by [`dalembert_eval`] for the `a1` and source integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeQuadrature {
    /// Midpoint rule on the diamond tiling of the cone: `a1` at every other
    /// node, sources at the lattice points of one parity. This is the
    /// telescoped leapfrog recurrence, so it reproduces the stepper to rounding.
    Lattice,
    /// Trapezoid on every node: slice endpoints weighted 1/2, level 0 and the
    /// apex level weighted 1/2 in time. Agrees with the stepper to O(dx^2).
    Trapezoid,
}

/// `A(x, t) = 1/2 [a0(x+t) + a0(x-t)] + 1/2 int_{x-t}^{x+t} a1
///           + 1/2 iint_{cone} source`
/// at node `node`, level `level`. `source_history[k]` is the source at level
/// `k`; levels `0..level` are needed.
pub fn dalembert_eval(
    node: usize,
    level: usize,
    a0: &[f64],
    a1: &[f64],
    source_history: &[Vec<f64>],
    grid: &GridSpec,
    quadrature: ConeQuadrature,
) -> Result<f64> {
    check_len(grid.nx, a0.len())?;
    check_len(grid.nx, a1.len())?;
    if node < level || node + level >= grid.nx {
        return Err(Error::Geometry(format!(
            "backward cone of ({node}, {level}) exits the window"
        )));
    }
    if source_history.len() < level {
        return Err(Error::param(
            "source_history",
            format!("need {level} levels, got {}", source_history.len()),
        ));
    }
    for s in &source_history[..level] {
        check_len(grid.nx, s.len())?;
    }
    if level == 0 {
        return Ok(a0[node]);
    }
    let (i, n) = (node, level);
    let h = grid.dx;
    let ends = 0.5 * (a0[i - n] + a0[i + n]);

    let value = match quadrature {
        ConeQuadrature::Lattice => {
            // parity sums: j = i-r, i-r+2, ..., i+r
            let parity_sum = |f: &[f64], r: usize| -> f64 {
                let mut acc = 0.0;
                let mut j = i - r;
                loop {
                    acc += f[j];
                    if j >= i + r {
                        break;
                    }
                    j += 2;
                }
                acc
            };
            let mut src = 0.5 * parity_sum(&source_history[0], n - 1);
            for (k, s) in source_history.iter().enumerate().take(n).skip(1) {
                src += parity_sum(s, n - 1 - k);
            }
            ends + h * parity_sum(a1, n - 1) + h * h * src
        }
        ConeQuadrature::Trapezoid => {
            let trap = |f: &[f64], lo: usize, hi: usize| -> f64 {
                if hi == lo {
                    return 0.0;
                }
                let mut acc = 0.5 * (f[lo] + f[hi]);
                for x in &f[lo + 1..hi] {
                    acc += x;
                }
                acc * h
            };
            let mut src = 0.5 * trap(&source_history[0], i - n, i + n);
            for (k, s) in source_history.iter().enumerate().take(n).skip(1) {
                src += trap(s, i - (n - k), i + (n - k));
            }
            // the apex slice has zero width
            ends + 0.5 * trap(a1, i - n, i + n) + 0.5 * src * h
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use num_complex::Complex64;

    fn grid(boundary: Boundary) -> GridSpec {
        make_grid(-2.0, 2.0, 1.0 / 16.0, 1.0, boundary).unwrap()
    }

    #[test]
    fn first_step_examples() {
        let g = grid(Boundary::ZeroInflow);
        let n = g.nx;
        let out = first_step(&vec![3.0; n], &vec![0.0; n], &vec![0.0; n], &g).unwrap();
        assert!(out.iter().all(|&a| a == 3.0));

        let out = first_step(&vec![0.0; n], &vec![2.0; n], &vec![0.0; n], &g).unwrap();
        assert!(out.iter().all(|&a| a == 2.0 * g.dt));

        let out = first_step(&vec![0.0; n], &vec![0.0; n], &vec![5.0; n], &g).unwrap();
        assert!(out.iter().all(|&a| (a - 5.0 * g.dt * g.dt / 2.0).abs() < 1e-16));

        assert!(first_step(&[0.0], &vec![0.0; n], &vec![0.0; n], &g).is_err());
    }

    #[test]
    fn leapfrog_constant() {
        for b in [Boundary::ZeroInflow, Boundary::Periodic] {
            let g = grid(b);
            let c = vec![1.5; g.nx];
            let next = leapfrog_wave(&c, &c, &vec![0.0; g.nx], &g).unwrap();
            assert!(next.iter().all(|&a| a == 1.5));
        }
    }

    #[test]
    fn leapfrog_constant_source_grows_quadratically() {
        // A = s t^2 / 2 solves the forced equation; the recurrence reproduces it
        // exactly away from the edges (induction: (k+1)^2 + (k-1)^2 - 2k^2 = 2).
        let g = grid(Boundary::ZeroInflow);
        let s = 0.75;
        let n = g.nx;
        let src = vec![s; n];
        let mut prev = vec![0.0; n];
        let mut curr = first_step(&vec![0.0; n], &vec![0.0; n], &src, &g).unwrap();
        for k in 1..g.nt {
            let next = leapfrog_wave(&prev, &curr, &src, &g).unwrap();
            prev = curr;
            curr = next;
            let t = g.t(k + 1);
            for (i, &a) in curr.iter().enumerate().take(n - 1 - (k + 1)).skip(k + 1) {
                assert!((a - s * t * t / 2.0).abs() < 1e-13, "node {i} level {}", k + 1);
            }
        }
    }

    #[test]
    fn leapfrog_traveling_wave() {
        // a0 = f, a1 = -f' gives f(x - t); with unit CFL this is a node shift.
        let g = make_grid(-4.0, 4.0, 1.0 / 32.0, 1.0, Boundary::ZeroInflow).unwrap();
        let f = |x: f64| (-4.0 * x * x).exp();
        let df = |x: f64| -8.0 * x * f(x);
        let a0: Vec<f64> = g.coordinates().iter().map(|&x| f(x)).collect();
        let a1: Vec<f64> = g.coordinates().iter().map(|&x| -df(x)).collect();
        let zero = vec![0.0; g.nx];
        let mut prev = a0.clone();
        let mut curr = first_step(&a0, &a1, &zero, &g).unwrap();
        for _ in 1..g.nt {
            let next = leapfrog_wave(&prev, &curr, &zero, &g).unwrap();
            prev = curr;
            curr = next;
        }
        let t = g.t(g.nt);
        let err = (0..g.nx).map(|i| (curr[i] - f(g.x(i) - t)).abs()).fold(0.0, f64::max);
        // Taylor start is the only approximation: O(dx^2) shape error
        assert!(err < 2e-3, "{err}");
        // the leapfrog itself transports level 1 exactly: compare against the
        // node shift of the discrete start
        let d = dalembert_eval(g.nx / 2, g.nt, &a0, &a1, &vec![zero.clone(); g.nt], &g, ConeQuadrature::Lattice).unwrap();
        assert!((d - curr[g.nx / 2]).abs() < 1e-13);
    }

    #[test]
    fn dalembert_trivial() {
        let g = grid(Boundary::ZeroInflow);
        let n = g.nx;
        let zero = vec![0.0; n];
        let hist = vec![zero.clone(); 8];
        for q in [ConeQuadrature::Lattice, ConeQuadrature::Trapezoid] {
            assert_eq!(dalembert_eval(30, 8, &zero, &zero, &hist, &g, q).unwrap(), 0.0);
            let c = vec![2.5; n];
            assert!((dalembert_eval(30, 8, &c, &zero, &hist, &g, q).unwrap() - 2.5).abs() < 1e-15);
            assert!(dalembert_eval(3, 8, &c, &zero, &hist, &g, q).is_err());
            assert!(dalembert_eval(30, 8, &c, &zero, &hist[..4], &g, q).is_err());
        }
    }

    #[test]
    fn dalembert_matches_leapfrog_with_source() {
        let g = make_grid(-2.0, 2.0, 1.0 / 32.0, 1.0, Boundary::ZeroInflow).unwrap();
        let a0: Vec<f64> = g.coordinates().iter().map(|&x| (x * 1.3).sin()).collect();
        let a1: Vec<f64> = g.coordinates().iter().map(|&x| (-x * x).exp()).collect();
        let src = |k: usize| -> Vec<f64> {
            g.coordinates().iter().map(|&x| (x - 0.2 * g.t(k)).cos().powi(2)).collect()
        };
        let history: Vec<Vec<f64>> = (0..=g.nt).map(src).collect();
        let mut levels = vec![a0.clone(), first_step(&a0, &a1, &history[0], &g).unwrap()];
        for k in 1..g.nt {
            let next = leapfrog_wave(&levels[k - 1], &levels[k], &history[k], &g).unwrap();
            levels.push(next);
        }
        let i = g.nx / 2;
        for k in 0..=g.nt {
            let d = dalembert_eval(i, k, &a0, &a1, &history, &g, ConeQuadrature::Lattice).unwrap();
            assert!((d - levels[k][i]).abs() < 1e-12, "level {k}");
            let t = dalembert_eval(i, k, &a0, &a1, &history, &g, ConeQuadrature::Trapezoid).unwrap();
            assert!((t - levels[k][i]).abs() < 1e-2, "level {k}");
        }
    }

    #[test]
    fn advance_gauge_sources() {
        let g = grid(Boundary::ZeroInflow);
        let n = g.nx;
        let mut data = InitialData::zeros(n);
        data.aplus0 = vec![1.0; n];
        data.aminus0 = vec![-2.0; n];
        let mut gauge = initial_gauge(&data, &g).unwrap();
        for k in 1..5 {
            gauge = advance_gauge(&gauge, &SpinorField::zeros(n, k), &g).unwrap();
            assert!(gauge.aplus_curr.iter().all(|&a| a == 1.0));
            assert!(gauge.aminus_curr.iter().all(|&a| a == -2.0));
        }
        assert!(advance_gauge(&gauge, &SpinorField::zeros(n, 1), &g).is_err());

        // |v|^2 box drives A+ only
        let mut s = SpinorField::zeros(n, 1);
        for i in n / 2 - 4..n / 2 + 4 {
            s.v[i] = Complex64::new(1.0, 0.0);
        }
        let gauge = initial_gauge(&InitialData::zeros(n), &g).unwrap();
        let next = advance_gauge(&gauge, &s, &g).unwrap();
        assert!(next.aplus_curr.iter().any(|&a| a > 0.0));
        assert!(next.aminus_curr.iter().all(|&a| a == 0.0));
    }
}
