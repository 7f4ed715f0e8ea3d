//! Initial data `(u0, v0, a+^0, a+^1, a-^0, a-^1)`: conversion from the
//! covariant `(Psi, A_mu)` form, presets, mollification and a-priori bounds.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::{discrete_charge, SpinorField};
use crate::grid::{Boundary, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub u0: Vec<Complex64>,
    pub v0: Vec<Complex64>,
    pub aplus0: Vec<f64>,
    pub aplus1: Vec<f64>,
    pub aminus0: Vec<f64>,
    pub aminus1: Vec<f64>,
}

/// Data in the original variables: spinor components and the two potentials
/// `A0`, `A1` with their time derivatives at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantData {
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
    /// `A0(x, 0)`
    pub a_time: Vec<f64>,
    /// `A1(x, 0)`
    pub a_space: Vec<f64>,
    /// `dA0/dt(x, 0)`
    pub a_time_rate: Vec<f64>,
    /// `dA1/dt(x, 0)`
    pub a_space_rate: Vec<f64>,
}

/// Result of [`to_psi`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovariantFields {
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
    pub a_time: Vec<f64>,
    pub a_space: Vec<f64>,
}

/// `C0` bounds the charge of the data, `C1` is the sum of the four gauge-data
/// sup norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataBounds {
    pub c0: f64,
    pub c1: f64,
}

impl InitialData {
    pub fn zeros(nx: usize) -> Self {
        Self {
            u0: vec![Complex64::new(0.0, 0.0); nx],
            v0: vec![Complex64::new(0.0, 0.0); nx],
            aplus0: vec![0.0; nx],
            aplus1: vec![0.0; nx],
            aminus0: vec![0.0; nx],
            aminus1: vec![0.0; nx],
        }
    }

    pub fn len(&self) -> usize {
        self.u0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u0.is_empty()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for n in [
            self.u0.len(),
            self.v0.len(),
            self.aplus0.len(),
            self.aplus1.len(),
            self.aminus0.len(),
            self.aminus1.len(),
        ] {
            check_len(grid.nx, n)?;
        }
        let finite = self.u0.iter().chain(&self.v0).all(|z| z.re.is_finite() && z.im.is_finite())
            && self.gauge_arrays().iter().all(|a| a.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::param("initial data", "contains non-finite entries"));
        }
        Ok(())
    }

    pub fn spinor(&self) -> SpinorField {
        SpinorField {
            u: self.u0.clone(),
            v: self.v0.clone(),
            level: 0,
        }
    }

    pub fn charge(&self, grid: &GridSpec) -> f64 {
        discrete_charge(&self.u0, &self.v0, grid.dx)
    }

    fn gauge_arrays(&self) -> [&Vec<f64>; 4] {
        [&self.aplus0, &self.aplus1, &self.aminus0, &self.aminus1]
    }

    /// `self + scale * direction`, component by component.
    pub fn perturbed(&self, direction: &InitialData, scale: f64) -> Result<InitialData> {
        check_len(self.len(), direction.len())?;
        let c = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x + y * scale).collect();
        let r = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y * scale).collect();
        Ok(InitialData {
            u0: c(&self.u0, &direction.u0),
            v0: c(&self.v0, &direction.v0),
            aplus0: r(&self.aplus0, &direction.aplus0),
            aplus1: r(&self.aplus1, &direction.aplus1),
            aminus0: r(&self.aminus0, &direction.aminus0),
            aminus1: r(&self.aminus1, &direction.aminus1),
        })
    }

    /// Multiply both spinor components by `e^{i theta}`.
    pub fn with_global_phase(&self, theta: f64) -> InitialData {
        let p = Complex64::from_polar(1.0, theta);
        InitialData {
            u0: self.u0.iter().map(|z| z * p).collect(),
            v0: self.v0.iter().map(|z| z * p).collect(),
            ..self.clone()
        }
    }
}

pub fn from_psi(data: &CovariantData) -> Result<InitialData> {
    let n = data.psi1.len();
    for len in [
        data.psi2.len(),
        data.a_time.len(),
        data.a_space.len(),
        data.a_time_rate.len(),
        data.a_space_rate.len(),
    ] {
        check_len(n, len)?;
    }
    let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(InitialData {
        u0: data.psi1.iter().zip(&data.psi2).map(|(a, b)| a + b).collect(),
        v0: data.psi1.iter().zip(&data.psi2).map(|(a, b)| a - b).collect(),
        aplus0: sum(&data.a_time, &data.a_space),
        aminus0: diff(&data.a_time, &data.a_space),
        aplus1: sum(&data.a_time_rate, &data.a_space_rate),
        aminus1: diff(&data.a_time_rate, &data.a_space_rate),
    })
}

pub fn to_psi(u: &[Complex64], v: &[Complex64], aplus: &[f64], aminus: &[f64]) -> Result<CovariantFields> {
    let n = u.len();
    for len in [v.len(), aplus.len(), aminus.len()] {
        check_len(n, len)?;
    }
    Ok(CovariantFields {
        psi1: u.iter().zip(v).map(|(a, b)| (a + b) * 0.5).collect(),
        psi2: u.iter().zip(v).map(|(a, b)| (a - b) * 0.5).collect(),
        a_time: aplus.iter().zip(aminus).map(|(p, m)| 0.5 * (p + m)).collect(),
        a_space: aplus.iter().zip(aminus).map(|(p, m)| 0.5 * (p - m)).collect(),
    })
}

/// Per-node `dA0/dt(x,0) - d/dx A1(x,0)`: centered differences inside,
/// second-order one-sided differences at the two edge nodes.
pub fn constraint_residual_profile(data: &InitialData, grid: &GridSpec) -> Result<Vec<f64>> {
    if grid.nx < 3 {
        return Err(Error::InvalidGrid("constraint residual needs nx >= 3".into()));
    }
    data.validate(grid)?;
    let n = grid.nx;
    let rate: Vec<f64> = data.aplus1.iter().zip(&data.aminus1).map(|(p, m)| 0.5 * (p + m)).collect();
    let a1: Vec<f64> = data.aplus0.iter().zip(&data.aminus0).map(|(p, m)| 0.5 * (p - m)).collect();
    let h = grid.dx;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = rate[i] - (a1[i + 1] - a1[i - 1]) / (2.0 * h);
    }
    out[0] = rate[0] - (-3.0 * a1[0] + 4.0 * a1[1] - a1[2]) / (2.0 * h);
    out[n - 1] = rate[n - 1] - (3.0 * a1[n - 1] - 4.0 * a1[n - 2] + a1[n - 3]) / (2.0 * h);
    Ok(out)
}

/// Largest `|dA0/dt - dA1/dx|` over interior nodes at `t = 0`.
pub fn constraint_residual(data: &InitialData, grid: &GridSpec) -> Result<f64> {
    let r = constraint_residual_profile(data, grid)?;
    Ok(r[1..r.len() - 1].iter().fold(0.0, |m, x| m.max(x.abs())))
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn compute_bounds(data: &InitialData, grid: &GridSpec) -> DataBounds {
    DataBounds {
        c0: data.charge(grid),
        c1: data.gauge_arrays().iter().map(|a| sup_norm(a)).sum(),
    }
}

// ---------------------------------------------------------------------------
// Mollification

/// `exp(-1 / (1 - s^2))` on `|s| < 1`, zero outside.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Smooth step: 0 for `s <= 0`, 1 for `s >= 1`.
fn smooth_step(s: f64) -> f64 {
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let a = f(s);
    let b = f(1.0 - s);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

fn mollifier_weights(n: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::param("n", "mollification index must be >= 1"));
    }
    let radius = 1.0 / n as f64;
    if radius < 2.0 * grid.dx {
        return Err(Error::param(
            "n",
            format!("kernel width 1/{n} is below 2*dx = {}", 2.0 * grid.dx),
        ));
    }
    let half = (radius / grid.dx).floor() as usize;
    let mut w: Vec<f64> = (0..=2 * half)
        .map(|j| bump((j as f64 - half as f64) * grid.dx / radius))
        .collect();
    let mass: f64 = w.iter().sum();
    for x in &mut w {
        *x /= mass;
    }
    Ok(w)
}

fn convolve<T>(f: &[T], w: &[f64], grid: &GridSpec) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let half = (w.len() / 2) as isize;
    (0..f.len())
        .map(|i| {
            let mut acc = T::default();
            for (j, &wj) in w.iter().enumerate() {
                if let Some(src) = grid.shifted(i, j as isize - half) {
                    acc = acc + f[src] * wj;
                }
            }
            acc
        })
        .collect()
}

/// Smooth the data with a unit-mass bump of radius `1/n`, then taper it to
/// zero near the window edges (zero-inflow windows only). The taper equals 1
/// at distance `>= 2/n` from the edges and vanishes within `1/n`.
pub fn mollify(data: &InitialData, n: usize, grid: &GridSpec) -> Result<InitialData> {
    data.validate(grid)?;
    let w = mollifier_weights(n, grid)?;
    let radius = 1.0 / n as f64;
    let cutoff: Vec<f64> = (0..grid.nx)
        .map(|i| match grid.boundary {
            Boundary::Periodic => 1.0,
            Boundary::ZeroInflow => {
                let x = grid.x(i);
                let d = (x - grid.xmin).min(grid.xmax - x);
                smooth_step((d - radius) / radius)
            }
        })
        .collect();
    let cplx = |f: &[Complex64]| -> Vec<Complex64> {
        convolve(f, &w, grid).into_iter().zip(&cutoff).map(|(z, c)| z * *c).collect()
    };
    let real = |f: &[f64]| -> Vec<f64> {
        convolve(f, &w, grid).into_iter().zip(&cutoff).map(|(z, c)| z * c).collect()
    };
    Ok(InitialData {
        u0: cplx(&data.u0),
        v0: cplx(&data.v0),
        aplus0: real(&data.aplus0),
        aplus1: real(&data.aplus1),
        aminus0: real(&data.aminus0),
        aminus1: real(&data.aminus1),
    })
}

/// Discrete `L^2` distance `sqrt(sum (|du|^2 + |dv|^2) dx)` between the spinor parts.
pub fn spinor_l2_distance(a: &InitialData, b: &InitialData, grid: &GridSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len().min(b.len()) {
        acc += (a.u0[i] - b.u0[i]).norm_sqr() + (a.v0[i] - b.v0[i]).norm_sqr();
    }
    (acc * grid.dx).sqrt()
}

// ---------------------------------------------------------------------------
// Presets

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    Zero,
    GaussianPacket,
    Box,
    Uniform,
}

impl std::str::FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PresetKind::Zero),
            "gaussian_packet" | "gaussian" => Ok(PresetKind::GaussianPacket),
            "box" => Ok(PresetKind::Box),
            "uniform" => Ok(PresetKind::Uniform),
            other => Err(Error::param("preset", format!("unknown preset `{other}`"))),
        }
    }
}

/// Shape parameters shared by all presets; each preset reads the ones it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    /// Peak of `u0` (gaussian, box) or its constant value (uniform).
    pub amplitude_u: f64,
    /// Same for `v0`.
    pub amplitude_v: f64,
    pub center: f64,
    /// Gaussian standard deviation, or the box width.
    pub width: f64,
    /// Wave number of the phase `e^{i k (x - center)}` on the spinor.
    pub momentum: f64,
    /// Peak of the gauge potential `A0(x, 0)`.
    pub gauge_amplitude: f64,
    pub gauge_width: f64,
    /// Choose `dA1/dt(x, 0)` so that Gauss's law holds at `t = 0`, which
    /// together with `dA0/dt = dA1/dx` keeps the Lorentz gauge for all time.
    pub gauss_law: bool,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            amplitude_u: 1.0,
            amplitude_v: 0.0,
            center: 0.0,
            width: 0.5,
            momentum: 0.0,
            gauge_amplitude: 0.0,
            gauge_width: 1.0,
            gauss_law: false,
        }
    }
}

/// Sample a preset on the grid.
///
/// The gauge part is `A0(x,0) = g*H(x)`, `A1(x,0) = g*H(x)/2` with `H` a
/// Gaussian of width `gauge_width`, and `dA0/dt = dA1/dx`, so the data meet
/// the initial Lorentz constraint exactly. Uniform data carry constant `A0 = g`.
pub fn preset(kind: PresetKind, params: &PresetParams, grid: &GridSpec) -> Result<InitialData> {
    let p = params;
    for (name, value) in [
        ("amplitude_u", p.amplitude_u),
        ("amplitude_v", p.amplitude_v),
        ("center", p.center),
        ("momentum", p.momentum),
        ("gauge_amplitude", p.gauge_amplitude),
    ] {
        if !value.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    if kind != PresetKind::Zero && !(p.width > 0.0) {
        return Err(Error::param("width", "must be positive"));
    }
    if p.gauge_amplitude != 0.0 && !(p.gauge_width > 0.0) {
        return Err(Error::param("gauge_width", "must be positive"));
    }
    let nx = grid.nx;
    let zero = Complex64::new(0.0, 0.0);
    let xs = grid.coordinates();

    let (u0, v0): (Vec<Complex64>, Vec<Complex64>) = match kind {
        PresetKind::Zero => (vec![zero; nx], vec![zero; nx]),
        PresetKind::GaussianPacket => xs
            .iter()
            .map(|&x| {
                let s = x - p.center;
                let env = (-s * s / (2.0 * p.width * p.width)).exp();
                let phase = Complex64::from_polar(1.0, p.momentum * s);
                (phase * (p.amplitude_u * env), phase * (p.amplitude_v * env))
            })
            .unzip(),
        PresetKind::Box => xs
            .iter()
            .map(|&x| {
                let inside = (x - p.center).abs() <= 0.5 * p.width * (1.0 + 1e-12);
                if inside {
                    let phase = Complex64::from_polar(1.0, p.momentum * (x - p.center));
                    (phase * p.amplitude_u, phase * p.amplitude_v)
                } else {
                    (zero, zero)
                }
            })
            .unzip(),
        PresetKind::Uniform => (
            vec![Complex64::new(p.amplitude_u, 0.0); nx],
            vec![Complex64::new(p.amplitude_v, 0.0); nx],
        ),
    };

    let g = if kind == PresetKind::Zero { 0.0 } else { p.gauge_amplitude };
    let (a_time, a_space, a_time_rate, mut a_space_rate) = if kind == PresetKind::Uniform {
        (vec![g; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx])
    } else {
        let gw = p.gauge_width;
        let h = |x: f64| (-(x - p.center).powi(2) / (2.0 * gw * gw)).exp();
        let dh = |x: f64| -(x - p.center) / (gw * gw) * h(x);
        (
            xs.iter().map(|&x| g * h(x)).collect::<Vec<_>>(),
            xs.iter().map(|&x| 0.5 * g * h(x)).collect::<Vec<_>>(),
            xs.iter().map(|&x| 0.5 * g * dh(x)).collect::<Vec<_>>(),
            if p.gauss_law {
                xs.iter().map(|&x| g * dh(x)).collect::<Vec<_>>()
            } else {
                vec![0.0; nx]
            },
        )
    };

    if p.gauss_law && kind != PresetKind::Uniform {
        // dE/dx = rho/2 with rho = |u0|^2 + |v0|^2; split the far field evenly.
        let rho: Vec<f64> = u0.iter().zip(&v0).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        let mut running = vec![0.0; nx];
        for i in 1..nx {
            running[i] = running[i - 1] + 0.5 * (rho[i - 1] + rho[i]) * grid.dx;
        }
        let total = running[nx - 1];
        for i in 0..nx {
            a_space_rate[i] += 0.5 * running[i] - 0.25 * total;
        }
    }

    let data = from_psi(&CovariantData {
        psi1: u0.iter().zip(&v0).map(|(u, v)| (u + v) * 0.5).collect(),
        psi2: u0.iter().zip(&v0).map(|(u, v)| (u - v) * 0.5).collect(),
        a_time,
        a_space,
        a_time_rate,
        a_space_rate,
    })?;
    // keep the spinor exactly as sampled rather than round-tripping it
    Ok(InitialData { u0, v0, ..data })
}

// ---------------------------------------------------------------------------
// CSV

const CSV_COLUMNS: [&str; 9] = [
    "x", "re_u0", "im_u0", "re_v0", "im_v0", "aplus0", "aplus1", "aminus0", "aminus1",
];

/// Read data sampled on `grid` from a CSV file with a header row and the
/// columns `x, re_u0, im_u0, re_v0, im_v0, aplus0, aplus1, aminus0, aminus1`.
pub fn read_csv(path: &Path, grid: &GridSpec) -> Result<InitialData> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let mut data = InitialData::zeros(0);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != CSV_COLUMNS.len() {
            return Err(Error::param(
                "initial_csv",
                format!("row {row}: expected {} columns, found {}", CSV_COLUMNS.len(), rec.len()),
            ));
        }
        let mut vals = [0.0; 9];
        for (k, field) in rec.iter().enumerate() {
            vals[k] = field.parse::<f64>().map_err(|e| {
                Error::param("initial_csv", format!("row {row}, column {}: {e}", CSV_COLUMNS[k]))
            })?;
        }
        if row >= grid.nx || (vals[0] - grid.x(row)).abs() > 1e-9 * grid.dx.max(1.0) {
            return Err(Error::param(
                "initial_csv",
                format!("row {row}: x = {} does not match the grid", vals[0]),
            ));
        }
        data.u0.push(Complex64::new(vals[1], vals[2]));
        data.v0.push(Complex64::new(vals[3], vals[4]));
        data.aplus0.push(vals[5]);
        data.aplus1.push(vals[6]);
        data.aminus0.push(vals[7]);
        data.aminus1.push(vals[8]);
    }
    data.validate(grid)?;
    Ok(data)
}

pub fn write_csv(path: &Path, data: &InitialData, grid: &GridSpec) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_COLUMNS)?;
    for i in 0..data.len() {
        w.write_record(
            [
                grid.x(i),
                data.u0[i].re,
                data.u0[i].im,
                data.v0[i].re,
                data.v0[i].im,
                data.aplus0[i],
                data.aplus1[i],
                data.aminus0[i],
                data.aminus1[i],
            ]
            .iter()
            .map(|v| format!("{v:e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}
