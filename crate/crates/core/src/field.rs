//! Field containers shared by the steppers and the diagnostics.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// Spinor pair `(u, v)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub level: usize,
}

impl SpinorField {
    pub fn new(u: Vec<Complex64>, v: Vec<Complex64>, level: usize) -> Result<Self> {
        check_len(u.len(), v.len())?;
        Ok(Self { u, v, level })
    }

    pub fn zeros(nx: usize, level: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); nx],
            v: vec![Complex64::new(0.0, 0.0); nx],
            level,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `|u|^2 + |v|^2` per node.
    pub fn density(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(u, v)| u.norm_sqr() + v.norm_sqr()).collect()
    }

    /// `|u|^2 - |v|^2` per node.
    pub fn flux(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(u, v)| u.norm_sqr() - v.norm_sqr()).collect()
    }
}

/// `sum_i (|u_i|^2 + |v_i|^2) dx`, summed left to right.
pub fn discrete_charge(u: &[Complex64], v: &[Complex64], dx: f64) -> f64 {
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        acc += a.norm_sqr() + b.norm_sqr();
    }
    acc * dx
}

/// Two consecutive levels of `(A+, A-)`: `prev` at `level - 1`, `curr` at `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    pub aplus_prev: Vec<f64>,
    pub aminus_prev: Vec<f64>,
    pub aplus_curr: Vec<f64>,
    pub aminus_curr: Vec<f64>,
    /// Level of the `curr` arrays; always at least 1.
    pub level: usize,
}

impl GaugeField {
    pub fn new(
        aplus_prev: Vec<f64>,
        aminus_prev: Vec<f64>,
        aplus_curr: Vec<f64>,
        aminus_curr: Vec<f64>,
        level: usize,
    ) -> Result<Self> {
        let n = aplus_curr.len();
        for len in [aplus_prev.len(), aminus_prev.len(), aminus_curr.len()] {
            check_len(n, len)?;
        }
        if level == 0 {
            return Err(Error::param("level", "the current gauge level must be >= 1"));
        }
        Ok(Self {
            aplus_prev,
            aminus_prev,
            aplus_curr,
            aminus_curr,
            level,
        })
    }

    pub fn len(&self) -> usize {
        self.aplus_curr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aplus_curr.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        [&self.aplus_prev, &self.aminus_prev, &self.aplus_curr, &self.aminus_curr]
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
    }
}
