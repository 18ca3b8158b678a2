//! Truncated real Fourier series in time.
//!
//! A series of period `T` with truncation `N` is
//! `f(t) = a_0 + sum_{j=1..N} a_j cos(j w t) + b_j sin(j w t)` with
//! `w = 2 pi / T`. On each mode block `(a_j, b_j)` the reflection, shift,
//! parity projections and jump operator act as 2x2 matrices, so all of them
//! are exact on the retained modes.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTimeSeries {
    period: f64,
    /// Cosine coefficients `a_0..=a_N`.
    a: Vec<f64>,
    /// Sine coefficients with `b[0]` unused and kept at zero.
    b: Vec<f64>,
}

/// Coefficient pair of one mode in the `(cos, sin)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeVector {
    pub k: usize,
    pub coeffs: Vector2<f64>,
}

impl FourierTimeSeries {
    pub fn zeros(period: f64, n: usize) -> Self {
        assert!(period > 0.0, "period must be positive");
        Self {
            period,
            a: vec![0.0; n + 1],
            b: vec![0.0; n + 1],
        }
    }

    /// Builds a series from cosine coefficients `a_0..=a_N` and sine
    /// coefficients `b_1..=b_N`.
    pub fn from_coefficients(period: f64, a: Vec<f64>, b_from_one: Vec<f64>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Argument(format!("period must be positive, got {period}")));
        }
        if a.is_empty() || b_from_one.len() + 1 != a.len() {
            return Err(Error::Argument(format!(
                "need N+1 cosine and N sine coefficients, got {} and {}",
                a.len(),
                b_from_one.len()
            )));
        }
        let mut b = Vec::with_capacity(a.len());
        b.push(0.0);
        b.extend(b_from_one);
        Ok(Self { period, a, b })
    }

    pub fn constant(period: f64, n: usize, value: f64) -> Self {
        let mut s = Self::zeros(period, n);
        s.a[0] = value;
        s
    }

    /// `amp * cos(k w t)`.
    pub fn cosine(period: f64, n: usize, k: usize, amp: f64) -> Self {
        let mut s = Self::zeros(period, n);
        s.a[k] = amp;
        s
    }

    /// `amp * sin(k w t)`.
    pub fn sine(period: f64, n: usize, k: usize, amp: f64) -> Self {
        assert!(k >= 1, "sine mode index starts at 1");
        let mut s = Self::zeros(period, n);
        s.b[k] = amp;
        s
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Truncation order `N`.
    pub fn n_modes(&self) -> usize {
        self.a.len() - 1
    }

    /// Base angular frequency `2 pi / T`.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn cos_coeff(&self, j: usize) -> f64 {
        self.a.get(j).copied().unwrap_or(0.0)
    }

    pub fn sin_coeff(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.b.get(j).copied().unwrap_or(0.0)
        }
    }

    pub fn set_cos(&mut self, j: usize, v: f64) {
        self.a[j] = v;
    }

    pub fn set_sin(&mut self, j: usize, v: f64) {
        assert!(j >= 1, "sine mode index starts at 1");
        self.b[j] = v;
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.a
    }

    /// Sine coefficients `b_1..=b_N`.
    pub fn sin_coeffs(&self) -> &[f64] {
        &self.b[1..]
    }

    pub fn mode(&self, k: usize) -> ModeVector {
        ModeVector {
            k,
            coeffs: Vector2::new(self.cos_coeff(k), self.sin_coeff(k)),
        }
    }

    pub fn set_mode(&mut self, m: ModeVector) {
        self.a[m.k] = m.coeffs[0];
        if m.k > 0 {
            self.b[m.k] = m.coeffs[1];
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = self.omega();
        let (s1, c1) = (w * t).sin_cos();
        // Chebyshev-style recurrence for cos(jwt), sin(jwt).
        let (mut c, mut s) = (1.0, 0.0);
        let mut acc = self.a[0];
        for j in 1..self.a.len() {
            let cn = c * c1 - s * s1;
            let sn = s * c1 + c * s1;
            c = cn;
            s = sn;
            acc += self.a[j] * c + self.b[j] * s;
        }
        acc
    }

    /// Time derivative.
    pub fn derivative(&self) -> Self {
        let w = self.omega();
        let mut out = Self::zeros(self.period, self.n_modes());
        for j in 1..self.a.len() {
            let f = w * j as f64;
            out.a[j] = f * self.b[j];
            out.b[j] = -f * self.a[j];
        }
        out
    }

    /// `f(-t)`.
    pub fn reflect(&self) -> Self {
        let mut out = self.clone();
        out.b.iter_mut().for_each(|v| *v = -*v);
        out.b[0] = 0.0;
        out
    }

    /// `f(t - theta)`.
    pub fn shift(&self, theta: f64) -> Self {
        let w = self.omega();
        let mut out = self.clone();
        for j in 1..self.a.len() {
            let (s, c) = (w * j as f64 * theta).sin_cos();
            let (a, b) = (self.a[j], self.b[j]);
            out.a[j] = a * c - b * s;
            out.b[j] = a * s + b * c;
        }
        out
    }

    /// Even part `(f(t) + f(-t)) / 2`.
    pub fn project_even(&self) -> Self {
        let mut out = self.clone();
        out.b.iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// Odd part `(f(t) - f(-t)) / 2`.
    pub fn project_odd(&self) -> Self {
        let mut out = self.clone();
        out.a.iter_mut().for_each(|v| *v = 0.0);
        out
    }

    /// Even part plus `jump` times the odd part.
    pub fn apply_scalar_jump(&self, jump: f64) -> Result<Self> {
        if !(jump > 0.0) {
            return Err(Error::Argument(format!("jump scalar must be positive, got {jump}")));
        }
        let mut out = self.clone();
        out.b.iter_mut().for_each(|v| *v *= jump);
        Ok(out)
    }

    pub fn is_even(&self) -> bool {
        self.b.iter().all(|&v| v == 0.0)
    }

    pub fn is_odd(&self) -> bool {
        self.a.iter().all(|&v| v == 0.0)
    }

    /// `L2[0, T]` pairing computed from the coefficients.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_period(other)?;
        let n = self.a.len().min(other.a.len());
        let mut acc = self.period * self.a[0] * other.a[0];
        for j in 1..n {
            acc += 0.5 * self.period * (self.a[j] * other.a[j] + self.b[j] * other.b[j]);
        }
        Ok(acc)
    }

    fn check_period(&self, other: &Self) -> Result<()> {
        if (self.period - other.period).abs() > 1e-12 * self.period {
            return Err(Error::Argument(format!(
                "period mismatch: {} vs {}",
                self.period, other.period
            )));
        }
        Ok(())
    }

    /// Coefficient-wise sum; truncation is the larger of the two.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_period(other)?;
        let n = self.n_modes().max(other.n_modes());
        let mut out = Self::zeros(self.period, n);
        for j in 0..=n {
            out.a[j] = self.cos_coeff(j) + other.cos_coeff(j);
            if j > 0 {
                out.b[j] = self.sin_coeff(j) + other.sin_coeff(j);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            period: self.period,
            a: self.a.iter().map(|v| v * factor).collect(),
            b: self.b.iter().map(|v| v * factor).collect(),
        }
    }

    /// Copy with truncation `n`, padding with zeros or dropping modes.
    pub fn with_modes(&self, n: usize) -> Self {
        let mut out = Self::zeros(self.period, n);
        for j in 0..=n.min(self.n_modes()) {
            out.a[j] = self.a[j];
            out.b[j] = self.b[j];
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.a
            .iter()
            .chain(self.b.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values on the uniform grid `t_j = j T / m`.
    pub fn to_samples(&self, m: usize) -> Result<Vec<f64>> {
        if m <= 2 * self.n_modes() {
            return Err(Error::Argument(format!(
                "{m} samples cannot represent {} modes",
                self.n_modes()
            )));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        buf[0] = Complex::new(self.a[0], 0.0);
        for j in 1..self.a.len() {
            let c = Complex::new(0.5 * self.a[j], -0.5 * self.b[j]);
            buf[j] = c;
            buf[m - j] = c.conj();
        }
        FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
        Ok(buf.iter().map(|c| c.re).collect())
    }

    /// Interpolating series with `n` modes from values on `t_j = j T / m`.
    /// Requires `m > 2 n`.
    pub fn from_samples(period: f64, values: &[f64], n: usize) -> Result<Self> {
        let m = values.len();
        if m <= 2 * n {
            return Err(Error::Argument(format!(
                "{m} samples cannot determine {n} modes"
            )));
        }
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let mut out = Self::zeros(period, n);
        let inv = 1.0 / m as f64;
        out.a[0] = buf[0].re * inv;
        for (j, z) in buf.iter().enumerate().take(n + 1).skip(1) {
            out.a[j] = 2.0 * z.re * inv;
            out.b[j] = -2.0 * z.im * inv;
        }
        Ok(out)
    }

    /// Writes `nt` uniform samples as CSV with columns `t,value`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, nt: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for j in 0..nt {
            let t = self.period * j as f64 / nt as f64;
            w.write_record([format!("{t:.16e}"), format!("{:.16e}", self.eval(t))])?;
        }
        w.flush()?;
        Ok(())
    }
}
