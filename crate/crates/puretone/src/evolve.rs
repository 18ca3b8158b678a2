//! Nonlinear evolution of the Riemann invariant `y` in the material
//! coordinate `x`, the boundary operators built from it, and
//! finite-difference checks of their derivatives.
//!
//! Two frames are supported.
//!
//! * Scaled: `y_x + sigma(w) y_t = 0` with `w` the even part of `y`,
//!   `sigma(w) = (1 + w)^(-nu)`, and the odd part multiplied by `J` at each
//!   entropy jump.
//! * Physical: `y = p + u` with `p` the even and `u` the odd part, and
//!   `y_x = -u_t + v_p(p, s(x)) p_t`. Nothing happens at a jump because `p`
//!   and `u` are continuous.
//!
//! The march stores `y` by its Fourier coefficients and evaluates the
//! nonlinearity on a zero-padded collocation grid. On constant-entropy
//! pieces the linear part (a rotation of every mode block) is propagated
//! exactly with an integrating-factor RK4, so the discrete linearization
//! reproduces the divisor tables to rounding. Pieces with varying entropy
//! use classical RK4.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lindiv::{divisor_pc, jump_matrix, readout_row, rotation, Flavor};
use crate::profiles::{sigma_of_x, EntropyProfile, EntropySegment, PiecewiseConstantProfile, SigmaField};
use crate::sturm::{fundamental_matrix, SturmSettings};
use crate::thermo::{Gas, GasModel};
use crate::timeseries::FourierTimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    NondimScaled,
    PhysicalGeneral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    SpectralMarch,
    Characteristics,
}

/// Riemann invariant at one material coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionState {
    pub y: FourierTimeSeries,
    pub x: f64,
    pub frame: Frame,
}

impl EvolutionState {
    pub fn new(y: FourierTimeSeries, x: f64, frame: Frame) -> Self {
        Self { y, x, frame }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveSettings {
    /// Retained modes; `0` keeps the truncation of the input.
    pub modes: usize,
    /// Collocation points; `0` picks the smallest power of two `>= 4 modes`.
    pub grid: usize,
    /// `dx <= step_factor * dt_grid / max sigma`.
    pub step_factor: f64,
    /// Abort once `max |y_t|` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    /// Abort once the top octave holds this fraction of the oscillatory
    /// energy (resolution lost to steepening).
    pub tail_limit: f64,
    /// Rows per unit length of the characteristics oracle.
    pub characteristic_rows: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            modes: 0,
            grid: 0,
            step_factor: 0.5,
            blowup_factor: 50.0,
            tail_limit: 1e-10,
            characteristic_rows: 128,
            picard_tol: 1e-14,
            picard_max_iter: 200,
        }
    }
}

impl EvolveSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_factor", self.step_factor),
            ("blowup_factor", self.blowup_factor),
            ("tail_limit", self.tail_limit),
            ("picard_tol", self.picard_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grid != 0 && !self.grid.is_power_of_two() {
            return Err(Error::Argument(format!("grid size {} is not a power of two", self.grid)));
        }
        Ok(())
    }

    fn resolved_modes(&self, input: usize) -> usize {
        if self.modes == 0 {
            input.max(1)
        } else {
            self.modes
        }
    }

    fn resolved_grid(&self, modes: usize) -> Result<usize> {
        let auto = (4 * modes).max(16).next_power_of_two();
        if self.grid == 0 {
            return Ok(auto);
        }
        if self.grid < 4 * modes {
            return Err(Error::Argument(format!(
                "grid of {} points is below 4 x {modes} modes",
                self.grid
            )));
        }
        Ok(self.grid)
    }
}

/// Entropy profile ready for marching, in one of the two frames.
#[derive(Debug, Clone)]
pub enum Medium {
    /// Scaled widths and jump scalars with the exponent `nu`.
    Nondim { profile: PiecewiseConstantProfile, nu: f64 },
    /// Inverse wavespeed field of a general gas at ambient pressure.
    Physical { field: SigmaField },
}

#[derive(Debug, Clone, Copy)]
enum PieceKind {
    /// Constant coefficients: linear inverse wavespeed and entropy.
    Constant { sigma: f64, s: f64 },
    Affine(EntropySegment),
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    x0: f64,
    x1: f64,
    /// Scalar applied to the odd part on entering the piece.
    jump: f64,
    kind: PieceKind,
}

impl Medium {
    pub fn nondim(profile: PiecewiseConstantProfile, nu: f64) -> Result<Self> {
        profile.validate()?;
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::Argument(format!("exponent nu must be positive, got {nu}")));
        }
        Ok(Medium::Nondim { profile, nu })
    }

    pub fn physical(profile: &EntropyProfile, gas: Gas, p_bar: f64) -> Result<Self> {
        Ok(Medium::Physical {
            field: sigma_of_x(profile, &gas, p_bar)?,
        })
    }

    pub fn frame(&self) -> Frame {
        match self {
            Medium::Nondim { .. } => Frame::NondimScaled,
            Medium::Physical { .. } => Frame::PhysicalGeneral,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Medium::Nondim { profile, .. } => profile.total_width(),
            Medium::Physical { field } => field.length(),
        }
    }

    /// Value of `y` for the quiet state.
    pub fn rest_value(&self) -> f64 {
        match self {
            Medium::Nondim { .. } => 0.0,
            Medium::Physical { field } => field.p_bar(),
        }
    }

    /// Medium describing the linearization about the constant `rest + z`:
    /// scaled widths shrink by `(1 + z)^(-nu)`, physical fields move to
    /// ambient pressure `p_bar + z`.
    pub fn linearized_about(&self, z: f64) -> Result<Self> {
        match self {
            Medium::Nondim { profile, nu } => {
                let factor = nondim_sigma(z, *nu, 0.0)?;
                Medium::nondim(profile.scaled(factor), *nu)
            }
            Medium::Physical { field } => Ok(Medium::Physical {
                field: field.with_pressure(field.p_bar() + z)?,
            }),
        }
    }

    /// The medium over `panels` copies of `[0, l]` alternating with its
    /// mirror image, starting with the medium itself.
    pub fn reflected_extension(&self, panels: usize) -> Result<Self> {
        match self {
            Medium::Nondim { profile, nu } => Medium::nondim(profile.reflected_extension(panels), *nu),
            Medium::Physical { field } => Ok(Medium::Physical {
                field: field.reflected_extension(panels)?,
            }),
        }
    }

    /// Characteristic size of `y`, used to scale finite-difference steps.
    pub fn amplitude_scale(&self) -> f64 {
        self.rest_value().abs().max(1.0)
    }

    /// Coordinates where the coefficients jump, in increasing order.
    pub fn interfaces(&self) -> Vec<f64> {
        self.pieces().iter().skip(1).map(|p| p.x0).collect()
    }

    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = match self {
            Medium::Nondim { profile, nu } => format!("nondim:{}:{nu:e}", profile.fingerprint()),
            Medium::Physical { field } => {
                let segs: Vec<String> = field
                    .segments()
                    .iter()
                    .map(|s| format!("{:e},{:e},{:e},{:e}", s.x0, s.x1, s.s0, s.s1))
                    .collect();
                format!("physical:{:?}:{:e}:{}", field.gas(), field.p_bar(), segs.join(";"))
            }
        };
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn pieces(&self) -> Vec<Piece> {
        match self {
            Medium::Nondim { profile, .. } => {
                let mut x = 0.0;
                profile
                    .widths()
                    .iter()
                    .enumerate()
                    .map(|(m, &w)| {
                        let p = Piece {
                            x0: x,
                            x1: x + w,
                            jump: if m == 0 { 1.0 } else { profile.jumps()[m - 1] },
                            kind: PieceKind::Constant { sigma: 1.0, s: 0.0 },
                        };
                        x += w;
                        p
                    })
                    .collect()
            }
            Medium::Physical { field } => field
                .segments()
                .iter()
                .enumerate()
                .map(|(i, sg)| Piece {
                    x0: sg.x0,
                    x1: sg.x1,
                    jump: 1.0,
                    kind: if sg.is_constant() {
                        PieceKind::Constant {
                            sigma: field.sigma_in(i, sg.x0),
                            s: sg.s0,
                        }
                    } else {
                        PieceKind::Affine(*sg)
                    },
                })
                .collect(),
        }
    }

    /// Linear transfer matrix of mode blocks at rate `omega` over the
    /// whole medium, acting on `(cos, sin)` coefficients.
    pub fn linear_transfer(&self, omega: f64, settings: &SturmSettings) -> Result<Matrix2<f64>> {
        let pieces = self.pieces();
        if let Medium::Physical { field } = self {
            if pieces.iter().any(|p| matches!(p.kind, PieceKind::Affine(_))) {
                return Ok(fundamental_matrix(field, omega, field.length(), settings)?.matrix);
            }
        }
        let mut m = Matrix2::identity();
        for p in &pieces {
            m = jump_matrix(p.jump) * m;
            if let PieceKind::Constant { sigma, .. } = p.kind {
                m = block_propagator(omega * sigma * (p.x1 - p.x0), sigma) * m;
            }
        }
        Ok(m)
    }

    /// Divisor of mode `j` at period `T` as seen by the boundary operator
    /// built on this medium.
    pub fn divisor(&self, period: f64, j: usize, flavor: Flavor, settings: &SturmSettings) -> Result<f64> {
        if let Medium::Nondim { profile, .. } = self {
            return Ok(divisor_pc(profile, period, j, flavor));
        }
        let omega = j as f64 * 2.0 * PI / period;
        let col = self.linear_transfer(omega, settings)? * Vector2::new(1.0, 0.0);
        Ok((readout_row(j, flavor) * col)[0])
    }
}

/// Exact propagator of `a' = -r b`, `b' = r sigma^2 a` over a length
/// with `r sigma * length = angle`.
fn block_propagator(angle: f64, sigma: f64) -> Matrix2<f64> {
    if sigma == 1.0 {
        return rotation(angle);
    }
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s / sigma, sigma * s, c)
}

/// Inverse wavespeed samples for collocation values of `y`.
#[derive(Debug, Clone, Copy)]
pub enum WaveFrame {
    Nondim { nu: f64 },
    Physical { gas: Gas, s: f64 },
}

/// `sigma(y)` on a uniform periodic grid. The even part is formed by the
/// grid reflection `t_j -> t_{-j}`.
pub fn wavespeed(values: &[f64], frame: WaveFrame) -> Result<Vec<f64>> {
    let m = values.len();
    (0..m)
        .map(|j| {
            let even = 0.5 * (values[j] + values[(m - j) % m]);
            match frame {
                WaveFrame::Nondim { nu } => nondim_sigma(even, nu, 0.0),
                WaveFrame::Physical { gas, s } => {
                    if !(even > 0.0) {
                        return Err(blowup(0.0, format!("nonpositive pressure {even:e}")));
                    }
                    let vp = gas.v_p(even, s);
                    if !(vp < 0.0) {
                        return Err(blowup(0.0, format!("v_p = {vp:e} is not negative")));
                    }
                    Ok((-vp).sqrt())
                }
            }
        })
        .collect()
}

fn nondim_sigma(w: f64, nu: f64, x: f64) -> Result<f64> {
    let base = 1.0 + w;
    if !(base > 0.0) {
        return Err(blowup(x, format!("wavespeed base 1 + w = {base:e} is not positive")));
    }
    Ok(base.powf(-nu))
}

fn blowup(x: f64, reason: String) -> Error {
    Error::Evolution { x, reason }
}

/// Grid transforms for one truncation.
struct Spectral {
    modes: usize,
    grid: usize,
    omega: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex<f64>>,
}

impl Spectral {
    fn new(period: f64, modes: usize, grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            modes,
            grid,
            omega: 2.0 * PI / period,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
            buf: vec![Complex::new(0.0, 0.0); grid],
        }
    }

    /// Coefficients are packed as `[a_0..=a_N, b_0..=b_N]`.
    fn synthesize(&mut self, c: &[f64], out: &mut [f64]) {
        let n = self.modes;
        self.buf.iter_mut().for_each(|z| *z = Complex::new(0.0, 0.0));
        self.buf[0] = Complex::new(c[0], 0.0);
        for j in 1..=n {
            let z = Complex::new(0.5 * c[j], -0.5 * c[n + 1 + j]);
            self.buf[j] = z;
            self.buf[self.grid - j] = z.conj();
        }
        self.inverse.process(&mut self.buf);
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = z.re;
        }
    }

    fn analyze(&mut self, values: &[f64], c: &mut [f64]) {
        let n = self.modes;
        for (z, &v) in self.buf.iter_mut().zip(values) {
            *z = Complex::new(v, 0.0);
        }
        self.forward.process(&mut self.buf);
        let inv = 1.0 / self.grid as f64;
        c[0] = self.buf[0].re * inv;
        c[n + 1] = 0.0;
        for j in 1..=n {
            c[j] = 2.0 * self.buf[j].re * inv;
            c[n + 1 + j] = -2.0 * self.buf[j].im * inv;
        }
    }

    /// Coefficients of `d/dt`.
    fn derivative(&self, c: &[f64], out: &mut [f64]) {
        let n = self.modes;
        out[0] = 0.0;
        out[n + 1] = 0.0;
        for j in 1..=n {
            let r = j as f64 * self.omega;
            out[j] = r * c[n + 1 + j];
            out[n + 1 + j] = -r * c[j];
        }
    }
}

fn pack(y: &FourierTimeSeries, modes: usize) -> Vec<f64> {
    let y = y.with_modes(modes);
    let mut c = Vec::with_capacity(2 * modes + 2);
    c.extend_from_slice(y.cos_coeffs());
    c.push(0.0);
    c.extend_from_slice(y.sin_coeffs());
    c
}

fn unpack(period: f64, c: &[f64]) -> FourierTimeSeries {
    let n = c.len() / 2 - 1;
    FourierTimeSeries::from_coefficients(period, c[..=n].to_vec(), c[n + 2..].to_vec())
        .expect("packed coefficients have consistent lengths")
}

/// Monitoring data gathered along a march.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarchDiagnostics {
    pub initial_gradient: f64,
    pub max_gradient: f64,
    /// `(x, max |y_t|)` after every step.
    pub gradient_history: Vec<(f64, f64)>,
    pub max_tail_ratio: f64,
    pub steps: usize,
}

/// Recorded march: every step and both sides of each jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub frame: Frame,
    pub x: Vec<f64>,
    pub states: Vec<FourierTimeSeries>,
    pub diagnostics: MarchDiagnostics,
}

struct Marcher<'a> {
    medium: &'a Medium,
    settings: &'a EvolveSettings,
    spec: Spectral,
    period: f64,
    threshold: f64,
    /// Drop the nonlinearity (reference linear march).
    linear: bool,
    diag: MarchDiagnostics,
    // scratch
    g1: Vec<f64>,
    g2: Vec<f64>,
    g3: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> Marcher<'a> {
    fn new(medium: &'a Medium, settings: &'a EvolveSettings, period: f64, modes: usize) -> Result<Self> {
        settings.validate()?;
        let grid = settings.resolved_grid(modes)?;
        Ok(Self {
            medium,
            settings,
            spec: Spectral::new(period, modes, grid),
            period,
            threshold: f64::INFINITY,
            linear: false,
            diag: MarchDiagnostics::default(),
            g1: vec![0.0; grid],
            g2: vec![0.0; grid],
            g3: vec![0.0; grid],
            d: vec![0.0; 2 * modes + 2],
        })
    }

    fn modes(&self) -> usize {
        self.spec.modes
    }

    /// `max |y_t|` on the grid.
    fn gradient(&mut self, c: &[f64]) -> f64 {
        self.spec.derivative(c, &mut self.d);
        let d = std::mem::take(&mut self.d);
        self.spec.synthesize(&d, &mut self.g1);
        self.d = d;
        self.g1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn tail_ratio(&self, c: &[f64]) -> f64 {
        let n = self.modes();
        let energy = |j: usize| c[j] * c[j] + c[n + 1 + j] * c[n + 1 + j];
        let total: f64 = (1..=n).map(energy).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = (n / 2 + 1..=n).map(energy).sum();
        tail / total
    }

    /// Nonlinear remainder for constant-coefficient pieces, or the full
    /// right-hand side for affine pieces (`full = true`).
    fn rhs(&mut self, c: &[f64], x: f64, kind: PieceKind, full: bool, out: &mut [f64]) -> Result<()> {
        let n = self.modes();
        let m = self.spec.grid;
        if self.linear {
            out.iter_mut().for_each(|v| *v = 0.0);
            if let (Medium::Physical { field }, PieceKind::Affine(sg)) = (self.medium, kind) {
                let sigma2 = -field.gas().v_p(field.p_bar(), sg.entropy_at(x));
                let omega = self.spec.omega;
                for j in 1..=n {
                    let r = j as f64 * omega;
                    out[j] = -r * c[n + 1 + j];
                    out[n + 1 + j] = r * sigma2 * c[j];
                }
            }
            return Ok(());
        }
        match (self.medium, kind) {
            (Medium::Nondim { nu, .. }, PieceKind::Constant { .. }) => {
                self.spec.derivative(c, &mut self.d);
                let d = std::mem::take(&mut self.d);
                self.spec.synthesize(&d, &mut self.g1);
                self.d = d;
                let mut even = c.to_vec();
                even[n + 1..].iter_mut().for_each(|v| *v = 0.0);
                self.spec.synthesize(&even, &mut self.g2);
                for i in 0..m {
                    let sigma = nondim_sigma(self.g2[i], *nu, x)?;
                    let lin = if full { 0.0 } else { 1.0 };
                    self.g3[i] = -(sigma - lin) * self.g1[i];
                }
                let g3 = std::mem::take(&mut self.g3);
                self.spec.analyze(&g3, out);
                self.g3 = g3;
            }
            (Medium::Physical { field }, kind) => {
                let gas = *field.gas();
                let p_bar = field.p_bar();
                let s = match kind {
                    PieceKind::Constant { s, .. } => s,
                    PieceKind::Affine(sg) => sg.entropy_at(x),
                };
                // p_t lives in the sine slots of the derivative of the even part.
                let mut even = c.to_vec();
                even[n + 1..].iter_mut().for_each(|v| *v = 0.0);
                self.spec.synthesize(&even, &mut self.g2);
                self.spec.derivative(&even, &mut self.d);
                let d = std::mem::take(&mut self.d);
                self.spec.synthesize(&d, &mut self.g1);
                self.d = d;
                let vp_bar = if full { 0.0 } else { gas.v_p(p_bar, s) };
                for i in 0..m {
                    let p = self.g2[i];
                    if !(p > 0.0) {
                        return Err(blowup(x, format!("nonpositive pressure {p:e}")));
                    }
                    let vp = gas.v_p(p, s);
                    if !(vp < 0.0) {
                        return Err(blowup(x, format!("v_p = {vp:e} lost hyperbolicity")));
                    }
                    self.g3[i] = (vp - vp_bar) * self.g1[i];
                }
                let g3 = std::mem::take(&mut self.g3);
                self.spec.analyze(&g3, out);
                self.g3 = g3;
                if full {
                    // -u_t: cosine slots gain -j omega b_j.
                    for j in 1..=n {
                        out[j] -= j as f64 * self.spec.omega * c[n + 1 + j];
                    }
                }
            }
            (Medium::Nondim { .. }, PieceKind::Affine(_)) => unreachable!("scaled pieces are constant"),
        }
        Ok(())
    }

    fn max_sigma(&mut self, c: &[f64], kind: PieceKind, x: f64) -> Result<f64> {
        let n = self.modes();
        let mut even = c.to_vec();
        even[n + 1..].iter_mut().for_each(|v| *v = 0.0);
        self.spec.synthesize(&even, &mut self.g2);
        let mut best: f64 = 0.0;
        match (self.medium, kind) {
            (Medium::Nondim { nu, .. }, _) => {
                for &w in &self.g2 {
                    best = best.max(nondim_sigma(w, *nu, x)?);
                }
            }
            (Medium::Physical { field }, kind) => {
                let entropies = match kind {
                    PieceKind::Constant { s, .. } => vec![s],
                    PieceKind::Affine(sg) => vec![sg.s0, sg.s1],
                };
                for &p in &self.g2 {
                    if !(p > 0.0) {
                        return Err(blowup(x, format!("nonpositive pressure {p:e}")));
                    }
                    for &s in &entropies {
                        let vp = field.gas().v_p(p, s);
                        if !(vp < 0.0) {
                            return Err(blowup(x, format!("v_p = {vp:e} lost hyperbolicity")));
                        }
                        best = best.max((-vp).sqrt());
                    }
                }
            }
        }
        Ok(best)
    }

    fn propagate(&self, c: &mut [f64], cs: &[(f64, f64)], sigma: f64) {
        let n = self.modes();
        for j in 1..=n {
            let (cj, sj) = cs[j];
            let (a, b) = (c[j], c[n + 1 + j]);
            c[j] = cj * a - sj / sigma * b;
            c[n + 1 + j] = sigma * sj * a + cj * b;
        }
    }

    fn rotations(&self, h: f64, sigma: f64) -> Vec<(f64, f64)> {
        (0..=self.modes())
            .map(|j| {
                let (s, c) = (j as f64 * self.spec.omega * sigma * h).sin_cos();
                (c, s)
            })
            .collect()
    }

    fn monitor(&mut self, c: &[f64], x: f64) -> Result<()> {
        let grad = self.gradient(c);
        if !grad.is_finite() {
            return Err(blowup(x, "non-finite gradient".into()));
        }
        let tail = self.tail_ratio(c);
        self.diag.steps += 1;
        self.diag.max_gradient = self.diag.max_gradient.max(grad);
        self.diag.max_tail_ratio = self.diag.max_tail_ratio.max(tail);
        self.diag.gradient_history.push((x, grad));
        if grad > self.threshold {
            return Err(blowup(
                x,
                format!(
                    "max |y_t| = {grad:e} exceeds {} x its initial value {:e}",
                    self.settings.blowup_factor, self.diag.initial_gradient
                ),
            ));
        }
        if tail > self.settings.tail_limit {
            return Err(blowup(
                x,
                format!("top-octave energy fraction {tail:e} exceeds {:e}", self.settings.tail_limit),
            ));
        }
        Ok(())
    }

    /// One integrating-factor RK4 step on a constant piece.
    fn lawson_step(&mut self, c: &mut [f64], x: f64, h: f64, kind: PieceKind) -> Result<()> {
        let sigma = match kind {
            PieceKind::Constant { sigma, .. } => sigma,
            PieceKind::Affine(_) => unreachable!(),
        };
        let half = self.rotations(0.5 * h, sigma);
        let whole = self.rotations(h, sigma);
        let len = c.len();
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        self.rhs(c, x, kind, false, &mut k1)?;

        let mut e_half_y = c.to_vec();
        self.propagate(&mut e_half_y, &half, sigma);
        let mut e_half_k1 = k1.clone();
        self.propagate(&mut e_half_k1, &half, sigma);

        let stage: Vec<f64> = (0..len).map(|i| e_half_y[i] + 0.5 * h * e_half_k1[i]).collect();
        self.rhs(&stage, x + 0.5 * h, kind, false, &mut k2)?;
        let stage: Vec<f64> = (0..len).map(|i| e_half_y[i] + 0.5 * h * k2[i]).collect();
        self.rhs(&stage, x + 0.5 * h, kind, false, &mut k3)?;
        let mut e_half_k3 = k3.clone();
        self.propagate(&mut e_half_k3, &half, sigma);
        let mut e_y = c.to_vec();
        self.propagate(&mut e_y, &whole, sigma);
        let stage: Vec<f64> = (0..len).map(|i| e_y[i] + h * e_half_k3[i]).collect();
        self.rhs(&stage, x + h, kind, false, &mut k4)?;

        let mut e_k1 = k1;
        self.propagate(&mut e_k1, &whole, sigma);
        let mut mid: Vec<f64> = (0..len).map(|i| k2[i] + k3[i]).collect();
        self.propagate(&mut mid, &half, sigma);
        for i in 0..len {
            c[i] = e_y[i] + h / 6.0 * (e_k1[i] + 2.0 * mid[i] + k4[i]);
        }
        Ok(())
    }

    fn rk4_step(&mut self, c: &mut [f64], x: f64, h: f64, kind: PieceKind) -> Result<()> {
        let len = c.len();
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        self.rhs(c, x, kind, true, &mut k1)?;
        let stage: Vec<f64> = (0..len).map(|i| c[i] + 0.5 * h * k1[i]).collect();
        self.rhs(&stage, x + 0.5 * h, kind, true, &mut k2)?;
        let stage: Vec<f64> = (0..len).map(|i| c[i] + 0.5 * h * k2[i]).collect();
        self.rhs(&stage, x + 0.5 * h, kind, true, &mut k3)?;
        let stage: Vec<f64> = (0..len).map(|i| c[i] + h * k3[i]).collect();
        self.rhs(&stage, x + h, kind, true, &mut k4)?;
        for i in 0..len {
            c[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        Ok(())
    }

    /// Marches `c` from `x_a` to `x_b`. Jumps at interfaces in
    /// `[x_a, x_b)` are applied, so a state sitting on an interface is the
    /// left limit there. `max_dx` optionally tightens the step.
    fn march(
        &mut self,
        c: &mut [f64],
        x_a: f64,
        x_b: f64,
        max_dx: Option<f64>,
        record: &mut Option<&mut Vec<(f64, Vec<f64>)>>,
    ) -> Result<()> {
        let n = self.modes();
        self.diag.initial_gradient = self.gradient(c);
        self.threshold = self.settings.blowup_factor * self.diag.initial_gradient.max(1e-10);
        if let Some(r) = record.as_deref_mut() {
            r.push((x_a, c.to_vec()));
        }
        let dt_grid = self.period / self.spec.grid as f64;
        let span = (x_b - x_a).abs().max(1.0);
        for piece in self.medium.pieces() {
            if piece.x1 <= x_a + 1e-14 * span || piece.x0 >= x_b {
                continue;
            }
            if piece.jump != 1.0 && piece.x0 >= x_a - 1e-14 * span {
                if !(piece.jump > 0.0) {
                    return Err(Error::Argument(format!("jump scalar {} must be positive", piece.jump)));
                }
                for j in 1..=n {
                    c[n + 1 + j] *= piece.jump;
                }
                if let Some(r) = record.as_deref_mut() {
                    r.push((piece.x0, c.to_vec()));
                }
            }
            let lo = piece.x0.max(x_a);
            let hi = piece.x1.min(x_b);
            let len = hi - lo;
            if len <= 0.0 {
                continue;
            }
            let sig = self.max_sigma(c, piece.kind, lo)?;
            let mut dx = self.settings.step_factor * dt_grid / sig;
            if let Some(m) = max_dx {
                dx = dx.min(m);
            }
            let steps = (len / dx).ceil().max(1.0) as usize;
            let h = len / steps as f64;
            for i in 0..steps {
                let x = lo + i as f64 * h;
                match piece.kind {
                    PieceKind::Constant { .. } => self.lawson_step(c, x, h, piece.kind)?,
                    PieceKind::Affine(_) => self.rk4_step(c, x, h, piece.kind)?,
                }
                let x_next = if i + 1 == steps { hi } else { x + h };
                self.monitor(c, x_next)?;
                if let Some(r) = record.as_deref_mut() {
                    r.push((x_next, c.to_vec()));
                }
            }
        }
        Ok(())
    }
}

fn check_frame(state: &EvolutionState, medium: &Medium) -> Result<()> {
    if state.frame != medium.frame() {
        return Err(Error::Argument(format!(
            "state frame {:?} does not match medium frame {:?}",
            state.frame,
            medium.frame()
        )));
    }
    Ok(())
}

fn check_range(medium: &Medium, x_a: f64, x_b: f64) -> Result<()> {
    let ell = medium.length();
    let slack = 1e-12 * ell.max(1.0);
    if !(x_a >= -slack && x_b <= ell + slack && x_a <= x_b) {
        return Err(Error::Argument(format!(
            "march range [{x_a}, {x_b}] is not inside [0, {ell}]"
        )));
    }
    Ok(())
}

/// Evolves `state` from `state.x` to `x_b` through `medium`.
pub fn evolve(
    state: &EvolutionState,
    medium: &Medium,
    x_b: f64,
    method: Method,
    settings: &EvolveSettings,
) -> Result<EvolutionState> {
    Ok(evolve_diagnosed(state, medium, x_b, method, settings)?.0)
}

/// Spectral march that hands back the diagnostics gathered up to the
/// failure point when the march stops early.
pub fn evolve_monitored(
    state: &EvolutionState,
    medium: &Medium,
    x_b: f64,
    settings: &EvolveSettings,
) -> (Result<EvolutionState>, MarchDiagnostics) {
    let setup = check_frame(state, medium)
        .and_then(|_| check_range(medium, state.x, x_b))
        .and_then(|_| {
            let modes = settings.resolved_modes(state.y.n_modes());
            Marcher::new(medium, settings, state.y.period(), modes).map(|m| (m, modes))
        });
    let (mut m, modes) = match setup {
        Ok(v) => v,
        Err(e) => return (Err(e), MarchDiagnostics::default()),
    };
    let period = state.y.period();
    let mut c = pack(&state.y, modes);
    let outcome = m
        .march(&mut c, state.x, x_b, None, &mut None)
        .map(|_| EvolutionState::new(unpack(period, &c), x_b, state.frame));
    (outcome, m.diag)
}

/// [`evolve`] returning the march diagnostics as well. The characteristics
/// oracle reports only step counts.
pub fn evolve_diagnosed(
    state: &EvolutionState,
    medium: &Medium,
    x_b: f64,
    method: Method,
    settings: &EvolveSettings,
) -> Result<(EvolutionState, MarchDiagnostics)> {
    check_frame(state, medium)?;
    check_range(medium, state.x, x_b)?;
    let period = state.y.period();
    let modes = settings.resolved_modes(state.y.n_modes());
    match method {
        Method::SpectralMarch => {
            let mut m = Marcher::new(medium, settings, period, modes)?;
            let mut c = pack(&state.y, modes);
            m.march(&mut c, state.x, x_b, None, &mut None)?;
            Ok((
                EvolutionState::new(unpack(period, &c), x_b, state.frame),
                m.diag,
            ))
        }
        Method::Characteristics => {
            let (y, diag) = characteristics(&state.y.with_modes(modes), medium, state.x, x_b, settings)?;
            Ok((EvolutionState::new(y, x_b, state.frame), diag))
        }
    }
}

/// Spectral march from `state.x` to `x_b` keeping every step. Steps are
/// uniform inside each piece and no longer than `max_dx` when given.
pub fn evolve_recorded(
    state: &EvolutionState,
    medium: &Medium,
    x_b: f64,
    max_dx: Option<f64>,
    settings: &EvolveSettings,
) -> Result<Trajectory> {
    check_frame(state, medium)?;
    check_range(medium, state.x, x_b)?;
    let period = state.y.period();
    let modes = settings.resolved_modes(state.y.n_modes());
    let mut m = Marcher::new(medium, settings, period, modes)?;
    let mut c = pack(&state.y, modes);
    let mut rec = Vec::new();
    m.march(&mut c, state.x, x_b, max_dx, &mut Some(&mut rec))?;
    let (x, states) = rec.into_iter().map(|(x, c)| (x, unpack(period, &c))).unzip();
    Ok(Trajectory {
        frame: state.frame,
        x,
        states,
        diagnostics: m.diag,
    })
}

/// Linearized evolution of `y_lin` about the quiet state, sampled at the
/// coordinates of `template` (a repeated coordinate marks a jump).
pub fn linear_companion(
    template: &Trajectory,
    y_lin: &FourierTimeSeries,
    medium: &Medium,
    settings: &EvolveSettings,
) -> Result<Vec<FourierTimeSeries>> {
    let Some(&x_start) = template.x.first() else {
        return Ok(Vec::new());
    };
    let period = y_lin.period();
    let modes = template.states.first().map_or(y_lin.n_modes(), |s| s.n_modes());
    let mut m = Marcher::new(medium, settings, period, modes)?;
    m.linear = true;
    let pieces = medium.pieces();
    let mut c = pack(y_lin, modes);
    let mut out = vec![unpack(period, &c)];
    let mut x = x_start;
    for &x_next in &template.x[1..] {
        if x_next == x {
            let piece = pieces
                .iter()
                .find(|p| p.x0 == x)
                .ok_or_else(|| Error::Argument(format!("no interface at repeated coordinate {x}")))?;
            for j in 1..=modes {
                c[modes + 1 + j] *= piece.jump;
            }
        } else {
            let mid = 0.5 * (x + x_next);
            let piece = pieces
                .iter()
                .find(|p| p.x0 <= mid && mid <= p.x1)
                .ok_or_else(|| Error::Argument(format!("coordinate {mid} outside the medium")))?;
            let h = x_next - x;
            match piece.kind {
                PieceKind::Constant { sigma, .. } => {
                    let rot = m.rotations(h, sigma);
                    m.propagate(&mut c, &rot, sigma);
                }
                PieceKind::Affine(_) => m.rk4_step(&mut c, x, h, piece.kind)?,
            }
        }
        x = x_next;
        out.push(unpack(period, &c));
    }
    Ok(out)
}

/// Picard iteration for the characteristic field of the scaled equation.
///
/// On each piece the field `y(xi_i, t_j)` is updated by tracing every grid
/// point backward along `dt/dxi = sigma(w)` (RK4 with step `2 dxi`, the
/// odd row as midpoint) and reading off the piece's initial data there.
fn characteristics(
    y0: &FourierTimeSeries,
    medium: &Medium,
    x_a: f64,
    x_b: f64,
    settings: &EvolveSettings,
) -> Result<(FourierTimeSeries, MarchDiagnostics)> {
    let Medium::Nondim { nu, .. } = medium else {
        return Err(Error::Argument(
            "the characteristics oracle covers the scaled frame only".into(),
        ));
    };
    let nu = *nu;
    settings.validate()?;
    let period = y0.period();
    let modes = y0.n_modes();
    let grid = settings.resolved_grid(modes)?;
    let dt = period / grid as f64;
    let interp_modes = grid / 2 - 1;
    let mut y = y0.clone();
    let mut diag = MarchDiagnostics::default();
    let span = (x_b - x_a).abs().max(1.0);
    for piece in medium.pieces() {
        if piece.x1 <= x_a + 1e-14 * span || piece.x0 >= x_b {
            continue;
        }
        if piece.jump != 1.0 && piece.x0 >= x_a - 1e-14 * span {
            y = y.apply_scalar_jump(piece.jump)?;
        }
        let lo = piece.x0.max(x_a);
        let hi = piece.x1.min(x_b);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let mut rows = ((len * settings.characteristic_rows as f64).ceil() as usize).max(2);
        rows += rows % 2;
        let dxi = len / rows as f64;
        let data = y.clone();
        let mut field: Vec<Vec<f64>> = (0..=rows)
            .map(|i| {
                let shift = i as f64 * dxi;
                (0..grid).map(|j| data.eval(j as f64 * dt - shift)).collect()
            })
            .collect();
        let mut prev_diff = f64::INFINITY;
        let mut converged = false;
        for iter in 0..settings.picard_max_iter {
            let speeds: Vec<FourierTimeSeries> = field
                .iter()
                .map(|row| {
                    let s = wavespeed(row, WaveFrame::Nondim { nu })
                        .map_err(|_| blowup(lo, "wavespeed base lost positivity in Picard iterate".into()))?;
                    FourierTimeSeries::from_samples(period, &s, interp_modes)
                })
                .collect::<Result<_>>()?;
            let updated: Vec<Vec<f64>> = Execution::default().map(rows + 1, |i| {
                (0..grid)
                    .map(|j| {
                        if i == 0 {
                            return field[0][j];
                        }
                        let foot = trace_back(&speeds, i, j as f64 * dt, dxi);
                        data.eval(foot)
                    })
                    .collect()
            });
            let scale = updated.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
            let diff = updated
                .iter()
                .zip(&field)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
                .fold(0.0, f64::max);
            field = updated;
            diag.steps += 1;
            if diff <= settings.picard_tol * scale {
                converged = true;
                break;
            }
            if iter >= 3 && diff > 0.9 * prev_diff {
                return Err(blowup(
                    lo,
                    format!("Picard iteration stopped contracting (update {diff:e} after {prev_diff:e})"),
                ));
            }
            prev_diff = diff;
        }
        if !converged {
            return Err(blowup(
                lo,
                format!("Picard iteration did not converge in {} sweeps", settings.picard_max_iter),
            ));
        }
        y = FourierTimeSeries::from_samples(period, &field[rows], modes)?;
    }
    Ok((y, diag))
}

/// Foot at row 0 of the backward characteristic through `(row i, t)`.
fn trace_back(speeds: &[FourierTimeSeries], mut i: usize, mut t: f64, dxi: f64) -> f64 {
    while i >= 2 {
        let k1 = speeds[i].eval(t);
        let k2 = speeds[i - 1].eval(t - dxi * k1);
        let k3 = speeds[i - 1].eval(t - dxi * k2);
        let k4 = speeds[i - 2].eval(t - 2.0 * dxi * k3);
        t -= dxi / 3.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        i -= 2;
    }
    if i == 1 {
        // Half-row values by quadratic interpolation through rows 0, 1, 2.
        let mid = |tau: f64| {
            let s0 = speeds[0].eval(tau);
            let s1 = speeds[1].eval(tau);
            let s2 = speeds.get(2).map_or(s1, |s| s.eval(tau));
            (3.0 * s0 + 6.0 * s1 - s2) / 8.0
        };
        let k1 = speeds[1].eval(t);
        let k2 = mid(t - 0.5 * dxi * k1);
        let k3 = mid(t - 0.5 * dxi * k2);
        let k4 = speeds[0].eval(t - dxi * k3);
        t -= dxi / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t
}

/// Boundary-value problem whose zeros are the periodic solutions.
#[derive(Debug, Clone)]
pub struct BoundaryOperatorSpec {
    pub flavor: Flavor,
    pub medium: Medium,
    pub period: f64,
}

impl BoundaryOperatorSpec {
    pub fn new(flavor: Flavor, medium: Medium, period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Argument(format!("period must be positive, got {period}")));
        }
        Ok(Self { flavor, medium, period })
    }

    pub fn frame(&self) -> Frame {
        self.medium.frame()
    }
}

/// Evolves even data through the medium, applies the quarter-period shift
/// (periodic tile) and keeps the odd part.
pub fn boundary_operator(
    spec: &BoundaryOperatorSpec,
    y0: &FourierTimeSeries,
    settings: &EvolveSettings,
) -> Result<FourierTimeSeries> {
    boundary_operator_with_end(spec, y0, settings).map(|(f, _)| f)
}

/// [`boundary_operator`] together with the evolved state at the far end.
pub fn boundary_operator_with_end(
    spec: &BoundaryOperatorSpec,
    y0: &FourierTimeSeries,
    settings: &EvolveSettings,
) -> Result<(FourierTimeSeries, FourierTimeSeries)> {
    if (y0.period() - spec.period).abs() > 1e-12 * spec.period {
        return Err(Error::Argument(format!(
            "data period {} differs from the operator period {}",
            y0.period(),
            spec.period
        )));
    }
    if !y0.is_even() {
        return Err(Error::Argument("boundary operator data must be even".into()));
    }
    let start = EvolutionState::new(y0.clone(), 0.0, spec.frame());
    let end = evolve(&start, &spec.medium, spec.medium.length(), Method::SpectralMarch, settings)?.y;
    let shifted = match spec.flavor {
        Flavor::PeriodicTile => end.shift(-spec.period / 4.0),
        Flavor::Acoustic => end.clone(),
    };
    Ok((shifted.project_odd(), end))
}

/// `D F(rest)` in mode-diagonal form: `cos_j -> delta_j sin_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedBoundaryOperator {
    pub period: f64,
    pub flavor: Flavor,
    /// `divisors[j]` for `j = 0..=N`; the entry for `j = 0` is zero.
    pub divisors: Vec<f64>,
}

impl LinearizedBoundaryOperator {
    pub fn n_modes(&self) -> usize {
        self.divisors.len() - 1
    }

    pub fn apply(&self, y: &FourierTimeSeries) -> FourierTimeSeries {
        let n = self.n_modes();
        let mut out = FourierTimeSeries::zeros(y.period(), n);
        for j in 1..=n.min(y.n_modes()) {
            out.set_sin(j, self.divisors[j] * y.cos_coeff(j));
        }
        out
    }
}

pub fn linearized_boundary_operator(
    spec: &BoundaryOperatorSpec,
    modes: usize,
    sturm: &SturmSettings,
    exec: Execution,
) -> Result<LinearizedBoundaryOperator> {
    let entries = exec.map(modes, |i| spec.medium.divisor(spec.period, i + 1, spec.flavor, sturm));
    let mut divisors = vec![0.0];
    for d in entries {
        divisors.push(d?);
    }
    Ok(LinearizedBoundaryOperator {
        period: spec.period,
        flavor: spec.flavor,
        divisors,
    })
}

/// Linear evolution through the whole medium, mode block by mode block.
pub fn linear_evolution(
    medium: &Medium,
    y: &FourierTimeSeries,
    sturm: &SturmSettings,
) -> Result<FourierTimeSeries> {
    let mut out = y.clone();
    for j in 1..=y.n_modes() {
        let m = medium.linear_transfer(j as f64 * y.omega(), sturm)?;
        let mut mode = out.mode(j);
        mode.coeffs = m * mode.coeffs;
        out.set_mode(mode);
    }
    Ok(out)
}

/// Finite-difference errors of a linearization over a sequence of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationProbe {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Observed orders between consecutive step sizes.
    pub orders: Vec<f64>,
}

impl LinearizationProbe {
    fn from_errors(eps: &[f64], errors: Vec<f64>) -> Self {
        let orders = eps
            .windows(2)
            .zip(errors.windows(2))
            .map(|(e, r)| (r[0] / r[1]).ln() / (e[0] / e[1]).ln())
            .collect();
        Self {
            eps: eps.to_vec(),
            errors,
            orders,
        }
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn sup_distance(a: &FourierTimeSeries, b: &FourierTimeSeries) -> Result<f64> {
    Ok(a.add(&b.scale(-1.0))?.max_coeff())
}

/// `|| (E(rest + eps Y) - E(rest)) / eps - L[Y] ||` for each `eps`, with
/// `E` the evolution through the whole medium.
pub fn evolution_linearization_probe(
    medium: &Medium,
    direction: &FourierTimeSeries,
    eps: &[f64],
    settings: &EvolveSettings,
    sturm: &SturmSettings,
    exec: Execution,
) -> Result<LinearizationProbe> {
    let period = direction.period();
    let n = direction.n_modes();
    let rest = FourierTimeSeries::constant(period, n, medium.rest_value());
    let linear = linear_evolution(medium, direction, sturm)?;
    let ell = medium.length();
    let run = |y: FourierTimeSeries| -> Result<FourierTimeSeries> {
        let s = EvolutionState::new(y, 0.0, medium.frame());
        Ok(evolve(&s, medium, ell, Method::SpectralMarch, settings)?.y)
    };
    let base = run(rest.clone())?;
    let results = exec.map_slice(eps, |&e| -> Result<f64> {
        let out = run(rest.add(&direction.scale(e))?)?;
        let quotient = out.add(&base.scale(-1.0))?.scale(1.0 / e);
        sup_distance(&quotient, &linear.with_modes(quotient.n_modes()))
    });
    let errors = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LinearizationProbe::from_errors(eps, errors))
}

/// Same probe for the boundary operator against its mode-diagonal
/// linearization.
pub fn boundary_linearization_probe(
    spec: &BoundaryOperatorSpec,
    direction: &FourierTimeSeries,
    eps: &[f64],
    settings: &EvolveSettings,
    sturm: &SturmSettings,
    exec: Execution,
) -> Result<LinearizationProbe> {
    let n = direction.n_modes();
    let lin = linearized_boundary_operator(spec, n, sturm, exec)?;
    let predicted = lin.apply(direction);
    let rest = FourierTimeSeries::constant(spec.period, n, spec.medium.rest_value());
    let base = boundary_operator(spec, &rest, settings)?;
    let results = exec.map_slice(eps, |&e| -> Result<f64> {
        let out = boundary_operator(spec, &rest.add(&direction.scale(e))?, settings)?;
        let quotient = out.add(&base.scale(-1.0))?.scale(1.0 / e);
        sup_distance(&quotient, &predicted.with_modes(quotient.n_modes()))
    });
    let errors = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LinearizationProbe::from_errors(eps, errors))
}

/// Mixed second difference of `N = L^(-theta) E^theta` in the directions
/// `(1, cos(k omega t))` against the prediction `nu theta d/dt cos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivativeCheck {
    pub width: f64,
    pub nu: f64,
    pub k: usize,
    pub eps: f64,
    pub measured: FourierTimeSeries,
    pub predicted: FourierTimeSeries,
    /// `sin_k` coefficient of the measurement.
    pub measured_coefficient: f64,
    /// `-nu theta k omega`.
    pub predicted_coefficient: f64,
    /// Sup distance relative to the predicted coefficient.
    pub rel_err: f64,
}

pub fn second_derivative_check(
    width: f64,
    nu: f64,
    period: f64,
    k: usize,
    eps: f64,
    settings: &EvolveSettings,
    exec: Execution,
) -> Result<SecondDerivativeCheck> {
    if k == 0 || !(eps > 0.0) {
        return Err(Error::Argument("need k >= 1 and eps > 0".into()));
    }
    let medium = Medium::nondim(PiecewiseConstantProfile::uniform(width)?, nu)?;
    // Harmonics up to order 8 stay below the top octave monitored for steepening.
    let n = (16 * k).max(32);
    let one = FourierTimeSeries::constant(period, n, 1.0);
    let dir = FourierTimeSeries::cosine(period, n, k, 1.0);
    let signs = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let outs = exec.map_slice(&signs, |&(s1, s2)| -> Result<FourierTimeSeries> {
        let y = one.scale(s1 * eps).add(&dir.scale(s2 * eps))?;
        let s = EvolutionState::new(y, 0.0, Frame::NondimScaled);
        let end = evolve(&s, &medium, width, Method::SpectralMarch, settings)?.y;
        Ok(end.shift(-width))
    });
    let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
    let measured = outs[0]
        .add(&outs[1].scale(-1.0))?
        .add(&outs[2].scale(-1.0))?
        .add(&outs[3])?
        .scale(1.0 / (4.0 * eps * eps));
    let omega = 2.0 * PI / period;
    let coefficient = -nu * width * k as f64 * omega;
    let predicted = FourierTimeSeries::sine(period, measured.n_modes(), k, coefficient);
    let rel_err = sup_distance(&measured, &predicted)? / coefficient.abs();
    Ok(SecondDerivativeCheck {
        width,
        nu,
        k,
        eps,
        measured_coefficient: measured.sin_coeff(k),
        measured,
        predicted,
        predicted_coefficient: coefficient,
        rel_err,
    })
}

/// Largest centered-difference residual of the evolution equation over
/// the interior steps of a recorded march, sampled on `nt` times. Only
/// triples with equal spacing inside one piece are used.
pub fn pde_residual(traj: &Trajectory, medium: &Medium, nt: usize) -> Result<f64> {
    let pieces = medium.pieces();
    let mut worst: f64 = 0.0;
    for i in 1..traj.x.len().saturating_sub(1) {
        let (xl, x, xr) = (traj.x[i - 1], traj.x[i], traj.x[i + 1]);
        if !(xl < x && x < xr) || ((xr - x) - (x - xl)).abs() > 1e-9 * (xr - xl) {
            continue;
        }
        let Some(piece) = pieces.iter().find(|p| p.x0 <= xl && xr <= p.x1) else {
            continue;
        };
        let y = &traj.states[i];
        let m = nt.max(2 * y.n_modes() + 1);
        let left = traj.states[i - 1].to_samples(m)?;
        let right = traj.states[i + 1].to_samples(m)?;
        let rhs = evolution_rhs_samples(y, medium, piece.kind, x, m)?;
        for j in 0..m {
            let dx = (right[j] - left[j]) / (xr - xl);
            worst = worst.max((dx - rhs[j]).abs());
        }
    }
    Ok(worst)
}

/// Right-hand side `y_x` of the evolution equation on `m` sample times.
fn evolution_rhs_samples(y: &FourierTimeSeries, medium: &Medium, kind: PieceKind, x: f64, m: usize) -> Result<Vec<f64>> {
    let even = y.project_even();
    let w = even.to_samples(m)?;
    match medium {
        Medium::Nondim { nu, .. } => {
            let yt = y.derivative().to_samples(m)?;
            (0..m).map(|j| Ok(-nondim_sigma(w[j], *nu, x)? * yt[j])).collect()
        }
        Medium::Physical { field } => {
            let s = match kind {
                PieceKind::Constant { s, .. } => s,
                PieceKind::Affine(sg) => sg.entropy_at(x),
            };
            let pt = even.derivative().to_samples(m)?;
            let ut = y.project_odd().derivative().to_samples(m)?;
            Ok((0..m).map(|j| -ut[j] + field.gas().v_p(w[j], s) * pt[j]).collect())
        }
    }
}

/// Writes `y(x_i, t_j)` as CSV rows `x,t,y`.
pub fn write_trajectory_csv<W: std::io::Write>(traj: &Trajectory, writer: W, nt: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "t", "y"])?;
    for (x, y) in traj.x.iter().zip(&traj.states) {
        let values = y.to_samples(nt.max(2 * y.n_modes() + 1))?;
        let m = values.len();
        for (j, v) in values.iter().enumerate() {
            let t = y.period() * j as f64 / m as f64;
            w.write_record([format!("{x:.16e}"), format!("{t:.16e}"), format!("{v:.16e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
