//! Linear theory for general entropy profiles.
//!
//! The separated linearized system is `phi' = -omega psi`,
//! `psi' = omega sigma^2 phi`. Writing the first column as
//! `phi = r cos(theta) / rho`, `psi = r rho sin(theta)` with `rho = sqrt(sigma)`
//! (and the second column with `-sin`, `cos` and a tilde) turns it into
//! scalar angle equations plus quadratures for `log r`. Smooth pieces of
//! the profile are integrated with an adaptive Dormand-Prince pair; at a
//! jump of sigma the angles are transferred exactly by `h`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};
use ode_solvers::{Dopri5, OutputType, SVector, System};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindiv::{h, h_dx, readout_row, Flavor};
use crate::profiles::SigmaField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SturmSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SturmSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-11,
        }
    }
}

impl SturmSettings {
    pub fn tight() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-14,
        }
    }
}

/// Integrated quantities along `[0, x]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PruferState {
    theta: f64,
    log_r: f64,
    theta_c: f64,
    log_r_c: f64,
    /// `d theta / d omega`.
    zeta: f64,
    /// `integral of r^2 sigma`, so that `r^2 zeta` equals it.
    r2_sigma: f64,
    /// Variation-of-parameters coefficients for the inhomogeneous system.
    a: f64,
    b: f64,
}

type Packed = SVector<f64, 8>;

impl PruferState {
    fn initial() -> Self {
        Self {
            theta: 0.0,
            log_r: 0.0,
            theta_c: 0.0,
            log_r_c: 0.0,
            zeta: 0.0,
            r2_sigma: 0.0,
            a: 0.0,
            b: 0.0,
        }
    }

    fn pack(&self) -> Packed {
        Packed::from_column_slice(&[
            self.theta,
            self.log_r,
            self.theta_c,
            self.log_r_c,
            self.zeta,
            self.r2_sigma,
            self.a,
            self.b,
        ])
    }

    fn unpack(v: &Packed) -> Self {
        Self {
            theta: v[0],
            log_r: v[1],
            theta_c: v[2],
            log_r_c: v[3],
            zeta: v[4],
            r2_sigma: v[5],
            a: v[6],
            b: v[7],
        }
    }

    /// Exact transfer across a jump of sigma from `left` to `right`.
    fn cross_jump(&mut self, left: f64, right: f64) {
        let j = left / right;
        let (s, c) = self.theta.sin_cos();
        self.zeta *= h_dx(j, self.theta);
        self.log_r += 0.5 * (c * c / j + j * s * s).ln();
        self.theta = h(j, self.theta);
        let (s, c) = self.theta_c.sin_cos();
        self.log_r_c += 0.5 * (s * s / j + j * c * c).ln();
        self.theta_c = h(1.0 / j, self.theta_c);
    }
}

struct PruferRhs<'a> {
    field: &'a SigmaField,
    seg: usize,
    omega: f64,
    rho0: f64,
}

impl System<f64, Packed> for PruferRhs<'_> {
    fn system(&self, x: f64, y: &Packed, dy: &mut Packed) {
        let sigma = self.field.sigma_in(self.seg, x);
        let q = 0.5 * self.field.dlog_sigma_in(self.seg, x);
        let vpp = self.field.v_pp_at(self.seg, x);
        let rho = sigma.sqrt();
        let (s2, c2) = (2.0 * y[0]).sin_cos();
        let (s2c, c2c) = (2.0 * y[2]).sin_cos();
        dy[0] = self.omega * sigma - q * s2;
        dy[1] = q * c2;
        dy[2] = self.omega * sigma + q * s2c;
        dy[3] = -q * c2c;
        dy[4] = sigma - 2.0 * q * c2 * y[4];
        dy[5] = (2.0 * y[1]).exp() * sigma;
        let phi = self.rho0 * y[1].exp() * y[0].cos() / rho;
        let phi_c = -y[3].exp() * y[2].sin() / (rho * self.rho0);
        dy[6] = vpp * self.omega * phi * phi_c;
        dy[7] = -vpp * self.omega * phi * phi;
    }
}

fn integration_error(x: f64, e: impl std::fmt::Display) -> Error {
    Error::Integration {
        x,
        reason: e.to_string(),
    }
}

/// Samples of the Prüfer variables along the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferTrace {
    pub omega: f64,
    pub x: Vec<f64>,
    /// Sigma at each sample, on the side the sample belongs to.
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    pub log_r: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub log_r_c: Vec<f64>,
    pub zeta: Vec<f64>,
    pub rho0: f64,
    #[serde(skip)]
    end: Option<EndValues>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EndValues {
    r2_sigma: f64,
    a: f64,
    b: f64,
}

impl PruferTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Prüfer-native fundamental matrix at sample `i`.
    pub fn native_matrix(&self, i: usize) -> Matrix2<f64> {
        let rho = self.sigma[i].sqrt();
        let r = self.log_r[i].exp();
        let rc = self.log_r_c[i].exp();
        Matrix2::new(
            r * self.theta[i].cos() / rho,
            -rc * self.theta_c[i].sin() / rho,
            r * rho * self.theta[i].sin(),
            rc * rho * self.theta_c[i].cos(),
        )
    }

    /// Fundamental matrix at sample `i`, normalized to the identity at 0.
    pub fn matrix(&self, i: usize) -> Matrix2<f64> {
        self.native_matrix(i) * Matrix2::new(self.rho0, 0.0, 0.0, 1.0 / self.rho0)
    }

    /// `r r~ cos(theta - theta~)`, which must stay 1.
    pub fn determinant_identity(&self, i: usize) -> f64 {
        (self.log_r[i] + self.log_r_c[i]).exp() * (self.theta[i] - self.theta_c[i]).cos()
    }

    pub fn last(&self) -> usize {
        self.x.len() - 1
    }
}

/// Integrates the Prüfer system on `[0, x_stop]`; every accepted step is
/// recorded in the returned trace.
fn sweep(field: &SigmaField, omega: f64, x_stop: f64, settings: &SturmSettings) -> Result<PruferTrace> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Argument(format!("frequency must be positive, got {omega}")));
    }
    let rho0 = field.sigma_start().sqrt();
    let mut trace = PruferTrace {
        omega,
        x: Vec::new(),
        sigma: Vec::new(),
        theta: Vec::new(),
        log_r: Vec::new(),
        theta_c: Vec::new(),
        log_r_c: Vec::new(),
        zeta: Vec::new(),
        rho0,
        end: None,
    };
    let push = |t: &mut PruferTrace, x: f64, sigma: f64, st: &PruferState| {
        t.x.push(x);
        t.sigma.push(sigma);
        t.theta.push(st.theta);
        t.log_r.push(st.log_r);
        t.theta_c.push(st.theta_c);
        t.log_r_c.push(st.log_r_c);
        t.zeta.push(st.zeta);
    };

    let mut state = PruferState::initial();
    push(&mut trace, 0.0, field.sigma_start(), &state);
    let segments = field.segments();
    for (i, sg) in segments.iter().enumerate() {
        if sg.x0 >= x_stop {
            break;
        }
        if i > 0 {
            let left = field.sigma_in(i - 1, sg.x0);
            let right = field.sigma_in(i, sg.x0);
            if left != right {
                state.cross_jump(left, right);
                push(&mut trace, sg.x0, right, &state);
            }
        }
        let x_end = sg.x1.min(x_stop);
        if x_end <= sg.x0 {
            continue;
        }
        let rhs = PruferRhs {
            field,
            seg: i,
            omega,
            rho0,
        };
        let mut solver = Dopri5::new(
            rhs,
            sg.x0,
            x_end,
            x_end - sg.x0,
            state.pack(),
            settings.rel_tol,
            settings.abs_tol,
        );
        solver.set_output(OutputType::Sparse);
        solver.integrate().map_err(|e| integration_error(sg.x0, e))?;
        for (x, y) in solver.x_out().iter().zip(solver.y_out()).skip(1) {
            let st = PruferState::unpack(y);
            push(&mut trace, *x, field.sigma_in(i, *x), &st);
        }
        state = PruferState::unpack(solver.y_out().last().unwrap());
        if !state.theta.is_finite() || !state.log_r.is_finite() {
            return Err(integration_error(x_end, "non-finite Prüfer state"));
        }
    }
    trace.end = Some(EndValues {
        r2_sigma: state.r2_sigma,
        a: state.a,
        b: state.b,
    });
    Ok(trace)
}

/// Prüfer trace over the whole profile at frequency `omega`.
pub fn integrate_prufer(field: &SigmaField, omega: f64, settings: &SturmSettings) -> Result<PruferTrace> {
    sweep(field, omega, field.length(), settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    IdentityAtZero,
    PruferNative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    pub matrix: Matrix2<f64>,
    pub normalization: Normalization,
}

/// `Psi(x; omega)` normalized so that `Psi(0) = I`.
pub fn fundamental_matrix(
    field: &SigmaField,
    omega: f64,
    x: f64,
    settings: &SturmSettings,
) -> Result<FundamentalMatrix> {
    if x < 0.0 || x > field.length() * (1.0 + 1e-14) {
        return Err(Error::Argument(format!("x = {x} outside the profile")));
    }
    if x == 0.0 {
        return Ok(FundamentalMatrix {
            matrix: Matrix2::identity(),
            normalization: Normalization::IdentityAtZero,
        });
    }
    let trace = sweep(field, omega, x, settings)?;
    Ok(FundamentalMatrix {
        matrix: trace.matrix(trace.last()),
        normalization: Normalization::IdentityAtZero,
    })
}

/// Divisor in the scaled-frame convention: the readout row applied to
/// `(phi, psi / sigma)` at the right end, for mode `k` at period `T`.
pub fn aligned_divisor(
    field: &SigmaField,
    period: f64,
    k: usize,
    flavor: Flavor,
    settings: &SturmSettings,
) -> Result<f64> {
    let omega = k as f64 * 2.0 * PI / period;
    let psi = fundamental_matrix(field, omega, field.length(), settings)?.matrix;
    let col = Vector2::new(psi[(0, 0)], psi[(1, 0)] / field.sigma_end());
    Ok((readout_row(k, flavor) * col)[0])
}

/// Unscaled acoustic divisor `(0 1) Psi(l; k 2 pi / T) (1 0)^T`.
pub fn acoustic_divisor(field: &SigmaField, period: f64, k: usize, settings: &SturmSettings) -> Result<f64> {
    let omega = k as f64 * 2.0 * PI / period;
    Ok(fundamental_matrix(field, omega, field.length(), settings)?.matrix[(1, 0)])
}

/// Total angle `theta(l, omega)` and `zeta(l) = d theta / d omega`.
pub fn end_angle(field: &SigmaField, omega: f64, settings: &SturmSettings) -> Result<(f64, f64)> {
    let t = integrate_prufer(field, omega, settings)?;
    let i = t.last();
    Ok((t.theta[i], t.zeta[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaReport {
    /// From the variational equation with jump transfers.
    pub ode: f64,
    /// From `r^2 zeta = integral of r^2 sigma`.
    pub quadrature: f64,
}

pub fn dtheta_domega(field: &SigmaField, omega: f64, settings: &SturmSettings) -> Result<ZetaReport> {
    let t = integrate_prufer(field, omega, settings)?;
    let i = t.last();
    let end = t.end.expect("sweep records end values");
    Ok(ZetaReport {
        ode: t.zeta[i],
        quadrature: end.r2_sigma / (2.0 * t.log_r[i]).exp(),
    })
}

/// SL eigenfrequency with its eigenfunction samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub k: usize,
    pub flavor: Flavor,
    pub omega: f64,
    /// Reference period `k 2 pi / omega`.
    pub period: f64,
    /// `theta(l) - k pi / 2`.
    pub angle_residual: f64,
    /// Boundary residual relative to `max |phi|`.
    pub boundary_residual: f64,
    pub zeta_end: f64,
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl Eigenpair {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "phi", "psi"])?;
        for i in 0..self.x.len() {
            w.write_record([
                format!("{:.16e}", self.x[i]),
                format!("{:.16e}", self.phi[i]),
                format!("{:.16e}", self.psi[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Root of `theta(l, omega) = k pi / 2`.
pub fn eigenfrequency(
    field: &SigmaField,
    k: usize,
    flavor: Flavor,
    settings: &SturmSettings,
) -> Result<Eigenpair> {
    if k < 1 {
        return Err(Error::Argument("mode index must be at least 1".into()));
    }
    if flavor == Flavor::Acoustic && k % 2 == 1 {
        return Err(Error::Argument(format!(
            "acoustic eigenfrequencies use even mode indices, got k = {k}"
        )));
    }
    let target = k as f64 * FRAC_PI_2;
    let mass = field.integral();
    let variation = field.log_sqrt_sigma_variation();
    let f = |w: f64| end_angle(field, w, settings).map(|(t, _)| t - target);

    let mut lo = ((target - variation) / mass).max(0.0);
    let mut hi = (target + variation) / mass * (1.0 + 1e-9) + 1e-12;
    if lo > 0.0 && f(lo)? > 0.0 {
        lo = 0.0;
    }
    let mut expansions = 0;
    while f(hi)? < 0.0 {
        hi *= 1.5;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Integration {
                x: field.length(),
                reason: format!("no eigenfrequency bracket for k = {k}"),
            });
        }
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut omega = 0.5 * (lo + hi);
    for _ in 0..12 {
        let (theta, zeta) = end_angle(field, omega, settings)?;
        let res = theta - target;
        if res.abs() < 1e-13 * target.max(1.0) {
            break;
        }
        if res < 0.0 {
            lo = omega;
        } else {
            hi = omega;
        }
        let next = omega - res / zeta;
        omega = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }

    let trace = integrate_prufer(field, omega, settings)?;
    let n = trace.len();
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let m = trace.matrix(i);
        phi.push(m[(0, 0)]);
        psi.push(m[(1, 0)]);
    }
    let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let end_value = if k % 2 == 1 { phi[n - 1] } else { psi[n - 1] / field.sigma_end() };
    let i = trace.last();
    Ok(Eigenpair {
        k,
        flavor,
        omega,
        period: k as f64 * 2.0 * PI / omega,
        angle_residual: trace.theta[i] - target,
        boundary_residual: end_value.abs() / scale,
        zeta_end: trace.zeta[i],
        x: trace.x,
        phi,
        psi,
    })
}

/// Second-order response of the evolution to the pair (0-mode, k-mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuhamelCoefficient {
    pub phi_hat: f64,
    pub psi_hat: f64,
    pub a: f64,
    pub b: f64,
    /// `phi_hat` for odd `k`, `psi_hat` for even `k`.
    pub coefficient: f64,
    /// Sign of `v_pp` over the profile.
    pub vpp_sign: f64,
}

/// Sign of `v_pp(p_bar, s(x))` over the profile, or an error when it
/// vanishes or changes sign at any sampled point.
pub fn vpp_sign(field: &SigmaField) -> Result<f64> {
    let mut sign = 0.0;
    for (i, sg) in field.segments().iter().enumerate() {
        for x in [sg.x0, 0.5 * (sg.x0 + sg.x1), sg.x1] {
            let v = field.v_pp_at(i, x);
            if v == 0.0 || !v.is_finite() || (sign != 0.0 && v.signum() != sign) {
                return Err(Error::GenuineNonlinearity(format!(
                    "v_pp = {v:e} at x = {x}"
                )));
            }
            sign = v.signum();
        }
    }
    Ok(sign)
}

/// Solves the inhomogeneous SL system by variation of parameters in the
/// Prüfer frame at the eigenfrequency of `pair`.
pub fn duhamel_bifurcation_coefficient(
    field: &SigmaField,
    pair: &Eigenpair,
    settings: &SturmSettings,
) -> Result<DuhamelCoefficient> {
    let vpp_sign = vpp_sign(field)?;
    let trace = integrate_prufer(field, pair.omega, settings)?;
    let end = trace.end.expect("sweep records end values");
    let psi = trace.matrix(trace.last());
    let hat = psi * Vector2::new(end.a, end.b);
    let coefficient = if pair.k % 2 == 1 { hat[0] } else { hat[1] };
    if !(end.b * vpp_sign < 0.0) {
        return Err(Error::GenuineNonlinearity(format!(
            "b(l) = {:e} does not have the sign of -v_pp",
            end.b
        )));
    }
    if coefficient == 0.0 || !coefficient.is_finite() {
        return Err(Error::GenuineNonlinearity("bifurcation coefficient vanishes".into()));
    }
    Ok(DuhamelCoefficient {
        phi_hat: hat[0],
        psi_hat: hat[1],
        a: end.a,
        b: end.b,
        coefficient,
        vpp_sign,
    })
}

struct DirectRhs<'a> {
    field: &'a SigmaField,
    seg: usize,
    omega: f64,
}

impl System<f64, SVector<f64, 4>> for DirectRhs<'_> {
    fn system(&self, x: f64, y: &SVector<f64, 4>, dy: &mut SVector<f64, 4>) {
        let s2 = self.field.sigma_in(self.seg, x).powi(2);
        let vpp = self.field.v_pp_at(self.seg, x);
        let w = self.omega;
        dy[0] = -w * y[1];
        dy[1] = w * s2 * y[0];
        dy[2] = -w * y[3];
        dy[3] = w * s2 * y[2] - vpp * w * y[0];
    }
}

/// Independent oracle: integrates the eigenfunction and the inhomogeneous
/// system directly in `(phi, psi)` and returns `(phi_hat(l), psi_hat(l))`.
pub fn duhamel_direct(field: &SigmaField, omega: f64, settings: &SturmSettings) -> Result<(f64, f64)> {
    let mut y = SVector::<f64, 4>::new(1.0, 0.0, 0.0, 0.0);
    for (i, sg) in field.segments().iter().enumerate() {
        let rhs = DirectRhs {
            field,
            seg: i,
            omega,
        };
        let mut solver = Dopri5::new(rhs, sg.x0, sg.x1, sg.x1 - sg.x0, y, settings.rel_tol, settings.abs_tol);
        solver.set_output(OutputType::Sparse);
        solver.integrate().map_err(|e| integration_error(sg.x0, e))?;
        y = *solver.y_out().last().unwrap();
    }
    Ok((y[2], y[3]))
}

struct PairRhs<'a> {
    field: &'a SigmaField,
    seg: usize,
    omegas: (f64, f64),
}

impl System<f64, SVector<f64, 5>> for PairRhs<'_> {
    fn system(&self, x: f64, y: &SVector<f64, 5>, dy: &mut SVector<f64, 5>) {
        let s2 = self.field.sigma_in(self.seg, x).powi(2);
        let (wj, wk) = self.omegas;
        dy[0] = -wj * y[1];
        dy[1] = wj * s2 * y[0];
        dy[2] = -wk * y[3];
        dy[3] = wk * s2 * y[2];
        dy[4] = s2 * y[0] * y[2];
    }
}

/// `integral of sigma^2 phi_j phi_k` for the first columns of `Psi` at two
/// frequencies, integrated alongside both solutions.
pub fn weighted_inner_product(
    field: &SigmaField,
    omega_j: f64,
    omega_k: f64,
    settings: &SturmSettings,
) -> Result<f64> {
    let mut y = SVector::<f64, 5>::new(1.0, 0.0, 1.0, 0.0, 0.0);
    for (i, sg) in field.segments().iter().enumerate() {
        let rhs = PairRhs {
            field,
            seg: i,
            omegas: (omega_j, omega_k),
        };
        let mut solver = Dopri5::new(rhs, sg.x0, sg.x1, sg.x1 - sg.x0, y, settings.rel_tol, settings.abs_tol);
        solver.set_output(OutputType::Sparse);
        solver.integrate().map_err(|e| integration_error(sg.x0, e))?;
        y = *solver.y_out().last().unwrap();
    }
    Ok(y[4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindiv::{base_frequency, divisor_pc};
    use crate::profiles::{sigma_of_x, EntropyProfile, Interpolation, PiecewiseConstantProfile, SampledProfile};
    use crate::thermo::{Gas, GammaLawGas};
    use approx::assert_relative_eq;

    fn gas() -> Gas {
        Gas::GammaLaw(GammaLawGas::new(1.4, 1.0).unwrap())
    }

    fn pc_field(widths: Vec<f64>, jumps: Vec<f64>) -> (SigmaField, PiecewiseConstantProfile) {
        let p = PiecewiseConstantProfile::new(widths, jumps).unwrap();
        let f = sigma_of_x(&EntropyProfile::Piecewise(p.clone()), &gas(), 1.0).unwrap();
        (f, p)
    }

    fn smooth_field(amp: f64, len: f64) -> SigmaField {
        let p = SampledProfile::from_fn(len, 64, Interpolation::Linear, |x| amp * (3.0 * x).sin()).unwrap();
        sigma_of_x(&EntropyProfile::Sampled(p), &gas(), 1.0).unwrap()
    }

    #[test]
    fn constant_sigma_closed_forms() {
        let (f, _) = pc_field(vec![1.7], vec![]);
        let s0 = f.sigma_start();
        let w = 2.3;
        let t = integrate_prufer(&f, w, &SturmSettings::default()).unwrap();
        let i = t.last();
        assert_relative_eq!(t.theta[i], w * s0 * 1.7, max_relative = 1e-12);
        assert!(t.log_r[i].abs() < 1e-15);
        let psi = fundamental_matrix(&f, w, 1.1, &SturmSettings::default()).unwrap().matrix;
        let a = w * s0 * 1.1;
        let expect = Matrix2::new(a.cos(), -a.sin() / s0, s0 * a.sin(), a.cos());
        assert!((psi - expect).amax() < 1e-10);
        let z = dtheta_domega(&f, w, &SturmSettings::default()).unwrap();
        assert_relative_eq!(z.ode, s0 * 1.7, max_relative = 1e-10);
        let e = eigenfrequency(&f, 3, Flavor::PeriodicTile, &SturmSettings::default()).unwrap();
        assert_relative_eq!(e.omega, 3.0 * PI / (2.0 * s0 * 1.7), max_relative = 1e-12);
        assert_eq!(
            fundamental_matrix(&f, w, 0.0, &SturmSettings::default()).unwrap().matrix,
            Matrix2::identity()
        );
    }

    #[test]
    fn single_jump_matches_gamma_angle() {
        let (f, p) = pc_field(vec![0.6, 0.9], vec![1.8]);
        let scaled = p.to_scaled_frame(&gas(), 1.0).unwrap();
        let w = 3.1;
        let (theta, _) = end_angle(&f, w, &SturmSettings::default()).unwrap();
        let g = crate::lindiv::gamma_angles(&scaled, w);
        let expect = w * scaled.widths()[1] + g[0];
        assert!((theta - expect).abs() < 1e-10);
    }

    #[test]
    fn divisors_match_lindiv() {
        let (f, p) = pc_field(vec![0.3, 0.5, 0.2, 0.4], vec![1.6, 0.7, 2.2]);
        let scaled = p.to_scaled_frame(&gas(), 1.0).unwrap();
        for k in 1..=12usize {
            for fl in [Flavor::PeriodicTile, Flavor::Acoustic] {
                let a = aligned_divisor(&f, 2.7, k, fl, &SturmSettings::default()).unwrap();
                let b = divisor_pc(&scaled, 2.7, k, fl);
                assert!((a - b).abs() < 1e-8 * b.abs().max(1e-3), "k={k} {a} {b}");
            }
        }
    }

    #[test]
    fn determinant_and_angle_gap() {
        let f = smooth_field(0.8, 2.0);
        let t = integrate_prufer(&f, 4.0, &SturmSettings::default()).unwrap();
        for i in 0..t.len() {
            assert!((t.determinant_identity(i) - 1.0).abs() < 1e-8);
            assert!((t.theta[i] - t.theta_c[i]).abs() < FRAC_PI_2);
            assert!((t.matrix(i).determinant() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn fundamental_matrix_solves_the_system() {
        let f = smooth_field(0.5, 1.5);
        let (w, x, dx) = (2.5, 0.77, 1e-5);
        let s = SturmSettings::tight();
        let up = fundamental_matrix(&f, w, x + dx, &s).unwrap().matrix;
        let dn = fundamental_matrix(&f, w, x - dx, &s).unwrap().matrix;
        let mid = fundamental_matrix(&f, w, x, &s).unwrap().matrix;
        let sig = f.sigma_at(x);
        let a = Matrix2::new(0.0, -w, w * sig * sig, 0.0);
        let resid = (up - dn) / (2.0 * dx) - a * mid;
        assert!(resid.amax() < 1e-7);
    }

    #[test]
    fn zeta_two_ways() {
        let (f, _) = pc_field(vec![0.3, 0.5, 0.2], vec![1.6, 0.7]);
        let z = dtheta_domega(&f, 5.0, &SturmSettings::default()).unwrap();
        assert!(z.ode > 0.0 && z.quadrature > 0.0);
        assert_relative_eq!(z.ode, z.quadrature, max_relative = 1e-8);
        let g = smooth_field(0.9, 1.0);
        let z = dtheta_domega(&g, 7.0, &SturmSettings::default()).unwrap();
        assert_relative_eq!(z.ode, z.quadrature, max_relative = 1e-8);
        let t = integrate_prufer(&g, 7.0, &SturmSettings::default()).unwrap();
        assert!(t.zeta.iter().skip(1).all(|&v| v > 0.0));
    }

    #[test]
    fn eigenfrequencies_match_base_frequencies() {
        let (f, p) = pc_field(vec![0.3, 0.5, 0.2], vec![1.6, 0.7]);
        let scaled = p.to_scaled_frame(&gas(), 1.0).unwrap();
        let mut prev = 0.0;
        for k in 1..=10 {
            let e = eigenfrequency(&f, k, Flavor::PeriodicTile, &SturmSettings::default()).unwrap();
            let b = base_frequency(&scaled, k).unwrap();
            assert_relative_eq!(e.omega, b.omega, max_relative = 1e-9);
            assert!(e.omega > prev);
            assert!(e.boundary_residual < 1e-8);
            prev = e.omega;
        }
        assert!(eigenfrequency(&f, 3, Flavor::Acoustic, &SturmSettings::default()).is_err());
    }

    #[test]
    fn eigenfunction_orthogonality_within_a_boundary_class() {
        let f = smooth_field(0.6, 1.0);
        let s = SturmSettings::tight();
        let omegas: Vec<f64> = (1..=8)
            .map(|k| eigenfrequency(&f, k, Flavor::PeriodicTile, &s).unwrap().omega)
            .collect();
        let norm = |w: f64| weighted_inner_product(&f, w, w, &s).unwrap().sqrt();
        // Odd and even k carry different conditions at x = l, so
        // orthogonality holds within each parity class.
        for j in 0..8 {
            for k in (j + 2..8).step_by(2) {
                let d = weighted_inner_product(&f, omegas[j], omegas[k], &s).unwrap();
                let scale = norm(omegas[j]) * norm(omegas[k]);
                assert!(d.abs() < 1e-6 * scale, "j={} k={} d={d:e}", j + 1, k + 1);
            }
        }
    }

    #[test]
    fn duhamel_matches_direct_ode() {
        let f = smooth_field(0.7, 1.3);
        for k in [1usize, 2, 3] {
            let e = eigenfrequency(&f, k, Flavor::PeriodicTile, &SturmSettings::tight()).unwrap();
            let d = duhamel_bifurcation_coefficient(&f, &e, &SturmSettings::tight()).unwrap();
            assert!(d.b < 0.0 && d.vpp_sign > 0.0);
            let (ph, ps) = duhamel_direct(&f, e.omega, &SturmSettings::tight()).unwrap();
            assert_relative_eq!(d.phi_hat, ph, max_relative = 1e-8);
            assert_relative_eq!(d.psi_hat, ps, max_relative = 1e-8);
        }
    }

    #[test]
    fn duhamel_constant_sigma_closed_form() {
        let (f, _) = pc_field(vec![1.0], vec![]);
        let e = eigenfrequency(&f, 1, Flavor::PeriodicTile, &SturmSettings::tight()).unwrap();
        let d = duhamel_bifurcation_coefficient(&f, &e, &SturmSettings::tight()).unwrap();
        // b(l) = -v_pp omega * integral of cos^2(omega sigma x) over [0, 1]
        let s0 = f.sigma_start();
        let a = e.omega * s0;
        let integral = 0.5 + (2.0 * a).sin() / (4.0 * a);
        let vpp = f.v_pp_at(0, 0.0);
        assert_relative_eq!(d.b, -vpp * e.omega * integral, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_law_is_rejected() {
        let g = Gas::General(crate::thermo::GeneralGas::named("degenerate-linear").unwrap());
        let p = PiecewiseConstantProfile::uniform(1.0).unwrap();
        let f = sigma_of_x(&EntropyProfile::Piecewise(p), &g, 1.0).unwrap();
        let e = eigenfrequency(&f, 1, Flavor::PeriodicTile, &SturmSettings::default()).unwrap();
        let err = duhamel_bifurcation_coefficient(&f, &e, &SturmSettings::default()).unwrap_err();
        assert!(matches!(err, Error::GenuineNonlinearity(_)));
    }

    #[test]
    fn tolerance_refinement_is_stable() {
        for amp in [0.2, 0.5, 0.9] {
            let f = smooth_field(amp, 1.0);
            let coarse = end_angle(&f, 6.0, &SturmSettings::default()).unwrap().0;
            let fine = end_angle(
                &f,
                6.0,
                &SturmSettings { rel_tol: 1e-10 / 32.0, abs_tol: 1e-11 / 32.0 },
            )
            .unwrap()
            .0;
            assert!((coarse - fine).abs() < 1e-9);
        }
    }
}
