//! Liapunov-Schmidt reduction of the boundary operator around the quiet
//! state and the pure-tone solver built on it.
//!
//! Data are `y0 = rest + z + alpha cos_k + W` with `W` an even series free
//! of the constant and the `k` mode. The auxiliary equation projects
//! `F(y0)` off `sin_k` and is solved for `W` by a chord iteration whose
//! preconditioner is the mode-wise division by the divisors at the quiet
//! state; it is never rebuilt. What remains is the scalar `sin_k`
//! coefficient `f(alpha, z)`, which is solved for `z` by a bracketed
//! Illinois iteration on `g = f / alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{
    boundary_operator, evolve_recorded, linear_companion, pde_residual, BoundaryOperatorSpec,
    EvolutionState, EvolveSettings, Frame, Medium, Trajectory,
};
use crate::exec::Execution;
use crate::lindiv::{base_frequency, Flavor, DEFAULT_RESONANCE_TOL};
use crate::sturm::{eigenfrequency, SturmSettings};
use crate::timeseries::FourierTimeSeries;

/// Numerical parameters of the reduction and the solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BifurcationSettings {
    /// Retained modes `N` for both the solve and the residual report.
    pub modes: usize,
    /// Divisors at or below this magnitude count as resonant.
    pub resonance_tol: f64,
    /// The bifurcating divisor must be below this after period polishing.
    pub kernel_tol: f64,
    /// Stop the chord iteration once every preconditioned update is below this.
    pub aux_tol: f64,
    pub aux_max_iter: usize,
    pub aux_method: AuxMethod,
    /// Largest admissible `max_j |delta_j a_j|` for the iterate `W`.
    pub trust_radius: f64,
    /// `|f|` accepted as a root of the bifurcation equation.
    pub root_tol: f64,
    pub root_max_iter: usize,
    pub bracket_factor: f64,
    pub bracket_expansions: usize,
    /// One-sided step for `g(0, z)`, relative to the amplitude scale.
    pub eps_alpha: f64,
    /// Re-solve with `2N` modes and report the coefficient gap.
    pub verify_truncation: bool,
    pub evolve: EvolveSettings,
    pub sturm: SturmSettings,
}

impl Default for BifurcationSettings {
    fn default() -> Self {
        Self {
            modes: 16,
            resonance_tol: DEFAULT_RESONANCE_TOL,
            kernel_tol: 1e-10,
            aux_tol: 1e-12,
            aux_max_iter: 200,
            aux_method: AuxMethod::Chord,
            trust_radius: 0.5,
            root_tol: 1e-14,
            root_max_iter: 80,
            bracket_factor: 10.0,
            bracket_expansions: 4,
            eps_alpha: 1e-7,
            verify_truncation: false,
            evolve: EvolveSettings::default(),
            sturm: SturmSettings::default(),
        }
    }
}

impl BifurcationSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("resonance_tol", self.resonance_tol),
            ("kernel_tol", self.kernel_tol),
            ("aux_tol", self.aux_tol),
            ("trust_radius", self.trust_radius),
            ("root_tol", self.root_tol),
            ("bracket_factor", self.bracket_factor),
            ("eps_alpha", self.eps_alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.modes < 2 {
            return Err(Error::Argument("at least two modes are needed".into()));
        }
        self.evolve.validate()
    }

    fn evolve_settings(&self, modes: usize) -> EvolveSettings {
        EvolveSettings {
            modes,
            ..self.evolve
        }
    }
}

/// Iteration used for the auxiliary equation. Both use the same frozen
/// divisor-wise preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuxMethod {
    /// `W <- W - P^{-1} Pi F(W)`.
    #[default]
    Chord,
    /// Damped Newton on `P^{-1} Pi F`, each step solved by matrix-free GMRES
    /// with finite-difference directional derivatives.
    NewtonKrylov,
}

/// Kernel/complement split at the reference period of mode `k`.
#[derive(Debug, Clone)]
pub struct LSDecomposition {
    pub k: usize,
    pub period: f64,
    pub flavor: Flavor,
    pub modes: usize,
    /// `divisors[j]` for `j = 0..=N` at the reference period (`j = 0` unused).
    pub divisors: Vec<f64>,
    /// `d delta_k / dz` for the linearization about `rest + z`, which equals
    /// `dg/dz (0, 0)`.
    pub dg_dz: f64,
    pub spec: BoundaryOperatorSpec,
    pub settings: BifurcationSettings,
}

impl LSDecomposition {
    pub fn medium(&self) -> &Medium {
        &self.spec.medium
    }

    pub fn rest_value(&self) -> f64 {
        self.spec.medium.rest_value()
    }

    /// Complement modes `j != k`.
    pub fn complement(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.modes).filter(move |&j| j != self.k)
    }

    pub fn fingerprint(&self) -> String {
        self.spec.medium.fingerprint()
    }

    /// Data `rest + z + alpha cos_k + W`.
    pub fn data(&self, alpha: f64, z: f64, w: &FourierTimeSeries) -> FourierTimeSeries {
        let mut y = w.with_modes(self.modes);
        y.set_cos(0, self.rest_value() + z);
        y.set_cos(self.k, alpha);
        y
    }

    /// Applies the frozen preconditioner to the odd residual.
    fn precondition(&self, residual: &FourierTimeSeries) -> Vec<(usize, f64)> {
        self.complement()
            .map(|j| (j, residual.sin_coeff(j) / self.divisors[j]))
            .collect()
    }

    /// Preconditioned directional derivative of `F` at the quiet state
    /// along `cos_j`, by a symmetric difference. For a nonresonant split
    /// it is `cos_j` up to `O(eps^2)`.
    pub fn preconditioned_column(&self, j: usize, eps: f64) -> Result<FourierTimeSeries> {
        let settings = self.settings.evolve_settings(self.modes);
        let rest = FourierTimeSeries::constant(self.period, self.modes, self.rest_value());
        let dir = FourierTimeSeries::cosine(self.period, self.modes, j, eps);
        let plus = boundary_operator(&self.spec, &rest.add(&dir)?, &settings)?;
        let minus = boundary_operator(&self.spec, &rest.add(&dir.scale(-1.0))?, &settings)?;
        let d = plus.add(&minus.scale(-1.0))?.scale(0.5 / eps);
        let mut out = FourierTimeSeries::zeros(self.period, self.modes);
        for i in self.complement() {
            out.set_cos(i, d.sin_coeff(i) / self.divisors[i]);
        }
        Ok(out)
    }
}

/// Reference period of mode `k` for the medium and flavor.
pub fn reference_period(medium: &Medium, k: usize, flavor: Flavor, sturm: &SturmSettings) -> Result<f64> {
    if k == 0 {
        return Err(Error::Argument("mode index must be at least 1".into()));
    }
    if flavor == Flavor::Acoustic && k % 2 == 1 {
        return Err(Error::Argument(format!(
            "the acoustic problem has kernel modes only at even k, got k = {k}"
        )));
    }
    let guess = match medium {
        Medium::Nondim { profile, .. } => base_frequency(profile, k)?.period,
        Medium::Physical { field } => eigenfrequency(field, k, flavor, sturm)?.period,
    };
    polish_period(medium, k, flavor, guess, sturm)
}

/// Secant refinement of `delta_k(T) = 0` on the divisor the boundary
/// operator actually sees.
fn polish_period(medium: &Medium, k: usize, flavor: Flavor, guess: f64, sturm: &SturmSettings) -> Result<f64> {
    let d = |t: f64| medium.divisor(t, k, flavor, sturm);
    let (mut t0, mut t1) = (guess, guess * (1.0 + 1e-7));
    let (mut d0, mut d1) = (d(t0)?, d(t1)?);
    for _ in 0..30 {
        if d1 == 0.0 || d1 == d0 {
            break;
        }
        let t2 = t1 - d1 * (t1 - t0) / (d1 - d0);
        t0 = t1;
        d0 = d1;
        t1 = t2;
        d1 = d(t1)?;
        if (t1 - t0).abs() <= 4.0 * f64::EPSILON * t1.abs() {
            break;
        }
    }
    if (t1 - guess).abs() > 1e-3 * guess {
        return Err(Error::Integration {
            x: medium.length(),
            reason: format!("period refinement drifted from {guess} to {t1}"),
        });
    }
    Ok(if d1.abs() <= d0.abs() { t1 } else { t0 })
}

/// Builds the split for mode `k`, rejecting resonant configurations.
pub fn build_decomposition(
    medium: Medium,
    k: usize,
    flavor: Flavor,
    settings: &BifurcationSettings,
    exec: Execution,
) -> Result<LSDecomposition> {
    settings.validate()?;
    let n = settings.modes;
    if k > n {
        return Err(Error::Argument(format!("mode {k} exceeds the truncation {n}")));
    }
    let period = reference_period(&medium, k, flavor, &settings.sturm)?;
    let entries = exec.map(n, |i| medium.divisor(period, i + 1, flavor, &settings.sturm));
    let mut divisors = vec![0.0];
    for d in entries {
        divisors.push(d?);
    }
    if !(divisors[k].abs() < settings.kernel_tol) {
        return Err(Error::Bifurcation(format!(
            "mode {k} is not in the kernel: |delta_k| = {:e}",
            divisors[k].abs()
        )));
    }
    let offenders: Vec<usize> = (1..=n)
        .filter(|&j| j != k && divisors[j].abs() <= settings.resonance_tol)
        .collect();
    if !offenders.is_empty() {
        let min_divisor = offenders.iter().map(|&j| divisors[j].abs()).fold(f64::INFINITY, f64::min);
        return Err(Error::Resonance { offenders, min_divisor });
    }
    let h = 1e-5 * medium.amplitude_scale();
    let plus = medium.linearized_about(h)?.divisor(period, k, flavor, &settings.sturm)?;
    let minus = medium.linearized_about(-h)?.divisor(period, k, flavor, &settings.sturm)?;
    let dg_dz = (plus - minus) / (2.0 * h);
    let spec = BoundaryOperatorSpec::new(flavor, medium, period)?;
    Ok(LSDecomposition {
        k,
        period,
        flavor,
        modes: n,
        divisors,
        dg_dz,
        spec,
        settings: *settings,
    })
}

/// Result of the auxiliary equation at fixed `(alpha, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySolution {
    pub alpha: f64,
    pub z: f64,
    /// Even series supported on the complement modes.
    pub w: FourierTimeSeries,
    /// `F(y0)` at the returned `W`.
    pub residual: FourierTimeSeries,
    /// Largest preconditioned complement residual `|F_j / delta_j|`.
    pub weighted_residual: f64,
    pub iterations: usize,
}

impl AuxiliarySolution {
    /// `sin_k` coefficient of `F(y0)`.
    pub fn f(&self, k: usize) -> f64 {
        self.residual.sin_coeff(k)
    }
}

/// Solves the auxiliary equation for `W(alpha, z)` with the method chosen
/// in the settings.
pub fn solve_auxiliary(
    dec: &LSDecomposition,
    alpha: f64,
    z: f64,
    warm: Option<&FourierTimeSeries>,
) -> Result<AuxiliarySolution> {
    let mut w = match warm {
        Some(w) if alpha != 0.0 => w.project_even().with_modes(dec.modes),
        _ => FourierTimeSeries::zeros(dec.period, dec.modes),
    };
    w.set_cos(0, 0.0);
    w.set_cos(dec.k, 0.0);
    match dec.settings.aux_method {
        AuxMethod::Chord => chord(dec, alpha, z, w),
        AuxMethod::NewtonKrylov => newton_krylov(dec, alpha, z, w),
    }
}

/// Preconditioned complement residual `P^{-1} Pi F` at one iterate.
struct Evaluation {
    residual: FourierTimeSeries,
    updates: Vec<f64>,
    size: f64,
}

fn evaluate(dec: &LSDecomposition, alpha: f64, z: f64, w: &FourierTimeSeries) -> Result<Evaluation> {
    let settings = dec.settings.evolve_settings(dec.modes);
    let residual = boundary_operator(&dec.spec, &dec.data(alpha, z, w), &settings)?;
    let updates: Vec<f64> = dec.precondition(&residual).into_iter().map(|(_, u)| u).collect();
    let size = updates.iter().fold(0.0_f64, |m, &u| m.max(u.abs()));
    if !size.is_finite() {
        return Err(Error::TrustRegion(format!("non-finite residual at alpha = {alpha:e}")));
    }
    Ok(Evaluation { residual, updates, size })
}

fn shifted(dec: &LSDecomposition, w: &FourierTimeSeries, step: &[f64], scale: f64) -> FourierTimeSeries {
    let mut out = w.clone();
    for (j, d) in dec.complement().zip(step) {
        out.set_cos(j, out.cos_coeff(j) + scale * d);
    }
    out
}

fn check_radius(dec: &LSDecomposition, w: &FourierTimeSeries) -> Result<()> {
    let radius = dec
        .complement()
        .map(|j| (dec.divisors[j] * w.cos_coeff(j)).abs())
        .fold(0.0, f64::max);
    if radius > dec.settings.trust_radius {
        return Err(Error::TrustRegion(format!(
            "weighted size {radius:e} of W exceeds the radius {:e}",
            dec.settings.trust_radius
        )));
    }
    Ok(())
}

fn chord(dec: &LSDecomposition, alpha: f64, z: f64, mut w: FourierTimeSeries) -> Result<AuxiliarySolution> {
    let s = &dec.settings;
    let mut best = f64::INFINITY;
    for iter in 0..=s.aux_max_iter {
        let eval = evaluate(dec, alpha, z, &w)?;
        if eval.size < s.aux_tol {
            return Ok(AuxiliarySolution {
                alpha,
                z,
                w,
                residual: eval.residual,
                weighted_residual: eval.size,
                iterations: iter,
            });
        }
        if eval.size > 10.0 * best {
            return Err(Error::TrustRegion(format!(
                "chord iteration diverges at alpha = {alpha:e}, z = {z:e} (update {:e} after {best:e})",
                eval.size
            )));
        }
        best = best.min(eval.size);
        w = shifted(dec, &w, &eval.updates, -1.0);
        check_radius(dec, &w)?;
    }
    Err(Error::TrustRegion(format!(
        "chord iteration did not reach {:e} in {} steps (best update {best:e})",
        s.aux_tol, s.aux_max_iter
    )))
}

fn newton_krylov(dec: &LSDecomposition, alpha: f64, z: f64, mut w: FourierTimeSeries) -> Result<AuxiliarySolution> {
    let s = &dec.settings;
    // Probes are kept small relative to the tone so that they do not trip
    // the spectral-tail monitor on their own.
    let fd_step = 1e-7 * alpha.abs().max(1e-6 * dec.medium().amplitude_scale());
    let mut eval = evaluate(dec, alpha, z, &w)?;
    for iter in 0..=s.aux_max_iter {
        if eval.size < s.aux_tol {
            return Ok(AuxiliarySolution {
                alpha,
                z,
                w,
                residual: eval.residual,
                weighted_residual: eval.size,
                iterations: iter,
            });
        }
        let base = &eval.updates;
        let jv = |v: &[f64]| -> Result<Vec<f64>> {
            let norm = v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            if norm == 0.0 {
                return Ok(vec![0.0; v.len()]);
            }
            let h = fd_step / norm;
            let e = evaluate(dec, alpha, z, &shifted(dec, &w, v, h))?;
            Ok(e.updates.iter().zip(base).map(|(a, b)| (a - b) / h).collect())
        };
        let rhs: Vec<f64> = base.iter().map(|u| -u).collect();
        let step = gmres(jv, &rhs, 1e-10, rhs.len())?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..10 {
            let trial = shifted(dec, &w, &step, lambda);
            if let Ok(e) = evaluate(dec, alpha, z, &trial) {
                if e.size < (1.0 - 1e-4 * lambda) * eval.size {
                    accepted = Some((trial, e));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            return Err(Error::TrustRegion(format!(
                "Newton-Krylov line search failed at alpha = {alpha:e}, z = {z:e} (update {:e})",
                eval.size
            )));
        };
        w = trial;
        eval = e;
        check_radius(dec, &w)?;
    }
    Err(Error::TrustRegion(format!(
        "Newton-Krylov did not reach {:e} in {} steps (last update {:e})",
        s.aux_tol, s.aux_max_iter, eval.size
    )))
}

/// Unrestarted GMRES from a zero guess, with Givens rotations on the
/// Hessenberg matrix.
fn gmres<F>(mut op: F, rhs: &[f64], rel_tol: f64, max_dim: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = rhs.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let beta = dot(rhs, rhs).sqrt();
    if beta == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut basis: Vec<Vec<f64>> = vec![rhs.iter().map(|x| x / beta).collect()];
    let mut hess: Vec<Vec<f64>> = Vec::new();
    let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut g = vec![beta];
    for m in 0..max_dim.min(n) {
        let mut v = op(&basis[m])?;
        let mut col = vec![0.0; m + 2];
        for (i, q) in basis.iter().enumerate() {
            col[i] = dot(&v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= col[i] * qi;
            }
        }
        col[m + 1] = dot(&v, &v).sqrt();
        for i in 0..m {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = cs[i] * a + sn[i] * b;
            col[i + 1] = -sn[i] * a + cs[i] * b;
        }
        let r = col[m].hypot(col[m + 1]);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (col[m] / r, col[m + 1] / r) };
        let next_norm = col[m + 1];
        col[m] = r;
        col[m + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[m]);
        g[m] *= c;
        hess.push(col);
        let done = g[m + 1].abs() <= rel_tol * beta || next_norm == 0.0;
        if done || m + 1 == max_dim.min(n) {
            break;
        }
        basis.push(v.iter().map(|x| x / next_norm).collect());
    }
    let dim = hess.len();
    let mut y = vec![0.0; dim];
    for i in (0..dim).rev() {
        let tail: f64 = (i + 1..dim).map(|j| hess[j][i] * y[j]).sum();
        y[i] = (g[i] - tail) / hess[i][i];
    }
    let mut x = vec![0.0; n];
    for (q, yi) in basis.iter().zip(&y) {
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi += yi * qi;
        }
    }
    Ok(x)
}

/// Values of the scalar bifurcation equation at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationValue {
    pub alpha: f64,
    pub z: f64,
    /// `sin_k` coefficient of `F(y0)`.
    pub f: f64,
    /// `f / alpha`, or the one-sided limit at `alpha = 0`.
    pub g: f64,
    pub auxiliary: AuxiliarySolution,
}

pub fn bifurcation_function(
    dec: &LSDecomposition,
    alpha: f64,
    z: f64,
    warm: Option<&FourierTimeSeries>,
) -> Result<BifurcationValue> {
    if alpha == 0.0 {
        let eps = dec.settings.eps_alpha * dec.medium().amplitude_scale();
        let aux0 = solve_auxiliary(dec, 0.0, z, None)?;
        let aux = solve_auxiliary(dec, eps, z, warm)?;
        return Ok(BifurcationValue {
            alpha,
            z,
            f: aux0.f(dec.k),
            g: aux.f(dec.k) / eps,
            auxiliary: aux0,
        });
    }
    let aux = solve_auxiliary(dec, alpha, z, warm)?;
    let f = aux.f(dec.k);
    Ok(BifurcationValue {
        alpha,
        z,
        f,
        g: f / alpha,
        auxiliary: aux,
    })
}

/// Periodic solution bifurcating from the quiet state along mode `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureToneSolution {
    pub k: usize,
    pub alpha: f64,
    pub z: f64,
    pub period: f64,
    pub flavor: Flavor,
    pub frame: Frame,
    pub modes: usize,
    pub length: f64,
    /// Full data `rest + z + alpha cos_k + W`.
    pub y0: FourierTimeSeries,
    /// Largest coefficient of `F(y0)`.
    pub boundary_residual: f64,
    /// Largest centered-difference residual of the evolution equation.
    pub pde_residual: f64,
    /// `max_x sup_t |y - rest - alpha (linear mode)|`.
    pub deviation: f64,
    /// Weighted size `max_j |delta_j a_j|` of `W`.
    pub w_size: f64,
    pub aux_iterations: usize,
    pub root_iterations: usize,
    /// Largest coefficient gap against a `2N` re-solve, when requested.
    pub truncation_gap: Option<f64>,
    pub fingerprint: String,
    pub trajectory: Trajectory,
}

impl PureToneSolution {
    /// Samples `y(x_i, t_j)` on `nt` uniform times for every recorded `x`.
    pub fn grid(&self, nt: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let rows = self
            .trajectory
            .states
            .iter()
            .map(|s| s.to_samples(nt))
            .collect::<Result<Vec<_>>>()?;
        Ok((self.trajectory.x.clone(), rows))
    }

    /// Re-marches the data with steps no longer than `max_dx`.
    pub fn remarch(&self, medium: &Medium, max_dx: f64, settings: &EvolveSettings) -> Result<Trajectory> {
        let settings = EvolveSettings {
            modes: self.modes,
            ..*settings
        };
        let start = EvolutionState::new(self.y0.clone(), 0.0, self.frame);
        evolve_recorded(&start, medium, self.length, Some(max_dx), &settings)
    }

    pub fn write_grid_csv<W: std::io::Write>(&self, writer: W, nt: usize) -> Result<()> {
        crate::evolve::write_trajectory_csv(&self.trajectory, writer, nt)
    }
}

/// Warm start carried between continuation steps.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    pub z: Option<f64>,
    pub w: Option<FourierTimeSeries>,
}

pub fn solve_pure_tone(dec: &LSDecomposition, alpha: f64) -> Result<PureToneSolution> {
    solve_pure_tone_warm(dec, alpha, &WarmStart::default())
}

/// Illinois state for one bracket end.
struct End {
    z: f64,
    g: f64,
    aux: AuxiliarySolution,
}

pub fn solve_pure_tone_warm(dec: &LSDecomposition, alpha: f64, warm: &WarmStart) -> Result<PureToneSolution> {
    let s = &dec.settings;
    let mut aux_iterations = 0;
    let (z, aux, root_iterations) = if alpha == 0.0 {
        (0.0, solve_auxiliary(dec, 0.0, 0.0, None)?, 0)
    } else {
        let eval = |z: f64, w: Option<&FourierTimeSeries>, count: &mut usize| -> Result<End> {
            let v = bifurcation_function(dec, alpha, z, w)?;
            *count += v.auxiliary.iterations;
            Ok(End {
                z,
                g: v.g,
                aux: v.auxiliary,
            })
        };
        let centre = warm.z.unwrap_or(0.0);
        let mid = eval(centre, warm.w.as_ref(), &mut aux_iterations)?;
        if mid.g.abs() * alpha.abs() <= s.root_tol {
            (mid.z, mid.aux, 0)
        } else {
            if dec.dg_dz == 0.0 || !dec.dg_dz.is_finite() {
                return Err(Error::Bifurcation("dg/dz vanishes; no transversal crossing".into()));
            }
            let mut radius = s.bracket_factor * (mid.g / dec.dg_dz).abs();
            let mut lo = eval(centre - radius, Some(&mid.aux.w), &mut aux_iterations)?;
            let mut hi = eval(centre + radius, Some(&mid.aux.w), &mut aux_iterations)?;
            let mut expansions = 0;
            while lo.g.signum() == hi.g.signum() {
                if expansions == s.bracket_expansions {
                    return Err(Error::Bifurcation(format!(
                        "no sign change of g in z within +-{radius:e} at alpha = {alpha:e}"
                    )));
                }
                radius *= 4.0;
                expansions += 1;
                lo = eval(centre - radius, Some(&mid.aux.w), &mut aux_iterations)?;
                hi = eval(centre + radius, Some(&mid.aux.w), &mut aux_iterations)?;
            }
            let mut side = 0i8;
            let best: Option<End>;
            let mut iters = 0;
            loop {
                iters += 1;
                let zc = (lo.z * hi.g - hi.z * lo.g) / (hi.g - lo.g);
                let warm_w = if (zc - lo.z).abs() < (zc - hi.z).abs() { &lo.aux.w } else { &hi.aux.w };
                let c = eval(zc, Some(warm_w), &mut aux_iterations)?;
                let done = c.g.abs() * alpha.abs() <= s.root_tol
                    || (hi.z - lo.z).abs() <= 8.0 * f64::EPSILON * (1.0 + zc.abs())
                    || iters >= s.root_max_iter;
                if c.g.signum() == lo.g.signum() {
                    lo = c;
                    if side == -1 {
                        hi.g *= 0.5;
                    }
                    side = -1;
                    if done {
                        best = Some(lo);
                        break;
                    }
                } else {
                    hi = c;
                    if side == 1 {
                        lo.g *= 0.5;
                    }
                    side = 1;
                    if done {
                        best = Some(hi);
                        break;
                    }
                }
            }
            let b = best.expect("loop exits with a point");
            if b.g.abs() * alpha.abs() > s.root_tol * 1e3 {
                return Err(Error::Bifurcation(format!(
                    "root iteration stalled with |f| = {:e}",
                    b.g.abs() * alpha.abs()
                )));
            }
            (b.z, b.aux, iters)
        }
    };
    let y0 = dec.data(alpha, z, &aux.w);
    finish(dec, alpha, z, y0, aux_iterations + aux.iterations, root_iterations)
}

fn finish(
    dec: &LSDecomposition,
    alpha: f64,
    z: f64,
    y0: FourierTimeSeries,
    aux_iterations: usize,
    root_iterations: usize,
) -> Result<PureToneSolution> {
    let settings = dec.settings.evolve_settings(dec.modes);
    let residual = boundary_operator(&dec.spec, &y0, &settings)?;
    let start = EvolutionState::new(y0.clone(), 0.0, dec.spec.frame());
    let trajectory = evolve_recorded(&start, dec.medium(), dec.medium().length(), None, &settings)?;
    let linear = linear_companion(
        &trajectory,
        &FourierTimeSeries::cosine(dec.period, dec.modes, dec.k, alpha),
        dec.medium(),
        &settings,
    )?;
    let nt = 4 * dec.modes;
    let rest = dec.rest_value();
    let mut deviation: f64 = 0.0;
    for (state, lin) in trajectory.states.iter().zip(&linear) {
        let mut diff = state.add(&lin.scale(-1.0))?;
        diff.set_cos(0, diff.cos_coeff(0) - rest);
        let sup = diff.to_samples(nt)?.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        deviation = deviation.max(sup);
    }
    let pde = pde_residual(&trajectory, dec.medium(), nt)?;
    let w_size = dec
        .complement()
        .map(|j| (dec.divisors[j] * y0.cos_coeff(j)).abs())
        .fold(0.0, f64::max);
    let truncation_gap = if dec.settings.verify_truncation && alpha != 0.0 {
        let fine_settings = BifurcationSettings {
            modes: 2 * dec.modes,
            verify_truncation: false,
            ..dec.settings
        };
        let fine = build_decomposition(dec.medium().clone(), dec.k, dec.flavor, &fine_settings, Execution::default())?;
        let fine_sol = solve_pure_tone_warm(
            &fine,
            alpha,
            &WarmStart {
                z: Some(z),
                w: Some(y0.clone()),
            },
        )?;
        Some(fine_sol.y0.add(&y0.scale(-1.0))?.max_coeff())
    } else {
        None
    };
    Ok(PureToneSolution {
        k: dec.k,
        alpha,
        z,
        period: dec.period,
        flavor: dec.flavor,
        frame: dec.spec.frame(),
        modes: dec.modes,
        length: dec.medium().length(),
        y0,
        boundary_residual: residual.max_coeff(),
        pde_residual: pde,
        deviation,
        w_size,
        aux_iterations,
        root_iterations,
        truncation_gap,
        fingerprint: dec.fingerprint(),
        trajectory,
    })
}

/// Amplitude sweep with warm starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub alphas: Vec<f64>,
    pub solutions: Vec<PureToneSolution>,
    /// Largest amplitude solved before the first failure.
    pub reached_amplitude: f64,
    pub failure: Option<String>,
}

pub fn continuation(dec: &LSDecomposition, alpha_max: f64, steps: usize) -> ContinuationReport {
    let steps = steps.max(1);
    let alphas: Vec<f64> = (1..=steps).map(|i| alpha_max * i as f64 / steps as f64).collect();
    let mut solutions: Vec<PureToneSolution> = Vec::new();
    let mut failure = None;
    let mut warm = WarmStart::default();
    for &alpha in &alphas {
        match solve_pure_tone_warm(dec, alpha, &warm) {
            Ok(sol) => {
                warm = WarmStart {
                    z: Some(sol.z),
                    w: Some(sol.y0.clone()),
                };
                solutions.push(sol);
            }
            Err(e) => {
                failure = Some(format!("alpha = {alpha:e}: {e}"));
                break;
            }
        }
    }
    ContinuationReport {
        reached_amplitude: solutions.last().map_or(0.0, |s| s.alpha),
        alphas,
        solutions,
        failure,
    }
}
