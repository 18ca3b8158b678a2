//! Linear theory for piecewise-constant entropy in the scaled frame.
//!
//! A profile with widths `theta_0..theta_n` and jump scalars `J_1..J_n`
//! acts on the `k`-mode `(a, b)` of the Riemann invariant by the product
//! `R(k w theta_n) M(J_n) ... M(J_1) R(k w theta_0)` with `w = 2 pi / T`.
//! The divisor `delta_k` is the sine component of that product applied to
//! the cosine mode, after the quarter-period shift `P^{-k}` for the tile
//! problem.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, RowVector2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::profiles::PiecewiseConstantProfile;

/// Default absolute threshold below which a divisor counts as zero.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-9;

/// Which boundary problem the divisor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// Minimal tile: evolve across the profile, shift by a quarter period,
    /// then take the odd part.
    #[default]
    PeriodicTile,
    /// Acoustic reflection problem: no quarter-period shift.
    Acoustic,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic-tile" | "periodic" | "tile" => Ok(Flavor::PeriodicTile),
            "acoustic" => Ok(Flavor::Acoustic),
            other => Err(Error::Argument(format!("unknown flavor '{other}'"))),
        }
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Flavor::PeriodicTile => "periodic-tile",
            Flavor::Acoustic => "acoustic",
        })
    }
}

pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn jump_matrix(jump: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, jump)
}

/// Quarter turn `P = R(pi/2)` with exact integer entries.
pub fn quarter() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

/// `P^{-k}` as an exact integer matrix.
pub fn quarter_inverse_power(k: usize) -> Matrix2<f64> {
    match k % 4 {
        0 => Matrix2::identity(),
        1 => Matrix2::new(0.0, 1.0, -1.0, 0.0),
        2 => -Matrix2::identity(),
        _ => Matrix2::new(0.0, -1.0, 1.0, 0.0),
    }
}

/// Row vector `(0 1) P^{-k}` (or `(0 1)` for the acoustic flavor).
pub fn readout_row(k: usize, flavor: Flavor) -> RowVector2<f64> {
    let e2 = RowVector2::new(0.0, 1.0);
    match flavor {
        Flavor::PeriodicTile => e2 * quarter_inverse_power(k),
        Flavor::Acoustic => e2,
    }
}

/// Image of the cosine mode `(1, 0)` under the profile transfer product
/// at rotation rate `rate` per unit width.
pub fn transfer_column(profile: &PiecewiseConstantProfile, rate: f64) -> Vector2<f64> {
    let widths = profile.widths();
    let jumps = profile.jumps();
    let mut v = Vector2::new(1.0, 0.0);
    for (m, &w) in widths.iter().enumerate() {
        if m > 0 {
            v[1] *= jumps[m - 1];
        }
        v = rotation(rate * w) * v;
    }
    v
}

/// Mode rotation rate `k 2 pi / T`.
pub fn mode_rate(period: f64, k: usize) -> f64 {
    k as f64 * 2.0 * PI / period
}

/// Divisor `delta_k(T)` by the 2x2 product.
pub fn divisor_pc(profile: &PiecewiseConstantProfile, period: f64, k: usize, flavor: Flavor) -> f64 {
    assert!(k >= 1 && period > 0.0, "need k >= 1 and T > 0");
    let col = transfer_column(profile, mode_rate(period, k));
    (readout_row(k, flavor) * col)[0]
}

/// Partial derivatives of one divisor with respect to the profile data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorGradient {
    pub value: f64,
    /// `d delta / d theta_m`, `m = 0..=n`.
    pub d_widths: Vec<f64>,
    /// `d delta / d J_m`, `m = 1..=n`.
    pub d_jumps: Vec<f64>,
    /// `d delta / d T`.
    pub d_period: f64,
}

/// Divisor gradient from forward vectors `z_m` (product applied up to
/// factor `m`) and backward rows (readout times the remaining factors).
pub fn divisor_gradient(
    profile: &PiecewiseConstantProfile,
    period: f64,
    k: usize,
    flavor: Flavor,
) -> DivisorGradient {
    let rate = mode_rate(period, k);
    let widths = profile.widths();
    let jumps = profile.jumps();
    let n = jumps.len();

    // Factor list: R0, M1, R1, ..., Mn, Rn.
    let mut factors = Vec::with_capacity(2 * n + 1);
    for (m, &w) in widths.iter().enumerate() {
        if m > 0 {
            factors.push(jump_matrix(jumps[m - 1]));
        }
        factors.push(rotation(rate * w));
    }
    // before[i] = product of factors[..i] applied to e1
    let mut before = Vec::with_capacity(factors.len() + 1);
    before.push(Vector2::new(1.0, 0.0));
    for f in &factors {
        let last = *before.last().unwrap();
        before.push(f * last);
    }
    // after[i] = readout * product of factors[i+1..]
    let mut after = vec![RowVector2::zeros(); factors.len()];
    let mut row = readout_row(k, flavor);
    for i in (0..factors.len()).rev() {
        after[i] = row;
        row *= factors[i];
    }
    let value = (readout_row(k, flavor) * before[factors.len()])[0];

    let p = quarter();
    let mut d_widths = Vec::with_capacity(n + 1);
    let mut d_jumps = Vec::with_capacity(n);
    for i in 0..factors.len() {
        if i % 2 == 0 {
            // d/dtheta R(rate theta) = rate R P
            let d = after[i] * factors[i] * p * before[i];
            d_widths.push(rate * d[0]);
        } else {
            let d = after[i] * Matrix2::new(0.0, 0.0, 0.0, 1.0) * before[i];
            d_jumps.push(d[0]);
        }
    }
    let d_period = -widths
        .iter()
        .zip(&d_widths)
        .map(|(w, d)| w * d)
        .sum::<f64>()
        / period;
    DivisorGradient {
        value,
        d_widths,
        d_jumps,
        d_period,
    }
}

/// Divisors `delta_1..delta_jmax` at a fixed reference period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorTable {
    pub period: f64,
    pub flavor: Flavor,
    /// `entries[j - 1] = delta_j`.
    pub entries: Vec<f64>,
    pub fingerprint: String,
}

impl DivisorTable {
    pub fn build(
        profile: &PiecewiseConstantProfile,
        period: f64,
        j_max: usize,
        flavor: Flavor,
        exec: Execution,
    ) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::Argument(format!("period must be positive, got {period}")));
        }
        let entries = exec.map(j_max, |i| divisor_pc(profile, period, i + 1, flavor));
        Ok(Self {
            period,
            flavor,
            entries,
            fingerprint: profile.fingerprint(),
        })
    }

    pub fn get(&self, j: usize) -> f64 {
        self.entries[j - 1]
    }

    pub fn j_max(&self) -> usize {
        self.entries.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["j", "delta_j"])?;
        for (i, d) in self.entries.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{d:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Upper bound `max(1, prod max(1, J_m))` on every divisor magnitude.
pub fn multiplier_bound(profile: &PiecewiseConstantProfile) -> f64 {
    profile.jumps().iter().map(|j| j.max(1.0)).product::<f64>().max(1.0)
}

/// Continuous branch of `Arctan(J tan x)` that agrees with `x` at every
/// multiple of `pi/2`.
pub fn h(jump: f64, x: f64) -> f64 {
    let m = (x / PI).round();
    let base = x - m * PI;
    let (s, c) = base.sin_cos();
    (jump * s).atan2(c) + m * PI
}

/// `d h / d x = J / (cos^2 x + J^2 sin^2 x)`.
pub fn h_dx(jump: f64, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    jump / (c * c + jump * jump * s * s)
}

/// `d h / d J = sin x cos x / (cos^2 x + J^2 sin^2 x)`.
pub fn h_djump(jump: f64, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    s * c / (c * c + jump * jump * s * s)
}

/// Accumulated angles `gamma_1..gamma_n` at frequency `omega`, with their
/// derivatives in `omega`.
pub fn gamma_angles_with_derivative(
    profile: &PiecewiseConstantProfile,
    omega: f64,
) -> (Vec<f64>, Vec<f64>) {
    let widths = profile.widths();
    let mut gammas = Vec::with_capacity(profile.n_jumps());
    let mut dgammas = Vec::with_capacity(profile.n_jumps());
    let (mut g, mut dg) = (0.0, 0.0);
    for (m, &jump) in profile.jumps().iter().enumerate() {
        let x = omega * widths[m] + g;
        let dx = widths[m] + dg;
        g = h(jump, x);
        dg = h_dx(jump, x) * dx;
        gammas.push(g);
        dgammas.push(dg);
    }
    (gammas, dgammas)
}

pub fn gamma_angles(profile: &PiecewiseConstantProfile, omega: f64) -> Vec<f64> {
    gamma_angles_with_derivative(profile, omega).0
}

/// Total transfer angle `omega theta_n + gamma_n(omega)` and its derivative.
pub fn total_angle(profile: &PiecewiseConstantProfile, omega: f64) -> (f64, f64) {
    let (g, dg) = gamma_angles_with_derivative(profile, omega);
    let last = *profile.widths().last().unwrap();
    (
        omega * last + g.last().copied().unwrap_or(0.0),
        last + dg.last().copied().unwrap_or(0.0),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseFrequency {
    pub k: usize,
    pub omega: f64,
    /// Reference period `k 2 pi / omega`.
    pub period: f64,
    /// `omega theta_n + gamma_n(omega) - k pi / 2`.
    pub residual: f64,
}

/// Unique positive root of `omega theta_n + gamma_n(omega) = k pi / 2`.
pub fn base_frequency(profile: &PiecewiseConstantProfile, k: usize) -> Result<BaseFrequency> {
    if k < 1 {
        return Err(Error::Argument("mode index must be at least 1".into()));
    }
    let target = k as f64 * FRAC_PI_2;
    let n = profile.n_jumps() as f64;
    let ell = profile.total_width();
    let f = |w: f64| total_angle(profile, w).0 - target;

    let mut lo = ((k as f64 - n) * FRAC_PI_2 / ell).max(0.0);
    let mut hi = (k as f64 + n) * FRAC_PI_2 / ell;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        // Only reachable through rounding at the bracket ends.
        lo = 0.0;
        hi = (k as f64 + n + 1.0) * FRAC_PI_2 / ell;
        if f(hi) < 0.0 {
            return Err(Error::Integration {
                x: ell,
                reason: format!("base frequency bracket failed for k = {k}"),
            });
        }
    }
    while hi - lo > 1e-8 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut omega = 0.5 * (lo + hi);
    for _ in 0..4 {
        let (a, da) = total_angle(profile, omega);
        let step = (a - target) / da;
        omega -= step;
        if step.abs() <= 1e-16 * omega {
            break;
        }
    }
    let residual = f(omega);
    Ok(BaseFrequency {
        k,
        omega,
        period: k as f64 * 2.0 * PI / omega,
        residual,
    })
}

/// A near rational relation `omega^(p) ~ (j / k) omega^(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationalWitness {
    pub p: usize,
    pub j: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonresonanceReport {
    pub k: usize,
    pub period: f64,
    pub is_nonresonant: bool,
    /// Smallest `|delta_j|` over `j != k`.
    pub min_divisor: f64,
    pub offenders: Vec<usize>,
    pub witnesses: Vec<RationalWitness>,
}

/// Checks `delta_j(T^(k)) != 0` for `j <= j_max`, `j != k`.
pub fn nonresonance_check(
    profile: &PiecewiseConstantProfile,
    k: usize,
    j_max: usize,
    tol: f64,
    flavor: Flavor,
) -> Result<NonresonanceReport> {
    if j_max < k {
        return Err(Error::Argument(format!("j_max = {j_max} must be at least k = {k}")));
    }
    let base = base_frequency(profile, k)?;
    let mut offenders = Vec::new();
    let mut min_divisor = f64::INFINITY;
    for j in (1..=j_max).filter(|&j| j != k) {
        let d = divisor_pc(profile, base.period, j, flavor).abs();
        min_divisor = min_divisor.min(d);
        if d < tol {
            offenders.push(j);
        }
    }
    let witnesses = rational_witnesses(profile, &base, j_max, tol)?;
    Ok(NonresonanceReport {
        k,
        period: base.period,
        is_nonresonant: offenders.is_empty(),
        min_divisor,
        offenders,
        witnesses,
    })
}

/// Base frequencies `omega^(p)` that sit within `tol` (relative) of an
/// integer multiple `j / k` of `omega^(k)`, for `p != k`.
fn rational_witnesses(
    profile: &PiecewiseConstantProfile,
    base: &BaseFrequency,
    j_max: usize,
    tol: f64,
) -> Result<Vec<RationalWitness>> {
    let k = base.k as f64;
    let p_max = j_max + profile.n_jumps();
    let mut out = Vec::new();
    for p in (1..=p_max).filter(|&p| p != base.k) {
        let wp = base_frequency(profile, p)?.omega;
        let ratio = wp / base.omega;
        let j = (ratio * k).round();
        if j >= 1.0 && (j as usize) <= j_max && (ratio * k - j).abs() < tol * j.max(1.0) {
            out.push(RationalWitness {
                p,
                j: j as usize,
                ratio,
            });
        }
    }
    Ok(out)
}

/// Distribution from which scan profiles are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSampler {
    /// Always the same profile.
    Fixed { profile: PiecewiseConstantProfile },
    /// Widths drawn uniformly from `width`, jump scalars uniformly from
    /// `jump`, for `n_jumps` interfaces.
    Uniform {
        n_jumps: usize,
        width: (f64, f64),
        jump: (f64, f64),
    },
}

impl ProfileSampler {
    pub fn uniform_single_jump() -> Self {
        ProfileSampler::Uniform {
            n_jumps: 1,
            width: (0.5, 1.5),
            jump: (0.5, 2.0),
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Result<PiecewiseConstantProfile> {
        match self {
            ProfileSampler::Fixed { profile } => Ok(profile.clone()),
            ProfileSampler::Uniform {
                n_jumps,
                width,
                jump,
            } => {
                let widths = (0..=*n_jumps).map(|_| rng.gen_range(width.0..width.1)).collect();
                let jumps = (0..*n_jumps).map(|_| rng.gen_range(jump.0..jump.1)).collect();
                PiecewiseConstantProfile::new(widths, jumps)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub n_samples: usize,
    pub k_max: usize,
    pub j_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub flavor: Flavor,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            k_max: 1,
            j_max: 32,
            tol: DEFAULT_RESONANCE_TOL,
            seed: 0,
            flavor: Flavor::PeriodicTile,
        }
    }
}

/// Count of samples whose smallest divisor falls in one decade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Bin covers `[10^decade, 10^(decade+1))`.
    pub decade: i32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub settings: ScanSettings,
    pub resonant_count: usize,
    pub resonant_fraction: f64,
    /// Decade histogram of the per-sample smallest divisor.
    pub histogram: Vec<HistogramBin>,
}

/// Per-sample generator: stream `index` of the ChaCha generator keyed by
/// the scan seed, so samples are independent of scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Empirical resonance statistics over randomly drawn profiles.
pub fn resonance_scan(
    sampler: &ProfileSampler,
    settings: &ScanSettings,
    exec: Execution,
) -> Result<ScanReport> {
    if settings.n_samples == 0 || settings.k_max == 0 || settings.j_max < settings.k_max {
        return Err(Error::Argument(
            "scan needs n_samples >= 1 and j_max >= k_max >= 1".into(),
        ));
    }
    let per_sample = exec.map(settings.n_samples, |i| -> Result<(bool, f64)> {
        let mut rng = sample_rng(settings.seed, i as u64);
        let profile = sampler.draw(&mut rng)?;
        let mut resonant = false;
        let mut min_div = f64::INFINITY;
        for k in 1..=settings.k_max {
            let base = base_frequency(&profile, k)?;
            for j in (1..=settings.j_max).filter(|&j| j != k) {
                let d = divisor_pc(&profile, base.period, j, settings.flavor).abs();
                min_div = min_div.min(d);
                resonant |= d < settings.tol;
            }
        }
        Ok((resonant, min_div))
    });
    let mut resonant_count = 0;
    let mut bins = std::collections::BTreeMap::<i32, usize>::new();
    for r in per_sample {
        let (resonant, min_div) = r?;
        resonant_count += resonant as usize;
        let decade = if min_div > 0.0 {
            min_div.log10().floor().max(-20.0) as i32
        } else {
            -20
        };
        *bins.entry(decade).or_default() += 1;
    }
    Ok(ScanReport {
        settings: settings.clone(),
        resonant_count,
        resonant_fraction: resonant_count as f64 / settings.n_samples as f64,
        histogram: bins
            .into_iter()
            .map(|(decade, count)| HistogramBin { decade, count })
            .collect(),
    })
}
