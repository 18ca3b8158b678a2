//! Entropy profiles on `[0, l]` and the inverse wavespeed they induce.
//!
//! A [`PiecewiseConstantProfile`] is stored through its level widths and
//! the jump scalars `J_m = exp(-[s]_m / (2 c_p))`, which is the natural
//! parametrization for the divisor algebra. Entropy values are recovered
//! from a dimensionless base level `s_0 / (2 c_p)`. A [`SampledProfile`]
//! stores entropy at grid nodes with an interpolation rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermo::{Gas, GasModel};

/// Upper bound on the total variation of `log sigma` accepted as "bounded".
pub const MAX_LOG_SIGMA_VARIATION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstantProfile {
    widths: Vec<f64>,
    jumps: Vec<f64>,
    /// Entropy of the first level divided by `2 c_p`.
    #[serde(default)]
    base_level: f64,
}

impl PiecewiseConstantProfile {
    pub fn new(widths: Vec<f64>, jumps: Vec<f64>) -> Result<Self> {
        let p = Self {
            widths,
            jumps,
            base_level: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// A single level of width `width` and no jumps.
    pub fn uniform(width: f64) -> Result<Self> {
        Self::new(vec![width], vec![])
    }

    pub fn with_base_level(mut self, base_level: f64) -> Self {
        self.base_level = base_level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Argument("a profile needs at least one level".into()));
        }
        if self.jumps.len() + 1 != self.widths.len() {
            return Err(Error::Argument(format!(
                "{} widths need {} jumps, got {}",
                self.widths.len(),
                self.widths.len() - 1,
                self.jumps.len()
            )));
        }
        if let Some(w) = self.widths.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Argument(format!("widths must be positive, got {w}")));
        }
        if let Some(j) = self.jumps.iter().find(|j| !(**j > 0.0) || !j.is_finite()) {
            return Err(Error::Argument(format!("jump scalars must be positive, got {j}")));
        }
        if !self.base_level.is_finite() {
            return Err(Error::Argument("base level must be finite".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn base_level(&self) -> f64 {
        self.base_level
    }

    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn total_width(&self) -> f64 {
        self.widths.iter().sum()
    }

    /// Coordinates of the interior interfaces, left to right.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.jumps.len());
        let mut x = 0.0;
        for w in &self.widths[..self.widths.len() - 1] {
            x += w;
            out.push(x);
        }
        out
    }

    /// Rescales widths so they sum to one; jumps are untouched.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.total_width())
    }

    /// Multiplies every width by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            widths: self.widths.iter().map(|w| w * factor).collect(),
            jumps: self.jumps.clone(),
            base_level: self.base_level,
        }
    }

    /// True when every jump scalar is one.
    pub fn is_isentropic(&self) -> bool {
        self.jumps.iter().all(|&j| j == 1.0)
    }

    /// Dimensionless entropy levels `s_m / (2 c_p)`.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.widths.len());
        let mut level = self.base_level;
        out.push(level);
        for j in &self.jumps {
            level -= j.ln();
            out.push(level);
        }
        out
    }

    /// Entropy levels for a gas with heat capacity `c_p`.
    pub fn entropies(&self, c_p: f64) -> Vec<f64> {
        self.levels().iter().map(|l| 2.0 * c_p * l).collect()
    }

    /// Moves jump `m` (between levels `m-1` and `m`, `1 <= m <= n`) to the
    /// left by `eta`, widening level `m`.
    pub fn perturb_jump_position(&self, m: usize, eta: f64) -> Result<Self> {
        if m == 0 || m > self.jumps.len() {
            return Err(Error::Argument(format!(
                "jump index {m} outside 1..={}",
                self.jumps.len()
            )));
        }
        let left = self.widths[m - 1] - eta;
        let right = self.widths[m] + eta;
        if !(left > 0.0) || !(right > 0.0) {
            return Err(Error::Argument(format!(
                "shift {eta} leaves a nonpositive width"
            )));
        }
        let mut out = self.clone();
        out.widths[m - 1] = left;
        out.widths[m] = right;
        Ok(out)
    }

    /// Raises the entropy of level `m < n` by `2 c_p h`, so that
    /// `J_{m+1} -> J_{m+1} e^h` and `J_m -> J_m e^{-h}`.
    pub fn perturb_level(&self, m: usize, h: f64) -> Result<Self> {
        if m >= self.jumps.len() {
            return Err(Error::Argument(format!(
                "level index {m} must be below the jump count {}",
                self.jumps.len()
            )));
        }
        let mut out = self.clone();
        out.jumps[m] *= h.exp();
        if m == 0 {
            out.base_level += h;
        } else {
            out.jumps[m - 1] *= (-h).exp();
        }
        Ok(out)
    }

    /// Profile whose level `m` has the scaled width `sigma_m * width_m`,
    /// where `sigma_m` is the inverse wavespeed of the level at `p_bar`.
    /// The jump scalars are replaced by the ratios `sigma_{m-1} / sigma_m`.
    pub fn to_scaled_frame(&self, gas: &Gas, p_bar: f64) -> Result<Self> {
        let sig = self.level_sigmas(gas, p_bar)?;
        let widths = self.widths.iter().zip(&sig).map(|(w, s)| w * s).collect();
        let jumps = sig.windows(2).map(|p| p[0] / p[1]).collect();
        Self::new(widths, jumps)
    }

    /// Inverse wavespeed on each level.
    pub fn level_sigmas(&self, gas: &Gas, p_bar: f64) -> Result<Vec<f64>> {
        self.entropies(gas.c_p())
            .iter()
            .map(|&s| crate::thermo::sigma_squared(gas, p_bar, s).map(f64::sqrt))
            .collect()
    }

    /// Mirror image `s(l - x)`.
    pub fn mirrored(&self) -> Self {
        let levels = self.levels();
        let mut widths = self.widths.clone();
        widths.reverse();
        let jumps = self.jumps.iter().rev().map(|j| 1.0 / j).collect();
        Self {
            widths,
            jumps,
            base_level: *levels.last().unwrap(),
        }
    }

    /// Concatenation of `self` followed by `other`, joined by whatever jump
    /// the two base levels imply (possibly one, in which case adjoining
    /// levels are merged).
    pub fn concat(&self, other: &Self) -> Self {
        let last = *self.levels().last().unwrap();
        let join = (-(other.base_level - last)).exp();
        let mut widths = self.widths.clone();
        let mut jumps = self.jumps.clone();
        if (join - 1.0).abs() < 1e-15 {
            *widths.last_mut().unwrap() += other.widths[0];
            widths.extend_from_slice(&other.widths[1..]);
            jumps.extend_from_slice(&other.jumps);
        } else {
            widths.extend_from_slice(&other.widths);
            jumps.push(join);
            jumps.extend_from_slice(&other.jumps);
        }
        Self {
            widths,
            jumps,
            base_level: self.base_level,
        }
    }

    /// The entropy field of the reflection-tiled solution over
    /// `periods` spatial periods: each period is the profile, its mirror,
    /// the profile again, and its mirror (total length `4 l` per period).
    pub fn tiled_extension(&self, periods: usize) -> Self {
        self.reflected_extension(4 * periods.max(1))
    }

    /// `panels` copies of the profile alternating with its mirror image,
    /// starting with the profile itself.
    pub fn reflected_extension(&self, panels: usize) -> Self {
        let mirror = self.mirrored();
        let mut out = self.clone();
        for i in 0..panels.max(1) - 1 {
            let panel = if i % 2 == 0 { &mirror } else { self };
            out = out.concat(panel);
        }
        out
    }

    /// Short stable fingerprint of widths, jumps and base level.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(&serde_json::to_vec(self).unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Piecewise-linear entropy between nodes.
    #[default]
    Linear,
    /// Entropy constant on the cell around each node, jumping at midpoints.
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    x: Vec<f64>,
    s: Vec<f64>,
    #[serde(default)]
    interp: Interpolation,
}

impl SampledProfile {
    pub fn new(x: Vec<f64>, s: Vec<f64>, interp: Interpolation) -> Result<Self> {
        let p = Self { x, s, interp };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() < 2 || self.x.len() != self.s.len() {
            return Err(Error::Argument(format!(
                "sampled profile needs matching grids of length >= 2, got {} and {}",
                self.x.len(),
                self.s.len()
            )));
        }
        if self.x[0] != 0.0 {
            return Err(Error::Argument("sampled grid must start at x = 0".into()));
        }
        if self.x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("sampled grid must be strictly increasing".into()));
        }
        if self.s.iter().any(|s| !s.is_finite()) {
            return Err(Error::Argument("entropy samples must be finite".into()));
        }
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interp
    }

    pub fn length(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Samples the smooth function `s` on `n + 1` uniform nodes.
    pub fn from_fn(length: f64, n: usize, interp: Interpolation, s: impl Fn(f64) -> f64) -> Result<Self> {
        let x: Vec<f64> = (0..=n).map(|i| length * i as f64 / n as f64).collect();
        let vals = x.iter().map(|&xi| s(xi)).collect();
        Self::new(x, vals, interp)
    }

    /// Inserts the midpoint of every cell, interpolated by the active rule.
    /// For the linear rule the represented function is unchanged.
    pub fn refined(&self) -> Self {
        let mut x = Vec::with_capacity(2 * self.x.len());
        let mut s = Vec::with_capacity(2 * self.x.len());
        for i in 0..self.x.len() - 1 {
            x.push(self.x[i]);
            s.push(self.s[i]);
            x.push(0.5 * (self.x[i] + self.x[i + 1]));
            s.push(0.5 * (self.s[i] + self.s[i + 1]));
        }
        x.push(*self.x.last().unwrap());
        s.push(*self.s.last().unwrap());
        Self {
            x,
            s,
            interp: self.interp,
        }
    }
}

/// Either profile family, with the JSON tagging used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EntropyProfile {
    Piecewise(PiecewiseConstantProfile),
    Sampled(SampledProfile),
}

impl EntropyProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            EntropyProfile::Piecewise(p) => p.validate(),
            EntropyProfile::Sampled(p) => p.validate(),
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            EntropyProfile::Piecewise(p) => p.total_width(),
            EntropyProfile::Sampled(p) => p.length(),
        }
    }

    /// Decomposes the entropy field into segments on which it is affine.
    pub fn segments(&self, c_p: f64) -> Vec<EntropySegment> {
        match self {
            EntropyProfile::Piecewise(p) => {
                let ent = p.entropies(c_p);
                let mut x = 0.0;
                p.widths
                    .iter()
                    .zip(ent)
                    .map(|(w, s)| {
                        let seg = EntropySegment {
                            x0: x,
                            x1: x + w,
                            s0: s,
                            s1: s,
                        };
                        x += w;
                        seg
                    })
                    .collect()
            }
            EntropyProfile::Sampled(p) => match p.interp {
                Interpolation::Linear => p
                    .x
                    .windows(2)
                    .zip(p.s.windows(2))
                    .map(|(x, s)| EntropySegment {
                        x0: x[0],
                        x1: x[1],
                        s0: s[0],
                        s1: s[1],
                    })
                    .collect(),
                Interpolation::Midpoint => {
                    let n = p.x.len();
                    (0..n)
                        .map(|i| {
                            let x0 = if i == 0 { p.x[0] } else { 0.5 * (p.x[i - 1] + p.x[i]) };
                            let x1 = if i + 1 == n { p.x[n - 1] } else { 0.5 * (p.x[i] + p.x[i + 1]) };
                            EntropySegment {
                                x0,
                                x1,
                                s0: p.s[i],
                                s1: p.s[i],
                            }
                        })
                        .collect()
                }
            },
        }
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_of(&serde_json::to_vec(self).unwrap_or_default())
    }
}

impl From<PiecewiseConstantProfile> for EntropyProfile {
    fn from(p: PiecewiseConstantProfile) -> Self {
        EntropyProfile::Piecewise(p)
    }
}

impl From<SampledProfile> for EntropyProfile {
    fn from(p: SampledProfile) -> Self {
        EntropyProfile::Sampled(p)
    }
}

fn fingerprint_of(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Interval on which entropy is affine in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySegment {
    pub x0: f64,
    pub x1: f64,
    pub s0: f64,
    pub s1: f64,
}

impl EntropySegment {
    pub fn slope(&self) -> f64 {
        (self.s1 - self.s0) / (self.x1 - self.x0)
    }

    pub fn entropy_at(&self, x: f64) -> f64 {
        self.s0 + self.slope() * (x - self.x0)
    }

    pub fn is_constant(&self) -> bool {
        self.s0 == self.s1
    }
}

/// Discontinuity of the inverse wavespeed with both one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaJump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// Inverse linearized wavespeed `sigma(x) = sqrt(-v_p(p_bar, s(x)))` over
/// a profile, evaluated segment by segment.
#[derive(Debug, Clone)]
pub struct SigmaField {
    gas: Gas,
    p_bar: f64,
    segments: Vec<EntropySegment>,
}

impl SigmaField {
    pub fn gas(&self) -> &Gas {
        &self.gas
    }

    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    pub fn segments(&self) -> &[EntropySegment] {
        &self.segments
    }

    fn check(&self) -> Result<()> {
        for (i, sg) in self.segments.iter().enumerate() {
            for x in [sg.x0, sg.x1] {
                let v = self.sigma_in(i, x);
                if !v.is_finite() || !(v > 0.0) {
                    return Err(Error::Constitutive(format!(
                        "inverse wavespeed {v} at x = {x} is not a positive finite number"
                    )));
                }
            }
        }
        let tv = 2.0 * self.log_sqrt_sigma_variation();
        if !(tv < MAX_LOG_SIGMA_VARIATION) {
            return Err(Error::Argument(format!(
                "total variation of log sigma is {tv:e}, above the accepted bound"
            )));
        }
        Ok(())
    }

    /// Same entropy field at another ambient pressure.
    pub fn with_pressure(&self, p_bar: f64) -> Result<Self> {
        if !(p_bar > 0.0) {
            return Err(Error::Domain(format!("ambient pressure must be positive, got {p_bar}")));
        }
        let field = Self {
            gas: self.gas,
            p_bar,
            segments: self.segments.clone(),
        };
        field.check()?;
        Ok(field)
    }

    pub fn length(&self) -> f64 {
        self.segments.last().map(|s| s.x1).unwrap_or(0.0)
    }

    /// Entropy at `x`, taking the right segment at an interface.
    pub fn entropy_at(&self, x: f64) -> f64 {
        self.segments[self.segment_at(x)].entropy_at(x)
    }

    /// Field over `panels` copies of `[0, l]` alternating with the mirror
    /// image `s(2l - x)`, starting with the field itself.
    pub fn reflected_extension(&self, panels: usize) -> Result<Self> {
        let l = self.length();
        let mut segments = Vec::new();
        for p in 0..panels.max(1) {
            let offset = p as f64 * l;
            if p % 2 == 0 {
                segments.extend(self.segments.iter().map(|sg| EntropySegment {
                    x0: sg.x0 + offset,
                    x1: sg.x1 + offset,
                    ..*sg
                }));
            } else {
                segments.extend(self.segments.iter().rev().map(|sg| EntropySegment {
                    x0: offset + l - sg.x1,
                    x1: offset + l - sg.x0,
                    s0: sg.s1,
                    s1: sg.s0,
                }));
            }
        }
        let field = Self {
            gas: self.gas,
            p_bar: self.p_bar,
            segments,
        };
        field.check()?;
        Ok(field)
    }

    /// Inverse wavespeed inside segment `seg` at `x`.
    pub fn sigma_in(&self, seg: usize, x: f64) -> f64 {
        let s = self.segments[seg].entropy_at(x);
        (-self.gas.v_p(self.p_bar, s)).sqrt()
    }

    /// `d log sigma / dx` inside segment `seg` at `x`.
    pub fn dlog_sigma_in(&self, seg: usize, x: f64) -> f64 {
        let sg = &self.segments[seg];
        if sg.is_constant() {
            return 0.0;
        }
        self.gas.dlog_sigma_ds(self.p_bar, sg.entropy_at(x)) * sg.slope()
    }

    /// Index of the segment containing `x`, preferring the right segment at
    /// an interface.
    pub fn segment_at(&self, x: f64) -> usize {
        match self.segments.iter().position(|s| x < s.x1) {
            Some(i) => i,
            None => self.segments.len() - 1,
        }
    }

    pub fn sigma_at(&self, x: f64) -> f64 {
        self.sigma_in(self.segment_at(x), x)
    }

    /// One-sided limits at the left end of the profile.
    pub fn sigma_start(&self) -> f64 {
        self.sigma_in(0, 0.0)
    }

    /// Left limit at the right end of the profile.
    pub fn sigma_end(&self) -> f64 {
        let last = self.segments.len() - 1;
        self.sigma_in(last, self.segments[last].x1)
    }

    pub fn v_pp_at(&self, seg: usize, x: f64) -> f64 {
        self.gas.v_pp(self.p_bar, self.segments[seg].entropy_at(x))
    }

    /// Discontinuities of sigma between consecutive segments.
    pub fn jumps(&self) -> Vec<SigmaJump> {
        self.segments
            .windows(2)
            .filter(|w| w[0].s1 != w[1].s0)
            .map(|w| SigmaJump {
                x: w[0].x1,
                left: (-self.gas.v_p(self.p_bar, w[0].s1)).sqrt(),
                right: (-self.gas.v_p(self.p_bar, w[1].s0)).sqrt(),
            })
            .collect()
    }

    /// `integral of d|log sqrt(sigma)|` over the profile, jumps included.
    pub fn log_sqrt_sigma_variation(&self) -> f64 {
        let mut tv = 0.0;
        for (i, sg) in self.segments.iter().enumerate() {
            tv += 0.5
                * ((self.sigma_in(i, sg.x1)).ln() - (self.sigma_in(i, sg.x0)).ln()).abs();
        }
        for j in self.jumps() {
            tv += 0.5 * (j.right / j.left).ln().abs();
        }
        tv
    }

    /// `integral of sigma dx` (Gauss-Legendre on each segment).
    pub fn integral(&self) -> f64 {
        const NODES: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189_1,
            0.478_628_670_499_366_5,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
        ];
        let mut total = 0.0;
        for (i, sg) in self.segments.iter().enumerate() {
            if sg.is_constant() {
                total += self.sigma_in(i, sg.x0) * (sg.x1 - sg.x0);
                continue;
            }
            let pieces = 8;
            let h = (sg.x1 - sg.x0) / pieces as f64;
            for p in 0..pieces {
                let mid = sg.x0 + (p as f64 + 0.5) * h;
                for (n, w) in NODES.iter().zip(WEIGHTS) {
                    total += 0.5 * h * w * self.sigma_in(i, mid + 0.5 * h * n);
                }
            }
        }
        total
    }

    /// Samples `(x, sigma)` with `per_segment` intervals per segment; at
    /// interfaces both one-sided values are listed.
    pub fn samples(&self, per_segment: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (i, sg) in self.segments.iter().enumerate() {
            for k in 0..=per_segment {
                let x = sg.x0 + (sg.x1 - sg.x0) * k as f64 / per_segment as f64;
                out.push((x, self.sigma_in(i, x)));
            }
        }
        out
    }

    /// Writes the samples as CSV with columns `x,sigma`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, per_segment: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "sigma"])?;
        for (x, s) in self.samples(per_segment) {
            w.write_record([format!("{x:.16e}"), format!("{s:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the inverse wavespeed field of `profile` at ambient pressure
/// `p_bar`, rejecting non-hyperbolic states and unbounded variation.
pub fn sigma_of_x(profile: &EntropyProfile, gas: &Gas, p_bar: f64) -> Result<SigmaField> {
    profile.validate()?;
    if !(p_bar > 0.0) {
        return Err(Error::Domain(format!("ambient pressure must be positive, got {p_bar}")));
    }
    let field = SigmaField {
        gas: *gas,
        p_bar,
        segments: profile.segments(gas.c_p()),
    };
    field.check()?;
    Ok(field)
}

/// `L1` distance between the entropy fields of two profiles of equal length.
pub fn l1_distance(a: &EntropyProfile, b: &EntropyProfile, c_p: f64) -> Result<f64> {
    let (la, lb) = (a.length(), b.length());
    if (la - lb).abs() > 1e-12 * la.max(lb) {
        return Err(Error::Argument(format!(
            "profiles have different lengths {la} and {lb}"
        )));
    }
    let sa = a.segments(c_p);
    let sb = b.segments(c_p);
    let mut cuts: Vec<f64> = sa
        .iter()
        .chain(sb.iter())
        .flat_map(|s| [s.x0, s.x1])
        .map(|x| x.min(la))
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        // Both fields are affine on (x0, x1); locate segments from the cell
        // midpoint to pick the correct side of any discontinuity.
        let mid = 0.5 * (x0 + x1);
        let ia = sa.iter().position(|s| mid < s.x1).unwrap_or(sa.len() - 1);
        let ib = sb.iter().position(|s| mid < s.x1).unwrap_or(sb.len() - 1);
        let d0 = sa[ia].entropy_at(x0) - sb[ib].entropy_at(x0);
        let d1 = sa[ia].entropy_at(x1) - sb[ib].entropy_at(x1);
        total += integrate_abs_affine(d0, d1, x1 - x0);
    }
    Ok(total)
}

fn integrate_abs_affine(d0: f64, d1: f64, h: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * h * (d0.abs() + d1.abs())
    } else {
        0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::GammaLawGas;
    use approx::assert_relative_eq;

    fn air() -> Gas {
        Gas::GammaLaw(GammaLawGas::new(1.4, 1.0).unwrap())
    }

    #[test]
    fn constructor_validation() {
        assert!(PiecewiseConstantProfile::new(vec![1.0, 1.0], vec![]).is_err());
        assert!(PiecewiseConstantProfile::new(vec![1.0, -1.0], vec![2.0]).is_err());
        assert!(PiecewiseConstantProfile::new(vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(PiecewiseConstantProfile::new(vec![], vec![]).is_err());
        let p = PiecewiseConstantProfile::new(vec![0.5, 1.5], vec![2.0]).unwrap();
        assert_eq!(p.total_width(), 2.0);
        assert_eq!(p.normalized().total_width(), 1.0);
        assert_eq!(p.interfaces(), vec![0.5]);
        assert!(SampledProfile::new(vec![0.0, 0.0], vec![1.0, 1.0], Interpolation::Linear).is_err());
        assert!(SampledProfile::new(vec![0.1, 1.0], vec![1.0, 1.0], Interpolation::Linear).is_err());
    }

    #[test]
    fn constant_profile_gives_constant_sigma() {
        let prof = EntropyProfile::Piecewise(PiecewiseConstantProfile::uniform(2.0).unwrap());
        let f = sigma_of_x(&prof, &air(), 1.0).unwrap();
        let samples = f.samples(10);
        assert!(samples.iter().all(|(_, s)| *s == samples[0].1));
        assert!(f.jumps().is_empty());
    }

    #[test]
    fn single_jump_sigma_ratio() {
        let gas = air();
        let ds = 0.7;
        let j = (-ds / (2.0 * gas.c_p())).exp();
        let prof = PiecewiseConstantProfile::new(vec![1.0, 1.0], vec![j]).unwrap();
        let f = sigma_of_x(&prof.into(), &gas, 1.3).unwrap();
        let jumps = f.jumps();
        assert_eq!(jumps.len(), 1);
        assert_relative_eq!(
            jumps[0].right / jumps[0].left,
            (ds / (2.0 * gas.c_p())).exp(),
            max_relative = 1e-13
        );
        assert_relative_eq!(jumps[0].left / jumps[0].right, j, max_relative = 1e-13);
    }

    #[test]
    fn smooth_sampled_variation_matches_trapezoid_estimate() {
        let gas = air();
        let s = |x: f64| 0.8 * (3.0 * x).sin() + 0.2 * x;
        let prof = SampledProfile::from_fn(2.0, 400, Interpolation::Linear, s).unwrap();
        let f = sigma_of_x(&prof.into(), &gas, 1.0).unwrap();
        let tv = 2.0 * f.log_sqrt_sigma_variation();
        // log sigma = s / (2 c_p) + const; integrate |s'| by the trapezoid rule.
        let n = 20000;
        let h = 2.0 / n as f64;
        let ds = |x: f64| (2.4 * (3.0 * x).cos() + 0.2).abs();
        let mut est = 0.5 * (ds(0.0) + ds(2.0));
        for i in 1..n {
            est += ds(i as f64 * h);
        }
        est *= h / (2.0 * gas.c_p());
        assert!(((tv - est) / est).abs() < 0.01);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let gas = air();
        let prof = SampledProfile::from_fn(1.0, 16, Interpolation::Linear, |x| x * x).unwrap();
        let fine = prof.refined();
        let a = sigma_of_x(&prof.clone().into(), &gas, 1.0).unwrap();
        let b = sigma_of_x(&fine.into(), &gas, 1.0).unwrap();
        for &x in prof.x() {
            assert_eq!(a.sigma_at(x), b.sigma_at(x));
        }
    }

    #[test]
    fn jump_shift_distance() {
        let p = PiecewiseConstantProfile::new(vec![1.0, 1.0], vec![std::f64::consts::E]).unwrap();
        let q = p.perturb_jump_position(1, 0.1).unwrap();
        let d = l1_distance(&p.clone().into(), &q.clone().into(), 1.0).unwrap();
        assert_relative_eq!(d, 0.2, max_relative = 1e-12);
        let same = p.perturb_jump_position(1, 0.0).unwrap();
        assert_eq!(same, p);
        assert_eq!(l1_distance(&p.clone().into(), &same.into(), 1.0).unwrap(), 0.0);
        assert!(p.perturb_jump_position(1, 1.5).is_err());
        assert!(p.perturb_jump_position(0, 0.1).is_err());
    }

    #[test]
    fn level_perturbation_distance_and_product() {
        let p = PiecewiseConstantProfile::new(vec![0.3, 0.5, 0.2], vec![1.7, 0.6]).unwrap();
        let q = p.perturb_level(1, 0.2).unwrap();
        let d = l1_distance(&p.clone().into(), &q.clone().into(), 1.0).unwrap();
        assert_relative_eq!(d, 2.0 * 0.5 * 0.2, max_relative = 1e-12);
        let prod_p: f64 = p.jumps().iter().product();
        let prod_q: f64 = q.jumps().iter().product();
        assert_relative_eq!(prod_p, prod_q, max_relative = 1e-15);
        assert_eq!(p.perturb_level(1, 0.0).unwrap(), p);
        let r = p.perturb_level(0, -0.3).unwrap();
        let d0 = l1_distance(&p.clone().into(), &r.into(), 2.0).unwrap();
        assert_relative_eq!(d0, 2.0 * 2.0 * 0.3 * 0.3, max_relative = 1e-12);
        assert!(p.perturb_level(2, 0.1).is_err());
    }

    #[test]
    fn l1_examples() {
        let zero = SampledProfile::new(vec![0.0, 2.0], vec![0.0, 0.0], Interpolation::Linear).unwrap();
        let one = SampledProfile::new(vec![0.0, 2.0], vec![1.0, 1.0], Interpolation::Linear).unwrap();
        assert_relative_eq!(l1_distance(&zero.clone().into(), &one.into(), 1.0).unwrap(), 2.0);
        assert_eq!(l1_distance(&zero.clone().into(), &zero.clone().into(), 1.0).unwrap(), 0.0);
        let short = SampledProfile::new(vec![0.0, 1.0], vec![0.0, 0.0], Interpolation::Linear).unwrap();
        assert!(l1_distance(&zero.into(), &short.into(), 1.0).is_err());
    }

    #[test]
    fn l1_matches_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let a = PiecewiseConstantProfile::new(vec![0.4, 0.9, 0.7], vec![1.8, 0.5]).unwrap();
        let b = PiecewiseConstantProfile::new(vec![1.1, 0.9], vec![0.7])
            .unwrap()
            .with_base_level(0.2);
        let (ea, eb): (EntropyProfile, EntropyProfile) = (a.into(), b.into());
        let exact = l1_distance(&ea, &eb, 1.3).unwrap();
        let (sa, sb) = (ea.segments(1.3), eb.segments(1.3));
        let at = |segs: &[EntropySegment], x: f64| {
            segs.iter().find(|s| x < s.x1).unwrap_or(segs.last().unwrap()).entropy_at(x)
        };
        // Stratified sampling: one uniform draw per cell of a regular grid.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut acc = 0.0;
        for i in 0..n {
            let x: f64 = 2.0 * (i as f64 + rng.gen::<f64>()) / n as f64;
            acc += (at(&sa, x) - at(&sb, x)).abs();
        }
        let mc = 2.0 * acc / n as f64;
        assert!((mc - exact).abs() < 1e-3, "mc {mc} exact {exact}");
    }

    #[test]
    fn scaled_frame_keeps_jumps_for_gamma_law() {
        let gas = air();
        let p = PiecewiseConstantProfile::new(vec![0.3, 0.7], vec![1.6]).unwrap();
        let s = p.to_scaled_frame(&gas, 2.0).unwrap();
        assert_relative_eq!(s.jumps()[0], 1.6, max_relative = 1e-13);
        let sig = p.level_sigmas(&gas, 2.0).unwrap();
        assert_relative_eq!(s.widths()[1], 0.7 * sig[1], max_relative = 1e-14);
    }

    #[test]
    fn tiled_extension_structure() {
        let p = PiecewiseConstantProfile::new(vec![1.0, 2.0], vec![0.4]).unwrap();
        let t = p.tiled_extension(1);
        assert_relative_eq!(t.total_width(), 12.0, max_relative = 1e-15);
        // Levels: 1, 2+2, 1+1, 2+2, 1 with jumps alternating J, 1/J.
        assert_eq!(t.widths(), &[1.0, 4.0, 2.0, 4.0, 1.0]);
        assert_relative_eq!(t.jumps()[0], 0.4);
        assert_relative_eq!(t.jumps()[1], 2.5, max_relative = 1e-14);
        let m = p.mirrored();
        assert_eq!(m.widths(), &[2.0, 1.0]);
        assert_relative_eq!(m.levels()[1], p.levels()[0], epsilon = 1e-15);
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"type":"piecewise","widths":[1.0,1.0],"jumps":[0.5]}"#;
        let p: EntropyProfile = serde_json::from_str(text).unwrap();
        assert!(matches!(p, EntropyProfile::Piecewise(_)));
        let text = r#"{"type":"sampled","x":[0.0,0.5,1.0],"s":[0.0,0.1,0.0],"interp":"linear"}"#;
        let q: EntropyProfile = serde_json::from_str(text).unwrap();
        q.validate().unwrap();
        let back: EntropyProfile = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
        assert_eq!(q.fingerprint(), back.fingerprint());
    }

    #[test]
    fn midpoint_rule_has_jumps_between_nodes() {
        let prof = SampledProfile::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 0.5], Interpolation::Midpoint)
            .unwrap();
        let f = sigma_of_x(&prof.into(), &air(), 1.0).unwrap();
        let j = f.jumps();
        assert_eq!(j.len(), 1);
        assert_relative_eq!(j[0].x, 0.5);
    }

    #[test]
    fn sigma_integral_exact_for_constant_levels() {
        let gas = air();
        let p = PiecewiseConstantProfile::new(vec![0.3, 0.7], vec![1.6]).unwrap();
        let sig = p.level_sigmas(&gas, 1.0).unwrap();
        let f = sigma_of_x(&p.into(), &gas, 1.0).unwrap();
        assert_relative_eq!(f.integral(), 0.3 * sig[0] + 0.7 * sig[1], max_relative = 1e-14);
    }
}
