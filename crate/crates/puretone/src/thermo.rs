//! Constitutive laws and the dimensionless scaling.
//!
//! A gas is described by its specific volume `v(p, s)` as a function of
//! pressure and entropy. The linearized inverse wavespeed is
//! `sigma = sqrt(-v_p)`, and genuine nonlinearity means `v_pp != 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interface shared by all constitutive laws.
///
/// The derivative methods do not validate their arguments; callers that
/// cannot guarantee `p > 0` should go through [`specific_volume`] or
/// [`sigma_squared`], which do.
pub trait GasModel: Send + Sync {
    fn v(&self, p: f64, s: f64) -> f64;
    fn v_p(&self, p: f64, s: f64) -> f64;
    fn v_pp(&self, p: f64, s: f64) -> f64;

    /// Entropy derivative of `log sigma` at fixed pressure. The default is a
    /// central difference; laws with a closed form override it.
    fn dlog_sigma_ds(&self, p: f64, s: f64) -> f64 {
        let h = 1e-5 * (1.0 + s.abs());
        let lo = (-self.v_p(p, s - h)).ln();
        let hi = (-self.v_p(p, s + h)).ln();
        0.25 * (hi - lo) / h
    }

    /// Ratio of the factors `sigma(s_right) / sigma(s_left)` at fixed pressure.
    fn sigma_ratio(&self, p: f64, s_left: f64, s_right: f64) -> f64 {
        ((-self.v_p(p, s_right)) / (-self.v_p(p, s_left))).sqrt()
    }
}

/// Ideal polytropic gas `p v^gamma = exp(s / c_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLawGas {
    gamma: f64,
    c_v: f64,
}

impl GammaLawGas {
    pub fn new(gamma: f64, c_v: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Argument(format!(
                "ratio of specific heats must exceed 1, got {gamma}"
            )));
        }
        if !(c_v > 0.0) || !c_v.is_finite() {
            return Err(Error::Argument(format!(
                "specific heat must be positive, got {c_v}"
            )));
        }
        Ok(Self { gamma, c_v })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c_v(&self) -> f64 {
        self.c_v
    }

    pub fn c_p(&self) -> f64 {
        self.gamma * self.c_v
    }

    /// Exponent of the scaled wavespeed law `sigma(w) = (1 + w)^(-nu)`.
    pub fn nu(&self) -> f64 {
        (self.gamma + 1.0) / (self.gamma - 1.0)
    }

    /// Jump scalar `J = exp(-(s_right - s_left) / (2 c_p))` across an
    /// entropy discontinuity. It equals `sigma_left / sigma_right`.
    pub fn jump_parameter(&self, s_left: f64, s_right: f64) -> f64 {
        (-(s_right - s_left) / (2.0 * self.c_p())).exp()
    }

    /// Entropy increment producing jump scalar `j`.
    pub fn entropy_step(&self, j: f64) -> f64 {
        -2.0 * self.c_p() * j.ln()
    }

    fn velocity_factor(&self, p0: f64, s: f64) -> f64 {
        let g = self.gamma;
        (g - 1.0) / (2.0 * g.sqrt())
            * (-s / (2.0 * self.c_p())).exp()
            * p0.powf(-(g - 1.0) / (2.0 * g))
    }

    fn length_factor(&self, p0: f64, s: f64) -> f64 {
        let g = self.gamma;
        (s / (2.0 * self.c_p())).exp() * p0.powf(-(g + 1.0) / (2.0 * g)) / g.sqrt()
    }
}

impl GasModel for GammaLawGas {
    fn v(&self, p: f64, s: f64) -> f64 {
        p.powf(-1.0 / self.gamma) * (s / self.c_p()).exp()
    }

    fn v_p(&self, p: f64, s: f64) -> f64 {
        -self.v(p, s) / (self.gamma * p)
    }

    fn v_pp(&self, p: f64, s: f64) -> f64 {
        (self.gamma + 1.0) * self.v(p, s) / (self.gamma * self.gamma * p * p)
    }

    fn dlog_sigma_ds(&self, _p: f64, _s: f64) -> f64 {
        0.5 / self.c_p()
    }

    fn sigma_ratio(&self, _p: f64, s_left: f64, s_right: f64) -> f64 {
        ((s_right - s_left) / (2.0 * self.c_p())).exp()
    }
}

type Law = fn(f64, f64) -> f64;

/// A constitutive law given by caller-supplied analytic derivatives.
#[derive(Clone, Copy)]
pub struct GeneralGas {
    pub name: &'static str,
    pub v: Law,
    pub v_p: Law,
    pub v_pp: Law,
}

impl std::fmt::Debug for GeneralGas {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralGas").field("name", &self.name).finish()
    }
}

impl GeneralGas {
    /// Names accepted by [`GeneralGas::named`].
    pub const REGISTRY: [&'static str; 3] = ["isothermal", "air", "degenerate-linear"];

    /// Looks up a law from the built-in registry.
    ///
    /// * `isothermal`: `v = exp(s) / p`.
    /// * `air`: the polytropic law with `gamma = 1.4`, `c_v = 1`.
    /// * `degenerate-linear`: `v = exp(s) (2 - p)`, which has `v_pp = 0` and
    ///   exists to exercise the genuine-nonlinearity guard.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "isothermal" => Ok(Self {
                name: "isothermal",
                v: |p, s| s.exp() / p,
                v_p: |p, s| -s.exp() / (p * p),
                v_pp: |p, s| 2.0 * s.exp() / (p * p * p),
            }),
            "air" => Ok(Self {
                name: "air",
                v: |p, s| p.powf(-1.0 / 1.4) * (s / 1.4).exp(),
                v_p: |p, s| -p.powf(-1.0 / 1.4 - 1.0) * (s / 1.4).exp() / 1.4,
                v_pp: |p, s| 2.4 * p.powf(-1.0 / 1.4 - 2.0) * (s / 1.4).exp() / (1.4 * 1.4),
            }),
            "degenerate-linear" => Ok(Self {
                name: "degenerate-linear",
                v: |p, s| s.exp() * (2.0 - p),
                v_p: |_p, s| -s.exp(),
                v_pp: |_p, _s| 0.0,
            }),
            other => Err(Error::Argument(format!(
                "unknown constitutive law '{other}', expected one of {:?}",
                Self::REGISTRY
            ))),
        }
    }

    /// True when `v_pp(p_bar, s)` is nonzero and of one sign over `entropies`.
    pub fn genuinely_nonlinear(&self, p_bar: f64, entropies: &[f64]) -> bool {
        let signs: Vec<f64> = entropies
            .iter()
            .map(|&s| (self.v_pp)(p_bar, s))
            .collect();
        signs.iter().all(|&c| c > 0.0) || signs.iter().all(|&c| c < 0.0)
    }
}

impl GasModel for GeneralGas {
    fn v(&self, p: f64, s: f64) -> f64 {
        (self.v)(p, s)
    }
    fn v_p(&self, p: f64, s: f64) -> f64 {
        (self.v_p)(p, s)
    }
    fn v_pp(&self, p: f64, s: f64) -> f64 {
        (self.v_pp)(p, s)
    }
}

/// Either constitutive family, usable wherever a concrete gas value is
/// stored (configurations, evolution media).
#[derive(Debug, Clone, Copy)]
pub enum Gas {
    GammaLaw(GammaLawGas),
    General(GeneralGas),
}

impl Gas {
    /// Heat capacity at constant pressure, used to turn jump scalars into
    /// entropy increments. General laws are treated as having `c_p = 1`.
    pub fn c_p(&self) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.c_p(),
            Gas::General(_) => 1.0,
        }
    }
}

impl GasModel for Gas {
    fn v(&self, p: f64, s: f64) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.v(p, s),
            Gas::General(g) => g.v(p, s),
        }
    }
    fn v_p(&self, p: f64, s: f64) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.v_p(p, s),
            Gas::General(g) => g.v_p(p, s),
        }
    }
    fn v_pp(&self, p: f64, s: f64) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.v_pp(p, s),
            Gas::General(g) => g.v_pp(p, s),
        }
    }
    fn dlog_sigma_ds(&self, p: f64, s: f64) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.dlog_sigma_ds(p, s),
            Gas::General(g) => g.dlog_sigma_ds(p, s),
        }
    }
    fn sigma_ratio(&self, p: f64, s_left: f64, s_right: f64) -> f64 {
        match self {
            Gas::GammaLaw(g) => g.sigma_ratio(p, s_left, s_right),
            Gas::General(g) => g.sigma_ratio(p, s_left, s_right),
        }
    }
}

/// Stationary constant-pressure, zero-velocity background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuietState {
    p_bar: f64,
}

impl QuietState {
    pub fn new(p_bar: f64) -> Result<Self> {
        if !(p_bar > 0.0) || !p_bar.is_finite() {
            return Err(Error::Domain(format!(
                "ambient pressure must be positive, got {p_bar}"
            )));
        }
        Ok(Self { p_bar })
    }

    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    pub fn velocity(&self) -> f64 {
        0.0
    }
}

/// Specific volume with pressure validation.
pub fn specific_volume(gas: &impl GasModel, p: f64, s: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("pressure must be positive, got {p}")));
    }
    Ok(gas.v(p, s))
}

/// Squared inverse linearized wavespeed `-v_p(p_bar, s)`.
pub fn sigma_squared(gas: &impl GasModel, p_bar: f64, s: f64) -> Result<f64> {
    if !(p_bar > 0.0) {
        return Err(Error::Domain(format!(
            "ambient pressure must be positive, got {p_bar}"
        )));
    }
    let vp = gas.v_p(p_bar, s);
    if !(vp < 0.0) || !vp.is_finite() {
        return Err(Error::Constitutive(format!(
            "v_p = {vp} at p = {p_bar}, s = {s}; hyperbolicity requires v_p < 0"
        )));
    }
    Ok(-vp)
}

/// Dimensionless state `(w, w_star, x_scaled)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledState {
    pub w: f64,
    pub w_star: f64,
    pub x_scaled: f64,
}

/// Maps a physical state at entropy `s` to scaled variables relative to
/// reference pressure `p0`: `w = (p/p0)^((gamma-1)/(2 gamma)) - 1`, with
/// velocity and material coordinate rescaled so that the isentropic system
/// has unit linear wavespeed.
pub fn nondim_forward(
    gas: &GammaLawGas,
    p0: f64,
    s: f64,
    p: f64,
    u: f64,
    x: f64,
) -> Result<ScaledState> {
    if !(p > 0.0) || !(p0 > 0.0) {
        return Err(Error::Domain(format!(
            "pressures must be positive, got p = {p}, p0 = {p0}"
        )));
    }
    let g = gas.gamma;
    Ok(ScaledState {
        w: (p / p0).powf((g - 1.0) / (2.0 * g)) - 1.0,
        w_star: gas.velocity_factor(p0, s) * u,
        x_scaled: gas.length_factor(p0, s) * x,
    })
}

/// Inverse of [`nondim_forward`], returning `(p, u, x)`.
pub fn nondim_inverse(
    gas: &GammaLawGas,
    p0: f64,
    s: f64,
    state: ScaledState,
) -> Result<(f64, f64, f64)> {
    if !(p0 > 0.0) {
        return Err(Error::Domain(format!("reference pressure must be positive, got {p0}")));
    }
    if !(state.w > -1.0) {
        return Err(Error::Domain(format!(
            "scaled pressure must exceed -1, got {}",
            state.w
        )));
    }
    let g = gas.gamma;
    let p = p0 * (state.w + 1.0).powf(2.0 * g / (g - 1.0));
    let u = state.w_star / gas.velocity_factor(p0, s);
    let x = state.x_scaled / gas.length_factor(p0, s);
    Ok((p, u, x))
}

/// Ratio of the velocity scalings on the two sides of an entropy jump.
pub fn velocity_scaling_ratio(gas: &GammaLawGas, p0: f64, s_left: f64, s_right: f64) -> f64 {
    gas.velocity_factor(p0, s_right) / gas.velocity_factor(p0, s_left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn specific_volume_examples() {
        let g2 = GammaLawGas::new(2.0, 0.7).unwrap();
        assert_eq!(specific_volume(&g2, 1.0, 0.0).unwrap(), 1.0);
        let g53 = GammaLawGas::new(5.0 / 3.0, 1.5).unwrap();
        assert_relative_eq!(
            specific_volume(&g53, 1.0, g53.c_p()).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        let air = GammaLawGas::new(1.4, 1.0).unwrap();
        let v = specific_volume(&air, 2.0, 0.0).unwrap();
        assert_relative_eq!(v, 2f64.powf(-1.0 / 1.4), max_relative = 1e-15);
        // Invert p v^gamma = exp(s/c_v) numerically for the same state.
        let p_back = (0.0f64 / air.c_v()).exp() / v.powf(air.gamma());
        assert_relative_eq!(p_back, 2.0, max_relative = 1e-14);
        assert!(specific_volume(&air, 0.0, 0.0).is_err());
        assert!(specific_volume(&air, -1.0, 0.0).is_err());
    }

    #[test]
    fn gamma_invariants() {
        assert!(GammaLawGas::new(1.0, 1.0).is_err());
        assert!(GammaLawGas::new(0.5, 1.0).is_err());
        let g = GammaLawGas::new(1.4, 0.718).unwrap();
        assert_eq!(g.c_p(), 1.4 * 0.718);
        assert!(g.nu() > 1.0);
        assert_relative_eq!(GammaLawGas::new(2.0, 1.0).unwrap().nu(), 3.0);
    }

    #[test]
    fn sigma_squared_examples() {
        let g2 = GammaLawGas::new(2.0, 1.0).unwrap();
        assert_relative_eq!(sigma_squared(&g2, 1.0, 0.0).unwrap(), 0.5, max_relative = 1e-15);
        let air = GammaLawGas::new(1.4, 1.0).unwrap();
        let p: f64 = 1.7;
        let s = 0.3;
        let closed = p.powf(-(2.4) / 1.4) * (s / 1.4f64).exp() / 1.4;
        assert_relative_eq!(sigma_squared(&air, p, s).unwrap(), closed, max_relative = 1e-14);
        let degenerate = GeneralGas {
            name: "bad",
            v: |p, _| p,
            v_p: |_, _| 1.0,
            v_pp: |_, _| 0.0,
        };
        assert!(matches!(
            sigma_squared(&degenerate, 1.0, 0.0),
            Err(Error::Constitutive(_))
        ));
    }

    #[test]
    fn finite_difference_matches_minus_sigma_squared() {
        let air = GammaLawGas::new(1.4, 1.0).unwrap();
        for &(p, s) in &[(1.0, 0.0), (0.3, 1.2), (5.0, -0.7)] {
            let h = 1e-6 * p;
            let fd = (air.v(p + h, s) - air.v(p - h, s)) / (2.0 * h);
            let target = -sigma_squared(&air, p, s).unwrap();
            assert!(((fd - target) / target).abs() < 1e-6);
        }
    }

    #[test]
    fn second_derivative_positive_for_gamma_law() {
        let air = GammaLawGas::new(1.4, 1.0).unwrap();
        let (p, s) = (1.3, 0.2);
        let h = 1e-4;
        let fd = (air.v_p(p + h, s) - air.v_p(p - h, s)) / (2.0 * h);
        assert_relative_eq!(fd, air.v_pp(p, s), max_relative = 1e-7);
        assert!(air.v_pp(p, s) > 0.0);
    }

    #[test]
    fn quiet_state_maps_to_origin() {
        let gas = GammaLawGas::new(1.4, 1.0).unwrap();
        let st = nondim_forward(&gas, 2.5, 0.4, 2.5, 0.0, 3.0).unwrap();
        assert_eq!(st.w, 0.0);
        assert_eq!(st.w_star, 0.0);
        let g2 = GammaLawGas::new(2.0, 1.0).unwrap();
        let st = nondim_forward(&g2, 1.0, 0.0, 4.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(st.w, 2f64.sqrt() - 1.0, max_relative = 1e-15);
        assert!(QuietState::new(0.0).is_err());
        assert_eq!(QuietState::new(1.0).unwrap().velocity(), 0.0);
    }

    #[test]
    fn scaled_length_is_sigma_times_length() {
        let gas = GammaLawGas::new(1.4, 0.9).unwrap();
        let (p0, s) = (1.8, -0.4);
        let st = nondim_forward(&gas, p0, s, p0, 0.0, 1.0).unwrap();
        let sigma = sigma_squared(&gas, p0, s).unwrap().sqrt();
        assert_relative_eq!(st.x_scaled, sigma, max_relative = 1e-14);
    }

    #[test]
    fn jump_parameter_matches_velocity_scaling() {
        let gas = GammaLawGas::new(1.4, 0.8).unwrap();
        for &(sl, sr) in &[(0.0, 0.5), (1.0, -2.0), (0.3, 0.3)] {
            let j = gas.jump_parameter(sl, sr);
            let ratio = velocity_scaling_ratio(&gas, 1.7, sl, sr);
            assert!(((j - ratio) / ratio).abs() < 1e-12);
            let sig_l = sigma_squared(&gas, 1.0, sl).unwrap().sqrt();
            let sig_r = sigma_squared(&gas, 1.0, sr).unwrap().sqrt();
            assert_relative_eq!(j, sig_l / sig_r, max_relative = 1e-12);
            assert_relative_eq!(sl + gas.entropy_step(j), sr, epsilon = 1e-12);
        }
    }

    #[test]
    fn registry_laws() {
        for name in GeneralGas::REGISTRY {
            let g = GeneralGas::named(name).unwrap();
            assert!(g.v_p(1.2, 0.1) < 0.0);
            let h = 1e-6;
            let fd = (g.v(1.2 + h, 0.1) - g.v(1.2 - h, 0.1)) / (2.0 * h);
            assert!((fd - g.v_p(1.2, 0.1)).abs() < 1e-6);
        }
        assert!(GeneralGas::named("steam").is_err());
        let air = GeneralGas::named("air").unwrap();
        let reference = GammaLawGas::new(1.4, 1.0).unwrap();
        assert_relative_eq!(air.v_pp(0.8, 0.3), reference.v_pp(0.8, 0.3), max_relative = 1e-12);
        assert_relative_eq!(
            air.dlog_sigma_ds(0.8, 0.3),
            reference.dlog_sigma_ds(0.8, 0.3),
            max_relative = 1e-8
        );
        assert!(!GeneralGas::named("degenerate-linear")
            .unwrap()
            .genuinely_nonlinear(1.0, &[0.0, 1.0]));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(
            gamma in 1.05f64..3.0,
            c_v in 0.2f64..3.0,
            p0 in 0.1f64..10.0,
            s in -2.0f64..2.0,
            ratio in 0.05f64..20.0,
            u in -5.0f64..5.0,
            x in -10.0f64..10.0,
        ) {
            let gas = GammaLawGas::new(gamma, c_v).unwrap();
            let p = p0 * ratio;
            let st = nondim_forward(&gas, p0, s, p, u, x).unwrap();
            let (p2, u2, x2) = nondim_inverse(&gas, p0, s, st).unwrap();
            prop_assert!(((p2 - p) / p).abs() < 1e-13);
            prop_assert!((u2 - u).abs() <= 1e-13 * (1.0 + u.abs()));
            prop_assert!((x2 - x).abs() <= 1e-13 * (1.0 + x.abs()));
        }

        #[test]
        fn sigma_squared_positive(p in 1e-3f64..1e3, s in -5.0f64..5.0, gamma in 1.01f64..4.0) {
            let gas = GammaLawGas::new(gamma, 1.0).unwrap();
            prop_assert!(sigma_squared(&gas, p, s).unwrap() > 0.0);
        }
    }
}
