//! Serializable problem descriptions and the bundled recipes.
//!
//! A [`Problem`] names a frame, an entropy profile, a gas, the bifurcating
//! mode and the amplitudes to solve for. The command-line driver reads it
//! from JSON; the recipes are vetted instances.

use serde::{Deserialize, Serialize};

use crate::bifurcate::{
    build_decomposition, solve_pure_tone_warm, AuxMethod, BifurcationSettings, LSDecomposition, PureToneSolution,
    WarmStart,
};
use crate::error::{Error, Result};
use crate::evolve::{evolve_monitored, EvolutionState, Frame, Medium};
use crate::exec::Execution;
use crate::lindiv::Flavor;
use crate::profiles::{EntropyProfile, PiecewiseConstantProfile};
use crate::thermo::{GammaLawGas, Gas, GeneralGas};
use crate::timeseries::FourierTimeSeries;

/// Constitutive law by parameters or registry name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum GasSpec {
    GammaLaw {
        gamma: f64,
        #[serde(default = "unit")]
        c_v: f64,
    },
    Named {
        name: String,
    },
}

fn unit() -> f64 {
    1.0
}

impl GasSpec {
    pub fn build(&self) -> Result<Gas> {
        match self {
            GasSpec::GammaLaw { gamma, c_v } => Ok(Gas::GammaLaw(GammaLawGas::new(*gamma, *c_v)?)),
            GasSpec::Named { name } => Ok(Gas::General(GeneralGas::named(name)?)),
        }
    }

    /// `nu = (gamma + 1) / (gamma - 1)`; only polytropic laws have a
    /// scaled frame.
    pub fn nu(&self) -> Result<f64> {
        match self.build()? {
            Gas::GammaLaw(g) => Ok(g.nu()),
            Gas::General(_) => Err(Error::Argument(
                "the scaled frame needs a gamma-law gas".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub frame: Frame,
    /// In the scaled frame a piecewise-constant profile whose widths are
    /// the scaled widths and whose jumps are the jump scalars.
    pub profile: EntropyProfile,
    pub gas: GasSpec,
    #[serde(default = "unit")]
    pub p_bar: f64,
    pub k: usize,
    #[serde(default)]
    pub flavor: Flavor,
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Equal steps from zero up to each amplitude, each warm-started from
    /// the previous one. Zero solves directly.
    #[serde(default)]
    pub continuation_steps: usize,
    /// When set, the solved tone and its isentropic counterpart are
    /// marched over this many profile lengths.
    #[serde(default)]
    pub contrast_spans: Option<f64>,
    #[serde(default)]
    pub settings: BifurcationSettings,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.settings.validate()?;
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::Argument(format!("amplitude {a} is not finite")));
        }
        if let Some(s) = self.contrast_spans {
            if !(s > 0.0) {
                return Err(Error::Argument(format!("contrast_spans must be positive, got {s}")));
            }
        }
        if !(self.p_bar > 0.0) {
            return Err(Error::Argument(format!("p_bar must be positive, got {}", self.p_bar)));
        }
        Ok(())
    }

    pub fn medium(&self) -> Result<Medium> {
        match self.frame {
            Frame::NondimScaled => Medium::nondim(self.piecewise()?.clone(), self.gas.nu()?),
            Frame::PhysicalGeneral => Medium::physical(&self.profile, self.gas.build()?, self.p_bar),
        }
    }

    fn piecewise(&self) -> Result<&PiecewiseConstantProfile> {
        match &self.profile {
            EntropyProfile::Piecewise(p) => Ok(p),
            EntropyProfile::Sampled(_) => Err(Error::Argument(
                "the scaled frame needs a piecewise-constant profile".into(),
            )),
        }
    }

    /// The jump-free medium of the given length at the first entropy level.
    pub fn isentropic_medium(&self, length: f64) -> Result<Medium> {
        let flat = |base: f64| PiecewiseConstantProfile::uniform(length).map(|p| p.with_base_level(base));
        match self.frame {
            Frame::NondimScaled => Medium::nondim(flat(0.0)?, self.gas.nu()?),
            Frame::PhysicalGeneral => {
                let base = match &self.profile {
                    EntropyProfile::Piecewise(p) => p.base_level(),
                    EntropyProfile::Sampled(s) => s.s()[0] / (2.0 * self.gas.build()?.c_p()),
                };
                Medium::physical(&flat(base)?.into(), self.gas.build()?, self.p_bar)
            }
        }
    }

    pub fn decomposition(&self, exec: Execution) -> Result<LSDecomposition> {
        self.validate()?;
        build_decomposition(self.medium()?, self.k, self.flavor, &self.settings, exec)
    }

    /// Solves at `alpha`, through `continuation_steps` intermediate
    /// amplitudes when requested.
    pub fn solve(&self, dec: &LSDecomposition, alpha: f64) -> Result<PureToneSolution> {
        let steps = self.continuation_steps.max(1);
        let mut warm = WarmStart::default();
        let mut last = None;
        for i in 1..=steps {
            let a = alpha * i as f64 / steps as f64;
            let sol = solve_pure_tone_warm(dec, a, &warm)?;
            warm = WarmStart {
                z: Some(sol.z),
                w: Some(sol.y0.clone()),
            };
            last = Some(sol);
        }
        Ok(last.expect("at least one continuation step"))
    }
}

/// Relative tolerance for calling a sampled gradient history monotone.
pub const MONOTONE_JITTER: f64 = 1e-2;

/// How one long march ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarchOutcome {
    pub completed: bool,
    /// Position where a detector fired.
    pub stopped_at: Option<f64>,
    pub reason: Option<String>,
    pub initial_gradient: f64,
    pub max_gradient: f64,
    /// Largest relative fall of `max |y_t|` below its running maximum.
    pub largest_gradient_drop: f64,
    /// The drop stays within the jitter of a sampled maximum.
    pub gradient_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub alpha: f64,
    pub extent: f64,
    /// `rest + alpha cos_k` over the jump-free medium.
    pub isentropic: MarchOutcome,
    /// The solved tone over the reflected extension of the profile.
    pub nonresonant: MarchOutcome,
}

fn march_outcome(start: &EvolutionState, medium: &Medium, extent: f64, problem: &Problem, modes: usize) -> MarchOutcome {
    let settings = crate::evolve::EvolveSettings {
        modes,
        ..problem.settings.evolve
    };
    let (result, diag) = evolve_monitored(start, medium, extent, &settings);
    let mut running: f64 = 0.0;
    let mut drop: f64 = 0.0;
    for &(_, g) in &diag.gradient_history {
        running = running.max(g);
        drop = drop.max((running - g) / running);
    }
    let (completed, stopped_at, reason) = match result {
        Ok(_) => (true, None, None),
        Err(Error::Evolution { x, reason }) => (false, Some(x), Some(reason)),
        Err(e) => (false, None, Some(e.to_string())),
    };
    MarchOutcome {
        completed,
        stopped_at,
        reason,
        initial_gradient: diag.initial_gradient,
        max_gradient: diag.max_gradient,
        largest_gradient_drop: drop,
        gradient_monotone: drop < MONOTONE_JITTER,
    }
}

/// Marches `rest + alpha cos_k` through the isentropic medium and the
/// solved tone through the reflected extension of the profile, both over
/// `spans` profile lengths at the tone's period.
pub fn isentropic_contrast(problem: &Problem, solution: &PureToneSolution, spans: f64) -> Result<ContrastReport> {
    let medium = problem.medium()?;
    let extent = spans * medium.length();
    let panels = spans.ceil().max(1.0) as usize;
    let extended = medium.reflected_extension(panels)?;
    let flat = problem.isentropic_medium(extent)?;
    let mut tone = FourierTimeSeries::cosine(solution.period, solution.modes, solution.k, solution.alpha);
    tone.set_cos(0, medium.rest_value());
    let frame = medium.frame();
    Ok(ContrastReport {
        alpha: solution.alpha,
        extent,
        isentropic: march_outcome(&EvolutionState::new(tone, 0.0, frame), &flat, extent, problem, solution.modes),
        nonresonant: march_outcome(
            &EvolutionState::new(solution.y0.clone(), 0.0, frame),
            &extended,
            extent,
            problem,
            solution.modes,
        ),
    })
}

pub const RECIPE_NAMES: [&str; 3] = ["square-wave-k1", "isentropic-contrast", "three-jump-acoustic-k2"];

/// Two equal widths `theta` joined by the jump `cot^2 theta` that puts
/// `k = 1` in the kernel at period `2 pi`.
fn diagonal_square_wave(theta: f64) -> Result<PiecewiseConstantProfile> {
    let cot = theta.cos() / theta.sin();
    PiecewiseConstantProfile::new(vec![theta, theta], vec![cot * cot])
}

pub fn recipe(name: &str) -> Result<Problem> {
    match name {
        "square-wave-k1" => Ok(Problem {
            frame: Frame::NondimScaled,
            profile: diagonal_square_wave(1.0)?.into(),
            gas: GasSpec::GammaLaw { gamma: 1.4, c_v: 1.0 },
            p_bar: 1.0,
            k: 1,
            flavor: Flavor::PeriodicTile,
            alphas: vec![1e-3, 5e-4],
            continuation_steps: 0,
            contrast_spans: None,
            settings: BifurcationSettings::default(),
        }),
        "isentropic-contrast" => Ok(Problem {
            frame: Frame::NondimScaled,
            profile: diagonal_square_wave(0.3)?.into(),
            gas: GasSpec::GammaLaw { gamma: 6.0, c_v: 1.0 },
            p_bar: 1.0,
            k: 1,
            flavor: Flavor::PeriodicTile,
            alphas: vec![0.1],
            continuation_steps: 10,
            contrast_spans: Some(20.0),
            settings: BifurcationSettings {
                modes: 24,
                aux_method: AuxMethod::NewtonKrylov,
                ..BifurcationSettings::default()
            },
        }),
        "three-jump-acoustic-k2" => Ok(Problem {
            frame: Frame::PhysicalGeneral,
            profile: PiecewiseConstantProfile::new(vec![0.3, 0.2, 0.35, 0.15], vec![0.8, 1.3, 0.7])?.into(),
            gas: GasSpec::GammaLaw { gamma: 1.4, c_v: 1.0 },
            p_bar: 1.0,
            k: 2,
            flavor: Flavor::Acoustic,
            alphas: vec![1e-3, 5e-4],
            continuation_steps: 0,
            contrast_spans: None,
            settings: BifurcationSettings::default(),
        }),
        other => Err(Error::Argument(format!(
            "unknown recipe '{other}', expected one of {RECIPE_NAMES:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipes_round_trip_through_json() {
        for name in RECIPE_NAMES {
            let p = recipe(name).unwrap();
            p.validate().unwrap();
            let text = serde_json::to_string(&p).unwrap();
            let back: Problem = serde_json::from_str(&text).unwrap();
            assert_eq!(p, back, "{name}");
        }
        assert!(recipe("nope").is_err());
    }

    #[test]
    fn scaled_frame_rejects_general_laws() {
        let mut p = recipe("square-wave-k1").unwrap();
        p.gas = GasSpec::Named { name: "isothermal".into() };
        assert!(p.medium().is_err());
    }

    #[test]
    fn isentropic_medium_has_no_interfaces() {
        for name in RECIPE_NAMES {
            let p = recipe(name).unwrap();
            let m = p.isentropic_medium(3.0).unwrap();
            assert!(m.interfaces().is_empty(), "{name}");
            assert_eq!(m.length(), 3.0);
        }
    }
}
