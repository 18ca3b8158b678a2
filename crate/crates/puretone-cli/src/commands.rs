//! One handler per subcommand. Each returns the `result` block of the
//! report plus the exit status it wants.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use puretone::bifurcate::{reference_period, LSDecomposition, PureToneSolution};
use puretone::evolve::{Frame, Medium};
use puretone::exec::Execution;
use puretone::lindiv::{base_frequency, nonresonance_check, resonance_scan, DivisorTable, Flavor};
use puretone::profiles::{EntropyProfile, PiecewiseConstantProfile};
use puretone::recipes::{isentropic_contrast, Problem};
use puretone::sturm::eigenfrequency;
use puretone::tile::{assemble, spatial_period_gap, verify, TiledSolution};
use puretone::Error;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Result of a command: the report body and the exit status.
pub struct Outcome {
    pub result: Value,
    pub status: Status,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Resonant,
}

pub enum Failure {
    Config(String),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl From<crate::config::ConfigError> for Failure {
    fn from(e: crate::config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

type Run = Result<Outcome, Failure>;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// The piecewise-constant profile in scaled widths and jump scalars.
fn scaled_profile(problem: &Problem) -> Result<PiecewiseConstantProfile, Failure> {
    match (&problem.profile, problem.frame) {
        (EntropyProfile::Piecewise(p), Frame::NondimScaled) => Ok(p.clone()),
        (EntropyProfile::Piecewise(p), Frame::PhysicalGeneral) => {
            Ok(p.to_scaled_frame(&problem.gas.build()?, problem.p_bar)?)
        }
        (EntropyProfile::Sampled(_), _) => Err(Failure::Config(
            "this command needs a piecewise-constant profile (use --general for sampled ones)".into(),
        )),
    }
}

pub fn divisors(cfg: &RunConfig, out: &Path, exec: Execution) -> Run {
    let problem = cfg.problem()?;
    let medium = problem.medium()?;
    let sturm = &problem.settings.sturm;
    let period = match cfg.divisors.period {
        Some(t) => t,
        None => reference_period(&medium, problem.k, problem.flavor, sturm)?,
    };
    let j_max = cfg.divisors.j_max;
    let table = match &medium {
        Medium::Nondim { profile, .. } => DivisorTable::build(profile, period, j_max, problem.flavor, exec)?,
        Medium::Physical { .. } => {
            let entries = exec
                .map(j_max, |i| medium.divisor(period, i + 1, problem.flavor, sturm))
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            DivisorTable {
                period,
                flavor: problem.flavor,
                entries,
                fingerprint: medium.fingerprint(),
            }
        }
    };
    table.write_csv(create(out, "divisors.csv")?)?;
    let smallest = (1..=j_max)
        .filter(|&j| j != problem.k)
        .map(|j| (j, table.get(j).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(Outcome {
        summary: vec![
            format!("period {period:.16e}, {j_max} divisors written to divisors.csv"),
            match smallest {
                Some((j, d)) => format!("smallest off-kernel divisor |delta_{j}| = {d:e}"),
                None => "no off-kernel divisors".into(),
            },
        ],
        result: json!({ "table": table, "smallest_off_kernel": smallest }),
        status: Status::Success,
    })
}

pub fn freq(cfg: &RunConfig, out: &Path, general: bool) -> Run {
    let problem = cfg.problem()?;
    let k_max = cfg.freq.k_max;
    if k_max == 0 {
        return Err(Failure::Config("freq.k_max must be at least 1".into()));
    }
    let mut summary = vec![format!("{:>4} {:>24} {:>24}", "k", "omega", "period")];
    let rows: Vec<Value> = if general {
        let Medium::Physical { field } = problem.medium()? else {
            return Err(Failure::Config("--general needs the physical frame".into()));
        };
        let step = if problem.flavor == Flavor::Acoustic { 2 } else { 1 };
        let mut rows = Vec::new();
        for k in (step..=k_max).step_by(step) {
            let pair = eigenfrequency(&field, k, problem.flavor, &problem.settings.sturm)?;
            pair.write_csv(create(out, &format!("eigenfunction_k{k}.csv"))?)?;
            summary.push(format!("{k:>4} {:>24.16e} {:>24.16e}", pair.omega, pair.period));
            rows.push(json!({
                "k": k,
                "omega": pair.omega,
                "period": pair.period,
                "angle_residual": pair.angle_residual,
                "boundary_residual": pair.boundary_residual,
                "eigenfunction": format!("eigenfunction_k{k}.csv"),
            }));
        }
        rows
    } else {
        let profile = scaled_profile(problem)?;
        let mut rows = Vec::new();
        for k in 1..=k_max {
            let base = base_frequency(&profile, k)?;
            summary.push(format!("{k:>4} {:>24.16e} {:>24.16e}", base.omega, base.period));
            rows.push(serde_json::to_value(base).map_err(Error::from)?);
        }
        rows
    };
    Ok(Outcome {
        result: json!({ "general": general, "frequencies": rows }),
        status: Status::Success,
        summary,
    })
}

pub fn resonance(cfg: &RunConfig, exec: Execution) -> Run {
    let problem = cfg.problem()?;
    let rc = &cfg.resonance;
    if let EntropyProfile::Piecewise(_) = problem.profile {
        let profile = scaled_profile(problem)?;
        let report = nonresonance_check(&profile, problem.k, rc.j_max, rc.tol, problem.flavor)?;
        let status = if report.is_nonresonant { Status::Success } else { Status::Resonant };
        let summary = vec![format!(
            "k = {}: {} (min |delta_j| = {:e}, offenders {:?})",
            report.k,
            if report.is_nonresonant { "nonresonant" } else { "RESONANT" },
            report.min_divisor,
            report.offenders
        )];
        return Ok(Outcome {
            result: serde_json::to_value(&report).map_err(Error::from)?,
            status,
            summary,
        });
    }
    let mut settings = problem.settings;
    settings.modes = rc.j_max;
    settings.resonance_tol = rc.tol;
    match puretone::bifurcate::build_decomposition(problem.medium()?, problem.k, problem.flavor, &settings, exec) {
        Ok(dec) => Ok(Outcome {
            summary: vec![format!("k = {}: nonresonant up to j = {}", problem.k, rc.j_max)],
            result: json!({ "k": problem.k, "period": dec.period, "is_nonresonant": true, "divisors": &dec.divisors[1..] }),
            status: Status::Success,
        }),
        Err(Error::Resonance { offenders, min_divisor }) => Ok(Outcome {
            summary: vec![format!("k = {}: RESONANT, offenders {offenders:?}", problem.k)],
            result: json!({ "k": problem.k, "is_nonresonant": false, "offenders": offenders, "min_divisor": min_divisor }),
            status: Status::Resonant,
        }),
        Err(e) => Err(e.into()),
    }
}

pub fn scan(cfg: &RunConfig, exec: Execution) -> Run {
    let settings = cfg.scan.settings(cfg.seed);
    let report = resonance_scan(&cfg.scan.sampler, &settings, exec)?;
    Ok(Outcome {
        summary: vec![format!(
            "{} of {} profiles resonant (fraction {:e})",
            report.resonant_count, settings.n_samples, report.resonant_fraction
        )],
        result: serde_json::to_value(&report).map_err(Error::from)?,
        status: Status::Success,
    })
}

fn solution_summary(sol: &PureToneSolution) -> Value {
    json!({
        "alpha": sol.alpha,
        "z": sol.z,
        "period": sol.period,
        "modes": sol.modes,
        "boundary_residual": sol.boundary_residual,
        "pde_residual": sol.pde_residual,
        "deviation": sol.deviation,
        "w_size": sol.w_size,
        "aux_iterations": sol.aux_iterations,
        "root_iterations": sol.root_iterations,
        "y0": sol.y0,
    })
}

fn first_alpha(problem: &Problem, explicit: Option<f64>) -> Result<f64, Failure> {
    explicit
        .or_else(|| problem.alphas.first().copied())
        .ok_or_else(|| Failure::Config("no amplitude given".into()))
}

pub fn solve(cfg: &RunConfig, exec: Execution) -> Run {
    let problem = cfg.problem()?;
    if problem.alphas.is_empty() {
        return Err(Failure::Config("problem.alphas is empty".into()));
    }
    let dec = problem.decomposition(exec)?;
    let mut solutions = Vec::new();
    let mut summary = vec![format!("period {:.16e}, dg/dz {:e}", dec.period, dec.dg_dz)];
    for &alpha in &problem.alphas {
        let sol = problem.solve(&dec, alpha)?;
        summary.push(format!(
            "alpha {alpha:e}: residual {:e}, z {:e}, deviation {:e}",
            sol.boundary_residual, sol.z, sol.deviation
        ));
        solutions.push(sol);
    }
    let ratios: Vec<f64> = solutions.windows(2).map(|w| w[0].deviation / w[1].deviation).collect();
    if !ratios.is_empty() {
        summary.push(format!("deviation ratios {ratios:?}"));
    }
    let contrast = match problem.contrast_spans {
        Some(spans) => {
            let last = solutions.last().expect("alphas is not empty");
            let report = isentropic_contrast(problem, last, spans)?;
            summary.push(format!(
                "contrast over {:e}: isentropic {}, nonresonant {}",
                report.extent,
                march_word(&report.isentropic),
                march_word(&report.nonresonant)
            ));
            Some(report)
        }
        None => None,
    };
    Ok(Outcome {
        result: json!({
            "period": dec.period,
            "dg_dz": dec.dg_dz,
            "divisors": &dec.divisors[1..],
            "solutions": solutions.iter().map(solution_summary).collect::<Vec<_>>(),
            "deviation_ratios": ratios,
            "contrast": contrast,
        }),
        status: Status::Success,
        summary,
    })
}

fn march_word(m: &puretone::recipes::MarchOutcome) -> String {
    match m.stopped_at {
        Some(x) => format!("stopped at x = {x:.6}"),
        None if m.completed => format!("completed (max |y_t| {:.6e})", m.max_gradient),
        None => "failed".into(),
    }
}

fn solve_one(problem: &Problem, alpha: f64, exec: Execution) -> Result<(LSDecomposition, PureToneSolution), Failure> {
    let dec = problem.decomposition(exec)?;
    let sol = problem.solve(&dec, alpha)?;
    Ok((dec, sol))
}

pub fn tile(cfg: &RunConfig, out: &Path, exec: Execution) -> Run {
    let problem = cfg.problem()?;
    let tc = &cfg.tile;
    let alpha = first_alpha(problem, tc.alpha)?;
    let (dec, sol) = solve_one(problem, alpha, exec)?;
    let medium = dec.medium();
    let evolve = &problem.settings.evolve;
    let tiled = assemble(&sol, medium, problem.flavor, tc.nx, tc.nt, evolve, exec)?;
    let report = verify(&tiled, medium)?;
    let path = tiled.export(out, tc.format)?;
    let period_gap = spatial_period_gap(&sol, medium, evolve)?;
    Ok(Outcome {
        summary: vec![
            format!("tile written to {}", path.display()),
            format!(
                "span {:e}, max seam gap {:e}, max residual {:e}, period gap {period_gap:e}",
                tiled.span,
                report.max_seam_gap,
                report.max()
            ),
        ],
        result: json!({
            "file": path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "rows": tiled.x.len() * tiled.nt(),
            "span": tiled.span,
            "solution": solution_summary(&sol),
            "seams": tiled.seams,
            "half_shift_symmetry_gap": tiled.half_shift_symmetry_gap(),
            "spatial_period_gap": period_gap,
            "residuals": report,
        }),
        status: Status::Success,
    })
}

pub fn verify_cmd(cfg: &RunConfig, tile_path: Option<&Path>, exec: Execution) -> Run {
    let problem = cfg.problem()?;
    let medium = problem.medium()?;
    if let Some(path) = tile_path {
        let file = File::open(path).map_err(|e| Failure::Config(format!("cannot open {}: {e}", path.display())))?;
        let tiled = TiledSolution::read_json(std::io::BufReader::new(file))?;
        let report = verify(&tiled, &medium)?;
        return Ok(Outcome {
            summary: vec![format!(
                "max residual {:e}, max seam gap {:e}, panel consistency {:e}",
                report.max(),
                report.max_seam_gap,
                report.panel_consistency
            )],
            result: json!({ "source": path.display().to_string(), "residuals": report }),
            status: Status::Success,
        });
    }
    let vc = &cfg.verify;
    if vc.levels == 0 {
        return Err(Failure::Config("verify.levels must be at least 1".into()));
    }
    let alpha = first_alpha(problem, vc.alpha)?;
    let (dec, sol) = solve_one(problem, alpha, exec)?;
    let evolve = &problem.settings.evolve;
    let mut levels = Vec::new();
    let mut summary = Vec::new();
    for level in 0..vc.levels {
        let (nx, nt) = (vc.nx << level, vc.nt << level);
        let tiled = assemble(&sol, dec.medium(), problem.flavor, nx, nt, evolve, exec)?;
        let report = verify(&tiled, dec.medium())?;
        summary.push(format!(
            "nx {nx:>5} nt {nt:>5}: max residual {:e}, seam gap {:e}",
            report.max(),
            report.max_seam_gap
        ));
        levels.push(report);
    }
    let ratios: Vec<f64> = levels.windows(2).map(|w| w[0].max() / w[1].max()).collect();
    summary.push(format!("refinement ratios {ratios:?}"));
    let period_gap = spatial_period_gap(&sol, dec.medium(), evolve)?;
    summary.push(format!("spatial period gap {period_gap:e}"));
    Ok(Outcome {
        result: json!({
            "solution": solution_summary(&sol),
            "levels": levels,
            "refinement_ratios": ratios,
            "spatial_period_gap": period_gap,
        }),
        status: Status::Success,
        summary,
    })
}
