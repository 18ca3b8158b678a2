//! Assembly of a minimal tile into the space-periodic solution, plus the
//! finite-difference checks run on the result.
//!
//! A tile is the solution sampled on `[0, l] x [0, T)`, split into its
//! even part `w` and odd part `w*` in `t` (pressure and velocity in the
//! physical frame). The periodic-tile flavor fills `[0, 4l]` with four
//! panels:
//!
//! | panel        | `w(x, t)`               | `w*(x, t)`               |
//! |--------------|-------------------------|--------------------------|
//! | `[0, l]`     | `w(x, t)`               | `w*(x, t)`               |
//! | `[l, 2l]`    | `w(2l - x, t + T/2)`    | `-w*(2l - x, t + T/2)`   |
//! | `[2l, 3l]`   | `w(x - 2l, t + T/2)`    | `w*(x - 2l, t + T/2)`    |
//! | `[3l, 4l]`   | `w(4l - x, t)`          | `-w*(4l - x, t)`         |
//!
//! The acoustic flavor uses the first two rows without the time shift and
//! is `2l`-periodic. Time shifts are index shifts, which is why `nt` must
//! be a multiple of four.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bifurcate::PureToneSolution;
use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolutionState, EvolveSettings, Frame, Medium, Method};
use crate::exec::Execution;
use crate::lindiv::Flavor;
use crate::thermo::GasModel;

/// Samples of one tile on a uniform `(nx + 1) x nt` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub frame: Frame,
    pub length: f64,
    pub period: f64,
    /// `x_i = i l / nx` for `i = 0..=nx`.
    pub x: Vec<f64>,
    /// `w[i][j]` at `(x_i, j T / nt)`.
    pub w: Vec<Vec<f64>>,
    pub wstar: Vec<Vec<f64>>,
    /// Coefficient discontinuities inside `(0, l)`.
    pub jumps: Vec<f64>,
}

impl TileGrid {
    pub fn nx(&self) -> usize {
        self.x.len() - 1
    }

    pub fn nt(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let nt = self.nt();
        if self.x.len() < 2 {
            return Err(Error::Argument("a tile needs at least two x points".into()));
        }
        if nt == 0 || !nt.is_multiple_of(4) {
            return Err(Error::Argument(format!(
                "nt = {nt} must be a positive multiple of 4 so that T/4 and T/2 are grid shifts"
            )));
        }
        let rows_ok = self.w.len() == self.x.len()
            && self.wstar.len() == self.x.len()
            && self.w.iter().chain(&self.wstar).all(|r| r.len() == nt);
        if !rows_ok {
            return Err(Error::Argument("tile rows do not match the x grid and nt".into()));
        }
        if !(self.length > 0.0 && self.period > 0.0) {
            return Err(Error::Argument("tile length and period must be positive".into()));
        }
        Ok(())
    }

    /// The quiet state of `medium` on the tile grid.
    pub fn quiet(medium: &Medium, period: f64, nx: usize, nt: usize) -> Result<Self> {
        let length = medium.length();
        let grid = Self {
            frame: medium.frame(),
            length,
            period,
            x: uniform_points(length, nx),
            w: vec![vec![medium.rest_value(); nt]; nx + 1],
            wstar: vec![vec![0.0; nt]; nx + 1],
            jumps: jump_positions(medium),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Marches the solved data across `[0, l]`, stopping at each grid
    /// point. A grid point on an interface holds the left limit.
    pub fn sample(
        solution: &PureToneSolution,
        medium: &Medium,
        nx: usize,
        nt: usize,
        settings: &EvolveSettings,
    ) -> Result<Self> {
        if medium.fingerprint() != solution.fingerprint {
            return Err(Error::Argument("the medium does not match the solution".into()));
        }
        if nt <= 2 * solution.modes {
            return Err(Error::Argument(format!(
                "nt = {nt} does not resolve {} modes",
                solution.modes
            )));
        }
        let settings = EvolveSettings {
            modes: solution.modes,
            ..*settings
        };
        let x = uniform_points(solution.length, nx);
        let mut state = EvolutionState::new(solution.y0.clone(), 0.0, solution.frame);
        let mut w = Vec::with_capacity(x.len());
        let mut wstar = Vec::with_capacity(x.len());
        for (i, &xi) in x.iter().enumerate() {
            if i > 0 {
                state = evolve(&state, medium, xi, Method::SpectralMarch, &settings)?;
            }
            w.push(state.y.project_even().to_samples(nt)?);
            wstar.push(state.y.project_odd().to_samples(nt)?);
        }
        let grid = Self {
            frame: solution.frame,
            length: solution.length,
            period: solution.period,
            x,
            w,
            wstar,
            jumps: jump_positions(medium),
        };
        grid.validate()?;
        Ok(grid)
    }
}

fn uniform_points(length: f64, nx: usize) -> Vec<f64> {
    (0..=nx).map(|i| length * i as f64 / nx as f64).collect()
}

/// Points where the solution or its `x` derivative may jump.
fn jump_positions(medium: &Medium) -> Vec<f64> {
    match medium {
        Medium::Nondim { profile, .. } => profile
            .interfaces()
            .into_iter()
            .zip(profile.jumps())
            .filter(|(_, &j)| j != 1.0)
            .map(|(x, _)| x)
            .collect(),
        Medium::Physical { field } => field.jumps().iter().map(|j| j.x).collect(),
    }
}

/// How one panel reads the generating tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PanelMap {
    reflect: bool,
    half_shift: bool,
    negate_star: bool,
}

fn panel_maps(flavor: Flavor) -> &'static [PanelMap] {
    const ID: PanelMap = PanelMap {
        reflect: false,
        half_shift: false,
        negate_star: false,
    };
    match flavor {
        Flavor::PeriodicTile => &[
            ID,
            PanelMap {
                reflect: true,
                half_shift: true,
                negate_star: true,
            },
            PanelMap {
                reflect: false,
                half_shift: true,
                negate_star: false,
            },
            PanelMap {
                reflect: true,
                half_shift: false,
                negate_star: true,
            },
        ],
        Flavor::Acoustic => &[
            ID,
            PanelMap {
                reflect: true,
                half_shift: false,
                negate_star: true,
            },
        ],
    }
}

impl PanelMap {
    fn source_index(self, local: usize, nx: usize) -> usize {
        if self.reflect {
            nx - local
        } else {
            local
        }
    }

    fn rows(self, tile: &TileGrid, local: usize) -> (Vec<f64>, Vec<f64>) {
        let i = self.source_index(local, tile.nx());
        let nt = tile.nt();
        let shift = if self.half_shift { nt / 2 } else { 0 };
        let sign = if self.negate_star { -1.0 } else { 1.0 };
        let w = (0..nt).map(|j| tile.w[i][(j + shift) % nt]).collect();
        let ws = (0..nt).map(|j| sign * tile.wstar[i][(j + shift) % nt]).collect();
        (w, ws)
    }
}

/// Mismatch between the two panels meeting at one seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seam {
    pub x: f64,
    pub w_gap: f64,
    pub wstar_gap: f64,
}

impl Seam {
    pub fn gap(&self) -> f64 {
        self.w_gap.max(self.wstar_gap)
    }
}

/// Where an assembled solution came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TileSource {
    pub k: usize,
    pub alpha: f64,
    pub z: f64,
    pub modes: usize,
    pub fingerprint: String,
}

/// The assembled solution on `[0, L] x [0, T)` with `L` equal to `4l`
/// (periodic tile) or `2l` (acoustic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiledSolution {
    pub flavor: Flavor,
    pub frame: Frame,
    pub length: f64,
    pub period: f64,
    /// Spatial period `L`.
    pub span: f64,
    /// Grid intervals per panel.
    pub nx: usize,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// Rows per `x`; a seam point holds the value of the panel on its left.
    pub w: Vec<Vec<f64>>,
    pub wstar: Vec<Vec<f64>>,
    /// Images of the coefficient jumps in every panel.
    pub jump_images: Vec<f64>,
    /// Seams at `l, 2l, ...` and the wrap-around seam at `L`.
    pub seams: Vec<Seam>,
    pub source: TileSource,
}

/// Samples a solved tile and assembles it.
pub fn assemble(
    solution: &PureToneSolution,
    medium: &Medium,
    flavor: Flavor,
    nx: usize,
    nt: usize,
    settings: &EvolveSettings,
    exec: Execution,
) -> Result<TiledSolution> {
    if flavor != solution.flavor {
        return Err(Error::Argument(format!(
            "solution was computed for {:?}, not {flavor:?}",
            solution.flavor
        )));
    }
    let tile = TileGrid::sample(solution, medium, nx, nt, settings)?;
    let mut tiled = assemble_grid(&tile, flavor, exec)?;
    tiled.source = TileSource {
        k: solution.k,
        alpha: solution.alpha,
        z: solution.z,
        modes: solution.modes,
        fingerprint: solution.fingerprint.clone(),
    };
    Ok(tiled)
}

/// Assembles a sampled tile by the panel table.
pub fn assemble_grid(tile: &TileGrid, flavor: Flavor, exec: Execution) -> Result<TiledSolution> {
    tile.validate()?;
    let maps = panel_maps(flavor);
    let (nx, nt, l) = (tile.nx(), tile.nt(), tile.length);
    let panels = maps.len();
    let span = panels as f64 * l;
    let points = panels * nx + 1;
    let rows = exec.map(points, |g| {
        let (p, local) = locate(g, nx);
        maps[p].rows(tile, local)
    });
    let (w, wstar): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let x = (0..points)
        .map(|g| {
            let (p, local) = locate(g, nx);
            p as f64 * l + tile.x[local]
        })
        .collect();
    let t = (0..nt).map(|j| tile.period * j as f64 / nt as f64).collect();
    let mut jump_images = Vec::new();
    for (p, map) in maps.iter().enumerate() {
        for &xj in &tile.jumps {
            let local = if map.reflect { l - xj } else { xj };
            jump_images.push(p as f64 * l + local);
        }
    }
    jump_images.sort_by(f64::total_cmp);
    let seams = seam_report(tile, maps);
    Ok(TiledSolution {
        flavor,
        frame: tile.frame,
        length: l,
        period: tile.period,
        span,
        nx,
        x,
        t,
        w,
        wstar,
        jump_images,
        seams,
        source: TileSource::default(),
    })
}

/// Panel and local index of global point `g`; seams belong to the left panel.
fn locate(g: usize, nx: usize) -> (usize, usize) {
    if g == 0 {
        (0, 0)
    } else {
        let p = (g - 1) / nx;
        (p, g - p * nx)
    }
}

fn seam_report(tile: &TileGrid, maps: &[PanelMap]) -> Vec<Seam> {
    let nx = tile.nx();
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()));
    (1..=maps.len())
        .map(|p| {
            let (lw, ls) = maps[p - 1].rows(tile, nx);
            let (rw, rs) = maps[p % maps.len()].rows(tile, 0);
            Seam {
                x: p as f64 * tile.length,
                w_gap: gap(&lw, &rw),
                wstar_gap: gap(&ls, &rs),
            }
        })
        .collect()
}

impl TiledSolution {
    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn panels(&self) -> usize {
        panel_maps(self.flavor).len()
    }

    /// The generating tile, rebuilt from the first panel.
    pub fn restrict(&self) -> TileGrid {
        let n = self.nx + 1;
        let jumps = self
            .jump_images
            .iter()
            .copied()
            .filter(|&x| x > 0.0 && x < self.length)
            .collect();
        TileGrid {
            frame: self.frame,
            length: self.length,
            period: self.period,
            x: self.x[..n].to_vec(),
            w: self.w[..n].to_vec(),
            wstar: self.wstar[..n].to_vec(),
            jumps,
        }
    }

    /// Largest seam mismatch, wrap-around included.
    pub fn max_seam_gap(&self) -> f64 {
        self.seams.iter().map(Seam::gap).fold(0.0, f64::max)
    }

    /// `max |w(l + x_i, t_j) - w(l - x_i, t_j + T/2)|` over the grid, the
    /// same for `w*` with a sign flip. Periodic-tile flavor only.
    pub fn half_shift_symmetry_gap(&self) -> Option<f64> {
        if self.flavor != Flavor::PeriodicTile {
            return None;
        }
        let (nx, nt) = (self.nx, self.nt());
        let mut gap: f64 = 0.0;
        for i in 0..=nx {
            let (right, left) = (nx + i, nx - i);
            for j in 0..nt {
                let js = (j + nt / 2) % nt;
                gap = gap.max((self.w[right][j] - self.w[left][js]).abs());
                gap = gap.max((self.wstar[right][j] + self.wstar[left][js]).abs());
            }
        }
        Some(gap)
    }

    /// Coordinate in the generating tile that supplies point `x`.
    pub fn source_coordinate(&self, x: f64) -> f64 {
        let maps = panel_maps(self.flavor);
        let xr = x.rem_euclid(self.span);
        let p = ((xr / self.length) as usize).min(maps.len() - 1);
        let local = xr - p as f64 * self.length;
        if maps[p].reflect {
            self.length - local
        } else {
            local
        }
    }

    fn near_jump(&self, a: f64, b: f64) -> bool {
        let tol = 1e-12 * self.span;
        self.jump_images.iter().any(|&xj| xj >= a - tol && xj <= b + tol)
    }

    /// Rows `(x, t, w, w*)` in file order.
    pub fn records(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.x.iter().enumerate().flat_map(move |(i, &x)| {
            self.t
                .iter()
                .enumerate()
                .map(move |(j, &t)| [x, t, self.w[i][j], self.wstar[i][j]])
        })
    }

    /// CSV with columns `x,t,w,wstar`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x", "t", "w", "wstar"])?;
        for r in self.records() {
            out.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    /// Writes `tiled.csv` or `tiled.json` into `dir` and returns the path.
    pub fn export(&self, dir: &Path, format: ExportFormat) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(match format {
            ExportFormat::Csv => "tiled.csv",
            ExportFormat::Json => "tiled.json",
        });
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        match format {
            ExportFormat::Csv => self.write_csv(file)?,
            ExportFormat::Json => self.write_json(file)?,
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Reads back the rows written by [`TiledSolution::write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<[f64; 4]>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut row = [0.0; 4];
        for (slot, field) in row.iter_mut().zip(rec.iter()) {
            *slot = field
                .trim()
                .parse()
                .map_err(|e| Error::Argument(format!("bad number {field:?}: {e}")))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Finite-difference residuals and seam checks of an assembled solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub hx: f64,
    pub ht: f64,
    /// Maximum residual of the first and second equations.
    pub max_residual: [f64; 2],
    /// Root mean square over the points used.
    pub rms_residual: [f64; 2],
    pub points_used: usize,
    pub points_excluded: usize,
    /// Seams recomputed from the first panel of the stored grid.
    pub seams: Vec<Seam>,
    pub max_seam_gap: f64,
    /// Largest difference between any stored panel and its panel-table
    /// image of the first panel.
    pub panel_consistency: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_residual[0].max(self.max_residual[1])
    }
}

/// Centered differences of the conservation system on panel interiors.
///
/// Scaled frame: `w_x + sigma(w) w*_t` and `w*_x + sigma(w) w_t` with
/// `sigma(w) = (1 + w)^(-nu)`. Physical frame: `v_p(p, s) p_t - u_x` and
/// `u_t + p_x`. Points whose stencil touches a jump image or a seam are
/// skipped.
pub fn verify(tiled: &TiledSolution, medium: &Medium) -> Result<ResidualReport> {
    if medium.frame() != tiled.frame {
        return Err(Error::Argument("medium and tiled solution use different frames".into()));
    }
    let (nx, nt) = (tiled.nx, tiled.nt());
    let hx = tiled.length / nx as f64;
    let ht = tiled.period / nt as f64;
    let mut max = [0.0_f64; 2];
    let mut sumsq = [0.0_f64; 2];
    let (mut used, mut excluded) = (0, 0);
    for g in 1..tiled.x.len() - 1 {
        if g % nx == 0 || tiled.near_jump(tiled.x[g - 1], tiled.x[g + 1]) {
            excluded += 1;
            continue;
        }
        used += 1;
        let (w, ws) = (&tiled.w[g], &tiled.wstar[g]);
        let entropy = match medium {
            Medium::Physical { field } => field.entropy_at(tiled.source_coordinate(tiled.x[g])),
            Medium::Nondim { .. } => 0.0,
        };
        for j in 0..nt {
            let (jp, jm) = ((j + 1) % nt, (j + nt - 1) % nt);
            let w_x = (tiled.w[g + 1][j] - tiled.w[g - 1][j]) / (2.0 * hx);
            let ws_x = (tiled.wstar[g + 1][j] - tiled.wstar[g - 1][j]) / (2.0 * hx);
            let w_t = (w[jp] - w[jm]) / (2.0 * ht);
            let ws_t = (ws[jp] - ws[jm]) / (2.0 * ht);
            let r = match medium {
                Medium::Nondim { nu, .. } => {
                    let sigma = (1.0 + w[j]).powf(-nu);
                    [w_x + sigma * ws_t, ws_x + sigma * w_t]
                }
                Medium::Physical { field } => {
                    let v_p = field.gas().v_p(w[j], entropy);
                    [v_p * w_t - ws_x, ws_t + w_x]
                }
            };
            for e in 0..2 {
                max[e] = max[e].max(r[e].abs());
                sumsq[e] += r[e] * r[e];
            }
        }
    }
    let count = (used * nt).max(1) as f64;
    let tile = tiled.restrict();
    let maps = panel_maps(tiled.flavor);
    let seams = seam_report(&tile, maps);
    let mut consistency: f64 = 0.0;
    for g in 0..tiled.x.len() {
        let (p, local) = locate(g, nx);
        let (w, ws) = maps[p].rows(&tile, local);
        for j in 0..nt {
            consistency = consistency
                .max((w[j] - tiled.w[g][j]).abs())
                .max((ws[j] - tiled.wstar[g][j]).abs());
        }
    }
    Ok(ResidualReport {
        hx,
        ht,
        max_residual: max,
        rms_residual: [(sumsq[0] / count).sqrt(), (sumsq[1] / count).sqrt()],
        points_used: used,
        points_excluded: excluded,
        max_seam_gap: seams.iter().map(Seam::gap).fold(0.0, f64::max),
        seams,
        panel_consistency: consistency,
    })
}

/// Marches the solved data through the reflected medium over one full
/// spatial period and returns the largest coefficient change.
pub fn spatial_period_gap(solution: &PureToneSolution, medium: &Medium, settings: &EvolveSettings) -> Result<f64> {
    let panels = panel_maps(solution.flavor).len();
    let extended = medium.reflected_extension(panels)?;
    let settings = EvolveSettings {
        modes: solution.modes,
        ..*settings
    };
    let start = EvolutionState::new(solution.y0.clone(), 0.0, solution.frame);
    let end = evolve(&start, &extended, extended.length(), Method::SpectralMarch, &settings)?;
    let diff = end.y.add(&solution.y0.scale(-1.0))?;
    Ok(diff.max_coeff())
}

/// Time phases `t mod T` at which a forward characteristic
/// `dt/dx = c(x, t)` crosses `x = m L`, for `m = 0..=spans`. The speed is
/// read off the grid by bilinear interpolation; `c = sigma(w)` in the scaled
/// frame and `sqrt(-v_p(p, s))` in the physical frame.
pub fn characteristic_phases(tiled: &TiledSolution, medium: &Medium, t0: f64, spans: usize) -> Vec<f64> {
    let (nx, nt) = (tiled.nx, tiled.nt());
    let hx = tiled.length / nx as f64;
    let points = tiled.x.len() - 1;
    let slowness = |x: f64, t: f64| -> f64 {
        let xr = x.rem_euclid(tiled.span);
        let gx = ((xr / hx).floor() as usize).min(points - 1);
        let fx = xr / hx - gx as f64;
        let tr = t.rem_euclid(tiled.period) / tiled.period * nt as f64;
        let jt = (tr.floor() as usize) % nt;
        let ft = tr - tr.floor();
        let at = |g: usize| tiled.w[g][jt] * (1.0 - ft) + tiled.w[g][(jt + 1) % nt] * ft;
        let w = at(gx) * (1.0 - fx) + at(gx + 1) * fx;
        match medium {
            Medium::Nondim { nu, .. } => (1.0 + w).powf(-nu),
            Medium::Physical { field } => {
                let s = field.entropy_at(tiled.source_coordinate(xr));
                (-field.gas().v_p(w, s)).sqrt()
            }
        }
    };
    let mut phases = vec![t0.rem_euclid(tiled.period)];
    let (mut x, mut t) = (0.0, t0);
    for _ in 0..spans {
        for _ in 0..points {
            let k1 = slowness(x, t);
            let k2 = slowness(x + 0.5 * hx, t + 0.5 * hx * k1);
            t += hx * k2;
            x += hx;
        }
        phases.push(t.rem_euclid(tiled.period));
    }
    phases
}
