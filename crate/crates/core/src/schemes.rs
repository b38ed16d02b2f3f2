//! Explicit three-point schemes on non-uniform meshes.

use std::fmt;
use std::str::FromStr;

use crate::error::{MasError, Result};
use crate::grid::{CellGeometry, Flux, GridSolution, Problem};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    RichtmyerLW,
    MacCormack,
    Ftcs,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::RichtmyerLW, SchemeKind::MacCormack, SchemeKind::Ftcs];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::RichtmyerLW => "richtmyer",
            SchemeKind::MacCormack => "maccormack",
            SchemeKind::Ftcs => "ftcs",
        }
    }

    pub fn evolution_constant<T: Real>(self, cfl: T) -> EvolutionConstant<T> {
        let c = match self {
            SchemeKind::RichtmyerLW => cfl * (T::lit(3.0) + cfl),
            SchemeKind::MacCormack => cfl * (T::one() + cfl),
            SchemeKind::Ftcs => cfl,
        };
        EvolutionConstant { scheme: self, c }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = MasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "richtmyer" | "richtmyerlw" | "lw" | "lax-wendroff" => Ok(SchemeKind::RichtmyerLW),
            "maccormack" | "mac" => Ok(SchemeKind::MacCormack),
            "ftcs" => Ok(SchemeKind::Ftcs),
            other => Err(MasError::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Constant `C` bounding the per-step change relative to neighbour differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConstant<T> {
    pub scheme: SchemeKind,
    pub c: T,
}

/// Time step and cell geometry of the mesh the step runs on.
#[derive(Clone, Debug, PartialEq)]
pub struct StepContext<T> {
    pub dt: T,
    pub cfl_target: T,
    pub cells: CellGeometry<T>,
}

impl<T: Real> StepContext<T> {
    pub fn new(u: &GridSolution<T>, dt: T, cfl_target: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(MasError::Domain(format!("time step must be > 0, got {dt}")));
        }
        if !(cfl_target > T::zero() && cfl_target <= T::one()) {
            return Err(MasError::Config(format!("CFL target must lie in (0, 1], got {cfl_target}")));
        }
        Ok(Self {
            dt,
            cfl_target,
            cells: CellGeometry::for_mesh(u.mesh()),
        })
    }

    /// `dt max|f'(u)| / min h`.
    pub fn cfl(&self, u: &GridSolution<T>, flux: &dyn Flux<T>) -> T {
        self.dt * max_speed(u, flux) / self.cells.min_width()
    }

    fn check(&self, u: &GridSolution<T>, flux: &dyn Flux<T>) -> Result<()> {
        if self.cells.widths().len() != u.len() {
            return Err(MasError::InvalidMesh("cell geometry does not match the solution".into()));
        }
        let cfl = self.cfl(u, flux);
        let slack = T::one() + T::lit(64.0) * T::epsilon();
        if cfl > self.cfl_target * slack {
            return Err(MasError::CflViolated {
                cfl: cfl.as_f64(),
                target: self.cfl_target.as_f64(),
            });
        }
        Ok(())
    }
}

fn max_speed<T: Real>(u: &GridSolution<T>, flux: &dyn Flux<T>) -> T {
    u.values()
        .iter()
        .map(|&v| flux.speed(v).abs())
        .fold(T::zero(), T::max)
}

fn fluxes<T: Real>(values: &[T], flux: &dyn Flux<T>) -> Vec<T> {
    values.iter().map(|&v| flux.flux(v)).collect()
}

/// Richtmyer two-step Lax-Wendroff with cell widths `h_i`.
pub fn step_richtmyer<T: Real>(u: &GridSolution<T>, ctx: &StepContext<T>, prob: &Problem<T>) -> Result<GridSolution<T>> {
    let flux = prob.flux.as_ref();
    ctx.check(u, flux)?;
    let v = u.values();
    let h = ctx.cells.widths();
    let dt = ctx.dt;
    let n = v.len();
    let f = fluxes(v, flux);
    let half_flux: Vec<T> = (0..n - 1)
        .map(|i| {
            let s = h[i] + h[i + 1];
            let star = (h[i + 1] * v[i] + h[i] * v[i + 1]) / s - dt * (f[i + 1] - f[i]) / s;
            flux.flux(star)
        })
        .collect();
    let mut out = v.to_vec();
    for i in 1..n - 1 {
        out[i] = v[i] - dt / h[i] * (half_flux[i] - half_flux[i - 1]);
    }
    GridSolution::new(u.mesh().clone(), out)
}

/// MacCormack predictor-corrector with cell widths `h_i`.
pub fn step_maccormack<T: Real>(u: &GridSolution<T>, ctx: &StepContext<T>, prob: &Problem<T>) -> Result<GridSolution<T>> {
    let flux = prob.flux.as_ref();
    ctx.check(u, flux)?;
    let v = u.values();
    let h = ctx.cells.widths();
    let dt = ctx.dt;
    let two = T::lit(2.0);
    let n = v.len();
    let f = fluxes(v, flux);
    let star: Vec<T> = (0..n - 1)
        .map(|i| v[i] - two * dt * (f[i + 1] - f[i]) / (h[i] + h[i + 1]))
        .collect();
    let f_star = fluxes(&star, flux);
    let mut out = v.to_vec();
    for i in 1..n - 1 {
        let star2 = star[i] - two * dt * (f_star[i] - f_star[i - 1]) / (h[i - 1] + h[i]);
        out[i] = (v[i] + star2) / two;
    }
    GridSolution::new(u.mesh().clone(), out)
}

/// Forward in time, centred in space.
pub fn step_ftcs<T: Real>(u: &GridSolution<T>, ctx: &StepContext<T>, prob: &Problem<T>) -> Result<GridSolution<T>> {
    let flux = prob.flux.as_ref();
    ctx.check(u, flux)?;
    let x = u.nodes();
    let v = u.values();
    let f = fluxes(v, flux);
    let mut out = v.to_vec();
    for i in 1..v.len() - 1 {
        out[i] = v[i] - ctx.dt * (f[i + 1] - f[i - 1]) / (x[i + 1] - x[i - 1]);
    }
    GridSolution::new(u.mesh().clone(), out)
}

/// FTCS written with the interface flux `(f_i + f_{i+1}) / 2`.
pub fn step_ftcs_conservative<T: Real>(
    u: &GridSolution<T>,
    ctx: &StepContext<T>,
    prob: &Problem<T>,
) -> Result<GridSolution<T>> {
    let flux = prob.flux.as_ref();
    ctx.check(u, flux)?;
    let x = u.nodes();
    let v = u.values();
    let f = fluxes(v, flux);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let interface: Vec<T> = f.windows(2).map(|w| (w[0] + w[1]) * half).collect();
    let mut out = v.to_vec();
    for i in 1..v.len() - 1 {
        out[i] = v[i] - two * ctx.dt / (x[i + 1] - x[i - 1]) * (interface[i] - interface[i - 1]);
    }
    GridSolution::new(u.mesh().clone(), out)
}

pub fn step<T: Real>(
    kind: SchemeKind,
    u: &GridSolution<T>,
    ctx: &StepContext<T>,
    prob: &Problem<T>,
) -> Result<GridSolution<T>> {
    match kind {
        SchemeKind::RichtmyerLW => step_richtmyer(u, ctx, prob),
        SchemeKind::MacCormack => step_maccormack(u, ctx, prob),
        SchemeKind::Ftcs => step_ftcs(u, ctx, prob),
    }
}

/// Wave speeds below this are treated as this value when sizing the step.
pub const MIN_WAVE_SPEED: f64 = 1e-12;

/// `cfl * min h / max(max|f'(u)|, 1e-12)`.
pub fn choose_dt<T: Real>(u: &GridSolution<T>, prob: &Problem<T>, cfl_target: T) -> T {
    let cells = CellGeometry::for_mesh(u.mesh());
    let speed = max_speed(u, prob.flux.as_ref()).max(T::lit(MIN_WAVE_SPEED));
    cfl_target * cells.min_width() / speed
}

/// Neighbour differences below this multiple of `max(1, max|u|)` are
/// skipped by the ratio: rounding in the update is then comparable to the
/// difference itself.
pub const FLAT_THRESHOLD: f64 = 1e-8;

/// `max_i |u_next_i - u_i| / max(|u_{i+1} - u_i|, |u_i - u_{i-1}|)` over interior nodes.
pub fn measure_evolution_ratio<T: Real>(u: &GridSolution<T>, u_next: &GridSolution<T>) -> Result<T> {
    if u.nodes() != u_next.nodes() {
        return Err(MasError::InvalidSolution(
            "evolution ratio needs both solutions on one mesh".into(),
        ));
    }
    let v = u.values();
    let w = u_next.values();
    let scale = v.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let flat = T::lit(FLAT_THRESHOLD) * scale;
    let mut ratio = T::zero();
    for i in 1..v.len() - 1 {
        let den = (v[i + 1] - v[i]).abs().max((v[i] - v[i - 1]).abs());
        if den < flat {
            continue;
        }
        ratio = ratio.max((w[i] - v[i]).abs() / den);
    }
    Ok(ratio)
}
