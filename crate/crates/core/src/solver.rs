//! Critical points of the weighted channel energy and the glued
//! traveling-wave solve.
//!
//! Minimization alternates safeguarded Barzilai-Borwein descent in the
//! weighted metric with nodewise clamping to [-1, 1], then hands over to a
//! damped banded Newton on the strong-form residual. A converged
//! half-cylinder profile is turned into a two-sided wave by locating the
//! matching window, shifting, gluing to zero, and re-solving with
//! asymptotic Dirichlet rows.

use crate::channel::{
    self, evaluate_ic, gradient_ic, truncate_unit, weighted_inner, WaveParameters,
};
use crate::cross_section::{dirichlet_part, evaluate_j, CrossSectionState};
use crate::error::{Error, Result};
use crate::field::{sign_change_count, Field};
use crate::grid::{ChannelGrid, CrossSectionGrid};
use crate::linalg::Banded;

/// Residual threshold where descent hands over to Newton.
const DESCENT_SWITCH: f64 = 1e-3;
const MAX_DESCENT: usize = 10_000;
const MAX_NEWTON: usize = 60;
/// Sup norm below which an iterate counts as the zero field.
const TRIVIAL_SUP: f64 = 1e-9;
/// Sup distance below which two critical points count as the same.
const DEDUP_SUP: f64 = 1e-3;
/// Newton tolerance for waves and sequence members.
const WAVE_TOL: f64 = 1e-10;
/// Seeds tried per family level before giving up on that k.
const SEQUENCE_SEED_TRIES: usize = 6;
/// Descent budget per sequence candidate; hitting it is not an error.
const SEQUENCE_DESCENT_CAP: usize = 2_000;
/// Offsets around the tail half-period tried when seeding a sequence
/// member from the previous one.
const SHIFT_SCAN: [f64; 6] = [0.0, -0.5, 0.5, -1.0, 1.0, -1.5];
/// Interface-ansatz seeds tried when the eigen-family route fails.
const INTERFACE_TRIES: usize = 6;
/// Descent budget per interface-ansatz attempt; the ansatz starts near
/// the valley floor, so a short settle suffices before Newton.
const INTERFACE_DESCENT_CAP: usize = 1_000;

/// Converged critical point of the weighted energy.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub field: Field,
    pub level: f64,
    pub residual: f64,
    /// Energy of the seed the run started from.
    pub seed_level: f64,
    /// The iteration collapsed to the zero field.
    pub trivial: bool,
    pub descent_iterations: usize,
    pub newton_iterations: usize,
    /// Sign alternations of the y-averaged axial profile.
    pub axial_sign_changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Descent,
    Newton,
}

/// One accepted iterate, streamed to the observer during minimization.
pub struct IterateRecord<'a> {
    pub stage: Stage,
    pub iteration: usize,
    pub field: &'a Field,
    pub level: f64,
    pub residual: f64,
}

/// Matching-window data for the shift-and-glue construction.
#[derive(Debug, Clone, Copy)]
pub struct GlueParameters {
    /// Cross-section gradient norm of the target state.
    pub mu: f64,
    /// Axial shift applied to the profile; the glued field is zero right
    /// of the junction at -shift.
    pub shift: f64,
    /// Window value matched at the shift, mu / 8.
    pub match_fraction: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct WaveDiagnostics {
    /// Cross-section energy of the left asymptotic state.
    pub j_left: f64,
    /// Cross-section energy of the right asymptotic state.
    pub j_right: f64,
    /// c^2 times the unweighted axial kinetic mass of the wave.
    pub kinetic_mass: f64,
    /// Relative mismatch of (j_right - j_left) against the kinetic mass.
    pub gap_mismatch: f64,
    /// Sup deviation from the left state one unit inside the left end.
    pub left_deviation: f64,
    /// Sup deviation from the right state one unit inside the right end.
    pub right_deviation: f64,
    /// Sup of the one-sided axial derivative along the left end.
    pub left_slope_sup: f64,
}

/// Converged traveling-wave profile in the moving frame, with the grid and
/// boundary data it was solved against.
#[derive(Debug, Clone)]
pub struct WaveSolution {
    pub field: Field,
    pub grid: ChannelGrid,
    pub params: WaveParameters,
    pub left_state: Field,
    pub right_state: Field,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub newton_iterations: usize,
    pub diagnostics: WaveDiagnostics,
}

/// Result of the deflated search for a sequence of critical points.
#[derive(Debug)]
pub struct SequenceReport {
    /// Points sorted by level, most negative first.
    pub points: Vec<CriticalPoint>,
    pub complete: bool,
    pub warnings: Vec<String>,
}

/// Lab-frame sample of a wave at a fixed time.
#[derive(Debug, Clone)]
pub struct LabFrame {
    pub grid: ChannelGrid,
    pub field: Field,
    /// Some stations sampled outside the wave's domain and were clamped
    /// to the asymptotic rows.
    pub clamped: bool,
}

pub fn minimize_ic(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    tol: f64,
) -> Result<CriticalPoint> {
    minimize_ic_observed(seed, params, grid, tol, &mut |_| {})
}

/// Minimize the weighted energy from `seed`, streaming every accepted
/// iterate to `observer`. Descent is monotone in the energy and keeps
/// iterates clamped to [-1, 1]; Newton finishes to `tol` in sup norm.
///
/// At slow speeds the small-amplitude seed can strand descent on a stiff
/// shelf Newton cannot leave; when the run fails or lands on a trivial or
/// nonnegative-level point, interface-ansatz seeds are tried before the
/// original failure is reported.
pub fn minimize_ic_observed(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    tol: f64,
    observer: &mut dyn FnMut(&IterateRecord),
) -> Result<CriticalPoint> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::config("tolerance must be positive and finite"));
    }
    check_boundary_zero(grid, seed)?;
    let seed_level = evaluate_ic(seed, params, grid)?;
    if seed.sup_norm() <= TRIVIAL_SUP {
        return Ok(trivial_point(grid, seed_level));
    }
    let primary = minimize_attempt(seed, params, grid, tol, MAX_DESCENT, observer);
    if let Ok(point) = &primary {
        if !point.trivial && point.level < 0.0 {
            return primary;
        }
    }
    if let Ok(candidates) = interface_seeds(params, grid) {
        for candidate in candidates.iter().take(INTERFACE_TRIES) {
            let attempt = minimize_attempt(
                candidate,
                params,
                grid,
                tol,
                INTERFACE_DESCENT_CAP,
                observer,
            );
            if let Ok(point) = attempt {
                if !point.trivial && point.level < 0.0 {
                    return Ok(point);
                }
            }
        }
    }
    primary
}

fn minimize_attempt(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    tol: f64,
    max_descent: usize,
    observer: &mut dyn FnMut(&IterateRecord),
) -> Result<CriticalPoint> {
    let seed_level = evaluate_ic(seed, params, grid)?;
    let (u, _level, descent_iterations) =
        descend(seed, params, grid, DESCENT_SWITCH, max_descent, observer)?;
    let mut newton_seen = 0;
    let (field, newton_iterations, history) = newton_channel(
        u,
        params,
        grid,
        tol,
        50,
        &[],
        &mut |f, res| {
            newton_seen += 1;
            let level = evaluate_ic(f, params, grid).unwrap_or(f64::NAN);
            observer(&IterateRecord {
                stage: Stage::Newton,
                iteration: newton_seen,
                field: f,
                level,
                residual: res,
            });
        },
    )?;
    let level = evaluate_ic(&field, params, grid)?;
    let residual = *history.last().expect("newton history is never empty");
    let trivial = field.sup_norm() <= TRIVIAL_SUP;
    debug_assert!(level <= seed_level + 1e-12);
    let axial_sign_changes = axial_changes(grid, &field);
    Ok(CriticalPoint {
        field,
        level,
        residual,
        seed_level,
        trivial,
        descent_iterations,
        newton_iterations,
        axial_sign_changes,
    })
}

/// Macroscopic front seeds: the cross-section ground state carried along
/// the axis through a smooth interface at a candidate junction, tapered to
/// the Dirichlet rows at both ends. Candidates are ordered by energy;
/// only negative-level ones are kept.
fn interface_seeds(params: &WaveParameters, grid: &ChannelGrid) -> Result<Vec<Field>> {
    let ground = crate::cross_section::ground_state(&grid.cross, 1e-10)?;
    let gv = ground.values.values().to_vec();
    // The interface width tracks the axial scale of the operator c^2
    // (d_xx + d_x): narrower fronts at slower speeds.
    let width = params.speed.clamp(0.3, 1.5);
    let span = grid.x_max - grid.x_min;
    let deepest = grid.x_max - (0.75 * span).min(16.0);
    let mut scored: Vec<(f64, Field)> = Vec::new();
    let mut x0 = grid.x_max - 0.5;
    while x0 >= deepest {
        let u = channel::from_stations(grid, |ix, row| {
            let x = grid.x(ix);
            let ramp_up = ((x - grid.x_min) / 2.0).clamp(0.0, 1.0);
            let taper = (grid.x_max - x).clamp(0.0, 1.0);
            let front = 1.0 / (1.0 + ((x - x0) / width).exp());
            for (ic, v) in row.iter_mut().enumerate() {
                *v = gv[ic] * ramp_up * front * taper;
            }
        });
        let level = evaluate_ic(&u, params, grid)?;
        if level < 0.0 {
            scored.push((level, u));
        }
        x0 -= 0.5;
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(scored.into_iter().map(|(_, u)| u).collect())
}

/// Deflated search for the first `k_max` critical points, seeded from the
/// odd trial families. Points are deduplicated up to sign and sorted by
/// level; a family that yields nothing new leaves a warning instead of
/// failing the whole sequence.
pub fn critical_sequence(
    params: &WaveParameters,
    grid: &ChannelGrid,
    k_max: usize,
) -> Result<SequenceReport> {
    let window = (0.25 * (grid.x_max - grid.x_min)).min(10.0);
    critical_sequence_with(params, grid, k_max, window, 16)
}

pub fn critical_sequence_with(
    params: &WaveParameters,
    grid: &ChannelGrid,
    k_max: usize,
    window: f64,
    samples: usize,
) -> Result<SequenceReport> {
    if k_max == 0 {
        return Err(Error::config("the sequence needs k_max >= 1"));
    }
    if !params.admissible {
        return Err(Error::regime(format!(
            "speed {} is not below the threshold {}",
            params.speed, params.threshold
        )));
    }
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut warnings = Vec::new();
    for k in 1..=k_max {
        let mut accepted = false;
        // Past k = 1, seed from the previous point translated left by the
        // tail half-period: its oscillatory tail re-zeros at the right end
        // and Newton lands on the next level without any descent.
        if let Some(prev) = points.last() {
            let prev_field = prev.field.clone();
            for ds in SHIFT_SCAN {
                let s = tail_half_period(params) + ds;
                if s <= 0.0 {
                    continue;
                }
                let seed = shifted_seed(&prev_field, grid, s);
                match shifted_candidate(&seed, params, grid, &points) {
                    Ok(Some(point)) => {
                        points.push(point);
                        accepted = true;
                        break;
                    }
                    Ok(None) => continue,
                    Err(_) => continue,
                }
            }
        }
        if !accepted {
            let family = match channel::select_seed_eps(k, window, samples, params, grid) {
                Ok(f) => f,
                Err(e) => {
                    warnings.push(format!("seed family k={k}: {e}"));
                    continue;
                }
            };
            let mut order: Vec<usize> = (0..family.levels.len()).collect();
            order.sort_by(|&a, &b| family.levels[a].total_cmp(&family.levels[b]));
            for &i in order.iter().take(SEQUENCE_SEED_TRIES) {
                match sequence_candidate(&family.seed(i), params, grid, &points) {
                    Ok(Some(point)) => {
                        points.push(point);
                        accepted = true;
                        break;
                    }
                    Ok(None) => continue,
                    Err(_) => continue,
                }
            }
        }
        // With nothing found yet there is no profile to shift from; fall
        // back to interface-ansatz seeds for the first point.
        if !accepted && points.is_empty() {
            if let Ok(candidates) = interface_seeds(params, grid) {
                for candidate in candidates.iter().take(INTERFACE_TRIES) {
                    if let Ok(Some(point)) = sequence_candidate(candidate, params, grid, &points)
                    {
                        points.push(point);
                        accepted = true;
                        warnings
                            .push("first point recovered from an interface seed".to_string());
                        break;
                    }
                }
            }
        }
        if !accepted {
            warnings.push(format!(
                "no new critical point found from the k={k} seed family"
            ));
        }
    }
    points.sort_by(|a, b| a.level.total_cmp(&b.level));
    let complete = points.len() >= k_max;
    Ok(SequenceReport {
        points,
        complete,
        warnings,
    })
}

/// One deflated attempt: capped descent, then Newton deflated against the
/// zero field and every found point up to sign. Returns None for
/// duplicates and trivial limits.
fn sequence_candidate(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    found: &[CriticalPoint],
) -> Result<Option<CriticalPoint>> {
    let (u, _lvl, descent_iterations) = descend(
        seed,
        params,
        grid,
        DESCENT_SWITCH,
        SEQUENCE_DESCENT_CAP,
        &mut |_| {},
    )?;
    polish_candidate(seed, u, descent_iterations, params, grid, found)
}

/// Deflated Newton straight from a structured seed, no descent. Descent
/// would slide the seed back into an already-found basin.
fn shifted_candidate(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    found: &[CriticalPoint],
) -> Result<Option<CriticalPoint>> {
    polish_candidate(seed, seed.clone(), 0, params, grid, found)
}

fn polish_candidate(
    seed: &Field,
    start: Field,
    descent_iterations: usize,
    params: &WaveParameters,
    grid: &ChannelGrid,
    found: &[CriticalPoint],
) -> Result<Option<CriticalPoint>> {
    let seed_level = evaluate_ic(seed, params, grid)?;
    let mut deflate = vec![Field::zeros(grid.total_nodes())];
    for p in found {
        deflate.push(p.field.clone());
        deflate.push(p.field.negated());
    }
    let (field, newton_iterations, history) =
        newton_channel(start, params, grid, WAVE_TOL, 80, &deflate, &mut |_, _| {})?;
    if field.sup_norm() <= TRIVIAL_SUP {
        return Ok(None);
    }
    for p in found {
        if field.sup_distance(&p.field) < DEDUP_SUP
            || field.sup_distance(&p.field.negated()) < DEDUP_SUP
        {
            return Ok(None);
        }
    }
    let level = evaluate_ic(&field, params, grid)?;
    if !(level < 0.0) {
        return Ok(None);
    }
    let residual = *history.last().expect("newton history is never empty");
    let axial_sign_changes = axial_changes(grid, &field);
    Ok(Some(CriticalPoint {
        field,
        level,
        residual,
        seed_level,
        trivial: false,
        descent_iterations,
        newton_iterations,
        axial_sign_changes,
    }))
}

/// Axial half-period of the oscillatory tail near the zero state. The
/// linearization there has rates -1/2 +- i w with w = sqrt(th^2 - c^2) /
/// (2c), th the speed threshold, so profiles re-cross zero every pi / w.
fn tail_half_period(params: &WaveParameters) -> f64 {
    let c = params.speed;
    let disc = (params.threshold * params.threshold - c * c).max(1e-12);
    2.0 * std::f64::consts::PI * c / disc.sqrt()
}

/// The field translated left by `s` (plateau carried in from the left,
/// zero fill past the right end), with the left Dirichlet row re-zeroed
/// over a two-unit ramp.
fn shifted_seed(u: &Field, grid: &ChannelGrid, s: f64) -> Field {
    let nx = grid.axial_nodes;
    let nc = grid.cross.total_nodes();
    let dx = grid.dx();
    let uv = u.values();
    channel::from_stations(grid, |ix, row| {
        if ix == 0 || ix == nx - 1 {
            return;
        }
        let t = (grid.x(ix) + s - grid.x_min) / dx;
        if t >= (nx - 1) as f64 {
            return;
        }
        let i0 = (t.floor() as usize).min(nx - 2);
        let frac = t - i0 as f64;
        let ramp = ((grid.x(ix) - grid.x_min) / 2.0).clamp(0.0, 1.0);
        for (ic, v) in row.iter_mut().enumerate() {
            let a = uv[i0 * nc + ic];
            let b = uv[(i0 + 1) * nc + ic];
            *v = ramp * ((1.0 - frac) * a + frac * b);
        }
    })
}

/// Largest axial offset whose trailing unit window has cross-section H1
/// distance mu/8 from the target state. Scans station by station from the
/// right, then bisects the bracketing pair to 1e-10.
pub fn shift_offset(
    point: &CriticalPoint,
    target: &CrossSectionState,
    mu: f64,
    grid: &ChannelGrid,
) -> Result<GlueParameters> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::config("mu must be positive and finite"));
    }
    if target.values.len() != grid.cross.total_nodes()
        || point.field.len() != grid.total_nodes()
    {
        return Err(Error::mismatch(
            "target state or point does not match the grid",
        ));
    }
    let match_fraction = mu / 8.0;
    let nx = grid.axial_nodes;
    let nc = grid.cross.total_nodes();
    let dx = grid.dx();
    let tv = target.values.values();
    let uv = point.field.values();
    // Station profile of the window integrand: H1 cross distance squared.
    let mut den = vec![0.0; nx];
    let mut row = vec![0.0; nc];
    for (ix, d) in den.iter_mut().enumerate() {
        let mut l2 = 0.0;
        for ic in 0..nc {
            row[ic] = uv[ix * nc + ic] - tv[ic];
            l2 += grid.cross.quad_weight(ic) * row[ic] * row[ic];
        }
        *d = 2.0 * dirichlet_part(&grid.cross, &row) + l2;
    }
    let hi = grid.x_max;
    let lo = grid.x_min + 1.0;
    if hi <= lo {
        return Err(Error::domain(
            "channel too short for a unit matching window",
        ));
    }
    let window = |xbar: f64| window_integral(grid, &den, xbar);
    let steps = ((hi - lo) / dx).floor() as usize;
    let mut bracket = None;
    let mut prev_x = hi;
    let mut prev_w = window(hi);
    for s in 1..=steps {
        let x = hi - s as f64 * dx;
        let w = window(x);
        if (prev_w - match_fraction) * (w - match_fraction) <= 0.0 {
            bracket = Some((x, prev_x));
            break;
        }
        prev_x = x;
        prev_w = w;
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::solver(
            "matching window never reaches mu/8: profile uniformly near or far from the target",
        )
    })?;
    let mut fa = window(a) - match_fraction;
    for _ in 0..80 {
        if b - a <= 1e-10 {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = window(mid) - match_fraction;
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(GlueParameters {
        mu,
        shift: 0.5 * (a + b),
        match_fraction,
    })
}

/// Integral of the piecewise-linear station profile over [xbar - 1, xbar].
fn window_integral(grid: &ChannelGrid, den: &[f64], xbar: f64) -> f64 {
    let a = xbar - 1.0;
    let b = xbar;
    let dx = grid.dx();
    let pos = |x: f64| (x - grid.x_min) / dx;
    let value = |x: f64| -> f64 {
        let t = pos(x).clamp(0.0, (den.len() - 1) as f64);
        let j = (t.floor() as usize).min(den.len() - 2);
        den[j] + (den[j + 1] - den[j]) * (t - j as f64)
    };
    let ia = (pos(a).ceil().max(0.0)) as usize;
    let ib = (pos(b).floor() as usize).min(den.len() - 1);
    let fa = value(a);
    let fb = value(b);
    if ia > ib {
        return 0.5 * (fa + fb) * (b - a);
    }
    let mut total = 0.5 * (fa + den[ia]) * (grid.x(ia) - a);
    for i in ia..ib {
        total += 0.5 * (den[i] + den[i + 1]) * dx;
    }
    total + 0.5 * (den[ib] + fb) * (b - grid.x(ib))
}

/// Shift the profile by `glue.shift` and extend by zero right of the
/// junction, resampling onto `full_grid`. The source tail near its
/// truncated far end is excluded from interpolation so the artificial
/// zero row there never leaks into the glued field.
pub fn glue_extend(
    point: &CriticalPoint,
    half_grid: &ChannelGrid,
    glue: &GlueParameters,
    full_grid: &ChannelGrid,
) -> Result<Field> {
    if point.field.len() != half_grid.total_nodes() {
        return Err(Error::mismatch("point does not match its grid"));
    }
    if full_grid.cross.total_nodes() != half_grid.cross.total_nodes() {
        return Err(Error::mismatch(
            "full grid and source grid have different cross sections",
        ));
    }
    let junction = -glue.shift;
    if !(junction > full_grid.x_min && junction < full_grid.x_max) {
        return Err(Error::domain(format!(
            "junction {junction:.6} falls outside the channel [{}, {}]",
            full_grid.x_min, full_grid.x_max
        )));
    }
    let margin = (0.125 * (half_grid.x_max - half_grid.x_min)).min(5.0);
    let arg_lo = half_grid.x_min + margin;
    let arg_hi = half_grid.x_max;
    let nc = full_grid.cross.total_nodes();
    let hx = half_grid.dx();
    let uv = point.field.values();
    Ok(channel::from_stations(full_grid, |ix, out| {
        let x = full_grid.x(ix);
        if x > junction {
            return;
        }
        let arg = (x + glue.shift).clamp(arg_lo, arg_hi);
        let t = (arg - half_grid.x_min) / hx;
        let j = (t.floor() as usize).min(half_grid.axial_nodes - 2);
        let frac = t - j as f64;
        for ic in 0..nc {
            out[ic] = uv[j * nc + ic] + (uv[(j + 1) * nc + ic] - uv[j * nc + ic]) * frac;
        }
    }))
}

/// Damped Newton solve of the traveling-wave equation on the two-sided
/// channel with Dirichlet rows `left_state` and `right_state`.
pub fn newton_travel_wave(
    initial: &Field,
    params: &WaveParameters,
    full_grid: &ChannelGrid,
    left_state: &Field,
    right_state: &Field,
) -> Result<WaveSolution> {
    let nc = full_grid.cross.total_nodes();
    if initial.len() != full_grid.total_nodes()
        || left_state.len() != nc
        || right_state.len() != nc
    {
        return Err(Error::mismatch(
            "initial field or boundary states do not match the grid",
        ));
    }
    for ic in 0..nc {
        if full_grid.cross.is_boundary(ic)
            && (left_state.values()[ic] != 0.0 || right_state.values()[ic] != 0.0)
        {
            return Err(Error::domain(
                "boundary states must vanish on the cross-section walls",
            ));
        }
    }
    let mut start = initial.clone();
    {
        let vals = start.values_mut();
        let last = (full_grid.axial_nodes - 1) * nc;
        vals[..nc].copy_from_slice(left_state.values());
        vals[last..].copy_from_slice(right_state.values());
        for ix in 0..full_grid.axial_nodes {
            for ic in 0..nc {
                if full_grid.cross.is_boundary(ic) {
                    vals[ix * nc + ic] = 0.0;
                }
            }
        }
    }
    let (field, newton_iterations, residual_history) = newton_channel(
        start,
        params,
        full_grid,
        WAVE_TOL,
        MAX_NEWTON,
        &[],
        &mut |_, _| {},
    )?;
    let residual = *residual_history
        .last()
        .expect("newton history is never empty");
    let diagnostics = wave_diagnostics(&field, params, full_grid, left_state, right_state)?;
    Ok(WaveSolution {
        field,
        grid: full_grid.clone(),
        params: *params,
        left_state: left_state.clone(),
        right_state: right_state.clone(),
        residual,
        residual_history,
        newton_iterations,
        diagnostics,
    })
}

/// Sample the wave in the lab frame at time `t`: the axial coordinate is
/// rescaled by the speed and the profile advected by c^2 t, clamping to
/// the asymptotic rows where the argument leaves the solved domain.
pub fn wave_to_lab_frame(wave: &WaveSolution, t: f64) -> Result<LabFrame> {
    let c = wave.params.speed;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::config("lab frame needs a positive speed"));
    }
    if !t.is_finite() {
        return Err(Error::config("time must be finite"));
    }
    let g = &wave.grid;
    let lab = ChannelGrid::new(g.x_min / c, g.x_max / c, g.axial_nodes, g.cross.clone())?;
    let nc = g.cross.total_nodes();
    let dx = g.dx();
    let uv = wave.field.values();
    let mut clamped = false;
    let field = channel::from_stations(&lab, |ix, out| {
        let xi = lab.x(ix);
        let arg = c * (xi - c * t);
        let inside = arg.clamp(g.x_min, g.x_max);
        // Tolerate the rounding of x/c*c at the ends; only a genuine
        // excursion outside the solved domain counts as clamping.
        if (inside - arg).abs() > 1e-9 {
            clamped = true;
        }
        let s = (inside - g.x_min) / dx;
        let j = (s.floor() as usize).min(g.axial_nodes - 2);
        let frac = s - j as f64;
        for ic in 0..nc {
            out[ic] = uv[j * nc + ic] + (uv[(j + 1) * nc + ic] - uv[j * nc + ic]) * frac;
        }
    });
    Ok(LabFrame {
        grid: lab,
        field,
        clamped,
    })
}

/// Safeguarded Barzilai-Borwein descent with nodewise clamping. Stops at
/// the residual switch; `strict` decides whether hitting the iteration
/// budget or a stalled line search is an error or an acceptable handoff.
fn descend(
    seed: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    switch: f64,
    max_iter: usize,
    observer: &mut dyn FnMut(&IterateRecord),
) -> Result<(Field, f64, usize)> {
    let mut u = truncate_unit(seed);
    let mut level = evaluate_ic(&u, params, grid)?;
    let mut g = gradient_ic(&u, params, grid)?;
    let mut res = g.sup_norm();
    let mut gg = weighted_inner(grid, &g, &g);
    let mut step = if res > 0.0 { 0.25 / res } else { 0.0 };
    let mut it = 0;
    while it < max_iter {
        observer(&IterateRecord {
            stage: Stage::Descent,
            iteration: it,
            field: &u,
            level,
            residual: res,
        });
        #[cfg(debug_assertions)]
        debug_sublevel(&u, params, grid, level);
        if res <= switch {
            return Ok((u, level, it));
        }
        // Per-node cap: no single node may move further than the clamp
        // range in one step.
        let mut t = step.min(0.25 / res);
        if !(t.is_finite() && t > 0.0) {
            t = 0.25 / res;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = truncate_unit(&u.axpy(-t, &g));
            let lvl = evaluate_ic(&cand, params, grid)?;
            if lvl <= level - 1e-4 * t * gg {
                let gn = gradient_ic(&cand, params, grid)?;
                let s = cand.axpy(-1.0, &u);
                let dg = gn.axpy(-1.0, &g);
                let ss = weighted_inner(grid, &s, &s);
                let sy = weighted_inner(grid, &s, &dg).abs();
                step = if sy > 1e-300 { ss / sy } else { t };
                u = cand;
                level = lvl;
                g = gn;
                res = g.sup_norm();
                gg = weighted_inner(grid, &g, &g);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        it += 1;
        if !accepted {
            // Line search exhausted: hand the iterate to Newton rather than
            // fail here; Newton's own convergence check is the arbiter.
            return Ok((u, level, it));
        }
        if u.sup_norm() <= TRIVIAL_SUP {
            return Ok((u, level, it));
        }
    }
    Ok((u, level, it))
}

#[cfg(debug_assertions)]
fn debug_sublevel(u: &Field, params: &WaveParameters, grid: &ChannelGrid, level: f64) {
    if level <= 0.0 {
        let report = crate::verify::check_sublevel_bounds(u, params, grid)
            .expect("sublevel check failed to evaluate");
        debug_assert!(
            !report.applicable || report.passed,
            "sublevel bound violated on a descent iterate: {report:?}"
        );
    }
}

/// Damped banded Newton on the strong-form residual, optionally deflated.
/// Returns the converged field, the accepted step count, and the residual
/// history including the initial and final values.
fn newton_channel(
    start: Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    tol: f64,
    max_iter: usize,
    deflate: &[Field],
    on_step: &mut dyn FnMut(&Field, f64),
) -> Result<(Field, usize, Vec<f64>)> {
    let stencil = CrossStencil::build(&grid.cross);
    let deflation_value = |v: &Field| -> f64 {
        deflate
            .iter()
            .map(|w| {
                let d = v.axpy(-1.0, w);
                1.0 / weighted_inner(grid, &d, &d).max(1e-300) + 1.0
            })
            .product()
    };
    let merit = |v: &Field, res: f64| -> f64 {
        if deflate.is_empty() {
            res
        } else {
            deflation_value(v) * res
        }
    };
    let mut u = start;
    let mut history = Vec::new();
    let mut accepted_steps = 0;
    for _ in 0..max_iter {
        let g = gradient_ic(&u, params, grid)?;
        let res = g.sup_norm();
        if history.last() != Some(&res) {
            history.push(res);
        }
        if res <= tol {
            return Ok((u, accepted_steps, history));
        }
        let mut delta = newton_step(&stencil, &u, &g, params, grid)?;
        if !deflate.is_empty() {
            // The Newton step of the deflated residual is the plain step
            // rescaled by 1 / (1 - gamma), a rank-one correction.
            let mut gamma = 0.0;
            for w in deflate {
                let d = u.axpy(-1.0, w);
                let dd = weighted_inner(grid, &d, &d).max(1e-300);
                let m = 1.0 / dd + 1.0;
                let grad_dot = -2.0 * weighted_inner(grid, &d, &delta) / (dd * dd);
                gamma += grad_dot / m;
            }
            delta = delta.scaled((1.0 / (1.0 - gamma)).clamp(-20.0, 20.0));
        }
        let m0 = merit(&u, res);
        let mut s = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let cand = u.axpy(s, &delta);
            let rs = gradient_ic(&cand, params, grid)?.sup_norm();
            if merit(&cand, rs) < m0 {
                next = Some((cand, rs));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, rs)) = next else {
            return Err(Error::solver(
                "Newton line search stalled on the channel residual",
            ));
        };
        u = cand;
        accepted_steps += 1;
        on_step(&u, rs);
    }
    let res = gradient_ic(&u, params, grid)?.sup_norm();
    history.push(res);
    if res <= tol {
        Ok((u, accepted_steps, history))
    } else {
        Err(Error::solver(format!(
            "Newton did not reach tolerance: residual {res:.3e} after {max_iter} steps"
        )))
    }
}

/// Newton step: solve J delta = -g on the interior unknowns with the
/// banded Jacobian of the strong-form residual.
fn newton_step(
    stencil: &CrossStencil,
    u: &Field,
    g: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
) -> Result<Field> {
    let nx = grid.axial_nodes;
    let nc = grid.cross.total_nodes();
    let m = stencil.interior.len();
    let n = (nx - 2) * m;
    let dx = grid.dx();
    let c2 = params.speed * params.speed;
    let (ep, em) = ((0.5 * dx).exp(), (-0.5 * dx).exp());
    let ch = 0.5 * (ep + em);
    let ax_diag = 2.0 * ch * c2 / (dx * dx);
    let ax_up = -c2 * ep / (dx * dx);
    let ax_dn = -c2 * em / (dx * dx);
    let uv = u.values();
    let mut mat = Banded::new(n, m, m);
    for ix in 1..nx - 1 {
        for (r, &ic) in stencil.interior.iter().enumerate() {
            let row = (ix - 1) * m + r;
            let v = uv[ix * nc + ic];
            mat.set(row, row, ax_diag + stencil.diag - 1.0 + 3.0 * v * v);
            for &(rn, coeff) in &stencil.neighbors[r] {
                mat.set(row, (ix - 1) * m + rn, coeff);
            }
            if ix + 1 < nx - 1 {
                mat.set(row, row + m, ax_up);
            }
            if ix > 1 {
                mat.set(row, row - m, ax_dn);
            }
        }
    }
    let lu = mat.factor()?;
    let gv = g.values();
    let mut rhs = vec![0.0; n];
    for ix in 1..nx - 1 {
        for (r, &ic) in stencil.interior.iter().enumerate() {
            rhs[(ix - 1) * m + r] = -gv[ix * nc + ic];
        }
    }
    lu.solve_in_place(&mut rhs);
    let mut delta = vec![0.0; uv.len()];
    for ix in 1..nx - 1 {
        for (r, &ic) in stencil.interior.iter().enumerate() {
            delta[ix * nc + ic] = rhs[(ix - 1) * m + r];
        }
    }
    Ok(Field::from_values(delta))
}

/// Interior numbering and second-difference stencil of the cross section.
struct CrossStencil {
    /// Interior ordinal to full cross index.
    interior: Vec<usize>,
    /// Diagonal of the negative cross Laplacian.
    diag: f64,
    /// Per ordinal: (neighbor ordinal, off-diagonal coefficient).
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl CrossStencil {
    fn build(cross: &CrossSectionGrid) -> Self {
        match *cross {
            CrossSectionGrid::Interval { length, nodes } => {
                let h = length / (nodes - 1) as f64;
                let m = nodes - 2;
                let off = -1.0 / (h * h);
                let neighbors = (0..m)
                    .map(|r| {
                        let mut v = Vec::with_capacity(2);
                        if r > 0 {
                            v.push((r - 1, off));
                        }
                        if r + 1 < m {
                            v.push((r + 1, off));
                        }
                        v
                    })
                    .collect();
                CrossStencil {
                    interior: (1..nodes - 1).collect(),
                    diag: 2.0 / (h * h),
                    neighbors,
                }
            }
            CrossSectionGrid::Rectangle { lengths, nodes } => {
                let h0 = lengths[0] / (nodes[0] - 1) as f64;
                let h1 = lengths[1] / (nodes[1] - 1) as f64;
                let (n0, n1) = (nodes[0] - 2, nodes[1] - 2);
                let mut interior = Vec::with_capacity(n0 * n1);
                let mut neighbors = vec![Vec::new(); n0 * n1];
                let off0 = -1.0 / (h0 * h0);
                let off1 = -1.0 / (h1 * h1);
                for a in 0..n0 {
                    for b in 0..n1 {
                        let r = a * n1 + b;
                        interior.push((a + 1) * nodes[1] + (b + 1));
                        if b > 0 {
                            neighbors[r].push((r - 1, off1));
                        }
                        if b + 1 < n1 {
                            neighbors[r].push((r + 1, off1));
                        }
                        if a > 0 {
                            neighbors[r].push((r - n1, off0));
                        }
                        if a + 1 < n0 {
                            neighbors[r].push((r + n1, off0));
                        }
                    }
                }
                CrossStencil {
                    interior,
                    diag: 2.0 / (h0 * h0) + 2.0 / (h1 * h1),
                    neighbors,
                }
            }
        }
    }
}

/// Diagnostics of an arbitrary field read against boundary states: the
/// asymptotic energies, the kinetic gap record, and end deviations.
pub fn wave_diagnostics(
    u: &Field,
    params: &WaveParameters,
    grid: &ChannelGrid,
    left_state: &Field,
    right_state: &Field,
) -> Result<WaveDiagnostics> {
    let j_left = evaluate_j(&grid.cross, left_state)?;
    let j_right = evaluate_j(&grid.cross, right_state)?;
    let c2 = params.speed * params.speed;
    let kinetic_mass = c2 * channel::axial_kinetic_unweighted(grid, u);
    let gap = j_right - j_left;
    let gap_mismatch = (gap - kinetic_mass).abs() / kinetic_mass.abs().max(1e-14);
    let nc = grid.cross.total_nodes();
    let uv = u.values();
    let il = grid.nearest_station(grid.x_min + 1.0);
    let ir = grid.nearest_station(grid.x_max - 1.0);
    let mut left_deviation: f64 = 0.0;
    let mut right_deviation: f64 = 0.0;
    for ic in 0..nc {
        left_deviation =
            left_deviation.max((uv[il * nc + ic] - left_state.values()[ic]).abs());
        right_deviation =
            right_deviation.max((uv[ir * nc + ic] - right_state.values()[ic]).abs());
    }
    let dx = grid.dx();
    let mut left_slope_sup: f64 = 0.0;
    for ic in 0..nc {
        let d = (-3.0 * uv[ic] + 4.0 * uv[nc + ic] - uv[2 * nc + ic]) / (2.0 * dx);
        left_slope_sup = left_slope_sup.max(d.abs());
    }
    Ok(WaveDiagnostics {
        j_left,
        j_right,
        kinetic_mass,
        gap_mismatch,
        left_deviation,
        right_deviation,
        left_slope_sup,
    })
}

fn axial_changes(grid: &ChannelGrid, u: &Field) -> usize {
    sign_change_count(&channel::y_averaged_profile(grid, u), 1e-9)
}

fn trivial_point(grid: &ChannelGrid, seed_level: f64) -> CriticalPoint {
    CriticalPoint {
        field: Field::zeros(grid.total_nodes()),
        level: 0.0,
        residual: 0.0,
        seed_level,
        trivial: true,
        descent_iterations: 0,
        newton_iterations: 0,
        axial_sign_changes: 0,
    }
}

fn check_boundary_zero(grid: &ChannelGrid, u: &Field) -> Result<()> {
    if u.len() != grid.total_nodes() {
        return Err(Error::mismatch(format!(
            "field has {} values, grid has {} nodes",
            u.len(),
            grid.total_nodes()
        )));
    }
    let nc = grid.cross.total_nodes();
    for ix in 0..grid.axial_nodes {
        for ic in 0..nc {
            if grid.is_boundary(ix, ic) && u.values()[ix * nc + ic] != 0.0 {
                return Err(Error::domain(
                    "seed must vanish on the side walls and both axial ends",
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::select_seed_eps;
    use crate::cross_section::ground_state;

    fn half_grid() -> ChannelGrid {
        let cross = CrossSectionGrid::interval(4.0, 21).unwrap();
        ChannelGrid::new(-20.0, 0.0, 201, cross).unwrap()
    }

    fn params_for(grid: &ChannelGrid) -> WaveParameters {
        WaveParameters::for_grid(grid, 0.6).unwrap()
    }

    #[test]
    fn trivial_seed_short_circuits() {
        let grid = half_grid();
        let p = params_for(&grid);
        let point = minimize_ic(&Field::zeros(grid.total_nodes()), &p, &grid, 1e-10).unwrap();
        assert!(point.trivial);
        assert_eq!(point.level, 0.0);
        assert_eq!(point.residual, 0.0);
        assert_eq!(point.descent_iterations, 0);
    }

    #[test]
    fn minimize_rejects_bad_tolerance() {
        let grid = half_grid();
        let p = params_for(&grid);
        let err = minimize_ic(&Field::zeros(grid.total_nodes()), &p, &grid, 0.0).unwrap_err();
        assert!(err.to_string().contains("tolerance"));
    }

    #[test]
    fn minimize_rejects_nonvanishing_walls() {
        let grid = half_grid();
        let p = params_for(&grid);
        let mut vals = vec![0.0; grid.total_nodes()];
        vals[5 * grid.cross.total_nodes()] = 0.1; // wall node of station 5
        let err = minimize_ic(&Field::from_values(vals), &p, &grid, 1e-8).unwrap_err();
        assert!(err.to_string().contains("vanish"));
    }

    #[test]
    fn minimize_descends_to_a_negative_critical_point() {
        let grid = half_grid();
        let p = params_for(&grid);
        let family = select_seed_eps(1, 5.0, 16, &p, &grid).unwrap();
        let seed = family.best();
        let mut last_descent_level = f64::INFINITY;
        let mut monotone = true;
        let mut clamped = true;
        let point = minimize_ic_observed(&seed, &p, &grid, 1e-10, &mut |rec| {
            if let Stage::Descent = rec.stage {
                if rec.level > last_descent_level + 1e-12 {
                    monotone = false;
                }
                last_descent_level = rec.level;
            }
            if rec.field.sup_norm() > 1.0 + 1e-12 {
                clamped = false;
            }
        })
        .unwrap();
        assert!(!point.trivial);
        assert!(point.level < 0.0, "level {}", point.level);
        assert!(point.residual <= 1e-10);
        assert!(point.descent_iterations > 0);
        assert!(monotone, "descent level increased");
        assert!(clamped, "iterate escaped [-1, 1]");
        assert_eq!(point.axial_sign_changes, 0);
    }

    #[test]
    fn minimize_is_equivariant_under_negation() {
        let grid = half_grid();
        let p = params_for(&grid);
        let family = select_seed_eps(1, 5.0, 16, &p, &grid).unwrap();
        let seed = family.best();
        let a = minimize_ic(&seed, &p, &grid, 1e-10).unwrap();
        let b = minimize_ic(&seed.negated(), &p, &grid, 1e-10).unwrap();
        assert_eq!(a.level.to_bits(), b.level.to_bits());
        assert_eq!(a.field.len(), b.field.len());
        for (x, y) in a.field.values().iter().zip(b.field.values()) {
            assert_eq!(*x, -*y);
        }
    }

    fn plateau_point(grid: &ChannelGrid, profile: &[f64]) -> CriticalPoint {
        let nc = grid.cross.total_nodes();
        let mut vals = vec![0.0; grid.total_nodes()];
        for ix in 0..grid.axial_nodes {
            vals[ix * nc..(ix + 1) * nc].copy_from_slice(profile);
        }
        CriticalPoint {
            field: Field::from_values(vals),
            level: -1.0,
            residual: 0.0,
            seed_level: -0.5,
            trivial: false,
            descent_iterations: 0,
            newton_iterations: 0,
            axial_sign_changes: 0,
        }
    }

    fn first_mode_profile(grid: &ChannelGrid) -> Vec<f64> {
        let nc = grid.cross.total_nodes();
        (0..nc)
            .map(|ic| {
                if grid.cross.is_boundary(ic) {
                    0.0
                } else {
                    let y = grid.cross.coordinate(ic)[0];
                    0.5 * (std::f64::consts::PI * y / 4.0).sin()
                }
            })
            .collect()
    }

    fn state_from(values: Vec<f64>) -> CrossSectionState {
        CrossSectionState {
            values: Field::from_values(values),
            energy: 0.0,
            residual: 0.0,
            morse_tag: crate::cross_section::MorseTag::Ground,
        }
    }

    #[test]
    fn shift_offset_errors_when_profile_never_leaves_target() {
        let grid = half_grid();
        let profile = first_mode_profile(&grid);
        let point = plateau_point(&grid, &profile);
        let target = state_from(profile);
        let err = shift_offset(&point, &target, 1.0, &grid).unwrap_err();
        assert!(err.to_string().contains("mu/8"));
    }

    #[test]
    fn shift_offset_crossing_matches_brute_force_window() {
        let grid = half_grid();
        let nc = grid.cross.total_nodes();
        let profile = first_mode_profile(&grid);
        // Ramp from the plateau (left) down to zero at the right end.
        let mut vals = vec![0.0; grid.total_nodes()];
        for ix in 0..grid.axial_nodes {
            let x = grid.x(ix);
            let f = if x <= -8.0 { 1.0 } else { (-x / 8.0).max(0.0) };
            for ic in 0..nc {
                vals[ix * nc + ic] = f * profile[ic];
            }
        }
        let point = CriticalPoint {
            field: Field::from_values(vals),
            ..plateau_point(&grid, &profile)
        };
        let target = state_from(profile.clone());
        let mu = 0.4;
        let glue = shift_offset(&point, &target, mu, &grid).unwrap();
        assert_eq!(glue.match_fraction, mu / 8.0);
        assert!(glue.shift < 0.0 && glue.shift > grid.x_min);

        // Independent evaluation of the window integral at the returned
        // offset: dense trapezoid over the station profile.
        let uv = point.field.values();
        let tv = target.values.values();
        let den: Vec<f64> = (0..grid.axial_nodes)
            .map(|ix| {
                let row: Vec<f64> = (0..nc).map(|ic| uv[ix * nc + ic] - tv[ic]).collect();
                let l2: f64 = (0..nc)
                    .map(|ic| grid.cross.quad_weight(ic) * row[ic] * row[ic])
                    .sum();
                2.0 * dirichlet_part(&grid.cross, &row) + l2
            })
            .collect();
        let dx = grid.dx();
        let value = |x: f64| -> f64 {
            let t = ((x - grid.x_min) / dx).clamp(0.0, (den.len() - 1) as f64);
            let j = (t.floor() as usize).min(den.len() - 2);
            den[j] + (den[j + 1] - den[j]) * (t - j as f64)
        };
        let samples = 20_000;
        let h = 1.0 / samples as f64;
        let mut brute = 0.0;
        for s in 0..samples {
            let x0 = glue.shift - 1.0 + s as f64 * h;
            brute += 0.5 * (value(x0) + value(x0 + h)) * h;
        }
        assert!(
            (brute - mu / 8.0).abs() <= 1e-6,
            "window at shift = {} is {brute}, wanted {}",
            glue.shift,
            mu / 8.0
        );
    }

    #[test]
    fn window_integral_is_exact_for_linear_profiles() {
        let grid = half_grid();
        // den(x) = 3 x + 70 sampled at stations; integral over [xbar-1, xbar]
        // of a linear function is its midpoint value.
        let den: Vec<f64> = (0..grid.axial_nodes).map(|ix| 3.0 * grid.x(ix) + 70.0).collect();
        for xbar in [-17.0, -9.55, -0.3, 0.0] {
            let got = window_integral(&grid, &den, xbar);
            let want = 3.0 * (xbar - 0.5) + 70.0;
            assert!((got - want).abs() <= 1e-10, "xbar {xbar}: {got} vs {want}");
        }
    }

    #[test]
    fn glue_places_plateau_left_and_zero_right() {
        let half = half_grid();
        let profile = first_mode_profile(&half);
        let point = plateau_point(&half, &profile);
        let full = ChannelGrid::new(-10.0, 10.0, 201, half.cross.clone()).unwrap();
        let glue = GlueParameters {
            mu: 1.0,
            shift: -3.0,
            match_fraction: 0.125,
        };
        let glued = glue_extend(&point, &half, &glue, &full).unwrap();
        let nc = full.cross.total_nodes();
        let gv = glued.values();
        for ix in 0..full.axial_nodes {
            let x = full.x(ix);
            for ic in 0..nc {
                let want = if x > 3.0 { 0.0 } else { profile[ic] };
                assert!(
                    (gv[ix * nc + ic] - want).abs() <= 1e-12,
                    "x = {x}, ic = {ic}"
                );
            }
        }
    }

    #[test]
    fn glue_rejects_mismatched_cross_sections() {
        let half = half_grid();
        let profile = first_mode_profile(&half);
        let point = plateau_point(&half, &profile);
        let other = CrossSectionGrid::interval(4.0, 31).unwrap();
        let full = ChannelGrid::new(-10.0, 10.0, 201, other).unwrap();
        let glue = GlueParameters {
            mu: 1.0,
            shift: -3.0,
            match_fraction: 0.125,
        };
        assert!(glue_extend(&point, &half, &glue, &full).is_err());
    }

    #[test]
    fn glue_rejects_junction_outside_channel() {
        let half = half_grid();
        let profile = first_mode_profile(&half);
        let point = plateau_point(&half, &profile);
        let full = ChannelGrid::new(-10.0, 10.0, 201, half.cross.clone()).unwrap();
        let glue = GlueParameters {
            mu: 1.0,
            shift: -50.0,
            match_fraction: 0.125,
        };
        let err = glue_extend(&point, &half, &glue, &full).unwrap_err();
        assert!(err.to_string().contains("junction"));
    }

    fn tanh_initial(grid: &ChannelGrid, up: &Field) -> Field {
        let nc = grid.cross.total_nodes();
        let upv = up.values();
        let mut vals = vec![0.0; grid.total_nodes()];
        for ix in 0..grid.axial_nodes {
            let s = 0.5 * (1.0 - (grid.x(ix) / 2.0).tanh());
            for ic in 0..nc {
                vals[ix * nc + ic] = s * upv[ic];
            }
        }
        Field::from_values(vals)
    }

    #[test]
    fn travel_wave_converges_and_is_odd_equivariant() {
        let cross = CrossSectionGrid::interval(4.0, 11).unwrap();
        let grid = ChannelGrid::new(-16.0, 16.0, 161, cross.clone()).unwrap();
        let p = params_for(&grid);
        let up = ground_state(&cross, 1e-12).unwrap();
        let init = tanh_initial(&grid, &up.values);
        let zero = Field::zeros(cross.total_nodes());
        let wave = newton_travel_wave(&init, &p, &grid, &up.values, &zero).unwrap();
        assert!(wave.residual <= 1e-10);
        assert!(wave.diagnostics.j_left < 0.0);
        assert!(wave.diagnostics.kinetic_mass > 0.0);
        assert!(
            wave.diagnostics.gap_mismatch < 1e-2,
            "gap mismatch {}",
            wave.diagnostics.gap_mismatch
        );

        let neg = newton_travel_wave(
            &init.negated(),
            &p,
            &grid,
            &up.values.negated(),
            &zero,
        )
        .unwrap();
        assert_eq!(wave.residual_history, neg.residual_history);
        for (a, b) in wave.field.values().iter().zip(neg.field.values()) {
            // Exact negation; signed zeros on held rows compare by value.
            assert_eq!(*a, -*b);
            assert_eq!(a.abs().to_bits(), b.abs().to_bits());
        }
    }

    #[test]
    fn travel_wave_rejects_bad_sizes_and_wall_values() {
        let cross = CrossSectionGrid::interval(4.0, 11).unwrap();
        let grid = ChannelGrid::new(-16.0, 16.0, 161, cross.clone()).unwrap();
        let p = params_for(&grid);
        let zero = Field::zeros(cross.total_nodes());
        let err = newton_travel_wave(&Field::zeros(7), &p, &grid, &zero, &zero).unwrap_err();
        assert!(err.to_string().contains("do not match"));

        let mut wall = vec![0.0; cross.total_nodes()];
        wall[0] = 0.2;
        let err = newton_travel_wave(
            &Field::zeros(grid.total_nodes()),
            &p,
            &grid,
            &Field::from_values(wall),
            &zero,
        )
        .unwrap_err();
        assert!(err.to_string().contains("walls"));
    }

    fn synthetic_wave(grid: &ChannelGrid) -> WaveSolution {
        let nc = grid.cross.total_nodes();
        let profile = first_mode_profile(grid);
        let mut vals = vec![0.0; grid.total_nodes()];
        for ix in 0..grid.axial_nodes {
            let s = 0.5 * (1.0 - (grid.x(ix) / 2.0).tanh());
            for ic in 0..nc {
                vals[ix * nc + ic] = s * profile[ic];
            }
        }
        let field = Field::from_values(vals);
        let params = params_for(grid);
        let left = Field::from_values(profile);
        let right = Field::zeros(nc);
        let diagnostics = wave_diagnostics(&field, &params, grid, &left, &right).unwrap();
        WaveSolution {
            field,
            grid: grid.clone(),
            params,
            left_state: left,
            right_state: right,
            residual: 0.0,
            residual_history: vec![0.0],
            newton_iterations: 0,
            diagnostics,
        }
    }

    #[test]
    fn lab_frame_at_time_zero_is_a_pure_rescaling() {
        let cross = CrossSectionGrid::interval(4.0, 11).unwrap();
        let grid = ChannelGrid::new(-12.0, 12.0, 121, cross).unwrap();
        let wave = synthetic_wave(&grid);
        let lab = wave_to_lab_frame(&wave, 0.0).unwrap();
        let c = wave.params.speed;
        assert!((lab.grid.x_min - grid.x_min / c).abs() < 1e-12);
        assert!((lab.grid.x_max - grid.x_max / c).abs() < 1e-12);
        assert!(!lab.clamped);
        let a = lab.field.values();
        let b = wave.field.values();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn lab_frame_moves_toward_left_state_over_time() {
        let cross = CrossSectionGrid::interval(4.0, 11).unwrap();
        let grid = ChannelGrid::new(-12.0, 12.0, 121, cross).unwrap();
        let wave = synthetic_wave(&grid);
        let lab1 = wave_to_lab_frame(&wave, 0.0).unwrap();
        let lab2 = wave_to_lab_frame(&wave, 8.0).unwrap();
        let nc = grid.cross.total_nodes();
        let ix = lab1.grid.nearest_station(10.0);
        let lv = wave.left_state.values();
        let d1: f64 = (0..nc)
            .map(|ic| (lab1.field.values()[ix * nc + ic] - lv[ic]).abs())
            .fold(0.0, f64::max);
        let d2: f64 = (0..nc)
            .map(|ic| (lab2.field.values()[ix * nc + ic] - lv[ic]).abs())
            .fold(0.0, f64::max);
        assert!(d2 < d1, "deviation grew: {d2} vs {d1}");
    }

    #[test]
    fn sequence_guards_bad_inputs() {
        let grid = half_grid();
        let p = params_for(&grid);
        assert!(critical_sequence(&p, &grid, 0).is_err());
        let fast = WaveParameters::new(2.0, 0.6).unwrap();
        assert!(!fast.admissible);
        let err = critical_sequence(&fast, &grid, 1).unwrap_err();
        assert!(err.to_string().contains("threshold"));
    }

    #[test]
    fn sequence_finds_three_nested_levels() {
        let cross = CrossSectionGrid::interval(4.0, 21).unwrap();
        let grid = ChannelGrid::new(-30.0, 0.0, 301, cross).unwrap();
        let p = params_for(&grid);
        let report = critical_sequence(&p, &grid, 3).unwrap();
        assert!(report.complete, "warnings: {:?}", report.warnings);
        assert_eq!(report.points.len(), 3);
        for (i, point) in report.points.iter().enumerate() {
            assert!(point.level < 0.0, "level {} at k={}", point.level, i + 1);
            assert!(point.residual <= 1e-10);
            assert!(point.field.sup_norm() <= 1.0 + 1e-12);
            assert_eq!(point.axial_sign_changes, i);
            assert!(channel::axial_kinetic(&grid, &point.field) > 0.0);
        }
        let quartic = |f: &Field| {
            let n = channel::weighted_norms(f, &grid).unwrap();
            n.l4w * n.l4w
        };
        for pair in report.points.windows(2) {
            assert!(pair[0].level <= pair[1].level);
            assert!(quartic(&pair[0].field) >= quartic(&pair[1].field));
            // each level is a small fraction of the previous one
            assert!(pair[1].level > 0.2 * pair[0].level);
        }
        // Nehari identity: at a critical point the level is minus a quarter
        // of the weighted quartic mass.
        for point in &report.points {
            let q4 = quartic(&point.field);
            assert!(
                (point.level + 0.25 * q4).abs() <= 1e-10,
                "level {} vs quartic {}",
                point.level,
                q4
            );
        }
    }

    #[test]
    fn sequence_shifts_move_left_with_depth() {
        let cross = CrossSectionGrid::interval(4.0, 21).unwrap();
        let grid = ChannelGrid::new(-30.0, 0.0, 301, cross).unwrap();
        let p = params_for(&grid);
        let report = critical_sequence(&p, &grid, 2).unwrap();
        assert!(report.complete);
        let ground = ground_state(&grid.cross, 1e-12).unwrap();
        let mu = (2.0 * dirichlet_part(&grid.cross, ground.values.values())).sqrt();
        let mut shifts = Vec::new();
        for point in &report.points {
            // normalize to the branch that approaches the positive state
            let sum: f64 = point.field.values().iter().sum();
            let mut oriented = point.clone();
            if sum < 0.0 {
                oriented.field = oriented.field.negated();
            }
            let glue = shift_offset(&oriented, &ground, mu, &grid).unwrap();
            shifts.push(glue.shift);
        }
        assert!(
            shifts[1] < shifts[0],
            "deeper point should sit further left: {shifts:?}"
        );
    }
}
