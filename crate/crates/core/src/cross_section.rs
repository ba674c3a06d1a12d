//! The cross-section problem: Dirichlet eigenpairs of -Laplacian, the
//! profile energy J[v] = int (|grad v|^2 / 2 - v^2/2 + v^4/4) dy, its
//! gradient, the positive ground state, and the finite set of critical
//! points reachable by deflated Newton from low-mode seeds.

use crate::error::{Error, Result};
use crate::field::{sign_change_count, Field};
use crate::grid::CrossSectionGrid;
use crate::linalg::{tridiagonal_eigen_smallest, Banded};
use serde::{Deserialize, Serialize};

/// Eigenvalue/eigenfunction of the Dirichlet Laplacian on the cross
/// section, unit-normalized in the discrete L2 norm.
#[derive(Clone, Debug)]
pub struct SpectralPair {
    pub index: usize,
    pub eigenvalue: f64,
    pub eigenfunction: Field,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorseTag {
    Ground,
    Excited,
    Trivial,
}

/// A converged critical point of J (or the trivial state).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossSectionState {
    pub values: Field,
    pub energy: f64,
    pub residual: f64,
    pub morse_tag: MorseTag,
}

/// Result of the critical-point enumeration. `expected_count` is 2k+1
/// where k counts eigenvalues below one; `complete` records whether the
/// deflation sweep actually reached it.
#[derive(Clone, Debug)]
pub struct CriticalSet {
    pub states: Vec<CrossSectionState>,
    pub expected_count: usize,
    pub complete: bool,
}

/// The `count` smallest Dirichlet eigenpairs, ascending, orthonormal in
/// discrete L2.
pub fn dirichlet_eigenpairs(grid: &CrossSectionGrid, count: usize) -> Result<Vec<SpectralPair>> {
    grid.validate()?;
    if count == 0 {
        return Err(Error::config("eigenpair count must be at least 1"));
    }
    if count > grid.interior_nodes() {
        return Err(Error::config(format!(
            "requested {count} eigenpairs but the grid has only {} interior nodes",
            grid.interior_nodes()
        )));
    }
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h = length / (nodes - 1) as f64;
            let pairs = interval_modes(nodes, h, count)?;
            Ok(pairs
                .into_iter()
                .enumerate()
                .map(|(i, (lam, psi))| SpectralPair {
                    index: i + 1,
                    eigenvalue: lam,
                    eigenfunction: Field::from_values(psi),
                })
                .collect())
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h = [
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ];
            // `count` modes per direction always suffice for the `count`
            // smallest sums.
            let k0 = count.min(nodes[0] - 2);
            let k1 = count.min(nodes[1] - 2);
            let m0 = interval_modes(nodes[0], h[0], k0)?;
            let m1 = interval_modes(nodes[1], h[1], k1)?;
            let mut sums: Vec<(f64, usize, usize)> = Vec::with_capacity(k0 * k1);
            for (i, (a, _)) in m0.iter().enumerate() {
                for (j, (b, _)) in m1.iter().enumerate() {
                    sums.push((a + b, i, j));
                }
            }
            sums.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
            let mut out = Vec::with_capacity(count);
            for (idx, &(lam, i, j)) in sums.iter().take(count).enumerate() {
                let mut psi = vec![0.0; nodes[0] * nodes[1]];
                for a in 0..nodes[0] {
                    for b in 0..nodes[1] {
                        psi[a * nodes[1] + b] = m0[i].1[a] * m1[j].1[b];
                    }
                }
                out.push(SpectralPair {
                    index: idx + 1,
                    eigenvalue: lam,
                    eigenfunction: Field::from_values(psi),
                });
            }
            Ok(out)
        }
    }
}

/// 1D Dirichlet modes on `nodes` points with spacing `h`, embedded with
/// boundary zeros and normalized so that h * sum(psi^2) = 1.
fn interval_modes(nodes: usize, h: f64, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = nodes - 2;
    let diag = vec![2.0 / (h * h); n];
    let off = vec![-1.0 / (h * h); n.saturating_sub(1)];
    let pairs = tridiagonal_eigen_smallest(&diag, &off, count)?;
    Ok(pairs
        .into_iter()
        .map(|(lam, v)| {
            let scale = 1.0 / h.sqrt();
            let mut full = vec![0.0; nodes];
            for (i, x) in v.iter().enumerate() {
                full[i + 1] = x * scale;
            }
            (lam, full)
        })
        .collect())
}

/// Edge-quadrature Dirichlet energy int 1/2 |grad v|^2 dy of one
/// cross-section slice. Dual to `laplacian_interior` below.
pub fn dirichlet_part(grid: &CrossSectionGrid, vals: &[f64]) -> f64 {
    let mut dirichlet = 0.0;
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h = length / (nodes - 1) as f64;
            for i in 0..nodes - 1 {
                let d = vals[i + 1] - vals[i];
                dirichlet += 0.5 * d * d / h;
            }
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h = [
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ];
            let w1 = |j: usize| if j == 0 || j == nodes[1] - 1 { 0.5 } else { 1.0 };
            let w0 = |i: usize| if i == 0 || i == nodes[0] - 1 { 0.5 } else { 1.0 };
            for i in 0..nodes[0] - 1 {
                for j in 0..nodes[1] {
                    let d = vals[(i + 1) * nodes[1] + j] - vals[i * nodes[1] + j];
                    dirichlet += 0.5 * d * d / h[0] * w1(j) * h[1];
                }
            }
            for i in 0..nodes[0] {
                for j in 0..nodes[1] - 1 {
                    let d = vals[i * nodes[1] + j + 1] - vals[i * nodes[1] + j];
                    dirichlet += 0.5 * d * d / h[1] * w0(i) * h[0];
                }
            }
        }
    }
    dirichlet
}

/// Mixed Dirichlet form int grad v . grad w dy of two slices.
///
/// Bilinear companion of `dirichlet_part`: `mixed_dirichlet(g, v, v)`
/// equals `2 * dirichlet_part(g, v)`.
pub fn mixed_dirichlet(grid: &CrossSectionGrid, v: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h = length / (nodes - 1) as f64;
            for i in 0..nodes - 1 {
                total += (v[i + 1] - v[i]) * (w[i + 1] - w[i]) / h;
            }
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h = [
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ];
            let w1 = |j: usize| if j == 0 || j == nodes[1] - 1 { 0.5 } else { 1.0 };
            let w0 = |i: usize| if i == 0 || i == nodes[0] - 1 { 0.5 } else { 1.0 };
            for i in 0..nodes[0] - 1 {
                for j in 0..nodes[1] {
                    let dv = v[(i + 1) * nodes[1] + j] - v[i * nodes[1] + j];
                    let dw = w[(i + 1) * nodes[1] + j] - w[i * nodes[1] + j];
                    total += dv * dw / h[0] * w1(j) * h[1];
                }
            }
            for i in 0..nodes[0] {
                for j in 0..nodes[1] - 1 {
                    let dv = v[i * nodes[1] + j + 1] - v[i * nodes[1] + j];
                    let dw = w[i * nodes[1] + j + 1] - w[i * nodes[1] + j];
                    total += dv * dw / h[1] * w0(i) * h[0];
                }
            }
        }
    }
    total
}

/// Discrete Laplacian of one slice, written into `out` on interior nodes
/// (boundary entries set to zero).
pub fn laplacian_interior(grid: &CrossSectionGrid, vals: &[f64], out: &mut [f64]) {
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h2 = (length / (nodes - 1) as f64).powi(2);
            out[0] = 0.0;
            out[nodes - 1] = 0.0;
            for i in 1..nodes - 1 {
                out[i] = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / h2;
            }
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h0 = (lengths[0] / (nodes[0] - 1) as f64).powi(2);
            let h1 = (lengths[1] / (nodes[1] - 1) as f64).powi(2);
            out.fill(0.0);
            for i in 1..nodes[0] - 1 {
                for j in 1..nodes[1] - 1 {
                    let c = i * nodes[1] + j;
                    out[c] = (vals[c + nodes[1]] - 2.0 * vals[c] + vals[c - nodes[1]]) / h0
                        + (vals[c + 1] - 2.0 * vals[c] + vals[c - 1]) / h1;
                }
            }
        }
    }
}

/// Energy of a cross-section profile: edge-based Dirichlet part plus
/// trapezoidal double-well part. The gradient below is its exact
/// derivative in the discrete L2 pairing.
pub fn evaluate_j(grid: &CrossSectionGrid, v: &Field) -> Result<f64> {
    check_field(grid, v)?;
    let dirichlet = dirichlet_part(grid, v.values());
    let mut well = 0.0;
    for (idx, &x) in v.values().iter().enumerate() {
        well += grid.quad_weight(idx) * (-0.5 * x * x + 0.25 * x * x * x * x);
    }
    Ok(dirichlet + well)
}

/// Discrete L2-gradient of J: -Lap v - v + v^3 on interior nodes, zero on
/// the boundary.
pub fn gradient_j(grid: &CrossSectionGrid, v: &Field) -> Result<Field> {
    check_field(grid, v)?;
    let vals = v.values();
    let mut g = vec![0.0; vals.len()];
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h = length / (nodes - 1) as f64;
            for i in 1..nodes - 1 {
                let lap = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
                g[i] = -lap - vals[i] + vals[i].powi(3);
            }
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h = [
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ];
            for i in 1..nodes[0] - 1 {
                for j in 1..nodes[1] - 1 {
                    let c = i * nodes[1] + j;
                    let lap = (vals[c + nodes[1]] - 2.0 * vals[c] + vals[c - nodes[1]])
                        / (h[0] * h[0])
                        + (vals[c + 1] - 2.0 * vals[c] + vals[c - 1]) / (h[1] * h[1]);
                    g[c] = -lap - vals[c] + vals[c].powi(3);
                }
            }
        }
    }
    Ok(Field::from_values(g))
}

fn check_field(grid: &CrossSectionGrid, v: &Field) -> Result<()> {
    if v.len() != grid.total_nodes() {
        return Err(Error::config(format!(
            "field has {} nodes, grid expects {}",
            v.len(),
            grid.total_nodes()
        )));
    }
    v.ensure_finite()
}

/// Discrete L2 inner product on the cross section (interior trapezoid
/// weights; fields vanish on the boundary so end corrections drop out).
fn inner_l2(grid: &CrossSectionGrid, a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(idx, (&x, &y))| grid.quad_weight(idx) * x * y)
        .sum()
}

/// The unique positive ground state of the cross-section problem.
/// Requires the lowest eigenvalue to lie below one; otherwise only the
/// trivial profile exists and the configuration is refused.
pub fn ground_state(grid: &CrossSectionGrid, tol: f64) -> Result<CrossSectionState> {
    let pairs = dirichlet_eigenpairs(grid, 1)?;
    let lambda1 = pairs[0].eigenvalue;
    if lambda1 >= 1.0 {
        return Err(Error::regime(format!(
            "lowest cross-section eigenvalue {lambda1:.6} is not below 1; only the trivial profile exists"
        )));
    }
    let eps = 0.1 * (1.0 - lambda1).sqrt();
    let seed = pairs[0].eigenfunction.scaled(eps);
    let u = descend_then_newton(grid, seed, tol)?;
    // J is even; fix the positive representative.
    let total: f64 = u.values().iter().sum();
    let u = if total < 0.0 { u.negated() } else { u };
    if u
        .values()
        .iter()
        .enumerate()
        .any(|(idx, &x)| !grid.is_boundary(idx) && x <= 0.0)
    {
        return Err(Error::solver(
            "ground-state iteration lost interior positivity",
        ));
    }
    let energy = evaluate_j(grid, &u)?;
    let residual = gradient_j(grid, &u)?.sup_norm();
    Ok(CrossSectionState {
        values: u,
        energy,
        residual,
        morse_tag: MorseTag::Ground,
    })
}

/// Scale the seed onto the minimum of t -> J[t u] using the exact
/// quartic ray profile; leaves degenerate rays untouched.
fn ray_prescale(grid: &CrossSectionGrid, u: &Field) -> Result<Field> {
    let j1 = evaluate_j(grid, u)?;
    let j2 = evaluate_j(grid, &u.scaled(2.0))?;
    // J[tu] = a t^2/2 + b t^4/4 => a = (16 j1 - j2) / 6, b = (j2 - 4 j1) / 3.
    let a = (16.0 * j1 - j2) / 6.0;
    let b = (j2 - 4.0 * j1) / 3.0;
    if a < 0.0 && b > 0.0 {
        Ok(u.scaled((-a / b).sqrt()))
    } else {
        Ok(u.clone())
    }
}

/// Monotone descent with safeguarded Barzilai-Borwein steps, then a
/// Newton polish on the Euler-Lagrange residual.
fn descend_then_newton(grid: &CrossSectionGrid, seed: Field, tol: f64) -> Result<Field> {
    const SWITCH: f64 = 1e-3;
    const MAX_DESCENT: usize = 10_000;
    let mut u = ray_prescale(grid, &seed)?;
    let mut g = gradient_j(grid, &u)?;
    let mut j = evaluate_j(grid, &u)?;
    let mut step = 0.01 / g.sup_norm().max(1e-12);
    let mut it = 0;
    while g.sup_norm() > SWITCH && it < MAX_DESCENT {
        let cap = 0.25 / g.sup_norm().max(1e-12);
        let mut alpha = step.min(cap);
        let mut next = u.axpy(-alpha, &g);
        let mut jn = evaluate_j(grid, &next)?;
        let mut back = 0;
        while jn > j && back < 60 {
            alpha *= 0.5;
            next = u.axpy(-alpha, &g);
            jn = evaluate_j(grid, &next)?;
            back += 1;
        }
        let gn = gradient_j(grid, &next)?;
        let du = next.axpy(-1.0, &u);
        let dg = gn.axpy(-1.0, &g);
        let ss = inner_l2(grid, &du, &du);
        let denom = inner_l2(grid, &du, &dg).abs();
        step = if denom > 1e-300 { ss / denom } else { alpha };
        u = next;
        g = gn;
        j = jn;
        it += 1;
    }
    newton_polish(grid, u, tol, &[])
}

/// Damped Newton on the Euler-Lagrange residual, optionally deflated
/// against already-found states.
fn newton_polish(
    grid: &CrossSectionGrid,
    mut u: Field,
    tol: f64,
    deflate: &[Field],
) -> Result<Field> {
    const MAX_NEWTON: usize = 50;
    let deflation_value = |v: &Field| -> f64 {
        deflate
            .iter()
            .map(|w| {
                let d = v.axpy(-1.0, w);
                1.0 / inner_l2(grid, &d, &d) + 1.0
            })
            .product()
    };
    let merit = |v: &Field, res_sup: f64| -> f64 {
        if deflate.is_empty() {
            res_sup
        } else {
            deflation_value(v) * res_sup
        }
    };
    for _ in 0..MAX_NEWTON {
        let f = gradient_j(grid, &u)?;
        let res = f.sup_norm();
        if res <= tol {
            return Ok(u);
        }
        let mut delta = solve_jacobian(grid, &u, &f)?;
        if !deflate.is_empty() {
            // Rank-one correction: the Newton step of the deflated residual
            // is the plain step rescaled by 1 / (1 - gamma).
            let mut gamma = 0.0;
            for w in deflate {
                let d = u.axpy(-1.0, w);
                let dd = inner_l2(grid, &d, &d);
                let m = 1.0 / dd + 1.0;
                let grad_dot = -2.0 * inner_l2(grid, &d, &delta) / (dd * dd);
                gamma += grad_dot / m;
            }
            let tau = 1.0 / (1.0 - gamma);
            let tau = tau.clamp(-20.0, 20.0);
            delta = delta.scaled(tau);
        }
        let m0 = merit(&u, res);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = u.axpy(s, &delta);
            let rs = gradient_j(grid, &cand)?.sup_norm();
            if merit(&cand, rs) < m0 {
                u = cand;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(Error::solver("Newton line search stalled"));
        }
    }
    let res = gradient_j(grid, &u)?.sup_norm();
    if res <= tol {
        Ok(u)
    } else {
        Err(Error::solver(format!(
            "Newton did not reach tolerance: residual {res:.3e} after {MAX_NEWTON} iterations"
        )))
    }
}

/// Newton step: solve J(u) delta = -f with J = -Lap + diag(3u^2 - 1) on
/// interior nodes.
fn solve_jacobian(grid: &CrossSectionGrid, u: &Field, f: &Field) -> Result<Field> {
    match *grid {
        CrossSectionGrid::Interval { length, nodes } => {
            let h = length / (nodes - 1) as f64;
            let n = nodes - 2;
            let mut m = Banded::new(n, 1, 1);
            let vals = u.values();
            for r in 0..n {
                m.set(r, r, 2.0 / (h * h) - 1.0 + 3.0 * vals[r + 1] * vals[r + 1]);
                if r + 1 < n {
                    m.set(r, r + 1, -1.0 / (h * h));
                    m.set(r + 1, r, -1.0 / (h * h));
                }
            }
            let lu = m.factor()?;
            let mut rhs: Vec<f64> = (0..n).map(|r| -f.values()[r + 1]).collect();
            lu.solve_in_place(&mut rhs);
            let mut delta = vec![0.0; nodes];
            delta[1..=n].copy_from_slice(&rhs);
            Ok(Field::from_values(delta))
        }
        CrossSectionGrid::Rectangle { lengths, nodes } => {
            let h = [
                lengths[0] / (nodes[0] - 1) as f64,
                lengths[1] / (nodes[1] - 1) as f64,
            ];
            let (n0, n1) = (nodes[0] - 2, nodes[1] - 2);
            let n = n0 * n1;
            let band = n1;
            let mut m = Banded::new(n, band, band);
            let vals = u.values();
            for a in 0..n0 {
                for b in 0..n1 {
                    let r = a * n1 + b;
                    let c = (a + 1) * nodes[1] + (b + 1);
                    m.set(
                        r,
                        r,
                        2.0 / (h[0] * h[0]) + 2.0 / (h[1] * h[1]) - 1.0 + 3.0 * vals[c] * vals[c],
                    );
                    if b + 1 < n1 {
                        m.set(r, r + 1, -1.0 / (h[1] * h[1]));
                        m.set(r + 1, r, -1.0 / (h[1] * h[1]));
                    }
                    if a + 1 < n0 {
                        m.set(r, r + n1, -1.0 / (h[0] * h[0]));
                        m.set(r + n1, r, -1.0 / (h[0] * h[0]));
                    }
                }
            }
            let lu = m.factor()?;
            let mut rhs = vec![0.0; n];
            for a in 0..n0 {
                for b in 0..n1 {
                    rhs[a * n1 + b] = -f.values()[(a + 1) * nodes[1] + (b + 1)];
                }
            }
            lu.solve_in_place(&mut rhs);
            let mut delta = vec![0.0; nodes[0] * nodes[1]];
            for a in 0..n0 {
                for b in 0..n1 {
                    delta[(a + 1) * nodes[1] + (b + 1)] = rhs[a * n1 + b];
                }
            }
            Ok(Field::from_values(delta))
        }
    }
}

/// Enumerate critical points of J on an interval cross section by
/// deflated Newton from signed low-mode seeds; returns them sorted by
/// energy, trivial state included, truncated to `max_count`.
pub fn critical_points_j(grid: &CrossSectionGrid, max_count: usize) -> Result<CriticalSet> {
    if grid.dim() != 1 {
        return Err(Error::config(
            "critical-point enumeration is defined for interval cross sections",
        ));
    }
    if max_count == 0 {
        return Err(Error::config("max_count must be positive"));
    }
    const TOL: f64 = 1e-10;
    const DEDUP_SUP: f64 = 1e-3;
    let probe = grid.interior_nodes().min(16);
    let pairs = dirichlet_eigenpairs(grid, probe)?;
    let k = pairs.iter().take_while(|p| p.eigenvalue < 1.0).count();
    let expected = 2 * k + 1;

    let trivial = CrossSectionState {
        values: Field::zeros(grid.total_nodes()),
        energy: 0.0,
        residual: 0.0,
        morse_tag: MorseTag::Trivial,
    };
    let mut found: Vec<Field> = Vec::new();
    for j in 0..k {
        let eps = 0.1 * (1.0 - pairs[j].eigenvalue).sqrt();
        for sign in [1.0f64, -1.0] {
            let seed = pairs[j].eigenfunction.scaled(sign * eps);
            let seed = ray_prescale(grid, &seed)?;
            let got = newton_polish(grid, seed, TOL, &found);
            if let Ok(u) = got {
                if u.sup_norm() > DEDUP_SUP
                    && found.iter().all(|w| w.sup_distance(&u) > DEDUP_SUP)
                {
                    found.push(u);
                }
            }
        }
    }
    let mut states = vec![trivial];
    for u in found {
        let energy = evaluate_j(grid, &u)?;
        let residual = gradient_j(grid, &u)?.sup_norm();
        states.push(CrossSectionState {
            values: u,
            energy,
            residual,
            morse_tag: MorseTag::Excited, // retagged below
        });
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let min_energy = states.first().map(|s| s.energy).unwrap_or(0.0);
    for s in states.iter_mut() {
        if s.morse_tag == MorseTag::Trivial {
            continue;
        }
        s.morse_tag = if (s.energy - min_energy).abs() <= 1e-9 * min_energy.abs().max(1.0) {
            MorseTag::Ground
        } else {
            MorseTag::Excited
        };
    }
    let complete = states.len() >= expected.min(max_count);
    states.truncate(max_count);
    Ok(CriticalSet {
        states,
        expected_count: expected,
        complete,
    })
}

/// Axial sign changes of an interval profile, ignoring noise below 1e-9.
pub fn interior_sign_changes(state: &CrossSectionState) -> usize {
    sign_change_count(state.values.values(), 1e-9)
}

/// Linear resampling of an interval profile onto another interval grid of
/// the same length (used for cross-grid comparisons).
pub fn resample_interval(
    from: &CrossSectionGrid,
    field: &Field,
    to: &CrossSectionGrid,
) -> Result<Field> {
    match (from, to) {
        (
            CrossSectionGrid::Interval { length: l1, nodes: n1 },
            CrossSectionGrid::Interval { length: l2, nodes: n2 },
        ) => {
            if (l1 - l2).abs() > 1e-12 * l1.max(*l2) {
                return Err(Error::mismatch("interval lengths differ"));
            }
            let h1 = l1 / (*n1 as f64 - 1.0);
            let h2 = l2 / (*n2 as f64 - 1.0);
            let vals = field.values();
            let mut out = vec![0.0; *n2];
            for (i, o) in out.iter_mut().enumerate() {
                let y = i as f64 * h2;
                let t = (y / h1).min((*n1 - 1) as f64);
                let j = (t.floor() as usize).min(n1 - 2);
                let frac = t - j as f64;
                *o = vals[j] * (1.0 - frac) + vals[j + 1] * frac;
            }
            Ok(Field::from_values(out))
        }
        _ => Err(Error::config("resampling is defined for interval grids")),
    }
}
