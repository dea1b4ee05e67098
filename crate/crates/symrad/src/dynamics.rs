//! Adaptive time evolution of the collective coordinates.
//!
//! The workhorse is an explicit Runge-Kutta 5(4) pair with a fifth-order
//! continuous extension, so observables can be sampled on an arbitrary time
//! grid without constraining the step sequence. Steady states are reached by
//! marching in windows until the generator residual vanishes, with a direct
//! least-squares route as a cross-check at small dimensions.

use serde::{Deserialize, Serialize};

use crate::generator::{trace_vector, Generator, LinearRhs};
use crate::linalg;
use crate::symindex::Basis;
use crate::{C64, Error, Result};

/// Tolerances and limits for the integrator and steady-state search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Hard cap on the step size, if any.
    pub max_step: Option<f64>,
    /// Steady-state criterion: ‖L x‖∞ / (‖L‖∞ ‖x‖∞) below this value.
    pub steady_eps: f64,
    /// Duration of one steady-state marching window.
    pub steady_window: f64,
    /// Give up on the steady state beyond this time.
    pub steady_t_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            steady_eps: 1e-8,
            steady_window: 5.0,
            steady_t_max: 1e4,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// error weights (5th order minus embedded 4th order)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous-extension weights
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn lincomb(y: &[C64], ks: &[(&[C64], f64)], h: f64, out: &mut [C64]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, w) in ks {
            acc += *w * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// Scaled RMS error norm of the embedded difference.
fn error_norm(y0: &[C64], y1: &[C64], err: &[C64], rel: f64, abs: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..y0.len() {
        let sc = abs + rel * y0[i].norm().max(y1[i].norm());
        let e = err[i].norm() / sc;
        acc += e * e;
    }
    (acc / y0.len() as f64).sqrt()
}

/// Integrate dy/dt = rhs(t, y) from `times[0]`, invoking `on_sample` with
/// `(index, time, state)` at every entry of the ascending `times` grid
/// (including the first), and returning the state at the final time.
pub fn integrate<R: LinearRhs + ?Sized>(
    rhs: &R,
    y0: &[C64],
    times: &[f64],
    cfg: &SolverConfig,
    mut on_sample: impl FnMut(usize, f64, &[C64]),
) -> Result<Vec<C64>> {
    let n = y0.len();
    if times.is_empty() {
        return Ok(y0.to_vec());
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("sample times must be strictly increasing".into()));
    }
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    on_sample(0, t0, y0);
    let mut next_sample = 1;
    if next_sample >= times.len() {
        return Ok(y0.to_vec());
    }

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![C64::new(0.0, 0.0); n];
    rhs.apply(t, &y, &mut k1);
    let mut h = initial_step(rhs, &y, &k1, t0, t_end, cfg);
    let mut k2 = vec![C64::new(0.0, 0.0); n];
    let mut k3 = k2.clone();
    let mut k4 = k2.clone();
    let mut k5 = k2.clone();
    let mut k6 = k2.clone();
    let mut k7 = k2.clone();
    let mut stage = k2.clone();
    let mut y1 = k2.clone();
    let mut err = k2.clone();
    let mut rejected = false;

    while t < t_end {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h });
        }
        h = h.min(t_end - t);
        if let Some(hm) = cfg.max_step {
            h = h.min(hm);
        }

        lincomb(&y, &[(&k1, A21)], h, &mut stage);
        rhs.apply(t + C2 * h, &stage, &mut k2);
        lincomb(&y, &[(&k1, A31), (&k2, A32)], h, &mut stage);
        rhs.apply(t + C3 * h, &stage, &mut k3);
        lincomb(&y, &[(&k1, A41), (&k2, A42), (&k3, A43)], h, &mut stage);
        rhs.apply(t + C4 * h, &stage, &mut k4);
        lincomb(&y, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)], h, &mut stage);
        rhs.apply(t + C5 * h, &stage, &mut k5);
        lincomb(
            &y,
            &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)],
            h,
            &mut stage,
        );
        rhs.apply(t + h, &stage, &mut k6);
        lincomb(
            &y,
            &[(&k1, A71), (&k3, A73), (&k4, A74), (&k5, A75), (&k6, A76)],
            h,
            &mut y1,
        );
        rhs.apply(t + h, &y1, &mut k7);
        for i in 0..n {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                    + E7 * k7[i]);
        }
        let e = error_norm(&y, &y1, &err, cfg.rel_tol, cfg.abs_tol);

        if e <= 1.0 {
            // dense output for every sample time inside this step
            while next_sample < times.len() && times[next_sample] <= t + h + 1e-14 * h {
                let ts = times[next_sample].min(t + h);
                let theta = ((ts - t) / h).clamp(0.0, 1.0);
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    let rcont1 = y[i];
                    let rcont2 = ydiff;
                    let rcont3 = bspl;
                    let rcont4 = ydiff - h * k7[i] - bspl;
                    let rcont5 = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                    stage[i] = rcont1
                        + theta
                            * (rcont2
                                + (1.0 - theta)
                                    * (rcont3 + theta * (rcont4 + (1.0 - theta) * rcont5)));
                }
                on_sample(next_sample, times[next_sample], &stage);
                next_sample += 1;
            }
            t += h;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            let fac = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, if rejected { 1.0 } else { 5.0 })
            };
            h *= fac;
            rejected = false;
            if next_sample >= times.len() {
                break;
            }
        } else {
            h *= (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            rejected = true;
        }
    }
    Ok(y)
}

/// Hairer-style starting step-size guess.
fn initial_step<R: LinearRhs + ?Sized>(
    rhs: &R,
    y0: &[C64],
    f0: &[C64],
    t0: f64,
    t_end: f64,
    cfg: &SolverConfig,
) -> f64 {
    let n = y0.len() as f64;
    let sc = |y: &[C64], i: usize| cfg.abs_tol + cfg.rel_tol * y[i].norm();
    let d0 = (y0
        .iter()
        .enumerate()
        .map(|(i, v)| (v.norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = (f0
        .iter()
        .enumerate()
        .map(|(i, v)| (v.norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = y0.to_vec();
    for i in 0..y0.len() {
        y1[i] += h0 * f0[i];
    }
    let mut f1 = vec![C64::new(0.0, 0.0); y0.len()];
    rhs.apply(t0 + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b).norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let mut h = (100.0 * h0).min(h1).min(t_end - t0);
    if let Some(hm) = cfg.max_step {
        h = h.min(hm);
    }
    h
}

/// Evolve and store the state at every sample time.
pub fn evolve<R: LinearRhs + ?Sized>(
    rhs: &R,
    y0: &[C64],
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<Vec<C64>>> {
    let mut states = vec![Vec::new(); times.len()];
    integrate(rhs, y0, times, cfg, |i, _, y| states[i] = y.to_vec())?;
    Ok(states)
}

/// March the state in windows until the relative generator residual
/// ‖L x‖∞ / (‖L‖∞ ‖x‖∞) drops below `steady_eps`. Returns the state and the
/// final relative residual.
///
/// The residual is normalized by the operator norm because the reachable
/// floor is ‖L‖∞ times the integration error; an absolute criterion would
/// never be met for strongly scaled generators.
pub fn steady_state(
    gen: &Generator,
    x0: &[C64],
    cfg: &SolverConfig,
) -> Result<(Vec<C64>, f64)> {
    // the residual floor is set by the integration error, so march with
    // tolerances safely below the requested criterion
    let march_cfg = SolverConfig {
        rel_tol: cfg.rel_tol.min(0.01 * cfg.steady_eps),
        abs_tol: cfg.abs_tol.min(0.001 * cfg.steady_eps),
        ..cfg.clone()
    };
    let scale = gen.infinity_norm().max(1.0);
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut residual = f64::INFINITY;
    while t < cfg.steady_t_max {
        let t1 = t + cfg.steady_window;
        x = integrate(gen, &x, &[t, t1], &march_cfg, |_, _, _| {})?;
        t = t1;
        let lx = gen.apply(&x);
        let num = lx.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let den = x.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        residual = num / (scale * den);
        if residual < cfg.steady_eps {
            return Ok((x, residual));
        }
    }
    Err(Error::NonConvergence { residual })
}

/// Direct steady-state solve: the null vector of L normalized by the trace
/// functional, from the least-squares system stacking L over the trace row.
/// Dense in the basis dimension, so only viable at small sizes.
pub fn steady_state_direct(gen: &Generator, basis: &Basis) -> Result<Vec<C64>> {
    let dim = gen.dim;
    if dim > 4000 {
        return Err(Error::Capacity(format!(
            "direct steady-state solve is dense; dimension {dim} is too large"
        )));
    }
    let m = dim + 1;
    let mut a = vec![C64::new(0.0, 0.0); m * dim];
    for (i, j, v) in gen.entries() {
        a[i * dim + j] = v;
    }
    let w = trace_vector(basis);
    let w_max = w.iter().cloned().fold(0.0, f64::max).max(1e-300);
    // scale the trace row towards the magnitude of the generator rows
    let row_scale = gen.infinity_norm().max(1.0) / w_max;
    for (j, &wj) in w.iter().enumerate() {
        a[dim * dim + j] = C64::new(wj * row_scale, 0.0);
    }
    let mut b = vec![C64::new(0.0, 0.0); m];
    b[dim] = C64::new(row_scale, 0.0);
    linalg::least_squares_in_place(&mut a, &mut b, m, dim)
}

/// Direct steady-state solve restricted to the phase-balanced sector.
///
/// Without a coherent drive the generator commutes with every diagonal
/// phase rotation of the single-atom basis, so it never mixes classes with
/// different row/column-sum imbalances of the occupation matrix, and the
/// unique steady state is supported on the balanced classes (every row sum
/// equals the matching column sum). That sector is far smaller than the
/// full basis — (N/2+1)² for two-level atoms — which keeps the dense solve
/// viable at atom numbers where marching to stationarity is slow.
///
/// Fails if the generator couples a balanced class to an unbalanced one
/// (as any drive does) or the sector exceeds the dense-solve capacity.
pub fn steady_state_balanced(gen: &Generator, basis: &Basis) -> Result<Vec<C64>> {
    let s = basis.levels;
    let mut occ = vec![0u16; s * s];
    let mut sub_of = vec![usize::MAX; basis.dim];
    let mut subset = Vec::new();
    for m in 0..basis.dim {
        basis.unrank(m, &mut occ);
        let balanced = (0..s).all(|l| {
            let row: u32 = (0..s).map(|k| occ[l * s + k] as u32).sum();
            let col: u32 = (0..s).map(|k| occ[k * s + l] as u32).sum();
            row == col
        });
        if balanced {
            sub_of[m] = subset.len();
            subset.push(m);
        }
    }
    let dim = subset.len();
    if dim > 4000 {
        return Err(Error::Capacity(format!(
            "balanced sector of dimension {dim} is too large for a dense solve"
        )));
    }
    let rows = dim + 1;
    let mut a = vec![C64::new(0.0, 0.0); rows * dim];
    let leak_tol = 1e-12 * gen.infinity_norm().max(1.0);
    for (i, j, v) in gen.entries() {
        let js = sub_of[j];
        if js == usize::MAX {
            continue;
        }
        let is = sub_of[i];
        if is == usize::MAX {
            if v.norm() > leak_tol {
                return Err(Error::Unsupported(
                    "the generator couples balanced to unbalanced classes \
                     (coherent drive present); use the marching solver"
                        .into(),
                ));
            }
            continue;
        }
        a[is * dim + js] = v;
    }
    let w = trace_vector(basis);
    let w_max = w.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let row_scale = gen.infinity_norm().max(1.0) / w_max;
    for (js, &m) in subset.iter().enumerate() {
        a[dim * dim + js] = C64::new(w[m] * row_scale, 0.0);
    }
    let mut b = vec![C64::new(0.0, 0.0); rows];
    b[dim] = C64::new(row_scale, 0.0);
    let sub_x = linalg::least_squares_in_place(&mut a, &mut b, rows, dim)?;
    let mut x = vec![C64::new(0.0, 0.0); basis.dim];
    for (js, &m) in subset.iter().enumerate() {
        x[m] = sub_x[js];
    }
    Ok(x)
}
