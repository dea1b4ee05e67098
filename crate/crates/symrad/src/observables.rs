//! Readout of physical quantities from collective coordinate vectors.
//!
//! Every expectation value reduces to one pattern: expand the operator as a
//! product of collective transitions, apply that product to each diagonal
//! basis operator with the left-multiplication rule, and contract the
//! scattered targets with the coordinate vector under the multiplicity
//! weights of the trace functional. The diagonal sub-basis has only
//! C(N+s−1, s−1) elements, so readout is far cheaper than evolution.

use serde::Serialize;

use crate::algebra;
use crate::dynamics::{integrate, SolverConfig};
use crate::generator::Generator;
use crate::initial::regression_seed;
use crate::model::PairMatrix;
use crate::symindex::{Basis, Occ};
use crate::{C64, Error, Result};

/// tr{ρ X} for any collective X given by its coordinates.
pub fn trace_functional(basis: &Basis, x: &[C64]) -> C64 {
    basis
        .diagonal_subbasis()
        .iter()
        .map(|&i| {
            let m = basis.occupations_of(i).expect("diagonal index");
            basis.multiplicity(&m.n) * x[i.0]
        })
        .sum()
}

/// ⟨σ_{a₁b₁} σ_{a₂b₂} ···⟩ for a product of collective transition operators
/// (left to right in matrix-product order).
pub fn product_expectation(basis: &Basis, x: &[C64], ops: &[(usize, usize)]) -> C64 {
    // sequential on purpose: the diagonal sub-basis is small, and a fixed
    // summation order keeps repeated runs byte-identical
    let s = basis.levels;
    basis
        .diagonal_subbasis()
        .iter()
        .map(|&i| {
            let mut occ = Occ::from_elem(0, s * s);
            basis.unrank(i.0, &mut occ);
            let weight = basis.multiplicity(&occ);
            let mut t = algebra::unit(&occ);
            for &(a, b) in ops.iter().rev() {
                t = algebra::lmul(s, a, b, &t);
            }
            let val: C64 = t
                .into_iter()
                .map(|(target, w)| w * x[basis.rank(&target)])
                .sum();
            weight * val
        })
        .sum()
}

/// Level population ⟨Σ_j σ_ll^j⟩.
pub fn population(basis: &Basis, x: &[C64], l: usize) -> f64 {
    product_expectation(basis, x, &[(l, l)]).re
}

/// Collective polarization ⟨Σ_j σ_ll'^j⟩.
pub fn polarization(basis: &Basis, x: &[C64], l: usize, lp: usize) -> C64 {
    product_expectation(basis, x, &[(l, lp)])
}

/// Emitted intensity on one transition, split into the incoherent
/// single-atom part and the interatomic interference part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Intensity {
    pub individual: f64,
    pub collective: f64,
    pub total: f64,
}

/// I = Γ⟨Σ₊Σ₋⟩ on transition l→l'; the same-atom contribution is exactly
/// Γ⟨σ_ll⟩ because σ_ll'^j σ_l'l^j = σ_ll^j.
pub fn intensity(basis: &Basis, x: &[C64], l: usize, lp: usize, rate: f64) -> Intensity {
    let total = rate * product_expectation(basis, x, &[(l, lp), (lp, l)]).re;
    let individual = rate * population(basis, x, l);
    Intensity { individual, collective: total - individual, total }
}

/// Mean collective angular momentum and its uncertainties (two-level only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularMomentum {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub delta_jx: f64,
    pub delta_jy: f64,
    pub delta_jz: f64,
}

pub fn angular_momentum(basis: &Basis, x: &[C64]) -> Result<AngularMomentum> {
    if basis.levels != 2 {
        return Err(Error::Unsupported(
            "angular momentum is defined for two-level atoms".into(),
        ));
    }
    let c10 = polarization(basis, x, 1, 0);
    let p1 = population(basis, x, 1);
    let p0 = population(basis, x, 0);
    let jx = c10.re;
    let jy = c10.im;
    let jz = (p1 - p0) / 2.0;

    let pp = product_expectation(basis, x, &[(1, 0), (1, 0)]);
    let pm = product_expectation(basis, x, &[(1, 0), (0, 1)]);
    let mp = product_expectation(basis, x, &[(0, 1), (1, 0)]);
    let mm = product_expectation(basis, x, &[(0, 1), (0, 1)]);
    let jx2 = 0.25 * (pp + pm + mp + mm).re;
    let jy2 = -0.25 * (pp - pm - mp + mm).re;
    let uu = product_expectation(basis, x, &[(1, 1), (1, 1)]);
    let ud = product_expectation(basis, x, &[(1, 1), (0, 0)]);
    let dd = product_expectation(basis, x, &[(0, 0), (0, 0)]);
    let jz2 = 0.25 * (uu - 2.0 * ud + dd).re;

    let spread = |sq: f64, mean: f64| -> f64 {
        let var = sq - mean * mean;
        debug_assert!(var > -1e-8, "negative variance {var}");
        var.max(0.0).sqrt()
    };
    Ok(AngularMomentum {
        jx,
        jy,
        jz,
        delta_jx: spread(jx2, jx),
        delta_jy: spread(jy2, jy),
        delta_jz: spread(jz2, jz),
    })
}

/// All standard observables at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub populations: Vec<f64>,
    /// ⟨Σ_ll'⟩ for l > l', flattened in (l, l') order.
    pub polarizations: Vec<(usize, usize, C64)>,
    /// Per decaying transition, plus the sum over transitions in `emission`.
    pub intensities: Vec<(usize, usize, Intensity)>,
    pub emission: Intensity,
    pub angular: Option<AngularMomentum>,
}

pub fn record(
    basis: &Basis,
    x: &[C64],
    time: f64,
    gamma_collective: &PairMatrix<f64>,
) -> ObservableRecord {
    let s = basis.levels;
    let populations = (0..s).map(|l| population(basis, x, l)).collect();
    let mut polarizations = Vec::new();
    for l in 0..s {
        for lp in 0..l {
            polarizations.push((l, lp, polarization(basis, x, l, lp)));
        }
    }
    let mut intensities = Vec::new();
    let mut emission = Intensity { individual: 0.0, collective: 0.0, total: 0.0 };
    for (l, lp, rate) in gamma_collective.nonzero_pairs() {
        let i = intensity(basis, x, l, lp, rate);
        emission.individual += i.individual;
        emission.collective += i.collective;
        emission.total += i.total;
        intensities.push((l, lp, i));
    }
    let angular = if s == 2 { angular_momentum(basis, x).ok() } else { None };
    ObservableRecord { time, populations, polarizations, intensities, emission, angular }
}

/// Peak and width of an intensity trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseMetrics {
    pub peak_time: f64,
    pub peak_height: f64,
    pub fwhm: f64,
    /// Width of the Gaussian with the same area and peak height as the
    /// trace: ∫I dt / (I_max √(2π)).  Insensitive to the asymmetry of the
    /// tail, which inflates the half-maximum width.
    pub equivalent_duration: f64,
    /// False when the trace has no interior maximum or never falls to half
    /// height on both sides.
    pub is_pulse: bool,
}

pub fn pulse_metrics(times: &[f64], values: &[f64]) -> PulseMetrics {
    assert_eq!(times.len(), values.len());
    let (k, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty trace");
    let mut area = 0.0;
    for i in 1..times.len() {
        area += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
    }
    let equivalent_duration = area / (peak * (2.0 * std::f64::consts::PI).sqrt());
    if k == 0 || k == values.len() - 1 {
        return PulseMetrics {
            peak_time: times[k],
            peak_height: peak,
            fwhm: 0.0,
            equivalent_duration,
            is_pulse: false,
        };
    }
    // parabola through the three samples around the maximum
    let (t0, t1, t2) = (times[k - 1], times[k], times[k + 1]);
    let (v0, v1, v2) = (values[k - 1], peak, values[k + 1]);
    let denom = (t1 - t0) * (v1 - v2) - (t1 - t2) * (v1 - v0);
    let (peak_time, peak_height) = if denom.abs() < 1e-300 {
        (t1, v1)
    } else {
        let dt = 0.5 * ((t1 - t0).powi(2) * (v1 - v2) - (t1 - t2).powi(2) * (v1 - v0)) / denom;
        let tp = t1 - dt;
        // evaluate the parabola at its vertex
        let l0 = (tp - t1) * (tp - t2) / ((t0 - t1) * (t0 - t2));
        let l1 = (tp - t0) * (tp - t2) / ((t1 - t0) * (t1 - t2));
        let l2 = (tp - t0) * (tp - t1) / ((t2 - t0) * (t2 - t1));
        (tp, l0 * v0 + l1 * v1 + l2 * v2)
    };
    let half = peak_height / 2.0;
    let mut left = None;
    for i in (0..k).rev() {
        if values[i] <= half {
            let f = (half - values[i]) / (values[i + 1] - values[i]);
            left = Some(times[i] + f * (times[i + 1] - times[i]));
            break;
        }
    }
    let mut right = None;
    for i in k + 1..values.len() {
        if values[i] <= half {
            let f = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = Some(times[i - 1] + f * (times[i] - times[i - 1]));
            break;
        }
    }
    let equivalent_duration = area / (peak_height * (2.0 * std::f64::consts::PI).sqrt());
    match (left, right) {
        (Some(a), Some(b)) => PulseMetrics {
            peak_time,
            peak_height,
            fwhm: b - a,
            equivalent_duration,
            is_pulse: true,
        },
        _ => PulseMetrics {
            peak_time,
            peak_height,
            fwhm: 0.0,
            equivalent_duration,
            is_pulse: false,
        },
    }
}

/// Two-time correlation g_ll'(τ) = ⟨Σ_ll'(τ) Σ_l'l(0)⟩ about the state `x`,
/// via the regression theorem: the seed X Σ_l'l evolves under the same
/// generator, and the polarization readout is applied at each lag.
pub fn correlation(
    gen: &Generator,
    basis: &Basis,
    x: &[C64],
    l: usize,
    lp: usize,
    taus: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<C64>> {
    let seed = regression_seed(basis, x, l, lp);
    let mut g = vec![C64::new(0.0, 0.0); taus.len()];
    integrate(gen, &seed, taus, cfg, |i, _, y| {
        g[i] = product_expectation(basis, y, &[(l, lp)]);
    })?;
    Ok(g)
}

/// A steady-state emission spectrum on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    /// Lag horizon actually used for the transform.
    pub t_horizon: f64,
    /// True when the correlations had not decayed to the cutoff when the
    /// horizon limit was reached; the line shapes are then unreliable.
    pub truncated: bool,
}

/// Relative magnitude at which the correlation tail counts as decayed.
const CORRELATION_CUTOFF: f64 = 1e-6;

/// S(ω) = Σ_{l>l'} Γ_ll' Re ∫₀^T g_ll'(τ) e^{−iωτ} dτ by the trapezoid rule,
/// with T extended adaptively until every correlation has decayed.
pub fn emission_spectrum(
    gen: &Generator,
    basis: &Basis,
    x_steady: &[C64],
    gamma_collective: &PairMatrix<f64>,
    omegas: &[f64],
    cfg: &SolverConfig,
) -> Result<Spectrum> {
    let pairs = gamma_collective.nonzero_pairs();
    if pairs.is_empty() {
        return Err(Error::Validation("no decaying transition for the spectrum".into()));
    }
    let omega_max = omegas.iter().fold(0.0f64, |m, &w| m.max(w.abs())).max(1.0);
    let dt = std::f64::consts::PI / (20.0 * omega_max);
    let chunk = 512usize;
    let t_max = cfg.steady_t_max;

    let mut values = vec![0.0; omegas.len()];
    let mut t_horizon = 0.0f64;
    let mut truncated = false;
    for &(l, lp, rate) in &pairs {
        let mut seed = regression_seed(basis, x_steady, l, lp);
        let g0 = product_expectation(basis, &seed, &[(l, lp)]).norm();
        if g0 == 0.0 {
            continue;
        }
        let mut t_start = 0.0;
        let mut partial: Vec<C64> = vec![C64::new(0.0, 0.0); omegas.len()];
        loop {
            let taus: Vec<f64> =
                (0..=chunk).map(|i| t_start + i as f64 * dt).collect();
            let mut g = vec![C64::new(0.0, 0.0); taus.len()];
            seed = integrate(gen, &seed, &taus, cfg, |i, _, y| {
                g[i] = product_expectation(basis, y, &[(l, lp)]);
            })?;
            // trapezoid over this chunk; consecutive chunks share an
            // endpoint whose two half weights add up to full weight
            for (wi, &omega) in omegas.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (i, &tau) in taus.iter().enumerate() {
                    let term = g[i] * C64::from_polar(1.0, -omega * tau);
                    let weight = if i == 0 || i == taus.len() - 1 { 0.5 } else { 1.0 };
                    acc += weight * term;
                }
                partial[wi] += acc * dt;
            }
            t_start += chunk as f64 * dt;
            let tail = g[chunk].norm();
            if tail < CORRELATION_CUTOFF * g0 {
                break;
            }
            if t_start >= t_max {
                truncated = true;
                break;
            }
        }
        t_horizon = t_horizon.max(t_start);
        for (v, p) in values.iter_mut().zip(&partial) {
            *v += rate * p.re;
        }
    }
    Ok(Spectrum { omegas: omegas.to_vec(), values, t_horizon, truncated })
}
