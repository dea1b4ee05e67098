//! Least-squares fitting of spectra and scaling laws.

use serde::Serialize;

use crate::linalg::solve_real;
use crate::{Error, Result};

/// Sum of two Lorentzian lines a (w/2)² / ((ω−c)² + (w/2)²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLorentzianFit {
    pub amplitude: [f64; 2],
    pub center: [f64; 2],
    pub width: [f64; 2],
    pub converged: bool,
    /// True when the two lines overlap so strongly that the decomposition is
    /// not meaningful (single-peak spectra fall in this category).
    pub degenerate: bool,
    pub residual_norm: f64,
}

fn lorentzian(omega: f64, a: f64, c: f64, w: f64) -> f64 {
    let hw2 = (w / 2.0) * (w / 2.0);
    a * hw2 / ((omega - c).powi(2) + hw2)
}

fn model(omega: f64, p: &[f64; 6]) -> f64 {
    lorentzian(omega, p[0], p[1], p[2]) + lorentzian(omega, p[3], p[4], p[5])
}

fn jacobian_row(omega: f64, p: &[f64; 6]) -> [f64; 6] {
    let mut row = [0.0; 6];
    for i in 0..2 {
        let (a, c, w) = (p[3 * i], p[3 * i + 1], p[3 * i + 2]);
        let hw2 = (w / 2.0) * (w / 2.0);
        let d2 = (omega - c).powi(2);
        let den = d2 + hw2;
        row[3 * i] = hw2 / den;
        row[3 * i + 1] = a * hw2 * 2.0 * (omega - c) / (den * den);
        // d/dw of a hw2/(d2 + hw2) = a * (w/2) * d2 / den^2
        row[3 * i + 2] = a * (w / 2.0) * d2 / (den * den);
    }
    row
}

/// Crude two-peak detection for the starting point: the global maximum, and
/// the largest sample well outside its half-width neighborhood.
fn initial_guess(omegas: &[f64], values: &[f64]) -> [f64; 6] {
    let n = values.len();
    let (k1, &v1) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let half = v1 / 2.0;
    let mut lo = omegas[0];
    for i in (0..k1).rev() {
        if values[i] <= half {
            lo = omegas[i];
            break;
        }
    }
    let mut hi = omegas[n - 1];
    for i in k1 + 1..n {
        if values[i] <= half {
            hi = omegas[i];
            break;
        }
    }
    let w1 = (hi - lo).max((omegas[n - 1] - omegas[0]) / n as f64);
    let c1 = omegas[k1];
    let mut k2 = None;
    let mut v2 = 0.0;
    for i in 0..n {
        if (omegas[i] - c1).abs() > 1.5 * w1 && values[i] > v2 {
            v2 = values[i];
            k2 = Some(i);
        }
    }
    match k2 {
        Some(k) if v2 > 0.05 * v1 => [v1, c1, w1, v2, omegas[k], w1],
        // no resolvable second line: start both on the main peak
        _ => [v1 / 2.0, c1 - w1 / 4.0, w1, v1 / 2.0, c1 + w1 / 4.0, w1],
    }
}

/// Levenberg-Marquardt fit of two Lorentzians to a sampled spectrum.
pub fn fit_two_lorentzians(omegas: &[f64], values: &[f64]) -> Result<TwoLorentzianFit> {
    if omegas.len() != values.len() || omegas.len() < 8 {
        return Err(Error::Validation("need at least 8 spectrum samples".into()));
    }
    let mut p = initial_guess(omegas, values);
    let cost = |p: &[f64; 6]| -> f64 {
        omegas
            .iter()
            .zip(values)
            .map(|(&w, &y)| (model(w, p) - y).powi(2))
            .sum()
    };
    let mut lambda = 1e-3;
    let mut c = cost(&p);
    let mut converged = false;
    for _ in 0..200 {
        // normal equations J^T J + lambda diag(J^T J)
        let mut jtj = [[0.0f64; 6]; 6];
        let mut jtr = [0.0f64; 6];
        for (&w, &y) in omegas.iter().zip(values) {
            let row = jacobian_row(w, &p);
            let r = model(w, &p) - y;
            for i in 0..6 {
                jtr[i] += row[i] * r;
                for j in 0..6 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = [0.0f64; 36];
            let mut b = [0.0f64; 6];
            for i in 0..6 {
                for j in 0..6 {
                    a[i * 6 + j] = jtj[i][j];
                }
                a[i * 6 + i] += lambda * jtj[i][i].max(1e-12);
                b[i] = -jtr[i];
            }
            let Ok(step) = solve_real(&mut a, &mut b, 6) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for i in 0..6 {
                trial[i] += step[i];
            }
            let ct = cost(&trial);
            if ct < c {
                let rel = (c - ct) / c.max(1e-300);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let (a1, c1, w1) = (p[0], p[1], p[2].abs());
    let (a2, c2, w2) = (p[3], p[4], p[5].abs());
    let degenerate =
        (c1 - c2).abs() < 0.25 * (w1 + w2) || a1 < 1e-3 * a2 || a2 < 1e-3 * a1;
    Ok(TwoLorentzianFit {
        amplitude: [a1, a2],
        center: [c1, c2],
        width: [w1, w2],
        converged,
        degenerate,
        residual_norm: c.sqrt(),
    })
}

/// Ordinary polynomial least squares, lowest power first.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = degree + 1;
    if x.len() != y.len() || x.len() < n {
        return Err(Error::Validation("not enough points for the polynomial".into()));
    }
    let mut ata = vec![0.0f64; n * n];
    let mut atb = vec![0.0f64; n];
    for (&xi, &yi) in x.iter().zip(y) {
        let mut powers = vec![1.0; n];
        for k in 1..n {
            powers[k] = powers[k - 1] * xi;
        }
        for i in 0..n {
            atb[i] += powers[i] * yi;
            for j in 0..n {
                ata[i * n + j] += powers[i] * powers[j];
            }
        }
    }
    solve_real(&mut ata, &mut atb, n)
}

/// Straight-line fit returning (slope, intercept, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let c = polyfit(x, y, 1)?;
    let (intercept, slope) = (c[0], c[1]);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|&v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - slope * xi - intercept).powi(2))
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, intercept, r2))
}
