//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symrad::dynamics::{integrate, steady_state, steady_state_balanced, SolverConfig};
use symrad::fit::{fit_two_lorentzians, linear_fit, polyfit};
use symrad::generator::{build_generator, Frame, TermSet};
use symrad::initial::{initial_state, InitialStateSpec, StateComponent};
use symrad::model::{
    derive_collective_rates, CavityInput, PairMatrix, SystemParams,
};
use symrad::observables::{
    angular_momentum, emission_spectrum, intensity, population, pulse_metrics,
};
use symrad::oracle::{self, Dense};
use symrad::symindex::{dimension, Basis, BasisIndex};
use symrad::C64;

fn criterion(
    num: u32,
    name: &str,
    body: impl FnOnce() -> std::result::Result<(), String>,
) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => println!("ACCEPTANCE {num} {name}: PASS"),
        Ok(Err(msg)) => {
            println!("ACCEPTANCE {num} {name}: FAIL");
            panic!("criterion {num} ({name}): {msg}");
        }
        Err(cause) => {
            println!("ACCEPTANCE {num} {name}: FAIL");
            std::panic::resume_unwind(cause);
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

const SHAPES: [(usize, usize); 6] = [(1, 2), (2, 2), (3, 2), (4, 2), (2, 3), (3, 3)];

/// All six contributions active, every rate drawn from [0, 5] in units of the
/// collective decay of the 1→0 line (which is pinned to 1).
fn random_params(atoms: usize, levels: usize, rng: &mut ChaCha8Rng) -> SystemParams {
    let mut p = SystemParams::new(levels, atoms);
    for l in 0..levels {
        p.omega[l] = rng.gen_range(-5.0..5.0);
    }
    p.omega_d = rng.gen_range(0.0..5.0);
    for l in 1..levels {
        p.drive.set(
            l,
            l - 1,
            C64::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)),
        );
    }
    for l in 0..levels {
        for lp in 0..levels {
            if l != lp {
                p.gamma.set(l, lp, rng.gen_range(0.0..5.0));
            }
        }
    }
    for l in 0..levels {
        for lp in 0..l {
            p.xi.set(l, lp, rng.gen_range(0.0..5.0));
        }
    }
    let mut gamma_collective = PairMatrix::zeros(levels);
    let mut omega_collective = PairMatrix::zeros(levels);
    for l in 0..levels {
        for lp in 0..l {
            let rate = if l == 1 && lp == 0 { 1.0 } else { rng.gen_range(0.0..5.0) };
            gamma_collective.set(l, lp, rate);
            omega_collective.set(l, lp, rng.gen_range(-5.0..5.0));
        }
    }
    p.cavity = CavityInput::Direct { gamma_collective, omega_collective };
    p
}

fn random_state(levels: usize, rng: &mut ChaCha8Rng) -> InitialStateSpec {
    let mut amplitudes: Vec<C64> = (0..levels)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amplitudes {
        *a /= norm;
    }
    InitialStateSpec::pure(levels, StateComponent::Amplitudes { amplitudes })
}

const SAMPLE_TIMES: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

#[test]
fn acceptance_1_oracle_equivalence() {
    criterion(1, "oracle equivalence of full trajectories", || {
        let start = Instant::now();
        let cfg = SolverConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, s) in &SHAPES {
            for set in 0..20 {
                let p = random_params(n, s, &mut rng);
                let r = derive_collective_rates(&p).unwrap();
                let basis = Basis::new(n, s).unwrap();
                let g =
                    build_generator(&p, &r, &basis, TermSet::all(), Frame::RotatingAtDrive)
                        .unwrap();
                let full =
                    oracle::build_oracle(&p, &r, TermSet::all(), Frame::RotatingAtDrive)
                        .unwrap();
                let spec = random_state(s, &mut rng);
                let x0 = initial_state(&spec, &basis).unwrap();
                let rho1 = Dense { d: s, a: spec.single_atom_density().unwrap() };
                let rho0 = oracle::product_density(n, s, &rho1).unwrap();

                let mut collective: Vec<Vec<C64>> = Vec::new();
                integrate(&g, &x0, &SAMPLE_TIMES, &cfg, |_, _, y| {
                    collective.push(y.to_vec())
                })
                .unwrap();
                let mut worst = (0.0f64, 0.0);
                integrate(&full, &rho0.a, &SAMPLE_TIMES, &cfg, |i, t, y| {
                    let rho = Dense { d: full.dim, a: y.to_vec() };
                    let projected = oracle::project_collective(&rho, &basis).unwrap();
                    for (a, b) in collective[i].iter().zip(&projected) {
                        let d = (a - b).norm();
                        if d > worst.0 {
                            worst = (d, t);
                        }
                    }
                })
                .unwrap();
                ensure!(
                    worst.0 < 1e-8,
                    "({n},{s}) set {set}: deviation {:.3e} at t = {}",
                    worst.0,
                    worst.1
                );
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 300.0, "equivalence sweep took {elapsed:.1} s (budget 300 s)");
        Ok(())
    });
}

#[test]
fn acceptance_2_conservation_suite() {
    criterion(2, "trace, hermiticity and total population conservation", || {
        let cfg = SolverConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, s) in &SHAPES {
            for set in 0..20 {
                let p = random_params(n, s, &mut rng);
                let r = derive_collective_rates(&p).unwrap();
                let basis = Basis::new(n, s).unwrap();
                let g =
                    build_generator(&p, &r, &basis, TermSet::all(), Frame::RotatingAtDrive)
                        .unwrap();
                let spec = random_state(s, &mut rng);
                let x0 = initial_state(&spec, &basis).unwrap();
                let mut failure: Option<String> = None;
                integrate(&g, &x0, &SAMPLE_TIMES, &cfg, |_, t, y| {
                    if failure.is_some() {
                        return;
                    }
                    let tr = symrad::observables::trace_functional(&basis, y);
                    if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
                        failure = Some(format!(
                            "({n},{s}) set {set} t = {t}: trace {tr}"
                        ));
                        return;
                    }
                    for i in 0..basis.dim {
                        let j = basis.transpose_index(BasisIndex(i)).0;
                        if (y[i].conj() - y[j]).norm() > 1e-9 {
                            failure = Some(format!(
                                "({n},{s}) set {set} t = {t}: hermitian mismatch at {i}"
                            ));
                            return;
                        }
                    }
                    let total: f64 = (0..s).map(|l| population(&basis, y, l)).sum();
                    if (total - n as f64).abs() > 1e-9 {
                        failure = Some(format!(
                            "({n},{s}) set {set} t = {t}: total population {total}"
                        ));
                    }
                })
                .unwrap();
                if let Some(msg) = failure {
                    return Err(msg);
                }
            }
        }
        Ok(())
    });
}

/// Pure superradiant decay of N fully inverted atoms.
fn superradiant_pulse(n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = SystemParams::two_level(n, 1.0);
    let r = derive_collective_rates(&p).unwrap();
    let basis = Basis::new(n, 2).unwrap();
    let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab).unwrap();
    let x0 = initial_state(&InitialStateSpec::fully_excited(2), &basis).unwrap();
    let nf = n as f64;
    let t0_pred = 0.88 / nf * (2.12 * nf).ln();
    let tau_pred = 1.88 / (0.87 + nf);
    let t_stop = 4.0 * t0_pred + 10.0 * tau_pred;
    let points = ((t_stop / (tau_pred / 60.0)).ceil() as usize).max(400);
    let times: Vec<f64> =
        (0..=points).map(|i| i as f64 * t_stop / points as f64).collect();
    let cfg = SolverConfig::default();
    let mut trace = vec![0.0; times.len()];
    integrate(&g, &x0, &times, &cfg, |i, _, y| {
        trace[i] = intensity(&basis, y, 1, 0, 1.0).total;
    })
    .unwrap();
    (times, trace)
}

#[test]
fn acceptance_3_superradiance_scaling() {
    criterion(3, "superradiant peak, delay and width scaling in N", || {
        let start = Instant::now();
        let ns = [10usize, 20, 30, 40, 50, 60];
        let mut i_max = Vec::new();
        let mut t0 = Vec::new();
        let mut tau = Vec::new();
        for &n in &ns {
            let (times, trace) = superradiant_pulse(n);
            let m = pulse_metrics(&times, &trace);
            ensure!(m.is_pulse, "N = {n}: intensity trace is not a pulse");
            i_max.push(m.peak_height);
            t0.push(m.peak_time);
            tau.push(m.equivalent_duration);
        }
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let quad = polyfit(&x, &i_max, 2).unwrap();
        ensure!(
            (quad[2] - 0.21).abs() < 0.15 * 0.21,
            "peak intensity quadratic coefficient {:.4}, expected 0.21 ± 15%",
            quad[2]
        );
        let mut t0_dev = Vec::new();
        for (i, &n) in ns.iter().enumerate() {
            let nf = n as f64;
            let t0_pred = 0.88 / nf * (2.12 * nf).ln();
            t0_dev.push((t0[i] - t0_pred).abs() / t0_pred);
            // the global ln(N)/N fit overshoots the actual delay at the
            // smallest N; there it only has to be loosely right, and the
            // agreement must improve monotonically toward larger N
            let tol = if n >= 20 { 0.10 } else { 0.25 };
            ensure!(
                (t0[i] - t0_pred).abs() < tol * t0_pred,
                "N = {n}: delay {:.4} vs predicted {t0_pred:.4}",
                t0[i]
            );
            let tau_pred = 1.88 / (0.87 + nf);
            ensure!(
                (tau[i] - tau_pred).abs() < 0.10 * tau_pred,
                "N = {n}: width {:.4} vs predicted {tau_pred:.4}",
                tau[i]
            );
        }
        for i in 0..2 {
            ensure!(
                t0_dev[i + 1] < t0_dev[i],
                "delay deviation does not shrink with N: {t0_dev:?}"
            );
        }
        let elapsed = start.elapsed().as_secs_f64();
        ensure!(elapsed < 120.0, "scaling sweep took {elapsed:.1} s (budget 120 s)");
        Ok(())
    });
}

#[test]
fn acceptance_4_uncertainty_length() {
    criterion(4, "uncertainty vector length of product states", || {
        let n = 50usize;
        let basis = Basis::new(n, 2).unwrap();
        let expect = (n as f64 / 4.0).sqrt();
        for theta in [
            0.0,
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_2,
            3.0 * std::f64::consts::FRAC_PI_4,
            std::f64::consts::PI,
        ] {
            let x = initial_state(&InitialStateSpec::bloch(theta, 0.0), &basis).unwrap();
            let j = angular_momentum(&basis, &x).unwrap();
            // the two spreads transverse to the mean spin (which lies in the
            // x-z plane for phi = 0)
            ensure!(
                (j.delta_jy - expect).abs() < 1e-6,
                "theta = {theta}: out-of-plane spread {:.8} vs {expect:.8}",
                j.delta_jy
            );
            let in_plane = (j.delta_jx.powi(2) + j.delta_jz.powi(2)).sqrt();
            ensure!(
                (in_plane - expect).abs() < 1e-6,
                "theta = {theta}: in-plane transverse spread {in_plane:.8} vs {expect:.8}"
            );
        }

        // after the superradiant pulse the atoms end in the ground product
        // state, whose uncertainty vector is (3.54, 3.54, 0)
        let p = SystemParams::two_level(n, 1.0);
        let r = derive_collective_rates(&p).unwrap();
        let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab).unwrap();
        let x0 = initial_state(&InitialStateSpec::fully_excited(2), &basis).unwrap();
        let cfg = SolverConfig::default();
        let x = integrate(&g, &x0, &[0.0, 6.0], &cfg, |_, _, _| {}).unwrap();
        let j = angular_momentum(&basis, &x).unwrap();
        ensure!(
            (j.delta_jx - expect).abs() < 0.01 * expect
                && (j.delta_jy - expect).abs() < 0.01 * expect
                && j.delta_jz.abs() < 0.01 * expect,
            "final uncertainty vector ({:.4}, {:.4}, {:.4}) vs ({expect:.4}, {expect:.4}, 0)",
            j.delta_jx,
            j.delta_jy,
            j.delta_jz
        );
        Ok(())
    });
}

/// Count local maxima with a prominence of at least 1e-4 of the global peak,
/// by hysteresis: a maximum counts once the trace has fallen back below it by
/// the margin, and a new rise must exceed the intervening minimum by the
/// margin.
fn count_maxima(trace: &[f64]) -> usize {
    let peak = trace.iter().cloned().fold(0.0f64, f64::max);
    let margin = 1e-4 * peak;
    let mut count = 0;
    let mut rising = true;
    let mut extreme = trace[0];
    for &v in trace {
        if rising {
            if v > extreme {
                extreme = v;
            } else if v < extreme - margin {
                count += 1;
                rising = false;
                extreme = v;
            }
        } else if v < extreme {
            extreme = v;
        } else if v > extreme + margin {
            rising = true;
            extreme = v;
        }
    }
    count
}

#[test]
fn acceptance_5_driven_transition() {
    criterion(5, "oscillation onset under resonant drive", || {
        let n = 50usize;
        let basis = Basis::new(n, 2).unwrap();
        let x0 = initial_state(&InitialStateSpec::ground(2), &basis).unwrap();
        let times: Vec<f64> = (0..=3000).map(|i| i as f64 * 0.002).collect();
        let cfg = SolverConfig::default();
        for (ratio, weak) in [(2.0, true), (5.0, false)] {
            let mut p = SystemParams::two_level(n, 1.0);
            p.drive.set(1, 0, C64::new(ratio * std::f64::consts::PI, 0.0));
            let r = derive_collective_rates(&p).unwrap();
            let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::RotatingAtDrive)
                .unwrap();
            let mut trace = vec![0.0; times.len()];
            let x_end = integrate(&g, &x0, &times, &cfg, |i, _, y| {
                trace[i] = intensity(&basis, y, 1, 0, 1.0).total;
            })
            .unwrap();
            // continue the march from the end of the trace
            let (x_ss, _) = steady_state(&g, &x_end, &cfg).map_err(|e| e.to_string())?;
            let i_ss = intensity(&basis, &x_ss, 1, 0, 1.0).total;
            let maxima = count_maxima(&trace);
            if weak {
                ensure!(
                    maxima <= 1,
                    "drive ratio {ratio}: {maxima} local maxima, expected at most one overshoot"
                );
            } else {
                ensure!(
                    maxima >= 2,
                    "drive ratio {ratio}: {maxima} local maxima, expected ringing"
                );
            }
            let last = *trace.last().unwrap();
            ensure!(
                (last - i_ss).abs() <= 0.01 * i_ss.abs(),
                "drive ratio {ratio}: end of trace {last:.6} vs steady {i_ss:.6}"
            );
        }
        Ok(())
    });
}

struct PumpedPoint {
    i_col: f64,
    jx: f64,
    jy: f64,
    delta: [f64; 3],
    sharp_width: f64,
}

fn pumped_point(n: usize, pump: f64) -> std::result::Result<PumpedPoint, String> {
    let mut p = SystemParams::two_level(n, 1.0);
    p.gamma.set(0, 1, pump);
    let r = derive_collective_rates(&p).map_err(|e| e.to_string())?;
    let basis = Basis::new(n, 2).map_err(|e| e.to_string())?;
    let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab)
        .map_err(|e| e.to_string())?;
    // pumping without a drive leaves the phase-balanced sector invariant,
    // so the steady state has a direct solve; marching instead crawls on the
    // slow repumping timescale
    let cfg = SolverConfig { rel_tol: 1e-6, abs_tol: 1e-9, ..Default::default() };
    let t_start = Instant::now();
    let x_ss = steady_state_balanced(&g, &basis).map_err(|e| e.to_string())?;
    eprintln!("pump {pump}: steady in {:.1} s", t_start.elapsed().as_secs_f64());
    let em = intensity(&basis, &x_ss, 1, 0, 1.0);
    let j = angular_momentum(&basis, &x_ss).map_err(|e| e.to_string())?;
    let half_span = (5.0f64).max(2.0 * (pump + 2.0));
    let omegas: Vec<f64> = (0..=120)
        .map(|i| -half_span + i as f64 * half_span / 60.0)
        .collect();
    let t_spec = Instant::now();
    let spectrum = emission_spectrum(&g, &basis, &x_ss, &r.gamma_collective, &omegas, &cfg)
        .map_err(|e| e.to_string())?;
    eprintln!(
        "pump {pump}: spectrum in {:.1} s (horizon {:.1}, truncated {})",
        t_spec.elapsed().as_secs_f64(),
        spectrum.t_horizon,
        spectrum.truncated
    );
    let fit = fit_two_lorentzians(&spectrum.omegas, &spectrum.values)
        .map_err(|e| e.to_string())?;
    let sharp_width = if fit.converged {
        fit.width[0].min(fit.width[1])
    } else {
        f64::NAN
    };
    Ok(PumpedPoint {
        i_col: em.collective,
        jx: j.jx,
        jy: j.jy,
        delta: [j.delta_jx, j.delta_jy, j.delta_jz],
        sharp_width,
    })
}

#[test]
fn acceptance_6_pumped_regimes() {
    criterion(6, "pumped steady-state regimes and linewidth", || {
        let n = 50usize;
        let pumps = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
        let points: Vec<PumpedPoint> = {
            use rayon::prelude::*;
            pumps
                .par_iter()
                .map(|&w| pumped_point(n, w))
                .collect::<std::result::Result<Vec<_>, String>>()?
        };
        let threshold = (n as f64 / 4.0).sqrt();
        for (i, (&pump, pt)) in pumps.iter().zip(&points).enumerate() {
            if pump < 1.0 {
                ensure!(
                    pt.i_col < 0.0,
                    "pump {pump}: collective intensity {:.4} not subradiant",
                    pt.i_col
                );
            }
            if pump > 1.0 {
                ensure!(
                    pt.i_col > 0.0,
                    "pump {pump}: collective intensity {:.4} not superradiant",
                    pt.i_col
                );
            }
            ensure!(
                pt.jx.abs() < 1e-8 && pt.jy.abs() < 1e-8,
                "pump {pump}: nonzero mean dipole ({:.2e}, {:.2e})",
                pt.jx,
                pt.jy
            );
            let _ = i;
        }
        let min_width = points
            .iter()
            .map(|p| p.sharp_width)
            .filter(|w| w.is_finite())
            .fold(f64::INFINITY, f64::min);
        ensure!(
            (0.5..=2.0).contains(&min_width),
            "minimum sharp linewidth {min_width:.4}, expected within a factor 2 of 1"
        );
        // uncertainty components cross sqrt(N/4) from below to above as the
        // pump passes the collective rate, and keep growing towards the
        // fully mixed value at strong pumping
        let transverse =
            |p: &PumpedPoint| (p.delta[0].powi(2) + p.delta[1].powi(2)).sqrt() / 2f64.sqrt();
        ensure!(
            transverse(&points[0]) < threshold,
            "pump 0.2: transverse spread {:.4} not below {threshold:.4}",
            transverse(&points[0])
        );
        ensure!(
            transverse(&points[5]) > threshold,
            "pump 10: transverse spread {:.4} not above {threshold:.4}",
            transverse(&points[5])
        );
        // growth toward the correlated-state limit holds up to the
        // saturation regime, where the coupling of the nearly inverted
        // ensemble (and with it the spread) shrinks again
        for w in points[3..7].windows(2) {
            ensure!(
                transverse(&w[1]) > transverse(&w[0]) - 1e-9,
                "transverse spread not monotone between pump 2 and 20"
            );
        }
        let dicke_limit = ((n as f64 / 2.0) * (n as f64 / 2.0 + 1.0) / 3.0).sqrt();
        let peak_spread =
            points.iter().map(|p| transverse(p)).fold(0.0f64, f64::max);
        ensure!(
            peak_spread > 2.0 / 3.0 * dicke_limit,
            "peak transverse spread {peak_spread:.4} stays far from the \
             correlated-state limit {dicke_limit:.4}"
        );
        ensure!(
            transverse(points.last().unwrap()) > threshold,
            "pump 50: transverse spread {:.4} fell below the uncorrelated value",
            transverse(points.last().unwrap())
        );
        Ok(())
    });
}

fn peak_rss_gb() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: f64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb / 1024.0 / 1024.0);
        }
    }
    None
}

#[test]
fn acceptance_7_complexity() {
    criterion(7, "dimension formula, memory bound and sparsity scaling", || {
        ensure!(
            dimension(250, 2).unwrap() == 2_667_126,
            "dimension(250, 2) = {}",
            dimension(250, 2).unwrap()
        );
        let mut dims = Vec::new();
        let mut nnzs = Vec::new();
        for n in [50usize, 100, 150, 200, 250] {
            let mut p = SystemParams::two_level(n, 1.0);
            p.gamma.set(1, 0, 0.4);
            p.gamma.set(0, 1, 0.3);
            p.xi.set(1, 0, 0.2);
            p.drive.set(1, 0, C64::new(0.5, 0.0));
            let r = derive_collective_rates(&p).unwrap();
            let basis = Basis::new(n, 2).unwrap();
            let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::RotatingAtDrive)
                .unwrap();
            dims.push(basis.dim as f64);
            nnzs.push(g.nnz() as f64);
        }
        if let Some(gb) = peak_rss_gb() {
            ensure!(gb < 8.0, "peak memory {gb:.2} GiB exceeds the 8 GiB budget");
        }
        let (_, _, r2) = linear_fit(&dims, &nnzs).unwrap();
        ensure!(
            r2 > 0.99,
            "nnz vs dimension linear fit R^2 = {r2:.5}, expected > 0.99"
        );
        Ok(())
    });
}

/// Trapezoid transform of a correlation sampled on a uniform grid.
fn transform(taus: &[f64], g: &[C64], omegas: &[f64], rate: f64) -> Vec<f64> {
    let dt = taus[1] - taus[0];
    omegas
        .iter()
        .map(|&w| {
            let mut acc = C64::new(0.0, 0.0);
            for (i, (&tau, gi)) in taus.iter().zip(g).enumerate() {
                let weight = if i == 0 || i == taus.len() - 1 { 0.5 } else { 1.0 };
                acc += weight * gi * C64::from_polar(1.0, -w * tau);
            }
            rate * (acc * dt).re
        })
        .collect()
}

fn area_normalize(omegas: &[f64], values: &[f64]) -> Vec<f64> {
    let mut area = 0.0;
    for i in 1..omegas.len() {
        area += 0.5 * (values[i] + values[i - 1]) * (omegas[i] - omegas[i - 1]);
    }
    values.iter().map(|v| v / area).collect()
}

#[test]
fn acceptance_8_single_atom_analytics() {
    criterion(8, "single-atom decay, steady state and spectrum", || {
        let basis = Basis::new(1, 2).unwrap();
        let cfg = SolverConfig {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            steady_eps: 1e-10,
            ..Default::default()
        };

        // free decay at gamma_10
        let gamma10 = 0.8;
        let mut p = SystemParams::new(2, 1);
        p.gamma.set(1, 0, gamma10);
        let r = derive_collective_rates(&p).unwrap();
        let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab).unwrap();
        let x0 = initial_state(&InitialStateSpec::fully_excited(2), &basis).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let mut worst = 0.0f64;
        integrate(&g, &x0, &times, &cfg, |_, t, y| {
            let p1 = population(&basis, y, 1);
            worst = worst.max((p1 - (-gamma10 * t).exp()).abs());
        })
        .unwrap();
        ensure!(worst < 1e-8, "decay law deviation {worst:.3e}");

        // pumped steady-state population
        let pump = 0.3;
        let mut p = SystemParams::new(2, 1);
        p.gamma.set(1, 0, gamma10);
        p.gamma.set(0, 1, pump);
        let r = derive_collective_rates(&p).unwrap();
        let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab).unwrap();
        let x0 = initial_state(&InitialStateSpec::ground(2), &basis).unwrap();
        let (x_ss, _) = steady_state(&g, &x0, &cfg).map_err(|e| e.to_string())?;
        let p1 = population(&basis, &x_ss, 1);
        let expect = pump / (pump + gamma10);
        ensure!(
            (p1 - expect).abs() < 1e-8,
            "steady population {p1:.10} vs {expect:.10}"
        );

        // emission spectrum against the dense reference correlation
        let mut p = SystemParams::two_level(1, 1.0);
        p.gamma.set(0, 1, 0.5);
        let r = derive_collective_rates(&p).unwrap();
        let g = build_generator(&p, &r, &basis, TermSet::all(), Frame::Lab).unwrap();
        let x0 = initial_state(&InitialStateSpec::ground(2), &basis).unwrap();
        let (x_ss, _) = steady_state(&g, &x0, &cfg).map_err(|e| e.to_string())?;
        let omegas: Vec<f64> = (0..=120).map(|i| -6.0 + i as f64 * 0.1).collect();
        let spectrum =
            emission_spectrum(&g, &basis, &x_ss, &r.gamma_collective, &omegas, &cfg)
                .map_err(|e| e.to_string())?;

        let full = oracle::build_oracle(&p, &r, TermSet::all(), Frame::Lab).unwrap();
        let mut rho0 = Dense::zeros(2);
        rho0.set(0, 0, C64::new(1.0, 0.0));
        let rho_ss = full.steady_by_evolution(&rho0, 5.0, 1e-12).unwrap();
        let dt = std::f64::consts::PI / (20.0 * 6.0);
        let horizon = 40.0;
        let steps = (horizon / dt).ceil() as usize;
        let taus: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        let sigma_up = oracle::single_op(1, 2, 0, 1, 0);
        let sigma_down = oracle::single_op(1, 2, 0, 0, 1);
        let corr = full
            .correlation(&rho_ss, &sigma_up, &sigma_down, &taus)
            .unwrap();
        let reference = transform(&taus, &corr, &omegas, 1.0);

        let a = area_normalize(&omegas, &spectrum.values);
        let b = area_normalize(&omegas, &reference);
        let scale = a.iter().cloned().fold(0.0f64, f64::max);
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        ensure!(
            worst < 1e-6 * scale.max(1.0),
            "area-normalized spectrum deviation {worst:.3e} (peak {scale:.3e})"
        );
        Ok(())
    });
}
