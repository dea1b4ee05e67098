//! Brute-force reference in the full s^N-dimensional Hilbert space.
//!
//! Everything here is deliberately naive: dense matrices and explicit
//! operator sums over atoms. The point is independence from the collective
//! machinery so the two can be compared entry by entry.

use crate::dynamics::{integrate, SolverConfig};
use crate::generator::{self, Frame, LinearRhs, TermSet};
use crate::model::{CollectiveRates, SystemParams};
use crate::symindex::{Basis, Occ};
use crate::{C64, Error, Result};

/// Largest full-space dimension the oracle will accept.
pub const MAX_FULL_DIM: usize = 4096;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub d: usize,
    pub a: Vec<C64>,
}

impl Dense {
    pub fn zeros(d: usize) -> Self {
        Self { d, a: vec![C64::new(0.0, 0.0); d * d] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.d + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.d + j] = v;
    }

    pub fn mul(&self, other: &Dense) -> Dense {
        let d = self.d;
        let mut out = Dense::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let v = self.a[i * d + k];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.a[i * d + j] += v * other.a[k * d + j];
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> Dense {
        let d = self.d;
        let mut out = Dense::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.a[j * d + i] = self.a[i * d + j].conj();
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Dense, f: C64) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += f * y;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.d).map(|i| self.a[i * self.d + i]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// tr(op · rho).
pub fn expectation(op: &Dense, rho: &Dense) -> C64 {
    let d = op.d;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += op.a[i * d + j] * rho.a[j * d + i];
        }
    }
    acc
}

fn checked_full_dim(n_atoms: usize, levels: usize) -> Result<usize> {
    let mut d: usize = 1;
    for _ in 0..n_atoms {
        d = d
            .checked_mul(levels)
            .filter(|&d| d <= MAX_FULL_DIM)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "full space {levels}^{n_atoms} exceeds the oracle cap {MAX_FULL_DIM}"
                ))
            })?;
    }
    Ok(d)
}

#[inline]
fn digit(state: usize, atom: usize, stride: &[usize], levels: usize) -> usize {
    state / stride[atom] % levels
}

fn strides(n_atoms: usize, levels: usize) -> Vec<usize> {
    (0..n_atoms).map(|j| levels.pow(j as u32)).collect()
}

/// Single-atom transition σ_ab acting on atom `j`, embedded in the full space.
pub fn single_op(n_atoms: usize, levels: usize, j: usize, a: usize, b: usize) -> Dense {
    let d = levels.pow(n_atoms as u32);
    let st = strides(n_atoms, levels);
    let mut m = Dense::zeros(d);
    for col in 0..d {
        if digit(col, j, &st, levels) == b {
            let row = col + a * st[j] - b * st[j];
            m.a[row * d + col] += C64::new(1.0, 0.0);
        }
    }
    m
}

/// Collective transition Σ_j σ_ab^j in the full space.
pub fn collective_op(n_atoms: usize, levels: usize, a: usize, b: usize) -> Dense {
    let d = levels.pow(n_atoms as u32);
    let st = strides(n_atoms, levels);
    let mut m = Dense::zeros(d);
    for col in 0..d {
        for j in 0..n_atoms {
            if digit(col, j, &st, levels) == b {
                let row = col + a * st[j] - b * st[j];
                m.a[row * d + col] += C64::new(1.0, 0.0);
            }
        }
    }
    m
}

/// N-fold tensor power of a single-atom density matrix.
pub fn product_density(n_atoms: usize, levels: usize, rho1: &Dense) -> Result<Dense> {
    if rho1.d != levels {
        return Err(Error::Validation("single-atom matrix has wrong size".into()));
    }
    let d = checked_full_dim(n_atoms, levels)?;
    let st = strides(n_atoms, levels);
    let mut out = Dense::zeros(d);
    for row in 0..d {
        for col in 0..d {
            let mut v = C64::new(1.0, 0.0);
            for j in 0..n_atoms {
                v *= rho1.get(digit(row, j, &st, levels), digit(col, j, &st, levels));
            }
            out.a[row * d + col] = v;
        }
    }
    Ok(out)
}

/// Full-space Lindblad model: ρ̇ = −i[H, ρ] + Σ r (oρo† − ½{o†o, ρ}).
pub struct Oracle {
    pub n_atoms: usize,
    pub levels: usize,
    pub dim: usize,
    h: Dense,
    /// (rate, o, o†, o†o) per dissipation channel.
    jumps: Vec<(f64, Dense, Dense, Dense)>,
}

/// Assemble the full-space model matching the collective generator's term
/// selection and frame.
pub fn build_oracle(
    p: &SystemParams,
    r: &CollectiveRates,
    terms: TermSet,
    frame: Frame,
) -> Result<Oracle> {
    p.validate()?;
    let d = checked_full_dim(p.atoms, p.levels)?;
    let n = p.atoms;
    let s = p.levels;
    let drive_pairs = generator::active_drive_pairs(p, terms);
    let omega = generator::frame_omegas(p, &drive_pairs, frame)?;

    let mut h = Dense::zeros(d);
    if terms.atomic {
        for l in 0..s {
            if omega[l] != 0.0 {
                h.add_scaled(&collective_op(n, s, l, l), C64::new(omega[l], 0.0));
            }
        }
    }
    for &(l, lp, v) in &drive_pairs {
        h.add_scaled(&collective_op(n, s, l, lp), v);
        h.add_scaled(&collective_op(n, s, lp, l), v.conj());
    }
    if terms.lamb_shift {
        for (l, lp, omega_c) in r.omega_collective.nonzero_pairs() {
            let prod = collective_op(n, s, l, lp).mul(&collective_op(n, s, lp, l));
            h.add_scaled(&prod, C64::new(omega_c, 0.0));
        }
    }

    let mut jumps: Vec<(f64, Dense)> = Vec::new();
    if terms.individual_dissipation {
        for (l, lp, gamma) in p.gamma.nonzero_pairs() {
            for j in 0..n {
                jumps.push((gamma, single_op(n, s, j, lp, l)));
            }
        }
    }
    if terms.dephasing {
        for (l, lp, xi) in p.xi.nonzero_pairs() {
            for j in 0..n {
                let mut o = single_op(n, s, j, l, l);
                o.add_scaled(&single_op(n, s, j, lp, lp), C64::new(-1.0, 0.0));
                jumps.push((xi, o));
            }
        }
    }
    if terms.collective_decay {
        for (l, lp, gamma) in r.gamma_collective.nonzero_pairs() {
            jumps.push((gamma, collective_op(n, s, lp, l)));
        }
    }

    let jumps: Vec<(f64, Dense, Dense, Dense)> = jumps
        .into_iter()
        .map(|(rate, o)| {
            let od = o.dagger();
            let odo = od.mul(&o);
            (rate, o, od, odo)
        })
        .collect();

    Ok(Oracle { n_atoms: n, levels: s, dim: d, h, jumps })
}

/// The Lindbladian as a flat linear map on vectorized matrices, so the
/// adaptive integrator can drive the reference evolution too.
impl LinearRhs for Oracle {
    fn dim(&self) -> usize {
        self.dim * self.dim
    }

    fn apply(&self, _t: f64, x: &[C64], y: &mut [C64]) {
        let rho = Dense { d: self.dim, a: x.to_vec() };
        y.copy_from_slice(&self.liouvillian(&rho).a);
    }
}

impl Oracle {
    /// One application of the (Schrödinger-picture) Lindbladian.
    pub fn liouvillian(&self, rho: &Dense) -> Dense {
        let minus_i = C64::new(0.0, -1.0);
        let mut out = Dense::zeros(self.dim);
        out.add_scaled(&self.h.mul(rho), minus_i);
        out.add_scaled(&rho.mul(&self.h), -minus_i);
        for (rate, o, od, odo) in &self.jumps {
            let r = C64::new(*rate, 0.0);
            out.add_scaled(&o.mul(rho).mul(od), r);
            out.add_scaled(&odo.mul(rho), -0.5 * r);
            out.add_scaled(&rho.mul(odo), -0.5 * r);
        }
        out
    }

    /// Evolve over `[0, t]` with tolerances well below every comparison
    /// threshold in the test suites.
    pub fn evolve(&self, rho0: &Dense, t: f64) -> Result<Dense> {
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        let cfg = SolverConfig { rel_tol: 1e-11, abs_tol: 1e-13, ..SolverConfig::default() };
        let a = integrate(self, &rho0.a, &[0.0, t], &cfg, |_, _, _| {})?;
        Ok(Dense { d: self.dim, a })
    }

    /// Evolve until the Lindbladian residual drops below `eps` (relative to
    /// the state norm), in windows of duration `window`.
    pub fn steady_by_evolution(&self, rho0: &Dense, window: f64, eps: f64) -> Result<Dense> {
        let mut rho = rho0.clone();
        let t_max = 10_000.0 * window;
        let mut elapsed = 0.0;
        loop {
            rho = self.evolve(&rho, window)?;
            elapsed += window;
            let res = self.liouvillian(&rho).frobenius() / rho.frobenius().max(1e-300);
            if res < eps {
                return Ok(rho);
            }
            if elapsed > t_max {
                return Err(Error::NonConvergence { residual: res });
            }
        }
    }

    /// Two-time correlation ⟨A(τ) B(0)⟩ = tr{A e^{Lτ}(B ρ)} at the given
    /// (ascending) lags, via the quantum regression theorem.
    pub fn correlation(&self, rho: &Dense, a: &Dense, b: &Dense, taus: &[f64]) -> Result<Vec<C64>> {
        let mut seed = b.mul(rho);
        let mut out = Vec::with_capacity(taus.len());
        let mut t_prev = 0.0;
        for &tau in taus {
            seed = self.evolve(&seed, tau - t_prev)?;
            t_prev = tau;
            out.push(expectation(a, &seed));
        }
        Ok(out)
    }
}

/// Occupation class of the product operator with kets `col` and bras `row`.
fn pair_class(row: usize, col: usize, st: &[usize], levels: usize, occ: &mut Occ) {
    occ.iter_mut().for_each(|v| *v = 0);
    for j in 0..st.len() {
        let k = digit(col, j, st, levels);
        let b = digit(row, j, st, levels);
        occ[k * levels + b] += 1;
    }
}

/// Project a full-space matrix onto the collective coordinates, verifying
/// that every member of each permutation class carries the same value.
pub fn project_collective(rho: &Dense, basis: &Basis) -> Result<Vec<C64>> {
    let n = basis.n_atoms;
    let s = basis.levels;
    let d = checked_full_dim(n, s)?;
    if rho.d != d {
        return Err(Error::Validation(format!(
            "matrix dimension {} does not match {s}^{n}",
            rho.d
        )));
    }
    let st = strides(n, s);
    let mut occ = Occ::from_elem(0, s * s);
    let mut sum = vec![C64::new(0.0, 0.0); basis.dim];
    let mut lo = vec![(f64::INFINITY, f64::INFINITY); basis.dim];
    let mut hi = vec![(f64::NEG_INFINITY, f64::NEG_INFINITY); basis.dim];
    let mut count = vec![0usize; basis.dim];
    for row in 0..d {
        for col in 0..d {
            pair_class(row, col, &st, s, &mut occ);
            let m = basis.rank(&occ);
            let v = rho.a[row * d + col];
            sum[m] += v;
            lo[m] = (lo[m].0.min(v.re), lo[m].1.min(v.im));
            hi[m] = (hi[m].0.max(v.re), hi[m].1.max(v.im));
            count[m] += 1;
        }
    }
    let scale = rho.a.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    for m in 0..basis.dim {
        let spread = (hi[m].0 - lo[m].0).max(hi[m].1 - lo[m].1);
        if spread > 1e-10 * scale {
            return Err(Error::SymmetryViolation { spread });
        }
    }
    Ok(sum
        .into_iter()
        .zip(count)
        .map(|(v, c)| v / c as f64)
        .collect())
}

/// The full-space matrix whose collective projection is the unit vector on
/// class `m`: the sum of the transposes of all product operators in the class.
pub fn class_probe(basis: &Basis, m: usize) -> Result<Dense> {
    let n = basis.n_atoms;
    let s = basis.levels;
    let d = checked_full_dim(n, s)?;
    let st = strides(n, s);
    let mut target = Occ::from_elem(0, s * s);
    basis.unrank(m, &mut target);
    let mut occ = Occ::from_elem(0, s * s);
    let mut probe = Dense::zeros(d);
    for row in 0..d {
        for col in 0..d {
            pair_class(row, col, &st, s, &mut occ);
            if occ == target {
                probe.a[row * d + col] = C64::new(1.0, 0.0);
            }
        }
    }
    Ok(probe)
}
