//! Assembly of the sparse generator L with d⟨n⟩/dt = L⟨n⟩.
//!
//! Each row is assembled independently by applying the superoperator algebra
//! of [`crate::algebra`] to the row's basis operator; rows are therefore
//! built in parallel and the finished matrix is immutable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::algebra::{self, Terms};
use crate::model::{CollectiveRates, SystemParams};
use crate::symindex::Basis;
use crate::{C64, Error, Result};

/// Relative magnitude below which assembled entries are dropped.
const DROP_THRESHOLD: f64 = 1e-15;

/// Flags enabling each contribution of the equation of motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermSet {
    pub atomic: bool,
    pub drive: bool,
    pub lamb_shift: bool,
    pub individual_dissipation: bool,
    pub dephasing: bool,
    pub collective_decay: bool,
}

impl Default for TermSet {
    fn default() -> Self {
        Self::all()
    }
}

impl TermSet {
    pub fn all() -> Self {
        Self {
            atomic: true,
            drive: true,
            lamb_shift: true,
            individual_dissipation: true,
            dephasing: true,
            collective_decay: true,
        }
    }

    pub fn none() -> Self {
        Self {
            atomic: false,
            drive: false,
            lamb_shift: false,
            individual_dissipation: false,
            dephasing: false,
            collective_decay: false,
        }
    }
}

/// Reference frame of the assembled generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Co-rotating with the drive: level l is shifted by l·ω_d, making the
    /// drive amplitudes constant.
    RotatingAtDrive,
    Lab,
}

/// Anything that can serve as the right-hand side d x/dt = A(t) x.
pub trait LinearRhs: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, t: f64, x: &[C64], y: &mut [C64]);
}

/// Sparse generator in compressed-row form.
#[derive(Debug, Clone)]
pub struct Generator {
    pub dim: usize,
    pub frame: Frame,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl Generator {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Maximum absolute row sum (the ∞ operator norm).
    pub fn infinity_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Row-parallel y = L x.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        y.par_iter_mut().enumerate().for_each(|(i, out)| {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p] as usize];
            }
            *out = acc;
        });
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// All stored entries as (row, col, value).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |p| (i, self.cols[p] as usize, self.vals[p]))
        })
    }

    /// Coordinate-format text dump (`row col re im` per line) for
    /// cross-implementation diffing.
    pub fn dump_coordinates(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# rows {} cols {} nnz {}", self.dim, self.dim, self.nnz())?;
        for (i, j, v) in self.entries() {
            writeln!(w, "{} {} {:.17e} {:.17e}", i, j, v.re, v.im)?;
        }
        Ok(())
    }

    /// Relative residual of the trace functional: with w the
    /// multiplicity-weighted diagonal indicator, ‖wᵀL‖∞ normalized by
    /// ‖w‖∞·‖L‖∞. Zero (to roundoff) for a trace-preserving generator.
    pub fn trace_residual(&self, basis: &Basis) -> f64 {
        let w = trace_vector(basis);
        let mut acc = vec![C64::new(0.0, 0.0); self.dim];
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc[self.cols[p] as usize] += wi * self.vals[p];
            }
        }
        let num = acc.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let w_max = w.iter().cloned().fold(0.0, f64::max);
        let l_norm = self.infinity_norm();
        if l_norm == 0.0 {
            return num;
        }
        num / (w_max * l_norm)
    }
}

impl LinearRhs for Generator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, _t: f64, x: &[C64], y: &mut [C64]) {
        self.apply_into(x, y);
    }
}

/// Lab-frame generator with an explicitly time-dependent drive:
/// L(t) = base + e^{−iω_d t}·drive_pos + e^{+iω_d t}·drive_neg.
pub struct TimeDependentGenerator {
    pub base: Generator,
    pub drive_pos: Generator,
    pub drive_neg: Generator,
    pub omega_d: f64,
}

impl LinearRhs for TimeDependentGenerator {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn apply(&self, t: f64, x: &[C64], y: &mut [C64]) {
        self.base.apply_into(x, y);
        let mut tmp = vec![C64::new(0.0, 0.0); x.len()];
        let phase = C64::from_polar(1.0, -self.omega_d * t);
        self.drive_pos.apply_into(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi += phase * ti;
        }
        self.drive_neg.apply_into(x, &mut tmp);
        let conj_phase = phase.conj();
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi += conj_phase * ti;
        }
    }
}

/// Multiplicity-weighted diagonal indicator: w[i] = C_{n} if nᵢ is a
/// projector class, else 0. wᵀ⟨n⟩ is the trace functional.
pub fn trace_vector(basis: &Basis) -> Vec<f64> {
    let mut w = vec![0.0; basis.dim];
    for idx in basis.diagonal_subbasis() {
        let m = basis.occupations_of(idx).expect("diagonal index in range");
        w[idx.0] = basis.multiplicity(&m.n);
    }
    w
}

struct TermInputs {
    levels: usize,
    /// Level frequencies after the frame shift.
    omega: Vec<f64>,
    drive_pairs: Vec<(usize, usize, C64)>,
    gamma_pairs: Vec<(usize, usize, f64)>,
    xi_pairs: Vec<(usize, usize, f64)>,
    lamb_pairs: Vec<(usize, usize, f64)>,
    decay_pairs: Vec<(usize, usize, f64)>,
    terms: TermSet,
}

/// Assemble the generator for the given term set.
///
/// In the rotating frame the drive must connect adjacent levels
/// (λ_l = l frame weights); a static lab-frame generator is only possible
/// without drive, otherwise use [`build_time_dependent`].
pub fn build_generator(
    p: &SystemParams,
    r: &CollectiveRates,
    basis: &Basis,
    terms: TermSet,
    frame: Frame,
) -> Result<Generator> {
    p.validate()?;
    let drive_pairs = active_drive_pairs(p, terms);
    let omega = frame_omegas(p, &drive_pairs, frame)?;
    let inputs = TermInputs {
        levels: p.levels,
        omega,
        drive_pairs,
        gamma_pairs: if terms.individual_dissipation { p.gamma.nonzero_pairs() } else { vec![] },
        xi_pairs: if terms.dephasing { p.xi.nonzero_pairs() } else { vec![] },
        lamb_pairs: if terms.lamb_shift { r.omega_collective.nonzero_pairs() } else { vec![] },
        decay_pairs: if terms.collective_decay { r.gamma_collective.nonzero_pairs() } else { vec![] },
        terms,
    };
    assemble(basis, frame, &inputs)
}

/// Lab-frame generator split into static and drive-modulated parts.
pub fn build_time_dependent(
    p: &SystemParams,
    r: &CollectiveRates,
    basis: &Basis,
    terms: TermSet,
) -> Result<TimeDependentGenerator> {
    let mut static_terms = terms;
    static_terms.drive = false;
    let base = build_generator(p, r, basis, static_terms, Frame::Lab)?;
    let drive_pairs = active_drive_pairs(p, terms);
    let pos = TermInputs {
        levels: p.levels,
        omega: vec![0.0; p.levels],
        drive_pairs: drive_pairs.clone(),
        gamma_pairs: vec![],
        xi_pairs: vec![],
        lamb_pairs: vec![],
        decay_pairs: vec![],
        terms: TermSet { drive: true, ..TermSet::none() },
    };
    let drive_pos = assemble_drive_half(basis, &pos, false)?;
    let drive_neg = assemble_drive_half(basis, &pos, true)?;
    Ok(TimeDependentGenerator { base, drive_pos, drive_neg, omega_d: p.omega_d })
}

/// Level frequencies after the frame shift (level l shifted by l·ω_d in the
/// rotating frame), validating that the drive is static in the requested
/// frame.
pub fn frame_omegas(
    p: &SystemParams,
    drive_pairs: &[(usize, usize, C64)],
    frame: Frame,
) -> Result<Vec<f64>> {
    match frame {
        Frame::RotatingAtDrive => {
            for &(l, lp, _) in drive_pairs {
                if l != lp + 1 && p.omega_d != 0.0 {
                    return Err(Error::Validation(format!(
                        "drive on non-adjacent pair ({l},{lp}) stays time-dependent in the rotating frame"
                    )));
                }
            }
            Ok(p.omega
                .iter()
                .enumerate()
                .map(|(l, &w)| w - l as f64 * p.omega_d)
                .collect())
        }
        Frame::Lab => {
            if !drive_pairs.is_empty() && p.omega_d != 0.0 {
                return Err(Error::LabFrameDrive);
            }
            Ok(p.omega.clone())
        }
    }
}

pub(crate) fn active_drive_pairs(p: &SystemParams, terms: TermSet) -> Vec<(usize, usize, C64)> {
    if !terms.drive {
        return vec![];
    }
    p.drive
        .nonzero_pairs()
        .into_iter()
        .filter(|&(l, lp, _)| l > lp)
        .collect()
}

fn assemble(basis: &Basis, frame: Frame, inputs: &TermInputs) -> Result<Generator> {
    let rows: Vec<Vec<(u32, C64)>> = (0..basis.dim)
        .into_par_iter()
        .map(|i| {
            let mut occ = crate::symindex::Occ::from_elem(0, inputs.levels * inputs.levels);
            basis.unrank(i, &mut occ);
            let terms = row_expression(&occ, inputs);
            terms
                .into_iter()
                .map(|(target, w)| (basis.rank(&target) as u32, w))
                .collect()
        })
        .collect();
    compress(rows, basis.dim, frame)
}

/// Only the σ_ll' (resp. σ_l'l) halves of the drive commutator, for the
/// time-dependent lab-frame split.
fn assemble_drive_half(
    basis: &Basis,
    inputs: &TermInputs,
    conjugate: bool,
) -> Result<Generator> {
    let rows: Vec<Vec<(u32, C64)>> = (0..basis.dim)
        .into_par_iter()
        .map(|i| {
            let mut occ = crate::symindex::Occ::from_elem(0, inputs.levels * inputs.levels);
            basis.unrank(i, &mut occ);
            let s = inputs.levels;
            let base = algebra::unit(&occ);
            let mut acc = Terms::new();
            for &(l, lp, v) in &inputs.drive_pairs {
                let (a, b, amp) = if conjugate { (lp, l, v.conj()) } else { (l, lp, v) };
                let iv = C64::new(0.0, 1.0) * amp;
                algebra::add_scaled(&mut acc, &algebra::lmul(s, a, b, &base), iv);
                algebra::add_scaled(&mut acc, &algebra::rmul(s, a, b, &base), -iv);
            }
            acc.into_iter()
                .map(|(target, w)| (basis.rank(&target) as u32, w))
                .collect()
        })
        .collect();
    compress(rows, basis.dim, Frame::Lab)
}

/// The full right-hand side expression for one source operator ⌈n⌋.
fn row_expression(occ: &[u16], inputs: &TermInputs) -> Terms {
    let s = inputs.levels;
    let base = algebra::unit(occ);
    let i_unit = C64::new(0.0, 1.0);
    let mut acc = Terms::new();

    if inputs.terms.atomic {
        let mut weight = 0.0;
        for l in 0..s {
            for lp in 0..s {
                weight += inputs.omega[l] * (occ[l * s + lp] as f64 - occ[lp * s + l] as f64);
            }
        }
        if weight != 0.0 {
            algebra::add_scaled(&mut acc, &base, i_unit * weight);
        }
    }

    for &(l, lp, v) in &inputs.drive_pairs {
        let iv = i_unit * v;
        algebra::add_scaled(&mut acc, &algebra::lmul(s, l, lp, &base), iv);
        algebra::add_scaled(&mut acc, &algebra::rmul(s, l, lp, &base), -iv);
        let ivc = i_unit * v.conj();
        algebra::add_scaled(&mut acc, &algebra::lmul(s, lp, l, &base), ivc);
        algebra::add_scaled(&mut acc, &algebra::rmul(s, lp, l, &base), -ivc);
    }

    for &(l, lp, omega) in &inputs.lamb_pairs {
        let iw = i_unit * omega;
        let left = algebra::lmul(s, l, lp, &algebra::lmul(s, lp, l, &base));
        let right = algebra::rmul(s, lp, l, &algebra::rmul(s, l, lp, &base));
        algebra::add_scaled(&mut acc, &left, iw);
        algebra::add_scaled(&mut acc, &right, -iw);
    }

    for &(l, lp, gamma) in &inputs.gamma_pairs {
        let half = C64::new(-gamma / 2.0, 0.0);
        algebra::add_scaled(&mut acc, &algebra::lmul(s, l, l, &base), half);
        algebra::add_scaled(&mut acc, &algebra::rmul(s, l, l, &base), half);
        let fed = algebra::atom_sandwich(s, l, lp, lp, l, &base);
        algebra::add_scaled(&mut acc, &fed, -2.0 * half);
    }

    for &(l, lp, xi) in &inputs.xi_pairs {
        let half = C64::new(-xi / 2.0, 0.0);
        for lvl in [l, lp] {
            algebra::add_scaled(&mut acc, &algebra::lmul(s, lvl, lvl, &base), half);
            algebra::add_scaled(&mut acc, &algebra::rmul(s, lvl, lvl, &base), half);
        }
        for (a, c, sign) in [(l, l, 1.0), (l, lp, -1.0), (lp, l, -1.0), (lp, lp, 1.0)] {
            let sw = algebra::atom_sandwich(s, a, a, c, c, &base);
            algebra::add_scaled(&mut acc, &sw, -2.0 * sign * half);
        }
    }

    for &(l, lp, gamma) in &inputs.decay_pairs {
        let half = C64::new(-gamma / 2.0, 0.0);
        let left = algebra::lmul(s, l, lp, &algebra::lmul(s, lp, l, &base));
        let right = algebra::rmul(s, lp, l, &algebra::rmul(s, l, lp, &base));
        let cross = algebra::lmul(s, l, lp, &algebra::rmul(s, lp, l, &base));
        algebra::add_scaled(&mut acc, &left, half);
        algebra::add_scaled(&mut acc, &right, half);
        algebra::add_scaled(&mut acc, &cross, -2.0 * half);
    }

    acc
}

fn compress(rows: Vec<Vec<(u32, C64)>>, dim: usize, frame: Frame) -> Result<Generator> {
    let max_mag = rows
        .par_iter()
        .map(|r| r.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    let cutoff = DROP_THRESHOLD * max_mag;
    let mut row_ptr = Vec::with_capacity(dim + 1);
    row_ptr.push(0usize);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for mut row in rows {
        row.sort_unstable_by_key(|&(c, _)| c);
        let mut last: Option<u32> = None;
        let start = cols.len();
        for (c, v) in row {
            if last == Some(c) {
                let n = vals.len();
                vals[n - 1] += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = Some(c);
            }
        }
        // drop noise entries introduced by cancellation
        let mut keep = start;
        for p in start..cols.len() {
            if vals[p].norm() > cutoff {
                cols[keep] = cols[p];
                vals[keep] = vals[p];
                keep += 1;
            }
        }
        cols.truncate(keep);
        vals.truncate(keep);
        row_ptr.push(cols.len());
    }
    cols.shrink_to_fit();
    vals.shrink_to_fit();
    Ok(Generator { dim, frame, row_ptr, cols, vals })
}
