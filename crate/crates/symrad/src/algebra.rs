//! Sandwich algebra on collective basis operators.
//!
//! Every superoperator acting on a basis operator ⌈n⌋ reduces to three
//! primitive moves, each an exact operator identity:
//!
//! * left multiplication by a collective transition operator,
//! * right multiplication by a collective transition operator,
//! * the same-atom sandwich Σ_j σ_ab^j ⌈n⌋ σ_cd^j.
//!
//! Higher operator products (collective Lamb shift, collective decay) are
//! obtained by composing these primitives instead of transcribing the
//! expanded four-index formulas, so index bookkeeping cannot drift.

use smallvec::SmallVec;

use crate::symindex::Occ;
use crate::C64;

/// A finite linear combination of basis operators, each given by its
/// occupation vector and a complex weight.
pub type Terms = SmallVec<[(Occ, C64); 8]>;

/// Wrap a single operator ⌈n⌋ with unit weight.
pub fn unit(occ: &[u16]) -> Terms {
    let mut t = Terms::new();
    t.push((Occ::from_slice(occ), C64::new(1.0, 0.0)));
    t
}

#[inline]
fn shifted(occ: &[u16], dec: usize, inc: usize) -> Occ {
    let mut out = Occ::from_slice(occ);
    out[dec] -= 1;
    out[inc] += 1;
    out
}

/// σ_ab · X for a collective transition/projection operator σ_ab:
/// each term ⌈n⌋ scatters to Σ_k n_bk ⌈{n_bk − 1, n_ak + 1}⌋.
pub fn lmul(levels: usize, a: usize, b: usize, x: &Terms) -> Terms {
    let s = levels;
    let mut out = Terms::new();
    for (occ, w) in x {
        for k in 0..s {
            let count = occ[b * s + k];
            if count == 0 {
                continue;
            }
            out.push((
                shifted(occ, b * s + k, a * s + k),
                w * count as f64,
            ));
        }
    }
    merge(out)
}

/// X · σ_ab: each term ⌈n⌋ scatters to Σ_k n_ka ⌈{n_ka − 1, n_kb + 1}⌋.
pub fn rmul(levels: usize, a: usize, b: usize, x: &Terms) -> Terms {
    let s = levels;
    let mut out = Terms::new();
    for (occ, w) in x {
        for k in 0..s {
            let count = occ[k * s + a];
            if count == 0 {
                continue;
            }
            out.push((
                shifted(occ, k * s + a, k * s + b),
                w * count as f64,
            ));
        }
    }
    merge(out)
}

/// Σ_j σ_ab^j X σ_cd^j: each term ⌈n⌋ maps to n_bc ⌈{n_bc − 1, n_ad + 1}⌋.
pub fn atom_sandwich(levels: usize, a: usize, b: usize, c: usize, d: usize, x: &Terms) -> Terms {
    let s = levels;
    let mut out = Terms::new();
    for (occ, w) in x {
        let count = occ[b * s + c];
        if count == 0 {
            continue;
        }
        out.push((
            shifted(occ, b * s + c, a * s + d),
            w * count as f64,
        ));
    }
    merge(out)
}

/// Scale all weights.
pub fn scale(x: &mut Terms, factor: C64) {
    for (_, w) in x.iter_mut() {
        *w *= factor;
    }
}

/// Accumulate `x` into `acc` with a prefactor.
pub fn add_scaled(acc: &mut Terms, x: &Terms, factor: C64) {
    for (occ, w) in x {
        acc.push((occ.clone(), w * factor));
    }
    *acc = merge(std::mem::take(acc));
}

fn merge(mut terms: Terms) -> Terms {
    if terms.len() < 2 {
        return terms;
    }
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut out = Terms::new();
    for (occ, w) in terms.drain(..) {
        match out.last_mut() {
            Some((last, acc)) if *last == occ => *acc += w,
            _ => out.push((occ, w)),
        }
    }
    out
}
