//! Enumeration, ranking and unranking of the collective basis.
//!
//! A basis element is an s×s matrix of non-negative occupation numbers
//! summing to `N`. Flattened row-major, these are the compositions of `N`
//! into s² parts; we order them lexicographically and rank/unrank with the
//! combinatorial number system, so both directions cost O(s²) table lookups
//! and no hash map is needed.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use smallvec::SmallVec;

use crate::{Error, Result};

/// Flattened occupation numbers, row-major: entry `l * s + l'` counts atoms
/// with ket level `l` and bra level `l'`.
pub type Occ = SmallVec<[u16; 9]>;

/// An s×s non-negative integer matrix with entries summing to `N`, labeling
/// one collective basis element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationMatrix {
    pub n: Occ,
    pub n_atoms: usize,
    pub levels: usize,
}

impl OccupationMatrix {
    pub fn new(n: Occ, n_atoms: usize, levels: usize) -> Result<Self> {
        if n.len() != levels * levels {
            return Err(Error::Validation(format!(
                "occupation matrix has {} entries, expected {}",
                n.len(),
                levels * levels
            )));
        }
        let total: usize = n.iter().map(|&v| v as usize).sum();
        if total != n_atoms {
            return Err(Error::Validation(format!(
                "occupation entries sum to {total}, expected {n_atoms}"
            )));
        }
        Ok(Self { n, n_atoms, levels })
    }

    #[inline]
    pub fn entry(&self, l: usize, lp: usize) -> u16 {
        self.n[l * self.levels + lp]
    }

    /// Occupation matrix of the conjugate-transposed operator.
    pub fn transposed(&self) -> Self {
        let s = self.levels;
        let mut t = Occ::from_elem(0, s * s);
        for l in 0..s {
            for lp in 0..s {
                t[lp * s + l] = self.n[l * s + lp];
            }
        }
        Self { n: t, n_atoms: self.n_atoms, levels: s }
    }

    /// True if all off-diagonal entries vanish (a projector class).
    pub fn is_diagonal(&self) -> bool {
        let s = self.levels;
        self.n
            .iter()
            .enumerate()
            .all(|(p, &v)| v == 0 || p / s == p % s)
    }
}

/// Position of a basis element in the canonical (lexicographic) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex(pub usize);

/// Exact basis size C(N + s² − 1, s² − 1), or a capacity error if it does not
/// fit in `usize`.
pub fn dimension(n_atoms: usize, levels: usize) -> Result<usize> {
    if n_atoms < 1 || levels < 2 {
        return Err(Error::Validation(
            "need N >= 1 atoms and s >= 2 levels".into(),
        ));
    }
    let k = levels * levels - 1;
    binomial_u128(n_atoms as u128 + k as u128, k as u128)
        .and_then(|d| d.to_usize())
        .ok_or_else(|| {
            Error::Capacity(format!(
                "basis size C({}, {}) exceeds addressable size",
                n_atoms + k,
                k
            ))
        })
}

fn binomial_u128(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // exact at every step: acc * (n - k + i) is divisible by i
        acc = acc.checked_mul(n - k + i)? / i;
    }
    Some(acc)
}

/// Precomputed ranking tables for a fixed (N, s).
#[derive(Debug, Clone)]
pub struct Basis {
    pub n_atoms: usize,
    pub levels: usize,
    pub dim: usize,
    /// cum[k][n] = C(n + k, k) = number of compositions of at most n into k
    /// parts; used in closed-form rank increments.
    cum: Vec<Vec<u64>>,
    ln_factorial: Vec<f64>,
}

impl Basis {
    pub fn new(n_atoms: usize, levels: usize) -> Result<Self> {
        let dim = dimension(n_atoms, levels)?;
        let parts = levels * levels;
        let mut cum = vec![vec![0u64; n_atoms + 1]; parts + 1];
        for n in 0..=n_atoms {
            cum[0][n] = 1;
        }
        for k in 1..=parts {
            // C(n + k, k) = C(n - 1 + k, k) + C(n + k - 1, k - 1)
            cum[k][0] = 1;
            for n in 1..=n_atoms {
                cum[k][n] = cum[k][n - 1]
                    .checked_add(cum[k - 1][n])
                    .ok_or_else(|| Error::Capacity("ranking table overflow".into()))?;
            }
        }
        let mut ln_factorial = vec![0.0; n_atoms + 1];
        for i in 1..=n_atoms {
            ln_factorial[i] = ln_factorial[i - 1] + (i as f64).ln();
        }
        Ok(Self { n_atoms, levels, dim, cum, ln_factorial })
    }

    /// Canonical index of an occupation matrix.
    pub fn index_of(&self, m: &OccupationMatrix) -> Result<BasisIndex> {
        if m.levels != self.levels || m.n_atoms != self.n_atoms {
            return Err(Error::Validation("occupation matrix shape mismatch".into()));
        }
        let total: usize = m.n.iter().map(|&v| v as usize).sum();
        if total != self.n_atoms {
            return Err(Error::Validation(format!(
                "occupation entries sum to {total}, expected {}",
                self.n_atoms
            )));
        }
        Ok(BasisIndex(self.rank(&m.n)))
    }

    /// Rank of a flattened occupation vector (entries must sum to N).
    #[inline]
    pub fn rank(&self, occ: &[u16]) -> usize {
        let parts = self.levels * self.levels;
        let mut rank = 0u64;
        let mut remaining = self.n_atoms;
        for p in 0..parts - 1 {
            let c = occ[p] as usize;
            let k = parts - p - 1;
            // sum over v < c of compositions of (remaining - v) into k parts
            rank += self.cum[k][remaining] - self.cum[k][remaining - c];
            remaining -= c;
        }
        rank as usize
    }

    /// Occupation matrix at a canonical index.
    pub fn occupations_of(&self, i: BasisIndex) -> Result<OccupationMatrix> {
        if i.0 >= self.dim {
            return Err(Error::Validation(format!(
                "index {} out of range (dim {})",
                i.0, self.dim
            )));
        }
        let mut occ = Occ::from_elem(0, self.levels * self.levels);
        self.unrank(i.0, &mut occ);
        OccupationMatrix::new(occ, self.n_atoms, self.levels)
    }

    /// Inverse of [`Basis::rank`], writing into a preallocated slice.
    #[inline]
    pub fn unrank(&self, index: usize, occ: &mut [u16]) {
        let parts = self.levels * self.levels;
        let mut rank = index as u64;
        let mut remaining = self.n_atoms;
        for p in 0..parts - 1 {
            let k = parts - p - 1;
            let mut c = 0usize;
            loop {
                let below = self.cum[k][remaining] - self.cum[k][remaining - c];
                let here = comp_count(&self.cum, remaining - c, k);
                if rank < below + here {
                    rank -= below;
                    break;
                }
                c += 1;
            }
            occ[p] = c as u16;
            remaining -= c;
        }
        occ[parts - 1] = remaining as u16;
    }

    /// All basis elements in canonical order.
    pub fn enumerate(&self) -> Vec<OccupationMatrix> {
        let mut out = Vec::with_capacity(self.dim);
        let mut occ = Occ::from_elem(0, self.levels * self.levels);
        for i in 0..self.dim {
            self.unrank(i, &mut occ);
            out.push(OccupationMatrix {
                n: occ.clone(),
                n_atoms: self.n_atoms,
                levels: self.levels,
            });
        }
        out
    }

    /// Indices of the elements with all off-diagonal entries zero, ascending.
    /// There are C(N + s − 1, s − 1) of them.
    pub fn diagonal_subbasis(&self) -> Vec<BasisIndex> {
        let s = self.levels;
        let mut out = Vec::new();
        let mut diag = vec![0u16; s];
        self.diagonal_rec(0, self.n_atoms, &mut diag, &mut out);
        out.sort_unstable();
        out
    }

    fn diagonal_rec(
        &self,
        level: usize,
        remaining: usize,
        diag: &mut Vec<u16>,
        out: &mut Vec<BasisIndex>,
    ) {
        let s = self.levels;
        if level == s - 1 {
            diag[level] = remaining as u16;
            let mut occ = Occ::from_elem(0, s * s);
            for l in 0..s {
                occ[l * s + l] = diag[l];
            }
            out.push(BasisIndex(self.rank(&occ)));
            return;
        }
        for c in 0..=remaining {
            diag[level] = c as u16;
            self.diagonal_rec(level + 1, remaining - c, diag, out);
        }
    }

    /// Index of the conjugate-transposed class.
    pub fn transpose_index(&self, i: BasisIndex) -> BasisIndex {
        let s = self.levels;
        let mut occ = Occ::from_elem(0, s * s);
        self.unrank(i.0, &mut occ);
        let mut t = Occ::from_elem(0, s * s);
        for l in 0..s {
            for lp in 0..s {
                t[lp * s + l] = occ[l * s + lp];
            }
        }
        BasisIndex(self.rank(&t))
    }

    /// Exact multinomial multiplicity N! / Π n_ll'! of a basis element: the
    /// number of product operators mapped to the same class.
    pub fn multiplicity_exact(&self, occ: &[u16]) -> BigUint {
        let mut acc = BigUint::one();
        let mut placed = 0usize;
        for &c in occ {
            let c = c as usize;
            // running product of binomials C(placed + c, c)
            for i in 1..=c {
                placed += 1;
                acc = acc * BigUint::from(placed) / BigUint::from(i);
            }
        }
        acc
    }

    /// Natural log of the multiplicity, for counts beyond f64 range.
    pub fn multiplicity_ln(&self, occ: &[u16]) -> f64 {
        let mut ln = self.ln_factorial[self.n_atoms];
        for &c in occ {
            ln -= self.ln_factorial[c as usize];
        }
        ln
    }

    /// Multiplicity as f64, exact conversion when representable and the
    /// logarithmic route beyond.
    pub fn multiplicity(&self, occ: &[u16]) -> f64 {
        self.multiplicity_exact(occ)
            .to_f64()
            .filter(|v| v.is_finite())
            .unwrap_or_else(|| self.multiplicity_ln(occ).exp())
    }
}

#[inline]
fn comp_count(cum: &[Vec<u64>], n: usize, k: usize) -> u64 {
    // number of compositions of exactly n into k parts
    if k == 0 {
        return u64::from(n == 0);
    }
    if n == 0 {
        1
    } else {
        cum[k][n] - cum[k][n - 1]
    }
}
