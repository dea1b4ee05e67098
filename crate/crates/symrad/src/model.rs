//! Physical parameters and the cavity-derived collective rates.

use serde::{Deserialize, Serialize};

use crate::{C64, Error, Result};

/// Dense s×s storage for per-transition quantities; undefined pairs stay zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix<T> {
    pub levels: usize,
    data: Vec<T>,
}

impl<T: Copy + Default + PartialEq> PairMatrix<T> {
    pub fn zeros(levels: usize) -> Self {
        Self { levels, data: vec![T::default(); levels * levels] }
    }

    #[inline]
    pub fn get(&self, l: usize, lp: usize) -> T {
        self.data[l * self.levels + lp]
    }

    pub fn set(&mut self, l: usize, lp: usize, value: T) {
        self.data[l * self.levels + lp] = value;
    }

    /// Pairs (l, l') with a nonzero entry.
    pub fn nonzero_pairs(&self) -> Vec<(usize, usize, T)> {
        let s = self.levels;
        (0..s * s)
            .filter(|&p| self.data[p] != T::default())
            .map(|p| (p / s, p % s, self.data[p]))
            .collect()
    }
}

/// Cavity input route: explicit mode parameters to be eliminated, or the
/// collective rates given directly (canonical for sweeps in units of the
/// collective decay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CavityInput {
    Explicit {
        /// Atom-cavity coupling per transition (rad/time), l > l'.
        g: PairMatrix<C64>,
        /// Cavity loss rate (1/time), must be positive.
        kappa: f64,
        /// Cavity mode frequency (rad/time).
        omega_c: f64,
        /// Sign applied to the derived Lamb shift; +1 follows the dispersive
        /// shift formula used here, -1 is exposed for reproduction studies
        /// against the opposite convention.
        lamb_sign: f64,
    },
    Direct {
        /// Collective decay per transition (1/time), l > l'.
        gamma_collective: PairMatrix<f64>,
        /// Collective Lamb shift per transition (rad/time), l > l'.
        omega_collective: PairMatrix<f64>,
    },
}

/// All physical symbols of the model in one immutable value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub levels: usize,
    pub atoms: usize,
    /// Level angular frequencies ω_l (rad/time), one per level.
    pub omega: Vec<f64>,
    /// Drive amplitudes v⁰_ll' (rad/time) for l > l'.
    pub drive: PairMatrix<C64>,
    /// Drive frequency ω_d (rad/time).
    pub omega_d: f64,
    /// Individual rates γ_ll' (1/time): decay for l > l', pump for l < l'.
    pub gamma: PairMatrix<f64>,
    /// Dephasing rates ξ_ll' (1/time) for l > l'.
    pub xi: PairMatrix<f64>,
    pub cavity: CavityInput,
}

impl SystemParams {
    /// A blank parameter set with all rates zero and a direct (empty)
    /// collective-rate input.
    pub fn new(levels: usize, atoms: usize) -> Self {
        Self {
            levels,
            atoms,
            omega: vec![0.0; levels],
            drive: PairMatrix::zeros(levels),
            omega_d: 0.0,
            gamma: PairMatrix::zeros(levels),
            xi: PairMatrix::zeros(levels),
            cavity: CavityInput::Direct {
                gamma_collective: PairMatrix::zeros(levels),
                omega_collective: PairMatrix::zeros(levels),
            },
        }
    }

    /// Two-level shorthand with collective decay `gamma10` given directly.
    pub fn two_level(atoms: usize, gamma10: f64) -> Self {
        let mut p = Self::new(2, atoms);
        if let CavityInput::Direct { gamma_collective, .. } = &mut p.cavity {
            gamma_collective.set(1, 0, gamma10);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Validation("need at least two levels".into()));
        }
        if self.atoms < 1 {
            return Err(Error::Validation("need at least one atom".into()));
        }
        if self.omega.len() != self.levels {
            return Err(Error::Validation(format!(
                "omega has {} entries, expected {}",
                self.omega.len(),
                self.levels
            )));
        }
        for (l, lp, v) in self.gamma.nonzero_pairs() {
            if v < 0.0 {
                return Err(Error::Validation(format!("gamma[{l},{lp}] < 0")));
            }
        }
        for (l, lp, v) in self.xi.nonzero_pairs() {
            if v < 0.0 {
                return Err(Error::Validation(format!("xi[{l},{lp}] < 0")));
            }
            if l <= lp {
                return Err(Error::Validation(format!(
                    "xi[{l},{lp}] defined only for l > l'"
                )));
            }
        }
        match &self.cavity {
            CavityInput::Explicit { kappa, .. } => {
                if *kappa < 0.0 {
                    return Err(Error::Validation("kappa < 0".into()));
                }
            }
            CavityInput::Direct { gamma_collective, .. } => {
                for (l, lp, v) in gamma_collective.nonzero_pairs() {
                    if v < 0.0 {
                        return Err(Error::Validation(format!("Gamma[{l},{lp}] < 0")));
                    }
                    if l <= lp {
                        return Err(Error::Validation(format!(
                            "Gamma[{l},{lp}] defined only for l > l'"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Collective decay Γ_ll', Lamb shift Ω_ll' and, when derived from an
/// explicit cavity, the detunings χ_ll'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectiveRates {
    pub gamma_collective: PairMatrix<f64>,
    pub omega_collective: PairMatrix<f64>,
    pub chi: Option<PairMatrix<f64>>,
}

/// Adiabatic elimination of the lossy cavity mode:
/// Γ = |g|² (κ/2) / (χ² + (κ/2)²), Ω = |g|² χ / (χ² + (κ/2)²) with
/// χ_ll' = ω_l − ω_l' − ω_c. Direct rates pass through with χ unset.
pub fn derive_collective_rates(p: &SystemParams) -> Result<CollectiveRates> {
    p.validate()?;
    match &p.cavity {
        CavityInput::Direct { gamma_collective, omega_collective } => Ok(CollectiveRates {
            gamma_collective: gamma_collective.clone(),
            omega_collective: omega_collective.clone(),
            chi: None,
        }),
        CavityInput::Explicit { g, kappa, omega_c, lamb_sign } => {
            if *kappa == 0.0 {
                return Err(Error::SingularElimination);
            }
            let s = p.levels;
            let mut gamma_c = PairMatrix::zeros(s);
            let mut omega_c_shift = PairMatrix::zeros(s);
            let mut chi_all = PairMatrix::zeros(s);
            for l in 0..s {
                for lp in 0..l {
                    chi_all.set(l, lp, p.omega[l] - p.omega[lp] - omega_c);
                }
            }
            for (l, lp, g_llp) in g.nonzero_pairs() {
                if l <= lp {
                    return Err(Error::Validation(format!(
                        "g[{l},{lp}] defined only for l > l'"
                    )));
                }
                let chi = chi_all.get(l, lp);
                let half_kappa = kappa / 2.0;
                let denom = chi * chi + half_kappa * half_kappa;
                let g2 = g_llp.norm_sqr();
                gamma_c.set(l, lp, g2 * half_kappa / denom);
                omega_c_shift.set(l, lp, lamb_sign * g2 * chi / denom);
            }
            Ok(CollectiveRates {
                gamma_collective: gamma_c,
                omega_collective: omega_c_shift,
                chi: Some(chi_all),
            })
        }
    }
}
