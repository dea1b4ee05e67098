//! Initial collective state vectors for identical product preparations.
//!
//! All atoms share the same single-atom density matrix ρ₁ (a mixture of pure
//! states), so the collective coordinates factorize:
//! ⟨n⟩ = Π_ll' e_ll'^{n_ll'} with e_ll' = tr{ρ₁ σ_ll'} and 0⁰ = 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra;
use crate::symindex::{Basis, Occ};
use crate::{C64, Error, Result};

/// One pure state in the single-atom mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateComponent {
    /// Bloch-sphere angles on a two-level atom:
    /// c₁ = sin(θ/2)e^{iφ}, c₀ = cos(θ/2).
    Bloch { theta: f64, phi: f64 },
    /// Explicit amplitudes, one per level, unit norm.
    Amplitudes { amplitudes: Vec<C64> },
}

/// A mixture Σ_i m_i |c_i⟩⟨c_i| prepared identically on every atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub levels: usize,
    /// (probability, pure state) pairs; probabilities must sum to one.
    pub components: Vec<(f64, StateComponent)>,
}

impl InitialStateSpec {
    pub fn pure(levels: usize, c: StateComponent) -> Self {
        Self { levels, components: vec![(1.0, c)] }
    }

    /// All atoms in the top level.
    pub fn fully_excited(levels: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); levels];
        amplitudes[levels - 1] = C64::new(1.0, 0.0);
        Self::pure(levels, StateComponent::Amplitudes { amplitudes })
    }

    /// All atoms in the bottom level.
    pub fn ground(levels: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); levels];
        amplitudes[0] = C64::new(1.0, 0.0);
        Self::pure(levels, StateComponent::Amplitudes { amplitudes })
    }

    /// Two-level coherent spin state at the given Bloch angles.
    pub fn bloch(theta: f64, phi: f64) -> Self {
        Self::pure(2, StateComponent::Bloch { theta, phi })
    }

    fn component_amplitudes(&self, c: &StateComponent) -> Result<Vec<C64>> {
        match c {
            StateComponent::Bloch { theta, phi } => {
                if self.levels != 2 {
                    return Err(Error::Validation(
                        "Bloch angles describe a two-level atom".into(),
                    ));
                }
                Ok(vec![
                    C64::new((theta / 2.0).cos(), 0.0),
                    C64::from_polar((theta / 2.0).sin(), *phi),
                ])
            }
            StateComponent::Amplitudes { amplitudes } => {
                if amplitudes.len() != self.levels {
                    return Err(Error::Validation(format!(
                        "component has {} amplitudes, expected {}",
                        amplitudes.len(),
                        self.levels
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "component amplitudes have squared norm {norm}, expected 1"
                    )));
                }
                Ok(amplitudes.clone())
            }
        }
    }

    /// The single-atom expectation table e_ll' = tr{ρ₁ σ_ll'} = ⟨l'|ρ₁|l⟩,
    /// flattened row-major like the occupation matrices.
    pub fn single_atom_expectations(&self) -> Result<Vec<C64>> {
        if self.components.is_empty() {
            return Err(Error::Validation("empty mixture".into()));
        }
        let total: f64 = self.components.iter().map(|(m, _)| m).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "mixture probabilities sum to {total}, expected 1"
            )));
        }
        let s = self.levels;
        let mut e = vec![C64::new(0.0, 0.0); s * s];
        for (m, c) in &self.components {
            if *m < 0.0 {
                return Err(Error::Validation("negative mixture probability".into()));
            }
            let amp = self.component_amplitudes(c)?;
            for l in 0..s {
                for lp in 0..s {
                    // <l'|c><c|l> for this pure component
                    e[l * s + lp] += *m * amp[lp] * amp[l].conj();
                }
            }
        }
        // diagonals are probabilities; scrub roundoff noise
        for l in 0..s {
            let v = &mut e[l * s + l];
            debug_assert!(v.re > -1e-12 && v.im.abs() < 1e-12);
            *v = C64::new(v.re.max(0.0), 0.0);
        }
        Ok(e)
    }

    /// The single-atom density matrix itself (row i, column j), for handing
    /// to the full-space reference.
    pub fn single_atom_density(&self) -> Result<Vec<C64>> {
        // rho[i][j] = <i|rho1|j> = e_{ji}
        let e = self.single_atom_expectations()?;
        let s = self.levels;
        let mut rho = vec![C64::new(0.0, 0.0); s * s];
        for i in 0..s {
            for j in 0..s {
                rho[i * s + j] = e[j * s + i];
            }
        }
        Ok(rho)
    }
}

/// The collective coordinates of the N-atom product preparation.
pub fn initial_state(spec: &InitialStateSpec, basis: &Basis) -> Result<Vec<C64>> {
    if spec.levels != basis.levels {
        return Err(Error::Validation("level count mismatch with basis".into()));
    }
    let e = spec.single_atom_expectations()?;
    let parts = basis.levels * basis.levels;
    let x: Vec<C64> = (0..basis.dim)
        .into_par_iter()
        .map(|i| {
            let mut occ = Occ::from_elem(0, parts);
            basis.unrank(i, &mut occ);
            let mut v = C64::new(1.0, 0.0);
            for (p, &c) in occ.iter().enumerate() {
                // 0^0 = 1: skip unoccupied boxes entirely
                for _ in 0..c {
                    v *= e[p];
                }
            }
            v
        })
        .collect();
    Ok(x)
}

/// Seed vector of the two-time correlation ⟨σ_ll'(τ) σ_l'l(0)⟩: the
/// coordinates of X σ_l'l for the state X described by `x`.
pub fn regression_seed(basis: &Basis, x: &[C64], l: usize, lp: usize) -> Vec<C64> {
    let s = basis.levels;
    (0..basis.dim)
        .into_par_iter()
        .map(|i| {
            let mut occ = Occ::from_elem(0, s * s);
            basis.unrank(i, &mut occ);
            let scattered = algebra::rmul(s, lp, l, &algebra::unit(&occ));
            scattered
                .into_iter()
                .map(|(target, w)| w * x[basis.rank(&target)])
                .sum()
        })
        .collect()
}
