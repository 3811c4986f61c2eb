//! Bell states, the hyperentangled source, and the noisy source ensemble.
//!
//! The noisy pair is kept as a classical mixture of four pure terms, each a
//! polarization Bell state times the spatial state `(|a1 b1> ± |a2 b2>)/√2`.
//! Joint 16-dimensional kets use the global factor order
//! `polA ⊗ spatialA ⊗ polB ⊗ spatialB`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{permute_subsystems, tensor, DensityMatrix, StateVector, EPS_NORM};
use crate::rng::RngStream;

pub const POL_LABELS: [&str; 4] = ["H H", "H V", "V H", "V V"];
pub const SPATIAL_LABELS: [&str; 4] = ["a1 b1", "a1 b2", "a2 b1", "a2 b2"];
/// Factor dimensions of the joint photon register in global order.
pub const PHOTON_DIMS: [usize; 4] = [2, 2, 2, 2];
/// Tolerance on fidelity sums accepted from user input before renormalizing.
pub const FIDELITY_INPUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarizationBell {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl PolarizationBell {
    pub const ALL: [PolarizationBell; 4] = [
        PolarizationBell::PhiPlus,
        PolarizationBell::PhiMinus,
        PolarizationBell::PsiPlus,
        PolarizationBell::PsiMinus,
    ];

    /// True for Φ±, whose support is `{HH, VV}`.
    pub fn is_phi(self) -> bool {
        matches!(self, PolarizationBell::PhiPlus | PolarizationBell::PhiMinus)
    }

    /// Relative sign between the two terms.
    pub fn sign(self) -> f64 {
        match self {
            PolarizationBell::PhiPlus | PolarizationBell::PsiPlus => 1.0,
            PolarizationBell::PhiMinus | PolarizationBell::PsiMinus => -1.0,
        }
    }

    /// The Bell state with the opposite relative sign.
    pub fn phase_flipped(self) -> Self {
        match self {
            PolarizationBell::PhiPlus => PolarizationBell::PhiMinus,
            PolarizationBell::PhiMinus => PolarizationBell::PhiPlus,
            PolarizationBell::PsiPlus => PolarizationBell::PsiMinus,
            PolarizationBell::PsiMinus => PolarizationBell::PsiPlus,
        }
    }
}

impl fmt::Display for PolarizationBell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolarizationBell::PhiPlus => "PhiPlus",
            PolarizationBell::PhiMinus => "PhiMinus",
            PolarizationBell::PsiPlus => "PsiPlus",
            PolarizationBell::PsiMinus => "PsiMinus",
        })
    }
}

/// Sign of the `|a2 b2>` term of the spatial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpatialSign {
    Plus,
    Minus,
}

impl SpatialSign {
    pub fn value(self) -> f64 {
        match self {
            SpatialSign::Plus => 1.0,
            SpatialSign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            SpatialSign::Plus => SpatialSign::Minus,
            SpatialSign::Minus => SpatialSign::Plus,
        }
    }
}

/// Normalized polarization Bell vector over `HH, HV, VH, VV`.
pub fn bell_vector(kind: PolarizationBell) -> StateVector {
    let s = FRAC_1_SQRT_2;
    let z = 0.0;
    let amps = match kind {
        PolarizationBell::PhiPlus => [s, z, z, s],
        PolarizationBell::PhiMinus => [s, z, z, -s],
        PolarizationBell::PsiPlus => [z, s, s, z],
        PolarizationBell::PsiMinus => [z, s, -s, z],
    };
    StateVector::new(
        amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        POL_LABELS.to_vec(),
    )
    .expect("static Bell vector is well formed")
}

/// `(|a1 b1> ± |a2 b2>)/√2`
pub fn spatial_vector(sign: SpatialSign) -> StateVector {
    let s = FRAC_1_SQRT_2;
    let amps = [s, 0.0, 0.0, s * sign.value()];
    StateVector::new(
        amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        SPATIAL_LABELS.to_vec(),
    )
    .expect("static spatial vector is well formed")
}

/// Joint ket of a polarization Bell state and a spatial state, regrouped
/// from `polA polB spA spB` into the global order.
pub fn joint_vector(pol: PolarizationBell, spatial: SpatialSign) -> StateVector {
    let grouped = tensor(&bell_vector(pol), &spatial_vector(spatial)).expect("16 <= MAX_DIM");
    permute_subsystems(&grouped, &PHOTON_DIMS, &[0, 2, 1, 3]).expect("valid permutation")
}

/// The hyperentangled source state: Φ⁺ in polarization and in spatial mode.
pub fn hyper_source_state() -> StateVector {
    joint_vector(PolarizationBell::PhiPlus, SpatialSign::Plus)
}

/// Mixture weights `(F, F1, F2, F3)` of Φ⁺, Φ⁻, Ψ⁺, Ψ⁻.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityVector {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl FidelityVector {
    /// Exact constructor: components in `[0, 1]`, sum 1 within 1e-12.
    pub fn new(f: f64, f1: f64, f2: f64, f3: f64) -> Result<Self> {
        let fv = Self { f, f1, f2, f3 };
        fv.validate(EPS_NORM)?;
        Ok(fv)
    }

    /// Accepts sums within 1e-9 of one. Values already summing to one
    /// within 1e-12 are kept as given, others are renormalized.
    pub fn from_input(f: f64, f1: f64, f2: f64, f3: f64) -> Result<Self> {
        let raw = Self { f, f1, f2, f3 };
        raw.validate(FIDELITY_INPUT_TOLERANCE)?;
        if raw.validate(EPS_NORM).is_ok() {
            return Ok(raw);
        }
        let s = raw.sum();
        Self::new(f / s, f1 / s, f2 / s, f3 / s)
    }

    fn validate(&self, tol: f64) -> Result<()> {
        for (name, v) in [("F", self.f), ("F1", self.f1), ("F2", self.f2), ("F3", self.f3)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidFidelities(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        let s = self.sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::InvalidFidelities(format!("components sum to {s}, not 1")));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.f + self.f1 + self.f2 + self.f3
    }

    /// Weights in [`PolarizationBell::ALL`] order.
    pub fn weights(&self) -> [f64; 4] {
        [self.f, self.f1, self.f2, self.f3]
    }

    pub fn weight(&self, kind: PolarizationBell) -> f64 {
        match kind {
            PolarizationBell::PhiPlus => self.f,
            PolarizationBell::PhiMinus => self.f1,
            PolarizationBell::PsiPlus => self.f2,
            PolarizationBell::PsiMinus => self.f3,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            f: 1.0,
            f1: 0.0,
            f2: 0.0,
            f3: 0.0,
        }
    }
}

/// One pure term of the noisy source ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperComponent {
    pub pol: PolarizationBell,
    pub spatial: SpatialSign,
    pub weight: f64,
}

impl HyperComponent {
    pub fn pure(pol: PolarizationBell, spatial: SpatialSign) -> Self {
        Self {
            pol,
            spatial,
            weight: 1.0,
        }
    }

    /// Joint 16-dimensional ket in global order.
    pub fn state_vector(&self) -> StateVector {
        joint_vector(self.pol, self.spatial)
    }

    /// Polarization Bell state an ideal readout leaves behind: dephased
    /// spatial input flips the relative sign.
    pub fn expected_output_bell(&self) -> PolarizationBell {
        match self.spatial {
            SpatialSign::Plus => self.pol,
            SpatialSign::Minus => self.pol.phase_flipped(),
        }
    }
}

pub fn mixed_ensemble(fv: &FidelityVector) -> Result<Vec<HyperComponent>> {
    fv.validate(EPS_NORM)?;
    Ok(PolarizationBell::ALL
        .iter()
        .zip(fv.weights())
        .map(|(&pol, weight)| HyperComponent {
            pol,
            spatial: SpatialSign::Plus,
            weight,
        })
        .collect())
}

/// Polarization-only density matrix `Σ w_k |B_k><B_k|`.
pub fn polarization_density(fv: &FidelityVector) -> Result<DensityMatrix> {
    let vectors: Vec<StateVector> = PolarizationBell::ALL.iter().map(|&k| bell_vector(k)).collect();
    let terms: Vec<(f64, &StateVector)> = fv.weights().into_iter().zip(vectors.iter()).collect();
    DensityMatrix::mixture(&terms)
}

/// Draws one ensemble term with probability equal to its weight. The
/// returned component carries weight 1 since it is a single realization.
pub fn sample_component(fv: &FidelityVector, rng: &mut RngStream) -> HyperComponent {
    let idx = rng.categorical(&fv.weights());
    HyperComponent::pure(PolarizationBell::ALL[idx], SpatialSign::Plus)
}

/// Collective spatial phase flip with probability `p`.
pub fn spatial_dephase(component: HyperComponent, p: f64, rng: &mut RngStream) -> Result<HyperComponent> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange {
            name: "dephase_p",
            value: p,
            range: "[0, 1]",
        });
    }
    // p == 0 must not consume randomness so noiseless runs match exactly
    if p > 0.0 && rng.bernoulli(p) {
        Ok(HyperComponent {
            spatial: component.spatial.flipped(),
            ..component
        })
    } else {
        Ok(component)
    }
}
