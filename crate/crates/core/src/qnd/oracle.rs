//! Full joint-space model of both devices, used to cross-check the branch
//! engine.
//!
//! The register is the 16-dimensional photon space tensored with one
//! three-level probe register per receiver (levels for `-θ, 0, +θ`), 144
//! dimensions in total. Evolution is an explicit permutation unitary that
//! shifts each probe level by the photon's phase quantum (mod 3), readout
//! is a pair of projectors onto probe classes, and the recombination into
//! a single output port per photon sums amplitudes that differ only in
//! spatial path and probe sign.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{partial_trace, tensor_all, DensityMatrix, Matrix, StateVector, EPS_NORM, ONE, ZERO};
use crate::qnd::{probe_quantum, DeviceParams, InternalPath, OutcomePair, Polarization, QndOutcome};
use crate::states::HyperComponent;

pub const PROBE_LEVELS: usize = 3;
/// `polA, spatialA, polB, spatialB, probeA, probeB`
pub const JOINT_DIMS: [usize; 6] = [2, 2, 2, 2, PROBE_LEVELS, PROBE_LEVELS];
pub const JOINT_DIM: usize = 144;

/// Probe level index for a phase quantum in `{-1, 0, +1}`.
fn level_of(quantum: i8) -> usize {
    (quantum + 1) as usize
}

fn quantum_of(level: usize) -> i8 {
    level as i8 - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct JointIndex {
    pol_a: usize,
    sp_a: usize,
    pol_b: usize,
    sp_b: usize,
    probe_a: usize,
    probe_b: usize,
}

impl JointIndex {
    fn decode(mut i: usize) -> Self {
        let probe_b = i % 3;
        i /= 3;
        let probe_a = i % 3;
        i /= 3;
        let sp_b = i % 2;
        i /= 2;
        let pol_b = i % 2;
        i /= 2;
        let sp_a = i % 2;
        i /= 2;
        Self {
            pol_a: i,
            sp_a,
            pol_b,
            sp_b,
            probe_a,
            probe_b,
        }
    }

    fn encode(&self) -> usize {
        ((((self.pol_a * 2 + self.sp_a) * 2 + self.pol_b) * 2 + self.sp_b) * 3 + self.probe_a) * 3 + self.probe_b
    }

    fn classes(&self) -> OutcomePair {
        OutcomePair::new(
            QndOutcome::from_quantum(quantum_of(self.probe_a)),
            QndOutcome::from_quantum(quantum_of(self.probe_b)),
        )
    }

    fn pol_index(&self) -> usize {
        2 * self.pol_a + self.pol_b
    }
}

fn pol(i: usize) -> Polarization {
    if i == 0 {
        Polarization::H
    } else {
        Polarization::V
    }
}

fn path(i: usize) -> InternalPath {
    if i == 0 {
        InternalPath::Three
    } else {
        InternalPath::Four
    }
}

/// The device unitary on the joint register.
pub fn device_unitary() -> Matrix {
    let mut target = vec![0usize; JOINT_DIM];
    for (src, slot) in target.iter_mut().enumerate() {
        let mut idx = JointIndex::decode(src);
        let qa = probe_quantum(pol(idx.pol_a), path(idx.sp_a));
        let qb = probe_quantum(pol(idx.pol_b), path(idx.sp_b));
        idx.probe_a = (idx.probe_a as i8 + qa).rem_euclid(3) as usize;
        idx.probe_b = (idx.probe_b as i8 + qb).rem_euclid(3) as usize;
        *slot = idx.encode();
    }
    Matrix::from_fn(JOINT_DIM, |row, col| if target[col] == row { ONE } else { ZERO }).expect("144 <= MAX_DIM")
}

fn probe_ground(side: &str) -> StateVector {
    let labels: Vec<String> = ["-1", "0", "+1"].iter().map(|q| format!("q{side}{q}")).collect();
    StateVector::basis(&labels, level_of(0)).expect("three distinct labels")
}

/// Joint input ket: the component's photon state with both probes at zero
/// phase.
pub fn joint_input(component: &HyperComponent) -> Result<StateVector> {
    tensor_all(&[&component.state_vector(), &probe_ground("A"), &probe_ground("B")])
}

/// Post-evolution joint state together with its readout statistics.
#[derive(Debug, Clone)]
pub struct OracleState {
    joint: DensityMatrix,
    outcomes: BTreeMap<OutcomePair, f64>,
    conditionals: BTreeMap<OutcomePair, DensityMatrix>,
}

impl OracleState {
    /// Joint photon–probe density matrix after both devices.
    pub fn density(&self) -> &DensityMatrix {
        &self.joint
    }

    pub fn outcome_distribution(&self) -> &BTreeMap<OutcomePair, f64> {
        &self.outcomes
    }

    /// Polarization state after readout `outcome` and port recombination.
    pub fn conditional_state(&self, outcome: OutcomePair) -> Option<&DensityMatrix> {
        self.conditionals.get(&outcome)
    }

    /// Photon register with both probes traced out.
    pub fn photon_marginal(&self) -> Result<DensityMatrix> {
        partial_trace(&self.joint, &[0, 1, 2, 3], &JOINT_DIMS)
    }
}

pub fn oracle_evolve(component: &HyperComponent, params: &DeviceParams) -> Result<OracleState> {
    params.validate()?;
    let input = joint_input(component)?;
    let u = device_unitary();
    let rho_in = Matrix::outer(&input, &input)?;
    let rho = u.conjugate(&rho_in)?;

    let mut outcomes = BTreeMap::new();
    let mut conditionals = BTreeMap::new();
    for outcome in OutcomePair::ALL {
        let projector = Matrix::from_fn(JOINT_DIM, |i, j| {
            if i == j && JointIndex::decode(i).classes() == outcome {
                ONE
            } else {
                ZERO
            }
        })?;
        let projected = projector.conjugate(&rho)?;
        let p = projected.trace().re;
        outcomes.insert(outcome, p);
        if p <= EPS_NORM {
            continue;
        }
        // recombine: every joint basis state in this class maps onto its
        // polarization pair
        let mut pol = [[Complex64::new(0.0, 0.0); 4]; 4];
        for r in 0..JOINT_DIM {
            let ir = JointIndex::decode(r);
            if ir.classes() != outcome {
                continue;
            }
            for c in 0..JOINT_DIM {
                let ic = JointIndex::decode(c);
                if ic.classes() != outcome {
                    continue;
                }
                pol[ir.pol_index()][ic.pol_index()] += projected.get(r, c);
            }
        }
        let m = Matrix::from_fn(4, |i, j| pol[i][j] / p)?;
        conditionals.insert(outcome, DensityMatrix::new(m)?);
    }
    Ok(OracleState {
        joint: DensityMatrix::from_matrix_unchecked(rho),
        outcomes,
        conditionals,
    })
}
