//! Cross-Kerr QND parity device, modeled at the phase-shift level.
//!
//! Each receiver's photon passes a device that routes spatial mode `a1`
//! to internal path `a3` and `a2` to `a4` (likewise `b1/b2` to `b3/b4`)
//! and imprints a probe phase of `+θ` for `H` in path 3, `-θ` for `V` in
//! path 4 and nothing otherwise. An X-quadrature readout cannot tell `+θ`
//! from `-θ`, so each receiver only learns "shift" or "no shift", and the
//! photon leaves through the upper port (`a5`/`b5`) on no shift or the
//! lower port (`a6`/`b6`) on shift.
//!
//! [`build_branch_table`] applies that rule to a source component and
//! [`measure_probes`] samples the readout. The dense joint-space model in
//! [`oracle`] is an independent check of both.

pub mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, EPS_NORM, ZERO};
use crate::rng::RngStream;
use crate::states::{mixed_ensemble, FidelityVector, HyperComponent, PHOTON_DIMS, POL_LABELS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Kerr phase per photon, radians.
    pub theta: f64,
    /// Coherent probe amplitude. Recorded only.
    pub alpha: f64,
    /// Probability that a receiver misreads shift vs. no shift.
    pub homodyne_error: f64,
}

impl DeviceParams {
    pub fn new(theta: f64, alpha: f64, homodyne_error: f64) -> Result<Self> {
        let p = Self {
            theta,
            alpha,
            homodyne_error,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= PI) {
            return Err(Error::InvalidDevice(format!(
                "theta = {} is not in (0, pi]",
                self.theta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidDevice(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(0.0..0.5).contains(&self.homodyne_error) {
            return Err(Error::ProbabilityOutOfRange {
                name: "homodyne_error",
                value: self.homodyne_error,
                range: "[0, 0.5)",
            });
        }
        Ok(())
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            theta: PI / 4.0,
            alpha: 1000.0,
            homodyne_error: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    fn from_index(i: usize) -> Self {
        if i == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// Internal path after the device's polarization optics: path 3 carries
/// what entered in spatial mode 1, path 4 what entered in mode 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InternalPath {
    Three,
    Four,
}

impl InternalPath {
    fn from_spatial_index(i: usize) -> Self {
        if i == 0 {
            InternalPath::Three
        } else {
            InternalPath::Four
        }
    }

    pub fn label(self, side: Side) -> &'static str {
        match (side, self) {
            (Side::A, InternalPath::Three) => "a3",
            (Side::A, InternalPath::Four) => "a4",
            (Side::B, InternalPath::Three) => "b3",
            (Side::B, InternalPath::Four) => "b4",
        }
    }
}

/// Which receiver's photon: `A` is held by Bob1, `B` by Bob2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Probe phase quantum, in units of θ, picked up by one photon.
pub fn probe_quantum(pol: Polarization, path: InternalPath) -> i8 {
    match (pol, path) {
        (Polarization::H, InternalPath::Three) => 1,
        (Polarization::V, InternalPath::Four) => -1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub pol_a: Polarization,
    pub pol_b: Polarization,
    pub path_a: InternalPath,
    pub path_b: InternalPath,
    pub quantum_a: i8,
    pub quantum_b: i8,
}

impl Branch {
    pub fn outcomes(&self) -> OutcomePair {
        OutcomePair::new(
            QndOutcome::from_quantum(self.quantum_a),
            QndOutcome::from_quantum(self.quantum_b),
        )
    }

    /// Index of this branch's polarization pair in `HH, HV, VH, VV`.
    pub fn pol_index(&self) -> usize {
        2 * self.pol_a.index() + self.pol_b.index()
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:+.4}{:+.4}i) |{:?}>_{} |{:?}>_{} probe ({:+}θ, {:+}θ)",
            self.amplitude.re,
            self.amplitude.im,
            self.pol_a,
            self.path_a.label(Side::A),
            self.pol_b,
            self.path_b.label(Side::B),
            self.quantum_a,
            self.quantum_b
        )
    }
}

/// Branch decomposition of one component after both devices, before the
/// probe readout.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    branches: Vec<Branch>,
}

impl BranchTable {
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.amplitude.norm_sqr()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.len() != 4 {
            return Err(Error::Internal(format!(
                "branch table has {} branches, expected 4",
                self.branches.len()
            )));
        }
        let w = self.total_weight();
        if (w - 1.0).abs() > EPS_NORM {
            return Err(Error::Internal(format!("branch weights sum to {w}")));
        }
        Ok(())
    }

    /// Unnormalized polarization ket left by the branches with `outcome`.
    fn conditional_ket(&self, outcome: OutcomePair) -> [Complex64; 4] {
        let mut amps = [ZERO; 4];
        for b in self.branches.iter().filter(|b| b.outcomes() == outcome) {
            amps[b.pol_index()] += b.amplitude;
        }
        amps
    }

    /// Probability of `outcome` and, when nonzero, the normalized
    /// polarization state it leaves, with canonical global phase.
    pub fn conditional_state(&self, outcome: OutcomePair) -> Option<(f64, StateVector)> {
        let amps = self.conditional_ket(outcome);
        let p: f64 = self
            .branches
            .iter()
            .filter(|b| b.outcomes() == outcome)
            .map(|b| b.amplitude.norm_sqr())
            .sum();
        if p <= EPS_NORM {
            return None;
        }
        let state = StateVector::normalized(amps.to_vec(), POL_LABELS.to_vec())
            .ok()?
            .with_canonical_phase();
        Some((p, state))
    }
}

/// Applies the device rule to every term of the component's joint ket.
pub fn build_branch_table(component: &HyperComponent) -> BranchTable {
    let joint = component.state_vector();
    let mut branches = Vec::with_capacity(4);
    // global order polA, spatialA, polB, spatialB; iterate spatial-major
    // so branches from |a1 b1> precede those from |a2 b2>
    for (sa, sb) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for (pa, pb) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let idx = ((pa * PHOTON_DIMS[1] + sa) * PHOTON_DIMS[2] + pb) * PHOTON_DIMS[3] + sb;
            let amplitude = joint.amplitudes()[idx];
            if amplitude.norm() <= EPS_NORM {
                continue;
            }
            let (pol_a, pol_b) = (Polarization::from_index(pa), Polarization::from_index(pb));
            let (path_a, path_b) = (
                InternalPath::from_spatial_index(sa),
                InternalPath::from_spatial_index(sb),
            );
            branches.push(Branch {
                amplitude,
                pol_a,
                pol_b,
                path_a,
                path_b,
                quantum_a: probe_quantum(pol_a, path_a),
                quantum_b: probe_quantum(pol_b, path_b),
            });
        }
    }
    BranchTable { branches }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QndOutcome {
    Shift,
    NoShift,
}

impl QndOutcome {
    /// `±θ` are indistinguishable under an X-quadrature readout.
    pub fn from_quantum(q: i8) -> Self {
        if q == 0 {
            QndOutcome::NoShift
        } else {
            QndOutcome::Shift
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            QndOutcome::Shift => QndOutcome::NoShift,
            QndOutcome::NoShift => QndOutcome::Shift,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QndOutcome::Shift => "Shift",
            QndOutcome::NoShift => "NoShift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Shift" => Some(QndOutcome::Shift),
            "NoShift" => Some(QndOutcome::NoShift),
            _ => None,
        }
    }

    /// Output port the photon is routed to.
    pub fn output_mode(self) -> OutputMode {
        match self {
            QndOutcome::NoShift => OutputMode::Upper,
            QndOutcome::Shift => OutputMode::Lower,
        }
    }
}

impl fmt::Display for QndOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutcomePair {
    pub a: QndOutcome,
    pub b: QndOutcome,
}

impl OutcomePair {
    /// `(Shift,Shift), (Shift,NoShift), (NoShift,Shift), (NoShift,NoShift)`
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair::new(QndOutcome::Shift, QndOutcome::Shift),
        OutcomePair::new(QndOutcome::Shift, QndOutcome::NoShift),
        OutcomePair::new(QndOutcome::NoShift, QndOutcome::Shift),
        OutcomePair::new(QndOutcome::NoShift, QndOutcome::NoShift),
    ];

    pub const fn new(a: QndOutcome, b: QndOutcome) -> Self {
        Self { a, b }
    }

    pub fn is_same(self) -> bool {
        self.a == self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutputMode {
    Upper,
    Lower,
}

impl OutputMode {
    pub fn label(self, side: Side) -> &'static str {
        match (side, self) {
            (Side::A, OutputMode::Upper) => "a5",
            (Side::A, OutputMode::Lower) => "a6",
            (Side::B, OutputMode::Upper) => "b5",
            (Side::B, OutputMode::Lower) => "b6",
        }
    }
}

/// The pair after readout and routing.
#[derive(Debug, Clone, PartialEq)]
pub struct DistilledPair {
    pub outcome_a: QndOutcome,
    pub outcome_b: QndOutcome,
    pub output_mode_a: OutputMode,
    pub output_mode_b: OutputMode,
    pub pol_state: StateVector,
    /// Born probability of the physical outcome pair.
    pub probability: f64,
}

impl DistilledPair {
    pub fn outcomes(&self) -> OutcomePair {
        OutcomePair::new(self.outcome_a, self.outcome_b)
    }
}

/// Exact outcome distribution over [`OutcomePair::ALL`].
pub fn outcome_distribution(table: &BranchTable) -> BTreeMap<OutcomePair, f64> {
    let mut dist: BTreeMap<OutcomePair, f64> = OutcomePair::ALL.iter().map(|&o| (o, 0.0)).collect();
    for b in table.branches() {
        *dist.entry(b.outcomes()).or_default() += b.amplitude.norm_sqr();
    }
    dist
}

pub fn same_outcome_probability(dist: &BTreeMap<OutcomePair, f64>) -> f64 {
    dist.iter().filter(|(o, _)| o.is_same()).map(|(_, p)| p).sum()
}

/// Exact probability of equal readouts over the noisy source ensemble, with
/// each component's spatial sign flipped with probability `dephase_p`.
pub fn ensemble_same_probability(fv: &FidelityVector, dephase_p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&dephase_p) {
        return Err(Error::ProbabilityOutOfRange {
            name: "dephase_p",
            value: dephase_p,
            range: "[0, 1]",
        });
    }
    let mut total = 0.0;
    for component in mixed_ensemble(fv)? {
        let dephased = HyperComponent {
            spatial: component.spatial.flipped(),
            ..component
        };
        let clean = same_outcome_probability(&outcome_distribution(&build_branch_table(&component)));
        let noisy = same_outcome_probability(&outcome_distribution(&build_branch_table(&dephased)));
        total += component.weight * ((1.0 - dephase_p) * clean + dephase_p * noisy);
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Probability that two recorded outcomes agree after each is independently
/// flipped with `flip_a` and `flip_b`.
pub fn same_after_flips(p_same: f64, flip_a: f64, flip_b: f64) -> f64 {
    let parity_flip = flip_a + flip_b - 2.0 * flip_a * flip_b;
    (p_same * (1.0 - parity_flip) + (1.0 - p_same) * parity_flip).clamp(0.0, 1.0)
}

/// Samples a readout of both probes and routes the photons.
pub fn measure_probes(table: &BranchTable, params: &DeviceParams, rng: &mut RngStream) -> Result<DistilledPair> {
    table.validate()?;
    let dist = outcome_distribution(table);
    let weights: Vec<f64> = OutcomePair::ALL.iter().map(|o| dist[o]).collect();
    let outcome = OutcomePair::ALL[rng.categorical(&weights)];
    let (probability, pol_state) = table
        .conditional_state(outcome)
        .ok_or_else(|| Error::Internal("no branch survives the sampled outcome".into()))?;

    let mut recorded = outcome;
    if params.homodyne_error > 0.0 {
        if rng.bernoulli(params.homodyne_error) {
            recorded.a = recorded.a.flipped();
        }
        if rng.bernoulli(params.homodyne_error) {
            recorded.b = recorded.b.flipped();
        }
    }
    Ok(DistilledPair {
        outcome_a: recorded.a,
        outcome_b: recorded.b,
        output_mode_a: recorded.a.output_mode(),
        output_mode_b: recorded.b.output_mode(),
        pol_state,
        probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fidelity;
    use crate::states::{bell_vector, PolarizationBell, SpatialSign};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    use InternalPath::{Four, Three};
    use Polarization::{H, V};

    fn table(pol: PolarizationBell, spatial: SpatialSign) -> BranchTable {
        build_branch_table(&HyperComponent::pure(pol, spatial))
    }

    fn summary(t: &BranchTable) -> Vec<(f64, Polarization, Polarization, InternalPath, InternalPath, i8, i8)> {
        t.branches()
            .iter()
            .map(|b| {
                assert_abs_diff_eq!(b.amplitude.im, 0.0, epsilon = 1e-15);
                (
                    (b.amplitude.re * 1e12).round() / 1e12,
                    b.pol_a,
                    b.pol_b,
                    b.path_a,
                    b.path_b,
                    b.quantum_a,
                    b.quantum_b,
                )
            })
            .collect()
    }

    #[test]
    fn phi_plus_branches() {
        let t = table(PolarizationBell::PhiPlus, SpatialSign::Plus);
        assert_eq!(
            summary(&t),
            vec![
                (0.5, H, H, Three, Three, 1, 1),
                (0.5, V, V, Three, Three, 0, 0),
                (0.5, H, H, Four, Four, 0, 0),
                (0.5, V, V, Four, Four, -1, -1),
            ]
        );
        t.validate().unwrap();
    }

    #[test]
    fn psi_plus_branches() {
        let t = table(PolarizationBell::PsiPlus, SpatialSign::Plus);
        assert_eq!(
            summary(&t),
            vec![
                (0.5, H, V, Three, Three, 1, 0),
                (0.5, V, H, Three, Three, 0, 1),
                (0.5, H, V, Four, Four, 0, -1),
                (0.5, V, H, Four, Four, -1, 0),
            ]
        );
    }

    #[test]
    fn phi_minus_carries_signs() {
        let t = table(PolarizationBell::PhiMinus, SpatialSign::Plus);
        let amps: Vec<f64> = summary(&t).iter().map(|r| r.0).collect();
        assert_eq!(amps, vec![0.5, -0.5, 0.5, -0.5]);
        let quanta: Vec<(i8, i8)> = summary(&t).iter().map(|r| (r.5, r.6)).collect();
        assert_eq!(quanta, vec![(1, 1), (0, 0), (0, 0), (-1, -1)]);
    }

    #[test]
    fn dephased_input_negates_second_spatial_term() {
        let t = table(PolarizationBell::PhiPlus, SpatialSign::Minus);
        let amps: Vec<f64> = summary(&t).iter().map(|r| r.0).collect();
        assert_eq!(amps, vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn phi_plus_distribution_and_state() {
        let t = table(PolarizationBell::PhiPlus, SpatialSign::Plus);
        let d = outcome_distribution(&t);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[1]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[2]], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[3]], 0.5, epsilon = 1e-15);
        let (p, s) = t.conditional_state(OutcomePair::ALL[0]).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude("H H").unwrap().re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude("V V").unwrap().re, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn psi_plus_shift_noshift_routes_to_a6_b5() {
        let t = table(PolarizationBell::PsiPlus, SpatialSign::Plus);
        let d = outcome_distribution(&t);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[1]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[&OutcomePair::ALL[2]], 0.5, epsilon = 1e-15);
        let mut rng = RngStream::new(11);
        let params = DeviceParams::default();
        loop {
            let pair = measure_probes(&t, &params, &mut rng).unwrap();
            if pair.outcomes() == OutcomePair::ALL[1] {
                assert_eq!(pair.output_mode_a.label(Side::A), "a6");
                assert_eq!(pair.output_mode_b.label(Side::B), "b5");
                let f = fidelity(&pair.pol_state.to_density(), &bell_vector(PolarizationBell::PsiPlus)).unwrap();
                assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
                break;
            }
        }
    }

    #[test]
    fn phi_minus_keeps_its_sign() {
        let t = table(PolarizationBell::PhiMinus, SpatialSign::Plus);
        for o in [OutcomePair::ALL[0], OutcomePair::ALL[3]] {
            let (_, s) = t.conditional_state(o).unwrap();
            let f = fidelity(&s.to_density(), &bell_vector(PolarizationBell::PhiMinus)).unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn flip_formula_limits() {
        assert_abs_diff_eq!(same_after_flips(0.8, 0.0, 0.0), 0.8);
        assert_abs_diff_eq!(same_after_flips(1.0, 1.0, 0.0), 0.0);
        assert_abs_diff_eq!(same_after_flips(1.0, 1.0, 1.0), 1.0);
        assert_abs_diff_eq!(same_after_flips(0.3, 0.5, 0.0), 0.5);
    }

    #[test]
    fn device_params_ranges() {
        assert!(DeviceParams::new(0.0, 1.0, 0.0).is_err());
        assert!(DeviceParams::new(PI, 1.0, 0.0).is_ok());
        assert!(DeviceParams::new(PI + 1e-9, 1.0, 0.0).is_err());
        assert!(DeviceParams::new(1.0, 0.0, 0.0).is_err());
        assert!(DeviceParams::new(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn homodyne_error_keeps_routing_consistent() {
        let t = table(PolarizationBell::PhiPlus, SpatialSign::Plus);
        let params = DeviceParams::new(0.3, 10.0, 0.25).unwrap();
        let mut rng = RngStream::new(5);
        let mut mixed = 0;
        for _ in 0..2000 {
            let p = measure_probes(&t, &params, &mut rng).unwrap();
            assert_eq!(p.output_mode_a, p.outcome_a.output_mode());
            assert_eq!(p.output_mode_b, p.outcome_b.output_mode());
            if !p.outcomes().is_same() {
                mixed += 1;
            }
        }
        // 2·0.25·0.75 = 0.375 of pairs read as mixed
        let sigma = (0.375f64 * 0.625 / 2000.0).sqrt();
        assert!((mixed as f64 / 2000.0 - 0.375).abs() <= 3.0 * sigma);
    }
}
