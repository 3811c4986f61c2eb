//! Steps of the distillation-assisted double-server protocol.
//!
//! Each step appends its classical traffic to the shared [`Transcript`].
//! Quantum hand-overs appear only as delivery markers. Ground-truth
//! polarization states stay inside the returned records and are never put
//! on the bus.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::protocol::{audit, AngleIndex, AuditReport, BellClass, BqcRound, Party, Payload, Phase, Transcript};
use crate::qnd::{build_branch_table, measure_probes, DeviceParams, DistilledPair, OutcomePair};
use crate::rng::{fnv1a, RngStream};
use crate::states::{sample_component, spatial_dephase, FidelityVector, HyperComponent};

pub const QUBIT_LABELS: [&str; 2] = ["0", "1"];
pub const HANDOFF_MARKER: &str = "handoff";

/// Distribution: the source hands `m` noisy pairs to the two servers.
pub fn run_distribution(
    m: usize,
    fv: &FidelityVector,
    dephase_p: f64,
    rng: &mut RngStream,
    transcript: &mut Transcript,
) -> Result<Vec<HyperComponent>> {
    if m == 0 {
        return Err(Error::EmptyRun);
    }
    let mut components = Vec::with_capacity(m);
    for _ in 0..m {
        let c = sample_component(fv, rng);
        components.push(spatial_dephase(c, dephase_p, rng)?);
        transcript.push(Phase::Distribution, Party::Source, Party::Bob1, Payload::Delivery);
        transcript.push(Phase::Distribution, Party::Source, Party::Bob2, Payload::Delivery);
    }
    Ok(components)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillationResult {
    pub pairs: Vec<DistilledPair>,
    /// Outcomes as reported to Alice, after any dishonest flipping.
    pub reported: Vec<OutcomePair>,
    /// Alice's inference from the reported outcomes.
    pub classes: Vec<BellClass>,
}

/// Distillation: both servers run their QND devices and report the readouts to
/// Alice. With `evil_bob_flip_p > 0` Bob1 lies about his readout with that
/// probability.
pub fn run_distillation(
    components: &[HyperComponent],
    params: &DeviceParams,
    evil_bob_flip_p: f64,
    rng: &mut RngStream,
    transcript: &mut Transcript,
) -> Result<DistillationResult> {
    if components.is_empty() {
        return Err(Error::EmptyRun);
    }
    params.validate()?;
    check_probability("evil_bob_flip_p", evil_bob_flip_p)?;
    let mut result = DistillationResult {
        pairs: Vec::with_capacity(components.len()),
        reported: Vec::with_capacity(components.len()),
        classes: Vec::with_capacity(components.len()),
    };
    for c in components {
        let pair = measure_probes(&build_branch_table(c), params, rng)?;
        let mut reported = pair.outcomes();
        if evil_bob_flip_p > 0.0 && rng.bernoulli(evil_bob_flip_p) {
            reported.a = reported.a.flipped();
        }
        transcript.push(
            Phase::Distillation,
            Party::Bob1,
            Party::Alice,
            Payload::Outcome(reported.a),
        );
        transcript.push(
            Phase::Distillation,
            Party::Bob2,
            Party::Alice,
            Payload::Outcome(reported.b),
        );
        result.classes.push(BellClass::infer(reported));
        result.reported.push(reported);
        result.pairs.push(pair);
    }
    Ok(result)
}

/// Angle announcement: Alice draws `θ_j` uniformly from the eight angles and sends
/// `+θ_j` (Φ class) or `-θ_j` (Ψ class) to Bob1.
pub fn alice_announce_angles(classes: &[BellClass], rng: &mut RngStream, transcript: &mut Transcript) -> Vec<BqcRound> {
    classes
        .iter()
        .enumerate()
        .map(|(j, &class)| {
            let theta = AngleIndex::new(rng.below(AngleIndex::COUNT) as u8).expect("below 8");
            let sent_angle = match class {
                BellClass::PhiClass => theta,
                BellClass::PsiClass => theta.negated(),
            };
            transcript.push(
                Phase::AngleAnnouncement,
                Party::Alice,
                Party::Bob1,
                Payload::Angle(sent_angle),
            );
            BqcRound {
                index: j + 1,
                theta,
                sent_angle,
                class,
                bit: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bob1Measurement {
    pub bit: u8,
    /// Probability of the observed bit.
    pub probability: f64,
    /// Bob2's qubit after Bob1's measurement, canonical global phase.
    pub residual: StateVector,
}

/// Projects Bob1's qubit of a two-qubit state `Σ c_ij |ij>` onto
/// `(|0> ± e^{-iφ}|1>)/√2` and returns the unnormalized residual of Bob2.
fn project_first_qubit(state: &StateVector, angle: f64, bit: u8) -> [Complex64; 2] {
    let c = state.amplitudes();
    let sign = if bit == 0 { 1.0 } else { -1.0 };
    let coeff = Complex64::from_polar(sign, angle);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [(c[0] + coeff * c[2]) * s, (c[1] + coeff * c[3]) * s]
}

/// Result report: Bob1 measures his photon of the pair in the basis set by the
/// announced angle and reports the bit to Alice.
pub fn bob1_measure(
    pair: &DistilledPair,
    sent_angle: AngleIndex,
    rng: &mut RngStream,
    transcript: &mut Transcript,
) -> Result<Bob1Measurement> {
    let state = &pair.pol_state;
    if state.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: state.dim(),
        });
    }
    state.ensure_normalized()?;
    let zero = project_first_qubit(state, sent_angle.radians(), 0);
    let p0: f64 = zero.iter().map(|a| a.norm_sqr()).sum();
    let bit = if rng.uniform() < p0 { 0 } else { 1 };
    let amps = if bit == 0 {
        zero
    } else {
        project_first_qubit(state, sent_angle.radians(), 1)
    };
    let probability = if bit == 0 { p0 } else { 1.0 - p0 };
    let residual = StateVector::normalized(amps.to_vec(), QUBIT_LABELS.to_vec())?.with_canonical_phase();
    transcript.push(Phase::ResultReport, Party::Bob1, Party::Alice, Payload::Bit(bit));
    Ok(Bob1Measurement {
        bit,
        probability,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandoffSummary {
    pub pairs: usize,
    pub phi_class: usize,
    pub psi_class: usize,
    pub residuals: Vec<StateVector>,
}

/// Handoff: passes the prepared qubits over to a single-server computation
/// between Alice and Bob2. Only the hand-over itself is simulated.
pub fn handoff_single_server(
    rounds: &[BqcRound],
    residuals: &[StateVector],
    transcript: &mut Transcript,
) -> Result<HandoffSummary> {
    if rounds.is_empty() {
        return Err(Error::Protocol("no rounds to hand off".into()));
    }
    if let Some(r) = rounds.iter().find(|r| r.bit.is_none()) {
        return Err(Error::Protocol(format!("round {} has no measurement result", r.index)));
    }
    if residuals.len() != rounds.len() {
        return Err(Error::Protocol(format!(
            "{} rounds but {} residual states",
            rounds.len(),
            residuals.len()
        )));
    }
    let phi_class = rounds.iter().filter(|r| r.class == BellClass::PhiClass).count();
    transcript.push(
        Phase::Handoff,
        Party::Alice,
        Party::Bob2,
        Payload::Control(HANDOFF_MARKER.to_string()),
    );
    Ok(HandoffSummary {
        pairs: rounds.len(),
        phi_class,
        psi_class: rounds.len() - phi_class,
        residuals: residuals.to_vec(),
    })
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange {
            name,
            value: p,
            range: "[0, 1]",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub pairs: usize,
    pub fidelities: FidelityVector,
    pub device: DeviceParams,
    pub dephase_p: f64,
    pub evil_bob_flip_p: f64,
}

impl ProtocolConfig {
    pub fn new(pairs: usize, fidelities: FidelityVector) -> Self {
        Self {
            pairs,
            fidelities,
            device: DeviceParams::default(),
            dephase_p: 0.0,
            evil_bob_flip_p: 0.0,
        }
    }

    /// Deterministic identifier for a (config, seed) pair.
    pub fn run_id(&self, seed: u64) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("run-{:016x}-{seed}", fnv1a(text.as_bytes()))
    }
}

/// Everything a full run produces, including ground truth kept off the bus.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub components: Vec<HyperComponent>,
    pub distillation: DistillationResult,
    pub rounds: Vec<BqcRound>,
    pub measurements: Vec<Bob1Measurement>,
    pub handoff: HandoffSummary,
    pub transcript: Transcript,
    pub audit: AuditReport,
}

/// Runs every phase and audits the resulting transcript. Each phase draws
/// from its own child stream of `seed`.
pub fn run_protocol(config: &ProtocolConfig, seed: u64) -> Result<ProtocolRun> {
    check_probability("dephase_p", config.dephase_p)?;
    let root = RngStream::named("protocol", seed);
    let mut transcript = Transcript::new(config.run_id(seed), seed);

    let components = run_distribution(
        config.pairs,
        &config.fidelities,
        config.dephase_p,
        &mut root.split("distribution"),
        &mut transcript,
    )?;
    let distillation = run_distillation(
        &components,
        &config.device,
        config.evil_bob_flip_p,
        &mut root.split("distillation"),
        &mut transcript,
    )?;
    let mut rounds = alice_announce_angles(&distillation.classes, &mut root.split("angles"), &mut transcript);

    let mut bob1_rng = root.split("bob1");
    let mut measurements = Vec::with_capacity(rounds.len());
    for (round, pair) in rounds.iter_mut().zip(&distillation.pairs) {
        let m = bob1_measure(pair, round.sent_angle, &mut bob1_rng, &mut transcript)?;
        round.bit = Some(m.bit);
        measurements.push(m);
    }
    let residuals: Vec<StateVector> = measurements.iter().map(|m| m.residual.clone()).collect();
    let handoff = handoff_single_server(&rounds, &residuals, &mut transcript)?;
    let audit = audit(&transcript);
    Ok(ProtocolRun {
        components,
        distillation,
        rounds,
        measurements,
        handoff,
        transcript,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fidelity;
    use crate::qnd::QndOutcome;
    use crate::states::{bell_vector, PolarizationBell, SpatialSign};
    use approx::assert_abs_diff_eq;

    fn pair_in(bell: PolarizationBell) -> DistilledPair {
        DistilledPair {
            outcome_a: QndOutcome::Shift,
            outcome_b: QndOutcome::Shift,
            output_mode_a: QndOutcome::Shift.output_mode(),
            output_mode_b: QndOutcome::Shift.output_mode(),
            pol_state: bell_vector(bell),
            probability: 0.5,
        }
    }

    #[test]
    fn distribution_noiseless_single_pair() {
        let mut t = Transcript::new("t", 0);
        let c = run_distribution(1, &FidelityVector::noiseless(), 0.0, &mut RngStream::new(0), &mut t).unwrap();
        assert_eq!(
            c,
            vec![HyperComponent::pure(PolarizationBell::PhiPlus, SpatialSign::Plus)]
        );
        assert_eq!(t.len(), 2);
        assert!(t.messages().iter().all(|m| m.payload == Payload::Delivery));
    }

    #[test]
    fn distribution_rejects_zero_pairs() {
        let mut t = Transcript::new("t", 0);
        assert_eq!(
            run_distribution(0, &FidelityVector::noiseless(), 0.0, &mut RngStream::new(0), &mut t),
            Err(Error::EmptyRun)
        );
    }

    #[test]
    fn distillation_shape() {
        let mut t = Transcript::new("t", 0);
        let mut rng = RngStream::new(4);
        let fv = FidelityVector::new(0.4, 0.2, 0.3, 0.1).unwrap();
        let comps = run_distribution(50, &fv, 0.0, &mut rng, &mut t).unwrap();
        let before = t.len();
        let d = run_distillation(&comps, &DeviceParams::default(), 0.0, &mut rng, &mut t).unwrap();
        let msgs: Vec<_> = t.in_phase(Phase::Distillation).collect();
        assert_eq!(msgs.len(), 100);
        assert_eq!(t.len() - before, 100);
        assert!(msgs.iter().all(|m| m.from.is_bob() && m.to == Party::Alice));
        for ((c, class), p) in comps.iter().zip(&d.classes).zip(&d.pairs) {
            assert_eq!(*class == BellClass::PhiClass, c.pol.is_phi());
            assert_eq!(*class == BellClass::PhiClass, p.outcome_a == p.outcome_b);
        }
    }

    #[test]
    fn angle_sign_follows_class() {
        let mut t = Transcript::new("t", 0);
        let rounds = alice_announce_angles(
            &[BellClass::PhiClass, BellClass::PsiClass],
            &mut RngStream::new(8),
            &mut t,
        );
        assert_eq!(rounds[0].sent_angle, rounds[0].theta);
        assert_eq!(rounds[1].sent_angle, rounds[1].theta.negated());
        assert_eq!(t.in_phase(Phase::AngleAnnouncement).count(), 2);
        assert!(t.messages().iter().all(|m| m.to == Party::Bob1));
    }

    #[test]
    fn bob1_on_phi_plus_leaves_rotated_qubit() {
        let theta = AngleIndex::new(3).unwrap();
        let mut rng = RngStream::new(1);
        let mut t = Transcript::new("t", 0);
        for _ in 0..20 {
            let m = bob1_measure(&pair_in(PolarizationBell::PhiPlus), theta, &mut rng, &mut t).unwrap();
            assert_abs_diff_eq!(m.probability, 0.5, epsilon = 1e-12);
            let sign = if m.bit == 0 { 1.0 } else { -1.0 };
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let want = StateVector::new(
                vec![Complex64::new(s, 0.0), Complex64::from_polar(sign * s, theta.radians())],
                QUBIT_LABELS.to_vec(),
            )
            .unwrap();
            assert_abs_diff_eq!(fidelity(&m.residual.to_density(), &want).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(t.len(), 20);
    }

    #[test]
    fn bob1_rejects_unnormalized_state() {
        let mut p = pair_in(PolarizationBell::PhiPlus);
        p.pol_state = p.pol_state.scaled(Complex64::new(2.0, 0.0));
        let mut t = Transcript::new("t", 0);
        assert!(bob1_measure(&p, AngleIndex::new(0).unwrap(), &mut RngStream::new(0), &mut t).is_err());
    }

    #[test]
    fn handoff_requires_completed_rounds() {
        let mut t = Transcript::new("t", 0);
        let mut rounds = alice_announce_angles(&[BellClass::PhiClass; 3], &mut RngStream::new(2), &mut t);
        let residuals = vec![StateVector::basis(&QUBIT_LABELS, 0).unwrap(); 3];
        assert!(handoff_single_server(&rounds, &residuals, &mut t).is_err());
        rounds.iter_mut().for_each(|r| r.bit = Some(0));
        let before = t.len();
        let s = handoff_single_server(&rounds, &residuals, &mut t).unwrap();
        assert_eq!(s.residuals.len(), 3);
        assert_eq!((s.phi_class, s.psi_class), (3, 0));
        assert_eq!(t.len(), before + 1);
        assert_eq!(t.messages().last().unwrap().phase, Phase::Handoff);
    }

    #[test]
    fn full_run_passes_audit_and_is_deterministic() {
        let mut cfg = ProtocolConfig::new(200, FidelityVector::new(0.6, 0.1, 0.2, 0.1).unwrap());
        cfg.dephase_p = 0.2;
        let a = run_protocol(&cfg, 17).unwrap();
        let b = run_protocol(&cfg, 17).unwrap();
        assert!(a.audit.passed, "{}", a.audit);
        assert_eq!(a.transcript, b.transcript);
        assert_eq!(a.transcript.len(), 2 * 200 + 2 * 200 + 200 + 200 + 1);
        assert_eq!(a.handoff.phi_class + a.handoff.psi_class, 200);
    }
}
