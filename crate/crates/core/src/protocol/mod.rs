//! Parties, classical messages and the append-only transcript.

pub mod audit;
pub mod engine;
pub mod transcript;

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnd::{OutcomePair, QndOutcome};

pub use audit::{audit, AuditReport, Violation, ViolationKind};
pub use engine::{
    alice_announce_angles, bob1_measure, handoff_single_server, run_distillation, run_distribution, run_protocol,
    Bob1Measurement, DistillationResult, HandoffSummary, ProtocolConfig, ProtocolRun,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Source,
    Alice,
    Bob1,
    Bob2,
}

impl Party {
    pub const ALL: [Party; 4] = [Party::Source, Party::Alice, Party::Bob1, Party::Bob2];

    pub fn is_bob(self) -> bool {
        matches!(self, Party::Bob1 | Party::Bob2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Party::Source => "Source",
            Party::Alice => "Alice",
            Party::Bob1 => "Bob1",
            Party::Bob2 => "Bob2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Party::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Distribution,
    Distillation,
    AngleAnnouncement,
    ResultReport,
    Handoff,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Distribution,
        Phase::Distillation,
        Phase::AngleAnnouncement,
        Phase::ResultReport,
        Phase::Handoff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Distribution => "Distribution",
            Phase::Distillation => "Distillation",
            Phase::AngleAnnouncement => "AngleAnnouncement",
            Phase::ResultReport => "ResultReport",
            Phase::Handoff => "Handoff",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the eight angles `kπ/4`, `k = 0..7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngleIndex(u8);

impl AngleIndex {
    pub const COUNT: usize = 8;

    pub fn new(k: u8) -> Result<Self> {
        if usize::from(k) < Self::COUNT {
            Ok(Self(k))
        } else {
            Err(Error::Protocol(format!("angle index {k} is not in 0..8")))
        }
    }

    pub fn k(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * FRAC_PI_4
    }

    /// `-kπ/4` reduced to `0..2π`.
    pub fn negated(self) -> Self {
        Self((8 - self.0) % 8)
    }

    pub fn all() -> impl Iterator<Item = AngleIndex> {
        (0..8u8).map(AngleIndex)
    }
}

impl fmt::Display for AngleIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}pi/4", self.0)
    }
}

impl std::str::FromStr for AngleIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s
            .strip_suffix("pi/4")
            .and_then(|k| k.parse::<u8>().ok())
            .ok_or_else(|| Error::Protocol(format!("bad angle `{s}`")))?;
        AngleIndex::new(k)
    }
}

/// Classical content of a message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    /// A photon was handed over; carries no classical information.
    Delivery,
    Outcome(QndOutcome),
    Angle(AngleIndex),
    Bit(u8),
    Control(String),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Delivery => "delivery_marker",
            Payload::Outcome(_) => "qnd_outcome",
            Payload::Angle(_) => "angle",
            Payload::Bit(_) => "measurement_bit",
            Payload::Control(_) => "control_marker",
        }
    }

    pub fn value(&self) -> String {
        match self {
            Payload::Delivery => "photon".to_string(),
            Payload::Outcome(o) => o.to_string(),
            Payload::Angle(a) => a.to_string(),
            Payload::Bit(b) => b.to_string(),
            Payload::Control(c) => c.clone(),
        }
    }

    pub fn parse(kind: &str, value: &str) -> Result<Self> {
        let bad = || Error::Protocol(format!("bad payload `{kind}|{value}`"));
        match kind {
            "delivery_marker" if value == "photon" => Ok(Payload::Delivery),
            "qnd_outcome" => QndOutcome::parse(value).map(Payload::Outcome).ok_or_else(bad),
            "angle" => value.parse().map(Payload::Angle),
            "measurement_bit" => match value {
                "0" => Ok(Payload::Bit(0)),
                "1" => Ok(Payload::Bit(1)),
                _ => Err(bad()),
            },
            "control_marker" if !value.is_empty() && !value.contains('|') => Ok(Payload::Control(value.to_string())),
            _ => Err(bad()),
        }
    }

    /// Whether this payload is the one `phase` carries.
    pub fn fits(&self, phase: Phase) -> bool {
        matches!(
            (phase, self),
            (Phase::Distribution, Payload::Delivery)
                | (Phase::Distillation, Payload::Outcome(_))
                | (Phase::AngleAnnouncement, Payload::Angle(_))
                | (Phase::ResultReport, Payload::Bit(_))
                | (Phase::Handoff, Payload::Control(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub phase: Phase,
    pub from: Party,
    pub to: Party,
    pub payload: Payload,
}

/// Append-only, totally ordered log of a run's classical traffic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    run_id: String,
    seed: u64,
    messages: Vec<Message>,
}

impl Transcript {
    pub fn new(run_id: impl Into<String>, seed: u64) -> Self {
        Self {
            run_id: run_id.into(),
            seed,
            messages: Vec::new(),
        }
    }

    /// Rebuilds a transcript from stored messages without checking them;
    /// ordering problems are reported by [`audit`].
    pub fn from_messages(run_id: impl Into<String>, seed: u64, messages: Vec<Message>) -> Self {
        Self {
            run_id: run_id.into(),
            seed,
            messages,
        }
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn push(&mut self, phase: Phase, from: Party, to: Party, payload: Payload) -> u64 {
        let seq = self.messages.last().map_or(1, |m| m.seq + 1);
        self.messages.push(Message {
            seq,
            phase,
            from,
            to,
            payload,
        });
        seq
    }

    pub fn in_phase(&self, phase: Phase) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.phase == phase)
    }

    /// Copy with an extra message at `position`, sequence numbers
    /// reassigned `1..=n`. Used to build faulty transcripts for analysis.
    pub fn with_injected(&self, position: usize, phase: Phase, from: Party, to: Party, payload: Payload) -> Self {
        let mut messages = self.messages.clone();
        let at = position.min(messages.len());
        messages.insert(
            at,
            Message {
                seq: 0,
                phase,
                from,
                to,
                payload,
            },
        );
        for (i, m) in messages.iter_mut().enumerate() {
            m.seq = i as u64 + 1;
        }
        Self {
            run_id: self.run_id.clone(),
            seed: self.seed,
            messages,
        }
    }
}

/// What Alice can infer from the two reported outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellClass {
    PhiClass,
    PsiClass,
}

impl BellClass {
    pub fn infer(outcomes: OutcomePair) -> Self {
        if outcomes.is_same() {
            BellClass::PhiClass
        } else {
            BellClass::PsiClass
        }
    }
}

/// One round of the angle exchange with Bob1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BqcRound {
    /// 1-based round number.
    pub index: usize,
    pub theta: AngleIndex,
    pub sent_angle: AngleIndex,
    pub class: BellClass,
    pub bit: Option<u8>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_negation_wraps() {
        assert_eq!(AngleIndex::new(1).unwrap().negated(), AngleIndex::new(7).unwrap());
        assert_eq!(AngleIndex::new(0).unwrap().negated(), AngleIndex::new(0).unwrap());
        assert_eq!(AngleIndex::new(4).unwrap().negated(), AngleIndex::new(4).unwrap());
        assert!(AngleIndex::new(8).is_err());
    }

    #[test]
    fn angle_text_round_trip() {
        for a in AngleIndex::all() {
            assert_eq!(a.to_string().parse::<AngleIndex>().unwrap(), a);
        }
        assert!("9pi/4".parse::<AngleIndex>().is_err());
        assert!("pi/4".parse::<AngleIndex>().is_err());
    }

    #[test]
    fn payload_text_round_trip() {
        for p in [
            Payload::Delivery,
            Payload::Outcome(QndOutcome::Shift),
            Payload::Outcome(QndOutcome::NoShift),
            Payload::Angle(AngleIndex::new(3).unwrap()),
            Payload::Bit(1),
            Payload::Control("handoff".into()),
        ] {
            assert_eq!(Payload::parse(p.kind(), &p.value()).unwrap(), p);
        }
        assert!(Payload::parse("measurement_bit", "2").is_err());
        assert!(Payload::parse("qnd_outcome", "theta").is_err());
    }

    #[test]
    fn class_inference_is_symmetric() {
        for o in OutcomePair::ALL {
            let swapped = OutcomePair::new(o.b, o.a);
            assert_eq!(BellClass::infer(o), BellClass::infer(swapped));
        }
        assert_eq!(
            BellClass::infer(OutcomePair::new(QndOutcome::Shift, QndOutcome::Shift)),
            BellClass::PhiClass
        );
        assert_eq!(
            BellClass::infer(OutcomePair::new(QndOutcome::NoShift, QndOutcome::Shift)),
            BellClass::PsiClass
        );
    }

    #[test]
    fn push_assigns_increasing_seq() {
        let mut t = Transcript::new("r", 0);
        assert_eq!(
            t.push(Phase::Distribution, Party::Source, Party::Bob1, Payload::Delivery),
            1
        );
        assert_eq!(
            t.push(Phase::Distribution, Party::Source, Party::Bob2, Payload::Delivery),
            2
        );
        let injected = t.with_injected(
            1,
            Phase::Distillation,
            Party::Bob1,
            Party::Bob2,
            Payload::Outcome(QndOutcome::Shift),
        );
        let seqs: Vec<u64> = injected.messages().iter().map(|m| m.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
        assert_eq!(injected.messages()[1].from, Party::Bob1);
    }
}
