//! Checks a transcript against the double-server communication rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{Party, Phase, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// (a) the servers talked to each other.
    BobToBob,
    /// (b) Alice sent something to a server before distillation finished.
    AliceFeedback,
    /// (c) an angle went to Bob2.
    AngleToBob2,
    /// (d) Bob2 reported a measurement bit.
    ResultFromBob2,
    /// Sequence numbers out of order or payload not matching the phase.
    Malformed,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::BobToBob => "a",
            ViolationKind::AliceFeedback => "b",
            ViolationKind::AngleToBob2 => "c",
            ViolationKind::ResultFromBob2 => "d",
            ViolationKind::Malformed => "malformed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub seq: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn kinds(&self) -> Vec<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed {
            return write!(f, "PASS");
        }
        write!(f, "FAIL ({} violations)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  seq {} [{}] {}", v.seq, v.kind.code(), v.detail)?;
        }
        Ok(())
    }
}

pub fn audit(transcript: &Transcript) -> AuditReport {
    let mut violations = Vec::new();
    let mut last_seq = None;
    for m in transcript.messages() {
        let mut flag = |kind, detail: String| {
            violations.push(Violation {
                seq: m.seq,
                kind,
                detail,
            })
        };
        if last_seq.is_some_and(|s| m.seq <= s) {
            flag(ViolationKind::Malformed, format!("seq {} does not increase", m.seq));
        }
        last_seq = Some(m.seq);
        if !m.payload.fits(m.phase) {
            flag(
                ViolationKind::Malformed,
                format!("{} payload in {} phase", m.payload.kind(), m.phase),
            );
        }
        if m.from.is_bob() && m.to.is_bob() {
            flag(ViolationKind::BobToBob, format!("{} -> {}", m.from, m.to));
        }
        if m.from == Party::Alice && m.to.is_bob() && matches!(m.phase, Phase::Distribution | Phase::Distillation) {
            flag(
                ViolationKind::AliceFeedback,
                format!("Alice -> {} during {}", m.to, m.phase),
            );
        }
        if m.phase == Phase::AngleAnnouncement && m.to == Party::Bob2 {
            flag(ViolationKind::AngleToBob2, format!("angle sent by {} to Bob2", m.from));
        }
        if m.phase == Phase::ResultReport && m.from == Party::Bob2 {
            flag(ViolationKind::ResultFromBob2, format!("Bob2 -> {} result report", m.to));
        }
    }
    AuditReport {
        passed: violations.is_empty(),
        violations,
    }
}
