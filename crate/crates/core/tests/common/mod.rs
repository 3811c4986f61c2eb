#![allow(dead_code)]

use hyperdistill::protocol::{AngleIndex, Party, Payload, Phase, Transcript, ViolationKind};
use hyperdistill::qnd::QndOutcome;
use hyperdistill::RngStream;

pub const INJECTABLE: [ViolationKind; 4] = [
    ViolationKind::BobToBob,
    ViolationKind::AliceFeedback,
    ViolationKind::AngleToBob2,
    ViolationKind::ResultFromBob2,
];

fn pick<T: Copy>(rng: &mut RngStream, items: &[T]) -> T {
    items[rng.below(items.len())]
}

fn outcome(rng: &mut RngStream) -> QndOutcome {
    pick(rng, &[QndOutcome::Shift, QndOutcome::NoShift])
}

/// Inserts one message at a random position that breaks exactly the rule
/// `kind` and no other.
pub fn inject(t: &Transcript, kind: ViolationKind, rng: &mut RngStream) -> Transcript {
    let (phase, from, to, payload) = match kind {
        ViolationKind::BobToBob => {
            let (from, to) = pick(rng, &[(Party::Bob1, Party::Bob2), (Party::Bob2, Party::Bob1)]);
            match rng.below(3) {
                0 => (Phase::Distribution, from, to, Payload::Delivery),
                1 => (Phase::Distillation, from, to, Payload::Outcome(outcome(rng))),
                _ => (Phase::Handoff, from, to, Payload::Control("sync".into())),
            }
        }
        ViolationKind::AliceFeedback => {
            let to = pick(rng, &[Party::Bob1, Party::Bob2]);
            if rng.bernoulli(0.5) {
                (Phase::Distillation, Party::Alice, to, Payload::Outcome(outcome(rng)))
            } else {
                (Phase::Distribution, Party::Alice, to, Payload::Delivery)
            }
        }
        ViolationKind::AngleToBob2 => {
            let angle = AngleIndex::new(rng.below(AngleIndex::COUNT) as u8).unwrap();
            (
                Phase::AngleAnnouncement,
                Party::Alice,
                Party::Bob2,
                Payload::Angle(angle),
            )
        }
        ViolationKind::ResultFromBob2 => {
            let bit = rng.below(2) as u8;
            (Phase::ResultReport, Party::Bob2, Party::Alice, Payload::Bit(bit))
        }
        ViolationKind::Malformed => unreachable!("not injectable"),
    };
    let position = rng.below(t.len() + 1);
    t.with_injected(position, phase, from, to, payload)
}
