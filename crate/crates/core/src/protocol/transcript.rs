//! Line format for transcripts: `seq|phase|from|to|payload_kind|payload_value`.
//!
//! A file starts with `# run_id=<id>` and `# seed=<n>` header lines; any
//! other line beginning with `#` and blank lines are ignored on read.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::protocol::{Message, Party, Payload, Phase, Transcript};

pub fn format_message(m: &Message) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}",
        m.seq,
        m.phase,
        m.from,
        m.to,
        m.payload.kind(),
        m.payload.value()
    )
}

pub fn parse_message(line: &str, line_no: usize) -> Result<Message> {
    let err = |reason: String| Error::TranscriptParse { line: line_no, reason };
    let fields: Vec<&str> = line.split('|').collect();
    if fields.len() != 6 {
        return Err(err(format!("expected 6 fields, found {}", fields.len())));
    }
    let seq = fields[0]
        .parse::<u64>()
        .map_err(|e| err(format!("bad seq `{}`: {e}", fields[0])))?;
    let phase = Phase::parse(fields[1]).ok_or_else(|| err(format!("unknown phase `{}`", fields[1])))?;
    let from = Party::parse(fields[2]).ok_or_else(|| err(format!("unknown party `{}`", fields[2])))?;
    let to = Party::parse(fields[3]).ok_or_else(|| err(format!("unknown party `{}`", fields[3])))?;
    let payload = Payload::parse(fields[4], fields[5]).map_err(|e| err(e.to_string()))?;
    Ok(Message {
        seq,
        phase,
        from,
        to,
        payload,
    })
}

/// Serializes a transcript, one message per line, newline-terminated.
pub fn to_text(t: &Transcript) -> String {
    let mut out = String::with_capacity(48 * (t.len() + 2));
    let _ = writeln!(out, "# run_id={}", t.run_id());
    let _ = writeln!(out, "# seed={}", t.seed());
    for m in t.messages() {
        out.push_str(&format_message(m));
        out.push('\n');
    }
    out
}

pub fn from_text(text: &str) -> Result<Transcript> {
    let mut run_id = String::new();
    let mut seed = 0u64;
    let mut messages = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(id) = comment.strip_prefix("run_id=") {
                run_id = id.to_string();
            } else if let Some(s) = comment.strip_prefix("seed=") {
                seed = s.parse().map_err(|e| Error::TranscriptParse {
                    line: line_no,
                    reason: format!("bad seed `{s}`: {e}"),
                })?;
            }
            continue;
        }
        messages.push(parse_message(line, line_no)?);
    }
    Ok(Transcript::from_messages(run_id, seed, messages))
}
