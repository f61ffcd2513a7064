//! Structured event stream emitted by the simulation environment.
//!
//! Three event kinds are produced, in processing order: `decision` (one per
//! policy query), `delivery` (one per GOP of every request set) and
//! `settlement` (one per matured reward). The JSON-lines encoding written by
//! [`JsonlSink`] is the external form consumed by reporting tools; in-process
//! consumers receive the typed values.

use std::io::Write;

use serde::Serialize;

use crate::action::Action;

/// One simulation event.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// A policy was queried at a decision point.
    Decision {
        set: u64,
        kind: DecisionKind,
        video: u32,
        /// 0-based GOP of the triggering request (tile decisions only).
        #[serde(skip_serializing_if = "Option::is_none")]
        gop: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        candidate_tile: Option<u16>,
        action_index: usize,
        action: Action,
    },
    /// One GOP's delivery outcome.
    Delivery {
        set: u64,
        gop: u32,
        video: u32,
        requested_viewport: u32,
        predicted_viewport: u32,
        /// Video was cached when the set began (base-layer hit criterion).
        base_hit: bool,
        /// Predicted-viewport tiles present in the virtual viewport when the
        /// GOP was processed (enhancement hit criterion).
        enh_hits: u16,
        delivered_base: u16,
        delivered_enh: u16,
        /// Delivered enhancement tiles that fall inside the *requested*
        /// viewport (what the user actually rendered).
        rendered_enh: u16,
        /// Requested-viewport tiles whose base layer was delivered.
        rendered_base: u16,
        backhaul_mbit: f64,
        elapsed_s: f64,
        /// Sum of distortion gains of all delivered tiles, in dB.
        delivered_gain_db: f64,
    },
    /// A pending transition's reward matured.
    Settlement {
        set: u64,
        origin_set: u64,
        action_index: usize,
        reward_db: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Video,
    Tile,
}

/// Consumer of the event stream.
pub trait EventSink {
    fn on_event(&mut self, event: &Event);
}

/// Discards everything.
pub struct NullSink;

impl EventSink for NullSink {
    fn on_event(&mut self, _event: &Event) {}
}

/// Writes one JSON object per line.
pub struct JsonlSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonlSink<W> {
    fn on_event(&mut self, event: &Event) {
        serde_json::to_writer(&mut self.out, event).expect("event serialises");
        self.out.write_all(b"\n").expect("event stream writable");
    }
}

/// Fans one stream out to two sinks.
pub struct TeeSink<'a, A: EventSink, B: EventSink> {
    pub first: &'a mut A,
    pub second: &'a mut B,
}

impl<A: EventSink, B: EventSink> EventSink for TeeSink<'_, A, B> {
    fn on_event(&mut self, event: &Event) {
        self.first.on_event(event);
        self.second.on_event(event);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_encoding_is_one_tagged_object_per_line() {
        let mut sink = JsonlSink::new(Vec::new());
        sink.on_event(&Event::Decision {
            set: 3,
            kind: DecisionKind::Tile,
            video: 7,
            gop: Some(2),
            candidate_tile: Some(5),
            action_index: 0,
            action: Action::NoOp,
        });
        sink.on_event(&Event::Settlement {
            set: 1003,
            origin_set: 3,
            action_index: 0,
            reward_db: 450.0,
        });
        let text = String::from_utf8(sink.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["type"], "decision");
        assert_eq!(first["kind"], "tile");
        assert_eq!(first["candidate_tile"], 5);
        let second: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(second["type"], "settlement");
        assert_eq!(second["origin_set"], 3);
    }
}
