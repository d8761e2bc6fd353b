//! Asynchronous round numbers for atomic steps.
//!
//! Round 0 is the set of Start steps and `l_0` is the last of them. For
//! `r ≥ 1`, `l_r` is the last step that delivers a round-`(r−1)` message and
//! round `r` is every step after `l_{r−1}` up to and including `l_r`. When no
//! round-`(r−1)` message is delivered after `l_{r−1}`, round `r` is the single
//! next step. Non-start steps that precede `l_0` are placed in round 1.

use super::trace::{EventKind, StepInput, Trace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundAssignment {
    /// Round of each atomic step.
    pub step_round: Vec<u32>,
    /// Round of each event (that of its step).
    pub event_round: Vec<u32>,
}

impl RoundAssignment {
    /// Round of the message sent by Send event `send`.
    pub fn message_round(&self, send: usize) -> u32 {
        self.event_round[send]
    }
}

pub fn assign_async_rounds(trace: &Trace) -> RoundAssignment {
    let steps = trace.steps.len();
    // Step index of the last delivery of each step's messages.
    let mut last_delivery: Vec<Option<usize>> = vec![None; steps];
    for e in &trace.events {
        if let EventKind::Deliver { send, .. } = e.kind {
            let s = trace.events[send].step;
            last_delivery[s] = last_delivery[s].max(Some(e.step));
        }
    }

    let mut step_round = vec![0u32; steps];
    let starts: Vec<usize> = (0..steps)
        .filter(|&s| trace.steps[s].input == StepInput::Start)
        .collect();
    let Some(&l0) = starts.last() else {
        return RoundAssignment {
            step_round,
            event_round: vec![0; trace.events.len()],
        };
    };
    let mut prev_block = starts;
    for (r, step) in step_round.iter_mut().zip(&trace.steps).take(l0) {
        if step.input != StepInput::Start {
            *r = 1;
        }
    }

    let mut end = l0;
    let mut r = 1u32;
    while end + 1 < steps {
        let target = prev_block.iter().filter_map(|&s| last_delivery[s]).max();
        let next_end = match target {
            Some(t) if t > end => t,
            _ => end + 1,
        };
        prev_block.clear();
        for (s, round) in step_round.iter_mut().enumerate().take(next_end + 1).skip(end + 1) {
            *round = r;
            prev_block.push(s);
        }
        // Early non-start steps share round 1 with the first regular block.
        if r == 1 {
            prev_block.extend((0..l0).filter(|&s| trace.steps[s].input != StepInput::Start));
        }
        end = next_end;
        r += 1;
    }

    let event_round = trace.events.iter().map(|e| step_round[e.step]).collect();
    RoundAssignment {
        step_round,
        event_round,
    }
}
