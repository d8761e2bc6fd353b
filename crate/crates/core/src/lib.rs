//! Byzantine broadcast protocols with optimal good-case latency, a
//! deterministic discrete-event simulator to run them on, scripted adversarial
//! scenarios and a measurement harness.

pub mod adversary;
pub mod harness;
pub mod proto_async;
pub mod proto_psync;
pub mod proto_sync;
pub mod protocol;
pub mod scenarios;
pub mod sig;
pub mod simnet;
pub mod time;
pub mod types;

pub use harness::{LatencyReport, RunConfig};
pub use protocol::ProtocolId;
pub use scenarios::{ScenarioName, VerdictReport};
pub use sig::{extract_broadcaster_values, sign, Body, Certificate, Message, Proof, Signed};
pub use time::Time;
pub use types::{thresholds, PartyId, Resilience, Setting, ThresholdSet, Value};
