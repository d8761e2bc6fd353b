//! Run configuration, world construction and latency measurement.

mod config;
mod report;
pub mod suites;
pub mod table;

pub use config::{ConfigError, RunConfig, Schedule};
pub use report::{check_safety, measure_good_case, Bound, HarnessError, LatencyReport, Measured, SafetyReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::protocol::{ProtoParams, ProtocolId};
use crate::scenarios::generic;
use crate::simnet::{accept_all, run, Delay, DelayPolicy, SendCtx, SimError, TimingModel, Trace, World};
use crate::time::Time;
use crate::types::{thresholds, Resilience};

impl RunConfig {
    pub fn resilience(&self) -> Resilience {
        let r = Resilience::new(self.n, self.f, self.protocol.setting(self.n, self.f));
        if self.override_resilience {
            r.overridden()
        } else {
            r
        }
    }

    pub fn delta(&self) -> Time {
        self.delta.unwrap_or(self.big_delta)
    }

    pub fn model(&self) -> TimingModel {
        match self.protocol {
            ProtocolId::Brb => TimingModel::Asynchrony,
            ProtocolId::PsyncVbb => TimingModel::PartialSynchrony {
                big_delta: self.big_delta,
                gst: self.gst,
            },
            _ => TimingModel::Synchrony {
                delta: self.delta(),
                big_delta: self.big_delta,
                sigma: self.sigma.unwrap_or(self.skew),
            },
        }
    }

    pub fn horizon(&self) -> Time {
        self.horizon.unwrap_or_else(|| {
            let base = self.big_delta * (40 * (self.f as i64 + 2));
            base + self.gst
        })
    }

    /// Start offsets: odd-indexed parties start `skew` late.
    pub fn offsets(&self) -> Vec<Time> {
        (0..self.n)
            .map(|p| if p % 2 == 1 { self.skew } else { Time::ZERO })
            .collect()
    }

    pub fn params(&self) -> Result<ProtoParams, ConfigError> {
        let t = thresholds(&self.resilience())?;
        Ok(ProtoParams {
            protocol: self.protocol,
            t,
            broadcaster: 0,
            big_delta: self.big_delta,
            m: self.m,
            input: self.input.clone(),
            valid: accept_all(),
        })
    }

    /// The honest-link delay policy selected by `schedule`.
    pub fn delay_policy(&self) -> Box<dyn DelayPolicy> {
        let model = self.model();
        let unit = match model {
            TimingModel::Synchrony { delta, .. } => delta,
            TimingModel::PartialSynchrony { big_delta, .. } => big_delta,
            TimingModel::Asynchrony => Time::int(1),
        };
        match self.schedule {
            Schedule::Uniform => Box::new(move |_: &SendCtx<'_>| Delay::After(unit)),
            Schedule::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Box::new(move |ctx: &SendCtx<'_>| {
                    let d = match *ctx.model {
                        // Quarter steps in [0, δ].
                        TimingModel::Synchrony { delta, .. } => delta * rng.random_range(0..=4i64) / 4,
                        TimingModel::PartialSynchrony { big_delta, gst } => {
                            let slack = (gst - ctx.send_time).max(Time::ZERO);
                            (slack + big_delta) * rng.random_range(0..=4i64) / 4
                        }
                        TimingModel::Asynchrony => Time::new(rng.random_range(2..=60i64), 2),
                    };
                    Delay::After(d)
                })
            }
            Schedule::Layered { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Box::new(move |ctx: &SendCtx<'_>| {
                    let half_steps = if ctx.from_start_step {
                        rng.random_range(2..=20i64)
                    } else {
                        rng.random_range(20..=60i64)
                    };
                    Delay::After(Time::new(half_steps, 2))
                })
            }
        }
    }

    pub fn build_world(&self) -> Result<World, ConfigError> {
        let params = self.params()?;
        let model = self.model();
        model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut roles = params.honest_roles();
        let offsets = self.offsets();
        if let Some(adv) = self.adversary {
            generic::install(adv, &params, &mut roles, &offsets, self)?;
        } else if !self.broadcaster_honest {
            roles[params.broadcaster] = crate::simnet::Role::Byzantine(Box::new(crate::adversary::Silent));
        }
        Ok(World {
            resilience: self.resilience(),
            model,
            roles,
            start_offsets: offsets,
            delay: self
                .adversary
                .and_then(|a| generic::delay_override(a, self))
                .unwrap_or_else(|| self.delay_policy()),
            broadcaster: params.broadcaster,
            external_validity: params.valid,
            separate_keys: false,
        })
    }

    pub fn run(&self) -> Result<Trace, HarnessError> {
        let world = self.build_world()?;
        run(world, self.horizon()).map_err(HarnessError::Sim)
    }

    /// The good-case bound for this protocol and timing.
    pub fn bound(&self) -> Bound {
        let d = self.delta();
        let big = self.big_delta;
        match self.protocol {
            ProtocolId::Brb | ProtocolId::PsyncVbb => Bound::Rounds(2),
            ProtocolId::Bb2Delta => Bound::Time(d * 2),
            ProtocolId::BbN3 | ProtocolId::BbSyncStart => Bound::Time(big + d),
            ProtocolId::Bb15 => {
                let grid = crate::proto_sync::DGrid::new(self.m, big);
                if grid.index_of(d).is_some() {
                    Bound::Time(big + d * 3 / 2)
                } else {
                    Bound::Time(big + big / (2 * self.m as i64) + d * 3 / 2)
                }
            }
        }
    }
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}
