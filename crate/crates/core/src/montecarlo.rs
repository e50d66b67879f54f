//! Event-level simulation: sample interferers, fades and ALOHA activity,
//! then apply the SIR success rules literally.
//!
//! Each trial draws from its own ChaCha streams (see [`stream`]), so results
//! do not depend on how trials are spread over threads. The estimators use a
//! fused loop that stops drawing as soon as every success event of the slot
//! has failed; interference only grows as interferers are added, so the
//! outcome is the one the literal path ([`MonteCarlo::replay_dependent`],
//! [`MonteCarlo::replay_independent`]) produces from the same streams.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ppp::{sample_points_into, sample_ppp, PppRealization, RadialSampler};
use crate::retransmission::AttemptDistribution;
use crate::rng::SeedStream;
use crate::scenario::{ChannelParams, Combiner, Interference, PathLossLaw, Position, Scenario};
use crate::slot::{aloha_active, draw_interferers, draw_signals, draw_slot, exp1};
use crate::slot::{InterfererDraws, SignalFading, SlotDraw};
use crate::stats::EstimateWithError;
use crate::subset::SubsetMask;

pub const DEFAULT_WINDOW_RADIUS: f64 = 20.0;
pub const MIN_TRIALS: u64 = 1000;

const CHUNK: u64 = 1 << 13;

/// Stream id of a role within one attempt of a trial.
///
/// Dependent model: role 0 feeds [`draw_slot`], role 1 the layout (drawn
/// once, in attempt 0). Independent model: role 0 feeds the signal fades,
/// roles `1 + 2j` and `2 + 2j` the layout and interferer draws seen by
/// receiver `j` (0 is the destination, `k + 1` relay `k`).
pub fn stream(attempt: usize, role: u64) -> u64 {
    ((attempt as u64) << 32) | role
}

/// What a trial counts as a success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    /// Union of the direct and relay-aided events.
    Delivery,
    /// Intersection of the events in the mask (the empty mask always holds).
    Joint(SubsetMask),
}

/// Success events of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub direct: bool,
    /// Source to relay `k` decoded.
    pub sr: Vec<bool>,
    /// Relay `k` to destination decoded on its own (SC).
    pub rd: Vec<bool>,
    /// Direct and relay `k` copies decoded after combining (MRC).
    pub combined: Vec<bool>,
    pub sc: bool,
    pub mrc: bool,
}

impl SlotOutcome {
    pub fn overall(&self, combiner: Combiner) -> bool {
        match combiner {
            Combiner::Sc => self.sc,
            Combiner::Mrc => self.mrc,
        }
    }

    /// Whether every event of `subset` occurred.
    pub fn satisfies(&self, subset: SubsetMask, combiner: Combiner) -> bool {
        let relay = |k: usize| {
            self.sr[k]
                && match combiner {
                    Combiner::Sc => self.rd[k],
                    Combiner::Mrc => self.combined[k],
                }
        };
        (!subset.includes_direct() || self.direct) && subset.relays().all(relay)
    }
}

/// Received signal powers of one slot.
#[derive(Debug, Clone)]
struct Signals {
    sd: f64,
    sr: Vec<f64>,
    rd: Vec<f64>,
}

/// Per-scenario constants shared by every trial.
#[derive(Debug, Clone)]
struct Link {
    law: PathLossLaw,
    /// Destination first, then relays.
    receivers: Vec<Position>,
    /// Distinct receiver positions and the index of each receiver among them.
    sites: Vec<Position>,
    site_of: Vec<usize>,
    source_sd: f64,
    source_sr: Vec<f64>,
    g_rd: Vec<f64>,
    theta: f64,
    aloha_p: f64,
    lambda: f64,
    combiner: Combiner,
    target: Target,
}

impl Link {
    fn new(scenario: &Scenario, params: &ChannelParams, target: Target) -> Self {
        let gains = scenario.gains();
        let mut receivers = vec![scenario.destination()];
        receivers.extend_from_slice(scenario.relays());
        let mut sites: Vec<Position> = Vec::new();
        let site_of = receivers
            .iter()
            .map(|r| match sites.iter().position(|s| s == r) {
                Some(i) => i,
                None => {
                    sites.push(*r);
                    sites.len() - 1
                }
            })
            .collect();
        Link {
            law: scenario.law(),
            receivers,
            sites,
            site_of,
            source_sd: gains.source_sd(),
            source_sr: gains.sr.iter().map(|g| gains.source_power * g).collect(),
            g_rd: gains.rd,
            theta: params.theta,
            aloha_p: params.aloha_p,
            lambda: params.lambda,
            combiner: params.combiner,
            target,
        }
    }

    fn n(&self) -> usize {
        self.g_rd.len()
    }

    fn signals(&self, f: &SignalFading) -> Signals {
        Signals {
            sd: f.h_sd * self.source_sd,
            sr: f
                .h_sr
                .iter()
                .zip(&self.source_sr)
                .map(|(h, g)| h * g)
                .collect(),
            rd: f.h_rd.iter().zip(&self.g_rd).map(|(h, g)| h * g).collect(),
        }
    }

    #[inline]
    fn gain(&self, x: Position, receiver: usize) -> f64 {
        self.law.gain_sq(x.distance_sq(self.receivers[receiver]))
    }

    #[inline]
    fn beats(&self, signal: f64, interference: f64) -> bool {
        signal > self.theta * interference
    }

    fn outcome(&self, s: &Signals, i: &[f64]) -> SlotOutcome {
        let i_d = i[0];
        let direct = self.beats(s.sd, i_d);
        let sr: Vec<bool> = (0..self.n())
            .map(|k| self.beats(s.sr[k], i[k + 1]))
            .collect();
        let rd: Vec<bool> = (0..self.n()).map(|k| self.beats(s.rd[k], i_d)).collect();
        let combined: Vec<bool> = (0..self.n())
            .map(|k| self.beats(s.sd + s.rd[k], i_d))
            .collect();
        let sc = direct || (0..self.n()).any(|k| sr[k] && rd[k]);
        let mrc = direct || (0..self.n()).any(|k| sr[k] && combined[k]);
        SlotOutcome {
            direct,
            sr,
            rd,
            combined,
            sc,
            mrc,
        }
    }

    /// Destination-side event of relay `k` under the configured combiner.
    #[inline]
    fn relay_at_destination(&self, s: &Signals, k: usize, i_d: f64) -> bool {
        match self.combiner {
            Combiner::Sc => self.beats(s.rd[k], i_d),
            Combiner::Mrc => self.beats(s.sd + s.rd[k], i_d),
        }
    }

    #[inline]
    fn relay_event(&self, s: &Signals, k: usize, i: &[f64]) -> bool {
        self.beats(s.sr[k], i[k + 1]) && self.relay_at_destination(s, k, i[0])
    }

    #[inline]
    fn success(&self, s: &Signals, i: &[f64]) -> bool {
        match self.target {
            Target::Delivery => {
                self.beats(s.sd, i[0]) || (0..self.n()).any(|k| self.relay_event(s, k, i))
            }
            Target::Joint(mask) => {
                (!mask.includes_direct() || self.beats(s.sd, i[0]))
                    && mask.relays().all(|k| self.relay_event(s, k, i))
            }
        }
    }

    /// Destination-side part of the target given `I_d` alone.
    #[inline]
    fn destination_ok(&self, s: &Signals, i_d: f64) -> bool {
        match self.target {
            Target::Delivery => {
                self.beats(s.sd, i_d) || (0..self.n()).any(|k| self.relay_at_destination(s, k, i_d))
            }
            Target::Joint(mask) => {
                (!mask.includes_direct() || self.beats(s.sd, i_d))
                    && mask.relays().all(|k| self.relay_at_destination(s, k, i_d))
            }
        }
    }

    /// Fused dependent slot over the points yielded by `next_point`.
    fn dependent_slot<R: Rng, F: FnMut() -> Option<Position>>(
        &self,
        rng: &mut R,
        mut next_point: F,
        (i, site_gain): &mut (Vec<f64>, Vec<f64>),
    ) -> bool {
        let s = self.signals(&draw_signals(self.n(), rng));
        i.clear();
        i.resize(self.n() + 1, 0.0);
        site_gain.resize(self.sites.len(), 0.0);
        while let Some(x) = next_point() {
            let active = aloha_active(rng, self.aloha_p);
            if active {
                for (g, site) in site_gain.iter_mut().zip(&self.sites) {
                    *g = self.law.gain_sq(x.distance_sq(*site));
                }
            }
            for (j, acc) in i.iter_mut().enumerate() {
                let h = exp1(rng);
                if active {
                    *acc += h * site_gain[self.site_of[j]];
                }
            }
            if active && !self.success(&s, i) {
                return false;
            }
        }
        self.success(&s, i)
    }

    /// Interference at receiver `j` from its own layout, stopping once
    /// `alive` turns false. Returns `None` on early stop.
    fn independent_receiver<F: Fn(f64) -> bool>(
        &self,
        key: SeedStream,
        attempt: usize,
        j: usize,
        radius: f64,
        center: Position,
        alive: F,
    ) -> Option<f64> {
        let mut geo = key.rng(stream(attempt, 1 + 2 * j as u64));
        let mut draws = key.rng(stream(attempt, 2 + 2 * j as u64));
        let mut sampler = RadialSampler::new(self.lambda, center, radius);
        let mut acc = 0.0;
        while let Some(x) = sampler.next(&mut geo) {
            let active = aloha_active(&mut draws, self.aloha_p);
            let h = exp1(&mut draws);
            if active {
                acc += h * self.gain(x, j);
                if !alive(acc) {
                    return None;
                }
            }
        }
        Some(acc)
    }

    fn independent_slot(
        &self,
        key: SeedStream,
        attempt: usize,
        center: Position,
        radius: f64,
    ) -> bool {
        let s = self.signals(&draw_signals(self.n(), &mut key.rng(stream(attempt, 0))));
        let i_d = match self.independent_receiver(key, attempt, 0, radius, center, |i_d| {
            self.destination_ok(&s, i_d)
        }) {
            Some(v) if self.destination_ok(&s, v) => v,
            _ => return false,
        };
        let relay_ok = |k: usize| {
            self.independent_receiver(key, attempt, k + 1, radius, center, |i_r| {
                self.beats(s.sr[k], i_r)
            })
            .is_some_and(|i_r| self.beats(s.sr[k], i_r))
        };
        match self.target {
            Target::Delivery => {
                self.beats(s.sd, i_d)
                    || (0..self.n()).any(|k| self.relay_at_destination(&s, k, i_d) && relay_ok(k))
            }
            Target::Joint(mask) => mask.relays().all(relay_ok),
        }
    }
}

/// Interference at the destination and at every relay from one layout.
pub fn interference_powers(
    scenario: &Scenario,
    ppp: &PppRealization,
    interferers: &InterfererDraws,
) -> Vec<f64> {
    let law = scenario.law();
    let mut receivers = vec![scenario.destination()];
    receivers.extend_from_slice(scenario.relays());
    let mut i = vec![0.0; receivers.len()];
    for (u, &x) in ppp.points().iter().enumerate() {
        for (j, &node) in receivers.iter().enumerate() {
            let h = interferers.fade(u, j);
            if interferers.active[u] {
                i[j] += h * law.gain_sq(x.distance_sq(node));
            }
        }
    }
    i
}

/// Outcome of a dependent-interference slot: one layout and one set of
/// activity indicators shared by every receiver.
pub fn simulate_slot(
    scenario: &Scenario,
    params: &ChannelParams,
    ppp: &PppRealization,
    draw: &SlotDraw,
) -> SlotOutcome {
    let link = Link::new(scenario, params, Target::Delivery);
    let i = interference_powers(scenario, ppp, &draw.interferers);
    link.outcome(&link.signals(&draw.signals), &i)
}

/// Outcome of an independent-interference slot. `receivers[j]` is the
/// layout and draws seen by receiver `j` (destination first); each
/// [`InterfererDraws`] has a single receiver column.
pub fn simulate_slot_independent(
    scenario: &Scenario,
    params: &ChannelParams,
    signals: &SignalFading,
    receivers: &[(PppRealization, InterfererDraws)],
) -> SlotOutcome {
    let link = Link::new(scenario, params, Target::Delivery);
    let i: Vec<f64> = receivers
        .iter()
        .enumerate()
        .map(|(j, (ppp, draws))| {
            let mut acc = 0.0;
            for (u, &x) in ppp.points().iter().enumerate() {
                let h = draws.fade(u, 0);
                if draws.active[u] {
                    acc += h * link.gain(x, j);
                }
            }
            acc
        })
        .collect();
    link.outcome(&link.signals(signals), &i)
}

/// Monte Carlo estimator of delivery probabilities and attempt counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub window_radius: f64,
    pub exec: Exec,
}

impl MonteCarlo {
    pub fn new(trials: u64) -> Self {
        MonteCarlo {
            trials,
            window_radius: DEFAULT_WINDOW_RADIUS,
            exec: Exec::default(),
        }
    }

    pub fn with_window(mut self, radius: f64) -> Self {
        self.window_radius = radius;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn validate(&self, params: &ChannelParams) -> Result<()> {
        params.validate()?;
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: self.trials as f64,
                reason: "at least 1000 trials are required",
            });
        }
        if !(self.window_radius.is_finite() && self.window_radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "window_radius",
                value: self.window_radius,
                reason: "window radius must be finite and > 0",
            });
        }
        Ok(())
    }

    /// Attempt (1-based) of the first success in `trial`, if within `t_max`.
    pub fn first_success(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
        trial: u64,
        t_max: usize,
    ) -> Option<usize> {
        let link = Link::new(scenario, params, Target::Delivery);
        let mut scratch = (Vec::new(), (Vec::new(), Vec::new()));
        self.first_success_with(
            &link,
            scenario,
            params,
            seed.point(trial),
            t_max,
            &mut scratch,
        )
    }

    fn first_success_with(
        &self,
        link: &Link,
        scenario: &Scenario,
        params: &ChannelParams,
        key: SeedStream,
        t_max: usize,
        (points, i): &mut (Vec<Position>, (Vec<f64>, Vec<f64>)),
    ) -> Option<usize> {
        let center = scenario.midpoint();
        let radius = self.window_radius;
        match params.interference {
            Interference::Dependent => {
                if t_max == 1 {
                    let mut geo = key.rng(stream(0, 1));
                    let mut sampler = RadialSampler::new(link.lambda, center, radius);
                    let ok = link.dependent_slot(
                        &mut key.rng(stream(0, 0)),
                        || sampler.next(&mut geo),
                        i,
                    );
                    return ok.then_some(1);
                }
                sample_points_into(
                    points,
                    link.lambda,
                    center,
                    radius,
                    &mut key.rng(stream(0, 1)),
                );
                (0..t_max).find_map(|a| {
                    let mut it = points.iter().copied();
                    link.dependent_slot(&mut key.rng(stream(a, 0)), || it.next(), i)
                        .then_some(a + 1)
                })
            }
            Interference::Independent => (0..t_max).find_map(|a| {
                link.independent_slot(key, a, center, radius)
                    .then_some(a + 1)
            }),
        }
    }

    /// Histogram of first-success attempts; the last bin counts failures.
    fn histogram(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        target: Target,
        seed: SeedStream,
        t_max: usize,
    ) -> Vec<u64> {
        let link = Link::new(scenario, params, target);
        let chunks = self.trials.div_ceil(CHUNK);
        let partial = self.exec.map(chunks as usize, |c| {
            let mut counts = vec![0u64; t_max + 1];
            let mut scratch = (Vec::new(), (Vec::new(), Vec::new()));
            let start = c as u64 * CHUNK;
            for trial in start..(start + CHUNK).min(self.trials) {
                let slot = self
                    .first_success_with(
                        &link,
                        scenario,
                        params,
                        seed.point(trial),
                        t_max,
                        &mut scratch,
                    )
                    .map_or(t_max, |t| t - 1);
                counts[slot] += 1;
            }
            counts
        });
        partial
            .into_iter()
            .fold(vec![0u64; t_max + 1], |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                acc
            })
    }

    /// Single-slot delivery probability; a fresh layout in every trial.
    pub fn estimate_delivery(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
    ) -> Result<EstimateWithError> {
        self.validate(params)?;
        let counts = self.histogram(scenario, params, Target::Delivery, seed, 1);
        Ok(EstimateWithError::from_counts(counts[0], self.trials))
    }

    /// Probability that every event of `subset` occurs in one slot.
    pub fn estimate_joint(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        subset: SubsetMask,
        seed: SeedStream,
    ) -> Result<EstimateWithError> {
        self.validate(params)?;
        if let Some(k) = subset.relays().find(|&k| k >= scenario.n_relays()) {
            return Err(Error::InvalidParameter {
                name: "subset",
                value: k as f64,
                reason: "relay index outside the scenario",
            });
        }
        let counts = self.histogram(scenario, params, Target::Joint(subset), seed, 1);
        Ok(EstimateWithError::from_counts(counts[0], self.trials))
    }

    /// Empirical law of the first successful attempt, censored at `t_max`.
    pub fn estimate_attempts(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        t_max: usize,
        seed: SeedStream,
    ) -> Result<AttemptDistribution> {
        self.validate(params)?;
        if t_max == 0 {
            return Err(Error::InvalidParameter {
                name: "t_max",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let counts = self.histogram(scenario, params, Target::Delivery, seed, t_max);
        let mut law = AttemptDistribution {
            pmf: Vec::with_capacity(t_max),
            cdf: Vec::with_capacity(t_max),
            pmf_stderr: Vec::with_capacity(t_max),
            cdf_stderr: Vec::with_capacity(t_max),
            replicates: self.trials,
        };
        let mut running = 0;
        for &c in &counts[..t_max] {
            running += c;
            let p = EstimateWithError::from_counts(c, self.trials);
            let f = EstimateWithError::from_counts(running, self.trials);
            law.pmf.push(p.mean);
            law.pmf_stderr.push(p.stderr);
            law.cdf.push(f.mean);
            law.cdf_stderr.push(f.stderr);
        }
        Ok(law)
    }

    /// Literal dependent-model slot for (`trial`, `attempt`): the layout,
    /// the slot draws and their outcome, from the estimator's streams.
    pub fn replay_dependent(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
        trial: u64,
        attempt: usize,
    ) -> Result<(PppRealization, SlotDraw, SlotOutcome)> {
        let key = seed.point(trial);
        let ppp = sample_ppp(
            params.lambda,
            scenario.midpoint(),
            self.window_radius,
            &mut key.rng(stream(0, 1)),
        )?;
        let draw = draw_slot(scenario, &ppp, params, &mut key.rng(stream(attempt, 0)));
        let outcome = simulate_slot(scenario, params, &ppp, &draw);
        Ok((ppp, draw, outcome))
    }

    /// Literal independent-model slot for (`trial`, `attempt`).
    pub fn replay_independent(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
        trial: u64,
        attempt: usize,
    ) -> Result<SlotOutcome> {
        let key = seed.point(trial);
        let n = scenario.n_relays();
        let signals = draw_signals(n, &mut key.rng(stream(attempt, 0)));
        let mut receivers = Vec::with_capacity(n + 1);
        for j in 0..=n as u64 {
            let ppp = sample_ppp(
                params.lambda,
                scenario.midpoint(),
                self.window_radius,
                &mut key.rng(stream(attempt, 1 + 2 * j)),
            )?;
            let draws = draw_interferers(
                ppp.len(),
                1,
                params.aloha_p,
                &mut key.rng(stream(attempt, 2 + 2 * j)),
            );
            receivers.push((ppp, draws));
        }
        Ok(simulate_slot_independent(
            scenario, params, &signals, &receivers,
        ))
    }
}
