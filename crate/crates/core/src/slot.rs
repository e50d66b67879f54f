//! Per-slot random draws: Rayleigh power fades and ALOHA activity.
//!
//! Draw order is part of the contract (the Monte Carlo fast path replays it):
//! signal fades first (`h_sd`, then `h_sr[k]`, `h_rd[k]` for each relay),
//! then for each interferer its activity indicator followed by one fade per
//! receiver (destination first, then relays in order).

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::ppp::PppRealization;
use crate::scenario::{ChannelParams, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SignalFading {
    pub h_sd: f64,
    pub h_sr: Vec<f64>,
    pub h_rd: Vec<f64>,
}

/// Activity and fades of every interferer towards a fixed list of receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfererDraws {
    pub active: Vec<bool>,
    /// Row-major: `fading[u * receivers + j]`.
    pub fading: Vec<f64>,
    pub receivers: usize,
}

impl InterfererDraws {
    pub fn fade(&self, interferer: usize, receiver: usize) -> f64 {
        self.fading[interferer * self.receivers + receiver]
    }
}

/// Every random quantity of one slot under dependent interference.
/// Receiver 0 is the destination, receiver `k + 1` is relay `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDraw {
    pub signals: SignalFading,
    pub interferers: InterfererDraws,
}

#[inline]
pub(crate) fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// ALOHA indicator; degenerate probabilities consume no randomness.
#[inline]
pub(crate) fn aloha_active<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

pub fn draw_signals<R: Rng + ?Sized>(n_relays: usize, rng: &mut R) -> SignalFading {
    let h_sd = exp1(rng);
    let mut h_sr = Vec::with_capacity(n_relays);
    let mut h_rd = Vec::with_capacity(n_relays);
    for _ in 0..n_relays {
        h_sr.push(exp1(rng));
        h_rd.push(exp1(rng));
    }
    SignalFading { h_sd, h_sr, h_rd }
}

pub fn draw_interferers<R: Rng + ?Sized>(
    count: usize,
    receivers: usize,
    aloha_p: f64,
    rng: &mut R,
) -> InterfererDraws {
    let mut active = Vec::with_capacity(count);
    let mut fading = Vec::with_capacity(count * receivers);
    for _ in 0..count {
        active.push(aloha_active(rng, aloha_p));
        for _ in 0..receivers {
            fading.push(exp1(rng));
        }
    }
    InterfererDraws {
        active,
        fading,
        receivers,
    }
}

/// Fresh fades on every link and one shared activity indicator per interferer.
pub fn draw_slot<R: Rng + ?Sized>(
    scenario: &Scenario,
    ppp: &PppRealization,
    params: &ChannelParams,
    rng: &mut R,
) -> SlotDraw {
    let n = scenario.n_relays();
    let signals = draw_signals(n, rng);
    let interferers = draw_interferers(ppp.len(), n + 1, params.aloha_p, rng);
    SlotDraw {
        signals,
        interferers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppp::sample_ppp;
    use crate::rng::SeedStream;
    use crate::scenario::Position;

    #[test]
    fn aloha_extremes() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let mut rng = SeedStream::new(2).rng(0);
        let ppp = sample_ppp(1.0, s.midpoint(), 5.0, &mut rng).unwrap();
        assert!(!ppp.is_empty());
        for (p, expect) in [(0.0, false), (1.0, true)] {
            let params = ChannelParams::new(1.0, 1.0, p).unwrap();
            let d = draw_slot(&s, &ppp, &params, &mut rng);
            assert!(d.interferers.active.iter().all(|&a| a == expect));
            assert_eq!(d.interferers.fading.len(), 2 * ppp.len());
        }
    }

    #[test]
    fn fades_are_unit_mean_exponential() {
        let mut rng = SeedStream::new(3).rng(0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let h = exp1(&mut rng);
            assert!(h >= 0.0);
            sum += h;
        }
        assert!((sum / n as f64 - 1.0).abs() < 3e-3);
    }
}
