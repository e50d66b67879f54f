//! The five joint probabilities of the one-relay case, written out directly
//! for dependent interference. Kept separate from the general engine so the
//! two can be compared.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_plane, QuadratureSpec};
use crate::scenario::{ChannelParams, Position, Scenario};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneRelayTerms {
    pub direct: f64,
    pub relay_sc: f64,
    pub direct_and_relay_sc: f64,
    pub relay_mrc: f64,
    pub direct_and_relay_mrc: f64,
}

impl OneRelayTerms {
    pub fn omega_sc(&self) -> f64 {
        self.direct + self.relay_sc - self.direct_and_relay_sc
    }

    pub fn omega_mrc(&self) -> f64 {
        self.direct + self.relay_mrc - self.direct_and_relay_mrc
    }
}

pub fn one_relay_closed_forms(
    scenario: &Scenario,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<OneRelayTerms> {
    params.validate()?;
    if scenario.n_relays() != 1 {
        return Err(Error::InvalidParameter {
            name: "relays",
            value: scenario.n_relays() as f64,
            reason: "closed forms need exactly one relay",
        });
    }
    let law = scenario.law();
    let d = scenario.destination();
    let r = scenario.relays()[0];
    let th = scenario.thresholds(params.theta);
    let (t_sd, t_sr, t_rd) = (th.sd, th.sr[0], th.rd[0]);
    let p = params.aloha_p;
    let lambda = params.lambda;

    let g = |x: Position, node: Position| law.gain_sq(x.distance_sq(node));
    let exp_of = |dest_arg: f64, with_relay: bool| -> Result<f64> {
        if lambda * p == 0.0 {
            return Ok(1.0);
        }
        let integrand = |x: Position| {
            let mut den = 1.0 + dest_arg * g(x, d);
            if with_relay {
                den *= 1.0 + t_sr * g(x, r);
            }
            1.0 - (p / den + 1.0 - p)
        };
        let others: &[Position] = if with_relay { &[r] } else { &[] };
        let i = integrate_plane(integrand, &spec.centered(d, others))?;
        Ok((-lambda * i.value).exp())
    };

    let direct = exp_of(t_sd, false)?;
    let relay_sc = exp_of(t_rd, true)?;
    let direct_and_relay_sc = exp_of(t_sd + t_rd, true)?;
    let direct_and_relay_mrc = exp_of(t_sd, true)?;
    let gains = scenario.gains();
    let eta = 1.0 / (1.0 - gains.source_sd() / gains.rd[0]);
    let relay_mrc = eta * relay_sc + (1.0 - eta) * direct_and_relay_mrc;

    Ok(OneRelayTerms {
        direct,
        relay_sc,
        direct_and_relay_sc,
        relay_mrc,
        direct_and_relay_mrc,
    })
}
