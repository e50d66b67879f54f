//! Joint exceedance of MRC-combined powers sharing one direct-link fade.
//!
//! For `h_sd, h_rd[k]` unit exponential and independent,
//! `P[h_sd g_sd + h_rd[k] g_rd[k] > beta for all k]` is
//! `eta * prod_k exp(-beta / g_rd[k]) + (1 - eta) * exp(-beta / g_sd)` with
//! `eta = 1 / (1 - sum_k g_sd / g_rd[k])`. The identity holds for either
//! sign of `eta`; only a vanishing denominator is excluded.

use crate::error::{Error, Result};
use crate::scenario::{Scenario, ETA_SINGULARITY_TOLERANCE};

#[derive(Debug, Clone, PartialEq)]
pub struct Eta {
    pub value: f64,
    pub relays: Vec<usize>,
}

/// `eta` from the direct-link gain and the gains of the chosen relays.
/// `source_gain` must already include any source power scaling.
pub fn eta_from_gains(source_gain: f64, relay_gains: &[f64]) -> Result<f64> {
    let sum: f64 = relay_gains.iter().map(|g| source_gain / g).sum();
    let denominator = 1.0 - sum;
    if denominator.abs() < ETA_SINGULARITY_TOLERANCE || !denominator.is_finite() {
        return Err(Error::EtaSingular {
            relays: (0..relay_gains.len()).collect(),
            denominator,
        });
    }
    Ok(1.0 / denominator)
}

pub fn eta_for(scenario: &Scenario, relays: &[usize]) -> Result<Eta> {
    let gains = scenario.gains();
    let chosen: Vec<f64> = relays.iter().map(|&k| gains.rd[k]).collect();
    eta_from_gains(gains.source_sd(), &chosen)
        .map(|value| Eta {
            value,
            relays: relays.to_vec(),
        })
        .map_err(|e| match e {
            Error::EtaSingular { denominator, .. } => Error::EtaSingular {
                relays: relays.to_vec(),
                denominator,
            },
            other => other,
        })
}

/// Raw (unclamped) joint exceedance probability from gains.
pub fn exceedance_from_gains(source_gain: f64, relay_gains: &[f64], beta: f64) -> Result<f64> {
    let eta = eta_from_gains(source_gain, relay_gains)?;
    let relay_term: f64 = relay_gains.iter().map(|g| (-beta / g).exp()).product();
    Ok(eta * relay_term + (1.0 - eta) * (-beta / source_gain).exp())
}

/// Joint exceedance for the relays of `scenario` listed in `relays`.
pub fn mrc_exceedance(scenario: &Scenario, relays: &[usize], beta: f64) -> Result<f64> {
    let gains = scenario.gains();
    let eta = eta_for(scenario, relays)?.value;
    let relay_term: f64 = relays
        .iter()
        .map(|&k| (-beta / gains.rd[k]).exp())
        .product();
    Ok(eta * relay_term + (1.0 - eta) * (-beta / gains.source_sd()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_interval;
    use crate::scenario::Position;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `E_hsd[ prod_k P[h_rd_k > (beta - h_sd g_sd) / g_rd_k] ]` by 1-D quadrature.
    fn brute_force(g_sd: f64, g_rd: &[f64], beta: f64) -> f64 {
        let kink = beta / g_sd;
        let below = integrate_interval(
            |h: f64| {
                let slack = beta - h * g_sd;
                (-h).exp() * g_rd.iter().map(|g| (-slack / g).exp()).product::<f64>()
            },
            0.0,
            kink,
            1e-15,
            1e-14,
            10_000,
        )
        .unwrap()
        .value;
        below + (-kink).exp()
    }

    #[test]
    fn eta_examples() {
        let one = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        assert_relative_eq!(
            eta_for(&one, &[0]).unwrap().value,
            16.0 / 15.0,
            max_relative = 1e-15
        );
        let two = Scenario::clustered(2, Position::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(
            eta_for(&two, &[0, 1]).unwrap().value,
            8.0 / 7.0,
            max_relative = 1e-15
        );
        let singular = Scenario::unit(vec![Position::new(1.0, -1.0)]).unwrap();
        assert!(matches!(
            eta_for(&singular, &[0]),
            Err(Error::EtaSingular { .. })
        ));
    }

    #[test]
    fn exceedance_examples() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        assert_eq!(mrc_exceedance(&s, &[0], 0.0).unwrap(), 1.0);
        // Oracle value from the 1-D integral, not the closed form.
        let oracle = brute_force(1.0, &[16.0], 1.0);
        assert_relative_eq!(oracle, 0.977_515_5, max_relative = 1e-6);
        assert!((mrc_exceedance(&s, &[0], 1.0).unwrap() - oracle).abs() < 1e-12);
        let two = Scenario::clustered(2, Position::new(0.5, 0.0)).unwrap();
        for beta in [0.1, 1.0, 7.5] {
            let closed = mrc_exceedance(&two, &[0, 1], beta).unwrap();
            assert!((closed - brute_force(1.0, &[16.0, 16.0], beta)).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_eta_still_exact() {
        // Two relays very close to d: sum g_sd / g_rd > 1.
        let g_rd = [1.5, 1.2];
        let eta = eta_from_gains(1.0, &g_rd).unwrap();
        assert!(eta < 0.0);
        let beta = 2.0;
        assert!(
            (exceedance_from_gains(1.0, &g_rd, beta).unwrap() - brute_force(1.0, &g_rd, beta))
                .abs()
                < 1e-10
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn matches_brute_force(
            g_sd in 0.05f64..5.0,
            g_rd in proptest::collection::vec(0.05f64..50.0, 1..=3),
            beta in 0.0f64..5.0,
        ) {
            let closed = match exceedance_from_gains(g_sd, &g_rd, beta) {
                Ok(v) => v,
                Err(_) => return Ok(()),
            };
            let eta = eta_from_gains(g_sd, &g_rd).unwrap();
            // Cancellation between the two terms scales with |eta|.
            prop_assume!(eta.abs() < 1e3);
            prop_assert!((closed - brute_force(g_sd, &g_rd, beta)).abs() < 1e-10);
        }
    }
}
