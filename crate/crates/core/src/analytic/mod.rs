//! Single-slot delivery probability by inclusion-exclusion over the success
//! events `S0` (direct link) and `S1..SN` (relay paths).
//!
//! Each joint probability is obtained from the probability generating
//! functional of the interferer process:
//!
//! ```text
//! E[prod_u (p K(x_u) + 1 - p)] = exp(-lambda p int (1 - K(x)) dx)
//! ```
//!
//! and the plane integral is evaluated numerically.

mod mrc;
mod one_relay;
pub(crate) mod plan;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::quadrature::{integrate_plane, Integral, QuadratureSpec};
use crate::scenario::{ChannelParams, Combiner, Interference, Scenario};
use crate::stats::neumaier_sum;
use crate::subset::{RelayGroups, SubsetMask};

pub use mrc::{eta_for, eta_from_gains, exceedance_from_gains, mrc_exceedance, Eta};
pub use one_relay::{one_relay_closed_forms, OneRelayTerms};

use plan::{Kernel, Plan};

/// Largest relay count accepted by [`delivery_probability`].
pub const MAX_RELAYS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryResult {
    /// Raw inclusion-exclusion sum; may leave `[0, 1]` by quadrature error.
    pub omega: f64,
    /// Signed contribution `(-1)^(|A|+1) P[A]` of every nonempty subset.
    pub per_subset_terms: BTreeMap<SubsetMask, f64>,
    pub estimated_quadrature_error: f64,
}

impl DeliveryResult {
    /// `omega` clamped to `[0, 1]` for reporting.
    pub fn clamped(&self) -> f64 {
        self.omega.clamp(0.0, 1.0)
    }
}

/// `lambda p int (1 - K)` over the plane.
pub(crate) fn factor_exponent(
    kernel: &Kernel,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    let density = params.active_density();
    if density == 0.0 || kernel.nodes.is_empty() {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let positions = kernel.positions();
    let local = spec.centered(positions[0], &positions[1..]);
    let r = integrate_plane(|x| kernel.complement(x), &local)?;
    Ok(Integral {
        value: density * r.value,
        error: density * r.error,
    })
}

fn evaluate_plan(
    plan: &Plan,
    params: &ChannelParams,
    spec: &QuadratureSpec,
    exec: Exec,
) -> Result<Vec<(f64, f64)>> {
    let exponents = exec.try_map(plan.n_factors(), |i| {
        factor_exponent(&plan.kernel(i), params, spec)
    })?;
    let logs: Vec<f64> = exponents.iter().map(|e| -e.value).collect();
    let errs: Vec<f64> = exponents.iter().map(|e| e.error).collect();
    Ok(plan.evaluate(&logs, &errs))
}

fn check_subset(scenario: &Scenario, subset: SubsetMask) -> Result<()> {
    match subset.relays().find(|&k| k >= scenario.n_relays()) {
        Some(k) => Err(Error::InvalidParameter {
            name: "subset",
            value: k as f64,
            reason: "relay index outside the scenario",
        }),
        None => Ok(()),
    }
}

/// `P[A]` under the combiner and interference model given in `params`.
pub fn joint_probability(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    check_subset(scenario, subset)?;
    let groups = RelayGroups::new(scenario.relays());
    let signature = groups.signature(subset);
    let plan = Plan::single(
        scenario,
        params.theta,
        params.combiner,
        params.interference,
        spec.eta_sign_fault,
        groups,
        signature,
    )?;
    Ok(evaluate_plan(&plan, params, spec, Exec::Sequential)?[0].0)
}

fn joint_with(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
    combiner: Combiner,
    interference: Interference,
) -> Result<f64> {
    let params = params
        .with_combiner(combiner)
        .with_interference(interference);
    joint_probability(scenario, &params, subset, spec)
}

pub fn joint_prob_sc_dependent(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
) -> Result<f64> {
    joint_with(
        scenario,
        params,
        subset,
        spec,
        Combiner::Sc,
        Interference::Dependent,
    )
}

pub fn joint_prob_sc_independent(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
) -> Result<f64> {
    joint_with(
        scenario,
        params,
        subset,
        spec,
        Combiner::Sc,
        Interference::Independent,
    )
}

pub fn joint_prob_mrc_dependent(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
) -> Result<f64> {
    joint_with(
        scenario,
        params,
        subset,
        spec,
        Combiner::Mrc,
        Interference::Dependent,
    )
}

pub fn joint_prob_mrc_independent(
    scenario: &Scenario,
    params: &ChannelParams,
    subset: SubsetMask,
    spec: &QuadratureSpec,
) -> Result<f64> {
    joint_with(
        scenario,
        params,
        subset,
        spec,
        Combiner::Mrc,
        Interference::Independent,
    )
}

/// Delivery probability `Omega` with factor integrals spread over `exec`.
pub fn delivery_probability_with(
    scenario: &Scenario,
    params: &ChannelParams,
    spec: &QuadratureSpec,
    exec: Exec,
) -> Result<DeliveryResult> {
    params.validate()?;
    let n = scenario.n_relays();
    if n > MAX_RELAYS {
        return Err(Error::TooManyRelays {
            relays: n,
            max: MAX_RELAYS,
        });
    }
    let plan = Plan::full(
        scenario,
        params.theta,
        params.combiner,
        params.interference,
        spec.eta_sign_fault,
    )?;
    let values = evaluate_plan(&plan, params, spec, exec)?;

    let omega = neumaier_sum(
        plan.terms
            .iter()
            .zip(&values)
            .map(|(t, v)| t.signature.sign() * t.multiplicity * v.0),
    );
    let error = neumaier_sum(
        plan.terms
            .iter()
            .zip(&values)
            .map(|(t, v)| t.multiplicity * v.1),
    );

    let by_signature: HashMap<_, f64> = plan
        .terms
        .iter()
        .zip(&values)
        .map(|(t, v)| (t.signature.clone(), v.0))
        .collect();
    let per_subset_terms = SubsetMask::all(n)
        .filter(|m| !m.is_empty())
        .map(|m| {
            let p = by_signature[&plan.groups.signature(m)];
            (m, m.sign() * p)
        })
        .collect();

    Ok(DeliveryResult {
        omega,
        per_subset_terms,
        estimated_quadrature_error: error,
    })
}

pub fn delivery_probability(
    scenario: &Scenario,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<DeliveryResult> {
    delivery_probability_with(scenario, params, spec, Exec::default())
}

/// Throughput `p * Omega`: the source itself transmits with probability `p`.
pub fn throughput(
    scenario: &Scenario,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if params.aloha_p == 0.0 {
        params.validate()?;
        return Ok(0.0);
    }
    Ok(params.aloha_p * delivery_probability(scenario, params, spec)?.clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Position;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    // exp(-lambda p pi^2 sqrt(theta_sd) / 2) for alpha = 4.
    fn anchor(theta_sd: f64, lambda: f64, p: f64) -> f64 {
        (-lambda * p * PI * PI * theta_sd.sqrt() / 2.0).exp()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn empty_subset_is_one() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let p = ChannelParams::harsh();
        assert_eq!(
            joint_prob_sc_dependent(&s, &p, SubsetMask::EMPTY, &spec()).unwrap(),
            1.0
        );
        assert_eq!(
            joint_prob_mrc_independent(&s, &p, SubsetMask::EMPTY, &spec()).unwrap(),
            1.0
        );
    }

    #[test]
    fn direct_only_anchor() {
        let s = Scenario::unit(vec![]).unwrap();
        let harsh = delivery_probability(&s, &ChannelParams::harsh(), &spec()).unwrap();
        assert_relative_eq!(harsh.omega, anchor(1.0, 1.0, 1.0), max_relative = 1e-7);
        assert_relative_eq!(harsh.omega, 7.1919e-3, max_relative = 1e-4);
        let good = delivery_probability(&s, &ChannelParams::good(), &spec()).unwrap();
        assert_relative_eq!(good.omega, 0.45830, max_relative = 1e-4);
    }

    #[test]
    fn relay_at_source_doubles_destination_argument() {
        let s = Scenario::unit(vec![Position::new(1e-6, 0.0)]).unwrap();
        let v = joint_prob_sc_dependent(
            &s,
            &ChannelParams::harsh(),
            SubsetMask::new(true, &[0]),
            &spec(),
        )
        .unwrap();
        // theta_rd = (1 - 1e-6)^4 to first order; the relay factor is negligible.
        let th = s.thresholds(1.0);
        let expected = anchor(th.sd + th.rd[0], 1.0, 1.0);
        assert_relative_eq!(v, expected, max_relative = 1e-5);
        assert_relative_eq!(v, (-PI * PI * 2f64.sqrt() / 2.0).exp(), max_relative = 1e-5);
    }

    #[test]
    fn no_interference_means_certain_delivery() {
        let s = Scenario::clustered(3, Position::new(0.5, 0.0)).unwrap();
        for params in [
            ChannelParams::new(1.0, 0.0, 1.0).unwrap(),
            ChannelParams::new(1.0, 1.0, 0.0).unwrap(),
        ] {
            for c in [Combiner::Sc, Combiner::Mrc] {
                let r = delivery_probability(&s, &params.with_combiner(c), &spec()).unwrap();
                assert_eq!(r.omega, 1.0);
            }
        }
    }

    #[test]
    fn terms_sum_to_omega() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0), Position::new(0.3, 0.2)]).unwrap();
        let r = delivery_probability(
            &s,
            &ChannelParams::good().with_combiner(Combiner::Mrc),
            &spec(),
        )
        .unwrap();
        assert_eq!(r.per_subset_terms.len(), 7);
        let sum = neumaier_sum(r.per_subset_terms.values().copied());
        assert!((sum - r.omega).abs() < 1e-14);
    }

    #[test]
    fn clustered_dedup_matches_individual_terms() {
        let s = Scenario::clustered(2, Position::new(0.5, 0.0)).unwrap();
        let p = ChannelParams::harsh().with_combiner(Combiner::Mrc);
        let r = delivery_probability(&s, &p, &spec()).unwrap();
        for (mask, term) in &r.per_subset_terms {
            let direct = joint_probability(&s, &p, *mask, &spec()).unwrap();
            assert!((term - mask.sign() * direct).abs() < 1e-15);
        }
    }

    #[test]
    fn too_many_relays() {
        let s = Scenario::clustered(13, Position::new(0.5, 0.0)).unwrap();
        assert!(matches!(
            delivery_probability(&s, &ChannelParams::good(), &spec()),
            Err(Error::TooManyRelays { relays: 13, .. })
        ));
    }

    #[test]
    fn subset_out_of_range() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let r = joint_prob_sc_dependent(
            &s,
            &ChannelParams::good(),
            SubsetMask::new(false, &[1]),
            &spec(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn throughput_scales_with_p() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let zero = ChannelParams::new(0.5, 1.0, 0.0).unwrap();
        assert_eq!(throughput(&s, &zero, &spec()).unwrap(), 0.0);
        let one = ChannelParams::new(0.5, 1.0, 1.0).unwrap();
        let omega = delivery_probability(&s, &one, &spec()).unwrap().omega;
        assert_eq!(
            throughput(&s, &one, &spec()).unwrap(),
            omega.clamp(0.0, 1.0)
        );
    }

    #[test]
    fn eta_fault_changes_mrc_only() {
        let s = Scenario::unit(vec![Position::new(0.25, 0.0)]).unwrap();
        let faulty = QuadratureSpec {
            eta_sign_fault: true,
            ..spec()
        };
        let sc = ChannelParams::harsh();
        assert_eq!(
            delivery_probability(&s, &sc, &spec()).unwrap().omega,
            delivery_probability(&s, &sc, &faulty).unwrap().omega
        );
        let mrc = sc.with_combiner(Combiner::Mrc);
        let good = delivery_probability(&s, &mrc, &spec()).unwrap().omega;
        let bad = delivery_probability(&s, &mrc, &faulty).unwrap().omega;
        assert!((good - bad).abs() > 1e-2);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0), Position::new(0.2, -0.3)]).unwrap();
        let p = ChannelParams::harsh().with_interference(Interference::Independent);
        let a = delivery_probability_with(&s, &p, &spec(), Exec::Sequential).unwrap();
        let b = delivery_probability_with(&s, &p, &spec(), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
