//! Number of attempts until the first successful delivery.
//!
//! Under dependent interference the interferer layout `Phi` persists across
//! attempts while fading and ALOHA are redrawn, so given `Phi` the attempts
//! are i.i.d. with success probability `p_s(Phi)` and
//! `P[first success at T] = E_Phi[(1 - p_s)^(T-1) p_s]`. `p_s(Phi)` is exact
//! inside a finite window; the far field is folded in through its mean,
//! `exp(-lambda p int_{outside} (1 - K))`.

use crate::analytic::plan::{Kernel, Plan};
use crate::analytic::MAX_RELAYS;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ppp::{sample_ppp, PppRealization};
use crate::quadrature::{integrate_exterior, QuadratureSpec};
use crate::rng::SeedStream;
use crate::scenario::{ChannelParams, Interference, Position, Scenario};
use crate::stats::{neumaier_sum, EstimateWithError};
use crate::subset::{binomial, SubsetMask};

pub const DEFAULT_WINDOW_RADIUS: f64 = 30.0;

/// Largest tolerated `t^2 / 2` for a far-field exponent `t`. Replacing the
/// random far-field product by its mean leaves an error of that order in
/// every nonlinear functional of `p_s`.
pub const TAIL_RESIDUAL_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalSuccess {
    pub p_s: f64,
}

/// Attempt-count law truncated at `Tmax`; index `t` holds attempt `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptDistribution {
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub pmf_stderr: Vec<f64>,
    pub cdf_stderr: Vec<f64>,
    /// Layouts (or simulated trials) behind the estimate; 0 for exact laws.
    pub replicates: u64,
}

impl AttemptDistribution {
    pub fn t_max(&self) -> usize {
        self.pmf.len()
    }
}

/// `p_s(Phi)` machinery for one scenario and window.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    plan: Plan,
    kernels: Vec<Kernel>,
    tails: Vec<f64>,
    params: ChannelParams,
    center: Position,
    radius: f64,
    n_relays: usize,
}

impl ConditionalModel {
    pub fn new(
        scenario: &Scenario,
        params: &ChannelParams,
        center: Position,
        radius: f64,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
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
            Interference::Dependent,
            spec.eta_sign_fault,
        )?;
        let kernels: Vec<Kernel> = (0..plan.n_factors()).map(|i| plan.kernel(i)).collect();
        let density = params.active_density();
        let mut tails = Vec::with_capacity(kernels.len());
        for k in &kernels {
            let t = if density == 0.0 || k.nodes.is_empty() {
                0.0
            } else {
                density * integrate_exterior(|x| k.complement(x), center, radius, spec)?.value
            };
            let residual = 0.5 * t * t;
            if residual > TAIL_RESIDUAL_LIMIT {
                return Err(Error::WindowTooSmall {
                    radius,
                    residual,
                    limit: TAIL_RESIDUAL_LIMIT,
                });
            }
            tails.push(t);
        }
        Ok(ConditionalModel {
            plan,
            kernels,
            tails,
            params: *params,
            center,
            radius,
            n_relays: n,
        })
    }

    pub fn window(&self) -> (Position, f64) {
        (self.center, self.radius)
    }

    fn check_window(&self, ppp: &PppRealization) -> Result<()> {
        if ppp.center() != self.center || ppp.window_radius() != self.radius {
            return Err(Error::InvalidParameter {
                name: "window_radius",
                value: ppp.window_radius(),
                reason: "realization window differs from the model window",
            });
        }
        Ok(())
    }

    /// `P[A | Phi]` for every signature of the plan.
    fn term_values(&self, ppp: &PppRealization) -> Vec<f64> {
        let p = self.params.aloha_p;
        let logs: Vec<f64> = self
            .kernels
            .iter()
            .zip(&self.tails)
            .map(|(k, tail)| {
                let inside: f64 = ppp.points().iter().map(|&x| k.log_bracket(x, p)).sum();
                inside - tail
            })
            .collect();
        let zeros = vec![0.0; logs.len()];
        self.plan
            .evaluate(&logs, &zeros)
            .into_iter()
            .map(|v| v.0)
            .collect()
    }

    pub fn conditional_success(&self, ppp: &PppRealization) -> Result<ConditionalSuccess> {
        self.check_window(ppp)?;
        if self.params.active_density() == 0.0 {
            return Ok(ConditionalSuccess { p_s: 1.0 });
        }
        let values = self.term_values(ppp);
        let p_s = neumaier_sum(
            self.plan
                .terms
                .iter()
                .zip(&values)
                .map(|(t, v)| t.signature.sign() * t.multiplicity * v),
        );
        Ok(ConditionalSuccess {
            p_s: p_s.clamp(0.0, 1.0),
        })
    }

    /// `P[A | Phi]` for every nonempty subset, in increasing mask order.
    pub fn subset_probabilities(&self, ppp: &PppRealization) -> Result<Vec<(SubsetMask, f64)>> {
        self.check_window(ppp)?;
        let values = self.term_values(ppp);
        Ok(SubsetMask::all(self.n_relays)
            .filter(|m| !m.is_empty())
            .map(|m| {
                let sig = self.plan.groups.signature(m);
                let i = self
                    .plan
                    .terms
                    .iter()
                    .position(|t| t.signature == sig)
                    .expect("every signature is planned");
                (m, values[i])
            })
            .collect())
    }
}

/// `p_s` for a given layout, using the layout's own window for the far field.
pub fn conditional_success(
    ppp: &PppRealization,
    scenario: &Scenario,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<ConditionalSuccess> {
    ConditionalModel::new(scenario, params, ppp.center(), ppp.window_radius(), spec)?
        .conditional_success(ppp)
}

fn check_positive(name: &'static str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::InvalidParameter {
            name,
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    Ok(())
}

/// Geometric law of the independent-interference model.
pub fn attempt_distribution_independent(omega: f64, t_max: usize) -> Result<AttemptDistribution> {
    check_positive("t_max", t_max)?;
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: omega,
            reason: "probability must lie in [0, 1]",
        });
    }
    let q = 1.0 - omega;
    let pmf = (0..t_max).map(|t| q.powi(t as i32) * omega).collect();
    let cdf = (1..=t_max).map(|t| 1.0 - q.powi(t as i32)).collect();
    Ok(AttemptDistribution {
        pmf,
        cdf,
        pmf_stderr: vec![0.0; t_max],
        cdf_stderr: vec![0.0; t_max],
        replicates: 0,
    })
}

/// Semi-analytic engine: sampled layouts, exact conditional success.
#[derive(Debug, Clone, PartialEq)]
pub struct Retransmission {
    pub replicates: usize,
    pub window_radius: f64,
    pub quadrature: QuadratureSpec,
    pub exec: Exec,
}

impl Retransmission {
    pub fn new(replicates: usize) -> Self {
        Retransmission {
            replicates,
            window_radius: DEFAULT_WINDOW_RADIUS,
            quadrature: QuadratureSpec::default(),
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn model(&self, scenario: &Scenario, params: &ChannelParams) -> Result<ConditionalModel> {
        check_positive("replicates", self.replicates)?;
        ConditionalModel::new(
            scenario,
            params,
            scenario.midpoint(),
            self.window_radius,
            &self.quadrature,
        )
    }

    /// Layout of replicate `i`.
    pub fn layout(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
        replicate: u64,
    ) -> Result<PppRealization> {
        sample_ppp(
            params.lambda,
            scenario.midpoint(),
            self.window_radius,
            &mut seed.rng(replicate),
        )
    }

    /// `p_s` for every replicate layout, in replicate order.
    pub fn conditional_samples(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
    ) -> Result<Vec<f64>> {
        let model = self.model(scenario, params)?;
        self.exec.try_map(self.replicates, |i| {
            let ppp = self.layout(scenario, params, seed, i as u64)?;
            Ok(model.conditional_success(&ppp)?.p_s)
        })
    }

    /// `E_Phi[p_s]`, an estimate of the single-slot delivery probability.
    pub fn expected_success(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        seed: SeedStream,
    ) -> Result<EstimateWithError> {
        Ok(EstimateWithError::from_samples(
            &self.conditional_samples(scenario, params, seed)?,
        ))
    }

    pub fn attempt_distribution_dependent(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        t_max: usize,
        seed: SeedStream,
    ) -> Result<AttemptDistribution> {
        check_positive("t_max", t_max)?;
        let samples = self.conditional_samples(scenario, params, seed)?;
        Ok(law_from_samples(&samples, t_max))
    }

    /// `|pmf[T]|` from the binomial and multinomial power expansions minus
    /// the direct value, on the same layouts.
    pub fn expansion_cross_check(
        &self,
        scenario: &Scenario,
        params: &ChannelParams,
        t: usize,
        seed: SeedStream,
    ) -> Result<f64> {
        const MAX_T: usize = 3;
        const MAX_N: usize = 2;
        let n = scenario.n_relays();
        if t == 0 || t > MAX_T || n > MAX_N {
            return Err(Error::ExpansionTooLarge {
                t,
                n,
                max_t: MAX_T,
                max_n: MAX_N,
            });
        }
        let model = self.model(scenario, params)?;
        let direct = self.attempt_distribution_dependent(scenario, params, t, seed)?;

        let per_layout = self.exec.try_map(self.replicates, |i| {
            let ppp = self.layout(scenario, params, seed, i as u64)?;
            let p_s = model.conditional_success(&ppp)?.p_s;
            let signed: Vec<f64> = model
                .subset_probabilities(&ppp)?
                .into_iter()
                .map(|(m, v)| m.sign() * v)
                .collect();
            // (1 - p_s)^(T-1) p_s = sum_t C(T-1, t) (-1)^t p_s^(t+1)
            let terms = (0..t).map(|j| {
                let power = if j == 0 {
                    p_s
                } else {
                    multinomial_power(&signed, j + 1)
                };
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial((t - 1) as u32, j as u32) * power
            });
            Ok::<f64, Error>(neumaier_sum(terms))
        })?;
        let expanded = EstimateWithError::from_samples(&per_layout).mean;
        Ok((expanded - direct.pmf[t - 1]).abs())
    }
}

/// `(sum_i x_i)^m` expanded over all compositions of `m`.
fn multinomial_power(x: &[f64], m: usize) -> f64 {
    fn walk(x: &[f64], left: usize, coef: f64, prod: f64, out: &mut Vec<f64>) {
        match x.split_first() {
            None => {
                if left == 0 {
                    out.push(coef * prod);
                }
            }
            Some((&head, rest)) => {
                let mut p = prod;
                for k in 0..=left {
                    // coef * C(left, k) distributes the remaining exponent.
                    walk(
                        rest,
                        left - k,
                        coef * binomial(left as u32, k as u32),
                        p,
                        out,
                    );
                    p *= head;
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(x, m, 1.0, 1.0, &mut out);
    neumaier_sum(out)
}

fn law_from_samples(samples: &[f64], t_max: usize) -> AttemptDistribution {
    let mut pmf = Vec::with_capacity(t_max);
    let mut cdf = Vec::with_capacity(t_max);
    let mut pmf_stderr = Vec::with_capacity(t_max);
    let mut cdf_stderr = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let at: Vec<f64> = samples
            .iter()
            .map(|&p| (1.0 - p).powi(t as i32 - 1) * p)
            .collect();
        let by: Vec<f64> = samples
            .iter()
            .map(|&p| 1.0 - (1.0 - p).powi(t as i32))
            .collect();
        let a = EstimateWithError::from_samples(&at);
        let b = EstimateWithError::from_samples(&by);
        pmf.push(a.mean);
        pmf_stderr.push(a.stderr);
        cdf.push(b.mean);
        cdf_stderr.push(b.stderr);
    }
    AttemptDistribution {
        pmf,
        cdf,
        pmf_stderr,
        cdf_stderr,
        replicates: samples.len() as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::delivery_probability;
    use crate::scenario::Combiner;

    #[test]
    fn multinomial_matches_direct_power() {
        let x = [0.3, -0.2, 0.05, 0.4];
        for m in 1..=4 {
            let direct: f64 = x.iter().sum::<f64>().powi(m as i32);
            assert!((multinomial_power(&x, m) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_layout_succeeds() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        for c in [Combiner::Sc, Combiner::Mrc] {
            let params = ChannelParams::harsh().with_combiner(c);
            let model =
                ConditionalModel::new(&s, &params, s.midpoint(), 30.0, &QuadratureSpec::default())
                    .unwrap();
            let empty = PppRealization::empty(s.midpoint(), 30.0);
            let vals = model.subset_probabilities(&empty).unwrap();
            // Before the far-field factor every bracket product is 1.
            let no_tail = ConditionalModel {
                tails: vec![0.0; model.tails.len()],
                ..model.clone()
            };
            let p = no_tail.conditional_success(&empty).unwrap().p_s;
            assert!((p - 1.0).abs() < 1e-15, "{p}");
            assert!(vals.iter().all(|(_, v)| *v > 0.99));
        }
    }

    #[test]
    fn silent_interferers_mean_certain_success() {
        let s = Scenario::clustered(2, Position::new(0.5, 0.0)).unwrap();
        let params = ChannelParams::new(1.0, 1.0, 0.0).unwrap();
        let r = Retransmission::new(20);
        let samples = r
            .conditional_samples(&s, &params, SeedStream::new(1))
            .unwrap();
        assert!(samples.iter().all(|&p| p == 1.0));
        let law = r
            .attempt_distribution_dependent(
                &s,
                &ChannelParams::new(1.0, 0.0, 1.0).unwrap(),
                4,
                SeedStream::new(1),
            )
            .unwrap();
        assert_eq!(law.pmf, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn geometric_law() {
        let law = attempt_distribution_independent(1.0, 3).unwrap();
        assert_eq!(law.pmf, vec![1.0, 0.0, 0.0]);
        let law = attempt_distribution_independent(0.0, 3).unwrap();
        assert_eq!(law.cdf, vec![0.0, 0.0, 0.0]);
        let law = attempt_distribution_independent(0.45830, 2).unwrap();
        assert_eq!(law.cdf[1], 1.0 - (1.0f64 - 0.45830).powi(2));
        // 0.70655 is the five-digit truncation of 0.706561.
        assert!((law.cdf[1] - 0.70655).abs() < 2e-5);
        assert!(attempt_distribution_independent(1.5, 2).is_err());
        assert!(attempt_distribution_independent(0.5, 0).is_err());
    }

    #[test]
    fn small_window_rejected() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let r = Retransmission {
            window_radius: 1.0,
            ..Retransmission::new(10)
        };
        assert!(matches!(
            r.model(&s, &ChannelParams::harsh()),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn tower_property_direct_link() {
        let s = Scenario::unit(vec![]).unwrap();
        let params = ChannelParams::good();
        let est = Retransmission::new(2000)
            .expected_success(&s, &params, SeedStream::new(7))
            .unwrap();
        let omega = delivery_probability(&s, &params, &QuadratureSpec::default())
            .unwrap()
            .omega;
        assert!(est.z_score(omega) < 3.0, "{est:?} vs {omega}");
    }

    #[test]
    fn expansion_bounds() {
        let s = Scenario::clustered(3, Position::new(0.5, 0.0)).unwrap();
        let r = Retransmission::new(5);
        assert!(matches!(
            r.expansion_cross_check(&s, &ChannelParams::good(), 2, SeedStream::new(1)),
            Err(Error::ExpansionTooLarge { .. })
        ));
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let d = r
            .expansion_cross_check(&s, &ChannelParams::good(), 1, SeedStream::new(1))
            .unwrap();
        assert_eq!(d, 0.0);
    }
}
