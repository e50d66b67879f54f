//! Shared bookkeeping for the inclusion-exclusion engines.
//!
//! Every joint probability `P[A]` is a short linear combination of products
//! of "factors", each of the form `E[prod_u (p K_u(x_u) + 1 - p)]` where
//! `K(x) = prod_j 1 / (1 + a_j g(x, n_j))^{m_j}` runs over the receiving
//! nodes `n_j` involved. The analytic engine turns a factor into
//! `exp(-lambda p int (1 - K))`, the conditional engine into a finite
//! product over a realization. Both share the decomposition built here.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scenario::{Combiner, Interference, PathLossLaw, Position, ReducedThresholds, Scenario};
use crate::subset::{RelayGroups, Signature};

use super::mrc::eta_from_gains;

/// Identity of one factor: destination argument (if any) and relay groups
/// with the number of their members involved.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct FactorKey {
    dest_arg: Option<u64>,
    relays: Vec<(usize, u32)>,
}

/// `K(x)` for one factor, flattened to nodes.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Kernel {
    /// (node position, reduced threshold, multiplicity)
    pub nodes: Vec<(Position, f64, f64)>,
    law: PathLossLaw,
}

impl Kernel {
    /// `-ln K(x)`, never negative.
    #[inline]
    pub fn neg_log(&self, x: Position) -> f64 {
        let mut s = 0.0;
        for &(node, arg, m) in &self.nodes {
            let q = self.law.inverse_gain_sq(x.distance_sq(node));
            s += m * (arg / q).ln_1p();
        }
        s
    }

    /// `1 - K(x)`, accurate far from every node.
    #[inline]
    pub fn complement(&self, x: Position) -> f64 {
        -(-self.neg_log(x)).exp_m1()
    }

    /// `ln(p K(x) + 1 - p)`.
    #[inline]
    pub fn log_bracket(&self, x: Position, p: f64) -> f64 {
        (-p * self.complement(x)).ln_1p()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.nodes.iter().map(|n| n.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Component {
    pub coef: f64,
    /// (factor index, exponent)
    pub factors: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub signature: Signature,
    pub multiplicity: f64,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub groups: RelayGroups,
    pub terms: Vec<Term>,
    keys: Vec<FactorKey>,
    destination: Position,
    relay_positions: Vec<Position>,
    thresholds: ReducedThresholds,
    law: PathLossLaw,
}

struct Builder<'a> {
    scenario: &'a Scenario,
    groups: &'a RelayGroups,
    thresholds: &'a ReducedThresholds,
    keys: Vec<FactorKey>,
    index: HashMap<FactorKey, usize>,
}

impl Builder<'_> {
    fn key(&mut self, dest_arg: Option<f64>, relays: Vec<(usize, u32)>) -> usize {
        let key = FactorKey {
            dest_arg: dest_arg.map(f64::to_bits),
            relays,
        };
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.keys.push(key.clone());
        self.index.insert(key, self.keys.len() - 1);
        self.keys.len() - 1
    }

    fn relay_sum(&self, sig: &Signature) -> f64 {
        sig.counts
            .iter()
            .enumerate()
            .map(|(g, &c)| c as f64 * self.thresholds.rd[self.groups.representatives[g]])
            .sum()
    }

    fn eta(&self, sig: &Signature, fault: bool) -> Result<f64> {
        let gains = self.scenario.gains();
        let mut chosen = Vec::new();
        let mut members = Vec::new();
        for (g, &c) in sig.counts.iter().enumerate() {
            for &k in self.groups.members[g].iter().take(c as usize) {
                chosen.push(gains.rd[k]);
                members.push(k);
            }
        }
        let eta = eta_from_gains(gains.source_sd(), &chosen).map_err(|e| match e {
            Error::EtaSingular { denominator, .. } => Error::EtaSingular {
                relays: members,
                denominator,
            },
            other => other,
        })?;
        Ok(if fault { -eta } else { eta })
    }

    fn term(
        &mut self,
        sig: &Signature,
        combiner: Combiner,
        interference: Interference,
        fault: bool,
    ) -> Result<Vec<Component>> {
        let relays: Vec<(usize, u32)> = sig
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(g, &c)| (g, c))
            .collect();
        let theta_sd = self.thresholds.sd;
        let sum_rd = self.relay_sum(sig);
        // Destination arguments of the (one or two) components.
        let dest_args: Vec<(f64, f64)> = match combiner {
            Combiner::Sc => {
                let direct = if sig.direct { theta_sd } else { 0.0 };
                vec![(1.0, direct + sum_rd)]
            }
            Combiner::Mrc if sig.direct => vec![(1.0, theta_sd)],
            Combiner::Mrc => {
                let eta = self.eta(sig, fault)?;
                vec![(eta, sum_rd), (1.0 - eta, theta_sd)]
            }
        };
        let mut out = Vec::with_capacity(dest_args.len());
        for (coef, arg) in dest_args {
            let factors = match interference {
                Interference::Dependent => vec![(self.key(Some(arg), relays.clone()), 1.0)],
                Interference::Independent => {
                    let mut f = vec![(self.key(Some(arg), Vec::new()), 1.0)];
                    for &(g, c) in &relays {
                        f.push((self.key(None, vec![(g, 1)]), c as f64));
                    }
                    f
                }
            };
            out.push(Component { coef, factors });
        }
        Ok(out)
    }
}

impl Plan {
    /// Decomposition of every nonempty signature of `scenario`.
    pub fn full(
        scenario: &Scenario,
        theta: f64,
        combiner: Combiner,
        interference: Interference,
        eta_sign_fault: bool,
    ) -> Result<Plan> {
        let groups = RelayGroups::new(scenario.relays());
        let signatures = groups.signatures();
        Self::build(
            scenario,
            theta,
            combiner,
            interference,
            eta_sign_fault,
            groups,
            signatures,
        )
    }

    /// Decomposition of a single signature.
    pub fn single(
        scenario: &Scenario,
        theta: f64,
        combiner: Combiner,
        interference: Interference,
        eta_sign_fault: bool,
        groups: RelayGroups,
        signature: Signature,
    ) -> Result<Plan> {
        Self::build(
            scenario,
            theta,
            combiner,
            interference,
            eta_sign_fault,
            groups,
            vec![(signature, 1.0)],
        )
    }

    fn build(
        scenario: &Scenario,
        theta: f64,
        combiner: Combiner,
        interference: Interference,
        eta_sign_fault: bool,
        groups: RelayGroups,
        signatures: Vec<(Signature, f64)>,
    ) -> Result<Plan> {
        let thresholds = scenario.thresholds(theta);
        let mut b = Builder {
            scenario,
            groups: &groups,
            thresholds: &thresholds,
            keys: Vec::new(),
            index: HashMap::new(),
        };
        let mut terms = Vec::with_capacity(signatures.len());
        for (signature, multiplicity) in signatures {
            let components = if signature.is_empty() {
                vec![Component {
                    coef: 1.0,
                    factors: Vec::new(),
                }]
            } else {
                b.term(&signature, combiner, interference, eta_sign_fault)?
            };
            terms.push(Term {
                signature,
                multiplicity,
                components,
            });
        }
        let keys = b.keys;
        Ok(Plan {
            groups,
            terms,
            keys,
            destination: scenario.destination(),
            relay_positions: scenario.relays().to_vec(),
            thresholds,
            law: scenario.law(),
        })
    }

    pub fn n_factors(&self) -> usize {
        self.keys.len()
    }

    pub fn kernel(&self, factor: usize) -> Kernel {
        let key = &self.keys[factor];
        let mut nodes = Vec::with_capacity(key.relays.len() + 1);
        if let Some(bits) = key.dest_arg {
            nodes.push((self.destination, f64::from_bits(bits), 1.0));
        }
        for &(g, c) in &key.relays {
            let k = self.groups.representatives[g];
            nodes.push((self.relay_positions[k], self.thresholds.sr[k], c as f64));
        }
        Kernel {
            nodes,
            law: self.law,
        }
    }

    /// Values of every term given the log of each factor, plus a first-order
    /// error bound from per-factor log errors.
    pub fn evaluate(&self, log_factor: &[f64], log_error: &[f64]) -> Vec<(f64, f64)> {
        self.terms
            .iter()
            .map(|t| {
                let mut value = 0.0;
                let mut error = 0.0;
                for c in &t.components {
                    let log: f64 = c.factors.iter().map(|&(i, m)| m * log_factor[i]).sum();
                    let err: f64 = c.factors.iter().map(|&(i, m)| m * log_error[i]).sum();
                    let v = c.coef * log.exp();
                    value += v;
                    error += v.abs() * err;
                }
                (value, error)
            })
            .collect()
    }
}
