//! Geometry and channel parameters of a single experiment point.
//!
//! Distances are in units of the source-destination separation. Every link
//! uses the power-law path gain `|a - b|^-alpha` and unit-mean Rayleigh
//! (exponential power) fading. Interferers always transmit at unit power;
//! the source may be scaled, which is how the doubled-power non-cooperative
//! baseline is expressed.

use std::fmt;

use crate::error::{Error, Result};

/// Denominators of `eta` closer to zero than this are rejected.
pub const ETA_SINGULARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    #[inline]
    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Position) -> Position {
        Position::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Power-law path loss `g = r^-alpha` with `alpha > 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossLaw {
    exponent: f64,
}

impl PathLossLaw {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 2.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: exponent,
                reason: "path loss exponent must be finite and > 2",
            });
        }
        Ok(PathLossLaw { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Inverse gain `r^alpha` from a squared distance. Used by the integrands,
    /// which are written as `q / (q + a)` to stay finite at the nodes.
    #[inline]
    pub fn inverse_gain_sq(&self, dist_sq: f64) -> f64 {
        if self.exponent == 4.0 {
            dist_sq * dist_sq
        } else {
            dist_sq.powf(0.5 * self.exponent)
        }
    }

    /// Gain `r^-alpha` from a squared distance.
    #[inline]
    pub fn gain_sq(&self, dist_sq: f64) -> f64 {
        1.0 / self.inverse_gain_sq(dist_sq)
    }
}

impl Default for PathLossLaw {
    fn default() -> Self {
        PathLossLaw { exponent: 4.0 }
    }
}

/// Path gain between two distinct points.
pub fn path_gain(a: Position, b: Position, law: PathLossLaw) -> Result<f64> {
    let d2 = a.distance_sq(b);
    if d2 == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "path gain between coincident points {a}"
        )));
    }
    Ok(law.gain_sq(d2))
}

/// `theta / (power_scale * gain)`: the exceedance rate of an exponential
/// fade against unit interference.
#[inline]
pub fn reduced_threshold(theta: f64, power_scale: f64, gain: f64) -> f64 {
    debug_assert!(gain > 0.0 && power_scale > 0.0);
    theta / (power_scale * gain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combiner {
    /// Selection combining: the relay path needs both hops above threshold.
    Sc,
    /// Maximal ratio combining of the source and relay copies at the destination.
    Mrc,
}

impl Combiner {
    pub fn label(self) -> &'static str {
        match self {
            Combiner::Sc => "sc",
            Combiner::Mrc => "mrc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Interference {
    /// One interferer field drives every receiver in a slot and persists across attempts.
    Dependent,
    /// Every receiver and every slot sees an independent interferer field.
    Independent,
}

impl Interference {
    pub fn label(self) -> &'static str {
        match self {
            Interference::Dependent => "dependent",
            Interference::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub theta: f64,
    pub lambda: f64,
    pub aloha_p: f64,
    pub interference: Interference,
    pub combiner: Combiner,
}

impl ChannelParams {
    pub fn new(theta: f64, lambda: f64, aloha_p: f64) -> Result<Self> {
        let params = ChannelParams {
            theta,
            lambda,
            aloha_p,
            interference: Interference::Dependent,
            combiner: Combiner::Sc,
        };
        params.validate()?;
        Ok(params)
    }

    /// theta = 0.1, lambda = 0.5, p = 1.
    pub fn good() -> Self {
        Self::preset(0.1, 0.5, 1.0)
    }

    /// theta = 1, lambda = 1, p = 1.
    pub fn harsh() -> Self {
        Self::preset(1.0, 1.0, 1.0)
    }

    /// theta = 1, lambda = 0.75, p = 0.5.
    pub fn scenario_b() -> Self {
        Self::preset(1.0, 0.75, 0.5)
    }

    fn preset(theta: f64, lambda: f64, aloha_p: f64) -> Self {
        ChannelParams {
            theta,
            lambda,
            aloha_p,
            interference: Interference::Dependent,
            combiner: Combiner::Sc,
        }
    }

    pub fn with_combiner(mut self, combiner: Combiner) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn with_interference(mut self, interference: Interference) -> Self {
        self.interference = interference;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "SIR threshold must be finite and > 0",
            });
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                reason: "interferer density must be finite and >= 0",
            });
        }
        if !(0.0..=1.0).contains(&self.aloha_p) {
            return Err(Error::InvalidParameter {
                name: "p",
                value: self.aloha_p,
                reason: "ALOHA probability must lie in [0, 1]",
            });
        }
        Ok(())
    }

    /// Mean number of active interferers per unit area.
    pub fn active_density(&self) -> f64 {
        self.lambda * self.aloha_p
    }
}

/// Node layout of one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    source: Position,
    destination: Position,
    relays: Vec<Position>,
    source_power: f64,
    law: PathLossLaw,
}

impl Scenario {
    pub fn new(
        source: Position,
        destination: Position,
        relays: Vec<Position>,
        law: PathLossLaw,
    ) -> Result<Self> {
        let scenario = Scenario {
            source,
            destination,
            relays,
            source_power: 1.0,
            law,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Source at the origin, destination at `(1, 0)`, `alpha = 4`.
    pub fn unit(relays: Vec<Position>) -> Result<Self> {
        Self::new(
            Position::ORIGIN,
            Position::new(1.0, 0.0),
            relays,
            PathLossLaw::default(),
        )
    }

    /// `n` relays stacked on the same point.
    pub fn clustered(n: usize, at: Position) -> Result<Self> {
        Self::unit(vec![at; n])
    }

    pub fn with_source_power(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "source_power",
                value: scale,
                reason: "power scale must be finite and > 0",
            });
        }
        self.source_power = scale;
        Ok(self)
    }

    pub fn with_relays(&self, relays: Vec<Position>) -> Result<Self> {
        let mut next = self.clone();
        next.relays = relays;
        next.validate()?;
        Ok(next)
    }

    fn validate(&self) -> Result<()> {
        let nodes = std::iter::once(self.source)
            .chain(std::iter::once(self.destination))
            .chain(self.relays.iter().copied());
        for p in nodes {
            if !p.is_finite() {
                return Err(Error::DegenerateGeometry(format!(
                    "non-finite coordinate {p}"
                )));
            }
        }
        if self.source == self.destination {
            return Err(Error::DegenerateGeometry(
                "source coincides with destination".into(),
            ));
        }
        for (k, r) in self.relays.iter().enumerate() {
            if *r == self.source {
                return Err(Error::DegenerateGeometry(format!(
                    "relay {} at {r} coincides with the source",
                    k + 1
                )));
            }
            if *r == self.destination {
                return Err(Error::DegenerateGeometry(format!(
                    "relay {} at {r} coincides with the destination",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Rejects geometries where `eta` is undefined for some relay subset.
    /// Only MRC needs `eta`; SC geometries always pass.
    pub fn validate_for(&self, combiner: Combiner) -> Result<()> {
        if combiner == Combiner::Mrc {
            if let Some((relays, denominator)) = self.first_singular_subset() {
                return Err(Error::EtaSingular {
                    relays,
                    denominator,
                });
            }
        }
        Ok(())
    }

    fn first_singular_subset(&self) -> Option<(Vec<usize>, f64)> {
        let gains = self.gains();
        let ratios: Vec<f64> = gains.rd.iter().map(|g| gains.source_sd() / g).collect();
        let n = ratios.len();
        if n > 24 {
            // Subset scan is exponential; large layouts are only used by the
            // simulators, which never form eta.
            return None;
        }
        (1u32..(1u32 << n)).find_map(|mask| {
            let sum: f64 = (0..n)
                .filter(|k| mask & (1 << k) != 0)
                .map(|k| ratios[k])
                .sum();
            let denominator = 1.0 - sum;
            (denominator.abs() < ETA_SINGULARITY_TOLERANCE).then(|| {
                (
                    (0..n).filter(|k| mask & (1 << k) != 0).collect(),
                    denominator,
                )
            })
        })
    }

    /// Moves relays radially away from the destination by `epsilon` until no
    /// relay subset is eta-singular. Returns the repaired scenario and the
    /// number of displacements applied.
    pub fn nudge_for_mrc(&self, epsilon: f64) -> Result<(Scenario, usize)> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta_nudge",
                value: epsilon,
                reason: "nudge must be finite and > 0",
            });
        }
        let mut current = self.clone();
        let mut moves = 0;
        while let Some((relays, _)) = current.first_singular_subset() {
            if moves > 4 * current.relays.len() + 16 {
                return current
                    .validate_for(Combiner::Mrc)
                    .map(|_| (current, moves));
            }
            let k = *relays.last().expect("singular subsets are nonempty");
            let r = current.relays[k];
            let d = current.destination;
            let dist = r.distance(d);
            current.relays[k] = Position::new(
                d.x + (r.x - d.x) * (dist + epsilon) / dist,
                d.y + (r.y - d.y) * (dist + epsilon) / dist,
            );
            current.validate()?;
            moves += 1;
        }
        Ok((current, moves))
    }

    pub fn source(&self) -> Position {
        self.source
    }

    pub fn destination(&self) -> Position {
        self.destination
    }

    pub fn relays(&self) -> &[Position] {
        &self.relays
    }

    pub fn n_relays(&self) -> usize {
        self.relays.len()
    }

    pub fn source_power(&self) -> f64 {
        self.source_power
    }

    pub fn law(&self) -> PathLossLaw {
        self.law
    }

    /// Default sampling-window centre: the source-destination midpoint.
    pub fn midpoint(&self) -> Position {
        self.source.midpoint(self.destination)
    }

    pub fn gains(&self) -> LinkGains {
        let law = self.law;
        let g = |a: Position, b: Position| law.gain_sq(a.distance_sq(b));
        LinkGains {
            sd: g(self.source, self.destination),
            sr: self.relays.iter().map(|&r| g(self.source, r)).collect(),
            rd: self
                .relays
                .iter()
                .map(|&r| g(r, self.destination))
                .collect(),
            source_power: self.source_power,
        }
    }

    pub fn thresholds(&self, theta: f64) -> ReducedThresholds {
        let gains = self.gains();
        ReducedThresholds {
            sd: reduced_threshold(theta, self.source_power, gains.sd),
            sr: gains
                .sr
                .iter()
                .map(|&g| reduced_threshold(theta, self.source_power, g))
                .collect(),
            rd: gains
                .rd
                .iter()
                .map(|&g| reduced_threshold(theta, 1.0, g))
                .collect(),
        }
    }
}

/// Path gains of every signal link; the source power scale is kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub sd: f64,
    pub sr: Vec<f64>,
    pub rd: Vec<f64>,
    pub source_power: f64,
}

impl LinkGains {
    /// Received mean source power at the destination, `P_s * g_sd`.
    pub fn source_sd(&self) -> f64 {
        self.source_power * self.sd
    }
}

/// Reduced thresholds `theta_ab = theta / (P_a g_ab)` of the signal links.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedThresholds {
    pub sd: f64,
    pub sr: Vec<f64>,
    pub rd: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_gain_examples() {
        let law = PathLossLaw::default();
        let o = Position::ORIGIN;
        assert_eq!(path_gain(o, Position::new(1.0, 0.0), law).unwrap(), 1.0);
        assert_eq!(path_gain(o, Position::new(0.5, 0.0), law).unwrap(), 16.0);
        assert_eq!(path_gain(o, Position::new(2.0, 0.0), law).unwrap(), 0.0625);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let p = Position::new(0.3, 0.2);
        assert!(matches!(
            path_gain(p, p, PathLossLaw::default()),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn reduced_threshold_examples() {
        assert_eq!(reduced_threshold(1.0, 1.0, 1.0), 1.0);
        assert_eq!(reduced_threshold(1.0, 2.0, 1.0), 0.5);
        assert!((reduced_threshold(0.1, 1.0, 16.0) - 0.00625).abs() < 1e-15);
    }

    #[test]
    fn law_rejects_small_exponent() {
        assert!(PathLossLaw::new(2.0).is_err());
        assert!(PathLossLaw::new(f64::NAN).is_err());
        assert!(PathLossLaw::new(3.5).is_ok());
    }

    #[test]
    fn generic_exponent_matches_powf() {
        let law = PathLossLaw::new(3.0).unwrap();
        let g = path_gain(Position::ORIGIN, Position::new(0.0, 2.0), law).unwrap();
        assert!((g - 0.125).abs() < 1e-15);
    }

    #[test]
    fn relay_on_endpoint_rejected() {
        assert!(Scenario::unit(vec![Position::ORIGIN]).is_err());
        assert!(Scenario::unit(vec![Position::new(1.0, 0.0)]).is_err());
        assert!(Scenario::unit(vec![Position::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn channel_ranges_enforced() {
        assert!(ChannelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, -1.0, 1.0).is_err());
        assert!(ChannelParams::new(1.0, 1.0, 1.5).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn eta_singular_geometry_rejected_for_mrc_only() {
        // g_rd = g_sd when the relay sits at unit distance from the destination.
        let s = Scenario::unit(vec![Position::new(1.0, 1.0)]).unwrap();
        assert!(s.validate_for(Combiner::Sc).is_ok());
        assert!(matches!(
            s.validate_for(Combiner::Mrc),
            Err(Error::EtaSingular { .. })
        ));
    }

    #[test]
    fn nudge_repairs_singular_geometry() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0), Position::new(1.0, 1.0)]).unwrap();
        let (fixed, moves) = s.nudge_for_mrc(1e-6).unwrap();
        assert_eq!(moves, 1);
        assert!(fixed.validate_for(Combiner::Mrc).is_ok());
        let moved = fixed.relays()[1];
        assert!((moved.distance(fixed.destination()) - (1.0 + 1e-6)).abs() < 1e-12);
        assert_eq!(fixed.relays()[0], Position::new(0.5, 0.0));
    }

    #[test]
    fn doubled_power_halves_source_thresholds() {
        let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
        let base = s.thresholds(1.0);
        let doubled = s.clone().with_source_power(2.0).unwrap().thresholds(1.0);
        assert_eq!(doubled.sd, 0.5 * base.sd);
        assert_eq!(doubled.sr[0], 0.5 * base.sr[0]);
        assert_eq!(doubled.rd[0], base.rd[0]);
    }

    proptest! {
        #[test]
        fn gain_symmetric_and_decreasing(
            ax in -5.0f64..5.0, ay in -5.0f64..5.0,
            dx in -3.0f64..3.0, dy in -3.0f64..3.0,
            scale in 1.01f64..3.0, alpha in 2.1f64..6.0,
        ) {
            prop_assume!(dx * dx + dy * dy > 1e-6);
            let law = PathLossLaw::new(alpha).unwrap();
            let a = Position::new(ax, ay);
            let b = Position::new(ax + dx, ay + dy);
            let far = Position::new(ax + scale * dx, ay + scale * dy);
            let gab = path_gain(a, b, law).unwrap();
            prop_assert_eq!(gab, path_gain(b, a, law).unwrap());
            prop_assert!(path_gain(a, far, law).unwrap() < gab);
        }
    }
}
