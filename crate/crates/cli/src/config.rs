//! Experiment configuration: a TOML file, optional flag overrides, and the
//! per-kind defaults that turn the two into a fully resolved [`Experiment`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coopnet::analytic::MAX_RELAYS;
use coopnet::montecarlo::MIN_TRIALS;
use coopnet::{ChannelParams, Combiner, Interference, PathLossLaw, Position};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Point,
    RelaySweep,
    ClusterSweep,
    FixedClusterSweep,
    RandomSquare,
    ThroughputSweep,
    RetransmissionCdf,
    Acceptance,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Point => "point",
            Kind::RelaySweep => "relay_sweep",
            Kind::ClusterSweep => "cluster_sweep",
            Kind::FixedClusterSweep => "fixed_cluster_sweep",
            Kind::RandomSquare => "random_square",
            Kind::ThroughputSweep => "throughput_sweep",
            Kind::RetransmissionCdf => "retransmission_cdf",
            Kind::Acceptance => "acceptance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    Conditional,
    Montecarlo,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Conditional => "conditional",
            Engine::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Good,
    Harsh,
    ScenarioB,
}

impl Preset {
    fn resolve(self) -> (&'static str, ChannelParams) {
        match self {
            Preset::Good => ("good", ChannelParams::good()),
            Preset::Harsh => ("harsh", ChannelParams::harsh()),
            Preset::ScenarioB => ("scenario_b", ChannelParams::scenario_b()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerName {
    Sc,
    Mrc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceName {
    Dependent,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// x coordinate of the moving relay (or relay cluster).
    Position,
    /// Edge of the placement square.
    Edge,
    AlohaP,
    Lambda,
    Theta,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Position => "position",
            Axis::Edge => "edge",
            Axis::AlohaP => "aloha_p",
            Axis::Lambda => "lambda",
            Axis::Theta => "theta",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relays: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub presets: Option<Vec<Preset>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aloha_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub combiners: Option<Vec<CombinerName>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interference: Option<Vec<InterferenceName>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Relays swept onto the source or destination are pulled inwards by this much.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_offset: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RelaysSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RetransmissionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<u8>>,
    /// Mutation hook: flips the sign of every eta inside the analytic engine.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_sign_fault: Option<bool>,
}

/// The config file as written.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engines: Option<Vec<Engine>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_nudge: Option<f64>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub relays: RelaysSection,
    #[serde(default)]
    pub series: SeriesSection,
    #[serde(default)]
    pub retransmission: RetransmissionSection,
    #[serde(default)]
    pub acceptance: AcceptanceSection,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| CliError::config("<file>", e.message().to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." {
                "<root>".to_string()
            } else {
                key
            };
            CliError::config(key, e.into_inner().message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical serialization. Output location and worker
    /// count are left out: neither may change the results.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub tolerance: Option<f64>,
    pub workers: Option<usize>,
    pub eta_nudge: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, raw: &mut RawConfig) {
        if self.out.is_some() {
            raw.output.clone_from(&self.out);
        }
        raw.seed = self.seed.or(raw.seed);
        raw.trials = self.trials.or(raw.trials);
        raw.tolerance = self.tolerance.or(raw.tolerance);
        raw.workers = self.workers.or(raw.workers);
        raw.eta_nudge = self.eta_nudge.or(raw.eta_nudge);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub endpoint_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedParams {
    pub name: String,
    pub params: ChannelParams,
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: Kind,
    pub seed: u64,
    pub output: PathBuf,
    pub engines: Vec<Engine>,
    pub trials: u64,
    pub replicates: usize,
    pub tolerance: f64,
    pub workers: usize,
    pub eta_nudge: Option<f64>,
    pub law: PathLossLaw,
    pub source_power: f64,
    pub relays: Vec<Position>,
    pub presets: Vec<NamedParams>,
    pub combiners: Vec<Combiner>,
    pub interference: Vec<Interference>,
    pub sweep: Option<Sweep>,
    pub sizes: Vec<usize>,
    pub at: Position,
    pub draws: usize,
    pub lambdas: Vec<f64>,
    pub t_max: usize,
    pub baseline: bool,
    pub criteria: Vec<u8>,
    pub eta_sign_fault: bool,
    pub digest: String,
}

struct Defaults {
    engines: &'static [Engine],
    presets: &'static [Preset],
    theta: f64,
    combiners: &'static [CombinerName],
    interference: &'static [InterferenceName],
    sweep: Option<(Axis, f64, f64, usize)>,
    axes: &'static [Axis],
    sizes: &'static [usize],
    at: [f64; 2],
    trials: u64,
}

const DEP: InterferenceName = InterferenceName::Dependent;
const IND: InterferenceName = InterferenceName::Independent;

fn defaults(kind: Kind) -> Defaults {
    let base = Defaults {
        engines: &[Engine::Analytic],
        presets: &[Preset::Good, Preset::Harsh],
        theta: 1.0,
        combiners: &[CombinerName::Sc],
        interference: &[DEP],
        sweep: None,
        axes: &[],
        sizes: &[],
        at: [0.5, 0.0],
        trials: 100_000,
    };
    match kind {
        Kind::Point => Defaults {
            presets: &[Preset::Good],
            ..base
        },
        Kind::RelaySweep => Defaults {
            presets: &[],
            combiners: &[CombinerName::Sc, CombinerName::Mrc],
            sweep: Some((Axis::AlohaP, 0.05, 1.0, 20)),
            axes: &[Axis::AlohaP, Axis::Lambda, Axis::Theta, Axis::Position],
            ..base
        },
        Kind::ClusterSweep => Defaults {
            interference: &[DEP, IND],
            sweep: Some((Axis::Position, 0.0, 1.0, 41)),
            axes: &[Axis::Position],
            sizes: &[1, 3, 5],
            ..base
        },
        Kind::FixedClusterSweep => Defaults {
            presets: &[Preset::Good, Preset::ScenarioB, Preset::Harsh],
            sweep: Some((Axis::Position, 0.0, 1.0, 41)),
            axes: &[Axis::Position],
            sizes: &[2, 3, 4, 5],
            at: [0.2, 0.0],
            ..base
        },
        Kind::RandomSquare => Defaults {
            combiners: &[CombinerName::Mrc],
            sweep: Some((Axis::Edge, 0.0, 1.0, 11)),
            axes: &[Axis::Edge],
            sizes: &[1, 2, 3, 4, 5],
            ..base
        },
        Kind::ThroughputSweep => Defaults {
            presets: &[],
            theta: 0.5,
            combiners: &[CombinerName::Mrc],
            interference: &[DEP, IND],
            sweep: Some((Axis::AlohaP, 0.02, 1.0, 50)),
            axes: &[Axis::AlohaP],
            sizes: &[1, 3, 5],
            ..base
        },
        Kind::RetransmissionCdf => Defaults {
            engines: &[Engine::Conditional],
            combiners: &[CombinerName::Mrc],
            interference: &[DEP, IND],
            sizes: &[3],
            ..base
        },
        Kind::Acceptance => Defaults {
            trials: 1_000_000,
            ..base
        },
    }
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::config(key, message)
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "must be finite"))
    }
}

fn non_empty<T: Clone>(key: &str, v: Option<&Vec<T>>, default: &[T]) -> Result<Vec<T>, CliError> {
    let out = v.cloned().unwrap_or_else(|| default.to_vec());
    if out.is_empty() {
        return Err(bad(key, "must not be empty"));
    }
    Ok(out)
}

impl Experiment {
    pub fn resolve(raw: &RawConfig) -> Result<Self, CliError> {
        let kind = raw.kind;
        let d = defaults(kind);

        let engines = non_empty("engines", raw.engines.as_ref(), d.engines)?;
        let trials = raw.trials.unwrap_or(d.trials);
        if trials < MIN_TRIALS {
            return Err(bad(
                "trials",
                format!("{trials} is below the minimum of {MIN_TRIALS}"),
            ));
        }
        let replicates = raw.replicates.unwrap_or(10_000);
        if replicates == 0 {
            return Err(bad("replicates", "must be at least 1"));
        }
        let tolerance = raw.tolerance.unwrap_or(1e-8);
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(bad("tolerance", "must lie in (0, 1)"));
        }
        if let Some(eps) = raw.eta_nudge {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(bad("eta_nudge", "must be finite and > 0"));
            }
        }

        let law = PathLossLaw::new(finite("scenario.alpha", raw.scenario.alpha.unwrap_or(4.0))?)
            .map_err(|e| bad("scenario.alpha", e.to_string()))?;
        let source_power = raw.scenario.source_power.unwrap_or(1.0);
        if !(source_power.is_finite() && source_power > 0.0) {
            return Err(bad("scenario.source_power", "must be finite and > 0"));
        }
        let default_relays: &[[f64; 2]] = if kind == Kind::RelaySweep {
            &[[0.25, 0.0]]
        } else {
            &[]
        };
        let relays: Vec<Position> = raw
            .scenario
            .relays
            .clone()
            .unwrap_or_else(|| default_relays.to_vec())
            .into_iter()
            .map(|[x, y]| Position::new(x, y))
            .collect();
        let probe = coopnet::Scenario::new(
            Position::ORIGIN,
            Position::new(1.0, 0.0),
            relays.clone(),
            law,
        )
        .map_err(|e| bad("scenario.relays", e.to_string()))?;
        if probe.n_relays() > MAX_RELAYS {
            return Err(bad(
                "scenario.relays",
                format!("at most {MAX_RELAYS} relays are supported"),
            ));
        }

        let presets = resolve_presets(&raw.params, &d)?;
        let combiners = non_empty(
            "params.combiners",
            raw.params.combiners.as_ref(),
            d.combiners,
        )?
        .into_iter()
        .map(|c| match c {
            CombinerName::Sc => Combiner::Sc,
            CombinerName::Mrc => Combiner::Mrc,
        })
        .collect();
        let interference: Vec<Interference> = non_empty(
            "params.interference",
            raw.params.interference.as_ref(),
            d.interference,
        )?
        .into_iter()
        .map(|i| match i {
            InterferenceName::Dependent => Interference::Dependent,
            InterferenceName::Independent => Interference::Independent,
        })
        .collect();

        check_engines(kind, &engines, &interference)?;

        let sweep = resolve_sweep(raw.sweep.as_ref(), &d)?;
        let sizes = if d.sizes.is_empty() {
            if raw.relays.sizes.is_some() {
                return Err(bad(
                    "relays.sizes",
                    format!("not used by `{}`", kind.name()),
                ));
            }
            Vec::new()
        } else {
            non_empty("relays.sizes", raw.relays.sizes.as_ref(), d.sizes)?
        };
        let min_size = if kind == Kind::FixedClusterSweep {
            1
        } else {
            0
        };
        if let Some(&n) = sizes.iter().find(|&&n| n < min_size || n > MAX_RELAYS) {
            return Err(bad(
                "relays.sizes",
                format!("{n} is outside {min_size}..={MAX_RELAYS}"),
            ));
        }
        let [ax, ay] = raw.relays.at.unwrap_or(d.at);
        let at = Position::new(finite("relays.at", ax)?, finite("relays.at", ay)?);
        let draws = raw.relays.draws.unwrap_or(50);
        if draws == 0 {
            return Err(bad("relays.draws", "must be at least 1"));
        }

        let lambdas = match kind {
            Kind::RelaySweep | Kind::ThroughputSweep => {
                let default: &[f64] = if kind == Kind::RelaySweep {
                    &[0.2, 0.6, 1.0, 2.0]
                } else {
                    &[1.0, 3.0]
                };
                let l = non_empty("series.lambdas", raw.series.lambdas.as_ref(), default)?;
                if l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(bad(
                        "series.lambdas",
                        "every intensity must be finite and >= 0",
                    ));
                }
                l
            }
            _ if raw.series.lambdas.is_some() => {
                return Err(bad(
                    "series.lambdas",
                    format!("not used by `{}`", kind.name()),
                ))
            }
            _ => Vec::new(),
        };
        if let (Some(s), Kind::RelaySweep) = (&sweep, kind) {
            if s.axis == Axis::Lambda {
                return Err(bad(
                    "sweep.variable",
                    "lambda is already the series variable",
                ));
            }
        }

        let t_max = raw.retransmission.t_max.unwrap_or(10);
        if t_max == 0 {
            return Err(bad("retransmission.t_max", "must be at least 1"));
        }
        let baseline = raw
            .retransmission
            .baseline
            .unwrap_or(kind == Kind::RelaySweep);

        let criteria = raw
            .acceptance
            .criteria
            .clone()
            .unwrap_or_else(|| (1..=9).collect());
        if criteria.is_empty() {
            return Err(bad("acceptance.criteria", "must not be empty"));
        }
        if let Some(c) = criteria.iter().find(|c| !(1..=9).contains(*c)) {
            return Err(bad(
                "acceptance.criteria",
                format!("{c} is not a criterion (1..=9)"),
            ));
        }

        Ok(Experiment {
            kind,
            seed: raw.seed.unwrap_or(1),
            output: raw.output.clone().unwrap_or_else(|| PathBuf::from(".")),
            engines,
            trials,
            replicates,
            tolerance,
            workers: raw.workers.unwrap_or(0),
            eta_nudge: raw.eta_nudge,
            law,
            source_power,
            relays,
            presets,
            combiners,
            interference,
            sweep,
            sizes,
            at,
            draws,
            lambdas,
            t_max,
            baseline,
            criteria,
            eta_sign_fault: raw.acceptance.eta_sign_fault.unwrap_or(false),
            digest: raw.digest(),
        })
    }
}

fn resolve_presets(p: &ParamsSection, d: &Defaults) -> Result<Vec<NamedParams>, CliError> {
    let base: Vec<(&str, ChannelParams)> = match &p.presets {
        Some(list) if list.is_empty() => return Err(bad("params.presets", "must not be empty")),
        Some(list) => list.iter().map(|x| x.resolve()).collect(),
        None if d.presets.is_empty() => {
            let custom = ChannelParams::new(d.theta, 1.0, 1.0).expect("valid defaults");
            vec![("custom", custom)]
        }
        None => d.presets.iter().map(|x| x.resolve()).collect(),
    };
    base.into_iter()
        .map(|(name, mut params)| {
            params.theta = p.theta.unwrap_or(params.theta);
            params.lambda = p.lambda.unwrap_or(params.lambda);
            params.aloha_p = p.aloha_p.unwrap_or(params.aloha_p);
            params.validate().map_err(|e| {
                let key = match e {
                    coopnet::Error::InvalidParameter { name: "lambda", .. } => "params.lambda",
                    coopnet::Error::InvalidParameter { name: "p", .. } => "params.aloha_p",
                    _ => "params.theta",
                };
                bad(key, e.to_string())
            })?;
            Ok(NamedParams {
                name: name.to_string(),
                params,
            })
        })
        .collect()
}

fn resolve_sweep(s: Option<&SweepSection>, d: &Defaults) -> Result<Option<Sweep>, CliError> {
    let Some((axis, start, stop, steps)) = d.sweep else {
        return match s {
            Some(_) => Err(bad("sweep", "this kind takes no sweep")),
            None => Ok(None),
        };
    };
    let empty = SweepSection::default();
    let s = s.unwrap_or(&empty);
    let axis = s.variable.unwrap_or(axis);
    if !d.axes.contains(&axis) {
        let allowed: Vec<&str> = d.axes.iter().map(|a| a.name()).collect();
        return Err(bad(
            "sweep.variable",
            format!(
                "`{}` not allowed here (expected one of {allowed:?})",
                axis.name()
            ),
        ));
    }
    // An explicit variable without a range would inherit a range meant for another axis.
    let inherit = s.variable.is_none() || s.variable == d.sweep.map(|x| x.0);
    let start = match (s.start, inherit) {
        (Some(v), _) => finite("sweep.start", v)?,
        (None, true) => start,
        (None, false) => return Err(bad("sweep.start", "required for this variable")),
    };
    let stop = match (s.stop, inherit) {
        (Some(v), _) => finite("sweep.stop", v)?,
        (None, true) => stop,
        (None, false) => return Err(bad("sweep.stop", "required for this variable")),
    };
    let steps = s.steps.unwrap_or(steps);
    if steps == 0 {
        return Err(bad("sweep.steps", "must be at least 1"));
    }
    if stop < start || (steps == 1 && stop != start) {
        return Err(bad(
            "sweep.stop",
            "range is empty or inconsistent with steps",
        ));
    }
    let lower = match axis {
        Axis::Theta => f64::MIN_POSITIVE,
        Axis::Position => f64::NEG_INFINITY,
        _ => 0.0,
    };
    if start < lower {
        return Err(bad(
            "sweep.start",
            format!("`{}` cannot take {start}", axis.name()),
        ));
    }
    if axis == Axis::AlohaP && stop > 1.0 {
        return Err(bad("sweep.stop", "an ALOHA probability cannot exceed 1"));
    }
    let endpoint_offset = s.endpoint_offset.unwrap_or(1e-3);
    if !(endpoint_offset.is_finite() && endpoint_offset > 0.0 && endpoint_offset < 0.5) {
        return Err(bad("sweep.endpoint_offset", "must lie in (0, 0.5)"));
    }
    let values = if steps == 1 {
        vec![start]
    } else {
        (0..steps)
            .map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    Ok(Some(Sweep {
        axis,
        values,
        endpoint_offset,
    }))
}

fn check_engines(
    kind: Kind,
    engines: &[Engine],
    interference: &[Interference],
) -> Result<(), CliError> {
    let mut seen = Vec::new();
    for e in engines {
        if seen.contains(e) {
            return Err(bad("engines", format!("`{}` listed twice", e.name())));
        }
        seen.push(*e);
    }
    match kind {
        Kind::RetransmissionCdf => {
            if engines.contains(&Engine::Analytic) {
                return Err(bad(
                    "engines",
                    "attempt laws come from `conditional` or `montecarlo`",
                ));
            }
        }
        Kind::Acceptance => {}
        _ => {
            if engines.contains(&Engine::Conditional)
                && interference.contains(&Interference::Independent)
            {
                return Err(bad(
                    "engines",
                    "`conditional` conditions on one shared layout and needs dependent interference only",
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Experiment, CliError> {
        Experiment::resolve(&RawConfig::parse(text)?)
    }

    fn key_of(e: CliError) -> String {
        match e {
            CliError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn cluster_defaults() {
        let e = resolve("kind = \"cluster_sweep\"").unwrap();
        assert_eq!(e.sizes, vec![1, 3, 5]);
        assert_eq!(e.sweep.as_ref().unwrap().values.len(), 41);
        assert_eq!(e.presets.len(), 2);
        assert_eq!(e.interference.len(), 2);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("kind = \"point\"\n[params]\ntheta = -1.0", "params.theta"),
            (
                "kind = \"point\"\n[params]\naloha_p = 2.0",
                "params.aloha_p",
            ),
            (
                "kind = \"point\"\n[scenario]\nrelays = [[1.0, 0.0]]",
                "scenario.relays",
            ),
            ("kind = \"point\"\ntrials = 0", "trials"),
            (
                "kind = \"point\"\n[scenario]\nalpha = 2.0",
                "scenario.alpha",
            ),
            (
                "kind = \"cluster_sweep\"\n[sweep]\nsteps = 0",
                "sweep.steps",
            ),
            (
                "kind = \"cluster_sweep\"\n[sweep]\nvariable = \"edge\"",
                "sweep.variable",
            ),
            ("kind = \"point\"\n[sweep]\nsteps = 3", "sweep"),
            ("kind = \"point\"\nengines = []", "engines"),
            ("kind = \"point\"\nbogus = 1", "bogus"),
            ("kind = \"point\"\n[params]\nthetta = 1.0", "params"),
            (
                "kind = \"point\"\n[params]\npresets = [\"nice\"]",
                "params.presets[0]",
            ),
            (
                "kind = \"retransmission_cdf\"\nengines = [\"analytic\"]",
                "engines",
            ),
            (
                "kind = \"acceptance\"\n[acceptance]\ncriteria = [10]",
                "acceptance.criteria",
            ),
            ("kind = \"nothing\"", "kind"),
        ];
        for (text, key) in cases {
            let k = key_of(resolve(text).unwrap_err());
            assert!(k.starts_with(key), "{text:?}: got `{k}`, expected `{key}`");
        }
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse("kind = \"point\"\nseed = 3\ntrials = 5000").unwrap();
        Overrides {
            seed: Some(9),
            trials: Some(2000),
            ..Default::default()
        }
        .apply(&mut raw);
        let e = Experiment::resolve(&raw).unwrap();
        assert_eq!((e.seed, e.trials), (9, 2000));
    }

    #[test]
    fn digest_ignores_output_and_workers() {
        let a = RawConfig::parse("kind = \"point\"\noutput = \"x\"\nworkers = 1").unwrap();
        let b = RawConfig::parse("kind = \"point\"\noutput = \"y\"\nworkers = 4").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = RawConfig::parse("kind = \"point\"\nseed = 2").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn explicit_values_override_presets() {
        let e =
            resolve("kind = \"point\"\n[params]\npresets = [\"harsh\"]\nlambda = 0.25").unwrap();
        assert_eq!(e.presets[0].params.lambda, 0.25);
        assert_eq!(e.presets[0].params.theta, 1.0);
    }
}
