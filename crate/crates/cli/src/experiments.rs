//! Figure-family runners. Each produces one [`Table`] per (preset, engine).

use rand::Rng;

use coopnet::analytic::delivery_probability_with;
use coopnet::retransmission::attempt_distribution_independent;
use coopnet::{
    AttemptDistribution, ChannelParams, Combiner, Exec, Interference, MonteCarlo, Position,
    QuadratureSpec, Retransmission, Scenario, SeedStream,
};

use crate::config::{Axis, Engine, Experiment, Kind, NamedParams};
use crate::error::CliError;
use crate::output::{Table, Value};

/// Placements that keep failing validation are given up on after this many tries.
const MAX_REDRAWS: usize = 1000;

pub struct Runner<'a> {
    exp: &'a Experiment,
    spec: QuadratureSpec,
    seed: SeedStream,
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    value: f64,
    error: f64,
}

type CellFn<'c> = dyn Fn(&[f64]) -> Result<(Scenario, ChannelParams), CliError> + Sync + 'c;

/// One curve of a sweep: a label and the configuration at each grid row.
struct Curve<'c> {
    label: String,
    at: Box<CellFn<'c>>,
}

struct Grid {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn cell_id(table: usize, curve: usize, row: usize) -> u64 {
    ((table as u64) << 40) | ((curve as u64) << 20) | row as u64
}

fn describe(s: &Scenario, p: &ChannelParams) -> String {
    let relays: Vec<String> = s.relays().iter().map(|r| r.to_string()).collect();
    format!(
        "theta={} lambda={} p={} {} {} relays=[{}] power={}",
        p.theta,
        p.lambda,
        p.aloha_p,
        p.combiner.label(),
        p.interference.label(),
        relays.join(", "),
        s.source_power()
    )
}

impl<'a> Runner<'a> {
    pub fn new(exp: &'a Experiment) -> Self {
        let mut spec = QuadratureSpec::default().with_tolerance(exp.tolerance);
        spec.eta_sign_fault = exp.eta_sign_fault;
        Runner {
            exp,
            spec,
            seed: SeedStream::new(exp.seed),
        }
    }

    pub fn tables(&self) -> Result<Vec<Table>, CliError> {
        match self.exp.kind {
            Kind::Point => self.point().map(|t| vec![t]),
            Kind::RelaySweep => self.relay_sweep(),
            Kind::ClusterSweep => self.cluster_sweep(),
            Kind::FixedClusterSweep => self.fixed_cluster_sweep(),
            Kind::RandomSquare => self.random_square(),
            Kind::ThroughputSweep => self.throughput_sweep(),
            Kind::RetransmissionCdf => self.retransmission_cdf(),
            Kind::Acceptance => unreachable!("acceptance runs through its own module"),
        }
    }

    fn scenario(&self, relays: Vec<Position>) -> Result<Scenario, CliError> {
        let s = Scenario::new(
            Position::ORIGIN,
            Position::new(1.0, 0.0),
            relays,
            self.exp.law,
        )
        .and_then(|s| s.with_source_power(self.exp.source_power));
        s.map_err(|e| CliError::config("scenario.relays", e.to_string()))
    }

    fn baseline(&self) -> Result<Scenario, CliError> {
        self.scenario(Vec::new())?
            .with_source_power(2.0 * self.exp.source_power)
            .map_err(|e| CliError::config("scenario.source_power", e.to_string()))
    }

    /// Sweep coordinate for a relay; points landing on an endpoint move inwards.
    fn place(&self, x: f64, y: f64) -> Position {
        let off = self.exp.sweep.as_ref().map_or(1e-3, |s| s.endpoint_offset);
        let x = if y == 0.0 && x.abs() < off {
            if x < 0.0 {
                -off
            } else {
                off
            }
        } else if y == 0.0 && (x - 1.0).abs() < off {
            if x > 1.0 {
                1.0 + off
            } else {
                1.0 - off
            }
        } else {
            x
        };
        Position::new(x, y)
    }

    fn prepare(&self, scenario: Scenario, params: &ChannelParams) -> Result<Scenario, CliError> {
        match (params.combiner, self.exp.eta_nudge) {
            (Combiner::Mrc, Some(eps)) => scenario
                .nudge_for_mrc(eps)
                .map(|(s, _)| s)
                .map_err(|e| CliError::engine(describe(&scenario, params), e)),
            _ => Ok(scenario),
        }
    }

    fn evaluate(
        &self,
        engine: Engine,
        scenario: Scenario,
        params: &ChannelParams,
        cell: u64,
    ) -> Result<Estimate, CliError> {
        let scenario = self.prepare(scenario, params)?;
        let fail = |e| CliError::engine(describe(&scenario, params), e);
        let seed = self.seed.point(cell);
        match engine {
            Engine::Analytic => {
                let r = delivery_probability_with(&scenario, params, &self.spec, Exec::Parallel)
                    .map_err(fail)?;
                Ok(Estimate {
                    value: r.clamped(),
                    error: r.estimated_quadrature_error,
                })
            }
            Engine::Conditional => {
                let e = self
                    .retransmission()
                    .expected_success(&scenario, params, seed)
                    .map_err(fail)?;
                Ok(Estimate {
                    value: e.mean,
                    error: e.stderr,
                })
            }
            Engine::Montecarlo => {
                let e = MonteCarlo::new(self.exp.trials)
                    .estimate_delivery(&scenario, params, seed)
                    .map_err(fail)?;
                Ok(Estimate {
                    value: e.mean,
                    error: e.stderr,
                })
            }
        }
    }

    fn retransmission(&self) -> Retransmission {
        let mut r = Retransmission::new(self.exp.replicates);
        r.quadrature = self.spec.clone();
        r
    }

    fn table_meta(&self, table: Table, engine: Engine, preset: &NamedParams) -> Table {
        let p = &preset.params;
        let swept = |axis: Axis, value: f64| {
            let by_series = axis == Axis::Lambda
                && matches!(self.exp.kind, Kind::RelaySweep | Kind::ThroughputSweep);
            let by_sweep = self.exp.sweep.as_ref().is_some_and(|s| s.axis == axis);
            if by_series || by_sweep {
                "swept".to_string()
            } else {
                value.to_string()
            }
        };
        let t = table
            .meta("engine", engine.name())
            .meta("preset", &preset.name)
            .meta("theta", swept(Axis::Theta, p.theta))
            .meta("lambda", swept(Axis::Lambda, p.lambda))
            .meta("aloha_p", swept(Axis::AlohaP, p.aloha_p))
            .meta("alpha", self.exp.law.exponent())
            .meta("source_power", self.exp.source_power);
        match engine {
            Engine::Analytic => t.meta("tolerance", self.exp.tolerance),
            Engine::Conditional => t.meta("replicates", self.exp.replicates),
            Engine::Montecarlo => t.meta("trials", self.exp.trials),
        }
    }

    fn file_name(&self, preset: &NamedParams, engine: Engine) -> String {
        format!(
            "{}_{}_{}.csv",
            self.exp.kind.name(),
            preset.name,
            engine.name()
        )
    }

    /// Evaluates every (row, curve) cell; values go through `map` before output.
    fn run_grid(
        &self,
        table: usize,
        engine: Engine,
        grid: &Grid,
        curves: &[Curve<'_>],
        map: impl Fn(&[f64], Estimate) -> Estimate + Sync,
    ) -> Result<Vec<Vec<Value>>, CliError> {
        let n = curves.len();
        let cells = Exec::Parallel.try_map(grid.rows.len() * n, |i| {
            let (row, c) = (i / n, i % n);
            let (scenario, params) = (curves[c].at)(&grid.rows[row])?;
            self.evaluate(engine, scenario, &params, cell_id(table, c, row))
                .map(|e| map(&grid.rows[row], e))
        })?;
        Ok(grid
            .rows
            .iter()
            .enumerate()
            .map(|(r, axis)| {
                let mut row: Vec<Value> = axis.iter().map(|&v| Value::Num(v)).collect();
                for e in &cells[r * n..(r + 1) * n] {
                    row.push(Value::Num(e.value));
                    row.push(Value::Num(e.error));
                }
                row
            })
            .collect())
    }

    fn grid_tables<'c>(
        &self,
        grid: &Grid,
        curves_for: impl Fn(&NamedParams) -> Vec<Curve<'c>>,
        prefix: &str,
        map: impl Fn(&[f64], Estimate) -> Estimate + Sync + Copy,
    ) -> Result<Vec<Table>, CliError> {
        let mut out = Vec::new();
        for (t, preset) in self.exp.presets.iter().enumerate() {
            let curves = curves_for(preset);
            let mut columns = grid.columns.clone();
            for c in &curves {
                columns.push(format!("{prefix}_{}", c.label));
                columns.push(format!("err_{}", c.label));
            }
            for &engine in &self.exp.engines {
                let mut table = self.table_meta(
                    Table::new(self.file_name(preset, engine), columns.clone()),
                    engine,
                    preset,
                );
                table.rows = self.run_grid(t, engine, grid, &curves, map)?;
                out.push(table);
            }
        }
        Ok(out)
    }

    fn models(&self) -> Vec<(Combiner, Interference)> {
        let mut out = Vec::new();
        for &c in &self.exp.combiners {
            for &i in &self.exp.interference {
                out.push((c, i));
            }
        }
        out
    }

    fn sweep_grid(&self) -> Grid {
        let s = self
            .exp
            .sweep
            .as_ref()
            .expect("sweep kinds resolve a sweep");
        Grid {
            columns: vec![s.axis.name().to_string()],
            rows: s.values.iter().map(|&v| vec![v]).collect(),
        }
    }

    fn point(&self) -> Result<Table, CliError> {
        let columns = [
            "engine",
            "preset",
            "theta",
            "lambda",
            "aloha_p",
            "combiner",
            "interference",
            "relays",
            "omega",
            "error",
        ];
        let mut table = Table::new("point.csv", columns.iter().map(|c| c.to_string()).collect())
            .meta("alpha", self.exp.law.exponent())
            .meta("source_power", self.exp.source_power);
        let scenario = self.scenario(self.exp.relays.clone())?;
        let mut cells = Vec::new();
        for preset in &self.exp.presets {
            for (c, i) in self.models() {
                for &engine in &self.exp.engines {
                    cells.push((
                        engine,
                        preset,
                        preset.params.with_combiner(c).with_interference(i),
                    ));
                }
            }
        }
        let estimates = Exec::Parallel.try_map(cells.len(), |k| {
            let (engine, _, params) = &cells[k];
            self.evaluate(*engine, scenario.clone(), params, cell_id(0, 0, k))
        })?;
        for ((engine, preset, p), e) in cells.iter().zip(estimates) {
            table.rows.push(vec![
                Value::Text(engine.name().into()),
                Value::Text(preset.name.clone()),
                Value::Num(p.theta),
                Value::Num(p.lambda),
                Value::Num(p.aloha_p),
                Value::Text(p.combiner.label().into()),
                Value::Text(p.interference.label().into()),
                Value::Int(scenario.n_relays() as u64),
                Value::Num(e.value),
                Value::Num(e.error),
            ]);
        }
        Ok(table)
    }

    fn relay_sweep(&self) -> Result<Vec<Table>, CliError> {
        let axis = self.exp.sweep.as_ref().expect("sweep").axis;
        let grid = self.sweep_grid();
        let curves_for = |preset: &NamedParams| {
            let mut curves: Vec<Curve> = Vec::new();
            for &lambda in &self.exp.lambdas {
                let base = ChannelParams {
                    lambda,
                    ..preset.params
                };
                let with_axis = move |p: ChannelParams, x: f64| match axis {
                    Axis::AlohaP => ChannelParams { aloha_p: x, ..p },
                    Axis::Theta => ChannelParams { theta: x, ..p },
                    _ => p,
                };
                if self.exp.baseline {
                    curves.push(Curve {
                        label: format!("lambda{lambda}_baseline"),
                        at: Box::new(move |row| {
                            let p =
                                with_axis(base, row[0]).with_interference(Interference::Dependent);
                            Ok((self.baseline()?, p))
                        }),
                    });
                }
                for (c, i) in self.models() {
                    curves.push(Curve {
                        label: format!("lambda{lambda}_{}_{}", c.label(), i.label()),
                        at: Box::new(move |row| {
                            let relays = if axis == Axis::Position {
                                self.exp
                                    .relays
                                    .iter()
                                    .map(|r| self.place(row[0], r.y))
                                    .collect()
                            } else {
                                self.exp.relays.clone()
                            };
                            let p = with_axis(base, row[0])
                                .with_combiner(c)
                                .with_interference(i);
                            Ok((self.scenario(relays)?, p))
                        }),
                    });
                }
            }
            curves
        };
        self.grid_tables(&grid, curves_for, "omega", |_, e| e)
    }

    fn cluster_curves<'c>(&'c self, preset: &NamedParams, fixed: bool) -> Vec<Curve<'c>> {
        let mut curves = Vec::new();
        for &n in &self.exp.sizes {
            for (c, i) in self.models() {
                let params = preset.params.with_combiner(c).with_interference(i);
                curves.push(Curve {
                    label: format!("n{n}_{}_{}", c.label(), i.label()),
                    at: Box::new(move |row| {
                        let moving = self.place(row[0], 0.0);
                        let relays = if fixed {
                            let mut r = vec![self.exp.at; n - 1];
                            r.push(moving);
                            r
                        } else {
                            vec![moving; n]
                        };
                        Ok((self.scenario(relays)?, params))
                    }),
                });
            }
        }
        curves
    }

    fn cluster_sweep(&self) -> Result<Vec<Table>, CliError> {
        self.grid_tables(
            &self.sweep_grid(),
            |p| self.cluster_curves(p, false),
            "omega",
            |_, e| e,
        )
    }

    fn fixed_cluster_sweep(&self) -> Result<Vec<Table>, CliError> {
        self.grid_tables(
            &self.sweep_grid(),
            |p| self.cluster_curves(p, true),
            "omega",
            |_, e| e,
        )
    }

    fn throughput_sweep(&self) -> Result<Vec<Table>, CliError> {
        let sweep = self.exp.sweep.as_ref().expect("sweep");
        let mut rows = Vec::new();
        for &lambda in &self.exp.lambdas {
            for &p in &sweep.values {
                rows.push(vec![lambda, p, lambda * p]);
            }
        }
        let grid = Grid {
            columns: vec!["lambda".into(), "aloha_p".into(), "lambda_p".into()],
            rows,
        };
        let curves_for = |preset: &NamedParams| {
            let mut curves: Vec<Curve> = Vec::new();
            for &n in &self.exp.sizes {
                for (c, i) in self.models() {
                    let base = preset.params.with_combiner(c).with_interference(i);
                    curves.push(Curve {
                        label: format!("n{n}_{}_{}", c.label(), i.label()),
                        at: Box::new(move |row| {
                            let p = ChannelParams {
                                lambda: row[0],
                                aloha_p: row[1],
                                ..base
                            };
                            Ok((self.scenario(vec![self.exp.at; n])?, p))
                        }),
                    });
                }
            }
            curves
        };
        self.grid_tables(&grid, curves_for, "throughput", |row, e| Estimate {
            value: row[1] * e.value,
            error: row[1] * e.error,
        })
    }

    fn random_square(&self) -> Result<Vec<Table>, CliError> {
        let sweep = self.exp.sweep.as_ref().expect("sweep");
        let draws = self.exp.draws;
        let mut out = Vec::new();
        for (t, preset) in self.exp.presets.iter().enumerate() {
            let mut columns = vec!["edge".to_string()];
            let mut curves = Vec::new();
            for &n in &self.exp.sizes {
                for (c, i) in self.models() {
                    let label = format!("n{n}_{}_{}", c.label(), i.label());
                    for col in ["mean", "spread", "stderr", "redraws"] {
                        columns.push(format!("{col}_{label}"));
                    }
                    curves.push((n, preset.params.with_combiner(c).with_interference(i)));
                }
            }
            for &engine in &self.exp.engines {
                let mut table = self
                    .table_meta(
                        Table::new(self.file_name(preset, engine), columns.clone()),
                        engine,
                        preset,
                    )
                    .meta("draws", draws);
                for (row, &edge) in sweep.values.iter().enumerate() {
                    let mut line = vec![Value::Num(edge)];
                    for (k, &(n, params)) in curves.iter().enumerate() {
                        let placed: Vec<(Scenario, usize)> = (0..draws)
                            .map(|j| self.placement(n, edge, &params, j))
                            .collect::<Result<_, _>>()?;
                        let values = Exec::Parallel.try_map(draws, |j| {
                            let id = cell_id(t, k, row) ^ ((j as u64) << 56);
                            self.evaluate(engine, placed[j].0.clone(), &params, id)
                        })?;
                        let m = values.iter().map(|e| e.value).sum::<f64>() / draws as f64;
                        let spread = if draws > 1 {
                            (values.iter().map(|e| (e.value - m).powi(2)).sum::<f64>()
                                / (draws - 1) as f64)
                                .sqrt()
                        } else {
                            0.0
                        };
                        line.push(Value::Num(m));
                        line.push(Value::Num(spread));
                        line.push(Value::Num(spread / (draws as f64).sqrt()));
                        line.push(Value::Int(placed.iter().map(|p| p.1 as u64).sum()));
                    }
                    table.rows.push(line);
                }
                out.push(table);
            }
        }
        Ok(out)
    }

    /// Placement `j` of `n` relays in the square of edge `edge` around the
    /// configured centre. The uniforms depend only on (n, j), so every edge
    /// length scales the same pattern. Returns the scenario and re-draw count.
    fn placement(
        &self,
        n: usize,
        edge: f64,
        params: &ChannelParams,
        j: usize,
    ) -> Result<(Scenario, usize), CliError> {
        let mut rng = self.seed.point(u64::MAX - n as u64).rng(j as u64);
        for redraws in 0..MAX_REDRAWS {
            let relays: Vec<Position> = (0..n)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    let v: f64 = rng.random::<f64>() - 0.5;
                    Position::new(self.exp.at.x + edge * u, self.exp.at.y + edge * v)
                })
                .collect();
            let Ok(s) = self.scenario(relays) else {
                continue;
            };
            let singular = params.combiner == Combiner::Mrc
                && self.exp.eta_nudge.is_none()
                && s.validate_for(Combiner::Mrc).is_err();
            if !singular {
                return Ok((s, redraws));
            }
        }
        Err(CliError::config(
            "relays.at",
            format!("no valid placement of {n} relays after {MAX_REDRAWS} draws"),
        ))
    }

    fn retransmission_cdf(&self) -> Result<Vec<Table>, CliError> {
        let t_max = self.exp.t_max;
        let mut out = Vec::new();
        for (t, preset) in self.exp.presets.iter().enumerate() {
            let mut curves: Vec<(String, Scenario, ChannelParams)> = Vec::new();
            if self.exp.baseline {
                let p = preset.params.with_interference(Interference::Dependent);
                curves.push(("baseline".into(), self.baseline()?, p));
            }
            for &n in &self.exp.sizes {
                for (c, i) in self.models() {
                    curves.push((
                        format!("n{n}_{}_{}", c.label(), i.label()),
                        self.scenario(vec![self.exp.at; n])?,
                        preset.params.with_combiner(c).with_interference(i),
                    ));
                }
            }
            let mut columns = vec!["t".to_string()];
            for (label, ..) in &curves {
                columns.push(format!("cdf_{label}"));
                columns.push(format!("err_{label}"));
            }
            for &engine in &self.exp.engines {
                let mut table = self.table_meta(
                    Table::new(self.file_name(preset, engine), columns.clone()),
                    engine,
                    preset,
                );
                let laws: Vec<AttemptDistribution> = curves
                    .iter()
                    .enumerate()
                    .map(|(k, (_, s, p))| self.attempts(engine, s.clone(), p, cell_id(t, k, 0)))
                    .collect::<Result<_, _>>()?;
                for row in 0..t_max {
                    let mut line = vec![Value::Int(row as u64 + 1)];
                    for law in &laws {
                        line.push(Value::Num(law.cdf[row]));
                        line.push(Value::Num(law.cdf_stderr[row]));
                    }
                    table.rows.push(line);
                }
                out.push(table.meta("t_max", t_max));
            }
        }
        Ok(out)
    }

    fn attempts(
        &self,
        engine: Engine,
        scenario: Scenario,
        params: &ChannelParams,
        cell: u64,
    ) -> Result<AttemptDistribution, CliError> {
        let scenario = self.prepare(scenario, params)?;
        let fail = |e| CliError::engine(describe(&scenario, params), e);
        let seed = self.seed.point(cell);
        match (engine, params.interference) {
            (Engine::Montecarlo, _) => MonteCarlo::new(self.exp.trials)
                .estimate_attempts(&scenario, params, self.exp.t_max, seed)
                .map_err(fail),
            (_, Interference::Dependent) => self
                .retransmission()
                .attempt_distribution_dependent(&scenario, params, self.exp.t_max, seed)
                .map_err(fail),
            (_, Interference::Independent) => {
                let omega =
                    delivery_probability_with(&scenario, params, &self.spec, Exec::Parallel)
                        .map_err(fail)?
                        .clamped();
                attempt_distribution_independent(omega, self.exp.t_max).map_err(fail)
            }
        }
    }
}
