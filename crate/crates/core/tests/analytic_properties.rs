use std::f64::consts::PI;

use coopnet::analytic::{
    delivery_probability, joint_prob_mrc_dependent, joint_prob_mrc_independent,
    joint_prob_sc_dependent, joint_prob_sc_independent, one_relay_closed_forms, throughput,
};
use coopnet::{
    ChannelParams, Combiner, Interference, MonteCarlo, Position, QuadratureSpec, Scenario,
    SeedStream, SubsetMask,
};

const MODELS: [(Combiner, Interference); 4] = [
    (Combiner::Sc, Interference::Dependent),
    (Combiner::Sc, Interference::Independent),
    (Combiner::Mrc, Interference::Dependent),
    (Combiner::Mrc, Interference::Independent),
];

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn omega(s: &Scenario, p: &ChannelParams) -> f64 {
    delivery_probability(s, p, &spec()).unwrap().omega
}

fn layouts() -> Vec<Scenario> {
    vec![
        Scenario::unit(vec![Position::new(0.3, 0.0)]).unwrap(),
        Scenario::unit(vec![Position::new(0.5, 0.4), Position::new(0.8, -0.1)]).unwrap(),
        Scenario::unit(vec![
            Position::new(0.2, 0.0),
            Position::new(0.2, 0.0),
            Position::new(0.6, 0.2),
        ])
        .unwrap(),
    ]
}

fn param_grid() -> Vec<ChannelParams> {
    let mut out = Vec::new();
    for theta in [0.1, 1.0, 3.0] {
        for lambda in [0.2, 1.0] {
            for p in [0.3, 1.0] {
                out.push(ChannelParams::new(theta, lambda, p).unwrap());
            }
        }
    }
    out
}

#[test]
fn closed_form_anchor_without_relays() {
    let s = Scenario::unit(vec![]).unwrap();
    for params in param_grid() {
        let th = s.thresholds(params.theta).sd;
        let anchor = (-params.lambda * params.aloha_p * PI * PI * th.sqrt() / 2.0).exp();
        let got = omega(&s, &params);
        assert!(
            ((got - anchor) / anchor).abs() < 1e-6,
            "{params:?}: {got} vs {anchor}"
        );
    }
}

#[test]
fn probabilities_stay_in_unit_interval() {
    let tol = 10.0 * spec().relative_tolerance;
    for s in layouts() {
        for base in param_grid() {
            for (c, i) in MODELS {
                let r =
                    delivery_probability(&s, &base.with_combiner(c).with_interference(i), &spec())
                        .unwrap();
                assert!(r.omega >= -tol && r.omega <= 1.0 + tol, "{}", r.omega);
                for t in r.per_subset_terms.values() {
                    assert!(t.abs() <= 1.0 + tol);
                }
            }
        }
    }
}

#[test]
fn larger_subsets_are_less_likely() {
    for s in layouts() {
        for base in [
            ChannelParams::good(),
            ChannelParams::harsh(),
            ChannelParams::scenario_b(),
        ] {
            for (c, i) in MODELS {
                let r =
                    delivery_probability(&s, &base.with_combiner(c).with_interference(i), &spec())
                        .unwrap();
                let terms: Vec<(SubsetMask, f64)> = r
                    .per_subset_terms
                    .iter()
                    .map(|(m, t)| (*m, t.abs()))
                    .collect();
                for &(a, pa) in &terms {
                    for &(b, pb) in &terms {
                        if a.is_subset_of(b) {
                            assert!(pa >= pb - 1e-9, "{c:?} {i:?}: P{a} = {pa} < P{b} = {pb}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn omega_decreases_in_theta_lambda_and_p() {
    let s = Scenario::unit(vec![Position::new(0.4, 0.1), Position::new(0.7, 0.0)]).unwrap();
    let grid = [0.1, 0.3, 0.6, 1.0];
    for c in [Combiner::Sc, Combiner::Mrc] {
        let at = |theta: f64, lambda: f64, p: f64| {
            omega(
                &s,
                &ChannelParams::new(theta, lambda, p)
                    .unwrap()
                    .with_combiner(c),
            )
        };
        for &a in &grid {
            for &b in &grid {
                for w in grid.windows(2) {
                    assert!(at(w[1], a, b) <= at(w[0], a, b) + 1e-9);
                    assert!(at(a, w[1], b) <= at(a, w[0], b) + 1e-9);
                    assert!(at(a, b, w[1]) <= at(a, b, w[0]) + 1e-9);
                }
            }
        }
    }
}

#[test]
fn mrc_never_worse_than_sc() {
    for s in layouts() {
        for base in param_grid() {
            for i in [Interference::Dependent, Interference::Independent] {
                let p = base.with_interference(i);
                let sc = omega(&s, &p.with_combiner(Combiner::Sc));
                let mrc = omega(&s, &p.with_combiner(Combiner::Mrc));
                assert!(mrc >= sc - 1e-9, "{i:?} {base:?}: {mrc} < {sc}");
            }
        }
    }
}

#[test]
fn extra_relay_never_hurts() {
    let base = Scenario::unit(vec![Position::new(0.4, 0.0)]).unwrap();
    let extras = [
        Position::new(0.4, 0.0),
        Position::new(0.9, 0.3),
        Position::new(-0.5, 0.5),
        Position::new(3.0, -2.0),
    ];
    for extra in extras {
        let more = base
            .with_relays(vec![Position::new(0.4, 0.0), extra])
            .unwrap();
        for params in [
            ChannelParams::good(),
            ChannelParams::harsh(),
            ChannelParams::scenario_b(),
        ] {
            for (c, i) in MODELS {
                let p = params.with_combiner(c).with_interference(i);
                let (a, b) = (omega(&base, &p), omega(&more, &p));
                assert!(b >= a - 1e-9, "{extra} {c:?} {i:?}: {b} < {a}");
            }
        }
    }
}

#[test]
fn direct_event_is_model_independent() {
    let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
    for params in param_grid() {
        let d = SubsetMask::direct();
        let a = joint_prob_sc_dependent(&s, &params, d, &spec()).unwrap();
        assert_eq!(
            a,
            joint_prob_sc_independent(&s, &params, d, &spec()).unwrap()
        );
        assert_eq!(
            a,
            joint_prob_mrc_dependent(&s, &params, d, &spec()).unwrap()
        );
        assert_eq!(
            a,
            joint_prob_mrc_independent(&s, &params, d, &spec()).unwrap()
        );
    }
}

#[test]
fn general_engine_matches_one_relay_forms() {
    let tight = spec().with_tolerance(1e-10);
    for at in [(0.25, 0.0), (0.5, 0.0), (0.75, 0.0), (0.5, 0.3)] {
        let s = Scenario::unit(vec![Position::new(at.0, at.1)]).unwrap();
        for params in [ChannelParams::good(), ChannelParams::harsh()] {
            let forms = one_relay_closed_forms(&s, &params, &tight).unwrap();
            let sc = delivery_probability(&s, &params, &tight).unwrap().omega;
            let mrc = delivery_probability(&s, &params.with_combiner(Combiner::Mrc), &tight)
                .unwrap()
                .omega;
            assert!((sc - forms.omega_sc()).abs() < 1e-8);
            assert!((mrc - forms.omega_mrc()).abs() < 1e-8);
            let both = SubsetMask::new(true, &[0]);
            let joint = joint_prob_mrc_dependent(&s, &params, both, &tight).unwrap();
            assert!((joint - forms.direct_and_relay_mrc).abs() < 1e-8);
        }
    }
}

#[test]
fn reflection_across_the_axis() {
    let s = Scenario::unit(vec![Position::new(0.3, 0.4), Position::new(0.6, -0.2)]).unwrap();
    let mirrored: Vec<Position> = s
        .relays()
        .iter()
        .map(|r| Position::new(r.x, -r.y))
        .collect();
    let m = s.with_relays(mirrored).unwrap();
    for (c, i) in MODELS {
        let p = ChannelParams::harsh().with_combiner(c).with_interference(i);
        assert!((omega(&s, &p) - omega(&m, &p)).abs() < 1e-8);
    }
}

#[test]
fn orderings_for_single_terms() {
    let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
    let relay = SubsetMask::new(false, &[0]);
    let harsh = ChannelParams::harsh();
    let dep = joint_prob_sc_dependent(&s, &harsh, relay, &spec()).unwrap();
    let ind = joint_prob_sc_independent(&s, &harsh, relay, &spec()).unwrap();
    assert!(ind < dep, "{ind} vs {dep}");

    let good = ChannelParams::good();
    let mrc = joint_prob_mrc_dependent(&s, &good, relay, &spec()).unwrap();
    let sc = joint_prob_sc_dependent(&s, &good, relay, &spec()).unwrap();
    assert!(mrc >= sc);

    let near = Scenario::unit(vec![Position::new(0.25, 0.0)]).unwrap();
    let gap = omega(&near, &good.with_combiner(Combiner::Mrc)) - omega(&near, &good);
    assert!(gap > 0.0);
}

#[test]
fn single_terms_match_simulation() {
    let trials = 400_000;
    let mc = MonteCarlo::new(trials);
    let seed = SeedStream::new(31);
    let relay = SubsetMask::new(false, &[0]);
    let cases = [
        (
            Position::new(0.5, 0.0),
            ChannelParams::harsh(),
            Combiner::Sc,
            Interference::Dependent,
        ),
        (
            Position::new(0.5, 0.0),
            ChannelParams::harsh(),
            Combiner::Sc,
            Interference::Independent,
        ),
        (
            Position::new(0.25, 0.0),
            ChannelParams::harsh(),
            Combiner::Mrc,
            Interference::Dependent,
        ),
        (
            Position::new(0.5, 0.0),
            ChannelParams::good(),
            Combiner::Mrc,
            Interference::Independent,
        ),
    ];
    for (k, (at, base, c, i)) in cases.into_iter().enumerate() {
        let s = Scenario::unit(vec![at]).unwrap();
        let p = base.with_combiner(c).with_interference(i);
        let exact = coopnet::analytic::joint_probability(&s, &p, relay, &spec()).unwrap();
        let est = mc
            .estimate_joint(&s, &p, relay, seed.point(k as u64))
            .unwrap();
        assert!(
            est.z_score(exact) <= 3.0,
            "{c:?} {i:?} at {at}: {est:?} vs {exact}"
        );
    }
}

#[test]
fn throughput_maximizer_matches_simulated_grid() {
    let s = Scenario::unit(vec![Position::new(0.5, 0.0)]).unwrap();
    let grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.05).collect();
    let at = |p: f64| ChannelParams::new(0.5, 1.0, p).unwrap();
    let analytic: Vec<f64> = grid
        .iter()
        .map(|&p| throughput(&s, &at(p), &spec()).unwrap())
        .collect();
    assert_eq!(throughput(&s, &at(0.0), &spec()).unwrap(), 0.0);
    let best = argmax(&analytic);
    assert!(
        best > 0 && best + 1 < grid.len(),
        "maximizer on the boundary"
    );

    let mc = MonteCarlo::new(40_000);
    let simulated: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            p * mc
                .estimate_delivery(&s, &at(p), SeedStream::new(k as u64))
                .unwrap()
                .mean
        })
        .collect();
    let mc_best = argmax(&simulated);
    assert!(
        (grid[best] - grid[mc_best]).abs() <= 0.05 + 1e-12,
        "analytic p* = {}, simulated p* = {}",
        grid[best],
        grid[mc_best]
    );
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) },
        )
        .0
}
