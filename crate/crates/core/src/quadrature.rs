//! Adaptive Gauss-Kronrod quadrature on intervals and on the plane.
//!
//! Plane integrals are taken in polar coordinates about a primary centre.
//! The radial axis is split at `R0` (twice the distance to the farthest
//! refinement centre, at least 1): `[0, R0]` is mapped linearly and
//! `[R0, inf)` through `rho = R0 / v`, so a `rho^-alpha` tail becomes the
//! bounded factor `v^(alpha - 3)`. The initial grid has breakpoints at every
//! refinement centre; a global error-ordered heap then bisects the worst
//! cell along its worse axis. Each cell uses the 15x15 tensor Kronrod rule
//! and the axis-wise differences to the embedded 7-point Gauss rule as its
//! error estimate.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scenario::Position;
use crate::stats::neumaier_sum;

/// Kronrod abscissae on [0, 1] (positive half, descending; the last is the centre).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const NODES: usize = 15;

/// The 15-point Kronrod rule and its embedded Gauss rule on [-1, 1].
struct Rule {
    x: [f64; NODES],
    wk: [f64; NODES],
    wg: [f64; NODES],
}

const fn build_rule() -> Rule {
    let mut x = [0.0; NODES];
    let mut wk = [0.0; NODES];
    let mut wg = [0.0; NODES];
    let mut i = 0;
    while i < 7 {
        x[i] = -XGK[i];
        x[NODES - 1 - i] = XGK[i];
        wk[i] = WGK[i];
        wk[NODES - 1 - i] = WGK[i];
        if i % 2 == 1 {
            wg[i] = WG[i / 2];
            wg[NODES - 1 - i] = WG[i / 2];
        }
        i += 1;
    }
    x[7] = 0.0;
    wk[7] = WGK[7];
    wg[7] = WG[3];
    Rule { x, wk, wg }
}

const RULE: Rule = build_rule();

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Upper bound on the number of cells (or intervals) kept by the adaptive loop.
    pub max_subdivisions: usize,
    /// The first entry is the polar centre; the rest seed the initial grid.
    pub refinement_centers: Vec<Position>,
    /// Fault injection for mutation tests: flips the sign of every `eta`.
    #[doc(hidden)]
    pub eta_sign_fault: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            relative_tolerance: 1e-8,
            absolute_tolerance: 1e-12,
            max_subdivisions: 20_000,
            refinement_centers: Vec::new(),
            eta_sign_fault: false,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(mut self, relative: f64) -> Self {
        self.relative_tolerance = relative;
        self
    }

    /// Same tolerances, centred on `primary` with extra refinement at `others`.
    pub fn centered(&self, primary: Position, others: &[Position]) -> QuadratureSpec {
        let mut centers = Vec::with_capacity(others.len() + 1);
        centers.push(primary);
        for &p in others {
            if p != primary && !centers.contains(&p) {
                centers.push(p);
            }
        }
        QuadratureSpec {
            refinement_centers: centers,
            ..self.clone()
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "relative_tolerance",
                value: self.relative_tolerance,
                reason: "tolerance must be > 0",
            });
        }
        if !(self.absolute_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "absolute_tolerance",
                value: self.absolute_tolerance,
                reason: "tolerance must be > 0",
            });
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.absolute_tolerance
            .max(self.relative_tolerance * value.abs())
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    error: f64,
    index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.index.cmp(&self.index))
    }
}

// ---------------------------------------------------------------------------
// One dimension

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    alive: bool,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for i in 0..NODES {
        let v = f(c + h * RULE.x[i]);
        k += RULE.wk[i] * v;
        g += RULE.wg[i] * v;
    }
    Segment {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
        alive: true,
    }
}

/// Adaptive Gauss-Kronrod on a finite interval `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    absolute_tolerance: f64,
    relative_tolerance: f64,
    max_subdivisions: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let target = |v: f64| absolute_tolerance.max(relative_tolerance * v.abs());
    let first = gk15(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut segments = vec![first];
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { error, index: 0 });
    let mut alive = 1usize;
    loop {
        if error <= target(value) || alive.is_multiple_of(256) {
            (value, error) = totals(segments.iter().filter(|s| s.alive), |s| (s.value, s.error));
            if error <= target(value) {
                return Ok(Integral { value, error });
            }
        }
        let worst = heap.pop().expect("heap holds every live segment");
        let seg = segments[worst.index];
        let mid = 0.5 * (seg.a + seg.b);
        if alive >= max_subdivisions || mid <= seg.a || mid >= seg.b {
            (value, error) = totals(segments.iter().filter(|s| s.alive), |s| (s.value, s.error));
            return Err(Error::NonConvergence {
                subdivisions: alive,
                value,
                error,
                target: target(value),
            });
        }
        segments[worst.index].alive = false;
        value -= seg.value;
        error -= seg.error;
        for (lo, hi) in [(seg.a, mid), (mid, seg.b)] {
            let s = gk15(&f, lo, hi);
            value += s.value;
            error += s.error;
            heap.push(HeapEntry {
                error: s.error,
                index: segments.len(),
            });
            segments.push(s);
        }
        alive += 1;
    }
}

fn totals<'a, T: 'a, I, G>(items: I, parts: G) -> (f64, f64)
where
    I: Iterator<Item = &'a T>,
    G: Fn(&T) -> (f64, f64),
{
    let mut values = Vec::new();
    let mut error = 0.0;
    for item in items {
        let (v, e) = parts(item);
        values.push(v);
        error += e;
    }
    (neumaier_sum(values), error)
}

// ---------------------------------------------------------------------------
// The plane

#[derive(Debug, Clone, Copy, PartialEq)]
enum RadialMap {
    /// `rho = scale * u`.
    Linear { scale: f64 },
    /// `rho = scale / u`.
    Inverse { scale: f64 },
}

impl RadialMap {
    /// Returns `rho` and the area Jacobian `rho * d rho / d u`.
    #[inline]
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            RadialMap::Linear { scale } => {
                let rho = scale * u;
                (rho, scale * rho)
            }
            RadialMap::Inverse { scale } => {
                let rho = scale / u;
                (rho, rho * rho / u)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    map: RadialMap,
    u0: f64,
    u1: f64,
    phi0: f64,
    phi1: f64,
    value: f64,
    err_u: f64,
    err_phi: f64,
    alive: bool,
}

impl Cell {
    fn error(&self) -> f64 {
        self.err_u + self.err_phi
    }
}

fn eval_cell<F: Fn(Position) -> f64>(
    f: &F,
    center: Position,
    map: RadialMap,
    u0: f64,
    u1: f64,
    phi0: f64,
    phi1: f64,
) -> Cell {
    let cu = 0.5 * (u0 + u1);
    let hu = 0.5 * (u1 - u0);
    let cp = 0.5 * (phi0 + phi1);
    let hp = 0.5 * (phi1 - phi0);
    let mut dirs = [(0.0, 0.0); NODES];
    for (j, d) in dirs.iter_mut().enumerate() {
        let (s, c) = (cp + hp * RULE.x[j]).sin_cos();
        *d = (c, s);
    }
    let mut kk = 0.0;
    let mut gk = 0.0;
    let mut kg = 0.0;
    for i in 0..NODES {
        let (rho, jac) = map.apply(cu + hu * RULE.x[i]);
        let mut row_k = 0.0;
        let mut row_g = 0.0;
        for (j, &(c, s)) in dirs.iter().enumerate() {
            let v = f(Position::new(center.x + rho * c, center.y + rho * s));
            row_k += RULE.wk[j] * v;
            row_g += RULE.wg[j] * v;
        }
        kk += RULE.wk[i] * jac * row_k;
        gk += RULE.wg[i] * jac * row_k;
        kg += RULE.wk[i] * jac * row_g;
    }
    let scale = hu * hp;
    Cell {
        map,
        u0,
        u1,
        phi0,
        phi1,
        value: kk * scale,
        err_u: ((kk - gk) * scale).abs(),
        err_phi: ((kk - kg) * scale).abs(),
        alive: true,
    }
}

fn sorted_breaks(mut points: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    points.retain(|p| p.is_finite() && *p > lo && *p < hi);
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    let span = hi - lo;
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            Some(&last) if p - last <= 1e-9 * span => {
                if p == hi {
                    *out.last_mut().unwrap() = hi;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

fn adapt<F: Fn(Position) -> f64>(
    f: &F,
    center: Position,
    mut cells: Vec<Cell>,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    let mut heap: BinaryHeap<HeapEntry> = cells
        .iter()
        .enumerate()
        .map(|(index, c)| HeapEntry {
            error: c.error(),
            index,
        })
        .collect();
    let mut alive = cells.len();
    let mut value: f64 = cells.iter().map(|c| c.value).sum();
    let mut error: f64 = cells.iter().map(|c| c.error()).sum();
    let mut since_resum = 0;
    loop {
        if error <= spec.target(value) || since_resum >= 256 {
            let live = cells.iter().filter(|c| c.alive);
            (value, error) = totals(live, |c| (c.value, c.error()));
            since_resum = 0;
            if error <= spec.target(value) {
                return Ok(Integral { value, error });
            }
        }
        if alive >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                subdivisions: alive,
                value,
                error,
                target: spec.target(value),
            });
        }
        let worst = heap.pop().expect("heap holds every live cell");
        let cell = cells[worst.index];
        cells[worst.index].alive = false;
        value -= cell.value;
        error -= cell.error();
        let children = if cell.err_u >= cell.err_phi {
            let mid = 0.5 * (cell.u0 + cell.u1);
            [
                eval_cell(f, center, cell.map, cell.u0, mid, cell.phi0, cell.phi1),
                eval_cell(f, center, cell.map, mid, cell.u1, cell.phi0, cell.phi1),
            ]
        } else {
            let mid = 0.5 * (cell.phi0 + cell.phi1);
            [
                eval_cell(f, center, cell.map, cell.u0, cell.u1, cell.phi0, mid),
                eval_cell(f, center, cell.map, cell.u0, cell.u1, mid, cell.phi1),
            ]
        };
        for child in children {
            value += child.value;
            error += child.error();
            heap.push(HeapEntry {
                error: child.error(),
                index: cells.len(),
            });
            cells.push(child);
        }
        alive += 1;
        since_resum += 1;
    }
}

/// Integral of `f` over the whole plane.
///
/// `f` must be bounded, continuous away from the refinement centres and
/// decay at least like `|x|^-alpha` with `alpha > 2`.
pub fn integrate_plane<F: Fn(Position) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Integral> {
    spec.validate()?;
    let center = spec
        .refinement_centers
        .first()
        .copied()
        .unwrap_or(Position::ORIGIN);
    let features: Vec<(f64, f64)> = spec
        .refinement_centers
        .iter()
        .skip(1)
        .map(|p| (p.distance(center), (p.y - center.y).atan2(p.x - center.x)))
        .filter(|(rho, _)| *rho > 0.0)
        .collect();
    let far = features.iter().map(|(rho, _)| *rho).fold(0.0, f64::max);
    let r0 = (2.0 * far).max(1.0);

    let mut radial = vec![0.25 * r0.min(2.0) / r0];
    let mut angular: Vec<f64> = (1..8).map(|k| k as f64 * PI / 4.0).collect();
    for &(rho, phi) in &features {
        let h = (0.5 * rho).min(0.25);
        radial.extend([(rho - h) / r0, rho / r0, (rho + h) / r0]);
        let phi = phi.rem_euclid(2.0 * PI);
        let dphi = h.atan2(rho);
        angular.extend([
            phi,
            (phi - dphi).rem_euclid(2.0 * PI),
            (phi + dphi).rem_euclid(2.0 * PI),
        ]);
    }
    let radial = sorted_breaks(radial, 0.0, 1.0);
    let angular = sorted_breaks(angular, 0.0, 2.0 * PI);

    let mut cells = Vec::new();
    for pw in angular.windows(2) {
        for uw in radial.windows(2) {
            cells.push(eval_cell(
                &f,
                center,
                RadialMap::Linear { scale: r0 },
                uw[0],
                uw[1],
                pw[0],
                pw[1],
            ));
        }
        for (u0, u1) in [(0.0, 0.5), (0.5, 1.0)] {
            cells.push(eval_cell(
                &f,
                center,
                RadialMap::Inverse { scale: r0 },
                u0,
                u1,
                pw[0],
                pw[1],
            ));
        }
    }
    adapt(&f, center, cells, spec)
}

/// Integral of `f` over `{x : |x - center| > radius}`.
pub fn integrate_exterior<F: Fn(Position) -> f64>(
    f: F,
    center: Position,
    radius: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            value: radius,
            reason: "exterior radius must be finite and > 0",
        });
    }
    let map = RadialMap::Inverse { scale: radius };
    let mut cells = Vec::new();
    for k in 0..8 {
        let phi0 = k as f64 * PI / 4.0;
        let phi1 = (k + 1) as f64 * PI / 4.0;
        for (u0, u1) in [(0.0, 0.5), (0.5, 1.0)] {
            cells.push(eval_cell(&f, center, map, u0, u1, phi0, phi1));
        }
    }
    adapt(&f, center, cells, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials() {
        // Kronrod-15 is exact to degree 22, Gauss-7 to degree 13.
        let k: f64 = (0..NODES).map(|i| RULE.wk[i] * RULE.x[i].powi(22)).sum();
        let g: f64 = (0..NODES).map(|i| RULE.wg[i] * RULE.x[i].powi(12)).sum();
        assert_relative_eq!(k, 2.0 / 23.0, max_relative = 1e-13);
        assert_relative_eq!(g, 2.0 / 13.0, max_relative = 1e-13);
        assert_relative_eq!(RULE.wg.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn interval_examples() {
        let r = integrate_interval(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14, 100).unwrap();
        assert_relative_eq!(r.value, 1f64.exp() - 1.0, max_relative = 1e-14);
        let r = integrate_interval(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        assert_relative_eq!(r.value, 2.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn interval_reports_nonconvergence() {
        let r = integrate_interval(|x: f64| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-15, 1e-15, 5);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn gaussian_over_plane() {
        let spec = QuadratureSpec::default();
        let r = integrate_plane(|x| (-(x.x * x.x + x.y * x.y)).exp(), &spec).unwrap();
        assert_relative_eq!(r.value, PI, max_relative = 1e-9);
    }

    #[test]
    fn direct_link_kernel_over_plane() {
        // 1 / (1 + |x - d|^4 / theta) integrates to pi^2 sqrt(theta) / 2.
        let d = Position::new(1.0, 0.0);
        let spec = QuadratureSpec::default().centered(d, &[Position::new(0.5, 0.3)]);
        for theta in [1.0f64, 0.1] {
            let r = integrate_plane(
                |x| {
                    let q = x.distance_sq(d).powi(2);
                    theta / (theta + q)
                },
                &spec,
            )
            .unwrap();
            assert_relative_eq!(r.value, PI * PI * theta.sqrt() / 2.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn exterior_of_disk() {
        // |x|^-4 over |x| > 2 is 2 pi / (2 * 4) = pi / 4.
        let r = integrate_exterior(
            |x| 1.0 / (x.x * x.x + x.y * x.y).powi(2),
            Position::ORIGIN,
            2.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, PI / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn plane_reports_nonconvergence() {
        let spec = QuadratureSpec {
            max_subdivisions: 10,
            relative_tolerance: 1e-14,
            absolute_tolerance: 1e-300,
            ..QuadratureSpec::default()
        };
        let r = integrate_plane(|x| 1.0 / (1.0 + (x.x * x.x + x.y * x.y).powf(1.2)), &spec);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn deterministic() {
        let spec = QuadratureSpec::default().centered(Position::ORIGIN, &[Position::new(0.4, 0.1)]);
        let f = |x: Position| 1.0 / (1.0 + x.distance_sq(Position::new(0.4, 0.1)).powi(3));
        let a = integrate_plane(f, &spec).unwrap();
        let b = integrate_plane(f, &spec).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
