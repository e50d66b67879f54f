//! Poisson point process realisations on a disk window.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::Position;
use crate::slot::exp1;

#[derive(Debug, Clone, PartialEq)]
pub struct PppRealization {
    points: Vec<Position>,
    center: Position,
    window_radius: f64,
}

impl PppRealization {
    pub fn new(points: Vec<Position>, center: Position, window_radius: f64) -> Result<Self> {
        check_window(center, window_radius)?;
        let r2 = window_radius * window_radius;
        if let Some(&point) = points.iter().find(|p| p.distance_sq(center) > r2) {
            return Err(Error::OutsideWindow {
                point,
                center,
                radius: window_radius,
            });
        }
        Ok(PppRealization {
            points,
            center,
            window_radius,
        })
    }

    pub fn empty(center: Position, window_radius: f64) -> Self {
        PppRealization {
            points: Vec::new(),
            center,
            window_radius,
        }
    }

    pub fn points(&self) -> &[Position] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn center(&self) -> Position {
        self.center
    }

    pub fn window_radius(&self) -> f64 {
        self.window_radius
    }
}

fn check_window(center: Position, radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "window_radius",
            value: radius,
            reason: "window radius must be finite and > 0",
        });
    }
    if !center.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "non-finite window centre {center}"
        )));
    }
    Ok(())
}

/// Homogeneous PPP of intensity `lambda` on the disk of `radius` about `center`.
/// Points come out sorted by distance from the centre.
pub fn sample_ppp<R: Rng + ?Sized>(
    lambda: f64,
    center: Position,
    radius: f64,
    rng: &mut R,
) -> Result<PppRealization> {
    check_window(center, radius)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "intensity must be finite and >= 0",
        });
    }
    let mut points = Vec::new();
    sample_points_into(&mut points, lambda, center, radius, rng);
    Ok(PppRealization {
        points,
        center,
        window_radius: radius,
    })
}

/// Points of a PPP on a disk, generated in order of increasing distance from
/// the centre: squared radii are arrival times of a rate `lambda * pi`
/// Poisson process, directions are uniform.
pub(crate) struct RadialSampler {
    center: Position,
    rate: f64,
    limit_sq: f64,
    area: f64,
}

impl RadialSampler {
    pub(crate) fn new(lambda: f64, center: Position, radius: f64) -> Self {
        RadialSampler {
            center,
            rate: lambda * PI,
            limit_sq: radius * radius,
            area: 0.0,
        }
    }

    #[inline]
    pub(crate) fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Position> {
        if self.rate <= 0.0 || self.area > self.limit_sq {
            return None;
        }
        self.area += exp1(rng) / self.rate;
        if self.area > self.limit_sq {
            return None;
        }
        let r = self.area.sqrt();
        // Uniform direction by rejection from the square; avoids trig.
        let (cos, sin) = loop {
            let x: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let y: f64 = 2.0 * rng.random::<f64>() - 1.0;
            let s = x * x + y * y;
            if s <= 1.0 && s > 0.0 {
                let norm = s.sqrt();
                break (x / norm, y / norm);
            }
        };
        Some(Position::new(
            self.center.x + r * cos,
            self.center.y + r * sin,
        ))
    }
}

/// Fills `points` with a PPP realisation; inputs must already be valid.
pub(crate) fn sample_points_into<R: Rng + ?Sized>(
    points: &mut Vec<Position>,
    lambda: f64,
    center: Position,
    radius: f64,
    rng: &mut R,
) {
    points.clear();
    let mut sampler = RadialSampler::new(lambda, center, radius);
    while let Some(x) = sampler.next(rng) {
        points.push(x);
    }
}
