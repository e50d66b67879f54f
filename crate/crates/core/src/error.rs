use thiserror::Error;

use crate::scenario::Position;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// `1 - sum g_sd / g_rd` vanishes for the listed relay subset.
    #[error("eta is singular for relays {relays:?} (denominator {denominator:e})")]
    EtaSingular {
        relays: Vec<usize>,
        denominator: f64,
    },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {value:e}, error {error:e}, target {target:e})"
    )]
    NonConvergence {
        subdivisions: usize,
        value: f64,
        error: f64,
        target: f64,
    },

    #[error("{relays} relays requested, inclusion-exclusion supports at most {max}")]
    TooManyRelays { relays: usize, max: usize },

    #[error(
        "sampling window radius {radius} too small: residual tail bias {residual:e} exceeds {limit:e}"
    )]
    WindowTooSmall {
        radius: f64,
        residual: f64,
        limit: f64,
    },

    #[error(
        "expansion cross-check limited to T <= {max_t} and N <= {max_n} (got T = {t}, N = {n})"
    )]
    ExpansionTooLarge {
        t: usize,
        n: usize,
        max_t: usize,
        max_n: usize,
    },

    #[error("point {point:?} outside sampling window centred at {center:?} with radius {radius}")]
    OutsideWindow {
        point: Position,
        center: Position,
        radius: f64,
    },
}

impl Error {
    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EtaSingular { .. } | Error::NonConvergence { .. } | Error::WindowTooSmall { .. }
        )
    }
}
