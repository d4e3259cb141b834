//! Prediction rounding and the generalized Rice mapping.
//!
//! A real-valued prediction is snapped to the grid of multiples of `rho/tau`
//! and kept as an integer numerator over `tau`. From then on every quantity
//! (residual, mapped value, inverse) is computed with exact integer
//! arithmetic, so encoder and decoder can never disagree on a floor or a
//! ceiling near a grid boundary.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest accepted `tau`. Products `tau * x` are still checked; at this
/// bound symbols up to about 2^22 in magnitude fit.
pub const MAX_TAU: u64 = 1 << 40;

/// A finite rounding grid `rho/tau` with `1 <= rho <= tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FinitePrecision {
    rho: u64,
    tau: u64,
}

impl FinitePrecision {
    /// Plain integer prediction; the classic Rice-Golomb setting.
    pub const UNIT: FinitePrecision = FinitePrecision { rho: 1, tau: 1 };

    /// Finest accepted grid, `1/2^40`. Stands in for the limit when a
    /// concrete grid is required.
    pub const FINEST: FinitePrecision = FinitePrecision {
        rho: 1,
        tau: MAX_TAU,
    };

    pub fn new(rho: u64, tau: u64) -> Result<Self> {
        if rho == 0 || tau == 0 {
            return Err(Error::invalid("rho and tau must be positive"));
        }
        if rho > tau {
            return Err(Error::invalid(format!(
                "rho ({rho}) must not exceed tau ({tau})"
            )));
        }
        if tau > MAX_TAU {
            return Err(Error::invalid(format!("tau ({tau}) exceeds 2^40")));
        }
        Ok(FinitePrecision { rho, tau })
    }

    #[inline]
    pub fn rho(self) -> u64 {
        self.rho
    }

    #[inline]
    pub fn tau(self) -> u64 {
        self.tau
    }

    /// Grid spacing `rho/tau`.
    pub fn step(self) -> f64 {
        self.rho as f64 / self.tau as f64
    }

    /// `rho/(2 tau)`, the left shift of the code-length pattern at this grid.
    pub fn half_step(self) -> f64 {
        self.rho as f64 / (2.0 * self.tau as f64)
    }
}

impl fmt::Display for FinitePrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rho == self.tau {
            write!(f, "1")
        } else {
            write!(f, "{}/{}", self.rho, self.tau)
        }
    }
}

/// Coding precision: a finite grid, or the limit `rho/tau -> 0`.
///
/// The asymptotic variant is only meaningful to the analytic model; the
/// codec needs a concrete grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Finite(FinitePrecision),
    Asymptotic,
}

impl Precision {
    pub fn finite(rho: u64, tau: u64) -> Result<Self> {
        FinitePrecision::new(rho, tau).map(Precision::Finite)
    }

    pub fn half_step(self) -> f64 {
        match self {
            Precision::Finite(p) => p.half_step(),
            Precision::Asymptotic => 0.0,
        }
    }

    pub fn as_finite(self) -> Option<FinitePrecision> {
        match self {
            Precision::Finite(p) => Some(p),
            Precision::Asymptotic => None,
        }
    }
}

impl From<FinitePrecision> for Precision {
    fn from(p: FinitePrecision) -> Self {
        Precision::Finite(p)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Finite(p) => p.fmt(f),
            Precision::Asymptotic => write!(f, "asymptotic"),
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    /// Accepts `"1"`, `"rho/tau"`, or `"asymptotic"` / `"0"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("asymptotic") || s == "0" {
            return Ok(Precision::Asymptotic);
        }
        let parse = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad precision '{s}'")))
        };
        match s.split_once('/') {
            Some((r, t)) => Precision::finite(parse(r)?, parse(t)?),
            None => {
                let v = parse(s)?;
                Precision::finite(v, v)
            }
        }
    }
}

/// A rounded prediction `numerator / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedPrediction {
    numerator: i64,
    tau: u64,
}

impl QuantizedPrediction {
    pub fn new(numerator: i64, tau: u64) -> Result<Self> {
        if tau == 0 || tau > MAX_TAU {
            return Err(Error::invalid(format!("tau {tau} out of range")));
        }
        Ok(QuantizedPrediction { numerator, tau })
    }

    #[inline]
    pub fn numerator(self) -> i64 {
        self.numerator
    }

    #[inline]
    pub fn tau(self) -> u64 {
        self.tau
    }

    pub fn on_grid(self, p: FinitePrecision) -> bool {
        self.tau == p.tau && self.numerator.rem_euclid(p.rho as i64) == 0
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.tau as f64
    }
}

/// Residual `value / tau = x - numerator / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidualNumerator {
    value: i64,
    tau: u64,
}

impl ResidualNumerator {
    pub fn new(value: i64, tau: u64) -> Result<Self> {
        if tau == 0 || tau > MAX_TAU {
            return Err(Error::invalid(format!("tau {tau} out of range")));
        }
        Ok(ResidualNumerator { value, tau })
    }

    #[inline]
    pub fn value(self) -> i64 {
        self.value
    }

    #[inline]
    pub fn tau(self) -> u64 {
        self.tau
    }

    pub fn to_f64(self) -> f64 {
        self.value as f64 / self.tau as f64
    }
}

/// Non-negative integer fed to the Golomb coder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MappedResidual(pub u64);

impl MappedResidual {
    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }
}

/// Which half of the generalized mapping produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `floor(2 e)` for `e >= 0`.
    NonNegative,
    /// `-floor(2 e) - 1` for `e < 0`.
    Negative,
}

#[inline]
fn floor_div(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    a.div_euclid(b)
}

#[inline]
fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Rounds `xhat` to the nearest multiple of `rho/tau`; exact half-way
/// points round up.
pub fn round_prediction(xhat: f64, p: FinitePrecision) -> Result<QuantizedPrediction> {
    if !xhat.is_finite() {
        return Err(Error::invalid(format!("prediction {xhat} is not finite")));
    }
    let scaled = (p.tau as f64 * xhat / p.rho as f64 + 0.5).floor();
    // 2^62 leaves headroom for the later `tau * x - N` and doubling.
    if scaled.abs() >= (1u64 << 62) as f64 {
        return Err(Error::Overflow("rounded prediction"));
    }
    let numerator = (p.rho as i64)
        .checked_mul(scaled as i64)
        .ok_or(Error::Overflow("rounded prediction"))?;
    Ok(QuantizedPrediction {
        numerator,
        tau: p.tau,
    })
}

/// `tau * x - N`, checked so that the doubled residual still fits in `i64`.
pub fn residual(x: i32, q: QuantizedPrediction) -> Result<ResidualNumerator> {
    let value = (q.tau as i64)
        .checked_mul(x as i64)
        .and_then(|v| v.checked_sub(q.numerator))
        .filter(|v| v.checked_mul(2).is_some())
        .ok_or(Error::Overflow("residual numerator"))?;
    Ok(ResidualNumerator { value, tau: q.tau })
}

/// Generalized Rice mapping of a residual on the `1/tau` lattice.
pub fn map_residual(e: ResidualNumerator) -> MappedResidual {
    map_residual_traced(e).0
}

/// [`map_residual`] plus the branch that produced the value.
pub fn map_residual_traced(e: ResidualNumerator) -> (MappedResidual, Branch) {
    let twice = 2 * e.value as i128;
    let fl = floor_div(twice, e.tau as i128);
    if e.value >= 0 {
        (MappedResidual(fl as u64), Branch::NonNegative)
    } else {
        (MappedResidual((-fl - 1) as u64), Branch::Negative)
    }
}

/// The classic Rice interleave `0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ...`.
pub fn rice_map(e: i64) -> u64 {
    if e >= 0 {
        (e as u64) << 1
    } else {
        ((-(e as i128)) as u64) * 2 - 1
    }
}

/// Splits a residual into integer part `gamma` and lattice offset `delta`,
/// so that `r / tau = gamma + delta / tau` with `0 <= delta < tau`.
pub fn gamma_delta(e: ResidualNumerator) -> (i64, i64) {
    let tau = e.tau as i64;
    let gamma = e.value.div_euclid(tau);
    (gamma, e.value - tau * gamma)
}

/// Maps `gamma + delta/tau` by explicit ordering of the lattice by magnitude.
///
/// Independent route to the same value as [`map_residual`].
pub fn map_by_cases(gamma: i64, delta: i64, tau: u64) -> Result<MappedResidual> {
    if tau == 0 || delta < 0 || delta as u64 >= tau {
        return Err(Error::invalid(format!("delta {delta} outside [0, {tau})")));
    }
    let g = gamma as i128;
    let near_lower = 2 * (delta as i128) < tau as i128;
    let m = match (near_lower, gamma >= 0) {
        (true, true) => 2 * g,
        (true, false) => -2 * g - 1,
        (false, true) => 2 * g + 1,
        (false, false) => -2 * g - 2,
    };
    Ok(MappedResidual(m as u64))
}

/// `ceil(2 N / tau)`, the parity reference the decoder needs.
pub fn ceil_twice_prediction(q: QuantizedPrediction) -> i64 {
    ceil_div(2 * q.numerator as i128, q.tau as i128) as i64
}

/// Inverse of the mapping: recovers `x` from `M` and the rounded prediction.
///
/// Fails only when the recovered symbol does not fit the 32-bit domain,
/// which can happen for a mapped value that no valid symbol produces.
pub fn unmap(m: MappedResidual, q: QuantizedPrediction) -> Result<i32> {
    let c = ceil_twice_prediction(q) as i128;
    let m = m.0 as i128;
    let sum = m + c;
    let x = if sum.rem_euclid(2) == 0 {
        sum / 2
    } else {
        (c - m - 1) / 2
    };
    i32::try_from(x).map_err(|_| Error::Overflow("decoded symbol outside i32"))
}
