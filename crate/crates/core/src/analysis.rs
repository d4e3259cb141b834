//! Closed-form model of the code under Laplace-distributed residuals.
//!
//! With `f(e) = -ln(theta)/2 * theta^|e|`, the expected codeword length of
//! the Golomb code with parameter `m` at precision `rho/tau` is
//!
//! ```text
//! L(m, theta) = 1 + lg m + 1/2 * theta^(m/2) / (1 - theta^(m/2)) * (theta^h + theta^-h)          m = 2^k
//! L(m, theta) = 1 + floor(lg m) + 1/2 * theta^(c/2) / (1 - theta^(m/2)) * (theta^h + theta^-h)   otherwise
//! ```
//!
//! where `h = rho/(2 tau)` and `c = 2^ceil(lg m) - m`. `m = 1` counts as a
//! power of two. As `h -> 0` the bracket tends to 2.
//!
//! The optimal `m` in the limit is `m` on `[phi_{m-1}^2, phi_m^2]`, with
//! `phi_m` the root in `(0, 1)` of `phi^(m+1) + phi^m - 1`.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qmap::Precision;

/// Largest `m` in the shared lookup table.
pub const DEFAULT_MAX_M: u64 = 64;

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("theta {theta} outside (0, 1)")))
    }
}

fn check_m(m: u64) -> Result<()> {
    if m == 0 {
        Err(Error::invalid("m must be >= 1"))
    } else {
        Ok(())
    }
}

#[inline]
fn floor_lg(m: u64) -> u32 {
    63 - m.leading_zeros()
}

#[inline]
fn ceil_lg(m: u64) -> u32 {
    64 - (m - 1).leading_zeros()
}

/// Symmetric Laplace density `-ln(theta)/2 * theta^|e|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceModel {
    theta: f64,
}

impl LaplaceModel {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(LaplaceModel { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Scale `b = -1/ln(theta)`; also the mean absolute value.
    pub fn scale(&self) -> f64 {
        -1.0 / self.theta.ln()
    }

    pub fn pdf(&self, eps: f64) -> f64 {
        -self.theta.ln() / 2.0 * self.theta.powf(eps.abs())
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        let d = u - 0.5;
        -self.scale() * d.signum() * (1.0 - 2.0 * d.abs()).ln()
    }
}

/// `theta^a / (1 - theta^(m/2))` with the numerator exponent `a` chosen by
/// whether `m` is a power of two, plus the matching constant term.
fn length_terms(m: u64, theta: f64) -> (f64, f64) {
    let ln = theta.ln();
    let denom = -(m as f64 / 2.0 * ln).exp_m1();
    if m.is_power_of_two() {
        let base = 1.0 + f64::from(floor_lg(m));
        (base, (m as f64 / 2.0 * ln).exp() / denom)
    } else {
        let c = (1u64 << ceil_lg(m)) - m;
        let base = 1.0 + f64::from(floor_lg(m));
        (base, (c as f64 / 2.0 * ln).exp() / denom)
    }
}

/// Expected code length in the limit `rho/tau -> 0`.
pub fn asymptotic_code_length(m: u64, theta: f64) -> Result<f64> {
    check_m(m)?;
    check_theta(theta)?;
    let (base, geo) = length_terms(m, theta);
    Ok(base + geo)
}

/// Expected code length at precision `p`.
pub fn avg_code_length(m: u64, theta: f64, p: Precision) -> Result<f64> {
    check_m(m)?;
    check_theta(theta)?;
    let (base, geo) = length_terms(m, theta);
    match p {
        Precision::Asymptotic => Ok(base + geo),
        Precision::Finite(fp) => {
            let s = fp.half_step() * theta.ln();
            Ok(base + 0.5 * geo * (s.exp() + (-s).exp()))
        }
    }
}

/// Codeword length assigned to a real residual `eps`.
///
/// In the limit the pattern is symmetric in `eps`; at a finite grid it is
/// the same pattern moved left by `rho/(2 tau)`.
pub fn interval_code_length(eps: f64, m: u64, p: Precision) -> u64 {
    assert!(m >= 1, "m must be >= 1");
    let a = (eps + p.half_step()).abs();
    let lg = u64::from(floor_lg(m));
    if m.is_power_of_two() {
        let i = (2.0 * a / m as f64).floor() as u64;
        1 + i + lg
    } else {
        let c = ((1u64 << ceil_lg(m)) - m) as f64;
        if a < c / 2.0 {
            1 + lg
        } else {
            let i = ((2.0 * a - c) / m as f64).floor() as u64;
            2 + i + lg
        }
    }
}

/// `phi^(m+1) + phi^m - 1`
pub fn phi_poly(m: u64, phi: f64) -> f64 {
    let pm = phi.powi(m as i32);
    pm * phi + pm - 1.0
}

/// Root of `phi^(m+1) + phi^m - 1` in `(0, 1)` by bisection.
///
/// The polynomial is strictly increasing there, from -1 to 1, so bisection
/// always brackets. Iterates until the bracket stops shrinking.
pub fn phi_root(m: u64) -> f64 {
    assert!((1..=i32::MAX as u64).contains(&m), "m out of range");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi_poly(m, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if phi_poly(m, lo).abs() <= phi_poly(m, hi).abs() {
        lo
    } else {
        hi
    }
}

/// Boundaries `phi_1^2 < phi_2^2 < ... < phi_max^2` mapping a scale
/// estimate to its optimal `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalMTable {
    boundaries: Vec<f64>,
}

impl OptimalMTable {
    pub fn build(max_m: u64) -> Result<Self> {
        if max_m == 0 || max_m > u64::from(u16::MAX) {
            return Err(Error::invalid(format!("table size {max_m} out of range")));
        }
        let boundaries: Vec<f64> = (1..=max_m).map(|m| phi_root(m).powi(2)).collect();
        debug_assert!(boundaries.windows(2).all(|w| w[0] < w[1]));
        Ok(OptimalMTable { boundaries })
    }

    pub fn max_m(&self) -> u64 {
        self.boundaries.len() as u64
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Smallest `m` with `theta <= phi_m^2`, or `max_m` past the last entry.
    pub fn lookup(&self, theta: f64) -> u64 {
        let idx = self.boundaries.partition_point(|&b| b < theta);
        (idx as u64 + 1).min(self.max_m())
    }
}

/// Shared 64-entry table.
pub fn default_table() -> &'static OptimalMTable {
    static TABLE: OnceLock<OptimalMTable> = OnceLock::new();
    TABLE.get_or_init(|| OptimalMTable::build(DEFAULT_MAX_M).expect("valid table size"))
}

/// Base for expressing redundancy as a percentage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedundancyBase {
    /// Relative to the asymptotic optimum `L_{m_theta}(theta)`.
    Asymptotic,
    /// Relative to the finite-precision length with the same `m_theta`.
    Finite,
}

/// Extra bits paid at precision `p` when coding with the asymptotically
/// optimal `m_theta` instead of working at infinite precision.
pub fn redundancy(theta: f64, p: Precision, table: &OptimalMTable) -> Result<f64> {
    check_theta(theta)?;
    let m = table.lookup(theta);
    let (_, geo) = length_terms(m, theta);
    // theta^h + theta^-h - 2 = 4 sinh^2(h ln(theta) / 2), without cancellation
    let s = (p.half_step() * theta.ln() / 2.0).sinh();
    Ok(0.5 * geo * 4.0 * s * s)
}

pub fn redundancy_pct(
    theta: f64,
    p: Precision,
    table: &OptimalMTable,
    base: RedundancyBase,
) -> Result<f64> {
    let extra = redundancy(theta, p, table)?;
    let m = table.lookup(theta);
    let denom = match base {
        RedundancyBase::Asymptotic => asymptotic_code_length(m, theta)?,
        RedundancyBase::Finite => avg_code_length(m, theta, p)?,
    };
    Ok(100.0 * extra / denom)
}

/// Optimal Golomb parameter for a one-sided geometric source,
/// `ceil(lg(1 + theta) / -lg(theta))`.
pub fn golomb_mstar(theta: f64) -> Result<u64> {
    check_theta(theta)?;
    let v = ((1.0 + theta).log2() / -theta.log2()).ceil();
    Ok((v as u64).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmap::FinitePrecision;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fin(rho: u64, tau: u64) -> Precision {
        Precision::finite(rho, tau).unwrap()
    }

    #[test]
    fn pdf_examples() {
        let lap = LaplaceModel::new(0.5).unwrap();
        assert!((lap.pdf(0.0) - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert!(LaplaceModel::new(1.0).is_err());
        assert!(LaplaceModel::new(0.0).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        // composite Simpson on [-60, 60] at theta = 0.5
        let lap = LaplaceModel::new(0.5).unwrap();
        let n = 240_000;
        let (a, b) = (-60.0, 60.0);
        let h = (b - a) / n as f64;
        let mut s = lap.pdf(a) + lap.pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * lap.pdf(a + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sample_mean_abs_matches_scale() {
        let lap = LaplaceModel::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| lap.sample(&mut rng).abs()).sum::<f64>() / n as f64;
        let expect = 1.0 / 2f64.ln();
        assert!((mean / expect - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn asymptotic_lengths_match_table_row() {
        let l = |m, t| avg_code_length(m, t, Precision::Asymptotic).unwrap();
        assert!((l(1, 0.1) - 1.46248).abs() < 1e-5);
        assert_eq!(l(2, 0.5), 3.0);
        assert!((l(3, 0.6) - 3.44719).abs() < 1e-5);
        assert!((l(2, 0.4) - 2.66667).abs() < 1e-5);
        assert!(avg_code_length(0, 0.5, Precision::Asymptotic).is_err());
        assert!(avg_code_length(1, 1.5, Precision::Asymptotic).is_err());
    }

    #[test]
    fn finite_length_exceeds_asymptotic() {
        for m in 1..=16 {
            for t in [0.1, 0.5, 0.9] {
                let a = asymptotic_code_length(m, t).unwrap();
                let f = avg_code_length(m, t, fin(1, 4)).unwrap();
                assert!(f > a);
            }
        }
    }

    #[test]
    fn interval_length_examples() {
        let asy = Precision::Asymptotic;
        assert_eq!(interval_code_length(0.1, 2, asy), 2);
        assert_eq!(interval_code_length(1.6, 3, asy), 3);
        assert_eq!(interval_code_length(-0.7, 1, asy), 2);
    }

    /// Length the real coder spends on residual `eps` at grid `1/2^20`.
    fn coded_length(eps: f64, m: u64) -> u64 {
        use crate::bitcoder::{code_length, GolombParam};
        use crate::qmap::{map_residual, residual, round_prediction};
        let fine = FinitePrecision::new(1, 1 << 20).unwrap();
        let q = round_prediction(10.0 - eps, fine).unwrap();
        let mapped = map_residual(residual(10, q).unwrap());
        code_length(mapped.value(), GolombParam::new(m).unwrap())
    }

    #[test]
    fn interval_length_examples_match_the_coder() {
        for (eps, m) in [(0.1, 2), (1.6, 3), (-0.7, 1)] {
            assert_eq!(
                interval_code_length(eps, m, Precision::Asymptotic),
                coded_length(eps, m),
                "eps={eps} m={m}"
            );
        }
    }

    #[test]
    fn interval_length_symmetric_in_the_limit() {
        for m in 1..=20 {
            for k in 0..400 {
                let e = k as f64 * 0.0371 + 0.001;
                assert_eq!(
                    interval_code_length(e, m, Precision::Asymptotic),
                    interval_code_length(-e, m, Precision::Asymptotic)
                );
            }
        }
    }

    #[test]
    fn interval_length_shifts_left_at_finite_precision() {
        let p = fin(1, 4);
        for m in 1..=10 {
            for k in -300..300 {
                let e = k as f64 * 0.0173 + 0.0005;
                assert_eq!(
                    interval_code_length(e, m, p),
                    interval_code_length(e + 0.125, m, Precision::Asymptotic)
                );
            }
        }
    }

    #[test]
    fn phi_roots() {
        let p1 = phi_root(1);
        assert!((p1 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!((p1 * p1 + p1 - 1.0).abs() < 1e-12);
        assert!((p1 * p1 - 0.3820).abs() < 5e-5);
        assert!((phi_root(2).powi(2) - 0.5698).abs() < 5e-5);
        for m in 1..=64 {
            assert!(phi_poly(m, phi_root(m)).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn lookup_examples() {
        let t = default_table();
        assert_eq!(t.lookup(0.3), 1);
        assert_eq!(t.lookup(0.5), 2);
        let t32 = OptimalMTable::build(32).unwrap();
        assert_eq!(t32.lookup(0.985), 32);
        // boundary value resolves to the smaller m
        let b1 = t.boundaries()[0];
        assert_eq!(t.lookup(b1), 1);
        assert_eq!(t.lookup(f64::from_bits(b1.to_bits() + 1)), 2);
        assert!(OptimalMTable::build(0).is_err());
    }

    #[test]
    fn m32_band_is_between_consecutive_squared_roots() {
        let t = default_table();
        let (lo, hi) = (t.boundaries()[30], t.boundaries()[31]);
        assert!((lo - 0.95694).abs() < 1e-4 && (hi - 0.95824).abs() < 1e-4);
        // the unsquared roots sit at 0.9782 / 0.9789
        assert!((lo.sqrt() - 0.9782).abs() < 1e-4);
        assert!((hi.sqrt() - 0.9789).abs() < 1e-4);
        assert_eq!(t.lookup(0.5 * (lo + hi)), 32);
    }

    #[test]
    fn redundancy_vanishes_in_the_limit() {
        let t = default_table();
        for k in 1..98 {
            let th = k as f64 / 100.0;
            assert_eq!(redundancy(th, Precision::Asymptotic, t).unwrap(), 0.0);
            let tiny = Precision::Finite(FinitePrecision::new(1, 1 << 40).unwrap());
            assert!(redundancy(th, tiny, t).unwrap() < 1e-20);
        }
    }

    #[test]
    fn redundancy_equals_length_difference() {
        let t = default_table();
        for k in 1..98 {
            let th = k as f64 / 100.0;
            let m = t.lookup(th);
            let p = fin(1, 2);
            let diff = avg_code_length(m, th, p).unwrap() - asymptotic_code_length(m, th).unwrap();
            assert!((redundancy(th, p, t).unwrap() - diff).abs() < 1e-12);
        }
    }

    #[test]
    fn golomb_mstar_examples() {
        assert_eq!(golomb_mstar(0.5).unwrap(), 1);
        assert_eq!(golomb_mstar(1e-300).unwrap(), 1);
        assert_eq!(golomb_mstar(0.9).unwrap(), 7);
    }

    #[test]
    fn golomb_mstar_minimizes_geometric_expected_length() {
        use crate::bitcoder::{code_length, GolombParam};
        for th in [0.3, 0.5, 0.7, 0.8, 0.9, 0.95] {
            let expected = |m: u64| {
                let g = GolombParam::new(m).unwrap();
                (0..20_000u64)
                    .map(|i| (1.0 - th) * f64::powi(th, i as i32) * code_length(i, g) as f64)
                    .sum::<f64>()
            };
            let best = (1..=64)
                .min_by(|&a, &b| expected(a).total_cmp(&expected(b)))
                .unwrap();
            assert_eq!(golomb_mstar(th).unwrap(), best, "theta={th}");
        }
    }
}
