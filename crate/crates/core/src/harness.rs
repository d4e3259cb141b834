//! Synthetic experiments: code-length tables and redundancy curves.
//!
//! Each θ gets its own ChaCha8 stream (stream id = θ index) and the same
//! draw is reused at every precision, so cross-precision differences are
//! not swamped by sampling noise.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{self, LaplaceModel, RedundancyBase};
use crate::bitcoder::{BitSink, GolombParam};
use crate::codec::{self, encode_symbol, SEARCH_MAX_M};
use crate::error::{Error, Result};
use crate::qmap::{round_prediction, FinitePrecision, Precision};

/// Stand-in for `rho/tau -> 0` when actually encoding.
pub const ASYMPTOTIC_SURROGATE: FinitePrecision = FinitePrecision::FINEST;

pub const DEFAULT_ALPHABET: u32 = 128;
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub theta_grid: Vec<f64>,
    pub precisions: Vec<Precision>,
    pub n_samples: usize,
    pub alphabet_q: u32,
    pub seed: u64,
}

fn p(rho: u64, tau: u64) -> Precision {
    Precision::finite(rho, tau).expect("valid precision")
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::invalid(format!("theta {t} outside (0, 1)")));
        }
        if self.n_samples == 0 || self.alphabet_q == 0 {
            return Err(Error::invalid("n_samples and alphabet_q must be >= 1"));
        }
        if self.alphabet_q > i32::MAX as u32 {
            return Err(Error::invalid("alphabet too large"));
        }
        Ok(())
    }

    /// θ = 0.1..0.6 at the eight code-length table precisions.
    pub fn table3(seed: u64, n_samples: usize) -> Self {
        ExperimentSpec {
            theta_grid: (1..=6).map(|i| f64::from(i) / 10.0).collect(),
            precisions: vec![
                p(1, 1),
                p(4, 5),
                p(1, 2),
                p(1, 4),
                p(1, 5),
                p(1, 8),
                p(1, 16),
                Precision::Asymptotic,
            ],
            n_samples,
            alphabet_q: DEFAULT_ALPHABET,
            seed,
        }
    }

    /// θ = 0.01..0.97 at the seven curve precisions.
    pub fn fig6(seed: u64, n_samples: usize) -> Self {
        ExperimentSpec {
            theta_grid: theta_sweep(),
            precisions: vec![
                p(1, 1),
                p(4, 5),
                p(1, 2),
                p(1, 4),
                p(1, 5),
                p(1, 8),
                p(1, 16),
            ],
            n_samples,
            alphabet_q: DEFAULT_ALPHABET,
            seed,
        }
    }
}

/// 0.01, 0.02, ..., 0.97
pub fn theta_sweep() -> Vec<f64> {
    (1..=97).map(|i| f64::from(i) / 100.0).collect()
}

/// Uniform symbols on `[0, q)` with predictions whose errors are
/// Laplace(θ).
pub fn gen_synthetic(theta: f64, n: usize, q: u32, seed: u64) -> Result<(Vec<i32>, Vec<f64>)> {
    gen_synthetic_stream(theta, n, q, seed, 0)
}

/// [`gen_synthetic`] on an independent stream of the same seed.
pub fn gen_synthetic_stream(
    theta: f64,
    n: usize,
    q: u32,
    seed: u64,
    stream: u64,
) -> Result<(Vec<i32>, Vec<f64>)> {
    let model = LaplaceModel::new(theta)?;
    if q == 0 || q > i32::MAX as u32 {
        return Err(Error::invalid(format!("alphabet size {q} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut xs = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(0..q) as i32;
        let eps = model.sample(&mut rng);
        xs.push(x);
        preds.push(f64::from(x) - eps);
    }
    Ok((xs, preds))
}

/// How a cell picks its Golomb parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamChoice {
    Fixed(u64),
    /// Shortest total length over `1..=max`.
    Exhaustive(u64),
}

/// Encodes the sequence for real and returns `(payload bits, m used)`.
pub fn encode_cell(
    xs: &[i32],
    preds: &[f64],
    precision: FinitePrecision,
    choice: ParamChoice,
) -> Result<(u64, u64)> {
    let m = match choice {
        ParamChoice::Fixed(m) => m,
        ParamChoice::Exhaustive(max) => {
            codec::exhaustive_best_m(&codec::mapped_residuals(xs, preds, precision)?, max)
        }
    };
    let g = GolombParam::new(m)?;
    let mut sink = BitSink::new();
    for (&x, &xh) in xs.iter().zip(preds) {
        encode_symbol(x, round_prediction(xh, precision)?, g, &mut sink)?;
    }
    Ok((sink.bits_written(), m))
}

fn coding_precision(p: Precision) -> FinitePrecision {
    p.as_finite().unwrap_or(ASYMPTOTIC_SURROGATE)
}

/// Exhaustive search at unit precision, `m_theta` elsewhere.
fn cell_choice(theta: f64, p: Precision) -> ParamChoice {
    if p.as_finite() == Some(FinitePrecision::UNIT) {
        ParamChoice::Exhaustive(SEARCH_MAX_M)
    } else {
        ParamChoice::Fixed(analysis::default_table().lookup(theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub theta: f64,
    pub precision: Precision,
    pub m: u64,
    pub bits_per_symbol: f64,
    /// `L_{m_theta}(theta)` in the limit.
    pub analytic: f64,
}

fn run_cells(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    spec.validate()?;
    let draws: Vec<(Vec<i32>, Vec<f64>)> = spec
        .theta_grid
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            gen_synthetic_stream(theta, spec.n_samples, spec.alphabet_q, spec.seed, i as u64)
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, Precision)> = (0..spec.theta_grid.len())
        .flat_map(|i| spec.precisions.iter().map(move |&p| (i, p)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, precision)| {
            let theta = spec.theta_grid[i];
            let (xs, preds) = &draws[i];
            let (bits, m) = encode_cell(
                xs,
                preds,
                coding_precision(precision),
                cell_choice(theta, precision),
            )?;
            let m_theta = analysis::default_table().lookup(theta);
            Ok(CellResult {
                theta,
                precision,
                m,
                bits_per_symbol: bits as f64 / xs.len() as f64,
                analytic: analysis::asymptotic_code_length(m_theta, theta)?,
            })
        })
        .collect()
}

/// Measured bits/symbol per (θ, precision), in grid order.
pub fn run_table3(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    run_cells(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedundancyPoint {
    pub theta: f64,
    pub precision: Precision,
    pub redundancy_pct: f64,
}

/// Measured excess over `L_{m_theta}(theta)`, in percent.
pub fn run_fig6(spec: &ExperimentSpec) -> Result<Vec<RedundancyPoint>> {
    Ok(run_cells(spec)?
        .into_iter()
        .map(|c| RedundancyPoint {
            theta: c.theta,
            precision: c.precision,
            redundancy_pct: 100.0 * (c.bits_per_symbol - c.analytic) / c.analytic,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2Row {
    pub precision: FinitePrecision,
    pub max_redundancy_pct: f64,
}

pub fn table2_precisions() -> Vec<FinitePrecision> {
    [(4, 5), (1, 2), (1, 4), (1, 8), (1, 16), (1, 32)]
        .into_iter()
        .map(|(r, t)| FinitePrecision::new(r, t).expect("valid precision"))
        .collect()
}

/// Largest analytic redundancy of `m_theta` over the θ sweep.
pub fn run_table2() -> Result<Vec<Table2Row>> {
    let table = analysis::default_table();
    table2_precisions()
        .into_iter()
        .map(|fp| {
            let mut worst = f64::NEG_INFINITY;
            for theta in theta_sweep() {
                let r = analysis::redundancy_pct(
                    theta,
                    Precision::Finite(fp),
                    table,
                    RedundancyBase::Asymptotic,
                )?;
                worst = worst.max(r);
            }
            Ok(Table2Row {
                precision: fp,
                max_redundancy_pct: worst,
            })
        })
        .collect()
}

pub fn table2_csv(rows: &[Table2Row]) -> String {
    let mut s = String::from("precision,max_redundancy_pct\n");
    for r in rows {
        writeln!(s, "{},{:.4}", r.precision, r.max_redundancy_pct).unwrap();
    }
    s
}

/// One line per cell; the limit row carries the measured surrogate
/// encoding, and `analytic` is the closed-form `L_{m_theta}(theta)`.
pub fn table3_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("theta,precision,bits_per_symbol,analytic\n");
    for c in cells {
        writeln!(
            s,
            "{:.2},{},{:.5},{:.5}",
            c.theta, c.precision, c.bits_per_symbol, c.analytic
        )
        .unwrap();
    }
    s
}

pub fn fig6_csv(points: &[RedundancyPoint]) -> String {
    let mut s = String::from("theta,precision,redundancy_pct\n");
    for pt in points {
        writeln!(
            s,
            "{:.2},{},{:.4}",
            pt.theta, pt.precision, pt.redundancy_pct
        )
        .unwrap();
    }
    s
}
