//! Windowed least-squares linear prediction.
//!
//! Coefficients minimize the squared one-step error over the last `window`
//! samples. Coefficient `a[j]` multiplies `x[t-1-j]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpcConfig {
    order: usize,
    window: usize,
    refit_interval: usize,
}

impl LpcConfig {
    pub fn new(order: usize, window: usize, refit_interval: usize) -> Result<Self> {
        if order == 0 || refit_interval == 0 {
            return Err(Error::invalid("lpc order and refit interval must be >= 1"));
        }
        if window < order {
            return Err(Error::invalid(format!(
                "lpc window {window} smaller than order {order}"
            )));
        }
        Ok(LpcConfig {
            order,
            window,
            refit_interval,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn refit_interval(&self) -> usize {
        self.refit_interval
    }

    /// Samples needed before the first fit.
    pub fn min_history(&self) -> usize {
        self.window + self.order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(Vec<f64>);

impl Coefficients {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite and non-empty"));
        }
        Ok(Coefficients(values))
    }

    /// `[1, 0, ..., 0]`: repeat the previous sample.
    pub fn hold(order: usize) -> Self {
        let mut v = vec![0.0; order.max(1)];
        v[0] = 1.0;
        Coefficients(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Solves `a x = b` in place; `None` when a pivot vanishes.
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let tol = scale * 1e-12;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= tol {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Fits coefficients for predicting `x[t]` from `history[..t]`.
///
/// A rank-deficient window keeps `previous` (or falls back to
/// [`Coefficients::hold`]) so the stream stays decodable.
#[allow(clippy::needless_range_loop)]
pub fn fit(
    history: &[i32],
    cfg: &LpcConfig,
    t: usize,
    previous: Option<&Coefficients>,
) -> Result<Coefficients> {
    if t < cfg.min_history() || t > history.len() {
        return Err(Error::invalid(format!(
            "fit at t={t} needs {} samples of history, have {}",
            cfg.min_history(),
            history.len().min(t)
        )));
    }
    let p = cfg.order;
    let x = |i: usize| f64::from(history[i]);
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for i in 1..=cfg.window {
        let target = x(t - i);
        for j in 0..p {
            let xj = x(t - i - 1 - j);
            rhs[j] += target * xj;
            for k in j..p {
                gram[j][k] += xj * x(t - i - 1 - k);
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[j][k] = gram[k][j];
        }
    }
    match solve(gram, rhs) {
        Some(a) => Ok(Coefficients(a)),
        None => Ok(previous.cloned().unwrap_or_else(|| Coefficients::hold(p))),
    }
}

/// `sum_j a[j] * x[t-1-j]` over the tail of `history`.
pub fn predict(history: &[i32], coeffs: &Coefficients) -> f64 {
    let n = history.len();
    debug_assert!(n >= coeffs.0.len());
    coeffs
        .0
        .iter()
        .enumerate()
        .map(|(j, a)| a * f64::from(history[n - 1 - j]))
        .sum()
}

/// Squared one-step error of `coeffs` over the fit window ending before `t`.
pub fn window_sse(history: &[i32], cfg: &LpcConfig, t: usize, coeffs: &Coefficients) -> f64 {
    (1..=cfg.window)
        .map(|i| {
            let e = f64::from(history[t - i]) - predict(&history[..t - i], coeffs);
            e * e
        })
        .sum()
}

/// Stateful predictor that refits every `refit_interval` samples.
///
/// Before enough history exists it predicts the previous sample (0 at the
/// very start).
#[derive(Debug, Clone)]
pub struct LpcPredictor {
    cfg: LpcConfig,
    coeffs: Option<Coefficients>,
}

impl LpcPredictor {
    pub fn new(cfg: LpcConfig) -> Self {
        LpcPredictor { cfg, coeffs: None }
    }

    pub fn config(&self) -> &LpcConfig {
        &self.cfg
    }

    pub fn coefficients(&self) -> Option<&Coefficients> {
        self.coeffs.as_ref()
    }

    /// Prediction for `x[history.len()]`.
    pub fn predict_next(&mut self, history: &[i32]) -> f64 {
        let t = history.len();
        let start = self.cfg.min_history();
        if t >= start && (t - start).is_multiple_of(self.cfg.refit_interval) {
            let fitted = fit(history, &self.cfg, t, self.coeffs.as_ref())
                .expect("history length checked above");
            self.coeffs = Some(fitted);
        }
        match (&self.coeffs, history.last()) {
            (Some(c), _) => predict(history, c),
            (None, Some(&last)) => f64::from(last),
            (None, None) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn config_validation() {
        assert!(LpcConfig::new(0, 4, 1).is_err());
        assert!(LpcConfig::new(3, 2, 1).is_err());
        assert!(LpcConfig::new(2, 2, 0).is_err());
        assert_eq!(LpcConfig::new(2, 8, 4).unwrap().min_history(), 10);
    }

    #[test]
    fn constant_history_fits_unit_coefficient() {
        let h = vec![5; 10];
        let cfg = LpcConfig::new(1, 4, 1).unwrap();
        let a = fit(&h, &cfg, 10, None).unwrap();
        assert!((a.as_slice()[0] - 1.0).abs() < 1e-12);
        assert!((predict(&h, &a) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_fits_linear_extrapolation() {
        let h: Vec<i32> = (0..200).collect();
        let cfg = LpcConfig::new(2, 100, 1).unwrap();
        let a = fit(&h, &cfg, 200, None).unwrap();
        assert!((a.as_slice()[0] - 2.0).abs() < 1e-6, "{a:?}");
        assert!((a.as_slice()[1] + 1.0).abs() < 1e-6, "{a:?}");
        assert!(window_sse(&h, &cfg, 200, &a) < 1e-6);
    }

    #[test]
    fn singular_window_falls_back() {
        let h = vec![0; 10];
        let cfg = LpcConfig::new(1, 4, 1).unwrap();
        assert_eq!(fit(&h, &cfg, 10, None).unwrap(), Coefficients::hold(1));
        let prev = Coefficients::new(vec![0.25]).unwrap();
        assert_eq!(fit(&h, &cfg, 10, Some(&prev)).unwrap(), prev);
    }

    #[test]
    fn insufficient_history_is_an_error() {
        let h = vec![1; 5];
        let cfg = LpcConfig::new(2, 4, 1).unwrap();
        assert!(fit(&h, &cfg, 5, None).is_err());
    }

    #[test]
    fn predict_examples() {
        let one = Coefficients::new(vec![1.0]).unwrap();
        assert_eq!(predict(&[1, 2, 5], &one), 5.0);
        let ramp = Coefficients::new(vec![2.0, -1.0]).unwrap();
        assert_eq!(predict(&[1, 3, 4], &ramp), 5.0);
        let half = Coefficients::new(vec![0.5]).unwrap();
        assert_eq!(predict(&[7], &half), 3.5);
    }

    #[test]
    fn predictor_warmup_and_refit_cadence() {
        let cfg = LpcConfig::new(1, 3, 2).unwrap();
        let mut p = LpcPredictor::new(cfg);
        assert_eq!(p.predict_next(&[]), 0.0);
        assert_eq!(p.predict_next(&[4]), 4.0);
        assert!(p.coefficients().is_none());
        let h = [2, 4, 8, 16, 32, 64];
        p.predict_next(&h[..4]);
        let first = p.coefficients().cloned().unwrap();
        assert!((first.as_slice()[0] - 2.0).abs() < 1e-12);
        p.predict_next(&h[..5]);
        assert_eq!(p.coefficients(), Some(&first));
    }

    fn recurrence(coeffs: &[i32], seed: &[i32], n: usize) -> Vec<i32> {
        let mut v = seed.to_vec();
        while v.len() < n {
            let t = v.len();
            let next: i64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, &a)| i64::from(a) * i64::from(v[t - 1 - j]))
                .sum();
            v.push(next.clamp(-1_000_000, 1_000_000) as i32);
        }
        v
    }

    proptest! {
        #[test]
        fn fitted_coefficients_are_a_local_minimum(
            data in proptest::collection::vec(-200i32..200, 40),
            order in 1usize..4,
        ) {
            let cfg = LpcConfig::new(order, 24, 1).unwrap();
            let t = data.len();
            let a = fit(&data, &cfg, t, None).unwrap();
            let base = window_sse(&data, &cfg, t, &a);
            for j in 0..order {
                for d in [-1e-3, 1e-3] {
                    let mut v = a.as_slice().to_vec();
                    v[j] += d;
                    let perturbed = window_sse(&data, &cfg, t, &Coefficients::new(v).unwrap());
                    prop_assert!(perturbed >= base - 1e-9 * base.max(1.0));
                }
            }
        }

        #[test]
        fn noiseless_recurrence_is_fit_exactly(
            seed in proptest::collection::vec(-20i32..20, 2),
        ) {
            // x[t] = x[t-1] - x[t-2] (period 6, bounded)
            let h = recurrence(&[1, -1], &seed, 40);
            prop_assume!(h.iter().any(|&v| v != 0));
            let cfg = LpcConfig::new(2, 16, 1).unwrap();
            let a = fit(&h, &cfg, 40, None).unwrap();
            prop_assert!(window_sse(&h, &cfg, 40, &a) < 1e-9);
        }

        #[test]
        fn fitting_is_deterministic(data in proptest::collection::vec(-1000i32..1000, 30)) {
            let cfg = LpcConfig::new(3, 20, 1).unwrap();
            let a = fit(&data, &cfg, 30, None).unwrap();
            let b = fit(&data, &cfg, 30, None).unwrap();
            prop_assert_eq!(
                a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
