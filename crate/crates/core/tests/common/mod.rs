#![allow(dead_code)]

use frgc::analysis::{interval_code_length, LaplaceModel};
use frgc::Precision;

/// Breakpoints of `interval_code_length` on `[lo, hi]`, found by scanning
/// and bisecting; 0 is always included for the kink in the density.
fn breakpoints(m: u64, p: Precision, lo: f64, hi: f64) -> Vec<f64> {
    let len = |e: f64| interval_code_length(e, m, p);
    let step = 0.05;
    let mut cuts = vec![lo, 0.0, hi];
    let mut a = lo;
    while a < hi {
        let b = (a + step).min(hi);
        if len(a) != len(b) {
            let (mut l, mut r) = (a, b);
            while r - l > 1e-14 * r.abs().max(1.0) {
                let mid = 0.5 * (l + r);
                if len(mid) == len(a) {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            cuts.push(r);
        }
        a = b;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// `integral of l(e) f(e) de` by composite Simpson on each constant piece.
pub fn integrate_code_length(m: u64, theta: f64, p: Precision) -> f64 {
    let model = LaplaceModel::new(theta).unwrap();
    let reach = 70.0 * model.scale() + 10.0;
    let cuts = breakpoints(m, p, -reach, reach);
    let n = 1024;
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let h = (b - a) / n as f64;
            let mut s = model.pdf(a) + model.pdf(b);
            for i in 1..n {
                let wgt = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += wgt * model.pdf(a + i as f64 * h);
            }
            let mass = s * h / 3.0;
            mass * interval_code_length(0.5 * (a + b), m, p) as f64
        })
        .sum()
}
