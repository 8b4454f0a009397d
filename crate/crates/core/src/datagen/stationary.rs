//! Exact sampling from the stationary density of the cusp SDE,
//! `f(y) ∝ exp(V(y; alpha, beta))`.
//!
//! The support is truncated where `f` drops below `1e-16` of its maximum.
//! The truncated interval is cut into equal cells and each cell gets the
//! exact maximum of `V` over it (endpoints plus any equilibrium inside the
//! cell), which yields a piecewise-constant envelope that is never below the
//! density. Proposals pick a cell by envelope mass and a point uniformly
//! within it; acceptance is `f(y) / envelope`.

use rand::Rng;

use crate::cusp::{potential, solve_equilibrium, ControlParams};

pub const ENVELOPE_CELLS: usize = 512;

/// `ln(1e-16)`: log-density cutoff relative to the mode.
const LOG_TRUNCATION: f64 = -36.841_361_487_904_734;

#[derive(Debug, Clone)]
pub struct StationarySampler {
    params: ControlParams,
    lo: f64,
    width: f64,
    // log of the envelope height in each cell
    cell_log_max: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StationarySampler {
    pub fn new(params: ControlParams) -> Self {
        let roots = solve_equilibrium(params);
        let rs = roots.roots();
        let v_max = rs
            .iter()
            .map(|&y| potential(y, params))
            .fold(f64::NEG_INFINITY, f64::max);
        let threshold = v_max + LOG_TRUNCATION;

        let lo = tail_crossing(params, rs[0], -1.0, threshold);
        let hi = tail_crossing(params, rs[rs.len() - 1], 1.0, threshold);
        let width = (hi - lo) / ENVELOPE_CELLS as f64;

        let mut cell_log_max = Vec::with_capacity(ENVELOPE_CELLS);
        let mut cumulative = Vec::with_capacity(ENVELOPE_CELLS);
        let mut total = 0.0;
        let mut left_v = potential(lo, params);
        for c in 0..ENVELOPE_CELLS {
            let a = lo + c as f64 * width;
            let b = if c + 1 == ENVELOPE_CELLS {
                hi
            } else {
                lo + (c + 1) as f64 * width
            };
            let right_v = potential(b, params);
            let mut m = left_v.max(right_v);
            for &y in rs {
                if y > a && y < b {
                    m = m.max(potential(y, params));
                }
            }
            cell_log_max.push(m);
            total += (m - v_max).exp();
            cumulative.push(total);
            left_v = right_v;
        }

        Self {
            params,
            lo,
            width,
            cell_log_max,
            cumulative,
        }
    }

    pub fn params(&self) -> ControlParams {
        self.params
    }

    /// Truncated support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.width * ENVELOPE_CELLS as f64)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().expect("nonempty envelope");
        loop {
            let u = rng.random::<f64>() * total;
            let cell = self
                .cumulative
                .partition_point(|&c| c <= u)
                .min(ENVELOPE_CELLS - 1);
            let y = self.lo + (cell as f64 + rng.random::<f64>()) * self.width;
            let log_ratio = potential(y, self.params) - self.cell_log_max[cell];
            if rng.random::<f64>().ln() < log_ratio {
                return y;
            }
        }
    }
}

/// Walk outward from `start` (an extreme equilibrium, beyond which `V` is
/// monotone) until `V` falls below `threshold`, then bisect the crossing.
fn tail_crossing(p: ControlParams, start: f64, direction: f64, threshold: f64) -> f64 {
    let mut inner = start;
    let mut step = 1.0;
    let mut outer = start + direction * step;
    while potential(outer, p) >= threshold {
        inner = outer;
        step *= 2.0;
        outer = start + direction * step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if potential(mid, p) >= threshold {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    outer
}

/// One draw from the stationary density at `p`.
pub fn sde_stationary_sample<R: Rng + ?Sized>(p: ControlParams, rng: &mut R) -> f64 {
    StationarySampler::new(p).sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cp(a: f64, b: f64) -> ControlParams {
        ControlParams::new(a, b).unwrap()
    }

    #[test]
    fn envelope_dominates_density() {
        for &(a, b) in &[(0.0, 0.0), (0.0, 3.0), (2.0, 1.0), (10.0, 0.0), (-0.3, 6.0)] {
            let s = StationarySampler::new(cp(a, b));
            let (lo, _) = s.support();
            for c in 0..ENVELOPE_CELLS {
                for j in 0..=20 {
                    let y = lo + (c as f64 + j as f64 / 20.0) * s.width;
                    assert!(potential(y, s.params) <= s.cell_log_max[c] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn support_reaches_truncation_level() {
        let p = cp(1.0, 2.0);
        let s = StationarySampler::new(p);
        let (lo, hi) = s.support();
        let vmax = potential((1.0 + 5f64.sqrt()) / 2.0, p);
        for edge in [lo, hi] {
            let rel = potential(edge, p) - vmax;
            assert!((rel - LOG_TRUNCATION).abs() < 1e-6, "{rel}");
        }
    }

    #[test]
    fn symmetric_density_has_zero_mean() {
        let s = StationarySampler::new(cp(0.0, 0.0));
        let mut r = rng::stream(11);
        let n = 100_000;
        let mean = (0..n).map(|_| s.sample(&mut r)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn strong_tilt_concentrates_on_root() {
        // Mass of the normalized density within +-0.5 of the root, from
        // adaptive quadrature over [-8, 8].
        const WINDOW_MASS: f64 = 0.929_873;
        let p = cp(10.0, 0.0);
        let root = crate::cusp::maxwell_root(p);
        let s = StationarySampler::new(p);
        let mut r = rng::stream(5);
        let n = 20_000;
        let inside = (0..n)
            .filter(|_| (s.sample(&mut r) - root).abs() <= 0.5)
            .count();
        let frac = inside as f64 / n as f64;
        // 3 binomial standard deviations at n = 20000 is about 0.0054
        assert!((frac - WINDOW_MASS).abs() < 0.006, "{frac}");
    }
}
