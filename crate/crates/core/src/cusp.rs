//! Equilibrium geometry of the cusp catastrophe.
//!
//! The potential is `V(y) = alpha*y + beta/2*y^2 - y^4/4` and equilibria are the
//! real roots of its gradient, `alpha + beta*y - y^3 = 0`. The sign of the
//! scaled Cardan discriminant `27*alpha^2 - 4*beta^3` decides between one real
//! root (positive) and three (negative).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Latent control pair: asymmetry `alpha` and bifurcation `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    alpha: f64,
    beta: f64,
}

impl ControlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "control parameters must be finite (alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True inside the bimodal region (`discriminant < 0`).
    pub fn in_cusp_region(&self) -> bool {
        cardan_discriminant(*self) < 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Real equilibria in ascending order with their stability labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    roots: Vec<f64>,
    stability: Vec<Stability>,
    discriminant: f64,
}

impl RootSet {
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn stability(&self) -> &[Stability] {
        &self.stability
    }

    pub fn discriminant(&self) -> f64 {
        self.discriminant
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Stability)> + '_ {
        self.roots.iter().copied().zip(self.stability.iter().copied())
    }

    pub fn stable_roots(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter()
            .filter(|(_, s)| *s == Stability::Stable)
            .map(|(y, _)| y)
    }

    /// `(lower, upper)` stable roots when three equilibria exist.
    pub fn stable_pair(&self) -> Option<(f64, f64)> {
        (self.roots.len() == 3).then(|| (self.roots[0], self.roots[2]))
    }

    fn mirrored(mut self) -> Self {
        self.roots.reverse();
        self.stability.reverse();
        for y in &mut self.roots {
            *y = -*y;
        }
        self
    }
}

/// Scaled Cardan discriminant `27*alpha^2 - 4*beta^3`.
#[inline]
pub fn cardan_discriminant(p: ControlParams) -> f64 {
    27.0 * p.alpha * p.alpha - 4.0 * p.beta * p.beta * p.beta
}

#[inline]
pub fn potential(y: f64, p: ControlParams) -> f64 {
    let y2 = y * y;
    p.alpha * y + 0.5 * p.beta * y2 - 0.25 * y2 * y2
}

/// Gradient of the potential, `alpha + beta*y - y^3`.
#[inline]
pub fn equilibrium_residual(y: f64, p: ControlParams) -> f64 {
    p.alpha + p.beta * y - y * y * y
}

/// Scale used for every relative root tolerance.
#[inline]
pub fn residual_scale(y: f64, p: ControlParams) -> f64 {
    1.0_f64
        .max(p.alpha.abs())
        .max(p.beta.abs())
        .max(y.abs().powi(3))
}

/// All real solutions of `alpha + beta*y - y^3 = 0`.
///
/// Negative alpha is solved by reflection (`y -> -y`), which makes the root
/// set exactly antisymmetric in alpha.
pub fn solve_equilibrium(p: ControlParams) -> RootSet {
    if p.alpha < 0.0 {
        let flipped = ControlParams {
            alpha: -p.alpha,
            beta: p.beta,
        };
        let mut set = solve_nonnegative_alpha(flipped).mirrored();
        set.discriminant = cardan_discriminant(p);
        return set;
    }
    solve_nonnegative_alpha(p)
}

fn solve_nonnegative_alpha(p: ControlParams) -> RootSet {
    let (alpha, beta) = (p.alpha, p.beta);
    let disc = cardan_discriminant(p);

    if alpha == 0.0 {
        // y (y^2 - beta) = 0, solved exactly.
        return if beta > 0.0 {
            let r = beta.sqrt();
            RootSet {
                roots: vec![-r, 0.0, r],
                stability: vec![Stability::Stable, Stability::Unstable, Stability::Stable],
                discriminant: disc,
            }
        } else {
            let stability = if beta == 0.0 {
                // triple root
                Stability::Unstable
            } else {
                Stability::Stable
            };
            RootSet {
                roots: vec![0.0],
                stability: vec![stability],
                discriminant: disc,
            }
        };
    }

    if disc > 0.0 {
        // One real root. With alpha > 0 the larger cube root is taken without
        // cancellation and the other follows from u*v = beta/3.
        let s = (disc / 108.0).sqrt();
        let u = (0.5 * alpha + s).cbrt();
        let v = beta / (3.0 * u);
        let y = polish(u + v, p);
        RootSet {
            roots: vec![y],
            stability: vec![Stability::Stable],
            discriminant: disc,
        }
    } else if disc < 0.0 {
        // Trigonometric (Viete) form; beta > 0 is implied.
        let m = 2.0 * (beta / 3.0).sqrt();
        let arg = (1.5 * alpha / beta * (3.0 / beta).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut roots = [
            m * (theta - 4.0 * PI / 3.0).cos(),
            m * (theta - 2.0 * PI / 3.0).cos(),
            m * theta.cos(),
        ];
        for y in &mut roots {
            *y = polish(*y, p);
        }
        roots.sort_by(f64::total_cmp);
        if roots[0] < roots[1] && roots[1] < roots[2] {
            RootSet {
                roots: roots.to_vec(),
                stability: vec![Stability::Stable, Stability::Unstable, Stability::Stable],
                discriminant: disc,
            }
        } else {
            // Two roots merged in floating point: treat as the degenerate case.
            degenerate(p, disc)
        }
    } else {
        degenerate(p, disc)
    }
}

/// Discriminant exactly zero with alpha > 0: simple root `3a/b` and the
/// repeated root `-3a/(2b)`, which is labeled unstable.
fn degenerate(p: ControlParams, disc: f64) -> RootSet {
    let simple = polish(3.0 * p.alpha / p.beta, p);
    let double = -1.5 * p.alpha / p.beta;
    let (roots, stability) = if double < simple {
        (
            vec![double, simple],
            vec![Stability::Unstable, Stability::Stable],
        )
    } else {
        (
            vec![simple, double],
            vec![Stability::Stable, Stability::Unstable],
        )
    };
    RootSet {
        roots,
        stability,
        discriminant: disc,
    }
}

/// Newton refinement that never makes the residual worse.
fn polish(mut y: f64, p: ControlParams) -> f64 {
    let mut r = equilibrium_residual(y, p);
    for _ in 0..3 {
        if r == 0.0 {
            break;
        }
        let d = p.beta - 3.0 * y * y;
        if d == 0.0 {
            break;
        }
        let next = y - r / d;
        let rn = equilibrium_residual(next, p);
        // stop unless strictly better (NaN counts as worse)
        if rn.abs() >= r.abs() || rn.is_nan() {
            break;
        }
        y = next;
        r = rn;
    }
    y
}

/// Maxwell convention: the root with the highest potential. Exact ties (the
/// `alpha = 0, beta > 0` axis) go to the larger root.
pub fn maxwell_root(p: ControlParams) -> f64 {
    let set = solve_equilibrium(p);
    maxwell_of(&set, p)
}

pub fn maxwell_of(set: &RootSet, p: ControlParams) -> f64 {
    let mut best = set.roots[0];
    let mut best_v = potential(best, p);
    for &y in &set.roots[1..] {
        let v = potential(y, p);
        // roots ascend, so `>=` resolves ties toward the larger root
        if v >= best_v {
            best = y;
            best_v = v;
        }
    }
    best
}

/// Delay convention: the stable root nearest `observed`, ties to the larger.
pub fn delay_root(set: &RootSet, observed: f64) -> f64 {
    let nearest = |candidates: &mut dyn Iterator<Item = f64>| {
        let mut best: Option<f64> = None;
        for y in candidates {
            best = match best {
                Some(b) if (y - observed).abs() > (b - observed).abs() => Some(b),
                _ => Some(y),
            };
        }
        best
    };
    nearest(&mut set.stable_roots())
        .or_else(|| nearest(&mut set.roots.iter().copied()))
        .expect("root set is never empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cp(a: f64, b: f64) -> ControlParams {
        ControlParams::new(a, b).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ControlParams::new(f64::NAN, 0.0).is_err());
        assert!(ControlParams::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn discriminant_values() {
        assert_eq!(cardan_discriminant(cp(0.0, 0.0)), 0.0);
        assert_eq!(cardan_discriminant(cp(1.0, 0.0)), 27.0);
        assert_eq!(cardan_discriminant(cp(0.0, 3.0)), -108.0);
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential(0.0, cp(3.0, -2.0)), 0.0);
        assert_eq!(potential(1.0, cp(0.0, 1.0)), 0.25);
        assert_eq!(potential(1.0, cp(1.0, 0.0)), 0.75);
    }

    #[test]
    fn symmetric_three_roots() {
        let s = solve_equilibrium(cp(0.0, 1.0));
        assert_eq!(s.roots(), &[-1.0, 0.0, 1.0]);
        assert_eq!(
            s.stability(),
            &[Stability::Stable, Stability::Unstable, Stability::Stable]
        );
    }

    #[test]
    fn single_root_at_origin() {
        let s = solve_equilibrium(cp(0.0, -1.0));
        assert_eq!(s.roots(), &[0.0]);
        assert_eq!(s.stability(), &[Stability::Stable]);
    }

    #[test]
    fn factorable_cubic() {
        // y^3 - 2y - 1 = (y + 1)(y^2 - y - 1)
        let s = solve_equilibrium(cp(1.0, 2.0));
        let expected = [-1.0, (1.0 - 5f64.sqrt()) / 2.0, (1.0 + 5f64.sqrt()) / 2.0];
        assert_eq!(s.len(), 3);
        for (y, e) in s.roots().iter().zip(expected) {
            assert!((y - e).abs() < 1e-12, "{y} vs {e}");
            // independent evaluation in expanded form
            let res = y * y * y - 2.0 * y - 1.0;
            assert!(res.abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_double_root() {
        // 27 a^2 = 4 b^3 with b = 3 -> a = 2
        let p = cp(2.0, 3.0);
        assert_eq!(cardan_discriminant(p), 0.0);
        let s = solve_equilibrium(p);
        assert_eq!(s.roots(), &[-1.0, 2.0]);
        assert_eq!(s.stability(), &[Stability::Unstable, Stability::Stable]);

        let s = solve_equilibrium(cp(-2.0, 3.0));
        assert_eq!(s.roots(), &[-2.0, 1.0]);
        assert_eq!(s.stability(), &[Stability::Stable, Stability::Unstable]);
    }

    #[test]
    fn triple_root_is_unstable() {
        let s = solve_equilibrium(cp(0.0, 0.0));
        assert_eq!(s.roots(), &[0.0]);
        assert_eq!(s.stability(), &[Stability::Unstable]);
        assert_eq!(delay_root(&s, 4.0), 0.0);
    }

    #[test]
    fn maxwell_examples() {
        assert_eq!(maxwell_root(cp(0.0, -1.0)), 0.0);
        assert_eq!(maxwell_root(cp(0.0, 1.0)), 1.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let p = cp(1.0, 2.0);
        assert!((maxwell_root(p) - golden).abs() < 1e-12);
        assert!((potential(-1.0, p) + 0.25).abs() < 1e-15);
        assert!(potential(golden, p) > potential(-1.0, p));
    }

    #[test]
    fn delay_examples() {
        let s = solve_equilibrium(cp(0.0, 1.0));
        assert_eq!(delay_root(&s, 0.8), 1.0);
        assert_eq!(delay_root(&s, -0.2), -1.0);
        // exact midpoint between the stable roots
        assert_eq!(delay_root(&s, 0.0), 1.0);
        let single = solve_equilibrium(cp(0.0, -1.0));
        assert_eq!(delay_root(&single, 5.0), 0.0);
    }

    #[test]
    fn large_controls_meet_relative_tolerance() {
        for &(a, b) in &[(1e6, 1e3), (-1e4, 3e3), (1e-12, 5.0), (50.0, 1e-9), (7.0, -1e5)] {
            let p = cp(a, b);
            for y in solve_equilibrium(p).roots() {
                let r = equilibrium_residual(*y, p).abs();
                assert!(r <= 1e-9 * residual_scale(*y, p), "({a},{b}) y={y} r={r}");
            }
        }
    }
}
