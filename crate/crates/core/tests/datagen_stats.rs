use cusp_mdn::cusp::{self, ControlParams};
use cusp_mdn::datagen::{self, sde_stationary_sample, Branch, GenConfig, ModelKind, RegressionCoeffs};
use cusp_mdn::rng;

fn row1() -> RegressionCoeffs {
    RegressionCoeffs::new(vec![0.8374, 0.5228, 3.1822], vec![3.5324, 0.1579, 4.6811]).unwrap()
}

/// Composite Simpson's rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn noise_is_calibrated() {
    for sigma in [0.5, 1.0, 2.0] {
        let d = datagen::generate(&GenConfig::new(ModelKind::RegCusp, 500, row1(), sigma, 17)).unwrap();
        let truth = &d.latent().unwrap().noiseless_root;
        let e: Vec<f64> = d.response().iter().zip(truth).map(|(y, t)| y - t).collect();
        let m = e.iter().sum::<f64>() / e.len() as f64;
        let v = e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (e.len() - 1) as f64;
        assert!(
            (0.85 * sigma * sigma..=1.15 * sigma * sigma).contains(&v),
            "sigma {sigma}: variance {v}"
        );
    }
}

#[test]
fn zero_noise_reproduces_the_surface() {
    for model in [ModelKind::RegCusp, ModelKind::BimodalRegCusp] {
        let d = datagen::generate(&GenConfig::new(model, 300, row1(), 0.0, 4)).unwrap();
        let lat = d.latent().unwrap();
        assert_eq!(d.response(), &lat.noiseless_root[..]);
        for (i, &y) in d.response().iter().enumerate() {
            let set = cusp::solve_equilibrium(lat.controls[i]);
            match model {
                ModelKind::RegCusp => assert_eq!(y, cusp::maxwell_of(&set, lat.controls[i])),
                _ => assert!(set.stable_roots().any(|r| r == y)),
            }
        }
    }
}

#[test]
fn bimodal_branches_are_balanced() {
    let d = datagen::generate(&GenConfig::new(ModelKind::BimodalRegCusp, 4000, row1(), 1.0, 9)).unwrap();
    let lat = d.latent().unwrap();
    let mask = d.cusp_mask().unwrap();
    let cusp_rows: Vec<usize> = (0..d.len()).filter(|&i| mask[i]).collect();
    assert!(cusp_rows.len() >= 2000, "{}", cusp_rows.len());
    let upper = cusp_rows.iter().filter(|&&i| lat.branch[i] == Branch::Upper).count();
    let n = cusp_rows.len() as f64;
    let share = upper as f64 / n;
    assert!((0.47..=0.53).contains(&share), "{share}");
    // two-sided binomial test at level 0.01 (normal approximation)
    let z = (upper as f64 - 0.5 * n) / (0.25 * n).sqrt();
    assert!(z.abs() < 2.5758, "z = {z}");
    for (i, &b) in lat.branch.iter().enumerate() {
        assert_eq!(b == Branch::Single, !mask[i]);
    }
}

#[test]
fn stationary_draws_split_across_both_wells() {
    // alpha = 0, beta = 4: symmetric double well
    let c = RegressionCoeffs::new(vec![0.0, 0.0], vec![4.0, 0.0]).unwrap();
    let d = datagen::generate(&GenConfig::new(ModelKind::SdeCusp, 20_000, c, 1.0, 3)).unwrap();
    let neg = d.response().iter().filter(|&&y| y < 0.0).count() as f64 / d.len() as f64;
    assert!(neg >= 0.3 && 1.0 - neg >= 0.3, "{neg}");
    assert!((neg - 0.5).abs() < 4.0 * (0.25 / d.len() as f64).sqrt());
}

#[test]
fn stationary_half_line_mass_matches_quadrature() {
    for &(a, b) in &[(0.5, 3.0), (-1.0, 2.0), (0.2, 0.0)] {
        let p = ControlParams::new(a, b).unwrap();
        let dens = |y: f64| cusp::potential(y, p).exp();
        let total = simpson(dens, -8.0, 8.0, 40_000);
        let below = simpson(dens, -8.0, 0.0, 20_000) / total;
        let mut r = rng::stream(77);
        let n = 40_000;
        let hits = (0..n).filter(|_| sde_stationary_sample(p, &mut r) < 0.0).count();
        let share = hits as f64 / n as f64;
        let se = (below * (1.0 - below) / n as f64).sqrt();
        assert!((share - below).abs() < 4.0 * se, "({a},{b}): {share} vs {below}");
    }
}

#[test]
fn oliva_identity_and_ranges() {
    let o = datagen::gen_oliva_full(2000, 8).unwrap();
    for (i, row) in o.data.rows().enumerate() {
        let z = o.data.response()[i];
        let rebuilt = -0.52 * o.u1[i] - 1.60 * o.u2[i];
        assert!((rebuilt - z).abs() <= 1e-12 * z.abs().max(1.0), "row {i}");
        assert!(row[..3].iter().all(|v| (-2.0..2.0).contains(v)));
        assert!(row[3..].iter().all(|v| (-3.0..3.0).contains(v)));
        assert!((-3.0..3.0).contains(&o.u1[i]));
        let c = o.data.latent().unwrap().controls[i];
        let alpha = row[0] - 0.969 * row[1] - 0.201 * row[2];
        let beta = 0.44 * row[3] + 0.08 * row[4] + 0.67 * row[5] + 0.19 * row[6];
        assert!((c.alpha() - alpha).abs() < 1e-12 && (c.beta() - beta).abs() < 1e-12);
    }
}

#[test]
fn generators_are_deterministic_per_seed() {
    for model in [ModelKind::RegCusp, ModelKind::BimodalRegCusp, ModelKind::SdeCusp] {
        let cfg = GenConfig::new(model, 200, row1(), 1.0, 42);
        assert_eq!(datagen::generate(&cfg).unwrap(), datagen::generate(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(datagen::generate(&cfg).unwrap(), datagen::generate(&other).unwrap());
    }
    assert_eq!(datagen::gen_oliva(100, 1).unwrap(), datagen::gen_oliva(100, 1).unwrap());
}
