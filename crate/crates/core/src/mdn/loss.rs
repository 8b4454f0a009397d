use super::MixturePrediction;

/// `0.5 * ln(2*pi)`
pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(sum exp(x_i))` shifted by the maximum. Empty or all `-inf` input
/// gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Negative log-likelihood of one observation under a predicted mixture.
pub fn mixture_nll(pred: &MixturePrediction, y: f64) -> f64 {
    -pred.log_density(y)
}

/// Mean negative log-likelihood over a batch.
///
/// # Panics
/// If `preds` and `y` differ in length.
pub fn nll_loss(preds: &[MixturePrediction], y: &[f64]) -> f64 {
    assert_eq!(preds.len(), y.len(), "prediction and response lengths differ");
    if y.is_empty() {
        return 0.0;
    }
    preds.iter().zip(y).map(|(p, &y)| mixture_nll(p, y)).sum::<f64>() / y.len() as f64
}

/// NLL of one point from raw head outputs `[means, raw scales, logits]`,
/// writing `d nll / d raw` into `grad` (same layout).
pub(crate) fn head_nll_and_grad(
    heads: &[Vec<f64>; 3],
    y: f64,
    sd_floor: f64,
    grad: &mut [Vec<f64>; 3],
) -> f64 {
    let k = heads[0].len();
    let logits = &heads[2];
    let lmax = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = lmax + logits.iter().map(|z| (z - lmax).exp()).sum::<f64>().ln();

    let lc: Vec<f64> = (0..k)
        .map(|i| {
            let sd = heads[1][i].exp() + sd_floor;
            let z = (y - heads[0][i]) / sd;
            (logits[i] - lse) - sd.ln() - HALF_LN_2PI - 0.5 * z * z
        })
        .collect();
    let ll = log_sum_exp(&lc);

    for g in grad.iter_mut() {
        g.clear();
        g.resize(k, 0.0);
    }
    for i in 0..k {
        let resp = (lc[i] - ll).exp();
        let pi = (logits[i] - lse).exp();
        let e = heads[1][i].exp();
        let sd = e + sd_floor;
        let r = y - heads[0][i];
        grad[0][i] = -resp * r / (sd * sd);
        grad[1][i] = -resp * (r * r / (sd * sd) - 1.0) * e / sd;
        grad[2][i] = pi - resp;
    }
    -ll
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mix(means: &[f64], sds: &[f64], weights: &[f64]) -> MixturePrediction {
        MixturePrediction {
            means: means.to_vec(),
            sds: sds.to_vec(),
            weights: weights.to_vec(),
        }
    }

    #[test]
    fn gaussian_at_its_mean() {
        let p = mix(&[1.5], &[1.0], &[1.0]);
        assert!((nll_loss(&[p], &[1.5]) - 0.918_938_533_204_672_8).abs() < 1e-15);
    }

    #[test]
    fn duplicated_components_collapse() {
        let one = mix(&[0.3], &[0.7], &[1.0]);
        let two = mix(&[0.3, 0.3], &[0.7, 0.7], &[0.5, 0.5]);
        for y in [-2.0, 0.0, 0.3, 4.0] {
            assert!((mixture_nll(&one, y) - mixture_nll(&two, y)).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_direct_density_sum() {
        // direct sum of weighted normal densities, no log-sum-exp
        let preds = vec![
            mix(&[0.1, -1.2, 2.0], &[0.5, 1.3, 0.9], &[0.2, 0.5, 0.3]),
            mix(&[3.0, 2.5, -0.4], &[0.2, 0.6, 1.1], &[0.6, 0.1, 0.3]),
            mix(&[-0.7, 0.0, 0.7], &[1.0, 1.0, 1.0], &[0.3, 0.3, 0.4]),
        ];
        let ys = [0.4, 2.8, -1.9];
        let mut direct = 0.0;
        for (p, &y) in preds.iter().zip(&ys) {
            let mut dens = 0.0;
            for i in 0..3 {
                let z = (y - p.means[i]) / p.sds[i];
                dens += p.weights[i] * (-0.5 * z * z).exp()
                    / (p.sds[i] * (2.0 * std::f64::consts::PI).sqrt());
            }
            direct -= dens.ln();
        }
        direct /= 3.0;
        assert!((nll_loss(&preds, &ys) - direct).abs() < 1e-10);
    }

    #[test]
    fn far_outlier_stays_finite() {
        let p = mix(&[0.0, 1.0], &[1e-3, 1e-3], &[0.5, 0.5]);
        let v = mixture_nll(&p, 100.0);
        assert!(v.is_finite() && v > 1e6);
    }

    #[test]
    fn log_sum_exp_edges() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]), 0.0);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn head_gradient_matches_differences() {
        let heads = [vec![0.2, -0.4], vec![-0.3, 0.5], vec![0.1, -0.6]];
        let y = 0.35;
        let floor = 1e-3;
        let mut grad = [vec![], vec![], vec![]];
        let base = head_nll_and_grad(&heads, y, floor, &mut grad);
        let mut scratch = [vec![], vec![], vec![]];
        let h = 1e-6;
        for which in 0..3 {
            for i in 0..2 {
                let mut up = heads.clone();
                up[which][i] += h;
                let mut dn = heads.clone();
                dn[which][i] -= h;
                let fd = (head_nll_and_grad(&up, y, floor, &mut scratch)
                    - head_nll_and_grad(&dn, y, floor, &mut scratch))
                    / (2.0 * h);
                assert!((fd - grad[which][i]).abs() < 1e-8, "{which},{i}: {fd} vs {}", grad[which][i]);
            }
        }
        assert!(base.is_finite());
    }
}
