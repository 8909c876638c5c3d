use super::grid::ScalarGrid;
use crate::error::Result;

/// Edge-weighted squared error `Σ (w ⊙ (pred - target))²` and its gradient
/// `2 w² (pred - target)` with respect to `pred`.
pub fn wmse_loss(
    pred: &ScalarGrid,
    target: &ScalarGrid,
    weights: &ScalarGrid,
) -> Result<(f64, ScalarGrid)> {
    pred.same_shape(target)?;
    pred.same_shape(weights)?;
    let mut loss = 0.0;
    let grad = pred
        .values()
        .iter()
        .zip(target.values())
        .zip(weights.values())
        .map(|((p, t), w)| {
            let d = p - t;
            loss += (w * d) * (w * d);
            2.0 * w * w * d
        })
        .collect();
    Ok((loss, ScalarGrid::from_raw(pred.dim(), pred.res(), grad)))
}

/// Unweighted squared error, the `w ≡ 1` case of [`wmse_loss`].
pub fn mse_loss(pred: &ScalarGrid, target: &ScalarGrid) -> Result<(f64, ScalarGrid)> {
    pred.same_shape(target)?;
    let mut loss = 0.0;
    let grad = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d
        })
        .collect();
    Ok((loss, ScalarGrid::from_raw(pred.dim(), pred.res(), grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};

    #[test]
    fn equal_grids() {
        let a = ScalarGrid::from_fn(2, 4, |p| p[0]).unwrap();
        let w = ScalarGrid::from_fn(2, 4, |_| 1.0).unwrap();
        let (l, g) = wmse_loss(&a, &a, &w).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn closed_form() {
        let a = ScalarGrid::from_fn(2, 4, |_| 0.1).unwrap();
        let b = ScalarGrid::zeros(2, 4).unwrap();
        let w = ScalarGrid::from_fn(2, 4, |_| 1.0).unwrap();
        let (l, _) = wmse_loss(&a, &b, &w).unwrap();
        assert!((l - 0.16).abs() < 1e-15);
        let (l2, _) = mse_loss(&a, &b).unwrap();
        assert_eq!(l, l2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut rand_grid = || {
            ScalarGrid::from_values(2, 8, (0..64).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap()
        };
        let (pred, target, w) = (rand_grid(), rand_grid(), rand_grid());
        let (_, grad) = wmse_loss(&pred, &target, &w).unwrap();
        // the loss is quadratic, so a wide step is exact up to rounding
        let h = 1e-2;
        for i in 0..64 {
            let bump = |delta: f64| {
                let mut v = pred.values().to_vec();
                v[i] += delta;
                let g = ScalarGrid::from_values(2, 8, v).unwrap();
                wmse_loss(&g, &target, &w).unwrap().0
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let an = grad.values()[i];
            let rel = (fd - an).abs() / an.abs().max(1e-12);
            assert!(rel < 1e-8 || (fd - an).abs() < 1e-12, "cell {i}: {fd} vs {an}");
        }
    }

    #[test]
    fn mismatch() {
        let a = ScalarGrid::zeros(2, 8).unwrap();
        let b = ScalarGrid::zeros(2, 16).unwrap();
        assert!(matches!(wmse_loss(&a, &b, &a), Err(Error::ResolutionMismatch(8, 16))));
    }
}
