//! Scalar losses and balance weights used by the training loops.

use crate::error::{CoreError, Result};
use crate::tensor::Matrix;

/// Mean absolute elementwise difference between two equally shaped matrices.
pub fn pixel_loss(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_shape("pixel_loss", a, b)?;
    let n = a.len() as f64;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// [`pixel_loss`] plus its gradient with respect to the first argument:
/// `sign(pred - target) / len`. The subgradient at exact equality is 0
/// (note `f64::signum(0.0)` is 1, so a plain signum would be wrong).
pub fn pixel_loss_grad(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    check_same_shape("pixel_loss", pred, target)?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(pred.dim());
    for ((g, p), t) in grad.iter_mut().zip(pred.iter()).zip(target.iter()) {
        let diff = p - t;
        loss += diff.abs();
        *g = if diff > 0.0 {
            1.0 / n
        } else if diff < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((loss / n, grad))
}

/// Logistic balance weight `1 / (1 + e^(-d * slope))`, clamped into the open
/// interval (0, 1).
///
/// The two branches mirror each other so that
/// `balance_sigmoid(d, b) + balance_sigmoid(-d, b) == 1` holds exactly in
/// floating point, which the per-step balancing identities rely on.
pub fn balance_sigmoid(d: f64, slope: f64) -> f64 {
    debug_assert!(slope > 0.0, "slope must be positive");
    let positive = |t: f64| {
        // t >= 0 here, so the exponent is <= 0 and cannot overflow.
        let v = 1.0 / (1.0 + (-t).exp());
        v.min(1.0 - f64::EPSILON)
    };
    let t = d * slope;
    if t >= 0.0 {
        positive(t)
    } else {
        1.0 - positive(-t)
    }
}

/// Mismatch between the normalized log pairwise squared-distance profiles of
/// `x` and `z`:
///
/// `L = (1/B) * sum_{i,j} [ log2(1 + dx2_ij / mean(dx2)) - log2(1 + dz2_ij / mean(dz2)) ]^2`
///
/// with sums and means over all B^2 ordered row pairs (diagonal included).
/// Dividing each squared distance by its mean makes the loss invariant to
/// uniform rescaling of either argument.
pub fn distance_loss(x: &Matrix, z: &Matrix) -> Result<f64> {
    Ok(distance_loss_impl(x, z, false)?.0)
}

/// [`distance_loss`] plus its gradient with respect to `z`.
pub fn distance_loss_with_grad(x: &Matrix, z: &Matrix) -> Result<(f64, Matrix)> {
    let (loss, grad) = distance_loss_impl(x, z, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn distance_loss_impl(x: &Matrix, z: &Matrix, want_grad: bool) -> Result<(f64, Option<Matrix>)> {
    let b = x.nrows();
    if z.nrows() != b {
        return Err(CoreError::ShapeMismatch {
            context: "distance_loss",
            expected: format!("{b} rows"),
            got: format!("{} rows", z.nrows()),
        });
    }
    if b < 2 {
        return Err(CoreError::InvalidInput(
            "distance_loss needs at least 2 rows".into(),
        ));
    }

    let sq_x = pairwise_squared(x);
    let sq_z = pairwise_squared(z);
    let bb = (b * b) as f64;
    let mean_x = sq_x.sum() / bb;
    let mean_z = sq_z.sum() / bb;
    if mean_x <= 0.0 || mean_z <= 0.0 {
        return Err(CoreError::Degenerate(
            "all rows identical; mean pairwise distance is zero".into(),
        ));
    }

    let ln2 = std::f64::consts::LN_2;
    let bf = b as f64;
    let mut loss = 0.0;
    // dL/d(sq_z[i,j]) has a direct term through its own log ratio and an
    // indirect term through the mean; `t` holds the direct factors and
    // `t_dot_s` accumulates sum_ij t_ij * sq_z_ij for the mean term.
    let mut t = if want_grad {
        Some(Matrix::zeros((b, b)))
    } else {
        None
    };
    let mut t_dot_s = 0.0;
    for i in 0..b {
        for j in 0..b {
            let rx = sq_x[[i, j]] / mean_x;
            let rz = sq_z[[i, j]] / mean_z;
            let a_ij = (1.0 + rx).log2();
            let c_ij = (1.0 + rz).log2();
            loss += (a_ij - c_ij) * (a_ij - c_ij);
            if let Some(t) = t.as_mut() {
                let t_ij = -2.0 * (a_ij - c_ij) / (bf * ln2 * (1.0 + rz));
                t[[i, j]] = t_ij;
                t_dot_s += t_ij * sq_z[[i, j]];
            }
        }
    }
    loss /= bf;

    let grad = t.map(|t| {
        // Chain rule through sq_z[k,l] = |z_k - z_l|^2.
        let mut grad = Matrix::zeros(z.dim());
        let mean_term = t_dot_s / (bb * mean_z * mean_z);
        for k in 0..b {
            for l in 0..b {
                let w = t[[k, l]] / mean_z - mean_term;
                for c in 0..z.ncols() {
                    let diff = z[[k, c]] - z[[l, c]];
                    grad[[k, c]] += 2.0 * w * diff;
                    grad[[l, c]] -= 2.0 * w * diff;
                }
            }
        }
        grad
    });
    Ok((loss, grad))
}

/// Full B x B matrix of squared Euclidean distances between rows.
fn pairwise_squared(m: &Matrix) -> Matrix {
    let b = m.nrows();
    let mut out = Matrix::zeros((b, b));
    for i in 0..b {
        for j in (i + 1)..b {
            let mut acc = 0.0;
            for c in 0..m.ncols() {
                let d = m[[i, c]] - m[[j, c]];
                acc += d * d;
            }
            out[[i, j]] = acc;
            out[[j, i]] = acc;
        }
    }
    out
}

fn check_same_shape(context: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CoreError::ShapeMismatch {
            context,
            expected: format!("{:?}", a.dim()),
            got: format!("{:?}", b.dim()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pixel_loss_hand_cases() {
        let zeros = Matrix::zeros((1, 2));
        let target = array![[3.0, -1.0]];
        assert_eq!(pixel_loss(&zeros, &target).unwrap(), 2.0);
        assert_eq!(pixel_loss(&target, &target).unwrap(), 0.0);
        assert_eq!(
            pixel_loss(&zeros, &target).unwrap(),
            pixel_loss(&target, &zeros).unwrap()
        );
        assert!(pixel_loss(&zeros, &Matrix::zeros((2, 2))).is_err());
    }

    #[test]
    fn pixel_loss_grad_signs_and_ties() {
        let pred = array![[2.0, -1.0, 5.0]];
        let target = array![[1.0, 3.0, 5.0]];
        let (loss, grad) = pixel_loss_grad(&pred, &target).unwrap();
        assert!((loss - (1.0 + 4.0 + 0.0) / 3.0).abs() < 1e-15);
        assert_eq!(grad, array![[1.0 / 3.0, -1.0 / 3.0, 0.0]]);
    }

    #[test]
    fn balance_sigmoid_frozen_values() {
        assert_eq!(balance_sigmoid(0.0, 20.0), 0.5);
        // 1 / (1 + e^-2), evaluated independently.
        let expected = 0.880_797_077_977_882_3;
        assert!((balance_sigmoid(0.1, 20.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn balance_sigmoid_complement_is_exact() {
        for d in [-3.0, -0.51, -1e-9, 0.0, 1e-12, 0.2, 0.9, 77.0] {
            let a = balance_sigmoid(d, 20.0);
            let b = balance_sigmoid(-d, 20.0);
            assert_eq!(a + b, 1.0, "complement must be exact at d={d}");
            assert!(a > 0.0 && a < 1.0, "strictly inside (0,1) at d={d}");
        }
    }

    #[test]
    fn distance_loss_zero_for_scaled_copies() {
        let x = array![[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0], [0.3, -0.7]];
        for c in [0.1, 1.0, 10.0] {
            let z = x.mapv(|v| c * v);
            let loss = distance_loss(&x, &z).unwrap();
            assert!(loss.abs() < 1e-9, "c={c}: loss {loss}");
        }
    }

    /// Brute-force oracle: re-evaluate the published formula with nothing
    /// shared with the implementation (explicit loops, no helper reuse).
    fn distance_loss_oracle(x: &Matrix, z: &Matrix) -> f64 {
        let b = x.nrows();
        let d2 = |m: &Matrix, i: usize, j: usize| -> f64 {
            (0..m.ncols()).map(|c| (m[[i, c]] - m[[j, c]]).powi(2)).sum()
        };
        let mut mean_x = 0.0;
        let mut mean_z = 0.0;
        for i in 0..b {
            for j in 0..b {
                mean_x += d2(x, i, j);
                mean_z += d2(z, i, j);
            }
        }
        mean_x /= (b * b) as f64;
        mean_z /= (b * b) as f64;
        let mut total = 0.0;
        for i in 0..b {
            for j in 0..b {
                let a = (1.0 + d2(x, i, j) / mean_x).log2();
                let c = (1.0 + d2(z, i, j) / mean_z).log2();
                total += (a - c) * (a - c);
            }
        }
        total / b as f64
    }

    #[test]
    fn distance_loss_matches_brute_force_oracle() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        let z = array![[0.5, 0.5], [-1.0, 2.0], [3.0, 0.0]];
        let got = distance_loss(&x, &z).unwrap();
        let oracle = distance_loss_oracle(&x, &z);
        assert!(
            (got - oracle).abs() < 1e-12,
            "implementation {got} vs oracle {oracle}"
        );
        assert!(got > 0.0);
    }

    #[test]
    fn distance_loss_is_permutation_invariant() {
        let x = array![[0.1, 0.4], [1.2, -0.3], [-0.5, 0.8], [2.0, 2.0]];
        let z = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [-1.0, -1.0]];
        let perm = [2usize, 0, 3, 1];
        let xp = x.select(ndarray::Axis(0), &perm);
        let zp = z.select(ndarray::Axis(0), &perm);
        let a = distance_loss(&x, &z).unwrap();
        let b = distance_loss(&xp, &zp).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn distance_loss_rejects_degenerate_input() {
        let same = Matrix::zeros((3, 2));
        let z = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            distance_loss(&same, &z),
            Err(CoreError::Degenerate(_))
        ));
        assert!(matches!(
            distance_loss(&z, &same),
            Err(CoreError::Degenerate(_))
        ));
        assert!(distance_loss(&z, &Matrix::zeros((2, 2))).is_err());
        assert!(distance_loss(&z.slice(ndarray::s![..1, ..]).to_owned(), &z).is_err());
    }

    #[test]
    fn distance_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Matrix::from_shape_fn((6, 2), |_| rng.random_range(-2.0..2.0));
        let z = Matrix::from_shape_fn((6, 2), |_| rng.random_range(-2.0..2.0));
        let (_, grad) = distance_loss_with_grad(&x, &z).unwrap();
        let h = 1e-6;
        for r in 0..z.nrows() {
            for c in 0..z.ncols() {
                let mut hi = z.clone();
                let mut lo = z.clone();
                hi[[r, c]] += h;
                lo[[r, c]] -= h;
                let fd =
                    (distance_loss(&x, &hi).unwrap() - distance_loss(&x, &lo).unwrap()) / (2.0 * h);
                let denom = fd.abs().max(grad[[r, c]].abs()).max(1e-8);
                assert!(
                    (fd - grad[[r, c]]).abs() / denom < 1e-5,
                    "z[{r},{c}]: analytic {} vs fd {fd}",
                    grad[[r, c]]
                );
            }
        }
    }
}
