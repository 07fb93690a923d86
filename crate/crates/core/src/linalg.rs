//! Small numeric helpers shared by the operator modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// All singular values, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let svd = m.clone().try_svd(false, false, f64::EPSILON, 0).ok_or_else(|| {
        Error::Numeric("singular value decomposition did not converge".into())
    })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `‖x‖_p` with `p = ∞` allowed.
pub fn lp_norm(xs: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        return xs.into_iter().fold(0.0, |a, x| a.max(x.abs()));
    }
    if p == 1.0 {
        return xs.into_iter().map(f64::abs).sum();
    }
    if p == 2.0 {
        return xs.into_iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    xs.into_iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Largest singular value of a linear map given by `apply` and its
/// transpose, by power iteration on `AᵀA` started from the all-ones vector.
/// Suited to entrywise non-negative maps, whose top singular vector is
/// non-negative.
pub fn power_norm(
    dim: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut sigma = 0.0;
    let mut stable = 0;
    for _ in 0..200_000 {
        let y = apply(&x);
        let s = lp_norm(y.iter().copied(), 2.0);
        if s == 0.0 {
            return 0.0;
        }
        let mut z = apply_t(&y);
        let zn = lp_norm(z.iter().copied(), 2.0);
        if zn == 0.0 {
            return s;
        }
        z.iter_mut().for_each(|v| *v /= zn);
        x = z;
        if (s - sigma).abs() <= 1e-15 * s {
            stable += 1;
            if stable >= 5 {
                return s;
            }
        } else {
            stable = 0;
        }
        sigma = s;
    }
    sigma
}
