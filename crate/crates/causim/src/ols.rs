//! Least squares by Householder QR.
//!
//! The orthogonal factorization is applied to the right-hand side as it is
//! built, so only the k x k triangular factor is kept. Rank deficiency is
//! detected from the magnitude of the R diagonal rather than by forming
//! normal equations, which would square the condition number.

use crate::error::{Error, Result};

/// Solves min ||X b - y||_2 for a column-major design matrix.
///
/// `cols` are the design columns (each of length n). Returns the
/// coefficient vector of length `cols.len()`.
pub fn least_squares(cols: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    let k = cols.len();
    let n = y.len();
    if k == 0 {
        return Err(Error::SingularDesign("empty design matrix".into()));
    }
    for (j, c) in cols.iter().enumerate() {
        if c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "design column {j} has length {}, response has length {n}",
                c.len()
            )));
        }
    }
    if n < k {
        return Err(Error::SingularDesign(format!(
            "{n} observations for {k} coefficients"
        )));
    }

    // Column-major working copy of [X | y].
    let mut a: Vec<f64> = Vec::with_capacity(n * k);
    for c in cols {
        a.extend_from_slice(c);
    }
    let mut rhs = y.to_vec();

    // Householder triangularization.
    for j in 0..k {
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let col = &mut head[j * n..];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue; // diagonal stays 0; caught by the rank check below
        }
        let alpha = if col[j] >= 0.0 { -norm } else { norm };
        // v = x - alpha*e1, stored in place below the diagonal
        col[j] -= alpha;
        let vtv = col[j..].iter().map(|v| v * v).sum::<f64>();
        if vtv > 0.0 {
            for c in 0..(k - j - 1) {
                let target = &mut tail[c * n..(c + 1) * n];
                let dot: f64 = col[j..].iter().zip(&target[j..]).map(|(v, t)| v * t).sum();
                let scale = 2.0 * dot / vtv;
                for (v, t) in col[j..].iter().zip(target[j..].iter_mut()) {
                    *t -= scale * v;
                }
            }
            let dot: f64 = col[j..].iter().zip(&rhs[j..]).map(|(v, t)| v * t).sum();
            let scale = 2.0 * dot / vtv;
            for (v, t) in col[j..].iter().zip(rhs[j..].iter_mut()) {
                *t -= scale * v;
            }
        }
        col[j] = alpha; // r_jj
    }

    // Rank check on the R diagonal.
    let rmax = (0..k).map(|j| a[j * n + j].abs()).fold(0.0_f64, f64::max);
    let tol = rmax * (n as f64) * f64::EPSILON * 16.0;
    for j in 0..k {
        if a[j * n + j].abs() <= tol {
            return Err(Error::SingularDesign(format!(
                "R diagonal {j} is {:.3e} (max {:.3e})",
                a[j * n + j],
                rmax
            )));
        }
    }

    // Back substitution: R b = Q'y (upper triangle lives in a).
    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let mut s = rhs[j];
        for l in (j + 1)..k {
            s -= a[l * n + j] * beta[l];
        }
        beta[j] = s / a[j * n + j];
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        // y = 2 + 3x
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let ones = vec![1.0; 4];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 3.0 * v).collect();
        let b = least_squares(&[&ones, &x], &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert!((b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_hand_solved_overdetermined_system() {
        // min over (a,b) of sum (a + b*x_i - y_i)^2 with x=(0,1,2), y=(0,0,3):
        // normal equations give a = -1/2, b = 3/2.
        let b = least_squares(&[&[1.0; 3], &[0.0, 1.0, 2.0]], &[0.0, 0.0, 3.0]).unwrap();
        assert!((b[0] + 0.5).abs() < 1e-12);
        assert!((b[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn detects_rank_deficiency() {
        let c1 = vec![1.0, 2.0, 3.0, 4.0];
        let c2: Vec<f64> = c1.iter().map(|v| 2.0 * v).collect();
        let err = least_squares(&[&c1, &c2], &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign(_)));
    }

    #[test]
    fn underdetermined_is_rejected() {
        let err = least_squares(&[&[1.0][..], &[2.0][..]], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign(_)));
    }
}
