//! Minimal dense solvers: complex Householder least squares for the direct
//! steady-state route and a pivoted real solve for the curve fitter.

use crate::{C64, Error, Result};

/// Minimize ‖A x − b‖₂ for a complex m×n system (m ≥ n, row-major `a`),
/// destroying `a` and `b` in the process.
pub fn least_squares_in_place(
    a: &mut [C64],
    b: &mut [C64],
    m: usize,
    n: usize,
) -> Result<Vec<C64>> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    if m < n {
        return Err(Error::Validation("underdetermined least-squares system".into()));
    }
    // Householder triangularization, reflectors applied to b on the fly
    for k in 0..n {
        let mut norm = 0.0f64;
        for i in k..m {
            norm += a[i * n + k].norm_sqr();
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return Err(Error::Internal("rank-deficient least-squares matrix".into()));
        }
        let akk = a[k * n + k];
        // alpha = -sign(akk) * norm keeps the reflector well conditioned
        let phase = if akk.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            akk / akk.norm()
        };
        let alpha = -phase * norm;
        // v = x - alpha e1, stored in place of column k below the diagonal
        a[k * n + k] = akk - alpha;
        let vnorm_sq: f64 = (k..m).map(|i| a[i * n + k].norm_sqr()).sum();
        if vnorm_sq > 0.0 {
            for j in k + 1..n {
                let mut dot = C64::new(0.0, 0.0);
                for i in k..m {
                    dot += a[i * n + k].conj() * a[i * n + j];
                }
                let f = 2.0 * dot / vnorm_sq;
                for i in k..m {
                    let vik = a[i * n + k];
                    a[i * n + j] -= f * vik;
                }
            }
            let mut dot = C64::new(0.0, 0.0);
            for i in k..m {
                dot += a[i * n + k].conj() * b[i];
            }
            let f = 2.0 * dot / vnorm_sq;
            for i in k..m {
                let vik = a[i * n + k];
                b[i] -= f * vik;
            }
        }
        a[k * n + k] = alpha;
    }
    // back substitution on the triangular factor
    let mut x = vec![C64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * x[j];
        }
        let rkk = a[k * n + k];
        if rkk.norm() < 1e-300 {
            return Err(Error::Internal("singular triangular factor".into()));
        }
        x[k] = acc / rkk;
    }
    Ok(x)
}

/// Solve the real n×n system A x = b by partially pivoted elimination.
pub fn solve_real(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for k in 0..n {
        let (pivot, pval) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pval < 1e-300 {
            return Err(Error::Internal("singular real system".into()));
        }
        if pivot != k {
            for j in 0..n {
                a.swap(k * n + j, pivot * n + j);
            }
            b.swap(k, pivot);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            a[i * n + k] = 0.0;
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * x[j];
        }
        x[k] = acc / a[k * n + k];
    }
    Ok(x)
}
