//! Nonnegative least squares, Lawson–Hanson active set.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnlsError {
    #[error("empty problem ({rows} x {cols})")]
    Empty { rows: usize, cols: usize },
    #[error("right-hand side has {found} entries, matrix has {rows} rows")]
    DimensionMismatch { rows: usize, found: usize },
    #[error("non-finite entry in the problem data")]
    NonFinite,
    #[error("no convergence within {cap} iterations")]
    IterationCap { cap: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `||b - A x||_2`.
    pub residual_norm: f64,
    /// `A^T (b - A x)`; the negative gradient of `||b - A x||^2 / 2`.
    pub gradient: Vec<f64>,
    /// `||A||_F ||b||_2`, the magnitude gradients are compared against.
    pub scale: f64,
    pub iterations: usize,
}

/// Solves `min ||A x - b||_2` subject to `x >= 0`.
///
/// Tall problems are first reduced to the square triangular factor of `A`.
/// The entering variable is the largest positive gradient component, ties to the smallest index.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution, NnlsError> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(NnlsError::Empty { rows: m, cols: n });
    }
    if b.len() != m {
        return Err(NnlsError::DimensionMismatch { rows: m, found: b.len() });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(NnlsError::NonFinite);
    }
    let (r, c) = if m > n {
        let qr = a.clone().qr();
        let c = qr.q().transpose() * b;
        (qr.r(), c)
    } else {
        (a.clone(), b.clone())
    };

    let scale = a.norm() * b.norm();
    let cap = 10 * n;
    let objective = |x: &DVector<f64>| (&c - &r * x).norm();
    let mut x = DVector::<f64>::zeros(n);
    let mut current = objective(&x);
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let mut iterations = 0;

    let abs_a = a.abs();
    let abs_b = b.abs();
    loop {
        let w = r.transpose() * (&c - &r * &x);
        // rounding bound on each gradient component; candidates inside it are tried and
        // kept only if they lower the objective
        let noise = abs_a.transpose() * (&abs_b + &abs_a * x.abs()) * (16.0 * f64::EPSILON);
        let mut entering: Option<usize> = None;
        for j in 0..n {
            if passive[j] || blocked[j] || !(w[j] > -noise[j]) || (w[j] <= 0.0 && x.iter().all(|v| *v == 0.0)) {
                continue;
            }
            if entering.is_none_or(|e| w[j] > w[e]) {
                entering = Some(j);
            }
        }
        let Some(j) = entering else { break };
        let saved = (x.clone(), passive.clone());
        passive[j] = true;

        let mut first = true;
        let mut accepted = false;
        loop {
            let z = match solve_passive(&r, &c, &passive) {
                Some(z) if !(first && z[j] <= 0.0) => z,
                _ => break,
            };
            first = false;
            if (0..n).all(|i| !passive[i] || z[i] > 0.0) {
                let value = objective(&z);
                // gradients at rounding level cannot buy a real decrease
                if value < current * (1.0 - 4.0 * f64::EPSILON) {
                    x = z;
                    current = value;
                    accepted = true;
                }
                break;
            }
            iterations += 1;
            if iterations > cap {
                return Err(NnlsError::IterationCap { cap });
            }
            let mut alpha = f64::INFINITY;
            let mut leaving = 0;
            for i in (0..n).filter(|&i| passive[i] && z[i] <= 0.0) {
                let step = x[i] / (x[i] - z[i]);
                if step < alpha {
                    alpha = step;
                    leaving = i;
                }
            }
            for i in 0..n {
                if passive[i] {
                    x[i] += alpha * (z[i] - x[i]);
                }
            }
            x[leaving] = 0.0;
            for i in 0..n {
                if passive[i] && x[i] <= 0.0 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        if accepted {
            iterations += 1;
            if iterations > cap {
                return Err(NnlsError::IterationCap { cap });
            }
            blocked.iter_mut().for_each(|b| *b = false);
        } else {
            (x, passive) = saved;
            blocked[j] = true;
        }
    }

    let resid = b - a * &x;
    let gradient = a.transpose() * &resid;
    Ok(NnlsSolution {
        x: x.iter().copied().collect(),
        residual_norm: resid.norm(),
        gradient: gradient.iter().copied().collect(),
        scale,
        iterations,
    })
}

/// Unconstrained least squares over the passive columns; zero elsewhere.
fn solve_passive(r: &DMatrix<f64>, c: &DVector<f64>, passive: &[bool]) -> Option<DVector<f64>> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = r.select_columns(&cols);
    let (rows, k) = sub.shape();
    if k > rows {
        return None;
    }
    let qr = sub.qr();
    let rr = qr.r();
    let diag_max = (0..k).map(|i| rr[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| rr[(i, i)].abs() <= f64::EPSILON * diag_max) || diag_max == 0.0 {
        return None;
    }
    let rhs = qr.q().transpose() * c;
    let y = rr.solve_upper_triangular(&rhs)?;
    let mut z = DVector::zeros(passive.len());
    for (slot, &i) in cols.iter().enumerate() {
        z[i] = y[slot];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kkt_ok(s: &NnlsSolution, rel: f64) -> bool {
        let tol = rel * s.scale.max(f64::MIN_POSITIVE);
        s.x.iter().zip(&s.gradient).all(|(x, g)| {
            if *x > 0.0 {
                g.abs() <= tol
            } else {
                *g <= tol
            }
        })
    }

    #[test]
    fn exact_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 3.0, 5.0]);
        let s = nnls(&a, &b).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-14 && (s.x[1] - 3.0).abs() < 1e-14);
        assert!(s.residual_norm < 1e-13);
    }

    #[test]
    fn clamps_negative_component() {
        // unconstrained optimum is (2, -1)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0]);
        let s = nnls(&a, &b).unwrap();
        assert_eq!(s.x, vec![2.0, 0.0]);
        assert!((s.residual_norm - 1.0).abs() < 1e-15);
        assert!(kkt_ok(&s, 1e-12));
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::<f64>::zeros(0, 3);
        assert!(matches!(nnls(&a, &DVector::zeros(0)), Err(NnlsError::Empty { .. })));
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(nnls(&a, &DVector::zeros(3)), Err(NnlsError::DimensionMismatch { .. })));
        let b = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert_eq!(nnls(&a, &b), Err(NnlsError::NonFinite));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = nnls(&a, &DVector::zeros(2)).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
    }

    #[test]
    fn duplicate_columns_terminate() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 1.0]);
        let s = nnls(&a, &b).unwrap();
        assert!(s.residual_norm < 1e-12);
        assert!(kkt_ok(&s, 1e-10));
    }

    proptest! {
        #[test]
        fn kkt_conditions(
            m in 3usize..12,
            n in 1usize..8,
            seed in proptest::collection::vec(-1.0f64..1.0, 12 * 8 + 12),
        ) {
            let a = DMatrix::from_fn(m, n, |i, j| seed[i * 8 + j]);
            let b = DVector::from_fn(m, |i, _| seed[96 + i]);
            let s = nnls(&a, &b).unwrap();
            prop_assert!(s.x.iter().all(|v| *v >= 0.0));
            prop_assert!(kkt_ok(&s, 1e-8), "{:?}", s);
        }

        #[test]
        fn more_columns_never_worse(
            seed in proptest::collection::vec(0.0f64..1.0, 40),
            target in proptest::collection::vec(-1.0f64..2.0, 8),
        ) {
            let a_small = DMatrix::from_fn(8, 2, |i, j| seed[i * 5 + j]);
            let a_big = DMatrix::from_fn(8, 5, |i, j| seed[i * 5 + j]);
            let b = DVector::from_vec(target);
            let small = nnls(&a_small, &b).unwrap();
            let big = nnls(&a_big, &b).unwrap();
            prop_assert!(big.residual_norm <= small.residual_norm * (1.0 + 1e-10) + 1e-12);
        }
    }
}
