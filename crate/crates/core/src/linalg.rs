//! Small dense solves, delegated to nalgebra in double precision.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

fn to_matrix<T: Real>(a: &[Vec<T>]) -> DMatrix<f64> {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    DMatrix::from_fn(n, m, |i, j| a[i][j].to_f64().unwrap())
}

/// Solve `A x = b`; `None` when `A` is singular.
pub fn solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let lu = to_matrix(a).lu();
    let rhs = DVector::from_iterator(b.len(), b.iter().map(|v| v.to_f64().unwrap()));
    let x = lu.solve(&rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x.iter().map(|&v| T::lit(v)).collect())
}

pub fn inverse<T: Real>(a: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let inv = to_matrix(a).try_inverse()?;
    Some((0..inv.nrows()).map(|i| (0..inv.ncols()).map(|j| T::lit(inv[(i, j)])).collect()).collect())
}

pub fn matmul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().zip(b).fold(T::zero(), |acc, (x, brow)| acc + *x * brow[j]))
                .collect()
        })
        .collect()
}

pub fn matvec<T: Real>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter().map(|row| row.iter().zip(x).fold(T::zero(), |acc, (p, q)| acc + *p * *q)).collect()
}

pub fn norm<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt()
}

pub fn identity<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0f64, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(&[vec![1.0f64, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }
}
