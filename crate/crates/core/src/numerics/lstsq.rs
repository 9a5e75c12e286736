use super::matrix::RealMatrix;
use crate::error::{Error, Result};

/// Condition-number estimate above which a normal matrix is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

fn cholesky(a: &RealMatrix) -> Option<RealMatrix> {
    let n = a.rows();
    let mut l = RealMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Some(l)
}

/// Solves `L Lᵀ X = B` column by column.
fn cholesky_solve(l: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    x
}

fn norm1(a: &RealMatrix) -> f64 {
    (0..a.cols())
        .map(|c| (0..a.rows()).map(|r| a.get(r, c).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number of a symmetric positive definite matrix, or
/// infinity when it is not numerically positive definite.
pub fn spd_condition(a: &RealMatrix) -> f64 {
    match cholesky(a) {
        None => f64::INFINITY,
        Some(l) => {
            let inv = cholesky_solve(&l, &RealMatrix::identity(a.rows()));
            let c = norm1(a) * norm1(&inv);
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Ordinary least squares `(XᵀX)⁻¹XᵀY` via the normal equations.
pub fn least_squares(x: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    if x.rows() != y.rows() {
        return Err(Error::Shape(format!(
            "design has {} rows but targets have {}",
            x.rows(),
            y.rows()
        )));
    }
    if x.rows() < x.cols() {
        return Err(Error::Shape(format!(
            "underdetermined system: {} rows for {} unknowns",
            x.rows(),
            x.cols()
        )));
    }
    let xtx = x.t_matmul(x)?;
    let xty = x.t_matmul(y)?;
    let condition = spd_condition(&xtx);
    if condition > CONDITION_LIMIT {
        return Err(Error::Singular { condition });
    }
    let l = cholesky(&xtx).ok_or(Error::Singular { condition })?;
    Ok(cholesky_solve(&l, &xty))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as the columns of the second matrix.
pub fn symmetric_eigen(a: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape("eigen-decomposition needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = RealMatrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).powi(2))
            .sum();
        let scale: f64 = m.as_slice().iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = RealMatrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_c, v.get(r, old_c));
        }
    }
    Ok((values, vectors))
}

/// Minimum-norm least-squares solution `X⁺Y`, computed through the
/// eigen-decomposition of `XᵀX`. Directions whose eigenvalue falls below
/// `rcond · λ_max` are discarded. Returns the solution and the numerical
/// rank of `X`.
pub fn min_norm_least_squares(x: &RealMatrix, y: &RealMatrix, rcond: f64) -> Result<(RealMatrix, usize)> {
    if x.rows() != y.rows() {
        return Err(Error::Shape(format!(
            "design has {} rows but targets have {}",
            x.rows(),
            y.rows()
        )));
    }
    let xtx = x.t_matmul(x)?;
    let xty = x.t_matmul(y)?;
    let (values, vectors) = symmetric_eigen(&xtx)?;
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let p = x.cols();
    let mut pinv = RealMatrix::zeros(p, p);
    let mut rank = 0;
    for (k, &lam) in values.iter().enumerate() {
        if lambda_max == 0.0 || lam <= rcond * lambda_max {
            continue;
        }
        rank += 1;
        for i in 0..p {
            for j in 0..p {
                let v = pinv.get(i, j) + vectors.get(i, k) * vectors.get(j, k) / lam;
                pinv.set(i, j, v);
            }
        }
    }
    Ok((pinv.matmul(&xty)?, rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gauss-Jordan elimination with partial pivoting; independent of the
    /// Cholesky path used by `least_squares`.
    fn gauss_solve(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
        let n = a.rows();
        let m = b.cols();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| a.row(i).iter().chain(b.row(i)).copied().collect())
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, piv);
            let d = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[r][col];
                    let pivot_row = aug[col].clone();
                    for (v, p) in aug[r].iter_mut().zip(pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        let rows: Vec<Vec<f64>> = aug.into_iter().map(|r| r[n..n + m].to_vec()).collect();
        RealMatrix::from_rows(&rows).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RealMatrix {
        RealMatrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_design_returns_targets() {
        let y = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.0]]).unwrap();
        let b = least_squares(&RealMatrix::identity(3), &y).unwrap();
        assert!(b.sub(&y).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn exact_recovery_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 40, 4);
        let b_true = random_matrix(&mut rng, 4, 3);
        let y = x.matmul(&b_true).unwrap();
        let b = least_squares(&x, &y).unwrap();
        assert!(b.sub(&b_true).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn matches_gauss_oracle_and_residual_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 60, 5);
        let y = random_matrix(&mut rng, 60, 2);
        let b = least_squares(&x, &y).unwrap();
        let oracle = gauss_solve(&x.t_matmul(&x).unwrap(), &x.t_matmul(&y).unwrap());
        assert!(b.sub(&oracle).unwrap().max_abs() < 1e-10);
        let residual = y.sub(&x.matmul(&b).unwrap()).unwrap();
        assert!(x.t_matmul(&residual).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_design_is_singular() {
        let x = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let y = RealMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert!(matches!(least_squares(&x, &y), Err(Error::Singular { .. })));
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_matrix(&mut rng, 6, 4);
        let a = r.t_matmul(&r).unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for k in 0..4 {
            let v = vecs.column(k);
            let av = a.mul_vec(&v).unwrap();
            for i in 0..4 {
                assert!((av[i] - vals[k] * v[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn min_norm_handles_duplicate_columns() {
        // x = [c, c]: the minimum-norm fit of y = c splits the weight evenly
        let x = RealMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]]).unwrap();
        let y = RealMatrix::from_rows(&[vec![1.0], vec![2.0], vec![-1.0]]).unwrap();
        let (b, rank) = min_norm_least_squares(&x, &y, 1e-10).unwrap();
        assert_eq!(rank, 1);
        assert!((b.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((b.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn min_norm_agrees_with_ols_on_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 30, 3);
        let y = random_matrix(&mut rng, 30, 2);
        let (b, rank) = min_norm_least_squares(&x, &y, 1e-12).unwrap();
        assert_eq!(rank, 3);
        assert!(b.sub(&least_squares(&x, &y).unwrap()).unwrap().max_abs() < 1e-10);
    }
}
