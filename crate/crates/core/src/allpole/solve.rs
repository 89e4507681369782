use crate::error::{Error, Result};

/// Symmetric normal equations `M a = rhs`, with `rhs = -c_{i,0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquationSystem {
    pub order: usize,
    /// Row-major `order x order`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl NormalEquationSystem {
    pub fn new(order: usize, matrix: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        if matrix.len() != order * order || rhs.len() != order {
            return Err(Error::InvalidArgument(format!(
                "normal equations of order {order} need {} matrix entries and {order} rhs entries",
                order * order
            )));
        }
        Ok(Self { order, matrix, rhs })
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.matrix[i * self.order + k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.at(i, i)).sum()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self
            .matrix
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        (0..self.order).all(|i| (0..i).all(|k| (self.at(i, k) - self.at(k, i)).abs() <= rel_tol * scale))
    }

    /// `||M a - rhs|| / ||rhs||`.
    pub fn relative_residual(&self, a: &[f64]) -> f64 {
        let p = self.order;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..p {
            let mut acc = -self.rhs[i];
            for (k, &ak) in a.iter().enumerate() {
                acc += self.at(i, k) * ak;
            }
            num += acc * acc;
            den += self.rhs[i] * self.rhs[i];
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

const RESIDUAL_TOL: f64 = 1e-6;

fn cholesky_solve(m: &[f64], p: usize, ridge: f64, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = m[i * p + j];
            if i == j {
                sum += ridge;
            }
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Cholesky solve of a symmetric positive (semi-)definite system.
///
/// On factorization failure (or an inaccurate solution) the solve is retried
/// once with `1e-9 * trace / p` added to the diagonal.
pub fn solve_spd_system(system: &NormalEquationSystem) -> Result<Vec<f64>> {
    let p = system.order;
    if p == 0 {
        return Ok(Vec::new());
    }
    if !system.is_symmetric(1e-10) {
        return Err(Error::InvalidArgument("normal-equation matrix is not symmetric".into()));
    }
    if let Some(a) = cholesky_solve(&system.matrix, p, 0.0, &system.rhs) {
        if system.relative_residual(&a) < RESIDUAL_TOL {
            return Ok(a);
        }
    }
    let ridge = 1e-9 * system.trace() / p as f64;
    if !(ridge > 0.0) {
        return Err(Error::SingularSystem { order: p });
    }
    log::debug!("normal equations of order {p} regularized with ridge {ridge:e}");
    match cholesky_solve(&system.matrix, p, ridge, &system.rhs) {
        Some(a) if system.relative_residual(&a) < RESIDUAL_TOL => Ok(a),
        Some(a) => Err(Error::Numerical(format!(
            "ridge-regularized solve left relative residual {:e}",
            system.relative_residual(&a)
        ))),
        None => Err(Error::SingularSystem { order: p }),
    }
}
