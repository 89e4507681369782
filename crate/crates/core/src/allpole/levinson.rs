/// Output of the Levinson-Durbin recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct LevinsonSolution {
    /// `a_1..a_p` in the `A(z) = 1 + sum a_k z^-k` convention.
    pub coefficients: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Final prediction error power.
    pub error: f64,
}

/// Solves the Toeplitz normal equations built from autocorrelation `r[0..=p]`.
///
/// Returns `None` when `r[0]` is not positive. If the error reaches zero
/// before order `p` the remaining coefficients stay zero.
pub fn levinson_durbin(r: &[f64], p: usize) -> Option<LevinsonSolution> {
    assert!(r.len() > p, "need {} autocorrelation lags, got {}", p + 1, r.len());
    if !(r[0] > 0.0) {
        return None;
    }
    let mut a = vec![0.0; p];
    let mut reflection = vec![0.0; p];
    let mut err = r[0];
    let mut prev = vec![0.0; p];
    for m in 0..p {
        if err <= r[0] * 1e-15 {
            break;
        }
        let mut acc = r[m + 1];
        for j in 0..m {
            acc += a[j] * r[m - j];
        }
        let k = -acc / err;
        reflection[m] = k;
        prev[..m].copy_from_slice(&a[..m]);
        for j in 0..m {
            a[j] = prev[j] + k * prev[m - 1 - j];
        }
        a[m] = k;
        err *= 1.0 - k * k;
    }
    Some(LevinsonSolution {
        coefficients: a,
        reflection,
        error: err.max(0.0),
    })
}

/// Step-down recursion: reflection coefficients of `A(z)`, or `None` when a
/// coefficient reaches unit magnitude (polynomial not strictly minimum phase).
pub fn reflection_coefficients(a: &[f64]) -> Option<Vec<f64>> {
    let p = a.len();
    let mut cur = a.to_vec();
    let mut k = vec![0.0; p];
    for m in (0..p).rev() {
        let km = cur[m];
        if !(km.abs() < 1.0) {
            return None;
        }
        k[m] = km;
        let denom = 1.0 - km * km;
        let next: Vec<f64> = (0..m).map(|i| (cur[i] - km * cur[m - 1 - i]) / denom).collect();
        cur = next;
    }
    Some(k)
}
