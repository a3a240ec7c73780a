//! Small dense vector helpers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Solves the square system `m x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` for (numerically) singular systems.
pub fn solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-14 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// Nonnegative least squares `min |G w - y|, w >= 0` where the columns of `G`
/// are `cols` (Lawson-Hanson active set). Returns the weights.
pub fn nnls(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let m = cols.len();
    let mut w = vec![0.0; m];
    let mut passive = vec![false; m];
    let residual = |w: &[f64]| -> Vec<f64> {
        let mut r = y.to_vec();
        for (c, wc) in cols.iter().zip(w) {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= wc * ci;
            }
        }
        r
    };
    let tol = 1e-12 * (1.0 + norm(y));
    for _ in 0..3 * m + 10 {
        let r = residual(&w);
        let grad: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let cand = (0..m)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]));
        let Some(j) = cand else { break };
        if grad[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let gram: Vec<Vec<f64>> = idx
                .iter()
                .map(|&a| idx.iter().map(|&b| dot(&cols[a], &cols[b])).collect())
                .collect();
            let rhs: Vec<f64> = idx.iter().map(|&a| dot(&cols[a], y)).collect();
            let Some(z) = solve(gram, rhs) else {
                passive[j] = false;
                return w;
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &a) in idx.iter().enumerate() {
                    w[a] = z[k];
                }
                break;
            }
            let mut step = 1.0f64;
            for (k, &a) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    step = step.min(w[a] / (w[a] - z[k]));
                }
            }
            for (k, &a) in idx.iter().enumerate() {
                w[a] += step * (z[k] - w[a]);
                if w[a] <= 1e-15 {
                    w[a] = 0.0;
                    passive[a] = false;
                }
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_recovers_cone_combination() {
        let cols = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let w = nnls(&cols, &[3.0, 1.0]);
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
        let w = nnls(&cols, &[-1.0, 0.0]);
        assert_eq!(w, vec![0.0, 0.0]);
    }

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
