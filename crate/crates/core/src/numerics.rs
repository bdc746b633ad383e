//! Small numerical kernels shared across modules: finite-difference weights,
//! tridiagonal solves, Hermite interpolation and linear least squares.

use crate::error::{Error, Result};

/// Fornberg's algorithm: weights for the `m`-th derivative at `x0` from nodes `xs`.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Thomas algorithm. `a` is the sub-diagonal (a[0] unused), `c` the super-diagonal
/// (c[n-1] unused).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut piv = b[0];
    if piv.abs() < 1e-300 {
        return Err(Error::SingularPivot { row: 0 });
    }
    cp[0] = c[0] / piv;
    dp[0] = d[0] / piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        if piv.abs() < 1e-300 {
            return Err(Error::SingularPivot { row: i });
        }
        cp[i] = if i + 1 < n { c[i] / piv } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Fritsch–Carlson limiter applied to given end slopes of one cell.
pub fn limit_slopes(delta: f64, m0: f64, m1: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let mut a = m0 / delta;
    let mut b = m1 / delta;
    if a < 0.0 {
        a = 0.0;
    }
    if b < 0.0 {
        b = 0.0;
    }
    let s = a * a + b * b;
    if s > 9.0 {
        let t = 3.0 / s.sqrt();
        a *= t;
        b *= t;
    }
    (a * delta, b * delta)
}

/// Cubic Hermite value on [x0, x0+h] at local t ∈ [0,1].
#[inline]
pub fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

/// Derivative of the cubic Hermite interpolant.
#[inline]
pub fn hermite_deriv(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0 + (6.0 * t2 - 6.0 * t) * (-y1)) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (3.0 * t2 - 2.0 * t) * m1
}

/// Monotone piecewise cubic on arbitrary increasing nodes with slopes from
/// three-point differences, limited per cell.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidInput("monotone cubic needs at least two matching samples".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("interpolation nodes must be strictly increasing".into()));
        }
        let mut ms = vec![0.0; n];
        for i in 0..n {
            if n == 2 {
                ms[i] = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            } else {
                let (l, r) = if i == 0 { (0, 2) } else if i == n - 1 { (n - 3, n - 1) } else { (i - 1, i + 1) };
                let w = fd_weights(xs[i], &xs[l..=r], 1);
                ms[i] = w.iter().zip(&ys[l..=r]).map(|(a, b)| a * b).sum();
            }
        }
        for i in 0..n - 1 {
            let d = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            let (a, b) = limit_slopes(d, ms[i], ms[i + 1]);
            ms[i] = a;
            ms[i + 1] = b;
        }
        Ok(Self { xs, ys, ms })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        hermite(self.ys[i], self.ys[i + 1], self.ms[i], self.ms[i + 1], h, t)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

/// Ordinary least squares via normal equations with Gaussian elimination.
/// Returns (coefficients, rms residual).
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::InsufficientData("least squares with no rows".into()));
    }
    let k = rows[0].len();
    if m < k {
        return Err(Error::InsufficientData(format!("{m} rows for {k} unknowns")));
    }
    let mut ata = vec![vec![0.0; k + 1]; k];
    for (r, &b) in rows.iter().zip(rhs) {
        for i in 0..k {
            for j in 0..k {
                ata[i][j] += r[i] * r[j];
            }
            ata[i][k] += r[i] * b;
        }
    }
    for col in 0..k {
        let p = (col..k)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .unwrap();
        ata.swap(col, p);
        let d = ata[col][col];
        if d.abs() < 1e-300 {
            return Err(Error::InsufficientData("singular least-squares system".into()));
        }
        for r in 0..k {
            if r != col {
                let f = ata[r][col] / d;
                for c in col..=k {
                    ata[r][c] -= f * ata[col][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..k).map(|i| ata[i][k] / ata[i][i]).collect();
    let ss: f64 = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let fit: f64 = r.iter().zip(&coef).map(|(a, c)| a * c).sum();
            (fit - b).powi(2)
        })
        .sum();
    Ok((coef, (ss / m as f64).sqrt()))
}

/// First derivative on a nonuniform grid: centered three-point inside,
/// one-sided three-point at the ends.
pub fn deriv1(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let (l, r) = if i == 0 { (0, 2) } else if i == n - 1 { (n - 3, n - 1) } else { (i - 1, i + 1) };
        let w = fd_weights(xs[i], &xs[l..=r], 1);
        out[i] = w.iter().zip(&ys[l..=r]).map(|(a, b)| a * b).sum();
    }
    out
}

/// Standard three-point second difference on a nonuniform grid; end values are zero.
pub fn deriv2(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let hm = xs[j] - xs[j - 1];
        let hp = xs[j + 1] - xs[j];
        out[j] = 2.0 / (hm + hp) * ((ys[j + 1] - ys[j]) / hp - (ys[j] - ys[j - 1]) / hm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_second_derivative() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] + 2.0).abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let n = 6;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 - 1.0).collect();
        let a = vec![-1.0; n];
        let b = vec![4.0; n];
        let c = vec![-1.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = b[i] * x[i];
            if i > 0 {
                d[i] += a[i] * x[i - 1];
            }
            if i + 1 < n {
                d[i] += c[i] * x[i + 1];
            }
        }
        let s = solve_tridiagonal(&a, &b, &c, &d).unwrap();
        for i in 0..n {
            assert!((s[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_pivot_reported() {
        let r = solve_tridiagonal(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::SingularPivot { row: 0 })));
    }

    #[test]
    fn least_squares_exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let rhs: Vec<f64> = (0..5).map(|i| 2.0 - 3.0 * i as f64).collect();
        let (c, rms) = least_squares(&rows, &rhs).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] + 3.0).abs() < 1e-12 && rms < 1e-12);
    }

    #[test]
    fn monotone_cubic_preserves_order() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.0, 0.1, 5.0, 5.0];
        let m = MonotoneCubic::new(xs, ys).unwrap();
        let mut prev = -1.0;
        for k in 0..=400 {
            let v = m.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }
}
