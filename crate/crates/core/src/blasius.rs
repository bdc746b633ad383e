//! Blasius similarity profile: f''' + ½ f f'' = 0, f(0) = f'(0) = 0, f'(∞) = 1.
//!
//! The profile is tabulated on a uniform grid by RK4 shooting on s = f''(0) and
//! evaluated between nodes with limited cubic Hermite pieces that use the exact
//! nodal derivatives. Beyond `zeta_max` the tail f = ζ − β̄ takes over.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fd_weights, hermite, hermite_deriv, least_squares, limit_slopes};

const BRACKET: (f64, f64) = (0.2, 0.5);
const MAX_BISECT: usize = 200;
const MAX_HALVINGS: usize = 10;
const DZ_START: f64 = 0.02;
const TAIL_WINDOW_START: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlasiusProfile {
    pub zeta_grid: Vec<f64>,
    pub f: Vec<f64>,
    pub fp: Vec<f64>,
    pub fpp: Vec<f64>,
    pub fppp: Vec<f64>,
    pub b0: f64,
    pub beta_bar: f64,
    pub c1_fit: f64,
    pub c2_fit: f64,
    pub tail_fit_rms: f64,
    pub tol: f64,
    pub zeta_max: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlasiusPoint {
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub fppp: f64,
}

/// Constants written next to the tabulated profile.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlasiusConstants {
    pub b0: f64,
    pub beta_bar: f64,
    pub c1_fit: f64,
    pub c2_fit: f64,
    pub zeta_max: f64,
    pub tol: f64,
}

fn rhs(y: [f64; 3]) -> [f64; 3] {
    [y[1], y[2], -0.5 * y[0] * y[2]]
}

fn rk4(y: [f64; 3], dz: f64) -> [f64; 3] {
    let add = |k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let k1 = rhs(y);
    let k2 = rhs(add(k1, 0.5 * dz));
    let k3 = rhs(add(k2, 0.5 * dz));
    let k4 = rhs(add(k3, dz));
    let mut out = y;
    for i in 0..3 {
        out[i] += dz / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn steps_for(zeta_max: f64, dz: f64) -> usize {
    (zeta_max / dz).round().max(1.0) as usize
}

fn end_slope(s: f64, zeta_max: f64, dz: f64) -> f64 {
    let n = steps_for(zeta_max, dz);
    let h = zeta_max / n as f64;
    let mut y = [0.0, 0.0, s];
    for _ in 0..n {
        y = rk4(y, h);
    }
    y[1]
}

fn integrate(s: f64, zeta_max: f64, dz: f64) -> Vec<[f64; 3]> {
    let n = steps_for(zeta_max, dz);
    let h = zeta_max / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = [0.0, 0.0, s];
    out.push(y);
    for _ in 0..n {
        y = rk4(y, h);
        out.push(y);
    }
    out
}

/// Bisection on s = f''(0) so that f'(zeta_max) = 1, with RK4 step `dz`.
/// `btol` is the bracket width at which bisection stops.
pub fn shoot(zeta_max: f64, dz: f64, btol: f64) -> Result<f64> {
    let (mut lo, mut hi) = BRACKET;
    let r_lo = end_slope(lo, zeta_max, dz) - 1.0;
    let r_hi = end_slope(hi, zeta_max, dz) - 1.0;
    if !(r_lo < 0.0 && r_hi > 0.0) {
        return Err(Error::BracketFailure { lo, hi, r_lo, r_hi });
    }
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= btol.max(4.0 * f64::EPSILON * mid) {
            // the lower end keeps f' below 1 on the whole grid
            return Ok(lo);
        }
        if end_slope(mid, zeta_max, dz) - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NonConvergence { iters: MAX_BISECT, lo, hi })
}

/// Solve the Blasius problem on [0, zeta_max], halving the RK4 step until b0 is
/// stable to `tol`.
pub fn solve_blasius(zeta_max: f64, tol: f64) -> Result<BlasiusProfile> {
    if !(zeta_max >= 8.0) {
        return Err(Error::InvalidInput(format!("zeta_max = {zeta_max} must be at least 8")));
    }
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidInput(format!("tol = {tol} must lie in (0, 1e-6]")));
    }
    let btol = (tol * 1e-3).max(1e-15);
    let mut dz = DZ_START;
    let mut b = shoot(zeta_max, dz, btol)?;
    let mut converged = false;
    for _ in 0..MAX_HALVINGS {
        let b_half = shoot(zeta_max, dz / 2.0, btol)?;
        dz /= 2.0;
        let stable = (b_half - b).abs() <= tol;
        b = b_half;
        if stable {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iters: MAX_HALVINGS, lo: b, hi: b });
    }
    let states = integrate(b, zeta_max, dz);
    let n = states.len();
    let h = zeta_max / (n - 1) as f64;
    let zeta_grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let f: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let fp: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let fpp: Vec<f64> = states.iter().map(|s| s[2]).collect();
    let fppp: Vec<f64> = f.iter().zip(&fpp).map(|(a, b)| -0.5 * a * b).collect();
    let beta_bar = zeta_max - f[n - 1];
    let mut p = BlasiusProfile {
        zeta_grid,
        f,
        fp,
        fpp,
        fppp,
        b0: b,
        beta_bar,
        c1_fit: f64::NAN,
        c2_fit: f64::NAN,
        tail_fit_rms: f64::NAN,
        tol,
        zeta_max,
        dz: h,
    };
    p.fit_tail_constants()?;
    if (p.fp[n - 1] - 1.0).abs() > tol {
        return Err(Error::NonConvergence { iters: MAX_BISECT, lo: b, hi: b });
    }
    Ok(p)
}

impl BlasiusProfile {
    pub fn len(&self) -> usize {
        self.zeta_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta_grid.is_empty()
    }

    /// f'''' = −½(f' f'' + f f''') at node i.
    fn f4(&self, i: usize) -> f64 {
        -0.5 * (self.fp[i] * self.fpp[i] + self.f[i] * self.fppp[i])
    }

    fn cell(&self, zeta: f64) -> (usize, f64) {
        let n = self.len();
        let i = ((zeta / self.dz).floor() as usize).min(n - 2);
        let t = (zeta - self.zeta_grid[i]) / self.dz;
        (i, t)
    }

    fn piece(&self, y0: f64, y1: f64, m0: f64, m1: f64, t: f64) -> (f64, f64) {
        let (m0, m1) = limit_slopes((y1 - y0) / self.dz, m0, m1);
        (hermite(y0, y1, m0, m1, self.dz, t), hermite_deriv(y0, y1, m0, m1, self.dz, t))
    }

    /// (f, f', f'', f''') at `zeta` ≥ 0.
    pub fn eval(&self, zeta: f64) -> BlasiusPoint {
        if zeta <= 0.0 {
            return BlasiusPoint { f: 0.0, fp: 0.0, fpp: self.b0, fppp: 0.0 };
        }
        if zeta >= self.zeta_max {
            return BlasiusPoint { f: zeta - self.beta_bar, fp: 1.0, fpp: 0.0, fppp: 0.0 };
        }
        if zeta < self.dz {
            return self.origin_series(zeta);
        }
        let (i, t) = self.cell(zeta);
        let j = i + 1;
        let (f, _) = self.piece(self.f[i], self.f[j], self.fp[i], self.fp[j], t);
        let (fp, _) = self.piece(self.fp[i], self.fp[j], self.fpp[i], self.fpp[j], t);
        let (fpp, _) = self.piece(self.fpp[i], self.fpp[j], self.fppp[i], self.fppp[j], t);
        let (fppp, _) = self.piece(self.fppp[i], self.fppp[j], self.f4(i), self.f4(j), t);
        BlasiusPoint { f, fp: fp.clamp(0.0, 1.0), fpp: fpp.max(0.0), fppp: fppp.min(0.0) }
    }

    /// Power series about the wall, f = Σ (−½)ⁿ Aₙ b0ⁿ⁺¹ ζ³ⁿ⁺²/(3n+2)!, used in the
    /// first table cell where Hermite interpolation loses the relative accuracy that
    /// second ψ-differences near the wall need.
    fn origin_series(&self, zeta: f64) -> BlasiusPoint {
        const A: [f64; 4] = [1.0, 1.0, 11.0, 375.0];
        let mut out = BlasiusPoint { f: 0.0, fp: 0.0, fpp: 0.0, fppp: 0.0 };
        let mut coef = self.b0;
        for (n, a) in A.iter().enumerate() {
            let m = 3 * n + 2;
            let fact: f64 = (1..=m).map(|k| k as f64).product();
            let c = a * coef / fact;
            let m = m as i32;
            let mf = m as f64;
            out.f += c * zeta.powi(m);
            out.fp += c * mf * zeta.powi(m - 1);
            out.fpp += c * mf * (mf - 1.0) * zeta.powi(m - 2);
            if m >= 3 {
                out.fppp += c * mf * (mf - 1.0) * (mf - 2.0) * zeta.powi(m - 3);
            }
            coef *= -0.5 * self.b0;
        }
        out
    }

    /// Unique ζ ≥ 0 with f(ζ) = h.
    pub fn invert_f(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        if h < self.origin_series(self.dz).f {
            let mut z = (2.0 * h / self.b0).sqrt();
            for _ in 0..20 {
                let q = self.origin_series(z);
                let next = z - (q.f - h) / q.fp;
                if (next - z).abs() <= 1e-16 * z {
                    z = next;
                    break;
                }
                z = next;
            }
            return z;
        }
        let n = self.len();
        if h >= self.f[n - 1] {
            return h + self.beta_bar;
        }
        let i = self.f.partition_point(|&v| v <= h) - 1;
        let j = i + 1;
        let (y0, y1) = (self.f[i], self.f[j]);
        let (m0, m1) = limit_slopes((y1 - y0) / self.dz, self.fp[i], self.fp[j]);
        let val = |t: f64| hermite(y0, y1, m0, m1, self.dz, t) - h;
        let der = |t: f64| hermite_deriv(y0, y1, m0, m1, self.dz, t) * self.dz;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = if y1 > y0 { ((h - y0) / (y1 - y0)).clamp(0.0, 1.0) } else { 0.5 };
        for _ in 0..100 {
            let v = val(t);
            if v == 0.0 {
                break;
            }
            if v < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = der(t);
            let mut next = if d > 0.0 { t - v / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-17 * (1.0 + t.abs()) || hi - lo <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        self.zeta_grid[i] + t * self.dz
    }

    /// (f'''(0), f''''(0), f⁽⁵⁾(0)) by one-sided differences of the tabulated f''.
    /// The fifth derivative uses a wider ten-point stencil to keep roundoff down.
    pub fn check_origin_derivatives(&self) -> (f64, f64, f64) {
        let dot = |w: Vec<f64>, ys: &[f64]| -> f64 { w.iter().zip(ys).map(|(a, b)| a * b).sum() };
        let xs = &self.zeta_grid[0..8];
        let ys = &self.fpp[0..8];
        let f3 = dot(fd_weights(0.0, xs, 1), ys);
        let f4 = dot(fd_weights(0.0, xs, 2), ys);
        let stride = 4.min((self.len() - 1) / 9).max(1);
        let xs5: Vec<f64> = (0..10).map(|i| self.zeta_grid[i * stride]).collect();
        let ys5: Vec<f64> = (0..10).map(|i| self.fpp[i * stride]).collect();
        let f5 = dot(fd_weights(0.0, &xs5, 3), &ys5);
        (f3, f4, f5)
    }

    /// Least-squares fit of ln f'' ≈ −c1 ζ² − c2 ζ + const on [4, zeta_max].
    pub fn fit_tail_constants(&mut self) -> Result<(f64, f64)> {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..self.len() {
            let z = self.zeta_grid[i];
            if z < TAIL_WINDOW_START {
                continue;
            }
            if self.fpp[i] < 1e-300 {
                break;
            }
            rows.push(vec![1.0, z, z * z]);
            rhs.push(self.fpp[i].ln());
        }
        if rows.len() < 10 {
            return Err(Error::InsufficientData(format!(
                "tail window holds {} usable points, need 10",
                rows.len()
            )));
        }
        let (c, rms) = least_squares(&rows, &rhs)?;
        self.c1_fit = -c[2];
        self.c2_fit = -c[1];
        self.tail_fit_rms = rms;
        Ok((self.c1_fit, self.c2_fit))
    }

    /// sup over nodes of |f''' + ½ f f''| with f''' from sixth-order differences of f''.
    pub fn ode_residual(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let l = i.saturating_sub(3).min(n - 7);
            let xs = &self.zeta_grid[l..l + 7];
            let w = fd_weights(self.zeta_grid[i], xs, 1);
            let d: f64 = w.iter().zip(&self.fpp[l..l + 7]).map(|(a, b)| a * b).sum();
            worst = worst.max((d + 0.5 * self.f[i] * self.fpp[i]).abs());
        }
        worst
    }

    pub fn constants(&self) -> BlasiusConstants {
        BlasiusConstants {
            b0: self.b0,
            beta_bar: self.beta_bar,
            c1_fit: self.c1_fit,
            c2_fit: self.c2_fit,
            zeta_max: self.zeta_max,
            tol: self.tol,
        }
    }

    /// Writes `zeta,f,fp,fpp,fppp` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["zeta", "f", "fp", "fpp", "fppp"])?;
        for i in 0..self.len() {
            w.serialize((self.zeta_grid[i], self.f[i], self.fp[i], self.fpp[i], self.fppp[i]))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_constants_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.constants())?;
        std::fs::write(path, s + "\n")?;
        Ok(())
    }

    /// Smallest M such that f(ζ)/ζ ∈ [½, 2] for every tabulated ζ ≥ M (and in the tail).
    pub fn bracketing_threshold(&self) -> f64 {
        let mut m = 0.0;
        for i in (1..self.len()).rev() {
            let r = self.f[i] / self.zeta_grid[i];
            if !(0.5..=2.0).contains(&r) {
                m = self.zeta_grid[(i + 1).min(self.len() - 1)];
                break;
            }
        }
        m
    }
}
