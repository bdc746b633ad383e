//! Von Mises coordinates (x, ψ) with ψ = ∫ u dy and w = u², the exact Blasius
//! field w̄(x, ψ) and the maps between Euler and Von Mises variables.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blasius::BlasiusProfile;
use crate::error::{Error, Result};
use crate::march::WField;
use crate::numerics::fd_weights;

/// Graded grid ψ_j = ψ_max (j/N)^γ, j = 0..N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiGrid {
    pub nodes: Vec<f64>,
    pub psi_max: f64,
    pub grading: f64,
    /// node count, N + 1
    pub n: usize,
}

impl PsiGrid {
    pub fn new(psi_max: f64, cells: usize, grading: f64) -> Result<Self> {
        if !(psi_max > 0.0) || cells < 4 {
            return Err(Error::InvalidInput(format!(
                "grid needs psi_max > 0 and at least 4 cells (got {psi_max}, {cells})"
            )));
        }
        if !(grading >= 1.0) {
            return Err(Error::InvalidInput(format!("grading {grading} must be at least 1")));
        }
        let nf = cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|j| psi_max * (j as f64 / nf).powf(grading)).collect();
        nodes[cells] = psi_max;
        Ok(Self { nodes, psi_max, grading, n: cells + 1 })
    }

    /// Grid reaching ψ_max = k √(x_end + 1).
    pub fn for_x_end(x_end: f64, k: f64, cells: usize, grading: f64) -> Result<Self> {
        Self::new(k * (x_end + 1.0).sqrt(), cells, grading)
    }

    pub fn cells(&self) -> usize {
        self.n - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityPoint {
    pub x: f64,
    pub psi: f64,
    pub h: f64,
    pub zeta: f64,
    pub y_bar: f64,
}

/// w̄ and its derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbarPoint {
    pub w: f64,
    pub dpsi: f64,
    /// ∂²_ψw̄ = −f f″/((x+1) f′), zero at the wall
    pub dpsi2: f64,
    pub dx: f64,
    pub zeta: f64,
}

pub fn similarity_coords(p: &BlasiusProfile, x: f64, psi: f64) -> SimilarityPoint {
    let s = (x + 1.0).sqrt();
    let h = psi / s;
    let zeta = p.invert_f(h);
    SimilarityPoint { x, psi, h, zeta, y_bar: s * zeta }
}

pub fn wbar(p: &BlasiusProfile, x: f64, psi: f64) -> WbarPoint {
    let s = (x + 1.0).sqrt();
    let zeta = p.invert_f(psi / s);
    let e = p.eval(zeta);
    let dpsi2 = if e.fp > 0.0 { -e.f * e.fpp / (s * s * e.fp) } else { 0.0 };
    WbarPoint { w: e.fp * e.fp, dpsi: 2.0 * e.fpp / s, dpsi2, dx: -e.f * e.fpp / (s * s), zeta }
}

/// ∂_ψ w(0⁺) from a one-sided three-point difference.
pub fn wall_slope(nodes: &[f64], values: &[f64]) -> f64 {
    let w = fd_weights(0.0, &nodes[0..3], 1);
    w[0] * values[0] + w[1] * values[1] + w[2] * values[2]
}

fn check_positive(w: &WField) -> Result<()> {
    for j in 1..w.values.len() {
        if !(w.values[j] > 0.0) {
            return Err(Error::NonPositive { node: j, value: w.values[j] });
        }
    }
    Ok(())
}

/// First cell: w ≈ s ψ, ∫ dψ/√w = 2√(ψ/s). Later cells: exact integral of the
/// linear interpolant of w, 2Δψ/(√w_a + √w_b).
fn first_cell(psi: f64, s: f64) -> f64 {
    2.0 * (psi / s).sqrt()
}

fn cell_integral(dpsi: f64, wa: f64, wb: f64) -> f64 {
    2.0 * dpsi / (wa.sqrt() + wb.sqrt())
}

/// y(ψ_j) at every node.
pub fn y_profile(w: &WField) -> Result<Vec<f64>> {
    check_positive(w)?;
    let g = &w.grid.nodes;
    let s = wall_slope(g, &w.values);
    if !(s > 0.0) {
        return Err(Error::NonPositive { node: 0, value: s });
    }
    let mut y = vec![0.0; g.len()];
    y[1] = first_cell(g[1], s);
    for j in 2..g.len() {
        y[j] = y[j - 1] + cell_integral(g[j] - g[j - 1], w.values[j - 1], w.values[j]);
    }
    Ok(y)
}

/// y(ψ) = ∫_0^ψ dψ'/√w for ψ anywhere in [0, ψ_max].
pub fn y_of_psi(w: &WField, psi: f64) -> Result<f64> {
    if psi <= 0.0 {
        return Ok(0.0);
    }
    let ys = y_profile(w)?;
    Ok(interp_y(w, &ys, psi))
}

/// Evaluate y at ψ from precomputed nodal y values.
pub fn interp_y(w: &WField, ys: &[f64], psi: f64) -> f64 {
    let g = &w.grid.nodes;
    let n = g.len();
    if psi <= 0.0 {
        return 0.0;
    }
    if psi >= g[n - 1] {
        return ys[n - 1] + (psi - g[n - 1]) / w.values[n - 1].sqrt();
    }
    let j = g.partition_point(|&v| v <= psi) - 1;
    if j == 0 {
        let s = wall_slope(g, &w.values);
        return first_cell(psi, s);
    }
    let t = (psi - g[j]) / (g[j + 1] - g[j]);
    let wm = w.values[j] + t * (w.values[j + 1] - w.values[j]);
    ys[j] + cell_integral(psi - g[j], w.values[j], wm)
}

const GL_X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_W: [f64; 4] = [0.347_854_845_137_453_8, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_8];

fn gauss4(u: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL_X.iter().zip(GL_W.iter()).map(|(x, w)| w * u(c + r * x)).sum::<f64>() * r
}

const W0_DY: f64 = 0.01;

/// Sample w₀ = u0(y(ψ))² on the grid, inverting ψ(y) = ∫_0^y u0.
pub fn w0_from_u0(u0: &dyn Fn(f64) -> f64, grid: Arc<PsiGrid>) -> Result<WField> {
    let psi_max = grid.psi_max;
    let mut ys = vec![0.0];
    let mut psis = vec![0.0];
    let mut k = 0usize;
    while *psis.last().unwrap() < psi_max {
        let a = k as f64 * W0_DY;
        let b = a + W0_DY;
        for x in GL_X.iter().chain([1.0f64].iter()) {
            let yy = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let v = u0(yy);
            if !(v > 0.0) {
                return Err(Error::InadmissibleData(format!("u0({yy}) = {v} is not positive")));
            }
        }
        let next = psis.last().unwrap() + gauss4(u0, a, b);
        ys.push(b);
        psis.push(next);
        k += 1;
        if k > 50_000_000 {
            return Err(Error::InadmissibleData("psi(y) does not reach psi_max".into()));
        }
    }
    let d0 = {
        let h = 1e-4;
        (-3.0 * u0(0.0) + 4.0 * u0(h) - u0(2.0 * h)) / (2.0 * h)
    };
    let mut values = vec![0.0; grid.n];
    for (j, &psi) in grid.nodes.iter().enumerate() {
        if psi <= 0.0 {
            continue;
        }
        let c = psis.partition_point(|&v| v <= psi).min(psis.len() - 1).max(1) - 1;
        let (a, b) = (ys[c], ys[c + 1]);
        let target = psi - psis[c];
        let (mut lo, mut hi) = (a, b);
        let mut y = if c == 0 && d0 > 0.0 {
            (2.0 * psi / d0).sqrt().clamp(a, b)
        } else {
            a + (b - a) * target / (psis[c + 1] - psis[c])
        };
        for _ in 0..100 {
            let r = gauss4(u0, a, y) - target;
            if r < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let d = u0(y);
            let mut next = y - r / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - y).abs() <= 1e-15 * (1.0 + y);
            y = next;
            if done || hi - lo <= 1e-15 * (1.0 + y) {
                break;
            }
        }
        let u = u0(y);
        values[j] = u * u;
    }
    values[0] = 0.0;
    Ok(WField::new(0.0, grid, values))
}
