//! Forward marching of ∂ₓw = √w ∂²_ψw on a graded ψ grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blasius::BlasiusProfile;
use crate::error::{Error, Result};
use crate::numerics::solve_tridiagonal;
use crate::von_mises::{wall_slope, wbar, PsiGrid};

const NEG_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 20;
const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ImplicitFrozen,
    CrankNicolsonFrozen,
    /// trapezoidal stage to x + γΔx, then BDF2; second order and L-stable
    TrBdf2Frozen,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-frozen" => Ok(Self::ImplicitFrozen),
            "crank-nicolson-frozen" => Ok(Self::CrankNicolsonFrozen),
            "tr-bdf2-frozen" => Ok(Self::TrBdf2Frozen),
            other => Err(Error::InvalidInput(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Step bookkeeping attached to a field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// last accepted substep (0 for initial data)
    pub dx: f64,
    /// sup-norm change of the final Picard refresh
    pub residual: f64,
    pub halvings: usize,
    /// ∂ₓw at this station from the discrete operator √w D²w, empty for initial data
    pub dwdx: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct WField {
    pub x: f64,
    pub grid: Arc<PsiGrid>,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl WField {
    pub fn new(x: f64, grid: Arc<PsiGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n, "field length must match the grid");
        Self { x, grid, values, meta: FieldMeta::default() }
    }

    pub fn wall_slope(&self) -> f64 {
        wall_slope(&self.grid.nodes, &self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks the pinned boundary rows and nonnegativity.
    pub fn check(&self) -> Result<()> {
        if self.values[0] != 0.0 {
            return Err(Error::InvalidInput(format!("w(0) = {} must vanish", self.values[0])));
        }
        let last = *self.values.last().unwrap();
        if (last - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("far-field value {last} is not 1")));
        }
        if let Some((j, &v)) = self.values.iter().enumerate().find(|(_, &v)| v < -NEG_TOL) {
            return Err(Error::Negativity { node: j, value: v, halvings: 0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarchConfig {
    pub x_end: f64,
    pub dx0: f64,
    /// Δx = dx0·min(x+1, step_growth)
    pub step_growth: f64,
    pub cells: usize,
    pub grading: f64,
    /// ψ_max = psi_max_factor·√(x_end+1)
    pub psi_max_factor: f64,
    pub w_floor_coeff: f64,
    pub picard_iters: usize,
    pub scheme: Scheme,
    pub checkpoint_ratio: f64,
}

impl Default for MarchConfig {
    fn default() -> Self {
        Self {
            x_end: 100.0,
            dx0: 0.01,
            step_growth: 1e6,
            cells: 4000,
            grading: 2.0,
            psi_max_factor: 10.0,
            w_floor_coeff: 1e-3,
            picard_iters: 2,
            scheme: Scheme::TrBdf2Frozen,
            checkpoint_ratio: 2f64.powf(0.25),
        }
    }
}

impl MarchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.x_end > 0.0) {
            return bad(format!("x_end = {} must be positive", self.x_end));
        }
        if !(self.dx0 > 0.0) {
            return bad(format!("dx0 = {} must be positive", self.dx0));
        }
        if self.picard_iters < 1 {
            return bad("picard_iters must be at least 1".into());
        }
        if !(self.step_growth >= 1.0) {
            return bad(format!("step_growth = {} must be at least 1", self.step_growth));
        }
        if !(self.checkpoint_ratio > 1.0) {
            return bad(format!("checkpoint_ratio = {} must exceed 1", self.checkpoint_ratio));
        }
        if !(self.psi_max_factor >= 8.0) {
            return bad(format!("psi_max_factor = {} must be at least 8", self.psi_max_factor));
        }
        if !(self.w_floor_coeff >= 0.0) {
            return bad("w_floor_coeff must be nonnegative".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PsiGrid> {
        PsiGrid::for_x_end(self.x_end, self.psi_max_factor, self.cells, self.grading)
    }

    fn step_size(&self, x: f64) -> f64 {
        self.dx0 * (x + 1.0).min(self.step_growth)
    }
}

/// Coefficients of the three-point second difference on a nonuniform grid.
fn stencil(nodes: &[f64], j: usize) -> (f64, f64) {
    let hm = nodes[j] - nodes[j - 1];
    let hp = nodes[j + 1] - nodes[j];
    (2.0 / ((hm + hp) * hm), 2.0 / ((hm + hp) * hp))
}

fn d2_at(nodes: &[f64], v: &[f64], j: usize) -> f64 {
    let (cm, cp) = stencil(nodes, j);
    cm * (v[j - 1] - v[j]) + cp * (v[j + 1] - v[j])
}

fn floor_profile(nodes: &[f64], values: &[f64], coeff: f64) -> Vec<f64> {
    let s0 = wall_slope(nodes, values).max(0.0);
    nodes.iter().map(|&p| coeff * (s0 * p).min(1.0)).collect()
}

/// √max(w, floor)·D²w at interior nodes, zero on the pinned rows.
pub fn endpoint_rate(nodes: &[f64], values: &[f64], floor_coeff: f64) -> Vec<f64> {
    let n = nodes.len();
    let floor = floor_profile(nodes, values, floor_coeff);
    (0..n)
        .map(|j| if j == 0 || j == n - 1 { 0.0 } else { values[j].max(floor[j]).max(0.0).sqrt() * d2_at(nodes, values, j) })
        .collect()
}

/// Implicit stage (I − k·a·D²)u = rhs with a = √max(base(u), floor), refreshed by
/// Picard iteration from the guess; rhs may depend on a.
struct Stage<'a> {
    nodes: &'a [f64],
    floor: &'a [f64],
    picard: usize,
}

impl Stage<'_> {
    fn solve(
        &self,
        k: f64,
        guess: &[f64],
        base: impl Fn(usize, &[f64]) -> f64,
        rhs_at: impl Fn(usize, f64) -> f64,
    ) -> Result<(Vec<f64>, f64)> {
        let g = self.nodes;
        let n = g.len();
        let mut cur = guess.to_vec();
        let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut change = 0.0;
        for _ in 0..self.picard {
            di[0] = 1.0;
            rhs[0] = 0.0;
            di[n - 1] = 1.0;
            rhs[n - 1] = 1.0;
            for j in 1..n - 1 {
                let a = base(j, &cur).max(self.floor[j]).max(0.0).sqrt();
                let (cm, cp) = stencil(g, j);
                lo[j] = -k * a * cm;
                up[j] = -k * a * cp;
                di[j] = 1.0 + k * a * (cm + cp);
                rhs[j] = rhs_at(j, a);
            }
            let next = solve_tridiagonal(&lo, &di, &up, &rhs)?;
            change = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            cur = next;
        }
        Ok((cur, change))
    }
}

/// One attempt at a single step; the inner `Err` carries the first node outside the bounds.
fn try_step(w: &WField, dx: f64, cfg: &MarchConfig) -> Result<std::result::Result<(Vec<f64>, f64), (usize, f64)>> {
    let g = &w.grid.nodes;
    let n = g.len();
    let floor = floor_profile(g, &w.values, cfg.w_floor_coeff);
    let st = Stage { nodes: g, floor: &floor, picard: cfg.picard_iters };
    let old = &w.values;
    let d2old: Vec<f64> = (0..n).map(|j| if j == 0 || j == n - 1 { 0.0 } else { d2_at(g, old, j) }).collect();
    // trapezoidal stage of length h from the old field
    let trapezoid = |h: f64| {
        st.solve(0.5 * h, old, |j, c| 0.5 * (old[j] + c[j]), |j, a| old[j] + 0.5 * h * a * d2old[j])
    };
    let (cur, change) = match cfg.scheme {
        Scheme::ImplicitFrozen => st.solve(dx, old, |j, c| c[j], |j, _| old[j])?,
        Scheme::CrankNicolsonFrozen => trapezoid(dx)?,
        Scheme::TrBdf2Frozen => {
            let (mid, _) = trapezoid(TRBDF2_GAMMA * dx)?;
            let gm = TRBDF2_GAMMA;
            let c_mid = 1.0 / (gm * (2.0 - gm));
            let c_old = (1.0 - gm).powi(2) / (gm * (2.0 - gm));
            let k = (1.0 - gm) / (2.0 - gm) * dx;
            st.solve(k, &mid, |j, c| c[j], |j, _| c_mid * mid[j] - c_old * old[j])?
        }
    };
    let lo_bound = w.min().min(0.0) - NEG_TOL;
    let hi_bound = w.max().max(1.0) + NEG_TOL;
    for (j, &v) in cur.iter().enumerate() {
        if v < -NEG_TOL || v < lo_bound || v > hi_bound {
            return Ok(Err((j, v)));
        }
    }
    Ok(Ok((cur, change)))
}

fn step_inner(w: &WField, dx: f64, cfg: &MarchConfig, depth: usize) -> Result<WField> {
    match try_step(w, dx, cfg)? {
        Ok((values, residual)) => {
            let dwdx = endpoint_rate(&w.grid.nodes, &values, cfg.w_floor_coeff);
            Ok(WField {
                x: w.x + dx,
                grid: w.grid.clone(),
                values,
                meta: FieldMeta { dx, residual, halvings: depth, dwdx },
            })
        }
        Err((node, value)) => {
            if depth >= MAX_HALVINGS {
                return Err(Error::Negativity { node, value, halvings: depth });
            }
            let half = 0.5 * dx;
            let mid = step_inner(w, half, cfg, depth + 1)?;
            let mut out = step_inner(&mid, dx - half, cfg, depth + 1)?;
            out.x = w.x + dx;
            Ok(out)
        }
    }
}

/// Advance `w` by `dx`. Rejected steps are split in halves, at most 20 levels deep.
pub fn step(w: &WField, dx: f64, cfg: &MarchConfig) -> Result<WField> {
    if !(dx > 0.0) {
        return Err(Error::InvalidInput(format!("step dx = {dx} must be positive")));
    }
    step_inner(w, dx, cfg, 0)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<WField>,
    pub grid: Arc<PsiGrid>,
    pub config: MarchConfig,
    pub steps: usize,
}

/// Checkpoint stations r^k − 1 below x_end, then x_end.
pub fn checkpoint_stations(x_end: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1;
    loop {
        let x = ratio.powi(k) - 1.0;
        if x >= x_end * (1.0 - 1e-12) {
            break;
        }
        out.push(x);
        k += 1;
    }
    out.push(x_end);
    out
}

pub fn march(cfg: &MarchConfig, w0: WField) -> Result<Trajectory> {
    cfg.validate()?;
    w0.check()?;
    let grid = w0.grid.clone();
    let stations = checkpoint_stations(cfg.x_end, cfg.checkpoint_ratio);
    let mut w = w0;
    let mut checkpoints = vec![w.clone()];
    let mut steps = 0;
    // The main sequence x_{n+1} = x_n + Δx(x_n) never lands on stations; each
    // checkpoint branches off with one partial step so refinement stays nested.
    for &target in &stations {
        loop {
            let dx = cfg.step_size(w.x);
            let gap = target - w.x;
            if gap <= 1e-12 * (1.0 + target) {
                let mut cp = w.clone();
                cp.x = target;
                checkpoints.push(cp);
                break;
            }
            let x_n = w.x;
            let annotate = |e| Error::AtStation { x: x_n, source: Box::new(e) };
            if dx >= gap {
                let mut cp = step(&w, gap, cfg).map_err(annotate)?;
                cp.x = target;
                checkpoints.push(cp);
                break;
            }
            w = step(&w, dx, cfg).map_err(annotate)?;
            steps += 1;
        }
    }
    Ok(Trajectory { checkpoints, grid, config: cfg.clone(), steps })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MarchAudit {
    pub wall_pinned: bool,
    pub far_field_pinned: bool,
    pub nonnegative: bool,
    pub far_curvature_max: f64,
    pub far_curvature_ok: bool,
    pub wall_dxw_zero: bool,
    /// only meaningful for concave data
    pub monotone: Option<bool>,
    pub min_dpsi_w: f64,
    pub max_dxw: f64,
    pub sandwich: (f64, f64),
    pub sandwich_observed: (f64, f64),
    pub sandwich_ok: bool,
    /// slope of ln|∂ₓw| against ln ψ over the first wall nodes at the last checkpoint
    pub near_wall_exponent: Option<f64>,
}

impl MarchAudit {
    pub fn passed(&self) -> bool {
        self.wall_pinned
            && self.far_field_pinned
            && self.nonnegative
            && self.far_curvature_ok
            && self.wall_dxw_zero
            && self.monotone.unwrap_or(true)
            && self.sandwich_ok
    }
}

fn ratio_bounds(p: &BlasiusProfile, w: &WField) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (j, &s) in w.grid.nodes.iter().enumerate().skip(1) {
        let r = wbar(p, w.x, s).w;
        if r < 1e-8 {
            continue;
        }
        lo = lo.min(w.values[j] / r);
        hi = hi.max(w.values[j] / r);
    }
    (lo, hi)
}

pub fn audit_trajectory(t: &Trajectory, p: &BlasiusProfile, concave: bool) -> MarchAudit {
    let g = &t.grid.nodes;
    let n = g.len();
    let mut a = MarchAudit {
        wall_pinned: true,
        far_field_pinned: true,
        nonnegative: true,
        wall_dxw_zero: true,
        min_dpsi_w: f64::INFINITY,
        max_dxw: f64::NEG_INFINITY,
        ..Default::default()
    };
    let (c, cc) = ratio_bounds(p, &t.checkpoints[0]);
    a.sandwich = (c, cc);
    let mut obs = (f64::INFINITY, 0.0f64);
    for cp in &t.checkpoints {
        a.wall_pinned &= cp.values[0] == 0.0;
        a.far_field_pinned &= (cp.values[n - 1] - 1.0).abs() <= 1e-12;
        a.nonnegative &= cp.values.iter().all(|&v| v >= -NEG_TOL);
        a.far_curvature_max = a.far_curvature_max.max(d2_at(g, &cp.values, n - 2).abs());
        if let Some(&d0) = cp.meta.dwdx.first() {
            a.wall_dxw_zero &= d0 == 0.0;
        }
        for j in 0..n - 1 {
            a.min_dpsi_w = a.min_dpsi_w.min((cp.values[j + 1] - cp.values[j]) / (g[j + 1] - g[j]));
        }
        for &d in &cp.meta.dwdx {
            a.max_dxw = a.max_dxw.max(d);
        }
        let (lo, hi) = ratio_bounds(p, cp);
        obs = (obs.0.min(lo), obs.1.max(hi));
    }
    a.far_curvature_ok = a.far_curvature_max < 1e-10;
    a.sandwich_observed = obs;
    a.sandwich_ok = obs.0 >= 0.95 * c && obs.1 <= 1.05 * cc;
    if concave {
        a.monotone = Some(a.min_dpsi_w >= -1e-10);
    }
    a.near_wall_exponent = t.checkpoints.last().and_then(|cp| near_wall_exponent(cp));
    a
}

fn near_wall_exponent(w: &WField) -> Option<f64> {
    let g = &w.grid.nodes;
    let pts: Vec<(f64, f64)> = (1..12.min(g.len() - 1))
        .filter_map(|j| {
            let d = *w.meta.dwdx.get(j)?;
            (d != 0.0).then(|| (g[j].ln(), d.abs().ln()))
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(num / den)
}

#[derive(Serialize)]
struct Manifest<'a> {
    x: Vec<f64>,
    files: Vec<String>,
    config: &'a MarchConfig,
    steps: usize,
    audit: Option<&'a MarchAudit>,
}

impl Trajectory {
    pub fn final_field(&self) -> &WField {
        self.checkpoints.last().unwrap()
    }

    pub fn write_checkpoints(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.write_checkpoints_with_audit(dir, None)
    }

    /// One `psi,w` CSV per checkpoint plus `manifest.json`.
    pub fn write_checkpoints_with_audit(&self, dir: &Path, audit: Option<&MarchAudit>) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut names = Vec::new();
        for (k, cp) in self.checkpoints.iter().enumerate() {
            let name = format!("cp_{k:03}.csv");
            let path = dir.join(&name);
            let mut wr = csv::Writer::from_path(&path)?;
            wr.write_record(["psi", "w"])?;
            for (s, v) in cp.grid.nodes.iter().zip(&cp.values) {
                wr.write_record([format!("{s:.17e}"), format!("{v:.17e}")])?;
            }
            wr.flush()?;
            names.push(name);
            files.push(path);
        }
        let manifest = Manifest {
            x: self.checkpoints.iter().map(|c| c.x).collect(),
            files: names,
            config: &self.config,
            steps: self.steps,
            audit,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        files.push(path);
        Ok(files)
    }
}

pub fn blasius_initial(p: &BlasiusProfile, grid: Arc<PsiGrid>) -> WField {
    let values = grid.nodes.iter().map(|&s| wbar(p, 0.0, s).w).collect();
    WField::new(0.0, grid, values)
}

pub fn sup_error_vs_wbar(p: &BlasiusProfile, w: &WField) -> f64 {
    w.grid.nodes.iter().zip(&w.values).map(|(&s, &v)| (v - wbar(p, w.x, s).w).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub x_end: f64,
    pub cells: Vec<usize>,
    pub dx0: Vec<f64>,
    /// sup error against w̄ at x_end for (N, dx), (2N, dx/2), (4N, dx/4)
    pub errors: Vec<f64>,
    pub initial_errors: Vec<f64>,
    pub combined_ratio: f64,
    pub combined_order: f64,
    pub monotone: bool,
    /// Richardson order in Δx at fixed 2N nodes
    pub dx_order: f64,
    /// Richardson order in Δψ at fixed dx/4
    pub dpsi_order: f64,
}

fn sup_diff_on(a: &WField, b: &WField, stride: usize) -> f64 {
    (0..a.values.len()).map(|j| (a.values[j] - b.values[j * stride]).abs()).fold(0.0, f64::max)
}

/// Blasius-initialized marches at three resolutions.
pub fn self_similarity_oracle(cfg: &MarchConfig, p: &BlasiusProfile) -> Result<ConvergenceReport> {
    let run = |cells: usize, dx0: f64| -> Result<WField> {
        let c = MarchConfig { cells, dx0, ..cfg.clone() };
        let g = Arc::new(c.grid()?);
        Ok(march(&c, blasius_initial(p, g))?.final_field().clone())
    };
    let n = cfg.cells;
    let levels = [(n, cfg.dx0), (2 * n, cfg.dx0 / 2.0), (4 * n, cfg.dx0 / 4.0)];
    let mut errors = Vec::new();
    let mut initial_errors = Vec::new();
    for &(c, d) in &levels {
        let conf = MarchConfig { cells: c, dx0: d, ..cfg.clone() };
        let g = Arc::new(conf.grid()?);
        let w0 = blasius_initial(p, g);
        initial_errors.push(sup_error_vs_wbar(p, &w0));
        errors.push(sup_error_vs_wbar(p, march(&conf, w0)?.final_field()));
    }
    let combined_ratio = errors[1] / errors[2];
    let combined_order = (errors[0] / errors[1]).log2().min(combined_ratio.log2());

    let fine_dx = cfg.dx0 / 4.0;
    let a = run(n, fine_dx)?;
    let b = run(2 * n, fine_dx)?;
    let c = run(4 * n, fine_dx)?;
    let dpsi_order = (sup_diff_on(&a, &b, 2) / sup_diff_on(&b, &c, 2)).log2();

    let mid_n = 2 * n;
    let a = run(mid_n, cfg.dx0)?;
    let b = run(mid_n, cfg.dx0 / 2.0)?;
    let c = run(mid_n, cfg.dx0 / 4.0)?;
    let dx_order = (sup_diff_on(&a, &b, 1) / sup_diff_on(&b, &c, 1)).log2();

    Ok(ConvergenceReport {
        x_end: cfg.x_end,
        cells: levels.iter().map(|l| l.0).collect(),
        dx0: levels.iter().map(|l| l.1).collect(),
        monotone: errors.windows(2).all(|w| w[1] < w[0]),
        errors,
        initial_errors,
        combined_ratio,
        combined_order,
        dx_order,
        dpsi_order,
    })
}
