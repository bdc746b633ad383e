//! Runs the selected workflow and writes every artifact under the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use vonmises::barrier::{
    algebraic_far_threshold, build_barrier, dominance, dxphi_threshold, profile_h_cap, residual_check,
    sharp_far_threshold, sharp_near_threshold, small_h_threshold, BarrierConstants, BarrierKind, Certificate,
    Coefficients, Region, ResidualReport, Threshold,
};
use vonmises::blasius::{solve_blasius, BlasiusConstants, BlasiusProfile};
use vonmises::data::{AdmissibilityReport, InitialData};
use vonmises::diagnostics::{
    a_bounds, comparison_ratio, euler_reconstruct, fit_decay, fit_tail, gaussian_tail, phi, sup_series,
    y_discrepancy, DecayFit, Quantity, TailFit, YDiscrepancy,
};
use vonmises::march::{audit_trajectory, march, self_similarity_oracle, ConvergenceReport, MarchAudit, MarchConfig, Trajectory, WField};
use vonmises::von_mises::wbar;

use crate::config::{DataSpec, RunConfig};
use crate::error::{io_at, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn gate(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Gate {
    Gate { name: name.into(), passed, detail: detail.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlasiusReport {
    pub constants: BlasiusConstants,
    pub ode_residual: f64,
    pub tail_fit_rms: f64,
    /// f‴(0), f⁗(0), f⁽⁵⁾(0)
    pub origin_derivatives: (f64, f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct MarchReport {
    pub steps: usize,
    pub checkpoints: usize,
    pub x_end: f64,
    pub audit: MarchAudit,
}

/// A fit that may legitimately fail on short or noisy data.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted<T> {
    Ok(T),
    Failed(String),
}

impl<T> From<vonmises::Result<T>> for Fitted<T> {
    fn from(r: vonmises::Result<T>) -> Self {
        match r {
            Ok(v) => Fitted::Ok(v),
            Err(e) => Fitted::Failed(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantityFit {
    pub quantity: Quantity,
    pub with_log: Fitted<DecayFit>,
    pub without_log: Fitted<DecayFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftOracle {
    pub x0: f64,
    /// exponent of sup|φ| without the log factor
    pub numerical: Fitted<DecayFit>,
    /// same fit for the closed form w̄(x + x0 − 1, ψ) − w̄(x, ψ)
    pub closed_form: Fitted<DecayFit>,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub decay: Vec<QuantityFit>,
    pub shift_oracle: Option<ShiftOracle>,
    pub phi_tail_range: Option<(f64, f64)>,
    pub comparison_range: (f64, f64),
    pub euler_gap_fit: Fitted<DecayFit>,
    pub y_discrepancy: YDiscrepancy,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierEntry {
    pub kind: String,
    pub thresholds: Vec<Threshold>,
    pub certificate: Option<Certificate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: crate::config::Command,
    pub data: String,
    pub config: RunConfig,
    pub blasius: Option<BlasiusReport>,
    pub screen: Option<AdmissibilityReport>,
    pub march: Option<MarchReport>,
    pub convergence: Option<ConvergenceReport>,
    pub fits: Option<FitReport>,
    pub certificates: Vec<BarrierEntry>,
    pub gates: Vec<Gate>,
    pub passed: bool,
    /// every artifact except this summary, with its content hash
    pub files: Vec<FileEntry>,
}

impl Summary {
    pub fn failures(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.passed)
    }
}

/// Collects written files so that the summary can list them.
struct Out {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(io_at(root))?;
        Ok(Out { root: root.to_path_buf(), written: Vec::new() })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(io_at(dir))?;
        }
        self.written.push(p.clone());
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, serde_json::to_string_pretty(value)? + "\n").map_err(io_at(&p))
    }

    fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let p = self.path(rel)?;
        fs::write(&p, body).map_err(io_at(&p))
    }

    fn csv<R: Serialize>(&mut self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
        let p = self.path(rel)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(io_at(&p))
    }

    fn manifest(&self) -> Result<Vec<FileEntry>> {
        let mut files = self
            .written
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(io_at(p))?;
                let rel = p.strip_prefix(&self.root).unwrap_or(p);
                let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                Ok(FileEntry { path, sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64 })
            })
            .collect::<Result<Vec<_>>>()?;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        files.dedup_by(|a, b| a.path == b.path);
        Ok(files)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs `cfg.command`, writes artifacts and `summary.json` under `cfg.out`.
/// Gate failures are recorded in the summary; errors are configuration,
/// input/output or numerical failures that stop the run.
pub fn run(cfg: &RunConfig) -> Result<Summary> {
    let mut out = Out::new(&cfg.out)?;
    let data = cfg.data.load(&cfg.base_dir)?;
    let mut s = Summary {
        command: cfg.command,
        data: data.label(),
        config: cfg.clone(),
        blasius: None,
        screen: None,
        march: None,
        convergence: None,
        fits: None,
        certificates: Vec::new(),
        gates: Vec::new(),
        passed: true,
        files: Vec::new(),
    };

    let p = blasius_step(cfg, &mut out, &mut s)?;

    if cfg.command.runs_verify() {
        verify_step(cfg, &p, &mut out, &mut s)?;
    }

    if cfg.command.runs_march() {
        let screened = screen_step(cfg, &data, &p, &mut out, &mut s)?;
        if screened {
            let t = march_step(cfg, &data, &p, &mut out, &mut s)?;
            if cfg.command.runs_fit() {
                fit_step(cfg, &t, &p, &mut out, &mut s)?;
            }
            if cfg.command.runs_barrier() {
                barrier_step(cfg, &t, &p, &mut out, &mut s)?;
            }
        }
    }

    s.passed = s.gates.iter().all(|g| g.passed);
    s.files = out.manifest()?;
    let path = cfg.out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&s)? + "\n").map_err(io_at(&path))?;
    Ok(s)
}

fn blasius_step(cfg: &RunConfig, out: &mut Out, s: &mut Summary) -> Result<BlasiusProfile> {
    let mut p = solve_blasius(cfg.blasius.zeta_max, cfg.blasius.tol)?;
    p.fit_tail_constants()?;
    p.write_csv(&out.path("blasius/profile.csv")?)?;
    p.write_constants_json(&out.path("blasius/constants.json")?)?;
    let res = p.ode_residual();
    s.gates.push(gate("blasius: ODE residual", res <= 1e-9, format!("sup residual {res:.2e}, limit 1e-9")));
    s.blasius = Some(BlasiusReport {
        constants: p.constants(),
        ode_residual: res,
        tail_fit_rms: p.tail_fit_rms,
        origin_derivatives: p.check_origin_derivatives(),
    });
    Ok(p)
}

fn verify_step(cfg: &RunConfig, p: &BlasiusProfile, out: &mut Out, s: &mut Summary) -> Result<()> {
    let v = &cfg.verify;
    let mc = MarchConfig { x_end: v.x_end, ..cfg.march.clone() };
    let r = self_similarity_oracle(&mc, p)?;
    out.json("verify/convergence.json", &r)?;
    let err = r.errors[0];
    s.gates.push(gate(
        "verify: sup error against the self-similar solution",
        err <= v.max_error,
        format!("{err:.3e} at x = {}, limit {:e}", v.x_end, v.max_error),
    ));
    s.gates.push(gate(
        "verify: order in dx",
        r.dx_order >= v.min_dx_order,
        format!("{:.3}, required {}", r.dx_order, v.min_dx_order),
    ));
    s.gates.push(gate(
        "verify: order in dpsi",
        r.dpsi_order >= v.min_dpsi_order,
        format!("{:.3}, required {}", r.dpsi_order, v.min_dpsi_order),
    ));
    s.convergence = Some(r);
    Ok(())
}

fn screen_step(cfg: &RunConfig, data: &InitialData, p: &BlasiusProfile, out: &mut Out, s: &mut Summary) -> Result<bool> {
    let mut report = data.validate(p)?;
    if !cfg.audit.concavity {
        for c in report.conditions.iter_mut().filter(|c| c.name.contains("concave")) {
            c.gated = false;
        }
    }
    out.json("march/screen.json", &report)?;
    for c in report.conditions.iter().filter(|c| c.gated) {
        s.gates.push(gate(format!("screen: {}", c.name), c.passed, c.detail.clone()));
    }
    let ok = report.passed();
    s.screen = Some(report);
    Ok(ok)
}

fn march_step(cfg: &RunConfig, data: &InitialData, p: &BlasiusProfile, out: &mut Out, s: &mut Summary) -> Result<Trajectory> {
    let grid = Arc::new(cfg.march.grid()?);
    let w0 = data.initial_field(p, grid)?;
    let t = march(&cfg.march, w0)?;
    let audit = audit_trajectory(&t, p, cfg.audit.concavity);
    let dir = out.root.join("march");
    for f in t.write_checkpoints_with_audit(&dir, Some(&audit))? {
        out.written.push(f);
    }
    out.json("march/audit.json", &audit)?;

    let mut gates = vec![
        gate("audit: wall pinned", audit.wall_pinned, "w = 0 at psi = 0 on every checkpoint"),
        gate("audit: far field pinned", audit.far_field_pinned, "w = 1 at psi_max on every checkpoint"),
        gate("audit: nonnegative", audit.nonnegative, "w >= 0 on every checkpoint"),
        gate(
            "audit: far-field curvature",
            audit.far_curvature_ok,
            format!("max |D2 w| next to psi_max = {:.2e}", audit.far_curvature_max),
        ),
        gate("audit: wall dxw zero", audit.wall_dxw_zero, "stored dxw vanishes at the wall"),
        gate(
            "audit: comparison bracket",
            audit.sandwich_ok,
            format!(
                "initial [{:.4}, {:.4}], observed [{:.4}, {:.4}]",
                audit.sandwich.0, audit.sandwich.1, audit.sandwich_observed.0, audit.sandwich_observed.1
            ),
        ),
    ];
    if let Some(m) = audit.monotone {
        gates.push(gate("audit: monotone in psi", m, format!("min dpsi w = {:.3e}", audit.min_dpsi_w)));
    }
    if cfg.audit.concavity {
        gates.push(gate(
            "audit: concavity preserved (max dxw)",
            audit.max_dxw <= cfg.audit.max_dxw,
            format!("max dxw = {:.3e}, limit {:e}", audit.max_dxw, cfg.audit.max_dxw),
        ));
    }
    let mut log = format!("data: {}\nsteps: {}\ncheckpoints: {}\n", data.label(), t.steps, t.checkpoints.len());
    for g in &gates {
        log += &format!("{}: {} ({})\n", g.name, if g.passed { "ok" } else { "FAIL" }, g.detail);
    }
    if let Some(e) = audit.near_wall_exponent {
        log += &format!("near-wall exponent of dxw: {e:.4}\n");
    }
    out.text("march/audit.log", &log)?;
    s.gates.extend(gates);
    s.march = Some(MarchReport { steps: t.steps, checkpoints: t.checkpoints.len(), x_end: cfg.march.x_end, audit });
    Ok(t)
}

fn fit_step(cfg: &RunConfig, t: &Trajectory, p: &BlasiusProfile, out: &mut Out, s: &mut Summary) -> Result<()> {
    let d = &cfg.diagnostics;
    let mut rows = Vec::new();
    let mut decay = Vec::new();
    for &q in &d.quantities {
        let series = sup_series(t, p, q);
        rows.extend(series.iter().map(|&(x, v)| (q.name(), x, v)));
        decay.push(QuantityFit {
            quantity: q,
            with_log: fit_decay(&series, true, d.fit_start).into(),
            without_log: fit_decay(&series, false, d.fit_start).into(),
        });
    }
    out.csv("fit/sup_series.csv", &["quantity", "x", "sup"], rows)?;

    let shift_oracle = match cfg.data {
        DataSpec::BlasiusShift { x0 } => Some(shift_oracle(t, p, x0, d.fit_start)),
        _ => None,
    };

    let tails: Vec<(f64, Option<f64>, Option<f64>)> = t
        .checkpoints
        .iter()
        .filter(|w| w.x >= d.fit_start)
        .map(|w| match gaussian_tail(w, &phi(w, p)) {
            Ok(TailFit { c, rms, .. }) => (w.x, Some(c), Some(rms)),
            Err(_) => (w.x, None, None),
        })
        .collect();
    let cs: Vec<f64> = tails.iter().filter_map(|r| r.1).collect();
    let phi_tail_range =
        (!cs.is_empty()).then(|| (cs.iter().copied().fold(f64::INFINITY, f64::min), cs.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    out.csv("fit/phi_tail.csv", &["x", "c", "rms"], tails)?;

    let ratio = comparison_ratio(t, p);
    let comparison_range = ratio
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.c_min), b.max(r.c_max)));
    out.csv("fit/comparison_ratio.csv", &["x", "c_min", "c_max"], ratio.iter().map(|r| (r.x, r.c_min, r.c_max)))?;

    let zetas: Vec<f64> = (1..=d.euler_points).map(|k| k as f64 * d.euler_dzeta).collect();
    let mut euler_rows = Vec::new();
    let mut gap = Vec::new();
    for w in &t.checkpoints {
        let sx = (w.x + 1.0).sqrt();
        let ys: Vec<f64> = zetas.iter().map(|z| z * sx).collect();
        let e = euler_reconstruct(w, p, &ys)?;
        let sup = e.u_minus_ubar.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let lo = e.d2y_u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.d2y_u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = if w.x >= d.fit_start { fit_tail(&zetas, &e.d2y_u).ok().map(|f| f.c) } else { None };
        gap.push((w.x, sup));
        euler_rows.push((w.x, sup, lo, hi, tail));
    }
    out.csv("fit/euler.csv", &["x", "sup_u_minus_ubar", "min_d2y_u", "max_d2y_u", "d2y_u_tail_c"], euler_rows)?;

    let y = y_discrepancy(t, p);
    out.csv("fit/y_discrepancy.csv", &["x", "max_discrepancy"], y.max_disc.iter().copied())?;

    let report = FitReport {
        decay,
        shift_oracle,
        phi_tail_range,
        comparison_range,
        euler_gap_fit: fit_decay(&gap, d.with_log, d.fit_start).into(),
        y_discrepancy: y,
    };
    out.json("fit/fits.json", &report)?;
    s.fits = Some(report);
    Ok(())
}

fn shift_oracle(t: &Trajectory, p: &BlasiusProfile, x0: f64, fit_start: f64) -> ShiftOracle {
    let exact = |w: &WField, psi: f64| wbar(p, w.x + x0 - 1.0, psi).w - wbar(p, w.x, psi).w;
    let closed: Vec<(f64, f64)> = t
        .checkpoints
        .iter()
        .map(|w| (w.x, w.grid.nodes.iter().map(|&s| exact(w, s).abs()).fold(0.0, f64::max)))
        .collect();
    let max_deviation = t
        .checkpoints
        .iter()
        .filter(|w| w.x >= fit_start)
        .map(|w| {
            w.grid.nodes.iter().zip(phi(w, p)).map(|(&s, v)| (v - exact(w, s)).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    ShiftOracle {
        x0,
        numerical: fit_decay(&sup_series(t, p, Quantity::Phi), false, fit_start).into(),
        closed_form: fit_decay(&closed, false, fit_start).into(),
        max_deviation,
    }
}

fn h_top(w: &WField, cap: f64) -> f64 {
    cap.min(w.grid.psi_max / (w.x + 1.0).sqrt())
}

fn residuals(
    spec: &vonmises::barrier::BarrierSpec,
    p: &BlasiusProfile,
    fields: &[&WField],
    samples: usize,
    region: impl Fn(&WField) -> Region,
) -> vonmises::Result<Vec<ResidualReport>> {
    fields.iter().map(|w| residual_check(spec, &Coefficients::Field(w), p, region(w), samples)).collect()
}

/// Fixed constants win; missing ones are searched on the marched fields.
fn certify(
    kind: BarrierKind,
    cfg: &RunConfig,
    t: &Trajectory,
    p: &BlasiusProfile,
    fields: &[&WField],
) -> vonmises::Result<(Certificate, Vec<Threshold>)> {
    let n = cfg.barrier.samples;
    let cap = profile_h_cap(p);
    let mut consts: BarrierConstants = cfg.barrier.constants.clone();
    let mut thresholds = Vec::new();
    let mut found = |consts: &mut BarrierConstants, th: Threshold| {
        consts.set(&th.name, th.value).expect("threshold names are constant names");
        thresholds.push(th);
    };
    let (spec, res, dom) = match kind {
        BarrierKind::ExpTail | BarrierKind::D2xwCos | BarrierKind::D2xwAlg => {
            let spec = build_barrier(kind, p, &consts)?;
            let res = if kind == BarrierKind::ExpTail {
                residuals(&spec, p, fields, n, |w| Region::new(0.0, h_top(w, cap)))?
            } else {
                Vec::new()
            };
            (spec, res, None)
        }
        BarrierKind::Sharp => {
            if consts.lambda.is_none() {
                let (lo, hi) = comparison_ratio(t, p).iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.c_min), b.max(r.c_max)));
                consts.lambda = Some(a_bounds(p, p.invert_f(4.0), lo, hi).0);
            }
            if consts.n.is_none() {
                let th = sharp_near_threshold(p, &consts, fields)?;
                found(&mut consts, th);
            }
            if consts.b.is_none() {
                let th = sharp_far_threshold(p, &consts, fields)?;
                found(&mut consts, th);
            }
            let spec = build_barrier(kind, p, &consts)?;
            let cut = 1.0 / consts.n.unwrap_or(8.0);
            let mut res = residuals(&spec, p, fields, n, |_| Region::new(0.0, cut))?;
            res.extend(residuals(&spec, p, fields, n, |w| Region::new(cut, h_top(w, cap)))?);
            let dom = dominance(&spec, t, p, Quantity::Phi)?;
            (spec, res, Some(dom))
        }
        BarrierKind::DxPhi => {
            if consts.k.is_none() {
                let th = dxphi_threshold(p, &consts, fields)?;
                found(&mut consts, th);
            }
            let spec = build_barrier(kind, p, &consts)?;
            let res = residuals(&spec, p, fields, n, |w| Region::new(0.0, h_top(w, cap)))?;
            let dom = dominance(&spec, t, p, Quantity::DxPhi)?;
            (spec, res, Some(dom))
        }
        BarrierKind::Algebraic => {
            if consts.h0.is_none() {
                let th = algebraic_far_threshold(p, &consts, fields)?;
                found(&mut consts, th);
            }
            let spec = build_barrier(kind, p, &consts)?;
            let h0 = spec.constants.h0.unwrap_or(4.0);
            let res = residuals(&spec, p, fields, n, |w| Region::new(h0, (4.0 * h0).min(h_top(w, f64::INFINITY))))?;
            (spec, res, None)
        }
        BarrierKind::SmallH => {
            if consts.alpha.is_none() {
                let th = small_h_threshold(p, &consts, fields)?;
                found(&mut consts, th);
            }
            let spec = build_barrier(kind, p, &consts)?;
            let m = spec.constants.m.unwrap_or(2.0);
            let res = residuals(&spec, p, fields, n, |_| Region::new(0.0, 1.0 / m))?;
            (spec, res, None)
        }
    };
    Ok((Certificate::new(&spec, p, res, dom.as_ref()), thresholds))
}

fn barrier_step(cfg: &RunConfig, t: &Trajectory, p: &BlasiusProfile, out: &mut Out, s: &mut Summary) -> Result<()> {
    let fields: Vec<&WField> = t.checkpoints.iter().filter(|w| w.x >= 1.0).collect();
    for &kind in &cfg.barrier.kinds {
        let entry = match certify(kind, cfg, t, p, &fields) {
            Ok((c, thresholds)) => BarrierEntry { kind: kind.name().into(), thresholds, certificate: Some(c), error: None },
            Err(e) => BarrierEntry { kind: kind.name().into(), thresholds: Vec::new(), certificate: None, error: Some(e.to_string()) },
        };
        let (passed, detail) = match (&entry.certificate, &entry.error) {
            (Some(c), _) => (
                c.passed,
                format!(
                    "min residual {}, {} ridge checks, dominance {}",
                    c.min_residual.map_or("n/a".into(), |m| format!("{m:.3e}")),
                    c.ridge_report.len(),
                    c.dominance_passed.map_or("n/a", |d| if d { "ok" } else { "failed" })
                ),
            ),
            (None, Some(e)) => (false, e.clone()),
            (None, None) => unreachable!(),
        };
        out.json(&format!("barrier/{}.json", kind.name()), &entry)?;
        s.gates.push(gate(format!("barrier: {}", kind.name()), passed, detail));
        s.certificates.push(entry);
    }
    Ok(())
}
