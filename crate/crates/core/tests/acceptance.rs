//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use vonmises::barrier::{
    build_barrier, dominance, dominance_h_cap, dxphi_threshold, profile_h_cap, residual_check,
    ridge_verify, sharp_far_threshold, sharp_near_threshold, BarrierConstants, BarrierKind, Coefficients, Region,
    RIDGE_STATIONS, SQRT_W_MAX,
};
use vonmises::blasius::{shoot, solve_blasius, BlasiusProfile};
use vonmises::data::InitialData;
use vonmises::diagnostics::{
    a_bounds, comparison_ratio, euler_reconstruct, fit_decay, fit_tail, gaussian_tail, main_residual, onset_index, phi,
    station_rate, sup_series, y_discrepancy, Quantity,
};
use vonmises::march::{audit_trajectory, march, self_similarity_oracle, MarchConfig, Trajectory};
use vonmises::von_mises::wbar;

const X_END: f64 = 1e4;
const E: f64 = std::f64::consts::E;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Runs {
    gaussian: Trajectory,
    shift: Trajectory,
    reference: Trajectory,
}

const SHIFT_X0: f64 = 2.0;

fn gaussian_data() -> InitialData {
    InitialData::GaussianConcave { amplitude: 0.3, width: 1.5 }
}

fn shift_data() -> InitialData {
    InitialData::BlasiusShift { x0: SHIFT_X0 }
}

fn run_all(p: &BlasiusProfile) -> Runs {
    let cfg = MarchConfig { x_end: X_END, ..MarchConfig::default() };
    let grid = Arc::new(cfg.grid().expect("grid"));
    let go = |d: InitialData| {
        let w0 = d.initial_field(p, grid.clone()).expect("initial field");
        march(&cfg, w0).expect("march")
    };
    std::thread::scope(|s| {
        let g = s.spawn(|| go(gaussian_data()));
        let sh = s.spawn(|| go(shift_data()));
        let r = s.spawn(|| go(InitialData::BlasiusShift { x0: 1.0 }));
        Runs { gaussian: g.join().unwrap(), shift: sh.join().unwrap(), reference: r.join().unwrap() }
    })
}

fn datasets(r: &Runs) -> [(&'static str, &Trajectory); 2] {
    [("gaussian", &r.gaussian), ("shift", &r.shift)]
}

/// Window max over [10, x_end] against the max over the first decade [10, 100].
fn no_growth(series: &[(f64, f64)]) -> (bool, f64, f64) {
    let first = series.iter().filter(|(x, _)| (10.0..=100.0).contains(x)).map(|p| p.1).fold(0.0, f64::max);
    let all = series.iter().filter(|(x, _)| *x >= 10.0).map(|p| p.1).fold(0.0, f64::max);
    (all <= 1.1 * first, all, first)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let p = solve_blasius(12.0, 1e-10).expect("blasius");
    let secs = t0.elapsed().as_secs_f64();
    let half = shoot(p.zeta_max, p.dz / 2.0, 1e-13).expect("shoot");
    let res = p.ode_residual();
    let ok = (p.b0 - 0.332057).abs() <= 1e-4 && (half - p.b0).abs() <= 1e-8 && res <= 1e-9 && secs < 1.0;
    verdict(ok, format!("b0 = {:.10}, |b0(dz/2) - b0| = {:.2e}, ode residual {:.2e}, {:.3} s", p.b0, (half - p.b0).abs(), res, secs))
}

fn criterion_2(p: &BlasiusProfile) -> Verdict {
    let (f3, f4, f5) = p.check_origin_derivatives();
    let target = -0.5 * p.b0 * p.b0;
    let ok = f3.abs() <= 1e-6 && f4.abs() <= 1e-5 && (f5 - target).abs() <= 1e-5 && f5 < 0.0;
    verdict(ok, format!("f'''(0) = {f3:.2e}, f''''(0) = {f4:.2e}, f5(0) = {f5:.8} vs -b0^2/2 = {target:.8}"))
}

fn criterion_3(p: &BlasiusProfile) -> Verdict {
    let ok = (p.c1_fit - 0.25).abs() <= 0.01 && p.tail_fit_rms <= 0.05;
    verdict(ok, format!("c1 = {:.5}, c2 = {:.5}, rms = {:.2e}", p.c1_fit, p.c2_fit, p.tail_fit_rms))
}

fn criterion_4(p: &BlasiusProfile) -> Verdict {
    let t0 = Instant::now();
    let cfg = MarchConfig { x_end: 100.0, ..MarchConfig::default() };
    let r = self_similarity_oracle(&cfg, p).expect("oracle");
    let secs = t0.elapsed().as_secs_f64();
    let err = r.errors[0];
    let ok = err <= 1e-3 && r.dx_order >= 1.0 && r.dpsi_order >= 1.9 && secs < 30.0;
    verdict(
        ok,
        format!(
            "sup error at x = 100: {err:.2e}, dx order {:.3}, dpsi order {:.3}, {:.1} s",
            r.dx_order, r.dpsi_order, secs
        ),
    )
}

fn criterion_5(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        let rs = comparison_ratio(t, p);
        let (c0, cc0) = (rs[0].c_min, rs[0].c_max);
        let lo = rs.iter().map(|q| q.c_min).fold(f64::INFINITY, f64::min);
        let hi = rs.iter().map(|q| q.c_max).fold(0.0, f64::max);
        ok &= lo >= 0.95 * c0 && hi <= 1.05 * cc0;
        parts.push(format!("{name}: initial [{c0:.4}, {cc0:.4}], observed [{lo:.4}, {hi:.4}]"));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_6(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        let a = audit_trajectory(t, p, true);
        let worst = t
            .checkpoints
            .iter()
            .map(|c| station_rate(c).into_iter().fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= worst <= 1e-8 && a.passed();
        parts.push(format!("{name}: max dxw = {worst:.2e}, audit {}", if a.passed() { "ok" } else { "failed" }));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_7(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        let s = sup_series(t, p, Quantity::Phi);
        let weighted: Vec<(f64, f64)> = s.iter().map(|&(x, v)| (x, v * (x + 1.0).sqrt() / (x + E).ln())).collect();
        let (bounded, all, first) = no_growth(&weighted);
        let fit = fit_decay(&s, true, 10.0).expect("phi fit");
        ok &= bounded && fit.exponent >= 0.45;
        parts.push(format!(
            "{name}: weighted max {all:.3e} vs first decade {first:.3e}, exponent (with log) {:.3}",
            fit.exponent
        ));
    }
    // the shifted datum against its closed-form difference field w̄(x + x0 − 1) − w̄(x)
    let t = &r.shift;
    let exact: Vec<(f64, f64)> = t
        .checkpoints
        .iter()
        .map(|w| {
            let sup = w.grid.nodes.iter().map(|&s| (wbar(p, w.x + SHIFT_X0 - 1.0, s).w - wbar(p, w.x, s).w).abs()).fold(0.0, f64::max);
            (w.x, sup)
        })
        .collect();
    let diff = t
        .checkpoints
        .iter()
        .filter(|w| w.x >= 10.0)
        .map(|w| {
            let ph = phi(w, p);
            w.grid
                .nodes
                .iter()
                .zip(&ph)
                .map(|(&s, &v)| (v - (wbar(p, w.x + SHIFT_X0 - 1.0, s).w - wbar(p, w.x, s).w)).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let num = fit_decay(&sup_series(t, p, Quantity::Phi), false, 10.0).expect("shift fit");
    let cf = fit_decay(&exact, false, 10.0).expect("closed-form fit");
    ok &= (num.exponent - 1.0).abs() <= 0.1 && (cf.exponent - 1.0).abs() <= 0.1;
    parts.push(format!(
        "shift exponent {:.3} (closed form {:.3}), sup |phi - phi_exact| = {diff:.2e}",
        num.exponent, cf.exponent
    ));
    verdict(ok, parts.join("; "))
}

fn criterion_8(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        let mut cs = Vec::new();
        let mut failure = None;
        for w in t.checkpoints.iter().filter(|w| w.x >= 10.0) {
            match gaussian_tail(w, &phi(w, p)) {
                Ok(f) => cs.push((w.x, f.c)),
                Err(e) => {
                    failure.get_or_insert(format!("x = {:.1}: {e}", w.x));
                }
            }
        }
        let positive = cs.iter().all(|c| c.1 > 0.0);
        let jump = cs.windows(2).map(|q| ((q[1].1 - q[0].1) / q[0].1).abs()).fold(0.0, f64::max);
        ok &= failure.is_none() && positive && jump <= 0.15;
        let lo = cs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let hi = cs.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        parts.push(match failure {
            Some(f) => format!("{name}: fit failed at {f}"),
            None => format!("{name}: c in [{lo:.4}, {hi:.4}], max step change {:.1}%", 100.0 * jump),
        });
    }
    verdict(ok, parts.join("; "))
}

const RATE_WEIGHTS: [(Quantity, f64); 5] = [
    (Quantity::DxPhi, 1.0),
    (Quantity::DpsiPhi, 0.75),
    (Quantity::Dpsi2Phi, 1.0),
    (Quantity::DpsixW, 0.75),
    (Quantity::Dx2W, 0.5),
];

/// Weighted series on x ≥ 10: the onset must settle in the first half of the
/// window in ln(x+1), and the last-decade maximum stays within 1.1 × the median
/// of the series from the onset on.
fn rate_bounded(series: &[(f64, f64)]) -> (bool, String) {
    let s: Vec<(f64, f64)> = series.iter().copied().filter(|p| p.0 >= 10.0).collect();
    if s.len() < 8 {
        return (false, format!("{} stations", s.len()));
    }
    let k = onset_index(&s);
    let (lo, hi) = ((s[0].0 + 1.0).ln(), (s[s.len() - 1].0 + 1.0).ln());
    let early = (s[k].0 + 1.0).ln() <= 0.5 * (lo + hi);
    let mut window: Vec<f64> = s[k..].iter().map(|p| p.1).collect();
    let med = median(&mut window);
    let last_from = s[s.len() - 1].0 / 10.0;
    let last = s.iter().filter(|p| p.0 >= last_from).map(|p| p.1).fold(0.0, f64::max);
    (early && last <= 1.1 * med, format!("onset {:.0}, last decade {last:.2e} / median {med:.2e}", s[k].0))
}

fn criterion_9(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        for (q, e) in RATE_WEIGHTS {
            let w: Vec<(f64, f64)> = sup_series(t, p, q).into_iter().map(|(x, v)| (x, v * (x + 1.0).powf(e))).collect();
            let (pass, d) = rate_bounded(&w);
            ok &= pass;
            parts.push(format!("{name} {}: {d}{}", q.name(), if pass { "" } else { " FAIL" }));
        }
    }
    verdict(ok, parts.join("; "))
}

fn criterion_10(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in datasets(r) {
        let mut gap = Vec::new();
        let mut curv = Vec::new();
        let mut top = f64::NEG_INFINITY;
        let mut tails_ok = true;
        for w in &t.checkpoints {
            let s = (w.x + 1.0).sqrt();
            let zetas: Vec<f64> = (1..=500).map(|i| i as f64 * 0.02).collect();
            let ys: Vec<f64> = zetas.iter().map(|z| z * s).collect();
            let e = euler_reconstruct(w, p, &ys).expect("euler");
            let sup = e.u_minus_ubar.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            gap.push((w.x, sup * s / (w.x + E).ln()));
            let lo = e.d2y_u.iter().copied().fold(f64::INFINITY, f64::min);
            top = top.max(e.d2y_u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            curv.push((w.x, (-lo).max(0.0) * (w.x + 1.0)));
            if w.x >= 10.0 {
                tails_ok &= fit_tail(&zetas, &e.d2y_u).is_ok_and(|f| f.c > 0.0);
            }
        }
        let (g_ok, g_all, g_first) = no_growth(&gap);
        let (c_ok, c_all, _) = no_growth(&curv);
        let y = y_discrepancy(t, p);
        let pass = g_ok && c_ok && top <= 1e-8 && tails_ok && y.dominated;
        ok &= pass;
        parts.push(format!(
            "{name}: |u-ubar| weighted max {g_all:.3e} (first decade {g_first:.3e}), C = {c_all:.3e}, max d2y u = {top:.1e}, tails {}, envelope {}",
            if tails_ok { "ok" } else { "failed" },
            if y.dominated { "dominates" } else { "violated" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_11(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let cap = profile_h_cap(p);
    let fields: Vec<_> = datasets(r).into_iter().flat_map(|(_, t)| t.checkpoints.iter().filter(|w| w.x >= 1.0)).collect();

    // exponential tail at eps = 0.05; the symbolic part of the residual is
    // (g/X)·eps·(h²(1 − 4 eps √w) + 2√w) ≥ (g/X)·eps·h²(1 − 4 eps·1.2)
    let eps = 0.05;
    let spec = build_barrier(BarrierKind::ExpTail, p, &BarrierConstants::default().with("eps", eps)).expect("exp-tail");
    let mut margin_ok = true;
    let mut worst = f64::INFINITY;
    for w in &fields {
        let rep = residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.0, cap), 400).expect("residual");
        let xp = w.x + 1.0;
        for smp in &rep.samples {
            let g = (-eps * smp.h * smp.h).exp();
            let analytic = g / xp * eps * smp.h * smp.h * (1.0 - 4.0 * eps * SQRT_W_MAX);
            margin_ok &= smp.sqrt_w <= SQRT_W_MAX && smp.residual >= analytic * (1.0 - 1e-9);
        }
        worst = worst.min(rep.min_residual);
    }
    ok &= margin_ok && worst > 0.0;
    parts.push(format!("exp-tail: min residual {worst:.2e}, analytic margin {}", if margin_ok { "holds" } else { "violated" }));

    // sharp barrier: thresholds, then positivity on both sides of 1/N
    let (c_lo, c_hi) = datasets(r)
        .into_iter()
        .flat_map(|(_, t)| comparison_ratio(t, p))
        .fold((f64::INFINITY, 0.0f64), |(a, b), q| (a.min(q.c_min), b.max(q.c_max)));
    // λ of the damping bound on ζ ≤ k0, with k0 the ζ of the algebraic h0 = 4
    let (lam, _) = a_bounds(p, p.invert_f(4.0), c_lo, c_hi);
    let base = BarrierConstants::default().with("lambda", lam);
    let n = sharp_near_threshold(p, &base, &fields).expect("N threshold");
    let base = base.with("N", n.value);
    let b = sharp_far_threshold(p, &base, &fields).expect("B threshold");
    let consts = base.with("B", b.value);
    let sharp = build_barrier(BarrierKind::Sharp, p, &consts).expect("sharp");
    let (mut near, mut far) = (f64::INFINITY, f64::INFINITY);
    for w in &fields {
        let h_top = cap.min(w.grid.psi_max / (w.x + 1.0).sqrt());
        near = near.min(residual_check(&sharp, &Coefficients::Field(w), p, Region::new(0.0, 1.0 / n.value), 400).unwrap().min_residual);
        far = far.min(residual_check(&sharp, &Coefficients::Field(w), p, Region::new(1.0 / n.value, h_top), 400).unwrap().min_residual);
    }
    let ridges: Vec<_> = RIDGE_STATIONS.iter().flat_map(|&x| ridge_verify(&sharp, p, x)).collect();
    let ridges_ok = ridges.len() == RIDGE_STATIONS.len() && ridges.iter().all(|q| q.continuous && q.ridge);
    ok &= near > 0.0 && far > 0.0 && ridges_ok;
    parts.push(format!(
        "sharp: lambda {lam:.4}, N = {}, B = {}, min residual near {near:.2e} far {far:.2e}, ridges {}",
        n.value,
        b.value,
        if ridges_ok { "ok" } else { "failed" }
    ));

    // dominance over [10, 1e4]
    let k = dxphi_threshold(p, &BarrierConstants::default(), &fields).expect("K threshold");
    let dx_spec = build_barrier(BarrierKind::DxPhi, p, &BarrierConstants::default().with("K", k.value)).expect("dxphi");
    for (name, t) in datasets(r) {
        let d_phi = dominance(&sharp, t, p, Quantity::Phi).expect("dominance");
        let d_dx = dominance(&dx_spec, t, p, Quantity::DxPhi).expect("dominance");
        ok &= d_phi.passed && d_dx.passed;
        let last = |d: &vonmises::barrier::DominanceReport| d.series.last().map_or(f64::NAN, |q| q.c_star);
        parts.push(format!(
            "{name} dominance (h <= {:.2}): phi onset {:.0} C* end {:.2e} {}, dx-phi (K = {}) onset {:.0} C* end {:.2e} {}",
            dominance_h_cap(p),
            d_phi.onset_x,
            last(&d_phi),
            if d_phi.passed { "ok" } else { "FAIL" },
            k.value,
            d_dx.onset_x,
            last(&d_dx),
            if d_dx.passed { "ok" } else { "FAIL" }
        ));
    }

    // cos band
    let cos = build_barrier(BarrierKind::D2xwCos, p, &BarrierConstants::default()).expect("cos band");
    let reports: Vec<_> = RIDGE_STATIONS.iter().flat_map(|&x| ridge_verify(&cos, p, x)).collect();
    let cos_ok = !reports.is_empty() && reports.iter().all(|q| q.continuous && q.ridge);
    ok &= cos_ok;
    parts.push(format!("cos band: {} ridge checks {}", reports.len(), if cos_ok { "ok" } else { "failed" }));
    verdict(ok, parts.join("; "))
}

fn criterion_12(p: &BlasiusProfile, r: &Runs) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let scheme: Vec<f64> = r.reference.checkpoints.iter().map(|w| sup(main_residual(w, p))).collect();
    for (name, t) in datasets(r) {
        let mut worst = 0.0f64;
        for (w, &e) in t.checkpoints.iter().zip(&scheme) {
            let res = sup(main_residual(w, p));
            worst = worst.max(res / e.max(f64::MIN_POSITIVE));
        }
        ok &= worst <= 10.0;
        parts.push(format!("{name}: max residual / scheme error = {worst:.3}"));
    }
    verdict(ok, parts.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut p = solve_blasius(12.0, 1e-10).expect("blasius");
    p.fit_tail_constants().expect("tail fit");
    let runs = run_all(&p);
    let checks: Vec<(usize, Box<dyn Fn() -> Verdict + Sync + '_>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(|| criterion_2(&p))),
        (3, Box::new(|| criterion_3(&p))),
        (4, Box::new(|| criterion_4(&p))),
        (5, Box::new(|| criterion_5(&p, &runs))),
        (6, Box::new(|| criterion_6(&p, &runs))),
        (7, Box::new(|| criterion_7(&p, &runs))),
        (8, Box::new(|| criterion_8(&p, &runs))),
        (9, Box::new(|| criterion_9(&p, &runs))),
        (10, Box::new(|| criterion_10(&p, &runs))),
        (11, Box::new(|| criterion_11(&p, &runs))),
        (12, Box::new(|| criterion_12(&p, &runs))),
    ];
    let mut failed = 0;
    for (n, check) in &checks {
        let t0 = Instant::now();
        let v = check();
        println!(
            "criterion {n}: {} ({:.1} s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            v.detail
        );
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed in {:.1} s", checks.len() - failed, checks.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
