use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use vonmises::barrier::*;
use vonmises::blasius::{solve_blasius, BlasiusProfile};
use vonmises::data::InitialData;
use vonmises::diagnostics::{a_bounds, Quantity};
use vonmises::march::{blasius_initial, march, MarchConfig, Trajectory, WField};
use vonmises::von_mises::{wbar, PsiGrid};

fn prof() -> &'static BlasiusProfile {
    static P: OnceLock<BlasiusProfile> = OnceLock::new();
    P.get_or_init(|| {
        let mut p = solve_blasius(12.0, 1e-10).unwrap();
        p.fit_tail_constants().unwrap();
        p
    })
}

fn cfg() -> MarchConfig {
    MarchConfig { x_end: 1000.0, cells: 1500, ..MarchConfig::default() }
}

fn blasius_run() -> &'static Trajectory {
    static T: OnceLock<Trajectory> = OnceLock::new();
    T.get_or_init(|| {
        let c = cfg();
        let g = Arc::new(c.grid().unwrap());
        march(&c, blasius_initial(prof(), g)).unwrap()
    })
}

fn shift_run() -> &'static Trajectory {
    static T: OnceLock<Trajectory> = OnceLock::new();
    T.get_or_init(|| {
        let c = cfg();
        let g = Arc::new(c.grid().unwrap());
        let w0 = InitialData::BlasiusShift { x0: 2.0 }.initial_field(prof(), g).unwrap();
        march(&c, w0).unwrap()
    })
}

fn consts(pairs: &[(&str, f64)]) -> BarrierConstants {
    let mut c = BarrierConstants::default();
    for &(k, v) in pairs {
        c.set(k, v).unwrap();
    }
    c
}

const STATIONS: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];

#[test]
fn sharp_pieces_meet_at_one_over_n() {
    let b = build_barrier(BarrierKind::Sharp, prof(), &consts(&[("N", 10.0)])).unwrap();
    assert_eq!(b.pieces.len(), 2);
    assert!((b.pieces[0].h_hi - 0.1).abs() < 1e-15);
    assert_eq!(b.pieces[1].h_lo, b.pieces[0].h_hi);
    assert_eq!(b.ridges, vec![0.1]);
    for &x in &STATIONS {
        let r = ridge_verify(&b, prof(), x);
        assert_eq!(r.len(), 1);
        assert!(r[0].mismatch <= 1e-10 * r[0].scale, "{r:?}");
        assert!(r[0].left_slope > r[0].right_slope);
        assert!(r[0].right_slope < 0.0);
    }
}

#[test]
fn sharp_far_piece_is_scaled_dpsi_wbar() {
    let p = prof();
    let b = build_barrier(BarrierKind::Sharp, p, &consts(&[("N", 10.0), ("C", 3.0)])).unwrap();
    // b0 of the barrier is 2 f''(zeta0) with f(zeta0) = 1/N
    let z0 = p.invert_f(0.1);
    let b0 = 2.0 * p.eval(z0).fpp;
    for &x in &[0.0, 5.0, 300.0] {
        let s = (x + 1.0_f64).sqrt();
        for &h in &[0.1, 0.3, 1.0, 2.5, 6.0] {
            let psi = h * s;
            let expect = 3.0 / b0 * wbar(p, x, psi).dpsi;
            let (g, _) = eval_parts(&b, p, x, psi);
            assert!((g - expect).abs() <= 1e-12 * expect.abs().max(1e-300), "x={x} h={h} {g} {expect}");
        }
        assert_eq!(eval_barrier(&b, p, x, 0.0), 0.0);
    }
}

#[test]
fn exp_tail_single_piece_and_side_condition() {
    let b = build_barrier(BarrierKind::ExpTail, prof(), &consts(&[("eps", 0.1)])).unwrap();
    assert_eq!(b.pieces.len(), 1);
    assert!(b.ridges.is_empty());
    assert!(ridge_verify(&b, prof(), 10.0).is_empty());
    // 1/(4 * 1.2) = 0.2083...
    match build_barrier(BarrierKind::ExpTail, prof(), &consts(&[("eps", 0.21)])) {
        Err(vonmises::Error::BarrierConstants(m)) => assert!(m.contains("eps"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn side_conditions_are_named() {
    let p = prof();
    let bad = [
        (BarrierKind::Sharp, vec![("alpha", 1.0)], "alpha"),
        (BarrierKind::Sharp, vec![("alpha", 0.0)], "alpha"),
        (BarrierKind::D2xwCos, vec![("h1", 50.0)], "h1"),
        (BarrierKind::D2xwAlg, vec![("alpha", 0.2)], "alpha"),
        (BarrierKind::D2xwAlg, vec![("h0", 1.5)], "h0"),
        (BarrierKind::Algebraic, vec![("lambda", 1.2)], "lambda"),
        (BarrierKind::Algebraic, vec![("M", 2.0), ("h0", 0.25)], "h0"),
    ];
    for (kind, c, name) in bad {
        match build_barrier(kind, p, &consts(&c)) {
            Err(vonmises::Error::BarrierConstants(m)) => assert!(m.contains(name), "{kind:?}: {m}"),
            other => panic!("{kind:?} {other:?}"),
        }
    }
    assert!(BarrierConstants::default().set("Q", 1.0).is_err());
}

#[test]
fn cos_band_pieces_and_ridges() {
    let b = build_barrier(BarrierKind::D2xwCos, prof(), &consts(&[("h1", 101.0), ("eps", 1e-3)])).unwrap();
    assert_eq!(b.pieces.len(), 3);
    let left = 101.0 - 1.5 * std::f64::consts::PI;
    assert!((b.ridges[0] - left).abs() < 1e-12);
    assert_eq!(b.ridges[1], 101.0);
    for &x in &STATIONS {
        let s = (x + 1.0_f64).sqrt();
        // zero below the band
        assert_eq!(eval_barrier(&b, prof(), x, 50.0 * s), 0.0);
        // cos(h - h1) reaches its minimum -1 at h1 - pi
        let v = eval_barrier(&b, prof(), x, (101.0 - std::f64::consts::PI) * s);
        assert!((v + (x + 1.0).powi(-2)).abs() < 1e-15);
        for r in ridge_verify(&b, prof(), x) {
            assert!(r.mismatch <= 1e-10 * (x + 1.0).powi(-2), "{r:?}");
            assert!(r.left_slope > r.right_slope, "{r:?}");
        }
    }
}

#[test]
fn every_kind_covers_the_half_line() {
    let p = prof();
    for kind in BarrierKind::ALL {
        let b = build_barrier(kind, p, &BarrierConstants::default()).unwrap();
        assert_eq!(b.pieces[0].h_lo, 0.0);
        assert_eq!(b.pieces.last().unwrap().h_hi, f64::INFINITY);
        for w in b.pieces.windows(2) {
            assert_eq!(w[0].h_hi, w[1].h_lo);
            assert!(b.ridges.contains(&w[0].h_hi), "{kind:?}");
        }
        for &x in &STATIONS {
            for r in ridge_verify(&b, p, x) {
                assert!(r.mismatch <= 1e-10 * r.scale, "{kind:?} {r:?}");
                assert!(r.left_slope > r.right_slope, "{kind:?} {r:?}");
            }
        }
    }
}

#[test]
fn small_h_matches_scaled_wbar_inside() {
    let p = prof();
    let b = build_barrier(BarrierKind::SmallH, p, &consts(&[("M", 4.0), ("alpha", 0.1), ("C", 1.0)])).unwrap();
    let b1 = p.eval(p.invert_f(0.25)).fp.powi(2);
    let x = 9.0;
    let s = 10.0_f64.sqrt();
    let v = eval_barrier(&b, p, x, 0.1 * s);
    let expect = 10f64.powf(-0.1) * wbar(p, x, 0.1 * s).w / b1;
    assert!((v - expect).abs() < 1e-12 * expect);
    assert!((eval_barrier(&b, p, x, 2.0 * s) - 10f64.powf(-0.1)).abs() < 1e-15);
}

fn scaled_field(x: f64, grid: &Arc<PsiGrid>, c: impl Fn(f64) -> f64) -> WField {
    let p = prof();
    WField::new(x, grid.clone(), grid.nodes.iter().map(|&s| c(s) * wbar(p, x, s).w).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    // any w with sqrt(w) <= 1.2 leaves the exp-tail residual above the symbolic part
    #[test]
    fn exp_tail_residual_positive_for_bounded_w(x in 0.5f64..500.0, lo in 0.5f64..1.0, hi in 1.0f64..1.44, k in 0.2f64..3.0) {
        let p = prof();
        let grid = Arc::new(PsiGrid::new(10.0 * (x + 1.0).sqrt(), 600, 2.0).unwrap());
        let w = scaled_field(x, &grid, |s| lo + (hi - lo) * (0.5 + 0.5 * (k * s).sin()));
        let b = build_barrier(BarrierKind::ExpTail, p, &consts(&[("eps", 0.05)])).unwrap();
        let r = residual_check(&b, &Coefficients::Field(&w), p, Region::new(0.0, 9.0), 400).unwrap();
        prop_assert!(r.min_residual > 0.0, "{r:?}");
        for smp in &r.samples {
            let xp = x + 1.0;
            let psi = smp.h * xp.sqrt();
            let rw = smp.sqrt_w;
            let sym = 0.05 * psi * psi / (xp * xp) * (1.0 - 0.2 * rw) + 0.1 * rw / xp;
            let g = (-0.05 * psi * psi / xp).exp();
            // residual = g * (sym + A) with A >= 0
            prop_assert!(smp.residual >= g * sym * (1.0 - 1e-12) - 1e-300);
            prop_assert!((smp.residual - g * (sym + smp.a)).abs() <= 1e-10 * g * (sym + smp.a));
        }
    }
}

#[test]
fn algebraic_far_piece_threshold() {
    let p = prof();
    let t = blasius_run();
    let fields: Vec<&WField> = t.checkpoints.iter().filter(|w| w.x > 0.0).collect();
    let base = consts(&[("lambda", 0.05), ("M", 4.0)]);
    let th = algebraic_far_threshold(p, &base, &fields).unwrap();
    // symbolic: 1 - sqrt(w)(2+2l)(3+2l)/h^2 > 0 with sqrt(w) <= 1 needs h0^2 > 6.51
    assert_eq!(th.value, 4.0, "{th:?}");
    assert!(th.tested.iter().any(|&(v, ok)| v == 2.0 && !ok));
    let spec = build_barrier(BarrierKind::Algebraic, p, &consts(&[("lambda", 0.05), ("M", 4.0), ("h0", 4.0)])).unwrap();
    for w in &fields {
        let r = residual_check(&spec, &Coefficients::Field(w), p, Region::new(4.0, 12.0), 300).unwrap();
        assert!(r.min_residual > 0.0);
    }
}

#[test]
fn sharp_near_threshold_beats_symbolic_bound() {
    let p = prof();
    let t = shift_run();
    let fields: Vec<&WField> = t.checkpoints.iter().filter(|w| w.x > 0.0).collect();
    let base = consts(&[("alpha", 0.5), ("B", 1.0), ("lambda", 0.05)]);
    let th = sharp_near_threshold(p, &base, &fields).unwrap();
    // sufficient condition from the principal part alone:
    // -1/2 - (1-alpha)/2 + (1-alpha) alpha sqrt(w)(x+1)/psi^2 > 0 on h < 1/N
    let mut need = 1.0;
    'outer: loop {
        for w in &fields {
            let s = (w.x + 1.0).sqrt();
            for j in 1..w.grid.n {
                let h = w.grid.nodes[j] / s;
                if h >= 1.0 / need {
                    break;
                }
                let v = -0.75 + 0.25 * w.values[j].sqrt() / (h * h);
                if v <= 0.0 {
                    need *= 2.0;
                    continue 'outer;
                }
            }
        }
        break;
    }
    assert!(th.value <= need, "{th:?} symbolic {need}");
    let spec = build_barrier(BarrierKind::Sharp, p, &base.with("N", th.value)).unwrap();
    for w in &fields {
        let r = residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.0, 1.0 / th.value), 400).unwrap();
        assert!(r.min_residual > 0.0, "{r:?}");
    }
}

#[test]
fn sharp_far_threshold_and_refinement() {
    let p = prof();
    let t = shift_run();
    let fields: Vec<&WField> = t.checkpoints.iter().filter(|w| w.x >= 1.0).collect();
    let base = consts(&[("alpha", 0.5), ("N", 8.0), ("lambda", 0.05)]);
    let th = sharp_far_threshold(p, &base, &fields).unwrap();
    assert!(th.value >= 1.0 && th.value.is_finite());
    let spec = build_barrier(BarrierKind::Sharp, p, &base.with("B", th.value)).unwrap();
    let region = Region::new(1.0 / 8.0, profile_h_cap(p));
    for w in &fields {
        let a = residual_check(&spec, &Coefficients::Field(w), p, region, 300).unwrap();
        let b = residual_check(&spec, &Coefficients::Field(w), p, region, 600).unwrap();
        assert!(a.min_residual > 0.0 && b.min_residual > 0.0, "x={} {} {}", w.x, a.min_residual, b.min_residual);
    }
}

#[test]
fn region_with_ridge_is_rejected() {
    let p = prof();
    let spec = build_barrier(BarrierKind::Sharp, p, &consts(&[("N", 10.0)])).unwrap();
    let w = &blasius_run().checkpoints[5];
    match residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.05, 0.5), 100) {
        Err(vonmises::Error::RegionHasRidge(r)) => assert_eq!(r, 0.1),
        other => panic!("{other:?}"),
    }
    // touching the ridge at an end point is fine
    assert!(residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.1, 0.5), 100).is_ok());
}

#[test]
fn bracket_mode_agrees_with_field_mode_on_reference() {
    let p = prof();
    let spec = build_barrier(BarrierKind::ExpTail, p, &consts(&[("eps", 0.05)])).unwrap();
    let w = blasius_run().checkpoints.iter().find(|w| w.x > 9.0).unwrap();
    let f = residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.0, 8.0), 200).unwrap();
    let b = residual_check(&spec, &Coefficients::Bracket { x: w.x, c_min: 1.0, c_max: 1.0 }, p, Region::new(0.0, 8.0), 200)
        .unwrap();
    assert!((f.min_residual - b.min_residual).abs() < 1e-6 * b.min_residual.abs());
}

#[test]
fn dominance_of_phi_blasius_is_scheme_error() {
    let p = prof();
    let spec = build_barrier(BarrierKind::Sharp, p, &consts(&[("N", 8.0), ("B", 1.0), ("lambda", 0.05)])).unwrap();
    let b = dominance(&spec, blasius_run(), p, Quantity::Phi).unwrap();
    let s = dominance(&spec, shift_run(), p, Quantity::Phi).unwrap();
    // no perturbation: what is left is scheme error, far below a genuine one
    for (pb, ps) in b.series.iter().zip(&s.series) {
        assert_eq!(pb.x, ps.x);
        assert!(pb.c_star < 0.2 * ps.c_star, "{pb:?} {ps:?}");
    }
}

#[test]
fn dominance_of_shift_is_bounded() {
    let p = prof();
    let t = shift_run();
    let (lam, _) = a_bounds(p, 5.0, 0.9, 1.1);
    let spec =
        build_barrier(BarrierKind::Sharp, p, &consts(&[("N", 8.0), ("B", 4.0), ("lambda", lam.min(0.5))])).unwrap();
    let d = dominance(&spec, t, p, Quantity::Phi).unwrap();
    assert!(d.impossible.is_none());
    assert!(d.series.len() >= 10);
    assert!(d.passed, "{d:?}");
    let spec = build_barrier(BarrierKind::DxPhi, p, &consts(&[("K", 2.0), ("eps", 0.05)])).unwrap();
    let d = dominance(&spec, t, p, Quantity::DxPhi).unwrap();
    assert!(d.passed, "{d:?}");
}

#[test]
fn certificate_serializes_expected_keys() {
    let p = prof();
    let spec = build_barrier(BarrierKind::ExpTail, p, &consts(&[("eps", 0.05)])).unwrap();
    let w = &blasius_run().checkpoints[10];
    let r = residual_check(&spec, &Coefficients::Field(w), p, Region::new(0.0, 8.0), 50).unwrap();
    let cert = Certificate::new(&spec, p, vec![r], None);
    let v = serde_json::to_value(&cert).unwrap();
    for key in ["kind", "constants", "region", "min_residual", "grid_density", "ridge_report", "dominance_series"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["kind"], "exp-tail");
}
