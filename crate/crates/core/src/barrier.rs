//! Piecewise barrier functions with ridges, and their numerical certification:
//! residual positivity of the comparison operator on sampled regions, slope
//! jumps at ridges, and dominance of measured quantities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::blasius::{BlasiusPoint, BlasiusProfile};
use crate::diagnostics::{onset_index, quantity_values, station_rate, Quantity, FIT_START, NEAR_WALL_H};
use crate::error::{Error, Result};
use crate::march::{Trajectory, WField};
use crate::von_mises::wbar;

/// Bound on √w assumed by the exp-tail side condition ε < 1/(4·SQRT_W_MAX).
pub const SQRT_W_MAX: f64 = 1.2;
/// Dominance ignores nodes where the measured quantity is below this.
pub const DOMINANCE_FLOOR: f64 = 1e-12;
pub const RIDGE_STATIONS: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    ExpTail,
    Algebraic,
    Sharp,
    SmallH,
    DxPhi,
    D2xwCos,
    D2xwAlg,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 7] = [
        BarrierKind::ExpTail,
        BarrierKind::Algebraic,
        BarrierKind::Sharp,
        BarrierKind::SmallH,
        BarrierKind::DxPhi,
        BarrierKind::D2xwCos,
        BarrierKind::D2xwAlg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierKind::ExpTail => "exp-tail",
            BarrierKind::Algebraic => "algebraic",
            BarrierKind::Sharp => "sharp",
            BarrierKind::SmallH => "small-h",
            BarrierKind::DxPhi => "dxphi",
            BarrierKind::D2xwCos => "d2xw-cos",
            BarrierKind::D2xwAlg => "d2xw-alg",
        }
    }

    /// The operator whose supersolution the barrier is.
    pub fn operator(self) -> Operator {
        match self {
            BarrierKind::DxPhi => Operator::DxPhi,
            BarrierKind::D2xwCos | BarrierKind::D2xwAlg => Operator::D2xW,
            _ => Operator::Phi,
        }
    }
}

impl std::str::FromStr for BarrierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BarrierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown barrier kind '{s}'")))
    }
}

/// L = ∂ₓ − √w∂²_ψ plus the zeroth-order term of each equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// L + A, the equation for φ
    Phi,
    /// L + A − ∂ₓw/(2w), the equation for ∂ₓφ
    DxPhi,
    /// L − 3∂ₓw/(2w), the equation for ∂²ₓw
    D2xW,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BarrierConstants {
    #[serde(rename = "C", skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none", default)]
    pub m: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h1: Option<f64>,
}

impl BarrierConstants {
    pub const NAMES: [&'static str; 10] = ["C", "B", "K", "lambda", "eps", "alpha", "M", "N", "h0", "h1"];

    fn slot(&mut self, name: &str) -> Option<&mut Option<f64>> {
        Some(match name {
            "C" => &mut self.c,
            "B" => &mut self.b,
            "K" => &mut self.k,
            "lambda" => &mut self.lambda,
            "eps" => &mut self.eps,
            "alpha" => &mut self.alpha,
            "M" => &mut self.m,
            "N" => &mut self.n,
            "h0" => &mut self.h0,
            "h1" => &mut self.h1,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.slot(name) {
            Some(s) => {
                *s = Some(value);
                Ok(())
            }
            None => Err(Error::InvalidInput(format!(
                "unknown barrier constant '{name}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Copy with one constant replaced.
    ///
    /// # Panics
    /// If `name` is not one of [`BarrierConstants::NAMES`].
    pub fn with(&self, name: &str, value: f64) -> Self {
        let mut c = self.clone();
        c.set(name, value).expect("known constant name");
        c
    }

    /// Missing constants filled with the defaults of `kind`; constants the kind
    /// does not use are dropped.
    pub fn resolved(&self, kind: BarrierKind) -> Self {
        let d = |v: Option<f64>, def: f64| Some(v.unwrap_or(def));
        let c = d(self.c, 1.0);
        match kind {
            BarrierKind::ExpTail => Self { c, eps: d(self.eps, 0.05), ..Self::default() },
            BarrierKind::Algebraic => Self {
                c,
                lambda: d(self.lambda, 0.1),
                m: d(self.m, 4.0),
                h0: d(self.h0, 4.0),
                ..Self::default()
            },
            BarrierKind::Sharp => Self {
                c,
                alpha: d(self.alpha, 0.5),
                n: d(self.n, 8.0),
                b: d(self.b, 1.0),
                lambda: d(self.lambda, 0.1),
                ..Self::default()
            },
            BarrierKind::SmallH => Self { c, alpha: d(self.alpha, 0.1), m: d(self.m, 2.0), ..Self::default() },
            BarrierKind::DxPhi => Self { c, k: d(self.k, 1.0), eps: d(self.eps, 0.05), ..Self::default() },
            BarrierKind::D2xwCos => Self { c, h1: d(self.h1, 101.0), eps: d(self.eps, 1e-3), ..Self::default() },
            BarrierKind::D2xwAlg => Self {
                c,
                alpha: d(self.alpha, 0.1),
                h0: d(self.h0, 0.5),
                h1: d(self.h1, 4.0),
                eps: d(self.eps, 0.05),
                ..Self::default()
            },
        }
    }
}

/// Profile-based shapes G(ζ) of a piece c·X^a·G(ζ), with h = f(ζ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// f″, proportional to ∂_ψw̄
    Fpp,
    /// f′², that is w̄
    FpSquared,
    /// f f″, proportional to −∂ₓw̄
    FFpp,
}

impl Shape {
    /// (G, G′, G″) in ζ, with f‴ and f⁗ from the Blasius equation.
    fn eval(self, e: &BlasiusPoint) -> (f64, f64, f64) {
        let (f, f1, f2) = (e.f, e.fp, e.fpp);
        let f3 = -0.5 * f * f2;
        let f4 = -0.5 * (f1 * f2 + f * f3);
        match self {
            Shape::Fpp => (f2, f3, f4),
            Shape::FpSquared => (f1 * f1, 2.0 * f1 * f2, 2.0 * f2 * f2 + 2.0 * f1 * f3),
            Shape::FFpp => (f * f2, f1 * f2 + f * f3, f2 * f2 + 2.0 * f1 * f3 + f * f4),
        }
    }
}

/// Formulas in X = x + 1 and h = ψ/√X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum Formula {
    Zero,
    /// c·X^a·h^b
    Power { coef: f64, x_pow: f64, h_pow: f64 },
    /// c·X^a·e^{−ε h²}
    Gauss { coef: f64, x_pow: f64, eps: f64 },
    /// c·X^a·cos(h − h1)
    Cos { coef: f64, x_pow: f64, h1: f64 },
    /// c·X^a·G(ζ)
    Profile { coef: f64, x_pow: f64, shape: Shape },
}

/// Value and derivatives of one piece at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PieceJet {
    pub value: f64,
    /// ∂ₓ at fixed ψ
    pub dx: f64,
    pub dpsi2: f64,
    /// ∂_h at fixed x
    pub dh: f64,
}

impl Formula {
    fn jet(&self, p: &BlasiusProfile, xp: f64, h: f64) -> PieceJet {
        match *self {
            Formula::Zero => PieceJet { value: 0.0, dx: 0.0, dpsi2: 0.0, dh: 0.0 },
            Formula::Power { coef, x_pow, h_pow } => {
                let v = coef * xp.powf(x_pow) * h.powf(h_pow);
                let (dpsi2, dh) = if h_pow == 0.0 {
                    (0.0, 0.0)
                } else {
                    (h_pow * (h_pow - 1.0) * v / (h * h * xp), h_pow * v / h)
                };
                PieceJet { value: v, dx: (x_pow - 0.5 * h_pow) * v / xp, dpsi2, dh }
            }
            Formula::Gauss { coef, x_pow, eps } => {
                let v = coef * xp.powf(x_pow) * (-eps * h * h).exp();
                PieceJet {
                    value: v,
                    dx: v * (x_pow + eps * h * h) / xp,
                    dpsi2: v * (4.0 * eps * eps * h * h - 2.0 * eps) / xp,
                    dh: -2.0 * eps * h * v,
                }
            }
            Formula::Cos { coef, x_pow, h1 } => {
                let a = coef * xp.powf(x_pow);
                let (c, s) = ((h - h1).cos(), (h - h1).sin());
                PieceJet { value: a * c, dx: a * (x_pow * c + 0.5 * h * s) / xp, dpsi2: -a * c / xp, dh: -a * s }
            }
            Formula::Profile { coef, x_pow, shape } => {
                let e = p.eval(p.invert_f(h));
                let (g, g1, g2) = shape.eval(&e);
                let a = coef * xp.powf(x_pow);
                if e.fp <= 0.0 {
                    return PieceJet { value: a * g, dx: a * x_pow * g / xp, dpsi2: 0.0, dh: 0.0 };
                }
                PieceJet {
                    value: a * g,
                    dx: a * (x_pow * g - g1 * e.f / (2.0 * e.fp)) / xp,
                    dpsi2: a * (g2 * e.fp - g1 * e.fpp) / (e.fp.powi(3) * xp),
                    dh: a * g1 / e.fp,
                }
            }
        }
    }

    fn amplitude(&self, xp: f64) -> f64 {
        match *self {
            Formula::Zero => 0.0,
            Formula::Power { coef, x_pow, .. }
            | Formula::Gauss { coef, x_pow, .. }
            | Formula::Cos { coef, x_pow, .. }
            | Formula::Profile { coef, x_pow, .. } => coef.abs() * xp.powf(x_pow),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub h_lo: f64,
    pub h_hi: f64,
    pub formula: Formula,
}

/// Factor m(x) = e^{−coef·X^{−rate}} multiplying every piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum Multiplier {
    One,
    ExpDecay { coef: f64, rate: f64 },
}

impl Multiplier {
    pub fn ln(&self, xp: f64) -> f64 {
        match *self {
            Multiplier::One => 0.0,
            Multiplier::ExpDecay { coef, rate } => -coef * xp.powf(-rate),
        }
    }

    /// d(ln m)/dx
    pub fn log_rate(&self, xp: f64) -> f64 {
        match *self {
            Multiplier::One => 0.0,
            Multiplier::ExpDecay { coef, rate } => coef * rate * xp.powf(-rate - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub constants: BarrierConstants,
    pub pieces: Vec<Piece>,
    pub multiplier: Multiplier,
    pub ridges: Vec<f64>,
}

fn reject(cond: &str) -> Error {
    Error::BarrierConstants(cond.to_string())
}

fn require(ok: bool, cond: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(reject(cond))
    }
}

fn pieces_from(bounds: &[f64], formulas: Vec<Formula>) -> Vec<Piece> {
    formulas
        .into_iter()
        .enumerate()
        .map(|(i, formula)| Piece {
            h_lo: if i == 0 { 0.0 } else { bounds[i - 1] },
            h_hi: bounds.get(i).copied().unwrap_or(f64::INFINITY),
            formula,
        })
        .collect()
}

pub fn build_barrier(kind: BarrierKind, p: &BlasiusProfile, constants: &BarrierConstants) -> Result<BarrierSpec> {
    let k = constants.resolved(kind);
    let c = k.c.unwrap_or(1.0);
    require(c > 0.0, "C > 0")?;
    let mut multiplier = Multiplier::One;
    let (ridges, formulas) = match kind {
        BarrierKind::ExpTail => {
            let eps = k.eps.unwrap_or_default();
            require(eps > 0.0 && eps < 1.0 / (4.0 * SQRT_W_MAX), "0 < eps < 1/(4*1.2)")?;
            (vec![], vec![Formula::Gauss { coef: c, x_pow: 0.0, eps }])
        }
        BarrierKind::Algebraic => {
            let (lam, m, h0) = (k.lambda.unwrap_or_default(), k.m.unwrap_or_default(), k.h0.unwrap_or_default());
            require(lam > 0.0 && lam < 1.0, "lambda in (0, 1)")?;
            require(m > 0.0, "M > 0")?;
            require(h0 > 1.0 / m, "h0 > 1/M")?;
            let e = 2.0 + 2.0 * lam;
            (
                vec![1.0 / m, h0],
                vec![
                    Formula::Power { coef: c * m.sqrt(), x_pow: -lam, h_pow: 0.5 },
                    Formula::Power { coef: c, x_pow: -lam, h_pow: 0.0 },
                    Formula::Power { coef: c * h0.powf(e), x_pow: -lam, h_pow: -e },
                ],
            )
        }
        BarrierKind::Sharp => {
            let (alpha, n, b, lam) =
                (k.alpha.unwrap_or_default(), k.n.unwrap_or_default(), k.b.unwrap_or_default(), k.lambda.unwrap_or_default());
            require(alpha > 0.0 && alpha < 1.0, "alpha in (0, 1)")?;
            require(n > 0.0, "N > 0")?;
            require(b >= 0.0, "B >= 0")?;
            require(lam > 0.0 && lam < 1.0, "lambda in (0, 1)")?;
            // continuity at h = 1/N fixes the far-piece normalisation 2 f''(ζ0)
            let b0 = 2.0 * p.eval(p.invert_f(1.0 / n)).fpp;
            require(b0 > 0.0, "f''(zeta0) > 0 with f(zeta0) = 1/N")?;
            multiplier = Multiplier::ExpDecay { coef: b, rate: 0.5 * lam };
            (
                vec![1.0 / n],
                vec![
                    Formula::Power { coef: c * n.powf(1.0 - alpha), x_pow: -0.5, h_pow: 1.0 - alpha },
                    Formula::Profile { coef: 2.0 * c / b0, x_pow: -0.5, shape: Shape::Fpp },
                ],
            )
        }
        BarrierKind::SmallH => {
            let (alpha, m) = (k.alpha.unwrap_or_default(), k.m.unwrap_or_default());
            require(alpha > 0.0 && alpha < 1.0, "alpha in (0, 1)")?;
            require(m > 0.0, "M > 0")?;
            let b1 = p.eval(p.invert_f(1.0 / m)).fp.powi(2);
            require(b1 > 0.0, "f'(zeta0) > 0 with f(zeta0) = 1/M")?;
            (
                vec![1.0 / m],
                vec![
                    Formula::Profile { coef: c / b1, x_pow: -alpha, shape: Shape::FpSquared },
                    Formula::Power { coef: c, x_pow: -alpha, h_pow: 0.0 },
                ],
            )
        }
        BarrierKind::DxPhi => {
            let (kk, eps) = (k.k.unwrap_or_default(), k.eps.unwrap_or_default());
            require(kk >= 0.0, "K >= 0")?;
            require(eps > 0.0 && eps < 1.0, "eps in (0, 1)")?;
            multiplier = Multiplier::ExpDecay { coef: kk, rate: eps };
            (vec![], vec![Formula::Profile { coef: c, x_pow: -1.0, shape: Shape::FFpp }])
        }
        BarrierKind::D2xwCos => {
            let (h1, eps) = (k.h1.unwrap_or_default(), k.eps.unwrap_or_default());
            require(h1 > 100.0, "h1 > 100")?;
            require(eps > 0.0, "eps > 0")?;
            (
                vec![h1 - 1.5 * PI, h1],
                vec![
                    Formula::Zero,
                    Formula::Cos { coef: c, x_pow: -2.0, h1 },
                    Formula::Gauss { coef: c * (eps * h1 * h1).exp(), x_pow: -2.0, eps },
                ],
            )
        }
        BarrierKind::D2xwAlg => {
            let (alpha, h0, h1, eps) =
                (k.alpha.unwrap_or_default(), k.h0.unwrap_or_default(), k.h1.unwrap_or_default(), k.eps.unwrap_or_default());
            require(alpha > 0.0 && alpha < 0.125, "alpha in (0, 1/8)")?;
            require(h0 > 0.0 && h0 < 1.0, "h0 in (0, 1)")?;
            require(h1 > h0, "h1 > h0")?;
            require(eps > 0.0, "eps > 0")?;
            let top = c * h0.powf(1.0 - alpha);
            (
                vec![h0, h1],
                vec![
                    Formula::Power { coef: c, x_pow: -0.5, h_pow: 1.0 - alpha },
                    Formula::Power { coef: top, x_pow: -0.5, h_pow: 0.0 },
                    Formula::Gauss { coef: top * (eps * h1 * h1).exp(), x_pow: -0.5, eps },
                ],
            )
        }
    };
    let pieces = pieces_from(&ridges, formulas);
    Ok(BarrierSpec { kind, constants: k, pieces, multiplier, ridges })
}

impl BarrierSpec {
    fn piece_at(&self, h: f64) -> &Piece {
        self.pieces.iter().find(|pc| h < pc.h_hi).unwrap_or_else(|| self.pieces.last().expect("nonempty"))
    }
}

/// (g, ln m) at (x, ψ): the barrier is g·m.
pub fn eval_parts(spec: &BarrierSpec, p: &BlasiusProfile, x: f64, psi: f64) -> (f64, f64) {
    let xp = x + 1.0;
    let h = psi / xp.sqrt();
    let g = if psi <= 0.0 {
        match spec.pieces[0].formula {
            Formula::Power { h_pow, .. } if h_pow > 0.0 => 0.0,
            f => f.jet(p, xp, 0.0).value,
        }
    } else {
        spec.piece_at(h).formula.jet(p, xp, h).value
    };
    (g, spec.multiplier.ln(xp))
}

pub fn eval_barrier(spec: &BarrierSpec, p: &BlasiusProfile, x: f64, psi: f64) -> f64 {
    let (g, lm) = eval_parts(spec, p, x, psi);
    if g == 0.0 {
        0.0
    } else {
        g * lm.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeReport {
    pub x: f64,
    pub h: f64,
    pub left_value: f64,
    pub right_value: f64,
    /// mean of the two one-sided values
    pub value: f64,
    /// magnitude used for the relative continuity test
    pub scale: f64,
    pub mismatch: f64,
    pub left_slope: f64,
    pub right_slope: f64,
    pub continuous: bool,
    pub ridge: bool,
}

/// One-sided values and h-slopes at every ridge from the closed forms.
pub fn ridge_verify(spec: &BarrierSpec, p: &BlasiusProfile, x: f64) -> Vec<RidgeReport> {
    let xp = x + 1.0;
    let m = spec.multiplier.ln(xp).exp();
    spec.pieces
        .windows(2)
        .map(|w| {
            let h = w[0].h_hi;
            let l = w[0].formula.jet(p, xp, h);
            let r = w[1].formula.jet(p, xp, h);
            let (lv, rv) = (l.value * m, r.value * m);
            let scale = lv.abs().max(rv.abs()).max(m * w[0].formula.amplitude(xp).max(w[1].formula.amplitude(xp)));
            let mismatch = (lv - rv).abs();
            RidgeReport {
                x,
                h,
                left_value: lv,
                right_value: rv,
                value: 0.5 * (lv + rv),
                scale,
                mismatch,
                left_slope: l.dh * m,
                right_slope: r.dh * m,
                continuous: mismatch <= 1e-10 * scale,
                ridge: l.dh > r.dh,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub h_lo: f64,
    pub h_hi: f64,
}

impl Region {
    pub fn new(h_lo: f64, h_hi: f64) -> Self {
        Region { h_lo, h_hi }
    }
}

/// Where √w, A and ∂ₓw come from.
#[derive(Debug, Clone, Copy)]
pub enum Coefficients<'a> {
    /// the marched field
    Field(&'a WField),
    /// w = c·w̄ for c in the comparison bracket; the minimum over c is taken
    Bracket { x: f64, c_min: f64, c_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub h: f64,
    pub sqrt_w: f64,
    pub a: f64,
    /// residual of the operator on g·m, divided by m
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub x: f64,
    pub region: Region,
    pub grid_density: usize,
    pub min_residual: f64,
    pub at_h: f64,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

/// A = f f″/(X f′(f′ + √w)); the ζ → 0 limit of f f″/f′² is ½.
fn damping(e: &BlasiusPoint, xp: f64, sqrt_w: f64) -> f64 {
    if e.fp <= 0.0 {
        return 0.0;
    }
    e.f * e.fpp / (xp * e.fp * (e.fp + sqrt_w))
}

fn operator_residual(spec: &BarrierSpec, jet: &PieceJet, xp: f64, w: f64, wx: f64, a: f64) -> f64 {
    let base = jet.dx + jet.value * spec.multiplier.log_rate(xp) - w.max(0.0).sqrt() * jet.dpsi2;
    let ratio = if w > 0.0 { wx / w } else { 0.0 };
    match spec.kind.operator() {
        Operator::Phi => base + a * jet.value,
        Operator::DxPhi => base + a * jet.value - 0.5 * ratio * jet.value,
        Operator::D2xW => base - 1.5 * ratio * jet.value,
    }
}

fn lerp_at(nodes: &[f64], v: &[f64], psi: f64) -> f64 {
    let j = (nodes.partition_point(|&s| s <= psi).max(1) - 1).min(nodes.len() - 2);
    let t = (psi - nodes[j]) / (nodes[j + 1] - nodes[j]);
    v[j] + t * (v[j + 1] - v[j])
}

/// Minimum over `samples` cell-centred points of the open region of the
/// operator applied to the barrier, divided by the positive multiplier.
pub fn residual_check(
    spec: &BarrierSpec,
    coeffs: &Coefficients,
    p: &BlasiusProfile,
    region: Region,
    samples: usize,
) -> Result<ResidualReport> {
    if !(region.h_hi > region.h_lo) || !region.h_hi.is_finite() || region.h_lo < 0.0 || samples == 0 {
        return Err(Error::InvalidInput(format!("bad region [{}, {}] or sample count", region.h_lo, region.h_hi)));
    }
    if let Some(&r) = spec.ridges.iter().find(|&&r| r > region.h_lo && r < region.h_hi) {
        return Err(Error::RegionHasRidge(r));
    }
    let x = match coeffs {
        Coefficients::Field(w) => w.x,
        Coefficients::Bracket { x, .. } => *x,
    };
    let xp = x + 1.0;
    let s = xp.sqrt();
    let field = match coeffs {
        Coefficients::Field(w) => Some((w, station_rate(w))),
        _ => None,
    };
    let dh = (region.h_hi - region.h_lo) / samples as f64;
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let h = region.h_lo + (i as f64 + 0.5) * dh;
        let psi = h * s;
        let jet = spec.piece_at(h).formula.jet(p, xp, h);
        let e = p.eval(p.invert_f(h));
        let smp = match (&field, coeffs) {
            (Some((w, rate)), _) => {
                let g = &w.grid.nodes;
                if psi > g[g.len() - 1] {
                    continue;
                }
                let wv = lerp_at(g, &w.values, psi).max(0.0);
                let wx = lerp_at(g, rate, psi);
                let a = damping(&e, xp, wv.sqrt());
                Sample { h, sqrt_w: wv.sqrt(), a, residual: operator_residual(spec, &jet, xp, wv, wx, a) }
            }
            (None, Coefficients::Bracket { c_min, c_max, .. }) => {
                let b = wbar(p, x, psi);
                [*c_min, 0.5 * (c_min + c_max), *c_max]
                    .into_iter()
                    .map(|c| {
                        let wv = c * b.w;
                        let a = damping(&e, xp, wv.sqrt());
                        Sample { h, sqrt_w: wv.sqrt(), a, residual: operator_residual(spec, &jet, xp, wv, c * b.dx, a) }
                    })
                    .min_by(|u, v| u.residual.total_cmp(&v.residual))
                    .expect("three samples")
            }
            _ => unreachable!(),
        };
        out.push(smp);
    }
    let worst = out
        .iter()
        .min_by(|u, v| u.residual.total_cmp(&v.residual))
        .ok_or_else(|| Error::InsufficientData(format!("no samples of [{}, {}] inside the grid", region.h_lo, region.h_hi)))?;
    Ok(ResidualReport {
        x,
        region,
        grid_density: samples,
        min_residual: worst.residual,
        at_h: worst.h,
        samples: out.clone(),
    })
}

/// Largest h at which profile-based pieces are still resolved: f″ is zero
/// beyond the tabulated range, so stay two units of ζ inside it.
pub fn profile_h_cap(p: &BlasiusProfile) -> f64 {
    p.eval(p.zeta_max - 2.0).f
}

/// Dominance cap: g must stay well above the scheme error of the far field,
/// which leaves about 1e−10 in φ near the residual cap.
pub fn dominance_h_cap(p: &BlasiusProfile) -> f64 {
    p.eval(p.zeta_max - 4.0).f
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub name: String,
    pub value: f64,
    /// (tested value, certified)
    pub tested: Vec<(f64, bool)>,
}

const MAX_DOUBLINGS: usize = 48;
const RESIDUAL_SAMPLES: usize = 400;

/// Walk `start`, `start·factor`, … until `ok` holds.
fn search(name: &str, start: f64, factor: f64, mut ok: impl FnMut(f64) -> Result<bool>) -> Result<Threshold> {
    let mut tested = Vec::new();
    let mut v = start;
    for _ in 0..MAX_DOUBLINGS {
        let pass = ok(v)?;
        tested.push((v, pass));
        if pass {
            return Ok(Threshold { name: name.to_string(), value: v, tested });
        }
        v *= factor;
    }
    Err(Error::BarrierConstants(format!("no {name} certified after {MAX_DOUBLINGS} steps from {start}")))
}

fn positive_on(spec: &BarrierSpec, p: &BlasiusProfile, fields: &[&WField], region: impl Fn(&WField) -> Region) -> Result<bool> {
    for w in fields {
        let r = residual_check(spec, &Coefficients::Field(w), p, region(w), RESIDUAL_SAMPLES)?;
        if !(r.min_residual > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn h_max(w: &WField) -> f64 {
    w.grid.psi_max / (w.x + 1.0).sqrt()
}

/// Smallest N = 2^k with the near piece of the sharp barrier certified on h < 1/N.
pub fn sharp_near_threshold(p: &BlasiusProfile, base: &BarrierConstants, fields: &[&WField]) -> Result<Threshold> {
    search("N", 1.0, 2.0, |n| {
        let spec = build_barrier(BarrierKind::Sharp, p, &base.with("N", n))?;
        positive_on(&spec, p, fields, |_| Region::new(0.0, 1.0 / n))
    })
}

/// Smallest B = 2^k with the far piece of the sharp barrier certified on
/// 1/N < h < the profile cap.
pub fn sharp_far_threshold(p: &BlasiusProfile, base: &BarrierConstants, fields: &[&WField]) -> Result<Threshold> {
    let n = base.resolved(BarrierKind::Sharp).n.unwrap_or_default();
    let cap = profile_h_cap(p);
    search("B", 1.0, 2.0, |b| {
        let spec = build_barrier(BarrierKind::Sharp, p, &base.with("B", b))?;
        positive_on(&spec, p, fields, |w| Region::new(1.0 / n, cap.min(h_max(w))))
    })
}

/// Smallest h0 = 2^k with the far piece of the algebraic barrier certified on h0 < h < 4h0.
pub fn algebraic_far_threshold(p: &BlasiusProfile, base: &BarrierConstants, fields: &[&WField]) -> Result<Threshold> {
    let m = base.resolved(BarrierKind::Algebraic).m.unwrap_or(4.0);
    search("h0", 1.0, 2.0, |h0| {
        if h0 <= 1.0 / m {
            return Ok(false);
        }
        let spec = build_barrier(BarrierKind::Algebraic, p, &base.with("h0", h0))?;
        positive_on(&spec, p, fields, |w| Region::new(h0, (4.0 * h0).min(h_max(w))))
    })
}

/// Largest α = 2^{−k}·½ with the near piece of the small-h barrier certified on h < 1/M.
pub fn small_h_threshold(p: &BlasiusProfile, base: &BarrierConstants, fields: &[&WField]) -> Result<Threshold> {
    let m = base.resolved(BarrierKind::SmallH).m.unwrap_or(2.0);
    search("alpha", 0.5, 0.5, |alpha| {
        let spec = build_barrier(BarrierKind::SmallH, p, &base.with("alpha", alpha))?;
        positive_on(&spec, p, fields, |_| Region::new(0.0, 1.0 / m))
    })
}

/// Smallest K = 2^k with the ∂ₓφ barrier certified on 0 < h < the profile cap.
pub fn dxphi_threshold(p: &BlasiusProfile, base: &BarrierConstants, fields: &[&WField]) -> Result<Threshold> {
    let cap = profile_h_cap(p);
    search("K", 1.0, 2.0, |k| {
        let spec = build_barrier(BarrierKind::DxPhi, p, &base.with("K", k))?;
        positive_on(&spec, p, fields, |w| Region::new(0.0, cap.min(h_max(w))))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominancePoint {
    pub x: f64,
    /// may overflow to ∞ when the multiplier is tiny; `ln_c_star` stays finite
    pub c_star: f64,
    pub ln_c_star: f64,
    pub at_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub kind: BarrierKind,
    pub quantity: Quantity,
    pub h_cap: f64,
    pub series: Vec<DominancePoint>,
    pub onset: usize,
    pub onset_x: f64,
    /// (x, h) of a node where g vanishes under a nonzero quantity
    pub impossible: Option<(f64, f64)>,
    pub passed: bool,
}

/// C*(x) = sup |q|/(g·m) over nodes with x ≥ 10, h ≤ the dominance cap and
/// |q| above the floor. Inside the wall layer the ratio is held at its value
/// on the layer edge. Passes when the series settles (no later value more
/// than 10% above) within the first half of the window in ln(x+1).
pub fn dominance(spec: &BarrierSpec, t: &Trajectory, p: &BlasiusProfile, q: Quantity) -> Result<DominanceReport> {
    let cap = dominance_h_cap(p);
    let mut series = Vec::new();
    let mut impossible = None;
    for k in 0..t.checkpoints.len() {
        let w = &t.checkpoints[k];
        if w.x < FIT_START {
            continue;
        }
        let Some(vals) = quantity_values(t, p, k, q) else { continue };
        let xp = w.x + 1.0;
        let s = xp.sqrt();
        let g = &w.grid.nodes;
        let edge = g.iter().position(|&v| v / s >= NEAR_WALL_H).unwrap_or(g.len() - 1).max(1);
        let mut best: (f64, f64) = (0.0, 0.0);
        for j in edge..g.len() {
            let h = g[j] / s;
            if h > cap {
                break;
            }
            if vals[j].abs() <= DOMINANCE_FLOOR {
                continue;
            }
            let (gv, _) = eval_parts(spec, p, w.x, g[j]);
            if !(gv > 0.0) {
                impossible.get_or_insert((w.x, h));
                continue;
            }
            let r = vals[j].abs() / gv;
            if r > best.0 {
                best = (r, h);
            }
        }
        let ln = if best.0 > 0.0 { best.0.ln() - spec.multiplier.ln(xp) } else { f64::NEG_INFINITY };
        series.push(DominancePoint { x: w.x, c_star: ln.exp(), ln_c_star: ln, at_h: best.1 });
    }
    if series.is_empty() {
        return Err(Error::InsufficientData(format!("no checkpoints with x >= {FIT_START} for {}", q.name())));
    }
    // compare on a scale relative to the largest value so that huge multipliers stay finite
    let top = series.iter().map(|d| d.ln_c_star).fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<(f64, f64)> =
        series.iter().map(|d| (d.x, if top.is_finite() { (d.ln_c_star - top).exp() } else { 0.0 })).collect();
    let onset = onset_index(&rel);
    let onset_x = series[onset].x;
    let (lo, hi) = ((series[0].x + 1.0).ln(), (series[series.len() - 1].x + 1.0).ln());
    let settled = (onset_x + 1.0).ln() <= 0.5 * (lo + hi);
    let passed = impossible.is_none() && settled && series.iter().all(|d| !d.ln_c_star.is_nan());
    Ok(DominanceReport { kind: spec.kind, quantity: q, h_cap: cap, series, onset, onset_x, impossible, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub x: f64,
    pub region: Region,
    pub min_residual: f64,
    pub at_h: f64,
}

/// Certificate written as JSON by the command line driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: BarrierKind,
    pub constants: BarrierConstants,
    pub region: Vec<Region>,
    pub min_residual: Option<f64>,
    pub grid_density: usize,
    pub residuals: Vec<ResidualSummary>,
    pub ridge_report: Vec<RidgeReport>,
    pub dominance_series: Option<Vec<DominancePoint>>,
    pub dominance_passed: Option<bool>,
    pub passed: bool,
}

impl Certificate {
    pub fn new(
        spec: &BarrierSpec,
        p: &BlasiusProfile,
        residuals: Vec<ResidualReport>,
        dominance: Option<&DominanceReport>,
    ) -> Self {
        let mut region: Vec<Region> = Vec::new();
        for r in &residuals {
            if !region.contains(&r.region) {
                region.push(r.region);
            }
        }
        let min_residual = residuals.iter().map(|r| r.min_residual).reduce(f64::min);
        let ridge_report: Vec<RidgeReport> = RIDGE_STATIONS.iter().flat_map(|&x| ridge_verify(spec, p, x)).collect();
        let passed = min_residual.is_none_or(|m| m > 0.0)
            && ridge_report.iter().all(|r| r.continuous && r.ridge)
            && dominance.is_none_or(|d| d.passed);
        Certificate {
            kind: spec.kind,
            constants: spec.constants.clone(),
            region,
            min_residual,
            grid_density: residuals.first().map_or(0, |r| r.grid_density),
            residuals: residuals
                .iter()
                .map(|r| ResidualSummary { x: r.x, region: r.region, min_residual: r.min_residual, at_h: r.at_h })
                .collect(),
            ridge_report,
            dominance_series: dominance.map(|d| d.series.clone()),
            dominance_passed: dominance.map(|d| d.passed),
            passed,
        }
    }
}
