//! 2×2 transfer-matrix calculus.
//!
//! Site and polymer transfer matrices act on `(t(n)ψ(n), ψ(n−1))`. At a
//! critical energy the two polymer matrices commute and are elliptic (or
//! `±I`), so one matrix `M` conjugates both to rotations `R(η±)`.

use std::ops::Mul;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{draw_sign, Configuration, PolymerModel, PolymerSpec, Sign};
use crate::prufer::{free_lift, AngleMap};
use crate::rng::substream;
use crate::scalar::{wrap_two_pi, Real};

/// Real 2×2 matrix `[[a11, a12], [a21, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

impl<T: Real> Mat2<T> {
    pub const fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    /// Counter-clockwise rotation by `eta`.
    pub fn rotation(eta: T) -> Self {
        let (s, c) = eta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        Some(Self::new(
            self.a22 / det,
            -self.a12 / det,
            -self.a21 / det,
            self.a11 / det,
        ))
    }

    pub fn frobenius(&self) -> T {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22)
            .sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(
            self.a11 - o.a11,
            self.a12 - o.a12,
            self.a21 - o.a21,
            self.a22 - o.a22,
        )
    }

    pub fn apply(&self, v: [T; 2]) -> [T; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, o: &Self) -> Self {
        (*self * *o).sub(&(*o * *self))
    }

    /// `M A M⁻¹`.
    pub fn conjugate_by(&self, m: &Self) -> Option<Self> {
        Some(*m * *self * m.inverse()?)
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

/// `T_{v−E,t} = (1/t)·[[v − E, −t²], [1, 0]]`.
pub fn site_matrix<T: Real>(v: T, t: T, energy: T) -> Result<Mat2<T>> {
    if !(t > T::zero()) {
        return Err(Error::invalid(format!("hopping {t} is not strictly positive")));
    }
    Ok(Mat2::new((v - energy) / t, -t, T::one() / t, T::zero()))
}

/// `T_{L−1} ⋯ T_0` across one polymer; site 0 acts first.
pub fn polymer_matrix<T: Real>(spec: &PolymerSpec<T>, energy: T) -> Mat2<T> {
    spec.potentials()
        .iter()
        .zip(spec.hoppings())
        .fold(Mat2::identity(), |acc, (&v, &t)| {
            // hoppings are validated positive by PolymerSpec
            site_matrix(v, t, energy).expect("positive hopping") * acc
        })
}

/// Matrix product held as a unit-Frobenius matrix and a log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProduct<T> {
    pub matrix: Mat2<T>,
    pub log_scale: T,
}

impl<T: Real> ScaledProduct<T> {
    /// The unscaled product; overflows for long products.
    pub fn value(&self) -> Mat2<T> {
        self.matrix.scale(self.log_scale.exp())
    }

    /// `log ‖product‖_F`.
    pub fn log_norm(&self) -> T {
        self.log_scale + self.matrix.frobenius().ln()
    }
}

/// `T_ω(to, from) = T_{ω_{to−1}} ⋯ T_{ω_from}`, renormalized after every block.
pub fn block_product<T: Real>(
    model: &PolymerModel<T>,
    config: &Configuration,
    energy: T,
    from_block: usize,
    to_block: usize,
) -> Result<ScaledProduct<T>> {
    if to_block < from_block {
        return Err(Error::invalid(format!(
            "block range {from_block}..{to_block} is reversed"
        )));
    }
    if to_block > config.num_blocks() {
        return Err(Error::invalid(format!(
            "block {to_block} beyond the {} blocks of the configuration",
            config.num_blocks()
        )));
    }
    let plus = polymer_matrix(model.plus(), energy);
    let minus = polymer_matrix(model.minus(), energy);
    let mut matrix = Mat2::identity();
    let mut log_scale = T::zero();
    for s in &config.signs[from_block..to_block] {
        let step = match s {
            Sign::Plus => plus,
            Sign::Minus => minus,
        };
        matrix = step * matrix;
        let norm = matrix.frobenius();
        matrix = matrix.scale(norm.recip());
        log_scale = log_scale + norm.ln();
    }
    if from_block == to_block {
        return Ok(ScaledProduct {
            matrix,
            log_scale: T::zero(),
        });
    }
    Ok(ScaledProduct { matrix, log_scale })
}

/// How a polymer matrix qualifies at a critical energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Elliptic,
    PlusIdentity,
    MinusIdentity,
}

/// `±I` within `tol` (Frobenius), else elliptic when `|tr| < 2`.
pub fn classify<T: Real>(t: &Mat2<T>, tol: T) -> Option<MatrixKind> {
    let id = Mat2::identity();
    if t.sub(&id).frobenius() <= tol {
        return Some(MatrixKind::PlusIdentity);
    }
    if t.sub(&id.scale(-T::one())).frobenius() <= tol {
        return Some(MatrixKind::MinusIdentity);
    }
    if t.trace().abs() < T::lit(2.0) - tol {
        return Some(MatrixKind::Elliptic);
    }
    None
}

/// `M` with `M T± M⁻¹ = R(η±)`, `det M = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagonalization<T> {
    pub m: Mat2<T>,
    /// Rotation angles read off `M T± M⁻¹`, in `[0, 2π)`.
    pub eta_plus: T,
    pub eta_minus: T,
    /// `max ‖M T± M⁻¹ − R(η±)‖_F`.
    pub residual: T,
}

fn rotation_angle<T: Real>(k: &Mat2<T>) -> T {
    wrap_two_pi(k.a21.atan2(k.a11))
}

/// Simultaneous diagonalizer of two commuting polymer matrices.
///
/// `M` is built from the real and imaginary parts of a complex eigenvector of
/// whichever input is not `±I`, choosing the eigenvalue that makes
/// `det M > 0`, and is scaled to `det M = 1`.
pub fn diagonalizer<T: Real>(
    t_plus: &Mat2<T>,
    t_minus: &Mat2<T>,
    tol: T,
) -> Result<Diagonalization<T>> {
    let kp = classify(t_plus, tol);
    let km = classify(t_minus, tol);
    let (Some(kp), Some(km)) = (kp, km) else {
        return Err(Error::invalid(
            "polymer matrices are neither elliptic nor ±I at this energy",
        ));
    };
    let source = match (kp, km) {
        (MatrixKind::Elliptic, MatrixKind::Elliptic) => {
            // the better-conditioned eigenproblem: trace farther from ±2
            if t_plus.trace().abs() <= t_minus.trace().abs() {
                Some(t_plus)
            } else {
                Some(t_minus)
            }
        }
        (MatrixKind::Elliptic, _) => Some(t_plus),
        (_, MatrixKind::Elliptic) => Some(t_minus),
        _ => None,
    };
    let m = match source {
        None => Mat2::identity(),
        Some(t) => {
            let half = T::lit(0.5);
            let re = half * t.trace();
            let im = (T::one() - re * re).max(T::zero()).sqrt();
            // eigenvector w of t for λ = re + i·im
            let (w1, w2) = if t.a12.abs() >= t.a21.abs() {
                (
                    Complex::new(t.a12, T::zero()),
                    Complex::new(re - t.a11, im),
                )
            } else {
                (
                    Complex::new(re - t.a22, im),
                    Complex::new(t.a21, T::zero()),
                )
            };
            // P maps (1, −i) to w: columns Re w and −Im w
            let mut p = Mat2::new(w1.re, -w1.im, w2.re, -w2.im);
            if p.det() < T::zero() {
                // use the conjugate eigenvector: orientation flips
                p = Mat2::new(w1.re, w1.im, w2.re, w2.im);
            }
            let det = p.det();
            if !(det > T::zero()) {
                return Err(Error::NumericalFailure(
                    "degenerate eigenvector while building the diagonalizer".into(),
                ));
            }
            let p = p.scale(det.sqrt().recip());
            p.inverse().ok_or_else(|| {
                Error::NumericalFailure("diagonalizer is singular".into())
            })?
        }
    };
    let cp = t_plus.conjugate_by(&m).expect("det M = 1");
    let cm = t_minus.conjugate_by(&m).expect("det M = 1");
    let eta_plus = rotation_angle(&cp);
    let eta_minus = rotation_angle(&cm);
    let residual = cp
        .sub(&Mat2::rotation(eta_plus))
        .frobenius()
        .max(cm.sub(&Mat2::rotation(eta_minus)).frobenius());
    Ok(Diagonalization {
        m,
        eta_plus,
        eta_minus,
        residual,
    })
}

/// Continuous winding of the modified Prüfer phase across one polymer.
///
/// At a critical energy this is the canonical lift of `η±`: the free phase is
/// lifted site by site and mapped through `m`, which is increasing because
/// `det M > 0`. It does not depend on the starting angle.
pub fn polymer_winding<T: Real>(spec: &PolymerSpec<T>, energy: T, map: &AngleMap<T>) -> T {
    let mut theta = T::zero();
    let mut y = [T::one(), T::zero()];
    for (&v, &t) in spec.potentials().iter().zip(spec.hoppings()) {
        let step = site_matrix(v, t, energy).expect("positive hopping");
        y = step.apply(y);
        theta = free_lift(theta, y);
        let norm = y[0].hypot(y[1]);
        y = [y[0] / norm, y[1] / norm];
    }
    map.eval(theta) - map.eval(T::zero())
}

/// `|⟨e^{ikη±}⟩|` from the closed form `1 + 2p(1−p)(cos(kΔη) − 1)`.
pub fn phase_average_modulus<T: Real>(eta_plus: T, eta_minus: T, p: T, k: usize) -> T {
    let k = T::from_usize(k).unwrap();
    let two = T::lit(2.0);
    let sq = T::one() + two * p * (T::one() - p) * ((k * (eta_plus - eta_minus)).cos() - T::one());
    sq.max(T::zero()).sqrt()
}

/// Every `k ∈ 1..=k_max` with `|⟨e^{ikη±}⟩| ≥ 1 − tol`.
pub fn irrationality_check<T: Real>(
    eta_plus: T,
    eta_minus: T,
    p: T,
    k_max: usize,
    tol: T,
) -> Vec<(usize, T)> {
    (1..=k_max)
        .filter_map(|k| {
            let modulus = phase_average_modulus(eta_plus, eta_minus, p, k);
            (modulus >= T::one() - tol).then_some((k, modulus))
        })
        .collect()
}

/// Certificate for one critical energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalEnergyReport<T> {
    pub energy: T,
    pub kind_plus: MatrixKind,
    pub kind_minus: MatrixKind,
    /// Canonical (winding) lift of `η₊`; lies in `[0, 2π)` for dimers, may
    /// exceed `2π` for longer polymers.
    pub eta_plus: T,
    pub eta_minus: T,
    pub diagonalizer: Mat2<T>,
    pub commutator_norm: T,
    pub residual: T,
    pub irrationality_violations: Vec<(usize, T)>,
}

/// Scan parameters for [`find_critical_energies_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSearch<T> {
    pub interval: (T, T),
    pub grid: usize,
    /// Refinement width and `±I` tolerance.
    pub tol: T,
    pub commutator_threshold: T,
    pub k_max: usize,
}

impl<T: Real> CriticalSearch<T> {
    pub fn new(interval: (T, T)) -> Self {
        Self {
            interval,
            grid: 20_001,
            tol: T::lit(1e-8),
            commutator_threshold: T::lit(1e-9),
            k_max: 100,
        }
    }
}

fn commutator_norm<T: Real>(model: &PolymerModel<T>, energy: T) -> T {
    let tp = polymer_matrix(model.plus(), energy);
    let tm = polymer_matrix(model.minus(), energy);
    tp.commutator(&tm).frobenius()
}

fn golden_section<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, width: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if b - a <= width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

/// Builds the full report at an energy already known to be critical.
pub fn critical_report<T: Real>(
    model: &PolymerModel<T>,
    energy: T,
    tol: T,
    k_max: usize,
) -> Result<CriticalEnergyReport<T>> {
    let tp = polymer_matrix(model.plus(), energy);
    let tm = polymer_matrix(model.minus(), energy);
    let commutator = tp.commutator(&tm).frobenius();
    let kind_plus = classify(&tp, tol)
        .ok_or_else(|| Error::invalid(format!("T+ not elliptic or ±I at E = {energy}")))?;
    let kind_minus = classify(&tm, tol)
        .ok_or_else(|| Error::invalid(format!("T- not elliptic or ±I at E = {energy}")))?;
    let diag = diagonalizer(&tp, &tm, tol)?;
    let map = AngleMap::new(diag.m)?;
    let eta_plus = polymer_winding(model.plus(), energy, &map);
    let eta_minus = polymer_winding(model.minus(), energy, &map);
    for (lifted, raw) in [(eta_plus, diag.eta_plus), (eta_minus, diag.eta_minus)] {
        let gap = wrap_two_pi(lifted - raw + T::PI()) - T::PI();
        if gap.abs() > T::lit(1e-6) {
            return Err(Error::NumericalFailure(format!(
                "winding lift {lifted} disagrees with rotation angle {raw}"
            )));
        }
    }
    let irrationality_violations =
        irrationality_check(eta_plus, eta_minus, model.p_plus(), k_max, T::lit(1e-12));
    Ok(CriticalEnergyReport {
        energy,
        kind_plus,
        kind_minus,
        eta_plus,
        eta_minus,
        diagonalizer: diag.m,
        commutator_norm: commutator,
        residual: diag.residual,
        irrationality_violations,
    })
}

/// Critical energies in `search` with default thresholds (commutator ≤ 1e−9).
pub fn find_critical_energies<T: Real>(
    model: &PolymerModel<T>,
    search: (T, T),
    grid: usize,
    tol: T,
) -> Result<Vec<CriticalEnergyReport<T>>> {
    let mut params = CriticalSearch::new(search);
    params.grid = grid;
    params.tol = tol;
    find_critical_energies_with(model, &params)
}

/// Scans `‖[T₊, T₋]‖_F`, refines local minima by golden section and keeps the
/// energies where the commutator vanishes and both matrices are elliptic or `±I`.
pub fn find_critical_energies_with<T: Real>(
    model: &PolymerModel<T>,
    params: &CriticalSearch<T>,
) -> Result<Vec<CriticalEnergyReport<T>>> {
    let (a, b) = params.interval;
    if params.grid < 2 {
        return Err(Error::invalid("critical-energy grid needs at least 2 points"));
    }
    if !(a < b) {
        return Err(Error::invalid(format!("empty search interval [{a}, {b}]")));
    }
    let step = (b - a) / T::from_usize(params.grid - 1).unwrap();
    let energies: Vec<T> = (0..params.grid)
        .map(|i| a + step * T::from_usize(i).unwrap())
        .collect();
    let values: Vec<T> = energies.iter().map(|&e| commutator_norm(model, e)).collect();
    let width = (params.tol * T::lit(1e-3)).max(T::epsilon() * T::lit(4.0));
    let mut reports: Vec<CriticalEnergyReport<T>> = Vec::new();
    for i in 0..params.grid {
        let left = if i > 0 { values[i - 1] } else { T::infinity() };
        let right = if i + 1 < params.grid { values[i + 1] } else { T::infinity() };
        let f = values[i];
        let is_min = f <= left && f <= right && (f < left || f < right);
        if !is_min {
            continue;
        }
        let lo = energies[i.saturating_sub(1)];
        let hi = energies[(i + 1).min(params.grid - 1)];
        let e = golden_section(|x| commutator_norm(model, x), lo, hi, width);
        if commutator_norm(model, e) > params.commutator_threshold {
            continue;
        }
        if reports
            .iter()
            .any(|r| (r.energy - e).abs() <= params.tol * T::lit(10.0))
        {
            continue;
        }
        match critical_report(model, e, params.tol, params.k_max) {
            Ok(r) => reports.push(r),
            Err(Error::InvalidArgument(_)) => continue,
            Err(err) => return Err(err),
        }
    }
    reports.sort_by(|x, y| x.energy.partial_cmp(&y.energy).unwrap());
    Ok(reports)
}

/// Transmission `a` and reflection `b` of `M T^{E_c+ε} M⁻¹` in the basis `{v, v̄}`,
/// `v = (1, −i)/√2`.
pub fn conjugated_coefficients<T: Real>(
    model: &PolymerModel<T>,
    report: &CriticalEnergyReport<T>,
    sign: Sign,
    eps: T,
) -> (Complex<T>, Complex<T>) {
    let t = polymer_matrix(model.polymer(sign), report.energy + eps);
    let k = t.conjugate_by(&report.diagonalizer).expect("det M = 1");
    coefficients_of(&k)
}

fn coefficients_of<T: Real>(k: &Mat2<T>) -> (Complex<T>, Complex<T>) {
    let half = T::lit(0.5);
    let a = Complex::new(half * (k.a11 + k.a22), half * (k.a21 - k.a12));
    let b = Complex::new(half * (k.a11 - k.a22), -half * (k.a12 + k.a21));
    (a, b)
}

/// `η^ε = η + arg(a^ε e^{−iη})`, the transmission phase continued from `ε = 0`.
pub fn perturbed_eta<T: Real>(eta: T, a: Complex<T>) -> T {
    let rot = Complex::from_polar(T::one(), -eta);
    eta + (a * rot).arg()
}

/// First-order data of the polymer phase shift around a critical energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoeffs<T> {
    /// `d± = ∂_ε η±^ε` at `ε = 0`.
    pub d_plus: T,
    pub d_minus: T,
    /// `c± = ∂_ε b±^ε · e^{iη±}` at `ε = 0`.
    pub c_plus: Complex<T>,
    pub c_minus: Complex<T>,
    pub eps_probe: T,
    /// `(a, b)` for each polymer at `ε = eps_probe`.
    pub probe_plus: (Complex<T>, Complex<T>),
    pub probe_minus: (Complex<T>, Complex<T>),
}

impl<T: Real> ExpansionCoeffs<T> {
    pub fn d(&self, sign: Sign) -> T {
        match sign {
            Sign::Plus => self.d_plus,
            Sign::Minus => self.d_minus,
        }
    }

    pub fn c(&self, sign: Sign) -> Complex<T> {
        match sign {
            Sign::Plus => self.c_plus,
            Sign::Minus => self.c_minus,
        }
    }
}

/// Finite-difference step for `d±` and `c±`.
pub const DIFFERENTIATION_STEP: f64 = 1e-5;

fn richardson<V, F>(f: F, h: f64) -> V
where
    V: Copy + std::ops::Sub<Output = V> + std::ops::Mul<f64, Output = V>,
    F: Fn(f64) -> V,
{
    let central = |h: f64| (f(h) - f(-h)) * (0.5 / h);
    let coarse = central(h);
    let fine = central(0.5 * h);
    (fine * 4.0 - coarse) * (1.0 / 3.0)
}

pub fn expansion_coeffs(
    model: &PolymerModel<f64>,
    report: &CriticalEnergyReport<f64>,
    eps_probe: f64,
) -> Result<ExpansionCoeffs<f64>> {
    if !(eps_probe > 0.0) {
        return Err(Error::invalid(format!("probe step {eps_probe} must be positive")));
    }
    let eta = |s: Sign| match s {
        Sign::Plus => report.eta_plus,
        Sign::Minus => report.eta_minus,
    };
    let d = |s: Sign| {
        richardson(
            |h| perturbed_eta(eta(s), conjugated_coefficients(model, report, s, h).0),
            DIFFERENTIATION_STEP,
        )
    };
    let c = |s: Sign| {
        let db = richardson(
            |h| conjugated_coefficients(model, report, s, h).1,
            DIFFERENTIATION_STEP,
        );
        db * Complex::from_polar(1.0, eta(s))
    };
    Ok(ExpansionCoeffs {
        d_plus: d(Sign::Plus),
        d_minus: d(Sign::Minus),
        c_plus: c(Sign::Plus),
        c_minus: c(Sign::Minus),
        eps_probe,
        probe_plus: conjugated_coefficients(model, report, Sign::Plus, eps_probe),
        probe_minus: conjugated_coefficients(model, report, Sign::Minus, eps_probe),
    })
}

/// Lyapunov exponent estimate with its standard error across realizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub stderr: f64,
    pub per_realization: Vec<f64>,
}

/// Growth rate of one realization: a renormalized vector is pushed through
/// `steps` polymer blocks and the log growth after the first `steps / 10`
/// blocks is averaged per site.
fn lyapunov_realization(
    model: &PolymerModel<f64>,
    plus: &Mat2<f64>,
    minus: &Mat2<f64>,
    steps: usize,
    seed: u64,
    index: u64,
) -> f64 {
    let mut rng = substream(seed, index);
    let burn_in = steps / 10;
    let mut y = [1.0, 0.0];
    let mut acc = 0.0;
    for k in 0..steps {
        let m = match draw_sign(&mut rng, model.p_plus()) {
            Sign::Plus => plus,
            Sign::Minus => minus,
        };
        y = m.apply(y);
        let norm = y[0].hypot(y[1]);
        y = [y[0] / norm, y[1] / norm];
        if k >= burn_in {
            acc += norm.ln();
        }
    }
    acc / ((steps - burn_in) as f64 * model.mean_length())
}

/// `L(E)` averaged over `realizations` independent configurations of `steps` blocks.
pub fn lyapunov(
    model: &PolymerModel<f64>,
    energy: f64,
    steps: usize,
    realizations: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if steps < 1000 {
        return Err(Error::invalid(format!("need at least 1000 polymer steps, got {steps}")));
    }
    if realizations < 2 {
        return Err(Error::invalid("need at least 2 realizations for a standard error"));
    }
    let plus = polymer_matrix(model.plus(), energy);
    let minus = polymer_matrix(model.minus(), energy);
    let per_realization: Vec<f64> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| lyapunov_realization(model, &plus, &minus, steps, seed, r))
        .collect();
    let n = per_realization.len() as f64;
    let gamma = per_realization.iter().sum::<f64>() / n;
    let var = per_realization.iter().map(|g| (g - gamma).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(LyapunovEstimate {
        gamma,
        stderr: (var / n).sqrt(),
        per_realization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{anderson_preset, dimer_preset, sample_configuration};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: &Mat2<f64>, b: &Mat2<f64>, tol: f64) -> bool {
        a.sub(b).frobenius() <= tol
    }

    #[test]
    fn site_matrices() {
        assert_eq!(site_matrix(0.0, 1.0, 0.0).unwrap(), Mat2::new(0.0, -1.0, 1.0, 0.0));
        assert_eq!(site_matrix(1.0, 1.0, 0.0).unwrap(), Mat2::new(1.0, -1.0, 1.0, 0.0));
        let m = site_matrix(0.0, 2.0, 0.0).unwrap();
        assert_eq!(m, Mat2::new(0.0, -2.0, 0.5, 0.0));
        assert_eq!(m.det(), 1.0);
        assert!(site_matrix(0.0, 0.0, 0.0).is_err());
        assert!(site_matrix(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn dimer_polymer_matrices() {
        let v = 0.37;
        let d = dimer_preset::<f64>(v, 0.5).unwrap();
        let tp = polymer_matrix(d.plus(), v);
        assert!(close(&tp, &Mat2::identity().scale(-1.0), 1e-15));
        let tm = polymer_matrix(d.minus(), v);
        assert!((tm.trace() - (4.0 * v * v - 2.0)).abs() < 1e-14);
        let single = PolymerSpec::new(vec![0.3], vec![1.4]).unwrap();
        assert_eq!(polymer_matrix(&single, 0.1), site_matrix(0.3, 1.4, 0.1).unwrap());
    }

    #[test]
    fn block_products() {
        let d = dimer_preset::<f64>(0.5, 0.5).unwrap();
        let c = sample_configuration(&d, 50, 1, 0).unwrap();
        let id = block_product(&d, &c, 0.3, 7, 7).unwrap();
        assert_eq!(id.matrix, Mat2::identity());
        assert_eq!(id.log_scale, 0.0);
        let one = block_product(&d, &c, 0.3, 4, 5).unwrap();
        assert!(close(&one.value(), &polymer_matrix(d.polymer(c.signs[4]), 0.3), 1e-14));
        assert!(block_product(&d, &c, 0.3, 5, 4).is_err());
    }

    #[test]
    fn long_product_bounded_at_critical_energy() {
        let d = dimer_preset::<f64>(0.6, 0.5).unwrap();
        let c = sample_configuration(&d, 1_000_000, 5, 0).unwrap();
        let p = block_product(&d, &c, 0.6, 0, c.num_blocks()).unwrap();
        let report = critical_report(&d, 0.6, 1e-8, 10).unwrap();
        let m = report.diagonalizer;
        let cond = m.frobenius() * m.inverse().unwrap().frobenius();
        assert!(p.log_norm() <= (cond * cond).ln() + 1e-6);
        assert!(p.log_norm() / 1e6 < 1e-5);
        assert!((p.matrix.det() * (2.0 * p.log_scale).exp() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dimer_critical_energies() {
        let d = dimer_preset::<f64>(0.5, 0.5).unwrap();
        let found = find_critical_energies(&d, (-3.0, 3.0), 20_001, 1e-8).unwrap();
        assert_eq!(found.len(), 2);
        assert!((found[0].energy + 0.5).abs() < 1e-8);
        assert!((found[1].energy - 0.5).abs() < 1e-8);
        for r in &found {
            assert!(r.residual <= 1e-8);
            assert!(r.commutator_norm <= 1e-9);
            assert!(r.diagonalizer.det() > 0.0);
        }
        assert_eq!(found[1].kind_plus, MatrixKind::MinusIdentity);
        assert_eq!(found[1].kind_minus, MatrixKind::Elliptic);
    }

    #[test]
    fn dimer_inverse_sqrt_two() {
        let v = FRAC_1_SQRT_2;
        let d = dimer_preset::<f64>(v, 0.5).unwrap();
        let found = find_critical_energies(&d, (-3.0, 3.0), 20_001, 1e-8).unwrap();
        assert_eq!(found.len(), 2);
        let up = &found[1];
        assert!((up.energy - v).abs() < 1e-8);
        assert_eq!(up.kind_plus, MatrixKind::MinusIdentity);
        assert!((up.eta_plus - PI).abs() < 1e-7);
        assert!((up.eta_minus - 1.5 * PI).abs() < 1e-7);
        let ks: Vec<usize> = irrationality_check(up.eta_plus, up.eta_minus, 0.5, 8, 1e-12)
            .into_iter()
            .map(|(k, _)| k)
            .collect();
        assert_eq!(ks, vec![4, 8]);
    }

    #[test]
    fn anderson_has_no_critical_energy() {
        for v in [0.3, 0.8, 1.7] {
            let a = anderson_preset::<f64>(v, 0.5).unwrap();
            assert!(find_critical_energies(&a, (-4.0, 4.0), 20_001, 1e-8).unwrap().is_empty());
        }
    }

    #[test]
    fn minus_identity_diagonalizes_to_pi() {
        let minus = Mat2::identity().scale(-1.0);
        let other = polymer_matrix(dimer_preset::<f64>(0.6, 0.5).unwrap().minus(), 0.6);
        let diag = diagonalizer(&minus, &other, 1e-10).unwrap();
        assert!((diag.eta_plus - PI).abs() < 1e-12);
        assert!(diag.residual < 1e-12);
        let both = diagonalizer(&minus, &minus, 1e-10).unwrap();
        assert_eq!(both.m, Mat2::identity());
        assert!(diagonalizer(&Mat2::new(3.0, 0.0, 0.0, 1.0 / 3.0), &minus, 1e-10).is_err());
    }

    #[test]
    fn irrational_dimer_has_no_violation() {
        let d = dimer_preset::<f64>(0.6, 0.5).unwrap();
        let r = critical_report(&d, 0.6, 1e-8, 10_000).unwrap();
        assert!(r.irrationality_violations.is_empty());
    }

    #[test]
    fn irrationality_closed_form_matches_brute_force() {
        let (ep, em, p) = (2.1, 4.9, 0.3);
        for k in 1..=100 {
            let kf = k as f64;
            let z = Complex::from_polar(p, kf * ep) + Complex::from_polar(1.0 - p, kf * em);
            assert!((z.norm() - phase_average_modulus(ep, em, p, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_grows_with_energy() {
        // the canonical lift orients the phase with increasing energy
        let d = dimer_preset::<f64>(0.6, 0.5).unwrap();
        let r = critical_report(&d, 0.6, 1e-8, 10).unwrap();
        let map = AngleMap::new(r.diagonalizer).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            let at = polymer_winding(d.polymer(sign), 0.6, &map);
            let above = polymer_winding(d.polymer(sign), 0.6 + 1e-3, &map);
            let below = polymer_winding(d.polymer(sign), 0.6 - 1e-3, &map);
            assert!(below < at && at < above);
        }
    }

    /// Mean angle advance of `K = M T M⁻¹` over uniformly spread directions.
    fn mean_turn(k: &Mat2<f64>, eta: f64) -> f64 {
        let n = 4096;
        (0..n)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / n as f64;
                let w = k.apply([th.cos(), th.sin()]);
                let turn = w[1].atan2(w[0]) - th - eta;
                turn - 2.0 * PI * (turn / (2.0 * PI)).round()
            })
            .sum::<f64>()
            / n as f64
    }

    #[test]
    fn expansion_coefficients_of_dimer() {
        let v = 0.6;
        let d = dimer_preset::<f64>(v, 0.5).unwrap();
        let r = critical_report(&d, v, 1e-8, 10).unwrap();
        let coeffs = expansion_coeffs(&d, &r, 0.01).unwrap();

        // the elliptic polymer: derivative of its band rotation angle 2·arccos((v − E)/2)
        let band = |pot: f64, e: f64| 2.0 * ((pot - e) / 2.0).acos();
        let h = 1e-6;
        let oracle_minus = (band(-v, v + h) - band(-v, v - h)) / (2.0 * h);
        assert!((oracle_minus - 1.25).abs() < 1e-6);
        assert!((coeffs.d_minus - 1.25).abs() < 1e-7);

        // both polymers: first-order mean advance of the conjugated matrix
        for (sign, eta, got) in [
            (Sign::Plus, r.eta_plus, coeffs.d_plus),
            (Sign::Minus, r.eta_minus, coeffs.d_minus),
        ] {
            let k = |e: f64| {
                polymer_matrix(d.polymer(sign), v + e)
                    .conjugate_by(&r.diagonalizer)
                    .unwrap()
            };
            let oracle = (mean_turn(&k(h), eta) - mean_turn(&k(-h), eta)) / (2.0 * h);
            assert!((got - oracle).abs() < 1e-6, "{sign:?}: {got} vs {oracle}");
        }
        // in the frame where T₋ rotates, the −I polymer advances as fast as T₋
        assert!((coeffs.d_plus - 1.25).abs() < 1e-7);

        for sign in [Sign::Plus, Sign::Minus] {
            let (a0, b0) = conjugated_coefficients(&d, &r, sign, 0.0);
            let eta = if sign == Sign::Plus { r.eta_plus } else { r.eta_minus };
            assert!((a0 - Complex::from_polar(1.0, eta)).norm() < 1e-10);
            assert!(b0.norm() < 1e-10);
        }
        for (a, b) in [coeffs.probe_plus, coeffs.probe_minus] {
            assert!((a.norm_sqr() - b.norm_sqr() - 1.0).abs() < 1e-12);
        }
        assert!(expansion_coeffs(&d, &r, 0.0).is_err());
    }

    #[test]
    fn lyapunov_signs() {
        let d = dimer_preset::<f64>(0.5, 0.5).unwrap();
        let off = lyapunov(&d, 0.8, 20_000, 8, 3).unwrap();
        assert!(off.gamma > 5.0 * off.stderr && off.gamma > 0.0);
        let free = anderson_preset::<f64>(0.0, 0.5).unwrap();
        let g = lyapunov(&free, 0.7, 20_000, 4, 3).unwrap();
        assert!(g.gamma.abs() < 1e-3);
        assert!(lyapunov(&d, 0.8, 10, 4, 3).is_err());
    }

    #[test]
    fn lyapunov_at_critical_energy_shrinks_with_steps() {
        let d = dimer_preset::<f64>(0.5, 0.5).unwrap();
        let mean_abs = |steps| {
            let est = lyapunov(&d, 0.5, steps, 16, 9).unwrap();
            est.per_realization.iter().map(|g| g.abs()).sum::<f64>() / 16.0
        };
        let (a, b, c) = (mean_abs(10_000), mean_abs(100_000), mean_abs(1_000_000));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn unimodular(v in -3.0f64..3.0, t in 0.2f64..3.0, e in -4.0f64..4.0) {
            let m = site_matrix(v, t, e).unwrap();
            prop_assert!((m.det() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn dimer_critical_set(v in 0.1f64..0.99) {
            let d = dimer_preset::<f64>(v, 0.5).unwrap();
            let found = find_critical_energies(&d, (-3.0, 3.0), 2001, 1e-8).unwrap();
            prop_assert_eq!(found.len(), 2);
            prop_assert!((found[0].energy + v).abs() < 1e-8);
            prop_assert!((found[1].energy - v).abs() < 1e-8);
            for r in &found {
                prop_assert!(r.residual <= 1e-8);
            }
        }

        #[test]
        fn products_unimodular(seed in any::<u64>(), e in -3.0f64..3.0) {
            let d = dimer_preset::<f64>(0.4, 0.3).unwrap();
            let c = sample_configuration(&d, 40, seed, 0).unwrap();
            let p = block_product(&d, &c, e, 0, 40).unwrap();
            // rounding in a unit-norm matrix limits det to ε relative to its entries
            let det = p.matrix.det() * (2.0 * p.log_scale).exp();
            let scale = (2.0 * p.log_norm()).exp().max(1.0);
            prop_assert!((det - 1.0).abs() < 1e-9 * scale);
        }
    }
}
