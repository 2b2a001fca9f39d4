//! Free and modified Prüfer phases.
//!
//! The free phase `θ⁰_n` is the continuous angle of `(t(n)u(n), u(n−1))`; the
//! modified phase is its image `θ_n = m(θ⁰_n)` under the angle map of a
//! diagonalizer `M`, so that at a critical energy every polymer block
//! advances it by exactly `η±`.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Configuration, LatticeSequences, PolymerModel, Sign};
use crate::scalar::{wrap_two_pi, Real};
use crate::transfer::{
    conjugated_coefficients, perturbed_eta, site_matrix, CriticalEnergyReport, ExpansionCoeffs,
    Mat2,
};

/// Lifts the angle of `y` to the representative closest to `prev` with the
/// increment in `[−π/2, 3π/2)`.
pub fn free_lift<T: Real>(prev: T, y: [T; 2]) -> T {
    let half_pi = T::FRAC_PI_2();
    let raw = y[1].atan2(y[0]);
    prev + wrap_two_pi(raw - prev + half_pi) - half_pi
}

/// The lifted angle map `θ ↦ m(θ)` of a matrix with positive determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleMap<T> {
    matrix: Mat2<T>,
    m0: T,
}

impl<T: Real> AngleMap<T> {
    pub fn new(matrix: Mat2<T>) -> Result<Self> {
        if !(matrix.det() > T::zero()) {
            return Err(Error::invalid(format!(
                "angle map needs det M > 0, got {}",
                matrix.det()
            )));
        }
        let m0 = matrix.a21.atan2(matrix.a11);
        Ok(Self { matrix, m0 })
    }

    pub fn matrix(&self) -> &Mat2<T> {
        &self.matrix
    }

    /// `m(θ)`, with `m(θ + π) = m(θ) + π` and `m(0) = atan2(M e₀)`.
    pub fn eval(&self, theta: T) -> T {
        let pi = T::PI();
        let half_pi = T::FRAC_PI_2();
        let k = (theta / pi).floor();
        let r = theta - k * pi;
        let (s, c) = r.sin_cos();
        let w = self.matrix.apply([c, s]);
        // the true offset lies in [0, π); the wider window absorbs rounding at r ≈ 0
        let offset = wrap_two_pi(w[1].atan2(w[0]) - self.m0 + half_pi) - half_pi;
        k * pi + self.m0 + offset
    }

    /// `|M e_θ|`.
    pub fn stretch(&self, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        let w = self.matrix.apply([c, s]);
        w[0].hypot(w[1])
    }
}

/// `m(θ)` for a single evaluation.
pub fn angle_map_m<T: Real>(m: &Mat2<T>, theta: T) -> Result<T> {
    Ok(AngleMap::new(*m)?.eval(theta))
}

/// Prüfer phases and amplitudes at one energy, indexed `0..=L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruferTrace<T> {
    pub free_angles: Vec<T>,
    pub modified_angles: Vec<T>,
    /// `ln R_n` of the modified amplitude.
    pub log_amplitudes: Vec<T>,
    pub energy: T,
    pub initial_angle: T,
}

impl<T: Real> PruferTrace<T> {
    /// `R_n`; overflows only for astronomically growing solutions.
    pub fn amplitudes(&self) -> Vec<T> {
        self.log_amplitudes.iter().map(|l| l.exp()).collect()
    }

    pub fn final_free(&self) -> T {
        *self.free_angles.last().expect("trace holds the initial angle")
    }

    pub fn final_modified(&self) -> T {
        *self.modified_angles.last().expect("trace holds the initial angle")
    }
}

/// One recursion step on a unit vector: returns the new unit vector, the lifted
/// free angle and the log of the growth factor.
#[inline]
fn step<T: Real>(y: [T; 2], theta: T, v: T, t: T, energy: T) -> ([T; 2], T, T) {
    let next = site_matrix(v, t, energy)
        .expect("hoppings validated positive")
        .apply(y);
    let theta = free_lift(theta, next);
    let norm = next[0].hypot(next[1]);
    ([next[0] / norm, next[1] / norm], theta, norm.ln())
}

fn check_sequences<T: Real>(seq: &LatticeSequences<T>) -> Result<()> {
    if seq.potentials.len() != seq.hoppings.len() {
        return Err(Error::invalid("potential and hopping sequences differ in length"));
    }
    if let Some(t) = seq.hoppings.iter().find(|t| !(**t > T::zero())) {
        return Err(Error::invalid(format!("hopping {t} is not strictly positive")));
    }
    Ok(())
}

/// Evolves `(t(n)u(n), u(n−1))` from the free angle `theta0` across every site.
pub fn prufer_trace<T: Real>(
    seq: &LatticeSequences<T>,
    m: &Mat2<T>,
    energy: T,
    theta0: T,
) -> Result<PruferTrace<T>> {
    check_sequences(seq)?;
    let map = AngleMap::new(*m)?;
    let n = seq.num_sites();
    let mut free_angles = Vec::with_capacity(n + 1);
    let mut modified_angles = Vec::with_capacity(n + 1);
    let mut log_amplitudes = Vec::with_capacity(n + 1);
    let (s, c) = theta0.sin_cos();
    let mut y = [c, s];
    let mut theta = theta0;
    let mut log_free = T::zero();
    free_angles.push(theta);
    modified_angles.push(map.eval(theta));
    log_amplitudes.push(map.stretch(theta).ln());
    for (&v, &t) in seq.potentials.iter().zip(&seq.hoppings) {
        let (ny, nt, growth) = step(y, theta, v, t, energy);
        y = ny;
        theta = nt;
        log_free = log_free + growth;
        free_angles.push(theta);
        modified_angles.push(map.eval(theta));
        log_amplitudes.push(log_free + map.stretch(theta).ln());
    }
    Ok(PruferTrace {
        free_angles,
        modified_angles,
        log_amplitudes,
        energy,
        initial_angle: theta0,
    })
}

/// Final free phase `θ⁰_L(E)` from the Dirichlet start `θ₀ = 0`, without storing the trace.
pub fn final_free_phase<T: Real>(seq: &LatticeSequences<T>, energy: T) -> T {
    let mut y = [T::one(), T::zero()];
    let mut theta = T::zero();
    for (&v, &t) in seq.potentials.iter().zip(&seq.hoppings) {
        let (ny, nt, _) = step(y, theta, v, t, energy);
        y = ny;
        theta = nt;
    }
    theta
}

/// Offset between the free Dirichlet phase and the eigenvalue count:
/// `u(L) = 0` exactly when `θ⁰_L ≡ π/2 (mod π)`.
pub const DIRICHLET_WINDING_OFFSET: f64 = std::f64::consts::FRAC_PI_2;

/// Number of Dirichlet eigenvalues below `E` read off `θ⁰_L(E)`.
pub fn winding_count<T: Real>(final_free_phase: T) -> i64 {
    ((final_free_phase + T::lit(DIRICHLET_WINDING_OFFSET)) / T::PI())
        .floor()
        .to_i64()
        .expect("finite phase")
}

/// `θ = integer_part·π + fractional_part` with `fractional_part ∈ [0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseParts<T> {
    pub integer_part: i64,
    pub fractional_part: T,
}

pub fn phase_parts<T: Real>(theta: T) -> PhaseParts<T> {
    let pi = T::PI();
    let k = (theta / pi).floor();
    let mut frac = theta - k * pi;
    let mut k = k.to_i64().expect("finite phase");
    if frac >= pi {
        frac = frac - pi;
        k += 1;
    } else if frac < T::zero() {
        frac = frac + pi;
        k -= 1;
    }
    PhaseParts {
        integer_part: k,
        fractional_part: frac,
    }
}

/// `Ψ_L(x) = (θ_L(E_c + x/(n(E_c)L)) − θ_L(E_c))/π` for each `x`, on one configuration.
pub fn relative_prufer<T: Real>(
    seq: &LatticeSequences<T>,
    m: &Mat2<T>,
    e_c: T,
    n_ec: T,
    xs: &[T],
) -> Result<Vec<T>> {
    if !(n_ec > T::zero()) {
        return Err(Error::invalid(format!("density of states {n_ec} must be positive")));
    }
    check_sequences(seq)?;
    if seq.num_sites() == 0 {
        return Err(Error::invalid("relative phase needs at least one site"));
    }
    let map = AngleMap::new(*m)?;
    let scale = n_ec * T::from_usize(seq.num_sites()).unwrap();
    let base = map.eval(final_free_phase(seq, e_c));
    Ok(xs
        .iter()
        .map(|&x| {
            if x == T::zero() {
                return T::zero();
            }
            (map.eval(final_free_phase(seq, e_c + x / scale)) - base) / T::PI()
        })
        .collect())
}

/// Phase shift across one polymer at `E_c + ε` in the modified frame:
/// `ρ e_S = M T^{E_c+ε} M⁻¹ e_θ`, with `S` continuous in `θ` and `ε`.
pub fn phase_shift<T: Real>(
    model: &PolymerModel<T>,
    report: &CriticalEnergyReport<T>,
    sign: Sign,
    eps: T,
    theta: T,
) -> (T, T) {
    let (a, b) = conjugated_coefficients(model, report, sign, eps);
    let eta = match sign {
        Sign::Plus => report.eta_plus,
        Sign::Minus => report.eta_minus,
    };
    shift_from(a, b, perturbed_eta(eta, a), theta)
}

fn shift_from<T: Real>(a: Complex<T>, b: Complex<T>, eta_eps: T, theta: T) -> (T, T) {
    let rot = Complex::from_polar(T::one(), -(theta + theta));
    let correction = Complex::new(T::one(), T::zero()) + b.conj() / a * rot;
    let rho = a.norm() * correction.norm();
    (theta + eta_eps + correction.arg(), rho)
}

/// `Σ_{ℓ<N} c_{ω_ℓ} e^{2iS^ℓ}` with `S⁰ = θ₀` and `S^{ℓ+1} = S_{ε,ω_ℓ}(S^ℓ)`.
pub fn oscillatory_sum(
    model: &PolymerModel<f64>,
    report: &CriticalEnergyReport<f64>,
    coeffs: &ExpansionCoeffs<f64>,
    config: &Configuration,
    eps: f64,
    theta0: f64,
    n: usize,
) -> Result<Complex<f64>> {
    if n == 0 {
        return Err(Error::invalid("oscillatory sum needs N ≥ 1"));
    }
    if config.num_blocks() < n {
        return Err(Error::invalid(format!(
            "configuration has {} blocks, sum needs {n}",
            config.num_blocks()
        )));
    }
    let shifts = [Sign::Plus, Sign::Minus].map(|s| {
        let (a, b) = conjugated_coefficients(model, report, s, eps);
        let eta = if s == Sign::Plus {
            report.eta_plus
        } else {
            report.eta_minus
        };
        (a, b, perturbed_eta(eta, a))
    });
    let mut sum = Complex::new(0.0, 0.0);
    let mut s = theta0;
    for sign in &config.signs[..n] {
        sum += coeffs.c(*sign) * Complex::from_polar(1.0, 2.0 * s);
        let (a, b, eta_eps) = shifts[(*sign == Sign::Minus) as usize];
        s = shift_from(a, b, eta_eps, s).0;
    }
    Ok(sum)
}
