//! Wave-packet spreading on finite boxes.
//!
//! The propagator is applied through a full eigendecomposition, so any time
//! is reached exactly and spectral projections are a reweighting of the
//! eigenbasis.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{build_hamiltonian, dense_oracle, DenseEigen, TridiagonalOperator};
use crate::error::{Error, Result};
use crate::model::{sample_box, BoxSize, PolymerModel};
use crate::statistics::linear_fit;

/// Eigen-weights below this are dropped from the propagator.
const WEIGHT_CUTOFF: f64 = 1e-12;
/// Weight allowed beyond 0.9 of the box radius before the box is deemed too small.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;
/// Time points evaluated together to reuse each eigenvector while it is hot.
const TIME_BATCH: usize = 8;

/// Spectral projection applied to the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    None,
    /// `P(I)` for `I = [a, b]`.
    Inside(f64, f64),
    /// `P(ℝ ∖ I)`.
    Outside(f64, f64),
}

impl Projection {
    fn keeps(&self, e: f64) -> bool {
        match *self {
            Projection::None => true,
            Projection::Inside(a, b) => e >= a && e <= b,
            Projection::Outside(a, b) => !(e >= a && e <= b),
        }
    }

    pub fn window(window: Option<(f64, f64)>) -> Self {
        match window {
            Some((a, b)) => Projection::Inside(a, b),
            None => Projection::None,
        }
    }
}

/// A box Hamiltonian, its eigenbasis and the projected initial state `P δ_j`.
#[derive(Debug, Clone)]
pub struct EvolutionSetup {
    pub hamiltonian: TridiagonalOperator<f64>,
    pub eigen: Arc<DenseEigen<f64>>,
    pub initial_site: usize,
    pub projection: Projection,
    /// `(j, φ_j(initial_site))` for the retained eigenvectors.
    active: Vec<(usize, f64)>,
}

impl EvolutionSetup {
    /// Diagonalizes `h`; the initial site is the box center.
    pub fn new(hamiltonian: TridiagonalOperator<f64>, projection: Projection) -> Result<Self> {
        let eigen = Arc::new(dense_oracle(&hamiltonian)?);
        let center = hamiltonian.num_sites() / 2;
        Self::with_eigen(hamiltonian, eigen, center, projection)
    }

    /// Reuses an eigendecomposition of `hamiltonian`.
    pub fn with_eigen(
        hamiltonian: TridiagonalOperator<f64>,
        eigen: Arc<DenseEigen<f64>>,
        initial_site: usize,
        projection: Projection,
    ) -> Result<Self> {
        let n = hamiltonian.num_sites();
        if eigen.n != n {
            return Err(Error::invalid(format!(
                "eigendecomposition of {} sites does not match a box of {n}",
                eigen.n
            )));
        }
        if initial_site >= n {
            return Err(Error::invalid(format!("initial site {initial_site} outside the box")));
        }
        let active = (0..n)
            .filter(|&j| projection.keeps(eigen.values[j]))
            .map(|j| (j, eigen.vector(j)[initial_site]))
            .filter(|(_, w)| w.abs() >= WEIGHT_CUTOFF)
            .collect();
        Ok(Self {
            hamiltonian,
            eigen,
            initial_site,
            projection,
            active,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.hamiltonian.num_sites()
    }

    /// Distance from the initial site to the nearer box edge.
    pub fn radius(&self) -> usize {
        self.initial_site.min(self.num_sites() - 1 - self.initial_site)
    }

    /// `‖P δ_j‖²`.
    pub fn initial_norm_sq(&self) -> f64 {
        self.active.iter().map(|(_, w)| w * w).sum()
    }

    /// Number of eigenvectors carrying the projected state.
    pub fn active_modes(&self) -> usize {
        self.active.len()
    }

    /// `|ψ_t(x)|²` at `sites` for a batch of times, from the modes `(j, w_j)`.
    fn densities(&self, modes: &[(usize, f64)], sites: &[usize], times: &[f64]) -> Vec<Vec<f64>> {
        let m = sites.len();
        let contiguous = m == self.num_sites();
        let mut re = vec![vec![0.0; m]; times.len()];
        let mut im = vec![vec![0.0; m]; times.len()];
        let mut gathered = vec![0.0; m];
        for &(j, w) in modes {
            let full = self.eigen.vector(j);
            let phi: &[f64] = if contiguous {
                full
            } else {
                for (g, &x) in gathered.iter_mut().zip(sites) {
                    *g = full[x];
                }
                &gathered
            };
            let e = self.eigen.values[j];
            for (b, &t) in times.iter().enumerate() {
                let (s, c) = (e * t).sin_cos();
                let (cr, ci) = (w * c, -w * s);
                for ((r, i), p) in re[b].iter_mut().zip(im[b].iter_mut()).zip(phi) {
                    *r += cr * p;
                    *i += ci * p;
                }
            }
        }
        re.into_iter()
            .zip(im)
            .map(|(r, i)| r.iter().zip(&i).map(|(a, b)| a * a + b * b).collect())
            .collect()
    }

    /// Modes of the unprojected `δ_j`, which the boundary guard follows.
    fn reference_modes(&self) -> Vec<(usize, f64)> {
        (0..self.num_sites())
            .map(|j| (j, self.eigen.vector(j)[self.initial_site]))
            .filter(|(_, w)| w.abs() >= WEIGHT_CUTOFF)
            .collect()
    }
}

/// `ψ_t = Σ_j e^{−iE_j t} w_j φ_j` with `w_j = φ_j(initial_site)` over the retained modes.
pub fn evolve_amplitudes(setup: &EvolutionSetup, t: f64) -> Vec<Complex<f64>> {
    let mut psi = vec![Complex::new(0.0, 0.0); setup.num_sites()];
    for &(j, w) in &setup.active {
        let phase = Complex::from_polar(w, -setup.eigen.values[j] * t);
        for (p, &v) in psi.iter_mut().zip(setup.eigen.vector(j)) {
            *p += phase * v;
        }
    }
    psi
}

/// Time averaging of the moment integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `(1/T) ∫₀^∞ e^{−t/T} f(t) dt`, truncated at `10T`.
    Abel,
    /// `(1/T) ∫₀^T f(t) dt`.
    Cesaro,
}

/// Abel integrals are cut at this multiple of `T`.
pub const ABEL_CUTOFF: f64 = 10.0;

/// `f(t) = Σ_x |x − j|^q |ψ_t(x)|²` on `times`, checking the boundary guard.
///
/// A sharp window leaves a slowly decaying tail in `P(I)δ_j` that sits near
/// the edges from `t = 0`, so for projected states the guard follows the
/// unprojected `δ_j`, whose far weight measures how far the wavefront got.
fn integrand(setup: &EvolutionSetup, q: f64, times: &[f64]) -> Result<Vec<f64>> {
    let n = setup.num_sites();
    let c = setup.initial_site as f64;
    let far = 0.9 * setup.radius() as f64;
    let all: Vec<usize> = (0..n).collect();
    let far_sites: Vec<usize> = all
        .iter()
        .copied()
        .filter(|&x| (x as f64 - c).abs() > far)
        .collect();
    let weights: Vec<f64> = all.iter().map(|&x| (x as f64 - c).abs().powf(q)).collect();
    let reference = match setup.projection {
        Projection::None => None,
        _ => Some(setup.reference_modes()),
    };
    let values: Vec<Result<Vec<f64>>> = times
        .par_chunks(TIME_BATCH)
        .map(|batch| {
            let rho = setup.densities(&setup.active, &all, batch);
            let outside: Vec<f64> = match &reference {
                None => rho
                    .iter()
                    .map(|r| far_sites.iter().map(|&x| r[x]).sum())
                    .collect(),
                Some(modes) => setup
                    .densities(modes, &far_sites, batch)
                    .iter()
                    .map(|r| r.iter().sum())
                    .collect(),
            };
            rho.iter()
                .zip(&outside)
                .zip(batch)
                .map(|((r, &weight), &time)| {
                    if weight > BOUNDARY_TOLERANCE {
                        return Err(Error::BoundaryContamination { time, weight });
                    }
                    Ok(r.iter().zip(&weights).map(|(p, w)| p * w).sum())
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(times.len());
    for chunk in values {
        out.extend(chunk?);
    }
    Ok(out)
}

fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| end * k as f64 / (points - 1) as f64)
        .collect()
}

fn check_moment_args(q: f64, points: usize) -> Result<()> {
    if !(q > 0.0) {
        return Err(Error::invalid(format!("moment order q = {q} must be positive")));
    }
    if points < 2 {
        return Err(Error::invalid("quadrature needs at least 2 points"));
    }
    Ok(())
}

/// `M_q(T)` by the trapezoid rule on `quadrature_points` uniform times.
pub fn moment(
    setup: &EvolutionSetup,
    q: f64,
    t: f64,
    averaging: Averaging,
    quadrature_points: usize,
) -> Result<f64> {
    check_moment_args(q, quadrature_points)?;
    if !(t > 0.0) {
        return Err(Error::invalid(format!("averaging time T = {t} must be positive")));
    }
    let end = match averaging {
        Averaging::Cesaro => t,
        Averaging::Abel => ABEL_CUTOFF * t,
    };
    let grid = uniform_grid(end, quadrature_points);
    let f = integrand(setup, q, &grid)?;
    let h = end / (quadrature_points - 1) as f64;
    let kernel = |s: f64| match averaging {
        Averaging::Cesaro => 1.0,
        Averaging::Abel => (-s / t).exp(),
    };
    let sum: f64 = grid
        .iter()
        .zip(&f)
        .enumerate()
        .map(|(k, (&s, &v))| {
            let edge = if k == 0 || k + 1 == grid.len() { 0.5 } else { 1.0 };
            edge * kernel(s) * v
        })
        .sum();
    Ok(sum * h / t)
}

/// Time-averaged moments over a grid of averaging times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCurve {
    pub q: f64,
    pub times: Vec<f64>,
    pub moments: Vec<f64>,
    pub averaging: Averaging,
}

/// `M_q(T)` for every `T` in `times`.
///
/// Cesàro moments share one grid on `[0, max T]` with a cumulative trapezoid;
/// Abel moments are integrated separately per `T`.
pub fn moment_curve(
    setup: &EvolutionSetup,
    q: f64,
    times: &[f64],
    averaging: Averaging,
    quadrature_points: usize,
) -> Result<MomentCurve> {
    check_moment_args(q, quadrature_points)?;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("averaging times must be positive and nonempty"));
    }
    let moments = match averaging {
        Averaging::Abel => times
            .iter()
            .map(|&t| moment(setup, q, t, averaging, quadrature_points))
            .collect::<Result<Vec<_>>>()?,
        Averaging::Cesaro => {
            let end = times.iter().cloned().fold(0.0, f64::max);
            let grid = uniform_grid(end, quadrature_points);
            let f = integrand(setup, q, &grid)?;
            let h = end / (quadrature_points - 1) as f64;
            let mut cumulative = vec![0.0; grid.len()];
            for k in 1..grid.len() {
                cumulative[k] = cumulative[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
            }
            times
                .iter()
                .map(|&t| {
                    let pos = t / h;
                    let k = (pos.floor() as usize).min(grid.len() - 2);
                    let frac = pos - k as f64;
                    // integrand linear between nodes: exact trapezoid on the partial cell
                    let fk = f[k] + frac * (f[k + 1] - f[k]);
                    (cumulative[k] + 0.5 * frac * h * (f[k] + fk)) / t
                })
                .collect()
        }
    };
    Ok(MomentCurve {
        q,
        times: times.to_vec(),
        moments,
        averaging,
    })
}

/// Parameters of a transport-exponent fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportConfig {
    pub q: f64,
    pub times: Vec<f64>,
    pub quadrature_points: usize,
    /// Box of `2·box_radius + 1` sites centered on the initial site.
    pub box_radius: usize,
    pub averaging: Averaging,
}

impl TransportConfig {
    pub fn new(q: f64, times: Vec<f64>, box_radius: usize) -> Self {
        Self {
            q,
            times,
            quadrature_points: 2000,
            box_radius,
            averaging: Averaging::Cesaro,
        }
    }
}

/// Slope of `log M_q` against `log T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportFit {
    pub window: Option<(f64, f64)>,
    pub slope: f64,
    /// Half width of a 95% interval: across realizations when there are
    /// several, from the regression residuals otherwise.
    pub half_width: f64,
    pub per_realization: Vec<f64>,
    pub curves: Vec<MomentCurve>,
}

fn fit_curve(curve: &MomentCurve) -> Result<(f64, f64)> {
    if curve.moments.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::NumericalFailure("nonpositive moment in log-log fit".into()));
    }
    let x: Vec<f64> = curve.times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = curve.moments.iter().map(|m| m.ln()).collect();
    let (slope, intercept) = linear_fit(&x, &y);
    let n = x.len() as f64;
    if x.len() < 3 {
        return Ok((slope, 0.0));
    }
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let rss: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok((slope, 1.96 * (rss / (n - 2.0) / sxx).sqrt()))
}

fn summarize(
    window: Option<(f64, f64)>,
    curves: Vec<MomentCurve>,
) -> Result<TransportFit> {
    let fits: Vec<(f64, f64)> = curves.iter().map(fit_curve).collect::<Result<_>>()?;
    let per_realization: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let n = per_realization.len() as f64;
    let slope = per_realization.iter().sum::<f64>() / n;
    let half_width = if per_realization.len() > 1 {
        let var = per_realization.iter().map(|s| (s - slope).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        fits[0].1
    };
    Ok(TransportFit {
        window,
        slope,
        half_width,
        per_realization,
        curves,
    })
}

fn check_config(cfg: &TransportConfig) -> Result<()> {
    if cfg.box_radius == 0 {
        return Err(Error::invalid("box radius must be positive"));
    }
    if cfg.times.len() < 2 {
        return Err(Error::invalid("a slope needs at least two averaging times"));
    }
    Ok(())
}

/// Fits for several windows of the same realizations; each box is
/// diagonalized once and shared by all windows.
pub fn transport_exponents(
    model: &PolymerModel<f64>,
    cfg: &TransportConfig,
    windows: &[Option<(f64, f64)>],
    realizations: usize,
    seed: u64,
) -> Result<Vec<TransportFit>> {
    check_config(cfg)?;
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let sites = 2 * cfg.box_radius + 1;
    let mut curves: Vec<Vec<MomentCurve>> = vec![Vec::new(); windows.len()];
    for r in 0..realizations as u64 {
        let (_, seq) = sample_box(model, BoxSize::Sites(sites), seed, r)?;
        let h = build_hamiltonian(&seq)?;
        let eigen = Arc::new(dense_oracle(&h)?);
        for (w, window) in windows.iter().enumerate() {
            let setup = EvolutionSetup::with_eigen(
                h.clone(),
                Arc::clone(&eigen),
                cfg.box_radius,
                Projection::window(*window),
            )?;
            let curve = moment_curve(&setup, cfg.q, &cfg.times, cfg.averaging, cfg.quadrature_points)
                .map_err(|e| e.context(format!("realization {r}, window {window:?}")))?;
            curves[w].push(curve);
        }
    }
    windows
        .iter()
        .zip(curves)
        .map(|(w, c)| summarize(*w, c))
        .collect()
}

/// Fit for one window.
pub fn transport_exponent(
    model: &PolymerModel<f64>,
    cfg: &TransportConfig,
    window: Option<(f64, f64)>,
    realizations: usize,
    seed: u64,
) -> Result<TransportFit> {
    Ok(transport_exponents(model, cfg, &[window], realizations, seed)?.remove(0))
}

/// Ballistic reference: the same fit on the free chain.
pub fn free_chain_exponent(cfg: &TransportConfig) -> Result<TransportFit> {
    check_config(cfg)?;
    let h = TridiagonalOperator::free_chain(2 * cfg.box_radius + 1, 0.0)?;
    let setup = EvolutionSetup::new(h, Projection::None)?;
    let curve = moment_curve(&setup, cfg.q, &cfg.times, cfg.averaging, cfg.quadrature_points)?;
    summarize(None, vec![curve])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dimer_preset;

    /// `J_n(z)` from its power series.
    fn bessel_j(n: u32, z: f64) -> f64 {
        let half = 0.5 * z;
        let mut term = half.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for m in 1..200 {
            term *= -half * half / (m as f64 * (m + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    fn free_setup(sites: usize) -> EvolutionSetup {
        EvolutionSetup::new(TridiagonalOperator::free_chain(sites, 0.0).unwrap(), Projection::None).unwrap()
    }

    fn dimer_setup(sites: usize, projection: Projection) -> EvolutionSetup {
        let d = dimer_preset(0.5, 0.5).unwrap();
        let (_, seq) = sample_box(&d, BoxSize::Sites(sites), 3, 0).unwrap();
        EvolutionSetup::new(build_hamiltonian(&seq).unwrap(), projection).unwrap()
    }

    #[test]
    fn starts_at_delta() {
        let s = free_setup(21);
        let psi = evolve_amplitudes(&s, 0.0);
        for (x, p) in psi.iter().enumerate() {
            let want = if x == 10 { 1.0 } else { 0.0 };
            assert!((p - Complex::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn free_chain_bessel_law() {
        let s = free_setup(201);
        let psi = evolve_amplitudes(&s, 5.0);
        for (x, p) in psi.iter().enumerate() {
            let d = (x as i64 - 100).unsigned_abs() as u32;
            let want = bessel_j(d, 10.0).powi(2);
            assert!((p.norm_sqr() - want).abs() < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn unitary() {
        let s = dimer_setup(301, Projection::None);
        for t in [0.0, 1.0, 17.0, 60.0] {
            let norm: f64 = evolve_amplitudes(&s, t).iter().map(|p| p.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-8);
        }
        let p = dimer_setup(301, Projection::Inside(-0.6, 0.6));
        let n0 = p.initial_norm_sq();
        for t in [0.0, 9.0, 40.0] {
            let norm: f64 = evolve_amplitudes(&p, t).iter().map(|p| p.norm_sqr()).sum();
            assert!((norm - n0).abs() < 1e-8);
        }
    }

    #[test]
    fn full_window_matches_unprojected() {
        let a = dimer_setup(201, Projection::None);
        let b = dimer_setup(201, Projection::Inside(-10.0, 10.0));
        let ma = moment(&a, 2.0, 20.0, Averaging::Cesaro, 400).unwrap();
        let mb = moment(&b, 2.0, 20.0, Averaging::Cesaro, 400).unwrap();
        assert!((ma - mb).abs() <= 1e-8 * ma.max(1.0));
    }

    #[test]
    fn small_time_moment_vanishes() {
        let s = dimer_setup(101, Projection::None);
        assert!(moment(&s, 2.0, 1e-4, Averaging::Cesaro, 50).unwrap() < 1e-6);
        assert!(moment(&s, 2.0, 1.0, Averaging::Cesaro, 1).is_err());
        assert!(moment(&s, 0.0, 1.0, Averaging::Cesaro, 10).is_err());
    }

    #[test]
    fn free_chain_moments() {
        let s = free_setup(801);
        let t = 60.0;
        let cesaro = moment(&s, 2.0, t, Averaging::Cesaro, 2000).unwrap();
        assert!((cesaro / (2.0 * t * t / 3.0) - 1.0).abs() < 1e-3);
        let curve = moment_curve(&s, 2.0, &[20.0, 40.0, 60.0], Averaging::Cesaro, 2000).unwrap();
        assert!((curve.moments[2] - cesaro).abs() < 1e-3 * cesaro);
        // (1/T)∫₀^{10T} e^{−t/T} 2t² dt = 2T²(2 − 122 e^{−10})
        let abel = moment(&s, 2.0, 5.0, Averaging::Abel, 2000).unwrap();
        let want = 2.0 * 25.0 * (2.0 - 122.0 * (-10.0f64).exp());
        assert!((abel / want - 1.0).abs() < 1e-4);
    }

    #[test]
    fn boundary_guard() {
        let s = free_setup(101);
        match moment(&s, 2.0, 100.0, Averaging::Cesaro, 200) {
            Err(Error::BoundaryContamination { .. }) => {}
            other => panic!("expected contamination, got {other:?}"),
        }
    }

    #[test]
    fn guard_follows_wavefront_for_projected_states() {
        let s = dimer_setup(401, Projection::Inside(-0.6, 0.6));
        let psi = evolve_amplitudes(&s, 0.0);
        let tail: f64 = psi[..20].iter().chain(&psi[381..]).map(|p| p.norm_sqr()).sum();
        assert!(tail > BOUNDARY_TOLERANCE);
        assert!(moment(&s, 2.0, 10.0, Averaging::Cesaro, 100).is_ok());
        assert!(matches!(
            moment(&s, 2.0, 200.0, Averaging::Cesaro, 400),
            Err(Error::BoundaryContamination { .. })
        ));
    }

    #[test]
    fn moments_within_box_bound() {
        let s = dimer_setup(301, Projection::Inside(-0.6, 0.6));
        let curve = moment_curve(&s, 2.0, &[10.0, 30.0, 60.0], Averaging::Cesaro, 600).unwrap();
        let cap = (s.radius() as f64).powi(2) * s.initial_norm_sq();
        assert!(curve.moments.iter().all(|&m| m >= 0.0 && m <= cap));
    }

    #[test]
    fn decomposition_bound() {
        let (a, b) = (-0.6, 0.6);
        let full = dimer_setup(401, Projection::None);
        let inside = dimer_setup(401, Projection::Inside(a, b));
        let outside = dimer_setup(401, Projection::Outside(a, b));
        for t in [5.0, 20.0, 60.0] {
            let m = |s: &EvolutionSetup| moment(s, 2.0, t, Averaging::Cesaro, 300).unwrap();
            assert!(m(&full) <= 3.0 * (m(&inside) + m(&outside)));
        }
    }

    #[test]
    fn localized_window_bounded() {
        let s = dimer_setup(2001, Projection::Inside(1.4, 2.0));
        let times = [50.0, 100.0, 200.0, 400.0];
        let curve = moment_curve(&s, 2.0, &times, Averaging::Cesaro, 2000).unwrap();
        let max = curve.moments.iter().cloned().fold(0.0, f64::max);
        let min = curve.moments.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 2.0, "{:?}", curve.moments);
    }

    #[test]
    fn free_chain_slope() {
        let cfg = TransportConfig::new(2.0, vec![20.0, 40.0, 70.0, 100.0], 300);
        let fit = free_chain_exponent(&cfg).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1, "{}", fit.slope);
    }
}
