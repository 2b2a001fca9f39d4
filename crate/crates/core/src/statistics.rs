//! Density of states, local eigenvalue statistics and the statistical tests
//! that tell clock behaviour from Poisson behaviour.
//!
//! Everything here is `f64`: these are Monte Carlo pipelines over the
//! generic kernels.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::eigensolve::{
    build_hamiltonian, eigenvalues_by_index, eigenvalues_in_window, ql_eigenvalues, sturm_count,
    Spectrum,
};
use crate::error::{Error, Result};
use crate::model::{sample_box, BoxSize, PolymerModel};
use crate::prufer::{final_free_phase, phase_parts, relative_prufer, AngleMap};
use crate::rng::IDS_STREAM_TAG;
use crate::transfer::{CriticalEnergyReport, ExpansionCoeffs};

/// Bisection width for eigenvalues feeding the statistics.
pub const EIGENVALUE_TOL: f64 = 1e-12;

/// Piecewise-linear estimate of the integrated density of states.
///
/// Knots are strictly increasing in both coordinates, so the estimate is
/// invertible on its support. A windowed estimate is only resolved inside its
/// window and is clamped outside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalIds {
    energies: Vec<f64>,
    levels: Vec<f64>,
    total_count: usize,
    window: Option<(f64, f64)>,
}

impl EmpiricalIds {
    /// Estimate from a pooled sample: the `i`-th order statistic of `n` sits at
    /// level `i/(n−1)`; tied values share the mid level of their block.
    pub fn from_pooled(mut pooled: Vec<f64>) -> Result<Self> {
        if pooled.len() < 2 {
            return Err(Error::InsufficientData {
                what: "pooled eigenvalues",
                needed: 2,
                got: pooled.len(),
            });
        }
        if pooled.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("pooled sample contains non-finite values"));
        }
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pooled.len();
        let scale = 1.0 / (n - 1) as f64;
        let mut energies = Vec::with_capacity(n);
        let mut levels = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && pooled[j + 1] == pooled[i] {
                j += 1;
            }
            energies.push(pooled[i]);
            levels.push(0.5 * (i + j) as f64 * scale);
            i = j + 1;
        }
        if energies.len() < 2 {
            return Err(Error::invalid("pooled sample has a single distinct value"));
        }
        Ok(Self {
            energies,
            levels,
            total_count: n,
            window: None,
        })
    }

    /// Estimate resolved on `window = [a, b)` from the pooled eigenvalues in the
    /// window, `below` eigenvalues under `a` and `sites` pooled sites in total.
    pub fn from_window(
        mut in_window: Vec<f64>,
        below: usize,
        sites: usize,
        window: (f64, f64),
    ) -> Result<Self> {
        let (a, b) = window;
        if !(a < b) {
            return Err(Error::invalid(format!("empty IDS window [{a}, {b})")));
        }
        if sites == 0 || below + in_window.len() > sites {
            return Err(Error::invalid("window counts exceed the pooled site count"));
        }
        if in_window.iter().any(|&x| !(x >= a && x < b)) {
            return Err(Error::invalid("eigenvalue outside the IDS window"));
        }
        in_window.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let total = sites as f64;
        let mut energies = vec![a];
        let mut levels = vec![below as f64 / total];
        let mut k = 0;
        while k < in_window.len() {
            let mut j = k;
            while j + 1 < in_window.len() && in_window[j + 1] == in_window[k] {
                j += 1;
            }
            let level = (below as f64 + 0.5 * (k + j + 1) as f64) / total;
            if in_window[k] == a {
                levels[0] = level;
            } else {
                energies.push(in_window[k]);
                levels.push(level);
            }
            k = j + 1;
        }
        energies.push(b);
        levels.push((below + in_window.len()) as f64 / total);
        Ok(Self {
            energies,
            levels,
            total_count: in_window.len(),
            window: Some(window),
        })
    }

    /// Number of eigenvalues behind the estimate.
    pub fn total_count(&self) -> usize {
        self.total_count
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    /// Energy range over which the estimate is resolved.
    pub fn support(&self) -> (f64, f64) {
        (self.energies[0], *self.energies.last().unwrap())
    }

    pub fn level_range(&self) -> (f64, f64) {
        (self.levels[0], *self.levels.last().unwrap())
    }

    /// `N(E)`.
    pub fn evaluate(&self, energy: f64) -> f64 {
        interpolate(&self.energies, &self.levels, energy)
    }

    /// `N⁻¹(u)`, clamped to the support.
    pub fn invert(&self, level: f64) -> f64 {
        interpolate(&self.levels, &self.energies, level)
    }
}

/// Linear interpolation through strictly increasing `xs`, clamped at the ends.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn ids_box(model: &PolymerModel<f64>, sites: usize, seed: u64, r: u64) -> Result<crate::eigensolve::TridiagonalOperator<f64>> {
    let (_, seq) = sample_box(model, BoxSize::Sites(sites), seed, IDS_STREAM_TAG | r)?;
    build_hamiltonian(&seq)
}

/// Pooled full spectra of `realizations` boxes of `l_ids` sites.
///
/// Boxes use a stream family disjoint from the LES boxes of the same seed.
pub fn empirical_ids(
    model: &PolymerModel<f64>,
    l_ids: usize,
    realizations: usize,
    seed: u64,
) -> Result<EmpiricalIds> {
    if l_ids == 0 || realizations == 0 {
        return Err(Error::invalid("IDS ensemble needs at least one site and one box"));
    }
    let spectra: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| ql_eigenvalues(&ids_box(model, l_ids, seed, r)?))
        .collect::<Result<_>>()?;
    EmpiricalIds::from_pooled(spectra.concat())
}

/// IDS resolved on `window` from Sturm counts and windowed bisection.
pub fn windowed_ids(
    model: &PolymerModel<f64>,
    l_ids: usize,
    realizations: usize,
    seed: u64,
    window: (f64, f64),
) -> Result<EmpiricalIds> {
    if l_ids == 0 || realizations == 0 {
        return Err(Error::invalid("IDS ensemble needs at least one site and one box"));
    }
    let parts: Vec<(usize, Vec<f64>)> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let h = ids_box(model, l_ids, seed, r)?;
            let below = sturm_count(&h, window.0);
            let spec = eigenvalues_in_window(&h, window, EIGENVALUE_TOL)?;
            Ok((below, spec.eigenvalues))
        })
        .collect::<Result<_>>()?;
    let below = parts.iter().map(|p| p.0).sum();
    let in_window = parts.into_iter().flat_map(|p| p.1).collect();
    EmpiricalIds::from_window(in_window, below, l_ids * realizations, window)
}

/// `(N(E + h) − N(E − h))/2h` from Sturm counts on an ensemble of boxes.
pub fn sturm_dos(
    model: &PolymerModel<f64>,
    energy: f64,
    half_width: f64,
    l_sites: usize,
    realizations: usize,
    seed: u64,
) -> Result<f64> {
    if !(half_width > 0.0) {
        return Err(Error::invalid("DOS half width must be positive"));
    }
    if l_sites == 0 || realizations == 0 {
        return Err(Error::invalid("DOS ensemble needs at least one site and one box"));
    }
    let counts: Vec<usize> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let h = ids_box(model, l_sites, seed, r)?;
            Ok(sturm_count(&h, energy + half_width) - sturm_count(&h, energy - half_width))
        })
        .collect::<Result<_>>()?;
    let total: usize = counts.iter().sum();
    Ok(total as f64 / (2.0 * half_width * (l_sites * realizations) as f64))
}

/// IDS resolved around `e0` wide enough to unfold `window_atoms` atoms on
/// either side in boxes of `l_sites` sites.
pub fn local_ids(
    model: &PolymerModel<f64>,
    e0: f64,
    l_sites: usize,
    window_atoms: usize,
    realizations: usize,
    seed: u64,
) -> Result<EmpiricalIds> {
    let atoms = window_atoms.max(1) as f64;
    let pilot_width = 4.0 * atoms / l_sites as f64;
    let pilot = sturm_dos(model, e0, pilot_width, l_sites, realizations.min(200), seed)?;
    if pilot == 0.0 {
        return Err(Error::invalid(format!("no spectrum near E0 = {e0}")));
    }
    // half width of four times the atom window guards against low pilot estimates
    let half = 4.0 * (atoms + 2.0) / (pilot * l_sites as f64);
    windowed_ids(model, l_sites, realizations, seed, (e0 - half, e0 + half))
}

/// `N(E_c) = ⟨η±/π⟩/⟨L±⟩`.
pub fn ids_at_critical(report: &CriticalEnergyReport<f64>, model: &PolymerModel<f64>) -> f64 {
    let pi = std::f64::consts::PI;
    model.average(report.eta_plus / pi, report.eta_minus / pi) / model.mean_length()
}

/// `n(E_c) = ⟨d±⟩/(π⟨L±⟩)`.
pub fn dos_at_critical(coeffs: &ExpansionCoeffs<f64>, model: &PolymerModel<f64>) -> f64 {
    model.average(coeffs.d_plus, coeffs.d_minus) / (std::f64::consts::PI * model.mean_length())
}

/// How a local eigenvalue process is rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// `L·(N(E_j) − N(E₀))`.
    Unfolded,
    /// `n·L·(E_j − E₀)`.
    DosRescaled,
}

/// Rescaling source for [`les_sample`].
#[derive(Debug, Clone, Copy)]
pub enum Rescaling<'a> {
    Unfolded(&'a EmpiricalIds),
    Dos { density: f64 },
}

/// Atoms of one local eigenvalue process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointProcessSample {
    pub atoms: Vec<f64>,
    pub center_energy: f64,
    pub box_sites: usize,
    pub kind: ProcessKind,
    pub realization_index: u64,
}

/// `L·(N(E_j) − N(E₀))` for every eigenvalue of `spectrum`.
pub fn unfold(spectrum: &Spectrum<f64>, ids: &EmpiricalIds, e0: f64, l_sites: usize) -> PointProcessSample {
    let base = ids.evaluate(e0);
    let l = l_sites as f64;
    PointProcessSample {
        atoms: spectrum
            .eigenvalues
            .iter()
            .map(|&e| l * (ids.evaluate(e) - base))
            .collect(),
        center_energy: e0,
        box_sites: l_sites,
        kind: ProcessKind::Unfolded,
        realization_index: 0,
    }
}

/// The rescaled process of one box restricted to atoms in `[−window_atoms, window_atoms)`.
///
/// Only eigenvalues in the matching energy window are bisected.
pub fn les_sample(
    model: &PolymerModel<f64>,
    e0: f64,
    l_sites: usize,
    rescaling: Rescaling<'_>,
    window_atoms: usize,
    seed: u64,
    realization_index: u64,
) -> Result<PointProcessSample> {
    if window_atoms == 0 {
        return Err(Error::invalid("window_atoms must be at least 1"));
    }
    if l_sites == 0 {
        return Err(Error::invalid("box must have at least one site"));
    }
    let l = l_sites as f64;
    let w = window_atoms as f64;
    let (window, kind) = match rescaling {
        Rescaling::Unfolded(ids) => {
            let u0 = ids.evaluate(e0);
            ((ids.invert(u0 - w / l), ids.invert(u0 + w / l)), ProcessKind::Unfolded)
        }
        Rescaling::Dos { density } => {
            if !(density > 0.0) {
                return Err(Error::invalid(format!("density {density} must be positive")));
            }
            let half = w / (density * l);
            ((e0 - half, e0 + half), ProcessKind::DosRescaled)
        }
    };
    let mut sample = PointProcessSample {
        atoms: Vec::new(),
        center_energy: e0,
        box_sites: l_sites,
        kind,
        realization_index,
    };
    if !(window.0 < window.1) {
        return Ok(sample);
    }
    let (_, seq) = sample_box(model, BoxSize::Sites(l_sites), seed, realization_index)?;
    let h = build_hamiltonian(&seq)?;
    let spec = eigenvalues_in_window(&h, window, EIGENVALUE_TOL)?;
    sample.atoms = match rescaling {
        Rescaling::Unfolded(ids) => unfold(&spec, ids, e0, l_sites).atoms,
        Rescaling::Dos { density } => spec
            .eigenvalues
            .iter()
            .map(|&e| density * l * (e - e0))
            .collect(),
    };
    Ok(sample)
}

/// [`les_sample`] for realizations `0..count`, in index order.
pub fn les_ensemble(
    model: &PolymerModel<f64>,
    e0: f64,
    l_sites: usize,
    rescaling: Rescaling<'_>,
    window_atoms: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PointProcessSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|r| les_sample(model, e0, l_sites, rescaling, window_atoms, seed, r))
        .collect()
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> f64 {
    let mut xs = values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_exp1(values: &[f64]) -> f64 {
    ks_distance(values, |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() })
}

pub fn ks_uniform(values: &[f64]) -> f64 {
    ks_distance(values, |x| x.clamp(0.0, 1.0))
}

/// Distance to the point mass at 1: `max(P(g < 1), P(g > 1))`.
pub fn ks_degenerate_one(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let below = values.iter().filter(|&&g| g < 1.0).count() as f64;
    let above = values.iter().filter(|&&g| g > 1.0).count() as f64;
    (below / n).max(above / n)
}

/// Half width of the band around 1 used for gap concentration.
pub const NEAR_ONE: f64 = 0.1;

/// Nearest-neighbour gap statistics pooled over samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStatistics {
    pub gaps: Vec<f64>,
    /// Realization of each gap.
    pub realizations: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub ks_vs_exp1: f64,
    pub ks_vs_degenerate1: f64,
    /// Fraction of gaps in `[1 − NEAR_ONE, 1 + NEAR_ONE]`.
    pub fraction_near_one: f64,
}

pub const MIN_GAPS: usize = 100;

fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn fraction_near_one(gaps: &[f64]) -> f64 {
    let hits = gaps
        .iter()
        .filter(|&&g| (g - 1.0).abs() <= NEAR_ONE)
        .count();
    hits as f64 / gaps.len() as f64
}

/// Gaps between consecutive atoms of each sample; never across samples.
pub fn gap_statistics(samples: &[PointProcessSample]) -> Result<GapStatistics> {
    let mut gaps = Vec::new();
    let mut realizations = Vec::new();
    for s in samples {
        for w in s.atoms.windows(2) {
            gaps.push(w[1] - w[0]);
            realizations.push(s.realization_index);
        }
    }
    if gaps.len() < MIN_GAPS {
        return Err(Error::InsufficientData {
            what: "pooled gaps",
            needed: MIN_GAPS,
            got: gaps.len(),
        });
    }
    let (mean, variance) = mean_variance(&gaps);
    Ok(GapStatistics {
        ks_vs_exp1: ks_exp1(&gaps),
        ks_vs_degenerate1: ks_degenerate_one(&gaps),
        fraction_near_one: fraction_near_one(&gaps),
        mean,
        variance,
        gaps,
        realizations,
    })
}

/// Count bins `0, 1, 2, 3, ≥ 4`.
pub const COUNT_BINS: usize = 5;
pub const MIN_COUNT_SAMPLES: usize = 500;

/// Counting statistics of samples in disjoint intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingStatistics {
    pub intervals: Vec<(f64, f64)>,
    /// `counts[s][i]`: atoms of sample `s` in interval `i`.
    pub counts: Vec<Vec<usize>>,
    /// Per interval: observed frequencies of `0, 1, 2, 3, ≥ 4`.
    pub histograms: Vec<[usize; COUNT_BINS]>,
    /// Per interval: Poisson(|I|) probabilities of the same bins.
    pub expected: Vec<[f64; COUNT_BINS]>,
    pub chi_square: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Joint test against the product pmf on bins `0, 1, ≥ 2` per interval.
    pub joint_chi_square: f64,
    pub joint_p_value: f64,
    pub mean_counts: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// `P(k)` for Poisson(λ) with the last bin collecting the tail.
pub fn poisson_bins<const B: usize>(lambda: f64) -> [f64; B] {
    let mut out = [0.0; B];
    let mut term = (-lambda).exp();
    let mut acc = 0.0;
    for (k, slot) in out.iter_mut().enumerate().take(B - 1) {
        *slot = term;
        acc += term;
        term *= lambda / (k + 1) as f64;
    }
    out[B - 1] = (1.0 - acc).max(0.0);
    out
}

fn chi_square(observed: &[usize], probabilities: &[f64], n: usize) -> (f64, f64) {
    let stat: f64 = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("positive degrees of freedom").cdf(stat);
    (stat, p)
}

pub fn counting_statistics(
    samples: &[PointProcessSample],
    intervals: &[(f64, f64)],
) -> Result<CountingStatistics> {
    if samples.len() < MIN_COUNT_SAMPLES {
        return Err(Error::InsufficientData {
            what: "counting samples",
            needed: MIN_COUNT_SAMPLES,
            got: samples.len(),
        });
    }
    if intervals.is_empty() {
        return Err(Error::invalid("no counting intervals"));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if sorted.iter().any(|i| !(i.0 < i.1)) || sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::invalid("counting intervals must be nonempty and disjoint"));
    }
    let m = intervals.len();
    let n = samples.len();
    let counts: Vec<Vec<usize>> = samples
        .iter()
        .map(|s| {
            intervals
                .iter()
                .map(|&(a, b)| s.atoms.iter().filter(|&&x| x >= a && x < b).count())
                .collect()
        })
        .collect();
    let mut histograms = vec![[0usize; COUNT_BINS]; m];
    for row in &counts {
        for (i, &c) in row.iter().enumerate() {
            histograms[i][c.min(COUNT_BINS - 1)] += 1;
        }
    }
    let expected: Vec<[f64; COUNT_BINS]> = intervals
        .iter()
        .map(|&(a, b)| poisson_bins::<COUNT_BINS>(b - a))
        .collect();
    let (chi_square_stats, p_values): (Vec<f64>, Vec<f64>) = histograms
        .iter()
        .zip(&expected)
        .map(|(h, e)| chi_square(h, e, n))
        .unzip();

    // joint cells over bins 0, 1, ≥2 in each interval
    let cells = 3usize.pow(m as u32);
    let mut joint_obs = vec![0usize; cells];
    for row in &counts {
        let idx = row.iter().fold(0, |acc, &c| acc * 3 + c.min(2));
        joint_obs[idx] += 1;
    }
    let marg: Vec<[f64; 3]> = intervals
        .iter()
        .map(|&(a, b)| poisson_bins::<3>(b - a))
        .collect();
    let joint_p: Vec<f64> = (0..cells)
        .map(|mut idx| {
            let mut p = 1.0;
            for i in (0..m).rev() {
                p *= marg[i][idx % 3];
                idx /= 3;
            }
            p
        })
        .collect();
    let (joint_chi_square, joint_p_value) = chi_square(&joint_obs, &joint_p, n);

    let mean_counts: Vec<f64> = (0..m)
        .map(|i| counts.iter().map(|r| r[i] as f64).sum::<f64>() / n as f64)
        .collect();
    let covariance = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    counts
                        .iter()
                        .map(|r| (r[i] as f64 - mean_counts[i]) * (r[j] as f64 - mean_counts[j]))
                        .sum::<f64>()
                        / (n - 1) as f64
                })
                .collect()
        })
        .collect();
    Ok(CountingStatistics {
        intervals: intervals.to_vec(),
        counts,
        histograms,
        expected,
        chi_square: chi_square_stats,
        p_values,
        joint_chi_square,
        joint_p_value,
        mean_counts,
        covariance,
    })
}

/// Rescaled spacings around a critical energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockSpacingSample {
    /// `n(E_c)·L·(E'_{j+1} − E'_j)` for `j = −j_max − 1 ..= j_max − 1`, realization-major.
    pub rescaled_gaps: Vec<f64>,
    pub realizations: Vec<u64>,
    /// Gap index `j` of each entry.
    pub positions: Vec<i64>,
    pub mean: f64,
    pub variance: f64,
    pub fraction_near_one: f64,
    /// Set when the report fails the irrationality condition.
    pub irrationality_warning: bool,
}

/// Spacings of the eigenvalues `E'_j` re-indexed so that `E'_{−1} < E_c ≤ E'_0`.
pub fn clock_spacing_statistic(
    model: &PolymerModel<f64>,
    report: &CriticalEnergyReport<f64>,
    density: f64,
    l_sites: usize,
    realizations: usize,
    j_max: usize,
    seed: u64,
) -> Result<ClockSpacingSample> {
    if !(density > 0.0) {
        return Err(Error::invalid(format!("density {density} must be positive")));
    }
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let e_c = report.energy;
    let scale = density * l_sites as f64;
    let per: Vec<Vec<f64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (_, seq) = sample_box(model, BoxSize::Sites(l_sites), seed, r)?;
            let h = build_hamiltonian(&seq)?;
            let c = sturm_count(&h, e_c);
            if c < j_max + 1 || c + j_max >= l_sites {
                return Err(Error::invalid(format!(
                    "box of {l_sites} sites has too few eigenvalues around E_c for j_max = {j_max}"
                )));
            }
            let eigs = eigenvalues_by_index(&h, c - j_max - 1, 2 * j_max + 2, EIGENVALUE_TOL)?;
            Ok(eigs.windows(2).map(|w| scale * (w[1] - w[0])).collect())
        })
        .collect::<Result<_>>()?;
    let mut rescaled_gaps = Vec::new();
    let mut reals = Vec::new();
    let mut positions = Vec::new();
    for (r, gaps) in per.into_iter().enumerate() {
        for (k, g) in gaps.into_iter().enumerate() {
            rescaled_gaps.push(g);
            reals.push(r as u64);
            positions.push(k as i64 - j_max as i64 - 1);
        }
    }
    let (mean, variance) = mean_variance(&rescaled_gaps);
    Ok(ClockSpacingSample {
        fraction_near_one: fraction_near_one(&rescaled_gaps),
        rescaled_gaps,
        realizations: reals,
        positions,
        mean,
        variance,
        irrationality_warning: !report.irrationality_violations.is_empty(),
    })
}

/// Fractional Prüfer phases `φ(E_c, L)/π` and their distance to U[0,1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityResult {
    pub phases: Vec<f64>,
    pub ks: f64,
}

pub fn uniformity_test(
    model: &PolymerModel<f64>,
    report: &CriticalEnergyReport<f64>,
    l_sites: usize,
    realizations: usize,
    seed: u64,
) -> Result<UniformityResult> {
    if realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let map = AngleMap::new(report.diagonalizer)?;
    let phases: Vec<f64> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (_, seq) = sample_box(model, BoxSize::Sites(l_sites), seed, r)?;
            let theta = map.eval(final_free_phase(&seq, report.energy));
            Ok(phase_parts(theta).fractional_part / std::f64::consts::PI)
        })
        .collect::<Result<_>>()?;
    Ok(UniformityResult {
        ks: ks_uniform(&phases),
        phases,
    })
}

/// `sup_x |Ψ_L(x) − x|` for each realization.
pub fn psi_deviation(
    model: &PolymerModel<f64>,
    report: &CriticalEnergyReport<f64>,
    density: f64,
    l_sites: usize,
    xs: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (_, seq) = sample_box(model, BoxSize::Sites(l_sites), seed, r)?;
            let psi = relative_prufer(&seq, &report.diagonalizer, report.energy, density, xs)?;
            Ok(psi
                .iter()
                .zip(xs)
                .map(|(p, x)| (p - x).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Local Hölder exponents of `N` and `N⁻¹` from dyadic increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderProbe {
    pub rho1: f64,
    pub rho2: f64,
    pub product: f64,
    pub exceeds_two_thirds: bool,
    pub scales_used: usize,
}

/// Log-log slopes of two-sided increments, capped at 1 (an exponent above 1
/// only reflects a vanishing derivative).
pub fn holder_probe(ids: &EmpiricalIds, e0: f64, scales: &[f64]) -> Result<HolderProbe> {
    let u0 = ids.evaluate(e0);
    let fit = |f: &dyn Fn(f64) -> f64| {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for &h in scales {
            if !(h > 0.0) {
                continue;
            }
            let inc = f(h);
            if inc > 0.0 {
                xs.push(h.ln());
                ys.push(inc.ln());
            }
        }
        if xs.len() < 2 {
            return None;
        }
        Some(linear_fit(&xs, &ys).0)
    };
    let rho1 = fit(&|h| {
        0.5 * ((ids.evaluate(e0 + h) - u0).abs() + (u0 - ids.evaluate(e0 - h)).abs())
    });
    let rho2 = fit(&|h| {
        0.5 * ((ids.invert(u0 + h) - e0).abs() + (e0 - ids.invert(u0 - h)).abs())
    });
    let (Some(rho1), Some(rho2)) = (rho1, rho2) else {
        return Err(Error::InsufficientData {
            what: "non-degenerate Hölder scales",
            needed: 2,
            got: 0,
        });
    };
    let (rho1, rho2) = (rho1.min(1.0), rho2.min(1.0));
    Ok(HolderProbe {
        rho1,
        rho2,
        product: rho1 * rho2,
        exceeds_two_thirds: rho1 * rho2 > 2.0 / 3.0,
        scales_used: scales.iter().filter(|h| **h > 0.0).count(),
    })
}

/// Monte Carlo frequencies of one and of two or more eigenvalues in a small interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinamiProbe {
    pub box_sites: usize,
    pub interval: (f64, f64),
    pub p_at_least_one: f64,
    pub p_at_least_two: f64,
    /// `P(≥2)/P(≥1)²`, `NaN` when `P(≥1) = 0`.
    pub ratio: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn minami_probe(
    model: &PolymerModel<f64>,
    l_sites: usize,
    beta: f64,
    gamma: f64,
    c2: f64,
    realizations: usize,
    e0: f64,
    seed: u64,
) -> Result<MinamiProbe> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid(format!("beta = {beta} must lie in (0, 1)")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma = {gamma} must lie in (0, 1]")));
    }
    if !(c2 > 0.0) || realizations == 0 {
        return Err(Error::invalid("c2 and realizations must be positive"));
    }
    let l = l_sites as f64;
    let box_sites = (l.powf(beta).round() as usize).max(1);
    let half = 0.5 * c2 / l.powf(gamma);
    let interval = (e0 - half, e0 + half);
    let counts: Vec<usize> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let (_, seq) = sample_box(model, BoxSize::Sites(box_sites), seed, r)?;
            let h = build_hamiltonian(&seq)?;
            Ok(sturm_count(&h, interval.1) - sturm_count(&h, interval.0))
        })
        .collect::<Result<_>>()?;
    let n = realizations as f64;
    let p1 = counts.iter().filter(|&&c| c >= 1).count() as f64 / n;
    let p2 = counts.iter().filter(|&&c| c >= 2).count() as f64 / n;
    Ok(MinamiProbe {
        box_sites,
        interval,
        p_at_least_one: p1,
        p_at_least_two: p2,
        ratio: if p1 > 0.0 { p2 / (p1 * p1) } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dimer_preset, LatticeSequences};
    use crate::rng::substream;
    use rand::Rng;

    fn exp_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect()
    }

    #[test]
    fn ids_interpolates_and_inverts() {
        let ids = EmpiricalIds::from_pooled(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ids.evaluate(-1.0), 0.0);
        assert_eq!(ids.evaluate(9.0), 1.0);
        assert!((ids.evaluate(1.5) - 0.375).abs() < 1e-15);
        for e in [0.3, 1.7, 3.9] {
            assert!((ids.invert(ids.evaluate(e)) - e).abs() < 1e-12);
        }
        let tied = EmpiricalIds::from_pooled(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((tied.evaluate(1.0) - 0.5).abs() < 1e-15);
        assert!(EmpiricalIds::from_pooled(vec![1.0]).is_err());
    }

    #[test]
    fn constant_chain_ids_symmetric() {
        let seq = LatticeSequences::constant(401, 0.7);
        let h = build_hamiltonian(&seq).unwrap();
        let ids = EmpiricalIds::from_pooled(ql_eigenvalues(&h).unwrap()).unwrap();
        assert!((ids.evaluate(0.7) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn windowed_ids_matches_full() {
        let d = dimer_preset(0.6, 0.5).unwrap();
        let full = empirical_ids(&d, 300, 40, 5).unwrap();
        let win = windowed_ids(&d, 300, 40, 5, (1.0, 1.4)).unwrap();
        for e in [1.05, 1.2, 1.33] {
            assert!((full.evaluate(e) - win.evaluate(e)).abs() < 1.0 / (300.0 * 40.0));
        }
        assert_eq!(win.evaluate(0.0), win.level_range().0);
    }

    #[test]
    fn dimer_ids_symmetric() {
        let d = dimer_preset(0.5, 0.5).unwrap();
        let ids = empirical_ids(&d, 400, 200, 1).unwrap();
        for e in [0.2, 0.5, 1.1, 1.7] {
            assert!((ids.evaluate(e) + ids.evaluate(-e) - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn critical_formulas() {
        use crate::transfer::{critical_report, expansion_coeffs};
        let d = dimer_preset(std::f64::consts::FRAC_1_SQRT_2, 0.5).unwrap();
        let r = critical_report(&d, std::f64::consts::FRAC_1_SQRT_2, 1e-8, 10).unwrap();
        assert!((ids_at_critical(&r, &d) - 0.625).abs() < 1e-9);
        let d6 = dimer_preset(0.6, 0.5).unwrap();
        let r6 = critical_report(&d6, 0.6, 1e-8, 10).unwrap();
        let c6 = expansion_coeffs(&d6, &r6, 0.01).unwrap();
        let n = dos_at_critical(&c6, &d6);
        let oracle = sturm_dos(&d6, 0.6, 0.01, 20_000, 20, 3).unwrap();
        assert!((n - oracle).abs() < 0.15 * oracle, "{n} vs {oracle}");
    }

    #[test]
    fn affine_unfolding() {
        let pooled: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let ids = EmpiricalIds::from_pooled(pooled).unwrap();
        let spec = Spectrum {
            eigenvalues: vec![0.1, 0.45, 0.52, 0.9],
            window: None,
        };
        let s = unfold(&spec, &ids, 0.5, 100);
        for (a, e) in s.atoms.iter().zip(&spec.eigenvalues) {
            assert!((a - 100.0 * (e - 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn les_below_spectrum_is_empty() {
        let d = dimer_preset(0.6, 0.5).unwrap();
        let s = les_sample(&d, -5.0, 500, Rescaling::Dos { density: 0.2 }, 5, 1, 0).unwrap();
        assert!(s.atoms.is_empty());
        let ids = local_ids(&d, 1.2, 500, 5, 20, 1).unwrap();
        let s = les_sample(&d, 1.2, 500, Rescaling::Unfolded(&ids), 5, 1, 0).unwrap();
        assert!(s.atoms.windows(2).all(|w| w[0] < w[1]));
        assert!(s.atoms.iter().all(|a| a.abs() <= 5.0 + 1e-9));
    }

    #[test]
    fn ks_null_samples() {
        let gaps = exp_sample(10_000, 3);
        assert!(ks_exp1(&gaps) < 0.03);
        let mut rng = substream(4, 0);
        let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_uniform(&u) < 0.03);
    }

    #[test]
    fn lattice_gaps_are_degenerate() {
        let samples: Vec<PointProcessSample> = (0..20)
            .map(|r| PointProcessSample {
                atoms: (0..10).map(|k| k as f64 + 0.37).collect(),
                center_energy: 0.0,
                box_sites: 1,
                kind: ProcessKind::DosRescaled,
                realization_index: r,
            })
            .collect();
        let g = gap_statistics(&samples).unwrap();
        assert_eq!(g.gaps.len(), 180);
        assert!(g.gaps.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert_eq!(g.fraction_near_one, 1.0);
        assert!(gap_statistics(&samples[..5]).is_err());
    }

    #[test]
    fn poisson_pmf_values() {
        let p = poisson_bins::<5>(1.0);
        assert!((p[0] - 0.36788).abs() < 1e-5);
        assert!((p[2] - 0.18394).abs() < 1e-5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counting_poisson_and_clock() {
        // Poisson(1) process on [−5, 5)
        let poisson: Vec<PointProcessSample> = (0..1000u64)
            .map(|r| {
                let gaps = exp_sample(40, 100 + r);
                let mut atoms = Vec::new();
                let mut x = -5.0;
                for g in gaps {
                    x += g;
                    if x >= 5.0 {
                        break;
                    }
                    atoms.push(x);
                }
                PointProcessSample {
                    atoms,
                    center_energy: 0.0,
                    box_sites: 1,
                    kind: ProcessKind::Unfolded,
                    realization_index: r,
                }
            })
            .collect();
        let c = counting_statistics(&poisson, &[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert!(c.p_values[0] > 0.001 && c.joint_p_value > 0.001);
        assert!(c.covariance[0][1].abs() < 0.1);

        // shifted unit lattice: exactly one atom per unit interval
        let mut rng = substream(9, 0);
        let clock: Vec<PointProcessSample> = (0..600u64)
            .map(|r| {
                let shift: f64 = rng.random();
                PointProcessSample {
                    atoms: (-5..5).map(|k| k as f64 + shift).collect(),
                    center_energy: 0.0,
                    box_sites: 1,
                    kind: ProcessKind::DosRescaled,
                    realization_index: r,
                }
            })
            .collect();
        let c = counting_statistics(&clock, &[(0.0, 1.0)]).unwrap();
        assert_eq!(c.histograms[0][1], 600);
        assert!(c.covariance[0][0] < 1e-12);
        assert!(c.p_values[0] < 1e-10);
        assert!(counting_statistics(&clock[..100], &[(0.0, 1.0)]).is_err());
        assert!(counting_statistics(&clock, &[(0.0, 1.0), (0.5, 2.0)]).is_err());
    }

    #[test]
    fn holder_synthetic() {
        let pooled: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0).collect();
        let affine = EmpiricalIds::from_pooled(pooled.clone()).unwrap();
        let scales: Vec<f64> = (3..10).map(|k| 0.5f64.powi(k)).collect();
        let h = holder_probe(&affine, 0.5, &scales).unwrap();
        assert!((h.rho1 - 1.0).abs() < 0.05 && (h.rho2 - 1.0).abs() < 0.05);
        // u = √E on [0, 1]: quantiles E = u²
        let sqrt_cdf = EmpiricalIds::from_pooled(pooled.iter().map(|u| u * u).collect()).unwrap();
        let h = holder_probe(&sqrt_cdf, 0.0, &scales).unwrap();
        assert!((h.rho1 - 0.5).abs() < 0.05, "{}", h.rho1);
        assert!((h.rho2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn minami_below_spectrum() {
        let d = dimer_preset(0.6, 0.5).unwrap();
        let m = minami_probe(&d, 10_000, 0.5, 0.5, 1.0, 50, -5.0, 1).unwrap();
        assert_eq!((m.p_at_least_one, m.p_at_least_two), (0.0, 0.0));
        assert!(minami_probe(&d, 10_000, 1.0, 0.5, 1.0, 50, 1.2, 1).is_err());
    }

    #[test]
    fn median_and_fit() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let (s, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }
}
