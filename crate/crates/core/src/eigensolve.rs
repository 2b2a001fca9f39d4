//! Spectra of finite Dirichlet Hamiltonians.
//!
//! Windowed Sturm-sequence bisection is the workhorse: the statistics
//! pipelines only ever need a few dozen eigenvalues near a reference energy.
//! The implicit QL iteration in [`dense_oracle`] is the independent check,
//! and also supplies full eigendecompositions for time evolution.

use crate::error::{Error, Result};
use crate::model::LatticeSequences;
use crate::scalar::Real;

/// Default size limit for [`dense_oracle`].
pub const DENSE_ORACLE_CAP: usize = 8192;

const MAX_QL_ITERATIONS: usize = 60;
const MAX_INVERSE_ITERATIONS: usize = 8;

/// Real symmetric tridiagonal matrix with entries `H[n][n] = v(n)` and
/// `H[n-1][n] = H[n][n-1] = -t(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator<T> {
    diagonal: Vec<T>,
    /// `offdiagonal[n - 1] = t(n)`, `n = 1..L`.
    offdiagonal: Vec<T>,
}

impl<T: Real> TridiagonalOperator<T> {
    pub fn new(diagonal: Vec<T>, offdiagonal: Vec<T>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::invalid("operator needs at least one site"));
        }
        if offdiagonal.len() + 1 != diagonal.len() {
            return Err(Error::invalid(format!(
                "{} sites need {} couplings, got {}",
                diagonal.len(),
                diagonal.len() - 1,
                offdiagonal.len()
            )));
        }
        if let Some(t) = offdiagonal.iter().find(|t| !(**t > T::zero())) {
            return Err(Error::invalid(format!("coupling {t} is not strictly positive")));
        }
        Ok(Self {
            diagonal,
            offdiagonal,
        })
    }

    /// Free chain of `num_sites` sites with constant potential.
    pub fn free_chain(num_sites: usize, potential: T) -> Result<Self> {
        Self::new(
            vec![potential; num_sites],
            vec![T::one(); num_sites.saturating_sub(1)],
        )
    }

    pub fn num_sites(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    pub fn offdiagonal(&self) -> &[T] {
        &self.offdiagonal
    }

    /// Gershgorin enclosure `[min(v) − 2 max t, max(v) + 2 max t]`.
    pub fn gershgorin(&self) -> (T, T) {
        let tmax = self
            .offdiagonal
            .iter()
            .fold(T::zero(), |acc, &t| acc.max(t));
        let vmin = self.diagonal.iter().fold(T::infinity(), |a, &v| a.min(v));
        let vmax = self.diagonal.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
        let two = T::lit(2.0);
        (vmin - two * tmax, vmax + two * tmax)
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm(&self) -> T {
        let n = self.num_sites();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.offdiagonal[i - 1] } else { T::zero() };
                let right = if i + 1 < n { self.offdiagonal[i] } else { T::zero() };
                self.diagonal[i].abs() + left + right
            })
            .fold(T::zero(), T::max)
    }

    /// `H x` for a dense vector.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.num_sites();
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y = y - self.offdiagonal[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y = y - self.offdiagonal[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Copy without the last site.
    pub fn without_last_site(&self) -> Option<Self> {
        if self.num_sites() < 2 {
            return None;
        }
        let n = self.num_sites() - 1;
        Some(Self {
            diagonal: self.diagonal[..n].to_vec(),
            offdiagonal: self.offdiagonal[..n - 1].to_vec(),
        })
    }

    /// Dense row-major matrix, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.num_sites();
        let mut a = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            a[i][i] = self.diagonal[i];
            if i + 1 < n {
                a[i][i + 1] = -self.offdiagonal[i];
                a[i + 1][i] = -self.offdiagonal[i];
            }
        }
        a
    }
}

/// Finite-box Hamiltonian with Dirichlet ends: `t(0)` and `t(L)` are dropped.
pub fn build_hamiltonian<T: Real>(seq: &LatticeSequences<T>) -> Result<TridiagonalOperator<T>> {
    if seq.num_sites() == 0 {
        return Err(Error::invalid("lattice sequence is empty"));
    }
    if seq.hoppings.len() != seq.potentials.len() {
        return Err(Error::invalid("potentials and hoppings differ in length"));
    }
    TridiagonalOperator::new(seq.potentials.clone(), seq.hoppings[1..].to_vec())
}

/// Number of eigenvalues strictly below `energy`.
///
/// Counts negative pivots of the `LDLᵀ` recursion for `H − E`. An exact zero
/// pivot is replaced by `+ε‖H‖`, i.e. the count is taken at `E − 0`.
pub fn sturm_count<T: Real>(h: &TridiagonalOperator<T>, energy: T) -> usize {
    let guard = T::epsilon() * h.norm().max(T::min_positive_value());
    let d = &h.diagonal;
    let t = &h.offdiagonal;
    let mut count = 0;
    let mut pivot = d[0] - energy;
    if pivot == T::zero() {
        pivot = guard;
    }
    if pivot < T::zero() {
        count += 1;
    }
    for i in 1..d.len() {
        pivot = (d[i] - energy) - t[i - 1] * t[i - 1] / pivot;
        if pivot == T::zero() {
            pivot = guard;
        }
        if pivot < T::zero() {
            count += 1;
        }
    }
    count
}

/// Sorted eigenvalues, optionally tagged with the window they were taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub eigenvalues: Vec<T>,
    pub window: Option<(T, T)>,
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Bisects every eigenvalue in `[lo, hi)`; `clo`, `chi` are the counts at the ends.
fn bisect_interval<T: Real>(
    h: &TridiagonalOperator<T>,
    lo: T,
    hi: T,
    clo: usize,
    chi: usize,
    tol: T,
    out: &mut Vec<T>,
) {
    let half = T::lit(0.5);
    let mut stack = vec![(lo, hi, clo, chi)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if cb <= ca {
            continue;
        }
        let mid = a + half * (b - a);
        if b - a <= tol || mid <= a || mid >= b {
            out.extend(std::iter::repeat_n(mid, cb - ca));
            continue;
        }
        let cm = sturm_count(h, mid);
        // left half must come out first
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
}

/// All eigenvalues in `[window.0, window.1)`, each bracketed to width `tol`.
pub fn eigenvalues_in_window<T: Real>(
    h: &TridiagonalOperator<T>,
    window: (T, T),
    tol: T,
) -> Result<Spectrum<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid(format!("bisection tolerance {tol} must be positive")));
    }
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::invalid(format!("empty window [{a}, {b})")));
    }
    let ca = sturm_count(h, a);
    let cb = sturm_count(h, b);
    let mut eigenvalues = Vec::with_capacity(cb.saturating_sub(ca));
    bisect_interval(h, a, b, ca, cb, tol, &mut eigenvalues);
    Ok(Spectrum {
        eigenvalues,
        window: Some(window),
    })
}

/// Eigenvalues with 0-based indices `first..first + count` in increasing order.
pub fn eigenvalues_by_index<T: Real>(
    h: &TridiagonalOperator<T>,
    first: usize,
    count: usize,
    tol: T,
) -> Result<Vec<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid(format!("bisection tolerance {tol} must be positive")));
    }
    let end = first + count;
    if end > h.num_sites() {
        return Err(Error::invalid(format!(
            "indices {first}..{end} exceed {} eigenvalues",
            h.num_sites()
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let (glo, ghi) = padded_gershgorin(h, tol);
    let half = T::lit(0.5);
    // shrink the bracket until it holds exactly the requested indices at its ends
    let (mut lo, mut clo) = (glo, 0);
    let mut hi_lo = ghi;
    while clo != first {
        let mid = lo + half * (hi_lo - lo);
        if mid <= lo || mid >= hi_lo {
            break;
        }
        let c = sturm_count(h, mid);
        if c <= first {
            lo = mid;
            clo = c;
        } else {
            hi_lo = mid;
        }
    }
    let (mut hi, mut chi) = (ghi, h.num_sites());
    let mut lo_hi = lo;
    while chi != end {
        let mid = lo_hi + half * (hi - lo_hi);
        if mid <= lo_hi || mid >= hi {
            break;
        }
        let c = sturm_count(h, mid);
        if c >= end {
            hi = mid;
            chi = c;
        } else {
            lo_hi = mid;
        }
    }
    let mut values = Vec::with_capacity(chi - clo);
    bisect_interval(h, lo, hi, clo, chi, tol, &mut values);
    let skip = first - clo;
    Ok(values.into_iter().skip(skip).take(count).collect())
}

fn padded_gershgorin<T: Real>(h: &TridiagonalOperator<T>, tol: T) -> (T, T) {
    let (lo, hi) = h.gershgorin();
    let pad = tol + T::lit(16.0) * T::epsilon() * (T::one() + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

/// Every eigenvalue, bisected inside the Gershgorin enclosure.
pub fn full_spectrum<T: Real>(h: &TridiagonalOperator<T>, tol: T) -> Result<Spectrum<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid(format!("bisection tolerance {tol} must be positive")));
    }
    let window = padded_gershgorin(h, tol);
    let mut eigenvalues = Vec::with_capacity(h.num_sites());
    bisect_interval(h, window.0, window.1, 0, h.num_sites(), tol, &mut eigenvalues);
    Ok(Spectrum {
        eigenvalues,
        window: Some(window),
    })
}

/// Partial-pivoting LU of a tridiagonal matrix (LAPACK `gttrf` layout).
struct TridiagonalLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: Real> TridiagonalLu<T> {
    fn factor(h: &TridiagonalOperator<T>, shift: T, tiny: T) -> Self {
        let n = h.num_sites();
        let mut d: Vec<T> = h.diagonal.iter().map(|&v| v - shift).collect();
        let mut dl: Vec<T> = h.offdiagonal.iter().map(|&t| -t).collect();
        let mut du = dl.clone();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != T::zero() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        for x in d.iter_mut() {
            if x.abs() < tiny {
                *x = if *x < T::zero() { -tiny } else { tiny };
            }
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [T]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize_with_sign<T: Real>(x: &mut [T]) {
    let norm = x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
    let mut pivot = T::zero();
    for &v in x.iter() {
        if v.abs() > pivot.abs() {
            pivot = v;
        }
    }
    let scale = if pivot < T::zero() { -norm } else { norm };
    for v in x.iter_mut() {
        *v = *v / scale;
    }
}

/// Unit eigenvector for an eigenvalue `energy` by inverse iteration.
///
/// Sign convention: the largest-magnitude entry is positive.
pub fn eigenvector<T: Real>(h: &TridiagonalOperator<T>, energy: T) -> Result<Vec<T>> {
    let n = h.num_sites();
    let norm = h.norm().max(T::min_positive_value());
    if n == 1 {
        return Ok(vec![T::one()]);
    }
    let lu = TridiagonalLu::factor(h, energy, T::epsilon() * norm);
    let target = T::lit(1e-8).max(T::lit(64.0) * T::epsilon()) * norm;
    let mut x: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.25) * T::from_usize(i).unwrap().sin())
        .collect();
    for _ in 0..MAX_INVERSE_ITERATIONS {
        lu.solve(&mut x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "inverse iteration diverged at E = {energy}"
            )));
        }
        normalize_with_sign(&mut x);
        let hx = h.apply(&x);
        let residual = hx
            .iter()
            .zip(&x)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - energy * b) * (a - energy * b))
            .sqrt();
        if residual <= target {
            return Ok(x);
        }
    }
    Err(Error::NumericalFailure(format!(
        "inverse iteration did not converge at E = {energy} after {MAX_INVERSE_ITERATIONS} steps"
    )))
}

/// Full eigendecomposition. `vectors` is column-major: eigenvector `j`
/// occupies `vectors[j * n..(j + 1) * n]`.
#[derive(Debug, Clone)]
pub struct DenseEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    pub n: usize,
}

impl<T: Real> DenseEigen<T> {
    pub fn vector(&self, j: usize) -> &[T] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        Spectrum {
            eigenvalues: self.values.clone(),
            window: None,
        }
    }
}

/// Implicit QL iteration on `(d, e)`, where `e[i]` couples `i` and `i + 1`.
/// When `z` is given (column-major, initialised to the identity) the rotations
/// are accumulated into it.
fn tql<T: Real>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NumericalFailure(format!(
                    "QL iteration did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zi1 = &mut right[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

fn tridiagonal_input<T: Real>(h: &TridiagonalOperator<T>) -> (Vec<T>, Vec<T>) {
    let d = h.diagonal.clone();
    let mut e: Vec<T> = h.offdiagonal.iter().map(|&t| -t).collect();
    e.push(T::zero());
    (d, e)
}

/// All eigenvalues by implicit QL, sorted. `O(L²)`; used for pooled spectra.
pub fn ql_eigenvalues<T: Real>(h: &TridiagonalOperator<T>) -> Result<Vec<T>> {
    let (mut d, mut e) = tridiagonal_input(h);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// Dense eigendecomposition by implicit QL, limited to [`DENSE_ORACLE_CAP`] sites.
pub fn dense_oracle<T: Real>(h: &TridiagonalOperator<T>) -> Result<DenseEigen<T>> {
    dense_oracle_with_cap(h, DENSE_ORACLE_CAP)
}

pub fn dense_oracle_with_cap<T: Real>(
    h: &TridiagonalOperator<T>,
    cap: usize,
) -> Result<DenseEigen<T>> {
    let n = h.num_sites();
    if n > cap {
        return Err(Error::invalid(format!(
            "dense oracle limited to {cap} sites, operator has {n}"
        )));
    }
    let (mut d, mut e) = tridiagonal_input(h);
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    tql(&mut d, &mut e, Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let values = order.iter().map(|&j| d[j]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &order {
        let start = vectors.len();
        vectors.extend_from_slice(&z[j * n..(j + 1) * n]);
        normalize_with_sign(&mut vectors[start..]);
    }
    Ok(DenseEigen { values, vectors, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dimer_preset, sample_box, BoxSize};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_site() -> TridiagonalOperator<f64> {
        TridiagonalOperator::new(vec![0.0, 0.0], vec![1.0]).unwrap()
    }

    fn random_instance(seed: u64, idx: u64, sites: usize) -> TridiagonalOperator<f64> {
        let m = dimer_preset(0.6, 0.5).unwrap();
        let (_, seq) = sample_box(&m, BoxSize::Sites(sites), seed, idx).unwrap();
        build_hamiltonian(&seq).unwrap()
    }

    #[test]
    fn hamiltonian_matrix_entries() {
        let seq = LatticeSequences {
            potentials: vec![0.0, 0.0],
            hoppings: vec![1.0, 1.0],
        };
        let h = build_hamiltonian(&seq).unwrap();
        assert_eq!(h.to_dense(), vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
        let bad = LatticeSequences {
            potentials: vec![0.0, 0.0],
            hoppings: vec![1.0, 0.0],
        };
        assert!(build_hamiltonian(&bad).is_err());
    }

    #[test]
    fn free_chain_three_sites() {
        let h = TridiagonalOperator::free_chain(3, 0.0).unwrap();
        let s = full_spectrum(&h, 1e-13).unwrap();
        let expect = [-(2.0f64.sqrt()), 0.0, 2.0f64.sqrt()];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_site() {
        let h = TridiagonalOperator::<f64>::new(vec![3.0], vec![]).unwrap();
        assert_eq!(full_spectrum(&h, 1e-12).unwrap().eigenvalues.len(), 1);
        assert!((full_spectrum(&h, 1e-12).unwrap().eigenvalues[0] - 3.0).abs() < 1e-12);
        let h5 = TridiagonalOperator::<f64>::new(vec![5.0], vec![]).unwrap();
        assert!((full_spectrum(&h5, 1e-12).unwrap().eigenvalues[0] - 5.0).abs() < 1e-12);
        assert_eq!(eigenvector(&h5, 5.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn sturm_two_site() {
        let h = two_site();
        assert_eq!(sturm_count(&h, 0.0), 1);
        assert_eq!(sturm_count(&h, -2.0), 0);
        assert_eq!(sturm_count(&h, 2.0), 2);
        // strictly below: an eigenvalue at E is not counted
        assert_eq!(sturm_count(&h, 1.0), 1);
        assert_eq!(sturm_count(&h, -1.0), 0);
        let h3 = TridiagonalOperator::free_chain(3, 0.0).unwrap();
        assert_eq!(sturm_count(&h3, 0.1), 2);
    }

    #[test]
    fn window_bisection() {
        let h = TridiagonalOperator::<f64>::free_chain(3, 0.0).unwrap();
        let s = eigenvalues_in_window(&h, (-0.5, 0.5), 1e-12).unwrap();
        assert_eq!(s.eigenvalues.len(), 1);
        assert!(s.eigenvalues[0].abs() < 1e-12);
        assert!(eigenvalues_in_window(&h, (-10.0, -5.0), 1e-12).unwrap().is_empty());
        assert!(eigenvalues_in_window(&h, (-1.0, 1.0), 0.0).is_err());
        assert!(eigenvalues_in_window(&h, (1.0, -1.0), 1e-9).is_err());
    }

    #[test]
    fn free_chain_closed_form() {
        let l = 50;
        let tol = 1e-12;
        let h = TridiagonalOperator::free_chain(l, 0.0).unwrap();
        let s = full_spectrum(&h, tol).unwrap();
        for (j, e) in s.eigenvalues.iter().enumerate() {
            let exact = -2.0 * (((j + 1) as f64) * PI / (l as f64 + 1.0)).cos();
            assert!((e - exact).abs() <= tol);
        }
    }

    #[test]
    fn two_site_eigenvectors() {
        let h = two_site();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v = eigenvector(&h, -1.0).unwrap();
        assert!((v[0] - r).abs() < 1e-10 && (v[1] - r).abs() < 1e-10);
        let w = eigenvector(&h, 1.0).unwrap();
        assert!((w[0].abs() - r).abs() < 1e-10 && (w[0] + w[1]).abs() < 1e-10);
    }

    #[test]
    fn eigenvector_residual_on_random_instance() {
        let h = random_instance(3, 1, 200);
        let s = full_spectrum(&h, 1e-13).unwrap();
        for &e in s.eigenvalues.iter().step_by(17) {
            let v = eigenvector(&h, e).unwrap();
            let hv = h.apply(&v);
            let res: f64 = hv.iter().zip(&v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * h.norm());
        }
    }

    #[test]
    fn window_matches_oracle_on_dimer_instance() {
        let h = random_instance(11, 0, 40);
        let oracle = dense_oracle(&h).unwrap();
        let (lo, hi) = h.gershgorin();
        let s = eigenvalues_in_window(&h, (lo - 1e-9, hi + 1e-9), 1e-12).unwrap();
        assert_eq!(s.len(), 40);
        for (a, b) in s.eigenvalues.iter().zip(&oracle.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_identities() {
        let h = random_instance(5, 2, 60);
        let eig = dense_oracle(&h).unwrap();
        let n = h.num_sites();
        let trace: f64 = h.diagonal().iter().sum();
        assert!((eig.values.iter().sum::<f64>() - trace).abs() < 1e-9);
        for j in 0..n {
            let hv = h.apply(eig.vector(j));
            for (a, b) in hv.iter().zip(eig.vector(j)) {
                assert!((a - eig.values[j] * b).abs() <= 1e-9);
            }
            for k in 0..=j {
                let dot: f64 = eig.vector(j).iter().zip(eig.vector(k)).map(|(a, b)| a * b).sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn oracle_cap_enforced() {
        let h = TridiagonalOperator::free_chain(10, 0.0).unwrap();
        assert!(matches!(dense_oracle_with_cap(&h, 5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn by_index_matches_full() {
        let h = random_instance(8, 4, 300);
        let full = full_spectrum(&h, 1e-13).unwrap().eigenvalues;
        let part = eigenvalues_by_index(&h, 120, 15, 1e-13).unwrap();
        for (a, b) in part.iter().zip(&full[120..135]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eigenvalues_by_index(&h, 295, 10, 1e-12).is_err());
    }

    #[test]
    fn ql_matches_bisection() {
        let h = random_instance(21, 7, 120);
        let a = ql_eigenvalues(&h).unwrap();
        let b = full_spectrum(&h, 1e-13).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_kernels() {
        let h = TridiagonalOperator::<f32>::free_chain(3, 0.0).unwrap();
        assert_eq!(sturm_count(&h, 0.1f32), 2);
        let s = full_spectrum(&h, 1e-5f32).unwrap();
        assert!((s.eigenvalues[2] - 2.0f32.sqrt()).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sturm_count_monotone(seed in any::<u64>(), sites in 1usize..60, e1 in -4.0f64..4.0, e2 in -4.0f64..4.0) {
            let h = random_instance(seed, 0, sites);
            let (a, b) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(sturm_count(&h, a) <= sturm_count(&h, b));
            prop_assert_eq!(sturm_count(&h, -1e3), 0);
            prop_assert_eq!(sturm_count(&h, 1e3), sites);
        }

        #[test]
        fn spectrum_simple_and_interlacing(seed in any::<u64>(), sites in 2usize..60, e1 in -3.0f64..3.0, e2 in -3.0f64..3.0) {
            let h = random_instance(seed, 1, sites);
            let s = full_spectrum(&h, 1e-13).unwrap();
            prop_assert!(s.eigenvalues.windows(2).all(|w| w[1] > w[0]));
            let sub = h.without_last_site().unwrap();
            let (a, b) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let full = sturm_count(&h, b) as i64 - sturm_count(&h, a) as i64;
            let cut = sturm_count(&sub, b) as i64 - sturm_count(&sub, a) as i64;
            prop_assert!((full - cut).abs() <= 1);
        }
    }
}
