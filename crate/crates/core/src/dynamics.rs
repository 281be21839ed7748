//! Spectra and real-time evolution `exp(-iHt)` inside one sector.
//!
//! Small sectors are diagonalized densely; larger ones are propagated with a
//! Lanczos (Krylov) approximation of the matrix exponential, which only needs
//! matrix-vector products with the sparse Hamiltonian.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::format::fmt_g12;
use crate::hamiltonian::SparseHamiltonian;
use crate::spinbasis::{SectorBasis, SpinConfig};

pub const DEFAULT_DENSE_CEILING: usize = 6_000;
pub const DEFAULT_KRYLOV_DIM: usize = 30;
/// Local error target of one Krylov step.
pub const KRYLOV_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_T_MAX: f64 = 40.0;
pub const DEFAULT_DT: f64 = 0.05;

/// Eigen-decomposition of a sector Hamiltonian, energies ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn from_dense(m: DMatrix<f64>) -> Spectrum {
        let n = m.nrows();
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum { energies, vectors }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn vector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.vectors.column(k)
    }

    /// Largest `|H v_k - E_k v_k|` over all eigenpairs.
    pub fn max_residual(&self, h: &SparseHamiltonian) -> f64 {
        let mut out = vec![0.0; self.dim()];
        (0..self.dim())
            .map(|k| {
                let v: Vec<f64> = self.vector(k).iter().copied().collect();
                h.apply_into(&v, &mut out);
                out.iter()
                    .zip(&v)
                    .map(|(hv, x)| (hv - self.energies[k] * x).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|V^T V - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

pub fn full_diagonalize(h: &SparseHamiltonian, dense_ceiling: usize) -> Result<Spectrum> {
    if h.dim() > dense_ceiling {
        return Err(Error::ResourceLimit(format!(
            "dense diagonalization of dimension {} exceeds the ceiling {dense_ceiling}; use Krylov evolution",
            h.dim()
        )));
    }
    Ok(Spectrum::from_dense(h.to_dense()))
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Lanczos decomposition `H V = V T + beta_m v_m e_m^T` grown from one vector.
struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual after the last vector; zero on breakdown.
    residual: f64,
}

impl Lanczos {
    fn build(h: &SparseHamiltonian, v: &[Complex64], m: usize) -> Lanczos {
        let scale = norm(v);
        let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|z| z / scale).collect()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        let mut w = vec![Complex64::default(); v.len()];
        let mut residual = 0.0;
        for j in 0..m {
            h.apply_into(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Full reorthogonalization against the whole (short) basis.
            for q in &basis {
                let c = dot(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
            let b = norm(&w);
            if b <= 1e-12 * (1.0 + a.abs()) {
                residual = 0.0;
                break;
            }
            residual = b;
            if j + 1 == m {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        Lanczos {
            basis,
            alpha,
            beta,
            residual,
        }
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let k = self.alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                self.alpha[i]
            } else if i + 1 == j {
                self.beta[i]
            } else if j + 1 == i {
                self.beta[j]
            } else {
                0.0
            }
        });
        SymmetricEigen::new(t)
    }
}

/// A Lanczos decomposition around one anchor state, reusable for any step
/// length whose error estimate passes.
struct KrylovWindow {
    lanczos: Lanczos,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    scale: f64,
}

impl KrylovWindow {
    fn new(h: &SparseHamiltonian, anchor: &[Complex64], m: usize) -> KrylovWindow {
        let lanczos = Lanczos::build(h, anchor, m.min(h.dim()));
        let eig = lanczos.eigen();
        KrylovWindow {
            lanczos,
            eig,
            scale: norm(anchor),
        }
    }

    /// `exp(-i T tau) e_1` in the eigenbasis of `T`.
    fn coefficients(&self, tau: f64) -> Vec<Complex64> {
        let k = self.eig.eigenvalues.len();
        let q = &self.eig.eigenvectors;
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|l| {
                        Complex64::from_polar(q[(i, l)] * q[(0, l)], -self.eig.eigenvalues[l] * tau)
                    })
                    .sum()
            })
            .collect()
    }

    /// Estimate `beta_m |[exp(-i T tau) e_1]_m|`; zero after breakdown.
    fn error(&self, coeffs: &[Complex64]) -> f64 {
        self.lanczos.residual * coeffs.last().map_or(0.0, |z| z.norm()) * self.scale
    }

    fn expand(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.lanczos.basis[0].len()];
        for (q, c) in self.lanczos.basis.iter().zip(coeffs) {
            let c = c * self.scale;
            out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
        }
        out
    }

    fn try_step(&self, tau: f64, tolerance: f64) -> Option<Vec<Complex64>> {
        let c = self.coefficients(tau);
        (self.error(&c) <= tolerance).then(|| self.expand(&c))
    }
}

/// Lanczos propagator with adaptive sub-stepping.
#[derive(Clone, Copy, Debug)]
pub struct Krylov {
    pub dim: usize,
    pub tolerance: f64,
}

impl Default for Krylov {
    fn default() -> Self {
        Krylov {
            dim: DEFAULT_KRYLOV_DIM,
            tolerance: KRYLOV_TOLERANCE,
        }
    }
}

impl Krylov {
    pub fn new(dim: usize) -> Result<Krylov> {
        if dim < 2 {
            return input(format!("Krylov dimension must be at least 2, got {dim}"));
        }
        Ok(Krylov {
            dim,
            tolerance: KRYLOV_TOLERANCE,
        })
    }

    /// `exp(-i H dt) v`. The step is halved until each piece's a-posteriori
    /// error estimate `beta_m |[exp(-i T tau) e_1]_m|` is below the tolerance.
    pub fn evolve(&self, h: &SparseHamiltonian, v: &[Complex64], dt: f64) -> Result<Vec<Complex64>> {
        if v.len() != h.dim() {
            return Err(Error::LengthMismatch {
                expected: h.dim(),
                found: v.len(),
            });
        }
        let mut state = v.to_vec();
        if dt == 0.0 || norm(&state) == 0.0 {
            return Ok(state);
        }
        let mut remaining = dt;
        while remaining != 0.0 {
            let window = KrylovWindow::new(h, &state, self.dim);
            let mut tau = remaining;
            let mut halvings = 0;
            state = loop {
                if let Some(next) = window.try_step(tau, self.tolerance) {
                    break next;
                }
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::Verification("Krylov step size underflow".into()));
                }
                tau /= 2.0;
            };
            remaining -= tau;
            if remaining.abs() <= 1e-15 * dt.abs() {
                break;
            }
        }
        Ok(state)
    }
}

pub fn krylov_evolve(
    h: &SparseHamiltonian,
    v0: &[Complex64],
    dt: f64,
    krylov_dim: usize,
) -> Result<Vec<Complex64>> {
    Krylov::new(krylov_dim)?.evolve(h, v0, dt)
}

/// Uniform grid `0, dt, 2 dt, ..., t_max`.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_max >= 0.0) || !t_max.is_finite() {
        return input(format!("invalid time grid t_max = {t_max}, dt = {dt}"));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return input("time grid must be ascending and nonnegative");
    }
    Ok(())
}

/// A way of applying `exp(-iHt)` to sector states.
pub enum Evolver<'h> {
    Dense { spectrum: Spectrum },
    Krylov { h: &'h SparseHamiltonian, krylov: Krylov },
}

impl<'h> Evolver<'h> {
    pub fn dense(h: &SparseHamiltonian, dense_ceiling: usize) -> Result<Evolver<'h>> {
        Ok(Evolver::Dense {
            spectrum: full_diagonalize(h, dense_ceiling)?,
        })
    }

    pub fn krylov(h: &'h SparseHamiltonian, krylov_dim: usize) -> Result<Evolver<'h>> {
        Ok(Evolver::Krylov {
            h,
            krylov: Krylov::new(krylov_dim)?,
        })
    }

    pub fn method(&self) -> &'static str {
        match self {
            Evolver::Dense { .. } => "dense",
            Evolver::Krylov { .. } => "krylov",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Evolver::Dense { spectrum } => spectrum.dim(),
            Evolver::Krylov { h, .. } => h.dim(),
        }
    }

    /// Calls `f(t, psi(t))` at each grid time, in order.
    pub fn observe<F>(&self, v0: &[Complex64], times: &[f64], mut f: F) -> Result<()>
    where
        F: FnMut(f64, &[Complex64]) -> Result<()>,
    {
        check_grid(times)?;
        if v0.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: v0.len(),
            });
        }
        match self {
            Evolver::Dense { spectrum } => {
                let v = &spectrum.vectors;
                let re = DVector::from_iterator(v0.len(), v0.iter().map(|z| z.re));
                let im = DVector::from_iterator(v0.len(), v0.iter().map(|z| z.im));
                let (cr, ci) = (v.tr_mul(&re), v.tr_mul(&im));
                let mut state = vec![Complex64::default(); v0.len()];
                for &t in times {
                    let phased: Vec<Complex64> = (0..spectrum.dim())
                        .map(|k| {
                            Complex64::new(cr[k], ci[k]) * Complex64::from_polar(1.0, -spectrum.energies[k] * t)
                        })
                        .collect();
                    for (i, s) in state.iter_mut().enumerate() {
                        *s = v.row(i).iter().zip(&phased).map(|(a, c)| c * *a).sum();
                    }
                    f(t, &state)?;
                }
            }
            Evolver::Krylov { h, krylov } => {
                // One Lanczos window serves consecutive grid times until its
                // error estimate fails; then it is re-anchored at the last
                // accepted output state.
                let mut anchor = (0.0, v0.to_vec());
                let mut window: Option<KrylovWindow> = None;
                let mut last = anchor.clone();
                for &t in times {
                    let state = if t == anchor.0 {
                        anchor.1.clone()
                    } else {
                        let w = window.get_or_insert_with(|| KrylovWindow::new(h, &anchor.1, krylov.dim));
                        match w.try_step(t - anchor.0, krylov.tolerance) {
                            Some(s) => s,
                            None => {
                                if last.0 > anchor.0 {
                                    anchor = last.clone();
                                } else {
                                    let s = krylov.evolve(h, &anchor.1, t - anchor.0)?;
                                    anchor = (t, s);
                                }
                                let w = window.insert(KrylovWindow::new(h, &anchor.1, krylov.dim));
                                match w.try_step(t - anchor.0, krylov.tolerance) {
                                    Some(s) => s,
                                    None => {
                                        let s = krylov.evolve(h, &anchor.1, t - anchor.0)?;
                                        anchor = (t, s.clone());
                                        window = None;
                                        s
                                    }
                                }
                            }
                        }
                    };
                    f(t, &state)?;
                    last = (t, state);
                }
            }
        }
        Ok(())
    }

    /// `|<target_a| psi(t)>|^2` for each target index and grid time.
    pub fn overlap_series(
        &self,
        v0: &[Complex64],
        targets: &[usize],
        times: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        if let Some(&bad) = targets.iter().find(|&&t| t >= self.dim()) {
            return input(format!("target index {bad} outside dimension {}", self.dim()));
        }
        let mut out = vec![Vec::with_capacity(times.len()); targets.len()];
        match self {
            Evolver::Dense { spectrum } => {
                check_grid(times)?;
                if v0.len() != self.dim() {
                    return Err(Error::LengthMismatch {
                        expected: self.dim(),
                        found: v0.len(),
                    });
                }
                let v = &spectrum.vectors;
                let c: Vec<Complex64> = (0..spectrum.dim())
                    .map(|k| v.column(k).iter().zip(v0).map(|(a, z)| z * *a).sum())
                    .collect();
                for (a, &target) in targets.iter().enumerate() {
                    let weights: Vec<Complex64> =
                        (0..spectrum.dim()).map(|k| c[k] * v[(target, k)]).collect();
                    for &t in times {
                        let amp: Complex64 = weights
                            .iter()
                            .zip(&spectrum.energies)
                            .map(|(w, e)| w * Complex64::from_polar(1.0, -e * t))
                            .sum();
                        out[a].push(amp.norm_sqr());
                    }
                }
            }
            Evolver::Krylov { .. } => {
                self.observe(v0, times, |_, psi| {
                    for (a, &target) in targets.iter().enumerate() {
                        out[a].push(psi[target].norm_sqr());
                    }
                    Ok(())
                })?;
            }
        }
        Ok(out)
    }
}

/// Real samples on an ascending time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<TimeSeries> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        Ok(TimeSeries { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest value over samples with `t` in `[from, to]`.
    pub fn max_in(&self, from: f64, to: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(_, v)| *v)
            .reduce(f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt_g12(*t), fmt_g12(*v))?;
        }
        Ok(())
    }
}

fn unit_state(basis: &SectorBasis, config: &SpinConfig) -> Result<(usize, Vec<Complex64>)> {
    let i = basis.require(config)?;
    let mut v = vec![Complex64::default(); basis.len()];
    v[i] = Complex64::new(1.0, 0.0);
    Ok((i, v))
}

/// Return probability `F(t) = |<init| exp(-iHt) |init>|^2`.
pub fn fidelity_series(
    evolver: &Evolver<'_>,
    basis: &SectorBasis,
    initial: &SpinConfig,
    times: &[f64],
) -> Result<TimeSeries> {
    let (i, v0) = unit_state(basis, initial)?;
    let mut series = evolver.overlap_series(&v0, &[i], times)?;
    TimeSeries::new(times.to_vec(), series.remove(0))
}

/// `|<target| exp(-iHt) |init>|^2`.
pub fn transfer_series(
    evolver: &Evolver<'_>,
    basis: &SectorBasis,
    initial: &SpinConfig,
    target: &SpinConfig,
    times: &[f64],
) -> Result<TimeSeries> {
    let (_, v0) = unit_state(basis, initial)?;
    let j = basis.require(target)?;
    let mut series = evolver.overlap_series(&v0, &[j], times)?;
    TimeSeries::new(times.to_vec(), series.remove(0))
}

/// Uniform draw from the basis, reproducible under `seed`.
pub fn random_basis_state(basis: &SectorBasis, seed: u64) -> SpinConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    basis.state(rng.gen_range(0..basis.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
    pub prominence: f64,
}

pub const PEAK_PROMINENCE: f64 = 0.01;
pub const FIRST_PEAK_AFTER: f64 = 1.0;

/// Local maxima with topographic prominence above `min_prominence` and `t > t_min`.
pub fn revival_peaks(series: &TimeSeries, min_prominence: f64, t_min: f64) -> Vec<Peak> {
    let y = &series.values;
    let n = y.len();
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) || series.times[i] <= t_min {
            continue;
        }
        // Lowest point on each side before the curve rises above this peak.
        let mut left_min = y[i];
        for k in (0..i).rev() {
            if y[k] > y[i] {
                break;
            }
            left_min = left_min.min(y[k]);
        }
        let mut right_min = y[i];
        for &v in &y[i + 1..] {
            if v > y[i] {
                break;
            }
            right_min = right_min.min(v);
        }
        let prominence = y[i] - left_min.max(right_min);
        if prominence > min_prominence {
            peaks.push(Peak {
                time: series.times[i],
                value: y[i],
                prominence,
            });
        }
    }
    peaks
}

/// First revival under the default detection rule.
pub fn first_revival(series: &TimeSeries) -> Option<Peak> {
    revival_peaks(series, PEAK_PROMINENCE, FIRST_PEAK_AFTER).into_iter().next()
}
