//! The uniform Kitaev chain `H = sum_j S^x_j S^y_{j+1}` on product states,
//! sparse sector Hamiltonians, and dense full-space builds used as oracles.

use std::io::Write;
use std::ops::{AddAssign, SubAssign};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{input, Error, Result};
use crate::spinbasis::{SectorBasis, Site, SpinConfig};

/// Largest chain accepted by the dense full-space builds.
pub const FULL_SPACE_LIMIT: usize = 8;

/// Image of a product state under one bond term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BondImage {
    pub target: SpinConfig,
    pub amplitude: Sign,
    pub bond: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Action of `S^x ⊗ S^y` on a two-site pattern. With the matrices
/// `S^x|y> = i|z>, S^x|z> = -i|y>, S^y|x> = -i|z>, S^y|z> = i|x>` every
/// nonvanishing image is a single product state with a real amplitude.
pub fn bond_rule(left: Site, right: Site) -> Option<(Site, Site, Sign)> {
    use Site::*;
    match (left, right) {
        (Y, X) => Some((Z, Z, Sign::Plus)),
        (Z, Z) => Some((Y, X, Sign::Plus)),
        (Y, Z) => Some((Z, X, Sign::Minus)),
        (Z, X) => Some((Y, Z, Sign::Minus)),
        _ => None,
    }
}

#[inline]
pub(crate) fn bond_image(config: SpinConfig, j: usize) -> Option<BondImage> {
    let n = config.n_sites();
    let (l, r) = config.bond_pair(j);
    bond_rule(l, r).map(|(nl, nr, amplitude)| BondImage {
        target: config.with_site(j, nl).with_site((j + 1) % n, nr),
        amplitude,
        bond: j,
    })
}

/// Image of `S^x_j S^y_{j+1}` on `config`, or `None` if the term annihilates it.
pub fn apply_bond_term(config: SpinConfig, j: usize) -> Result<Option<BondImage>> {
    if j >= config.n_sites() {
        return input(format!("bond {j} out of range for N = {}", config.n_sites()));
    }
    Ok(bond_image(config, j))
}

/// All nonvanishing bond images of `H` on `config`, in bond order.
pub fn apply_hamiltonian(config: SpinConfig) -> Vec<BondImage> {
    (0..config.n_sites())
        .filter_map(|j| bond_image(config, j))
        .collect()
}

/// One stored off-diagonal pair `(row, col)` with `row < col`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Entry {
    pub row: u32,
    pub col: u32,
    pub negative: bool,
}

impl Entry {
    pub fn amplitude(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

/// Real symmetric matrix with zero diagonal and `±1` off-diagonal entries.
/// Each unordered pair is stored once, sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    dim: usize,
    entries: Vec<Entry>,
}

impl SparseHamiltonian {
    /// Builds from the directed images `(source, target, sign)`; every pair must
    /// appear in both directions with the same sign.
    pub fn from_directed(dim: usize, mut directed: Vec<(u32, u32, bool)>) -> Result<Self> {
        directed.sort_unstable();
        let mut upper = Vec::with_capacity(directed.len() / 2);
        let mut lower = Vec::with_capacity(directed.len() / 2);
        for w in directed.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::Verification(format!(
                    "duplicate matrix element ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        for &(r, c, neg) in &directed {
            if r as usize >= dim || c as usize >= dim {
                return input(format!("entry ({r}, {c}) outside dimension {dim}"));
            }
            match r.cmp(&c) {
                std::cmp::Ordering::Less => upper.push(Entry { row: r, col: c, negative: neg }),
                std::cmp::Ordering::Greater => lower.push(Entry { row: c, col: r, negative: neg }),
                std::cmp::Ordering::Equal => {
                    return Err(Error::Verification(format!("diagonal element at {r}")))
                }
            }
        }
        lower.sort_unstable();
        if upper != lower {
            return Err(Error::Verification("assembled matrix is not symmetric".into()));
        }
        Ok(SparseHamiltonian { dim, entries: upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored pairs; the full matrix has twice as many nonzeros.
    pub fn stored_pairs(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// `out = H v` without allocation.
    pub fn apply_into<T>(&self, v: &[T], out: &mut [T])
    where
        T: Copy + Default + AddAssign + SubAssign,
    {
        assert_eq!(v.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        out.iter_mut().for_each(|o| *o = T::default());
        for e in &self.entries {
            let (r, c) = (e.row as usize, e.col as usize);
            if e.negative {
                out[r] -= v[c];
                out[c] -= v[r];
            } else {
                out[r] += v[c];
                out[c] += v[r];
            }
        }
    }

    pub fn matvec<T>(&self, v: &[T]) -> Result<Vec<T>>
    where
        T: Copy + Default + AddAssign + SubAssign,
    {
        if v.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let mut out = vec![T::default(); self.dim];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for e in &self.entries {
            let (r, c) = (e.row as usize, e.col as usize);
            m[(r, c)] = e.amplitude();
            m[(c, r)] = e.amplitude();
        }
        m
    }

    /// Coordinate dump: header `dim nnz`, then `row col amp` for both triangles.
    pub fn write_coordinates<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.dim, 2 * self.entries.len())?;
        let mut all: Vec<(u32, u32, i32)> = self
            .entries
            .iter()
            .flat_map(|e| {
                let a = if e.negative { -1 } else { 1 };
                [(e.row, e.col, a), (e.col, e.row, a)]
            })
            .collect();
        all.sort_unstable();
        for (r, c, a) in all {
            writeln!(w, "{r} {c} {a}")?;
        }
        Ok(())
    }
}

/// Sector Hamiltonian over a closed basis.
pub fn build_sector_hamiltonian(basis: &SectorBasis) -> Result<SparseHamiltonian> {
    let mut directed = Vec::with_capacity(basis.len() * basis.n_sites() / 2);
    for (i, &s) in basis.states().iter().enumerate() {
        for im in apply_hamiltonian(s) {
            let j = basis.index_of(&im.target).ok_or_else(|| Error::ClosureViolation {
                source_state: s.to_string(),
                image: im.target.to_string(),
            })?;
            directed.push((i as u32, j as u32, im.amplitude == Sign::Minus));
        }
    }
    SparseHamiltonian::from_directed(basis.len(), directed)
}

/// Single-site spin-1 matrices in the `{x, y, z}` basis.
pub fn spin_matrix(axis: Site) -> Matrix3<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let o = Complex64::new(0.0, 0.0);
    match axis {
        Site::X => Matrix3::new(o, o, o, o, o, -i, o, i, o),
        Site::Y => Matrix3::new(o, o, i, o, o, o, -i, o, o),
        Site::Z => Matrix3::new(o, -i, o, i, o, o, o, o, o),
    }
}

/// Dense full-space `3^N` matrix of `sum over (a, b, i, j)` of `S^a_i S^b_j`.
/// The products of two spin matrices on distinct sites are real in this basis.
fn dense_two_site_sum(n_sites: usize, terms: &[(Site, usize, Site, usize)]) -> Result<DMatrix<f64>> {
    let dim = 3usize.pow(n_sites as u32);
    let mut m = DMatrix::zeros(dim, dim);
    let pow3 = |site: usize| 3usize.pow((n_sites - 1 - site) as u32);
    for &(a, i, b, j) in terms {
        if i == j {
            return input("two-site term on a single site");
        }
        let (sa, sb) = (spin_matrix(a), spin_matrix(b));
        for col in 0..dim {
            let di = (col / pow3(i)) % 3;
            let dj = (col / pow3(j)) % 3;
            for ni in 0..3 {
                let ai = sa[(ni, di)];
                if ai.norm() == 0.0 {
                    continue;
                }
                for nj in 0..3 {
                    let amp = ai * sb[(nj, dj)];
                    if amp.norm() == 0.0 {
                        continue;
                    }
                    if amp.im.abs() > 1e-14 {
                        return Err(Error::Verification("complex two-site matrix element".into()));
                    }
                    let row = col - di * pow3(i) - dj * pow3(j) + ni * pow3(i) + nj * pow3(j);
                    m[(row, col)] += amp.re;
                }
            }
        }
    }
    Ok(m)
}

fn check_full_space(n_sites: usize) -> Result<()> {
    if n_sites < 2 {
        return input("full-space build needs at least two sites");
    }
    if n_sites > FULL_SPACE_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "dense 3^{n_sites} build refused (limit N <= {FULL_SPACE_LIMIT})"
        )));
    }
    Ok(())
}

/// Translation-invariant form `sum_j S^x_j S^y_{j+1}` on the full space.
pub fn dense_uniform_form(n_sites: usize) -> Result<DMatrix<f64>> {
    check_full_space(n_sites)?;
    let terms: Vec<_> = (0..n_sites)
        .map(|j| (Site::X, j, Site::Y, (j + 1) % n_sites))
        .collect();
    dense_two_site_sum(n_sites, &terms)
}

/// Alternating-bond form `sum (S^x S^x on even bonds + S^y S^y on odd bonds)`.
pub fn dense_alternating_form(n_sites: usize) -> Result<DMatrix<f64>> {
    check_full_space(n_sites)?;
    if !n_sites.is_multiple_of(2) {
        return input("alternating-bond form needs an even chain");
    }
    let terms: Vec<_> = (0..n_sites / 2)
        .flat_map(|k| {
            let (a, b, c) = (2 * k, 2 * k + 1, (2 * k + 2) % n_sites);
            [(Site::X, a, Site::X, b), (Site::Y, b, Site::Y, c)]
        })
        .collect();
    dense_two_site_sum(n_sites, &terms)
}

pub(crate) fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FormEquivalenceReport {
    pub n_sites: usize,
    pub dim: usize,
    pub max_deviation: f64,
}

/// Compares the spectra of the alternating-bond and uniform forms on the full space.
pub fn verify_form_equivalence(n_sites: usize) -> Result<FormEquivalenceReport> {
    if !n_sites.is_multiple_of(2) {
        return input(format!("form equivalence needs even N, got {n_sites}"));
    }
    let a = sorted_eigenvalues(dense_alternating_form(n_sites)?);
    let b = sorted_eigenvalues(dense_uniform_form(n_sites)?);
    let max_deviation = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(FormEquivalenceReport {
        n_sites,
        dim: a.len(),
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinbasis::{build_sector_basis, sector_label};

    fn cfg(s: &str) -> SpinConfig {
        s.parse().unwrap()
    }

    #[test]
    fn rule_examples() {
        let im = apply_bond_term(cfg("xyxz"), 1).unwrap().unwrap();
        assert_eq!(im.target, cfg("xzzz"));
        assert_eq!(im.amplitude, Sign::Plus);
        let im = apply_bond_term(cfg("xyzx"), 1).unwrap().unwrap();
        assert_eq!(im.target, cfg("xzxx"));
        assert_eq!(im.amplitude, Sign::Minus);
        for j in 0..4 {
            assert!(apply_bond_term(cfg("xxxx"), j).unwrap().is_none());
        }
        assert!(apply_bond_term(cfg("xxxx"), 4).is_err());
        // Periodic bond wraps the last site onto the first.
        let im = apply_bond_term(cfg("xzy"), 2).unwrap().unwrap();
        assert_eq!(im.target, cfg("zzz"));
    }

    #[test]
    fn neel_images() {
        let images = apply_hamiltonian(cfg("yxyx"));
        assert_eq!(images.iter().map(|i| i.bond).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(images[0].target, cfg("zzyx"));
        assert_eq!(images[1].target, cfg("yxzz"));
        assert!(images.iter().all(|i| i.amplitude == Sign::Plus));
        assert!(apply_hamiltonian(cfg("xxxx")).is_empty());
    }

    #[test]
    fn images_stay_in_sector() {
        let c = cfg("yzzxyzxyzz");
        let label = sector_label(c).unwrap();
        for im in apply_hamiltonian(c) {
            assert_eq!(sector_label(im.target).unwrap(), label);
        }
    }

    #[test]
    fn sector_matrix_structure() {
        let basis = build_sector_basis(SpinConfig::repeat("yxy", 9).unwrap()).unwrap();
        let h = build_sector_hamiltonian(&basis).unwrap();
        assert_eq!(h.dim(), basis.len());
        let d = h.to_dense();
        assert_eq!(d, d.transpose());
        for i in 0..h.dim() {
            assert_eq!(d[(i, i)], 0.0);
            let row_nnz = d.row(i).iter().filter(|x| **x != 0.0).count();
            assert!(row_nnz <= 9);
        }
        assert!(d.iter().all(|&x| x == 0.0 || x == 1.0 || x == -1.0));
    }

    #[test]
    fn matvec_matches_dense() {
        let basis = build_sector_basis(cfg("yxyyxy")).unwrap();
        let h = build_sector_hamiltonian(&basis).unwrap();
        let d = h.to_dense();
        let v: Vec<f64> = (0..h.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = h.matvec(&v).unwrap();
        let y_dense = &d * nalgebra::DVector::from_vec(v.clone());
        for (a, b) in y.iter().zip(y_dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(h.matvec(&v[1..]).is_err());
        let e0 = basis.unit_vector(&basis.state(0)).unwrap();
        let col = h.matvec(&e0).unwrap();
        let mut expected = vec![0.0; h.dim()];
        for im in apply_hamiltonian(basis.state(0)) {
            expected[basis.index_of(&im.target).unwrap()] += im.amplitude.value();
        }
        assert_eq!(col, expected);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        assert!(SparseHamiltonian::from_directed(3, vec![(0, 1, false)]).is_err());
        assert!(SparseHamiltonian::from_directed(3, vec![(0, 1, false), (1, 0, true)]).is_err());
        assert!(SparseHamiltonian::from_directed(3, vec![(1, 1, false)]).is_err());
        let h = SparseHamiltonian::from_directed(2, vec![(0, 1, false), (1, 0, false)]).unwrap();
        assert_eq!(h.stored_pairs(), 1);
    }

    #[test]
    fn coordinate_dump() {
        let h = SparseHamiltonian::from_directed(3, vec![(0, 2, true), (2, 0, true)]).unwrap();
        let mut buf = Vec::new();
        h.write_coordinates(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3 2\n0 2 -1\n2 0 -1\n");
    }

    #[test]
    fn form_equivalence_small() {
        let r = verify_form_equivalence(2).unwrap();
        assert_eq!(r.dim, 9);
        assert!(r.max_deviation < 1e-12);
        assert!(verify_form_equivalence(5).is_err());
        assert!(matches!(verify_form_equivalence(10), Err(Error::ResourceLimit(_))));
    }
}
