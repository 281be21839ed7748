//! Forward-scattering approximation (FSA) for a root product state.
//!
//! Every bond carries exactly one pair of mutually adjoint transition terms:
//! `yx <-> zz` on `b_j = +1` bonds and `yz <-> zx` on `b_j = -1` bonds. The
//! split `H = H+ + H-` puts one direction of each pair into `H+`:
//!
//! * if the root's pattern on the bond is one of the two, the term leaving
//!   the root's pattern is forward;
//! * otherwise the bond is oriented by graph distance from the root: the
//!   direction whose transitions mostly increase the BFS depth is forward.
//!
//! The FSA basis is `|n> = (H+)^n |root> / sqrt(c_n)` and the effective
//! Hamiltonian is the zero-diagonal tridiagonal matrix of the
//! `beta_n = sqrt(c_n / c_{n-1})`.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::dynamics::Spectrum;
use crate::error::{Error, Result};
use crate::hamiltonian::{apply_hamiltonian, Sign};
use crate::spinbasis::{SectorBasis, Site, SpinConfig};

/// Norm below which `H+ |n>` counts as annihilated.
const ANNIHILATION_TOLERANCE: f64 = 1e-12;

/// Why a bond got its orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// The root's own pattern on the bond is the forward source.
    RootPattern,
    /// Decided by BFS depth from the root.
    Depth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BondSplit {
    pub bond: usize,
    /// Two-site pattern whose bond term belongs to `H+`.
    pub forward_source: (Site, Site),
    pub orientation: Orientation,
    /// Transitions on this bond whose direction disagrees with BFS depth.
    pub depth_violations: usize,
}

/// Directed signed transitions `source -> target` over a sector basis.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DirectedOperator {
    dim: usize,
    /// `(source, target, negative)` sorted by source.
    transitions: Vec<(u32, u32, bool)>,
}

impl DirectedOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transitions(&self) -> &[(u32, u32, bool)] {
        &self.transitions
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for &(s, t, neg) in &self.transitions {
            let x = v[s as usize];
            out[t as usize] += if neg { -x } else { x };
        }
        out
    }

    /// Dense matrix with `m[(target, source)] = amp`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(s, t, neg) in &self.transitions {
            m[(t as usize, s as usize)] += if neg { -1.0 } else { 1.0 };
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct ForwardSplit {
    pub root: SpinConfig,
    pub bonds: Vec<BondSplit>,
    pub forward: DirectedOperator,
    pub backward: DirectedOperator,
    /// BFS depth of every basis state from the root.
    pub depth: Vec<u32>,
}

impl ForwardSplit {
    pub fn is_forward(&self, source: SpinConfig, bond: usize) -> bool {
        source.bond_pair(bond) == self.bonds[bond].forward_source
    }
}

fn active_patterns(bond_parity: i8) -> [(Site, Site); 2] {
    use Site::*;
    if bond_parity > 0 {
        [(Y, X), (Z, Z)]
    } else {
        [(Y, Z), (Z, X)]
    }
}

fn bfs_depth(basis: &SectorBasis, root: usize) -> Vec<u32> {
    let mut depth = vec![u32::MAX; basis.len()];
    depth[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(i) = queue.pop_front() {
        for im in apply_hamiltonian(basis.state(i)) {
            let j = basis.index_of(&im.target).expect("closed basis");
            if depth[j] == u32::MAX {
                depth[j] = depth[i] + 1;
                queue.push_back(j);
            }
        }
    }
    depth
}

/// Splits the sector Hamiltonian into forward and backward parts relative to `root`.
pub fn split_hamiltonian(basis: &SectorBasis, root: &SpinConfig) -> Result<ForwardSplit> {
    let root_idx = basis.require(root)?;
    let n = basis.n_sites();
    let label = basis.label();
    let depth = bfs_depth(basis, root_idx);

    // votes[j][p]: transitions leaving pattern p on bond j, split by whether
    // they go deeper.
    let mut deeper = vec![[0usize; 2]; n];
    let mut shallower = vec![[0usize; 2]; n];
    for (i, &s) in basis.states().iter().enumerate() {
        for im in apply_hamiltonian(s) {
            let j = basis.index_of(&im.target).expect("closed basis");
            let p = active_patterns(label.bond(im.bond))
                .iter()
                .position(|&pat| pat == s.bond_pair(im.bond))
                .expect("active bond term");
            if depth[j] > depth[i] {
                deeper[im.bond][p] += 1;
            } else {
                shallower[im.bond][p] += 1;
            }
        }
    }

    let bonds: Vec<BondSplit> = (0..n)
        .map(|j| {
            let pats = active_patterns(label.bond(j));
            let (p, orientation) = match pats.iter().position(|&pat| pat == root.bond_pair(j)) {
                Some(p) => (p, Orientation::RootPattern),
                None => {
                    let score = |p: usize| deeper[j][p] as i64 - shallower[j][p] as i64;
                    (if score(1) > score(0) { 1 } else { 0 }, Orientation::Depth)
                }
            };
            BondSplit {
                bond: j,
                forward_source: pats[p],
                orientation,
                depth_violations: shallower[j][p] + deeper[j][1 - p],
            }
        })
        .collect();

    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for (i, &s) in basis.states().iter().enumerate() {
        for im in apply_hamiltonian(s) {
            let j = basis.index_of(&im.target).expect("closed basis") as u32;
            let t = (i as u32, j, im.amplitude == Sign::Minus);
            if s.bond_pair(im.bond) == bonds[im.bond].forward_source {
                forward.push(t);
            } else {
                backward.push(t);
            }
        }
    }
    let dim = basis.len();
    Ok(ForwardSplit {
        root: *root,
        bonds,
        forward: DirectedOperator {
            dim,
            transitions: forward,
        },
        backward: DirectedOperator {
            dim,
            transitions: backward,
        },
        depth,
    })
}

/// Normalized FSA vectors and their recursion coefficients.
#[derive(Clone, Debug)]
pub struct FsaLadder {
    pub root: SpinConfig,
    /// `|0>, ..., |L-1>` in sector coordinates.
    pub vectors: Vec<Vec<f64>>,
    /// `beta_1, ..., beta_{L-1}`.
    pub betas: Vec<f64>,
    /// Whether `H+` annihilated the last vector; `false` means the step cap was hit.
    pub closed: bool,
}

impl FsaLadder {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest `|<n|m> - delta_nm|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, u) in self.vectors.iter().enumerate() {
            for (b, v) in self.vectors.iter().enumerate().skip(a) {
                let d: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                worst = worst.max((d - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    /// The basis state carrying the last vector, if that vector is a single product state.
    pub fn endpoint(&self, basis: &SectorBasis) -> Option<SpinConfig> {
        let last = self.vectors.last()?;
        let mut nonzero = last.iter().enumerate().filter(|(_, x)| x.abs() > 1e-12);
        let (i, x) = nonzero.next()?;
        (nonzero.next().is_none() && (x.abs() - 1.0).abs() < 1e-12).then(|| basis.state(i))
    }
}

/// Runs `|n+1> ∝ H+ |n>` until annihilation or `max_len` vectors.
pub fn build_ladder_with_cap(basis: &SectorBasis, split: &ForwardSplit, max_len: usize) -> Result<FsaLadder> {
    let root = basis.unit_vector(&split.root)?;
    let mut vectors = vec![root];
    let mut betas = Vec::new();
    let mut closed = false;
    while vectors.len() < max_len {
        let w = split.forward.apply(vectors.last().unwrap());
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta < ANNIHILATION_TOLERANCE {
            closed = true;
            break;
        }
        betas.push(beta);
        vectors.push(w.into_iter().map(|x| x / beta).collect());
    }
    if !closed {
        let w = split.forward.apply(vectors.last().unwrap());
        closed = w.iter().map(|x| x * x).sum::<f64>().sqrt() < ANNIHILATION_TOLERANCE;
    }
    Ok(FsaLadder {
        root: split.root,
        vectors,
        betas,
        closed,
    })
}

/// FSA ladder from `root`. Fails when `H+` annihilates before the expected
/// `N + 1` vectors; longer or unterminated ladders (capped at `2N + 2`) are
/// returned and flagged through [`FsaLadder::closed`] and the length.
pub fn build_ladder(basis: &SectorBasis, root: &SpinConfig) -> Result<FsaLadder> {
    let split = split_hamiltonian(basis, root)?;
    let expected = basis.n_sites() + 1;
    let ladder = build_ladder_with_cap(basis, &split, 2 * expected)?;
    if ladder.closed && ladder.len() < expected {
        return Err(Error::FsaClosure {
            step: ladder.len(),
            expected,
        });
    }
    Ok(ladder)
}

/// Zero-diagonal symmetric tridiagonal FSA Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct FsaMatrix {
    pub betas: Vec<f64>,
}

impl FsaMatrix {
    pub fn dim(&self) -> usize {
        self.betas.len() + 1
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j {
                self.betas[i]
            } else if j + 1 == i {
                self.betas[j]
            } else {
                0.0
            }
        })
    }

    /// Eigenpairs in ladder coordinates, energies ascending.
    pub fn eigen(&self) -> Spectrum {
        Spectrum::from_dense(self.to_dense())
    }

    /// Mean gap between consecutive FSA energies.
    pub fn mean_spacing(&self) -> f64 {
        let e = self.eigen().energies;
        (e[e.len() - 1] - e[0]) / (e.len() - 1).max(1) as f64
    }
}

pub fn fsa_matrix(ladder: &FsaLadder) -> FsaMatrix {
    FsaMatrix {
        betas: ladder.betas.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlayPoint {
    pub energy: f64,
    pub overlap: f64,
}

/// Energies of the FSA eigenstates and their squared overlap with `initial`,
/// after embedding them in sector coordinates through the ladder.
pub fn fsa_overlay(
    ladder: &FsaLadder,
    matrix: &FsaMatrix,
    spectrum: &Spectrum,
    basis: &SectorBasis,
    initial: &SpinConfig,
) -> Result<Vec<OverlayPoint>> {
    if matrix.dim() != ladder.len() {
        return Err(Error::LengthMismatch {
            expected: ladder.len(),
            found: matrix.dim(),
        });
    }
    if spectrum.dim() != basis.len() || ladder.vectors[0].len() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            found: spectrum.dim(),
        });
    }
    let i = basis.require(initial)?;
    let eig = matrix.eigen();
    Ok((0..eig.dim())
        .map(|k| {
            let amp: f64 = ladder
                .vectors
                .iter()
                .enumerate()
                .map(|(n, v)| eig.vectors[(n, k)] * v[i])
                .sum();
            OverlayPoint {
                energy: eig.energies[k],
                overlap: amp * amp,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_sector_hamiltonian;
    use crate::spinbasis::build_sector_basis;

    fn cfg(s: &str) -> SpinConfig {
        s.parse().unwrap()
    }

    #[test]
    fn special_root_orientation() {
        let root = SpinConfig::repeat("yxy", 9).unwrap();
        let basis = build_sector_basis(root).unwrap();
        let split = split_hamiltonian(&basis, &root).unwrap();
        use Site::*;
        for b in &split.bonds {
            let expected = match b.bond % 3 {
                0 => (Y, X),
                1 => (Z, Z),
                _ => (Y, Z),
            };
            assert_eq!(b.forward_source, expected, "bond {}", b.bond);
            assert_eq!(b.depth_violations, 0);
        }
        // The b = -1 forward term carries the minus sign.
        assert!(split
            .forward
            .transitions()
            .iter()
            .filter(|t| {
                let s = basis.state(t.0 as usize);
                split.bonds.iter().any(|b| b.bond % 3 == 2 && s.bond_pair(b.bond) == (Y, Z))
            })
            .any(|t| t.2));
    }

    #[test]
    fn split_is_exact_and_adjoint() {
        let root = SpinConfig::repeat("yxy", 9).unwrap();
        let basis = build_sector_basis(root).unwrap();
        let h = build_sector_hamiltonian(&basis).unwrap().to_dense();
        let split = split_hamiltonian(&basis, &root).unwrap();
        let (hp, hm) = (split.forward.to_dense(), split.backward.to_dense());
        assert_eq!(&hp + &hm, h);
        assert_eq!(hp.transpose(), hm);
        let e_root = basis.unit_vector(&root).unwrap();
        assert!(split.backward.apply(&e_root).iter().all(|&x| x == 0.0));
        let far = basis.unit_vector(&SpinConfig::repeat("xyx", 9).unwrap()).unwrap();
        assert!(split.forward.apply(&far).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ladder_n6() {
        let root = cfg("yxyyxy");
        let basis = build_sector_basis(root).unwrap();
        let ladder = build_ladder(&basis, &root).unwrap();
        assert_eq!(ladder.len(), 7);
        assert!(ladder.closed);
        assert_eq!(ladder.endpoint(&basis), Some(cfg("xyxxyx")));
        assert!(ladder.orthonormality_error() < 1e-10);
        let b = &ladder.betas;
        for n in 0..b.len() {
            assert!(b[n] > 0.0);
            assert!((b[n] - b[b.len() - 1 - n]).abs() < 1e-9);
        }
    }

    #[test]
    fn toy_fsa_spectrum() {
        let m = FsaMatrix { betas: vec![1.0, 1.0] };
        let e = m.eigen().energies;
        let r2 = 2f64.sqrt();
        for (a, b) in e.iter().zip([-r2, 0.0, r2]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((m.mean_spacing() - r2).abs() < 1e-12);
    }

    #[test]
    fn overlay_sums_to_one() {
        let root = SpinConfig::repeat("yxy", 9).unwrap();
        let basis = build_sector_basis(root).unwrap();
        let h = build_sector_hamiltonian(&basis).unwrap();
        let spectrum = crate::dynamics::full_diagonalize(&h, 1000).unwrap();
        let ladder = build_ladder(&basis, &root).unwrap();
        let m = fsa_matrix(&ladder);
        let overlay = fsa_overlay(&ladder, &m, &spectrum, &basis, &root).unwrap();
        assert_eq!(overlay.len(), 10);
        let total: f64 = overlay.iter().map(|p| p.overlap).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for w in overlay.windows(2) {
            assert!(w[0].energy <= w[1].energy);
        }
    }
}
