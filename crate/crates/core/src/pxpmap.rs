//! Duality between the all-`+1` sector and the PXP model.
//!
//! Bond `(j, j+1)` of the spin-1 chain becomes dual site `j`: `yx` maps to an
//! excitation, every other allowed pair to the ground state. Site `j` is
//! recovered from dual sites `(j-1, j)`: `(down, up) -> y`, `(up, down) -> x`,
//! `(down, down) -> z`.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::dynamics::Spectrum;
use crate::error::{input, Result};
use crate::hamiltonian::{apply_hamiltonian, build_sector_hamiltonian, Sign, SparseHamiltonian};
use crate::spinbasis::{build_sector_basis, sector_label, Site, SpinConfig, MAX_SITES};

/// Binary word on the dual lattice; bit `j` set means dual site `j` is excited.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualConfig {
    n: u8,
    bits: u64,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// No two cyclically adjacent set bits.
#[inline]
pub fn is_blockaded(bits: u64, n: usize) -> bool {
    let rot = ((bits >> 1) | (bits << (n - 1))) & mask(n);
    bits & rot == 0
}

impl DualConfig {
    pub fn new(bits: u64, n_sites: usize) -> Result<DualConfig> {
        if !(2..=MAX_SITES).contains(&n_sites) {
            return input(format!("dual chain length {n_sites} outside 2..={MAX_SITES}"));
        }
        if bits & !mask(n_sites) != 0 {
            return input(format!("word {bits:#b} wider than {n_sites} sites"));
        }
        if !is_blockaded(bits, n_sites) {
            return input(format!("word {bits:#b} violates the blockade"));
        }
        Ok(DualConfig {
            n: n_sites as u8,
            bits,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn is_up(&self, j: usize) -> bool {
        self.bits >> j & 1 == 1
    }
}

impl fmt::Display for DualConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n_sites() {
            f.write_str(if self.is_up(j) { "u" } else { "d" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for DualConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({self})")
    }
}

pub fn map_to_dual(config: &SpinConfig) -> Result<DualConfig> {
    let label = sector_label(*config)?;
    if !label.is_all_plus() {
        return input(format!("{config} lies in sector {label}, not the all-plus sector"));
    }
    let bits = (0..config.n_sites())
        .filter(|&j| config.bond_pair(j) == (Site::Y, Site::X))
        .fold(0u64, |acc, j| acc | 1 << j);
    DualConfig::new(bits, config.n_sites())
}

pub fn map_from_dual(dual: &DualConfig) -> Result<SpinConfig> {
    let n = dual.n_sites();
    let sites: Vec<Site> = (0..n)
        .map(|j| match (dual.is_up((j + n - 1) % n), dual.is_up(j)) {
            (false, true) => Site::Y,
            (true, false) => Site::X,
            (false, false) => Site::Z,
            (true, true) => unreachable!("blockade checked on construction"),
        })
        .collect();
    SpinConfig::from_sites(&sites)
}

/// PXP Hamiltonian on all blockaded words, ordered by integer value.
#[derive(Clone, Debug)]
pub struct PxpModel {
    pub basis: Vec<DualConfig>,
    index: HashMap<DualConfig, u32>,
    pub hamiltonian: SparseHamiltonian,
}

impl PxpModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, d: &DualConfig) -> Option<usize> {
        self.index.get(d).map(|&i| i as usize)
    }
}

/// Words reachable from `d` by one PXP flip (both neighbours down).
pub fn pxp_images(d: &DualConfig) -> Vec<DualConfig> {
    let n = d.n_sites();
    (0..n)
        .filter(|&j| !d.is_up((j + n - 1) % n) && !d.is_up((j + 1) % n))
        .map(|j| DualConfig {
            n: d.n,
            bits: d.bits ^ (1 << j),
        })
        .collect()
}

/// Blockaded words of length `n`, ascending.
pub fn blockaded_words(n_sites: usize) -> Result<Vec<DualConfig>> {
    if !(3..=26).contains(&n_sites) {
        return input(format!("PXP chain length {n_sites} outside 3..=26"));
    }
    // Grow words without adjacent 1s by a Fibonacci recursion, then drop the
    // ones that clash across the periodic boundary.
    let mut open: Vec<u64> = vec![0, 1];
    for len in 2..=n_sites {
        let mut next = Vec::with_capacity(open.len() * 2);
        for &w in &open {
            next.push(w);
            if w >> (len - 2) & 1 == 0 {
                next.push(w | 1 << (len - 1));
            }
        }
        open = next;
    }
    let mut words: Vec<DualConfig> = open
        .into_iter()
        .filter(|&w| is_blockaded(w, n_sites))
        .map(|bits| DualConfig {
            n: n_sites as u8,
            bits,
        })
        .collect();
    words.sort();
    Ok(words)
}

pub fn build_pxp(n_sites: usize) -> Result<PxpModel> {
    let basis = blockaded_words(n_sites)?;
    let index: HashMap<DualConfig, u32> = basis.iter().enumerate().map(|(i, d)| (*d, i as u32)).collect();
    let mut directed = Vec::new();
    for (i, d) in basis.iter().enumerate() {
        for im in pxp_images(d) {
            directed.push((i as u32, index[&im], false));
        }
    }
    let hamiltonian = SparseHamiltonian::from_directed(basis.len(), directed)?;
    Ok(PxpModel {
        basis,
        index,
        hamiltonian,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub dim_kitaev: usize,
    pub dim_pxp: usize,
    pub intertwining_violations: usize,
    /// `None` in dimension-only mode.
    pub max_spectral_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<String>,
}

impl EquivalenceReport {
    pub fn holds(&self, spectral_tolerance: f64) -> bool {
        self.dim_kitaev == self.dim_pxp
            && self.intertwining_violations == 0
            && self.max_spectral_deviation.is_none_or(|d| d < spectral_tolerance)
    }
}

const MAX_COUNTEREXAMPLES: usize = 10;

/// Compares the all-plus Kitaev sector with PXP transition by transition and,
/// when both dimensions are at most `dense_ceiling`, spectrally.
pub fn verify_pxp_equivalence(n_sites: usize, dense_ceiling: usize) -> Result<EquivalenceReport> {
    let root = SpinConfig::repeat("yx", n_sites)
        .or_else(|_| SpinConfig::uniform(Site::Z, n_sites))?;
    let basis = build_sector_basis(root)?;
    let pxp = build_pxp(n_sites)?;
    let mut violations = 0;
    let mut counterexamples = Vec::new();
    let mut note = |msg: String, v: &mut usize| {
        *v += 1;
        if counterexamples.len() < MAX_COUNTEREXAMPLES {
            counterexamples.push(msg);
        }
    };
    for &s in basis.states() {
        let d = map_to_dual(&s)?;
        if map_from_dual(&d)? != s {
            note(format!("{s} does not round-trip through {d}"), &mut violations);
        }
        let mut dual_images = pxp_images(&d);
        dual_images.sort();
        let mut mapped = Vec::new();
        for im in apply_hamiltonian(s) {
            if im.amplitude != Sign::Plus {
                note(format!("{s} -> {} has amplitude -1", im.target), &mut violations);
            }
            mapped.push(map_to_dual(&im.target)?);
        }
        mapped.sort();
        if mapped != dual_images {
            note(
                format!("images of {s} map to {mapped:?}, PXP gives {dual_images:?}"),
                &mut violations,
            );
        }
    }
    let max_spectral_deviation = if basis.len() <= dense_ceiling && pxp.dim() <= dense_ceiling {
        if basis.len() != pxp.dim() {
            Some(f64::INFINITY)
        } else {
            let a = Spectrum::from_dense(build_sector_hamiltonian(&basis)?.to_dense()).energies;
            let b = Spectrum::from_dense(pxp.hamiltonian.to_dense()).energies;
            Some(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        }
    } else {
        None
    };
    Ok(EquivalenceReport {
        n: n_sites,
        dim_kitaev: basis.len(),
        dim_pxp: pxp.dim(),
        intertwining_violations: violations,
        max_spectral_deviation,
        counterexamples,
    })
}

/// Lucas number `L_n = F_{n-1} + F_{n+1}`.
pub fn lucas(n: usize) -> u64 {
    let (mut a, mut b) = (2u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

impl From<DualConfig> for u64 {
    fn from(d: DualConfig) -> u64 {
        d.bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> SpinConfig {
        s.parse().unwrap()
    }

    #[test]
    fn dual_examples() {
        let d = map_to_dual(&cfg("yxyx")).unwrap();
        assert_eq!(d.to_string(), "udud");
        assert_eq!(map_to_dual(&cfg("zzzz")).unwrap().to_string(), "dddd");
        assert!(map_to_dual(&cfg("zxzx")).is_err());
        assert_eq!(map_from_dual(&DualConfig::new(0, 5).unwrap()).unwrap(), cfg("zzzzz"));
        assert_eq!(map_from_dual(&DualConfig::new(0b0101, 4).unwrap()).unwrap(), cfg("yxyx"));
        assert!(DualConfig::new(0b0011, 4).is_err());
        // Adjacent across the periodic boundary.
        assert!(DualConfig::new(0b1001, 4).is_err());
    }

    #[test]
    fn blockade_rotation_test() {
        for n in 3..10usize {
            for w in 0..(1u64 << n) {
                let brute = (0..n).all(|j| !(w >> j & 1 == 1 && w >> ((j + 1) % n) & 1 == 1));
                assert_eq!(is_blockaded(w, n), brute);
            }
        }
    }

    #[test]
    fn pxp_dimensions() {
        assert_eq!(build_pxp(4).unwrap().dim(), 7);
        for n in 3..=16 {
            assert_eq!(blockaded_words(n).unwrap().len() as u64, lucas(n));
        }
        let h = build_pxp(6).unwrap().hamiltonian.to_dense();
        assert_eq!(h, h.transpose());
        assert!((0..h.nrows()).all(|i| h[(i, i)] == 0.0));
        assert!(build_pxp(2).is_err());
    }

    #[test]
    fn small_equivalence() {
        let r = verify_pxp_equivalence(6, 1000).unwrap();
        assert_eq!(r.dim_kitaev, 18);
        assert!(r.holds(1e-10), "{r:?}");
        let r = verify_pxp_equivalence(7, 0).unwrap();
        assert!(r.max_spectral_deviation.is_none());
        assert_eq!(r.intertwining_violations, 0);
    }
}
