//! Entanglement entropy, overlap towers and level-spacing statistics.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::Spectrum;
use crate::error::{input, Error, Result};
use crate::hamiltonian::{apply_hamiltonian, SparseHamiltonian};
use crate::spinbasis::{translate, SectorBasis, SpinConfig};

/// Fewest levels accepted by [`level_statistics`].
pub const MIN_LEVELS: usize = 100;
/// Levels closer than this are treated as one degenerate level.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;
/// Overlaps are floored here before taking `log10`; exact zeros map to `-inf`.
pub const OVERLAP_FLOOR: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPoint {
    /// Energy for eigenstate scatters, time for dynamics.
    pub key: f64,
    pub entropy: f64,
}

/// Row/column assignment of every basis state for one bipartition.
///
/// Each basis element is a product state, so splitting its label string at
/// the cut gives the Schmidt-matrix coordinates exactly. Rows that share no
/// column chain belong to different blocks of the coefficient matrix, and
/// the reduced density matrix is block diagonal over them.
#[derive(Clone, Debug)]
pub struct Bipartition {
    /// Per basis state: block, row within the block, column within the block.
    coords: Vec<(u32, u32, u32)>,
    /// Rows and columns of each block.
    shapes: Vec<(usize, usize)>,
    block_len: usize,
    n_sites: usize,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

impl Bipartition {
    /// Block `A = cut` against its complement; `cut` must be a nonempty proper
    /// subrange of `0..N`.
    pub fn new(basis: &SectorBasis, cut: Range<usize>) -> Result<Bipartition> {
        let n = basis.n_sites();
        if cut.start >= cut.end || cut.end > n || cut.len() == n {
            return input(format!("cut {cut:?} is not a nonempty proper block of 0..{n}"));
        }
        let (a_len, b_len) = (cut.len(), n - cut.len());
        let mut row_ids: HashMap<u64, u32> = HashMap::new();
        let mut col_ids: HashMap<u64, u32> = HashMap::new();
        let mut pairs = Vec::with_capacity(basis.len());
        for s in basis.states() {
            let next_r = row_ids.len() as u32;
            let r = *row_ids.entry(s.block_word(cut.start, a_len)).or_insert(next_r);
            let next_c = col_ids.len() as u32;
            let c = *col_ids.entry(s.block_word(cut.end, b_len)).or_insert(next_c);
            pairs.push((r, c));
        }
        // Join rows that share a column.
        let mut parent: Vec<u32> = (0..row_ids.len() as u32).collect();
        let mut col_row = vec![u32::MAX; col_ids.len()];
        for &(r, c) in &pairs {
            if col_row[c as usize] == u32::MAX {
                col_row[c as usize] = r;
            } else {
                let (a, b) = (find(&mut parent, r), find(&mut parent, col_row[c as usize]));
                parent[a as usize] = b;
            }
        }
        let mut block_of_root: HashMap<u32, u32> = HashMap::new();
        let mut local_row: HashMap<u32, u32> = HashMap::new();
        let mut local_col: HashMap<u32, u32> = HashMap::new();
        let mut shapes: Vec<(usize, usize)> = Vec::new();
        let mut coords = Vec::with_capacity(pairs.len());
        for &(r, c) in &pairs {
            let root = find(&mut parent, r);
            let next = block_of_root.len() as u32;
            let block = *block_of_root.entry(root).or_insert_with(|| {
                shapes.push((0, 0));
                next
            });
            let shape = &mut shapes[block as usize];
            let lr = *local_row.entry(r).or_insert_with(|| {
                shape.0 += 1;
                shape.0 as u32 - 1
            });
            let lc = *local_col.entry(c).or_insert_with(|| {
                shape.1 += 1;
                shape.1 as u32 - 1
            });
            coords.push((block, lr, lc));
        }
        Ok(Bipartition {
            coords,
            shapes,
            block_len: a_len,
            n_sites: n,
        })
    }

    /// `ln 3` times the smaller block length.
    pub fn max_entropy(&self) -> f64 {
        self.block_len.min(self.n_sites - self.block_len) as f64 * 3f64.ln()
    }

    fn entropy_of<T>(&self, amps: &[T]) -> Result<f64>
    where
        T: ComplexField<RealField = f64> + Copy,
    {
        if amps.len() != self.coords.len() {
            return Err(Error::LengthMismatch {
                expected: self.coords.len(),
                found: amps.len(),
            });
        }
        let norm2: f64 = amps.iter().map(|a| a.modulus_squared()).sum();
        if (norm2.sqrt() - 1.0).abs() > 1e-6 {
            return Err(Error::Unnormalized(norm2.sqrt()));
        }
        let mut blocks: Vec<DMatrix<T>> = self.shapes.iter().map(|&(r, c)| DMatrix::zeros(r, c)).collect();
        for (&(b, r, c), &a) in self.coords.iter().zip(amps) {
            blocks[b as usize][(r as usize, c as usize)] = a;
        }
        let mut entropy = 0.0;
        for m in blocks {
            let rho = if m.nrows() <= m.ncols() {
                &m * m.adjoint()
            } else {
                m.adjoint() * &m
            };
            entropy += rho
                .symmetric_eigenvalues()
                .iter()
                .filter(|&&p| p > 1e-300)
                .map(|&p| -p * p.ln())
                .sum::<f64>();
        }
        Ok(entropy.max(0.0))
    }

    pub fn entropy(&self, state: &[Complex64]) -> Result<f64> {
        self.entropy_of(state)
    }

    pub fn entropy_real(&self, state: &[f64]) -> Result<f64> {
        self.entropy_of(state)
    }
}

/// Von Neumann entropy `-sum p ln p` of the reduced state on the block `cut`.
pub fn entanglement_entropy(basis: &SectorBasis, state: &[Complex64], cut: Range<usize>) -> Result<f64> {
    Bipartition::new(basis, cut)?.entropy(state)
}

/// Half-chain cut `0..N/2`; odd chains are refused.
pub fn half_chain(basis: &SectorBasis) -> Result<Bipartition> {
    let n = basis.n_sites();
    if !n.is_multiple_of(2) {
        return input(format!("equipartition needs an even chain, got N = {n}"));
    }
    Bipartition::new(basis, 0..n / 2)
}

/// Half-chain entropy of every eigenstate, keyed by energy.
pub fn ee_scatter(spectrum: &Spectrum, basis: &SectorBasis) -> Result<Vec<EntropyPoint>> {
    if spectrum.dim() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            found: spectrum.dim(),
        });
    }
    let cut = half_chain(basis)?;
    (0..spectrum.dim())
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = spectrum.vector(k).iter().copied().collect();
            Ok(EntropyPoint {
                key: spectrum.energies[k],
                entropy: cut.entropy_real(&v)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct OverlapTower {
    pub energies: Vec<f64>,
    /// `|<init|E_k>|^2`.
    pub overlaps: Vec<f64>,
    /// `log10` of the floored overlap, `-inf` for exact zeros.
    pub log_overlaps: Vec<f64>,
}

impl OverlapTower {
    pub fn total(&self) -> f64 {
        self.overlaps.iter().sum()
    }
}

pub fn log_overlap(ov: f64) -> f64 {
    if ov == 0.0 {
        f64::NEG_INFINITY
    } else {
        ov.max(OVERLAP_FLOOR).log10()
    }
}

pub fn overlap_tower(spectrum: &Spectrum, basis: &SectorBasis, initial: &SpinConfig) -> Result<OverlapTower> {
    if spectrum.dim() != basis.len() {
        return Err(Error::LengthMismatch {
            expected: basis.len(),
            found: spectrum.dim(),
        });
    }
    let i = basis.require(initial)?;
    let overlaps: Vec<f64> = (0..spectrum.dim())
        .map(|k| spectrum.vectors[(i, k)].powi(2))
        .collect();
    Ok(OverlapTower {
        energies: spectrum.energies.clone(),
        log_overlaps: overlaps.iter().map(|&o| log_overlap(o)).collect(),
        overlaps,
    })
}

/// Merges levels closer than [`DEGENERACY_TOLERANCE`] into one, summing
/// their overlaps. The summed weight is the overlap with the whole eigenspace,
/// which does not depend on the vectors the solver picked inside it.
pub fn collapse_degenerate(tower: &OverlapTower) -> OverlapTower {
    let mut energies: Vec<f64> = Vec::new();
    let mut overlaps: Vec<f64> = Vec::new();
    let mut group_start = f64::NEG_INFINITY;
    for (&e, &o) in tower.energies.iter().zip(&tower.overlaps) {
        if e - group_start < DEGENERACY_TOLERANCE {
            *overlaps.last_mut().unwrap() += o;
        } else {
            group_start = e;
            energies.push(e);
            overlaps.push(o);
        }
    }
    OverlapTower {
        energies,
        log_overlaps: overlaps.iter().map(|&o| log_overlap(o)).collect(),
        overlaps,
    }
}

/// Highest-overlap state of one energy bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TowerTop {
    pub bin: i64,
    pub energy: f64,
    pub overlap: f64,
}

/// Bins of width `spacing` centred on `origin + k * spacing`; one top per
/// occupied bin, ordered by energy.
pub fn tower_tops(tower: &OverlapTower, origin: f64, spacing: f64) -> Result<Vec<TowerTop>> {
    if !(spacing > 0.0) {
        return input(format!("tower spacing must be positive, got {spacing}"));
    }
    let mut best: std::collections::BTreeMap<i64, TowerTop> = Default::default();
    for (&e, &o) in tower.energies.iter().zip(&tower.overlaps) {
        let bin = ((e - origin) / spacing).round() as i64;
        let top = TowerTop { bin, energy: e, overlap: o };
        best.entry(bin)
            .and_modify(|t| {
                if o > t.overlap {
                    *t = top;
                }
            })
            .or_insert(top);
    }
    Ok(best.into_values().collect())
}

/// Gap-ratio samples `min(d_k, d_{k+1}) / max(d_k, d_{k+1})` of one block,
/// after collapsing degenerate levels.
pub fn gap_ratios(levels: &[f64]) -> Vec<f64> {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup_by(|a, b| (*a - *b).abs() < DEGENERACY_TOLERANCE);
    let gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.windows(2)
        .map(|g| g[0].min(g[1]) / g[0].max(g[1]))
        .collect()
}

/// Mean gap ratio pooled over blocks.
pub fn mean_r_ratio(blocks: &[Vec<f64>]) -> Option<f64> {
    let samples: Vec<f64> = blocks.iter().flat_map(|b| gap_ratios(b)).collect();
    (!samples.is_empty()).then(|| samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Sector Hamiltonian block-diagonalized by translations over the label's
/// minimal period. Returns the spectrum of every momentum block.
///
/// Orbit states `|r, k> = R^{-1/2} sum_a e^{-ika} T^a |r>` with `T` the
/// period translation and `R` the orbit length give
/// `<r', k|H|r, k> = sum amp sqrt(R_r / R_r') e^{ikd}` over images
/// `T^d |r'>` of `|r>`.
pub fn momentum_spectra(basis: &SectorBasis, dense_ceiling: usize) -> Result<Vec<Vec<f64>>> {
    let n = basis.n_sites();
    let period = basis.label().period();
    let n_k = n / period;
    // Representative, shift of each state from its representative, orbit size.
    let mut rep_of: HashMap<SpinConfig, (SpinConfig, usize)> = HashMap::with_capacity(basis.len());
    let mut orbit_len: HashMap<SpinConfig, usize> = HashMap::new();
    for &s in basis.states() {
        if rep_of.contains_key(&s) {
            continue;
        }
        let mut orbit = vec![s];
        loop {
            let next = translate(*orbit.last().unwrap(), period as i64);
            if next == s {
                break;
            }
            if !basis.contains(&next) {
                return Err(Error::Verification(format!(
                    "translation of {s} leaves the sector basis"
                )));
            }
            orbit.push(next);
        }
        let (a0, &rep) = orbit.iter().enumerate().min_by_key(|(_, c)| **c).unwrap();
        for (a, &c) in orbit.iter().enumerate() {
            let shift = (a + orbit.len() - a0) % orbit.len();
            rep_of.insert(c, (rep, shift));
        }
        orbit_len.insert(rep, orbit.len());
    }
    let mut reps: Vec<SpinConfig> = orbit_len.keys().copied().collect();
    reps.sort();

    (0..n_k)
        .map(|m| {
            let k = 2.0 * PI * m as f64 / n_k as f64;
            let members: Vec<SpinConfig> = reps
                .iter()
                .copied()
                .filter(|r| (m * orbit_len[r]).is_multiple_of(n_k))
                .collect();
            if members.len() > dense_ceiling {
                return Err(Error::ResourceLimit(format!(
                    "momentum block of dimension {} exceeds the ceiling {dense_ceiling}",
                    members.len()
                )));
            }
            let index: HashMap<SpinConfig, usize> =
                members.iter().enumerate().map(|(i, r)| (*r, i)).collect();
            let mut hk = DMatrix::<Complex64>::zeros(members.len(), members.len());
            for (col, r) in members.iter().enumerate() {
                let r_len = orbit_len[r] as f64;
                for im in apply_hamiltonian(*r) {
                    let (rep, d) = rep_of[&im.target];
                    let Some(&row) = index.get(&rep) else { continue };
                    let w = im.amplitude.value() * (r_len / orbit_len[&rep] as f64).sqrt();
                    hk[(row, col)] += Complex64::from_polar(w, k * d as f64);
                }
            }
            let mut e: Vec<f64> = SymmetricEigen::new(hk).eigenvalues.iter().copied().collect();
            e.sort_by(f64::total_cmp);
            Ok(e)
        })
        .collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LevelStatistics {
    pub mean_r: f64,
    pub momentum_resolved: bool,
    pub n_levels: usize,
    pub n_blocks: usize,
}

/// Mean gap ratio of a sector, optionally resolved by momentum first.
pub fn level_statistics(
    h: &SparseHamiltonian,
    basis: &SectorBasis,
    spectrum: Option<&Spectrum>,
    momentum_resolve: bool,
    dense_ceiling: usize,
) -> Result<LevelStatistics> {
    let blocks = if momentum_resolve {
        momentum_spectra(basis, dense_ceiling)?
    } else {
        match spectrum {
            Some(s) => vec![s.energies.clone()],
            None => vec![crate::dynamics::full_diagonalize(h, dense_ceiling)?.energies],
        }
    };
    let n_levels = blocks.iter().map(Vec::len).sum();
    if n_levels < MIN_LEVELS {
        return input(format!(
            "level statistics need at least {MIN_LEVELS} levels, sector has {n_levels}"
        ));
    }
    let mean_r = mean_r_ratio(&blocks)
        .ok_or_else(|| Error::Input("no nondegenerate level spacings".into()))?;
    Ok(LevelStatistics {
        mean_r,
        momentum_resolved: momentum_resolve,
        n_levels,
        n_blocks: blocks.len(),
    })
}
