//! Product states of the spin-1 chain in the `{x, y, z}` single-site basis,
//! bond-parity sectors and constrained sector bases.
//!
//! A [`SpinConfig`] packs its sites into a `u64`, two bits per site, with site
//! 0 in the most significant occupied position. Comparing the packed words of
//! two configurations of equal length is therefore lexicographic comparison
//! of the label strings (`x < y < z`).

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{input, Error, Result};
use crate::hamiltonian;

/// Largest chain that fits the packed representation.
pub const MAX_SITES: usize = 32;

/// Largest chain for which all `3^N` product states are enumerated.
pub const ENUMERATION_LIMIT: usize = 14;

/// Local state of one spin-1 site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Site {
    pub const ALL: [Site; 3] = [Site::X, Site::Y, Site::Z];

    #[inline]
    pub fn code(self) -> u64 {
        self as u64
    }

    #[inline]
    fn from_code(code: u64) -> Site {
        match code {
            0 => Site::X,
            1 => Site::Y,
            2 => Site::Z,
            _ => unreachable!("invalid packed site code {code}"),
        }
    }

    pub fn from_char(c: char) -> Result<Site> {
        match c {
            'x' => Ok(Site::X),
            'y' => Ok(Site::Y),
            'z' => Ok(Site::Z),
            other => input(format!("site label {other:?} is not one of x, y, z")),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Site::X => 'x',
            Site::Y => 'y',
            Site::Z => 'z',
        }
    }

    /// Diagonal entry of the site parity `exp(i pi S^x)` on this label.
    pub fn parity_x(self) -> i8 {
        match self {
            Site::X => 1,
            Site::Y | Site::Z => -1,
        }
    }

    /// Diagonal entry of the site parity `exp(i pi S^y)` on this label.
    pub fn parity_y(self) -> i8 {
        match self {
            Site::Y => 1,
            Site::X | Site::Z => -1,
        }
    }
}

/// Bond parity `P^y` on the left site times `P^x` on the right site.
pub fn classify_bond(left: Site, right: Site) -> i8 {
    left.parity_y() * right.parity_x()
}

/// [`classify_bond`] on raw characters.
pub fn classify_bond_chars(left: char, right: char) -> Result<i8> {
    Ok(classify_bond(Site::from_char(left)?, Site::from_char(right)?))
}

/// One product state of an `N`-site periodic chain.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    n: u8,
    bits: u64,
}

impl SpinConfig {
    pub fn from_sites(sites: &[Site]) -> Result<SpinConfig> {
        if sites.is_empty() || sites.len() > MAX_SITES {
            return input(format!(
                "chain length {} outside 1..={MAX_SITES}",
                sites.len()
            ));
        }
        let bits = sites.iter().fold(0u64, |acc, s| (acc << 2) | s.code());
        Ok(SpinConfig {
            n: sites.len() as u8,
            bits,
        })
    }

    /// The uniform configuration `|s s ... s>`.
    pub fn uniform(site: Site, n_sites: usize) -> Result<SpinConfig> {
        SpinConfig::from_sites(&vec![site; n_sites])
    }

    /// Repeats `unit` until the chain has `n_sites` sites.
    pub fn repeat(unit: &str, n_sites: usize) -> Result<SpinConfig> {
        if unit.is_empty() || !n_sites.is_multiple_of(unit.chars().count()) {
            return input(format!(
                "pattern {unit:?} does not tile a chain of {n_sites} sites"
            ));
        }
        unit.repeat(n_sites / unit.chars().count()).parse()
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn packed(&self) -> u64 {
        self.bits
    }

    #[inline]
    fn shift_of(&self, i: usize) -> usize {
        2 * (self.n as usize - 1 - i)
    }

    /// Label at site `i`. Panics if `i >= n_sites`.
    #[inline]
    pub fn site(&self, i: usize) -> Site {
        assert!(i < self.n_sites(), "site {i} out of range");
        Site::from_code((self.bits >> self.shift_of(i)) & 3)
    }

    #[inline]
    pub fn with_site(&self, i: usize, s: Site) -> SpinConfig {
        let sh = self.shift_of(i);
        SpinConfig {
            n: self.n,
            bits: (self.bits & !(3 << sh)) | (s.code() << sh),
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.n_sites()).map(|i| self.site(i))
    }

    /// Labels on the sites of bond `j`, i.e. `(j, j + 1 mod N)`.
    #[inline]
    pub fn bond_pair(&self, j: usize) -> (Site, Site) {
        (self.site(j), self.site((j + 1) % self.n_sites()))
    }

    /// Labels on the contiguous block `range`, packed as a word.
    pub(crate) fn block_word(&self, start: usize, len: usize) -> u64 {
        (start..start + len).fold(0u64, |acc, i| (acc << 2) | self.site(i % self.n_sites()).code())
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.sites() {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}>")
    }
}

impl FromStr for SpinConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<SpinConfig> {
        let sites = s.chars().map(Site::from_char).collect::<Result<Vec<_>>>()?;
        SpinConfig::from_sites(&sites)
    }
}

/// Cyclic rotation: site `i` of the result holds site `i - shift` of `config`.
pub fn translate(config: SpinConfig, shift: i64) -> SpinConfig {
    let n = config.n_sites() as i64;
    let k = shift.rem_euclid(n) as usize;
    if k == 0 {
        return config;
    }
    // Moving labels to higher site indices is a right rotation of the word.
    let width = 2 * config.n_sites();
    let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    let sh = 2 * k;
    let bits = ((config.bits >> sh) | (config.bits << (width - sh))) & mask;
    SpinConfig { n: config.n, bits }
}

/// Eigenvalues `b_j` of all bond-parity operators; bond `j` joins sites `j`
/// and `j + 1 mod N`. Bit `j` of the packed word is set when `b_j = -1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SectorLabel {
    n: u8,
    negative: u64,
}

impl SectorLabel {
    pub fn from_bonds(bonds: &[i8]) -> Result<SectorLabel> {
        if bonds.len() < 2 || bonds.len() > MAX_SITES {
            return input(format!("sector label length {} outside 2..={MAX_SITES}", bonds.len()));
        }
        let mut negative = 0u64;
        for (j, &b) in bonds.iter().enumerate() {
            match b {
                1 => {}
                -1 => negative |= 1 << j,
                other => return input(format!("bond parity {other} is not +1 or -1")),
            }
        }
        Ok(SectorLabel {
            n: bonds.len() as u8,
            negative,
        })
    }

    /// Tiles a '+'/'-' pattern (e.g. `"++-"`) over `n_sites` bonds.
    pub fn from_pattern(pattern: &str, n_sites: usize) -> Result<SectorLabel> {
        let unit: Vec<i8> = pattern
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' | '\u{2212}' => Ok(-1),
                other => input(format!("sector symbol {other:?} is not '+' or '-'")),
            })
            .collect::<Result<_>>()?;
        if unit.is_empty() || !n_sites.is_multiple_of(unit.len()) {
            return input(format!(
                "pattern {pattern:?} of length {} does not divide N = {n_sites}",
                unit.len()
            ));
        }
        let bonds: Vec<i8> = unit.iter().copied().cycle().take(n_sites).collect();
        SectorLabel::from_bonds(&bonds)
    }

    /// The all `b_j = +1` sector.
    pub fn all_plus(n_sites: usize) -> Result<SectorLabel> {
        SectorLabel::from_bonds(&vec![1; n_sites])
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn bond(&self, j: usize) -> i8 {
        if self.negative >> j & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn bonds(&self) -> Vec<i8> {
        (0..self.n_sites()).map(|j| self.bond(j)).collect()
    }

    pub fn is_all_plus(&self) -> bool {
        self.negative == 0
    }

    /// Smallest `p > 0` dividing `N` with `b_{j+p} = b_j` for all `j`.
    pub fn period(&self) -> usize {
        let n = self.n_sites();
        (1..=n)
            .filter(|p| n.is_multiple_of(*p))
            .find(|&p| (0..n).all(|j| self.bond(j) == self.bond((j + p) % n)))
            .unwrap_or(n)
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n_sites() {
            f.write_str(if self.bond(j) == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SectorLabel({self})")
    }
}

impl FromStr for SectorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<SectorLabel> {
        SectorLabel::from_pattern(s, s.chars().count())
    }
}

pub fn sector_label(config: SpinConfig) -> Result<SectorLabel> {
    let n = config.n_sites();
    if n < 2 {
        return input("sector labels need at least two sites");
    }
    let mut negative = 0u64;
    for j in 0..n {
        let (l, r) = config.bond_pair(j);
        if classify_bond(l, r) < 0 {
            negative |= 1 << j;
        }
    }
    Ok(SectorLabel {
        n: n as u8,
        negative,
    })
}

fn check_enumerable(n_sites: usize) -> Result<()> {
    if n_sites < 2 {
        return input("enumeration needs at least two sites");
    }
    if n_sites > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "full enumeration of 3^{n_sites} states refused (limit N <= {ENUMERATION_LIMIT})"
        )));
    }
    Ok(())
}

/// Calls `f` on every product state of an `n`-site chain, in lexicographic order.
fn for_each_config(n_sites: usize, mut f: impl FnMut(SpinConfig)) {
    let mut digits = vec![0u8; n_sites];
    'outer: loop {
        let bits = digits.iter().fold(0u64, |acc, &d| (acc << 2) | d as u64);
        f(SpinConfig {
            n: n_sites as u8,
            bits,
        });
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < 3 {
                continue 'outer;
            }
            *d = 0;
        }
        break;
    }
}

/// Dimension of every nonempty sector of an `n`-site chain.
pub fn enumerate_sectors(n_sites: usize) -> Result<BTreeMap<SectorLabel, usize>> {
    check_enumerable(n_sites)?;
    let mut dims = BTreeMap::new();
    let mut err = None;
    for_each_config(n_sites, |c| match sector_label(c) {
        Ok(label) => *dims.entry(label).or_insert(0) += 1,
        Err(e) => err = Some(e),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(dims),
    }
}

/// All product states carrying `label`, by brute-force filtering.
pub fn sector_members(label: SectorLabel) -> Result<Vec<SpinConfig>> {
    check_enumerable(label.n_sites())?;
    let mut out = Vec::new();
    for_each_config(label.n_sites(), |c| {
        if sector_label(c).map(|l| l == label).unwrap_or(false) {
            out.push(c);
        }
    });
    Ok(out)
}

/// Lexicographically smallest configuration carrying `label`.
pub fn sector_representative(label: SectorLabel) -> Result<SpinConfig> {
    let n = label.n_sites();
    for first in Site::ALL {
        // ok[i][c]: site i may hold code c and the chain can still close on `first`.
        let mut ok = vec![[false; 3]; n];
        for s in Site::ALL {
            ok[n - 1][s as usize] = classify_bond(s, first) == label.bond(n - 1);
        }
        for i in (1..n - 1).rev() {
            for s in Site::ALL {
                ok[i][s as usize] = Site::ALL
                    .iter()
                    .any(|&r| ok[i + 1][r as usize] && classify_bond(s, r) == label.bond(i));
            }
        }
        let mut sites = vec![first];
        for i in 1..n {
            let prev = sites[i - 1];
            match Site::ALL
                .into_iter()
                .find(|&s| ok[i][s as usize] && classify_bond(prev, s) == label.bond(i - 1))
            {
                Some(s) => sites.push(s),
                None => break,
            }
        }
        if sites.len() == n {
            return SpinConfig::from_sites(&sites);
        }
    }
    input(format!("sector {label} has no member"))
}

/// Sizes of the connected components of the Hamiltonian graph on a sector,
/// largest first. Uses full enumeration, so it is limited to small chains.
pub fn sector_components(label: SectorLabel) -> Result<Vec<usize>> {
    let mut remaining: HashMap<SpinConfig, bool> =
        sector_members(label)?.into_iter().map(|c| (c, false)).collect();
    let mut members: Vec<SpinConfig> = remaining.keys().copied().collect();
    members.sort();
    let mut sizes = Vec::new();
    for start in members {
        if remaining[&start] {
            continue;
        }
        let basis = build_sector_basis(start)?;
        for s in basis.states() {
            remaining.insert(*s, true);
        }
        sizes.push(basis.len());
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    Ok(sizes)
}

/// Ordered set of product states closed under the Hamiltonian, all in one sector.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    label: SectorLabel,
    states: Vec<SpinConfig>,
    index: HashMap<SpinConfig, u32>,
}

impl SectorBasis {
    pub fn label(&self) -> SectorLabel {
        self.label
    }

    pub fn n_sites(&self) -> usize {
        self.label.n_sites()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[SpinConfig] {
        &self.states
    }

    pub fn state(&self, i: usize) -> SpinConfig {
        self.states[i]
    }

    pub fn index_of(&self, config: &SpinConfig) -> Option<usize> {
        self.index.get(config).map(|&i| i as usize)
    }

    pub fn contains(&self, config: &SpinConfig) -> bool {
        self.index.contains_key(config)
    }

    /// Index of `config`, or [`Error::NotInBasis`].
    pub fn require(&self, config: &SpinConfig) -> Result<usize> {
        self.index_of(config)
            .ok_or_else(|| Error::NotInBasis(config.to_string()))
    }

    /// Basis vector of a member state.
    pub fn unit_vector(&self, config: &SpinConfig) -> Result<Vec<f64>> {
        let i = self.require(config)?;
        let mut v = vec![0.0; self.len()];
        v[i] = 1.0;
        Ok(v)
    }
}

/// Breadth-first closure of `{root}` under the Hamiltonian. The images of each
/// state are visited in lexicographic order, which fixes the basis order.
pub fn build_sector_basis(root: SpinConfig) -> Result<SectorBasis> {
    let label = sector_label(root)?;
    let mut states = vec![root];
    let mut index = HashMap::new();
    index.insert(root, 0u32);
    let mut queue = VecDeque::from([root]);
    let mut images = Vec::with_capacity(root.n_sites());
    while let Some(s) = queue.pop_front() {
        images.clear();
        images.extend(hamiltonian::apply_hamiltonian(s).into_iter().map(|im| im.target));
        images.sort_unstable();
        images.dedup();
        for &t in &images {
            if index.contains_key(&t) {
                continue;
            }
            if sector_label(t)? != label {
                return Err(Error::Verification(format!(
                    "state {t} reached from {root} has label {} instead of {label}",
                    sector_label(t)?
                )));
            }
            index.insert(t, states.len() as u32);
            states.push(t);
            queue.push_back(t);
        }
    }
    Ok(SectorBasis {
        label,
        states,
        index,
    })
}
