//! Hard-disk configurations, sector bases and the configuration graph.

mod basis;
mod count;
mod fragments;

use std::fmt;

use crate::{Error, Lattice, Result};

pub use basis::{enumerate_sector, BasisTable, DEFAULT_MEMORY_CAP};
pub use count::{count_all, count_sector};
pub use fragments::{
    classify_density, fragment_decomposition, DensityRegime, Fragment, FragmentDecomposition,
    FragmentationThresholds,
};

/// Occupation pattern over at most 128 sites; bit `i` is `n_i`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(u128);

impl Configuration {
    pub const CAPACITY: usize = 128;

    pub const fn from_bits(bits: u128) -> Self {
        Configuration(bits)
    }

    pub fn from_sites<I: IntoIterator<Item = usize>>(sites: I) -> Result<Self> {
        let mut bits = 0u128;
        for s in sites {
            if s >= Self::CAPACITY {
                return Err(Error::TooManySites { n_sites: s + 1 });
            }
            bits |= 1 << s;
        }
        Ok(Configuration(bits))
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn is_occupied(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Occupied sites in ascending order.
    pub fn sites(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let s = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(s)
            }
        })
    }

    /// Moves the particle on `from` to `to`.
    pub fn hopped(self, from: usize, to: usize) -> Self {
        Configuration(self.0 ^ (1 << from) ^ (1 << to))
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sites()).finish()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.sites().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Bit masks of each site's exclusion and hop neighbourhoods.
#[derive(Clone, Debug)]
pub struct SiteMasks {
    pub exclusion: Vec<u128>,
    pub hop: Vec<u128>,
}

impl SiteMasks {
    pub fn new(lattice: &Lattice) -> Result<Self> {
        ensure_fits(lattice)?;
        let mask = |sites: &[usize]| sites.iter().fold(0u128, |m, &j| m | (1u128 << j));
        let n = lattice.n_sites();
        Ok(SiteMasks {
            exclusion: (0..n)
                .map(|i| mask(lattice.exclusion_neighbors(i)))
                .collect(),
            hop: (0..n).map(|i| mask(lattice.hop_neighbors(i))).collect(),
        })
    }
}

pub(crate) fn ensure_fits(lattice: &Lattice) -> Result<()> {
    if lattice.n_sites() > Configuration::CAPACITY {
        Err(Error::TooManySites {
            n_sites: lattice.n_sites(),
        })
    } else {
        Ok(())
    }
}

/// True iff no two occupied sites lie within the exclusion radius.
pub fn is_valid(config: Configuration, lattice: &Lattice) -> bool {
    let n = lattice.n_sites();
    if n < Configuration::CAPACITY && config.bits() >> n != 0 {
        return false;
    }
    config.sites().all(|i| {
        lattice
            .exclusion_neighbors(i)
            .iter()
            .all(|&j| !config.is_occupied(j))
    })
}

/// Calls `f` for every configuration reachable by one allowed hop, in
/// ascending (origin site, target site) order.
pub fn for_each_successor(
    config: Configuration,
    masks: &SiteMasks,
    mut f: impl FnMut(Configuration),
) {
    let bits = config.bits();
    for from in config.sites() {
        let without = bits ^ (1 << from);
        let mut targets = masks.hop[from] & !bits;
        while targets != 0 {
            let to = targets.trailing_zeros() as usize;
            targets &= targets - 1;
            if without & masks.exclusion[to] == 0 {
                f(Configuration(without | (1 << to)));
            }
        }
    }
}

/// All configurations reachable from `config` by one nearest-neighbour hop,
/// sorted ascending.
pub fn hop_successors(config: Configuration, lattice: &Lattice) -> Result<Vec<Configuration>> {
    let masks = SiteMasks::new(lattice)?;
    let mut out = Vec::new();
    for_each_successor(config, &masks, |c| out.push(c));
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LatticeSpec;

    fn cfg(sites: &[usize]) -> Configuration {
        Configuration::from_sites(sites.iter().copied()).unwrap()
    }

    #[test]
    fn validity_examples() {
        let chain = Lattice::new(LatticeSpec::chain(4)).unwrap();
        assert!(is_valid(cfg(&[0, 2]), &chain));
        assert!(!is_valid(cfg(&[1, 2]), &chain));
        assert!(!is_valid(cfg(&[0, 4]), &chain), "site outside the lattice");

        let sq = Lattice::new(LatticeSpec::square(3)).unwrap();
        assert!(is_valid(cfg(&[0, 4, 8]), &sq));
        assert!(!is_valid(cfg(&[0, 3]), &sq));
    }

    #[test]
    fn successor_examples() {
        let chain = Lattice::new(LatticeSpec::chain(4)).unwrap();
        assert_eq!(
            hop_successors(cfg(&[0, 2]), &chain).unwrap(),
            vec![cfg(&[0, 3])]
        );

        let sq = Lattice::new(LatticeSpec::square(3)).unwrap();
        assert!(hop_successors(cfg(&[0, 4, 8]), &sq).unwrap().is_empty());

        let two = Lattice::new(LatticeSpec::chain(2)).unwrap();
        assert_eq!(hop_successors(cfg(&[0]), &two).unwrap(), vec![cfg(&[1])]);
    }

    #[test]
    fn site_iteration_and_display() {
        let c = cfg(&[3, 0, 127]);
        assert_eq!(c.sites().collect::<Vec<_>>(), vec![0, 3, 127]);
        assert_eq!(c.count(), 3);
        assert_eq!(c.to_string(), "{0,3,127}");
        assert!(Configuration::from_sites([128]).is_err());
        assert_eq!(c.hopped(3, 4), cfg(&[0, 4, 127]));
    }
}
