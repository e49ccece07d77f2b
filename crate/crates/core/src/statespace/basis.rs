use std::sync::Arc;

use rustc_hash::FxHashMap;

use super::{count_sector, ensure_fits, Configuration, SiteMasks};
use crate::{Error, Lattice, Result};

/// Default cap on the number of configurations materialized in one sector.
pub const DEFAULT_MEMORY_CAP: usize = 20_000_000;

/// All valid configurations of one particle-number sector, sorted ascending
/// by bit pattern.
#[derive(Clone, Debug)]
pub struct BasisTable {
    lattice: Arc<Lattice>,
    masks: Arc<SiteMasks>,
    m: usize,
    configs: Vec<Configuration>,
    index: FxHashMap<Configuration, u32>,
}

impl BasisTable {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shared_lattice(&self) -> Arc<Lattice> {
        Arc::clone(&self.lattice)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Particle density `M / N_sites`.
    pub fn eta(&self) -> f64 {
        self.m as f64 / self.lattice.n_sites() as f64
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn config(&self, ordinal: usize) -> Configuration {
        self.configs[ordinal]
    }

    pub fn index_of(&self, config: Configuration) -> Option<usize> {
        self.index.get(&config).map(|&k| k as usize)
    }

    /// Calls `f` with the ordinal of every hop successor of `ordinal`.
    pub fn for_each_neighbor(&self, ordinal: usize, mut f: impl FnMut(usize)) {
        super::for_each_successor(self.configs[ordinal], &self.masks, |c| {
            f(self.index[&c] as usize)
        });
    }
}

/// Materializes the `m`-particle sector, refusing sectors larger than `cap`.
pub fn enumerate_sector(lattice: &Lattice, m: usize, cap: usize) -> Result<BasisTable> {
    enumerate_shared(Arc::new(lattice.clone()), m, cap)
}

pub(crate) fn enumerate_shared(lattice: Arc<Lattice>, m: usize, cap: usize) -> Result<BasisTable> {
    ensure_fits(&lattice)?;
    let expected = count_sector(&lattice, m);
    if expected > cap as u128 || expected > u32::MAX as u128 {
        return Err(Error::CapacityExceeded {
            count: expected,
            cap,
        });
    }
    let masks = SiteMasks::new(&lattice)?;
    let bound = fill_bounds(&lattice);
    let mut configs = Vec::with_capacity(expected as usize);
    walk_sector(lattice.n_sites(), m, &masks.exclusion, &bound, &mut |c| {
        configs.push(c)
    });
    debug_assert!(configs.windows(2).all(|w| w[0] < w[1]));
    debug_assert_eq!(configs.len() as u128, expected);

    let mut index = FxHashMap::with_capacity_and_hasher(configs.len(), Default::default());
    for (k, &c) in configs.iter().enumerate() {
        index.insert(c, k as u32);
    }
    Ok(BasisTable {
        lattice,
        masks: Arc::new(masks),
        m,
        configs,
        index,
    })
}

/// `bound[k]` is an upper bound on the particles that fit on sites `0..k`:
/// every row segment is a path, and a path of `n` sites holds at most
/// `ceil(n / 2)` disks.
pub(crate) fn fill_bounds(lattice: &Lattice) -> Vec<usize> {
    let l = lattice.l();
    (0..=lattice.n_sites())
        .map(|k| (k / l) * l.div_ceil(2) + (k % l).div_ceil(2))
        .collect()
}

/// Visits every valid `m`-particle configuration in ascending numeric order.
///
/// Sites are decided from the highest index down, empty before occupied, so the
/// visit order is the numeric order of the bit patterns.
pub(crate) fn walk_sector(
    n_sites: usize,
    m: usize,
    exclusion: &[u128],
    bound: &[usize],
    visit: &mut impl FnMut(Configuration),
) {
    fn go(
        site: usize,
        placed: u128,
        remaining: usize,
        exclusion: &[u128],
        bound: &[usize],
        visit: &mut impl FnMut(Configuration),
    ) {
        if remaining == 0 {
            visit(Configuration(placed));
            return;
        }
        // Sites 0..site are still undecided.
        if bound[site] < remaining {
            return;
        }
        let s = site - 1;
        go(s, placed, remaining, exclusion, bound, visit);
        if placed & exclusion[s] == 0 {
            go(s, placed | (1 << s), remaining - 1, exclusion, bound, visit);
        }
    }
    go(n_sites, 0, m, exclusion, bound, visit);
}
