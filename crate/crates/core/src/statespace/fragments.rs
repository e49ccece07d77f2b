use std::collections::VecDeque;

use super::BasisTable;
use crate::{Error, Result};

const UNLABELED: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fragment {
    /// Ordinal of the fragment's smallest member in the sector basis.
    pub id: usize,
    pub size: usize,
}

/// Connected components of the configuration graph of one sector.
#[derive(Clone, Debug)]
pub struct FragmentDecomposition {
    labels: Vec<u32>,
    fragments: Vec<Fragment>,
}

impl FragmentDecomposition {
    /// Fragment id of every basis ordinal.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, ordinal: usize) -> usize {
        self.labels[ordinal] as usize
    }

    /// Fragments ordered by id.
    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn n_fragments(&self) -> usize {
        self.fragments.len()
    }

    pub fn get(&self, id: usize) -> Result<Fragment> {
        self.fragments
            .binary_search_by_key(&id, |f| f.id)
            .map(|k| self.fragments[k])
            .map_err(|_| Error::UnknownFragment(id))
    }

    /// Largest fragment; ties go to the smallest id. `None` for an empty sector.
    pub fn largest(&self) -> Option<Fragment> {
        self.fragments
            .iter()
            .copied()
            .reduce(|best, f| if f.size > best.size { f } else { best })
    }

    /// `N_max / N`.
    pub fn ratio_max(&self) -> f64 {
        match self.largest() {
            Some(f) => f.size as f64 / self.labels.len() as f64,
            None => 0.0,
        }
    }

    /// Basis ordinals of one fragment, ascending.
    pub fn members(&self, id: usize) -> Result<Vec<usize>> {
        let frag = self.get(id)?;
        let mut out = Vec::with_capacity(frag.size);
        out.extend(
            self.labels[id..]
                .iter()
                .enumerate()
                .filter(|(_, &l)| l as usize == id)
                .map(|(k, _)| id + k),
        );
        Ok(out)
    }
}

/// Breadth-first labeling of the configuration graph. Visiting unlabeled
/// ordinals in ascending order makes every BFS root the smallest member of its
/// component.
pub fn fragment_decomposition(basis: &BasisTable) -> FragmentDecomposition {
    let n = basis.len();
    let mut labels = vec![UNLABELED; n];
    let mut fragments = Vec::new();
    let mut queue = VecDeque::new();
    for root in 0..n {
        if labels[root] != UNLABELED {
            continue;
        }
        let id = root as u32;
        labels[root] = id;
        queue.push_back(root);
        let mut size = 0;
        while let Some(k) = queue.pop_front() {
            size += 1;
            basis.for_each_neighbor(k, |nb| {
                if labels[nb] == UNLABELED {
                    labels[nb] = id;
                    queue.push_back(nb);
                }
            });
        }
        fragments.push(Fragment { id: root, size });
    }
    FragmentDecomposition { labels, fragments }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityRegime {
    Unfragmented,
    Weak,
    Strong,
    /// Maximum-density chain sector: fragmentation depends on the boundary and
    /// has to be checked on the actual configuration graph.
    CheckEmpirically,
}

impl DensityRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            DensityRegime::Unfragmented => "unfragmented",
            DensityRegime::Weak => "weak",
            DensityRegime::Strong => "strong",
            DensityRegime::CheckEmpirically => "check-empirically",
        }
    }
}

/// Particle numbers at which fragmentation sets in on an `L x L` lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FragmentationThresholds {
    /// `M >= L`: a diagonal snake fits and freezes.
    pub weak_onset: usize,
    /// Smallest integer `M >= L^2/2 - ceil(L/2)`.
    pub strong_onset: usize,
}

impl FragmentationThresholds {
    pub fn square(l: usize) -> Self {
        // 2M >= L^2 - 2 ceil(L/2)
        let twice = (l * l).saturating_sub(2 * l.div_ceil(2));
        FragmentationThresholds {
            weak_onset: l,
            strong_onset: twice.div_ceil(2),
        }
    }
}

/// Predicted fragmentation regime of the `m`-particle sector.
///
/// Below one particle per row the lattice is unfragmented even where the
/// strong-onset formula would already apply (only at `L = 2`).
pub fn classify_density(l: usize, m: usize, dim: usize) -> DensityRegime {
    if dim == 1 {
        return if m < l.div_ceil(2) {
            DensityRegime::Unfragmented
        } else {
            DensityRegime::CheckEmpirically
        };
    }
    let t = FragmentationThresholds::square(l);
    if m < t.weak_onset {
        DensityRegime::Unfragmented
    } else if m >= t.strong_onset {
        DensityRegime::Strong
    } else {
        DensityRegime::Weak
    }
}
