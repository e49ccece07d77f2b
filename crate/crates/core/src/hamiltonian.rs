//! Sparse hopping Hamiltonian on one sector or fragment.
//!
//! `H = J sum_<ij> P_i (a_i^+ a_j + a_j^+ a_i) P_j` has matrix element `+J`
//! between two valid configurations related by a single nearest-neighbour hop
//! and zero otherwise. All stored entries share the amplitude `J`, so rows keep
//! only column indices.

use std::collections::VecDeque;
use std::io::{self, Write};
use std::ops::{Add, Mul};

use faer::Mat;
use num_traits::Zero;
use rayon::prelude::*;

use crate::statespace::{BasisTable, Configuration, FragmentDecomposition};
use crate::{Error, Result};

const MATVEC_CHUNK: usize = 4096;

/// `sum_c v[c]` over one row with independent partial sums, so several
/// gathers are in flight at once.
#[inline]
fn gather_sum<T>(cols: &[u32], v: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T>,
{
    let mut acc = [T::zero(); 4];
    let mut quads = cols.chunks_exact(4);
    for q in &mut quads {
        // SAFETY: every stored column is a local row index below `dim`, and
        // `apply_into` checks `v.len() == dim` before any gather.
        unsafe {
            acc[0] = acc[0] + *v.get_unchecked(q[0] as usize);
            acc[1] = acc[1] + *v.get_unchecked(q[1] as usize);
            acc[2] = acc[2] + *v.get_unchecked(q[2] as usize);
            acc[3] = acc[3] + *v.get_unchecked(q[3] as usize);
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &c in quads.remainder() {
        sum = sum + v[c as usize];
    }
    sum
}

/// The configurations a Hamiltonian acts on, ascending.
#[derive(Clone, Debug)]
pub struct FragmentBasis {
    pub fragment_id: Option<usize>,
    pub n_sites: usize,
    pub m: usize,
    pub configs: Vec<Configuration>,
}

impl FragmentBasis {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.m as f64 / self.n_sites as f64
    }

    pub fn index_of(&self, config: Configuration) -> Option<usize> {
        self.configs.binary_search(&config).ok()
    }
}

#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    basis: FragmentBasis,
    coupling: f64,
    row_offsets: Vec<usize>,
    columns: Vec<u32>,
}

/// Builds `H` on the whole sector (`fragment = None`) or on one fragment.
pub fn build_hamiltonian(
    basis: &BasisTable,
    fragment: Option<(&FragmentDecomposition, usize)>,
    coupling: f64,
) -> Result<SparseHamiltonian> {
    let members: Vec<usize> = match fragment {
        Some((dec, id)) => dec.members(id)?,
        None => (0..basis.len()).collect(),
    };
    // sector ordinal -> local row
    let mut local = vec![u32::MAX; basis.len()];
    for (row, &k) in members.iter().enumerate() {
        local[k] = row as u32;
    }

    let mut row_offsets = Vec::with_capacity(members.len() + 1);
    let mut columns = Vec::new();
    row_offsets.push(0);
    let mut row_buf = Vec::new();
    for &k in &members {
        row_buf.clear();
        basis.for_each_neighbor(k, |nb| {
            debug_assert_ne!(local[nb], u32::MAX, "hop left the fragment");
            row_buf.push(local[nb]);
        });
        row_buf.sort_unstable();
        columns.extend_from_slice(&row_buf);
        row_offsets.push(columns.len());
    }

    Ok(SparseHamiltonian {
        basis: FragmentBasis {
            fragment_id: fragment.map(|(_, id)| id),
            n_sites: basis.lattice().n_sites(),
            m: basis.m(),
            configs: members.iter().map(|&k| basis.config(k)).collect(),
        },
        coupling,
        row_offsets,
        columns,
    })
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn basis(&self) -> &FragmentBasis {
        &self.basis
    }

    pub fn nnz(&self) -> usize {
        self.columns.len()
    }

    /// Column indices of one row, ascending.
    pub fn row(&self, r: usize) -> &[u32] {
        &self.columns[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    /// Gershgorin bound `|J| * max row degree` on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let max_deg = (0..self.dim())
            .map(|r| self.row(r).len())
            .max()
            .unwrap_or(0);
        self.coupling.abs() * max_deg as f64
    }

    /// Two-colouring of the hop graph (`true` marks the second class), or
    /// `None` when the graph has an odd cycle.
    pub fn two_coloring(&self) -> Option<Vec<bool>> {
        let n = self.dim();
        let mut color: Vec<Option<bool>> = vec![None; n];
        let mut queue = VecDeque::new();
        for root in 0..n {
            if color[root].is_some() {
                continue;
            }
            color[root] = Some(false);
            queue.push_back(root);
            while let Some(r) = queue.pop_front() {
                let c = color[r]?;
                for &nb in self.row(r) {
                    match color[nb as usize] {
                        None => {
                            color[nb as usize] = Some(!c);
                            queue.push_back(nb as usize);
                        }
                        Some(d) if d == c => return None,
                        Some(_) => {}
                    }
                }
            }
        }
        color.into_iter().collect()
    }

    /// `out = H v`.
    pub fn apply_into<T>(&self, v: &[T], out: &mut [T]) -> Result<()>
    where
        T: Copy + Send + Sync + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        if out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: out.len(),
            });
        }
        // Rows are independent, so the result does not depend on the split.
        out.par_chunks_mut(MATVEC_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                let first = chunk * MATVEC_CHUNK;
                for (r, o) in block.iter_mut().enumerate() {
                    *o = gather_sum(self.row(first + r), v) * self.coupling;
                }
            });
        Ok(())
    }

    pub fn apply<T>(&self, v: &[T]) -> Result<Vec<T>>
    where
        T: Copy + Send + Sync + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        let mut out = vec![T::zero(); self.dim()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut h = Mat::<f64>::zeros(self.dim(), self.dim());
        for r in 0..self.dim() {
            for &c in self.row(r) {
                h[(r, c as usize)] = self.coupling;
            }
        }
        h
    }

    /// Writes `row col value` lines in row-major order.
    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in 0..self.dim() {
            for &c in self.row(r) {
                writeln!(w, "{r} {c} {}", self.coupling)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{enumerate_sector, fragment_decomposition, DEFAULT_MEMORY_CAP};
    use crate::{Lattice, LatticeSpec};

    fn chain_h() -> SparseHamiltonian {
        let chain = Lattice::new(LatticeSpec::chain(4)).unwrap();
        let basis = enumerate_sector(&chain, 2, DEFAULT_MEMORY_CAP).unwrap();
        build_hamiltonian(&basis, None, 1.0).unwrap()
    }

    #[test]
    fn path_graph_on_three_configs() {
        let h = chain_h();
        assert_eq!(h.dim(), 3);
        let mut nz = Vec::new();
        for r in 0..3 {
            for &c in h.row(r) {
                nz.push((r, c as usize));
            }
        }
        assert_eq!(nz, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        let dense = h.to_dense();
        assert_eq!((0..3).map(|i| dense[(i, i)]).sum::<f64>(), 0.0);
    }

    #[test]
    fn apply_examples() {
        let h = chain_h();
        assert_eq!(h.apply(&[1.0, 0.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(h.apply(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            h.apply(&[1.0, 0.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn snake_fragment_is_a_zero_scalar() {
        let sq = Lattice::new(LatticeSpec::square(3)).unwrap();
        let basis = enumerate_sector(&sq, 3, DEFAULT_MEMORY_CAP).unwrap();
        let dec = fragment_decomposition(&basis);
        let snake = basis
            .index_of(Configuration::from_sites([0, 4, 8]).unwrap())
            .unwrap();
        let h = build_hamiltonian(&basis, Some((&dec, dec.label(snake))), 1.0).unwrap();
        assert_eq!(h.dim(), 1);
        assert_eq!(h.nnz(), 0);
        assert!(matches!(
            build_hamiltonian(&basis, Some((&dec, 7777)), 1.0),
            Err(Error::UnknownFragment(7777))
        ));
    }

    #[test]
    fn coo_dump() {
        let mut buf = Vec::new();
        chain_h().write_coo(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "0 1 1\n1 0 1\n1 2 1\n2 1 1\n"
        );
    }
}
