//! Exact diagonalization and eigenstate diagnostics.
//!
//! The hopping matrix is real symmetric, so eigenvectors are real. Entropies
//! use the natural logarithm.

use std::f64::consts::PI;

use faer::{Mat, Side};
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::hamiltonian::{build_hamiltonian, SparseHamiltonian};
use crate::statespace::{
    enumerate_sector, fragment_decomposition, BasisTable, Configuration, Fragment,
    DEFAULT_MEMORY_CAP,
};
use crate::{Bipartition, Error, Lattice, Result};

/// Largest fragment dimension diagonalized densely by default.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Eigenvectors are processed in column blocks of this width when computing
/// pair correlations.
const EA_BLOCK: usize = 256;

#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Ascending.
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub vectors: Mat<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k).iter().copied().collect()
    }

    /// `max_k ||H v_k - E_k v_k||`.
    pub fn max_residual(&self, h: &SparseHamiltonian) -> Result<f64> {
        let mut worst = 0.0f64;
        for (k, &e) in self.energies.iter().enumerate() {
            let v = self.vector(k);
            let hv = h.apply(&v)?;
            let r = hv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - e * b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// How eigenvectors inside a degenerate eigenspace are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegenerateBasis {
    /// Whatever orthonormal basis the dense solver returns.
    Solver,
    /// Each degenerate eigenspace is rotated to diagonalize the diagonal
    /// observable `w(c) = sum_{i in c} ln p_i` (`p_i` the `i`-th prime), which
    /// takes a distinct value on every configuration. The result does not
    /// depend on the solver's arbitrary choice.
    #[default]
    Canonical,
}

impl DegenerateBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            DegenerateBasis::Solver => "solver",
            DegenerateBasis::Canonical => "canonical",
        }
    }
}

/// Full spectrum and eigenvectors of a fragment Hamiltonian, in the solver's
/// basis on degenerate eigenspaces.
pub fn diagonalize(h: &SparseHamiltonian, dense_cap: usize) -> Result<EigenSystem> {
    if h.dim() > dense_cap {
        return Err(Error::DenseCapExceeded {
            dim: h.dim(),
            cap: dense_cap,
        });
    }
    if h.dim() == 0 {
        return Ok(EigenSystem {
            energies: Vec::new(),
            vectors: Mat::zeros(0, 0),
        });
    }
    let evd = h
        .to_dense()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let mut eig = EigenSystem {
        energies: evd.S().column_vector().iter().copied().collect(),
        vectors: evd.U().to_owned(),
    };
    fix_signs(&mut eig.vectors);
    Ok(eig)
}

/// [`diagonalize`] followed by the requested choice of degenerate basis.
pub fn diagonalize_with(
    h: &SparseHamiltonian,
    dense_cap: usize,
    degenerate: DegenerateBasis,
) -> Result<EigenSystem> {
    let mut eig = diagonalize(h, dense_cap)?;
    if degenerate == DegenerateBasis::Canonical {
        canonicalize_degenerate(&mut eig, &h.basis().configs, degeneracy_tol(h))?;
    }
    Ok(eig)
}

/// Eigenvalues closer than this are treated as one eigenspace.
pub fn degeneracy_tol(h: &SparseHamiltonian) -> f64 {
    1e-8 * h.norm_bound().max(1.0)
}

/// Ranges `[start, end)` of eigenvalues that agree within `tol` of their
/// neighbours.
pub fn degenerate_blocks(energies: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=energies.len() {
        if k == energies.len() || energies[k] - energies[k - 1] > tol {
            blocks.push((start, k));
            start = k;
        }
    }
    blocks
}

/// `ln` of the first `n` primes.
fn log_primes(n: usize) -> Vec<f64> {
    let mut primes: Vec<u64> = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes.iter().map(|&p| (p as f64).ln()).collect()
}

/// Rotates every degenerate eigenspace onto the eigenbasis of the
/// configuration-injective weight described in [`DegenerateBasis::Canonical`].
pub fn canonicalize_degenerate(
    eig: &mut EigenSystem,
    configs: &[Configuration],
    tol: f64,
) -> Result<()> {
    let n_sites = configs
        .iter()
        .map(|c| c.sites().last().map_or(0, |s| s + 1))
        .max()
        .unwrap_or(0);
    let logp = log_primes(n_sites);
    let weight: Vec<f64> = configs
        .iter()
        .map(|c| c.sites().map(|i| logp[i]).sum())
        .collect();
    for (a, b) in degenerate_blocks(&eig.energies, tol) {
        if b - a < 2 {
            continue;
        }
        let v = eig.vectors.subcols(a, b - a).to_owned();
        let wv = Mat::<f64>::from_fn(v.nrows(), v.ncols(), |r, c| weight[r] * v[(r, c)]);
        let projected = v.transpose() * &wv;
        let evd = projected
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let mut rotated = &v * evd.U();
        fix_signs(&mut rotated);
        eig.vectors.subcols_mut(a, b - a).copy_from(&rotated);
    }
    Ok(())
}

/// Makes the largest-magnitude component of every column positive (first
/// one on ties).
fn fix_signs(vectors: &mut Mat<f64>) {
    for k in 0..vectors.ncols() {
        let mut best = 0.0f64;
        for r in 0..vectors.nrows() {
            let x = vectors[(r, k)];
            if x.abs() > best.abs() + 1e-12 {
                best = x;
            }
        }
        if best < 0.0 {
            for r in 0..vectors.nrows() {
                vectors[(r, k)] = -vectors[(r, k)];
            }
        }
    }
}

/// Placement of every basis configuration in the Schmidt coefficient matrix
/// `C[a, b]`, where `a` and `b` are the restrictions to the two sides of a cut.
#[derive(Clone, Debug)]
pub struct SchmidtLayout {
    rows: Vec<u32>,
    cols: Vec<u32>,
    n_rows: usize,
    n_cols: usize,
}

impl SchmidtLayout {
    pub fn new(configs: &[Configuration], part: &Bipartition) -> Self {
        let (mask_a, mask_b) = (part.mask_a(), part.mask_b());
        let mut row_ids: FxHashMap<u128, u32> = FxHashMap::default();
        let mut col_ids: FxHashMap<u128, u32> = FxHashMap::default();
        let mut rows = Vec::with_capacity(configs.len());
        let mut cols = Vec::with_capacity(configs.len());
        for c in configs {
            let n = row_ids.len() as u32;
            rows.push(*row_ids.entry(c.bits() & mask_a).or_insert(n));
            let n = col_ids.len() as u32;
            cols.push(*col_ids.entry(c.bits() & mask_b).or_insert(n));
        }
        SchmidtLayout {
            rows,
            cols,
            n_rows: row_ids.len(),
            n_cols: col_ids.len(),
        }
    }

    /// Distinct restricted patterns on side A and side B.
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// `ln min(d_A, d_B)`, the largest entropy the layout allows.
    pub fn max_entropy(&self) -> f64 {
        (self.n_rows.min(self.n_cols).max(1) as f64).ln()
    }

    /// `S_A = -sum_k s_k^2 ln s_k^2` over the singular values of `C`.
    pub fn entropy(&self, amplitudes: &[f64]) -> Result<f64> {
        let mut c = Mat::<f64>::zeros(self.n_rows, self.n_cols);
        for ((&r, &col), &a) in self.rows.iter().zip(&self.cols).zip(amplitudes) {
            c[(r as usize, col as usize)] = a;
        }
        let sv = c
            .singular_values()
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(sv
            .iter()
            .map(|s| s * s)
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum::<f64>()
            .max(0.0))
    }
}

/// Bipartite entanglement entropy of a real state on the given configurations.
pub fn entanglement_entropy(
    amplitudes: &[f64],
    configs: &[Configuration],
    part: &Bipartition,
) -> Result<f64> {
    if amplitudes.len() != configs.len() {
        return Err(Error::DimensionMismatch {
            expected: configs.len(),
            found: amplitudes.len(),
        });
    }
    SchmidtLayout::new(configs, part).entropy(amplitudes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdwardsAnderson {
    pub q_ea: f64,
    /// `(Q_EA - (2 eta - 1)^4) / (1 - (2 eta - 1)^4)`.
    pub q: f64,
}

fn normalization(eta: f64) -> Result<f64> {
    let g4 = (2.0 * eta - 1.0).powi(4);
    if (1.0 - g4).abs() < 1e-15 {
        return Err(Error::InvalidArgument(format!(
            "Edwards-Anderson normalization is undefined at density {eta}"
        )));
    }
    Ok(g4)
}

/// Pair correlations `K_ij = sum_c p_c s_i(c) s_j(c)` for `i < j`, with
/// `s_i = 2 n_i - 1`, evaluated for many probability vectors at once.
#[derive(Clone, Debug)]
pub struct PairCorrelator {
    /// `dim x n_pairs`, entries `s_i s_j`.
    features: Mat<f64>,
    n_sites: usize,
    g4: f64,
}

impl PairCorrelator {
    pub fn new(configs: &[Configuration], n_sites: usize, eta: f64) -> Result<Self> {
        let g4 = normalization(eta)?;
        let pairs: Vec<(usize, usize)> = (0..n_sites)
            .flat_map(|i| (i + 1..n_sites).map(move |j| (i, j)))
            .collect();
        let features = Mat::<f64>::from_fn(configs.len(), pairs.len(), |k, p| {
            let (i, j) = pairs[p];
            if configs[k].is_occupied(i) == configs[k].is_occupied(j) {
                1.0
            } else {
                -1.0
            }
        });
        Ok(PairCorrelator {
            features,
            n_sites,
            g4,
        })
    }

    fn finish(&self, off_diagonal_sq: f64, total_prob: f64) -> EdwardsAnderson {
        let n = self.n_sites as f64;
        // Diagonal terms: K_ii = sum_c p_c = total_prob.
        let q_ea = (n * total_prob * total_prob + 2.0 * off_diagonal_sq) / (n * n);
        EdwardsAnderson {
            q_ea,
            q: (q_ea - self.g4) / (1.0 - self.g4),
        }
    }

    /// One result per column of `amplitudes` (`dim x K`).
    pub fn evaluate(&self, amplitudes: &Mat<f64>) -> Vec<EdwardsAnderson> {
        let dim = self.features.nrows();
        let n_states = amplitudes.ncols();
        let mut out = Vec::with_capacity(n_states);
        let mut start = 0;
        while start < n_states {
            let width = EA_BLOCK.min(n_states - start);
            let probs = Mat::<f64>::from_fn(dim, width, |r, k| amplitudes[(r, start + k)].powi(2));
            let corr = self.features.transpose() * &probs;
            for k in 0..width {
                let total: f64 = probs.col(k).iter().sum();
                let off: f64 = corr.col(k).iter().map(|x| x * x).sum();
                out.push(self.finish(off, total));
            }
            start += width;
        }
        out
    }
}

/// `Q_EA = N^-2 sum_ij |<(2n_i - 1)(2n_j - 1)>|^2` and its normalized form.
pub fn edwards_anderson(
    amplitudes: &[f64],
    configs: &[Configuration],
    n_sites: usize,
    eta: f64,
) -> Result<EdwardsAnderson> {
    if amplitudes.len() != configs.len() {
        return Err(Error::DimensionMismatch {
            expected: configs.len(),
            found: amplitudes.len(),
        });
    }
    let col = Mat::<f64>::from_fn(amplitudes.len(), 1, |r, _| amplitudes[r]);
    Ok(PairCorrelator::new(configs, n_sites, eta)?.evaluate(&col)[0])
}

/// Infinite-temperature structure factor at the checkerboard wavevector:
/// `C = N^-1 (2 pi / N_sites)^2 sum_ij (-1)^(r_i - r_j) Tr(n_i n_j)`.
///
/// The double sum is the square of the staggered particle count, averaged
/// over the sector.
pub fn structure_factor_inf_t(basis: &BasisTable) -> f64 {
    if basis.is_empty() {
        return 0.0;
    }
    let lattice = basis.lattice();
    let even = (0..lattice.n_sites())
        .filter(|&i| lattice.parity_sign(i) > 0)
        .fold(0u128, |m, i| m | (1u128 << i));
    let sum_sq: f64 = basis
        .configs()
        .iter()
        .map(|c| {
            let plus = (c.bits() & even).count_ones() as i64;
            let minus = c.count() as i64 - plus;
            ((plus - minus) * (plus - minus)) as f64
        })
        .sum();
    let prefactor = (2.0 * PI / lattice.n_sites() as f64).powi(2);
    prefactor * sum_sq / basis.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticsRow {
    pub l: usize,
    pub m: usize,
    pub eta: f64,
    pub c_inf: f64,
    pub n_states: usize,
}

/// Structure factor of every non-empty sector of a lattice.
pub fn statics_scan(lattice: &Lattice, memory_cap: usize) -> Result<Vec<StaticsRow>> {
    let mut rows = Vec::new();
    for m in 0..=lattice.n_sites() {
        let basis = enumerate_sector(lattice, m, memory_cap)?;
        if basis.is_empty() {
            break;
        }
        rows.push(StaticsRow {
            l: lattice.l(),
            m,
            eta: basis.eta(),
            c_inf: structure_factor_inf_t(&basis),
            n_states: basis.len(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScarRecord {
    pub fragment_id: usize,
    pub fragment_size: usize,
    pub is_largest_fragment: bool,
    pub energy: f64,
    /// `E / N_sites`.
    pub energy_density: f64,
    pub entropy: f64,
    pub q_ea: f64,
    pub q: f64,
}

#[derive(Clone, Debug)]
pub struct ScarScan {
    pub records: Vec<ScarRecord>,
    /// Fragments above the dense cap, not diagonalized.
    pub skipped: Vec<Fragment>,
    /// The largest fragment was skipped.
    pub partial: bool,
    pub largest_fragment: Option<Fragment>,
    pub sector_size: usize,
    /// Largest `||H v - E v||` over all reported eigenvectors.
    pub max_residual: f64,
    /// Largest Gershgorin norm bound over the diagonalized fragments.
    pub norm_bound: f64,
}

impl ScarScan {
    /// Largest entanglement entropy over all reported eigenstates.
    pub fn max_entropy(&self) -> f64 {
        self.records.iter().map(|r| r.entropy).fold(0.0, f64::max)
    }

    /// `(min, max)` energy density over all reported eigenstates.
    pub fn energy_density_range(&self) -> Option<(f64, f64)> {
        let mut it = self.records.iter().map(|r| r.energy_density);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), e| (lo.min(e), hi.max(e))))
    }

    /// Eigenstates of the largest fragment that satisfy `criteria`.
    pub fn scar_candidates(&self, criteria: &ScarCriteria) -> Vec<&ScarRecord> {
        let Some((lo, hi)) = self.energy_density_range() else {
            return Vec::new();
        };
        let margin = 0.5 * (1.0 - criteria.middle_fraction) * (hi - lo);
        let s_cut = criteria.entropy_fraction * self.max_entropy();
        self.records
            .iter()
            .filter(|r| {
                r.is_largest_fragment
                    && r.q > criteria.q_min
                    && r.entropy < s_cut
                    && r.energy_density > lo + margin
                    && r.energy_density < hi - margin
            })
            .collect()
    }
}

/// Thresholds that flag an eigenstate as scar-like: normalized EA order
/// above `q_min`, entropy below `entropy_fraction` of the sector maximum, and
/// energy density inside the central `middle_fraction` of the sector's range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScarCriteria {
    pub q_min: f64,
    pub entropy_fraction: f64,
    pub middle_fraction: f64,
}

impl Default for ScarCriteria {
    fn default() -> Self {
        ScarCriteria {
            q_min: 0.5,
            entropy_fraction: 0.5,
            middle_fraction: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanOptions {
    pub dense_cap: usize,
    pub memory_cap: usize,
    pub degenerate: DegenerateBasis,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            dense_cap: DEFAULT_DENSE_CAP,
            memory_cap: DEFAULT_MEMORY_CAP,
            degenerate: DegenerateBasis::default(),
        }
    }
}

/// Eigenstate diagnostics for every fragment of the `m`-particle sector.
///
/// The cut is the bottom half in 2D and the left half in 1D.
pub fn scar_scan(lattice: &Lattice, m: usize, opts: &ScanOptions) -> Result<ScarScan> {
    let dense_cap = opts.dense_cap;
    let basis = enumerate_sector(lattice, m, opts.memory_cap)?;
    let dec = fragment_decomposition(&basis);
    let part = Bipartition::default_for(lattice);
    let largest = dec.largest();
    let n_sites = lattice.n_sites() as f64;

    let (kept, skipped): (Vec<Fragment>, Vec<Fragment>) =
        dec.fragments().iter().partition(|f| f.size <= dense_cap);

    struct Part {
        records: Vec<ScarRecord>,
        residual: f64,
        norm_bound: f64,
    }
    let parts: Vec<Part> = kept
        .par_iter()
        .map(|frag| -> Result<Part> {
            let h = build_hamiltonian(&basis, Some((&dec, frag.id)), 1.0)?;
            let eig = diagonalize_with(&h, dense_cap, opts.degenerate)?;
            let configs = &h.basis().configs;
            let layout = SchmidtLayout::new(configs, &part);
            let ea = PairCorrelator::new(configs, lattice.n_sites(), basis.eta())?
                .evaluate(&eig.vectors);
            let is_largest = largest.map(|l| l.id) == Some(frag.id);
            let mut records = Vec::with_capacity(eig.len());
            for (k, &e) in eig.energies.iter().enumerate() {
                records.push(ScarRecord {
                    fragment_id: frag.id,
                    fragment_size: frag.size,
                    is_largest_fragment: is_largest,
                    energy: e,
                    energy_density: e / n_sites,
                    entropy: layout.entropy(&eig.vector(k))?,
                    q_ea: ea[k].q_ea,
                    q: ea[k].q,
                });
            }
            Ok(Part {
                records,
                residual: eig.max_residual(&h)?,
                norm_bound: h.norm_bound(),
            })
        })
        .collect::<Result<_>>()?;

    let partial = largest.is_some_and(|l| skipped.iter().any(|s| s.id == l.id));
    Ok(ScarScan {
        max_residual: parts.iter().map(|p| p.residual).fold(0.0, f64::max),
        norm_bound: parts.iter().map(|p| p.norm_bound).fold(0.0, f64::max),
        records: parts.into_iter().flat_map(|p| p.records).collect(),
        skipped,
        partial,
        largest_fragment: largest,
        sector_size: basis.len(),
    })
}
