//! Sector sizes without materializing configurations.

use crate::lattice::Boundary;
use crate::Lattice;

/// Number of valid `m`-particle configurations.
///
/// Open chains with unit exclusion use the closed form `C(L - m + 1, m)`; open
/// square lattices with unit exclusion use a row-by-row transfer recursion over
/// row patterns. Any other geometry falls back to a depth-first count, which
/// needs at most 128 sites.
///
/// # Panics
///
/// On the depth-first path when the lattice has more than 128 sites.
pub fn count_sector(lattice: &Lattice, m: usize) -> u128 {
    if m > lattice.n_sites() {
        return 0;
    }
    let spec = lattice.spec();
    match (spec.dim, spec.boundary, spec.exclusion_radius) {
        (1, Boundary::Open, 1) => binomial((spec.l + 1 - m) as u128, m as u128),
        (2, Boundary::Open, 1) => transfer_counts(spec.l).get(m).copied().unwrap_or(0),
        _ => dfs_count(lattice, m),
    }
}

/// Total number of valid configurations over all particle numbers.
pub fn count_all(lattice: &Lattice) -> u128 {
    (0..=lattice.n_sites())
        .map(|m| count_sector(lattice, m))
        .sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    // Each partial product C(n-k+i, i) is an integer.
    (1..=k).fold(1u128, |acc, i| acc * (n - k + i) / i)
}

/// Per-particle-number counts on an open `l x l` square lattice.
fn transfer_counts(l: usize) -> Vec<u128> {
    let rows: Vec<u32> = (0u32..1 << l).filter(|r| r & (r >> 1) == 0).collect();
    let pops: Vec<usize> = rows.iter().map(|r| r.count_ones() as usize).collect();
    let max_m = l * l.div_ceil(2);

    // dp[row pattern][particles so far]
    let mut dp = vec![vec![0u128; max_m + 1]; rows.len()];
    for (k, &p) in pops.iter().enumerate() {
        dp[k][p] = 1;
    }
    for _ in 1..l {
        let mut next = vec![vec![0u128; max_m + 1]; rows.len()];
        for (a, &ra) in rows.iter().enumerate() {
            for (b, &rb) in rows.iter().enumerate() {
                if ra & rb != 0 {
                    continue;
                }
                let pb = pops[b];
                for m in 0..=max_m - pb {
                    let c = dp[a][m];
                    if c != 0 {
                        next[b][m + pb] += c;
                    }
                }
            }
        }
        dp = next;
    }
    let mut totals = vec![0u128; max_m + 1];
    for row in &dp {
        for (m, &c) in row.iter().enumerate() {
            totals[m] += c;
        }
    }
    totals
}

fn dfs_count(lattice: &Lattice, m: usize) -> u128 {
    let masks = super::SiteMasks::new(lattice)
        .expect("depth-first counting needs a lattice of at most 128 sites");
    let bound = super::basis::fill_bounds(lattice);
    let mut total = 0u128;
    super::basis::walk_sector(lattice.n_sites(), m, &masks.exclusion, &bound, &mut |_| {
        total += 1
    });
    total
}
