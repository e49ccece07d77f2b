//! Brute-force reference implementations shared by the integration tests.
//! They work directly on coordinates and bit shifts and do not use the
//! library's neighbour tables.
#![allow(dead_code)]

/// Open chain (`dim = 1`) or open `L x L` square lattice with nearest-neighbour
/// exclusion.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub dim: usize,
    pub l: usize,
}

impl Geometry {
    pub fn n_sites(&self) -> usize {
        self.l.pow(self.dim as u32)
    }

    fn no_wrap_mask(&self) -> u128 {
        // Sites whose right neighbour exists in the same row.
        (0..self.n_sites())
            .filter(|i| i % self.l != self.l - 1)
            .fold(0u128, |m, i| m | 1 << i)
    }

    pub fn is_valid(&self, bits: u128) -> bool {
        if bits & (bits >> 1) & self.no_wrap_mask() != 0 {
            return false;
        }
        self.dim == 1 || bits & (bits >> self.l) == 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ax, ay) = ((a % self.l) as i64, (a / self.l) as i64);
        let (bx, by) = ((b % self.l) as i64, (b / self.l) as i64);
        (ax - bx).abs() + (ay - by).abs() == 1
    }

    /// Every valid configuration, optionally restricted to `m` particles,
    /// ascending.
    pub fn all_valid(&self, m: Option<usize>) -> Vec<u128> {
        let n = self.n_sites();
        assert!(n <= 30, "brute force is exhaustive over 2^N patterns");
        (0u128..1 << n)
            .filter(|&b| m.is_none_or(|m| b.count_ones() as usize == m))
            .filter(|&b| self.is_valid(b))
            .collect()
    }

    /// `a` and `b` differ by one particle moving to an adjacent site.
    pub fn hop_related(&self, a: u128, b: u128) -> bool {
        let from = a & !b;
        let to = b & !a;
        from.count_ones() == 1
            && to.count_ones() == 1
            && self.adjacent(from.trailing_zeros() as usize, to.trailing_zeros() as usize)
    }
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Dense Hamiltonian from a double loop over configurations.
pub fn dense_hamiltonian(
    geo: &Geometry,
    configs: &[u128],
    coupling: f64,
) -> nalgebra::DMatrix<f64> {
    let n = configs.len();
    nalgebra::DMatrix::from_fn(n, n, |a, b| {
        if geo.hop_related(configs[a], configs[b]) {
            coupling
        } else {
            0.0
        }
    })
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

pub fn fibonacci(n: usize) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Bessel function of the first kind by its power series.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}
