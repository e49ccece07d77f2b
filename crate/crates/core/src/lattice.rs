//! Lattice geometry.
//!
//! Sites are indexed row-major, `index = y * L + x`, with `y = 0` the bottom
//! row. A chain is the `dim = 1` case with every site in row 0.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeSpec {
    pub dim: usize,
    pub l: usize,
    pub boundary: Boundary,
    pub exclusion_radius: usize,
}

impl LatticeSpec {
    pub fn chain(l: usize) -> Self {
        LatticeSpec {
            dim: 1,
            l,
            boundary: Boundary::Open,
            exclusion_radius: 1,
        }
    }

    pub fn square(l: usize) -> Self {
        LatticeSpec {
            dim: 2,
            l,
            boundary: Boundary::Open,
            exclusion_radius: 1,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_exclusion_radius(mut self, radius: usize) -> Self {
        self.exclusion_radius = radius;
        self
    }

    pub fn n_sites(&self) -> usize {
        self.l.pow(self.dim as u32)
    }
}

/// A unit step along one lattice axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

const DIRECTIONS_1D: [Direction; 2] = [Direction::PlusX, Direction::MinusX];
const DIRECTIONS_2D: [Direction; 4] = [
    Direction::PlusX,
    Direction::MinusX,
    Direction::PlusY,
    Direction::MinusY,
];

#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    coords: Vec<[usize; 2]>,
    hop_neighbors: Vec<Vec<usize>>,
    exclusion_neighbors: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        if !(1..=2).contains(&spec.dim) {
            return Err(Error::InvalidLattice(format!(
                "dimension must be 1 or 2, got {}",
                spec.dim
            )));
        }
        if spec.l < 2 {
            return Err(Error::InvalidLattice(format!(
                "linear extent must be at least 2, got {}",
                spec.l
            )));
        }
        if spec.exclusion_radius == 0 {
            return Err(Error::InvalidLattice(
                "exclusion radius must be at least 1".into(),
            ));
        }
        let n = spec.n_sites();
        let coords: Vec<[usize; 2]> = (0..n).map(|i| [i % spec.l, i / spec.l]).collect();

        let mut lattice = Lattice {
            spec,
            coords,
            hop_neighbors: Vec::new(),
            exclusion_neighbors: Vec::new(),
        };
        lattice.hop_neighbors = (0..n)
            .map(|i| {
                let mut nbrs: Vec<usize> = lattice
                    .directions()
                    .iter()
                    .filter_map(|&d| lattice.step(i, d))
                    .filter(|&j| j != i)
                    .collect();
                nbrs.sort_unstable();
                nbrs.dedup();
                nbrs
            })
            .collect();
        let r2 = (spec.exclusion_radius * spec.exclusion_radius) as i64;
        lattice.exclusion_neighbors = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && lattice.distance_sq(i, j) <= r2)
                    .collect()
            })
            .collect();
        Ok(lattice)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn l(&self) -> usize {
        self.spec.l
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    /// `[x, y]`; `y` is always 0 on a chain.
    pub fn coord(&self, site: usize) -> [usize; 2] {
        self.coords[site]
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.spec.l && (self.spec.dim == 2 || y == 0));
        y * self.spec.l + x
    }

    pub fn hop_neighbors(&self, site: usize) -> &[usize] {
        &self.hop_neighbors[site]
    }

    pub fn exclusion_neighbors(&self, site: usize) -> &[usize] {
        &self.exclusion_neighbors[site]
    }

    /// The `2 * dim` axis directions, in a fixed order.
    pub fn directions(&self) -> &'static [Direction] {
        if self.spec.dim == 1 {
            &DIRECTIONS_1D
        } else {
            &DIRECTIONS_2D
        }
    }

    /// The site one unit step away, or `None` when the step leaves an open lattice.
    pub fn step(&self, site: usize, dir: Direction) -> Option<usize> {
        let l = self.spec.l;
        let [x, y] = self.coords[site];
        let periodic = self.spec.boundary == Boundary::Periodic;
        let shift = |v: usize, up: bool| -> Option<usize> {
            match (up, periodic) {
                (true, _) if v + 1 < l => Some(v + 1),
                (true, true) => Some(0),
                (false, _) if v > 0 => Some(v - 1),
                (false, true) => Some(l - 1),
                _ => None,
            }
        };
        match dir {
            Direction::PlusX => shift(x, true).map(|nx| self.site(nx, y)),
            Direction::MinusX => shift(x, false).map(|nx| self.site(nx, y)),
            Direction::PlusY if self.spec.dim == 2 => shift(y, true).map(|ny| self.site(x, ny)),
            Direction::MinusY if self.spec.dim == 2 => shift(y, false).map(|ny| self.site(x, ny)),
            _ => None,
        }
    }

    /// Squared Euclidean distance, minimum-image under periodic boundaries.
    pub fn distance_sq(&self, a: usize, b: usize) -> i64 {
        let l = self.spec.l as i64;
        let [ax, ay] = self.coords[a];
        let [bx, by] = self.coords[b];
        let axis = |u: usize, v: usize| -> i64 {
            let d = (u as i64 - v as i64).abs();
            match self.spec.boundary {
                Boundary::Open => d,
                Boundary::Periodic => d.min(l - d),
            }
        };
        let dx = axis(ax, bx);
        let dy = axis(ay, by);
        dx * dx + dy * dy
    }

    /// Checkerboard sign `(-1)^(x+y)` of a site.
    pub fn parity_sign(&self, site: usize) -> i32 {
        let [x, y] = self.coords[site];
        if (x + y) % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

/// A split of the sites into a subsystem `A` and its complement `B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub set_a: Vec<usize>,
    pub set_b: Vec<usize>,
}

impl Bipartition {
    pub fn from_predicate(lattice: &Lattice, in_a: impl Fn(usize) -> bool) -> Self {
        let (set_a, set_b) = (0..lattice.n_sites()).partition(|&i| in_a(i));
        Bipartition { set_a, set_b }
    }

    /// Rows `y < floor(L/2)` of a square lattice.
    pub fn bottom_half(lattice: &Lattice) -> Result<Self> {
        if lattice.dim() != 2 {
            return Err(Error::InvalidArgument(
                "bottom-half bipartition needs a 2D lattice; use left_half for chains".into(),
            ));
        }
        let rows = lattice.l() / 2;
        Ok(Self::from_predicate(lattice, |i| {
            lattice.coord(i)[1] < rows
        }))
    }

    /// Sites `x < floor(L/2)` of a chain.
    pub fn left_half(lattice: &Lattice) -> Result<Self> {
        if lattice.dim() != 1 {
            return Err(Error::InvalidArgument(
                "left-half bipartition is the 1D mode".into(),
            ));
        }
        let cut = lattice.l() / 2;
        Ok(Self::from_predicate(lattice, |i| lattice.coord(i)[0] < cut))
    }

    /// Bottom half in 2D, left half in 1D.
    pub fn default_for(lattice: &Lattice) -> Self {
        match lattice.dim() {
            1 => Self::left_half(lattice),
            _ => Self::bottom_half(lattice),
        }
        .expect("dimension checked by the lattice")
    }

    pub fn complement(&self) -> Self {
        Bipartition {
            set_a: self.set_b.clone(),
            set_b: self.set_a.clone(),
        }
    }

    pub fn mask_a(&self) -> u128 {
        self.set_a.iter().fold(0u128, |m, &i| m | (1u128 << i))
    }

    pub fn mask_b(&self) -> u128 {
        self.set_b.iter().fold(0u128, |m, &i| m | (1u128 << i))
    }
}
