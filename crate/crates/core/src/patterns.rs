//! Named initial configurations.
//!
//! Patterns are returned as ascending site lists so they also work on lattices
//! too large for a [`Configuration`](crate::Configuration) mask.

use std::fmt;
use std::str::FromStr;

use crate::dynamics::centered_crystal;
use crate::{Error, Lattice, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// Particles spaced two apart, centred on a chain.
    Crystal1d,
    /// Checkerboard packing (`x + y` even) of the rows `y < floor(L/2)`.
    BottomHalfPacked,
    /// `k x k` particles at even coordinates, anchored at the origin corner.
    BlockCrystal(usize),
    Sites(Vec<usize>),
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Crystal1d => f.write_str("crystal-1d"),
            Pattern::BottomHalfPacked => f.write_str("bottom-half-packed"),
            Pattern::BlockCrystal(k) => write!(f, "block-crystal({k})"),
            Pattern::Sites(s) => write!(f, "sites{s:?}"),
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;

    /// Parses a named pattern; explicit site lists are not spelled as names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "crystal-1d" => return Ok(Pattern::Crystal1d),
            "bottom-half-packed" => return Ok(Pattern::BottomHalfPacked),
            _ => {}
        }
        if let Some(k) = s
            .strip_prefix("block-crystal(")
            .and_then(|r| r.strip_suffix(')'))
        {
            return k
                .trim()
                .parse()
                .map(Pattern::BlockCrystal)
                .map_err(|_| Error::InvalidArgument(format!("bad block size in pattern {s:?}")));
        }
        Err(Error::InvalidArgument(format!("unknown pattern {s:?}")))
    }
}

impl Pattern {
    /// Sites of the pattern on `lattice`, ascending. When `m` is given the
    /// pattern must have exactly that many particles; `crystal-1d` uses it as
    /// its particle count and requires it.
    pub fn realize(&self, lattice: &Lattice, m: Option<usize>) -> Result<Vec<usize>> {
        let l = lattice.l();
        let mut sites = match self {
            Pattern::Crystal1d => {
                if lattice.dim() != 1 {
                    return Err(Error::UnrealizablePattern(
                        "crystal-1d needs a chain".into(),
                    ));
                }
                let m = m.ok_or_else(|| {
                    Error::UnrealizablePattern("crystal-1d needs a particle count".into())
                })?;
                centered_crystal(l, m, 2)?
            }
            Pattern::BottomHalfPacked => {
                if lattice.dim() != 2 {
                    return Err(Error::UnrealizablePattern(
                        "bottom-half-packed needs a square lattice".into(),
                    ));
                }
                (0..l / 2)
                    .flat_map(|y| {
                        (0..l)
                            .filter(move |x| (x + y) % 2 == 0)
                            .map(move |x| (x, y))
                    })
                    .map(|(x, y)| lattice.site(x, y))
                    .collect()
            }
            Pattern::BlockCrystal(k) => {
                let k = *k;
                if lattice.dim() != 2 || k == 0 || 2 * (k - 1) >= l {
                    return Err(Error::UnrealizablePattern(format!(
                        "block-crystal({k}) does not fit a {}D lattice of extent {l}",
                        lattice.dim()
                    )));
                }
                (0..k)
                    .flat_map(|y| (0..k).map(move |x| (2 * x, 2 * y)))
                    .map(|(x, y)| lattice.site(x, y))
                    .collect()
            }
            Pattern::Sites(s) => s.clone(),
        };
        sites.sort_unstable();
        check_sites(lattice, &sites)?;
        if let Some(m) = m {
            if sites.len() != m {
                return Err(Error::UnrealizablePattern(format!(
                    "{self} has {} particles, expected {m}",
                    sites.len()
                )));
            }
        }
        Ok(sites)
    }
}

/// Sorted, in range, distinct and free of exclusion conflicts.
pub fn check_sites(lattice: &Lattice, sites: &[usize]) -> Result<()> {
    let n = lattice.n_sites();
    let mut occupied = vec![false; n];
    for &s in sites {
        if s >= n {
            return Err(Error::UnrealizablePattern(format!(
                "site {s} is outside a lattice of {n} sites"
            )));
        }
        if occupied[s] {
            return Err(Error::UnrealizablePattern(format!("site {s} listed twice")));
        }
        occupied[s] = true;
    }
    for &s in sites {
        if let Some(&t) = lattice
            .exclusion_neighbors(s)
            .iter()
            .find(|&&t| occupied[t])
        {
            return Err(Error::UnrealizablePattern(format!(
                "sites {s} and {t} violate the exclusion constraint"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LatticeSpec;

    #[test]
    fn crystal_on_long_chain() {
        let chain = Lattice::new(LatticeSpec::chain(41)).unwrap();
        let sites = Pattern::Crystal1d.realize(&chain, Some(5)).unwrap();
        assert_eq!(sites, vec![16, 18, 20, 22, 24]);
        assert!(Pattern::Crystal1d.realize(&chain, None).is_err());
        assert!(Pattern::Crystal1d.realize(&chain, Some(22)).is_err());
    }

    #[test]
    fn block_crystal_three() {
        let sq = Lattice::new(LatticeSpec::square(6)).unwrap();
        let sites = Pattern::BlockCrystal(3).realize(&sq, Some(9)).unwrap();
        let mut want: Vec<usize> = [
            (0, 0),
            (0, 2),
            (0, 4),
            (2, 0),
            (2, 2),
            (2, 4),
            (4, 0),
            (4, 2),
            (4, 4),
        ]
        .iter()
        .map(|&(x, y)| sq.site(x, y))
        .collect();
        want.sort_unstable();
        assert_eq!(sites, want);
        assert!(Pattern::BlockCrystal(4).realize(&sq, None).is_err());
        assert!(Pattern::BlockCrystal(3).realize(&sq, Some(8)).is_err());
    }

    #[test]
    fn bottom_half_of_four() {
        let sq = Lattice::new(LatticeSpec::square(4)).unwrap();
        let sites = Pattern::BottomHalfPacked.realize(&sq, None).unwrap();
        assert_eq!(sites, vec![0, 2, 5, 7]);
    }

    #[test]
    fn explicit_sites_are_validated() {
        let sq = Lattice::new(LatticeSpec::square(3)).unwrap();
        assert!(Pattern::Sites(vec![0, 1]).realize(&sq, None).is_err());
        assert!(Pattern::Sites(vec![0, 0]).realize(&sq, None).is_err());
        assert!(Pattern::Sites(vec![9]).realize(&sq, None).is_err());
        assert_eq!(
            Pattern::Sites(vec![8, 0, 4]).realize(&sq, Some(3)).unwrap(),
            vec![0, 4, 8]
        );
    }

    #[test]
    fn names_round_trip() {
        for p in [
            Pattern::Crystal1d,
            Pattern::BottomHalfPacked,
            Pattern::BlockCrystal(3),
        ] {
            assert_eq!(p.to_string().parse::<Pattern>().unwrap(), p);
        }
        assert!("block-crystal(x)".parse::<Pattern>().is_err());
        assert!("zigzag".parse::<Pattern>().is_err());
    }
}
