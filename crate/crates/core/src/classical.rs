//! Classical random-walk counterpart of the hopping dynamics.
//!
//! One step picks a particle uniformly and an axis direction uniformly and
//! moves the particle if the target is on the lattice and the move keeps the
//! configuration valid. Rejected attempts still count as a step.
//!
//! Ensembles draw trajectory `k` from a ChaCha8 stream selected by `k` under
//! the run seed, and all averages are accumulated as integers, so results do
//! not depend on how trajectories are distributed over threads.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fit::{log_log_fit, LineFit};
use crate::patterns::{check_sites, Pattern};
use crate::statespace::Configuration;
use crate::{Error, Lattice, LatticeSpec, Result};

/// Trajectories handled by one work item; fixed so the partition does not
/// depend on the thread count.
const CHUNK: u64 = 64;

/// Identifies the move kernel and stream layout; changes whenever a fixed
/// seed would produce different walks.
pub const KERNEL_VERSION: &str = "uniform-particle-direction/chacha8-stream/1";

/// Occupations of a walk, as a particle list plus a site lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkState {
    positions: Vec<usize>,
    occupied: Vec<bool>,
}

impl WalkState {
    pub fn new(lattice: &Lattice, sites: &[usize]) -> Result<Self> {
        check_sites(lattice, sites)?;
        let mut occupied = vec![false; lattice.n_sites()];
        for &s in sites {
            occupied[s] = true;
        }
        Ok(WalkState {
            positions: sites.to_vec(),
            occupied,
        })
    }

    pub fn from_config(lattice: &Lattice, config: Configuration) -> Result<Self> {
        Self::new(lattice, &config.sites().collect::<Vec<_>>())
    }

    pub fn to_config(&self) -> Result<Configuration> {
        Configuration::from_sites(self.sites())
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        self.occupied[site]
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    /// Occupied sites, ascending.
    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| i)
    }

    /// Attempts to move particle `p` one step along direction `dir`
    /// (an index into `lattice.directions()`); returns whether it moved.
    pub fn try_move(&mut self, lattice: &Lattice, p: usize, dir: usize) -> bool {
        let from = self.positions[p];
        let Some(to) = lattice.step(from, lattice.directions()[dir]) else {
            return false;
        };
        if self.occupied[to]
            || lattice
                .exclusion_neighbors(to)
                .iter()
                .any(|&j| j != from && self.occupied[j])
        {
            return false;
        }
        self.occupied[from] = false;
        self.occupied[to] = true;
        self.positions[p] = to;
        true
    }
}

/// One attempted move with a uniformly drawn particle and direction.
pub fn rw_step<R: Rng + ?Sized>(state: &mut WalkState, lattice: &Lattice, rng: &mut R) -> bool {
    if state.m() == 0 {
        return false;
    }
    let p = rng.random_range(0..state.m());
    let dir = rng.random_range(0..lattice.directions().len());
    state.try_move(lattice, p, dir)
}

/// Conversion from step counts to hopping time `Jt`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum TimeMap {
    /// `Jt = 2 pi n / M`: one unit of `2 pi` per attempted move of every particle.
    #[default]
    PerParticle,
    /// `Jt = scale * n`.
    Linear(f64),
}

impl TimeMap {
    pub fn describe(&self) -> String {
        match self {
            TimeMap::PerParticle => "Jt = 2*pi*n_steps/M".into(),
            TimeMap::Linear(s) => format!("Jt = {s}*n_steps"),
        }
    }

    pub fn time(&self, n_steps: u64, m: usize) -> Result<f64> {
        match *self {
            TimeMap::PerParticle => time_map(n_steps, m),
            TimeMap::Linear(s) => Ok(s * n_steps as f64),
        }
    }

    /// Step count whose mapped time is nearest to `jt`.
    pub fn steps_for(&self, jt: f64, m: usize) -> Result<u64> {
        if jt.is_nan() || jt < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {jt}")));
        }
        let per_step = self.time(1, m)?;
        if per_step <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time map {} does not advance",
                self.describe()
            )));
        }
        Ok((jt / per_step).round() as u64)
    }
}

/// `Jt = 2 pi n_steps / M`.
pub fn time_map(n_steps: u64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "the time map needs at least one particle".into(),
        ));
    }
    Ok(TAU * n_steps as f64 / m as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkSchedule {
    pub n_traj: u64,
    /// Strictly ascending.
    pub record_steps: Vec<u64>,
    pub seed: u64,
    pub time_map: TimeMap,
    /// Inclusive step range whose records are also averaged per trajectory,
    /// giving a plateau estimate with an exact standard error.
    pub average_window: Option<(u64, u64)>,
}

impl WalkSchedule {
    pub fn new(n_traj: u64, record_steps: Vec<u64>, seed: u64) -> Result<Self> {
        let s = WalkSchedule {
            n_traj,
            record_steps,
            seed,
            time_map: TimeMap::default(),
            average_window: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Records at the step counts nearest to the given times; times that round
    /// to the same step count are merged.
    pub fn from_times(
        n_traj: u64,
        times: &[f64],
        m: usize,
        seed: u64,
        time_map: TimeMap,
    ) -> Result<Self> {
        let mut steps = times
            .iter()
            .map(|&t| time_map.steps_for(t, m))
            .collect::<Result<Vec<_>>>()?;
        steps.sort_unstable();
        steps.dedup();
        let s = WalkSchedule {
            n_traj,
            record_steps: steps,
            seed,
            time_map,
            average_window: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_time_map(mut self, time_map: TimeMap) -> Self {
        self.time_map = time_map;
        self
    }

    pub fn with_average_window(mut self, lo: u64, hi: u64) -> Result<Self> {
        self.average_window = Some((lo, hi));
        self.validate()?;
        Ok(self)
    }

    fn in_window(&self, step: u64) -> bool {
        self.average_window
            .is_some_and(|(lo, hi)| (lo..=hi).contains(&step))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidArgument(
                "need at least one trajectory".into(),
            ));
        }
        if self.record_steps.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one record step".into(),
            ));
        }
        if self.record_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "record steps must be strictly ascending".into(),
            ));
        }
        if self.average_window.is_some() && !self.record_steps.iter().any(|&n| self.in_window(n)) {
            return Err(Error::InvalidArgument(
                "the averaging window contains no record step".into(),
            ));
        }
        Ok(())
    }
}

/// The random stream of one trajectory.
pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRecord {
    pub n_steps: u64,
    /// Mapped `Jt`.
    pub time: f64,
    pub occupations: Vec<f64>,
    pub g: f64,
    /// Standard error of `g` over trajectories.
    pub g_stderr: f64,
}

/// `G` averaged over the records of the schedule's averaging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowAverage {
    pub n_records: usize,
    pub g: f64,
    /// Standard error over trajectories of the per-trajectory window mean.
    pub g_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub seed: u64,
    pub n_traj: u64,
    pub m: usize,
    pub n_sites: usize,
    pub records: Vec<EnsembleRecord>,
    pub window: Option<WindowAverage>,
}

impl EnsembleResult {
    pub fn eta(&self) -> f64 {
        self.m as f64 / self.n_sites as f64
    }

    pub fn last(&self) -> &EnsembleRecord {
        self.records
            .last()
            .expect("schedules have at least one record")
    }
}

#[derive(Clone)]
struct Tally {
    /// `records x sites` occupation counts.
    counts: Vec<u64>,
    /// Per record: sums of the overlap `sum_i s_i (2 n_i - 1)` and its square.
    overlap: Vec<i64>,
    overlap_sq: Vec<u128>,
    /// Per-trajectory overlap summed over the window records: sum and sum of squares.
    window: i64,
    window_sq: u128,
}

impl Tally {
    fn zero(n_records: usize, n_sites: usize) -> Self {
        Tally {
            counts: vec![0; n_records * n_sites],
            overlap: vec![0; n_records],
            overlap_sq: vec![0; n_records],
            window: 0,
            window_sq: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.overlap.iter_mut().zip(&other.overlap) {
            *a += b;
        }
        for (a, b) in self.overlap_sq.iter_mut().zip(&other.overlap_sq) {
            *a += b;
        }
        self.window += other.window;
        self.window_sq += other.window_sq;
        self
    }
}

/// Runs `schedule.n_traj` walks from `initial` and averages occupations and
/// the autocorrelation against the initial pattern at every record.
pub fn simulate_ensemble(
    lattice: &Lattice,
    initial: &[usize],
    schedule: &WalkSchedule,
) -> Result<EnsembleResult> {
    schedule.validate()?;
    let start = WalkState::new(lattice, initial)?;
    let n_sites = lattice.n_sites();
    let n_rec = schedule.record_steps.len();
    let m = start.m();
    // Validates the particle count against the time map.
    let times = schedule
        .record_steps
        .iter()
        .map(|&n| schedule.time_map.time(n, m))
        .collect::<Result<Vec<_>>>()?;
    let sign: Vec<i64> = start
        .occupied()
        .iter()
        .map(|&o| if o { 1 } else { -1 })
        .collect();

    let n_chunks = schedule.n_traj.div_ceil(CHUNK);
    let tally = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::zero(n_rec, n_sites);
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(schedule.n_traj);
            for k in lo..hi {
                let mut rng = trajectory_rng(schedule.seed, k);
                let mut state = start.clone();
                let mut done = 0u64;
                let mut window = 0i64;
                for (r, &target) in schedule.record_steps.iter().enumerate() {
                    while done < target {
                        rw_step(&mut state, lattice, &mut rng);
                        done += 1;
                    }
                    let row = &mut tally.counts[r * n_sites..(r + 1) * n_sites];
                    let mut overlap = 0i64;
                    for (i, &o) in state.occupied().iter().enumerate() {
                        if o {
                            row[i] += 1;
                        }
                        overlap += sign[i] * if o { 1 } else { -1 };
                    }
                    tally.overlap[r] += overlap;
                    tally.overlap_sq[r] += (overlap * overlap) as u128;
                    if schedule.in_window(target) {
                        window += overlap;
                    }
                }
                tally.window += window;
                tally.window_sq += (window as i128 * window as i128) as u128;
            }
            tally
        })
        .reduce(|| Tally::zero(n_rec, n_sites), Tally::merge);

    let n = schedule.n_traj as f64;
    let eta = m as f64 / n_sites as f64;
    let g_star = (2.0 * eta - 1.0).powi(2);
    let stderr = |sum: f64, sum_sq: f64| {
        if schedule.n_traj < 2 {
            return 0.0;
        }
        let mean = sum / n;
        (((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) / n).sqrt()
    };
    let records = (0..n_rec)
        .map(|r| {
            let occupations = tally.counts[r * n_sites..(r + 1) * n_sites]
                .iter()
                .map(|&c| c as f64 / n)
                .collect();
            let mean = tally.overlap[r] as f64 / n;
            EnsembleRecord {
                n_steps: schedule.record_steps[r],
                time: times[r],
                occupations,
                g: mean / n_sites as f64 - g_star,
                g_stderr: stderr(tally.overlap[r] as f64, tally.overlap_sq[r] as f64)
                    / n_sites as f64,
            }
        })
        .collect();
    let window = schedule.average_window.map(|_| {
        let k = schedule
            .record_steps
            .iter()
            .filter(|&&s| schedule.in_window(s))
            .count();
        let scale = (k * n_sites) as f64;
        WindowAverage {
            n_records: k,
            g: tally.window as f64 / n / scale - g_star,
            g_stderr: stderr(tally.window as f64, tally.window_sq as f64) / scale,
        }
    });
    Ok(EnsembleResult {
        seed: schedule.seed,
        n_traj: schedule.n_traj,
        m,
        n_sites,
        records,
        window,
    })
}

/// `delta_eta = (1/N) sum_i |<n_i> - eta|`.
pub fn delta_eta(occ: &[f64], eta: f64) -> f64 {
    if occ.is_empty() {
        return 0.0;
    }
    occ.iter().map(|n| (n - eta).abs()).sum::<f64>() / occ.len() as f64
}

/// First-order standard error of [`delta_eta`] for ensemble-averaged
/// occupations, treating sites as independent Bernoulli means.
pub fn delta_eta_stderr(occ: &[f64], n_traj: u64) -> f64 {
    if occ.is_empty() || n_traj == 0 {
        return 0.0;
    }
    let var: f64 = occ.iter().map(|p| p * (1.0 - p)).sum::<f64>() / n_traj as f64;
    var.sqrt() / occ.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub l: usize,
    pub m: usize,
    pub eta: f64,
    pub n_steps: u64,
    pub delta_eta: f64,
    pub delta_eta_stderr: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingScan {
    pub rows: Vec<ScalingRow>,
    /// Fit of `log delta_eta` against `log L`; `None` below two sizes.
    pub fit: Option<LineFit>,
}

/// How long each size of a finite-size scan is run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Fixed(u64),
    /// `sweeps * M * L^2` attempted moves, i.e. diffusive time in lattice units.
    DiffusiveSweeps(f64),
}

impl StepRule {
    pub fn steps(&self, l: usize, m: usize) -> u64 {
        match *self {
            StepRule::Fixed(n) => n,
            StepRule::DiffusiveSweeps(s) => (s * (m * l * l) as f64).ceil() as u64,
        }
    }
}

/// Long-time `delta_eta` on square lattices of the given sizes, each started
/// from `pattern`. Size `L` uses the stream seed `seed + L` so sizes are
/// independent but reproducible.
pub fn finite_size_scan(
    ls: &[usize],
    pattern: &Pattern,
    rule: StepRule,
    n_traj: u64,
    seed: u64,
) -> Result<ScalingScan> {
    let mut rows = Vec::with_capacity(ls.len());
    for &l in ls {
        let lattice = Lattice::new(LatticeSpec::square(l))?;
        let initial = pattern.realize(&lattice, None)?;
        let m = initial.len();
        let n_steps = rule.steps(l, m);
        let schedule = WalkSchedule::new(n_traj, vec![n_steps], seed.wrapping_add(l as u64))?;
        let res = simulate_ensemble(&lattice, &initial, &schedule)?;
        let occ = &res.last().occupations;
        rows.push(ScalingRow {
            l,
            m,
            eta: res.eta(),
            n_steps,
            delta_eta: delta_eta(occ, res.eta()),
            delta_eta_stderr: delta_eta_stderr(occ, n_traj),
        });
    }
    let fit = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.l as f64).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.delta_eta).collect();
        log_log_fit(&x, &y)
    } else {
        None
    };
    Ok(ScalingScan { rows, fit })
}
