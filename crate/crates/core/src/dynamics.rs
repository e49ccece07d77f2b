//! Real-time evolution from a basis configuration.
//!
//! `exp(-i H dt) psi` is approximated in the Krylov space
//! `span{psi, H psi, ..., H^(m-1) psi}` built by Lanczos with full
//! reorthogonalization. The local error estimate is the 2-norm difference
//! between the order-`m` and order-`(m-1)` approximants. The step size doubles
//! after each accepted full step and halves on rejection; the Krylov basis does
//! not depend on `dt`, so a retry only re-exponentiates the tridiagonal matrix.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::fit::{log_log_fit, LineFit};
use crate::hamiltonian::{build_hamiltonian, SparseHamiltonian};
use crate::statespace::{
    enumerate_sector, fragment_decomposition, Configuration, Fragment, DEFAULT_MEMORY_CAP,
};
use crate::{Error, Lattice, LatticeSpec, Result};

/// Krylov dimension used throughout unless overridden.
pub const DEFAULT_KRYLOV_DIM: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    /// In units of `1/J`.
    pub time: f64,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a.norm_sqr())
    }
}

/// Unit vector on `config` at time zero.
pub fn basis_state(h: &SparseHamiltonian, config: Configuration) -> Result<StateVector> {
    let k = h
        .basis()
        .index_of(config)
        .ok_or_else(|| Error::NotInBasis(config.to_string()))?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); h.dim()];
    amplitudes[k] = Complex64::new(1.0, 0.0);
    Ok(StateVector {
        amplitudes,
        time: 0.0,
    })
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One classical Gram-Schmidt sweep of `w` against `basis`; returns the new
/// norm of `w`.
fn reorthogonalize(basis: &[Vec<Complex64>], w: &mut [Complex64]) -> f64 {
    let proj: Vec<Complex64> = basis.iter().map(|v| dot(v, w)).collect();
    for (p, v) in proj.iter().zip(basis) {
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= p * vi;
        }
    }
    norm(w)
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a symmetric tridiagonal matrix, stored as the
/// eigenvalues and the first row of the eigenvector matrix.
#[derive(Clone, Debug)]
struct TridiagEigen {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

impl TridiagEigen {
    fn new(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        let k = alpha.len();
        let t = Mat::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let evd = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(TridiagEigen {
            values: evd.S().column_vector().iter().copied().collect(),
            vectors: evd.U().to_owned(),
        })
    }

    /// `exp(-i T dt) e_1`, padded with zeros to `len`.
    fn propagate_e1(&self, dt: f64, len: usize) -> Vec<Complex64> {
        let k = self.values.len();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for l in 0..k {
            let phase = Complex64::from_polar(self.vectors[(0, l)], -self.values[l] * dt);
            for (j, o) in out.iter_mut().enumerate().take(k) {
                *o += phase * self.vectors[(j, l)];
            }
        }
        out
    }
}

/// Lanczos basis of one state, reusable for any step size.
#[derive(Clone, Debug)]
pub struct KrylovBasis {
    vectors: Vec<Vec<Complex64>>,
    start_norm: f64,
    full: TridiagEigen,
    reduced: Option<TridiagEigen>,
    /// The Krylov space is invariant under `H`; propagation is exact.
    invariant: bool,
}

impl KrylovBasis {
    pub fn build(h: &SparseHamiltonian, psi: &[Complex64], m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "Krylov dimension must be at least 2, got {m}"
            )));
        }
        let dim = h.dim();
        if psi.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.len(),
            });
        }
        let start_norm = norm(psi);
        if start_norm == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot propagate the zero vector".into(),
            ));
        }
        let k_max = m.min(dim);
        let breakdown = 1e-12 * h.norm_bound().max(1.0);

        let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(k_max);
        vectors.push(psi.iter().map(|a| a / start_norm).collect());
        let mut alpha = Vec::with_capacity(k_max);
        let mut beta = Vec::with_capacity(k_max);
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut invariant = k_max == dim;
        loop {
            let j = vectors.len() - 1;
            h.apply_into(&vectors[j], &mut w)?;
            let a = dot(&vectors[j], &w).re;
            alpha.push(a);
            let b_prev = if j > 0 { beta[j - 1] } else { 0.0 };
            let w_norm = if j > 0 {
                let (vj, vp) = (&vectors[j], &vectors[j - 1]);
                for ((wi, x), y) in w.iter_mut().zip(vj).zip(vp) {
                    *wi -= x * a + y * b_prev;
                }
                norm(&w)
            } else {
                for (wi, x) in w.iter_mut().zip(&vectors[j]) {
                    *wi -= x * a;
                }
                norm(&w)
            };
            // Reorthogonalize against the whole basis; repeat once if the
            // sweep removed most of the vector.
            let mut b = reorthogonalize(&vectors, &mut w);
            if b < FRAC_1_SQRT_2 * w_norm {
                b = reorthogonalize(&vectors, &mut w);
            }
            if vectors.len() == k_max {
                break;
            }
            if b <= breakdown {
                invariant = true;
                break;
            }
            beta.push(b);
            let inv = 1.0 / b;
            vectors.push(w.iter().map(|x| x * inv).collect());
        }

        let k = alpha.len();
        let full = TridiagEigen::new(&alpha, &beta[..k - 1])?;
        let reduced = if invariant || k < 2 {
            None
        } else {
            Some(TridiagEigen::new(&alpha[..k - 1], &beta[..k - 2])?)
        };
        Ok(KrylovBasis {
            vectors,
            start_norm,
            full,
            reduced,
            invariant,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    /// Krylov coefficients of `exp(-i H dt) psi` and the local error estimate.
    fn coefficients(&self, dt: f64) -> (Vec<Complex64>, f64) {
        let k = self.dim();
        let c = self.full.propagate_e1(dt, k);
        let err = match &self.reduced {
            Some(red) => {
                let c_red = red.propagate_e1(dt, k);
                self.start_norm
                    * norm(&c.iter().zip(&c_red).map(|(a, b)| a - b).collect::<Vec<_>>())
            }
            None => 0.0,
        };
        (c, err)
    }

    /// Propagated and renormalized state plus the error estimate.
    pub fn propagate(&self, dt: f64) -> (Vec<Complex64>, f64) {
        let (c, err) = self.coefficients(dt);
        let dim = self.vectors[0].len();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (cj, v) in c.iter().zip(&self.vectors) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += cj * vi;
            }
        }
        let n = norm(&out);
        let scale = self.start_norm / n;
        for o in &mut out {
            *o *= scale;
        }
        (out, err)
    }
}

/// One Krylov step of size `dt`; returns the new state and the error estimate.
pub fn krylov_step(
    h: &SparseHamiltonian,
    psi: &StateVector,
    dt: f64,
    m: usize,
) -> Result<(StateVector, f64)> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let basis = KrylovBasis::build(h, &psi.amplitudes, m)?;
    let (amplitudes, err) = basis.propagate(dt);
    Ok((
        StateVector {
            amplitudes,
            time: psi.time + dt,
        },
        err,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Largest accepted local error estimate per step.
    pub tol: f64,
    pub krylov_dim: usize,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tol: 1e-8,
            krylov_dim: DEFAULT_KRYLOV_DIM,
            dt_initial: 0.1,
            dt_min: 1e-6,
            dt_max: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub smallest_dt: f64,
    pub largest_dt: f64,
}

/// Evolves `psi0` and hands the state to `record` at every grid time.
///
/// Grid times are hit exactly: the last sub-step before a grid point is
/// trimmed, and trimmed steps neither grow nor shrink the running step size.
///
/// When the hop graph is bipartite and `psi0` is real up to the sublattice
/// phases `diag(1, i)` (as every basis state is), the evolution runs on real
/// vectors: `exp(-i H t) = D exp(K t) D^-1` with `K = -i D^-1 H D` real and
/// antisymmetric. Its Lanczos recurrence spans the same Krylov space with a
/// zero diagonal, so steps, error estimates and acceptance match the complex
/// path at half the memory traffic.
pub fn evolve_with(
    h: &SparseHamiltonian,
    psi0: &StateVector,
    t_grid: &[f64],
    opts: &EvolveOptions,
    mut record: impl FnMut(&StateVector) -> Result<()>,
) -> Result<StepStats> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be ascending".into()));
    }
    if let Some(&t0) = t_grid.first() {
        if t0 < psi0.time {
            return Err(Error::InvalidArgument(format!(
                "time grid starts at {t0}, before the initial state at {}",
                psi0.time
            )));
        }
    }
    if !(opts.dt_min > 0.0 && opts.dt_min <= opts.dt_initial && opts.dt_initial <= opts.dt_max) {
        return Err(Error::InvalidArgument(
            "step bounds must satisfy 0 < dt_min <= dt_initial <= dt_max".into(),
        ));
    }
    if psi0.amplitudes.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.amplitudes.len(),
        });
    }
    if let Some(real) = h
        .two_coloring()
        .and_then(|odd| RealForm::new(odd, &psi0.amplitudes))
    {
        let mut stepper = SkewStepper {
            h,
            signs: real
                .odd
                .iter()
                .map(|&o| if o { -1.0 } else { 1.0 })
                .collect(),
            m: opts.krylov_dim,
            basis: None,
        };
        let w0 = real.w0.clone();
        drive(&mut stepper, w0, psi0.time, t_grid, opts, |w, time| {
            record(&StateVector {
                amplitudes: real.to_complex(w),
                time,
            })
        })
    } else {
        let mut stepper = ComplexStepper {
            h,
            m: opts.krylov_dim,
            basis: None,
        };
        drive(
            &mut stepper,
            psi0.amplitudes.clone(),
            psi0.time,
            t_grid,
            opts,
            |amplitudes, time| {
                record(&StateVector {
                    amplitudes: amplitudes.to_vec(),
                    time,
                })
            },
        )
    }
}

/// A state written as `phase * D w` with `D = diag(1 on even, i on odd)` and
/// `w` real.
struct RealForm {
    odd: Vec<bool>,
    phase: Complex64,
    w0: Vec<f64>,
}

impl RealForm {
    fn new(odd: Vec<bool>, psi: &[Complex64]) -> Option<Self> {
        let (k, pivot) = psi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))?;
        let scale = pivot.norm();
        if scale == 0.0 {
            return None;
        }
        let d = |o: bool| {
            if o {
                Complex64::i()
            } else {
                Complex64::new(1.0, 0.0)
            }
        };
        let phase = pivot / (scale * d(odd[k]));
        let tol = 1e-14 * scale;
        let mut w0 = Vec::with_capacity(psi.len());
        for (a, &o) in psi.iter().zip(&odd) {
            let x = a / (phase * d(o));
            if x.im.abs() > tol {
                return None;
            }
            w0.push(x.re);
        }
        Some(RealForm { odd, phase, w0 })
    }

    fn to_complex(&self, w: &[f64]) -> Vec<Complex64> {
        let odd_phase = self.phase * Complex64::i();
        w.iter()
            .zip(&self.odd)
            .map(|(&x, &o)| if o { odd_phase * x } else { self.phase * x })
            .collect()
    }
}

/// One Krylov construction per accepted step, reused across retries.
trait Stepper {
    type Vector;
    fn rebuild(&mut self, v: &Self::Vector) -> Result<()>;
    fn propagate(&self, dt: f64) -> (Self::Vector, f64);
}

struct ComplexStepper<'a> {
    h: &'a SparseHamiltonian,
    m: usize,
    basis: Option<KrylovBasis>,
}

impl Stepper for ComplexStepper<'_> {
    type Vector = Vec<Complex64>;

    fn rebuild(&mut self, v: &Self::Vector) -> Result<()> {
        self.basis = Some(KrylovBasis::build(self.h, v, self.m)?);
        Ok(())
    }

    fn propagate(&self, dt: f64) -> (Self::Vector, f64) {
        self.basis
            .as_ref()
            .expect("rebuild precedes propagate")
            .propagate(dt)
    }
}

struct SkewStepper<'a> {
    h: &'a SparseHamiltonian,
    /// `+1` on even rows, `-1` on odd rows.
    signs: Vec<f64>,
    m: usize,
    basis: Option<SkewKrylovBasis>,
}

impl Stepper for SkewStepper<'_> {
    type Vector = Vec<f64>;

    fn rebuild(&mut self, v: &Self::Vector) -> Result<()> {
        let storage = self.basis.take().map(|b| b.vectors).unwrap_or_default();
        self.basis = Some(SkewKrylovBasis::build(
            self.h,
            &self.signs,
            v,
            self.m,
            storage,
        )?);
        Ok(())
    }

    fn propagate(&self, dt: f64) -> (Self::Vector, f64) {
        self.basis
            .as_ref()
            .expect("rebuild precedes propagate")
            .propagate(dt)
    }
}

/// Lanczos basis of a real vector under the antisymmetric `K`. The
/// recurrence is `beta_j u_(j+1) = K u_j + beta_(j-1) u_(j-1)`, and the
/// tridiagonal matrix it represents (of `i K`) has a zero diagonal.
struct SkewKrylovBasis {
    vectors: Vec<Vec<f64>>,
    len: usize,
    start_norm: f64,
    full: TridiagEigen,
    reduced: Option<TridiagEigen>,
}

impl SkewKrylovBasis {
    fn build(
        h: &SparseHamiltonian,
        signs: &[f64],
        w: &[f64],
        m: usize,
        mut vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "Krylov dimension must be at least 2, got {m}"
            )));
        }
        let dim = h.dim();
        let start_norm = norm_real(w);
        if start_norm == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot propagate the zero vector".into(),
            ));
        }
        let k_max = m.min(dim);
        let breakdown = 1e-12 * h.norm_bound().max(1.0);
        vectors.resize_with(k_max, Vec::new);
        for v in &mut vectors {
            v.resize(dim, 0.0);
        }
        let inv = 1.0 / start_norm;
        for (u, &x) in vectors[0].iter_mut().zip(w) {
            *u = x * inv;
        }

        let mut beta: Vec<f64> = Vec::with_capacity(k_max);
        let mut len = 1;
        let mut invariant = k_max == dim;
        // The slot after the basis holds the residual.
        while len < k_max {
            let j = len - 1;
            let (done, rest) = vectors.split_at_mut(len);
            let r = &mut rest[0];
            h.apply_into(&done[j], r)?;
            if j > 0 {
                let b_prev = beta[j - 1];
                for ((ri, s), p) in r.iter_mut().zip(signs).zip(&done[j - 1]) {
                    *ri = *ri * s + b_prev * p;
                }
            } else {
                for (ri, s) in r.iter_mut().zip(signs) {
                    *ri *= s;
                }
            }
            let r_norm = norm_real(r);
            let mut b = reorthogonalize_real(done, r);
            if b < FRAC_1_SQRT_2 * r_norm {
                b = reorthogonalize_real(done, r);
            }
            if b <= breakdown {
                invariant = true;
                break;
            }
            let inv = 1.0 / b;
            for x in r.iter_mut() {
                *x *= inv;
            }
            beta.push(b);
            len += 1;
        }

        let alpha = vec![0.0; len];
        let full = TridiagEigen::new(&alpha, &beta[..len - 1])?;
        let reduced = if invariant || len < 2 {
            None
        } else {
            Some(TridiagEigen::new(&alpha[..len - 1], &beta[..len - 2])?)
        };
        Ok(SkewKrylovBasis {
            vectors,
            len,
            start_norm,
            full,
            reduced,
        })
    }

    fn propagate(&self, dt: f64) -> (Vec<f64>, f64) {
        let k = self.len;
        let c = self.full.propagate_e1(dt, k);
        let err = match &self.reduced {
            Some(red) => {
                let c_red = red.propagate_e1(dt, k);
                self.start_norm
                    * c.iter()
                        .zip(&c_red)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
            }
            None => 0.0,
        };
        // `c_j i^j` is real for a zero-diagonal tridiagonal generator.
        let mut i_pow = Complex64::new(1.0, 0.0);
        let coeffs: Vec<f64> = c
            .iter()
            .map(|cj| {
                let x = (cj * i_pow).re;
                i_pow *= Complex64::i();
                x
            })
            .collect();
        let dim = self.vectors[0].len();
        let mut out = vec![0.0; dim];
        for (cj, v) in coeffs.iter().zip(&self.vectors[..k]) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += cj * vi;
            }
        }
        let scale = self.start_norm / norm_real(&out);
        for o in &mut out {
            *o *= scale;
        }
        (out, err)
    }
}

fn norm_real(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn reorthogonalize_real(basis: &[Vec<f64>], w: &mut [f64]) -> f64 {
    let proj: Vec<f64> = basis
        .iter()
        .map(|v| v.iter().zip(w.iter()).map(|(a, b)| a * b).sum())
        .collect();
    for (p, v) in proj.iter().zip(basis) {
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= p * vi;
        }
    }
    norm_real(w)
}

/// Adaptive step control shared by the complex and real paths.
fn drive<S: Stepper>(
    stepper: &mut S,
    mut state: S::Vector,
    t_start: f64,
    t_grid: &[f64],
    opts: &EvolveOptions,
    mut record: impl FnMut(&S::Vector, f64) -> Result<()>,
) -> Result<StepStats> {
    let mut stats = StepStats {
        smallest_dt: f64::INFINITY,
        ..StepStats::default()
    };
    let mut time = t_start;
    let mut dt = opts.dt_initial;
    for &target in t_grid {
        // Float slack when accumulating many sub-steps.
        let eps = 1e-12 * target.abs().max(1.0);
        while time < target - eps {
            stepper.rebuild(&state)?;
            loop {
                let remaining = target - time;
                let trimmed = remaining < dt;
                let step = if trimmed { remaining } else { dt };
                let (next, err) = stepper.propagate(step);
                if err <= opts.tol {
                    state = next;
                    time = if trimmed { target } else { time + step };
                    stats.accepted += 1;
                    stats.smallest_dt = stats.smallest_dt.min(step);
                    stats.largest_dt = stats.largest_dt.max(step);
                    if !trimmed {
                        dt = (2.0 * dt).min(opts.dt_max);
                    }
                    break;
                }
                stats.rejected += 1;
                if step <= opts.dt_min {
                    return Err(Error::NonConvergence {
                        time,
                        dt: step,
                        estimate: err,
                        tol: opts.tol,
                    });
                }
                dt = (step / 2.0).max(opts.dt_min);
            }
        }
        time = target;
        record(&state, time)?;
    }
    if stats.accepted == 0 {
        stats.smallest_dt = 0.0;
    }
    Ok(stats)
}

/// Time series of observables recorded on a grid.
#[derive(Clone, Debug, Default)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    /// `occupations[t][i] = <n_i(t)>`.
    pub occupations: Vec<Vec<f64>>,
    /// Memory of the initial pattern, `G(t)`.
    pub g: Vec<f64>,
    pub norm: Vec<f64>,
    pub energy: Vec<f64>,
    pub stats: StepStats,
}

/// Evolves and records `<n_i>`, `G`, the norm and `<H>` at each grid time.
///
/// `G` is measured against the configuration carrying the largest weight in
/// `psi0`, which for a basis-state start is the initial configuration itself.
pub fn adaptive_evolve(
    h: &SparseHamiltonian,
    psi0: &StateVector,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<ObservableSeries> {
    let basis = h.basis();
    let reference = psi0
        .amplitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(k, _)| basis.configs[k])
        .ok_or_else(|| Error::InvalidArgument("empty state".into()))?;
    let eta = basis.eta();

    let mut series = ObservableSeries::default();
    let mut hpsi = vec![Complex64::new(0.0, 0.0); h.dim()];
    let stats = evolve_with(h, psi0, t_grid, opts, |psi| {
        let occ = occupations(&psi.amplitudes, &basis.configs, basis.n_sites);
        series.g.push(autocorrelation(&occ, reference, eta));
        series.occupations.push(occ);
        series.times.push(psi.time);
        series.norm.push(psi.norm());
        h.apply_into(&psi.amplitudes, &mut hpsi)?;
        series.energy.push(dot(&psi.amplitudes, &hpsi).re);
        Ok(())
    })?;
    series.stats = stats;
    Ok(series)
}

/// `<n_i> = sum_c |psi_c|^2 n_i(c)`.
pub fn occupations(
    amplitudes: &[Complex64],
    configs: &[Configuration],
    n_sites: usize,
) -> Vec<f64> {
    let mut occ = vec![0.0; n_sites];
    for (a, c) in amplitudes.iter().zip(configs) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for s in c.sites() {
            occ[s] += p;
        }
    }
    occ
}

/// `G = (1/N) sum_i (2<n_i> - 1)(2 n_i(0) - 1) - (2 eta - 1)^2`.
///
/// For a basis-state start `(2 n_i(0) - 1)` acts on the initial state as the
/// sign `s_i`, so only the current occupations are needed.
pub fn autocorrelation(occ: &[f64], initial: Configuration, eta: f64) -> f64 {
    let overlap: f64 = occ
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let s = if initial.is_occupied(i) { 1.0 } else { -1.0 };
            (2.0 * n - 1.0) * s
        })
        .sum();
    overlap / occ.len() as f64 - (2.0 * eta - 1.0).powi(2)
}

/// RMS radius `sqrt(sum_i (x_i - xbar)^2 <n_i> / M)` of a chain profile
/// about its centre of mass.
pub fn rms_radius(occ: &[f64]) -> f64 {
    let mass: f64 = occ.iter().sum();
    if mass == 0.0 {
        return 0.0;
    }
    let center = occ
        .iter()
        .enumerate()
        .map(|(x, n)| x as f64 * n)
        .sum::<f64>()
        / mass;
    let second = occ
        .iter()
        .enumerate()
        .map(|(x, n)| (x as f64 - center).powi(2) * n)
        .sum::<f64>();
    (second / mass).sqrt()
}

/// Sites of an `m`-particle crystal with the given spacing, centred on a chain.
pub fn centered_crystal(l: usize, m: usize, spacing: usize) -> Result<Vec<usize>> {
    if m == 0 || spacing == 0 {
        return Err(Error::UnrealizablePattern(
            "crystal needs at least one particle and a positive spacing".into(),
        ));
    }
    let span = spacing * (m - 1);
    if span >= l {
        return Err(Error::UnrealizablePattern(format!(
            "{m} particles at spacing {spacing} do not fit on {l} sites"
        )));
    }
    let start = (l - 1 - span) / 2;
    Ok((0..m).map(|k| start + k * spacing).collect())
}

/// Maximum hop velocity used to guard against boundary contact.
pub const GUARD_VELOCITY: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct MeltSetup {
    pub l: usize,
    pub m: usize,
    pub spacing: usize,
    /// Explicit initial sites replacing the centred crystal.
    pub sites: Option<Vec<usize>>,
    pub coupling: f64,
    pub times: Vec<f64>,
    /// `[t_lo, t_hi]` window of the log-log fit of `R(t)`.
    pub fit_window: (f64, f64),
    pub opts: EvolveOptions,
    pub memory_cap: usize,
}

impl Default for MeltSetup {
    fn default() -> Self {
        MeltSetup {
            l: 41,
            m: 5,
            spacing: 2,
            sites: None,
            coupling: 1.0,
            times: (0..=50).map(|k| k as f64 * 0.2).collect(),
            fit_window: (2.0, 10.0),
            opts: EvolveOptions::default(),
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeltOutcome {
    pub crystal: Vec<usize>,
    pub series: ObservableSeries,
    pub radius: Vec<f64>,
    /// Fit of `log R` against `log t` over the window; `None` with fewer than
    /// two positive grid times inside it.
    pub exponent: Option<LineFit>,
    /// Whether the crystal keeps `GUARD_VELOCITY * t_max` sites to each edge.
    pub guard_satisfied: bool,
    pub max_edge_occupation: f64,
    /// Edge occupation exceeded `1e-3` at some recorded time.
    pub boundary_contact: bool,
}

/// Quantum melting of a crystal on an open chain.
pub fn melt1d_experiment(setup: &MeltSetup) -> Result<MeltOutcome> {
    let lattice = Lattice::new(LatticeSpec::chain(setup.l))?;
    let crystal = match &setup.sites {
        Some(sites) => {
            let mut sites = sites.clone();
            sites.sort_unstable();
            sites
        }
        None => centered_crystal(setup.l, setup.m, setup.spacing)?,
    };
    if crystal.len() != setup.m {
        return Err(Error::UnrealizablePattern(format!(
            "crystal has {} particles, expected {}",
            crystal.len(),
            setup.m
        )));
    }
    let t_max = setup.times.last().copied().unwrap_or(0.0);
    let margin = crystal[0].min(setup.l - 1 - crystal[crystal.len() - 1]);
    let guard_satisfied = margin as f64 >= GUARD_VELOCITY * t_max;

    let run = evolve_pattern(
        &lattice,
        &crystal,
        setup.coupling,
        &setup.times,
        &setup.opts,
        setup.memory_cap,
    )?;
    let series = run.series;
    let radius: Vec<f64> = series.occupations.iter().map(|o| rms_radius(o)).collect();
    let exponent = window_fit(&series.times, &radius, setup.fit_window);
    let max_edge_occupation = series
        .occupations
        .iter()
        .map(|o| o[0].max(o[setup.l - 1]))
        .fold(0.0, f64::max);
    Ok(MeltOutcome {
        crystal,
        series,
        radius,
        exponent,
        guard_satisfied,
        max_edge_occupation,
        boundary_contact: max_edge_occupation > 1e-3,
    })
}

/// Evolution of a basis configuration inside its fragment.
#[derive(Clone, Debug)]
pub struct PatternEvolution {
    pub initial: Configuration,
    pub sector_size: usize,
    pub n_fragments: usize,
    pub fragment: Fragment,
    pub norm_bound: f64,
    pub series: ObservableSeries,
}

/// Evolves the configuration `sites` on `lattice`. The dynamics never leaves
/// the fragment of the initial state, so only that fragment is built.
pub fn evolve_pattern(
    lattice: &Lattice,
    sites: &[usize],
    coupling: f64,
    times: &[f64],
    opts: &EvolveOptions,
    memory_cap: usize,
) -> Result<PatternEvolution> {
    let initial = Configuration::from_sites(sites.iter().copied())?;
    if !crate::statespace::is_valid(initial, lattice) {
        return Err(Error::UnrealizablePattern(format!(
            "configuration {initial} violates the exclusion constraint"
        )));
    }
    let basis = enumerate_sector(lattice, initial.count(), memory_cap)?;
    let dec = fragment_decomposition(&basis);
    let ordinal = basis
        .index_of(initial)
        .ok_or_else(|| Error::NotInBasis(initial.to_string()))?;
    let fragment = dec.get(dec.label(ordinal))?;
    let h = build_hamiltonian(&basis, Some((&dec, fragment.id)), coupling)?;
    let psi0 = basis_state(&h, initial)?;
    let series = adaptive_evolve(&h, &psi0, times, opts)?;
    Ok(PatternEvolution {
        initial,
        sector_size: basis.len(),
        n_fragments: dec.n_fragments(),
        fragment,
        norm_bound: h.norm_bound(),
        series,
    })
}

/// Log-log fit of `values` against `times` restricted to `[lo, hi]`.
pub fn window_fit(times: &[f64], values: &[f64], (lo, hi): (f64, f64)) -> Option<LineFit> {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > 0.0 && v > 0.0 && t >= lo - 1e-12 && t <= hi + 1e-12)
        .map(|(&t, &v)| (t, v))
        .unzip();
    log_log_fit(&t, &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_h() -> SparseHamiltonian {
        let chain = Lattice::new(LatticeSpec::chain(4)).unwrap();
        let basis = enumerate_sector(&chain, 2, DEFAULT_MEMORY_CAP).unwrap();
        build_hamiltonian(&basis, None, 1.0).unwrap()
    }

    fn cfg(sites: &[usize]) -> Configuration {
        Configuration::from_sites(sites.iter().copied()).unwrap()
    }

    #[test]
    fn basis_state_lookup() {
        let h = chain_h();
        let psi = basis_state(&h, cfg(&[0, 2])).unwrap();
        assert_eq!(psi.amplitudes[0], Complex64::new(1.0, 0.0));
        assert!(matches!(
            basis_state(&h, cfg(&[1, 2])),
            Err(Error::NotInBasis(_))
        ));
    }

    #[test]
    fn frozen_snake_keeps_its_phase() {
        let sq = Lattice::new(LatticeSpec::square(3)).unwrap();
        let basis = enumerate_sector(&sq, 3, DEFAULT_MEMORY_CAP).unwrap();
        let dec = fragment_decomposition(&basis);
        let snake = cfg(&[0, 4, 8]);
        let id = dec.label(basis.index_of(snake).unwrap());
        let h = build_hamiltonian(&basis, Some((&dec, id)), 1.0).unwrap();
        let psi = basis_state(&h, snake).unwrap();
        let (next, err) = krylov_step(&h, &psi, 0.7, 7).unwrap();
        assert_eq!(next.amplitudes, psi.amplitudes);
        assert_eq!(err, 0.0);

        let series =
            adaptive_evolve(&h, &psi, &[0.0, 1.0, 50.0], &EvolveOptions::default()).unwrap();
        let g0 = 1.0 - (2.0 * 3.0 / 9.0 - 1.0f64).powi(2);
        for &g in &series.g {
            assert_eq!(g, g0);
        }
    }

    #[test]
    fn full_krylov_space_is_exact() {
        // 3x3 path graph: exp(-iHt) e_0 has closed form with w = sqrt(2) t.
        let h = chain_h();
        let psi = basis_state(&h, cfg(&[0, 2])).unwrap();
        let t = 0.9;
        let (next, err) = krylov_step(&h, &psi, t, 7).unwrap();
        assert_eq!(err, 0.0);
        let w = 2f64.sqrt() * t;
        let expect = [
            Complex64::new((1.0 + w.cos()) / 2.0, 0.0),
            Complex64::new(0.0, -w.sin() / 2f64.sqrt()),
            Complex64::new((w.cos() - 1.0) / 2.0, 0.0),
        ];
        for (a, b) in next.amplitudes.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let h = chain_h();
        let psi = basis_state(&h, cfg(&[0, 2])).unwrap();
        assert!(krylov_step(&h, &psi, 0.0, 7).is_err());
        assert!(krylov_step(&h, &psi, 0.1, 1).is_err());
        let opts = EvolveOptions::default();
        assert!(adaptive_evolve(&h, &psi, &[1.0, 0.5], &opts).is_err());
    }

    #[test]
    fn grid_at_zero_records_the_initial_state() {
        let h = chain_h();
        let psi = basis_state(&h, cfg(&[0, 2])).unwrap();
        let s = adaptive_evolve(&h, &psi, &[0.0], &EvolveOptions::default()).unwrap();
        assert_eq!(s.occupations[0], vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.g[0], 1.0 - (2.0 * 0.5 - 1.0f64).powi(2));
        assert_eq!(s.stats.accepted, 0);
    }

    #[test]
    fn observables() {
        let configs = [cfg(&[0, 2]), cfg(&[1, 3])];
        let half = Complex64::new(0.5f64.sqrt(), 0.0);
        assert_eq!(
            occupations(&[half, half], &configs, 4)
                .iter()
                .map(|x| (x * 1e12).round())
                .collect::<Vec<_>>(),
            vec![5e11; 4]
        );
        let eta = 0.25;
        assert_eq!(autocorrelation(&[eta; 8], cfg(&[0, 5]), eta), 0.0);
        assert_eq!(rms_radius(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn crystal_placement() {
        assert_eq!(
            centered_crystal(41, 5, 2).unwrap(),
            vec![16, 18, 20, 22, 24]
        );
        assert!(centered_crystal(8, 5, 2).is_err());
        let occ: Vec<f64> = (0..41)
            .map(|x| {
                if [16, 18, 20, 22, 24].contains(&x) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        assert!((rms_radius(&occ) - 8f64.sqrt()).abs() < 1e-15);
    }
}
