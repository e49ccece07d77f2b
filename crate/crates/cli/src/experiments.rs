//! Experiment drivers. Each produces its CSV files in memory plus a JSON
//! summary; writing to disk is left to the caller so a failed run leaves no
//! partial outputs behind.

use qhd::classical::{
    finite_size_scan, simulate_ensemble, EnsembleResult, StepRule, WalkSchedule, KERNEL_VERSION,
};
use qhd::dynamics::{
    evolve_pattern, melt1d_experiment, rms_radius, window_fit, MeltSetup, ObservableSeries,
    DEFAULT_KRYLOV_DIM, GUARD_VELOCITY,
};
use qhd::fit::{curve_crossings, LineFit};
use qhd::spectral::{scar_scan, statics_scan, ScanOptions, ScarCriteria, StaticsRow};
use qhd::statespace::{
    classify_density, count_sector, enumerate_sector, fragment_decomposition,
    FragmentationThresholds,
};
use qhd::{Boundary, Lattice};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;

/// One output file, relative to the run directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub files: Vec<OutputFile>,
    pub summary: Value,
}

/// Runs a resolved config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    match cfg.experiment {
        ExperimentKind::Enumerate => enumerate(cfg),
        ExperimentKind::Fragments => fragments(cfg),
        ExperimentKind::Statics => statics(cfg),
        ExperimentKind::Melt1d => melt1d(cfg),
        ExperimentKind::Defect2d => defect2d(cfg),
        ExperimentKind::Spectrum => spectrum(cfg),
        ExperimentKind::ClassicalScaling => classical_scaling(cfg),
    }
}

/// Conventions in effect for `cfg`, recorded in the manifest.
pub fn decisions(cfg: &ExperimentConfig) -> Value {
    use ExperimentKind::*;
    let mut d = json!({
        "configuration_storage": "u128 bit mask, site index y*L + x",
        "fragment_labels": "smallest member ordinal",
        "memory_cap": cfg.memory_cap,
    });
    let obj = d.as_object_mut().expect("object literal");
    if matches!(cfg.experiment, Melt1d | Defect2d) {
        let o = cfg.evolve_options();
        obj.insert(
            "dynamics".into(),
            json!({
                "propagator": "Lanczos with full reorthogonalization",
                "krylov_dim": o.krylov_dim,
                "default_krylov_dim": DEFAULT_KRYLOV_DIM,
                "error_estimate": "2-norm of the order m minus order m-1 approximant",
                "tol": o.tol,
                "dt_initial": o.dt_initial,
                "dt_bounds": [o.dt_min, o.dt_max],
                "step_rule": "double after an accepted full step, halve on rejection",
                "coupling": cfg.evolution.coupling,
                "guard_velocity": GUARD_VELOCITY,
            }),
        );
        let n_traj = cfg.classical.n_traj.unwrap_or(0);
        if n_traj > 0 {
            obj.insert("classical".into(), classical_decisions(cfg));
        }
    }
    if cfg.experiment == ClassicalScaling {
        obj.insert("classical".into(), classical_decisions(cfg));
    }
    if cfg.experiment == Spectrum {
        obj.insert(
            "spectral".into(),
            json!({
                "dense_cap": cfg.dense_cap,
                "log_base": "e",
                "degenerate_basis": cfg.spectral.degenerate_basis.map(|d| qhd::spectral::DegenerateBasis::from(d).as_str()),
                "bipartition": "bottom half (2D), left half (1D)",
                "scar_criteria": scar_criteria_json(&ScarCriteria::default()),
            }),
        );
    }
    if cfg.experiment == Statics {
        obj.insert(
            "statics".into(),
            json!({"structure_factor": "(2 pi / N)^2 * mean squared staggered count, uniform weight"}),
        );
    }
    d
}

fn classical_decisions(cfg: &ExperimentConfig) -> Value {
    json!({
        "kernel_version": KERNEL_VERSION,
        "time_map": cfg.classical.time_map().describe(),
        "rejected_moves_advance_time": true,
        "n_traj": cfg.classical.n_traj,
        "seed": cfg.seed,
    })
}

fn scar_criteria_json(c: &ScarCriteria) -> Value {
    json!({
        "q_min": c.q_min,
        "entropy_fraction_of_sector_max": c.entropy_fraction,
        "middle_energy_fraction": c.middle_fraction,
    })
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

struct Table {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { name, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<OutputFile, CliError> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        Ok(OutputFile {
            name: self.name.into(),
            bytes,
        })
    }
}

fn lattice(cfg: &ExperimentConfig, l: usize) -> Result<Lattice, CliError> {
    Lattice::new(cfg.lattice_spec(l)).map_err(CliError::core("lattice"))
}

fn single_lattice(cfg: &ExperimentConfig) -> Result<Lattice, CliError> {
    let l = cfg
        .lattice
        .l
        .ok_or_else(|| CliError::config("lattice.l is required"))?;
    lattice(cfg, l)
}

fn memory_cap(cfg: &ExperimentConfig) -> usize {
    cfg.memory_cap
        .unwrap_or(qhd::statespace::DEFAULT_MEMORY_CAP)
}

fn pattern_sites(cfg: &ExperimentConfig, lattice: &Lattice) -> Result<Vec<usize>, CliError> {
    let pattern = cfg
        .pattern
        .as_ref()
        .ok_or_else(|| CliError::config("pattern is required"))?
        .to_pattern()?;
    pattern
        .realize(lattice, cfg.m)
        .map_err(CliError::core("patterns"))
}

fn fit_json(fit: &Option<LineFit>) -> Value {
    match fit {
        Some(f) => json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
            "n_points": f.n_points,
        }),
        None => Value::Null,
    }
}

fn enumerate(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let lattice = single_lattice(cfg)?;
    let spec = lattice.spec();
    let closed_form = spec.boundary == Boundary::Open && spec.exclusion_radius == 1;
    if !closed_form && lattice.n_sites() > 128 {
        return Err(CliError::Core {
            module: "statespace",
            source: qhd::Error::TooManySites {
                n_sites: lattice.n_sites(),
            },
        });
    }
    let mut sectors = Table::new("sectors.csv", &["M", "count"])?;
    let mut total = 0u128;
    let mut max_m = 0;
    for m in 0..=lattice.n_sites() {
        let count = count_sector(&lattice, m);
        if count == 0 {
            break;
        }
        total += count;
        max_m = m;
        sectors.row([m.to_string(), count.to_string()])?;
    }
    let mut files = vec![sectors.finish()?];
    let mut summary = json!({
        "n_sites": lattice.n_sites(),
        "total": total.to_string(),
        "max_particles": max_m,
    });
    if let Some(m) = cfg.m {
        let basis =
            enumerate_sector(&lattice, m, memory_cap(cfg)).map_err(CliError::core("statespace"))?;
        let mut t = Table::new("configurations.csv", &["ordinal", "sites"])?;
        for (k, c) in basis.configs().iter().enumerate() {
            let sites: Vec<String> = c.sites().map(|s| s.to_string()).collect();
            t.row([k.to_string(), sites.join(" ")])?;
        }
        files.push(t.finish()?);
        summary["sector"] = json!({"m": m, "count": basis.len()});
    }
    Ok(ExperimentOutput { files, summary })
}

fn fragments(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let lattice = single_lattice(cfg)?;
    let m = cfg.m.ok_or_else(|| CliError::config("m is required"))?;
    let basis =
        enumerate_sector(&lattice, m, memory_cap(cfg)).map_err(CliError::core("statespace"))?;
    let dec = fragment_decomposition(&basis);
    let mut t = Table::new("fragments.csv", &["fragment_id", "size"])?;
    for f in dec.fragments() {
        t.row([f.id.to_string(), f.size.to_string()])?;
    }
    let l = lattice.l();
    let thresholds = if lattice.dim() == 2 {
        let th = FragmentationThresholds::square(l);
        json!({"weak_onset": th.weak_onset, "strong_onset": th.strong_onset})
    } else {
        Value::Null
    };
    let largest = dec.largest();
    let summary = json!({
        "N": basis.len(),
        "eta": basis.eta(),
        "n_fragments": dec.n_fragments(),
        "ratio_max": dec.ratio_max(),
        "largest_fragment": largest.map(|f| json!({"id": f.id, "size": f.size})),
        "singletons": dec.fragments().iter().filter(|f| f.size == 1).count(),
        "thresholds": thresholds,
        "classify_density": classify_density(l, m, lattice.dim()).as_str(),
    });
    Ok(ExperimentOutput {
        files: vec![t.finish()?],
        summary,
    })
}

/// Crossings of successive-size `C_inf(eta)` curves, excluding the trivial
/// common zero at `eta = 0`.
pub fn statics_crossings(rows: &[StaticsRow]) -> Vec<(usize, usize, Vec<f64>)> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.l).collect();
    sizes.dedup();
    let curve = |l: usize| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.l == l)
            .map(|r| (r.eta, r.c_inf))
            .collect()
    };
    sizes
        .windows(2)
        .map(|w| {
            let x = curve_crossings(&curve(w[0]), &curve(w[1]))
                .into_iter()
                .filter(|&x| x > 0.0)
                .collect();
            (w[0], w[1], x)
        })
        .collect()
}

fn statics(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let mut t = Table::new("statics.csv", &["L", "M", "eta", "c_inf", "n_states"])?;
    let mut rows = Vec::new();
    let mut per_size = Vec::new();
    for l in cfg.lattice_sizes() {
        let lat = lattice(cfg, l)?;
        let scan = statics_scan(&lat, memory_cap(cfg)).map_err(CliError::core("spectral"))?;
        let top = scan.last().expect("the empty sector is always present");
        per_size.push(json!({
            "L": l,
            "max_m": top.m,
            "c_inf_at_max_density": top.c_inf,
        }));
        for r in &scan {
            t.row([
                r.l.to_string(),
                r.m.to_string(),
                num(r.eta),
                num(r.c_inf),
                r.n_states.to_string(),
            ])?;
        }
        rows.extend(scan);
    }
    let crossings: Vec<Value> = statics_crossings(&rows)
        .into_iter()
        .map(|(a, b, x)| json!({"sizes": [a, b], "eta": x}))
        .collect();
    Ok(ExperimentOutput {
        files: vec![t.finish()?],
        summary: json!({"sizes": per_size, "crossings": crossings}),
    })
}

fn occupation_table(name: &'static str, s: &ObservableSeries) -> Result<OutputFile, CliError> {
    let mut t = Table::new(name, &["time", "site", "value"])?;
    for (time, occ) in s.times.iter().zip(&s.occupations) {
        for (site, v) in occ.iter().enumerate() {
            t.row([num(*time), site.to_string(), num(*v)])?;
        }
    }
    t.finish()
}

fn series_table(name: &'static str, s: &ObservableSeries) -> Result<OutputFile, CliError> {
    let mut t = Table::new(name, &["time", "G", "norm", "energy"])?;
    for k in 0..s.times.len() {
        t.row([
            num(s.times[k]),
            num(s.g[k]),
            num(s.norm[k]),
            num(s.energy[k]),
        ])?;
    }
    t.finish()
}

fn classical_tables(res: &EnsembleResult) -> Result<Vec<OutputFile>, CliError> {
    let mut occ = Table::new(
        "classical_occupations.csv",
        &["time", "n_steps", "site", "value"],
    )?;
    let mut series = Table::new(
        "classical_series.csv",
        &["time", "n_steps", "G", "G_stderr"],
    )?;
    for r in &res.records {
        for (site, v) in r.occupations.iter().enumerate() {
            occ.row([
                num(r.time),
                r.n_steps.to_string(),
                site.to_string(),
                num(*v),
            ])?;
        }
        series.row([
            num(r.time),
            r.n_steps.to_string(),
            num(r.g),
            num(r.g_stderr),
        ])?;
    }
    Ok(vec![occ.finish()?, series.finish()?])
}

fn stats_json(s: &ObservableSeries) -> Value {
    json!({
        "accepted_steps": s.stats.accepted,
        "rejected_steps": s.stats.rejected,
        "smallest_dt": s.stats.smallest_dt,
        "largest_dt": s.stats.largest_dt,
        "max_norm_drift": s.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max),
        "max_energy_drift": s.energy.iter().map(|e| (e - s.energy[0]).abs()).fold(0.0, f64::max),
    })
}

/// Classical leg on the merged record grid of `times`.
fn classical_leg(
    cfg: &ExperimentConfig,
    lattice: &Lattice,
    sites: &[usize],
    times: &[f64],
    window: Option<[f64; 2]>,
) -> Result<EnsembleResult, CliError> {
    let map = cfg.classical.time_map();
    let m = sites.len();
    let n_traj = cfg.classical.n_traj.unwrap_or(0);
    let seed = cfg.seed.unwrap_or(0);
    let mut schedule = WalkSchedule::from_times(n_traj, times, m, seed, map)
        .map_err(CliError::core("classical"))?;
    if let Some([lo, hi]) = window {
        let steps = |t: f64| map.steps_for(t, m).map_err(CliError::core("classical"));
        schedule = schedule
            .with_average_window(steps(lo)?, steps(hi)?)
            .map_err(CliError::core("classical"))?;
    }
    simulate_ensemble(lattice, sites, &schedule).map_err(CliError::core("classical"))
}

fn merged_grid(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = a.iter().chain(b).copied().collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn melt1d(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let lat = single_lattice(cfg)?;
    let sites = pattern_sites(cfg, &lat)?;
    let m = sites.len();
    let times = cfg.times.expect("resolved").points();
    let window = cfg.fit_window.expect("resolved");
    let setup = MeltSetup {
        l: lat.l(),
        m,
        spacing: 2,
        sites: Some(sites.clone()),
        coupling: cfg.evolution.coupling.unwrap_or(1.0),
        times,
        fit_window: (window[0], window[1]),
        opts: cfg.evolve_options(),
        memory_cap: memory_cap(cfg),
    };
    let out = melt1d_experiment(&setup).map_err(CliError::core("dynamics"))?;
    let mut files = vec![
        occupation_table("occupations.csv", &out.series)?,
        series_table("series.csv", &out.series)?,
    ];
    let mut radius = Table::new("radius.csv", &["time", "R"])?;
    for (t, r) in out.series.times.iter().zip(&out.radius) {
        radius.row([num(*t), num(*r)])?;
    }
    files.push(radius.finish()?);

    let mut summary = json!({
        "crystal": out.crystal,
        "quantum_exponent": fit_json(&out.exponent),
        "fit_window": window,
        "guard_satisfied": out.guard_satisfied,
        "boundary_contact": out.boundary_contact,
        "max_edge_occupation": out.max_edge_occupation,
        "steps": stats_json(&out.series),
    });
    if cfg.classical.n_traj.unwrap_or(0) > 0 {
        let ctimes = cfg.classical.times.expect("resolved").points();
        let res = classical_leg(cfg, &lat, &sites, &ctimes, None)?;
        files.extend(classical_tables(&res)?);
        let mut t = Table::new("classical_radius.csv", &["time", "n_steps", "R"])?;
        let mut rt = Vec::new();
        let mut rr = Vec::new();
        for r in &res.records {
            let rad = rms_radius(&r.occupations);
            t.row([num(r.time), r.n_steps.to_string(), num(rad)])?;
            rt.push(r.time);
            rr.push(rad);
        }
        files.push(t.finish()?);
        let cfit = window_fit(&rt, &rr, (window[0], window[1]));
        summary["classical_exponent"] = fit_json(&cfit);
        summary["exponent_difference"] = match (&out.exponent, &cfit) {
            (Some(q), Some(c)) => json!(q.slope - c.slope),
            _ => Value::Null,
        };
        summary["n_traj"] = json!(res.n_traj);
    }
    Ok(ExperimentOutput { files, summary })
}

fn defect2d(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let lat = single_lattice(cfg)?;
    let sites = pattern_sites(cfg, &lat)?;
    let m = sites.len();
    let times = cfg.times.expect("resolved").points();
    let run = evolve_pattern(
        &lat,
        &sites,
        cfg.evolution.coupling.unwrap_or(1.0),
        &times,
        &cfg.evolve_options(),
        memory_cap(cfg),
    )
    .map_err(CliError::core("dynamics"))?;
    let s = &run.series;
    let mut files = vec![
        occupation_table("occupations.csv", s)?,
        series_table("series.csv", s)?,
    ];
    let g_end = *s.g.last().expect("grid has at least one point");
    let t_end = *s.times.last().expect("grid has at least one point");
    let mut summary = json!({
        "initial": sites,
        "m": m,
        "eta": m as f64 / lat.n_sites() as f64,
        "sector_size": run.sector_size,
        "n_fragments": run.n_fragments,
        "fragment": {"id": run.fragment.id, "size": run.fragment.size},
        "norm_bound": run.norm_bound,
        "t_end": t_end,
        "quantum_g_end": g_end,
        "steps": stats_json(s),
    });

    if cfg.classical.n_traj.unwrap_or(0) > 0 {
        let ctimes = cfg.classical.times.expect("resolved").points();
        let window = cfg.classical.plateau_window;
        let res = classical_leg(cfg, &lat, &sites, &merged_grid(&ctimes, &times), window)?;
        files.extend(classical_tables(&res)?);

        let map = cfg.classical.time_map();
        let mut paired = Table::new(
            "paired.csv",
            &[
                "time",
                "G_quantum",
                "n_steps",
                "G_classical",
                "G_classical_stderr",
            ],
        )?;
        let mut classical_end = None;
        for (t, gq) in s.times.iter().zip(&s.g) {
            let n = map.steps_for(*t, m).map_err(CliError::core("classical"))?;
            let rec = res
                .records
                .iter()
                .find(|r| r.n_steps == n)
                .expect("quantum grid is part of the classical schedule");
            paired.row([
                num(*t),
                num(*gq),
                n.to_string(),
                num(rec.g),
                num(rec.g_stderr),
            ])?;
            classical_end = Some(rec);
        }
        files.push(paired.finish()?);
        let end = classical_end.expect("grid has at least one point");
        summary["classical_g_end"] = json!(end.g);
        summary["classical_g_end_stderr"] = json!(end.g_stderr);
        summary["classical_n_steps_end"] = json!(end.n_steps);
        summary["quantum_over_classical"] = if end.g != 0.0 {
            json!(g_end / end.g)
        } else {
            Value::Null
        };
        summary["n_traj"] = json!(res.n_traj);
        if let (Some(w), Some(avg)) = (window, &res.window) {
            let se = (end.g_stderr.powi(2) + avg.g_stderr.powi(2)).sqrt();
            summary["plateau"] = json!({
                "window": w,
                "n_records": avg.n_records,
                "g": avg.g,
                "g_stderr": avg.g_stderr,
                "end_deviation_in_stderr": if se > 0.0 { json!((end.g - avg.g).abs() / se) } else { Value::Null },
            });
        }
    }
    Ok(ExperimentOutput { files, summary })
}

fn spectrum(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let lat = single_lattice(cfg)?;
    let m = cfg.m.ok_or_else(|| CliError::config("m is required"))?;
    let opts = ScanOptions {
        dense_cap: cfg.dense_cap.unwrap_or(qhd::spectral::DEFAULT_DENSE_CAP),
        memory_cap: memory_cap(cfg),
        degenerate: cfg.spectral.degenerate_basis.unwrap_or_default().into(),
    };
    let scan = scar_scan(&lat, m, &opts).map_err(CliError::core("spectral"))?;
    let mut t = Table::new(
        "spectrum.csv",
        &[
            "fragment_id",
            "fragment_size",
            "is_largest_fragment",
            "energy",
            "energy_density",
            "entropy",
            "q_ea",
            "q_norm",
        ],
    )?;
    for r in &scan.records {
        t.row([
            r.fragment_id.to_string(),
            r.fragment_size.to_string(),
            r.is_largest_fragment.to_string(),
            num(r.energy),
            num(r.energy_density),
            num(r.entropy),
            num(r.q_ea),
            num(r.q),
        ])?;
    }
    let criteria = ScarCriteria::default();
    let summary = json!({
        "sector_size": scan.sector_size,
        "largest_fragment": scan.largest_fragment.map(|f| json!({"id": f.id, "size": f.size})),
        "n_eigenstates": scan.records.len(),
        "skipped_fragments": scan.skipped.iter().map(|f| json!({"id": f.id, "size": f.size})).collect::<Vec<_>>(),
        "partial": scan.partial,
        "max_residual": scan.max_residual,
        "norm_bound": scan.norm_bound,
        "max_entropy": scan.max_entropy(),
        "energy_density_range": scan.energy_density_range().map(|(a, b)| [a, b]),
        "scar_candidates": scan.scar_candidates(&criteria).len(),
        "scar_criteria": scar_criteria_json(&criteria),
    });
    Ok(ExperimentOutput {
        files: vec![t.finish()?],
        summary,
    })
}

fn classical_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput, CliError> {
    let pattern = cfg
        .pattern
        .as_ref()
        .ok_or_else(|| CliError::config("pattern is required"))?
        .to_pattern()?;
    let rule = match (cfg.classical.steps, cfg.classical.sweeps) {
        (Some(n), _) => StepRule::Fixed(n),
        (None, Some(s)) => StepRule::DiffusiveSweeps(s),
        (None, None) => {
            return Err(CliError::config(
                "classical.steps or classical.sweeps is required",
            ))
        }
    };
    let sizes = cfg.lattice_sizes();
    let n_traj = cfg.classical.n_traj.unwrap_or(0);
    let scan = finite_size_scan(&sizes, &pattern, rule, n_traj, cfg.seed.unwrap_or(0))
        .map_err(CliError::core("classical"))?;
    let mut t = Table::new(
        "scaling.csv",
        &["L", "M", "eta", "n_steps", "delta_eta", "delta_eta_stderr"],
    )?;
    for r in &scan.rows {
        t.row([
            r.l.to_string(),
            r.m.to_string(),
            num(r.eta),
            r.n_steps.to_string(),
            num(r.delta_eta),
            num(r.delta_eta_stderr),
        ])?;
    }
    let decreasing = scan
        .rows
        .windows(2)
        .all(|w| w[1].delta_eta < w[0].delta_eta);
    let per_size_seeds: Vec<Value> = scan
        .rows
        .iter()
        .map(|r| json!({"L": r.l, "seed": cfg.seed.unwrap_or(0).wrapping_add(r.l as u64)}))
        .collect();
    let summary = json!({
        "fit": fit_json(&scan.fit),
        "strictly_decreasing": decreasing,
        "step_rule": match rule {
            StepRule::Fixed(n) => format!("{n} steps"),
            StepRule::DiffusiveSweeps(s) => format!("ceil({s} * M * L^2) steps"),
        },
        "seeds": per_size_seeds,
    });
    Ok(ExperimentOutput {
        files: vec![t.finish()?],
        summary,
    })
}
