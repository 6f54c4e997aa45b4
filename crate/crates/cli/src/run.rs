use std::f64::consts::PI;

use anyhow::{bail, Result};
use giant_atom::analytic::{static_amplitude, LongTimeAmplitude};
use giant_atom::dde::{ensemble_average, horizon_from_gamma_t, integrate, integrate_multi, Frame, Trajectory};
use giant_atom::field::{intensity_map, linspace};
use giant_atom::spectral::{char_residual, classify, find_poles, ModeSet, ModeSource, SearchBox};
use giant_atom::{build_kernel, build_multi_kernel, SystemConfig};
use serde::Serialize;

use crate::output::OutDir;
use crate::spec::{ExperimentSpec, Kind};
use crate::NumericError;

/// Poles further apart than this (in `1/tau0`) count as different.
const POLE_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Serialize)]
pub struct ModeRow {
    pub omega_tau0_pi: f64,
    pub k: i64,
    pub source: ModeSource,
    pub weight_re: f64,
    pub weight_im: f64,
}

fn mode_rows(modes: &ModeSet) -> Vec<ModeRow> {
    modes
        .modes
        .iter()
        .map(|m| ModeRow {
            omega_tau0_pi: m.omega_tau0 / PI,
            k: m.k,
            source: m.source,
            weight_re: m.weight.re,
            weight_im: m.weight.im,
        })
        .collect()
}

/// Runs `spec` and writes its artifacts into `out`. Returns a one-line
/// human-readable result.
pub fn execute(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    match spec.kind {
        Kind::Dynamics => dynamics(spec, out),
        Kind::Ensemble => ensemble(spec, out),
        Kind::FieldMap => field_map(spec, out),
        Kind::Snapshot => snapshot(spec, out),
        Kind::Poles => poles(spec, out),
        Kind::MultiAtom => multi_atom(spec, out),
    }
}

fn horizon(spec: &ExperimentSpec, config: &SystemConfig) -> f64 {
    horizon_from_gamma_t(spec.horizon_gamma_t, config.gamma_tau0())
}

fn trajectory(spec: &ExperimentSpec, config: &SystemConfig) -> Result<Trajectory> {
    let traj = integrate(config, &build_kernel(config), horizon(spec, config), spec.steps_per_tau0, Frame::Lab)?;
    if traj.samples().iter().any(|z| !z.is_finite()) {
        bail!(NumericError("integration produced non-finite amplitudes".into()));
    }
    Ok(traj)
}

/// Mean of `values` over the last fifth of the series.
fn tail_mean(values: &[f64]) -> f64 {
    let tail = &values[values.len() - values.len().div_ceil(5)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[derive(Serialize)]
struct DynamicsSummary {
    case_label: String,
    modes: Vec<ModeRow>,
    final_abs2: f64,
    late_mean_abs2: f64,
    /// Time-averaged `|eps|^2` of the bound-mode superposition.
    predicted_mean_abs2: f64,
    /// `|A|^2` from the static closed form, when that condition holds.
    closed_form_plateau: Option<f64>,
}

fn dynamics(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.system()?;
    let traj = trajectory(spec, &config)?;
    out.write_with("dynamics.csv", |w| traj.write_csv(w, spec.stride))?;

    let modes = classify(&config);
    let abs2 = traj.abs2();
    let closed_form_plateau = match modes.modes.as_slice() {
        [m] if matches!(m.source, ModeSource::Cond2kPi | ModeSource::CondOddPi) => {
            static_amplitude(&config, m.source).ok().map(|a| a * a)
        }
        _ => None,
    };
    let summary = DynamicsSummary {
        case_label: format!("{:?}", modes.case_label),
        final_abs2: *abs2.last().expect("trajectory has the initial sample"),
        late_mean_abs2: tail_mean(&abs2),
        predicted_mean_abs2: LongTimeAmplitude::new(&config).mean_probability(),
        closed_form_plateau,
        modes: mode_rows(&modes),
    };
    out.write_json("summary.json", &summary)?;
    let mut line = format!(
        "{}: late-time mean |eps|^2 {:.6}, bound-mode prediction {:.6}",
        summary.case_label, summary.late_mean_abs2, summary.predicted_mean_abs2
    );
    if let Some(p) = closed_form_plateau {
        line.push_str(&format!(", closed-form plateau {p:.6}"));
    }
    Ok(line)
}

#[derive(Serialize)]
struct EnsembleSummary {
    n_traj: usize,
    seed: u64,
    late_mean_abs2: f64,
    late_std_err: f64,
}

fn ensemble(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.system()?;
    let avg = ensemble_average(
        &config,
        &build_kernel(&config),
        horizon(spec, &config),
        spec.steps_per_tau0,
        spec.n_traj,
        spec.seed,
    )?;
    if avg.mean_abs2.iter().any(|v| !v.is_finite()) {
        bail!(NumericError("ensemble mean is not finite".into()));
    }
    out.write_with("ensemble.csv", |w| avg.write_csv(w, spec.stride, config.gamma_tau0()))?;
    let summary = EnsembleSummary {
        n_traj: avg.n_traj,
        seed: spec.seed,
        late_mean_abs2: tail_mean(&avg.mean_abs2),
        late_std_err: tail_mean(&avg.std_err),
    };
    out.write_json("summary.json", &summary)?;
    Ok(format!(
        "{} trajectories: late-time mean |eps|^2 {:.6} +- {:.2e}",
        summary.n_traj, summary.late_mean_abs2, summary.late_std_err
    ))
}

fn x_grid(spec: &ExperimentSpec, config: &SystemConfig) -> Vec<f64> {
    let n = config.n_points();
    let x_max = spec.config.field.x_max.unwrap_or(2.0 * n as f64);
    let nx = spec.config.field.nx.unwrap_or(2 * n * 50 + 1);
    linspace(0.0, x_max, nx)
}

#[derive(Serialize)]
struct FieldSummary {
    max_norm_deviation: f64,
    max_directional_norm_deviation: f64,
}

fn field_map(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.system()?;
    let traj = trajectory(spec, &config)?;
    let ts = linspace(0.0, horizon(spec, &config), spec.config.field.nt.unwrap_or(201));
    let map = intensity_map(&traj, &x_grid(spec, &config), &ts, &config)?;
    out.write_with("field_map.csv", |w| map.write_csv(w))?;
    out.write_json("field_map_meta.json", &map.meta(&config))?;

    let deviation = |s: &[f64]| s.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let summary = FieldSummary {
        max_norm_deviation: deviation(&map.norm_series),
        max_directional_norm_deviation: deviation(&map.directional_norm_series),
    };
    out.write_json("summary.json", &summary)?;
    Ok(format!(
        "{} x {} map; max |norm - 1| {:.2e}, directional {:.2e}",
        map.t_grid.len(),
        map.x_grid.len(),
        summary.max_norm_deviation,
        summary.max_directional_norm_deviation
    ))
}

fn snapshot(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.system()?;
    let traj = trajectory(spec, &config)?;
    let t = horizon(spec, &config);
    let xs = x_grid(spec, &config);
    let map = intensity_map(&traj, &xs, &[t], &config)?;
    let row = map.row(0);
    out.write_with("snapshot.csv", |w| {
        writeln!(w, "x_over_x0,intensity")?;
        for (x, p) in xs.iter().zip(row) {
            writeln!(w, "{x},{p}")?;
        }
        Ok(())
    })?;
    let peak = row.iter().cloned().fold(0.0, f64::max);
    Ok(format!("P(x, t = {t:.4} tau0) on {} points, peak {peak:.4e}", xs.len()))
}

#[derive(Serialize)]
struct PoleRow {
    re: f64,
    im: f64,
    residual: f64,
}

#[derive(Serialize)]
struct PolesSummary {
    case_label: String,
    modes: Vec<ModeRow>,
    poles: Vec<PoleRow>,
    failed_seeds: usize,
}

fn poles(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.system()?;
    let modes = classify(&config);
    let found = find_poles(&config, &SearchBox::default_for(&config))?;
    for m in &modes.modes {
        if !found.poles.iter().any(|s| (s - m.pole()).norm() < POLE_MATCH_TOL) {
            bail!(NumericError(format!("pole search missed the bound mode at omega tau0 = {}", m.omega_tau0)));
        }
    }
    let summary = PolesSummary {
        case_label: format!("{:?}", modes.case_label),
        modes: mode_rows(&modes),
        poles: found
            .poles
            .iter()
            .map(|&s| PoleRow { re: s.re, im: s.im, residual: char_residual(s, &config).norm() })
            .collect(),
        failed_seeds: found.failed_seeds,
    };
    out.write_json("poles.json", &summary)?;
    Ok(format!("{}: {} bound modes, {} poles in the search box", summary.case_label, modes.len(), found.poles.len()))
}

fn multi_atom(spec: &ExperimentSpec, out: &mut OutDir) -> Result<String> {
    let config = spec.config.multi_atom()?;
    let horizon = horizon_from_gamma_t(spec.horizon_gamma_t, config.gamma_tau0());
    let trajs = integrate_multi(&config, &build_multi_kernel(&config), horizon, spec.steps_per_tau0, Frame::Lab)?;
    if trajs.iter().any(|t| t.samples().iter().any(|z| !z.is_finite())) {
        bail!(NumericError("integration produced non-finite amplitudes".into()));
    }
    out.write_with("multi_atom.csv", |w| {
        write!(w, "t_over_tau0")?;
        for q in 1..=trajs.len() {
            write!(w, ",abs2_{q}")?;
        }
        writeln!(w, ",total")?;
        for j in (0..trajs[0].len()).step_by(spec.stride) {
            write!(w, "{}", trajs[0].time(j))?;
            let mut total = 0.0;
            for t in &trajs {
                let p = t.samples()[j].norm_sqr();
                total += p;
                write!(w, ",{p}")?;
            }
            writeln!(w, ",{total}")?;
        }
        Ok(())
    })?;
    let finals: Vec<String> = trajs.iter().map(|t| format!("{:.6}", t.samples().last().unwrap().norm_sqr())).collect();
    Ok(format!("{} atoms, final populations [{}]", trajs.len(), finals.join(", ")))
}
