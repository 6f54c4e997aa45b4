//! Real-space field emitted by a giant atom.
//!
//! Positions are in units of the point spacing `x0` and times in units of
//! `tau0 = x0 / v`, so a retardation over distance `xi` is `xi` time units.
//! The dimensionless amplitude is
//!
//! ```text
//! phi(x, t) = -i sqrt(1/2) sum_m [eps(t - |x - m|) - r eps(t - (x + m))]
//! ```
//!
//! with the Heaviside gating `eps(t') = 0` for `t' <= 0`. The stored intensity
//! `P = Gamma tau0 |phi|^2` is a density per unit `x / x0`, so the excitation
//! norm is `|eps(t)|^2 + int P dx`. Scaling the mirror term by `r` when
//! `R < 1` extends the atomic replacement to the field and has no published
//! curve to compare against.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dde::Trajectory;
use crate::model::SystemConfig;
use crate::{Error, Exec, Result};

/// Default spatial resolution, in units of `x0`.
pub const DEFAULT_DX: f64 = 1.0 / 50.0;

// three-point Gauss-Legendre on [0, 1]
const GAUSS_NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

fn check_time(trajectory: &Trajectory, t: f64) -> Result<()> {
    let horizon = trajectory.horizon();
    if t > horizon * (1.0 + 1e-12) + 1e-12 || t < 0.0 {
        return Err(Error::HistoryTooShort { requested: t, horizon });
    }
    Ok(())
}

fn delayed(trajectory: &Trajectory, t: f64) -> Complex64 {
    if t <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    trajectory.lab_value_at(t).unwrap_or_default()
}

fn amplitude_unchecked(trajectory: &Trajectory, x: f64, t: f64, config: &SystemConfig) -> Complex64 {
    let r = config.mirror_amplitude();
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 1..=config.n_points() {
        let m = m as f64;
        sum += delayed(trajectory, t - (x - m).abs()) - r * delayed(trajectory, t - (x + m));
    }
    Complex64::new(0.0, -FRAC_1_SQRT_2) * sum
}

/// Dimensionless field amplitude at position `x` (units of `x0`) and time `t`
/// (units of `tau0`).
pub fn field_amplitude(trajectory: &Trajectory, x: f64, t: f64, config: &SystemConfig) -> Result<Complex64> {
    check_time(trajectory, t)?;
    Ok(amplitude_unchecked(trajectory, x, t, config))
}

/// Intensity density `P(x, t)` per unit `x / x0`.
pub fn intensity(trajectory: &Trajectory, x: f64, t: f64, config: &SystemConfig) -> Result<f64> {
    Ok(config.gamma_tau0() * field_amplitude(trajectory, x, t, config)?.norm_sqr())
}

/// Left- and right-moving parts of the amplitude. Near the mirror the field
/// is their superposition; elsewhere one of them vanishes.
fn split_unchecked(trajectory: &Trajectory, x: f64, t: f64, config: &SystemConfig) -> (Complex64, Complex64) {
    let r = config.mirror_amplitude();
    let mut left = Complex64::new(0.0, 0.0);
    let mut right = Complex64::new(0.0, 0.0);
    for m in 1..=config.n_points() {
        let m = m as f64;
        if x < m {
            left += delayed(trajectory, t - (m - x));
        } else {
            right += delayed(trajectory, t - (x - m));
        }
        right -= r * delayed(trajectory, t - (x + m));
    }
    let scale = Complex64::new(0.0, -FRAC_1_SQRT_2);
    (scale * left, scale * right)
}

/// Integrates `integrand(x)` over `[0, N + t]`.
///
/// The integrand is smooth between the points `k`, `k + f` and `k - f`
/// (`f = frac(t)`, `k` integer) where retarded arguments cross a delay
/// boundary. Each smooth piece is split into panels no wider than `dx` and
/// integrated with three-point Gauss-Legendre.
fn integrate_light_cone(t: f64, n_points: usize, dx: f64, integrand: impl Fn(f64) -> f64) -> f64 {
    let extent = n_points as f64 + t;
    let frac = t - t.floor();
    let mut breaks = vec![0.0, extent];
    let top = extent.ceil() as i64 + 1;
    for k in 0..=top {
        let k = k as f64;
        for b in [k, k + frac, k - frac] {
            if b > 0.0 && b < extent {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / dx).ceil().max(1.0) as usize;
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                total += weight * width * integrand(lo + node * width);
            }
        }
    }
    total
}

/// `int_0^{N + t} P(x, t) dx`, the probability of finding the photon in the
/// waveguide.
///
/// Near the mirror `P` contains the interference of the incident and the
/// reflected wave. The delay equations do not conserve that cross term
/// exactly, so `|eps|^2` plus this integral deviates from one by
/// `O(Gamma / omega0)`. See [`directional_emitted_probability`].
pub fn emitted_probability(trajectory: &Trajectory, t: f64, config: &SystemConfig, dx: f64) -> Result<f64> {
    check_time(trajectory, t)?;
    if config.gamma_tau0() == 0.0 || t <= 0.0 {
        return Ok(0.0);
    }
    let total = integrate_light_cone(t, config.n_points(), dx, |x| {
        amplitude_unchecked(trajectory, x, t, config).norm_sqr()
    });
    Ok(config.gamma_tau0() * total)
}

/// `int (|left|^2 + |right|^2) dx`: the emitted probability with the
/// interference between counter-propagating parts dropped. Together with
/// `|eps|^2` this is the quantity the delay equations conserve.
pub fn directional_emitted_probability(trajectory: &Trajectory, t: f64, config: &SystemConfig, dx: f64) -> Result<f64> {
    check_time(trajectory, t)?;
    if config.gamma_tau0() == 0.0 || t <= 0.0 {
        return Ok(0.0);
    }
    let total = integrate_light_cone(t, config.n_points(), dx, |x| {
        let (l, r) = split_unchecked(trajectory, x, t, config);
        l.norm_sqr() + r.norm_sqr()
    });
    Ok(config.gamma_tau0() * total)
}

/// Intensity `P(x, t)` on a rectangular grid with the excitation norm per
/// time row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    /// Positions in units of `x0`.
    pub x_grid: Vec<f64>,
    /// Times in units of `tau0`.
    pub t_grid: Vec<f64>,
    /// Row-major, one row per time.
    pub values: Vec<Vec<f64>>,
    /// `|eps(t)|^2 + int_0^{N + t} P dx`, integrated over the whole light
    /// cone independently of `x_grid`.
    pub norm_series: Vec<f64>,
    /// Same with [`directional_emitted_probability`] in place of `int P dx`.
    pub directional_norm_series: Vec<f64>,
}

/// Grid description written next to the CSV matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMapMeta {
    pub n_points: usize,
    pub gamma_tau0: f64,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub norm_series: Vec<f64>,
    pub directional_norm_series: Vec<f64>,
}

impl FieldMap {
    pub fn row(&self, t_index: usize) -> &[f64] {
        &self.values[t_index]
    }

    pub fn meta(&self, config: &SystemConfig) -> FieldMapMeta {
        FieldMapMeta {
            n_points: config.n_points(),
            gamma_tau0: config.gamma_tau0(),
            x_grid: self.x_grid.clone(),
            t_grid: self.t_grid.clone(),
            norm_series: self.norm_series.clone(),
            directional_norm_series: self.directional_norm_series.clone(),
        }
    }

    /// CSV matrix: header `t_over_tau0,<x values>`, then one row per time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t_over_tau0")?;
        for x in &self.x_grid {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
        for (t, row) in self.t_grid.iter().zip(&self.values) {
            write!(out, "{t}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_sorted(grid: &[f64], name: &'static str) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid(name));
    }
    Ok(())
}

pub fn intensity_map(trajectory: &Trajectory, x_grid: &[f64], t_grid: &[f64], config: &SystemConfig) -> Result<FieldMap> {
    intensity_map_with(trajectory, x_grid, t_grid, config, DEFAULT_DX, Exec::default())
}

pub fn intensity_map_with(
    trajectory: &Trajectory,
    x_grid: &[f64],
    t_grid: &[f64],
    config: &SystemConfig,
    dx: f64,
    exec: Exec,
) -> Result<FieldMap> {
    check_sorted(x_grid, "x grid must be finite and strictly ascending")?;
    check_sorted(t_grid, "t grid must be finite and strictly ascending")?;
    if !(dx > 0.0) {
        return Err(Error::InvalidGrid("dx must be positive"));
    }
    check_time(trajectory, t_grid[0])?;
    check_time(trajectory, t_grid[t_grid.len() - 1])?;
    let g = config.gamma_tau0();
    let rows = exec.map(t_grid.len(), |i| {
        let t = t_grid[i];
        let row: Vec<f64> = x_grid
            .iter()
            .map(|&x| g * amplitude_unchecked(trajectory, x, t, config).norm_sqr())
            .collect();
        let emitted = emitted_probability(trajectory, t, config, dx).expect("time checked");
        let directional = directional_emitted_probability(trajectory, t, config, dx).expect("time checked");
        let atom = trajectory.lab_value_at(t).unwrap_or_default().norm_sqr();
        (row, (atom + emitted, atom + directional))
    });
    let (values, norms): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let (norm_series, directional_norm_series) = norms.into_iter().unzip();
    Ok(FieldMap { x_grid: x_grid.to_vec(), t_grid: t_grid.to_vec(), values, norm_series, directional_norm_series })
}
