//! Method-of-steps integration of the delay differential equations.
//!
//! The step is `h = tau0 / M`, so every retardation `d * tau0` lands on a
//! grid node. Each step is a classical four-stage Runge-Kutta update; the
//! delayed amplitudes at the half-step stages come from cubic Hermite
//! interpolation of the stored history (node values plus one-sided
//! derivatives). Integration runs in the frame rotating at `omega0`, where the
//! amplitude only varies on the `1 / Gamma` scale.
//!
//! Discontinuities of the right-hand side (a delayed term switching on at
//! `t = d * tau0`) always sit on grid nodes. The history therefore keeps both
//! the left and the right derivative at each node.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{DelayKernel, MultiAtomConfig, MultiKernel, SystemConfig};
use crate::{Error, Exec, Result};

/// Smallest accepted number of steps per `tau0`.
pub const MIN_STEPS_PER_TAU0: usize = 50;
pub const DEFAULT_STEPS_PER_TAU0: usize = 200;
/// Integration tolerance per unit time used as slack in norm invariants.
pub const TOL_INT: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Physical amplitude `eps(t)`.
    Lab,
    /// `u(t) = exp(i omega0 t) eps(t)`.
    Rotating,
}

/// Uniformly sampled amplitude history `eps(j h)`, `j = 0..=J`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    steps_per_tau0: usize,
    omega0_tau0: f64,
    frame: Frame,
    samples: Vec<Complex64>,
    deriv_right: Vec<Complex64>,
    deriv_left: Vec<Complex64>,
}

impl Trajectory {
    pub fn step_h(&self) -> f64 {
        1.0 / self.steps_per_tau0 as f64
    }

    pub fn steps_per_tau0(&self) -> usize {
        self.steps_per_tau0
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn omega0_tau0(&self) -> f64 {
        self.omega0_tau0
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.steps_per_tau0 as f64
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.samples.len().saturating_sub(1))
    }

    pub fn abs2(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Grid index closest to time `t`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t * self.steps_per_tau0 as f64).round().max(0.0) as usize).min(self.len() - 1)
    }

    /// Same trajectory expressed in another frame.
    pub fn to_frame(&self, frame: Frame) -> Trajectory {
        if frame == self.frame {
            return self.clone();
        }
        let sign = match frame {
            Frame::Lab => -1.0,
            Frame::Rotating => 1.0,
        };
        let w = self.omega0_tau0;
        let mut out = self.clone();
        out.frame = frame;
        for j in 0..self.samples.len() {
            let phase = Complex64::from_polar(1.0, sign * w * self.time(j));
            // d/dt (e^{i s w t} y) = e^{i s w t} (y' + i s w y)
            let shift = Complex64::new(0.0, sign * w);
            out.samples[j] = phase * self.samples[j];
            out.deriv_right[j] = phase * (self.deriv_right[j] + shift * self.samples[j]);
            out.deriv_left[j] = phase * (self.deriv_left[j] + shift * self.samples[j]);
        }
        out
    }

    /// Interpolated value in the rotating frame; zero before `t = 0`.
    fn rotating_value_at(&self, t: f64) -> Option<Complex64> {
        if t < 0.0 {
            return Some(ZERO);
        }
        let m = self.steps_per_tau0 as f64;
        let last = self.samples.len() - 1;
        let pos = t * m;
        if pos > last as f64 * (1.0 + 1e-12) + 1e-9 {
            return None;
        }
        if last == 0 {
            return Some(self.rotating_node(0).0);
        }
        let i = (pos.floor() as usize).min(last - 1);
        let theta = (pos - i as f64).clamp(0.0, 1.0);
        let (y0, d0) = self.rotating_node(i);
        let (y1, _) = self.rotating_node(i + 1);
        let d1 = self.rotating_left_deriv(i + 1);
        Some(hermite(y0, d0, y1, d1, self.step_h(), theta))
    }

    fn rotating_node(&self, j: usize) -> (Complex64, Complex64) {
        match self.frame {
            Frame::Rotating => (self.samples[j], self.deriv_right[j]),
            Frame::Lab => {
                let (phase, shift) = self.to_rotating(j);
                (
                    phase * self.samples[j],
                    phase * (self.deriv_right[j] + shift * self.samples[j]),
                )
            }
        }
    }

    fn rotating_left_deriv(&self, j: usize) -> Complex64 {
        match self.frame {
            Frame::Rotating => self.deriv_left[j],
            Frame::Lab => {
                let (phase, shift) = self.to_rotating(j);
                phase * (self.deriv_left[j] + shift * self.samples[j])
            }
        }
    }

    fn to_rotating(&self, j: usize) -> (Complex64, Complex64) {
        let w = self.omega0_tau0;
        (
            Complex64::from_polar(1.0, w * self.time(j)),
            Complex64::new(0.0, w),
        )
    }

    /// Value at arbitrary `t` in this trajectory's frame. Before `t = 0`
    /// the history is zero; past the horizon the result is `None`.
    pub fn value_at(&self, t: f64) -> Option<Complex64> {
        let u = self.rotating_value_at(t)?;
        Some(match self.frame {
            Frame::Rotating => u,
            Frame::Lab => u * Complex64::from_polar(1.0, -self.omega0_tau0 * t),
        })
    }

    /// Physical (lab-frame) amplitude at arbitrary `t`.
    pub fn lab_value_at(&self, t: f64) -> Option<Complex64> {
        let u = self.rotating_value_at(t)?;
        Some(u * Complex64::from_polar(1.0, -self.omega0_tau0 * t))
    }

    /// CSV with header `t_over_tau0,re_eps,im_eps,abs2`, one row every
    /// `stride` grid nodes.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> io::Result<()> {
        writeln!(out, "t_over_tau0,re_eps,im_eps,abs2")?;
        for j in (0..self.samples.len()).step_by(stride.max(1)) {
            let z = self.samples[j];
            writeln!(out, "{},{},{},{}", self.time(j), z.re, z.im, z.norm_sqr())?;
        }
        Ok(())
    }
}

/// Cubic Hermite interpolant on `[0, h]` evaluated at `theta * h`.
pub(crate) fn hermite(
    y0: Complex64,
    d0: Complex64,
    y1: Complex64,
    d1: Complex64,
    h: f64,
    theta: f64,
) -> Complex64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}

/// Gaussian phase kicks `dW_j ~ Normal(0, 2 delta_omega h)` drawn from a
/// seeded ChaCha stream.
#[derive(Clone, Debug)]
pub struct NoiseRealization {
    seed: u64,
    std_dev: f64,
    rng: ChaCha8Rng,
}

impl NoiseRealization {
    /// `dephasing_tau0` is the dephasing rate times `tau0`; `step_h` is the
    /// step in units of `tau0`.
    pub fn new(seed: u64, dephasing_tau0: f64, step_h: f64) -> Self {
        NoiseRealization {
            seed,
            std_dev: (2.0 * dephasing_tau0 * step_h).max(0.0).sqrt(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    pub fn is_silent(&self) -> bool {
        self.std_dev == 0.0
    }

    pub fn next_increment(&mut self) -> f64 {
        if self.is_silent() {
            return 0.0;
        }
        let normal = Normal::new(0.0, self.std_dev).expect("finite standard deviation");
        normal.sample(&mut self.rng)
    }

    pub fn increments(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_increment()).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct DelayTerm {
    target: usize,
    source: usize,
    /// Delay in grid steps.
    shift: usize,
    coefficient: Complex64,
}

/// Linear retarded system in the rotating frame:
/// `u_q' = local_q u_q + sum_terms c * u_source(t - shift h)`.
#[derive(Clone, Debug)]
struct DelaySystem {
    n_atoms: usize,
    local: Vec<Complex64>,
    terms: Vec<DelayTerm>,
    omega0_tau0: f64,
}

impl DelaySystem {
    fn single(config: &SystemConfig, kernel: &DelayKernel, m: usize) -> Self {
        let g = config.gamma_tau0();
        let w0 = config.omega0_tau0();
        let n = config.n_points() as f64;
        let mut local = Complex64::new(-0.5 * n * config.gamma_ext_tau0(), 0.0);
        let mut terms = Vec::new();
        for e in kernel.entries() {
            let c = e.coefficient * g * Complex64::from_polar(1.0, w0 * e.delay as f64);
            if e.delay == 0 {
                local += c;
            } else {
                terms.push(DelayTerm { target: 0, source: 0, shift: e.delay * m, coefficient: c });
            }
        }
        DelaySystem { n_atoms: 1, local: vec![local], terms, omega0_tau0: w0 }
    }

    fn multi(config: &MultiAtomConfig, kernels: &MultiKernel, m: usize) -> Self {
        let q = config.n_atoms();
        let g = config.gamma_tau0();
        let w0 = config.omega0_tau0();
        let mut local: Vec<Complex64> = config
            .atoms()
            .iter()
            .map(|a| {
                let repeats = if config.duplicate_detuning() { 2.0 } else { 1.0 };
                Complex64::new(0.0, -repeats * a.detuning * g)
            })
            .collect();
        let mut terms = Vec::new();
        for target in 0..q {
            for source in 0..q {
                for e in kernels.block(target, source).entries() {
                    let c = e.coefficient * g * Complex64::from_polar(1.0, w0 * e.delay as f64);
                    if e.delay == 0 {
                        debug_assert_eq!(target, source);
                        local[target] += c;
                    } else {
                        terms.push(DelayTerm { target, source, shift: e.delay * m, coefficient: c });
                    }
                }
            }
        }
        DelaySystem { n_atoms: q, local, terms, omega0_tau0: w0 }
    }

    /// Integrates `steps` steps from `initial`. Returns flat storage indexed
    /// `j * n_atoms + q` for values, right and left derivatives.
    fn run(
        &self,
        initial: &[Complex64],
        steps: usize,
        m: usize,
        mut noise: Option<&mut NoiseRealization>,
    ) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let q = self.n_atoms;
        let h = 1.0 / m as f64;
        let len = (steps + 1) * q;
        let mut u = vec![ZERO; len];
        let mut dr = vec![ZERO; len];
        let mut dl = vec![ZERO; len];
        u[..q].copy_from_slice(initial);

        let mut delayed_start = vec![ZERO; q];
        let mut delayed_mid = vec![ZERO; q];
        let mut delayed_end = vec![ZERO; q];
        let mut k = [vec![ZERO; q], vec![ZERO; q], vec![ZERO; q], vec![ZERO; q]];
        let mut stage = vec![ZERO; q];

        for j in 0..steps {
            delayed_start.fill(ZERO);
            delayed_mid.fill(ZERO);
            delayed_end.fill(ZERO);
            for term in &self.terms {
                // the interval [i, i+1] of the source history covers this step
                if j < term.shift {
                    continue;
                }
                let i = j - term.shift;
                let a = u[i * q + term.source];
                let b = u[(i + 1) * q + term.source];
                let mid = (a + b) * 0.5
                    + (dr[i * q + term.source] - dl[(i + 1) * q + term.source]) * (h / 8.0);
                delayed_start[term.target] += term.coefficient * a;
                delayed_mid[term.target] += term.coefficient * mid;
                delayed_end[term.target] += term.coefficient * b;
            }

            let base = j * q;
            for a in 0..q {
                k[0][a] = self.local[a] * u[base + a] + delayed_start[a];
            }
            dr[base..base + q].copy_from_slice(&k[0]);
            for a in 0..q {
                stage[a] = u[base + a] + k[0][a] * (0.5 * h);
            }
            for a in 0..q {
                k[1][a] = self.local[a] * stage[a] + delayed_mid[a];
            }
            for a in 0..q {
                stage[a] = u[base + a] + k[1][a] * (0.5 * h);
            }
            for a in 0..q {
                k[2][a] = self.local[a] * stage[a] + delayed_mid[a];
            }
            for a in 0..q {
                stage[a] = u[base + a] + k[2][a] * h;
            }
            for a in 0..q {
                k[3][a] = self.local[a] * stage[a] + delayed_end[a];
            }
            let next = base + q;
            for a in 0..q {
                u[next + a] =
                    u[base + a] + (k[0][a] + (k[1][a] + k[2][a]) * 2.0 + k[3][a]) * (h / 6.0);
            }
            if let Some(noise) = noise.as_deref_mut() {
                if !noise.is_silent() {
                    for a in 0..q {
                        u[next + a] *= Complex64::from_polar(1.0, -noise.next_increment());
                    }
                }
            }
            for a in 0..q {
                dl[next + a] = self.local[a] * u[next + a] + delayed_end[a];
            }
        }
        // the right derivative at the last node uses the same delayed values
        if steps > 0 {
            dr[steps * q..].copy_from_slice(&dl[steps * q..]);
        } else {
            for a in 0..q {
                dr[a] = self.local[a] * u[a];
                dl[a] = dr[a];
            }
        }
        (u, dr, dl)
    }

    fn trajectory(
        &self,
        atom: usize,
        m: usize,
        frame: Frame,
        data: &(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>),
    ) -> Trajectory {
        let q = self.n_atoms;
        let pick = |v: &Vec<Complex64>| v.iter().skip(atom).step_by(q).copied().collect();
        Trajectory {
            steps_per_tau0: m,
            omega0_tau0: self.omega0_tau0,
            frame: Frame::Rotating,
            samples: pick(&data.0),
            deriv_right: pick(&data.1),
            deriv_left: pick(&data.2),
        }
        .to_frame(frame)
    }
}

fn check_grid(horizon: f64, m: usize) -> Result<usize> {
    if m < MIN_STEPS_PER_TAU0 {
        return Err(Error::StepTooCoarse { got: m, min: MIN_STEPS_PER_TAU0 });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::HorizonNegative(horizon));
    }
    Ok((horizon * m as f64 - 1e-9).ceil().max(0.0) as usize)
}

/// Deterministic integration of one giant atom starting from `eps(0) = 1`.
///
/// `horizon` is in units of `tau0`. Dephasing in `config` is ignored here; see
/// [`integrate_stochastic`].
pub fn integrate(
    config: &SystemConfig,
    kernel: &DelayKernel,
    horizon: f64,
    steps_per_tau0: usize,
    frame: Frame,
) -> Result<Trajectory> {
    config.validate()?;
    let steps = check_grid(horizon, steps_per_tau0)?;
    let system = DelaySystem::single(config, kernel, steps_per_tau0);
    let data = system.run(&[Complex64::new(1.0, 0.0)], steps, steps_per_tau0, None);
    Ok(system.trajectory(0, steps_per_tau0, frame, &data))
}

/// One realization of the dephasing model: after every deterministic step the
/// amplitude picks up the unit-modulus factor `exp(-i dW_j)`.
pub fn integrate_stochastic(
    config: &SystemConfig,
    kernel: &DelayKernel,
    horizon: f64,
    steps_per_tau0: usize,
    noise: &mut NoiseRealization,
    frame: Frame,
) -> Result<Trajectory> {
    config.validate()?;
    let steps = check_grid(horizon, steps_per_tau0)?;
    let system = DelaySystem::single(config, kernel, steps_per_tau0);
    let data = system.run(&[Complex64::new(1.0, 0.0)], steps, steps_per_tau0, Some(noise));
    Ok(system.trajectory(0, steps_per_tau0, frame, &data))
}

/// Ensemble mean of `|eps(t)|^2` on the integration grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAverage {
    pub steps_per_tau0: usize,
    pub n_traj: usize,
    pub mean_abs2: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl EnsembleAverage {
    pub fn time(&self, j: usize) -> f64 {
        j as f64 / self.steps_per_tau0 as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize, gamma_tau0: f64) -> io::Result<()> {
        writeln!(out, "t_over_tau0,gamma_t,mean_abs2,std_err")?;
        for j in (0..self.mean_abs2.len()).step_by(stride.max(1)) {
            let t = self.time(j);
            writeln!(out, "{},{},{},{}", t, t * gamma_tau0, self.mean_abs2[j], self.std_err[j])?;
        }
        Ok(())
    }
}

/// Trajectories per accumulation chunk; fixes the reduction order so results
/// do not depend on thread count.
const ENSEMBLE_CHUNK: usize = 8;

/// Runs `n_traj` realizations with seeds `base_seed..base_seed + n_traj` and
/// returns `summary(trajectory)` for each, in seed order.
pub fn ensemble_map<T, F>(
    config: &SystemConfig,
    kernel: &DelayKernel,
    horizon: f64,
    steps_per_tau0: usize,
    n_traj: usize,
    base_seed: u64,
    exec: Exec,
    summary: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Trajectory) -> T + Sync + Send,
{
    config.validate()?;
    check_grid(horizon, steps_per_tau0)?;
    let dephasing = config.dephasing_tau0();
    let h = 1.0 / steps_per_tau0 as f64;
    exec.map(n_traj, |i| {
        let mut noise = NoiseRealization::new(base_seed.wrapping_add(i as u64), dephasing, h);
        let traj = integrate_stochastic(config, kernel, horizon, steps_per_tau0, &mut noise, Frame::Rotating)
            .expect("grid already validated");
        summary(&traj)
    })
    .into_iter()
    .map(Ok)
    .collect()
}

pub fn ensemble_average(
    config: &SystemConfig,
    kernel: &DelayKernel,
    horizon: f64,
    steps_per_tau0: usize,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleAverage> {
    ensemble_average_with(config, kernel, horizon, steps_per_tau0, n_traj, base_seed, Exec::default())
}

pub fn ensemble_average_with(
    config: &SystemConfig,
    kernel: &DelayKernel,
    horizon: f64,
    steps_per_tau0: usize,
    n_traj: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<EnsembleAverage> {
    if n_traj < 2 {
        return Err(Error::InvalidConfig("ensemble needs at least two trajectories".into()));
    }
    config.validate()?;
    let steps = check_grid(horizon, steps_per_tau0)?;
    if config.dephasing_tau0() == 0.0 {
        // every realization is the deterministic trajectory
        let traj = integrate(config, kernel, horizon, steps_per_tau0, Frame::Rotating)?;
        return Ok(EnsembleAverage {
            steps_per_tau0,
            n_traj,
            mean_abs2: traj.abs2(),
            std_err: vec![0.0; steps + 1],
        });
    }

    let dephasing = config.dephasing_tau0();
    let h = 1.0 / steps_per_tau0 as f64;
    let n_chunks = n_traj.div_ceil(ENSEMBLE_CHUNK);
    let partials = exec.map(n_chunks, |c| {
        let mut sum = vec![0.0; steps + 1];
        let mut sum_sq = vec![0.0; steps + 1];
        let lo = c * ENSEMBLE_CHUNK;
        let hi = (lo + ENSEMBLE_CHUNK).min(n_traj);
        for i in lo..hi {
            let mut noise = NoiseRealization::new(base_seed.wrapping_add(i as u64), dephasing, h);
            let traj = integrate_stochastic(config, kernel, horizon, steps_per_tau0, &mut noise, Frame::Rotating)
                .expect("grid already validated");
            for (j, z) in traj.samples().iter().enumerate() {
                let p = z.norm_sqr();
                sum[j] += p;
                sum_sq[j] += p * p;
            }
        }
        (sum, sum_sq)
    });

    let mut sum = vec![0.0; steps + 1];
    let mut sum_sq = vec![0.0; steps + 1];
    for (s, s2) in partials {
        for j in 0..=steps {
            sum[j] += s[j];
            sum_sq[j] += s2[j];
        }
    }
    let n = n_traj as f64;
    let mean_abs2: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mean_abs2)
        .map(|(s2, mean)| {
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(EnsembleAverage { steps_per_tau0, n_traj, mean_abs2, std_err })
}

/// Integrates the coupled multi-atom system; one trajectory per atom.
pub fn integrate_multi(
    config: &MultiAtomConfig,
    kernels: &MultiKernel,
    horizon: f64,
    steps_per_tau0: usize,
    frame: Frame,
) -> Result<Vec<Trajectory>> {
    config.validate()?;
    if kernels.n_atoms() != config.n_atoms() {
        return Err(Error::InvalidConfig("kernel matrix does not match atom count".into()));
    }
    let steps = check_grid(horizon, steps_per_tau0)?;
    let system = DelaySystem::multi(config, kernels, steps_per_tau0);
    let initial: Vec<Complex64> = config.atoms().iter().map(|a| a.initial).collect();
    let data = system.run(&initial, steps, steps_per_tau0, None);
    Ok((0..config.n_atoms())
        .map(|q| system.trajectory(q, steps_per_tau0, frame, &data))
        .collect())
}

/// Converts a horizon given as `Gamma t` into units of `tau0`.
pub fn horizon_from_gamma_t(gamma_t: f64, gamma_tau0: f64) -> f64 {
    if gamma_tau0 > 0.0 {
        gamma_t / gamma_tau0
    } else {
        gamma_t
    }
}

/// `2 pi / omega` helper for callers working with periods in `tau0` units.
pub fn period_of(omega_tau0: f64) -> f64 {
    2.0 * PI / omega_tau0.abs()
}
