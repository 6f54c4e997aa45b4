//! Characteristic function, pole search and bound-state conditions.
//!
//! With `z = exp(-s tau0)` the Laplace-domain amplitude has poles at the zeros
//! of
//!
//! ```text
//! F(s) = s + i omega0 + N Gamma_ext / 2 + (Gamma / 2) [S_d(z) - r S_m(z)]
//! S_d(z) = sum_{m,n} z^|m-n|,   S_m(z) = sum_{m,n} z^(m+n)
//! ```
//!
//! All quantities are dimensionless (`s` in units of `1 / tau0`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::SystemConfig;
use crate::{Error, Exec, Result};

/// Tolerance on bound-state conditions, in units of pi.
pub const TOL_COND: f64 = 1e-6;
/// Residual below which a Newton iterate is accepted as a pole.
pub const POLE_RESIDUAL_TOL: f64 = 1e-10;
/// Poles closer than this (in `1 / tau0`) are merged.
pub const POLE_DEDUP_TOL: f64 = 1e-6;

/// Below this `|1 - z|` the closed-form sums lose digits to cancellation and
/// the pair-count polynomials are evaluated directly instead.
const NEAR_SINGULAR: f64 = 0.5;

/// Direct and mirror sums with their `z`-derivatives.
#[derive(Clone, Copy, Debug)]
struct Sums {
    direct: Complex64,
    direct_dz: Complex64,
    mirror: Complex64,
    mirror_dz: Complex64,
}

fn sums(z: Complex64, n: usize) -> Sums {
    if (Complex64::new(1.0, 0.0) - z).norm() < NEAR_SINGULAR {
        sums_polynomial(z, n)
    } else {
        sums_closed(z, n)
    }
}

fn sums_closed(z: Complex64, n: usize) -> Sums {
    let one = Complex64::new(1.0, 0.0);
    let nf = n as f64;
    let zn = z.powu(n as u32);
    let w = one - z;
    let w2 = w * w;

    let a = nf - (nf + 1.0) * z + zn * z;
    let a_dz = -(nf + 1.0) * (one - zn);
    let direct = 2.0 * a / w2 - nf;
    let direct_dz = 2.0 * (a_dz * w + 2.0 * a) / (w2 * w);

    // S_m = G^2 with G = sum_{m=1}^N z^m = z (1 - z^N) / (1 - z)
    let c = one - zn;
    let c_dz = if n == 0 { Complex64::new(0.0, 0.0) } else { -nf * z.powu(n as u32 - 1) };
    let geo = z * c / w;
    let geo_dz = (c + z * c_dz * w) / w2;
    Sums {
        direct,
        direct_dz,
        mirror: geo * geo,
        mirror_dz: 2.0 * geo * geo_dz,
    }
}

/// Horner evaluation of a polynomial given by `coeff(d)` for `d` in
/// `0..=degree`, returning the value and first derivative.
fn horner(z: Complex64, degree: usize, coeff: impl Fn(usize) -> f64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(coeff(degree), 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for d in (0..degree).rev() {
        dp = dp * z + p;
        p = p * z + coeff(d);
    }
    (p, dp)
}

fn sums_polynomial(z: Complex64, n: usize) -> Sums {
    let (direct, direct_dz) = horner(z, n - 1, |d| if d == 0 { n as f64 } else { 2.0 * (n - d) as f64 });
    let (mirror, mirror_dz) = horner(z, 2 * n, |d| {
        if d < 2 {
            0.0
        } else {
            (d - 1).min(2 * n + 1 - d) as f64
        }
    });
    Sums { direct, direct_dz, mirror, mirror_dz }
}

/// `F(s)`; zeros are the poles of the atomic amplitude.
pub fn char_residual(s: Complex64, config: &SystemConfig) -> Complex64 {
    let z = (-s).exp();
    let sm = sums(z, config.n_points());
    let g = config.gamma_tau0();
    let r = config.mirror_amplitude();
    let local = Complex64::new(0.5 * config.n_points() as f64 * config.gamma_ext_tau0(), config.omega0_tau0());
    s + local + 0.5 * g * (sm.direct - r * sm.mirror)
}

/// `dF/ds`. At a simple pole `s_k` the residue weight is `1 / F'(s_k)`.
pub fn char_derivative(s: Complex64, config: &SystemConfig) -> Complex64 {
    let z = (-s).exp();
    let sm = sums(z, config.n_points());
    let g = config.gamma_tau0();
    let r = config.mirror_amplitude();
    // dz/ds = -z
    1.0 - 0.5 * g * z * (sm.direct_dz - r * sm.mirror_dz)
}

/// Residue weight `1 / F'(s)` of a simple pole.
pub fn residue_weight(s: Complex64, config: &SystemConfig) -> Complex64 {
    1.0 / char_derivative(s, config)
}

/// Rectangle of the complex `s` plane seeded with a regular Newton grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub seeds_re: usize,
    pub seeds_im: usize,
}

impl SearchBox {
    /// `Re s` in `[-3 Gamma, 1e-6]`, `Im s` within `6 pi` of `-omega0`,
    /// seeded on a 60 x 60 grid.
    pub fn default_for(config: &SystemConfig) -> Self {
        let w0 = config.omega0_tau0();
        SearchBox {
            re_min: -3.0 * config.gamma_tau0().max(config.gamma_ext_tau0()).max(1e-3),
            re_max: 1e-6,
            im_min: -w0 - 6.0 * PI,
            im_max: -w0 + 6.0 * PI,
            seeds_re: 60,
            seeds_im: 60,
        }
    }

    pub fn with_density(mut self, seeds_re: usize, seeds_im: usize) -> Self {
        self.seeds_re = seeds_re;
        self.seeds_im = seeds_im;
        self
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.re_min > self.re_max || self.im_min > self.im_max {
            return Err(Error::InvalidGrid("search box bounds must be finite and ordered"));
        }
        if self.seeds_re == 0 || self.seeds_im == 0 {
            return Err(Error::InvalidGrid("search box needs at least one seed per axis"));
        }
        Ok(())
    }

    fn seed(&self, i: usize, j: usize) -> Complex64 {
        let lerp = |lo: f64, hi: f64, k: usize, n: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        Complex64::new(
            lerp(self.re_min, self.re_max, i, self.seeds_re),
            lerp(self.im_min, self.im_max, j, self.seeds_im),
        )
    }

    fn contains(&self, s: Complex64, margin: f64) -> bool {
        s.re >= self.re_min - margin
            && s.re <= self.re_max + margin
            && s.im >= self.im_min - margin
            && s.im <= self.im_max + margin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleSearch {
    /// Sorted by real part descending, then imaginary part ascending.
    pub poles: Vec<Complex64>,
    /// Seeds whose Newton iteration did not converge inside the box.
    pub failed_seeds: usize,
}

/// Newton iteration from `seed`; `None` on non-convergence.
pub fn refine_pole(seed: Complex64, config: &SystemConfig) -> Option<Complex64> {
    let mut s = seed;
    let mut f = char_residual(s, config);
    for _ in 0..80 {
        let df = char_derivative(s, config);
        if df.norm() == 0.0 || !df.is_finite() {
            return None;
        }
        let step = f / df;
        // damp wild steps so the iterate stays near the seed region
        let step = if step.norm() > PI { step * (PI / step.norm()) } else { step };
        s -= step;
        if !s.is_finite() {
            return None;
        }
        f = char_residual(s, config);
        if step.norm() <= 1e-15 * s.norm().max(1.0) {
            break;
        }
    }
    (f.norm() < POLE_RESIDUAL_TOL).then_some(s)
}

pub fn find_poles(config: &SystemConfig, search: &SearchBox) -> Result<PoleSearch> {
    find_poles_with(config, search, Exec::default())
}

pub fn find_poles_with(config: &SystemConfig, search: &SearchBox, exec: Exec) -> Result<PoleSearch> {
    config.validate()?;
    search.validate()?;
    let margin = 1e-8;
    let rows = exec.map(search.seeds_re, |i| {
        (0..search.seeds_im)
            .map(|j| refine_pole(search.seed(i, j), config).filter(|s| search.contains(*s, margin)))
            .collect::<Vec<_>>()
    });
    let mut poles: Vec<Complex64> = Vec::new();
    let mut failed_seeds = 0;
    for hit in rows.into_iter().flatten() {
        match hit {
            Some(s) => {
                if poles.iter().all(|p| (p - s).norm() >= POLE_DEDUP_TOL) {
                    poles.push(s);
                }
            }
            None => failed_seeds += 1,
        }
    }
    poles.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    if failed_seeds > 0 {
        log::debug!("{failed_seeds} Newton seeds did not converge");
    }
    Ok(PoleSearch { poles, failed_seeds })
}

/// Which period the bound-mode frequency `2 k pi / P` refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `P = N`.
    DivN,
    /// `P = N + 1`.
    DivNPlus1,
}

impl Variant {
    pub fn period(self, n_points: usize) -> usize {
        match self {
            Variant::DivN => n_points,
            Variant::DivNPlus1 => n_points + 1,
        }
    }
}

/// Baseline of the central mode in three-mode coexistence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    /// `omega0 tau0 = 2 k0 pi`.
    Even,
    /// `omega0 tau0 = (2 k0 + 1) pi`.
    Odd,
}

fn cot_of(k: i64, period: usize) -> Result<f64> {
    if period == 0 || k.rem_euclid(period as i64) == 0 {
        return Err(Error::CotangentPole { k, period });
    }
    let reduced = k.rem_euclid(period as i64) as f64;
    Ok(1.0 / (reduced * PI / period as f64).tan())
}

/// `omega0 tau0` at which `s = -i 2 k pi / (P tau0)` is a pole:
/// `2 k pi / P - (P Gamma tau0 / 2) cot(k pi / P)`.
pub fn bound_state_frequency(n_points: usize, k: i64, gamma_tau0: f64, variant: Variant) -> Result<f64> {
    let p = variant.period(n_points);
    let cot = cot_of(k, p)?;
    let pf = p as f64;
    Ok(2.0 * k as f64 * PI / pf - 0.5 * pf * gamma_tau0 * cot)
}

/// `(omega0 tau0, Gamma tau0)` at which modes `k1` and `k2` are both bound.
pub fn two_mode_parameters(n_points: usize, k1: i64, k2: i64, variant: Variant) -> Result<(f64, f64)> {
    if k1 == k2 {
        return Err(Error::Infeasible(format!("degenerate pair k1 = k2 = {k1}")));
    }
    let p = variant.period(n_points);
    let c1 = cot_of(k1, p)?;
    let c2 = cot_of(k2, p)?;
    if c1 == c2 {
        return Err(Error::Infeasible(format!("k1 = {k1} and k2 = {k2} are congruent modulo {p}")));
    }
    let pf = p as f64;
    let gamma = 4.0 * (k1 - k2) as f64 * PI / (pf * pf) / (c1 - c2);
    let omega = 2.0 * k1 as f64 * PI / pf - 0.5 * pf * gamma * c1;
    if !(gamma > 0.0) || !(omega > 0.0) {
        return Err(Error::Infeasible(format!(
            "pair ({k1}, {k2}) gives omega0 tau0 = {omega}, Gamma tau0 = {gamma}"
        )));
    }
    Ok((omega, gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeParameters {
    pub omega0_tau0: f64,
    pub gamma_tau0: f64,
    /// Side-mode indices with `k1 < k2`.
    pub k1: i64,
    pub k2: i64,
    /// Bound frequencies in ascending order; the middle one is `omega0`.
    pub frequencies: [f64; 3],
}

/// Parameters at which a central mode at `omega0` coexists with two side
/// modes `2 k pi / P` placed symmetrically `q` steps away from a multiple of
/// `P`.
///
/// For [`Parity::Even`] the side modes are `P k0 +- q` around `2 k0 pi`. For
/// [`Parity::Odd`] they are `P (k0 + 1) + q` and `P k0 - q`, which straddle
/// `(2 k0 + 1) pi` symmetrically.
pub fn three_mode_parameters(
    n_points: usize,
    k0: i64,
    q: i64,
    parity: Parity,
    variant: Variant,
) -> Result<ThreeModeParameters> {
    let p = variant.period(n_points);
    let pi_ = p as i64;
    if q < 1 || 2 * q >= pi_ {
        return Err(Error::Infeasible(format!("need 1 <= q < P / 2, got q = {q}, P = {p}")));
    }
    let pf = p as f64;
    let tan = (q as f64 * PI / pf).tan();
    let (upper, lower, omega0, gamma) = match parity {
        Parity::Even => (
            pi_ * k0 + q,
            pi_ * k0 - q,
            2.0 * k0 as f64 * PI,
            4.0 * q as f64 * PI * tan / (pf * pf),
        ),
        Parity::Odd => (
            pi_ * (k0 + 1) + q,
            pi_ * k0 - q,
            (2 * k0 + 1) as f64 * PI,
            2.0 * PI * (pf + 2.0 * q as f64) * tan / (pf * pf),
        ),
    };
    if lower < 1 || !(gamma > 0.0) || !(omega0 > 0.0) {
        return Err(Error::Infeasible(format!(
            "k0 = {k0}, q = {q} gives side modes ({lower}, {upper})"
        )));
    }
    let omega = |k: i64| 2.0 * k as f64 * PI / pf;
    Ok(ThreeModeParameters {
        omega0_tau0: omega0,
        gamma_tau0: gamma,
        k1: lower,
        k2: upper,
        frequencies: [omega(lower), omega0, omega(upper)],
    })
}

/// Which bound condition produced a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeSource {
    /// `omega0 tau0 = 2 k pi`.
    Cond2kPi,
    /// `omega0 tau0 = (2 k + 1) pi`.
    CondOddPi,
    /// Cotangent condition with period `N`.
    CondN,
    /// Cotangent condition with period `N + 1`.
    CondNPlus1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    Decaying,
    OneMode,
    TwoMode,
    ThreeMode,
    /// More than three coexisting bound modes.
    ManyMode,
}

impl CaseLabel {
    pub fn from_count(count: usize) -> Self {
        match count {
            0 => CaseLabel::Decaying,
            1 => CaseLabel::OneMode,
            2 => CaseLabel::TwoMode,
            3 => CaseLabel::ThreeMode,
            _ => CaseLabel::ManyMode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega_tau0: f64,
    /// Residue weight `A_k`.
    pub weight: Complex64,
    pub source: ModeSource,
    /// Mode index `k` of the condition that produced it.
    pub k: i64,
}

impl Mode {
    /// Pole position `s = -i omega`.
    pub fn pole(&self) -> Complex64 {
        Complex64::new(0.0, -self.omega_tau0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    /// Ascending in frequency.
    pub modes: Vec<Mode>,
    pub case_label: CaseLabel,
}

impl ModeSet {
    pub fn from_modes(mut modes: Vec<Mode>) -> Self {
        modes.sort_by(|a, b| a.omega_tau0.total_cmp(&b.omega_tau0));
        let case_label = CaseLabel::from_count(modes.len());
        ModeSet { modes, case_label }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn sources(&self) -> Vec<ModeSource> {
        self.modes.iter().map(|m| m.source).collect()
    }
}

fn scan_window(omega0: f64, gamma: f64, period: usize) -> (i64, i64) {
    let pf = period as f64;
    // frequencies farther than 4 pi from omega0 need |cot| > 8 pi / (P Gamma);
    // a larger coupling widens the window accordingly
    let half = 4.0 * PI + 0.5 * pf * gamma * (pf / PI).max(1.0);
    let lo = ((omega0 - half) * pf / (2.0 * PI)).floor().max(1.0) as i64;
    let hi = ((omega0 + half) * pf / (2.0 * PI)).ceil().max(1.0) as i64;
    (lo, hi)
}

/// Tests every bound condition in a window of mode indices around `omega0`
/// and returns the surviving modes with their residue weights.
///
/// A candidate is kept when its condition holds to [`TOL_COND`] (in units of
/// pi) and the full characteristic function, including mirror loss and
/// external loss, vanishes there to the same tolerance.
pub fn classify(config: &SystemConfig) -> ModeSet {
    let w0 = config.omega0_tau0();
    let g = config.gamma_tau0();
    let n = config.n_points();
    let mut candidates: Vec<(f64, ModeSource, i64)> = Vec::new();

    let k_even = (w0 / (2.0 * PI)).round() as i64;
    if k_even >= 1 && (w0 / PI - 2.0 * k_even as f64).abs() <= TOL_COND {
        candidates.push((2.0 * k_even as f64 * PI, ModeSource::Cond2kPi, k_even));
    }
    let k_odd = ((w0 / PI - 1.0) / 2.0).round() as i64;
    if k_odd >= 0 && (w0 / PI - (2 * k_odd + 1) as f64).abs() <= TOL_COND {
        candidates.push(((2 * k_odd + 1) as f64 * PI, ModeSource::CondOddPi, k_odd));
    }
    let mut rwa_candidates = Vec::new();
    for (variant, source) in [(Variant::DivN, ModeSource::CondN), (Variant::DivNPlus1, ModeSource::CondNPlus1)] {
        let p = variant.period(n);
        let (lo, hi) = scan_window(w0, g, p);
        for k in lo..=hi {
            let Ok(w) = bound_state_frequency(n, k, g, variant) else { continue };
            if ((w - w0) / PI).abs() <= TOL_COND {
                candidates.push((2.0 * k as f64 * PI / p as f64, source, k));
                rwa_candidates.push((k, p));
            }
        }
    }

    let mut modes: Vec<Mode> = Vec::new();
    for (omega, source, k) in candidates {
        if modes.iter().any(|m| (m.omega_tau0 - omega).abs() <= TOL_COND * PI) {
            continue;
        }
        let s = Complex64::new(0.0, -omega);
        if char_residual(s, config).norm() > TOL_COND * PI {
            continue;
        }
        modes.push(Mode { omega_tau0: omega, weight: residue_weight(s, config), source, k });
    }
    config.rwa_warnings(&rwa_candidates);
    ModeSet::from_modes(modes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, w0: f64, g: f64) -> SystemConfig {
        SystemConfig::new(n, w0, g).unwrap()
    }

    fn brute(s: Complex64, c: &SystemConfig) -> Complex64 {
        let n = c.n_points() as i64;
        let r = c.mirror_amplitude();
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 1..=n {
            for k in 1..=n {
                acc += (-s * (m - k).abs() as f64).exp() - r * (-s * (m + k) as f64).exp();
            }
        }
        s + Complex64::new(0.5 * c.n_points() as f64 * c.gamma_ext_tau0(), c.omega0_tau0())
            + 0.5 * c.gamma_tau0() * acc
    }

    #[test]
    fn vanishes_on_even_and_odd_baselines() {
        for n in 1..8 {
            let c = cfg(n, 2.0 * PI, 0.3);
            assert!(char_residual(Complex64::new(0.0, -2.0 * PI), &c).norm() < 1e-12);
        }
        let c = cfg(3, 3.0 * PI, 0.05 * PI);
        assert!(char_residual(Complex64::new(0.0, -3.0 * PI), &c).norm() < 1e-12);
    }

    #[test]
    fn uncoupled_residual_is_linear() {
        let c = cfg(4, 1.3, 0.0);
        let s = Complex64::new(0.25, -1.3);
        assert!((char_residual(s, &c) - 0.25).norm() < 1e-15);
        assert_eq!(char_derivative(s, &c), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn branches_agree_across_the_switch() {
        for n in [1, 2, 7, 30] {
            for z in [Complex64::from_polar(1.0 - 0.499, 0.0), Complex64::from_polar(1.2, 0.45), Complex64::new(0.6, 0.3)] {
                let a = sums_closed(z, n);
                let b = sums_polynomial(z, n);
                let scale = (n * n) as f64 * z.norm().max(1.0).powi(2 * n as i32);
                for (x, y) in [(a.direct, b.direct), (a.mirror, b.mirror), (a.direct_dz, b.direct_dz), (a.mirror_dz, b.mirror_dz)] {
                    assert!((x - y).norm() <= 1e-12 * scale * n as f64, "n = {n}, z = {z}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let c = cfg(5, 2.7, 0.4).with_reflectivity(0.8).unwrap();
        for s in [Complex64::new(-0.1, -2.0), Complex64::new(-0.01, -6.28), Complex64::new(0.0, -0.01)] {
            let h = 1e-6;
            let fd = (char_residual(s + h, &c) - char_residual(s - h, &c)) / (2.0 * h);
            assert!((fd - char_derivative(s, &c)).norm() < 1e-7);
        }
    }

    #[test]
    fn removable_singularity_is_smooth() {
        let c = cfg(6, 2.0 * PI, 0.2);
        let at = char_residual(Complex64::new(0.0, -2.0 * PI), &c);
        let near = char_residual(Complex64::new(1e-9, -2.0 * PI + 1e-9), &c);
        assert!(at.norm() < 1e-13);
        assert!((near - at).norm() < 1e-7);
        assert!(brute(Complex64::new(1e-9, -2.0 * PI), &c).norm() < 1e-7);
    }

    #[test]
    fn caption_frequencies() {
        let w = bound_state_frequency(3, 4, 0.05 * PI, Variant::DivN).unwrap();
        assert!((w / PI - 2.6234).abs() < 5e-5);
        let w = bound_state_frequency(3, 3, 0.05 * PI, Variant::DivNPlus1).unwrap();
        assert!((w / PI - 1.6).abs() < 1e-12);
        let w = bound_state_frequency(4, 3, 0.0, Variant::DivN).unwrap();
        assert_eq!(w, 2.0 * 3.0 * PI / 4.0);
        assert_eq!(
            bound_state_frequency(3, 6, 0.1, Variant::DivN),
            Err(Error::CotangentPole { k: 6, period: 3 })
        );
    }

    #[test]
    fn bound_frequencies_are_zeros() {
        for (n, k, variant) in [(3, 4, Variant::DivN), (3, 3, Variant::DivNPlus1), (6, 23, Variant::DivN), (5, 7, Variant::DivNPlus1)] {
            let g = 0.07 * PI;
            let c = cfg(n, bound_state_frequency(n, k, g, variant).unwrap(), g);
            let omega = 2.0 * k as f64 * PI / variant.period(n) as f64;
            assert!(char_residual(Complex64::new(0.0, -omega), &c).norm() < 1e-9);
        }
    }

    #[test]
    fn two_mode_caption_values() {
        let (w, g) = two_mode_parameters(6, 23, 26, Variant::DivN).unwrap();
        assert!((w / PI - 8.4167).abs() < 5e-5 && (g / PI - 0.1443).abs() < 5e-5);
        let (w, g) = two_mode_parameters(6, 27, 30, Variant::DivNPlus1).unwrap();
        assert!((w / PI - 8.3336).abs() < 5e-5 && (g / PI - 0.0852).abs() < 5e-5);
        assert!(matches!(two_mode_parameters(6, 5, 5, Variant::DivN), Err(Error::Infeasible(_))));
        assert!(matches!(two_mode_parameters(6, 5, 11, Variant::DivN), Err(Error::Infeasible(_))));
    }

    #[test]
    fn three_mode_caption_values() {
        let t = three_mode_parameters(5, 4, 1, Parity::Even, Variant::DivN).unwrap();
        assert!((t.gamma_tau0 / PI - 0.1162).abs() < 5e-5);
        assert_eq!((t.k1, t.k2), (19, 21));
        assert!((t.omega0_tau0 - 8.0 * PI).abs() < 1e-12);
        let t = three_mode_parameters(6, 4, 1, Parity::Even, Variant::DivN).unwrap();
        assert!((t.gamma_tau0 / PI - 0.0642).abs() < 5e-5);
        assert_eq!((t.k1, t.k2), (23, 25));
        let t = three_mode_parameters(8, 8, 1, Parity::Odd, Variant::DivN).unwrap();
        assert_eq!((t.k1, t.k2), (63, 73));
        assert!((t.gamma_tau0 / PI - 0.1294).abs() < 5e-5);
        assert!((t.omega0_tau0 - 17.0 * PI).abs() < 1e-12);
        assert!(three_mode_parameters(5, 4, 3, Parity::Even, Variant::DivN).is_err());
        assert!(three_mode_parameters(5, 0, 1, Parity::Even, Variant::DivN).is_err());
    }

    #[test]
    fn three_mode_frequencies_are_zeros() {
        for parity in [Parity::Even, Parity::Odd] {
            for variant in [Variant::DivN, Variant::DivNPlus1] {
                for (n, k0, q) in [(5, 4, 1), (6, 4, 2), (8, 8, 1), (9, 3, 4)] {
                    let Ok(t) = three_mode_parameters(n, k0, q, parity, variant) else { continue };
                    let c = cfg(n, t.omega0_tau0, t.gamma_tau0);
                    for w in t.frequencies {
                        assert!(char_residual(Complex64::new(0.0, -w), &c).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn classify_reference_cases() {
        let c = cfg(3, 2.0 * PI, 0.05 * PI);
        let set = classify(&c);
        assert_eq!(set.case_label, CaseLabel::OneMode);
        assert_eq!(set.sources(), vec![ModeSource::Cond2kPi]);
        let a = 1.0 / (1.0 + 14.0 * 0.05 * PI);
        assert!((set.modes[0].weight - a).norm() < 1e-12);

        let (w, g) = two_mode_parameters(6, 23, 26, Variant::DivN).unwrap();
        let set = classify(&cfg(6, w, g));
        assert_eq!(set.case_label, CaseLabel::TwoMode);
        assert_eq!(set.sources(), vec![ModeSource::CondN, ModeSource::CondN]);
        assert_eq!(set.modes.iter().map(|m| m.k).collect::<Vec<_>>(), vec![23, 26]);

        let t = three_mode_parameters(5, 4, 1, Parity::Even, Variant::DivN).unwrap();
        let set = classify(&cfg(5, t.omega0_tau0, t.gamma_tau0));
        assert_eq!(set.case_label, CaseLabel::ThreeMode);
        assert_eq!(set.sources(), vec![ModeSource::CondN, ModeSource::Cond2kPi, ModeSource::CondN]);
    }

    #[test]
    fn classify_drops_modes_killed_by_loss() {
        let c = cfg(3, 2.0 * PI, 0.05 * PI).with_reflectivity(0.9).unwrap();
        assert_eq!(classify(&c).case_label, CaseLabel::Decaying);
        let (w, g) = two_mode_parameters(6, 23, 26, Variant::DivN).unwrap();
        let lossy = cfg(6, w, g).with_reflectivity(0.9).unwrap();
        assert_eq!(classify(&lossy).case_label, CaseLabel::TwoMode);
        let ext = lossy.with_gamma_ext_ratio(0.1).unwrap();
        assert_eq!(classify(&ext).case_label, CaseLabel::Decaying);
        assert_eq!(classify(&cfg(3, 2.3, 0.1)).case_label, CaseLabel::Decaying);
    }

    #[test]
    fn poles_of_uncoupled_atom() {
        let c = cfg(3, 2.5, 0.0);
        let found = find_poles(&c, &SearchBox::default_for(&c).with_density(10, 10)).unwrap();
        assert_eq!(found.poles.len(), 1);
        assert!((found.poles[0] - Complex64::new(0.0, -2.5)).norm() < 1e-14);
    }

    #[test]
    fn poles_include_bound_mode_and_are_stable() {
        let c = cfg(3, 2.0 * PI, 0.05 * PI);
        let found = find_poles(&c, &SearchBox::default_for(&c)).unwrap();
        let bound = Complex64::new(0.0, -2.0 * PI);
        assert!(found.poles.iter().any(|p| (p - bound).norm() < 1e-6));
        for p in &found.poles {
            assert!(p.re < 1e-10);
            assert!(char_residual(*p, &c).norm() < POLE_RESIDUAL_TOL);
        }
        let seq = find_poles_with(&c, &SearchBox::default_for(&c), Exec::Sequential).unwrap();
        assert_eq!(seq, found);
    }

    #[test]
    fn invalid_box_rejected() {
        let c = cfg(3, 2.0 * PI, 0.1);
        let mut b = SearchBox::default_for(&c);
        b.re_min = 1.0;
        assert!(matches!(find_poles(&c, &b), Err(Error::InvalidGrid(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn closed_form_matches_double_sum(
                n in 1usize..=50,
                re in -0.5f64..0.05,
                im in -40.0f64..40.0,
                w0 in 0.0f64..30.0,
                g in 0.0f64..1.0,
                refl in 0.0f64..=1.0,
                ext in 0.0f64..0.5,
            ) {
                let c = cfg(n, w0, g).with_reflectivity(refl).unwrap().with_gamma_ext_ratio(ext).unwrap();
                let s = Complex64::new(re, im);
                let a = char_residual(s, &c);
                let b = brute(s, &c);
                // relative to the magnitude of the summed terms
                let z = (-s).exp().norm().max(1.0);
                let scale = s.norm() + c.omega0_tau0() + g * (n * n) as f64 * z.powi(2 * n as i32) + 1.0;
                prop_assert!((a - b).norm() <= 1e-12 * scale, "{a} vs {b}");
            }

            #[test]
            fn split_into_real_and_imaginary_parts(
                n in 1usize..=20,
                x in 0.01f64..12.0,
                w0 in 0.0f64..20.0,
                g in 0.0f64..1.0,
            ) {
                prop_assume!((x / (2.0 * PI) - (x / (2.0 * PI)).round()).abs() > 1e-3);
                let c = cfg(n, w0, g);
                let f = char_residual(Complex64::new(0.0, -x), &c);
                let nf = n as f64;
                let re = g * (nf * x / 2.0).sin().powi(2) * ((nf + 1.0) * x / 2.0).sin().powi(2)
                    / (x / 2.0).sin().powi(2);
                let im = g * x.sin() + 2.0 * nf * g * x.sin() - 2.0 * g * (nf * x).sin()
                    - 2.0 * g * ((nf + 1.0) * x).sin() + g * ((2.0 * nf + 1.0) * x).sin()
                    - 4.0 * (x - w0) * (1.0 - x.cos());
                let scale = 1.0 + g * nf * nf / (x / 2.0).sin().powi(2) + (x - w0).abs();
                prop_assert!((f.re - re).abs() <= 1e-12 * scale);
                prop_assert!((4.0 * (1.0 - x.cos()) * f.im - im).abs() <= 1e-12 * 4.0 * scale);
            }
        }
    }
}
