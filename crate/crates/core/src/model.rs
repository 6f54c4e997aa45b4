//! Configuration types and the reduction of the coupling-point double sums
//! into flat delay kernels.
//!
//! Every pair of coupling points `(m, n)` contributes twice to the atomic
//! equation of motion: once through the direct path with retardation
//! `|m - n| * tau0` and once through the mirror with retardation
//! `(m + n) * tau0`. A [`DelayKernel`] collects those contributions by delay.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Threshold on `P * Gamma * |cot(k pi / P)| / (2 omega0)` above which the
/// rotating-wave approximation is flagged as questionable.
pub const RWA_WARN_THRESHOLD: f64 = 0.1;

/// Physical parameters of a single giant atom.
///
/// Frequencies are dimensionless products with `tau0`; loss and dephasing
/// rates are ratios to the waveguide emission rate `Gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    n_points: usize,
    omega0_tau0: f64,
    gamma_tau0: f64,
    reflectivity: f64,
    gamma_ext_ratio: f64,
    dephasing_ratio: f64,
}

impl SystemConfig {
    /// Ideal mirror, no external loss, no dephasing.
    pub fn new(n_points: usize, omega0_tau0: f64, gamma_tau0: f64) -> Result<Self> {
        let config = SystemConfig {
            n_points,
            omega0_tau0,
            gamma_tau0,
            reflectivity: 1.0,
            gamma_ext_ratio: 0.0,
            dephasing_ratio: 0.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_reflectivity(mut self, reflectivity: f64) -> Result<Self> {
        self.reflectivity = reflectivity;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma_ext_ratio(mut self, ratio: f64) -> Result<Self> {
        self.gamma_ext_ratio = ratio;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dephasing_ratio(mut self, ratio: f64) -> Result<Self> {
        self.dephasing_ratio = ratio;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_points(mut self, n_points: usize) -> Result<Self> {
        self.n_points = n_points;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::InvalidConfig("n_points must be at least 1".into()));
        }
        if !self.omega0_tau0.is_finite() {
            return Err(Error::InvalidConfig("omega0_tau0 must be finite".into()));
        }
        if !(self.gamma_tau0.is_finite() && self.gamma_tau0 >= 0.0) {
            return Err(Error::InvalidConfig("gamma_tau0 must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(Error::InvalidConfig("reflectivity must lie in [0, 1]".into()));
        }
        if !(self.gamma_ext_ratio.is_finite() && self.gamma_ext_ratio >= 0.0) {
            return Err(Error::InvalidConfig("gamma_ext_ratio must be >= 0".into()));
        }
        if !(self.dephasing_ratio.is_finite() && self.dephasing_ratio >= 0.0) {
            return Err(Error::InvalidConfig("dephasing_ratio must be >= 0".into()));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn omega0_tau0(&self) -> f64 {
        self.omega0_tau0
    }

    pub fn gamma_tau0(&self) -> f64 {
        self.gamma_tau0
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn gamma_ext_ratio(&self) -> f64 {
        self.gamma_ext_ratio
    }

    pub fn dephasing_ratio(&self) -> f64 {
        self.dephasing_ratio
    }

    /// External loss rate times `tau0`.
    pub fn gamma_ext_tau0(&self) -> f64 {
        self.gamma_ext_ratio * self.gamma_tau0
    }

    /// Dephasing rate times `tau0`.
    pub fn dephasing_tau0(&self) -> f64 {
        self.dephasing_ratio * self.gamma_tau0
    }

    /// Mirror reflection amplitude `r = R + i sqrt(R (1 - R))`, so `|r|^2 = R`.
    pub fn mirror_amplitude(&self) -> Complex64 {
        mirror_amplitude(self.reflectivity)
    }

    /// True for a perfect mirror without external loss or dephasing.
    pub fn is_ideal(&self) -> bool {
        self.reflectivity == 1.0 && self.gamma_ext_ratio == 0.0 && self.dephasing_ratio == 0.0
    }

    /// Relative frequency shift `|omega_k - omega0| / omega0` of the bound mode
    /// `k` with period `period` (either `N` or `N + 1`).
    pub fn rwa_parameter(&self, k: i64, period: usize) -> f64 {
        let cot = 1.0 / (k as f64 * PI / period as f64).tan();
        (period as f64 * self.gamma_tau0 * cot / (2.0 * self.omega0_tau0)).abs()
    }

    /// Logs a warning for every candidate mode whose rotating-wave parameter
    /// reaches [`RWA_WARN_THRESHOLD`] and returns the offending `(k, period)`.
    pub fn rwa_warnings(&self, candidates: &[(i64, usize)]) -> Vec<(i64, usize)> {
        candidates
            .iter()
            .copied()
            .filter(|&(k, period)| {
                let p = self.rwa_parameter(k, period);
                let flagged = p >= RWA_WARN_THRESHOLD;
                if flagged {
                    log::warn!(
                        "rotating-wave approximation questionable for k = {k} (period {period}): \
                         shift ratio {p:.3}"
                    );
                }
                flagged
            })
            .collect()
    }
}

pub(crate) fn mirror_amplitude(reflectivity: f64) -> Complex64 {
    Complex64::new(reflectivity, (reflectivity * (1.0 - reflectivity)).max(0.0).sqrt())
}

/// How the off-diagonal atom-atom blocks of the multi-atom system are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingMode {
    /// Each atom only sees its own coupling points (block-diagonal kernel).
    AsPrinted,
    /// Photons emitted at any point of atom `q'` are reabsorbed by atom `q`.
    FullCrossCoupling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub n_points: usize,
    /// Detuning `delta_q` in units of `Gamma`.
    pub detuning: f64,
    pub initial: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiAtomConfig {
    atoms: Vec<AtomSpec>,
    omega0_tau0: f64,
    gamma_tau0: f64,
    reflectivity: f64,
    coupling_mode: CouplingMode,
    duplicate_detuning: bool,
}

impl MultiAtomConfig {
    pub fn new(
        atoms: Vec<AtomSpec>,
        omega0_tau0: f64,
        gamma_tau0: f64,
        reflectivity: f64,
        coupling_mode: CouplingMode,
    ) -> Result<Self> {
        let config = MultiAtomConfig {
            atoms,
            omega0_tau0,
            gamma_tau0,
            reflectivity,
            coupling_mode,
            duplicate_detuning: false,
        };
        config.validate()?;
        Ok(config)
    }

    /// Applies the detuning a second time, reproducing the printed equation
    /// literally. Only meaningful with [`CouplingMode::AsPrinted`].
    pub fn with_duplicate_detuning(mut self, enabled: bool) -> Self {
        self.duplicate_detuning = enabled;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidConfig("at least one atom required".into()));
        }
        if self.atoms.iter().any(|a| a.n_points == 0) {
            return Err(Error::InvalidConfig("every atom needs n_points >= 1".into()));
        }
        if self.atoms.iter().any(|a| !a.detuning.is_finite()) {
            return Err(Error::InvalidConfig("detunings must be finite".into()));
        }
        if !self.omega0_tau0.is_finite() {
            return Err(Error::InvalidConfig("omega0_tau0 must be finite".into()));
        }
        if !(self.gamma_tau0.is_finite() && self.gamma_tau0 >= 0.0) {
            return Err(Error::InvalidConfig("gamma_tau0 must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(Error::InvalidConfig("reflectivity must lie in [0, 1]".into()));
        }
        let norm: f64 = self.atoms.iter().map(|a| a.initial.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "initial amplitudes must be normalised, sum |eps_q(0)|^2 = {norm}"
            )));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[AtomSpec] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn omega0_tau0(&self) -> f64 {
        self.omega0_tau0
    }

    pub fn gamma_tau0(&self) -> f64 {
        self.gamma_tau0
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn coupling_mode(&self) -> CouplingMode {
        self.coupling_mode
    }

    pub fn duplicate_detuning(&self) -> bool {
        self.duplicate_detuning
    }

    pub fn mirror_amplitude(&self) -> Complex64 {
        mirror_amplitude(self.reflectivity)
    }

    /// Number of coupling points that precede atom `q`.
    pub fn offsets(&self) -> Vec<usize> {
        self.atoms
            .iter()
            .scan(0, |acc, a| {
                let l = *acc;
                *acc += a.n_points;
                Some(l)
            })
            .collect()
    }

    /// The single-atom configuration this system reduces to when `Q = 1`.
    pub fn single_atom_config(&self) -> Option<SystemConfig> {
        match self.atoms.as_slice() {
            [atom] if atom.detuning == 0.0 => SystemConfig::new(
                atom.n_points,
                self.omega0_tau0,
                self.gamma_tau0,
            )
            .and_then(|c| c.with_reflectivity(self.reflectivity))
            .ok(),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Direct,
    Mirror,
}

/// One retarded contribution `coefficient * eps(t - delay * tau0)`, with the
/// coefficient in units of `Gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub delay: usize,
    pub coefficient: Complex64,
    pub channel: Channel,
    /// Number of `(m, n)` pairs merged into this entry.
    pub pairs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayKernel {
    entries: Vec<KernelEntry>,
}

impl DelayKernel {
    pub fn entries(&self) -> &[KernelEntry] {
        &self.entries
    }

    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &KernelEntry> {
        self.entries.iter().filter(move |e| e.channel == channel)
    }

    pub fn coefficient(&self, channel: Channel, delay: usize) -> Option<Complex64> {
        self.channel(channel)
            .find(|e| e.delay == delay)
            .map(|e| e.coefficient)
    }

    pub fn max_delay(&self) -> usize {
        self.entries.iter().map(|e| e.delay).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_pairs(
        rows: std::ops::RangeInclusive<usize>,
        cols: std::ops::RangeInclusive<usize>,
        r: Complex64,
    ) -> Self {
        let mut direct: BTreeMap<usize, usize> = BTreeMap::new();
        let mut mirror: BTreeMap<usize, usize> = BTreeMap::new();
        for m in rows {
            for n in cols.clone() {
                *direct.entry(m.abs_diff(n)).or_default() += 1;
                *mirror.entry(m + n).or_default() += 1;
            }
        }
        let mut entries: Vec<KernelEntry> = direct
            .into_iter()
            .map(|(delay, pairs)| KernelEntry {
                delay,
                coefficient: Complex64::new(-0.5 * pairs as f64, 0.0),
                channel: Channel::Direct,
                pairs,
            })
            .collect();
        if r != Complex64::new(0.0, 0.0) {
            entries.extend(mirror.into_iter().map(|(delay, pairs)| KernelEntry {
                delay,
                coefficient: r * (0.5 * pairs as f64),
                channel: Channel::Mirror,
                pairs,
            }));
        }
        DelayKernel { entries }
    }
}

/// Kernel of a single giant atom: the direct and mirror delayed sums, without
/// the free rotation term.
pub fn build_kernel(config: &SystemConfig) -> DelayKernel {
    let n = config.n_points();
    DelayKernel::from_pairs(1..=n, 1..=n, config.mirror_amplitude())
}

/// `Q x Q` matrix of kernels; block `(q, p)` feeds `eps_p` into `d eps_q / dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiKernel {
    n_atoms: usize,
    blocks: Vec<DelayKernel>,
}

impl MultiKernel {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn block(&self, target: usize, source: usize) -> &DelayKernel {
        &self.blocks[target * self.n_atoms + source]
    }
}

pub fn build_multi_kernel(config: &MultiAtomConfig) -> MultiKernel {
    let q = config.n_atoms();
    let r = config.mirror_amplitude();
    let offsets = config.offsets();
    let span = |i: usize| offsets[i] + 1..=offsets[i] + config.atoms()[i].n_points;
    let mut blocks = Vec::with_capacity(q * q);
    for target in 0..q {
        for source in 0..q {
            let block = if target == source {
                DelayKernel::from_pairs(span(target), span(source), r)
            } else {
                match config.coupling_mode() {
                    CouplingMode::AsPrinted => DelayKernel::default(),
                    CouplingMode::FullCrossCoupling => {
                        DelayKernel::from_pairs(span(target), span(source), r)
                    }
                }
            };
            blocks.push(block);
        }
    }
    MultiKernel { n_atoms: q, blocks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn as_list(kernel: &DelayKernel, channel: Channel) -> Vec<(usize, Complex64)> {
        kernel
            .channel(channel)
            .map(|e| (e.delay, e.coefficient))
            .collect()
    }

    #[test]
    fn point_atom_kernel() {
        let k = build_kernel(&SystemConfig::new(1, 2.0 * PI, 0.1).unwrap());
        assert_eq!(as_list(&k, Channel::Direct), vec![(0, c(-0.5))]);
        assert_eq!(as_list(&k, Channel::Mirror), vec![(2, c(0.5))]);
    }

    #[test]
    fn three_point_kernel_matches_enumeration() {
        let k = build_kernel(&SystemConfig::new(3, 2.0 * PI, 0.1).unwrap());
        assert_eq!(
            as_list(&k, Channel::Direct),
            vec![(0, c(-1.5)), (1, c(-2.0)), (2, c(-1.0))]
        );
        assert_eq!(
            as_list(&k, Channel::Mirror),
            vec![(2, c(0.5)), (3, c(1.0)), (4, c(1.5)), (5, c(1.0)), (6, c(0.5))]
        );
    }

    #[test]
    fn zero_reflectivity_has_no_mirror_channel() {
        let cfg = SystemConfig::new(2, PI, 0.1)
            .unwrap()
            .with_reflectivity(0.0)
            .unwrap();
        let k = build_kernel(&cfg);
        assert_eq!(as_list(&k, Channel::Direct), vec![(0, c(-1.0)), (1, c(-1.0))]);
        assert_eq!(k.channel(Channel::Mirror).count(), 0);
    }

    #[test]
    fn partial_mirror_scales_by_reflection_amplitude() {
        let cfg = SystemConfig::new(1, PI, 0.1)
            .unwrap()
            .with_reflectivity(0.9)
            .unwrap();
        let r = cfg.mirror_amplitude();
        assert!((r.norm_sqr() - 0.9).abs() < 1e-15);
        let k = build_kernel(&cfg);
        assert_eq!(k.coefficient(Channel::Mirror, 2), Some(r * 0.5));
    }

    #[test]
    fn pair_counts_cover_all_pairs() {
        for n in 1..=50 {
            let k = build_kernel(&SystemConfig::new(n, 1.0, 0.1).unwrap());
            let direct: usize = k.channel(Channel::Direct).map(|e| e.pairs).sum();
            let mirror: usize = k.channel(Channel::Mirror).map(|e| e.pairs).sum();
            assert_eq!(direct, n * n);
            assert_eq!(mirror, n * n);
            assert_eq!(k.channel(Channel::Direct).map(|e| e.delay).max(), Some(n - 1));
            assert_eq!(k.channel(Channel::Mirror).map(|e| e.delay).max(), Some(2 * n));
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let cfg = SystemConfig::new(7, 3.3, 0.2)
            .unwrap()
            .with_reflectivity(0.37)
            .unwrap();
        assert_eq!(build_kernel(&cfg), build_kernel(&cfg));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SystemConfig::new(0, 1.0, 0.1).is_err());
        assert!(SystemConfig::new(1, 1.0, -0.1).is_err());
        assert!(SystemConfig::new(1, f64::NAN, 0.1).is_err());
        let base = SystemConfig::new(1, 1.0, 0.1).unwrap();
        assert!(base.clone().with_reflectivity(1.1).is_err());
        assert!(base.clone().with_gamma_ext_ratio(-1.0).is_err());
        assert!(base.with_dephasing_ratio(-0.1).is_err());
    }

    fn two_single_point_atoms(mode: CouplingMode) -> MultiAtomConfig {
        let atoms = vec![
            AtomSpec { n_points: 1, detuning: 0.0, initial: c(1.0) },
            AtomSpec { n_points: 1, detuning: 0.0, initial: c(0.0) },
        ];
        MultiAtomConfig::new(atoms, 2.0 * PI, 0.1, 1.0, mode).unwrap()
    }

    #[test]
    fn single_atom_multi_kernel_reduces() {
        let single = SystemConfig::new(4, 2.0 * PI, 0.1).unwrap();
        for mode in [CouplingMode::AsPrinted, CouplingMode::FullCrossCoupling] {
            let multi = MultiAtomConfig::new(
                vec![AtomSpec { n_points: 4, detuning: 0.0, initial: c(1.0) }],
                2.0 * PI,
                0.1,
                1.0,
                mode,
            )
            .unwrap();
            assert_eq!(build_multi_kernel(&multi).block(0, 0), &build_kernel(&single));
        }
    }

    #[test]
    fn cross_block_for_two_point_atoms() {
        let mk = build_multi_kernel(&two_single_point_atoms(CouplingMode::FullCrossCoupling));
        let cross = mk.block(0, 1);
        assert_eq!(as_list(cross, Channel::Direct), vec![(1, c(-0.5))]);
        assert_eq!(as_list(cross, Channel::Mirror), vec![(3, c(0.5))]);
        assert_eq!(mk.block(1, 0), cross);
        // second atom sits one x0 further out
        assert_eq!(as_list(mk.block(1, 1), Channel::Mirror), vec![(4, c(0.5))]);
    }

    #[test]
    fn as_printed_has_empty_cross_blocks() {
        let mk = build_multi_kernel(&two_single_point_atoms(CouplingMode::AsPrinted));
        assert!(mk.block(0, 1).is_empty());
        assert!(mk.block(1, 0).is_empty());
    }

    #[test]
    fn full_cross_blocks_are_symmetric() {
        let atoms = vec![
            AtomSpec { n_points: 2, detuning: 0.0, initial: c(0.6) },
            AtomSpec { n_points: 3, detuning: 0.1, initial: c(0.8) },
            AtomSpec { n_points: 1, detuning: -0.1, initial: c(0.0) },
        ];
        let cfg =
            MultiAtomConfig::new(atoms, 2.0 * PI, 0.1, 0.5, CouplingMode::FullCrossCoupling)
                .unwrap();
        assert_eq!(cfg.offsets(), vec![0, 2, 5]);
        let mk = build_multi_kernel(&cfg);
        for q in 0..3 {
            for p in 0..3 {
                assert_eq!(mk.block(q, p), mk.block(p, q));
            }
        }
    }

    #[test]
    fn unnormalised_initial_state_is_rejected() {
        let atoms = vec![
            AtomSpec { n_points: 1, detuning: 0.0, initial: c(1.0) },
            AtomSpec { n_points: 1, detuning: 0.0, initial: c(0.1) },
        ];
        assert!(MultiAtomConfig::new(atoms, 1.0, 0.1, 1.0, CouplingMode::AsPrinted).is_err());
    }

    #[test]
    fn rwa_flag() {
        let cfg = SystemConfig::new(3, 2.0 * PI, 0.05 * PI).unwrap();
        // cot(pi/3) = 0.577 -> 3 * 0.157 * 0.577 / (4 pi) ~ 0.02
        assert!(cfg.rwa_warnings(&[(1, 3)]).is_empty());
        let strong = SystemConfig::new(3, 0.2, 0.5).unwrap();
        assert_eq!(strong.rwa_warnings(&[(1, 3)]), vec![(1, 3)]);
    }
}
