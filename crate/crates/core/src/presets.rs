//! Named parameter sets for the published figure panels.
//!
//! Configurations are computed from the bound-state synthesis routines, so
//! they satisfy the bound conditions exactly. The rounded values printed with
//! each figure are kept separately in [`CaptionValues`] for comparison.

use std::f64::consts::PI;

use serde::Serialize;

use crate::model::SystemConfig;
use crate::spectral::{bound_state_frequency, three_mode_parameters, two_mode_parameters, Parity, Variant};

/// Bumped whenever a preset changes meaning.
pub const PRESET_TABLE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PresetKind {
    /// `|eps(t)|^2` over time.
    Dynamics,
    /// `P(x, t)` over space and time.
    FieldMap,
    /// `P(x, t_end)` at a single time.
    Snapshot,
    /// Dephasing ensemble mean of `|eps(t)|^2`.
    Ensemble,
}

/// Rounded numbers printed with a panel, in units of pi.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaptionValues {
    pub omega0_tau0_pi: Option<f64>,
    pub gamma_tau0_pi: Option<f64>,
    /// Mode indices listed with the panel, in the printed order.
    pub mode_indices: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Preset {
    pub name: String,
    pub summary: String,
    pub kind: PresetKind,
    pub config: SystemConfig,
    /// End of the run in units of `Gamma t`.
    pub horizon_gamma_t: f64,
    pub caption: Option<CaptionValues>,
}

impl Preset {
    /// Horizon in units of `tau0`.
    pub fn horizon_tau0(&self) -> f64 {
        self.horizon_gamma_t / self.config.gamma_tau0()
    }

    /// Whether the ideal configuration is expected to hold bound modes.
    pub fn is_bound_state(&self) -> bool {
        self.config.reflectivity() == 1.0 && self.config.gamma_ext_ratio() == 0.0
    }
}

fn config(n: usize, w0: f64, g: f64) -> SystemConfig {
    SystemConfig::new(n, w0, g).expect("preset parameters are valid")
}

fn single(n: usize, k: i64, g: f64, variant: Variant) -> SystemConfig {
    config(n, bound_state_frequency(n, k, g, variant).expect("not a cotangent pole"), g)
}

fn pair(n: usize, k1: i64, k2: i64, variant: Variant) -> SystemConfig {
    let (w, g) = two_mode_parameters(n, k1, k2, variant).expect("feasible pair");
    config(n, w, g)
}

fn triple(n: usize, k0: i64, q: i64, parity: Parity, variant: Variant) -> SystemConfig {
    let t = three_mode_parameters(n, k0, q, parity, variant).expect("feasible triple");
    config(n, t.omega0_tau0, t.gamma_tau0)
}

fn caption(w: Option<f64>, g: Option<f64>, k: &[i64]) -> Option<CaptionValues> {
    Some(CaptionValues { omega0_tau0_pi: w, gamma_tau0_pi: g, mode_indices: k.to_vec() })
}

struct Base {
    tag: &'static str,
    summary: &'static str,
    config: SystemConfig,
    caption: Option<CaptionValues>,
}

fn static_bases() -> Vec<Base> {
    let g = 0.05 * PI;
    vec![
        Base { tag: "a", summary: "static mode at 2 pi, N = 3", config: config(3, 2.0 * PI, g), caption: caption(Some(2.0), Some(0.05), &[1]) },
        Base { tag: "b", summary: "static mode at 3 pi, N = 3", config: config(3, 3.0 * PI, g), caption: caption(Some(3.0), Some(0.05), &[1]) },
        Base { tag: "c", summary: "static cotangent mode k = 4, period N = 3", config: single(3, 4, g, Variant::DivN), caption: caption(Some(2.6234), Some(0.05), &[4]) },
        Base { tag: "d", summary: "static cotangent mode k = 3, period N + 1 = 4", config: single(3, 3, g, Variant::DivNPlus1), caption: caption(Some(1.6), Some(0.05), &[3]) },
    ]
}

fn two_mode_bases() -> Vec<Base> {
    vec![
        Base { tag: "a", summary: "two modes k = 23, 26, period N = 6", config: pair(6, 23, 26, Variant::DivN), caption: caption(Some(8.4167), Some(0.1443), &[23, 26]) },
        Base { tag: "b", summary: "two modes k = 27, 30, period N + 1 = 7", config: pair(6, 27, 30, Variant::DivNPlus1), caption: caption(Some(8.3336), Some(0.0852), &[27, 30]) },
    ]
}

fn three_mode_bases() -> Vec<Base> {
    vec![
        Base { tag: "a", summary: "three modes around 8 pi, N = 5", config: triple(5, 4, 1, Parity::Even, Variant::DivN), caption: caption(Some(8.0), Some(0.1162), &[19, 21]) },
        Base { tag: "b", summary: "three modes around 17 pi, N = 8", config: triple(8, 8, 1, Parity::Odd, Variant::DivN), caption: caption(Some(17.0), Some(0.1294), &[63, 73]) },
    ]
}

fn lossy(c: &SystemConfig, reflectivity: f64, ext: f64, dephasing: f64) -> SystemConfig {
    c.clone()
        .with_reflectivity(reflectivity)
        .and_then(|c| c.with_gamma_ext_ratio(ext))
        .and_then(|c| c.with_dephasing_ratio(dephasing))
        .expect("loss parameters are valid")
}

/// The full preset table in a fixed order.
pub fn all() -> Vec<Preset> {
    let mut out = Vec::new();
    let mut push = |name: String, summary: String, kind: PresetKind, config: SystemConfig, horizon: f64, caption: Option<CaptionValues>| {
        out.push(Preset { name, summary, kind, config, horizon_gamma_t: horizon, caption });
    };

    for b in static_bases() {
        push(format!("fig2{}", b.tag), b.summary.into(), PresetKind::Dynamics, b.config.clone(), 50.0, b.caption.clone());
        push(format!("fig3{}", b.tag), format!("field map, {}", b.summary), PresetKind::FieldMap, b.config.clone(), 40.0, None);
        push(format!("fig4{}", b.tag), format!("late-time field profile, {}", b.summary), PresetKind::Snapshot, b.config.clone(), 40.0, None);
    }

    let fig5 = [
        ("a", 2.0, 0.04),
        ("b", 2.0, 0.08),
        ("c", 10.0, 0.1),
        ("d", 14.0, 0.1),
    ];
    for (tag, w_pi, g_pi) in fig5 {
        push(
            format!("fig5{tag}"),
            format!("static mode at {w_pi} pi with Gamma tau0 = {g_pi} pi, N = 3"),
            PresetKind::Dynamics,
            config(3, w_pi * PI, g_pi * PI),
            50.0,
            caption(None, Some(g_pi), &[]),
        );
    }

    for b in two_mode_bases() {
        push(format!("fig6{}", b.tag), b.summary.into(), PresetKind::Dynamics, b.config.clone(), 50.0, b.caption.clone());
        push(format!("fig7{}", b.tag), format!("field map, {}", b.summary), PresetKind::FieldMap, b.config.clone(), 40.0, None);
    }

    let fig8 = [
        ("a", 7, 27, 30, Variant::DivN, 8.3336, 0.0852),
        ("b", 8, 31, 34, Variant::DivN, 8.2803, 0.0549),
        ("c", 7, 31, 34, Variant::DivNPlus1, 8.2803, 0.0549),
        ("d", 8, 35, 38, Variant::DivNPlus1, 8.2428, 0.0376),
    ];
    for (tag, n, k1, k2, variant, w_pi, g_pi) in fig8 {
        push(
            format!("fig8{tag}"),
            format!("two modes k = {k1}, {k2}, N = {n}, {variant:?}"),
            PresetKind::Dynamics,
            pair(n, k1, k2, variant),
            50.0,
            caption(Some(w_pi), Some(g_pi), &[k1, k2]),
        );
    }

    for b in three_mode_bases() {
        push(format!("fig9{}", b.tag), b.summary.into(), PresetKind::Dynamics, b.config.clone(), 50.0, b.caption.clone());
        push(format!("fig9{}-field", b.tag), format!("field map, {}", b.summary), PresetKind::FieldMap, b.config.clone(), 40.0, None);
    }

    let mirror_set: Vec<Base> = static_bases().into_iter().chain(two_mode_bases()).chain(three_mode_bases()).collect();
    for (b, tag) in mirror_set.iter().zip(["a", "b", "c", "d", "e", "f", "g", "h"]) {
        push(
            format!("fig10{tag}"),
            format!("{} with R = 0.9", b.summary),
            PresetKind::Dynamics,
            lossy(&b.config, 0.9, 0.0, 0.0),
            50.0,
            None,
        );
    }

    for b in two_mode_bases() {
        push(
            format!("fig11{}", b.tag),
            format!("{} with R = 0.98, external loss and dephasing 0.1 Gamma", b.summary),
            PresetKind::Ensemble,
            lossy(&b.config, 0.98, 0.1, 0.1),
            50.0,
            None,
        );
    }

    let fig12 = [
        ("a", 6, 4, Parity::Even, 0.0642, [23, 25]),
        ("b", 7, 4, Parity::Even, 0.0393, [27, 29]),
        ("c", 9, 8, Parity::Odd, 0.0989, [71, 82]),
        ("d", 10, 8, Parity::Odd, 0.078, [79, 91]),
    ];
    for (tag, n, k0, parity, g_pi, ks) in fig12 {
        let w = match parity {
            Parity::Even => 2.0 * k0 as f64,
            Parity::Odd => (2 * k0 + 1) as f64,
        };
        push(
            format!("fig12{tag}"),
            format!("three modes around {w} pi, N = {n}"),
            PresetKind::Dynamics,
            triple(n, k0, 1, parity, Variant::DivN),
            50.0,
            caption(Some(w), Some(g_pi), &ks),
        );
    }

    for b in static_bases() {
        push(
            format!("fig13{}", b.tag),
            format!("{} with R = 0.98, external loss and dephasing 0.1 Gamma", b.summary),
            PresetKind::Ensemble,
            lossy(&b.config, 0.98, 0.1, 0.1),
            50.0,
            None,
        );
    }
    for b in three_mode_bases() {
        push(
            format!("fig14{}", b.tag),
            format!("{} with R = 0.98, external loss and dephasing 0.1 Gamma", b.summary),
            PresetKind::Ensemble,
            lossy(&b.config, 0.98, 0.1, 0.1),
            50.0,
            None,
        );
    }

    let fig15 = [
        ("a", 5, 4, Parity::Even, 8.0, 0.0642, [23, 25]),
        ("b", 8, 8, Parity::Odd, 17.0, 0.0989, [71, 82]),
    ];
    for (tag, n, k0, parity, w_pi, g_pi, ks) in fig15 {
        let c = triple(n, k0, 1, parity, Variant::DivNPlus1);
        let summary = format!("three modes around {w_pi} pi, N = {n}, period N + 1");
        push(format!("fig15{tag}"), summary.clone(), PresetKind::Dynamics, c.clone(), 50.0, caption(Some(w_pi), Some(g_pi), &ks));
        push(format!("fig16{tag}"), format!("field map, {summary}"), PresetKind::FieldMap, c, 40.0, None);
    }
    out
}

pub fn get(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

pub fn names() -> Vec<String> {
    all().into_iter().map(|p| p.name).collect()
}
