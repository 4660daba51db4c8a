//! `L^p(B_R)` distances between coefficient systems.

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSystem;
use crate::error::{FlowError, Result};
use crate::linalg::norm;
use crate::quadrature::{shell_integral, unit_ball_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    Values,
    Jacobians,
}

/// Radial/angular resolution of the ball quadrature.
#[derive(Debug, Clone, Copy)]
pub struct LpQuadrature {
    pub panels_per_decade: usize,
    pub nodes_per_panel: usize,
    pub angular: usize,
    /// Inner radius (relative to `R`) below which nothing is integrated in
    /// values mode.
    pub relative_floor: f64,
}

impl Default for LpQuadrature {
    fn default() -> Self {
        Self {
            panels_per_decade: 2,
            nodes_per_panel: 8,
            angular: 32,
            relative_floor: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpDistance {
    /// `int_{r_in <= |x| <= R} |a_k - b_k|^p dx`
    pub value: f64,
    /// Volume of the excised inner ball `|x| < r_in`.
    pub excised_volume: f64,
    pub inner_radius: f64,
    /// Quadrature nodes where either system could not be evaluated.
    pub skipped_nodes: usize,
}

pub fn lp_distance(a: &CoefficientSystem, b: &CoefficientSystem, k: usize, radius: f64, p: f64, mode: LpMode) -> Result<LpDistance> {
    lp_distance_with(a, b, k, radius, p, mode, &LpQuadrature::default())
}

pub fn lp_distance_with(
    a: &CoefficientSystem,
    b: &CoefficientSystem,
    k: usize,
    radius: f64,
    p: f64,
    mode: LpMode,
    quad: &LpQuadrature,
) -> Result<LpDistance> {
    let d = a.dim();
    if b.dim() != d || b.noise_dim() != a.noise_dim() {
        return Err(FlowError::Dimension {
            expected: d,
            got: b.dim(),
        });
    }
    if k > a.noise_dim() {
        return Err(FlowError::InvalidArgument(format!("field index {k} > m")));
    }
    let mut inner = radius * quad.relative_floor;
    if mode == LpMode::Jacobians {
        for s in [a, b] {
            if let Some(r) = s.origin_policy().r_min() {
                inner = inner.max(r);
            }
        }
    }
    let decades = (radius / inner).log10().max(1.0);
    let panels = (decades * quad.panels_per_decade as f64).ceil() as usize;
    let (mut ba, mut bb) = match mode {
        LpMode::Values => (vec![0.0; a.values_len()], vec![0.0; b.values_len()]),
        LpMode::Jacobians => (vec![0.0; a.jacobians_len()], vec![0.0; b.jacobians_len()]),
    };
    let width = match mode {
        LpMode::Values => d,
        LpMode::Jacobians => d * d,
    };
    let mut skipped = 0usize;
    let value = shell_integral(d, inner, radius, panels, quad.nodes_per_panel, quad.angular, |x| {
        let ok = match mode {
            LpMode::Values => a.values_into(x, &mut ba).is_ok() && b.values_into(x, &mut bb).is_ok(),
            LpMode::Jacobians => a.jacobians_into(x, &mut ba).is_ok() && b.jacobians_into(x, &mut bb).is_ok(),
        };
        if !ok {
            skipped += 1;
            return 0.0;
        }
        let diff: Vec<f64> = ba[k * width..(k + 1) * width]
            .iter()
            .zip(&bb[k * width..(k + 1) * width])
            .map(|(u, v)| u - v)
            .collect();
        norm(&diff).powf(p)
    });
    Ok(LpDistance {
        value,
        excised_volume: unit_ball_volume(d) * inner.powi(d as i32),
        inner_radius: inner,
        skipped_nodes: skipped,
    })
}
