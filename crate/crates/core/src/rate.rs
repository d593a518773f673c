//! Ergodic rates under the Gamma channel model.
//!
//! Every rate reduces to
//!
//! ```text
//! F(c; κ, τ) = 1/(Γ(κ) τ^κ) ∫₀^∞ w^(κ−1) e^(−w/τ) log₂(1 + c·w) dw
//! ```
//!
//! which is evaluated by adaptive Gauss–Kronrod on `[0, w_max]` plus a
//! rigorous bound on the truncated tail. The NOMA transmit-side rate is the
//! difference `F(c_full) − F(p_r·c_full)`, and the OMA rate is
//! `δ_k · F(ρ p_k β_k² / (δ_k d^α d_k^α))`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::channel::{effective_gain, GainRole, GammaApprox, LinkGeometry, Protocol, Side, SystemParams};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::special::scaled_exp_integral_e1;

/// How a rate value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    Quadrature,
    ClosedFormExpIntegral,
    MonteCarlo,
}

impl RateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RateMethod::Quadrature => "quadrature",
            RateMethod::ClosedFormExpIntegral => "closed_form_exp_integral",
            RateMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub rate_bps_hz: f64,
    pub method: RateMethod,
    pub est_abs_error: f64,
}

impl RateResult {
    fn zero() -> Self {
        Self {
            rate_bps_hz: 0.0,
            method: RateMethod::Quadrature,
            est_abs_error: 0.0,
        }
    }
}

const MAX_TAIL_DOUBLINGS: usize = 64;

/// Upper bound on `∫_{W}^∞ f(w) ln(1+cw) dw` (natural log).
///
/// For `w > W`, concavity gives `ln(1+cw) ≤ ln(1+cW) + (w−W)/W`, hence the
/// tail is at most `P(W'>W)·ln(1+cW) + E[W'·1{W'>W}]/W`.
fn tail_bound_nats(c: f64, g: &GammaApprox, upper: f64) -> f64 {
    g.sf(upper) * (c * upper).ln_1p() + g.partial_mean_above(upper) / upper
}

/// `F(c; κ, τ)` in bits/s/Hz.
pub fn ergodic_log_gamma(c: f64, g: &GammaApprox, q: &QuadratureSpec) -> Result<RateResult> {
    q.validate()?;
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid("c", format!("gain must be finite and >= 0, got {c}")));
    }
    if c == 0.0 {
        return Ok(RateResult::zero());
    }

    let (shape, scale) = (g.shape, g.scale);
    let log_norm = ln_gamma(shape) + shape * scale.ln();

    let tail_budget = 0.5 * q.abs_tolerance * LN_2;
    let mut upper = shape * scale + 40.0 * shape.sqrt() * scale;
    let mut tail = tail_bound_nats(c, g, upper);
    let mut doublings = 0;
    while tail > tail_budget && doublings < MAX_TAIL_DOUBLINGS {
        upper *= 2.0;
        tail = tail_bound_nats(c, g, upper);
        doublings += 1;
    }

    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let density = ((shape - 1.0) * w.ln() - w / scale - log_norm).exp();
        density * (c * w).ln_1p()
    };
    let inner = QuadratureSpec {
        abs_tolerance: 0.5 * q.abs_tolerance * LN_2,
        ..*q
    };
    let integral = match integrate(integrand, 0.0, upper, &inner) {
        Ok(r) => r,
        Err(Error::Quadrature {
            best_estimate,
            est_abs_error,
            subdivisions,
        }) => {
            return Err(Error::Quadrature {
                best_estimate: best_estimate / LN_2,
                est_abs_error: (est_abs_error + tail) / LN_2,
                subdivisions,
            })
        }
        Err(e) => return Err(e),
    };

    Ok(RateResult {
        rate_bps_hz: (integral.value / LN_2).max(0.0),
        method: RateMethod::Quadrature,
        est_abs_error: (integral.abs_error + tail) / LN_2,
    })
}

/// Closed form of `F(c; 1, τ) = e^(1/(cτ)) E₁(1/(cτ)) / ln 2`.
pub fn exp_integral_oracle(c: f64, tau: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
    }
    Ok(scaled_exp_integral_e1(1.0 / (c * tau)) / LN_2)
}

/// Ergodic rate of the SIC (reflect-side) user under NOMA.
pub fn noma_rate_reflect(
    params: &SystemParams,
    d_r: f64,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<RateResult> {
    let geo = LinkGeometry::reflect(d_r)?;
    let c = effective_gain(params, &geo, Protocol::Noma, GainRole::Signal)?;
    ergodic_log_gamma(c, g, q)
}

/// Ergodic rate of the transmit-side user under NOMA, which treats the
/// reflect user's signal as noise: `F(c_full) − F(p_r · c_full)`.
pub fn noma_rate_transmit(
    params: &SystemParams,
    d_t: f64,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<RateResult> {
    let geo = LinkGeometry::transmit(d_t)?;
    let full = effective_gain(params, &geo, Protocol::Noma, GainRole::Full)?;
    let interference = effective_gain(params, &geo, Protocol::Noma, GainRole::Interference)?;
    if full == interference {
        return Ok(RateResult::zero());
    }
    let whole = ergodic_log_gamma(full, g, q)?;
    let masked = ergodic_log_gamma(interference, g, q)?;
    Ok(RateResult {
        rate_bps_hz: (whole.rate_bps_hz - masked.rate_bps_hz).max(0.0),
        method: RateMethod::Quadrature,
        est_abs_error: whole.est_abs_error + masked.est_abs_error,
    })
}

/// Ergodic rate of user `k` with a `δ_k` share of orthogonal resources.
pub fn oma_rate(
    params: &SystemParams,
    geometry: &LinkGeometry,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<RateResult> {
    let share = params.oma_share(geometry.user_side);
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::invalid("oma_resource_share", format!("must be in (0, 1], got {share}")));
    }
    let c = effective_gain(params, geometry, Protocol::Oma, GainRole::Signal)?;
    let r = ergodic_log_gamma(c, g, q)?;
    Ok(RateResult {
        rate_bps_hz: share * r.rate_bps_hz,
        method: r.method,
        est_abs_error: share * r.est_abs_error,
    })
}

/// Dispatches to the rate for `(protocol, side)` at distance `d_k`.
pub fn user_rate(
    params: &SystemParams,
    protocol: Protocol,
    side: Side,
    d_k: f64,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<RateResult> {
    match (protocol, side) {
        (Protocol::Noma, Side::Reflect) => noma_rate_reflect(params, d_k, g, q),
        (Protocol::Noma, Side::Transmit) => noma_rate_transmit(params, d_k, g, q),
        (Protocol::Oma, side) => oma_rate(params, &LinkGeometry::new(side, d_k)?, g, q),
    }
}
