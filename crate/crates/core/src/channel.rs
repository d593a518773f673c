//! System parameterization and the Gamma model of the cascaded STAR-RIS channel.
//!
//! With ideal phase alignment the end-to-end power gain seen by user `k` is
//! `W_k = |Σ h_n g_{k,n}|²`, modelled here as `Gamma(κ, τ)` with
//! `κ = Nπ²/(16−π²)` and `τ = (16−π²)/(4π)`. Everything downstream works in
//! linear units; the only dB conversion lives in [`transmit_snr`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const SPLIT_TOLERANCE: f64 = 1e-12;

/// Multiple-access scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Noma,
    Oma,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Noma, Protocol::Oma];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Noma => "noma",
            Protocol::Oma => "oma",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which half-space of the surface the user sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Reflect,
    Transmit,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Reflect, Side::Transmit];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Reflect => "reflect",
            Side::Transmit => "transmit",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Reflect => Side::Transmit,
            Side::Transmit => Side::Reflect,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which coefficient product to return from [`effective_gain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainRole {
    /// The user's own superposed signal (its power share applied).
    Signal,
    /// The other user's superposed signal seen at this receiver.
    Interference,
    /// Whole transmit power, no power split applied.
    Full,
}

impl GainRole {
    fn as_str(self) -> &'static str {
        match self {
            GainRole::Signal => "signal",
            GainRole::Interference => "interference",
            GainRole::Full => "full",
        }
    }
}

/// Physical and protocol scalars of the two-user downlink.
///
/// `Default` reproduces the reference setup: P = 30 dBm, σ² = −30 dBm,
/// N = 15, α = 2.5, d = 10 m, (p_r, p_t) = (0.4, 0.6), (β_r, β_t) = (0.8, 0.6)
/// and OMA with p_k = δ_k = 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub total_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub n_elements: u32,
    pub path_loss_exponent: f64,
    pub bs_ris_distance_m: f64,
    pub power_split_reflect: f64,
    pub power_split_transmit: f64,
    pub amp_reflect: f64,
    pub amp_transmit: f64,
    pub oma_resource_share_reflect: f64,
    pub oma_resource_share_transmit: f64,
    pub oma_power_reflect: f64,
    pub oma_power_transmit: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            total_power_dbm: 30.0,
            noise_power_dbm: -30.0,
            n_elements: 15,
            path_loss_exponent: 2.5,
            bs_ris_distance_m: 10.0,
            power_split_reflect: 0.4,
            power_split_transmit: 0.6,
            amp_reflect: 0.8,
            amp_transmit: 0.6,
            oma_resource_share_reflect: 0.5,
            oma_resource_share_transmit: 0.5,
            oma_power_reflect: 0.5,
            oma_power_transmit: 0.5,
        }
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(name, format!("{v} is outside [0, 1]")));
    }
    Ok(())
}

fn check_share(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(name, format!("{v} is outside (0, 1]")));
    }
    Ok(())
}

impl SystemParams {
    /// Checks every field-level and cross-field invariant.
    pub fn validate(&self) -> Result<()> {
        if !self.total_power_dbm.is_finite() {
            return Err(Error::invalid("total_power_dbm", "must be finite"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(Error::invalid("noise_power_dbm", "must be finite"));
        }
        if self.n_elements == 0 {
            return Err(Error::invalid("n_elements", "must be at least 1"));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::invalid("path_loss_exponent", "must be positive"));
        }
        if !(self.bs_ris_distance_m > 0.0 && self.bs_ris_distance_m.is_finite()) {
            return Err(Error::invalid("bs_ris_distance_m", "must be positive"));
        }
        check_unit("power_split_reflect", self.power_split_reflect)?;
        check_unit("power_split_transmit", self.power_split_transmit)?;
        check_unit("amp_reflect", self.amp_reflect)?;
        check_unit("amp_transmit", self.amp_transmit)?;
        check_share("oma_resource_share_reflect", self.oma_resource_share_reflect)?;
        check_share("oma_resource_share_transmit", self.oma_resource_share_transmit)?;
        check_unit("oma_power_reflect", self.oma_power_reflect)?;
        check_unit("oma_power_transmit", self.oma_power_transmit)?;

        let split = self.power_split_reflect + self.power_split_transmit;
        if (split - 1.0).abs() > SPLIT_TOLERANCE {
            return Err(Error::invalid(
                "power_split_reflect",
                format!("p_r + p_t must equal 1, got {split}"),
            ));
        }
        if self.power_split_reflect > self.power_split_transmit {
            return Err(Error::invalid(
                "power_split_reflect",
                format!(
                    "decoding order requires p_r <= p_t, got p_r = {} > p_t = {}",
                    self.power_split_reflect, self.power_split_transmit
                ),
            ));
        }
        let energy = self.amp_reflect.powi(2) + self.amp_transmit.powi(2);
        if energy > 1.0 + SPLIT_TOLERANCE {
            return Err(Error::invalid(
                "amp_reflect",
                format!("passive surface requires beta_r^2 + beta_t^2 <= 1, got {energy}"),
            ));
        }
        Ok(())
    }

    pub fn amp(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.amp_reflect,
            Side::Transmit => self.amp_transmit,
        }
    }

    pub fn noma_power(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.power_split_reflect,
            Side::Transmit => self.power_split_transmit,
        }
    }

    pub fn oma_power(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.oma_power_reflect,
            Side::Transmit => self.oma_power_transmit,
        }
    }

    pub fn oma_share(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.oma_resource_share_reflect,
            Side::Transmit => self.oma_resource_share_transmit,
        }
    }

    /// Gamma approximation for this surface size.
    pub fn gamma(&self) -> Result<GammaApprox> {
        gamma_params(self.n_elements)
    }

    /// Replaces the transmit power so that ρ equals `snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.total_power_dbm = self.noise_power_dbm + snr_db;
        self
    }
}

/// Position of one user relative to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub user_distance_m: f64,
    pub user_side: Side,
}

impl LinkGeometry {
    pub fn new(user_side: Side, user_distance_m: f64) -> Result<Self> {
        if !(user_distance_m > 0.0 && user_distance_m.is_finite()) {
            return Err(Error::invalid(
                "user_distance_m",
                format!("must be positive and finite, got {user_distance_m}"),
            ));
        }
        Ok(Self {
            user_distance_m,
            user_side,
        })
    }

    pub fn reflect(d: f64) -> Result<Self> {
        Self::new(Side::Reflect, d)
    }

    pub fn transmit(d: f64) -> Result<Self> {
        Self::new(Side::Transmit, d)
    }
}

/// Shape/scale pair of the Gamma model for the cascaded power gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaApprox {
    pub shape: f64,
    pub scale: f64,
}

impl GammaApprox {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    /// Natural log of the density; `-inf` at `w = 0` when `κ > 1`.
    pub fn ln_pdf(&self, w: f64) -> Result<f64> {
        if !(w >= 0.0) {
            return Err(Error::invalid("w", format!("density argument must be >= 0, got {w}")));
        }
        let norm = ln_gamma(self.shape) + self.shape * self.scale.ln();
        if w == 0.0 {
            return Ok(match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => -self.scale.ln(),
                _ => f64::NEG_INFINITY,
            });
        }
        Ok((self.shape - 1.0) * w.ln() - w / self.scale - norm)
    }

    /// `w^(κ−1) e^(−w/τ) / (Γ(κ) τ^κ)`, evaluated in log space.
    pub fn pdf(&self, w: f64) -> Result<f64> {
        self.ln_pdf(w).map(f64::exp)
    }

    /// `P(W ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            gamma_lr(self.shape, x / self.scale)
        }
    }

    /// `P(W > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            gamma_ur(self.shape, x / self.scale)
        }
    }

    /// `E[W · 1{W > x}]`.
    pub fn partial_mean_above(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.mean()
        } else {
            self.mean() * gamma_ur(self.shape + 1.0, x / self.scale)
        }
    }
}

/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Transmit SNR ρ = P/σ² in linear units.
pub fn transmit_snr(params: &SystemParams) -> f64 {
    db_to_linear(params.total_power_dbm - params.noise_power_dbm)
}

/// Gamma shape and scale for an `n_elements` surface.
pub fn gamma_params(n_elements: u32) -> Result<GammaApprox> {
    if n_elements == 0 {
        return Err(Error::invalid("n_elements", "must be at least 1"));
    }
    let pi_sq = PI * PI;
    let shape = f64::from(n_elements) * pi_sq / (16.0 - pi_sq);
    let scale = (16.0 - pi_sq) / (4.0 * PI);
    GammaApprox::new(shape, scale)
}

/// Returns `c` such that the instantaneous SNR (or SINR term) equals `c · W_k`.
///
/// NOMA: `Signal` applies the user's own power share, `Interference` the
/// other user's share, `Full` none. OMA: `Signal` and `Full` both give
/// `ρ p_k β_k² / (δ_k d^α d_k^α)`; `Interference` is a protocol mismatch.
pub fn effective_gain(
    params: &SystemParams,
    geometry: &LinkGeometry,
    protocol: Protocol,
    role: GainRole,
) -> Result<f64> {
    let side = geometry.user_side;
    let alpha = params.path_loss_exponent;
    let path_loss =
        params.bs_ris_distance_m.powf(-alpha) * geometry.user_distance_m.powf(-alpha);
    let base = transmit_snr(params) * params.amp(side).powi(2) * path_loss;
    match protocol {
        Protocol::Noma => Ok(match role {
            GainRole::Signal => base * params.noma_power(side),
            GainRole::Interference => base * params.noma_power(side.other()),
            GainRole::Full => base,
        }),
        Protocol::Oma => match role {
            GainRole::Interference => Err(Error::ProtocolMismatch {
                protocol: protocol.as_str(),
                role: role.as_str(),
            }),
            GainRole::Signal | GainRole::Full => {
                Ok(base * params.oma_power(side) / params.oma_share(side))
            }
        },
    }
}
