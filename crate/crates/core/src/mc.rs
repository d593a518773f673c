//! Seeded Monte-Carlo estimates of the ergodic rates.
//!
//! Two channel backends are available. [`ChannelModel::ExactCascade`] draws
//! `S = Σ hₙ gₙ` from independent unit-power Rayleigh amplitudes (ideal phase
//! alignment makes all terms add coherently) and sets `W = S²`.
//! [`ChannelModel::GammaSurrogate`] draws `W` directly from the Gamma model,
//! which makes it a like-for-like check on the quadrature path.
//!
//! Work is split into fixed-size chunks; chunk `i` owns ChaCha stream `i` of
//! the configured seed, and chunk summaries are merged in index order. The
//! result is therefore bit-identical for any rayon pool size.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    effective_gain, gamma_params, GainRole, GammaApprox, LinkGeometry, Protocol, SystemParams,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            seed: 42,
            chunk_size: 1 << 16,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::invalid("n_samples", format!("must be >= 100, got {}", self.n_samples)));
        }
        if self.chunk_size == 0 {
            return Err(Error::invalid("chunk_size", "must be positive"));
        }
        Ok(())
    }

    fn chunks(&self) -> impl IndexedParallelIterator<Item = (u64, u64)> + '_ {
        let n_chunks = self.n_samples.div_ceil(self.chunk_size) as usize;
        (0..n_chunks).into_par_iter().map(move |i| {
            let i = i as u64;
            let start = i * self.chunk_size;
            let len = self.chunk_size.min(self.n_samples - start);
            (i, len)
        })
    }

    fn stream(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    ExactCascade,
    GammaSurrogate,
}

impl ChannelModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelModel::ExactCascade => "exact_cascade",
            ChannelModel::GammaSurrogate => "gamma_surrogate",
        }
    }
}

/// Running count/mean/M2 summary (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + delta * nb / n as f64,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n as f64,
        }
    }

    fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

/// One draw of `S = Σₙ hₙ gₙ` with `E[hₙ²] = E[gₙ²] = 1`.
///
/// Each amplitude is `√(−ln U)`, `U ~ U(0, 1]`.
pub fn sample_cascade_amplitude<R: Rng + ?Sized>(n_elements: u32, rng: &mut R) -> f64 {
    (0..n_elements)
        .map(|_| {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = 1.0 - rng.gen::<f64>();
            ((-u1.ln()) * (-u2.ln())).sqrt()
        })
        .sum()
}

/// Draws cascaded power gains `W` from the selected backend.
#[derive(Debug, Clone, Copy)]
pub struct PowerSampler {
    model: ChannelModel,
    n_elements: u32,
    gamma: Gamma<f64>,
}

impl PowerSampler {
    pub fn new(model: ChannelModel, n_elements: u32) -> Result<Self> {
        let g = gamma_params(n_elements)?;
        let gamma = Gamma::new(g.shape, g.scale)
            .map_err(|e| Error::invalid("n_elements", format!("gamma sampler: {e}")))?;
        Ok(Self {
            model,
            n_elements,
            gamma,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.model {
            ChannelModel::ExactCascade => sample_cascade_amplitude(self.n_elements, rng).powi(2),
            ChannelModel::GammaSurrogate => self.gamma.sample(rng),
        }
    }
}

/// Mean and standard error of `f(W)` over `cfg.n_samples` draws.
fn estimate<F>(cfg: &McConfig, sampler: &PowerSampler, f: F) -> Result<McEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    cfg.validate()?;
    let parts: Vec<Moments> = cfg
        .chunks()
        .map(|(i, len)| {
            let mut rng = cfg.stream(i);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(f(sampler.sample(&mut rng)));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    Ok(McEstimate {
        mean: total.mean,
        std_error: (total.sample_variance() / total.count as f64).sqrt(),
        n_samples: total.count,
        seed: cfg.seed,
    })
}

fn exact_zero(cfg: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    Ok(McEstimate {
        mean: 0.0,
        std_error: 0.0,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
    })
}

/// `E[log₂(1 + c_r W)]` for the reflect user after SIC.
pub fn mc_rate_noma_reflect(
    params: &SystemParams,
    d_r: f64,
    model: ChannelModel,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let geo = LinkGeometry::reflect(d_r)?;
    let c = effective_gain(params, &geo, Protocol::Noma, GainRole::Signal)?;
    if c == 0.0 {
        return exact_zero(cfg);
    }
    let sampler = PowerSampler::new(model, params.n_elements)?;
    estimate(cfg, &sampler, |w| (c * w).ln_1p() / std::f64::consts::LN_2)
}

/// `E[log₂(1 + c_s W / (c_i W + 1))]` for the transmit user, which treats the
/// reflect user's signal as noise.
pub fn mc_rate_noma_transmit(
    params: &SystemParams,
    d_t: f64,
    model: ChannelModel,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let geo = LinkGeometry::transmit(d_t)?;
    let signal = effective_gain(params, &geo, Protocol::Noma, GainRole::Signal)?;
    let interference = effective_gain(params, &geo, Protocol::Noma, GainRole::Interference)?;
    if signal == 0.0 {
        return exact_zero(cfg);
    }
    let sampler = PowerSampler::new(model, params.n_elements)?;
    estimate(cfg, &sampler, |w| {
        (signal * w / (interference * w + 1.0)).ln_1p() / std::f64::consts::LN_2
    })
}

/// `δ_k · E[log₂(1 + c W)]` with the OMA gain for user `k`.
pub fn mc_rate_oma(
    params: &SystemParams,
    geometry: &LinkGeometry,
    model: ChannelModel,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let share = params.oma_share(geometry.user_side);
    if !(share > 0.0 && share <= 1.0) {
        return Err(Error::invalid("oma_resource_share", format!("must be in (0, 1], got {share}")));
    }
    let c = effective_gain(params, geometry, Protocol::Oma, GainRole::Signal)?;
    if c == 0.0 {
        return exact_zero(cfg);
    }
    let sampler = PowerSampler::new(model, params.n_elements)?;
    estimate(cfg, &sampler, |w| share * (c * w).ln_1p() / std::f64::consts::LN_2)
}

/// Fraction of channel draws on which the SIC stage at the reflect user
/// supports `target_rate_t`.
///
/// The stage SINR is `p_r c W / (p_t c W + 1)` on the reflect user's channel.
/// Diagnostic only; the rate functions assume SIC always succeeds.
pub fn mc_sic_sinr_check(
    params: &SystemParams,
    d_r: f64,
    target_rate_t: f64,
    model: ChannelModel,
    cfg: &McConfig,
) -> Result<f64> {
    if !(target_rate_t >= 0.0) {
        return Err(Error::invalid("target_rate_t", format!("must be >= 0, got {target_rate_t}")));
    }
    let geo = LinkGeometry::reflect(d_r)?;
    let signal = effective_gain(params, &geo, Protocol::Noma, GainRole::Signal)?;
    let interference = effective_gain(params, &geo, Protocol::Noma, GainRole::Interference)?;
    let sampler = PowerSampler::new(model, params.n_elements)?;
    let est = estimate(cfg, &sampler, |w| {
        let sinr = signal * w / (interference * w + 1.0);
        if sinr.ln_1p() / std::f64::consts::LN_2 >= target_rate_t {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(est.mean.clamp(0.0, 1.0))
}

/// Agreement between the exact cascaded channel and the Gamma model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFitReport {
    pub n_elements: u32,
    pub n_samples: u64,
    pub seed: u64,
    /// `κτ` and `κτ²` of the Gamma model.
    pub model_mean: f64,
    pub model_variance: f64,
    pub mean_s: f64,
    pub variance_s: f64,
    pub mean_w: f64,
    pub variance_w: f64,
    /// Relative error of the empirical mean/variance of `S` against `κτ`/`κτ²`.
    pub moment_rel_err_mean: f64,
    pub moment_rel_err_var: f64,
    /// Same, for `W = S²`, the variable the model is applied to.
    pub moment_rel_err_mean_w: f64,
    pub moment_rel_err_var_w: f64,
    pub ks_distance_w: f64,
    pub ks_distance_s: f64,
}

fn ks_distance(sorted: &[f64], g: &GammaApprox) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = g.cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .reduce(|| 0.0, f64::max)
}

/// Samples the exact cascade and compares it to the Gamma model.
pub fn gamma_fit_report(n_elements: u32, cfg: &McConfig) -> Result<GammaFitReport> {
    cfg.validate()?;
    let g = gamma_params(n_elements)?;

    let chunks: Vec<Vec<f64>> = cfg
        .chunks()
        .map(|(i, len)| {
            let mut rng = cfg.stream(i);
            (0..len)
                .map(|_| sample_cascade_amplitude(n_elements, &mut rng))
                .collect()
        })
        .collect();

    let mut s_moments = Moments::default();
    let mut w_moments = Moments::default();
    let mut amplitudes = Vec::with_capacity(cfg.n_samples as usize);
    for chunk in chunks {
        for s in chunk {
            s_moments.push(s);
            w_moments.push(s * s);
            amplitudes.push(s);
        }
    }
    amplitudes.par_sort_unstable_by(f64::total_cmp);
    let ks_distance_s = ks_distance(&amplitudes, &g);
    let powers: Vec<f64> = amplitudes.iter().map(|s| s * s).collect();
    let ks_distance_w = ks_distance(&powers, &g);

    let rel = |x: f64, reference: f64| (x - reference).abs() / reference;
    Ok(GammaFitReport {
        n_elements,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        model_mean: g.mean(),
        model_variance: g.variance(),
        mean_s: s_moments.mean,
        variance_s: s_moments.sample_variance(),
        mean_w: w_moments.mean,
        variance_w: w_moments.sample_variance(),
        moment_rel_err_mean: rel(s_moments.mean, g.mean()),
        moment_rel_err_var: rel(s_moments.sample_variance(), g.variance()),
        moment_rel_err_mean_w: rel(w_moments.mean, g.mean()),
        moment_rel_err_var_w: rel(w_moments.sample_variance(), g.variance()),
        ks_distance_w,
        ks_distance_s,
    })
}

/// `E[S] = Nπ/4` under unit-power Rayleigh amplitudes.
pub fn cascade_amplitude_mean(n_elements: u32) -> f64 {
    f64::from(n_elements) * PI / 4.0
}
