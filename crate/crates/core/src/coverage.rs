//! Maximum user distance for a target ergodic rate, and parameter sweeps.
//!
//! Each user's rate depends only on its own distance and is strictly
//! decreasing in it, so the coverage region is the rectangle
//! `(0, d_t*] × (0, d_r*]` and each edge is found by bisection.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gamma_params, GammaApprox, Protocol, Side, SystemParams};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::rate::user_rate;

/// Hard cap on bisection steps.
pub const MAX_ITERATIONS: usize = 200;
/// Bisection stops once `d_hi / d_lo − 1` falls below this.
pub const DISTANCE_RESOLUTION: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageQuery {
    pub target_rate_bps_hz: f64,
    pub protocol: Protocol,
    pub side: Side,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub rate_tolerance: f64,
}

impl CoverageQuery {
    pub fn new(protocol: Protocol, side: Side, target_rate_bps_hz: f64) -> Self {
        let b = SolverBounds::default();
        Self {
            target_rate_bps_hz,
            protocol,
            side,
            d_min_m: b.d_min_m,
            d_max_m: b.d_max_m,
            rate_tolerance: b.rate_tolerance,
        }
    }

    pub fn with_bounds(mut self, bounds: &SolverBounds) -> Self {
        self.d_min_m = bounds.d_min_m;
        self.d_max_m = bounds.d_max_m;
        self.rate_tolerance = bounds.rate_tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_rate_bps_hz > 0.0) {
            return Err(Error::invalid("target_rate_bps_hz", "must be positive"));
        }
        SolverBounds {
            d_min_m: self.d_min_m,
            d_max_m: self.d_max_m,
            rate_tolerance: self.rate_tolerance,
        }
        .validate()
    }
}

/// Distance bracket and rate tolerance shared by every query of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverBounds {
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub rate_tolerance: f64,
}

impl Default for SolverBounds {
    fn default() -> Self {
        Self {
            d_min_m: 0.1,
            d_max_m: 1e4,
            rate_tolerance: 1e-6,
        }
    }
}

impl SolverBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min_m > 0.0) {
            return Err(Error::invalid("d_min_m", "must be positive"));
        }
        if !(self.d_max_m > self.d_min_m && self.d_max_m.is_finite()) {
            return Err(Error::invalid("d_max_m", "must exceed d_min_m"));
        }
        if !(self.rate_tolerance > 0.0) {
            return Err(Error::invalid("rate_tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    Converged,
    /// Even at `d_min` the rate is below target; `max_distance_m = d_min`.
    TargetUnreachableAtDmin,
    /// The rate still meets the target at `d_max`; `max_distance_m = d_max`.
    TargetMetAtDmax,
    /// Bracket collapsed without `|rate − target| ≤ rate_tolerance`.
    NotConverged,
}

impl BracketStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BracketStatus::Converged => "converged",
            BracketStatus::TargetUnreachableAtDmin => "target_unreachable_at_dmin",
            BracketStatus::TargetMetAtDmax => "target_met_at_dmax",
            BracketStatus::NotConverged => "not_converged",
        }
    }
}

impl fmt::Display for BracketStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub max_distance_m: f64,
    pub rate_at_boundary: f64,
    pub iterations: usize,
    pub bracket_status: BracketStatus,
}

/// Bisection on an arbitrary decreasing rate map `d ↦ rate(d)`.
///
/// Works in `ln d` so the resolution is relative. The returned distance is
/// the inner bracket end, where `rate ≥ target` still holds.
pub fn max_distance_with<F>(query: &CoverageQuery, mut rate: F) -> Result<CoverageResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    query.validate()?;
    let target = query.target_rate_bps_hz;

    let r_min = rate(query.d_min_m)?;
    if r_min < target {
        return Ok(CoverageResult {
            max_distance_m: query.d_min_m,
            rate_at_boundary: r_min,
            iterations: 0,
            bracket_status: BracketStatus::TargetUnreachableAtDmin,
        });
    }
    let r_max = rate(query.d_max_m)?;
    if r_max >= target {
        return Ok(CoverageResult {
            max_distance_m: query.d_max_m,
            rate_at_boundary: r_max,
            iterations: 0,
            bracket_status: BracketStatus::TargetMetAtDmax,
        });
    }

    let (mut lo, mut hi) = (query.d_min_m, query.d_max_m);
    let (mut r_lo, mut r_hi) = (r_min, r_max);
    let mut iterations = 0;
    while hi / lo - 1.0 > DISTANCE_RESOLUTION && iterations < MAX_ITERATIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let r = rate(mid)?;
        iterations += 1;
        if r >= target {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
            r_hi = r;
        }
    }

    // Report whichever end sits closer to the target rate.
    let (d, r) = if (r_lo - target).abs() <= (target - r_hi).abs() {
        (lo, r_lo)
    } else {
        (hi, r_hi)
    };
    let status = if (r - target).abs() <= query.rate_tolerance {
        BracketStatus::Converged
    } else {
        BracketStatus::NotConverged
    };
    Ok(CoverageResult {
        max_distance_m: d,
        rate_at_boundary: r,
        iterations,
        bracket_status: status,
    })
}

/// Largest distance at which the analytic ergodic rate still meets the target.
pub fn max_distance(
    params: &SystemParams,
    query: &CoverageQuery,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<CoverageResult> {
    max_distance_with(query, |d| {
        user_rate(params, query.protocol, query.side, d, g, q).map(|r| r.rate_bps_hz)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTargets {
    pub reflect: f64,
    pub transmit: f64,
}

impl Default for RateTargets {
    fn default() -> Self {
        Self {
            reflect: 0.8,
            transmit: 0.3,
        }
    }
}

impl RateTargets {
    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.reflect,
            Side::Transmit => self.transmit,
        }
    }
}

/// Both edges of the rectangular coverage region for one protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRegion {
    pub transmit: CoverageResult,
    pub reflect: CoverageResult,
}

pub fn coverage_rectangle(
    params: &SystemParams,
    targets: &RateTargets,
    protocol: Protocol,
    bounds: &SolverBounds,
    g: &GammaApprox,
    q: &QuadratureSpec,
) -> Result<CoverageRegion> {
    if !(targets.reflect > 0.0 && targets.transmit > 0.0) {
        return Err(Error::invalid("targets", "both target rates must be positive"));
    }
    let solve = |side: Side| {
        let query = CoverageQuery::new(protocol, side, targets.get(side)).with_bounds(bounds);
        max_distance(params, &query, g, q)
    };
    Ok(CoverageRegion {
        transmit: solve(Side::Transmit)?,
        reflect: solve(Side::Reflect)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NElements,
    SnrDb,
    BetaSq,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NElements => "n_elements",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::BetaSq => "beta_sq",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n_elements" => Ok(SweepAxis::NElements),
            "snr_db" => Ok(SweepAxis::SnrDb),
            "beta_sq" => Ok(SweepAxis::BetaSq),
            other => Err(Error::invalid(
                "axis",
                format!("unknown axis `{other}` (expected n_elements, snr_db or beta_sq)"),
            )),
        }
    }
}

/// How a `beta_sq` sweep sets the two amplitude coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaCoupling {
    /// Grid value is `β_r²`; `β_t² = 1 − β_r²`.
    #[default]
    EnergySplit,
    /// Grid value is the row user's `β_k²`; the other coefficient stays at
    /// its base value and rows violating `β_r² + β_t² ≤ 1` fail.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub protocol: Protocol,
    pub side: Side,
    pub max_distance_m: Option<f64>,
    pub rate_at_boundary: Option<f64>,
    pub iterations: usize,
    pub status: String,
}

fn params_for(base: &SystemParams, axis: SweepAxis, value: f64, side: Side, coupling: BetaCoupling) -> Result<SystemParams> {
    let mut p = *base;
    match axis {
        SweepAxis::NElements => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
                return Err(Error::invalid("n_elements", format!("grid value {value} is not a positive integer")));
            }
            p.n_elements = value as u32;
        }
        SweepAxis::SnrDb => p = p.with_snr_db(value),
        SweepAxis::BetaSq => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::invalid("beta_sq", format!("grid value {value} is outside [0, 1]")));
            }
            match coupling {
                BetaCoupling::EnergySplit => {
                    p.amp_reflect = value.sqrt();
                    p.amp_transmit = (1.0 - value).sqrt();
                }
                BetaCoupling::Independent => match side {
                    Side::Reflect => p.amp_reflect = value.sqrt(),
                    Side::Transmit => p.amp_transmit = value.sqrt(),
                },
            }
        }
    }
    p.validate()?;
    Ok(p)
}

/// Solves every `(grid value, protocol, side)` combination. Rows come back in
/// grid order, then protocol, then side (reflect before transmit); a failing
/// row records its error category in `status` instead of aborting.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    base: &SystemParams,
    axis: SweepAxis,
    grid: &[f64],
    targets: &RateTargets,
    protocols: &[Protocol],
    coupling: BetaCoupling,
    bounds: &SolverBounds,
    q: &QuadratureSpec,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "must not be empty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("grid", "must be strictly increasing"));
    }
    if protocols.is_empty() {
        return Err(Error::invalid("protocols", "must not be empty"));
    }
    bounds.validate()?;

    let jobs: Vec<(f64, Protocol, Side)> = grid
        .iter()
        .flat_map(|&v| {
            protocols
                .iter()
                .flat_map(move |&p| Side::ALL.into_iter().map(move |s| (v, p, s)))
        })
        .collect();

    Ok(jobs
        .into_par_iter()
        .map(|(value, protocol, side)| {
            let solved = params_for(base, axis, value, side, coupling).and_then(|p| {
                let g = gamma_params(p.n_elements)?;
                let query = CoverageQuery::new(protocol, side, targets.get(side)).with_bounds(bounds);
                max_distance(&p, &query, &g, q)
            });
            match solved {
                Ok(r) => SweepRow {
                    axis_value: value,
                    protocol,
                    side,
                    max_distance_m: Some(r.max_distance_m),
                    rate_at_boundary: Some(r.rate_at_boundary),
                    iterations: r.iterations,
                    status: r.bracket_status.as_str().to_owned(),
                },
                Err(e) => SweepRow {
                    axis_value: value,
                    protocol,
                    side,
                    max_distance_m: None,
                    rate_at_boundary: None,
                    iterations: 0,
                    status: format!("error:{}", e.category()),
                },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(p: &SystemParams, protocol: Protocol, side: Side, target: f64) -> CoverageResult {
        let g = gamma_params(p.n_elements).unwrap();
        max_distance(p, &CoverageQuery::new(protocol, side, target), &g, &QuadratureSpec::default()).unwrap()
    }

    #[test]
    fn bisection_on_known_function() {
        // rate(d) = 10/d crosses 1 at d = 10.
        let q = CoverageQuery::new(Protocol::Noma, Side::Reflect, 1.0);
        let r = max_distance_with(&q, |d| Ok(10.0 / d)).unwrap();
        assert_eq!(r.bracket_status, BracketStatus::Converged);
        assert!((r.max_distance_m - 10.0).abs() < 1e-9);
        let bound = ((q.d_max_m / q.d_min_m).ln() / DISTANCE_RESOLUTION).log2().ceil() as usize;
        assert!(r.iterations <= bound + 2, "{} > {}", r.iterations, bound);
    }

    #[test]
    fn tiny_target_saturates_at_dmax() {
        let r = solve(&SystemParams::default(), Protocol::Noma, Side::Reflect, 1e-12);
        assert_eq!(r.bracket_status, BracketStatus::TargetMetAtDmax);
        assert_eq!(r.max_distance_m, 1e4);
    }

    #[test]
    fn above_interference_ceiling_is_unreachable() {
        // log2(1 + 0.6/0.4) ≈ 1.3219
        let r = solve(&SystemParams::default(), Protocol::Noma, Side::Transmit, 1.33);
        assert_eq!(r.bracket_status, BracketStatus::TargetUnreachableAtDmin);
        assert!(r.rate_at_boundary < 1.33);
        assert!(r.rate_at_boundary > 1.3);
    }

    #[test]
    fn converged_reflect_edge() {
        let p = SystemParams::default();
        let r = solve(&p, Protocol::Noma, Side::Reflect, 0.8);
        assert_eq!(r.bracket_status, BracketStatus::Converged);
        assert!((r.rate_at_boundary - 0.8).abs() <= 1e-6);
        let g = gamma_params(15).unwrap();
        let q = QuadratureSpec::default();
        let inner = user_rate(&p, Protocol::Noma, Side::Reflect, 0.99 * r.max_distance_m, &g, &q).unwrap();
        let outer = user_rate(&p, Protocol::Noma, Side::Reflect, 1.01 * r.max_distance_m, &g, &q).unwrap();
        assert!(inner.rate_bps_hz > 0.8 && outer.rate_bps_hz < 0.8);
    }

    #[test]
    fn symmetric_sides_give_equal_distance() {
        let p = SystemParams {
            amp_reflect: 0.5f64.sqrt(),
            amp_transmit: 0.5f64.sqrt(),
            oma_power_reflect: 0.5,
            oma_power_transmit: 0.5,
            ..Default::default()
        };
        let g = gamma_params(15).unwrap();
        let region = coverage_rectangle(
            &p,
            &RateTargets { reflect: 0.5, transmit: 0.5 },
            Protocol::Oma,
            &SolverBounds::default(),
            &g,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(region.reflect.max_distance_m, region.transmit.max_distance_m);
    }

    #[test]
    fn sweep_rejects_bad_grids_and_flags_bad_rows() {
        let p = SystemParams::default();
        let b = SolverBounds::default();
        let q = QuadratureSpec::default();
        let t = RateTargets::default();
        assert!(sweep(&p, SweepAxis::NElements, &[], &t, &Protocol::ALL, BetaCoupling::EnergySplit, &b, &q).is_err());
        assert!(sweep(&p, SweepAxis::NElements, &[5.0, 5.0], &t, &Protocol::ALL, BetaCoupling::EnergySplit, &b, &q).is_err());

        // Independent coupling at β² = 0.7: 0.7 + 0.36 > 1 on the reflect row,
        // 0.64 + 0.7 > 1 on the transmit row.
        let rows = sweep(&p, SweepAxis::BetaSq, &[0.3, 0.7], &t, &[Protocol::Noma], BetaCoupling::Independent, &b, &q).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].status, "converged");
        assert_eq!(rows[2].status, "error:invalid-parameter");
        assert_eq!(rows[3].status, "error:invalid-parameter");
        assert!(rows[2].max_distance_m.is_none());
    }

    #[test]
    fn sweep_row_order() {
        let rows = sweep(
            &SystemParams::default(),
            SweepAxis::NElements,
            &[5.0, 10.0],
            &RateTargets::default(),
            &Protocol::ALL,
            BetaCoupling::EnergySplit,
            &SolverBounds::default(),
            &QuadratureSpec::default(),
        )
        .unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.axis_value, r.protocol, r.side)).collect();
        assert_eq!(keys[0], (5.0, Protocol::Noma, Side::Reflect));
        assert_eq!(keys[1], (5.0, Protocol::Noma, Side::Transmit));
        assert_eq!(keys[2], (5.0, Protocol::Oma, Side::Reflect));
        assert_eq!(keys[7], (10.0, Protocol::Oma, Side::Transmit));
    }
}
