use std::f64::consts::{LN_2, PI};

use proptest::prelude::*;
use star_cov::coverage::{max_distance, max_distance_with};
use star_cov::quadrature::integrate;
use star_cov::{
    effective_gain, ergodic_log_gamma, gamma_params, mc_rate_noma_reflect, mc_rate_noma_transmit,
    noma_rate_reflect, noma_rate_transmit, oma_rate, user_rate, BracketStatus, ChannelModel,
    CoverageQuery, GainRole, GammaApprox, LinkGeometry, McConfig, Protocol, QuadratureSpec,
    SystemParams,
};

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn density_has_unit_mass_and_gamma_mean() {
    for n in [1u32, 2, 5, 15, 30, 64] {
        let g = gamma_params(n).unwrap();
        let upper = g.mean() + 40.0 * g.shape.sqrt() * g.scale;
        let spec = QuadratureSpec {
            rel_tolerance: 1e-12,
            abs_tolerance: 1e-14,
            max_subdivisions: 500,
        };
        let mass = integrate(|w| g.pdf(w).unwrap(), 0.0, upper, &spec).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-8, "N={n}: mass {}", mass.value);
        let mean = integrate(|w| w * g.pdf(w).unwrap(), 0.0, upper, &spec).unwrap();
        let expected = f64::from(n) * PI / 4.0;
        assert!((mean.value - expected).abs() < 1e-8 * expected, "N={n}: mean {}", mean.value);
    }
}

#[test]
fn density_nonnegative() {
    let g = gamma_params(3).unwrap();
    for i in 0..2000 {
        let w = f64::from(i) * 0.01;
        assert!(g.pdf(w).unwrap() >= 0.0);
    }
}

/// Independent route for the transmit-side rate: integrate the SINR form
/// directly instead of differencing two single-user rates.
fn transmit_rate_direct(params: &SystemParams, d_t: f64, g: &GammaApprox) -> f64 {
    let geo = LinkGeometry::transmit(d_t).unwrap();
    let s = effective_gain(params, &geo, Protocol::Noma, GainRole::Signal).unwrap();
    let i = effective_gain(params, &geo, Protocol::Noma, GainRole::Interference).unwrap();
    let upper = g.mean() + 60.0 * g.shape.sqrt() * g.scale;
    let spec = QuadratureSpec {
        rel_tolerance: 1e-12,
        abs_tolerance: 1e-15,
        max_subdivisions: 1000,
    };
    integrate(
        |w| g.pdf(w).unwrap() * (s * w / (i * w + 1.0)).ln_1p() / LN_2,
        0.0,
        upper,
        &spec,
    )
    .unwrap()
    .value
}

#[test]
fn transmit_difference_matches_sinr_integral() {
    let p = SystemParams::default();
    for n in [1u32, 5, 15, 30] {
        let g = gamma_params(n).unwrap();
        for d in [1.0, 10.0, 60.0, 500.0] {
            let diff = noma_rate_transmit(&p, d, &g, &q()).unwrap().rate_bps_hz;
            let direct = transmit_rate_direct(&p, d, &g);
            assert!((diff - direct).abs() < 1e-9, "N={n} d={d}: {diff} vs {direct}");
        }
    }
}

#[test]
fn jensen_upper_bound_on_grid() {
    for n in [1u32, 5, 15, 30] {
        let g = gamma_params(n).unwrap();
        for c in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e4] {
            let f = ergodic_log_gamma(c, &g, &q()).unwrap().rate_bps_hz;
            assert!(f <= (1.0 + c * g.mean()).log2() + 1e-12, "N={n} c={c}");
        }
    }
}

// Dominance holds in the high-SNR region; at long range with few elements
// the orthogonal split can win, so the grid stops at 40 m.
#[test]
fn noma_sum_rate_dominates_oma_on_reference_grid() {
    let p = SystemParams::default();
    for n in [5u32, 10, 15, 20, 25, 30] {
        let g = gamma_params(n).unwrap();
        for d in [5.0, 10.0, 20.0, 40.0] {
            let noma = noma_rate_reflect(&p, d, &g, &q()).unwrap().rate_bps_hz
                + noma_rate_transmit(&p, d, &g, &q()).unwrap().rate_bps_hz;
            let oma = oma_rate(&p, &LinkGeometry::reflect(d).unwrap(), &g, &q()).unwrap().rate_bps_hz
                + oma_rate(&p, &LinkGeometry::transmit(d).unwrap(), &g, &q()).unwrap().rate_bps_hz;
            assert!(noma >= oma, "N={n} d={d}: NOMA {noma} < OMA {oma}");
        }
    }
}

#[test]
fn surrogate_mc_confirms_solved_boundary() {
    let p = SystemParams::default();
    let g = gamma_params(15).unwrap();
    let r = max_distance(&p, &CoverageQuery::new(Protocol::Noma, star_cov::Side::Reflect, 0.8), &g, &q()).unwrap();
    assert_eq!(r.bracket_status, BracketStatus::Converged);
    let cfg = McConfig {
        n_samples: 1_000_000,
        seed: 11,
        ..McConfig::default()
    };
    let mc = mc_rate_noma_reflect(&p, r.max_distance_m, ChannelModel::GammaSurrogate, &cfg).unwrap();
    assert!((mc.mean - 0.8).abs() < 3.0 * mc.std_error, "{} ± {}", mc.mean, mc.std_error);
}

#[test]
fn solver_with_monte_carlo_callback_agrees_with_quadrature() {
    let p = SystemParams::default();
    let g = gamma_params(15).unwrap();
    let query = CoverageQuery::new(Protocol::Noma, star_cov::Side::Transmit, 0.3);
    let analytic = max_distance(&p, &query, &g, &q()).unwrap();

    let cfg = McConfig {
        n_samples: 400_000,
        seed: 3,
        ..McConfig::default()
    };
    let mut se_at_boundary = 0.0;
    let mc = max_distance_with(&query, |d| {
        let e = mc_rate_noma_transmit(&p, d, ChannelModel::GammaSurrogate, &cfg)?;
        se_at_boundary = e.std_error;
        Ok(e.mean)
    })
    .unwrap();

    // Propagate the rate uncertainty through the local slope of the analytic map.
    let d = analytic.max_distance_m;
    let h = 1e-3 * d;
    let rate = |x| user_rate(&p, Protocol::Noma, star_cov::Side::Transmit, x, &g, &q()).unwrap().rate_bps_hz;
    let slope = (rate(d + h) - rate(d - h)) / (2.0 * h);
    let allowed = 3.0 * se_at_boundary / slope.abs();
    assert!(
        (mc.max_distance_m - d).abs() <= allowed,
        "mc {} vs analytic {d}, allowed {allowed}",
        mc.max_distance_m
    );
}

#[test]
fn standard_error_halves_when_samples_quadruple() {
    let p = SystemParams::default();
    let mut ratios = Vec::new();
    for seed in 0..4u64 {
        let small = McConfig {
            n_samples: 50_000,
            seed,
            chunk_size: 4096,
        };
        let big = McConfig {
            n_samples: 200_000,
            ..small
        };
        let a = mc_rate_noma_reflect(&p, 30.0, ChannelModel::ExactCascade, &small).unwrap();
        let b = mc_rate_noma_reflect(&p, 30.0, ChannelModel::ExactCascade, &big).unwrap();
        ratios.push(b.std_error / a.std_error);
    }
    for r in ratios {
        assert!((r - 0.5).abs() <= 0.1, "ratio {r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_increases_in_gain_shape_and_scale(
        c in 1e-4f64..1e3,
        shape in 0.5f64..40.0,
        scale in 0.05f64..3.0,
        bump in 1.05f64..2.0,
    ) {
        let g = GammaApprox::new(shape, scale).unwrap();
        let base = ergodic_log_gamma(c, &g, &q()).unwrap().rate_bps_hz;
        let more_c = ergodic_log_gamma(c * bump, &g, &q()).unwrap().rate_bps_hz;
        let more_k = ergodic_log_gamma(c, &GammaApprox::new(shape * bump, scale).unwrap(), &q()).unwrap().rate_bps_hz;
        let more_t = ergodic_log_gamma(c, &GammaApprox::new(shape, scale * bump).unwrap(), &q()).unwrap().rate_bps_hz;
        prop_assert!(more_c > base);
        prop_assert!(more_k > base);
        prop_assert!(more_t > base);
        prop_assert!(base <= (1.0 + c * g.mean()).log2() + 1e-12);
    }

    #[test]
    fn transmit_rate_nonnegative_and_below_ceiling(
        p_r in 0.0f64..=0.5,
        n in 1u32..40,
        d_t in 0.5f64..500.0,
        snr_db in 20.0f64..90.0,
    ) {
        let p = SystemParams {
            power_split_reflect: p_r,
            power_split_transmit: 1.0 - p_r,
            n_elements: n,
            ..SystemParams::default()
        }
        .with_snr_db(snr_db);
        let g = gamma_params(n).unwrap();
        let r = noma_rate_transmit(&p, d_t, &g, &q()).unwrap().rate_bps_hz;
        prop_assert!(r >= 0.0);
        if p_r > 0.0 {
            prop_assert!(r <= (1.0 + (1.0 - p_r) / p_r).log2() + 1e-9);
        }
    }

    #[test]
    fn gain_monotone_in_distance_and_snr(
        d1 in 0.5f64..1000.0,
        factor in 1.01f64..10.0,
        snr_db in 0.0f64..100.0,
    ) {
        let p = SystemParams::default().with_snr_db(snr_db);
        let hotter = p.with_snr_db(snr_db + 1.0);
        for protocol in Protocol::ALL {
            for side in star_cov::Side::ALL {
                let near = LinkGeometry::new(side, d1).unwrap();
                let far = LinkGeometry::new(side, d1 * factor).unwrap();
                let c_near = effective_gain(&p, &near, protocol, GainRole::Signal).unwrap();
                let c_far = effective_gain(&p, &far, protocol, GainRole::Signal).unwrap();
                let c_hot = effective_gain(&hotter, &near, protocol, GainRole::Signal).unwrap();
                prop_assert!(c_far < c_near);
                prop_assert!(c_hot > c_near);
            }
        }
    }

    #[test]
    fn rates_decrease_with_distance(d in 1.0f64..300.0, factor in 1.05f64..3.0) {
        let p = SystemParams::default();
        let g = gamma_params(15).unwrap();
        for protocol in Protocol::ALL {
            for side in star_cov::Side::ALL {
                let near = user_rate(&p, protocol, side, d, &g, &q()).unwrap().rate_bps_hz;
                let far = user_rate(&p, protocol, side, d * factor, &g, &q()).unwrap().rate_bps_hz;
                prop_assert!(far < near);
            }
        }
    }
}
