//! Flat key/value run configuration.
//!
//! The document is a flat TOML table, one `key = value` per line. Every key
//! is optional and falls back to the reference setup; unknown keys are
//! rejected. See the README for the full key list.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::coverage::{RateTargets, SolverBounds};
use crate::error::{Error, Result};
use crate::mc::McConfig;
use crate::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config {
                location: "key `output_format`".into(),
                message: format!("expected `csv` or `json`, got `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputTarget {
    #[default]
    Stdout,
    File(PathBuf),
}

impl OutputTarget {
    /// `-` selects standard output.
    pub fn from_arg(s: &str) -> Self {
        if s == "-" {
            OutputTarget::Stdout
        } else {
            OutputTarget::File(PathBuf::from(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemParams,
    pub quadrature: QuadratureSpec,
    pub mc: McConfig,
    pub targets: RateTargets,
    pub bounds: SolverBounds,
    /// Distances used by `rate` and `mc-validate`.
    pub distance_reflect_m: f64,
    pub distance_transmit_m: f64,
    pub output_path: OutputTarget,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            quadrature: QuadratureSpec::default(),
            mc: McConfig::default(),
            targets: RateTargets::default(),
            bounds: SolverBounds::default(),
            distance_reflect_m: 10.0,
            distance_transmit_m: 10.0,
            output_path: OutputTarget::Stdout,
            output_format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    total_power_dbm: Option<f64>,
    noise_power_dbm: Option<f64>,
    n_elements: Option<u32>,
    path_loss_exponent: Option<f64>,
    bs_ris_distance_m: Option<f64>,
    #[serde(alias = "p_r")]
    power_split_reflect: Option<f64>,
    #[serde(alias = "p_t")]
    power_split_transmit: Option<f64>,
    #[serde(alias = "beta_r")]
    amp_reflect: Option<f64>,
    #[serde(alias = "beta_t")]
    amp_transmit: Option<f64>,
    #[serde(alias = "delta_r")]
    oma_resource_share_reflect: Option<f64>,
    #[serde(alias = "delta_t")]
    oma_resource_share_transmit: Option<f64>,
    oma_power_reflect: Option<f64>,
    oma_power_transmit: Option<f64>,

    #[serde(alias = "r_r")]
    target_rate_reflect: Option<f64>,
    #[serde(alias = "r_t")]
    target_rate_transmit: Option<f64>,
    distance_reflect_m: Option<f64>,
    distance_transmit_m: Option<f64>,
    d_min_m: Option<f64>,
    d_max_m: Option<f64>,
    rate_tolerance: Option<f64>,

    rel_tolerance: Option<f64>,
    abs_tolerance: Option<f64>,
    max_subdivisions: Option<usize>,

    mc_samples: Option<u64>,
    seed: Option<u64>,
    chunk_size: Option<u64>,

    output_path: Option<String>,
    output_format: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn constraint(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config {
            location: format!("key `{name}`"),
            message: reason,
        },
        other => other,
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        location: match e.span() {
            Some(span) => format!("line {}", line_of(text, span.start)),
            None => "document".into(),
        },
        message: e.message().trim().to_owned(),
    })?;

    let mut cfg = RunConfig::default();
    let s = &mut cfg.system;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(s.total_power_dbm, raw.total_power_dbm);
    set!(s.noise_power_dbm, raw.noise_power_dbm);
    set!(s.n_elements, raw.n_elements);
    set!(s.path_loss_exponent, raw.path_loss_exponent);
    set!(s.bs_ris_distance_m, raw.bs_ris_distance_m);
    set!(s.power_split_reflect, raw.power_split_reflect);
    set!(s.power_split_transmit, raw.power_split_transmit);
    set!(s.amp_reflect, raw.amp_reflect);
    set!(s.amp_transmit, raw.amp_transmit);
    set!(s.oma_resource_share_reflect, raw.oma_resource_share_reflect);
    set!(s.oma_resource_share_transmit, raw.oma_resource_share_transmit);
    set!(s.oma_power_reflect, raw.oma_power_reflect);
    set!(s.oma_power_transmit, raw.oma_power_transmit);

    set!(cfg.targets.reflect, raw.target_rate_reflect);
    set!(cfg.targets.transmit, raw.target_rate_transmit);
    set!(cfg.distance_reflect_m, raw.distance_reflect_m);
    set!(cfg.distance_transmit_m, raw.distance_transmit_m);
    set!(cfg.bounds.d_min_m, raw.d_min_m);
    set!(cfg.bounds.d_max_m, raw.d_max_m);
    set!(cfg.bounds.rate_tolerance, raw.rate_tolerance);

    set!(cfg.quadrature.rel_tolerance, raw.rel_tolerance);
    set!(cfg.quadrature.abs_tolerance, raw.abs_tolerance);
    set!(cfg.quadrature.max_subdivisions, raw.max_subdivisions);

    set!(cfg.mc.n_samples, raw.mc_samples);
    set!(cfg.mc.seed, raw.seed);
    set!(cfg.mc.chunk_size, raw.chunk_size);

    if let Some(p) = raw.output_path {
        cfg.output_path = OutputTarget::from_arg(&p);
    }
    if let Some(f) = raw.output_format {
        cfg.output_format = OutputFormat::parse(&f)?;
    }

    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(constraint)?;
        self.quadrature.validate().map_err(constraint)?;
        self.mc.validate().map_err(|e| match e {
            Error::InvalidParameter { name: "n_samples", reason } => Error::Config {
                location: "key `mc_samples`".into(),
                message: reason,
            },
            other => constraint(other),
        })?;
        self.bounds.validate().map_err(constraint)?;
        for (key, v) in [
            ("target_rate_reflect", self.targets.reflect),
            ("target_rate_transmit", self.targets.transmit),
            ("distance_reflect_m", self.distance_reflect_m),
            ("distance_transmit_m", self.distance_transmit_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config {
                    location: format!("key `{key}`"),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let s = cfg.system;
        assert_eq!((s.total_power_dbm, s.noise_power_dbm), (30.0, -30.0));
        assert_eq!((s.amp_reflect, s.amp_transmit), (0.8, 0.6));
        assert_eq!((s.power_split_reflect, s.power_split_transmit), (0.4, 0.6));
        assert_eq!((s.path_loss_exponent, s.bs_ris_distance_m), (2.5, 10.0));
        assert_eq!((cfg.targets.reflect, cfg.targets.transmit), (0.8, 0.3));
        assert_eq!((s.oma_power_reflect, s.oma_resource_share_transmit), (0.5, 0.5));
    }

    #[test]
    fn overrides_and_aliases() {
        let cfg = parse_config(
            "# comment\nn_elements = 30\nbeta_r = 0.6\nbeta_t = 0.8\nseed = 7\noutput_format = \"json\"\n",
        )
        .unwrap();
        assert_eq!(cfg.system.n_elements, 30);
        assert_eq!(cfg.system.amp_reflect, 0.6);
        assert_eq!(cfg.mc.seed, 7);
        assert_eq!(cfg.output_format, OutputFormat::Json);
    }

    #[test]
    fn decoding_order_violation_rejected() {
        let err = parse_config("p_r = 0.7\np_t = 0.3\n").unwrap_err();
        match err {
            Error::Config { location, message } => {
                assert!(location.contains("power_split_reflect"), "{location}");
                assert!(message.contains("p_r <= p_t"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn passive_constraint_violation_rejected() {
        let err = parse_config("beta_r = 0.9\nbeta_t = 0.6\n").unwrap_err();
        assert!(err.to_string().contains("beta_r^2 + beta_t^2 <= 1"), "{err}");
    }

    #[test]
    fn unknown_key_named_with_line() {
        let err = parse_config("n_elements = 15\nbogus_key = 1\n").unwrap_err();
        match err {
            Error::Config { location, message } => {
                assert_eq!(location, "line 2");
                assert!(message.contains("bogus_key"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_value_rejected() {
        assert!(matches!(parse_config("n_elements = \"many\"\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("output_format = \"xml\"\n"), Err(Error::Config { .. })));
        assert!(matches!(parse_config("mc_samples = 5\n"), Err(Error::Config { .. })));
    }
}
