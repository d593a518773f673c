//! Command dispatch behind the `star-cov` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};

use crate::channel::{gamma_params, LinkGeometry, Protocol, Side};
use crate::config::{OutputTarget, RunConfig};
use crate::coverage::{coverage_rectangle, sweep, BetaCoupling, SweepAxis};
use crate::error::{Error, Result};
use crate::mc::{
    gamma_fit_report, mc_rate_noma_reflect, mc_rate_noma_transmit, mc_rate_oma, mc_sic_sinr_check,
    ChannelModel, McEstimate,
};
use crate::output::{write_table, Cell, Table};
use crate::rate::user_rate;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Rate,
    Coverage,
    Sweep {
        axis: SweepAxis,
        grid: Vec<f64>,
        protocols: Vec<Protocol>,
        coupling: BetaCoupling,
    },
    McValidate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rate => "rate",
            Command::Coverage => "coverage",
            Command::Sweep { .. } => "sweep",
            Command::McValidate => "mc-validate",
        }
    }
}

/// A finished table plus the metadata object attached to JSON output.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub metadata: Value,
}

fn decimals(s: &str) -> usize {
    s.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Parses `start:stop:step` (stop included when reachable) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::invalid("grid", msg);
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{s}` is not a number")))
            .and_then(|v| if v.is_finite() { Ok(v) } else { Err(bad(format!("`{s}` is not finite"))) })
    };

    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("range `{spec}` must be start:stop:step")));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) {
            return Err(bad("step must be positive".into()));
        }
        if stop < start {
            return Err(bad("stop must not be below start".into()));
        }
        let places = decimals(parts[0].trim()).max(decimals(parts[2].trim())) as i32;
        let scale = 10f64.powi(places);
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..=n)
            .map(|i| ((start + i as f64 * step) * scale).round() / scale)
            .collect();
        if let Some(last) = grid.last_mut() {
            if (*last - stop).abs() <= 1e-9 * stop.abs().max(1.0) {
                *last = stop;
            }
        }
        Ok(grid)
    } else {
        let grid = spec.split(',').map(num).collect::<Result<Vec<_>>>()?;
        if grid.is_empty() {
            return Err(bad("empty grid".into()));
        }
        Ok(grid)
    }
}

pub fn parse_protocols(spec: &str) -> Result<Vec<Protocol>> {
    let mut out = Vec::new();
    for p in spec.split(',') {
        let p = match p.trim() {
            "noma" => Protocol::Noma,
            "oma" => Protocol::Oma,
            other => return Err(Error::invalid("protocols", format!("unknown protocol `{other}`"))),
        };
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn metadata(cmd: &Command, cfg: &RunConfig, seed: Option<u64>) -> Value {
    let mut meta = json!({
        "tool": "star-cov",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "tolerances": {
            "rel_tolerance": cfg.quadrature.rel_tolerance,
            "abs_tolerance": cfg.quadrature.abs_tolerance,
            "max_subdivisions": cfg.quadrature.max_subdivisions,
            "rate_tolerance": cfg.bounds.rate_tolerance,
        },
        "config": cfg,
    });
    if let Some(seed) = seed {
        meta["seed"] = json!(seed);
    }
    if let Command::Sweep { axis, coupling, .. } = cmd {
        meta["axis"] = json!(axis.as_str());
        meta["beta_coupling"] = json!(coupling);
    }
    meta
}

fn distance_for(cfg: &RunConfig, side: Side) -> f64 {
    match side {
        Side::Reflect => cfg.distance_reflect_m,
        Side::Transmit => cfg.distance_transmit_m,
    }
}

fn rate_table(cfg: &RunConfig) -> Result<Table> {
    let g = gamma_params(cfg.system.n_elements)?;
    let mut t = Table::new(vec!["protocol", "side", "distance_m", "rate_bps_hz", "method", "est_abs_error"]);
    for protocol in Protocol::ALL {
        for side in Side::ALL {
            let d = distance_for(cfg, side);
            let r = user_rate(&cfg.system, protocol, side, d, &g, &cfg.quadrature)?;
            t.push(vec![
                Cell::text(protocol.as_str()),
                Cell::text(side.as_str()),
                Cell::Distance(d),
                Cell::Rate(r.rate_bps_hz),
                Cell::text(r.method.as_str()),
                Cell::Rate(r.est_abs_error),
            ]);
        }
    }
    Ok(t)
}

fn coverage_table(cfg: &RunConfig) -> Result<Table> {
    let g = gamma_params(cfg.system.n_elements)?;
    let mut t = Table::new(vec![
        "protocol",
        "side",
        "target_rate_bps_hz",
        "max_distance_m",
        "rate_at_boundary",
        "iterations",
        "status",
    ]);
    for protocol in Protocol::ALL {
        let region = coverage_rectangle(&cfg.system, &cfg.targets, protocol, &cfg.bounds, &g, &cfg.quadrature)?;
        for (side, r) in [(Side::Reflect, region.reflect), (Side::Transmit, region.transmit)] {
            t.push(vec![
                Cell::text(protocol.as_str()),
                Cell::text(side.as_str()),
                Cell::Rate(cfg.targets.get(side)),
                Cell::Distance(r.max_distance_m),
                Cell::Rate(r.rate_at_boundary),
                Cell::Int(r.iterations as u64),
                Cell::text(r.bracket_status.as_str()),
            ]);
        }
    }
    Ok(t)
}

fn sweep_table(
    cfg: &RunConfig,
    axis: SweepAxis,
    grid: &[f64],
    protocols: &[Protocol],
    coupling: BetaCoupling,
) -> Result<Table> {
    let rows = sweep(&cfg.system, axis, grid, &cfg.targets, protocols, coupling, &cfg.bounds, &cfg.quadrature)?;
    let mut t = Table::new(vec!["axis_value", "protocol", "side", "max_distance_m", "status"]);
    for r in rows {
        t.push(vec![
            Cell::Plain(r.axis_value),
            Cell::text(r.protocol.as_str()),
            Cell::text(r.side.as_str()),
            r.max_distance_m.map_or(Cell::Empty, Cell::Distance),
            Cell::text(r.status),
        ]);
    }
    Ok(t)
}

fn mc_for(cfg: &RunConfig, protocol: Protocol, side: Side, model: ChannelModel) -> Result<McEstimate> {
    let d = distance_for(cfg, side);
    match (protocol, side) {
        (Protocol::Noma, Side::Reflect) => mc_rate_noma_reflect(&cfg.system, d, model, &cfg.mc),
        (Protocol::Noma, Side::Transmit) => mc_rate_noma_transmit(&cfg.system, d, model, &cfg.mc),
        (Protocol::Oma, side) => mc_rate_oma(&cfg.system, &LinkGeometry::new(side, d)?, model, &cfg.mc),
    }
}

fn mc_validate_table(cfg: &RunConfig) -> Result<Table> {
    let g = gamma_params(cfg.system.n_elements)?;
    let seed = cfg.mc.seed;
    let mut t = Table::new(vec!["report", "protocol", "side", "quantity", "value", "seed"]);
    let mut push = |report: &str, protocol: &str, side: &str, quantity: &str, value: Cell| {
        t.push(vec![
            Cell::text(report),
            Cell::text(protocol),
            Cell::text(side),
            Cell::text(quantity),
            value,
            Cell::Int(seed),
        ]);
    };

    for protocol in Protocol::ALL {
        for side in Side::ALL {
            let (p, s) = (protocol.as_str(), side.as_str());
            let d = distance_for(cfg, side);
            let analytic = user_rate(&cfg.system, protocol, side, d, &g, &cfg.quadrature)?;
            let surrogate = mc_for(cfg, protocol, side, ChannelModel::GammaSurrogate)?;
            let exact = mc_for(cfg, protocol, side, ChannelModel::ExactCascade)?;
            let z = if surrogate.std_error > 0.0 {
                (surrogate.mean - analytic.rate_bps_hz).abs() / surrogate.std_error
            } else {
                0.0
            };
            push("rate_check", p, s, "distance_m", Cell::Distance(d));
            push("rate_check", p, s, "quadrature_bps_hz", Cell::Rate(analytic.rate_bps_hz));
            push("rate_check", p, s, "mc_surrogate_bps_hz", Cell::Rate(surrogate.mean));
            push("rate_check", p, s, "mc_surrogate_std_error", Cell::Rate(surrogate.std_error));
            push("rate_check", p, s, "surrogate_abs_z", Cell::Rate(z));
            push("rate_check", p, s, "mc_exact_bps_hz", Cell::Rate(exact.mean));
            push("rate_check", p, s, "mc_exact_std_error", Cell::Rate(exact.std_error));
            push(
                "rate_check",
                p,
                s,
                "exact_minus_quadrature_bps_hz",
                Cell::Rate(exact.mean - analytic.rate_bps_hz),
            );
        }
    }

    let sic = mc_sic_sinr_check(
        &cfg.system,
        cfg.distance_reflect_m,
        cfg.targets.transmit,
        ChannelModel::ExactCascade,
        &cfg.mc,
    )?;
    push("sic_check", "noma", "reflect", "target_rate_bps_hz", Cell::Rate(cfg.targets.transmit));
    push("sic_check", "noma", "reflect", "success_fraction", Cell::Rate(sic));

    let fit = gamma_fit_report(cfg.system.n_elements, &cfg.mc)?;
    let rows: [(&str, Cell); 15] = [
        ("n_elements", Cell::Int(u64::from(fit.n_elements))),
        ("n_samples", Cell::Int(fit.n_samples)),
        ("model_mean", Cell::Rate(fit.model_mean)),
        ("model_variance", Cell::Rate(fit.model_variance)),
        ("mean_s", Cell::Rate(fit.mean_s)),
        ("variance_s", Cell::Rate(fit.variance_s)),
        ("mean_w", Cell::Rate(fit.mean_w)),
        ("variance_w", Cell::Rate(fit.variance_w)),
        ("moment_rel_err_mean", Cell::Rate(fit.moment_rel_err_mean)),
        ("moment_rel_err_var", Cell::Rate(fit.moment_rel_err_var)),
        ("moment_rel_err_mean_w", Cell::Rate(fit.moment_rel_err_mean_w)),
        ("moment_rel_err_var_w", Cell::Rate(fit.moment_rel_err_var_w)),
        ("ks_distance_s", Cell::Rate(fit.ks_distance_s)),
        ("ks_distance_w", Cell::Rate(fit.ks_distance_w)),
        ("model_scale", Cell::Rate(g.scale)),
    ];
    for (quantity, value) in rows {
        push("gamma_fit", "", "", quantity, value);
    }
    Ok(t)
}

/// Runs `cmd` and returns its table without writing anything.
pub fn run_command(cmd: &Command, cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let (table, seed) = match cmd {
        Command::Rate => (rate_table(cfg)?, None),
        Command::Coverage => (coverage_table(cfg)?, None),
        Command::Sweep {
            axis,
            grid,
            protocols,
            coupling,
        } => (sweep_table(cfg, *axis, grid, protocols, *coupling)?, None),
        Command::McValidate => (mc_validate_table(cfg)?, Some(cfg.mc.seed)),
    };
    Ok(Report {
        table,
        metadata: metadata(cmd, cfg, seed),
    })
}

/// Writes a report to the configured destination in the configured format.
pub fn emit(report: &Report, cfg: &RunConfig) -> Result<()> {
    match &cfg.output_path {
        OutputTarget::Stdout => {
            let mut buf = Vec::new();
            write_table(&report.table, &report.metadata, cfg.output_format, &mut buf)?;
            let mut lock = io::stdout().lock();
            // A closed pipe (`| head`) is not an error for a filter-style tool.
            match lock.write_all(&buf).and_then(|()| lock.flush()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
        OutputTarget::File(path) => {
            let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_table(&report.table, &report.metadata, cfg.output_format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ranges() {
        assert_eq!(parse_grid("5:30:5").unwrap(), vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(parse_grid("0.1:0.9:0.2").unwrap(), vec![0.1, 0.3, 0.5, 0.7, 0.9]);
        assert_eq!(parse_grid("0:10:4").unwrap(), vec![0.0, 4.0, 8.0]);
        assert_eq!(parse_grid("1, 2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn protocol_lists() {
        assert_eq!(parse_protocols("noma,oma").unwrap(), vec![Protocol::Noma, Protocol::Oma]);
        assert_eq!(parse_protocols("oma").unwrap(), vec![Protocol::Oma]);
        assert!(parse_protocols("tdma").is_err());
    }
}
