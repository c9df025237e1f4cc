//! Flat key-value configuration with dotted sections.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Command-line overrides use the same `key=value` syntax and win
//! over the file. Unknown keys are rejected by name, out-of-range values by
//! the violated invariant.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sdfem::mesh::{DomainSpec, PorousSide, Rect};
use sdfem::verification::TimeRule;
use sdfem::ModelParams;

/// Which manufactured case drives forcing, boundary data and error
/// reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseChoice {
    Smooth,
    Zero,
}

/// What the invocation should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Convergence,
    Run,
    Ritz,
}

/// Fully resolved invocation settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub domain: DomainSpec,
    pub params: ModelParams,
    pub case: CaseChoice,
    pub h_list: Vec<f64>,
    pub time_rule: TimeRule,
    pub t_end: f64,
    /// Subdivisions per unit length for single-mesh modes.
    pub n: usize,
    pub volume_degree: usize,
    pub edge_degree: usize,
    pub jobs: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Verification-case defaults: unit parameters, halving grid sequence
    /// down to 1/32, quadratic time-step rule, unit final time.
    pub fn defaults(mode: Mode) -> Self {
        RunConfig {
            mode,
            domain: DomainSpec::benchmark(),
            params: ModelParams::unit(),
            case: CaseChoice::Smooth,
            h_list: vec![0.25, 0.125, 0.0625, 0.03125],
            time_rule: TimeRule::TauEqHSquared,
            t_end: 1.0,
            n: 8,
            volume_degree: 6,
            edge_degree: 6,
            jobs: 0,
            out_dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("SDFEM_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parse a config file (when given) and apply overrides on top of the
/// defaults for `mode`.
pub fn parse_config(
    mode: Mode,
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunConfig, String> {
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().to_string();
            if pairs.insert(key.clone(), value.trim().to_string()).is_none() {
                order.push(key);
            }
        }
    }
    for (key, value) in overrides {
        if pairs.insert(key.clone(), value.clone()).is_none() {
            order.push(key.clone());
        }
    }

    let mut config = RunConfig::defaults(mode);
    for key in &order {
        let value = &pairs[key];
        apply(&mut config, key, value)?;
    }
    validate(&config)?;
    Ok(config)
}

fn apply(config: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "geometry.fluid_rect" => config.domain.fluid_rect = parse_rect(key, value)?,
        "geometry.porous_rect" => config.domain.porous_rect = parse_rect(key, value)?,
        "geometry.dirichlet_side" => {
            config.domain.dirichlet_porous_side = match value {
                "top" => PorousSide::Top,
                "bottom" => PorousSide::Bottom,
                "left" => PorousSide::Left,
                "right" => PorousSide::Right,
                other => return Err(format!("{key}: unknown side {other}")),
            }
        }
        "params.nu" => config.params.nu = parse_f64(key, value)?,
        "params.k1" => config.params.k[0] = parse_f64(key, value)?,
        "params.k2" => config.params.k[1] = parse_f64(key, value)?,
        "params.g0" => config.params.g0 = parse_f64(key, value)?,
        "params.alpha" => config.params.alpha = parse_f64(key, value)?,
        "params.s0" => config.params.s0 = parse_f64(key, value)?,
        "params.gamma" => config.params.gamma = parse_f64(key, value)?,
        "case" => {
            config.case = match value {
                "smooth" => CaseChoice::Smooth,
                "zero" => CaseChoice::Zero,
                other => return Err(format!("case: unknown manufactured case {other}")),
            }
        }
        "study.h_list" => {
            config.h_list = value
                .split(',')
                .map(|item| parse_fraction(key, item.trim()))
                .collect::<Result<_, _>>()?;
        }
        "time.rule" => {
            config.time_rule = match value {
                "h2" => TimeRule::TauEqHSquared,
                "fixed" => match config.time_rule {
                    TimeRule::Explicit { .. } => config.time_rule,
                    _ => TimeRule::Explicit { tau: 0.01 },
                },
                other => return Err(format!("time.rule: expected h2 or fixed, got {other}")),
            }
        }
        "time.tau" => config.time_rule = TimeRule::Explicit { tau: parse_f64(key, value)? },
        "time.t_end" => config.t_end = parse_f64(key, value)?,
        "run.n" => config.n = parse_usize(key, value)?,
        "quadrature.volume_degree" => config.volume_degree = parse_usize(key, value)?,
        "quadrature.edge_degree" => config.edge_degree = parse_usize(key, value)?,
        "jobs" => config.jobs = parse_usize(key, value)?,
        "output.dir" => config.out_dir = PathBuf::from(value),
        other => return Err(format!("unknown config key: {other}")),
    }
    Ok(())
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("{key}: not a number: {value}"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("{key}: not a non-negative integer: {value}"))
}

/// Accepts `1/8` or a plain decimal.
fn parse_fraction(key: &str, value: &str) -> Result<f64, String> {
    if let Some((num, den)) = value.split_once('/') {
        let num = parse_f64(key, num.trim())?;
        let den = parse_f64(key, den.trim())?;
        if den == 0.0 {
            return Err(format!("{key}: division by zero in {value}"));
        }
        Ok(num / den)
    } else {
        parse_f64(key, value)
    }
}

fn parse_rect(key: &str, value: &str) -> Result<Rect, String> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|item| parse_f64(key, item.trim()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err(format!("{key}: expected x0,x1,y0,y1"));
    }
    Ok(Rect::new(parts[0], parts[1], parts[2], parts[3]))
}

fn validate(config: &RunConfig) -> Result<(), String> {
    config.params.validate().map_err(|e| e.to_string())?;
    if config.h_list.is_empty() {
        return Err("study.h_list: must not be empty".into());
    }
    for pair in config.h_list.windows(2) {
        if (pair[1] - 0.5 * pair[0]).abs() > 1e-12 {
            return Err(format!(
                "study.h_list: not a halving sequence at {} -> {}",
                pair[0], pair[1]
            ));
        }
    }
    for &h in &config.h_list {
        let n = (1.0 / h).round();
        if !(h > 0.0) || (n - 1.0 / h).abs() > 1e-9 || n < 2.0 {
            return Err(format!("study.h_list: {h} is not 1/n with n >= 2"));
        }
    }
    if !(config.t_end > 0.0) {
        return Err("time.t_end: must be positive".into());
    }
    if let TimeRule::Explicit { tau } = config.time_rule {
        if !(tau > 0.0) || tau > config.t_end {
            return Err(format!("time.tau: must lie in (0, t_end], got {tau}"));
        }
    }
    if config.n < 2 {
        return Err("run.n: must be at least 2".into());
    }
    if !(1..=10).contains(&config.volume_degree) || config.volume_degree < 6 {
        return Err(format!(
            "quadrature.volume_degree: must lie in 6..=10, got {}",
            config.volume_degree
        ));
    }
    if !(1..=10).contains(&config.edge_degree) || config.edge_degree < 5 {
        return Err(format!(
            "quadrature.edge_degree: must lie in 5..=10, got {}",
            config.edge_degree
        ));
    }
    Ok(())
}
