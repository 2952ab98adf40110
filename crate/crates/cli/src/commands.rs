use std::collections::BTreeMap;

use mimo_adhoc::capacity::{geometric_grid, network_capacity, optimal_density, optimal_density_by, transmission_probability};
use mimo_adhoc::montecarlo::{empirical_capacity_with, sample_sinr, EmpiricalCdf, EmpiricalOutage};
use mimo_adhoc::randmat::{largest_gain_cdf, DEFAULT_MOMENT_SEED};
use mimo_adhoc::{Detector, Error, LambdaMoments, Scenario, SinrModel};

use crate::config::{LambdaBackend, PathMode, RunConfig};
use crate::table::ResultTable;
use crate::validate::{Validator, CRITERIA};
use crate::{CliError, Command};

/// `(analytic, empirical)` columns wanted for a detector under a path mode.
fn paths(mode: PathMode, detector: Detector) -> Result<(bool, bool), CliError> {
    let has_analytic = detector == Detector::Mmse;
    match mode {
        PathMode::Auto => Ok((has_analytic, true)),
        PathMode::Empirical => Ok((false, true)),
        PathMode::Analytic | PathMode::Both if !has_analytic => Err(CliError::Core(Error::UnsupportedCombination(
            format!("no analytic path for detector {detector}; use path=empirical or path=auto"),
        ))),
        PathMode::Analytic => Ok((true, false)),
        PathMode::Both => Ok((true, true)),
    }
}

pub fn lambda_for(cfg: &RunConfig, m: usize) -> Result<LambdaMoments<f64>, CliError> {
    match cfg.lambda {
        LambdaBackend::MonteCarlo => LambdaMoments::monte_carlo(m, cfg.lambda_samples, DEFAULT_MOMENT_SEED),
        LambdaBackend::Exact => LambdaMoments::exact(m),
    }
    .map_err(CliError::Core)
}

fn model(cfg: &RunConfig, s: Scenario<f64>) -> Result<SinrModel<f64>, CliError> {
    SinrModel::new(s, lambda_for(cfg, s.m)?).map_err(CliError::Core)
}

fn metadata(cfg: &RunConfig, cmd: Command, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut meta = cfg.to_pairs();
    meta.insert("command".into(), cmd.as_str().into());
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    for (k, v) in extra {
        meta.insert(format!("table.{k}"), v.clone());
    }
    meta
}

fn columns<'a>(lead: &[&'a str], analytic: Option<&'a str>, empirical: Option<&'a str>) -> Vec<&'a str> {
    lead.iter().copied().chain(analytic).chain(empirical).collect()
}

pub fn sinr_cdf(cfg: &RunConfig) -> Result<Vec<ResultTable>, CliError> {
    let mut tables = Vec::new();
    for &m in &cfg.m {
        for &det in &cfg.detector {
            let s = cfg.scenario(m, det);
            let (an, em) = paths(cfg.path, det)?;
            let model = if an { Some(model(cfg, s)?) } else { None };
            let cols = columns(&["K", "sinr"], an.then_some("cdf_analytic"), em.then_some("cdf_empirical"));
            let meta = metadata(cfg, Command::SinrCdf, &[("m", m.to_string()), ("detector", det.to_string())]);
            let mut table = ResultTable::new(&cols, meta);
            for &k in &cfg.k {
                let ecdf = if em {
                    Some(EmpiricalCdf::new(sample_sinr(&s, k, cfg.trials, cfg.seed)?)?)
                } else {
                    None
                };
                let analytic_cdf: Option<Box<dyn Fn(f64) -> f64>> = match &model {
                    Some(_) if k == 0 => {
                        let p0 = s.signal_power();
                        Some(Box::new(move |x: f64| largest_gain_cdf(m, x / p0)))
                    }
                    Some(md) => {
                        let fit = md.fit(k)?;
                        Some(Box::new(move |x: f64| fit.cdf(x)))
                    }
                    None => None,
                };
                let (lo, hi) = match (&ecdf, &model) {
                    (Some(e), _) => (e.min(), e.max()),
                    (None, Some(md)) => {
                        let mo = md.moments(k)?;
                        (0.0, mo.mean + 6.0 * mo.variance.sqrt())
                    }
                    (None, None) => unreachable!("at least one path is selected"),
                };
                let n = cfg.grid_points;
                for i in 0..n {
                    let x = if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                    let mut row = vec![k as f64, x];
                    if let Some(f) = &analytic_cdf {
                        row.push(f(x));
                    }
                    if let Some(e) = &ecdf {
                        row.push(e.eval(x));
                    }
                    table.push(row);
                }
            }
            tables.push(table);
        }
    }
    Ok(tables)
}

pub fn moments(cfg: &RunConfig) -> Result<Vec<ResultTable>, CliError> {
    let mut tables = Vec::new();
    for &m in &cfg.m {
        for &det in &cfg.detector {
            let s = cfg.scenario(m, det);
            let (an, em) = paths(cfg.path, det)?;
            let model = if an { Some(model(cfg, s)?) } else { None };
            let mut cols = vec!["K"];
            if an {
                cols.push("mean_analytic");
            }
            if em {
                cols.push("mean_empirical");
            }
            if an {
                cols.push("m2_analytic");
            }
            if em {
                cols.push("m2_empirical");
            }
            let meta = metadata(cfg, Command::Moments, &[("m", m.to_string()), ("detector", det.to_string())]);
            let mut table = ResultTable::new(&cols, meta);
            for &k in &cfg.k {
                let analytic = model.as_ref().map(|md| md.moments(k)).transpose()?;
                let empirical = if em {
                    Some(EmpiricalCdf::new(sample_sinr(&s, k, cfg.trials, cfg.seed)?)?)
                } else {
                    None
                };
                let mut row = vec![k as f64];
                if let Some(a) = &analytic {
                    row.push(a.mean);
                }
                if let Some(e) = &empirical {
                    row.push(e.mean());
                }
                if let Some(a) = &analytic {
                    row.push(a.second_moment());
                }
                if let Some(e) = &empirical {
                    row.push(e.second_moment());
                }
                table.push(row);
            }
            tables.push(table);
        }
    }
    Ok(tables)
}

pub fn capacity_sweep(cfg: &RunConfig) -> Result<Vec<ResultTable>, CliError> {
    let grid = geometric_grid(cfg.rho_min, cfg.rho_max, cfg.rho_points);
    let mut tables = Vec::new();
    for &m in &cfg.m {
        for &det in &cfg.detector {
            let s = cfg.scenario(m, det);
            let (an, em) = paths(cfg.path, det)?;
            let model = if an { Some(model(cfg, s)?) } else { None };
            let outage = if em {
                Some(EmpiricalOutage::new(s, cfg.trials, cfg.seed)?)
            } else {
                None
            };
            let cols = columns(&["rho0"], an.then_some("capacity_analytic"), em.then_some("capacity_empirical"));
            let meta = metadata(cfg, Command::CapacitySweep, &[("m", m.to_string()), ("detector", det.to_string())]);
            let mut table = ResultTable::new(&cols, meta);
            for &rho in &grid {
                let mut row = vec![rho];
                if let Some(md) = &model {
                    row.push(network_capacity(rho, md)?);
                }
                if let Some(t) = &outage {
                    row.push(empirical_capacity_with(t, rho, cfg.outer, cfg.seed)?);
                }
                table.push(row);
            }
            tables.push(table);
        }
    }
    Ok(tables)
}

pub fn optimal_density_cmd(cfg: &RunConfig) -> Result<Vec<ResultTable>, CliError> {
    let mut tables = Vec::new();
    let mut cols = vec!["m", "rho_star", "c_star", "boundary", "multiple_maxima"];
    if cfg.total_density.is_some() {
        cols.extend(["p_t_star", "saturated"]);
    }
    for &det in &cfg.detector {
        let (an, em) = paths(cfg.path, det)?;
        let variants: Vec<&str> = [(an, "analytic"), (em && !(an && cfg.path == PathMode::Auto), "empirical")]
            .into_iter()
            .filter_map(|(on, name)| on.then_some(name))
            .collect();
        for variant in variants {
            let meta = metadata(cfg, Command::OptimalDensity, &[("detector", det.to_string()), ("path", variant.into())]);
            let mut table = ResultTable::new(&cols, meta);
            for &m in &cfg.m {
                let s = cfg.scenario(m, det);
                let curve = if variant == "analytic" {
                    optimal_density(&model(cfg, s)?, cfg.rho_min, cfg.rho_max, cfg.rho_points)?
                } else {
                    let t = EmpiricalOutage::new(s, cfg.trials, cfg.seed)?;
                    optimal_density_by(
                        |r| empirical_capacity_with(&t, r, cfg.outer, cfg.seed),
                        cfg.rho_min,
                        cfg.rho_max,
                        cfg.rho_points,
                    )?
                };
                let opt = curve.optimum;
                if opt.boundary {
                    eprintln!(
                        "warning: m={m} {det} {variant}: optimum at the edge of [{}, {}]",
                        cfg.rho_min, cfg.rho_max
                    );
                }
                let mut row = vec![
                    m as f64,
                    opt.rho_star,
                    opt.c_star,
                    opt.boundary as u8 as f64,
                    opt.multiple_local_maxima as u8 as f64,
                ];
                if let Some(l) = cfg.total_density {
                    let (p, sat) = transmission_probability(opt.rho_star, l)?;
                    row.extend([p, sat as u8 as f64]);
                }
                table.push(row);
            }
            tables.push(table);
        }
    }
    Ok(tables)
}

/// Runs the requested checks; returns the report table and the number of
/// failed checks.
pub fn validate(cfg: &RunConfig) -> Result<(Vec<ResultTable>, usize), CliError> {
    let validator = Validator::new(cfg.clone());
    let mut extra: Vec<(&str, String)> = Vec::new();
    let names: Vec<String> = cfg.criteria.iter().map(|&c| format!("{c}:{}", CRITERIA[c - 1].1)).collect();
    extra.push(("checks", names.join(",")));
    let mut table = ResultTable::new(&["criterion", "measured", "bound", "passed"], metadata(cfg, Command::Validate, &extra));
    let mut failed = 0;
    for &id in &cfg.criteria {
        let check = validator.run(id)?;
        eprintln!("{}", check.line());
        failed += (!check.passed) as usize;
        table.push(vec![id as f64, check.measured, check.bound, check.passed as u8 as f64]);
    }
    Ok((vec![table], failed))
}
