//! One- and two-axis parameter scans.

use harvest_core::averaging;
use harvest_core::freq::Separatrix;
use harvest_core::resonance;
use rayon::prelude::*;

use crate::config::{ConfigError, Quantity, RunConfig};
use crate::ensemble::run_ensemble_par;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub quantities: Vec<Quantity>,
    /// Axis coordinates per cell, first axis slowest.
    pub points: Vec<Vec<f64>>,
    /// One value per quantity per cell; NaN where it failed.
    pub values: Vec<Vec<f64>>,
    /// `quantity:code` entries joined by `;`, empty when the cell is clean.
    pub errors: Vec<String>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.errors.iter().filter(|e| !e.is_empty()).count()
    }

    /// Cell with the largest finite value of `q`.
    pub fn argmax(&self, q: Quantity) -> Option<usize> {
        let k = self.quantities.iter().position(|x| *x == q)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, row) in self.values.iter().enumerate() {
            let v = row[k];
            if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

fn code(e: &ConfigError) -> &'static str {
    match e {
        ConfigError::Physical(e) => e.code(),
        ConfigError::Schema { .. } => "schema",
        ConfigError::Io { .. } => "io",
    }
}

/// Evaluates `quantities` for one configuration.
pub fn evaluate(cfg: &RunConfig, quantities: &[Quantity]) -> (Vec<f64>, Vec<String>) {
    let mut values = vec![f64::NAN; quantities.len()];
    let mut errors = Vec::new();
    let phys = match cfg.physics() {
        Ok(p) => p,
        Err(e) => {
            let c = code(&e);
            errors.extend(quantities.iter().map(|q| format!("{}:{c}", q.name())));
            return (values, errors);
        }
    };
    let (p, np, ex) = (&phys.system, &phys.noise, &phys.excitation);
    let wants = |qs: &[Quantity]| quantities.iter().any(|q| qs.contains(q));

    let v2 = wants(&[Quantity::Power, Quantity::VRms]).then(|| averaging::mean_square_voltage(p, np, &phys.grid));
    let sr = wants(&[Quantity::Snr, Quantity::OmegaEq]).then(|| resonance::analyze(p, np, ex, phys.convention));
    let mc = wants(&[Quantity::McsPower, Quantity::McsVRms, Quantity::McsEfficiency, Quantity::McsSnr])
        .then(|| run_ensemble_par(p, np, ex, &phys.sim));

    for (slot, q) in values.iter_mut().zip(quantities) {
        let r: Result<f64, &'static str> = match q {
            Quantity::Power | Quantity::VRms => match v2.as_ref().expect("computed above") {
                Ok(v) if *q == Quantity::Power => Ok(p.kappa() * p.alpha() * v),
                Ok(v) => Ok(v.sqrt()),
                Err(e) => Err(e.code()),
            },
            Quantity::Snr | Quantity::OmegaEq => match sr.as_ref().expect("computed above") {
                Ok(r) if *q == Quantity::Snr => Ok(r.snr),
                Ok(r) => Ok(r.equilibria.omega_eq),
                Err(e) => Err(e.code()),
            },
            Quantity::WellDepth => Separatrix::new(p).map(|s| s.depth).map_err(|e| e.code()),
            Quantity::McsPower | Quantity::McsVRms | Quantity::McsEfficiency | Quantity::McsSnr => {
                match mc.as_ref().expect("computed above") {
                    Err(e) => Err(e.code()),
                    Ok(est) if est.divergent > 0 => Err("diverged"),
                    Ok(est) => match q {
                        Quantity::McsPower => Ok(est.mean_power),
                        Quantity::McsVRms => Ok(est.v_rms),
                        Quantity::McsEfficiency => est.efficiency_pct.ok_or("efficiency_undefined"),
                        _ => est.psd_snr.map(|s| s.estimate).ok_or("psd_missing"),
                    },
                }
            }
        };
        match r {
            Ok(v) => *slot = v,
            Err(c) => errors.push(format!("{}:{c}", q.name())),
        }
    }
    (values, errors)
}

/// Runs the sweep block of `cfg` over the current rayon pool.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult, ConfigError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::Schema { path: "sweep".into(), message: "missing sweep block".into() })?;
    let grids: Vec<Vec<f64>> = sw.axes.iter().map(|a| a.values()).collect();
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for g in &grids {
        points = points.into_iter().flat_map(|pt| g.iter().map(move |v| [pt.clone(), vec![*v]].concat())).collect();
    }
    let cells: Vec<(Vec<f64>, Vec<String>)> = points
        .par_iter()
        .map(|pt| {
            let mut c = cfg.clone();
            for (a, v) in sw.axes.iter().zip(pt) {
                c = match c.with_param(&a.param, *v) {
                    Ok(c) => c,
                    Err(e) => {
                        let code = code(&e);
                        let errs = sw.quantities.iter().map(|q| format!("{}:{code}", q.name())).collect();
                        return (vec![f64::NAN; sw.quantities.len()], errs);
                    }
                };
            }
            evaluate(&c, &sw.quantities)
        })
        .collect();
    let (values, errors) = cells.into_iter().map(|(v, e)| (v, e.join(";"))).unzip();
    Ok(SweepResult {
        axes: sw.axes.iter().map(|a| a.param.clone()).collect(),
        quantities: sw.quantities.clone(),
        points,
        values,
        errors,
    })
}
