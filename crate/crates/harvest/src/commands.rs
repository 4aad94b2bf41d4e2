//! Subcommand implementations: each builds a [`Table`] and writes it with
//! its provenance record.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Result};
use harvest_core::averaging::{self, joint_spd, StationaryModel};
use harvest_core::freq::{build_table, RELATIVE_BAND};
use harvest_core::resonance;
use harvest_core::MotionRegime;
use serde_json::{json, Value};

use crate::config::{Loaded, Physics};
use crate::ensemble::{analytic_on_sim_grid, run_ensemble_par};
use crate::output::{config_hash, emit, Cell, Meta, Table};
use crate::sweep::run_sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Freq,
    Spd,
    Power,
    Snr,
    Mcs,
    Sweep,
    Compare,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Freq => "freq",
            Subcommand::Spd => "spd",
            Subcommand::Power => "power",
            Subcommand::Snr => "snr",
            Subcommand::Mcs => "mcs",
            Subcommand::Sweep => "sweep",
            Subcommand::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses all hardware threads.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Flagged failures (failed cells, divergent trajectories, undefined
    /// efficiency). Nonzero means a nonzero exit status.
    pub failures: usize,
}

struct Product {
    stem_suffix: String,
    table: Table,
    settings: Value,
    failures: usize,
}

fn rel_gap(analytic: f64, mcs: f64) -> f64 {
    (analytic - mcs) / mcs
}

fn freq(ph: &Physics, loaded: &Loaded) -> Result<Vec<Product>> {
    let f = &loaded.config.freq;
    let table = build_table(&ph.system, f.h_max, f.samples)?;
    let sep = table.separatrix();
    let mut t = Table::new(["regime", "energy", "omega", "period"]);
    for r in MotionRegime::ALL {
        let (h, w) = table.samples(r);
        for (h, w) in h.iter().zip(w) {
            t.push(vec![r.name().into(), (*h).into(), (*w).into(), (2.0 * PI / w).into()]);
        }
    }
    let settings = json!({
        "omega_bottom": sep.omega_bottom,
        "bottom_energy": sep.bottom_energy,
        "well_depth": sep.depth,
        "separatrix_half_width": sep.half_width,
        "separatrix_relative_band": RELATIVE_BAND,
    });
    Ok(vec![Product { stem_suffix: "freq".into(), table: t, settings, failures: 0 }])
}

fn spd(ph: &Physics) -> Result<Vec<Product>> {
    let model = StationaryModel::for_grid(ph.system, ph.noise, &ph.grid)?;
    let field = joint_spd(&model, &ph.grid)?;
    let g = field.grid;
    let mut t = Table::new(["x", "v", "density", "energy", "omega"]);
    for i in 0..g.nx {
        for j in 0..g.nv {
            let k = g.index(i, j);
            t.push(vec![
                g.x(i).into(),
                g.v(j).into(),
                field.values[k].into(),
                field.energy()[k].into(),
                field.omega()[k].into(),
            ]);
        }
    }
    let settings = json!({
        "grid": {"x_min": g.x_min, "x_max": g.x_max, "nx": g.nx, "v_min": g.v_min, "v_max": g.v_max, "nv": g.nv},
        "log_norm_const": field.log_norm_const,
        "total": field.total(),
        "boundary_ratio": field.boundary_ratio(),
        "separatrix_half_width": model.table().separatrix().half_width,
    });
    Ok(vec![Product { stem_suffix: "spd".into(), table: t, settings, failures: 0 }])
}

fn power(ph: &Physics) -> Result<Vec<Product>> {
    let v2 = averaging::mean_square_voltage(&ph.system, &ph.noise, &ph.grid)?;
    let mut t = Table::new(["D", "c", "mean_square_voltage", "v_rms", "mean_power"]);
    let p = &ph.system;
    t.push(vec![
        ph.noise.intensity().into(),
        ph.noise.correlation_time().into(),
        v2.into(),
        v2.sqrt().into(),
        (p.kappa() * p.alpha() * v2).into(),
    ]);
    Ok(vec![Product { stem_suffix: "power".into(), table: t, settings: json!({}), failures: 0 }])
}

fn snr(ph: &Physics) -> Result<Vec<Product>> {
    let r = resonance::analyze(&ph.system, &ph.noise, &ph.excitation, ph.convention)?;
    let mut t = Table::new([
        "omega_eq",
        "x_s",
        "lambda_s_plus",
        "lambda_s_minus",
        "lambda_u_plus",
        "lambda_u_minus",
        "r0",
        "r1",
        "s1_integral",
        "s2_at_omega",
        "snr",
    ]);
    let mut row: Vec<Cell> = vec![r.equilibria.omega_eq.into(), r.equilibria.x_s_plus.into()];
    row.extend(r.lambdas.iter().map(|l| Cell::Num(*l)));
    row.extend([r.r0, r.r1, r.s1_integral, r.s2_at_omega, r.snr].map(Cell::Num));
    t.push(row);
    let settings = json!({ "rate_convention": format!("{:?}", ph.convention) });
    Ok(vec![Product { stem_suffix: "snr".into(), table: t, settings, failures: 0 }])
}

fn mcs(ph: &Physics) -> Result<Vec<Product>> {
    let est = run_ensemble_par(&ph.system, &ph.noise, &ph.excitation, &ph.sim)?;
    let mut t = Table::new([
        "mean_power",
        "mean_power_se",
        "mean_square_voltage",
        "v_rms",
        "input_power",
        "efficiency_pct",
        "psd_snr",
        "psd_snr_se",
        "psd_line_ratio",
        "trajectories",
        "divergent",
        "samples",
        "flags",
    ]);
    let psd = est.psd_snr;
    let mut flags = Vec::new();
    if est.efficiency_pct.is_none() {
        flags.push("efficiency_undefined");
    }
    if est.divergent > 0 {
        flags.push("diverged");
    }
    t.push(vec![
        est.mean_power.into(),
        est.mean_power_se.into(),
        est.mean_square_voltage.into(),
        est.v_rms.into(),
        est.input_power.into(),
        est.efficiency_pct.unwrap_or(f64::NAN).into(),
        psd.map_or(f64::NAN, |s| s.estimate).into(),
        psd.map_or(f64::NAN, |s| s.std_error).into(),
        psd.map_or(f64::NAN, |s| s.line_ratio).into(),
        Cell::Int(est.trajectories as i64),
        Cell::Int(est.divergent as i64),
        Cell::Int(est.samples as i64),
        flags.join(";").into(),
    ]);
    let h = &est.histogram;
    let mut ht = Table::new(["x", "v", "density"]);
    for i in 0..h.grid.nx {
        for j in 0..h.grid.nv {
            ht.push(vec![h.grid.x(i).into(), h.grid.v(j).into(), h.values[h.grid.index(i, j)].into()]);
        }
    }
    let settings = sim_settings(ph);
    Ok(vec![
        Product { stem_suffix: "mcs".into(), table: t, settings: settings.clone(), failures: flags.len() },
        Product { stem_suffix: "mcs-histogram".into(), table: ht, settings, failures: 0 },
    ])
}

fn sim_settings(ph: &Physics) -> Value {
    let s = &ph.sim;
    json!({
        "dt": s.dt,
        "t_total": s.t_total,
        "t_transient": s.transient(&ph.excitation),
        "n_traj": s.n_traj,
        "x0": s.x0,
        "integrator": "semi-implicit Euler-Maruyama, exact OU step",
        "rng": "ChaCha8, stream = trajectory index",
    })
}

fn sweep(loaded: &Loaded) -> Result<Vec<Product>> {
    let r = run_sweep(&loaded.config)?;
    let mut cols: Vec<String> = r.axes.clone();
    cols.extend(r.quantities.iter().map(|q| q.name().to_string()));
    cols.push("error".into());
    let mut t = Table::new(cols);
    for ((pt, vals), err) in r.points.iter().zip(&r.values).zip(&r.errors) {
        let mut row: Vec<Cell> = pt.iter().map(|v| Cell::Num(*v)).collect();
        row.extend(vals.iter().map(|v| Cell::Num(*v)));
        row.push(err.clone().into());
        t.push(row);
    }
    let argmax: Value = r
        .quantities
        .iter()
        .filter_map(|q| r.argmax(*q).map(|i| (q.name().to_string(), json!(r.points[i]))))
        .collect::<serde_json::Map<_, _>>()
        .into();
    let settings = json!({ "cells": r.points.len(), "argmax": argmax, "separatrix_relative_band": RELATIVE_BAND });
    Ok(vec![Product { stem_suffix: "sweep".into(), table: t, settings, failures: r.failures() }])
}

fn compare(ph: &Physics) -> Result<Vec<Product>> {
    let (p, np, ex) = (&ph.system, &ph.noise, &ph.excitation);
    let est = run_ensemble_par(p, np, ex, &ph.sim)?;
    let mut failures = usize::from(est.divergent > 0);
    let mut t = Table::new(["quantity", "analytic", "mcs", "mcs_std_error", "relative_gap", "error"]);
    let ka = p.kappa() * p.alpha();
    let mut row = |name: &str, analytic: harvest_core::Result<f64>, mcs: f64, se: f64| {
        let (a, err) = match analytic {
            Ok(a) => (a, String::new()),
            Err(e) => {
                failures += 1;
                (f64::NAN, e.code().to_string())
            }
        };
        t.push(vec![name.into(), a.into(), mcs.into(), se.into(), rel_gap(a, mcs).into(), err.into()]);
    };
    let v2 = averaging::mean_square_voltage(p, np, &ph.grid);
    row("mean_power", v2.clone().map(|v| ka * v), est.mean_power, est.mean_power_se);
    // delta method: se(√P/(κα)) from se(P)
    let v_se = if ka > 0.0 { est.mean_power_se / ka / (2.0 * est.v_rms) } else { f64::NAN };
    row("v_rms", v2.map(f64::sqrt), est.v_rms, v_se);
    if let Some(s) = est.psd_snr {
        let seg = harvest_core::spectrum::SegmentPeriodogram::new(
            ph.sim.psd.as_ref().expect("psd configured"),
            ex.omega(),
            ph.sim.dt,
        )?;
        let scale = 2.0 * PI / seg.duration();
        let a = resonance::analyze(p, np, ex, ph.convention).map(|r| r.snr);
        row("snr", a, s.line_ratio, s.std_error * scale);
    }
    let l1 = analytic_on_sim_grid(p, np, &ph.sim).and_then(|f| est.histogram.l1_distance(&f));
    match l1 {
        Ok(d) => t.push(vec!["density_l1".into(), 0.0.into(), d.into(), f64::NAN.into(), f64::NAN.into(), "".into()]),
        Err(e) => {
            failures += 1;
            t.push(vec![
                "density_l1".into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                e.code().into(),
            ])
        }
    }
    Ok(vec![Product { stem_suffix: "compare".into(), table: t, settings: sim_settings(ph), failures }])
}

/// Runs `sub` on a parsed configuration and writes its files.
pub fn run(sub: Subcommand, loaded: &Loaded, opts: &Options) -> Result<Outcome> {
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let ph = loaded.config.physics()?;
    if sub == Subcommand::Sweep && loaded.config.sweep.is_none() {
        return Err(anyhow!("`sweep` needs a sweep block in the configuration"));
    }
    let products = pool.install(|| match sub {
        Subcommand::Freq => freq(&ph, loaded),
        Subcommand::Spd => spd(&ph),
        Subcommand::Power => power(&ph),
        Subcommand::Snr => snr(&ph),
        Subcommand::Mcs => mcs(&ph),
        Subcommand::Sweep => sweep(loaded),
        Subcommand::Compare => compare(&ph),
    })?;
    let config = loaded.config.resolved();
    let hash = config_hash(&config);
    let out = &loaded.config.output;
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from(&out.dir));
    let wall = started.elapsed().as_secs_f64();
    let mut files = Vec::new();
    let mut failures = 0;
    for prod in products {
        failures += prod.failures;
        let meta = Meta {
            tool: "harvest",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: sub.name().into(),
            config_sha256: hash.clone(),
            seed: loaded.config.sim.seed,
            threads: pool.current_num_threads(),
            columns: prod.table.columns.clone(),
            rows: prod.table.rows.len(),
            failures: prod.failures,
            defaults_applied: loaded.defaults_applied.clone(),
            settings: prod.settings,
            config: config.clone(),
            wall_time_s: wall,
        };
        files.push(emit(&dir, &format!("{}-{}", out.prefix, prod.stem_suffix), &prod.table, &meta)?);
    }
    Ok(Outcome { files, failures })
}

