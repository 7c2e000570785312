//! Subcommand implementations. Exit codes: 0 success/converged, 1 config or
//! I/O error (propagated as `Err`), 2 non-converged or failed validation,
//! 3 sweep with failed sub-runs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use nemslab_core::core_energy::{core_constant, CoreResolution};
use nemslab_core::energy::{check_average_bound, check_gl_bound, energy_full, vertical_average, EnergyBreakdown};
use nemslab_core::experiments::recovery_init;
use nemslab_core::field::{init_director, DirectorField, UNIT_NORM_TOL};
use nemslab_core::harmonic::{minimize_renormalized, w_of_positions};
use nemslab_core::params::ScalingParams;
use nemslab_core::solver::minimize_full;
use nemslab_core::vortex::locate_defects;

use crate::config::{csv_header, load_config, CliOverrides, Parameterization, RunConfig};
use crate::dump;

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create output dir {}", path.display()))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn single_params(cfg: &RunConfig) -> Result<ScalingParams> {
    match &cfg.parameterization {
        Parameterization::Single(p) => Ok(*p),
        Parameterization::Schedule { .. } => {
            bail!("this command needs a single (eps, eta) or (h, lambda) parameterization")
        }
    }
}

fn energy_csv(cfg: &RunConfig, p: &ScalingParams, e: &EnergyBreakdown) -> String {
    format!("{}{}\n{}\n", csv_header(cfg), EnergyBreakdown::CSV_HEADER, e.csv_row(p))
}

fn defect_csv(cfg: &RunConfig, field: &DirectorField, threshold: f64) -> (String, usize, Vec<String>) {
    let found = locate_defects(&vertical_average(field), threshold);
    let body = format!("{}{}", csv_header(cfg), found.csv_rows());
    (body, found.items.len(), found.warnings)
}

pub fn minimize(config: &Path, out: Option<String>, seed: Option<u64>) -> Result<u8> {
    let cfg = load_config(config, &CliOverrides { out, seed })?;
    let p = single_params(&cfg)?;
    ensure_dir(&cfg.out_dir)?;

    let init = init_director(&cfg.grid, &cfg.datum, cfg.solve.seed, 1e-2);
    let (field, report) = minimize_full(&init, &cfg.datum, &p, &cfg.solve)?;

    dump::write_dump(&cfg.out_dir.join("field.bin"), &field, &p)?;
    write_text(&cfg.out_dir.join("energy.csv"), &energy_csv(&cfg, &p, &report.final_energy))?;
    let (dcsv, n_def, warnings) = defect_csv(&cfg, &field, cfg.raw.sweep.core_threshold);
    write_text(&cfg.out_dir.join("defects.csv"), &dcsv)?;

    let mut rep = String::new();
    rep.push_str(&format!("config = {}\n", cfg.hash));
    rep.push_str(&format!("eps = {}\neta = {}\nbbh_regime = {}\n", p.eps(), p.eta(), p.bbh_regime()));
    rep.push_str(&format!(
        "iterations = {}\nresidual = {:e}\nconverged = {}\nstop = {:?}\n",
        report.iterations, report.residual, report.converged, report.stop
    ));
    rep.push_str(&format!("energy_total = {}\n", report.final_energy.total()));
    rep.push_str(&format!("defects = {n_def}\n"));
    for w in &warnings {
        rep.push_str(&format!("warning = {w}\n"));
    }
    write_text(&cfg.out_dir.join("report.txt"), &rep)?;

    Ok(if report.converged { 0 } else { 2 })
}

pub fn sweep(config: &Path, out: Option<String>, seed: Option<u64>) -> Result<u8> {
    let cfg = load_config(config, &CliOverrides { out, seed })?;
    let (k, schedule) = match &cfg.parameterization {
        Parameterization::Schedule { k, entries } => (*k, entries.clone()),
        Parameterization::Single(_) => bail!("sweep needs params.k and params.eps_list"),
    };
    if schedule.len() < 3 {
        bail!("sweep needs at least 3 eps entries, got {}", schedule.len());
    }
    ensure_dir(&cfg.out_dir)?;
    let degree = cfg.datum.degree();
    let n_def = degree.unsigned_abs() as usize;

    // run largest eps first so warm starts walk down the schedule
    let mut entries = schedule;
    entries.sort_by(|a, b| b.eps().partial_cmp(&a.eps()).unwrap());

    let w_opt = if degree > 0 {
        Some(minimize_renormalized(&cfg.domain, &cfg.datum, n_def, &cfg.raw.renormalized.seeds)?)
    } else {
        None
    };

    let mut init = match (&w_opt, cfg.raw.sweep.recovery_init) {
        (Some((pos, _)), true) => recovery_init(&cfg.grid, &cfg.datum, pos, cfg.solve.seed, 1e-2)?,
        _ => init_director(&cfg.grid, &cfg.datum, cfg.solve.seed, 1e-2),
    };

    let mut table = format!(
        "{}eps,eta,total,e_def,n_defects,converged,iterations,residual,status\n",
        csv_header(&cfg)
    );
    let mut any_failed = false;
    let mut all_converged = true;
    let mut e_defs: Vec<f64> = Vec::new();

    for p in &entries {
        let sub = cfg.out_dir.join(format!("eps_{}", p.eps()));
        ensure_dir(&sub)?;
        match minimize_full(&init, &cfg.datum, p, &cfg.solve) {
            Ok((field, report)) => {
                let e_def = report.final_energy.total()
                    - n_def as f64 * std::f64::consts::PI * p.eps().ln().abs();
                dump::write_dump(&sub.join("field.bin"), &field, p)?;
                write_text(&sub.join("energy.csv"), &energy_csv(&cfg, p, &report.final_energy))?;
                let (dcsv, n_found, _) = defect_csv(&cfg, &field, cfg.raw.sweep.core_threshold);
                write_text(&sub.join("defects.csv"), &dcsv)?;
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{:e},ok\n",
                    p.eps(),
                    p.eta(),
                    report.final_energy.total(),
                    e_def,
                    n_found,
                    report.converged,
                    report.iterations,
                    report.residual
                ));
                all_converged &= report.converged;
                e_defs.push(e_def);
                if cfg.raw.sweep.warm_start {
                    init = field;
                }
            }
            Err(e) => {
                any_failed = true;
                table.push_str(&format!("{},{},,,,,,,failed: {e}\n", p.eps(), p.eta()));
                init = init_director(&cfg.grid, &cfg.datum, cfg.solve.seed, 1e-2);
            }
        }
    }

    // prediction from the planar machinery
    let mut rep = String::new();
    rep.push_str(&format!("config = {}\nk = {k}\n", cfg.hash));
    if let Some((pos, w)) = &w_opt {
        rep.push_str(&format!("w_optimum = {w}\n"));
        rep.push_str(&format!("w_positions = {pos:?}\n"));
        let sw = &cfg.raw.sweep;
        let ladder: Vec<(f64, f64)> =
            sw.core_ladder.iter().map(|t| (t * sw.core_base_eps, sw.core_base_eps)).collect();
        let resolutions: Vec<CoreResolution> = sw
            .core_ladder
            .iter()
            .map(|t| CoreResolution { nx: (2.0 * sw.core_cells_per_eps * t) as usize + 1, n_layers: cfg.grid.n_layers })
            .collect();
        let core_opts = nemslab_core::solver::SolveOptions { stall_tol: cfg.solve.stall_tol.max(1e-7), ..cfg.solve };
        match core_constant(k, &ladder, &resolutions, &core_opts, true) {
            Ok(core) => {
                rep.push_str(&format!("gamma = {}\ngamma_spread = {}\n", core.gamma, core.spread));
                if let Some(warn) = &core.warning {
                    rep.push_str(&format!("gamma_warning = {warn}\n"));
                }
                let prediction = w + n_def as f64 * core.gamma;
                rep.push_str(&format!("prediction_w_plus_n_gamma = {prediction}\n"));
                if e_defs.len() >= 2 {
                    let plateau = 0.5 * (e_defs[e_defs.len() - 1] + e_defs[e_defs.len() - 2]);
                    rep.push_str(&format!("e_def_plateau = {plateau}\n"));
                    rep.push_str(&format!(
                        "relative_gap = {}\n",
                        (plateau - prediction).abs() / prediction.abs().max(1e-12)
                    ));
                }
            }
            Err(e) => {
                any_failed = true;
                rep.push_str(&format!("gamma_error = {e}\n"));
            }
        }
    }
    write_text(&cfg.out_dir.join("sweep.csv"), &table)?;
    write_text(&cfg.out_dir.join("report.txt"), &rep)?;

    Ok(if any_failed {
        3
    } else if all_converged {
        0
    } else {
        2
    })
}

pub fn renormalized(config: &Path, out: Option<String>, seed: Option<u64>) -> Result<u8> {
    let cfg = load_config(config, &CliOverrides { out, seed })?;
    ensure_dir(&cfg.out_dir)?;
    let n = cfg.raw.renormalized.n_defects;
    let (pos, val) = minimize_renormalized(&cfg.domain, &cfg.datum, n, &cfg.raw.renormalized.seeds)?;

    let stride = cfg.raw.renormalized.scan_stride;
    if stride > 0 {
        let mut csv = csv_header(&cfg);
        for i in 0..n {
            csv.push_str(&format!("a{}x,a{}y,", i + 1, i + 1));
        }
        csv.push_str("w\n");
        let dom = &cfg.domain;
        for j in (0..dom.ny).step_by(stride) {
            for i in (0..dom.nx).step_by(stride) {
                let idx = dom.idx(i, j);
                let p = dom.node_pos(idx);
                // scans place one probe defect (n=1) or an antipodal pair (n=2)
                let probe: Vec<[f64; 2]> = match n {
                    1 => vec![p],
                    2 => vec![p, [-p[0], -p[1]]],
                    _ => continue,
                };
                let w = w_of_positions(dom, &cfg.datum, &probe);
                if w.is_finite() {
                    for q in &probe {
                        csv.push_str(&format!("{},{},", q[0], q[1]));
                    }
                    csv.push_str(&format!("{w}\n"));
                }
            }
        }
        write_text(&cfg.out_dir.join("landscape.csv"), &csv)?;
    }

    let mut rep = format!("config = {}\nn_defects = {n}\nw_optimum = {val}\n", cfg.hash);
    for (i, p) in pos.iter().enumerate() {
        rep.push_str(&format!("a{} = {},{}\n", i + 1, p[0], p[1]));
    }
    write_text(&cfg.out_dir.join("report.txt"), &rep)?;
    println!("W optimum {val} at {pos:?}");
    Ok(0)
}

pub fn core(config: &Path, out: Option<String>, seed: Option<u64>) -> Result<u8> {
    let cfg = load_config(config, &CliOverrides { out, seed })?;
    ensure_dir(&cfg.out_dir)?;
    let c = &cfg.raw.core;
    let ladder: Vec<(f64, f64)> = c.sigma_list.iter().map(|&s| (s, c.eps)).collect();
    let resolutions: Vec<CoreResolution> = if !c.nx_list.is_empty() {
        if c.nx_list.len() != c.sigma_list.len() {
            bail!("core.nx_list must match core.sigma_list in length");
        }
        c.nx_list.iter().map(|&nx| CoreResolution { nx, n_layers: c.n_layers }).collect()
    } else {
        c.sigma_list
            .iter()
            .map(|&s| CoreResolution {
                nx: (2.0 * c.cells_per_eps * s / c.eps).ceil() as usize + 1,
                n_layers: c.n_layers,
            })
            .collect()
    };
    let out = core_constant(c.k, &ladder, &resolutions, &cfg.solve, true)?;
    let csv = format!("{}{}", csv_header(&cfg), nemslab_core::core_energy::core_csv(c.k, &out.samples));
    write_text(&cfg.out_dir.join("core.csv"), &csv)?;
    let mut rep = format!(
        "config = {}\nk = {}\ngamma = {}\nspread = {}\n",
        cfg.hash, out.k, out.gamma, out.spread
    );
    if let Some(w) = &out.warning {
        rep.push_str(&format!("warning = {w}\n"));
    }
    write_text(&cfg.out_dir.join("report.txt"), &rep)?;
    println!("gamma = {} (last-two spread {:.2}%)", out.gamma, 100.0 * out.spread);
    Ok(0)
}

pub fn analyze(dump_path: &Path, out: Option<String>, c_star: Option<f64>) -> Result<u8> {
    let loaded = dump::read_dump(dump_path)?;
    let out_dir: PathBuf = out.unwrap_or_else(|| "runs/analysis".to_string()).into();
    ensure_dir(&out_dir)?;
    let field = &loaded.field;
    let p = &loaded.params;

    let mut rep = String::new();
    rep.push_str(&format!("dump = {}\n", dump_path.display()));
    rep.push_str(&format!("eps = {}\neta = {}\n", p.eps(), p.eta()));

    let mut failed_validation = false;
    if let Err((layer, node, norm)) = field.validate_unit(UNIT_NORM_TOL) {
        failed_validation = true;
        let pos = field.grid.domain.node_pos(node);
        rep.push_str(&format!(
            "validation = FAILED: |U| = {norm} at layer {layer}, node {node} ({}, {})\n",
            pos[0], pos[1]
        ));
    } else {
        rep.push_str("validation = ok\n");
    }

    let e = energy_full(field, p);
    rep.push_str(&format!(
        "bulk_h = {}\nbulk_v = {}\nanchor = {}\ntotal = {}\n",
        e.bulk_horizontal,
        e.bulk_vertical,
        e.anchoring,
        e.total()
    ));
    let gl = check_gl_bound(field, p);
    rep.push_str(&format!(
        "gl_bound = lhs {} rhs {} slack {} holds {}\n",
        gl.lhs, gl.rhs, gl.slack, gl.holds
    ));
    if let Some(c) = c_star {
        match nemslab_core::energy::check_gl_bound_strict(field, p, c) {
            Ok(strict) => rep.push_str(&format!(
                "gl_bound_strict(c_star={c}) = lhs {} rhs {} holds {}\n",
                strict.lhs, strict.rhs, strict.holds
            )),
            Err(e) => rep.push_str(&format!("gl_bound_strict(c_star={c}) = not applicable: {e}\n")),
        }
    }
    let avg = check_average_bound(field);
    rep.push_str(&format!(
        "average_bound = max_lhs {:?} rhs {} holds {}\n",
        avg.layer_lhs.iter().cloned().fold(0.0f64, f64::max),
        avg.rhs,
        avg.holds
    ));
    let found = locate_defects(&vertical_average(field), 0.5);
    rep.push_str(&format!("defects = {}\n", found.items.len()));
    for d in &found.items {
        rep.push_str(&format!("defect = {},{} charge {}\n", d.position[0], d.position[1], d.charge));
    }
    for w in &found.warnings {
        rep.push_str(&format!("warning = {w}\n"));
    }
    write_text(&out_dir.join("analysis.txt"), &rep)?;
    let mut dcsv = format!(
        "# nemslab-csv v1 config={} eps={} eta={} k={}\n",
        loaded.hash,
        p.eps(),
        p.eta(),
        p.eta() / p.eps()
    );
    dcsv.push_str(&found.csv_rows());
    write_text(&out_dir.join("defects.csv"), &dcsv)?;

    Ok(if failed_validation { 2 } else { 0 })
}
