use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use mmab_core::chain::{self, build_kernel, recurrence_classes, stability_report, SolveOptions, StateSpace, UtilityModel};
use mmab_core::config::{self, RunConfig};
use mmab_core::report::{Aggregate, RunSummary};
use mmab_core::{run_horizon, Error};
use rayon::prelude::*;
use serde_json::json;

use crate::grid::Point;

pub const SWEEP_COLUMNS: &str =
    "parameter,value,seed,status,horizon,completed_epochs,final_profile,final_is_optimal,total_regret,regret_per_unit,message";
pub const STABILITY_COLUMNS: &str =
    "eps,pi_optimal,pi_aligned_content,pi_all_discontent,pi_best_other_aligned,residual,method";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

pub fn validate(path: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match config::validate_config(&text) {
        Ok(cfg) => {
            println!("{}: valid", path.display());
            if cfg.oracle.is_none() {
                println!("note: oracle disabled (enumeration cap exceeded); regret is not tracked");
            }
            for w in &cfg.warnings {
                println!("warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Invalid(issues)) => {
            println!("{}: {} problem(s)", path.display(), issues.len());
            for i in &issues {
                println!("error: {i}");
            }
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn oracle(cfg: &RunConfig, as_json: bool) -> Result<ExitCode> {
    let oracle = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| anyhow!("instance exceeds the oracle enumeration cap"))?;
    let sol = oracle.solution();
    let sep = &cfg.separability;
    if as_json {
        println!("{}", serde_json::to_string(&json!({ "solution": sol, "separability": sep }))?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("optimal profile  {}", sol.optimal_profile);
    println!("unique           {}", sol.unique);
    println!("J1               {}", sol.j1);
    println!("J2               {}", sol.j2);
    println!("delta            {}", sol.delta);
    match sep.nu_min {
        Some(nu) => println!("nu_min           {nu}"),
        None => println!("nu_min           undefined"),
    }
    println!("sep threshold    {}", sep.sep_threshold);
    println!("separable        {}", sep.passed);
    for v in &sep.offending {
        println!(
            "  player {} channel {}: levels {} and {} differ by {}",
            v.player, v.channel, v.n1, v.n2, v.gap
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn run(cfg: &RunConfig, config_path: &Path, out: &Path) -> Result<ExitCode> {
    create_dir(out)?;
    write_file(&out.join("config.toml"), &cfg.source)?;
    let oracle = cfg.oracle.as_ref();
    let summaries = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<RunSummary> {
            let trace = run_horizon(&cfg.env, oracle, &cfg.schedule, cfg.horizon, seed);
            let path = out.join(trace_name(seed));
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            trace
                .write_csv(&mut w)
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {}", path.display()))?;
            let summary = RunSummary::new(&trace, oracle);
            write_json(&out.join(summary_name(seed)), &summary)?;
            Ok(summary)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = Aggregate::new(&summaries, oracle);
    write_json(&out.join("aggregate.json"), &aggregate)?;
    let manifest = json!({
        "config_path": config_path.display().to_string(),
        "config_copy": "config.toml",
        "horizon": cfg.horizon,
        "seeds": cfg.seeds,
        "schedule": cfg.schedule,
        "trace_columns": trace_columns(cfg.env.num_players()),
        "runs": cfg.seeds.iter().map(|&s| json!({
            "seed": s,
            "trace": trace_name(s),
            "summary": summary_name(s),
        })).collect::<Vec<_>>(),
        "aggregate": "aggregate.json",
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("{} run(s) written to {}", summaries.len(), out.display());
    if let Some(f) = aggregate.fraction_optimal {
        println!("fraction ending on {}: {f}", oracle.unwrap().solution().optimal_profile);
    }
    Ok(ExitCode::SUCCESS)
}

fn trace_name(seed: u64) -> String {
    format!("trace-seed-{seed}.csv")
}

fn summary_name(seed: u64) -> String {
    format!("summary-seed-{seed}.json")
}

fn trace_columns(players: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["time", "epoch", "phase"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=players).map(|j| format!("a{j}")));
    cols.push("regret".into());
    cols
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn sweep(cfg: &RunConfig, points: &[Point], out: &Path) -> Result<ExitCode> {
    create_dir(out)?;
    let oracle = cfg.oracle.as_ref();
    let jobs: Vec<(&Point, u64)> = points
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(point, seed)| {
            let head = format!("{},{},{}", point.parameter, csv_field(&point.value), seed);
            match &point.setting {
                Err(msg) => format!("{head},error,,,,,,,{}", csv_field(msg)),
                Ok(s) => {
                    let trace = run_horizon(&s.env, oracle, &s.schedule, s.horizon, seed);
                    let summary = RunSummary::new(&trace, oracle);
                    let per_unit = summary
                        .total_regret
                        .filter(|_| s.horizon > 0)
                        .map(|r| r / s.horizon as f64);
                    format!(
                        "{head},ok,{},{},{},{},{},{},",
                        s.horizon,
                        summary.completed_epochs,
                        csv_field(&opt(summary.final_profile.as_ref())),
                        opt(summary.final_is_optimal),
                        opt(summary.total_regret),
                        opt(per_unit),
                    )
                }
            }
        })
        .collect();
    let path = out.join("sweep.csv");
    let mut text = String::from(SWEEP_COLUMNS);
    text.push('\n');
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    write_file(&path, &text)?;
    let failed = points.iter().filter(|p| p.setting.is_err()).count();
    println!("{} row(s) written to {}", rows.len(), path.display());
    if failed > 0 {
        println!("{failed} grid point(s) could not run; see the message column");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn chain_analyze(cfg: &RunConfig, eps_grid: &[f64], p_eps: Option<f64>, out: &Path) -> Result<ExitCode> {
    if let Some(e) = eps_grid.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(anyhow!("eps grid values must lie in (0, 1), got {e}"));
    }
    if let Some(p) = p_eps.filter(|p| !(0.0..=1.0).contains(p)) {
        return Err(anyhow!("p-eps must lie in [0, 1], got {p}"));
    }
    let oracle = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| anyhow!("instance exceeds the oracle enumeration cap"))?;
    let model = p_eps.map_or(UtilityModel::Exact, |p| UtilityModel::Miscalculation { p_eps: p });
    let space = StateSpace::exact(&cfg.env.table, chain::DEFAULT_STATE_CAP)?;
    let optimal = &oracle.solution().optimal_profile;
    let exp_c = cfg.schedule.exp_c;

    let report = stability_report(&space, optimal, eps_grid, exp_c, model, SolveOptions::default())?;
    let mut csv = String::from(STABILITY_COLUMNS);
    csv.push('\n');
    for r in &report.rows {
        let method = serde_json::to_value(r.method)?;
        writeln!(
            csv,
            "{},{},{},{},{},{:e},{}",
            r.eps,
            r.pi_optimal,
            r.pi_aligned_content,
            r.pi_all_discontent,
            r.pi_best_other_aligned,
            r.residual,
            method.as_str().unwrap_or_default()
        )?;
    }

    let kernel = build_kernel(&space, 0.0, exp_c, model);
    let mut classes = recurrence_classes(&kernel);
    classes.iter_mut().for_each(|c| c.sort_unstable());
    classes.sort_by_key(|c| (std::cmp::Reverse(c.len()), c[0]));
    let mut listing = format!(
        "states: {}\noptimal state: {}\nrecurrence classes at eps = 0: {}\n",
        space.len(),
        space.describe(space.aligned_state(optimal)),
        classes.len()
    );
    for (i, class) in classes.iter().enumerate() {
        writeln!(listing, "class {} ({} state(s))", i + 1, class.len())?;
        for &s in class {
            writeln!(listing, "  {}", space.describe(s))?;
        }
    }

    create_dir(out)?;
    let files: [(PathBuf, &str); 2] = [(out.join("stability.csv"), &csv), (out.join("classes.txt"), &listing)];
    for (path, text) in &files {
        write_file(path, text)?;
    }
    print!("{csv}");
    println!(
        "{} recurrence classes; listing in {}",
        classes.len(),
        files[1].0.display()
    );
    Ok(ExitCode::SUCCESS)
}
