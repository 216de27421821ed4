use std::fs;
use std::path::{Path, PathBuf};

use bridgesens::data::{generate_synthetic, load_dataset, save_dataset, Arm, Dataset};
use bridgesens::gcomp::{model_draws, run, sweep_with_overlay, DrawRecord, QuantitySummary, RunSummary, SensitivitySetting};
use bridgesens::oracle::{corrupted_model, fuzz_model, verify_models, DiscreteModel, SuiteReport};
use bridgesens::bridge::OUTCOME_REGRESSOR_COUNT;
use bridgesens::data::format_number;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{draw_rows, sweep_rows, write_csv, write_json};
use crate::CliError;

const OUTCOME_TERMS: [&str; OUTCOME_REGRESSOR_COUNT] = ["intercept", "m", "a", "l0", "l1", "m_l0", "m_l1", "l0_l1"];

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Stores the effective config next to the outputs. The output directory is
/// left out so identical runs into different directories match byte for byte.
fn archive_config(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut archived = cfg.clone();
    archived.output_dir = None;
    write_json(&out.join("config.json"), &archived)
}

fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `input` path".into()))?;
    let columns = cfg
        .columns
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `columns` mapping".into()))?;
    let data = load_dataset(input, columns)?;
    Ok(if cfg.standardize_covariates {
        data.standardize_covariates()
    } else {
        data
    })
}

#[derive(Serialize)]
struct NamedSummary {
    name: String,
    #[serde(flatten)]
    summary: QuantitySummary,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    control: usize,
    treated: usize,
    seed: u64,
    draws: usize,
    chains: usize,
    burn_in: usize,
    parameters: Vec<NamedSummary>,
}

/// Posterior draws of both working models.
pub fn fit(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let opts = cfg.run_options();
    let draws = model_draws(&data, &opts)?;

    let mut names: Vec<String> = ["intercept".to_string(), "a".to_string()]
        .into_iter()
        .chain(data.covariate_names().iter().cloned())
        .map(|t| format!("mediator.{t}"))
        .collect();
    names.push("mediator.sigma2".into());
    names.extend(OUTCOME_TERMS.iter().map(|t| format!("outcome.{t}")));
    names.push("outcome.sigma2".into());

    let values: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| {
            let mut v = d.mediator.beta.clone();
            v.push(d.mediator.sigma2);
            v.extend_from_slice(&d.outcome.beta);
            v.push(d.outcome.sigma2);
            v
        })
        .collect();
    let parameters = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = values.iter().map(|v| v[j]).collect();
            Ok(NamedSummary {
                name: name.clone(),
                summary: QuantitySummary::from_values(&column, opts.chains)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let report = FitReport {
        n: data.n(),
        control: data.arm_count(Arm::Control),
        treated: data.arm_count(Arm::Treated),
        seed: opts.seed,
        draws: opts.draws,
        chains: opts.chains,
        burn_in: opts.burn_in,
        parameters,
    };
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names);
    let rows: Vec<Vec<String>> = values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let mut r = vec![(idx / opts.draws).to_string(), (idx % opts.draws).to_string()];
            r.extend(v.iter().map(|&x| format_number(x)));
            r
        })
        .collect();

    prepare_out(out)?;
    archive_config(cfg, out)?;
    write_json(&out.join("fit_report.json"), &report)?;
    write_csv(&out.join("fit_draws.csv"), &header, &rows)?;
    log::info!("fit: {} draws written to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct RunReport<'a> {
    setting: &'a SensitivitySetting,
    seed: u64,
    summary: &'a RunSummary,
}

/// The base setting's draws plus one envelope table per configured sweep.
pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    let opts = cfg.run_options();
    let base = run(&data, &cfg.setting, &opts)?;
    let mut tables = Vec::new();
    for s in &cfg.sweeps {
        let table = sweep_with_overlay(&data, &s.setting, s.axis, &s.grid, s.overlay.as_ref(), &opts)?;
        table.check_contracts()?;
        tables.push((s.file_stem(), table));
    }

    prepare_out(out)?;
    archive_config(cfg, out)?;
    write_csv(&out.join("run_draws.csv"), &DrawRecord::COLUMNS, &draw_rows(&base.draws))?;
    write_json(
        &out.join("run_summary.json"),
        &RunReport {
            setting: &base.setting,
            seed: opts.seed,
            summary: &base.summary,
        },
    )?;
    for (stem, table) in &tables {
        write_csv(&out.join(format!("{stem}.csv")), &bridgesens::gcomp::SweepTable::COLUMNS, &sweep_rows(table))?;
    }
    log::info!("sweep: {} tables written to {}", tables.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct FailingModel<'a> {
    index: usize,
    checks: Vec<&'a str>,
    model: &'a DiscreteModel,
}

/// Runs the oracle suite. With `inject_corrupt`, a model that violates the
/// bound is appended to the corpus.
pub fn verify(seed: u64, n_models: usize, inject_corrupt: bool, out: &Path) -> Result<(), CliError> {
    let mut models: Vec<(usize, DiscreteModel)> = (0..n_models).map(|i| (i, fuzz_model(seed, i))).collect();
    if inject_corrupt {
        models.push((n_models, corrupted_model()));
    }
    let report = verify_models(seed, &models)?;
    print_table(&report);

    prepare_out(out)?;
    write_json(&out.join("verify_report.json"), &report)?;
    if report.passed() {
        return Ok(());
    }
    let failing: Vec<FailingModel> = report
        .failing_models()
        .into_iter()
        .map(|i| FailingModel {
            index: i,
            checks: report
                .checks
                .iter()
                .filter(|c| c.failing_models.contains(&i))
                .map(|c| c.name.as_str())
                .collect(),
            model: &models.iter().find(|(j, _)| *j == i).expect("reported index exists").1,
        })
        .collect();
    let path: PathBuf = out.join("failing_models.json");
    write_json(&path, &failing)?;
    Err(CliError::Verification(format!(
        "{} model(s) failed; dumped to {}",
        failing.len(),
        path.display()
    )))
}

fn print_table(report: &SuiteReport) {
    println!("{:<24} {:<6} {:>12} {:>10} {:>6}", "check", "result", "max_resid", "tol", "n");
    for c in &report.checks {
        println!(
            "{:<24} {:<6} {:>12.3e} {:>10.0e} {:>6}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.max_residual,
            c.tolerance,
            c.evaluated
        );
    }
    if !report.errored_models.is_empty() {
        println!("errored models: {:?}", report.errored_models);
    }
}

#[derive(Serialize)]
struct TruthFile<'a> {
    seed: u64,
    spec: &'a bridgesens::data::SyntheticSpec,
    truth: &'a bridgesens::data::SyntheticTruth,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no `simulate` spec".into()))?;
    let sim = generate_synthetic(spec, cfg.seed)?;
    prepare_out(out)?;
    archive_config(cfg, out)?;
    save_dataset(out.join("synthetic.csv"), &sim.dataset)?;
    write_json(
        &out.join("truth.json"),
        &TruthFile {
            seed: sim.seed,
            spec: &sim.spec,
            truth: &sim.truth,
        },
    )?;
    log::info!("simulate: {} rows written to {}", sim.dataset.n(), out.display());
    Ok(())
}
