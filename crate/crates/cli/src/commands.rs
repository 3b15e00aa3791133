use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use penfit_core::{
    cross_validate, fit_path, make_lambda_grid, mfdr_path, run_scenario, sample_split,
    select_by_mfdr, univariate_screen, FamilyKind, FeatureCorrelation, FitControls, LambdaGrid,
    MethodSummary, PathFit, PenaltySpec, Scenario, SimulationConfig,
    DEFAULT_SCREEN_LIMIT,
};
use serde::Deserialize;
use serde_json::json;

use crate::cli::{CompareCmd, CvCmd, DataArgs, FitCmd, MfdrCmd, PenaltyArgs, SimulateCmd};
use crate::config::{penalty_spec, Ctx};
use crate::errors::{CliError, CliResult};
use crate::fit_io::FitFile;
use crate::input::{load_dataset, parse_family, LoadedData};
use crate::output::{csv_field, fmt_float, fmt_opt_float, log, write_atomic, Meta};

struct ResolvedData {
    path: PathBuf,
    y: String,
    status: Option<String>,
    family: Option<FamilyKind>,
    unpenalized: Vec<String>,
}

fn resolve_data(ctx: &Ctx, args: &DataArgs) -> CliResult<ResolvedData> {
    if args.data_positional.is_some() && args.data.is_some() {
        return Err(CliError::usage(
            "give the input file either positionally or with --data, not both",
        ));
    }
    let flag = args.data.clone().or_else(|| args.data_positional.clone());
    let path = ctx
        .resolve(flag, "data")?
        .ok_or_else(|| CliError::usage("no input data file given"))?;
    let y = ctx
        .resolve(args.y.clone(), "y")?
        .ok_or_else(|| CliError::usage("--y (the response column) is required"))?;
    let status = ctx.resolve(args.status.clone(), "status")?;
    let family = match ctx.resolve::<String>(args.family.clone(), "family")? {
        Some(name) => Some(parse_family(&name)?),
        None => None,
    };
    let unpenalized = match ctx.resolve::<String>(args.unpenalized.clone(), "unpenalized")? {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    Ok(ResolvedData {
        path,
        y,
        status,
        family,
        unpenalized,
    })
}

fn load(resolved: &ResolvedData) -> CliResult<LoadedData> {
    load_dataset(
        &resolved.path,
        &resolved.y,
        resolved.status.as_deref(),
        resolved.family,
        &resolved.unpenalized,
    )
}

struct ResolvedPenalty {
    spec: PenaltySpec,
    name: String,
    nlambda: usize,
    ratio: Option<f64>,
    max_active: Option<usize>,
    max_sweeps: Option<usize>,
}

fn resolve_penalty(ctx: &Ctx, args: &PenaltyArgs) -> CliResult<ResolvedPenalty> {
    let name = ctx.resolve_or(args.penalty.clone(), "penalty", "lasso".to_string())?;
    let gamma = ctx.resolve(args.gamma, "gamma")?;
    let lambda2 = ctx.resolve(args.lambda2, "lambda2")?;
    let spec = penalty_spec(&name, gamma, lambda2)?;
    let nlambda = ctx.resolve_or(args.nlambda, "nlambda", LambdaGrid::DEFAULT_COUNT)?;
    if nlambda == 0 {
        return Err(CliError::usage("--nlambda must be at least 1"));
    }
    let ratio = ctx.resolve(args.lambda_min_ratio, "lambda_min_ratio")?;
    if let Some(r) = ratio {
        if !(r > 0.0 && r <= 1.0) {
            return Err(CliError::usage("--lambda-min-ratio must lie in (0, 1]"));
        }
    }
    let max_active = ctx.resolve(args.max_active, "max_active")?;
    let max_sweeps = ctx.resolve(args.max_sweeps, "max_sweeps")?;
    if max_sweeps == Some(0) {
        return Err(CliError::usage("--max-sweeps must be at least 1"));
    }
    Ok(ResolvedPenalty {
        spec,
        name,
        nlambda,
        ratio,
        max_active,
        max_sweeps,
    })
}

fn controls_for(pen: &ResolvedPenalty) -> FitControls {
    let defaults = FitControls::default();
    FitControls {
        max_active: pen.max_active,
        max_sweeps: pen.max_sweeps.unwrap_or(defaults.max_sweeps),
        ..defaults
    }
}

fn grid_for(ds: &penfit_core::Dataset, pen: &ResolvedPenalty) -> CliResult<LambdaGrid> {
    let ratio = pen
        .ratio
        .unwrap_or_else(|| LambdaGrid::default_ratio(ds.n(), ds.p()));
    Ok(make_lambda_grid(ds, pen.nlambda, ratio)?)
}

fn check_alpha(alpha: f64) -> CliResult<f64> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(alpha)
    } else {
        Err(CliError::usage("--alpha must lie in [0, 1]"))
    }
}

fn family_name(family: FamilyKind) -> &'static str {
    match family {
        FamilyKind::Gaussian => "gaussian",
        FamilyKind::Binomial => "binomial",
        FamilyKind::Cox => "cox",
    }
}

/// `out.csv` -> `out<suffix>.csv`, next to the original.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn data_snapshot(resolved: &ResolvedData, family: FamilyKind) -> serde_json::Value {
    json!({
        "data": resolved.path.display().to_string(),
        "y": resolved.y,
        "status": resolved.status,
        "family": family_name(family),
        "unpenalized": resolved.unpenalized,
    })
}

fn penalty_snapshot(pen: &ResolvedPenalty) -> serde_json::Value {
    json!({
        "penalty": pen.name,
        "gamma": pen.spec.gamma,
        "lambda2": pen.spec.lambda2,
        "nlambda": pen.nlambda,
        "lambda_min_ratio": pen.ratio,
        "max_active": pen.max_active,
        "max_sweeps": pen.max_sweeps,
    })
}

// ---------------------------------------------------------------- fit

pub fn run_fit(ctx: &Ctx, cmd: &FitCmd) -> CliResult<()> {
    let resolved = resolve_data(ctx, &cmd.data)?;
    let pen = resolve_penalty(ctx, &cmd.penalty)?;
    let out = ctx.resolve_or(cmd.out.clone(), "out", PathBuf::from("fit.json"))?;

    let loaded = load(&resolved)?;
    let ds = &loaded.dataset;
    let grid = grid_for(ds, &pen)?;
    let fit = fit_path(ds, &pen.spec, &grid, &controls_for(&pen))?;
    log(format!(
        "fitted {} of {} lambda values ({}, {}, n {}, p {})",
        fit.len(),
        grid.len(),
        family_name(loaded.family),
        pen.name,
        ds.n(),
        ds.p()
    ));
    if fit.truncated {
        log("path truncated before the smallest lambda");
    }

    let snapshot = json!({
        "command": "fit",
        "input": data_snapshot(&resolved, loaded.family),
        "path": penalty_snapshot(&pen),
    });
    let meta = Meta::new(None, &snapshot);
    if out.extension().and_then(|e| e.to_str()) == Some("csv") {
        write_fit_csv(&out, &fit, ds.names(), &meta)?;
    } else {
        let file = FitFile::from_fit(&fit, ds.names(), meta);
        write_atomic(&out, (serde_json::to_string_pretty(&file)? + "\n").as_bytes())?;
    }
    log(format!("wrote {}", out.display()));
    Ok(())
}

fn write_fit_csv(out: &Path, fit: &PathFit, names: &[String], meta: &Meta) -> CliResult<()> {
    let mut text = meta.csv_lines();
    text.push_str("lambda,active,kkt_residual,loss,intercept");
    for name in names {
        let _ = write!(text, ",{}", csv_field(name));
    }
    text.push('\n');
    for k in 0..fit.len() {
        let step = &fit.steps[k];
        let (b0, beta) = fit.coefficients_raw(k);
        let _ = write!(
            text,
            "{},{},{},{},{}",
            fmt_float(step.lambda),
            step.active_set.len(),
            fmt_float(step.kkt_residual),
            fmt_float(step.loss),
            fmt_float(b0)
        );
        for b in beta {
            let _ = write!(text, ",{}", fmt_float(b));
        }
        text.push('\n');
    }
    write_atomic(out, text.as_bytes())
}

// ---------------------------------------------------------------- mfdr

pub fn run_mfdr(ctx: &Ctx, cmd: &MfdrCmd) -> CliResult<()> {
    let fit_file = ctx.resolve(cmd.fit.clone(), "fit")?;
    if fit_file.is_some() && (cmd.data.data.is_some() || cmd.data.data_positional.is_some()) {
        return Err(CliError::usage(
            "give either --fit or an input data file, not both",
        ));
    }
    let alpha = check_alpha(ctx.resolve_or(cmd.alpha, "alpha", 0.1)?)?;
    let out = ctx.resolve_or(cmd.out.clone(), "out", PathBuf::from("mfdr.csv"))?;
    let plot_out = ctx
        .resolve(cmd.plot_out.clone(), "plot_out")?
        .unwrap_or_else(|| with_suffix(&out, "-plot"));

    let (fit, snapshot) = match fit_file {
        Some(path) => {
            let file = FitFile::load(&path)?;
            let snapshot = json!({
                "command": "mfdr",
                "fit": path.display().to_string(),
                "fit_config": file.meta.config_sha256,
                "alpha": alpha,
            });
            (file.to_fit(), snapshot)
        }
        None => {
            let resolved = resolve_data(ctx, &cmd.data)?;
            let pen = resolve_penalty(ctx, &cmd.penalty)?;
            let loaded = load(&resolved)?;
            let grid = grid_for(&loaded.dataset, &pen)?;
            let fit = fit_path(&loaded.dataset, &pen.spec, &grid, &controls_for(&pen))?;
            let snapshot = json!({
                "command": "mfdr",
                "input": data_snapshot(&resolved, loaded.family),
                "path": penalty_snapshot(&pen),
                "alpha": alpha,
            });
            (fit, snapshot)
        }
    };

    let table = mfdr_path(&fit)?;
    let rule = select_by_mfdr(&table, alpha);
    let rule_line = match rule {
        Some(k) => {
            let row = &table.rows[k];
            log(format!(
                "mfdr <= {alpha} rule: lambda {} with {} selected",
                fmt_float(row.lambda),
                row.selected
            ));
            format!(
                "# rule mfdr<={alpha} lambda {} selected {}\n",
                fmt_float(row.lambda),
                row.selected
            )
        }
        None => {
            log(format!("mfdr <= {alpha} rule: no lambda qualifies"));
            format!("# rule mfdr<={alpha} none\n")
        }
    };

    let meta = Meta::new(None, &snapshot);
    let mut text = meta.csv_lines();
    text.push_str(&rule_line);
    text.push_str("lambda,expected_false,selected,mfdr\n");
    for row in &table.rows {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            fmt_float(row.lambda),
            fmt_float(row.expected_false_discoveries),
            row.selected,
            fmt_opt_float(row.mfdr)
        );
    }
    write_atomic(&out, text.as_bytes())?;

    let mut plot = meta.csv_lines();
    plot.push_str("lambda,selected,expected_false\n");
    for row in &table.rows {
        let _ = writeln!(
            plot,
            "{},{},{}",
            fmt_float(row.lambda),
            row.selected,
            fmt_float(row.expected_false_discoveries)
        );
    }
    write_atomic(&plot_out, plot.as_bytes())?;
    log(format!("wrote {} and {}", out.display(), plot_out.display()));
    Ok(())
}

// ---------------------------------------------------------------- cv

pub fn run_cv(ctx: &Ctx, cmd: &CvCmd) -> CliResult<()> {
    let resolved = resolve_data(ctx, &cmd.data)?;
    let pen = resolve_penalty(ctx, &cmd.penalty)?;
    let folds = ctx.resolve_or(cmd.folds, "folds", 10)?;
    if folds < 2 {
        return Err(CliError::usage("--folds must be at least 2"));
    }
    let rule = ctx.resolve_or(cmd.rule.clone(), "rule", "min".to_string())?;
    if !matches!(rule.as_str(), "min" | "1se" | "mfdr") {
        return Err(CliError::usage(format!(
            "unknown rule \"{rule}\"; expected min, 1se, or mfdr"
        )));
    }
    let alpha = check_alpha(ctx.resolve_or(cmd.alpha, "alpha", 0.1)?)?;
    let out = ctx.resolve_or(cmd.out.clone(), "out", PathBuf::from("cv.csv"))?;
    let seed = ctx.resolve_seed(cmd.seed)?;

    let loaded = load(&resolved)?;
    let ds = &loaded.dataset;
    let grid = grid_for(ds, &pen)?;
    let controls = controls_for(&pen);
    let cv = cross_validate(ds, &pen.spec, &grid, &controls, folds, seed)?;
    let fit = fit_path(ds, &pen.spec, &grid, &controls)?;
    let table = mfdr_path(&fit)?;

    let chosen = match rule.as_str() {
        "min" => Some(cv.min_index),
        "1se" => Some(cv.one_se_index),
        _ => select_by_mfdr(&table, alpha),
    };
    let rule_line = match chosen {
        Some(k) => {
            let selected = fit
                .steps
                .get(k)
                .map(|s| s.active_set.len().to_string())
                .unwrap_or_else(|| "-".to_string());
            log(format!(
                "rule {rule}: lambda {} with {selected} selected",
                fmt_float(cv.lambdas[k])
            ));
            format!("# rule {rule} lambda {} selected {selected}\n", fmt_float(cv.lambdas[k]))
        }
        None => {
            log(format!("rule {rule}: no lambda qualifies at alpha {alpha}"));
            format!("# rule {rule} none\n")
        }
    };

    let snapshot = json!({
        "command": "cv",
        "input": data_snapshot(&resolved, loaded.family),
        "path": penalty_snapshot(&pen),
        "folds": folds,
        "rule": rule,
        "alpha": alpha,
        "seed": seed,
    });
    let meta = Meta::new(Some(seed), &snapshot);
    let mut text = meta.csv_lines();
    text.push_str(&rule_line);
    text.push_str("lambda,selected,cv_error,cv_se\n");
    for k in 0..cv.lambdas.len() {
        let selected = fit
            .steps
            .get(k)
            .map(|s| s.active_set.len().to_string())
            .unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{}",
            fmt_float(cv.lambdas[k]),
            selected,
            fmt_float(cv.cv_error[k]),
            fmt_float(cv.cv_se[k])
        );
    }
    write_atomic(&out, text.as_bytes())?;
    log(format!("wrote {}", out.display()));
    Ok(())
}

// ---------------------------------------------------------------- compare

pub fn run_compare(ctx: &Ctx, cmd: &CompareCmd) -> CliResult<()> {
    let resolved = resolve_data(ctx, &cmd.data)?;
    let pen = resolve_penalty(ctx, &cmd.penalty)?;
    let alpha = check_alpha(ctx.resolve_or(cmd.alpha, "alpha", 0.1)?)?;
    let screen_limit = ctx.resolve_or(cmd.screen_limit, "screen_limit", DEFAULT_SCREEN_LIMIT)?;
    if screen_limit == 0 {
        return Err(CliError::usage("--screen-limit must be at least 1"));
    }
    let out = ctx.resolve_or(cmd.out.clone(), "out", PathBuf::from("compare.csv"))?;
    let seed = ctx.resolve_seed(cmd.seed)?;

    let loaded = load(&resolved)?;
    let ds = &loaded.dataset;
    let controls = controls_for(&pen);

    let tests = univariate_screen(ds, alpha)?;
    let split = sample_split(ds, alpha, screen_limit, seed, &controls)?;
    let grid = grid_for(ds, &pen)?;
    let fit = fit_path(ds, &pen.spec, &grid, &controls)?;
    let table = mfdr_path(&fit)?;
    let rule = select_by_mfdr(&table, alpha);

    let snapshot = json!({
        "command": "compare",
        "input": data_snapshot(&resolved, loaded.family),
        "path": penalty_snapshot(&pen),
        "alpha": alpha,
        "screen_limit": screen_limit,
        "seed": seed,
    });
    let meta = Meta::new(Some(seed), &snapshot);
    let mut text = meta.csv_lines();
    let names = ds.names();

    let rule_line = match rule {
        Some(k) => {
            let row = &table.rows[k];
            format!(
                "# path-mfdr lambda {} selected {}\n",
                fmt_float(row.lambda),
                row.selected
            )
        }
        None => format!("# path-mfdr none (alpha {alpha})\n"),
    };
    text.push_str(&rule_line);
    text.push_str("method,feature,estimate,statistic,p_value,selected\n");

    for t in &tests {
        let _ = writeln!(
            text,
            "univariate-bh,{},{},{},{},{}",
            csv_field(&names[t.feature]),
            fmt_float(t.estimate),
            fmt_float(t.statistic),
            fmt_float(t.p_value),
            u8::from(t.discovery)
        );
    }
    for t in &split.tests {
        let _ = writeln!(
            text,
            "sample-split,{},{},{},{},{}",
            csv_field(&names[t.feature]),
            fmt_float(t.estimate),
            fmt_float(t.statistic),
            fmt_float(t.p_value),
            u8::from(t.discovery)
        );
    }
    if let Some(k) = rule {
        let step = &fit.steps[k];
        let (_, beta_raw) = fit.coefficients_raw(k);
        for &j in &step.active_set {
            let _ = writeln!(
                text,
                "path-mfdr,{},{},,,1",
                csv_field(&names[j]),
                fmt_float(beta_raw[j])
            );
        }
    }
    write_atomic(&out, text.as_bytes())?;

    let n_uni = tests.iter().filter(|t| t.discovery).count();
    let n_split = split.tests.iter().filter(|t| t.discovery).count();
    let n_path = rule.map(|k| table.rows[k].selected).unwrap_or(0);
    log(format!(
        "selections at alpha {alpha}: univariate-bh {n_uni}, sample-split {n_split}, path-mfdr {n_path}"
    ));
    log(format!("wrote {}", out.display()));
    Ok(())
}

// ---------------------------------------------------------------- simulate

/// Scenario file schema: a flat TOML table. `beta` and `censoring_beta` may
/// be shorter than `p`; they are padded with zeros.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    n: usize,
    p: usize,
    family: FamilyKind,
    #[serde(default)]
    beta: Vec<f64>,
    correlation: Option<FeatureCorrelation>,
    noise_sd: Option<f64>,
    censoring_beta: Option<Vec<f64>>,
    replications: Option<usize>,
    seed: Option<u64>,
}

fn pad(mut values: Vec<f64>, p: usize, what: &str) -> CliResult<Vec<f64>> {
    if values.len() > p {
        return Err(CliError::data(format!(
            "{what} has {} entries but p is {p}",
            values.len()
        )));
    }
    values.resize(p, 0.0);
    Ok(values)
}

const BUILTIN_SCENARIOS: &[&str] = &[
    "linear-independent",
    "linear-correlated",
    "cox-censoring-independent",
    "cox-censoring-linked",
    "blocks-gaussian",
    "blocks-binomial",
    "blocks-cox",
];

fn builtin_scenario(name: &str, reps: usize, seed: u64) -> Option<Scenario> {
    let blocks = |family| Scenario::blocks_comparison(family, 0.45, 400, 10, 9, 200, reps, seed);
    match name {
        "linear-independent" => Some(Scenario::linear_accuracy(400, false, reps, seed)),
        "linear-correlated" => Some(Scenario::linear_accuracy(400, true, reps, seed)),
        "cox-censoring-independent" => Some(Scenario::cox_censoring(false, reps, seed)),
        "cox-censoring-linked" => Some(Scenario::cox_censoring(true, reps, seed)),
        "blocks-gaussian" => Some(blocks(FamilyKind::Gaussian)),
        "blocks-binomial" => Some(blocks(FamilyKind::Binomial)),
        "blocks-cox" => Some(blocks(FamilyKind::Cox)),
        _ => None,
    }
}

fn resolve_scenario(ctx: &Ctx, cmd: &SimulateCmd) -> CliResult<Scenario> {
    let which = ctx
        .resolve(cmd.scenario.clone(), "scenario")?
        .ok_or_else(|| CliError::usage("--scenario (a builtin name or TOML file) is required"))?;
    let full_scale = cmd.full_scale || ctx.resolve(None, "full_scale")?.unwrap_or(false);
    let reps_flag = ctx.resolve(cmd.reps, "reps")?;
    let default_reps = if full_scale { 1000 } else { 200 };
    let seed_flag = ctx.resolve(cmd.seed, "seed")?;

    if BUILTIN_SCENARIOS.contains(&which.as_str()) {
        let reps = reps_flag.unwrap_or(default_reps);
        let seed = match seed_flag {
            Some(v) => v,
            None => {
                let v: u64 = rand::random();
                log(format!("seed {v} (generated; pass --seed {v} to reproduce)"));
                v
            }
        };
        return Ok(builtin_scenario(&which, reps, seed).expect("name checked above"));
    }

    let path = Path::new(&which);
    if !path.exists() {
        return Err(CliError::usage(format!(
            "\"{which}\" is neither a builtin scenario ({}) nor a file",
            BUILTIN_SCENARIOS.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile = toml::from_str(&text)
        .map_err(|e| CliError::data(format!("scenario file {}: {e}", path.display())))?;
    let seed = match seed_flag.or(file.seed) {
        Some(v) => v,
        None => {
            let v: u64 = rand::random();
            log(format!("seed {v} (generated; pass --seed {v} to reproduce)"));
            v
        }
    };
    let name = file.name.unwrap_or_else(|| {
        path.file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string()
    });
    Ok(Scenario {
        name,
        n: file.n,
        p: file.p,
        family: file.family,
        beta: pad(file.beta, file.p, "beta")?,
        correlation: file.correlation.unwrap_or(FeatureCorrelation::Independent),
        noise_sd: file.noise_sd.unwrap_or(1.0),
        censoring_beta: match file.censoring_beta {
            Some(g) => Some(pad(g, file.p, "censoring_beta")?),
            None => None,
        },
        replications: reps_flag.or(file.replications).unwrap_or(default_reps),
        seed,
    })
}

fn method_row(text: &mut String, name: &str, m: &MethodSummary) {
    let _ = writeln!(
        text,
        "{name},{},{},{},{},{},{},{},{}",
        fmt_float(m.mean_selected),
        fmt_float(m.mean_causal),
        fmt_float(m.mean_correlated),
        fmt_float(m.mean_noise),
        fmt_opt_float(m.observed_fdr),
        fmt_opt_float(m.observed_fdr_se),
        m.empty_replications,
        fmt_opt_float(m.causal_noise_ratio())
    );
}

pub fn run_simulate(ctx: &Ctx, cmd: &SimulateCmd) -> CliResult<()> {
    let scenario = resolve_scenario(ctx, cmd)?;
    let pen = resolve_penalty(ctx, &cmd.penalty)?;
    let alpha = check_alpha(ctx.resolve_or(cmd.alpha, "alpha", 0.1)?)?;
    let comparators = cmd.comparators || ctx.resolve(None, "comparators")?.unwrap_or(false);
    let out = ctx.resolve_or(cmd.out.clone(), "out", PathBuf::from("simulate.csv"))?;
    let methods_out = ctx
        .resolve(cmd.methods_out.clone(), "methods_out")?
        .unwrap_or_else(|| with_suffix(&out, "-methods"));

    let config = SimulationConfig {
        penalty: pen.spec,
        grid_size: pen.nlambda,
        lambda_ratio: pen.ratio,
        controls: controls_for(&pen),
        mfdr_alpha: alpha,
        run_comparators: comparators,
    };
    log(format!(
        "scenario {} ({}, n {}, p {}), {} replications, seed {}",
        scenario.name,
        family_name(scenario.family),
        scenario.n,
        scenario.p,
        scenario.replications,
        scenario.seed
    ));
    let result = run_scenario(&scenario, &config)?;
    if result.solver_failures > 0 {
        log(format!(
            "{} of {} replications failed and were excluded",
            result.solver_failures, scenario.replications
        ));
    }

    let snapshot = json!({
        "command": "simulate",
        "scenario": scenario,
        "path": penalty_snapshot(&pen),
        "alpha": alpha,
        "comparators": comparators,
    });
    let meta = Meta::new(Some(scenario.seed), &snapshot);
    let preamble = format!(
        "# scenario {} family {} n {} p {}\n# completed {} failures {}\n",
        scenario.name,
        family_name(scenario.family),
        scenario.n,
        scenario.p,
        result.replications_completed,
        result.solver_failures
    );

    let mut text = meta.csv_lines();
    text.push_str(&preamble);
    text.push_str(
        "lambda,replications,mean_selected,mean_causal,mean_correlated,mean_noise,\
         mean_expected_false,mean_mfdr_estimate,mfdr_defined,empirical_mfdr,empirical_se\n",
    );
    for row in &result.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(row.lambda),
            row.replications,
            fmt_float(row.mean_selected),
            fmt_float(row.mean_causal),
            fmt_float(row.mean_correlated),
            fmt_float(row.mean_noise),
            fmt_float(row.mean_expected_false),
            fmt_opt_float(row.mean_mfdr_estimate),
            row.mfdr_defined,
            fmt_opt_float(row.empirical_mfdr),
            fmt_opt_float(row.empirical_se)
        );
    }
    write_atomic(&out, text.as_bytes())?;

    let mut methods = meta.csv_lines();
    methods.push_str(&preamble);
    methods.push_str(
        "method,mean_selected,mean_causal,mean_correlated,mean_noise,observed_fdr,\
         observed_fdr_se,empty_replications,causal_noise_ratio\n",
    );
    method_row(&mut methods, "mfdr-rule", &result.mfdr_rule);
    if let Some(m) = &result.univariate {
        method_row(&mut methods, "univariate-bh", m);
    }
    if let Some(m) = &result.sample_split {
        method_row(&mut methods, "sample-split", m);
    }
    write_atomic(&methods_out, methods.as_bytes())?;
    log(format!(
        "wrote {} and {}",
        out.display(),
        methods_out.display()
    ));
    Ok(())
}
