use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, SecondsFormat, Utc};
use sha2::{Digest, Sha256};
use udfp_core::backtest::{compare_strategies, run_backtest, BacktestConfig, BacktestResult, Resample};
use udfp_core::ingest::{read_prices, write_prices, PricePanel};
use udfp_core::markets::{cauchy_schwarz_check, fn_ratio};
use udfp_core::synthetic::{gen_synthetic_panel, SyntheticSpec};
use udfp_core::verify::{
    fn_ratio_suite, single_factor_identity_suite, two_factor_bound_suite, BoundSuiteConfig, FnSuiteConfig,
    IdentitySuiteConfig, FN_EQUALITY_TOL, FN_TOL,
};
use udfp_core::FactorKind;

use crate::config::{render, Config};
use crate::error::CliError;
use crate::{BacktestArgs, CompareArgs, GenArgs, MarketArgs, VerifyArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_OUTPUT_DIR: &str = "udfp-out";

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// Quotes a CSV field when it would otherwise be ambiguous.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_factor(s: &str) -> Result<FactorKind, CliError> {
    s.parse::<FactorKind>().map_err(|e| CliError::Usage(e.to_string()))
}

/// Market and sampling settings shared by `backtest` and `compare`.
struct MarketSettings {
    prices: PathBuf,
    managers: usize,
    seed: u64,
    resample: Resample,
    min_history: usize,
    min_price: f64,
    span: usize,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    output_dir: PathBuf,
}

impl MarketSettings {
    fn resolve(a: &MarketArgs, c: &Config) -> Result<Self, CliError> {
        let defaults = BacktestConfig::new(FactorKind::Uniform, 0);
        let resample: String = c.or(a.resample.clone(), "resample", defaults.resample.name().to_string())?;
        Ok(MarketSettings {
            prices: c.required(a.prices.clone(), "prices")?,
            managers: c.or(a.managers, "managers", defaults.managers)?,
            seed: c.required(a.seed, "seed")?,
            resample: resample.parse().map_err(|e: udfp_core::Error| CliError::Usage(e.to_string()))?,
            min_history: c.or(a.min_history, "min_history", defaults.history_filter)?,
            min_price: c.or(a.min_price, "min_price", defaults.min_price)?,
            span: c.or(a.span, "span", defaults.span)?,
            start: c.opt(a.start, "start")?,
            end: c.opt(a.end, "end")?,
            output_dir: c.or(a.output_dir.clone(), "output_dir", PathBuf::from(DEFAULT_OUTPUT_DIR))?,
        })
    }

    fn config(&self, factor: FactorKind) -> Result<BacktestConfig, CliError> {
        let window = match (self.start, self.end) {
            (None, None) => None,
            (s, e) => Some((s.unwrap_or(NaiveDate::MIN), e.unwrap_or(NaiveDate::MAX))),
        };
        let cfg = BacktestConfig {
            factor,
            managers: self.managers,
            seed: self.seed,
            resample: self.resample,
            window,
            history_filter: self.min_history,
            min_price: self.min_price,
            span: self.span,
            persistent_ensemble: false,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn entries(&self, threads: Option<usize>, prices: &Path) -> Vec<(String, String)> {
        vec![
            ("prices".into(), prices.display().to_string()),
            ("managers".into(), self.managers.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("resample".into(), self.resample.name().into()),
            ("min_history".into(), self.min_history.to_string()),
            ("min_price".into(), self.min_price.to_string()),
            ("span".into(), self.span.to_string()),
            ("start".into(), opt_string(&self.start)),
            ("end".into(), opt_string(&self.end)),
            ("output_dir".into(), self.output_dir.display().to_string()),
            ("threads".into(), opt_string(&threads)),
        ]
    }
}

struct LoadedPanel {
    panel: PricePanel,
    digest: String,
    path: PathBuf,
}

fn load_panel(path: &Path) -> Result<LoadedPanel, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let panel = read_prices(bytes.as_slice()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let path = fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    Ok(LoadedPanel { panel, digest: sha256_hex(&bytes), path })
}

fn report_diagnostics(result: &BacktestResult) {
    for d in &result.dropped {
        eprintln!("dropped {} ({})", d.ticker, d.reason);
    }
    if result.warmup > 0 {
        eprintln!(
            "warm-up: {} period(s) skipped, trading starts {}",
            result.warmup,
            result.dates.first().map(ToString::to_string).unwrap_or_default()
        );
    }
}

fn wealth_csv(dates: &[NaiveDate], strategies: &[(String, BacktestResult)]) -> String {
    let mut out = String::from("date");
    for (name, _) in strategies {
        out.push(',');
        out.push_str(&field(name));
    }
    out.push('\n');
    for (k, d) in dates.iter().enumerate() {
        write!(out, "{d}").unwrap();
        for (_, r) in strategies {
            write!(out, ",{}", r.wealth.values()[k]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn weights_csv(r: &BacktestResult) -> String {
    let mut out = String::from("date,ticker,weight\n");
    for (w, d) in r.weights.iter().zip(&r.dates) {
        for (t, x) in r.tickers.iter().zip(w.weights()) {
            writeln!(out, "{d},{},{x}", field(t)).unwrap();
        }
    }
    out
}

fn metrics_txt(strategies: &[(String, BacktestResult)], resample: Resample) -> String {
    let first = &strategies[0].1;
    let dropped: Vec<String> = first.dropped.iter().map(|d| format!("{}:{}", d.ticker, d.reason)).collect();
    let mut entries: Vec<(String, String)> = vec![
        ("strategies".into(), strategies.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(",")),
        ("start_date".into(), first.dates.first().map(ToString::to_string).unwrap_or_default()),
        ("end_date".into(), first.dates.last().map(ToString::to_string).unwrap_or_default()),
        ("periods".into(), first.weights.len().to_string()),
        ("periods_per_year".into(), resample.periods_per_year().to_string()),
        ("warmup".into(), first.warmup.to_string()),
        ("assets".into(), first.tickers.len().to_string()),
        ("dropped".into(), dropped.join(",")),
    ];
    for (name, r) in strategies {
        let m = &r.metrics;
        entries.push((format!("{name}.terminal_wealth"), m.terminal_wealth.to_string()));
        entries.push((format!("{name}.growth_rate"), m.growth_rate.to_string()));
        entries.push((format!("{name}.annualized_sharpe"), m.sharpe.to_string()));
        entries.push((format!("{name}.sharpe_degenerate"), m.sharpe_degenerate.to_string()));
        entries.push((format!("{name}.max_drawdown"), m.max_drawdown.to_string()));
    }
    render(&entries)
}

fn print_table(strategies: &[(String, BacktestResult)]) {
    println!("{:<12} {:>16} {:>14} {:>18} {:>13}", "strategy", "terminal_wealth", "growth_rate", "annualized_sharpe", "max_drawdown");
    for (name, r) in strategies {
        let m = &r.metrics;
        let sharpe = if m.sharpe_degenerate { "n/a".to_string() } else { format!("{:.4}", m.sharpe) };
        println!(
            "{:<12} {:>16.6} {:>14.6e} {:>18} {:>13.4}",
            name, m.terminal_wealth, m.growth_rate, sharpe, m.max_drawdown
        );
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn manifest_head(command: &str, started: &str) -> Vec<(String, String)> {
    vec![
        ("manifest.command".into(), command.into()),
        ("manifest.version".into(), VERSION.into()),
        ("manifest.started".into(), started.into()),
    ]
}

fn emit_run(
    command: &str,
    settings: &MarketSettings,
    loaded: &LoadedPanel,
    threads: Option<usize>,
    factor_entry: (String, String),
    dates: &[NaiveDate],
    strategies: &[(String, BacktestResult)],
    started: &str,
) -> Result<(), CliError> {
    let dir = &settings.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    write_file(dir, "wealth.csv", &wealth_csv(dates, strategies))?;
    if let [(_, r)] = strategies {
        write_file(dir, "weights.csv", &weights_csv(r))?;
    } else {
        for (name, r) in strategies {
            write_file(dir, &format!("weights-{name}.csv"), &weights_csv(r))?;
        }
    }
    write_file(dir, "metrics.txt", &metrics_txt(strategies, settings.resample))?;

    let mut manifest = manifest_head(command, started);
    manifest.push(("manifest.prices_sha256".into(), loaded.digest.clone()));
    manifest.push(("manifest.finished".into(), now()));
    manifest.push(factor_entry);
    manifest.extend(settings.entries(threads, &loaded.path));
    write_file(dir, "manifest.txt", &render(&manifest))
}

pub fn backtest(args: &BacktestArgs, c: &Config, threads: Option<usize>) -> Result<(), CliError> {
    let started = now();
    let factor: String = c.required(args.factor.clone(), "factor")?;
    let factor = parse_factor(&factor)?;
    let settings = MarketSettings::resolve(&args.market, c)?;
    let cfg = settings.config(factor)?;
    let loaded = load_panel(&settings.prices)?;
    let result = run_backtest(&cfg, &loaded.panel)?;
    report_diagnostics(&result);
    let dates = result.dates.clone();
    let strategies = vec![(factor.name().to_string(), result)];
    print_table(&strategies);
    emit_run(
        "backtest",
        &settings,
        &loaded,
        threads,
        ("factor".into(), factor.name().into()),
        &dates,
        &strategies,
        &started,
    )
}

/// Parses a comma-separated factor list, dropping repeats with a warning.
fn parse_factor_list(list: &str) -> Result<Vec<FactorKind>, CliError> {
    let mut out: Vec<FactorKind> = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let f = parse_factor(name)?;
        if out.contains(&f) {
            eprintln!("warning: factor '{f}' listed more than once; keeping the first");
        } else {
            out.push(f);
        }
    }
    if out.len() < 2 {
        return Err(CliError::Usage(format!("compare needs at least 2 distinct factors, got {}", out.len())));
    }
    Ok(out)
}

pub fn compare(args: &CompareArgs, c: &Config, threads: Option<usize>) -> Result<(), CliError> {
    let started = now();
    let factors: String = c.required(args.factors.clone(), "factors")?;
    let factors = parse_factor_list(&factors)?;
    let settings = MarketSettings::resolve(&args.market, c)?;
    let cfgs = factors.iter().map(|f| settings.config(*f)).collect::<Result<Vec<_>, _>>()?;
    let loaded = load_panel(&settings.prices)?;
    let cmp = compare_strategies(&cfgs, &loaded.panel)?;
    report_diagnostics(&cmp.strategies[0].1);
    print_table(&cmp.strategies);
    let list = factors.iter().map(|f| f.name()).collect::<Vec<_>>().join(",");
    emit_run("compare", &settings, &loaded, threads, ("factors".into(), list), &cmp.dates, &cmp.strategies, &started)
}

fn parse_beta_list(s: &str) -> Result<Vec<f64>, CliError> {
    let beta = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("--inject-beta entry '{v}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if beta.len() < 2 {
        return Err(CliError::Data(format!("invalid input: injected beta needs at least 2 entries, got {}", beta.len())));
    }
    if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(CliError::Data(format!("invalid input: injected beta entry {b} is not positive")));
    }
    Ok(beta)
}

pub fn verify_bounds(args: &VerifyArgs, c: &Config) -> Result<(), CliError> {
    let started = now();
    let instances: Option<usize> = c.opt(args.instances, "instances")?;
    let max_assets: Option<usize> = c.opt(args.max_assets, "max_assets")?;
    let max_periods: Option<usize> = c.opt(args.max_periods, "max_periods")?;
    let seed: u64 = c.or(args.seed, "seed", 0)?;
    let inject: Option<String> = c.opt(args.inject_beta.clone(), "inject_beta")?;
    let output_dir: Option<PathBuf> = c.opt(args.output_dir.clone(), "output_dir")?;
    if instances == Some(0) {
        return Err(CliError::Usage("--instances must be at least 1".into()));
    }
    if max_assets.is_some_and(|m| m < 2) {
        return Err(CliError::Usage("--max-assets must be at least 2".into()));
    }
    if max_periods == Some(0) || max_periods.is_some_and(|n| n > u32::MAX as usize) {
        return Err(CliError::Usage("--max-periods must be between 1 and 2^32 - 1".into()));
    }
    let injected = inject.as_deref().map(parse_beta_list).transpose()?;

    let fn_defaults = FnSuiteConfig::default();
    let fn_cfg = FnSuiteConfig {
        instances: instances.unwrap_or(fn_defaults.instances),
        max_assets: max_assets.unwrap_or(fn_defaults.max_assets),
        max_periods: max_periods.map_or(fn_defaults.max_periods, |n| n as u32),
        seed,
        ..fn_defaults
    };
    let id_defaults = IdentitySuiteConfig::default();
    let id_cfg = IdentitySuiteConfig {
        instances: instances.unwrap_or(id_defaults.instances),
        max_assets: max_assets.unwrap_or(id_defaults.max_assets),
        max_periods: max_periods.unwrap_or(id_defaults.max_periods),
        seed,
    };
    let bound_defaults = BoundSuiteConfig::default();
    let bound_cfg = BoundSuiteConfig {
        instances: instances.unwrap_or(bound_defaults.instances),
        max_assets: max_assets.unwrap_or(bound_defaults.max_assets),
        max_periods: max_periods.unwrap_or(bound_defaults.max_periods),
        seed,
    };

    let fns = fn_ratio_suite(&fn_cfg)?;
    let id = single_factor_identity_suite(&id_cfg)?;
    let bound = two_factor_bound_suite(&bound_cfg)?;

    let mut lines: Vec<(String, String)> = vec![
        ("fn_ratio.instances".into(), fns.instances.to_string()),
        ("fn_ratio.min".into(), format!("{:e}", fns.min_fn)),
        ("fn_ratio.constant_instances".into(), fns.constant_instances.to_string()),
        ("fn_ratio.max_constant_deviation".into(), format!("{:e}", fns.max_constant_deviation)),
        ("cauchy_schwarz.max_relative_excess".into(), format!("{:e}", fns.max_cs_violation)),
        ("identity.instances".into(), id.instances.to_string()),
        ("identity.max_residual".into(), format!("{:e}", id.max_residual)),
        ("bound.instances".into(), bound.instances.to_string()),
        ("bound.min_slack".into(), format!("{:e}", bound.min_slack)),
        ("bound.max_violation".into(), format!("{:e}", (-bound.min_slack).max(0.0))),
        ("bound.uniform_drag_zero".into(), bound.uniform_drag_zero.to_string()),
    ];

    let mut violations: Vec<String> = Vec::new();
    if !fns.passed() {
        let (beta, n) = fns.counterexample.clone().unwrap_or_default();
        violations.push(format!("F_n check failed at n={n}, beta={beta:?}"));
    }
    if !id.passed() {
        let detail = id.counterexample.as_ref().map(|(beta, b)| format!("beta={beta:?}, b={b}")).unwrap_or_default();
        violations.push(format!("single-factor identity residual {:e}: {detail}", id.max_residual));
    }
    if !bound.passed() {
        let detail = bound
            .counterexample
            .as_ref()
            .map(|(beta, b)| format!("beta1={:?}, beta2={:?}, b={b}", beta.column(0), beta.column(1)))
            .unwrap_or_default();
        violations.push(format!("two-factor bound slack {:e} (uniform drag zero: {}): {detail}", bound.min_slack, bound.uniform_drag_zero));
    }
    if let Some(beta) = &injected {
        let constant = beta.iter().all(|b| *b == beta[0]);
        let mut min_fn = f64::INFINITY;
        for n in 1..=fn_cfg.max_periods {
            let f = fn_ratio(beta, n)?;
            min_fn = min_fn.min(f.value);
            let bad_equality = if constant { (f.value - 1.0).abs() > FN_EQUALITY_TOL } else { f.value - 1.0 <= FN_EQUALITY_TOL };
            if f.value < 1.0 - FN_TOL || bad_equality {
                violations.push(format!("injected beta {beta:?}: F_{n} = {}", f.value));
                break;
            }
        }
        let cs = cauchy_schwarz_check(beta);
        if !cs.holds {
            violations.push(format!("injected beta {beta:?}: (sum)^2 = {} > m sum^2 = {}", cs.lhs, cs.rhs));
        }
        lines.push(("injected.min_fn".into(), format!("{:e}", min_fn)));
    }
    lines.push(("status".into(), if violations.is_empty() { "ok" } else { "violated" }.into()));
    let report = render(&lines);
    print!("{report}");

    if let Some(dir) = &output_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        write_file(dir, "report.txt", &report)?;
        let mut manifest = manifest_head("verify-bounds", &started);
        manifest.push(("manifest.finished".into(), now()));
        manifest.extend([
            ("instances".into(), opt_string(&instances)),
            ("max_assets".into(), opt_string(&max_assets)),
            ("max_periods".into(), opt_string(&max_periods)),
            ("seed".into(), seed.to_string()),
            ("inject_beta".into(), inject.unwrap_or_default()),
            ("output_dir".into(), dir.display().to_string()),
        ]);
        write_file(dir, "manifest.txt", &render(&manifest))?;
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(violations.join("; ")))
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut s = OsString::from(output.as_os_str());
    s.push(".manifest.txt");
    PathBuf::from(s)
}

pub fn gen(args: &GenArgs, c: &Config) -> Result<(), CliError> {
    let started = now();
    let assets: usize = c.or(args.assets, "assets", 20)?;
    let days: usize = c.or(args.days, "days", 4200)?;
    let model: String = c.or(args.model.clone(), "model", "single-factor".to_string())?;
    let seed: u64 = c.or(args.seed, "seed", 0)?;
    let output: PathBuf = c.required(args.output.clone(), "output")?;
    let spec = match model.as_str() {
        "single-factor" => SyntheticSpec::single_factor(assets, days, seed),
        "two-factor" => SyntheticSpec::two_factor(assets, days, seed),
        other => return Err(CliError::Usage(format!("unknown model '{other}' (expected single-factor or two-factor)"))),
    };
    let panel = gen_synthetic_panel(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut bytes = Vec::new();
    write_prices(&panel, &mut bytes)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&output, &bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", output.display())))?;

    let mut manifest = manifest_head("gen", &started);
    manifest.push(("manifest.output_sha256".into(), sha256_hex(&bytes)));
    manifest.push(("manifest.finished".into(), now()));
    manifest.extend([
        ("assets".into(), assets.to_string()),
        ("days".into(), days.to_string()),
        ("model".into(), model),
        ("seed".into(), seed.to_string()),
        ("output".into(), output.display().to_string()),
    ]);
    let mpath = manifest_path(&output);
    fs::write(&mpath, render(&manifest)).map_err(|e| CliError::Data(format!("cannot write {}: {e}", mpath.display())))?;
    println!("wrote {} ({} assets, {} days)", output.display(), panel.tickers().len(), panel.len());
    Ok(())
}
