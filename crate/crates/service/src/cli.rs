//! Command-line verbs. Each mirrors an endpoint and prints its seed and config hash.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tempalign::calibration::{diagnostics, PosteriorChain};
use tempalign::emulator::{generate_training_set, train, EmulatorModel, GenerationConfig, TrainConfig};
use tempalign::socioecon::{Portfolio, ScopeMask};
use tempalign::uncertainty::{propagate, CredibleBand, EmissionUncertaintySpec, PropagationConfig};
use tempalign::DataBundle;

use crate::engine::{
    config_hash, read_latest, write_latest, AlignRequest, AlignResponse, CalibrateRequest, Engine, Mode,
    Source,
};
use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Parser)]
#[command(
    name = "tempalign",
    version,
    about = "Implied-temperature alignment of investment portfolios"
)]
pub struct Cli {
    /// Data bundle directory (defaults to $TEMPALIGN_DATA or the repository's data/).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Where chains and emulator models are written and looked up.
    #[arg(long, global = true, env = "TEMPALIGN_ARTIFACTS", default_value = "artifacts")]
    pub artifacts: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run DRAM against the observation record and store the chain.
    Calibrate(CalibrateArgs),
    /// Temperature bands of scenarios under parameter and emission uncertainty.
    Propagate(PropagateArgs),
    /// Implied temperature of a portfolio.
    Align(AlignArgs),
    /// Generate labels and train the emulator.
    EmulateTrain(TrainArgs),
    /// Predict bands with a trained emulator.
    EmulatePredict(PredictArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scenario supplying historical emissions.
    #[arg(long, default_value = crate::engine::DEFAULT_HISTORY)]
    pub history: String,
    #[arg(long)]
    pub temperature_sd: Option<f64>,
    /// Also fit CO2 concentrations with this SD (ppm).
    #[arg(long)]
    pub co2_sd: Option<f64>,
    /// Write the diagnostics report here (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct UqArgs {
    /// `prior`, `fixed`, `posterior` (latest stored chain), a chain id, or a chain file path.
    #[arg(long, default_value = "posterior")]
    pub chain: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emission error as `family:mu:sigma` in percent, e.g. `lognormal:1:13`.
    #[arg(long, value_parser = parse_uncertainty)]
    pub uncertainty: Option<EmissionUncertaintySpec>,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    /// Scenario id; repeat for several (default: all).
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    #[command(flatten)]
    pub uq: UqArgs,
    /// Write bands to this file; `.csv` or `.json` (one file per scenario, suffixed with the id).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Mcmc,
    Emulator,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Portfolio JSON file or the name of a bundled portfolio.
    #[arg(long)]
    pub portfolio: String,
    /// Benchmark ensemble file or bundled name.
    #[arg(long)]
    pub benchmark: Option<String>,
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    #[arg(long, value_enum, default_value = "mcmc")]
    pub mode: ModeArg,
    /// Emission scopes to count, e.g. `12` or `123`.
    #[arg(long, default_value = "123", value_parser = parse_scopes)]
    pub scopes: ScopeMask,
    #[command(flatten)]
    pub uq: UqArgs,
    /// Emulator model (base path or id); defaults to the latest trained one.
    #[arg(long)]
    pub model: Option<String>,
    /// Write the full response here; `.json` or `.csv` (summary table).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub hi: f64,
    #[arg(long, default_value_t = 2022)]
    pub base_year: i32,
    #[arg(long, default_value_t = 3000)]
    pub epochs: usize,
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    #[command(flatten)]
    pub uq: UqArgs,
    /// Base path of the model files (default: under the artifacts directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model base path or id; defaults to the latest trained one.
    #[arg(long)]
    pub model: Option<String>,
    /// Multiplier of base-year emissions.
    #[arg(long, conflicts_with = "input")]
    pub scale: Option<f64>,
    /// Raw input: base-year CO2e of the reference scenario (Gt).
    #[arg(long)]
    pub input: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to bind; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Concurrent background jobs.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

fn parse_uncertainty(s: &str) -> Result<EmissionUncertaintySpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [family, mu, sigma] = parts[..] else {
        return Err("expected family:mu:sigma".into());
    };
    let mu: f64 = mu.parse().map_err(|e| format!("mu: {e}"))?;
    let sigma: f64 = sigma.parse().map_err(|e| format!("sigma: {e}"))?;
    let spec = match family {
        "normal" => EmissionUncertaintySpec::normal(mu, sigma),
        "lognormal" => EmissionUncertaintySpec::lognormal(mu, sigma),
        other => return Err(format!("unknown family '{other}'")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn parse_scopes(s: &str) -> Result<ScopeMask, String> {
    let scopes: Vec<u8> = s
        .chars()
        .filter(|c| *c != ',')
        .map(|c| c.to_digit(10).map(|d| d as u8).ok_or(format!("bad scope '{c}'")))
        .collect::<Result<_, _>>()?;
    ScopeMask::new(&scopes).map_err(|e| e.to_string())
}

fn bundle(cli: &Cli) -> ServiceResult<DataBundle> {
    Ok(match &cli.data {
        Some(p) => DataBundle::new(p),
        None => DataBundle::locate()?,
    })
}

fn banner<W: Write, T: Serialize>(out: &mut W, seed: u64, cfg: &T) -> ServiceResult<String> {
    let hash = config_hash(cfg);
    writeln!(out, "seed: {seed}").map_err(io)?;
    writeln!(out, "config hash: {hash}").map_err(io)?;
    Ok(hash)
}

fn io(e: std::io::Error) -> ServiceError {
    ServiceError::Internal(format!("write failed: {e}"))
}

fn write_file(path: &Path, text: &str) -> ServiceResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| tempalign::Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| tempalign::Error::io(path, e))?;
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Runs the parsed command, writing human-readable output to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> ServiceResult<()> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(&cli, a, out),
        Command::Propagate(a) => propagate_cmd(&cli, a, out),
        Command::Align(a) => align(&cli, a, out),
        Command::EmulateTrain(a) => emulate_train(&cli, a, out),
        Command::EmulatePredict(a) => emulate_predict(&cli, a, out),
        Command::Serve(a) => serve(&cli, a, out),
    }
}

fn engine(cli: &Cli) -> ServiceResult<Engine> {
    Engine::from_bundle(&bundle(cli)?, Some(cli.artifacts.clone()))
}

fn calibrate<W: Write>(cli: &Cli, a: &CalibrateArgs, out: &mut W) -> ServiceResult<()> {
    let engine = engine(cli)?;
    let req = CalibrateRequest {
        iterations: a.iterations,
        seed: a.seed,
        history: a.history.clone(),
        temperature_sd: a.temperature_sd,
        co2_sd: a.co2_sd,
        priors: None,
    };
    banner(out, a.seed, &req)?;
    let t0 = Instant::now();
    let (chain, outcome) = engine.calibrate(&req, |_| {})?;
    let report = diagnostics(&chain);
    writeln!(
        out,
        "chain {} in {:.1} s: acceptance {:.3}, {} retained, {} forward failures{}",
        outcome.chain_id,
        t0.elapsed().as_secs_f64(),
        outcome.acceptance_rate,
        outcome.n_retained,
        outcome.forward_failures,
        if outcome.non_stationary {
            ", NOT stationary (split R-hat > 1.1)"
        } else {
            ""
        }
    )
    .map_err(io)?;
    for p in &report.parameters {
        writeln!(
            out,
            "  {:<14} mean {:>10.4}  sd {:>9.4}  iat {:>7.1}",
            p.name, p.mean, p.sd, p.iat
        )
        .map_err(io)?;
    }
    if let Some(path) = &outcome.path {
        writeln!(out, "saved {}", path.display()).map_err(io)?;
    }
    if let Some(p) = &a.out {
        write_file(p, &serde_json::to_string_pretty(&report).expect("serializable"))?;
    }
    Ok(())
}

/// Resolves `--chain` to an owned parameter source and a label.
fn resolve_chain(cli: &Cli, engine: &Engine, name: &str) -> ServiceResult<(Source, String)> {
    let load = |base: PathBuf| -> ServiceResult<(Source, String)> {
        let c = PosteriorChain::load(base)?;
        let id = c.id.clone().unwrap_or_else(|| c.content_id());
        Ok((Source::Chain(std::sync::Arc::new(c)), id))
    };
    match name {
        "prior" => Ok((
            Source::Prior(tempalign::calibration::PriorSpec::fair_default()),
            "prior".into(),
        )),
        "fixed" => Ok((Source::Fixed(Default::default()), "fixed".into())),
        "posterior" => match engine.latest_chain() {
            Some(c) => {
                let id = c.id.clone().unwrap_or_else(|| c.content_id());
                Ok((Source::Chain(c), id))
            }
            None => Err(ServiceError::Unavailable(format!(
                "no stored chain under {}; run `tempalign calibrate` first",
                cli.artifacts.display()
            ))),
        },
        other => {
            let by_id = cli.artifacts.join("chains").join(other);
            if by_id.with_extension("json").exists() {
                return load(by_id);
            }
            let p = PathBuf::from(other);
            if p.with_extension("json").exists() {
                return load(p.with_extension(""));
            }
            Err(ServiceError::NotFound(format!("chain '{other}'")))
        }
    }
}

fn propagation(uq: &UqArgs) -> PropagationConfig {
    PropagationConfig {
        n: uq.n,
        seed: uq.seed,
        ..Default::default()
    }
}

fn write_band(band: &CredibleBand, path: &Path) -> ServiceResult<()> {
    if is_csv(path) {
        band.write_csv(path)?;
    } else {
        band.write_json(path)?;
    }
    Ok(())
}

fn suffixed(path: &Path, id: &str, several: bool) -> PathBuf {
    if !several {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}-{id}{ext}"))
}

fn propagate_cmd<W: Write>(cli: &Cli, a: &PropagateArgs, out: &mut W) -> ServiceResult<()> {
    let engine = engine(cli)?;
    let (source, label) = resolve_chain(cli, &engine, &a.uq.chain)?;
    let ids = if a.scenarios.is_empty() {
        engine.store.ids()
    } else {
        a.scenarios.clone()
    };
    let cfg = propagation(&a.uq);
    banner(
        out,
        a.uq.seed,
        &serde_json::json!({"scenarios": ids, "chain": label, "propagation": cfg, "uncertainty": a.uq.uncertainty}),
    )?;
    writeln!(out, "chain: {label}").map_err(io)?;
    writeln!(
        out,
        "{:<14} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "scenario", "year", "mean", "median", "q05", "q95", "width"
    )
    .map_err(io)?;
    for id in &ids {
        let s = engine
            .store
            .get(id)
            .ok_or_else(|| ServiceError::invalid(format!("unknown scenario '{id}'")))?;
        let band = propagate(&s, &source.as_ref(), a.uq.uncertainty.as_ref(), &cfg)?;
        for year in [2050, 2100] {
            let (Some(i), Some((lo, hi))) = (band.index_of(year), band.interval(0.9, year)) else {
                continue;
            };
            writeln!(
                out,
                "{:<14} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                id,
                year,
                band.mean[i],
                band.median[i],
                lo,
                hi,
                hi - lo
            )
            .map_err(io)?;
        }
        if let Some(p) = &a.out {
            write_band(&band, &suffixed(p, id, ids.len() > 1))?;
        }
    }
    Ok(())
}

fn load_portfolio(bundle: &DataBundle, arg: &str) -> ServiceResult<Portfolio> {
    let p = Path::new(arg);
    let path = if p.exists() {
        p.to_path_buf()
    } else {
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        bundle.portfolio_path(&name)
    };
    if !path.exists() {
        return Err(ServiceError::NotFound(format!("portfolio '{arg}'")));
    }
    Ok(Portfolio::load(path)?)
}

fn load_model(cli: &Cli, arg: Option<&str>) -> ServiceResult<EmulatorModel> {
    let dir = cli.artifacts.join("emulators");
    let base = match arg {
        Some(a) if dir.join(a).with_extension("json").exists() => dir.join(a),
        Some(a) => PathBuf::from(a).with_extension(""),
        None => {
            let id = read_latest(&dir).ok_or_else(|| {
                ServiceError::Unavailable(format!(
                    "no emulator under {}; run `tempalign emulate-train` first",
                    dir.display()
                ))
            })?;
            dir.join(id)
        }
    };
    if !base.with_extension("json").exists() {
        return Err(ServiceError::NotFound(format!(
            "emulator model '{}'",
            base.display()
        )));
    }
    Ok(EmulatorModel::load(base)?)
}

fn align<W: Write>(cli: &Cli, a: &AlignArgs, out: &mut W) -> ServiceResult<()> {
    let bundle = bundle(cli)?;
    let engine = Engine::from_bundle(&bundle, Some(cli.artifacts.clone()))?;
    let portfolio = load_portfolio(&bundle, &a.portfolio)?;
    let mut req = AlignRequest::new(&portfolio);
    req.scenarios = a.scenarios.clone();
    req.scopes = a.scopes;
    req.seed = a.uq.seed;
    req.n = a.uq.n;
    req.uncertainty = a.uq.uncertainty;
    req.bands = a.out.is_some();
    if let Some(b) = &a.benchmark {
        let b = load_portfolio(&bundle, b)?;
        req.benchmark = Some(serde_json::to_value(b).expect("serializable"));
    }
    match a.mode {
        ModeArg::Mcmc => {
            req.mode = Mode::Mcmc;
            if a.uq.chain != "posterior" {
                let (source, label) = resolve_chain(cli, &engine, &a.uq.chain)?;
                if let Source::Chain(c) = source {
                    engine.add_chain(c.as_ref().clone());
                }
                req.chain = Some(label);
            }
        }
        ModeArg::Emulator => {
            req.mode = Mode::Emulator;
            engine.set_emulator(load_model(cli, a.model.as_deref())?);
        }
    }
    banner(out, req.seed, &req)?;
    let resp = engine.align(&req)?;
    print_alignment(out, &resp)?;
    if let Some(p) = &a.out {
        let text = if is_csv(p) {
            summary_csv(&resp)
        } else {
            serde_json::to_string_pretty(&resp).expect("serializable")
        };
        write_file(p, &text)?;
    }
    Ok(())
}

fn print_alignment<W: Write>(out: &mut W, r: &AlignResponse) -> ServiceResult<()> {
    writeln!(
        out,
        "source: {} ({:?}), n = {}, scopes {:?}",
        r.provenance.source,
        r.provenance.mode,
        r.provenance.n,
        r.provenance.scopes.scopes()
    )
    .map_err(io)?;
    for w in &r.warnings {
        writeln!(out, "warning: {w}").map_err(io)?;
    }
    writeln!(
        out,
        "{:<14} {:>6} {:>10} {:>10} {:>8}",
        "scenario", "year", "baseline", "portfolio", "delta"
    )
    .map_err(io)?;
    for row in &r.summary {
        writeln!(
            out,
            "{:<14} {:>6} {:>10.3} {:>10.3} {:>+8.3}",
            row.scenario, row.year, row.baseline_mean, row.portfolio_mean, row.delta
        )
        .map_err(io)?;
    }
    Ok(())
}

fn summary_csv(r: &AlignResponse) -> String {
    let mut s = String::from("scenario,year,baseline_mean,portfolio_mean,delta\n");
    for row in &r.summary {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            row.scenario, row.year, row.baseline_mean, row.portfolio_mean, row.delta
        ));
    }
    s
}

fn emulate_train<W: Write>(cli: &Cli, a: &TrainArgs, out: &mut W) -> ServiceResult<()> {
    let engine = engine(cli)?;
    let (source, label) = resolve_chain(cli, &engine, &a.uq.chain)?;
    let ids = if a.scenarios.is_empty() {
        engine.store.ids()
    } else {
        a.scenarios.clone()
    };
    let scenarios = ids
        .iter()
        .map(|id| {
            engine
                .store
                .get(id)
                .ok_or_else(|| ServiceError::invalid(format!("unknown scenario '{id}'")))
        })
        .collect::<ServiceResult<Vec<_>>>()?;
    let refs: Vec<&_> = scenarios.iter().map(|s| s.as_ref()).collect();
    let gen = GenerationConfig::grid(a.lo, a.hi, a.grid, a.base_year, propagation(&a.uq));
    let tcfg = TrainConfig {
        epochs: a.epochs,
        seed: a.uq.seed,
        ..Default::default()
    };
    banner(
        out,
        a.uq.seed,
        &serde_json::json!({"chain": label, "scenarios": ids, "generation": gen, "train": tcfg, "uncertainty": a.uq.uncertainty}),
    )?;
    let t0 = Instant::now();
    let ts = generate_training_set(&source.as_ref(), &refs, a.uq.uncertainty.as_ref(), &gen)?;
    writeln!(
        out,
        "labels: {} points x {} scenarios in {:.1} s",
        ts.len(),
        ts.scenarios.len(),
        t0.elapsed().as_secs_f64()
    )
    .map_err(io)?;
    let t0 = Instant::now();
    let model = train(&ts, &tcfg)?;
    let tm = &model.meta.training;
    writeln!(
        out,
        "model {} trained in {:.1} s: holdout RMSE median {:.4} K, quantiles {:.4} K, converged {}",
        model.id(),
        t0.elapsed().as_secs_f64(),
        tm.validation_rmse_median.unwrap_or(f64::NAN),
        tm.validation_rmse_quantiles.unwrap_or(f64::NAN),
        tm.converged
    )
    .map_err(io)?;
    let base = match &a.out {
        Some(p) => p.with_extension(""),
        None => {
            let dir = cli.artifacts.join("emulators");
            std::fs::create_dir_all(&dir).map_err(|e| tempalign::Error::io(&dir, e))?;
            write_latest(&dir, model.id())?;
            dir.join(model.id())
        }
    };
    let (bin, meta) = model.save(&base)?;
    writeln!(out, "saved {} and {}", bin.display(), meta.display()).map_err(io)?;
    Ok(())
}

fn emulate_predict<W: Write>(cli: &Cli, a: &PredictArgs, out: &mut W) -> ServiceResult<()> {
    let model = load_model(cli, a.model.as_deref())?;
    let input = match (a.scale, a.input) {
        (_, Some(x)) => vec![x],
        (k, None) => model.input_for_scale(k.unwrap_or(1.0)),
    };
    banner(
        out,
        model.meta.training.label_seed,
        &serde_json::json!({"model": model.id(), "input": input}),
    )?;
    let t0 = Instant::now();
    let p = model.predict(&input)?;
    writeln!(
        out,
        "model {} predicted in {:.3} ms",
        model.id(),
        t0.elapsed().as_secs_f64() * 1e3
    )
    .map_err(io)?;
    if let Some(w) = &p.warning {
        writeln!(out, "warning: {w}").map_err(io)?;
    }
    writeln!(
        out,
        "{:<14} {:>6} {:>8} {:>8} {:>8} {:>8}",
        "scenario", "year", "mean", "median", "q05", "q95"
    )
    .map_err(io)?;
    for s in &p.scenarios {
        for year in [2050, 2100] {
            if let Some((mean, median, lo, hi)) = s.at(year) {
                writeln!(
                    out,
                    "{:<14} {:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                    s.scenario, year, mean, median, lo, hi
                )
                .map_err(io)?;
            }
        }
    }
    if let Some(path) = &a.out {
        let text = if is_csv(path) {
            let mut t = String::from("scenario,year,mean,median,q05,q95\n");
            for s in &p.scenarios {
                for (i, y) in s.years.iter().enumerate() {
                    t.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        s.scenario, y, s.mean[i], s.median[i], s.q05[i], s.q95[i]
                    ));
                }
            }
            t
        } else {
            serde_json::to_string_pretty(&p).expect("serializable")
        };
        write_file(path, &text)?;
    }
    Ok(())
}

fn serve<W: Write>(cli: &Cli, a: &ServeArgs, out: &mut W) -> ServiceResult<()> {
    let engine = engine(cli)?;
    if let Some(m) = read_latest(&cli.artifacts.join("emulators")) {
        writeln!(out, "emulator: {m}").map_err(io)?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Internal(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| ServiceError::Unavailable(format!("cannot bind {}:{}: {e}", a.host, a.port)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        banner(
            out,
            0,
            &serde_json::json!({"host": a.host, "port": addr.port(), "workers": a.workers}),
        )?;
        writeln!(out, "listening on http://{addr}").map_err(io)?;
        writeln!(out, "port: {}", addr.port()).map_err(io)?;
        out.flush().map_err(io)?;
        let app = crate::api::router(crate::api::AppState::new(engine, a.workers));
        axum::serve(listener, app)
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))
    })
}
