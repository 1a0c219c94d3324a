//! Command-line entry points. [`run`] parses arguments and returns the
//! process exit code: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use civility_core::lingua::{metric_vector, read_messages, EmbeddingTable, MessageInput, MessageSource, MetricAssets};
use civility_core::llm::{BackendKind, CompletionParams};
use civility_core::panels::{emo_reframe, ReframeBundle};
use civility_core::simulant::{
    apply_variation, create_incident, full_matrix, read_incidents, write_incidents, Behavioral, Category,
    ComplaintSpec, Domain, Incident, Personality,
};
use civility_core::stats::{compare_corpora, compare_ratings, read_ratings_csv, EffectSizeMode, RatingScale};
use civility_core::{Assets, ChainContext};
use civility_service::config::{BackendSettings, ServiceConfig};
use civility_service::Service;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod par;

#[derive(Debug, Parser)]
#[command(name = "civility", version, about = "Simulated uncivil-client studies and support-message metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate 5-turn incidents as JSONL
    Forge(ForgeArgs),
    /// Run the reframing chain over incident JSONL
    Reframe(ReframeArgs),
    /// Compare two message corpora metric by metric
    Metrics(MetricsArgs),
    /// Paired analysis of perceived-empathy ratings
    Ratings(RatingsArgs),
    /// Run the study HTTP service until interrupted
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Remote,
    Scripted,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// Completion backend [default: scripted]
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// JSON rules file for the scripted backend
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
    /// Chat-completions URL for the remote backend
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Environment variable holding the API key
    #[arg(long, value_name = "VAR")]
    api_key_env: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

impl BackendArgs {
    fn apply(&self, s: &mut BackendSettings) {
        if let Some(b) = self.backend {
            s.kind = Some(match b {
                BackendArg::Remote => BackendKind::Remote,
                BackendArg::Scripted => BackendKind::Scripted,
            });
        }
        if self.script.is_some() {
            s.script = self.script.clone();
        }
        if self.endpoint.is_some() {
            s.endpoint_url = self.endpoint.clone();
        }
        if self.api_key_env.is_some() {
            s.api_key_env = self.api_key_env.clone();
        }
        if self.model.is_some() {
            s.model = self.model.clone();
        }
    }

    fn settings(&self) -> BackendSettings {
        let mut s = BackendSettings::default();
        self.apply(&mut s);
        s
    }
}

#[derive(Debug, Args)]
struct ForgeArgs {
    /// Full domain x category matrix (the default when no filter is given)
    #[arg(long, conflicts_with_all = ["domain", "category"])]
    all: bool,
    /// Restrict to these domains
    #[arg(long, value_parser = parse_text::<Domain>)]
    domain: Vec<Domain>,
    /// Restrict to these categories
    #[arg(long, value_parser = parse_text::<Category>)]
    category: Vec<Category>,
    /// First seed; each combination uses SEED..SEED+SEEDS
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seeds per combination
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Attach a behavioral context variation to every incident
    #[arg(long, value_parser = parse_serde::<Behavioral>)]
    behavioral: Option<Behavioral>,
    /// Attach a personality context variation to every incident
    #[arg(long, value_parser = parse_serde::<Personality>)]
    personality: Option<Personality>,
    #[arg(long, value_name = "DIR")]
    assets: Option<PathBuf>,
    /// Output JSONL [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct ReframeArgs {
    /// Incident JSONL
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output JSONL [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Seed passed with every completion
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR")]
    assets: Option<PathBuf>,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PairBy {
    MessageId,
    IncidentId,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EffectArg {
    Pooled,
    Paired,
}

impl From<EffectArg> for EffectSizeMode {
    fn from(e: EffectArg) -> Self {
        match e {
            EffectArg::Pooled => EffectSizeMode::Pooled,
            EffectArg::Paired => EffectSizeMode::Paired,
        }
    }
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Message JSONL, given twice: corpus A then corpus B
    #[arg(long = "in", value_name = "FILE", num_args = 1, required = true)]
    input: Vec<PathBuf>,
    /// Report JSON
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Text table [default: stdout]
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    /// Asset directory; its categories.json replaces the builtin lexicon
    #[arg(long, value_name = "DIR")]
    assets: Option<PathBuf>,
    /// Word vectors, one `token v1 .. vd` per line; enables adaptability
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// JSONL of externally computed empathy/reactivity scores
    #[arg(long, value_name = "FILE")]
    external: Option<PathBuf>,
    /// Incident JSONL supplying incident text for messages that lack it
    #[arg(long, value_name = "FILE")]
    incidents: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "message-id")]
    pair_by: PairBy,
    #[arg(long, value_enum, default_value = "pooled")]
    effect_size: EffectArg,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Raw,
    Centered,
}

#[derive(Debug, Args)]
struct RatingsArgs {
    /// Ratings CSV
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Report JSON
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Text table [default: stdout]
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "raw")]
    scale: ScaleArg,
    #[arg(long, value_enum, default_value = "pooled")]
    effect_size: EffectArg,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Service config (TOML); flags below override it
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    /// Study flow (TOML or JSON)
    #[arg(long, value_name = "FILE")]
    flow: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    assets: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// Built task UI to serve at /
    #[arg(long, value_name = "DIR")]
    static_dir: Option<PathBuf>,
    /// Seed for incident planning and completions
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    backend: BackendArgs,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get().min(8))
}

fn parse_text<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_serde<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// A failed command, reported on stderr with exit code 2.
#[derive(Debug)]
pub struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn fail(msg: impl Into<String>) -> Failure {
    Failure(msg.into())
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Command::Metrics(m) = &cli.command {
        if m.input.len() != 2 {
            let msg = format!("metrics takes exactly two --in files, got {}", m.input.len());
            let mut cmd = Cli::command();
            cmd.build();
            let sub = cmd.find_subcommand_mut("metrics").expect("metrics subcommand");
            let _ = sub.error(clap::error::ErrorKind::WrongNumberOfValues, msg).print();
            return 1;
        }
    }
    let level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match cli.command {
        Command::Forge(a) => forge(a),
        Command::Reframe(a) => reframe(a),
        Command::Metrics(a) => metrics(a),
        Command::Ratings(a) => ratings(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn open_in(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn create_out(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// Writes through `f` to `path`, or to stdout when no path is given.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut w = create_out(p)?;
            f(&mut w).and_then(|_| w.flush()).map_err(|e| fail(format!("{}: {e}", p.display())))
        }
        None => {
            let mut w = io::stdout().lock();
            f(&mut w).and_then(|_| w.flush()).map_err(Failure::from)
        }
    }
}

fn load_assets(dir: Option<&Path>) -> Result<Assets, Failure> {
    Assets::load(dir).map_err(Failure::from)
}

fn forge(a: ForgeArgs) -> Result<(), Failure> {
    let assets = load_assets(a.assets.as_deref())?;
    let backend = a.backend.settings().build()?;
    let params = CompletionParams::default();
    let ctx = ChainContext { assets: &assets, backend: &*backend, params: &params };
    let specs: Vec<ComplaintSpec> = full_matrix(a.seed..a.seed + a.seeds)
        .into_iter()
        .filter(|s| a.domain.is_empty() || a.domain.contains(&s.domain))
        .filter(|s| a.category.is_empty() || a.category.contains(&s.category))
        .collect();
    let variation = a.behavioral.is_some() || a.personality.is_some();
    let incidents = par::map(&specs, a.jobs, |spec| -> Result<Incident, Failure> {
        let incident = create_incident(&ctx, *spec).map_err(|e| fail(format!("{}: {e}", spec.incident_id())))?;
        Ok(if variation { apply_variation(&incident, a.behavioral, a.personality)? } else { incident })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    with_output(a.out.as_deref(), |w| write_incidents(w, &incidents))?;
    log::info!("wrote {} incidents", incidents.len());
    Ok(())
}

/// One reframed incident; also a valid metrics input line.
#[derive(Serialize)]
struct ReframeLine<'a> {
    message_id: String,
    source: MessageSource,
    text: &'a str,
    incident_id: String,
    incident_text: String,
    #[serde(flatten)]
    bundle: &'a ReframeBundle,
}

fn reframe(a: ReframeArgs) -> Result<(), Failure> {
    let incidents = read_incidents(open_in(&a.input)?).map_err(|e| fail(format!("{}: {e}", a.input.display())))?;
    let assets = load_assets(a.assets.as_deref())?;
    let backend = a.backend.settings().build()?;
    let params = CompletionParams::default().with_seed(a.seed);
    let ctx = ChainContext { assets: &assets, backend: &*backend, params: &params };
    let bundles = par::map(&incidents, a.jobs, |inc| {
        emo_reframe(&ctx, &inc.transcript).map_err(|e| fail(format!("{}: {e}", inc.id())))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    with_output(a.out.as_deref(), |w| {
        for (inc, bundle) in incidents.iter().zip(&bundles) {
            let line = ReframeLine {
                message_id: inc.id(),
                source: MessageSource::Pilot,
                text: &bundle.reframe_paraphrase,
                incident_id: inc.id(),
                incident_text: inc.transcript.text(),
                bundle,
            };
            serde_json::to_writer(&mut *w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn read_corpus(path: &Path) -> Result<Vec<MessageInput>, Failure> {
    let msgs = read_messages(open_in(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = msgs.iter().find(|m| !seen.insert(m.message_id.as_str())) {
        return Err(fail(format!("{}: duplicate message_id {:?}", path.display(), dup.message_id)));
    }
    Ok(msgs)
}

/// Maps each message id in `a` to its counterpart in `b` sharing an
/// incident id. Each incident must occur once per corpus.
fn pair_by_incident(a: &[MessageInput], b: &[MessageInput]) -> Result<BTreeMap<String, String>, Failure> {
    fn index(msgs: &[MessageInput], label: &str) -> Result<BTreeMap<String, String>, Failure> {
        let mut out = BTreeMap::new();
        for m in msgs {
            let inc =
                m.incident_id.clone().ok_or_else(|| fail(format!("{label}: {} has no incident_id", m.message_id)))?;
            if out.insert(inc.clone(), m.message_id.clone()).is_some() {
                return Err(fail(format!("{label}: incident {inc:?} occurs more than once")));
            }
        }
        Ok(out)
    }
    let ia = index(a, "corpus A")?;
    let ib = index(b, "corpus B")?;
    let mut out = BTreeMap::new();
    for (inc, ma) in ia {
        let mb = ib.get(&inc).ok_or_else(|| fail(format!("corpus B has no message for incident {inc:?}")))?;
        out.insert(ma, mb.clone());
    }
    Ok(out)
}

fn metrics(a: MetricsArgs) -> Result<(), Failure> {
    let [path_a, path_b] = a.input.as_slice() else { unreachable!("checked in run") };
    let corpus_a = read_corpus(path_a)?;
    let corpus_b = read_corpus(path_b)?;

    let assets = load_assets(a.assets.as_deref())?;
    let mut metric_assets = MetricAssets { lexicon: assets.lexicon, ..Default::default() };
    if let Some(p) = &a.embeddings {
        metric_assets.embeddings =
            Some(EmbeddingTable::read(open_in(p)?).map_err(|e| fail(format!("{}: {e}", p.display())))?);
    }
    if let Some(p) = &a.external {
        metric_assets.external = civility_core::lingua::read_external_scores(open_in(p)?)
            .map_err(|e| fail(format!("{}: {e}", p.display())))?;
    }
    let incident_texts: BTreeMap<String, String> = match &a.incidents {
        Some(p) => read_incidents(open_in(p)?)
            .map_err(|e| fail(format!("{}: {e}", p.display())))?
            .into_iter()
            .map(|i| (i.id(), i.transcript.text()))
            .collect(),
        None => BTreeMap::new(),
    };

    let rows = |msgs: &[MessageInput]| {
        par::map(msgs, a.jobs, |m| {
            let incident_text = m
                .incident_text
                .as_deref()
                .or_else(|| m.incident_id.as_ref().and_then(|id| incident_texts.get(id)).map(String::as_str))
                .unwrap_or("");
            metric_vector(&m.message_id, m.source, &m.text, incident_text, &metric_assets)
                .map_err(|e| fail(format!("message {}: {e}", m.message_id)))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
    };
    let rows_a = rows(&corpus_a)?;
    let rows_b = rows(&corpus_b)?;
    let pairing = match a.pair_by {
        PairBy::MessageId => civility_core::stats::identity_pairing(corpus_a.iter().map(|m| m.message_id.as_str())),
        PairBy::IncidentId => pair_by_incident(&corpus_a, &corpus_b)?,
    };
    let report = compare_corpora(&rows_a, &rows_b, &pairing, a.effect_size.into())?;

    with_output(Some(&a.out), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")
    })?;
    let table = report.to_table();
    with_output(a.table.as_deref(), |w| w.write_all(table.as_bytes()))
}

fn ratings(a: RatingsArgs) -> Result<(), Failure> {
    let scale = match a.scale {
        ScaleArg::Raw => RatingScale::Raw,
        ScaleArg::Centered => RatingScale::Centered,
    };
    let records =
        read_ratings_csv(open_in(&a.input)?, scale).map_err(|e| fail(format!("{}: {e}", a.input.display())))?;
    let report = compare_ratings(&records, a.effect_size.into())?;
    with_output(Some(&a.out), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")
    })?;
    let table = format!("{}pairs: {}  dropped: {}\n", report.report.to_table(), report.pairs, report.dropped);
    with_output(a.table.as_deref(), |w| w.write_all(table.as_bytes()))
}

fn serve(a: ServeArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::from_path(p)?,
        None => ServiceConfig::default(),
    };
    macro_rules! over {
        ($($field:ident),*) => { $(if a.$field.is_some() { cfg.$field = a.$field.clone(); })* };
    }
    over!(bind, port, flow, assets, data_dir, static_dir, seed);
    a.backend.apply(&mut cfg.backend);
    let resolved = cfg.resolve()?;
    let mut params = resolved.params.clone();
    if let Some(seed) = a.seed {
        params.seed = Some(seed);
    }
    let svc = Arc::new(Service::open(resolved.settings, resolved.assets, resolved.backend, params)?);
    let router = civility_service::http::router(svc, resolved.static_dir);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(resolved.addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        civility_service::http::serve(listener, router, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(())
}
