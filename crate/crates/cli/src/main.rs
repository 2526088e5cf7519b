use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use controversy::analysis::{information_gain_ranking, write_ranking, DEFAULT_MIN_DF};
use controversy::corpus::{
    extract_contexts, load_concepts, parse_corpus, read_contexts, write_contexts, ContextMap, ExtractOptions,
    DEFAULT_MAX_LEN, DEFAULT_MIN_LEN,
};
use controversy::embedding::{concept_embedding, load_embeddings, EmbeddingError};
use controversy::evaluation::{
    run_experiment, training_set, Dataset, EstimatorKind, ExperimentConfig, ExperimentInputs, Protocol,
    DEFAULT_POSITIVE_THRESHOLD,
};
use controversy::nb::{nb_concept_score, train_nb, NbModel, DEFAULT_ALPHA};
use controversy::nn::{build_nn_model, NnModel, DEFAULT_RADIUS};
use controversy::{ConceptSet, EmbeddingTable, MaskedContext, DEFAULT_MASK_TOKEN};

#[derive(Parser)]
#[command(name = "controversy", version, about = "Estimate concept controversiality from referencing sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract masked contexts from an annotated corpus.
    Ingest(IngestArgs),
    /// Train an NB or NN model.
    Train(TrainArgs),
    /// Score concepts with a trained model.
    Score(ScoreArgs),
    /// Run an evaluation protocol and write a report.
    Eval(EvalArgs),
    /// Rank words by information gain between the classes.
    RankWords(RankArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Nb,
    Nn,
    NnWeighted,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Nb => EstimatorKind::Nb,
            EstimatorArg::Nn => EstimatorKind::Nn,
            EstimatorArg::NnWeighted => EstimatorKind::NnWeighted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Kfold,
    Loco,
    Graded,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Kfold => Protocol::Kfold,
            ProtocolArg::Loco => Protocol::LeaveOneCategoryOut,
            ProtocolArg::Graded => Protocol::Graded,
        }
    }
}

/// Where contexts come from: a prepared contexts file, or a corpus to extract.
#[derive(Args)]
struct Source {
    /// Annotated corpus (JSON lines).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Contexts file written by `ingest`.
    #[arg(long, conflicts_with = "corpus")]
    contexts: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_LEN)]
    min_len: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    /// Keep at most this many contexts per concept (seeded sample).
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    concepts: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_LEN)]
    min_len: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    #[arg(long)]
    concepts: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_RADIUS, allow_negative_numbers = true)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Downsample the larger class's sentences before NB training.
    #[arg(long)]
    balance: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    concepts: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum, default_value = "kfold")]
    protocol: ProtocolArg,
    #[arg(long, value_enum, default_value = "nb")]
    estimator: EstimatorArg,
    #[arg(long)]
    concepts: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Graded concept list for the graded protocol.
    #[arg(long)]
    test_concepts: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_RADIUS, allow_negative_numbers = true)]
    radius: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    held_out_category: Option<String>,
    #[arg(long, default_value_t = DEFAULT_POSITIVE_THRESHOLD)]
    positive_threshold: u8,
    /// Grade-0 negatives sampled for graded accuracy (default: number of positives).
    #[arg(long)]
    negative_sample: Option<usize>,
    #[arg(long)]
    balance: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    concepts: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = DEFAULT_MIN_DF)]
    min_df: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => bail!("file not found: {}", path.display()),
        Err(e) => Err(e).with_context(|| format!("cannot open {}", path.display())),
    }
}

/// Writes through a temp file in the target directory and renames on success,
/// so a failed run never leaves a partial output behind.
fn write_output(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("cannot create output in {}", dir.display()))?;
            {
                let mut w = BufWriter::new(tmp.as_file_mut());
                body(&mut w)?;
                w.flush()?;
            }
            tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(())
}

/// Tab unless the header line has a comma and no tab.
fn load_concept_file(path: &Path) -> Result<ConceptSet> {
    let mut text = String::new();
    io::Read::read_to_string(&mut open(path)?, &mut text)?;
    let header = text.lines().next().unwrap_or("");
    let delimiter = if !header.contains('\t') && header.contains(',') { b',' } else { b'\t' };
    load_concepts(text.as_bytes(), delimiter).with_context(|| path.display().to_string())
}

fn load_table(path: &Path) -> Result<EmbeddingTable> {
    load_embeddings(open(path)?).with_context(|| path.display().to_string())
}

impl Source {
    fn options(&self, seed: u64) -> ExtractOptions {
        ExtractOptions {
            min_len: self.min_len,
            max_len: self.max_len,
            per_concept_cap: self.cap,
            seed,
            ..Default::default()
        }
    }

    fn is_set(&self) -> bool {
        self.corpus.is_some() || self.contexts.is_some()
    }

    /// Contexts for every concept in `concepts`; concepts with none map to an
    /// empty list.
    fn load(&self, concepts: &ConceptSet, seed: u64) -> Result<ContextMap> {
        let mut map = if let Some(path) = &self.contexts {
            let (mut all, _) = read_contexts(open(path)?).with_context(|| path.display().to_string())?;
            concepts.ids().map(|id| (id.to_string(), all.remove(id).unwrap_or_default())).collect()
        } else if let Some(path) = &self.corpus {
            let sentences = parse_corpus(open(path)?, &path.display().to_string())?;
            extract_contexts(&sentences, concepts, &self.options(seed))?
        } else {
            bail!("one of --corpus or --contexts is required");
        };
        warn_empty(&mut map);
        Ok(map)
    }

    fn echo(&self, seed: u64) -> Value {
        json!({
            "corpus": self.corpus,
            "contexts": self.contexts,
            "extract": self.options(seed),
        })
    }
}

/// Logs concepts with no contexts and returns their ids.
fn warn_empty(map: &mut ContextMap) -> Vec<String> {
    let empty: Vec<String> = map.iter().filter(|(_, v)| v.is_empty()).map(|(k, _)| k.clone()).collect();
    for id in &empty {
        log::warn!("concept `{id}` has no contexts");
    }
    empty
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(ErrorKind::MissingRequiredArgument, msg).exit()
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let concepts = load_concept_file(&a.concepts)?;
    let sentences = parse_corpus(open(&a.corpus)?, &a.corpus.display().to_string())?;
    let opts = ExtractOptions {
        min_len: a.min_len,
        max_len: a.max_len,
        per_concept_cap: a.cap,
        seed: a.seed,
        ..Default::default()
    };
    let mut map = extract_contexts(&sentences, &concepts, &opts)?;
    let empty = warn_empty(&mut map);
    let header = json!({
        "command": "ingest",
        "corpus": a.corpus,
        "concepts": a.concepts,
        "extract": opts,
        "sentences": sentences.len(),
        "contexts": map.values().map(Vec::len).sum::<usize>(),
        "warnings": { "no_contexts": empty },
    });
    write_output(a.out.as_deref(), |w| write_contexts(w, &map, &header))
}

fn train(a: &TrainArgs) -> Result<()> {
    let concepts = load_concept_file(&a.concepts)?;
    let mut config = json!({
        "command": "train",
        "estimator": EstimatorKind::from(a.estimator),
        "concepts": a.concepts,
        "seed": a.seed,
    });
    match a.estimator {
        EstimatorArg::Nb => {
            let contexts = a.source.load(&concepts, a.seed)?;
            let data = Dataset::new(concepts, contexts);
            let ids: Vec<String> = data.concepts.labeled().map(|(c, _)| c.id.clone()).collect();
            let set = training_set(&data, &ids, a.balance, a.seed);
            let model = train_nb(&set.contexts, a.alpha, DEFAULT_MASK_TOKEN)?;
            config["alpha"] = json!(a.alpha);
            config["balance"] = json!(a.balance);
            config["source"] = a.source.echo(a.seed);
            config["training_concepts"] = json!(set.concepts.len());
            config["training_sentences"] = json!(set.contexts.len());
            write_output(a.out.as_deref(), |w| model.write(w, &config))
        }
        EstimatorArg::Nn | EstimatorArg::NnWeighted => {
            let Some(path) = &a.embeddings else { usage_error("the nn estimators require --embeddings") };
            let table = load_table(path)?;
            let model = build_nn_model(concepts.labeled(), &table, a.radius)?;
            for id in model.skipped() {
                log::warn!("concept `{id}` has no embedding; left out of the model");
            }
            config["radius"] = json!(a.radius);
            config["embeddings"] = json!(path);
            config["skipped"] = json!(model.skipped());
            write_output(a.out.as_deref(), |w| model.write(w, &config))
        }
    }
}

enum Loaded {
    Nb(NbModel),
    Nn(NnModel, bool),
}

fn load_model(path: &Path) -> Result<(Loaded, Value)> {
    let mut reader = open(path)?;
    let magic = {
        let buf = reader.fill_buf()?;
        String::from_utf8_lossy(&buf[..buf.len().min(64)]).into_owned()
    };
    let ctx = || path.display().to_string();
    if magic.starts_with("# controversy nb-model") {
        let (m, cfg) = NbModel::read(reader).with_context(ctx)?;
        Ok((Loaded::Nb(m), cfg))
    } else if magic.starts_with("# controversy nn-model") {
        let (m, cfg) = NnModel::read(reader).with_context(ctx)?;
        let weighted = cfg.get("estimator").and_then(Value::as_str) == Some("nn-weighted");
        Ok((Loaded::Nn(m, weighted), cfg))
    } else {
        bail!("{}: not a controversy model file", path.display())
    }
}

struct ScoreRow {
    id: String,
    score: Option<f64>,
    support: usize,
    status: String,
}

fn score(a: &ScoreArgs) -> Result<()> {
    let (model, model_config) = load_model(&a.model)?;
    let concepts = load_concept_file(&a.concepts)?;
    let mut rows = Vec::new();
    let mut config = json!({
        "command": "score",
        "model": a.model,
        "concepts": a.concepts,
        "model_config": model_config,
    });
    match &model {
        Loaded::Nb(m) => {
            let contexts = a.source.load(&concepts, a.seed)?;
            config["source"] = a.source.echo(a.seed);
            for (id, ctxs) in &contexts {
                rows.push(match nb_concept_score(m, ctxs) {
                    Ok(s) => {
                        ScoreRow { id: id.clone(), score: Some(s.score), support: s.n_sentences, status: "ok".into() }
                    }
                    Err(_) => {
                        ScoreRow { id: id.clone(), score: None, support: 0, status: "unscorable: no contexts".into() }
                    }
                });
            }
        }
        Loaded::Nn(m, weighted) => {
            let Some(path) = &a.embeddings else { usage_error("scoring with an nn model requires --embeddings") };
            if a.source.is_set() {
                log::warn!("nn models ignore --corpus/--contexts");
            }
            let table = load_table(path)?;
            if table.dimension() != m.dimension() {
                bail!("embedding dimension {} does not match model dimension {}", table.dimension(), m.dimension());
            }
            config["embeddings"] = json!(path);
            for c in concepts.iter() {
                rows.push(match concept_embedding(&table, c) {
                    Ok(v) => {
                        let out = m.score(&v, *weighted)?;
                        let status = if out.used_fallback { "fallback" } else { "ok" };
                        ScoreRow {
                            id: c.id.clone(),
                            score: Some(out.score),
                            support: out.neighbors,
                            status: status.into(),
                        }
                    }
                    Err(EmbeddingError::NoEmbedding(_)) => ScoreRow {
                        id: c.id.clone(),
                        score: None,
                        support: 0,
                        status: "unscorable: no embedding".into(),
                    },
                    Err(e) => return Err(e.into()),
                });
            }
        }
    }
    write_output(a.out.as_deref(), |w| {
        writeln!(w, "# {config}")?;
        writeln!(w, "concept\tscore\tsupport\tstatus")?;
        for r in &rows {
            let score = r.score.map_or(String::new(), |s| format!("{s:.6}"));
            writeln!(w, "{}\t{}\t{}\t{}", r.id, score, r.support, r.status)?;
        }
        Ok(())
    })
}

fn eval(a: &EvalArgs) -> Result<()> {
    let estimator = EstimatorKind::from(a.estimator);
    let needs_embeddings = a.estimator != EstimatorArg::Nb;
    if needs_embeddings && a.embeddings.is_none() {
        usage_error("the nn estimators require --embeddings");
    }
    let graded_protocol = matches!(a.protocol, ProtocolArg::Graded);
    if graded_protocol && a.test_concepts.is_none() {
        usage_error("--protocol graded requires --test-concepts");
    }
    let concepts = load_concept_file(&a.concepts)?;
    let table = a.embeddings.as_deref().map(load_table).transpose()?;
    let load = |set: &ConceptSet| -> Result<ContextMap> {
        if !needs_embeddings || a.source.is_set() {
            a.source.load(set, a.seed)
        } else {
            Ok(set.ids().map(|id| (id.to_string(), Vec::new())).collect())
        }
    };
    let data = Dataset::new(concepts.clone(), load(&concepts)?);
    let graded = match &a.test_concepts {
        Some(path) if graded_protocol => {
            let set = load_concept_file(path)?;
            let contexts = load(&set)?;
            Some(Dataset::new(set, contexts))
        }
        _ => None,
    };
    let config = ExperimentConfig {
        protocol: a.protocol.into(),
        estimator,
        alpha: a.alpha,
        radius: a.radius,
        k: a.k,
        seed: a.seed,
        held_out_category: a.held_out_category.clone(),
        positive_threshold: a.positive_threshold,
        negative_sample: a.negative_sample,
        balance_sentences: a.balance,
        ..Default::default()
    };
    let inputs = ExperimentInputs { data: &data, embeddings: table.as_ref(), graded: graded.as_ref() };
    let mut report = run_experiment(&config, &inputs)?;
    let mut echo = report.config_echo.take();
    echo["concepts"] = json!(a.concepts);
    echo["source"] = a.source.echo(a.seed);
    echo["embeddings"] = json!(a.embeddings);
    echo["test_concepts"] = json!(a.test_concepts);
    report.config_echo = echo;
    write_output(a.out.as_deref(), |w| report.write(w))
}

fn rank_words(a: &RankArgs) -> Result<()> {
    let concepts = load_concept_file(&a.concepts)?;
    let contexts = a.source.load(&concepts, a.seed)?;
    let labels = concepts.labels();
    let examples: Vec<(&MaskedContext, bool)> = contexts
        .iter()
        .filter_map(|(id, ctxs)| labels.get(id).map(|l| (ctxs, *l)))
        .flat_map(|(ctxs, l)| ctxs.iter().map(move |c| (c, l)))
        .collect();
    let ranking = information_gain_ranking(&examples, a.min_df, DEFAULT_MASK_TOKEN)?;
    log::info!("ranked {} words over {} sentences (min_df {})", ranking.len(), examples.len(), a.min_df);
    write_output(a.out.as_deref(), |w| write_ranking(w, &ranking))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::RankWords(a) => rank_words(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
