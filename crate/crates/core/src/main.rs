use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tmgraph::corpus::{export_stopword_file, frequency_table, import_stopword_file, Corpus, SpeakerRules};
use tmgraph::embeddings::{ProviderConfig, ProviderKind};
use tmgraph::graph::{citations_for, export_graph_json};
use tmgraph::pipeline::{compare, run, Method, PipelineConfig, PipelineRun};
use tmgraph::service::{preprocess_with, serve, ServiceConfig};
use tmgraph::{Error, Result};

#[derive(Parser)]
#[command(name = "tmgraph", version, about = "Topic models and concept graphs for interview transcripts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess transcripts and write the lemmatized corpus and frequency table
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the most frequent lemmas
    Freq {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 50)]
        limit: usize,
        /// Also write the listed lemmas as a stop-word file
        #[arg(long, value_name = "FILE")]
        export_stopwords: Option<PathBuf>,
    },
    /// Fit one model and write topics.json, metrics.json, graph.json and run.json
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model and print its metric report
    Metrics {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit one model and print its concept graph, or the citations of a lemma
    Graph {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Print the sentences containing this lemma instead of the graph
        #[arg(long)]
        citations: Option<String>,
    },
    /// Run every method and print the comparison table
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 10)]
        topics: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Provider::Baseline)]
        provider: Provider,
        #[arg(long)]
        endpoint: Option<String>,
        /// Restrict to these methods (repeatable)
        #[arg(long = "method")]
        methods: Vec<String>,
    },
    /// Start the HTTP service
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "tmgraph-data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 2)]
        jobs: usize,
        #[arg(long)]
        cors_origin: Option<String>,
        #[arg(long, value_enum, default_value_t = Provider::Baseline)]
        provider: Provider,
        #[arg(long)]
        endpoint: Option<String>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Transcript files or directories of transcripts
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    keep_interviewer: bool,
    /// Additional stop words, one per line
    #[arg(long, value_name = "FILE")]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "embed_hdbscan")]
    method: String,
    #[arg(long, default_value_t = 10)]
    topics: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Provider::Baseline)]
    provider: Provider,
    #[arg(long)]
    endpoint: Option<String>,
    /// JSON-lines embeddings for the file provider
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Provider {
    Baseline,
    File,
    Remote,
}

fn provider_config(kind: Provider, endpoint: Option<String>, path: Option<PathBuf>) -> ProviderConfig {
    ProviderConfig {
        kind: match kind {
            Provider::Baseline => ProviderKind::Baseline,
            Provider::File => ProviderKind::File,
            Provider::Remote => ProviderKind::Remote,
        },
        endpoint,
        path,
        ..ProviderConfig::default()
    }
}

fn collect_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| Error::Io { path: input.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument("no input files".into()));
    }
    Ok(files)
}

fn load_corpus(args: &InputArgs) -> Result<Corpus> {
    let files = collect_files(&args.input)?;
    let mut texts = Vec::with_capacity(files.len());
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        texts.push((name, text));
    }
    let raw = Corpus::from_texts(
        texts.iter().map(|(n, t)| (n.as_str(), t.as_str())),
        &SpeakerRules::default(),
    )?;
    let extra: Vec<String> = match &args.stopwords {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            import_stopword_file(&text).into_iter().collect()
        }
        None => Vec::new(),
    };
    preprocess_with(&raw, args.keep_interviewer, &extra)
}

fn pipeline_config(model: &ModelArgs) -> Result<PipelineConfig> {
    let method: Method = model.method.parse()?;
    Ok(PipelineConfig {
        provider: provider_config(model.provider, model.endpoint.clone(), model.embeddings.clone()),
        ..PipelineConfig::new(method, model.topics, model.seed)
    })
}

fn fit(input: &InputArgs, model: &ModelArgs) -> Result<PipelineRun> {
    let corpus = load_corpus(input)?;
    let run = run(&pipeline_config(model)?, &corpus)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    Ok(run)
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn frequency_text(corpus: &Corpus, limit: usize) -> String {
    frequency_table(corpus, limit)
        .into_iter()
        .map(|(lemma, count)| format!("{lemma}\t{count}\n"))
        .collect()
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { input, out } => {
            let corpus = load_corpus(&input)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let mut dump = serde_json::to_string_pretty(&corpus.sentences)?;
            dump.push('\n');
            write(&out.join("lemmas.json"), &dump)?;
            write(&out.join("frequencies.tsv"), &frequency_text(&corpus, usize::MAX))?;
            println!("{} sentences written to {}", corpus.sentences.len(), out.display());
        }
        Command::Freq {
            input,
            limit,
            export_stopwords,
        } => {
            let corpus = load_corpus(&input)?;
            print!("{}", frequency_text(&corpus, limit));
            if let Some(path) = export_stopwords {
                let lemmas: Vec<String> = frequency_table(&corpus, limit).into_iter().map(|(l, _)| l).collect();
                write(&path, &export_stopword_file(&lemmas))?;
            }
        }
        Command::Fit { input, model, out } => {
            let run = fit(&input, &model)?;
            run.artifacts()?.write_to(&out)?;
            let mut summary = serde_json::to_string_pretty(&serde_json::json!({
                "config": run.config,
                "warnings": run.warnings,
                "notes": run.notes,
                "timings": run.timings,
                "total_seconds": run.total_seconds,
            }))?;
            summary.push('\n');
            write(&out.join("run.json"), &summary)?;
            println!("{} topics written to {}", run.result.topics.len(), out.display());
        }
        Command::Metrics { input, model } => {
            let run = fit(&input, &model)?;
            print!("{}", run.artifacts()?.metrics);
        }
        Command::Graph {
            input,
            model,
            citations,
        } => match citations {
            Some(lemma) => {
                let corpus = load_corpus(&input)?;
                println!("{}", serde_json::to_string_pretty(&citations_for(&lemma, &corpus))?);
            }
            None => {
                let run = fit(&input, &model)?;
                print!("{}", export_graph_json(&run.graph)?);
            }
        },
        Command::Compare {
            input,
            topics,
            seed,
            provider,
            endpoint,
            methods,
        } => {
            let corpus = load_corpus(&input)?;
            let methods: Vec<Method> = if methods.is_empty() {
                Method::TABLE_ORDER.to_vec()
            } else {
                methods.iter().map(|m| m.parse()).collect::<Result<_>>()?
            };
            let configs: Vec<PipelineConfig> = methods
                .into_iter()
                .map(|m| PipelineConfig {
                    provider: provider_config(provider, endpoint.clone(), None),
                    ..PipelineConfig::new(m, topics, seed)
                })
                .collect();
            print!("{}", compare(&configs, &corpus));
        }
        Command::Serve {
            addr,
            data_dir,
            jobs,
            cors_origin,
            provider,
            endpoint,
        } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let config = ServiceConfig {
                data_dir,
                max_concurrent_jobs: jobs,
                provider: provider_config(provider, endpoint, None),
                cors_origin,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            runtime.block_on(serve(config, addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
