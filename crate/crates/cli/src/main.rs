//! `guiyun`: corpus ingestion, extraction, meter analysis, generation,
//! evaluation and ledger queries from the shell.
//!
//! Exit status is 0 on success, 1 when the operation fails and 2 for
//! malformed invocations.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use guiyun::corpus::{deduplicate, normalize, normalize_text, parse_corpus, write_corpus, Genre, NormalizedPoem, PoemRecord};
use guiyun::evaluation::{build_turing_set, compliance_metrics, parse_responses, score_responses, AnswerKey};
use guiyun::generation::{
    build_style_lexicon, follow_rhyme, generate_fs2text, train_ngram, training_pairs, DecodeOptions, FollowMode, Generation,
    Mode, StyleLexicon,
};
use guiyun::ledger::Provenance;
use guiyun::prosody::{validate, Strictness};
use guiyun::Ledger;
use guiyun_server::{AppState, Config, Resources};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "guiyun", version, about = "Regulated-verse analysis and constrained generation")]
struct Cli {
    /// `key = value` configuration file; `GUIYUN_*` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, normalize and deduplicate corpus CSV files.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write the deduplicated records here.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Theme words and key characters, one JSON object per poem.
    Extract {
        #[command(flatten)]
        input: PoemInput,
        /// Treat the input as a corpus CSV rather than a single poem.
        #[arg(long, conflicts_with = "text")]
        corpus: bool,
        #[arg(long)]
        k_theme: Option<usize>,
        #[arg(long)]
        k_key: Option<usize>,
    },
    /// Check a poem against its genre's meter and print the report.
    Analyze {
        #[command(flatten)]
        input: PoemInput,
        #[arg(long, default_value = "relaxed")]
        strictness: Strictness,
        /// Judge against this genre instead of the detected one.
        #[arg(long)]
        genre: Option<Genre>,
    },
    /// Train an n-gram model on the configured corpus and save it.
    TrainLm {
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Prompt/target pairs for fine-tuning an external model, as JSON lines.
    TrainingPairs {
        #[arg(long, value_enum, default_value = "fs2text")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a poem from its first line.
    Generate {
        #[arg(long)]
        genre: Genre,
        #[arg(long)]
        first_line: String,
        /// Theme word; repeatable.
        #[arg(long = "theme")]
        themes: Vec<String>,
        /// Key characters; repeatable, each value may hold several.
        #[arg(long = "key")]
        keys: Vec<String>,
        /// Style lexicon file restricting themes and keys.
        #[arg(long)]
        style: Option<PathBuf>,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Write a poem on the rhyme of an existing one.
    FollowRhyme {
        #[command(flatten)]
        input: PoemInput,
        #[arg(long, default_value_t = 0.5)]
        theme_fraction: f64,
        #[arg(long, default_value_t = 0.5)]
        key_fraction: f64,
        #[arg(long, value_enum, default_value = "identical-chars")]
        follow_mode: FollowModeArg,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Build a blind questionnaire from human/machine pairs.
    TuringBuild {
        /// CSV with `human,machine` columns.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        key: PathBuf,
    },
    /// Score questionnaire responses against the answer key.
    TuringScore {
        #[arg(long)]
        key: PathBuf,
        /// CSV with `respondent_id,item_id,choice` columns.
        #[arg(long)]
        responses: PathBuf,
    },
    /// Meter compliance of generated poems, one per line of the input.
    Compliance {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        genre: Genre,
    },
    /// Look a poem up in the ledger.
    LedgerCheck {
        #[command(flatten)]
        input: PoemInput,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Build a style lexicon from a single-style corpus.
    StyleBuild {
        #[arg(long)]
        name: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Keep only poems whose title starts with this.
        #[arg(long)]
        title_prefix: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PoemInput {
    #[arg(long)]
    text: Option<String>,
    /// Read the poem from a file, `-` for standard input.
    #[arg(long)]
    file: Option<PathBuf>,
}

impl PoemInput {
    fn read(&self) -> Result<String> {
        match (&self.text, &self.file) {
            (Some(t), _) => Ok(t.clone()),
            (None, Some(p)) if p.as_os_str() == "-" => {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                Ok(s)
            }
            (None, Some(p)) => fs::read_to_string(p).with_context(|| p.display().to_string()),
            (None, None) => unreachable!("clap requires one input"),
        }
    }

    fn poem(&self) -> Result<NormalizedPoem> {
        Ok(normalize_text(&self.read()?)?)
    }
}

#[derive(Args)]
struct DecodeArgs {
    /// Random by default; always echoed in the output.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strictness: Option<Strictness>,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Append the result to the configured ledger.
    #[arg(long)]
    record: bool,
}

impl DecodeArgs {
    fn options(&self, config: &Config) -> DecodeOptions<f64> {
        DecodeOptions {
            seed: self.seed.unwrap_or_else(|| rand::random::<u64>() & guiyun_server::MAX_SEED),
            strictness: self.strictness.unwrap_or(config.strictness),
            beam_width: self.beam_width.unwrap_or(config.beam_width),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FollowModeArg {
    IdenticalChars,
    SameGroup,
}

impl From<FollowModeArg> for FollowMode {
    fn from(m: FollowModeArg) -> Self {
        match m {
            FollowModeArg::IdenticalChars => FollowMode::IdenticalChars,
            FollowModeArg::SameGroup => FollowMode::SameGroup,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Fs2text,
    Rr2text,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| path.display().to_string())?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| path.display().to_string())
}

fn read_records(path: &Path) -> Result<Vec<PoemRecord>> {
    let parsed = parse_corpus(open(path)?, &path.display().to_string())?;
    for e in &parsed.errors {
        eprintln!("warning: {}:{}: {}", path.display(), e.line, e.message);
    }
    Ok(parsed.records)
}

#[derive(Serialize)]
struct Recorded<'a> {
    #[serde(flatten)]
    generation: &'a Generation<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    entry_id: Option<String>,
}

fn emit_generation(generation: &Generation<f64>, record: bool, config: &Config) -> Result<()> {
    let entry_id = if record {
        let mut ledger = Ledger::open(&config.ledger)?;
        let provenance = Provenance {
            prompt: generation.prompt_text.clone(),
            lm_id: generation.lm.clone(),
            seed: generation.seed,
        };
        Some(ledger.record(&generation.text, &provenance)?.entry_id)
    } else {
        None
    };
    print_json(&Recorded { generation, entry_id })
}

#[derive(Serialize)]
struct IngestSummary {
    rows: usize,
    malformed: usize,
    unnormalizable: usize,
    before_dedup: usize,
    after_dedup: usize,
    genres: std::collections::BTreeMap<Genre, usize>,
}

#[derive(Serialize)]
struct PoemExtraction<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_id: Option<&'a str>,
    #[serde(flatten)]
    result: ExtractOutcome,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ExtractOutcome {
    Ok(guiyun::extraction::Extraction),
    Err { error: String },
}

fn run(cli: Cli) -> Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { inputs, output } => {
            let mut records = Vec::new();
            let mut malformed = 0;
            for path in &inputs {
                let parsed = parse_corpus(open(path)?, &path.display().to_string())?;
                for e in &parsed.errors {
                    eprintln!("warning: {}:{}: {}", path.display(), e.line, e.message);
                }
                malformed += parsed.errors.len();
                records.extend(parsed.records);
            }
            let rows = records.len() + malformed;
            let unnormalizable = records.iter().filter(|r| normalize(r).is_err()).count();
            let before_dedup = records.len();
            let records = deduplicate(records);
            let mut genres = std::collections::BTreeMap::new();
            for poem in records.iter().filter_map(|r| normalize(r).ok()) {
                *genres.entry(poem.genre()).or_insert(0) += 1;
            }
            if let Some(out) = output {
                write_corpus(create(&out)?, &records)?;
            }
            print_json(&IngestSummary {
                rows,
                malformed,
                unnormalizable,
                before_dedup,
                after_dedup: records.len(),
                genres,
            })
        }
        Command::Extract {
            input,
            corpus,
            k_theme,
            k_key,
        } => {
            let extractor = guiyun_server::extractor(&config, &guiyun_server::corpus(&config)?)?;
            if !corpus {
                return print_json(&extractor.extract(&input.poem()?, k_theme, k_key)?);
            }
            let path = input.file.as_deref().expect("--corpus conflicts with --text");
            let mut out = io::stdout().lock();
            for record in read_records(path)? {
                let result = match normalize(&record) {
                    Ok(poem) => match extractor.extract(&poem, k_theme, k_key) {
                        Ok(x) => ExtractOutcome::Ok(x),
                        Err(e) => ExtractOutcome::Err { error: e.to_string() },
                    },
                    Err(e) => ExtractOutcome::Err { error: e.to_string() },
                };
                let line = PoemExtraction {
                    title: Some(&record.title),
                    source_id: (!record.source_id.is_empty()).then_some(record.source_id.as_str()),
                    result,
                };
                serde_json::to_writer(&mut out, &line)?;
                writeln!(out)?;
            }
            Ok(())
        }
        Command::Analyze { input, strictness, genre } => {
            let poem = input.poem()?;
            let book = guiyun_server::book(&config)?;
            print_json(&validate(&poem, genre.unwrap_or(poem.genre()), &book, strictness)?)
        }
        Command::TrainLm { order, output } => {
            let model = train_ngram::<f64>(&guiyun_server::corpus(&config)?, order)?;
            model.save(create(&output)?)?;
            eprintln!("saved order-{order} model to {}", output.display());
            Ok(())
        }
        Command::TrainingPairs { mode, seed } => {
            let corpus = guiyun_server::corpus(&config)?;
            let extractor = guiyun_server::extractor(&config, &corpus)?;
            let book = guiyun_server::book(&config)?;
            let mode = match mode {
                ModeArg::Fs2text => Mode::Fs2Text,
                ModeArg::Rr2text => Mode::Rr2Text,
            };
            let mut out = io::stdout().lock();
            for pair in training_pairs(&corpus, &extractor, &book, mode, seed) {
                serde_json::to_writer(&mut out, &pair)?;
                writeln!(out)?;
            }
            Ok(())
        }
        Command::Generate {
            genre,
            first_line,
            themes,
            keys,
            style,
            decode,
        } => {
            let style = style
                .map(|p| StyleLexicon::load(open(&p)?).map_err(anyhow::Error::from))
                .transpose()?;
            let keys: Vec<char> = keys.iter().flat_map(|k| k.chars()).collect();
            let opts = decode.options(&config);
            let corpus = guiyun_server::corpus(&config)?;
            let lm = guiyun_server::language_model(&config, &corpus)?;
            let book = guiyun_server::book(&config)?;
            let g = generate_fs2text(&first_line, genre, &themes, &keys, style.as_ref(), lm.as_ref(), &book, &opts)?;
            emit_generation(&g, decode.record, &config)
        }
        Command::FollowRhyme {
            input,
            theme_fraction,
            key_fraction,
            follow_mode,
            decode,
        } => {
            for f in [theme_fraction, key_fraction] {
                if !(0.0..=1.0).contains(&f) {
                    bail!("fractions must lie in [0, 1], got {f}");
                }
            }
            let original = input.poem()?;
            let mut opts = decode.options(&config);
            opts.follow_mode = follow_mode.into();
            let corpus = guiyun_server::corpus(&config)?;
            let extractor = guiyun_server::extractor(&config, &corpus)?;
            let lm = guiyun_server::language_model(&config, &corpus)?;
            let book = guiyun_server::book(&config)?;
            let g = follow_rhyme(&original, &extractor, lm.as_ref(), &book, &opts, theme_fraction, key_fraction)?;
            emit_generation(&g, decode.record, &config)
        }
        Command::TuringBuild { pairs, seed, items, key } => {
            let mut rdr = csv::Reader::from_reader(open(&pairs)?);
            let mut poems = Vec::new();
            for (i, row) in rdr.records().enumerate() {
                let row = row?;
                if row.len() != 2 {
                    bail!("{} line {}: expected human,machine", pairs.display(), i + 2);
                }
                poems.push((normalize_text(&row[0])?, normalize_text(&row[1])?));
            }
            let (questions, answers) = build_turing_set(&poems, seed)?;
            serde_json::to_writer_pretty(create(&items)?, &questions)?;
            serde_json::to_writer_pretty(create(&key)?, &answers)?;
            eprintln!("{} items", questions.len());
            Ok(())
        }
        Command::TuringScore { key, responses } => {
            let key: AnswerKey = serde_json::from_reader(open(&key)?).with_context(|| key.display().to_string())?;
            let sheets = parse_responses(open(&responses)?)?;
            let report = score_responses(&key, &sheets);
            for r in &report.rejected {
                eprintln!(
                    "warning: dropped sheet {}: unknown items {}",
                    r.respondent_id,
                    r.unknown_items.join(" ")
                );
            }
            print_json(&report)
        }
        Command::Compliance { file, genre } => {
            let text = fs::read_to_string(&file).with_context(|| file.display().to_string())?;
            let poems: Vec<NormalizedPoem> = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(normalize_text)
                .collect::<Result<_, _>>()?;
            print_json(&compliance_metrics(&poems, genre, &guiyun_server::book(&config)?))
        }
        Command::LedgerCheck { input, ledger } => {
            let path = ledger.unwrap_or(config.ledger);
            if !path.exists() {
                bail!("no ledger at {}", path.display());
            }
            print_json(&Ledger::open(&path)?.check(&input.read()?))
        }
        Command::StyleBuild {
            name,
            corpus,
            title_prefix,
            output,
        } => {
            let records = read_records(&corpus)?;
            let poems: Vec<NormalizedPoem> = records
                .iter()
                .filter(|r| title_prefix.as_deref().is_none_or(|p| r.title.starts_with(p)))
                .filter_map(|r| normalize(r).ok())
                .collect();
            let extractor = guiyun_server::extractor(&config, &guiyun_server::corpus(&config)?)?;
            let lexicon = build_style_lexicon(&name, &poems, &extractor)?;
            lexicon.save(create(&output)?)?;
            eprintln!(
                "{}: {} theme words, {} key chars from {} poems",
                name,
                lexicon.allowed_theme_words.len(),
                lexicon.allowed_key_chars.len(),
                poems.len()
            );
            Ok(())
        }
        Command::Serve { bind } => {
            if let Some(bind) = bind {
                config.bind = bind;
            }
            let resources = Resources::load(&config)?;
            let ledger = Ledger::open(&config.ledger)?;
            let state = AppState::new(resources, ledger, &config);
            tokio::runtime::Runtime::new()?.block_on(guiyun_server::serve(&config, state))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
