use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rena_core::dataset::{emit_finetune_config, split, to_training_record, write_jsonl, write_jsonl_rows};
use rena_core::{evaluate_corpus, ExtractError, ExtractRequest, Pipeline};
use rena_server::commands::{
    align, invalid, load_config, read_corpus, read_gold, read_predictions, render_annotated, Failure,
};
use rena_server::ApiOptions;

#[derive(Debug, Parser)]
#[command(name = "rena", version, about = "Relation extraction from infectious-disease news")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Raw,
    Json,
    Annotated,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract relations from one article
    Extract {
        #[arg(long)]
        model: String,
        #[arg(long)]
        max_tokens: u32,
        /// Article file, or `-` for standard input
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, env = "RENA_CONFIG")]
        config: Option<PathBuf>,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, env = "RENA_PORT", default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "RENA_CONFIG")]
        config: Option<PathBuf>,
        /// Built UI assets to serve at `/`
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Score predicted reports against a gold corpus
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "model")]
        model_name: String,
        /// Print the full report as JSON instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Turn a labeled corpus into prompt/completion records
    GenRecords {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Shuffle a labeled corpus into train and validation files
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        val_fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
    },
    /// Write the fine-tuning config for a base model
    EmitConfig {
        #[arg(long)]
        base_model: String,
        /// Output file; standard output when absent
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read_article(path: &Path) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text).map_err(invalid)?;
        return Ok(text);
    }
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn print_line(text: &str) {
    print!("{text}");
    if !text.ends_with('\n') {
        println!();
    }
}

fn extract(model: String, max_tokens: u32, input: &Path, format: Format, config: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(config)?;
    let pipeline = Pipeline::from_config(&config);
    let req = ExtractRequest {
        article: read_article(input)?,
        model,
        max_tokens,
    };
    let resp = pipeline.extract(&req).map_err(|e| match e {
        ExtractError::Timeout(_) | ExtractError::Backend(_) => Failure::Backend(e.to_string()),
        e => invalid(e),
    })?;
    match format {
        Format::Raw => print_line(&resp.raw),
        Format::Json => println!("{}", serde_json::to_string(&resp.relations_json()).expect("json")),
        Format::Annotated => print_line(&render_annotated(&resp.annotated)),
    }
    Ok(())
}

fn serve(port: u16, host: &str, config: Option<&Path>, static_dir: Option<PathBuf>) -> Result<(), Failure> {
    let config = load_config(config)?;
    let options = ApiOptions {
        cors_origins: config.server.cors_origins.clone(),
        static_dir,
    };
    let app = rena_server::router(Pipeline::from_config(&config), &options).map_err(invalid)?;
    let runtime = tokio::runtime::Runtime::new().map_err(invalid)?;
    runtime
        .block_on(rena_server::serve(app, &format!("{host}:{port}")))
        .map_err(invalid)
}

fn eval(gold: &Path, pred: &Path, model_name: &str, json: bool) -> Result<(), Failure> {
    let pairs = align(read_gold(gold)?, read_predictions(pred)?)?;
    let report = evaluate_corpus(&pairs).map_err(invalid)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        print!("{}", report.to_table(model_name));
    }
    Ok(())
}

fn gen_records(input: &Path, output: &Path) -> Result<(), Failure> {
    let records = read_corpus(input)?
        .iter()
        .map(to_training_record)
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    write_jsonl_rows(output, &records).map_err(invalid)?;
    eprintln!("wrote {} records to {}", records.len(), output.display());
    Ok(())
}

fn split_corpus(input: &Path, val_fraction: f64, seed: u64, train_out: &Path, val_out: &Path) -> Result<(), Failure> {
    let examples = read_corpus(input)?;
    let (train, val) = split(&examples, val_fraction, seed).map_err(invalid)?;
    write_jsonl(train_out, &train).map_err(invalid)?;
    write_jsonl(val_out, &val).map_err(invalid)?;
    eprintln!("train {} / val {}", train.len(), val.len());
    Ok(())
}

fn emit_config(base_model: &str, output: Option<&Path>) -> Result<(), Failure> {
    let yaml = emit_finetune_config(base_model).to_yaml();
    match output {
        Some(path) => std::fs::write(path, yaml).map_err(|e| invalid(format!("{}: {e}", path.display()))),
        None => {
            print!("{yaml}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Extract { model, max_tokens, input, format, config } => {
            extract(model, max_tokens, &input, format, config.as_deref())
        }
        Command::Serve { port, host, config, static_dir } => serve(port, &host, config.as_deref(), static_dir),
        Command::Eval { gold, pred, model_name, json } => eval(&gold, &pred, &model_name, json),
        Command::GenRecords { input, output } => gen_records(&input, &output),
        Command::Split { input, val_fraction, seed, train_out, val_out } => {
            split_corpus(&input, val_fraction, seed, &train_out, &val_out)
        }
        Command::EmitConfig { base_model, output } => emit_config(&base_model, output.as_deref()),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors are validation errors (exit 1); 2 means backend failure
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
