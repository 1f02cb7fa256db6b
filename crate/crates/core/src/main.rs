use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use snp_core::data::{align_labels, load_embedding_set, load_sae_bundle, read_labels, read_matrix, save_embedding_set};
use snp_core::harness::{
    build_debiaser, generate_synthetic, rank_features, render_markdown, render_text, run_pipeline, write_synthetic,
    ExperimentConfig, MetricReport, Removal, RemovalInputs, Selection, SyntheticConfig,
};
use snp_core::logistic::{LogisticOptions, DEFAULT_L2};
use snp_core::project::save_projector;
use snp_core::sae::{preactivations, FeatureIndexSet};
use snp_core::select::{top_k, DEFAULT_K};
use snp_core::{Result, SnpError};

#[derive(Parser)]
#[command(name = "snp", version, about = "Select-and-project debiasing of embeddings with sparse autoencoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-bias synthetic dataset and SAE bundle.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank SAE features by attribute association and keep the top k.
    Select {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        sae: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_L2)]
        l2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove the selected features' direction from a set of embeddings.
    Debias {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        sae: PathBuf,
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long, value_enum)]
        removal: RemovalArg,
        #[arg(long, requires = "labels")]
        interpolate: bool,
        /// Labels of the reference set the interpolation weights are fit on.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Reference embeddings; defaults to `--embeddings`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_L2)]
        l2: f64,
        #[arg(long)]
        save_projector: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment described by a JSON config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one or more reports as a table.
    Report {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        markdown: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Stylist,
    Lp,
    Clip,
}

impl From<MethodArg> for Selection {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Stylist => Selection::Stylist,
            MethodArg::Lp => Selection::Lp,
            MethodArg::Clip => Selection::ClipScore,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RemovalArg {
    PerpEncoder,
    PerpDecoder,
    Masked,
}

impl From<RemovalArg> for Removal {
    fn from(r: RemovalArg) -> Self {
        match r {
            RemovalArg::PerpEncoder => Removal::PerpEncoder,
            RemovalArg::PerpDecoder => Removal::PerpDecoder,
            RemovalArg::Masked => Removal::MaskedReconstruction,
        }
    }
}

/// What `snp select` writes and `snp debias` reads.
#[derive(Serialize, Deserialize)]
struct RankingFile {
    method: Selection,
    k: usize,
    selected: Vec<usize>,
    order: Vec<usize>,
    scores: Vec<f64>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SnpError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| SnpError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SnpError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out } => {
            let cfg = match config {
                Some(p) => SyntheticConfig::load(p)?,
                None => SyntheticConfig::default(),
            };
            let data = generate_synthetic(&cfg)?;
            write_synthetic(&data, &cfg, &out)?;
            log::info!("wrote synthetic dataset to {}", out.display());
        }
        Command::Select {
            embeddings,
            labels,
            sae,
            method,
            k,
            prompts,
            l2,
            out,
        } => {
            let set = load_embedding_set(&embeddings)?;
            let aligned = align_labels(&set, &read_labels(&labels)?)?;
            let sae = load_sae_bundle(&sae)?.params;
            let prompts = prompts.map(read_matrix).transpose()?;
            let selection = Selection::from(method);
            if selection == Selection::ClipScore && prompts.is_none() {
                return Err(SnpError::InvalidArgument("--method clip requires --prompts".into()));
            }
            let z = preactivations(set.embeddings(), &sae)?;
            let opts = LogisticOptions::with_l2(l2);
            let ranking = rank_features(selection, &z, set.embeddings(), &aligned.attributes, prompts.as_ref(), &opts)?
                .expect("a method was given");
            let selected = top_k(&ranking, k)?;
            let file = RankingFile {
                method: selection,
                k,
                selected: selected.into_vec(),
                order: ranking.order().to_vec(),
                scores: ranking.scores().to_vec(),
            };
            write_text(&out, &serde_json::to_string_pretty(&file)?)?;
        }
        Command::Debias {
            embeddings,
            sae,
            ranking,
            removal,
            interpolate,
            labels,
            reference,
            l2,
            save_projector: projector_path,
            out,
        } => {
            let set = load_embedding_set(&embeddings)?;
            let sae = load_sae_bundle(&sae)?.params;
            let ranking: RankingFile = serde_json::from_str(&read_text(&ranking)?)?;
            let selected = FeatureIndexSet::new(ranking.selected, sae.features())?;
            let removal = Removal::from(removal);
            if interpolate && removal == Removal::MaskedReconstruction {
                return Err(SnpError::InvalidArgument(
                    "--interpolate does not apply to masked reconstruction".into(),
                ));
            }
            let reference = match reference {
                Some(p) => load_embedding_set(p)?,
                None => set.clone(),
            };
            let attributes = match &labels {
                Some(p) => align_labels(&reference, &read_labels(p)?)?.attributes,
                None => Vec::new(),
            };
            let inputs = RemovalInputs {
                sae: &sae,
                reference: reference.embeddings(),
                preacts: None,
                attributes: &attributes,
                selected: Some(&selected),
            };
            let debiaser = build_debiaser(removal, interpolate, &inputs, &LogisticOptions::with_l2(l2))?;
            if let Some(p) = projector_path {
                match &debiaser {
                    snp_core::harness::Debiaser::Project(proj) => save_projector(proj, p)?,
                    _ => log::warn!("masked reconstruction has no projector to save"),
                }
            }
            let debiased = set.with_embeddings(debiaser.apply(set.embeddings(), &sae)?)?;
            save_embedding_set(&debiased, &out)?;
        }
        Command::Eval { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_pipeline(&cfg)?;
            write_text(&out, &report.to_json()?)?;
        }
        Command::Report { input, markdown } => {
            let reports = input
                .iter()
                .map(|p| Ok(serde_json::from_str::<MetricReport>(&read_text(p)?)?))
                .collect::<Result<Vec<_>>>()?;
            let table = if markdown {
                render_markdown(&reports)
            } else {
                render_text(&reports)
            };
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
