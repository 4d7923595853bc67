use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use disent::eval::{covariate_shift_eval, downstream_accuracy, unfairness, ClassifierKind, ShiftConfig, UnfairnessCell};
use disent::exp::{
    emit_report, evaluate_record, run_sweep, run_training, select_model, ExperimentConfig,
    ModelVariant, RunRecord, SupervisionConfig,
};
use disent::factor::{import_factor_archive, save_dataset, toy_sprites, SpriteSize};
use disent::ident::{
    continuous_pair_sample, continuous_sharing_coverage, jacobian_structure, make_candidate_map,
    plane_rotation_map, residual_constraint_check, MapKind, SharingDistribution,
};
use disent::learn::GbtConfig;
use disent::metrics::{compute_representation, Provenance, VaeRepresenter};
use disent::pairs::SharingMode;
use disent::vae::load_checkpoint;

/// Output root: --out beats the DISENT_OUT env var beats ./runs.
fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("DISENT_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            let config: ExperimentConfig = toml::from_str(&text)
                .map_err(|e| disent::exp::ExpError::Config(format!("{}: {e}", p.display())))?;
            Ok(config)
        }
    }
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("bad list entry {s:?}: {e}"))
        })
        .collect()
}

fn parse_model(name: &str) -> Result<ModelVariant> {
    Ok(match name {
        "beta-vae" => ModelVariant::BetaVae,
        "gvae" => ModelVariant::Gvae,
        "ml-vae" => ModelVariant::MlVae,
        "ada-gvae" => ModelVariant::AdaGvae,
        "ada-ml-vae" => ModelVariant::AdaMlVae,
        other => bail!("unknown model {other:?} (beta-vae, gvae, ml-vae, ada-gvae, ada-ml-vae)"),
    })
}

fn parse_supervision(text: &str) -> Result<SupervisionConfig> {
    Ok(match text {
        "adaptive" => SupervisionConfig::Adaptive,
        "annotated" => SupervisionConfig::Annotated { complete: true },
        "annotated-incomplete" => SupervisionConfig::Annotated { complete: false },
        other => match other.strip_prefix("known-k:") {
            Some(k) => SupervisionConfig::KnownK {
                k: k.parse().context("known-k value")?,
            },
            None => bail!(
                "unknown supervision {other:?} (adaptive, known-k:K, annotated, annotated-incomplete)"
            ),
        },
    })
}

/// Shared flag-override block for train/sweep.
#[derive(Args, Clone)]
pub struct ConfigOverrides {
    /// TOML config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Fixed number of changed factors; mutually exclusive with --k-rnd.
    #[arg(long)]
    k: Option<usize>,
    /// Draw k uniformly per pair.
    #[arg(long)]
    k_rnd: bool,
    /// adaptive | known-k:K | annotated | annotated-incomplete
    #[arg(long)]
    supervision: Option<String>,
    /// Skip metric evaluation after training.
    #[arg(long)]
    no_metrics: bool,
    #[arg(long)]
    representation_points: Option<usize>,
    #[arg(long)]
    gbt_estimators: Option<usize>,
    #[arg(long)]
    score_train_points: Option<usize>,
    #[arg(long)]
    score_test_points: Option<usize>,
}

impl ConfigOverrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut config = load_config(self.config.as_deref())?;
        if let Some(m) = &self.model {
            config.model = parse_model(m)?;
        }
        if let Some(b) = self.beta {
            config.beta = b;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(s) = self.steps {
            config.steps = s;
        }
        if let Some(b) = self.batch_size {
            config.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            config.learning_rate = lr;
        }
        if let Some(d) = self.latent_dim {
            config.latent_dim = d;
        }
        if self.k.is_some() && self.k_rnd {
            bail!("--k and --k-rnd are mutually exclusive");
        }
        if let Some(k) = self.k {
            config.sharing = SharingMode::FixedK(k);
        } else if self.k_rnd {
            config.sharing = SharingMode::RandomK;
        }
        if let Some(s) = &self.supervision {
            config.supervision = Some(parse_supervision(s)?);
        }
        if self.no_metrics {
            config.eval.metrics = false;
        }
        if let Some(n) = self.representation_points {
            config.eval.representation_points = n;
        }
        if let Some(n) = self.gbt_estimators {
            config.eval.gbt_estimators = n;
        }
        if let Some(n) = self.score_train_points {
            config.eval.score_train_points = n;
        }
        if let Some(n) = self.score_test_points {
            config.eval.score_test_points = n;
        }
        Ok(config)
    }
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Container directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sprite resolution (32 or 64).
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    /// Import a named-array archive instead of rendering sprites.
    #[arg(long)]
    import: Option<PathBuf>,
}

pub fn gen_data(args: GenDataArgs) -> Result<ExitCode> {
    let out = out_root(args.out).join("dataset");
    let dataset = match &args.import {
        Some(archive) => {
            let (dataset, warnings) = import_factor_archive(archive)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            dataset
        }
        None => {
            let size = match args.resolution {
                32 => SpriteSize::S32,
                64 => SpriteSize::S64,
                other => {
                    return Err(disent::exp::ExpError::Config(format!(
                        "resolution must be 32 or 64, got {other}"
                    ))
                    .into())
                }
            };
            toy_sprites(size).materialize()
        }
    };
    save_dataset(&dataset, &out)?;
    println!(
        "wrote {} ({} images, {} factors)",
        out.display(),
        dataset.size(),
        dataset.space().num_factors()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let config = args.overrides.build()?;
    let out = out_root(args.out);
    let record = run_training(&config, Some(&out))?;
    print_record_line(&record);
    if record.diverged {
        eprintln!("training diverged; record flagged");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_record_line(record: &RunRecord) {
    let dci = record
        .metrics
        .as_ref()
        .map(|m| format!("{:.3}", m.dci_disentanglement))
        .unwrap_or_else(|| "-".into());
    println!(
        "{}\tloss={:.4}\tweak_recon={:.4}\tdci={}\tdiverged={}",
        record.run_id,
        record.trace.last().map_or(f64::NAN, |p| p.loss),
        record.final_weak_recon_loss,
        dci,
        record.diverged,
    );
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Comma-separated beta values.
    #[arg(long, default_value = "1,2,4,6,8,16")]
    betas: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    /// Comma-separated model names; defaults to the base config's model.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let base = args.overrides.build()?;
    let betas: Vec<f64> = parse_list(&args.betas)?;
    let seeds: Vec<u64> = parse_list(&args.seeds)?;
    let models: Vec<ModelVariant> = match &args.models {
        None => vec![base.model],
        Some(list) => list
            .split(',')
            .map(|m| parse_model(m.trim()))
            .collect::<Result<_>>()?,
    };
    let mut configs = Vec::new();
    for &model in &models {
        for &beta in &betas {
            for &seed in &seeds {
                let mut c = base.clone();
                c.model = model;
                c.beta = beta;
                c.seed = seed;
                // vanilla and adaptive variants resolve their own default
                // supervision; an explicit override only fits one family
                if c.effective_supervision().is_err() {
                    c.supervision = None;
                }
                configs.push(c);
            }
        }
    }
    let out = out_root(args.out);
    let records = run_sweep(&configs, Some(&out))?;
    let mut diverged = 0;
    for record in &records {
        print_record_line(record);
        if record.diverged {
            diverged += 1;
        }
    }
    println!("{} runs ({} diverged) -> {}", records.len(), diverged, out.display());
    if diverged > 0 {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct RecordArgs {
    /// Path to a .record.json file.
    #[arg(long)]
    record: PathBuf,
}

pub fn evaluate(args: RecordArgs) -> Result<ExitCode> {
    let mut record = RunRecord::load(&args.record)?;
    let scores = evaluate_record(&record)?;
    record.metrics = Some(scores);
    record.save(&args.record)?;
    print_record_line(&record);
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct DownstreamArgs {
    #[arg(long)]
    record: PathBuf,
    /// Training-set sizes.
    #[arg(long, default_value = "10,100,1000,10000")]
    sizes: String,
    #[arg(long, default_value_t = 5000)]
    test_size: usize,
    #[arg(long, default_value_t = 100)]
    gbt_estimators: usize,
}

pub fn downstream(args: DownstreamArgs) -> Result<ExitCode> {
    let mut record = RunRecord::load(&args.record)?;
    let sizes: Vec<usize> = parse_list(&args.sizes)?;
    let (model, params, _) = load_checkpoint(
        record
            .checkpoint_path
            .as_ref()
            .context("record has no checkpoint")?,
    )?;
    let dataset = record.config.dataset.load()?;
    let representer = VaeRepresenter {
        model: &model,
        params: &params,
        dataset: &dataset,
    };
    let n = sizes.iter().copied().max().unwrap_or(0) + args.test_size;
    let table = compute_representation(
        &representer,
        &dataset,
        n,
        record.seed.wrapping_add(0xd0e),
        Provenance {
            model_id: record.run_id.clone(),
            dataset_id: record.config.dataset.id(),
            seed: record.seed,
        },
    )?;
    let outcome = downstream_accuracy(
        &table,
        &sizes,
        &[ClassifierKind::LogisticCv, ClassifierKind::Gbt],
        args.test_size,
        GbtConfig {
            n_estimators: args.gbt_estimators,
            ..Default::default()
        },
        record.seed,
    )?;
    for cell in &outcome.downstream {
        println!(
            "factor={} size={} {:?} accuracy={:.4}",
            cell.factor, cell.train_size, cell.classifier, cell.accuracy
        );
    }
    merge_outcome(&mut record, outcome);
    record.save(&args.record)?;
    Ok(ExitCode::SUCCESS)
}

fn merge_outcome(record: &mut RunRecord, mut outcome: disent::eval::EvalOutcome) {
    match &mut record.downstream {
        None => record.downstream = Some(outcome),
        Some(existing) => {
            existing.downstream.append(&mut outcome.downstream);
            existing.shift.append(&mut outcome.shift);
            existing.unfairness.append(&mut outcome.unfairness);
        }
    }
}

#[derive(Args)]
pub struct ShiftArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[arg(long, default_value_t = 1000)]
    test_size: usize,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 100)]
    gbt_estimators: usize,
}

pub fn shift(args: ShiftArgs) -> Result<ExitCode> {
    let mut record = RunRecord::load(&args.record)?;
    let (model, params, _) = load_checkpoint(
        record
            .checkpoint_path
            .as_ref()
            .context("record has no checkpoint")?,
    )?;
    let dataset = record.config.dataset.load()?;
    let representer = VaeRepresenter {
        model: &model,
        params: &params,
        dataset: &dataset,
    };
    let outcome = covariate_shift_eval(
        &representer,
        &dataset,
        &ShiftConfig {
            train_size: args.train_size,
            test_size: args.test_size,
            repetitions: args.repetitions,
            gbt: GbtConfig {
                n_estimators: args.gbt_estimators,
                ..Default::default()
            },
            min_pool_ratio: 2.0,
        },
        record.seed.wrapping_add(0x51f7),
    )?;
    for cell in &outcome.shift {
        println!(
            "target={} rep={} strong={:.4} weak={:.4} prior={:.4}",
            cell.target, cell.repetition, cell.strong, cell.weak, cell.prior_baseline
        );
    }
    merge_outcome(&mut record, outcome);
    record.save(&args.record)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct FairnessArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long, default_value_t = 10000)]
    train_size: usize,
    #[arg(long, default_value_t = 5000)]
    test_size: usize,
    #[arg(long, default_value_t = 100)]
    gbt_estimators: usize,
}

pub fn fairness(args: FairnessArgs) -> Result<ExitCode> {
    let mut record = RunRecord::load(&args.record)?;
    let (model, params, _) = load_checkpoint(
        record
            .checkpoint_path
            .as_ref()
            .context("record has no checkpoint")?,
    )?;
    let dataset = record.config.dataset.load()?;
    let representer = VaeRepresenter {
        model: &model,
        params: &params,
        dataset: &dataset,
    };
    let table = compute_representation(
        &representer,
        &dataset,
        args.train_size + args.test_size,
        record.seed.wrapping_add(0xfa17),
        Provenance {
            model_id: record.run_id.clone(),
            dataset_id: record.config.dataset.id(),
            seed: record.seed,
        },
    )?;
    let d_f = dataset.space().num_factors();
    let mut outcome = disent::eval::EvalOutcome {
        task: "fairness".into(),
        ..Default::default()
    };
    for target in 0..d_f {
        for sensitive in 0..d_f {
            if target == sensitive {
                continue;
            }
            let value = unfairness(
                &table,
                target,
                sensitive,
                args.train_size,
                args.test_size,
                GbtConfig {
                    n_estimators: args.gbt_estimators,
                    ..Default::default()
                },
                record.seed,
            )?;
            println!("target={target} sensitive={sensitive} unfairness={value:.4}");
            outcome.unfairness.push(UnfairnessCell {
                target,
                sensitive,
                unfairness: value,
            });
        }
    }
    merge_outcome(&mut record, outcome);
    record.save(&args.record)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct IdentArgs {
    #[arg(long, default_value_t = 3)]
    dims: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 5000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn identifiability(args: IdentArgs) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let uniform = SharingDistribution::UniformSubsets;
    let mut report = serde_json::Map::new();
    report.insert("dims".into(), args.dims.into());
    report.insert("k".into(), args.k.into());

    let interior_points: Vec<Vec<f64>> = (0..args.points)
        .map(|_| {
            (0..args.dims)
                .map(|_| 0.1 + 0.8 * rand::Rng::random::<f64>(&mut rng))
                .collect()
        })
        .collect();

    for (name, kind) in [
        ("permutation_monotone", MapKind::PermutationMonotone),
        ("rotation", MapKind::Rotation),
        ("composite", MapKind::Composite),
    ] {
        let map = make_candidate_map(kind, args.dims, &mut rng)?;
        let pairs = continuous_pair_sample(args.dims, args.k, &uniform, args.pairs, &mut rng)?;
        let constraints = residual_constraint_check(&map, &pairs, args.k, 1e-7)?;
        let jacobian = jacobian_structure(&map, &interior_points, 1e-5, 1e-4)?;
        println!(
            "{name}: pass={:.4} violations={:.4} offdiag={:.2e} diagonal={}",
            constraints.pass_fraction_shared,
            constraints.violation_fraction_distinct,
            jacobian.offdiag_max,
            jacobian.is_diagonal_up_to_permutation
        );
        report.insert(
            name.into(),
            serde_json::json!({
                "constraints": constraints,
                "jacobian": jacobian,
            }),
        );
    }

    // coverage-violation witness: fixed S = {0}, a (1,2)-mixer passes
    if args.dims >= 3 {
        let fixed = SharingDistribution::FixedSet(BTreeSet::from([0]));
        let k = args.dims - 1;
        let pairs = continuous_pair_sample(args.dims, k, &fixed, args.pairs, &mut rng)?;
        let mixer = plane_rotation_map(args.dims, 1, 2, 0.7);
        let constraints = residual_constraint_check(&mixer, &pairs, k, 1e-7)?;
        let coverage = continuous_sharing_coverage(args.dims, k, &fixed, 10_000, &mut rng)?;
        println!(
            "single-s witness: pass={:.4} all_factors_observed={}",
            constraints.pass_fraction_shared, coverage.all_factors_observed
        );
        report.insert(
            "single_s_witness".into(),
            serde_json::json!({
                "constraints": constraints,
                "coverage": coverage,
            }),
        );
    }

    if let Some(out) = args.out {
        std::fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
        println!("wrote {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory containing *.record.json files.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(".record.json"))
        {
            records.push(RunRecord::load(&path)?);
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    if records.is_empty() {
        bail!("no .record.json files in {}", dir.display());
    }
    Ok(records)
}

pub fn report(args: ReportArgs) -> Result<ExitCode> {
    let records = load_records(&args.records)?;
    let out = out_root(args.out).join("report");
    let files = emit_report(&records, &out)?;
    println!("summary:  {}", files.summary_json.display());
    println!("records:  {}", files.records_csv.display());
    println!("rankcorr: {}", files.rank_correlations_csv.display());
    for p in files.cell_tables {
        println!("cells:    {}", p.display());
    }
    for p in files.plots {
        println!("plot:     {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args)]
pub struct SelectArgs {
    /// Directory containing *.record.json files.
    #[arg(long)]
    records: PathBuf,
}

pub fn select(args: SelectArgs) -> Result<ExitCode> {
    let records = load_records(&args.records)?;
    let (winner, labels_read) = disent::audit::scope(|| {
        select_model(&records).map(|r| (r.run_id.clone(), r.final_weak_recon_loss))
    });
    let (run_id, loss) = winner?;
    debug_assert_eq!(labels_read, 0);
    println!("selected {run_id} (weak reconstruction loss {loss:.4})");
    Ok(ExitCode::SUCCESS)
}
