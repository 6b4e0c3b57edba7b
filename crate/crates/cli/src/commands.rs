use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use neuron_coreset::baselines::BaselineScheme;
use neuron_coreset::eval::{
    augment_queries, network_l1_error, run_sweep, QuerySource, SweepConfig, SweepSource,
};
use neuron_coreset::lowerbound::{sphere_instance, verify_no_multiplicative_coreset};
use neuron_coreset::network::{
    accuracy, fine_tune, load_mnist, load_model, model_to_json, train_sgd, FineTuneConfig,
    MnistSplit, SgdConfig,
};
use neuron_coreset::pruning::{layer_weighted_set, Direction, LayerBudget};
use neuron_coreset::seed::{derive_path, derive_seed, rng};
use neuron_coreset::{prune_network, Activation, Dataset, DenseNetwork, PruneConfig, Scheme};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Failure, Globals};

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Directory holding the MNIST IDX files
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Layer widths from input to output [default: 784,300,100,10]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Hidden activation, e.g. relu or softclip:2 [default: relu]
    #[arg(long)]
    pub activation: Option<String>,
    /// [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 32]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Training images held out for validation [default: 5000, at most a tenth]
    #[arg(long)]
    pub val: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressArgs {
    /// Trained model to prune
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// MNIST directory, for accuracy and fine-tuning
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Samples to draw per prunable layer
    #[arg(long, value_delimiter = ',', conflicts_with = "epsilon")]
    pub samples: Option<Vec<usize>>,
    /// Target additive error; derives the samples per layer
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Failure probability for --epsilon [default: 0.1]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Constant of the sample-size bound [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// coreset, uniform, percentile, l1, l2 or l1l2 [default: coreset]
    #[arg(long)]
    pub scheme: Option<String>,
    /// bottom_up or top_down [default: bottom_up]
    #[arg(long)]
    pub direction: Option<String>,
    /// Query radius per prunable layer [default: derived from the network]
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Fine-tune the pruned model (needs --data)
    #[arg(long)]
    pub fine_tune: bool,
    /// Compare coreset and uniform selection over this many seeds, before
    /// and after fine-tuning, and write `ablation.csv`
    #[arg(long, value_name = "RUNS")]
    pub ablation: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// gaussian_weights, uniform_weights or model_layer [default: gaussian_weights]
    #[arg(long)]
    pub source: Option<String>,
    /// Points per random set [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Point dimension of random sets [default: 784]
    #[arg(long)]
    pub d: Option<usize>,
    /// Model for --source model_layer
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Layer whose neurons are swept [default: 0]
    #[arg(long)]
    pub layer: Option<usize>,
    /// Comma-separated schemes [default: coreset,uniform,percentile]
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Sizes as a list `10,20,40` or a range `start:end:step` [default: 50:1000:50]
    #[arg(long)]
    pub sizes: Option<String>,
    /// [default: 10]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Number of queries [default: 1000]
    #[arg(long)]
    pub queries: Option<usize>,
    /// MNIST directory; test images become the queries
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Activation for random sets [default: relu]
    #[arg(long)]
    pub activation: Option<String>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    #[arg(long)]
    pub original: Option<PathBuf>,
    #[arg(long)]
    pub pruned: Option<PathBuf>,
    /// MNIST directory; the test split is used
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use only the first N test images
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerboundArgs {
    /// Number of points
    pub n: Option<usize>,
    /// Dimension
    pub d: Option<usize>,
    /// Sphere radius
    pub alpha: Option<f64>,
    /// Query radius
    pub beta: Option<f64>,
    /// Overrides --seed
    pub seed: Option<u64>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

fn parse<T: std::str::FromStr>(text: &str, what: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    text.parse()
        .map_err(|e| Failure::Usage(format!("schema error: invalid {what} `{text}`: {e}")))
}

fn out_dir(g: &Globals) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let data_err = |e: std::io::Error| {
        Failure::Data(format!("cannot write {}: {e}", dir.join(name).display()))
    };
    fs::create_dir_all(dir).map_err(data_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(data_err)?;
    tmp.write_all(contents.as_bytes()).map_err(data_err)?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| data_err(e.error))?;
    Ok(path)
}

fn load_split(dir: &Path, split: MnistSplit) -> Result<Dataset, Failure> {
    let prefix = match split {
        MnistSplit::Train => "train",
        MnistSplit::Test => "t10k",
    };
    for kind in ["images-idx3", "labels-idx1"] {
        let file = dir.join(format!("{prefix}-{kind}-ubyte"));
        if !file.is_file() {
            return Err(Failure::Usage(format!(
                "dataset not found: {}",
                file.display()
            )));
        }
    }
    Ok(load_mnist(dir, split)?)
}

fn load_net(path: &Path) -> Result<DenseNetwork, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "model not found: {}",
            path.display()
        )));
    }
    Ok(load_model(path)?)
}

fn split_validation(
    full: &Dataset,
    requested: Option<usize>,
) -> Result<(Dataset, Dataset), Failure> {
    let val = requested.unwrap_or(5000).min(full.len() / 10).max(1);
    if val >= full.len() {
        return Err(Failure::Usage(format!(
            "validation split of {val} leaves no training data out of {}",
            full.len()
        )));
    }
    Ok(full.split_tail(val))
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

pub fn train(g: &Globals, a: TrainArgs) -> Result<(), Failure> {
    let data = required(a.data, "data")?;
    let full = load_split(&data, MnistSplit::Train)?;
    let test = load_split(&data, MnistSplit::Test)?;
    let sizes = a.sizes.unwrap_or_else(|| vec![784, 300, 100, 10]);
    let hidden: Activation = parse(a.activation.as_deref().unwrap_or("relu"), "activation")?;
    let (train, val) = split_validation(&full, a.val)?;
    let init = DenseNetwork::random(&sizes, hidden, derive_seed(g.seed, 0))?;
    let defaults = SgdConfig::default();
    let cfg = SgdConfig {
        lr: a.lr.unwrap_or(defaults.lr),
        batch: a.batch.unwrap_or(defaults.batch),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        seed: derive_seed(g.seed, 1),
    };
    let net = train_sgd(&init, &train, &cfg)?;
    let path = write_atomic(&out_dir(g), "model.json", &model_to_json(&net))?;
    println!(
        "widths: {:?} ({} parameters)",
        net.widths(),
        net.param_count()
    );
    println!("validation accuracy: {}", pct(accuracy(&net, &val)?));
    println!("test accuracy: {}", pct(accuracy(&net, &test)?));
    println!("wrote {}", path.display());
    Ok(())
}

fn prune_config(a: &CompressArgs, net: &DenseNetwork, seed: u64) -> Result<PruneConfig, Failure> {
    let prunable = net.layers().len() - 1;
    let scheme: Scheme = parse(a.scheme.as_deref().unwrap_or("coreset"), "scheme")?;
    let budgets = match (&a.samples, a.epsilon) {
        (Some(m), None) => m.iter().map(|&m| LayerBudget::Samples(m)).collect(),
        (None, Some(epsilon)) => vec![
            LayerBudget::Epsilon {
                epsilon,
                delta: a.delta.unwrap_or(0.1)
            };
            prunable
        ],
        (None, None) => {
            return Err(Failure::Usage(
                "one of --samples or --epsilon is required".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(Failure::Usage("--samples conflicts with --epsilon".into()))
        }
    };
    Ok(PruneConfig {
        budgets,
        betas: a.betas.clone(),
        scheme,
        direction: parse::<Direction>(a.direction.as_deref().unwrap_or("bottom_up"), "direction")?,
        seed,
        c: a.c.unwrap_or(1.0),
    })
}

pub fn compress(g: &Globals, a: CompressArgs) -> Result<(), Failure> {
    let net = load_net(&required(a.model.clone(), "model")?)?;
    let data = match &a.data {
        Some(dir) => {
            let full = load_split(dir, MnistSplit::Train)?;
            let (train, val) = split_validation(&full, None)?;
            Some((train, val, load_split(dir, MnistSplit::Test)?))
        }
        None => None,
    };
    if (a.fine_tune || a.ablation.is_some()) && data.is_none() {
        return Err(Failure::Usage("fine-tuning needs --data".into()));
    }
    if let Some(runs) = a.ablation {
        let (train, val, test) = data.as_ref().expect("checked above");
        return ablation(g, &a, &net, runs, train, val, test);
    }

    let cfg = prune_config(&a, &net, g.seed)?;
    let (mut pruned, report) = prune_network(&net, &cfg)?;
    println!(
        "{}: widths {:?} -> {:?}, {} -> {} parameters, compression ratio {}",
        report.scheme,
        net.widths(),
        pruned.widths(),
        report.params_before,
        report.params_after,
        pct(report.compression_ratio)
    );
    if let Some((train, val, test)) = &data {
        println!(
            "test accuracy before pruning: {}",
            pct(accuracy(&net, test)?)
        );
        println!(
            "test accuracy after pruning: {}",
            pct(accuracy(&pruned, test)?)
        );
        if a.fine_tune {
            let ft = FineTuneConfig {
                seed: derive_seed(g.seed, u64::MAX),
                ..FineTuneConfig::default()
            };
            let (tuned, r) = fine_tune(&pruned, train, val, &ft)?;
            pruned = tuned;
            println!(
                "test accuracy after {} fine-tuning epochs: {}",
                r.epochs,
                pct(accuracy(&pruned, test)?)
            );
        }
    }
    let dir = out_dir(g);
    let model = write_atomic(&dir, "pruned.json", &model_to_json(&pruned))?;
    let csv = write_atomic(&dir, "prune_report.csv", &report.to_csv()?)?;
    println!("wrote {} and {}", model.display(), csv.display());
    Ok(())
}

fn ablation(
    g: &Globals,
    a: &CompressArgs,
    net: &DenseNetwork,
    runs: usize,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
) -> Result<(), Failure> {
    if runs == 0 {
        return Err(Failure::Usage("--ablation needs at least one run".into()));
    }
    let mut csv = String::from(
        "scheme,run,seed,params_after,compression_ratio,accuracy_before,accuracy_after\n",
    );
    for scheme in [Scheme::Coreset, Scheme::Baseline(BaselineScheme::Uniform)] {
        let (mut before, mut after) = (0.0, 0.0);
        for run in 0..runs {
            let seed = derive_path(g.seed, &[run as u64]);
            let mut cfg = prune_config(a, net, seed)?;
            cfg.scheme = scheme;
            let (pruned, report) = prune_network(net, &cfg)?;
            let ft = FineTuneConfig {
                seed: derive_seed(seed, u64::MAX),
                ..FineTuneConfig::default()
            };
            let (tuned, _) = fine_tune(&pruned, train, val, &ft)?;
            let (b, t) = (accuracy(&pruned, test)?, accuracy(&tuned, test)?);
            before += b / runs as f64;
            after += t / runs as f64;
            writeln!(
                csv,
                "{scheme},{run},{seed},{},{},{b},{t}",
                report.params_after, report.compression_ratio
            )
            .expect("writing to a string");
        }
        println!(
            "{scheme}: mean test accuracy {} before fine-tuning, {} after ({runs} runs)",
            pct(before),
            pct(after)
        );
    }
    let path = write_atomic(&out_dir(g), "ablation.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("schema error: invalid sizes `{text}`"));
    if let [start, end, step] = text.split(':').collect::<Vec<_>>()[..] {
        let (start, end, step): (usize, usize, usize) = (
            parse(start, "size")?,
            parse(end, "size")?,
            parse(step, "size")?,
        );
        if step == 0 || start == 0 || start > end {
            return Err(bad());
        }
        return Ok((start..=end).step_by(step).collect());
    }
    text.split(',').map(|s| parse(s.trim(), "size")).collect()
}

/// Inputs to layer `layer` for each image, with a trailing `1` for the bias.
fn layer_queries(
    net: &DenseNetwork,
    layer: usize,
    images: Vec<Vec<f64>>,
) -> Result<Vec<Vec<f64>>, Failure> {
    let hidden = images
        .iter()
        .map(|x| {
            let acts = net.forward(x)?;
            Ok(if layer == 0 {
                x.clone()
            } else {
                acts[layer - 1].to_vec()
            })
        })
        .collect::<Result<Vec<_>, neuron_coreset::Error>>()?;
    Ok(augment_queries(&hidden))
}

pub fn sweep(g: &Globals, a: SweepArgs) -> Result<(), Failure> {
    let scheme_names = a
        .schemes
        .clone()
        .unwrap_or_else(|| vec!["coreset".into(), "uniform".into(), "percentile".into()]);
    let schemes = scheme_names
        .iter()
        .map(|s| parse::<Scheme>(s, "scheme"))
        .collect::<Result<Vec<_>, _>>()?;
    let sizes = parse_sizes(a.sizes.as_deref().unwrap_or("50:1000:50"))?;
    let count = a.queries.unwrap_or(1000);
    let mut activation: Activation =
        parse(a.activation.as_deref().unwrap_or("relu"), "activation")?;
    let images = match &a.data {
        Some(dir) => Some(load_split(dir, MnistSplit::Test)?.rows(count)),
        None => None,
    };

    let source_name = a.source.as_deref().unwrap_or("gaussian_weights");
    let (source, queries) = match source_name {
        "gaussian_weights" | "uniform_weights" => {
            let (n, d) = (a.n.unwrap_or(1000), a.d.unwrap_or(784));
            let source = if source_name == "gaussian_weights" {
                SweepSource::Gaussian { n, d }
            } else {
                SweepSource::Uniform { n, d }
            };
            let queries = match images {
                Some(q) => QuerySource::Provided {
                    name: "mnist".into(),
                    queries: q,
                },
                None => QuerySource::UnitBall { count },
            };
            (source, queries)
        }
        "model_layer" => {
            let net = load_net(&required(a.model.clone(), "model")?)?;
            let layer = a.layer.unwrap_or(0);
            let set = layer_weighted_set(&net, layer)?;
            activation = net.layers()[layer]
                .activation()
                .ok_or_else(|| Failure::Usage(format!("layer {layer} has no activation")))?;
            let queries = match images {
                Some(q) => QuerySource::Provided {
                    name: "mnist".into(),
                    queries: layer_queries(&net, layer, q)?,
                },
                None => QuerySource::UnitBall { count },
            };
            (
                SweepSource::Fixed {
                    name: "model_layer".into(),
                    set,
                },
                queries,
            )
        }
        other => {
            return Err(Failure::Usage(format!(
                "schema error: unknown source `{other}`"
            )))
        }
    };
    let cfg = SweepConfig {
        source,
        queries,
        schemes,
        sizes,
        runs: a.runs.unwrap_or(10),
        activation,
        seed: g.seed,
    };
    let result = run_sweep(&cfg)?;
    for r in &result.records {
        println!(
            "{:<10} m={:<5} error {:.6e} ± {:.2e}",
            r.scheme, r.m, r.mean_error, r.std_error
        );
    }
    let path = write_atomic(&out_dir(g), "sweep.csv", &result.to_csv()?)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    queries: usize,
    l1_error: f64,
    original_accuracy: f64,
    pruned_accuracy: f64,
    original_params: usize,
    pruned_params: usize,
}

pub fn eval(g: &Globals, a: EvalArgs) -> Result<(), Failure> {
    let original = load_net(&required(a.original, "original")?)?;
    let pruned = load_net(&required(a.pruned, "pruned")?)?;
    let mut test = load_split(&required(a.data, "data")?, MnistSplit::Test)?;
    if let Some(limit) = a.limit {
        test = test.slice(0..limit.min(test.len()));
    }
    let queries = test.rows(test.len());
    let report = EvalReport {
        queries: queries.len(),
        l1_error: network_l1_error(&original, &pruned, &queries)?,
        original_accuracy: accuracy(&original, &test)?,
        pruned_accuracy: accuracy(&pruned, &test)?,
        original_params: original.param_count(),
        pruned_params: pruned.param_count(),
    };
    println!("L1 error: {}", report.l1_error);
    println!("original accuracy: {}", pct(report.original_accuracy));
    println!("pruned accuracy: {}", pct(report.pruned_accuracy));
    if let Some(dir) = &g.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        println!("wrote {}", write_atomic(dir, "eval.json", &text)?.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct LowerboundReport {
    n: usize,
    d: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    excluded: usize,
    relative_error: f64,
    worst_relative_error: f64,
}

pub fn lowerbound(g: &Globals, a: LowerboundArgs) -> Result<(), Failure> {
    let n = required(a.n, "n")?;
    let d = required(a.d, "d")?;
    let alpha = required(a.alpha, "alpha")?;
    let beta = required(a.beta, "beta")?;
    let seed = a.seed.unwrap_or(g.seed);
    let inst = sphere_instance(n, d, alpha, seed)?;
    let excluded = rng(derive_seed(seed, 1)).random_range(0..n);
    let subset: Vec<usize> = (0..n).filter(|&i| i != excluded).collect();
    let cert = verify_no_multiplicative_coreset(
        &inst,
        Activation::Relu,
        &subset,
        &vec![1.0; n - 1],
        beta,
    )?;
    println!("instance: n={n} d={d} alpha={alpha} beta={beta} seed={seed}");
    println!("excluded point: {}", cert.excluded);
    println!(
        "relative error {:?} at its separating query",
        cert.excluded_error
    );
    println!(
        "worst relative error over all separating queries: {:?}",
        cert.worst_error
    );
    println!("the subset violates the multiplicative guarantee for every epsilon < 1");
    if let Some(dir) = &g.out {
        let report = LowerboundReport {
            n,
            d,
            alpha,
            beta,
            seed,
            excluded: cert.excluded,
            relative_error: cert.excluded_error,
            worst_relative_error: cert.worst_error,
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        println!(
            "wrote {}",
            write_atomic(dir, "lowerbound.json", &text)?.display()
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_lists_and_ranges() {
        assert_eq!(parse_sizes("50:200:50").unwrap(), vec![50, 100, 150, 200]);
        assert_eq!(parse_sizes("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert!(parse_sizes("5:1:1").is_err());
        assert!(parse_sizes("a,b").is_err());
    }
}
