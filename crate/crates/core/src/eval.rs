//! Approximation-error metrics and error-vs-size sweeps.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::network::{rows_to_array, DenseNetwork};
use crate::pruning::Scheme;
use crate::sampler::Coreset;
use crate::seed::{self, derive_path};
use crate::weighted::{norm, QueryBall, WeightedPoint, WeightedSet};

/// Mean over queries and consumers of
/// `|Σ_P wᵢ(p)φ(pᵀx) − Σ_C uᵢ(q)φ(qᵀx)|`.
pub fn neuron_additive_error(
    set: &WeightedSet,
    coreset: &Coreset,
    act: Activation,
    queries: &[Vec<f64>],
) -> Result<f64> {
    ResponseTable::new(set, act, queries)?.additive_error(coreset)
}

/// Mean L1 distance between the two networks' outputs over the queries.
pub fn network_l1_error(
    original: &DenseNetwork,
    pruned: &DenseNetwork,
    queries: &[Vec<f64>],
) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::invalid("no queries"));
    }
    if original.input_dim() != pruned.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "network inputs",
            expected: original.input_dim(),
            got: pruned.input_dim(),
        });
    }
    if original.output_dim() != pruned.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "network outputs",
            expected: original.output_dim(),
            got: pruned.output_dim(),
        });
    }
    let x = rows_to_array(queries, original.input_dim())?;
    let a = original.predict_batch(x.view())?;
    let b = pruned.predict_batch(x.view())?;
    Ok((a - b).mapv(f64::abs).sum() / queries.len() as f64)
}

/// `φ(pᵀx)` for every point and query, plus the exact per-consumer sums,
/// so many coresets of one set can be scored cheaply.
#[derive(Debug, Clone)]
pub struct ResponseTable {
    /// `activations[[j, q]] = φ(pⱼᵀx_q)`
    activations: Array2<f64>,
    /// `exact[[i, q]] = Σⱼ wᵢ(pⱼ) φ(pⱼᵀx_q)`
    exact: Array2<f64>,
    consumers: usize,
    points: usize,
}

impl ResponseTable {
    pub fn new(set: &WeightedSet, act: Activation, queries: &[Vec<f64>]) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::invalid("no queries"));
        }
        if set.is_empty() {
            return Err(Error::invalid("empty weighted set"));
        }
        let d = set.dim();
        let q = rows_to_array(queries, d)?;
        let p = Array2::from_shape_fn((set.len(), d), |(j, c)| set.points()[j].coords()[c]);
        let activations = p.dot(&q.t()).mapv(|z| act.eval(z));
        let k = set.consumers();
        let w = Array2::from_shape_fn((k, set.len()), |(i, j)| set.points()[j].weights()[i]);
        let exact = w.dot(&activations);
        Ok(ResponseTable {
            activations,
            exact,
            consumers: k,
            points: set.len(),
        })
    }

    pub fn queries(&self) -> usize {
        self.activations.ncols()
    }

    pub fn additive_error(&self, coreset: &Coreset) -> Result<f64> {
        let mut approx = Array2::<f64>::zeros(self.exact.raw_dim());
        for (&j, entry) in &coreset.entries {
            if j >= self.points {
                return Err(Error::invalid(format!("coreset index {j} out of range")));
            }
            if entry.weights.len() != self.consumers {
                return Err(Error::DimensionMismatch {
                    context: "coreset weight count",
                    expected: self.consumers,
                    got: entry.weights.len(),
                });
            }
            let row = self.activations.row(j);
            for (i, &u) in entry.weights.iter().enumerate() {
                approx.row_mut(i).scaled_add(u, &row);
            }
        }
        let total: f64 = (&self.exact - &approx).mapv(f64::abs).sum();
        Ok(total / (self.consumers * self.queries()) as f64)
    }

    /// Largest per-query error over queries and consumers.
    pub fn max_error(&self, coreset: &Coreset) -> f64 {
        let mut approx = Array2::<f64>::zeros(self.exact.raw_dim());
        for (&j, entry) in &coreset.entries {
            let row = self.activations.row(j);
            for (i, &u) in entry.weights.iter().enumerate() {
                approx.row_mut(i).scaled_add(u, &row);
            }
        }
        (&self.exact - &approx)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Where the sweep's weighted points come from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// `n` unit-norm points in `ℝᵈ` with standard normal weights.
    Gaussian { n: usize, d: usize },
    /// `n` unit-norm points in `ℝᵈ` with weights uniform on `[0, 1)`.
    Uniform { n: usize, d: usize },
    /// A fixed set, e.g. the neurons of a trained layer.
    Fixed { name: String, set: WeightedSet },
}

impl SweepSource {
    pub fn name(&self) -> &str {
        match self {
            SweepSource::Gaussian { .. } => "gaussian_weights",
            SweepSource::Uniform { .. } => "uniform_weights",
            SweepSource::Fixed { name, .. } => name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SweepSource::Gaussian { d, .. } | SweepSource::Uniform { d, .. } => *d,
            SweepSource::Fixed { set, .. } => set.dim(),
        }
    }

    /// The weighted set used in repetition `run`.
    pub fn instance(&self, seed: u64) -> Result<WeightedSet> {
        let (n, d, gaussian) = match self {
            SweepSource::Gaussian { n, d } => (*n, *d, true),
            SweepSource::Uniform { n, d } => (*n, *d, false),
            SweepSource::Fixed { set, .. } => return Ok(set.clone()),
        };
        if n == 0 || d == 0 {
            return Err(Error::invalid("sweep source needs n, d >= 1"));
        }
        let mut rng = seed::rng(seed);
        let points = (0..n)
            .map(|_| {
                let mut p: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let len = norm(&p).max(f64::MIN_POSITIVE);
                p.iter_mut().for_each(|v| *v /= len);
                let w = if gaussian {
                    rng.sample(StandardNormal)
                } else {
                    rng.random::<f64>()
                };
                WeightedPoint::new(p, vec![w])
            })
            .collect::<Result<Vec<_>>>()?;
        WeightedSet::new(points)
    }
}

#[derive(Debug, Clone)]
pub enum QuerySource {
    /// Uniform draws from the unit ball.
    UnitBall { count: usize },
    /// Caller-supplied queries, e.g. test images.
    Provided {
        name: String,
        queries: Vec<Vec<f64>>,
    },
}

impl QuerySource {
    pub fn name(&self) -> &str {
        match self {
            QuerySource::UnitBall { .. } => "unit_ball",
            QuerySource::Provided { name, .. } => name,
        }
    }

    fn materialize(&self, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        match self {
            QuerySource::UnitBall { count } => {
                let ball = QueryBall::new(1.0, dim)?;
                let mut rng = seed::rng(seed);
                Ok((0..*count).map(|_| ball.sample(&mut rng)).collect())
            }
            QuerySource::Provided { queries, .. } => Ok(queries.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub source: SweepSource,
    pub queries: QuerySource,
    pub schemes: Vec<Scheme>,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub activation: Activation,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub scheme: String,
    pub m: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub source: String,
    pub queries: String,
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn records_for<'a>(
        &'a self,
        scheme: &'a str,
    ) -> impl Iterator<Item = &'a SweepRecord> + 'a {
        self.records.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "scheme",
            "m",
            "runs",
            "mean_error",
            "std_error",
            "source",
            "queries",
        ])?;
        for r in &self.records {
            w.write_record([
                r.scheme.clone(),
                r.m.to_string(),
                r.runs.to_string(),
                r.mean_error.to_string(),
                r.std_error.to_string(),
                self.source.clone(),
                self.queries.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Appends a constant `1` coordinate, matching bias-augmented neurons.
pub fn augment_queries(queries: &[Vec<f64>]) -> Vec<Vec<f64>> {
    queries
        .iter()
        .map(|q| q.iter().copied().chain(std::iter::once(1.0)).collect())
        .collect()
}

const STREAM_QUERIES: u64 = 1;
const STREAM_INSTANCE: u64 = 2;
const STREAM_SELECT: u64 = 3;

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    if cfg.sizes.is_empty() || cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("sizes must be non-empty and ascending"));
    }
    if cfg.schemes.is_empty() {
        return Err(Error::invalid("no schemes to sweep"));
    }
    let dim = cfg.source.dim();
    let queries = cfg
        .queries
        .materialize(dim, derive_path(cfg.seed, &[STREAM_QUERIES]))?;
    // Radius of the smallest origin-centered ball holding every query.
    let beta = queries.iter().map(|q| norm(q)).fold(0.0, f64::max);
    let beta = if beta > 0.0 { beta } else { 1.0 };

    // errors[scheme][size][run]
    let mut errors = vec![vec![Vec::with_capacity(cfg.runs); cfg.sizes.len()]; cfg.schemes.len()];
    for run in 0..cfg.runs {
        let set = cfg
            .source
            .instance(derive_path(cfg.seed, &[STREAM_INSTANCE, run as u64]))?;
        let table = ResponseTable::new(&set, cfg.activation, &queries)?;
        for (si, scheme) in cfg.schemes.iter().enumerate() {
            for (mi, &m) in cfg.sizes.iter().enumerate() {
                let seed =
                    derive_path(cfg.seed, &[STREAM_SELECT, run as u64, si as u64, mi as u64]);
                let coreset = scheme.select(&set, m, cfg.activation, beta, seed)?;
                errors[si][mi].push(table.additive_error(&coreset)?);
            }
        }
    }

    let mut records = Vec::with_capacity(cfg.schemes.len() * cfg.sizes.len());
    for (si, scheme) in cfg.schemes.iter().enumerate() {
        for (mi, &m) in cfg.sizes.iter().enumerate() {
            let (mean, std) = mean_std(&errors[si][mi]);
            records.push(SweepRecord {
                scheme: scheme.name().to_string(),
                m,
                mean_error: mean,
                std_error: std,
                runs: cfg.runs,
            });
        }
    }
    Ok(SweepResult {
        source: cfg.source.name().to_string(),
        queries: cfg.queries.name().to_string(),
        records,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Per-query output vectors of a network, stacked by row.
pub fn outputs(net: &DenseNetwork, queries: &[Vec<f64>]) -> Result<Array2<f64>> {
    let x = rows_to_array(queries, net.input_dim())?;
    net.predict_batch(x.view())
}

/// Mean of each column, i.e. the average output over queries.
pub fn column_means(a: &Array2<f64>) -> Vec<f64> {
    a.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{percentile_coreset, BaselineScheme};
    use crate::network::DenseLayer;
    use crate::sampler::coreset_single;
    use ndarray::{array, Array1};

    fn small_set() -> WeightedSet {
        WeightedSet::single(
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
                vec![-1.0, 0.5],
            ],
            vec![0.5, -1.0, 2.0, 1.5],
        )
        .unwrap()
    }

    #[test]
    fn keep_all_has_zero_error() {
        let set = small_set();
        let c = percentile_coreset(&set, 4).unwrap();
        let q = vec![vec![0.3, 0.4], vec![-0.5, 0.1]];
        assert_eq!(
            neuron_additive_error(&set, &c, Activation::Relu, &q).unwrap(),
            0.0
        );
    }

    #[test]
    fn matches_brute_force_and_ignores_query_order() {
        let set = small_set();
        let c = coreset_single(&set, 2, Activation::Relu, 1.0, 13).unwrap();
        let queries = vec![vec![0.3, 0.4], vec![-0.5, 0.1], vec![0.6, -0.7]];
        let mut brute = 0.0;
        for x in &queries {
            let full: f64 = set
                .points()
                .iter()
                .map(|p| p.weights()[0] * p.dot(x).max(0.0))
                .sum();
            let approx: f64 = c
                .entries
                .iter()
                .map(|(&j, e)| e.weights[0] * set.points()[j].dot(x).max(0.0))
                .sum();
            brute += (full - approx).abs();
        }
        brute /= 3.0;
        let got = neuron_additive_error(&set, &c, Activation::Relu, &queries).unwrap();
        assert!((got - brute).abs() < 1e-12);

        let mut rev = queries.clone();
        rev.reverse();
        let again = neuron_additive_error(&set, &c, Activation::Relu, &rev).unwrap();
        assert!((again - got).abs() < 1e-12);

        assert!(neuron_additive_error(&set, &c, Activation::Relu, &[vec![1.0]]).is_err());
    }

    #[test]
    fn l1_error_cases() {
        let l = DenseLayer::new(array![[1.0, -1.0], [0.5, 2.0]], array![0.0, 1.0], None).unwrap();
        let net = DenseNetwork::new(vec![l.clone()]).unwrap();
        let q = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        assert_eq!(network_l1_error(&net, &net, &q).unwrap(), 0.0);

        let shifted =
            DenseLayer::new(l.weights().clone(), l.bias() + &array![0.25, -1.5], None).unwrap();
        let other = DenseNetwork::new(vec![shifted]).unwrap();
        assert!((network_l1_error(&net, &other, &q).unwrap() - 1.75).abs() < 1e-12);

        // Two-layer pair by hand: relu(x) then sum vs relu(x) then first coordinate.
        let relu =
            DenseLayer::new(Array2::eye(2), Array1::zeros(2), Some(Activation::Relu)).unwrap();
        let a = DenseNetwork::new(vec![
            relu.clone(),
            DenseLayer::new(array![[1.0, 1.0]], array![0.0], None).unwrap(),
        ])
        .unwrap();
        let b = DenseNetwork::new(vec![
            relu,
            DenseLayer::new(array![[1.0, 0.0]], array![0.0], None).unwrap(),
        ])
        .unwrap();
        // Queries (1,2) and (-3,0.5): outputs 3 vs 1 and 0.5 vs 0 → (2 + 0.5)/2.
        assert!((network_l1_error(&a, &b, &q).unwrap() - 1.25).abs() < 1e-12);

        let wide = DenseNetwork::new(vec![DenseLayer::new(
            Array2::zeros((3, 2)),
            Array1::zeros(3),
            None,
        )
        .unwrap()])
        .unwrap();
        assert!(matches!(
            network_l1_error(&net, &wide, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn tiny_sweep(schemes: Vec<Scheme>, sizes: Vec<usize>) -> SweepConfig {
        SweepConfig {
            source: SweepSource::Gaussian { n: 40, d: 8 },
            queries: QuerySource::UnitBall { count: 30 },
            schemes,
            sizes,
            runs: 3,
            activation: Activation::Relu,
            seed: 21,
        }
    }

    #[test]
    fn percentile_at_full_size_is_exact() {
        let cfg = tiny_sweep(vec![Scheme::Baseline(BaselineScheme::Percentile)], vec![40]);
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.records.len(), 1);
        assert!(res.records[0].mean_error < 1e-12);
    }

    #[test]
    fn sweep_is_reproducible_and_well_formed() {
        let cfg = tiny_sweep(
            vec![Scheme::Coreset, Scheme::Baseline(BaselineScheme::Uniform)],
            vec![5, 10, 20],
        );
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let csv = a.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("scheme,m,runs,mean_error,std_error,source,queries")
        );
        assert_eq!(lines.count(), 6);
        assert!(!csv.contains('\r'));
        assert!(a.records.iter().all(|r| r.std_error >= 0.0 && r.runs == 3));

        let mut bad = cfg.clone();
        bad.sizes = vec![10, 5];
        assert!(run_sweep(&bad).is_err());
    }

    #[test]
    fn instances_are_unit_norm() {
        let set = SweepSource::Uniform { n: 10, d: 5 }.instance(1).unwrap();
        for p in set.points() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
            assert!((0.0..1.0).contains(&p.weights()[0]));
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.5).abs() < 1e-12);
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
    }
}
