//! Dataset loading, canonical on-disk formats, and synthetic generators.
//!
//! A dataset directory holds four files:
//!
//! * `graph.edges` — one edge per line as `src<TAB>dst`, 0-based decimal
//!   ids; `#` starts a comment line. Edges are symmetrized on load.
//! * `features.csv` — N lines of comma-separated decimal floats, no header.
//! * `labels.csv` — N lines, one decimal class integer per line.
//! * `split.json` — optional; object with `train`, `val`, `test` id arrays.
//!
//! The writer emits a canonical form (each undirected edge once, ascending;
//! shortest-round-trip floats) so that loading and re-writing a canonical
//! directory is byte-identical.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::training::Split;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// Check row counts, label range and class coverage, and split sanity.
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n {
            return Err(Error::DataFormat {
                file: "features.csv".into(),
                detail: format!("{} feature rows for {n} nodes", self.features.rows()),
            });
        }
        if self.labels.len() != n {
            return Err(Error::DataFormat {
                file: "labels.csv".into(),
                detail: format!("{} labels for {n} nodes", self.labels.len()),
            });
        }
        if self.num_classes == 0 {
            return Err(Error::DataFormat {
                file: "labels.csv".into(),
                detail: "no classes".into(),
            });
        }
        let mut seen = vec![false; self.num_classes];
        for (node, &label) in self.labels.iter().enumerate() {
            if label >= self.num_classes {
                return Err(Error::DataFormat {
                    file: "labels.csv".into(),
                    detail: format!(
                        "node {node} has label {label}, outside [0, {})",
                        self.num_classes
                    ),
                });
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::DataFormat {
                file: "labels.csv".into(),
                detail: format!("class {missing} has no nodes"),
            });
        }
        if let Some(split) = &self.split {
            split.validate(n)?;
        }
        Ok(())
    }

    /// Replace features by their row-L1-normalized form (zero rows pass
    /// through unchanged).
    pub fn row_normalize_features(&mut self) {
        let (rows, cols) = self.features.shape();
        for i in 0..rows {
            let sum: f64 = self.features.row(i).iter().map(|v| v.abs()).sum();
            if sum > 0.0 {
                for j in 0..cols {
                    let v = self.features.get(i, j) / sum;
                    self.features.set(i, j, v);
                }
            }
        }
    }
}

fn read_file(dir: &Path, file: &str) -> Result<String> {
    let path = dir.join(file);
    fs::read_to_string(&path).map_err(|e| Error::DataFormat {
        file: file.into(),
        detail: format!("cannot read {}: {e}", path.display()),
    })
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

/// Load a dataset directory in the canonical format.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let features_text = read_file(dir, "features.csv")?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in features_text.lines().enumerate() {
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::DataFormat {
            file: "features.csv".into(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::DataFormat {
                    file: "features.csv".into(),
                    detail: format!(
                        "line {}: {} values, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::DataFormat {
            file: "features.csv".into(),
            detail: "no feature rows".into(),
        });
    }
    let n = rows.len();
    let features = DenseMatrix::from_rows(&rows)?;

    let labels_text = read_file(dir, "labels.csv")?;
    let mut labels = Vec::with_capacity(n);
    for (lineno, line) in labels_text.lines().enumerate() {
        let label = line.trim().parse::<usize>().map_err(|e| Error::DataFormat {
            file: "labels.csv".into(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        labels.push(label);
    }

    let edges_text = read_file(dir, "graph.edges")?;
    let mut edges = Vec::new();
    for (lineno, line) in edges_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or(())
                .and_then(|t| t.parse::<usize>().map_err(|_| ()))
                .map_err(|()| Error::DataFormat {
                    file: "graph.edges".into(),
                    detail: format!("line {}: expected `src<TAB>dst`", lineno + 1),
                })
        };
        let src = parse(parts.next())?;
        let dst = parse(parts.next())?;
        if src >= n || dst >= n {
            return Err(Error::DataFormat {
                file: "graph.edges".into(),
                detail: format!("line {}: node id {} >= {n}", lineno + 1, src.max(dst)),
            });
        }
        edges.push((src, dst));
    }
    let graph = Graph::new(n, &edges)?;

    let split_path = dir.join("split.json");
    let split = if split_path.exists() {
        let text = fs::read_to_string(&split_path)?;
        let parsed: SplitFile = serde_json::from_str(&text).map_err(|e| Error::DataFormat {
            file: "split.json".into(),
            detail: e.to_string(),
        })?;
        Some(Split {
            train: parsed.train,
            val: parsed.val,
            test: parsed.test,
        })
    } else {
        None
    };

    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let dataset = Dataset {
        name,
        graph,
        features,
        labels,
        num_classes,
        split,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Write a dataset directory in canonical form.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    for &(u, v) in dataset.graph.edges() {
        if u < v {
            edges.push_str(&format!("{u}\t{v}\n"));
        }
    }
    fs::write(dir.join("graph.edges"), edges)?;

    let mut features = String::new();
    for i in 0..dataset.features.rows() {
        let row: Vec<String> = dataset
            .features
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        features.push_str(&row.join(","));
        features.push('\n');
    }
    fs::write(dir.join("features.csv"), features)?;

    let mut labels = String::new();
    for &l in &dataset.labels {
        labels.push_str(&format!("{l}\n"));
    }
    fs::write(dir.join("labels.csv"), labels)?;

    if let Some(split) = &dataset.split {
        let file = SplitFile {
            train: split.train.clone(),
            val: split.val.clone(),
            test: split.test.clone(),
        };
        let mut text = serde_json::to_string(&file)?;
        text.push('\n');
        fs::write(dir.join("split.json"), text)?;
    }
    Ok(())
}

/// One standard normal draw via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Class-mean feature matrix: class c is 1.0 on the dimensions congruent to
/// c modulo the class count, so means are orthogonal for dim >= classes.
fn block_features(
    labels: &[usize],
    num_classes: usize,
    feature_dim: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> DenseMatrix {
    let mut features = DenseMatrix::zeros(labels.len(), feature_dim);
    for (i, &label) in labels.iter().enumerate() {
        for d in 0..feature_dim {
            let mean = if d % num_classes == label { 1.0 } else { 0.0 };
            features.set(i, d, mean + noise * gaussian(rng));
        }
    }
    features
}

/// Stochastic block model with homophily knobs: nodes in the same block
/// connect with probability `p_in`, across blocks with `p_out`. Features are
/// class means plus Gaussian noise; labels are block ids. Deterministic per
/// seed.
#[allow(clippy::too_many_arguments)]
pub fn generate_sbm(
    n_per_block: usize,
    num_blocks: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_block == 0 || num_blocks == 0 {
        return Err(Error::InvalidParameter {
            name: "sbm",
            detail: "blocks and nodes per block must be positive".into(),
        });
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::InvalidParameter {
            name: "sbm",
            detail: format!("probabilities p_in={p_in}, p_out={p_out} must lie in [0, 1]"),
        });
    }
    if feature_dim == 0 {
        return Err(Error::InvalidParameter {
            name: "sbm",
            detail: "feature_dim must be positive".into(),
        });
    }
    let n = n_per_block * num_blocks;
    let labels: Vec<usize> = (0..n).map(|i| i / n_per_block).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, &edges)?;
    let features = block_features(&labels, num_blocks, feature_dim, noise, &mut rng);

    let dataset = Dataset {
        name: format!("sbm-{num_blocks}x{n_per_block}"),
        graph,
        features,
        labels,
        num_classes: num_blocks,
        split: None,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Two-class graph where edges overwhelmingly connect different classes, so
/// one-hop aggregation mixes in the wrong class's features. Exercises the
/// identity-dominant coefficient behavior of adaptive models.
pub fn generate_heterophilous(n: usize, feature_dim: usize, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidParameter {
            name: "n",
            detail: format!("{n} nodes; need at least 4"),
        });
    }
    let half = n / 2;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();

    // High feature noise keeps the raw features weakly informative, so a
    // trained model must read the (cross-class) neighborhood in its early
    // layers while later layers prefer the identity.
    const P_IN: f64 = 0.01;
    const P_OUT: f64 = 0.2;
    const NOISE: f64 = 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { P_IN } else { P_OUT };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, &edges)?;
    let features = block_features(&labels, 2, feature_dim, NOISE, &mut rng);

    let dataset = Dataset {
        name: format!("heterophilous-{n}"),
        graph,
        features,
        labels,
        num_classes: 2,
        split: None,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Fully resolved experiment description: architecture, optimizer, split
/// policy, dataset path, and output directory, as one flat document.
///
/// Serialized as `config.json` / `config.resolved.json`; unknown keys are
/// rejected and every key is required, so a resolved config reproduces its
/// run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub model: String,
    pub layers: usize,
    pub k: usize,
    pub hidden: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub dropout: f64,
    pub lr: f64,
    pub wd1: f64,
    pub wd2: f64,
    pub wd3: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// `standard` (split file when present, else first-per-class id order)
    /// or `random` (stratified 60/20/20).
    pub split: String,
    pub per_class: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub split_seed: u64,
    pub row_normalize: bool,
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: String::new(),
            model: "adagpr".into(),
            layers: 2,
            k: 4,
            hidden: 32,
            alpha: 0.1,
            lambda: 0.5,
            dropout: 0.5,
            lr: 0.01,
            wd1: 0.01,
            wd2: 0.0001,
            wd3: 0.01,
            epochs: 1500,
            patience: 100,
            seed: 0,
            eval_every: 10,
            split: "standard".into(),
            per_class: 20,
            val_size: 500,
            test_size: 1000,
            split_seed: 0,
            row_normalize: false,
            out: "run".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn model_spec(&self, dataset: &Dataset) -> Result<crate::models::ModelSpec> {
        let variant = crate::models::Variant::parse(&self.model)?;
        let spec = crate::models::ModelSpec {
            variant,
            layers: self.layers,
            gpr_order: self.k,
            hidden: self.hidden,
            classes: dataset.num_classes,
            features: dataset.num_features(),
            alpha: self.alpha,
            lambda: self.lambda,
            dropout: self.dropout,
            coeff_mode: crate::models::CoeffMode::Learned,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> Result<crate::training::TrainConfig> {
        let config = crate::training::TrainConfig {
            lr: self.lr,
            wd_initial: self.wd1,
            wd_hidden: self.wd2,
            wd_coeff: self.wd3,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            eval_every: self.eval_every,
        };
        config.validate()?;
        Ok(config)
    }

    /// Resolve the split: an explicit split file wins under `standard`,
    /// otherwise the configured mode is applied to the labels.
    pub fn resolve_split(&self, dataset: &Dataset) -> Result<Split> {
        match self.split.as_str() {
            "standard" => {
                if let Some(split) = &dataset.split {
                    split.validate(dataset.num_nodes())?;
                    Ok(split.clone())
                } else {
                    crate::training::make_split(
                        &dataset.labels,
                        &crate::training::SplitMode::Standard {
                            per_class: self.per_class,
                            val_size: self.val_size,
                            test_size: self.test_size,
                        },
                        self.split_seed,
                    )
                }
            }
            "random" => crate::training::make_split(
                &dataset.labels,
                &crate::training::SplitMode::random_60_20_20(),
                self.split_seed,
            ),
            other => Err(Error::Config(format!(
                "unknown split mode '{other}' (expected standard or random)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn two_node_fixture(dir: &Path) {
        fs::write(dir.join("graph.edges"), "# tiny fixture\n0\t1\n").unwrap();
        fs::write(dir.join("features.csv"), "1,0\n0,1\n").unwrap();
        fs::write(dir.join("labels.csv"), "0\n1\n").unwrap();
    }

    #[test]
    fn minimal_fixture_loads() {
        let dir = tempdir().unwrap();
        two_node_fixture(dir.path());
        let d = load_dataset(dir.path()).unwrap();
        assert_eq!(d.num_nodes(), 2);
        assert_eq!(d.num_features(), 2);
        assert_eq!(d.num_classes, 2);
        assert_eq!(d.graph.num_undirected_edges(), 1);
        let a = crate::graph::normalize_adjacency(&d.graph);
        assert!((a.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn label_out_of_coverage_rejected() {
        let dir = tempdir().unwrap();
        two_node_fixture(dir.path());
        // Class 1 missing: labels {0, 2} imply 3 classes but class 1 is empty.
        fs::write(dir.path().join("labels.csv"), "0\n2\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("class 1 has no nodes"), "{err}");
    }

    #[test]
    fn label_equal_to_class_count_rejected() {
        let mut d = generate_sbm(4, 2, 0.5, 0.1, 2, 0.0, 1).unwrap();
        // Claim one fewer class than the labels use: label 1 == num_classes.
        d.num_classes = 1;
        let err = d.validate().unwrap_err();
        assert!(err.to_string().contains("outside [0, 1)"), "{err}");
    }

    #[test]
    fn ragged_features_rejected() {
        let dir = tempdir().unwrap();
        two_node_fixture(dir.path());
        fs::write(dir.path().join("features.csv"), "1,0\n0\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("expected 2"), "{err}");
    }

    #[test]
    fn edge_id_out_of_range_rejected() {
        let dir = tempdir().unwrap();
        two_node_fixture(dir.path());
        fs::write(dir.path().join("graph.edges"), "0\t5\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains(">= 2"), "{err}");
    }

    #[test]
    fn missing_file_has_distinct_diagnostic() {
        let dir = tempdir().unwrap();
        two_node_fixture(dir.path());
        fs::remove_file(dir.path().join("labels.csv")).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("labels.csv"), "{err}");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let dataset = generate_sbm(8, 2, 0.8, 0.1, 3, 0.2, 7).unwrap();
        let mut with_split = dataset.clone();
        with_split.split = Some(Split {
            train: vec![0, 1, 8, 9],
            val: vec![2, 10],
            test: vec![3, 4, 11, 12],
        });

        let dir1 = tempdir().unwrap();
        write_dataset(&with_split, dir1.path()).unwrap();
        let reloaded = load_dataset(dir1.path()).unwrap();
        let dir2 = tempdir().unwrap();
        write_dataset(&reloaded, dir2.path()).unwrap();

        for file in ["graph.edges", "features.csv", "labels.csv", "split.json"] {
            let a = fs::read(dir1.path().join(file)).unwrap();
            let b = fs::read(dir2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs after round trip");
        }
    }

    #[test]
    fn sbm_disjoint_cliques_at_extremes() {
        let d = generate_sbm(4, 2, 1.0, 0.0, 2, 0.0, 3).unwrap();
        // Two 4-cliques: every within-block pair present, no cross edges.
        assert_eq!(d.graph.num_undirected_edges(), 2 * 6);
        for &(u, v) in d.graph.edges() {
            assert_eq!(d.labels[u], d.labels[v]);
        }
    }

    #[test]
    fn sbm_zero_noise_features_are_class_means() {
        let d = generate_sbm(3, 2, 0.5, 0.1, 4, 0.0, 9).unwrap();
        for (i, &label) in d.labels.iter().enumerate() {
            for dim in 0..4 {
                let expected = if dim % 2 == label { 1.0 } else { 0.0 };
                assert_eq!(d.features.get(i, dim), expected);
            }
        }
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        let a = generate_sbm(5, 3, 0.6, 0.05, 4, 0.3, 42).unwrap();
        let b = generate_sbm(5, 3, 0.6, 0.05, 4, 0.3, 42).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.features, b.features);
        let c = generate_heterophilous(20, 4, 11).unwrap();
        let d = generate_heterophilous(20, 4, 11).unwrap();
        assert_eq!(c.graph, d.graph);
        assert_eq!(c.features, d.features);
    }

    #[test]
    fn sbm_homophily_majority_same_label() {
        let mut same = 0usize;
        let mut diff = 0usize;
        for seed in 0..5 {
            let d = generate_sbm(15, 2, 0.5, 0.02, 2, 0.1, seed).unwrap();
            for &(u, v) in d.graph.edges() {
                if d.labels[u] == d.labels[v] {
                    same += 1;
                } else {
                    diff += 1;
                }
            }
        }
        assert!(same > 5 * diff, "same {same} vs diff {diff}");
    }

    #[test]
    fn heterophilous_majority_cross_label() {
        let mut same = 0usize;
        let mut diff = 0usize;
        for seed in 0..5 {
            let d = generate_heterophilous(40, 4, seed).unwrap();
            for &(u, v) in d.graph.edges() {
                if d.labels[u] == d.labels[v] {
                    same += 1;
                } else {
                    diff += 1;
                }
            }
        }
        assert!(diff > 5 * same, "diff {diff} vs same {same}");
    }

    #[test]
    fn generator_parameter_errors() {
        assert!(generate_sbm(0, 2, 0.5, 0.1, 2, 0.0, 1).is_err());
        assert!(generate_sbm(3, 2, 1.5, 0.1, 2, 0.0, 1).is_err());
        assert!(generate_heterophilous(3, 2, 1).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let mut value = serde_json::to_value(ExperimentConfig::default()).unwrap();
        value["mystery"] = serde_json::json!(1);
        let text = serde_json::to_string(&value).unwrap();
        let parsed: std::result::Result<ExperimentConfig, _> = serde_json::from_str(&text);
        assert!(parsed.is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = ExperimentConfig {
            dataset: "data/x".into(),
            model: "gcnii".into(),
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn row_normalization() {
        let mut d = generate_sbm(3, 2, 0.5, 0.1, 4, 0.0, 5).unwrap();
        d.row_normalize_features();
        for i in 0..d.num_nodes() {
            let sum: f64 = d.features.row(i).iter().map(|v| v.abs()).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
