//! Dataset generation, ingestion, and deterministic splitting.
//!
//! Two synthetic families cover the training-dynamics experiments at desk
//! scale: `spirals` (a classic entangled-arms problem) and `tiered-blobs`
//! (Gaussian-free blobs with explicit per-sample difficulty tiers: half
//! the samples sit tight around their class centroid, half are pushed
//! toward another class's centroid, so cheap heads can resolve the easy
//! tier while hard samples genuinely need depth). A CSV loader covers
//! external tables, standardizing features with train-split statistics
//! only.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::multiexit::Labels;
use crate::numerics::rng::named_rng;
use crate::numerics::tensor::Tensor;

/// One split: features `[n, d]` plus aligned targets.
#[derive(Debug, Clone)]
pub struct Split {
    pub x: Tensor,
    pub y: Labels,
}

impl Split {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Train / early-stop-validation / test triple with shared feature
/// dimensionality.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Split,
    pub val: Split,
    pub test: Split,
    /// Feature dimensionality, constant across splits.
    pub dim: usize,
    /// Number of classes for classification data; `None` for regression.
    pub classes: Option<usize>,
    /// Human-readable origin tag embedded into reports.
    pub provenance: String,
}

/// The two synthetic generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SyntheticKind {
    #[serde(rename = "spirals")]
    Spirals,
    #[serde(rename = "tiered-blobs")]
    TieredBlobs,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spirals" => Ok(SyntheticKind::Spirals),
            "tiered-blobs" => Ok(SyntheticKind::TieredBlobs),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic dataset kind '{other}' (expected spirals | tiered-blobs)"
            ))),
        }
    }
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Spirals => "spirals",
            SyntheticKind::TieredBlobs => "tiered-blobs",
        }
    }
}

/// Default split fractions: 70% train, 15% early-stop validation, 15%
/// test.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.15, 0.15];

/// Split sizes by largest-remainder rounding; remainder seats go to the
/// largest fractional part, ties favoring the later split. Sizes always
/// sum to `n`.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split fractions must lie in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, r) in sizes.iter_mut().zip(&raw) {
        *s = r.floor() as usize;
    }
    let mut rem = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    // Largest fractional part first; equal parts resolve to the later
    // split (so a 10-row 70/15/15 table splits 7/1/2, not 7/2/1).
    order.sort_by(|&a, &b| {
        let (pa, pb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        pb.partial_cmp(&pa).unwrap().then(b.cmp(&a))
    });
    for &i in &order {
        if rem == 0 {
            break;
        }
        sizes[i] += 1;
        rem -= 1;
    }
    Ok(sizes)
}

fn shuffled(mut idxs: Vec<usize>, seed: u64, stream: &str) -> Vec<usize> {
    use rand::seq::SliceRandom;
    idxs.shuffle(&mut named_rng(seed, stream));
    idxs
}

/// Stratified index split: each class is shuffled and divided by
/// [`split_sizes`] independently, then each split's order is reshuffled so
/// no split is grouped by class.
fn stratified_indices(
    labels: &[usize],
    classes: usize,
    fractions: [f64; 3],
    seed: u64,
) -> Result<[Vec<usize>; 3]> {
    let mut splits: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for c in 0..classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let members = shuffled(members, seed, &format!("split/class{c}"));
        let sizes = split_sizes(members.len(), fractions)?;
        let mut cursor = 0;
        for (part, &take) in splits.iter_mut().zip(&sizes) {
            part.extend_from_slice(&members[cursor..cursor + take]);
            cursor += take;
        }
    }
    Ok(finish_order(splits, seed))
}

/// Plain (unstratified) index split for regression targets.
fn plain_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let order = shuffled((0..n).collect(), seed, "split/all");
    let sizes = split_sizes(n, fractions)?;
    let mut splits: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut cursor = 0;
    for (part, &take) in splits.iter_mut().zip(&sizes) {
        part.extend_from_slice(&order[cursor..cursor + take]);
        cursor += take;
    }
    Ok(finish_order(splits, seed))
}

fn finish_order(splits: [Vec<usize>; 3], seed: u64) -> [Vec<usize>; 3] {
    let [train, val, test] = splits;
    [
        shuffled(train, seed, "split/order/train"),
        shuffled(val, seed, "split/order/val"),
        shuffled(test, seed, "split/order/test"),
    ]
}

fn take_split(x: &Tensor, y: &Labels, idxs: &[usize]) -> Split {
    Split {
        x: x.gather_rows(idxs),
        y: y.gather(idxs),
    }
}

fn assemble(
    x: Tensor,
    labels: Vec<usize>,
    classes: usize,
    fractions: [f64; 3],
    seed: u64,
    provenance: String,
) -> Result<Dataset> {
    let dim = x.cols();
    let y = Labels::Classes(labels.clone());
    let [ti, vi, si] = stratified_indices(&labels, classes, fractions, seed)?;
    Ok(Dataset {
        train: take_split(&x, &y, &ti),
        val: take_split(&x, &y, &vi),
        test: take_split(&x, &y, &si),
        dim,
        classes: Some(classes),
        provenance,
    })
}

/// Per-class sample counts: as equal as possible, earlier classes taking
/// the remainder.
fn class_counts(n: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| n / classes + usize::from(c < n % classes))
        .collect()
}

fn validate_synthetic(n: usize, d: usize, classes: usize, noise: f64) -> Result<()> {
    if classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs at least 2 classes, got {classes}"
        )));
    }
    if n < 3 * classes {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs n >= 3 * classes, got n = {n} for {classes} classes"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs at least 2 feature dimensions, got {d}"
        )));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise must be finite and non-negative, got {noise}"
        )));
    }
    Ok(())
}

/// Entangled spiral arms: class `c` follows a 1.5-turn spiral in the
/// first two dimensions offset by `2πc/C`; remaining dimensions (and the
/// arm itself) carry `noise`-scaled Gaussian jitter.
fn spirals(n: usize, d: usize, classes: usize, noise: f64, seed: u64) -> (Tensor, Vec<usize>) {
    let counts = class_counts(n, classes);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (c, &m) in counts.iter().enumerate() {
        let mut rng = named_rng(seed, &format!("spirals/class{c}"));
        for j in 0..m {
            let t = j as f64 / m as f64;
            let radius = 0.2 + 0.8 * t;
            let angle = std::f64::consts::TAU * c as f64 / classes as f64
                + 3.0 * std::f64::consts::PI * t;
            for dim in 0..d {
                let base = match dim {
                    0 => radius * angle.cos(),
                    1 => radius * angle.sin(),
                    _ => 0.0,
                };
                let g: f64 = rng.sample(StandardNormal);
                data.push(base + noise * g);
            }
            labels.push(c);
        }
    }
    (
        Tensor::new(vec![n, d], data).expect("internal: shape/data agree"),
        labels,
    )
}

/// Norm of each centroid and the minimum pairwise separation enforced by
/// rejection sampling.
const CENTROID_NORM: f64 = 3.0;
const CENTROID_MIN_DIST: f64 = 2.0;
/// Easy-tier samples stay within this radius of their centroid.
const EASY_RADIUS: f64 = 0.5;
/// Hard-tier samples sit at `t/2` of the way toward another centroid,
/// t ∈ [0.6, 0.9] — strictly inside their own class's half-space, with a
/// margin of at least `0.05 * CENTROID_MIN_DIST` from the bisector.
const HARD_T_LO: f64 = 0.6;
const HARD_T_SPAN: f64 = 0.3;

fn unit_direction(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn blob_centroids(d: usize, classes: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = named_rng(seed, "blobs/centroids");
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut attempts = 0usize;
    while centroids.len() < classes {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::InvalidParameter(format!(
                "could not place {classes} centroids at pairwise distance {CENTROID_MIN_DIST} in {d} dimensions"
            )));
        }
        let candidate: Vec<f64> = unit_direction(&mut rng, d)
            .into_iter()
            .map(|x| x * CENTROID_NORM)
            .collect();
        let ok = centroids.iter().all(|existing| {
            let dist: f64 = existing
                .iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist >= CENTROID_MIN_DIST
        });
        if ok {
            centroids.push(candidate);
        }
    }
    Ok(centroids)
}

/// Blobs with two difficulty tiers per class: even samples hug the class
/// centroid (easy), odd samples are pushed toward a rotating selection of
/// other centroids (hard) while staying on their own side of every
/// bisector — so the noiseless problem stays linearly separable but the
/// hard tier needs finer boundaries.
fn tiered_blobs(
    n: usize,
    d: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<(Tensor, Vec<usize>)> {
    let centroids = blob_centroids(d, classes, seed)?;
    let counts = class_counts(n, classes);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (c, &m) in counts.iter().enumerate() {
        let mut rng = named_rng(seed, &format!("blobs/class{c}"));
        for j in 0..m {
            let mut point: Vec<f64> = centroids[c].clone();
            if j % 2 == 0 {
                // Easy tier: uniform radius within EASY_RADIUS.
                let dir = unit_direction(&mut rng, d);
                let radius = EASY_RADIUS * rng.random::<f64>();
                for (p, u) in point.iter_mut().zip(&dir) {
                    *p += radius * u;
                }
            } else {
                // Hard tier: slide toward another class's centroid.
                let other = (c + 1 + (j / 2) % (classes - 1)) % classes;
                let t = HARD_T_LO + HARD_T_SPAN * rng.random::<f64>();
                for (p, o) in point.iter_mut().zip(&centroids[other]) {
                    *p += 0.5 * t * (o - *p);
                }
            }
            for p in point.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *p += noise * g;
            }
            data.extend_from_slice(&point);
            labels.push(c);
        }
    }
    Ok((
        Tensor::new(vec![n, d], data).expect("internal: shape/data agree"),
        labels,
    ))
}

/// Generates a deterministic synthetic classification dataset with a
/// stratified 70/15/15 split. Requires `n >= 3 * classes`, `classes >= 2`,
/// `d >= 2`, and finite non-negative noise.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    classes: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    validate_synthetic(n, d, classes, noise)?;
    let (x, labels) = match kind {
        SyntheticKind::Spirals => spirals(n, d, classes, noise, seed),
        SyntheticKind::TieredBlobs => tiered_blobs(n, d, classes, noise, seed)?,
    };
    let provenance = format!(
        "{}(n={n}, d={d}, classes={classes}, noise={noise}, seed={seed})",
        kind.name()
    );
    assemble(x, labels, classes, DEFAULT_FRACTIONS, seed, provenance)
}

/// Column statistics from the train split only.
fn train_stats(x: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows(), x.cols());
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x.data()[i * d + j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            let diff = x.data()[i * d + j] - mean[j];
            var[j] += diff * diff;
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0 // constant columns pass through unscaled
            }
        })
        .collect();
    (mean, std)
}

fn standardize(x: &Tensor, mean: &[f64], std: &[f64]) -> Tensor {
    let (n, d) = (x.rows(), x.cols());
    let data = (0..n * d)
        .map(|i| (x.data()[i] - mean[i % d]) / std[i % d])
        .collect();
    Tensor::new(vec![n, d], data).expect("internal: shape/data agree")
}

/// Loads a rectangular numeric CSV (with header) as a dataset: the named
/// label column becomes the target, every other column a feature. Labels
/// that are all non-negative integers make a classification dataset
/// (stratified split over `0..=max`), anything else a regression dataset
/// (plain split). Features are standardized per column using statistics
/// of the train split only; constant columns are left unscaled.
pub fn load_csv_dataset(
    path: &Path,
    label: &str,
    fractions: [f64; 3],
    seed: u64,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            detail: format!("unreadable header: {e}"),
        })?
        .clone();
    let label_idx = headers.iter().position(|h| h == label).ok_or_else(|| {
        Error::Config(format!(
            "label column '{label}' not found; header has: {}",
            headers.iter().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let d = headers.len() - 1;
    if d == 0 {
        return Err(Error::Config(
            "CSV needs at least one feature column besides the label".into(),
        ));
    }

    let mut features = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                detail: format!(
                    "expected {} columns, found {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                detail: format!("non-numeric cell '{cell}' in column '{}'", &headers[col]),
            })?;
            if col == label_idx {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    let n = targets.len();
    if n < 3 {
        return Err(Error::Config(format!(
            "CSV has {n} data rows; need at least 3 to split"
        )));
    }
    let x = Tensor::new(vec![n, d], features)?;

    let is_classification = targets
        .iter()
        .all(|t| t.fract() == 0.0 && *t >= 0.0 && *t < 1e9);
    let provenance = format!("csv({}, label={label}, seed={seed})", path.display());

    let (indices, y, classes) = if is_classification {
        let ids: Vec<usize> = targets.iter().map(|t| *t as usize).collect();
        let classes = ids.iter().max().copied().unwrap_or(0) + 1;
        (
            stratified_indices(&ids, classes, fractions, seed)?,
            Labels::Classes(ids),
            Some(classes),
        )
    } else {
        (
            plain_indices(n, fractions, seed)?,
            Labels::Values(targets),
            None,
        )
    };
    let [ti, vi, si] = indices;

    // Standardize with train statistics only, then apply everywhere.
    let train_x = x.gather_rows(&ti);
    let (mean, std) = train_stats(&train_x);
    let x = standardize(&x, &mean, &std);

    Ok(Dataset {
        train: take_split(&x, &y, &ti),
        val: take_split(&x, &y, &vi),
        test: take_split(&x, &y, &si),
        dim: d,
        classes,
        provenance,
    })
}
