//! MNIST IDX loading, the weight archive, and a small float trainer.
//!
//! Weight archive layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "RACAWTS\0"
//! version  u32      1
//! layers   u32      L >= 1
//! shapes   L × (rows u64, cols u64)
//! payload  Σ rows·cols f64, layer by layer, row-major
//! ```
//!
//! A matrix is `n_in × n_out`, or `(n_in + 1) × n_out` when its last row
//! holds the biases, so `rows[l + 1]` must equal `cols[l]` or `cols[l] + 1`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{RacaError, Result};
use crate::matrix::Matrix;
use crate::neurons::logistic;
use crate::rng::derive_stream;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;
const ARCHIVE_MAGIC: &[u8; 8] = b"RACAWTS\0";
const ARCHIVE_VERSION: u32 = 1;
pub const N_CLASSES: usize = 10;

/// Images as rows of `[0, 1]` activations, with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Matrix,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Matrix, labels: Vec<u8>) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(RacaError::dimension("dataset labels", images.rows(), labels.len()));
        }
        if let Some(p) = images.as_slice().iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(RacaError::domain(format!("pixel value {p} is outside [0, 1]")));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= N_CLASSES) {
            return Err(RacaError::domain(format!("label {l} is not a digit class")));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.cols()
    }

    pub fn image(&self, i: usize) -> &[f64] {
        self.images.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The first `n` examples (all of them if `n` exceeds the length).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        let cols = self.dim();
        Self {
            images: Matrix::from_vec(n, cols, self.images.as_slice()[..n * cols].to_vec())
                .expect("prefix of a valid matrix"),
            labels: self.labels[..n].to_vec(),
        }
    }
}

fn data_err(path: &Path, message: impl Into<String>) -> RacaError {
    RacaError::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| data_err(path, e.to_string()))
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| data_err(path, "truncated IDX header"))
}

fn idx_payload<'a>(bytes: &'a [u8], path: &Path, magic: u32, n_dims: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, path)?;
    if found != magic {
        return Err(data_err(
            path,
            format!("bad IDX magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let dims = (0..n_dims)
        .map(|k| be_u32(bytes, 4 + 4 * k, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * n_dims;
    let len: usize = dims.iter().product();
    let payload = &bytes[start..];
    if payload.len() < len {
        return Err(data_err(
            path,
            format!("truncated IDX payload: {} of {len} bytes", payload.len()),
        ));
    }
    Ok((dims, &payload[..len]))
}

/// Reads an IDX image/label pair, scaling pixels by `1/255`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read_file(ip)?;
    let label_bytes = read_file(lp)?;
    let (dims, pixels) = idx_payload(&image_bytes, ip, IDX_IMAGES, 3)?;
    let (ldims, labels) = idx_payload(&label_bytes, lp, IDX_LABELS, 1)?;
    if dims[0] != ldims[0] {
        return Err(data_err(
            lp,
            format!("{} labels for {} images in {}", ldims[0], dims[0], ip.display()),
        ));
    }
    if let Some(l) = labels.iter().find(|&&l| l as usize >= N_CLASSES) {
        return Err(data_err(lp, format!("label {l} is not a digit class")));
    }
    let data = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let images = Matrix::from_vec(dims[0], dims[1] * dims[2], data)?;
    Ok(Dataset {
        images,
        labels: labels.to_vec(),
    })
}

/// Standard file names inside an MNIST directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            train_images: d.join("train-images-idx3-ubyte"),
            train_labels: d.join("train-labels-idx1-ubyte"),
            test_images: d.join("t10k-images-idx3-ubyte"),
            test_labels: d.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn exist(&self) -> bool {
        [&self.train_images, &self.train_labels, &self.test_images, &self.test_labels]
            .iter()
            .all(|p| p.is_file())
    }

    pub fn load_train(&self) -> Result<Dataset> {
        load_idx(&self.train_images, &self.train_labels)
    }

    pub fn load_test(&self) -> Result<Dataset> {
        load_idx(&self.test_images, &self.test_labels)
    }
}

fn archive_err(message: impl Into<String>) -> RacaError {
    RacaError::Archive(message.into())
}

fn check_chain(shapes: &[(usize, usize)]) -> Result<()> {
    if shapes.is_empty() {
        return Err(archive_err("empty layer list"));
    }
    for (l, &(r, c)) in shapes.iter().enumerate() {
        if r == 0 || c == 0 {
            return Err(archive_err(format!("layer {l} has empty shape {r}×{c}")));
        }
    }
    for (l, w) in shapes.windows(2).enumerate() {
        let (out, next_in) = (w[0].1, w[1].0);
        if next_in != out && next_in != out + 1 {
            return Err(archive_err(format!(
                "layer {} has {next_in} rows but layer {l} has {out} outputs",
                l + 1
            )));
        }
    }
    Ok(())
}

/// Serializes a weight list into the archive format.
pub fn encode_weights(weights: &[Matrix]) -> Result<Vec<u8>> {
    let shapes: Vec<_> = weights.iter().map(|m| (m.rows(), m.cols())).collect();
    check_chain(&shapes)?;
    let n_values: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let mut out = Vec::with_capacity(16 + 16 * shapes.len() + 8 * n_values);
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(weights.len() as u32).to_le_bytes());
    for &(r, c) in &shapes {
        out.extend_from_slice(&(r as u64).to_le_bytes());
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for m in weights {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| archive_err("truncated archive"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses an archive produced by [`encode_weights`].
pub fn decode_weights(bytes: &[u8]) -> Result<Vec<Matrix>> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != ARCHIVE_MAGIC {
        return Err(archive_err("bad magic"));
    }
    let version = r.u32()?;
    if version != ARCHIVE_VERSION {
        return Err(archive_err(format!(
            "unsupported version {version}, expected {ARCHIVE_VERSION}"
        )));
    }
    let n = r.u32()? as usize;
    let mut shapes = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let rows = usize::try_from(r.u64()?).map_err(|_| archive_err("shape overflow"))?;
        let cols = usize::try_from(r.u64()?).map_err(|_| archive_err("shape overflow"))?;
        shapes.push((rows, cols));
    }
    check_chain(&shapes)?;
    let mut out = Vec::with_capacity(n);
    for &(rows, cols) in &shapes {
        let len = rows.checked_mul(cols).and_then(|v| v.checked_mul(8));
        let raw = r.take(len.ok_or_else(|| archive_err("shape overflow"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push(Matrix::from_vec(rows, cols, data)?);
    }
    if r.at != bytes.len() {
        return Err(archive_err(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    Ok(out)
}

pub fn save_weights(weights: &[Matrix], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(weights)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Vec<Matrix>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| data_err(path, e.to_string()))?;
    decode_weights(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weights are projected onto `[-w_limit, w_limit]` after every update.
    pub w_limit: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.3,
            batch_size: 32,
            w_limit: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// One matrix per layer, each with a trailing bias row.
    pub weights: Vec<Matrix>,
    /// Mean cross-entropy over each epoch's minibatches.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch gradient descent on cross-entropy with logistic hidden units
/// and a softmax output. Deterministic for a given seed.
pub fn train_reference_network(
    dims: &[usize],
    dataset: &Dataset,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Vec<Matrix>> {
    let opts = TrainOptions {
        epochs,
        learning_rate,
        seed,
        ..TrainOptions::default()
    };
    Ok(train_with(dims, dataset, &opts)?.weights)
}

pub fn train_with(dims: &[usize], dataset: &Dataset, opts: &TrainOptions) -> Result<TrainReport> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(RacaError::domain(format!("invalid layer dims {dims:?}")));
    }
    if dataset.is_empty() {
        return Err(RacaError::domain("training set is empty"));
    }
    if dataset.dim() != dims[0] {
        return Err(RacaError::dimension("training images", dims[0], dataset.dim()));
    }
    if *dims.last().unwrap() < N_CLASSES {
        return Err(RacaError::domain(format!(
            "output layer has {} neurons but labels span {N_CLASSES} classes",
            dims.last().unwrap()
        )));
    }
    if !(opts.learning_rate > 0.0 && opts.w_limit > 0.0 && opts.batch_size > 0) {
        return Err(RacaError::domain("learning rate, w_limit and batch size must be positive"));
    }

    let mut init = derive_stream(opts.seed, &[0]);
    let mut weights: Vec<Matrix> = dims
        .windows(2)
        .map(|d| {
            let a = (6.0 / (d[0] + d[1]) as f64).sqrt().min(opts.w_limit);
            Matrix::from_fn(d[0] + 1, d[1], |i, _| if i == d[0] { 0.0 } else { init.random_range(-a..=a) })
        })
        .collect();
    let mut grads: Vec<Matrix> = weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
    let mut acts: Vec<Vec<f64>> = dims.iter().map(|&d| vec![0.0; d + 1]).collect();
    let mut deltas: Vec<Vec<f64>> = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        order.shuffle(&mut derive_stream(opts.seed, &[1, epoch as u64]));
        let mut loss_sum = 0.0;
        for batch in order.chunks(opts.batch_size) {
            grads.iter_mut().for_each(|g| g.as_mut_slice().fill(0.0));
            for &n in batch {
                loss_sum += backprop(&weights, &mut grads, &mut acts, &mut deltas, dataset.image(n), dataset.label(n));
            }
            if !loss_sum.is_finite() {
                return Err(RacaError::Numeric(format!(
                    "training loss became non-finite in epoch {epoch}; try a smaller learning rate"
                )));
            }
            let step = opts.learning_rate / batch.len() as f64;
            for (w, g) in weights.iter_mut().zip(&grads) {
                for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *wv = (*wv - step * gv).clamp(-opts.w_limit, opts.w_limit);
                }
            }
        }
        epoch_losses.push(loss_sum / dataset.len() as f64);
    }
    Ok(TrainReport { weights, epoch_losses })
}

/// Accumulates one example's gradient into `grads`; returns its loss.
fn backprop(
    weights: &[Matrix],
    grads: &mut [Matrix],
    acts: &mut [Vec<f64>],
    deltas: &mut [Vec<f64>],
    x: &[f64],
    label: usize,
) -> f64 {
    let last = weights.len() - 1;
    acts[0][..x.len()].copy_from_slice(x);
    *acts[0].last_mut().unwrap() = 1.0;
    for (l, w) in weights.iter().enumerate() {
        let z = w.vec_mul(&acts[l]);
        if l == last {
            deltas[l].copy_from_slice(&z);
        } else {
            for (a, zv) in acts[l + 1].iter_mut().zip(&z) {
                *a = logistic(*zv);
            }
            *acts[l + 1].last_mut().unwrap() = 1.0;
        }
    }
    // Softmax cross-entropy from the raw logits held in deltas[last].
    let out = &mut deltas[last];
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let loss = -(out[label] / sum).ln();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out[label] -= 1.0;

    for l in (0..=last).rev() {
        let (a, d) = (&acts[l], &deltas[l]);
        let g = &mut grads[l];
        for (i, &ai) in a.iter().enumerate() {
            if ai != 0.0 {
                for (gv, dv) in g.row_mut(i).iter_mut().zip(d) {
                    *gv += ai * dv;
                }
            }
        }
        if l > 0 {
            let (lower, upper) = deltas.split_at_mut(l);
            let (d, prev) = (&upper[0], &mut lower[l - 1]);
            for (i, p) in prev.iter_mut().enumerate() {
                let back: f64 = weights[l].row(i).iter().zip(d).map(|(w, dv)| w * dv).sum();
                let h = acts[l][i];
                *p = back * h * (1.0 - h);
            }
        }
    }
    loss
}

/// Fraction of `dataset` whose argmax under `predict` matches the label.
pub fn accuracy_of(dataset: &Dataset, mut predict: impl FnMut(&[f64]) -> Option<usize>) -> f64 {
    let hits = (0..dataset.len())
        .filter(|&i| predict(dataset.image(i)) == Some(dataset.label(i)))
        .count();
    hits as f64 / dataset.len() as f64
}
