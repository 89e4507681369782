//! Feed-forward formant predictor: tanh hidden layers, linear output,
//! inputs mapped to [0.1, 0.9] and targets standardised.

mod train;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

pub use train::{train, TrainConfig, TrainReport};

pub const DEFAULT_DIMS: [usize; 5] = [143, 300, 300, 300, 3];

const MAGIC: &[u8; 4] = b"FMLP";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `n_out x n_in`.
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: DMatrix::zeros(n_out, n_in),
            biases: DVector::zeros(n_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
}

impl Normalization {
    pub fn identity(n_in: usize, n_out: usize) -> Self {
        Self {
            input_min: vec![0.0; n_in],
            input_max: vec![1.0; n_in],
            output_mean: vec![0.0; n_out],
            output_std: vec![1.0; n_out],
        }
    }

    /// Per-dimension statistics of a training set; a constant target keeps
    /// std 1.
    pub fn fit(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Self {
        let n_in = inputs[0].len();
        let n_out = targets[0].len();
        let mut input_min = vec![f64::INFINITY; n_in];
        let mut input_max = vec![f64::NEG_INFINITY; n_in];
        for x in inputs {
            for (j, &v) in x.iter().enumerate() {
                input_min[j] = input_min[j].min(v);
                input_max[j] = input_max[j].max(v);
            }
        }
        let n = targets.len() as f64;
        let output_mean: Vec<f64> = (0..n_out)
            .map(|j| targets.iter().map(|y| y[j]).sum::<f64>() / n)
            .collect();
        let output_std = (0..n_out)
            .map(|j| {
                let var = targets.iter().map(|y| (y[j] - output_mean[j]).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-12 {
                    var.sqrt()
                } else {
                    log::warn!("target dimension {j} is constant; using unit std");
                    1.0
                }
            })
            .collect();
        Self {
            input_min,
            input_max,
            output_mean,
            output_std,
        }
    }

    pub fn normalize_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.input_min.iter().zip(&self.input_max))
            .map(|(&v, (&lo, &hi))| {
                let span = if hi > lo { hi - lo } else { 1.0 };
                0.1 + 0.8 * (v - lo) / span
            })
            .collect()
    }

    pub fn normalize_output(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.output_mean.iter().zip(&self.output_std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn denormalize_output(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.output_mean.iter().zip(&self.output_std))
            .map(|(&v, (&m, &s))| m + s * v)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
    pub norm: Normalization,
}

/// Parameter-shaped gradient.
pub type Gradient = Vec<Layer>;

impl MlpModel {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer dims {dims:?}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            norm: Normalization::identity(dims[0], dims[dims.len() - 1]),
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        for layer in &mut m.layers {
            let (n_out, n_in) = layer.weights.shape();
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in layer.weights.iter_mut() {
                *w = rng.gen_range(-limit..limit);
            }
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Network output in normalised units for a batch stored column-wise.
    pub fn forward_normalized(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.biases;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
            }
            a = z;
        }
        a
    }

    /// Prediction in target units (Hz) for one raw input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let xn = DMatrix::from_vec(x.len(), 1, self.norm.normalize_input(x));
        let out = self.forward_normalized(&xn);
        Ok(self.norm.denormalize_output(out.as_slice()))
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.normalized_batch(xs)?;
        let out = self.forward_normalized(&x);
        Ok(out
            .column_iter()
            .map(|c| self.norm.denormalize_output(c.as_slice()))
            .collect())
    }

    pub(crate) fn normalized_batch(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(d * xs.len());
        for x in xs {
            if x.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "input has {} values, model expects {d}",
                    x.len()
                )));
            }
            data.extend(self.norm.normalize_input(x));
        }
        Ok(DMatrix::from_vec(d, xs.len(), data))
    }

    /// Mean squared error over all outputs of the batch (columns of `x` and
    /// `y`, both already normalised) and its gradient. `masks[i]` scales the
    /// activations of hidden layer `i` (inverted dropout); pass `None` for a
    /// deterministic pass.
    pub fn loss_and_gradient(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        masks: Option<&[DMatrix<f64>]>,
    ) -> (f64, Gradient) {
        let last = self.layers.len() - 1;
        let mut acts = vec![x.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &acts[i];
            for mut col in z.column_iter_mut() {
                col += &layer.biases;
            }
            if i < last {
                z.apply(|v| *v = v.tanh());
                if let Some(m) = masks {
                    z.component_mul_assign(&m[i]);
                }
            }
            acts.push(z);
        }
        let count = (y.nrows() * y.ncols()) as f64;
        let diff = &acts[last + 1] - y;
        let loss = diff.norm_squared() / count;

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut delta = diff * (2.0 / count);
        for i in (0..=last).rev() {
            let gw = &delta * acts[i].transpose();
            let gb = delta.column_sum();
            if i > 0 {
                let mut back = self.layers[i].weights.transpose() * &delta;
                // acts[i] already carries the mask; tanh' = 1 - h^2 on the unmasked value
                if let Some(m) = masks {
                    let h = &acts[i];
                    let mi = &m[i - 1];
                    for ((b, &hv), &mv) in back.iter_mut().zip(h.iter()).zip(mi.iter()) {
                        let raw = if mv != 0.0 { hv / mv } else { 0.0 };
                        *b *= mv * (1.0 - raw * raw);
                    }
                } else {
                    back.zip_apply(&acts[i], |b, h| *b *= 1.0 - h * h);
                }
                delta = back;
            }
            grads.push(Layer {
                weights: gw,
                biases: gb,
            });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let mut put = |v: f64| out.extend_from_slice(&v.to_le_bytes());
        for l in &self.layers {
            for r in 0..l.weights.nrows() {
                for c in 0..l.weights.ncols() {
                    put(l.weights[(r, c)]);
                }
            }
            l.biases.iter().for_each(|&v| put(v));
        }
        let n = &self.norm;
        for stat in [&n.input_min, &n.input_max, &n.output_mean, &n.output_std] {
            stat.iter().for_each(|&v| put(v));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("not a model file (bad magic)".into()));
        }
        let version = cur.take(1)?[0];
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {version} (expected {VERSION})"
            )));
        }
        let n = cur.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let dims: Vec<usize> = (0..n).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let mut m = Self::zeros(&dims).map_err(|e| Error::Format(e.to_string()))?;
        for l in &mut m.layers {
            for r in 0..l.weights.nrows() {
                for c in 0..l.weights.ncols() {
                    l.weights[(r, c)] = cur.f64()?;
                }
            }
            for b in l.biases.iter_mut() {
                *b = cur.f64()?;
            }
        }
        let n_in = dims[0];
        let n_out = dims[n - 1];
        let mut read = |k: usize| (0..k).map(|_| cur.f64()).collect::<Result<Vec<f64>>>();
        m.norm = Normalization {
            input_min: read(n_in)?,
            input_max: read(n_in)?,
            output_mean: read(n_out)?,
            output_std: read(n_out)?,
        };
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes in model file",
                bytes.len() - cur.pos
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "model file truncated at byte {}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(dims: &[usize], seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MlpModel::glorot(dims, &mut rng).unwrap();
        for l in &mut m.layers {
            for b in l.biases.iter_mut() {
                *b = rng.gen_range(-0.5..0.5);
            }
        }
        m
    }

    fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn constant_network_outputs_means() {
        let mut m = MlpModel::zeros(&DEFAULT_DIMS).unwrap();
        m.norm.output_mean = vec![500.0, 1500.0, 2500.0];
        m.norm.output_std = vec![100.0, 200.0, 300.0];
        for x in [vec![0.0; 143], vec![7.5; 143]] {
            assert_eq!(m.forward(&x).unwrap(), vec![500.0, 1500.0, 2500.0]);
        }
        assert!(m.forward(&[0.0; 10]).is_err());
    }

    #[test]
    fn one_unit_closed_form() {
        let mut m = MlpModel::zeros(&[1, 1, 1]).unwrap();
        m.layers[0].weights[(0, 0)] = 1.0;
        m.layers[1].weights[(0, 0)] = 1.0;
        m.norm = Normalization {
            input_min: vec![-2.0],
            input_max: vec![6.0],
            output_mean: vec![1000.0],
            output_std: vec![250.0],
        };
        for x in [-5.0, -2.0, 0.3, 6.0, 11.0] {
            let scaled = 0.1 + 0.8 * (x + 2.0) / 8.0;
            let want = 1000.0 + 250.0 * f64::tanh(scaled);
            assert!((m.forward(&[x]).unwrap()[0] - want).abs() < 1e-12);
        }
    }

    fn check_gradient(masks: Option<&[DMatrix<f64>]>) {
        let m = toy(&[5, 3, 2], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_matrix(5, 4, &mut rng);
        let y = random_matrix(2, 4, &mut rng);
        let (_, grad) = m.loss_and_gradient(&x, &y, masks);
        let h = 1e-5;
        for li in 0..m.layers.len() {
            let n_w = m.layers[li].weights.len();
            let n_b = m.layers[li].biases.len();
            for k in 0..n_w + n_b {
                let bump = |delta: f64| {
                    let mut p = m.clone();
                    if k < n_w {
                        p.layers[li].weights[k] += delta;
                    } else {
                        p.layers[li].biases[k - n_w] += delta;
                    }
                    p.loss_and_gradient(&x, &y, masks).0
                };
                let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                let analytic = if k < n_w {
                    grad[li].weights[k]
                } else {
                    grad[li].biases[k - n_w]
                };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-4, "layer {li} param {k}: {numeric} vs {analytic}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(None);
    }

    #[test]
    fn gradient_with_dropout_masks() {
        let masks = [DMatrix::from_row_slice(
            3,
            4,
            &[1.25, 0.0, 1.25, 1.25, 0.0, 1.25, 1.25, 0.0, 1.25, 1.25, 0.0, 1.25],
        )];
        check_gradient(Some(&masks));
    }

    #[test]
    fn normalization_round_trip() {
        let norm = Normalization::fit(
            &[vec![1.0, 5.0], vec![3.0, 5.0]],
            &[vec![500.0, 1500.0], vec![700.0, 1500.0]],
        );
        assert_eq!(norm.output_std[1], 1.0);
        assert_eq!(norm.normalize_input(&[1.0, 5.0]), vec![0.1, 0.1]);
        assert!((norm.normalize_input(&[3.0, 5.0])[0] - 0.9).abs() < 1e-15);
        for y in [[512.0, 1490.0], [10.0, -3.0]] {
            let back = norm.denormalize_output(&norm.normalize_output(&y));
            assert!(back.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn serialization_round_trip() {
        let mut m = toy(&[7, 4, 3], 9);
        m.norm = Normalization {
            input_min: (0..7).map(|v| v as f64 * -0.3).collect(),
            input_max: (0..7).map(|v| v as f64 + 1.0).collect(),
            output_mean: vec![1.0, 2.0, 3.0],
            output_std: vec![0.5, 0.25, 4.0],
        };
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"FMLP");
        assert_eq!(MlpModel::from_bytes(&bytes).unwrap(), m);

        assert!(matches!(
            MlpModel::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        let err = MlpModel::from_bytes(&bad).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(MlpModel::from_bytes(&bad).is_err());
    }
}
