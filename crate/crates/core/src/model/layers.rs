//! Forward and backward primitives on row-major `(tokens x features)` matrices.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{LayerNorm, Linear, Mlp};

pub(crate) fn linear(x: &Array2<f64>, l: &Linear) -> Array2<f64> {
    x.dot(&l.weight) + &l.bias
}

/// Accumulates `dW`, `db` into `g` and returns `dx`.
pub(crate) fn linear_backward(
    x: &Array2<f64>,
    dy: &Array2<f64>,
    l: &Linear,
    g: &mut Linear,
) -> Array2<f64> {
    g.weight += &x.t().dot(dy);
    g.bias += &dy.sum_axis(Axis(0));
    dy.dot(&l.weight.t())
}

pub(crate) struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub(crate) fn layer_norm(x: &Array2<f64>, ln: &LayerNorm, eps: f64) -> (Array2<f64>, NormCache) {
    let n = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / n;
    let centered = x - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
    let xhat = centered * &inv_std.view().insert_axis(Axis(1));
    let y = &xhat * &ln.gain + &ln.bias;
    (y, NormCache { xhat, inv_std })
}

pub(crate) fn layer_norm_backward(
    cache: &NormCache,
    dy: &Array2<f64>,
    ln: &LayerNorm,
    g: &mut LayerNorm,
) -> Array2<f64> {
    g.gain += &(dy * &cache.xhat).sum_axis(Axis(0));
    g.bias += &dy.sum_axis(Axis(0));
    let n = dy.ncols() as f64;
    let dxhat = dy * &ln.gain;
    let mean_dxhat = dxhat.sum_axis(Axis(1)) / n;
    let mean_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / n;
    let mut dx = dxhat;
    Zip::from(dx.rows_mut())
        .and(cache.xhat.rows())
        .and(&mean_dxhat)
        .and(&mean_dxhat_xhat)
        .and(&cache.inv_std)
        .for_each(|mut row, xh, &m1, &m2, &inv| {
            Zip::from(&mut row).and(&xh).for_each(|d, &x| {
                *d = inv * (*d - m1 - x * m2);
            });
        });
    dx
}

/// Row-wise softmax in place.
pub(crate) fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

/// Gradient of the pre-softmax scores given probabilities `p` and `dp`.
pub(crate) fn softmax_rows_backward(p: &Array2<f64>, dp: &Array2<f64>) -> Array2<f64> {
    let dot = (dp * p).sum_axis(Axis(1));
    (dp - &dot.insert_axis(Axis(1))) * p
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// tanh approximation of GELU.
pub(crate) fn gelu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| 0.5 * v * (1.0 + (GELU_C * (v + GELU_A * v * v * v)).tanh()))
}

pub(crate) fn gelu_grad(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| {
        let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
        0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * v * v)
    })
}

/// Inverted dropout. Holds the RNG that draws the masks.
pub(crate) struct Dropout {
    pub rate: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    /// Mask with entries 0 or `1 / (1 - rate)`; `None` when the rate is zero.
    pub fn mask(&mut self, rows: usize, cols: usize) -> Option<Array2<f64>> {
        if self.rate <= 0.0 {
            return None;
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        Some(Array2::from_shape_simple_fn((rows, cols), || {
            if self.rng.gen::<f64>() < keep {
                scale
            } else {
                0.0
            }
        }))
    }
}

pub(crate) fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

pub(crate) struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Linear layers with ReLU between them; the last layer's output is returned raw.
pub(crate) fn mlp_forward(mlp: &Mlp, x: Array2<f64>) -> (Array2<f64>, MlpCache) {
    let mut inputs = Vec::with_capacity(mlp.layers.len());
    let mut pre = Vec::with_capacity(mlp.layers.len());
    let mut h = x;
    let last = mlp.layers.len() - 1;
    for (i, l) in mlp.layers.iter().enumerate() {
        let z = linear(&h, l);
        inputs.push(h);
        h = if i == last { z.clone() } else { z.mapv(|v| v.max(0.0)) };
        pre.push(z);
    }
    (h, MlpCache { inputs, pre })
}

pub(crate) fn mlp_backward(
    mlp: &Mlp,
    cache: &MlpCache,
    dout: Array2<f64>,
    g: &mut Mlp,
) -> Array2<f64> {
    let last = mlp.layers.len() - 1;
    let mut d = dout;
    for i in (0..=last).rev() {
        if i != last {
            Zip::from(&mut d)
                .and(&cache.pre[i])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
        }
        d = linear_backward(&cache.inputs[i], &d, &mlp.layers[i], &mut g.layers[i]);
    }
    d
}
