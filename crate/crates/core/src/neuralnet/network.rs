use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, repeat_vector, time_distributed_affine};
use super::lstm::{cell_update, param_count, LstmLayerParams};
use super::matrix::{axpy, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Lstm { units: usize, return_sequences: bool },
    Dropout { rate: f64 },
    /// Repeats a single vector once per input time step.
    RepeatVector,
    TimeDistributedDense { units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inference,
    /// Dropout active; masks drawn from a generator seeded with `seed`.
    Training { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Placed {
    spec: LayerSpec,
    input_dim: usize,
    output_dim: usize,
    offset: usize,
    len: usize,
}

/// A sequential stack of layers over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Placed>,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Lstm {
        gates: Vec<f64>,
        cells: Vec<f64>,
        cell_tanh: Vec<f64>,
        hidden: Matrix,
    },
    Dropout {
        mask: Option<Vec<f64>>,
    },
    Passthrough,
}

/// Intermediates of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[l]` is the input of layer `l`; the last entry is the output.
    activations: Vec<Matrix>,
    caches: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache always holds the input")
    }
}

impl Network {
    /// Validates the stack and lays out a zero-filled parameter vector.
    pub fn new(input_dim: usize, specs: &[LayerSpec]) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("network input dimension must be positive".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut dim = input_dim;
        let mut is_sequence = true;
        let mut offset = 0;
        for (idx, &spec) in specs.iter().enumerate() {
            let bad = |why: &str| Error::Config(format!("layer {idx} ({spec:?}): {why}"));
            let (output_dim, len) = match spec {
                LayerSpec::Lstm {
                    units,
                    return_sequences,
                } => {
                    if !is_sequence {
                        return Err(bad("expects a sequence input"));
                    }
                    if units == 0 {
                        return Err(bad("needs at least one unit"));
                    }
                    is_sequence = return_sequences;
                    (units, param_count(units, dim))
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(bad("rate must lie in [0, 1)"));
                    }
                    (dim, 0)
                }
                LayerSpec::RepeatVector => {
                    if is_sequence {
                        return Err(bad("expects a single vector input"));
                    }
                    is_sequence = true;
                    (dim, 0)
                }
                LayerSpec::TimeDistributedDense { units } => {
                    if units == 0 {
                        return Err(bad("needs at least one unit"));
                    }
                    (units, units * dim + units)
                }
            };
            layers.push(Placed {
                spec,
                input_dim: dim,
                output_dim,
                offset,
                len,
            });
            offset += len;
            dim = output_dim;
        }
        Ok(Network {
            input_dim,
            layers,
            params: vec![0.0; offset],
        })
    }

    /// Glorot-uniform weights, zero biases, forget-gate biases set to one.
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &self.layers {
            let block = &mut self.params[layer.offset..layer.offset + layer.len];
            match layer.spec {
                LayerSpec::Lstm { units, .. } => {
                    let (i, h) = (layer.input_dim, units);
                    let (wx, rest) = block.split_at_mut(4 * h * i);
                    let (wh, b) = rest.split_at_mut(4 * h * h);
                    glorot(&mut rng, wx, i, 4 * h);
                    glorot(&mut rng, wh, h, 4 * h);
                    b.fill(0.0);
                    b[..h].fill(1.0);
                }
                LayerSpec::TimeDistributedDense { units } => {
                    let (w, b) = block.split_at_mut(units * layer.input_dim);
                    glorot(&mut rng, w, layer.input_dim, units);
                    b.fill(0.0);
                }
                _ => {}
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.output_dim)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Trainable parameter count of every layer, in stack order.
    pub fn layer_param_counts(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.len).collect()
    }

    pub fn param_len(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for a network of {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    fn lstm_params(&self, layer: &Placed) -> LstmLayerParams<'_> {
        let LayerSpec::Lstm { units, .. } = layer.spec else {
            unreachable!("not an LSTM layer")
        };
        LstmLayerParams::from_block(
            &self.params[layer.offset..layer.offset + layer.len],
            units,
            layer.input_dim,
        )
        .expect("layout fixed at construction")
    }

    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        let mut cache = self.forward(input, Mode::Inference)?;
        Ok(cache.activations.pop().expect("output present"))
    }

    pub fn forward(&self, input: &Matrix, mode: Mode) -> Result<ForwardCache> {
        if input.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} features, got {}",
                self.input_dim,
                input.cols()
            )));
        }
        if input.rows() == 0 {
            return Err(Error::EmptyInput("network input sequence"));
        }
        let steps = input.rows();
        let mut rng = match mode {
            Mode::Training { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Mode::Inference => None,
        };
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());

        for layer in &self.layers {
            let x = activations.last().expect("input present");
            let (out, cache) = match layer.spec {
                LayerSpec::Lstm {
                    return_sequences, ..
                } => lstm_forward(&self.lstm_params(layer), x, return_sequences),
                LayerSpec::Dropout { rate } => match rng.as_mut() {
                    Some(rng) if rate > 0.0 => {
                        let mask = dropout_mask(x.as_slice().len(), rate, rng);
                        let mut out = x.clone();
                        out.as_mut_slice()
                            .iter_mut()
                            .zip(&mask)
                            .for_each(|(v, m)| *v *= m);
                        (out, LayerCache::Dropout { mask: Some(mask) })
                    }
                    _ => (x.clone(), LayerCache::Dropout { mask: None }),
                },
                LayerSpec::RepeatVector => (repeat_vector(x.row(0), steps), LayerCache::Passthrough),
                LayerSpec::TimeDistributedDense { units } => {
                    let block = &self.params[layer.offset..layer.offset + layer.len];
                    let (w, b) = block.split_at(units * layer.input_dim);
                    (time_distributed_affine(w, b, x)?, LayerCache::Passthrough)
                }
            };
            activations.push(out);
            caches.push(cache);
        }
        Ok(ForwardCache {
            activations,
            caches,
        })
    }

    /// Accumulates (adds) the gradient of a scalar loss into `grads`, given
    /// the loss gradient with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache, d_output: &Matrix, grads: &mut [f64]) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer of {} for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        if d_output.shape() != cache.output().shape() {
            return Err(Error::Shape(format!(
                "output gradient {:?} vs output {:?}",
                d_output.shape(),
                cache.output().shape()
            )));
        }
        let mut delta = d_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let g = &mut grads[layer.offset..layer.offset + layer.len];
            delta = match (&layer.spec, &cache.caches[l]) {
                (
                    LayerSpec::Lstm {
                        return_sequences, ..
                    },
                    LayerCache::Lstm {
                        gates,
                        cells,
                        cell_tanh,
                        hidden,
                    },
                ) => lstm_backward(
                    &self.lstm_params(layer),
                    g,
                    x,
                    LstmTrace {
                        gates,
                        cells,
                        cell_tanh,
                        hidden,
                    },
                    &delta,
                    *return_sequences,
                ),
                (LayerSpec::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        delta
                            .as_mut_slice()
                            .iter_mut()
                            .zip(mask)
                            .for_each(|(d, m)| *d *= m);
                    }
                    delta
                }
                (LayerSpec::RepeatVector, _) => {
                    let mut dz = Matrix::zeros(1, delta.cols());
                    for row in delta.iter_rows() {
                        axpy(1.0, row, dz.row_mut(0));
                    }
                    dz
                }
                (LayerSpec::TimeDistributedDense { units }, _) => {
                    let block = &self.params[layer.offset..layer.offset + layer.len];
                    dense_backward(block, g, *units, x, &delta)
                }
                _ => unreachable!("cache kind always matches its layer"),
            };
        }
        Ok(())
    }
}

fn glorot(rng: &mut ChaCha8Rng, w: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    w.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
}

fn lstm_forward(p: &LstmLayerParams, x: &Matrix, return_sequences: bool) -> (Matrix, LayerCache) {
    let (t_len, h) = (x.rows(), p.units);
    let mut gates = vec![0.0; t_len * 4 * h];
    let mut cells = vec![0.0; t_len * h];
    let mut cell_tanh = vec![0.0; t_len * h];
    let mut hidden = Matrix::zeros(t_len, h);
    let zeros = vec![0.0; h];
    for t in 0..t_len {
        let (h_prev, c_prev) = if t == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (hidden.row(t - 1), &cells[(t - 1) * h..t * h])
        };
        let mut h_new = vec![0.0; h];
        let mut c_new = vec![0.0; h];
        let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        p.preactivations(x.row(t), h_prev, g);
        cell_update(h, g, c_prev, &mut c_new, &mut cell_tanh[t * h..(t + 1) * h], &mut h_new);
        cells[t * h..(t + 1) * h].copy_from_slice(&c_new);
        hidden.row_mut(t).copy_from_slice(&h_new);
    }
    let out = if return_sequences {
        hidden.clone()
    } else {
        Matrix::from_rows(&[hidden.row(t_len - 1)]).expect("single row")
    };
    (
        out,
        LayerCache::Lstm {
            gates,
            cells,
            cell_tanh,
            hidden,
        },
    )
}

struct LstmTrace<'a> {
    gates: &'a [f64],
    cells: &'a [f64],
    cell_tanh: &'a [f64],
    hidden: &'a Matrix,
}

/// Backpropagation through time for one LSTM layer. Returns the gradient
/// with respect to the layer input.
fn lstm_backward(
    p: &LstmLayerParams,
    grads: &mut [f64],
    x: &Matrix,
    trace: LstmTrace<'_>,
    upstream: &Matrix,
    return_sequences: bool,
) -> Matrix {
    let (t_len, h, i) = (x.rows(), p.units, p.inputs);
    let (g_wx, rest) = grads.split_at_mut(4 * h * i);
    let (g_wh, g_b) = rest.split_at_mut(4 * h * h);

    let mut dx = Matrix::zeros(t_len, i);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];

    for t in (0..t_len).rev() {
        let up: &[f64] = if return_sequences {
            upstream.row(t)
        } else if t == t_len - 1 {
            upstream.row(0)
        } else {
            &zeros
        };
        let gates = &trace.gates[t * 4 * h..(t + 1) * 4 * h];
        let tc = &trace.cell_tanh[t * h..(t + 1) * h];
        let c_prev = if t == 0 {
            zeros.as_slice()
        } else {
            &trace.cells[(t - 1) * h..t * h]
        };
        for j in 0..h {
            let (f, ig, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let dh = dh_next[j] + up[j];
            let d_o = dh * tc[j];
            let dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            da[j] = dc * c_prev[j] * f * (1.0 - f);
            da[h + j] = dc * g * ig * (1.0 - ig);
            da[2 * h + j] = dc * ig * (1.0 - g * g);
            da[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        let h_prev = if t == 0 { zeros.as_slice() } else { trace.hidden.row(t - 1) };
        let x_t = x.row(t);
        dh_next.fill(0.0);
        let dx_t = dx.row_mut(t);
        for (r, &a) in da.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            axpy(a, x_t, &mut g_wx[r * i..(r + 1) * i]);
            axpy(a, h_prev, &mut g_wh[r * h..(r + 1) * h]);
            g_b[r] += a;
            axpy(a, &p.input_weights[r * i..(r + 1) * i], dx_t);
            axpy(a, &p.recurrent_weights[r * h..(r + 1) * h], &mut dh_next);
        }
    }
    dx
}

fn dense_backward(block: &[f64], grads: &mut [f64], units: usize, x: &Matrix, dy: &Matrix) -> Matrix {
    let h = x.cols();
    let (w, _) = block.split_at(units * h);
    let (g_w, g_b) = grads.split_at_mut(units * h);
    let mut dx = Matrix::zeros(x.rows(), h);
    for t in 0..x.rows() {
        let x_t = x.row(t);
        for (r, &d) in dy.row(t).iter().enumerate() {
            axpy(d, x_t, &mut g_w[r * h..(r + 1) * h]);
            g_b[r] += d;
            axpy(d, &w[r * h..(r + 1) * h], dx.row_mut(t));
        }
    }
    dx
}
