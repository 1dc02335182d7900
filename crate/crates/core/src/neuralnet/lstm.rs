use super::activation::{sigmoid, tanh_act};
use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Trainable parameters of an LSTM layer with `h` units and `i` inputs.
pub const fn param_count(units: usize, inputs: usize) -> usize {
    4 * (units * (units + inputs) + units)
}

/// Borrowed view of one LSTM layer's parameters.
///
/// Gate blocks are stacked in the order forget, input, candidate, output, so
/// row `g * h + j` of each matrix belongs to unit `j` of gate `g`.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayerParams<'a> {
    pub units: usize,
    pub inputs: usize,
    /// `4h x i`, applied to the current input.
    pub input_weights: &'a [f64],
    /// `4h x h`, applied to the previous hidden state.
    pub recurrent_weights: &'a [f64],
    /// `4h`
    pub bias: &'a [f64],
}

impl<'a> LstmLayerParams<'a> {
    /// Splits a contiguous parameter block laid out as input weights,
    /// recurrent weights, bias.
    pub fn from_block(block: &'a [f64], units: usize, inputs: usize) -> Result<Self> {
        if block.len() != param_count(units, inputs) {
            return Err(Error::Shape(format!(
                "LSTM block of {} values, expected {} for {units} units and {inputs} inputs",
                block.len(),
                param_count(units, inputs)
            )));
        }
        let (input_weights, rest) = block.split_at(4 * units * inputs);
        let (recurrent_weights, bias) = rest.split_at(4 * units * units);
        Ok(LstmLayerParams {
            units,
            inputs,
            input_weights,
            recurrent_weights,
            bias,
        })
    }

    /// Gate pre-activations `u x + w h + b` written into `out` (length `4h`).
    #[inline]
    pub(crate) fn preactivations(&self, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
        let (i, h) = (self.inputs, self.units);
        for (r, slot) in out.iter_mut().enumerate() {
            *slot = self.bias[r]
                + dot(&self.input_weights[r * i..(r + 1) * i], x)
                + dot(&self.recurrent_weights[r * h..(r + 1) * h], h_prev);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        LstmState {
            cell: vec![0.0; units],
            hidden: vec![0.0; units],
        }
    }
}

/// Applies the gate nonlinearities in place: `gates` holds pre-activations on
/// entry and `[f, i, c~, o]` on exit. Writes the new cell state, its tanh, and
/// the new hidden state.
#[inline]
pub(crate) fn cell_update(
    units: usize,
    gates: &mut [f64],
    c_prev: &[f64],
    cell: &mut [f64],
    cell_tanh: &mut [f64],
    hidden: &mut [f64],
) {
    let h = units;
    for j in 0..h {
        let f = sigmoid(gates[j]);
        let i = sigmoid(gates[h + j]);
        let g = tanh_act(gates[2 * h + j]);
        let o = sigmoid(gates[3 * h + j]);
        gates[j] = f;
        gates[h + j] = i;
        gates[2 * h + j] = g;
        gates[3 * h + j] = o;
        let c = f * c_prev[j] + i * g;
        let tc = tanh_act(c);
        cell[j] = c;
        cell_tanh[j] = tc;
        hidden[j] = o * tc;
    }
}

/// One time step of the forget-gate LSTM cell.
pub fn lstm_step(params: &LstmLayerParams, state: &LstmState, x: &[f64]) -> Result<LstmState> {
    let h = params.units;
    if x.len() != params.inputs || state.cell.len() != h || state.hidden.len() != h {
        return Err(Error::Shape(format!(
            "lstm step: {} inputs for a {}-input layer, state of {}/{} for {h} units",
            x.len(),
            params.inputs,
            state.cell.len(),
            state.hidden.len()
        )));
    }
    let mut gates = vec![0.0; 4 * h];
    params.preactivations(x, &state.hidden, &mut gates);
    let mut next = LstmState::zeros(h);
    let mut tc = vec![0.0; h];
    cell_update(h, &mut gates, &state.cell, &mut next.cell, &mut tc, &mut next.hidden);
    Ok(next)
}

/// Runs the layer over a `T x i` sequence from the zero state. Returns every
/// hidden state (`T x h`) or only the last one (`1 x h`).
pub fn lstm_layer_forward(
    params: &LstmLayerParams,
    sequence: &Matrix,
    return_sequence: bool,
) -> Result<Matrix> {
    if sequence.rows() == 0 {
        return Err(Error::EmptyInput("lstm input sequence"));
    }
    let mut state = LstmState::zeros(params.units);
    let mut out = Matrix::zeros(if return_sequence { sequence.rows() } else { 1 }, params.units);
    for (t, x) in sequence.iter_rows().enumerate() {
        state = lstm_step(params, &state, x)?;
        if return_sequence {
            out.row_mut(t).copy_from_slice(&state.hidden);
        }
    }
    if !return_sequence {
        out.row_mut(0).copy_from_slice(&state.hidden);
    }
    Ok(out)
}
