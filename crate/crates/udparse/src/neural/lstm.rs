use rand::Rng;

use super::{NeuralError, NodeId, ParamId, ParamSet, Tape};

/// Shape of a stack of bidirectional LSTM layers. `hidden_dim` is per
/// direction, so each layer outputs `2 * hidden_dim` per position and layer
/// `k+1` consumes the output of layer `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstmSpec {
    pub layers: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl BiLstmSpec {
    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

#[derive(Debug)]
struct Direction {
    /// Input weights, `[4H x I]`, gate order `i, f, o, g`.
    w: ParamId,
    /// Recurrent weights, `[4H x H]`.
    u: ParamId,
    /// Gate bias, `[4H]`, initialized to zero (including the forget gate).
    b: ParamId,
}

/// Parameter handles for a bidirectional LSTM stack.
#[derive(Debug)]
pub struct BiLstm {
    pub spec: BiLstmSpec,
    layers: Vec<[Direction; 2]>,
}

impl BiLstm {
    /// Registers all layer parameters under `prefix` and returns the handle
    /// set. Weights are Glorot-initialized; biases start at zero.
    pub fn init(params: &mut ParamSet, prefix: &str, spec: BiLstmSpec, rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(spec.layers);
        for layer in 0..spec.layers {
            let input = if layer == 0 { spec.input_dim } else { spec.output_dim() };
            let dirs = ["fwd", "bwd"].map(|dir| {
                let name = |part| format!("{prefix}.l{layer}.{dir}.{part}");
                Direction {
                    w: params.add_glorot(&name("w"), 4 * spec.hidden_dim, input, rng),
                    u: params.add_glorot(&name("u"), 4 * spec.hidden_dim, spec.hidden_dim, rng),
                    b: params.add_zero_vector(&name("b"), 4 * spec.hidden_dim),
                }
            });
            layers.push(dirs);
        }
        BiLstm { spec, layers }
    }

    fn cell(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        dir: &Direction,
        x: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> (NodeId, NodeId) {
        let hd = self.spec.hidden_dim;
        let wx = tape.param_matvec(params, dir.w, x);
        let uh = tape.param_matvec(params, dir.u, h);
        let lin = tape.add(wx, uh);
        let b = tape.param_vec(params, dir.b);
        let gates = tape.add(lin, b);
        let i_lin = tape.slice(gates, 0, hd);
        let f_lin = tape.slice(gates, hd, hd);
        let o_lin = tape.slice(gates, 2 * hd, hd);
        let g_lin = tape.slice(gates, 3 * hd, hd);
        let i = tape.sigmoid(i_lin);
        let f = tape.sigmoid(f_lin);
        let o = tape.sigmoid(o_lin);
        let g = tape.tanh(g_lin);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c_new = tape.add(fc, ig);
        let c_act = tape.tanh(c_new);
        let h_new = tape.mul(o, c_act);
        (h_new, c_new)
    }

    fn run_direction(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        dir: &Direction,
        inputs: impl Iterator<Item = NodeId>,
    ) -> Vec<NodeId> {
        let mut h = tape.zeros(self.spec.hidden_dim);
        let mut c = tape.zeros(self.spec.hidden_dim);
        let mut out = Vec::new();
        for x in inputs {
            let (nh, nc) = self.cell(tape, params, dir, x, h, c);
            h = nh;
            c = nc;
            out.push(h);
        }
        out
    }

    /// Runs the full stack over a sequence. Output `t` is the concatenation
    /// of the top layer's forward and backward hidden states at position `t`.
    /// An empty input yields an empty output.
    pub fn run(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        inputs: &[NodeId],
    ) -> Result<Vec<NodeId>, NeuralError> {
        if let Some(&first) = inputs.first() {
            let found = tape.value(first).len();
            if found != self.spec.input_dim {
                return Err(NeuralError::ShapeMismatch {
                    op: "bilstm input",
                    left: self.spec.input_dim,
                    right: found,
                });
            }
        }
        let mut seq = inputs.to_vec();
        for dirs in &self.layers {
            let fwd = self.run_direction(tape, params, &dirs[0], seq.iter().copied());
            let mut bwd = self.run_direction(tape, params, &dirs[1], seq.iter().rev().copied());
            bwd.reverse();
            seq = fwd
                .into_iter()
                .zip(bwd)
                .map(|(f, b)| tape.concat(&[f, b]))
                .collect();
        }
        Ok(seq)
    }

    /// Concatenation of the final forward state and the final backward state
    /// of the top layer, the usual fixed-size summary of a sequence. `None`
    /// for an empty sequence.
    pub fn final_state(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        inputs: &[NodeId],
    ) -> Result<Option<NodeId>, NeuralError> {
        let out = self.run(tape, params, inputs)?;
        let hd = self.spec.hidden_dim;
        Ok(match (out.first(), out.last()) {
            (Some(&first), Some(&last)) => {
                let f = tape.slice(last, 0, hd);
                let b = tape.slice(first, hd, hd);
                Some(tape.concat(&[f, b]))
            }
            _ => None,
        })
    }
}
