use rand::Rng;

use super::{NodeId, ParamId, ParamSet, Tape};

/// A two-layer perceptron: `y = W2 tanh(W1 x + b1) + b2`.
#[derive(Debug)]
pub struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Mlp {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Mlp {
            w1: params.add_glorot(&format!("{prefix}.w1"), hidden_dim, input_dim, rng),
            b1: params.add_zero_vector(&format!("{prefix}.b1"), hidden_dim),
            w2: params.add_glorot(&format!("{prefix}.w2"), output_dim, hidden_dim, rng),
            b2: params.add_zero_vector(&format!("{prefix}.b2"), output_dim),
            input_dim,
            hidden_dim,
            output_dim,
        }
    }

    pub fn score(&self, tape: &mut Tape, params: &ParamSet, x: NodeId) -> NodeId {
        let lin1 = tape.param_matvec(params, self.w1, x);
        let b1 = tape.param_vec(params, self.b1);
        let pre = tape.add(lin1, b1);
        let hidden = tape.tanh(pre);
        let lin2 = tape.param_matvec(params, self.w2, hidden);
        let b2 = tape.param_vec(params, self.b2);
        tape.add(lin2, b2)
    }
}
