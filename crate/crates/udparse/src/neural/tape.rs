use super::{NeuralError, ParamId, ParamSet};

pub type NodeId = usize;

enum Op {
    Constant,
    /// Whole value of a rank-1 parameter.
    ParamVec { id: ParamId },
    /// One row of a rank-2 parameter (embedding lookup).
    ParamRow { id: ParamId, row: usize },
    /// `y = W x` for a rank-2 parameter `W`.
    ParamMatVec { id: ParamId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    AddScalar { a: NodeId },
    Scale { a: NodeId, c: f64 },
    Tanh { a: NodeId },
    Sigmoid { a: NodeId },
    Relu { a: NodeId },
    Concat { parts: Vec<NodeId> },
    Slice { a: NodeId, start: usize },
    Pick { a: NodeId, index: usize },
    Sum { a: NodeId },
    Dot { a: NodeId, b: NodeId },
}

struct Node {
    op: Op,
    value: Vec<f64>,
}

/// A single forward recording. Operations execute eagerly; `backward` replays
/// the recording in reverse and accumulates parameter gradients.
///
/// A tape is single-use: record one forward pass, call [`Tape::backward`] at
/// most once, then start a new tape for the next example.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    used: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.len(), 1);
        self.nodes[id].value[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn zeros(&mut self, dim: usize) -> NodeId {
        self.constant(vec![0.0; dim])
    }

    pub fn param_vec(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        let value = params.get(id).value.data.clone();
        self.push(Op::ParamVec { id }, value)
    }

    pub fn param_row(&mut self, params: &ParamSet, id: ParamId, row: usize) -> NodeId {
        let value = params.get(id).value.row(row).to_vec();
        self.push(Op::ParamRow { id, row }, value)
    }

    pub fn param_matvec(&mut self, params: &ParamSet, id: ParamId, x: NodeId) -> NodeId {
        let w = &params.get(id).value;
        let xv = &self.nodes[x].value;
        assert_eq!(w.cols(), xv.len(), "matvec: {} columns vs input {}", w.cols(), xv.len());
        let mut y = vec![0.0; w.rows()];
        for (i, yi) in y.iter_mut().enumerate() {
            let row = w.row(i);
            *yi = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        self.push(Op::ParamMatVec { id, x }, y)
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "elementwise op on mismatched lengths");
        let value = va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect();
        self.push(op, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a].value.iter().map(|x| x + c).collect();
        self.push(Op::AddScalar { a }, value)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a].value.iter().map(|x| x * c).collect();
        self.push(Op::Scale { a, c }, value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh { a }, value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        self.push(Op::Sigmoid { a }, value)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a].value.iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu { a }, value)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut value = Vec::new();
        for &p in parts {
            value.extend_from_slice(&self.nodes[p].value);
        }
        self.push(Op::Concat { parts: parts.to_vec() }, value)
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let value = self.nodes[a].value[start..start + len].to_vec();
        self.push(Op::Slice { a, start }, value)
    }

    /// Length-1 node holding `a[index]`.
    pub fn pick(&mut self, a: NodeId, index: usize) -> NodeId {
        let value = vec![self.nodes[a].value[index]];
        self.push(Op::Pick { a, index }, value)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = vec![self.nodes[a].value.iter().sum()];
        self.push(Op::Sum { a }, value)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.len(), vb.len(), "dot on mismatched lengths");
        let value = vec![va.iter().zip(vb).map(|(x, y)| x * y).sum()];
        self.push(Op::Dot { a, b }, value)
    }

    /// Reverse pass from the length-1 node `loss`, accumulating `d loss / d p`
    /// into `params` gradients (including frozen parameters).
    pub fn backward(&mut self, params: &mut ParamSet, loss: NodeId) -> Result<(), NeuralError> {
        if self.used {
            return Err(NeuralError::BackwardReused);
        }
        self.used = true;
        assert_eq!(self.nodes[loss].value.len(), 1, "loss must be a scalar node");

        let mut grads: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        grads[loss][0] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            if grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut grads[i]);
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::ParamVec { id } => {
                    let p = params.get_mut(*id);
                    for (pg, gi) in p.grad.data.iter_mut().zip(&g) {
                        *pg += gi;
                    }
                }
                Op::ParamRow { id, row } => {
                    let p = params.get_mut(*id);
                    let cols = p.value.cols();
                    for (j, gi) in g.iter().enumerate() {
                        p.grad.data[row * cols + j] += gi;
                    }
                }
                Op::ParamMatVec { id, x } => {
                    let xv = &self.nodes[*x].value;
                    let p = params.get_mut(*id);
                    let cols = p.value.cols();
                    for (r, gi) in g.iter().enumerate() {
                        if *gi == 0.0 {
                            continue;
                        }
                        let wrow = &p.value.data[r * cols..(r + 1) * cols];
                        let grow = &mut p.grad.data[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            grow[j] += gi * xv[j];
                            grads[*x][j] += gi * wrow[j];
                        }
                    }
                }
                Op::Add { a, b } => {
                    for (j, gi) in g.iter().enumerate() {
                        grads[*a][j] += gi;
                        grads[*b][j] += gi;
                    }
                }
                Op::Sub { a, b } => {
                    for (j, gi) in g.iter().enumerate() {
                        grads[*a][j] += gi;
                        grads[*b][j] -= gi;
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    for j in 0..g.len() {
                        let (va, vb) = (self.nodes[a].value[j], self.nodes[b].value[j]);
                        grads[a][j] += g[j] * vb;
                        grads[b][j] += g[j] * va;
                    }
                }
                Op::AddScalar { a } => {
                    for (j, gi) in g.iter().enumerate() {
                        grads[*a][j] += gi;
                    }
                }
                Op::Scale { a, c } => {
                    for (j, gi) in g.iter().enumerate() {
                        grads[*a][j] += gi * c;
                    }
                }
                Op::Tanh { a } => {
                    for (j, gi) in g.iter().enumerate() {
                        let y = self.nodes[i].value[j];
                        grads[*a][j] += gi * (1.0 - y * y);
                    }
                }
                Op::Sigmoid { a } => {
                    for (j, gi) in g.iter().enumerate() {
                        let y = self.nodes[i].value[j];
                        grads[*a][j] += gi * y * (1.0 - y);
                    }
                }
                Op::Relu { a } => {
                    for (j, gi) in g.iter().enumerate() {
                        if self.nodes[i].value[j] > 0.0 {
                            grads[*a][j] += gi;
                        }
                    }
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = grads[p].len();
                        for j in 0..len {
                            grads[p][j] += g[offset + j];
                        }
                        offset += len;
                    }
                }
                Op::Slice { a, start } => {
                    for (j, gi) in g.iter().enumerate() {
                        grads[*a][start + j] += gi;
                    }
                }
                Op::Pick { a, index } => {
                    grads[*a][*index] += g[0];
                }
                Op::Sum { a } => {
                    for ga in grads[*a].iter_mut() {
                        *ga += g[0];
                    }
                }
                Op::Dot { a, b } => {
                    let (a, b) = (*a, *b);
                    for j in 0..self.nodes[a].value.len() {
                        grads[a][j] += g[0] * self.nodes[b].value[j];
                        grads[b][j] += g[0] * self.nodes[a].value[j];
                    }
                }
            }
        }
        Ok(())
    }
}
