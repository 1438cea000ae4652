//! Computation graph and the operator set.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Handle to a node inside a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul {
        lhs: NodeId,
        rhs: NodeId,
    },
    AddBias {
        input: NodeId,
        bias: NodeId,
    },
    Relu {
        input: NodeId,
    },
    Dropout {
        input: NodeId,
        /// Per-element factors: 0 for dropped units, 1/(1-p) for kept ones.
        mask: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
        /// Row-major softmax probabilities saved by the forward pass.
        probs: Vec<f64>,
    },
    ScaleAndSum {
        terms: Vec<(f64, NodeId)>,
    },
    Mean {
        input: NodeId,
    },
}

struct Node {
    value: Tensor,
    grad: Tensor,
    op: Op,
}

/// A reverse-mode computation tape. Nodes only ever reference
/// earlier-created nodes, so the tape is acyclic by construction.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let grad = Tensor::zeros(value.shape().to_vec());
        self.nodes.push(Node { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Inserts an input or parameter node.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].grad
    }

    /// Resets every gradient accumulator to zero.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad.fill(0.0);
        }
    }

    /// `[m, k] x [k, n] -> [m, n]` matrix product.
    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        matmul_into(a.data(), b.data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out).expect("sized above");
        Ok(self.push(value, Op::Matmul { lhs, rhs }))
    }

    /// Adds a `[n]` bias vector to every row of a `[m, n]` input.
    pub fn add_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, b) = (self.value(input), self.value(bias));
        if x.shape().len() != 2 || b.shape().len() != 1 || b.len() != x.cols() {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: x.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let (m, n) = (x.rows(), x.cols());
        let mut out = x.data().to_vec();
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] += b.data()[j];
            }
        }
        let value = Tensor::new(vec![m, n], out).expect("sized above");
        Ok(self.push(value, Op::AddBias { input, bias }))
    }

    /// Elementwise `max(0, x)`.
    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = Tensor::new(
            self.value(input).shape().to_vec(),
            self.value(input).data().iter().map(|v| v.max(0.0)).collect(),
        )
        .expect("same shape");
        self.push(value, Op::Relu { input })
    }

    /// Inverted dropout: each element is zeroed with probability `p` and
    /// surviving elements are scaled by `1/(1-p)`, so the expected output
    /// equals the input. Evaluation-mode code simply skips this node.
    pub fn dropout(&mut self, input: NodeId, p: f64, rng: &mut ChaCha8Rng) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability must be in [0, 1), got {p}"
            )));
        }
        let keep_scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(input).len())
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep_scale })
            .collect();
        let value = Tensor::new(
            self.value(input).shape().to_vec(),
            self.value(input)
                .data()
                .iter()
                .zip(&mask)
                .map(|(v, m)| v * m)
                .collect(),
        )
        .expect("same shape");
        Ok(self.push(value, Op::Dropout { input, mask }))
    }

    /// Fused softmax + cross-entropy over `[batch, classes]` logits with
    /// integer class labels; returns the scalar batch-mean loss. Softmax is
    /// computed with per-row max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let x = self.value(logits);
        if x.shape().len() != 2 || x.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: x.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let (batch, classes) = (x.rows(), x.cols());
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let mut probs = vec![0.0; batch * classes];
        let mut total = 0.0;
        for i in 0..batch {
            let row = &x.data()[i * classes..(i + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &logit) in row.iter().enumerate() {
                let e = (logit - max).exp();
                probs[i * classes + j] = e;
                sum += e;
            }
            for p in &mut probs[i * classes..(i + 1) * classes] {
                *p /= sum;
            }
            total += sum.ln() - (row[labels[i]] - max);
        }
        let value = Tensor::scalar(total / batch as f64);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Weighted sum of scalar nodes: `sum_i coefficient_i * term_i`,
    /// accumulated left to right from 0.
    pub fn scale_and_sum(&mut self, terms: &[(f64, NodeId)]) -> Result<NodeId> {
        let mut acc = 0.0;
        for &(coefficient, term) in terms {
            let v = self.value(term);
            if !v.is_scalar() {
                return Err(Error::InvalidArgument(format!(
                    "scale_and_sum needs scalar terms, got shape {:?}",
                    v.shape()
                )));
            }
            acc += coefficient * v.scalar_value();
        }
        Ok(self.push(
            Tensor::scalar(acc),
            Op::ScaleAndSum {
                terms: terms.to_vec(),
            },
        ))
    }

    /// Mean over all elements; returns a scalar node.
    pub fn mean(&mut self, input: NodeId) -> NodeId {
        let x = self.value(input);
        let value = Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64);
        self.push(value, Op::Mean { input })
    }

    /// Reverse sweep from a scalar root: every node's gradient accumulator
    /// receives the gradient of the root with respect to that node.
    /// Repeated calls without [`Graph::zero_grad`] therefore accumulate
    /// (two identical sweeps leave exactly twice the gradient).
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if !self.nodes[root.0].value.is_scalar() {
            return Err(Error::InvalidArgument(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        // Flows are kept separate from the persistent accumulators so that
        // a previous sweep's results never feed back into this one.
        let mut flows: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        flows[root.0].data_mut()[0] = 1.0;
        for id in (0..=root.0).rev() {
            self.apply_backward(id, &mut flows);
        }
        for (node, flow) in self.nodes.iter_mut().zip(&flows) {
            node.grad.axpy(1.0, flow);
        }
        Ok(())
    }

    fn apply_backward(&self, id: usize, flows: &mut [Tensor]) {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul { lhs, rhs } => {
                let g = std::mem::replace(&mut flows[id], Tensor::scalar(0.0));
                let a = &self.nodes[lhs.0].value;
                let b = &self.nodes[rhs.0].value;
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                // dA = G * B^T
                {
                    let da = flows[lhs.0].data_mut();
                    for i in 0..m {
                        for kk in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g.data()[i * n + j] * b.data()[kk * n + j];
                            }
                            da[i * k + kk] += acc;
                        }
                    }
                }
                // dB = A^T * G
                {
                    let db = flows[rhs.0].data_mut();
                    for i in 0..m {
                        for kk in 0..k {
                            let av = a.data()[i * k + kk];
                            if av != 0.0 {
                                for j in 0..n {
                                    db[kk * n + j] += av * g.data()[i * n + j];
                                }
                            }
                        }
                    }
                }
                flows[id] = g;
            }
            Op::AddBias { input, bias } => {
                let g = std::mem::replace(&mut flows[id], Tensor::scalar(0.0));
                let (m, n) = (g.rows(), g.cols());
                flows[input.0].axpy(1.0, &g);
                let db = flows[bias.0].data_mut();
                for i in 0..m {
                    for j in 0..n {
                        db[j] += g.data()[i * n + j];
                    }
                }
                flows[id] = g;
            }
            Op::Relu { input } => {
                let g = std::mem::replace(&mut flows[id], Tensor::scalar(0.0));
                let x = &self.nodes[input.0].value;
                let dx = flows[input.0].data_mut();
                for ((d, &gv), &xv) in dx.iter_mut().zip(g.data()).zip(x.data()) {
                    if xv > 0.0 {
                        *d += gv;
                    }
                }
                flows[id] = g;
            }
            Op::Dropout { input, mask } => {
                let g = std::mem::replace(&mut flows[id], Tensor::scalar(0.0));
                let dx = flows[input.0].data_mut();
                for ((d, &gv), &m) in dx.iter_mut().zip(g.data()).zip(mask) {
                    *d += gv * m;
                }
                flows[id] = g;
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                probs,
            } => {
                let upstream = flows[id].scalar_value();
                if upstream != 0.0 {
                    let batch = labels.len();
                    let classes = probs.len() / batch;
                    let scale = upstream / batch as f64;
                    let dl = flows[logits.0].data_mut();
                    for (i, &label) in labels.iter().enumerate() {
                        for j in 0..classes {
                            let indicator = if j == label { 1.0 } else { 0.0 };
                            dl[i * classes + j] += (probs[i * classes + j] - indicator) * scale;
                        }
                    }
                }
            }
            Op::ScaleAndSum { terms } => {
                let upstream = flows[id].scalar_value();
                for &(coefficient, term) in terms {
                    flows[term.0].data_mut()[0] += coefficient * upstream;
                }
            }
            Op::Mean { input } => {
                let upstream = flows[id].scalar_value();
                if upstream != 0.0 {
                    let n = self.nodes[input.0].value.len() as f64;
                    let each = upstream / n;
                    for d in flows[input.0].data_mut() {
                        *d += each;
                    }
                }
            }
        }
    }
}

// Row-major [m,k] x [k,n] accumulating product with an i-k-j loop order;
// zero left-operand entries are skipped (hashed bag-of-words inputs are
// mostly zeros).
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            if av != 0.0 {
                let brow = &b[kk * n..(kk + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
}
