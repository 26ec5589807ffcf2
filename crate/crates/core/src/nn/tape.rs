//! Define-by-run reverse-mode differentiation over row-major matrices.
//!
//! Rows are batch items. A [`Graph`] records every operation as it is
//! evaluated; [`Graph::backward`] then walks the record in reverse and
//! accumulates the gradient of a scalar output into every node.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{ArenaError, Result};

pub type Matrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// x · wᵀ
    MatMulT(Var, Var),
    /// a + broadcast row b
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    RepeatRows(Var, usize),
    Reshape(Var),
    SoftmaxRows(Var),
    SumCols(Var),
    SumAll(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Option<Vec<Option<Matrix>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let value = self.value(x).dot(&self.value(w).t());
        self.push(value, Op::MatMulT(x, w))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    /// `x · wᵀ + b`
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul_t(x, w);
        self.add_row(y, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| 1.0 - x);
        self.push(value, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x * x);
        self.push(value, Op::Square(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat rows must agree");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start))
    }

    /// Repeats each row `k` times consecutively: (B, d) -> (B·k, d).
    pub fn repeat_rows(&mut self, a: Var, k: usize) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.dim();
        let mut value = Matrix::zeros((rows * k, cols));
        for (r, row) in src.rows().into_iter().enumerate() {
            for j in 0..k {
                value.row_mut(r * k + j).assign(&row);
            }
        }
        self.push(value, Op::RepeatRows(a, k))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.len(), rows * cols, "reshape must keep the element count");
        let flat: Vec<f64> = src.iter().copied().collect();
        let value = Matrix::from_shape_vec((rows, cols), flat).expect("shape checked");
        self.push(value, Op::Reshape(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let probs = softmax(&row.to_vec());
            row.assign(&ndarray::ArrayView1::from(&probs));
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// (B, n) -> (B, 1)
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(value, Op::SumCols(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let value = Matrix::from_elem((1, 1), src.sum() / src.len() as f64);
        self.push(value, Op::Mean(a))
    }

    /// Accumulates d(output)/d(node) for every recorded node. `output` must be 1x1.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if output.0 >= self.nodes.len() {
            return Err(ArenaError::Dimension("backward on a node that was never recorded".into()));
        }
        if self.value(output).dim() != (1, 1) {
            return Err(ArenaError::Dimension(format!(
                "backward needs a scalar output, got {:?}",
                self.value(output).dim()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Matrix::ones((1, 1)));
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let send = |grads: &mut Vec<Option<Matrix>>, v: Var, d: Matrix| match &mut grads[v.0] {
                Some(acc) => *acc += &d,
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMulT(x, w) => {
                    send(&mut grads, *x, g.dot(self.value(*w)));
                    send(&mut grads, *w, g.t().dot(self.value(*x)));
                }
                Op::AddRow(a, row) => {
                    send(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(&mut grads, *a, g.clone());
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, -&g);
                }
                Op::Mul(a, b) => {
                    send(&mut grads, *a, &g * self.value(*b));
                    send(&mut grads, *b, &g * self.value(*a));
                }
                Op::OneMinus(a) => send(&mut grads, *a, -&g),
                Op::Scale(a, c) => send(&mut grads, *a, &g * *c),
                Op::Sigmoid(a) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                    send(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    send(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let mut d = g.clone();
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    send(&mut grads, *a, d);
                }
                Op::Square(a) => send(&mut grads, *a, &g * &(self.value(*a) * 2.0)),
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        send(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Matrix::zeros(self.value(*a).dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    send(&mut grads, *a, d);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Matrix::zeros(self.value(*a).dim());
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    send(&mut grads, *a, d);
                }
                Op::RepeatRows(a, k) => {
                    let src = self.value(*a);
                    let mut d = Matrix::zeros(src.dim());
                    for (r, mut row) in d.rows_mut().into_iter().enumerate() {
                        for j in 0..*k {
                            row += &g.row(r * k + j);
                        }
                    }
                    send(&mut grads, *a, d);
                }
                Op::Reshape(a) => {
                    let dim = self.value(*a).dim();
                    let flat: Vec<f64> = g.iter().copied().collect();
                    send(&mut grads, *a, Matrix::from_shape_vec(dim, flat).expect("same size"));
                }
                Op::SoftmaxRows(a) => {
                    let mut d = Matrix::zeros(g.dim());
                    for ((mut drow, grow), yrow) in d.rows_mut().into_iter().zip(g.rows()).zip(node.value.rows()) {
                        let inner: f64 = grow.iter().zip(yrow.iter()).map(|(g, y)| g * y).sum();
                        Zip::from(&mut drow).and(&grow).and(&yrow).for_each(|d, &g, &y| *d = y * (g - inner));
                    }
                    send(&mut grads, *a, d);
                }
                Op::SumCols(a) => {
                    let cols = self.value(*a).ncols();
                    let d = Matrix::from_shape_fn((g.nrows(), cols), |(r, _)| g[[r, 0]]);
                    send(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let d = Matrix::from_elem(self.value(*a).dim(), g[[0, 0]]);
                    send(&mut grads, *a, d);
                }
                Op::Mean(a) => {
                    let src = self.value(*a);
                    let d = Matrix::from_elem(src.dim(), g[[0, 0]] / src.len() as f64);
                    send(&mut grads, *a, d);
                }
            }
            grads[idx] = Some(g);
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Gradient of the last backward output w.r.t. `v`, zero when `v` did not
    /// influence it.
    pub fn grad(&self, v: Var) -> Result<Matrix> {
        let grads =
            self.grads.as_ref().ok_or_else(|| ArenaError::Dimension("gradient requested before backward".into()))?;
        Ok(grads[v.0].clone().unwrap_or_else(|| Matrix::zeros(self.value(v).dim())))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}
