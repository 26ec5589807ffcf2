use rand::Rng;

use super::params::{Bound, ParamId, ParamSet};
use super::tape::{Graph, Matrix, Var};
use crate::error::{ArenaError, Result};

/// Affine layer `y = W x + b` with `W` stored (out, in).
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let weight = params.add_uniform(format!("{name}.w"), (outputs, inputs), inputs, rng);
        let bias = params.add_uniform(format!("{name}.b"), (1, outputs), inputs, rng);
        Self { weight, bias, inputs, outputs }
    }

    pub fn apply(&self, g: &mut Graph, p: &Bound, x: Var) -> Var {
        g.linear(x, p.var(self.weight), p.var(self.bias))
    }
}

/// Evaluates a dense layer on a single input vector, optionally with ReLU.
pub fn dense_forward(params: &ParamSet, layer: &Dense, input: &[f64], relu: bool) -> Result<Vec<f64>> {
    if input.len() != layer.inputs {
        return Err(ArenaError::Dimension(format!("dense layer expects {} inputs, got {}", layer.inputs, input.len())));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let x = g.leaf(Matrix::from_shape_vec((1, input.len()), input.to_vec()).expect("row"));
    let mut y = layer.apply(&mut g, &bound, x);
    if relu {
        y = g.relu(y);
    }
    Ok(g.value(y).iter().copied().collect())
}

/// Gated recurrent unit.
///
/// Gate blocks are stacked in the order update `z`, reset `r`, candidate:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃ = tanh(W_h x + U_h (r ∘ h) + b_h)
/// h' = (1 - z) ∘ h + z ∘ h̃
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let w = params.add_uniform(format!("{name}.w"), (3 * hidden, inputs), inputs, rng);
        let u = params.add_uniform(format!("{name}.u"), (3 * hidden, hidden), hidden, rng);
        let b = params.add_uniform(format!("{name}.b"), (1, 3 * hidden), hidden, rng);
        Self { w, u, b, inputs, hidden }
    }

    pub fn step(&self, g: &mut Graph, p: &Bound, x: Var, h: Var) -> Var {
        let hd = self.hidden;
        let wx = g.linear(x, p.var(self.w), p.var(self.b));
        let u = p.var(self.u);
        let u_zr = g.slice_rows(u, 0, 2 * hd);
        let u_h = g.slice_rows(u, 2 * hd, hd);
        let uh = g.matmul_t(h, u_zr);
        let wx_zr = g.slice_cols(wx, 0, 2 * hd);
        let pre_zr = g.add(wx_zr, uh);
        let zr = g.sigmoid(pre_zr);
        let z = g.slice_cols(zr, 0, hd);
        let r = g.slice_cols(zr, hd, hd);
        let rh = g.mul(r, h);
        let urh = g.matmul_t(rh, u_h);
        let wx_h = g.slice_cols(wx, 2 * hd, hd);
        let pre_h = g.add(wx_h, urh);
        let cand = g.tanh(pre_h);
        let keep = g.one_minus(z);
        let old = g.mul(keep, h);
        let new = g.mul(z, cand);
        g.add(old, new)
    }

    /// Consumes `sequence` left to right; each element is a (B, inputs) leaf.
    pub fn run(&self, g: &mut Graph, p: &Bound, sequence: &[Var], h0: Var) -> Var {
        sequence.iter().fold(h0, |h, x| self.step(g, p, *x, h))
    }
}

/// Final hidden vector after feeding `sequence` into a GRU from `initial`.
pub fn gru_forward(params: &ParamSet, cell: &Gru, sequence: &[Vec<f64>], initial: &[f64]) -> Result<Vec<f64>> {
    if initial.len() != cell.hidden {
        return Err(ArenaError::Dimension(format!(
            "GRU hidden size {} but initial state has {}",
            cell.hidden,
            initial.len()
        )));
    }
    if let Some(x) = sequence.iter().find(|x| x.len() != cell.inputs) {
        return Err(ArenaError::Dimension(format!("GRU expects {} inputs per step, got {}", cell.inputs, x.len())));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let h0 = g.leaf(Matrix::from_shape_vec((1, initial.len()), initial.to_vec()).expect("row"));
    let xs: Vec<Var> =
        sequence.iter().map(|x| g.leaf(Matrix::from_shape_vec((1, x.len()), x.clone()).expect("row"))).collect();
    let h = cell.run(&mut g, &bound, &xs, h0);
    Ok(g.value(h).iter().copied().collect())
}
