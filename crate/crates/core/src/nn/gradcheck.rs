//! Central finite-difference checks for every differentiable operator.
//!
//! Each case builds a small random network (at most 64 scalars) and compares
//! the tape gradient with `(f(θ + h) - f(θ - h)) / 2h` for every scalar.

use rand::Rng;

use super::layers::{Dense, Gru};
use super::params::{Bound, ParamSet};
use super::tape::{Graph, Matrix, Var};
use crate::rng::SeedTree;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
const ABS_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Largest relative error over every scalar of `params`.
pub fn check<F>(params: &ParamSet, f: F) -> f64
where
    F: Fn(&mut Graph, &Bound) -> Var,
{
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = f(&mut g, &bound);
    g.backward(out).expect("scalar output");
    let analytic = bound.grads(&g).expect("backward ran");

    let eval = |p: &ParamSet| {
        let mut g = Graph::new();
        let b = p.bind(&mut g);
        let out = f(&mut g, &b);
        g.scalar(out)
    };
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for block in 0..params.len() {
        for k in 0..params.values()[block].len() {
            let orig = params.values()[block].as_slice().expect("contiguous")[k];
            probe.values_mut()[block].as_slice_mut().expect("contiguous")[k] = orig + FD_STEP;
            let up = eval(&probe);
            probe.values_mut()[block].as_slice_mut().expect("contiguous")[k] = orig - FD_STEP;
            let down = eval(&probe);
            probe.values_mut()[block].as_slice_mut().expect("contiguous")[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.0[block].as_standard_layout().as_slice().expect("contiguous")[k];
            worst = worst.max(relative_error(a, numeric));
        }
    }
    worst
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }
}

type Case = fn(u64) -> f64;

fn two_layer_relu(seed: u64) -> f64 {
    let mut rng = SeedTree::new(seed).stream("gradcheck.dense", 0);
    let mut p = ParamSet::new();
    let l1 = Dense::new(&mut p, "l1", 4, 5, &mut rng);
    let l2 = Dense::new(&mut p, "l2", 5, 2, &mut rng);
    let x = random_matrix(&mut rng, 3, 4);
    check(&p, |g, b| {
        let x = g.leaf(x.clone());
        let h = l1.apply(g, b, x);
        let h = g.relu(h);
        let y = l2.apply(g, b, h);
        let y = g.square(y);
        g.mean(y)
    })
}

fn gru_through_time(seed: u64) -> f64 {
    let mut rng = SeedTree::new(seed).stream("gradcheck.gru", 0);
    let mut p = ParamSet::new();
    let cell = Gru::new(&mut p, "gru", 2, 3, &mut rng);
    let xs: Vec<Matrix> = (0..3).map(|_| random_matrix(&mut rng, 2, 2)).collect();
    let h0 = random_matrix(&mut rng, 2, 3);
    let weights = random_matrix(&mut rng, 2, 3);
    check(&p, |g, b| {
        let seq: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let h0 = g.leaf(h0.clone());
        let h = cell.run(g, b, &seq, h0);
        let w = g.leaf(weights.clone());
        let y = g.mul(h, w);
        g.sum_all(y)
    })
}

fn softmax_head(seed: u64) -> f64 {
    let mut rng = SeedTree::new(seed).stream("gradcheck.softmax", 0);
    let mut p = ParamSet::new();
    let l = Dense::new(&mut p, "l", 3, 4, &mut rng);
    let x = random_matrix(&mut rng, 5, 3);
    let target = random_matrix(&mut rng, 5, 4);
    check(&p, |g, b| {
        let x = g.leaf(x.clone());
        let z = l.apply(g, b, x);
        let q = g.softmax_rows(z);
        let t = g.leaf(target.clone());
        let y = g.mul(q, t);
        g.sum_all(y)
    })
}

fn gates(seed: u64) -> f64 {
    let mut rng = SeedTree::new(seed).stream("gradcheck.gates", 0);
    let mut p = ParamSet::new();
    let a = p.add("a", random_matrix(&mut rng, 3, 4));
    let c = p.add("c", random_matrix(&mut rng, 3, 4));
    check(&p, |g, b| {
        let s = g.sigmoid(b.var(a));
        let t = g.tanh(b.var(c));
        let keep = g.one_minus(s);
        let prod = g.mul(keep, t);
        let diff = g.sub(prod, s);
        let scaled = g.scale(diff, 1.7);
        let sq = g.square(scaled);
        g.mean(sq)
    })
}

fn plumbing(seed: u64) -> f64 {
    let mut rng = SeedTree::new(seed).stream("gradcheck.plumbing", 0);
    let mut p = ParamSet::new();
    let pv = p.add("pv", random_matrix(&mut rng, 2, 3));
    let f = p.add("f", random_matrix(&mut rng, 6, 2));
    let head = Dense::new(&mut p, "head", 5, 1, &mut rng);
    let weights = random_matrix(&mut rng, 2, 1);
    check(&p, |g, b| {
        // Shared public vector broadcast to three rows per batch item, as the
        // per-seller heads see it.
        let rep = g.repeat_rows(b.var(pv), 3);
        let joined = g.concat_cols(&[rep, b.var(f)]);
        let left = g.slice_cols(joined, 1, 4);
        let right = g.slice_cols(joined, 0, 1);
        let both = g.concat_cols(&[left, right]);
        let top = g.slice_rows(both, 0, 6);
        let score = head.apply(g, b, top);
        let grid = g.reshape(score, 2, 3);
        let summed = g.sum_cols(grid);
        let w = g.leaf(weights.clone());
        let y = g.mul(summed, w);
        let t = g.tanh(y);
        g.sum_all(t)
    })
}

pub const CASES: [(&str, Case); 5] = [
    ("dense_relu_two_layer", two_layer_relu),
    ("gru_through_time_len3", gru_through_time),
    ("softmax_head", softmax_head),
    ("sigmoid_tanh_gates", gates),
    ("concat_slice_repeat_reshape", plumbing),
];

/// Runs every case over `instances` seeds starting at `seed`.
pub fn run_suite(seed: u64, instances: usize) -> Vec<CaseReport> {
    CASES
        .iter()
        .map(|(name, case)| CaseReport {
            name,
            instances,
            max_rel_error: (0..instances as u64).map(|k| case(seed.wrapping_add(k))).fold(0.0, f64::max),
        })
        .collect()
}
