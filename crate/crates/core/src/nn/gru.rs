use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::Mat;

/// Gated recurrent cell with reset, update and candidate gates stacked in
/// that order along the rows of the weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `3h × input`.
    pub w_input: Mat,
    /// `3h × h`.
    pub w_hidden: Mat,
    pub b_input: Mat,
    pub b_hidden: Mat,
}

/// The cell's parameters registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_input: Var,
    pub w_hidden: Var,
    pub b_input: Var,
    pub b_hidden: Var,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Gru {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        Gru {
            input_dim,
            hidden_dim,
            w_input: Mat::uniform(3 * hidden_dim, input_dim, bound, rng),
            w_hidden: Mat::uniform(3 * hidden_dim, hidden_dim, bound, rng),
            b_input: Mat::uniform(3 * hidden_dim, 1, bound, rng),
            b_hidden: Mat::uniform(3 * hidden_dim, 1, bound, rng),
        }
    }

    pub fn params(&self) -> [&Mat; 4] {
        [&self.w_input, &self.w_hidden, &self.b_input, &self.b_hidden]
    }

    pub fn params_mut(&mut self) -> [&mut Mat; 4] {
        [
            &mut self.w_input,
            &mut self.w_hidden,
            &mut self.b_input,
            &mut self.b_hidden,
        ]
    }

    pub fn register(&self, tape: &mut Tape) -> GruVars {
        GruVars {
            w_input: tape.matrix(&self.w_input),
            w_hidden: tape.matrix(&self.w_hidden),
            b_input: tape.matrix(&self.b_input),
            b_hidden: tape.matrix(&self.b_hidden),
        }
    }

    /// One step on the tape.
    pub fn step_tape(&self, tape: &mut Tape, vars: &GruVars, x: Var, h: Var) -> Var {
        let hd = self.hidden_dim;
        let gi = tape.matvec(vars.w_input, x);
        let gi = tape.add(gi, vars.b_input);
        let gh = tape.matvec(vars.w_hidden, h);
        let gh = tape.add(gh, vars.b_hidden);

        let (ir, iz, inn) = (
            tape.slice(gi, 0, hd),
            tape.slice(gi, hd, hd),
            tape.slice(gi, 2 * hd, hd),
        );
        let (hr, hz, hn) = (
            tape.slice(gh, 0, hd),
            tape.slice(gh, hd, hd),
            tape.slice(gh, 2 * hd, hd),
        );
        let r = tape.add(ir, hr);
        let r = tape.sigmoid(r);
        let z = tape.add(iz, hz);
        let z = tape.sigmoid(z);
        let rn = tape.mul(r, hn);
        let n = tape.add(inn, rn);
        let n = tape.tanh(n);
        let keep = tape.one_minus(z);
        let a = tape.mul(keep, n);
        let b = tape.mul(z, h);
        tape.add(a, b)
    }

    /// One step without recording gradients.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hd = self.hidden_dim;
        let mut gi = self.w_input.matvec(x);
        gi.iter_mut()
            .zip(&self.b_input.data)
            .for_each(|(g, b)| *g += b);
        let mut gh = self.w_hidden.matvec(h);
        gh.iter_mut()
            .zip(&self.b_hidden.data)
            .for_each(|(g, b)| *g += b);
        (0..hd)
            .map(|k| {
                let r = sigmoid(gi[k] + gh[k]);
                let z = sigmoid(gi[hd + k] + gh[hd + k]);
                let n = (gi[2 * hd + k] + r * gh[2 * hd + k]).tanh();
                (1.0 - z) * n + z * h[k]
            })
            .collect()
    }
}
