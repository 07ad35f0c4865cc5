//! Gated recurrent unit with hand-written backpropagation through time.
//!
//! Gate rows are stacked `[update; reset; candidate]`:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruWeights {
    /// `3h × input`
    pub input: Matrix,
    /// `3h × h`
    pub recurrent: Matrix,
    /// `3h × 1`
    pub bias: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cached activations of one step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruStep {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

/// Activations of a full sequence run.
#[derive(Clone, Debug)]
pub struct GruTrace {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    steps: Vec<GruStep>,
}

impl GruWeights {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruWeights {
            input: Matrix::zeros(3 * hidden, input_dim),
            recurrent: Matrix::zeros(3 * hidden, hidden),
            bias: Matrix::zeros(3 * hidden, 1),
        }
    }

    /// Uniform in `±1/√hidden`, zero bias.
    pub fn random<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut w = GruWeights::zeros(input_dim, hidden);
        for v in w
            .input
            .as_mut_slice()
            .iter_mut()
            .chain(w.recurrent.as_mut_slice())
        {
            *v = rng.random_range(-bound..bound);
        }
        w
    }

    pub fn hidden(&self) -> usize {
        self.recurrent.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.input.cols()
    }

    fn step(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, GruStep) {
        let hd = self.hidden();
        let b = self.bias.as_slice();
        let mut pre = b.to_vec();
        self.input.matvec_acc(x, &mut pre);
        let (zr_pre, n_pre) = pre.split_at_mut(2 * hd);
        self.recurrent.matvec_rows_acc(0, h, zr_pre);
        let z: Vec<f64> = zr_pre[..hd].iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<f64> = zr_pre[hd..].iter().map(|&v| sigmoid(v)).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        self.recurrent.matvec_rows_acc(2 * hd, &rh, n_pre);
        let n: Vec<f64> = n_pre.iter().map(|v| v.tanh()).collect();
        let out = (0..hd).map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k]).collect();
        (
            out,
            GruStep {
                h_prev: h.to_vec(),
                z,
                r,
                n,
                rh,
            },
        )
    }

    /// Runs the cell over `inputs` from a zero state.
    pub fn run(&self, inputs: Vec<Vec<f64>>) -> GruTrace {
        let mut h = vec![0.0; self.hidden()];
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut steps = Vec::with_capacity(inputs.len());
        for x in &inputs {
            let (next, cache) = self.step(x, &h);
            steps.push(cache);
            outputs.push(next.clone());
            h = next;
        }
        GruTrace {
            inputs,
            outputs,
            steps,
        }
    }

    /// Backpropagates `d_outputs` (one gradient per output, `None` for zero)
    /// through the trace, accumulating into `grads` and returning the
    /// gradient with respect to each input.
    pub fn backward(
        &self,
        trace: &GruTrace,
        d_outputs: &[Option<Vec<f64>>],
        grads: &mut GruWeights,
    ) -> Vec<Vec<f64>> {
        let hd = self.hidden();
        let len = trace.steps.len();
        let mut d_inputs = vec![Vec::new(); len];
        let mut dh = vec![0.0; hd];
        let mut gates = vec![0.0; 3 * hd];
        for t in (0..len).rev() {
            if let Some(d) = &d_outputs[t] {
                for (a, b) in dh.iter_mut().zip(d) {
                    *a += b;
                }
            }
            let s = &trace.steps[t];
            let x = &trace.inputs[t];
            let mut dh_prev = vec![0.0; hd];
            for k in 0..hd {
                let dn = dh[k] * (1.0 - s.z[k]);
                let dz = dh[k] * (s.h_prev[k] - s.n[k]);
                dh_prev[k] = dh[k] * s.z[k];
                gates[2 * hd + k] = dn * (1.0 - s.n[k] * s.n[k]);
                gates[k] = dz * s.z[k] * (1.0 - s.z[k]);
            }
            let (zr, n_pre) = gates.split_at_mut(2 * hd);
            // Candidate path through U_n (r ⊙ h).
            let mut d_rh = vec![0.0; hd];
            self.recurrent.matvec_t_rows_acc(2 * hd, n_pre, &mut d_rh);
            grads.recurrent.outer_rows_acc(2 * hd, n_pre, &s.rh);
            for k in 0..hd {
                dh_prev[k] += d_rh[k] * s.r[k];
                let dr = d_rh[k] * s.h_prev[k];
                zr[hd + k] = dr * s.r[k] * (1.0 - s.r[k]);
            }
            self.recurrent.matvec_t_rows_acc(0, zr, &mut dh_prev);
            grads.recurrent.outer_rows_acc(0, zr, &s.h_prev);

            grads.input.outer_acc(&gates, x);
            for (b, g) in grads.bias.as_mut_slice().iter_mut().zip(&gates) {
                *b += g;
            }
            let mut dx = vec![0.0; x.len()];
            self.input.matvec_t_acc(&gates, &mut dx);
            d_inputs[t] = dx;
            dh = dh_prev;
        }
        d_inputs
    }

    pub(crate) fn matrices(&self) -> [&Matrix; 3] {
        [&self.input, &self.recurrent, &self.bias]
    }

    pub(crate) fn matrices_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.input, &mut self.recurrent, &mut self.bias]
    }
}

/// One GRU step from state `h` on input `x`.
pub fn gru_cell(x: &[f64], h: &[f64], weights: &GruWeights) -> Result<Vec<f64>> {
    let hd = weights.hidden();
    let (rows, cols) = weights.input.shape();
    if rows != 3 * hd || weights.recurrent.rows() != 3 * hd || weights.bias.shape() != (3 * hd, 1) {
        return Err(Error::arg("inconsistent GRU weight shapes"));
    }
    if x.len() != cols {
        return Err(Error::arg(format!(
            "input has dimension {}, cell expects {cols}",
            x.len()
        )));
    }
    if h.len() != hd {
        return Err(Error::arg(format!(
            "state has dimension {}, cell expects {hd}",
            h.len()
        )));
    }
    Ok(weights.step(x, h).0)
}
