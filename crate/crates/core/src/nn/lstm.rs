use super::gemm::{gemm_accumulate, View};
use super::wavenet::sigmoid;
use super::weights::{join, Init, ParamSource};
use crate::error::{Error, Result};

/// Single-layer LSTM with PyTorch gate layout `[input, forget, cell, output]`.
#[derive(Debug, Clone)]
pub struct Lstm {
    input: usize,
    hidden: usize,
    weight_ih: Vec<f32>,
    weight_hh: Vec<f32>,
    bias_ih: Vec<f32>,
    bias_hh: Vec<f32>,
}

impl Lstm {
    pub fn load(src: &mut dyn ParamSource, prefix: &str, input: usize, hidden: usize) -> Result<Self> {
        let init = || Init::Uniform(1.0 / (hidden as f32).sqrt());
        Ok(Lstm {
            input,
            hidden,
            weight_ih: src.param(&join(prefix, "weight_ih_l0"), &[4 * hidden, input], init())?,
            weight_hh: src.param(&join(prefix, "weight_hh_l0"), &[4 * hidden, hidden], init())?,
            bias_ih: src.param(&join(prefix, "bias_ih_l0"), &[4 * hidden], init())?,
            bias_hh: src.param(&join(prefix, "bias_hh_l0"), &[4 * hidden], init())?,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// Runs the recurrence from zero state over frame-major `steps × input`
    /// features and returns the final hidden state.
    pub fn forward(&self, frames: &[f32], steps: usize) -> Result<Vec<f32>> {
        if frames.len() != steps * self.input {
            return Err(Error::Shape(format!(
                "lstm expects frames of {} features, got {} values for {steps} steps",
                self.input,
                frames.len()
            )));
        }
        let h4 = 4 * self.hidden;
        // Input projections for every step at once: steps × 4H.
        let mut gates_x = vec![0.0f32; steps * h4];
        for t in 0..steps {
            for (j, g) in gates_x[t * h4..(t + 1) * h4].iter_mut().enumerate() {
                *g = self.bias_ih[j] + self.bias_hh[j];
            }
        }
        if steps > 0 {
            let a = View {
                data: frames,
                offset: 0,
                row_stride: self.input,
                col_stride: 1,
            };
            let b = View {
                data: &self.weight_ih,
                offset: 0,
                row_stride: 1,
                col_stride: self.input,
            };
            gemm_accumulate(steps, self.input, h4, a, b, &mut gates_x, 0, h4, 1);
        }

        let n = self.hidden;
        let mut h = vec![0.0f32; n];
        let mut c = vec![0.0f32; n];
        let mut gates = vec![0.0f32; h4];
        for t in 0..steps {
            gates.copy_from_slice(&gates_x[t * h4..(t + 1) * h4]);
            for (j, g) in gates.iter_mut().enumerate() {
                let row = &self.weight_hh[j * n..(j + 1) * n];
                *g += row.iter().zip(&h).map(|(w, v)| w * v).sum::<f32>();
            }
            for k in 0..n {
                let i = sigmoid(gates[k]);
                let f = sigmoid(gates[n + k]);
                let g = gates[2 * n + k].tanh();
                let o = sigmoid(gates[3 * n + k]);
                c[k] = f * c[k] + i * g;
                h[k] = o * c[k].tanh();
            }
        }
        Ok(h)
    }
}
