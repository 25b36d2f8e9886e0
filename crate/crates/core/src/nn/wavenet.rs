use super::conv::{Conv1d, ConvParams};
use super::tensor::Tensor3;
use super::weights::{join, load_conv1d, ParamSource};
use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Non-causal WaveNet stack: dilated convolutions with gated tanh/sigmoid
/// units, optional global conditioning, residual and skip paths. The output
/// is the sum of the skip contributions.
#[derive(Debug, Clone)]
pub struct WaveNet {
    hidden: usize,
    in_layers: Vec<Conv1d>,
    res_skip_layers: Vec<Conv1d>,
    cond_layer: Option<Conv1d>,
}

impl WaveNet {
    /// `gin_channels = None` builds an unconditioned stack.
    pub fn load(
        src: &mut dyn ParamSource,
        prefix: &str,
        hidden: usize,
        kernel: usize,
        dilation_rate: usize,
        layers: usize,
        gin_channels: Option<usize>,
    ) -> Result<Self> {
        let cond_layer = match gin_channels {
            Some(gin) => Some(load_conv1d(
                src,
                &join(prefix, "cond_layer"),
                (2 * hidden * layers, gin, 1),
                true,
                ConvParams::pointwise(),
            )?),
            None => None,
        };
        let mut in_layers = Vec::with_capacity(layers);
        let mut res_skip_layers = Vec::with_capacity(layers);
        for i in 0..layers {
            let dilation = dilation_rate.pow(i as u32);
            in_layers.push(load_conv1d(
                src,
                &join(prefix, &format!("in_layers.{i}")),
                (2 * hidden, hidden, kernel),
                true,
                ConvParams::same(kernel, dilation),
            )?);
            let out = if i + 1 < layers { 2 * hidden } else { hidden };
            res_skip_layers.push(load_conv1d(
                src,
                &join(prefix, &format!("res_skip_layers.{i}")),
                (out, hidden, 1),
                true,
                ConvParams::pointwise(),
            )?);
        }
        Ok(WaveNet {
            hidden,
            in_layers,
            res_skip_layers,
            cond_layer,
        })
    }

    pub fn layers(&self) -> usize {
        self.in_layers.len()
    }

    pub fn is_conditioned(&self) -> bool {
        self.cond_layer.is_some()
    }

    pub fn forward(&self, x: &Tensor3, g: Option<&[f32]>) -> Result<Tensor3> {
        let h = self.hidden;
        if x.channels() != h {
            return Err(Error::Shape(format!(
                "wavenet expects {h} channels, got {}",
                x.channels()
            )));
        }
        let cond = match (g, &self.cond_layer) {
            (Some(_), None) => {
                return Err(Error::Config(
                    "speaker embedding given to a wavenet stack without conditioning weights".into(),
                ))
            }
            (Some(g), Some(layer)) => Some(layer.forward_vector(g)?),
            (None, _) => None,
        };

        let (batch, _, time) = x.shape();
        let mut x = x.clone();
        let mut output = Tensor3::zeros((batch, h, time));
        let n = self.in_layers.len();
        for i in 0..n {
            let x_in = self.in_layers[i].forward(&x)?;
            let g_l = cond.as_ref().map(|c| &c[i * 2 * h..(i + 1) * 2 * h]);
            let mut acts = vec![0.0f32; batch * h * time];
            for b in 0..batch {
                for c in 0..h {
                    let a = x_in.row(b, c);
                    let s = x_in.row(b, c + h);
                    let (ga, gs) = g_l.map_or((0.0, 0.0), |g| (g[c], g[c + h]));
                    let dst = &mut acts[(b * h + c) * time..(b * h + c + 1) * time];
                    for t in 0..time {
                        dst[t] = (a[t] + ga).tanh() * sigmoid(s[t] + gs);
                    }
                }
            }
            let acts = Tensor3::new(acts, (batch, h, time))?;
            let res_skip = self.res_skip_layers[i].forward(&acts)?;
            if i + 1 < n {
                x.add_assign(&res_skip.narrow_channels(0, h)?)?;
                output.add_assign(&res_skip.narrow_channels(h, h)?)?;
            } else {
                output.add_assign(&res_skip)?;
            }
        }
        Ok(output)
    }
}
