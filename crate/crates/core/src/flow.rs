//! Speaker-conditioned affine coupling flow with exact inverse and
//! log-determinant.
//!
//! Each coupling splits the latent into halves `(za, zb)`, computes
//! `(m, logs) = net(za, g)` and maps `zb ↦ m + zb·exp(logs)`. A channel
//! reversal follows every coupling so both halves get transformed.

use crate::config::{FlowConfig, ModelConfig};
use crate::encoders::SpeakerEmbedding;
use crate::error::{Error, Result};
use crate::nn::weights::{join, load_conv1d, ParamSource};
use crate::nn::{Conv1d, ConvParams, Tensor3, WaveNet};

/// Log-scales are clamped to this magnitude before exponentiation.
pub const LOGS_CLAMP: f32 = 10.0;

#[derive(Debug, Clone)]
pub struct CouplingLayer {
    half: usize,
    mean_only: bool,
    pre: Conv1d,
    enc: WaveNet,
    post: Conv1d,
}

impl CouplingLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn load(
        src: &mut dyn ParamSource,
        prefix: &str,
        channels: usize,
        hidden: usize,
        kernel: usize,
        dilation_rate: usize,
        layers: usize,
        gin_channels: usize,
        mean_only: bool,
    ) -> Result<Self> {
        if channels == 0 || !channels.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "coupling layers need an even channel count, got {channels}"
            )));
        }
        let half = channels / 2;
        let stats = if mean_only { half } else { 2 * half };
        Ok(CouplingLayer {
            half,
            mean_only,
            pre: load_conv1d(src, &join(prefix, "pre"), (hidden, half, 1), true, ConvParams::pointwise())?,
            enc: WaveNet::load(src, &join(prefix, "enc"), hidden, kernel, dilation_rate, layers, Some(gin_channels))?,
            post: load_conv1d(src, &join(prefix, "post"), (stats, hidden, 1), true, ConvParams::pointwise())?,
        })
    }

    pub fn is_mean_only(&self) -> bool {
        self.mean_only
    }

    fn split(&self, z: &Tensor3) -> Result<(Tensor3, Tensor3)> {
        if z.channels() != 2 * self.half {
            return Err(Error::Shape(format!(
                "coupling layer expects {} channels, got {}",
                2 * self.half,
                z.channels()
            )));
        }
        Ok((z.narrow_channels(0, self.half)?, z.narrow_channels(self.half, self.half)?))
    }

    /// Shift and clamped log-scale for the second half, from the first.
    pub fn shift_and_log_scale(&self, za: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, Option<Tensor3>)> {
        let h = self.pre.forward(za)?;
        let h = self.enc.forward(&h, Some(g.as_slice()))?;
        let stats = self.post.forward(&h)?;
        if self.mean_only {
            Ok((stats, None))
        } else {
            let m = stats.narrow_channels(0, self.half)?;
            let logs = stats
                .narrow_channels(self.half, self.half)?
                .map(|v| v.clamp(-LOGS_CLAMP, LOGS_CLAMP));
            Ok((m, Some(logs)))
        }
    }

    /// Returns the transformed latent and `Σ logs`.
    pub fn forward(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, f64)> {
        let (za, zb) = self.split(z)?;
        let (m, logs) = self.shift_and_log_scale(&za, g)?;
        let (zb, logdet) = match logs {
            None => {
                let mut zb = zb;
                zb.add_assign(&m)?;
                (zb, 0.0)
            }
            Some(logs) => {
                let data = m
                    .data()
                    .iter()
                    .zip(zb.data())
                    .zip(logs.data())
                    .map(|((&m, &x), &s)| m + x * s.exp())
                    .collect();
                let logdet = logs.data().iter().map(|&s| s as f64).sum();
                (Tensor3::new(data, zb.shape())?, logdet)
            }
        };
        Ok((Tensor3::cat_channels(&za, &zb)?, logdet))
    }

    /// Exact inverse of [`forward`](Self::forward); the returned
    /// log-determinant is that of the inverse map (`-Σ logs`).
    pub fn inverse(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, f64)> {
        let (za, zb) = self.split(z)?;
        let (m, logs) = self.shift_and_log_scale(&za, g)?;
        let (zb, logdet) = match logs {
            None => {
                let data = zb.data().iter().zip(m.data()).map(|(&x, &m)| x - m).collect();
                (Tensor3::new(data, zb.shape())?, 0.0)
            }
            Some(logs) => {
                let data = zb
                    .data()
                    .iter()
                    .zip(m.data())
                    .zip(logs.data())
                    .map(|((&x, &m), &s)| (x - m) * (-s).exp())
                    .collect();
                let logdet = -logs.data().iter().map(|&s| s as f64).sum::<f64>();
                (Tensor3::new(data, zb.shape())?, logdet)
            }
        };
        Ok((Tensor3::cat_channels(&za, &zb)?, logdet))
    }
}

/// Alternating coupling layers and channel reversals.
#[derive(Debug, Clone)]
pub struct FlowStack {
    layers: Vec<CouplingLayer>,
}

impl FlowStack {
    pub fn new(layers: Vec<CouplingLayer>) -> Self {
        FlowStack { layers }
    }

    pub fn load(src: &mut dyn ParamSource, cfg: &ModelConfig) -> Result<Self> {
        Self::load_with(src, "flow", cfg.inter_channels, cfg.hidden_channels, cfg.gin_channels, &cfg.flow)
    }

    pub fn load_with(
        src: &mut dyn ParamSource,
        prefix: &str,
        channels: usize,
        hidden: usize,
        gin_channels: usize,
        cfg: &FlowConfig,
    ) -> Result<Self> {
        let layers = (0..cfg.n_flows)
            .map(|i| {
                CouplingLayer::load(
                    src,
                    &join(prefix, &format!("flows.{i}")),
                    channels,
                    hidden,
                    cfg.wavenet.kernel,
                    cfg.wavenet.dilation_rate,
                    cfg.wavenet.layers,
                    gin_channels,
                    cfg.mean_only,
                )
            })
            .collect::<Result<_>>()?;
        Ok(FlowStack { layers })
    }

    pub fn layers(&self) -> &[CouplingLayer] {
        &self.layers
    }

    /// Posterior → prior direction. Returns the image and per-layer
    /// log-determinants.
    pub fn forward_with_layer_logdets(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, Vec<f64>)> {
        let mut z = z.clone();
        let mut logdets = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, ld) = layer.forward(&z, g)?;
            z = next.flip_channels();
            logdets.push(ld);
        }
        Ok((z, logdets))
    }

    pub fn forward(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, f64)> {
        let (z, lds) = self.forward_with_layer_logdets(z, g)?;
        Ok((z, lds.iter().sum()))
    }

    /// Prior → posterior direction, with the inverse map's log-determinant.
    pub fn inverse_with_logdet(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<(Tensor3, f64)> {
        let mut z = z.clone();
        let mut total = 0.0;
        for layer in self.layers.iter().rev() {
            let (prev, ld) = layer.inverse(&z.flip_channels(), g)?;
            z = prev;
            total += ld;
        }
        Ok((z, total))
    }

    pub fn inverse(&self, z: &Tensor3, g: &SpeakerEmbedding) -> Result<Tensor3> {
        Ok(self.inverse_with_logdet(z, g)?.0)
    }
}
