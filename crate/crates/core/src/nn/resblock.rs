use super::conv::{Conv1d, ConvParams};
use super::tensor::{leaky_relu, Tensor3};
use super::weights::{join, load_conv1d, ParamSource};
use crate::error::{Error, Result};

pub const LRELU_SLOPE: f32 = 0.1;

/// HiFi-GAN "type 1" residual block: for each dilation,
/// `x += conv2(lrelu(conv1_d(lrelu(x))))`.
#[derive(Debug, Clone)]
pub struct ResBlock {
    convs1: Vec<Conv1d>,
    convs2: Vec<Conv1d>,
}

impl ResBlock {
    pub fn load(
        src: &mut dyn ParamSource,
        prefix: &str,
        channels: usize,
        kernel: usize,
        dilations: &[usize],
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::Shape(format!("resblock kernel must be odd, got {kernel}")));
        }
        let mut convs1 = Vec::with_capacity(dilations.len());
        let mut convs2 = Vec::with_capacity(dilations.len());
        for (j, &d) in dilations.iter().enumerate() {
            convs1.push(load_conv1d(
                src,
                &join(prefix, &format!("convs1.{j}")),
                (channels, channels, kernel),
                true,
                ConvParams::same(kernel, d),
            )?);
            convs2.push(load_conv1d(
                src,
                &join(prefix, &format!("convs2.{j}")),
                (channels, channels, kernel),
                true,
                ConvParams::same(kernel, 1),
            )?);
        }
        Ok(ResBlock { convs1, convs2 })
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        let mut x = x.clone();
        for (c1, c2) in self.convs1.iter().zip(&self.convs2) {
            let xt = c1.forward(&leaky_relu(&x, LRELU_SLOPE))?;
            let xt = c2.forward(&leaky_relu(&xt, LRELU_SLOPE))?;
            x.add_assign(&xt)?;
        }
        Ok(x)
    }
}

/// Multi-receptive-field fusion: the mean of parallel residual blocks.
pub fn fuse_resblocks(blocks: &[ResBlock], x: &Tensor3) -> Result<Tensor3> {
    let (first, rest) = blocks
        .split_first()
        .ok_or_else(|| Error::Shape("no residual blocks to fuse".into()))?;
    let mut acc = first.forward(x)?;
    for b in rest {
        acc.add_assign(&b.forward(x)?)?;
    }
    let scale = 1.0 / blocks.len() as f32;
    Ok(acc.map(|v| v * scale))
}
