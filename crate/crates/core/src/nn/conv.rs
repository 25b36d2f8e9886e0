use super::gemm::{gemm_accumulate, View};
use super::tensor::Tensor3;
use crate::error::{Error, Result};
use crate::par;

/// Output channels handled per work item. Fixed so that sequential and
/// parallel execution issue identical GEMM calls.
const ROW_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvParams {
    pub const fn same(kernel: usize, dilation: usize) -> Self {
        ConvParams {
            stride: 1,
            dilation,
            padding: (kernel * dilation - dilation) / 2,
        }
    }

    pub const fn pointwise() -> Self {
        ConvParams {
            stride: 1,
            dilation: 1,
            padding: 0,
        }
    }
}

/// 1-D convolution (cross-correlation) with an `(out, in, k)` weight.
pub fn conv1d(
    x: &Tensor3,
    weight: &[f32],
    weight_shape: (usize, usize, usize),
    bias: Option<&[f32]>,
    params: ConvParams,
) -> Result<Tensor3> {
    let (c_out, c_in, k) = weight_shape;
    let (batch, x_ch, time) = x.shape();
    if x_ch != c_in {
        return Err(Error::Shape(format!(
            "conv1d expects {c_in} input channels, got {x_ch}"
        )));
    }
    if k == 0 || params.stride == 0 || params.dilation == 0 {
        return Err(Error::Shape("conv1d kernel, stride and dilation must be positive".into()));
    }
    if weight.len() != c_out * c_in * k {
        return Err(Error::Shape(format!(
            "conv1d weight has {} values, shape {weight_shape:?}",
            weight.len()
        )));
    }
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::Shape(format!(
                "conv1d bias has {} values for {c_out} channels",
                b.len()
            )));
        }
    }
    let padded_len = time + 2 * params.padding;
    let span = params.dilation * (k - 1) + 1;
    if padded_len < span {
        return Err(Error::Shape(format!(
            "conv1d input of {time} steps is shorter than the receptive field {span}"
        )));
    }
    let t_out = (padded_len - span) / params.stride + 1;

    let mut out = vec![0.0f32; batch * c_out * t_out];
    for b in 0..batch {
        let padded = if params.padding == 0 {
            x.item(b).to_vec()
        } else {
            let mut p = vec![0.0f32; c_in * padded_len];
            let src = x.item(b);
            for ci in 0..c_in {
                p[ci * padded_len + params.padding..ci * padded_len + params.padding + time]
                    .copy_from_slice(&src[ci * time..(ci + 1) * time]);
            }
            p
        };
        let out_b = &mut out[b * c_out * t_out..(b + 1) * c_out * t_out];
        par::for_each_chunk_mut(out_b, ROW_BLOCK * t_out, |blk, chunk| {
            let co0 = blk * ROW_BLOCK;
            let rows = chunk.len() / t_out;
            if let Some(bias) = bias {
                for r in 0..rows {
                    chunk[r * t_out..(r + 1) * t_out].fill(bias[co0 + r]);
                }
            }
            for kk in 0..k {
                let a = View {
                    data: weight,
                    offset: co0 * c_in * k + kk,
                    row_stride: c_in * k,
                    col_stride: k,
                };
                let bv = View {
                    data: &padded,
                    offset: kk * params.dilation,
                    row_stride: padded_len,
                    col_stride: params.stride,
                };
                gemm_accumulate(rows, c_in, t_out, a, bv, chunk, 0, t_out, 1);
            }
        });
    }
    Tensor3::new(out, (batch, c_out, t_out))
}

/// Transposed-convolution geometry, PyTorch semantics: `padding` samples are
/// cropped from each end and `output_padding` re-added on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransposeParams {
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl TransposeParams {
    pub fn new(stride: usize, padding: usize) -> Self {
        TransposeParams {
            stride,
            padding,
            output_padding: 0,
        }
    }

    /// Exact `×stride` upsampling for any `kernel >= stride`: crops
    /// `kernel - stride` samples in total, the odd one from the right.
    pub fn upsample(kernel: usize, stride: usize) -> Self {
        let crop = kernel.saturating_sub(stride);
        TransposeParams {
            stride,
            padding: crop.div_ceil(2),
            output_padding: crop % 2,
        }
    }
}

/// Transposed 1-D convolution with a PyTorch-layout `(in, out, k)` weight.
/// Output length is `(time - 1)·stride - 2·padding + k + output_padding`.
pub fn conv_transpose1d(
    x: &Tensor3,
    weight: &[f32],
    weight_shape: (usize, usize, usize),
    bias: Option<&[f32]>,
    params: TransposeParams,
) -> Result<Tensor3> {
    let TransposeParams {
        stride,
        padding,
        output_padding,
    } = params;
    let (c_in, c_out, k) = weight_shape;
    let (batch, x_ch, time) = x.shape();
    if x_ch != c_in {
        return Err(Error::Shape(format!(
            "conv_transpose1d expects {c_in} input channels, got {x_ch}"
        )));
    }
    if stride == 0 || k == 0 {
        return Err(Error::Shape("conv_transpose1d stride and kernel must be positive".into()));
    }
    if weight.len() != c_in * c_out * k {
        return Err(Error::Shape(format!(
            "conv_transpose1d weight has {} values, shape {weight_shape:?}",
            weight.len()
        )));
    }
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::Shape(format!(
                "conv_transpose1d bias has {} values for {c_out} channels",
                b.len()
            )));
        }
    }
    if time == 0 {
        return Err(Error::Shape("conv_transpose1d of an empty sequence".into()));
    }
    let full_len = (time - 1) * stride + k;
    if output_padding > padding {
        return Err(Error::Shape(format!(
            "output_padding {output_padding} exceeds padding {padding}"
        )));
    }
    if 2 * padding >= full_len + output_padding {
        return Err(Error::Shape(format!(
            "padding {padding} removes the whole {full_len}-sample output"
        )));
    }
    let t_out = full_len - 2 * padding + output_padding;

    let mut out = vec![0.0f32; batch * c_out * t_out];
    for b in 0..batch {
        let xb = x.item(b);
        let out_b = &mut out[b * c_out * t_out..(b + 1) * c_out * t_out];
        par::for_each_chunk_mut(out_b, ROW_BLOCK * t_out, |blk, chunk| {
            let co0 = blk * ROW_BLOCK;
            let rows = chunk.len() / t_out;
            let mut full = vec![0.0f32; rows * full_len];
            for kk in 0..k {
                let a = View {
                    data: weight,
                    offset: co0 * k + kk,
                    row_stride: k,
                    col_stride: c_out * k,
                };
                let bv = View {
                    data: xb,
                    offset: 0,
                    row_stride: time,
                    col_stride: 1,
                };
                gemm_accumulate(rows, c_in, time, a, bv, &mut full, kk, full_len, stride);
            }
            for r in 0..rows {
                let dst = &mut chunk[r * t_out..(r + 1) * t_out];
                dst.copy_from_slice(&full[r * full_len + padding..r * full_len + padding + t_out]);
                if let Some(bias) = bias {
                    let v = bias[co0 + r];
                    dst.iter_mut().for_each(|x| *x += v);
                }
            }
        });
    }
    Tensor3::new(out, (batch, c_out, t_out))
}

/// A convolution layer with owned parameters.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    pub shape: (usize, usize, usize),
    pub params: ConvParams,
}

impl Conv1d {
    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        conv1d(x, &self.weight, self.shape, self.bias.as_deref(), self.params)
    }

    pub fn out_channels(&self) -> usize {
        self.shape.0
    }

    /// Applies a pointwise layer to a single vector (a length-1 sequence).
    pub fn forward_vector(&self, v: &[f32]) -> Result<Vec<f32>> {
        let x = Tensor3::new(v.to_vec(), (1, v.len(), 1))?;
        Ok(self.forward(&x)?.into_data())
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
    pub shape: (usize, usize, usize),
    pub params: TransposeParams,
}

impl ConvTranspose1d {
    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3> {
        conv_transpose1d(
            x,
            &self.weight,
            self.shape,
            self.bias.as_deref(),
            self.params,
        )
    }
}
