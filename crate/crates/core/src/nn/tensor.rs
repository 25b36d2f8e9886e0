use crate::error::{Error, Result};

/// Dense `(batch, channels, time)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    data: Vec<f32>,
    shape: (usize, usize, usize),
}

impl Tensor3 {
    pub fn new(data: Vec<f32>, shape: (usize, usize, usize)) -> Result<Self> {
        let (b, c, t) = shape;
        let n = b
            .checked_mul(c)
            .and_then(|v| v.checked_mul(t))
            .ok_or_else(|| Error::Shape(format!("shape {shape:?} overflows")))?;
        if data.len() != n {
            return Err(Error::Shape(format!(
                "tensor data has {} values, shape {shape:?} needs {n}",
                data.len()
            )));
        }
        Ok(Tensor3 { data, shape })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Self {
        Tensor3 {
            data: vec![0.0; shape.0 * shape.1 * shape.2],
            shape,
        }
    }

    /// Builds a `(1, channels, time)` tensor from frame-major `time × channels` rows.
    pub fn from_frames(frames: &[f32], time: usize, channels: usize) -> Result<Self> {
        if frames.len() != time * channels {
            return Err(Error::Shape(format!(
                "{} values do not form {time} frames of {channels}",
                frames.len()
            )));
        }
        let mut data = vec![0.0; frames.len()];
        for t in 0..time {
            for c in 0..channels {
                data[c * time + t] = frames[t * channels + c];
            }
        }
        Tensor3::new(data, (1, channels, time))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape.0
    }

    pub fn channels(&self) -> usize {
        self.shape.1
    }

    pub fn time(&self) -> usize {
        self.shape.2
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// `(channels, time)` slice of one batch item.
    pub fn item(&self, b: usize) -> &[f32] {
        let n = self.shape.1 * self.shape.2;
        &self.data[b * n..(b + 1) * n]
    }

    /// Contiguous time series of one channel.
    pub fn row(&self, b: usize, c: usize) -> &[f32] {
        let t = self.shape.2;
        let start = (b * self.shape.1 + c) * t;
        &self.data[start..start + t]
    }

    /// Channels `[start, start + len)`.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Result<Tensor3> {
        let (b, c, t) = self.shape;
        if start + len > c {
            return Err(Error::Shape(format!(
                "channel range {start}..{} exceeds {c} channels",
                start + len
            )));
        }
        let mut data = Vec::with_capacity(b * len * t);
        for bi in 0..b {
            let base = bi * c * t;
            data.extend_from_slice(&self.data[base + start * t..base + (start + len) * t]);
        }
        Tensor3::new(data, (b, len, t))
    }

    /// Concatenates along channels.
    pub fn cat_channels(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
        if a.batch() != b.batch() || a.time() != b.time() {
            return Err(Error::Shape(format!(
                "cannot concatenate {:?} and {:?} along channels",
                a.shape, b.shape
            )));
        }
        let t = a.time();
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        for bi in 0..a.batch() {
            data.extend_from_slice(a.item(bi));
            data.extend_from_slice(b.item(bi));
        }
        Tensor3::new(data, (a.batch(), a.channels() + b.channels(), t))
    }

    /// Reverses channel order.
    pub fn flip_channels(&self) -> Tensor3 {
        let (b, c, _) = self.shape;
        let mut data = Vec::with_capacity(self.data.len());
        for bi in 0..b {
            for ci in (0..c).rev() {
                data.extend_from_slice(self.row(bi, ci));
            }
        }
        Tensor3 {
            data,
            shape: self.shape,
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor3 {
        Tensor3 {
            data: self.data.iter().map(|&v| f(v)).collect(),
            shape: self.shape,
        }
    }

    pub fn add_assign(&mut self, other: &Tensor3) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} to {:?}",
                other.shape, self.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds `bias[c]` to every time step of channel `c`.
    pub fn add_channel_bias(&mut self, bias: &[f32]) -> Result<()> {
        let (b, c, t) = self.shape;
        if bias.len() != c {
            return Err(Error::Shape(format!(
                "bias of {} values for {c} channels",
                bias.len()
            )));
        }
        for bi in 0..b {
            for (ci, &v) in bias.iter().enumerate() {
                let start = (bi * c + ci) * t;
                for x in &mut self.data[start..start + t] {
                    *x += v;
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Left reflect padding of `pad` samples along time.
    pub fn reflect_pad_left(&self, pad: usize) -> Result<Tensor3> {
        let (b, c, t) = self.shape;
        if pad >= t {
            return Err(Error::Shape(format!(
                "reflect padding {pad} needs more than {t} time steps"
            )));
        }
        let mut data = Vec::with_capacity(b * c * (t + pad));
        for bi in 0..b {
            for ci in 0..c {
                let row = self.row(bi, ci);
                data.extend((1..=pad).rev().map(|i| row[i]));
                data.extend_from_slice(row);
            }
        }
        Tensor3::new(data, (b, c, t + pad))
    }
}

pub fn leaky_relu(x: &Tensor3, slope: f32) -> Tensor3 {
    x.map(|v| if v >= 0.0 { v } else { v * slope })
}
