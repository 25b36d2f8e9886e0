//! 16-bit PCM mono 16 kHz WAV input and output.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result, WavError};

fn spec() -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn malformed(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => WavError::Malformed(io.to_string()).into(),
        hound::Error::Unsupported => WavError::UnsupportedCodec("format tag not supported".into()).into(),
        other => WavError::Malformed(other.to_string()).into(),
    }
}

fn decode<R: Read + Seek>(reader: R) -> Result<Waveform> {
    let reader = hound::WavReader::new(reader).map_err(malformed)?;
    let s = reader.spec();
    if s.sample_format != hound::SampleFormat::Int || s.bits_per_sample != 16 {
        return Err(WavError::UnsupportedCodec(format!(
            "{:?} {}-bit",
            s.sample_format, s.bits_per_sample
        ))
        .into());
    }
    if s.channels != 1 {
        return Err(WavError::UnsupportedChannels(s.channels).into());
    }
    if s.sample_rate != SAMPLE_RATE {
        return Err(WavError::UnsupportedRate(s.sample_rate).into());
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|r| r.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(malformed)?;
    Waveform::new(samples)
}

pub fn wav_from_bytes(bytes: &[u8]) -> Result<Waveform> {
    decode(Cursor::new(bytes))
}

pub fn wav_read(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    wav_from_bytes(&bytes)
}

fn quantize(x: f32) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn wav_to_bytes(wave: &Waveform) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec()).map_err(malformed)?;
        let mut w16 = w.get_i16_writer(wave.len() as u32);
        for &x in wave.samples() {
            w16.write_sample(quantize(x));
        }
        w16.flush().map_err(malformed)?;
        w.finalize().map_err(malformed)?;
    }
    Ok(buf.into_inner())
}

pub fn wav_write(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, wav_to_bytes(wave)?).map_err(|e| Error::io(path, e))
}
