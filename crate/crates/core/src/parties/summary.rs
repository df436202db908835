//! Windowed summaries of sensor readings and the file format that carries them.

use crate::codec::{CodecError, Reader, Writer};
use crate::DId;

/// Bytes per summary record: window index, reading count, mean.
pub const RECORD_LEN: usize = 16;
/// File header: device id and record count.
pub const HEADER_LEN: usize = DId::LEN + 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub window: u32,
    pub count: u32,
    pub mean: f64,
}

/// Arithmetic mean over consecutive windows of `window` readings; the last
/// window may be short.
pub fn summarize(readings: &[f64], window: usize) -> Vec<Summary> {
    assert!(window > 0, "window length must be positive");
    readings
        .chunks(window)
        .enumerate()
        .map(|(i, w)| Summary { window: i as u32, count: w.len() as u32, mean: w.iter().sum::<f64>() / w.len() as f64 })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryFile {
    pub did: DId,
    pub records: Vec<Summary>,
}

impl SummaryFile {
    pub fn natural_len(&self) -> usize {
        HEADER_LEN + RECORD_LEN * self.records.len()
    }

    /// Encodes and zero-pads to `target_len`; `None` if the records do not fit.
    pub fn encode(&self, target_len: usize) -> Option<Vec<u8>> {
        if target_len < self.natural_len() {
            return None;
        }
        let mut w = Writer::new().did(&self.did).u32(self.records.len() as u32);
        for r in &self.records {
            w = w.u32(r.window).u32(r.count).u64(r.mean.to_bits());
        }
        let mut out = w.finish();
        out.resize(target_len, 0);
        Some(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let did = r.did()?;
        let n = r.u32()? as usize;
        if n > r.remaining() / RECORD_LEN {
            return Err(CodecError::Invalid(format!("{n} records do not fit")));
        }
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            records.push(Summary { window: r.u32()?, count: r.u32()?, mean: f64::from_bits(r.u64()?) });
        }
        let pad = r.take(r.remaining())?;
        if pad.iter().any(|b| *b != 0) {
            return Err(CodecError::Invalid("non-zero padding".into()));
        }
        Ok(SummaryFile { did, records })
    }
}
