//! Binary and CSV encodings of frames, measurements, plans and masks.
//!
//! All multi-byte values are little endian.
//!
//! * `.radf`  - 400x576 row-major `f32` polar frame.
//! * `.rmeas` - `frame_id: u64`, `seed: u64`, 240 x `m: u16`, then every
//!   block's values as `f32`, blocks in linear order.
//! * `.rplan` - `S: u32`, `I: u16`, `O: u16`, `x1: f32`, `x2: f32`, then
//!   240 x (`rate: f32`, `m: u16`).

use std::fs;
use std::path::Path;

use radcs_core::cs::{BlockMeasurement, FrameMeasurements};
use radcs_core::geometry::{BlockIndex, BlockSet, PolarFrame, FRAME_LEN, N_AZIMUTH, N_BLOCKS, N_RANGE};
use radcs_core::lp::{PlanKind, SamplingPlan};

use crate::error::{Error, Result};

pub fn encode_radf(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_radf(bytes: &[u8]) -> std::result::Result<Vec<f32>, String> {
    if bytes.len() != FRAME_LEN * 4 {
        return Err(format!("expected {} bytes, found {}", FRAME_LEN * 4, bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_radf(path: &Path, data: &[f32]) -> Result<()> {
    fs::write(path, encode_radf(data)).map_err(Error::io(path))
}

pub fn read_radf(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    decode_radf(&bytes).map_err(|m| Error::format(path, m))
}

/// 8-bit grayscale PNG, 576 columns (range) by 400 rows (azimuth).
pub fn read_png_frame(path: &Path) -> Result<Vec<f32>> {
    let img = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => return Err(Error::format(path, format!("expected 8-bit grayscale, found {:?}", other.color()))),
    };
    if gray.width() as usize != N_RANGE || gray.height() as usize != N_AZIMUTH {
        return Err(Error::format(
            path,
            format!("expected {N_RANGE}x{N_AZIMUTH} pixels, found {}x{}", gray.width(), gray.height()),
        ));
    }
    Ok(gray.into_raw().into_iter().map(f32::from).collect())
}

/// Load a `.radf` or `.png` polar frame.
pub fn read_frame(path: &Path, frame_id: u64, timestamp_s: f64) -> Result<PolarFrame> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let data = match ext.as_str() {
        "radf" => read_radf(path)?,
        "png" => read_png_frame(path)?,
        _ => return Err(Error::format(path, "frames must be .radf or .png")),
    };
    PolarFrame::new(frame_id, timestamp_s, data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn encode_rmeas(meas: &FrameMeasurements) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 2 * N_BLOCKS + 4 * meas.total_values());
    out.extend_from_slice(&meas.frame_id.to_le_bytes());
    out.extend_from_slice(&meas.seed.to_le_bytes());
    for b in &meas.blocks {
        out.extend_from_slice(&(b.m as u16).to_le_bytes());
    }
    for b in &meas.blocks {
        for &v in &b.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_rmeas(bytes: &[u8], timestamp_s: f64) -> std::result::Result<FrameMeasurements, String> {
    let header = 16 + 2 * N_BLOCKS;
    if bytes.len() < header {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let frame_id = u64_at(0);
    let seed = u64_at(8);
    let counts: Vec<usize> = (0..N_BLOCKS)
        .map(|i| u16::from_le_bytes([bytes[16 + 2 * i], bytes[17 + 2 * i]]) as usize)
        .collect();
    let total: usize = counts.iter().sum();
    if bytes.len() != header + 4 * total {
        return Err(format!("header announces {total} values but the payload holds {}", (bytes.len() - header) / 4));
    }
    let mut values = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut blocks = Vec::with_capacity(N_BLOCKS);
    for (i, &m) in counts.iter().enumerate() {
        let block = BlockIndex::from_linear(i).map_err(|e| e.to_string())?;
        blocks.push(BlockMeasurement {
            block,
            frame_id,
            seed,
            m,
            values: values.by_ref().take(m).collect(),
        });
    }
    Ok(FrameMeasurements {
        frame_id,
        timestamp_s,
        seed,
        blocks,
    })
}

/// Flat view of a sampling plan as stored in `.rplan`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanFile {
    pub budget: u32,
    pub important: u16,
    pub other: u16,
    pub x1: f32,
    pub x2: f32,
    pub rates: Vec<f32>,
    pub counts: Vec<u16>,
}

impl PlanFile {
    pub fn from_plan(plan: &SamplingPlan) -> Self {
        let important = plan.important().len();
        let (x1, x2) = match &plan.kind {
            PlanKind::Full => (1.0, 1.0),
            PlanKind::Uniform => (plan.rates()[0], plan.rates()[0]),
            PlanKind::Adaptive { solution, .. } => (solution.x1, solution.x2),
        };
        Self {
            budget: plan.target_budget() as u32,
            important: important as u16,
            other: (N_BLOCKS - important) as u16,
            x1: x1 as f32,
            x2: x2 as f32,
            rates: plan.rates().iter().map(|&r| r as f32).collect(),
            counts: plan.counts().iter().map(|&m| m as u16).collect(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|&m| m as usize).sum()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 6 * N_BLOCKS);
        out.extend_from_slice(&self.budget.to_le_bytes());
        out.extend_from_slice(&self.important.to_le_bytes());
        out.extend_from_slice(&self.other.to_le_bytes());
        out.extend_from_slice(&self.x1.to_le_bytes());
        out.extend_from_slice(&self.x2.to_le_bytes());
        for (r, m) in self.rates.iter().zip(&self.counts) {
            out.extend_from_slice(&r.to_le_bytes());
            out.extend_from_slice(&m.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() != 16 + 6 * N_BLOCKS {
            return Err(format!("expected {} bytes, found {}", 16 + 6 * N_BLOCKS, bytes.len()));
        }
        let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let (mut rates, mut counts) = (Vec::with_capacity(N_BLOCKS), Vec::with_capacity(N_BLOCKS));
        for i in 0..N_BLOCKS {
            let at = 16 + 6 * i;
            rates.push(f32_at(at));
            counts.push(u16_at(at + 4));
        }
        Ok(Self {
            budget: u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
            important: u16_at(4),
            other: u16_at(6),
            x1: f32_at(8),
            x2: f32_at(12),
            rates,
            counts,
        })
    }
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// One row per block: position, rate, count and importance.
pub fn plan_csv(plan: &SamplingPlan) -> Vec<u8> {
    let rows = BlockIndex::all().map(|b| {
        vec![
            b.az_block.to_string(),
            b.range_block.to_string(),
            plan.rate(b).to_string(),
            plan.count(b).to_string(),
            u8::from(plan.important().contains(b)).to_string(),
        ]
    });
    csv_bytes(&["block_row", "block_col", "rate", "m", "important"], rows)
}

pub fn mask_csv(mask: &BlockSet) -> Vec<u8> {
    let rows = BlockIndex::all().map(|b| {
        vec![
            b.az_block.to_string(),
            b.range_block.to_string(),
            u8::from(mask.contains(b)).to_string(),
        ]
    });
    csv_bytes(&["block_row", "block_col", "important"], rows)
}

pub fn mask_hex(mask: &BlockSet) -> String {
    mask.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn mask_from_hex(s: &str) -> Option<BlockSet> {
    if s.len() != N_BLOCKS / 4 || !s.is_ascii() {
        return None;
    }
    let mut bytes = [0u8; N_BLOCKS / 8];
    for (i, b) in bytes.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(BlockSet::from_bytes(&bytes))
}
