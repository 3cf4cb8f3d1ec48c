//! On-disk transcript dumps: a binary file of concatenated payloads (each
//! starting on a byte boundary, bits LSB-first) plus a JSON sidecar
//! describing every segment.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::delivery::{DeliverySegment, DeliveryTranscript, PartTag, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmentEntry {
    pub part_tag: PartTag,
    pub bit_length: usize,
    pub byte_offset: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub file_size: usize,
    pub slack_bits: usize,
    pub total_bits: usize,
    pub segments: Vec<SegmentEntry>,
}

/// Splits a transcript into its payload bytes and sidecar.
pub fn encode(transcript: &DeliveryTranscript) -> (Vec<u8>, Sidecar) {
    let mut bytes = Vec::new();
    let mut segments = Vec::with_capacity(transcript.segments.len());
    for seg in &transcript.segments {
        segments.push(SegmentEntry {
            part_tag: seg.part,
            bit_length: seg.bit_length(),
            byte_offset: bytes.len(),
            provenance: seg.provenance.clone(),
        });
        bytes.extend(seg.payload.to_bytes());
    }
    let sidecar = Sidecar {
        file_size: transcript.file_size,
        slack_bits: transcript.slack_bits,
        total_bits: transcript.total_bits(),
        segments,
    };
    (bytes, sidecar)
}

pub fn decode(bytes: &[u8], sidecar: &Sidecar) -> Result<DeliveryTranscript> {
    let mut segments = Vec::with_capacity(sidecar.segments.len());
    for (i, entry) in sidecar.segments.iter().enumerate() {
        let end = entry.byte_offset + entry.bit_length.div_ceil(8);
        if end > bytes.len() {
            bail!("segment {i} ends at byte {end}, past the {} payload bytes", bytes.len());
        }
        segments.push(DeliverySegment {
            part: entry.part_tag,
            payload: BitArray::from_bytes(&bytes[entry.byte_offset..end], entry.bit_length),
            provenance: entry.provenance.clone(),
        });
    }
    Ok(DeliveryTranscript { segments, file_size: sidecar.file_size, slack_bits: sidecar.slack_bits })
}

pub fn write(transcript: &DeliveryTranscript, payload_path: &Path, sidecar_path: &Path) -> Result<()> {
    let (bytes, sidecar) = encode(transcript);
    fs::write(payload_path, bytes).with_context(|| format!("writing {}", payload_path.display()))?;
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(sidecar_path, json).with_context(|| format!("writing {}", sidecar_path.display()))?;
    Ok(())
}

pub fn read(payload_path: &Path, sidecar_path: &Path) -> Result<DeliveryTranscript> {
    let bytes = fs::read(payload_path).with_context(|| format!("reading {}", payload_path.display()))?;
    let text = fs::read_to_string(sidecar_path).with_context(|| format!("reading {}", sidecar_path.display()))?;
    let sidecar: Sidecar = serde_json::from_str(&text).with_context(|| format!("parsing {}", sidecar_path.display()))?;
    decode(&bytes, &sidecar)
}
