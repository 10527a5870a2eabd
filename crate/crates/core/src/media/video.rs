use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::ppm::{decode_ppm, encode_ppm};
use super::{Image, VideoClip};
use crate::error::{Error, Result};

/// `frame_000001.ppm` for index 1.
pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Reads `frame_000001.ppm ..= frame_{N:06}.ppm` from `dir`. Other files are
/// ignored; numbering must start at 1 and be contiguous.
pub fn load_video(dir: &Path) -> Result<VideoClip> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(parse_frame_index) {
            indexed.insert(index, entry.path());
        }
    }
    if indexed.is_empty() {
        return Err(Error::Ingest(format!("no frame_NNNNNN.ppm files in {}", dir.display())));
    }
    for (expected, &index) in (1..).zip(indexed.keys()) {
        if index != expected {
            return Err(Error::Ingest(format!("missing frame {expected}")));
        }
    }
    let mut frames = Vec::with_capacity(indexed.len());
    for (index, path) in indexed {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let frame = decode_ppm(&bytes).map_err(|e| Error::Frame {
            index,
            source: Box::new(e),
        })?;
        frames.push(frame);
    }
    VideoClip::new(frames)
}

/// Writes frames as `frame_000001.ppm ..` into `dir`, creating it if needed.
pub fn save_frames(dir: &Path, frames: &[Image]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i + 1));
        fs::write(&path, encode_ppm(frame)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
