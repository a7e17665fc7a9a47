use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::codec::{encode_image, load_image, ImageFormat};
use super::FrameImage;

/// Name of the sidecar describing a frame directory.
pub const META_FILE: &str = "frames.meta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Directory with a `frames.meta` sidecar giving the native frame rate.
    FrameDirectory,
    /// Directory whose frame rate comes from a dataset manifest.
    ManifestListed,
}

/// A pre-decoded video: a directory of `%06d.png` / `%06d.jpg` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSource {
    pub kind: SourceKind,
    pub path: PathBuf,
    pub native_fps: f64,
}

impl FrameSource {
    /// Opens a frame directory, reading its native rate from `frames.meta`.
    pub fn open_directory(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta_path = path.join(META_FILE);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::source_error(&meta_path, e))?;
        let meta = parse_meta(&text).map_err(|reason| Error::source_error(&meta_path, reason))?;
        let source = Self {
            kind: SourceKind::FrameDirectory,
            path: path.to_path_buf(),
            native_fps: meta.fps,
        };
        if let Some(count) = meta.count {
            let found = source.frame_files()?.len();
            if found != count {
                return Err(Error::source_error(
                    path,
                    format!("sidecar declares {count} frames but {found} were found"),
                ));
            }
        }
        Ok(source)
    }

    /// A frame directory whose rate is supplied by the caller (no sidecar).
    pub fn manifest_listed(path: impl Into<PathBuf>, native_fps: f64) -> Result<Self> {
        check_fps(native_fps, "native fps")?;
        Ok(Self {
            kind: SourceKind::ManifestListed,
            path: path.into(),
            native_fps,
        })
    }

    /// Frame files ordered by index. Indices must be contiguous from 0.
    pub fn frame_files(&self) -> Result<Vec<PathBuf>> {
        let entries = fs::read_dir(&self.path).map_err(|e| Error::source_error(&self.path, e))?;
        let mut by_index = BTreeMap::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::source_error(&self.path, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some((stem, ext)) = name.rsplit_once('.') else { continue };
            if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg") {
                continue;
            }
            if stem.len() != 6 || !stem.bytes().all(|b| b.is_ascii_digit()) {
                continue;
            }
            let index: usize = stem.parse().expect("six ascii digits");
            if by_index.insert(index, entry.path()).is_some() {
                return Err(Error::source_error(
                    &self.path,
                    format!("frame {index} present in more than one format"),
                ));
            }
        }
        for (expected, index) in by_index.keys().enumerate() {
            if *index != expected {
                return Err(Error::source_error(
                    &self.path,
                    format!("frame indices not contiguous: expected {expected:06}, found {index:06}"),
                ));
            }
        }
        Ok(by_index.into_values().collect())
    }

    pub fn frame_count(&self) -> Result<usize> {
        Ok(self.frame_files()?.len())
    }

    /// Writes `frames` as a frame directory with a sidecar. Used to build
    /// fixtures and by the examples.
    pub fn write_directory(
        path: impl AsRef<Path>,
        frames: &[FrameImage],
        native_fps: f64,
    ) -> Result<Self> {
        check_fps(native_fps, "native fps")?;
        let path = path.as_ref();
        fs::create_dir_all(path)?;
        for (i, frame) in frames.iter().enumerate() {
            let bytes = encode_image(frame, ImageFormat::Png)?;
            fs::write(path.join(format!("{i:06}.png")), bytes)?;
        }
        fs::write(
            path.join(META_FILE),
            format!("fps={native_fps}\ncount={}\n", frames.len()),
        )?;
        Self::open_directory(path)
    }
}

struct Meta {
    fps: f64,
    count: Option<usize>,
}

fn parse_meta(text: &str) -> std::result::Result<Meta, String> {
    let mut fps = None;
    let mut count = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{line}`"))?;
        match key.trim() {
            "fps" => fps = Some(parse_rational(value.trim())?),
            "count" => {
                count = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| format!("count `{value}` is not an integer"))?,
                )
            }
            _ => {}
        }
    }
    let fps = fps.ok_or("missing `fps=` line")?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(format!("fps must be positive, got {fps}"));
    }
    Ok(Meta { fps, count })
}

/// Parses `30`, `29.97` or `30000/1001`.
pub(crate) fn parse_rational(s: &str) -> std::result::Result<f64, String> {
    let parsed = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            num / den
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    Ok(parsed)
}

fn check_fps(fps: f64, what: &str) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} must be positive, got {fps}")))
    }
}

/// Source indices kept when sampling `count` frames from `native_fps` down
/// to `target_fps`: `floor(k * native / target)` for k = 0, 1, ...
pub fn sample_indices(count: usize, native_fps: f64, target_fps: f64) -> Result<Vec<usize>> {
    check_fps(target_fps, "target fps")?;
    check_fps(native_fps, "native fps")?;
    if target_fps > native_fps {
        return Err(Error::Argument(format!(
            "target fps {target_fps} exceeds native fps {native_fps}"
        )));
    }
    let step = native_fps / target_fps;
    let mut out: Vec<usize> = Vec::new();
    for k in 0.. {
        // tolerance absorbs representation error for rates like 30000/1001
        let index = (k as f64 * step + 1e-9).floor() as usize;
        if index >= count {
            break;
        }
        if out.last() != Some(&index) {
            out.push(index);
        }
    }
    Ok(out)
}

/// Loads the frames selected by [`sample_indices`]. Output frames are
/// renumbered from 0 and keep their source timestamps.
pub fn sample_frames(source: &FrameSource, target_fps: f64) -> Result<Vec<FrameImage>> {
    check_fps(target_fps, "target fps")?;
    let files = source.frame_files()?;
    if files.is_empty() {
        return Err(Error::EmptyVideo);
    }
    sample_indices(files.len(), source.native_fps, target_fps)?
        .into_iter()
        .enumerate()
        .map(|(k, index)| {
            let frame = load_image(&files[index])?;
            Ok(frame.with_position(k, index as f64 / source.native_fps))
        })
        .collect()
}
