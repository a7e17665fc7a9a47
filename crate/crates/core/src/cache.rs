//! Content-addressed on-disk cache for detector and scorer results.
//!
//! Keys are SHA-256 digests of everything that determines a backend reply:
//! pixels and model name for detections; window pixels, question, model and
//! prompt template for scores. Entries live at `<root>/<stage>/<key>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::media::FrameImage;
use crate::prompt::PromptTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStage {
    Detections,
    Scores,
}

impl CacheStage {
    pub const ALL: [CacheStage; 2] = [CacheStage::Detections, CacheStage::Scores];

    pub fn dir_name(self) -> &'static str {
        match self {
            CacheStage::Detections => "detections",
            CacheStage::Scores => "scores",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Length-prefixed fields so that field boundaries cannot be confused.
struct KeyBuilder(Sha256);

impl KeyBuilder {
    fn new(domain: &str) -> Self {
        let mut b = Self(Sha256::new());
        b.field(domain.as_bytes());
        b
    }

    fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.update((bytes.len() as u64).to_le_bytes());
        self.0.update(bytes);
        self
    }

    fn image(&mut self, image: &FrameImage) -> &mut Self {
        self.field(&image.width().to_le_bytes())
            .field(&image.height().to_le_bytes())
            .field(image.pixels())
    }

    fn finish(self) -> CacheKey {
        CacheKey(hex::encode(self.0.finalize()))
    }
}

pub fn detection_key(frame: &FrameImage, detector_model: &str) -> CacheKey {
    let mut b = KeyBuilder::new("detections/v1");
    b.image(frame).field(detector_model.as_bytes());
    b.finish()
}

pub fn score_key(
    window_image: &FrameImage,
    question: &str,
    scorer_model: &str,
    template: &PromptTemplate,
) -> CacheKey {
    let mut b = KeyBuilder::new("scores/v1");
    b.image(window_image)
        .field(question.as_bytes())
        .field(scorer_model.as_bytes())
        .field(template.text().as_bytes());
    b.finish()
}

#[derive(Debug, PartialEq)]
pub enum Lookup<T> {
    Hit(T),
    Miss,
    /// The entry exists but could not be read back; treat as a miss.
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    key: CacheKey,
    value: T,
}

#[derive(Debug, Clone)]
pub struct ResultCache {
    root: PathBuf,
}

impl ResultCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for stage in CacheStage::ALL {
            fs::create_dir_all(root.join(stage.dir_name()))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, stage: CacheStage, key: &CacheKey) -> PathBuf {
        self.root.join(stage.dir_name()).join(format!("{key}.json"))
    }

    pub fn get<T: DeserializeOwned>(&self, stage: CacheStage, key: &CacheKey) -> Lookup<T> {
        let path = self.entry_path(stage, key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(format!("{}: {e}", path.display())),
        };
        match serde_json::from_slice::<Entry<T>>(&bytes) {
            Ok(entry) if entry.key == *key => Lookup::Hit(entry.value),
            Ok(entry) => Lookup::Corrupt(format!(
                "{}: stored key {} does not match",
                path.display(),
                entry.key
            )),
            Err(e) => Lookup::Corrupt(format!("{}: {e}", path.display())),
        }
    }

    /// Writes an entry atomically (temp file + rename).
    pub fn put<T: Serialize>(&self, stage: CacheStage, key: &CacheKey, value: &T) -> Result<()> {
        let path = self.entry_path(stage, key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let bytes = serde_json::to_vec(&Entry {
            key: key.clone(),
            value,
        })
        .map_err(std::io::Error::other)?;
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Number of entries per stage.
    pub fn entry_counts(&self) -> Result<Vec<(CacheStage, usize)>> {
        CacheStage::ALL
            .iter()
            .map(|&stage| {
                let dir = self.root.join(stage.dir_name());
                let n = fs::read_dir(&dir)?
                    .filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count();
                Ok((stage, n))
            })
            .collect()
    }

    /// Removes all entries; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        let mut removed = 0;
        for stage in CacheStage::ALL {
            let dir = self.root.join(stage.dir_name());
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_file() {
                    fs::remove_file(&path)?;
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: u8) -> FrameImage {
        FrameImage::filled(4, 4, [v, v, v]).unwrap()
    }

    #[test]
    fn keys_depend_on_every_component() {
        let t = PromptTemplate::new("t {question}");
        let base = score_key(&img(1), "q", "m", &t);
        assert_eq!(base, score_key(&img(1), "q", "m", &t));
        assert_ne!(base, score_key(&img(2), "q", "m", &t));
        assert_ne!(base, score_key(&img(1), "q2", "m", &t));
        assert_ne!(base, score_key(&img(1), "q", "m2", &t));
        assert_ne!(base, score_key(&img(1), "q", "m", &PromptTemplate::new("u {question}")));
        assert_ne!(detection_key(&img(1), "m"), detection_key(&img(1), "m2"));
        // field boundaries matter
        assert_ne!(score_key(&img(1), "ab", "c", &t), score_key(&img(1), "a", "bc", &t));
        // frame position is not part of the key
        assert_eq!(detection_key(&img(1), "m"), detection_key(&img(1).with_position(9, 3.0), "m"));
    }

    #[test]
    fn put_get_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        let key = detection_key(&img(1), "m");
        assert_eq!(cache.get::<Vec<u32>>(CacheStage::Detections, &key), Lookup::Miss);
        cache.put(CacheStage::Detections, &key, &vec![1u32, 2, 3]).unwrap();
        assert_eq!(cache.get(CacheStage::Detections, &key), Lookup::Hit(vec![1u32, 2, 3]));
        assert_eq!(cache.get::<Vec<u32>>(CacheStage::Scores, &key), Lookup::Miss);
        assert_eq!(
            cache.entry_counts().unwrap(),
            vec![(CacheStage::Detections, 1), (CacheStage::Scores, 0)]
        );
        assert_eq!(cache.clear().unwrap(), 1);
        assert_eq!(cache.get::<Vec<u32>>(CacheStage::Detections, &key), Lookup::Miss);
    }

    #[test]
    fn corrupt_entries_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResultCache::open(dir.path()).unwrap();
        let key = detection_key(&img(1), "m");
        fs::write(cache.entry_path(CacheStage::Detections, &key), b"{ not json").unwrap();
        assert!(matches!(cache.get::<u32>(CacheStage::Detections, &key), Lookup::Corrupt(_)));
        // an entry filed under the wrong key
        let other = detection_key(&img(2), "m");
        cache.put(CacheStage::Detections, &other, &7u32).unwrap();
        fs::copy(
            cache.entry_path(CacheStage::Detections, &other),
            cache.entry_path(CacheStage::Detections, &key),
        )
        .unwrap();
        assert!(matches!(cache.get::<u32>(CacheStage::Detections, &key), Lookup::Corrupt(_)));
        cache.put(CacheStage::Detections, &key, &5u32).unwrap();
        assert_eq!(cache.get(CacheStage::Detections, &key), Lookup::Hit(5u32));
    }
}
