//! Panorama loading and the byte-budgeted LRU cache in front of it.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;

use crate::panograph::{self, GraphError};

/// Anything that can produce the equirectangular image of a pano.
pub trait PanoSource: Send + Sync {
    fn load(&self, id: &str) -> Result<RgbImage, GraphError>;
}

/// Reads PNG panoramas from a container directory.
#[derive(Debug, Clone)]
pub struct DirPanos {
    dir: PathBuf,
}

impl DirPanos {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl PanoSource for DirPanos {
    fn load(&self, id: &str) -> Result<RgbImage, GraphError> {
        panograph::read_image(&self.dir, id)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

/// Least-recently-used cache of decoded panoramas bounded by pixel bytes.
///
/// An image larger than the whole budget is returned but never retained, so
/// a zero budget disables caching.
pub struct PanoCache {
    source: Arc<dyn PanoSource>,
    budget_bytes: usize,
    used_bytes: usize,
    entries: HashMap<String, (Arc<RgbImage>, u64)>,
    recency: BTreeMap<u64, String>,
    tick: u64,
    stats: CacheStats,
}

impl PanoCache {
    pub fn new(source: Arc<dyn PanoSource>, budget_bytes: usize) -> Self {
        Self {
            source,
            budget_bytes,
            used_bytes: 0,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
            stats: CacheStats::default(),
        }
    }

    pub fn get(&mut self, id: &str) -> Result<Arc<RgbImage>, GraphError> {
        self.tick += 1;
        if let Some((img, last)) = self.entries.get_mut(id) {
            self.recency.remove(last);
            *last = self.tick;
            self.recency.insert(self.tick, id.to_string());
            self.stats.hits += 1;
            return Ok(Arc::clone(img));
        }
        self.stats.misses += 1;
        let img = Arc::new(self.source.load(id)?);
        let size = img.as_raw().len();
        if size <= self.budget_bytes {
            while self.used_bytes + size > self.budget_bytes {
                self.evict_oldest();
            }
            self.used_bytes += size;
            self.entries.insert(id.to_string(), (Arc::clone(&img), self.tick));
            self.recency.insert(self.tick, id.to_string());
        }
        Ok(img)
    }

    fn evict_oldest(&mut self) {
        let Some((_, id)) = self.recency.pop_first() else {
            return;
        };
        if let Some((img, _)) = self.entries.remove(&id) {
            self.used_bytes -= img.as_raw().len();
            self.stats.evictions += 1;
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn used_bytes(&self) -> usize {
        self.used_bytes
    }

    pub fn budget_bytes(&self) -> usize {
        self.budget_bytes
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.recency.clear();
        self.used_bytes = 0;
    }
}
