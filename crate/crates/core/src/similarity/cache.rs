use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;

use crate::error::Result;
use crate::normalizer::{FragmentId, Granularity};

use super::ResidentMatrix;

/// Anything that can materialize a fragment matrix at a fixed version.
pub trait MatrixSource {
    fn version(&self) -> u64;
    fn load_matrix(&self, granularity: Granularity) -> Result<ResidentMatrix<FragmentId>>;
}

/// Resident matrices keyed by (granularity, version). Only the newest version
/// per granularity is kept; requests for an older version are served by a
/// fresh load that is not cached.
#[derive(Debug, Default)]
pub struct MatrixCache {
    entries: RwLock<HashMap<Granularity, Arc<ResidentMatrix<FragmentId>>>>,
    loads: AtomicU64,
}

impl MatrixCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get<S: MatrixSource + ?Sized>(
        &self,
        source: &S,
        granularity: Granularity,
    ) -> Result<Arc<ResidentMatrix<FragmentId>>> {
        let version = source.version();
        if let Some(m) = self.entries.read().get(&granularity) {
            if m.version() == version {
                return Ok(Arc::clone(m));
            }
        }
        self.loads.fetch_add(1, Ordering::Relaxed);
        let loaded = Arc::new(source.load_matrix(granularity)?.with_version(version));
        let mut entries = self.entries.write();
        match entries.get(&granularity) {
            Some(m) if m.version() == version => Ok(Arc::clone(m)),
            Some(m) if m.version() > version => Ok(loaded),
            _ => {
                entries.insert(granularity, Arc::clone(&loaded));
                Ok(loaded)
            }
        }
    }

    /// Number of materializations performed so far.
    pub fn loads(&self) -> u64 {
        self.loads.load(Ordering::Relaxed)
    }

    pub fn clear(&self) {
        self.entries.write().clear();
    }
}
