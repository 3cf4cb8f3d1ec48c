//! A placed network: configuration, library contents, placement and the
//! induced subfile partition, built once per seed and shared read-only.

use crate::bits::BitArray;
use crate::config::SystemConfig;
use crate::partition::SubfilePartition;
use crate::placement::{CachePlacement, Library, PlacementError, PlacementMode};
use crate::subset::SubfileIndex;

#[derive(Debug, Clone)]
pub struct CachedNetwork {
    config: SystemConfig,
    library: Library,
    placement: CachePlacement,
    partition: SubfilePartition,
}

impl CachedNetwork {
    pub fn build(config: &SystemConfig, seed: u64, mode: PlacementMode) -> Result<Self, PlacementError> {
        let library = Library::random(config.num_files(), config.file_size_bits(), seed);
        let placement = CachePlacement::random(config, seed, mode)?;
        Ok(Self::from_parts(config.clone(), library, placement))
    }

    pub fn from_parts(config: SystemConfig, library: Library, placement: CachePlacement) -> Self {
        assert_eq!(library.num_files(), config.num_files());
        assert_eq!(placement.num_users(), config.num_users());
        let partition = SubfilePartition::from_placement(&placement);
        Self { config, library, placement, partition }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn library(&self) -> &Library {
        &self.library
    }

    pub fn placement(&self) -> &CachePlacement {
        &self.placement
    }

    pub fn partition(&self) -> &SubfilePartition {
        &self.partition
    }

    pub fn file_size(&self) -> usize {
        self.config.file_size_bits()
    }

    /// Contents of `W_{file,V}` as held by the server.
    pub fn subfile(&self, index: SubfileIndex) -> BitArray {
        self.library.file(index.file).gather(self.partition.bits(index))
    }
}
