//! Multiscale partition of unity, local spectral problems and the offline space.

mod cache;
mod offline;
mod pou;
mod spectral;

pub use cache::{cache_dir_from_env, cache_key, cache_path, load_or_build, read_cache, write_cache};
pub use offline::{build_offline_basis, OfflineBasis, RegionModes};
pub use pou::{build_pou, kappa_tilde, PartitionOfUnity};
pub use spectral::{build_spectral_basis, local_pencil, NeighborhoodBasis};
