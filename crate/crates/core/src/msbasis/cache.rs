use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::offline::{build_offline_basis, OfflineBasis, RegionModes};
use crate::field_io::PermeabilityField;
use crate::grid_fem::{CoarseGrid, FineGrid, NodeBox};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MSBC";
const VERSION: u32 = 1;

/// Cache key over the field values and basis sizes.
pub fn cache_key(field: &PermeabilityField, n_f: usize, n_c: usize, l_perm: usize, l_add: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(field.content_hash());
    for v in [n_f, n_c, l_perm, l_add] {
        h.update((v as u64).to_le_bytes());
    }
    h.finalize().into()
}

fn hex(key: &[u8; 32]) -> String {
    key.iter().map(|b| format!("{b:02x}")).collect()
}

/// Directory from `MSBAYES_CACHE`, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("MSBAYES_CACHE").map(PathBuf::from)
}

pub fn cache_path(dir: &Path, key: &[u8; 32]) -> PathBuf {
    dir.join(format!("basis-{}.msbc", &hex(key)[..16]))
}

pub fn write_cache(path: &Path, key: &[u8; 32], basis: &OfflineBasis) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_all(key)?;
    w.write_u32::<LittleEndian>(basis.l_perm as u32)?;
    w.write_u32::<LittleEndian>(basis.l_add as u32)?;
    w.write_u32::<LittleEndian>(basis.regions.len() as u32)?;
    for r in &basis.regions {
        for v in [r.bx.x0, r.bx.x1, r.bx.y0, r.bx.y1] {
            w.write_u32::<LittleEndian>(v as u32)?;
        }
        w.write_u32::<LittleEndian>(r.eigenvalues.len() as u32)?;
        for &l in &r.eigenvalues {
            w.write_f64::<LittleEndian>(l)?;
        }
        for m in &r.modes {
            for &v in m {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    w.flush()?;
    drop(w);
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Reads a cache file; returns `Ok(None)` when the key does not match.
pub fn read_cache(path: &Path, key: &[u8; 32], fine: &FineGrid) -> Result<Option<OfflineBasis>> {
    let bytes = std::fs::read(path)?;
    let mut r = bytes.as_slice();
    let fmt = |e: std::io::Error| Error::Format(format!("basis cache {}: {e}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(fmt)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{} is not a basis cache", path.display())));
    }
    let version = r.read_u32::<LittleEndian>().map_err(fmt)?;
    if version != VERSION {
        return Err(Error::Format(format!("basis cache version {version} is not supported")));
    }
    let mut stored = [0u8; 32];
    r.read_exact(&mut stored).map_err(fmt)?;
    if &stored != key {
        return Ok(None);
    }
    let l_perm = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
    let l_add = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
    let n_regions = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
    let mut regions = Vec::with_capacity(n_regions);
    for _ in 0..n_regions {
        let mut b = [0usize; 4];
        for v in &mut b {
            *v = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        }
        let bx = NodeBox { x0: b[0], x1: b[1], y0: b[2], y1: b[3] };
        let n_modes = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        let mut eigenvalues = vec![0.0; n_modes];
        r.read_f64_into::<LittleEndian>(&mut eigenvalues).map_err(fmt)?;
        let mut modes = Vec::with_capacity(n_modes);
        for _ in 0..n_modes {
            let mut m = vec![0.0; bx.len()];
            r.read_f64_into::<LittleEndian>(&mut m).map_err(fmt)?;
            modes.push(m);
        }
        regions.push(RegionModes { bx, eigenvalues, modes });
    }
    if !r.is_empty() {
        return Err(Error::Format(format!("basis cache {} has trailing bytes", path.display())));
    }
    Ok(Some(OfflineBasis::from_regions(fine, regions, l_perm, l_add)))
}

/// Reuses a cached basis from `dir` when present, otherwise builds and stores it.
pub fn load_or_build(
    dir: Option<&Path>,
    fine: &FineGrid,
    coarse: &CoarseGrid,
    field: &PermeabilityField,
    l_perm: usize,
    l_add: usize,
) -> Result<OfflineBasis> {
    let key = cache_key(field, fine.n(), coarse.n(), l_perm, l_add);
    if let Some(dir) = dir {
        let path = cache_path(dir, &key);
        if path.exists() {
            match read_cache(&path, &key, fine) {
                Ok(Some(b)) => return Ok(b),
                Ok(None) => log::info!("basis cache key mismatch at {}", path.display()),
                Err(e) => log::warn!("ignoring unreadable basis cache: {e}"),
            }
        }
        let basis = build_offline_basis(fine, coarse, field, l_perm, l_add)?;
        write_cache(&path, &key, &basis)?;
        return Ok(basis);
    }
    build_offline_basis(fine, coarse, field, l_perm, l_add)
}
