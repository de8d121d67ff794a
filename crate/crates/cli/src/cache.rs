//! On-disk cache of sampled clouds and atomic file writes.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gdlab::sampler::{sample_multiscale, PointCloud, ScaleSchedule};
use gdlab::setdesc::SetDescription;
use gdlab::Result;

pub const CACHE_ENV: &str = "GDLAB_CACHE_DIR";

/// Cache directory: `$GDLAB_CACHE_DIR`, else `$XDG_CACHE_HOME/gdlab`, else `~/.cache/gdlab`.
pub fn cache_dir() -> PathBuf {
    if let Some(d) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(d);
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(d).join("gdlab");
    }
    match std::env::var_os("HOME") {
        Some(h) => PathBuf::from(h).join(".cache").join("gdlab"),
        None => std::env::temp_dir().join("gdlab-cache"),
    }
}

/// File name of the cloud sampled from `desc` with `sched` and `seed`.
pub fn cloud_key(desc: &SetDescription, sched: &ScaleSchedule, seed: u64) -> String {
    format!(
        "cloud-{:016x}-{seed}-{:016x}-{}-{}.gdcl",
        desc.content_hash(),
        sched.r0.to_bits(),
        sched.band_count,
        sched.per_band
    )
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut w)?;
        let file = w.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Loads the cloud from the cache or samples and stores it; `use_cache` off
/// bypasses the cache in both directions. A corrupt entry is resampled.
pub fn load_or_sample(desc: &SetDescription, sched: &ScaleSchedule, seed: u64, use_cache: bool) -> Result<(PointCloud, bool)> {
    if !use_cache {
        return Ok((sample_multiscale(desc, sched, seed)?, false));
    }
    let path = cache_dir().join(cloud_key(desc, sched, seed));
    if let Ok(f) = fs::File::open(&path) {
        if let Ok(cloud) = PointCloud::read_cache(std::io::BufReader::new(f)) {
            if cloud.desc_hash == desc.content_hash() && cloud.seed == seed {
                return Ok((cloud, true));
            }
        }
    }
    let cloud = sample_multiscale(desc, sched, seed)?;
    write_atomic(&path, |w| cloud.write_cache(w))?;
    Ok((cloud, false))
}
