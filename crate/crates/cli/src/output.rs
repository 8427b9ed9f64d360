use std::io::Write;
use std::path::{Path, PathBuf};

use qps::{Error, Result};

/// Writes `contents` to `dir/name` through a temporary file in the same directory.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| Error::Io(e.error))?;
    Ok(target)
}

pub fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<PathBuf> {
    write_atomic(dir, name, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Reads a file referenced from a sidecar, relative to the sidecar's directory.
pub fn read_sibling(sidecar: &Path, name: &str) -> Result<Vec<u8>> {
    let rel = Path::new(name);
    if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
        return Err(Error::Invalid(format!("sidecar references '{name}' outside its directory")));
    }
    let base = sidecar.parent().unwrap_or_else(|| Path::new("."));
    Ok(std::fs::read(base.join(rel))?)
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_paths_stay_local() {
        let d = tempfile::tempdir().unwrap();
        write_atomic(d.path(), "a.csv", "x\n").unwrap();
        let side = d.path().join("a.json");
        assert_eq!(read_sibling(&side, "a.csv").unwrap(), b"x\n");
        assert!(read_sibling(&side, "../a.csv").is_err());
        assert!(read_sibling(&side, "/etc/passwd").is_err());
    }
}
