//! Input helpers: transparent gzip and data-directory lookup.

use std::env;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

/// Environment variable naming the directory relative input paths fall back to.
pub const DATA_DIR_ENV: &str = "ROVSCOPE_DATA_DIR";

/// Resolves an input path. Relative paths that do not exist are retried
/// under `$ROVSCOPE_DATA_DIR` when it is set.
pub fn resolve_input(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = env::var_os(DATA_DIR_ENV) {
            let alt = Path::new(&dir).join(path);
            if alt.exists() {
                return alt;
            }
        }
    }
    path.to_path_buf()
}

/// Opens a file for reading, decompressing it if it starts with the gzip magic.
pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let path = resolve_input(path);
    let mut file = BufReader::new(File::open(&path)?);
    let is_gzip = {
        let head = file.fill_buf()?;
        head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b
    };
    if is_gzip {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Reads a whole (possibly gzipped) input into memory.
pub fn read_input(path: &Path) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    open_input(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}
