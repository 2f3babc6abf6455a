use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

/// Version written into every text artifact header.
pub const FORMAT_VERSION: u32 = 1;

/// The command line as typed, with the program path reduced to its name so
/// artifacts do not depend on where the binary lives.
pub fn invocation() -> String {
    let mut args = std::env::args();
    let prog = args
        .next()
        .map(|p| Path::new(&p).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(p))
        .unwrap_or_else(|| "quadshape".into());
    std::iter::once(prog).chain(args).collect::<Vec<_>>().join(" ")
}

pub fn header(kind: &str, invocation: &str) -> String {
    format!("# quadshape-{kind} {FORMAT_VERSION}\n# invocation: {invocation}\n")
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
