use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::SpectralBasis;

pub const MAGIC: &[u8; 8] = b"DIPSPEC1";

/// The fingerprint lives next to the spectrum so the binary layout stays
/// exactly `magic, n, k, eigenvalues, vectors`.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn write_spectrum(path: impl AsRef<Path>, basis: &SpectralBasis) -> Result<()> {
    let path = path.as_ref();
    let too_big = |what: &str| Error::Unsupported(format!("{what} does not fit in u32"));
    let n = u32::try_from(basis.n).map_err(|_| too_big("n"))?;
    let k = u32::try_from(basis.k()).map_err(|_| too_big("k"))?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&k.to_le_bytes())?;
    for v in basis.eigenvalues.iter().chain(&basis.vectors) {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    match &basis.fingerprint {
        Some(fp) => fs::write(sidecar(path), format!("fingerprint={fp}\n"))?,
        None => {
            if sidecar(path).exists() {
                fs::remove_file(sidecar(path))?;
            }
        }
    }
    Ok(())
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<SpectralBasis> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing DIPSPEC1 header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (n, k) = (word(8), word(12));
    let expected = k
        .checked_mul(n)
        .and_then(|kn| kn.checked_add(k))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(16))
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes for n={n}, k={k}, found {}", bytes.len())));
    }
    let mut values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let eigenvalues: Vec<f64> = values.by_ref().take(k).collect();
    let vectors: Vec<f64> = values.collect();
    let mut basis = SpectralBasis::new(n, eigenvalues, vectors).map_err(|e| bad(e.to_string()))?;
    let meta = sidecar(path);
    if meta.exists() {
        let text = fs::read_to_string(&meta)?;
        let fp = text
            .lines()
            .find_map(|l| l.strip_prefix("fingerprint="))
            .ok_or_else(|| Error::Format {
                path: meta.clone(),
                reason: "no fingerprint line".into(),
            })?;
        basis.fingerprint = Some(fp.trim().to_string());
    }
    Ok(basis)
}
