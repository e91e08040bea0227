//! Signal files: a JSON header plus a companion array of complex node values.
//!
//! The companion array holds one entry per grid node in row-major order
//! (axis 1 slowest). Binary companions (`f64le`) store each value as 16 bytes,
//! the real part then the imaginary part, each an IEEE-754 binary64 in
//! little-endian byte order, with no header or padding. CSV companions have
//! the header line `re,im` followed by one `re,im` line per node.
//! Catalog signals are fully described by the header and carry no companion.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::catalog::CatalogKind;
use super::density::{BandSupport, GridSpec, SpectralDensity};
use super::signal::{make_catalog_with, PwSignal, Representation};
use crate::error::{PwError, Result};

pub const FORMAT_NAME: &str = "pwsignal";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueEncoding {
    F64le,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogHeader {
    #[serde(flatten)]
    pub kind: CatalogKind,
    pub shift: Vec<f64>,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuesHeader {
    pub file: String,
    pub encoding: ValueEncoding,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub rep: String,
    pub support: BandSupport,
    pub counts: Option<Vec<usize>>,
    pub catalog: Option<CatalogHeader>,
    pub values: Option<ValuesHeader>,
    /// Free-form producer tag, e.g. a tool version and config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

/// Writes `<dir>/<stem>.json` and, for spectral signals, the companion array
/// `<stem>.bin` or `<stem>.csv`. Returns the header path.
pub fn write_signal(signal: &PwSignal, dir: &Path, stem: &str, encoding: ValueEncoding) -> Result<PathBuf> {
    write_signal_tagged(signal, dir, stem, encoding, None)
}

/// [`write_signal`] with an `origin` tag recorded in the header.
pub fn write_signal_tagged(
    signal: &PwSignal,
    dir: &Path,
    stem: &str,
    encoding: ValueEncoding,
    origin: Option<&str>,
) -> Result<PathBuf> {
    let header_path = dir.join(format!("{stem}.json"));
    let header = match signal.representation() {
        Representation::Catalog(c) => SignalHeader {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            dim: signal.dim(),
            rep: "catalog".into(),
            support: signal.support(),
            counts: None,
            catalog: Some(CatalogHeader {
                kind: c.kind(),
                shift: c.shift().to_vec(),
                grid: c.grid(),
            }),
            values: None,
            origin: origin.map(str::to_owned),
        },
        Representation::Spectral(d) => {
            let ext = match encoding {
                ValueEncoding::F64le => "bin",
                ValueEncoding::Csv => "csv",
            };
            let file = format!("{stem}.{ext}");
            write_values(&dir.join(&file), d.values(), encoding)?;
            SignalHeader {
                format: FORMAT_NAME.into(),
                version: FORMAT_VERSION,
                dim: d.dim(),
                rep: "spectral".into(),
                support: d.support().clone(),
                counts: Some(d.counts().to_vec()),
                catalog: None,
                values: Some(ValuesHeader {
                    file,
                    encoding,
                    count: d.total_nodes(),
                }),
                origin: origin.map(str::to_owned),
            }
        }
    };
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    fs::write(&header_path, text)?;
    Ok(header_path)
}

pub fn read_signal(header_path: &Path) -> Result<PwSignal> {
    let header: SignalHeader = serde_json::from_slice(&fs::read(header_path)?)?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(PwError::Format(format!(
            "expected {FORMAT_NAME} v{FORMAT_VERSION}, found {} v{}",
            header.format, header.version
        )));
    }
    if header.support.dim() != header.dim {
        return Err(PwError::Format("support dimension disagrees with header dim".into()));
    }
    match header.rep.as_str() {
        "catalog" => {
            let c = header
                .catalog
                .ok_or_else(|| PwError::Format("catalog header missing".into()))?;
            make_catalog_with(header.dim, c.kind, c.shift, c.grid)
        }
        "spectral" => {
            let counts = header
                .counts
                .ok_or_else(|| PwError::Format("spectral header missing counts".into()))?;
            let vh = header
                .values
                .ok_or_else(|| PwError::Format("spectral header missing values".into()))?;
            let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
            let values = read_values(&dir.join(&vh.file), vh.encoding)?;
            if values.len() != vh.count {
                return Err(PwError::Format(format!(
                    "header promises {} values, companion holds {}",
                    vh.count,
                    values.len()
                )));
            }
            let radius = header.support.radius();
            let support =
                BandSupport::new(header.support.lo().to_vec(), header.support.hi().to_vec())?.with_radius_bound(radius);
            Ok(PwSignal::from_density(SpectralDensity::from_values(
                support, counts, values,
            )?))
        }
        other => Err(PwError::Format(format!("unknown representation {other:?}"))),
    }
}

fn write_values(path: &Path, values: &[Complex64], encoding: ValueEncoding) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    match encoding {
        ValueEncoding::F64le => {
            for v in values {
                out.write_all(&v.re.to_le_bytes())?;
                out.write_all(&v.im.to_le_bytes())?;
            }
        }
        ValueEncoding::Csv => {
            writeln!(out, "re,im")?;
            for v in values {
                writeln!(out, "{:?},{:?}", v.re, v.im)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_values(path: &Path, encoding: ValueEncoding) -> Result<Vec<Complex64>> {
    match encoding {
        ValueEncoding::F64le => {
            let bytes = fs::read(path)?;
            if bytes.len() % 16 != 0 {
                return Err(PwError::Format(format!(
                    "binary companion length {} is not a multiple of 16",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                    Complex64::new(re, im)
                })
                .collect())
        }
        ValueEncoding::Csv => {
            let reader = BufReader::new(fs::File::open(path)?);
            let mut values = Vec::new();
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if lineno == 0 {
                    if line.trim() != "re,im" {
                        return Err(PwError::Format(format!("bad CSV header {line:?}")));
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let parse = |s: Option<&str>| -> Result<f64> {
                    s.and_then(|x| x.trim().parse().ok())
                        .ok_or_else(|| PwError::Format(format!("bad CSV line {}: {line:?}", lineno + 1)))
                };
                let mut parts = line.split(',');
                let re = parse(parts.next())?;
                let im = parse(parts.next())?;
                values.push(Complex64::new(re, im));
            }
            Ok(values)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn density(values: Vec<(f64, f64)>, counts: Vec<usize>) -> SpectralDensity {
        let n = counts.len();
        let support = BandSupport::new(vec![-1.0; n], vec![0.5; n]).unwrap();
        let values = values.into_iter().map(|(r, i)| Complex64::new(r, i)).collect();
        SpectralDensity::from_values(support, counts, values).unwrap()
    }

    #[test]
    fn binary_layout_is_little_endian_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let d = density(vec![(1.0, -2.0), (0.5, 0.25)], vec![2]);
        write_signal(&PwSignal::from_density(d), dir.path(), "s", ValueEncoding::F64le).unwrap();
        let bytes = fs::read(dir.path().join("s.bin")).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[..8], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[8..16], &(-2.0f64).to_le_bytes());
        assert_eq!(&bytes[24..], &0.25f64.to_le_bytes());
    }

    #[test]
    fn catalog_header_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = make_catalog_with(2, CatalogKind::Q(2), vec![0.5, 1.0], GridSpec::IntervalsPerUnit(16)).unwrap();
        let path = write_signal(&f, dir.path(), "q", ValueEncoding::F64le).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains(r#""kind": "Q""#), "{text}");
        let back = read_signal(&path).unwrap();
        let c = back.catalog().unwrap();
        assert_eq!(c.kind(), CatalogKind::Q(2));
        assert_eq!(c.shift(), &[0.5, 1.0]);
        assert!(!dir.path().join("q.bin").exists());
    }

    #[test]
    fn malformed_companions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = density(vec![(1.0, 0.0); 4], vec![2, 2]);
        let path = write_signal(&PwSignal::from_density(d), dir.path(), "s", ValueEncoding::Csv).unwrap();
        fs::write(dir.path().join("s.csv"), "re,im\n1,0\nx,0\n").unwrap();
        assert!(matches!(read_signal(&path), Err(PwError::Format(_))));
        fs::write(dir.path().join("s.csv"), "re,im\n1,0\n").unwrap();
        assert!(matches!(read_signal(&path), Err(PwError::Format(_))));
    }

    proptest! {
        #[test]
        fn spectral_round_trip_is_lossless(
            vals in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 6),
            csv in any::<bool>(),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let d = density(vals, vec![3, 2]);
            let enc = if csv { ValueEncoding::Csv } else { ValueEncoding::F64le };
            let path = write_signal(&PwSignal::from_density(d.clone()), dir.path(), "s", enc).unwrap();
            let back = read_signal(&path).unwrap();
            let bd = back.spectral().unwrap();
            prop_assert_eq!(bd.values(), d.values());
            prop_assert_eq!(bd.support(), d.support());
        }
    }
}
