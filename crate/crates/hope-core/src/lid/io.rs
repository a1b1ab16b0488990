//! Point cloud file formats.
//!
//! Binary layout (`.hpc`):
//!
//! ```text
//!     bytes 0..4    magic "HPC1"
//!     bytes 4..8    point count, u32 little-endian
//!     bytes 8..12   channels per point, u32 little-endian
//!     bytes 12..    count * channels f32 values, little-endian,
//!                   row-major
//! ```
//!
//! Text alternative: CSV with a header row `c0,c1,...` naming one column
//! per channel, one point per line. [`read_cloud`] sniffs the magic and
//! accepts either. Values are stored as f32 on disk; reading widens to
//! f64.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::PointCloud;

const MAGIC: &[u8; 4] = b"HPC1";

/// Serializes a cloud into the binary layout.
pub fn hpc_bytes(cloud: &PointCloud) -> Result<Vec<u8>> {
    let count = u32::try_from(cloud.len())
        .map_err(|_| Error::InvalidParameter("cloud exceeds u32 point count".into()))?;
    let dim = u32::try_from(cloud.dim())
        .map_err(|_| Error::InvalidParameter("cloud exceeds u32 channel count".into()))?;
    let mut bytes = Vec::with_capacity(12 + cloud.as_slice().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&count.to_le_bytes());
    bytes.extend_from_slice(&dim.to_le_bytes());
    for v in cloud.as_slice() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(bytes)
}

/// Parses the binary layout.
pub fn cloud_from_hpc_bytes(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() < 12 {
        return Err(Error::Format("file shorter than the 12-byte header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected HPC1".into()));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::Format("channel count is zero".into()));
    }
    let expected = 12 + count * dim * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let mut data = Vec::with_capacity(count * dim);
    for chunk in bytes[12..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format("nonfinite coordinate".into()));
        }
        data.push(v as f64);
    }
    PointCloud::new(dim, data)
}

/// Writes a cloud to `path` in the binary layout.
pub fn write_hpc(cloud: &PointCloud, path: &Path) -> Result<()> {
    let bytes = hpc_bytes(cloud)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a cloud from a binary file.
pub fn read_hpc(path: &Path) -> Result<PointCloud> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    cloud_from_hpc_bytes(&bytes)
}

/// Writes a cloud as CSV with the `c0,c1,...` header.
pub fn write_csv(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..cloud.dim()).map(|i| format!("c{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in cloud.iter_points() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV cloud, validating the header and row widths.
pub fn read_csv(path: &Path) -> Result<PointCloud> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))??;
    let columns: Vec<&str> = header.trim_end().split(',').collect();
    for (i, name) in columns.iter().enumerate() {
        if *name != format!("c{i}") {
            return Err(Error::Format(format!(
                "header column {i} is '{name}', expected 'c{i}'"
            )));
        }
    }
    let dim = columns.len();
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != dim {
            return Err(Error::Format(format!(
                "row {} has {} fields, expected {dim}",
                lineno + 2,
                fields.len()
            )));
        }
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {}: '{field}' is not a number", lineno + 2))
            })?;
            if !v.is_finite() {
                return Err(Error::Format("nonfinite coordinate".into()));
            }
            data.push(v);
        }
    }
    PointCloud::new(dim, data)
}

/// Reads either format, deciding by the magic bytes.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let mut head = [0u8; 4];
    let mut f = File::open(path)?;
    let got = f.read(&mut head)?;
    drop(f);
    if got == 4 && &head == MAGIC {
        read_hpc(path)
    } else {
        read_csv(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_cloud() -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..60).map(|_| rng.gen_range(-5.0..5.0)).collect();
        PointCloud::new(4, data).unwrap()
    }

    #[test]
    fn binary_round_trip_preserves_f32_values() {
        let cloud = sample_cloud();
        let bytes = hpc_bytes(&cloud).unwrap();
        assert_eq!(&bytes[0..4], b"HPC1");
        let back = cloud_from_hpc_bytes(&bytes).unwrap();
        assert_eq!(back.len(), cloud.len());
        assert_eq!(back.dim(), cloud.dim());
        for (a, b) in cloud.as_slice().iter().zip(back.as_slice().iter()) {
            assert_eq!(*a as f32, *b as f32, "value changed beyond f32 rounding");
        }
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let cloud = sample_cloud();
        let mut bytes = hpc_bytes(&cloud).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            cloud_from_hpc_bytes(&bytes),
            Err(Error::Format(_))
        ));
        let bytes = hpc_bytes(&cloud).unwrap();
        assert!(matches!(
            cloud_from_hpc_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_sniffing() {
        let cloud = sample_cloud();
        let dir = std::env::temp_dir().join("hope_lid_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let csv_path = dir.join("cloud.csv");
        let hpc_path = dir.join("cloud.hpc");
        write_csv(&cloud, &csv_path).unwrap();
        write_hpc(&cloud, &hpc_path).unwrap();
        let from_csv = read_cloud(&csv_path).unwrap();
        let from_hpc = read_cloud(&hpc_path).unwrap();
        assert_eq!(from_csv.len(), cloud.len());
        assert_eq!(from_csv.as_slice(), cloud.as_slice(), "csv is lossless for f64");
        for (a, b) in cloud.as_slice().iter().zip(from_hpc.as_slice().iter()) {
            assert_eq!(*a as f32, *b as f32);
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_rejects_malformed_input() {
        let dir = std::env::temp_dir().join("hope_lid_io_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.csv");
        std::fs::write(&path, "c0,c1\n1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Format(_))));
        std::fs::write(&path, "x,y\n1.0,2.0\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Format(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
