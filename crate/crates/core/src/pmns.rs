//! The PMNS binary field format.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `PMNS` |
//! | 2 | version (`u16`, currently 1) |
//! | 4 | `n` (`u32`) |
//! | 8 | box length `L` (`f64`) |
//! | 8 | dealiasing fraction (`f64`) |
//! | 1 | component count (`u8`, always 3) |
//! | 4 | snapshot count `S` (`u32`) |
//! | 8·S | snapshot times (`f64`; `0` marks a stationary field) |
//!
//! followed by `S` blocks of retained-cube modes in row-major ascending
//! `(k₁, k₂, k₃)` order, each mode written as `(re, im)` pairs for the three
//! components in turn.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::write_atomic;
use crate::error::{PmError, Result};
use crate::grid::{FourierVectorField, GridSpec};

pub const MAGIC: &[u8; 4] = b"PMNS";
pub const VERSION: u16 = 1;

/// A decoded PMNS file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub snapshots: Vec<FourierVectorField>,
}

impl FieldFile {
    pub fn new(grid: GridSpec, times: Vec<f64>, snapshots: Vec<FourierVectorField>) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(PmError::Format(format!(
                "{} times for {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if snapshots.iter().any(|s| *s.grid() != grid) {
            return Err(PmError::GridMismatch);
        }
        Ok(FieldFile { grid, times, snapshots })
    }

    /// A single stationary field.
    pub fn stationary(field: FourierVectorField) -> Self {
        FieldFile {
            grid: *field.grid(),
            times: vec![0.0],
            snapshots: vec![field],
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let n = u32::try_from(self.grid.n()).map_err(|_| PmError::Format("n does not fit in u32".into()))?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.grid.box_length().to_le_bytes())?;
        w.write_all(&self.grid.dealias_fraction().to_le_bytes())?;
        w.write_all(&[3u8])?;
        w.write_all(&(self.times.len() as u32).to_le_bytes())?;
        for t in &self.times {
            w.write_all(&t.to_le_bytes())?;
        }
        for snap in &self.snapshots {
            let c = snap.components();
            for p in 0..snap.len() {
                for comp in c {
                    w.write_all(&comp[p].re.to_le_bytes())?;
                    w.write_all(&comp[p].im.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(PmError::Format(format!("bad magic {magic:?}")));
        }
        let version = u16::from_le_bytes(read_array(&mut r, "version")?);
        if version != VERSION {
            return Err(PmError::Format(format!("unsupported version {version}")));
        }
        let n = u32::from_le_bytes(read_array(&mut r, "n")?) as usize;
        let l = f64::from_le_bytes(read_array(&mut r, "box length")?);
        let frac = f64::from_le_bytes(read_array(&mut r, "dealias fraction")?);
        let [components] = read_array::<1>(&mut r, "component count")?;
        if components != 3 {
            return Err(PmError::Format(format!("expected 3 components, got {components}")));
        }
        let grid = GridSpec::new(n, l, frac).map_err(|e| PmError::Format(format!("header: {e}")))?;
        let count = u32::from_le_bytes(read_array(&mut r, "snapshot count")?) as usize;
        let times = (0..count)
            .map(|_| Ok(f64::from_le_bytes(read_array(&mut r, "time")?)))
            .collect::<Result<Vec<_>>>()?;
        let modes = grid.mode_count();
        let mut snapshots = Vec::with_capacity(count);
        for _ in 0..count {
            let mut comps: [Vec<Complex64>; 3] = std::array::from_fn(|_| Vec::with_capacity(modes));
            for _ in 0..modes {
                for comp in comps.iter_mut() {
                    let re = f64::from_le_bytes(read_array(&mut r, "mode data")?);
                    let im = f64::from_le_bytes(read_array(&mut r, "mode data")?);
                    comp.push(Complex64::new(re, im));
                }
            }
            snapshots.push(FourierVectorField::from_components(grid, comps)?);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(PmError::Format("trailing bytes after the last snapshot".into()));
        }
        Ok(FieldFile { grid, times, snapshots })
    }

    /// Writes via a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes)?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        FieldFile::read_from(File::open(path)?)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => PmError::Format(format!("truncated file while reading {what}")),
        _ => PmError::Io(e),
    })
}

fn read_array<const N: usize>(r: &mut impl Read, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf, what)?;
    Ok(buf)
}

/// Writes `<stem>.pmns` and a pretty JSON sidecar `<stem>.json`.
pub fn save_with_sidecar<T: Serialize>(dir: &Path, stem: &str, file: &FieldFile, sidecar: &T) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    file.save(&dir.join(format!("{stem}.pmns")))?;
    write_atomic(
        &dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(sidecar)?.as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: GridSpec, phase: f64) -> FourierVectorField {
        FourierVectorField::from_symbol(grid, |xi| {
            [0, 1, 2].map(|i| Complex64::new((xi[i] + phase).sin(), xi[0] * 0.1 * i as f64))
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = GridSpec::new(8, 6.0, 2.0 / 3.0).unwrap();
        let file = FieldFile::new(grid, vec![0.5, 2.0], vec![sample(grid, 0.0), sample(grid, 1.0)]).unwrap();
        let mut bytes = Vec::new();
        file.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PMNS");
        let header = 4 + 2 + 4 + 8 + 8 + 1 + 4 + 16;
        assert_eq!(bytes.len(), header + 2 * grid.mode_count() * 48);
        assert_eq!(FieldFile::read_from(bytes.as_slice()).unwrap(), file);
    }

    #[test]
    fn rejects_corruption() {
        let grid = GridSpec::new(8, 6.0, 1.0).unwrap();
        let mut bytes = Vec::new();
        FieldFile::stationary(sample(grid, 0.0)).write_to(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(FieldFile::read_from(bad.as_slice()), Err(PmError::Format(_))));
        assert!(matches!(
            FieldFile::read_from(&bytes[..bytes.len() - 3]),
            Err(PmError::Format(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(FieldFile::read_from(long.as_slice()), Err(PmError::Format(_))));
    }
}
