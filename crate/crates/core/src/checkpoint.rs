//! Raw binary snapshots of solver states.
//!
//! Every word is 8 bytes, little endian:
//!
//! | offset | type | content |
//! |-------:|------|---------|
//! | 0  | u64 | points per dimension `N` |
//! | 8  | f64 | side length `L` |
//! | 16 | f64 | time `t` |
//! | 24 | u64 | step count |
//! | 32 | f64 | `∫‖∇u‖²_{Ḣ¹}` accumulator |
//! | 40 | f64 | pairing accumulator |
//! | 48 | f64 | `∫∫|u|⁶` accumulator |
//! | 56 | f64 × 2N⁴ | coefficients `û`, real and imaginary parts interleaved, storage order |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::SolverState;
use crate::spectral::{SpectralField, TorusGrid};

pub const HEADER_BYTES: usize = 56;

/// Contents of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub u_hat: SpectralField,
    pub t: f64,
    pub step_count: u64,
    pub accumulators: [f64; 3],
}

impl Checkpoint {
    pub fn of(state: &SolverState) -> Self {
        Self {
            u_hat: state.u_hat.clone(),
            t: state.t,
            step_count: state.step_count,
            accumulators: state.accumulators(),
        }
    }

    pub fn into_state(self, nonlinearity_enabled: bool) -> Result<SolverState> {
        SolverState::resume(
            self.u_hat,
            nonlinearity_enabled,
            self.t,
            self.step_count,
            self.accumulators,
        )
    }
}

pub fn write(path: &Path, state: &SolverState) -> Result<()> {
    let grid = state.grid();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(grid.points_per_dim() as u64).to_le_bytes())?;
    out.write_all(&grid.side_length().to_le_bytes())?;
    out.write_all(&state.t.to_le_bytes())?;
    out.write_all(&state.step_count.to_le_bytes())?;
    for a in state.accumulators() {
        out.write_all(&a.to_le_bytes())?;
    }
    for c in &state.u_hat.coeffs {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    let fail = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_BYTES];
    input
        .read_exact(&mut header)
        .map_err(|e| fail(format!("truncated header: {e}")))?;
    let word = |i: usize| <[u8; 8]>::try_from(&header[8 * i..8 * i + 8]).unwrap();
    let n = u64::from_le_bytes(word(0));
    let side = f64::from_le_bytes(word(1));
    let t = f64::from_le_bytes(word(2));
    let step_count = u64::from_le_bytes(word(3));
    let accumulators = [4, 5, 6].map(|i| f64::from_le_bytes(word(i)));
    if n > 1024 {
        return Err(fail(format!("implausible lattice size {n}")));
    }
    let grid = TorusGrid::new(n as usize, side).map_err(|e| fail(e.to_string()))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 16 * grid.len() {
        return Err(fail(format!(
            "expected {} coefficient bytes, found {}",
            16 * grid.len(),
            body.len()
        )));
    }
    let coeffs = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(Checkpoint {
        u_hat: SpectralField::new(grid, coeffs)?,
        t,
        step_count,
        accumulators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::step;
    use crate::spectral::{transform_forward, PhysicalField};

    #[test]
    fn roundtrip() {
        let g = TorusGrid::new(16, 7.0).unwrap();
        let u = PhysicalField::from_fn(g, |x| 0.2 * (0.9 * x[0]).sin() * (0.9 * x[3]).cos());
        let mut s = SolverState::new(transform_forward(&u).unwrap(), true).unwrap();
        s = step(&s, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.bin");
        write(&path, &s).unwrap();
        assert_eq!(
            std::fs::metadata(&path).unwrap().len() as usize,
            HEADER_BYTES + 16 * g.len()
        );
        let back = read(&path).unwrap();
        assert_eq!(back, Checkpoint::of(&s));
        let resumed = back.into_state(true).unwrap();
        assert_eq!(step(&resumed, 0.1).unwrap().u_hat, step(&s, 0.1).unwrap().u_hat);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.bin");
        std::fs::write(&path, [0u8; 10]).unwrap();
        assert!(matches!(read(&path), Err(Error::Checkpoint { .. })));
        let mut header = Vec::new();
        header.extend_from_slice(&16u64.to_le_bytes());
        header.extend_from_slice(&1.0f64.to_le_bytes());
        header.extend_from_slice(&[0u8; 40]);
        header.extend_from_slice(&[0u8; 32]);
        std::fs::write(&path, &header).unwrap();
        assert!(matches!(read(&path), Err(Error::Checkpoint { .. })));
        assert!(read(&dir.path().join("missing.bin")).is_err());
    }
}
