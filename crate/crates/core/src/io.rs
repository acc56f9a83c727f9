//! Serialization: CSV schemas, binary eigenvector/operator dumps, hashing.
//!
//! All floating-point values are written with Rust's shortest round-trip
//! formatting, so identical bits produce identical bytes and reruns with the
//! same seeds produce byte-identical CSV bodies.
//!
//! Binary eigenvector dump layout (little-endian):
//! `magic "DLEV"`, `version: u32`, `geometry_hash: u64`, `weight_hash: u64`,
//! `dim: u32`, `count: u32`, then per vector: `k: i32`, `dim` pairs of
//! `f64` (re, im), row-major over active degrees of freedom.
//!
//! Binary operator dump layout: `magic "DLOP"`, `version: u32`, `n: u32`,
//! then `n*n` pairs of `f64` (re, im), row-major.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::linalg::{C64, Mat};
use crate::spectral::WeightedSpectrum;

/// FNV-1a 64-bit hasher for keying dumps and manifests.
pub struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write(&v.to_bits().to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv {
    fn default() -> Self {
        Self::new()
    }
}

/// Spectrum CSV: one row per retained signed index,
/// `k,lambda,cluster,residual`.
pub fn spectrum_csv(spectrum: &WeightedSpectrum) -> String {
    let mut out = String::from("k,lambda,cluster,residual\n");
    let mut rows: Vec<i32> = spectrum.retained_indices();
    rows.sort();
    let cluster_of = |k: i32| -> i32 {
        let list = if k > 0 { &spectrum.pos_clusters } else { &spectrum.neg_clusters };
        let mag = k.unsigned_abs() as usize;
        list.iter()
            .find(|c| c.first <= mag && mag <= c.last())
            .map(|c| c.ell)
            .unwrap_or(0)
    };
    for k in rows {
        let l = spectrum.lambda(k).expect("retained index");
        let r = spectrum.residual(k).expect("retained index");
        out.push_str(&format!("{},{},{},{}\n", k, l, cluster_of(k), r));
    }
    out
}

/// Binary dump of the retained eigenvectors, keyed by geometry and weight
/// hashes (layout documented in the module header).
pub fn write_eigenvector_dump(spectrum: &WeightedSpectrum, path: &Path) -> Result<()> {
    let geometry_hash = spectrum.geometry().hash64();
    let weight_hash =
        spectrum.mass.weight.as_ref().map(|w| w.hash64()).unwrap_or(0);
    let dim = spectrum.n_active() as u32;
    let indices = spectrum.retained_indices();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(b"DLEV");
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&geometry_hash.to_le_bytes());
    buf.extend_from_slice(&weight_hash.to_le_bytes());
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&(indices.len() as u32).to_le_bytes());
    for k in indices {
        buf.extend_from_slice(&k.to_le_bytes());
        for z in spectrum.eigvec(k)? {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// CSV dump of a dense operator matrix: `i,j,re,im` rows.
pub fn operator_csv(m: &Mat<C64>) -> String {
    let mut out = String::from("i,j,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.push_str(&format!("{},{},{},{}\n", i, j, z.re, z.im));
        }
    }
    out
}

/// Binary dump of a dense operator matrix (layout in the module header).
pub fn write_operator_dump(m: &Mat<C64>, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(b"DLOP");
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_dirac, assemble_mass};
    use crate::domain::{build_grid, Geometry, SpinTwist};
    use crate::spectral::solve_weighted;
    use crate::weights::WeightField;
    use std::sync::Arc;

    #[test]
    fn fnv_is_deterministic_and_input_sensitive() {
        let mut a = Fnv::new();
        a.write(b"abc");
        let mut b = Fnv::new();
        b.write(b"abc");
        assert_eq!(a.finish(), b.finish());
        let mut c = Fnv::new();
        c.write(b"abd");
        assert_ne!(a.finish(), c.finish());
    }

    #[test]
    fn eigenvector_dump_round_trips() {
        let geometry = Geometry::CircleS1 {
            length: 2.0 * std::f64::consts::PI,
            twist: SpinTwist::Antiperiodic,
            resolution: 16,
        };
        let grid = build_grid(&geometry).unwrap();
        let dirac = Arc::new(assemble_dirac(&geometry, &grid).unwrap());
        let mass =
            Arc::new(assemble_mass(&WeightField::identity(&grid), &grid, &dirac.basis).unwrap());
        let spec = solve_weighted(&dirac, &mass, 3, Some(0)).unwrap();
        let path = std::env::temp_dir().join("diraclab-io-test.evec");
        write_eigenvector_dump(&spec, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let _ = std::fs::remove_file(&path);
        // Parse the documented layout back.
        assert_eq!(&bytes[..4], b"DLEV");
        let dim = u32::from_le_bytes(bytes[24..28].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(bytes[28..32].try_into().unwrap()) as usize;
        assert_eq!(dim, spec.n_active());
        assert_eq!(count, spec.retained_indices().len());
        // First record: signed index then interleaved re/im.
        let mut off = 32;
        let k = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        off += 4;
        let v = spec.eigvec(k).unwrap();
        for z in v {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            off += 16;
            assert_eq!((re, im), (z.re, z.im));
        }
    }

    #[test]
    fn spectrum_csv_has_one_row_per_retained_index() {
        let geometry = Geometry::CircleS1 {
            length: 2.0 * std::f64::consts::PI,
            twist: SpinTwist::Antiperiodic,
            resolution: 16,
        };
        let grid = build_grid(&geometry).unwrap();
        let dirac = Arc::new(assemble_dirac(&geometry, &grid).unwrap());
        let mass =
            Arc::new(assemble_mass(&WeightField::identity(&grid), &grid, &dirac.basis).unwrap());
        let spec = solve_weighted(&dirac, &mass, 3, Some(0)).unwrap();
        let csv = spectrum_csv(&spec);
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("k,lambda,cluster,residual\n"));
    }
}
