//! Matrix Market files for Hermitian matrices, pencils and sequences.
//!
//! Matrices are written in `array complex hermitian` form (lower triangle,
//! column by column, 17 significant digits). Reading also accepts the
//! `coordinate` layout and `real symmetric` fields.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, HermitianView};
use crate::reduction::EigenPencil;
use crate::sequence::{PencilSequence, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

fn format_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{}:{line}: {msg}", path.display()))
}

/// Writes the lower triangle of a Hermitian matrix.
pub fn write_matrix(path: &Path, m: &HermitianView) -> Result<()> {
    let n = m.n();
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix array complex hermitian")?;
    writeln!(out, "{n} {n}")?;
    for j in 0..n {
        for i in j..n {
            let z = m[(i, j)];
            let im = if i == j { 0.0 } else { z.im };
            writeln!(out, "{:.16e} {:.16e}", z.re, im)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a Hermitian matrix; `general` and other non-Hermitian symmetries are rejected.
pub fn read_matrix(path: &Path) -> Result<HermitianView> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| format_err(path, 1, "empty file"))?;
    let header = header?;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(format_err(path, 1, format!("malformed header `{header}`")));
    }
    let layout = match words[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(format_err(path, 1, format!("unsupported layout `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(format_err(path, 1, format!("unsupported field `{other}`"))),
    };
    match (field, words[4].as_str()) {
        (Field::Complex, "hermitian") | (Field::Real, "symmetric") => {}
        (_, other) => {
            return Err(format_err(path, 1, format!("matrix declared `{other}`, expected Hermitian")))
        }
    }

    // Remaining lines, skipping comments and blanks.
    let mut body = lines.filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        Ok(s) => Some(Ok((i + 1, s))),
        Err(e) => Some(Err(Error::from(e))),
    });

    let (size_line, size) = body.next().ok_or_else(|| format_err(path, 2, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_err(path, size_line, format!("bad size line: {e}")))?;
    let expected_fields = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != expected_fields || dims[0] != dims[1] {
        return Err(format_err(path, size_line, format!("expected a square size line, got `{size}`")));
    }
    let n = dims[0];
    let mut m = DenseMatrix::zeros(n, n);
    // Lower-triangle entries already placed, to catch contradicting duplicates.
    let mut seen = vec![false; n * n];

    let parse_value = |line_no: usize, toks: &[&str]| -> Result<Complex64> {
        let want = if field == Field::Complex { 2 } else { 1 };
        if toks.len() != want {
            return Err(format_err(path, line_no, format!("expected {want} value(s), got {}", toks.len())));
        }
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| format_err(path, line_no, format!("bad number `{t}`: {e}")))
        };
        let re = num(toks[0])?;
        let im = if want == 2 { num(toks[1])? } else { 0.0 };
        Ok(Complex64::new(re, im))
    };
    let mut place = |line_no: usize, i: usize, j: usize, z: Complex64| -> Result<()> {
        if seen[i + j * n] {
            let prev = m[(i, j)];
            if (prev - z).norm() > 1e-12 * prev.norm().max(1.0) {
                return Err(format_err(path, line_no, format!("entry ({}, {}) is not Hermitian", i + 1, j + 1)));
            }
        }
        seen[i + j * n] = true;
        if i == j {
            let tol = 1e-12 * z.re.abs().max(1.0);
            if z.im.abs() > tol {
                return Err(format_err(path, line_no, format!("diagonal entry {i} has imaginary part {:e}", z.im)));
            }
            m[(i, i)] = Complex64::new(z.re, 0.0);
        } else {
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        Ok(())
    };

    match layout {
        Layout::Array => {
            for j in 0..n {
                for i in j..n {
                    let (line_no, line) = body
                        .next()
                        .ok_or_else(|| format_err(path, 0, format!("missing entry ({}, {})", i + 1, j + 1)))??;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    let z = parse_value(line_no, &toks)?;
                    place(line_no, i, j, z)?;
                }
            }
        }
        Layout::Coordinate => {
            let nnz = dims[2];
            for _ in 0..nnz {
                let (line_no, line) = body
                    .next()
                    .ok_or_else(|| format_err(path, 0, format!("expected {nnz} entries")))??;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() < 2 {
                    return Err(format_err(path, line_no, "missing indices"));
                }
                let idx = |t: &str| {
                    t.parse::<usize>()
                        .ok()
                        .filter(|&k| (1..=n).contains(&k))
                        .ok_or_else(|| format_err(path, line_no, format!("index `{t}` out of range 1..={n}")))
                };
                let (i, j) = (idx(toks[0])? - 1, idx(toks[1])? - 1);
                let z = parse_value(line_no, &toks[2..])?;
                // Upper-triangle entries are read as the conjugate of the mirrored lower one.
                let (i, j, z) = if i >= j { (i, j, z) } else { (j, i, z.conj()) };
                place(line_no, i, j, z)?;
            }
        }
    }
    if let Some((line_no, line)) = body.next().transpose()? {
        return Err(format_err(path, line_no, format!("unexpected trailing data `{line}`")));
    }
    HermitianView::new(m)
}

fn pencil_paths(dir: &Path, label: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("A_{label}.mtx")), dir.join(format!("B_{label}.mtx")))
}

/// Writes `A_<ℓ>.mtx` and `B_<ℓ>.mtx` into `dir`.
pub fn write_pencil(dir: &Path, p: &EigenPencil) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (a, b) = pencil_paths(dir, p.label);
    write_matrix(&a, &p.a)?;
    write_matrix(&b, &p.b)
}

pub fn read_pencil(dir: &Path, label: usize) -> Result<EigenPencil> {
    let (a_path, b_path) = pencil_paths(dir, label);
    let a = read_matrix(&a_path)?;
    let b = read_matrix(&b_path)?;
    if a.n() != b.n() {
        return Err(Error::Format(format!(
            "{} is {}x{} but {} is {}x{}",
            a_path.display(),
            a.n(),
            a.n(),
            b_path.display(),
            b.n(),
            b.n()
        )));
    }
    EigenPencil::new(a, b, label)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    #[serde(rename = "N")]
    pub len: usize,
    pub provenance: Provenance,
}

pub const MANIFEST: &str = "manifest.json";

pub fn write_sequence(dir: &Path, seq: &PencilSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    for p in &seq.pencils {
        write_pencil(dir, p)?;
    }
    let manifest = Manifest {
        n: seq.n(),
        len: seq.len(),
        provenance: seq.provenance.clone(),
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a sequence directory; provenance becomes `loaded(dir)`.
pub fn read_sequence(dir: &Path) -> Result<PencilSequence> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", dir.join(MANIFEST).display())))?;
    let pencils = (1..=manifest.len)
        .map(|l| read_pencil(dir, l))
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = pencils.iter().find(|p| p.n() != manifest.n) {
        return Err(Error::Format(format!(
            "pencil {} is {}x{}, manifest says n = {}",
            p.label,
            p.n(),
            p.n(),
            manifest.n
        )));
    }
    PencilSequence::new(pencils, Provenance::Loaded { path: dir.display().to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{generate_sequence, CorrelationSchedule};

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn random_pencil_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let seq = generate_sequence(9, &CorrelationSchedule::with_default_decay(1), 3).unwrap();
        write_pencil(dir.path(), &seq.pencils[0]).unwrap();
        let back = read_pencil(dir.path(), 1).unwrap();
        assert_eq!(back.a.matrix(), seq.pencils[0].a.matrix());
        assert_eq!(back.b.matrix(), seq.pencils[0].b.matrix());
    }

    #[test]
    fn sequence_round_trip_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let seq = generate_sequence(6, &CorrelationSchedule::with_default_decay(3), 1).unwrap();
        write_sequence(dir.path(), &seq).unwrap();
        let back = read_sequence(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        for (x, y) in back.pencils.iter().zip(&seq.pencils) {
            assert_eq!(x.a.matrix(), y.a.matrix());
        }
        assert!(matches!(back.provenance, Provenance::Loaded { .. }));
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(manifest["n"], 6);
        assert_eq!(manifest["N"], 3);
        assert_eq!(manifest["provenance"]["kind"], "generated");
    }

    #[test]
    fn hand_written_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.mtx",
            "%%MatrixMarket matrix array complex hermitian\n% a comment\n2 2\n2.0 0.0\n0.5 -1.25\n3.0 0.0\n",
        );
        let m = read_matrix(&p).unwrap();
        assert_eq!(m[(0, 0)], Complex64::new(2.0, 0.0));
        assert_eq!(m[(1, 0)], Complex64::new(0.5, -1.25));
        assert_eq!(m[(0, 1)], Complex64::new(0.5, 1.25));
        assert_eq!(m[(1, 1)], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn coordinate_and_real_symmetric_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "c.mtx",
            "%%MatrixMarket matrix coordinate complex hermitian\n3 3 3\n1 1 1.0 0.0\n3 1 0.0 2.0\n2 2 4.0 0.0\n",
        );
        let m = read_matrix(&p).unwrap();
        assert_eq!(m[(0, 2)], Complex64::new(0.0, -2.0));
        assert_eq!(m[(2, 2)], Complex64::new(0.0, 0.0));
        let p = write(dir.path(), "r.mtx", "%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n");
        let m = read_matrix(&p).unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn general_field_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "g.mtx",
            "%%MatrixMarket matrix array complex general\n1 1\n1.0 0.0\n",
        );
        assert!(matches!(read_matrix(&p), Err(Error::Format(_))));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "%%MatrixMarket matrix array complex\n1 1\n1 0\n",
            "%%MatrixMarket matrix array complex hermitian\n2 3\n1 0\n",
            "%%MatrixMarket matrix array complex hermitian\n2 2\n1 0\n",
            "%%MatrixMarket matrix array complex hermitian\n1 1\n1 0.5\n",
            "%%MatrixMarket matrix array complex hermitian\n1 1\nx 0\n",
            "%%MatrixMarket matrix array complex hermitian\n1 1\n1 0\n2 0\n",
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 1\n3 1 1 0\n",
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n2 1 1 1\n1 2 1 1\n",
        ];
        for (k, text) in cases.iter().enumerate() {
            let p = write(dir.path(), &format!("bad{k}.mtx"), text);
            assert!(matches!(read_matrix(&p), Err(Error::Format(_))), "case {k}");
        }
    }

    #[test]
    fn pencil_dimension_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "A_1.mtx", "%%MatrixMarket matrix array real symmetric\n1 1\n1\n");
        write(dir.path(), "B_1.mtx", "%%MatrixMarket matrix array real symmetric\n2 2\n1\n0\n1\n");
        assert!(matches!(read_pencil(dir.path(), 1), Err(Error::Format(_))));
    }
}
