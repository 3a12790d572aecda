//! Reading and writing orientation lists.
//!
//! Input files hold one orientation per line, either `q1,q2,q3,q4` or Bunge
//! angles `phi1,Phi,phi2` in radians. A header row is optional and is
//! recognized by a non-numeric first row. Lines starting with `#` are
//! comments.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::OrientationSample;
use crate::symgroup::{euler_to_quaternion, UnitQuaternion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// `q1,q2,q3,q4`, normalized on load.
    Quat,
    /// `phi1,Phi,phi2` in radians.
    Euler,
}

impl Format {
    fn width(self) -> usize {
        match self {
            Format::Quat => 4,
            Format::Euler => 3,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Quat => "quat",
            Format::Euler => "euler",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quat" | "quatcsv" => Ok(Format::Quat),
            "euler" | "eulercsv" => Ok(Format::Euler),
            other => Err(Error::Config(format!("unknown input format '{other}'"))),
        }
    }
}

const NORM_RANGE: (f64, f64) = (0.9, 1.1);

pub fn ingest_orientations(path: &Path, format: Format) -> Result<OrientationSample> {
    read_orientations(File::open(path)?, format)
}

pub fn read_orientations<R: Read>(reader: R, format: Format) -> Result<OrientationSample> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut bad_norms = Vec::new();
    let mut first = true;
    for record in csv.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(f64::from_str).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if first => {
                first = false;
                continue;
            }
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: e.to_string(),
                })
            }
        };
        first = false;
        if values.len() != format.width() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", format.width(), values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        match format {
            Format::Quat => {
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(NORM_RANGE.0..=NORM_RANGE.1).contains(&norm) {
                    bad_norms.push(line);
                    continue;
                }
                out.push(UnitQuaternion::new(values[0], values[1], values[2], values[3]).expect("nonzero norm"));
            }
            Format::Euler => out.push(euler_to_quaternion(values[0], values[1], values[2])),
        }
    }
    if !bad_norms.is_empty() {
        return Err(Error::Norm { rows: bad_norms });
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no orientations found".into(),
        });
    }
    Ok(OrientationSample::new(out))
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Writes a `q1,q2,q3,q4` file, preceded by `comment` lines if given.
pub fn write_quaternions<W: Write>(mut w: W, sample: &[UnitQuaternion], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "q1,q2,q3,q4")?;
    for q in sample {
        let [a, b, c, d] = q.to_array();
        writeln!(w, "{},{},{},{}", fmt_f64(a), fmt_f64(b), fmt_f64(c), fmt_f64(d))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_uniform_sphere, RngStream};

    fn read(text: &str, format: Format) -> Result<OrientationSample> {
        read_orientations(text.as_bytes(), format)
    }

    #[test]
    fn single_identity_row() {
        let s = read("1,0,0,0\n", Format::Quat).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], UnitQuaternion::IDENTITY);
        let s = read("phi1,Phi,phi2\n0,0,0\n", Format::Euler).unwrap();
        assert_eq!(s[0].to_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn header_and_normalization() {
        let s = read("q1,q2,q3,q4\n# note\n0.99, 0, 0.05, 0\n\n0,0,0,1.02\n", Format::Quat).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|q| (q.as_vector().norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn errors_carry_lines() {
        match read("q1,q2,q3,q4\n1,0,0,0\n1,0,x,0\n", Format::Quat) {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read("1,0,0\n", Format::Quat) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match read("1,0,0,0\n2,0,0,0\n0.5,0,0,0\n0,1,0,0\n", Format::Quat) {
            Err(Error::Norm { rows }) => assert_eq!(rows, vec![2, 3]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read("", Format::Quat), Err(Error::Parse { .. })));
        assert!(matches!(read("q1,q2,q3,q4\n", Format::Quat), Err(Error::Parse { .. })));
    }

    #[test]
    fn round_trip_at_twelve_digits() {
        let s = sample_uniform_sphere(1000, &mut RngStream::new(1));
        let mut text = String::from("q1,q2,q3,q4\n");
        for q in s.iter() {
            let a = q.to_array();
            text.push_str(&format!("{:.11e},{:.11e},{:.11e},{:.11e}\n", a[0], a[1], a[2], a[3]));
        }
        let back = read(&text, Format::Quat).unwrap();
        let err = s
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a.as_vector() - b.as_vector()).amax())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn writer_is_lossless() {
        let s = sample_uniform_sphere(200, &mut RngStream::new(2));
        let mut buf = Vec::new();
        write_quaternions(&mut buf, &s, Some("seed 2")).unwrap();
        let back = read_orientations(buf.as_slice(), Format::Quat).unwrap();
        for (a, b) in s.iter().zip(back.iter()) {
            // Loading renormalizes, which may move the last bit.
            assert!((a.as_vector() - b.as_vector()).amax() < 1e-15);
            for v in a.to_array() {
                assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
            }
        }
    }
}
