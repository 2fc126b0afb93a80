//! Dataset files and synthetic generators.
//!
//! File format: UTF-8 CSV with a header row `x_1,…,x_d,y` and one sample per
//! row, decimal point `.`, no thousands separators.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::rng::{chacha, standard_normal_vec, Stream};
use crate::types::{dot, Dataset, ParamVector, Sample};

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let d = headers
        .len()
        .checked_sub(1)
        .filter(|&d| d >= 1)
        .ok_or_else(|| {
            Error::InvalidDataset("header needs at least one input column and `y`".into())
        })?;
    for (j, h) in headers.iter().enumerate() {
        let expected = if j < d {
            format!("x_{}", j + 1)
        } else {
            "y".to_string()
        };
        if h != expected {
            return Err(Error::InvalidDataset(format!(
                "header column {} is `{h}`, expected `{expected}`",
                j + 1
            )));
        }
    }
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != d + 1 {
            return Err(Error::InvalidDataset(format!(
                "line {line}: {} fields, expected {}",
                rec.len(),
                d + 1
            )));
        }
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!("line {line}: cannot parse `{f}` as a number"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (x, y) = vals.split_at(d);
        samples.push(Sample::new(x.to_vec(), y[0]));
    }
    Dataset::new(samples)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    read_dataset(std::io::BufReader::new(file))
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let d = data.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
    header.push("y".into());
    wtr.write_record(&header)?;
    for s in data.samples() {
        let row: Vec<String> =
            s.x.iter()
                .chain(std::iter::once(&s.y))
                .map(|v| v.to_string())
                .collect();
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Generator spec for a synthetic regression dataset.
///
/// Inputs are standard normal, optionally rescaled to unit length. With
/// `planted`, a model `w°` with unit norm is drawn and `y = ⟨w°, x⟩ + noise·ε`;
/// otherwise `y = noise·ε`. All draws come from the data stream of `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub planted: bool,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

pub struct Synthetic {
    pub data: Dataset,
    pub planted: Option<ParamVector>,
}

pub fn synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.n < 1 {
        return Err(invalid("n", "need at least one sample"));
    }
    if spec.d < 1 {
        return Err(Error::InvalidDimension(spec.d));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(invalid(
            "noise",
            format!("{} must be finite and nonnegative", spec.noise),
        ));
    }
    let mut rng = chacha(spec.seed, Stream::Data);
    let mut xs: Vec<Vec<f64>> = (0..spec.n)
        .map(|_| standard_normal_vec(&mut rng, spec.d))
        .collect();
    if spec.normalize {
        for x in &mut xs {
            let norm = dot(x, x).sqrt();
            if norm > 0.0 {
                x.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    let planted = spec.planted.then(|| {
        let mut w = standard_normal_vec(&mut rng, spec.d);
        let norm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|v| *v /= norm);
        ParamVector::new(w)
    });
    let samples = xs
        .into_iter()
        .map(|x| {
            let clean = planted.as_ref().map_or(0.0, |w| dot(w, &x));
            let eps: f64 = standard_normal_vec(&mut rng, 1)[0];
            Sample::new(x, clean + spec.noise * eps)
        })
        .collect();
    Ok(Synthetic {
        data: Dataset::new(samples)?,
        planted,
    })
}
