//! Comparison engines: MAP, diagonal Laplace and Hamiltonian Monte Carlo.

mod hmc;
mod laplace;
mod map;

use std::io::{Read, Write};

pub use hmc::{hamiltonian, hmc_sample, leapfrog, HmcConfig, PosteriorSamples};
pub use laplace::{laplace_diagonal, DiagonalGaussian};
pub use map::{map_estimate, map_estimate_with, MapOptions};

use crate::error::{Error, Result};
use crate::mixture::format_f64;
use crate::model::ParameterVector;

/// One row per sample, one column per coordinate (`p1..pD`).
pub fn write_samples_csv<W: Write>(samples: &[ParameterVector], out: W) -> Result<()> {
    let dim = samples.first().map_or(0, |s| s.len());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record((1..=dim).map(|i| format!("p{i}")))?;
    for s in samples {
        if s.len() != dim {
            return Err(Error::Input("samples differ in dimension".into()));
        }
        w.write_record(s.iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<ParameterVector>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let vals = rec?
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Input(format!("bad number `{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(ParameterVector::new(vals)?);
    }
    Ok(out)
}
