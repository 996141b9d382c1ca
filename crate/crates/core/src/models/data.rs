//! Tabular data for the example models and its CSV layout: a header row
//! `x1..xK` followed by either a `label` column (values -1/+1) or voxel
//! columns `v1..vV`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mixture::format_f64;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class labels in {-1, +1}.
    Labels(Vec<f64>),
    /// One activation vector per row.
    Activations(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub covariates: Vec<Vec<f64>>,
    pub targets: Targets,
}

impl DatasetTable {
    pub fn new(covariates: Vec<Vec<f64>>, targets: Targets) -> Result<Self> {
        let t = covariates.len();
        if t == 0 {
            return Err(Error::Config("dataset needs at least one row".into()));
        }
        let k = covariates[0].len();
        if covariates.iter().any(|r| r.len() != k) {
            return Err(Error::Config("ragged covariate rows".into()));
        }
        if covariates.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("covariates contain missing or non-finite entries".into()));
        }
        match &targets {
            Targets::Labels(c) => {
                if c.len() != t {
                    return Err(Error::Config(format!("{} labels for {t} rows", c.len())));
                }
                if c.iter().any(|&v| v != 1.0 && v != -1.0) {
                    return Err(Error::Input("labels must be -1 or +1".into()));
                }
            }
            Targets::Activations(u) => {
                if u.len() != t {
                    return Err(Error::Config(format!("{} activation rows for {t} covariate rows", u.len())));
                }
                let v = u[0].len();
                if u.iter().any(|r| r.len() != v) || u.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Input("activation rows are ragged or non-finite".into()));
                }
            }
        }
        Ok(Self { covariates, targets })
    }

    pub fn rows(&self) -> usize {
        self.covariates.len()
    }

    pub fn num_covariates(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn labels(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Labels(c) => Some(c),
            Targets::Activations(_) => None,
        }
    }

    pub fn activations(&self) -> Option<&[Vec<f64>]> {
        match &self.targets {
            Targets::Activations(u) => Some(u),
            Targets::Labels(_) => None,
        }
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let targets = match &self.targets {
            Targets::Labels(c) => Targets::Labels(c[start..end].to_vec()),
            Targets::Activations(u) => Targets::Activations(u[start..end].to_vec()),
        };
        Self::new(self.covariates[start..end].to_vec(), targets)
    }

    /// Leading `fraction` of rows and the remainder.
    pub fn split(&self, fraction: f64) -> Result<(Self, Self)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!("split fraction must lie in (0,1), got {fraction}")));
        }
        let cut = ((self.rows() as f64) * fraction).round() as usize;
        if cut == 0 || cut == self.rows() {
            return Err(Error::Config("split leaves an empty part".into()));
        }
        Ok((self.slice(0, cut)?, self.slice(cut, self.rows())?))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let k = self.num_covariates();
        let mut header: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
        match &self.targets {
            Targets::Labels(_) => header.push("label".into()),
            Targets::Activations(u) => header.extend((1..=u[0].len()).map(|i| format!("v{i}"))),
        }
        w.write_record(&header)?;
        for t in 0..self.rows() {
            let mut row: Vec<String> = self.covariates[t].iter().map(|v| format_f64(*v)).collect();
            match &self.targets {
                Targets::Labels(c) => row.push(if c[t] > 0.0 { "1".into() } else { "-1".into() }),
                Targets::Activations(u) => row.extend(u[t].iter().map(|v| format_f64(*v))),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.clone();
        let is_x = |h: &str| h.starts_with('x') && h[1..].parse::<usize>().is_ok();
        let is_v = |h: &str| h.starts_with('v') && h[1..].parse::<usize>().is_ok();
        let k = header.iter().take_while(|h| is_x(h)).count();
        let rest: Vec<&str> = header.iter().skip(k).collect();
        let labels = match rest.as_slice() {
            ["label"] => true,
            r if !r.is_empty() && r.iter().all(|h| is_v(h)) => false,
            _ => return Err(Error::Config("csv header must be x1..xK followed by `label` or v1..vV".into())),
        };
        let mut covariates = Vec::new();
        let mut lab = Vec::new();
        let mut act = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Input(format!("bad number `{s}`: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != header.len() {
                return Err(Error::Input("csv row has the wrong number of fields".into()));
            }
            covariates.push(vals[..k].to_vec());
            if labels {
                lab.push(vals[k]);
            } else {
                act.push(vals[k..].to_vec());
            }
        }
        let targets = if labels { Targets::Labels(lab) } else { Targets::Activations(act) };
        Self::new(covariates, targets)
    }
}
