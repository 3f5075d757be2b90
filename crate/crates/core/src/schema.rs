//! JSON file formats. Complex numbers are written as `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{CurveScheme, PointScheme, Scheme};
use crate::projective::{CMatrix, ProjPoint};

/// A complex matrix as separate real and imaginary row arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for ComplexMatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        ComplexMatrixJson { re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

impl ComplexMatrixJson {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let nrows = self.re.len();
        let ncols = self.re.first().map_or(0, |r| r.len());
        if self.im.len() != nrows || self.re.iter().chain(&self.im).any(|r| r.len() != ncols) {
            return Err(Error::Configuration("ragged complex matrix".into()));
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| Complex64::new(self.re[i][j], self.im[i][j])))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Points,
    Curve,
}

/// On-disk description of a scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub n: usize,
    #[serde(rename = "type")]
    pub kind: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Vec<[f64; 2]>>>,
}

fn pairs(v: impl IntoIterator<Item = Complex64>) -> Vec<[f64; 2]> {
    v.into_iter().map(|z| [z.re, z.im]).collect()
}

fn complexes(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

impl SchemeFile {
    pub fn from_scheme(scheme: &Scheme) -> Self {
        match scheme {
            Scheme::Points(p) => SchemeFile {
                n: p.n(),
                kind: SchemeKind::Points,
                points: Some(p.points().iter().map(|q| pairs(q.coords().iter().copied())).collect()),
                multiplicities: Some(p.multiplicities().to_vec()),
                degree: None,
                components: None,
            },
            Scheme::Curve(c) => SchemeFile {
                n: c.n(),
                kind: SchemeKind::Curve,
                points: None,
                multiplicities: None,
                degree: Some(c.degree()),
                components: Some(c.components().into_iter().map(pairs).collect()),
            },
        }
    }

    pub fn to_scheme(&self) -> Result<Scheme> {
        let dim = self.n + 1;
        match self.kind {
            SchemeKind::Points => {
                let raw = self
                    .points
                    .as_ref()
                    .ok_or_else(|| Error::Configuration("point scheme without \"points\"".into()))?;
                let mut pts = Vec::with_capacity(raw.len());
                for p in raw {
                    if p.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
                    }
                    pts.push(ProjPoint::from_slice(&complexes(p))?);
                }
                let mult = self.multiplicities.clone().unwrap_or_else(|| vec![1; pts.len()]);
                Ok(Scheme::Points(PointScheme::new(pts, mult)?))
            }
            SchemeKind::Curve => {
                let degree = self.degree.ok_or_else(|| Error::Configuration("curve without \"degree\"".into()))?;
                let comps = self
                    .components
                    .as_ref()
                    .ok_or_else(|| Error::Configuration("curve without \"components\"".into()))?;
                if comps.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: comps.len() });
                }
                let comps = comps.iter().map(|c| complexes(c)).collect();
                Ok(Scheme::Curve(CurveScheme::new(degree, comps)?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn read_scheme(path: &Path) -> Result<Scheme> {
    let text = std::fs::read_to_string(path)?;
    SchemeFile::from_json(&text)?.to_scheme()
}

pub fn write_scheme(path: &Path, scheme: &Scheme) -> Result<()> {
    std::fs::write(path, SchemeFile::from_scheme(scheme).to_json()?)?;
    Ok(())
}
