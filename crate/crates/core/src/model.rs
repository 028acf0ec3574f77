//! Persisted model: a small TOML document holding the network shape, the
//! parameter blocks in chromosome order and the normalisation used for
//! training. Reals are written with 17 significant digits so every value
//! reads back bit-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::dataset::{ColumnStats, NormStats, Orientation};
use crate::error::{Error, Result};
use crate::network::{NetworkParams, NetworkShape};

pub const FORMAT: &str = "gabp-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub params: NetworkParams,
    pub norm: Option<NormStats>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    #[allow(dead_code)]
    generator: Option<String>,
    shape: NetworkShape,
    params: ParamBlocks,
    normalization: Option<NormBlock>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamBlocks {
    w: Vec<f64>,
    gamma: Vec<f64>,
    v: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NormBlock {
    x_min: Vec<f64>,
    x_max: Vec<f64>,
    orientation: Vec<Orientation>,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_array(out: &mut String, key: &str, values: &[f64]) {
    if values.len() <= 4 {
        let items: Vec<String> = values.iter().map(|&v| real(v)).collect();
        let _ = writeln!(out, "{key} = [{}]", items.join(", "));
        return;
    }
    let _ = writeln!(out, "{key} = [");
    for chunk in values.chunks(4) {
        let items: Vec<String> = chunk.iter().map(|&v| real(v)).collect();
        let _ = writeln!(out, "    {},", items.join(", "));
    }
    let _ = writeln!(out, "]");
}

impl ModelFile {
    pub fn new(params: NetworkParams, norm: Option<NormStats>) -> Result<Self> {
        if let Some(n) = &norm {
            if n.len() != params.shape().inputs {
                return Err(Error::Dimension {
                    what: "normalisation columns",
                    expected: params.shape().inputs,
                    found: n.len(),
                });
            }
        }
        Ok(Self { params, norm })
    }

    pub fn shape(&self) -> NetworkShape {
        self.params.shape()
    }

    pub fn to_toml(&self) -> String {
        let s = self.params.shape();
        let mut out = String::new();
        let _ = writeln!(out, "format = \"{FORMAT}\"");
        let _ = writeln!(out, "version = {FORMAT_VERSION}");
        let _ = writeln!(out, "generator = \"gabp {}\"", crate::VERSION);
        let _ = writeln!(
            out,
            "\n[shape]\ninputs = {}\nhidden = {}\noutputs = {}",
            s.inputs, s.hidden, s.outputs
        );
        out.push_str("\n[params]\n");
        write_array(&mut out, "w", self.params.w());
        write_array(&mut out, "gamma", self.params.gamma());
        write_array(&mut out, "v", self.params.v());
        write_array(&mut out, "h", self.params.h());
        if let Some(norm) = &self.norm {
            out.push_str("\n[normalization]\n");
            let mins: Vec<f64> = norm.columns.iter().map(|c| c.x_min).collect();
            let maxs: Vec<f64> = norm.columns.iter().map(|c| c.x_max).collect();
            write_array(&mut out, "x_min", &mins);
            write_array(&mut out, "x_max", &maxs);
            let flags: Vec<String> = norm
                .columns
                .iter()
                .map(|c| match c.orientation {
                    Orientation::Benefit => "\"benefit\"".to_string(),
                    Orientation::Cost => "\"cost\"".to_string(),
                })
                .collect();
            let _ = writeln!(out, "orientation = [{}]", flags.join(", "));
        }
        out
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: Document = toml::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if doc.format != FORMAT {
            return Err(Error::Model(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(Error::Model(format!("unsupported version {}", doc.version)));
        }
        let shape = NetworkShape::new(doc.shape.inputs, doc.shape.hidden, doc.shape.outputs)?;
        let p = doc.params;
        let params = NetworkParams::new(shape, p.w, p.gamma, p.v, p.h)?;
        let norm = match doc.normalization {
            None => None,
            Some(n) => {
                if n.x_min.len() != n.x_max.len() || n.x_min.len() != n.orientation.len() {
                    return Err(Error::Model("normalisation arrays differ in length".into()));
                }
                let columns = n
                    .x_min
                    .iter()
                    .zip(&n.x_max)
                    .zip(&n.orientation)
                    .map(|((&x_min, &x_max), &orientation)| {
                        if x_min > x_max {
                            return Err(Error::Model(format!(
                                "x_min {x_min} exceeds x_max {x_max}"
                            )));
                        }
                        Ok(ColumnStats {
                            x_min,
                            x_max,
                            orientation,
                        })
                    })
                    .collect::<Result<_>>()?;
                Some(NormStats { columns })
            }
        };
        Self::new(params, norm)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
