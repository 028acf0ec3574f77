//! Real-coded chromosome layout of a network.
//!
//! Genes are laid out as
//!
//! | genes                                | block   | entry                           |
//! |--------------------------------------|---------|---------------------------------|
//! | `0 .. q*n`                           | `W`     | `W[j][i]` at `j*n + i`          |
//! | `q*n .. q*n + q`                     | `gamma` | `gamma[j]`                      |
//! | `q*(n+1) .. q*(n+1) + m*q`           | `V`     | `V[k][j]` at `q*(n+1) + k*q + j`|
//! | `q*(n+1) + m*q .. l`                 | `h`     | `h[k]`                          |
//!
//! for `n` inputs, `q` hidden and `m` output neurons, where `W[j][i]` is the
//! weight from input `i` into hidden neuron `j` and `V[k][j]` the weight from
//! hidden neuron `j` into output `k`. [`gene_location`] gives the same
//! mapping programmatically.

use crate::error::{Error, Result};
use crate::network::{NetworkParams, NetworkShape};

/// `(n + 1) q + (q + 1) m`.
pub fn chromosome_length(shape: NetworkShape) -> usize {
    shape.parameter_count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    pub genes: Vec<f64>,
}

impl Chromosome {
    pub fn new(genes: Vec<f64>) -> Self {
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

pub fn encode(params: &NetworkParams) -> Result<Chromosome> {
    if !params.is_finite() {
        return Err(Error::NonFinite("network parameters"));
    }
    Ok(Chromosome::new(params.iter().copied().collect()))
}

pub fn decode(chromosome: &Chromosome, shape: NetworkShape) -> Result<NetworkParams> {
    let expected = chromosome_length(shape);
    if chromosome.len() != expected {
        return Err(Error::ChromosomeLength {
            expected,
            found: chromosome.len(),
        });
    }
    NetworkParams::new(
        shape,
        chromosome.genes[..shape.hidden * shape.inputs].to_vec(),
        chromosome.genes[shape.hidden * shape.inputs..shape.hidden * (shape.inputs + 1)].to_vec(),
        chromosome.genes[shape.hidden * (shape.inputs + 1)..expected - shape.outputs].to_vec(),
        chromosome.genes[expected - shape.outputs..].to_vec(),
    )
}

/// Length and finiteness must already hold.
pub(crate) fn decode_unchecked(genes: &[f64], shape: NetworkShape) -> NetworkParams {
    let mut p = NetworkParams::zeros(shape);
    for (dst, src) in p.iter_mut().zip(genes) {
        *dst = *src;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    W,
    Gamma,
    V,
    H,
}

/// Which matrix entry a gene encodes. Vectors report column 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneLocation {
    pub block: Block,
    pub row: usize,
    pub col: usize,
}

pub fn gene_location(shape: NetworkShape, index: usize) -> Option<GeneLocation> {
    let (n, q, m) = (shape.inputs, shape.hidden, shape.outputs);
    let loc = |block, row, col| Some(GeneLocation { block, row, col });
    if index < q * n {
        loc(Block::W, index / n, index % n)
    } else if index < q * (n + 1) {
        loc(Block::Gamma, index - q * n, 0)
    } else if index < q * (n + 1) + m * q {
        let off = index - q * (n + 1);
        loc(Block::V, off / q, off % q)
    } else if index < chromosome_length(shape) {
        loc(Block::H, index - q * (n + 1) - m * q, 0)
    } else {
        None
    }
}
