//! Draw and diagnostics export.
//!
//! Draws are written as CSV with header `chain,draw,<param names...>`.
//! Diagnostics are JSON with one entry per parameter (`rhat`, `ess_bulk`)
//! and one per chain (`divergences`, `step_size`).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::PosteriorSamples;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rhat: f64,
    pub ess_bulk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub chain: usize,
    pub divergences: usize,
    pub step_size: f64,
    pub mean_accept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_chains: usize,
    pub n_draws: usize,
    pub max_rhat: f64,
    pub min_ess_bulk: f64,
    pub total_divergences: usize,
    pub parameters: Vec<ParamEntry>,
    pub chains: Vec<ChainEntry>,
}

impl DiagnosticsReport {
    pub fn new(samples: &PosteriorSamples, names: &[String]) -> Self {
        assert_eq!(names.len(), samples.dim, "one name per parameter");
        let parameters = names
            .iter()
            .zip(&samples.diagnostics)
            .map(|(name, d)| ParamEntry { name: name.clone(), rhat: d.rhat, ess_bulk: d.ess_bulk })
            .collect();
        let chains = samples
            .chains
            .iter()
            .enumerate()
            .map(|(chain, c)| ChainEntry {
                chain,
                divergences: c.divergences,
                step_size: c.step_size,
                mean_accept: c.mean_accept,
            })
            .collect();
        Self {
            n_chains: samples.n_chains,
            n_draws: samples.n_draws,
            max_rhat: samples.max_rhat(),
            min_ess_bulk: samples.min_ess(),
            total_divergences: samples.total_divergences(),
            parameters,
            chains,
        }
    }

    pub fn write_json<W: Write>(&self, writer: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(writer, self)
    }

    pub fn read_json<R: Read>(reader: R) -> serde_json::Result<Self> {
        serde_json::from_reader(reader)
    }
}

pub fn write_draws_csv<W: Write>(writer: W, samples: &PosteriorSamples, names: &[String]) -> csv::Result<()> {
    assert_eq!(names.len(), samples.dim, "one name per parameter");
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(samples.dim + 2);
    for chain in 0..samples.n_chains {
        for draw in 0..samples.n_draws {
            row.clear();
            row.push(chain.to_string());
            row.push(draw.to_string());
            row.extend(samples.draw(chain, draw).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
