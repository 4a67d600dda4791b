//! Posterior summaries of the per-pump random effects `u_i = u_raw[i]·σ_u`.

use std::io::{Read, Write};

use hazlingam_nuts::{hdi, PosteriorSamples};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::hazard::ParamLayout;

pub const EFFECTS_HEADER: [&str; 4] = ["pump_id", "u_mean", "hdi_low", "hdi_high"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectEstimate {
    pub pump_id: String,
    pub u_mean: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Posterior mean and `mass` HDI of every `u_i`, pooled over all chains.
pub fn extract_random_effects(
    samples: &PosteriorSamples,
    layout: &ParamLayout,
    pump_ids: &[String],
    mass: f64,
) -> Vec<RandomEffectEstimate> {
    assert_eq!(pump_ids.len(), layout.n_pumps, "one identifier per pump");
    assert_eq!(samples.dim, layout.dim(), "samples match the layout");
    let zeta = layout.zeta();
    let mut u = vec![Vec::with_capacity(samples.n_chains * samples.n_draws); layout.n_pumps];
    for draw in samples.iter_draws() {
        let sigma = draw[zeta].exp();
        for (i, ui) in u.iter_mut().enumerate() {
            ui.push(draw[layout.u_raw(i)] * sigma);
        }
    }
    pump_ids
        .iter()
        .zip(u)
        .map(|(id, draws)| {
            let (lo, hi) = hdi(&draws, mass);
            RandomEffectEstimate {
                pump_id: id.clone(),
                u_mean: draws.iter().sum::<f64>() / draws.len() as f64,
                hdi_low: lo,
                hdi_high: hi,
            }
        })
        .collect()
}

pub fn write_effects_csv<W: Write>(writer: W, estimates: &[RandomEffectEstimate]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    for e in estimates {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_effects_csv<R: Read>(reader: R) -> Result<Vec<RandomEffectEstimate>, DataError> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(EFFECTS_HEADER) {
        return Err(DataError::Header { expected: EFFECTS_HEADER.join(",") });
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
