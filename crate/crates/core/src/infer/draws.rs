use std::io::{Read, Write};

use super::InferError;

/// Kept draws of one chain plus its sampler diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainDraws {
    /// Iterations × parameters.
    pub values: Vec<Vec<f64>>,
    pub lp: Vec<f64>,
    pub accept_stat: Vec<f64>,
    pub treedepth: Vec<usize>,
    pub divergent: Vec<bool>,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

impl ChainDraws {
    pub(crate) fn with_capacity(n: usize) -> Self {
        ChainDraws {
            values: Vec::with_capacity(n),
            lp: Vec::with_capacity(n),
            accept_stat: Vec::with_capacity(n),
            treedepth: Vec::with_capacity(n),
            divergent: Vec::with_capacity(n),
            ..Default::default()
        }
    }
}

/// Posterior draws on the constrained scale, chain by chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl Draws {
    /// Draws without sampler diagnostics, e.g. read back from a file.
    pub fn from_values(names: Vec<String>, chains: Vec<Vec<Vec<f64>>>) -> Draws {
        let chains = chains
            .into_iter()
            .map(|values| ChainDraws {
                values,
                ..Default::default()
            })
            .collect();
        Draws { names, chains }
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Kept draws of the shortest chain.
    pub fn n_iter(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.values.len())
            .min()
            .unwrap_or(0)
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.values.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain series of parameter `p`.
    pub fn chain_series(&self, p: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.values.iter().map(|row| row[p]).collect())
            .collect()
    }

    /// All draws of parameter `p`, chains concatenated.
    pub fn pooled(&self, p: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.values.iter().map(move |row| row[p]))
            .collect()
    }

    pub fn by_name(&self, name: &str) -> Result<Vec<f64>, InferError> {
        let p = self
            .index_of(name)
            .ok_or_else(|| InferError::UnknownParameter(name.to_string()))?;
        Ok(self.pooled(p))
    }

    /// All draw rows, chains concatenated.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.chains
            .iter()
            .flat_map(|c| c.values.iter().map(|r| r.as_slice()))
    }

    /// Divergent transitions after warmup.
    pub fn divergences(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|d| **d).count())
            .sum()
    }

    pub fn treedepth_hits(&self, max_treedepth: usize) -> usize {
        self.chains
            .iter()
            .map(|c| c.treedepth.iter().filter(|d| **d >= max_treedepth).count())
            .sum()
    }

    pub fn mean_accept_stat(&self) -> f64 {
        let all: Vec<f64> = self
            .chains
            .iter()
            .flat_map(|c| c.accept_stat.iter().copied())
            .collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }

    /// Writes `chain,iteration,<names...>` with one row per kept draw.
    /// Values are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), InferError> {
        let mut w = csv::Writer::from_writer(sink);
        let err = |e: csv::Error| InferError::DrawFile(e.to_string());
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, row) in chain.values.iter().enumerate() {
                let mut rec = vec![(c + 1).to_string(), (i + 1).to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(err)?;
            }
        }
        w.flush().map_err(|e| InferError::DrawFile(e.to_string()))
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Draws, InferError> {
        let mut r = csv::Reader::from_reader(source);
        let err = |e: csv::Error| InferError::DrawFile(e.to_string());
        let header = r.headers().map_err(err)?.clone();
        if header.len() < 2 || &header[0] != "chain" || &header[1] != "iteration" {
            return Err(InferError::DrawFile(
                "expected leading `chain,iteration` columns".into(),
            ));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(err)?;
            let bad = |what: &str| InferError::DrawFile(format!("row {}: bad {what}", line + 1));
            let chain: usize = rec[0].parse().map_err(|_| bad("chain"))?;
            if chain == 0 || chain > chains.len() + 1 {
                return Err(bad("chain"));
            }
            if chain > chains.len() {
                chains.push(Vec::new());
            }
            let row = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("value"))?;
            chains[chain - 1].push(row);
        }
        Ok(Draws::from_values(names, chains))
    }
}
