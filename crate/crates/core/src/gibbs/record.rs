use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::LatentEvent;
use crate::error::Result;
use crate::partition::Partition;

/// One retained state of a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "P: Deserialize<'de>, G: Deserialize<'de>"))]
pub struct ChainSample<P, G> {
    pub sweep: usize,
    pub temperature: f64,
    pub z: Partition,
    pub n_clusters: usize,
    pub n_background: usize,
    pub background_rate: f64,
    pub log_joint: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu_bar: f64,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub latents: Vec<LatentEvent<P>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub empty_latents: Vec<LatentEvent<P>>,
    // `None` is never written, so a present field is always `Some`, even
    // when the globals are `()` and serialise as `null`.
    #[serde(default = "none", skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub globals: Option<G>,
}

fn none<G>() -> Option<G> {
    None
}

fn present<'de, D: serde::Deserializer<'de>, G: Deserialize<'de>>(d: D) -> std::result::Result<Option<G>, D::Error> {
    G::deserialize(d).map(Some)
}

/// Cheap per-sweep diagnostics, kept for every sweep including annealing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub sweep: usize,
    pub temperature: f64,
    pub n_clusters: usize,
    pub n_background: usize,
    pub log_joint: f64,
    pub background_rate: f64,
    pub nu_bar: f64,
    pub alpha: f64,
    pub beta: f64,
}

const TRACE_HEADER: &str = "sweep,temperature,n_clusters,n_background,log_joint,background_rate,nu_bar,alpha,beta";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord<P, G> {
    pub samples: Vec<ChainSample<P, G>>,
    pub trace: Vec<TraceRow>,
}

impl<P, G> Default for ChainRecord<P, G> {
    fn default() -> Self {
        Self {
            samples: Vec::new(),
            trace: Vec::new(),
        }
    }
}

impl<P: Serialize + DeserializeOwned, G: Serialize + DeserializeOwned> ChainRecord<P, G> {
    /// One JSON object per retained sample.
    pub fn write_samples_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_samples_jsonl<R: BufRead>(r: R) -> Result<Vec<ChainSample<P, G>>> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for t in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                t.sweep, t.temperature, t.n_clusters, t.n_background, t.log_joint, t.background_rate, t.nu_bar, t.alpha, t.beta
            )?;
        }
        Ok(())
    }
}

impl<P, G> ChainRecord<P, G> {
    pub fn cluster_counts(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.n_clusters).collect()
    }

    pub fn mean_clusters(&self) -> f64 {
        if self.samples.is_empty() {
            return f64::NAN;
        }
        self.samples.iter().map(|s| s.n_clusters as f64).sum::<f64>() / self.samples.len() as f64
    }

    pub fn last(&self) -> Option<&ChainSample<P, G>> {
        self.samples.last()
    }
}
