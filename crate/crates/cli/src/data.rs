use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use nsp::gibbs::ChainSample;
use nsp::{ChainRecord, MarkedPoint, Partition};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, SchemaError};

/// The parts of a dataset file the fitting commands need. Generated
/// datasets carry more (latent events, background rate); it is ignored.
#[derive(Debug, Deserialize)]
pub struct DataFile {
    pub points: Vec<MarkedPoint>,
    #[serde(default)]
    pub z: Option<Partition>,
}

impl DataFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let d: DataFile = read_json(path)?;
        if let Some(z) = &d.z {
            if z.n_total() != d.points.len() {
                return Err(SchemaError::invalid(path, "z", format!("{} labels for {} points", z.n_total(), d.points.len())).into());
            }
        }
        Ok(d)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_chain<P: Serialize + DeserializeOwned, G: Serialize + DeserializeOwned>(path: &Path) -> anyhow::Result<ChainRecord<P, G>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let samples: Vec<ChainSample<P, G>> =
        ChainRecord::<P, G>::read_samples_jsonl(BufReader::new(f)).with_context(|| format!("malformed chain file {}", path.display()))?;
    Ok(ChainRecord {
        samples,
        trace: Vec::new(),
    })
}
