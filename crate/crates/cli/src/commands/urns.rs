use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use nsp::partition::{sample_sequential_urn, PartitionSampler, UrnConfig};
use nsp::rng::streams;
use nsp::{Partition, RngStream};
use rayon::prelude::*;

use crate::config::{RunConfig, UrnsSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    /// Draws from the exact law p(C | N = n).
    Exact,
    /// Seats points one at a time with the one-step urn.
    Sequential,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Exact => "exact",
            Scheme::Sequential => "sequential",
        }
    }
}

struct Cell {
    family: &'static str,
    alpha: f64,
    gamma: f64,
    discount: f64,
    scheme: Scheme,
    urn: UrnConfig,
}

struct CellResult {
    ks: Vec<usize>,
    largest: Vec<usize>,
    examples: Vec<Partition>,
}

pub fn run(config: Option<&Path>, seed: Option<u64>, out: &Path, n: Option<usize>, draws: Option<usize>) -> anyhow::Result<()> {
    let (mut spec, cfg_seed) = match config {
        Some(p) => {
            let c = RunConfig::load(p)?;
            (c.urns, c.seed)
        }
        None => (UrnsSpec::default(), 0),
    };
    if let Some(n) = n {
        spec.n = n;
    }
    if let Some(d) = draws {
        spec.draws = d;
    }
    anyhow::ensure!(spec.n >= 1 && spec.draws >= 1, "need n >= 1 and draws >= 1");
    let seed = seed.unwrap_or(cfg_seed);
    let cells = grid(&spec)?;
    let root = RngStream::new(seed, streams::URNS);
    let results = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| simulate(c, &spec, root.child(i as u64)))
        .collect::<nsp::Result<Vec<_>>>()?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_outputs(out, &spec, &cells, &results)
}

fn grid(spec: &UrnsSpec) -> anyhow::Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for &alpha in &spec.alphas {
        for &gamma in &spec.gammas {
            // α = 0 stands for the Dirichlet-process limit.
            let (family, urn) = if alpha == 0.0 {
                ("dpmm", UrnConfig::dpmm(gamma))
            } else {
                ("nsp", UrnConfig::nsp_with_new_weight(alpha, spec.beta, gamma))
            };
            urn.validate()?;
            for scheme in [Scheme::Exact, Scheme::Sequential] {
                cells.push(Cell {
                    family,
                    alpha,
                    gamma,
                    discount: 0.0,
                    scheme,
                    urn,
                });
            }
        }
    }
    if spec.pitman_yor_discount > 0.0 {
        for &gamma in &spec.gammas {
            let urn = UrnConfig::pitman_yor(gamma, spec.pitman_yor_discount)?;
            for scheme in [Scheme::Exact, Scheme::Sequential] {
                cells.push(Cell {
                    family: "pitman-yor",
                    alpha: f64::NAN,
                    gamma,
                    discount: spec.pitman_yor_discount,
                    scheme,
                    urn,
                });
            }
        }
    }
    Ok(cells)
}

fn simulate(cell: &Cell, spec: &UrnsSpec, mut rng: RngStream) -> nsp::Result<CellResult> {
    let exact = match cell.scheme {
        Scheme::Exact => Some(PartitionSampler::new(spec.n, &cell.urn)?),
        Scheme::Sequential => None,
    };
    let mut res = CellResult {
        ks: Vec::with_capacity(spec.draws),
        largest: Vec::with_capacity(spec.draws),
        examples: Vec::new(),
    };
    for _ in 0..spec.draws {
        let p = match &exact {
            Some(s) => s.sample(&mut rng)?,
            None => sample_sequential_urn(spec.n, &cell.urn, &mut rng)?,
        };
        res.ks.push(p.n_clusters());
        res.largest.push(p.sizes().into_iter().max().unwrap_or(0));
        if res.examples.len() < spec.labelings {
            res.examples.push(p);
        }
    }
    Ok(res)
}

fn mean_sd(xs: &[usize]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<usize>() as f64 / n;
    let v = xs.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

fn fmt_param(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn write_outputs(dir: &Path, spec: &UrnsSpec, cells: &[Cell], results: &[CellResult]) -> anyhow::Result<()> {
    let create = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let p = dir.join(name);
        Ok(BufWriter::new(
            File::create(&p).with_context(|| format!("cannot create {}", p.display()))?,
        ))
    };
    let mut summary = create("summary.csv")?;
    let mut hist = create("histogram.csv")?;
    let mut labels = create("labelings.csv")?;
    writeln!(
        summary,
        "family,scheme,alpha,beta,gamma,discount,n,draws,mean_clusters,sd_clusters,mean_largest"
    )?;
    writeln!(hist, "family,scheme,alpha,gamma,discount,clusters,count")?;
    writeln!(labels, "family,scheme,alpha,gamma,discount,draw,labels")?;
    for (c, r) in cells.iter().zip(results) {
        let key = format!("{},{},{}", fmt_param(c.alpha), c.gamma, c.discount);
        let (m, sd) = mean_sd(&r.ks);
        let (ml, _) = mean_sd(&r.largest);
        let beta = if c.family == "nsp" { spec.beta.to_string() } else { String::new() };
        writeln!(
            summary,
            "{},{},{},{beta},{},{},{},{},{m},{sd},{ml}",
            c.family,
            c.scheme.name(),
            fmt_param(c.alpha),
            c.gamma,
            c.discount,
            spec.n,
            spec.draws
        )?;
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for &k in &r.ks {
            *counts.entry(k).or_default() += 1;
        }
        for (k, count) in counts {
            writeln!(hist, "{},{},{key},{k},{count}", c.family, c.scheme.name())?;
        }
        for (d, p) in r.examples.iter().enumerate() {
            let z: Vec<String> = p.labels().iter().map(usize::to_string).collect();
            writeln!(labels, "{},{},{key},{d},{}", c.family, c.scheme.name(), z.join(" "))?;
        }
    }
    for w in [&mut summary, &mut hist, &mut labels] {
        w.flush()?;
    }
    Ok(())
}
