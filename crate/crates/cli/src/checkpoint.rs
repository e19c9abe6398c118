//! Trainer checkpoints: one text row per neuron, `c,w_1,...,w_d,b`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ntklab::kernels::NeuronParams;

pub fn write_checkpoint(path: &Path, params: &[NeuronParams]) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating checkpoint {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for p in params {
        write!(w, "{}", p.c)?;
        for v in &p.w {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", p.b)?;
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<NeuronParams>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening checkpoint {}", path.display()))?;
    let reader = BufReader::new(file);
    let mut params = Vec::new();
    let mut dim = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = trimmed
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}: malformed number", lineno + 1))?;
        if values.len() < 3 {
            bail!("line {}: need at least c, one weight, and b", lineno + 1);
        }
        let d = values.len() - 2;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                bail!("line {}: dimension {} != {}", lineno + 1, d, expected)
            }
            _ => {}
        }
        params.push(NeuronParams {
            c: values[0],
            w: values[1..1 + d].to_vec(),
            b: values[1 + d],
        });
    }
    if params.is_empty() {
        bail!("checkpoint {} holds no neurons", path.display());
    }
    Ok(params)
}
