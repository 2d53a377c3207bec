use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::report::{PlotSpec, Summary};

/// Melts the plottable outputs of a results directory into long-form CSV
/// with columns `experiment,series,x,y`.
pub fn emit_plot_data(dir: &Path) -> Result<String> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "series", "x", "y"])?;
    for spec in &summary.plots {
        melt(dir, spec, &summary.experiment, &mut w)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn melt(dir: &Path, spec: &PlotSpec, experiment: &str, w: &mut csv::Writer<Vec<u8>>) -> Result<()> {
    let path = dir.join(&spec.file);
    let mut rd = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        match headers.iter().position(|h| h == name) {
            Some(i) => Ok(i),
            None => bail!("{}: no column `{name}`", path.display()),
        }
    };
    let x = col(&spec.x)?;
    let group = spec.group.as_deref().map(col).transpose()?;
    let series: Vec<usize> = if spec.series.is_empty() {
        (0..headers.len()).filter(|i| *i != x && Some(*i) != group).collect()
    } else {
        spec.series.iter().map(|s| col(s)).collect::<Result<_>>()?
    };
    for rec in rd.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        for &s in &series {
            let y = &rec[s];
            if y.is_empty() {
                continue;
            }
            let name = match group {
                Some(g) => format!("{}[{}={}]", &headers[s], &headers[g], &rec[g]),
                None => headers[s].to_string(),
            };
            w.write_record([experiment, &name, &rec[x], y])?;
        }
    }
    Ok(())
}
