use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const HEADER: [&str; 8] = ["scenario", "level", "n", "N", "metric", "value", "std_error", "seed"];

/// Documentation of the stream splitting, echoed into every manifest.
pub const RNG_SCHEME: &str = "ChaCha8 per ensemble member; key = splitmix64 chain from seed ^ rotl(fnv1a(stream name), 17); \
stream id = member index";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    /// Refinement level index, or `fit` for fitted summaries.
    pub level: String,
    pub n: usize,
    pub ensemble: usize,
    pub metric: String,
    pub value: f64,
    /// `None` when no standard error applies.
    pub std_error: Option<f64>,
    pub seed: u64,
}

/// Append-only experiment results.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<Row>,
}

/// Finite values in shortest round-trip exponent form; `NaN`, `inf` and
/// `-inf` are the sentinels.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:e}")
    }
}

impl ResultTable {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn find<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.level.clone(),
                r.n.to_string(),
                r.ensemble.to_string(),
                r.metric.clone(),
                format_f64(r.value),
                format_f64(r.std_error.unwrap_or(f64::NAN)),
                r.seed.to_string(),
            ])?;
        }
        Ok(w.into_inner()?)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    library: &'a str,
    library_version: &'a str,
    created_unix: u64,
    csv: String,
    rows: usize,
    threads: usize,
    rng: &'a str,
    columns: Vec<&'a str>,
    config: &'a ExperimentConfig,
}

/// Write `<out>/<scenario>.csv` and `<out>/<scenario>.manifest.toml`.
pub fn write_outputs(cfg: &ExperimentConfig, table: &ResultTable) -> Result<(PathBuf, PathBuf)> {
    let out = &cfg.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let csv_name = format!("{}.csv", cfg.scenario);
    let csv_path = out.join(&csv_name);
    write(&csv_path, &table.to_csv()?)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        library: "cadlag-rough",
        library_version: cadlag_rough::VERSION,
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        csv: csv_name,
        rows: table.len(),
        threads: rayon::current_num_threads(),
        rng: RNG_SCHEME,
        columns: HEADER.to_vec(),
        config: cfg,
    };
    let manifest_path = out.join(format!("{}.manifest.toml", cfg.scenario));
    write(&manifest_path, toml::to_string(&manifest)?.as_bytes())?;
    Ok((csv_path, manifest_path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinels_and_round_trip() {
        assert_eq!(format_f64(f64::NAN), "NaN");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
        for v in [0.1, -3.25e-17, 1e300, 0.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let mut t = ResultTable::default();
        t.push(Row {
            scenario: "s".into(),
            level: "0".into(),
            n: 4,
            ensemble: 2,
            metric: "m".into(),
            value: 0.5,
            std_error: None,
            seed: 7,
        });
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "scenario,level,n,N,metric,value,std_error,seed\ns,0,4,2,m,5e-1,NaN,7\n");
    }
}
