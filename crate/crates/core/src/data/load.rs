use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::Interaction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Csv,
    Tsv,
    JsonLines,
}

impl InputFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "tsv" | "tab" => Some(Self::Tsv),
            "jsonl" | "ndjson" | "json" => Some(Self::JsonLines),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadedInteractions {
    pub interactions: Vec<Interaction>,
    pub skipped: usize,
}

fn parse_timestamp(raw: &str) -> Option<u64> {
    raw.trim().parse::<u64>().ok()
}

/// Reads `user,item,timestamp` records in file order. Unparseable rows are
/// skipped and counted.
pub fn load_interactions(path: &Path, format: InputFormat) -> Result<LoadedInteractions> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let loaded = match format {
        InputFormat::Csv => load_delimited(file, b',', path)?,
        InputFormat::Tsv => load_delimited(file, b'\t', path)?,
        InputFormat::JsonLines => load_json_lines(file, path)?,
    };
    if loaded.interactions.is_empty() {
        warn!("{}: no interactions loaded", path.display());
    }
    if loaded.skipped > 0 {
        warn!("{}: skipped {} malformed rows", path.display(), loaded.skipped);
    }
    log::info!(
        "{}: loaded {} interactions",
        path.display(),
        loaded.interactions.len()
    );
    Ok(loaded)
}

fn load_delimited(file: File, delimiter: u8, path: &Path) -> Result<LoadedInteractions> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(u), Some(i), Some(t)) = (col("user"), col("item"), col("timestamp")) else {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "header must contain user, item and timestamp".into(),
        });
    };

    let mut out = LoadedInteractions::default();
    for record in reader.records() {
        let parsed = record.ok().and_then(|r| {
            let user = r.get(u)?.to_string();
            let item = r.get(i)?.to_string();
            let timestamp = parse_timestamp(r.get(t)?)?;
            (!user.is_empty() && !item.is_empty()).then_some(Interaction {
                user,
                item,
                timestamp,
            })
        });
        match parsed {
            Some(x) => out.interactions.push(x),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

fn json_key(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) if !s.is_empty() => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn load_json_lines(file: File, path: &Path) -> Result<LoadedInteractions> {
    let mut out = LoadedInteractions::default();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .and_then(|v| {
                let timestamp = match v.get("timestamp")? {
                    serde_json::Value::Number(n) => n.as_u64()?,
                    serde_json::Value::String(s) => parse_timestamp(s)?,
                    _ => return None,
                };
                Some(Interaction {
                    user: json_key(v.get("user")?)?,
                    item: json_key(v.get("item")?)?,
                    timestamp,
                })
            });
        match parsed {
            Some(x) => out.interactions.push(x),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Writes interactions as a `user,item,timestamp` csv.
pub fn write_interactions_csv(path: &Path, interactions: &[Interaction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let io_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["user", "item", "timestamp"]).map_err(io_err)?;
    for x in interactions {
        w.write_record([x.user.as_str(), x.item.as_str(), &x.timestamp.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(suffix: &str, body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_csv_in_file_order() {
        let f = write_tmp(".csv", "user,item,timestamp\nu1,i1,10\nu1,i2,20\nu2,i1,15\n");
        let got = load_interactions(f.path(), InputFormat::Csv).unwrap();
        let triples: Vec<_> = got
            .interactions
            .iter()
            .map(|x| (x.user.as_str(), x.item.as_str(), x.timestamp))
            .collect();
        assert_eq!(triples, vec![("u1", "i1", 10), ("u1", "i2", 20), ("u2", "i1", 15)]);
        assert_eq!(got.skipped, 0);
    }

    #[test]
    fn empty_file_yields_no_interactions() {
        let f = write_tmp(".csv", "user,item,timestamp\n");
        let got = load_interactions(f.path(), InputFormat::Csv).unwrap();
        assert!(got.interactions.is_empty());
    }

    #[test]
    fn non_numeric_timestamp_is_skipped() {
        let f = write_tmp(".csv", "user,item,timestamp\nu1,i1,10\nu1,i2,yesterday\n");
        let got = load_interactions(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(got.interactions.len(), 1);
        assert_eq!(got.skipped, 1);
    }

    #[test]
    fn tsv_and_json_lines() {
        let f = write_tmp(".tsv", "timestamp\tuser\titem\n5\ta\tx\n-3\ta\ty\n");
        let got = load_interactions(f.path(), InputFormat::Tsv).unwrap();
        assert_eq!(got.interactions.len(), 1);
        assert_eq!(got.skipped, 1);

        let f = write_tmp(
            ".jsonl",
            "{\"user\":\"a\",\"item\":7,\"timestamp\":3}\n\n{\"user\":\"b\"}\n{\"user\":1,\"item\":\"q\",\"timestamp\":\"4\"}\n",
        );
        let got = load_interactions(f.path(), InputFormat::JsonLines).unwrap();
        assert_eq!(got.interactions.len(), 2);
        assert_eq!(got.interactions[0].item, "7");
        assert_eq!(got.interactions[1].user, "1");
        assert_eq!(got.skipped, 1);
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_interactions(Path::new("/nonexistent/x.csv"), InputFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
