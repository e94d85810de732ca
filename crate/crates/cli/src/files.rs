//! Reading JSON / JSONL inputs and writing outputs to a file or stdout.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Read a file holding one JSON value, a JSON array, or JSON lines. Arrays
/// at the top level are flattened into their items.
pub fn read_items<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let input_err = |message: String| CliError::Input { path: path.display().to_string(), message };
    let mut items = Vec::new();
    for value in serde_json::Deserializer::from_str(&text).into_iter::<Value>() {
        let value = value.map_err(|e| input_err(e.to_string()))?;
        let values = match value {
            Value::Array(vs) => vs,
            v => vec![v],
        };
        for v in values {
            let index = items.len();
            items.push(serde_json::from_value(v).map_err(|e| input_err(format!("item {index}: {e}")))?);
        }
    }
    Ok(items)
}

/// Read a file holding exactly one JSON value.
pub fn read_one<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input { path: path.display().to_string(), message: e.to_string() })
}

pub struct Output {
    path: Option<String>,
    sink: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let (path, sink): (Option<String>, Box<dyn Write>) = match path {
            Some(p) => (
                Some(p.display().to_string()),
                Box::new(BufWriter::new(std::fs::File::create(p).map_err(io_err(p))?)),
            ),
            None => (None, Box::new(BufWriter::new(std::io::stdout()))),
        };
        Ok(Self { path, sink })
    }

    fn err(&self, source: std::io::Error) -> CliError {
        CliError::Io { path: self.path.clone().unwrap_or_else(|| "<stdout>".into()), source }
    }

    pub fn line(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.sink, "{text}").map_err(|e| self.err(e))
    }

    /// One compact JSON object per line.
    pub fn jsonl<T: Serialize>(&mut self, items: &[T]) -> Result<(), CliError> {
        for item in items {
            let text = serde_json::to_string(item).expect("records serialize");
            self.line(&text)?;
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("reports serialize");
        self.line(&text)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.sink.flush().map_err(|e| self.err(e))
    }
}
