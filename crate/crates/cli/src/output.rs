use std::io::Write;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::opts::{Format, Opts};

/// CSV cell for a float: 17 significant digits, `inf`/`-inf`/`NaN` spelled out.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One command result, renderable as CSV (comment notes then a table) or
/// as a JSON document.
pub struct Doc {
    notes: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    raw: Option<Vec<u8>>,
    json: Value,
}

impl Doc {
    pub fn table(header: &[&str], rows: Vec<Vec<String>>, json: Value) -> Doc {
        Doc { notes: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows, raw: None, json }
    }

    /// A CSV body produced elsewhere, header included.
    pub fn raw(body: Vec<u8>, json: Value) -> Doc {
        Doc { notes: Vec::new(), header: Vec::new(), rows: Vec::new(), raw: Some(body), json }
    }

    pub fn note(mut self, key: &str, value: impl Into<String>) -> Doc {
        self.notes.push((key.into(), value.into()));
        self
    }

    fn render(&self, config: &Value, format: Format) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut buf, &json!({ "config": config, "result": self.json }))?;
                buf.push(b'\n');
            }
            Format::Csv => {
                writeln!(buf, "# config: {}", serde_json::to_string(config)?)?;
                for (k, v) in &self.notes {
                    writeln!(buf, "# {k}: {v}")?;
                }
                match &self.raw {
                    Some(body) => buf.extend_from_slice(body),
                    None => {
                        let mut w = csv::Writer::from_writer(&mut buf);
                        w.write_record(&self.header)?;
                        for row in &self.rows {
                            w.write_record(row)?;
                        }
                        w.flush()?;
                    }
                }
            }
        }
        Ok(buf)
    }
}

/// Echo of everything needed to rerun the command.
pub fn config_echo(command: &str, opts: &Opts, extra: Value) -> Value {
    let mut v = json!({ "command": command, "version": env!("CARGO_PKG_VERSION") });
    if let (Some(obj), Ok(Value::Object(o))) = (v.as_object_mut(), serde_json::to_value(opts)) {
        obj.extend(o);
        if let Value::Object(e) = extra {
            obj.extend(e);
        }
    }
    v
}

pub fn emit(doc: &Doc, config: &Value, opts: &Opts) -> Result<()> {
    let bytes = doc.render(config, opts.format())?;
    match &opts.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}
