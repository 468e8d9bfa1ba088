// SPDX-License-Identifier: Apache-2.0

//! On-disk formats.
//!
//! Every format is plain text, line oriented and whitespace delimited. `#`
//! starts a comment. Each file opens with `format_version 1`. The grammars are
//! documented in `book/src/formats.md`.

mod cache;
mod design_file;
mod heatmap;
mod ir_csv;
mod weights;

pub use cache::{cache_key, design_hash, read_cached_volume, write_cached_volume};
pub use design_file::{
    parse_design, parse_design_str, parse_slice_trace, parse_slices_str, parse_vector, read_bundle, write_design,
    write_design_string, write_slices, write_slices_string,
};
pub use heatmap::{write_heatmap, write_heatmap_csv, write_heatmap_ppm, Heatmap};
pub use ir_csv::{read_ir_csv, write_ir_csv};
pub use weights::{read_weights, read_weights_for, read_weights_str, write_weights, write_weights_string};

use std::path::Path;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Tokenised, comment-stripped lines with 1-based line numbers.
pub(crate) struct Records<'a> {
    file: &'a str,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

pub(crate) struct Record<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

impl<'a> Records<'a> {
    pub fn new(file: &'a str, text: &'a str) -> Self {
        Self {
            file,
            lines: text.lines().enumerate().peekable(),
        }
    }

    pub fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::parse(self.file, line, message)
    }

    /// Reads `format_version <v>` as the first record.
    pub fn expect_version(&mut self) -> Result<()> {
        let rec = self.next().ok_or_else(|| self.error(0, "empty file"))?;
        match rec.fields.as_slice() {
            ["format_version", v] => {
                let v: u32 = v
                    .parse()
                    .map_err(|_| self.error(rec.line, format!("bad format_version {v:?}")))?;
                if v != FORMAT_VERSION {
                    return Err(self.error(rec.line, format!("unsupported format_version {v}")));
                }
                Ok(())
            }
            _ => Err(self.error(rec.line, "expected `format_version 1`")),
        }
    }

    pub fn parse<T: std::str::FromStr>(&self, line: usize, what: &str, tok: &str) -> Result<T> {
        tok.parse()
            .map_err(|_| self.error(line, format!("cannot parse {what} from {tok:?}")))
    }

    pub fn parse_f64(&self, line: usize, what: &str, tok: &str) -> Result<f64> {
        let v: f64 = self.parse(line, what, tok)?;
        if !v.is_finite() {
            return Err(self.error(line, format!("{what} must be finite, got {tok}")));
        }
        Ok(v)
    }
}

impl<'a> Iterator for Records<'a> {
    type Item = Record<'a>;

    fn next(&mut self) -> Option<Record<'a>> {
        for (idx, raw) in self.lines.by_ref() {
            let body = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = body.split_whitespace().collect();
            if !fields.is_empty() {
                return Some(Record { line: idx + 1, fields });
            }
        }
        None
    }
}

pub(crate) fn file_label(path: &Path) -> String {
    path.display().to_string()
}
