//! CSV emission.
//!
//! Numbers use Rust's shortest round-trip formatting, so every cell parses
//! back to the exact `f64` and output is byte-stable across platforms.
//! Non-finite values are refused in data cells.

use std::fmt::Write as _;

use mmbm_core::Matrix;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

/// Shortest round-trip decimal for `x`, or an error naming `what`.
pub fn number(what: &str, x: f64) -> Result<String, CliError> {
    if !x.is_finite() {
        return Err(CliError::NonFinite { what: what.to_string() });
    }
    Ok(format!("{x:?}"))
}

/// Like [`number`], but writes `undefined` for non-finite values. For
/// metadata lines only.
pub fn meta_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        "undefined".into()
    }
}

impl Csv {
    pub fn new() -> Self {
        Self::default()
    }

    /// `# key,value,...`
    pub fn meta<I, S>(&mut self, key: &str, values: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.buf.push_str("# ");
        self.buf.push_str(key);
        for v in values {
            self.buf.push(',');
            self.buf.push_str(v.as_ref());
        }
        self.buf.push('\n');
    }

    pub fn meta_numbers(&mut self, key: &str, xs: impl IntoIterator<Item = f64>) {
        self.meta(key, xs.into_iter().map(meta_number));
    }

    pub fn header<I, S>(&mut self, cols: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cols: Vec<String> = cols.into_iter().map(|c| c.as_ref().to_string()).collect();
        self.buf.push_str(&cols.join(","));
        self.buf.push('\n');
    }

    pub fn row(&mut self, what: &str, xs: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
        let cells = xs.into_iter().map(|x| number(what, x)).collect::<Result<Vec<_>, _>>()?;
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
        Ok(())
    }

    /// A labelled block: `# name,rows,cols`, then the rows, then a blank line.
    pub fn block(&mut self, name: &str, m: &Matrix) -> Result<(), CliError> {
        let _ = writeln!(self.buf, "# {name},{},{}", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            self.row(name, m.row(i).iter().copied())?;
        }
        self.buf.push('\n');
        Ok(())
    }

    pub fn line(&mut self, s: &str) {
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
