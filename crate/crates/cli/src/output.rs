use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use retint::fitting::BinnedPdf;
use serde::Serialize;

use crate::CliError;

/// Collects output files under one directory, in write order.
pub struct OutDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| {
            CliError::Config(format!(
                "output directory {} is not writable: {e}",
                root.display()
            ))
        })?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Output { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }
}

/// Threshold as it appears in file names: `2.0`, `2.5`.
pub fn q_tag(q: f64) -> String {
    format!("{q:?}")
}

pub fn pdf_tsv(pdf: &BinnedPdf) -> String {
    let mut s = String::from("bin_center\tdensity\tcount\n");
    for ((c, d), n) in pdf.centers().iter().zip(&pdf.densities).zip(&pdf.counts) {
        let _ = writeln!(s, "{c}\t{d}\t{n}");
    }
    s
}

/// Renders an optional number as a TSV cell; absent values are empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_tags_keep_one_decimal() {
        assert_eq!(q_tag(2.0), "2.0");
        assert_eq!(q_tag(2.5), "2.5");
        assert_eq!(q_tag(3.25), "3.25");
    }

    #[test]
    fn absent_cells_are_empty() {
        assert_eq!(cell(None), "");
        assert_eq!(cell(Some(0.5)), "0.5");
    }
}
