use std::fmt::Write as _;
use std::path::Path;

use crate::data::{ExpressionMatrix, LabeledDataset};
use crate::error::{Error, ParseErrorKind, Result};

const CAUSAL_PREFIX: &str = "#causal=";

fn parse_err(line: usize, kind: ParseErrorKind) -> Error {
    Error::Parse { line, kind }
}

/// Reads `gene_1,...,gene_p,label` text, one patient per row. A leading
/// `#causal=X1;X2` line records the causal genes.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub(crate) fn parse_dataset(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut truth = None;
    let (header_line, header) = loop {
        match lines.next() {
            None => return Err(parse_err(1, ParseErrorKind::EmptyFile)),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) if l.starts_with(CAUSAL_PREFIX) => {
                let ids: Vec<String> = l[CAUSAL_PREFIX.len()..]
                    .split(';')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                truth = Some(ids);
            }
            Some((_, l)) if l.starts_with('#') => continue,
            Some(h) => break h,
        }
    };
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let malformed = |m: String| parse_err(header_line, ParseErrorKind::MalformedHeader(m));
    if fields.len() < 2 || !fields[fields.len() - 1].eq_ignore_ascii_case("label") {
        return Err(malformed("expected gene columns followed by `label`".into()));
    }
    let genes: Vec<String> = fields[..fields.len() - 1].iter().map(|s| s.to_string()).collect();
    if let Some(g) = genes.iter().find(|g| g.is_empty()) {
        return Err(malformed(format!("empty gene id {g:?}")));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(g) = genes.iter().find(|g| !seen.insert(g.as_str())) {
        return Err(malformed(format!("duplicate gene id {g}")));
    }

    let p = genes.len();
    let mut columns = vec![Vec::new(); p];
    let mut labels = Vec::new();
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = l.split(',').map(str::trim).collect();
        if cells.len() != p + 1 {
            return Err(parse_err(line, ParseErrorKind::RowLength { expected: p + 1, found: cells.len() }));
        }
        for (j, cell) in cells[..p].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(line, ParseErrorKind::NonNumeric { column: genes[j].clone(), value: cell.to_string() })
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, ParseErrorKind::NonFinite { column: genes[j].clone() }));
            }
            if v < 0.0 {
                return Err(parse_err(line, ParseErrorKind::NegativeValue { column: genes[j].clone() }));
            }
            columns[j].push(v);
        }
        labels.push(match cells[p] {
            "0" => 0,
            "1" => 1,
            other => return Err(parse_err(line, ParseErrorKind::NonBinaryLabel(other.to_string()))),
        });
    }
    if labels.is_empty() {
        return Err(parse_err(header_line, ParseErrorKind::NoRows));
    }
    let matrix = ExpressionMatrix::from_columns(genes, columns)?;
    LabeledDataset::new(matrix, labels, truth)
}

pub(crate) fn format_dataset(data: &LabeledDataset) -> String {
    let m = &data.matrix;
    let mut out = String::new();
    if let Some(truth) = &data.truth {
        let _ = writeln!(out, "{CAUSAL_PREFIX}{}", truth.join(";"));
    }
    for id in m.gene_ids() {
        out.push_str(id);
        out.push(',');
    }
    out.push_str("label\n");
    for i in 0..data.n() {
        for j in 0..m.n_genes() {
            // `{}` prints the shortest string that parses back to the same f64
            let _ = write!(out, "{},", m.get(i, j));
        }
        let _ = writeln!(out, "{}", data.labels[i]);
    }
    out
}

pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format_dataset(data))?;
    Ok(())
}
