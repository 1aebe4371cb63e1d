//! TSV and GMT readers and writers.
//!
//! Readers accept LF or CRLF line endings; writers emit LF and serialize
//! floating-point values with 17 significant digits so that a write/read
//! round-trip is exact.

use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::advisor::{DiagnosticsReport, GeneSet, GeneSetCollection, PathwayCommittee, RDiagnostics};
use crate::combine::{GeneRecord, MetaResult};
use crate::error::{Error, Result};
use crate::matrix::PValueMatrix;
use crate::power::PowerPoint;
use crate::sim::bench::BenchReport;
use crate::study::Study;

/// Shortest exact decimal form: 17 significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.16e}")
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

/// Lines with their 1-based numbers, CR stripped, blank lines skipped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_err(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, column, message: message.into() }
}

fn parse_num(path: &Path, line: usize, column: usize, cell: &str) -> Result<f64> {
    let cell = cell.trim();
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_err(path, line, column, format!("non-numeric value {cell:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, column, format!("non-finite value {cell:?}")));
    }
    Ok(v)
}

/// Header + rows of `id <TAB> numbers...`.
#[derive(Debug)]
struct NumericTable {
    columns: Vec<String>,
    rows: Vec<String>,
    values: Vec<f64>,
}

fn read_numeric_table(path: &Path) -> Result<NumericTable> {
    let text = read_text(path)?;
    let mut it = lines(&text);
    let (_, header) = it.next().ok_or_else(|| parse_err(path, 1, 1, "file is empty"))?;
    let columns: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    if columns.is_empty() {
        return Err(parse_err(path, 1, 1, "header has no data columns"));
    }
    let mut seen_cols = HashSet::new();
    for (c, name) in columns.iter().enumerate() {
        if !seen_cols.insert(name.as_str()) {
            return Err(parse_err(path, 1, c + 2, format!("duplicate column id {name}")));
        }
    }
    let mut rows = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    let mut values = Vec::new();
    for (no, line) in it {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() + 1 {
            return Err(parse_err(
                path,
                no,
                1,
                format!("expected {} fields, found {}", columns.len() + 1, cells.len()),
            ));
        }
        let id = cells[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(path, no, 1, "empty row id"));
        }
        if let Some(prev) = first_line.get(&id) {
            return Err(parse_err(path, no, 1, format!("duplicate gene id {id} (lines {prev} and {no})")));
        }
        for (c, cell) in cells[1..].iter().enumerate() {
            values.push(parse_num(path, no, c + 2, cell)?);
        }
        first_line.insert(id.clone(), no);
        rows.push(id);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, 1, "no data rows"));
    }
    Ok(NumericTable { columns, rows, values })
}

/// Sample labels: `sample <TAB> 0|1`, optional header line.
pub fn load_labels(path: &Path) -> Result<HashMap<String, bool>> {
    let text = read_text(path)?;
    let mut labels = HashMap::new();
    for (idx, (no, line)) in lines(&text).enumerate() {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(parse_err(path, no, 1, format!("expected 2 fields, found {}", cells.len())));
        }
        let label = match cells[1] {
            "0" => false,
            "1" => true,
            _ if idx == 0 => continue,
            other => return Err(parse_err(path, no, 2, format!("label {other:?} is not 0 or 1"))),
        };
        if labels.insert(cells[0].to_string(), label).is_some() {
            return Err(parse_err(path, no, 1, format!("duplicate sample id {}", cells[0])));
        }
    }
    Ok(labels)
}

/// Expression matrix (genes x samples TSV) plus its label file.
pub fn load_study(id: &str, expression_path: &Path, labels_path: &Path) -> Result<Study> {
    let table = read_numeric_table(expression_path)?;
    let labels = load_labels(labels_path)?;
    let missing: Vec<&str> =
        table.columns.iter().filter(|s| !labels.contains_key(s.as_str())).map(String::as_str).collect();
    if !missing.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no label for samples {}",
            labels_path.display(),
            missing.join(", ")
        )));
    }
    let known: HashSet<&str> = table.columns.iter().map(String::as_str).collect();
    let mut extra: Vec<&str> = labels.keys().map(String::as_str).filter(|s| !known.contains(s)).collect();
    if !extra.is_empty() {
        extra.sort_unstable();
        return Err(Error::Validation(format!(
            "{}: labels for unknown samples {}",
            labels_path.display(),
            extra.join(", ")
        )));
    }
    let l = table.columns.iter().map(|s| labels[s.as_str()]).collect();
    Study::new(id, table.rows, table.columns, table.values, l)
}

/// Genes x studies p-value table; with `right`, a paired one-sided matrix.
pub fn load_pvalue_matrix(path: &Path, right: Option<&Path>) -> Result<PValueMatrix> {
    let left = read_numeric_table(path)?;
    match right {
        None => PValueMatrix::new(left.rows, left.columns, left.values),
        Some(rp) => {
            let r = read_numeric_table(rp)?;
            if r.rows != left.rows || r.columns != left.columns {
                return Err(Error::Validation(format!(
                    "{} and {} list different genes or studies",
                    path.display(),
                    rp.display()
                )));
            }
            PValueMatrix::one_sided_pair(left.rows, left.columns, left.values, r.values)
        }
    }
}

/// GMT gene sets: `name <TAB> description <TAB> gene...`.
pub fn load_gmt(path: &Path) -> Result<GeneSetCollection> {
    let text = read_text(path)?;
    let mut sets = Vec::new();
    for (no, line) in lines(&text) {
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cells.len() < 3 {
            return Err(parse_err(path, no, 1, "gene set line needs a name, a description and at least one gene"));
        }
        if cells[0].is_empty() {
            return Err(parse_err(path, no, 1, "empty gene set name"));
        }
        let genes: Vec<String> = cells[2..].iter().filter(|g| !g.is_empty()).map(|g| g.to_string()).collect();
        sets.push(GeneSet {
            name: cells[0].to_string(),
            description: cells[1].to_string(),
            original_size: genes.len(),
            genes,
        });
    }
    Ok(GeneSetCollection::new(sets))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn mask_string(mask: &Option<Vec<bool>>) -> String {
    match mask {
        Some(m) => m.iter().map(|b| if *b { '1' } else { '0' }).collect(),
        None => "NA".into(),
    }
}

pub const GENE_TABLE_HEADER: &str = "gene\tstatistic\tmeta_p\tq_value\teffective_mask";

/// Gene table, most significant first (by meta p, ties in input order).
pub fn gene_table(result: &MetaResult) -> String {
    let mut order: Vec<usize> = (0..result.records.len()).collect();
    order.sort_by(|&a, &b| result.records[a].meta_p.total_cmp(&result.records[b].meta_p));
    let mut out = String::from(GENE_TABLE_HEADER);
    out.push('\n');
    for i in order {
        let r = &result.records[i];
        let q = r.q_value.map_or("NA".into(), fmt_num);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.gene,
            fmt_num(r.statistic),
            fmt_num(r.meta_p),
            q,
            mask_string(&r.effective_mask)
        );
    }
    out
}

pub fn write_gene_table(path: &Path, result: &MetaResult) -> Result<()> {
    write_text(path, &gene_table(result))
}

fn parse_opt(path: &Path, line: usize, column: usize, cell: &str) -> Result<Option<f64>> {
    if cell == "NA" {
        Ok(None)
    } else {
        parse_num(path, line, column, cell).map(Some)
    }
}

/// Reads a gene table written by [`write_gene_table`].
pub fn read_gene_table(path: &Path) -> Result<Vec<GeneRecord>> {
    let text = read_text(path)?;
    let mut it = lines(&text);
    match it.next() {
        Some((_, h)) if h == GENE_TABLE_HEADER => {}
        _ => return Err(parse_err(path, 1, 1, "missing gene table header")),
    }
    it.map(|(no, line)| {
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 5 {
            return Err(parse_err(path, no, 1, format!("expected 5 fields, found {}", c.len())));
        }
        let mask = if c[4] == "NA" {
            None
        } else {
            Some(
                c[4].chars()
                    .map(|ch| match ch {
                        '1' => Ok(true),
                        '0' => Ok(false),
                        _ => Err(parse_err(path, no, 5, "mask must be a 0/1 string")),
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        Ok(GeneRecord {
            gene: c[0].to_string(),
            statistic: parse_num(path, no, 2, c[1])?,
            meta_p: parse_num(path, no, 3, c[2])?,
            q_value: parse_opt(path, no, 4, c[3])?,
            effective_mask: mask,
        })
    })
    .collect()
}

pub fn count_diagnostics_table(d: &RDiagnostics) -> String {
    let mut out = String::from("r\tn_r\tbaseline_mean\tbaseline_sd\tn_prime\tselected\n");
    for rec in &d.records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            rec.r,
            rec.n_r,
            fmt_num(rec.baseline_mean),
            fmt_num(rec.baseline_sd),
            fmt_num(rec.n_prime),
            u8::from(rec.r == d.selected_r_counts)
        );
    }
    out
}

pub fn enrichment_table(report: &DiagnosticsReport) -> String {
    let mut out = String::from("r\tmin\tq1\tmedian\tq3\tmax\tstep_p_value\n");
    for e in &report.enrichment {
        let f = e.neg_log10;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.r,
            fmt_num(f.min),
            fmt_num(f.q1),
            fmt_num(f.median),
            fmt_num(f.q3),
            fmt_num(f.max),
            e.step_p_value.map_or("NA".into(), fmt_num)
        );
    }
    out
}

pub fn committee_table(c: &PathwayCommittee) -> String {
    let mut out = String::from("pathway\trank_sum\tin_top");
    for r in &c.r_values {
        let _ = write!(out, "\tp_r{r}");
    }
    out.push('\n');
    let top: HashSet<usize> = c.top.iter().copied().collect();
    for (m, name) in c.pathways.iter().enumerate() {
        let _ = write!(out, "{name}\t{}\t{}", fmt_num(c.rank_sums[m]), u8::from(top.contains(&m)));
        for e in &c.enrichment {
            let _ = write!(out, "\t{}", fmt_num(e[m]));
        }
        out.push('\n');
    }
    out
}

pub fn power_table(points: &[PowerPoint]) -> String {
    let mut out = String::from("k\tr\tr0\talpha\tbeta_prime\tbeta\tpower\n");
    for p in points {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.k,
            p.r,
            p.r0,
            fmt_num(p.alpha),
            fmt_num(p.beta_prime),
            fmt_num(p.beta),
            fmt_num(p.power)
        );
    }
    out
}

pub fn bench_table(report: &BenchReport) -> String {
    let mut out = String::from("method\tfdr1_mean\tfdr1_sd\tfdr2_mean\tfdr2_sd\tdetected_mean\tdetected_sd\n");
    for m in &report.methods {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.label,
            fmt_num(m.fdr1.mean),
            fmt_num(m.fdr1.sd),
            fmt_num(m.fdr2.mean),
            fmt_num(m.fdr2.sd),
            fmt_num(m.detected.mean),
            fmt_num(m.detected.sd)
        );
    }
    out
}

pub fn per_tg_table(report: &BenchReport) -> String {
    let mut out = String::from("method\tt_g\tpower\n");
    for (label, t, p) in crate::sim::bench::per_tg_power(report) {
        let _ = writeln!(out, "{label}\t{t}\t{}", fmt_num(p));
    }
    out
}

pub fn stability_table(report: &BenchReport) -> Option<String> {
    let s = report.stability.as_ref()?;
    let mut out = String::from("r");
    for r in &s.r_values {
        let _ = write!(out, "\tr{r}");
    }
    out.push('\n');
    for (i, r) in s.r_values.iter().enumerate() {
        let _ = write!(out, "{r}");
        for v in &s.overlap[i] {
            let _ = write!(out, "\t{}", fmt_num(*v));
        }
        out.push('\n');
    }
    Some(out)
}

/// Writes `text` to `path`, recording the path so a failed run can remove it.
pub struct OutputSet {
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new() -> Self {
        OutputSet { written: Vec::new(), committed: false }
    }

    pub fn write(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        self.written.push(path.to_path_buf());
        write_text(path, text)
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    /// Keeps the files; without this they are deleted on drop.
    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Default for OutputSet {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
