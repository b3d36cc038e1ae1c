//! Per-corruption tables, λ tables and severity curves.
//!
//! Values are AP50 in [0, 1] internally and rendered ×100. Display cells carry two
//! decimals; the precise CSV carries four and round-trips through [`Table::from_csv`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruption::{CorruptionKind, Severity};
use crate::error::{Error, Result};
use crate::eval::{mpc, EvalResult};

pub const ORIGINAL_ROW: &str = "Original";
pub const MPC_ROW: &str = "mPC";

/// How a percentage is cut to two decimals for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellRounding {
    /// Drop digits beyond the second decimal (the published tables read this way).
    #[default]
    Truncate,
    /// Round half away from zero.
    Nearest,
}

/// Spread shown after "±" when a column aggregates several runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Population standard deviation.
    #[default]
    Stddev,
    /// Half of max − min.
    Range,
}

/// Formats a percentage with two decimals.
pub fn format_percent(value: f64, rounding: CellRounding) -> String {
    let scaled = match rounding {
        // The epsilon absorbs binary error such as 75.82999999 for an exact 75.83.
        CellRounding::Truncate => (value * 100.0 + 1e-7).floor(),
        CellRounding::Nearest => (value * 100.0).round(),
    };
    format!("{:.2}", scaled / 100.0)
}

/// Mean and spread of `values` (population statistics).
pub fn aggregate(values: &[f64], how: Aggregation) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::domain("cannot aggregate an empty list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let spread = match how {
        Aggregation::Stddev => (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt(),
        Aggregation::Range => {
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            (max - min) / 2.0
        }
    };
    Ok((mean, spread))
}

/// One table value in [0, 1]; `spread` is present when several runs were aggregated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub spread: Option<f64>,
}

impl Cell {
    fn display(&self, rounding: CellRounding) -> String {
        let v = format_percent(self.value * 100.0, rounding);
        match self.spread {
            Some(s) => format!("{v} ± {}", format_percent(s * 100.0, CellRounding::Nearest)),
            None => v,
        }
    }
}

/// Rows are Original, each corruption kind in table order, then mPC.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<Option<Cell>>>,
}

fn csv_error(e: csv::Error) -> Error {
    Error::domain(format!("CSV: {e}"))
}

fn write_csv(records: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("input was UTF-8")
}

fn read_csv(text: &str) -> Result<Vec<Vec<String>>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(csv_error))
        .collect()
}

impl Table {
    fn render(&self, cell: impl Fn(&Cell) -> String) -> String {
        let header = std::iter::once("corruption".to_string()).chain(self.columns.iter().cloned()).collect();
        let body = self.rows.iter().zip(&self.cells).map(|(label, row)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(|c| c.as_ref().map(&cell).unwrap_or_default()))
                .collect()
        });
        write_csv(std::iter::once(header).chain(body))
    }

    /// Display CSV: percentages with two decimals.
    pub fn to_csv(&self, rounding: CellRounding) -> String {
        self.render(|c| c.display(rounding))
    }

    /// Precise CSV: percentages with four decimals, spread in a `±` suffix.
    pub fn to_precise_csv(&self) -> String {
        self.render(|c| match c.spread {
            Some(s) => format!("{:.4} ± {:.4}", c.value * 100.0, s * 100.0),
            None => format!("{:.4}", c.value * 100.0),
        })
    }

    /// Parses either CSV flavour back into a table.
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut records = read_csv(text)?.into_iter();
        let header = records.next().ok_or_else(|| Error::domain("empty CSV"))?;
        if header.first().map(String::as_str) != Some("corruption") {
            return Err(Error::domain("CSV header must start with `corruption`"));
        }
        let columns = header[1..].to_vec();
        let (mut rows, mut cells) = (Vec::new(), Vec::new());
        for (n, fields) in records.enumerate() {
            if fields.len() != header.len() {
                return Err(Error::domain(format!(
                    "CSV row {} has {} fields, header has {}",
                    n + 2,
                    fields.len(),
                    header.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map(|v| v / 100.0)
                    .map_err(|_| Error::domain(format!("CSV row {}: `{s}` is not a number", n + 2)))
            };
            let row = fields[1..]
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        return Ok(None);
                    }
                    let (v, s) = match f.split_once('±') {
                        Some((v, s)) => (parse(v)?, Some(parse(s)?)),
                        None => (parse(f)?, None),
                    };
                    Ok(Some(Cell { value: v, spread: s }))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(fields[0].clone());
            cells.push(row);
        }
        Ok(Table { columns, rows, cells })
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<Cell>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.cells.iter().map(|r| r[j]).collect())
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<Cell> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.columns.iter().position(|c| c == column)?;
        self.cells[i][j]
    }
}

/// A method's results, one [`EvalResult`] per seed.
#[derive(Debug, Clone)]
pub struct MethodRuns {
    pub label: String,
    pub runs: Vec<EvalResult>,
}

impl MethodRuns {
    pub fn single(label: impl Into<String>, result: EvalResult) -> Self {
        Self {
            label: label.into(),
            runs: vec![result],
        }
    }
}

/// Options shared by [`per_corruption_table`] and [`lambda_table`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TableOptions {
    /// Severity to tabulate; `None` requires exactly one severity per kind.
    pub severity: Option<Severity>,
    pub aggregation: Aggregation,
}

fn selected(r: &EvalResult, severity: Option<Severity>) -> Result<BTreeMap<CorruptionKind, f64>> {
    let mut out = BTreeMap::new();
    for c in &r.per_corruption {
        if severity.is_some_and(|s| s != c.severity) {
            continue;
        }
        if out.insert(c.kind, c.ap50).is_some() {
            return Err(Error::domain(format!(
                "{} has several severities; choose one for the table",
                c.kind
            )));
        }
    }
    Ok(out)
}

/// Table of clean AP50, per-corruption AP50 and mPC, one column per method.
pub fn per_corruption_table(methods: &[MethodRuns], opts: &TableOptions) -> Result<Table> {
    if methods.is_empty() {
        return Err(Error::domain("no methods to tabulate"));
    }
    let mut per_method = Vec::new();
    for m in methods {
        if m.runs.is_empty() {
            return Err(Error::domain(format!("method `{}` has no runs", m.label)));
        }
        let runs = m.runs.iter().map(|r| selected(r, opts.severity)).collect::<Result<Vec<_>>>()?;
        per_method.push(runs);
    }

    let reference: BTreeSet<CorruptionKind> = per_method[0][0].keys().copied().collect();
    let mut problems = Vec::new();
    for (m, runs) in methods.iter().zip(&per_method) {
        for (i, run) in runs.iter().enumerate() {
            let kinds: BTreeSet<CorruptionKind> = run.keys().copied().collect();
            if kinds != reference {
                let missing: Vec<_> = reference.difference(&kinds).map(|k| k.name()).collect();
                let extra: Vec<_> = kinds.difference(&reference).map(|k| k.name()).collect();
                problems.push(format!(
                    "{} run {i}: missing [{}], extra [{}]",
                    m.label,
                    missing.join(", "),
                    extra.join(", ")
                ));
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Mismatch {
            key: "corruption set".into(),
            detail: problems.join("; "),
        });
    }

    let kinds: Vec<CorruptionKind> = reference.into_iter().collect();
    let mut rows = vec![ORIGINAL_ROW.to_string()];
    rows.extend(kinds.iter().map(|k| k.display_name().to_string()));
    if !kinds.is_empty() {
        rows.push(MPC_ROW.to_string());
    }

    let mut cells = vec![Vec::with_capacity(methods.len()); rows.len()];
    for (m, runs) in methods.iter().zip(&per_method) {
        let multi = m.runs.len() > 1;
        let make = |values: &[f64]| -> Result<Cell> {
            let (value, spread) = aggregate(values, opts.aggregation)?;
            Ok(Cell {
                value,
                spread: multi.then_some(spread),
            })
        };
        let clean: Option<Vec<f64>> = m.runs.iter().map(|r| r.ap50).collect();
        cells[0].push(clean.map(|v| make(&v)).transpose()?);
        for (i, k) in kinds.iter().enumerate() {
            let v: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            cells[i + 1].push(Some(make(&v)?));
        }
        if !kinds.is_empty() {
            let mpcs = runs
                .iter()
                .map(|r| mpc(&r.values().copied().collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            cells[kinds.len() + 1].push(Some(make(&mpcs)?));
        }
    }
    Ok(Table {
        columns: methods.iter().map(|m| m.label.clone()).collect(),
        rows,
        cells,
    })
}

pub fn lambda_label(lambda: f64) -> String {
    format!("θ(λ={lambda:.1})")
}

/// [`per_corruption_table`] with one column per interpolation weight.
pub fn lambda_table(results: &[(f64, MethodRuns)], opts: &TableOptions) -> Result<Table> {
    for w in results.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::domain(format!(
                "λ values must be distinct and increasing, got {} then {}",
                w[0].0, w[1].0
            )));
        }
    }
    let labels: BTreeSet<String> = results.iter().map(|(l, _)| lambda_label(*l)).collect();
    if labels.len() != results.len() {
        return Err(Error::domain("λ values collide at one decimal"));
    }
    let methods: Vec<MethodRuns> = results
        .iter()
        .map(|(l, m)| MethodRuns {
            label: lambda_label(*l),
            runs: m.runs.clone(),
        })
        .collect();
    per_corruption_table(&methods, opts)
}

/// AP50 at severities 0 (clean) to 5 for one model and corruption kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub label: String,
    pub points: Vec<(u8, f64)>,
}

impl SweepSeries {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::domain(format!("series `{}` has no points", self.label)));
        }
        for w in self.points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::domain(format!("series `{}`: severities must increase", self.label)));
            }
        }
        for &(s, v) in &self.points {
            if s > 5 || !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!(
                    "series `{}`: point ({s}, {v}) outside severity 0-5 or AP50 0-1",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Clean value at severity 0 followed by every severity of `kind`.
    pub fn from_result(label: &str, r: &EvalResult, kind: CorruptionKind) -> Self {
        let mut points: Vec<(u8, f64)> = r.ap50.map(|p| (0, p)).into_iter().collect();
        let mut sev: Vec<(u8, f64)> = r
            .per_corruption
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| (c.severity.get(), c.ap50))
            .collect();
        sev.sort_by_key(|p| p.0);
        points.extend(sev);
        Self {
            label: label.to_string(),
            points,
        }
    }
}

/// Long-format CSV `series,severity,ap50` with values written to full precision.
pub fn series_csv(series: &[SweepSeries]) -> String {
    let header = vec!["series".to_string(), "severity".into(), "ap50".into()];
    let body = series
        .iter()
        .flat_map(|s| s.points.iter().map(|(sev, v)| vec![s.label.clone(), sev.to_string(), format!("{v:?}")]));
    write_csv(std::iter::once(header).chain(body))
}

pub fn parse_series_csv(text: &str) -> Result<Vec<SweepSeries>> {
    let mut records = read_csv(text)?.into_iter();
    if records.next().as_deref() != Some(&["series".to_string(), "severity".into(), "ap50".into()][..]) {
        return Err(Error::domain("series CSV must start with `series,severity,ap50`"));
    }
    let mut out: Vec<SweepSeries> = Vec::new();
    for f in records {
        let bad = || Error::domain(format!("malformed series row {f:?}"));
        if f.len() != 3 {
            return Err(bad());
        }
        let sev: u8 = f[1].parse().map_err(|_| bad())?;
        let v: f64 = f[2].parse().map_err(|_| bad())?;
        match out.last_mut() {
            Some(s) if s.label == f[0] => s.points.push((sev, v)),
            _ => out.push(SweepSeries {
                label: f[0].clone(),
                points: vec![(sev, v)],
            }),
        }
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const DASHES: [&str; 4] = ["", "6 3", "2 3", "8 3 2 3"];

/// Line chart of AP50 (×100) against severity, one polyline per series.
pub fn render_severity_svg(title: &str, series: &[SweepSeries]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::domain("severity curve needs at least one series"));
    }
    for s in series {
        s.validate()?;
    }
    let (w, h) = (480.0, 320.0);
    let (left, right, top, bottom) = (56.0, 150.0, 36.0, 48.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |s: f64| left + pw * s / 5.0;
    let y = |v: f64| top + ph * (1.0 - v);

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(o, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        left + pw / 2.0,
        xml_escape(title)
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            o,
            r##"<line x1="{left:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y(v) + 4.0,
            i * 20,
            yy = y(v)
        );
        let _ = writeln!(
            o,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            x(i as f64),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        o,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Severity</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        o,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">AP50</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[(i / COLORS.len() + i) % DASHES.len()];
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(sev, v)| format!("{:.2},{:.2}", x(sev as f64), y(v)))
            .collect();
        let _ = writeln!(
            o,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash_attr} points="{}"/>"#,
            pts.join(" ")
        );
        for &(sev, v) in &s.points {
            let _ = writeln!(
                o,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                x(sev as f64),
                y(v)
            );
        }
        let ly = top + 12.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash_attr}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            xml_escape(&s.label)
        );
    }
    o.push_str("</svg>\n");
    Ok(o)
}

/// Writes `<kind>.svg` and `<kind>.csv` for a kind's series.
pub fn severity_curve(kind: CorruptionKind, series: &[SweepSeries], out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let svg = render_severity_svg(kind.display_name(), series)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let svg_path = out_dir.join(format!("{}.svg", kind.name()));
    let csv_path = out_dir.join(format!("{}.csv", kind.name()));
    std::fs::write(&svg_path, svg).map_err(|e| Error::io(format!("writing {}", svg_path.display()), e))?;
    std::fs::write(&csv_path, series_csv(series)).map_err(|e| Error::io(format!("writing {}", csv_path.display()), e))?;
    Ok((svg_path, csv_path))
}

/// One curve pair per corruption kind present in any of `methods`.
pub fn severity_curves(methods: &[(String, EvalResult)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if methods.is_empty() {
        return Err(Error::domain("severity curves need at least one method"));
    }
    let kinds: BTreeSet<CorruptionKind> = methods
        .iter()
        .flat_map(|(_, r)| r.per_corruption.iter().map(|c| c.kind))
        .collect();
    let mut written = Vec::new();
    for kind in kinds {
        let series: Vec<SweepSeries> = methods
            .iter()
            .map(|(l, r)| SweepSeries::from_result(l, r, kind))
            .filter(|s| !s.points.is_empty())
            .collect();
        let (svg, csv) = severity_curve(kind, &series, out_dir)?;
        written.push(svg);
        written.push(csv);
    }
    Ok(written)
}

/// Reads evaluation results below `dir`.
///
/// A file `<label>.json` is one run of method `<label>`; a directory `<label>/`
/// contributes its own `eval.json` or, failing that, the `eval.json` of each
/// subdirectory (one per seed, in name order).
pub fn load_results_dir(dir: &Path) -> Result<Vec<MethodRuns>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(format!("listing {}", dir.display()), e)))
        .collect::<Result<_>>()?;
    entries.sort();
    let mut out = Vec::new();
    for path in entries {
        let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_string) else { continue };
        if path.is_dir() {
            let direct = path.join("eval.json");
            let runs = if direct.is_file() {
                vec![EvalResult::load(&direct)?]
            } else {
                let mut subs: Vec<PathBuf> = std::fs::read_dir(&path)
                    .map_err(|e| Error::io(format!("listing {}", path.display()), e))?
                    .filter_map(|e| e.ok().map(|e| e.path().join("eval.json")))
                    .filter(|p| p.is_file())
                    .collect();
                subs.sort();
                subs.iter().map(|p| EvalResult::load(p)).collect::<Result<_>>()?
            };
            if !runs.is_empty() {
                out.push(MethodRuns { label: name, runs });
            }
        } else if let Some(label) = name.strip_suffix(".json") {
            out.push(MethodRuns::single(label, EvalResult::load(&path)?));
        }
    }
    if out.is_empty() {
        return Err(Error::domain(format!("no evaluation results found in {}", dir.display())));
    }
    Ok(out)
}

/// Reads the interpolation weight from labels such as `0.2`, `lambda_0.20` or
/// `merged_lambda_0.20`.
pub fn parse_lambda_label(label: &str) -> Option<f64> {
    let tail = label.rsplit_once("lambda_").map_or(label, |(_, t)| t);
    let tail = tail.strip_suffix(".safetensors").unwrap_or(tail);
    tail.parse::<f64>().ok().filter(|l| (0.0..=1.0).contains(l))
}
