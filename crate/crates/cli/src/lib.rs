//! Experiment drivers behind the `lrspline` command.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lrspline::diagnostics::{self, Report};
use lrspline::io::{self, Document};
use lrspline::n2s::{markers, n2s_pipeline_with, structured_pipeline, PipelineOptions};
use lrspline::poisson::{self, LevelReport, Strategy};
use lrspline::qi::{self, three_peaks, PEAK_POINTS};
use lrspline::{svg, Dyadic, Error, LRSpace, Rect, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn check_degree(degree: (u32, u32)) -> Result<()> {
    if degree.0 < 1 || degree.1 < 1 {
        return Err(Error::Precondition(format!("degree must be at least (1, 1), got {degree:?}")));
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per element: bounds and support count.
pub fn write_element_table(space: &LRSpace, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = space
        .support_counts()
        .into_iter()
        .map(|(e, c)| {
            let r = e.rect;
            vec![r.x_min, r.x_max, r.y_min, r.y_max]
                .into_iter()
                .map(|d| d.to_string())
                .chain([c.to_string()])
                .collect()
        })
        .collect();
    write_csv(path, &["x_min", "x_max", "y_min", "y_max", "support_count"], &rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoStrategy {
    Structured,
    N2s2,
}

#[derive(Clone, Debug)]
pub struct MeshDemoConfig {
    pub degree: (u32, u32),
    pub iterations: usize,
    pub strategy: DemoStrategy,
    pub options: PipelineOptions,
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct MeshDemoOutput {
    pub counts: Vec<usize>,
    pub independent: bool,
    pub space: LRSpace,
}

/// Diagonal refinement of the single-cell open mesh on the unit square.
/// Writes `iter_<k>.svg`, `counts.csv`, `trace.jsonl` (N2S2 only),
/// `final.json` and `elements.csv` into `out`.
pub fn run_mesh_demo(cfg: &MeshDemoConfig) -> Result<MeshDemoOutput> {
    check_degree(cfg.degree)?;
    fs::create_dir_all(&cfg.out)?;
    let start = LRSpace::uniform(Rect::unit_square(), cfg.degree, (1, 1))?;
    let svg_path = |k: usize| cfg.out.join(format!("iter_{k}.svg"));
    svg::write_svg(start.mesh(), &svg_path(0))?;
    let (space, counts) = match cfg.strategy {
        DemoStrategy::N2s2 => {
            let mut svg_result = Ok(());
            let (s, trace) = n2s_pipeline_with(&start, markers::diagonal, cfg.iterations, cfg.options, |k, s| {
                if svg_result.is_ok() {
                    svg_result = svg::write_svg(s.mesh(), &svg_path(k));
                }
            })?;
            svg_result?;
            trace.write_json_lines(BufWriter::new(File::create(cfg.out.join("trace.jsonl"))?))?;
            (s, trace.counts)
        }
        DemoStrategy::Structured => {
            let mut s = start.clone();
            let mut counts = vec![s.len()];
            for k in 1..=cfg.iterations {
                s = structured_pipeline(&s, markers::diagonal, 1)?.0;
                svg::write_svg(s.mesh(), &svg_path(k))?;
                counts.push(s.len());
            }
            (s, counts)
        }
    };
    let rows: Vec<Vec<String>> = counts.iter().enumerate().map(|(i, n)| vec![i.to_string(), n.to_string()]).collect();
    write_csv(&cfg.out.join("counts.csv"), &["iteration", "n_functions"], &rows)?;
    io::write_space(&space, &cfg.out.join("final.json"))?;
    write_element_table(&space, &cfg.out.join("elements.csv"))?;
    Ok(MeshDemoOutput { counts, independent: space.is_locally_linearly_independent(), space })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QiRow {
    pub level: u32,
    pub n_tensor: usize,
    pub n_n2s2: usize,
    pub max_error_tensor: f64,
    pub max_error_n2s2: f64,
}

/// Peaks domain `[-1, 1]^2`.
pub fn peaks_domain() -> Rect {
    let one = Dyadic::from_int(1);
    Rect::new(-one, one, -one, one).expect("valid domain")
}

/// N2S2 spaces of the three-peaks experiment for levels `1..=levels`; level 1
/// is the 4 x 4 mesh.
pub fn peaks_spaces(degree: (u32, u32), levels: u32, options: PipelineOptions) -> Result<Vec<LRSpace>> {
    check_degree(degree)?;
    if levels < 1 {
        return Err(Error::Precondition("levels must be at least 1".into()));
    }
    let start = LRSpace::uniform(peaks_domain(), degree, (4, 4))?;
    let marker = markers::central_contains_any(&PEAK_POINTS);
    let mut out = vec![start.clone()];
    n2s_pipeline_with(&start, &marker, (levels - 1) as usize, options, |_, s| out.push(s.clone()))?;
    Ok(out)
}

/// Tensor and N2S2 quasi-interpolation errors for the three-peaks function.
pub fn run_qi_peaks(degree: (u32, u32), levels: u32, grid: usize, options: PipelineOptions) -> Result<Vec<QiRow>> {
    let spaces = peaks_spaces(degree, levels, options)?;
    spaces
        .iter()
        .zip(1..)
        .map(|(s, level)| {
            let cells = 1u32 << (level + 1);
            let tensor = LRSpace::uniform(peaks_domain(), degree, (cells, cells))?;
            let ct = qi::tensor_qi(&tensor, &three_peaks)?;
            let cn = qi::lr_qi(s, &three_peaks)?;
            Ok(QiRow {
                level,
                n_tensor: tensor.len(),
                n_n2s2: s.len(),
                max_error_tensor: qi::qi_max_error(&tensor, &ct, &three_peaks, (grid, grid)),
                max_error_n2s2: qi::qi_max_error(s, &cn, &three_peaks, (grid, grid)),
            })
        })
        .collect()
}

pub fn write_qi_csv(rows: &[QiRow], path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                r.n_tensor.to_string(),
                r.n_n2s2.to_string(),
                format!("{:e}", r.max_error_tensor),
                format!("{:e}", r.max_error_n2s2),
            ]
        })
        .collect();
    write_csv(path, &["level", "n_tensor", "n_n2s2", "max_error_tensor", "max_error_n2s2"], &rows)
}

pub fn run_poisson(
    strategies: &[Strategy],
    max_level: u32,
    degree: (u32, u32),
    grid: usize,
    options: PipelineOptions,
) -> Result<Vec<LevelReport>> {
    check_degree(degree)?;
    let mut out = Vec::new();
    for &s in strategies {
        out.extend(poisson::adaptive_solve(s, max_level, degree, grid, options)?);
    }
    Ok(out)
}

pub fn write_poisson_csv(rows: &[LevelReport], path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.strategy.name().to_string(),
                r.level.to_string(),
                r.report.n_functions.to_string(),
                format!("{:e}", r.report.linf),
                format!("{:e}", r.report.l2),
            ]
        })
        .collect();
    write_csv(path, &["strategy", "level", "n_functions", "linf", "l2"], &rows)
}

/// Diagnostic report of a mesh (its LR B-splines) or a stored space.
pub fn run_verify(path: &Path, seed: u64) -> Result<(LRSpace, Report)> {
    let space = match io::read_document(path)? {
        Document::Space(s) => s,
        Document::Mesh(m) => LRSpace::from_mesh(&m)?,
    };
    let report = diagnostics::report(&space, seed);
    Ok((space, report))
}

pub fn write_report_json(report: &Report, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// Trace counts per iteration in a compact form.
pub fn format_counts(counts: &[usize]) -> String {
    counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

/// Exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_numerical_failures() {
        assert_eq!(exit_code(&Error::Numerical("no convergence".into())), 3);
        assert_eq!(exit_code(&Error::Precondition("bad".into())), 2);
        assert_eq!(exit_code(&Error::NoTraversal), 2);
    }

    #[test]
    fn degree_must_be_positive() {
        assert!(check_degree((1, 1)).is_ok());
        assert!(check_degree((0, 2)).is_err());
        assert_eq!(format_counts(&[9, 16]), "9 16");
    }
}
