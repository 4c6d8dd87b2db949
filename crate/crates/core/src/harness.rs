//! Convergence studies over a ladder of nested `(H, h)` grid pairs.
//!
//! Mesh sizes are given as cells per unit length `n`, so `h = sqrt(2)/n`.
//! Coarse spectra, fine assemblies and fine factorizations are cached and
//! shared by every eigenvalue index and every ladder entry that use them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coefficients::RefractiveIndex;
use crate::eigensolver::{solve_pencil_factored, EigenPair, Spectrum, SpectrumRequest};
use crate::elements::{gauss_rule, DEFAULT_QUAD_ORDER};
use crate::exec::{map_range, with_threads, Execution};
use crate::mesh::DomainKind;
use crate::twogrid::{build_prolongation, two_grid_solve, Level};
use crate::{Result, TeigError, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    Direct,
    TwoGrid,
    Both,
}

impl StudyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(StudyMode::Direct),
            "twogrid" => Ok(StudyMode::TwoGrid),
            "both" => Ok(StudyMode::Both),
            other => Err(TeigError::Config(format!("unknown mode '{other}' (direct|twogrid|both)"))),
        }
    }

    fn direct(self) -> bool {
        matches!(self, StudyMode::Direct | StudyMode::Both)
    }

    fn two_grid(self) -> bool {
        matches!(self, StudyMode::TwoGrid | StudyMode::Both)
    }
}

/// One `(H, h)` pair in cells per unit length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderStep {
    pub coarse: usize,
    pub fine: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub domain: DomainKind,
    pub index: RefractiveIndex,
    pub mode: StudyMode,
    pub ladder: Vec<LadderStep>,
    /// 1-based indices into the physical spectrum.
    pub eigs: Vec<usize>,
    pub quad_order: usize,
    pub tol: f64,
    pub threads: Option<usize>,
    /// Skip direct fine solves above this many cells per unit.
    pub max_direct_cells: Option<usize>,
    /// Leave the seconds column empty so output is bit-reproducible.
    pub record_timing: bool,
}

impl StudyConfig {
    pub fn new(domain: DomainKind, index: RefractiveIndex, ladder: Vec<LadderStep>, eigs: Vec<usize>) -> Self {
        StudyConfig {
            domain,
            index,
            mode: StudyMode::Both,
            ladder,
            eigs,
            quad_order: DEFAULT_QUAD_ORDER,
            tol: 1e-10,
            threads: None,
            max_direct_cells: None,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(TeigError::Config("ladder is empty".into()));
        }
        for s in &self.ladder {
            if s.coarse == 0 || s.fine < s.coarse || s.fine % s.coarse != 0 {
                return Err(TeigError::NotNested(format!("ladder step {}:{} is not a nested refinement", s.coarse, s.fine)));
            }
        }
        if self.eigs.is_empty() || self.eigs.contains(&0) {
            return Err(TeigError::Config("eigenvalue indices must be non-empty and 1-based".into()));
        }
        gauss_rule(self.quad_order)?;
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(TeigError::Config(format!("tolerance {} outside (0, 1e-2)", self.tol)));
        }
        if self.threads == Some(0) {
            return Err(TeigError::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    fn direct_allowed(&self, cells: usize) -> bool {
        self.mode.direct() && self.max_direct_cells.is_none_or(|m| cells <= m)
    }
}

/// Parse `"4:16,8:32"`.
pub fn parse_ladder(s: &str) -> Result<Vec<LadderStep>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (c, f) = t.split_once(':').ok_or_else(|| TeigError::Config(format!("ladder step '{t}' is not H:h")))?;
            let num = |v: &str| v.trim().parse::<usize>().map_err(|_| TeigError::Config(format!("bad ladder entry '{t}'")));
            Ok(LadderStep { coarse: num(c)?, fine: num(f)? })
        })
        .collect()
}

/// Parse `"1,2,3,4"`.
pub fn parse_eigs(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| TeigError::Config(format!("bad eigenvalue index '{t}'"))))
        .collect()
}

/// `sqrt(2)/n` for display.
pub fn mesh_label(cells: usize) -> String {
    format!("√2/{cells}")
}

pub fn mesh_size(cells: usize) -> f64 {
    std::f64::consts::SQRT_2 / cells as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub j: usize,
    pub coarse_cells: usize,
    pub fine_cells: usize,
    pub k_coarse: C64,
    pub k_direct: Option<C64>,
    pub k_two_grid: Option<C64>,
    /// Backward error of the two-grid pair, else of the direct pair.
    pub residual: f64,
    /// Two-grid correction time for this row, else the direct solve time.
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub j: usize,
    /// `"direct"` or `"twogrid"`.
    pub method: String,
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    /// Reference value per eigenvalue index: the finest direct solve on the
    /// square, the finest two-grid value on the L-shape.
    pub reference: BTreeMap<usize, C64>,
    pub orders: Vec<OrderEstimate>,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `log err` against `log h`. Needs two positive errors.
pub fn estimate_order(hs: &[f64], errs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs.iter().zip(errs).filter(|(h, e)| **h > 0.0 && **e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Picks one computed value out of a row.
type Field = fn(&StudyRow) -> Option<C64>;

struct Cache {
    coarse: BTreeMap<usize, (Level, Spectrum)>,
    fine: BTreeMap<usize, Level>,
    direct: BTreeMap<usize, (Spectrum, f64)>,
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    with_threads(config.threads, || run_study_inner(config))
}

fn run_study_inner(config: &StudyConfig) -> Result<StudyReport> {
    let exec = Execution::default();
    let quad = gauss_rule(config.quad_order)?;
    let max_j = *config.eigs.iter().max().expect("validated");
    let request = SpectrumRequest { how_many: max_j + 4, tol: config.tol, ..SpectrumRequest::default() };
    let mut cache = Cache { coarse: BTreeMap::new(), fine: BTreeMap::new(), direct: BTreeMap::new() };
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    let level = |cells: usize| Level::build(config.domain, cells, &config.index, &quad, exec);
    let solve = |lvl: &Level| -> Result<(Spectrum, f64)> {
        let t = Instant::now();
        let s = solve_pencil_factored(lvl.pencil(), &lvl.factor, &request)?;
        Ok((s, t.elapsed().as_secs_f64()))
    };

    for (pos, step) in config.ladder.iter().enumerate() {
        if let std::collections::btree_map::Entry::Vacant(slot) = cache.coarse.entry(step.coarse) {
            let lvl = level(step.coarse)?;
            let (s, _) = solve(&lvl)?;
            warnings.extend(s.warnings.iter().cloned());
            slot.insert((lvl, s));
        }
        let need_fine_level = config.mode.two_grid() || (config.direct_allowed(step.fine) && !cache.direct.contains_key(&step.fine));
        if need_fine_level && !cache.fine.contains_key(&step.fine) {
            cache.fine.insert(step.fine, level(step.fine)?);
        }
        if config.direct_allowed(step.fine) && !cache.direct.contains_key(&step.fine) {
            let sol = solve(&cache.fine[&step.fine])?;
            warnings.extend(sol.0.warnings.iter().cloned());
            cache.direct.insert(step.fine, sol);
        }

        let (coarse_level, coarse_spec) = &cache.coarse[&step.coarse];
        let two_grid: Vec<Option<Result<(crate::twogrid::TwoGridEigen, f64)>>> = if config.mode.two_grid() {
            let fine_level = &cache.fine[&step.fine];
            let p = build_prolongation(coarse_level, fine_level, exec)?;
            map_range(exec, config.eigs.len(), |i| {
                let t = Instant::now();
                Some(two_grid_solve(coarse_level, coarse_spec, fine_level, &p, config.eigs[i], exec).map(|r| (r, t.elapsed().as_secs_f64())))
            })
        } else {
            config.eigs.iter().map(|_| None).collect()
        };

        for (&j, tg) in config.eigs.iter().zip(two_grid) {
            let coarse_pair = coarse_spec.physical(j)?;
            let direct: Option<(&EigenPair, f64)> = match cache.direct.get(&step.fine) {
                Some((s, secs)) if config.direct_allowed(step.fine) => Some((s.physical(j)?, *secs)),
                _ => None,
            };
            let tg = tg.transpose()?;
            let residual = tg.as_ref().map(|t| t.0.residual).or(direct.map(|d| d.0.residual)).unwrap_or(coarse_pair.residual);
            let seconds = tg.as_ref().map(|t| t.1).or(direct.map(|d| d.1));
            rows.push(StudyRow {
                j,
                coarse_cells: step.coarse,
                fine_cells: step.fine,
                k_coarse: coarse_pair.k,
                k_direct: direct.map(|d| d.0.k),
                k_two_grid: tg.map(|t| t.0.k),
                residual,
                seconds: if config.record_timing { seconds } else { None },
            });
        }

        // release levels no later step needs
        let later = &config.ladder[pos + 1..];
        cache.fine.retain(|c, _| later.iter().any(|s| s.fine == *c));
        cache.coarse.retain(|c, _| later.iter().any(|s| s.coarse == *c));
    }

    let reference = reference_values(config, &rows);
    let orders = order_estimates(config, &rows, &reference);
    Ok(StudyReport { config: config.clone(), rows, reference, orders, warnings })
}

fn reference_values(config: &StudyConfig, rows: &[StudyRow]) -> BTreeMap<usize, C64> {
    let mut out = BTreeMap::new();
    for &j in &config.eigs {
        let finest = |f: Field| {
            rows.iter().filter(|r| r.j == j).filter_map(|r| f(r).map(|k| (r.fine_cells, k))).max_by_key(|(c, _)| *c).map(|(_, k)| k)
        };
        let (first, second): (Field, Field) = match config.domain {
            DomainKind::UnitSquare => (|r| r.k_direct, |r| r.k_two_grid),
            DomainKind::LShaped => (|r| r.k_two_grid, |r| r.k_direct),
        };
        if let Some(k) = finest(first).or_else(|| finest(second)) {
            out.insert(j, k);
        }
    }
    out
}

fn order_estimates(config: &StudyConfig, rows: &[StudyRow], reference: &BTreeMap<usize, C64>) -> Vec<OrderEstimate> {
    let mut out = Vec::new();
    for (&j, &k_ref) in reference {
        for (method, f) in [("direct", (|r: &StudyRow| r.k_direct) as Field), ("twogrid", |r: &StudyRow| r.k_two_grid)] {
            let finest = rows.iter().filter(|r| r.j == j).map(|r| r.fine_cells).max().unwrap_or(0);
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.j == j && r.fine_cells < finest)
                .filter_map(|r| f(r).map(|k| (mesh_size(r.fine_cells), (k - k_ref).norm())))
                .collect();
            let (hs, es): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            if let Some(slope) = estimate_order(&hs, &es) {
                out.push(OrderEstimate { j, method: method.into(), slope });
            }
        }
    }
    let _ = config;
    out
}

/// Eigenvalues within this relative distance share one table row.
const MERGE_TOL: f64 = 1e-7;

fn fmt_k(k: C64) -> String {
    if k.im == 0.0 {
        format!("{:.10}", k.re)
    } else {
        format!("{:.10}{:+.10}i", k.re, k.im)
    }
}

fn fmt_pair(a: Option<C64>, b: Option<C64>) -> String {
    match (a, b) {
        (Some(a), Some(b)) if b.im != 0.0 && (a - b.conj()).norm() <= MERGE_TOL * a.norm() => {
            format!("{:.10} ± {:.10}i", a.re, a.im.abs())
        }
        (Some(a), _) => fmt_k(a),
        (None, _) => "---".into(),
    }
}

/// Does row `b` duplicate row `a` (double eigenvalue or conjugate partner)?
fn mergeable(a: &StudyRow, b: &StudyRow) -> bool {
    let same = |x: Option<C64>, y: Option<C64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).norm() <= MERGE_TOL * x.norm() || (x - y.conj()).norm() <= MERGE_TOL * x.norm(),
        (None, None) => true,
        _ => false,
    };
    b.j == a.j + 1
        && a.coarse_cells == b.coarse_cells
        && a.fine_cells == b.fine_cells
        && same(Some(a.k_coarse), Some(b.k_coarse))
        && same(a.k_direct, b.k_direct)
        && same(a.k_two_grid, b.k_two_grid)
}

pub fn format_table(report: &StudyReport) -> String {
    let mut s = String::new();
    let c = &report.config;
    let _ = writeln!(s, "domain={} index={} mode={:?} quad_order={}", c.domain.name(), c.index.name(), c.mode, c.quad_order);
    let _ = writeln!(s, "{:<5} {:>7} {:>7} {:>34} {:>34} {:>34}", "j", "H", "h", "k_H", "k_h", "k_tg");
    let mut rows: Vec<&StudyRow> = report.rows.iter().collect();
    rows.sort_by_key(|r| (r.j, r.fine_cells, r.coarse_cells));
    let mut i = 0;
    while i < rows.len() {
        let r = rows[i];
        let partner = rows.iter().find(|b| mergeable(r, b)).copied();
        let label = match partner {
            Some(b) => format!("{},{}", r.j, b.j),
            None => r.j.to_string(),
        };
        let _ = writeln!(
            s,
            "{:<5} {:>7} {:>7} {:>34} {:>34} {:>34}",
            label,
            mesh_label(r.coarse_cells),
            mesh_label(r.fine_cells),
            fmt_pair(Some(r.k_coarse), partner.map(|b| b.k_coarse)),
            fmt_pair(r.k_direct, partner.and_then(|b| b.k_direct)),
            fmt_pair(r.k_two_grid, partner.and_then(|b| b.k_two_grid)),
        );
        i += 1;
        if let Some(b) = partner {
            rows.retain(|x| !std::ptr::eq(*x, b));
        }
    }
    if !report.orders.is_empty() {
        let _ = writeln!(s, "\nobserved convergence order (least squares, against the reference value)");
        for o in &report.orders {
            let _ = writeln!(s, "  j={} {:<8} {:.3}", o.j, o.method, o.slope);
        }
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub const CSV_HEADER: &str = "j,H_cells,h_cells,kH_re,kH_im,kh_re,kh_im,ktg_re,ktg_im,residual,seconds";

pub fn format_csv(report: &StudyReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e},{},{},{},{},{:e},{}",
            r.j,
            r.coarse_cells,
            r.fine_cells,
            r.k_coarse.re,
            r.k_coarse.im,
            opt(r.k_direct.map(|k| k.re)),
            opt(r.k_direct.map(|k| k.im)),
            opt(r.k_two_grid.map(|k| k.re)),
            opt(r.k_two_grid.map(|k| k.im)),
            r.residual,
            opt(r.seconds),
        );
    }
    s
}

pub fn format_json(report: &StudyReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Log-log plot of `|k - k_ref|` against `h` for every index and method.
pub fn format_svg(report: &StudyReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (&j, &k_ref) in &report.reference {
        for (name, f) in [("direct", (|r: &StudyRow| r.k_direct) as Field), ("two-grid", |r: &StudyRow| r.k_two_grid)] {
            let pts: Vec<(f64, f64)> = report
                .rows
                .iter()
                .filter(|r| r.j == j)
                .filter_map(|r| f(r).map(|k| (mesh_size(r.fine_cells), (k - k_ref).norm())))
                .filter(|p| p.1 > 0.0)
                .collect();
            if !pts.is_empty() {
                series.push((format!("j={j} {name}"), pts));
            }
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    if all.is_empty() {
        s.push_str("<text x=\"20\" y=\"30\">no errors to plot</text>\n</svg>\n");
        return s;
    }
    // x: log2 of the cell count n, where h = sqrt(2)/n
    let ns: Vec<f64> = all.iter().map(|p| (std::f64::consts::SQRT_2 / p.0).log2()).collect();
    let (x0, x1) = (ns.iter().cloned().fold(f64::INFINITY, f64::min).floor(), ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil().max(ns[0].floor() + 1.0));
    let les: Vec<f64> = all.iter().map(|p| p.1.log10()).collect();
    let (y0, y1) = (les.iter().cloned().fold(f64::INFINITY, f64::min).floor(), les.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil());
    let y1 = if y1 <= y0 { y0 + 1.0 } else { y1 };
    let px = |n: f64| M + (n - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |e: f64| H - M - (e - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(s, "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>", W - 2.0 * M, H - 2.0 * M);
    let mut t = x0;
    while t <= x1 + 1e-9 {
        let x = px(t);
        let _ = writeln!(s, "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ccc\"/>", M, H - M);
        let _ = writeln!(s, "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">√2/{}</text>", H - M + 18.0, 2f64.powf(t).round());
        t += 1.0;
    }
    let mut e = y0;
    while e <= y1 + 1e-9 {
        let y = py(e);
        let _ = writeln!(s, "<line x1=\"{M}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ccc\"/>", W - M);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{e}</text>", M - 6.0, y + 4.0);
        e += 1.0;
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">h</text>", W / 2.0, H - 12.0);
    let _ = writeln!(s, "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" text-anchor=\"middle\">|k - k_ref|</text>", H / 2.0, H / 2.0);
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.1},{:.1}", px((std::f64::consts::SQRT_2 / p.0).log2()), py(p.1.log10())))
            .collect();
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", path.join(" "));
        for pt in &path {
            let (x, y) = pt.split_once(',').expect("formatted pair");
            let _ = writeln!(s, "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"{color}\"/>");
        }
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{name}</text>", W - M - 110.0, M + 16.0 + 14.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

/// Write `table.txt`, `results.csv`, `results.json` and `convergence.svg`.
pub fn emit_report(report: &StudyReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| TeigError::io(out_dir, e))?;
    let files = [
        ("table.txt", format_table(report)),
        ("results.csv", format_csv(report)),
        ("results.json", format_json(report)?),
        ("convergence.svg", format_svg(report)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| TeigError::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
