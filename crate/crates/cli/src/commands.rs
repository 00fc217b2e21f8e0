use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use modelfree::ftap::{self, Direction, FtapReport, VerdictReport};
use modelfree::instance::Instance;
use modelfree::market::{InstrumentSet, PathGridModel};
use modelfree::marginals::{calls_to_marginal, marginal_to_calls, read_call_strip_csv, write_call_strip_csv, Marginal};
use modelfree::martingale::build_constraints;
use modelfree::pathwise::{default_grids, doob_row, DoobRow};
use modelfree::superrep::{bounds_for_bundle, PricingReport, SideReport};
use modelfree::Error;
use serde::{Deserialize, Serialize};

use crate::config::{Format, Settings};
use crate::payoff_spec::parse_payoff;
use crate::selftest::SelftestReport;

/// Why a command did not exit 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Input(String),
    Numerical(String),
    NoMeasure(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::NoMeasure(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) | Failure::NoMeasure(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure(_) => Failure::Numerical(e.to_string()),
            Error::NoAdmissibleMeasure => Failure::NoMeasure(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

/// Rendered report plus exit code.
pub struct Output {
    pub body: String,
    pub code: u8,
}

fn render<R: Serialize>(format: Format, report: &R, text: impl FnOnce(&R) -> String, code: u8) -> Output {
    let body = match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize") + "\n",
        Format::Text => text(report),
    };
    Output { body, code }
}

fn fmt_path(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_instance(settings: &Settings) -> Result<(Instance, PathGridModel), Failure> {
    let path = settings
        .instance
        .as_ref()
        .ok_or_else(|| Failure::Input("--instance is required".into()))?;
    let instance = Instance::from_json(&read(path)?)?;
    let model = instance.model(settings.max_paths)?;
    Ok((instance, model))
}

pub fn check_arbitrage(settings: &Settings) -> Result<Output, Failure> {
    let (instance, model) = load_instance(settings)?;
    let instruments = instance.instrument_set(&model)?;
    let outcome = ftap::check(&model, &instruments, &settings.tolerances)?;
    let report = FtapReport::new(&outcome, &model);
    let code = if outcome.verdict.is_feasible() { 0 } else { 3 };
    Ok(render(settings.format, &report, |r| ftap_text(r, &instruments), code))
}

fn ftap_text(r: &FtapReport, instruments: &InstrumentSet) -> String {
    let mut s = String::new();
    let m = &r.metadata;
    match &r.verdict {
        VerdictReport::Feasible { measure } => {
            let _ = writeln!(s, "verdict: feasible (an admissible martingale measure exists)");
            let _ = writeln!(s, "measure support:");
            for w in measure {
                let _ = writeln!(s, "  {:<24} {:.12}", fmt_path(&w.path), w.weight);
            }
        }
        VerdictReport::Arbitrage { certificate } => {
            let _ = writeln!(s, "verdict: arbitrage");
            let _ = writeln!(s, "minimum gain per unit traded: {:.12}", certificate.min_gain);
            let _ = writeln!(s, "static legs:");
            for leg in &certificate.legs {
                let dir = match leg.direction {
                    Direction::Long => "buy",
                    Direction::Short => "sell",
                };
                let inst = &instruments.instruments[leg.instrument];
                let _ = writeln!(
                    s,
                    "  {dir} {:.12} of #{} {:?} at {}",
                    leg.weight, leg.instrument, inst.payoff, inst.price
                );
            }
            let _ = writeln!(s, "dynamic positions:");
            for e in &certificate.strategy {
                let _ = writeln!(s, "  after {:<20} hold {:.12}", fmt_path(&e.prefix), e.position);
            }
        }
    }
    let _ = writeln!(s, "paths: {}, rows: {}, simplex iterations: {}", m.paths, m.rows, m.lp_iterations);
    for n in &m.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

/// Parses `DATE=FILE`.
fn parse_calls_arg(arg: &str) -> Result<(usize, PathBuf), Failure> {
    let (d, f) = arg
        .split_once('=')
        .ok_or_else(|| Failure::Input(format!("--calls expects DATE=FILE, got {arg:?}")))?;
    let date = d
        .trim()
        .parse()
        .map_err(|_| Failure::Input(format!("bad date {d:?} in --calls")))?;
    Ok((date, PathBuf::from(f)))
}

pub fn price(settings: &Settings, payoff: &str, calls: &[String]) -> Result<Output, Failure> {
    let (instance, model) = load_instance(settings)?;
    let instruments = instance.instrument_set(&model)?;
    let phi = parse_payoff(payoff, model.horizon()).map_err(Failure::Input)?;
    phi.validate(&model)?;
    let mut marginals = instance.checked_marginals(&model)?;
    for arg in calls {
        let (date, path) = parse_calls_arg(arg)?;
        let file = File::open(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let strip = read_call_strip_csv(file, date)?;
        marginals.push(calls_to_marginal(&strip, model.levels())?);
    }
    let bundle = build_constraints(&model, &instruments, Some(&marginals))?;
    let values = model.payoff_table(&phi)?;
    let bounds = bounds_for_bundle(&bundle, &values, &settings.tolerances)?;
    let report = PricingReport::new(&bounds, &phi, &model);
    Ok(render(settings.format, &report, pricing_text, 0))
}

fn side_text(s: &mut String, name: &str, side: &SideReport) {
    let _ = writeln!(s, "{name}: {:.12} (duality gap {:.2e})", side.value, side.gap);
    let _ = writeln!(s, "  witness measure:");
    for w in &side.witness {
        let _ = writeln!(s, "    {:<24} {:.12}", fmt_path(&w.path), w.weight);
    }
    let h = &side.hedge;
    let _ = writeln!(s, "  hedge: cash {:.12}, min slack {:.3e}", h.cash, h.slack_min);
    for leg in &h.legs {
        let _ = writeln!(s, "    {:?} {:.12} of instrument #{}", leg.direction, leg.weight, leg.instrument);
    }
    for leg in &h.marginal_legs {
        let _ = writeln!(s, "    date {} payoff by level {:?}", leg.date, leg.values);
    }
    for e in &h.dynamic {
        let _ = writeln!(s, "    after {:<20} hold {:.12}", fmt_path(&e.prefix), e.position);
    }
}

fn pricing_text(r: &PricingReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "claim: {:?}", r.claim);
    side_text(&mut s, "upper", &r.upper);
    side_text(&mut s, "lower", &r.lower);
    let _ = writeln!(s, "(the lower-side hedge super-replicates the negated claim)");
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobDemoReport {
    pub rows: Vec<DoobRow>,
    pub pass: bool,
}

pub fn doob_demo(
    settings: &Settings,
    levels: Option<Vec<f64>>,
    horizon: Option<usize>,
    cs: &[f64],
) -> Result<Output, Failure> {
    if let Some(c) = cs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Failure::Input(format!("entropy price C must be nonnegative, got {c}")));
    }
    let grids = match (levels, horizon) {
        (None, None) => default_grids(),
        (l, h) => {
            let defaults = &default_grids()[0];
            let levels = l.unwrap_or_else(|| defaults.levels().to_vec());
            let horizon = h.unwrap_or(defaults.horizon());
            vec![PathGridModel::new(horizon, levels, 1.0)?]
        }
    };
    let mut rows = Vec::new();
    for g in grids {
        let g = g.with_path_cap(settings.max_paths);
        for &c in cs {
            rows.push(doob_row(&g, c, &settings.tolerances)?);
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    let report = DoobDemoReport { rows, pass };
    Ok(render(settings.format, &report, doob_text, if pass { 0 } else { 4 }))
}

fn doob_text(r: &DoobDemoReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<42} {:>2} {:>5} {:>10} {:>10} {:>11} {:<20} {:>10} {:>10} {:>9}  check",
        "grid", "T", "C", "lp_bound", "analytic", "min_slack", "argmin_path", "E[max]", "E-bound", "E[gains]"
    );
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:<42} {:>2} {:>5} {:>10.6} {:>10.6} {:>11.4e} {:<20} {:>10.6} {:>10.6} {:>9.1e}  {}",
            format!("{:?}", row.levels),
            row.horizon,
            row.c,
            row.lp_bound,
            row.analytic_bound,
            row.min_slack,
            fmt_path(&row.argmin_path),
            row.induced.lhs,
            row.induced.rhs,
            row.induced.gains_mean,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "overall: {}", if r.pass { "pass" } else { "FAIL" });
    s
}

/// A marginal law with its levels, as read and written by `bl-convert`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalFile {
    pub date: usize,
    pub levels: Vec<f64>,
    pub masses: Vec<f64>,
}

pub fn bl_convert(
    settings: &Settings,
    calls: Option<&Path>,
    marginal: Option<&Path>,
    date: usize,
    levels: Option<Vec<f64>>,
) -> Result<Output, Failure> {
    match (calls, marginal) {
        (Some(path), None) => {
            let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let strip = read_call_strip_csv(file, date)?;
            let levels = levels.unwrap_or_else(|| strip.strikes.clone());
            let nu = calls_to_marginal(&strip, &levels)?;
            let report = MarginalFile {
                date,
                levels,
                masses: nu.masses,
            };
            Ok(render(settings.format, &report, marginal_text, 0))
        }
        (None, Some(path)) => {
            let file: MarginalFile =
                serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let nu = Marginal::new(file.date, file.masses.clone())?;
            let strikes = levels.unwrap_or_else(|| file.levels.clone());
            let strip = marginal_to_calls(&nu, &file.levels, &strikes)?;
            let body = match settings.format {
                Format::Json => serde_json::to_string_pretty(&strip).expect("strips serialize") + "\n",
                Format::Text => {
                    let mut buf = Vec::new();
                    write_call_strip_csv(&mut buf, &strip)?;
                    String::from_utf8(buf).expect("csv is utf-8")
                }
            };
            Ok(Output { body, code: 0 })
        }
        _ => Err(Failure::Input("give exactly one of --calls or --marginal".into())),
    }
}

fn marginal_text(m: &MarginalFile) -> String {
    let mut s = format!("marginal at date {}\n", m.date);
    for (l, p) in m.levels.iter().zip(&m.masses) {
        let _ = writeln!(s, "  {l:<10} {p:.15}");
    }
    s
}

pub fn selftest(settings: &Settings, instances: usize) -> Result<Output, Failure> {
    let report = crate::selftest::run(settings.seed, instances, &settings.tolerances);
    let code = if report.pass { 0 } else { 4 };
    Ok(render(settings.format, &report, SelftestReport::text, code))
}
