//! Call strips and marginal laws.
//!
//! On a grid with levels `L_0 < … < L_{G−1}` and strikes equal to the
//! levels, call prices `p_j = Σ_i ν_i (L_i − L_j)_+` form a piecewise-linear
//! convex curve. Its chord slopes `s_j = (p_{j+1} − p_j)/(L_{j+1} − L_j)`
//! equal `−ν(X > L_j)`, so the masses are recovered as
//!
//! ```text
//! ν_0       = 1 + s_0
//! ν_j       = s_j − s_{j−1}        0 < j < G−1
//! ν_{G−1}   = −s_{G−2}
//! ```
//!
//! with `p_{G−1} = 0` required (no mass above the top level). The extreme
//! masses are thus fixed by total probability and by the strike-`L_0` price,
//! which equals `barycenter − L_0`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Instrument, InstrumentSet, PathGridModel, Payoff};

const MASS_TOL: f64 = 1e-9;

/// The law of `x_date` as masses over the grid levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub date: usize,
    pub masses: Vec<f64>,
}

impl Marginal {
    pub fn new(date: usize, masses: Vec<f64>) -> Result<Self> {
        if date == 0 {
            return Err(Error::InvalidMarginal("marginal dates start at 1".into()));
        }
        if masses.is_empty() {
            return Err(Error::InvalidMarginal("empty mass vector".into()));
        }
        if let Some(bad) = masses.iter().find(|m| !m.is_finite() || **m < -MASS_TOL) {
            return Err(Error::InvalidMarginal(format!("mass {bad} is not a probability")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMarginal(format!("masses sum to {total}")));
        }
        Ok(Self { date, masses })
    }

    /// Unit mass at level index `index`.
    pub fn dirac(date: usize, grid_size: usize, index: usize) -> Self {
        let mut masses = vec![0.0; grid_size];
        masses[index] = 1.0;
        Self { date, masses }
    }

    pub fn barycenter(&self, levels: &[f64]) -> f64 {
        self.masses.iter().zip(levels).map(|(m, l)| m * l).sum()
    }

    /// `Σ ν(level) f(level)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, levels: &[f64], f: F) -> f64 {
        self.masses.iter().zip(levels).map(|(m, &l)| m * f(l)).sum()
    }

    pub(crate) fn check_against(&self, model: &PathGridModel) -> Result<()> {
        if self.date == 0 || self.date > model.horizon() {
            return Err(Error::InvalidMarginal(format!(
                "date {} outside 1..={}",
                self.date,
                model.horizon()
            )));
        }
        if self.masses.len() != model.grid_size() {
            return Err(Error::InvalidMarginal(format!(
                "{} masses for {} levels",
                self.masses.len(),
                model.grid_size()
            )));
        }
        Marginal::new(self.date, self.masses.clone()).map(|_| ())
    }
}

/// Prices of calls `(x_date − K_n)_+` at increasing strikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallStrip {
    pub date: usize,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    /// Optional strip weights `α_n ≥ 0`. Only finite strips exist here, so
    /// divergence conditions on the weights are not checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NegativePrice,
    /// Call spread dearer than the strike distance.
    SpreadTooWide,
    Monotonicity,
    Butterfly,
    /// Call above the spot or below its intrinsic value.
    SpotBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripViolation {
    pub kind: ViolationKind,
    pub strike: f64,
    pub amount: f64,
}

impl CallStrip {
    pub fn new(date: usize, strikes: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if strikes.len() != prices.len() {
            return Err(Error::DimensionMismatch("strikes and prices differ in length".into()));
        }
        if strikes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MisalignedStrikes("strikes must be strictly increasing".into()));
        }
        if strikes.iter().chain(&prices).any(|v| !v.is_finite()) {
            return Err(Error::StaticArbitrage("non-finite strike or price".into()));
        }
        Ok(Self {
            date,
            strikes,
            prices,
            weights: None,
        })
    }

    fn slopes(&self) -> Vec<f64> {
        self.strikes
            .windows(2)
            .zip(self.prices.windows(2))
            .map(|(k, p)| (p[1] - p[0]) / (k[1] - k[0]))
            .collect()
    }

    /// All static no-arbitrage violations, in strike order. With `s0` the
    /// spot bounds `(s0 − K)_+ ≤ p ≤ s0` are also checked.
    pub fn violations(&self, s0: Option<f64>) -> Vec<StripViolation> {
        let mut out = Vec::new();
        for (&k, &p) in self.strikes.iter().zip(&self.prices) {
            if p < -MASS_TOL {
                out.push(StripViolation {
                    kind: ViolationKind::NegativePrice,
                    strike: k,
                    amount: -p,
                });
            }
            if let Some(s0) = s0 {
                let lower = (s0 - k).max(0.0);
                if p < lower - MASS_TOL || p > s0 + MASS_TOL {
                    out.push(StripViolation {
                        kind: ViolationKind::SpotBound,
                        strike: k,
                        amount: (lower - p).max(p - s0),
                    });
                }
            }
        }
        let slopes = self.slopes();
        if let Some(&s) = slopes.first() {
            if s < -1.0 - MASS_TOL {
                out.push(StripViolation {
                    kind: ViolationKind::SpreadTooWide,
                    strike: self.strikes[0],
                    amount: -1.0 - s,
                });
            }
        }
        for (j, &s) in slopes.iter().enumerate() {
            if s > MASS_TOL {
                out.push(StripViolation {
                    kind: ViolationKind::Monotonicity,
                    strike: self.strikes[j + 1],
                    amount: s,
                });
            }
        }
        for j in 1..slopes.len() {
            let d = slopes[j] - slopes[j - 1];
            if d < -MASS_TOL {
                out.push(StripViolation {
                    kind: ViolationKind::Butterfly,
                    strike: self.strikes[j],
                    amount: -d,
                });
            }
        }
        out.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        out
    }
}

/// Call prices at `strikes` implied by `nu` on `levels`.
pub fn marginal_to_calls(nu: &Marginal, levels: &[f64], strikes: &[f64]) -> Result<CallStrip> {
    if nu.masses.len() != levels.len() {
        return Err(Error::DimensionMismatch("marginal and levels differ in length".into()));
    }
    let prices = strikes
        .iter()
        .map(|&k| nu.expectation(levels, |l| (l - k).max(0.0)))
        .collect();
    CallStrip::new(nu.date, strikes.to_vec(), prices)
}

/// Recovers the marginal from a strip whose strikes are exactly the levels.
pub fn calls_to_marginal(strip: &CallStrip, levels: &[f64]) -> Result<Marginal> {
    if strip.strikes.len() != levels.len()
        || strip
            .strikes
            .iter()
            .zip(levels)
            .any(|(k, l)| (k - l).abs() > 1e-12 * (1.0 + l.abs()))
    {
        return Err(Error::MisalignedStrikes(format!(
            "expected strikes at the {} grid levels",
            levels.len()
        )));
    }
    if let Some(v) = strip.violations(None).first() {
        return Err(Error::StaticArbitrage(format!(
            "{:?} violation of {:.3e} at strike {}",
            v.kind, v.amount, v.strike
        )));
    }
    let g = levels.len();
    let top = strip.prices[g - 1];
    if top.abs() > MASS_TOL {
        return Err(Error::OffGridMass(format!(
            "price {top} at the top level {} requires mass above the grid",
            levels[g - 1]
        )));
    }
    let masses = if g == 1 {
        vec![1.0]
    } else {
        let s = strip.slopes();
        let mut m = Vec::with_capacity(g);
        m.push(1.0 + s[0]);
        for j in 1..g - 1 {
            m.push(s[j] - s[j - 1]);
        }
        m.push(-s[g - 2]);
        // noise below the tolerance only
        m.into_iter().map(|x| if x < 0.0 { 0.0 } else { x }).collect()
    };
    let nu = Marginal::new(strip.date, masses)?;
    let back = marginal_to_calls(&nu, levels, &strip.strikes)?;
    let err = back
        .prices
        .iter()
        .zip(&strip.prices)
        .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
    if err > MASS_TOL * (1.0 + levels[g - 1]) {
        return Err(Error::OffGridMass(format!(
            "recovered marginal reprices the strip with error {err:.3e}"
        )));
    }
    Ok(nu)
}

/// One call in a strip decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripLeg {
    pub strike: f64,
    pub weight: f64,
}

/// `g(y) = constant + linear·y + Σ weight·(y − strike)_+` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripDecomposition {
    pub constant: f64,
    pub linear: f64,
    pub legs: Vec<StripLeg>,
}

impl StripDecomposition {
    pub fn value(&self, y: f64) -> f64 {
        self.legs
            .iter()
            .fold(self.constant + self.linear * y, |acc, leg| {
                acc + leg.weight * (y - leg.strike).max(0.0)
            })
    }

    /// The legs as a strip priced under `nu`.
    pub fn priced_strip(&self, nu: &Marginal, levels: &[f64]) -> Result<CallStrip> {
        let strikes: Vec<f64> = self.legs.iter().map(|l| l.strike).collect();
        let mut strip = marginal_to_calls(nu, levels, &strikes)?;
        strip.weights = Some(self.legs.iter().map(|l| l.weight).collect());
        Ok(strip)
    }
}

/// Writes the piecewise-linear interpolant of `values` on `levels` as cash,
/// a forward and calls at the interior kinks; the call weight at a kink is
/// the slope increase there.
pub fn call_strip_decompose(levels: &[f64], values: &[f64]) -> Result<StripDecomposition> {
    if levels.len() != values.len() || levels.is_empty() {
        return Err(Error::DimensionMismatch("levels and values must match and be nonempty".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidModel("levels must be strictly increasing".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPayoff("non-finite payoff value".into()));
    }
    if levels.len() == 1 {
        return Ok(StripDecomposition {
            constant: values[0],
            linear: 0.0,
            legs: Vec::new(),
        });
    }
    let slopes: Vec<f64> = levels
        .windows(2)
        .zip(values.windows(2))
        .map(|(l, v)| (v[1] - v[0]) / (l[1] - l[0]))
        .collect();
    let mut legs = Vec::new();
    for j in 1..slopes.len() {
        let d = slopes[j] - slopes[j - 1];
        let scale = 1e-12 * (1.0 + slopes[j].abs() + slopes[j - 1].abs());
        if d < -scale {
            return Err(Error::NotConvex(format!(
                "slope drops by {:.3e} at level {}",
                -d, levels[j]
            )));
        }
        if d > 0.0 && d.abs() > scale {
            legs.push(StripLeg {
                strike: levels[j],
                weight: d,
            });
        }
    }
    let linear = slopes[0];
    Ok(StripDecomposition {
        constant: values[0] - linear * levels[0],
        linear,
        legs,
    })
}

/// Two-sided calls at every level, maturing at the marginal's date and
/// priced under it. As constraints they pin the law of `x_date` to `nu`.
pub fn marginal_instruments(nu: &Marginal, levels: &[f64]) -> Result<InstrumentSet> {
    let strip = marginal_to_calls(nu, levels, levels)?;
    Ok(InstrumentSet::new(
        strip
            .strikes
            .iter()
            .zip(&strip.prices)
            .map(|(&strike, &price)| {
                Instrument::two_sided(Payoff::EuropeanCall { strike, date: nu.date }, price)
            })
            .collect(),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
struct StripRow {
    strike: f64,
    price: f64,
}

/// Reads `strike,price` rows.
pub fn read_call_strip_csv<R: Read>(reader: R, date: usize) -> Result<CallStrip> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut strikes = Vec::new();
    let mut prices = Vec::new();
    for row in rdr.deserialize::<StripRow>() {
        let row = row?;
        strikes.push(row.strike);
        prices.push(row.price);
    }
    CallStrip::new(date, strikes, prices)
}

/// Writes `strike,price` rows with a header.
pub fn write_call_strip_csv<W: Write>(writer: W, strip: &CallStrip) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (&strike, &price) in strip.strikes.iter().zip(&strip.prices) {
        wtr.serialize(StripRow { strike, price })?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
