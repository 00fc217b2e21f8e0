//! The discretized market: a finite grid of price levels, the paths through
//! it, payoffs evaluated on those paths and the instruments quoted on them.
//!
//! Paths are enumerated lexicographically by date: path index
//! `p = Σ_t d_t · G^(T-t)` where `d_t` is the level index at date `t`.
//! Prefixes of length `t` (the information available at date `t`) are
//! numbered the same way, offset by `Σ_{s<t} G^s`, so the empty prefix has
//! id 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of grid paths.
pub const DEFAULT_PATH_CAP: u64 = 10_000_000;

/// A finite path grid: `horizon` trading dates after time 0, each taking a
/// value in `levels`, started from `s0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGridModel {
    horizon: usize,
    levels: Vec<f64>,
    s0: f64,
    #[serde(skip, default = "default_cap")]
    path_cap: u64,
}

fn default_cap() -> u64 {
    DEFAULT_PATH_CAP
}

impl PathGridModel {
    pub fn new(horizon: usize, levels: Vec<f64>, s0: f64) -> Result<Self> {
        let model = Self {
            horizon,
            levels,
            s0,
            path_cap: DEFAULT_PATH_CAP,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_path_cap(mut self, cap: u64) -> Self {
        self.path_cap = cap;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidModel("horizon must be at least 1".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidModel("at least one price level is required".into()));
        }
        if self.levels.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidModel("levels must be finite and nonnegative".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel("levels must be strictly increasing".into()));
        }
        if !self.s0.is_finite() || self.s0 < self.levels[0] || self.s0 > *self.levels.last().unwrap() {
            return Err(Error::InvalidModel(format!(
                "s0 = {} lies outside [{}, {}]",
                self.s0,
                self.levels[0],
                self.levels.last().unwrap()
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn path_cap(&self) -> u64 {
        self.path_cap
    }

    /// Number of levels `G`.
    pub fn grid_size(&self) -> usize {
        self.levels.len()
    }

    /// `G^T` without the cap check; saturates at `u128::MAX`.
    pub fn path_count_unchecked(&self) -> u128 {
        (self.grid_size() as u128)
            .checked_pow(self.horizon as u32)
            .unwrap_or(u128::MAX)
    }

    /// `G^T`, or `SizeLimit` if it exceeds the cap.
    pub fn path_count(&self) -> Result<usize> {
        let paths = self.path_count_unchecked();
        if paths > self.path_cap as u128 {
            return Err(Error::SizeLimit {
                paths,
                cap: self.path_cap,
            });
        }
        Ok(paths as usize)
    }

    /// Index of `x` in the level list, by exact match.
    pub fn level_index(&self, x: f64) -> Option<usize> {
        self.levels
            .binary_search_by(|l| l.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less))
            .ok()
    }

    /// Total number of prefixes of length `0..T`, i.e. `Σ_{t<T} G^t`.
    pub fn prefix_count(&self) -> usize {
        (0..self.horizon).map(|t| self.grid_size().pow(t as u32)).sum()
    }

    /// Id of the first prefix of length `t`.
    pub fn prefix_offset(&self, t: usize) -> usize {
        (0..t).map(|s| self.grid_size().pow(s as u32)).sum()
    }

    /// Id of the prefix given by level indices `digits` (length < T).
    pub fn prefix_id(&self, digits: &[usize]) -> usize {
        let g = self.grid_size();
        self.prefix_offset(digits.len()) + digits.iter().fold(0, |acc, d| acc * g + d)
    }

    /// Level indices of the prefix with the given id.
    pub fn prefix_digits(&self, id: usize) -> Vec<usize> {
        let g = self.grid_size();
        let mut t = 0;
        let mut local = id;
        while t < self.horizon && local >= g.pow(t as u32) {
            local -= g.pow(t as u32);
            t += 1;
        }
        let mut digits = vec![0; t];
        for slot in digits.iter_mut().rev() {
            *slot = local % g;
            local /= g;
        }
        digits
    }

    /// Index of a path given by level indices.
    pub fn path_index(&self, digits: &[usize]) -> usize {
        let g = self.grid_size();
        digits.iter().fold(0, |acc, d| acc * g + d)
    }

    /// Level indices of the path with the given index.
    pub fn path_digits(&self, mut index: usize) -> Vec<usize> {
        let g = self.grid_size();
        let mut digits = vec![0; self.horizon];
        for slot in digits.iter_mut().rev() {
            *slot = index % g;
            index /= g;
        }
        digits
    }

    pub fn path_at(&self, index: usize) -> Path {
        Path {
            coordinates: self
                .path_digits(index)
                .into_iter()
                .map(|d| self.levels[d])
                .collect(),
        }
    }

    /// Level indices of `path`, or `InvalidPath`.
    pub fn digits_of(&self, path: &Path) -> Result<Vec<usize>> {
        if path.coordinates.len() != self.horizon {
            return Err(Error::InvalidPath(format!(
                "path has {} coordinates, horizon is {}",
                path.coordinates.len(),
                self.horizon
            )));
        }
        path.coordinates
            .iter()
            .map(|&x| {
                self.level_index(x)
                    .ok_or_else(|| Error::InvalidPath(format!("coordinate {x} is not a grid level")))
            })
            .collect()
    }

    /// All `G^T` paths in lexicographic order.
    pub fn enumerate_paths(&self) -> Result<PathIter<'_>> {
        let total = self.path_count()?;
        Ok(PathIter {
            model: self,
            cursor: PathCursor::new(self),
            remaining: total,
        })
    }

    /// Streams every path through `f` as `(index, digits, coordinates)`
    /// without allocating per path.
    pub fn for_each_path<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(usize, &[usize], &[f64]),
    {
        let total = self.path_count()?;
        let mut cursor = PathCursor::new(self);
        for index in 0..total {
            f(index, &cursor.digits, &cursor.coords);
            cursor.advance(self);
        }
        Ok(())
    }

    /// Values of `payoff` on every path, in enumeration order.
    pub fn payoff_table(&self, payoff: &Payoff) -> Result<Vec<f64>> {
        payoff.validate(self)?;
        let mut out = Vec::with_capacity(self.path_count()?);
        self.for_each_path(|index, _, coords| out.push(payoff.value_on(coords, index, self)))?;
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPayoff(format!("payoff evaluates to {bad} on the grid")));
        }
        Ok(out)
    }

    /// `x_t` on a path given as coordinates, with `x_0 = s0`.
    pub(crate) fn coord(&self, coords: &[f64], t: usize) -> f64 {
        if t == 0 {
            self.s0
        } else {
            coords[t - 1]
        }
    }
}

/// Odometer over level indices.
struct PathCursor {
    digits: Vec<usize>,
    coords: Vec<f64>,
}

impl PathCursor {
    fn new(model: &PathGridModel) -> Self {
        Self {
            digits: vec![0; model.horizon],
            coords: vec![model.levels[0]; model.horizon],
        }
    }

    fn advance(&mut self, model: &PathGridModel) {
        let g = model.grid_size();
        for t in (0..model.horizon).rev() {
            self.digits[t] += 1;
            if self.digits[t] < g {
                self.coords[t] = model.levels[self.digits[t]];
                return;
            }
            self.digits[t] = 0;
            self.coords[t] = model.levels[0];
        }
    }
}

/// Iterator returned by [`PathGridModel::enumerate_paths`].
pub struct PathIter<'a> {
    model: &'a PathGridModel,
    cursor: PathCursor,
    remaining: usize,
}

impl Iterator for PathIter<'_> {
    type Item = Path;

    fn next(&mut self) -> Option<Path> {
        if self.remaining == 0 {
            return None;
        }
        let path = Path {
            coordinates: self.cursor.coords.clone(),
        };
        self.remaining -= 1;
        self.cursor.advance(self.model);
        Some(path)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for PathIter<'_> {}

/// A grid path `x_1, …, x_T`; `x_0 = s0` is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub coordinates: Vec<f64>,
}

impl Path {
    pub fn new(coordinates: Vec<f64>) -> Self {
        Self { coordinates }
    }
}

/// `x log x`, continuously extended by 0 at 0.
pub fn entropy(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// A payoff on grid paths. Dates run over `0..=T`; date 0 reads `s0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Payoff {
    Constant { value: f64 },
    EuropeanCall { strike: f64, date: usize },
    EuropeanPut { strike: f64, date: usize },
    /// `x_date^exponent`, exponent > 1.
    Power { exponent: f64, date: usize },
    /// `x_date · log x_date`.
    Entropy { date: usize },
    /// `max(x_0, …, x_T)`.
    RunningMax,
    /// `|x_to − x_from|`.
    Spread { from: usize, to: usize },
    /// One value per path in enumeration order.
    Custom { values: Vec<f64> },
}

impl Payoff {
    pub fn validate(&self, model: &PathGridModel) -> Result<()> {
        let check_date = |d: usize| {
            if d > model.horizon() {
                Err(Error::InvalidPayoff(format!(
                    "date {d} is beyond the horizon {}",
                    model.horizon()
                )))
            } else {
                Ok(())
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPayoff(format!("{name} must be finite")))
            }
        };
        match self {
            Payoff::Constant { value } => finite("value", *value),
            Payoff::EuropeanCall { strike, date } | Payoff::EuropeanPut { strike, date } => {
                finite("strike", *strike)?;
                check_date(*date)
            }
            Payoff::Power { exponent, date } => {
                if !(exponent.is_finite() && *exponent > 1.0) {
                    return Err(Error::InvalidPayoff("power exponent must exceed 1".into()));
                }
                check_date(*date)
            }
            Payoff::Entropy { date } => check_date(*date),
            Payoff::RunningMax => Ok(()),
            Payoff::Spread { from, to } => {
                check_date(*from)?;
                check_date(*to)
            }
            Payoff::Custom { values } => {
                let expected = model.path_count_unchecked();
                if values.len() as u128 != expected {
                    return Err(Error::InvalidPayoff(format!(
                        "custom table has {} entries, the grid has {expected} paths",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPayoff("custom table contains non-finite values".into()));
                }
                Ok(())
            }
        }
    }

    /// Value on a path known to be on the grid.
    pub(crate) fn value_on(&self, coords: &[f64], index: usize, model: &PathGridModel) -> f64 {
        let x = |t: usize| model.coord(coords, t);
        match self {
            Payoff::Constant { value } => *value,
            Payoff::EuropeanCall { strike, date } => (x(*date) - strike).max(0.0),
            Payoff::EuropeanPut { strike, date } => (strike - x(*date)).max(0.0),
            Payoff::Power { exponent, date } => x(*date).powf(*exponent),
            Payoff::Entropy { date } => entropy(x(*date)),
            Payoff::RunningMax => coords.iter().fold(model.s0(), |m, &v| m.max(v)),
            Payoff::Spread { from, to } => (x(*to) - x(*from)).abs(),
            Payoff::Custom { values } => values[index],
        }
    }

    /// Is this a European payoff on the terminal date with super-linear growth?
    pub fn is_superlinear_terminal(&self, model: &PathGridModel) -> bool {
        matches!(self, Payoff::Power { date, .. } | Payoff::Entropy { date }
            if *date == model.horizon())
    }
}

/// Evaluate `payoff` on `path`.
pub fn evaluate(payoff: &Payoff, path: &Path, model: &PathGridModel) -> Result<f64> {
    payoff.validate(model)?;
    let digits = model.digits_of(path)?;
    let value = payoff.value_on(&path.coordinates, model.path_index(&digits), model);
    if !value.is_finite() {
        return Err(Error::InvalidPayoff(format!("payoff evaluates to {value}")));
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    BuyOnly,
    TwoSided,
}

/// A quoted option. Its constraint function is `payoff − price`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    #[serde(flatten)]
    pub payoff: Payoff,
    pub price: f64,
    pub side: Side,
}

impl Instrument {
    pub fn new(payoff: Payoff, price: f64, side: Side) -> Self {
        Self { payoff, price, side }
    }

    pub fn buy_only(payoff: Payoff, price: f64) -> Self {
        Self::new(payoff, price, Side::BuyOnly)
    }

    pub fn two_sided(payoff: Payoff, price: f64) -> Self {
        Self::new(payoff, price, Side::TwoSided)
    }

    /// Normalized constraint values `payoff − price` on every path.
    pub fn normalized_table(&self, model: &PathGridModel) -> Result<Vec<f64>> {
        if !self.price.is_finite() {
            return Err(Error::InvalidInstruments("instrument price must be finite".into()));
        }
        let mut table = model.payoff_table(&self.payoff)?;
        for v in &mut table {
            *v -= self.price;
        }
        Ok(table)
    }
}

/// A finite list of quoted instruments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstrumentSet {
    pub instruments: Vec<Instrument>,
    /// Index of a designated super-linear instrument. On a finite grid it is
    /// not needed for the dichotomy and is kept as metadata.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_witness: Option<usize>,
}

impl InstrumentSet {
    pub fn new(instruments: Vec<Instrument>) -> Self {
        Self {
            instruments,
            growth_witness: None,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_growth_witness(mut self, index: usize) -> Self {
        self.growth_witness = Some(index);
        self
    }

    pub fn len(&self) -> usize {
        self.instruments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instruments.is_empty()
    }

    pub fn push(&mut self, instrument: Instrument) {
        self.instruments.push(instrument);
    }

    pub fn validate(&self, model: &PathGridModel) -> Result<()> {
        for inst in &self.instruments {
            inst.payoff.validate(model)?;
            if !inst.price.is_finite() {
                return Err(Error::InvalidInstruments("instrument price must be finite".into()));
            }
        }
        if let Some(w) = self.growth_witness {
            let inst = self.instruments.get(w).ok_or_else(|| {
                Error::InvalidInstruments(format!("growth witness {w} is out of range"))
            })?;
            if !inst.payoff.is_superlinear_terminal(model) {
                return Err(Error::InvalidInstruments(
                    "growth witness must be a power or entropy option at the horizon".into(),
                ));
            }
        }
        Ok(())
    }

    /// Normalized tables for all instruments, one per instrument.
    pub fn normalized_tables(&self, model: &PathGridModel) -> Result<Vec<Vec<f64>>> {
        self.validate(model)?;
        self.instruments
            .iter()
            .map(|i| i.normalized_table(model))
            .collect()
    }
}
