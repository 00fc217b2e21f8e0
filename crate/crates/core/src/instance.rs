//! Instance files: a grid, its quotes and optional fixed marginals.
//!
//! ```json
//! {
//!   "horizon": 1,
//!   "levels": [0, 1, 2],
//!   "s0": 1,
//!   "instruments": [
//!     {"kind": "european_call", "params": {"strike": 1, "date": 1}, "price": 0.75, "side": "two_sided"}
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Instrument, InstrumentSet, PathGridModel};
use crate::marginals::Marginal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub horizon: usize,
    pub levels: Vec<f64>,
    pub s0: f64,
    #[serde(default)]
    pub instruments: Vec<Instrument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_witness: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marginals: Vec<Marginal>,
}

impl Instance {
    pub fn new(model: &PathGridModel, instruments: &InstrumentSet) -> Self {
        Self {
            horizon: model.horizon(),
            levels: model.levels().to_vec(),
            s0: model.s0(),
            instruments: instruments.instruments.clone(),
            growth_witness: instruments.growth_witness,
            marginals: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances serialize")
    }

    pub fn model(&self, path_cap: u64) -> Result<PathGridModel> {
        let model = PathGridModel::new(self.horizon, self.levels.clone(), self.s0)?.with_path_cap(path_cap);
        model.path_count()?;
        Ok(model)
    }

    /// The quotes, validated against `model`.
    pub fn instrument_set(&self, model: &PathGridModel) -> Result<InstrumentSet> {
        let mut set = InstrumentSet::new(self.instruments.clone());
        if let Some(w) = self.growth_witness {
            set = set.with_growth_witness(w);
        }
        set.validate(model)?;
        Ok(set)
    }

    /// The marginals, each rechecked as a probability vector on the levels.
    pub fn checked_marginals(&self, model: &PathGridModel) -> Result<Vec<Marginal>> {
        let mut out = Vec::with_capacity(self.marginals.len());
        for nu in &self.marginals {
            if nu.date == 0 || nu.date > model.horizon() || nu.masses.len() != model.grid_size() {
                return Err(Error::InvalidMarginal(format!(
                    "marginal at date {} with {} masses does not fit the grid",
                    nu.date,
                    nu.masses.len()
                )));
            }
            out.push(Marginal::new(nu.date, nu.masses.clone())?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Payoff, Side};

    #[test]
    fn parses_the_documented_layout() {
        let text = r#"{
            "horizon": 1, "levels": [0, 1, 2], "s0": 1,
            "instruments": [
                {"kind": "european_call", "params": {"strike": 1, "date": 1}, "price": 0.75, "side": "two_sided"},
                {"kind": "running_max", "price": 2, "side": "buy_only"}
            ]
        }"#;
        let inst = Instance::from_json(text).unwrap();
        let m = inst.model(1000).unwrap();
        let set = inst.instrument_set(&m).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.instruments[0].payoff, Payoff::EuropeanCall { strike: 1.0, date: 1 });
        assert_eq!(set.instruments[1].side, Side::BuyOnly);
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Instance::from_json("{"), Err(Error::Parse(_))));
        assert!(matches!(
            Instance::from_json(r#"{"horizon": 1, "levels": [1], "s0": 1, "extra": 0}"#),
            Err(Error::Parse(_))
        ));
        let inst = Instance::from_json(r#"{"horizon": 1, "levels": [2, 1], "s0": 1}"#).unwrap();
        assert!(matches!(inst.model(10), Err(Error::InvalidModel(_))));
        let inst = Instance::from_json(r#"{"horizon": 4, "levels": [0, 1, 2], "s0": 1}"#).unwrap();
        assert!(matches!(inst.model(10), Err(Error::SizeLimit { .. })));
        let inst = Instance::from_json(
            r#"{"horizon": 1, "levels": [0, 1, 2], "s0": 1, "marginals": [{"date": 1, "masses": [0.5, 0.6, 0]}]}"#,
        )
        .unwrap();
        let m = inst.model(10).unwrap();
        assert!(inst.checked_marginals(&m).is_err());
    }
}
