//! Seeded random instances for property tests and the self-test.
//!
//! Martingale measures are built transition by transition: from level `x`
//! the next law is a random mixture of two-point laws on brackets
//! `l ≤ x ≤ u`, each with mean `x`. Quotes priced under such a measure are
//! consistent by construction; shifting prices produces candidates for
//! arbitrage.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ftap::DynamicStrategy;
use crate::market::{Instrument, InstrumentSet, PathGridModel, Payoff, Side};
use crate::marginals::{CallStrip, Marginal};
use crate::martingale::PathMeasure;

/// A random market together with a measure that prices its quotes.
#[derive(Debug, Clone)]
pub struct RandomMarket {
    pub model: PathGridModel,
    pub instruments: InstrumentSet,
    /// The measure used for pricing before any mispricing.
    pub measure: PathMeasure,
    pub mispriced: bool,
}

pub struct InstanceGenerator {
    rng: ChaCha8Rng,
}

impl InstanceGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Levels on a quarter grid starting at 0 or a small positive value,
    /// `s0` a level (usually interior) or a point between levels.
    pub fn model(&mut self, max_levels: usize, max_horizon: usize) -> PathGridModel {
        let g = self.rng.gen_range(1..=max_levels.max(1));
        let horizon = self.rng.gen_range(1..=max_horizon.max(1));
        let mut x: f64 = *[0.0, 0.25, 0.5].choose(&mut self.rng).unwrap();
        let mut levels = Vec::with_capacity(g);
        for _ in 0..g {
            levels.push(x);
            x += 0.25 * self.rng.gen_range(1..=4) as f64;
        }
        let s0 = if g >= 3 && self.rng.gen_bool(0.8) {
            levels[self.rng.gen_range(1..g - 1)]
        } else if g >= 2 && self.rng.gen_bool(0.5) {
            let i = self.rng.gen_range(0..g - 1);
            0.5 * (levels[i] + levels[i + 1])
        } else {
            levels[self.rng.gen_range(0..g)]
        };
        PathGridModel::new(horizon, levels, s0).expect("generated grid is valid")
    }

    /// A random law on the levels with mean `x`, `x` within their range.
    pub fn transition(&mut self, levels: &[f64], x: f64) -> Vec<f64> {
        let g = levels.len();
        let mut law = vec![0.0; g];
        let below: Vec<usize> = (0..g).filter(|&i| levels[i] <= x).collect();
        let above: Vec<usize> = (0..g).filter(|&i| levels[i] >= x).collect();
        let pieces = self.rng.gen_range(1..=3);
        let mut total = 0.0;
        for _ in 0..pieces {
            let l = *below.choose(&mut self.rng).unwrap();
            let u = *above.choose(&mut self.rng).unwrap();
            let w: f64 = self.rng.gen_range(0.05..1.0);
            total += w;
            if l == u {
                law[l] += w;
            } else {
                let up = (x - levels[l]) / (levels[u] - levels[l]);
                law[u] += w * up;
                law[l] += w * (1.0 - up);
            }
        }
        law.iter_mut().for_each(|m| *m /= total);
        law
    }

    /// A martingale measure on the grid paths starting from `s0`.
    pub fn martingale_measure(&mut self, model: &PathGridModel) -> PathMeasure {
        let levels = model.levels().to_vec();
        let g = levels.len();
        let mut weights = vec![1.0];
        let mut current = vec![model.s0()];
        for _ in 0..model.horizon() {
            let mut next_w = Vec::with_capacity(weights.len() * g);
            let mut next_x = Vec::with_capacity(weights.len() * g);
            for (w, x) in weights.iter().zip(&current) {
                let law = if *w == 0.0 {
                    vec![0.0; g]
                } else {
                    self.transition(&levels, *x)
                };
                for (j, m) in law.iter().enumerate() {
                    next_w.push(w * m);
                    next_x.push(levels[j]);
                }
            }
            weights = next_w;
            current = next_x;
        }
        PathMeasure::new(weights)
    }

    /// A random claim of one of the built-in kinds.
    pub fn payoff(&mut self, model: &PathGridModel) -> Payoff {
        let levels = model.levels();
        let t = model.horizon();
        let date = self.rng.gen_range(1..=t);
        let strike = if self.rng.gen_bool(0.7) {
            *levels.choose(&mut self.rng).unwrap()
        } else {
            let hi = *levels.last().unwrap();
            (self.rng.gen_range(levels[0]..=hi) * 8.0).round() / 8.0
        };
        match self.rng.gen_range(0..7) {
            0 => Payoff::EuropeanCall { strike, date },
            1 => Payoff::EuropeanPut { strike, date },
            2 => Payoff::Power { exponent: 2.0, date },
            3 => Payoff::Entropy { date },
            4 => Payoff::RunningMax,
            5 => {
                let from = self.rng.gen_range(0..t);
                Payoff::Spread { from, to: self.rng.gen_range(from + 1..=t) }
            }
            _ => Payoff::Custom {
                values: (0..model.path_count().expect("grid within cap"))
                    .map(|_| (self.rng.gen_range(-2.0..2.0f64) * 64.0).round() / 64.0)
                    .collect(),
            },
        }
    }

    /// `n` quotes priced exactly under `pi`; about half of them buy-only.
    pub fn instruments(&mut self, model: &PathGridModel, pi: &PathMeasure, n: usize) -> InstrumentSet {
        let mut set = InstrumentSet::empty();
        for _ in 0..n {
            let payoff = self.payoff(model);
            let table = model.payoff_table(&payoff).expect("generated payoff is valid");
            let price = pi.expectation(&table);
            let side = if self.rng.gen_bool(0.5) { Side::BuyOnly } else { Side::TwoSided };
            set.push(Instrument::new(payoff, price, side));
        }
        set
    }

    /// A market whose quotes are consistent. Buy-only quotes may be shifted
    /// up, which keeps the pricing measure admissible.
    pub fn consistent_market(&mut self, max_levels: usize, max_horizon: usize, max_instruments: usize) -> RandomMarket {
        let model = self.model(max_levels, max_horizon);
        let measure = self.martingale_measure(&model);
        let n = self.rng.gen_range(0..=max_instruments);
        let mut instruments = self.instruments(&model, &measure, n);
        for inst in &mut instruments.instruments {
            if inst.side == Side::BuyOnly && self.rng.gen_bool(0.5) {
                inst.price += self.rng.gen_range(0.0..0.5);
            }
        }
        RandomMarket {
            model,
            instruments,
            measure,
            mispriced: false,
        }
    }

    /// A market with at least one quote shifted away from its model price.
    /// It may or may not admit an arbitrage.
    pub fn mispriced_market(&mut self, max_levels: usize, max_horizon: usize, max_instruments: usize) -> RandomMarket {
        let model = self.model(max_levels, max_horizon);
        let measure = self.martingale_measure(&model);
        let n = self.rng.gen_range(1..=max_instruments.max(1));
        let mut instruments = self.instruments(&model, &measure, n);
        let k = self.rng.gen_range(0..n);
        for (i, inst) in instruments.instruments.iter_mut().enumerate() {
            if i == k || self.rng.gen_bool(0.3) {
                let shift = self.rng.gen_range(0.05..1.0);
                inst.price += match inst.side {
                    Side::BuyOnly => -shift,
                    Side::TwoSided if self.rng.gen_bool(0.5) => -shift,
                    Side::TwoSided => shift,
                };
            }
        }
        RandomMarket {
            model,
            instruments,
            measure,
            mispriced: true,
        }
    }

    /// Consistent or mispriced with equal probability.
    pub fn market(&mut self, max_levels: usize, max_horizon: usize, max_instruments: usize) -> RandomMarket {
        if self.rng.gen_bool(0.5) {
            self.consistent_market(max_levels, max_horizon, max_instruments)
        } else {
            self.mispriced_market(max_levels, max_horizon, max_instruments)
        }
    }

    /// Positions drawn uniformly from `[−bound, bound]`.
    pub fn strategy(&mut self, model: &PathGridModel, bound: f64) -> DynamicStrategy {
        DynamicStrategy {
            positions: (0..model.prefix_count())
                .map(|_| self.rng.gen_range(-bound..=bound))
                .collect(),
        }
    }

    /// A probability vector on `g` levels; some masses are zero.
    pub fn probability_vector(&mut self, g: usize) -> Vec<f64> {
        let mut w: Vec<f64> = (0..g)
            .map(|_| if self.rng.gen_bool(0.2) { 0.0 } else { self.rng.gen_range(0.0..1.0) })
            .collect();
        if w.iter().all(|x| *x == 0.0) {
            let i = self.rng.gen_range(0..g);
            w[i] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    pub fn marginal(&mut self, date: usize, g: usize) -> Marginal {
        Marginal::new(date, self.probability_vector(g)).expect("normalized masses")
    }
}

/// Raises the price at interior strike `j` so the butterfly there is
/// `−depth`.
pub fn inject_butterfly(strip: &CallStrip, j: usize, depth: f64) -> CallStrip {
    assert!(j > 0 && j + 1 < strip.strikes.len(), "butterfly needs an interior strike");
    let k = &strip.strikes;
    let p = &strip.prices;
    let (h1, h2) = (k[j] - k[j - 1], k[j + 1] - k[j]);
    let convexity = (p[j + 1] - p[j]) / h2 - (p[j] - p[j - 1]) / h1;
    let mut out = strip.clone();
    out.prices[j] += (convexity + depth) / (1.0 / h1 + 1.0 / h2);
    out
}
