//! Compact payoff syntax for `--payoff`.
//!
//! | spec               | payoff                      |
//! |--------------------|-----------------------------|
//! | `const:V`          | constant `V`                |
//! | `call:K[,D]`       | `(x_D − K)_+`               |
//! | `put:K[,D]`        | `(K − x_D)_+`               |
//! | `power:P[,D]`      | `x_D^P`                     |
//! | `entropy[:D]`      | `x_D log x_D`               |
//! | `max`              | running maximum `x̄_T`       |
//! | `spread:S,T`       | `|x_T − x_S|`               |
//! | `{...}`            | JSON `{"kind", "params"}`   |
//!
//! `D` defaults to the horizon.

use modelfree::market::Payoff;

pub fn parse_payoff(spec: &str, horizon: usize) -> Result<Payoff, String> {
    let spec = spec.trim();
    if spec.starts_with('{') {
        return serde_json::from_str(spec).map_err(|e| format!("payoff JSON: {e}"));
    }
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| format!("bad number {a:?} in payoff {spec:?}")))
            .collect::<Result<_, _>>()?
    };
    let date = |i: usize| -> Result<usize, String> {
        match nums.get(i) {
            None => Ok(horizon),
            Some(&d) if d >= 0.0 && d.fract() == 0.0 => Ok(d as usize),
            Some(d) => Err(format!("date must be a nonnegative integer, got {d}")),
        }
    };
    let arity = |lo: usize, hi: usize| {
        if nums.len() < lo || nums.len() > hi {
            Err(format!("payoff {name:?} takes {lo} to {hi} arguments, got {}", nums.len()))
        } else {
            Ok(())
        }
    };
    match name.to_ascii_lowercase().as_str() {
        "const" | "constant" => {
            arity(1, 1)?;
            Ok(Payoff::Constant { value: nums[0] })
        }
        "call" => {
            arity(1, 2)?;
            Ok(Payoff::EuropeanCall { strike: nums[0], date: date(1)? })
        }
        "put" => {
            arity(1, 2)?;
            Ok(Payoff::EuropeanPut { strike: nums[0], date: date(1)? })
        }
        "power" => {
            arity(1, 2)?;
            Ok(Payoff::Power { exponent: nums[0], date: date(1)? })
        }
        "entropy" => {
            arity(0, 1)?;
            Ok(Payoff::Entropy { date: date(0)? })
        }
        "max" | "running_max" | "lookback" => {
            arity(0, 0)?;
            Ok(Payoff::RunningMax)
        }
        "spread" => {
            arity(2, 2)?;
            Ok(Payoff::Spread { from: date(0)?, to: date(1)? })
        }
        other => Err(format!("unknown payoff kind {other:?}")),
    }
}
