pub mod checks;
pub mod cli;
pub mod constants;
pub mod differentials;
pub mod error;
pub mod hopf;
pub mod kernels;
pub mod noise;
pub mod solver;
pub mod trees;

pub use error::{Error, Result};

use num_rational::Rational64;

/// Parses `p/q` or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let q = match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad_rational(s))?;
            let q: i64 = q.trim().parse().map_err(|_| bad_rational(s))?;
            if q == 0 {
                return Err(bad_rational(s));
            }
            Rational64::new(p, q)
        }
        None => Rational64::from(s.parse::<i64>().map_err(|_| bad_rational(s))?),
    };
    Ok(q)
}

fn bad_rational(s: &str) -> Error {
    Error::Parse { pos: 0, msg: format!("expected p/q, got {s:?}") }
}
