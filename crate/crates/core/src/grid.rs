//! Sample-set specifications shared by the grid-based checks.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `n` logarithmically spaced samples on `[t_min, t_max]`, endpoints exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, n: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::Argument(format!(
                "log grid needs 0 < t_min < t_max < inf, got [{t_min}, {t_max}]"
            )));
        }
        if n < 2 {
            return Err(Error::Argument(format!("log grid needs n >= 2, got {n}")));
        }
        Ok(LogGrid { t_min, t_max, n })
    }

    pub fn points(&self) -> Vec<f64> {
        log_space(self.t_min, self.t_max, self.n)
    }
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact_and_increasing() {
        let g = LogGrid::new(1.0, 1e4, 101).unwrap().points();
        assert_eq!(g[0], 1.0);
        assert_eq!(g[100], 1e4);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[25] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(LogGrid::new(0.0, 1.0, 10).is_err());
        assert!(LogGrid::new(2.0, 1.0, 10).is_err());
        assert!(LogGrid::new(1.0, 2.0, 1).is_err());
    }
}
