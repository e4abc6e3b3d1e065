//! Data-size bookkeeping for the three acquisition schemes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `100 (1 - P M / (Q (Q - 1) B))`: percentage of visibilities saved.
pub fn compression_factor(p: f64, m: f64, q: usize, b: usize) -> Result<f64> {
    if !(p > 0.0 && m > 0.0) || q < 2 || b == 0 {
        return Err(Error::Argument(
            "compression factor needs positive P, M, B and Q >= 2".into(),
        ));
    }
    Ok(100.0 * (1.0 - p * m / (q * (q - 1) * b) as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountingRow {
    pub scheme: String,
    /// Operations per batch (leading term).
    pub cost_per_batch: usize,
    /// Largest number of complex values held during acquisition.
    pub max_size: usize,
}

pub fn size_accounting(q: usize, b: usize, p: usize, m: usize) -> Vec<AccountingRow> {
    let row = |s: &str, cost, size| AccountingRow {
        scheme: s.to_string(),
        cost_per_batch: cost,
        max_size: size,
    };
    vec![
        row("classical", q * q, q * q * b),
        row("gaussian_postsensing", p * q * q, q * q),
        row("compressive", p * q, p * m),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compression_examples() {
        let c = compression_factor(150.0, 1.0, 27, 100).unwrap();
        assert!((c - 100.0 * (1.0 - 150.0 / 70200.0)).abs() < 1e-12);
        assert!((c - 99.79).abs() < 0.01);
        assert_eq!(compression_factor(70200.0, 1.0, 27, 100).unwrap(), 0.0);
        assert!((compression_factor(1825.2, 1.0, 27, 100).unwrap() - 97.4).abs() < 1e-9);
        assert!(compression_factor(0.0, 1.0, 27, 100).is_err());
    }

    #[test]
    fn table_sizes() {
        let rows = size_accounting(5, 4, 6, 2);
        let sizes: Vec<usize> = rows.iter().map(|r| r.max_size).collect();
        assert_eq!(sizes, vec![100, 25, 12]);
    }
}
