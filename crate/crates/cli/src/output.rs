//! CSV rendering of iteration logs.
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a written
//! value gives back the same bits.

use std::fmt::Write as _;

use sdmgs::alm::SubgradientRecord;
use sdmgs::Record;

pub const RECORD_HEADER: &str = "k,phi_check_best,phi_hat,residual_norm,gamma_k,serious,rho,wall_ms";
pub const BOUND_HEADER: &str = "k,phi_check_best,phi_hat,residual_norm,gamma_k,serious,rho";
pub const SUBGRADIENT_HEADER: &str = "k,phi,best_phi,residual_norm,step,wall_ms";

fn bound_fields(out: &mut String, r: &Record) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{}",
        r.k,
        r.phi_check_best,
        r.phi_hat,
        r.residual_norm,
        r.gamma_k,
        u8::from(r.serious),
        r.rho
    );
}

pub fn records_csv(records: &[Record]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        bound_fields(&mut out, r);
        let _ = writeln!(out, ",{}", r.wall_ms);
    }
    out
}

/// Every column except `wall_ms`; identical runs give identical strings.
pub fn bound_columns_csv(records: &[Record]) -> String {
    let mut out = String::from(BOUND_HEADER);
    out.push('\n');
    for r in records {
        bound_fields(&mut out, r);
        out.push('\n');
    }
    out
}

pub fn subgradient_csv(records: &[SubgradientRecord<f64>]) -> String {
    let mut out = String::from(SUBGRADIENT_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.k, r.phi, r.best_phi, r.residual_norm, r.step, r.wall_ms);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, phi: f64) -> Record {
        Record {
            k,
            phi_check_best: phi,
            phi_hat: 0.1 + 0.2,
            residual_norm: 0.0,
            gamma_k: f64::NAN,
            serious: true,
            rho: 100.0,
            wall_ms: 1.5,
        }
    }

    #[test]
    fn column_order_and_formatting() {
        let csv = records_csv(&[rec(1, -2.0)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(RECORD_HEADER));
        assert_eq!(lines.next(), Some("1,-2,0.30000000000000004,0,NaN,1,100,1.5"));
    }

    #[test]
    fn values_round_trip() {
        let v = -1.0 / 3.0;
        let csv = bound_columns_csv(&[rec(4, v)]);
        let field = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap();
        assert_eq!(field.parse::<f64>().unwrap().to_bits(), v.to_bits());
        assert!(!csv.contains("1.5"));
    }
}
