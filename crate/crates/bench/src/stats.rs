//! Summary statistics over rows.

use std::collections::BTreeMap;

use crate::Row;

/// Least-squares line through `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|y - fit(x)| / fit(x)` over the points.
    pub max_rel_residual: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_rel_residual = points
        .iter()
        .map(|&(x, y)| {
            let f = slope * x + intercept;
            (y - f).abs() / f.abs().max(f64::EPSILON)
        })
        .fold(0.0, f64::max);
    Some(LinearFit { slope, intercept, max_rel_residual })
}

/// Nearest-rank percentile of `values`; `p` in `[0, 100]`.
pub fn percentile(values: &[u64], p: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

/// Per-curve summary for the CLI.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub variant: String,
    pub index: &'static str,
    pub requests: usize,
    pub allowed: usize,
    pub p50_latency_us: u64,
    pub p95_latency_us: u64,
    pub p50_statements: u64,
    pub p95_statements: u64,
    pub mean_steps: f64,
    pub fetches: u64,
}

pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, &'static str), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.variant.clone(), r.index)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((variant, index), rs)| {
            let lat: Vec<u64> = rs.iter().map(|r| r.latency_us).collect();
            let st: Vec<u64> = rs.iter().map(|r| r.context_statements).collect();
            Summary {
                variant,
                index,
                requests: rs.len(),
                allowed: rs.iter().filter(|r| r.allowed).count(),
                p50_latency_us: percentile(&lat, 50.0).unwrap_or(0),
                p95_latency_us: percentile(&lat, 95.0).unwrap_or(0),
                p50_statements: percentile(&st, 50.0).unwrap_or(0),
                p95_statements: percentile(&st, 95.0).unwrap_or(0),
                mean_steps: rs.iter().map(|r| r.steps as f64).sum::<f64>() / rs.len() as f64,
                fetches: rs.iter().map(|r| r.fetches).sum(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_has_zero_residual() {
        let f = linear_fit(&[(1.0, 5.0), (2.0, 8.0), (3.0, 11.0)]).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-9 && (f.intercept - 2.0).abs() < 1e-9);
        assert!(f.max_rel_residual < 1e-9);
    }

    #[test]
    fn quadratic_is_not_linear() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|x| (x as f64, (x * x) as f64)).collect();
        assert!(linear_fit(&pts).unwrap().max_rel_residual > 0.1);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[(1.0, 1.0)]).is_none());
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 95.0), Some(95));
        assert_eq!(percentile(&v, 50.0), Some(50));
        assert_eq!(percentile(&v, 0.0), Some(1));
        assert_eq!(percentile(&[7], 95.0), Some(7));
    }
}
