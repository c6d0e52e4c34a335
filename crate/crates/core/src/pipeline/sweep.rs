//! Trade-off between the CHSH value and the number of trials needed for a
//! target output length.

use std::io::Write;

use serde::Serialize;

use crate::device::{calibrate_visibility, expected_values, QuantumDeviceModel};
use crate::entropy::{output_length, EtaStrategy, SecurityParams};
use crate::error::Result;
use crate::real::Real;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow<R> {
    pub s: R,
    /// Minimal n reaching the target, when reachable.
    pub n: Option<u64>,
    /// Reason a row is absent.
    pub note: Option<String>,
}

const N_SEARCH_CAP: u64 = 1 << 56;

fn m_at<R: Real>(
    s_mu: R,
    eta: &EtaStrategy<R>,
    template: &SecurityParams<R>,
    n: u64,
) -> Result<u64> {
    let mut params = template.clone();
    params.n = n;
    output_length(s_mu, eta, &params)
}

/// For each S on the grid, map S to its violation level via the symmetric
/// depolarized model, then binary-search the smallest n whose certified
/// output length reaches `target_m`.
pub fn tradeoff_sweep<R: Real>(
    target_m: u64,
    mu: R,
    eta: &EtaStrategy<R>,
    security: &SecurityParams<R>,
    s_grid: &[R],
) -> Result<Vec<SweepRow<R>>> {
    let mut rows = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let visibility = match calibrate_visibility(s) {
            Ok(v) => v,
            Err(e) => {
                rows.push(SweepRow { s, n: None, note: Some(e.to_string()) });
                continue;
            }
        };
        let model = QuantumDeviceModel::symmetric(visibility);
        let (_, s_mu) = expected_values(&model, mu)?;
        if s_mu <= R::zero() {
            rows.push(SweepRow {
                s,
                n: None,
                note: Some(format!("no MDL violation at mu = {mu} (S_mu = {s_mu})")),
            });
            continue;
        }

        // exponential bracket, then bisect on the monotone reachable side
        let mut hi = 1u64;
        while m_at(s_mu, eta, security, hi)? < target_m && hi < N_SEARCH_CAP {
            hi *= 2;
        }
        if m_at(s_mu, eta, security, hi)? < target_m {
            rows.push(SweepRow {
                s,
                n: None,
                note: Some("target unreachable under this eta strategy".into()),
            });
            continue;
        }
        let mut lo = 1u64;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if m_at(s_mu, eta, security, mid)? >= target_m {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        rows.push(SweepRow { s, n: Some(lo), note: None });
    }
    Ok(rows)
}

/// CSV export with header `S,n,note`.
pub fn write_sweep_csv<R: Real, W: Write>(rows: &[SweepRow<R>], sink: &mut W) -> Result<()> {
    writeln!(sink, "S,n,note")?;
    for row in rows {
        match (&row.n, &row.note) {
            (Some(n), _) => writeln!(sink, "{},{},", row.s, n)?,
            (None, note) => writeln!(
                sink,
                "{},,{}",
                row.s,
                note.as_deref().unwrap_or("unreachable")
            )?,
        }
    }
    Ok(())
}
