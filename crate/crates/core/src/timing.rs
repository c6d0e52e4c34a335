//! Locality-loophole timing budgets.
//!
//! A trial is locality-safe when its duration (start of random-bit
//! generation at one node to the end of signal acquisition at the other)
//! stays strictly below the light-travel time between the two events.
//! Segment values are signed: measured tables mix offsets with different
//! zero-point conventions, so summed components are always cross-checked
//! against declared totals instead of trusting either alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Speed of light in m/ns (exact defined value).
pub const C_M_PER_NS: f64 = 0.299792458;

/// Sanity cap on individual segment magnitudes for this experiment class.
const MAX_SEGMENT_NS: f64 = 1e4;

/// Per-direction signed protocol segments, in nanoseconds.
///
/// Direction A->B sums `t_detection_b + t_delta_b + t_delta_ab +
/// t_latch_a + t_rng_a`; B->A mirrors it. The inter-node sync mismatch
/// `t_delta_ab` is added to both directions (conservative).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentTable<R> {
    pub t_rng_a_ns: Option<R>,
    pub t_rng_b_ns: Option<R>,
    pub t_latch_a_ns: Option<R>,
    pub t_latch_b_ns: Option<R>,
    pub t_delta_a_ns: Option<R>,
    pub t_delta_b_ns: Option<R>,
    pub t_delta_ab_ns: Option<R>,
    pub t_detection_a_ns: Option<R>,
    pub t_detection_b_ns: Option<R>,
    /// Declared total durations, when measured directly.
    pub t_protocol_a_to_b_ns: Option<R>,
    pub t_protocol_b_to_a_ns: Option<R>,
}

impl<R: Real> SegmentTable<R> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.t_rng_a_ns,
            self.t_rng_b_ns,
            self.t_latch_a_ns,
            self.t_latch_b_ns,
            self.t_delta_a_ns,
            self.t_delta_b_ns,
            self.t_delta_ab_ns,
            self.t_detection_a_ns,
            self.t_detection_b_ns,
            self.t_protocol_a_to_b_ns,
            self.t_protocol_b_to_a_ns,
        ];
        for v in fields.into_iter().flatten() {
            if v.abs() >= R::of(MAX_SEGMENT_NS) {
                return Err(Error::domain(format!(
                    "segment magnitude {v} ns exceeds sanity bound {MAX_SEGMENT_NS} ns"
                )));
            }
        }
        Ok(())
    }

    fn summed(&self, a_to_b: bool) -> Option<R> {
        let (det, delta_node, latch, rng) = if a_to_b {
            (self.t_detection_b_ns, self.t_delta_b_ns, self.t_latch_a_ns, self.t_rng_a_ns)
        } else {
            (self.t_detection_a_ns, self.t_delta_a_ns, self.t_latch_b_ns, self.t_rng_b_ns)
        };
        Some(det? + delta_node? + self.t_delta_ab_ns? + latch? + rng?)
    }
}

/// Per-device timing granularity and relative drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry<R> {
    pub device: String,
    pub granularity_ns: R,
    pub drift_ps_per_hr: R,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftTable<R> {
    pub entries: Vec<DriftEntry<R>>,
}

/// Light-travel budget in nanoseconds for a distance in meters.
pub fn light_budget<R: Real>(distance_m: R) -> Result<R> {
    if distance_m <= R::zero() || distance_m.is_nan() {
        return Err(Error::domain(format!(
            "distance {distance_m} m must be positive"
        )));
    }
    Ok(distance_m / R::of(C_M_PER_NS))
}

/// One direction of the locality check.
#[derive(Clone, Debug, Serialize)]
pub struct DirectionReport<R> {
    pub direction: &'static str,
    /// Signed segment sum, when all segments are present.
    pub summed_ns: Option<R>,
    /// Declared total, when present.
    pub declared_ns: Option<R>,
    /// Duration used for the margin (declared total preferred).
    pub duration_ns: R,
    pub margin_ns: R,
    pub pass: bool,
    /// Set when both a sum and a declared total exist but disagree.
    pub consistency_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalityReport<R> {
    pub distance_m: R,
    pub budget_ns: R,
    pub a_to_b: DirectionReport<R>,
    pub b_to_a: DirectionReport<R>,
    pub pass: bool,
}

/// Check both directions against the light budget. Margins must be strictly
/// positive to pass.
pub fn verify_locality<R: Real>(
    segments: &SegmentTable<R>,
    distance_m: R,
) -> Result<LocalityReport<R>> {
    segments.validate()?;
    let budget = light_budget(distance_m)?;

    let direction = |a_to_b: bool, name: &'static str| -> Result<DirectionReport<R>> {
        let summed = segments.summed(a_to_b);
        let declared = if a_to_b {
            segments.t_protocol_a_to_b_ns
        } else {
            segments.t_protocol_b_to_a_ns
        };
        let duration = declared.or(summed).ok_or_else(|| {
            Error::IncompleteTable(format!(
                "direction {name}: no declared total and missing segments"
            ))
        })?;
        let consistency_note = match (summed, declared) {
            (Some(s), Some(d)) if (s - d).abs() > R::of(1e-6) => Some(format!(
                "summed segments give {s} ns, declared total {d} ns; using the declared total"
            )),
            _ => None,
        };
        let margin = budget - duration;
        Ok(DirectionReport {
            direction: name,
            summed_ns: summed,
            declared_ns: declared,
            duration_ns: duration,
            margin_ns: margin,
            pass: margin > R::zero(),
            consistency_note,
        })
    };

    let a_to_b = direction(true, "A->B")?;
    let b_to_a = direction(false, "B->A")?;
    let pass = a_to_b.pass && b_to_a.pass;
    Ok(LocalityReport { distance_m, budget_ns: budget, a_to_b, b_to_a, pass })
}

/// Hours until a device drifts from mid-granularity to a granularity edge:
/// `(granularity/2) / drift`, i.e. the jitter-free window after centering.
pub fn jitter_free_window<R: Real>(granularity_ns: R, drift_ps_per_hr: R) -> Result<R> {
    if granularity_ns <= R::zero() || granularity_ns.is_nan() {
        return Err(Error::domain("granularity must be positive"));
    }
    if drift_ps_per_hr <= R::zero() || drift_ps_per_hr.is_nan() {
        return Err(Error::domain("drift rate must be positive"));
    }
    let half_gran_ps = granularity_ns * R::half() * R::of(1000.0);
    Ok(half_gran_ps / drift_ps_per_hr)
}

/// Smallest jitter-free window across a drift table, in hours.
pub fn limiting_jitter_free_window<R: Real>(table: &DriftTable<R>) -> Result<Option<(String, R)>> {
    let mut worst: Option<(String, R)> = None;
    for e in &table.entries {
        let w = jitter_free_window(e.granularity_ns, e.drift_ps_per_hr)?;
        if worst.as_ref().is_none_or(|(_, cur)| w < *cur) {
            worst = Some((e.device.clone(), w));
        }
    }
    Ok(worst)
}

/// On-disk timing document: key-value with units in the keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingDoc<R> {
    pub distance_m: Option<R>,
    #[serde(default)]
    pub segments: SegmentTable<R>,
    #[serde(default)]
    pub drift: Vec<DriftEntry<R>>,
}

impl<R: Real + Default + serde::de::DeserializeOwned> TimingDoc<R> {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Measured-durations table from the reference experiment.
    fn reference_table() -> SegmentTable<f64> {
        SegmentTable {
            t_rng_a_ns: Some(17.1),
            t_rng_b_ns: Some(17.1),
            t_latch_a_ns: Some(2.0),
            t_latch_b_ns: Some(7.2),
            t_delta_a_ns: Some(5.0),
            t_delta_b_ns: Some(2.0),
            t_delta_ab_ns: Some(0.55),
            t_detection_a_ns: Some(86.0),
            t_detection_b_ns: Some(94.0),
            t_protocol_a_to_b_ns: Some(106.65),
            t_protocol_b_to_a_ns: Some(106.45),
        }
    }

    #[test]
    fn light_budget_values() {
        let b: f64 = light_budget(32.928).unwrap();
        assert!((b - 109.836).abs() < 1e-3, "budget = {b}");
        let b: f64 = light_budget(0.299792458).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        let b: f64 = light_budget(33.0).unwrap();
        assert!((b - 110.076).abs() < 1e-3);
        assert!(light_budget(0.0f64).is_err());
        assert!(light_budget(-3.0f64).is_err());
    }

    #[test]
    fn light_budget_linear() {
        let b1: f64 = light_budget(10.0).unwrap();
        let b2: f64 = light_budget(20.0).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
    }

    #[test]
    fn reference_margins() {
        let report = verify_locality(&reference_table(), 32.928).unwrap();
        assert!(report.pass);
        assert!((report.a_to_b.margin_ns - 3.19).abs() < 0.1, "{}", report.a_to_b.margin_ns);
        assert!((report.b_to_a.margin_ns - 3.39).abs() < 0.1, "{}", report.b_to_a.margin_ns);
        // declared totals disagree with the naive positive sum, so the
        // consistency note must fire
        assert!(report.a_to_b.consistency_note.is_some());
        assert!((report.a_to_b.summed_ns.unwrap() - 115.65).abs() < 1e-9);
    }

    #[test]
    fn boundary_and_failure_cases() {
        let mut t = reference_table();
        let budget: f64 = light_budget(32.928).unwrap();
        t.t_protocol_a_to_b_ns = Some(budget);
        let report = verify_locality(&t, 32.928).unwrap();
        assert!(!report.a_to_b.pass, "margin 0 must fail (strict)");
        assert!(!report.pass);

        t.t_protocol_a_to_b_ns = Some(budget + 5.0);
        let report = verify_locality(&t, 32.928).unwrap();
        assert!(!report.a_to_b.pass);
        assert!(report.b_to_a.pass);
        assert_eq!(report.a_to_b.direction, "A->B");
    }

    #[test]
    fn incomplete_table_rejected() {
        let mut t = reference_table();
        t.t_protocol_a_to_b_ns = None;
        t.t_rng_a_ns = None;
        assert!(matches!(
            verify_locality(&t, 32.928),
            Err(Error::IncompleteTable(_))
        ));
    }

    #[test]
    fn shared_segment_shifts_both_margins() {
        let mut t = reference_table();
        // drop declared totals so the summed path is used
        t.t_protocol_a_to_b_ns = None;
        t.t_protocol_b_to_a_ns = None;
        let base = verify_locality(&t, 32.928).unwrap();
        let delta = 0.7;
        t.t_delta_ab_ns = Some(t.t_delta_ab_ns.unwrap() + delta);
        let shifted = verify_locality(&t, 32.928).unwrap();
        assert!((base.a_to_b.margin_ns - shifted.a_to_b.margin_ns - delta).abs() < 1e-9);
        assert!((base.b_to_a.margin_ns - shifted.b_to_a.margin_ns - delta).abs() < 1e-9);
    }

    #[test]
    fn segment_sanity_bound() {
        let mut t = reference_table();
        t.t_detection_a_ns = Some(2e4);
        assert!(verify_locality(&t, 32.928).is_err());
    }

    #[test]
    fn jitter_windows() {
        let w: f64 = jitter_free_window(2.0, 16.9).unwrap();
        assert!((w - 59.2).abs() < 0.1, "w = {w}");
        assert!((w / 24.0 - 2.47).abs() < 0.05);

        let w: f64 = jitter_free_window(2.0, 1000.0).unwrap();
        assert!((w - 1.0).abs() < 1e-12);

        let w: f64 = jitter_free_window(6.4, 0.2).unwrap();
        assert!((w - 16_000.0).abs() < 1e-6);

        assert!(jitter_free_window(0.0f64, 1.0).is_err());
        assert!(jitter_free_window(2.0f64, 0.0).is_err());
    }

    #[test]
    fn timing_doc_parses_unit_suffixed_keys() {
        let text = r#"
distance_m = 32.928

[segments]
t_rng_a_ns = 17.1
t_latch_a_ns = 2.0
t_delta_ab_ns = 0.55
t_protocol_a_to_b_ns = 106.65
t_protocol_b_to_a_ns = 106.45

[[drift]]
device = "QRNG"
granularity_ns = 2.0
drift_ps_per_hr = 16.9
"#;
        let doc = TimingDoc::<f64>::from_toml(text).unwrap();
        assert_eq!(doc.distance_m, Some(32.928));
        assert_eq!(doc.segments.t_rng_a_ns, Some(17.1));
        assert_eq!(doc.segments.t_detection_a_ns, None);
        assert_eq!(doc.drift.len(), 1);
        let report = verify_locality(&doc.segments, doc.distance_m.unwrap()).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn qrng_limits_the_drift_table() {
        let table = DriftTable {
            entries: vec![
                DriftEntry { device: "AWG5014".into(), granularity_ns: 1.66, drift_ps_per_hr: 0.1 },
                DriftEntry { device: "FPGA".into(), granularity_ns: 8.0, drift_ps_per_hr: 0.1 },
                DriftEntry { device: "AWG70K".into(), granularity_ns: 6.4, drift_ps_per_hr: 0.2 },
                DriftEntry { device: "QRNG".into(), granularity_ns: 2.0, drift_ps_per_hr: 16.9 },
            ],
        };
        let (device, hours): (String, f64) = limiting_jitter_free_window(&table).unwrap().unwrap();
        assert_eq!(device, "QRNG");
        assert!((hours - 59.17).abs() < 0.05);
    }
}
