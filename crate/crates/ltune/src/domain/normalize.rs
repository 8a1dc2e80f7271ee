//! Min-max normalization between raw units and the unit hypercube.
//!
//! The latent pipeline operates entirely on `[0,1]` vectors, so every
//! configuration and metric passes through here on the way in and out.
//! Config ranges come from the parameter bounds; metric ranges come from the
//! observed data.

use serde::{Deserialize, Serialize};

use super::dataset::{Configuration, Dataset, MetricVector};
use super::space::{ParameterKind, ParameterSpace};
use crate::error::{Error, Result};

/// Per-feature (min, max) ranges for the `d` config dims and `e` metric dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub config_ranges: Vec<(f64, f64)>,
    pub metric_ranges: Vec<(f64, f64)>,
}

impl NormalizationSpec {
    /// Config ranges from the parameter bounds, metric ranges observed over
    /// the dataset rows. A metric column with zero observed spread gets a
    /// synthetic unit span so that max > min always holds.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::invalid(
                "cannot derive metric ranges from an empty dataset",
            ));
        }
        let e = ds.schema.e();
        let mut metric_ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); e];
        for row in ds.rows() {
            for (j, v) in row.metrics.values.iter().enumerate() {
                let (lo, hi) = &mut metric_ranges[j];
                *lo = lo.min(*v);
                *hi = hi.max(*v);
            }
        }
        for r in &mut metric_ranges {
            if r.1 <= r.0 {
                *r = (r.0, r.0 + 1.0);
            }
        }
        Ok(NormalizationSpec {
            config_ranges: ds.space.params().iter().map(|p| p.raw_range()).collect(),
            metric_ranges,
        })
    }

    /// Config ranges only; metric ranges supplied by the caller.
    pub fn with_metric_ranges(space: &ParameterSpace, metric_ranges: Vec<(f64, f64)>) -> Self {
        NormalizationSpec {
            config_ranges: space.params().iter().map(|p| p.raw_range()).collect(),
            metric_ranges,
        }
    }

    /// Map raw metrics onto [0,1], clamping anything outside the observed
    /// range.
    pub fn normalize_metrics(&self, m: &MetricVector) -> Result<Vec<f64>> {
        if m.values.len() != self.metric_ranges.len() {
            return Err(Error::shape(format!(
                "metric vector has {} values, spec has {} ranges",
                m.values.len(),
                self.metric_ranges.len()
            )));
        }
        Ok(m.values
            .iter()
            .zip(&self.metric_ranges)
            .map(|(v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect())
    }

    /// Inverse of `normalize_metrics`; components are clamped to [0,1] first.
    pub fn denormalize_metrics(&self, u: &[f64]) -> Result<MetricVector> {
        if u.len() != self.metric_ranges.len() {
            return Err(Error::shape(format!(
                "unit vector has {} values, spec has {} ranges",
                u.len(),
                self.metric_ranges.len()
            )));
        }
        Ok(MetricVector::new(
            u.iter()
                .zip(&self.metric_ranges)
                .map(|(v, (lo, hi))| lo + v.clamp(0.0, 1.0) * (hi - lo))
                .collect(),
        ))
    }
}

/// Map a valid configuration onto the unit cube: `(v - min) / (max - min)`
/// per numeric parameter, `index / (|categories| - 1)` per categorical one
/// (0 when there is a single category).
pub fn normalize_config(
    space: &ParameterSpace,
    spec: &NormalizationSpec,
    conf: &Configuration,
) -> Result<Vec<f64>> {
    space.validate_config(conf)?;
    let mut out = Vec::with_capacity(space.d());
    for ((p, range), v) in space
        .params()
        .iter()
        .zip(&spec.config_ranges)
        .zip(&conf.values)
    {
        let (lo, hi) = *range;
        let u = match &p.kind {
            ParameterKind::Categorical { categories } if categories.len() == 1 => 0.0,
            _ => (v - lo) / (hi - lo),
        };
        out.push(u);
    }
    Ok(out)
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Total inverse of `normalize_config`: components are clamped to [0,1],
/// integer parameters are rounded half-up, categorical ones snap to the
/// nearest index. Never fails for finite input.
pub fn denormalize_config(
    space: &ParameterSpace,
    spec: &NormalizationSpec,
    u: &[f64],
) -> Configuration {
    debug_assert_eq!(u.len(), space.d());
    let mut values = Vec::with_capacity(space.d());
    for ((p, range), raw_u) in space.params().iter().zip(&spec.config_ranges).zip(u) {
        let (lo, hi) = *range;
        let c = raw_u.clamp(0.0, 1.0);
        let v = match &p.kind {
            ParameterKind::Continuous { .. } => lo + c * (hi - lo),
            ParameterKind::Integer { .. } => round_half_up(lo + c * (hi - lo)).clamp(lo, hi),
            ParameterKind::Categorical { categories } => {
                round_half_up(c * (categories.len() - 1) as f64)
                    .clamp(0.0, (categories.len() - 1) as f64)
            }
        };
        values.push(v);
    }
    Configuration { values }
}

/// Autoencoder input: normalized config dims followed by normalized metric
/// dims, `t = d + e` components, all in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct AeInput {
    pub vector: Vec<f64>,
}

impl AeInput {
    pub fn t(&self) -> usize {
        self.vector.len()
    }
}

/// Concatenate a normalized configuration and normalized metrics into one
/// autoencoder input, config dims first.
pub fn concat_input(conf_u: &[f64], metric_u: &[f64]) -> Result<AeInput> {
    for v in conf_u.iter().chain(metric_u) {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::invalid(format!(
                "component {v} outside the unit interval"
            )));
        }
    }
    let mut vector = Vec::with_capacity(conf_u.len() + metric_u.len());
    vector.extend_from_slice(conf_u);
    vector.extend_from_slice(metric_u);
    Ok(AeInput { vector })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::space::{MetricSchema, ParameterSpec};
    use crate::domain::Provenance;
    use proptest::prelude::*;

    fn space() -> ParameterSpace {
        ParameterSpace::new(vec![
            ParameterSpec::continuous("a", 0.0, 100.0, 10.0),
            ParameterSpec::integer("b", 0, 100, 8),
            ParameterSpec::categorical("c", &["x", "y", "z"], "y"),
        ])
        .unwrap()
    }

    fn spec() -> NormalizationSpec {
        NormalizationSpec::with_metric_ranges(&space(), vec![(0.0, 10.0)])
    }

    #[test]
    fn linear_map_and_endpoints() {
        let sp = space();
        let ns = spec();
        let u = normalize_config(
            &sp,
            &ns,
            &Configuration {
                values: vec![25.0, 0.0, 2.0],
            },
        )
        .unwrap();
        assert_eq!(u[0], 0.25);
        assert_eq!(u[1], 0.0);
        assert_eq!(u[2], 1.0); // last of 3 categories

        let hi = normalize_config(
            &sp,
            &ns,
            &Configuration {
                values: vec![100.0, 100.0, 0.0],
            },
        )
        .unwrap();
        assert_eq!(hi[0], 1.0);
        assert_eq!(hi[1], 1.0);
        assert_eq!(hi[2], 0.0);
    }

    #[test]
    fn out_of_bounds_value_errors() {
        let err = normalize_config(
            &space(),
            &spec(),
            &Configuration {
                values: vec![101.0, 0.0, 0.0],
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("`a`"));
    }

    #[test]
    fn denormalize_clamps_and_inverts() {
        let sp = space();
        let ns = spec();
        let conf = denormalize_config(&sp, &ns, &[0.25, 1.3, -0.2]);
        assert_eq!(conf.values, vec![25.0, 100.0, 0.0]);
    }

    #[test]
    fn integer_rounding_boundary_matches_oracle() {
        // Oracle: direct round-half-up of u * range over a fine grid.
        let sp = ParameterSpace::new(vec![ParameterSpec::integer("b", 0, 100, 0)]).unwrap();
        let ns = NormalizationSpec::with_metric_ranges(&sp, vec![]);
        for k in 0..=10_000 {
            let u = k as f64 / 10_000.0;
            let got = denormalize_config(&sp, &ns, &[u]).values[0];
            let oracle = (u * 100.0 + 0.5).floor().clamp(0.0, 100.0);
            assert_eq!(got, oracle, "u={u}");
        }
        assert_eq!(denormalize_config(&sp, &ns, &[0.49]).values[0], 49.0);
        assert_eq!(denormalize_config(&sp, &ns, &[0.495]).values[0], 50.0);
    }

    #[test]
    fn concat_is_config_then_metrics() {
        let x = concat_input(&[0.1, 0.2], &[0.9]).unwrap();
        assert_eq!(x.vector, vec![0.1, 0.2, 0.9]);
        assert_eq!(x.t(), 3);
        let z = concat_input(&[0.0; 138], &[0.0; 2]).unwrap();
        assert_eq!(z.t(), 140);
        assert!(z.vector.iter().all(|v| *v == 0.0));
        assert!(concat_input(&[1.5], &[0.0]).is_err());
    }

    #[test]
    fn metric_ranges_come_from_observed_data() {
        let sp = ParameterSpace::new(vec![ParameterSpec::continuous("a", 0.0, 1.0, 0.0)]).unwrap();
        let mut ds = Dataset::new(sp, MetricSchema::mysql());
        for (t, l) in [(100.0, 5.0), (300.0, 9.0), (200.0, 7.0)] {
            ds.push(
                Configuration { values: vec![0.5] },
                MetricVector::new(vec![t, l]),
                Provenance::Measured,
            )
            .unwrap();
        }
        let ns = NormalizationSpec::from_dataset(&ds).unwrap();
        assert_eq!(ns.metric_ranges, vec![(100.0, 300.0), (5.0, 9.0)]);
        let u = ns
            .normalize_metrics(&MetricVector::new(vec![200.0, 5.0]))
            .unwrap();
        assert_eq!(u, vec![0.5, 0.0]);
        let back = ns.denormalize_metrics(&u).unwrap();
        assert_eq!(back.values, vec![200.0, 5.0]);
    }

    #[test]
    fn constant_metric_column_gets_positive_span() {
        let sp = ParameterSpace::new(vec![ParameterSpec::continuous("a", 0.0, 1.0, 0.0)]).unwrap();
        let mut ds = Dataset::new(sp, MetricSchema::mysql());
        ds.push(
            Configuration { values: vec![0.5] },
            MetricVector::new(vec![42.0, 1.0]),
            Provenance::Measured,
        )
        .unwrap();
        let ns = NormalizationSpec::from_dataset(&ds).unwrap();
        assert!(ns.metric_ranges.iter().all(|(lo, hi)| hi > lo));
        let u = ns
            .normalize_metrics(&MetricVector::new(vec![42.0, 1.0]))
            .unwrap();
        let back = ns.denormalize_metrics(&u).unwrap();
        assert_eq!(back.values, vec![42.0, 1.0]);
    }

    proptest! {
        #[test]
        fn normalization_round_trip(
            a in 0.0_f64..=100.0,
            b in 0_i64..=100,
            c in 0_i64..3,
        ) {
            let sp = space();
            let ns = spec();
            let conf = Configuration { values: vec![a, b as f64, c as f64] };
            let u = normalize_config(&sp, &ns, &conf).unwrap();
            prop_assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
            let back = denormalize_config(&sp, &ns, &u);
            // exact for integer/categorical, tight relative error for continuous
            prop_assert_eq!(back.values[1], conf.values[1]);
            prop_assert_eq!(back.values[2], conf.values[2]);
            let rel = (back.values[0] - conf.values[0]).abs() / conf.values[0].abs().max(1.0);
            prop_assert!(rel <= 1e-9);
        }

        #[test]
        fn denormalize_is_total(u0 in -5.0_f64..5.0, u1 in -5.0_f64..5.0, u2 in -5.0_f64..5.0) {
            let sp = space();
            let conf = denormalize_config(&sp, &spec(), &[u0, u1, u2]);
            prop_assert!(sp.validate_config(&conf).is_ok());
        }
    }
}
