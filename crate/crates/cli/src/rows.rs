//! Output rows and their CSV/JSON encodings.

use serde::{Deserialize, Serialize};

/// Optional floats that survive both encodings: `None` is an empty CSV
/// field or JSON `null`, infinities are the strings `"inf"` and `"-inf"`.
pub mod opt_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match *value {
            None => s.serialize_none(),
            Some(x) if x.is_nan() => s.serialize_none(),
            Some(x) if x == f64::INFINITY => s.serialize_str("inf"),
            Some(x) if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            Some(x) => s.serialize_f64(x),
        }
    }

    struct OptF64;

    impl<'de> Visitor<'de> for OptF64 {
        type Value = Option<f64>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number, \"inf\", \"-inf\", an empty field or null")
        }

        fn visit_none<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_unit<E: de::Error>(self) -> Result<Self::Value, E> {
            Ok(None)
        }

        fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Self::Value, D::Error> {
            d.deserialize_any(OptF64)
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
            Ok(Some(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
            Ok(Some(v as f64))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
            Ok(Some(v as f64))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            match v.trim() {
                "" => Ok(None),
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => other
                    .parse()
                    .map(Some)
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        d.deserialize_option(OptF64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Analytic,
    Simulated,
}

/// One long-format result row shared by analyze, simulate and sweep.
///
/// `content` is an item index or `"all"` for catalog aggregates; `level`
/// is set only on per-level occupancy rows. Empty cells mean "not
/// applicable".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub scenario: String,
    #[serde(rename = "L")]
    pub levels: Option<u32>,
    pub n: Option<u64>,
    #[serde(with = "opt_f64")]
    pub r: Option<f64>,
    pub content: String,
    pub level: Option<u32>,
    #[serde(with = "opt_f64")]
    pub rho: Option<f64>,
    #[serde(rename = "E_h", with = "opt_f64")]
    pub e_h: Option<f64>,
    #[serde(with = "opt_f64")]
    pub gamma_interference: Option<f64>,
    #[serde(with = "opt_f64")]
    pub psi: Option<f64>,
    #[serde(with = "opt_f64")]
    pub gamma_supportable: Option<f64>,
    #[serde(with = "opt_f64")]
    pub gamma_max: Option<f64>,
    pub source: Source,
    #[serde(with = "opt_f64")]
    pub stderr: Option<f64>,
    pub regime: String,
    #[serde(with = "opt_f64")]
    pub total_request_rate: Option<f64>,
    #[serde(with = "opt_f64")]
    pub total_traffic: Option<f64>,
    pub axis_1: String,
    #[serde(with = "opt_f64")]
    pub value_1: Option<f64>,
    pub axis_2: String,
    #[serde(with = "opt_f64")]
    pub value_2: Option<f64>,
    pub flag: String,
    pub error: String,
}

impl ReportRow {
    pub fn new(experiment: &str, scenario: &str, source: Source) -> Self {
        Self {
            experiment: experiment.to_string(),
            scenario: scenario.to_string(),
            levels: None,
            n: None,
            r: None,
            content: "all".to_string(),
            level: None,
            rho: None,
            e_h: None,
            gamma_interference: None,
            psi: None,
            gamma_supportable: None,
            gamma_max: None,
            source,
            stderr: None,
            regime: String::new(),
            total_request_rate: None,
            total_traffic: None,
            axis_1: String::new(),
            value_1: None,
            axis_2: String::new(),
            value_2: None,
            flag: String::new(),
            error: String::new(),
        }
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }

    /// Appends a `;`-separated flag.
    pub fn add_flag(&mut self, flag: &str) {
        if !self.flag.is_empty() {
            self.flag.push(';');
        }
        self.flag.push_str(flag);
    }
}

/// One order-of-growth check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub experiment: String,
    pub metric: String,
    pub scenario: String,
    /// `const(rho)` or `coef*n^-a`.
    pub rho_law: String,
    /// Node counts, `;`-separated.
    pub sizes: String,
    #[serde(with = "opt_f64")]
    pub slope: Option<f64>,
    #[serde(with = "opt_f64")]
    pub r_squared: Option<f64>,
    #[serde(with = "opt_f64")]
    pub predicted: Option<f64>,
    #[serde(with = "opt_f64")]
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
    pub straddles: Option<bool>,
    pub regime: String,
    pub error: String,
}

impl ScalingRow {
    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }
}

/// Rows of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Rows {
    Report(Vec<ReportRow>),
    Scaling(Vec<ScalingRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Report(r) => r.len(),
            Rows::Scaling(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn error_count(&self) -> usize {
        match self {
            Rows::Report(r) => r.iter().filter(|x| x.is_error()).count(),
            Rows::Scaling(r) => r.iter().filter(|x| x.is_error()).count(),
        }
    }
}
