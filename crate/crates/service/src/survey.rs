use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Items of the emotional-support differential, in instrument order.
pub const Q4_ITEMS: [&str; 8] =
    ["effective", "helpful", "beneficial", "adequate", "sensitive", "caring", "understanding", "supportive"];

/// `pre`, or `post_stage_k` with `k` counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SurveyPhase {
    Pre,
    PostStage(usize),
}

impl fmt::Display for SurveyPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurveyPhase::Pre => f.write_str("pre"),
            SurveyPhase::PostStage(k) => write!(f, "post_stage_{k}"),
        }
    }
}

impl FromStr for SurveyPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "pre" {
            return Ok(SurveyPhase::Pre);
        }
        s.strip_prefix("post_stage_")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .map(SurveyPhase::PostStage)
            .ok_or_else(|| format!("unknown survey phase {s:?}"))
    }
}

impl TryFrom<String> for SurveyPhase {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<SurveyPhase> for String {
    fn from(p: SurveyPhase) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyResponse {
    pub phase: SurveyPhase,
    pub q1_polite: i64,
    pub q1_dignity: i64,
    pub q1_respect: i64,
    pub q2_demands: i64,
    pub q2_resources: i64,
    pub q3_pleasure: i64,
    pub q3_energy: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q4_support: Option<BTreeMap<String, i64>>,
}

fn in_range(field: &str, value: i64, min: i64, max: i64) -> Result<(), ServiceError> {
    if (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(ServiceError::Range { field: field.to_string(), value, min, max })
    }
}

impl SurveyResponse {
    /// Checks scale bounds and the item set of `q4_support`.
    pub fn check(&self) -> Result<(), ServiceError> {
        for (field, v) in
            [("q1_polite", self.q1_polite), ("q1_dignity", self.q1_dignity), ("q1_respect", self.q1_respect)]
        {
            in_range(field, v, 1, 7)?;
        }
        for (field, v) in [
            ("q2_demands", self.q2_demands),
            ("q2_resources", self.q2_resources),
            ("q3_pleasure", self.q3_pleasure),
            ("q3_energy", self.q3_energy),
        ] {
            in_range(field, v, 1, 5)?;
        }
        if let Some(q4) = &self.q4_support {
            if q4.len() != Q4_ITEMS.len() || !Q4_ITEMS.iter().all(|i| q4.contains_key(*i)) {
                return Err(ServiceError::InvalidRequest(format!("q4_support needs exactly the items {Q4_ITEMS:?}")));
            }
            for (item, &v) in q4 {
                in_range(&format!("q4_support.{item}"), v, 1, 5)?;
            }
        }
        Ok(())
    }
}
