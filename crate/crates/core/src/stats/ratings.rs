use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::report::{significance_stars, ComparisonReport, ReportRow};
use super::{bonferroni, EffectSizeMode, StatsError};

/// The five perceived-empathy subscales, in report order.
pub const SUBSCALES: [&str; 5] = ["sincerity", "compassion", "warmth", "actionable", "relatability"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingSource {
    Human,
    Pilot,
}

/// Coding of the 7-point semantic differential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingScale {
    /// Values 1..=7 as collected.
    #[default]
    Raw,
    /// Collected 1..=7 values recoded to -3..=3 around the neutral midpoint.
    Centered,
}

impl RatingScale {
    fn bounds(self) -> (i32, i32) {
        match self {
            RatingScale::Raw => (1, 7),
            RatingScale::Centered => (-3, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub incident_id: String,
    pub rater_id: String,
    pub source: RatingSource,
    pub sincerity: i32,
    pub compassion: i32,
    pub warmth: i32,
    pub actionable: i32,
    pub relatability: i32,
    pub total: f64,
}

impl RatingRecord {
    /// Validates subscale bounds for `scale` and computes the total.
    pub fn new(
        incident_id: impl Into<String>,
        rater_id: impl Into<String>,
        source: RatingSource,
        subscales: [i32; 5],
        scale: RatingScale,
    ) -> Result<Self, String> {
        let (lo, hi) = scale.bounds();
        if let Some((name, v)) = SUBSCALES.iter().zip(subscales).find(|(_, v)| *v < lo || *v > hi) {
            return Err(format!("{name}={v} outside {lo}..={hi}"));
        }
        let [sincerity, compassion, warmth, actionable, relatability] = subscales;
        Ok(Self {
            incident_id: incident_id.into(),
            rater_id: rater_id.into(),
            source,
            sincerity,
            compassion,
            warmth,
            actionable,
            relatability,
            total: subscales.iter().map(|&v| f64::from(v)).sum(),
        })
    }

    pub fn subscale(&self, name: &str) -> Option<i32> {
        Some(match name {
            "sincerity" => self.sincerity,
            "compassion" => self.compassion,
            "warmth" => self.warmth,
            "actionable" => self.actionable,
            "relatability" => self.relatability,
            _ => return None,
        })
    }
}

#[derive(Deserialize)]
struct CsvRow {
    incident_id: String,
    rater_id: String,
    source: RatingSource,
    sincerity: i32,
    compassion: i32,
    warmth: i32,
    actionable: i32,
    relatability: i32,
}

/// Reads the ratings CSV (`incident_id,rater_id,source,sincerity,compassion,
/// warmth,actionable,relatability`). Input values are always on the 1..=7
/// scale; `Centered` recodes them after validation.
pub fn read_ratings_csv<R: Read>(reader: R, scale: RatingScale) -> Result<Vec<RatingRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, row) in rdr.deserialize::<CsvRow>().enumerate() {
        // header is line 1
        let line = idx + 2;
        let row = row.map_err(|e| StatsError::InvalidRating { line, message: e.to_string() })?;
        let raw = [row.sincerity, row.compassion, row.warmth, row.actionable, row.relatability];
        RatingRecord::new(&row.incident_id, &row.rater_id, row.source, raw, RatingScale::Raw)
            .map_err(|message| StatsError::InvalidRating { line, message })?;
        let values = match scale {
            RatingScale::Raw => raw,
            RatingScale::Centered => raw.map(|v| v - 4),
        };
        let rec = RatingRecord::new(row.incident_id, row.rater_id, row.source, values, scale)
            .map_err(|message| StatsError::InvalidRating { line, message })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsReport {
    #[serde(flatten)]
    pub report: ComparisonReport,
    pub pairs: usize,
    /// Records without a counterpart from the other source, plus duplicates.
    pub dropped: usize,
}

/// Paired comparison of pilot against human ratings by `(incident_id, rater_id)`.
///
/// The total is tested unadjusted; subscale p-values are Bonferroni-adjusted
/// over the five subscales and their stars follow the adjusted value.
pub fn compare_ratings(records: &[RatingRecord], mode: EffectSizeMode) -> Result<RatingsReport, StatsError> {
    type Slot<'a> = (Option<&'a RatingRecord>, Option<&'a RatingRecord>);
    let mut slots: BTreeMap<(&str, &str), Slot> = BTreeMap::new();
    let mut duplicates = 0usize;
    for rec in records {
        let slot = slots.entry((rec.incident_id.as_str(), rec.rater_id.as_str())).or_default();
        let side = match rec.source {
            RatingSource::Pilot => &mut slot.0,
            RatingSource::Human => &mut slot.1,
        };
        if side.is_some() {
            duplicates += 1;
        } else {
            *side = Some(rec);
        }
    }
    let mut ids = Vec::new();
    let mut pairs = Vec::new();
    let mut unpaired = 0usize;
    for ((incident, rater), slot) in &slots {
        match slot {
            (Some(p), Some(h)) => {
                ids.push(format!("{incident}/{rater}"));
                pairs.push((*p, *h));
            }
            (p, h) => unpaired += usize::from(p.is_some()) + usize::from(h.is_some()),
        }
    }
    if pairs.is_empty() {
        return Err(StatsError::NoPairs);
    }

    let column = |f: &dyn Fn(&RatingRecord) -> f64| -> (Vec<f64>, Vec<f64>) {
        (pairs.iter().map(|(p, _)| f(p)).collect(), pairs.iter().map(|(_, h)| f(h)).collect())
    };
    let mut rows = Vec::with_capacity(1 + SUBSCALES.len());
    let (a, b) = column(&|r| r.total);
    rows.push(ReportRow::compute("total", ids.clone(), a, b, mode));
    for name in SUBSCALES {
        let (a, b) = column(&|r| f64::from(r.subscale(name).expect("known subscale")));
        rows.push(ReportRow::compute(name, ids.clone(), a, b, mode));
    }

    let raw: Vec<f64> = rows[1..].iter().filter_map(|r| r.p).collect();
    let adjusted = bonferroni(&raw, SUBSCALES.len())?;
    let mut adjusted = adjusted.into_iter();
    for row in rows[1..].iter_mut().filter(|r| r.p.is_some()) {
        let p = adjusted.next().expect("one adjusted value per p");
        row.p_adjusted = Some(p);
        row.stars = significance_stars(p).to_string();
    }

    Ok(RatingsReport {
        report: ComparisonReport { label_a: "pilot".into(), label_b: "human".into(), rows },
        pairs: pairs.len(),
        dropped: unpaired + duplicates,
    })
}
