//! Patient-episode ingestion and feature derivation.
//!
//! Records come in as CSV in the admission-episode schema; rows that fail
//! hard validation are collected into a rejects report instead of being
//! dropped silently. Feature derivation produces the modelling columns (age
//! bands, day-of-week, scan counts, LOS, same-day flag) for the 65+ cohort.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cart::{CartError, Dataset, Target};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PatientError {
    #[error("missing mandatory column {0}")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("empty input")]
    Empty,
    #[error("{0}")]
    Cart(#[from] CartError),
}

/// One imaging event attached to an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEvent {
    pub exam_code: String,
    pub requested_date: NaiveDate,
    pub attendance_date: NaiveDate,
}

/// One admission episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub admission_date: NaiveDate,
    pub admission_time: NaiveTime,
    pub discharge_date: NaiveDate,
    pub discharge_time: NaiveTime,
    pub admission_method: String,
    pub admission_source: String,
    pub hospital: String,
    pub specialty: String,
    pub diagnosis: String,
    pub region: String,
    pub date_of_birth: NaiveDate,
    pub frailty_score: u32,
    pub scan_events: Vec<ScanEvent>,
}

/// Maps logical fields to CSV column headers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMap {
    pub patient_id: String,
    pub admission_date: String,
    pub admission_time: String,
    pub discharge_date: String,
    pub discharge_time: String,
    pub admission_method: String,
    pub admission_source: String,
    pub hospital: String,
    pub specialty: String,
    pub diagnosis: String,
    pub region: String,
    pub date_of_birth: String,
    pub frailty_score: String,
    /// Scan events packed as `code|requested|attendance` entries joined
    /// with `;` (empty cell = no scans).
    pub scan_events: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            patient_id: "patient_id".into(),
            admission_date: "admission_date".into(),
            admission_time: "admission_time".into(),
            discharge_date: "discharge_date".into(),
            discharge_time: "discharge_time".into(),
            admission_method: "admission_method".into(),
            admission_source: "admission_source".into(),
            hospital: "hospital".into(),
            specialty: "specialty".into(),
            diagnosis: "diagnosis".into(),
            region: "region".into(),
            date_of_birth: "date_of_birth".into(),
            frailty_score: "frailty_score".into(),
            scan_events: "scan_events".into(),
        }
    }
}

/// A row that failed hard validation, kept for the rejects report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based data-row number (header excluded).
    pub row: usize,
    pub reason: String,
    pub raw: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub records: Vec<PatientRecord>,
    pub rejects: Vec<Reject>,
    pub header: Vec<String>,
}

impl ParseOutcome {
    /// Rejects report: original columns plus an appended reason column.
    pub fn write_rejects<W: Write>(&self, out: W) -> Result<(), PatientError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.header.clone();
        header.push("reject_reason".into());
        w.write_record(&header)?;
        for reject in &self.rejects {
            let mut row = reject.raw.clone();
            row.push(reject.reason.clone());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Parses the episode CSV; validation failures become rejects, not errors.
pub fn parse_patient_csv<R: Read>(
    source: R,
    schema: &ColumnMap,
    date_format: &str,
    time_format: &str,
) -> Result<ParseOutcome, PatientError> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let col = |name: &str| -> Result<usize, PatientError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PatientError::MissingColumn(name.to_string()))
    };
    let idx = [
        col(&schema.patient_id)?,
        col(&schema.admission_date)?,
        col(&schema.admission_time)?,
        col(&schema.discharge_date)?,
        col(&schema.discharge_time)?,
        col(&schema.admission_method)?,
        col(&schema.admission_source)?,
        col(&schema.hospital)?,
        col(&schema.specialty)?,
        col(&schema.diagnosis)?,
        col(&schema.region)?,
        col(&schema.date_of_birth)?,
        col(&schema.frailty_score)?,
        col(&schema.scan_events)?,
    ];

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let raw: Vec<String> = record.iter().map(|s| s.to_string()).collect();
        match parse_row(&record, &idx, date_format, time_format) {
            Ok(rec) => records.push(rec),
            Err(reason) => rejects.push(Reject { row: row_no + 1, reason, raw }),
        }
    }
    Ok(ParseOutcome { records, rejects, header })
}

fn parse_row(
    record: &csv::StringRecord,
    idx: &[usize; 14],
    date_format: &str,
    time_format: &str,
) -> Result<PatientRecord, String> {
    let field = |i: usize| record.get(idx[i]).unwrap_or("").trim();
    let date = |i: usize, what: &str| {
        NaiveDate::parse_from_str(field(i), date_format)
            .map_err(|_| format!("unparseable {what} '{}'", field(i)))
    };
    let time = |i: usize, what: &str| {
        NaiveTime::parse_from_str(field(i), time_format)
            .map_err(|_| format!("unparseable {what} '{}'", field(i)))
    };
    let admission_date = date(1, "admission_date")?;
    let discharge_date = date(3, "discharge_date")?;
    if discharge_date < admission_date {
        return Err("discharge before admission".into());
    }
    let frailty_score: u32 = field(12)
        .parse()
        .map_err(|_| format!("unparseable frailty_score '{}'", field(12)))?;
    let mut scan_events = Vec::new();
    let scans_raw = field(13);
    if !scans_raw.is_empty() {
        for part in scans_raw.split(';') {
            let mut bits = part.split('|');
            let (Some(code), Some(req), Some(att)) = (bits.next(), bits.next(), bits.next())
            else {
                return Err(format!("malformed scan event '{part}'"));
            };
            let parse = |s: &str| {
                NaiveDate::parse_from_str(s.trim(), date_format)
                    .map_err(|_| format!("unparseable scan date '{s}'"))
            };
            scan_events.push(ScanEvent {
                exam_code: code.trim().to_string(),
                requested_date: parse(req)?,
                attendance_date: parse(att)?,
            });
        }
    }
    Ok(PatientRecord {
        patient_id: field(0).to_string(),
        admission_date,
        admission_time: time(2, "admission_time")?,
        discharge_date,
        discharge_time: time(4, "discharge_time")?,
        admission_method: field(5).to_string(),
        admission_source: field(6).to_string(),
        hospital: field(7).to_string(),
        specialty: field(8).to_string(),
        diagnosis: field(9).to_string(),
        region: field(10).to_string(),
        date_of_birth: date(11, "date_of_birth")?,
        frailty_score,
        scan_events,
    })
}

/// Feature-derivation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Rows below this age at admission are excluded (the 65+ cohort).
    pub min_age: u32,
    /// Width of the age bands; the last band is open-ended.
    pub age_bin_width: u32,
    /// Age above which bands collapse into one open-ended band.
    pub age_open_end: u32,
    /// Frailty band upper bounds (inclusive); values above the last bound
    /// fall into the final band. Empty = tertiles of the input data.
    pub frailty_thresholds: Vec<f64>,
    pub date_format: String,
    pub time_format: String,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            min_age: 65,
            age_bin_width: 5,
            age_open_end: 100,
            frailty_thresholds: Vec::new(),
            date_format: "%Y-%m-%d".into(),
            time_format: "%H:%M".into(),
        }
    }
}

/// One derived modelling row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow<S> {
    pub patient_id: String,
    pub admission_method: String,
    pub admission_source: String,
    pub age_years: u32,
    pub age_band: String,
    pub day_of_week: String,
    pub month: String,
    pub diagnosis: String,
    pub frailty_continuous: S,
    pub frailty_band: String,
    pub hospital: String,
    pub region: String,
    pub specialty: String,
    pub num_scans: usize,
    pub los_days: S,
    pub same_day: bool,
}

#[derive(Debug, Clone)]
pub struct FeatureOutcome<S> {
    pub rows: Vec<FeatureRow<S>>,
    /// (patient_id, reason) for excluded records.
    pub excluded: Vec<(String, String)>,
}

fn age_at<S>(record: &PatientRecord) -> u32
where
    S: Scalar,
{
    let dob = record.date_of_birth;
    let at = record.admission_date;
    let mut age = at.year() - dob.year();
    if (at.month(), at.day()) < (dob.month(), dob.day()) {
        age -= 1;
    }
    age.max(0) as u32
}

fn age_band_label(age: u32, config: &FeatureConfig) -> String {
    if age >= config.age_open_end {
        return format!("{}+", config.age_open_end);
    }
    let lo = config.min_age + ((age - config.min_age) / config.age_bin_width) * config.age_bin_width;
    format!("{}-{}", lo, lo + config.age_bin_width - 1)
}

fn frailty_band_label(score: f64, thresholds: &[f64]) -> String {
    for (i, &t) in thresholds.iter().enumerate() {
        if score <= t {
            return format!("band{i}");
        }
    }
    format!("band{}", thresholds.len())
}

/// Derives modelling features; under-age records are excluded with a reason.
///
/// Whole-day LOS: discharge_date − admission_date in days, so a same-day
/// discharge has los_days = 0 regardless of times.
pub fn derive_features<S: Scalar>(
    records: &[PatientRecord],
    config: &FeatureConfig,
) -> FeatureOutcome<S> {
    // Frailty thresholds default to tertiles of the (cohort) data.
    let thresholds: Vec<f64> = if config.frailty_thresholds.is_empty() {
        let mut scores: Vec<f64> = records
            .iter()
            .filter(|r| age_at::<S>(r) >= config.min_age)
            .map(|r| r.frailty_score as f64)
            .collect();
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if scores.is_empty() {
            vec![]
        } else {
            let q = |f: f64| scores[((scores.len() - 1) as f64 * f).round() as usize];
            vec![q(1.0 / 3.0), q(2.0 / 3.0)]
        }
    } else {
        config.frailty_thresholds.clone()
    };

    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for record in records {
        let age = age_at::<S>(record);
        if age < config.min_age {
            excluded.push((
                record.patient_id.clone(),
                format!("age {age} below cohort minimum {}", config.min_age),
            ));
            continue;
        }
        let los = (record.discharge_date - record.admission_date).num_days();
        rows.push(FeatureRow {
            patient_id: record.patient_id.clone(),
            admission_method: record.admission_method.clone(),
            admission_source: record.admission_source.clone(),
            age_years: age,
            age_band: age_band_label(age, config),
            day_of_week: record.admission_date.weekday().to_string(),
            month: record.admission_date.format("%b").to_string(),
            diagnosis: record.diagnosis.clone(),
            frailty_continuous: S::from_f64(record.frailty_score as f64),
            frailty_band: frailty_band_label(record.frailty_score as f64, &thresholds),
            hospital: record.hospital.clone(),
            region: record.region.clone(),
            specialty: record.specialty.clone(),
            num_scans: record.scan_events.len(),
            los_days: S::from_f64(los as f64),
            same_day: los == 0,
        });
    }
    FeatureOutcome { rows, excluded }
}

/// Which column feeds the tree target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Regression on length of stay.
    LosDays,
    /// Classification of same-day discharge.
    SameDay,
}

/// Age / frailty representation, matching the grouped-vs-continuous study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeMode {
    Continuous,
    Grouped,
}

/// Builds the cart training matrix from derived rows.
pub fn build_dataset<S: Scalar>(
    rows: &[FeatureRow<S>],
    age: AgeMode,
    frailty: AgeMode,
    target: TargetKind,
    include_month: bool,
) -> Result<(Dataset<S>, Target<S>), PatientError> {
    if rows.is_empty() {
        return Err(PatientError::Empty);
    }
    let mut data = Dataset::new();
    let cat = |pick: fn(&FeatureRow<S>) -> &str| -> Vec<&str> {
        rows.iter().map(pick).collect()
    };
    data.add_categorical("admission_method", &cat(|r| &r.admission_method))?;
    data.add_categorical("admission_source", &cat(|r| &r.admission_source))?;
    match age {
        AgeMode::Continuous => {
            data.add_numeric("age", rows.iter().map(|r| S::from_f64(r.age_years as f64)).collect())?
        }
        AgeMode::Grouped => data.add_categorical("age_band", &cat(|r| &r.age_band))?,
    }
    data.add_categorical("day_of_week", &cat(|r| &r.day_of_week))?;
    if include_month {
        data.add_categorical("month", &cat(|r| &r.month))?;
    }
    data.add_categorical("diagnosis", &cat(|r| &r.diagnosis))?;
    match frailty {
        AgeMode::Continuous => {
            data.add_numeric("frailty", rows.iter().map(|r| r.frailty_continuous).collect())?
        }
        AgeMode::Grouped => data.add_categorical("frailty_band", &cat(|r| &r.frailty_band))?,
    }
    data.add_categorical("hospital", &cat(|r| &r.hospital))?;
    data.add_numeric("num_scans", rows.iter().map(|r| S::from_usize(r.num_scans)).collect())?;
    data.add_categorical("specialty", &cat(|r| &r.specialty))?;

    let target = match target {
        TargetKind::LosDays => Target::Regression(rows.iter().map(|r| r.los_days).collect()),
        TargetKind::SameDay => {
            let labels: Vec<&str> =
                rows.iter().map(|r| if r.same_day { "same_day" } else { "overnight" }).collect();
            Target::classification(&labels)
        }
    };
    Ok((data, target))
}

/// Seeded shuffle split; |test| = round(test_fraction · N).
pub fn train_test_split<T: Clone>(
    rows: &[T],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), PatientError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PatientError::BadFraction(test_fraction));
    }
    if rows.is_empty() {
        return Err(PatientError::Empty);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = (test_fraction * rows.len() as f64).round() as usize;
    let (test_idx, train_idx) = order.split_at(n_test);
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect();
    Ok((pick(train_idx), pick(test_idx)))
}

/// Hospital→region association derived from the records themselves.
pub fn hospital_regions(records: &[PatientRecord]) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for r in records {
        map.entry(r.hospital.clone()).or_insert_with(|| r.region.clone());
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "\
patient_id,admission_date,admission_time,discharge_date,discharge_time,admission_method,admission_source,hospital,specialty,diagnosis,region,date_of_birth,frailty_score,scan_events
p1,2019-03-01,10:30,2019-03-06,14:00,Emergency,Own Home,h1,COTE,dx1,north,1924-01-15,3,XR|2019-03-02|2019-03-03
p2,2019-03-02,09:00,2019-03-02,17:00,Elective,Transferred,h2,T&O,dx2,north,1940-06-20,1,
";

    fn parse(csv: &str) -> ParseOutcome {
        parse_patient_csv(csv.as_bytes(), &ColumnMap::default(), "%Y-%m-%d", "%H:%M").unwrap()
    }

    #[test]
    fn well_formed_rows_parse_cleanly() {
        let out = parse(CSV);
        assert_eq!(out.records.len(), 2);
        assert!(out.rejects.is_empty());
        assert_eq!(out.records[0].scan_events.len(), 1);
        assert_eq!(out.records[1].scan_events.len(), 0);
    }

    #[test]
    fn header_only_file_yields_nothing() {
        let header = CSV.lines().next().unwrap().to_string() + "\n";
        let out = parse(&header);
        assert!(out.records.is_empty() && out.rejects.is_empty());
    }

    #[test]
    fn discharge_before_admission_is_a_reject() {
        let bad = CSV.replace("2019-03-06", "2019-02-01");
        let out = parse(&bad);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 1);
        assert!(out.rejects[0].reason.contains("discharge before admission"));
        let mut buf = Vec::new();
        out.write_rejects(&mut buf).unwrap();
        let report = String::from_utf8(buf).unwrap();
        assert!(report.contains("reject_reason"));
    }

    #[test]
    fn missing_mandatory_column_is_a_schema_error() {
        let no_id = CSV.replace("patient_id", "subject");
        let out = parse_patient_csv(no_id.as_bytes(), &ColumnMap::default(), "%Y-%m-%d", "%H:%M");
        assert!(matches!(out, Err(PatientError::MissingColumn(_))));
    }

    #[test]
    fn features_compute_age_los_and_scans() {
        let out = parse(CSV);
        let features = derive_features::<f64>(&out.records, &FeatureConfig::default());
        assert_eq!(features.rows.len(), 2);
        let p1 = &features.rows[0];
        assert_eq!(p1.age_years, 95);
        assert_eq!(p1.age_band, "95-99");
        assert_eq!(p1.los_days, 5.0);
        assert!(!p1.same_day);
        assert_eq!(p1.num_scans, 1);
        let p2 = &features.rows[1];
        assert!(p2.same_day);
        assert_eq!(p2.los_days, 0.0);
    }

    #[test]
    fn age_band_boundaries() {
        let config = FeatureConfig::default();
        assert_eq!(age_band_label(65, &config), "65-69");
        assert_eq!(age_band_label(69, &config), "65-69");
        assert_eq!(age_band_label(70, &config), "70-74");
        assert_eq!(age_band_label(103, &config), "100+");
    }

    #[test]
    fn under_age_records_are_excluded_with_reason() {
        let out = parse(&CSV.replace("1940-06-20", "1980-06-20"));
        let features = derive_features::<f64>(&out.records, &FeatureConfig::default());
        assert_eq!(features.rows.len(), 1);
        assert_eq!(features.excluded.len(), 1);
        assert!(features.excluded[0].1.contains("below cohort minimum"));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let rows: Vec<u32> = (0..15).collect();
        let (train, test) = train_test_split(&rows, 0.2, 7).unwrap();
        assert_eq!(test.len(), 3);
        assert_eq!(train.len(), 12);
        let (train2, test2) = train_test_split(&rows, 0.2, 7).unwrap();
        assert_eq!((train, test), (train2, test2));
        assert!(train_test_split(&rows, 1.5, 7).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let rows: Vec<u32> = (0..100).collect();
        let (train, test) = train_test_split(&rows, 0.2, 42).unwrap();
        let mut all: Vec<u32> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, rows);
    }

    #[test]
    fn dataset_builder_produces_matching_shapes() {
        let out = parse(CSV);
        let features = derive_features::<f64>(&out.records, &FeatureConfig::default());
        let (data, target) = build_dataset(
            &features.rows,
            AgeMode::Grouped,
            AgeMode::Continuous,
            TargetKind::LosDays,
            false,
        )
        .unwrap();
        assert_eq!(data.n_rows(), 2);
        assert_eq!(target.len(), 2);
        // month joins the classification feature set.
        let (with_month, _) = build_dataset(
            &features.rows,
            AgeMode::Grouped,
            AgeMode::Continuous,
            TargetKind::SameDay,
            true,
        )
        .unwrap();
        assert_eq!(with_month.n_features(), data.n_features() + 1);
    }

    #[test]
    fn hospitals_map_to_regions() {
        let out = parse(CSV);
        let map = hospital_regions(&out.records);
        assert_eq!(map["h1"], "north");
        assert_eq!(map["h2"], "north");
    }
}
