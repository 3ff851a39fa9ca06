//! Seeded synthetic data: a patient-episode corpus and random planning
//! instances for property checks. Everything here is deterministic for a
//! fixed seed.

use std::io::Write;

use chrono::{Datelike, Days, NaiveDate, NaiveTime};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::capacity::{CapacityInstance, StaffingRule};
use crate::demand::{percentage_scenarios, DemandError, DemandMatrix, RegionDemand};
use crate::patient::{PatientRecord, ScanEvent};

pub const SPECIALTIES: [&str; 6] = ["COTE", "T&O", "CARD", "RESP", "GAST", "GERI"];
pub const HOSPITALS: [&str; 4] = ["city_general", "riverside", "northfield", "stmarys"];
pub const REGIONS: [&str; 2] = ["north", "south"];
/// Region of each hospital, aligned with [`HOSPITALS`].
pub const HOSPITAL_REGION: [usize; 4] = [0, 0, 1, 1];

const METHODS: [&str; 2] = ["Emergency", "Elective"];
const SOURCES: [&str; 3] = ["Own Home", "Transferred", "Care Home"];

/// Generates an episode corpus over three April-to-March years.
///
/// LOS depends on specialty, frailty and admission method (plus noise) so
/// fitted trees have real structure to find.
pub fn patient_corpus(n: usize, seed: u64) -> Vec<PatientRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2017, 4, 1).unwrap();
    let span_days = 1096u64; // through 2020-03-31
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let specialty_idx = rng.gen_range(0..SPECIALTIES.len());
        let hospital_idx = rng.gen_range(0..HOSPITALS.len());
        let method = METHODS[rng.gen_range(0..METHODS.len())];
        let source = SOURCES[rng.gen_range(0..SOURCES.len())];
        let frailty: u32 = rng.gen_range(0..=9);
        let age: u32 = rng.gen_range(65..=101);

        let admission_date = start + Days::new(rng.gen_range(0..span_days));
        let base = 1.0 + specialty_idx as f64 * 0.7;
        let mut los = base + frailty as f64 * 0.8 + if method == "Emergency" { 1.5 } else { 0.0 };
        los *= 0.4 + rng.gen::<f64>() * 1.2;
        // Elective low-frailty admissions are often same-day.
        if method == "Elective" && frailty <= 2 && rng.gen_bool(0.6) {
            los = 0.0;
        }
        let los_days = los.round().clamp(0.0, 60.0) as u64;
        let discharge_date = admission_date + Days::new(los_days);

        let dob_year = admission_date.ordinal() as i32; // day-of-year as jitter
        let date_of_birth = NaiveDate::from_ymd_opt(
            admission_date.year() - age as i32,
            1 + (dob_year % 12) as u32,
            1 + (dob_year % 28) as u32,
        )
        .unwrap();

        let n_scans = rng.gen_range(0..=3.min(los_days as usize + 1));
        let scan_events = (0..n_scans)
            .map(|j| {
                let requested = admission_date + Days::new(j as u64 % (los_days + 1));
                ScanEvent {
                    exam_code: ["XR", "CT", "MRI"][rng.gen_range(0..3)].to_string(),
                    requested_date: requested,
                    attendance_date: requested + Days::new(rng.gen_range(0..2)),
                }
            })
            .collect();

        records.push(PatientRecord {
            patient_id: format!("syn{i:06}"),
            admission_date,
            admission_time: NaiveTime::from_hms_opt(rng.gen_range(0..24), rng.gen_range(0..60), 0)
                .unwrap(),
            discharge_date,
            discharge_time: NaiveTime::from_hms_opt(rng.gen_range(8..20), 0, 0).unwrap(),
            admission_method: method.to_string(),
            admission_source: source.to_string(),
            hospital: HOSPITALS[hospital_idx].to_string(),
            specialty: SPECIALTIES[specialty_idx].to_string(),
            diagnosis: format!("dx{:02}", rng.gen_range(0..20)),
            region: REGIONS[HOSPITAL_REGION[hospital_idx]].to_string(),
            date_of_birth,
            frailty_score: frailty,
            scan_events,
        });
    }
    records
}

/// Writes records in the default episode-CSV schema.
pub fn write_patient_csv<W: Write>(records: &[PatientRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "patient_id",
        "admission_date",
        "admission_time",
        "discharge_date",
        "discharge_time",
        "admission_method",
        "admission_source",
        "hospital",
        "specialty",
        "diagnosis",
        "region",
        "date_of_birth",
        "frailty_score",
        "scan_events",
    ])?;
    for r in records {
        let scans: Vec<String> = r
            .scan_events
            .iter()
            .map(|s| format!("{}|{}|{}", s.exam_code, s.requested_date, s.attendance_date))
            .collect();
        w.write_record([
            r.patient_id.as_str(),
            &r.admission_date.to_string(),
            &r.admission_time.format("%H:%M").to_string(),
            &r.discharge_date.to_string(),
            &r.discharge_time.format("%H:%M").to_string(),
            &r.admission_method,
            &r.admission_source,
            &r.hospital,
            &r.specialty,
            &r.diagnosis,
            &r.region,
            &r.date_of_birth.to_string(),
            &r.frailty_score.to_string(),
            &scans.join(";"),
        ])?;
    }
    w.flush().map_err(csv::Error::from)
}

/// A random planning instance with second-stage costs at a 1.1–1.5 premium
/// over the first stage, demand held inside total capacity so the models
/// stay feasible, and mean-preserving scenario multipliers.
///
/// Dimension ranges: 2–4 specialties, 2–3 hospitals (one or two regions),
/// 2–4 scenarios. Cost ranges (first stage, all multiples of 10): beds
/// 20–100 per specialty and hospital, staff 60–140 per band; second-stage
/// costs are the first-stage ones at the premium, rounded to the nearest 10.
/// Staffing ratios are multiples of 0.1 in [0.1, 0.4]; ward capacity is
/// 3–6 beds per specialty and hospital, and base demand is drawn as 5–25%
/// of the regional capacity for that specialty.
pub fn random_instance(seed: u64) -> (CapacityInstance<f64>, DemandMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = rng.gen_range(2..=4);
    let nh = rng.gen_range(2..=3);
    let nb = 2;
    let nr = rng.gen_range(1..=2.min(nh));
    let nk = rng.gen_range(2..=4);

    let mut hospital_region: Vec<usize> = (0..nh).map(|h| h % nr).collect();
    hospital_region.shuffle(&mut rng);
    let labels = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();

    let premium = |rng: &mut ChaCha8Rng| 1.1 + rng.gen::<f64>() * 0.4;
    let bed_cost_stage1: Vec<Vec<f64>> = (0..ns)
        .map(|_| (0..nh).map(|_| (10 * rng.gen_range(2..=10)) as f64).collect())
        .collect();
    let bed_cost_stage2: Vec<Vec<f64>> = bed_cost_stage1
        .iter()
        .map(|row| row.iter().map(|&c| (c * premium(&mut rng) / 10.0).round() * 10.0).collect())
        .collect();
    let staff_cost_stage1: Vec<f64> = (0..nb).map(|_| (10 * rng.gen_range(6..=14)) as f64).collect();
    let staff_cost_stage2: Vec<f64> =
        staff_cost_stage1.iter().map(|&c| (c * premium(&mut rng) / 10.0).round() * 10.0).collect();
    let ratio: Vec<Vec<f64>> = (0..ns)
        .map(|_| (0..nb).map(|_| (rng.gen_range(1..=4) as f64) / 10.0).collect())
        .collect();
    let capacity: Vec<Vec<f64>> = (0..ns)
        .map(|_| (0..nh).map(|_| rng.gen_range(3..=6) as f64).collect())
        .collect();

    let inst = CapacityInstance {
        specialties: labels("s", ns),
        hospitals: labels("h", nh),
        regions: labels("r", nr),
        hospital_region,
        bands: labels("b", nb),
        ub_bed_stage1: None, // defaults to Σ_s K_{s,h}: non-binding
        ub_bed_stage2: (0..nh).map(|_| rng.gen_range(20..=60) as f64).collect(),
        ub_staff_stage1: (0..nb).map(|_| rng.gen_range(30..=80) as f64).collect(),
        ub_staff_stage2: (0..nb).map(|_| rng.gen_range(30..=80) as f64).collect(),
        bed_cost_stage1,
        bed_cost_stage2,
        staff_cost_stage1,
        staff_cost_stage2,
        ratio,
        capacity,
        staffing_rule: StaffingRule::PerBand,
    };

    // Base demand well inside regional capacity so scenario swings fit.
    let mut base = vec![vec![0.0; nr]; ns];
    for s in 0..ns {
        for r in 0..nr {
            let cap: f64 = (0..nh)
                .filter(|&h| inst.hospital_region[h] == r)
                .map(|h| inst.capacity[s][h])
                .sum();
            base[s][r] = cap * rng.gen_range(0.05..0.25);
        }
    }
    let region_demand = RegionDemand {
        specialties: inst.specialties.clone(),
        regions: inst.regions.clone(),
        values: base,
    };
    // Scenario probabilities are multiples of 1/4: integer costs then give the
    // objective a coarse lattice, which the solver's granularity pruning uses.
    let mut quarters = vec![1u32; nk];
    for _ in 0..4 - nk {
        quarters[rng.gen_range(0..nk)] += 1;
    }
    let probs: Vec<f64> = quarters.iter().map(|&q| q as f64 / 4.0).collect();
    // Mean-preserving multipliers: spread around 1 with the mean removed
    // under the scenario weights.
    let spread: Vec<f64> = (0..nk).map(|_| rng.gen_range(-0.06..0.06)).collect();
    let mean: f64 = spread.iter().zip(&probs).map(|(d, p)| d * p).sum();
    let deltas: Vec<f64> = spread.iter().map(|d| 1.0 + d - mean).collect();
    let matrix = percentage_scenarios(&region_demand, &deltas, &probs)
        .expect("constructed scenarios are valid");
    (inst, matrix)
}

/// Convenience wrapper asserting the generated matrix is valid.
pub fn validate_matrix(matrix: &DemandMatrix<f64>) -> Result<(), DemandError> {
    matrix.validate()
}
