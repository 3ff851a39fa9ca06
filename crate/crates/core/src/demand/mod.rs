//! Daily bed-demand matrices and scenario construction.
//!
//! Demand flows in as per-(specialty, hospital) averages — either plain
//! historical ADBD = ALOS × ADNA or leaf-specific LOS from a fitted tree —
//! and out as a specialty × region × scenario matrix with probabilities.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("negative input: {0}")]
    Negative(String),
    #[error("hospital {0} is not mapped to a region")]
    UnmappedHospital(usize),
    #[error("lengths disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("scenario probabilities sum to {0}, expected 1")]
    BadProbabilities(f64),
    #[error("observation window must be positive, got {0}")]
    BadWindow(f64),
    #[error("total admissions across years is zero")]
    NoAdmissions,
    #[error("matrix cell ({0}, {1}, {2}) out of range")]
    OutOfRange(usize, usize, usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed demand csv: {0}")]
    Malformed(String),
}

/// Per-scenario demand D_{s,r,k} with scenario probabilities p_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandMatrix<S> {
    pub specialties: Vec<String>,
    pub regions: Vec<String>,
    /// values[s][r][k], average daily beds.
    pub values: Vec<Vec<Vec<S>>>,
    pub probabilities: Vec<S>,
}

/// Single-scenario demand D_{s,r}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDemand<S> {
    pub specialties: Vec<String>,
    pub regions: Vec<String>,
    /// values[s][r], average daily beds.
    pub values: Vec<Vec<S>>,
}

impl<S: Scalar> DemandMatrix<S> {
    pub fn n_specialties(&self) -> usize {
        self.specialties.len()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn get(&self, s: usize, r: usize, k: usize) -> Result<S, DemandError> {
        self.values
            .get(s)
            .and_then(|vr| vr.get(r))
            .and_then(|vk| vk.get(k))
            .copied()
            .ok_or(DemandError::OutOfRange(s, r, k))
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let total: f64 = self.probabilities.iter().map(|p| p.as_f64()).sum();
        if (total - 1.0).abs() > 1e-9 || self.probabilities.iter().any(|p| *p < S::zero()) {
            return Err(DemandError::BadProbabilities(total));
        }
        if self.values.len() != self.specialties.len() {
            return Err(DemandError::LengthMismatch(self.values.len(), self.specialties.len()));
        }
        for per_region in &self.values {
            if per_region.len() != self.regions.len() {
                return Err(DemandError::LengthMismatch(per_region.len(), self.regions.len()));
            }
            for per_k in per_region {
                if per_k.len() != self.probabilities.len() {
                    return Err(DemandError::LengthMismatch(
                        per_k.len(),
                        self.probabilities.len(),
                    ));
                }
                if let Some(bad) = per_k.iter().find(|v| **v < S::zero()) {
                    return Err(DemandError::Negative(format!("{}", bad.as_f64())));
                }
            }
        }
        Ok(())
    }

    /// Writes the long-format CSV (specialty, region, scenario, value).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DemandError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["specialty", "region", "scenario", "value"])?;
        for (s, sp) in self.specialties.iter().enumerate() {
            for (r, rg) in self.regions.iter().enumerate() {
                for k in 0..self.n_scenarios() {
                    w.write_record([
                        sp.as_str(),
                        rg.as_str(),
                        &k.to_string(),
                        &format!("{}", self.values[s][r][k].as_f64()),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar carrying labels and probabilities.
    pub fn write_sidecar<W: Write>(&self, out: W) -> Result<(), DemandError> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            specialties: &'a [String],
            regions: &'a [String],
            probabilities: Vec<f64>,
        }
        serde_json::to_writer_pretty(
            out,
            &Sidecar {
                specialties: &self.specialties,
                regions: &self.regions,
                probabilities: self.probabilities.iter().map(|p| p.as_f64()).collect(),
            },
        )?;
        Ok(())
    }

    /// Reads back a matrix from the CSV + sidecar pair.
    pub fn read_csv<R1: Read, R2: Read>(csv_in: R1, sidecar_in: R2) -> Result<Self, DemandError> {
        #[derive(Deserialize)]
        struct Sidecar {
            specialties: Vec<String>,
            regions: Vec<String>,
            probabilities: Vec<f64>,
        }
        let side: Sidecar = serde_json::from_reader(sidecar_in)?;
        let k_count = side.probabilities.len();
        let mut values =
            vec![vec![vec![S::zero(); k_count]; side.regions.len()]; side.specialties.len()];
        let mut reader = csv::Reader::from_reader(csv_in);
        for record in reader.records() {
            let record = record?;
            let find = |labels: &[String], name: &str| {
                labels.iter().position(|l| l == name)
            };
            let s = find(&side.specialties, &record[0])
                .ok_or_else(|| DemandError::Malformed(format!("unknown specialty {}", &record[0])))?;
            let r = find(&side.regions, &record[1])
                .ok_or_else(|| DemandError::Malformed(format!("unknown region {}", &record[1])))?;
            let k: usize = record[2]
                .parse()
                .map_err(|_| DemandError::Malformed(format!("bad scenario index {}", &record[2])))?;
            if k >= k_count {
                return Err(DemandError::OutOfRange(s, r, k));
            }
            let v: f64 = record[3]
                .parse()
                .map_err(|_| DemandError::Malformed(format!("bad value {}", &record[3])))?;
            values[s][r][k] = S::from_f64(v);
        }
        let matrix = DemandMatrix {
            specialties: side.specialties,
            regions: side.regions,
            values,
            probabilities: side.probabilities.iter().map(|&p| S::from_f64(p)).collect(),
        };
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn write_files(&self, csv_path: &Path, sidecar_path: &Path) -> Result<(), DemandError> {
        self.write_csv(std::fs::File::create(csv_path)?)?;
        self.write_sidecar(std::fs::File::create(sidecar_path)?)?;
        Ok(())
    }

    pub fn read_files(csv_path: &Path, sidecar_path: &Path) -> Result<Self, DemandError> {
        Self::read_csv(std::fs::File::open(csv_path)?, std::fs::File::open(sidecar_path)?)
    }
}

/// Eq. ADBD: average length of stay times average daily admissions.
pub fn adbd<S: Scalar>(alos: S, adna: S) -> Result<S, DemandError> {
    if alos < S::zero() {
        return Err(DemandError::Negative(format!("alos {}", alos.as_f64())));
    }
    if adna < S::zero() {
        return Err(DemandError::Negative(format!("adna {}", adna.as_f64())));
    }
    Ok(alos * adna)
}

/// Sums per-hospital demand into regions: D_{s,r} = Σ_{h∈r} ADBD_{s,h}.
///
/// `adbd_by_hospital[s][h]`; `hospital_region[h]` is the region index.
pub fn aggregate_region<S: Scalar>(
    specialties: &[String],
    regions: &[String],
    adbd_by_hospital: &[Vec<S>],
    hospital_region: &[usize],
) -> Result<RegionDemand<S>, DemandError> {
    let mut values = vec![vec![S::zero(); regions.len()]; specialties.len()];
    for (s, per_h) in adbd_by_hospital.iter().enumerate() {
        if per_h.len() != hospital_region.len() {
            return Err(DemandError::LengthMismatch(per_h.len(), hospital_region.len()));
        }
        for (h, &v) in per_h.iter().enumerate() {
            let r = hospital_region[h];
            if r >= regions.len() {
                return Err(DemandError::UnmappedHospital(h));
            }
            if v < S::zero() {
                return Err(DemandError::Negative(format!("adbd[{s}][{h}]")));
            }
            values[s][r] = values[s][r] + v;
        }
    }
    Ok(RegionDemand { specialties: specialties.to_vec(), regions: regions.to_vec(), values })
}

/// One patient row joined with its leaf assignment, for tree-linked demand.
#[derive(Debug, Clone)]
pub struct LeafPatient<S> {
    pub leaf: usize,
    pub specialty: usize,
    pub hospital: usize,
    pub los_days: S,
}

/// Tree-linked demand: within each leaf, each (specialty, hospital) cell
/// contributes count × its leaf-specific mean LOS over the window, then
/// hospitals are summed into regions.
pub fn cart_demand<S: Scalar>(
    specialties: &[String],
    regions: &[String],
    patients: &[LeafPatient<S>],
    hospital_region: &[usize],
    window_days: S,
) -> Result<RegionDemand<S>, DemandError> {
    if window_days <= S::zero() {
        return Err(DemandError::BadWindow(window_days.as_f64()));
    }
    // (leaf, s, h) → (count, total LOS)
    let mut cells: BTreeMap<(usize, usize, usize), (usize, S)> = BTreeMap::new();
    for p in patients {
        if p.hospital >= hospital_region.len() {
            return Err(DemandError::UnmappedHospital(p.hospital));
        }
        let cell = cells.entry((p.leaf, p.specialty, p.hospital)).or_insert((0, S::zero()));
        cell.0 += 1;
        cell.1 = cell.1 + p.los_days;
    }
    let mut per_hospital = vec![vec![S::zero(); hospital_region.len()]; specialties.len()];
    for ((_leaf, s, h), (count, total_los)) in cells {
        // count × mean LOS / window collapses to total LOS / window, but the
        // mean is kept explicit because it is the published quantity.
        let specific_los = total_los / S::from_usize(count);
        per_hospital[s][h] =
            per_hospital[s][h] + S::from_usize(count) * specific_los / window_days;
    }
    aggregate_region(specialties, regions, &per_hospital, hospital_region)
}

/// Scales base demand by per-scenario multipliers.
pub fn percentage_scenarios<S: Scalar>(
    base: &RegionDemand<S>,
    deltas: &[S],
    probs: &[S],
) -> Result<DemandMatrix<S>, DemandError> {
    if deltas.len() != probs.len() {
        return Err(DemandError::LengthMismatch(deltas.len(), probs.len()));
    }
    let values = base
        .values
        .iter()
        .map(|row| row.iter().map(|&v| deltas.iter().map(|&d| v * d).collect()).collect())
        .collect();
    let matrix = DemandMatrix {
        specialties: base.specialties.clone(),
        regions: base.regions.clone(),
        values,
        probabilities: probs.to_vec(),
    };
    matrix.validate()?;
    Ok(matrix)
}

/// One scenario per historical year, weighted by that year's admissions.
pub fn yearly_scenarios<S: Scalar>(
    per_year: &[RegionDemand<S>],
    admissions: &[u64],
) -> Result<DemandMatrix<S>, DemandError> {
    if per_year.len() != admissions.len() {
        return Err(DemandError::LengthMismatch(per_year.len(), admissions.len()));
    }
    if per_year.is_empty() {
        return Err(DemandError::NoAdmissions);
    }
    let total: u64 = admissions.iter().sum();
    if total == 0 {
        return Err(DemandError::NoAdmissions);
    }
    let first = &per_year[0];
    let k_count = per_year.len();
    let mut values =
        vec![vec![vec![S::zero(); k_count]; first.regions.len()]; first.specialties.len()];
    for (k, year) in per_year.iter().enumerate() {
        if year.values.len() != first.values.len() {
            return Err(DemandError::LengthMismatch(year.values.len(), first.values.len()));
        }
        for (s, row) in year.values.iter().enumerate() {
            for (r, &v) in row.iter().enumerate() {
                values[s][r][k] = v;
            }
        }
    }
    let probabilities = admissions
        .iter()
        .map(|&a| S::from_f64(a as f64 / total as f64))
        .collect();
    let matrix = DemandMatrix {
        specialties: first.specialties.clone(),
        regions: first.regions.clone(),
        values,
        probabilities,
    };
    matrix.validate()?;
    Ok(matrix)
}

/// Probability-weighted mean over scenarios — the ξ̄ fed to the EV problem.
pub fn mean_demand<S: Scalar>(matrix: &DemandMatrix<S>) -> RegionDemand<S> {
    let values = matrix
        .values
        .iter()
        .map(|per_region| {
            per_region
                .iter()
                .map(|per_k| {
                    per_k
                        .iter()
                        .zip(&matrix.probabilities)
                        .fold(S::zero(), |a, (&v, &p)| a + v * p)
                })
                .collect()
        })
        .collect();
    RegionDemand {
        specialties: matrix.specialties.clone(),
        regions: matrix.regions.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn adbd_is_the_product() {
        assert_eq!(adbd(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(adbd(2.0, 3.0).unwrap(), 6.0);
        assert!(adbd(-1.0, 2.0).is_err());
    }

    #[test]
    fn adbd_matches_the_worked_fixture_cell() {
        // COTE over a 1.5-day window: ALOS 25/9, ADNA 9/1.5.
        let v: f64 = adbd(25.0 / 9.0, 9.0 / 1.5).unwrap();
        assert_relative_eq!(v, 16.6666, epsilon = 1e-3);
    }

    #[test]
    fn regions_sum_their_hospitals() {
        let d = aggregate_region(
            &labels("s", 1),
            &labels("r", 1),
            &[vec![11.33, 5.33]],
            &[0, 0],
        )
        .unwrap();
        assert_relative_eq!(d.values[0][0], 16.66);
    }

    #[test]
    fn disjoint_regions_stay_disjoint() {
        let d = aggregate_region(
            &labels("s", 1),
            &labels("r", 2),
            &[vec![3.0, 4.0]],
            &[0, 1],
        )
        .unwrap();
        assert_eq!(d.values[0], vec![3.0, 4.0]);
    }

    #[test]
    fn cart_demand_mixes_leaf_specific_los() {
        // Two leaves over one cell: 10 patients at mean 2 plus 5 at mean 8,
        // window 10 → (10·2 + 5·8)/10 = 6.
        let mut patients = Vec::new();
        for _ in 0..10 {
            patients.push(LeafPatient { leaf: 0, specialty: 0, hospital: 0, los_days: 2.0 });
        }
        for _ in 0..5 {
            patients.push(LeafPatient { leaf: 1, specialty: 0, hospital: 0, los_days: 8.0 });
        }
        let d = cart_demand(&labels("s", 1), &labels("r", 1), &patients, &[0], 10.0).unwrap();
        assert_relative_eq!(d.values[0][0], 6.0);
    }

    #[test]
    fn cart_demand_rejects_bad_window() {
        let out = cart_demand::<f64>(&labels("s", 1), &labels("r", 1), &[], &[0], 0.0);
        assert!(matches!(out, Err(DemandError::BadWindow(_))));
    }

    #[test]
    fn single_leaf_collapses_to_plain_averages() {
        let patients = vec![
            LeafPatient { leaf: 0, specialty: 0, hospital: 0, los_days: 5.0 },
            LeafPatient { leaf: 0, specialty: 0, hospital: 1, los_days: 3.0 },
            LeafPatient { leaf: 0, specialty: 0, hospital: 1, los_days: 4.0 },
        ];
        let window = 1.5;
        let linked =
            cart_demand(&labels("s", 1), &labels("r", 1), &patients, &[0, 0], window).unwrap();
        // Plain route: per-hospital ADBD then region sum.
        let h0 = adbd(5.0, 1.0 / window).unwrap();
        let h1 = adbd(3.5, 2.0 / window).unwrap();
        let plain =
            aggregate_region(&labels("s", 1), &labels("r", 1), &[vec![h0, h1]], &[0, 0]).unwrap();
        assert_relative_eq!(linked.values[0][0], plain.values[0][0], epsilon = 1e-12);
    }

    #[test]
    fn percentage_scenarios_reproduce_the_worked_matrix() {
        let base = RegionDemand {
            specialties: labels("s", 2),
            regions: labels("r", 1),
            values: vec![vec![16.66], vec![19.01]],
        };
        let m = percentage_scenarios(&base, &[1.0, 1.2, 0.8], &[0.4, 0.3, 0.3]).unwrap();
        assert_relative_eq!(m.values[0][0][1], 19.992);
        assert_relative_eq!(m.values[1][0][2], 15.208);
        // Mean-preserving deltas return the base.
        let back = mean_demand(&m);
        assert_relative_eq!(back.values[0][0], 16.66, epsilon = 1e-9);
        assert_relative_eq!(back.values[1][0], 19.01, epsilon = 1e-9);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let base = RegionDemand {
            specialties: labels("s", 1),
            regions: labels("r", 1),
            values: vec![vec![1.0]],
        };
        assert!(matches!(
            percentage_scenarios(&base, &[1.0, 1.0], &[0.6, 0.6]),
            Err(DemandError::BadProbabilities(_))
        ));
    }

    #[test]
    fn yearly_probabilities_are_admission_shares() {
        let year = |v: f64| RegionDemand {
            specialties: labels("s", 1),
            regions: labels("r", 1),
            values: vec![vec![v]],
        };
        let m = yearly_scenarios(&[year(1.0), year(2.0), year(3.0)], &[322, 340, 338]).unwrap();
        assert_relative_eq!(m.probabilities[0], 0.322);
        assert_relative_eq!(m.probabilities[1], 0.340);
        assert_relative_eq!(m.probabilities[2], 0.338);
        assert!(matches!(
            yearly_scenarios(&[year(1.0)], &[0]),
            Err(DemandError::NoAdmissions)
        ));
    }

    #[test]
    fn mean_demand_is_identity_for_one_scenario() {
        let base = RegionDemand {
            specialties: labels("s", 1),
            regions: labels("r", 1),
            values: vec![vec![4.5]],
        };
        let m = percentage_scenarios(&base, &[1.0], &[1.0]).unwrap();
        assert_eq!(mean_demand(&m).values, base.values);
    }

    #[test]
    fn csv_round_trip() {
        let base = RegionDemand {
            specialties: vec!["cote".into(), "t_and_o".into()],
            regions: vec!["north".into()],
            values: vec![vec![16.66], vec![19.01]],
        };
        let m = percentage_scenarios(&base, &[1.0, 1.2, 0.8], &[0.4, 0.3, 0.3]).unwrap();
        let mut csv_buf = Vec::new();
        let mut side_buf = Vec::new();
        m.write_csv(&mut csv_buf).unwrap();
        m.write_sidecar(&mut side_buf).unwrap();
        let back =
            DemandMatrix::<f64>::read_csv(csv_buf.as_slice(), side_buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
