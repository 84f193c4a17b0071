use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Dataset;

/// Patients 1-15, 16-35 and 36 onwards.
pub const DEFAULT_FOLD_BOUNDARIES: (u32, u32) = (15, 35);

/// Fold (1, 2 or 3) of a patient given inclusive upper boundaries.
pub fn fold_of(patient_id: u32, boundaries: (u32, u32)) -> u8 {
    if patient_id <= boundaries.0 {
        1
    } else if patient_id <= boundaries.1 {
        2
    } else {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_of_patient: BTreeMap<u32, u8>,
    pub boundaries: (u32, u32),
}

impl FoldSplit {
    pub fn fold(&self, patient_id: u32) -> Option<u8> {
        self.fold_of_patient.get(&patient_id).copied()
    }

    /// Folds that contain at least one patient, ascending.
    pub fn nonempty_folds(&self) -> Vec<u8> {
        let mut f: Vec<u8> = self.fold_of_patient.values().copied().collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn patients_in(&self, fold: u8) -> Vec<u32> {
        self.fold_of_patient
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(p, _)| *p)
            .collect()
    }
}

/// Assigns every patient of the dataset to a fold.
///
/// Panics if the boundaries are not strictly increasing.
pub fn assign_folds(ds: &Dataset, boundaries: (u32, u32)) -> FoldSplit {
    assert!(
        boundaries.0 < boundaries.1,
        "fold boundaries must be strictly increasing"
    );
    let fold_of_patient = ds
        .patients()
        .into_iter()
        .map(|p| (p, fold_of(p, boundaries)))
        .collect();
    FoldSplit {
        fold_of_patient,
        boundaries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_boundaries_match_patient_ranges() {
        let b = DEFAULT_FOLD_BOUNDARIES;
        assert_eq!(fold_of(7, b), 1);
        assert_eq!(fold_of(15, b), 1);
        assert_eq!(fold_of(16, b), 2);
        assert_eq!(fold_of(35, b), 2);
        assert_eq!(fold_of(36, b), 3);
        assert_eq!(fold_of(55, b), 3);
    }
}
