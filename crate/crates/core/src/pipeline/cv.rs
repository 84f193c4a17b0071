use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{derive_seed, train_protocol, Learner, ModelSet, NetworkLearner, PipelineError, RunConfig, RunManifest, WindowScorer};
use crate::ingest::{assign_folds, Dataset};
use crate::metrics::{
    binary_suite_metrics, BinaryCounts, ClassMetrics, ConfusionMatrix, EvaluationReport, FoldResult, ProtocolSummary,
};
use crate::skeleton::{GestureId, GestureKind, GestureSequence};

/// Gesture-level outcome counts of one evaluation scope.
#[derive(Debug, Clone)]
struct Tally {
    static_cm: ConfusionMatrix,
    dynamic_cm: ConfusionMatrix,
    binary: Option<Vec<BinaryCounts>>,
}

fn partition_names(kind: GestureKind) -> Vec<String> {
    GestureId::of_kind(kind).iter().map(|g| g.to_string()).collect()
}

fn local_index(g: GestureId) -> usize {
    GestureId::of_kind(g.kind())
        .iter()
        .position(|x| *x == g)
        .expect("gesture belongs to its own partition")
}

impl Tally {
    fn new(binary: bool) -> Self {
        Self {
            static_cm: ConfusionMatrix::empty(partition_names(GestureKind::Static)),
            dynamic_cm: ConfusionMatrix::empty(partition_names(GestureKind::Dynamic)),
            binary: binary.then(|| vec![BinaryCounts::default(); GestureId::COUNT]),
        }
    }

    fn merge(&mut self, o: &Tally) -> Result<(), PipelineError> {
        self.static_cm.merge(&o.static_cm)?;
        self.dynamic_cm.merge(&o.dynamic_cm)?;
        if let (Some(a), Some(b)) = (&mut self.binary, &o.binary) {
            a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
        }
        Ok(())
    }

    fn summary(&self) -> ProtocolSummary {
        let mean_binary = self.binary.as_ref().map(|b| binary_suite_metrics(b).mean_accuracy);
        ProtocolSummary::from_confusions(&self.static_cm, &self.dynamic_cm, mean_binary)
    }

    fn per_class(&self) -> Vec<ClassMetrics> {
        GestureId::all()
            .map(|g| {
                let cm = match g.kind() {
                    GestureKind::Static => &self.static_cm,
                    GestureKind::Dynamic => &self.dynamic_cm,
                };
                let i = local_index(g);
                ClassMetrics {
                    class: g,
                    kind: g.kind(),
                    support: cm.support(i),
                    precision: cm.precision(i),
                    recall: cm.recall(i),
                    binary: self.binary.as_ref().map(|b| b[g.index()]),
                }
            })
            .collect()
    }
}

fn tally<M: WindowScorer>(set: &ModelSet<M>, test: &[&GestureSequence]) -> Result<Tally, PipelineError> {
    let preds = test.par_iter().map(|s| set.predict(s)).collect::<Result<Vec<_>, _>>()?;
    let mut t = Tally::new(preds.first().is_some_and(|p| p.binary.is_some()));
    for (seq, p) in test.iter().zip(&preds) {
        let cm = match seq.label.kind() {
            GestureKind::Static => &mut t.static_cm,
            GestureKind::Dynamic => &mut t.dynamic_cm,
        };
        cm.record(local_index(seq.label), local_index(p.class))?;
        if let (Some(counts), Some(probs)) = (&mut t.binary, &p.binary) {
            for g in GestureId::all() {
                counts[g.index()].record(seq.label == g, probs[g.index()] > 0.5);
            }
        }
    }
    Ok(t)
}

fn report(protocol: String, run: serde_json::Value, pooled: &Tally, folds: Vec<FoldResult>) -> EvaluationReport {
    EvaluationReport {
        protocol,
        run,
        summary: pooled.summary(),
        folds,
        per_class: pooled.per_class(),
        confusion_static: pooled.static_cm.clone(),
        confusion_dynamic: pooled.dynamic_cm.clone(),
    }
}

/// Patient-based cross-validation with network classifiers built from `cfg`.
pub fn cross_validate(ds: &Dataset, cfg: &RunConfig) -> Result<EvaluationReport, PipelineError> {
    cross_validate_with(ds, cfg, &NetworkLearner::from_config(cfg))
}

/// Patient-based cross-validation: every populated fold is the test set
/// once, with models trained on the remaining folds. Confusion matrices
/// and binary counts are pooled over the rounds.
pub fn cross_validate_with<L: Learner>(
    ds: &Dataset,
    cfg: &RunConfig,
    learner: &L,
) -> Result<EvaluationReport, PipelineError> {
    cfg.validate()?;
    let split = assign_folds(ds, cfg.fold_boundaries);
    let folds = split.nonempty_folds();
    if folds.len() < 2 {
        return Err(PipelineError::FoldCoverage(folds.len()));
    }
    let rounds = folds
        .par_iter()
        .map(|&fold| {
            let in_test = |s: &&GestureSequence| split.fold(s.patient_id) == Some(fold);
            let (test, train): (Vec<&GestureSequence>, Vec<&GestureSequence>) =
                ds.sequences.iter().partition(in_test);
            let train_patients: BTreeSet<u32> = train.iter().map(|s| s.patient_id).collect();
            let test_patients: BTreeSet<u32> = test.iter().map(|s| s.patient_id).collect();
            if let Some(p) = train_patients.intersection(&test_patients).next() {
                return Err(PipelineError::PatientLeak(*p));
            }
            log::info!(
                "fold {fold}: training on {} gestures from {} patients",
                train.len(),
                train_patients.len()
            );
            let set = train_protocol(&train, &ds.joint_map, cfg, learner, derive_seed(cfg.seed, &[fold as u64]))?;
            let t = tally(&set, &test)?;
            let result = FoldResult {
                fold,
                train_patients: train_patients.into_iter().collect(),
                test_patients: test_patients.into_iter().collect(),
                n_train_sequences: train.len(),
                n_test_sequences: test.len(),
                summary: t.summary(),
            };
            Ok((result, t))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let mut pooled = Tally::new(rounds[0].1.binary.is_some());
    let mut fold_results = Vec::with_capacity(rounds.len());
    for (result, t) in rounds {
        pooled.merge(&t)?;
        fold_results.push(result);
    }
    let run = serde_json::to_value(RunManifest::new(cfg, ds)).expect("manifest is serializable");
    Ok(report(cfg.protocol.to_string(), run, &pooled, fold_results))
}

/// Evaluates an already trained model set on every sequence of `ds`.
pub fn evaluate_model_set<M: WindowScorer>(
    set: &ModelSet<M>,
    ds: &Dataset,
    run: serde_json::Value,
) -> Result<EvaluationReport, PipelineError> {
    let test: Vec<&GestureSequence> = ds.sequences.iter().collect();
    let t = tally(set, &test)?;
    Ok(report(set.protocol.to_string(), run, &t, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SynthConfig};
    use crate::pipeline::{OracleLearner, Protocol, WindowPlan};
    use crate::preprocess::NormMethod;

    fn cfg(protocol: Protocol) -> RunConfig {
        let mut c = RunConfig::new(protocol, NormMethod::M3, WindowPlan::Single { window: 32 }, 5);
        c.fold_boundaries = (2, 4);
        c
    }

    #[test]
    fn oracle_is_perfect_through_cv() {
        let ds = generate_synthetic(&SynthConfig::new(6, 1)).unwrap();
        for protocol in [Protocol::MultiClass, Protocol::MultiClassBinary] {
            let r = cross_validate_with(&ds, &cfg(protocol), &OracleLearner).unwrap();
            assert_eq!(r.folds.len(), 3);
            assert_eq!(r.summary.average_accuracy.0, Some(1.0));
            assert!(r.per_class.iter().all(|c| c.recall.0 == Some(1.0)));
            assert_eq!(r.confusion_static.total() + r.confusion_dynamic.total(), 6 * 29);
            if protocol == Protocol::MultiClassBinary {
                assert_eq!(r.summary.mean_binary_accuracy, Some(1.0));
            }
        }
    }

    #[test]
    fn single_fold_is_rejected() {
        let ds = generate_synthetic(&SynthConfig::new(2, 1)).unwrap();
        let err = cross_validate_with(&ds, &cfg(Protocol::MultiClass), &OracleLearner).unwrap_err();
        assert!(matches!(err, PipelineError::FoldCoverage(1)));
    }

    #[test]
    fn folds_partition_patients() {
        let ds = generate_synthetic(&SynthConfig::new(6, 2)).unwrap();
        let r = cross_validate_with(&ds, &cfg(Protocol::MultiClass), &OracleLearner).unwrap();
        let mut seen: Vec<u32> = r.folds.iter().flat_map(|f| f.test_patients.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, vec![1, 2, 3, 4, 5, 6]);
        for f in &r.folds {
            assert!(f.train_patients.iter().all(|p| !f.test_patients.contains(p)));
        }
    }
}
