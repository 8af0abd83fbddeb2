//! Accuracy, micro-averaged average precision and trial aggregation.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::argmax;
use crate::error::{Error, Result};

fn check_inputs<S: AsRef<[f64]>>(scores: &[S], truths: &[usize]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::param("predictions", "empty input"));
    }
    if scores.len() != truths.len() {
        return Err(Error::shape(
            format!("{} truths", scores.len()),
            format!("{} truths", truths.len()),
        ));
    }
    for (i, (s, t)) in scores.iter().zip(truths).enumerate() {
        if *t >= s.as_ref().len() {
            return Err(Error::param(
                "truths",
                format!("instance {i}: class {t} out of range for {} scores", s.as_ref().len()),
            ));
        }
    }
    Ok(())
}

/// Fraction of instances whose top-scoring class (lowest index on ties)
/// is the truth.
pub fn accuracy<S: AsRef<[f64]>>(predictions: &[S], truths: &[usize]) -> Result<f64> {
    check_inputs(predictions, truths)?;
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| argmax(p.as_ref()) == **t)
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

/// AP over the single ranked list of all `(instance, class)` pairs.
///
/// Pairs are ordered by descending score, then instance index, then class.
/// A pair is relevant when its class is the instance's truth.
pub fn micro_average_precision<S: AsRef<[f64]>>(predictions: &[S], truths: &[usize]) -> Result<f64> {
    check_inputs(predictions, truths)?;
    let mut pairs: Vec<(f64, usize, usize)> = predictions
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.as_ref().iter().enumerate().map(move |(c, s)| (*s, i, c)))
        .collect();
    if pairs.iter().any(|p| p.0.is_nan()) {
        return Err(Error::param("predictions", "NaN score"));
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, (_, i, c)) in pairs.iter().enumerate() {
        if truths[*i] == *c {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / hits as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub accuracy: f64,
    pub average_precision: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub mean_accuracy: f64,
    pub accuracy_halfwidth: f64,
    pub mean_ap: f64,
    pub ap_halfwidth: f64,
    pub num_trials: usize,
}

/// Mean and standard error of the mean (`n - 1` divisor); zero for one value.
pub fn mean_and_sem(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::param("values", "empty list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Mean plus a 68% interval (one standard error) per metric.
pub fn aggregate_trials(results: &[TrialResult]) -> Result<AggregateResult> {
    if results.is_empty() {
        return Err(Error::param("trial results", "empty list"));
    }
    let acc: Vec<f64> = results.iter().map(|r| r.accuracy).collect();
    let ap: Vec<f64> = results.iter().map(|r| r.average_precision).collect();
    let (mean_accuracy, accuracy_halfwidth) = mean_and_sem(&acc)?;
    let (mean_ap, ap_halfwidth) = mean_and_sem(&ap)?;
    Ok(AggregateResult {
        mean_accuracy,
        accuracy_halfwidth,
        mean_ap,
        ap_halfwidth,
        num_trials: results.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub aggregate: AggregateResult,
    pub trials: Vec<TrialResult>,
}

/// Comparison CSV with fixed precision, so equal inputs give equal bytes.
pub fn report_csv(rows: &[SystemSummary]) -> String {
    let mut out = String::from("system,mean_accuracy,accuracy_halfwidth,mean_ap,ap_halfwidth,trials\n");
    for r in rows {
        let a = &r.aggregate;
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            r.system, a.mean_accuracy, a.accuracy_halfwidth, a.mean_ap, a.ap_halfwidth, a.num_trials
        );
    }
    out
}

/// Human-readable table, metrics in percent with their 68% halfwidths.
pub fn report_table(rows: &[SystemSummary]) -> String {
    let width = rows.iter().map(|r| r.system.len()).max().unwrap_or(0).max("System".len());
    let mut out = format!("{:<width$}  {:>14}  {:>14}\n", "System", "AP (%)", "Accuracy (%)");
    for r in rows {
        let a = &r.aggregate;
        let ap = format!("{:.1} ± {:.1}", 100.0 * a.mean_ap, 100.0 * a.ap_halfwidth);
        let acc = format!("{:.1} ± {:.1}", 100.0 * a.mean_accuracy, 100.0 * a.accuracy_halfwidth);
        let _ = writeln!(out, "{:<width$}  {:>14}  {:>14}", r.system, ap, acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let p = vec![vec![0.9, 0.1], vec![0.2, 0.8], vec![0.6, 0.4], vec![0.3, 0.7]];
        assert_eq!(accuracy(&p, &[0, 1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[0, 1, 0, 0]).unwrap(), 0.75);
    }

    #[test]
    fn uniform_predictions_act_as_class_zero() {
        let p = vec![vec![0.25; 4]; 6];
        let truths = [0, 1, 2, 3, 0, 2];
        assert_eq!(accuracy(&p, &truths).unwrap(), 2.0 / 6.0);
    }

    #[test]
    fn worked_ap() {
        let ap = micro_average_precision(&[vec![0.9, 0.1], vec![0.6, 0.4]], &[0, 1]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_ranking_gives_one() {
        let p = vec![vec![0.9, 0.05, 0.05], vec![0.3, 0.6, 0.1], vec![0.2, 0.2, 0.55]];
        assert_eq!(micro_average_precision(&p, &[0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn empty_inputs_rejected() {
        let none: Vec<Vec<f64>> = vec![];
        assert!(accuracy(&none, &[]).is_err());
        assert!(micro_average_precision(&none, &[]).is_err());
        assert!(aggregate_trials(&[]).is_err());
        assert!(accuracy(&[vec![1.0]], &[0, 0]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let trial = |v: f64| TrialResult {
            accuracy: v,
            average_precision: v,
            seed: 0,
        };
        let agg = aggregate_trials(&[trial(1.0), trial(2.0), trial(3.0)]).unwrap();
        assert_eq!(agg.mean_accuracy, 2.0);
        assert!((agg.accuracy_halfwidth - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let same = aggregate_trials(&[trial(0.4), trial(0.4)]).unwrap();
        assert_eq!(same.ap_halfwidth, 0.0);
        let one = aggregate_trials(&[trial(0.7)]).unwrap();
        assert_eq!((one.mean_ap, one.ap_halfwidth, one.num_trials), (0.7, 0.0, 1));
    }

    #[test]
    fn report_shapes() {
        let agg = AggregateResult {
            mean_accuracy: 0.8125,
            accuracy_halfwidth: 0.01,
            mean_ap: 0.9,
            ap_halfwidth: 0.0,
            num_trials: 5,
        };
        let rows = vec![SystemSummary {
            system: "ood_r".into(),
            aggregate: agg,
            trials: vec![],
        }];
        assert_eq!(
            report_csv(&rows),
            "system,mean_accuracy,accuracy_halfwidth,mean_ap,ap_halfwidth,trials\n\
             ood_r,0.812500,0.010000,0.900000,0.000000,5\n"
        );
        let table = report_table(&rows);
        assert!(table.contains("90.0 ± 0.0") && table.contains("81.2 ± 1.0"), "{table}");
    }
}
