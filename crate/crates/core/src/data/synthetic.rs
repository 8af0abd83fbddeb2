//! Gaussian-cluster corpora with controlled out-of-distribution corruption.
//!
//! In-distribution classes are isotropic Gaussians whose means sit evenly on
//! the unit circle. Near OOD clusters are centred on the midpoints between
//! adjacent class means; far OOD clusters sit at ten times the circle radius
//! in the same directions. Every OOD instance carries a uniformly random hard
//! label and is unverified.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Instance, LabeledCorpus, Payload, Provenance, SoftLabel};
use crate::error::{Error, Result};

const FAR_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub points_per_class: usize,
    /// Fraction of the whole corpus with OOD provenance.
    pub ood_fraction: f64,
    pub near_ood: bool,
    pub cluster_spread: f64,
    /// Fraction of each class's in-distribution points marked verified.
    pub verified_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 4,
            points_per_class: 50,
            ood_fraction: 0.3,
            near_ood: true,
            cluster_spread: 0.35,
            verified_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::param("num_classes", "must be positive"));
        }
        if self.points_per_class == 0 {
            return Err(Error::param("points_per_class", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.ood_fraction) {
            return Err(Error::param("ood_fraction", format!("{} not in [0, 1]", self.ood_fraction)));
        }
        if self.ood_fraction >= 1.0 {
            return Err(Error::param(
                "ood_fraction",
                "1 is unreachable while in-distribution points exist",
            ));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::param("cluster_spread", "must be a positive real"));
        }
        if !(0.0..=1.0).contains(&self.verified_fraction) {
            return Err(Error::param(
                "verified_fraction",
                format!("{} not in [0, 1]", self.verified_fraction),
            ));
        }
        Ok(())
    }

    pub fn num_in_distribution(&self) -> usize {
        self.num_classes * self.points_per_class
    }

    /// Smallest OOD count `n` with `n == ceil(ood_fraction * (n_id + n))`.
    pub fn num_ood(&self) -> usize {
        let n_id = self.num_in_distribution() as f64;
        let f = self.ood_fraction;
        if f <= 0.0 {
            return 0;
        }
        let mut n = (f * n_id / (1.0 - f)).ceil().max(0.0) as usize;
        while n > 0 && (n - 1) as f64 >= f * (n_id + (n - 1) as f64) {
            n -= 1;
        }
        while (n as f64) < f * (n_id + n as f64) {
            n += 1;
        }
        n
    }

    pub fn class_mean(&self, class: usize) -> [f64; 2] {
        let angle = 2.0 * PI * class as f64 / self.num_classes as f64;
        [angle.cos(), angle.sin()]
    }

    /// Centre of the OOD cluster that sits between `class` and `class + 1`.
    pub fn ood_center(&self, class: usize) -> [f64; 2] {
        let next = (class + 1) % self.num_classes;
        if self.near_ood {
            let (a, b) = (self.class_mean(class), self.class_mean(next));
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        } else {
            let angle = PI * (2 * class + 1) as f64 / self.num_classes as f64;
            [FAR_RADIUS * angle.cos(), FAR_RADIUS * angle.sin()]
        }
    }

    fn class_names(&self) -> Vec<String> {
        (0..self.num_classes).map(|c| format!("class{c}")).collect()
    }
}

fn point(center: [f64; 2], spread: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    Array2::from_shape_vec((1, 2), vec![center[0] + spread * dx, center[1] + spread * dy])
        .expect("1x2 shape")
}

/// Generates a training corpus. Fully determined by `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<LabeledCorpus> {
    spec.validate()?;
    let k = spec.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let verified_per_class = ((spec.verified_fraction * spec.points_per_class as f64).round()
        as usize)
        .min(spec.points_per_class);

    let mut drafts: Vec<(Array2<f64>, SoftLabel, bool, Provenance)> = Vec::new();
    for class in 0..k {
        let mean = spec.class_mean(class);
        for j in 0..spec.points_per_class {
            drafts.push((
                point(mean, spec.cluster_spread, &mut rng),
                SoftLabel::one_hot(class, k)?,
                j < verified_per_class,
                Provenance::InDistribution(class),
            ));
        }
    }
    for _ in 0..spec.num_ood() {
        let cluster = rng.gen_range(0..k);
        let x = point(spec.ood_center(cluster), spec.cluster_spread, &mut rng);
        let label = rng.gen_range(0..k);
        drafts.push((
            x,
            SoftLabel::one_hot(label, k)?,
            false,
            Provenance::OutOfDistribution,
        ));
    }
    drafts.shuffle(&mut rng);

    let instances = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (x, label, verified, provenance))| Instance {
            id: format!("syn-{i:05}"),
            payload: Payload::Blocks(vec![x]),
            label,
            verified,
            provenance: Some(provenance),
        })
        .collect();
    LabeledCorpus::new(instances, spec.class_names())
}

/// Generates a verified, in-distribution test corpus drawn from the same
/// class clusters as `spec` but from an independent random stream.
pub fn generate_test_corpus(spec: &SyntheticSpec, points_per_class: usize) -> Result<LabeledCorpus> {
    let test_spec = SyntheticSpec {
        points_per_class,
        ood_fraction: 0.0,
        verified_fraction: 1.0,
        seed: spec.seed ^ 0x7e57_5eed_0000_0001,
        ..spec.clone()
    };
    let corpus = generate_synthetic_corpus(&test_spec)?;
    let instances = corpus
        .instances()
        .iter()
        .cloned()
        .map(|mut inst| {
            inst.id = inst.id.replacen("syn-", "test-", 1);
            inst
        })
        .collect();
    corpus.with_instances(instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ood_count_is_ceil_of_fraction_of_total() {
        let spec = SyntheticSpec {
            num_classes: 4,
            points_per_class: 50,
            ood_fraction: 0.3,
            ..Default::default()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let ood = corpus.instances().iter().filter(|i| i.is_ood()).count();
        assert_eq!(ood, (0.3 * corpus.len() as f64).ceil() as usize);
        assert_eq!(corpus.len() - ood, 200);
    }

    #[test]
    fn ood_count_identity_over_grid() {
        for ppc in 1..30 {
            for f in [0.0, 0.01, 0.1, 0.25, 0.3, 0.45, 0.5, 0.77, 0.9] {
                let spec = SyntheticSpec {
                    num_classes: 3,
                    points_per_class: ppc,
                    ood_fraction: f,
                    ..Default::default()
                };
                let n = spec.num_ood();
                let total = spec.num_in_distribution() + n;
                assert_eq!(n, (f * total as f64).ceil() as usize, "ppc={ppc} f={f}");
            }
        }
    }

    #[test]
    fn zero_fraction_labels_match_provenance() {
        let spec = SyntheticSpec {
            ood_fraction: 0.0,
            ..Default::default()
        };
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        for inst in corpus.instances() {
            assert_eq!(Some(inst.label.argmax()), inst.source_class_index());
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SyntheticSpec {
            seed: 42,
            ..Default::default()
        };
        let a = serde_json::to_vec(&generate_synthetic_corpus(&spec).unwrap()).unwrap();
        let b = serde_json::to_vec(&generate_synthetic_corpus(&spec).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = SyntheticSpec { seed: 43, ..spec };
        let c = serde_json::to_vec(&generate_synthetic_corpus(&other).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn verified_only_in_distribution() {
        let corpus = generate_synthetic_corpus(&SyntheticSpec::default()).unwrap();
        let verified: Vec<_> = corpus.instances().iter().filter(|i| i.verified).collect();
        assert_eq!(verified.len(), 4 * 5);
        assert!(verified.iter().all(|i| !i.is_ood()));
    }

    #[test]
    fn near_and_far_centres() {
        let near = SyntheticSpec::default();
        let c = near.ood_center(0);
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        let far = SyntheticSpec {
            near_ood: false,
            ..near
        };
        let c = far.ood_center(0);
        assert!(((c[0] * c[0] + c[1] * c[1]).sqrt() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn test_corpus_is_clean() {
        let spec = SyntheticSpec::default();
        let test = generate_test_corpus(&spec, 10).unwrap();
        assert_eq!(test.len(), 40);
        assert!(test.instances().iter().all(|i| i.verified && !i.is_ood()));
        assert!(test.ids().iter().all(|id| id.starts_with("test-")));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec { ood_fraction: 1.5, ..Default::default() },
            SyntheticSpec { ood_fraction: 1.0, ..Default::default() },
            SyntheticSpec { points_per_class: 0, ..Default::default() },
            SyntheticSpec { cluster_spread: 0.0, ..Default::default() },
        ] {
            assert!(generate_synthetic_corpus(&spec).is_err());
        }
    }
}
