//! User-agnostic Stationary/Moving context detection on phone feature vectors.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{production_layout, FeatureSlot, FeatureVector, DEVICE_DIM};
use crate::forest::{train_forest, ForestModel, ForestParams};
use crate::sensor::Device;
use crate::stats::{wilson, Interval, Z95};

/// Class index order matters: index 0 wins vote ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextLabel {
    Stationary,
    Moving,
}

impl ContextLabel {
    pub const ALL: [ContextLabel; 2] = [ContextLabel::Stationary, ContextLabel::Moving];

    pub fn index(self) -> usize {
        match self {
            ContextLabel::Stationary => 0,
            ContextLabel::Moving => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            ContextLabel::Moving
        } else {
            ContextLabel::Stationary
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContextLabel::Stationary => "stationary",
            ContextLabel::Moving => "moving",
        }
    }
}

impl fmt::Display for ContextLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stationary" => Ok(ContextLabel::Stationary),
            "moving" => Ok(ContextLabel::Moving),
            other => Err(Error::validation("context", format!("unknown context `{other}`"))),
        }
    }
}

/// A forest over the 14-slot phone layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDetector {
    pub forest: ForestModel,
    pub layout: Vec<FeatureSlot>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub context: ContextLabel,
    pub vote_fraction: f64,
}

impl ContextDetector {
    pub fn train(data: &[(FeatureVector, ContextLabel)], params: &ForestParams) -> Result<Self> {
        let layout = production_layout(Device::Phone);
        if data.is_empty() {
            return Err(Error::validation("training data", "no labelled windows"));
        }
        for (v, _) in data {
            if v.layout != layout {
                return Err(Error::validation("layout", "context detection uses the 14-slot phone layout"));
            }
        }
        let x: Vec<Vec<f64>> = data.iter().map(|(v, _)| v.values.clone()).collect();
        let y: Vec<usize> = data.iter().map(|(_, c)| c.index()).collect();
        let forest = train_forest(&x, &y, 2, params)?;
        Ok(ContextDetector { forest, layout })
    }

    pub fn from_forest(forest: ForestModel) -> Result<Self> {
        if forest.n_features != DEVICE_DIM || forest.n_classes != 2 {
            return Err(Error::validation("forest", "context forest must be 14 features × 2 classes"));
        }
        Ok(ContextDetector {
            forest,
            layout: production_layout(Device::Phone),
        })
    }

    pub fn detect(&self, v: &FeatureVector) -> Result<Detection> {
        if v.dim() != self.layout.len() {
            return Err(Error::dimension("context vector", self.layout.len(), v.dim()));
        }
        if v.layout != self.layout {
            return Err(Error::validation("layout", "vector layout differs from training layout"));
        }
        let vote = self.forest.vote(&v.values)?;
        Ok(Detection {
            context: ContextLabel::from_index(vote.class),
            vote_fraction: vote.fraction,
        })
    }

    /// Detection on raw values in the training layout.
    pub fn detect_values(&self, values: &[f64]) -> Result<Detection> {
        let vote = self.forest.vote(values)?;
        Ok(Detection {
            context: ContextLabel::from_index(vote.class),
            vote_fraction: vote.fraction,
        })
    }

    pub fn confusion(&self, test: &[(FeatureVector, ContextLabel)]) -> Result<ConfusionMatrix> {
        if test.is_empty() {
            return Err(Error::validation("test set", "empty"));
        }
        let mut cm = ConfusionMatrix::default();
        let start = Instant::now();
        for (v, truth) in test {
            cm.record(*truth, self.detect(v)?.context);
        }
        log::debug!(
            "context detection: {:.3} ms/window",
            start.elapsed().as_secs_f64() * 1e3 / test.len() as f64
        );
        Ok(cm)
    }
}

/// Rows are true contexts, columns predicted, both in `ContextLabel::ALL` order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub context: ContextLabel,
    pub total: u64,
    pub correct: u64,
    pub rate: f64,
    pub interval: Interval,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: ContextLabel, predicted: ContextLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..2 {
            for j in 0..2 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }

    pub fn total(&self, truth: ContextLabel) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    /// Per-class accuracy with a Wilson 95% interval.
    pub fn rate(&self, truth: ContextLabel) -> ClassRate {
        let total = self.total(truth);
        let correct = self.counts[truth.index()][truth.index()];
        ClassRate {
            context: truth,
            total,
            correct,
            rate: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            interval: wilson(correct, total, Z95),
        }
    }

    pub fn accuracy(&self) -> f64 {
        let all: u64 = self.counts.iter().flatten().sum();
        let diag = self.counts[0][0] + self.counts[1][1];
        if all == 0 {
            0.0
        } else {
            diag as f64 / all as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::DecisionTree;

    fn phone_vec(first: f64) -> FeatureVector {
        let mut values = vec![0.0; DEVICE_DIM];
        values[0] = first;
        FeatureVector::new(values, production_layout(Device::Phone)).unwrap()
    }

    #[test]
    fn stump_detector() {
        let forest =
            ForestModel::from_trees(vec![DecisionTree::stump(0, 0.5, vec![4, 0], vec![0, 4])], 14, 2)
                .unwrap();
        let d = ContextDetector::from_forest(forest).unwrap();
        let r = d.detect(&phone_vec(0.9)).unwrap();
        assert_eq!((r.context, r.vote_fraction), (ContextLabel::Moving, 1.0));
        assert_eq!(d.detect(&phone_vec(0.1)).unwrap().context, ContextLabel::Stationary);
        let short = FeatureVector::new(vec![0.0], vec![production_layout(Device::Phone)[0]]).unwrap();
        assert!(d.detect(&short).is_err());
    }

    #[test]
    fn all_stationary_training_always_detects_stationary() {
        let data: Vec<_> = (0..30)
            .map(|i| (phone_vec(i as f64), ContextLabel::Stationary))
            .collect();
        let d = ContextDetector::train(&data, &ForestParams { n_trees: 7, ..Default::default() })
            .unwrap();
        assert!(d.forest.degenerate);
        for x in [-100.0, 0.0, 1e6] {
            assert_eq!(d.detect(&phone_vec(x)).unwrap().context, ContextLabel::Stationary);
        }
    }

    #[test]
    fn confusion_of_perfect_and_constant_classifiers() {
        let forest =
            ForestModel::from_trees(vec![DecisionTree::stump(0, 0.5, vec![1, 0], vec![0, 1])], 14, 2)
                .unwrap();
        let d = ContextDetector::from_forest(forest).unwrap();
        let test: Vec<_> = (0..10)
            .map(|i| {
                let moving = i % 2 == 1;
                (
                    phone_vec(if moving { 1.0 } else { 0.0 }),
                    if moving { ContextLabel::Moving } else { ContextLabel::Stationary },
                )
            })
            .collect();
        let cm = d.confusion(&test).unwrap();
        assert_eq!(cm.counts, [[5, 0], [0, 5]]);
        assert_eq!(cm.accuracy(), 1.0);

        let constant =
            ForestModel::from_trees(vec![DecisionTree::stump(0, 0.5, vec![1, 0], vec![1, 0])], 14, 2)
                .unwrap();
        let cm = ContextDetector::from_forest(constant).unwrap().confusion(&test).unwrap();
        assert_eq!(cm.counts, [[5, 0], [5, 0]]);
        let r = cm.rate(ContextLabel::Moving);
        assert_eq!(r.rate, 0.0);
        assert!(r.interval.lo == 0.0 && r.interval.hi > 0.0 && r.interval.hi < 1.0);
    }

    #[test]
    fn labels_parse() {
        assert_eq!("Moving".parse::<ContextLabel>().unwrap(), ContextLabel::Moving);
        assert!("driving".parse::<ContextLabel>().is_err());
    }
}
