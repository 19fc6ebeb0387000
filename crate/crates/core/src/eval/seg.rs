//! Segmentation evaluation: per-sample IoU through the detector and segmenter, then
//! per-object, per-category and overall means.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentationOp};
use super::iou::compute_iou;
use super::manifest::SegSample;
use super::EvalError;
use crate::geometry::{crop_image, embed_mask_full, BinaryMask, BoundingBox, ImageRgb};
use crate::pipeline::{Detection, DetectorStage, PromptPair, Segmentation, SegmenterStage, StageError};
use crate::sim::image_fingerprint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    /// Index into the evaluated sample list.
    pub sample: usize,
    pub op: AugmentationOp,
    pub category: String,
    pub object_name: String,
    pub group: bool,
    pub iou: f64,
    /// Both prediction and ground truth were empty (IoU 1.0).
    pub both_empty: bool,
    /// Stage or load failure; such samples score 0.0.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectScore {
    pub category: String,
    pub object: String,
    pub single: Option<f64>,
    pub group: Option<f64>,
    pub single_samples: usize,
    pub group_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: String,
    /// Mean of the category's per-object single and group values that are present.
    pub mean: Option<f64>,
    pub objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegReport {
    pub objects: Vec<ObjectScore>,
    pub categories: Vec<CategoryScore>,
    pub overall_single: Option<f64>,
    pub overall_group: Option<f64>,
    /// Mean of `overall_single` and `overall_group`.
    pub combined_mean_of_two: Option<f64>,
    /// Mean over every per-object value weighted by its sample count.
    pub combined_sample_weighted: Option<f64>,
    /// Mean of the category means.
    pub combined_category_mean: Option<f64>,
    pub samples: usize,
    pub failures: usize,
    pub both_empty: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl SegReport {
    pub fn from_objects(objects: Vec<ObjectScore>, samples: usize, failures: usize, both_empty: usize) -> Self {
        let mut order: Vec<&str> = Vec::new();
        for o in &objects {
            if !order.contains(&o.category.as_str()) {
                order.push(&o.category);
            }
        }
        let categories: Vec<CategoryScore> = order
            .iter()
            .map(|&c| {
                let members: Vec<&ObjectScore> = objects.iter().filter(|o| o.category == c).collect();
                CategoryScore {
                    category: c.to_string(),
                    mean: mean(members.iter().flat_map(|o| o.single.into_iter().chain(o.group))),
                    objects: members.len(),
                }
            })
            .collect();
        let overall_single = mean(objects.iter().filter_map(|o| o.single));
        let overall_group = mean(objects.iter().filter_map(|o| o.group));
        let combined_mean_of_two = match (overall_single, overall_group) {
            (Some(s), Some(g)) => Some((s + g) / 2.0),
            (s, g) => s.or(g),
        };
        let (weighted, weight) = objects.iter().fold((0.0, 0usize), |(s, n), o| {
            let s = s + o.single.map_or(0.0, |v| v * o.single_samples as f64);
            let s = s + o.group.map_or(0.0, |v| v * o.group_samples as f64);
            let n = n + o.single.map_or(0, |_| o.single_samples) + o.group.map_or(0, |_| o.group_samples);
            (s, n)
        });
        let combined_category_mean = mean(categories.iter().filter_map(|c| c.mean));
        Self {
            objects,
            categories,
            overall_single,
            overall_group,
            combined_mean_of_two,
            combined_sample_weighted: (weight > 0).then(|| weighted / weight as f64),
            combined_category_mean,
            samples,
            failures,
            both_empty,
        }
    }

    /// Objects are keyed by (category, object name) in order of first appearance.
    pub fn from_samples(scores: &[SampleScore]) -> Self {
        let mut index: HashMap<(&str, &str), usize> = HashMap::new();
        let mut sums: Vec<(String, String, [f64; 2], [usize; 2])> = Vec::new();
        for s in scores {
            let key = (s.category.as_str(), s.object_name.as_str());
            let i = *index.entry(key).or_insert_with(|| {
                sums.push((s.category.clone(), s.object_name.clone(), [0.0; 2], [0; 2]));
                sums.len() - 1
            });
            let g = usize::from(s.group);
            sums[i].2[g] += s.iou;
            sums[i].3[g] += 1;
        }
        let objects = sums
            .into_iter()
            .map(|(category, object, total, n)| ObjectScore {
                category,
                object,
                single: (n[0] > 0).then(|| total[0] / n[0] as f64),
                group: (n[1] > 0).then(|| total[1] / n[1] as f64),
                single_samples: n[0],
                group_samples: n[1],
            })
            .collect();
        Self::from_objects(
            objects,
            scores.len(),
            scores.iter().filter(|s| s.failure.is_some()).count(),
            scores.iter().filter(|s| s.both_empty).count(),
        )
    }

    pub fn category(&self, name: &str) -> Option<&CategoryScore> {
        self.categories.iter().find(|c| c.category == name)
    }
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    category: String,
    object: String,
    single: String,
    group: String,
}

fn parse_value(text: &str, line: usize) -> Result<Option<f64>, EvalError> {
    let t = text.trim();
    if t.is_empty() || t == "-" {
        return Ok(None);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| (0.0..=1.0).contains(v))
        .map(Some)
        .ok_or_else(|| EvalError::Parse {
            line,
            message: format!("score {t:?} is not a number in [0, 1]"),
        })
}

/// Precomputed per-object scores: CSV with columns `category,object,single,group`;
/// `-` or an empty cell marks a missing value. Each present value counts as one sample.
pub fn parse_object_scores(reader: impl Read) -> Result<Vec<ObjectScore>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| EvalError::Parse {
            line,
            message: e.to_string(),
        })?;
        let single = parse_value(&row.single, line)?;
        let group = parse_value(&row.group, line)?;
        out.push(ObjectScore {
            category: row.category,
            object: row.object,
            single,
            group,
            single_samples: usize::from(single.is_some()),
            group_samples: usize::from(group.is_some()),
        });
    }
    Ok(out)
}

pub fn read_object_scores(path: &Path) -> Result<Vec<ObjectScore>, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| crate::io::IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_object_scores(file)
}

#[derive(Debug, Clone)]
pub struct SegEvaluation {
    pub scores: Vec<SampleScore>,
    pub report: SegReport,
}

fn predict(
    image: &ImageRgb,
    prompt: &PromptPair,
    detector: &dyn DetectorStage,
    segmenter: &dyn SegmenterStage,
    threshold: f64,
) -> Result<BinaryMask, String> {
    let det = detector
        .detect(image, &prompt.object_text, threshold)
        .map_err(|e| format!("detector: {e}"))?;
    let crop = crop_image(image, &det.bbox).map_err(|e| format!("detector: {e}"))?;
    let seg = segmenter
        .segment(&crop, &prompt.part_text)
        .map_err(|e| format!("segmenter: {e}"))?;
    embed_mask_full(&seg.mask, &det.bbox, image.dims()).map_err(|e| format!("segmenter: {e}"))
}

/// Score every sample (and its augmented family when `augmented`) as detect, crop,
/// segment, embed, IoU against ground truth. Samples run in parallel on the current rayon
/// pool; failures score 0.0 and are counted in the report.
pub fn evaluate_segmentation(
    samples: &[SegSample],
    detector: &dyn DetectorStage,
    segmenter: &dyn SegmenterStage,
    threshold: f64,
    augmented: bool,
) -> SegEvaluation {
    let ops: &[AugmentationOp] = if augmented {
        &AugmentationOp::FAMILY
    } else {
        &[AugmentationOp::Identity]
    };
    let scores: Vec<SampleScore> = samples
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, sample)| {
            let score = |op: AugmentationOp, iou: f64, both_empty: bool, failure: Option<String>| SampleScore {
                sample: i,
                op,
                category: sample.category.clone(),
                object_name: sample.object_name.clone(),
                group: sample.group,
                iou,
                both_empty,
                failure,
            };
            let loaded = match sample.load(i) {
                Ok(l) => l,
                Err(e) => {
                    return ops
                        .iter()
                        .map(|&op| score(op, 0.0, false, Some(e.to_string())))
                        .collect::<Vec<_>>();
                }
            };
            ops.iter()
                .map(|&op| {
                    let image = op.apply_image(&loaded.image);
                    let truth = op.apply_mask(&loaded.mask);
                    match predict(&image, &sample.prompt, detector, segmenter, threshold) {
                        Ok(pred) => {
                            let iou = compute_iou(&pred, &truth).expect("embedded at image dims");
                            score(op, iou, pred.is_empty() && truth.is_empty(), None)
                        }
                        Err(e) => score(op, 0.0, false, Some(e)),
                    }
                })
                .collect()
        })
        .collect();
    let report = SegReport::from_samples(&scores);
    SegEvaluation { scores, report }
}

/// Detector and segmenter that replay dataset ground truth: the detector boxes the whole
/// image and the segmenter returns the labelled mask of the image it recognizes.
#[derive(Debug, Default)]
pub struct DatasetOracle {
    masks: HashMap<u64, BinaryMask>,
}

impl DatasetOracle {
    pub fn from_samples(samples: &[SegSample], augmented: bool) -> Result<Self, EvalError> {
        let mut masks = HashMap::new();
        for (i, sample) in samples.iter().enumerate() {
            let loaded = sample.load(i)?;
            if augmented {
                for a in augment(&loaded.image, &loaded.mask, None) {
                    masks.insert(image_fingerprint(&a.image), a.mask);
                }
            } else {
                masks.insert(image_fingerprint(&loaded.image), loaded.mask);
            }
        }
        Ok(Self { masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

impl DetectorStage for DatasetOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn detect(&self, image: &ImageRgb, _object_text: &str, _threshold: f64) -> Result<Detection, StageError> {
        if !self.masks.contains_key(&image_fingerprint(image)) {
            return Err(StageError::BadRequest("image is not part of the dataset".into()));
        }
        Ok(Detection {
            bbox: BoundingBox::full(image.width(), image.height()),
            score: 1.0,
        })
    }
}

impl SegmenterStage for DatasetOracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn segment(&self, image: &ImageRgb, _part_text: &str) -> Result<Segmentation, StageError> {
        self.masks
            .get(&image_fingerprint(image))
            .map(|mask| Segmentation {
                mask: mask.clone(),
                score: 1.0,
            })
            .ok_or_else(|| StageError::BadRequest("image is not part of the dataset".into()))
    }
}
