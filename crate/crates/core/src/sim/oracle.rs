//! Ground-truth lookups and the oracle detector/segmenter built on them.
//!
//! Oracles answer from a registry of rendered frames keyed by an image fingerprint, so they
//! work behind any transport that delivers the image bit-exactly.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use super::render::RenderOutput;
use super::scene::SceneSpec;
use super::SimError;
use crate::geometry::{crop_image, BinaryMask, BoundingBox, ImageRgb};
use crate::pipeline::{Detection, DetectorStage, SegmenterStage, Segmentation, StageError};

/// A rendered scene with per-object boxes precomputed.
#[derive(Debug, Clone)]
pub struct GtFrame {
    pub scene: SceneSpec,
    pub render: RenderOutput,
    /// Tight box over each object's visible pixels.
    pub object_boxes: Vec<Option<BoundingBox>>,
}

impl GtFrame {
    pub fn new(scene: SceneSpec, render: RenderOutput) -> Self {
        let object_boxes = (0..scene.objects.len())
            .map(|o| instance_box(&render, |p| p == Some(o as u16)))
            .collect();
        Self {
            scene,
            render,
            object_boxes,
        }
    }

    /// Index of the single object matching `query`.
    pub fn resolve(&self, query: &str) -> Result<usize, SimError> {
        match self.scene.find_objects(query).as_slice() {
            [] => Err(SimError::NotFound(format!("no object matches {query:?}"))),
            [one] => Ok(*one),
            many => Err(SimError::Ambiguous(format!("{query:?} matches {} objects", many.len()))),
        }
    }

    pub fn part_mask_full(&self, object: usize, part: usize) -> BinaryMask {
        let w = self.render.width();
        BinaryMask::from_fn(w, self.render.height(), |u, v| {
            self.render.part_map[(v * w + u) as usize] == Some((object as u16, part as u16))
        })
    }
}

fn instance_box(render: &RenderOutput, hit: impl Fn(Option<u16>) -> bool) -> Option<BoundingBox> {
    let w = render.width();
    let (mut lo, mut hi) = ((u32::MAX, u32::MAX), (0, 0));
    let mut any = false;
    for (i, p) in render.instance_map.iter().enumerate() {
        if hit(*p) {
            let (u, v) = (i as u32 % w, i as u32 / w);
            lo = (lo.0.min(u), lo.1.min(v));
            hi = (hi.0.max(u), hi.1.max(v));
            any = true;
        }
    }
    any.then(|| BoundingBox::new(lo.0, lo.1, hi.0 + 1, hi.1 + 1).expect("box from set pixels"))
}

pub fn ground_truth_bbox(frame: &GtFrame, object_query: &str) -> Result<BoundingBox, SimError> {
    let o = frame.resolve(object_query)?;
    frame.object_boxes[o].ok_or_else(|| SimError::NotFound(format!("{object_query:?} is not visible")))
}

/// Pixels of `(object, part)` inside `crop`, in crop coordinates.
pub fn ground_truth_mask(
    frame: &GtFrame,
    object_query: &str,
    part_name: &str,
    crop: &BoundingBox,
) -> Result<BinaryMask, SimError> {
    let o = frame.resolve(object_query)?;
    let p = frame.scene.objects[o]
        .part_index(part_name)
        .ok_or_else(|| SimError::NotFound(format!("{object_query:?} has no part {part_name:?}")))?;
    crop_part_mask(frame, o, p, crop)
}

fn crop_part_mask(frame: &GtFrame, object: usize, part: usize, crop: &BoundingBox) -> Result<BinaryMask, SimError> {
    let w = frame.render.width();
    crop.check_within(w, frame.render.height())
        .map_err(|e| SimError::InvalidScene(e.to_string()))?;
    let key = Some((object as u16, part as u16));
    Ok(BinaryMask::from_fn(crop.width(), crop.height(), |u, v| {
        frame.render.part_map[((v + crop.y_min) * w + u + crop.x_min) as usize] == key
    }))
}

pub fn image_fingerprint(image: &ImageRgb) -> u64 {
    let mut h = DefaultHasher::new();
    image.dims().hash(&mut h);
    image.pixels().hash(&mut h);
    h.finish()
}

#[derive(Default)]
struct Registry {
    frames: HashMap<u64, Arc<GtFrame>>,
    /// Crop fingerprint → (frame key, crop box) for every object box of every frame.
    crops: HashMap<u64, Vec<(u64, BoundingBox)>>,
}

/// Frames the oracle stages can answer for. Safe to share across threads.
#[derive(Default)]
pub struct OracleLibrary {
    inner: RwLock<Registry>,
}

impl OracleLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a frame; returns its fingerprint.
    pub fn register(&self, frame: GtFrame) -> u64 {
        let key = image_fingerprint(&frame.render.rgb);
        let crops: Vec<(u64, BoundingBox)> = frame
            .object_boxes
            .iter()
            .flatten()
            .map(|b| (image_fingerprint(&crop_image(&frame.render.rgb, b).expect("box inside frame")), *b))
            .collect();
        let mut reg = self.inner.write().expect("oracle registry lock");
        for (hash, bbox) in crops {
            let entry = reg.crops.entry(hash).or_default();
            if !entry.contains(&(key, bbox)) {
                entry.push((key, bbox));
            }
        }
        reg.frames.insert(key, Arc::new(frame));
        key
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("oracle registry lock").frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame(&self, image: &ImageRgb) -> Option<Arc<GtFrame>> {
        let key = image_fingerprint(image);
        self.inner.read().expect("oracle registry lock").frames.get(&key).cloned()
    }

    /// Find the frame and box a crop was cut from.
    pub fn locate_crop(&self, crop: &ImageRgb) -> Option<(Arc<GtFrame>, BoundingBox)> {
        let reg = self.inner.read().expect("oracle registry lock");
        if let Some(hits) = reg.crops.get(&image_fingerprint(crop)) {
            if let Some((key, bbox)) = hits.first() {
                return Some((reg.frames[key].clone(), *bbox));
            }
        }
        let mut keys: Vec<&u64> = reg.frames.keys().collect();
        keys.sort();
        keys.into_iter().find_map(|key| {
            let frame = &reg.frames[key];
            search_crop(&frame.render.rgb, crop).map(|b| (frame.clone(), b))
        })
    }
}

/// Exhaustive placement search, row-major, first match wins.
fn search_crop(full: &ImageRgb, crop: &ImageRgb) -> Option<BoundingBox> {
    let (fw, fh) = full.dims();
    let (cw, ch) = crop.dims();
    if cw > fw || ch > fh {
        return None;
    }
    let width = cw as usize * 3;
    for y in 0..=fh - ch {
        for x in 0..=fw - cw {
            let start = x as usize * 3;
            let matches = (0..ch).all(|r| full.row(y + r)[start..start + width] == *crop.row(r));
            if matches {
                return BoundingBox::new(x, y, x + cw, y + ch).ok();
            }
        }
    }
    None
}

fn stage_error(e: SimError) -> StageError {
    match e {
        SimError::NotFound(m) | SimError::Ambiguous(m) => StageError::NotFound(m),
        SimError::InvalidScene(m) => StageError::BadRequest(m),
        SimError::Io(e) => StageError::Internal(e.to_string()),
    }
}

/// Detector answering from scene ground truth with confidence 1.
pub struct OracleDetector {
    library: Arc<OracleLibrary>,
}

impl OracleDetector {
    pub fn new(library: Arc<OracleLibrary>) -> Self {
        Self { library }
    }
}

impl DetectorStage for OracleDetector {
    fn name(&self) -> &str {
        "oracle"
    }

    fn detect(&self, image: &ImageRgb, object_text: &str, threshold: f64) -> Result<Detection, StageError> {
        let frame = self
            .library
            .frame(image)
            .ok_or_else(|| StageError::BadRequest("image is not a registered oracle frame".into()))?;
        let bbox = ground_truth_bbox(&frame, object_text).map_err(stage_error)?;
        let score = 1.0;
        if score < threshold {
            return Err(StageError::NotFound(format!("score {score} below {threshold}")));
        }
        Ok(Detection { bbox, score })
    }
}

/// Segmenter answering from scene ground truth: the crop's object is the one whose box
/// overlaps the crop most; the mask is that object's named part within the crop.
pub struct OracleSegmenter {
    library: Arc<OracleLibrary>,
}

impl OracleSegmenter {
    pub fn new(library: Arc<OracleLibrary>) -> Self {
        Self { library }
    }
}

impl SegmenterStage for OracleSegmenter {
    fn name(&self) -> &str {
        "oracle"
    }

    fn segment(&self, image: &ImageRgb, part_text: &str) -> Result<Segmentation, StageError> {
        let (frame, crop) = self
            .library
            .locate_crop(image)
            .ok_or_else(|| StageError::BadRequest("crop does not come from a registered oracle frame".into()))?;
        let object = frame
            .object_boxes
            .iter()
            .enumerate()
            .filter_map(|(o, b)| b.map(|b| (o, b.iou(&crop))))
            .filter(|(_, iou)| *iou > 0.0)
            // ties go to the lower index
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(o, _)| o)
            .ok_or_else(|| StageError::NotFound("no object inside the crop".into()))?;
        let part = frame.scene.objects[object]
            .part_index(part_text)
            .ok_or_else(|| StageError::NotFound(format!("no part {part_text:?} on the cropped object")))?;
        let mask = crop_part_mask(&frame, object, part, &crop).map_err(stage_error)?;
        Ok(Segmentation { mask, score: 1.0 })
    }
}
