//! Rendered scenes written out as a labelled segmentation dataset.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::manifest::{write_manifest, ManifestEntry};
use super::EvalError;
use crate::io::{write_depth, write_mask, write_rgb, IntrinsicsFile};
use crate::sim::{generate_scene, trial_seed, CameraRig, GtFrame, SceneRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub manifest: PathBuf,
    pub intrinsics: PathBuf,
    pub samples: usize,
}

/// Render `scenes` scenes of `objects` objects each into `dir`:
///
/// ```text
/// manifest.toml  intrinsics.toml
/// rgb/NNNN.png  depth/NNNN.png  masks/NNNN.png  scenes/NNNN.toml
/// ```
///
/// Each sample prompts for the target object's target part. Scene `i` uses
/// `trial_seed(seed, i)`, so a dataset matches the scenes of a campaign with the same seed.
pub fn write_scene_dataset(
    dir: &Path,
    scenes: usize,
    objects: usize,
    seed: u64,
    rig: &CameraRig,
) -> Result<DatasetSummary, EvalError> {
    let entries: Vec<ManifestEntry> = (0..scenes)
        .into_par_iter()
        .map(|i| {
            let request = SceneRequest {
                orientation_index: (objects == 1).then_some((i % 5) as u8),
                ..SceneRequest::cluttered(objects)
            };
            let g = generate_scene(trial_seed(seed, i), &request, rig)?;
            let stem = format!("{i:04}");
            let rel = |sub: &str, ext: &str| PathBuf::from(sub).join(format!("{stem}.{ext}"));
            let target = &g.scene.objects[g.target];
            let part = target.part_index(&g.part).expect("target part exists");
            let mask = GtFrame::new(g.scene.clone(), g.render.clone()).part_mask_full(g.target, part);
            write_rgb(&dir.join(rel("rgb", "png")), &g.render.rgb)?;
            write_depth(&dir.join(rel("depth", "png")), &g.render.depth)?;
            write_mask(&dir.join(rel("masks", "png")), &mask)?;
            g.scene.write(&dir.join(rel("scenes", "toml")))?;
            Ok(ManifestEntry {
                image: rel("rgb", "png"),
                depth: Some(rel("depth", "png")),
                mask: rel("masks", "png"),
                object: g.object_query.clone(),
                part: g.part.clone(),
                group: objects > 1,
                category: target.name.clone(),
                object_name: Some(g.object_query.clone()),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    let manifest = dir.join("manifest.toml");
    write_manifest(&manifest, &entries)?;
    let intrinsics = dir.join("intrinsics.toml");
    IntrinsicsFile::new(rig.intrinsics(), rig.width, rig.height).write(&intrinsics)?;
    Ok(DatasetSummary {
        manifest,
        intrinsics,
        samples: entries.len(),
    })
}
