//! Stage implementations registered by name and built on demand.
//!
//! Built-in names: detector and segmenter `oracle`; grasp `analytic` (also reachable as
//! `oracle`). Other crates add their own, e.g. remote clients.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::grasp::AnalyticGraspStage;
use crate::pipeline::{BackendSettings, DetectorStage, GraspStage, Pipeline, PipelineConfig, SegmenterStage};
use crate::sim::{OracleDetector, OracleLibrary, OracleSegmenter};

/// What factories get to build a stage from.
#[derive(Clone)]
pub struct StageContext {
    pub config: PipelineConfig,
    /// Ground truth for oracle stages.
    pub library: Arc<OracleLibrary>,
}

impl StageContext {
    pub fn new(config: PipelineConfig, library: Arc<OracleLibrary>) -> Self {
        Self { config, library }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown {kind} backend {name:?} (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("cannot build {kind} backend {name:?}: {message}")]
    Build {
        kind: &'static str,
        name: String,
        message: String,
    },
}

type Factory<T> = Box<dyn Fn(&StageContext) -> Result<Arc<T>, String> + Send + Sync>;

struct Slot<T: ?Sized> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> Slot<T> {
    fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    fn build(&self, name: &str, ctx: &StageContext) -> Result<Arc<T>, RegistryError> {
        let factory = self.factories.get(name).ok_or_else(|| RegistryError::Unknown {
            kind: self.kind,
            name: name.to_string(),
            known: self.factories.keys().cloned().collect::<Vec<_>>().join(", "),
        })?;
        factory(ctx).map_err(|message| RegistryError::Build {
            kind: self.kind,
            name: name.to_string(),
            message,
        })
    }
}

pub struct StageRegistry {
    detectors: Slot<dyn DetectorStage>,
    segmenters: Slot<dyn SegmenterStage>,
    graspers: Slot<dyn GraspStage>,
}

impl Default for StageRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

impl StageRegistry {
    pub fn empty() -> Self {
        Self {
            detectors: Slot::new("detector"),
            segmenters: Slot::new("segmenter"),
            graspers: Slot::new("grasp"),
        }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register_detector("oracle", |ctx| Ok(Arc::new(OracleDetector::new(ctx.library.clone()))));
        r.register_segmenter("oracle", |ctx| Ok(Arc::new(OracleSegmenter::new(ctx.library.clone()))));
        for name in ["analytic", "oracle"] {
            r.register_grasp(name, |ctx| {
                Ok(Arc::new(AnalyticGraspStage::new(ctx.config.gripper, ctx.config.grasp)))
            });
        }
        r
    }

    pub fn register_detector<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StageContext) -> Result<Arc<dyn DetectorStage>, String> + Send + Sync + 'static,
    {
        self.detectors.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn register_segmenter<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StageContext) -> Result<Arc<dyn SegmenterStage>, String> + Send + Sync + 'static,
    {
        self.segmenters.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn register_grasp<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StageContext) -> Result<Arc<dyn GraspStage>, String> + Send + Sync + 'static,
    {
        self.graspers.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn detector(&self, name: &str, ctx: &StageContext) -> Result<Arc<dyn DetectorStage>, RegistryError> {
        self.detectors.build(name, ctx)
    }

    pub fn segmenter(&self, name: &str, ctx: &StageContext) -> Result<Arc<dyn SegmenterStage>, RegistryError> {
        self.segmenters.build(name, ctx)
    }

    pub fn grasp(&self, name: &str, ctx: &StageContext) -> Result<Arc<dyn GraspStage>, RegistryError> {
        self.graspers.build(name, ctx)
    }

    /// Registered names per stage, sorted: `[detectors, segmenters, graspers]`.
    pub fn names(&self) -> [Vec<String>; 3] {
        [
            self.detectors.factories.keys().cloned().collect(),
            self.segmenters.factories.keys().cloned().collect(),
            self.graspers.factories.keys().cloned().collect(),
        ]
    }

    /// Build the three stages named in `backends` into a pipeline.
    pub fn pipeline(&self, backends: &BackendSettings, ctx: &StageContext) -> Result<Pipeline, RegistryError> {
        Ok(Pipeline::new(
            self.detector(&backends.detector, ctx)?,
            self.segmenter(&backends.segmenter, ctx)?,
            self.grasp(&backends.grasp, ctx)?,
            ctx.config.clone(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> StageContext {
        StageContext::new(PipelineConfig::default(), Arc::new(OracleLibrary::new()))
    }

    #[test]
    fn builtin_names() {
        let r = StageRegistry::with_builtin();
        assert_eq!(
            r.names(),
            [vec!["oracle".to_string()], vec!["oracle".to_string()], vec!["analytic".to_string(), "oracle".to_string()]]
        );
        let p = r.pipeline(&BackendSettings::default(), &ctx()).unwrap();
        assert_eq!(p.stage_names(), ["oracle", "oracle", "analytic"]);
    }

    #[test]
    fn unknown_name_lists_known_ones() {
        let r = StageRegistry::with_builtin();
        let err = r.detector("dino", &ctx()).err().unwrap();
        assert_eq!(
            err,
            RegistryError::Unknown {
                kind: "detector",
                name: "dino".into(),
                known: "oracle".into()
            }
        );
    }

    #[test]
    fn custom_factories_and_build_errors() {
        let mut r = StageRegistry::empty();
        r.register_grasp("broken", |_| Err("no weights".into()));
        assert!(matches!(r.grasp("broken", &ctx()), Err(RegistryError::Build { .. })));
        r.register_grasp("analytic", |ctx| {
            Ok(Arc::new(AnalyticGraspStage::new(ctx.config.gripper, ctx.config.grasp)))
        });
        assert_eq!(r.grasp("analytic", &ctx()).unwrap().name(), "analytic");
    }
}
