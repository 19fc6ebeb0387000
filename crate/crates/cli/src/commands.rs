use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use partgrasp_core::eval::{
    aggregate_trials, evaluate_segmentation, ingest_trial_log, load_manifest, trial_report_csv, write_scene_dataset,
    write_seg_report, write_trial_log, write_trial_report, DatasetOracle, TrialRecord, TrialReport, Validation,
};
use partgrasp_core::geometry::{Frame, Pose6Dof};
use partgrasp_core::io::{read_depth, read_rgb, write_mask, IntrinsicsFile};
use partgrasp_core::pipeline::{BackendSettings, GraspRequest, PipelineConfig, PipelineResult, PromptPair};
use partgrasp_core::registry::{StageContext, StageRegistry};
use partgrasp_core::sim::{
    oracle_stages, raycast_render, run_campaign, CameraRig, CampaignSpec, FaultPlan, GtFrame, OracleLibrary,
    OutcomeTaxonomy, SceneSpec,
};
use partgrasp_protocol::{register_remote, serve_until_signal, ServedStages, ServerOptions, REMOTE};
use serde_json::json;

use crate::args::{Backends, Cli, Command, EvalSegArgs, GenScenesArgs, GraspArgs, ServeMockArgs, SimulateArgs, TrialsReportArgs};
use crate::error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = PipelineConfig::load(cli.config.as_deref())?;
    config.validate()?;
    let out = Output { dry_run: cli.dry_run };
    match &cli.command {
        Command::Grasp(a) => grasp(a, config, &out),
        Command::Simulate(a) => simulate(a, &config, &out),
        Command::EvalSeg(a) => eval_seg(a, config, &out),
        Command::TrialsReport(a) => trials_report(a, &out),
        Command::GenScenes(a) => gen_scenes(a, &out),
        Command::ServeMock(a) => serve_mock(a, &config, &out),
    }
}

/// Gate for every filesystem write.
struct Output {
    dry_run: bool,
}

impl Output {
    /// Run `write` unless this is a dry run; either way report the target.
    fn write<T>(&self, target: &Path, write: impl FnOnce() -> Result<T, CliError>) -> Result<Option<T>, CliError> {
        if self.dry_run {
            println!("dry run: would write {}", target.display());
            return Ok(None);
        }
        let value = write()?;
        println!("wrote {}", target.display());
        Ok(Some(value))
    }
}

fn backend_settings(b: Backends) -> BackendSettings {
    match b {
        Backends::Oracle => BackendSettings {
            detector: "oracle".into(),
            segmenter: "oracle".into(),
            grasp: "analytic".into(),
        },
        Backends::Remote => BackendSettings {
            detector: REMOTE.into(),
            segmenter: REMOTE.into(),
            grasp: REMOTE.into(),
        },
    }
}

fn registry() -> StageRegistry {
    let mut r = StageRegistry::with_builtin();
    register_remote(&mut r);
    r
}

fn library_for(scenes: &[SceneSpec]) -> Arc<OracleLibrary> {
    let library = Arc::new(OracleLibrary::new());
    for scene in scenes {
        let render = raycast_render(scene);
        library.register(GtFrame::new(scene.clone(), render));
    }
    library
}

fn pose_json(p: &Pose6Dof) -> serde_json::Value {
    json!({ "q": p.wxyz(), "t": p.xyz() })
}

fn plan_document(args: &GraspArgs, stages: [&str; 3], r: &PipelineResult, mask: Option<&Path>) -> serde_json::Value {
    let t = &r.timings;
    json!({
        "object": args.object,
        "part": args.part,
        "backends": stages,
        "frame": format!("{:?}", r.plan.frame).to_lowercase(),
        "pre_grasp": pose_json(&r.plan.pre_grasp),
        "grasp": pose_json(&r.plan.grasp),
        "post_grasp": pose_json(&r.plan.post_grasp),
        "opening_width": r.plan.opening_width,
        "bbox": r.bbox.as_array(),
        "detection_score": r.detection_score,
        "segmentation_score": r.segmentation_score,
        "proposals": r.proposals,
        "filtered": r.filtered,
        "timings_ms": {
            "detect": t.detect_ms,
            "segment": t.segment_ms,
            "grasp": t.grasp_ms,
            "overhead": t.overhead_ms,
            "total": t.total_ms,
        },
        "part_mask": mask.map(|p| p.display().to_string()),
    })
}

fn mask_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plan".into());
    out.with_file_name(format!("{stem}_mask.png"))
}

fn grasp(args: &GraspArgs, mut config: PipelineConfig, out: &Output) -> Result<(), CliError> {
    if let Some(b) = args.backends {
        config.backends = backend_settings(b);
    }
    let rgb = read_rgb(&args.rgb)?;
    let depth = read_depth(&args.depth)?;
    let k_file = IntrinsicsFile::read(&args.intrinsics)?;
    if (k_file.width, k_file.height) != rgb.dims() {
        return Err(CliError::Usage(format!(
            "intrinsics are for {}x{} but the image is {}x{}",
            k_file.width,
            k_file.height,
            rgb.dims().0,
            rgb.dims().1
        )));
    }
    let intrinsics = k_file.intrinsics().map_err(|e| CliError::Usage(e.to_string()))?;
    let scene = args.scene.as_deref().map(SceneSpec::read).transpose()?;
    let uses_oracle = [&config.backends.detector, &config.backends.segmenter].iter().any(|n| *n == "oracle");
    if uses_oracle && scene.is_none() {
        return Err(CliError::Usage("oracle backends need --scene for ground truth".into()));
    }
    let camera_to_world = scene.as_ref().map_or(Pose6Dof::identity(Frame::World), |s| s.camera_pose);
    let prompt = PromptPair::new(&args.object, &args.part).map_err(|e| CliError::Usage(e.to_string()))?;
    let request = GraspRequest::new(rgb, depth, intrinsics, prompt, camera_to_world)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let library = library_for(scene.as_slice());
    let ctx = StageContext::new(config.clone(), library);
    let pipeline = registry().pipeline(&config.backends, &ctx)?;
    let result = pipeline.run(&request)?;

    let mask_file = args.out.as_deref().map(mask_path);
    let doc = plan_document(args, pipeline.stage_names(), &result, mask_file.as_deref());
    let text = serde_json::to_string_pretty(&doc).expect("plan serializes");
    println!("{text}");
    if let (Some(path), Some(mask)) = (&args.out, &mask_file) {
        out.write(mask, || Ok(write_mask(mask, &result.part_mask_full)?))?;
        out.write(path, || write_text(path, &(text + "\n")))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn print_trial_summary(report: &TrialReport) {
    for s in report.scenarios.iter().filter(|s| s.total > 0) {
        let success = s.percent(OutcomeTaxonomy::Success).unwrap_or(0.0);
        println!(
            "{}: {} trials, success {:.2}%, correct part {}",
            s.scenario,
            s.total,
            success,
            s.correct_part_rate.map_or("-".into(), |r| format!("{r:.2}%"))
        );
        for o in OutcomeTaxonomy::ALL {
            if s.count(o) > 0 {
                println!("  {o}: {}", s.count(o));
            }
        }
    }
}

fn write_reports(dir: &Path, report: &TrialReport, out: &Output) -> Result<(), CliError> {
    if out.dry_run {
        println!("dry run: would write trial report to {}", dir.display());
        return Ok(());
    }
    for p in write_trial_report(dir, report)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, config: &PipelineConfig, out: &Output) -> Result<(), CliError> {
    let faults: FaultPlan = args.faults.parse().map_err(CliError::Usage)?;
    let spec = CampaignSpec {
        faults,
        shared_part: args.shared_part,
        all_parts_visible: args.all_parts_visible,
        ..CampaignSpec::new(args.scenes, args.objects, args.seed)
    };
    if args.scenes > 0 && !(1..=5).contains(&args.objects) {
        return Err(CliError::Usage(format!("--objects must be 1..5, got {}", args.objects)));
    }
    let trials = run_campaign(&spec, config)?;
    let records: Vec<TrialRecord> = trials.iter().map(TrialRecord::from_sim).collect();
    let report = aggregate_trials(&records);
    print_trial_summary(&report);
    let log = args.report.join("trials.csv");
    out.write(&log, || {
        fs::create_dir_all(&args.report)?;
        let file = fs::File::create(&log)?;
        write_trial_log(std::io::BufWriter::new(file), &records)?;
        Ok(())
    })?;
    write_reports(&args.report, &report, out)
}

fn eval_seg(args: &EvalSegArgs, config: PipelineConfig, out: &Output) -> Result<(), CliError> {
    let samples = load_manifest(&args.manifest, Validation::Eager)?;
    let threshold = config.detector.threshold;
    let eval = match args.backends {
        Backends::Oracle => {
            let oracle = DatasetOracle::from_samples(&samples, args.augment)?;
            evaluate_segmentation(&samples, &oracle, &oracle, threshold, args.augment)
        }
        Backends::Remote => {
            let ctx = StageContext::new(config, Arc::new(OracleLibrary::new()));
            let r = registry();
            let detector = r.detector(REMOTE, &ctx)?;
            let segmenter = r.segmenter(REMOTE, &ctx)?;
            evaluate_segmentation(&samples, detector.as_ref(), segmenter.as_ref(), threshold, args.augment)
        }
    };
    let r = &eval.report;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!("samples scored: {} ({} failures)", eval.scores.len(), r.failures);
    println!("mIoU single: {}  group: {}", fmt(r.overall_single), fmt(r.overall_group));
    println!(
        "combined: mean of two {}, sample weighted {}, category mean {}",
        fmt(r.combined_mean_of_two),
        fmt(r.combined_sample_weighted),
        fmt(r.combined_category_mean)
    );
    if out.dry_run {
        println!("dry run: would write segmentation report to {}", args.report.display());
        return Ok(());
    }
    for p in write_seg_report(&args.report, r, Some(&eval.scores))? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn trials_report(args: &TrialsReportArgs, out: &Output) -> Result<(), CliError> {
    let records = ingest_trial_log(&args.log)?;
    let report = aggregate_trials(&records);
    print!("{}", trial_report_csv(&report));
    write_reports(&args.report, &report, out)
}

fn gen_scenes(args: &GenScenesArgs, out: &Output) -> Result<(), CliError> {
    if args.scenes > 0 && !(1..=5).contains(&args.objects) {
        return Err(CliError::Usage(format!("--objects must be 1..5, got {}", args.objects)));
    }
    let summary = out.write(&args.out, || {
        Ok(write_scene_dataset(&args.out, args.scenes, args.objects, args.seed, &CameraRig::default())?)
    })?;
    if let Some(s) = summary {
        println!("{} samples; manifest {}", s.samples, s.manifest.display());
    }
    Ok(())
}

fn serve_mock(args: &ServeMockArgs, config: &PipelineConfig, _out: &Output) -> Result<(), CliError> {
    let mut paths = args.scenes.clone();
    if let Some(dir) = &args.scenes_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        found.sort();
        paths.extend(found);
    }
    let scenes = paths.iter().map(|p| SceneSpec::read(p)).collect::<Result<Vec<_>, _>>()?;
    let library = library_for(&scenes);
    let (d, s, g) = oracle_stages(&library, config, &[]);
    let listener = TcpListener::bind(args.listen).map_err(|e| CliError::Io(format!("{}: {e}", args.listen)))?;
    let addr = listener.local_addr()?;
    println!("serving {} scene(s) on http://{addr}", scenes.len());
    std::io::stdout().flush()?;
    let options = ServerOptions {
        delay: std::time::Duration::from_millis(args.delay_ms),
    };
    serve_until_signal(listener, ServedStages::all(d, s, g), options)?;
    Ok(())
}
