use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use partgrasp_core::geometry::{crop_image, BinaryMask, DepthImage};
use partgrasp_core::pipeline::{Pipeline, PipelineConfig, StageError};
use partgrasp_core::sim::{
    generate_scene, grasp_request, oracle_stages, CameraRig, GeneratedScene, GtFrame, OracleLibrary, SceneRequest,
};
use partgrasp_protocol::schema::{
    encode_depth, encode_image, encode_mask, DetectRequest, GraspRequestBody, HealthResponse, IntrinsicsDoc,
    SegmentRequest,
};
use partgrasp_protocol::{
    ClientError, ErrorCode, ErrorEnvelope, MockServer, RemoteDetector, RemoteGrasper, RemoteSegmenter, ServedStages,
    ServerOptions, StageEndpoint,
};
use serde_json::Value;

fn small_rig() -> CameraRig {
    CameraRig {
        width: 320,
        height: 240,
        focal: 400.0,
        ..CameraRig::default()
    }
}

fn scene(seed: u64, rig: &CameraRig) -> GeneratedScene {
    generate_scene(seed, &SceneRequest::cluttered(1), rig).unwrap()
}

/// Oracle stages over `scenes`, served on an ephemeral port.
fn serve(scenes: &[&GeneratedScene], config: &PipelineConfig, options: ServerOptions) -> (MockServer, Arc<OracleLibrary>) {
    let library = Arc::new(OracleLibrary::new());
    for g in scenes {
        library.register(GtFrame::new(g.scene.clone(), g.render.clone()));
    }
    let (d, s, g) = oracle_stages(&library, config, &[]);
    (MockServer::spawn(ServedStages::all(d, s, g), options).unwrap(), library)
}

fn endpoint(server: &MockServer, timeout: Duration) -> StageEndpoint {
    StageEndpoint::new(&server.url(), timeout).unwrap()
}

fn golden(name: &str, actual: &Value) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden").join(name);
    if std::env::var_os("PARTGRASP_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e} (bless with PARTGRASP_BLESS=1)", path.display()));
    let expected: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(&expected, actual, "{name} differs from its golden file");
}

#[test]
fn golden_bodies() {
    let rig = small_rig();
    let g = scene(5, &rig);
    let config = PipelineConfig::default();
    let (server, _) = serve(&[&g], &config, ServerOptions::default());
    let ep = endpoint(&server, Duration::from_secs(10));

    let detect = DetectRequest {
        image_png_b64: encode_image(&g.render.rgb),
        prompt: g.object_query.clone(),
        threshold: 0.3,
    };
    let detected = ep.detect(&detect).unwrap();
    golden("detect_request.json", &serde_json::to_value(&detect).unwrap());
    golden("detect_response.json", &serde_json::to_value(&detected).unwrap());

    let crop = crop_image(&g.render.rgb, &detected.to_detection().unwrap().bbox).unwrap();
    let segment = SegmentRequest {
        image_png_b64: encode_image(&crop),
        part_prompt: g.part.clone(),
    };
    let segmented = ep.segment(&segment).unwrap();
    golden("segment_request.json", &serde_json::to_value(&segment).unwrap());
    golden("segment_response.json", &serde_json::to_value(&segmented).unwrap());

    let mask = GtFrame::new(g.scene.clone(), g.render.clone())
        .part_mask_full(g.target, g.scene.objects[g.target].part_index(&g.part).unwrap());
    let grasp = GraspRequestBody {
        depth_png_b64: encode_depth(&g.render.depth),
        intrinsics: IntrinsicsDoc::from_intrinsics(&g.scene.intrinsics),
        mask_png_b64: encode_mask(&mask),
    };
    let grasps = ep.grasp(&grasp).unwrap();
    assert!(!grasps.grasps.is_empty());
    golden("grasp_request.json", &serde_json::to_value(&grasp).unwrap());
    golden("grasp_response.json", &serde_json::to_value(&grasps).unwrap());

    let not_found = ep
        .detect(&DetectRequest {
            prompt: "unicorn".into(),
            ..detect
        })
        .unwrap_err();
    let ClientError::Protocol(e) = not_found else { panic!("{not_found:?}") };
    golden("error_not_found.json", &serde_json::to_value(e.envelope()).unwrap());

    let health = ep.health().unwrap();
    assert_eq!(health, HealthResponse { status: "ok".into(), stage: "all".into() });
}

#[test]
fn not_found_maps_to_stage_not_found() {
    let rig = small_rig();
    let g = scene(8, &rig);
    let (server, _) = serve(&[&g], &PipelineConfig::default(), ServerOptions::default());
    let detector = RemoteDetector::new(endpoint(&server, Duration::from_secs(10)));
    let err = partgrasp_core::pipeline::DetectorStage::detect(&detector, &g.render.rgb, "unicorn", 0.3).unwrap_err();
    assert!(matches!(err, StageError::NotFound(_)), "{err:?}");
}

#[test]
fn single_stage_health_and_unserved_routes() {
    let library = Arc::new(OracleLibrary::new());
    let (d, _, _) = oracle_stages(&library, &PipelineConfig::default(), &[]);
    let server = MockServer::spawn(
        ServedStages {
            detector: Some(d),
            ..Default::default()
        },
        ServerOptions::default(),
    )
    .unwrap();
    let ep = endpoint(&server, Duration::from_secs(5));
    assert_eq!(ep.health().unwrap().stage, "detect");
    let err = ep
        .segment(&SegmentRequest {
            image_png_b64: String::new(),
            part_prompt: "handle".into(),
        })
        .unwrap_err();
    assert!(matches!(err, ClientError::Protocol(ref e) if e.code == ErrorCode::NotFound), "{err:?}");
}

#[test]
fn malformed_bodies_are_bad_requests() {
    let library = Arc::new(OracleLibrary::new());
    let (d, s, g) = oracle_stages(&library, &PipelineConfig::default(), &[]);
    let server = MockServer::spawn(ServedStages::all(d, s, g), ServerOptions::default()).unwrap();
    let ep = endpoint(&server, Duration::from_secs(5));
    for (route, body) in [
        ("detect", &b"{not json"[..]),
        ("detect", br#"{"image_png_b64":"","prompt":"mug"}"#),
        ("segment", br#"{"image_png_b64":"@@@","part_prompt":"handle"}"#),
        ("grasp", br#"{"depth_png_b64":"","intrinsics":{"fx":1,"fy":1,"cx":0,"cy":0},"mask_png_b64":"","x":1}"#),
    ] {
        let response = ep.post_raw(route, body.to_vec()).unwrap();
        assert_eq!(response.status().as_u16(), 400, "{route}");
        let envelope: ErrorEnvelope = serde_json::from_slice(&response.bytes().unwrap()).unwrap();
        assert_eq!(envelope.error.code, ErrorCode::BadRequest);
    }
}

#[test]
fn grasp_dimension_mismatch_is_a_bad_request() {
    let library = Arc::new(OracleLibrary::new());
    let (d, s, g) = oracle_stages(&library, &PipelineConfig::default(), &[]);
    let server = MockServer::spawn(ServedStages::all(d, s, g), ServerOptions::default()).unwrap();
    let ep = endpoint(&server, Duration::from_secs(5));
    let err = ep
        .grasp(&GraspRequestBody {
            depth_png_b64: encode_depth(&DepthImage::new(4, 3, vec![0.5; 12]).unwrap()),
            intrinsics: IntrinsicsDoc { fx: 100.0, fy: 100.0, cx: 2.0, cy: 1.5 },
            mask_png_b64: encode_mask(&BinaryMask::new(5, 3)),
        })
        .unwrap_err();
    assert!(matches!(err, ClientError::Protocol(ref e) if e.code == ErrorCode::BadRequest), "{err:?}");
}

#[test]
fn slow_server_times_out() {
    let library = Arc::new(OracleLibrary::new());
    let (d, s, g) = oracle_stages(&library, &PipelineConfig::default(), &[]);
    let server = MockServer::spawn(
        ServedStages::all(d, s, g),
        ServerOptions {
            delay: Duration::from_millis(600),
        },
    )
    .unwrap();
    let detector = RemoteDetector::new(endpoint(&server, Duration::from_millis(300)));
    let image = partgrasp_core::geometry::ImageRgb::filled(8, 8, [0, 0, 0]).unwrap();
    let err = partgrasp_core::pipeline::DetectorStage::detect(&detector, &image, "mug", 0.3).unwrap_err();
    assert!(matches!(err, StageError::Timeout(_)), "{err:?}");
    assert!(err.is_transport());
}

#[test]
fn repeated_requests_are_idempotent() {
    let rig = small_rig();
    let g = scene(13, &rig);
    let (server, _) = serve(&[&g], &PipelineConfig::default(), ServerOptions::default());
    let ep = endpoint(&server, Duration::from_secs(10));
    let request = DetectRequest {
        image_png_b64: encode_image(&g.render.rgb),
        prompt: g.object_query.clone(),
        threshold: 0.3,
    };
    let first = ep.detect(&request).unwrap();
    for _ in 0..3 {
        assert_eq!(ep.detect(&request).unwrap(), first);
    }
}

#[test]
fn remote_pipeline_matches_in_process() {
    let rig = CameraRig::default();
    let scenes: Vec<GeneratedScene> = (0..6).map(|i| scene(100 + i, &rig)).collect();
    let config = PipelineConfig::default();
    let refs: Vec<&GeneratedScene> = scenes.iter().collect();
    let (server, library) = serve(&refs, &config, ServerOptions::default());
    let (d, s, g) = oracle_stages(&library, &config, &[]);
    let local = Pipeline::new(d, s, g, config.clone());
    let ep = endpoint(&server, Duration::from_secs(10));
    let remote = Pipeline::new(
        Arc::new(RemoteDetector::new(ep.clone())),
        Arc::new(RemoteSegmenter::new(ep.clone())),
        Arc::new(RemoteGrasper::new(ep)),
        config,
    );
    let mut compared = 0;
    for g in &scenes {
        let base = grasp_request(g);
        let request = partgrasp_core::pipeline::GraspRequest::new(
            base.rgb().clone(),
            base.depth().quantized_mm(),
            *base.intrinsics(),
            base.prompt().clone(),
            *base.camera_to_world(),
        )
        .unwrap();
        match (local.run(&request), remote.run(&request)) {
            (Ok(a), Ok(b)) => {
                assert!(a.same_outputs(&b));
                compared += 1;
            }
            (Err(a), Err(b)) => assert_eq!(a.stage(), b.stage()),
            (a, b) => panic!("outcomes differ: {:?} vs {:?}", a.map(|_| ()), b.map(|_| ())),
        }
    }
    assert!(compared >= 4, "{compared}");
}
