//! Exercises the C ABI from Rust: handle lifecycle, JSON outputs, and the
//! error codes for null, non-UTF-8, missing-file, and malformed inputs.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::ptr;

use radclass_capi::{
    radclass_baseline_classify_json, radclass_baseline_free, radclass_baseline_load,
    radclass_last_error, radclass_model_free, radclass_model_info_json, radclass_model_load,
    radclass_model_predict_json, radclass_string_free, RadclassBaseline, RadclassModel,
    RadclassStatus,
};

use radclass::corpus::{corpus_from_records, parse_manifest, IngestOptions, LabelSchema};
use radclass::ngram::FitOptions;
use radclass::pipeline::{BaselinePipeline, TrainOptions, TrainedPipeline};
use radclass::preprocess::CleanConfig;

/// Builds a small labeled corpus, trains both artifact kinds, and saves
/// them under `dir`.
fn artifacts(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf, TrainedPipeline) {
    let manifest = concat!(
        r#"{"id":"p0","text":"the lungs are clear with no pleural effusion","label":"cxr"}"#,
        "\n",
        r#"{"id":"p1","text":"clear lungs and no pneumothorax or consolidation","label":"cxr"}"#,
        "\n",
        r#"{"id":"p2","text":"no pleural effusion and the lungs remain clear","label":"cxr"}"#,
        "\n",
        r#"{"id":"n0","text":"the liver and spleen are unremarkable today","label":"abd"}"#,
        "\n",
        r#"{"id":"n1","text":"bowel gas pattern without obstruction or free air","label":"abd"}"#,
        "\n",
        r#"{"id":"n2","text":"kidneys and pancreas show no focal lesion","label":"abd"}"#,
        "\n",
    );
    let records = parse_manifest(manifest.as_bytes(), "inline").unwrap();
    let schema = LabelSchema::binary("cxr", "abd").unwrap();
    let corpus = corpus_from_records(records, schema, IngestOptions::default()).unwrap();
    let clean = CleanConfig::default();

    let pipeline = TrainedPipeline::train(&corpus, &clean, &TrainOptions::default()).unwrap();
    let model_path = dir.join("model.json");
    pipeline.save(&model_path).unwrap();

    let baseline = BaselinePipeline::fit(&corpus, &clean, &FitOptions::default()).unwrap();
    let baseline_path = dir.join("baseline.json");
    baseline.save(&baseline_path).unwrap();

    (model_path, baseline_path, pipeline)
}

fn c_path(path: &Path) -> CString {
    CString::new(path.to_str().unwrap()).unwrap()
}

/// Takes ownership of a string given out by the library.
unsafe fn consume(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let value = CStr::from_ptr(ptr).to_str().unwrap().to_string();
    radclass_string_free(ptr);
    value
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(radclass_last_error())
            .to_str()
            .unwrap()
            .to_string()
    }
}

#[test]
fn model_round_trip_matches_the_library() {
    let dir = tempfile::TempDir::new().unwrap();
    let (model_path, _, pipeline) = artifacts(dir.path());
    unsafe {
        let mut handle: *mut RadclassModel = ptr::null_mut();
        let status = radclass_model_load(c_path(&model_path).as_ptr(), &mut handle);
        assert_eq!(status, RadclassStatus::Ok);
        assert!(!handle.is_null());

        let text = CString::new("lungs are clear with no effusion").unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        let status = radclass_model_predict_json(handle, text.as_ptr(), &mut out);
        assert_eq!(status, RadclassStatus::Ok);
        let record: serde_json::Value = serde_json::from_str(&consume(out)).unwrap();

        let direct = pipeline
            .predict_text("lungs are clear with no effusion")
            .unwrap();
        let direct_label = pipeline.class_name(direct.class_index).unwrap();
        assert_eq!(record["label"], direct_label);
        let scores = record["scores"].as_object().unwrap();
        assert_eq!(scores.len(), 2);
        for (ix, class) in pipeline.classes().iter().enumerate() {
            assert_eq!(scores[class].as_f64().unwrap(), direct.scores[ix]);
        }

        let mut out: *mut c_char = ptr::null_mut();
        let status = radclass_model_info_json(handle, &mut out);
        assert_eq!(status, RadclassStatus::Ok);
        let info: serde_json::Value = serde_json::from_str(&consume(out)).unwrap();
        assert_eq!(info["task"], "binary");
        assert_eq!(info["family"], "logreg");
        assert_eq!(info["classes"][0], "cxr");
        assert!(info["vocabulary"].as_u64().unwrap() > 0);

        radclass_model_free(handle);
    }
}

#[test]
fn baseline_round_trip_matches_the_library() {
    let dir = tempfile::TempDir::new().unwrap();
    let (_, baseline_path, _) = artifacts(dir.path());
    let reference = BaselinePipeline::load(&baseline_path).unwrap();
    unsafe {
        let mut handle: *mut RadclassBaseline = ptr::null_mut();
        let status = radclass_baseline_load(c_path(&baseline_path).as_ptr(), &mut handle);
        assert_eq!(status, RadclassStatus::Ok);

        let text = "the lungs are clear with no pleural effusion";
        let c_text = CString::new(text).unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        let status = radclass_baseline_classify_json(handle, c_text.as_ptr(), &mut out);
        assert_eq!(status, RadclassStatus::Ok);
        let record: serde_json::Value = serde_json::from_str(&consume(out)).unwrap();

        let (positive, fraction) = reference.classify_text(text).unwrap();
        assert_eq!(record["positive"].as_bool().unwrap(), positive);
        assert_eq!(record["fraction"].as_f64().unwrap(), fraction);
        assert_eq!(record["label"], reference.class_name(positive));

        radclass_baseline_free(handle);
    }
}

#[test]
fn missing_files_report_io_with_a_message() {
    unsafe {
        let mut handle: *mut RadclassModel = ptr::null_mut();
        let path = CString::new("/nonexistent/model.json").unwrap();
        let status = radclass_model_load(path.as_ptr(), &mut handle);
        assert_eq!(status, RadclassStatus::Io);
        assert!(handle.is_null());
        assert!(last_error().contains("/nonexistent/model.json"));
    }
}

#[test]
fn malformed_artifacts_report_parse() {
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"schema_version\": 1, \"task\":").unwrap();
    unsafe {
        let mut handle: *mut RadclassModel = ptr::null_mut();
        let status = radclass_model_load(c_path(&path).as_ptr(), &mut handle);
        assert_eq!(status, RadclassStatus::Parse);
    }
}

#[test]
fn null_and_invalid_arguments_are_rejected() {
    let dir = tempfile::TempDir::new().unwrap();
    let (model_path, _, _) = artifacts(dir.path());
    unsafe {
        let mut handle: *mut RadclassModel = ptr::null_mut();
        assert_eq!(
            radclass_model_load(ptr::null(), &mut handle),
            RadclassStatus::NullArgument
        );
        assert_eq!(
            radclass_model_load(c_path(&model_path).as_ptr(), ptr::null_mut()),
            RadclassStatus::NullArgument
        );

        let status = radclass_model_load(c_path(&model_path).as_ptr(), &mut handle);
        assert_eq!(status, RadclassStatus::Ok);

        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(
            radclass_model_predict_json(ptr::null(), ptr::null(), &mut out),
            RadclassStatus::NullArgument
        );
        assert_eq!(
            radclass_model_predict_json(handle, ptr::null(), &mut out),
            RadclassStatus::NullArgument
        );

        // 0xFF can never start a UTF-8 sequence.
        let bad = CString::new(vec![0xFFu8]).unwrap();
        assert_eq!(
            radclass_model_predict_json(handle, bad.as_ptr(), &mut out),
            RadclassStatus::InvalidUtf8
        );
        assert!(last_error().contains("UTF-8"));

        radclass_model_free(handle);
        radclass_model_free(ptr::null_mut());
        radclass_string_free(ptr::null_mut());
    }
}

#[test]
fn the_generated_header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("radclass.h");
    let text = std::fs::read_to_string(&header).expect("build script wrote the header");
    for symbol in [
        "RADCLASS_H",
        "radclass_model_load",
        "radclass_model_free",
        "radclass_model_predict_json",
        "radclass_model_info_json",
        "radclass_baseline_load",
        "radclass_baseline_classify_json",
        "radclass_string_free",
        "radclass_last_error",
        "RadclassStatus",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
