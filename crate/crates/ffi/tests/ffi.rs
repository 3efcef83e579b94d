use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;

use mwad_core::dataset::NormalizationState;
use mwad_core::model::{ModelSpec, MultiWindowModel, TargetMode};
use mwad_core::numeric::Tensor;
use mwad_core::scoring::score_series;
use mwad_core::training::Checkpoint;
use mwad_ffi::*;

fn tiny_checkpoint(dir: &Path) -> (PathBuf, Checkpoint) {
    let mut spec = ModelSpec::new(3);
    spec.w1 = 4;
    spec.w2 = 3;
    spec.hidden = 4;
    let model = MultiWindowModel::init(&spec, 5).unwrap();
    let ck = Checkpoint::new(
        model,
        NormalizationState {
            mins: vec![0.0, -2.0, 10.0],
            maxs: vec![1.0, 2.0, 20.0],
        },
        vec!["a".into(), "b".into(), "c".into()],
        5,
        "target_mode = reshaped\n".into(),
    )
    .unwrap();
    let path = dir.join("tiny.mwad");
    ck.save(&path).unwrap();
    (path, ck)
}

fn raw_rows(m: usize) -> Vec<f64> {
    (0..m)
        .flat_map(|t| {
            let t = t as f64;
            [(t / 5.0).sin() * 0.5 + 0.5, (t / 7.0).cos() * 2.0, 15.0 + (t / 3.0).sin() * 4.0]
        })
        .collect()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mwad_last_error_message()) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut MwadDetector {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut det = std::ptr::null_mut();
    assert_eq!(unsafe { mwad_detector_load(c.as_ptr(), &mut det) }, MwadStatus::Ok);
    assert!(!det.is_null());
    det
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mwad_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn scores_match_the_core_library() {
    let dir = tempfile::tempdir().unwrap();
    let (path, ck) = tiny_checkpoint(dir.path());
    let det = load(&path);
    let mut n = 0usize;
    let mut prefix = 0usize;
    unsafe {
        assert_eq!(mwad_detector_feature_count(det, &mut n), MwadStatus::Ok);
        assert_eq!(mwad_detector_unscored_prefix(det, &mut prefix), MwadStatus::Ok);
    }
    assert_eq!((n, prefix), (3, 6));

    let m = 40;
    let rows = raw_rows(m);
    let mut out = vec![0.0; m];
    let mut written = 0usize;
    let st = unsafe { mwad_detector_score(det, rows.as_ptr(), m, 3, out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, MwadStatus::Ok, "{}", last_error());
    assert_eq!(written, m - prefix);

    let x = ck.normalization.apply(&Tensor::from_vec(m, 3, rows.clone()).unwrap()).unwrap();
    let expected = score_series(&x, &ck.model, TargetMode::Reshaped).unwrap();
    assert_eq!(&out[..written], &expected[..]);

    let mut small = vec![0.0; 3];
    let st = unsafe { mwad_detector_score(det, rows.as_ptr(), m, 3, small.as_mut_ptr(), 3, &mut written) };
    assert_eq!(st, MwadStatus::BufferTooSmall);
    assert_eq!(written, m - prefix);

    let st = unsafe { mwad_detector_score(det, rows.as_ptr(), m, 2, out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, MwadStatus::Dimension);
    assert!(last_error().starts_with("dimension"), "{}", last_error());

    let st = unsafe { mwad_detector_score(det, rows.as_ptr(), 5, 3, out.as_mut_ptr(), out.len(), &mut written) };
    assert_eq!(st, MwadStatus::InsufficientLength);

    unsafe { mwad_detector_free(det) };
}

#[test]
fn load_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = tiny_checkpoint(dir.path());
    let mut det = std::ptr::null_mut();

    let missing = CString::new(dir.path().join("none.mwad").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mwad_detector_load(missing.as_ptr(), &mut det) }, MwadStatus::Io);
    assert!(det.is_null());
    assert!(!last_error().is_empty());

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[8] += 1;
    let bumped = dir.path().join("bumped.mwad");
    std::fs::write(&bumped, &bytes).unwrap();
    let c = CString::new(bumped.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mwad_detector_load(c.as_ptr(), &mut det) }, MwadStatus::Incompatible);

    let truncated = dir.path().join("short.mwad");
    std::fs::write(&truncated, &std::fs::read(&path).unwrap()[..40]).unwrap();
    let c = CString::new(truncated.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mwad_detector_load(c.as_ptr(), &mut det) }, MwadStatus::Format);

    assert_eq!(unsafe { mwad_detector_load(std::ptr::null(), &mut det) }, MwadStatus::NullPointer);
    let mut n = 0;
    assert_eq!(unsafe { mwad_detector_feature_count(std::ptr::null(), &mut n) }, MwadStatus::NullPointer);
    unsafe { mwad_detector_free(std::ptr::null_mut()) };
}

#[test]
fn threshold_classify_and_metrics() {
    let scores: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut r = MwadThresholdRange::default();
    assert_eq!(unsafe { mwad_threshold_range(scores.as_ptr(), scores.len(), &mut r) }, MwadStatus::Ok);
    assert!((r.slide_step - 0.01).abs() <= 1e-15);
    assert!((r.lower - 0.25).abs() <= 1e-15 && (r.upper - 0.75).abs() <= 1e-15);
    assert_eq!((r.candidate_count, r.degenerate), (51, 0));
    assert_eq!(unsafe { mwad_threshold_range(scores.as_ptr(), 0, &mut r) }, MwadStatus::InvalidArgument);

    let mut pred = vec![9u8; 2];
    assert_eq!(unsafe { mwad_classify([0.1, 0.9].as_ptr(), 2, 0.5, pred.as_mut_ptr()) }, MwadStatus::Ok);
    assert_eq!(pred, vec![0, 1]);

    let mut m = MwadMetrics::default();
    let p = [1u8, 1, 0, 0];
    let a = [1u8, 0, 1, 0];
    assert_eq!(unsafe { mwad_metrics(p.as_ptr(), a.as_ptr(), 4, &mut m) }, MwadStatus::Ok);
    assert_eq!((m.tp, m.fp, m.fn_, m.tn), (1, 1, 1, 1));
    assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
    assert_eq!(unsafe { mwad_metrics(std::ptr::null(), a.as_ptr(), 4, &mut m) }, MwadStatus::NullPointer);
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mwad.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["mwad_detector_load", "mwad_detector_score", "mwad_threshold_range", "mwad_metrics", "mwad_last_error_message"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    if !have_cc() {
        eprintln!("no C compiler found; header syntax check skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mwad.h\"\n\
         int main(void) {\n\
           MwadThresholdRange r;\n\
           double s[3] = {0.0, 2.0, 4.0};\n\
           return mwad_threshold_range(s, 3, &r) == MWAD_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Link and run against the shared library when cargo built it.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(Path::parent).unwrap();
    if !lib_dir.join("libmwad_ffi.so").exists() {
        eprintln!("shared library not found; link check skipped");
        return;
    }
    let bin = dir.path().join("use");
    let out = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .arg("-L")
        .arg(lib_dir)
        .args(["-lmwad_ffi", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let status = Command::new(&bin).env("LD_LIBRARY_PATH", lib_dir).status().unwrap();
    assert!(status.success());
}
