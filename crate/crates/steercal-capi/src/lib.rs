//! C ABI for the calibration toolkit.
//!
//! Opaque handles, integer status codes, and a thread-local error message.
//! The matching header lives at `include/steercal.h` and is kept in sync by
//! a test that compares the exported symbol set against the declarations.
//!
//! Conventions: poses are passed as flat `n_joints * 2` coordinate arrays
//! (x, y interleaved) in pose-centric units with a per-joint visibility
//! byte array; rotations are 3-component Rodrigues vectors.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use steercal::calib::{calibrate_pair, CalibError, PairObservations};
use steercal::io::{self, Detections, PairReport};
use steercal::pose::{CoordFrame2D, Pose2D};
use steercal::rotation::RotationSO3;
use steercal::skeleton::Skeleton;
use steercal::steerer::checkpoint::load as load_checkpoint;
use steercal::steerer::{complete_keypoints, forward, SteererParams};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    InvalidArgument = 1,
    IoError = 2,
    FormatError = 3,
    DegenerateInput = 4,
    CalibrationFailed = 5,
    InternalError = 6,
}

/// Summary of a two-view calibration for C callers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScPairSummary {
    pub success: u8,
    pub attempts_used: u32,
    pub median_reproj_px: f64,
    pub rotation_rodrigues: [f64; 3],
    pub translation_direction: [f64; 3],
}

/// Opaque model handle: a loaded checkpoint plus its skeleton.
pub struct ScModel {
    params: SteererParams,
    skeleton: Skeleton,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: ScStatus, message: &str) -> ScStatus {
    set_error(message);
    status
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread; valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, ScStatus> {
    if ptr.is_null() {
        return Err(fail(ScStatus::InvalidArgument, &format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(ScStatus::InvalidArgument, &format!("{name} is not UTF-8")))
}

/// Loads a checkpoint; the handle must be released with `sc_model_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_model_load(
    path: *const c_char,
    out_model: *mut *mut ScModel,
) -> ScStatus {
    if out_model.is_null() {
        return fail(ScStatus::InvalidArgument, "out_model is null");
    }
    let path = match cstr_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_checkpoint(Path::new(path)) {
        Ok(ckpt) => {
            let model = Box::new(ScModel {
                params: ckpt.params,
                skeleton: ckpt.skeleton,
            });
            *out_model = Box::into_raw(model);
            ScStatus::Ok
        }
        Err(e) => fail(ScStatus::FormatError, &e.to_string()),
    }
}

/// Releases a model handle; accepts null.
///
/// # Safety
/// `model` must come from `sc_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_model_free(model: *mut ScModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of joints the model expects.
///
/// # Safety
/// `model` must be a live handle from `sc_model_load`.
#[no_mangle]
pub unsafe extern "C" fn sc_model_n_joints(model: *const ScModel) -> u32 {
    if model.is_null() {
        return 0;
    }
    (*model).params.config.n_joints as u32
}

unsafe fn pose_from_raw(
    coords: *const f64,
    visible: *const u8,
    n_joints: usize,
) -> Result<Pose2D, ScStatus> {
    if coords.is_null() || visible.is_null() {
        return Err(fail(ScStatus::InvalidArgument, "coords or visible is null"));
    }
    let coords = std::slice::from_raw_parts(coords, n_joints * 2);
    let visible = std::slice::from_raw_parts(visible, n_joints);
    Ok(Pose2D::new(
        (0..n_joints).map(|j| [coords[2 * j], coords[2 * j + 1]]).collect(),
        visible.iter().map(|&v| v != 0).collect(),
        CoordFrame2D::PoseCentric,
    ))
}

/// Steers a pose-centric pose by a rotation, writing `n_joints * 2` output
/// coordinates.
///
/// # Safety
/// All pointers must be valid for the model's joint count. `rodrigues` has
/// three components; `out_coords` has room for `n_joints * 2` values.
#[no_mangle]
pub unsafe extern "C" fn sc_model_steer(
    model: *const ScModel,
    coords: *const f64,
    visible: *const u8,
    rodrigues: *const f64,
    out_coords: *mut f64,
) -> ScStatus {
    if model.is_null() || rodrigues.is_null() || out_coords.is_null() {
        return fail(ScStatus::InvalidArgument, "null pointer argument");
    }
    let model = &*model;
    let n = model.params.config.n_joints;
    let pose = match pose_from_raw(coords, visible, n) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let rod = std::slice::from_raw_parts(rodrigues, 3);
    let rotation = RotationSO3 {
        rodrigues: [rod[0], rod[1], rod[2]],
    };
    let result = catch_unwind(AssertUnwindSafe(|| forward(&model.params, &pose, &rotation)));
    match result {
        Ok(Ok(out)) => {
            let dst = std::slice::from_raw_parts_mut(out_coords, n * 2);
            for (j, c) in out.coords.iter().enumerate() {
                dst[2 * j] = c[0];
                dst[2 * j + 1] = c[1];
            }
            ScStatus::Ok
        }
        Ok(Err(e)) => fail(ScStatus::InvalidArgument, &e.to_string()),
        Err(_) => fail(ScStatus::InternalError, "panic in sc_model_steer"),
    }
}

/// Fills occluded joints by steering with the identity rotation.
///
/// # Safety
/// Pointer contracts as in `sc_model_steer`.
#[no_mangle]
pub unsafe extern "C" fn sc_model_complete(
    model: *const ScModel,
    coords: *const f64,
    visible: *const u8,
    keep_visible: u8,
    out_coords: *mut f64,
) -> ScStatus {
    if model.is_null() || out_coords.is_null() {
        return fail(ScStatus::InvalidArgument, "null pointer argument");
    }
    let model = &*model;
    let n = model.params.config.n_joints;
    let pose = match pose_from_raw(coords, visible, n) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        complete_keypoints(&model.params, &pose, keep_visible != 0)
    }));
    match result {
        Ok(Ok(out)) => {
            let dst = std::slice::from_raw_parts_mut(out_coords, n * 2);
            for (j, c) in out.coords.iter().enumerate() {
                dst[2 * j] = c[0];
                dst[2 * j + 1] = c[1];
            }
            ScStatus::Ok
        }
        Ok(Err(e)) => fail(ScStatus::DegenerateInput, &e.to_string()),
        Err(_) => fail(ScStatus::InternalError, "panic in sc_model_complete"),
    }
}

/// Calibrates two views of a detections file. `config_json` may be null for
/// defaults; `report_path` may be null to skip writing the report.
///
/// # Safety
/// String pointers must be NUL-terminated; `out_summary` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sc_calibrate_pair_file(
    model: *const ScModel,
    detections_path: *const c_char,
    view_a: u32,
    view_b: u32,
    config_json: *const c_char,
    report_path: *const c_char,
    out_summary: *mut ScPairSummary,
) -> ScStatus {
    if model.is_null() || out_summary.is_null() {
        return fail(ScStatus::InvalidArgument, "null pointer argument");
    }
    let model = &*model;
    let path = match cstr_arg(detections_path, "detections_path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    let config = if config_json.is_null() {
        steercal::calib::CalibConfig::default()
    } else {
        let text = match cstr_arg(config_json, "config_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serde_json::from_str(text) {
            Ok(c) => c,
            Err(e) => return fail(ScStatus::FormatError, &format!("config_json: {e}")),
        }
    };
    let detections = match io::read_detections(Path::new(path)) {
        Ok(d) => d,
        Err(e) => return fail(ScStatus::IoError, &e.to_string()),
    };
    let (a, b) = (view_a as usize, view_b as usize);
    if a >= detections.views.len() || b >= detections.views.len() || a == b {
        return fail(
            ScStatus::InvalidArgument,
            &format!("views {a},{b} out of range for {} views", detections.views.len()),
        );
    }
    let obs = PairObservations {
        frames: detections
            .frames
            .iter()
            .map(|f| {
                (
                    f[a].iter().map(Detections::pose).collect(),
                    f[b].iter().map(Detections::pose).collect(),
                )
            })
            .collect(),
        intrinsics_a: detections.views[a].intrinsics,
        intrinsics_b: detections.views[b].intrinsics,
    };
    let run = catch_unwind(AssertUnwindSafe(|| {
        calibrate_pair(&obs, &model.params, &model.skeleton, &config)
    }));
    let (result, status) = match run {
        Ok(Ok(result)) => (result, ScStatus::Ok),
        Ok(Err(CalibError::CalibrationFailed { best, .. })) => {
            set_error("calibration failed: reprojection gate not reached");
            (*best, ScStatus::CalibrationFailed)
        }
        Ok(Err(e)) => return fail(ScStatus::InvalidArgument, &e.to_string()),
        Err(_) => return fail(ScStatus::InternalError, "panic in sc_calibrate_pair_file"),
    };
    if !report_path.is_null() {
        let rp = match cstr_arg(report_path, "report_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let report = PairReport::from_result(&result, a, b, &config);
        if let Err(e) = io::write_pair_report(Path::new(rp), &report) {
            return fail(ScStatus::IoError, &e.to_string());
        }
    }
    *out_summary = ScPairSummary {
        success: result.success as u8,
        attempts_used: result.attempts_used as u32,
        median_reproj_px: result.median_reproj_px,
        rotation_rodrigues: result.relative_pose.rotation.rodrigues,
        translation_direction: result.relative_pose.translation,
    };
    status
}

#[cfg(test)]
mod tests {
    use super::*;
    use steercal::skeleton::quadruped_skeleton;
    use steercal::steerer::checkpoint::save as save_checkpoint;
    use steercal::steerer::{init_params, SteererConfig};

    fn checkpoint_file(dir: &Path) -> std::path::PathBuf {
        let skeleton = quadruped_skeleton();
        let config = SteererConfig {
            n_joints: 16,
            token_dim: 16,
            n_encoder_layers: 1,
            n_attention_heads: 4,
            feedforward_dim: 32,
            dropout: 0.0,
        };
        let params = init_params(&config, &skeleton.hash(), 1).unwrap();
        let path = dir.join("model.sckp");
        save_checkpoint(&path, &params, &skeleton, None, None).unwrap();
        path
    }

    #[test]
    fn load_steer_complete_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = checkpoint_file(dir.path());
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut model: *mut ScModel = std::ptr::null_mut();
        unsafe {
            assert_eq!(sc_model_load(c_path.as_ptr(), &mut model), ScStatus::Ok);
            assert_eq!(sc_model_n_joints(model), 16);
            let coords: Vec<f64> = (0..32).map(|i| (i as f64) * 0.01).collect();
            let visible = vec![1u8; 16];
            let rodrigues = [0.1, 0.2, -0.1];
            let mut out = vec![0.0f64; 32];
            assert_eq!(
                sc_model_steer(
                    model,
                    coords.as_ptr(),
                    visible.as_ptr(),
                    rodrigues.as_ptr(),
                    out.as_mut_ptr()
                ),
                ScStatus::Ok
            );
            assert!(out.iter().all(|v| v.is_finite()));
            let mut completed = vec![0.0f64; 32];
            assert_eq!(
                sc_model_complete(
                    model,
                    coords.as_ptr(),
                    visible.as_ptr(),
                    1,
                    completed.as_mut_ptr()
                ),
                ScStatus::Ok
            );
            // keep_visible on a fully visible pose: verbatim passthrough.
            assert_eq!(completed, coords);
            sc_model_free(model);
        }
    }

    #[test]
    fn bad_path_reports_error() {
        let mut model: *mut ScModel = std::ptr::null_mut();
        let c_path = CString::new("/nonexistent/model.sckp").unwrap();
        unsafe {
            let status = sc_model_load(c_path.as_ptr(), &mut model);
            assert_eq!(status, ScStatus::FormatError);
            let msg = CStr::from_ptr(sc_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());
        }
    }

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            assert_eq!(
                sc_model_load(std::ptr::null(), std::ptr::null_mut()),
                ScStatus::InvalidArgument
            );
            assert_eq!(sc_model_n_joints(std::ptr::null()), 0);
            sc_model_free(std::ptr::null_mut()); // must be a no-op
        }
    }

    #[test]
    fn header_declares_every_exported_symbol() {
        let header = include_str!("../include/steercal.h");
        let source = include_str!("lib.rs");
        let mut exported = Vec::new();
        for chunk in source.split("pub extern \"C\" fn ").skip(1) {
            let name: String = chunk
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .collect();
            exported.push(name);
        }
        for chunk in source.split("pub unsafe extern \"C\" fn ").skip(1) {
            let name: String = chunk
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .collect();
            exported.push(name);
        }
        assert!(!exported.is_empty());
        for name in &exported {
            assert!(
                header.contains(&format!("{name}(")),
                "header missing declaration for {name}"
            );
        }
        // And the header does not declare functions that do not exist.
        for line in header.lines() {
            if let Some(pos) = line.find("sc_") {
                let name: String = line[pos..]
                    .chars()
                    .take_while(|c| c.is_alphanumeric() || *c == '_')
                    .collect();
                if line.trim_start().starts_with("//") || !line.contains('(') {
                    continue;
                }
                assert!(
                    exported.contains(&name) || name == "sc_" || !line.contains(");"),
                    "header declares unknown function {name}"
                );
            }
        }
    }
}
