use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use dtwn_ffi::*;

const NET: &str = r#"
num_users = 6
seed = 1
bs_positions = [[300.0, 0.0], [0.0, 450.0], [-600.0, 0.0]]
bs_cpu_ghz = [2.6, 1.8, 3.6]
bs_tx_power_dbm = 34.0
mbs_tx_power_dbm = 42.0
num_subchannels = 2
uplink_bandwidth_mhz = 30.0
downlink_bandwidth_mhz = 30.0
noise_dbm = -174.0
path_loss_exponent = 3.0
cell_radius_m = 150.0
twin_samples = [200, 300]
sample_bytes = 3072
cycles_per_sample = 1e6
cycles_per_agg_unit = 1.0
cycles_per_validation_unit = 0.05
tx_factor = 1.0
model_bits = 5e7
block_header_bits = 1000.0
num_producers = 3
"#;

const EXP: &str = r#"
network = "net.toml"
episodes = 2
eval_episodes = 1
[env]
horizon = 3
[maddpg]
hidden = [8]
batch_size = 4
warmup = 4
replay_capacity = 64
"#;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { dtwn_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn load(dir: &Path) -> *mut DtwnExperiment {
    std::fs::write(dir.join("net.toml"), NET).unwrap();
    std::fs::write(dir.join("exp.toml"), EXP).unwrap();
    let mut exp = ptr::null_mut();
    let s = unsafe { dtwn_experiment_load(cstr(&dir.join("exp.toml")).as_ptr(), &mut exp) };
    assert_eq!(s, DtwnStatus::Ok, "{}", last_error());
    assert!(!exp.is_null());
    exp
}

#[test]
fn global_bound() {
    let mut r = 0u64;
    for (theta, want) in [(0.0, 1), (0.5, 2), (0.9, 10)] {
        assert_eq!(unsafe { dtwn_global_iteration_bound(theta, &mut r) }, DtwnStatus::Ok);
        assert_eq!(r, want);
    }
    assert_eq!(unsafe { dtwn_global_iteration_bound(1.0, &mut r) }, DtwnStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { dtwn_global_iteration_bound(0.5, ptr::null_mut()) }, DtwnStatus::NullPointer);
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = ptr::null_mut();
    let missing = cstr(&dir.path().join("nope.toml"));
    assert_eq!(unsafe { dtwn_experiment_load(missing.as_ptr(), &mut exp) }, DtwnStatus::Config);
    assert!(exp.is_null());
    assert!(last_error().contains("nope.toml"));
    assert_eq!(unsafe { dtwn_experiment_load(ptr::null(), &mut exp) }, DtwnStatus::NullPointer);
    unsafe { dtwn_experiment_free(ptr::null_mut()) };
}

#[test]
fn step_environment() {
    let dir = tempfile::tempdir().unwrap();
    let exp = load(dir.path());
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { dtwn_env_new(exp, &mut env) }, DtwnStatus::Ok);
    let mut dims = DtwnEnvDims::default();
    assert_eq!(unsafe { dtwn_env_dims(env, &mut dims) }, DtwnStatus::Ok);
    assert_eq!((dims.num_agents, dims.num_twins, dims.action_dim), (3, 6, 14));
    let mut state = vec![0.0; dims.state_dim];
    assert_eq!(unsafe { dtwn_env_reset(env, 5, state.as_mut_ptr(), 1) }, DtwnStatus::BufferTooSmall);
    assert_eq!(unsafe { dtwn_env_reset(env, 5, state.as_mut_ptr(), state.len()) }, DtwnStatus::Ok);
    let actions = vec![0.0; dims.num_agents * dims.action_dim];
    let mut res = DtwnStepResult::default();
    assert_eq!(
        unsafe { dtwn_env_step(env, actions.as_ptr(), actions.len() - 1, state.as_mut_ptr(), state.len(), &mut res) },
        DtwnStatus::DimensionMismatch
    );
    let mut steps = 0;
    while !res.done {
        let s = unsafe { dtwn_env_step(env, actions.as_ptr(), actions.len(), state.as_mut_ptr(), state.len(), &mut res) };
        assert_eq!(s, DtwnStatus::Ok, "{}", last_error());
        assert!(res.t_iteration > 0.0 && res.mean_reward == -res.t_iteration);
        steps += 1;
    }
    assert_eq!(steps, 3);
    let mut bad = actions.clone();
    bad[0] = f64::NAN;
    assert_eq!(
        unsafe { dtwn_env_step(env, bad.as_ptr(), bad.len(), state.as_mut_ptr(), state.len(), &mut res) },
        DtwnStatus::NonFinite
    );
    unsafe {
        dtwn_env_free(env);
        dtwn_experiment_free(exp);
    }
}

#[test]
fn run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let exp = load(dir.path());
    assert_eq!(unsafe { dtwn_experiment_set_seed(exp, 9) }, DtwnStatus::Ok);
    assert_eq!(unsafe { dtwn_experiment_set_episodes(exp, 2, 1) }, DtwnStatus::Ok);
    let out = cstr(&dir.path().join("out"));
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { dtwn_experiment_run(exp, out.as_ptr(), &mut report) }, DtwnStatus::Ok, "{}", last_error());
    let mut n = 0usize;
    assert_eq!(unsafe { dtwn_report_episodes(report, &mut n) }, DtwnStatus::Ok);
    assert_eq!(n, 2);
    let mut med = 0.0;
    for p in ["learned", "random", "average"] {
        let name = CString::new(p).unwrap();
        assert_eq!(unsafe { dtwn_report_eval_median(report, name.as_ptr(), &mut med) }, DtwnStatus::Ok);
        assert!(med > 0.0);
    }
    let bogus = CString::new("oracle").unwrap();
    assert_eq!(unsafe { dtwn_report_eval_median(report, bogus.as_ptr(), &mut med) }, DtwnStatus::InvalidArgument);
    let mut len = 0usize;
    let mut buf = [0.0; 1];
    assert_eq!(unsafe { dtwn_report_cumulative_cost(report, buf.as_mut_ptr(), 1, &mut len) }, DtwnStatus::BufferTooSmall);
    assert_eq!(len, 2);
    let mut buf = [0.0; 2];
    assert_eq!(unsafe { dtwn_report_cumulative_cost(report, buf.as_mut_ptr(), 2, &mut len) }, DtwnStatus::Ok);
    assert!(buf.iter().all(|c| *c > 0.0));
    assert!(dir.path().join("out/metrics.csv").exists());
    unsafe {
        dtwn_report_free(report);
        dtwn_experiment_free(exp);
    }
}

#[test]
fn null_handles_are_rejected() {
    let mut dims = DtwnEnvDims::default();
    assert_eq!(unsafe { dtwn_env_dims(ptr::null_mut(), &mut dims) }, DtwnStatus::NullPointer);
    assert_eq!(unsafe { dtwn_experiment_set_seed(ptr::null_mut(), 1) }, DtwnStatus::NullPointer);
    assert_eq!(unsafe { dtwn_report_episodes(ptr::null_mut(), ptr::null_mut()) }, DtwnStatus::NullPointer);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dtwn.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.trim().strip_prefix("pub unsafe extern \"C\" fn "))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    for t in ["typedef struct DtwnExperiment DtwnExperiment;", "DTWN_STATUS_OK = 0", "typedef struct DtwnStepResult"] {
        assert!(header.contains(t), "{t}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(&src, "#include \"dtwn.h\"\nint main(void) { DtwnStepResult r; (void)r; return DTWN_STATUS_OK; }\n").unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
