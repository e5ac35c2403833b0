use std::ffi::{CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use proto_curriculum::config::PipelineConfig;
use proto_curriculum::data_io::{generate_synthetic, load_indices, save_embeddings, SyntheticSpec};
use proto_curriculum::pipeline::{self, epoch_file_name, EpochSelection, EPOCH_DIR};
use proto_curriculum_ffi::*;

/// Runs the pipeline through `schedule` for `clusters * per_cluster` samples.
fn artifacts(clusters: usize, per_cluster: usize, epochs: usize) -> (tempfile::TempDir, PipelineConfig) {
    let tmp = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&SyntheticSpec {
        n_clusters: clusters,
        samples_per_cluster: per_cluster,
        dim: 8,
        separation: 20.0,
        spread: 1.0,
        seed: 1,
    })
    .unwrap();
    save_embeddings(&tmp.path().join("emb.bin"), &m).unwrap();
    let cfg_path = tmp.path().join("config.json");
    fs::write(
        &cfg_path,
        format!(
            r#"{{"embeddings_path": "emb.bin", "output_dir": "out", "master_seed": 9,
                "kmeans": {{"k": {clusters}}}, "schedule": {{"total_epochs": {epochs}}}}}"#
        ),
    )
    .unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    pipeline::run_cluster(&cfg).unwrap();
    pipeline::run_score(&cfg).unwrap();
    pipeline::run_schedule(&cfg).unwrap();
    (tmp, cfg)
}

fn open(dir: &Path) -> Result<*mut PcSampler, (PcStatus, String)> {
    let path = CString::new(dir.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { pc_sampler_open(path.as_ptr(), &mut handle) };
    if status == PcStatus::Ok {
        Ok(handle)
    } else {
        assert!(handle.is_null());
        Err((status, last_error()))
    }
}

fn last_error() -> String {
    let p = pc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn indices(s: *const PcSampler, epoch: u64) -> Result<Vec<u64>, PcStatus> {
    let mut len = 0u64;
    let status = unsafe { pc_sampler_epoch_len(s, epoch, &mut len) };
    if status != PcStatus::Ok {
        return Err(status);
    }
    let mut buf = vec![0u64; len as usize];
    let mut written = 0usize;
    match unsafe { pc_sampler_epoch_indices(s, epoch, buf.as_mut_ptr(), buf.len(), &mut written) } {
        PcStatus::Ok => {
            assert_eq!(written, buf.len());
            Ok(buf)
        }
        other => Err(other),
    }
}

#[test]
fn info_reflects_the_schedule() {
    let (_tmp, cfg) = artifacts(3, 50, 12);
    let s = open(&cfg.output_dir).unwrap();
    let mut info = PcSamplerInfo {
        n_samples: 0,
        total_epochs: 0,
        n_draws: 0,
        master_seed: 0,
        mode: PcScheduleMode::EffectiveSize,
        tau_start: 0.0,
        tau_end: 0.0,
    };
    assert_eq!(unsafe { pc_sampler_info(s, &mut info) }, PcStatus::Ok);
    assert_eq!(info.n_samples, 150);
    assert_eq!(info.total_epochs, 12);
    assert_eq!(info.n_draws, 150);
    assert_eq!(info.master_seed, 9);
    assert_eq!(info.mode, PcScheduleMode::TauRange);
    assert_eq!((info.tau_start, info.tau_end), (0.07, 0.6));
    assert_eq!(pc_format_version(), 1);
    unsafe { pc_sampler_free(s) };
}

#[test]
fn epoch_indices_match_cli_files() {
    let (_tmp, cfg) = artifacts(10, 1000, 20);
    let s = open(&cfg.output_dir).unwrap();
    for epoch in [0usize, 10, 19] {
        pipeline::run_sample(&cfg, EpochSelection::One(epoch)).unwrap();
        let on_disk = load_indices(&cfg.output_dir.join(EPOCH_DIR).join(epoch_file_name(epoch))).unwrap();
        assert_eq!(on_disk.len(), 10_000);
        assert_eq!(indices(s, epoch as u64).unwrap(), on_disk, "epoch {epoch}");
    }
    unsafe { pc_sampler_free(s) };
}

#[test]
fn handle_survives_artifact_removal() {
    let (_tmp, cfg) = artifacts(2, 30, 4);
    let s = open(&cfg.output_dir).unwrap();
    let before = indices(s, 3).unwrap();
    fs::remove_dir_all(&cfg.output_dir).unwrap();
    assert_eq!(indices(s, 3).unwrap(), before);
    unsafe { pc_sampler_free(s) };
    assert_eq!(open(&cfg.output_dir).unwrap_err().0, PcStatus::Io);
}

#[test]
fn errors_are_reported() {
    let empty = tempfile::tempdir().unwrap();
    let (status, message) = open(empty.path()).unwrap_err();
    assert_eq!(status, PcStatus::Io);
    assert!(message.contains("scores.json"), "{message}");

    let (_tmp, cfg) = artifacts(2, 30, 4);
    fs::write(cfg.output_dir.join("schedule.json"), "{").unwrap();
    assert_eq!(open(&cfg.output_dir).unwrap_err().0, PcStatus::Format);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pc_sampler_open(ptr::null(), &mut out) }, PcStatus::NullArgument);
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { pc_sampler_open(bad.as_ptr().cast(), &mut out) },
        PcStatus::InvalidUtf8
    );
    unsafe { pc_sampler_free(ptr::null_mut()) };
}

#[test]
fn epoch_bounds_and_buffers_are_checked() {
    let (_tmp, cfg) = artifacts(2, 30, 4);
    let s = open(&cfg.output_dir).unwrap();
    assert_eq!(indices(s, 4).unwrap_err(), PcStatus::OutOfRange);
    assert!(last_error().contains("out of range"));

    let mut buf = vec![0u64; 10];
    let mut written = 0usize;
    let status = unsafe { pc_sampler_epoch_indices(s, 0, buf.as_mut_ptr(), buf.len(), &mut written) };
    assert_eq!(status, PcStatus::BufferTooSmall);
    assert_eq!(written, 60);
    assert!(buf.iter().all(|&v| v == 0));

    assert_eq!(
        unsafe { pc_sampler_epoch_indices(s, 0, ptr::null_mut(), 0, &mut written) },
        PcStatus::NullArgument
    );
    assert_eq!(
        unsafe { pc_sampler_info(ptr::null(), ptr::null_mut()) },
        PcStatus::NullArgument
    );
    unsafe { pc_sampler_free(s) };
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(Path::parent)
        .unwrap()
        .to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let lib = target_dir().join("libproto_curriculum_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let (tmp, cfg) = artifacts(2, 30, 4);
    let src = tmp.path().join("smoke.c");
    fs::write(
        &src,
        r#"#include <stdio.h>
#include "proto_curriculum.h"

int main(int argc, char **argv) {
    PcSampler *s = NULL;
    if (pc_sampler_open(argv[1], &s) != PC_STATUS_OK) {
        fprintf(stderr, "%s\n", pc_last_error_message());
        return 1;
    }
    PcSamplerInfo info;
    pc_sampler_info(s, &info);
    uint64_t buf[64];
    size_t written = 0;
    PcStatus st = pc_sampler_epoch_indices(s, 1, buf, 64, &written);
    printf("%llu %llu %d %zu %llu\n", (unsigned long long)info.n_samples,
           (unsigned long long)info.total_epochs, (int)st, written, (unsigned long long)buf[0]);
    pc_sampler_free(s);
    return argc == 2 ? 0 : 2;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).arg(&cfg.output_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = open(&cfg.output_dir).unwrap();
    let expected = format!("60 4 0 60 {}\n", indices(s, 1).unwrap()[0]);
    unsafe { pc_sampler_free(s) };
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}
