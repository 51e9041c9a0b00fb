//! End-to-end exercises of the `vlan` binary: subcommands, file formats and
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn vlan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlan"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vlan_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.cfg");
    std::fs::write(
        &path,
        "# desk-scale smoke configuration\n\
         model.c = 16\n\
         model.heads = 2\n\
         model.depth = 1\n\
         model.n = 8\n\
         backbone.widths = 4,8,16\n\
         backbone.strides = 2,2,2\n\
         backbone.blocks = 1,1,1\n\
         render.height = 16\n\
         render.width = 64\n\
         render.max_len = 8\n\
         data.corpus_size = 60\n\
         data.max_word_len = 7\n\
         train.batch_size = 4\n\
         train.total_steps = 30\n\
         train.lr = 1e-3\n\
         train.save_every = 0\n\
         eval.n_words = 4\n\
         eval.latency_warmup = 2\n\
         eval.latency_reps = 10\n",
    )
    .unwrap();
    path
}

#[test]
fn full_pipeline_smoke() {
    let dir = tmp_dir("pipe");
    let cfg = tiny_config(&dir);

    // Dataset rendering writes both splits plus manifests and a snapshot.
    let out_ds = dir.join("ds");
    let status = vlan()
        .args(["render-dataset", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_ds)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_ds.join("train.vlds").exists());
    assert!(out_ds.join("test.vlds").exists());
    assert!(out_ds.join("test.vlds.manifest").exists());
    assert!(out_ds.join("config.snapshot").exists());
    let magic = std::fs::read(out_ds.join("train.vlds")).unwrap();
    assert_eq!(&magic[..4], b"VLDS");

    // Occlusion over a dataset file.
    let out_occ = dir.join("occ");
    let status = vlan()
        .args(["occlude", "--degree", "heavy", "--input"])
        .arg(out_ds.join("test.vlds"))
        .args(["--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_occ)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_occ.join("test_heavy.vlds").exists());

    // Training produces metrics, a checkpoint and a snapshot.
    let out_train = dir.join("train");
    let status = vlan()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_train)
        .status()
        .unwrap();
    assert!(status.success());
    let metrics = std::fs::read_to_string(out_train.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,stage,L,L_rec,L_mas,L_rem,grad_norm,lr"));
    assert_eq!(metrics.lines().count(), 31, "header plus one line per step");
    let ckpt = out_train.join("ckpt_000030.vlan");
    assert!(ckpt.exists());
    let magic = std::fs::read(&ckpt).unwrap();
    assert_eq!(&magic[..4], b"VLAN");

    // Evaluation from the checkpoint (config comes from the embedded
    // snapshot) with curves.
    let out_eval = dir.join("eval");
    let status = vlan()
        .args(["eval", "--emit-curves", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(&out_eval)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_eval.join("summary.txt").exists());
    let curves = std::fs::read_to_string(out_eval.join("curves.csv")).unwrap();
    assert!(curves.starts_with("step,clean,weak,heavy,occluded"));

    // Bench prints the protocol and writes a CSV.
    let out_bench = dir.join("bench");
    let output = vlan()
        .args(["bench", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(&out_bench)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("latency protocol"), "{text}");
    assert!(text.contains("extra inference parameters vs baseline: 0"), "{text}");

    // Mask inspection writes one PGM per character index.
    let out_mask = dir.join("masks");
    let status = vlan()
        .args(["inspect-mask", "--count", "2", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out")
        .arg(&out_mask)
        .status()
        .unwrap();
    assert!(status.success());
    let pgm = std::fs::read(out_mask.join("0_1.pgm")).unwrap();
    assert_eq!(&pgm[..3], b"P5\n");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_error_exits_one() {
    let dir = tmp_dir("cfgerr");
    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "bogus.key = 1\n").unwrap();
    let output = vlan()
        .args(["train", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("bogus.key"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_checkpoint_is_an_error() {
    let dir = tmp_dir("missing");
    let output = vlan()
        .args(["eval"])
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn gradcheck_subcommand_passes() {
    let output = vlan().arg("gradcheck").output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("gradients verified"), "{text}");
}
