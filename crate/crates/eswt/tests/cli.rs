use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eswt::checkpoint;
use eswt::config::RunConfig;
use eswt::ppm;
use eswt_core::model::{EswtModel, ModelConfig};
use eswt_core::nn::{EntryMut, Module};
use eswt_core::train::StageSpec;
use eswt_core::{Shape, Tensor};
use serde_json::Value;

fn eswt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eswt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A two-stage run small enough for a test.
fn quick_config(dir: &Path, stage2_lr: f64) -> PathBuf {
    let mut c = RunConfig::desk();
    c.train.iters = 8;
    c.train.batch = 2;
    c.train.patch = 8;
    c.train.stages = [StageSpec::new(0.5, (4, 4), 5e-4, 5e-5).unwrap(), StageSpec::new(0.5, (8, 2), stage2_lr, stage2_lr).unwrap()]
        .iter()
        .map(|st| eswt::config::StageSection {
            fraction: st.fraction,
            window: [st.window.h, st.window.w],
            lr_start: st.lr_start,
            lr_end: st.lr_end,
        })
        .collect();
    c.data.synth = Some(eswt::config::SynthSection { count: 4, size: 32, seed: 3 });
    let path = dir.join("run.json");
    std::fs::write(&path, c.to_json()).unwrap();
    path
}

fn image(h: usize, w: usize) -> Tensor<f32> {
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| ((y * 7 + x * 3 + c * 50) % 256) as f32 / 255.0)
}

#[test]
fn profile_reports_paper_totals() {
    let o = eswt(&["profile", "paper-x4", "--input-size", "3x256x256", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["params"], 589_512);
    let flops = v["flops"].as_u64().unwrap() as f64;
    assert!((flops / 38.20e9 - 1.0).abs() < 0.05);
    let macs: u64 = v["breakdown"].as_array().unwrap().iter().map(|l| l["macs"].as_u64().unwrap()).sum();
    assert_eq!(macs, v["total_macs"].as_u64().unwrap());
    let table = eswt(&["profile", "desk", "--input-size", "3x32x32", "--bench", "--trials", "1"]);
    assert!(table.status.success());
    assert!(stdout(&table).contains("latency"));
    assert_eq!(eswt(&["profile", "desk", "--input-size", "3x0x4"]).status.code(), Some(2));
}

#[test]
fn train_writes_outputs_and_resumes_into_stage_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 5e-5);
    let out = dir.path().join("out");
    let o = eswt(&["train", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["final.ckpt", "metrics.csv", "stage1.ckpt", "stage2.ckpt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), "iter,stage,window_h,window_w,lr,loss");
    assert_eq!(metrics.lines().count(), 9);

    let resumed = dir.path().join("resumed");
    let o = eswt(&["train", s(&cfg), "--out", s(&resumed), "--resume", s(&out.join("stage1.ckpt"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = std::fs::read_to_string(resumed.join("metrics.csv")).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("4,1,8,2,5e-5,"), "{}", rows[0]);
    // the resumed run ends where the uninterrupted one did
    assert_eq!(std::fs::read(resumed.join("final.ckpt")).unwrap(), std::fs::read(out.join("final.ckpt")).unwrap());
}

#[test]
fn bad_configs_exit_2_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ \"model\": { ").unwrap();
    let o = eswt(&["train", s(&broken), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let mut v: Value = serde_json::from_str(&RunConfig::desk().to_json()).unwrap();
    v["train"]["adam"]["beta3"] = 0.5.into();
    std::fs::write(&broken, v.to_string()).unwrap();
    let o = eswt(&["train", s(&broken), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.adam.beta3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn divergence_exits_3_and_names_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 1e30);
    let out = dir.path().join("out");
    let o = eswt(&["train", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage1.ckpt"), "{}", stderr(&o));
    assert!(!out.join("final.ckpt").exists());
}

fn saved_model(dir: &Path) -> PathBuf {
    let path = dir.join("m.ckpt");
    checkpoint::save(&path, &EswtModel::init(ModelConfig::desk(), 4).unwrap(), 0, 0).unwrap();
    path
}

#[test]
fn infer_shapes_determinism_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ck = saved_model(dir.path());
    let input = dir.path().join("in.ppm");
    for (h, w) in [(18, 24), (17, 23)] {
        ppm::write(&input, &image(h, w)).unwrap();
        let (a, b) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
        for out in [&a, &b] {
            let o = eswt(&["infer", s(&ck), "--in", s(&input), "--out", s(out), "--scale", "2"]);
            assert!(o.status.success(), "{}", stderr(&o));
        }
        assert_eq!(ppm::read(&a).unwrap().shape(), Shape::new(1, 3, 2 * h, 2 * w));
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let out = dir.path().join("never.ppm");
    assert_eq!(eswt(&["infer", s(&ck), "--in", s(&input), "--out", s(&out), "--scale", "3"]).status.code(), Some(2));
    std::fs::write(&input, b"P3\n1 1\n255\n0 0 0\n").unwrap();
    assert_eq!(eswt(&["infer", s(&ck), "--in", s(&input), "--out", s(&out)]).status.code(), Some(2));
    std::fs::write(&ck, b"ESWTCKPT\x01").unwrap();
    assert_eq!(eswt(&["infer", s(&ck), "--in", s(&input), "--out", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn eval_rows_baseline_and_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("hr");
    std::fs::create_dir(&data).unwrap();
    ppm::write(&data.join("one.ppm"), &image(20, 16)).unwrap();
    let ck = saved_model(dir.path());
    let o = eswt(&["eval", s(&ck), "--dataset", s(&data), "--scale", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "image,psnr_db,ssim,bicubic_psnr_db,bicubic_ssim,psnr_sentinel");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("one.ppm,") && lines[2].starts_with("mean,"));

    // a zero network around a mean shift equal to a flat image reproduces
    // that image exactly, as does bicubic
    let grey = 128.0 / 255.0;
    let mut m = EswtModel::<f32>::init(ModelConfig { rgb_mean: [grey as f64; 3], ..ModelConfig::desk() }, 0).unwrap();
    m.visit_mut("", &mut |_, e| {
        if let EntryMut::Param(p) = e {
            p.value.fill(0.0);
        }
    });
    checkpoint::save(&ck, &m, 0, 0).unwrap();
    ppm::write(&data.join("one.ppm"), &Tensor::full(Shape::new(1, 3, 16, 16), grey)).unwrap();
    let o = eswt(&["eval", s(&ck), "--dataset", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("one.ppm,99.0000,1.000000,99.0000,") && row.ends_with(",1"), "{row}");
}

#[test]
fn bench_window_rows() {
    let o = eswt(&["bench-window", "--grid", "C=4,8;HW=8,16;win=4x1,8x2", "--trials", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.contains(&"omega_shift_macs") && header.contains(&"latency_strip_ms"));
    let rows: Vec<Vec<u64>> = lines.map(|l| l.split(',').take(10).map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!(r[7] < r[6]);
        assert_eq!((r[6], r[7]), (r[8], r[9]));
    }
    assert_eq!(eswt(&["bench-window", "--grid", "C=4;HW=8;win=3x1"]).status.code(), Some(2));
}

#[test]
fn init_config_is_a_valid_run_config() {
    let o = eswt(&["init-config"]);
    assert!(o.status.success());
    RunConfig::parse(&stdout(&o), Path::new("stdout")).unwrap();
}
