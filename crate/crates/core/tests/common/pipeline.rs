//! Helpers for driving the binary end to end.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_metacog");

/// A small configuration so every verb finishes in seconds.
pub const SMALL: &str = r#"{
  "lw": { "dataset": { "worlds_per_detector": 12 } },
  "full": { "orders": 2, "bootstrap_resamples": 200 }
}"#;

pub fn metacog(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("METACOG_THREADS", t),
        None => cmd.env_remove("METACOG_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub fn ok(args: &[&str], threads: Option<&str>) -> Output {
    let out = metacog(args, threads);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file below `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Run every verb in sequence under `root` and return the outputs.
pub fn pipeline(root: &Path, threads: &str) -> BTreeMap<PathBuf, Vec<u8>> {
    let config = root.join("small.json");
    fs::write(&config, SMALL).unwrap();
    let c = p(&config);
    let common = |out: &Path| -> Vec<String> {
        ["--config", c, "--seed", "7", "--out", p(out), "--particles", "8", "--sweeps", "3", "--detectors", "3", "--scenes", "4"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let run = |verb: &str, out: &Path, extra: &[&str]| {
        let mut args: Vec<String> = vec![verb.to_string()];
        args.extend(common(out));
        args.extend(extra.iter().map(|s| s.to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&args, Some(threads));
    };
    let gen_lw = root.join("gen-lw");
    run("gen-lw", &gen_lw, &[]);
    run("run-lw", &root.join("run-lw"), &["--input", p(&gen_lw.join("detectors"))]);
    let gen_3d = root.join("gen-3d");
    run("gen-3d", &gen_3d, &[]);
    let run_3d = root.join("run-3d");
    run("run-3d", &run_3d, &["--input", p(&gen_3d.join("scenes"))]);
    run(
        "eval",
        &root.join("eval"),
        &["--input", p(&gen_3d.join("scenes")), "--worlds", p(&run_3d.join("worlds.jsonl"))],
    );
    let (dets, poses) = write_ingest_inputs(root);
    run("ingest", &root.join("ingest"), &["--detections", p(&dets), "--poses", p(&poses)]);
    let mut all = snapshot(root);
    all.remove(Path::new("small.json"));
    all
}

pub fn write_ingest_inputs(root: &Path) -> (PathBuf, PathBuf) {
    let dets = root.join("dets.csv");
    let poses = root.join("poses.csv");
    fs::write(
        &dets,
        "video,frame,label,x_min,y_min,x_max,y_max\n\
         kitchen,0,chair,100,100,300,200\n\
         kitchen,1,bowl,10.5,20.25,30.5,40.75\n\
         hall,0,tv,0,0,800,800\n",
    )
    .unwrap();
    fs::write(
        &poses,
        "video,frame,px,py,pz,fx,fy,fz\n\
         kitchen,0,0,2,5,0,1,0\n\
         kitchen,1,1,2,5,0,1,0\n\
         hall,0,0,2,-5,0,1,0\n",
    )
    .unwrap();
    (dets, poses)
}
