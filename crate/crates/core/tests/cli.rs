use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roadgrip::mixture::{build_mixture_table, SummaryLevels};
use roadgrip::pl_density::{read_densities_csv, write_histograms_csv};
use roadgrip::raster::{decode, encode_f32, read_grr1, Grid, Grr1};
use roadgrip::synth::{default_class_densities, draw_samples};
use roadgrip::{ClassProbabilityRaster, GripHistogram, GripSummaryRaster, LabelRaster, SurfaceState};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roadgrip"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn default_densities_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/class_densities_v1.csv")
}

fn write_histograms(path: &Path) {
    let gen = default_class_densities();
    let hists: Vec<GripHistogram> = gen
        .densities()
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let draws = draw_samples(d, 20_000, k as u64);
            GripHistogram::from_samples(d.class(), &draws, 0.0, 1.0, 100).unwrap()
        })
        .collect();
    let mut buf = Vec::new();
    write_histograms_csv(&mut buf, &hists).unwrap();
    fs::write(path, buf).unwrap();
}

#[test]
fn fit_writes_one_normalized_density_per_class() {
    let dir = tmp();
    let hist = dir.path().join("hist.csv");
    write_histograms(&hist);
    let out = dir.path().join("fit.csv");
    let res = run(&["fit", s(&hist), "--intervals", "6", "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 6);
    let ds = read_densities_csv(&out).unwrap();
    assert_eq!(ds.len(), 5);
    for d in &ds {
        assert!((d.integral() - 1.0).abs() <= 1e-9);
        assert_eq!(d.segment_count(), 6);
    }
    assert!(dir.path().join("fit.csv.manifest.json").exists());

    let again = dir.path().join("fit2.csv");
    assert_eq!(code(&run(&["fit", s(&hist), "--intervals", "6", "--out", s(&again)])), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn fit_validates_inputs() {
    let dir = tmp();
    let hist = dir.path().join("hist.csv");
    write_histograms(&hist);
    let out = dir.path().join("fit.csv");
    assert_eq!(code(&run(&["fit", s(&hist), "--intervals", "1", "--out", s(&out)])), 2);
    assert!(!out.exists());

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "class,left,right,count\ndry,0,1,3\n").unwrap();
    let res = run(&["fit", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
}

fn write_probs(path: &Path, raster: &ClassProbabilityRaster) {
    fs::write(path, encode_f32(&raster.to_grr1()).unwrap()).unwrap();
}

#[test]
fn fuse_one_hot_reproduces_class_values() {
    let dir = tmp();
    let labels = LabelRaster::new(1, 5, SurfaceState::ALL.to_vec()).unwrap();
    let probs = dir.path().join("p.grr1");
    write_probs(&probs, &ClassProbabilityRaster::one_hot(&labels));
    let out = dir.path().join("sum.grr1");
    let densities = default_densities_path();
    let res = run(&["fuse", s(&densities), s(&probs), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let summary = GripSummaryRaster::from_grr1(read_grr1(&out).unwrap()).unwrap();
    let table = build_mixture_table(&read_densities_csv(&densities).unwrap()).unwrap();
    for (i, state) in SurfaceState::ALL.iter().enumerate() {
        let d = table.class_density(*state);
        let px = &summary.pixels[i];
        let expect = [d.mean(), d.median(), d.quantile(0.05).unwrap(), d.quantile(0.95).unwrap()];
        let got = [px.mean, px.median, px.p05, px.p95];
        for (e, g) in expect.iter().zip(got) {
            assert_eq!(g, *e as f32 as f64, "{state}");
        }
    }
}

#[test]
fn fuse_full_size_raster_has_six_channels() {
    let dir = tmp();
    let (h, w) = (512, 512);
    let labels = LabelRaster::new(h, w, (0..h * w).map(|i| SurfaceState::ALL[i % 5]).collect()).unwrap();
    let cfg = roadgrip::synth::SimulatorConfig::default();
    let probs = roadgrip::synth::simulate_classifier(&labels, &cfg, 1).unwrap();
    let path = dir.path().join("p.grr1");
    write_probs(&path, &probs);
    let out = dir.path().join("sum.grr1");
    assert_eq!(code(&run(&["fuse", s(&default_densities_path()), s(&path), "--out", s(&out)])), 0);
    match read_grr1(&out).unwrap() {
        Grr1::F32(g) => assert_eq!((g.height, g.width, g.channels), (h, w, 6)),
        Grr1::U8(_) => panic!("summary must be f32"),
    }
}

#[test]
fn fuse_rejects_bad_rasters_without_leaving_output() {
    let dir = tmp();
    let densities = default_densities_path();
    let labels = LabelRaster::new(4, 4, vec![SurfaceState::Wet; 16]).unwrap();
    let good = encode_f32(&ClassProbabilityRaster::one_hot(&labels).to_grr1()).unwrap();
    let out = dir.path().join("sum.grr1");

    let truncated = dir.path().join("trunc.grr1");
    fs::write(&truncated, &good[..good.len() - 7]).unwrap();
    assert_eq!(code(&run(&["fuse", s(&densities), s(&truncated), "--out", s(&out)])), 2);

    let magic = dir.path().join("magic.grr1");
    let mut bad = good.clone();
    bad[0] = b'X';
    fs::write(&magic, bad).unwrap();
    assert_eq!(code(&run(&["fuse", s(&densities), s(&magic), "--out", s(&out)])), 2);

    let channels = dir.path().join("chan.grr1");
    let grid = Grid::new(2, 2, 4, vec![0.25f32; 16]).unwrap();
    fs::write(&channels, encode_f32(&grid).unwrap()).unwrap();
    assert_eq!(code(&run(&["fuse", s(&densities), s(&channels), "--out", s(&out)])), 2);

    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 3, "{leftovers:?}");
    assert!(decode(&good).is_ok());
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn bench_is_reproducible() {
    let dir = tmp();
    let cfg = write_cfg(dir.path(), "b.cfg", "scenes = 6\nheight = 80\nhorizon = 20\nwidth = 8\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = run(&["bench", "--config", s(&cfg), "--seed", "1", "--out", s(&a)]);
    assert_eq!(code(&ra), 0, "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(code(&run(&["bench", "--config", s(&cfg), "--seed", "1", "--out", s(&b)])), 0);
    for f in ["report.csv", "manifest.json", "scatter_gvrs.csv", "scatter_ideal_gvrs.csv", "scatter_gaussian.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(
        report.lines().next().unwrap(),
        "method,rmse_mean,rmse_median,F_sigma,F_90,F_over_P5,mean_interval_len,mean_P5,viol_p50,viol_p70,viol_p90"
    );
    assert_eq!(report.lines().count(), 7);
    let scatter = fs::read_to_string(a.join("scatter_quantile.csv")).unwrap();
    assert_eq!(scatter.lines().next().unwrap(), "sample_id,gt_grip_mean,p05_mean");
    assert_eq!(scatter.lines().count(), 7);
    assert!(String::from_utf8(ra.stdout).unwrap().contains("ideal_gvrs"));

    let c = dir.path().join("c");
    assert_eq!(code(&run(&["bench", "--config", s(&cfg), "--seed", "2", "--out", s(&c)])), 0);
    assert_ne!(fs::read(a.join("report.csv")).unwrap(), fs::read(c.join("report.csv")).unwrap());
}

#[test]
fn bench_rejects_bad_method_lists() {
    let dir = tmp();
    let out = dir.path().join("o");
    for text in ["methods =\n", "methods = gvrs, bayes\n", "methods = gvrs\nscenes = 0\n"] {
        let cfg = write_cfg(dir.path(), "b.cfg", text);
        let res = run(&["bench", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&res), 2, "{text}");
    }
    assert!(!out.exists());
}

#[test]
fn ideal_bench_is_calibrated() {
    let dir = tmp();
    let cfg = write_cfg(dir.path(), "b.cfg", "# ideal only\nmethods = ideal_gvrs\nscenes = 200\n");
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["bench", "--config", s(&cfg), "--seed", "3", "--out", s(&out)])), 0);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    let f_over_p5: f64 = row[5].parse().unwrap();
    assert!((94.3..=95.7).contains(&f_over_p5), "{f_over_p5}");
}

#[test]
fn synth_writes_matching_files() {
    let dir = tmp();
    let out = dir.path().join("s");
    assert_eq!(code(&run(&["synth", "--seed", "5", "--out", s(&out)])), 0);
    let labels = LabelRaster::from_grr1(read_grr1(&out.join("labels.grr1")).unwrap()).unwrap();
    let probs = ClassProbabilityRaster::from_grr1(read_grr1(&out.join("probs.grr1")).unwrap()).unwrap();
    assert_eq!((labels.height(), labels.width()), (probs.height(), probs.width()));
    let gt = fs::read_to_string(out.join("ground_truth.csv")).unwrap();
    assert_eq!(gt.lines().next().unwrap(), "row,col,grip,state");
    assert_eq!(gt.lines().count() - 1, labels.height() - 40);
    assert!(out.join("manifest.json").exists());

    let again = dir.path().join("t");
    assert_eq!(code(&run(&["synth", "--seed", "5", "--out", s(&again)])), 0);
    for f in ["labels.grr1", "probs.grr1", "ground_truth.csv", "manifest.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn synth_validates_config() {
    let dir = tmp();
    let out = dir.path().join("s");
    let cfg = write_cfg(dir.path(), "a.cfg", "layout = dry:0.5, wet:0.4\n");
    assert_eq!(code(&run(&["synth", "--config", s(&cfg), "--out", s(&out)])), 2);
    let cfg = write_cfg(dir.path(), "b.cfg", "height = 50\ncolour = red\n");
    let res = run(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));
    assert!(!out.exists());
}

#[test]
fn argument_errors_exit_two() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["fuse", "only-one-arg"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["fuse", "/nonexistent.csv", "/nonexistent.grr1", "--out", "/tmp/x.grr1"])), 2);
}

#[test]
fn levels_are_the_sigma_interval() {
    let l = SummaryLevels::default();
    assert!((l.sigma_high - l.sigma_low - 0.68269).abs() < 1e-5);
}
