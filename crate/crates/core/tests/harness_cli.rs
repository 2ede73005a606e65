//! The command-line tool end to end on a small image.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dipadmm::harness::read_curves;
use dipadmm::image::{ImageTensor, Shape};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dipadmm"))
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn test_image(dir: &Path) -> PathBuf {
    let shape = Shape::new(16, 16, 3);
    let mut img = ImageTensor::zeros(shape);
    for i in 0..16 {
        for j in 0..16 {
            img.set(i, j, 0, i as f64 / 15.0);
            img.set(i, j, 1, j as f64 / 15.0);
            img.set(i, j, 2, if (i / 4 + j / 4) % 2 == 0 { 0.8 } else { 0.2 });
        }
    }
    let path = dir.join("truth.png");
    img.write_png(&path).unwrap();
    path
}

fn write_config(dir: &Path, image: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "# small inpainting run\n\
         task=inpaint\n\
         image={}\n\
         level_channels=8,16\n\
         input_channels=8\n\
         iters=12\n\
         record_every=4\n\
         snapshot_every=8\n\
         record_time=false\n\
         lr=0.01\n\
         {extra}\n",
        image.display()
    );
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn reconstruct_is_reproducible_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let image = test_image(tmp.path());
    let cfg = write_config(tmp.path(), &image, "method=dip-admm-v2\nprior=tv:0.01");
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(bin()
            .args(["reconstruct", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(&out)
            .output()
            .unwrap());
        out
    };
    let (a, b) = (run("a"), run("b"));
    let curves = fs::read(a.join("curves.csv")).unwrap();
    assert_eq!(curves, fs::read(b.join("curves.csv")).unwrap());
    assert!(String::from_utf8_lossy(&curves).starts_with("iter,cpu_seconds,loss,psnr,psnr_ema\n"));
    let rows = read_curves(a.join("curves.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![0, 4, 8, 12]);
    assert!(rows.iter().all(|r| r.cpu_seconds == 0.0 && r.psnr.is_some()));
    for f in [
        "config.txt",
        "mask.txt",
        "measurement.txt",
        "degraded.png",
        "final.png",
        "final_ema.png",
        "snapshots/iter_000000.png",
        "snapshots/iter_000008_ema.png",
        "snapshots/iter_000012.png",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    // The mask holds sorted distinct indices, about half of the 768 entries.
    let mask: Vec<usize> = fs::read_to_string(a.join("mask.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert!(mask.windows(2).all(|w| w[0] < w[1]));
    assert!((300..=470).contains(&mask.len()));

    // The snapshot config reproduces the run.
    let again = tmp.path().join("c");
    ok(bin()
        .args(["reconstruct", "--config"])
        .arg(a.join("config.txt"))
        .arg("--output")
        .arg(&again)
        .output()
        .unwrap());
    assert_eq!(curves, fs::read(again.join("curves.csv")).unwrap());

    let psnr: f64 = ok(bin().arg("psnr").arg(&image).arg(a.join("final.png")).output().unwrap())
        .trim()
        .parse()
        .unwrap();
    assert!(psnr.is_finite() && psnr > 0.0);

    let agg = ok(bin().arg("aggregate").arg(&a).arg(&b).output().unwrap());
    let mut lines = agg.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,runs,cpu_seconds_mean,loss_mean,loss_std,psnr_mean,psnr_std,psnr_ema_mean,psnr_ema_std"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1], "2");
    assert_eq!(first[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn degrade_writes_measurement_files() {
    let tmp = tempfile::tempdir().unwrap();
    let image = test_image(tmp.path());
    let cfg = write_config(tmp.path(), &image, "");
    let out = tmp.path().join("deg");
    let printed = ok(bin()
        .args(["degrade", "--config"])
        .arg(&cfg)
        .args(["--output"])
        .arg(&out)
        .args(["--keep-fraction", "0.25", "--noise-sigma", "0"])
        .output()
        .unwrap());
    assert_eq!(printed.trim(), out.display().to_string());
    let values = fs::read_to_string(out.join("measurement.txt")).unwrap();
    let mask = fs::read_to_string(out.join("mask.txt")).unwrap();
    assert_eq!(values.lines().count(), mask.lines().count());
    let truth = ImageTensor::read_png(&image).unwrap();
    // Without noise the measurement is the kept pixels themselves.
    for (idx, v) in mask.lines().zip(values.lines()) {
        let i: usize = idx.parse().unwrap();
        assert_eq!(truth.as_slice()[i], v.parse::<f64>().unwrap());
    }
}

#[test]
fn spectrum_project_and_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let image = test_image(tmp.path());
    let cfg = write_config(tmp.path(), &image, "task=denoise\nnoise_sigma=25");
    let spec = tmp.path().join("jjt.bin");
    ok(bin()
        .args(["spectrum", "--config"])
        .arg(&cfg)
        .args(["--k", "8", "--out"])
        .arg(&spec)
        .output()
        .unwrap());
    assert!(fs::read_to_string(format!("{}.meta", spec.display())).unwrap().starts_with("fingerprint="));

    let csv = ok(bin()
        .args(["project", "--config"])
        .arg(&cfg)
        .arg("--spectrum-file")
        .arg(&spec)
        .output()
        .unwrap());
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "index,eigenvalue,coefficient");
    let eig: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(eig.len(), 8);
    assert!(eig.windows(2).all(|w| w[0] >= w[1]));

    let noise = ok(bin()
        .args(["project", "--config"])
        .arg(&cfg)
        .arg("--spectrum-file")
        .arg(&spec)
        .args(["--noise", "25", "--noise-seed", "3"])
        .output()
        .unwrap());
    assert_eq!(noise.lines().count(), 9);

    let eta = 0.5 / eig[0];
    let pred_img = tmp.path().join("pred.png");
    let curve = ok(bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .arg("--spectrum-file")
        .arg(&spec)
        .args(["--eta", &eta.to_string(), "--steps", "5", "--image-out"])
        .arg(&pred_img)
        .output()
        .unwrap());
    let mut lines = curve.lines();
    assert_eq!(lines.next().unwrap(), "t,residual_norm");
    let norms: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(norms.len(), 6);
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(pred_img.is_file());

    // A different generator seed has a different fingerprint.
    let out = bin()
        .args(["project", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--spectrum-file"])
        .arg(&spec)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fingerprint"));
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let image = test_image(tmp.path());
    let cfg = write_config(tmp.path(), &image, "colour=blue");
    let out = bin().args(["reconstruct", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let cfg = write_config(tmp.path(), &image, "method=pnp");
    let out = bin().args(["reconstruct", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success(), "pnp without a prior must be rejected");
}
