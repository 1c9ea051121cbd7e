use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use serde_json::Value;
use surftext::geometry::UnitVec3;
use surftext::maskgen::export::{EncodePng, QuadsFile};
use surftext::maskgen::{layout_text, LayoutConfig, Rect};
use surftext::normalmap::{encode_normal_map, from_raw_bytes, synth_plane, to_raw_bytes, NormalField};

fn surftext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surftext"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tilt_y(deg: f64) -> UnitVec3 {
    let t = deg.to_radians();
    UnitVec3::from_xyz(t.sin(), 0.0, t.cos()).unwrap()
}

struct Scene {
    dir: tempfile::TempDir,
}

impl Scene {
    fn new(field: &NormalField) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let src = RgbImage::from_fn(field.width(), field.height(), |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, 40]));
        std::fs::write(dir.path().join("src.png"), src.encode_png().unwrap()).unwrap();
        std::fs::write(dir.path().join("n.nrm"), to_raw_bytes(field)).unwrap();
        std::fs::write(dir.path().join("n.png"), encode_normal_map(field).encode_png().unwrap()).unwrap();
        Scene { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn align(&self, normals: &str, roi: &str, text: &str, extra: &[&str]) -> (Output, PathBuf) {
        let out = self.path("out");
        let (img, nrm) = (self.path("src.png"), self.path(normals));
        let mut args = vec!["align", "--image", s(&img), "--normals", s(&nrm), "--roi", roi, "--text", text, "-o", s(&out)];
        args.extend_from_slice(extra);
        (surftext(&args), out)
    }
}

#[test]
fn help_on_every_command() {
    for cmd in [&["--help"][..], &["synth", "--help"], &["align", "--help"], &["mae", "--help"], &["augment", "--help"], &["rate-stats", "--help"]] {
        let o = surftext(cmd);
        assert_eq!(code(&o), 0, "{cmd:?}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"), "{cmd:?}");
    }
}

#[test]
fn synth_writes_png_and_raw() {
    let dir = tempfile::tempdir().unwrap();
    let (png, raw) = (dir.path().join("n.png"), dir.path().join("n.nrm"));
    let o = surftext(&["synth", "--normal", "0,0,1", "--size", "32x16", "-o", s(&png), "--raw", s(&raw)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = stdout_json(&o);
    assert_eq!(report["width"], 32);
    assert_eq!(report["height"], 16);

    let img = image::open(&png).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (32, 16));
    assert!(img.pixels().all(|p| p.0 == [128, 128, 255]));
    let field = from_raw_bytes(&std::fs::read(&raw).unwrap()).unwrap();
    assert!(field.data().iter().all(|n| *n == UnitVec3::Z));
}

#[test]
fn synth_zero_normal_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("n.png");
    let o = surftext(&["synth", "--normal", "0,0,0", "--size", "8x8", "-o", s(&png)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("zero"), "{}", stderr(&o));
    assert!(!png.exists());
}

#[test]
fn synth_dihedral_splits_at_column() {
    let dir = tempfile::tempdir().unwrap();
    let (png, raw) = (dir.path().join("d.png"), dir.path().join("d.nrm"));
    let o = surftext(&[
        "synth", "--dihedral", "0.5,0,1", "-0.5,0,1", "--split", "10", "--size", "24x6", "-o", s(&png), "--raw", s(&raw),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f = from_raw_bytes(&std::fs::read(&raw).unwrap()).unwrap();
    let l = UnitVec3::from_xyz(0.5, 0.0, 1.0).unwrap();
    let r = UnitVec3::from_xyz(-0.5, 0.0, 1.0).unwrap();
    for y in 0..6 {
        for x in 0..24 {
            let want = if x < 10 { l } else { r };
            assert!((f.get(x, y).get() - want.get()).norm() < 1e-6, "({x},{y})");
        }
    }
}

#[test]
fn align_frontal_writes_box_quads() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 240, 120));
    let (o, out) = scene.align("n.nrm", "10,10,220,100", "HELLO", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["source.png", "cmask_aligned.png", "normals.png", "roi.png", "quads.json", "manifest.json", "preview.png"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let manifest = stdout_json(&o);
    assert_eq!(manifest["char_count"], 5);
    assert_eq!(manifest["width"], 240);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 5);

    let quads = QuadsFile::read(&out.join("quads.json")).unwrap();
    let boxes = layout_text("HELLO", Rect::new(10.0, 10.0, 220.0, 100.0), &LayoutConfig::default()).unwrap();
    for (q, b) in quads.corners().iter().zip(&boxes) {
        for (a, e) in q.iter().zip(b.bbox.to_quad().corners) {
            assert!(a.distance(e) < 1e-6);
        }
    }
}

#[test]
fn align_tilted_foreshortens_width() {
    let scene = Scene::new(&synth_plane(tilt_y(30.0), 400, 200));
    let (o, out) = scene.align("n.nrm", "20,20,360,160", "TILT", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let quads = QuadsFile::read(&out.join("quads.json")).unwrap();
    let boxes = layout_text("TILT", Rect::new(20.0, 20.0, 360.0, 160.0), &LayoutConfig::default()).unwrap();
    let cos = 30f64.to_radians().cos();
    for (q, b) in quads.corners().iter().zip(&boxes) {
        let width = q[1].x - q[0].x;
        assert!((width - b.bbox.w * cos).abs() < 0.5, "{width} vs {}", b.bbox.w * cos);
        let height = q[3].y - q[0].y;
        assert!((height - b.bbox.h).abs() < 0.5);
    }
}

#[test]
fn align_edge_on_fails_with_geometry_code() {
    let scene = Scene::new(&synth_plane(UnitVec3::from_xyz(1.0, 0.0, 0.0).unwrap(), 120, 60));
    let (o, out) = scene.align("n.nrm", "0,0,120,60", "AB", &[]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("character box 0"), "{err}");
    assert!(err.contains("(1.0000, 0.0000, 0.0000)"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn align_rejects_bad_inputs() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 64, 32));
    let (o, _) = scene.align("n.nrm", "0,0,200,10", "A", &[]);
    assert_eq!(code(&o), 2, "roi outside the image");
    let (o, _) = scene.align("n.nrm", "0,0,64,32", "a~", &[]);
    assert_eq!(code(&o), 2, "unsupported character");
    let (o, _) = scene.align("missing.nrm", "0,0,64,32", "A", &[]);
    assert_eq!(code(&o), 4, "missing file");
    let (o, _) = scene.align("n.nrm", "0,0,8,5", "LONG TEXT", &[]);
    assert_eq!(code(&o), 2, "font too small");
    assert!(stderr(&o).contains("too small"));
}

#[test]
fn align_mismatched_normals_is_invalid() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 64, 32));
    std::fs::write(scene.path("small.nrm"), to_raw_bytes(&synth_plane(UnitVec3::Z, 32, 32))).unwrap();
    let (o, _) = scene.align("small.nrm", "0,0,32,32", "A", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dimension mismatch"));
}

#[test]
fn mae_png_and_raw_paths() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 40, 30));
    let tilted = synth_plane(tilt_y(25.0), 40, 30);
    std::fs::write(scene.path("t.nrm"), to_raw_bytes(&tilted)).unwrap();
    std::fs::write(scene.path("t.png"), encode_normal_map(&tilted).encode_png().unwrap()).unwrap();

    let (b, a) = (scene.path("n.nrm"), scene.path("t.nrm"));
    let o = surftext(&["mae", "--before", s(&b), "--after", s(&a), "--raw"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["mae_deg"].as_f64().unwrap() - 25.0).abs() < 1e-6);
    assert_eq!(v["pixels"], 1200);

    let (b, a) = (scene.path("n.png"), scene.path("t.png"));
    let o = surftext(&["mae", "--before", s(&b), "--after", s(&a), "--roi", "0,0,20,10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    assert!((v["mae_deg"].as_f64().unwrap() - 25.0).abs() < 1.0);
    assert_eq!(v["pixels"], 200);
}

#[test]
fn mae_size_mismatch_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.nrm"), dir.path().join("b.nrm"));
    std::fs::write(&a, to_raw_bytes(&synth_plane(UnitVec3::Z, 4, 4))).unwrap();
    std::fs::write(&b, to_raw_bytes(&synth_plane(UnitVec3::Z, 5, 4))).unwrap();
    let o = surftext(&["mae", "--before", s(&a), "--after", s(&b), "--raw"]);
    assert_eq!(code(&o), 2);
}

fn augment(scene: &Scene, extra: &[&str]) -> (Output, PathBuf) {
    let out = scene.path("aug");
    let (img, nrm) = (scene.path("src.png"), scene.path("n.nrm"));
    let mut args = vec!["augment", "--image", s(&img), "--normals", s(&nrm), "-o", s(&out)];
    args.extend_from_slice(extra);
    (surftext(&args), out)
}

#[test]
fn augment_identity_leaves_pair_untouched() {
    let field = NormalField::from_fn(20, 12, |x, y| {
        UnitVec3::from_xyz(f64::from(x) * 0.03, f64::from(y) * -0.02, 1.0).unwrap()
    });
    let scene = Scene::new(&field);
    let (o, out) = augment(&scene, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("normals.nrm")).unwrap(), std::fs::read(scene.path("n.nrm")).unwrap());
    let before = image::open(scene.path("src.png")).unwrap().to_rgb8();
    let after = image::open(out.join("image.png")).unwrap().to_rgb8();
    assert_eq!(before, after);
    // same encoder on both sides, so the files match byte for byte too
    assert_eq!(std::fs::read(out.join("image.png")).unwrap(), std::fs::read(scene.path("src.png")).unwrap());
    let params: Value = serde_json::from_slice(&std::fs::read(out.join("params.json")).unwrap()).unwrap();
    assert_eq!(params["scale"], 1.0);
}

#[test]
fn augment_rotation_turns_normals() {
    let n = UnitVec3::from_xyz(0.5, 0.0, 1.0).unwrap();
    let scene = Scene::new(&synth_plane(n, 64, 64));
    let (o, out) = augment(&scene, &["--rotate", "30"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f = from_raw_bytes(&std::fs::read(out.join("normals.nrm")).unwrap()).unwrap();
    let (sn, cs) = 30f64.to_radians().sin_cos();
    let want = UnitVec3::from_xyz(cs * n.x, sn * n.x, n.z).unwrap();
    assert!((f.get(32, 32).get() - want.get()).norm() < 1e-6);
    // corners come from outside the source
    assert_eq!(f.get(0, 0), UnitVec3::Z);
}

#[test]
fn augment_singular_shear_is_invalid() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 16, 16));
    let (o, out) = augment(&scene, &["--shear-x", "1", "--shear-y", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("singular"), "{}", stderr(&o));
    assert!(!out.join("image.png").exists());
}

#[test]
fn augment_seed_is_reproducible() {
    let scene = Scene::new(&synth_plane(tilt_y(10.0), 24, 24));
    let (a, out) = augment(&scene, &["--seed", "11"]);
    let first = std::fs::read(out.join("normals.nrm")).unwrap();
    let (b, _) = augment(&scene, &["--seed", "11"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(first, std::fs::read(out.join("normals.nrm")).unwrap());
}

const METHODS: [&str; 4] = ["ours", "baseline_a", "baseline_b", "baseline_c"];

fn score(p: usize, m: usize, k: usize) -> u8 {
    ((p * 7 + m * 3 + k * 5) % 5 + 1) as u8
}

#[test]
fn rate_stats_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("method,image_id,participant,harmonization,text_rendering,perspective_blending\n");
    for p in 0..15 {
        for (m, name) in METHODS.iter().enumerate() {
            csv += &format!("{name},img1,p{p},{},{},{}\n", score(p, m, 0), score(p, m, 1), score(p, m, 2));
        }
    }
    let path = dir.path().join("r.csv");
    std::fs::write(&path, csv).unwrap();
    let o = surftext(&["rate-stats", "--csv", s(&path)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = stdout_json(&o);
    for (m, name) in METHODS.iter().enumerate() {
        let summary = &v[*name];
        assert_eq!(summary["records"], 15);
        for (k, param) in ["harmonization", "text_rendering", "perspective_blending"].iter().enumerate() {
            let scores: Vec<u8> = (0..15).map(|p| score(p, m, k)).collect();
            let mut hist = [0u64; 5];
            scores.iter().for_each(|&s| hist[usize::from(s) - 1] += 1);
            let mean = scores.iter().map(|&s| f64::from(s)).sum::<f64>() / 15.0;
            let stats = &summary[*param];
            for r in 1..=5 {
                assert_eq!(stats["histogram"][r.to_string()], hist[r - 1], "{name} {param} {r}");
            }
            assert_eq!(stats["fives"], hist[4]);
            assert!((stats["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn rate_stats_reports_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    std::fs::write(
        &path,
        "method,image_id,participant,harmonization,text_rendering,perspective_blending\nours,i,p1,5,4,3\nours,i,p2,6,1,1\n",
    )
    .unwrap();
    let o = surftext(&["rate-stats", "--csv", s(&path)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));
}

#[test]
fn missing_glyph_dir_is_io_error() {
    let scene = Scene::new(&synth_plane(UnitVec3::Z, 64, 32));
    let missing = scene.path("no_such_dir");
    let (o, _) = scene.align("n.nrm", "0,0,64,32", "A", &["--glyphs", s(&missing)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn per_char_export_is_repeatable() {
    let field = surftext::normalmap::synth_dihedral(tilt_y(25.0), tilt_y(-25.0), 200, 100, 100).unwrap();
    let scene = Scene::new(&field);
    let (a, out) = scene.align("n.png", "0,0,200,100", "AB CD", &["--per-char-normals"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let mask = std::fs::read(out.join("cmask_aligned.png")).unwrap();
    let (b, _) = scene.align("n.png", "0,0,200,100", "AB CD", &["--per-char-normals"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(mask, std::fs::read(out.join("cmask_aligned.png")).unwrap());
}
