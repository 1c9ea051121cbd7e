//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 degenerate geometry, 4 I/O failure.
//! Machine-readable results go to stdout as JSON; diagnostics go to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use image::RgbImage;
use serde_json::json;

use crate::augment::{affine_warp_pair, AffineParams, AffineSampler};
use crate::error::{Error, Result};
use crate::geometry::{ImageSize, ProjectionConfig, Readout, UnitVec3};
use crate::maskgen::export::{EncodePng, ConditioningSet};
use crate::maskgen::{
    align_char_boxes, export_conditioning, layout_text_with, rasterize_mask_with, render_preview,
    summary_normal, Align, GlyphSet, LayoutConfig, NormalMode, Rect,
};
use crate::metrics::{mae_n, rating_stats, read_ratings};
use crate::normalmap::{
    decode_normal_map, dominant_normal, encode_normal_map, from_raw_bytes, synth_dihedral, synth_plane,
    to_raw_bytes, NormalField, RoiMask, RAW_MAGIC,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_GEOMETRY: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "surftext", version, about = "Surface-aligned character masks and normal-map tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic planar or two-plane normal map.
    Synth(SynthArgs),
    /// Lay out text in a region, align it with the surface and export conditioning files.
    Align(AlignArgs),
    /// Mean angular error between two normal maps.
    Mae(MaeArgs),
    /// Affine-warp an image together with its normal map.
    Augment(AugmentArgs),
    /// Summarize human ratings from a CSV file.
    RateStats(RateStatsArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Constant normal as nx,ny,nz (normalized before use).
    #[arg(long, value_name = "NX,NY,NZ", conflicts_with = "dihedral", required_unless_present = "dihedral", allow_hyphen_values = true)]
    normal: Option<String>,
    /// Two normals, left and right of the split column.
    #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"], allow_hyphen_values = true)]
    dihedral: Option<Vec<String>>,
    /// First column of the right plane; defaults to half the width.
    #[arg(long, requires = "dihedral")]
    split: Option<u32>,
    /// Output size as WIDTHxHEIGHT.
    #[arg(long, value_name = "WxH")]
    size: String,
    /// Output PNG path.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// Also write the lossless NRM1 float map here.
    #[arg(long, value_name = "PATH")]
    raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlignArg {
    Left,
    Center,
    Right,
}

impl From<AlignArg> for Align {
    fn from(a: AlignArg) -> Self {
        match a {
            AlignArg::Left => Align::Left,
            AlignArg::Center => Align::Center,
            AlignArg::Right => Align::Right,
        }
    }
}

#[derive(Debug, Args)]
struct RoiArgs {
    /// Region as x,y,w,h in pixels.
    #[arg(long, value_name = "X,Y,W,H", conflicts_with = "roi_mask")]
    roi: Option<String>,
    /// Region as a mask image; nonzero pixels are inside.
    #[arg(long, value_name = "PATH")]
    roi_mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// Source image.
    #[arg(long)]
    image: PathBuf,
    /// Normal map, 8-bit RGB PNG or NRM1 raw.
    #[arg(long)]
    normals: PathBuf,
    #[command(flatten)]
    roi: RoiArgs,
    /// Text to place; newlines separate lines.
    #[arg(long)]
    text: String,
    /// Align each character to the normal under its own box.
    #[arg(long)]
    per_char_normals: bool,
    /// Character cell width over height.
    #[arg(long, default_value_t = 0.6)]
    char_aspect: f64,
    /// Gap between characters as a fraction of the cell width.
    #[arg(long, default_value_t = 0.1)]
    char_gap: f64,
    /// Gap between lines as a fraction of the cell height.
    #[arg(long, default_value_t = 0.25)]
    line_gap: f64,
    /// Margin on each side as a fraction of the region.
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    /// Horizontal alignment of each line.
    #[arg(long, value_enum, default_value_t = AlignArg::Center)]
    align: AlignArg,
    /// Depth the box center is pushed back along the normal.
    #[arg(long, default_value_t = 1.0)]
    depth: f64,
    /// Smallest accepted |n_z| before the surface counts as edge-on.
    #[arg(long, default_value_t = 0.05)]
    min_facing: f64,
    /// Read plane corners back with a pinhole at this focal length (normalized units) instead of orthographically.
    #[arg(long)]
    focal: Option<f64>,
    /// Directory of PNG glyph stamps overriding the built-in set.
    #[arg(long, value_name = "DIR")]
    glyphs: Option<PathBuf>,
    /// Output directory.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct MaeArgs {
    /// Normal map before generation.
    #[arg(long)]
    before: PathBuf,
    /// Normal map after generation.
    #[arg(long)]
    after: PathBuf,
    #[command(flatten)]
    roi: RoiArgs,
    /// Inputs are NRM1 raw float maps instead of PNG.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Source image.
    #[arg(long)]
    image: PathBuf,
    /// Normal map, NRM1 raw or 8-bit RGB PNG.
    #[arg(long)]
    normals: PathBuf,
    /// Rotation in degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rotate: f64,
    /// Uniform scale factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Horizontal shear factor.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shear_x: f64,
    /// Vertical shear factor.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    shear_y: f64,
    /// Horizontal translation in pixels.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tx: f64,
    /// Vertical translation in pixels.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    ty: f64,
    /// Draw rotation, scale and shear from the seeded default sampler instead.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct RateStatsArgs {
    /// CSV with header method,image_id,participant,harmonization,text_rendering,perspective_blending.
    #[arg(long)]
    csv: PathBuf,
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Align(a) => cmd_align(a, stdout, stderr),
        Command::Mae(a) => cmd_mae(a, stdout),
        Command::Augment(a) => cmd_augment(a, stdout),
        Command::RateStats(a) => cmd_rate_stats(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_geometric() {
        EXIT_GEOMETRY
    } else if e.is_io() {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse {what} {s:?}")))?;
    parts
        .try_into()
        .map_err(|_| Error::InvalidInput(format!("{what} needs {N} comma-separated values, got {s:?}")))
}

fn parse_normal(s: &str) -> Result<UnitVec3> {
    let [x, y, z] = parse_floats::<3>(s, "normal")?;
    UnitVec3::from_xyz(x, y, z).map_err(|_| Error::InvalidInput(format!("normal {s:?} has zero length")))
}

fn parse_size(s: &str) -> Result<ImageSize> {
    let bad = || Error::InvalidInput(format!("size must look like 64x48, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: u32 = w.trim().parse().map_err(|_| bad())?;
    let h: u32 = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok(ImageSize::new(w, h))
}

fn parse_roi_rect(s: &str, size: ImageSize) -> Result<(u32, u32, u32, u32)> {
    let bad = || Error::InvalidInput(format!("region must be x,y,w,h in whole pixels, got {s:?}"));
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad())?;
    let [x, y, w, h]: [u32; 4] = parts.try_into().map_err(|_| bad())?;
    if w == 0 || h == 0 || u64::from(x) + u64::from(w) > u64::from(size.width) || u64::from(y) + u64::from(h) > u64::from(size.height) {
        return Err(Error::InvalidInput(format!(
            "region {x},{y},{w},{h} does not fit inside the {}x{} image",
            size.width, size.height
        )));
    }
    Ok((x, y, w, h))
}

/// The region as a mask plus the rectangle text is laid out in.
fn resolve_roi(args: &RoiArgs, size: ImageSize) -> Result<Option<(RoiMask, Rect)>> {
    if let Some(s) = &args.roi {
        let (x, y, w, h) = parse_roi_rect(s, size)?;
        let mask = RoiMask::from_rect(size.width, size.height, x, y, w, h);
        let rect = Rect::new(f64::from(x), f64::from(y), f64::from(w), f64::from(h));
        return Ok(Some((mask, rect)));
    }
    if let Some(path) = &args.roi_mask {
        let mask = RoiMask::from_gray(&open_image(path)?.to_luma8());
        if mask.size() != size {
            return Err(Error::DimensionMismatch {
                left_width: mask.width(),
                left_height: mask.height(),
                right_width: size.width,
                right_height: size.height,
            });
        }
        let (x, y, w, h) = mask.bounding_rect().ok_or(Error::EmptyRoi)?;
        let rect = Rect::new(f64::from(x), f64::from(y), f64::from(w), f64::from(h));
        return Ok(Some((mask, rect)));
    }
    Ok(None)
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a normal map, telling NRM1 from PNG by the leading magic bytes.
pub fn load_normals(path: &Path, stderr: &mut dyn Write) -> Result<NormalField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&RAW_MAGIC) {
        return from_raw_bytes(&bytes);
    }
    let img = image::load_from_memory(&bytes).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = decode_normal_map(&img)?;
    if decoded.replaced_zero > 0 {
        let _ = writeln!(
            stderr,
            "warning: {}: {} zero-length normals replaced with (0, 0, 1)",
            path.display(),
            decoded.replaced_zero
        );
    }
    Ok(decoded.field)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let size = parse_size(&a.size)?;
    let (field, report) = match (&a.normal, &a.dihedral) {
        (Some(n), _) => {
            let n = parse_normal(n)?;
            (synth_plane(n, size.width, size.height), json!({ "normal": n }))
        }
        (None, Some(pair)) => {
            let left = parse_normal(&pair[0])?;
            let right = parse_normal(&pair[1])?;
            let split = a.split.unwrap_or(size.width / 2);
            let field = synth_dihedral(left, right, size.width, size.height, split)?;
            (field, json!({ "left": left, "right": right, "split": split }))
        }
        (None, None) => return Err(Error::InvalidInput("one of --normal or --dihedral is required".into())),
    };
    write_bytes(&a.output, &encode_normal_map(&field).encode_png()?)?;
    if let Some(raw) = &a.raw {
        write_bytes(raw, &to_raw_bytes(&field))?;
    }
    let mut report = report;
    report["width"] = json!(size.width);
    report["height"] = json!(size.height);
    emit(out, &report)
}

fn cmd_align(a: AlignArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let source: RgbImage = open_image(&a.image)?.to_rgb8();
    let size = ImageSize::new(source.width(), source.height());
    let field = load_normals(&a.normals, err)?;
    if field.size() != size {
        return Err(Error::DimensionMismatch {
            left_width: size.width,
            left_height: size.height,
            right_width: field.width(),
            right_height: field.height(),
        });
    }
    let (roi, rect) = resolve_roi(&a.roi, size)?
        .ok_or_else(|| Error::InvalidInput("one of --roi or --roi-mask is required".into()))?;

    let layout = LayoutConfig {
        char_aspect: a.char_aspect,
        char_gap_frac: a.char_gap,
        line_gap_frac: a.line_gap,
        margin_frac: a.margin,
        align: a.align.into(),
    };
    let projection = ProjectionConfig {
        depth: a.depth,
        min_facing: a.min_facing,
        readout: match a.focal {
            Some(focal) => Readout::Perspective { focal },
            None => Readout::Orthographic,
        },
    };
    projection.validate()?;
    let mode = if a.per_char_normals { NormalMode::PerChar } else { NormalMode::Region };
    let glyphs = match &a.glyphs {
        Some(dir) => GlyphSet::with_overrides(dir)?,
        None => GlyphSet::builtin().clone(),
    };

    let boxes = layout_text_with(&a.text, rect, &layout, &glyphs)?;
    let quads = align_char_boxes(&boxes, &field, &roi, &projection, mode)?;
    let dominant = match mode {
        NormalMode::Region => dominant_normal(&field, &roi)?,
        NormalMode::PerChar => summary_normal(&quads).unwrap_or(UnitVec3::Z),
    };
    let mask = rasterize_mask_with(&quads, size, &glyphs)?;

    let config = json!({
        "text": a.text,
        "roi": rect,
        "layout": layout,
        "projection": projection,
        "normal_mode": mode,
        "glyph_overrides": a.glyphs.is_some(),
    });
    let set = ConditioningSet {
        source: &source,
        mask: &mask,
        field: &field,
        roi: &roi,
        quads: &quads,
        dominant_normal: dominant,
        config,
    };
    let exported = export_conditioning(&set, &a.output)?;
    write_bytes(
        &a.output.join("preview.png"),
        &render_preview(&source, &quads).encode_png()?,
    )?;
    emit(out, &serde_json::to_value(&exported.manifest).expect("manifest serializes"))
}

fn cmd_mae(a: MaeArgs, out: &mut dyn Write) -> Result<()> {
    let load = |p: &Path| -> Result<NormalField> {
        if a.raw {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            from_raw_bytes(&bytes)
        } else {
            Ok(decode_normal_map(&open_image(p)?)?.field)
        }
    };
    let before = load(&a.before)?;
    let after = load(&a.after)?;
    let roi = resolve_roi(&a.roi, before.size())?.map(|(m, _)| m);
    let report = mae_n(&before, &after, roi.as_ref())?;
    emit(out, &serde_json::to_value(report).expect("report serializes"))
}

fn cmd_augment(a: AugmentArgs, out: &mut dyn Write) -> Result<()> {
    let img_bytes = std::fs::read(&a.image).map_err(|e| Error::io(&a.image, e))?;
    let image = image::load_from_memory(&img_bytes)
        .map_err(|source| Error::Image {
            path: a.image.clone(),
            source,
        })?
        .to_rgb8();
    let field = load_normals(&a.normals, &mut std::io::sink())?;
    let params = match a.seed {
        Some(seed) => AffineSampler::new(seed).sample(),
        None => AffineParams {
            rotate_deg: a.rotate,
            scale: a.scale,
            shear_x: a.shear_x,
            shear_y: a.shear_y,
            translate: (a.tx, a.ty),
        },
    };
    let (warped, warped_field) = affine_warp_pair(&image, &field, &params)?;

    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let files = [
        ("image.png", warped.encode_png()?),
        ("normals.png", encode_normal_map(&warped_field).encode_png()?),
        ("normals.nrm", to_raw_bytes(&warped_field)),
    ];
    for (name, bytes) in &files {
        write_bytes(&a.output.join(name), bytes)?;
    }
    let params_json = serde_json::to_value(params).expect("params serialize");
    let mut params_file = serde_json::to_vec_pretty(&params_json).expect("params serialize");
    params_file.push(b'\n');
    write_bytes(&a.output.join("params.json"), &params_file)?;
    emit(
        out,
        &json!({
            "params": params_json,
            "files": ["image.png", "normals.png", "normals.nrm", "params.json"],
        }),
    )
}

fn cmd_rate_stats(a: RateStatsArgs, out: &mut dyn Write) -> Result<()> {
    let file = std::fs::File::open(&a.csv).map_err(|e| Error::io(&a.csv, e))?;
    let records = read_ratings(std::io::BufReader::new(file))?;
    let stats = rating_stats(&records)?;
    emit(out, &serde_json::to_value(stats).expect("stats serialize"))
}
