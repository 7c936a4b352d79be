use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glam::DVec3;

use splatvm::harness::{self, synth, Ablation, BenchConfig, CameraPath, StageDurations};
use splatvm::lod_gen::{build_pyramid, validate_levels, LodError, LodParams};
use splatvm::paging::{page_scene, paged_scene_file, LinkParams, PagingParams};
use splatvm::proxy_mesh::{build_proxy_mesh, MeshParams};
use splatvm::scene_io::{load_input_scene, read_scene, write_ply, write_scene, MappedScene, SceneFile, SceneFormatError};
use splatvm::splat_render::{composite, compute_keys_by, radix_sort, Camera, DepthMetric};
use splatvm::vm_runtime::{ControllerConfig, VmConfig, VmError};

use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "splatvm", version, about = "Paged streaming and level of detail for Gaussian splat scenes")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Import a 3DGS point file into an unpaged scene file.
    Convert(ConvertArgs),
    /// Build the proxy mesh of an unpaged scene.
    Mesh(MeshArgs),
    /// Assign Gaussians to pages and compute page links.
    Page(PageArgs),
    /// Add reduced-detail levels to a paged scene.
    Lod(LodArgs),
    /// Render every Gaussian of one level from a single viewpoint.
    Render(RenderArgs),
    /// Replay a camera path through the paged renderer and write reports.
    Bench(BenchArgs),
    /// Print PSNR and SSIM between two PNG images.
    Compare(CompareArgs),
    /// Write a synthetic test scene as a 3DGS point file.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Drop Gaussians outside the origin-centered cube of this half-extent.
    #[arg(long, default_value_t = f32::INFINITY)]
    crop: f32,
}

#[derive(Debug, Args)]
struct MeshArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Occupancy grid cells per axis.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Closing radius in cells.
    #[arg(long, default_value_t = 2)]
    close: usize,
    /// Opening radius in cells.
    #[arg(long, default_value_t = 1)]
    open: usize,
    /// Mahalanobis radius counted as inside a Gaussian.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
    /// Face budget after simplification; defaults to four per expected page.
    #[arg(long)]
    target_faces: Option<usize>,
    /// Page size the default face budget is derived from.
    #[arg(long, default_value_t = 2048)]
    page_size: usize,
    /// Also write the mesh as a Wavefront OBJ file.
    #[arg(long)]
    obj: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PageArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 2048)]
    page_size: usize,
    /// Samples per Gaussian when looking for page overlaps.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Minimum overlapping samples for a link.
    #[arg(long, default_value_t = 1)]
    link_threshold: usize,
    /// Mahalanobis radius of the sampled ellipsoid.
    #[arg(long, default_value_t = 1.0)]
    extent: f64,
}

#[derive(Debug, Args)]
struct LodArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Total level count, including the original Gaussians.
    #[arg(long, default_value_t = 4)]
    levels: u32,
    /// Scale applied to every merged Gaussian.
    #[arg(long, default_value_t = 2f32.powf(1.0 / 3.0))]
    scale_factor: f32,
    #[arg(long, default_value_t = 50)]
    kmeans_iters: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ViewArgs {
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Sort key for compositing order.
    #[arg(long, default_value = "z", value_parser = parse_depth)]
    sort_depth: DepthMetric,
    /// Write 16-bit PNG frames instead of 8-bit.
    #[arg(long)]
    sixteen_bit: bool,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Camera path to take the viewpoint from (with --frame).
    #[arg(long, conflicts_with_all = ["eye", "target"])]
    path: Option<PathBuf>,
    #[arg(long, default_value_t = 0, requires = "path")]
    frame: usize,
    /// Camera position, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, requires = "target")]
    eye: Option<DVec3>,
    /// Point the camera looks at, `x,y,z`.
    #[arg(long, value_parser = parse_vec3, requires = "eye")]
    target: Option<DVec3>,
    /// Image-up hint; +y points down in camera space.
    #[arg(long, value_parser = parse_vec3, default_value = "0,-1,0")]
    up: DVec3,
    #[arg(long, default_value_t = 90.0)]
    fov_degrees: f64,
    /// Detail level to render.
    #[arg(long, default_value_t = 0)]
    level: u32,
    #[command(flatten)]
    view: ViewArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Camera path file (TOML).
    #[arg(long)]
    path: PathBuf,
    /// Output directory for stats, timings, summary and frames.
    #[arg(long)]
    out: PathBuf,
    /// Disabled features, e.g. `links=off,lod=off` or `vm=off`.
    #[arg(long, default_value = "", value_parser = parse_ablation)]
    ablate: Ablation,
    #[arg(long, default_value_t = 500)]
    buffer_pages: usize,
    #[arg(long, default_value_t = 40)]
    staging_pages: usize,
    /// Visibility buffer size relative to the frame, per axis.
    #[arg(long, default_value_t = 0.25)]
    vis_scale: f64,
    /// Target usage band, `low:high`.
    #[arg(long, default_value = "0.5:0.8", value_parser = parse_band)]
    band: (f64, f64),
    /// Initial relative threshold step.
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    /// Replay at most this many frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Skip writing frame images.
    #[arg(long)]
    no_images: bool,
    #[command(flatten)]
    view: ViewArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Opaque wall with one cluster in front and one behind.
    Wall,
    /// Ground slab covered with colored blobs.
    Blobs,
    /// Separate clusters on a ring.
    Clusters,
    /// Regular cube grid.
    Grid,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long)]
    output: PathBuf,
    /// Approximate Gaussian count.
    #[arg(long, default_value_t = 20_000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_vec3(s: &str) -> std::result::Result<DVec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        &[x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Ok(DVec3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers `x,y,z`, got {s:?}")),
    }
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected `low:high`, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(format!("band must satisfy 0 <= low < high <= 1, got {s:?}"));
    }
    Ok((lo, hi))
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    s.parse().map_err(|e: harness::AblationParseError| e.to_string())
}

fn parse_depth(s: &str) -> std::result::Result<DepthMetric, String> {
    s.parse()
}

fn scene_error(path: &Path, e: SceneFormatError) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn vm_error(e: VmError) -> CliError {
    match e {
        VmError::Invariant(msg) => CliError::Invariant(msg),
        VmError::Config(msg) => CliError::Usage(msg),
        other => CliError::Data(other.to_string()),
    }
}

fn lod_error(e: LodError) -> CliError {
    match e {
        LodError::Indivisible { .. } | LodError::NoLevels => CliError::Usage(e.to_string()),
        LodError::Unpaged | LodError::AlreadyBuilt(_) => CliError::Data(e.to_string()),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load(path: &Path) -> Result<SceneFile> {
    read_scene(path).map_err(|e| scene_error(path, e))
}

fn save(scene: &SceneFile, path: &Path) -> Result<()> {
    write_scene(scene, path).map_err(|e| scene_error(path, e))
}

fn require_unpaged(scene: &SceneFile, path: &Path) -> Result<()> {
    if scene.is_paged() {
        return Err(CliError::Data(format!("{}: scene is already paged", path.display())));
    }
    Ok(())
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be positive")));
    }
    Ok(())
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(a) => convert(a),
        Command::Mesh(a) => mesh(a),
        Command::Page(a) => page(a),
        Command::Lod(a) => lod(a),
        Command::Render(a) => render(a),
        Command::Bench(a) => bench(a),
        Command::Compare(a) => compare(a),
        Command::Synth(a) => synth_scene(a),
    }
}

fn convert(a: ConvertArgs) -> Result<()> {
    if !(a.crop > 0.0) {
        return Err(CliError::Usage("--crop must be positive".into()));
    }
    let gaussians = load_input_scene(&a.input, a.crop).map_err(|e| io_error(&a.input, e))?;
    let n = gaussians.len();
    save(&SceneFile::unpaged(gaussians), &a.output)?;
    println!("{n} gaussians written to {}", a.output.display());
    Ok(())
}

fn mesh(a: MeshArgs) -> Result<()> {
    positive("grid", a.grid)?;
    positive("page-size", a.page_size)?;
    if !(a.extent > 0.0) {
        return Err(CliError::Usage("--extent must be positive".into()));
    }
    let mut scene = load(&a.input)?;
    require_unpaged(&scene, &a.input)?;
    let params = MeshParams {
        grid: a.grid,
        close_radius: a.close,
        open_radius: a.open,
        extent: a.extent,
        target_faces: a
            .target_faces
            .unwrap_or_else(|| MeshParams::default_target_faces(scene.gaussians.len(), a.page_size)),
    };
    let t = Instant::now();
    scene.mesh = build_proxy_mesh(&scene.gaussians, &params);
    let elapsed = t.elapsed();
    if let Some(obj) = &a.obj {
        let file = fs::File::create(obj).map_err(|e| io_error(obj, e))?;
        scene.mesh.write_obj(std::io::BufWriter::new(file)).map_err(|e| io_error(obj, e))?;
    }
    save(&scene, &a.output)?;
    println!(
        "mesh: {} vertices, {} faces in {:.1} ms",
        scene.mesh.vertices.len(),
        scene.mesh.faces.len(),
        ms(elapsed)
    );
    Ok(())
}

fn page(a: PageArgs) -> Result<()> {
    positive("page-size", a.page_size)?;
    positive("samples", a.samples)?;
    if !(a.extent > 0.0) {
        return Err(CliError::Usage("--extent must be positive".into()));
    }
    let scene = load(&a.input)?;
    require_unpaged(&scene, &a.input)?;
    if scene.mesh.is_empty() && !scene.gaussians.is_empty() {
        return Err(CliError::Data(format!("{}: scene has no proxy mesh; run `mesh` first", a.input.display())));
    }
    let params = PagingParams {
        page_size: a.page_size,
        link: LinkParams { samples_per_gaussian: a.samples, seed: a.seed, threshold: a.link_threshold, extent: a.extent },
    };
    let t = Instant::now();
    let paged = page_scene(&scene.gaussians, &scene.mesh, &params);
    let out = paged_scene_file(&scene.gaussians, &paged, a.page_size, scene.bounds);
    let elapsed = t.elapsed();
    save(&out, &a.output)?;
    println!(
        "{} pages, {} links, {} face splits in {:.1} ms",
        out.page_count(),
        out.link_count(),
        paged.splits,
        ms(elapsed)
    );
    Ok(())
}

fn lod(a: LodArgs) -> Result<()> {
    if !(a.scale_factor > 0.0 && a.scale_factor.is_finite()) {
        return Err(CliError::Usage("--scale-factor must be positive".into()));
    }
    let scene = load(&a.input)?;
    if !scene.is_paged() {
        return Err(lod_error(LodError::Unpaged));
    }
    validate_levels(scene.page_size, a.levels).map_err(lod_error)?;
    let params = LodParams {
        levels: a.levels,
        scale_factor: a.scale_factor,
        max_iters: a.kmeans_iters,
        seed: a.seed,
        ..LodParams::default()
    };
    let t = Instant::now();
    let out = build_pyramid(&scene, &params).map_err(lod_error)?;
    let elapsed = t.elapsed();
    save(&out, &a.output)?;
    println!("{} levels, {} records in {:.1} ms", out.lod_levels, out.gaussians.len(), ms(elapsed));
    Ok(())
}

fn load_path(path: &Path) -> Result<CameraPath> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    CameraPath::parse(&text).map_err(|e| io_error(path, e))
}

fn write_image(path: &Path, img: &splatvm::splat_render::Image, sixteen_bit: bool) -> Result<()> {
    harness::write_png(path, img, sixteen_bit).map_err(|e| io_error(path, e))
}

fn render(a: RenderArgs) -> Result<()> {
    let (w, h) = (a.view.width, a.view.height);
    let cam = match (&a.path, a.eye, a.target) {
        (Some(p), _, _) => {
            let path = load_path(p)?;
            if a.frame >= path.frame_count() {
                return Err(CliError::Usage(format!("--frame {} beyond the path's {} frames", a.frame, path.frame_count())));
            }
            path.camera_at(a.frame as f64 / path.fps, w, h)
        }
        (None, Some(eye), Some(target)) => Camera::look_at(eye, target, a.up, a.fov_degrees.to_radians(), w, h),
        _ => return Err(CliError::Usage("give either --path or --eye with --target".into())),
    };
    cam.validate().map_err(|e| CliError::Usage(format!("camera: {e}")))?;
    let scene = load(&a.scene)?;
    if a.level >= scene.lod_levels {
        return Err(CliError::Usage(format!("--level {} but the scene has {} levels", a.level, scene.lod_levels)));
    }
    let gaussians = if scene.is_paged() {
        let layout = scene.layout();
        let start = (0..a.level).map(|k| layout.level_records(k)).sum::<usize>();
        &scene.gaussians[start..start + layout.level_records(a.level)]
    } else {
        &scene.gaussians[..]
    };
    let mut times = StageDurations::default();
    let t = Instant::now();
    let sorted = radix_sort(compute_keys_by(gaussians, &cam, a.view.sort_depth));
    times.sort = t.elapsed();
    let t = Instant::now();
    let (img, _) = composite(gaussians, &sorted, &cam);
    times.render = t.elapsed();
    write_image(&a.out, &img, a.view.sixteen_bit)?;
    println!(
        "{} splats, sort {:.1} ms, render {:.1} ms",
        sorted.len(),
        ms(times.sort),
        ms(times.render)
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    positive("buffer-pages", a.buffer_pages)?;
    positive("staging-pages", a.staging_pages)?;
    if !(a.vis_scale > 0.0 && a.vis_scale.is_finite()) {
        return Err(CliError::Usage("--vis-scale must be positive".into()));
    }
    if !(a.step > 0.0 && a.step.is_finite()) {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let path = load_path(&a.path)?;
    let mut cameras = path.cameras(a.view.width, a.view.height);
    if let Some(n) = a.frames {
        cameras.truncate(n);
    }
    let scene = MappedScene::open(&a.scene).map_err(|e| scene_error(&a.scene, e))?;
    let controller = ControllerConfig { band: a.band, initial_step: a.step, ..ControllerConfig::default() };
    let cfg = BenchConfig {
        vm: VmConfig {
            buffer_pages: a.buffer_pages,
            staging_pages: a.staging_pages,
            vis_scale: a.vis_scale,
            controller,
            ..VmConfig::default()
        },
        ablation: a.ablate,
        width: a.view.width,
        height: a.view.height,
        depth: a.view.sort_depth,
    };
    let frames_dir = a.out.join("frames");
    if !a.no_images {
        fs::create_dir_all(&frames_dir).map_err(|e| io_error(&frames_dir, e))?;
    }
    let mut write_failure = None;
    let stats = harness::run_benchmark(scene, &cameras, &cfg, |i, img| {
        if a.no_images || write_failure.is_some() {
            return;
        }
        let file = frames_dir.join(format!("frame_{i:05}.png"));
        if let Err(e) = write_image(&file, img, a.view.sixteen_bit) {
            write_failure = Some(e);
        }
    })
    .map_err(vm_error)?;
    if let Some(e) = write_failure {
        return Err(e);
    }
    let summary = harness::emit_reports(&stats, &a.out).map_err(|e| io_error(&a.out, e))?;
    let m = &summary.median_ms;
    println!(
        "{} frames, max missing {}, median usage {:.3}, median ms: visibility {:.2} reduce {:.2} update {:.2} copy {:.2} sort {:.2} render {:.2} total {:.2}",
        summary.frames,
        summary.max_missing,
        summary.median_usage,
        m.visibility,
        m.reduce,
        m.update,
        m.copy,
        m.sort,
        m.render,
        m.total
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let x = harness::read_png(&a.a).map_err(|e| io_error(&a.a, e))?;
    let y = harness::read_png(&a.b).map_err(|e| io_error(&a.b, e))?;
    if (x.width, x.height) != (y.width, y.height) {
        return Err(CliError::Data(format!(
            "image sizes differ: {}x{} vs {}x{}",
            x.width, x.height, y.width, y.height
        )));
    }
    println!("psnr {}", harness::psnr(&x, &y));
    println!("ssim {}", harness::ssim(&x, &y));
    Ok(())
}

fn synth_scene(a: SynthArgs) -> Result<()> {
    positive("count", a.count)?;
    let scene = match a.kind {
        SynthKind::Wall => synth::wall_scene(a.count, a.seed),
        SynthKind::Blobs => {
            let side = 10;
            let ground = a.count / 4;
            synth::blob_field(side, (a.count - ground) / (side * side), ground, a.seed)
        }
        SynthKind::Clusters => synth::clusters(8, a.count / 8, a.seed),
        SynthKind::Grid => {
            let n = (a.count as f64).cbrt().round().max(1.0) as usize;
            synth::grid(n, n, n, 0.1)
        }
    };
    write_ply(&a.output, &scene.gaussians).map_err(|e| io_error(&a.output, e))?;
    println!("{} gaussians written to {}", scene.len(), a.output.display());
    Ok(())
}
