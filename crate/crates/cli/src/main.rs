use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relight::error::{Error, Result};
use relight::io::{load_lights, read_cameras, read_json, CameraRecord};
use relight::irradiance::{AddedParams, DenoiseParams};
use relight::oracle::{gen_procedural_scene, render_ground_truth, write_oracle_outputs, GtParams, GtScene, ProceduralSceneSpec};
use relight::pipeline::{
    self, digest, is_fresh, render_input_hash, AddLightOptions, PreprocessOptions, RenderOptions, SolveRecord, StageReport, Workspace,
};
use relight::scene::{AreaLight, LightingEdit, DEFAULT_VISIBILITY_TOL};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "relight", version, about = "Relighting feature renderer")]
struct Cli {
    /// Worker threads; falls back to RELIGHT_THREADS.
    #[arg(long, global = true, env = "RELIGHT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene bundle directory.
    #[arg(long)]
    scene: PathBuf,
    /// Work directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_VISIBILITY_TOL)]
    tol: f64,
}

#[derive(Args)]
struct EditArgs {
    /// Fraction of the original lighting to remove.
    #[arg(long, default_value_t = 0.0)]
    alpha_dim: f64,
    /// Comma-separated `id=weight` pairs.
    #[arg(long, default_value = "")]
    light_weights: String,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry processing, source irradiance, clusters, source mirrors, albedo mesh.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 128)]
        spp: usize,
        #[arg(long, default_value_t = 64)]
        cluster_spp: usize,
        /// Comma-separated camera ids.
        #[arg(long)]
        views: Option<String>,
        #[arg(long, default_value_t = 3)]
        smooth_iters: usize,
        #[arg(long)]
        snap_planes: bool,
        #[arg(long)]
        no_denoise: bool,
    },
    /// Recovers clipped light intensities from equal-albedo clicks.
    SolveLights {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        clicks: PathBuf,
    },
    /// Added irradiance of new area lights in every view.
    AddLight {
        #[command(flatten)]
        common: Common,
        /// lights.json with the lights to add.
        #[arg(long)]
        lights: PathBuf,
        /// Only the light with this id.
        #[arg(long)]
        light_id: Option<u32>,
        #[arg(long, default_value_t = 16)]
        spp: usize,
        #[arg(long, default_value_t = 5)]
        max_depth: usize,
        #[arg(long)]
        views: Option<String>,
        #[arg(long)]
        no_denoise: bool,
    },
    /// Feature stack for a novel camera under a lighting edit.
    RenderFeatures {
        #[command(flatten)]
        common: Common,
        /// Camera JSON (inline or file) or an index into the scene's cameras.json.
        #[arg(long)]
        novel_camera: String,
        #[command(flatten)]
        edit: EditArgs,
        /// Output directory; defaults to `<out>/render`.
        #[arg(long)]
        render_dir: Option<PathBuf>,
        #[arg(long, default_value_t = relight::featurepack::DEFAULT_MU)]
        mu: f64,
    },
    /// Procedural scene with path-traced ground truth.
    OracleGen {
        #[arg(long)]
        out: PathBuf,
        /// empty-room, lambertian-box or mirror-box.
        #[arg(long, default_value = "empty-room")]
        preset: String,
        /// Procedural scene JSON; overrides the preset.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per pixel of the input renders.
        #[arg(long)]
        spp: Option<usize>,
        /// Samples per pixel of the ground truth; defaults to the input count.
        #[arg(long)]
        gt_spp: Option<usize>,
        /// lights.json with added lights for an edited ground truth.
        #[arg(long)]
        lights: Option<PathBuf>,
        #[command(flatten)]
        edit: EditArgs,
    },
    /// Pixel flow between camera pairs.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `a:b` pairs; defaults to consecutive views both ways.
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        views: Option<String>,
    },
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_ids(s: &str) -> Result<Vec<u32>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse().map_err(|_| bad(format!("bad camera id {t:?}")))).collect()
}

fn parse_weights(s: &str) -> Result<BTreeMap<u32, f64>> {
    let mut out = BTreeMap::new();
    for tok in s.split(',').filter(|t| !t.trim().is_empty()) {
        let (id, w) = tok.split_once('=').ok_or_else(|| bad(format!("bad light weight {tok:?}; expected id=weight")))?;
        let id: u32 = id.trim().parse().map_err(|_| bad(format!("bad light id {id:?}")))?;
        let w: f64 = w.trim().parse().map_err(|_| bad(format!("bad weight {w:?}")))?;
        out.insert(id, w);
    }
    Ok(out)
}

fn parse_pairs(s: &str) -> Result<Vec<(u32, u32)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (a, b) = t.split_once(':').ok_or_else(|| bad(format!("bad pair {t:?}; expected a:b")))?;
            Ok((a.trim().parse().map_err(|_| bad(format!("bad id {a:?}")))?, b.trim().parse().map_err(|_| bad(format!("bad id {b:?}")))?))
        })
        .collect()
}

fn edit_from(args: &EditArgs) -> Result<LightingEdit<f64>> {
    let edit = LightingEdit { alpha_dim: args.alpha_dim, light_weights: parse_weights(&args.light_weights)? };
    edit.validate()?;
    Ok(edit)
}

fn novel_camera(scene: &Path, arg: &str) -> Result<(relight::camera::Camera<f64>, String)> {
    if let Ok(index) = arg.trim().parse::<usize>() {
        let cams = read_cameras::<f64>(&scene.join("cameras.json"))?;
        let cam = cams.get(index).cloned().ok_or_else(|| bad(format!("camera index {index} out of range ({} cameras)", cams.len())))?;
        let text = serde_json::to_string(&CameraRecord::from_camera(&cam)).expect("camera serializes");
        return Ok((cam, text));
    }
    let path = Path::new(arg);
    let record: CameraRecord = if path.is_file() {
        read_json(path)?
    } else {
        serde_json::from_str(arg).map_err(|e| bad(format!("--novel-camera is neither an index, a file, nor camera JSON: {e}")))?
    };
    let cam = record.to_camera::<f64>();
    cam.validate()?;
    Ok((cam, serde_json::to_string(&record).expect("camera serializes")))
}

fn report_json(command: &str, r: &StageReport, extra: Value) -> Value {
    json!({"command": command, "written": r.written, "skipped": r.skipped, "result": extra})
}

fn run(cli: Cli) -> Result<Value> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(bad("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| bad(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Preprocess { common, spp, cluster_spp, views, smooth_iters, snap_planes, no_denoise } => {
            let opts = PreprocessOptions {
                spp,
                cluster_spp,
                seed: common.seed,
                smooth_iters,
                snap_planes,
                tol: common.tol,
                views: views.as_deref().map(parse_ids).transpose()?,
                denoise: (!no_denoise).then(DenoiseParams::default),
            };
            let r = pipeline::preprocess::<f64>(&common.scene, &Workspace::new(&common.out), &opts)?;
            Ok(report_json("preprocess", &r, Value::Null))
        }
        Command::SolveLights { common, clicks } => {
            let (solve, r) = pipeline::solve_lights::<f64>(&common.scene, &Workspace::new(&common.out), &clicks, common.tol)?;
            Ok(report_json("solve-lights", &r, serde_json::to_value(SolveRecord::from_solve(&solve)).expect("serializes")))
        }
        Command::AddLight { common, lights, light_id, spp, max_depth, views, no_denoise } => {
            let mut all: Vec<AreaLight<f64>> = load_lights(&lights)?;
            if let Some(id) = light_id {
                all.retain(|l| l.id == id);
                if all.is_empty() {
                    return Err(bad(format!("no light with id {id} in {}", lights.display())));
                }
            }
            let opts = AddLightOptions {
                params: AddedParams { spp, max_depth, seed: common.seed, denoise: (!no_denoise).then(DenoiseParams::default) },
                views: views.as_deref().map(parse_ids).transpose()?,
            };
            let r = pipeline::add_lights(&common.scene, &Workspace::new(&common.out), &all, &opts)?;
            Ok(report_json("add-light", &r, json!({"lights": all.iter().map(|l| l.id).collect::<Vec<_>>()})))
        }
        Command::RenderFeatures { common, novel_camera: cam_arg, edit, render_dir, mu } => {
            let ws = Workspace::new(&common.out);
            let edit = edit_from(&edit)?;
            let (camera, cam_json) = novel_camera(&common.scene, &cam_arg)?;
            let scene = ws.load_scene::<f64>(&common.scene)?;
            let opts = RenderOptions { seed: common.seed, mu, tol: common.tol };
            let edit_json = json!({"alpha_dim": edit.alpha_dim, "light_weights": edit.light_weights}).to_string();
            let hash = render_input_hash(&common.scene, &ws, &scene, &edit_json, &cam_json, &opts)?;
            let dir = render_dir.unwrap_or_else(|| common.out.join("render"));
            let ften = dir.join("features.ften");
            if is_fresh(&ften, &hash) {
                return Ok(report_json("render-features", &StageReport { written: vec![], skipped: vec![ften] }, Value::Null));
            }
            let lights: Vec<u32> = edit.light_weights.keys().copied().collect();
            let irradiance = ws.load_irradiance(&scene, &lights)?;
            let mirrors = ws.load_mirrors(&scene)?;
            let out = pipeline::render_features(&scene, &irradiance, &mirrors, &edit, &camera, &opts)?;
            let r = pipeline::write_render_output(&dir, &out, &hash)?;
            Ok(report_json("render-features", &r, json!({"height": out.stack.height, "width": out.stack.width, "channels": out.stack.channel_count()})))
        }
        Command::OracleGen { out, preset, spec, seed, spp, gt_spp, lights, edit } => {
            let mut spec: ProceduralSceneSpec = match spec {
                Some(p) => read_json(&p)?,
                None => match preset.as_str() {
                    "empty-room" => ProceduralSceneSpec::empty_room(),
                    "lambertian-box" => ProceduralSceneSpec::lambertian_box([0.5, 0.5, 0.5]),
                    "mirror-box" => ProceduralSceneSpec::mirror_box(),
                    other => return Err(bad(format!("unknown preset {other:?}"))),
                },
            };
            if let Some(s) = spp {
                spec.spp = s;
            }
            spec.validate()?;
            let edit = edit_from(&edit)?;
            let added: Vec<(AreaLight<f64>, f64)> = match &lights {
                Some(p) => load_lights::<f64>(p)?.into_iter().filter_map(|l| edit.light_weights.get(&l.id).map(|w| (l, *w))).collect(),
                None => Vec::new(),
            };
            if added.len() != edit.light_weights.len() {
                return Err(Error::InvalidEdit("--light-weights names a light missing from --lights".into()));
            }
            let spec_json = serde_json::to_string(&spec).expect("spec serializes");
            let edit_json = json!({"alpha_dim": edit.alpha_dim, "added": added.iter().map(|(l, w)| json!([relight::io::LightRecord::from_light(l), w])).collect::<Vec<_>>(), "gt_spp": gt_spp}).to_string();
            let hash = digest(&[spec_json.as_bytes(), &seed.to_le_bytes(), edit_json.as_bytes()]);
            let stamp = out.join("gt").join("materials.json");
            if is_fresh(&stamp, &hash) {
                return Ok(report_json("oracle-gen", &StageReport { written: vec![], skipped: vec![stamp] }, Value::Null));
            }
            let generated = gen_procedural_scene::<f64>(&spec, seed)?;
            let is_noop = edit.alpha_dim == 0.0 && added.is_empty() && gt_spp.is_none_or(|s| s == spec.spp);
            let gt_renders = if is_noop {
                generated.renders.clone()
            } else {
                let lighting = GtScene::edited_lighting(&generated.gt, edit.alpha_dim, &added);
                let params = GtParams { spp: gt_spp.unwrap_or(spec.spp), max_depth: spec.max_depth, seed };
                generated.scene.cameras.iter().map(|c| render_ground_truth(&generated.gt, c, &lighting, &params)).collect()
            };
            write_oracle_outputs(&out, &generated, &gt_renders)?;
            pipeline::write_stamp(&stamp, "oracle", seed, spec.spp, json!({"spec": spec, "edit": serde_json::from_str::<Value>(&edit_json).expect("valid")}), &hash)?;
            let written = vec![out.join("cameras.json"), out.join("mesh.ply"), out.join("images"), out.join("gt")];
            Ok(report_json("oracle-gen", &StageReport { written, skipped: vec![] }, json!({"views": generated.scene.cameras.len()})))
        }
        Command::Flow { common, pairs, views } => {
            let ids: Vec<u32> = match views.as_deref() {
                Some(v) => parse_ids(v)?,
                None => read_cameras::<f64>(&common.scene.join("cameras.json"))?.iter().map(|c| c.id).collect(),
            };
            let pairs = match pairs {
                Some(p) => parse_pairs(&p)?,
                None => ids.windows(2).flat_map(|w| [(w[0], w[1]), (w[1], w[0])]).collect(),
            };
            let r = pipeline::write_flows::<f64>(&common.scene, &Workspace::new(&common.out), &pairs, common.tol)?;
            Ok(report_json("flow", &r, json!({"pairs": pairs.len()})))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.to_string().trim(), "kind": "usage"}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.to_string(), "kind": e.kind()}));
            ExitCode::FAILURE
        }
    }
}
