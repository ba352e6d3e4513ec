//! Verb implementations. Each returns a [`CliError`] whose exit code
//! classifies the failure.

use std::fs;
use std::path::{Path, PathBuf};

use msgpm::densify::InterpolatorRegistry;
use msgpm::imgcore::{
    compute_epe, epe_difference_map, flow_to_color, load_image, occlusion_scores, read_flo, write_f32_raster,
    write_flo, write_label_png, EpeReport, Image, OcclusionMask,
};
use msgpm::multiscale::initial_nnfs;
use msgpm::patchmatch::Nnf;
use msgpm::pipeline::{preprocess, run_pipeline, PipelineError, PipelineOutput};
use msgpm::preprocess::PreprocessorRegistry;
use msgpm::synth::{fixture_by_name, make_plane_scene, FIXTURES};

use crate::cache::NnfCache;
use crate::config::RunConfig;
use crate::error::{create_dir, CliError};
use crate::report::{epe_table, RunReport};

fn required<'a>(p: &'a Option<PathBuf>, verb: &str, key: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("{verb}: {key} is required (flag or config key)")))
}

fn check_names(cfg: &RunConfig) -> Result<(), CliError> {
    let p = &cfg.pipeline;
    let pre = PreprocessorRegistry::default();
    if pre.get(&p.preprocess).is_none() {
        return Err(CliError::Usage(format!(
            "config: unknown preprocess {:?}; available: {}",
            p.preprocess,
            pre.names().join(", ")
        )));
    }
    let interp = InterpolatorRegistry::default();
    if !interp.names().contains(&p.interpolator.as_str()) {
        return Err(CliError::Usage(format!(
            "config: unknown interpolator {:?}; available: {}",
            p.interpolator,
            interp.names().join(", ")
        )));
    }
    Ok(())
}

fn load_pair(cfg: &RunConfig, verb: &str) -> Result<(Image, Image), CliError> {
    let a = load_image(required(&cfg.img1, verb, "img1")?)?;
    let b = load_image(required(&cfg.img2, verb, "img2")?)?;
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(CliError::Numeric(format!(
            "{verb}: images differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok((a, b))
}

/// Initial NNFs of the preprocessed pair, through the cache when one is
/// configured.
fn nnfs_for(a: &Image, b: &Image, cfg: &RunConfig, cache: Option<&Path>) -> Result<(Nnf, Nnf), CliError> {
    let (pa, pb) = preprocess(a, b, &cfg.pipeline.preprocess)?;
    let pm = &cfg.pipeline.patchmatch;
    let cache = cache.map(NnfCache::new);
    if let Some(hit) = cache.as_ref().and_then(|c| c.load(&pa, &pb, pm)) {
        return Ok(hit);
    }
    let nnfs = initial_nnfs(&pa, &pb, pm).map_err(|e| CliError::from(PipelineError::PatchMatch(e)))?;
    if let Some(c) = &cache {
        c.store(&pa, &pb, pm, &nnfs)?;
    }
    Ok(nnfs)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_occ(path: &Path, dims: (usize, usize)) -> Result<OcclusionMask, CliError> {
    let m = OcclusionMask::load(path)?;
    if m.dims() != dims {
        return Err(CliError::Numeric(format!(
            "imgcore: occlusion mask {} is {}x{}, expected {}x{}",
            path.display(),
            m.width(),
            m.height(),
            dims.0,
            dims.1
        )));
    }
    Ok(m)
}

fn write_nnf(nnf: &Nnf, dir: &Path, stem: &str) -> Result<(), CliError> {
    write_flo(&nnf.to_flow(), dir.join(format!("{stem}.flo")))?;
    write_f32_raster(nnf.costs(), nnf.width(), nnf.height(), dir.join(format!("{stem}_cost.pf32")))?;
    Ok(())
}

/// Per-level assignments, models and NNFs.
pub fn dump_levels(out: &PipelineOutput, dir: &Path) -> Result<(), CliError> {
    create_dir(&dir.to_path_buf())?;
    write_nnf(&out.initial_nnf.0, dir, "initial_nnf_fwd")?;
    write_nnf(&out.initial_nnf.1, dir, "initial_nnf_bwd")?;
    for lv in &out.msgpm.levels {
        let l = lv.level;
        let asg = &lv.assignment;
        let labels: Vec<u32> = asg.model.iter().map(|m| m.map_or(0, |id| id as u32 + 1)).collect();
        write_label_png(&labels, asg.width, asg.height, dir.join(format!("level{l}_labels.png")))?;
        let loss: Vec<f64> = asg
            .model
            .iter()
            .zip(&asg.loss)
            .map(|(m, &v)| if m.is_some() { v } else { f64::NAN })
            .collect();
        write_f32_raster(&loss, asg.width, asg.height, dir.join(format!("level{l}_loss.pf32")))?;
        let mut text = format!("# level {l} radius {}\n# id window status h00 h01 h02 h10 h11 h12 h20 h21 h22\n", lv.radius);
        for m in out.msgpm.models.iter().filter(|m| m.level == l) {
            text.push_str(&format!("{} {} {}", m.id, m.window.id, m.status.as_str()));
            for v in m.h_fwd.to_row_major() {
                text.push_str(&format!(" {v:e}"));
            }
            text.push('\n');
        }
        write_text(&dir.join(format!("level{l}_models.txt")), &text)?;
        let demoted: String = lv.demoted.iter().map(|i| format!("{i}\n")).collect();
        write_text(&dir.join(format!("level{l}_demoted.txt")), &demoted)?;
        write_nnf(&lv.nnf_fwd, dir, &format!("level{l}_nnf_fwd"))?;
        write_nnf(&lv.nnf_bwd, dir, &format!("level{l}_nnf_bwd"))?;
    }
    Ok(())
}

/// Optional extras of the `flow` verb.
#[derive(Debug, Clone, Default)]
pub struct FlowOptions {
    pub dump_levels: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

/// What a `flow` run produced, for printing and for tests.
#[derive(Debug, Clone)]
pub struct FlowSummary {
    pub out_dir: PathBuf,
    pub output: PipelineOutput,
    pub report: Option<RunReport>,
    pub epe: Option<EpeReport>,
}

/// Runs the full pipeline and writes its artifacts to `out_dir`:
/// `flow.flo`, `flow.png`, `occlusion.png`, `plane_flow.flo`,
/// `models.txt`, `manifest.txt` and, with ground truth, `report.json` and
/// `table.md`.
pub fn run_flow(cfg: &RunConfig, opts: &FlowOptions) -> Result<FlowSummary, CliError> {
    check_names(cfg)?;
    let out_dir = required(&cfg.out_dir, "flow", "out_dir")?.to_path_buf();
    let (img1, img2) = load_pair(cfg, "flow")?;
    let nnfs = nnfs_for(&img1, &img2, cfg, opts.cache.as_deref())?;
    let output = run_pipeline(&img1, &img2, &cfg.pipeline, Some(nnfs))?;

    create_dir(&out_dir)?;
    write_text(&out_dir.join("manifest.txt"), &cfg.manifest())?;
    write_flo(&output.flow, out_dir.join("flow.flo"))?;
    write_flo(&output.propagated.flow, out_dir.join("plane_flow.flo"))?;
    output.occlusion.save_png(out_dir.join("occlusion.png"))?;
    flow_to_color(&output.flow, None).save_png(out_dir.join("flow.png"))?;
    write_text(&out_dir.join("models.txt"), &output.cue_report)?;
    if let Some(d) = &opts.dump_levels {
        dump_levels(&output, d)?;
    }

    let (mut report, mut epe) = (None, None);
    if let Some(gt_path) = &cfg.gt_flow {
        let gt = read_flo(gt_path)?;
        let gt_occ = match &cfg.gt_occ {
            Some(p) => Some(load_occ(p, gt.dims())?),
            None => None,
        };
        let mask = gt_occ.clone().unwrap_or_else(|| OcclusionMask::empty(gt.width(), gt.height()));
        let e = compute_epe(&output.flow, &gt, &mask)?;
        let score = match &gt_occ {
            Some(m) => Some(occlusion_scores(&output.occlusion, m)?),
            None => None,
        };
        let r = RunReport::new("msgpm", &e, score.as_ref());
        write_text(&out_dir.join("report.json"), &r.to_json())?;
        write_text(&out_dir.join("table.md"), &epe_table(&[("msgpm", &e)]))?;
        report = Some(r);
        epe = Some(e);
    }
    Ok(FlowSummary {
        out_dir,
        output,
        report,
        epe,
    })
}

/// Forward NNF (and optionally the backward one) with cost sidecars.
pub fn run_nnf(cfg: &RunConfig, out: &Path, backward: Option<&Path>, cache: Option<&Path>) -> Result<(), CliError> {
    check_names(cfg)?;
    let (a, b) = load_pair(cfg, "nnf")?;
    let (f, g) = nnfs_for(&a, &b, cfg, cache)?;
    write_flo(&f.to_flow(), out)?;
    write_f32_raster(f.costs(), f.width(), f.height(), out.with_extension("pf32"))?;
    if let Some(p) = backward {
        write_flo(&g.to_flow(), p)?;
        write_f32_raster(g.costs(), g.width(), g.height(), p.with_extension("pf32"))?;
    }
    Ok(())
}

/// Metrics of one flow against ground truth. Returns the table text.
pub fn run_eval(
    flow: &Path,
    gt_flow: &Path,
    gt_occ: Option<&Path>,
    pred_occ: Option<&Path>,
    method: &str,
    json: Option<&Path>,
) -> Result<String, CliError> {
    let f = read_flo(flow)?;
    let gt = read_flo(gt_flow)?;
    let truth = match gt_occ {
        Some(p) => Some(load_occ(p, gt.dims())?),
        None => None,
    };
    let mask = truth.clone().unwrap_or_else(|| OcclusionMask::empty(gt.width(), gt.height()));
    let e = compute_epe(&f, &gt, &mask)?;
    let score = match (pred_occ, &truth) {
        (Some(p), Some(t)) => Some(occlusion_scores(&load_occ(p, gt.dims())?, t)?),
        (Some(_), None) => return Err(CliError::Usage("eval: --occ needs --gt-occ".into())),
        _ => None,
    };
    if let Some(j) = json {
        write_text(j, &RunReport::new(method, &e, score.as_ref()).to_json())?;
    }
    let mut text = epe_table(&[(method, &e)]);
    if let Some(s) = score {
        text.push_str(&format!(
            "\nocclusion precision {:.3} recall {:.3} f1 {:.3}\n",
            s.precision, s.recall, s.f1
        ));
    }
    Ok(text)
}

/// Two flows against one ground truth: table plus difference map.
pub fn run_compare(
    flow_a: &Path,
    flow_b: &Path,
    gt_flow: &Path,
    gt_occ: Option<&Path>,
    names: (&str, &str),
    map_out: &Path,
) -> Result<String, CliError> {
    let a = read_flo(flow_a)?;
    let b = read_flo(flow_b)?;
    let gt = read_flo(gt_flow)?;
    let mask = match gt_occ {
        Some(p) => load_occ(p, gt.dims())?,
        None => OcclusionMask::empty(gt.width(), gt.height()),
    };
    let ea = compute_epe(&a, &gt, &mask)?;
    let eb = compute_epe(&b, &gt, &mask)?;
    epe_difference_map(&a, &b, &gt)?.save_png(map_out)?;
    Ok(epe_table(&[(names.0, &ea), (names.1, &eb)]))
}

/// Writes `img1.png`, `img2.png`, `gt_flow.flo` and `gt_occ.png` for one
/// fixture into `dir`.
pub fn run_synth(fixture: &str, seed: u64, dir: &Path) -> Result<(), CliError> {
    let spec = fixture_by_name(fixture, seed).map_err(|e| {
        CliError::Usage(format!("synth: {e}; available: {}", FIXTURES.join(", ")))
    })?;
    let scene = make_plane_scene(&spec).map_err(|e| CliError::Numeric(format!("synth: {e}")))?;
    create_dir(&dir.to_path_buf())?;
    scene.img1.save_png(dir.join("img1.png"))?;
    scene.img2.save_png(dir.join("img2.png"))?;
    write_flo(&scene.flow, dir.join("gt_flow.flo"))?;
    scene.occlusion.save_png(dir.join("gt_occ.png"))?;
    Ok(())
}
