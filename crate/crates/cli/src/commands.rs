use std::fs;
use std::path::{Path, PathBuf};

use rabilitho::analysis::{analyze_frame, AnalysisSettings, FrameMetrics};
use rabilitho::config::{default_analysis_settings, preset as preset_config, ExperimentConfig, OutputFormat};
use rabilitho::imaging::ImageFrame;
use rabilitho::io::{frame_to_pgm, frame_to_string, manifest, parse_frame, pgm_sidecar, report_block, sweep_table};
use rabilitho::{Error, Result};

pub struct RunOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub window: Option<(f64, f64)>,
}

pub fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad window start `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad window end `{hi}`"))?;
    if !(lo < hi) {
        return Err(format!("window needs lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn load(opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&opts.config, &opts.overrides)?;
    if let Some(seed) = opts.seed {
        cfg.shots.seed = seed;
    }
    if let Some(n) = opts.shots {
        cfg.shots.num_shots = n;
    }
    if let Some(dir) = &opts.out_dir {
        cfg.output.dir = dir.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn settings(cfg: &ExperimentConfig, window: Option<(f64, f64)>) -> Result<AnalysisSettings> {
    let s = cfg.analysis_settings()?;
    Ok(window.map_or(s, |w| s.with_window(w)))
}

fn label(frame: &ImageFrame) -> String {
    frame.meta.shot.map_or_else(|| "average".to_string(), |k| format!("shot {k}"))
}

fn block(frame: &ImageFrame, s: &AnalysisSettings) -> Result<(String, FrameMetrics)> {
    let m = analyze_frame(frame, s)?;
    Ok((report_block(&label(frame), &frame.meta, s, &m), m))
}

/// An output file as `(path relative to the output directory, bytes)`.
type Artifact = (String, Vec<u8>);

/// Runs the experiment and returns the averaged frame's metrics together with
/// every artifact.
fn render_run(cfg: &ExperimentConfig, window: Option<(f64, f64)>) -> Result<(FrameMetrics, Vec<Artifact>)> {
    let digest = cfg.digest()?;
    let s = settings(cfg, window)?;
    let mut out = cfg.experiment()?.run(&cfg.shot_model())?;
    out.average.meta.config_digest = digest.clone();
    for f in &mut out.shots {
        f.meta.config_digest = digest.clone();
    }

    let mut files = Vec::new();
    let mut report = Vec::new();
    let (avg_block, metrics) = block(&out.average, &s)?;
    report.push(avg_block);
    files.push(("frame_average.csv".to_string(), frame_to_string(&out.average).into_bytes()));
    if cfg.output.formats.contains(&OutputFormat::Pgm) {
        let od_max = out.average.od_values.iter().cloned().fold(0.0, f64::max);
        files.push(("frame_average.pgm".into(), frame_to_pgm(&out.average, od_max)));
        files.push(("frame_average.pgm.meta".into(), pgm_sidecar(&out.average, od_max).into_bytes()));
    }
    if cfg.output.per_shot {
        for f in &out.shots {
            let k = f.meta.shot.expect("per-shot frames carry their index");
            files.push((format!("shots/shot_{k:04}.csv"), frame_to_string(f).into_bytes()));
            report.push(block(f, &s)?.0);
        }
    }
    files.push(("report.txt".into(), report.join("\n").into_bytes()));
    files.push(("config.toml".into(), cfg.to_toml()?.into_bytes()));
    let names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    files.push((
        "manifest.txt".into(),
        manifest(&digest, cfg.shots.seed, cfg.shots.num_shots, &names).into_bytes(),
    ));
    Ok((metrics, files))
}

fn write_all(dir: &Path, files: &[Artifact]) -> Result<()> {
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
    }
    Ok(())
}

pub fn run(opts: &RunOptions) -> Result<()> {
    let cfg = load(opts)?;
    let (metrics, files) = render_run(&cfg, opts.window)?;
    write_all(Path::new(&cfg.output.dir), &files)?;
    println!(
        "wrote {} files to {} (peak_count {}, visibility {})",
        files.len(),
        cfg.output.dir,
        metrics.peak_count,
        metrics.visibility.map_or_else(|| "undefined".into(), |v| format!("{v:.4}"))
    );
    Ok(())
}

pub fn preset(name: &str, out: Option<&Path>) -> Result<()> {
    let text = preset_config(name)?.to_toml()?;
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("sweep value `{t}` is not a number")))
        })
        .collect()
}

pub fn sweep(opts: &RunOptions, param: Option<&str>, values: Option<&str>) -> Result<()> {
    let cfg = load(opts)?;
    let param = param
        .map(str::to_string)
        .or_else(|| cfg.sweep.as_ref().map(|s| s.parameter.clone()))
        .ok_or_else(|| Error::Config("no sweep parameter: pass --param or set sweep.parameter".into()))?;
    let values = match values {
        Some(v) => parse_values(v)?,
        None => cfg
            .sweep
            .as_ref()
            .map(|s| s.values.clone())
            .ok_or_else(|| Error::Config("no sweep values: pass --values or set sweep.values".into()))?,
    };
    // Resolve every point before running any, so bad targets fail early.
    let points = values
        .iter()
        .map(|&v| cfg.with_numeric(&param, v).map(|c| (v, c)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(points.len());
    for (v, point) in &points {
        rows.push((*v, render_run(point, opts.window)?.0));
    }
    let table = sweep_table(&rows);
    if opts.out_dir.is_some() {
        write_all(Path::new(&cfg.output.dir), &[("sweep.csv".into(), table.clone().into_bytes())])?;
    }
    print!("{table}");
    Ok(())
}

pub fn analyze(
    frames: &[PathBuf],
    config: Option<&Path>,
    window: Option<(f64, f64)>,
    min_prominence: Option<f64>,
) -> Result<()> {
    let mut s = match config {
        Some(path) => settings(&ExperimentConfig::load(path, &[])?, window)?,
        None => {
            let default = default_analysis_settings()?;
            window.map_or(default, |w| default.with_window(w))
        }
    };
    if let Some(p) = min_prominence {
        s.min_prominence = p;
    }
    let mut blocks = Vec::new();
    for path in frames {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let frame = parse_frame(&text, &path.display().to_string())?;
        blocks.push(block(&frame, &s)?.0);
    }
    print!("{}", blocks.join("\n"));
    Ok(())
}
