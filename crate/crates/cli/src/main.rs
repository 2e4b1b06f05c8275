use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compiqa::ciqa::{compare, Variant};
use compiqa::config::Config;
use compiqa::distortions::{calibrate_level, ladder_at, DistortionKind};
use compiqa::io::{read_image, write_pgm, write_pgm16};
use compiqa::metricq::overall_aq;
use compiqa::recon::{log_space, phantom, reconstruct, simulate_measurements, FourierSystem};
use compiqa::selection::{key_image_select, rank, weighted_inversions, DistortionLadder};
use compiqa::ssim::ssim_default;
use compiqa::trimming::{run_sweep, run_trimmed_sweep, run_trimmed_sweep_2d, TraceRow, TrimConfig, Topology};
use compiqa::{fmt_sig, Error, GrayImage, Result};

#[derive(Parser)]
#[command(name = "compiqa", version, about = "Comparison-based image quality assessment and parameter trimming")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; receives a config snapshot.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Score the first image against the second (positive: first is better).
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        map_pgm: Option<PathBuf>,
        #[arg(long)]
        map_csv: Option<PathBuf>,
    },
    /// Bubble-sort images from worst to best.
    Rank {
        /// Image files, or a single directory of them.
        inputs: Vec<PathBuf>,
        /// Clean image used to report SSIM and the weighted inversion number.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Key-image selection over a series ordered by increasing processing.
    Keyselect {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Write a distortion ladder as numbered PGM files plus a manifest.
    Distort {
        image: PathBuf,
        #[arg(long)]
        kind: DistortionKind,
        /// Endpoint level; calibrated to the target SSIM when omitted.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Full-reference SSIM.
    Ssim { a: PathBuf, b: PathBuf },
    /// Single-image MetricQ content score.
    Metricq {
        image: PathBuf,
        #[arg(long)]
        q_map: Option<PathBuf>,
    },
    /// Simulate undersampled Fourier data and reconstruct it.
    Recon {
        /// Image file or `phantom:<k>[:<size>]`.
        image: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Run the untrimmed sweep over the configured beta grid instead.
        #[arg(long)]
        sweep: bool,
    },
    /// Trimmed sweep over the configured beta grid.
    Trim { image: String },
    /// Trimmed sweep over the configured beta x gamma grid.
    Trim2d { image: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format(_) => 2,
        Error::InvalidArgument(_) | Error::Config(_) => 3,
        Error::Numerical(_) => 4,
        Error::Internal(_) => 1,
    }
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Creates the output directory, if any, and stamps the config into it.
fn prepare_out(cfg: &Config) -> Result<Option<PathBuf>> {
    let Some(dir) = &cfg.output_dir else {
        return Ok(None);
    };
    let dir = PathBuf::from(dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_text(&dir.join("config.txt"), &cfg.to_text())?;
    Ok(Some(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(d) => write_text(&d.join(name), text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if let [one] = inputs {
        if one.is_dir() {
            let rd = fs::read_dir(one).map_err(|e| Error::io(one, e))?;
            let mut files: Vec<PathBuf> = rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|x| x.to_str()).map(str::to_ascii_lowercase).as_deref(),
                        Some("pgm" | "png")
                    )
                })
                .collect();
            files.sort();
            return Ok(files);
        }
    }
    Ok(inputs.to_vec())
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<GrayImage>> {
    paths.iter().map(read_image).collect()
}

fn load_scene(spec: &str) -> Result<GrayImage> {
    if let Some(rest) = spec.strip_prefix("phantom:") {
        let mut it = rest.split(':');
        let bad = || Error::invalid(format!("expected phantom:<k>[:<size>], got {spec:?}"));
        let k: u64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let size: usize = match it.next() {
            Some(s) => s.parse().map_err(|_| bad())?,
            None => 64,
        };
        return phantom::suite_phantom(size, k);
    }
    read_image(spec)
}

fn measurements(cfg: &Config, img: &GrayImage) -> Result<FourierSystem> {
    simulate_measurements(img, cfg.sample_fraction, cfg.snr_db, cfg.seed)
}

fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TraceRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    match cli.cmd {
        Cmd::Compare { a, b, variant, map_pgm, map_csv } => {
            if let Some(v) = variant {
                cfg.ciqa.variant = v;
            }
            let out = prepare_out(&cfg)?;
            let (ia, ib) = (read_image(&a)?, read_image(&b)?);
            let res = compare(&ia, &ib, &cfg.ciqa)?;
            println!("{}", fmt_sig(res.score));
            if let Some(p) = map_pgm {
                res.map.write_pgm(p)?;
            }
            if let Some(p) = map_csv {
                res.map.write_csv(p)?;
            }
            if let Some(d) = out {
                write_text(&d.join("score.txt"), &format!("{}\n", fmt_sig(res.score)))?;
            }
        }
        Cmd::Rank { inputs, reference } => {
            let out = prepare_out(&cfg)?;
            let paths = collect_inputs(&inputs)?;
            let imgs = load_all(&paths)?;
            let r = rank(&imgs, &cfg.ciqa, cfg.seed)?;
            let truth = match &reference {
                Some(p) => {
                    let clean = read_image(p)?;
                    Some(imgs.iter().map(|x| ssim_default(x, &clean)).collect::<Result<Vec<_>>>()?)
                }
                None => None,
            };
            let mut csv = String::from("rank,index,path,ssim\n");
            for (pos, &i) in r.order.iter().enumerate() {
                let s = truth.as_ref().map(|t| fmt_sig(t[i])).unwrap_or_default();
                csv.push_str(&format!("{pos},{i},{},{s}\n", paths[i].display()));
            }
            emit(&out, "rank.csv", &csv)?;
            let mut summary = format!("comparisons={}\n", r.comparisons_used);
            if let Some(t) = &truth {
                summary.push_str(&format!("weighted_inversion={}\n", fmt_sig(weighted_inversions(&r.order, t)?)));
            }
            print!("{summary}");
        }
        Cmd::Keyselect { inputs, reference } => {
            let out = prepare_out(&cfg)?;
            let paths = collect_inputs(&inputs)?;
            let imgs = load_all(&paths)?;
            let labels = (0..imgs.len()).map(|i| i as f64).collect();
            let ladder = DistortionLadder::new(imgs, labels)?;
            let sel = key_image_select(&ladder, &cfg.ciqa, cfg.k_thresh, cfg.mse_scale)?;
            let mut csv = String::from("index,path,key,selected\n");
            for (i, p) in paths.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    p.display(),
                    sel.keys.contains(&i) as u8,
                    (i == sel.index) as u8
                ));
            }
            if let Some(d) = &out {
                write_text(&d.join("keyselect.csv"), &csv)?;
            }
            println!("selected={}", sel.index);
            println!("path={}", paths[sel.index].display());
            println!("segment={},{}", sel.segment.0, sel.segment.1);
            println!("monotone_warning={}", sel.monotone_warning);
            if let Some(p) = reference {
                let clean = read_image(p)?;
                let s = ladder.images.iter().map(|x| ssim_default(x, &clean)).collect::<Result<Vec<_>>>()?;
                let best = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                println!("ssim_gap={}", fmt_sig(best - s[sel.index]));
            }
        }
        Cmd::Distort { image, kind, level, count } => {
            let out = prepare_out(&cfg)?.ok_or_else(|| Error::invalid("distort needs --out"))?;
            let img = read_image(&image)?;
            let level = match level {
                Some(l) => l,
                None => calibrate_level(&img, kind, cfg.target_ssim, cfg.seed)?,
            };
            let lad = ladder_at(&img, kind, level, count.unwrap_or(cfg.ladder_count), cfg.seed)?;
            let mut csv = String::from("index,kind,level,seed,ssim\n");
            for (i, (x, l)) in lad.images.iter().zip(&lad.labels).enumerate() {
                write_pgm(out.join(format!("distorted_{i:03}.pgm")), x)?;
                let s = ssim_default(x, &img)?;
                csv.push_str(&format!("{i},{kind},{},{},{}\n", fmt_sig(*l), cfg.seed, fmt_sig(s)));
            }
            write_text(&out.join("manifest.csv"), &csv)?;
            println!("level={}", fmt_sig(level));
        }
        Cmd::Ssim { a, b } => {
            prepare_out(&cfg)?;
            println!("{}", fmt_sig(ssim_default(&read_image(a)?, &read_image(b)?)?));
        }
        Cmd::Metricq { image, q_map } => {
            prepare_out(&cfg)?;
            let img = read_image(image)?;
            let r = overall_aq(&img, cfg.ciqa.n, cfg.tau)?;
            println!("{}", fmt_sig(r.aq));
            if let Some(p) = q_map {
                let hi = r.q_map.iter().cloned().fold(0.0, f64::max);
                let scaled = r.q_map.iter().map(|v| if hi > 0.0 { v / hi } else { 0.0 }).collect();
                write_pgm(p, &GrayImage::new(r.width, r.height, scaled)?)?;
            }
        }
        Cmd::Recon { image, beta, gamma, sweep } => {
            let out = prepare_out(&cfg)?;
            let img = load_scene(&image)?;
            let sys = measurements(&cfg, &img)?;
            if sweep {
                let params: Vec<_> = log_space(cfg.beta_min, cfg.beta_max, cfg.beta_count)
                    .into_iter()
                    .map(|b| cfg.recon_params(b, gamma.unwrap_or(0.0)))
                    .collect();
                let topo = Topology::Line(params.len());
                let r = run_sweep(&sys, &params, topo, &cfg.ciqa, &TrimConfig::untrimmed(), Some(&img))?;
                println!("selected_index={}", r.selected);
                println!("selected_beta={}", fmt_sig(params[r.selected].beta));
                println!("iterations_spent={}", r.iterations_spent);
                if let Some(d) = &out {
                    write_text(&d.join("trace.csv"), &trace_csv(&r.trace))?;
                    write_pgm16(d.join("selected.pgm"), &r.final_images[r.selected].clamped())?;
                }
            } else {
                let p = cfg.recon_params(beta.unwrap_or(cfg.beta), gamma.unwrap_or(0.0));
                let mut rows = String::from("k,cost,rel_change,ssim\n");
                let mut err = None;
                let st = reconstruct(&sys, &p, |k, s| match ssim_default(&s.image().clamped(), &img) {
                    Ok(v) => rows.push_str(&format!(
                        "{k},{},{},{}\n",
                        fmt_sig(s.cost),
                        fmt_sig(s.rel_change),
                        fmt_sig(v)
                    )),
                    Err(e) => err = Some(e),
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                let x = st.image().clamped();
                println!("iterations={}", st.k);
                println!("ssim={}", fmt_sig(ssim_default(&x, &img)?));
                if let Some(d) = &out {
                    write_text(&d.join("trace.csv"), &rows)?;
                    write_pgm16(d.join("recon.pgm"), &x)?;
                    write_pgm16(d.join("zero_filled.pgm"), &sys.zero_filled().clamped())?;
                }
            }
        }
        Cmd::Trim { image } => {
            let out = prepare_out(&cfg)?;
            let img = load_scene(&image)?;
            let sys = measurements(&cfg, &img)?;
            let params: Vec<_> = log_space(cfg.beta_min, cfg.beta_max, cfg.beta_count)
                .into_iter()
                .map(|b| cfg.recon_params(b, 0.0))
                .collect();
            let r = run_trimmed_sweep(&sys, &params, &cfg.ciqa, &cfg.trim, Some(&img))?;
            report_trim(&out, &r, &img)?;
        }
        Cmd::Trim2d { image } => {
            let out = prepare_out(&cfg)?;
            let img = load_scene(&image)?;
            let sys = measurements(&cfg, &img)?;
            let betas = log_space(cfg.beta_min, cfg.beta_max, cfg.beta_count);
            let gammas = log_space(cfg.gamma_min, cfg.gamma_max, cfg.gamma_count);
            let r = run_trimmed_sweep_2d(&sys, &betas, &gammas, &cfg.ciqa, &cfg.trim, Some(&img))?;
            report_trim(&out, &r, &img)?;
        }
    }
    Ok(())
}

fn report_trim(out: &Option<PathBuf>, r: &compiqa::trimming::TrimmedSweep, img: &GrayImage) -> Result<()> {
    let sel = r.trimmed.final_images[r.selected].clamped();
    let summary = format!(
        "selected_index={}\nselected_beta={}\nselected_gamma={}\niterations_spent={}\nuntrimmed_selected={}\nuntrimmed_iterations={}\nsavings_fraction={}\nselected_ssim={}\n",
        r.selected,
        fmt_sig(r.selected_params.beta),
        fmt_sig(r.selected_params.gamma),
        r.iterations_spent,
        r.untrimmed_selected,
        r.untrimmed_iterations,
        fmt_sig(r.savings_fraction),
        fmt_sig(ssim_default(&sel, img)?),
    );
    print!("{summary}");
    if let Some(d) = out {
        write_text(&d.join("summary.txt"), &summary)?;
        write_text(&d.join("trace.csv"), &trace_csv(&r.trimmed.trace))?;
        write_text(&d.join("trace_untrimmed.csv"), &trace_csv(&r.untrimmed.trace))?;
        write_pgm16(d.join("selected.pgm"), &sel)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(t) = std::env::var("COMPIQA_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: COMPIQA_THREADS must be a positive integer, got {t:?}");
                return ExitCode::from(3);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
