//! Subcommand implementations.

use std::path::Path;

use serde_json::json;
use xbarnas::cost::{estimate_chip_metrics, optimize_circuit, SynapticArray, TechnologyParams};
use xbarnas::device::DeviceLibrary;
use xbarnas::nn::{build_network, train, Network, TrainConfig};
use xbarnas::pareto::Objective;
use xbarnas::quant::{FixedPointFormat, QuantizationScheme};
use xbarnas::search::{
    replay_record, run_full, run_nas_mode, run_rnas, select_top_k, HistoryRecord, Mode, RequantEvaluator,
    SearchHistory, TrainingEvaluator,
};
use xbarnas::space::{ArchitectureSpec, LayerSpec};

use crate::config::{ArchFile, RunConfig};
use crate::error::{CliError, CliResult};
use crate::report;
use crate::rundir::{self, FileSink};

fn parse_mode(name: &str) -> CliResult<Mode> {
    match name {
        "nas" => Ok(Mode::Nas),
        "quantnas" => Ok(Mode::QuantNas),
        "ptbnas" => Ok(Mode::PtbNas),
        "rnas" => Ok(Mode::Rnas),
        other => Err(CliError::config(format!("unknown mode '{other}'"))),
    }
}

pub fn search(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.out_dir.clone();
    let resume = rundir::prepare(&out, cfg)?;
    let dataset = cfg.build_dataset()?;
    let devices = cfg.devices()?;
    let space = cfg.build_space()?;
    let setup = cfg.setup()?;
    let mut sink = FileSink::append(&out)?;

    match cfg.mode.as_str() {
        "full" => {
            if !resume.is_empty() {
                return Err(CliError::config(
                    "mode full cannot resume a partial run; use a fresh out_dir".into(),
                ));
            }
            let result = run_full(&space, &dataset, &devices, &setup, Some(&mut sink))
                .map_err(CliError::from)?;
            rundir::write_checkpoint(&out, "rnas", &result.rnas_controller)?;
            summarize(&out, result.ptbnas.records(), result.rnas.records());
        }
        "rnas" => {
            let rnas_cfg = cfg.rnas.as_ref().expect("validated");
            let (net, arch, device_index, base_episode) =
                rebuild_trained_candidate(&rnas_cfg.from_run, rnas_cfg.candidate)?;
            let (history, ctrl) = run_rnas(
                &space,
                &net,
                &arch,
                device_index,
                &dataset,
                &devices,
                &setup,
                0,
                resume.records(),
                Some(&mut sink),
            )
            .map_err(CliError::from)?;
            rundir::write_checkpoint(&out, "rnas", &ctrl)?;
            eprintln!("refined candidate from episode {base_episode} of {}", rnas_cfg.from_run.display());
            summarize(&out, &[], history.records());
        }
        name => {
            let mode = parse_mode(name)?;
            let (history, ctrl) = run_nas_mode(
                mode,
                &space,
                &dataset,
                &devices,
                &setup,
                resume.records(),
                Some(&mut sink),
            )
            .map_err(CliError::from)?;
            rundir::write_checkpoint(&out, name, &ctrl)?;
            summarize(&out, history.records(), &[]);
        }
    }
    Ok(())
}

fn summarize(out: &Path, phase1: &[HistoryRecord], phase2: &[HistoryRecord]) {
    let best = |records: &[HistoryRecord]| {
        records
            .iter()
            .filter(|r| !r.failed)
            .max_by(|a, b| a.alpha_var.partial_cmp(&b.alpha_var).unwrap())
            .map(|r| (r.episode, r.alpha_var, r.reward))
    };
    println!("run directory: {}", out.display());
    if let Some((e, a, r)) = best(phase1) {
        println!(
            "search episodes: {}, best noisy accuracy {a:.4} (episode {e}, reward {r:.4})",
            phase1.len()
        );
    }
    if let Some((e, a, r)) = best(phase2) {
        println!(
            "refinement episodes: {}, best noisy accuracy {a:.4} (episode {e}, reward {r:.4})",
            phase2.len()
        );
    }
}

/// Replays a logged phase-1 candidate's training from its seeds.
fn rebuild_trained_candidate(
    run: &Path,
    candidate: Option<u64>,
) -> CliResult<(Network, ArchitectureSpec, usize, u64)> {
    let src_cfg = rundir::load_config(run)?;
    let history = rundir::load_history(run)?;
    let record = match candidate {
        Some(id) => history
            .records()
            .iter()
            .find(|r| r.episode == id)
            .ok_or_else(|| CliError::data(format!("no episode {id} in {}", run.display())))?
            .clone(),
        None => select_top_k(&history, 1)
            .first()
            .map(|r| (*r).clone())
            .ok_or_else(|| CliError::data("source run has no usable candidate".into()))?,
    };
    if record.failed {
        return Err(CliError::data(format!("episode {} failed; pick another", record.episode)));
    }
    let device_index = record
        .candidate
        .device_index
        .ok_or_else(|| CliError::data("source candidate has no device".into()))?;

    let dataset = src_cfg.build_dataset()?;
    let src_setup = src_cfg.setup()?;
    let net = build_network(&record.candidate.arch, dataset.train.image_shape(), record.seeds.build)
        .map_err(CliError::from)?;
    let noise = if record.phase == "ptbnas" {
        let device = src_cfg.devices()?.get(device_index).clone();
        record.candidate.quant.as_ref().map(|q| {
            xbarnas::nn::NoiseSpec::from_sigmas(xbarnas::device::weight_noise_sigmas(
                &device,
                q,
                net.parametric_layers(),
            ))
            .expect("sigmas nonnegative")
        })
    } else {
        None
    };
    let train_quant = if src_setup.phase.train_quantized {
        record.candidate.quant.as_ref()
    } else {
        None
    };
    let cfg = TrainConfig {
        learning_rate: src_setup.train.learning_rate,
        epochs: src_setup.phase.child_epochs,
        batch_size: src_setup.train.batch_size,
        rng_seed: record.seeds.train,
    };
    let (net, _) = train(net, &dataset, &cfg, train_quant, noise.as_ref()).map_err(CliError::from)?;
    Ok((net, record.candidate.arch.clone(), device_index, record.episode))
}

pub fn evaluate(run: &Path, candidate: u64) -> CliResult<()> {
    let cfg = rundir::load_config(run)?;
    let history = rundir::load_history(run)?;
    let record = history
        .records()
        .iter()
        .find(|r| r.episode == candidate)
        .ok_or_else(|| CliError::data(format!("no episode {candidate} in {}", run.display())))?;

    let dataset = cfg.build_dataset()?;
    let devices = cfg.devices()?;
    let setup = cfg.setup()?;
    let outcome = match record.phase.as_str() {
        "nas" | "quantnas" | "ptbnas" => {
            let evaluator = TrainingEvaluator {
                dataset: &dataset,
                devices: &devices,
                setup: &setup,
                noise_aware: record.phase == "ptbnas",
            };
            replay_record(&evaluator, record)
        }
        "rnas" => {
            let rnas_cfg = cfg
                .rnas
                .as_ref()
                .ok_or_else(|| CliError::data("refinement record from a full run; replay its source run instead".into()))?;
            let (net, _, _, _) = rebuild_trained_candidate(&rnas_cfg.from_run, rnas_cfg.candidate)?;
            let evaluator = RequantEvaluator {
                trained: &net,
                dataset: &dataset,
                devices: &devices,
                setup: &setup,
            };
            replay_record(&evaluator, record)
        }
        other => return Err(CliError::data(format!("unknown phase '{other}' in history"))),
    };

    let matches = outcome.alpha_clean.to_bits() == record.alpha_clean.to_bits()
        && outcome.alpha_var.to_bits() == record.alpha_var.to_bits()
        && outcome.metrics == record.metrics
        && outcome.failed == record.failed;
    let report = json!({
        "episode": record.episode,
        "logged": { "alpha_clean": record.alpha_clean, "alpha_var": record.alpha_var, "metrics": record.metrics },
        "replayed": { "alpha_clean": outcome.alpha_clean, "alpha_var": outcome.alpha_var, "metrics": outcome.metrics },
        "match": matches,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    if !matches {
        return Err(CliError::runtime(format!(
            "episode {candidate} did not replay bit-exactly"
        )));
    }
    Ok(())
}

pub fn cost(
    arch_path: &Path,
    wq: Option<&str>,
    aq: Option<&str>,
    device_name: Option<&str>,
    tech_path: Option<&Path>,
) -> CliResult<()> {
    let arch_file = ArchFile::load(arch_path)?;
    let mut layers = Vec::new();
    let mut qa = Vec::new();
    let mut qw = Vec::new();
    let parse_fmt = |s: &str| -> CliResult<FixedPointFormat> {
        s.parse().map_err(|e: xbarnas::Error| CliError::config(e.to_string()))
    };
    let uniform_wq = wq.map(parse_fmt).transpose()?;
    let uniform_aq = aq.map(parse_fmt).transpose()?;
    for (i, l) in arch_file.layers.iter().enumerate() {
        let missing = |f: &str| CliError::config(format!("layer {i}: {f} required for kind {}", l.kind));
        match l.kind.as_str() {
            "conv" => layers.push(LayerSpec::Conv {
                filter_h: l.filter_h.ok_or_else(|| missing("filter_h"))?,
                filter_w: l.filter_w.ok_or_else(|| missing("filter_w"))?,
                num_filters: l.num_filters.ok_or_else(|| missing("num_filters"))?,
                pool: l.pool.unwrap_or(false),
            }),
            "fc" => layers.push(LayerSpec::Fc {
                neurons: l.neurons.ok_or_else(|| missing("neurons"))?,
            }),
            other => return Err(CliError::config(format!("layer {i}: unknown kind '{other}'"))),
        }
        match (&l.wq, uniform_wq) {
            (Some(s), _) => qw.push(parse_fmt(s)?),
            (None, Some(f)) => qw.push(f),
            (None, None) => qw.push(xbarnas::cost::full_precision_formats().1),
        }
        match (&l.aq, uniform_aq) {
            (Some(s), _) => qa.push(parse_fmt(s)?),
            (None, Some(f)) => qa.push(f),
            (None, None) => qa.push(xbarnas::cost::full_precision_formats().0),
        }
    }
    let scheme = QuantizationScheme::new(qa, qw).map_err(CliError::from)?;
    let arch = ArchitectureSpec {
        layers,
        classes: arch_file.classes,
    };
    let net = build_network(&arch, (arch_file.input[0], arch_file.input[1], arch_file.input[2]), 0)
        .map_err(CliError::from)?;

    let devices = DeviceLibrary::defaults();
    let device = devices
        .by_name(device_name.unwrap_or("reram4"))
        .ok_or_else(|| CliError::config(format!("unknown device '{}'", device_name.unwrap_or("reram4"))))?;
    let tech: TechnologyParams = match tech_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => TechnologyParams::calibrated(),
    };
    let array = SynapticArray::default();
    let design = optimize_circuit(&net, Some(&scheme), device, &tech, array).map_err(CliError::from)?;
    let metrics = estimate_chip_metrics(&design, &net, Some(&scheme), &tech).map_err(CliError::from)?;
    let out = json!({
        "device": device.name,
        "tiles": { "m": design.tiles.m, "n": design.tiles.n },
        "pes": { "p": design.pes.p, "q": design.pes.q },
        "global_buffer_bytes": design.tiles.global_buffer_bytes,
        "metrics": metrics,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

pub fn pareto(run: &Path, objectives: Option<&str>) -> CliResult<()> {
    let history = load_nonempty_history(run)?;
    let objectives = parse_objectives(objectives.unwrap_or("accuracy,latency"))?;
    let csv = report::pareto_csv(history.records(), &objectives)?;
    let dir = rundir::reports_dir(run);
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("pareto.csv");
    std::fs::write(&path, &csv)?;
    println!(
        "pareto frontier: {} of {} records -> {}",
        csv.lines().count().saturating_sub(1),
        history.len(),
        path.display()
    );
    Ok(())
}

fn parse_objectives(spec: &str) -> CliResult<Vec<Objective>> {
    spec.split(',')
        .map(|s| Objective::parse(s.trim()).map_err(CliError::from))
        .collect()
}

pub fn run_report(run: &Path) -> CliResult<()> {
    let history = load_nonempty_history(run)?;
    let dir = rundir::reports_dir(run);
    report::write_reports(&dir, history.records())?;
    println!("wrote report.csv and error-vs-metric plot data to {}", dir.display());
    Ok(())
}

fn load_nonempty_history(run: &Path) -> CliResult<SearchHistory> {
    let history = rundir::load_history(run)?;
    if history.is_empty() {
        return Err(CliError::data(format!("{}: history log is empty", run.display())));
    }
    Ok(history)
}
