//! Optimizer-selector switch logic and the two-phase search pipeline:
//! perturbation-aware NAS over architecture/quantization/device, top-k
//! fine-tuning, and resource-aware quantization refinement on a fixed,
//! trained architecture.
//!
//! Every episode's work is a pure function of seeds derived from the master
//! seed and the sampled actions, so histories replay bit-exactly and
//! interrupted runs resume with identical continuations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{compute_reward, ControllerConfig, ControllerState, EpisodeRecord, RewardConfig};
use crate::cost::{estimate_chip_metrics, optimize_circuit, HardwareMetrics, SynapticArray, TechnologyParams};
use crate::data::Dataset;
use crate::device::{weight_noise_sigmas, DeviceLibrary};
use crate::error::{Error, Result};
use crate::nn::{build_network, evaluate_accuracy, train, Network, NoiseSpec, TrainConfig};
use crate::space::{decode_with_plan, ArchitectureSpec, Candidate, FixedParts, SearchSpace};

/// The four optimizer-selector switches (architecture, quantization,
/// device, circuit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorSwitches {
    pub sa: bool,
    pub sq: bool,
    pub sd: bool,
    pub sc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// (1,0,0,0): plain architecture search, full precision.
    Nas,
    /// (1,1,0,0): joint architecture + quantization search.
    QuantNas,
    /// (1,1,1,0): architecture + quantization + device with variation-aware
    /// training.
    PtbNas,
    /// (0,1,0,1): quantization + circuit refinement on a fixed architecture.
    Rnas,
}

impl Mode {
    pub fn switches(self) -> SelectorSwitches {
        let (sa, sq, sd, sc) = match self {
            Mode::Nas => (true, false, false, false),
            Mode::QuantNas => (true, true, false, false),
            Mode::PtbNas => (true, true, true, false),
            Mode::Rnas => (false, true, false, true),
        };
        SelectorSwitches { sa, sq, sd, sc }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Nas => "nas",
            Mode::QuantNas => "quantnas",
            Mode::PtbNas => "ptbnas",
            Mode::Rnas => "rnas",
        }
    }
}

/// What a mode searches and how it scores candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineDescriptor {
    pub mode: Mode,
    pub search_arch: bool,
    pub search_quant: bool,
    pub search_device: bool,
    /// Train and evaluate with device-variation noise.
    pub noise_aware: bool,
    /// Hardware metrics enter the reward (otherwise beta is forced to 1).
    pub hardware_in_reward: bool,
}

/// Maps a switch combination to its pipeline, rejecting the unsupported
/// ones.
pub fn select_mode(sw: SelectorSwitches) -> Result<PipelineDescriptor> {
    let mode = match (sw.sa, sw.sq, sw.sd, sw.sc) {
        (true, false, false, false) => Mode::Nas,
        (true, true, false, false) => Mode::QuantNas,
        (true, true, true, false) => Mode::PtbNas,
        (false, true, false, true) => Mode::Rnas,
        _ => {
            return Err(Error::UnsupportedSwitches(format!(
                "({},{},{},{})",
                u8::from(sw.sa),
                u8::from(sw.sq),
                u8::from(sw.sd),
                u8::from(sw.sc)
            )))
        }
    };
    Ok(PipelineDescriptor {
        mode,
        search_arch: sw.sa,
        search_quant: sw.sq,
        search_device: sw.sd,
        noise_aware: matches!(mode, Mode::PtbNas | Mode::Rnas),
        hardware_in_reward: matches!(mode, Mode::Rnas),
    })
}

/// Schedule constants for the two search phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub episodes: usize,
    pub child_epochs: usize,
    pub top_k: usize,
    pub fine_tune_epochs: usize,
    pub rnas_steps: usize,
    /// Controller updating rate: the baseline moving-average decay.
    pub update_rate: f64,
    /// Monte-Carlo trials per noisy accuracy evaluation.
    pub noise_trials: usize,
    /// Quantization-aware child training (quantize in the training forward
    /// path, not only at evaluation).
    pub train_quantized: bool,
    /// Evaluate quantization candidates with variation noise during the
    /// refinement phase.
    pub rnas_noisy_eval: bool,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            episodes: 500,
            child_epochs: 30,
            top_k: 40,
            fine_tune_epochs: 200,
            rnas_steps: 100,
            update_rate: 0.2,
            noise_trials: 5,
            train_quantized: true,
            rnas_noisy_eval: true,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 || self.child_epochs < 1 || self.rnas_steps < 1 || self.noise_trials < 1 {
            return Err(Error::InvalidConfig("phase counts must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.update_rate) {
            return Err(Error::InvalidConfig("update_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Child-training hyperparameters shared across candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: 0.1,
            batch_size: 32,
        }
    }
}

/// Seeds that make one episode's evaluation replayable. Derived from the
/// master seed and the sampled actions, so a candidate's outcome does not
/// depend on when it was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSeeds {
    pub build: u64,
    pub train: u64,
    pub eval: u64,
}

fn fnv1a(master: u64, tag: &str, actions: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in master.to_le_bytes() {
        eat(b);
    }
    for b in tag.bytes() {
        eat(b);
    }
    for &a in actions {
        for b in (a as u64).to_le_bytes() {
            eat(b);
        }
    }
    h
}

pub fn candidate_seeds(master: u64, actions: &[usize]) -> EpisodeSeeds {
    EpisodeSeeds {
        build: fnv1a(master, "build", actions),
        train: fnv1a(master, "train", actions),
        eval: fnv1a(master, "eval", actions),
    }
}

/// One line of the append-only history log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub episode: u64,
    pub phase: String,
    pub actions: Vec<usize>,
    pub candidate: Candidate,
    pub alpha_clean: f64,
    pub alpha_var: f64,
    pub metrics: Option<HardwareMetrics>,
    pub reward: f64,
    pub seeds: EpisodeSeeds,
    pub failed: bool,
    pub failure: Option<String>,
}

/// Append-only list of episode records with strictly increasing ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchHistory {
    records: Vec<HistoryRecord>,
}

impl SearchHistory {
    pub fn new() -> Self {
        SearchHistory::default()
    }

    pub fn push(&mut self, rec: HistoryRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.episode > last.episode, "episode ids must increase");
        }
        self.records.push(rec);
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One self-contained JSON record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(line).map_err(|e| Error::History(format!("line {}: {e}", i + 1)))?,
            );
        }
        SearchHistory::from_records(records)
    }

    pub fn from_records(records: Vec<HistoryRecord>) -> Result<Self> {
        let mut h = SearchHistory::new();
        for r in records {
            if h.records.last().is_some_and(|l| r.episode <= l.episode) {
                return Err(Error::History("episode ids must strictly increase".into()));
            }
            h.records.push(r);
        }
        Ok(h)
    }
}

/// Receives each record as it is produced (crash-safe incremental logging).
pub trait HistorySink {
    fn record(&mut self, rec: &HistoryRecord) -> Result<()>;
}

/// Outcome of evaluating one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub alpha_clean: f64,
    pub alpha_var: f64,
    pub metrics: Option<HardwareMetrics>,
    pub failed: bool,
    pub failure: Option<String>,
}

impl EvalOutcome {
    pub fn failed(reason: String) -> Self {
        EvalOutcome {
            alpha_clean: 0.0,
            alpha_var: 0.0,
            metrics: None,
            failed: true,
            failure: Some(reason),
        }
    }
}

/// Scores a decoded candidate. Implementations must be pure functions of
/// (candidate, seeds) so that histories replay exactly.
pub trait CandidateEvaluator: Sync {
    fn evaluate(&self, candidate: &Candidate, seeds: &EpisodeSeeds) -> EvalOutcome;
}

/// Everything a search phase needs besides the evaluator.
#[derive(Debug, Clone)]
pub struct SearchSetup {
    pub phase: PhaseConfig,
    pub reward: RewardConfig,
    pub controller: ControllerConfig,
    pub train: TrainSettings,
    pub tech: TechnologyParams,
    pub array: SynapticArray,
    pub master_seed: u64,
}

impl SearchSetup {
    pub fn validate(&self) -> Result<()> {
        self.phase.validate()?;
        self.reward.validate()?;
        self.controller.validate()?;
        self.tech.validate()?;
        self.array.validate()
    }
}

/// The full trainer-backed evaluator used by the NAS phases.
pub struct TrainingEvaluator<'a> {
    pub dataset: &'a Dataset,
    pub devices: &'a DeviceLibrary,
    pub setup: &'a SearchSetup,
    pub noise_aware: bool,
}

impl TrainingEvaluator<'_> {
    fn noise_for(&self, candidate: &Candidate, parametric_layers: usize) -> Result<Option<NoiseSpec>> {
        if !self.noise_aware {
            return Ok(None);
        }
        let (Some(device_index), Some(quant)) = (candidate.device_index, &candidate.quant) else {
            return Ok(None);
        };
        let device = self.devices.get(device_index);
        let sigmas = weight_noise_sigmas(device, quant, parametric_layers);
        Ok(Some(NoiseSpec::from_sigmas(sigmas)?))
    }

    fn try_evaluate(&self, candidate: &Candidate, seeds: &EpisodeSeeds) -> Result<EvalOutcome> {
        let shape = self.dataset.train.image_shape();
        let net = build_network(&candidate.arch, shape, seeds.build)?;
        let noise = self.noise_for(candidate, net.parametric_layers())?;
        let train_quant = if self.setup.phase.train_quantized {
            candidate.quant.as_ref()
        } else {
            None
        };
        let cfg = TrainConfig {
            learning_rate: self.setup.train.learning_rate,
            epochs: self.setup.phase.child_epochs,
            batch_size: self.setup.train.batch_size,
            rng_seed: seeds.train,
        };
        let (net, _) = train(net, self.dataset, &cfg, train_quant, noise.as_ref())?;

        let mut rng = ChaCha8Rng::seed_from_u64(seeds.eval);
        let alpha_clean = evaluate_accuracy(
            &net,
            &self.dataset.held_out,
            candidate.quant.as_ref(),
            None,
            1,
            &mut rng,
        );
        let alpha_var = match &noise {
            Some(n) => evaluate_accuracy(
                &net,
                &self.dataset.held_out,
                candidate.quant.as_ref(),
                Some(n),
                self.setup.phase.noise_trials,
                &mut rng,
            ),
            None => alpha_clean,
        };
        let metrics = match candidate.device_index {
            Some(di) => {
                let device = self.devices.get(di);
                let design = optimize_circuit(
                    &net,
                    candidate.quant.as_ref(),
                    device,
                    &self.setup.tech,
                    self.setup.array,
                )?;
                Some(estimate_chip_metrics(
                    &design,
                    &net,
                    candidate.quant.as_ref(),
                    &self.setup.tech,
                )?)
            }
            None => None,
        };
        Ok(EvalOutcome {
            alpha_clean,
            alpha_var,
            metrics,
            failed: false,
            failure: None,
        })
    }
}

impl CandidateEvaluator for TrainingEvaluator<'_> {
    fn evaluate(&self, candidate: &Candidate, seeds: &EpisodeSeeds) -> EvalOutcome {
        self.try_evaluate(candidate, seeds)
            .unwrap_or_else(|e| EvalOutcome::failed(e.to_string()))
    }
}

/// Refinement-phase evaluator: re-quantizes saved weights, no retraining.
pub struct RequantEvaluator<'a> {
    pub trained: &'a Network,
    pub dataset: &'a Dataset,
    pub devices: &'a DeviceLibrary,
    pub setup: &'a SearchSetup,
}

impl CandidateEvaluator for RequantEvaluator<'_> {
    fn evaluate(&self, candidate: &Candidate, seeds: &EpisodeSeeds) -> EvalOutcome {
        let run = || -> Result<EvalOutcome> {
            let quant = candidate
                .quant
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("refinement candidate has no quantization".into()))?;
            let device_index = candidate
                .device_index
                .ok_or_else(|| Error::InvalidConfig("refinement candidate has no device".into()))?;
            let device = self.devices.get(device_index);
            let mut rng = ChaCha8Rng::seed_from_u64(seeds.eval);
            let alpha_clean = evaluate_accuracy(self.trained, &self.dataset.held_out, Some(quant), None, 1, &mut rng);
            let alpha_var = if self.setup.phase.rnas_noisy_eval {
                let sigmas = weight_noise_sigmas(device, quant, self.trained.parametric_layers());
                let noise = NoiseSpec::from_sigmas(sigmas)?;
                evaluate_accuracy(
                    self.trained,
                    &self.dataset.held_out,
                    Some(quant),
                    Some(&noise),
                    self.setup.phase.noise_trials,
                    &mut rng,
                )
            } else {
                alpha_clean
            };
            let design = optimize_circuit(self.trained, Some(quant), device, &self.setup.tech, self.setup.array)?;
            let metrics = estimate_chip_metrics(&design, self.trained, Some(quant), &self.setup.tech)?;
            Ok(EvalOutcome {
                alpha_clean,
                alpha_var,
                metrics: Some(metrics),
                failed: false,
                failure: None,
            })
        };
        run().unwrap_or_else(|e| EvalOutcome::failed(e.to_string()))
    }
}

fn controller_for(
    space: &SearchSpace,
    descriptor: &PipelineDescriptor,
    setup: &SearchSetup,
) -> Result<ControllerState> {
    let plan = space.decision_plan(
        descriptor.search_arch,
        descriptor.search_quant,
        descriptor.search_device,
    );
    let cfg = ControllerConfig {
        baseline_decay: setup.phase.update_rate,
        init_seed: fnv1a(setup.master_seed, "controller-init", &[]),
        ..setup.controller
    };
    ControllerState::new(&plan, cfg)
}

fn reward_for(descriptor: &PipelineDescriptor, outcome: &EvalOutcome, reward: &RewardConfig) -> Result<f64> {
    if outcome.failed {
        return Ok(0.0);
    }
    let alpha = if descriptor.noise_aware {
        outcome.alpha_var
    } else {
        outcome.alpha_clean
    };
    if descriptor.hardware_in_reward {
        compute_reward(alpha, outcome.metrics.as_ref(), reward)
    } else {
        Ok(alpha)
    }
}

/// Runs one search phase: sample a batch of episodes, decode, evaluate in
/// parallel, reward, update the controller, repeat. `resume` replays an
/// existing history prefix (controller updates and rng state included)
/// before continuing, and `episode_offset` numbers the first fresh episode
/// when no resume records exist.
#[allow(clippy::too_many_arguments)]
pub fn run_phase<E: CandidateEvaluator>(
    space: &SearchSpace,
    descriptor: &PipelineDescriptor,
    fixed: &FixedParts,
    evaluator: &E,
    episodes: usize,
    setup: &SearchSetup,
    resume: &[HistoryRecord],
    episode_offset: u64,
    mut sink: Option<&mut (dyn HistorySink + '_)>,
) -> Result<(SearchHistory, ControllerState)> {
    space.validate()?;
    setup.validate()?;
    let plan = space.decision_plan(
        descriptor.search_arch,
        descriptor.search_quant,
        descriptor.search_device,
    );
    let mut ctrl = controller_for(space, descriptor, setup)?;
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(setup.master_seed, "controller-sample", &[]));
    let batch = setup.controller.batch;

    let mut history = SearchHistory::new();
    let mut pending: Vec<EpisodeRecord> = Vec::with_capacity(batch);

    // Replay the resumed prefix so the controller and rng land exactly
    // where the interrupted run left them.
    for rec in resume {
        let ep = ctrl.sample_episode(&mut rng);
        if ep.actions != rec.actions {
            return Err(Error::History(format!(
                "resume mismatch at episode {}: history does not belong to this seed/config",
                rec.episode
            )));
        }
        pending.push(EpisodeRecord {
            reward: Some(rec.reward),
            ..ep
        });
        if pending.len() == batch {
            ctrl.update(&pending)?;
            pending.clear();
        }
        history.push(rec.clone());
    }

    let mut next_episode = history
        .records()
        .last()
        .map(|r| r.episode + 1)
        .unwrap_or(episode_offset);

    while history.len() < episodes {
        let want = (episodes - history.len()).min(batch - pending.len());
        let sampled: Vec<EpisodeRecord> = (0..want).map(|_| ctrl.sample_episode(&mut rng)).collect();

        let prepared: Vec<(EpisodeRecord, EpisodeSeeds, Result<Candidate>)> = sampled
            .into_iter()
            .map(|ep| {
                let seeds = candidate_seeds(setup.master_seed, &ep.actions);
                let cand = decode_with_plan(space, &plan, &ep.actions, fixed);
                (ep, seeds, cand)
            })
            .collect();

        let outcomes: Vec<(Candidate, EvalOutcome)> = prepared
            .par_iter()
            .map(|(_, seeds, cand)| match cand {
                Ok(c) => (c.clone(), evaluator.evaluate(c, seeds)),
                Err(e) => (
                    // Keep the undecodable candidate's scaffold for the log.
                    Candidate {
                        arch: ArchitectureSpec {
                            layers: vec![],
                            classes: space.classes,
                        },
                        quant: None,
                        device_index: None,
                    },
                    EvalOutcome::failed(e.to_string()),
                ),
            })
            .collect();

        for ((mut ep, seeds, _), (candidate, outcome)) in prepared.into_iter().zip(outcomes) {
            let reward = reward_for(descriptor, &outcome, &setup.reward)?;
            ep.reward = Some(reward);
            let rec = HistoryRecord {
                episode: next_episode,
                phase: descriptor.mode.name().to_string(),
                actions: ep.actions.clone(),
                candidate,
                alpha_clean: outcome.alpha_clean,
                alpha_var: outcome.alpha_var,
                metrics: outcome.metrics,
                reward,
                seeds,
                failed: outcome.failed,
                failure: outcome.failure,
            };
            if let Some(s) = sink.as_deref_mut() {
                s.record(&rec)?;
            }
            history.push(rec);
            pending.push(ep);
            next_episode += 1;
        }
        if pending.len() == batch {
            ctrl.update(&pending)?;
            pending.clear();
        }
    }

    Ok((history, ctrl))
}

/// Phase 1: the perturbation-aware joint search (or its nas/quantnas
/// ablations) with trainer-backed evaluation.
#[allow(clippy::too_many_arguments)]
pub fn run_nas_mode(
    mode: Mode,
    space: &SearchSpace,
    dataset: &Dataset,
    devices: &DeviceLibrary,
    setup: &SearchSetup,
    resume: &[HistoryRecord],
    sink: Option<&mut (dyn HistorySink + '_)>,
) -> Result<(SearchHistory, ControllerState)> {
    if mode == Mode::Rnas {
        return Err(Error::InvalidConfig(
            "the refinement phase needs a trained candidate; use run_rnas".into(),
        ));
    }
    let descriptor = select_mode(mode.switches())?;
    let evaluator = TrainingEvaluator {
        dataset,
        devices,
        setup,
        noise_aware: descriptor.noise_aware,
    };
    run_phase(
        space,
        &descriptor,
        &FixedParts::default(),
        &evaluator,
        setup.phase.episodes,
        setup,
        resume,
        0,
        sink,
    )
}

/// Phase 1 with the full switch set (1,1,1,0).
pub fn run_ptbnas(
    space: &SearchSpace,
    dataset: &Dataset,
    devices: &DeviceLibrary,
    setup: &SearchSetup,
    resume: &[HistoryRecord],
    sink: Option<&mut (dyn HistorySink + '_)>,
) -> Result<(SearchHistory, ControllerState)> {
    run_nas_mode(Mode::PtbNas, space, dataset, devices, setup, resume, sink)
}

/// Phase 2 (0,1,0,1): quantization/circuit refinement over a fixed, trained
/// architecture and device; saved weights are re-quantized, never retrained.
#[allow(clippy::too_many_arguments)]
pub fn run_rnas(
    space: &SearchSpace,
    trained: &Network,
    arch: &ArchitectureSpec,
    device_index: usize,
    dataset: &Dataset,
    devices: &DeviceLibrary,
    setup: &SearchSetup,
    episode_offset: u64,
    resume: &[HistoryRecord],
    sink: Option<&mut (dyn HistorySink + '_)>,
) -> Result<(SearchHistory, ControllerState)> {
    let descriptor = select_mode(Mode::Rnas.switches())?;
    let fixed = FixedParts {
        arch: Some(arch.clone()),
        quant: None,
        device_index: Some(device_index),
    };
    let evaluator = RequantEvaluator {
        trained,
        dataset,
        devices,
        setup,
    };
    run_phase(
        space,
        &descriptor,
        &fixed,
        &evaluator,
        setup.phase.rnas_steps,
        setup,
        resume,
        episode_offset,
        sink,
    )
}

/// Replays one logged episode; bit-exact against the stored record.
pub fn replay_record<E: CandidateEvaluator>(evaluator: &E, rec: &HistoryRecord) -> EvalOutcome {
    evaluator.evaluate(&rec.candidate, &rec.seeds)
}

/// Top `k` non-failed records by noisy accuracy, ties broken by episode id.
pub fn select_top_k(history: &SearchHistory, k: usize) -> Vec<&HistoryRecord> {
    let mut recs: Vec<&HistoryRecord> = history.records().iter().filter(|r| !r.failed).collect();
    recs.sort_by(|a, b| {
        b.alpha_var
            .partial_cmp(&a.alpha_var)
            .unwrap()
            .then(a.episode.cmp(&b.episode))
    });
    recs.truncate(k);
    recs
}

/// A fine-tuned top candidate with refreshed accuracies.
#[derive(Debug, Clone)]
pub struct FineTuned {
    pub record: HistoryRecord,
    pub network: Network,
    pub alpha_clean: f64,
    pub alpha_var: f64,
}

/// Replays child training for the top `k` records and continues for
/// `fine_tune_epochs` more epochs each, re-evaluating accuracies.
pub fn fine_tune_top_k(
    history: &SearchHistory,
    k: usize,
    dataset: &Dataset,
    devices: &DeviceLibrary,
    setup: &SearchSetup,
    noise_aware: bool,
) -> Result<Vec<FineTuned>> {
    let picks: Vec<HistoryRecord> = select_top_k(history, k).into_iter().cloned().collect();
    let evaluator = TrainingEvaluator {
        dataset,
        devices,
        setup,
        noise_aware,
    };
    picks
        .par_iter()
        .map(|rec| {
            let shape = dataset.train.image_shape();
            let net = build_network(&rec.candidate.arch, shape, rec.seeds.build)?;
            let noise = evaluator.noise_for(&rec.candidate, net.parametric_layers())?;
            let train_quant = if setup.phase.train_quantized {
                rec.candidate.quant.as_ref()
            } else {
                None
            };
            // Replay the child run, then keep going.
            let replay_cfg = TrainConfig {
                learning_rate: setup.train.learning_rate,
                epochs: setup.phase.child_epochs,
                batch_size: setup.train.batch_size,
                rng_seed: rec.seeds.train,
            };
            let (net, _) = train(net, dataset, &replay_cfg, train_quant, noise.as_ref())?;
            let ft_cfg = TrainConfig {
                epochs: setup.phase.fine_tune_epochs,
                rng_seed: fnv1a(setup.master_seed, "fine-tune", &rec.actions),
                ..replay_cfg
            };
            let (net, _) = train(net, dataset, &ft_cfg, train_quant, noise.as_ref())?;

            let mut rng = ChaCha8Rng::seed_from_u64(rec.seeds.eval.wrapping_add(1));
            let alpha_clean =
                evaluate_accuracy(&net, &dataset.held_out, rec.candidate.quant.as_ref(), None, 1, &mut rng);
            let alpha_var = match &noise {
                Some(n) => evaluate_accuracy(
                    &net,
                    &dataset.held_out,
                    rec.candidate.quant.as_ref(),
                    Some(n),
                    setup.phase.noise_trials,
                    &mut rng,
                ),
                None => alpha_clean,
            };
            Ok(FineTuned {
                record: rec.clone(),
                network: net,
                alpha_clean,
                alpha_var,
            })
        })
        .collect()
}

/// Result of the full two-phase pipeline.
#[derive(Debug)]
pub struct FullRunResult {
    pub ptbnas: SearchHistory,
    pub fine_tuned_episodes: Vec<u64>,
    pub rnas: SearchHistory,
    pub rnas_controller: ControllerState,
}

/// Phase 1 (ptbNAS) -> top-k fine-tune -> phase 2 (rNAS) on the best
/// fine-tuned candidate.
pub fn run_full(
    space: &SearchSpace,
    dataset: &Dataset,
    devices: &DeviceLibrary,
    setup: &SearchSetup,
    mut sink: Option<&mut (dyn HistorySink + '_)>,
) -> Result<FullRunResult> {
    let (history, _) = run_nas_mode(
        Mode::PtbNas,
        space,
        dataset,
        devices,
        setup,
        &[],
        sink.as_deref_mut(),
    )?;
    let tuned = fine_tune_top_k(&history, setup.phase.top_k, dataset, devices, setup, true)?;
    let best = tuned
        .iter()
        .max_by(|a, b| {
            a.alpha_var
                .partial_cmp(&b.alpha_var)
                .unwrap()
                .then(b.record.episode.cmp(&a.record.episode))
        })
        .ok_or_else(|| Error::History("no trainable candidate survived phase 1".into()))?;
    let device_index = best
        .record
        .candidate
        .device_index
        .ok_or_else(|| Error::History("phase-1 record carries no device".into()))?;
    let (rnas, rnas_controller) = run_rnas(
        space,
        &best.network,
        &best.record.candidate.arch,
        device_index,
        dataset,
        devices,
        setup,
        history.records().last().map(|r| r.episode + 1).unwrap_or(0),
        &[],
        sink.as_deref_mut(),
    )?;
    Ok(FullRunResult {
        ptbnas: history,
        fine_tuned_episodes: tuned.iter().map(|t| t.record.episode).collect(),
        rnas,
        rnas_controller,
    })
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use crate::space::ArchitectureSpec;

    /// Minimal record for frontier tests: accuracy + latency populated.
    pub fn stub_record(episode: u64, alpha_var: f64, latency_ns: f64) -> HistoryRecord {
        HistoryRecord {
            episode,
            phase: "ptbnas".into(),
            actions: vec![0],
            candidate: Candidate {
                arch: ArchitectureSpec {
                    layers: vec![],
                    classes: 2,
                },
                quant: None,
                device_index: None,
            },
            alpha_clean: alpha_var,
            alpha_var,
            metrics: Some(HardwareMetrics {
                latency_ns,
                energy_pj: 1.0,
                area_um2: 1.0,
                edp_pj_ns: latency_ns,
                throughput_tops: 1.0,
                efficiency_tops_per_w: 1.0,
            }),
            reward: alpha_var,
            seeds: EpisodeSeeds {
                build: 0,
                train: 0,
                eval: 0,
            },
            failed: false,
            failure: None,
        }
    }
}
