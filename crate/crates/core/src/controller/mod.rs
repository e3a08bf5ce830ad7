//! Recurrent stochastic policy over action sequences, composite reward, and
//! Monte-Carlo policy-gradient updates with a moving-average baseline.
//!
//! The policy is a single gated recurrent cell with learned per-step action
//! embeddings and one softmax head per decision step. Updates follow the
//! REINFORCE estimator: the mean over a batch of episodes of
//! `gamma^(T-t) * grad log pi(a_t | a_(t-1):1) * (R_k - b)`, applied as one
//! gradient-ascent step; `b` is an exponential moving average of the batch
//! mean reward.

mod gru;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::HardwareMetrics;
use crate::error::{Error, Result};
use crate::space::{ActionSequence, DecisionPlan};
use gru::{add_scaled, GruParams, Mat};

/// Composite reward: `beta * alpha + (1 - beta) * f(Lat, Eng, Area)` where
/// `f` folds lower-is-better metrics into [0, 1] via weighted
/// `max(0, 1 - metric/ref)` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub beta: f64,
    pub w_lat: f64,
    pub w_eng: f64,
    pub w_area: f64,
    pub lat_ref: f64,
    pub eng_ref: f64,
    pub area_ref: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig::accuracy_only()
    }
}

impl RewardConfig {
    /// Accuracy-only reward (phase-1 default).
    pub fn accuracy_only() -> Self {
        RewardConfig {
            beta: 1.0,
            w_lat: 1.0,
            w_eng: 0.0,
            w_area: 0.0,
            lat_ref: 1.0,
            eng_ref: 1.0,
            area_ref: 1.0,
        }
    }

    /// Bi-objective preset: accuracy against a single hardware metric.
    pub fn bi_objective(beta: f64, weights: (f64, f64, f64), refs: (f64, f64, f64)) -> Result<Self> {
        let cfg = RewardConfig {
            beta,
            w_lat: weights.0,
            w_eng: weights.1,
            w_area: weights.2,
            lat_ref: refs.0,
            eng_ref: refs.1,
            area_ref: refs.2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig("beta must be in [0, 1]".into()));
        }
        let ws = [self.w_lat, self.w_eng, self.w_area];
        if ws.iter().any(|w| *w < 0.0) || (ws.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("f-weights must be >= 0 and sum to 1".into()));
        }
        if [self.lat_ref, self.eng_ref, self.area_ref]
            .iter()
            .any(|r| !(*r > 0.0))
        {
            return Err(Error::InvalidConfig("normalization references must be > 0".into()));
        }
        Ok(())
    }
}

/// Eq-style composite reward. Metrics are required whenever `beta < 1`.
pub fn compute_reward(alpha: f64, metrics: Option<&HardwareMetrics>, cfg: &RewardConfig) -> Result<f64> {
    assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0, 1]");
    if cfg.beta >= 1.0 {
        return Ok(alpha);
    }
    let m = metrics.ok_or(Error::MetricsRequired)?;
    let part = |w: f64, value: f64, reference: f64| w * (1.0 - value / reference).max(0.0);
    let f = part(cfg.w_lat, m.latency_ns, cfg.lat_ref)
        + part(cfg.w_eng, m.energy_pj, cfg.eng_ref)
        + part(cfg.w_area, m.area_um2, cfg.area_ref);
    Ok(cfg.beta * alpha + (1.0 - cfg.beta) * f)
}

/// One sampled action sequence with its per-step log-probabilities. The
/// reward is attached after the candidate is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub actions: ActionSequence,
    pub log_probs: Vec<f64>,
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub hidden: usize,
    pub embed: usize,
    /// Policy gradient-ascent step size.
    pub policy_lr: f64,
    /// Baseline exponential-moving-average decay (the controller updating
    /// rate).
    pub baseline_decay: f64,
    /// Per-step reward discount applied as gamma^(T-t).
    pub gamma: f64,
    /// Episodes per policy update.
    pub batch: usize,
    pub init_seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            hidden: 64,
            embed: 16,
            policy_lr: 0.01,
            baseline_decay: 0.2,
            gamma: 1.0,
            batch: 5,
            init_seed: 0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 || self.embed < 1 || self.batch < 1 {
            return Err(Error::InvalidConfig("controller sizes must be >= 1".into()));
        }
        if !(self.policy_lr > 0.0) || !(0.0..=1.0).contains(&self.baseline_decay) {
            return Err(Error::InvalidConfig("bad controller rates".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig("gamma must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Head {
    w: Mat,
    b: Vec<f64>,
}

/// Policy parameters, baseline, and reward bookkeeping for one decision
/// plan. Heads start at zero so the initial per-step distributions are
/// exactly uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    cfg: ControllerConfig,
    /// Choice count per decision step.
    step_choices: Vec<usize>,
    cell: GruParams,
    start: Vec<f64>,
    embeddings: Vec<Mat>,
    heads: Vec<Head>,
    baseline: f64,
    updates_applied: u64,
    updates_skipped: u64,
}

struct StepCache {
    cell: gru::GruCache,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl ControllerState {
    pub fn new(plan: &DecisionPlan, cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        if plan.is_empty() {
            return Err(Error::InvalidConfig("decision plan is empty".into()));
        }
        use rand::distr::{Distribution, Uniform};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.init_seed);
        let (h, e) = (cfg.hidden, cfg.embed);
        let mut init_mat = |rows: usize, cols: usize, bound: f64| {
            let dist = Uniform::new_inclusive(-bound, bound).unwrap();
            Mat {
                rows,
                cols,
                data: (0..rows * cols).map(|_| dist.sample(&mut rng)).collect(),
            }
        };
        let eb = 1.0 / (e as f64).sqrt();
        let hb = 1.0 / (h as f64).sqrt();
        let mut cell = GruParams::zeros(h, e);
        for m in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h] {
            *m = init_mat(h, e, eb);
        }
        for m in [&mut cell.u_z, &mut cell.u_r, &mut cell.u_h] {
            *m = init_mat(h, h, hb);
        }
        let start: Vec<f64> = init_mat(1, e, eb).data;
        let step_choices: Vec<usize> = plan.steps.iter().map(|s| s.choices).collect();
        let embeddings = step_choices.iter().map(|&k| init_mat(k, e, eb)).collect();
        let heads = step_choices
            .iter()
            .map(|&k| Head {
                w: Mat::zeros(k, h),
                b: vec![0.0; k],
            })
            .collect();
        Ok(ControllerState {
            cfg,
            step_choices,
            cell,
            start,
            embeddings,
            heads,
            baseline: 0.0,
            updates_applied: 0,
            updates_skipped: 0,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn steps(&self) -> usize {
        self.step_choices.len()
    }

    pub fn updates_skipped(&self) -> u64 {
        self.updates_skipped
    }

    fn head_probs(&self, t: usize, hidden: &[f64]) -> Vec<f64> {
        let head = &self.heads[t];
        let mut logits = head.w.matvec(hidden);
        add_scaled(&mut logits, 1.0, &head.b);
        softmax(&logits)
    }

    /// Replays the recurrence for a fixed action sequence.
    fn replay(&self, actions: &[usize]) -> Vec<StepCache> {
        assert_eq!(actions.len(), self.step_choices.len());
        let mut caches = Vec::with_capacity(actions.len());
        let mut h = vec![0.0; self.cfg.hidden];
        let mut x = self.start.clone();
        for (t, &a) in actions.iter().enumerate() {
            let (h_new, cell_cache) = self.cell.forward(&x, &h);
            let probs = self.head_probs(t, &h_new);
            caches.push(StepCache {
                cell: cell_cache,
                hidden: h_new.clone(),
                probs,
            });
            x = self.embeddings[t].row(a).to_vec();
            h = h_new;
        }
        caches
    }

    /// Samples one action sequence: `a_t ~ softmax(head_t(h_t))`, hidden
    /// state advanced with the embedding of the sampled action.
    pub fn sample_episode<R: Rng>(&self, rng: &mut R) -> EpisodeRecord {
        let mut actions = Vec::with_capacity(self.steps());
        let mut log_probs = Vec::with_capacity(self.steps());
        let mut h = vec![0.0; self.cfg.hidden];
        let mut x = self.start.clone();
        for t in 0..self.steps() {
            let (h_new, _) = self.cell.forward(&x, &h);
            let probs = self.head_probs(t, &h_new);
            let u: f64 = rng.random_range(0.0..1.0);
            let mut cum = 0.0;
            let mut a = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    a = i;
                    break;
                }
            }
            actions.push(a);
            log_probs.push(probs[a].ln());
            x = self.embeddings[t].row(a).to_vec();
            h = h_new;
        }
        EpisodeRecord {
            actions,
            log_probs,
            reward: None,
        }
    }

    /// Log-probability of a full action sequence under the current policy,
    /// recomputed from scratch.
    pub fn action_log_prob(&self, actions: &[usize]) -> f64 {
        self.replay(actions)
            .iter()
            .zip(actions)
            .map(|(c, &a)| c.probs[a].ln())
            .sum()
    }

    /// Per-step argmax decode.
    pub fn greedy_actions(&self) -> ActionSequence {
        let mut actions = Vec::with_capacity(self.steps());
        let mut h = vec![0.0; self.cfg.hidden];
        let mut x = self.start.clone();
        for t in 0..self.steps() {
            let (h_new, _) = self.cell.forward(&x, &h);
            let probs = self.head_probs(t, &h_new);
            let a = argmax(&probs);
            actions.push(a);
            x = self.embeddings[t].row(a).to_vec();
            h = h_new;
        }
        actions
    }

    /// Gradient of the REINFORCE surrogate wrt every parameter, flattened in
    /// `flatten()` order, using baseline `b`.
    fn gradient(&self, episodes: &[EpisodeRecord], b: f64) -> Vec<f64> {
        let t_total = self.steps();
        let mut g_cell = GruParams::zeros(self.cfg.hidden, self.cfg.embed);
        let mut g_start = vec![0.0; self.cfg.embed];
        let mut g_embeds: Vec<Mat> = self
            .embeddings
            .iter()
            .map(|m| Mat::zeros(m.rows, m.cols))
            .collect();
        let mut g_heads: Vec<Head> = self
            .heads
            .iter()
            .map(|h| Head {
                w: Mat::zeros(h.w.rows, h.w.cols),
                b: vec![0.0; h.b.len()],
            })
            .collect();

        let m = episodes.len() as f64;
        for ep in episodes {
            let reward = ep.reward.expect("reward set before update");
            let caches = self.replay(&ep.actions);
            // dL/dh_t from the heads, then backprop through time.
            let mut dh_next = vec![0.0; self.cfg.hidden];
            let mut dx_next: Vec<f64> = Vec::new();
            for t in (0..t_total).rev() {
                let coef = self.cfg.gamma.powi((t_total - 1 - t) as i32) * (reward - b) / m;
                let cache = &caches[t];
                let a = ep.actions[t];
                // d log pi / d logits = onehot - probs.
                let mut dlogits: Vec<f64> = cache.probs.iter().map(|&p| -coef * p).collect();
                dlogits[a] += coef;
                g_heads[t].w.add_outer(1.0, &dlogits, &cache.hidden);
                add_scaled(&mut g_heads[t].b, 1.0, &dlogits);

                let mut dh = self.heads[t].w.matvec_t(&dlogits);
                add_scaled(&mut dh, 1.0, &dh_next);
                // The embedding fed at step t+1 is a function of a_t.
                if t + 1 < t_total && !dx_next.is_empty() {
                    add_scaled(g_embeds[t].row_mut(a), 1.0, &dx_next);
                }
                let (dx, dh_prev) = self.cell.backward(&cache.cell, &dh, &mut g_cell);
                dx_next = dx;
                dh_next = dh_prev;
            }
            if !dx_next.is_empty() {
                add_scaled(&mut g_start, 1.0, &dx_next);
            }
        }

        let mut flat = Vec::new();
        g_cell.flatten_into(&mut flat);
        flat.extend_from_slice(&g_start);
        for m in &g_embeds {
            flat.extend_from_slice(&m.data);
        }
        for h in &g_heads {
            flat.extend_from_slice(&h.w.data);
            flat.extend_from_slice(&h.b);
        }
        flat
    }

    /// All policy parameters in a fixed order (also the checkpoint format).
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        self.cell.flatten_into(&mut flat);
        flat.extend_from_slice(&self.start);
        for m in &self.embeddings {
            flat.extend_from_slice(&m.data);
        }
        for h in &self.heads {
            flat.extend_from_slice(&h.w.data);
            flat.extend_from_slice(&h.b);
        }
        flat
    }

    pub fn load_flat(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        self.cell.load_from(&mut it);
        for v in self.start.iter_mut() {
            *v = it.next().expect("short parameter vector");
        }
        for m in &mut self.embeddings {
            for v in m.data.iter_mut() {
                *v = it.next().expect("short parameter vector");
            }
        }
        for h in &mut self.heads {
            for v in h.w.data.iter_mut().chain(h.b.iter_mut()) {
                *v = it.next().expect("short parameter vector");
            }
        }
        assert!(it.next().is_none(), "long parameter vector");
    }

    /// REINFORCE surrogate whose gradient is the update direction (used by
    /// the finite-difference oracle in tests).
    #[cfg(test)]
    fn surrogate(&self, episodes: &[EpisodeRecord], b: f64) -> f64 {
        let t_total = self.steps();
        let m = episodes.len() as f64;
        episodes
            .iter()
            .map(|ep| {
                let r = ep.reward.unwrap();
                self.replay(&ep.actions)
                    .iter()
                    .zip(&ep.actions)
                    .enumerate()
                    .map(|(t, (c, &a))| {
                        self.cfg.gamma.powi((t_total - 1 - t) as i32) * c.probs[a].ln() * (r - b) / m
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
    }

    /// One gradient-ascent step from a full batch of rewarded episodes,
    /// then the baseline moving-average update. A non-finite gradient skips
    /// the parameter step (counted, never applied).
    pub fn update(&mut self, episodes: &[EpisodeRecord]) -> Result<bool> {
        if episodes.len() != self.cfg.batch {
            return Err(Error::InvalidConfig(format!(
                "update needs exactly batch = {} episodes, got {}",
                self.cfg.batch,
                episodes.len()
            )));
        }
        if episodes.iter().any(|e| e.reward.is_none()) {
            return Err(Error::InvalidConfig("episode rewards must be set before update".into()));
        }
        let grad = self.gradient(episodes, self.baseline);
        let applied = grad.iter().all(|g| g.is_finite());
        if applied {
            let mut params = self.flatten();
            add_scaled(&mut params, self.cfg.policy_lr, &grad);
            self.load_flat(&params);
            self.updates_applied += 1;
        } else {
            self.updates_skipped += 1;
        }
        let mean = episodes.iter().map(|e| e.reward.unwrap()).sum::<f64>() / episodes.len() as f64;
        self.baseline_update(mean);
        Ok(applied)
    }

    /// b <- (1 - decay) * b + decay * batch_mean.
    pub fn baseline_update(&mut self, batch_mean: f64) {
        let d = self.cfg.baseline_decay;
        self.baseline = (1.0 - d) * self.baseline + d * batch_mean;
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
