//! Joint search space (architecture x quantization x device) and the
//! bijection between controller action sequences and concrete candidates.
//!
//! Decision order is fixed: all architecture decisions first (layer-major;
//! conv layers contribute filter-height, filter-width, filter-count, pool;
//! fully-connected layers contribute neuron count), then quantization
//! decisions (layer-major: weight int, weight frac, activation int,
//! activation frac), then the device pick.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{FixedPointFormat, QuantizationScheme};

/// One searched layer of a concrete architecture (Conv tuples follow the
/// (FH, FW, #F, P) encoding; FC layers carry the neuron count).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv {
        filter_h: usize,
        filter_w: usize,
        num_filters: usize,
        pool: bool,
    },
    Fc {
        neurons: usize,
    },
}

/// A concrete child-network architecture plus the task's class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
}

/// Choice lists for one layer slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerTemplate {
    Conv {
        filter_h: Vec<usize>,
        filter_w: Vec<usize>,
        num_filters: Vec<usize>,
        pool: Vec<bool>,
    },
    Fc {
        neurons: Vec<usize>,
    },
}

/// Per-layer quantization choice lists (weights and activations).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerQuantChoices {
    pub wq_int: Vec<u32>,
    pub wq_frac: Vec<u32>,
    pub aq_int: Vec<u32>,
    pub aq_frac: Vec<u32>,
}

impl LayerQuantChoices {
    /// Integer bits 0..=3, fraction bits 0..=6 for both weights and
    /// activations: the searchable range of the resource-limited setup.
    pub fn standard() -> Self {
        LayerQuantChoices {
            wq_int: (0..=3).collect(),
            wq_frac: (0..=6).collect(),
            aq_int: (0..=3).collect(),
            aq_frac: (0..=6).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    pub name: String,
    pub input_shape: (usize, usize, usize),
    pub classes: usize,
    pub layers: Vec<LayerTemplate>,
    /// One entry per layer; quantization decisions are skipped entirely when
    /// a mode fixes quantization.
    pub quant: Vec<LayerQuantChoices>,
    /// Indices into the run's device library.
    pub devices: Vec<usize>,
}

/// One controller decision step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionKind {
    ConvFilterH(usize),
    ConvFilterW(usize),
    ConvFilters(usize),
    ConvPool(usize),
    FcNeurons(usize),
    WeightInt(usize),
    WeightFrac(usize),
    ActInt(usize),
    ActFrac(usize),
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionStep {
    pub kind: DecisionKind,
    pub choices: usize,
}

/// Ordered decision steps for one search configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionPlan {
    pub steps: Vec<DecisionStep>,
}

/// Ordered action indices, one per decision step.
pub type ActionSequence = Vec<usize>;

/// Parts of a candidate held fixed by the active mode.
#[derive(Debug, Clone, Default)]
pub struct FixedParts {
    pub arch: Option<ArchitectureSpec>,
    pub quant: Option<QuantizationScheme>,
    pub device_index: Option<usize>,
}

/// A fully decoded candidate. `quant`/`device_index` stay `None` in modes
/// that neither search nor fix them (full-precision, device-less runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub arch: ArchitectureSpec,
    pub quant: Option<QuantizationScheme>,
    pub device_index: Option<usize>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidConfig("search space has no layers".into()));
        }
        if self.quant.len() != self.layers.len() {
            return Err(Error::InvalidConfig(format!(
                "space has {} layers but {} quant choice sets",
                self.layers.len(),
                self.quant.len()
            )));
        }
        let empty = |name: &str| Error::InvalidConfig(format!("empty choice list: {name}"));
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerTemplate::Conv {
                    filter_h,
                    filter_w,
                    num_filters,
                    pool,
                } => {
                    if filter_h.is_empty() || filter_w.is_empty() || num_filters.is_empty() || pool.is_empty() {
                        return Err(empty(&format!("layer {i} conv fields")));
                    }
                    if filter_h.iter().chain(filter_w).any(|&f| f % 2 == 0 || f == 0) {
                        return Err(Error::InvalidConfig(format!(
                            "layer {i}: filter sizes must be odd and >= 1"
                        )));
                    }
                }
                LayerTemplate::Fc { neurons } => {
                    if neurons.is_empty() {
                        return Err(empty(&format!("layer {i} fc neurons")));
                    }
                }
            }
            let q = &self.quant[i];
            if q.wq_int.is_empty() || q.wq_frac.is_empty() || q.aq_int.is_empty() || q.aq_frac.is_empty() {
                return Err(empty(&format!("layer {i} quant")));
            }
        }
        if self.devices.is_empty() {
            return Err(empty("devices"));
        }
        Ok(())
    }

    /// Ordered decision steps for the enabled decision groups.
    pub fn decision_plan(&self, arch: bool, quant: bool, device: bool) -> DecisionPlan {
        let mut steps = Vec::new();
        let mut push = |kind, len| steps.push(DecisionStep { kind, choices: len });
        if arch {
            for (i, layer) in self.layers.iter().enumerate() {
                match layer {
                    LayerTemplate::Conv {
                        filter_h,
                        filter_w,
                        num_filters,
                        pool,
                    } => {
                        push(DecisionKind::ConvFilterH(i), filter_h.len());
                        push(DecisionKind::ConvFilterW(i), filter_w.len());
                        push(DecisionKind::ConvFilters(i), num_filters.len());
                        push(DecisionKind::ConvPool(i), pool.len());
                    }
                    LayerTemplate::Fc { neurons } => push(DecisionKind::FcNeurons(i), neurons.len()),
                }
            }
        }
        if quant {
            for (i, q) in self.quant.iter().enumerate() {
                push(DecisionKind::WeightInt(i), q.wq_int.len());
                push(DecisionKind::WeightFrac(i), q.wq_frac.len());
                push(DecisionKind::ActInt(i), q.aq_int.len());
                push(DecisionKind::ActFrac(i), q.aq_frac.len());
            }
        }
        if device {
            push(DecisionKind::Device, self.devices.len());
        }
        DecisionPlan { steps }
    }

    /// The full plan: architecture, quantization, and device all searched.
    pub fn full_plan(&self) -> DecisionPlan {
        self.decision_plan(true, true, true)
    }

    /// Number of candidates in the full plan, as a big integer.
    pub fn space_size(&self) -> BigUint {
        self.full_plan()
            .steps
            .iter()
            .fold(BigUint::from(1u32), |acc, s| acc * BigUint::from(s.choices))
    }
}

impl DecisionPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn check(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.steps.len() {
            return Err(Error::ActionLengthMismatch {
                got: actions.len(),
                expected: self.steps.len(),
            });
        }
        for (t, (&a, step)) in actions.iter().zip(&self.steps).enumerate() {
            if a >= step.choices {
                return Err(Error::ActionOutOfRange {
                    step: t,
                    action: a,
                    choices: step.choices,
                });
            }
        }
        Ok(())
    }
}

/// Decodes an action sequence against a plan, filling non-searched parts
/// from `fixed`. Quantization formats with zero data bits make the candidate
/// infeasible (flagged here, before any training is attempted).
pub fn decode_with_plan(
    space: &SearchSpace,
    plan: &DecisionPlan,
    actions: &[usize],
    fixed: &FixedParts,
) -> Result<Candidate> {
    plan.check(actions)?;

    let searches_quant = plan.steps.iter().any(|s| {
        matches!(
            s.kind,
            DecisionKind::WeightInt(_)
                | DecisionKind::WeightFrac(_)
                | DecisionKind::ActInt(_)
                | DecisionKind::ActFrac(_)
        )
    });

    // Architecture scaffold: fixed spec, or first choices as placeholders
    // for the searched fields to overwrite.
    let mut layers: Vec<LayerSpec> = match &fixed.arch {
        Some(a) => a.layers.clone(),
        None => first_choice_layers(space),
    };
    let n = space.layers.len();
    let mut wq = vec![(0u32, 0u32); n];
    let mut aq = vec![(0u32, 0u32); n];
    if let Some(q) = &fixed.quant {
        for i in 0..n {
            let (a, w) = q.layer_formats(i);
            wq[i] = (w.int_bits(), w.frac_bits());
            aq[i] = (a.int_bits(), a.frac_bits());
        }
    }
    let mut device_index = fixed.device_index;

    for (step, &a) in plan.steps.iter().zip(actions) {
        match step.kind {
            DecisionKind::ConvFilterH(i) => {
                if let (LayerSpec::Conv { filter_h, .. }, LayerTemplate::Conv { filter_h: c, .. }) =
                    (&mut layers[i], &space.layers[i])
                {
                    *filter_h = c[a];
                }
            }
            DecisionKind::ConvFilterW(i) => {
                if let (LayerSpec::Conv { filter_w, .. }, LayerTemplate::Conv { filter_w: c, .. }) =
                    (&mut layers[i], &space.layers[i])
                {
                    *filter_w = c[a];
                }
            }
            DecisionKind::ConvFilters(i) => {
                if let (LayerSpec::Conv { num_filters, .. }, LayerTemplate::Conv { num_filters: c, .. }) =
                    (&mut layers[i], &space.layers[i])
                {
                    *num_filters = c[a];
                }
            }
            DecisionKind::ConvPool(i) => {
                if let (LayerSpec::Conv { pool, .. }, LayerTemplate::Conv { pool: c, .. }) =
                    (&mut layers[i], &space.layers[i])
                {
                    *pool = c[a];
                }
            }
            DecisionKind::FcNeurons(i) => {
                if let (LayerSpec::Fc { neurons }, LayerTemplate::Fc { neurons: c }) =
                    (&mut layers[i], &space.layers[i])
                {
                    *neurons = c[a];
                }
            }
            DecisionKind::WeightInt(i) => wq[i].0 = space.quant[i].wq_int[a],
            DecisionKind::WeightFrac(i) => wq[i].1 = space.quant[i].wq_frac[a],
            DecisionKind::ActInt(i) => aq[i].0 = space.quant[i].aq_int[a],
            DecisionKind::ActFrac(i) => aq[i].1 = space.quant[i].aq_frac[a],
            DecisionKind::Device => device_index = Some(space.devices[a]),
        }
    }

    let quant = if searches_quant {
        let mut qa = Vec::with_capacity(n);
        let mut qw = Vec::with_capacity(n);
        for i in 0..n {
            let w = FixedPointFormat::signed(wq[i].0, wq[i].1).map_err(|_| infeasible_fmt(i, "weight"))?;
            let a = FixedPointFormat::unsigned(aq[i].0, aq[i].1).map_err(|_| infeasible_fmt(i, "activation"))?;
            qw.push(w);
            qa.push(a);
        }
        Some(QuantizationScheme::new(qa, qw)?)
    } else {
        fixed.quant.clone()
    };

    Ok(Candidate {
        arch: ArchitectureSpec {
            layers,
            classes: space.classes,
        },
        quant,
        device_index,
    })
}

fn infeasible_fmt(layer: usize, which: &str) -> Error {
    Error::InfeasibleCandidate {
        reason: format!("layer {layer}: {which} format has zero data bits"),
    }
}

fn first_choice_layers(space: &SearchSpace) -> Vec<LayerSpec> {
    space
        .layers
        .iter()
        .map(|t| match t {
            LayerTemplate::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool,
            } => LayerSpec::Conv {
                filter_h: filter_h[0],
                filter_w: filter_w[0],
                num_filters: num_filters[0],
                pool: pool[0],
            },
            LayerTemplate::Fc { neurons } => LayerSpec::Fc { neurons: neurons[0] },
        })
        .collect()
}

/// Full-plan decode: architecture, quantization scheme, and device index.
pub fn decode(actions: &[usize], space: &SearchSpace) -> Result<(ArchitectureSpec, QuantizationScheme, usize)> {
    let plan = space.full_plan();
    let c = decode_with_plan(space, &plan, actions, &FixedParts::default())?;
    Ok((c.arch, c.quant.expect("full plan decodes quant"), c.device_index.expect("full plan decodes device")))
}

/// Inverse of `decode` over the full plan.
pub fn encode(
    arch: &ArchitectureSpec,
    quant: &QuantizationScheme,
    device_index: usize,
    space: &SearchSpace,
) -> Result<ActionSequence> {
    let plan = space.full_plan();
    let find = |name: &str, pos: Option<usize>| {
        pos.ok_or_else(|| Error::InvalidConfig(format!("{name} not in its choice list")))
    };
    let mut actions = Vec::with_capacity(plan.len());
    for step in &plan.steps {
        let a = match step.kind {
            DecisionKind::ConvFilterH(i) => match (&arch.layers[i], &space.layers[i]) {
                (LayerSpec::Conv { filter_h, .. }, LayerTemplate::Conv { filter_h: c, .. }) => {
                    find("filter_h", c.iter().position(|v| v == filter_h))?
                }
                _ => return Err(Error::InvalidConfig(format!("layer {i} kind mismatch"))),
            },
            DecisionKind::ConvFilterW(i) => match (&arch.layers[i], &space.layers[i]) {
                (LayerSpec::Conv { filter_w, .. }, LayerTemplate::Conv { filter_w: c, .. }) => {
                    find("filter_w", c.iter().position(|v| v == filter_w))?
                }
                _ => return Err(Error::InvalidConfig(format!("layer {i} kind mismatch"))),
            },
            DecisionKind::ConvFilters(i) => match (&arch.layers[i], &space.layers[i]) {
                (LayerSpec::Conv { num_filters, .. }, LayerTemplate::Conv { num_filters: c, .. }) => {
                    find("num_filters", c.iter().position(|v| v == num_filters))?
                }
                _ => return Err(Error::InvalidConfig(format!("layer {i} kind mismatch"))),
            },
            DecisionKind::ConvPool(i) => match (&arch.layers[i], &space.layers[i]) {
                (LayerSpec::Conv { pool, .. }, LayerTemplate::Conv { pool: c, .. }) => {
                    find("pool", c.iter().position(|v| v == pool))?
                }
                _ => return Err(Error::InvalidConfig(format!("layer {i} kind mismatch"))),
            },
            DecisionKind::FcNeurons(i) => match (&arch.layers[i], &space.layers[i]) {
                (LayerSpec::Fc { neurons }, LayerTemplate::Fc { neurons: c }) => {
                    find("neurons", c.iter().position(|v| v == neurons))?
                }
                _ => return Err(Error::InvalidConfig(format!("layer {i} kind mismatch"))),
            },
            DecisionKind::WeightInt(i) => {
                find("wq_int", space.quant[i].wq_int.iter().position(|&v| v == quant.qw[i].int_bits()))?
            }
            DecisionKind::WeightFrac(i) => {
                find("wq_frac", space.quant[i].wq_frac.iter().position(|&v| v == quant.qw[i].frac_bits()))?
            }
            DecisionKind::ActInt(i) => {
                find("aq_int", space.quant[i].aq_int.iter().position(|&v| v == quant.qa[i].int_bits()))?
            }
            DecisionKind::ActFrac(i) => {
                find("aq_frac", space.quant[i].aq_frac.iter().position(|&v| v == quant.qa[i].frac_bits()))?
            }
            DecisionKind::Device => find("device", space.devices.iter().position(|&v| v == device_index))?,
        };
        actions.push(a);
    }
    Ok(actions)
}

/// Resource-limited space: 6 conv + 2 fc layers on 32x32x3 inputs, filter
/// counts {24,36,48,64}, filter sizes {1,3,5,7}, FC widths {64..512},
/// integer bits 0..=3, fraction bits 0..=6, two devices.
pub fn rls_space() -> SearchSpace {
    let conv = LayerTemplate::Conv {
        filter_h: vec![1, 3, 5, 7],
        filter_w: vec![1, 3, 5, 7],
        num_filters: vec![24, 36, 48, 64],
        pool: vec![false, true],
    };
    let mut layers = vec![conv; 6];
    for neurons in [vec![64, 128, 256, 512], vec![64, 128, 256, 512]] {
        layers.push(LayerTemplate::Fc { neurons });
    }
    let space = SearchSpace {
        name: "rls".into(),
        input_shape: (3, 32, 32),
        classes: 10,
        quant: vec![LayerQuantChoices::standard(); layers.len()],
        layers,
        devices: vec![0, 1],
    };
    space.validate().expect("rls space is valid");
    space
}

/// VGG-like space: 8 conv + 3 fc layers, filter counts {128..1024}, FC
/// widths {256..2048}. Used for mapping and cost experiments.
pub fn vls_space() -> SearchSpace {
    let conv = LayerTemplate::Conv {
        filter_h: vec![1, 3, 5, 7],
        filter_w: vec![1, 3, 5, 7],
        num_filters: vec![128, 256, 512, 1024],
        pool: vec![false, true],
    };
    let mut layers = vec![conv; 8];
    for _ in 0..3 {
        layers.push(LayerTemplate::Fc {
            neurons: vec![256, 512, 1024, 2048],
        });
    }
    let space = SearchSpace {
        name: "vls".into(),
        input_shape: (3, 32, 32),
        classes: 10,
        quant: vec![LayerQuantChoices::standard(); layers.len()],
        layers,
        devices: vec![0, 1],
    };
    space.validate().expect("vls space is valid");
    space
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rls_choice_lists() {
        let s = rls_space();
        match &s.layers[0] {
            LayerTemplate::Conv { num_filters, filter_h, .. } => {
                assert_eq!(num_filters, &vec![24, 36, 48, 64]);
                assert_eq!(filter_h, &vec![1, 3, 5, 7]);
            }
            _ => panic!("layer 0 should be conv"),
        }
        assert_eq!(s.quant[0].wq_frac, (0..=6).collect::<Vec<_>>());
        // 6 conv x 4 + 2 fc x 1 + 8 x 4 quant + 1 device.
        assert_eq!(s.full_plan().len(), 59);
    }

    #[test]
    fn vls_is_bigger() {
        let v = vls_space();
        assert_eq!(v.layers.len(), 11);
        match &v.layers[0] {
            LayerTemplate::Conv { num_filters, .. } => {
                assert_eq!(num_filters, &vec![128, 256, 512, 1024])
            }
            _ => panic!("layer 0 should be conv"),
        }
        assert!(v.space_size() > rls_space().space_size());
    }

    #[test]
    fn space_size_counting() {
        // Single decision with k choices.
        let s = SearchSpace {
            name: "one".into(),
            input_shape: (1, 4, 4),
            classes: 2,
            layers: vec![LayerTemplate::Fc { neurons: vec![4, 8, 16] }],
            quant: vec![LayerQuantChoices {
                wq_int: vec![1],
                wq_frac: vec![2],
                aq_int: vec![1],
                aq_frac: vec![2],
            }],
            devices: vec![0],
        };
        assert_eq!(s.space_size(), BigUint::from(3u32));
        // Adding one binary decision doubles the size.
        let mut s2 = s.clone();
        s2.quant[0].wq_int = vec![1, 2];
        assert_eq!(s2.space_size(), BigUint::from(6u32));
    }

    #[test]
    fn space_size_matches_enumeration_on_truncated_space() {
        let s = truncated_space();
        let plan = s.full_plan();
        // Mixed-radix enumeration of every action sequence.
        let mut count = 0u64;
        let mut actions = vec![0usize; plan.len()];
        loop {
            count += 1;
            // Every sequence decodes or is flagged infeasible, never panics.
            match decode(&actions, &s) {
                Ok(_) | Err(Error::InfeasibleCandidate { .. }) => {}
                Err(e) => panic!("unexpected decode error: {e}"),
            }
            let mut t = plan.len();
            loop {
                if t == 0 {
                    break;
                }
                t -= 1;
                actions[t] += 1;
                if actions[t] < plan.steps[t].choices {
                    break;
                }
                actions[t] = 0;
            }
            if actions.iter().all(|&a| a == 0) {
                break;
            }
        }
        assert_eq!(BigUint::from(count), s.space_size());
    }

    fn truncated_space() -> SearchSpace {
        SearchSpace {
            name: "tiny".into(),
            input_shape: (1, 8, 8),
            classes: 2,
            layers: vec![
                LayerTemplate::Conv {
                    filter_h: vec![1, 3],
                    filter_w: vec![3],
                    num_filters: vec![4, 8],
                    pool: vec![false, true],
                },
                LayerTemplate::Fc { neurons: vec![8, 16] },
            ],
            quant: vec![
                LayerQuantChoices {
                    wq_int: vec![1],
                    wq_frac: vec![2, 4],
                    aq_int: vec![1],
                    aq_frac: vec![4],
                },
                LayerQuantChoices {
                    wq_int: vec![0, 1],
                    wq_frac: vec![2],
                    aq_int: vec![1],
                    aq_frac: vec![4],
                },
            ],
            devices: vec![0, 1],
        }
    }

    #[test]
    fn all_zero_actions_give_first_choices() {
        // On a space whose first quant choices are representable, all-zero
        // actions decode to the first choice of every list.
        let s = truncated_space();
        let (arch, quant, dev) = decode(&vec![0; s.full_plan().len()], &s).unwrap();
        match &arch.layers[0] {
            LayerSpec::Conv {
                filter_h,
                filter_w,
                num_filters,
                pool,
            } => assert_eq!((*filter_h, *filter_w, *num_filters, *pool), (1, 3, 4, false)),
            _ => panic!(),
        }
        assert_eq!(arch.layers[1], LayerSpec::Fc { neurons: 8 });
        assert_eq!(quant.qw[0], FixedPointFormat::signed(1, 2).unwrap());
        assert_eq!(dev, 0);

        // The standard lists start at 0 integer / 0 fraction bits, so the
        // all-zero candidate of the full RLS space is flagged infeasible.
        let rls = rls_space();
        match decode(&vec![0; rls.full_plan().len()], &rls) {
            Err(Error::InfeasibleCandidate { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    fn table_candidate() -> (ArchitectureSpec, QuantizationScheme, usize) {
        // An 8-layer sample architecture within the RLS lists.
        let rows: [(usize, usize, usize, bool, u32, u32, u32, u32); 8] = [
            (3, 5, 64, false, 2, 6, 2, 6),
            (3, 1, 48, false, 1, 2, 1, 2),
            (1, 3, 48, true, 2, 6, 1, 3),
            (5, 3, 64, true, 1, 2, 0, 4),
            (1, 1, 64, true, 0, 1, 1, 3),
            (3, 3, 24, false, 1, 1, 2, 5),
            (256, 0, 0, false, 3, 5, 1, 3),
            (64, 0, 0, false, 1, 3, 2, 6),
        ];
        let mut layers = Vec::new();
        let mut qa = Vec::new();
        let mut qw = Vec::new();
        for (i, &(a, b, c, p, wi, wf, ai, af)) in rows.iter().enumerate() {
            if i < 6 {
                layers.push(LayerSpec::Conv {
                    filter_h: a,
                    filter_w: b,
                    num_filters: c,
                    pool: p,
                });
            } else {
                layers.push(LayerSpec::Fc { neurons: a });
            }
            qw.push(FixedPointFormat::signed(wi, wf).unwrap());
            qa.push(FixedPointFormat::unsigned(ai, af).unwrap());
        }
        (
            ArchitectureSpec { layers, classes: 10 },
            QuantizationScheme::new(qa, qw).unwrap(),
            0,
        )
    }

    #[test]
    fn table_architecture_round_trips() {
        let s = rls_space();
        let (arch, quant, dev) = table_candidate();
        let actions = encode(&arch, &quant, dev, &s).unwrap();
        let (a2, q2, d2) = decode(&actions, &s).unwrap();
        assert_eq!(a2, arch);
        assert_eq!(q2, quant);
        assert_eq!(d2, dev);
    }

    #[test]
    fn random_sequences_round_trip() {
        let s = rls_space();
        let plan = s.full_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut feasible = 0;
        for _ in 0..10_000 {
            let actions: Vec<usize> = plan
                .steps
                .iter()
                .map(|st| rng.random_range(0..st.choices))
                .collect();
            match decode(&actions, &s) {
                Ok((arch, quant, dev)) => {
                    feasible += 1;
                    assert_eq!(encode(&arch, &quant, dev, &s).unwrap(), actions);
                }
                Err(Error::InfeasibleCandidate { .. }) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        assert!(feasible > 4000, "only {feasible} feasible out of 10000");
    }

    #[test]
    fn out_of_range_action_rejected_with_step() {
        let s = rls_space();
        let plan = s.full_plan();
        let mut actions = vec![0usize; plan.len()];
        actions[5] = 999;
        match decode(&actions, &s) {
            Err(Error::ActionOutOfRange { step, .. }) => assert_eq!(step, 5),
            other => panic!("expected ActionOutOfRange, got {other:?}"),
        }
        match decode(&actions[..10], &s) {
            Err(Error::ActionLengthMismatch { got, expected }) => {
                assert_eq!((got, expected), (10, 59));
            }
            other => panic!("expected ActionLengthMismatch, got {other:?}"),
        }
    }

    #[test]
    fn gated_plan_skips_decision_groups() {
        let s = rls_space();
        assert_eq!(s.decision_plan(true, false, false).len(), 26);
        assert_eq!(s.decision_plan(false, true, false).len(), 32);
        assert_eq!(s.decision_plan(false, true, true).len(), 33);
    }
}
