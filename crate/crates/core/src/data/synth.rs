//! Synthetic interaction logs for desk-scale experiments.
//!
//! [`desk_dataset`] mimics a sparse e-commerce log: items belong to topics
//! with Zipf popularity, users mix a couple of topics, consecutive genuine
//! interactions often follow item-to-item transitions, and a fraction of
//! clicks are off-profile noise that does not move the user's latent state.
//!
//! [`key_signal_dataset`] builds sequences whose next item is fully
//! determined by the last interaction, which is therefore the only key one.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Interaction;
use crate::rng::purpose_stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub topics: usize,
    pub topics_per_user: usize,
    pub min_len: usize,
    pub mean_extra_len: f64,
    pub max_len: usize,
    /// Probability that a genuine step follows the previous genuine item's
    /// transition list instead of sampling from the user's topics.
    pub p_transition: f64,
    /// Probability that a step is an off-profile click.
    pub p_noise: f64,
    pub successors: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 1500,
            items: 600,
            topics: 20,
            topics_per_user: 2,
            min_len: 5,
            mean_extra_len: 9.0,
            max_len: 60,
            p_transition: 0.6,
            p_noise: 0.2,
            successors: 3,
            zipf_exponent: 0.8,
            seed: 2024,
        }
    }
}

pub fn desk_dataset(cfg: &SynthConfig) -> Vec<Interaction> {
    assert!(cfg.items >= cfg.topics && cfg.topics >= 1);
    let mut rng = purpose_stream(cfg.seed, "synth-desk", 0);

    let mut topic_items: Vec<Vec<usize>> = vec![Vec::new(); cfg.topics];
    let mut order: Vec<usize> = (0..cfg.items).collect();
    order.shuffle(&mut rng);
    for (k, &item) in order.iter().enumerate() {
        topic_items[k % cfg.topics].push(item);
    }
    let item_topic: Vec<usize> = {
        let mut t = vec![0; cfg.items];
        for (topic, items) in topic_items.iter().enumerate() {
            for &i in items {
                t[i] = topic;
            }
        }
        t
    };
    let topic_samplers: Vec<WeightedIndex<f64>> = topic_items
        .iter()
        .map(|items| {
            let w: Vec<f64> = (0..items.len())
                .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
                .collect();
            WeightedIndex::new(w).expect("non-empty topic")
        })
        .collect();
    let successors: Vec<Vec<usize>> = (0..cfg.items)
        .map(|i| {
            let pool = &topic_items[item_topic[i]];
            let sampler = &topic_samplers[item_topic[i]];
            (0..cfg.successors)
                .map(|_| loop {
                    let j = pool[sampler.sample(&mut rng)];
                    if j != i || pool.len() == 1 {
                        break j;
                    }
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut clock = 0u64;
    for u in 0..cfg.users {
        let topics: Vec<usize> = (0..cfg.topics)
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, cfg.topics_per_user.min(cfg.topics))
            .copied()
            .collect();
        let weights: Vec<f64> = (0..topics.len()).map(|_| rng.gen_range(0.2..1.0)).collect();
        let topic_pick = WeightedIndex::new(&weights).expect("positive weights");
        let extra = sample_geometric(&mut rng, cfg.mean_extra_len);
        let len = (cfg.min_len + extra).min(cfg.max_len);
        let mut state: Option<usize> = None;
        for _ in 0..len {
            let item = if rng.gen_bool(cfg.p_noise) {
                rng.gen_range(0..cfg.items)
            } else {
                let next = match state {
                    Some(prev) if rng.gen_bool(cfg.p_transition) => {
                        *successors[prev].choose(&mut rng).expect("successors")
                    }
                    _ => {
                        let t = topics[topic_pick.sample(&mut rng)];
                        topic_items[t][topic_samplers[t].sample(&mut rng)]
                    }
                };
                state = Some(next);
                next
            };
            clock += 1;
            out.push(Interaction {
                user: format!("u{u}"),
                item: format!("i{item}"),
                timestamp: clock,
            });
        }
    }
    out
}

fn sample_geometric<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let p = 1.0 / (mean + 1.0);
    let mut n = 0;
    while !rng.gen_bool(p) {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeySignalConfig {
    pub users: usize,
    /// Items that follow a deterministic successor cycle.
    pub signal_items: usize,
    /// Items with no predictive value.
    pub noise_items: usize,
    /// Signal pairs embedded in each training prefix.
    pub pairs_per_user: usize,
    pub noise_per_user: usize,
    pub seed: u64,
}

impl Default for KeySignalConfig {
    fn default() -> Self {
        Self {
            users: 600,
            signal_items: 30,
            noise_items: 120,
            pairs_per_user: 3,
            noise_per_user: 6,
            seed: 11,
        }
    }
}

/// Each user's log is noise clicks interleaved with signal pairs
/// `(s, succ(s))`, ending in a chain `s, succ(s), succ²(s)`. After
/// leave-one-out the test input ends in `succ(s)`, whose successor is the
/// test target, so the final position is the one key interaction.
pub fn key_signal_dataset(cfg: &KeySignalConfig) -> Vec<Interaction> {
    let mut rng = purpose_stream(cfg.seed, "synth-key", 0);
    let succ = |s: usize| (s + 1) % cfg.signal_items;
    let signal = |s: usize| format!("s{s}");
    let mut out = Vec::new();
    let mut clock = 0u64;
    for u in 0..cfg.users {
        let mut chunks: Vec<Vec<String>> = Vec::new();
        for _ in 0..cfg.pairs_per_user {
            let s = rng.gen_range(0..cfg.signal_items);
            chunks.push(vec![signal(s), signal(succ(s))]);
        }
        for _ in 0..cfg.noise_per_user {
            chunks.push(vec![format!("n{}", rng.gen_range(0..cfg.noise_items))]);
        }
        chunks.shuffle(&mut rng);
        let s = rng.gen_range(0..cfg.signal_items);
        // a noise click separates the prefix from the final chain
        chunks.push(vec![format!("n{}", rng.gen_range(0..cfg.noise_items))]);
        chunks.push(vec![signal(s), signal(succ(s)), signal(succ(succ(s)))]);
        for item in chunks.into_iter().flatten() {
            clock += 1;
            out.push(Interaction {
                user: format!("u{u}"),
                item,
                timestamp: clock,
            });
        }
    }
    out
}
