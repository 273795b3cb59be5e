//! Finite-difference probes for every hand-written backward pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seqtta::tensor::{
    embedding_backward, embedding_forward, finite_difference_check, GradCheckReport, softmax_cross_entropy,
    FeedForward, Fragment, GruLayer, LayerNorm, Matrix, Parameter, SelfAttention,
    TransformerBlock,
};

pub const H: f64 = 1e-5;
pub const TOL_NONLINEAR: f64 = 1e-4;
pub const TOL_LINEAR: f64 = 1e-6;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct EmbeddingProbe {
    table: Parameter,
    ids: Vec<usize>,
    upstream: Matrix,
}

impl Fragment for EmbeddingProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f("table", &mut self.table);
    }
    fn loss(&self) -> f64 {
        embedding_forward(&self.table.value, &self.ids)
            .unwrap()
            .frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        embedding_backward(&mut self.table.grad, &self.ids, &self.upstream);
    }
}

pub fn embedding_lookup() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(1);
    let mut table = Matrix::random_uniform(7, 4, 1.0, &mut r);
    table.row_mut(0).fill(0.0);
    let ids = vec![1, 3, 3, 6, 2];
    let mut probe = EmbeddingProbe {
        table: Parameter::new(table),
        upstream: Matrix::random_uniform(ids.len(), 4, 1.0, &mut r),
        ids,
    };
    vec![("embedding_lookup".into(), finite_difference_check(&mut probe, H, TOL_LINEAR))]
}

struct LayerNormProbe {
    ln: LayerNorm,
    x: Parameter,
    upstream: Matrix,
}

impl Fragment for LayerNormProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.ln.visit_params("ln", f);
        f("input", &mut self.x);
    }
    fn loss(&self) -> f64 {
        self.ln.forward(&self.x.value).0.frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        let (_, cache) = self.ln.forward(&self.x.value);
        let dx = self.ln.backward(&cache, &self.upstream);
        self.x.grad.add_assign(&dx);
    }
}

pub fn layer_norm() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(2);
    let mut ln = LayerNorm::new(8);
    ln.gamma.value = Matrix::random_uniform(1, 8, 1.0, &mut r);
    ln.beta.value = Matrix::random_uniform(1, 8, 1.0, &mut r);
    let mut probe = LayerNormProbe {
        ln,
        x: Parameter::new(Matrix::random_uniform(6, 8, 1.0, &mut r)),
        upstream: Matrix::random_uniform(6, 8, 1.0, &mut r),
    };
    vec![("layer_norm".into(), finite_difference_check(&mut probe, H, TOL_NONLINEAR))]
}

struct FfnProbe {
    ffn: FeedForward,
    x: Parameter,
    upstream: Matrix,
}

impl Fragment for FfnProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.ffn.visit_params("ffn", f);
        f("input", &mut self.x);
    }
    fn loss(&self) -> f64 {
        self.ffn.forward(&self.x.value).0.frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        let (_, cache) = self.ffn.forward(&self.x.value);
        let dx = self.ffn.backward(&cache, &self.upstream);
        self.x.grad.add_assign(&dx);
    }
}

pub fn feed_forward() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(3);
    let mut probe = FfnProbe {
        ffn: FeedForward::new(8, 8, &mut r),
        x: Parameter::new(Matrix::random_uniform(6, 8, 1.0, &mut r)),
        upstream: Matrix::random_uniform(6, 8, 1.0, &mut r),
    };
    vec![("feed_forward".into(), finite_difference_check(&mut probe, H, TOL_NONLINEAR))]
}

struct GruProbe {
    gru: GruLayer,
    x: Parameter,
    upstream: Matrix,
}

impl Fragment for GruProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.gru.visit_params("gru", f);
        f("input", &mut self.x);
    }
    fn loss(&self) -> f64 {
        self.gru.forward(&self.x.value).0.frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        let (_, cache) = self.gru.forward(&self.x.value);
        let dx = self.gru.backward(&cache, &self.upstream);
        self.x.grad.add_assign(&dx);
    }
}

pub fn gru_layer() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(4);
    let mut gru = GruLayer::new(8, 8, &mut r);
    gru.input_bias.value = Matrix::random_uniform(1, 24, 0.5, &mut r);
    gru.hidden_bias.value = Matrix::random_uniform(1, 24, 0.5, &mut r);
    let mut probe = GruProbe {
        gru,
        x: Parameter::new(Matrix::random_uniform(5, 8, 1.0, &mut r)),
        upstream: Matrix::random_uniform(5, 8, 1.0, &mut r),
    };
    vec![("gru_layer".into(), finite_difference_check(&mut probe, H, TOL_NONLINEAR))]
}

struct AttentionProbe {
    attn: SelfAttention,
    x: Parameter,
    pad: Option<Vec<bool>>,
    upstream: Matrix,
}

impl Fragment for AttentionProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.attn.visit_params("attn", f);
        f("input", &mut self.x);
    }
    fn loss(&self) -> f64 {
        self.attn
            .forward(&self.x.value, self.pad.as_deref())
            .0
            .frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        let (_, cache) = self.attn.forward(&self.x.value, self.pad.as_deref());
        let dx = self.attn.backward(&cache, &self.upstream);
        self.x.grad.add_assign(&dx);
    }
}

pub fn self_attention_single_and_multi_head() -> Vec<(String, GradCheckReport)> {
    let mut out = Vec::new();
    for (heads, pad) in [
        (1, None),
        (2, None),
        (2, Some(vec![true, false, false, true, false, false])),
    ] {
        let mut r = rng(5 + heads as u64);
        let mut probe = AttentionProbe {
            attn: SelfAttention::new(8, heads, &mut r).unwrap(),
            x: Parameter::new(Matrix::random_uniform(6, 8, 1.0, &mut r)),
            pad,
            upstream: Matrix::random_uniform(6, 8, 1.0, &mut r),
        };
        let name = format!("self_attention(heads={heads}, padded={})", probe.pad.is_some());
        out.push((name, finite_difference_check(&mut probe, H, TOL_NONLINEAR)));
    }
    out
}

struct BlockProbe {
    block: TransformerBlock,
    x: Parameter,
    upstream: Matrix,
}

impl Fragment for BlockProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.block.visit_params("block", f);
        f("input", &mut self.x);
    }
    fn loss(&self) -> f64 {
        self.block
            .forward(&self.x.value, None)
            .0
            .frobenius_dot(&self.upstream)
    }
    fn backward(&mut self) {
        let (_, cache) = self.block.forward(&self.x.value, None);
        let dx = self.block.backward(&cache, &self.upstream);
        self.x.grad.add_assign(&dx);
    }
}

pub fn transformer_block() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(8);
    let mut probe = BlockProbe {
        block: TransformerBlock::new(8, 1, &mut r).unwrap(),
        x: Parameter::new(Matrix::random_uniform(6, 8, 1.0, &mut r)),
        upstream: Matrix::random_uniform(6, 8, 1.0, &mut r),
    };
    vec![("transformer_block".into(), finite_difference_check(&mut probe, H, TOL_NONLINEAR))]
}

struct CrossEntropyProbe {
    scores: Parameter,
    targets: Vec<usize>,
    active: Vec<bool>,
}

impl Fragment for CrossEntropyProbe {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f("scores", &mut self.scores);
    }
    fn loss(&self) -> f64 {
        softmax_cross_entropy(&self.scores.value, &self.targets, &self.active)
            .unwrap()
            .0
    }
    fn backward(&mut self) {
        let (_, g) =
            softmax_cross_entropy(&self.scores.value, &self.targets, &self.active).unwrap();
        self.scores.grad.add_assign(&g);
    }
}

pub fn full_softmax_cross_entropy() -> Vec<(String, GradCheckReport)> {
    let mut r = rng(9);
    let mut probe = CrossEntropyProbe {
        scores: Parameter::new(Matrix::random_uniform(3, 10, 2.0, &mut r)),
        targets: vec![4, 10, 1],
        active: vec![true, false, true],
    };
    vec![("full_softmax_cross_entropy".into(), finite_difference_check(&mut probe, H, TOL_LINEAR))]
}

/// Every kernel probe, in a fixed order.
pub fn all() -> Vec<(String, GradCheckReport)> {
    [
        embedding_lookup as fn() -> Vec<(String, GradCheckReport)>,
        layer_norm,
        feed_forward,
        gru_layer,
        self_attention_single_and_multi_head,
        transformer_block,
        full_softmax_cross_entropy,
    ]
    .iter()
    .flat_map(|f| f())
    .collect()
}
