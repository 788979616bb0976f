//! Training objectives over a mini-batch of unit embeddings.
//!
//! Every loss returns its value together with gradients with respect to the
//! query and document embeddings; the encoder turns those into parameter
//! gradients.

use serde::{Deserialize, Serialize};

use crate::batch::MiniBatch;
use crate::error::{Error, Result};
use crate::logic::Relation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Softmax temperature of the contrastive term.
    pub tau: f64,
    pub gamma_e: f64,
    pub gamma_s: f64,
    pub lambda_e: f64,
    pub lambda_s: f64,
    /// Floor applied before every logarithm.
    pub eps: f64,
    /// Temperature of the exclusion-loss softmax; `tau` when unset.
    pub similarity_tau: Option<f64>,
    /// Divide the subset loss by its number of (edge, document) terms.
    pub subset_mean: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            gamma_e: 0.2,
            gamma_s: 0.2,
            lambda_e: 0.1,
            lambda_s: 0.1,
            eps: 1e-8,
            similarity_tau: None,
            subset_mean: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tau, self.gamma_e, self.gamma_s, self.eps, self.similarity_tau.unwrap_or(1.0)];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("tau, margins and eps must be finite and positive".into()));
        }
        if [self.lambda_e, self.lambda_s].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn exclusion_tau(&self) -> f64 {
        self.similarity_tau.unwrap_or(self.tau)
    }
}

/// Unit embeddings for the queries and documents of one batch, in batch order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embeddings {
    pub queries: Vec<Vec<f64>>,
    pub docs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    /// Number of summed terms (queries, edges or edge-document pairs).
    pub terms: usize,
    pub grad_queries: Vec<Vec<f64>>,
    pub grad_docs: Vec<Vec<f64>>,
}

impl LossOutput {
    fn zeros(emb: &Embeddings) -> Self {
        let z = |v: &[Vec<f64>]| v.iter().map(|r| vec![0.0; r.len()]).collect();
        Self {
            value: 0.0,
            terms: 0,
            grad_queries: z(&emb.queries),
            grad_docs: z(&emb.docs),
        }
    }

    fn scale(&mut self, s: f64) {
        self.value *= s;
        for g in self.grad_queries.iter_mut().chain(self.grad_docs.iter_mut()) {
            g.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Value divided by the term count (zero when there are no terms).
    pub fn mean(&self) -> f64 {
        if self.terms == 0 {
            0.0
        } else {
            self.value / self.terms as f64
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn check_shapes(batch: &MiniBatch, emb: &Embeddings) -> Result<()> {
    if emb.queries.len() != batch.queries.len() {
        return Err(Error::LengthMismatch(emb.queries.len(), batch.queries.len()));
    }
    if emb.docs.len() != batch.documents.len() {
        return Err(Error::LengthMismatch(emb.docs.len(), batch.documents.len()));
    }
    Ok(())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Supervised contrastive loss, summed over queries:
/// `Σ_i −1/|P(i)| Σ_{p∈P(i)} log softmax_p(q_i·d/τ)` with the softmax taken
/// over all in-batch documents.
pub fn supcon_loss(batch: &MiniBatch, emb: &Embeddings, tau: f64) -> Result<LossOutput> {
    check_shapes(batch, emb)?;
    let mut out = LossOutput::zeros(emb);
    for (i, q) in emb.queries.iter().enumerate() {
        let pos = &batch.positives[i];
        if pos.is_empty() {
            return Err(Error::Batch(format!("query position {i} has no positive document")));
        }
        let logits: Vec<f64> = emb.docs.iter().map(|d| dot(q, d) / tau).collect();
        let probs = softmax(&logits);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let w = 1.0 / pos.len() as f64;
        out.value -= w * pos.iter().map(|&p| logits[p] - lse).sum::<f64>();
        // ∂/∂logit_j = softmax_j − 1[j∈P]/|P|
        for (j, d) in emb.docs.iter().enumerate() {
            let mut g = probs[j];
            if pos.contains(&j) {
                g -= w;
            }
            axpy(&mut out.grad_queries[i], g / tau, d);
            axpy(&mut out.grad_docs[j], g / tau, q);
        }
    }
    out.terms = emb.queries.len();
    Ok(out)
}

/// Softmax over in-batch documents of `q·d/τ` (the cosine, for unit vectors).
pub fn similarity_distribution(query: &[f64], docs: &[Vec<f64>], tau: f64) -> Vec<f64> {
    let logits: Vec<f64> = docs.iter().map(|d| dot(query, d) / tau).collect();
    softmax(&logits)
}

/// `½(KL(p‖q) + KL(q‖p))` with entries floored at `eps` inside the logs.
pub fn sym_kl(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(sym_kl_with_grad(p, q, eps).0)
}

fn sym_kl_with_grad(p: &[f64], q: &[f64], eps: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let mut value = 0.0;
    let mut dp = vec![0.0; p.len()];
    let mut dq = vec![0.0; q.len()];
    for k in 0..p.len() {
        let (lp, lq) = (p[k].max(eps).ln(), q[k].max(eps).ln());
        value += 0.5 * (p[k] - q[k]) * (lp - lq);
        let p_live = p[k] > eps;
        let q_live = q[k] > eps;
        dp[k] = 0.5 * (lp - lq + if p_live { 1.0 - q[k] / p[k] } else { 0.0 });
        dq[k] = 0.5 * (lq - lp + if q_live { 1.0 - p[k] / q[k] } else { 0.0 });
    }
    (value, dp, dq)
}

// Pull a gradient w.r.t. softmax probabilities back onto the query and
// document embeddings that produced the logits q·d/τ.
fn softmax_backward(
    probs: &[f64],
    g_probs: &[f64],
    qi: usize,
    emb: &Embeddings,
    tau: f64,
    scale: f64,
    out: &mut LossOutput,
) {
    let inner = dot(probs, g_probs);
    for (k, d) in emb.docs.iter().enumerate() {
        let g_logit = scale * probs[k] * (g_probs[k] - inner) / tau;
        axpy(&mut out.grad_queries[qi], g_logit, d);
        axpy(&mut out.grad_docs[k], g_logit, &emb.queries[qi]);
    }
}

/// Mean over exclusion edges of `max(γ_e − SymKL(s_i, s_j), 0)`; zero
/// without edges.
pub fn exclusion_loss(batch: &MiniBatch, emb: &Embeddings, cfg: &LossConfig) -> Result<LossOutput> {
    check_shapes(batch, emb)?;
    let mut out = LossOutput::zeros(emb);
    let tau = cfg.exclusion_tau();
    let edges: Vec<_> = batch.edges_of(Relation::Exclusion).collect();
    for e in &edges {
        let si = similarity_distribution(&emb.queries[e.src], &emb.docs, tau);
        let sj = similarity_distribution(&emb.queries[e.dst], &emb.docs, tau);
        let (skl, dpi, dpj) = sym_kl_with_grad(&si, &sj, cfg.eps);
        let hinge = cfg.gamma_e - skl;
        if hinge > 0.0 {
            out.value += hinge;
            softmax_backward(&si, &dpi, e.src, emb, tau, -1.0, &mut out);
            softmax_backward(&sj, &dpj, e.dst, emb, tau, -1.0, &mut out);
        }
    }
    out.terms = edges.len();
    if !edges.is_empty() {
        out.scale(1.0 / edges.len() as f64);
    }
    Ok(out)
}

/// Maps a cosine into `[eps, 1]` as `(cos + 1) / 2`; the flag says whether
/// the clamp is inactive.
pub fn subset_similarity(cos: f64, eps: f64) -> (f64, bool) {
    let raw = (cos + 1.0) / 2.0;
    if raw <= eps {
        (eps, false)
    } else if raw > 1.0 {
        (1.0, false)
    } else {
        (raw, true)
    }
}

/// Product t-norm implication penalty, summed over subset edges and
/// in-batch documents: `max(log sim(q1,d) − log sim(q2,d) + γ_s, 0)`.
pub fn subset_loss(batch: &MiniBatch, emb: &Embeddings, cfg: &LossConfig) -> Result<LossOutput> {
    check_shapes(batch, emb)?;
    let mut out = LossOutput::zeros(emb);
    let edges: Vec<_> = batch.edges_of(Relation::Subset).collect();
    for e in &edges {
        for (k, d) in emb.docs.iter().enumerate() {
            let (s1, live1) = subset_similarity(dot(&emb.queries[e.src], d), cfg.eps);
            let (s2, live2) = subset_similarity(dot(&emb.queries[e.dst], d), cfg.eps);
            let term = s1.ln() - s2.ln() + cfg.gamma_s;
            if term <= 0.0 {
                continue;
            }
            out.value += term;
            // d log((c+1)/2) / dc = 1 / (c+1) = 1 / (2 s)
            if live1 {
                let g = 0.5 / s1;
                axpy(&mut out.grad_queries[e.src], g, d);
                axpy(&mut out.grad_docs[k], g, &emb.queries[e.src]);
            }
            if live2 {
                let g = -0.5 / s2;
                axpy(&mut out.grad_queries[e.dst], g, d);
                axpy(&mut out.grad_docs[k], g, &emb.queries[e.dst]);
            }
        }
    }
    out.terms = edges.len() * emb.docs.len();
    if cfg.subset_mean && out.terms > 0 {
        out.scale(1.0 / out.terms as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLoss {
    pub supcon: LossOutput,
    pub exclusion: LossOutput,
    pub subset: LossOutput,
    pub total: f64,
    pub grad_queries: Vec<Vec<f64>>,
    pub grad_docs: Vec<Vec<f64>>,
}

/// `L + λ_E L_E + λ_S L_S`. Components with a zero weight contribute
/// nothing to the gradient, so the result reduces exactly to the
/// contrastive loss.
pub fn joint_loss(batch: &MiniBatch, emb: &Embeddings, cfg: &LossConfig) -> Result<JointLoss> {
    let supcon = supcon_loss(batch, emb, cfg.tau)?;
    let exclusion = exclusion_loss(batch, emb, cfg)?;
    let subset = subset_loss(batch, emb, cfg)?;
    for (name, c) in [("supcon", &supcon), ("exclusion", &exclusion), ("subset", &subset)] {
        let finite = c.value.is_finite()
            && c.grad_queries.iter().chain(&c.grad_docs).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(name.into()));
        }
    }
    let mut total = supcon.value;
    let mut grad_queries = supcon.grad_queries.clone();
    let mut grad_docs = supcon.grad_docs.clone();
    for (lambda, c) in [(cfg.lambda_e, &exclusion), (cfg.lambda_s, &subset)] {
        if lambda == 0.0 {
            continue;
        }
        total += lambda * c.value;
        for (g, cg) in grad_queries.iter_mut().zip(&c.grad_queries) {
            axpy(g, lambda, cg);
        }
        for (g, cg) in grad_docs.iter_mut().zip(&c.grad_docs) {
            axpy(g, lambda, cg);
        }
    }
    Ok(JointLoss {
        supcon,
        exclusion,
        subset,
        total,
        grad_queries,
        grad_docs,
    })
}
