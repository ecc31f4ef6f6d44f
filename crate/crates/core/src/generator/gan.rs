//! Adversarial sequence generator.
//!
//! A single-layer recurrent generator is first fitted by maximum likelihood
//! and then trained against a recurrent binary discriminator. During the
//! adversarial phase the generator emits relaxed one-hot vectors,
//! `softmax(τ · (logits + g))` with Gumbel noise `g`, and the inverse
//! temperature `τ` is ramped from 1 to β over the adversarial epochs. The
//! next generator input is the hard token `argmax(logits + g)`, so the
//! discriminator's gradient reaches the generator only through the relaxed
//! outputs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiscriminatorScore, GeneratorConfig, TemperatureSchedule, SCORE_EPS};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Adam, Grads, Gru, GruVars, Mat, Tape, Var};
use crate::seed::{derive_seed, rng_from_seed};
use crate::variant::{TokenCodec, UniqueVariantLog, Variant, EOS, PAD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GeneratorNet {
    pub emb: Mat,
    pub start: Mat,
    pub gru: Gru,
    pub out_w: Mat,
    pub out_b: Mat,
}

pub(crate) struct GenVars {
    emb: Var,
    start: Var,
    gru: GruVars,
    out_w: Var,
    out_b: Var,
}

impl GenVars {
    fn all(&self) -> [Var; 8] {
        [
            self.emb,
            self.start,
            self.gru.w_input,
            self.gru.w_hidden,
            self.gru.b_input,
            self.gru.b_hidden,
            self.out_w,
            self.out_b,
        ]
    }
}

impl GeneratorNet {
    fn new(vocab: usize, emb_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        GeneratorNet {
            emb: Mat::uniform(vocab, emb_dim, 0.1, rng),
            start: Mat::uniform(emb_dim, 1, 0.1, rng),
            gru: Gru::new(emb_dim, hidden, rng),
            out_w: Mat::uniform(vocab, hidden, 1.0 / (hidden as f64).sqrt(), rng),
            out_b: Mat::zeros(vocab, 1),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Mat> {
        let [a, b, c, d] = self.gru.params_mut();
        vec![
            &mut self.emb,
            &mut self.start,
            a,
            b,
            c,
            d,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    fn shapes(&self) -> Vec<usize> {
        let [a, b, c, d] = self.gru.params();
        [&self.emb, &self.start, a, b, c, d, &self.out_w, &self.out_b]
            .iter()
            .map(|m| m.data.len())
            .collect()
    }

    fn register(&self, tape: &mut Tape) -> GenVars {
        GenVars {
            emb: tape.matrix(&self.emb),
            start: tape.matrix(&self.start),
            gru: self.gru.register(tape),
            out_w: tape.matrix(&self.out_w),
            out_b: tape.matrix(&self.out_b),
        }
    }

    fn logits_plain(&self, h: &[f64]) -> Vec<f64> {
        let mut l = self.out_w.matvec(h);
        l.iter_mut()
            .zip(&self.out_b.data)
            .for_each(|(x, b)| *x += b);
        l
    }

    /// Ancestral sampling of one fixed-width token sequence.
    pub(crate) fn sample(&self, width: usize, rng: &mut impl Rng) -> Vec<u32> {
        let mut out = Vec::with_capacity(width);
        let mut h = vec![0.0; self.gru.hidden_dim];
        let mut x = self.start.data.clone();
        while out.len() < width {
            h = self.gru.step(&x, &h);
            let p = crate::nn::tape::softmax_scaled(&self.logits_plain(&h), 1.0);
            let tok = categorical(&p, rng.gen::<f64>()) as u32;
            out.push(tok);
            if tok == EOS {
                break;
            }
            x = self.emb.row(tok as usize).to_vec();
        }
        out.resize(width, PAD);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct DiscriminatorNet {
    pub emb: Mat,
    pub gru: Gru,
    pub out_w: Mat,
    pub out_b: Mat,
}

pub(crate) struct DiscVars {
    emb: Var,
    gru: GruVars,
    out_w: Var,
    out_b: Var,
}

impl DiscVars {
    fn all(&self) -> [Var; 7] {
        [
            self.emb,
            self.gru.w_input,
            self.gru.w_hidden,
            self.gru.b_input,
            self.gru.b_hidden,
            self.out_w,
            self.out_b,
        ]
    }
}

/// One position of a discriminator input sequence.
#[derive(Clone, Copy)]
pub(crate) enum DiscInput {
    Token(u32),
    Soft(Var),
}

impl DiscriminatorNet {
    fn new(vocab: usize, emb_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        DiscriminatorNet {
            emb: Mat::uniform(vocab, emb_dim, 0.1, rng),
            gru: Gru::new(emb_dim, hidden, rng),
            out_w: Mat::uniform(1, hidden, 1.0 / (hidden as f64).sqrt(), rng),
            out_b: Mat::zeros(1, 1),
        }
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Mat> {
        let [a, b, c, d] = self.gru.params_mut();
        vec![&mut self.emb, a, b, c, d, &mut self.out_w, &mut self.out_b]
    }

    fn shapes(&self) -> Vec<usize> {
        let [a, b, c, d] = self.gru.params();
        [&self.emb, a, b, c, d, &self.out_w, &self.out_b]
            .iter()
            .map(|m| m.data.len())
            .collect()
    }

    fn register(&self, tape: &mut Tape) -> DiscVars {
        DiscVars {
            emb: tape.matrix(&self.emb),
            gru: self.gru.register(tape),
            out_w: tape.matrix(&self.out_w),
            out_b: tape.matrix(&self.out_b),
        }
    }

    /// Probability that the input is real, on the tape.
    fn forward_tape(&self, tape: &mut Tape, vars: &DiscVars, inputs: &[DiscInput]) -> Var {
        let mut h = tape.vector(vec![0.0; self.gru.hidden_dim]);
        for input in inputs {
            let x = match *input {
                DiscInput::Token(t) => tape.row(vars.emb, t as usize),
                DiscInput::Soft(v) => tape.mat_t_vec(vars.emb, v),
            };
            h = self.gru.step_tape(tape, &vars.gru, x, h);
        }
        let logit = tape.matvec(vars.out_w, h);
        let logit = tape.add(logit, vars.out_b);
        tape.sigmoid(logit)
    }

    pub(crate) fn prob(&self, tokens: &[u32]) -> f64 {
        let mut h = vec![0.0; self.gru.hidden_dim];
        for &t in tokens {
            h = self.gru.step(self.emb.row(t as usize), &h);
        }
        let logit = self.out_w.matvec(&h)[0] + self.out_b.data[0];
        1.0 / (1.0 + (-logit).exp())
    }

    #[cfg(test)]
    fn prob_soft(&self, inputs: &[Vec<f64>]) -> f64 {
        let mut h = vec![0.0; self.gru.hidden_dim];
        for x in inputs {
            h = self.gru.step(&self.emb.mat_t_vec(x), &h);
        }
        let logit = self.out_w.matvec(&h)[0] + self.out_b.data[0];
        1.0 / (1.0 + (-logit).exp())
    }
}

fn categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` beyond the cumulative sum: last token with mass.
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

fn gumbel(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
    -(-u.ln()).ln()
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Mean per-sequence negative log-likelihood under teacher forcing. Positions
/// after EOS are masked.
pub(crate) fn mle_loss(
    net: &GeneratorNet,
    tape: &mut Tape,
    vars: &GenVars,
    batch: &[&[u32]],
) -> Var {
    let mut terms = Vec::new();
    for seq in batch {
        let mut h = tape.vector(vec![0.0; net.gru.hidden_dim]);
        let mut x = vars.start;
        for &tok in seq.iter() {
            h = net.gru.step_tape(tape, &vars.gru, x, h);
            let logits = tape.matvec(vars.out_w, h);
            let logits = tape.add(logits, vars.out_b);
            terms.push(tape.neg_log_softmax(logits, tok as usize));
            if tok == EOS {
                break;
            }
            x = tape.row(vars.emb, tok as usize);
        }
    }
    let total = tape.sum(terms);
    tape.scale(total, 1.0 / batch.len() as f64)
}

/// A relaxed generator rollout recorded on the tape.
pub(crate) struct Rollout {
    pub inputs: Vec<DiscInput>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub tokens: Vec<u32>,
}

/// Generates one relaxed sequence. `noise[t]` is the Gumbel noise for step
/// `t`; `forced` pins the hard tokens (used by gradient checks so the
/// discrete path does not move under perturbation).
pub(crate) fn rollout(
    net: &GeneratorNet,
    tape: &mut Tape,
    vars: &GenVars,
    noise: &[Vec<f64>],
    inv_temp: f64,
    forced: Option<&[u32]>,
    pad: Var,
) -> Rollout {
    let width = noise.len();
    let mut inputs = Vec::with_capacity(width);
    let mut tokens = Vec::with_capacity(width);
    let mut h = tape.vector(vec![0.0; net.gru.hidden_dim]);
    let mut x = vars.start;
    for (t, g) in noise.iter().enumerate() {
        h = net.gru.step_tape(tape, &vars.gru, x, h);
        let logits = tape.matvec(vars.out_w, h);
        let logits = tape.add(logits, vars.out_b);
        let perturbed: Vec<f64> = tape
            .value(logits)
            .iter()
            .zip(g)
            .map(|(l, n)| l + n)
            .collect();
        let tok = match forced {
            Some(f) => f[t],
            None => argmax(&perturbed) as u32,
        };
        let gv = tape.vector(g.clone());
        let noisy = tape.add(logits, gv);
        inputs.push(DiscInput::Soft(tape.softmax(noisy, inv_temp)));
        tokens.push(tok);
        if tok == EOS {
            break;
        }
        x = tape.row(vars.emb, tok as usize);
    }
    while inputs.len() < width {
        inputs.push(DiscInput::Soft(pad));
        tokens.push(PAD);
    }
    Rollout { inputs, tokens }
}

fn pad_one_hot(vocab: usize) -> Vec<f64> {
    let mut v = vec![0.0; vocab];
    v[PAD as usize] = 1.0;
    v
}

/// Non-saturating generator loss `-mean ln D(fake)`.
pub(crate) fn generator_adv_loss(
    gen: &GeneratorNet,
    disc: &DiscriminatorNet,
    tape: &mut Tape,
    gvars: &GenVars,
    dvars: &DiscVars,
    noise: &[Vec<Vec<f64>>],
    inv_temp: f64,
    forced: Option<&[Vec<u32>]>,
) -> (Var, Vec<Rollout>) {
    let pad = tape.vector(pad_one_hot(gen.emb.rows));
    let mut terms = Vec::with_capacity(noise.len());
    let mut rollouts = Vec::with_capacity(noise.len());
    for (i, n) in noise.iter().enumerate() {
        let r = rollout(
            gen,
            tape,
            gvars,
            n,
            inv_temp,
            forced.map(|f| f[i].as_slice()),
            pad,
        );
        let p = disc.forward_tape(tape, dvars, &r.inputs);
        terms.push(tape.ln_clamped(p, SCORE_EPS, 1.0 - SCORE_EPS));
        rollouts.push(r);
    }
    let total = tape.sum(terms);
    (tape.scale(total, -1.0 / noise.len() as f64), rollouts)
}

/// Binary cross-entropy `-mean ln D(real) - mean ln(1 - D(fake))`.
pub(crate) fn discriminator_loss(
    disc: &DiscriminatorNet,
    tape: &mut Tape,
    dvars: &DiscVars,
    real: &[&[u32]],
    fake: &[Vec<Vec<f64>>],
) -> Var {
    let mut terms = Vec::new();
    for seq in real {
        let inputs: Vec<DiscInput> = seq.iter().map(|&t| DiscInput::Token(t)).collect();
        let p = disc.forward_tape(tape, dvars, &inputs);
        let l = tape.ln_clamped(p, SCORE_EPS, 1.0 - SCORE_EPS);
        terms.push(tape.scale(l, -1.0 / real.len() as f64));
    }
    for seq in fake {
        let inputs: Vec<DiscInput> = seq
            .iter()
            .map(|x| DiscInput::Soft(tape.vector(x.clone())))
            .collect();
        let p = disc.forward_tape(tape, dvars, &inputs);
        let q = tape.one_minus(p);
        let l = tape.ln_clamped(q, SCORE_EPS, 1.0 - SCORE_EPS);
        terms.push(tape.scale(l, -1.0 / fake.len() as f64));
    }
    tape.sum(terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub generator_loss: f64,
    pub discriminator_loss: Option<f64>,
    pub inverse_temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub(crate) codec: TokenCodec,
    pub(crate) config: GeneratorConfig,
    pub(crate) generator: GeneratorNet,
    pub(crate) discriminator: DiscriminatorNet,
    pub(crate) training_log: Vec<EpochRecord>,
}

fn collect_grads(grads: &Grads, vars: &[Var]) -> Vec<Vec<f64>> {
    vars.iter().map(|&v| grads.wrt(v).to_vec()).collect()
}

/// Inverse temperature for adversarial epoch `epoch` of `total`.
pub fn inverse_temperature(
    schedule: TemperatureSchedule,
    beta: f64,
    epoch: usize,
    total: usize,
) -> f64 {
    if total <= 1 {
        return beta;
    }
    let frac = epoch as f64 / (total - 1) as f64;
    match schedule {
        TemperatureSchedule::Exponential => beta.powf(frac),
        TemperatureSchedule::Linear => 1.0 + (beta - 1.0) * frac,
        TemperatureSchedule::Constant => beta,
    }
}

struct Trainer<'a> {
    model: GanModel,
    data: &'a [Vec<u32>],
    gen_opt: Adam,
    disc_opt: Adam,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    fn batch(&mut self) -> Vec<&'a [u32]> {
        let n = self.model.config.batch_size;
        let data = self.data;
        (0..n)
            .map(|_| data[self.rng.gen_range(0..data.len())].as_slice())
            .collect()
    }

    fn steps_per_epoch(&self) -> usize {
        self.data
            .len()
            .div_ceil(self.model.config.batch_size)
            .max(1)
    }

    fn pretrain_step(&mut self) -> f64 {
        let batch = self.batch();
        let gen = &mut self.model.generator;
        let mut tape = Tape::new();
        let vars = gen.register(&mut tape);
        let loss = mle_loss(gen, &mut tape, &vars, &batch);
        let grads = tape.backward(loss);
        let mut g = collect_grads(&grads, &vars.all());
        clip_global_norm(&mut g, self.model.config.clip_norm);
        self.gen_opt.update(&mut gen.params_mut(), &g);
        tape.scalar(loss)
    }

    fn noise(&mut self) -> Vec<Vec<Vec<f64>>> {
        let width = self.model.codec.width();
        let vocab = self.model.codec.vocab_size();
        (0..self.model.config.batch_size)
            .map(|_| {
                (0..width)
                    .map(|_| (0..vocab).map(|_| gumbel(&mut self.rng)).collect())
                    .collect()
            })
            .collect()
    }

    /// One generator update followed by one discriminator update.
    fn adversarial_step(&mut self, inv_temp: f64) -> (f64, f64) {
        let noise = self.noise();
        let (g_loss, fake) = {
            let m = &self.model;
            let mut tape = Tape::new();
            let gvars = m.generator.register(&mut tape);
            let dvars = m.discriminator.register(&mut tape);
            let (loss, rollouts) = generator_adv_loss(
                &m.generator,
                &m.discriminator,
                &mut tape,
                &gvars,
                &dvars,
                &noise,
                inv_temp,
                None,
            );
            let grads = tape.backward(loss);
            let mut g = collect_grads(&grads, &gvars.all());
            clip_global_norm(&mut g, m.config.clip_norm);
            let fake: Vec<Vec<Vec<f64>>> = rollouts
                .iter()
                .map(|r| {
                    r.inputs
                        .iter()
                        .map(|i| match *i {
                            DiscInput::Soft(v) => tape.value(v).to_vec(),
                            DiscInput::Token(_) => unreachable!("rollouts are soft"),
                        })
                        .collect()
                })
                .collect();
            let l = tape.scalar(loss);
            self.gen_opt
                .update(&mut self.model.generator.params_mut(), &g);
            (l, fake)
        };
        let real = self.batch();
        let d_loss = self.discriminator_step(&real, &fake);
        (g_loss, d_loss)
    }

    fn discriminator_step(&mut self, real: &[&[u32]], fake: &[Vec<Vec<f64>>]) -> f64 {
        let disc = &mut self.model.discriminator;
        let mut tape = Tape::new();
        let dvars = disc.register(&mut tape);
        let loss = discriminator_loss(disc, &mut tape, &dvars, real, fake);
        let grads = tape.backward(loss);
        let mut g = collect_grads(&grads, &dvars.all());
        clip_global_norm(&mut g, self.model.config.clip_norm);
        self.disc_opt.update(&mut disc.params_mut(), &g);
        tape.scalar(loss)
    }
}

fn check_finite(loss: f64, epoch: usize, phase: &'static str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { epoch, phase })
    }
}

impl GanModel {
    fn init(codec: TokenCodec, config: GeneratorConfig) -> Self {
        let mut rng = rng_from_seed(derive_seed(config.seed, "gan/init", 0));
        let vocab = codec.vocab_size();
        let generator = GeneratorNet::new(vocab, config.embedding_dim, config.hidden_dim, &mut rng);
        let discriminator =
            DiscriminatorNet::new(vocab, config.embedding_dim, config.hidden_dim, &mut rng);
        GanModel {
            codec,
            config,
            generator,
            discriminator,
            training_log: Vec::new(),
        }
    }

    pub fn train(log: &UniqueVariantLog, config: &GeneratorConfig) -> Result<Self> {
        config.validate()?;
        if log.len() < 2 {
            return Err(Error::Generator(format!(
                "training log needs at least 2 variants, got {}",
                log.len()
            )));
        }
        Self::train_unchecked(log, config)
    }

    /// Training without the log-size precondition; single-variant logs are
    /// useful for sanity checks.
    pub(crate) fn train_unchecked(
        log: &UniqueVariantLog,
        config: &GeneratorConfig,
    ) -> Result<Self> {
        let codec = TokenCodec::from_log(log)?;
        if codec.max_len() > super::MAX_TRAIN_LEN {
            return Err(Error::Generator(format!(
                "variants of length {} exceed the supported {}",
                codec.max_len(),
                super::MAX_TRAIN_LEN
            )));
        }
        let data: Vec<Vec<u32>> = log.iter().map(|v| codec.encode(v)).collect::<Result<_>>()?;
        let model = GanModel::init(codec, config.clone());
        let gen_opt = Adam::new(config.learning_rate, &model.generator.shapes());
        let disc_opt = Adam::new(
            config.adversarial_learning_rate,
            &model.discriminator.shapes(),
        );
        let mut trainer = Trainer {
            model,
            data: &data,
            gen_opt,
            disc_opt,
            rng: rng_from_seed(derive_seed(config.seed, "gan/train", 0)),
        };
        let steps = trainer.steps_per_epoch();

        for epoch in 0..config.pretrain_epochs {
            let mut total = 0.0;
            for _ in 0..steps {
                total += trainer.pretrain_step();
            }
            let loss = total / steps as f64;
            check_finite(loss, epoch, "pretrain")?;
            trainer.model.training_log.push(EpochRecord {
                phase: Phase::Pretrain,
                epoch,
                generator_loss: loss,
                discriminator_loss: None,
                inverse_temperature: 1.0,
            });
        }
        trainer.gen_opt = Adam::new(
            config.adversarial_learning_rate,
            &trainer.model.generator.shapes(),
        );
        for epoch in 0..config.epochs {
            let tau = inverse_temperature(config.schedule, config.beta, epoch, config.epochs);
            let (mut gl, mut dl) = (0.0, 0.0);
            for _ in 0..steps {
                let (g, d) = trainer.adversarial_step(tau);
                gl += g;
                dl += d;
            }
            let (gl, dl) = (gl / steps as f64, dl / steps as f64);
            check_finite(gl, epoch, "adversarial generator")?;
            check_finite(dl, epoch, "adversarial discriminator")?;
            log::debug!("adversarial epoch {epoch}: tau={tau:.3} g={gl:.4} d={dl:.4}");
            trainer.model.training_log.push(EpochRecord {
                phase: Phase::Adversarial,
                epoch,
                generator_loss: gl,
                discriminator_loss: Some(dl),
                inverse_temperature: tau,
            });
        }
        Ok(trainer.model)
    }

    pub fn codec(&self) -> &TokenCodec {
        &self.codec
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn training_log(&self) -> &[EpochRecord] {
        &self.training_log
    }

    pub fn sample_tokens(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        self.generator.sample(self.codec.width(), rng)
    }

    pub fn discriminator_score(&self, v: &Variant) -> Result<DiscriminatorScore> {
        let tokens = self.codec.encode(v)?;
        Ok(DiscriminatorScore::new(self.discriminator.prob(&tokens)))
    }
}
