//! The translation model: embeddings, a stacked BiGRU encoder shared by
//! every task, and one conditional-GRU decoder with MLP attention per
//! target granularity.
//!
//! Decoders own their attention, embeddings, and output stacks; only the
//! encoder and the source embedding are shared. That structural split is
//! what the parameter-count identities in [`count_parameters`] measure.

mod count;
mod forward;

pub use count::{count_parameters, ParameterCounts};
pub use forward::{BmtlGraph, Forward};

use crate::error::{Error, Result};
use crate::nn::{ParameterStore, Scalar, Tape, Tensor};
use crate::subword::BOS_ID;

/// One target-side decoder at a fixed subword granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderSpec {
    pub name: String,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Encoder hidden size per direction; encoder outputs are twice this.
    pub enc_hidden: usize,
    pub enc_layers: usize,
    pub dec_hidden: usize,
    pub dropout: f64,
    pub src_vocab_size: usize,
    pub decoders: Vec<DecoderSpec>,
}

impl ModelConfig {
    /// The reference hyperparameters: embeddings 512, two BiGRU layers of
    /// 512 per direction, decoders of 1024, dropout 0.1.
    pub fn baseline(src_vocab_size: usize, decoders: Vec<DecoderSpec>) -> Self {
        ModelConfig {
            embed_dim: 512,
            enc_hidden: 512,
            enc_layers: 2,
            dec_hidden: 1024,
            dropout: 0.1,
            src_vocab_size,
            decoders,
        }
    }

    /// Same encoder, single decoder; the single-task counterpart used for
    /// parameter accounting and baseline training.
    pub fn single_task(&self, decoder: &str) -> Result<ModelConfig> {
        let spec = self
            .decoders
            .iter()
            .find(|d| d.name == decoder)
            .ok_or_else(|| Error::UnknownDecoder(decoder.to_string()))?;
        Ok(ModelConfig { decoders: vec![spec.clone()], ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.decoders.is_empty() {
            return Err(Error::Config("at least one decoder is required".into()));
        }
        for (field, v) in [
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("enc_layers", self.enc_layers),
            ("dec_hidden", self.dec_hidden),
            ("src_vocab_size", self.src_vocab_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{field} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        let mut names: Vec<&str> = self.decoders.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.decoders.len() {
            return Err(Error::Config("decoder names must be unique".into()));
        }
        Ok(())
    }

    pub fn decoder(&self, name: &str) -> Result<&DecoderSpec> {
        self.decoders
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDecoder(name.to_string()))
    }

    /// Encoder output width (both directions concatenated).
    pub fn enc_out(&self) -> usize {
        2 * self.enc_hidden
    }

    /// Attention projection width; tied to the decoder size.
    pub fn att_dim(&self) -> usize {
        self.dec_hidden
    }
}

/// The shared encoded matrix consumed by every decoder: one row per source
/// position, with a validity mask.
#[derive(Debug, Clone)]
pub struct EncoderOutput<T> {
    pub matrix: Tensor<T>,
    pub mask: Vec<bool>,
}

/// Recurrent decoding state carried between steps.
#[derive(Debug, Clone)]
pub struct DecoderState<T> {
    pub hidden: Tensor<T>,
    pub context: Tensor<T>,
    pub last_token: u32,
}

const GATES: [&str; 3] = ["z", "r", "h"];

fn define_gru<T: Scalar>(
    store: &mut ParameterStore<T>,
    prefix: &str,
    input: usize,
    hidden: usize,
    seed: u64,
) {
    for gate in GATES {
        store.define_matrix(&format!("{prefix}.w{gate}"), hidden, input, seed);
        store.define_matrix(&format!("{prefix}.u{gate}"), hidden, hidden, seed);
        store.define_zeros(&format!("{prefix}.b{gate}"), hidden, 1);
    }
}

/// Allocates every trainable tensor for a config. Matrices are
/// Glorot-uniform seeded per parameter name; biases start at zero.
pub fn allocate<T: Scalar>(config: &ModelConfig, init_seed: u64) -> Result<ParameterStore<T>> {
    config.validate()?;
    let mut store = ParameterStore::new();
    store.define_matrix("src_emb", config.src_vocab_size, config.embed_dim, init_seed);
    for layer in 0..config.enc_layers {
        let input = if layer == 0 { config.embed_dim } else { config.enc_out() };
        for dir in ["fw", "bw"] {
            define_gru(
                &mut store,
                &format!("enc.l{layer}.{dir}"),
                input,
                config.enc_hidden,
                init_seed,
            );
        }
    }
    for dec in &config.decoders {
        let p = format!("dec.{}", dec.name);
        store.define_matrix(&format!("{p}.emb"), dec.vocab_size, config.embed_dim, init_seed);
        define_gru(&mut store, &format!("{p}.gru1"), config.embed_dim, config.dec_hidden, init_seed);
        define_gru(&mut store, &format!("{p}.gru2"), config.enc_out(), config.dec_hidden, init_seed);
        store.define_matrix(&format!("{p}.att.wq"), config.att_dim(), config.dec_hidden, init_seed);
        store.define_matrix(&format!("{p}.att.ue"), config.att_dim(), config.enc_out(), init_seed);
        store.define_matrix(&format!("{p}.att.v"), config.att_dim(), 1, init_seed);
        store.define_matrix(&format!("{p}.init.w"), config.dec_hidden, config.enc_out(), init_seed);
        store.define_zeros(&format!("{p}.init.b"), config.dec_hidden, 1);
        store.define_matrix(&format!("{p}.out.ws"), config.embed_dim, config.dec_hidden, init_seed);
        store.define_matrix(&format!("{p}.out.wc"), config.embed_dim, config.enc_out(), init_seed);
        store.define_matrix(&format!("{p}.out.we"), config.embed_dim, config.embed_dim, init_seed);
        store.define_matrix(&format!("{p}.out.wo"), dec.vocab_size, config.embed_dim, init_seed);
    }
    Ok(store)
}

/// Runs the shared encoder over one id sequence (markers included) and
/// detaches the result from the graph.
pub fn encode_source<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    source_ids: &[u32],
) -> Result<EncoderOutput<T>> {
    let mut tape = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, None);
    let enc = fwd.encode(source_ids)?;
    Ok(EncoderOutput { matrix: fwd.tape.value(enc.node).clone(), mask: enc.mask })
}

/// MLP attention distribution of one decoder's query state over the source
/// positions: softmax over vᵀ·tanh(W·query + U·eⱼ).
pub fn attention_weights<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    decoder: &str,
    query: &Tensor<T>,
    enc: &EncoderOutput<T>,
) -> Result<Vec<T>> {
    config.decoder(decoder)?;
    if !enc.mask.iter().any(|&m| m) {
        return Err(Error::Numeric("attention over an all-masked source".into()));
    }
    let mut tape = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, None);
    let alpha = fwd.attention_for(decoder, query, enc)?;
    Ok(fwd.tape.value(alpha).data.clone())
}

/// Fresh decoding state: hidden = tanh of an affine map of the mean
/// encoder output, empty context, BOS as the last token.
pub fn init_decoder_state<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    decoder: &str,
    enc: &EncoderOutput<T>,
) -> Result<DecoderState<T>> {
    let mut tape = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, None);
    let node = fwd.init_state_for(decoder, enc)?;
    Ok(DecoderState {
        hidden: fwd.tape.value(node).clone(),
        context: Tensor::zeros(config.enc_out(), 1),
        last_token: BOS_ID,
    })
}

/// One conditional-GRU step: recurrence over the previous token embedding,
/// attention, a second recurrence over the context, and deep-output logits.
pub fn conditional_gru_step<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    decoder: &str,
    prev: &DecoderState<T>,
    prev_token: u32,
    enc: &EncoderOutput<T>,
) -> Result<(DecoderState<T>, Vec<T>)> {
    let mut tape = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, None);
    let (state, context, logits) = fwd.step_detached(decoder, prev, prev_token, enc)?;
    Ok((
        DecoderState { hidden: state, context, last_token: prev_token },
        logits,
    ))
}

/// Teacher-forced forward of the full multitask model: encode once, then
/// run every decoder over its own target. Returns per-decoder logit
/// sequences (one vector of class scores per predicted position).
pub fn bmtl_forward<T: Scalar>(
    config: &ModelConfig,
    store: &ParameterStore<T>,
    source_ids: &[u32],
    targets: &[(String, Vec<u32>)],
    dropout_seed: Option<u64>,
) -> Result<Vec<Vec<Tensor<T>>>> {
    let mut tape = Tape::new();
    let mut fwd = Forward::with_tape(&mut tape, config, store, dropout_seed);
    let graph = fwd.bmtl(source_ids, targets)?;
    Ok(graph
        .logits
        .iter()
        .map(|steps| steps.iter().map(|&id| fwd.tape.value(id).clone()).collect())
        .collect())
}
