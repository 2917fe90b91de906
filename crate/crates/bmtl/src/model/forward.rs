//! Graph construction for the encoder and decoders on a tape.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{DecoderState, EncoderOutput, ModelConfig};
use crate::nn::{Id, ParameterStore, Scalar, Tape, Tensor};
use crate::rng::Rng;

/// On-tape encoder result.
pub struct EncRef {
    pub node: Id,
    pub mask: Vec<bool>,
}

/// Everything bmtl_forward built: the shared encoding and one logit node
/// per predicted position per decoder, in config order.
pub struct BmtlGraph {
    pub enc: EncRef,
    pub logits: Vec<Vec<Id>>,
}

struct GruLeaves {
    wz: Id,
    uz: Id,
    bz: Id,
    wr: Id,
    ur: Id,
    br: Id,
    wh: Id,
    uh: Id,
    bh: Id,
}

struct Dropout {
    rng: Rng,
    p: f64,
}

impl Dropout {
    /// Inverted dropout mask: zero with probability p, else 1/(1-p).
    fn mask(&mut self, len: usize) -> Tensor<f64> {
        let keep_scale = 1.0 / (1.0 - self.p);
        let data = (0..len)
            .map(|_| if self.rng.next_f64() < self.p { 0.0 } else { keep_scale })
            .collect();
        Tensor { rows: len, cols: 1, data }
    }
}

/// Builds model forwards on a borrowed tape, caching one parameter leaf
/// per store entry so gradients accumulate correctly across reuse.
pub struct Forward<'t, 'm, T: Scalar> {
    pub tape: &'t mut Tape<T>,
    config: &'m ModelConfig,
    store: &'m ParameterStore<T>,
    leaves: HashMap<usize, Id>,
    dropout: Option<Dropout>,
}

impl<'t, 'm, T: Scalar> Forward<'t, 'm, T> {
    pub fn with_tape(
        tape: &'t mut Tape<T>,
        config: &'m ModelConfig,
        store: &'m ParameterStore<T>,
        dropout_seed: Option<u64>,
    ) -> Self {
        let dropout = dropout_seed
            .filter(|_| config.dropout > 0.0)
            .map(|seed| Dropout { rng: Rng::stream(seed, "dropout", 0), p: config.dropout });
        Forward { tape, config, store, leaves: HashMap::new(), dropout }
    }

    fn leaf(&mut self, name: &str) -> Id {
        let idx = self
            .store
            .lookup(name)
            .unwrap_or_else(|| panic!("parameter {name:?} not allocated"));
        if let Some(&id) = self.leaves.get(&idx) {
            return id;
        }
        let id = self.tape.param(self.store.get(idx).value.clone(), idx);
        self.leaves.insert(idx, id);
        id
    }

    fn gru_leaves(&mut self, prefix: &str) -> GruLeaves {
        GruLeaves {
            wz: self.leaf(&format!("{prefix}.wz")),
            uz: self.leaf(&format!("{prefix}.uz")),
            bz: self.leaf(&format!("{prefix}.bz")),
            wr: self.leaf(&format!("{prefix}.wr")),
            ur: self.leaf(&format!("{prefix}.ur")),
            br: self.leaf(&format!("{prefix}.br")),
            wh: self.leaf(&format!("{prefix}.wh")),
            uh: self.leaf(&format!("{prefix}.uh")),
            bh: self.leaf(&format!("{prefix}.bh")),
        }
    }

    /// z = sigmoid(Wz x + Uz h + bz), r likewise,
    /// cand = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*cand.
    fn gru_step(&mut self, g: &GruLeaves, x: Id, h: Id) -> Id {
        let t = &mut *self.tape;
        let zx = t.matvec(g.wz, x);
        let zh = t.matvec(g.uz, h);
        let z0 = t.add(zx, zh);
        let z1 = t.add(z0, g.bz);
        let z = t.sigmoid(z1);

        let rx = t.matvec(g.wr, x);
        let rh = t.matvec(g.ur, h);
        let r0 = t.add(rx, rh);
        let r1 = t.add(r0, g.br);
        let r = t.sigmoid(r1);

        let gated = t.mul(r, h);
        let cx = t.matvec(g.wh, x);
        let ch = t.matvec(g.uh, gated);
        let c0 = t.add(cx, ch);
        let c1 = t.add(c0, g.bh);
        let cand = t.tanh(c1);

        let keep = t.one_minus(z);
        let a = t.mul(keep, h);
        let b = t.mul(z, cand);
        t.add(a, b)
    }

    fn apply_dropout(&mut self, v: Id) -> Id {
        match &mut self.dropout {
            Some(d) => {
                let len = self.tape.value(v).rows;
                let mask = d.mask(len);
                self.tape.mul_const(v, mask)
            }
            None => v,
        }
    }

    /// Stacked bidirectional encoder over an id sequence (markers included).
    pub fn encode(&mut self, source_ids: &[u32]) -> Result<EncRef> {
        for &id in source_ids {
            if id as usize >= self.config.src_vocab_size {
                return Err(Error::Numeric(format!(
                    "source id {id} out of range for vocabulary of {}",
                    self.config.src_vocab_size
                )));
            }
        }
        let steps = source_ids.len();
        let emb = self.leaf("src_emb");
        let mut inputs: Vec<Id> = source_ids
            .iter()
            .map(|&id| self.tape.gather(emb, id as usize))
            .collect();

        for layer in 0..self.config.enc_layers {
            let fw = self.gru_leaves(&format!("enc.l{layer}.fw"));
            let bw = self.gru_leaves(&format!("enc.l{layer}.bw"));
            let zero = Tensor::zeros(self.config.enc_hidden, 1);

            let mut h = self.tape.constant(zero.clone());
            let mut fw_states = Vec::with_capacity(steps);
            for &x in &inputs {
                h = self.gru_step(&fw, x, h);
                fw_states.push(h);
            }

            let mut h = self.tape.constant(zero);
            let mut bw_states = vec![h; steps];
            for (t, &x) in inputs.iter().enumerate().rev() {
                h = self.gru_step(&bw, x, h);
                bw_states[t] = h;
            }

            inputs = (0..steps)
                .map(|t| self.tape.concat(fw_states[t], bw_states[t]))
                .collect();
        }

        let rows: Vec<Id> = inputs.into_iter().map(|r| self.apply_dropout(r)).collect();
        let node = self.tape.stack_rows(rows);
        Ok(EncRef { node, mask: vec![true; steps] })
    }

    /// Detached encoder output lifted back onto this tape as a constant.
    pub fn lift(&mut self, enc: &EncoderOutput<T>) -> EncRef {
        EncRef { node: self.tape.constant(enc.matrix.clone()), mask: enc.mask.clone() }
    }

    pub fn init_state_node(&mut self, decoder: &str, enc: &EncRef) -> Id {
        let w = self.leaf(&format!("dec.{decoder}.init.w"));
        let b = self.leaf(&format!("dec.{decoder}.init.b"));
        let mean = self.tape.mean_rows(enc.node);
        let affine = self.tape.matvec(w, mean);
        let pre = self.tape.add(affine, b);
        self.tape.tanh(pre)
    }

    pub fn init_state_for(&mut self, decoder: &str, enc: &EncoderOutput<T>) -> Result<Id> {
        self.config.decoder(decoder)?;
        let lifted = self.lift(enc);
        Ok(self.init_state_node(decoder, &lifted))
    }

    fn attend(&mut self, run: &DecoderRun, query: Id) -> Result<(Id, Id)> {
        let q = {
            let wq = run.att_wq;
            self.tape.matvec(wq, query)
        };
        let scored = self.tape.add_row_broadcast(run.proj, q);
        let tanned = self.tape.tanh(scored);
        let scores = self.tape.matvec(tanned, run.att_v);
        let alpha = self.tape.masked_softmax(scores, run.mask.clone())?;
        let context = self.tape.mat_t_vec(run.enc, alpha);
        Ok((alpha, context))
    }

    /// Attention weights for a detached query/encoding pair.
    pub fn attention_for(
        &mut self,
        decoder: &str,
        query: &Tensor<T>,
        enc: &EncoderOutput<T>,
    ) -> Result<Id> {
        let lifted = self.lift(enc);
        let run = self.begin_decoder(decoder, &lifted)?;
        let q = self.tape.constant(query.clone());
        let (alpha, _) = self.attend(&run, q)?;
        Ok(alpha)
    }

    /// Per-decoder, per-sentence precomputation: leaf handles plus the
    /// attention projection of the encoding, shared by every step.
    pub fn begin_decoder(&mut self, decoder: &str, enc: &EncRef) -> Result<DecoderRun> {
        self.config.decoder(decoder)?;
        let p = format!("dec.{decoder}");
        let ue = self.leaf(&format!("{p}.att.ue"));
        let proj = self.tape.matmul_t(enc.node, ue);
        Ok(DecoderRun {
            name: decoder.to_string(),
            enc: enc.node,
            mask: enc.mask.clone(),
            proj,
            att_wq: self.leaf(&format!("{p}.att.wq")),
            att_v: self.leaf(&format!("{p}.att.v")),
            emb: self.leaf(&format!("{p}.emb")),
            ws: self.leaf(&format!("{p}.out.ws")),
            wc: self.leaf(&format!("{p}.out.wc")),
            we: self.leaf(&format!("{p}.out.we")),
            wo: self.leaf(&format!("{p}.out.wo")),
        })
    }

    /// One conditional-GRU step on the tape: recurrence, attention,
    /// second recurrence, deep-output logits.
    pub fn step(&mut self, run: &DecoderRun, s_prev: Id, emb_prev: Id) -> Result<StepNodes> {
        let gru1 = self.gru_leaves(&format!("dec.{}.gru1", run.name));
        let gru2 = self.gru_leaves(&format!("dec.{}.gru2", run.name));
        let s1 = self.gru_step(&gru1, emb_prev, s_prev);
        let (alpha, context) = self.attend(run, s1)?;
        let state = self.gru_step(&gru2, context, s1);

        let rs = self.tape.matvec(run.ws, state);
        let rc = self.tape.matvec(run.wc, context);
        let re = self.tape.matvec(run.we, emb_prev);
        let sum0 = self.tape.add(rs, rc);
        let sum1 = self.tape.add(sum0, re);
        let pre = self.tape.tanh(sum1);
        let pre = self.apply_dropout(pre);
        let logits = self.tape.matvec(run.wo, pre);
        if !self.tape.value(state).all_finite() || !self.tape.value(logits).all_finite() {
            return Err(Error::NonFinite(format!("decoder {} step", run.name)));
        }
        Ok(StepNodes { state, context, logits, alpha })
    }

    /// Detached single step for incremental decoding.
    pub fn step_detached(
        &mut self,
        decoder: &str,
        prev: &DecoderState<T>,
        prev_token: u32,
        enc: &EncoderOutput<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
        let spec = self.config.decoder(decoder)?;
        if prev_token as usize >= spec.vocab_size {
            return Err(Error::Numeric(format!(
                "target id {prev_token} out of range for vocabulary of {}",
                spec.vocab_size
            )));
        }
        let lifted = self.lift(enc);
        let run = self.begin_decoder(decoder, &lifted)?;
        let s_prev = self.tape.constant(prev.hidden.clone());
        let emb_prev = self.tape.gather(run.emb, prev_token as usize);
        let nodes = self.step(&run, s_prev, emb_prev)?;
        Ok((
            self.tape.value(nodes.state).clone(),
            self.tape.value(nodes.context).clone(),
            self.tape.value(nodes.logits).data.clone(),
        ))
    }

    /// Encode once, then teacher-force every decoder over its own target.
    pub fn bmtl(&mut self, source_ids: &[u32], targets: &[(String, Vec<u32>)]) -> Result<BmtlGraph> {
        for (name, _) in targets {
            self.config.decoder(name)?;
        }
        let enc = self.encode(source_ids)?;
        let mut logits = Vec::with_capacity(self.config.decoders.len());
        for spec in &self.config.decoders {
            let target = targets
                .iter()
                .find(|(name, _)| *name == spec.name)
                .map(|(_, t)| t)
                .ok_or_else(|| {
                    Error::Config(format!("missing target for decoder {}", spec.name))
                })?;
            if target.len() < 2 {
                return Err(Error::Config(format!(
                    "target for decoder {} must hold at least BOS and EOS",
                    spec.name
                )));
            }
            for &id in target {
                if id as usize >= spec.vocab_size {
                    return Err(Error::Numeric(format!(
                        "target id {id} out of range for vocabulary of {}",
                        spec.vocab_size
                    )));
                }
            }
            let run = self.begin_decoder(&spec.name, &enc)?;
            let mut state = self.init_state_node(&spec.name, &enc);
            let mut steps = Vec::with_capacity(target.len() - 1);
            for &prev in &target[..target.len() - 1] {
                let emb_prev = self.tape.gather(run.emb, prev as usize);
                let nodes = self.step(&run, state, emb_prev)?;
                state = nodes.state;
                steps.push(nodes.logits);
            }
            logits.push(steps);
        }
        Ok(BmtlGraph { enc, logits })
    }
}

/// Leaf handles and precomputations for one decoder over one sentence.
pub struct DecoderRun {
    name: String,
    enc: Id,
    mask: Vec<bool>,
    proj: Id,
    att_wq: Id,
    att_v: Id,
    pub emb: Id,
    ws: Id,
    wc: Id,
    we: Id,
    wo: Id,
}

pub struct StepNodes {
    pub state: Id,
    pub context: Id,
    pub logits: Id,
    pub alpha: Id,
}
