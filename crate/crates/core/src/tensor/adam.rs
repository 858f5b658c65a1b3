use serde::{Deserialize, Serialize};

use super::{Gradients, ParamId, Params, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightDecay {
    /// Decay term added to the gradient before the moment updates.
    Coupled,
    /// Parameters shrink by `lr * decay * p` separately from the Adam step.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecay,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
            decay_mode: WeightDecay::Coupled,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// Moment estimates per parameter. A parameter that receives no gradient in
/// a step is left untouched and its step count does not advance.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    moments: Vec<Option<Moments>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self, id: ParamId) -> u64 {
        self.moments
            .get(id)
            .and_then(|m| m.as_ref())
            .map_or(0, |m| m.t)
    }

    pub fn step<F: Real>(&mut self, params: &mut Params<F>, grads: &Gradients<F>, lr: f64) {
        if self.moments.len() < params.len() {
            self.moments.resize(params.len(), None);
        }
        let c = self.config;
        let mut ids: Vec<ParamId> = grads.touched().collect();
        ids.sort_unstable();
        for id in ids {
            let g = grads.get(id).expect("touched");
            let p = params.get_mut(id);
            let st = self.moments[id].get_or_insert_with(|| Moments {
                m: vec![0.0; p.len()],
                v: vec![0.0; p.len()],
                t: 0,
            });
            st.t += 1;
            let bc1 = 1.0 - c.beta1.powi(st.t as i32);
            let bc2 = 1.0 - c.beta2.powi(st.t as i32);
            for (i, (pv, gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let mut x = pv.as_f64();
                let mut gr = gv.as_f64();
                match c.decay_mode {
                    WeightDecay::Coupled => gr += c.weight_decay * x,
                    WeightDecay::Decoupled => x -= lr * c.weight_decay * x,
                }
                st.m[i] = c.beta1 * st.m[i] + (1.0 - c.beta1) * gr;
                st.v[i] = c.beta2 * st.v[i] + (1.0 - c.beta2) * gr * gr;
                let mhat = st.m[i] / bc1;
                let vhat = st.v[i] / bc2;
                x -= lr * mhat / (vhat.sqrt() + c.eps);
                *pv = F::from_f64(x);
            }
        }
    }
}
