use super::agent::{ActorCritic, Architecture, Batch};
use super::RlConfig;
use crate::nn::{Bound, Dense, Graph, Gru, Matrix, ParamSet, Var};
use crate::rng::Stream;

/// Recurrent encoders producing the per-seller input `(pv, f_i)`.
///
/// The background GRU reads the whole canonical (T, m·4) history and yields
/// the public vector `pv`; the seller GRU reads each seller's own (T, 4)
/// history and yields `f_i`.
#[derive(Debug, Clone, Copy)]
struct Encoder {
    background: Gru,
    seller: Gru,
}

impl Encoder {
    fn new(params: &mut ParamSet, prefix: &str, sellers: usize, config: &RlConfig, rng: &mut Stream) -> Self {
        Self {
            background: Gru::new(params, &format!("{prefix}.background"), sellers * 4, config.background_hidden, rng),
            seller: Gru::new(params, &format!("{prefix}.seller"), 4, config.seller_hidden, rng),
        }
    }

    /// (B·m, Hb + Hs) features, rows ordered (batch item, sorted seller).
    fn features(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Var {
        let (b, m) = (batch.size, batch.sellers);
        let rounds: Vec<Var> = batch.rounds.iter().map(|r| g.leaf(r.clone())).collect();
        let per_seller: Vec<Var> = rounds.iter().map(|r| g.reshape(*r, b * m, 4)).collect();
        let h0 = g.leaf(Matrix::zeros((b, self.background.hidden)));
        let pv = self.background.run(g, p, &rounds, h0);
        let f0 = g.leaf(Matrix::zeros((b * m, self.seller.hidden)));
        let f = self.seller.run(g, p, &per_seller, f0);
        let pv = g.repeat_rows(pv, m);
        g.concat_cols(&[pv, f])
    }
}

/// IA(GRU): one sub-actor and one sub-critic shared by every seller.
///
/// The actor scores each seller from `(pv, f_i)` and takes a softmax over the
/// scores; the critic values each seller from `(pv, f_i, q_i)` and sums.
/// Both work on canonically sorted sellers, so their outputs follow the
/// sellers' records rather than their positions.
#[derive(Debug, Clone)]
pub struct IaGruNet {
    sellers: usize,
    window: usize,
    actor_encoder: Encoder,
    actor_head: [Dense; 2],
    critic_encoder: Encoder,
    critic_head: [Dense; 2],
}

impl Architecture for IaGruNet {
    const KIND: &'static str = "iagru";
    const CANONICAL: bool = true;

    fn build(sellers: usize, window: usize, config: &RlConfig, rng: &mut Stream) -> (Self, ParamSet, ParamSet) {
        let feat = config.background_hidden + config.seller_hidden;
        let mut actor = ParamSet::new();
        let actor_encoder = Encoder::new(&mut actor, "actor", sellers, config, rng);
        let actor_head = [
            Dense::new(&mut actor, "actor.sub.l1", feat, config.head_hidden, rng),
            Dense::new(&mut actor, "actor.sub.out", config.head_hidden, 1, rng),
        ];
        let mut critic = ParamSet::new();
        let critic_encoder = Encoder::new(&mut critic, "critic", sellers, config, rng);
        let critic_head = [
            Dense::new(&mut critic, "critic.sub.l1", feat + 1, config.head_hidden, rng),
            Dense::new(&mut critic, "critic.sub.out", config.head_hidden, 1, rng),
        ];
        let net = Self { sellers, window, actor_encoder, actor_head, critic_encoder, critic_head };
        (net, actor, critic)
    }

    fn sellers(&self) -> usize {
        self.sellers
    }

    fn window(&self) -> usize {
        self.window
    }

    fn actor(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Var {
        let x = self.actor_encoder.features(g, p, batch);
        let h = self.actor_head[0].apply(g, p, x);
        let h = g.relu(h);
        let scores = self.actor_head[1].apply(g, p, h);
        let scores = g.reshape(scores, batch.size, batch.sellers);
        g.softmax_rows(scores)
    }

    fn critic(&self, g: &mut Graph, p: &Bound, batch: &Batch, action: Var) -> Var {
        let x = self.critic_encoder.features(g, p, batch);
        let q = g.reshape(action, batch.size * batch.sellers, 1);
        let xq = g.concat_cols(&[x, q]);
        let h = self.critic_head[0].apply(g, p, xq);
        let h = g.relu(h);
        let per_seller = self.critic_head[1].apply(g, p, h);
        let per_seller = g.reshape(per_seller, batch.size, batch.sellers);
        g.sum_cols(per_seller)
    }
}

pub type IaGruAgent = ActorCritic<IaGruNet>;
