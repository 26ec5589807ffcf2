use super::agent::{ActorCritic, Architecture, Batch};
use super::RlConfig;
use crate::nn::{Bound, Dense, Graph, ParamSet, Var};
use crate::rng::Stream;

/// Fully connected actor and critic over the flattened (T, m, 4) state.
///
/// Actor: state → ReLU → ReLU → m logits → softmax.
/// Critic: state ⊕ action → ReLU → ReLU → scalar.
#[derive(Debug, Clone)]
pub struct DdpgNet {
    sellers: usize,
    window: usize,
    actor_layers: [Dense; 3],
    critic_layers: [Dense; 3],
}

impl DdpgNet {
    fn flat_state(g: &mut Graph, batch: &Batch) -> Var {
        let rounds: Vec<Var> = batch.rounds.iter().map(|r| g.leaf(r.clone())).collect();
        if rounds.len() == 1 {
            rounds[0]
        } else {
            g.concat_cols(&rounds)
        }
    }

    fn mlp(g: &mut Graph, p: &Bound, layers: &[Dense; 3], x: Var) -> Var {
        let h = layers[0].apply(g, p, x);
        let h = g.relu(h);
        let h = layers[1].apply(g, p, h);
        let h = g.relu(h);
        layers[2].apply(g, p, h)
    }
}

impl Architecture for DdpgNet {
    const KIND: &'static str = "ddpg";
    const CANONICAL: bool = false;

    fn build(sellers: usize, window: usize, config: &RlConfig, rng: &mut Stream) -> (Self, ParamSet, ParamSet) {
        let input = window * sellers * 4;
        let [h1, h2] = config.ddpg_hidden;
        let mut actor = ParamSet::new();
        let actor_layers = [
            Dense::new(&mut actor, "actor.l1", input, h1, rng),
            Dense::new(&mut actor, "actor.l2", h1, h2, rng),
            Dense::new(&mut actor, "actor.out", h2, sellers, rng),
        ];
        let mut critic = ParamSet::new();
        let critic_layers = [
            Dense::new(&mut critic, "critic.l1", input + sellers, h1, rng),
            Dense::new(&mut critic, "critic.l2", h1, h2, rng),
            Dense::new(&mut critic, "critic.out", h2, 1, rng),
        ];
        (Self { sellers, window, actor_layers, critic_layers }, actor, critic)
    }

    fn sellers(&self) -> usize {
        self.sellers
    }

    fn window(&self) -> usize {
        self.window
    }

    fn actor(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Var {
        let x = Self::flat_state(g, batch);
        let logits = Self::mlp(g, p, &self.actor_layers, x);
        g.softmax_rows(logits)
    }

    fn critic(&self, g: &mut Graph, p: &Bound, batch: &Batch, action: Var) -> Var {
        let x = Self::flat_state(g, batch);
        let xa = g.concat_cols(&[x, action]);
        Self::mlp(g, p, &self.critic_layers, xa)
    }
}

pub type DdpgAgent = ActorCritic<DdpgNet>;
