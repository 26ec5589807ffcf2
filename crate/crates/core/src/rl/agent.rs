use super::{permutation_transform, Permutation, ReplayBuffer, RlConfig, Transition};
use crate::error::{ArenaError, Result};
use crate::market::{Allocation, MarketState};
use crate::nn::{soft_update, AdamState, Bound, Checkpoint, Graph, Matrix, ParamSet, Var};
use crate::rng::{SeedTree, Stream};

/// A minibatch of states laid out for the networks.
///
/// `rounds[t]` is a (B, m·4) matrix holding round `t` of every state, with
/// sellers in canonical order when the architecture asks for it.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub sellers: usize,
    pub rounds: Vec<Matrix>,
    pub perms: Vec<Permutation>,
}

impl Batch {
    pub fn from_states<'a>(states: impl IntoIterator<Item = &'a MarketState>, canonical: bool) -> Result<Self> {
        let mut prepared: Vec<(MarketState, Permutation)> = Vec::new();
        for s in states {
            prepared.push(if canonical {
                permutation_transform(s)
            } else {
                (s.clone(), Permutation::identity(s.sellers()))
            });
        }
        let first = prepared.first().ok_or_else(|| ArenaError::Dimension("empty batch".into()))?;
        let (window, sellers) = (first.0.window(), first.0.sellers());
        if prepared.iter().any(|(s, _)| s.window() != window || s.sellers() != sellers) {
            return Err(ArenaError::Dimension("states in a batch must share (T, m)".into()));
        }
        let size = prepared.len();
        let width = sellers * 4;
        let rounds = (0..window)
            .map(|t| {
                let mut m = Matrix::zeros((size, width));
                for (b, (s, _)) in prepared.iter().enumerate() {
                    for i in 0..sellers {
                        let rec = s.record(t, i).as_array();
                        for (f, v) in rec.iter().enumerate() {
                            m[[b, i * 4 + f]] = *v;
                        }
                    }
                }
                m
            })
            .collect();
        Ok(Self { size, sellers, rounds, perms: prepared.into_iter().map(|(_, p)| p).collect() })
    }

    pub fn window(&self) -> usize {
        self.rounds.len()
    }

    /// (B, m) matrix of allocations rearranged into this batch's seller order.
    pub fn actions<'a>(&self, actions: impl IntoIterator<Item = &'a Allocation>) -> Matrix {
        let mut out = Matrix::zeros((self.size, self.sellers));
        for (b, (a, perm)) in actions.into_iter().zip(&self.perms).enumerate() {
            for (k, v) in perm.sort(a.shares()).into_iter().enumerate() {
                out[[b, k]] = v;
            }
        }
        out
    }
}

/// Network layout of an actor-critic allocator.
pub trait Architecture: Clone + Send + Sync {
    const KIND: &'static str;
    /// Whether states are put in canonical seller order before evaluation.
    const CANONICAL: bool;

    /// Builds the layout and freshly initialised actor and critic parameters.
    fn build(sellers: usize, window: usize, config: &RlConfig, rng: &mut Stream) -> (Self, ParamSet, ParamSet);

    fn sellers(&self) -> usize;
    fn window(&self) -> usize;

    /// (B, m) allocation in batch seller order.
    fn actor(&self, g: &mut Graph, p: &Bound, batch: &Batch) -> Var;

    /// (B, 1) action values; `action` is (B, m) in batch seller order.
    fn critic(&self, g: &mut Graph, p: &Bound, batch: &Batch, action: Var) -> Var;
}

/// Actor, critic, their slowly tracking targets, optimisers and replay.
#[derive(Debug, Clone)]
pub struct ActorCritic<A: Architecture> {
    pub net: A,
    pub actor: ParamSet,
    pub critic: ParamSet,
    pub actor_target: ParamSet,
    pub critic_target: ParamSet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub config: RlConfig,
    pub buffer: ReplayBuffer,
    pub replay_rng: Stream,
    pub noise_rng: Stream,
}

impl<A: Architecture> ActorCritic<A> {
    pub fn new(sellers: usize, window: usize, config: RlConfig, seeds: &SeedTree) -> Self {
        let mut init = seeds.stream("init", 0);
        let (net, actor, critic) = A::build(sellers, window, &config, &mut init);
        Self {
            net,
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: AdamState::new(&actor, config.actor_lr),
            critic_opt: AdamState::new(&critic, config.critic_lr),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            replay_rng: seeds.stream("replay", 0),
            noise_rng: seeds.stream("noise", 0),
            config,
        }
    }

    fn check_state(&self, state: &MarketState) -> Result<()> {
        if state.sellers() != self.net.sellers() || state.window() != self.net.window() {
            return Err(ArenaError::Dimension(format!(
                "{} was built for (T={}, m={}) but the state is (T={}, m={})",
                A::KIND,
                self.net.window(),
                self.net.sellers(),
                state.window(),
                state.sellers()
            )));
        }
        Ok(())
    }

    /// Deterministic policy output in original seller order.
    pub fn act(&self, state: &MarketState) -> Result<Allocation> {
        self.check_state(state)?;
        let batch = Batch::from_states([state], A::CANONICAL)?;
        let mut g = Graph::new();
        let p = self.actor.bind(&mut g);
        let q = self.net.actor(&mut g, &p, &batch);
        let sorted: Vec<f64> = g.value(q).row(0).to_vec();
        Allocation::new(batch.perms[0].unsort(&sorted))
    }

    pub fn q_value(&self, state: &MarketState, action: &Allocation) -> Result<f64> {
        self.check_state(state)?;
        if action.len() != state.sellers() {
            return Err(ArenaError::Dimension(format!(
                "action has {} shares for {} sellers",
                action.len(),
                state.sellers()
            )));
        }
        let batch = Batch::from_states([state], A::CANONICAL)?;
        let mut g = Graph::new();
        let p = self.critic.bind(&mut g);
        let a = g.leaf(batch.actions([action]));
        let q = self.net.critic(&mut g, &p, &batch, a);
        Ok(g.scalar(q))
    }

    /// `r + γ Q'(s', μ'(s'))` for every transition.
    pub fn targets(&self, batch: &[&Transition]) -> Result<Matrix> {
        let next = Batch::from_states(batch.iter().map(|t| t.next.as_ref()), A::CANONICAL)?;
        let mut g = Graph::new();
        let actor = self.actor_target.bind(&mut g);
        let critic = self.critic_target.bind(&mut g);
        let a = self.net.actor(&mut g, &actor, &next);
        let q = self.net.critic(&mut g, &critic, &next, a);
        let mut y = g.value(q).clone();
        for (row, t) in y.iter_mut().zip(batch) {
            *row = t.reward + self.config.gamma * *row;
        }
        Ok(y)
    }

    /// Mean squared TD error of the online critic against `targets`.
    pub fn critic_loss(&self, batch: &[&Transition], targets: &Matrix) -> Result<f64> {
        let states = Batch::from_states(batch.iter().map(|t| t.state.as_ref()), A::CANONICAL)?;
        let mut g = Graph::new();
        let p = self.critic.bind(&mut g);
        let loss = self.critic_loss_graph(&mut g, &p, &states, batch, targets);
        Ok(g.scalar(loss))
    }

    fn critic_loss_graph(
        &self,
        g: &mut Graph,
        p: &Bound,
        states: &Batch,
        batch: &[&Transition],
        targets: &Matrix,
    ) -> Var {
        let a = g.leaf(states.actions(batch.iter().map(|t| &t.action)));
        let q = self.net.critic(g, p, states, a);
        let y = g.leaf(targets.clone());
        let diff = g.sub(q, y);
        let sq = g.square(diff);
        g.mean(sq)
    }

    /// One Adam step on the critic; returns the loss before the step.
    pub fn critic_step(&mut self, batch: &[&Transition], targets: &Matrix) -> Result<f64> {
        let states = Batch::from_states(batch.iter().map(|t| t.state.as_ref()), A::CANONICAL)?;
        let mut g = Graph::new();
        let p = self.critic.bind(&mut g);
        let loss = self.critic_loss_graph(&mut g, &p, &states, batch, targets);
        g.backward(loss)?;
        let grads = p.grads(&g)?;
        self.critic_opt.update(&mut self.critic, &grads)?;
        Ok(g.scalar(loss))
    }

    /// Mean `Q(s, μ(s))` over the batch under the online networks.
    pub fn policy_value(&self, batch: &[&Transition]) -> Result<f64> {
        let states = Batch::from_states(batch.iter().map(|t| t.state.as_ref()), A::CANONICAL)?;
        let mut g = Graph::new();
        let actor = self.actor.bind(&mut g);
        let critic = self.critic.bind(&mut g);
        let a = self.net.actor(&mut g, &actor, &states);
        let q = self.net.critic(&mut g, &critic, &states, a);
        let v = g.mean(q);
        Ok(g.scalar(v))
    }

    /// One Adam ascent step of the actor on mean `Q(s, μ(s))`.
    pub fn actor_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let states = Batch::from_states(batch.iter().map(|t| t.state.as_ref()), A::CANONICAL)?;
        let mut g = Graph::new();
        let actor = self.actor.bind(&mut g);
        let critic = self.critic.bind(&mut g);
        let a = self.net.actor(&mut g, &actor, &states);
        let q = self.net.critic(&mut g, &critic, &states, a);
        let v = g.mean(q);
        let objective = g.scale(v, -1.0);
        g.backward(objective)?;
        let grads = actor.grads(&g)?;
        self.actor_opt.update(&mut self.actor, &grads)?;
        Ok(g.scalar(v))
    }

    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        soft_update(&mut self.critic_target, &self.critic, self.config.tau)
    }

    /// Critic regression, actor ascent and target tracking on one minibatch.
    pub fn train_on(&mut self, batch: &[&Transition]) -> Result<f64> {
        let targets = self.targets(batch)?;
        let loss = self.critic_step(batch, &targets)?;
        self.actor_step(batch)?;
        self.update_targets()?;
        Ok(loss)
    }

    /// Samples a minibatch from the replay buffer and trains on it.
    pub fn train_step(&mut self) -> Result<f64> {
        let owned: Vec<Transition> =
            self.buffer.sample(self.config.batch_size, &mut self.replay_rng)?.into_iter().cloned().collect();
        let batch: Vec<&Transition> = owned.iter().collect();
        self.train_on(&batch)
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn noise_draw(&mut self) -> &mut Stream {
        &mut self.noise_rng
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new()
            .with_meta("kind", A::KIND)
            .with_meta("sellers", self.net.sellers())
            .with_meta("window", self.net.window());
        ckpt.push("actor", self.actor.clone());
        ckpt.push("critic", self.critic.clone());
        ckpt.push("actor_target", self.actor_target.clone());
        ckpt.push("critic_target", self.critic_target.clone());
        ckpt
    }

    /// Replaces all four parameter sets with the checkpoint's after checking
    /// that kind and layouts match.
    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.meta("kind")? != A::KIND {
            return Err(ArenaError::Checkpoint(format!(
                "checkpoint holds a {} agent, expected {}",
                ckpt.meta("kind")?,
                A::KIND
            )));
        }
        let sets = [ckpt.set("actor")?, ckpt.set("critic")?, ckpt.set("actor_target")?, ckpt.set("critic_target")?];
        let mine = [&self.actor, &self.critic, &self.actor_target, &self.critic_target];
        for (theirs, ours) in sets.iter().zip(mine) {
            if !theirs.same_layout(ours) {
                return Err(ArenaError::Checkpoint("checkpoint layout does not match the configured network".into()));
            }
        }
        self.actor = sets[0].clone();
        self.critic = sets[1].clone();
        self.actor_target = sets[2].clone();
        self.critic_target = sets[3].clone();
        Ok(())
    }
}
