use super::gvf::GvfBank;
use super::td::TdLearner;
use crate::error::{Error, Result};
use crate::features::{compute_features_into, feature_len, FilterBank, Neighborhood};

/// Hyperparameters of the main value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub step_size: f64,
    pub trace_decay: f64,
    pub discount: f64,
}

/// Where the agent's neighborhoods come from.
#[derive(Debug, Clone)]
pub enum NeighborhoodSource {
    /// Neighborhoods held fixed for the whole trial. An empty list is the
    /// purely linear architecture.
    Fixed(Vec<Neighborhood>),
    /// Neighborhoods tracking the top-k weights of a GVF bank.
    Adaptive(GvfBank),
}

impl NeighborhoodSource {
    pub fn neighborhoods(&self) -> &[Neighborhood] {
        match self {
            NeighborhoodSource::Fixed(nbs) => nbs,
            NeighborhoodSource::Adaptive(bank) => bank.neighborhoods(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    /// `w . x_t` before this step's update.
    pub prediction: f64,
    pub td_error: f64,
    /// Whether neighborhoods were recomputed during this step.
    pub refreshed: bool,
}

/// The strictly incremental prediction loop: one call per transition, no
/// stored history beyond the current observation and feature vector.
#[derive(Debug, Clone)]
pub struct Agent {
    main: TdLearner,
    source: NeighborhoodSource,
    filter: FilterBank,
    obs: Vec<f64>,
    features: Vec<f64>,
    next_features: Vec<f64>,
    /// Index `t` of the current observation; starts at 1.
    t: u64,
}

impl Agent {
    /// Builds the agent around the first observation `o_1`.
    pub fn new(
        params: AgentParams,
        source: NeighborhoodSource,
        filter: FilterBank,
        first_obs: Vec<f64>,
    ) -> Result<Self> {
        let d = first_obs.len();
        if let NeighborhoodSource::Adaptive(bank) = &source {
            if bank.num_inputs() != d {
                return Err(Error::invalid(format!(
                    "GVF bank expects {} inputs, observation has {d}",
                    bank.num_inputs()
                )));
            }
            if bank.params().discount != params.discount
                || bank.params().trace_decay != params.trace_decay
            {
                return Err(Error::invalid(
                    "GVF bank must share the main discount and trace decay",
                ));
            }
        }
        let m = source.neighborhoods().len();
        let dim = feature_len(d, m, &filter);
        let main = TdLearner::new(dim, params.step_size, params.trace_decay, params.discount)?;
        let mut features = vec![0.0; dim];
        compute_features_into(&first_obs, source.neighborhoods(), &filter, &mut features)?;
        Ok(Agent {
            main,
            source,
            filter,
            obs: first_obs,
            next_features: vec![0.0; dim],
            features,
            t: 1,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn main(&self) -> &TdLearner {
        &self.main
    }

    pub fn source(&self) -> &NeighborhoodSource {
        &self.source
    }

    pub fn bank(&self) -> Option<&GvfBank> {
        match &self.source {
            NeighborhoodSource::Adaptive(bank) => Some(bank),
            NeighborhoodSource::Fixed(_) => None,
        }
    }

    pub fn filter(&self) -> &FilterBank {
        &self.filter
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        self.source.neighborhoods()
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Current value estimate `w . x_t`.
    pub fn predict(&self) -> f64 {
        self.main.predict(&self.features)
    }

    /// Consumes `(r_{t+1}, o_{t+1})`.
    ///
    /// Order within a step: GVF update, periodic refresh when `t` is a
    /// multiple of the refresh period, features for `o_{t+1}` under the
    /// (possibly new) neighborhoods, then the main TD(λ) update.
    pub fn step(&mut self, reward: f64, next_obs: &[f64]) -> Result<StepResult> {
        if next_obs.len() != self.obs.len() {
            return Err(Error::invalid(format!(
                "observation length {} != {}",
                next_obs.len(),
                self.obs.len()
            )));
        }
        let mut refreshed = false;
        if let NeighborhoodSource::Adaptive(bank) = &mut self.source {
            bank.update(&self.obs, next_obs)?;
            if self.t % bank.params().refresh_period == 0 {
                bank.refresh_neighborhoods();
                refreshed = true;
            }
        }
        compute_features_into(
            next_obs,
            self.source.neighborhoods(),
            &self.filter,
            &mut self.next_features,
        )?;
        let (prediction, td_error) = self.main.step(&self.features, reward, &self.next_features)?;
        std::mem::swap(&mut self.features, &mut self.next_features);
        self.obs.copy_from_slice(next_obs);
        self.t += 1;
        Ok(StepResult {
            prediction,
            td_error,
            refreshed,
        })
    }

    pub(crate) fn restore(
        &mut self,
        t: u64,
        obs: Vec<f64>,
        main_weights: Vec<f64>,
        main_trace: Vec<f64>,
        bank_state: Option<(Vec<f64>, Vec<f64>, Vec<Neighborhood>)>,
    ) -> Result<()> {
        if obs.len() != self.obs.len() {
            return Err(Error::invalid("restored observation has the wrong length"));
        }
        self.main.restore(main_weights, main_trace)?;
        match (&mut self.source, bank_state) {
            (NeighborhoodSource::Adaptive(bank), Some((w, z, nbs))) => {
                bank.restore(w, z)?;
                bank.set_neighborhoods(nbs)?;
            }
            (NeighborhoodSource::Fixed(_), None) => {}
            _ => return Err(Error::invalid("checkpoint does not match agent architecture")),
        }
        self.t = t;
        self.obs = obs;
        compute_features_into(
            &self.obs,
            self.source.neighborhoods(),
            &self.filter,
            &mut self.features,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FilterKind;
    use crate::learner::GvfParams;
    use crate::rng::{stream_rng, Stream};

    fn params() -> AgentParams {
        AgentParams {
            step_size: 0.1,
            trace_decay: 0.8,
            discount: 0.9,
        }
    }

    fn majority(k: usize) -> FilterBank {
        FilterBank::new(FilterKind::Majority, 1, k, &mut stream_rng(0, Stream::Filters)).unwrap()
    }

    #[test]
    fn linear_agent_is_plain_td() {
        let obs = [vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]];
        let mut agent = Agent::new(
            params(),
            NeighborhoodSource::Fixed(vec![]),
            majority(2),
            obs[0].clone(),
        )
        .unwrap();
        let mut td = TdLearner::new(3, 0.1, 0.8, 0.9).unwrap();
        for t in 0..30 {
            let (cur, next) = (&obs[t % 3], &obs[(t + 1) % 3]);
            let r = (t % 2) as f64;
            let a = agent.step(r, next).unwrap();
            let (v, delta) = td.step(cur, r, next).unwrap();
            assert_eq!(a.prediction, v);
            assert_eq!(a.td_error, delta);
        }
        assert_eq!(agent.main().weights(), td.weights());
    }

    #[test]
    fn steps_are_stateful() {
        let o = vec![1.0, 0.0];
        let mut agent =
            Agent::new(params(), NeighborhoodSource::Fixed(vec![]), majority(1), o.clone())
                .unwrap();
        let first = agent.step(1.0, &o).unwrap();
        let second = agent.step(1.0, &o).unwrap();
        assert_ne!(first.td_error, second.td_error);
        assert_eq!(first.prediction, 0.0);
        assert!(second.prediction > 0.0);
    }

    #[test]
    fn refresh_happens_on_period_and_keeps_dimension() {
        let d = 6;
        let bank = GvfBank::new(
            d,
            vec![0, 3],
            GvfParams {
                step_size: 0.1,
                trace_decay: 0.8,
                discount: 0.9,
                k: 2,
                refresh_period: 3,
            },
        )
        .unwrap();
        let o = vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let mut agent =
            Agent::new(params(), NeighborhoodSource::Adaptive(bank), majority(2), o.clone())
                .unwrap();
        let dim = agent.features().len();
        let flags: Vec<bool> = (0..9).map(|_| agent.step(0.0, &o).unwrap().refreshed).collect();
        assert_eq!(
            flags,
            vec![false, false, true, false, false, true, false, false, true]
        );
        assert_eq!(agent.features().len(), dim);
        assert_eq!(dim, d + 2);
    }

    #[test]
    fn mismatched_bank_discount_is_rejected() {
        let bank = GvfBank::new(
            2,
            vec![0],
            GvfParams {
                step_size: 0.1,
                trace_decay: 0.8,
                discount: 0.5,
                k: 1,
                refresh_period: 1,
            },
        )
        .unwrap();
        assert!(Agent::new(
            params(),
            NeighborhoodSource::Adaptive(bank),
            majority(1),
            vec![0.0, 1.0]
        )
        .is_err());
    }
}
