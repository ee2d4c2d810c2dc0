use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::QNetwork;
use crate::error::{Result, StemoError};
use crate::graphcore::SpatialAdjacency;
use crate::nodeembed::{EmbeddingTable, WalkConfig};
use crate::numdiff::{Checkpoint, Tensor};
use crate::predictor::{Predictor, PredictorConfig, Scaler};

/// Switches for the ablation variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Replace every temporal similarity slice by zeros.
    pub no_similarity: bool,
    /// Replace node embeddings by zeros in the Q-state.
    pub no_embedding: bool,
    /// Halt every node at this step instead of consulting the Q-network.
    pub fixed_policy: Option<usize>,
}

impl Ablation {
    pub fn label(&self) -> String {
        match (self.no_similarity, self.no_embedding, self.fixed_policy) {
            (false, false, None) => "stemo".into(),
            (true, false, None) => "no_similarity".into(),
            (false, true, None) => "no_embedding".into(),
            (false, false, Some(tau)) => format!("fixed_policy_{tau}"),
            (s, e, f) => format!(
                "stemo{}{}{}",
                if s { "_nosim" } else { "" },
                if e { "_noemb" } else { "" },
                f.map(|t| format!("_fixed{t}")).unwrap_or_default()
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub horizon: usize,
    pub hidden: usize,
    pub q_hidden: usize,
    pub kappa: f64,
    pub rho: f64,
    pub gamma: f64,
    pub walk: WalkConfig,
    pub dtw_window: Option<usize>,
    /// Appends `t / (T-1)` to the Q-state.
    pub time_feature: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            hidden: 12,
            q_hidden: 64,
            kappa: 0.005,
            rho: 0.5,
            gamma: 1.0,
            walk: WalkConfig::default(),
            dtw_window: None,
            time_feature: false,
        }
    }
}

impl ModelConfig {
    pub fn state_dim(&self) -> usize {
        self.hidden + self.walk.dim + usize::from(self.time_feature)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(StemoError::Config(format!("T must be at least 2, got {}", self.horizon)));
        }
        if self.hidden == 0 || self.q_hidden == 0 || self.walk.dim == 0 {
            return Err(StemoError::Config("layer widths must be positive".into()));
        }
        if !(self.kappa > 0.0 && self.rho >= 0.0 && self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(StemoError::Config(format!(
                "need kappa > 0, rho >= 0, gamma in [0, 1]; got {}, {}, {}",
                self.kappa, self.rho, self.gamma
            )));
        }
        if !(self.walk.p > 0.0 && self.walk.q > 0.0) {
            return Err(StemoError::Config("walk parameters p and q must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to roll out episodes: predictor, Q-network, the
/// persistent embedding table, the graph and the input scaler.
#[derive(Debug, Clone)]
pub struct StemoModel {
    pub config: ModelConfig,
    pub predictor: Predictor,
    pub qnet: QNetwork,
    pub embeddings: EmbeddingTable,
    pub adj: SpatialAdjacency,
    pub scaler: Scaler,
    pub ablation: Ablation,
}

impl StemoModel {
    pub fn new(config: ModelConfig, adj: SpatialAdjacency, scaler: Scaler, ablation: Ablation, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = adj.n();
        if scaler.mean.len() != n {
            return Err(StemoError::Input(format!(
                "scaler covers {} nodes, graph has {n}",
                scaler.mean.len()
            )));
        }
        if let Some(tau) = ablation.fixed_policy {
            crate::evalmetrics::validate_fixed_time(tau, config.horizon)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let predictor = Predictor::new(
            PredictorConfig {
                horizon: config.horizon,
                hidden: config.hidden,
            },
            &mut rng,
        );
        let qnet = QNetwork::new(config.state_dim(), config.q_hidden, &mut rng);
        let embeddings = EmbeddingTable::new(n, config.walk.dim, &mut rng);
        Ok(Self {
            config,
            predictor,
            qnet,
            embeddings,
            adj,
            scaler,
            ablation,
        })
    }

    pub fn n(&self) -> usize {
        self.adj.n()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.insert_store("", &self.predictor.store);
        ck.insert_store("", &self.qnet.store);
        let n = self.n();
        let dim = self.embeddings.dim;
        ck.insert("embed.vectors", rows_tensor(&self.embeddings.vectors, n, dim));
        ck.insert("embed.context", rows_tensor(&self.embeddings.context, n, dim));
        ck.insert("scaler.mean", rows_tensor(&[self.scaler.mean.clone()], 1, n));
        ck.insert("scaler.std", rows_tensor(&[self.scaler.std.clone()], 1, n));
        ck.insert("graph.a_s", self.adj.a_s.clone());
        ck.insert("graph.a_s_norm", self.adj.a_s_norm.clone());
        ck.insert("graph.eta", Tensor::scalar(self.adj.eta));
        ck
    }

    /// Rebuilds a model from a checkpoint; `config` and `ablation` must match
    /// the ones used for training.
    pub fn from_checkpoint(ck: &Checkpoint, config: ModelConfig, ablation: Ablation) -> Result<Self> {
        let a_s = ck.get("graph.a_s")?.clone();
        let adj = SpatialAdjacency {
            a_s,
            a_s_norm: ck.get("graph.a_s_norm")?.clone(),
            eta: ck.get("graph.eta")?.values()[0],
        };
        let n = adj.n();
        let mean = ck.get("scaler.mean")?.values().to_vec();
        let std = ck.get("scaler.std")?.values().to_vec();
        let mut model = Self::new(config, adj, Scaler { mean, std }, ablation, 0)?;
        ck.restore_store("", &mut model.predictor.store)?;
        ck.restore_store("", &mut model.qnet.store)?;
        let dim = config.walk.dim;
        model.embeddings.vectors = tensor_rows(ck.get("embed.vectors")?, n, dim)?;
        model.embeddings.context = tensor_rows(ck.get("embed.context")?, n, dim)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path, config: ModelConfig, ablation: Ablation) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, config, ablation)
    }
}

fn rows_tensor(rows: &[Vec<f64>], r: usize, c: usize) -> Tensor {
    Tensor::new(&[r, c], rows.iter().flatten().copied().collect()).expect("row lengths")
}

fn tensor_rows(t: &Tensor, r: usize, c: usize) -> Result<Vec<Vec<f64>>> {
    if t.shape() != [r, c] {
        return Err(StemoError::Checkpoint(format!(
            "embedding table has shape {:?}, expected [{r}, {c}]",
            t.shape()
        )));
    }
    Ok(t.values().chunks(c).map(<[f64]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcore::{build_spatial_adjacency, Graph};

    fn adj(n: usize) -> SpatialAdjacency {
        let g = Graph::from_coords((0..n).map(|i| i.to_string()).collect(), (0..n).map(|i| (i as f64, 0.0)).collect()).unwrap();
        build_spatial_adjacency(&g, g.default_eta()).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = StemoModel::new(ModelConfig::default(), adj(4), Scaler::identity(4), Ablation::default(), 7).unwrap();
        let ck = m.to_checkpoint();
        let back = StemoModel::from_checkpoint(&Checkpoint::from_text(&ck.to_text()).unwrap(), m.config, m.ablation).unwrap();
        assert_eq!(back.to_checkpoint(), ck);
    }

    #[test]
    fn fixed_policy_out_of_range_rejected() {
        let ab = Ablation {
            fixed_policy: Some(12),
            ..Ablation::default()
        };
        assert!(StemoModel::new(ModelConfig::default(), adj(3), Scaler::identity(3), ab, 0).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(Ablation::default().label(), "stemo");
        let f = Ablation {
            fixed_policy: Some(6),
            ..Ablation::default()
        };
        assert_eq!(f.label(), "fixed_policy_6");
    }
}
