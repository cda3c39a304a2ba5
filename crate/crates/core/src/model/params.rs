use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBundle, SubgraphKind};
use crate::numerics::Matrix;

/// Which documents take part in the contrastive term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastiveScope {
    #[default]
    All,
    Labeled,
}

impl std::str::FromStr for ContrastiveScope {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(Self::All),
            "labeled" => Ok(Self::Labeled),
            other => Err(format!("unknown contrastive scope `{other}` (expected all|labeled)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphSelection {
    pub morpheme: bool,
    pub pos: bool,
    pub entity: bool,
}

impl Default for SubgraphSelection {
    fn default() -> Self {
        Self {
            morpheme: true,
            pos: true,
            entity: true,
        }
    }
}

impl SubgraphSelection {
    pub fn contains(&self, kind: SubgraphKind) -> bool {
        match kind {
            SubgraphKind::Morpheme => self.morpheme,
            SubgraphKind::Pos => self.pos,
            SubgraphKind::Entity => self.entity,
        }
    }

    /// Enabled kinds in concatenation order.
    pub fn kinds(&self) -> Vec<SubgraphKind> {
        SubgraphKind::ALL.into_iter().filter(|&k| self.contains(k)).collect()
    }

    pub fn count(&self) -> usize {
        self.kinds().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub hidden: usize,
    pub window: usize,
    pub delta: f64,
    pub dropout: f64,
    pub lambda: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub eval_every: usize,
    pub entity_min_sim: f64,
    pub temperature: f64,
    pub seed: u64,
    pub subgraphs: SubgraphSelection,
    pub contrastive_scope: ContrastiveScope,
    /// Global gradient-norm clip; off unless set.
    pub grad_clip: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: 200,
            window: 5,
            delta: 2.7,
            dropout: 0.7,
            lambda: 0.7,
            lr: 5e-4,
            weight_decay: 1e-3,
            max_epochs: 1000,
            eval_every: 5,
            entity_min_sim: 0.5,
            temperature: 1.0,
            seed: 0,
            subgraphs: SubgraphSelection::default(),
            contrastive_scope: ContrastiveScope::All,
            grad_clip: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparam(msg));
        if !(-3.0..=3.0).contains(&self.delta) {
            return bad(format!("delta {} outside [-3, 3]", self.delta));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(self.temperature > 0.0) {
            return bad(format!("temperature {} must be positive", self.temperature));
        }
        if self.hidden == 0 || self.window == 0 || self.eval_every == 0 {
            return bad("hidden, window and eval_every must be positive".into());
        }
        if !(-1.0..=1.0).contains(&self.entity_min_sim) {
            return bad(format!("entity_min_sim {} outside [-1, 1]", self.entity_min_sim));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay non-negative".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip {c} must be positive"));
            }
        }
        if self.subgraphs.count() == 0 {
            return Err(Error::NoSubgraphs);
        }
        Ok(())
    }
}

/// Named weight matrices in a fixed order: for each enabled subgraph
/// `<kind>.w1`, `<kind>.w2`, then `document.w1`, `document.w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ModelParameters {
    pub fn from_parts(names: Vec<String>, values: Vec<Matrix>) -> Self {
        assert_eq!(names.len(), values.len());
        Self { names, values }
    }

    /// Glorot-uniform initialization, drawn in parameter order.
    pub fn init<R: Rng + ?Sized>(
        bundle: &GraphBundle,
        selection: SubgraphSelection,
        hidden: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut shapes = Vec::new();
        for kind in selection.kinds() {
            let d_in = bundle.subgraph(kind).feature_dim();
            shapes.push((format!("{}.w1", kind.as_str()), d_in, hidden));
            shapes.push((format!("{}.w2", kind.as_str()), hidden, hidden));
        }
        shapes.push(("document.w1".to_string(), selection.count() * hidden, hidden));
        shapes.push(("document.w2".to_string(), hidden, n_classes));

        let mut names = Vec::with_capacity(shapes.len());
        let mut values = Vec::with_capacity(shapes.len());
        for (name, rows, cols) in shapes {
            let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
            names.push(name);
            values.push(Matrix::from_vec(rows, cols, data).expect("shape matches data"));
        }
        Self { names, values }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.rows() * m.cols()).sum()
    }
}
