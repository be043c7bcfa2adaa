use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bt::{Executor, NodeKind, TreeDef};
use crate::dsl::{self, Diagnostic, ValidateOptions};
use crate::fusion::{default_weights, FusionPolicy, ModalityAccuracy, VoteRule, DEFAULT_THRESHOLD};
use crate::labsim::{
    ActionCatalog, CappingParams, ConditionSensors, FaultInjection, FtSynthParams, InsertionParams,
    SensorSurrogate, SimSetup, Task,
};

use super::HarnessError;

pub const CAPPING_TREE: &str = include_str!("../../assets/capping.bt");
pub const INSERTION_TREE: &str = include_str!("../../assets/insertion.bt");
pub const CAPPING_CONFIG: &str = include_str!("../../assets/capping.toml");
pub const INSERTION_CONFIG: &str = include_str!("../../assets/insertion.toml");

pub const DEFAULT_TRIALS: u64 = 1000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub alternate_classes: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub thread_engage_mm: Option<f64>,
    pub xy_mm: Option<f64>,
    pub yaw_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distributions {
    pub cross_thread_prob: Option<f64>,
    pub capping_offset_mm: Option<f64>,
    pub insertion_offset_xy_mm: Option<f64>,
    pub insertion_yaw_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub max_iterations: Option<u32>,
    pub required_turns: Option<[u32; 2]>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub distributions: Distributions,
}

/// Either `accuracy` (symmetric) or explicit `sensitivity`/`specificity`;
/// explicit values win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyConfig {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl AccuracyConfig {
    pub fn symmetric(accuracy: f64) -> Self {
        Self {
            accuracy: Some(accuracy),
            ..Default::default()
        }
    }

    fn resolve(&self, modality: &str) -> Result<ModalityAccuracy, HarnessError> {
        let sens = self.sensitivity.or(self.accuracy);
        let spec = self.specificity.or(self.accuracy);
        match (sens, spec) {
            (Some(a), Some(b)) => Ok(ModalityAccuracy::new(modality, a, b)?),
            _ => Err(HarnessError::Config(format!(
                "surrogate `{modality}` needs `accuracy` or both `sensitivity` and `specificity`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub modalities: Option<Vec<String>>,
    pub weights: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    /// Per-condition surrogates; fall back to the top-level `[surrogates]`.
    #[serde(default)]
    pub surrogates: BTreeMap<String, AccuracyConfig>,
}

/// A run configuration as written in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Tree file, relative to the configuration file. The built-in tree for
    /// the task is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub strict_eq1: bool,
    #[serde(default)]
    pub faults: FaultsConfig,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub fusion: BTreeMap<String, FusionConfig>,
    #[serde(default)]
    pub surrogates: BTreeMap<String, AccuracyConfig>,
    #[serde(default)]
    pub durations: BTreeMap<String, f64>,
    #[serde(default)]
    pub ft: FtSynthParams,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// The configuration shipped for `task`.
    pub fn shipped(task: Task) -> Self {
        let text = match task {
            Task::Capping => CAPPING_CONFIG,
            Task::Insertion => INSERTION_CONFIG,
        };
        Self::from_toml(text).expect("shipped configuration parses")
    }

    /// Fills surrogate, per-condition surrogate and duration entries missing
    /// from this configuration with the values shipped for its task.
    pub fn with_shipped_defaults(mut self) -> Self {
        let shipped = Self::shipped(self.task);
        for (k, v) in shipped.surrogates {
            self.surrogates.entry(k).or_insert(v);
        }
        for (k, v) in shipped.durations {
            self.durations.entry(k).or_insert(v);
        }
        for (cond, f) in shipped.fusion {
            let mine = self.fusion.entry(cond).or_default();
            for (m, acc) in f.surrogates {
                mine.surrogates.entry(m).or_insert(acc);
            }
        }
        self
    }

    /// Reads a configuration and the tree it names.
    pub fn load(path: &Path) -> Result<(Self, String), HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        let tree = match &cfg.tree {
            Some(rel) => {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                let p = base.join(rel);
                std::fs::read_to_string(&p)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?
            }
            None => shipped_tree(cfg.task).to_string(),
        };
        Ok((cfg, tree))
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_faults(mut self, enabled: bool, alternate_classes: bool) -> Self {
        self.faults = FaultsConfig {
            enabled,
            alternate_classes,
        };
        self
    }

    fn fault_injection(&self) -> FaultInjection {
        let d = &self.world.distributions;
        let base = FaultInjection::default();
        FaultInjection {
            enabled: self.faults.enabled,
            alternate_classes: self.faults.alternate_classes,
            capping_offset_mm: d.capping_offset_mm.unwrap_or(base.capping_offset_mm),
            insertion_offset_xy_mm: d
                .insertion_offset_xy_mm
                .unwrap_or(base.insertion_offset_xy_mm),
            insertion_yaw_deg: d.insertion_yaw_deg.unwrap_or(base.insertion_yaw_deg),
        }
    }

    fn capping_params(&self) -> CappingParams {
        let base = CappingParams::default();
        let w = &self.world;
        CappingParams {
            thread_engage_tol_mm: w
                .tolerances
                .thread_engage_mm
                .unwrap_or(base.thread_engage_tol_mm),
            required_turns: w.required_turns.unwrap_or(base.required_turns),
            max_iterations: w.max_iterations.unwrap_or(base.max_iterations),
            cross_thread_prob: w
                .distributions
                .cross_thread_prob
                .unwrap_or(base.cross_thread_prob),
        }
    }

    fn insertion_params(&self) -> InsertionParams {
        let base = InsertionParams::default();
        let t = &self.world.tolerances;
        InsertionParams {
            tol_xy_mm: t.xy_mm.unwrap_or(base.tol_xy_mm),
            tol_yaw_deg: t.yaw_deg.unwrap_or(base.tol_yaw_deg),
        }
    }

    fn accuracy_for(
        &self,
        condition: &str,
        modality: &str,
    ) -> Result<ModalityAccuracy, HarnessError> {
        self.fusion
            .get(condition)
            .and_then(|f| f.surrogates.get(modality))
            .or_else(|| self.surrogates.get(modality))
            .ok_or_else(|| {
                HarnessError::Config(format!(
                    "no surrogate for modality `{modality}` of condition `{condition}`"
                ))
            })?
            .resolve(modality)
    }
}

pub fn shipped_tree(task: Task) -> &'static str {
    match task {
        Task::Capping => CAPPING_TREE,
        Task::Insertion => INSERTION_TREE,
    }
}

/// A validated configuration bound to its tree, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    /// The tree with every fused condition carrying its effective policy.
    pub tree: TreeDef,
    pub executor: Executor,
    pub setup: SimSetup,
    pub trials: u64,
    pub seed: u64,
    /// Hex SHA-256 of the effective configuration and canonical tree.
    pub digest: String,
    pub warnings: Vec<Diagnostic>,
}

impl Prepared {
    pub fn shipped(task: Task) -> Result<Self, HarnessError> {
        prepare(RunConfig::shipped(task), shipped_tree(task))
    }

    /// Accuracy models of the modalities feeding `condition`, in policy order.
    pub fn accuracies(&self, condition: &str) -> Option<Vec<ModalityAccuracy>> {
        self.setup
            .sensors
            .get(condition)
            .map(|s| s.surrogates.iter().map(|s| s.accuracy.clone()).collect())
    }
}

fn effective_policy(
    cfg: &RunConfig,
    name: &str,
    inline: Option<&FusionPolicy>,
) -> Result<(FusionPolicy, Vec<ModalityAccuracy>), HarnessError> {
    let fc = cfg.fusion.get(name);
    let modalities: Vec<String> = match (fc.and_then(|f| f.modalities.clone()), inline) {
        (Some(m), Some(p)) if m != p.modalities() => {
            return Err(HarnessError::Config(format!(
                "fusion.{name}.modalities [{}] differ from the tree's [{}]",
                m.join(","),
                p.modalities().join(",")
            )))
        }
        (Some(m), _) => m,
        (None, Some(p)) => p.modalities().to_vec(),
        (None, None) => {
            return Err(HarnessError::Config(format!(
                "condition `{name}` is fused but neither the tree nor the configuration lists its modalities"
            )))
        }
    };
    let accs = modalities
        .iter()
        .map(|m| cfg.accuracy_for(name, m))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = match (fc.and_then(|f| f.weights.clone()), inline) {
        (Some(w), _) => w,
        (None, Some(p)) => p.weights().to_vec(),
        (None, None) => default_weights(&accs)?,
    };
    let lambda = fc
        .and_then(|f| f.lambda)
        .or(inline.map(FusionPolicy::threshold))
        .unwrap_or(DEFAULT_THRESHOLD);
    let policy = FusionPolicy::new(modalities, weights, lambda)
        .map_err(|e| HarnessError::Config(format!("fusion policy of `{name}`: {e}")))?;
    Ok((policy, accs))
}

fn for_each_node_mut(node: &mut crate::bt::Node, f: &mut impl FnMut(&mut crate::bt::Node)) {
    f(node);
    for c in &mut node.children {
        for_each_node_mut(c, f);
    }
}

/// Parses and validates `tree_text`, merges fusion policies from the
/// configuration, and checks that every action and condition is executable.
pub fn prepare(config: RunConfig, tree_text: &str) -> Result<Prepared, HarnessError> {
    let config = config.with_shipped_defaults();
    let mut tree = dsl::parse(tree_text).map_err(HarnessError::Dsl)?;
    let mut setup = SimSetup::new(config.task);

    let mut known: BTreeSet<String> = config.surrogates.keys().cloned().collect();
    for f in config.fusion.values() {
        known.extend(f.surrogates.keys().cloned());
    }
    let diags = dsl::validate(&tree, &ValidateOptions::default().with_modalities(known));
    if diags.iter().any(Diagnostic::is_error) {
        return Err(HarnessError::Dsl(diags));
    }

    let fused: BTreeSet<&str> = setup.fused_conditions().iter().copied().collect();
    let deterministic: BTreeSet<&str> = setup.deterministic_conditions().iter().copied().collect();
    let mut policies: BTreeMap<String, FusionPolicy> = BTreeMap::new();
    for spec in tree.conditions() {
        let name = spec.name.as_str();
        if deterministic.contains(name) {
            if spec.policy.is_some() || config.fusion.contains_key(name) {
                return Err(HarnessError::Config(format!(
                    "condition `{name}` is evaluated directly in the {} task and takes no fusion policy",
                    config.task
                )));
            }
        } else if fused.contains(name) {
            let (policy, accs) = effective_policy(&config, name, spec.policy.as_ref())?;
            let surrogates = accs.into_iter().map(SensorSurrogate::new).collect();
            setup.sensors.insert(
                name.to_string(),
                ConditionSensors::new(policy.clone(), surrogates)?,
            );
            policies.insert(name.to_string(), policy);
        } else {
            return Err(HarnessError::Config(format!(
                "condition `{name}` is not available in the {} task",
                config.task
            )));
        }
    }
    if let Some(extra) = config.fusion.keys().find(|k| !fused.contains(k.as_str())) {
        return Err(HarnessError::Config(format!(
            "fusion.{extra} does not name a fused condition of the {} task",
            config.task
        )));
    }
    // A skill body may hold conditions under several names; patch every copy.
    let mut patch = |n: &mut crate::bt::Node| {
        if let NodeKind::Condition(c) = &mut n.kind {
            if let Some(p) = policies.get(&c.name) {
                c.policy = Some(p.clone());
            }
        }
    };
    for_each_node_mut(&mut tree.root, &mut patch);
    for body in tree.skills.values_mut() {
        for_each_node_mut(body, &mut patch);
    }

    setup.catalog = ActionCatalog::from_map(config.durations.clone())?;
    setup.faults = config.fault_injection();
    setup.faults.validate()?;
    setup.capping = config.capping_params();
    setup.capping.validate()?;
    setup.insertion = config.insertion_params();
    setup.insertion.validate()?;
    setup.rule = VoteRule::from_strict_flag(config.strict_eq1);
    setup.ft = config.ft.clone();

    let executor = Executor::new(&tree).map_err(|e| HarnessError::Config(e.to_string()))?;
    for (_, leaf) in executor.leaves() {
        if let crate::bt::Leaf::Action(a) = leaf {
            if !setup.actions().contains(&a.name.as_str()) {
                return Err(HarnessError::Config(format!(
                    "action `{}` is not available in the {} task",
                    a.name, config.task
                )));
            }
            setup.catalog.duration_of(a)?;
        }
    }

    let trials = config.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let digest = digest(&config, &tree, trials, seed);
    Ok(Prepared {
        config,
        tree,
        executor,
        setup,
        trials,
        seed,
        digest,
        warnings: diags,
    })
}

fn digest(config: &RunConfig, tree: &TreeDef, trials: u64, seed: u64) -> String {
    let mut effective = config.clone();
    effective.tree = None;
    effective.trials = Some(trials);
    effective.seed = Some(seed);
    let value = serde_json::json!({
        "config": serde_json::to_value(&effective).expect("config serializes"),
        "tree": dsl::serialize(tree),
    });
    let mut h = Sha256::new();
    h.update(value.to_string().as_bytes());
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_prepare() {
        for task in [Task::Capping, Task::Insertion] {
            let p = Prepared::shipped(task).unwrap();
            assert!(p.warnings.is_empty(), "{:?}", p.warnings);
            assert_eq!(p.digest.len(), 64);
        }
        let p = Prepared::shipped(Task::Capping).unwrap();
        let fasten = &p.setup.sensors["fully_capped"];
        assert_eq!(fasten.surrogates[0].accuracy.specificity, 0.99);
        let mount = &p.setup.sensors["mount_aligned"];
        assert_eq!(mount.surrogates[2].accuracy.sensitivity, 0.82);
    }

    #[test]
    fn digest_tracks_inputs() {
        let a = prepare(RunConfig::shipped(Task::Capping), CAPPING_TREE).unwrap();
        let b = prepare(RunConfig::shipped(Task::Capping), CAPPING_TREE).unwrap();
        assert_eq!(a.digest, b.digest);
        let c = prepare(
            RunConfig::shipped(Task::Capping).with_seed(99),
            CAPPING_TREE,
        )
        .unwrap();
        assert_ne!(a.digest, c.digest);
    }

    #[test]
    fn config_errors() {
        let mut cfg = RunConfig::shipped(Task::Capping);
        cfg.fusion
            .insert("nonexistent".into(), FusionConfig::default());
        assert!(matches!(
            prepare(cfg, CAPPING_TREE),
            Err(HarnessError::Config(_))
        ));

        let mut cfg = RunConfig::shipped(Task::Capping);
        cfg.fusion.get_mut("fully_capped").unwrap().modalities =
            Some(vec!["ft".into(), "vision".into()]);
        assert!(matches!(
            prepare(cfg, CAPPING_TREE),
            Err(HarnessError::Config(_))
        ));

        let mut cfg = RunConfig::shipped(Task::Capping);
        cfg.durations.insert("move_home".into(), -1.0);
        assert!(prepare(cfg, CAPPING_TREE).is_err());

        let mut cfg = RunConfig::shipped(Task::Capping);
        cfg.durations.remove("move_home");
        let p = prepare(cfg, CAPPING_TREE).unwrap();
        assert_eq!(p.setup.catalog.get("move_home"), Some(16.0));

        let cfg = RunConfig::shipped(Task::Insertion);
        assert!(prepare(cfg, CAPPING_TREE).is_err());

        assert!(RunConfig::from_toml("task = \"capping\"\nbogus = 1\n").is_err());
        assert!(matches!(
            prepare(RunConfig::shipped(Task::Capping), "tree t\n\taction x\n"),
            Err(HarnessError::Dsl(_))
        ));
    }

    #[test]
    fn config_policy_and_defaults() {
        let mut cfg = RunConfig::shipped(Task::Insertion);
        cfg.fusion.insert(
            "rack_aligned".into(),
            FusionConfig {
                weights: Some(vec![0.2, 0.8]),
                ..Default::default()
            },
        );
        let p = prepare(cfg, INSERTION_TREE).unwrap();
        assert_eq!(
            p.setup.sensors["rack_aligned"].policy.weights(),
            &[0.2, 0.8]
        );

        // Modalities only in the configuration: weights default to balanced accuracy.
        let tree = INSERTION_TREE.replace(
            " modalities=[vision,depth] weights=[0.5429,0.4571] lambda=0.5",
            "",
        );
        let mut cfg = RunConfig::shipped(Task::Insertion);
        cfg.fusion.insert(
            "rack_aligned".into(),
            FusionConfig {
                modalities: Some(vec!["vision".into(), "depth".into()]),
                ..Default::default()
            },
        );
        let p = prepare(cfg, &tree).unwrap();
        let w = p.setup.sensors["rack_aligned"].policy.weights();
        assert!((w[0] - 0.95 / 1.75).abs() < 1e-12);
    }
}
