//! Protected groups: serializable rule definitions, evaluated membership
//! vectors, and a combinatorial generator for "unspecified" groups.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Features;
use crate::error::{Error, Result};

/// One predicate on a named feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Condition {
    Eq { feature: String, value: f64 },
    Le { feature: String, value: f64 },
    Gt { feature: String, value: f64 },
}

impl Condition {
    fn feature(&self) -> &str {
        match self {
            Condition::Eq { feature, .. }
            | Condition::Le { feature, .. }
            | Condition::Gt { feature, .. } => feature,
        }
    }

    #[inline]
    fn holds(&self, x: f64) -> bool {
        match self {
            Condition::Eq { value, .. } => x == *value,
            Condition::Le { value, .. } => x <= *value,
            Condition::Gt { value, .. } => x > *value,
        }
    }

    fn label(&self) -> String {
        match self {
            Condition::Eq { feature, value } => format!("{feature}=={value}"),
            Condition::Le { feature, value } => format!("{feature}<={value}"),
            Condition::Gt { feature, value } => format!("{feature}>{value}"),
        }
    }
}

/// A group is the conjunction of its conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDefinition {
    pub name: String,
    pub conditions: Vec<Condition>,
}

impl GroupDefinition {
    pub fn new(conditions: Vec<Condition>) -> Self {
        let name = conditions
            .iter()
            .map(Condition::label)
            .collect::<Vec<_>>()
            .join(" & ");
        Self { name, conditions }
    }

    pub fn evaluate(&self, features: &Features) -> Result<Vec<bool>> {
        let mut membership = vec![true; features.n_rows()];
        for cond in &self.conditions {
            let j = features.column_index(cond.feature()).ok_or_else(|| {
                Error::ShapeMismatch(format!(
                    "group `{}` refers to unknown feature `{}`",
                    self.name,
                    cond.feature()
                ))
            })?;
            for (m, &x) in membership.iter_mut().zip(features.column(j)) {
                *m = *m && cond.holds(x);
            }
        }
        Ok(membership)
    }
}

/// Evaluated group membership over a fixed set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub membership: Vec<bool>,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, membership: Vec<bool>) -> Self {
        Self {
            name: name.into(),
            membership,
        }
    }

    pub fn size(&self) -> usize {
        self.membership.iter().filter(|&&m| m).count()
    }
}

/// Ordered collection of possibly overlapping groups over the same rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupSet {
    pub groups: Vec<GroupSpec>,
}

impl GroupSet {
    pub fn new(groups: Vec<GroupSpec>) -> Self {
        Self { groups }
    }

    pub fn evaluate(definitions: &[GroupDefinition], features: &Features) -> Result<Self> {
        let groups = definitions
            .iter()
            .map(|d| Ok(GroupSpec::new(d.name.clone(), d.evaluate(features)?)))
            .collect::<Result<_>>()?;
        Ok(Self { groups })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    /// Errors unless every membership vector has `n` entries.
    pub fn check_rows(&self, n: usize) -> Result<()> {
        for g in &self.groups {
            if g.membership.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "group `{}` has {} rows, data has {n}",
                    g.name,
                    g.membership.len()
                )));
            }
        }
        Ok(())
    }

    /// One 0/1 indicator column per group.
    pub fn indicator_features(&self, n_rows: usize, prefix: &str) -> Result<Features> {
        self.check_rows(n_rows)?;
        if self.groups.is_empty() {
            return Ok(Features::empty(n_rows));
        }
        let columns = self
            .groups
            .iter()
            .map(|g| {
                g.membership
                    .iter()
                    .map(|&m| f64::from(u8::from(m)))
                    .collect()
            })
            .collect();
        let names = self
            .groups
            .iter()
            .map(|g| format!("{prefix}{}", g.name))
            .collect();
        Features::new(columns, names)
    }
}

/// Settings for [`generate_unspecified_groups`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupGenConfig {
    pub max_groups: usize,
    /// 1 = atoms only, 2 = atoms plus pairwise conjunctions.
    pub max_conjunction_order: usize,
    /// Interior quantile thresholds per numeric column (3 = quartiles).
    pub quantiles_per_numeric: usize,
    pub min_group_size: usize,
    pub seed: u64,
}

impl Default for GroupGenConfig {
    fn default() -> Self {
        Self {
            max_groups: 1000,
            max_conjunction_order: 2,
            quantiles_per_numeric: 3,
            min_group_size: 50,
            seed: 0,
        }
    }
}

fn is_binary(col: &[f64]) -> bool {
    col.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Atoms are `column == 1` for 0/1 columns and `column <= q` for quantile
/// thresholds `q` of every other column; groups are the atoms plus (when
/// `max_conjunction_order == 2`) every conjunction of two atoms on different
/// columns. Groups below `min_group_size` are dropped, then a seeded shuffle
/// picks `max_groups` of the rest, which keep their enumeration order.
pub fn generate_unspecified_groups(
    features: &Features,
    config: &GroupGenConfig,
) -> Result<(Vec<GroupDefinition>, GroupSet)> {
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    if !(1..=2).contains(&config.max_conjunction_order) {
        return Err(Error::InvalidConfig(format!(
            "max_conjunction_order must be 1 or 2, got {}",
            config.max_conjunction_order
        )));
    }
    let n = features.n_rows();
    // (column index, condition, membership)
    let mut atoms: Vec<(usize, Condition, Vec<bool>)> = Vec::new();
    for (j, name) in features.names().iter().enumerate() {
        let col = features.column(j);
        if is_binary(col) {
            let cond = Condition::Eq {
                feature: name.clone(),
                value: 1.0,
            };
            let m: Vec<bool> = col.iter().map(|&v| cond.holds(v)).collect();
            atoms.push((j, cond, m));
            continue;
        }
        if config.quantiles_per_numeric == 0 {
            continue;
        }
        let mut sorted = col.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let q = config.quantiles_per_numeric;
        let mut thresholds: Vec<f64> = (1..=q)
            .map(|k| sorted[(k * (n - 1)) / (q + 1)])
            .filter(|&t| t < sorted[n - 1])
            .collect();
        thresholds.dedup();
        for t in thresholds {
            let cond = Condition::Le {
                feature: name.clone(),
                value: t,
            };
            let m: Vec<bool> = col.iter().map(|&v| cond.holds(v)).collect();
            atoms.push((j, cond, m));
        }
    }

    let mut candidates: Vec<(GroupDefinition, Vec<bool>)> = atoms
        .iter()
        .map(|(_, c, m)| (GroupDefinition::new(vec![c.clone()]), m.clone()))
        .collect();
    if config.max_conjunction_order >= 2 {
        for a in 0..atoms.len() {
            for b in a + 1..atoms.len() {
                if atoms[a].0 == atoms[b].0 {
                    continue;
                }
                let m: Vec<bool> = atoms[a]
                    .2
                    .iter()
                    .zip(&atoms[b].2)
                    .map(|(&x, &y)| x && y)
                    .collect();
                let def = GroupDefinition::new(vec![atoms[a].1.clone(), atoms[b].1.clone()]);
                candidates.push((def, m));
            }
        }
    }

    let mut kept: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| m.iter().filter(|&&x| x).count() >= config.min_group_size)
        .map(|(i, _)| i)
        .collect();
    if kept.len() > config.max_groups {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        kept.shuffle(&mut rng);
        kept.truncate(config.max_groups);
        kept.sort_unstable();
    }

    let mut definitions = Vec::with_capacity(kept.len());
    let mut groups = Vec::with_capacity(kept.len());
    let mut slots: Vec<Option<(GroupDefinition, Vec<bool>)>> =
        candidates.into_iter().map(Some).collect();
    for i in kept {
        let (def, m) = slots[i].take().expect("each candidate is taken once");
        groups.push(GroupSpec::new(def.name.clone(), m));
        definitions.push(def);
    }
    Ok((definitions, GroupSet::new(groups)))
}
