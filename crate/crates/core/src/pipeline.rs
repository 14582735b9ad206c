//! The electoral pipeline: exclusion, alliances, vote distribution,
//! threshold filtering and redistribution, then seat allocation.
//!
//! Every floor in the vote arithmetic is taken on exact rationals built from
//! the input `f64` importances, so results do not depend on summation order.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::apportion::{self, ApportionError, Entity, SeatAllocation, Votes};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("duplicate feature {0:?}")]
    DuplicateFeature(String),
    #[error("importance of {name:?} must be finite and non-negative, got {value}")]
    InvalidImportance { name: String, value: f64 },
    #[error("exclusion removes every feature")]
    EmptyResult,
    #[error("feature {feature:?} belongs to more than one alliance ({first:?}, {second:?})")]
    OverlappingAlliances {
        feature: String,
        first: String,
        second: String,
    },
    #[error("alliance {0:?} has no members")]
    EmptyAlliance(String),
    #[error("alliance name {0:?} is already used by a feature or another alliance")]
    NameCollision(String),
    #[error("feature {feature:?} is excluded but listed in alliance {alliance:?}")]
    ExcludedAllianceMember { feature: String, alliance: String },
    #[error("total importance is zero; votes cannot be distributed")]
    ZeroTotalImportance,
    #[error("threshold {0} is outside [0, 100]")]
    InvalidThreshold(f64),
    #[error("every entity falls below the threshold of {threshold_vote} votes")]
    AllBelowThreshold { threshold_vote: Votes },
    #[error("total votes must be positive")]
    InvalidVoteTotal,
    #[error("threshold partition does not match the vote table: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Apportion(#[from] ApportionError),
}

/// Non-negative importance score per feature (or per alliance), in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    entries: Vec<(String, f64)>,
}

impl ImportanceVector {
    pub fn new<I, S>(entries: I) -> Result<Self, PipelineError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (name, value) in entries {
            let name = name.into();
            if !value.is_finite() || value < 0.0 {
                return Err(PipelineError::InvalidImportance { name, value });
            }
            if !seen.insert(name.clone()) {
                return Err(PipelineError::DuplicateFeature(name));
            }
            out.push((name, value));
        }
        Ok(Self { entries: out })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.entries.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }
}

/// A named group of features that competes as a single entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alliance {
    pub name: String,
    pub members: Vec<String>,
}

impl Alliance {
    pub fn new<I, S>(name: impl Into<String>, members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            members: members.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub total_votes: Votes,
    pub total_seats: u64,
    /// Minimum vote share in percent, within `[0, 100]`.
    pub threshold_percent: f64,
    pub excluded: Vec<String>,
    pub alliances: Vec<Alliance>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            total_votes: 100_000_000,
            total_seats: 600,
            threshold_percent: 0.0,
            excluded: Vec::new(),
            alliances: Vec::new(),
        }
    }
}

/// Entities after alliance formation, with the features each one stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityImportances {
    pub importances: ImportanceVector,
    /// Constituent feature names, parallel to `importances`. A plain feature
    /// lists only itself.
    pub constituents: Vec<Vec<String>>,
}

impl EntityImportances {
    pub fn constituents_of(&self, entity: &str) -> Option<&[String]> {
        self.importances
            .names()
            .position(|n| n == entity)
            .map(|i| self.constituents[i].as_slice())
    }

    pub fn is_alliance(&self, entity: &str) -> bool {
        self.constituents_of(entity)
            .is_some_and(|c| c.len() != 1 || c[0] != entity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Initial,
    PostThreshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteRow {
    pub entity: String,
    pub importance: f64,
    pub votes: Votes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub rows: Vec<VoteRow>,
    pub stage: Stage,
    /// Set once the table has passed through threshold filtering.
    pub threshold_vote: Option<Votes>,
    pub below_threshold: Vec<String>,
}

impl VoteTable {
    pub fn votes_of(&self, entity: &str) -> Option<Votes> {
        self.rows
            .iter()
            .find(|r| r.entity == entity)
            .map(|r| r.votes)
    }

    pub fn total_votes(&self) -> Votes {
        self.rows.iter().map(|r| r.votes).sum()
    }

    pub fn entities(&self) -> Vec<Entity> {
        self.rows
            .iter()
            .map(|r| Entity::new(r.entity.clone(), r.votes))
            .collect()
    }
}

/// Outcome of comparing initial votes against the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdSplit {
    pub above: Vec<String>,
    pub below: Vec<String>,
    pub threshold_vote: Votes,
}

fn exact(value: f64) -> BigRational {
    BigRational::from_float(value).expect("importances are validated as finite")
}

/// `floor(weight / total * amount)` evaluated exactly.
fn floor_share(weight: &BigRational, total: &BigRational, amount: Votes) -> Votes {
    let share = weight * BigRational::from_integer(BigInt::from(amount)) / total;
    share
        .floor()
        .to_integer()
        .to_u64()
        .expect("a share of the total fits in the total's range")
}

/// Drops the excluded features, keeping the order of the rest.
pub fn exclude_features(
    importances: &ImportanceVector,
    excluded: &[String],
) -> Result<ImportanceVector, PipelineError> {
    for name in excluded {
        if !importances.contains(name) {
            return Err(PipelineError::UnknownFeature(name.clone()));
        }
    }
    let entries: Vec<(String, f64)> = importances
        .iter()
        .filter(|(n, _)| !excluded.iter().any(|e| e == n))
        .map(|(n, v)| (n.to_string(), v))
        .collect();
    if entries.is_empty() {
        return Err(PipelineError::EmptyResult);
    }
    Ok(ImportanceVector { entries })
}

/// Replaces each alliance's members by one entity carrying the sum of their
/// importances, added in member order. Unallied features come first in their
/// original order, followed by the alliances in declaration order.
pub fn form_alliances(
    importances: &ImportanceVector,
    alliances: &[Alliance],
) -> Result<EntityImportances, PipelineError> {
    let mut owner: Vec<Option<usize>> = vec![None; importances.len()];
    let mut alliance_names = HashSet::new();
    for (a_idx, alliance) in alliances.iter().enumerate() {
        if alliance.members.is_empty() {
            return Err(PipelineError::EmptyAlliance(alliance.name.clone()));
        }
        if importances.contains(&alliance.name) || !alliance_names.insert(alliance.name.as_str()) {
            return Err(PipelineError::NameCollision(alliance.name.clone()));
        }
        for member in &alliance.members {
            let idx = importances
                .names()
                .position(|n| n == member)
                .ok_or_else(|| PipelineError::UnknownFeature(member.clone()))?;
            if let Some(prev) = owner[idx] {
                return Err(PipelineError::OverlappingAlliances {
                    feature: member.clone(),
                    first: alliances[prev].name.clone(),
                    second: alliance.name.clone(),
                });
            }
            owner[idx] = Some(a_idx);
        }
    }

    let mut entries = Vec::new();
    let mut constituents = Vec::new();
    for ((name, value), o) in importances.entries.iter().zip(&owner) {
        if o.is_none() {
            entries.push((name.clone(), *value));
            constituents.push(vec![name.clone()]);
        }
    }
    for alliance in alliances {
        let total: f64 = alliance
            .members
            .iter()
            .map(|m| importances.get(m).expect("membership checked above"))
            .sum();
        entries.push((alliance.name.clone(), total));
        constituents.push(alliance.members.clone());
    }
    Ok(EntityImportances {
        importances: ImportanceVector { entries },
        constituents,
    })
}

/// Gives each entity `floor(importance / total_importance * total_votes)`
/// votes. The flooring residue (fewer than one vote per entity) is not
/// reassigned.
pub fn distribute_votes(
    entities: &ImportanceVector,
    total_votes: Votes,
) -> Result<VoteTable, PipelineError> {
    if total_votes == 0 {
        return Err(PipelineError::InvalidVoteTotal);
    }
    let weights: Vec<BigRational> = entities.iter().map(|(_, v)| exact(v)).collect();
    let total: BigRational = weights.iter().sum();
    if total.is_zero() {
        return Err(PipelineError::ZeroTotalImportance);
    }
    let rows = entities
        .iter()
        .zip(&weights)
        .map(|((name, importance), w)| VoteRow {
            entity: name.to_string(),
            importance,
            votes: floor_share(w, &total, total_votes),
        })
        .collect();
    Ok(VoteTable {
        rows,
        stage: Stage::Initial,
        threshold_vote: None,
        below_threshold: Vec::new(),
    })
}

/// Splits entities by `initial votes < floor(threshold_percent / 100 * total_votes)`.
pub fn apply_threshold(
    table: &VoteTable,
    threshold_percent: f64,
    total_votes: Votes,
) -> Result<ThresholdSplit, PipelineError> {
    if !(0.0..=100.0).contains(&threshold_percent) {
        return Err(PipelineError::InvalidThreshold(threshold_percent));
    }
    let threshold_vote = floor_share(
        &exact(threshold_percent),
        &BigRational::from_integer(BigInt::from(100)),
        total_votes,
    );
    let (below, above): (Vec<&VoteRow>, Vec<&VoteRow>) =
        table.rows.iter().partition(|r| r.votes < threshold_vote);
    if above.is_empty() {
        return Err(PipelineError::AllBelowThreshold { threshold_vote });
    }
    Ok(ThresholdSplit {
        above: above.into_iter().map(|r| r.entity.clone()).collect(),
        below: below.into_iter().map(|r| r.entity.clone()).collect(),
        threshold_vote,
    })
}

/// Removes the below-threshold entities and hands their pooled votes to the
/// survivors in proportion to importance, flooring each share.
pub fn redistribute_votes(
    table: &VoteTable,
    split: &ThresholdSplit,
) -> Result<VoteTable, PipelineError> {
    if split.above.is_empty() {
        return Err(PipelineError::InvalidPartition(
            "no entity above threshold".into(),
        ));
    }
    for name in split.above.iter().chain(&split.below) {
        if table.votes_of(name).is_none() {
            return Err(PipelineError::InvalidPartition(format!(
                "{name:?} is not in the vote table"
            )));
        }
    }
    if let Some(both) = split.above.iter().find(|a| split.below.contains(a)) {
        return Err(PipelineError::InvalidPartition(format!(
            "{both:?} is both above and below the threshold"
        )));
    }
    if split.above.len() + split.below.len() != table.rows.len() {
        return Err(PipelineError::InvalidPartition(
            "partition does not cover every entity".into(),
        ));
    }

    let pool: Votes = table
        .rows
        .iter()
        .filter(|r| split.below.contains(&r.entity))
        .map(|r| r.votes)
        .sum();
    let survivors: Vec<&VoteRow> = table
        .rows
        .iter()
        .filter(|r| split.above.contains(&r.entity))
        .collect();
    let weights: Vec<BigRational> = survivors.iter().map(|r| exact(r.importance)).collect();
    let total: BigRational = weights.iter().sum();

    let rows = survivors
        .iter()
        .zip(&weights)
        .map(|(r, w)| {
            let gain = if pool == 0 || total.is_zero() {
                0
            } else {
                floor_share(w, &total, pool)
            };
            VoteRow {
                entity: r.entity.clone(),
                importance: r.importance,
                votes: r.votes + gain,
            }
        })
        .collect();
    Ok(VoteTable {
        rows,
        stage: Stage::PostThreshold,
        threshold_vote: Some(split.threshold_vote),
        below_threshold: split.below.clone(),
    })
}

/// Every intermediate product of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub config: PipelineConfig,
    pub entities: EntityImportances,
    pub initial: VoteTable,
    pub split: ThresholdSplit,
    pub final_table: VoteTable,
    /// Allocation over the survivors' redistributed votes.
    pub allocation: SeatAllocation,
    /// Allocation over all initial votes, kept when a positive threshold is
    /// set so the effect of the threshold can be reported.
    pub unthresholded: Option<SeatAllocation>,
}

impl PipelineResult {
    /// Final allocation with below-threshold entities listed at zero seats.
    pub fn display_allocation(&self) -> SeatAllocation {
        self.allocation
            .clone()
            .with_unseated(self.final_table.below_threshold.iter().cloned())
    }
}

pub fn run_pipeline(
    importances: &ImportanceVector,
    config: &PipelineConfig,
) -> Result<PipelineResult, PipelineError> {
    for alliance in &config.alliances {
        if let Some(m) = alliance
            .members
            .iter()
            .find(|m| config.excluded.contains(m))
        {
            return Err(PipelineError::ExcludedAllianceMember {
                feature: m.clone(),
                alliance: alliance.name.clone(),
            });
        }
    }
    let kept = exclude_features(importances, &config.excluded)?;
    let entities = form_alliances(&kept, &config.alliances)?;
    let initial = distribute_votes(&entities.importances, config.total_votes)?;
    let split = apply_threshold(&initial, config.threshold_percent, config.total_votes)?;
    let final_table = redistribute_votes(&initial, &split)?;
    let allocation = apportion::dhondt_allocate(&final_table.entities(), config.total_seats)?;
    let unthresholded = if config.threshold_percent > 0.0 {
        Some(apportion::dhondt_allocate(
            &initial.entities(),
            config.total_seats,
        )?)
    } else {
        None
    };
    Ok(PipelineResult {
        config: config.clone(),
        entities,
        initial,
        split,
        final_table,
        allocation,
        unthresholded,
    })
}
