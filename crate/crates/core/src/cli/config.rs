//! TOML run configuration.
//!
//! ```toml
//! [input]
//! dataset = "diabetes.csv"      # or: importances = "importances.csv"
//! target = "class"
//! external = "shap.csv"         # optional
//! directions = "directions.csv" # optional
//!
//! [election]
//! votes = 100000000
//! seats = 600
//! threshold = 10
//! exclude = ["Age"]
//! alliance.Urinary = ["Polyuria", "Polydipsia"]
//!
//! [trainer]
//! trees = 100
//! max_depth = 6
//! min_samples_split = 2
//! seed = 0
//! weighted_importance = false
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::load::resolve;
use super::CliError;
use crate::pipeline::{Alliance, PipelineConfig};
use crate::trees::{ForestParams, ImportanceMode, TreeParams};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    input: RawInput,
    #[serde(default)]
    election: RawElection,
    #[serde(default)]
    trainer: RawTrainer,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    dataset: Option<String>,
    target: Option<String>,
    importances: Option<String>,
    external: Option<String>,
    directions: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElection {
    votes: Option<i64>,
    seats: Option<i64>,
    threshold: Option<f64>,
    #[serde(default)]
    exclude: Vec<String>,
    #[serde(default)]
    alliance: toml::Table,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrainer {
    trees: Option<i64>,
    max_depth: Option<i64>,
    min_samples_split: Option<i64>,
    seed: Option<u64>,
    weighted_importance: Option<bool>,
    bootstrap: Option<bool>,
    parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSource {
    Dataset { path: PathBuf, target: String },
    Importances { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainerConfig {
    pub forest: ForestParams,
    pub importance_mode: ImportanceMode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            importance_mode: ImportanceMode::Unweighted,
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    /// `entity,value` file compared against the seat counts.
    pub external: Option<PathBuf>,
    /// `feature,coefficient` file colouring the bar chart; overrides the
    /// directions computed from a dataset.
    pub directions: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub trainer: TrainerConfig,
    pub output_dir: PathBuf,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, value: Option<i64>, default: u64, min: u64) -> Result<u64, CliError> {
    match value {
        None => Ok(default),
        Some(v) if v >= min as i64 => Ok(v as u64),
        Some(v) => Err(invalid(field, format!("must be at least {min}, got {v}"))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            CliError::ConfigSyntax { message, .. } => CliError::ConfigSyntax {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parses and validates config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::ConfigSyntax {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })?;

        let input = match (&raw.input.dataset, &raw.input.importances) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "input",
                    "set exactly one of `dataset` and `importances`, not both",
                ))
            }
            (None, None) => {
                return Err(invalid(
                    "input",
                    "one of `dataset` or `importances` is required",
                ))
            }
            (Some(dataset), None) => {
                let target = raw
                    .input
                    .target
                    .clone()
                    .ok_or_else(|| invalid("input.target", "required with `input.dataset`"))?;
                InputSource::Dataset {
                    path: resolve(base, dataset),
                    target,
                }
            }
            (None, Some(importances)) => {
                if raw.input.target.is_some() {
                    return Err(invalid("input.target", "only valid with `input.dataset`"));
                }
                InputSource::Importances {
                    path: resolve(base, importances),
                }
            }
        };

        let defaults = PipelineConfig::default();
        let seats = positive(
            "election.seats",
            raw.election.seats,
            defaults.total_seats,
            1,
        )?;
        let votes = positive(
            "election.votes",
            raw.election.votes,
            defaults.total_votes,
            1,
        )?;
        if votes < seats {
            return Err(invalid(
                "election.votes",
                format!("must be at least election.seats ({seats}), got {votes}"),
            ));
        }
        let threshold = raw.election.threshold.unwrap_or(defaults.threshold_percent);
        if !(0.0..=100.0).contains(&threshold) {
            return Err(invalid(
                "election.threshold",
                format!("must be within [0, 100], got {threshold}"),
            ));
        }
        let mut alliances = Vec::new();
        for (name, members) in &raw.election.alliance {
            let field = format!("election.alliance.{name}");
            let members = members
                .as_array()
                .ok_or_else(|| invalid(&field, "must be an array of feature names"))?
                .iter()
                .map(|m| {
                    m.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| invalid(&field, "must be an array of feature names"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if members.is_empty() {
                return Err(invalid(&field, "must list at least one feature"));
            }
            alliances.push(Alliance::new(name.clone(), members));
        }
        for (i, a) in alliances.iter().enumerate() {
            for member in &a.members {
                if raw.election.exclude.contains(member) {
                    return Err(invalid(
                        &format!("election.alliance.{}", a.name),
                        format!("member {member:?} is also excluded"),
                    ));
                }
                if let Some(other) = alliances[..i].iter().find(|o| o.members.contains(member)) {
                    return Err(invalid(
                        &format!("election.alliance.{}", a.name),
                        format!(
                            "member {member:?} already belongs to alliance {:?}",
                            other.name
                        ),
                    ));
                }
            }
        }

        let tree_defaults = TreeParams::default();
        let forest_defaults = ForestParams::default();
        let tree = TreeParams {
            max_depth: positive(
                "trainer.max_depth",
                raw.trainer.max_depth,
                tree_defaults.max_depth as u64,
                0,
            )? as usize,
            min_samples_split: positive(
                "trainer.min_samples_split",
                raw.trainer.min_samples_split,
                tree_defaults.min_samples_split as u64,
                2,
            )? as usize,
        };
        let forest = ForestParams {
            trees: positive(
                "trainer.trees",
                raw.trainer.trees,
                forest_defaults.trees as u64,
                1,
            )? as usize,
            tree,
            seed: raw.trainer.seed.unwrap_or(forest_defaults.seed),
            bootstrap: raw.trainer.bootstrap.unwrap_or(forest_defaults.bootstrap),
            parallel: raw.trainer.parallel.unwrap_or(forest_defaults.parallel),
        };
        let importance_mode = if raw.trainer.weighted_importance.unwrap_or(false) {
            ImportanceMode::Weighted
        } else {
            ImportanceMode::Unweighted
        };

        Ok(Self {
            input,
            external: raw.input.external.as_deref().map(|p| resolve(base, p)),
            directions: raw.input.directions.as_deref().map(|p| resolve(base, p)),
            pipeline: PipelineConfig {
                total_votes: votes,
                total_seats: seats,
                threshold_percent: threshold,
                excluded: raw.election.exclude,
                alliances,
            },
            trainer: TrainerConfig {
                forest,
                importance_mode,
            },
            output_dir: resolve(base, raw.output.dir.as_deref().unwrap_or("out")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("/data"))
    }

    fn field_of(err: CliError) -> String {
        match err {
            CliError::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn full_config() {
        let c = parse(
            r#"
            [input]
            dataset = "diabetes.csv"
            target = "class"
            external = "/abs/shap.csv"

            [election]
            votes = 1000
            seats = 60
            threshold = 10
            exclude = ["Age"]
            alliance.Urinary = ["Polyuria", "Polydipsia"]
            alliance.Metabolic = ["Obesity"]

            [trainer]
            trees = 5
            max_depth = 3
            seed = 7
            weighted_importance = true

            [output]
            dir = "results"
            "#,
        )
        .unwrap();
        assert_eq!(
            c.input,
            InputSource::Dataset {
                path: "/data/diabetes.csv".into(),
                target: "class".into()
            }
        );
        assert_eq!(c.external, Some("/abs/shap.csv".into()));
        assert_eq!(c.pipeline.total_votes, 1000);
        assert_eq!(c.pipeline.threshold_percent, 10.0);
        let names: Vec<_> = c
            .pipeline
            .alliances
            .iter()
            .map(|a| a.name.as_str())
            .collect();
        assert_eq!(names, ["Urinary", "Metabolic"]);
        assert_eq!(c.trainer.forest.trees, 5);
        assert_eq!(c.trainer.forest.tree.max_depth, 3);
        assert_eq!(c.trainer.forest.tree.min_samples_split, 2);
        assert_eq!(c.trainer.forest.seed, 7);
        assert_eq!(c.trainer.importance_mode, ImportanceMode::Weighted);
        assert_eq!(c.output_dir, PathBuf::from("/data/results"));
    }

    #[test]
    fn defaults() {
        let c = parse("[input]\nimportances = \"imp.csv\"\n").unwrap();
        assert_eq!(c.pipeline, PipelineConfig::default());
        assert_eq!(c.trainer, TrainerConfig::default());
        assert_eq!(c.output_dir, PathBuf::from("/data/out"));
    }

    #[test]
    fn rejections_name_the_field() {
        let cases = [
            ("[input]\ndataset='a'\ntarget='y'\nimportances='b'", "input"),
            ("", "input"),
            ("[input]\ndataset='a'", "input.target"),
            ("[input]\nimportances='a'\ntarget='y'", "input.target"),
            (
                "[input]\nimportances='a'\n[election]\nseats=0",
                "election.seats",
            ),
            (
                "[input]\nimportances='a'\n[election]\nvotes=10\nseats=11",
                "election.votes",
            ),
            (
                "[input]\nimportances='a'\n[election]\nvotes=-1",
                "election.votes",
            ),
            (
                "[input]\nimportances='a'\n[election]\nthreshold=100.5",
                "election.threshold",
            ),
            (
                "[input]\nimportances='a'\n[election]\nthreshold=-1",
                "election.threshold",
            ),
            (
                "[input]\nimportances='a'\n[election]\nalliance.X=[]",
                "election.alliance.X",
            ),
            (
                "[input]\nimportances='a'\n[election]\nalliance.X='a'",
                "election.alliance.X",
            ),
            (
                "[input]\nimportances='a'\n[election]\nalliance.X=['a']\nalliance.Y=['a','b']",
                "election.alliance.Y",
            ),
            (
                "[input]\nimportances='a'\n[election]\nexclude=['a']\nalliance.X=['a']",
                "election.alliance.X",
            ),
            (
                "[input]\nimportances='a'\n[trainer]\ntrees=0",
                "trainer.trees",
            ),
            (
                "[input]\nimportances='a'\n[trainer]\nmin_samples_split=1",
                "trainer.min_samples_split",
            ),
            (
                "[input]\nimportances='a'\n[trainer]\nmax_depth=-2",
                "trainer.max_depth",
            ),
        ];
        for (text, field) in cases {
            assert_eq!(field_of(parse(text).unwrap_err()), field, "{text}");
        }
    }

    #[test]
    fn unknown_keys_are_syntax_errors() {
        for text in ["[input]\nimportances='a'\nseed=1", "[elections]\nseats=1"] {
            assert!(matches!(parse(text), Err(CliError::ConfigSyntax { .. })));
        }
        let msg = parse("[input]\nimportances='a'\n[election]\nseats='many'")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("seats"), "{msg}");
    }
}
