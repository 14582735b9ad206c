//! Run orchestration behind the `dhondtxai` binary: configuration, file
//! ingestion, training, the electoral pipeline and report output.

mod config;
mod load;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::apportion::{dhondt_allocate, ApportionError, SeatAllocation};
use crate::pipeline::{run_pipeline, ImportanceVector, PipelineError, PipelineResult};
use crate::report::{
    render_bar_svg, render_parliament_svg, render_result_table, ChartSpec, ReportError, ResultTable,
};
use crate::stats::{
    alliance_direction, dataset_directions, ComparisonReport, Direction, DirectionMap, StatsError,
};
use crate::trees::{ensemble_importance, train_forest, TreeError};

pub use config::{InputSource, RunConfig, TrainerConfig};
pub use load::{load_dataset, load_importances, load_values, load_votes};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Csv {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("{}: empty file", .0.display())]
    EmptyFile(PathBuf),
    #[error("{}: missing column {column:?}", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: column {column:?} is not numeric and has {distinct} distinct values", path.display())]
    NonNumericFeature {
        path: PathBuf,
        column: String,
        distinct: usize,
    },
    #[error("{}: target column {column:?} is not binary", path.display())]
    NonBinaryTarget { path: PathBuf, column: String },
    #[error("{}:{line}: missing value in column {column:?}", path.display())]
    MissingValue {
        path: PathBuf,
        line: u64,
        column: String,
    },
    #[error("{}:{line}: invalid number {value:?}", path.display())]
    InvalidNumber {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{}:{line}: negative importance {value} for {feature:?}", path.display())]
    NegativeImportance {
        path: PathBuf,
        line: u64,
        feature: String,
        value: f64,
    },
    #[error("{}:{line}: duplicate entry {feature:?}", path.display())]
    DuplicateFeature {
        path: PathBuf,
        line: u64,
        feature: String,
    },
    #[error("{}: {source}", path.display())]
    Dataset { path: PathBuf, source: TreeError },
    #[error("{}: {message}", path.display())]
    ConfigSyntax { path: PathBuf, message: String },
    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
    #[error("{}: no value for entity {entity:?}", path.display())]
    MissingEntityValue { path: PathBuf, entity: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Apportion(#[from] ApportionError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Everything a run produced, alongside the files it wrote.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub importances: ImportanceVector,
    pub result: PipelineResult,
    pub directions: Option<DirectionMap>,
    pub table: ResultTable,
    pub comparison: Option<ComparisonReport>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AllocateOutcome {
    pub allocation: SeatAllocation,
    pub table: ResultTable,
    pub files: Vec<PathBuf>,
}

fn write_file(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Entity directions from feature directions; alliances take the
/// importance-weighted sum of their members.
fn entity_directions(
    result: &PipelineResult,
    importances: &ImportanceVector,
    features: &DirectionMap,
) -> DirectionMap {
    result
        .entities
        .importances
        .names()
        .zip(&result.entities.constituents)
        .filter_map(|(entity, members)| {
            if let Some(d) = features.get(entity) {
                return Some((entity.to_string(), *d));
            }
            let pairs: Option<Vec<(f64, f64)>> = members
                .iter()
                .map(|m| Some((features.get(m)?.coefficient, importances.get(m)?)))
                .collect();
            pairs.map(|p| (entity.to_string(), alliance_direction(&p)))
        })
        .collect()
}

fn comparison(
    path: &Path,
    result: &PipelineResult,
    external: &BTreeMap<String, f64>,
) -> Result<ComparisonReport, CliError> {
    let allocation = result.display_allocation();
    let mut entities = Vec::new();
    let mut seats = Vec::new();
    let mut values = Vec::new();
    for name in result.entities.importances.names() {
        let value = external
            .get(name)
            .ok_or_else(|| CliError::MissingEntityValue {
                path: path.to_path_buf(),
                entity: name.to_string(),
            })?;
        entities.push(name.to_string());
        seats.push(allocation.seats_of(name).unwrap_or(0));
        values.push(*value);
    }
    Ok(ComparisonReport::new(entities, seats, values)?)
}

/// Trains (for dataset input), runs the pipeline and writes every output
/// into the configured directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let (importances, feature_directions) = match &config.input {
        InputSource::Dataset { path, target } => {
            let data = load_dataset(path, target)?;
            log::info!(
                "training {} trees on {} samples, {} features",
                config.trainer.forest.trees,
                data.n_samples(),
                data.n_features()
            );
            let forest = train_forest(&data, &config.trainer.forest)?;
            let importances = ensemble_importance(&forest, config.trainer.importance_mode)?;
            (importances, Some(dataset_directions(&data)))
        }
        InputSource::Importances { path } => (load_importances(path)?, None),
    };
    let feature_directions = match &config.directions {
        Some(path) => Some(
            load_values(path)?
                .into_iter()
                .map(|(name, r)| (name, Direction::from_coefficient(r)))
                .collect(),
        ),
        None => feature_directions,
    };

    let result = run_pipeline(&importances, &config.pipeline)?;
    let directions = feature_directions
        .as_ref()
        .map(|f| entity_directions(&result, &importances, f));

    let external = match &config.external {
        Some(path) => {
            let values: BTreeMap<String, f64> = load_values(path)?.into_iter().collect();
            Some((comparison(path, &result, &values)?, values))
        }
        None => None,
    };
    let table = render_result_table(
        &result,
        directions.as_ref(),
        external.as_ref().map(|e| &e.1),
    );

    create_dir(&config.output_dir)?;
    let out = &config.output_dir;
    let mut files = Vec::new();
    write_file(out.join("results.txt"), &table.to_text(), &mut files)?;
    write_file(out.join("results.jsonl"), &table.to_jsonl(), &mut files)?;

    let display = result.display_allocation();
    let spec = ChartSpec::default();
    write_file(
        out.join("parliament.svg"),
        &render_parliament_svg(&display, &spec),
        &mut files,
    )?;
    // Without directions every bar is gray.
    let gray: DirectionMap;
    let bar_directions = match &directions {
        Some(d) => d,
        None => {
            gray = display
                .iter()
                .map(|(id, _)| (id.to_string(), Direction::zero()))
                .collect();
            &gray
        }
    };
    let bars = render_bar_svg(&display, bar_directions, &spec)?;
    write_file(out.join("bars.svg"), &bars, &mut files)?;

    if matches!(config.input, InputSource::Dataset { .. }) {
        let mut csv = String::from("feature,importance\n");
        for (name, value) in importances.iter() {
            csv.push_str(&format!("{},{value}\n", csv_field(name)));
        }
        write_file(out.join("importances.csv"), &csv, &mut files)?;
    }

    let comparison = match external {
        Some((report, _)) => {
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            write_file(out.join("comparison.json"), &(json + "\n"), &mut files)?;
            Some(report)
        }
        None => None,
    };

    Ok(RunOutcome {
        importances,
        result,
        directions,
        table,
        comparison,
        files,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Apportions a vote file directly. Outputs are written only when `out` is set.
pub fn allocate(votes: &Path, seats: u64, out: Option<&Path>) -> Result<AllocateOutcome, CliError> {
    if seats == 0 {
        return Err(CliError::Config {
            field: "seats".into(),
            message: "must be at least 1".into(),
        });
    }
    let entities = load_votes(votes)?;
    let allocation = dhondt_allocate(&entities, seats)?;
    let table = ResultTable::from_allocation(&allocation, None, None);
    let mut files = Vec::new();
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(dir.join("results.txt"), &table.to_text(), &mut files)?;
        write_file(dir.join("results.jsonl"), &table.to_jsonl(), &mut files)?;
        write_file(
            dir.join("parliament.svg"),
            &render_parliament_svg(&allocation, &ChartSpec::default()),
            &mut files,
        )?;
    }
    Ok(AllocateOutcome {
        allocation,
        table,
        files,
    })
}
