//! Synthetic datasets with planted relevant features.
//!
//! Informative columns follow a Gaussian mixture: every example belongs to one
//! of `c` components, and on each informative axis the components sit on the
//! levels `0, s, 2s, …` (unit within-component standard deviation) in an
//! axis-specific random order. Noise columns are i.i.d. uniform on `[0, 1]`.
//! Columns are shuffled; the informative positions are kept as ground truth.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, Dataset, FeatureTable};
use crate::error::{Error, Result};
use crate::ranking::csv_field;
use crate::rng::{stream, TAG_SYNTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub clusters: usize,
    /// Distance between adjacent component levels, in within-component
    /// standard deviations.
    pub separation: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 || self.m < self.clusters {
            return Err(Error::InvalidConfig(format!(
                "need m >= clusters >= 2, got m={}, clusters={}",
                self.m, self.clusters
            )));
        }
        if self.n_informative == 0 {
            return Err(Error::InvalidConfig("need at least one informative column".into()));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "separation must be positive, got {}",
                self.separation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    pub spec: SynthSpec,
    pub dataset: Dataset,
    /// Column indices of the informative attributes, ascending.
    pub informative: Vec<usize>,
}

pub const TARGET_NAME: &str = "class";

pub fn make_planted(spec: &SynthSpec) -> Result<PlantedDataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, &[TAG_SYNTH]);
    let m = spec.m;
    let n = spec.n_informative + spec.n_noise;

    let mut labels: Vec<usize> = (0..m).map(|r| r % spec.clusters).collect();
    labels.shuffle(&mut rng);

    let mut generated: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..spec.n_informative {
        let mut levels: Vec<usize> = (0..spec.clusters).collect();
        levels.shuffle(&mut rng);
        let col = labels
            .iter()
            .map(|&l| {
                let z: f64 = rng.sample(StandardNormal);
                spec.separation * levels[l] as f64 + z
            })
            .collect();
        generated.push(col);
    }
    for _ in 0..spec.n_noise {
        generated.push((0..m).map(|_| rng.gen::<f64>()).collect());
    }

    // placement[j] = generated column shown at position j
    let mut placement: Vec<usize> = (0..n).collect();
    placement.shuffle(&mut rng);
    let mut informative: Vec<usize> = placement
        .iter()
        .enumerate()
        .filter(|(_, &g)| g < spec.n_informative)
        .map(|(j, _)| j)
        .collect();
    informative.sort_unstable();

    let mut slots: Vec<Option<Vec<f64>>> = generated.into_iter().map(Some).collect();
    let columns: Vec<Vec<f64>> = placement
        .iter()
        .map(|&g| slots[g].take().expect("each column placed once"))
        .collect();
    let attributes = (0..n).map(|j| Attribute::numeric(format!("f{j}"))).collect();
    let features = FeatureTable::new(attributes, columns)?;
    let target = labels.iter().map(|&l| l as f64).collect();
    let name = format!("planted_s{}", spec.seed);
    let dataset = Dataset::new(name, features, Some((TARGET_NAME.into(), target)))?;
    Ok(PlantedDataset {
        spec: *spec,
        dataset,
        informative,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub informative_indices: Vec<usize>,
    pub informative_names: Vec<String>,
}

impl PlantedDataset {
    pub fn ground_truth(&self) -> GroundTruth {
        let names = self.dataset.features().names();
        GroundTruth {
            spec: self.spec,
            informative_indices: self.informative.clone(),
            informative_names: self.informative.iter().map(|&j| names[j].clone()).collect(),
        }
    }

    /// Features followed by the target column.
    pub fn to_csv(&self) -> String {
        write_dataset_csv(&self.dataset)
    }

    /// Writes `<stem>.csv` and `<stem>.truth.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(format!("{stem}.truth.json"));
        let body = serde_json::to_string_pretty(&self.ground_truth())?;
        fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))
    }
}

/// CSV text of a dataset: features, then the target column if present.
/// Nominal cells are written as their labels.
pub fn write_dataset_csv(dataset: &Dataset) -> String {
    let table = dataset.features();
    let mut header: Vec<String> = table.names().iter().map(|s| csv_field(s)).collect();
    if let Some(t) = dataset.target_name() {
        header.push(csv_field(t));
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in 0..table.m() {
        let mut cells: Vec<String> = (0..table.n())
            .map(|i| match &table.attribute(i).kind {
                crate::dataset::AttributeKind::Numeric => table.value(r, i).to_string(),
                crate::dataset::AttributeKind::Nominal(domain) => {
                    csv_field(&domain[table.value(r, i) as usize])
                }
            })
            .collect();
        if let Some(t) = dataset.target() {
            cells.push(t[r].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
