//! XOR classification data: synthesis and per-agent partitioning.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{substream, Domain, SimRng};

/// One labelled point of the XOR task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x1: f64,
    pub x2: f64,
    pub label: u8,
}

impl Sample {
    pub fn new(x1: f64, x2: f64, label: u8) -> Self {
        Self { x1, x2, label }
    }

    pub fn features(&self) -> [f64; 2] {
        [self.x1, self.x2]
    }

    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Class 1 iff the two coordinates have different signs.
pub fn xor_label(x1: f64, x2: f64) -> u8 {
    u8::from((x1 > 0.0) != (x2 > 0.0))
}

/// Shift every coordinate away from the axes by `pad` in the direction of its sign.
pub fn apply_padding(x: f64, pad: f64) -> f64 {
    x + pad * x.signum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataConfig {
    pub range_half_width: f64,
    pub pad: f64,
    pub label_noise_rate: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            range_half_width: 8.0,
            pad: 0.5,
            label_noise_rate: 0.0,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_half_width > 0.0 && self.range_half_width.is_finite()) {
            return Err(Error::Config(format!(
                "range_half_width must be positive, got {}",
                self.range_half_width
            )));
        }
        if !(self.pad >= 0.0 && self.pad.is_finite()) {
            return Err(Error::Config(format!("pad must be >= 0, got {}", self.pad)));
        }
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return Err(Error::Config(format!(
                "label_noise_rate must lie in [0, 1], got {}",
                self.label_noise_rate
            )));
        }
        Ok(())
    }
}

fn nonzero_uniform(rng: &mut SimRng, half_width: f64) -> f64 {
    loop {
        let v = rng.random_range(-half_width..=half_width);
        if v != 0.0 {
            return v;
        }
    }
}

/// Draws `count` padded XOR samples. The flip coin is drawn for every sample
/// regardless of the noise rate, so the point cloud is the same for any rate.
pub fn synthesize(count: usize, config: &DataConfig, rng: &mut SimRng) -> Vec<Sample> {
    (0..count)
        .map(|_| {
            let raw1 = nonzero_uniform(rng, config.range_half_width);
            let raw2 = nonzero_uniform(rng, config.range_half_width);
            let flip = rng.random::<f64>() < config.label_noise_rate;
            let label = xor_label(raw1, raw2) ^ u8::from(flip);
            Sample::new(
                apply_padding(raw1, config.pad),
                apply_padding(raw2, config.pad),
                label,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetShard {
    pub agent_id: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// One shard per normal agent; agent `i` draws its train and test sets from
/// its own substreams.
pub fn partition(
    sizes_train: &[usize],
    sizes_test: &[usize],
    config: &DataConfig,
    seed: u64,
) -> Result<Vec<DatasetShard>> {
    if sizes_train.len() != sizes_test.len() {
        return Err(Error::Config(format!(
            "train size list has {} entries but test size list has {}",
            sizes_train.len(),
            sizes_test.len()
        )));
    }
    config.validate()?;
    Ok(sizes_train
        .iter()
        .zip(sizes_test)
        .enumerate()
        .map(|(agent_id, (&n_train, &n_test))| {
            let mut train_rng = substream(seed, Domain::TrainData, agent_id as u64);
            let mut test_rng = substream(seed, Domain::TestData, agent_id as u64);
            DatasetShard {
                agent_id,
                train: synthesize(n_train, config, &mut train_rng),
                test: synthesize(n_test, config, &mut test_rng),
            }
        })
        .collect())
}

/// Per-agent training set sizes of the 13-normal-agent experiment.
pub const REFERENCE_TRAIN_SIZES: [usize; 13] = [
    1122, 1315, 1521, 1400, 1369, 1255, 1239, 1160, 1138, 1588, 1550, 1384, 1238,
];

/// Per-agent test set sizes of the 13-normal-agent experiment.
pub const REFERENCE_TEST_SIZES: [usize; 13] = [
    312, 309, 300, 286, 283, 313, 312, 294, 291, 283, 292, 204, 299,
];

pub fn write_shards_csv<W: Write>(shards: &[DatasetShard], mut out: W) -> Result<()> {
    writeln!(out, "agent_id,split,x1,x2,label")?;
    let mut line = String::new();
    for shard in shards {
        for (split, samples) in [("train", &shard.train), ("test", &shard.test)] {
            for s in samples {
                line.clear();
                let _ = write!(line, "{},{},{},{},{}", shard.agent_id, split, s.x1, s.x2, s.label);
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(())
}

pub fn read_shards_csv<R: BufRead>(input: R) -> Result<Vec<DatasetShard>> {
    let mut shards: Vec<DatasetShard> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse(format!("shard csv line {}: `{}`", lineno + 1, line));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad());
        }
        let agent_id: usize = fields[0].parse().map_err(|_| bad())?;
        let x1: f64 = fields[2].parse().map_err(|_| bad())?;
        let x2: f64 = fields[3].parse().map_err(|_| bad())?;
        let label: u8 = fields[4].parse().map_err(|_| bad())?;
        if label > 1 {
            return Err(bad());
        }
        while shards.len() <= agent_id {
            let id = shards.len();
            shards.push(DatasetShard { agent_id: id, train: Vec::new(), test: Vec::new() });
        }
        let sample = Sample::new(x1, x2, label);
        match fields[1] {
            "train" => shards[agent_id].train.push(sample),
            "test" => shards[agent_id].test.push(sample),
            _ => return Err(bad()),
        }
    }
    Ok(shards)
}
