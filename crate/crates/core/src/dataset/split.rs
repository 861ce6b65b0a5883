use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::sample::{format_id, parse_id};
use crate::error::{config_err, data_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Disjoint train/validation/test id lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<u32>,
    pub validation: Vec<u32>,
    pub test: Vec<u32>,
}

impl SplitManifest {
    pub fn ids(&self, split: Split) -> &[u32] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `seed=<n>` header, then one `<id> <split>` line per sample in id order.
    pub fn render(&self) -> String {
        let mut rows: Vec<(u32, Split)> = Split::ALL
            .iter()
            .flat_map(|&s| self.ids(s).iter().map(move |&id| (id, s)))
            .collect();
        rows.sort_unstable();
        let mut out = format!("seed={}\n", self.seed);
        for (id, split) in rows {
            out.push_str(&format!("{} {}\n", format_id(id), split));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| data_err!("empty dataset manifest"))?;
        let seed = header
            .trim()
            .strip_prefix("seed=")
            .ok_or_else(|| data_err!("manifest must start with seed=<n>"))?
            .parse::<u64>()
            .map_err(|e| data_err!("manifest seed: {e}"))?;
        let mut m = SplitManifest {
            seed,
            train: Vec::new(),
            validation: Vec::new(),
            test: Vec::new(),
        };
        let mut seen = std::collections::HashSet::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let (Some(id), Some(split), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(data_err!("manifest line `{line}` is not `<id> <split>`"));
            };
            let id = parse_id(id)?;
            let split: Split = split.parse().map_err(|e: String| data_err!("{e}"))?;
            if !seen.insert(id) {
                return Err(data_err!("sample {} listed twice in manifest", format_id(id)));
            }
            match split {
                Split::Train => m.train.push(id),
                Split::Validation => m.validation.push(id),
                Split::Test => m.test.push(id),
            }
        }
        Ok(m)
    }
}

/// Seeded shuffle, then `test_count` ids to test and the remainder split so
/// that train gets `floor(remainder * train_fraction)`.
pub fn split_dataset(ids: &[u32], test_count: usize, train_fraction: f64, seed: u64) -> Result<SplitManifest> {
    if test_count >= ids.len() {
        return Err(config_err!(
            "test_count {test_count} leaves nothing to train on from {} samples",
            ids.len()
        ));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(config_err!("train fraction {train_fraction} must lie in (0, 1)"));
    }
    let mut shuffled = ids.to_vec();
    shuffled.sort_unstable();
    shuffled.dedup();
    if shuffled.len() != ids.len() {
        return Err(config_err!("duplicate sample ids"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let (test, rest) = shuffled.split_at(test_count);
    let n_train = ((rest.len() as f64) * train_fraction + 1e-9).floor() as usize;
    let (train, validation) = rest.split_at(n_train);
    let m = SplitManifest {
        seed,
        train: sorted(train),
        validation: sorted(validation),
        test: sorted(test),
    };
    for split in Split::ALL {
        if m.ids(split).is_empty() {
            return Err(config_err!(
                "{split} split is empty ({} samples, test_count {test_count}, fraction {train_fraction})",
                ids.len()
            ));
        }
    }
    Ok(m)
}

fn sorted(ids: &[u32]) -> Vec<u32> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}
