//! Seeded synthetic credit-style data with label bias against one group.
//!
//! Clean labels come from a fixed linear rule on Gaussian features, and the
//! sensitive attribute shifts the first feature and leaks through a noisy
//! proxy column. In the training split a fraction of unprivileged positives
//! (`a = 0`, `y = 1`) are relabeled negative, so a model fitted on it
//! under-serves that group. Validation and test labels stay clean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    standardize, Dataset, GroupCounts, GroupPositiveRates, LoadedSplits, Role, SplitGroupCounts,
    SplitMetadata, SplitSizes,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Gaussian features besides the group proxy.
    pub n_features: usize,
    /// Share of samples with `a = 1`.
    pub privileged_share: f64,
    /// Probability that an unprivileged training positive is relabeled 0.
    pub label_bias: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_train: 600,
            n_val: 200,
            n_test: 200,
            n_features: 12,
            privileged_share: 0.7,
            label_bias: 0.35,
            seed: 42,
        }
    }
}

/// Raw, unstandardized rows in generation order: train, then val, then test.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub sensitive: Vec<u8>,
    pub roles: Vec<Role>,
}

impl SynthTable {
    /// CSV with feature columns, then `group` and `label`.
    pub fn to_csv(&self) -> String {
        let mut out = self.feature_names.join(",");
        out.push_str(",group,label\n");
        for ((r, y), a) in self.rows.iter().zip(&self.labels).zip(&self.sensitive) {
            for v in r {
                out.push_str(&v.to_string());
                out.push(',');
            }
            out.push_str(&format!("{a},{y}\n"));
        }
        out
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthTable> {
    if cfg.n_features < 2 {
        return Err(Error::Config("synthetic data needs at least 2 features".into()));
    }
    for (name, p) in [("privileged_share", cfg.privileged_share), ("label_bias", cfg.label_bias)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.n_features;
    // Fixed rule with decaying weights; the intercept gives roughly 70%
    // positives.
    let weights: Vec<f64> = (0..d).map(|j| 1.5 / (1.0 + j as f64)).collect();
    let mut names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    names.push("group_proxy".into());

    let total = cfg.n_train + cfg.n_val + cfg.n_test;
    let mut table = SynthTable {
        feature_names: names,
        rows: Vec::with_capacity(total),
        labels: Vec::with_capacity(total),
        sensitive: Vec::with_capacity(total),
        roles: Vec::with_capacity(total),
    };
    for i in 0..total {
        let role = if i < cfg.n_train {
            Role::Train
        } else if i < cfg.n_train + cfg.n_val {
            Role::Val
        } else {
            Role::Test
        };
        let a = u8::from(rng.gen_bool(cfg.privileged_share));
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        x[0] += if a == 1 { 0.3 } else { -0.3 };
        let noise: f64 = StandardNormal.sample(&mut rng);
        let z = 0.9 + x.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() + 0.7 * noise;
        let mut y = u8::from(z > 0.0);
        let flip = rng.gen_bool(cfg.label_bias);
        if role == Role::Train && a == 0 && y == 1 && flip {
            y = 0;
        }
        let proxy_noise: f64 = StandardNormal.sample(&mut rng);
        x.push(f64::from(a) + 0.5 * proxy_noise);
        table.rows.push(x);
        table.labels.push(y);
        table.sensitive.push(a);
        table.roles.push(role);
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct SynthSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Generates, splits and standardizes with training statistics.
pub fn biased_splits(cfg: &SynthConfig) -> Result<SynthSplits> {
    let s = prepared(cfg)?;
    Ok(SynthSplits {
        train: s.train,
        val: s.val,
        test: s.test,
    })
}

/// Like [`biased_splits`], with the metadata of a prepared dataset.
pub fn prepared(cfg: &SynthConfig) -> Result<LoadedSplits> {
    let table = generate(cfg)?;
    let d = table.feature_names.len();
    let pick = |role: Role| -> (Vec<f64>, Vec<u8>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut a = Vec::new();
        for i in 0..table.rows.len() {
            if table.roles[i] == role {
                x.extend_from_slice(&table.rows[i]);
                y.push(table.labels[i]);
                a.push(table.sensitive[i]);
            }
        }
        (x, y, a)
    };
    let (xt, yt, at) = pick(Role::Train);
    let (xv, yv, av) = pick(Role::Val);
    let (xs, ys, as_) = pick(Role::Test);
    let (xt, others, stats) = standardize(&xt, &[&xv, &xs], d)?;
    let mk = |role, x, y, a| Dataset::new(role, table.feature_names.clone(), x, y, a);
    let train = mk(Role::Train, xt, yt, at)?;
    let val = mk(Role::Val, others[0].clone(), yv, av)?;
    let test = mk(Role::Test, others[1].clone(), ys, as_)?;
    for s in [&train, &val, &test] {
        if !s.is_empty() {
            s.check_subgroups()?;
        }
    }
    let mut all = GroupCounts::default();
    for (&y, &a) in table.labels.iter().zip(&table.sensitive) {
        all.0[a as usize][y as usize] += 1;
    }
    let metadata = SplitMetadata {
        dataset: "synthetic".into(),
        seed: cfg.seed,
        sizes: SplitSizes {
            train: train.len(),
            val: val.len(),
            test: test.len(),
        },
        n_features: d,
        feature_names: table.feature_names.clone(),
        group_positive_rates: GroupPositiveRates {
            a1: all.positive_rate(1),
            a0: all.positive_rate(0),
        },
        group_counts: SplitGroupCounts {
            train: train.group_counts(),
            val: val.group_counts(),
            test: test.group_counts(),
        },
        rows_total: table.rows.len(),
        rows_dropped: 0,
        dropped_columns: Vec::new(),
        suggested_l2: None,
        standardization: stats,
    };
    Ok(LoadedSplits {
        train,
        val,
        test,
        metadata,
    })
}
