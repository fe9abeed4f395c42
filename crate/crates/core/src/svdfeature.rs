//! Feature-based matrix factorization.
//!
//! A prediction combines a global mean, linear bias weights over global, user
//! and item features, and the inner product of the user-feature-weighted sum
//! of user factors with the item-feature-weighted sum of item factors:
//!
//! `y = μ + Σ b_g γ + Σ b_u α + Σ b_i β + (Σ p_j α_j)ᵀ(Σ q_j β_j)`.
//!
//! Interaction files hold one example per line:
//! `y | g idx:val ... | u idx:val ... | i idx:val ...`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model_store::format_float;
use crate::rng_from_seed;

pub type SparseFeatures = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub global_feats: SparseFeatures,
    pub user_feats: SparseFeatures,
    pub item_feats: SparseFeatures,
    pub target: f64,
}

/// Sizes of the three feature spaces, fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub global: usize,
    pub user: usize,
    pub item: usize,
}

impl FeatureDims {
    /// Smallest dims covering every index in `data`.
    pub fn covering(data: &[Interaction]) -> Self {
        let max = |f: fn(&Interaction) -> &SparseFeatures| {
            data.iter().flat_map(|x| f(x).iter().map(|p| p.0 + 1)).max().unwrap_or(0)
        };
        Self {
            global: max(|x| &x.global_feats),
            user: max(|x| &x.user_feats),
            item: max(|x| &x.item_feats),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdFeatureModel {
    pub mu: f64,
    pub global_bias: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Row-major `user × factor_dim`.
    pub user_factors: Vec<f64>,
    /// Row-major `item × factor_dim`.
    pub item_factors: Vec<f64>,
    pub factor_dim: usize,
}

impl SvdFeatureModel {
    pub fn zeros(dims: FeatureDims, factor_dim: usize) -> Self {
        Self {
            mu: 0.0,
            global_bias: vec![0.0; dims.global],
            user_bias: vec![0.0; dims.user],
            item_bias: vec![0.0; dims.item],
            user_factors: vec![0.0; dims.user * factor_dim],
            item_factors: vec![0.0; dims.item * factor_dim],
            factor_dim,
        }
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            global: self.global_bias.len(),
            user: self.user_bias.len(),
            item: self.item_bias.len(),
        }
    }

    fn user_row(&self, j: usize) -> &[f64] {
        &self.user_factors[j * self.factor_dim..(j + 1) * self.factor_dim]
    }

    fn item_row(&self, j: usize) -> &[f64] {
        &self.item_factors[j * self.factor_dim..(j + 1) * self.factor_dim]
    }

    pub fn check(&self, x: &Interaction) -> Result<()> {
        let dims = self.dims();
        for (feats, limit, what) in [
            (&x.global_feats, dims.global, "global feature"),
            (&x.user_feats, dims.user, "user feature"),
            (&x.item_feats, dims.item, "item feature"),
        ] {
            if let Some(&(index, _)) = feats.iter().find(|f| f.0 >= limit) {
                return Err(Error::OutOfRange { what, index, limit });
            }
            if feats.iter().any(|f| !f.1.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite {what} value")));
            }
        }
        Ok(())
    }

    /// Returns the prediction plus the aggregated user and item factor
    /// vectors.
    fn forward(&self, x: &Interaction) -> (f64, Vec<f64>, Vec<f64>) {
        let mut y = self.mu;
        y += x.global_feats.iter().map(|&(j, g)| self.global_bias[j] * g).sum::<f64>();
        y += x.user_feats.iter().map(|&(j, a)| self.user_bias[j] * a).sum::<f64>();
        y += x.item_feats.iter().map(|&(j, b)| self.item_bias[j] * b).sum::<f64>();
        let mut pu = vec![0.0; self.factor_dim];
        for &(j, a) in &x.user_feats {
            pu.iter_mut().zip(self.user_row(j)).for_each(|(s, p)| *s += p * a);
        }
        let mut qi = vec![0.0; self.factor_dim];
        for &(j, b) in &x.item_feats {
            qi.iter_mut().zip(self.item_row(j)).for_each(|(s, q)| *s += q * b);
        }
        y += pu.iter().zip(&qi).map(|(a, b)| a * b).sum::<f64>();
        (y, pu, qi)
    }

    pub fn predict(&self, x: &Interaction) -> Result<f64> {
        self.check(x)?;
        Ok(self.forward(x).0)
    }

    /// Plain-text model: a header line
    /// `factor_dim n_global n_user n_item mu`, then one line per bias array
    /// (`g`, `u`, `i`) and one line per factor row (`p j ...`, `q j ...`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let dims = self.dims();
        let join = |v: &[f64]| v.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(" ");
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.factor_dim,
            dims.global,
            dims.user,
            dims.item,
            format_float(self.mu)
        );
        for (tag, bias) in [("g", &self.global_bias), ("u", &self.user_bias), ("i", &self.item_bias)] {
            out.push_str(tag);
            if !bias.is_empty() {
                out.push(' ');
                out.push_str(&join(bias));
            }
            out.push('\n');
        }
        for j in 0..dims.user {
            out.push_str(&format!("p {j} {}\n", join(self.user_row(j))));
        }
        for j in 0..dims.item {
            out.push_str(&format!("q {j} {}\n", join(self.item_row(j))));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::malformed(path, line + 1, msg);
        let (_, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let [fd, g, u, i, mu] = h[..] else {
            return Err(bad(0, "header must be `factor_dim n_global n_user n_item mu`"));
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(0, "bad header integer"));
        let dims = FeatureDims {
            global: int(g)?,
            user: int(u)?,
            item: int(i)?,
        };
        let mut model = Self::zeros(dims, int(fd)?);
        model.mu = mu.parse().map_err(|_| bad(0, "bad mu"))?;
        let floats = |line: usize, fields: &[&str], n: usize| -> Result<Vec<f64>> {
            if fields.len() != n {
                return Err(bad(line, &format!("expected {n} values, found {}", fields.len())));
            }
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(line, "bad number")))
                .collect()
        };
        for (tag, n) in [("g", dims.global), ("u", dims.user), ("i", dims.item)] {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated model"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.first() != Some(&tag) {
                return Err(bad(ln, &format!("expected `{tag}` line")));
            }
            let v = floats(ln, &f[1..], n)?;
            match tag {
                "g" => model.global_bias = v,
                "u" => model.user_bias = v,
                _ => model.item_bias = v,
            }
        }
        let fdim = model.factor_dim;
        for (tag, rows) in [("p", dims.user), ("q", dims.item)] {
            for j in 0..rows {
                let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated model"))?;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() < 2 || f[0] != tag || f[1].parse::<usize>().ok() != Some(j) {
                    return Err(bad(ln, &format!("expected `{tag} {j}` row")));
                }
                let v = floats(ln, &f[2..], fdim)?;
                let target = if tag == "p" {
                    &mut model.user_factors
                } else {
                    &mut model.item_factors
                };
                target[j * fdim..(j + 1) * fdim].copy_from_slice(&v);
            }
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdTrainConfig {
    pub factor_dim: usize,
    pub epochs: usize,
    pub step_size: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SvdTrainConfig {
    fn default() -> Self {
        Self {
            factor_dim: 8,
            epochs: 100,
            step_size: 0.01,
            l2: 0.004,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvdTrainOutput {
    pub model: SvdFeatureModel,
    /// Training RMSE measured after each epoch.
    pub epoch_rmse: Vec<f64>,
}

pub fn rmse(model: &SvdFeatureModel, data: &[Interaction]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("no interactions".into()));
    }
    let mut se = 0.0;
    for x in data {
        let e = model.predict(x)? - x.target;
        se += e * e;
    }
    Ok((se / data.len() as f64).sqrt())
}

/// Per-example SGD on squared error with L2 on every learned parameter.
/// `μ` is fixed to the mean target; factors start from `N(0, 0.01)`; the
/// visiting order is reshuffled every epoch.
pub fn svdf_train(data: &[Interaction], dims: FeatureDims, cfg: &SvdTrainConfig) -> Result<SvdTrainOutput> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("training data is empty".into()));
    }
    if !(cfg.step_size > 0.0 && cfg.step_size.is_finite()) {
        return Err(Error::InvalidParameter("step size must be positive".into()));
    }
    if cfg.l2 < 0.0 {
        return Err(Error::InvalidParameter("l2 must be non-negative".into()));
    }
    let mut model = SvdFeatureModel::zeros(dims, cfg.factor_dim);
    for x in data {
        model.check(x)?;
    }
    let mut rng = rng_from_seed(cfg.seed);
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    model.user_factors.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
    model.item_factors.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
    model.mu = data.iter().map(|x| x.target).sum::<f64>() / data.len() as f64;

    let (lr, l2, fd) = (cfg.step_size, cfg.l2, cfg.factor_dim);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_rmse = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &n in &order {
            let x = &data[n];
            let (y, pu, qi) = model.forward(x);
            let err = y - x.target;
            for &(j, g) in &x.global_feats {
                model.global_bias[j] -= lr * (err * g + l2 * model.global_bias[j]);
            }
            for &(j, a) in &x.user_feats {
                model.user_bias[j] -= lr * (err * a + l2 * model.user_bias[j]);
                let row = &mut model.user_factors[j * fd..(j + 1) * fd];
                for d in 0..fd {
                    row[d] -= lr * (err * a * qi[d] + l2 * row[d]);
                }
            }
            for &(j, b) in &x.item_feats {
                model.item_bias[j] -= lr * (err * b + l2 * model.item_bias[j]);
                let row = &mut model.item_factors[j * fd..(j + 1) * fd];
                for d in 0..fd {
                    row[d] -= lr * (err * b * pu[d] + l2 * row[d]);
                }
            }
        }
        epoch_rmse.push(rmse(&model, data)?);
    }
    Ok(SvdTrainOutput { model, epoch_rmse })
}

/// A candidate item for one user: the interaction to score, the item id used
/// to break ties, and its relevance label.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub item: usize,
    pub interaction: Interaction,
    pub relevance: f64,
}

/// Mean Precision@n (relevance > 0 counts as relevant) and NDCG@n with
/// `DCG = Σ rel_r / log2(r + 1)`, ranking each user's candidates by
/// predicted score, ties by ascending item id.
pub fn evaluate_ranking(model: &SvdFeatureModel, per_user: &[Vec<Candidate>], n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if per_user.is_empty() {
        return Err(Error::InvalidParameter("no users to evaluate".into()));
    }
    let mut precision = 0.0;
    let mut ndcg = 0.0;
    for (user, cands) in per_user.iter().enumerate() {
        if cands.len() < n {
            return Err(Error::TooFewCandidates {
                user,
                have: cands.len(),
                need: n,
            });
        }
        let mut scored: Vec<(f64, usize, f64)> = cands
            .iter()
            .map(|c| Ok((model.predict(&c.interaction)?, c.item, c.relevance)))
            .collect::<Result<_>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let ranked: Vec<f64> = scored.iter().map(|s| s.2).collect();
        let (p, g) = precision_ndcg_at(&ranked, n);
        precision += p;
        ndcg += g;
    }
    Ok((precision / per_user.len() as f64, ndcg / per_user.len() as f64))
}

/// Precision@n and NDCG@n for relevances listed in ranked order.
pub fn precision_ndcg_at(ranked_relevance: &[f64], n: usize) -> (f64, f64) {
    let dcg = |rels: &[f64]| -> f64 {
        rels.iter()
            .take(n)
            .enumerate()
            .map(|(r, &rel)| rel / ((r + 2) as f64).log2())
            .sum()
    };
    let hits = ranked_relevance.iter().take(n).filter(|&&r| r > 0.0).count();
    let mut ideal = ranked_relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal);
    let ndcg = if idcg > 0.0 { dcg(ranked_relevance) / idcg } else { 0.0 };
    (hits as f64 / n as f64, ndcg)
}

fn parse_section(section: &str, path: &Path, line: usize) -> Result<SparseFeatures> {
    section
        .split_whitespace()
        .map(|cell| {
            let (i, v) = cell
                .split_once(':')
                .ok_or_else(|| Error::malformed(path, line, format!("bad feature `{cell}`")))?;
            let i = i
                .parse::<usize>()
                .map_err(|_| Error::malformed(path, line, format!("bad index `{i}`")))?;
            let v = v
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::malformed(path, line, format!("bad value `{v}`")))?;
            Ok((i, v))
        })
        .collect()
}

/// Parses one interaction line. Section tags (`g`, `u`, `i`) are optional.
pub fn parse_interaction(line: &str, path: &Path, lineno: usize) -> Result<Interaction> {
    let parts: Vec<&str> = line.split('|').collect();
    if parts.len() != 4 {
        return Err(Error::malformed(path, lineno, "expected `y | g ... | u ... | i ...`"));
    }
    let target = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::malformed(path, lineno, format!("bad target `{}`", parts[0].trim())))?;
    let body = |s: &str, tag: &str| -> Result<SparseFeatures> {
        let s = s.trim();
        let s = s.strip_prefix(tag).filter(|r| r.is_empty() || r.starts_with(' ')).unwrap_or(s);
        parse_section(s, path, lineno)
    };
    Ok(Interaction {
        target,
        global_feats: body(parts[1], "g")?,
        user_feats: body(parts[2], "u")?,
        item_feats: body(parts[3], "i")?,
    })
}

pub fn format_interaction(x: &Interaction) -> String {
    let sec = |f: &SparseFeatures| {
        f.iter()
            .map(|(i, v)| format!(" {i}:{v}"))
            .collect::<String>()
    };
    format!(
        "{} | g{} | u{} | i{}",
        x.target,
        sec(&x.global_feats),
        sec(&x.user_feats),
        sec(&x.item_feats)
    )
}

pub fn load_interactions(path: &Path) -> Result<Vec<Interaction>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_interaction(l, path, i + 1))
        .collect()
}
