//! Offline feature-selection analysis: Fisher scores, two-sample
//! Kolmogorov–Smirnov screening across user pairs, and Pearson-correlation
//! redundancy pruning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Significance level of each pairwise KS test.
    pub alpha: f64,
    /// Pairs with |r| at or above this are redundant.
    pub corr_threshold: f64,
    /// A feature is dropped when strictly more than this fraction of its
    /// pairwise p-values exceed `alpha`.
    pub drop_rule: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 0.05,
            corr_threshold: 0.85,
            drop_rule: 0.5,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation("alpha", "must lie in (0, 1)"));
        }
        if !(self.corr_threshold > 0.0 && self.corr_threshold <= 1.0) {
            return Err(Error::validation("corr_threshold", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.drop_rule) {
            return Err(Error::validation("drop_rule", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Values of one feature, grouped by user.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    pub name: String,
    per_user: Vec<Vec<f64>>,
}

impl LabeledFeatureSet {
    pub fn new(name: impl Into<String>, per_user: Vec<Vec<f64>>) -> Result<Self> {
        if per_user.len() < 2 {
            return Err(Error::validation("users", "need at least 2 users"));
        }
        if let Some(i) = per_user.iter().position(|u| u.len() < 2) {
            return Err(Error::validation("users", format!("user {i} has fewer than 2 values")));
        }
        if per_user.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("values", "non-finite feature value"));
        }
        Ok(LabeledFeatureSet {
            name: name.into(),
            per_user,
        })
    }

    pub fn users(&self) -> &[Vec<f64>] {
        &self.per_user
    }
}

/// Between-class over within-class scatter:
/// `Σ n_c (μ_c − μ)² / Σ n_c σ_c²` with population variances.
///
/// Zero within-class scatter yields `+inf` when the class means differ and 0
/// when they coincide.
pub fn fisher_score(set: &LabeledFeatureSet) -> f64 {
    let total: usize = set.per_user.iter().map(Vec::len).sum();
    let grand = set.per_user.iter().flatten().sum::<f64>() / total as f64;
    let (mut between, mut within) = (0.0, 0.0);
    for class in &set.per_user {
        let n = class.len() as f64;
        let m = stats::mean(class);
        between += n * (m - grand) * (m - grand);
        within += n * stats::variance(class);
    }
    if within == 0.0 {
        return if between == 0.0 { 0.0 } else { f64::INFINITY };
    }
    between / within
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// Largest vertical distance between the two empirical CDFs.
    pub d: f64,
    pub p: f64,
}

/// Two-sample KS statistic `D`, computed over the pooled sample points.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // Once one sample is exhausted its ECDF is 1; the other's can only rise
    // towards 1, so the gap never grows past the last checked point.
    d
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form of the CDF converges fast for small λ.
        let k = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let e = -std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (m * m * e).exp()
            })
            .sum::<f64>()
            * k;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample KS test with the asymptotic p-value at effective size
/// `n_a·n_b/(n_a+n_b)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::validation("samples", "each sample needs at least 2 values"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::validation("samples", "non-finite value"));
    }
    let d = ks_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let en = (na * nb / (na + nb)).sqrt();
    let p = if d == 0.0 { 1.0 } else { kolmogorov_survival(en * d) };
    Ok(KsResult { d, p })
}

/// p-values of the KS test for every unordered pair of users.
pub fn ks_pairwise_pvalues(set: &LabeledFeatureSet) -> Vec<f64> {
    let users = set.users();
    let mut out = Vec::with_capacity(users.len() * (users.len() - 1) / 2);
    for i in 0..users.len() {
        for j in i + 1..users.len() {
            // Sizes and finiteness were validated by LabeledFeatureSet::new.
            out.push(ks_two_sample(&users[i], &users[j]).map(|r| r.p).unwrap_or(1.0));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenVerdict {
    pub feature: String,
    pub keep: bool,
    /// Fraction of pairwise p-values above alpha.
    pub nonsignificant_fraction: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Drops features whose pairwise KS tests are mostly non-significant.
pub fn ks_feature_screen(
    features: &[(String, Vec<f64>)],
    config: &SelectionConfig,
) -> Vec<ScreenVerdict> {
    features
        .iter()
        .map(|(name, pvalues)| {
            let above = pvalues.iter().filter(|&&p| p > config.alpha).count();
            let frac = if pvalues.is_empty() {
                0.0
            } else {
                above as f64 / pvalues.len() as f64
            };
            ScreenVerdict {
                feature: name.clone(),
                keep: frac <= config.drop_rule,
                nonsignificant_fraction: frac,
                q1: stats::quantile(pvalues, 0.25),
                median: stats::quantile(pvalues, 0.5),
                q3: stats::quantile(pvalues, 0.75),
            }
        })
        .collect()
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension("pearson inputs", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::validation("pearson inputs", "need at least 2 values"));
    }
    let ma = stats::mean(a);
    let mb = stats::mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Averages per-user correlation matrices. `per_user[u][f]` is the column of
/// feature `f` for user `u`. Pairs undefined for a user (a constant column)
/// are left out of that pair's average; a pair undefined for every user
/// averages to 0.
pub fn mean_correlation_matrix(per_user: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = per_user.first() else {
        return Err(Error::validation("users", "no users"));
    };
    let m = first.len();
    if per_user.iter().any(|u| u.len() != m) {
        return Err(Error::validation("users", "users have different feature counts"));
    }
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        out[i][i] = 1.0;
        for j in i + 1..m {
            let rs: Vec<f64> = per_user
                .iter()
                .filter_map(|u| pearson(&u[i], &u[j]).ok())
                .collect();
            let r = if rs.is_empty() { 0.0 } else { stats::mean(&rs) };
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

/// Greedy redundancy pruning over a correlation matrix.
///
/// Pairs with `|r| ≥ threshold` are visited from the strongest down (index
/// order breaks ties). When neither member is already dropped, the one with
/// the larger mean |r| to all other features is dropped; on equal means the
/// later index goes. Returns dropped indices in ascending order.
pub fn redundancy_prune(corr: &[Vec<f64>], config: &SelectionConfig) -> Result<Vec<usize>> {
    let m = corr.len();
    for (i, row) in corr.iter().enumerate() {
        if row.len() != m {
            return Err(Error::dimension("correlation row", m, row.len()));
        }
        if (row[i] - 1.0).abs() > 1e-9 {
            return Err(Error::validation("correlation", "diagonal must be 1"));
        }
        for j in 0..m {
            if (row[j] - corr[j][i]).abs() > 1e-9 {
                return Err(Error::validation("correlation", "matrix must be symmetric"));
            }
        }
    }
    let mean_abs: Vec<f64> = (0..m)
        .map(|i| {
            if m < 2 {
                return 0.0;
            }
            (0..m).filter(|&j| j != i).map(|j| corr[i][j].abs()).sum::<f64>() / (m - 1) as f64
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .filter(|&(i, j)| corr[i][j].abs() >= config.corr_threshold)
        .collect();
    pairs.sort_by(|&(a, b), &(c, d)| corr[c][d].abs().total_cmp(&corr[a][b].abs()));

    let mut dropped = vec![false; m];
    for (i, j) in pairs {
        if dropped[i] || dropped[j] {
            continue;
        }
        let victim = if mean_abs[i] > mean_abs[j] { i } else { j };
        dropped[victim] = true;
    }
    Ok((0..m).filter(|&i| dropped[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub feature: String,
    pub fisher_score: f64,
    pub ks: ScreenVerdict,
}

/// Output of the `select` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: SelectionConfig,
    pub features: Vec<FeatureReport>,
    /// Names indexing the rows and columns of `correlation`.
    pub correlation_features: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
    pub dropped_by_ks: Vec<String>,
    pub dropped_by_correlation: Vec<String>,
    pub kept: Vec<String>,
}

/// Runs all three steps over a feature table whose rows carry user ids.
/// Correlation pruning only considers features that survive KS screening.
pub fn analyze(table: &FeatureTable, config: &SelectionConfig) -> Result<SelectionReport> {
    config.validate()?;
    let mut users: Vec<u32> = table.rows.iter().map(|r| r.user_id).collect();
    users.sort_unstable();
    users.dedup();
    let names: Vec<String> = table.layout.iter().map(|s| s.to_string()).collect();
    // columns[u][f]
    let columns: Vec<Vec<Vec<f64>>> = users
        .iter()
        .map(|&u| {
            let rows: Vec<_> = table.rows.iter().filter(|r| r.user_id == u).collect();
            (0..names.len())
                .map(|f| rows.iter().map(|r| r.values[f]).collect())
                .collect()
        })
        .collect();

    let mut features = Vec::with_capacity(names.len());
    for (f, name) in names.iter().enumerate() {
        let set = LabeledFeatureSet::new(
            name.clone(),
            columns.iter().map(|u| u[f].clone()).collect(),
        )?;
        let pvalues = ks_pairwise_pvalues(&set);
        let ks = ks_feature_screen(&[(name.clone(), pvalues)], config).remove(0);
        features.push(FeatureReport {
            feature: name.clone(),
            fisher_score: fisher_score(&set),
            ks,
        });
    }
    let survivors: Vec<usize> = (0..names.len()).filter(|&f| features[f].ks.keep).collect();
    let sub: Vec<Vec<Vec<f64>>> = columns
        .iter()
        .map(|u| survivors.iter().map(|&f| u[f].clone()).collect())
        .collect();
    let correlation = if survivors.is_empty() {
        Vec::new()
    } else {
        mean_correlation_matrix(&sub)?
    };
    let pruned: Vec<usize> = redundancy_prune(&correlation, config)?
        .into_iter()
        .map(|i| survivors[i])
        .collect();
    Ok(SelectionReport {
        config: *config,
        dropped_by_ks: (0..names.len())
            .filter(|f| !features[*f].ks.keep)
            .map(|f| names[f].clone())
            .collect(),
        dropped_by_correlation: pruned.iter().map(|&f| names[f].clone()).collect(),
        kept: survivors
            .iter()
            .filter(|f| !pruned.contains(f))
            .map(|&f| names[f].clone())
            .collect(),
        correlation_features: survivors.iter().map(|&f| names[f].clone()).collect(),
        correlation,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_draws(rng: &mut ChaCha8Rng, mu: f64, n: usize) -> Vec<f64> {
        let d = Normal::new(mu, 1.0).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    #[test]
    fn fisher_identical_classes_is_zero() {
        let set = LabeledFeatureSet::new("c", vec![vec![2.0; 5], vec![2.0; 5]]).unwrap();
        assert_eq!(fisher_score(&set), 0.0);
        let same = LabeledFeatureSet::new("s", vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(fisher_score(&same), 0.0);
    }

    #[test]
    fn fisher_zero_within_scatter_is_infinite() {
        let set = LabeledFeatureSet::new("c", vec![vec![1.0; 3], vec![2.0; 3]]).unwrap();
        assert_eq!(fisher_score(&set), f64::INFINITY);
    }

    #[test]
    fn fisher_matches_closed_form_for_separated_normals() {
        // Closed form: between = n·25 + n·25, within = n·1 + n·1 → 25.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = normal_draws(&mut rng, 0.0, 1000);
        let b = normal_draws(&mut rng, 10.0, 1000);
        let fs = fisher_score(&LabeledFeatureSet::new("x", vec![a, b]).unwrap());
        assert!((fs - 25.0).abs() < 2.0, "fs = {fs}");
    }

    #[test]
    fn labeled_set_validation() {
        assert!(LabeledFeatureSet::new("x", vec![vec![1.0, 2.0]]).is_err());
        assert!(LabeledFeatureSet::new("x", vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0, 3.0, 5.0];
        let r = ks_two_sample(&a, &[5.0, 3.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!((r.d, r.p), (0.0, 1.0));
        let r = ks_two_sample(&[0.0, 0.1, 0.2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.d, 1.0);
        assert!(r.p < 0.1);
        assert!(ks_two_sample(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_handles_ties_across_samples() {
        // ECDFs at 1: 2/3 vs 1/3; at 2: 1 vs 1.
        let d = ks_statistic(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]);
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_survival_reference_points() {
        // Reference values of the Kolmogorov distribution.
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(0.8276) - 0.50).abs() < 1e-3);
        // The two series agree where they hand over.
        let lo = kolmogorov_survival(1.18 - 1e-9);
        let hi = kolmogorov_survival(1.18 + 1e-9);
        assert!((lo - hi).abs() < 1e-8);
    }

    #[test]
    fn screen_rules() {
        let cfg = SelectionConfig::default();
        let v = ks_feature_screen(
            &[("good".into(), vec![0.001; 10]), ("bad".into(), vec![0.9; 10])],
            &cfg,
        );
        assert!(v[0].keep);
        assert!(!v[1].keep);
        // Exactly half non-significant is not "most".
        let half = ks_feature_screen(&[("h".into(), vec![0.001, 0.9])], &cfg);
        assert!(half[0].keep);
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.01).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&x, &[1.0; 50]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&x, &x[..10]).is_err());
    }

    #[test]
    fn pearson_of_independent_draws_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(pearson(&x, &y).unwrap().abs() < 0.05);
    }

    /// Phone accelerometer block of the published feature-correlation table
    /// (Mean, Var, Max, Min, Ran, Peak, Peak_f, Peak2).
    pub(crate) fn published_phone_acc_matrix() -> Vec<Vec<f64>> {
        let upper = [
            [0.39, 0.35, 0.59, 0.27, -0.12, -0.15, 0.31].as_slice(),
            &[0.28, -0.26, 0.90, 0.35, 0.30, 0.41],
            &[-0.22, 0.78, 0.35, 0.23, 0.43],
            &[-0.34, -0.44, -0.43, 0.14],
            &[0.28, 0.47, 0.37],
            &[0.19, 0.03],
            &[0.09],
        ];
        let mut m = vec![vec![0.0; 8]; 8];
        for i in 0..8 {
            m[i][i] = 1.0;
            if i < 7 {
                for (k, &r) in upper[i].iter().enumerate() {
                    let j = i + 1 + k;
                    m[i][j] = r;
                    m[j][i] = r;
                }
            }
        }
        m
    }

    #[test]
    fn prune_drops_ran_from_published_matrix() {
        let dropped = redundancy_prune(&published_phone_acc_matrix(), &SelectionConfig::default())
            .unwrap();
        assert_eq!(dropped, vec![4]);
    }

    #[test]
    fn prune_identity_and_duplicates() {
        let cfg = SelectionConfig::default();
        let id: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        assert!(redundancy_prune(&id, &cfg).unwrap().is_empty());

        let mut dup = id.clone();
        dup[1][2] = 1.0;
        dup[2][1] = 1.0;
        assert_eq!(redundancy_prune(&dup, &cfg).unwrap().len(), 1);

        let mut asym = id;
        asym[0][1] = 0.5;
        assert!(redundancy_prune(&asym, &cfg).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sample() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, 2..40)
        }

        proptest! {
            #[test]
            fn fisher_shift_and_scale_invariant(
                a in sample(), b in sample(), c in sample(),
                shift in -50.0f64..50.0, s in 0.1f64..10.0, neg in any::<bool>(),
            ) {
                let s = if neg { -s } else { s };
                let f0 = fisher_score(&LabeledFeatureSet::new("f", vec![a.clone(), b.clone(), c.clone()]).unwrap());
                let t = |v: &[f64]| v.iter().map(|x| s * x + shift).collect::<Vec<f64>>();
                let f1 = fisher_score(&LabeledFeatureSet::new("f", vec![t(&a), t(&b), t(&c)]).unwrap());
                prop_assume!(f0.is_finite() && f0 < 1e6);
                prop_assert!((f0 - f1).abs() <= 1e-6 * (1.0 + f0));
            }

            #[test]
            fn ks_is_symmetric_and_bounded(a in sample(), b in sample()) {
                let ab = ks_two_sample(&a, &b).unwrap();
                let ba = ks_two_sample(&b, &a).unwrap();
                prop_assert_eq!(ab.d, ba.d);
                prop_assert_eq!(ab.p, ba.p);
                prop_assert!((0.0..=1.0).contains(&ab.d));
            }

            #[test]
            fn ks_zero_iff_same_ecdf(a in sample(), k in 1usize..4) {
                let repeated: Vec<f64> = a.iter().cycle().take(a.len() * k).copied().collect();
                prop_assert_eq!(ks_statistic(&a, &repeated), 0.0);
                let mut moved = a.clone();
                moved[0] += 100.0;
                prop_assert!(ks_statistic(&a, &moved) > 0.0);
            }

            #[test]
            fn pearson_affine_invariant(
                pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
                s in 0.1f64..10.0, shift in -50.0f64..50.0,
            ) {
                let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                let Ok(r0) = pearson(&a, &b) else { return Ok(()) };
                let a2: Vec<f64> = a.iter().map(|x| s * x + shift).collect();
                prop_assert!((r0 - pearson(&a2, &b).unwrap()).abs() <= 1e-9);
            }
        }
    }
}
