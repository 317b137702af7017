//! Rank-normalized split R-hat and bulk effective sample size.
//!
//! Follows Vehtari, Gelman, Simpson, Carpenter and Bürkner (2021): chains
//! are split in half, pooled draws are replaced by normal scores of their
//! ranks, and the classic R-hat / ESS formulas are applied to the scores.
//! ESS uses Geyer's initial monotone sequence on the multi-chain
//! autocorrelation estimate.

use crate::stats::{mean, sample_variance, std_normal_quantile};

/// Splits every chain into two halves, dropping the middle draw of odd chains.
pub fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

/// Replaces pooled draws by `Phi^-1((rank - 3/8) / (S + 1/4))`, averaging tied ranks.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let s = pooled.len() as f64;
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let z = std_normal_quantile((rank - 0.375) / (s + 0.25));
        for &(_, c, k) in &pooled[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains.iter().flat_map(|c| c.first()).next();
    match first {
        None => true,
        Some(&f) => chains.iter().all(|c| c.iter().all(|&x| x == f)),
    }
}

/// Classic potential scale reduction on already-split chains.
fn rhat_of(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    if within <= 0.0 || !within.is_finite() {
        return None;
    }
    let between = n * sample_variance(&means);
    let var_plus = (n - 1.0) / n * within + between / n;
    Some((var_plus / within).sqrt())
}

/// Split R-hat on rank-normalized draws. `None` for constant or too-short chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) || is_constant(chains) {
        return None;
    }
    let split = split_chains(chains);
    rhat_of(&rank_normalize(&split))
}

/// Bulk effective sample size on rank-normalized split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) || is_constant(chains) {
        return None;
    }
    ess_of(&rank_normalize(&split_chains(chains)))
}

/// ESS of the raw draws on split chains; used for Monte Carlo standard errors.
pub fn ess_basic(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) || is_constant(chains) {
        return None;
    }
    ess_of(&split_chains(chains))
}

/// Monte Carlo standard error of the posterior mean.
pub fn mcse_mean(chains: &[Vec<f64>]) -> Option<f64> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let ess = ess_basic(chains)?;
    Some((sample_variance(&pooled) / ess).sqrt())
}

/// Monte Carlo standard error of the posterior variance, from the ESS of
/// the squared deviations.
pub fn mcse_variance(chains: &[Vec<f64>]) -> Option<f64> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = mean(&pooled);
    let sq: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| (x - m).powi(2)).collect()).collect();
    let pooled_sq: Vec<f64> = sq.iter().flatten().copied().collect();
    let ess = ess_basic(&sq)?;
    Some((sample_variance(&pooled_sq) / ess).sqrt())
}

fn autocovariance(chain: &[f64], chain_mean: f64, lag: usize) -> f64 {
    let n = chain.len();
    chain[..n - lag]
        .iter()
        .zip(&chain[lag..])
        .map(|(a, b)| (a - chain_mean) * (b - chain_mean))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess_of(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min()?;
    if n < 4 {
        return None;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;

    let mean_acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };

    let acov0 = mean_acov(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&means);
    }
    if var_plus <= 0.0 || !var_plus.is_finite() {
        return None;
    }
    let rho = |lag: usize| 1.0 - (mean_var - mean_acov(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n + 1];
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[0] = even;
    rho_hat[1] = odd;
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = rho(s + 1);
        odd = rho(s + 2);
        if even + odd >= 0.0 {
            rho_hat[s + 1] = even;
            rho_hat[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_hat[max_s] > 0.0 {
        rho_hat[max_s + 1] = rho_hat[max_s];
    }
    let mut t = 1;
    while t + 3 <= max_s {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    Some((total / tau).min(total * total.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_chain(stream: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = substream(3, Domain::Fixture, 7, stream);
        (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        let chains = vec![normal_chain(0, 10_000, 0.0), normal_chain(1, 10_000, 0.0)];
        let r = split_rhat(&chains).unwrap();
        assert!((0.999..=1.01).contains(&r), "rhat {r}");
        let ess = ess_bulk(&chains).unwrap();
        assert!(ess > 15_000.0 && ess < 20_000.0 * 20_000f64.log10(), "ess {ess}");
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        // rank normalization caps two fully separated chains near 1.66
        let chains = vec![normal_chain(0, 2_000, 0.0), normal_chain(1, 2_000, 10.0)];
        assert!(split_rhat(&chains).unwrap() > 1.5);
    }

    #[test]
    fn constant_chains_are_undefined() {
        let chains = vec![vec![1.5; 100], vec![1.5; 100]];
        assert_eq!(split_rhat(&chains), None);
        assert_eq!(ess_bulk(&chains), None);
        assert_eq!(split_rhat(&[vec![1.0, 2.0]]), None);
    }

    #[test]
    fn autocorrelated_chain_has_reduced_ess() {
        // AR(1) with phi = 0.9 has integrated autocorrelation time 19.
        let mut rng = substream(4, Domain::Fixture, 0, 0);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..20_000)
                    .map(|_| {
                        x = 0.9 * x + rng.sample::<f64, _>(StandardNormal);
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = ess_basic(&chains).unwrap();
        let expected = 80_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.15, "ess {ess} vs {expected}");
    }

    #[test]
    fn rank_normalize_handles_ties() {
        let z = rank_normalize(&[vec![1.0, 1.0, 2.0], vec![3.0, 1.0, 0.0]]);
        assert_eq!(z[0][0], z[0][1]);
        assert_eq!(z[0][0], z[1][1]);
        assert!(z[1][2] < z[0][0] && z[0][0] < z[0][2] && z[0][2] < z[1][0]);
    }
}
