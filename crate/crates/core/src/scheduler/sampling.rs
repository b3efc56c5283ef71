use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ScheduleError;
use crate::protocol::{Corpus, CorpusRole, Protocol};

/// Normalized op-type frequency vector per protocol, over the corpus's
/// sorted op types.
pub fn op_frequency_features(protocols: &[&Protocol], types: &[&str]) -> Vec<Vec<f64>> {
    protocols
        .iter()
        .map(|p| {
            let mut v = vec![0.0; types.len()];
            for op in &p.operations {
                let i = types.binary_search(&op.op_type.as_str()).expect("type from corpus");
                v[i] += 1.0;
            }
            let n = p.operations.len().max(1) as f64;
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Nearest medoid per point; ties go to the earlier medoid in name order.
fn assign(dist: &[Vec<f64>], medoids: &[usize]) -> Vec<usize> {
    let mut sorted = medoids.to_vec();
    sorted.sort_unstable();
    (0..dist.len())
        .map(|i| {
            sorted
                .iter()
                .copied()
                .min_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)))
                .expect("at least one medoid")
        })
        .collect()
}

fn total_cost(dist: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..dist.len()).map(|i| medoids.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min)).sum()
}

/// `m` representative protocols: medoids of a k-medoids clustering of
/// op-frequency vectors under L1 distance. Returned in name order.
pub fn sample_representatives(c: &Corpus, m: usize, seed: u64) -> Result<Corpus, ScheduleError> {
    let n = c.len();
    if m < 1 || m > n {
        return Err(ScheduleError::SampleOutOfRange { m, n });
    }
    let mut protocols: Vec<&Protocol> = c.protocols.iter().collect();
    protocols.sort_by(|a, b| a.name.cmp(&b.name));
    let types: Vec<&str> = c.op_types().into_iter().collect();
    let feats = op_frequency_features(&protocols, &types);
    let dist: Vec<Vec<f64>> = feats.iter().map(|a| feats.iter().map(|b| l1(a, b)).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut medoids: Vec<usize> = order[..m].to_vec();
    let mut cost = total_cost(&dist, &medoids);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for mi in 0..m {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[mi] = h;
                let c2 = total_cost(&dist, &trial);
                if c2 < cost - 1e-12 && best.is_none_or(|(bc, _, _)| c2 < bc) {
                    best = Some((c2, mi, h));
                }
            }
        }
        match best {
            Some((c2, mi, h)) => {
                medoids[mi] = h;
                cost = c2;
            }
            None => break,
        }
    }
    // Re-center each cluster on its member with the least total distance,
    // ties by name.
    let owner = assign(&dist, &medoids);
    let mut chosen: Vec<usize> = medoids
        .iter()
        .map(|&med| {
            let members: Vec<usize> = (0..n).filter(|&i| owner[i] == med).collect();
            members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ca: f64 = members.iter().map(|&j| dist[a][j]).sum();
                    let cb: f64 = members.iter().map(|&j| dist[b][j]).sum();
                    ca.total_cmp(&cb).then(a.cmp(&b))
                })
                .unwrap_or(med)
        })
        .collect();
    chosen.sort_unstable();
    chosen.dedup();
    let protocols = chosen.iter().map(|&i| protocols[i].clone()).collect();
    Ok(Corpus { role: CorpusRole::ScheduleSubset, protocols })
}
