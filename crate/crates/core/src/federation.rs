//! Non-i.i.d. data partitioning across clients and the communication/oracle
//! ledger formulas.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionScheme {
    Iid,
    /// Whole label groups go to one client each (group `g` -> client `g mod K`).
    ByGroup,
    /// Per-class client proportions drawn from `Dirichlet(beta)`.
    Dirichlet {
        beta: f64,
    },
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionScheme::Iid => write!(f, "iid"),
            PartitionScheme::ByGroup => write!(f, "group"),
            PartitionScheme::Dirichlet { beta } => write!(f, "dirichlet:{beta}"),
        }
    }
}

impl FromStr for PartitionScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(PartitionScheme::Iid),
            "group" | "bygroup" => Ok(PartitionScheme::ByGroup),
            _ => {
                let beta = s
                    .strip_prefix("dirichlet:")
                    .and_then(|b| b.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown partition scheme '{s}'")))?;
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "dirichlet beta must be positive, got {beta}"
                    )));
                }
                Ok(PartitionScheme::Dirichlet { beta })
            }
        }
    }
}

/// Assignment of dataset items to clients. Lists are disjoint, cover
/// `0..n_items`, are sorted, and none is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub scheme: PartitionScheme,
    pub assignment: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn num_clients(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_items(&self) -> usize {
        self.assignment.iter().map(Vec::len).sum()
    }

    /// Text listing, one `client <k>: i j ...` line per client.
    pub fn to_listing(&self) -> String {
        let mut out = format!("# scheme={}\n", self.scheme);
        for (k, items) in self.assignment.iter().enumerate() {
            out.push_str(&format!("client {k}:"));
            for i in items {
                out.push_str(&format!(" {i}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_listing(text: &str) -> Result<Self> {
        let mut scheme = None;
        let mut assignment = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(s) = line.strip_prefix("# scheme=") {
                scheme = Some(s.parse()?);
                continue;
            }
            let bad = || Error::Parse(format!("bad listing line {}: '{line}'", lineno + 1));
            let rest = line.strip_prefix("client ").ok_or_else(bad)?;
            let (k, items) = rest.split_once(':').ok_or_else(bad)?;
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            if k != assignment.len() {
                return Err(bad());
            }
            let items = items
                .split_whitespace()
                .map(|i| i.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            assignment.push(items);
        }
        Ok(PartitionPlan {
            scheme: scheme.ok_or_else(|| Error::Parse("listing has no scheme line".into()))?,
            assignment,
        })
    }
}

/// Split `n_items` across `k` clients.
///
/// `labels` is required (one per item) for `ByGroup` and `Dirichlet`; it may
/// be empty for `Iid`.
pub fn partition(
    n_items: usize,
    labels: &[usize],
    k: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<PartitionPlan> {
    if k == 0 {
        return Err(Error::InvalidArgument("client count must be at least 1".into()));
    }
    if k > n_items {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n_items} items across {k} clients"
        )));
    }
    if !matches!(scheme, PartitionScheme::Iid) && labels.len() != n_items {
        return Err(Error::DimensionMismatch {
            expected: n_items,
            found: labels.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut assignment = match scheme {
        PartitionScheme::Iid => {
            let mut idx: Vec<usize> = (0..n_items).collect();
            idx.shuffle(&mut rng);
            let base = n_items / k;
            let extra = n_items % k;
            let mut out = Vec::with_capacity(k);
            let mut start = 0;
            for c in 0..k {
                let len = base + usize::from(c < extra);
                out.push(idx[start..start + len].to_vec());
                start += len;
            }
            out
        }
        PartitionScheme::ByGroup => {
            let groups = group_items(labels);
            if groups.len() < k {
                return Err(Error::InvalidArgument(format!(
                    "{} groups cannot cover {k} clients",
                    groups.len()
                )));
            }
            let mut out = vec![Vec::new(); k];
            for (g, items) in groups.into_values().enumerate() {
                out[g % k].extend(items);
            }
            out
        }
        PartitionScheme::Dirichlet { beta } => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "dirichlet beta must be positive, got {beta}"
                )));
            }
            let gamma =
                Gamma::new(beta, 1.0).map_err(|e| Error::InvalidArgument(format!("dirichlet beta {beta}: {e}")))?;
            let mut out = vec![Vec::new(); k];
            for (_, mut items) in group_items(labels) {
                items.shuffle(&mut rng);
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = draws.iter().sum();
                let n_c = items.len();
                let mut cum = 0.0;
                let mut start = 0;
                for (c, d) in draws.iter().enumerate() {
                    cum += d / total;
                    let end = if c + 1 == k {
                        n_c
                    } else {
                        ((cum * n_c as f64).round() as usize).clamp(start, n_c)
                    };
                    out[c].extend_from_slice(&items[start..end]);
                    start = end;
                }
            }
            // every client must own at least one item
            while let Some(empty) = out.iter().position(Vec::is_empty) {
                let donor = (0..k).max_by_key(|&c| (out[c].len(), std::cmp::Reverse(c))).unwrap();
                let pick = rng.random_range(0..out[donor].len());
                let item = out[donor].swap_remove(pick);
                out[empty].push(item);
            }
            out
        }
    };
    for items in &mut assignment {
        items.sort_unstable();
    }
    Ok(PartitionPlan { scheme, assignment })
}

fn group_items(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Lloyd's k-means on `points`, returning a group id in `0..n_groups` for each
/// point. Every group is nonempty when `points.len() >= n_groups`.
pub fn cluster_groups(points: &[Vector], n_groups: usize, seed: u64) -> Result<Vec<usize>> {
    if n_groups == 0 || points.len() < n_groups {
        return Err(Error::InvalidArgument(format!(
            "cannot form {n_groups} groups from {} points",
            points.len()
        )));
    }
    let dim = points[0].dim();
    let mut rng = rng::seeded(seed);

    // k-means++ seeding
    let mut centers: Vec<Vector> = vec![points[rng.random_range(0..points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| p.dist_sq(&centers[0])).collect();
    while centers.len() < n_groups {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(p.dist_sq(&centers[centers.len() - 1]));
        }
    }

    let mut assign = vec![0usize; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..n_groups)
                .min_by(|&a, &b| p.dist_sq(&centers[a]).total_cmp(&p.dist_sq(&centers[b])))
                .unwrap();
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // refill empty groups with the point farthest from its center
        let mut counts = vec![0usize; n_groups];
        for &a in &assign {
            counts[a] += 1;
        }
        for g in 0..n_groups {
            if counts[g] == 0 {
                let far = (0..points.len())
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&a, &b| {
                        points[a]
                            .dist_sq(&centers[assign[a]])
                            .total_cmp(&points[b].dist_sq(&centers[assign[b]]))
                    })
                    .expect("some group has more than one point");
                counts[assign[far]] -= 1;
                assign[far] = g;
                counts[g] = 1;
                changed = true;
            }
        }
        for (g, center) in centers.iter_mut().enumerate() {
            *center = crate::linalg::mean_of(points.iter().zip(&assign).filter(|(_, &a)| a == g).map(|(p, _)| p), dim);
        }
        if !changed {
            break;
        }
    }
    Ok(assign)
}

/// Communication rounds of a `T`-step run that syncs every `q` steps.
pub fn expected_comm_rounds(t: u64, q: u64) -> u64 {
    assert!(t >= 1 && q >= 1, "T and q must be at least 1");
    t / q
}

/// Per-client oracle count of a full run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SfoLedger {
    /// `2q + 2(T - floor(T/q))`: sync steps draw no samples.
    pub exact: u64,
    /// The rounded `2q + 2T` figure.
    pub rounded: u64,
}

pub fn expected_sfo(t: u64, q: u64) -> SfoLedger {
    assert!(t >= 1 && q >= 1, "T and q must be at least 1");
    SfoLedger {
        exact: 2 * q + 2 * (t - t / q),
        rounded: 2 * q + 2 * t,
    }
}
