// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// How a selected slice marks regions as covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coverage {
    /// Every region whose maximum over all candidates this slice attains.
    #[default]
    AttainedMax,
    /// Only the region it was selected for.
    WonOnly,
}

/// Candidates × regions table of predicted worst IR drop, V.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub regions: usize,
    pub slice_ids: Vec<usize>,
    /// Row per candidate, in `slice_ids` order.
    pub rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(regions: usize, slice_ids: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if slice_ids.len() != rows.len() || rows.iter().any(|r| r.len() != regions) {
            return Err(Error::Profiler("score table rows do not match its shape".into()));
        }
        let mut ids = slice_ids.clone();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Profiler("duplicate slice in score table".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Profiler("non-finite score".into()));
        }
        Ok(Self {
            regions,
            slice_ids,
            rows,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.regions == 0
    }

    /// Maximum of each region over all candidates.
    pub fn column_max(&self) -> Vec<f64> {
        (0..self.regions)
            .map(|r| self.rows.iter().map(|row| row[r]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// One selected `(slice, region)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub slice_id: usize,
    pub region: usize,
    /// V.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub picks: Vec<Pick>,
    /// Full score row of each picked slice, V.
    pub maps: Vec<Vec<f64>>,
    pub covered: Vec<bool>,
}

/// Greedy coverage ranking. Pairs are visited by score desc, slice id asc,
/// region asc; a pair is taken when its region is uncovered and its slice is
/// new. Stops after `n_o` slices or once every region is covered.
pub fn rank_with_coverage(table: &ScoreTable, n_o: usize, coverage: Coverage) -> Result<Ranking> {
    if table.is_empty() {
        return Err(Error::Profiler("empty score table".into()));
    }
    let col_max = table.column_max();
    let mut pairs: Vec<(usize, usize)> = (0..table.rows.len())
        .flat_map(|c| (0..table.regions).map(move |r| (c, r)))
        .collect();
    pairs.sort_by(|&(c1, r1), &(c2, r2)| {
        table.rows[c2][r2]
            .total_cmp(&table.rows[c1][r1])
            .then(table.slice_ids[c1].cmp(&table.slice_ids[c2]))
            .then(r1.cmp(&r2))
    });
    let mut covered = vec![false; table.regions];
    let mut chosen = vec![false; table.rows.len()];
    let mut ranking = Ranking {
        picks: Vec::new(),
        maps: Vec::new(),
        covered: Vec::new(),
    };
    for (c, r) in pairs {
        if ranking.picks.len() >= n_o || covered.iter().all(|&v| v) {
            break;
        }
        if covered[r] || chosen[c] {
            continue;
        }
        chosen[c] = true;
        covered[r] = true;
        if coverage == Coverage::AttainedMax {
            for (k, cov) in covered.iter_mut().enumerate() {
                if table.rows[c][k] == col_max[k] {
                    *cov = true;
                }
            }
        }
        ranking.picks.push(Pick {
            slice_id: table.slice_ids[c],
            region: r,
            score: table.rows[c][r],
        });
        ranking.maps.push(table.rows[c].clone());
    }
    ranking.covered = covered;
    Ok(ranking)
}
