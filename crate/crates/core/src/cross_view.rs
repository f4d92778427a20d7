//! Cross-view matching for one synchronised frame.
//!
//! For every view pair `i < j` the cross-view embeddings of the confirmed
//! tracks form an association matrix `A = E_i E_jᵀ`. Each row goes through a
//! softmax whose temperature adapts to the number of candidate columns,
//! entries at or below `delta_c` are cleared, and the Hungarian solver picks
//! the pairwise matches. Pairwise matches across all view pairs are then
//! reconciled into global identities with a score-ordered union-find.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::assign::{hungarian, Assignment, CostMatrix, GATED};
use crate::error::{Error, Result};
use crate::model::{dot, EmbeddingVec, GlobalIdMap, TrackKey, TrackStatus, ViewId};
use crate::single_view::SingleViewTracker;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub delta_c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Use `min(M^{ij}, (M^{ji})ᵀ)` instead of the one-sided row softmax.
    pub symmetric: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { delta_c: 0.5, epsilon: 0.5, gamma: 0.5, symmetric: false }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_c > 0.0 && self.delta_c < 1.0) {
            return Err(Error::InvalidParameter("delta_c must lie in (0, 1)"));
        }
        adaptive_temperature(self.epsilon, self.gamma, 1).map(|_| ())
    }
}

/// Pairwise similarities between view-`i` rows and view-`j` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix(CostMatrix);

impl AssociationMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        AssociationMatrix(CostMatrix::from_rows(rows))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0.get(r, c)
    }

    pub fn transpose(&self) -> AssociationMatrix {
        AssociationMatrix(self.0.transpose())
    }
}

/// Row-softmaxed, thresholded association scores.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix(CostMatrix);

impl MatchingMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        MatchingMatrix(CostMatrix::from_rows(rows))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0.get(r, c)
    }
}

/// `A = E_i E_jᵀ` over unit-normalised embeddings.
pub fn association_matrix(e_i: &[EmbeddingVec], e_j: &[EmbeddingVec]) -> Result<AssociationMatrix> {
    let ni: Vec<EmbeddingVec> = e_i.iter().map(EmbeddingVec::normalized).collect::<Result<_>>()?;
    let nj: Vec<EmbeddingVec> = e_j.iter().map(EmbeddingVec::normalized).collect::<Result<_>>()?;
    let mut m = CostMatrix::new(ni.len(), nj.len(), 0.0);
    for (r, a) in ni.iter().enumerate() {
        for (c, b) in nj.iter().enumerate() {
            if a.dim() != b.dim() {
                return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
            }
            m.set(r, c, dot(a.as_slice(), b.as_slice()).clamp(-1.0, 1.0));
        }
    }
    Ok(AssociationMatrix(m))
}

/// `τ = (1/ε)·ln[(γ(A_c − 1) + 1) / (1 − γ)]` for `a_c` candidate columns.
pub fn adaptive_temperature(epsilon: f64, gamma: f64, a_c: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter("epsilon must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter("gamma must lie in (0, 1)"));
    }
    if a_c == 0 {
        return Err(Error::InvalidParameter("temperature needs at least one column"));
    }
    let ratio = (gamma * (a_c as f64 - 1.0) + 1.0) / (1.0 - gamma);
    Ok(libm::log(ratio) / epsilon)
}

/// Row softmax of `τ·A`, before any thresholding.
pub fn row_softmax(a: &AssociationMatrix, tau: f64) -> MatchingMatrix {
    let mut m = CostMatrix::new(a.rows(), a.cols(), 0.0);
    for r in 0..a.rows() {
        let max = (0..a.cols()).map(|c| tau * a.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = (0..a.cols()).map(|c| libm::exp(tau * a.get(r, c) - max)).collect();
        let total: f64 = exps.iter().sum();
        for (c, e) in exps.iter().enumerate() {
            m.set(r, c, e / total);
        }
    }
    MatchingMatrix(m)
}

fn threshold(mut m: MatchingMatrix, delta_c: f64) -> MatchingMatrix {
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            if m.0.get(r, c) <= delta_c {
                m.0.set(r, c, 0.0);
            }
        }
    }
    m
}

/// Row softmax at temperature `tau`, then entries `<= delta_c` zeroed.
pub fn matching_matrix(a: &AssociationMatrix, tau: f64, delta_c: f64) -> MatchingMatrix {
    threshold(row_softmax(a, tau), delta_c)
}

/// Both-direction variant: elementwise minimum of `M^{ij}` and `(M^{ji})ᵀ`,
/// each at its own adaptive temperature, then thresholded.
pub fn symmetric_matching_matrix(a: &AssociationMatrix, config: &CvConfig) -> Result<MatchingMatrix> {
    let fwd = row_softmax(a, adaptive_temperature(config.epsilon, config.gamma, a.cols())?);
    let back = row_softmax(&a.transpose(), adaptive_temperature(config.epsilon, config.gamma, a.rows())?);
    let m = CostMatrix::from_fn(a.rows(), a.cols(), |r, c| fwd.get(r, c).min(back.get(c, r)));
    Ok(threshold(MatchingMatrix(m), config.delta_c))
}

/// Maximum-score assignment; zero entries are never matched.
pub fn pair_match(m: &MatchingMatrix) -> Assignment {
    let cost = CostMatrix::from_fn(m.rows(), m.cols(), |r, c| {
        let s = m.get(r, c);
        if s > 0.0 {
            -s
        } else {
            GATED
        }
    });
    hungarian(&cost)
}

/// A pairwise cross-view match with its matching score. `order` is
/// `(view_i, view_j, row)` and breaks score ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub a: TrackKey,
    pub b: TrackKey,
    pub score: f64,
    pub order: (usize, usize, usize),
}

struct Clusters {
    parent: Vec<usize>,
    views: Vec<Vec<ViewId>>,
    gid: Vec<Option<u64>>,
}

impl Clusters {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn can_merge(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.views[ra].iter().any(|v| self.views[rb].contains(v)) {
            return false;
        }
        !matches!((self.gid[ra], self.gid[rb]), (Some(x), Some(y)) if x != y)
    }

    fn merge(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        let moved = core::mem::take(&mut self.views[drop]);
        self.views[keep].extend(moved);
        self.gid[keep] = self.gid[keep].or(self.gid[drop]);
    }
}

/// Reconciles pairwise matches into global identities.
///
/// `live` lists every live confirmed track. Tracks already sharing a global
/// ID start in one cluster. Pairs are merged in descending score (ties by
/// `order`); a merge is rejected when it would put two tracks of one view in
/// a cluster or join two clusters that already hold different global IDs.
/// Clusters still without an ID receive a fresh one. Returns the binding of
/// every live track.
pub fn resolve_global_ids(map: &mut GlobalIdMap, live: &[TrackKey], pairs: &[ScoredPair]) -> BTreeMap<TrackKey, u64> {
    let mut keys: Vec<TrackKey> = live.to_vec();
    keys.sort_unstable();
    keys.dedup();
    let index: BTreeMap<TrackKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    let mut cl = Clusters {
        parent: (0..keys.len()).collect(),
        views: keys.iter().map(|k| alloc::vec![k.view]).collect(),
        gid: keys.iter().map(|k| map.get(k)).collect(),
    };

    let mut first_with_gid: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        if let Some(g) = map.get(k) {
            match first_with_gid.get(&g) {
                Some(&j) => cl.merge(i, j),
                None => {
                    first_with_gid.insert(g, i);
                }
            }
        }
    }

    let mut ordered: Vec<&ScoredPair> = pairs.iter().collect();
    ordered.sort_by(|x, y| y.score.total_cmp(&x.score).then(x.order.cmp(&y.order)));
    for p in ordered {
        let (Some(&a), Some(&b)) = (index.get(&p.a), index.get(&p.b)) else {
            continue;
        };
        if cl.can_merge(a, b) {
            cl.merge(a, b);
        }
    }

    let mut out = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        let root = cl.find(i);
        let gid = match cl.gid[root] {
            Some(g) => g,
            None => {
                let g = map.mint();
                cl.gid[root] = Some(g);
                g
            }
        };
        out.insert(*k, map.bind(*k, gid));
    }
    out
}

/// Runs cross-view matching over all views for one frame and keeps the
/// global-ID map.
#[derive(Debug, Clone)]
pub struct CrossViewMatcher {
    config: CvConfig,
    map: GlobalIdMap,
}

impl CrossViewMatcher {
    pub fn new(config: CvConfig) -> Result<Self> {
        config.validate()?;
        Ok(CrossViewMatcher { config, map: GlobalIdMap::new() })
    }

    pub fn global_ids(&self) -> &GlobalIdMap {
        &self.map
    }

    /// Pairwise matches for the tracks updated at `frame`.
    pub fn pairwise(&self, views: &[SingleViewTracker], frame: u32) -> Result<Vec<ScoredPair>> {
        let members: Vec<Vec<(TrackKey, &EmbeddingVec)>> = views
            .iter()
            .map(|sv| {
                sv.tracks()
                    .iter()
                    .filter(|t| t.status == TrackStatus::Confirmed && t.last_frame == frame)
                    .map(|t| (t.key(), &t.smoothed_cross_emb))
                    .collect()
            })
            .collect();

        let mut pairs = Vec::new();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let (mi, mj) = (&members[i], &members[j]);
                if mi.is_empty() || mj.is_empty() {
                    continue;
                }
                let ei: Vec<EmbeddingVec> = mi.iter().map(|(_, e)| (*e).clone()).collect();
                let ej: Vec<EmbeddingVec> = mj.iter().map(|(_, e)| (*e).clone()).collect();
                let a = association_matrix(&ei, &ej)?;
                let m = if self.config.symmetric {
                    symmetric_matching_matrix(&a, &self.config)?
                } else {
                    let tau = adaptive_temperature(self.config.epsilon, self.config.gamma, a.cols())?;
                    matching_matrix(&a, tau, self.config.delta_c)
                };
                for (r, c) in pair_match(&m).pairs {
                    pairs.push(ScoredPair { a: mi[r].0, b: mj[c].0, score: m.get(r, c), order: (i, j, r) });
                }
            }
        }
        Ok(pairs)
    }

    /// Matches the frame and writes global IDs onto every live confirmed track.
    pub fn step(&mut self, views: &mut [SingleViewTracker], frame: u32) -> Result<()> {
        let pairs = self.pairwise(views, frame)?;
        let live: Vec<TrackKey> = views
            .iter()
            .flat_map(|sv| sv.tracks().iter().filter(|t| t.status == TrackStatus::Confirmed).map(|t| t.key()))
            .collect();
        let bound = resolve_global_ids(&mut self.map, &live, &pairs);
        for sv in views.iter_mut() {
            for t in sv.tracks_mut() {
                if let Some(g) = bound.get(&t.key()) {
                    t.global_id = Some(*g);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const LN4: f64 = 1.386_294_361_119_890_6;

    fn key(v: usize, id: u32) -> TrackKey {
        TrackKey { view: ViewId(v), local_id: id }
    }

    #[test]
    fn temperature_values() {
        let t3 = adaptive_temperature(0.5, 0.5, 3).unwrap();
        assert!((t3 - 2.0 * LN4).abs() < 1e-12);
        let t1 = adaptive_temperature(0.5, 0.5, 1).unwrap();
        assert!((t1 - 2.0 * core::f64::consts::LN_2).abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for a_c in 1..=100 {
            let t = adaptive_temperature(0.5, 0.5, a_c).unwrap();
            assert!(t > prev);
            prev = t;
        }
        assert!(adaptive_temperature(0.5, 1.0, 3).is_err());
        assert!(adaptive_temperature(0.0, 0.5, 3).is_err());
    }

    #[test]
    fn softmax_cases() {
        let single = AssociationMatrix::from_rows(&[vec![0.3], vec![-0.7]]);
        let m = row_softmax(&single, 5.0);
        assert_eq!((m.get(0, 0), m.get(1, 0)), (1.0, 1.0));

        let ties = AssociationMatrix::from_rows(&[vec![0.4, 0.4]]);
        let m = row_softmax(&ties, 2.0);
        assert_eq!((m.get(0, 0), m.get(0, 1)), (0.5, 0.5));
        let m = matching_matrix(&ties, 2.0, 0.5);
        assert_eq!((m.get(0, 0), m.get(0, 1)), (0.0, 0.0));

        let a = AssociationMatrix::from_rows(&[vec![1.0, -1.0]]);
        let tau = 2.0 * LN4;
        let m = matching_matrix(&a, tau, 0.5);
        // 1 / (1 + e^{-2τ}) = 1 / (1 + 4^{-4}) = 256/257.
        assert!((m.get(0, 0) - 256.0 / 257.0).abs() < 1e-12);
        assert!((m.get(0, 0) - 0.99611).abs() < 1e-5);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn pair_match_cases() {
        let diag = MatchingMatrix::from_rows(&[vec![0.9, 0.0, 0.0], vec![0.0, 0.8, 0.0], vec![0.0, 0.0, 0.7]]);
        assert_eq!(pair_match(&diag).pairs, vec![(0, 0), (1, 1), (2, 2)]);
        let zero = MatchingMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(pair_match(&zero).pairs.is_empty());
        // 3x2 with one dominant entry per row; enumeration of the 6
        // injective maps of 2 columns gives {(0,1),(2,0)} = 1.6.
        let m = MatchingMatrix::from_rows(&[vec![0.0, 0.9], vec![0.6, 0.0], vec![0.7, 0.0]]);
        assert_eq!(pair_match(&m).pairs, vec![(0, 1), (2, 0)]);
    }

    #[test]
    fn association_is_scale_free() {
        let e = |v: &[f64]| EmbeddingVec(v.to_vec());
        let a = association_matrix(&[e(&[1.0, 0.0]), e(&[0.0, 2.0])], &[e(&[3.0, 0.0])]).unwrap();
        let b = association_matrix(&[e(&[7.0, 0.0]), e(&[0.0, 0.5])], &[e(&[0.1, 0.0])]).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.get(0, 0), a.get(1, 0)), (1.0, 0.0));
    }

    #[test]
    fn transitive_conflict_rejected() {
        let (a, b, c, d) = (key(1, 0), key(2, 0), key(3, 0), key(1, 1));
        let pairs = [
            ScoredPair { a, b, score: 0.9, order: (1, 2, 0) },
            ScoredPair { a: b, b: c, score: 0.8, order: (2, 3, 0) },
            ScoredPair { a: d, b: c, score: 0.7, order: (1, 3, 1) },
        ];
        let mut map = GlobalIdMap::new();
        let out = resolve_global_ids(&mut map, &[a, b, c, d], &pairs);
        assert_eq!(out[&a], out[&b]);
        assert_eq!(out[&b], out[&c]);
        assert_ne!(out[&d], out[&a]);
        assert_eq!(map.minted(), 2);
    }

    #[test]
    fn no_matches_gives_singletons_and_ids_stick() {
        let mut map = GlobalIdMap::new();
        let keys = [key(0, 0), key(1, 0), key(2, 0)];
        let out = resolve_global_ids(&mut map, &keys, &[]);
        let mut ids: Vec<u64> = out.values().copied().collect();
        ids.dedup();
        assert_eq!(ids.len(), 3);

        // A later match between two tracks holding different IDs is refused.
        let p = ScoredPair { a: keys[0], b: keys[1], score: 0.99, order: (0, 1, 0) };
        let again = resolve_global_ids(&mut map, &keys, &[p]);
        assert_eq!(again, out);

        // A newcomer adopts the ID of the cluster it matches.
        let newcomer = key(1, 5);
        let p = ScoredPair { a: keys[2], b: newcomer, score: 0.7, order: (1, 2, 0) };
        let out = resolve_global_ids(&mut map, &[keys[0], keys[2], newcomer], &[p]);
        assert_eq!(out[&newcomer], out[&keys[2]]);
        assert_eq!(map.minted(), 3);
    }

    #[test]
    fn live_same_view_track_blocks_adoption() {
        let mut map = GlobalIdMap::new();
        let (a, b) = (key(0, 0), key(1, 0));
        let p = ScoredPair { a, b, score: 0.9, order: (0, 1, 0) };
        let out = resolve_global_ids(&mut map, &[a, b], &[p]);
        assert_eq!(out[&a], out[&b]);
        // Second view-0 track matches b while a is still alive.
        let a2 = key(0, 1);
        let p = ScoredPair { a: a2, b, score: 0.95, order: (0, 1, 1) };
        let out2 = resolve_global_ids(&mut map, &[a, b, a2], &[p]);
        assert_ne!(out2[&a2], out2[&a]);
    }
}
